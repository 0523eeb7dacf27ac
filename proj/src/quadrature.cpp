#include "brflow/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace brflow {

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  // Golub-Welsch on the symmetric Jacobi matrix of the Legendre recurrence
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double b = k / std::sqrt(4.0 * k * k - 1.0);
    jac(k, k - 1) = b;
    jac(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jac);
  nodes.resize(n);
  weights.resize(n);
  for (int k = 0; k < n; ++k) {
    const double v0 = eig.eigenvectors()(0, k);
    nodes[k] = 0.5 * (eig.eigenvalues()(k) + 1.0);
    weights[k] = v0 * v0;  // sums to one on [0, 1]
  }
}

namespace {

QuadratureRule collapsed_rule(int dim, int degree) {
  QuadratureRule r;
  r.dim = dim;
  r.degree = degree;
  // the Duffy Jacobian raises the degree in the collapsed directions by dim-1
  const int n = std::max(1, (degree + dim + 1) / 2 + 1);
  std::vector<double> x, w;
  gauss_legendre(n, x, w);
  if (dim == 1) {
    for (int i = 0; i < n; ++i) {
      r.points.push_back({1.0 - x[i], x[i], 0.0, 0.0});
      r.weights.push_back(w[i]);
    }
  } else if (dim == 2) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double u = x[i];
        const double v = x[j] * (1.0 - u);
        r.points.push_back({1.0 - u - v, u, v, 0.0});
        r.weights.push_back(2.0 * w[i] * w[j] * (1.0 - u));
      }
    }
  } else {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        for (int k = 0; k < n; ++k) {
          const double u = x[i];
          const double v = x[j] * (1.0 - u);
          const double s = x[k] * (1.0 - u) * (1.0 - x[j]);
          r.points.push_back({1.0 - u - v - s, u, v, s});
          r.weights.push_back(6.0 * w[i] * w[j] * w[k] * (1.0 - u) * (1.0 - u) * (1.0 - x[j]));
        }
      }
    }
  }
  return r;
}

QuadratureRule make_rule(int dim, int degree) {
  QuadratureRule r;
  r.dim = dim;
  r.degree = degree;
  if (dim == 1) {
    const int n = std::max(1, (degree + 2) / 2);
    std::vector<double> x, w;
    gauss_legendre(n, x, w);
    for (int i = 0; i < n; ++i) {
      r.points.push_back({1.0 - x[i], x[i], 0.0, 0.0});
      r.weights.push_back(w[i]);
    }
    return r;
  }
  if (degree <= 1) {
    const double c = 1.0 / (dim + 1);
    r.points.push_back({c, c, c, dim == 3 ? c : 0.0});
    r.weights.push_back(1.0);
    return r;
  }
  if (dim == 2 && degree == 2) {
    const double a = 2.0 / 3.0, b = 1.0 / 6.0;
    r.points = {{a, b, b, 0.0}, {b, a, b, 0.0}, {b, b, a, 0.0}};
    r.weights = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    return r;
  }
  if (dim == 2 && degree <= 4) {
    // Dunavant, 6 points
    const double a1 = 0.44594849091596488632, b1 = 1.0 - 2.0 * a1, w1 = 0.22338158967801146570;
    const double a2 = 0.09157621350977074346, b2 = 1.0 - 2.0 * a2, w2 = 0.10995174365532186764;
    r.points = {{b1, a1, a1, 0.0}, {a1, b1, a1, 0.0}, {a1, a1, b1, 0.0},
                {b2, a2, a2, 0.0}, {a2, b2, a2, 0.0}, {a2, a2, b2, 0.0}};
    r.weights = {w1, w1, w1, w2, w2, w2};
    return r;
  }
  if (dim == 3 && degree == 2) {
    const double a = 0.5854101966249685, b = 0.1381966011250105;
    r.points = {{a, b, b, b}, {b, a, b, b}, {b, b, a, b}, {b, b, b, a}};
    r.weights = {0.25, 0.25, 0.25, 0.25};
    return r;
  }
  return collapsed_rule(dim, degree);
}

}  // namespace

const QuadratureRule& simplex_rule(int dim, int degree) {
  if (dim < 1 || dim > 3) throw std::invalid_argument("simplex_rule: dim must be 1, 2 or 3");
  if (degree < 0) degree = 0;
  static std::mutex mutex;
  static std::map<std::pair<int, int>, QuadratureRule> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find({dim, degree});
  if (it == cache.end()) it = cache.emplace(std::make_pair(dim, degree), make_rule(dim, degree)).first;
  return it->second;
}

}  // namespace brflow
