#pragma once

#include <array>
#include <vector>

namespace brflow {

/// Quadrature rule on a reference simplex of dimension 1, 2 or 3.
///
/// Points are given in barycentric coordinates (dim+1 entries, the rest zero)
/// and the weights sum to one, so an integral over a physical simplex S is
/// |S| * sum_q weights[q] * f(x(points[q])).
struct QuadratureRule {
  int dim = 0;
  int degree = 0;
  std::vector<std::array<double, 4>> points;
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
};

/// Rule on the dim-simplex that is exact for polynomials of total degree `degree`.
///
/// 2D uses the classical symmetric rules up to degree 4 (centroid, 3-point,
/// 6-point); 3D uses the centroid and 4-point rules up to degree 2. Beyond
/// that a collapsed Gauss-Legendre product rule with positive weights is used.
const QuadratureRule& simplex_rule(int dim, int degree);

/// Gauss-Legendre nodes and weights on [0, 1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace brflow
