#include "brflow/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <ostream>

#include "brflow/error.hpp"
#include "brflow/quadrature.hpp"

namespace brflow {

namespace {

constexpr double kPi = 3.14159265358979323846;

Mat zero_grad() { return Mat::Zero(); }

ExactSolution stokes_sinusoidal(double nu) {
  ExactSolution s;
  s.u = [](const Vec& x, double) {
    const double sx = std::sin(kPi * x.x()), sy = std::sin(kPi * x.y());
    return Vec(-sx * sx * std::sin(2 * kPi * x.y()), std::sin(2 * kPi * x.x()) * sy * sy, 0.0);
  };
  s.grad_u = [](const Vec& x, double) {
    const double a = kPi * x.x(), b = kPi * x.y();
    Mat g = zero_grad();
    g(0, 0) = -2 * kPi * std::sin(a) * std::cos(a) * std::sin(2 * b);
    g(0, 1) = -2 * kPi * std::sin(a) * std::sin(a) * std::cos(2 * b);
    g(1, 0) = 2 * kPi * std::cos(2 * a) * std::sin(b) * std::sin(b);
    g(1, 1) = 2 * kPi * std::sin(2 * a) * std::sin(b) * std::cos(b);
    return g;
  };
  const double shift = (std::exp(1.0) - 1.0) * (std::exp(1.0) - 1.0);
  s.p = [shift](const Vec& x, double) { return std::exp(x.x() + x.y()) - shift; };
  s.f = [nu](const Vec& x, double) {
    const double sx = std::sin(kPi * x.x()), sy = std::sin(kPi * x.y());
    const double lap1 = -2 * kPi * kPi * std::sin(2 * kPi * x.y()) * (1 - 4 * sx * sx);
    const double lap2 = 2 * kPi * kPi * std::sin(2 * kPi * x.x()) * (1 - 4 * sy * sy);
    const double e = std::exp(x.x() + x.y());
    return Vec(-nu * lap1 + e, -nu * lap2 + e, 0.0);
  };
  return s;
}

ExactSolution oseen_exponential(double nu, const Vec& b) {
  ExactSolution s;
  s.u = [](const Vec& x, double) { return Vec(std::exp(x.y()), std::exp(x.x()), 0.0); };
  s.grad_u = [](const Vec& x, double) {
    Mat g = zero_grad();
    g(0, 1) = std::exp(x.y());
    g(1, 0) = std::exp(x.x());
    return g;
  };
  const double shift = (std::exp(1.0) - 1.0) * (std::exp(1.0) - 1.0);
  s.p = [shift](const Vec& x, double) { return std::exp(x.x() + x.y()) - shift; };
  s.f = [nu, b](const Vec& x, double) {
    const double ex = std::exp(x.x()), ey = std::exp(x.y()), exy = std::exp(x.x() + x.y());
    return Vec(-nu * ey + b.y() * ey + exy, -nu * ex + b.x() * ex + exy, 0.0);
  };
  return s;
}

ExactSolution kovasznay(double nu) {
  const double lam = 1.0 / (2 * nu) - std::sqrt(1.0 / (4 * nu * nu) + 4 * kPi * kPi);
  ExactSolution s;
  s.u = [lam](const Vec& x, double) {
    const double e = std::exp(lam * x.x());
    return Vec(1 - e * std::cos(2 * kPi * x.y()), lam / (2 * kPi) * e * std::sin(2 * kPi * x.y()), 0.0);
  };
  s.grad_u = [lam](const Vec& x, double) {
    const double e = std::exp(lam * x.x());
    const double c = std::cos(2 * kPi * x.y()), sn = std::sin(2 * kPi * x.y());
    Mat g = zero_grad();
    g(0, 0) = -lam * e * c;
    g(0, 1) = 2 * kPi * e * sn;
    g(1, 0) = lam * lam / (2 * kPi) * e * sn;
    g(1, 1) = lam * e * c;
    return g;
  };
  const double shift = (std::exp(3 * lam) - std::exp(-lam)) / (8 * lam);
  s.p = [lam, shift](const Vec& x, double) { return -0.5 * std::exp(2 * lam * x.x()) + shift; };
  s.f = [](const Vec&, double) { return Vec::Zero().eval(); };
  return s;
}

// u = grad chi with chi = t^2 (5 x^4 y - 10 x^2 y^3 + y^5)
ExactSolution potential2d() {
  ExactSolution s;
  s.u = [](const Vec& x, double t) {
    const double a = x.x(), b = x.y();
    return Vec(t * t * (20 * a * a * a * b - 20 * a * b * b * b),
               t * t * (5 * a * a * a * a - 30 * a * a * b * b + 5 * b * b * b * b), 0.0);
  };
  s.grad_u = [](const Vec& x, double t) {
    const double a = x.x(), b = x.y(), t2 = t * t;
    Mat g = zero_grad();
    g(0, 0) = t2 * (60 * a * a * b - 20 * b * b * b);
    g(0, 1) = t2 * (20 * a * a * a - 60 * a * b * b);
    g(1, 0) = g(0, 1);
    g(1, 1) = -g(0, 0);
    return g;
  };
  s.p = [u = s.u](const Vec& x, double t) {
    const double a = x.x(), b = x.y();
    const double chi_t = 2 * t * (5 * a * a * a * a * b - 10 * a * a * b * b * b + b * b * b * b * b);
    // mean of |u|^2 / 2 over [-1/2, 1/2]^2 is t^4 * 83 / 2016
    return -0.5 * u(x, t).squaredNorm() - chi_t + t * t * t * t * 83.0 / 2016.0;
  };
  s.f = [](const Vec&, double) { return Vec::Zero().eval(); };
  return s;
}

// u = grad(x y z)
ExactSolution potential3d() {
  ExactSolution s;
  s.u = [](const Vec& x, double) { return Vec(x.y() * x.z(), x.x() * x.z(), x.x() * x.y()); };
  s.grad_u = [](const Vec& x, double) {
    Mat g;
    g << 0.0, x.z(), x.y(), x.z(), 0.0, x.x(), x.y(), x.x(), 0.0;
    return g;
  };
  s.p = [u = s.u](const Vec& x, double) { return -0.5 * u(x, 0.0).squaredNorm() + 1.0 / 6.0; };
  s.f = [](const Vec&, double) { return Vec::Zero().eval(); };
  return s;
}

template <class E>
E parse_variant(const std::string& name, const std::vector<std::pair<std::string, E>>& table,
                const std::string& kind) {
  for (const auto& [n, v] : table)
    if (n == name) return v;
  std::string known;
  for (const auto& [n, v] : table) known += (known.empty() ? "" : ", ") + n;
  throw ConfigError("unknown " + kind + " scheme '" + name + "' (expected one of: " + known + ")");
}

StokesVariant stokes_variant(const std::string& s) {
  return parse_variant<StokesVariant>(s,
                                      {{"stabilized-robust", StokesVariant::StabilizedRobust},
                                       {"stabilized-plain", StokesVariant::StabilizedPlain},
                                       {"unmodified-BR-robust", StokesVariant::UnmodifiedRobust}},
                                      "Stokes");
}

OseenVariant oseen_variant(const std::string& s) {
  return parse_variant<OseenVariant>(s,
                                     {{"eafe-stabilized", OseenVariant::EafeStabilized},
                                      {"eafe", OseenVariant::EafeStabilized},
                                      {"eafe-unstabilized", OseenVariant::EafeUnstabilized},
                                      {"classical", OseenVariant::Classical}},
                                     "Oseen");
}

NavierStokesVariant ns_variant(const std::string& s) {
  return parse_variant<NavierStokesVariant>(
      s, {{"eafe", NavierStokesVariant::Eafe}, {"classical", NavierStokesVariant::Classical}},
      "Navier-Stokes");
}

UnsteadyScheme unsteady_scheme(const std::string& s) {
  return parse_variant<UnsteadyScheme>(s,
                                       {{"TD1", UnsteadyScheme::TD1},
                                        {"eafe", UnsteadyScheme::TD1},
                                        {"TD2", UnsteadyScheme::TD2},
                                        {"TD-classical", UnsteadyScheme::Classical},
                                        {"classical", UnsteadyScheme::Classical}},
                                       "time-dependent");
}

Solution solve_steady(const BenchmarkCase& c, const SimplicialMesh& mesh, const std::string& scheme,
                      double nu, const SolverControls& controls) {
  VectorFunction f, g;
  if (c.has_exact) {
    const ExactSolution ex = c.exact(nu);
    f = [ex](const Vec& x) { return ex.f(x, 0.0); };
    g = [ex](const Vec& x) { return ex.u(x, 0.0); };
  } else {
    f = c.forcing;
    g = [](const Vec&) { return Vec::Zero().eval(); };
  }
  switch (c.kind) {
    case ProblemKind::Stokes: return solve_stokes(mesh, nu, f, g, stokes_variant(scheme), controls);
    case ProblemKind::Oseen: {
      const std::vector<Vec> b(static_cast<std::size_t>(mesh.num_cells()), c.convection);
      return solve_oseen(mesh, nu, b, f, g, oseen_variant(scheme), controls);
    }
    case ProblemKind::NavierStokes: return solve_navier_stokes(mesh, nu, f, g, ns_variant(scheme), controls);
    case ProblemKind::Unsteady: break;
  }
  throw ConfigError("case " + c.id + " is time dependent");
}

// Reference solutions are expensive; keep one per (case, nu).
const Solution& reference_solution(const BenchmarkCase& c, double nu, const SolverControls& controls) {
  static std::mutex mutex;
  static std::map<std::pair<std::string, double>, std::pair<std::unique_ptr<SimplicialMesh>, Solution>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto key = std::make_pair(c.id, nu);
  auto it = cache.find(key);
  if (it == cache.end()) {
    auto mesh = std::make_unique<SimplicialMesh>(uniform_rectangle_mesh(
        c.mesh.x, c.mesh.y, c.reference_n, c.reference_n, c.mesh.pattern));
    Solution sol = solve_steady(c, *mesh, c.default_scheme, nu, controls);
    it = cache.emplace(key, std::make_pair(std::move(mesh), std::move(sol))).first;
  }
  return it->second.second;
}

ErrorRecord record_from(const SolverReport& r) {
  ErrorRecord e;
  e.ndof = r.ndof;
  e.condensed_dof = r.condensed_dof;
  e.full_dof = r.full_dof;
  e.picard_iters = r.iterations;
  e.status = to_string(r.status);
  return e;
}

double mean_pressure(const SimplicialMesh& mesh, const std::function<double(const Vec&)>& p) {
  const QuadratureRule& rule = simplex_rule(mesh.dim(), 4);
  double s = 0.0;
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    double local = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q)
      local += rule.weights[q] * p(barycentric_point(mesh, c, rule.points[q]));
    s += local * mesh.geometry(c).volume;
  }
  return s / mesh.measure();
}

}  // namespace

std::vector<std::string> builtin_case_ids() {
  return {"stokes-sinusoidal", "oseen-exponential", "oseen-rotational", "kovasznay", "potential2d", "potential3d"};
}

BenchmarkCase builtin_case(const std::string& id) {
  BenchmarkCase c;
  c.id = id;
  if (id == "stokes-sinusoidal") {
    c.kind = ProblemKind::Stokes;
    c.exact = stokes_sinusoidal;
    c.nus = {1.0, 1e-3, 1e-6};
    c.levels = 4;
    c.default_scheme = "stabilized-robust";
    c.schemes = {"stabilized-robust", "stabilized-plain", "unmodified-BR-robust"};
  } else if (id == "oseen-exponential") {
    c.kind = ProblemKind::Oseen;
    c.convection = Vec(10.0, 1.0, 0.0);
    c.mesh.nx = c.mesh.ny = 16;
    c.exact = [b = c.convection](double nu) { return oseen_exponential(nu, b); };
    c.nus = {1e-4};
    c.levels = 1;
    c.default_scheme = "eafe-stabilized";
    c.schemes = {"eafe-stabilized", "eafe-unstabilized", "classical"};
  } else if (id == "oseen-rotational") {
    c.kind = ProblemKind::Oseen;
    c.convection = Vec(10.0, 1.0, 0.0);
    c.mesh.nx = c.mesh.ny = 16;
    c.has_exact = false;
    c.forcing = [](const Vec& x) { return Vec(-10.0 * x.y(), 10.0 * x.x(), 0.0); };
    c.reference_n = 160;
    c.nus = {1e-3};
    c.levels = 1;
    c.default_scheme = "eafe-stabilized";
    c.schemes = {"eafe-stabilized", "eafe-unstabilized", "classical"};
  } else if (id == "kovasznay") {
    c.kind = ProblemKind::NavierStokes;
    c.mesh.x = {-0.5, 1.5};
    c.mesh.y = {0.0, 2.0};
    c.exact = kovasznay;
    c.nus = {1.0, 1e-3, 5e-4, 1e-4};
    c.levels = 5;
    c.default_scheme = "eafe";
    c.schemes = {"eafe", "classical"};
  } else if (id == "potential2d") {
    c.kind = ProblemKind::Unsteady;
    c.mesh.x = {-0.5, 0.5};
    c.mesh.y = {-0.5, 0.5};
    c.mesh.pattern = GridPattern::UnionJack;
    c.mesh.nx = 32;
    c.mesh.ny = 32;
    c.exact = [](double) { return potential2d(); };
    c.nus = {1.0, 1e-6};
    c.levels = 1;
    c.default_scheme = "TD1";
    c.schemes = {"TD1", "TD2", "TD-classical"};
    c.tau = 0.1;
    c.t_end = 2.0;
    c.record_times = {0.5, 1.0, 1.5, 2.0};
  } else if (id == "potential3d") {
    c.kind = ProblemKind::NavierStokes;
    c.mesh.dim = 3;
    c.mesh.n = 8;
    c.exact = [](double) { return potential3d(); };
    c.nus = {1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5};
    c.levels = 1;
    c.default_scheme = "eafe";
    c.schemes = {"eafe", "classical"};
  } else {
    std::string known;
    for (const auto& k : builtin_case_ids()) known += (known.empty() ? "" : ", ") + k;
    throw ConfigError("unknown case '" + id + "' (expected one of: " + known + ")");
  }
  return c;
}

SimplicialMesh case_mesh(const BenchmarkCase& c, int level) {
  if (level < 1) throw ConfigError("mesh level must be >= 1");
  const MeshFamily& m = c.mesh;
  if (m.dim == 3) return uniform_box_mesh(m.x, m.y, m.z, m.n << (level - 1));
  SimplicialMesh mesh = uniform_rectangle_mesh(m.x, m.y, m.nx, m.ny, m.pattern);
  for (int l = 1; l < level; ++l) mesh = quad_refine(mesh);
  return mesh;
}

ErrorRecord compute_errors(const ExactSolution& exact, const FeField& velocity, const FeField& pressure,
                           double t) {
  const SimplicialMesh& mesh = *velocity.mesh;
  const QuadratureRule& rule = simplex_rule(mesh.dim(), 4);
  const FeField linear{SpaceTag::VectorP1, velocity.linear_part(), &mesh};
  const double p_mean = mean_pressure(mesh, [&](const Vec& x) { return exact.p(x, t); });
  double ph_mean = 0.0;
  for (Index c = 0; c < mesh.num_cells(); ++c) ph_mean += pressure.coefficients[c] * mesh.geometry(c).volume;
  ph_mean /= mesh.measure();

  double eu = 0.0, eh = 0.0, ehf = 0.0, ep = 0.0;
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const double vol = mesh.geometry(c).volume;
    const double ph = pressure.coefficients[c] - ph_mean;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const Vec x = barycentric_point(mesh, c, rule.points[q]);
      const double w = rule.weights[q] * vol;
      const PointValue lv = evaluate_barycentric(linear, c, rule.points[q]);
      const Mat gu = exact.grad_u(x, t);
      eu += w * (exact.u(x, t) - lv.value).squaredNorm();
      eh += w * (gu - lv.gradient).squaredNorm();
      if (velocity.space == SpaceTag::BRFull)
        ehf += w * (gu - evaluate_barycentric(velocity, c, rule.points[q]).gradient).squaredNorm();
      const double dp = exact.p(x, t) - p_mean - ph;
      ep += w * dp * dp;
    }
  }
  ErrorRecord r;
  r.err_u_l2 = std::sqrt(eu);
  r.err_u_h1 = std::sqrt(eh);
  r.err_u_h1_full = velocity.space == SpaceTag::BRFull ? std::sqrt(ehf) : r.err_u_h1;
  r.err_p_l2 = std::sqrt(ep);
  r.t = t;
  return r;
}

ErrorRecord compute_errors(const Solution& reference, const FeField& velocity, const FeField& pressure) {
  const SimplicialMesh& fine = *reference.velocity.mesh;
  const SimplicialMesh& coarse = *velocity.mesh;
  const PointLocator locator(coarse);
  const FeField linear{SpaceTag::VectorP1, velocity.linear_part(), &coarse};
  // Linear part against linear part: at small nu the reference bubbles carry
  // O(1/nu) gradients that would swamp the comparison.
  const FeField ref_linear{SpaceTag::VectorP1, reference.velocity.linear_part(), &fine};
  const QuadratureRule& rule = simplex_rule(fine.dim(), 4);
  double ph_mean = 0.0;
  for (Index c = 0; c < coarse.num_cells(); ++c) ph_mean += pressure.coefficients[c] * coarse.geometry(c).volume;
  ph_mean /= coarse.measure();

  double eu = 0.0, eh = 0.0, ehf = 0.0, ep = 0.0;
  for (Index c = 0; c < fine.num_cells(); ++c) {
    const double vol = fine.geometry(c).volume;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const Vec x = barycentric_point(fine, c, rule.points[q]);
      std::array<double, 4> lam{};
      const Index cc = locator.locate(x, lam);
      if (cc < 0) throw Error("compute_errors: reference point outside the coarse mesh");
      const PointValue ref = evaluate_barycentric(ref_linear, c, rule.points[q]);
      const PointValue lv = evaluate_barycentric(linear, cc, lam);
      const double w = rule.weights[q] * vol;
      eu += w * (ref.value - lv.value).squaredNorm();
      eh += w * (ref.gradient - lv.gradient).squaredNorm();
      if (velocity.space == SpaceTag::BRFull)
        ehf += w * (evaluate_barycentric(reference.velocity, c, rule.points[q]).gradient -
                    evaluate_barycentric(velocity, cc, lam).gradient)
                       .squaredNorm();
      const double dp = reference.pressure.coefficients[c] - (pressure.coefficients[cc] - ph_mean);
      ep += w * dp * dp;
    }
  }
  ErrorRecord r;
  r.err_u_l2 = std::sqrt(eu);
  r.err_u_h1 = std::sqrt(eh);
  r.err_u_h1_full = velocity.space == SpaceTag::BRFull ? std::sqrt(ehf) : r.err_u_h1;
  r.err_p_l2 = std::sqrt(ep);
  return r;
}

CaseSolution solve_case(const BenchmarkCase& c, const std::string& scheme, double nu, int level,
                        const SolverControls& controls) {
  if (c.kind == ProblemKind::Unsteady) throw ConfigError("solve_case: use run_case for time-dependent cases");
  CaseSolution out{std::make_unique<SimplicialMesh>(case_mesh(c, level)), Solution{}};
  out.solution = solve_steady(c, *out.mesh, scheme, nu, controls);
  return out;
}

std::vector<ErrorRecord> run_case(const BenchmarkCase& c, const std::string& scheme, double nu, int level,
                                  const SolverControls& controls, CaseSolution* keep) {
  auto owned = std::make_unique<SimplicialMesh>(case_mesh(c, level));
  const SimplicialMesh& mesh = *owned;
  auto store = [&](Solution sol) {
    if (!keep) return;
    keep->mesh = std::move(owned);
    keep->solution = std::move(sol);
  };
  std::vector<ErrorRecord> out;
  auto finish = [&](ErrorRecord r) {
    r.case_id = c.id;
    r.scheme = scheme;
    r.level = level;
    r.nu = nu;
    out.push_back(std::move(r));
  };

  if (c.kind != ProblemKind::Unsteady) {
    Solution sol;
    try {
      sol = solve_steady(c, mesh, scheme, nu, controls);
    } catch (const SolveError& e) {
      ErrorRecord r;
      r.err_u_l2 = r.err_u_h1 = r.err_u_h1_full = r.err_p_l2 = std::numeric_limits<double>::quiet_NaN();
      r.status = "diverged";
      finish(r);
      return out;
    }
    ErrorRecord r = c.has_exact ? compute_errors(c.exact(nu), sol.velocity, sol.pressure, 0.0)
                                : compute_errors(reference_solution(c, nu, controls), sol.velocity, sol.pressure);
    const ErrorRecord meta = record_from(sol.report);
    r.ndof = meta.ndof;
    r.condensed_dof = meta.condensed_dof;
    r.full_dof = meta.full_dof;
    r.picard_iters = meta.picard_iters;
    r.status = meta.status;
    r.t.reset();
    finish(r);
    store(std::move(sol));
    return out;
  }

  const UnsteadyScheme ts = unsteady_scheme(scheme);
  const ExactSolution ex = c.exact(nu);
  UnsteadyState state;
  state.velocity = FeField::zero(SpaceTag::BRFull, mesh);
  state.velocity.coefficients.head(mesh.dim() * mesh.num_vertices()) =
      nodal_interpolate(mesh, [&](const Vec& x) { return ex.u(x, 0.0); }).coefficients;
  state.pressure = FeField::zero(SpaceTag::P0Pressure, mesh);
  state.t = 0.0;
  const int steps = static_cast<int>(std::lround(c.t_end / c.tau));
  SolveStatus worst = SolveStatus::Converged;
  int iters = 0;
  SolverReport last;
  bool halted = false;
  for (int n = 1; n <= steps; ++n) {
    const double t = n * c.tau;
    if (!halted) {
      Solution s = step_unsteady(mesh, state, c.tau, nu, ex.f, ex.u, ts, controls);
      iters += s.report.iterations;
      if (static_cast<int>(s.report.status) > static_cast<int>(worst)) worst = s.report.status;
      last = s.report;
      if (!s.velocity.coefficients.allFinite() || !s.pressure.coefficients.allFinite()) {
        halted = true;
        worst = SolveStatus::Diverged;
      } else {
        state.velocity = s.velocity;
        state.pressure = s.pressure;
        state.t = t;
      }
    }
    const bool record = std::any_of(c.record_times.begin(), c.record_times.end(),
                                    [&](double rt) { return std::abs(rt - t) < 1e-9; });
    if (!record) continue;
    ErrorRecord r;
    if (halted) {
      r.err_u_l2 = r.err_u_h1 = r.err_u_h1_full = r.err_p_l2 = std::numeric_limits<double>::quiet_NaN();
    } else {
      r = compute_errors(ex, state.velocity, state.pressure, t);
    }
    r.t = t;
    const ErrorRecord meta = record_from(last);
    r.ndof = meta.ndof;
    r.condensed_dof = meta.condensed_dof;
    r.full_dof = meta.full_dof;
    r.picard_iters = iters;
    r.status = to_string(worst);
    finish(r);
  }
  Solution final_state;
  final_state.velocity = state.velocity;
  final_state.pressure = state.pressure;
  final_state.report = last;
  final_state.report.iterations = iters;
  final_state.report.status = worst;
  store(std::move(final_state));
  return out;
}

std::vector<ErrorRecord> run_convergence(const BenchmarkCase& c, const std::string& scheme,
                                         const std::vector<double>& nus, int levels,
                                         const SolverControls& controls) {
  std::vector<ErrorRecord> out;
  for (double nu : nus)
    for (int level = 1; level <= levels; ++level) {
      auto rows = run_case(c, scheme, nu, level, controls);
      out.insert(out.end(), rows.begin(), rows.end());
    }
  compute_orders(out);
  return out;
}

void compute_orders(std::vector<ErrorRecord>& records) {
  auto order = [](double coarse, double fine) -> std::optional<double> {
    if (!(coarse > 0.0) || !(fine > 0.0) || !std::isfinite(coarse) || !std::isfinite(fine)) return std::nullopt;
    return std::log2(coarse / fine);
  };
  for (auto& r : records) {
    r.order_u.reset();
    r.order_p.reset();
    for (const auto& prev : records) {
      if (prev.case_id != r.case_id || prev.scheme != r.scheme || prev.nu != r.nu || prev.t != r.t) continue;
      if (prev.level != r.level - 1) continue;
      r.order_u = order(prev.err_u_l2, r.err_u_l2);
      r.order_p = order(prev.err_p_l2, r.err_p_l2);
    }
  }
}

const char* const kCsvHeader =
    "case,scheme,level,ndof,nu,t,err_u_l2,err_u_h1,err_p_l2,order_u,order_p,picard_iters,status";

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

}  // namespace

void write_csv(std::ostream& os, const std::vector<ErrorRecord>& records) {
  os << kCsvHeader << '\n';
  for (const auto& r : records) {
    os << r.case_id << ',' << r.scheme << ',' << r.level << ',' << r.ndof << ',' << fmt(r.nu) << ','
       << fmt(r.t) << ',' << fmt(r.err_u_l2) << ',' << fmt(r.err_u_h1) << ',' << fmt(r.err_p_l2) << ','
       << fmt(r.order_u) << ',' << fmt(r.order_p) << ',' << r.picard_iters << ',' << r.status << '\n';
  }
}

PointLocator::PointLocator(const SimplicialMesh& mesh) : mesh_(&mesh) {
  const int d = mesh.dim();
  lo_ = Vec::Constant(std::numeric_limits<double>::max());
  hi_ = Vec::Constant(std::numeric_limits<double>::lowest());
  for (const Vec& v : mesh.vertices()) {
    lo_ = lo_.cwiseMin(v);
    hi_ = hi_.cwiseMax(v);
  }
  const int per_axis = std::max(1, static_cast<int>(std::pow(static_cast<double>(mesh.num_cells()), 1.0 / d)));
  for (int k = 0; k < d; ++k) bins_[k] = per_axis;
  buckets_.resize(static_cast<std::size_t>(bins_[0] * bins_[1] * bins_[2]));
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    Vec clo = Vec::Constant(std::numeric_limits<double>::max());
    Vec chi = Vec::Constant(std::numeric_limits<double>::lowest());
    for (Index v : mesh.cell(c)) {
      clo = clo.cwiseMin(mesh.vertex(v));
      chi = chi.cwiseMax(mesh.vertex(v));
    }
    const auto a = bin_of(clo), b = bin_of(chi);
    for (int i = a[0]; i <= b[0]; ++i)
      for (int j = a[1]; j <= b[1]; ++j)
        for (int k = a[2]; k <= b[2]; ++k) buckets_[(k * bins_[1] + j) * bins_[0] + i].push_back(c);
  }
}

std::array<int, 3> PointLocator::bin_of(const Vec& x) const {
  std::array<int, 3> b{0, 0, 0};
  for (int k = 0; k < mesh_->dim(); ++k) {
    const double span = hi_[k] - lo_[k];
    const int i = span > 0.0 ? static_cast<int>((x[k] - lo_[k]) / span * bins_[k]) : 0;
    b[k] = std::clamp(i, 0, bins_[k] - 1);
  }
  return b;
}

Index PointLocator::locate(const Vec& x, std::array<double, 4>& lambda) const {
  const int d = mesh_->dim();
  const auto b = bin_of(x);
  Index best = -1;
  double best_min = -std::numeric_limits<double>::max();
  std::array<double, 4> best_lam{};
  for (Index c : buckets_[(b[2] * bins_[1] + b[1]) * bins_[0] + b[0]]) {
    const auto& geo = mesh_->geometry(c);
    const auto ids = mesh_->cell(c);
    std::array<double, 4> lam{0.0, 0.0, 0.0, 0.0};
    double mn = 1.0;
    for (int i = 0; i <= d; ++i) {
      // lambda_i is affine with gradient grad_lambda_i and vanishes on the opposite face
      const Vec& on_face = mesh_->vertex(ids[(i + 1) % (d + 1)]);
      lam[i] = geo.grad_lambda[i].dot(x - on_face);
      mn = std::min(mn, lam[i]);
    }
    if (mn > best_min) {
      best_min = mn;
      best = c;
      best_lam = lam;
    }
  }
  if (best < 0 || best_min < -1e-10) return -1;
  lambda = best_lam;
  return best;
}

}  // namespace brflow
