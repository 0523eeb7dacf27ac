#include "brflow/schemes.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>
#ifdef BRFLOW_HAVE_UMFPACK
#include <Eigen/UmfPackSupport>
#endif

#include "brflow/error.hpp"

namespace brflow {

std::string to_string(StokesVariant v) {
  switch (v) {
    case StokesVariant::StabilizedRobust: return "stabilized-robust";
    case StokesVariant::StabilizedPlain: return "stabilized-plain";
    case StokesVariant::UnmodifiedRobust: return "unmodified-BR-robust";
  }
  return "?";
}

std::string to_string(OseenVariant v) {
  switch (v) {
    case OseenVariant::EafeStabilized: return "eafe-stabilized";
    case OseenVariant::EafeUnstabilized: return "eafe-unstabilized";
    case OseenVariant::Classical: return "classical";
  }
  return "?";
}

std::string to_string(NavierStokesVariant v) {
  return v == NavierStokesVariant::Eafe ? "eafe" : "classical";
}

std::string to_string(UnsteadyScheme v) {
  switch (v) {
    case UnsteadyScheme::TD1: return "TD1";
    case UnsteadyScheme::TD2: return "TD2";
    case UnsteadyScheme::Classical: return "TD-classical";
  }
  return "?";
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIterations: return "max-iter";
    case SolveStatus::Diverged: return "diverged";
  }
  return "?";
}

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;
using Clock = std::chrono::steady_clock;

SparseMatrix selection(const std::vector<Index>& rows, Index full_size) {
  Triplets t;
  t.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) t.emplace_back(static_cast<Index>(i), rows[i], 1.0);
  SparseMatrix s(static_cast<Index>(rows.size()), full_size);
  s.setFromTriplets(t.begin(), t.end());
  return s;
}

// Append the entries of m shifted by (r0, c0).
void append(Triplets& t, const SparseMatrix& m, Index r0, Index c0, bool transpose = false) {
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
      if (transpose) t.emplace_back(r0 + it.col(), c0 + it.row(), it.value());
      else t.emplace_back(r0 + it.row(), c0 + it.col(), it.value());
    }
}

// Remove row and column `pin` of a square system.
SparseMatrix drop_index(const SparseMatrix& a, Index pin) {
  Triplets t;
  t.reserve(static_cast<std::size_t>(a.nonZeros()));
  for (int k = 0; k < a.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(a, k); it; ++it) {
      const Index r = it.row(), c = it.col();
      if (r == pin || c == pin) continue;
      t.emplace_back(r > pin ? r - 1 : r, c > pin ? c - 1 : c, it.value());
    }
  SparseMatrix out(a.rows() - 1, a.cols() - 1);
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

Eigen::VectorXd drop_entry(const Eigen::VectorXd& v, Index pin) {
  Eigen::VectorXd out(v.size() - 1);
  out << v.head(pin), v.tail(v.size() - pin - 1);
  return out;
}

Eigen::VectorXd insert_zero(const Eigen::VectorXd& v, Index pin) {
  Eigen::VectorXd out(v.size() + 1);
  out << v.head(pin), 0.0, v.tail(v.size() - pin);
  return out;
}

void zero_mean(const SimplicialMesh& mesh, Eigen::Ref<Eigen::VectorXd> p) {
  double s = 0.0;
  for (Index c = 0; c < mesh.num_cells(); ++c) s += p[c] * mesh.geometry(c).volume;
  p.array() -= s / mesh.measure();
}

bool finite(const Eigen::VectorXd& v) { return v.allFinite(); }

}  // namespace

bool BlockSaddleSystem::bubble_block_diagonal() const {
  for (int k = 0; k < a_bb.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(a_bb, k); it; ++it)
      if (it.row() != it.col() && it.value() != 0.0) return false;
  return true;
}

BlockSaddleSystem restrict_system(const DofLayout& layout, const VelocityBlocks& a,
                                  const DivergenceBlocks& div, const LoadVector& load,
                                  const FeField& lift) {
  const Eigen::VectorXd gl = lift.linear_part();
  const Eigen::VectorXd gb = lift.bubble_part();
  const SparseMatrix sl = selection(layout.interior_linear(), layout.full_linear_size());
  const SparseMatrix sb = selection(layout.interior_faces(), layout.full_bubble_size());
  const SparseMatrix slt = sl.transpose(), sbt = sb.transpose();

  BlockSaddleSystem sys;
  sys.layout = &layout;
  sys.a_bb = sb * a.bb * sbt;
  sys.a_bl = sb * a.bl * slt;
  sys.a_lb = sl * a.lb * sbt;
  sys.a_ll = sl * a.ll * slt;
  sys.a_bp = sb * div.bp;
  sys.a_lp = sl * div.lp;
  sys.f_b = sb * (load.bubble - a.bb * gb - a.bl * gl);
  sys.f_l = sl * (load.linear - a.lb * gb - a.ll * gl);
  sys.f_p = -(div.bp.transpose() * gb + div.lp.transpose() * gl);
  return sys;
}

CondensedSystem condense(const BlockSaddleSystem& sys) {
  if (!sys.bubble_block_diagonal()) throw Error("condense: the bubble block is not diagonal");
  const Index nb = sys.a_bb.rows();
  CondensedSystem red;
  red.inv_bubble_diag.resize(nb);
  const Eigen::VectorXd diag = sys.a_bb.diagonal();
  for (Index i = 0; i < nb; ++i) {
    if (!(std::abs(diag[i]) > 0.0)) {
      const Index face = sys.layout ? sys.layout->interior_faces()[i] : i;
      throw SolveError("condense: zero bubble diagonal at face " + std::to_string(face));
    }
    red.inv_bubble_diag[i] = 1.0 / diag[i];
  }
  const auto dinv = red.inv_bubble_diag.asDiagonal();
  const SparseMatrix bl = dinv * sys.a_bl;
  const SparseMatrix bp = dinv * sys.a_bp;
  const SparseMatrix s_ll = sys.a_ll - sys.a_lb * bl;
  const SparseMatrix s_lp = sys.a_lp - sys.a_lb * bp;
  const SparseMatrix s_pl = SparseMatrix(sys.a_lp.transpose()) - sys.a_bp.transpose() * bl;
  const SparseMatrix s_pp = -(SparseMatrix(sys.a_bp.transpose()) * bp);

  const Index nl = s_ll.rows(), np = s_pp.rows();
  Triplets t;
  t.reserve(static_cast<std::size_t>(s_ll.nonZeros() + s_lp.nonZeros() + s_pl.nonZeros() + s_pp.nonZeros()));
  append(t, s_ll, 0, 0);
  append(t, s_lp, 0, nl);
  append(t, s_pl, nl, 0);
  append(t, s_pp, nl, nl);
  red.matrix.resize(nl + np, nl + np);
  red.matrix.setFromTriplets(t.begin(), t.end());

  const Eigen::VectorXd db = red.inv_bubble_diag.cwiseProduct(sys.f_b);
  red.rhs.resize(nl + np);
  red.rhs << sys.f_l - sys.a_lb * db, sys.f_p - sys.a_bp.transpose() * db;
  return red;
}

Eigen::VectorXd recover_bubbles(const BlockSaddleSystem& sys, const CondensedSystem& red,
                                const Eigen::VectorXd& u_l, const Eigen::VectorXd& p) {
  return red.inv_bubble_diag.cwiseProduct(sys.f_b - sys.a_bl * u_l - sys.a_bp * p);
}

namespace {

// Sparse LU factorization with residual-checked, refined solves.
class Factorization {
 public:
  explicit Factorization(const SparseMatrix& a) : a_(a), abs_a_(a.cwiseAbs()) {
    a_.makeCompressed();
#ifdef BRFLOW_HAVE_UMFPACK
    lu_.compute(a_);
    if (lu_.info() != Eigen::Success) throw SolveError("linear_solve: factorization failed (singular matrix)");
#else
    lu_.analyzePattern(a_);
    lu_.factorize(a_);
    if (lu_.info() != Eigen::Success) throw SolveError("linear_solve: factorization failed: " + lu_.lastErrorMessage());
#endif
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& b, double* residual) const {
    if (b.size() != a_.rows()) throw SolveError("linear_solve: dimension mismatch");
    Eigen::VectorXd x = lu_.solve(b);
    const double bn = b.norm();
    auto rel = [&](const Eigen::VectorXd& r) { return bn > 0.0 ? r.norm() / bn : r.norm(); };
    // Componentwise backward error max_i |r_i| / (|A||x| + |b|)_i. Saddle rows
    // with a zero right-hand side are tiny next to the momentum rows, so the
    // normwise residual alone cannot see their error.
    auto componentwise = [&](const Eigen::VectorXd& r) {
      const Eigen::VectorXd denom = abs_a_ * x.cwiseAbs() + b.cwiseAbs();
      double worst = 0.0;
      for (Index i = 0; i < r.size(); ++i)
        if (denom[i] > 0.0) worst = std::max(worst, std::abs(r[i]) / denom[i]);
      return worst;
    };
    Eigen::VectorXd r = b - a_ * x;
    double res = rel(r);
    for (int sweep = 0; sweep < 3 && !(res <= 1e-12 && componentwise(r) <= 1e-14); ++sweep) {
      x += lu_.solve(r);
      r = b - a_ * x;
      res = rel(r);
    }
    if (residual) *residual = res;
    if (!(res <= 1e-9))
      throw SolveError("linear_solve: relative residual " + std::to_string(res) + " exceeds 1e-9");
    return x;
  }

 private:
  SparseMatrix a_;
  SparseMatrix abs_a_;
#ifdef BRFLOW_HAVE_UMFPACK
  mutable Eigen::UmfPackLU<SparseMatrix> lu_;
#else
  mutable Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu_;
#endif
};

}  // namespace

Eigen::VectorXd linear_solve(const SparseMatrix& a, const Eigen::VectorXd& b, double* residual) {
  if (a.rows() != a.cols() || a.rows() != b.size()) throw SolveError("linear_solve: dimension mismatch");
  return Factorization(a).solve(b, residual);
}

Eigen::VectorXd solve_condensed(const BlockSaddleSystem& sys, double* residual) {
  const CondensedSystem red = condense(sys);
  const Index nl = sys.a_ll.rows(), np = sys.a_lp.cols();
  const Index pin = nl;  // pressure of cell 0
  const Factorization lu(drop_index(red.matrix, pin));
  const auto& dinv = red.inv_bubble_diag;
  double res = 0.0, worst = 0.0;

  // Solve for (U_l, P) with a given uncondensed right-hand side and recover U_b.
  auto solve_blocks = [&](const Eigen::VectorXd& fb, const Eigen::VectorXd& fl, const Eigen::VectorXd& fp,
                          Eigen::VectorXd& ub, Eigen::VectorXd& ul, Eigen::VectorXd& p) {
    const Eigen::VectorXd db = dinv.cwiseProduct(fb);
    Eigen::VectorXd rhs(nl + np);
    rhs << fl - sys.a_lb * db, fp - sys.a_bp.transpose() * db;
    const Eigen::VectorXd x = insert_zero(lu.solve(drop_entry(rhs, pin), &res), pin);
    worst = std::max(worst, res);
    ul = x.head(nl);
    p = x.tail(np);
    ub = dinv.cwiseProduct(fb - sys.a_bl * ul - sys.a_bp * p);
  };

  Eigen::VectorXd ub, ul, p;
  solve_blocks(sys.f_b, sys.f_l, sys.f_p, ub, ul, p);
  if (residual) *residual = worst;

  // For small viscosities the bubble recovery cancels O(1) terms to obtain
  // O(nu) values, which leaves the divergence rows at about eps/nu. One sweep
  // of refinement on the uncondensed system restores them to rounding level.
  const Eigen::VectorXd rb = sys.f_b - sys.a_bb * ub - sys.a_bl * ul - sys.a_bp * p;
  const Eigen::VectorXd rl = sys.f_l - sys.a_lb * ub - sys.a_ll * ul - sys.a_lp * p;
  const Eigen::VectorXd rp = sys.f_p - sys.a_bp.transpose() * ub - sys.a_lp.transpose() * ul;
  if (rb.norm() + rl.norm() + rp.norm() > 0.0) {
    Eigen::VectorXd db, dl, dp;
    solve_blocks(rb, rl, rp, db, dl, dp);
    ub += db;
    ul += dl;
    p += dp;
  }

  Eigen::VectorXd out(ub.size() + nl + np);
  out << ub, ul, p;
  zero_mean(sys.layout->mesh(), out.tail(np));
  return out;
}

Eigen::VectorXd solve_full(const BlockSaddleSystem& sys, double* residual) {
  const Index nb = sys.a_bb.rows(), nl = sys.a_ll.rows(), np = sys.a_lp.cols();
  Triplets t;
  append(t, sys.a_bb, 0, 0);
  append(t, sys.a_bl, 0, nb);
  append(t, sys.a_bp, 0, nb + nl);
  append(t, sys.a_lb, nb, 0);
  append(t, sys.a_ll, nb, nb);
  append(t, sys.a_lp, nb, nb + nl);
  append(t, sys.a_bp, nb + nl, 0, true);
  append(t, sys.a_lp, nb + nl, nb, true);
  const Index n = nb + nl + np;
  SparseMatrix a(n, n);
  a.setFromTriplets(t.begin(), t.end());
  Eigen::VectorXd rhs(n);
  rhs << sys.f_b, sys.f_l, sys.f_p;
  const Index pin = nb + nl;
  Eigen::VectorXd x = insert_zero(linear_solve(drop_index(a, pin), drop_entry(rhs, pin), residual), pin);
  zero_mean(sys.layout->mesh(), x.tail(np));
  return x;
}

namespace {

struct Discretization {
  VelocityBlocks a;
  DivergenceBlocks div;
  LoadVector load;
};

struct LinearResult {
  FeField velocity;
  FeField pressure;
  Eigen::VectorXd unknowns;  // vector used for the Picard increment
  Index ndof = 0;
  double residual = 0.0;
};

LinearResult solve_discretization(const DofLayout& layout, const Discretization& disc,
                                  const FeField& lift, bool full) {
  const SimplicialMesh& mesh = layout.mesh();
  const BlockSaddleSystem sys = restrict_system(layout, disc.a, disc.div, disc.load, lift);
  const bool condensed = !full && sys.bubble_block_diagonal();
  LinearResult res;
  const Eigen::VectorXd x = condensed ? solve_condensed(sys, &res.residual) : solve_full(sys, &res.residual);
  const Index nb = layout.bubble_size(), nl = layout.linear_size(), np = layout.pressure_size();
  res.ndof = condensed ? nl + np - 1 : nb + nl + np - 1;
  res.unknowns = condensed ? Eigen::VectorXd(x.tail(nl + np)) : x;

  res.velocity = lift;
  const Index off = layout.full_linear_size();
  for (Index i = 0; i < nl; ++i) res.velocity.coefficients[layout.interior_linear()[i]] = x[nb + i];
  for (Index i = 0; i < nb; ++i) res.velocity.coefficients[off + layout.interior_faces()[i]] = x[i];
  res.pressure = FeField::zero(SpaceTag::P0Pressure, mesh);
  res.pressure.coefficients = x.tail(np);
  return res;
}

SolverReport base_report(const DofLayout& layout, const std::string& scheme) {
  SolverReport r;
  r.scheme = scheme;
  const SimplicialMesh& mesh = layout.mesh();
  r.num_cells = mesh.num_cells();
  r.num_vertices = mesh.num_vertices();
  r.num_faces = mesh.num_faces();
  r.condensed_dof = layout.linear_size() + layout.pressure_size() - 1;
  r.full_dof = layout.bubble_size() + r.condensed_dof;
  return r;
}

double elapsed(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void check_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(what) + " must be positive");
}

// Unknown vector of a given state in the order solve_discretization reports it.
Eigen::VectorXd unknowns_of(const DofLayout& layout, const FeField& u, const FeField& p, bool with_bubbles) {
  const Index nb = layout.bubble_size(), nl = layout.linear_size(), np = layout.pressure_size();
  Eigen::VectorXd x(with_bubbles ? nb + nl + np : nl + np);
  Index k = 0;
  const Index off = layout.full_linear_size();
  if (with_bubbles)
    for (Index f : layout.interior_faces()) x[k++] = u.coefficients[off + f];
  for (Index i : layout.interior_linear()) x[k++] = u.coefficients[i];
  if (p.coefficients.size() == np) x.tail(np) = p.coefficients;
  else x.tail(np).setZero();
  return x;
}

// Cellwise mean of the linear part (the convection field of the EAFE schemes).
std::vector<Vec> linear_cell_means(const FeField& u) {
  const SimplicialMesh& mesh = *u.mesh;
  const int d = mesh.dim();
  std::vector<Vec> out(static_cast<std::size_t>(mesh.num_cells()), Vec::Zero());
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    for (Index v : mesh.cell(c)) out[c] += u.vertex_value(v);
    out[c] /= d + 1;
  }
  return out;
}

Discretization stokes_discretization(const SimplicialMesh& mesh, double nu, const VectorFunction& f,
                                     StokesVariant variant) {
  const ViscousForm vf = variant == StokesVariant::UnmodifiedRobust ? ViscousForm::Full : ViscousForm::Modified;
  const BubbleTest bt = variant == StokesVariant::StabilizedPlain ? BubbleTest::Plain : BubbleTest::Bdm;
  return {assemble_viscous(mesh, vf).scaled(nu), assemble_div(mesh), assemble_load(mesh, f, bt)};
}

// Convection contribution of the EAFE schemes for a cellwise constant field.
void add_eafe(const SimplicialMesh& mesh, VelocityBlocks& a, const std::vector<Vec>& b,
              bool stabilized, const SolverControls& controls) {
  ConvectionField conv;
  conv.b = b;
  conv.epsilon = controls.epsilon;
  a.ll += assemble_eafe(mesh, conv, controls.eafe_diagonal);
  if (stabilized) a.bl += assemble_conv_stab(mesh, conv);
}

// Picard bookkeeping shared by the stationary and unsteady solvers.
struct PicardMonitor {
  const SolverControls& controls;
  SolverReport& report;
  int growing = 0;

  // Returns true when the iteration should stop.
  bool update(const Eigen::VectorXd& prev, const Eigen::VectorXd& next) {
    const double nn = next.norm();
    const double diff = (next - prev).norm();
    const double inc = nn > 0.0 ? diff / nn : diff;
    const double last = report.increments.empty() ? inc : report.increments.back();
    report.increments.push_back(inc);
    report.final_increment = inc;
    report.iterations = static_cast<int>(report.increments.size());
    if (!std::isfinite(inc) || !finite(next)) {
      report.status = SolveStatus::Diverged;
      return true;
    }
    if (inc < controls.tolerance) {
      report.status = SolveStatus::Converged;
      return true;
    }
    growing = report.increments.size() > 1 && inc > last ? growing + 1 : 0;
    if (growing >= controls.divergence_window) {
      report.status = SolveStatus::Diverged;
      return true;
    }
    if (report.iterations >= controls.max_iterations) {
      // An iteration that still moves by half its own size at the limit has
      // not started to contract; report it as diverged rather than slow.
      const auto& v = report.increments;
      const std::size_t w = std::min<std::size_t>(v.size(), controls.divergence_window);
      const bool stalled = std::all_of(v.end() - w, v.end(), [](double x) { return x >= 0.5; });
      report.status = stalled ? SolveStatus::Diverged : SolveStatus::MaxIterations;
      return true;
    }
    return false;
  }
};

}  // namespace

Solution solve_stokes(const SimplicialMesh& mesh, double nu, const VectorFunction& f,
                      const VectorFunction& g, StokesVariant variant, const SolverControls& controls) {
  check_positive(nu, "viscosity");
  const auto start = Clock::now();
  const DofLayout layout(mesh);
  const FeField lift = dirichlet_lift(mesh, g, controls.lift);
  LinearResult lr = solve_discretization(layout, stokes_discretization(mesh, nu, f, variant), lift,
                                         controls.force_full_solve);
  Solution sol{lr.velocity, lr.pressure, base_report(layout, to_string(variant))};
  sol.report.ndof = lr.ndof;
  sol.report.linear_residual = lr.residual;
  sol.report.wall_seconds = elapsed(start);
  return sol;
}

Solution solve_oseen(const SimplicialMesh& mesh, double nu, const std::vector<Vec>& b,
                     const VectorFunction& f, const VectorFunction& g, OseenVariant variant,
                     const SolverControls& controls) {
  check_positive(nu, "viscosity");
  if (static_cast<Index>(b.size()) != mesh.num_cells())
    throw ConfigError("solve_oseen: convection field needs one vector per cell");
  const auto start = Clock::now();
  const DofLayout layout(mesh);
  const FeField lift = dirichlet_lift(mesh, g, controls.lift);
  Discretization disc;
  if (variant == OseenVariant::Classical) {
    disc = stokes_discretization(mesh, nu, f, StokesVariant::UnmodifiedRobust);
    disc.a += assemble_bdm_convection(mesh, b);
  } else {
    disc = stokes_discretization(mesh, nu, f, StokesVariant::StabilizedRobust);
    add_eafe(mesh, disc.a, b, variant == OseenVariant::EafeStabilized, controls);
  }
  LinearResult lr = solve_discretization(layout, disc, lift, controls.force_full_solve);
  Solution sol{lr.velocity, lr.pressure, base_report(layout, to_string(variant))};
  sol.report.ndof = lr.ndof;
  sol.report.linear_residual = lr.residual;
  sol.report.wall_seconds = elapsed(start);
  return sol;
}

Solution solve_navier_stokes(const SimplicialMesh& mesh, double nu, const VectorFunction& f,
                             const VectorFunction& g, NavierStokesVariant variant,
                             const SolverControls& controls) {
  check_positive(nu, "viscosity");
  const auto start = Clock::now();
  const DofLayout layout(mesh);
  const FeField lift = dirichlet_lift(mesh, g, controls.lift);
  const bool classical = variant == NavierStokesVariant::Classical;
  const Discretization stokes = stokes_discretization(
      mesh, nu, f, classical ? StokesVariant::UnmodifiedRobust : StokesVariant::StabilizedRobust);
  const bool full = controls.force_full_solve;

  Solution sol{FeField{}, FeField{}, base_report(layout, to_string(variant))};
  LinearResult cur = solve_discretization(layout, stokes, lift, full);
  sol.report.linear_residual = cur.residual;
  PicardMonitor monitor{controls, sol.report};
  while (true) {
    Discretization disc = stokes;
    if (classical) disc.a += assemble_bdm_convection(mesh, cur.velocity);
    else add_eafe(mesh, disc.a, linear_cell_means(cur.velocity), true, controls);
    LinearResult next;
    try {
      next = solve_discretization(layout, disc, lift, full);
    } catch (const SolveError&) {
      sol.report.status = SolveStatus::Diverged;
      sol.report.iterations = static_cast<int>(sol.report.increments.size()) + 1;
      break;
    }
    sol.report.linear_residual = std::max(sol.report.linear_residual, next.residual);
    const bool stop = monitor.update(cur.unknowns, next.unknowns);
    cur = std::move(next);
    if (stop) break;
  }
  sol.velocity = cur.velocity;
  sol.pressure = cur.pressure;
  sol.report.ndof = cur.ndof;
  sol.report.wall_seconds = elapsed(start);
  return sol;
}

Solution step_unsteady(const SimplicialMesh& mesh, const UnsteadyState& state, double tau,
                       double nu, const TimeVectorFunction& f, const TimeVectorFunction& g,
                       UnsteadyScheme scheme, const SolverControls& controls) {
  check_positive(nu, "viscosity");
  check_positive(tau, "time step");
  if (state.velocity.space != SpaceTag::BRFull || state.velocity.mesh != &mesh)
    throw ConfigError("step_unsteady: state velocity must be a BRFull field on this mesh");
  const auto start = Clock::now();
  const double t = state.t + tau;
  const DofLayout layout(mesh);
  const FeField lift = dirichlet_lift(mesh, [&](const Vec& x) { return g(x, t); }, controls.lift);
  const bool classical = scheme == UnsteadyScheme::Classical;

  // momentum equation divided by tau
  VelocityBlocks mass = classical ? assemble_bdm_mass(mesh)
                                  : assemble_lumped_mass(mesh, scheme == UnsteadyScheme::TD2 ? BubbleTest::Bdm
                                                                                              : BubbleTest::Plain);
  mass = mass.scaled(1.0 / tau);
  Discretization base = stokes_discretization(
      mesh, nu, [&](const Vec& x) { return f(x, t); },
      classical ? StokesVariant::UnmodifiedRobust : StokesVariant::StabilizedRobust);
  base.a += mass;
  const Eigen::VectorXd ul = state.velocity.linear_part(), ub = state.velocity.bubble_part();
  base.load.linear += mass.ll * ul + mass.lb * ub;
  base.load.bubble += mass.bl * ul + mass.bb * ub;

  const bool full = controls.force_full_solve;
  Solution sol{FeField{}, FeField{}, base_report(layout, to_string(scheme))};
  PicardMonitor monitor{controls, sol.report};
  LinearResult cur;
  cur.velocity = state.velocity;
  cur.pressure = state.pressure;
  cur.unknowns = unknowns_of(layout, state.velocity, state.pressure, full || classical);
  while (true) {
    Discretization disc = base;
    if (classical) disc.a += assemble_bdm_convection(mesh, cur.velocity);
    else add_eafe(mesh, disc.a, linear_cell_means(cur.velocity), true, controls);
    LinearResult next;
    try {
      next = solve_discretization(layout, disc, lift, full);
    } catch (const SolveError&) {
      sol.report.status = SolveStatus::Diverged;
      sol.report.iterations = static_cast<int>(sol.report.increments.size()) + 1;
      break;
    }
    sol.report.linear_residual = std::max(sol.report.linear_residual, next.residual);
    const bool stop = monitor.update(cur.unknowns, next.unknowns);
    cur = std::move(next);
    if (stop) break;
  }
  sol.velocity = cur.velocity;
  sol.pressure = cur.pressure;
  sol.report.ndof = cur.ndof;
  sol.report.wall_seconds = elapsed(start);
  return sol;
}

double weak_divergence_residual(const FeField& velocity) {
  if (velocity.space != SpaceTag::BRFull) throw Error("weak_divergence_residual: expected a BRFull field");
  const SimplicialMesh& mesh = *velocity.mesh;
  const DivergenceBlocks div = assemble_div(mesh);
  const Eigen::VectorXd ul = velocity.linear_part(), ub = velocity.bubble_part();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(mesh.num_cells());
  Eigen::VectorXd scale = Eigen::VectorXd::Zero(mesh.num_cells());
  auto accumulate = [&](const SparseMatrix& m, const Eigen::VectorXd& u) {
    for (int k = 0; k < m.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
        const double term = it.value() * u[it.row()];
        sum[it.col()] += term;
        scale[it.col()] += std::abs(term);
      }
  };
  accumulate(div.lp, ul);
  accumulate(div.bp, ub);
  // Cells whose only terms are rounding-level would otherwise report O(1);
  // the mean term size over the mesh is used as a floor for the scale.
  const double floor = scale.mean();
  double worst = 0.0;
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const double s = std::max(scale[c], floor);
    worst = std::max(worst, s > 0.0 ? std::abs(sum[c]) / s : 0.0);
  }
  return worst;
}

double inf_sup_constant(const SimplicialMesh& mesh) {
  const DofLayout layout(mesh);
  const VelocityBlocks a = assemble_viscous(mesh, ViscousForm::Full);
  const DivergenceBlocks div = assemble_div(mesh);
  const LoadVector zero{Eigen::VectorXd::Zero(layout.full_linear_size()),
                        Eigen::VectorXd::Zero(layout.full_bubble_size())};
  const BlockSaddleSystem sys = restrict_system(layout, a, div, zero, FeField::zero(SpaceTag::BRFull, mesh));
  const Index nb = layout.bubble_size(), nl = layout.linear_size(), np = layout.pressure_size();

  Eigen::MatrixXd av = Eigen::MatrixXd::Zero(nb + nl, nb + nl);
  av.topLeftCorner(nb, nb) = Eigen::MatrixXd(sys.a_bb);
  av.topRightCorner(nb, nl) = Eigen::MatrixXd(sys.a_bl);
  av.bottomLeftCorner(nl, nb) = Eigen::MatrixXd(sys.a_lb);
  av.bottomRightCorner(nl, nl) = Eigen::MatrixXd(sys.a_ll);
  Eigen::MatrixXd b(nb + nl, np);
  b.topRows(nb) = Eigen::MatrixXd(sys.a_bp);
  b.bottomRows(nl) = Eigen::MatrixXd(sys.a_lp);
  Eigen::VectorXd mp_isqrt(np);
  for (Index c = 0; c < np; ++c) mp_isqrt[c] = 1.0 / std::sqrt(mesh.geometry(c).volume);
  b = b * mp_isqrt.asDiagonal();

  const Eigen::LLT<Eigen::MatrixXd> llt(av);
  if (llt.info() != Eigen::Success) throw SolveError("inf_sup_constant: stiffness is not positive definite");
  const Eigen::MatrixXd schur = b.transpose() * llt.solve(b);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(schur, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd ev = eig.eigenvalues();
  const double top = ev.maxCoeff();
  for (Index i = 0; i < ev.size(); ++i)
    if (ev[i] > 1e-10 * top) return std::sqrt(ev[i]);
  return 0.0;
}

}  // namespace brflow
