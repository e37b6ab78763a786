#include "absopf/opf_oracle.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "absopf/errors.hpp"

namespace absopf::opf {

const char* to_string(SolveStatus s) noexcept {
  switch (s) {
    case SolveStatus::Feasible: return "feasible";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::IterationLimit: return "iteration_limit";
  }
  return "unknown";
}

namespace {

using Eigen::VectorXd;
using Triplet = Eigen::Triplet<double>;
constexpr double kInf = std::numeric_limits<double>::infinity();

/// One branch-end flow as a function of (vm_i, vm_j, va_i, va_j).
struct LocalFlow {
  double value = 0.0;
  std::array<double, 4> grad{};
  std::array<std::array<double, 4>, 4> hess{};
};

// F = alpha*a^2 + beta*c^2 - a*c*(p*sin(t) + q*cos(t)),  t = va_i - va_j
LocalFlow local_flow(double alpha, double beta, double p, double q, double a, double c,
                     double sn, double cs) {
  const double tv = p * sn + q * cs;
  const double tp = p * cs - q * sn;
  const double fa = 2.0 * alpha * a - c * tv;
  const double fc = 2.0 * beta * c - a * tv;
  const double ft = -a * c * tp;
  const double faa = 2.0 * alpha, fcc = 2.0 * beta, fac = -tv;
  const double fat = -c * tp, fct = -a * tp, ftt = a * c * tv;

  LocalFlow f;
  f.value = alpha * a * a + beta * c * c - a * c * tv;
  f.grad = {fa, fc, ft, -ft};
  f.hess = {{{faa, fac, fat, -fat},
             {fac, fcc, fct, -fct},
             {fat, fct, ftt, -ftt},
             {-fat, -fct, -ftt, ftt}}};
  return f;
}

struct Problem {
  const grid::GridCase& c;
  std::span<const double> x;
  std::size_t nb, ng, ne, n;
  VectorXd lo, hi;

  Problem(const grid::GridCase& gc, std::span<const double> loads)
      : c(gc), x(loads), nb(gc.buses.size()), ng(gc.generators.size()), ne(gc.branches.size()),
        n(2 * nb + 2 * ng), lo(n), hi(n) {
    for (std::size_t i = 0; i < nb; ++i) {
      lo[vm(i)] = c.buses[i].vm_min;
      hi[vm(i)] = c.buses[i].vm_max;
      lo[va(i)] = -kInf;
      hi[va(i)] = kInf;
    }
    lo[va(c.reference_bus)] = hi[va(c.reference_bus)] = 0.0;
    for (std::size_t g = 0; g < ng; ++g) {
      lo[pg(g)] = c.generators[g].pg_min;
      hi[pg(g)] = c.generators[g].pg_max;
      lo[qg(g)] = c.generators[g].qg_min;
      hi[qg(g)] = c.generators[g].qg_max;
    }
  }

  std::size_t vm(std::size_t i) const { return i; }
  std::size_t va(std::size_t i) const { return nb + i; }
  std::size_t pg(std::size_t g) const { return 2 * nb + g; }
  std::size_t qg(std::size_t g) const { return 2 * nb + ng + g; }

  VectorXd project(const VectorXd& z) const { return z.cwiseMax(lo).cwiseMin(hi); }

  VectorXd flat_start() const {
    VectorXd z(n);
    for (std::size_t i = 0; i < nb; ++i) {
      z[vm(i)] = 1.0;
      z[va(i)] = 0.0;
    }
    for (std::size_t g = 0; g < ng; ++g) {
      z[pg(g)] = 0.5 * (lo[pg(g)] + hi[pg(g)]);
      z[qg(g)] = 0.5 * (lo[qg(g)] + hi[qg(g)]);
    }
    return project(z);
  }

  grid::GridState state(const VectorXd& z) const {
    grid::GridState s;
    s.vm.resize(nb);
    s.va.resize(nb);
    s.pg.resize(ng);
    s.qg.resize(ng);
    for (std::size_t i = 0; i < nb; ++i) {
      s.vm[i] = z[vm(i)];
      s.va[i] = z[va(i)];
    }
    for (std::size_t g = 0; g < ng; ++g) {
      s.pg[g] = z[pg(g)];
      s.qg[g] = z[qg(g)];
    }
    return s;
  }
};

struct Multipliers {
  VectorXd balance;  // 2*nb: p rows then q rows
  VectorXd thermal;  // 2*ne: from end then to end
};

struct Evaluation {
  double merit = 0.0;
  double objective = 0.0;
  VectorXd grad;
  std::vector<Triplet> hess;
  VectorXd balance;  // residuals
  VectorXd thermal;  // pf^2 + qf^2 - s_max^2 per branch end
  bool finite = true;
};

/// Augmented Lagrangian merit
///   f + sum(lambda*h + mu/2*h^2) + sum (max(0, nu + mu*g)^2 - nu^2) / (2 mu)
/// With mu = 0 the gradient is that of the plain Lagrangian at (lambda, nu).
Evaluation evaluate(const Problem& P, const VectorXd& z, const Multipliers& m, double mu,
                    bool with_hessian) {
  Evaluation ev;
  ev.grad = VectorXd::Zero(static_cast<long>(P.n));
  ev.balance = VectorXd::Zero(static_cast<long>(2 * P.nb));
  ev.thermal = VectorXd::Zero(static_cast<long>(2 * P.ne));

  // Sparse rows of the balance Jacobian.
  std::vector<std::vector<std::pair<std::size_t, double>>> jac(2 * P.nb);
  std::vector<std::array<LocalFlow, 4>> flows(P.ne);

  for (std::size_t g = 0; g < P.ng; ++g) {
    const auto& gen = P.c.generators[g];
    const double p = z[P.pg(g)];
    ev.objective += gen.cost(p);
    ev.grad[P.pg(g)] += 2.0 * gen.c2 * p + gen.c1;
    if (with_hessian) ev.hess.emplace_back(P.pg(g), P.pg(g), 2.0 * gen.c2);
    ev.balance[gen.bus] += p;
    ev.balance[P.nb + gen.bus] += z[P.qg(g)];
    jac[gen.bus].emplace_back(P.pg(g), 1.0);
    jac[P.nb + gen.bus].emplace_back(P.qg(g), 1.0);
  }
  const std::size_t nl = P.c.loads.size();
  for (std::size_t l = 0; l < nl; ++l) {
    ev.balance[P.c.loads[l].bus] -= P.x[l];
    ev.balance[P.nb + P.c.loads[l].bus] -= P.x[nl + l];
  }

  for (std::size_t e = 0; e < P.ne; ++e) {
    const auto& br = P.c.branches[e];
    const double a = z[P.vm(br.from)], cc = z[P.vm(br.to)];
    const double t = z[P.va(br.from)] - z[P.va(br.to)];
    const double sn = std::sin(t), cs = std::cos(t);
    flows[e] = {local_flow(br.g, 0.0, br.b, br.g, a, cc, sn, cs),
                local_flow(-br.b, 0.0, br.g, -br.b, a, cc, sn, cs),
                local_flow(0.0, br.g, -br.b, br.g, a, cc, sn, cs),
                local_flow(0.0, -br.b, -br.g, -br.b, a, cc, sn, cs)};
    const std::array<std::size_t, 4> idx{P.vm(br.from), P.vm(br.to), P.va(br.from), P.va(br.to)};
    const std::array<std::size_t, 4> rows{br.from, P.nb + br.from, br.to, P.nb + br.to};
    for (int k = 0; k < 4; ++k) {
      ev.balance[rows[k]] -= flows[e][k].value;
      for (int u = 0; u < 4; ++u) jac[rows[k]].emplace_back(idx[u], -flows[e][k].grad[u]);
    }
  }

  // Balance terms.
  double merit = ev.objective;
  const VectorXd w = m.balance + mu * ev.balance;
  merit += m.balance.dot(ev.balance) + 0.5 * mu * ev.balance.squaredNorm();
  for (std::size_t r = 0; r < 2 * P.nb; ++r) {
    for (const auto& [col, v] : jac[r]) ev.grad[col] += w[r] * v;
    if (with_hessian && mu > 0.0) {
      for (const auto& [c1, v1] : jac[r])
        for (const auto& [c2, v2] : jac[r]) ev.hess.emplace_back(c1, c2, mu * v1 * v2);
    }
  }

  // Curvature of the flows weighted by multipliers, and thermal terms.
  for (std::size_t e = 0; e < P.ne; ++e) {
    const auto& br = P.c.branches[e];
    const std::array<std::size_t, 4> idx{P.vm(br.from), P.vm(br.to), P.va(br.from), P.va(br.to)};
    const std::array<std::size_t, 4> rows{br.from, P.nb + br.from, br.to, P.nb + br.to};
    if (with_hessian) {
      for (int k = 0; k < 4; ++k) {
        const double coef = -w[rows[k]];
        if (coef == 0.0) continue;
        for (int u = 0; u < 4; ++u)
          for (int v = 0; v < 4; ++v)
            ev.hess.emplace_back(idx[u], idx[v], coef * flows[e][k].hess[u][v]);
      }
    }
    for (int end = 0; end < 2; ++end) {
      const LocalFlow& pf = flows[e][2 * end];
      const LocalFlow& qf = flows[e][2 * end + 1];
      const std::size_t slot = 2 * e + static_cast<std::size_t>(end);
      const double gval = pf.value * pf.value + qf.value * qf.value - br.s_max * br.s_max;
      ev.thermal[static_cast<long>(slot)] = gval;
      const double nu = m.thermal[static_cast<long>(slot)];
      const double shifted = nu + mu * gval;
      if (mu > 0.0) merit += (std::pow(std::max(0.0, shifted), 2) - nu * nu) / (2.0 * mu);
      if (shifted <= 0.0) continue;
      std::array<double, 4> dg{};
      for (int u = 0; u < 4; ++u) dg[u] = 2.0 * (pf.value * pf.grad[u] + qf.value * qf.grad[u]);
      for (int u = 0; u < 4; ++u) ev.grad[idx[u]] += shifted * dg[u];
      if (!with_hessian) continue;
      for (int u = 0; u < 4; ++u)
        for (int v = 0; v < 4; ++v) {
          const double d2g = 2.0 * (pf.grad[u] * pf.grad[v] + pf.value * pf.hess[u][v] +
                                    qf.grad[u] * qf.grad[v] + qf.value * qf.hess[u][v]);
          ev.hess.emplace_back(idx[u], idx[v], mu * dg[u] * dg[v] + shifted * d2g);
        }
    }
  }

  ev.merit = merit;
  ev.finite = std::isfinite(merit) && ev.grad.allFinite();
  return ev;
}

double projected_gradient_norm(const Problem& P, const VectorXd& z, const VectorXd& grad) {
  return (z - P.project(z - grad)).lpNorm<Eigen::Infinity>();
}

double balance_and_thermal_residual(const Problem& P, const Evaluation& ev) {
  double r = ev.balance.size() ? ev.balance.lpNorm<Eigen::Infinity>() : 0.0;
  for (std::size_t e = 0; e < P.ne; ++e) {
    const double smax = P.c.branches[e].s_max;
    for (int end = 0; end < 2; ++end) {
      const double s2 = ev.thermal[static_cast<long>(2 * e + static_cast<std::size_t>(end))] + smax * smax;
      r = std::max(r, std::sqrt(std::max(0.0, s2)) - smax);
    }
  }
  return r;
}

enum class InnerExit { Converged, StepLimit, Stalled, NonFinite };

struct InnerResult {
  InnerExit exit = InnerExit::StepLimit;
  int steps = 0;
};

/// Projected Newton on the merit function for fixed multipliers and mu.
InnerResult minimize_merit(const Problem& P, VectorXd& z, const Multipliers& m, double mu,
                           int max_steps, double tol) {
  InnerResult out;
  const long n = static_cast<long>(P.n);
  for (; out.steps < max_steps; ++out.steps) {
    Evaluation ev = evaluate(P, z, m, mu, true);
    if (!ev.finite) {
      out.exit = InnerExit::NonFinite;
      return out;
    }
    const double pgn = projected_gradient_norm(P, z, ev.grad);
    if (pgn <= tol) {
      out.exit = InnerExit::Converged;
      return out;
    }

    // Epsilon-active bounds whose gradient points outward are held fixed.
    const double eps = std::min(1e-6, pgn);
    std::vector<long> free_pos(P.n, -1);
    long nf = 0;
    for (long i = 0; i < n; ++i) {
      const bool fixed = P.lo[i] == P.hi[i];
      const bool at_lo = z[i] <= P.lo[i] + eps && ev.grad[i] > 0.0;
      const bool at_hi = z[i] >= P.hi[i] - eps && ev.grad[i] < 0.0;
      if (!(fixed || at_lo || at_hi)) free_pos[static_cast<std::size_t>(i)] = nf++;
    }

    VectorXd dir = VectorXd::Zero(n);
    if (nf > 0) {
      std::vector<Triplet> reduced;
      reduced.reserve(ev.hess.size());
      double diag_scale = 1.0;
      for (const auto& t : ev.hess) {
        const long r = free_pos[static_cast<std::size_t>(t.row())];
        const long c = free_pos[static_cast<std::size_t>(t.col())];
        if (r >= 0 && c >= 0) reduced.emplace_back(r, c, t.value());
        if (t.row() == t.col()) diag_scale = std::max(diag_scale, std::abs(t.value()));
      }
      Eigen::SparseMatrix<double> H(nf, nf);
      H.setFromTriplets(reduced.begin(), reduced.end());
      VectorXd g(nf);
      for (long i = 0; i < n; ++i)
        if (free_pos[static_cast<std::size_t>(i)] >= 0) g[free_pos[static_cast<std::size_t>(i)]] = ev.grad[i];

      Eigen::SparseMatrix<double> I(nf, nf);
      I.setIdentity();
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
      double shift = 0.0;
      VectorXd step;
      for (int attempt = 0; attempt < 30; ++attempt) {
        ldlt.compute(shift > 0.0 ? Eigen::SparseMatrix<double>(H + shift * I) : H);
        if (ldlt.info() == Eigen::Success && (ldlt.vectorD().array() > 0.0).all()) {
          step = ldlt.solve(-g);
          if (step.allFinite()) break;
        }
        step.resize(0);
        shift = shift == 0.0 ? 1e-10 * diag_scale : shift * 10.0;
      }
      if (step.size() == 0) step = -g;
      for (long i = 0; i < n; ++i)
        if (free_pos[static_cast<std::size_t>(i)] >= 0) dir[i] = step[free_pos[static_cast<std::size_t>(i)]];
    }

    // The fixed coordinates still follow the projected gradient so bounds can
    // be released or approached.
    for (long i = 0; i < n; ++i)
      if (free_pos[static_cast<std::size_t>(i)] < 0) dir[i] = -ev.grad[i];

    auto line_search = [&](const VectorXd& d, VectorXd& accepted) {
      double t = 1.0;
      for (int k = 0; k < 50; ++k, t *= 0.5) {
        VectorXd trial = P.project(z + t * d);
        const double decrease = ev.grad.dot(trial - z);
        if (decrease >= 0.0 && (trial - z).lpNorm<Eigen::Infinity>() > 0.0) continue;
        const double trial_merit = evaluate(P, trial, m, mu, false).merit;
        if (std::isfinite(trial_merit) && trial_merit <= ev.merit + 1e-4 * decrease) {
          accepted = std::move(trial);
          return true;
        }
      }
      return false;
    };

    VectorXd next;
    if (!line_search(dir, next) && !line_search(-ev.grad, next)) {
      out.exit = InnerExit::Stalled;
      return out;
    }
    if ((next - z).lpNorm<Eigen::Infinity>() < 1e-15) {
      z = std::move(next);
      out.exit = InnerExit::Stalled;
      ++out.steps;
      return out;
    }
    z = std::move(next);
  }
  return out;
}

}  // namespace

SolveResult solve_acopf(const grid::GridCase& c, std::span<const double> x,
                        const SolverOptions& opts) {
  if (x.size() != c.input_dim()) throw DimensionError("solve_acopf loads", c.input_dim(), x.size());
  const auto t0 = std::chrono::steady_clock::now();

  const Problem P(c, x);
  SolveResult res;
  VectorXd z = P.flat_start();
  Multipliers m{VectorXd::Zero(static_cast<long>(2 * P.nb)), VectorXd::Zero(static_cast<long>(2 * P.ne))};
  double mu = opts.penalty_init;
  // Inner tolerance is tighter than the KKT tolerance so the multiplier
  // update leaves a Lagrangian gradient comfortably below it.
  const double inner_tol = 1e-2 * opts.tol_stationarity;
  bool done = false;

  for (int round = 0; round < opts.max_outer && !done; ++round) {
    const InnerResult inner = minimize_merit(P, z, m, mu, opts.max_newton, inner_tol);
    res.iterations += inner.steps;
    if (inner.exit == InnerExit::NonFinite) {
      res.status = SolveStatus::IterationLimit;
      res.diagnostics = "non-finite merit in round " + std::to_string(round);
      done = true;
      break;
    }

    const Evaluation ev = evaluate(P, z, m, mu, false);
    const double residual = balance_and_thermal_residual(P, ev);
    m.balance += mu * ev.balance;
    m.thermal = (m.thermal + mu * ev.thermal).cwiseMax(0.0);
    const Evaluation lag = evaluate(P, z, m, 0.0, false);
    res.residual = residual;
    res.stationarity = projected_gradient_norm(P, z, lag.grad);
    res.round_residuals.push_back(residual);

    if (residual <= opts.tol_residual && res.stationarity <= opts.tol_stationarity) {
      res.status = SolveStatus::Feasible;
      done = true;
      break;
    }
    const std::size_t k = res.round_residuals.size();
    if (k >= 2 && residual > opts.stall_residual &&
        res.round_residuals[k - 2] > opts.stall_residual &&
        residual > 0.5 * res.round_residuals[k - 2]) {
      res.status = SolveStatus::Infeasible;
      res.diagnostics = "balance residual stalled at " + std::to_string(residual);
      done = true;
      break;
    }
    mu *= opts.penalty_growth;
  }

  if (!done) {
    res.status = res.residual > opts.stall_residual ? SolveStatus::Infeasible
                                                    : SolveStatus::IterationLimit;
    res.diagnostics = "outer round limit reached (residual " + std::to_string(res.residual) +
                      ", stationarity " + std::to_string(res.stationarity) + ")";
  }
  if (res.status == SolveStatus::Feasible) {
    res.state = P.state(z);
    res.objective = grid::objective(c, *res.state);
  }
  res.solve_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

AcopfLabeler::AcopfLabeler(grid::GridCase c, SolverOptions opts)
    : case_(std::move(c)), opts_(opts) {
  grid::validate(case_);
}

LabelOutcome AcopfLabeler::label(std::span<const double> x, double) const {
  const SolveResult r = solve_acopf(case_, x, opts_);
  LabelOutcome out;
  out.seconds = r.solve_time;
  if (r.status == SolveStatus::Feasible) {
    out.feasible = true;
    out.y = grid::pack_output(case_, *r.state);
  }
  return out;
}

}  // namespace absopf::opf
