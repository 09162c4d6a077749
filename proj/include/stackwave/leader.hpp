#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "stackwave/errors.hpp"
#include "stackwave/follower.hpp"
#include "stackwave/geometry.hpp"
#include "stackwave/grid.hpp"
#include "stackwave/spaces.hpp"
#include "stackwave/wavesolver.hpp"

namespace stackwave {

/// Point (f0, f1) of H^1_0 x L^2 parameterizing the leader's dual problem.
struct DualPoint {
  GridFunction f0;
  GridFunction f1;

  static DualPoint zero(const GridSpec& g) { return {zero_function(g), zero_function(g)}; }

  /// f0 must vanish at both ends; the endpoint values of f1 are dropped.
  static DualPoint make(GridFunction f0, GridFunction f1) {
    SpatialMetric::require_zero_ends(f0, "DualPoint f0");
    if (f1.size() != f0.size()) throw ShapeError("DualPoint blocks differ in length");
    f1.front() = f1.back() = 0.0;
    return {std::move(f0), std::move(f1)};
  }

  DualPoint& axpy(double a, const DualPoint& x) {
    for (std::size_t j = 0; j < f0.size(); ++j) {
      f0[j] += a * x.f0[j];
      f1[j] += a * x.f1[j];
    }
    return *this;
  }
  DualPoint& operator*=(double s) {
    for (std::size_t j = 0; j < f0.size(); ++j) {
      f0[j] *= s;
      f1[j] *= s;
    }
    return *this;
  }
};

/// Element (a0, a1) of H^-1 x L^2, the range of the operator A.
struct DualVector {
  GridFunction a0;
  GridFunction a1;
};

struct LeaderProblem {
  GridFunction v0_target;  // L2 role
  GridFunction v1_target;  // H^-1 role
  double rho0 = 0.05;
  double rho1 = 0.05;
  double delta = 0.0;
};

enum class CouplingSolver { CG, Picard };

struct LeaderOptions {
  double tol = 1e-8;
  int max_iter = 20000;
  double theta = 1.0;
  double picard_tol = 1e-10;
  int picard_max_iter = 200;
  CouplingSolver coupling = CouplingSolver::CG;
  double inner_tol = 1e-12;  // follower solves inside A and A*
  int inner_max_iter = 500;
  int power_iterations = 20;
  double lipschitz_safety = 1.05;
  double monotone_slack = 1e-10;  // relative round-off allowance in the objective comparison
  bool override_speed_check = false;
  bool flip_astar_sign = false;  // fault injection for the verify suite
};

struct AstarResult {
  ControlTrace w1;     // A* f on Sigma1
  AdjointField phi;    // backward state with terminal data from f
  Field psi;           // forward state with Sigma2 data flux(phi)/sigma
  ControlTrace psi_trace;
  int coupling_iterations = 0;
};

struct DualLogEntry {
  int iteration = 0;
  double objective = 0.0;
  double residual = 0.0;
  double lipschitz = 0.0;
  bool restart = false;
};

struct DualSolution {
  DualPoint fstar;
  double objective = 0.0;
  double residual = 0.0;
  double lipschitz = 0.0;
  int iterations = 0;
  int restarts = 0;
  bool monotone = true;
  std::vector<DualLogEntry> log;
};

struct VIReport {
  int samples = 0;
  double min_value = 0.0;
  double prox_residual = 0.0;
  bool ok = true;
};

struct LeaderRecovery {
  ControlTrace w1;
  ControlTrace w2;
  Field v;
  double J = 0.0;
  TerminalState terminal;
};

struct ControllabilityResidual {
  double d0 = 0.0;
  double d1 = 0.0;
  bool inside = false;
};

struct OptimalitySystem {
  Field phi, psi, v, p;
  ControlTrace w1, w2;
  double leader_residual = 0.0;    // w1 against -flux(phi) on Sigma1
  double follower_residual = 0.0;  // w2 against flux(p)/sigma on Sigma2
  double coupling_residual = 0.0;  // psi trace against flux(phi)/sigma on Sigma2
};

/// The leader's relaxed controllability problem, solved through its
/// Fenchel-Rockafellar dual over (f0, f1) in H^1_0 x L^2.
///
/// A w1 = (g'(T) + delta g(T), -g(T)) where g is the Nash state for w1 with a
/// zero tracking target. A* is realized as the exact transpose: a backward
/// solve phi with terminal data from f, coupled on Sigma2 to a forward solve psi.
class Leader {
public:
  Leader(const Follower& follower, LeaderProblem problem, LeaderOptions options = {})
      : follower_(follower), problem_(std::move(problem)), opt_(options) {
    const GridSpec& g = follower.grid();
    require_nodes(g, problem_.v0_target, "target v0");
    require_nodes(g, problem_.v1_target, "target v1");
    if (!(problem_.rho0 > 0.0)) throw ConfigError("leader.rho0 must be positive", "leader.rho0");
    if (!(problem_.rho1 > 0.0)) throw ConfigError("leader.rho1 must be positive", "leader.rho1");
    if (!(problem_.delta >= 0.0)) throw ConfigError("leader.delta must be >= 0", "leader.delta");
    problem_.v0_target.front() = problem_.v0_target.back() = 0.0;
    problem_.v1_target.front() = problem_.v1_target.back() = 0.0;
    inner_.tol = opt_.inner_tol;
    inner_.max_iter = opt_.inner_max_iter;
    const NashSolution free = follower.best_response(follower.zero_leader(), inner_);
    free_ = terminal_state(free.v);
  }

  const Follower& follower() const noexcept { return follower_; }
  const LeaderProblem& problem() const noexcept { return problem_; }
  const LeaderOptions& options() const noexcept { return opt_; }
  const FollowerOptions& inner_options() const noexcept { return inner_; }
  /// Terminal state of the Nash pair with w1 = 0.
  const TerminalState& free_terminal() const noexcept { return free_; }

  DualVector apply_A(const ControlTrace& w1) const {
    const NashSolution sol = follower_.best_response(w1, inner_, nullptr, /*track_target=*/false);
    const TerminalState ts = terminal_state(sol.v);
    DualVector a{ts.vTprime, ts.vT};
    for (std::size_t j = 0; j < a.a0.size(); ++j) {
      a.a0[j] += problem_.delta * ts.vT[j];
      a.a1[j] = -ts.vT[j];
    }
    return a;
  }

  /// <<a, f>> = <a0, f0>_{H^-1 x H^1_0} + (a1, f1)_{L2}.
  double pairing(const DualVector& a, const DualPoint& f) const {
    const SpatialMetric& m = follower_.metric();
    return m.dual_pairing(a.a0, f.f0) + m.l2_inner(a.a1, f.f1);
  }

  double leader_inner(const ControlTrace& a, const ControlTrace& b) const {
    return trace_inner(follower_.grid(), follower_.partition(), Segment::Sigma1, a.values, b.values);
  }

  AstarResult apply_Astar_full(const DualPoint& f) const {
    const GridSpec& g = follower_.grid();
    const WaveSolver& solver = follower_.solver();
    const SpatialMetric& metric = follower_.metric();
    SpatialMetric::require_zero_ends(f.f0, "apply_Astar(f0)");

    // phi carries terminal data -(f0, f1 - delta f0) in the transpose orientation.
    TerminalData td{f.f0, f.f1};
    for (std::size_t j = 0; j < td.pT.size(); ++j) {
      td.pTprime[j] = -(f.f1[j] - problem_.delta * f.f0[j]);
      td.pT[j] = -f.f0[j];
    }
    td.pT.front() = td.pT.back() = td.pTprime.front() = td.pTprime.back() = 0.0;
    Field terminal_seed(g);
    solver.add_terminal_seed(metric, td, terminal_seed);

    auto phi_for = [&](const Field& psi) {
      Field seed = terminal_seed;
      for (int n = 0; n <= g.nt; ++n) {
        const GridFunction mp = metric.mass_apply(psi.row(n));
        const double s = -g.time_weight(n) * follower_.domain().alpha_unchecked(g.t(n));
        for (int j = 0; j <= g.ny; ++j) seed(n, j) += s * mp[j];
      }
      return solver.backward_from_seed(seed, &td);
    };
    auto sigma2_flux = [&](const AdjointField& phi) {
      ControlTrace z = follower_.zero_follower();
      const std::vector<double> fl = solver.flux(phi, FluxMethod::Transpose);
      for (std::size_t n = 0; n < z.size(); ++n)
        if (z.mask[n]) z.values[n] = fl[n] / follower_.sigma();
      return z;
    };
    const ControlTrace zero1 = follower_.zero_leader();

    AstarResult out;
    if (opt_.coupling == CouplingSolver::CG) {
      // sigma z - flux(phi_src(z)) = flux(phi_terminal): the follower normal system.
      const AdjointField phi_terminal = solver.backward_from_seed(terminal_seed, &td);
      ControlTrace rhs = sigma2_flux(phi_terminal);
      rhs *= follower_.sigma();
      SolveStats stats;
      out.psi_trace = follower_.solve_normal(rhs, inner_, stats);
      out.coupling_iterations = stats.iterations;
    } else {
      ControlTrace z = follower_.zero_follower();
      std::vector<double> history;
      for (int it = 0;; ++it) {
        const Field psi = solver.forward(follower_.partition().boundary(zero1, z));
        const ControlTrace next = sigma2_flux(phi_for(psi));
        double diff = 0.0;
        ControlTrace relaxed = z;
        for (std::size_t n = 0; n < z.size(); ++n)
          relaxed.values[n] = (1.0 - opt_.theta) * z.values[n] + opt_.theta * next.values[n];
        ControlTrace delta = relaxed;
        for (std::size_t n = 0; n < z.size(); ++n) delta.values[n] -= z.values[n];
        diff = follower_.sigma2_norm(delta);
        z = std::move(relaxed);
        history.push_back(diff);
        if (!std::isfinite(diff) || it >= opt_.picard_max_iter)
          throw NonConvergence(
              "Picard coupling for A* did not converge (sigma = " + std::to_string(follower_.sigma()) +
                  ", theta = " + std::to_string(opt_.theta) +
                  "); use a larger follower.sigma, a smaller leader.theta, or leader.coupling = cg",
              history);
        if (diff <= opt_.picard_tol * std::max(1.0, follower_.sigma2_norm(z))) {
          out.coupling_iterations = it + 1;
          break;
        }
      }
      out.psi_trace = z;
    }
    out.psi = solver.forward(follower_.partition().boundary(zero1, out.psi_trace));
    out.phi = phi_for(out.psi);

    out.w1 = follower_.zero_leader();
    const std::vector<double> fl = solver.flux(out.phi, FluxMethod::Transpose);
    const double sign = opt_.flip_astar_sign ? 1.0 : -1.0;
    for (std::size_t n = 0; n < out.w1.size(); ++n)
      if (out.w1.mask[n]) out.w1.values[n] = sign * fl[n];
    return out;
  }

  ControlTrace apply_Astar(const DualPoint& f) const { return apply_Astar_full(f).w1; }

  double h10_norm(const GridFunction& f0) const { return follower_.metric().norm(Space::H10, f0); }
  double l2_norm(const GridFunction& f1) const { return follower_.metric().norm(Space::L2, f1); }

  /// Inner product of H^1_0 x L^2.
  double dual_inner(const DualPoint& a, const DualPoint& b) const {
    const SpatialMetric& m = follower_.metric();
    const GridFunction kb = m.stiffness_apply(b.f0);
    double s = 0.0;
    for (std::size_t j = 0; j < kb.size(); ++j) s += a.f0[j] * kb[j];
    return s + m.l2_inner(a.f1, b.f1);
  }
  double dual_norm(const DualPoint& a) const { return std::sqrt(std::max(0.0, dual_inner(a, a))); }

  /// Data terms of the dual objective: (v0 - vFree(T), f1) - <v1 - vFree'(T), f0>.
  double data_term(const DualPoint& f) const {
    const SpatialMetric& m = follower_.metric();
    GridFunction d0 = problem_.v0_target, d1 = problem_.v1_target;
    for (std::size_t j = 0; j < d0.size(); ++j) {
      d0[j] -= free_.vT[j];
      d1[j] -= free_.vTprime[j];
    }
    return m.l2_inner(d0, f.f1) - m.dual_pairing(d1, f.f0);
  }

  double penalty(const DualPoint& f) const {
    return problem_.rho1 * h10_norm(f.f0) + problem_.rho0 * l2_norm(f.f1);
  }

  double dual_objective(const DualPoint& f) const {
    require_delta_zero();
    const ControlTrace u = apply_Astar(f);
    return 0.5 * leader_inner(u, u) + data_term(f) + penalty(f);
  }

  /// Residual pair (v'(T) - v1, -(v(T) - v0)) for the Nash state driven by w1 = A* f,
  /// given A applied to A* f. This is the gradient of the smooth part in H^-1 x L^2.
  DualVector smooth_gradient(const DualVector& aastar) const {
    DualVector e = aastar;
    for (std::size_t j = 0; j < e.a0.size(); ++j) {
      e.a0[j] += free_.vTprime[j] - problem_.v1_target[j];
      e.a1[j] += -free_.vT[j] + problem_.v0_target[j];
    }
    return e;
  }

  /// Proximal map of tau*(rho1 |f0|_{H10} + rho0 |f1|_{L2}): block shrinkage.
  DualPoint prox(DualPoint x, double tau) const {
    const double n0 = h10_norm(x.f0), n1 = l2_norm(x.f1);
    const double s0 = n0 > 0.0 ? std::max(0.0, 1.0 - tau * problem_.rho1 / n0) : 0.0;
    const double s1 = n1 > 0.0 ? std::max(0.0, 1.0 - tau * problem_.rho0 / n1) : 0.0;
    for (double& v : x.f0) v *= s0;
    for (double& v : x.f1) v *= s1;
    return x;
  }

  /// Riesz representative of a gradient (a0, a1) in H^1_0 x L^2.
  DualPoint riesz(const DualVector& e) const {
    DualPoint r{follower_.metric().riesz(e.a0), e.a1};
    r.f1.front() = r.f1.back() = 0.0;
    return r;
  }

  /// Largest eigenvalue of A A* on H^1_0 x L^2 by power iteration.
  double estimate_lipschitz() const {
    const GridSpec& g = follower_.grid();
    DualPoint x = DualPoint::zero(g);
    for (int j = 1; j < g.ny; ++j) {
      const double y = g.y(j);
      x.f0[j] = std::sin(M_PI * y) + 0.3 * std::sin(2.0 * M_PI * y) + 0.1 * std::sin(5.0 * M_PI * y);
      x.f1[j] = std::sin(M_PI * y) - 0.2 * std::sin(3.0 * M_PI * y);
    }
    double lambda = 0.0;
    x *= 1.0 / dual_norm(x);
    for (int it = 0; it < opt_.power_iterations; ++it) {
      DualPoint y = riesz(apply_A(apply_Astar(x)));
      lambda = dual_norm(y);
      if (lambda == 0.0) break;
      y *= 1.0 / lambda;
      x = std::move(y);
    }
    return lambda;
  }

  void require_speed_ok() const {
    const ControllabilityReport rep = validate_controllability_params(follower_.domain());
    if (!rep.speed_ok && !opt_.override_speed_check)
      throw ConfigError("leader solve refused: " + rep.message +
                            " (set leader.override_speed_check = true to run anyway)",
                        "k");
  }

  /// Monotone accelerated proximal gradient (FISTA with function-value restart and
  /// backtracking) on the dual objective.
  DualSolution minimize_dual() const {
    require_speed_ok();
    require_delta_zero();
    const GridSpec& g = follower_.grid();

    DualSolution sol;
    double L = opt_.lipschitz_safety * estimate_lipschitz();
    if (!(L > 0.0)) L = 1.0;

    auto smooth_value = [&](const DualPoint& f, const ControlTrace& u) {
      return 0.5 * leader_inner(u, u) + data_term(f);
    };
    auto axpby = [](const ControlTrace& a, double s, const ControlTrace& b, double t) {
      ControlTrace r = a;
      for (std::size_t n = 0; n < r.size(); ++n) r.values[n] = s * a.values[n] + t * b.values[n];
      return r;
    };

    DualPoint x = DualPoint::zero(g), x_prev = x;
    ControlTrace ux = follower_.zero_leader(), ux_prev = ux;
    double Fx = smooth_value(x, ux) + penalty(x);
    const double F0 = Fx;
    double t = 1.0;
    DualPoint y = x;
    ControlTrace uy = ux;
    sol.log.push_back({0, Fx, std::numeric_limits<double>::infinity(), L, false});

    int k = 0;
    double residual = std::numeric_limits<double>::infinity();
    for (; k < opt_.max_iter; ++k) {
      const DualVector e = smooth_gradient(apply_A(uy));
      const DualPoint grad = riesz(e);
      const double sy = smooth_value(y, uy);

      DualPoint z;
      ControlTrace uz;
      double sz = 0.0;
      for (int bt = 0;; ++bt) {
        DualPoint step = y;
        step.axpy(-1.0 / L, grad);
        z = prox(std::move(step), 1.0 / L);
        uz = apply_Astar(z);
        sz = smooth_value(z, uz);
        DualPoint dz = z;
        dz.axpy(-1.0, y);
        const double bound = sy + dual_inner(grad, dz) + 0.5 * L * dual_inner(dz, dz);
        if (sz <= bound + 1e-12 * std::max(1.0, std::abs(sy)) || bt >= 40) {
          residual = L * dual_norm(dz);
          break;
        }
        L *= 2.0;
      }
      const double Fz = sz + penalty(z);

      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      bool restart = false;
      x_prev = x;
      ux_prev = ux;
      // From a fresh start (y == x) the backtracking test already certifies descent.
      if (Fz <= Fx + slack(Fx) || t == 1.0) {
        x = z;
        ux = uz;
        Fx = Fz;
      } else {
        restart = true;
        ++sol.restarts;
      }
      sol.log.push_back({k + 1, Fx, residual, L, restart});
      if (residual <= opt_.tol) {
        ++k;
        break;
      }
      if (restart) {
        t = 1.0;
        y = x;
        uy = ux;
        continue;
      }
      // y = x + (t/t_next)(z - x) + ((t - 1)/t_next)(x - x_prev); here z == x.
      const double c = (t - 1.0) / t_next;
      y = x;
      y.axpy(c, x);
      y.axpy(-c, x_prev);
      uy = axpby(ux, 1.0 + c, ux_prev, -c);
      t = t_next;
    }
    sol.iterations = k;
    sol.fstar = x;
    sol.objective = Fx;
    sol.lipschitz = L;
    sol.residual = prox_residual(x, L);
    for (std::size_t i = 1; i < sol.log.size(); ++i)
      if (sol.log[i].objective > sol.log[i - 1].objective + slack(sol.log[i - 1].objective))
        sol.monotone = false;
    if (sol.log.back().objective > F0) sol.monotone = false;
    if (!sol.monotone) throw NonConvergence("dual objective increased", residuals(sol.log));
    if (!(sol.residual <= opt_.tol) && !(residual <= opt_.tol))
      throw NonConvergence("dual solver reached leader.max_iter = " + std::to_string(opt_.max_iter) +
                               " with prox residual " + std::to_string(residual),
                           residuals(sol.log));
    return sol;
  }

  /// L * |f - prox(f - grad/L)| in H^1_0 x L^2.
  double prox_residual(const DualPoint& f, double L) const {
    const DualPoint grad = riesz(smooth_gradient(apply_A(apply_Astar(f))));
    DualPoint step = f;
    step.axpy(-1.0 / L, grad);
    DualPoint z = prox(std::move(step), 1.0 / L);
    z.axpy(-1.0, f);
    return L * dual_norm(z);
  }

  /// Evaluates the variational inequality
  ///   <v'(T) - v1, fh0 - f0> - (v(T) - v0, fh1 - f1) + rho1(|fh0| - |f0|) + rho0(|fh1| - |f1|) >= -tol
  /// over unit canonical directions (both signs), random unit directions, fh = 0 and fh = 2f.
  VIReport vi_residual(const DualPoint& f, int directions, std::mt19937_64& rng, double tol = 1e-6) const {
    const GridSpec& g = follower_.grid();
    const SpatialMetric& m = follower_.metric();
    const LeaderRecovery rec = recover_leader(f);
    GridFunction e0(g.nodes(), 0.0), e1(g.nodes(), 0.0);
    for (int j = 1; j < g.ny; ++j) {
      e0[j] = rec.terminal.vTprime[j] - problem_.v1_target[j];
      e1[j] = rec.terminal.vT[j] - problem_.v0_target[j];
    }
    const double n0 = h10_norm(f.f0), n1 = l2_norm(f.f1);
    auto value = [&](const DualPoint& d) {  // fh = f + d
      DualPoint fh = f;
      fh.axpy(1.0, d);
      return m.dual_pairing(e0, d.f0) - m.l2_inner(e1, d.f1) + problem_.rho1 * (h10_norm(fh.f0) - n0) +
             problem_.rho0 * (l2_norm(fh.f1) - n1);
    };

    VIReport rep;
    auto record = [&](double v) {
      rep.min_value = rep.samples == 0 ? v : std::min(rep.min_value, v);
      ++rep.samples;
    };
    for (int j = 1; j < g.ny; ++j) {
      for (int block = 0; block < 2; ++block) {
        DualPoint d = DualPoint::zero(g);
        (block == 0 ? d.f0 : d.f1)[j] = 1.0;
        const double nd = dual_norm(d);
        d *= 1.0 / nd;
        record(value(d));
        d *= -1.0;
        record(value(d));
      }
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < directions; ++i) {
      DualPoint d = DualPoint::zero(g);
      for (int j = 1; j < g.ny; ++j) {
        d.f0[j] = normal(rng);
        d.f1[j] = normal(rng);
      }
      d *= 1.0 / dual_norm(d);
      record(value(d));
    }
    DualPoint minus_f = f;
    minus_f *= -1.0;
    record(value(minus_f));
    record(value(f));

    rep.ok = rep.min_value >= -tol;
    rep.prox_residual = prox_residual(f, opt_.lipschitz_safety * std::max(1e-300, estimate_lipschitz()));
    return rep;
  }

  /// w1 = A* f, w2 = F(w1), v the Nash state with the tracking target, J = 1/2 |w1|^2.
  LeaderRecovery recover_leader(const DualPoint& f) const {
    LeaderRecovery r;
    r.w1 = apply_Astar(f);
    const NashSolution sol = follower_.best_response(r.w1, inner_);
    r.w2 = sol.w2;
    r.v = sol.v;
    r.J = 0.5 * leader_inner(r.w1, r.w1);
    r.terminal = terminal_state(r.v);
    return r;
  }

  ControllabilityResidual controllability_residual(const TerminalState& ts, double slack) const {
    const SpatialMetric& m = follower_.metric();
    GridFunction d0 = ts.vT, d1 = ts.vTprime;
    for (std::size_t j = 0; j < d0.size(); ++j) {
      d0[j] -= problem_.v0_target[j];
      d1[j] -= problem_.v1_target[j];
    }
    d0.front() = d0.back() = d1.front() = d1.back() = 0.0;
    ControllabilityResidual r;
    r.d0 = m.norm(Space::L2, d0);
    r.d1 = m.norm(Space::Hm1, d1);
    r.inside = r.d0 <= problem_.rho0 + slack && r.d1 <= problem_.rho1 + slack;
    return r;
  }

  OptimalitySystem assemble_optimality_system(const DualPoint& f) const {
    const WaveSolver& solver = follower_.solver();
    const double sigma = follower_.sigma();
    AstarResult as = apply_Astar_full(f);
    const NashSolution nash = follower_.best_response(as.w1, inner_);

    OptimalitySystem sys;
    sys.phi = as.phi.p;
    sys.psi = as.psi;
    sys.v = nash.v;
    sys.p = nash.p.p;
    sys.w1 = as.w1;
    sys.w2 = nash.w2;

    const std::vector<double> fphi = solver.flux(as.phi, FluxMethod::Transpose);
    const std::vector<double> fp = solver.flux(nash.p, FluxMethod::Transpose);
    ControlTrace r1 = sys.w1, r2 = sys.w2, r3 = as.psi_trace;
    for (std::size_t n = 0; n < r1.size(); ++n) {
      if (r1.mask[n]) r1.values[n] -= -fphi[n];
      if (r2.mask[n]) r2.values[n] -= fp[n] / sigma;
      if (r3.mask[n]) r3.values[n] -= fphi[n] / sigma;
    }
    sys.leader_residual = follower_.sigma2_norm(r1) / std::max(1.0, follower_.sigma2_norm(sys.w1));
    sys.follower_residual = follower_.sigma2_norm(r2) / std::max(1.0, follower_.sigma2_norm(sys.w2));
    sys.coupling_residual = follower_.sigma2_norm(r3) / std::max(1.0, follower_.sigma2_norm(as.psi_trace));
    return sys;
  }

private:
  double slack(double F) const { return opt_.monotone_slack * std::max(1.0, std::abs(F)); }

  void require_delta_zero() const {
    if (problem_.delta != 0.0)
      throw ConfigError("the dual problem is only defined for leader.delta = 0", "leader.delta");
  }

  static std::vector<double> residuals(const std::vector<DualLogEntry>& log) {
    std::vector<double> r;
    for (const auto& e : log) r.push_back(e.residual);
    return r;
  }

  const Follower& follower_;
  LeaderProblem problem_;
  LeaderOptions opt_;
  FollowerOptions inner_;
  TerminalState free_;
};

}  // namespace stackwave
