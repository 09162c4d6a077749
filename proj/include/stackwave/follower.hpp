#pragma once

#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "stackwave/errors.hpp"
#include "stackwave/geometry.hpp"
#include "stackwave/grid.hpp"
#include "stackwave/spaces.hpp"
#include "stackwave/wavesolver.hpp"

namespace stackwave {

struct FollowerOptions {
  double tol = 1e-8;
  int max_iter = 500;
};

struct SolveStats {
  int iterations = 0;
  double grad0_norm = 0.0;
  double final_grad_norm = 0.0;
  std::vector<double> history;  // gradient norm per iteration
};

struct NashSolution {
  ControlTrace w2;
  Field v;
  AdjointField p;
  SolveStats stats;
};

struct NashGapReport {
  int trials = 0;
  double magnitude = 0.0;
  double min_gap = 0.0;
  bool ok = true;
};

/// Weighted L2(Sigma) inner product of two traces on a segment.
inline double trace_inner(const GridSpec& g, const BoundaryPartition& part, Segment s,
                          std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (int n = 0; n <= g.nt; ++n) acc += part.weight(g, s, n) * a[n] * b[n];
  return acc;
}

/// The follower's tracking problem
///
///   J2(w1, w2) = 1/2 sum_n tau_n alpha_n |v^n - v2^n|^2_{L2} + sigma/2 sum_{n in Sigma2} tau_n w2_n^2,
///
/// and its unique minimizer w2 = F(w1).
class Follower {
public:
  Follower(const GridSpec& grid, const MovingDomain& domain, BoundaryPartition partition, double sigma,
           Field v2_target)
      : grid_(grid),
        domain_(domain),
        partition_(std::move(partition)),
        sigma_(sigma),
        target_(std::move(v2_target)),
        metric_(grid),
        solver_(grid, domain) {
    if (!(sigma > 0.0)) throw ConfigError("follower.sigma must be positive", "follower.sigma");
    if (!(target_.grid() == grid)) throw ShapeError("v2 target must live on the full cylinder grid");
    if (partition_.mask1.size() != grid.levels()) throw ShapeError("partition does not match grid");
  }

  const GridSpec& grid() const noexcept { return grid_; }
  const MovingDomain& domain() const noexcept { return domain_; }
  const BoundaryPartition& partition() const noexcept { return partition_; }
  const SpatialMetric& metric() const noexcept { return metric_; }
  const WaveSolver& solver() const noexcept { return solver_; }
  double sigma() const noexcept { return sigma_; }
  const Field& target() const noexcept { return target_; }

  ControlTrace zero_leader() const { return partition_.zero_trace(Segment::Sigma1); }
  ControlTrace zero_follower() const { return partition_.zero_trace(Segment::Sigma2); }

  double sigma2_norm(const ControlTrace& w) const {
    return std::sqrt(trace_inner(grid_, partition_, w.segment, w.values, w.values));
  }

  Field state(const ControlTrace& w1, const ControlTrace& w2) const {
    w1.require_conforming("state(w1)");
    w2.require_conforming("state(w2)");
    return solver_.forward(partition_.boundary(w1, w2));
  }

  /// Space-time tracking term 1/2 sum tau alpha |e|^2 of a residual field.
  double tracking(const Field& residual) const {
    double acc = 0.0;
    for (int n = 0; n <= grid_.nt; ++n) {
      const auto row = residual.row(n);
      acc += grid_.time_weight(n) * domain_.alpha_unchecked(grid_.t(n)) * metric_.l2_inner(row, row);
    }
    return 0.5 * acc;
  }

  double eval_J2(const ControlTrace& w1, const ControlTrace& w2) const {
    check_traces(w1, w2);
    Field e = state(w1, w2);
    e -= target_;
    return tracking(e) + 0.5 * sigma_ * trace_inner(grid_, partition_, Segment::Sigma2, w2.values, w2.values);
  }

  /// Adjoint of the tracking residual: p'' + L* p = -alpha e, so that the
  /// derivative of the tracking term in direction h on Sigma2 is -(flux(p), h).
  AdjointField tracking_adjoint(const Field& residual) const {
    Field seed(grid_);
    for (int n = 0; n <= grid_.nt; ++n) {
      const GridFunction me = metric_.mass_apply(residual.row(n));
      const double s = -grid_.time_weight(n) * domain_.alpha_unchecked(grid_.t(n));
      auto row = seed.row(n);
      for (int j = 0; j <= grid_.ny; ++j) row[j] = s * me[j];
    }
    return solver_.backward_from_seed(seed);
  }

  /// sigma w2 - flux(p) on Sigma2, zero elsewhere.
  ControlTrace grad_J2_w2(const ControlTrace& w1, const ControlTrace& w2) const {
    check_traces(w1, w2);
    Field e = state(w1, w2);
    e -= target_;
    return gradient_from(w2, tracking_adjoint(e));
  }

  /// Normal operator of the follower problem: h -> sigma h - flux(p[h]) on Sigma2,
  /// where p[h] is the adjoint of the state driven by h alone. Self-adjoint and
  /// positive definite in the weighted L2(Sigma2) inner product.
  ControlTrace normal_apply(const ControlTrace& h) const {
    ControlTrace zero = zero_leader();
    Field v = solver_.forward(partition_.boundary(zero, h));
    return gradient_from(h, tracking_adjoint(v));
  }

  /// Solves normal_apply(x) = rhs by conjugate gradients in the weighted
  /// L2(Sigma2) inner product; stops when |rhs - A x| <= tol * max(1, |rhs|).
  ControlTrace solve_normal(const ControlTrace& rhs, const FollowerOptions& opt, SolveStats& stats,
                            const ControlTrace* start = nullptr) const {
    auto inner = [&](const ControlTrace& a, const ControlTrace& b) {
      return trace_inner(grid_, partition_, Segment::Sigma2, a.values, b.values);
    };
    ControlTrace x = start ? *start : zero_follower();
    ControlTrace r = rhs;
    if (start) {
      const ControlTrace ax = normal_apply(x);
      for (std::size_t n = 0; n < r.size(); ++n) r.values[n] -= ax.values[n];
    }
    const double stop = opt.tol * std::max(1.0, std::sqrt(inner(rhs, rhs)));
    ControlTrace d = r;
    double rr = inner(r, r);
    stats.history.push_back(std::sqrt(rr));

    int it = 0;
    while (std::sqrt(rr) > stop) {
      if (it >= opt.max_iter)
        throw NonConvergence("follower CG did not reach tol " + std::to_string(opt.tol) + " in " +
                                 std::to_string(opt.max_iter) + " iterations",
                             stats.history);
      const ControlTrace ad = normal_apply(d);
      const double dad = inner(d, ad);
      if (!(dad > 0.0)) throw NonConvergence("follower normal operator lost positivity", stats.history);
      const double step = rr / dad;
      for (std::size_t n = 0; n < x.size(); ++n) {
        x.values[n] += step * d.values[n];
        r.values[n] -= step * ad.values[n];
      }
      const double rr_new = inner(r, r);
      const double beta = rr_new / rr;
      for (std::size_t n = 0; n < d.size(); ++n) d.values[n] = r.values[n] + beta * d.values[n];
      rr = rr_new;
      ++it;
      stats.history.push_back(std::sqrt(rr));
    }
    stats.iterations += it;
    return x;
  }

  /// Best response w2 = F(w1). When `track_target` is false the target v2 is
  /// replaced by zero (the homogeneous problem behind the leader's operator).
  NashSolution best_response(const ControlTrace& w1, const FollowerOptions& opt = {},
                             const ControlTrace* start = nullptr, bool track_target = true) const {
    w1.require_conforming("best_response(w1)");
    if (start) start->require_conforming("best_response(start)");

    auto residual_field = [&](const ControlTrace& w2) {
      Field e = state(w1, w2);
      if (track_target) e -= target_;
      return e;
    };

    NashSolution sol;
    const ControlTrace zero = zero_follower();
    ControlTrace rhs = gradient_from(zero, tracking_adjoint(residual_field(zero)));
    rhs *= -1.0;
    sol.stats.grad0_norm = sigma2_norm(rhs);
    sol.w2 = solve_normal(rhs, opt, sol.stats, start);

    sol.v = state(w1, sol.w2);
    Field e = sol.v;
    if (track_target) e -= target_;
    sol.p = tracking_adjoint(e);
    sol.stats.final_grad_norm = sigma2_norm(gradient_from(sol.w2, sol.p));
    return sol;
  }

  /// sigma w2 - flux(p) on Sigma2 for a given adjoint.
  ControlTrace gradient_from(const ControlTrace& w2, const AdjointField& p) const {
    ControlTrace g = zero_follower();
    const std::vector<double> fl = solver_.flux(p, FluxMethod::Transpose);
    for (std::size_t n = 0; n < g.size(); ++n)
      if (g.mask[n]) g.values[n] = sigma_ * w2.values[n] - fl[n];
    return g;
  }

  /// Samples J2(w1, w2 + delta) - J2(w1, w2) over random perturbations on Sigma2.
  NashGapReport nash_gap_check(const ControlTrace& w1, const ControlTrace& w2, int trials,
                               double magnitude, std::mt19937_64& rng) const {
    std::vector<ControlTrace> perturbations;
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < trials; ++i) {
      ControlTrace d = zero_follower();
      for (std::size_t n = 0; n < d.size(); ++n)
        if (d.mask[n]) d.values[n] = normal(rng);
      const double nd = sigma2_norm(d);
      if (nd > 0.0) d *= magnitude / nd;
      perturbations.push_back(std::move(d));
    }
    return nash_gap_check(w1, w2, perturbations, magnitude);
  }

  NashGapReport nash_gap_check(const ControlTrace& w1, const ControlTrace& w2,
                               const std::vector<ControlTrace>& perturbations, double magnitude) const {
    NashGapReport rep;
    rep.trials = static_cast<int>(perturbations.size());
    rep.magnitude = magnitude;
    const double base = eval_J2(w1, w2);
    bool first = true;
    for (const ControlTrace& d : perturbations) {
      if (d.mask != partition_.mask2)
        throw ContractError("nash_gap_check: perturbation is not declared on Sigma2");
      d.require_conforming("nash_gap_check(perturbation)");
      ControlTrace w = w2;
      w += d;
      const double gap = eval_J2(w1, w) - base;
      rep.min_gap = first ? gap : std::min(rep.min_gap, gap);
      first = false;
      if (gap < -1e-10) rep.ok = false;
    }
    return rep;
  }

private:
  void check_traces(const ControlTrace& w1, const ControlTrace& w2) const {
    if (w1.mask != partition_.mask1) throw ContractError("w1 is not declared on Sigma1");
    if (w2.mask != partition_.mask2) throw ContractError("w2 is not declared on Sigma2");
    w1.require_conforming("w1");
    w2.require_conforming("w2");
  }

  GridSpec grid_;
  MovingDomain domain_;
  BoundaryPartition partition_;
  double sigma_;
  Field target_;
  SpatialMetric metric_;
  WaveSolver solver_;
};

}  // namespace stackwave
