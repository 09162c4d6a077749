#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "stackwave/errors.hpp"
#include "stackwave/geometry.hpp"
#include "stackwave/grid.hpp"
#include "stackwave/spaces.hpp"

namespace stackwave {

/// Terminal data (p(T), p'(T)) for a backward solve; zero endpoints.
struct TerminalData {
  GridFunction pT;
  GridFunction pTprime;
};

/// Adjoint field together with the exact transpose of the Dirichlet injection.
struct AdjointField {
  Field p;
  /// d(functional)/d(b_n) for every time level, unweighted.
  std::vector<double> boundary_functional;
};

/// Euclidean transpose of the forward map, split by input.
struct TransposeResult {
  std::vector<double> boundary;  // per time level
  Field source;                  // per (n, j)
  GridFunction v0;
  GridFunction v1;
  Field multipliers;             // row n = multiplier of the update producing level n+1
};

enum class FluxMethod { Transpose, OneSided };

/// Explicit three-level scheme for v'' + L v = f on the cylinder,
///
///   (v^{n+1} - 2v^n + v^{n-1})/dt^2 = D-(a D+ v^n) - (gamma/alpha^n) D0[(v^n - v^{n-1})/dt] + f^n,
///
/// with a = beta/alpha at half nodes, Dirichlet data b at y = 0 and zero at y = 1.
/// The adjoint is the exact transpose of this recursion, so forward/backward
/// duality identities hold to round-off.
class WaveSolver {
public:
  WaveSolver(const GridSpec& grid, const MovingDomain& domain) : grid_(grid), domain_(domain) {
    if (!(grid.cfl > 0.0 && grid.cfl < 1.0) || grid.dt > grid.cfl * grid.dy * (1.0 + 1e-12))
      throw ConfigError("CFL condition violated: dt/dy = " + std::to_string(grid.dt / grid.dy),
                        "grid.cfl");
    if (std::abs(domain.T() - grid.T) > 1e-12 * grid.T)
      throw ContractError("grid and domain disagree on T");
    const int ny = grid.ny;
    half_.assign(static_cast<std::size_t>(grid.nt) * ny, 0.0);
    mix_.assign(static_cast<std::size_t>(grid.nt) * (ny + 1), 0.0);
    for (int n = 0; n < grid.nt; ++n) {
      const double t = grid.t(n);
      const double al = domain.alpha_unchecked(t);
      for (int j = 0; j < ny; ++j) half_[n * ny + j] = domain.diffusivity_unchecked((j + 0.5) * grid.dy, t);
      for (int j = 0; j <= ny; ++j) mix_[n * (ny + 1) + j] = -2.0 * domain.k() * grid.y(j) / al;
    }
  }

  const GridSpec& grid() const noexcept { return grid_; }
  const MovingDomain& domain() const noexcept { return domain_; }

  /// Forward solve. `boundary` holds v(0, t_n); source and init may be null (zero).
  Field forward(std::span<const double> boundary, const Field* source = nullptr,
                const InitialData* init = nullptr) const {
    const GridSpec& g = grid_;
    if (boundary.size() != g.levels()) throw ShapeError("boundary trace length mismatch");
    if (source && !(source->grid() == g)) throw ShapeError("source grid mismatch");
    const int ny = g.ny;
    const double dt = g.dt, dy = g.dy;
    const double r = dt * dt / (dy * dy);
    const double m = dt / (2.0 * dy);

    Field v(g);
    auto v0 = v.row(0);
    if (init) {
      require_nodes(g, init->v0, "initial v0");
      require_nodes(g, init->v1, "initial v1");
      for (int j = 1; j < ny; ++j) v0[j] = init->v0[j];
    }
    v0[0] = boundary[0];

    // start-up: v^1 = v^0 + dt v1 + dt^2/2 rhs(0)
    {
      auto v1 = v.row(1);
      const double* a = &half_[0];
      const double* c = &mix_[0];
      for (int j = 1; j < ny; ++j) {
        const double lap = a[j] * (v0[j + 1] - v0[j]) - a[j - 1] * (v0[j] - v0[j - 1]);
        double vel = 0.0, mixed = 0.0;
        if (init) {
          vel = init->v1[j];
          mixed = c[j] * (init->v1[j + 1] - init->v1[j - 1]);
        }
        const double f = source ? (*source)(0, j) : 0.0;
        v1[j] = v0[j] + dt * vel + 0.5 * (r * lap - dt * m * mixed + dt * dt * f);
      }
      v1[0] = boundary[1];
    }

    for (int n = 1; n < g.nt; ++n) {
      auto prev = v.row(n - 1);
      auto cur = v.row(n);
      auto next = v.row(n + 1);
      const double* a = &half_[n * ny];
      const double* c = &mix_[n * (ny + 1)];
      for (int j = 1; j < ny; ++j) {
        const double lap = a[j] * (cur[j + 1] - cur[j]) - a[j - 1] * (cur[j] - cur[j - 1]);
        const double mixed = c[j] * ((cur[j + 1] - prev[j + 1]) - (cur[j - 1] - prev[j - 1]));
        const double f = source ? (*source)(n, j) : 0.0;
        next[j] = 2.0 * cur[j] - prev[j] + r * lap - m * mixed + dt * dt * f;
      }
      next[0] = boundary[n + 1];
      if ((n + 1) % 100 == 0) check_finite(next, n + 1);
    }
    check_finite(v.row(g.nt), g.nt);
    return v;
  }

  /// Transpose of forward(): given the gradient `seed` of a linear functional with
  /// respect to every sample of v, returns its gradient with respect to every input.
  TransposeResult transpose(const Field& seed) const {
    const GridSpec& g = grid_;
    if (!(seed.grid() == g)) throw ContractError("seed grid does not match the assembled solver");
    const int ny = g.ny;
    const double dt = g.dt, dy = g.dy;
    const double r = dt * dt / (dy * dy);
    const double m = dt / (2.0 * dy);

    TransposeResult out{std::vector<double>(g.levels(), 0.0), Field(g), zero_function(g),
                        zero_function(g), Field(g)};
    Field w = seed;  // accumulated adjoint of each sample

    for (int n = g.nt - 1; n >= 1; --n) {
      auto mu = w.row(n + 1);
      auto wc = w.row(n);
      auto wp = w.row(n - 1);
      const double* a = &half_[n * ny];
      const double* c = &mix_[n * (ny + 1)];
      for (int j = 1; j < ny; ++j) {
        const double u = mu[j];
        if (u == 0.0) continue;
        wc[j] += 2.0 * u - r * (a[j] + a[j - 1]) * u;
        wc[j + 1] += r * a[j] * u - m * c[j] * u;
        wc[j - 1] += r * a[j - 1] * u + m * c[j] * u;
        wp[j] -= u;
        wp[j + 1] += m * c[j] * u;
        wp[j - 1] -= m * c[j] * u;
        out.source(n, j) = dt * dt * u;
      }
      for (int j = 1; j < ny; ++j) out.multipliers(n, j) = mu[j];
    }
    {
      auto mu = w.row(1);
      auto w0 = w.row(0);
      const double* a = &half_[0];
      const double* c = &mix_[0];
      for (int j = 1; j < ny; ++j) {
        const double u = mu[j];
        if (u == 0.0) continue;
        w0[j] += u - 0.5 * r * (a[j] + a[j - 1]) * u;
        w0[j + 1] += 0.5 * r * a[j] * u;
        w0[j - 1] += 0.5 * r * a[j - 1] * u;
        out.v1[j] += dt * u;
        out.v1[j + 1] -= 0.5 * dt * m * c[j] * u;
        out.v1[j - 1] += 0.5 * dt * m * c[j] * u;
        out.source(0, j) = 0.5 * dt * dt * u;
      }
      for (int j = 1; j < ny; ++j) out.multipliers(0, j) = mu[j];
    }
    for (int n = 0; n <= g.nt; ++n) out.boundary[n] = w(n, 0);
    for (int j = 1; j < ny; ++j) out.v0[j] = w(0, j);
    return out;
  }

  /// Backward solve of p'' + L* p = s, p(T) = pT, p'(T) = pT' (as the transpose of
  /// the forward map). For every boundary input b with zero source and initial data,
  ///
  ///   sum_n tau_n (v^n, s^n)_{L2} + <pT, v'(T)> - (pT', v(T)) = sum_n tau_n b_n flux_n,
  ///
  /// where v'(T) is the backward difference and flux is the transpose flux.
  AdjointField backward(const Field& source, const TerminalData* terminal = nullptr) const {
    const GridSpec& g = grid_;
    if (!(source.grid() == g)) throw ContractError("source grid does not match the assembled solver");
    const SpatialMetric metric(g);
    Field seed(g);
    for (int n = 0; n <= g.nt; ++n) {
      const GridFunction ms = metric.mass_apply(source.row(n));
      const double tau = g.time_weight(n);
      auto row = seed.row(n);
      for (int j = 0; j <= g.ny; ++j) row[j] = tau * ms[j];
    }
    if (terminal) add_terminal_seed(metric, *terminal, seed);
    return backward_from_seed(seed, terminal);
  }

  /// Same as backward() with a precomputed Euclidean seed.
  AdjointField backward_from_seed(const Field& seed, const TerminalData* terminal = nullptr) const {
    const GridSpec& g = grid_;
    TransposeResult tr = transpose(seed);
    AdjointField out{Field(g), std::move(tr.boundary)};
    const double scale = g.dt / g.dy;
    for (int n = 0; n < g.nt; ++n)
      for (int j = 1; j < g.ny; ++j) out.p(n, j) = scale * tr.multipliers(n, j);
    if (terminal)
      for (int j = 1; j < g.ny; ++j) out.p(g.nt, j) = terminal->pT[j];
    return out;
  }

  /// Seed of the functional v -> <pT, v'(T)> - (pT', v(T)).
  void add_terminal_seed(const SpatialMetric& metric, const TerminalData& td, Field& seed) const {
    const GridSpec& g = grid_;
    require_nodes(g, td.pT, "terminal pT");
    require_nodes(g, td.pTprime, "terminal pT'");
    GridFunction mp = metric.mass_apply(td.pT);
    GridFunction mq = metric.mass_apply(td.pTprime);
    for (int j = 1; j < g.ny; ++j) {
      seed(g.nt, j) += mp[j] / g.dt - mq[j];
      seed(g.nt - 1, j) -= mp[j] / g.dt;
    }
  }

  /// (1/alpha^2) p_y at y = 0 per time level.
  std::vector<double> flux(const AdjointField& adj, FluxMethod method) const {
    const GridSpec& g = grid_;
    std::vector<double> out(g.levels(), 0.0);
    if (method == FluxMethod::Transpose) {
      for (int n = 0; n <= g.nt; ++n) out[n] = adj.boundary_functional[n] / g.time_weight(n);
      return out;
    }
    return onesided_flux(adj.p);
  }

  std::vector<double> onesided_flux(const Field& p) const {
    const GridSpec& g = grid_;
    std::vector<double> out(g.levels(), 0.0);
    for (int n = 0; n <= g.nt; ++n) {
      const double al = domain_.alpha_unchecked(g.t(n));
      out[n] = (-3.0 * p(n, 0) + 4.0 * p(n, 1) - p(n, 2)) / (2.0 * g.dy) / (al * al);
    }
    return out;
  }

private:
  void check_finite(std::span<const double> row, int n) const {
    for (double x : row)
      if (!std::isfinite(x) || std::abs(x) > 1e150)
        throw InstabilityError("non-finite state at time level " + std::to_string(n) +
                               " (dt/dy = " + std::to_string(grid_.dt / grid_.dy) + ")");
  }

  GridSpec grid_;
  MovingDomain domain_;
  std::vector<double> half_;  // beta/alpha at (j+1/2, n), n < nt
  std::vector<double> mix_;   // gamma/alpha at (j, n), n < nt
};

// Free-function forms.

inline Field solve_forward(const GridSpec& g, const MovingDomain& d, std::span<const double> boundary,
                           const Field* source = nullptr, const InitialData* init = nullptr) {
  return WaveSolver(g, d).forward(boundary, source, init);
}

inline Field solve_forward(const GridSpec& g, const MovingDomain& d, const BoundaryPartition& part,
                           const ControlTrace& w1, const ControlTrace& w2,
                           const Field* source = nullptr, const InitialData* init = nullptr) {
  w1.require_conforming("solve_forward(w1)");
  w2.require_conforming("solve_forward(w2)");
  return WaveSolver(g, d).forward(part.boundary(w1, w2), source, init);
}

inline AdjointField solve_backward_transpose(const GridSpec& g, const MovingDomain& d,
                                             const Field& source,
                                             const TerminalData* terminal = nullptr) {
  return WaveSolver(g, d).backward(source, terminal);
}

inline ControlTrace boundary_flux(const WaveSolver& solver, const AdjointField& adj, FluxMethod method) {
  const GridSpec& g = solver.grid();
  ControlTrace t(g.levels(), std::vector<char>(g.levels(), 1), Segment::Full);
  t.values = solver.flux(adj, method);
  return t;
}

/// (v(T), (v(T) - v(T-dt))/dt) with zero endpoints.
inline TerminalState terminal_state(const Field& v) {
  const GridSpec& g = v.grid();
  if (g.nt < 1) throw ShapeError("terminal_state needs two time levels");
  TerminalState s{zero_function(g), zero_function(g)};
  for (int j = 1; j < g.ny; ++j) {
    s.vT[j] = v(g.nt, j);
    s.vTprime[j] = (v(g.nt, j) - v(g.nt - 1, j)) / g.dt;
  }
  return s;
}

}  // namespace stackwave
