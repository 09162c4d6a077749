#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "stackwave/errors.hpp"
#include "stackwave/grid.hpp"

namespace stackwave {

/// Interval (0, 1+k t) with a left endpoint at rest, mapped to (0,1) by y = x/(1+k t).
///
/// k = 0 is accepted so that closed-form cylinder solutions can serve as
/// references; the hierarchical-control model itself wants 0 < k < 1.
class MovingDomain {
public:
  MovingDomain(double k, double T) : k_(k), T_(T) {
    if (!(k >= 0.0 && k < 1.0)) throw ConfigError("k must satisfy 0 <= k < 1", "k");
    if (!(T > 0.0)) throw ConfigError("T must be positive", "T");
  }

  double k() const noexcept { return k_; }
  double T() const noexcept { return T_; }
  bool cylinder() const noexcept { return k_ == 0.0; }

  double alpha(double t) const {
    check_t(t);
    return 1.0 + k_ * t;
  }

  struct Coefficients {
    double beta;
    double gamma;
  };

  /// beta = (1 - k^2 y^2)/alpha(t), gamma = -2 k y.
  Coefficients coefficients(double y, double t) const {
    if (!(y >= 0.0 && y <= 1.0)) throw DomainError("y outside [0,1]: " + std::to_string(y));
    const double a = alpha(t);
    return {(1.0 - k_ * k_ * y * y) / a, -2.0 * k_ * y};
  }

  // Unchecked forms for the inner loops of the solver.
  double alpha_unchecked(double t) const noexcept { return 1.0 + k_ * t; }
  double diffusivity_unchecked(double y, double t) const noexcept {
    const double a = 1.0 + k_ * t;
    return (1.0 - k_ * k_ * y * y) / (a * a);
  }

private:
  void check_t(double t) const {
    constexpr double eps = 1e-12;
    if (!(t >= -eps && t <= T_ * (1.0 + eps) + eps))
      throw DomainError("t outside [0,T]: " + std::to_string(t));
  }

  double k_;
  double T_;
};

inline double speed_bound() { return 1.0 - std::exp(-0.5); }

struct ControllabilityReport {
  double k = 0.0;
  double T = 0.0;
  double speed_bound = 0.0;
  bool speed_ok = false;
  bool horizon_warning = false;
  std::string message;
};

/// Checks 0 < k < 1 - 1/sqrt(e). The minimal horizon is not known in closed
/// form, so T is only compared against the cylinder round-trip time 2.
inline ControllabilityReport validate_controllability_params(const MovingDomain& d) {
  ControllabilityReport r;
  r.k = d.k();
  r.T = d.T();
  r.speed_bound = speed_bound();
  r.speed_ok = d.k() > 0.0 && d.k() < r.speed_bound;
  r.horizon_warning = d.T() < 2.0;
  if (!r.speed_ok)
    r.message = "boundary speed k = " + std::to_string(d.k()) +
                " violates 0 < k < 1 - 1/sqrt(e) = " + std::to_string(r.speed_bound);
  if (r.horizon_warning) {
    if (!r.message.empty()) r.message += "; ";
    r.message += "T = " + std::to_string(d.T()) +
                 " is below the round-trip time 2; controllability residuals may be large";
  }
  return r;
}

/// Derivative of grid samples: centered inside, second-order one-sided at the ends.
inline GridFunction grid_derivative(std::span<const double> f, double dy) {
  const std::size_t n = f.size();
  if (n < 3) throw ShapeError("grid_derivative needs at least 3 samples");
  GridFunction d(n);
  d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dy);
  for (std::size_t j = 1; j + 1 < n; ++j) d[j] = (f[j + 1] - f[j - 1]) / (2.0 * dy);
  d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * dy);
  return d;
}

struct InitialData {
  GridFunction v0;
  GridFunction v1;
};

/// Initial data in cylinder coordinates: v0 = u0, v1 = u1 + k y u0'.
inline InitialData pullback_initial(const GridSpec& g, std::span<const double> u0,
                                    std::span<const double> u1, const MovingDomain& d) {
  require_nodes(g, u0, "pullback_initial(u0)");
  require_nodes(g, u1, "pullback_initial(u1)");
  InitialData out{GridFunction(u0.begin(), u0.end()), GridFunction(u1.begin(), u1.end())};
  if (d.k() == 0.0) return out;
  const GridFunction du0 = grid_derivative(u0, g.dy);
  for (int j = 0; j <= g.ny; ++j) out.v1[j] += d.k() * g.y(j) * du0[j];
  return out;
}

/// Field samples reported on the physical interval (0, alpha(t_n)).
struct PhysicalSamples {
  std::vector<double> t;
  std::vector<std::vector<double>> x;  // x[n][j] = y_j * alpha(t_n)
  std::vector<std::vector<double>> u;
};

/// u(x,t) = v(x/alpha(t), t). On the moving node set x_j = y_j alpha(t_n) this is
/// a relabeling; sample_physical() interpolates at arbitrary x.
template <class FieldLike>
PhysicalSamples pushforward_state(const FieldLike& field, const MovingDomain& d) {
  const GridSpec& g = field.grid();
  PhysicalSamples s;
  s.t.resize(g.levels());
  s.x.assign(g.levels(), std::vector<double>(g.nodes()));
  s.u.assign(g.levels(), std::vector<double>(g.nodes()));
  for (int n = 0; n <= g.nt; ++n) {
    const double a = d.alpha_unchecked(g.t(n));
    s.t[n] = g.t(n);
    for (int j = 0; j <= g.ny; ++j) {
      s.x[n][j] = g.y(j) * a;
      s.u[n][j] = field(n, j);
    }
  }
  return s;
}

/// Linear interpolation of u(x, t_n); zero outside the physical interval.
template <class FieldLike>
double sample_physical(const FieldLike& field, const MovingDomain& d, int n, double x) {
  const GridSpec& g = field.grid();
  const double y = x / d.alpha_unchecked(g.t(n));
  if (y < 0.0 || y > 1.0) return 0.0;
  const double s = y / g.dy;
  int j = static_cast<int>(std::floor(s));
  if (j >= g.ny) return field(n, g.ny);
  const double w = s - j;
  return (1.0 - w) * field(n, j) + w * field(n, j + 1);
}

enum class PartitionMode { Overlap, Split };

/// Membership of each time level in the leader (Sigma1) and follower (Sigma2) segments.
struct BoundaryPartition {
  PartitionMode mode = PartitionMode::Overlap;
  double split_time = 0.0;
  std::vector<char> mask1;
  std::vector<char> mask2;

  const std::vector<char>& mask(Segment s) const {
    if (s == Segment::Sigma1) return mask1;
    if (s == Segment::Sigma2) return mask2;
    throw ContractError("no mask for the full boundary");
  }

  ControlTrace zero_trace(Segment s) const { return ControlTrace(mask1.size(), mask(s), s); }

  /// Quadrature weight of level n restricted to segment s.
  double weight(const GridSpec& g, Segment s, int n) const {
    return mask(s)[n] ? g.time_weight(n) : 0.0;
  }

  /// Dirichlet data seen by the state: w1 on Sigma1 plus w2 on Sigma2.
  std::vector<double> boundary(const ControlTrace& w1, const ControlTrace& w2) const {
    std::vector<double> b(mask1.size(), 0.0);
    for (std::size_t n = 0; n < b.size(); ++n)
      b[n] = (mask1[n] ? w1.values[n] : 0.0) + (mask2[n] ? w2.values[n] : 0.0);
    return b;
  }
};

/// Overlap: both segments are the whole left boundary. Split: levels with
/// t_n <= split_time go to Sigma1, the rest to Sigma2.
inline BoundaryPartition build_partition(PartitionMode mode, const GridSpec& g,
                                         double split_time = 0.0) {
  BoundaryPartition p;
  p.mode = mode;
  p.mask1.assign(g.levels(), 1);
  p.mask2.assign(g.levels(), 1);
  if (mode == PartitionMode::Overlap) return p;
  if (!(split_time > 0.0 && split_time < g.T))
    throw ConfigError("partition.split_time must lie in (0,T)", "partition.split_time");
  p.split_time = split_time;
  for (int n = 0; n <= g.nt; ++n) {
    const bool first = g.t(n) <= split_time + 1e-12 * g.T;
    p.mask1[n] = first ? 1 : 0;
    p.mask2[n] = first ? 0 : 1;
  }
  return p;
}

}  // namespace stackwave
