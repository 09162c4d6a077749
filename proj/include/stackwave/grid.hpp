#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "stackwave/errors.hpp"

namespace stackwave {

/// Samples of a function of y on the nodes y_j = j*dy, j = 0..ny.
using GridFunction = std::vector<double>;

/// Uniform space-time discretization of the cylinder (0,1) x (0,T).
struct GridSpec {
  int ny = 0;   // nodes y_j = j*dy, j = 0..ny
  int nt = 0;   // time levels t_n = n*dt, n = 0..nt
  double dy = 0.0;
  double dt = 0.0;
  double T = 0.0;
  double cfl = 0.8;

  /// Smallest nt with dt <= cfl*dy.
  static GridSpec from_cfl(int ny, double T, double cfl = 0.8) {
    check_common(ny, T, cfl);
    const double dy = 1.0 / ny;
    const int nt = std::max(2, static_cast<int>(std::ceil(T / (cfl * dy) - 1e-9)));
    return GridSpec{ny, nt, dy, T / nt, T, cfl};
  }

  /// Explicit step count, used for tiny oracle grids.
  static GridSpec with_steps(int ny, int nt, double T, double cfl = 0.8) {
    check_common(ny, T, cfl);
    if (nt < 2) throw ConfigError("grid needs at least 2 time steps", "grid.nt");
    GridSpec g{ny, nt, 1.0 / ny, T / nt, T, cfl};
    if (g.dt > cfl * g.dy * (1.0 + 1e-12))
      throw ConfigError("CFL violated: dt = " + std::to_string(g.dt) + " > cfl*dy = " +
                            std::to_string(cfl * g.dy),
                        "grid.cfl");
    return g;
  }

  std::size_t nodes() const noexcept { return static_cast<std::size_t>(ny) + 1; }
  std::size_t levels() const noexcept { return static_cast<std::size_t>(nt) + 1; }
  double y(int j) const noexcept { return j * dy; }
  double t(int n) const noexcept { return n == nt ? T : n * dt; }

  /// Trapezoidal quadrature weight of time level n.
  double time_weight(int n) const noexcept { return (n == 0 || n == nt) ? 0.5 * dt : dt; }

  bool operator==(const GridSpec&) const = default;

private:
  static void check_common(int ny, double T, double cfl) {
    if (ny < 3) throw ConfigError("grid.ny must be >= 3, got " + std::to_string(ny), "grid.ny");
    if (!(T > 0.0)) throw ConfigError("T must be positive", "T");
    if (!(cfl > 0.0 && cfl < 1.0)) throw ConfigError("grid.cfl must lie in (0,1)", "grid.cfl");
  }
};

/// Space-time samples, rows = time levels, columns = space nodes.
class Field {
public:
  Field() = default;
  explicit Field(const GridSpec& grid)
      : grid_(grid), values_(grid.levels() * grid.nodes(), 0.0) {}

  const GridSpec& grid() const noexcept { return grid_; }

  std::span<double> row(int n) { return {values_.data() + n * grid_.nodes(), grid_.nodes()}; }
  std::span<const double> row(int n) const {
    return {values_.data() + n * grid_.nodes(), grid_.nodes()};
  }
  double& operator()(int n, int j) { return values_[n * grid_.nodes() + j]; }
  double operator()(int n, int j) const { return values_[n * grid_.nodes() + j]; }

  std::vector<double>& data() noexcept { return values_; }
  const std::vector<double>& data() const noexcept { return values_; }

  Field& operator+=(const Field& o) {
    check_same(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    return *this;
  }
  Field& operator-=(const Field& o) {
    check_same(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
    return *this;
  }
  Field& operator*=(double s) {
    for (double& v : values_) v *= s;
    return *this;
  }
  friend Field operator+(Field a, const Field& b) { return a += b; }
  friend Field operator-(Field a, const Field& b) { return a -= b; }
  friend Field operator*(double s, Field a) { return a *= s; }

  double max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

private:
  void check_same(const Field& o) const {
    if (!(o.grid_ == grid_)) throw ShapeError("field grid mismatch");
  }

  GridSpec grid_{};
  std::vector<double> values_;
};

/// Which part of the controlled boundary y = 0 a trace lives on.
enum class Segment { Sigma1, Sigma2, Full };

/// Dirichlet data at y = 0, one value per time level, zero outside its mask.
struct ControlTrace {
  std::vector<double> values;
  std::vector<char> mask;
  Segment segment = Segment::Full;

  ControlTrace() = default;
  ControlTrace(std::size_t levels, std::vector<char> m, Segment s)
      : values(levels, 0.0), mask(std::move(m)), segment(s) {
    if (mask.size() != levels) throw ShapeError("control mask length mismatch");
  }

  std::size_t size() const noexcept { return values.size(); }

  bool conforms() const {
    for (std::size_t n = 0; n < values.size(); ++n)
      if (!mask[n] && values[n] != 0.0) return false;
    return true;
  }
  void require_conforming(const char* what) const {
    if (values.size() != mask.size()) throw ShapeError(std::string(what) + ": trace length mismatch");
    if (!conforms())
      throw ContractError(std::string(what) + ": trace is nonzero outside its boundary segment");
  }

  ControlTrace& operator+=(const ControlTrace& o) {
    if (o.size() != size()) throw ShapeError("trace length mismatch");
    for (std::size_t n = 0; n < values.size(); ++n) values[n] += o.values[n];
    return *this;
  }
  ControlTrace& operator*=(double s) {
    for (double& v : values) v *= s;
    return *this;
  }
};

/// (v(T), v'(T)); both stored on all nodes with zero endpoints.
struct TerminalState {
  GridFunction vT;
  GridFunction vTprime;
};

inline GridFunction zero_function(const GridSpec& g) { return GridFunction(g.nodes(), 0.0); }

inline void require_nodes(const GridSpec& g, std::span<const double> f, const char* what) {
  if (f.size() != g.nodes())
    throw ShapeError(std::string(what) + ": expected " + std::to_string(g.nodes()) +
                     " samples, got " + std::to_string(f.size()));
}

}  // namespace stackwave
