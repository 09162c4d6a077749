#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "stackwave/errors.hpp"
#include "stackwave/grid.hpp"

namespace stackwave {

enum class Space { L2, H10, Hm1 };

/// Piecewise-linear mass and stiffness matrices on the uniform grid.
///
/// The mass matrix M acts on all ny+1 nodes (it reduces to dy*tridiag(1/6,2/3,1/6)
/// on functions that vanish at both ends); the stiffness matrix K is the
/// Dirichlet Laplacian (1/dy)*tridiag(-1,2,-1) on the ny-1 interior nodes.
class SpatialMetric {
public:
  explicit SpatialMetric(const GridSpec& g) : grid_(g), n_(g.ny - 1) {
    if (g.ny < 3) throw ConfigError("metric needs ny >= 3", "grid.ny");
    // Thomas factorization of K, reused by every solve.
    const double d = 2.0 / g.dy, o = -1.0 / g.dy;
    cprime_.resize(n_);
    denom_.resize(n_);
    double prev = 0.0;
    for (int i = 0; i < n_; ++i) {
      const double den = d - (i > 0 ? o * prev : 0.0);
      denom_[i] = den;
      prev = (i + 1 < n_) ? o / den : 0.0;
      cprime_[i] = prev;
    }
  }

  const GridSpec& grid() const noexcept { return grid_; }

  /// M f on all nodes.
  GridFunction mass_apply(std::span<const double> f) const {
    require_nodes(grid_, f, "mass_apply");
    const int ny = grid_.ny;
    const double h = grid_.dy;
    GridFunction r(f.size());
    r[0] = h * (f[0] / 3.0 + f[1] / 6.0);
    for (int j = 1; j < ny; ++j) r[j] = h * (f[j - 1] / 6.0 + 2.0 * f[j] / 3.0 + f[j + 1] / 6.0);
    r[ny] = h * (f[ny - 1] / 6.0 + f[ny] / 3.0);
    return r;
  }

  /// K f on interior rows; endpoints of f must be zero, endpoints of the result are zero.
  GridFunction stiffness_apply(std::span<const double> f) const {
    require_nodes(grid_, f, "stiffness_apply");
    const int ny = grid_.ny;
    GridFunction r(f.size(), 0.0);
    for (int j = 1; j < ny; ++j) r[j] = (-f[j - 1] + 2.0 * f[j] - f[j + 1]) / grid_.dy;
    return r;
  }

  /// Solves K x = rhs on interior rows; endpoint entries of rhs are ignored.
  GridFunction stiffness_solve(std::span<const double> rhs) const {
    require_nodes(grid_, rhs, "stiffness_solve");
    const double o = -1.0 / grid_.dy;
    std::vector<double> z(n_);
    for (int i = 0; i < n_; ++i) z[i] = (rhs[i + 1] - (i > 0 ? o * z[i - 1] : 0.0)) / denom_[i];
    for (int i = n_ - 2; i >= 0; --i) z[i] -= cprime_[i] * z[i + 1];
    GridFunction x(grid_.nodes(), 0.0);
    for (int i = 0; i < n_; ++i) x[i + 1] = z[i];
    return x;
  }

  /// (f, g)_{L2} = f^T M g.
  double l2_inner(std::span<const double> f, std::span<const double> g) const {
    const GridFunction mg = mass_apply(g);
    double s = 0.0;
    for (std::size_t j = 0; j < f.size(); ++j) s += f[j] * mg[j];
    return s;
  }

  /// <g, h>_{H^-1 x H^1_0} = g^T M h, with h vanishing at both ends.
  double dual_pairing(std::span<const double> g, std::span<const double> h) const {
    require_zero_ends(h, "dual_pairing");
    return l2_inner(g, h);
  }

  /// r = K^{-1} (M g), so that <g, h> = r^T K h for every h in H^1_0.
  GridFunction riesz(std::span<const double> g) const { return stiffness_solve(mass_apply(g)); }

  double norm(Space s, std::span<const double> f) const { return std::sqrt(norm_squared(s, f)); }

  double norm_squared(Space s, std::span<const double> f) const {
    require_nodes(grid_, f, "norm");
    switch (s) {
      case Space::L2:
        return std::max(0.0, l2_inner(f, f));
      case Space::H10: {
        require_zero_ends(f, "H10 norm");
        const GridFunction kf = stiffness_apply(f);
        double v = 0.0;
        for (std::size_t j = 0; j < f.size(); ++j) v += f[j] * kf[j];
        return std::max(0.0, v);
      }
      case Space::Hm1: {
        GridFunction mf = mass_apply(f);
        mf.front() = mf.back() = 0.0;
        const GridFunction r = stiffness_solve(mf);
        double v = 0.0;
        for (std::size_t j = 0; j < f.size(); ++j) v += mf[j] * r[j];
        return std::max(0.0, v);
      }
    }
    return 0.0;
  }

  /// Dense copies for oracles and tests.
  std::vector<std::vector<double>> mass_dense() const {
    const int n = grid_.ny + 1;
    std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
    for (int j = 0; j < n; ++j) {
      m[j][j] = grid_.dy * ((j == 0 || j == n - 1) ? 1.0 / 3.0 : 2.0 / 3.0);
      if (j > 0) m[j][j - 1] = grid_.dy / 6.0;
      if (j + 1 < n) m[j][j + 1] = grid_.dy / 6.0;
    }
    return m;
  }
  std::vector<std::vector<double>> stiffness_dense() const {
    std::vector<std::vector<double>> k(n_, std::vector<double>(n_, 0.0));
    for (int i = 0; i < n_; ++i) {
      k[i][i] = 2.0 / grid_.dy;
      if (i > 0) k[i][i - 1] = -1.0 / grid_.dy;
      if (i + 1 < n_) k[i][i + 1] = -1.0 / grid_.dy;
    }
    return k;
  }

  static void require_zero_ends(std::span<const double> f, const char* what) {
    if (f.front() != 0.0 || f.back() != 0.0)
      throw ContractError(std::string(what) + ": function must vanish at y = 0 and y = 1");
  }

private:
  GridSpec grid_;
  int n_;
  std::vector<double> cprime_;
  std::vector<double> denom_;
};

inline SpatialMetric build_metric(const GridSpec& g) { return SpatialMetric(g); }

}  // namespace stackwave
