#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "stackwave/errors.hpp"
#include "stackwave/geometry.hpp"
#include "stackwave/grid.hpp"
#include "stackwave/leader.hpp"

// Brute-force references. Nothing here calls the time-stepping solver, the
// follower CG or the leader's FISTA; they are rebuilt from the scheme's
// defining equations with dense linear algebra.
namespace stackwave::oracle {

/// Method of images for v_tt = v_yy on (0,1), v(0,t) = w(t), v(1,t) = 0, zero initial data.
inline double dalembert_reference(const std::function<double(double)>& w, double y, double t, double T) {
  if (!(y >= 0.0 && y <= 1.0)) throw DomainError("dalembert_reference: y outside [0,1]");
  if (!(t >= 0.0 && t <= T)) throw DomainError("dalembert_reference: t outside [0,T]");
  auto wt = [&](double s) { return s < 0.0 ? 0.0 : w(s); };
  double v = 0.0;
  for (int n = 0; 2.0 * n <= t; ++n) v += wt(t - y - 2.0 * n) - wt(t + y - 2.0 * (n + 1));
  return v;
}

/// Component-wise central differences of F at x.
inline std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& F,
                                       const std::vector<double>& x, double h) {
  if (!(h > 0.0)) throw ContractError("fd_gradient needs h > 0");
  std::vector<double> g(x.size()), xp = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    const double fp = F(xp);
    xp[i] = x[i] - h;
    const double fm = F(xp);
    xp[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Central difference of s -> F(x + s d) at s = 0.
inline double fd_directional(const std::function<double(double)>& F_of_s, double h) {
  return (F_of_s(h) - F_of_s(-h)) / (2.0 * h);
}

struct DenseAdjoint {
  Field p;
  std::vector<double> boundary_functional;
};

/// The whole space-time scheme as one linear system G v = inputs on a tiny grid.
class DenseSystem {
public:
  static constexpr int max_ny = 8;
  static constexpr int max_nt = 20;

  DenseSystem(const GridSpec& g, const MovingDomain& d) : g_(g), d_(d) {
    if (g.ny > max_ny || g.nt > max_nt)
      throw ContractError("DenseSystem refuses grids beyond ny = 8, nt = 20 (got ny = " +
                          std::to_string(g.ny) + ", nt = " + std::to_string(g.nt) + ")");
    nn_ = g.ny + 1;
    N_ = static_cast<int>(g.levels()) * nn_;
    assemble();
    lu_.compute(G_);
    Sb_ = lu_.solve(Bb_);
    mass_ = Eigen::MatrixXd::Zero(nn_, nn_);
    for (int j = 0; j < nn_; ++j) {
      mass_(j, j) = g.dy * ((j == 0 || j == g.ny) ? 1.0 / 3.0 : 2.0 / 3.0);
      if (j > 0) mass_(j, j - 1) = mass_(j - 1, j) = g.dy / 6.0;
    }
    stiff_ = Eigen::MatrixXd::Zero(g.ny - 1, g.ny - 1);
    for (int i = 0; i < g.ny - 1; ++i) {
      stiff_(i, i) = 2.0 / g.dy;
      if (i > 0) stiff_(i, i - 1) = stiff_(i - 1, i) = -1.0 / g.dy;
    }
    tau_ = Eigen::VectorXd(g.levels());
    for (int n = 0; n <= g.nt; ++n) tau_(n) = (n == 0 || n == g.nt) ? 0.5 * g.dt : g.dt;
    Q_ = Eigen::MatrixXd::Zero(N_, N_);
    for (int n = 0; n <= g.nt; ++n)
      Q_.block(n * nn_, n * nn_, nn_, nn_) = tau_(n) * (1.0 + d.k() * n * g.dt) * mass_;
  }

  const GridSpec& grid() const noexcept { return g_; }
  const MovingDomain& domain() const noexcept { return d_; }
  int size() const noexcept { return N_; }
  int index(int n, int j) const noexcept { return n * nn_ + j; }

  const Eigen::MatrixXd& matrix() const noexcept { return G_; }
  /// State response to unit Dirichlet data at each time level.
  const Eigen::MatrixXd& boundary_response() const noexcept { return Sb_; }
  /// Full-node P1 mass matrix.
  const Eigen::MatrixXd& mass() const noexcept { return mass_; }
  /// Interior Dirichlet stiffness matrix.
  const Eigen::MatrixXd& stiffness() const noexcept { return stiff_; }
  const Eigen::VectorXd& time_weights() const noexcept { return tau_; }
  /// blockdiag(tau_n alpha_n M): space-time tracking quadrature.
  const Eigen::MatrixXd& tracking_weight() const noexcept { return Q_; }

  Eigen::VectorXd solve(const std::vector<double>& b, const Field* source = nullptr,
                        const InitialData* init = nullptr) const {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(N_);
    for (int n = 0; n <= g_.nt; ++n) rhs(index(n, 0)) = b[n];
    const double dt = g_.dt, dy = g_.dy;
    for (int j = 1; j < g_.ny; ++j) {
      if (init) {
        rhs(index(0, j)) = init->v0[j];
        rhs(index(1, j)) += dt * init->v1[j] -
                            0.5 * dt * dt * mix(0, j) * (init->v1[j + 1] - init->v1[j - 1]) / (2.0 * dy);
      }
      if (source) {
        rhs(index(1, j)) += 0.5 * dt * dt * (*source)(0, j);
        for (int n = 1; n < g_.nt; ++n) rhs(index(n + 1, j)) += dt * dt * (*source)(n, j);
      }
    }
    return lu_.solve(rhs);
  }

  Field to_field(const Eigen::VectorXd& v) const {
    Field f(g_);
    for (int n = 0; n <= g_.nt; ++n)
      for (int j = 0; j < nn_; ++j) f(n, j) = v(index(n, j));
    return f;
  }
  Eigen::VectorXd from_field(const Field& f) const {
    Eigen::VectorXd v(N_);
    for (int n = 0; n <= g_.nt; ++n)
      for (int j = 0; j < nn_; ++j) v(index(n, j)) = f(n, j);
    return v;
  }

  /// Gradient of v -> seed^T v with respect to every equation of the system.
  /// The adjoint field is read off the rows producing each level from the next one.
  DenseAdjoint adjoint(const Eigen::VectorXd& seed, const GridFunction* pT = nullptr) const {
    const Eigen::VectorXd lam = lu_.transpose().solve(seed);
    DenseAdjoint out{Field(g_), std::vector<double>(g_.levels())};
    for (int n = 0; n <= g_.nt; ++n) out.boundary_functional[n] = lam(index(n, 0));
    for (int n = 0; n < g_.nt; ++n)
      for (int j = 1; j < g_.ny; ++j) out.p(n, j) = g_.dt / g_.dy * lam(index(n + 1, j));
    if (pT)
      for (int j = 1; j < g_.ny; ++j) out.p(g_.nt, j) = (*pT)[j];
    return out;
  }

  /// Seed of v -> <pT, v'(T)> - (pT', v(T)) with v'(T) the backward difference and
  /// the endpoint samples of v(T) dropped.
  Eigen::VectorXd terminal_seed(const GridFunction& pT, const GridFunction& pTprime) const {
    const Eigen::VectorXd mp = mass_ * Eigen::Map<const Eigen::VectorXd>(pT.data(), nn_);
    const Eigen::VectorXd mq = mass_ * Eigen::Map<const Eigen::VectorXd>(pTprime.data(), nn_);
    Eigen::VectorXd s = Eigen::VectorXd::Zero(N_);
    for (int j = 1; j < g_.ny; ++j) {
      s(index(g_.nt, j)) = mp(j) / g_.dt - mq(j);
      s(index(g_.nt - 1, j)) = -mp(j) / g_.dt;
    }
    return s;
  }

  TerminalState terminal(const Eigen::VectorXd& v) const {
    TerminalState ts{GridFunction(nn_, 0.0), GridFunction(nn_, 0.0)};
    for (int j = 1; j < g_.ny; ++j) {
      ts.vT[j] = v(index(g_.nt, j));
      ts.vTprime[j] = (v(index(g_.nt, j)) - v(index(g_.nt - 1, j))) / g_.dt;
    }
    return ts;
  }

private:
  double alpha(int n) const { return 1.0 + d_.k() * n * g_.dt; }
  double coef(int n, double y) const {
    const double a = alpha(n);
    return (1.0 - d_.k() * d_.k() * y * y) / (a * a);
  }
  double mix(int n, int j) const { return -2.0 * d_.k() * (j * g_.dy) / alpha(n); }

  // Adds -s * D-(a D+ v^n)_j into row r.
  void add_laplacian(int r, int n, int j, double s) {
    const double h2 = g_.dy * g_.dy;
    const double ap = coef(n, (j + 0.5) * g_.dy), am = coef(n, (j - 0.5) * g_.dy);
    G_(r, index(n, j + 1)) -= s * ap / h2;
    G_(r, index(n, j)) += s * (ap + am) / h2;
    G_(r, index(n, j - 1)) -= s * am / h2;
  }

  void assemble() {
    const int ny = g_.ny, nt = g_.nt;
    const double dt = g_.dt, dy = g_.dy;
    G_ = Eigen::MatrixXd::Zero(N_, N_);
    Bb_ = Eigen::MatrixXd::Zero(N_, nt + 1);
    for (int n = 0; n <= nt; ++n) {
      G_(index(n, 0), index(n, 0)) = 1.0;
      Bb_(index(n, 0), n) = 1.0;
      G_(index(n, ny), index(n, ny)) = 1.0;
    }
    for (int j = 1; j < ny; ++j) G_(index(0, j), index(0, j)) = 1.0;
    // v^1 - v^0 - dt^2/2 D-(a D+ v^0) = dt v1 - dt^2/2 c D0 v1 + dt^2/2 f^0
    for (int j = 1; j < ny; ++j) {
      const int r = index(1, j);
      G_(r, index(1, j)) += 1.0;
      G_(r, index(0, j)) -= 1.0;
      add_laplacian(r, 0, j, 0.5 * dt * dt);
    }
    // v^{n+1} - 2v^n + v^{n-1} - dt^2 D-(a D+ v^n) + dt^2 c D0[(v^n - v^{n-1})/dt] = dt^2 f^n
    for (int n = 1; n < nt; ++n) {
      for (int j = 1; j < ny; ++j) {
        const int r = index(n + 1, j);
        G_(r, index(n + 1, j)) += 1.0;
        G_(r, index(n, j)) -= 2.0;
        G_(r, index(n - 1, j)) += 1.0;
        add_laplacian(r, n, j, dt * dt);
        const double c = dt * dt * mix(n, j) / (2.0 * dy * dt);
        G_(r, index(n, j + 1)) += c;
        G_(r, index(n - 1, j + 1)) -= c;
        G_(r, index(n, j - 1)) -= c;
        G_(r, index(n - 1, j - 1)) += c;
      }
    }
  }

  GridSpec g_;
  MovingDomain d_;
  int nn_ = 0;
  int N_ = 0;
  Eigen::MatrixXd G_, Bb_, Sb_, mass_, stiff_, Q_;
  Eigen::VectorXd tau_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

/// Dense follower problem: J2 as an explicit quadratic in the boundary data.
class DenseFollower {
public:
  DenseFollower(const DenseSystem& sys, BoundaryPartition part, double sigma, const Field& v2)
      : sys_(sys), part_(std::move(part)), sigma_(sigma), v2_(sys.from_field(v2)) {
    const int L = static_cast<int>(sys.grid().levels());
    for (int n = 0; n < L; ++n) {
      if (part_.mask1[n]) idx1_.push_back(n);
      if (part_.mask2[n]) idx2_.push_back(n);
    }
    S2_ = columns(idx2_);
    W2_ = Eigen::VectorXd(idx2_.size());
    for (std::size_t i = 0; i < idx2_.size(); ++i) W2_(i) = sys.time_weights()(idx2_[i]);
    normal_ = S2_.transpose() * sys.tracking_weight() * S2_;
    normal_.diagonal() += sigma_ * W2_;
    llt_.compute(normal_);
    if (llt_.info() != Eigen::Success) throw ContractError("dense follower normal matrix is not SPD");
  }

  const DenseSystem& system() const noexcept { return sys_; }
  const BoundaryPartition& partition() const noexcept { return part_; }
  double sigma() const noexcept { return sigma_; }
  const std::vector<int>& sigma1_levels() const noexcept { return idx1_; }
  const std::vector<int>& sigma2_levels() const noexcept { return idx2_; }

  Eigen::VectorXd state(const ControlTrace& w1, const ControlTrace& w2) const {
    return sys_.boundary_response() * Eigen::Map<const Eigen::VectorXd>(boundary(w1, w2).data(), w1.size());
  }

  double J2(const ControlTrace& w1, const ControlTrace& w2, bool track = true) const {
    Eigen::VectorXd e = state(w1, w2);
    if (track) e -= v2_;
    double c = 0.0;
    for (int n : idx2_) c += sys_.time_weights()(n) * w2.values[n] * w2.values[n];
    return 0.5 * e.dot(sys_.tracking_weight() * e) + 0.5 * sigma_ * c;
  }

  /// L2(Sigma2) representative of dJ2/dw2.
  ControlTrace gradient(const ControlTrace& w1, const ControlTrace& w2) const {
    const Eigen::VectorXd e = state(w1, w2) - v2_;
    const Eigen::VectorXd ge = S2_.transpose() * (sys_.tracking_weight() * e);
    ControlTrace out = part_.zero_trace(Segment::Sigma2);
    for (std::size_t i = 0; i < idx2_.size(); ++i) {
      const int n = idx2_[i];
      out.values[n] = ge(i) / sys_.time_weights()(n) + sigma_ * w2.values[n];
    }
    return out;
  }

  /// Minimizer of J2(w1, .) from the normal equations, by Cholesky.
  ControlTrace best_response(const ControlTrace& w1, bool track = true) const {
    ControlTrace zero2 = part_.zero_trace(Segment::Sigma2);
    Eigen::VectorXd e = state(w1, zero2);
    if (track) e -= v2_;
    const Eigen::VectorXd x = llt_.solve(-(S2_.transpose() * (sys_.tracking_weight() * e)));
    for (std::size_t i = 0; i < idx2_.size(); ++i) zero2.values[idx2_[i]] = x(i);
    return zero2;
  }

  /// Adjoint of the tracking residual of state v: seed -Q (v - v2).
  DenseAdjoint tracking_adjoint(const Eigen::VectorXd& v) const {
    return sys_.adjoint(-(sys_.tracking_weight() * (v - v2_)));
  }

  /// Matrix of w1 -> (g'(T) + delta g(T), -g(T)), rows [a0 nodes; a1 nodes], one column per level.
  Eigen::MatrixXd A_matrix(double delta) const {
    const GridSpec& g = sys_.grid();
    const int nn = g.ny + 1;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2 * nn, g.levels());
    for (int n : idx1_) {
      ControlTrace w1 = part_.zero_trace(Segment::Sigma1);
      w1.values[n] = 1.0;
      const TerminalState ts = sys_.terminal(state(w1, best_response(w1, false)));
      for (int j = 0; j < nn; ++j) {
        A(j, n) = ts.vTprime[j] + delta * ts.vT[j];
        A(nn + j, n) = -ts.vT[j];
      }
    }
    return A;
  }

  /// A* f from <A w, f> = (w, A* f)_{L2(Sigma1)} with the dense A.
  ControlTrace Astar_transpose(const Eigen::MatrixXd& A, const DualPoint& f) const {
    const int nn = sys_.grid().ny + 1;
    Eigen::VectorXd mf(2 * nn);
    mf.head(nn) = sys_.mass() * Eigen::Map<const Eigen::VectorXd>(f.f0.data(), nn);
    mf.tail(nn) = sys_.mass() * Eigen::Map<const Eigen::VectorXd>(f.f1.data(), nn);
    const Eigen::VectorXd r = A.transpose() * mf;
    ControlTrace out = part_.zero_trace(Segment::Sigma1);
    for (int n : idx1_) out.values[n] = r(n) / sys_.time_weights()(n);
    return out;
  }

private:
  std::vector<double> boundary(const ControlTrace& w1, const ControlTrace& w2) const {
    std::vector<double> b(w1.size(), 0.0);
    for (int n : idx1_) b[n] += w1.values[n];
    for (int n : idx2_) b[n] += w2.values[n];
    return b;
  }
  Eigen::MatrixXd columns(const std::vector<int>& idx) const {
    Eigen::MatrixXd S(sys_.size(), idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) S.col(i) = sys_.boundary_response().col(idx[i]);
    return S;
  }

  const DenseSystem& sys_;
  BoundaryPartition part_;
  double sigma_;
  Eigen::VectorXd v2_;
  std::vector<int> idx1_, idx2_;
  Eigen::MatrixXd S2_, normal_;
  Eigen::VectorXd W2_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

inline ControlTrace dense_best_response_oracle(const DenseSystem& sys, const BoundaryPartition& part,
                                               double sigma, const Field& v2, const ControlTrace& w1) {
  return DenseFollower(sys, part, sigma, v2).best_response(w1);
}

/// The leader's dual as an explicit finite-dimensional problem in the interior
/// coefficients x = (f0_int, f1_int):  1/2 x^T H x + c^T x + rho1 |f0|_K + rho0 |f1|_M.
class DenseDual {
public:
  DenseDual(const DenseFollower& fol, const LeaderProblem& pr) : fol_(fol), pr_(pr) {
    const DenseSystem& sys = fol.system();
    const GridSpec& g = sys.grid();
    m_ = g.ny - 1;
    const int nn = g.ny + 1;
    A_ = fol.A_matrix(pr.delta);
    // B maps x to A* f on every level.
    B_ = Eigen::MatrixXd::Zero(g.levels(), 2 * m_);
    for (int i = 0; i < 2 * m_; ++i) {
      DualPoint f = DualPoint::zero(g);
      (i < m_ ? f.f0 : f.f1)[1 + i % m_] = 1.0;
      const ControlTrace u = fol.Astar_transpose(A_, f);
      for (std::size_t n = 0; n < u.size(); ++n) B_(n, i) = u.values[n];
    }
    Eigen::VectorXd w = Eigen::VectorXd::Zero(g.levels());
    for (int n : fol.sigma1_levels()) w(n) = sys.time_weights()(n);
    H_ = B_.transpose() * w.asDiagonal() * B_;
    Mint_ = sys.mass().block(1, 1, m_, m_);
    P_ = Eigen::MatrixXd::Zero(2 * m_, 2 * m_);
    P_.topLeftCorner(m_, m_) = sys.stiffness();
    P_.bottomRightCorner(m_, m_) = Mint_;

    const ControlTrace zero1 = fol.partition().zero_trace(Segment::Sigma1);
    free_ = sys.terminal(fol.state(zero1, fol.best_response(zero1)));
    Eigen::VectorXd d0(nn), d1(nn);
    for (int j = 0; j < nn; ++j) {
      d0(j) = pr.v0_target[j] - free_.vT[j];
      d1(j) = pr.v1_target[j] - free_.vTprime[j];
    }
    d0(0) = d0(nn - 1) = d1(0) = d1(nn - 1) = 0.0;
    const Eigen::VectorXd md0 = sys.mass() * d0, md1 = sys.mass() * d1;
    c_ = Eigen::VectorXd(2 * m_);
    c_.head(m_) = -md1.segment(1, m_);
    c_.tail(m_) = md0.segment(1, m_);
  }

  const Eigen::MatrixXd& A() const noexcept { return A_; }
  const Eigen::MatrixXd& hessian() const noexcept { return H_; }
  const TerminalState& free_terminal() const noexcept { return free_; }

  Eigen::VectorXd pack(const DualPoint& f) const {
    Eigen::VectorXd x(2 * m_);
    for (int i = 0; i < m_; ++i) {
      x(i) = f.f0[i + 1];
      x(m_ + i) = f.f1[i + 1];
    }
    return x;
  }
  DualPoint unpack(const Eigen::VectorXd& x) const {
    DualPoint f = DualPoint::zero(fol_.system().grid());
    for (int i = 0; i < m_; ++i) {
      f.f0[i + 1] = x(i);
      f.f1[i + 1] = x(m_ + i);
    }
    return f;
  }

  double norm0(const Eigen::VectorXd& x) const {
    const auto s = x.head(m_);
    return std::sqrt(std::max(0.0, s.dot(P_.topLeftCorner(m_, m_) * s)));
  }
  double norm1(const Eigen::VectorXd& x) const {
    const auto s = x.tail(m_);
    return std::sqrt(std::max(0.0, s.dot(Mint_ * s)));
  }

  double objective(const Eigen::VectorXd& x) const {
    return 0.5 * x.dot(H_ * x) + c_.dot(x) + pr_.rho1 * norm0(x) + pr_.rho0 * norm1(x);
  }
  double objective(const DualPoint& f) const { return objective(pack(f)); }

  /// Accelerated proximal gradient in dense arithmetic with the exact Lipschitz constant.
  DualPoint solve(double tol = 1e-13, int max_iter = 200000) const {
    if (pr_.delta != 0.0) throw ConfigError("dense dual requires delta = 0", "leader.delta");
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(H_, P_, Eigen::EigenvaluesOnly);
    const double L = std::max(1e-300, es.eigenvalues().maxCoeff());
    Eigen::LLT<Eigen::MatrixXd> pl(P_);
    auto prox = [&](Eigen::VectorXd x, double tau) {
      const double n0 = norm0(x), n1 = norm1(x);
      x.head(m_) *= n0 > 0.0 ? std::max(0.0, 1.0 - tau * pr_.rho1 / n0) : 0.0;
      x.tail(m_) *= n1 > 0.0 ? std::max(0.0, 1.0 - tau * pr_.rho0 / n1) : 0.0;
      return x;
    };
    Eigen::VectorXd x = Eigen::VectorXd::Zero(2 * m_), y = x, xp = x;
    double Fx = objective(x), t = 1.0;
    for (int it = 0; it < max_iter; ++it) {
      const Eigen::VectorXd z = prox(y - pl.solve(H_ * y + c_) / L, 1.0 / L);
      const Eigen::VectorXd dz = z - y;
      if (L * std::sqrt(dz.dot(P_ * dz)) <= tol) {
        x = z;
        break;
      }
      const double Fz = objective(z);
      const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      if (Fz <= Fx + 1e-15 * std::max(1.0, std::abs(Fx))) {
        xp = x;
        x = z;
        Fx = Fz;
        y = x + ((t - 1.0) / tn) * (x - xp);
        t = tn;
      } else {
        y = x;
        t = 1.0;
      }
    }
    return unpack(x);
  }

private:
  const DenseFollower& fol_;
  LeaderProblem pr_;
  int m_ = 0;
  Eigen::MatrixXd A_, B_, H_, P_, Mint_;
  Eigen::VectorXd c_;
  TerminalState free_;
};

/// Quadruple (phi, psi, v, p) for a given f, from one dense solve of the Sigma2 coupling.
struct DenseKKT {
  Field phi, psi, v, p;
  ControlTrace w1, w2;
};

inline DenseKKT dense_kkt(const DenseFollower& fol, const DualPoint& f, double delta = 0.0) {
  const DenseSystem& sys = fol.system();
  const GridSpec& g = sys.grid();
  const auto& idx2 = fol.sigma2_levels();
  GridFunction pT(g.nodes(), 0.0), pTp(g.nodes(), 0.0);
  for (int j = 1; j < g.ny; ++j) {
    pT[j] = -f.f0[j];
    pTp[j] = -(f.f1[j] - delta * f.f0[j]);
  }
  const Eigen::VectorXd sT = sys.terminal_seed(pT, pTp);
  const Eigen::MatrixXd& S = sys.boundary_response();
  const Eigen::MatrixXd& Q = sys.tracking_weight();
  const Eigen::VectorXd& tau = sys.time_weights();

  // sigma tau z + S2^T Q S2 z = S2^T sT, with z the psi trace on Sigma2.
  Eigen::MatrixXd S2(sys.size(), idx2.size());
  for (std::size_t i = 0; i < idx2.size(); ++i) S2.col(i) = S.col(idx2[i]);
  Eigen::MatrixXd K = S2.transpose() * Q * S2;
  for (std::size_t i = 0; i < idx2.size(); ++i) K(i, i) += fol.sigma() * tau(idx2[i]);
  const Eigen::VectorXd z = K.ldlt().solve(S2.transpose() * sT);

  const Eigen::VectorXd psi = S2 * z;
  const DenseAdjoint phi = sys.adjoint(sT - Q * psi, &pT);

  DenseKKT out;
  out.phi = phi.p;
  out.psi = sys.to_field(psi);
  out.w1 = fol.partition().zero_trace(Segment::Sigma1);
  for (int n : fol.sigma1_levels()) out.w1.values[n] = -phi.boundary_functional[n] / tau(n);
  out.w2 = fol.best_response(out.w1);
  const Eigen::VectorXd v = fol.state(out.w1, out.w2);
  out.v = sys.to_field(v);
  out.p = fol.tracking_adjoint(v).p;
  return out;
}

}  // namespace stackwave::oracle
