#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "stackwave/cli.hpp"
#include "stackwave/wavesolver.hpp"

using namespace stackwave;

namespace {

std::vector<double> sampled(const GridSpec& g, const std::function<double(double)>& w) {
  std::vector<double> b(g.levels());
  for (int n = 0; n <= g.nt; ++n) b[n] = w(g.t(n));
  return b;
}

/// Direct leapfrog for p_tt - p_yy = s backward from p(T) = p'(T) = 0 on the cylinder.
Field backward_leapfrog(const GridSpec& g, const Field& s) {
  Field p(g);
  const double r = g.dt * g.dt / (g.dy * g.dy);
  const int N = g.nt;
  for (int j = 1; j < g.ny; ++j) p(N - 1, j) = 0.5 * g.dt * g.dt * s(N, j);
  for (int n = N - 1; n >= 1; --n)
    for (int j = 1; j < g.ny; ++j)
      p(n - 1, j) = 2.0 * p(n, j) - p(n + 1, j) + r * (p(n, j + 1) - 2.0 * p(n, j) + p(n, j - 1)) +
                    g.dt * g.dt * s(n, j);
  return p;
}

double smooth_bump(double t, double T) { return std::pow(std::sin(M_PI * t / T), 3); }

}  // namespace

TEST(Forward, ZeroDataGivesZeroField) {
  const GridSpec g = GridSpec::from_cfl(20, 1.0);
  const Field v = solve_forward(g, MovingDomain(0.2, 1.0), std::vector<double>(g.levels(), 0.0));
  EXPECT_EQ(v.max_abs(), 0.0);
}

TEST(Forward, DirichletRowsHonoured) {
  const GridSpec g = GridSpec::from_cfl(20, 2.0);
  const auto b = sampled(g, [](double t) { return t * t - t; });
  const Field v = solve_forward(g, MovingDomain(0.2, 2.0), b);
  for (int n = 0; n <= g.nt; ++n) {
    EXPECT_EQ(v(n, 0), b[n]);
    EXPECT_EQ(v(n, g.ny), 0.0);
  }
}

TEST(Forward, SineControlMatchesDalembert) {
  const GridSpec g = GridSpec::from_cfl(100, 0.75);
  const Field v = solve_forward(g, MovingDomain(0.0, 0.75), sampled(g, [](double t) { return std::sin(M_PI * t); }));
  const double y = 0.25, t = 0.5;
  const int j = 25;
  const int n = static_cast<int>(t / g.dt);
  const double w = (t - g.t(n)) / g.dt;
  EXPECT_NEAR((1.0 - w) * v(n, j) + w * v(n + 1, j), std::sqrt(0.5), 1e-3);
  EXPECT_NEAR(oracle::dalembert_reference([](double s) { return std::sin(M_PI * s); }, y, t, 0.75), std::sqrt(0.5), 1e-15);
}

TEST(Forward, GoldenDalembertPointsOnSmoothInterior) {
  const auto table = fixtures::read_csv(fixtures::data("dalembert.csv"));
  auto sine = [](double t) { return std::sin(M_PI * t); };
  auto pulse = [](double t) { return t < 0.1 ? std::sin(M_PI * t / 0.1) : 0.0; };
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const bool is_sine = table.str(r, "control") == "sine";
    const double y = table.num(r, "y"), t = table.num(r, "t"), T = table.num(r, "T");
    const double ref = is_sine ? oracle::dalembert_reference(sine, y, t, T) : oracle::dalembert_reference(pulse, y, t, T);
    EXPECT_NEAR(ref, table.num(r, "value"), 1e-14) << "row " << r;
  }
}

TEST(Forward, StandingWaveSecondOrder) {
  const auto s = cli::standing_wave_order(0.75, {50, 100, 200});
  for (double o : s.order) {
    EXPECT_GE(o, 1.7);
    EXPECT_LE(o, 2.3);
  }
  EXPECT_LE(s.error[1], 5e-3);
}

TEST(Forward, SmoothBoundaryDataCylinderOrder) {
  const double T = 1.5;
  std::vector<double> err;
  const auto w = [T](double t) { return smooth_bump(t, T); };
  for (int ny : {40, 80, 160}) {
    const GridSpec g = GridSpec::from_cfl(ny, T);
    const Field v = solve_forward(g, MovingDomain(0.0, T), sampled(g, w));
    double e = 0.0;
    for (int j = 0; j <= ny; ++j) e = std::max(e, std::abs(v(g.nt, j) - oracle::dalembert_reference(w, g.y(j), T, T)));
    err.push_back(e);
  }
  EXPECT_GT(std::log2(err[0] / err[1]), 1.7);
  EXPECT_GT(std::log2(err[1] / err[2]), 1.7);
}

TEST(Forward, MovingDomainSelfConvergence) {
  EXPECT_GE(cli::moving_self_order(0.2, 2.0, 40), 0.9);
}

TEST(Forward, Linearity) {
  const GridSpec g = GridSpec::from_cfl(30, 2.0);
  const WaveSolver s(g, MovingDomain(0.2, 2.0));
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  std::vector<double> b1(g.levels()), b2(g.levels()), b12(g.levels());
  Field s1(g), s2(g);
  for (std::size_t n = 0; n < b1.size(); ++n) {
    b1[n] = nd(rng);
    b2[n] = nd(rng);
    b12[n] = b1[n] + b2[n];
  }
  for (double& x : s1.data()) x = nd(rng);
  for (double& x : s2.data()) x = nd(rng);
  const Field s12 = s1 + s2;
  Field d = s.forward(b12, &s12);
  d -= s.forward(b1, &s1);
  d -= s.forward(b2, &s2);
  EXPECT_LE(d.max_abs(), 1e-12 * s.forward(b12, &s12).max_abs());
}

TEST(Forward, CylinderEnergyBounded) {
  const double T = 4.0;
  const GridSpec g = GridSpec::from_cfl(100, T);
  InitialData init{zero_function(g), zero_function(g)};
  for (int j = 1; j < g.ny; ++j) init.v0[j] = std::sin(M_PI * g.y(j)) + 0.3 * std::sin(3 * M_PI * g.y(j));
  const Field v = solve_forward(g, MovingDomain(0.0, T), std::vector<double>(g.levels(), 0.0), nullptr, &init);
  const SpatialMetric m(g);
  auto energy = [&](int n) {
    GridFunction vel(g.nodes()), mid(g.nodes());
    for (int j = 0; j <= g.ny; ++j) {
      vel[j] = (v(n + 1, j) - v(n, j)) / g.dt;
      mid[j] = 0.5 * (v(n + 1, j) + v(n, j));
    }
    return 0.5 * m.norm_squared(Space::L2, vel) + 0.5 * m.norm_squared(Space::H10, mid);
  };
  const double e0 = energy(0);
  for (int n = 1; n < g.nt; ++n) EXPECT_NEAR(energy(n), e0, 0.01 * e0) << "level " << n;
}

TEST(Forward, CflViolationRejected) {
  GridSpec g = GridSpec::from_cfl(10, 1.0);
  g.nt = 5;
  g.dt = g.T / g.nt;
  EXPECT_THROW(WaveSolver(g, MovingDomain(0.2, 1.0)), ConfigError);
  EXPECT_THROW(GridSpec::with_steps(10, 5, 1.0), ConfigError);
}

TEST(Forward, InstabilityDetected) {
  const GridSpec g = GridSpec::from_cfl(10, 20.0);
  std::vector<double> b(g.levels(), 1e300);
  EXPECT_THROW(solve_forward(g, MovingDomain(0.0, 20.0), b), InstabilityError);
}

TEST(Forward, ShapeMismatchRejected) {
  const GridSpec g = GridSpec::from_cfl(10, 1.0);
  EXPECT_THROW(solve_forward(g, MovingDomain(0.0, 1.0), std::vector<double>(3, 0.0)), ShapeError);
}

TEST(Backward, ZeroSourceGivesZero) {
  const GridSpec g = GridSpec::from_cfl(20, 1.0);
  const AdjointField p = solve_backward_transpose(g, MovingDomain(0.2, 1.0), Field(g));
  EXPECT_EQ(p.p.max_abs(), 0.0);
  for (double x : p.boundary_functional) EXPECT_EQ(x, 0.0);
}

TEST(Backward, GridMismatchRejected) {
  const GridSpec g = GridSpec::from_cfl(20, 1.0), h = GridSpec::from_cfl(10, 1.0);
  const WaveSolver s(g, MovingDomain(0.2, 1.0));
  EXPECT_THROW(s.backward(Field(h)), ContractError);
  EXPECT_THROW(s.transpose(Field(h)), ContractError);
}

TEST(Backward, DualityIdentityRandomPairs) {
  std::mt19937_64 rng(2024);
  const GridSpec g = GridSpec::from_cfl(100, 1.0);
  const WaveSolver s(g, MovingDomain(0.2, 1.0));
  EXPECT_LE(cli::transpose_duality_error(s, 5, rng), 1e-11);
}

TEST(Backward, TerminalDataDuality) {
  // <pT, v'(T)> - (pT', v(T)) = sum tau b flux for zero source.
  const GridSpec g = GridSpec::from_cfl(40, 2.0);
  const WaveSolver s(g, MovingDomain(0.25, 2.0));
  const SpatialMetric m(g);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  TerminalData td{zero_function(g), zero_function(g)};
  for (int j = 1; j < g.ny; ++j) {
    td.pT[j] = nd(rng);
    td.pTprime[j] = nd(rng);
  }
  std::vector<double> b(g.levels());
  for (double& x : b) x = nd(rng);
  const Field v = s.forward(b);
  const TerminalState ts = terminal_state(v);
  const AdjointField p = s.backward(Field(g), &td);
  const auto fl = s.flux(p, FluxMethod::Transpose);
  const double lhs = m.l2_inner(td.pT, ts.vTprime) - m.l2_inner(td.pTprime, ts.vT);
  double rhs = 0.0;
  for (int n = 0; n <= g.nt; ++n) rhs += g.time_weight(n) * b[n] * fl[n];
  EXPECT_NEAR(lhs, rhs, 1e-11 * (std::abs(lhs) + 1.0));
  for (int j = 1; j < g.ny; ++j) EXPECT_EQ(p.p(g.nt, j), td.pT[j]);
}

TEST(Backward, MatchesIndependentLeapfrog) {
  const double T = 1.0;
  std::vector<double> err;
  for (int ny : {20, 40, 80}) {
    const GridSpec g = GridSpec::from_cfl(ny, T);
    Field src(g);
    for (int n = 0; n <= g.nt; ++n)
      for (int j = 1; j < ny; ++j) src(n, j) = std::sin(M_PI * g.y(j));
    const AdjointField lib = solve_backward_transpose(g, MovingDomain(0.0, T), src);
    const Field ref = backward_leapfrog(g, src);
    double e = 0.0, exact_err = 0.0;
    for (int n = 0; n < g.nt; ++n)
      for (int j = 0; j <= ny; ++j) {
        e = std::max(e, std::abs(lib.p(n, j) - ref(n, j)));
        const double exact = std::sin(M_PI * g.y(j)) * (1.0 - std::cos(M_PI * (T - g.t(n)))) / (M_PI * M_PI);
        exact_err = std::max(exact_err, std::abs(ref(n, j) - exact));
      }
    EXPECT_LE(e, 2.0 * g.dy * g.dy) << "ny " << ny;
    EXPECT_LE(exact_err, 2.0 * g.dy * g.dy) << "ny " << ny;
    err.push_back(e);
  }
  EXPECT_GT(err[0], 0.0);
}

TEST(Flux, ZeroAndPolynomialExactness) {
  const GridSpec g = GridSpec::from_cfl(10, 1.0);
  const WaveSolver s(g, MovingDomain(0.0, 1.0));
  for (double x : s.onesided_flux(Field(g))) EXPECT_EQ(x, 0.0);
  Field p(g);
  for (int n = 0; n <= g.nt; ++n)
    for (int j = 0; j <= g.ny; ++j) p(n, j) = (1.0 - g.y(j)) * g.t(n);
  const auto fl = s.onesided_flux(p);
  for (int n = 0; n <= g.nt; ++n) EXPECT_NEAR(fl[n], -g.t(n), 1e-13);
  const AdjointField adj{p, std::vector<double>(g.levels(), 0.0)};
  const ControlTrace tr = boundary_flux(s, adj, FluxMethod::OneSided);
  EXPECT_EQ(tr.values, fl);
}

TEST(Flux, TransposeApproachesOneSidedUnderRefinement) {
  const double T = 1.0;
  std::vector<double> gaps;
  for (int ny : {20, 40, 80, 160}) {
    const GridSpec g = GridSpec::from_cfl(ny, T);
    Field src(g);
    for (int n = 0; n <= g.nt; ++n)
      for (int j = 1; j < ny; ++j) src(n, j) = std::sin(M_PI * g.y(j)) * std::sin(M_PI * g.t(n));
    const WaveSolver s(g, MovingDomain(0.2, T));
    const AdjointField p = s.backward(src);
    const auto a = s.flux(p, FluxMethod::Transpose), b = s.flux(p, FluxMethod::OneSided);
    double gap = 0.0;
    for (int n = 1; n < g.nt - 1; ++n) gap = std::max(gap, std::abs(a[n] - b[n]));
    gaps.push_back(gap);
  }
  for (std::size_t i = 1; i < gaps.size(); ++i) EXPECT_GT(std::log2(gaps[i - 1] / gaps[i]), 0.9) << i;
}

TEST(Terminal, ZeroAndLinearInTime) {
  const GridSpec g = GridSpec::from_cfl(10, 2.0);
  const TerminalState z = terminal_state(Field(g));
  for (int j = 0; j <= g.ny; ++j) EXPECT_EQ(z.vT[j] + z.vTprime[j], 0.0);

  Field v(g);
  for (int n = 0; n <= g.nt; ++n)
    for (int j = 0; j <= g.ny; ++j) v(n, j) = g.t(n) * std::sin(M_PI * g.y(j));
  const TerminalState s = terminal_state(v);
  for (int j = 1; j < g.ny; ++j) {
    EXPECT_NEAR(s.vT[j], 2.0 * std::sin(M_PI * g.y(j)), 1e-14);
    EXPECT_NEAR(s.vTprime[j], std::sin(M_PI * g.y(j)), 1e-12);
  }
}

TEST(Terminal, StandingWaveVelocity) {
  const double T = 0.6;
  const GridSpec g = GridSpec::from_cfl(100, T);
  InitialData init{zero_function(g), zero_function(g)};
  for (int j = 1; j < g.ny; ++j) init.v0[j] = std::sin(M_PI * g.y(j));
  const Field v = solve_forward(g, MovingDomain(0.0, T), std::vector<double>(g.levels(), 0.0), nullptr, &init);
  const TerminalState s = terminal_state(v);
  for (int j = 1; j < g.ny; ++j)
    EXPECT_NEAR(s.vTprime[j], -M_PI * std::sin(M_PI * T) * std::sin(M_PI * g.y(j)), 5.0 * g.dt);
}
