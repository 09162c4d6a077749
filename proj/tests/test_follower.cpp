#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "stackwave/cli.hpp"

using namespace stackwave;

namespace {

Field constant_field(const GridSpec& g, double c) {
  Field f(g);
  for (double& v : f.data()) v = c;
  return f;
}

ControlTrace random_on(const Follower& f, Segment s, std::mt19937_64& rng) {
  return cli::random_trace(f, s, rng);
}

double trace_dist(const Follower& f, const ControlTrace& a, const ControlTrace& b) {
  ControlTrace d = b;
  d *= -1.0;
  d += a;
  return f.sigma2_norm(d);
}

struct Problem {
  GridSpec g;
  MovingDomain d;
  BoundaryPartition part;
  Field v2;
  Problem(int ny, double T, double k, PartitionMode mode = PartitionMode::Overlap, unsigned seed = 7)
      : g(GridSpec::from_cfl(ny, T)), d(k, T), part(build_partition(mode, g, 0.5 * T)) {
    std::mt19937_64 rng(seed);
    v2 = cli::random_smooth_field(g, rng);
  }
  Follower follower(double sigma, bool zero_target = false) const {
    return Follower(g, d, part, sigma, zero_target ? Field(g) : v2);
  }
};

}  // namespace

TEST(EvalJ2, ZeroEverything) {
  const Problem s(20, 1.0, 0.2);
  const Follower f = s.follower(1.0, true);
  EXPECT_EQ(f.eval_J2(f.zero_leader(), f.zero_follower()), 0.0);
}

TEST(EvalJ2, UnitTargetQuadrature) {
  for (double k : {0.0, 0.2}) {
    const GridSpec g = GridSpec::from_cfl(50, 1.0);
    const Follower f(g, MovingDomain(k, 1.0), build_partition(PartitionMode::Overlap, g), 1.0, constant_field(g, 1.0));
    const double expected = k == 0.0 ? 0.5 : 0.55;
    EXPECT_NEAR(f.eval_J2(f.zero_leader(), f.zero_follower()), expected, 1e-3) << "k " << k;
  }
}

TEST(EvalJ2, MaskViolationRejected) {
  const Problem s(20, 2.0, 0.2, PartitionMode::Split);
  const Follower f = s.follower(1.0);
  ControlTrace w2 = f.zero_follower();
  w2.values[0] = 1.0;  // level 0 belongs to Sigma1 under the split
  EXPECT_THROW(f.eval_J2(f.zero_leader(), w2), ContractError);
  EXPECT_THROW(f.eval_J2(f.zero_follower(), f.zero_follower()), ContractError);
}

TEST(Follower, RejectsNonPositiveSigma) {
  const Problem s(10, 1.0, 0.2);
  EXPECT_THROW(s.follower(0.0), ConfigError);
  EXPECT_THROW(Follower(s.g, s.d, s.part, 1.0, Field(GridSpec::from_cfl(12, 1.0))), ShapeError);
}

TEST(Gradient, ZeroAtTheOrigin) {
  const Problem s(20, 1.5, 0.2);
  const Follower f = s.follower(1.0, true);
  const ControlTrace g = f.grad_J2_w2(f.zero_leader(), f.zero_follower());
  for (double v : g.values) EXPECT_EQ(v, 0.0);
}

TEST(Gradient, MatchesCentralDifferences) {
  for (PartitionMode mode : {PartitionMode::Overlap, PartitionMode::Split}) {
    const Problem s(40, 2.0, 0.2, mode);
    const Follower f = s.follower(1.0);
    std::mt19937_64 rng(17);
    const ControlTrace w1 = random_on(f, Segment::Sigma1, rng);
    const ControlTrace w2 = random_on(f, Segment::Sigma2, rng);
    const ControlTrace grad = f.grad_J2_w2(w1, w2);
    for (int i = 0; i < 5; ++i) {
      const ControlTrace dir = random_on(f, Segment::Sigma2, rng);
      const double an = trace_inner(s.g, s.part, Segment::Sigma2, grad.values, dir.values);
      const double fd = oracle::fd_directional(
          [&](double h) {
            ControlTrace w = dir;
            w *= h;
            w += w2;
            return f.eval_J2(w1, w);
          },
          1e-4);
      EXPECT_LE(std::abs(an - fd), 1e-5 * std::abs(fd)) << "direction " << i;
    }
  }
}

TEST(Gradient, MatchesDenseAssemblyOnTinyGrid) {
  const GridSpec g = GridSpec::with_steps(6, 10, 1.0);
  const MovingDomain d(0.2, 1.0);
  const BoundaryPartition part = build_partition(PartitionMode::Overlap, g);
  std::mt19937_64 rng(4);
  const Field v2 = cli::random_smooth_field(g, rng);
  const Follower f(g, d, part, 1.0, v2);
  const oracle::DenseSystem sys(g, d);
  const oracle::DenseFollower df(sys, part, 1.0, v2);
  const ControlTrace w1 = random_on(f, Segment::Sigma1, rng), w2 = random_on(f, Segment::Sigma2, rng);
  const ControlTrace a = f.grad_J2_w2(w1, w2), b = df.gradient(w1, w2);
  for (std::size_t n = 0; n < a.size(); ++n) EXPECT_NEAR(a.values[n], b.values[n], 1e-10) << n;
  EXPECT_NEAR(f.eval_J2(w1, w2), df.J2(w1, w2), 1e-12);
}

TEST(BestResponse, ZeroDataGivesZero) {
  const Problem s(20, 2.0, 0.2);
  const Follower f = s.follower(1.0, true);
  const NashSolution sol = f.best_response(f.zero_leader());
  for (double v : sol.w2.values) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(f.eval_J2(f.zero_leader(), sol.w2), 0.0);
}

TEST(BestResponse, MatchesDenseOracleOnTinyGrid) {
  const cli::TinyScenario tiny;
  const Follower f(tiny.grid, tiny.domain, tiny.partition, tiny.sigma, tiny.v2());
  FollowerOptions opt;
  opt.tol = 1e-12;
  const NashSolution sol = f.best_response(tiny.w1(), opt);
  const oracle::DenseSystem sys(tiny.grid, tiny.domain);
  const ControlTrace ref = oracle::dense_best_response_oracle(sys, tiny.partition, tiny.sigma, tiny.v2(), tiny.w1());
  EXPECT_LE(trace_dist(f, sol.w2, ref), 1e-8);

  const auto table = fixtures::read_csv(fixtures::data("tiny_best_response.csv"));
  ASSERT_EQ(table.rows.size(), tiny.grid.levels());
  for (std::size_t n = 0; n < table.rows.size(); ++n) EXPECT_NEAR(sol.w2.values[n], table.num(n, "w2"), 1e-8) << n;
}

TEST(BestResponse, SplitPartitionMatchesDenseOracle) {
  const GridSpec g = GridSpec::with_steps(6, 20, 2.0);
  const MovingDomain d(0.2, 2.0);
  const BoundaryPartition part = build_partition(PartitionMode::Split, g, 0.9);
  std::mt19937_64 rng(12);
  const Field v2 = cli::random_smooth_field(g, rng);
  const Follower f(g, d, part, 2.0, v2);
  const ControlTrace w1 = random_on(f, Segment::Sigma1, rng);
  FollowerOptions opt;
  opt.tol = 1e-12;
  const NashSolution sol = f.best_response(w1, opt);
  const ControlTrace ref = oracle::dense_best_response_oracle(oracle::DenseSystem(g, d), part, 2.0, v2, w1);
  EXPECT_LE(trace_dist(f, sol.w2, ref), 1e-8);
  for (int n = 0; n <= g.nt; ++n)
    if (!part.mask2[n]) EXPECT_EQ(sol.w2.values[n], 0.0);
}

TEST(BestResponse, StationarityAtConvergence) {
  const Problem s(50, 3.0, 0.2);
  const Follower f = s.follower(1.0);
  std::mt19937_64 rng(3);
  FollowerOptions opt;
  opt.tol = 1e-10;
  const ControlTrace w1 = random_on(f, Segment::Sigma1, rng);
  const NashSolution sol = f.best_response(w1, opt);
  const ControlTrace r = f.gradient_from(sol.w2, sol.p);
  EXPECT_LE(f.sigma2_norm(r), opt.tol * std::max(1.0, sol.stats.grad0_norm));
  EXPECT_LE(f.sigma2_norm(r) / f.sigma2_norm(sol.w2), 1e-6);
  EXPECT_GT(sol.stats.iterations, 0);
}

TEST(BestResponse, LargeSigmaShrinksControl) {
  const Problem s(30, 2.0, 0.2);
  std::mt19937_64 rng(5);
  const Follower f1 = s.follower(1.0), fbig = s.follower(1e6);
  const ControlTrace w1 = random_on(f1, Segment::Sigma1, rng);
  const double n1 = f1.sigma2_norm(f1.best_response(w1).w2);
  const double nbig = fbig.sigma2_norm(fbig.best_response(w1).w2);
  EXPECT_GT(n1, 0.0);
  EXPECT_LE(nbig, 1e-3 * n1);
}

TEST(BestResponse, IndependentOfStartingPoint) {
  const Problem s(30, 2.0, 0.2);
  const Follower f = s.follower(1.0);
  std::mt19937_64 rng(6);
  FollowerOptions opt;
  const ControlTrace w1 = random_on(f, Segment::Sigma1, rng);
  const ControlTrace start = random_on(f, Segment::Sigma2, rng);
  const NashSolution a = f.best_response(w1, opt);
  const NashSolution b = f.best_response(w1, opt, &start);
  EXPECT_LE(trace_dist(f, a.w2, b.w2), 10.0 * opt.tol * std::max(1.0, f.sigma2_norm(a.w2)));
}

TEST(BestResponse, SuperpositionInLeaderAndTarget) {
  const Problem s(30, 2.0, 0.2);
  const Follower full = s.follower(1.0), homog = s.follower(1.0, true);
  std::mt19937_64 rng(10);
  FollowerOptions opt;
  opt.tol = 1e-10;
  const ControlTrace w1 = random_on(full, Segment::Sigma1, rng);
  const Field both = full.best_response(w1, opt).v;
  Field parts = full.best_response(full.zero_leader(), opt).v;
  parts += homog.best_response(w1, opt).v;
  parts -= both;
  EXPECT_LE(parts.max_abs(), 10.0 * opt.tol * std::max(1.0, both.max_abs()));
}

TEST(BestResponse, NonConvergenceCarriesHistory) {
  const Problem s(30, 2.0, 0.2);
  const Follower f = s.follower(1.0);
  FollowerOptions opt;
  opt.max_iter = 1;
  opt.tol = 1e-14;
  try {
    f.best_response(f.zero_leader(), opt);
    FAIL() << "expected NonConvergence";
  } catch (const NonConvergence& e) {
    EXPECT_GE(e.history().size(), 2u);
  }
}

TEST(NashGap, ConvergedSolveIsAMinimum) {
  const Problem s(40, 2.0, 0.2);
  const Follower f = s.follower(1.0);
  std::mt19937_64 rng(13);
  const ControlTrace w1 = random_on(f, Segment::Sigma1, rng);
  FollowerOptions opt;
  opt.tol = 1e-10;
  const NashSolution sol = f.best_response(w1, opt);
  for (double mag : {0.01, 0.1}) {
    const NashGapReport r = f.nash_gap_check(w1, sol.w2, 20, mag, rng);
    EXPECT_TRUE(r.ok) << mag;
    EXPECT_GE(r.min_gap, -1e-10);
    EXPECT_EQ(r.trials, 20);
  }
  const NashGapReport z = f.nash_gap_check(w1, sol.w2, 5, 0.0, rng);
  EXPECT_EQ(z.min_gap, 0.0);
}

TEST(NashGap, PerturbationOffSigma2Rejected) {
  const Problem s(20, 2.0, 0.2, PartitionMode::Split);
  const Follower f = s.follower(1.0);
  ControlTrace bad = f.zero_leader();
  bad.values[1] = 0.1;
  EXPECT_THROW(f.nash_gap_check(f.zero_leader(), f.zero_follower(), {bad}, 0.1), ContractError);
}
