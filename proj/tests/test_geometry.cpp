#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "stackwave/geometry.hpp"

using namespace stackwave;

TEST(Alpha, AffineInTime) {
  EXPECT_DOUBLE_EQ(MovingDomain(0.2, 4.0).alpha(2.5), 1.5);
  EXPECT_DOUBLE_EQ(MovingDomain(0.1, 4.0).alpha(1.0), 1.1);
  for (double k : {0.0, 0.13, 0.37, 0.9}) {
    const MovingDomain d(k, 3.0);
    EXPECT_EQ(d.alpha(0.0), 1.0);
    for (double t1 : {0.0, 0.4, 1.7})
      for (double t2 : {0.9, 2.2, 3.0})
        EXPECT_NEAR(d.alpha(0.5 * (t1 + t2)), 0.5 * (d.alpha(t1) + d.alpha(t2)), 1e-15);
  }
}

TEST(Alpha, RejectsTimeOutsideHorizon) {
  const MovingDomain d(0.2, 4.0);
  EXPECT_THROW(d.alpha(-0.1), DomainError);
  EXPECT_THROW(d.alpha(4.5), DomainError);
  EXPECT_NO_THROW(d.alpha(4.0));
}

TEST(MovingDomainCtor, RejectsBadParameters) {
  EXPECT_THROW(MovingDomain(-0.1, 1.0), ConfigError);
  EXPECT_THROW(MovingDomain(1.0, 1.0), ConfigError);
  EXPECT_THROW(MovingDomain(0.2, 0.0), ConfigError);
  EXPECT_TRUE(MovingDomain(0.0, 1.0).cylinder());
}

TEST(Coefficients, ClosedForms) {
  for (double y : {0.0, 0.3, 1.0}) {
    const auto c = MovingDomain(0.0, 2.0).coefficients(y, 1.3);
    EXPECT_EQ(c.beta, 1.0);
    EXPECT_EQ(c.gamma, 0.0);
  }
  const auto a = MovingDomain(0.2, 4.0).coefficients(1.0, 0.0);
  EXPECT_NEAR(a.beta, 0.96, 1e-15);
  EXPECT_NEAR(a.gamma, -0.4, 1e-15);
  const auto b = MovingDomain(0.3, 4.0).coefficients(0.5, 1.0);
  EXPECT_NEAR(b.beta, 0.9775 / 1.3, 1e-15);
  EXPECT_NEAR(b.beta, 0.7519230769230769, 1e-15);
  EXPECT_NEAR(b.gamma, -0.3, 1e-15);
  EXPECT_THROW(MovingDomain(0.3, 4.0).coefficients(1.2, 1.0), DomainError);
  EXPECT_THROW(MovingDomain(0.3, 4.0).coefficients(0.5, 5.0), DomainError);
}

TEST(Coefficients, EffectiveSpeedBounded) {
  for (double k : {0.0, 0.2, 0.39, 0.7, 0.99}) {
    const MovingDomain d(k, 5.0);
    for (int i = 0; i <= 50; ++i)
      for (int n = 0; n <= 50; ++n) {
        const double y = i / 50.0, t = 5.0 * n / 50.0;
        const auto c = d.coefficients(y, t);
        EXPECT_GT(c.beta, 0.0);
        EXPECT_LE(c.beta / d.alpha(t), 1.0);
      }
  }
}

TEST(Controllability, SpeedBound) {
  EXPECT_NEAR(speed_bound(), 0.3934693402873666, 1e-15);
  EXPECT_TRUE(validate_controllability_params(MovingDomain(0.3, 4.0)).speed_ok);
  const auto bad = validate_controllability_params(MovingDomain(0.5, 4.0));
  EXPECT_FALSE(bad.speed_ok);
  EXPECT_NE(bad.message.find("1 - 1/sqrt(e)"), std::string::npos);
  EXPECT_FALSE(validate_controllability_params(MovingDomain(speed_bound(), 4.0)).speed_ok);
  EXPECT_FALSE(validate_controllability_params(MovingDomain(0.0, 4.0)).speed_ok);
}

TEST(Controllability, ShortHorizonOnlyWarns) {
  const auto r = validate_controllability_params(MovingDomain(0.2, 1.5));
  EXPECT_TRUE(r.speed_ok);
  EXPECT_TRUE(r.horizon_warning);
  EXPECT_FALSE(validate_controllability_params(MovingDomain(0.2, 4.0)).horizon_warning);
}

TEST(Pullback, ZeroAndCylinder) {
  const GridSpec g = GridSpec::from_cfl(20, 1.0);
  const GridFunction z = zero_function(g);
  const auto a = pullback_initial(g, z, z, MovingDomain(0.3, 1.0));
  for (int j = 0; j <= g.ny; ++j) EXPECT_EQ(a.v0[j] + a.v1[j], 0.0);

  GridFunction u0(g.nodes()), u1(g.nodes());
  for (int j = 0; j <= g.ny; ++j) {
    u0[j] = std::sin(M_PI * g.y(j));
    u1[j] = g.y(j) * g.y(j);
  }
  const auto b = pullback_initial(g, u0, u1, MovingDomain(0.0, 1.0));
  EXPECT_EQ(b.v0, u0);
  EXPECT_EQ(b.v1, u1);
}

TEST(Pullback, MovingVelocityCorrectionIsSecondOrder) {
  double prev = 0.0;
  for (int ny : {20, 40, 80}) {
    const GridSpec g = GridSpec::from_cfl(ny, 1.0);
    GridFunction u0(g.nodes()), u1(g.nodes(), 0.0);
    for (int j = 0; j <= ny; ++j) u0[j] = std::sin(M_PI * g.y(j));
    const auto r = pullback_initial(g, u0, u1, MovingDomain(0.2, 1.0));
    double err = 0.0;
    for (int j = 0; j <= ny; ++j)
      err = std::max(err, std::abs(r.v1[j] - 0.2 * g.y(j) * M_PI * std::cos(M_PI * g.y(j))));
    EXPECT_LE(err, 10.0 * g.dy * g.dy);
    if (prev > 0.0) EXPECT_GT(std::log2(prev / err), 1.7);
    prev = err;
  }
}

TEST(Pullback, ShapeMismatch) {
  const GridSpec g = GridSpec::from_cfl(10, 1.0);
  GridFunction wrong(5, 0.0), ok = zero_function(g);
  EXPECT_THROW(pullback_initial(g, wrong, ok, MovingDomain(0.2, 1.0)), ShapeError);
}

TEST(Pushforward, RelabelsNodes) {
  const GridSpec g = GridSpec::from_cfl(8, 2.0);
  const MovingDomain d(0.25, 2.0);
  Field f(g);
  for (int n = 0; n <= g.nt; ++n)
    for (int j = 0; j <= g.ny; ++j) f(n, j) = 3.0;
  const auto s = pushforward_state(f, d);
  for (int n = 0; n <= g.nt; ++n) {
    EXPECT_NEAR(s.x[n].back(), d.alpha(g.t(n)), 1e-15);
    for (int j = 0; j <= g.ny; ++j) EXPECT_EQ(s.u[n][j], 3.0);
    EXPECT_EQ(sample_physical(f, d, n, 0.37 * d.alpha(g.t(n))), 3.0);
  }
  const auto z = pushforward_state(Field(g), d);
  for (const auto& row : z.u)
    for (double v : row) EXPECT_EQ(v, 0.0);
}

TEST(Pushforward, CylinderIsIdentity) {
  const GridSpec g = GridSpec::from_cfl(10, 1.0);
  const MovingDomain d(0.0, 1.0);
  Field f(g);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (double& v : f.data()) v = u(rng);
  const auto s = pushforward_state(f, d);
  for (int n = 0; n <= g.nt; ++n)
    for (int j = 0; j <= g.ny; ++j) {
      EXPECT_EQ(s.u[n][j], f(n, j));
      EXPECT_EQ(s.x[n][j], g.y(j));
    }
}

TEST(Pushforward, RoundTripsInitialData) {
  const GridSpec g = GridSpec::from_cfl(16, 1.0);
  const MovingDomain d(0.3, 1.0);
  GridFunction u0(g.nodes()), u1 = zero_function(g);
  for (int j = 0; j <= g.ny; ++j) u0[j] = g.y(j) * (1.0 - g.y(j));
  const auto init = pullback_initial(g, u0, u1, d);
  Field f(g);
  for (int j = 0; j <= g.ny; ++j) f(0, j) = init.v0[j];
  for (int j = 0; j <= g.ny; ++j) EXPECT_NEAR(sample_physical(f, d, 0, g.y(j)), u0[j], 1e-15);
}

TEST(Partition, OverlapAndSplit) {
  const GridSpec g = GridSpec::from_cfl(10, 4.0);
  const auto o = build_partition(PartitionMode::Overlap, g);
  for (std::size_t n = 0; n < g.levels(); ++n) EXPECT_TRUE(o.mask1[n] && o.mask2[n]);

  const auto s = build_partition(PartitionMode::Split, g, 2.0);
  for (int n = 0; n <= g.nt; ++n) {
    EXPECT_NE(s.mask1[n], s.mask2[n]);
    EXPECT_EQ(static_cast<bool>(s.mask1[n]), g.t(n) <= 2.0 + 1e-12);
  }
  EXPECT_TRUE(s.mask1[0]);
  EXPECT_TRUE(s.mask2[g.nt]);
  EXPECT_THROW(build_partition(PartitionMode::Split, g, 5.0), ConfigError);
  EXPECT_THROW(build_partition(PartitionMode::Split, g, 0.0), ConfigError);
}

TEST(Partition, BoundarySuperposesOnOverlap) {
  const GridSpec g = GridSpec::from_cfl(5, 1.0);
  const auto p = build_partition(PartitionMode::Overlap, g);
  ControlTrace a = p.zero_trace(Segment::Sigma1), b = p.zero_trace(Segment::Sigma2);
  for (std::size_t n = 0; n < a.size(); ++n) {
    a.values[n] = n;
    b.values[n] = 0.5;
  }
  const auto bd = p.boundary(a, b);
  for (std::size_t n = 0; n < bd.size(); ++n) EXPECT_EQ(bd[n], n + 0.5);
}
