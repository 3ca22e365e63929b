#include "laghawkes/core.hpp"

#include "doctest.h"
#include "support/oracles.hpp"

#include <cmath>

using namespace laghawkes;

TEST_CASE("kernel_value matches the delayed exponential closed form") {
  CHECK(kernel_value(0.8, 1.0, 0.3, 0.2) == 0.0);  // delay not elapsed
  CHECK(kernel_value(0.8, 1.0, 0.3, 0.3) == doctest::Approx(0.8).epsilon(1e-12));
  // Independent scalar-exp evaluation of 0.8 * e^{-0.7}.
  const double expected = 0.8 * std::exp(-0.7);
  CHECK(expected == doctest::Approx(0.3972682430331276).epsilon(1e-12));
  CHECK(kernel_value(0.8, 1.0, 0.3, 1.0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("kernel_value rejects bad inputs") {
  CHECK_THROWS_AS(kernel_value(0.8, 0.0, 0.3, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(kernel_value(0.8, -1.0, 0.3, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(kernel_value(std::nan(""), 1.0, 0.3, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(kernel_value(0.8, 1.0, 0.3, std::numeric_limits<double>::infinity()),
                  std::invalid_argument);
}

TEST_CASE("kernel_value is a pure right shift of the undelayed kernel") {
  CounterRng rng(7);
  for (int i = 0; i < 200; ++i) {
    const double a = rng.uniform();
    const double beta = 0.1 + 2.0 * rng.uniform();
    const double delta = 2.0 * rng.uniform();
    const double elapsed = 4.0 * rng.uniform();
    CHECK(kernel_value(a, beta, delta, elapsed) == kernel_value(a, beta, 0.0, elapsed - delta));
  }
}

TEST_CASE("kernel_value is nonnegative and strictly decreasing past the delay") {
  double prev = kernel_value(0.8, 1.3, 0.5, 0.5);
  for (double e = 0.6; e < 6.0; e += 0.1) {
    const double k = kernel_value(0.8, 1.3, 0.5, e);
    CHECK(k >= 0.0);
    CHECK(k < prev);
    prev = k;
  }
}

TEST_CASE("kernel_l1_norm equals a/beta and quadrature confirms it") {
  CHECK(kernel_l1_norm(0.0, 1.0) == 0.0);
  CHECK(kernel_l1_norm(0.5, 1.0) == doctest::Approx(0.5).epsilon(1e-15));

  // Quadrature oracle over [0, 100] for the delta = 0 kernel.
  const double integral = oracle::adaptive_simpson(
      [](double t) { return 0.8 * std::exp(-2.0 * t); }, 0.0, 100.0, 1e-12);
  CHECK(integral == doctest::Approx(0.4).epsilon(1e-9));
  CHECK(kernel_l1_norm(0.8, 2.0) == doctest::Approx(integral).epsilon(1e-9));

  CHECK_THROWS_AS(kernel_l1_norm(0.8, 0.0), std::invalid_argument);
}

TEST_CASE("kernel_l1_norm is independent of delta and matches quadrature for small beta") {
  CounterRng rng(11);
  for (int i = 0; i < 20; ++i) {
    const double a = 0.1 + rng.uniform();
    const double beta = 0.1 + 1.9 * rng.uniform();
    const double delta = 3.0 * rng.uniform();
    const double window = delta + 30.0 / beta;  // tail below 1e-12 relative
    const double quad = oracle::integrate_piecewise(
        [&](double t) { return kernel_value(a, beta, delta, t); }, window, {delta}, 1e-13);
    CHECK(std::abs(kernel_l1_norm(a, beta) - quad) <= 1e-8);
  }
}

TEST_CASE("apply_mask zeroes impacts and delays only where masked") {
  const int U = 3;
  ModelParams p;
  p.mu = Vec::Constant(U, 0.5);
  p.A = Mat::Constant(U, U, 0.4);
  p.B = Mat::Constant(U, U, 1.2);
  p.D = Mat::Constant(U, U, 0.7);

  SUBCASE("full mask leaves params unchanged") {
    const auto out = apply_mask(p, CausalGraph::full(U));
    CHECK(out.A == p.A);
    CHECK(out.D == p.D);
    CHECK(out.mu == p.mu);
  }
  SUBCASE("empty mask zeroes A and D, mu untouched") {
    const auto out = apply_mask(p, CausalGraph::none(U));
    CHECK(out.A.isZero(0.0));
    CHECK(out.D.isZero(0.0));
    CHECK(out.mu == p.mu);
    CHECK(out.B == p.B);
  }
  SUBCASE("single masked pair zeroes exactly that entry") {
    CausalGraph g = CausalGraph::full(U);
    g.adjacency(1, 2) = false;
    const auto out = apply_mask(p, g);
    for (int u = 0; u < U; ++u)
      for (int v = 0; v < U; ++v) {
        if (u == 1 && v == 2) {
          CHECK(out.A(u, v) == 0.0);
          CHECK(out.D(u, v) == 0.0);
        } else {
          CHECK(out.A(u, v) == p.A(u, v));
          CHECK(out.D(u, v) == p.D(u, v));
        }
      }
  }
  SUBCASE("idempotent on random masks") {
    CounterRng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
      CausalGraph g = CausalGraph::full(U);
      for (int u = 0; u < U; ++u)
        for (int v = 0; v < U; ++v) g.adjacency(u, v) = rng.uniform() < 0.5;
      const auto once = apply_mask(p, g);
      const auto twice = apply_mask(once, g);
      CHECK(once.A == twice.A);
      CHECK(once.D == twice.D);
    }
  }
  SUBCASE("dimension mismatch rejected") {
    CHECK_THROWS_AS(apply_mask(p, CausalGraph::full(U + 1)), std::invalid_argument);
  }
}

TEST_CASE("ModelParams validation enforces the invariants") {
  ModelParams p;
  p.mu = Vec::Constant(2, 0.5);
  p.A = Mat::Constant(2, 2, 0.3);
  p.B = Mat::Constant(2, 2, 1.0);
  p.D = Mat::Constant(2, 2, 0.5);
  CHECK_NOTHROW(p.validate());

  ModelParams bad = p;
  bad.mu[0] = 0.0;  // below the floor
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = p;
  bad.B(0, 1) = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = p;
  bad.A(1, 0) = -0.1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  CausalGraph g = CausalGraph::full(2);
  g.adjacency(0, 1) = false;
  CHECK_THROWS_AS(p.validate(&g), std::invalid_argument);  // masked pair has nonzero A
  const auto masked = apply_mask(p, g);
  CHECK_NOTHROW(masked.validate(&g));
}

TEST_CASE("EventSequence ingest rejects what the invariants forbid") {
  CHECK_NOTHROW(EventSequence({{0.5, 0}, {1.0, 1}}, 2.0, 2));

  // Duplicate timestamps, even across dimensions, are rejected.
  CHECK_THROWS_AS(EventSequence({{1.0, 0}, {1.0, 1}}, 2.0, 2), std::invalid_argument);
  // Out-of-horizon and out-of-range events.
  CHECK_THROWS_AS(EventSequence({{3.0, 0}}, 2.0, 2), std::invalid_argument);
  CHECK_THROWS_AS(EventSequence({{1.0, 2}}, 2.0, 2), std::invalid_argument);
  CHECK_THROWS_AS(EventSequence({{-0.5, 0}}, 2.0, 2), std::invalid_argument);
  CHECK_THROWS_AS(EventSequence({}, 0.0, 2), std::invalid_argument);

  // Unsorted input is sorted on ingest; per-dimension times end up strictly increasing.
  const EventSequence seq({{1.5, 0}, {0.5, 0}, {1.0, 1}}, 2.0, 2);
  const auto t0 = seq.times_of(0);
  REQUIRE(t0.size() == 2);
  CHECK(t0[0] < t0[1]);
  CHECK(seq.counts() == std::vector<int>{2, 1});
}
