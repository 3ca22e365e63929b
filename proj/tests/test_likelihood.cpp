#include "laghawkes/likelihood.hpp"

#include "laghawkes/core.hpp"
#include "laghawkes/simulate.hpp"

#include "doctest.h"
#include "support/oracles.hpp"

#include <cmath>

using namespace laghawkes;

namespace {

ModelParams single_pair_params(double a, double beta, double delta, double mu) {
  ModelParams p;
  p.mu = Vec::Constant(1, mu);
  p.A = Mat::Constant(1, 1, a);
  p.B = Mat::Constant(1, 1, beta);
  p.D = Mat::Constant(1, 1, delta);
  return p;
}

}  // namespace

TEST_CASE("intensity_at: empty history, pre-activation, post-activation") {
  const auto p = single_pair_params(0.8, 1.0, 0.3, 0.5);
  const EventSequence empty({}, 10.0, 1);
  CHECK(intensity_at(p, empty, 0, 3.0) == doctest::Approx(0.5).epsilon(1e-15));

  const EventSequence seq({{1.0, 0}}, 10.0, 1);
  // Before the activation instant t1 + delta = 1.3 only the base rate shows.
  CHECK(intensity_at(p, seq, 0, 1.2) == doctest::Approx(0.5).epsilon(1e-15));
  // After it: mu + a e^{-beta (t - t1 - delta)} with the oracle value.
  const double expected = 0.5 + 0.8 * std::exp(-0.7);
  CHECK(expected == doctest::Approx(0.8972682430331276).epsilon(1e-12));
  CHECK(intensity_at(p, seq, 0, 2.0) == doctest::Approx(expected).epsilon(1e-12));

  CHECK_THROWS_AS(intensity_at(p, seq, 0, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(intensity_at(p, seq, 0, 10.5), std::invalid_argument);
}

TEST_CASE("intensity_at is left-continuous at activation instants") {
  const auto p = single_pair_params(0.8, 1.0, 0.5, 0.5);
  const EventSequence seq({{1.0, 0}, {1.5, 0}}, 10.0, 1);
  // The event at 1.5 sits exactly on the activation of the event at 1.0;
  // the just-activated contribution is excluded there.
  CHECK(intensity_at(p, seq, 0, 1.5) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(intensity_at(p, seq, 0, 1.5 + 1e-9) > 0.5 + 0.79);
}

TEST_CASE("intensity never falls below the base-rate floor") {
  oracle::CounterRng rng(17);
  const auto g = CausalGraph::full(2);
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = oracle::random_params(2, g, rng);
    const auto seq = oracle::random_sequence(2, 15, 10.0, rng);
    for (double t = 0.0; t <= 10.0; t += 0.37)
      for (int u = 0; u < 2; ++u) CHECK(intensity_at(p, seq, u, t) >= kMuFloor);
  }
}

TEST_CASE("compensator closed form against hand values and quadrature") {
  const auto p = single_pair_params(0.8, 1.0, 0.3, 0.5);
  const EventSequence empty({}, 10.0, 1);
  CHECK(compensator(p, empty, 0, 2.0) == doctest::Approx(1.0).epsilon(1e-15));

  const EventSequence seq({{1.0, 0}}, 10.0, 1);
  // mu t + (a/beta)(1 - e^{-beta (t - t1 - delta)}).
  const double expected = 1.0 + 0.8 * (1.0 - std::exp(-0.7));
  CHECK(expected == doctest::Approx(1.4027317569668724).epsilon(1e-12));
  CHECK(compensator(p, seq, 0, 2.0) == doctest::Approx(expected).epsilon(1e-12));

  // Cross-check by quadrature of the intensity.
  const double quad = oracle::integrate_piecewise(
      [&](double t) { return oracle::naive_intensity(p, seq.events(), 0, t); }, 2.0,
      oracle::naive_breakpoints(p, seq.events(), 0));
  CHECK(std::abs(compensator(p, seq, 0, 2.0) - quad) <= 1e-8);

  // Activation past t_end contributes nothing.
  const auto late = single_pair_params(0.8, 1.0, 5.0, 0.5);
  CHECK(compensator(late, seq, 0, 2.0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("compensator is continuous and non-decreasing in t_end") {
  oracle::CounterRng rng(23);
  const auto g = CausalGraph::full(2);
  const auto p = oracle::random_params(2, g, rng);
  const auto seq = oracle::random_sequence(2, 20, 10.0, rng);
  for (int u = 0; u < 2; ++u) {
    double prev = 0.0;
    double prev_t = 0.0;
    for (double t = 0.0; t <= 10.0; t += 0.01) {
      const double c = compensator(p, seq, u, t);
      CHECK(c >= prev - 1e-12);
      // Lipschitz bound: the increment is at most max-intensity * dt.
      CHECK(c - prev <= (t - prev_t) * 50.0 + 1e-12);
      prev = c;
      prev_t = t;
    }
  }
}

TEST_CASE("log_likelihood hand examples") {
  SUBCASE("empty sequence, two dimensions") {
    ModelParams p;
    p.mu = Vec::Constant(2, 0.5);
    p.A = Mat::Zero(2, 2);
    p.B = Mat::Constant(2, 2, 1.0);
    p.D = Mat::Zero(2, 2);
    const std::vector<EventSequence> seqs{EventSequence({}, 10.0, 2)};
    const auto lb = log_likelihood(p, seqs);
    CHECK(lb.total == doctest::Approx(-10.0).epsilon(1e-12));
    CHECK(lb.event_term == 0.0);
    CHECK(lb.compensator == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(lb.per_dim.sum() == doctest::Approx(lb.total).epsilon(1e-12));
  }
  SUBCASE("single Poisson event") {
    const auto p = single_pair_params(0.0, 1.0, 0.0, 0.5);
    const std::vector<EventSequence> seqs{EventSequence({{1.0, 0}}, 2.0, 1)};
    const double expected = std::log(0.5) - 1.0;
    CHECK(expected == doctest::Approx(-1.6931471805599453).epsilon(1e-15));
    CHECK(log_likelihood(p, seqs).total == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("log_likelihood agrees with the quadrature oracle on random instances") {
  oracle::CounterRng rng(31);
  const auto g = CausalGraph::full(2);
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = oracle::random_params(2, g, rng);
    const auto seq = oracle::random_sequence(2, 20, 8.0, rng);
    const double naive = oracle::naive_log_likelihood(p, seq, 1e-10);
    const double ours = log_likelihood(p, {seq}).total;
    CHECK(std::abs(naive - ours) <= 1e-5);
  }
}

TEST_CASE("direct and recursive evaluation paths agree to 1e-10") {
  oracle::CounterRng rng(37);
  const auto g = CausalGraph::full(3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = oracle::random_params(3, g, rng);
    const auto seq = oracle::random_sequence(3, 60, 15.0, rng);
    const auto direct = log_likelihood(p, {seq}, EvalMode::Direct);
    const auto recursive = log_likelihood(p, {seq}, EvalMode::Recursive);
    CHECK(std::abs(direct.total - recursive.total) <= 1e-10 * std::max(1.0, std::abs(direct.total)));
    CHECK(std::abs(direct.event_term - recursive.event_term) <= 1e-9);
  }
}

TEST_CASE("gradient: Poisson closed form d ell / d mu = N/mu - T") {
  ModelParams p;
  p.mu = Vec::Constant(2, 0.4);
  p.A = Mat::Zero(2, 2);
  p.B = Mat::Constant(2, 2, 1.0);
  p.D = Mat::Zero(2, 2);
  oracle::CounterRng rng(41);
  std::vector<EventSequence> seqs;
  double total_t = 0.0;
  Vec counts = Vec::Zero(2);
  for (int i = 0; i < 5; ++i) {
    seqs.push_back(oracle::random_sequence(2, 12, 6.0, rng));
    total_t += 6.0;
    for (const auto& e : seqs.back().events()) counts[e.u] += 1.0;
  }
  const auto grad = grad_log_likelihood(p, seqs);
  for (int u = 0; u < 2; ++u)
    CHECK(grad.mu[u] == doctest::Approx(counts[u] / 0.4 - total_t).epsilon(1e-12));
  CHECK(grad.A.isZero(0.0));
  CHECK(grad.D.isZero(0.0));
}

TEST_CASE("gradient matches central finite differences on guarded random instances") {
  oracle::CounterRng rng(43);
  CausalGraph g = CausalGraph::full(2);
  g.adjacency(1, 0) = false;  // one masked pair to check the mask contract
  int done = 0;
  while (done < 12) {
    auto p = oracle::random_params(2, g, rng);
    p = apply_mask(p, g);
    const auto seq = oracle::random_sequence(2, 14, 8.0, rng);
    if (oracle::delta_boundary_margin(p, {seq}) < 1e-3) continue;  // kink too close for FD
    const std::vector<EventSequence> seqs{seq};
    const auto grad = grad_log_likelihood(p, seqs);

    const auto check_coord = [&](auto setter, double value, double analytic) {
      const double h = 1e-5 * std::max(1.0, std::abs(value));
      const double fd = oracle::central_diff(
          [&](double x) {
            ModelParams q = p;
            setter(q, x);
            return log_likelihood(q, seqs).total;
          },
          value, h);
      CHECK(oracle::rel_err(analytic, fd) <= 1e-5);
    };

    for (int u = 0; u < 2; ++u)
      check_coord([u](ModelParams& q, double x) { q.mu[u] = x; }, p.mu[u], grad.mu[u]);
    for (int u = 0; u < 2; ++u)
      for (int v = 0; v < 2; ++v) {
        if (!g.allowed(u, v)) {
          CHECK(grad.A(u, v) == 0.0);
          CHECK(grad.B(u, v) == 0.0);
          CHECK(grad.D(u, v) == 0.0);
          continue;
        }
        check_coord([u, v](ModelParams& q, double x) { q.A(u, v) = x; }, p.A(u, v), grad.A(u, v));
        check_coord([u, v](ModelParams& q, double x) { q.B(u, v) = x; }, p.B(u, v), grad.B(u, v));
        check_coord([u, v](ModelParams& q, double x) { q.D(u, v) = x; }, p.D(u, v), grad.D(u, v));
      }
    ++done;
  }
}

TEST_CASE("event exactly on a foreign activation instant: perturb once, then error") {
  // t2 = t1 + delta exactly; the gradient nudges delta by 1e-12 and succeeds.
  const auto p = single_pair_params(0.8, 1.0, 0.5, 0.5);
  const EventSequence one_hit({{1.0, 0}, {1.5, 0}}, 10.0, 1);
  CHECK_NOTHROW(grad_log_likelihood(p, {one_hit}));

  // Two events straddling the perturbation: still coincident afterwards.
  const EventSequence double_hit({{1.0, 0}, {1.5, 0}, {1.5 + 1e-12, 0}}, 10.0, 1);
  CHECK_THROWS_AS(grad_log_likelihood(p, {double_hit}), NumericError);
}

TEST_CASE("likelihood at the true parameters beats 20%-perturbed parameters") {
  // Identifiability echo: simulate a batch at known parameters and compare.
  ModelParams truth;
  truth.mu = Vec::Constant(2, 0.3);
  truth.A = (Mat(2, 2) << 0.4, 0.2, 0.25, 0.35).finished();
  truth.B = Mat::Constant(2, 2, 1.2);
  truth.D = (Mat(2, 2) << 0.6, 1.1, 0.9, 0.4).finished();
  const auto graph = CausalGraph::full(2);

  std::vector<EventSequence> seqs;
  for (int i = 0; i < 2000; ++i)
    seqs.push_back(simulate(truth, graph, SimConfig{20.0, 1000 + static_cast<std::uint64_t>(i), 100000}));

  const double at_truth = log_likelihood(truth, seqs, EvalMode::Recursive).total;
  oracle::CounterRng rng(47);
  int wins = 0;
  for (int trial = 0; trial < 100; ++trial) {
    ModelParams perturbed = truth;
    const auto bump = [&](double x) {
      const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
      return x * (1.0 + sign * (0.2 + 0.2 * rng.uniform()));
    };
    for (int u = 0; u < 2; ++u) perturbed.mu[u] = std::max(kMuFloor, bump(truth.mu[u]));
    for (int u = 0; u < 2; ++u)
      for (int v = 0; v < 2; ++v) {
        perturbed.A(u, v) = bump(truth.A(u, v));
        perturbed.B(u, v) = bump(truth.B(u, v));
        perturbed.D(u, v) = bump(truth.D(u, v));
      }
    if (at_truth >= log_likelihood(perturbed, seqs, EvalMode::Recursive).total) ++wins;
  }
  CHECK(wins >= 95);
}

TEST_CASE("time-rescaling: compensator increments are Exp(1) at the true parameters") {
  ModelParams truth;
  truth.mu = Vec::Constant(2, 0.4);
  truth.A = (Mat(2, 2) << 0.5, 0.2, 0.3, 0.4).finished();
  truth.B = Mat::Constant(2, 2, 1.3);
  truth.D = (Mat(2, 2) << 0.8, 1.4, 0.5, 1.0).finished();
  const auto graph = CausalGraph::full(2);

  // Long horizons: dropping the censored final interval biases pooled gaps
  // by about 1/(rate * T), which must stay well under the KS resolution.
  std::vector<double> increments;
  for (int i = 0; increments.size() < 12000; ++i) {
    const auto seq =
        simulate(truth, graph, SimConfig{600.0, 777 + static_cast<std::uint64_t>(i), 100000});
    for (int u = 0; u < 2; ++u) {
      const auto times = seq.times_of(u);
      double prev = 0.0;
      for (double t : times) {
        const double lam = compensator(truth, seq, u, t);
        increments.push_back(lam - prev);
        prev = lam;
      }
    }
  }
  CHECK(oracle::ks_pass_exp1(increments));
}

TEST_CASE("time-rescaled likelihood is invariant: ell(c-scaled) = ell - N ln c") {
  oracle::CounterRng rng(53);
  const auto g = CausalGraph::full(2);
  const double c = 2.0;
  for (int trial = 0; trial < 8; ++trial) {
    const auto p = oracle::random_params(2, g, rng);
    const auto seq = oracle::random_sequence(2, 20, 10.0, rng);

    ModelParams scaled = p;
    scaled.mu /= c;
    scaled.A /= c;
    scaled.B /= c;
    scaled.D *= c;
    std::vector<Event> scaled_events;
    for (const auto& e : seq.events()) scaled_events.push_back(Event{e.t * c, e.u});
    const EventSequence scaled_seq(std::move(scaled_events), seq.horizon() * c, 2);

    const double ell = log_likelihood(p, {seq}).total;
    const double ell_scaled = log_likelihood(scaled, {scaled_seq}).total;
    const double n = static_cast<double>(seq.size());
    CHECK(ell_scaled == doctest::Approx(ell - n * std::log(c)).epsilon(1e-10));
  }
}
