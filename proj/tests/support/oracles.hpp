// Test-side oracles, independent of the library implementation paths they
// check: quadrature, finite differences, naive intensity sums, KS tests,
// and seeded random instances.
#pragma once

#include "laghawkes/rng.hpp"
#include "laghawkes/types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace oracle {

using laghawkes::CausalGraph;
using laghawkes::CounterRng;
using laghawkes::Event;
using laghawkes::EventSequence;
using laghawkes::Mat;
using laghawkes::ModelParams;
using laghawkes::Vec;

// --- quadrature -------------------------------------------------------------

inline double simpson(const std::function<double(double)>& f, double a, double b) {
  const double c = 0.5 * (a + b);
  return (b - a) / 6.0 * (f(a) + 4.0 * f(c) + f(b));
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol, int depth = 24) {
  const double c = 0.5 * (a + b);
  const double whole = simpson(f, a, b);
  const double left = simpson(f, a, c);
  const double right = simpson(f, c, b);
  if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return adaptive_simpson(f, a, c, tol / 2.0, depth - 1) +
         adaptive_simpson(f, c, b, tol / 2.0, depth - 1);
}

/// 7-point Gauss-Legendre on [a, b]; nodes are interior, so integrands that
/// jump exactly at a or b are integrated by their interior values.
inline double gauss7(const std::function<double(double)>& f, double a, double b) {
  static const double xs[7] = {0.0,
                               -0.4058451513773972, 0.4058451513773972,
                               -0.7415311855993945, 0.7415311855993945,
                               -0.9491079123427585, 0.9491079123427585};
  static const double ws[7] = {0.4179591836734694,
                               0.3818300505051189, 0.3818300505051189,
                               0.2797053914892766, 0.2797053914892766,
                               0.1294849661688697, 0.1294849661688697};
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double acc = 0.0;
  for (int i = 0; i < 7; ++i) acc += ws[i] * f(c + h * xs[i]);
  return acc * h;
}

/// Integrates f over [0, t_end] splitting at the given breakpoints (jump or
/// kink locations), composite Gauss-Legendre with step <= max_step between
/// them.
inline double integrate_piecewise(const std::function<double(double)>& f, double t_end,
                                  std::vector<double> breakpoints, double /*tol*/ = 1e-10,
                                  double max_step = 0.05) {
  breakpoints.push_back(0.0);
  breakpoints.push_back(t_end);
  std::sort(breakpoints.begin(), breakpoints.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
    const double a = std::clamp(breakpoints[i], 0.0, t_end);
    const double b = std::clamp(breakpoints[i + 1], 0.0, t_end);
    if (b - a <= 1e-14) continue;
    const int pieces = static_cast<int>(std::ceil((b - a) / max_step));
    for (int k = 0; k < pieces; ++k)
      total += gauss7(f, a + (b - a) * k / pieces, a + (b - a) * (k + 1) / pieces);
  }
  return total;
}

// --- naive delayed-Hawkes formulas (independent of the library) -------------

/// Intensity of dimension u at time t: plain loop over the raw event list.
inline double naive_intensity(const ModelParams& p, const std::vector<Event>& events, int u,
                              double t) {
  double lam = p.mu[u];
  for (const Event& e : events) {
    const double shifted = e.t + p.D(u, e.u);
    if (shifted < t) lam += p.A(u, e.u) * std::exp(-p.B(u, e.u) * (t - shifted));
  }
  return lam;
}

/// Activation instants affecting dimension u (kink locations of lambda_u).
inline std::vector<double> naive_breakpoints(const ModelParams& p,
                                             const std::vector<Event>& events, int u) {
  std::vector<double> out;
  for (const Event& e : events)
    if (p.A(u, e.u) > 0.0) out.push_back(e.t + p.D(u, e.u));
  return out;
}

/// Log-likelihood by quadrature of the naive intensity.
inline double naive_log_likelihood(const ModelParams& p, const EventSequence& seq, double tol) {
  double total = 0.0;
  const auto& events = seq.events();
  for (int u = 0; u < p.num_dims(); ++u) {
    for (const Event& e : events)
      if (e.u == u) total += std::log(naive_intensity(p, events, u, e.t));
    total -= integrate_piecewise([&](double t) { return naive_intensity(p, events, u, t); },
                                 seq.horizon(), naive_breakpoints(p, events, u), tol);
  }
  return total;
}

// --- finite differences ------------------------------------------------------

inline double central_diff(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// |a - b| relative to max(|a|, |b|, 1).
inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1.0});
}

// --- Kolmogorov-Smirnov -------------------------------------------------------

/// KS statistic of `samples` against the CDF `F`.
inline double ks_statistic(std::vector<double> samples, const std::function<double(double)>& F) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double cdf = F(samples[i]);
    d = std::max(d, std::abs((static_cast<double>(i) + 1.0) / n - cdf));
    d = std::max(d, std::abs(cdf - static_cast<double>(i) / n));
  }
  return d;
}

/// True when the KS test does NOT reject at significance 0.01
/// (asymptotic critical value sqrt(n) * D < 1.628).
inline bool ks_pass_exp1(const std::vector<double>& samples, double rate = 1.0) {
  const double d = ks_statistic(samples, [rate](double x) { return 1.0 - std::exp(-rate * x); });
  return std::sqrt(static_cast<double>(samples.size())) * d < 1.628;
}

// --- boundary margin for delta finite differences ----------------------------

/// Smallest distance from any activation instant s + delta_uv to any event
/// of dimension u or to the horizon. Finite differences in delta are only
/// trustworthy when the step stays inside this margin.
inline double delta_boundary_margin(const ModelParams& p,
                                    const std::vector<EventSequence>& seqs) {
  double margin = std::numeric_limits<double>::infinity();
  for (const auto& seq : seqs) {
    for (int u = 0; u < p.num_dims(); ++u) {
      const auto targets = seq.times_of(u);
      for (const Event& e : seq.events()) {
        if (p.A(u, e.u) == 0.0) continue;
        const double act = e.t + p.D(u, e.u);
        margin = std::min(margin, std::abs(seq.horizon() - act));
        for (double t : targets)
          if (t != e.t) margin = std::min(margin, std::abs(t - act));
      }
    }
  }
  return margin;
}

// --- random instances ---------------------------------------------------------

/// Random subcritical parameters with target kernel-norm spectral radius
/// roughly `rho` (scaled via the max row sum bound).
inline ModelParams random_params(int U, const CausalGraph& graph, CounterRng& rng,
                                 double rho = 0.5) {
  ModelParams p;
  p.mu = Vec::Zero(U);
  p.A = Mat::Zero(U, U);
  p.B = Mat::Constant(U, U, 1.0);
  p.D = Mat::Zero(U, U);
  for (int u = 0; u < U; ++u) p.mu[u] = 0.1 + 0.3 * rng.uniform();
  double max_row = 0.0;
  for (int u = 0; u < U; ++u) {
    double row = 0.0;
    for (int v = 0; v < U; ++v) {
      p.B(u, v) = 0.7 + 0.9 * rng.uniform();
      if (graph.allowed(u, v)) {
        p.A(u, v) = 0.2 + 0.7 * rng.uniform();
        p.D(u, v) = 0.2 + 1.3 * rng.uniform();
        row += p.A(u, v) / p.B(u, v);
      }
    }
    max_row = std::max(max_row, row);
  }
  if (max_row > 0.0) p.A *= rho / max_row;  // spectral radius <= max row sum
  return p;
}

/// Random event sequence with distinct times, sorted, not from the model
/// (for testing likelihood formulas on arbitrary histories).
inline EventSequence random_sequence(int U, int n_events, double horizon, CounterRng& rng) {
  std::vector<Event> events;
  events.reserve(static_cast<std::size_t>(n_events));
  for (int i = 0; i < n_events; ++i)
    events.push_back(Event{horizon * rng.uniform(), static_cast<int>(rng.next_u64() % U)});
  return EventSequence(std::move(events), horizon, U);
}

}  // namespace oracle
