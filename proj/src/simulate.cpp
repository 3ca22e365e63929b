#include "laghawkes/simulate.hpp"

#include "laghawkes/infer.hpp"
#include "laghawkes/rng.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

namespace laghawkes {

namespace {

/// Per-pair decayed excitation state: state(u, v) is the summed kernel
/// value of all activations of pair (u, v) at the current clock.
struct ExcitationState {
  Mat sums;
  double clock = 0.0;

  explicit ExcitationState(int U) : sums(Mat::Zero(U, U)) {}

  void decay_to(const ModelParams& params, double t) {
    for (int u = 0; u < sums.rows(); ++u)
      for (int v = 0; v < sums.cols(); ++v)
        if (sums(u, v) > 0.0) sums(u, v) *= std::exp(-params.B(u, v) * (t - clock));
    clock = t;
  }

  double total_intensity(const ModelParams& params) const {
    return params.mu.sum() + sums.sum();
  }

  double intensity_of(const ModelParams& params, int u) const {
    return params.mu[u] + sums.row(u).sum();
  }
};

/// Pushes the delayed activations of an event of dimension `source` at time
/// `t` and records them in the optional jump trace.
void schedule_activations(const ModelParams& params, const CausalGraph& graph, double t,
                          int source, ActivationQueue& queue, JumpTrace* trace) {
  for (int target = 0; target < params.num_dims(); ++target) {
    if (!graph.allowed(target, source)) continue;
    queue.push(Activation{t + params.D(target, source), target, source});
    if (trace) {
      trace->times[static_cast<std::size_t>(target)].push_back(t + params.D(target, source));
      trace->magnitudes[static_cast<std::size_t>(target)].push_back(params.A(target, source));
    }
  }
}

/// Thinning core. Events are recorded on (t_start, t_end]; `state` and
/// `queue` must describe the situation at time t_start. Consumes draws in
/// a fixed order (candidate gap, acceptance, dimension), so a run over a
/// shorter horizon is a prefix of the same-seed run over a longer one.
std::vector<Event> run_thinning(const ModelParams& params, const CausalGraph& graph,
                                ExcitationState& state, ActivationQueue& queue, double t_start,
                                double t_end, std::size_t max_events, std::size_t already,
                                CounterRng& rng, JumpTrace* trace, int num_dims, double horizon_for_error) {
  std::vector<Event> out;
  double t = t_start;
  state.decay_to(params, t);
  while (true) {
    // Apply any activation scheduled at or before the current time.
    while (!queue.empty() && queue.top().time <= t) {
      const Activation act = queue.top();
      queue.pop();
      state.sums(act.target, act.source) += params.A(act.target, act.source);
    }
    const double bound = state.total_intensity(params);
    const double next_act = queue.empty() ? std::numeric_limits<double>::infinity()
                                          : queue.top().time;
    const double window_end = std::min(next_act, t_end);
    const double gap = rng.exponential() / bound;
    if (t + gap >= window_end) {
      if (window_end >= t_end) break;
      // Advance to the activation; its jump is applied at the loop head.
      state.decay_to(params, window_end);
      t = window_end;
      continue;
    }
    const double t_cand = t + gap;
    state.decay_to(params, t_cand);
    t = t_cand;
    const double lambda_total = state.total_intensity(params);
    if (rng.uniform() * bound > lambda_total) continue;  // thinned out

    // Attribute the event to a dimension proportionally to lambda_u.
    double pick = rng.uniform() * lambda_total;
    int dim = num_dims - 1;
    for (int u = 0; u < num_dims; ++u) {
      pick -= state.intensity_of(params, u);
      if (pick <= 0.0) {
        dim = u;
        break;
      }
    }
    out.push_back(Event{t, dim});
    if (already + out.size() > max_events) {
      throw TruncationError("simulate: max_events exceeded",
                            EventSequence(std::move(out), horizon_for_error, num_dims));
    }
    schedule_activations(params, graph, t, dim, queue, trace);
  }
  return out;
}

SimulationTrace simulate_impl(const ModelParams& params, const CausalGraph& graph,
                              const SimConfig& cfg, bool want_trace) {
  params.validate(&graph);
  cfg.validate();
  const int U = params.num_dims();

  const auto radius = spectral_radius(params);
  if (!radius.stationary)
    std::cerr << "laghawkes: warning: kernel-norm spectral radius " << radius.value
              << " >= 1; the process is not stationary\n";

  JumpTrace trace;
  trace.times.resize(static_cast<std::size_t>(U));
  trace.magnitudes.resize(static_cast<std::size_t>(U));

  ExcitationState state(U);
  ActivationQueue queue;
  CounterRng rng(cfg.seed);
  auto events = run_thinning(params, graph, state, queue, 0.0, cfg.horizon, cfg.max_events, 0,
                             rng, want_trace ? &trace : nullptr, U, cfg.horizon);
  if (want_trace) {
    // Activations were recorded in event order; the trace is sorted per
    // target dimension.
    for (int u = 0; u < U; ++u) {
      auto& ts = trace.times[static_cast<std::size_t>(u)];
      auto& ms = trace.magnitudes[static_cast<std::size_t>(u)];
      std::vector<std::pair<double, double>> joined(ts.size());
      for (std::size_t j = 0; j < ts.size(); ++j) joined[j] = {ts[j], ms[j]};
      std::sort(joined.begin(), joined.end());
      for (std::size_t j = 0; j < ts.size(); ++j) {
        ts[j] = joined[j].first;
        ms[j] = joined[j].second;
      }
    }
  }
  return SimulationTrace{EventSequence(std::move(events), cfg.horizon, U), std::move(trace)};
}

}  // namespace

EventSequence simulate(const ModelParams& params, const CausalGraph& graph, const SimConfig& cfg) {
  return simulate_impl(params, graph, cfg, false).seq;
}

SimulationTrace simulate_with_trace(const ModelParams& params, const CausalGraph& graph,
                                    const SimConfig& cfg) {
  return simulate_impl(params, graph, cfg, true);
}

double intensity_upper_bound(const ModelParams& params, const EventSequence& history,
                             double t_now, double window_end) {
  params.validate();
  detail::require(params.num_dims() == history.num_dims(),
                  "intensity_upper_bound: dimension mismatch");
  detail::require(window_end >= t_now, "intensity_upper_bound: window must not precede t_now");

  double total = params.mu.sum();
  for (const Event& e : history.events()) {
    for (int u = 0; u < params.num_dims(); ++u) {
      const double a = params.A(u, e.u);
      if (a == 0.0) continue;
      const double act = e.t + params.D(u, e.u);
      if (act > t_now && act < window_end)
        throw NumericError("intensity_upper_bound: activation at " + std::to_string(act) +
                           " inside the window; the bound is not a majorant there");
      if (act <= t_now) total += a * std::exp(-params.B(u, e.u) * (t_now - act));
    }
  }
  return total;
}

EventSequence predict_rollout(const ModelParams& params, const Mat& lag_sample,
                              const CausalGraph& graph, const EventSequence& history,
                              double horizon_extension, std::uint64_t seed,
                              std::size_t max_events) {
  ModelParams effective = params;
  effective.D = lag_sample;
  effective.validate(&graph);
  detail::require(history.num_dims() == params.num_dims(), "predict_rollout: dimension mismatch");
  detail::require(std::isfinite(horizon_extension) && horizon_extension > 0.0,
                  "predict_rollout: extension must be positive");
  const int U = params.num_dims();
  const double t_start = history.horizon();
  const double t_end = t_start + horizon_extension;

  // Replay the history: decayed sums for past activations, queue entries
  // for activations still pending at the history horizon.
  ExcitationState state(U);
  state.clock = t_start;
  ActivationQueue queue;
  for (const Event& e : history.events()) {
    for (int u = 0; u < U; ++u) {
      if (!graph.allowed(u, e.u)) continue;
      const double act = e.t + effective.D(u, e.u);
      if (act <= t_start)
        state.sums(u, e.u) += effective.A(u, e.u) * std::exp(-effective.B(u, e.u) * (t_start - act));
      else
        queue.push(Activation{act, u, e.u});
    }
  }

  CounterRng rng(seed);
  std::vector<Event> future;
  try {
    future = run_thinning(effective, graph, state, queue, t_start, t_end, max_events,
                          history.size(), rng, nullptr, U, t_end);
  } catch (const TruncationError& e) {
    std::vector<Event> all = history.events();
    const auto& part = e.partial.events();
    all.insert(all.end(), part.begin(), part.end());
    throw TruncationError(e.what(), EventSequence(std::move(all), t_end, U));
  }
  std::vector<Event> all = history.events();
  all.insert(all.end(), future.begin(), future.end());
  return EventSequence(std::move(all), t_end, U);
}

Mat sample_lags(const LagPosterior& posterior, const CausalGraph& graph, std::uint64_t seed,
                std::uint64_t stream) {
  const int U = posterior.num_dims();
  CounterRng rng = CounterRng::split(seed, stream);
  Mat lags = Mat::Zero(U, U);
  for (int u = 0; u < U; ++u)
    for (int v = 0; v < U; ++v) {
      if (!graph.allowed(u, v)) continue;
      const double noise = posterior.family == LagFamily::ExponentialRate ? rng.exponential()
                                                                          : rng.normal();
      lags(u, v) = reparam_sample(posterior, u, v, noise);
    }
  return lags;
}

double predict_next_event_time(const ModelParams& params, const LagPosterior& posterior,
                               const CausalGraph& graph, const EventSequence& history, int u,
                               int n_samples, std::uint64_t seed, double extension) {
  detail::require(n_samples >= 1, "predict_next_event_time: n_samples must be >= 1");
  detail::require(u >= 0 && u < params.num_dims(),
                  "predict_next_event_time: dimension out of range");
  detail::require(std::isfinite(extension) && extension > 0.0,
                  "predict_next_event_time: extension must be positive");

  double acc = 0.0;
  for (int s = 0; s < n_samples; ++s) {
    // Sample s draws its lags from stream 2s and rolls out with the seed
    // from stream 2s+1. The retry keeps the rollout seed, so by the prefix
    // property the doubled window extends the same trajectory.
    const Mat lags = sample_lags(posterior, graph, seed, static_cast<std::uint64_t>(2 * s));
    const std::uint64_t roll_seed =
        CounterRng::split(seed, static_cast<std::uint64_t>(2 * s + 1)).next_u64();
    double first = std::numeric_limits<double>::quiet_NaN();
    double window = extension;
    for (int attempt = 0; attempt < 2; ++attempt) {
      const auto rolled = predict_rollout(params, lags, graph, history, window, roll_seed);
      for (const Event& e : rolled.events()) {
        if (e.t > history.horizon() && e.u == u) {
          first = e.t;
          break;
        }
      }
      if (!std::isnan(first) || attempt == 1) break;
      window *= 2.0;  // retry once with a doubled window
    }
    // Censor at the doubled window's end when both attempts came up empty.
    acc += std::isnan(first) ? history.horizon() + window : first;
  }
  return acc / static_cast<double>(n_samples);
}

}  // namespace laghawkes
