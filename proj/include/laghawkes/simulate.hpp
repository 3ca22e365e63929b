#pragma once

#include "laghawkes/identify.hpp"
#include "laghawkes/types.hpp"

#include <cstdint>
#include <queue>

namespace laghawkes {

struct SimConfig {
  double horizon = 100.0;
  std::uint64_t seed = 0;
  std::size_t max_events = 1'000'000;  // guard against supercritical runaways

  void validate() const {
    detail::require(std::isfinite(horizon) && horizon > 0.0, "SimConfig: horizon must be positive");
    detail::require(max_events >= 1, "SimConfig: max_events must be >= 1");
  }
};

/// Raised when a run exceeds max_events; carries the partial sequence.
class TruncationError : public std::runtime_error {
 public:
  TruncationError(std::string msg, EventSequence partial_seq)
      : std::runtime_error(std::move(msg)), partial(std::move(partial_seq)) {}
  EventSequence partial;
};

/// One pending excitation: at `time` the intensity of dimension `target`
/// jumps by the pair's impact a. Min-ordered by (time, target, source) so
/// pops are deterministic under ties.
struct Activation {
  double time;
  int target;
  int source;

  friend bool operator>(const Activation& a, const Activation& b) {
    if (a.time != b.time) return a.time > b.time;
    if (a.target != b.target) return a.target > b.target;
    return a.source > b.source;
  }
};

/// Min-heap over the shifted arrival set {t_k + delta_uv}: every recorded
/// event contributes exactly one entry per masked-in target pair.
using ActivationQueue =
    std::priority_queue<Activation, std::vector<Activation>, std::greater<Activation>>;

/// Exact sampling of the delayed process by thinning with activation-aware
/// windows: candidate times are proposed only up to the next scheduled
/// activation, where the total intensity is non-increasing, so the
/// intensity just after the current time is a valid majorant.
EventSequence simulate(const ModelParams& params, const CausalGraph& graph, const SimConfig& cfg);

struct SimulationTrace {
  EventSequence seq;
  JumpTrace jumps;  // every scheduled activation, including those past T
};

/// simulate() plus the exact intensity-jump ground truth, for the
/// identifiability oracles.
SimulationTrace simulate_with_trace(const ModelParams& params, const CausalGraph& graph,
                                    const SimConfig& cfg);

/// Total intensity evaluated just after t_now, valid as an upper bound on
/// (t_now, window_end] provided no activation falls strictly inside the
/// window (contract violation otherwise).
double intensity_upper_bound(const ModelParams& params, const EventSequence& history,
                             double t_now, double window_end);

/// Continues `history` auto-regressively on (T, T + horizon_extension] with
/// the delay matrix `lag_sample` in place of params.D. Delayed activations
/// of history events that land past T still excite the future.
EventSequence predict_rollout(const ModelParams& params, const Mat& lag_sample,
                              const CausalGraph& graph, const EventSequence& history,
                              double horizon_extension, std::uint64_t seed,
                              std::size_t max_events = 1'000'000);

/// Mean over n_samples rollouts (each with an independent lag draw from
/// `posterior`) of the first post-history event time of dimension u. A
/// rollout with no such event retries once with a doubled window, then
/// records the doubled window's end (a small documented bias).
double predict_next_event_time(const ModelParams& params, const LagPosterior& posterior,
                               const CausalGraph& graph, const EventSequence& history, int u,
                               int n_samples, std::uint64_t seed, double extension);

/// Lag matrix drawn from the posterior by the reparameterized transforms;
/// masked pairs stay at zero.
Mat sample_lags(const LagPosterior& posterior, const CausalGraph& graph, std::uint64_t seed,
                std::uint64_t stream);

}  // namespace laghawkes
