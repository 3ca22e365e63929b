#pragma once

#include "laghawkes/types.hpp"

#include <optional>

namespace laghawkes {

/// Per-dimension times (strictly increasing) and magnitudes of the jumps
/// of the conditional intensity.
struct JumpTrace {
  std::vector<std::vector<double>> times;
  std::vector<std::vector<double>> magnitudes;

  int num_dims() const { return static_cast<int>(times.size()); }
  void validate() const;
};

struct SpectralRadiusResult {
  double value = 0.0;
  bool stationary = false;  // value < 1
};

/// Raised when power iteration fails to settle; carries the last estimate.
class NonConvergenceError : public NumericError {
 public:
  NonConvergenceError(const std::string& msg, double last)
      : NumericError(msg), last_estimate(last) {}
  double last_estimate;
};

/// Raised when observed data contradicts the model structure being assumed
/// (e.g. a non-constant pre-first-arrival intensity segment).
class ContradictionError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Raised when two distinct shifts explain the same jump pattern; lists the
/// candidate delays. This is the measure-zero case the delay-recovery
/// argument excludes.
class AmbiguityError : public std::runtime_error {
 public:
  AmbiguityError(int target, int source, std::vector<double> cands)
      : std::runtime_error("ambiguous delay for pair (" + std::to_string(target) + "," +
                           std::to_string(source) + "): " + std::to_string(cands.size()) +
                           " candidate shifts"),
        target_dim(target),
        source_dim(source),
        candidates(std::move(cands)) {}
  int target_dim;
  int source_dim;
  std::vector<double> candidates;
};

/// Spectral radius of the kernel-norm matrix [a_uv / beta_uv] by direct
/// power iteration (tolerance 1e-10, at most 10^4 iterations). Delays do
/// not enter, so the result is invariant to D.
SpectralRadiusResult spectral_radius(const ModelParams& params);

/// Base rates from the constant intensity segment observed on [0, t_(1)).
/// `pre_first_intensity[u]` holds intensity samples of dimension u on that
/// segment; a segment varying by more than 1e-9, or a jump before the
/// first arrival, contradicts the model.
Vec recover_mu(const JumpTrace& jumps, const std::vector<double>& first_arrival_times,
               const std::vector<std::vector<double>>& pre_first_intensity);

/// Consistent shifts for one target's jump list against one source's event
/// list: every source event must map onto some jump within `tol`.
std::vector<double> delay_shift_candidates(const std::vector<double>& jump_times,
                                           const std::vector<double>& source_events,
                                           double tol = 1e-9);

/// Delay matrix from noiseless intensity jump times: for each unmasked pair
/// the unique shift aligning the source's events with a subset of the
/// target's jumps. Every jump must be explained exactly once. Throws
/// AmbiguityError on multiple consistent shifts, ContradictionError when
/// no shift works or jumps stay unexplained.
Mat recover_delays_from_jumps(const std::vector<std::vector<double>>& source_events,
                              const JumpTrace& jumps, const CausalGraph& graph,
                              double tol = 1e-9);

/// Mean relative error x 100% over entries included by the mask with
/// nonzero truth. Throws std::domain_error when every entry is excluded.
double absolute_error_rate(const Mat& learned, const Mat& truth, const MaskMat& mask);
double absolute_error_rate(const Vec& learned, const Vec& truth);

double rmse(const std::vector<double>& predicted, const std::vector<double>& actual);

}  // namespace laghawkes
