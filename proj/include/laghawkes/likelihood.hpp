#pragma once

#include "laghawkes/types.hpp"

namespace laghawkes {

/// Log-likelihood split into its parts. total = sum(per_dim);
/// per-dimension value = event term minus compensator term.
struct LikelihoodBreakdown {
  Vec per_dim;              // ell_u summed over all sequences
  double event_term = 0.0;  // sum of log lambda at event times
  double compensator = 0.0; // integral of lambda over [0, T]
  double total = 0.0;
};

/// Partials with respect to every unmasked parameter, laid out like
/// ModelParams. Masked entries stay identically zero.
struct GradientRecord {
  Vec mu;
  Mat A;
  Mat B;
  Mat D;

  static GradientRecord zero(int num_dims);
  GradientRecord& operator+=(const GradientRecord& other);
  double squared_norm() const;
};

enum class EvalMode {
  Direct,     // O(n^2) per dimension pair
  Recursive,  // running sums reset at activation instants, O(n log n)-ish
};

/// Conditional intensity of dimension u at time t given the sequence
/// history. Left-continuous: a contribution activating exactly at t is
/// excluded, so an event's own excitation never enters its event term.
double intensity_at(const ModelParams& params, const EventSequence& seq, int u, double t);

/// Integral of the intensity of dimension u over [0, t_end], closed form.
double compensator(const ModelParams& params, const EventSequence& seq, int u, double t_end);

LikelihoodBreakdown log_likelihood(const ModelParams& params,
                                   const std::vector<EventSequence>& seqs,
                                   EvalMode mode = EvalMode::Direct);

/// Analytic partials of the log-likelihood, including the delay partials
/// through both the event term and the compensator. Indicator boundaries
/// contribute nothing (a.e. derivative). If some event time coincides
/// exactly with an activation instant the delays are internally perturbed
/// by 1e-12 once; a second coincidence raises NumericError.
GradientRecord grad_log_likelihood(const ModelParams& params,
                                   const std::vector<EventSequence>& seqs);

}  // namespace laghawkes
