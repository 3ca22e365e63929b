#pragma once

#include "laghawkes/types.hpp"

namespace laghawkes {

/// Delayed exponential kernel g(elapsed) = a * exp(-beta * (elapsed - delta))
/// for elapsed >= delta, and 0 before the delay has passed.
double kernel_value(double a, double beta, double delta, double elapsed);

/// L1 norm of the delayed exponential kernel: a / beta, independent of delta.
double kernel_l1_norm(double a, double beta);

/// Zeroes A and D on masked-out pairs; everything else unchanged. Idempotent.
ModelParams apply_mask(const ModelParams& params, const CausalGraph& graph);

}  // namespace laghawkes
