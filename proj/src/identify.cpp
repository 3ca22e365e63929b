#include "laghawkes/identify.hpp"

#include <algorithm>
#include <cmath>

namespace laghawkes {

namespace {

bool near_jump(const std::vector<double>& jumps, double t, double tol) {
  auto it = std::lower_bound(jumps.begin(), jumps.end(), t);
  if (it != jumps.end() && std::abs(*it - t) <= tol) return true;
  if (it != jumps.begin() && std::abs(*std::prev(it) - t) <= tol) return true;
  return false;
}

std::size_t nearest_jump_index(const std::vector<double>& jumps, double t) {
  auto it = std::lower_bound(jumps.begin(), jumps.end(), t);
  if (it == jumps.end()) return jumps.size() - 1;
  if (it == jumps.begin()) return 0;
  return std::abs(*it - t) < std::abs(*std::prev(it) - t)
             ? static_cast<std::size_t>(it - jumps.begin())
             : static_cast<std::size_t>(it - jumps.begin() - 1);
}

}  // namespace

void JumpTrace::validate() const {
  detail::require(times.size() == magnitudes.size(), "JumpTrace: times/magnitudes mismatch");
  for (std::size_t u = 0; u < times.size(); ++u) {
    detail::require(times[u].size() == magnitudes[u].size(),
                    "JumpTrace: ragged times/magnitudes");
    for (std::size_t j = 1; j < times[u].size(); ++j)
      detail::require(times[u][j] > times[u][j - 1],
                      "JumpTrace: jump times must be strictly increasing");
  }
}

SpectralRadiusResult spectral_radius(const ModelParams& params) {
  params.validate();
  const int U = params.num_dims();
  Mat G(U, U);
  for (int u = 0; u < U; ++u)
    for (int v = 0; v < U; ++v) G(u, v) = params.A(u, v) / params.B(u, v);

  if (G.isZero(0.0)) return {0.0, true};

  Vec x = Vec::Constant(U, 1.0 / std::sqrt(static_cast<double>(U)));
  double estimate = 0.0;
  constexpr double kTol = 1e-10;
  constexpr int kMaxIter = 10000;
  for (int it = 0; it < kMaxIter; ++it) {
    Vec y = G * x;
    const double norm = y.norm();
    if (norm == 0.0) return {0.0, true};  // iterate hit the nilpotent kernel
    const double prev = estimate;
    estimate = norm;  // ||x|| == 1, so ||Gx|| estimates the dominant modulus
    x = y / norm;
    if (it > 0 && std::abs(estimate - prev) <= kTol * std::max(1.0, estimate))
      return {estimate, estimate < 1.0};
  }
  throw NonConvergenceError("spectral_radius: power iteration did not converge", estimate);
}

Vec recover_mu(const JumpTrace& jumps, const std::vector<double>& first_arrival_times,
               const std::vector<std::vector<double>>& pre_first_intensity) {
  jumps.validate();
  const int U = jumps.num_dims();
  detail::require(static_cast<int>(pre_first_intensity.size()) == U,
                  "recover_mu: intensity segments must cover every dimension");
  detail::require(!first_arrival_times.empty(), "recover_mu: no arrivals");
  const double t1 = *std::min_element(first_arrival_times.begin(), first_arrival_times.end());

  Vec mu(U);
  for (int u = 0; u < U; ++u) {
    const auto& seg = pre_first_intensity[static_cast<std::size_t>(u)];
    detail::require(!seg.empty(), "recover_mu: empty intensity segment");
    const auto [lo, hi] = std::minmax_element(seg.begin(), seg.end());
    if (*hi - *lo > 1e-9)
      throw ContradictionError("recover_mu: intensity of dimension " + std::to_string(u) +
                               " varies before the first arrival");
    for (double jt : jumps.times[static_cast<std::size_t>(u)])
      if (jt < t1)
        throw ContradictionError("recover_mu: intensity jump before the first arrival");
    mu[u] = *lo;
  }
  return mu;
}

std::vector<double> delay_shift_candidates(const std::vector<double>& jump_times,
                                           const std::vector<double>& source_events,
                                           double tol) {
  detail::require(!source_events.empty(), "delay_shift_candidates: empty source event list");
  std::vector<double> candidates;
  const double first = source_events.front();
  for (double jt : jump_times) {
    const double shift = jt - first;
    if (shift < -tol) continue;
    bool ok = true;
    for (double s : source_events) {
      if (!near_jump(jump_times, s + shift, tol)) {
        ok = false;
        break;
      }
    }
    if (ok) candidates.push_back(std::max(shift, 0.0));
  }
  // Jumps within tol of each other would yield the same shift twice.
  candidates.erase(std::unique(candidates.begin(), candidates.end(),
                               [tol](double a, double b) { return std::abs(a - b) <= 2.0 * tol; }),
                   candidates.end());
  return candidates;
}

Mat recover_delays_from_jumps(const std::vector<std::vector<double>>& source_events,
                              const JumpTrace& jumps, const CausalGraph& graph, double tol) {
  jumps.validate();
  graph.validate();
  const int U = graph.num_dims();
  detail::require(jumps.num_dims() == U, "recover_delays_from_jumps: jump trace dimension mismatch");
  detail::require(static_cast<int>(source_events.size()) == U,
                  "recover_delays_from_jumps: source event lists must cover every dimension");

  Mat delays = Mat::Zero(U, U);
  for (int u = 0; u < U; ++u) {
    const auto& J = jumps.times[static_cast<std::size_t>(u)];
    std::vector<int> explained(J.size(), 0);
    for (int v = 0; v < U; ++v) {
      if (!graph.allowed(u, v)) continue;
      const auto& E = source_events[static_cast<std::size_t>(v)];
      if (E.empty())
        throw ContradictionError("recover_delays_from_jumps: source dimension " +
                                 std::to_string(v) + " has no events");
      auto cands = delay_shift_candidates(J, E, tol);
      if (cands.empty())
        throw ContradictionError("recover_delays_from_jumps: no shift aligns source " +
                                 std::to_string(v) + " with jumps of " + std::to_string(u));
      if (cands.size() > 1) throw AmbiguityError(u, v, cands);

      // Refine the shift as the mean offset over all matched jumps.
      double acc = 0.0;
      for (double s : E) {
        const std::size_t j = nearest_jump_index(J, s + cands[0]);
        acc += J[j] - s;
        ++explained[j];
      }
      delays(u, v) = acc / static_cast<double>(E.size());
    }
    for (std::size_t j = 0; j < J.size(); ++j)
      if (explained[j] != 1)
        throw ContradictionError("recover_delays_from_jumps: jump " + std::to_string(j) +
                                 " of dimension " + std::to_string(u) + " explained " +
                                 std::to_string(explained[j]) + " times");
  }
  return delays;
}

double absolute_error_rate(const Mat& learned, const Mat& truth, const MaskMat& mask) {
  detail::require(learned.rows() == truth.rows() && learned.cols() == truth.cols(),
                  "absolute_error_rate: shape mismatch");
  detail::require(mask.rows() == truth.rows() && mask.cols() == truth.cols(),
                  "absolute_error_rate: mask shape mismatch");
  double acc = 0.0;
  int n = 0;
  for (int i = 0; i < truth.rows(); ++i)
    for (int j = 0; j < truth.cols(); ++j) {
      if (!mask(i, j) || truth(i, j) == 0.0) continue;
      acc += std::abs(learned(i, j) - truth(i, j)) / std::abs(truth(i, j));
      ++n;
    }
  if (n == 0) throw std::domain_error("absolute_error_rate: every entry excluded");
  return 100.0 * acc / static_cast<double>(n);
}

double absolute_error_rate(const Vec& learned, const Vec& truth) {
  Mat l = learned;
  Mat t = truth;
  MaskMat m = MaskMat::Constant(truth.size(), 1, true);
  return absolute_error_rate(l, t, m);
}

double rmse(const std::vector<double>& predicted, const std::vector<double>& actual) {
  detail::require(predicted.size() == actual.size() && !predicted.empty(),
                  "rmse: lists must have equal nonzero length");
  double acc = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted[i] - actual[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(predicted.size()));
}

}  // namespace laghawkes
