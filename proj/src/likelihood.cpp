#include "laghawkes/likelihood.hpp"

#include "laghawkes/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace laghawkes {

namespace {

void check_time_in_range(double t, double horizon, const char* who) {
  detail::require(std::isfinite(t) && t >= 0.0 && t <= horizon,
                  std::string(who) + ": time out of [0, T]");
}

/// Event times grouped by dimension, shared by the evaluation paths.
std::vector<std::vector<double>> times_by_dim(const EventSequence& seq) {
  std::vector<std::vector<double>> by_dim(static_cast<std::size_t>(seq.num_dims()));
  for (const Event& e : seq.events()) by_dim[static_cast<std::size_t>(e.u)].push_back(e.t);
  return by_dim;
}

/// lambda_u at each event of dimension u, direct per-pair sums.
std::vector<double> event_intensities_direct(const ModelParams& params,
                                             const std::vector<std::vector<double>>& by_dim,
                                             int u) {
  const auto& targets = by_dim[static_cast<std::size_t>(u)];
  std::vector<double> lam(targets.size(), params.mu[u]);
  for (int v = 0; v < params.num_dims(); ++v) {
    const double a = params.A(u, v);
    if (a == 0.0) continue;
    const double beta = params.B(u, v);
    const double delta = params.D(u, v);
    const auto& sources = by_dim[static_cast<std::size_t>(v)];
    for (std::size_t k = 0; k < targets.size(); ++k) {
      const double t = targets[k];
      double s_sum = 0.0;
      for (double s : sources) {
        const double act = s + delta;
        if (act >= t) break;  // sources sorted, later ones activate even later
        s_sum += std::exp(-beta * (t - act));
      }
      lam[k] += a * s_sum;
    }
  }
  return lam;
}

/// Same values via per-pair running sums reset at activation instants.
std::vector<double> event_intensities_recursive(const ModelParams& params,
                                                const std::vector<std::vector<double>>& by_dim,
                                                int u) {
  const auto& targets = by_dim[static_cast<std::size_t>(u)];
  std::vector<double> lam(targets.size(), params.mu[u]);
  for (int v = 0; v < params.num_dims(); ++v) {
    const double a = params.A(u, v);
    if (a == 0.0) continue;
    const double beta = params.B(u, v);
    const double delta = params.D(u, v);
    const auto& sources = by_dim[static_cast<std::size_t>(v)];
    double running = 0.0;   // sum of a * exp(-beta (t_anchor - act)) over act <= t_anchor
    double anchor = 0.0;
    std::size_t i = 0;
    for (std::size_t k = 0; k < targets.size(); ++k) {
      const double t = targets[k];
      while (i < sources.size() && sources[i] + delta < t) {
        const double act = sources[i] + delta;
        running = running * std::exp(-beta * (act - anchor)) + a;
        anchor = act;
        ++i;
      }
      if (running > 0.0) lam[k] += running * std::exp(-beta * (t - anchor));
    }
  }
  return lam;
}

double compensator_for_dim(const ModelParams& params,
                           const std::vector<std::vector<double>>& by_dim, int u,
                           double t_end) {
  double total = params.mu[u] * t_end;
  for (int v = 0; v < params.num_dims(); ++v) {
    const double a = params.A(u, v);
    if (a == 0.0) continue;
    const double beta = params.B(u, v);
    const double delta = params.D(u, v);
    for (double s : by_dim[static_cast<std::size_t>(v)]) {
      const double w = t_end - s - delta;
      if (w <= 0.0) break;
      total += (a / beta) * (1.0 - std::exp(-beta * w));
    }
  }
  return total;
}

LikelihoodBreakdown likelihood_one(const ModelParams& params, const EventSequence& seq,
                                   EvalMode mode) {
  const int U = params.num_dims();
  const auto by_dim = times_by_dim(seq);
  LikelihoodBreakdown out;
  out.per_dim = Vec::Zero(U);
  for (int u = 0; u < U; ++u) {
    const auto lam = mode == EvalMode::Direct
                         ? event_intensities_direct(params, by_dim, u)
                         : event_intensities_recursive(params, by_dim, u);
    double ev = 0.0;
    for (std::size_t k = 0; k < lam.size(); ++k) {
      if (!(lam[k] > 0.0) || !std::isfinite(lam[k]))
        throw NumericError("log_likelihood: nonpositive intensity at event " + std::to_string(k) +
                           " of dimension " + std::to_string(u));
      ev += std::log(lam[k]);
    }
    const double comp = compensator_for_dim(params, by_dim, u, seq.horizon());
    if (!std::isfinite(comp))
      throw NumericError("log_likelihood: non-finite compensator for dimension " +
                         std::to_string(u));
    out.per_dim[u] = ev - comp;
    out.event_term += ev;
    out.compensator += comp;
  }
  out.total = out.per_dim.sum();
  return out;
}

/// True when some event time equals the activation instant s + delta of a
/// *different* event. With delta = 0 that would be a duplicate timestamp,
/// which ingest already rejects, so only positive delays can collide.
bool has_coincidence(const ModelParams& params, const std::vector<std::vector<double>>& by_dim) {
  const int U = params.num_dims();
  for (int u = 0; u < U; ++u) {
    const auto& targets = by_dim[static_cast<std::size_t>(u)];
    if (targets.empty()) continue;
    for (int v = 0; v < U; ++v) {
      if (params.A(u, v) == 0.0) continue;
      const double delta = params.D(u, v);
      if (delta == 0.0) continue;
      for (double s : by_dim[static_cast<std::size_t>(v)]) {
        const double act = s + delta;
        if (std::binary_search(targets.begin(), targets.end(), act)) return true;
      }
    }
  }
  return false;
}

GradientRecord grad_one(const ModelParams& params, const EventSequence& seq) {
  const int U = params.num_dims();
  const double T = seq.horizon();
  const auto by_dim = times_by_dim(seq);
  GradientRecord g = GradientRecord::zero(U);

  for (int u = 0; u < U; ++u) {
    const auto& targets = by_dim[static_cast<std::size_t>(u)];
    const auto lam = event_intensities_direct(params, by_dim, u);
    double inv_sum = 0.0;
    for (double l : lam) inv_sum += 1.0 / l;
    g.mu[u] += inv_sum - T;

    for (int v = 0; v < U; ++v) {
      const double a = params.A(u, v);
      if (a == 0.0) continue;
      const double beta = params.B(u, v);
      const double delta = params.D(u, v);
      const auto& sources = by_dim[static_cast<std::size_t>(v)];
      if (sources.empty()) continue;

      // Event term: each event of u sees sums E0 = sum(e^{-beta w}) and
      // E1 = sum(w e^{-beta w}) over activated sources, w = t - s - delta.
      for (std::size_t k = 0; k < targets.size(); ++k) {
        const double t = targets[k];
        double e0 = 0.0, e1 = 0.0;
        for (double s : sources) {
          const double w = t - s - delta;
          if (w <= 0.0) break;
          const double e = std::exp(-beta * w);
          e0 += e;
          e1 += w * e;
        }
        const double inv = 1.0 / lam[k];
        g.A(u, v) += e0 * inv;
        g.B(u, v) += -a * e1 * inv;
        g.D(u, v) += a * beta * e0 * inv;
      }

      // Compensator term, subtracted: integral contribution per source is
      // (a/beta)(1 - e^{-beta w}) with w = T - s - delta, whose delta
      // partial is -beta e^{-beta w} * (a/beta).
      for (double s : sources) {
        const double w = T - s - delta;
        if (w <= 0.0) break;
        const double e = std::exp(-beta * w);
        g.A(u, v) -= (1.0 - e) / beta;
        g.B(u, v) -= a * (-(1.0 - e) / (beta * beta) + w * e / beta);
        g.D(u, v) += a * e;
      }
    }
  }
  return g;
}

/// Fixed-shape pairwise tree reduction so batch sums are reproducible
/// regardless of worker count.
template <typename T>
T tree_reduce(std::vector<T>& items) {
  std::size_t n = items.size();
  while (n > 1) {
    const std::size_t half = (n + 1) / 2;
    for (std::size_t i = 0; i + half < n; ++i) items[i] += items[i + half];
    n = half;
  }
  return items[0];
}

}  // namespace

GradientRecord GradientRecord::zero(int num_dims) {
  GradientRecord g;
  g.mu = Vec::Zero(num_dims);
  g.A = Mat::Zero(num_dims, num_dims);
  g.B = Mat::Zero(num_dims, num_dims);
  g.D = Mat::Zero(num_dims, num_dims);
  return g;
}

GradientRecord& GradientRecord::operator+=(const GradientRecord& other) {
  mu += other.mu;
  A += other.A;
  B += other.B;
  D += other.D;
  return *this;
}

double GradientRecord::squared_norm() const {
  return mu.squaredNorm() + A.squaredNorm() + B.squaredNorm() + D.squaredNorm();
}

double intensity_at(const ModelParams& params, const EventSequence& seq, int u, double t) {
  params.validate();
  detail::require(u >= 0 && u < params.num_dims(), "intensity_at: dimension out of range");
  detail::require(params.num_dims() == seq.num_dims(), "intensity_at: dimension mismatch");
  check_time_in_range(t, seq.horizon(), "intensity_at");
  double lam = params.mu[u];
  for (const Event& e : seq.events()) {
    const double a = params.A(u, e.u);
    if (a == 0.0) continue;
    const double act = e.t + params.D(u, e.u);
    if (act < t) lam += a * std::exp(-params.B(u, e.u) * (t - act));
  }
  return lam;
}

double compensator(const ModelParams& params, const EventSequence& seq, int u, double t_end) {
  params.validate();
  detail::require(u >= 0 && u < params.num_dims(), "compensator: dimension out of range");
  detail::require(params.num_dims() == seq.num_dims(), "compensator: dimension mismatch");
  check_time_in_range(t_end, seq.horizon(), "compensator");
  return compensator_for_dim(params, times_by_dim(seq), u, t_end);
}

LikelihoodBreakdown log_likelihood(const ModelParams& params,
                                   const std::vector<EventSequence>& seqs, EvalMode mode) {
  params.validate();
  detail::require(!seqs.empty(), "log_likelihood: no sequences");
  const int U = params.num_dims();
  for (const auto& s : seqs)
    detail::require(s.num_dims() == U, "log_likelihood: sequence dimension mismatch");

  std::vector<LikelihoodBreakdown> parts(seqs.size());
  parallel_for(seqs.size(), [&](std::size_t i) { parts[i] = likelihood_one(params, seqs[i], mode); });

  LikelihoodBreakdown total;
  total.per_dim = Vec::Zero(U);
  for (std::size_t n = parts.size(); n > 1;) {
    const std::size_t half = (n + 1) / 2;
    for (std::size_t i = 0; i + half < n; ++i) {
      parts[i].per_dim += parts[i + half].per_dim;
      parts[i].event_term += parts[i + half].event_term;
      parts[i].compensator += parts[i + half].compensator;
    }
    n = half;
  }
  total.per_dim = parts[0].per_dim;
  total.event_term = parts[0].event_term;
  total.compensator = parts[0].compensator;
  total.total = total.per_dim.sum();
  return total;
}

GradientRecord grad_log_likelihood(const ModelParams& params,
                                   const std::vector<EventSequence>& seqs) {
  params.validate();
  detail::require(!seqs.empty(), "grad_log_likelihood: no sequences");
  const int U = params.num_dims();
  for (const auto& s : seqs)
    detail::require(s.num_dims() == U, "grad_log_likelihood: sequence dimension mismatch");

  // Event times coinciding with activation instants sit on an indicator
  // boundary (measure zero); nudge the delays once, then give up.
  ModelParams effective = params;
  bool perturbed = false;
  for (const auto& seq : seqs) {
    const auto by_dim = times_by_dim(seq);
    if (has_coincidence(effective, by_dim)) {
      if (!perturbed) {
        for (int u = 0; u < U; ++u)
          for (int v = 0; v < U; ++v)
            if (effective.A(u, v) != 0.0 && effective.D(u, v) > 0.0) effective.D(u, v) += 1e-12;
        perturbed = true;
      }
      if (has_coincidence(effective, by_dim))
        throw NumericError(
            "grad_log_likelihood: event time coincides with an activation instant even after "
            "perturbing delays");
    }
  }

  std::vector<GradientRecord> parts(seqs.size());
  parallel_for(seqs.size(), [&](std::size_t i) { parts[i] = grad_one(effective, seqs[i]); });
  return tree_reduce(parts);
}

}  // namespace laghawkes
