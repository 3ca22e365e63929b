#include "laghawkes/core.hpp"

#include <algorithm>
#include <cmath>

namespace laghawkes {

EventSequence::EventSequence(std::vector<Event> events, double horizon, int num_dims)
    : events_(std::move(events)), horizon_(horizon), num_dims_(num_dims) {
  detail::require(std::isfinite(horizon_) && horizon_ > 0.0, "EventSequence: horizon must be positive");
  detail::require(num_dims_ > 0, "EventSequence: num_dims must be positive");
  std::stable_sort(events_.begin(), events_.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });
  for (std::size_t i = 0; i < events_.size(); ++i) {
    const Event& e = events_[i];
    detail::require(std::isfinite(e.t) && e.t >= 0.0,
                    "EventSequence: event time must be finite and nonnegative");
    detail::require(e.t <= horizon_, "EventSequence: event time exceeds horizon");
    detail::require(e.u >= 0 && e.u < num_dims_, "EventSequence: dimension index out of range");
    if (i > 0 && events_[i - 1].t == e.t) {
      throw std::invalid_argument("EventSequence: duplicate timestamp " + std::to_string(e.t) +
                                  " rejected at ingest");
    }
  }
}

std::vector<double> EventSequence::times_of(int u) const {
  std::vector<double> out;
  for (const Event& e : events_)
    if (e.u == u) out.push_back(e.t);
  return out;
}

std::vector<int> EventSequence::counts() const {
  std::vector<int> n(static_cast<std::size_t>(num_dims_), 0);
  for (const Event& e : events_) ++n[static_cast<std::size_t>(e.u)];
  return n;
}

CausalGraph CausalGraph::full(int num_dims) {
  CausalGraph g;
  g.adjacency = MaskMat::Constant(num_dims, num_dims, true);
  return g;
}

CausalGraph CausalGraph::none(int num_dims) {
  CausalGraph g;
  g.adjacency = MaskMat::Constant(num_dims, num_dims, false);
  return g;
}

void CausalGraph::validate() const {
  detail::require(adjacency.rows() == adjacency.cols(), "CausalGraph: adjacency must be square");
  detail::require(adjacency.rows() > 0, "CausalGraph: empty adjacency");
}

void ModelParams::validate(const CausalGraph* graph) const {
  const int U = num_dims();
  detail::require(U > 0, "ModelParams: empty mu");
  detail::require(A.rows() == U && A.cols() == U, "ModelParams: A must be U x U");
  detail::require(B.rows() == U && B.cols() == U, "ModelParams: B must be U x U");
  detail::require(D.rows() == U && D.cols() == U, "ModelParams: D must be U x U");
  if (graph) {
    graph->validate();
    detail::require(graph->num_dims() == U, "ModelParams: graph dimension mismatch");
  }
  for (int u = 0; u < U; ++u) {
    detail::require(std::isfinite(mu[u]) && mu[u] >= kMuFloor,
                    "ModelParams: mu[" + std::to_string(u) + "] must be >= mu floor");
    for (int v = 0; v < U; ++v) {
      detail::require(std::isfinite(A(u, v)) && A(u, v) >= 0.0, "ModelParams: A entries must be >= 0");
      detail::require(std::isfinite(B(u, v)) && B(u, v) > 0.0, "ModelParams: B entries must be > 0");
      detail::require(std::isfinite(D(u, v)) && D(u, v) >= 0.0, "ModelParams: D entries must be >= 0");
      if (graph && !graph->allowed(u, v)) {
        detail::require(A(u, v) == 0.0 && D(u, v) == 0.0,
                        "ModelParams: masked pair (" + std::to_string(u) + "," + std::to_string(v) +
                            ") must have zero impact and delay");
      }
    }
  }
}

std::string lag_family_name(LagFamily f) {
  switch (f) {
    case LagFamily::ExponentialRate: return "exponential";
    case LagFamily::Gaussian: return "gaussian";
    case LagFamily::LogNormal: return "lognormal";
  }
  throw std::invalid_argument("unknown lag family");
}

LagFamily lag_family_from_name(const std::string& name) {
  if (name == "exponential") return LagFamily::ExponentialRate;
  if (name == "gaussian") return LagFamily::Gaussian;
  if (name == "lognormal") return LagFamily::LogNormal;
  throw std::invalid_argument("unknown lag family: " + name);
}

LagPosterior LagPosterior::constant(LagFamily family, int num_dims, double v1, double v2,
                                    const CausalGraph& graph) {
  LagPosterior q;
  q.family = family;
  q.p1 = Mat::Zero(num_dims, num_dims);
  q.p2 = Mat::Zero(num_dims, num_dims);
  for (int u = 0; u < num_dims; ++u)
    for (int v = 0; v < num_dims; ++v)
      if (graph.allowed(u, v)) {
        q.p1(u, v) = v1;
        q.p2(u, v) = v2;
      }
  q.validate(graph);
  return q;
}

LagPosterior LagPosterior::point_mass(const Mat& delays, const CausalGraph& graph) {
  LagPosterior q;
  q.family = LagFamily::Gaussian;
  q.p1 = Mat::Zero(delays.rows(), delays.cols());
  q.p2 = Mat::Zero(delays.rows(), delays.cols());
  for (int u = 0; u < delays.rows(); ++u)
    for (int v = 0; v < delays.cols(); ++v)
      if (graph.allowed(u, v)) q.p1(u, v) = delays(u, v);
  q.validate(graph);
  return q;
}

double LagPosterior::mean(int u, int v) const {
  const double a = p1(u, v), b = p2(u, v);
  if (a == 0.0 && b == 0.0 && family != LagFamily::LogNormal) return 0.0;
  switch (family) {
    case LagFamily::ExponentialRate:
      return a > 0.0 ? 1.0 / a : 0.0;
    case LagFamily::Gaussian:
      return a;
    case LagFamily::LogNormal:
      if (a == 0.0 && b == 0.0) return 0.0;  // masked point mass
      return std::exp(a + 0.5 * b * b);
  }
  return 0.0;
}

Mat LagPosterior::mean_matrix() const {
  Mat m(p1.rows(), p1.cols());
  for (int u = 0; u < p1.rows(); ++u)
    for (int v = 0; v < p1.cols(); ++v) m(u, v) = mean(u, v);
  return m;
}

void LagPosterior::validate(const CausalGraph& graph) const {
  const int U = num_dims();
  detail::require(p1.rows() == U && p1.cols() == U && p2.rows() == U && p2.cols() == U,
                  "LagPosterior: parameter matrices must be U x U");
  detail::require(graph.num_dims() == U, "LagPosterior: graph dimension mismatch");
  for (int u = 0; u < U; ++u)
    for (int v = 0; v < U; ++v) {
      const double a = p1(u, v), b = p2(u, v);
      detail::require(std::isfinite(a) && std::isfinite(b), "LagPosterior: non-finite parameter");
      if (!graph.allowed(u, v)) {
        detail::require(a == 0.0 && b == 0.0, "LagPosterior: masked pair must be a point mass at 0");
        continue;
      }
      switch (family) {
        case LagFamily::ExponentialRate:
          detail::require(a > 0.0, "LagPosterior: exponential rate must be > 0");
          break;
        case LagFamily::Gaussian:
          detail::require(b >= 0.0, "LagPosterior: gaussian stddev must be >= 0");
          detail::require(a >= 0.0 || b > 0.0, "LagPosterior: gaussian point mass must be nonnegative");
          break;
        case LagFamily::LogNormal:
          detail::require(b >= 0.0, "LagPosterior: lognormal log-stddev must be >= 0");
          break;
      }
    }
}

double kernel_value(double a, double beta, double delta, double elapsed) {
  detail::require(std::isfinite(a) && std::isfinite(beta) && std::isfinite(delta) &&
                      std::isfinite(elapsed),
                  "kernel_value: non-finite input");
  detail::require(beta > 0.0, "kernel_value: beta must be > 0");
  detail::require(a >= 0.0, "kernel_value: a must be >= 0");
  detail::require(delta >= 0.0, "kernel_value: delta must be >= 0");
  if (elapsed < delta) return 0.0;
  return a * std::exp(-beta * (elapsed - delta));
}

double kernel_l1_norm(double a, double beta) {
  detail::require(std::isfinite(a) && std::isfinite(beta), "kernel_l1_norm: non-finite input");
  detail::require(beta > 0.0, "kernel_l1_norm: beta must be > 0");
  detail::require(a >= 0.0, "kernel_l1_norm: a must be >= 0");
  return a / beta;
}

ModelParams apply_mask(const ModelParams& params, const CausalGraph& graph) {
  graph.validate();
  detail::require(graph.num_dims() == params.num_dims(), "apply_mask: dimension mismatch");
  ModelParams out = params;
  for (int u = 0; u < params.num_dims(); ++u)
    for (int v = 0; v < params.num_dims(); ++v)
      if (!graph.allowed(u, v)) {
        out.A(u, v) = 0.0;
        out.D(u, v) = 0.0;
      }
  return out;
}

}  // namespace laghawkes
