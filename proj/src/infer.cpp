#include "laghawkes/infer.hpp"

#include "laghawkes/autodiff.hpp"
#include "laghawkes/core.hpp"
#include "laghawkes/parallel.hpp"
#include "laghawkes/rng.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <numeric>

namespace laghawkes {

namespace {

double softplus(double x) { return Tape::softplus_value(x); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Inverse of softplus on (0, inf): log(exp(y) - 1), overflow-safe.
double softplus_inv(double y) {
  y = std::max(y, 1e-12);
  return y + std::log1p(-std::exp(-y));
}

std::vector<std::pair<int, int>> unmasked_pairs(const CausalGraph& graph) {
  std::vector<std::pair<int, int>> pairs;
  for (int u = 0; u < graph.num_dims(); ++u)
    for (int v = 0; v < graph.num_dims(); ++v)
      if (graph.allowed(u, v)) pairs.emplace_back(u, v);
  return pairs;
}

/// Mean time embedding per dimension; the pooled pairwise score of
/// concatenated embeddings reduces to a dot product of these means plus
/// the type-embedding dot product.
struct EmbeddingStats {
  std::vector<Vec> mean_time;
  std::vector<bool> nonempty;
};

EmbeddingStats embedding_stats(const EventSequence& seq, int d_model) {
  EmbeddingStats st;
  const int U = seq.num_dims();
  st.mean_time.assign(static_cast<std::size_t>(U), Vec::Zero(d_model));
  st.nonempty.assign(static_cast<std::size_t>(U), false);
  std::vector<int> counts(static_cast<std::size_t>(U), 0);
  for (const Event& e : seq.events()) {
    st.mean_time[static_cast<std::size_t>(e.u)] += time_embedding(e.t, d_model);
    ++counts[static_cast<std::size_t>(e.u)];
  }
  for (int u = 0; u < U; ++u) {
    if (counts[static_cast<std::size_t>(u)] > 0) {
      st.mean_time[static_cast<std::size_t>(u)] /= counts[static_cast<std::size_t>(u)];
      st.nonempty[static_cast<std::size_t>(u)] = true;
    }
  }
  return st;
}

// ---------------------------------------------------------------------------
// ELBO core

struct PairNodes {
  int u, v;
  Var p1, p2;                 // posterior parameter nodes
  Var kl;                     // analytic KL node
  std::vector<Var> pre_clip;  // per MC sample: the node the likelihood seed lands on
};

/// KL(q || p) on the tape; the prior entry is constant.
Var kl_node(Tape& tape, LagFamily family, Var q1, Var q2, double p1, double p2) {
  switch (family) {
    case LagFamily::ExponentialRate: {
      Var ratio = tape.div(q1, tape.constant(p1));
      return tape.add(tape.add(tape.log(ratio), tape.div(tape.constant(p1), q1)),
                      tape.constant(-1.0));
    }
    case LagFamily::Gaussian:
    case LagFamily::LogNormal: {
      // log(sp/sq) + (sq^2 + (mq - mp)^2) / (2 sp^2) - 1/2
      Var dm = tape.sub(q1, tape.constant(p1));
      Var quad = tape.div(tape.add(tape.mul(q2, q2), tape.mul(dm, dm)),
                          tape.constant(2.0 * p2 * p2));
      return tape.add(tape.add(tape.constant(std::log(p2)), tape.neg(tape.log(q2))),
                      tape.add(quad, tape.constant(-0.5)));
    }
  }
  throw std::invalid_argument("kl_node: unknown family");
}

struct SeqElboOut {
  double value = 0.0;
  GradientRecord dec;
  std::vector<double> input_grads;  // aligned with the caller's input var list
  double clipped = 0.0;
  double draws = 0.0;
};

/// One sequence's ELBO term and gradients. The tape is built by
/// `make_pair_params` (mode-specific), the delay chain and KL terms are
/// shared. Likelihood gradients in delta are injected as adjoint seeds.
template <typename MakePairParams>
SeqElboOut elbo_one(const EventSequence& seq, const ModelParams& params,
                    const CausalGraph& graph, const LagPosterior& prior, LagFamily family,
                    const std::vector<std::pair<int, int>>& pairs, int mc_samples,
                    double kl_weight, std::uint64_t noise_seed,
                    const std::map<std::string, double>& input_values, Tape& tape,
                    MakePairParams&& make_pair_params, const std::vector<Var>& input_vars) {
  const int U = params.num_dims();
  (void)graph;
  CounterRng rng(noise_seed);

  std::vector<PairNodes> nodes;
  nodes.reserve(pairs.size());
  for (const auto& [u, v] : pairs) {
    PairNodes pn;
    pn.u = u;
    pn.v = v;
    auto [p1, p2] = make_pair_params(tape, u, v);
    pn.p1 = p1;
    pn.p2 = p2;
    pn.kl = kl_node(tape, family, p1, p2, prior.p1(u, v), prior.p2(u, v));
    for (int m = 0; m < mc_samples; ++m) {
      switch (family) {
        case LagFamily::ExponentialRate:
          pn.pre_clip.push_back(tape.div(tape.constant(rng.exponential()), pn.p1));
          break;
        case LagFamily::Gaussian:
          pn.pre_clip.push_back(tape.add(pn.p1, tape.mul(pn.p2, tape.constant(rng.normal()))));
          break;
        case LagFamily::LogNormal:
          pn.pre_clip.push_back(
              tape.exp(tape.add(pn.p1, tape.mul(pn.p2, tape.constant(rng.normal())))));
          break;
      }
    }
    nodes.push_back(std::move(pn));
  }
  tape.forward(input_values);

  SeqElboOut out;
  out.dec = GradientRecord::zero(U);
  std::vector<std::pair<Var, double>> seeds;

  double kl_total = 0.0;
  for (const auto& pn : nodes) {
    kl_total += tape.value(pn.kl);
    if (kl_weight != 0.0) seeds.emplace_back(pn.kl, -kl_weight);
  }

  const double inv_m = 1.0 / static_cast<double>(mc_samples);
  std::vector<EventSequence> one{seq};
  double lik_mean = 0.0;
  for (int m = 0; m < mc_samples; ++m) {
    ModelParams sampled = params;
    sampled.D = Mat::Zero(U, U);
    for (const auto& pn : nodes) {
      double d = tape.value(pn.pre_clip[static_cast<std::size_t>(m)]);
      if (family == LagFamily::Gaussian) {
        out.draws += 1.0;
        if (d <= 0.0) {
          d = 0.0;
          out.clipped += 1.0;
        }
      }
      sampled.D(pn.u, pn.v) = d;
    }
    const auto breakdown = log_likelihood(sampled, one, EvalMode::Recursive);
    lik_mean += breakdown.total * inv_m;
    const auto grad = grad_log_likelihood(sampled, one);
    out.dec.mu += grad.mu * inv_m;
    out.dec.A += grad.A * inv_m;
    out.dec.B += grad.B * inv_m;
    for (const auto& pn : nodes) {
      const Var node = pn.pre_clip[static_cast<std::size_t>(m)];
      const bool clipped = family == LagFamily::Gaussian && tape.value(node) <= 0.0;
      if (!clipped) seeds.emplace_back(node, inv_m * grad.D(pn.u, pn.v));
    }
  }
  out.value = -kl_weight * kl_total + lik_mean;

  tape.backward_seeded(seeds);
  out.input_grads.reserve(input_vars.size());
  for (Var v : input_vars) out.input_grads.push_back(tape.adjoint(v));
  return out;
}

/// Moving-average convergence probe: reports the improvement between
/// consecutive window means.
class ConvergenceProbe {
 public:
  ConvergenceProbe(int window, double tolerance) : window_(window), tolerance_(tolerance) {}

  /// Returns true once the improvement between adjacent windows falls
  /// below tolerance.
  bool push(double value) {
    buffer_.push_back(value);
    if (static_cast<int>(buffer_.size()) < window_) return false;
    double ma = std::accumulate(buffer_.end() - window_, buffer_.end(), 0.0) / window_;
    if (static_cast<int>(buffer_.size()) % window_ != 0) return false;
    if (has_prev_ && ma - prev_ma_ < tolerance_) return true;
    prev_ma_ = ma;
    has_prev_ = true;
    return false;
  }

 private:
  int window_;
  double tolerance_;
  std::vector<double> buffer_;
  double prev_ma_ = 0.0;
  bool has_prev_ = false;
};

/// Deterministic epoch-reshuffled minibatch cycler.
class Batcher {
 public:
  Batcher(std::size_t n, std::size_t batch, std::uint64_t seed)
      : n_(n), batch_(batch == 0 || batch >= n ? n : batch), seed_(seed) {
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    reshuffle();
  }

  std::vector<std::size_t> next() {
    std::vector<std::size_t> out;
    out.reserve(batch_);
    for (std::size_t i = 0; i < batch_; ++i) {
      if (pos_ == n_) {
        ++epoch_;
        pos_ = 0;
        reshuffle();
      }
      out.push_back(order_[pos_++]);
    }
    return out;
  }

  bool full_batch() const { return batch_ == n_; }

 private:
  void reshuffle() {
    if (batch_ == n_) return;  // order is irrelevant for full batches
    CounterRng rng = CounterRng::split(seed_, 0xBA7C4 + epoch_);
    for (std::size_t i = n_ - 1; i > 0; --i) {
      const std::size_t j = rng.next_u64() % (i + 1);
      std::swap(order_[i], order_[j]);
    }
  }

  std::size_t n_, batch_;
  std::uint64_t seed_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  int epoch_ = 0;
};

struct Adam {
  Vec m, v;
  int t = 0;

  explicit Adam(int dim) : m(Vec::Zero(dim)), v(Vec::Zero(dim)) {}

  void ascend(Vec& x, const Vec& g, double lr) {
    ++t;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g.cwiseProduct(g);
    const double mc = 1.0 - std::pow(0.9, t);
    const double vc = 1.0 - std::pow(0.999, t);
    x += lr * (m / mc).cwiseQuotient(((v / vc).cwiseSqrt().array() + 1e-8).matrix());
  }
};

std::vector<EventSequence> gather(const std::vector<EventSequence>& seqs,
                                  const std::vector<std::size_t>& idx) {
  std::vector<EventSequence> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(seqs[i]);
  return out;
}

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

// ---------------------------------------------------------------------------
// Encoder

EncoderParams EncoderParams::init(LagFamily family, int d_model, int num_dims,
                                  std::uint64_t seed) {
  detail::require(d_model > 0 && d_model % 2 == 0, "EncoderParams: d_model must be positive even");
  detail::require(num_dims > 0, "EncoderParams: num_dims must be positive");
  EncoderParams enc;
  enc.family = family;
  enc.d_model = d_model;
  CounterRng rng(seed);
  const auto fill = [&rng](Mat& m) {
    for (int j = 0; j < m.cols(); ++j)
      for (int i = 0; i < m.rows(); ++i) m(i, j) = -0.05 + 0.1 * rng.uniform();
  };
  enc.type_embedding.resize(d_model, num_dims);
  enc.head_w1.resize(num_dims, num_dims);
  enc.head_b1.resize(num_dims, num_dims);
  enc.head_w2.resize(num_dims, num_dims);
  enc.head_b2.resize(num_dims, num_dims);
  fill(enc.type_embedding);
  fill(enc.head_w1);
  fill(enc.head_b1);
  fill(enc.head_w2);
  fill(enc.head_b2);
  return enc;
}

void EncoderParams::validate() const {
  detail::require(d_model > 0 && d_model % 2 == 0, "EncoderParams: d_model must be positive even");
  const int U = num_dims();
  detail::require(type_embedding.rows() == d_model, "EncoderParams: embedding rows != d_model");
  detail::require(head_w1.rows() == U && head_w1.cols() == U && head_b1.rows() == U &&
                      head_b1.cols() == U && head_w2.rows() == U && head_w2.cols() == U &&
                      head_b2.rows() == U && head_b2.cols() == U,
                  "EncoderParams: head matrices must be U x U");
}

EncoderGrad EncoderGrad::zero(int d_model, int num_dims) {
  EncoderGrad g;
  g.type_embedding = Mat::Zero(d_model, num_dims);
  g.head_w1 = Mat::Zero(num_dims, num_dims);
  g.head_b1 = Mat::Zero(num_dims, num_dims);
  g.head_w2 = Mat::Zero(num_dims, num_dims);
  g.head_b2 = Mat::Zero(num_dims, num_dims);
  return g;
}

EncoderGrad& EncoderGrad::operator+=(const EncoderGrad& other) {
  type_embedding += other.type_embedding;
  head_w1 += other.head_w1;
  head_b1 += other.head_b1;
  head_w2 += other.head_w2;
  head_b2 += other.head_b2;
  return *this;
}

void TrainConfig::validate() const {
  detail::require(std::isfinite(step_size) && step_size > 0.0, "TrainConfig: step_size must be > 0");
  detail::require(iterations >= 1, "TrainConfig: iterations must be >= 1");
  detail::require(minibatch >= 0, "TrainConfig: minibatch must be >= 0");
  detail::require(mc_samples >= 1, "TrainConfig: mc_samples must be >= 1");
  detail::require(std::isfinite(kl_weight) && kl_weight >= 0.0, "TrainConfig: kl_weight must be >= 0");
  detail::require(std::isfinite(tolerance) && tolerance > 0.0, "TrainConfig: tolerance must be > 0");
  detail::require(ma_window >= 1, "TrainConfig: ma_window must be >= 1");
  detail::require(final_mc_samples >= 1, "TrainConfig: final_mc_samples must be >= 1");
  detail::require(log_every >= 1, "TrainConfig: log_every must be >= 1");
}

Vec time_embedding(double t, int d_model) {
  detail::require(d_model > 0 && d_model % 2 == 0, "time_embedding: d_model must be positive even");
  Vec z(d_model);
  for (int i = 0; i < d_model / 2; ++i) {
    const double divisor = std::pow(10000.0, 2.0 * i / d_model);
    z[2 * i] = std::sin(t / divisor);
    z[2 * i + 1] = std::cos(t / divisor);
  }
  return z;
}

Mat sequence_embedding(const EventSequence& seq, const EncoderParams& enc, int u) {
  enc.validate();
  detail::require(enc.num_dims() == seq.num_dims(), "sequence_embedding: dimension mismatch");
  detail::require(u >= 0 && u < seq.num_dims(), "sequence_embedding: dimension out of range");
  const auto times = seq.times_of(u);
  Mat out(2 * enc.d_model, static_cast<Eigen::Index>(times.size()));
  for (std::size_t k = 0; k < times.size(); ++k) {
    out.col(static_cast<Eigen::Index>(k)).head(enc.d_model) = time_embedding(times[k], enc.d_model);
    out.col(static_cast<Eigen::Index>(k)).tail(enc.d_model) = enc.type_embedding.col(u);
  }
  return out;
}

LagPosterior encode_posterior(const EventSequence& seq, const EncoderParams& enc,
                              const CausalGraph& graph) {
  enc.validate();
  graph.validate();
  detail::require(enc.num_dims() == seq.num_dims() && graph.num_dims() == seq.num_dims(),
                  "encode_posterior: dimension mismatch");
  const int U = seq.num_dims();
  const auto st = embedding_stats(seq, enc.d_model);

  LagPosterior q;
  q.family = enc.family;
  q.p1 = Mat::Zero(U, U);
  q.p2 = Mat::Zero(U, U);
  for (int u = 0; u < U; ++u)
    for (int v = 0; v < U; ++v) {
      if (!graph.allowed(u, v)) continue;
      double score = 0.0;
      if (st.nonempty[static_cast<std::size_t>(u)] && st.nonempty[static_cast<std::size_t>(v)]) {
        if (enc.use_time_embedding)
          score += st.mean_time[static_cast<std::size_t>(u)].dot(
              st.mean_time[static_cast<std::size_t>(v)]);
        if (enc.use_type_embedding)
          score += enc.type_embedding.col(u).dot(enc.type_embedding.col(v));
      }
      q.p1(u, v) = softplus(enc.head_w1(u, v) * score + enc.head_b1(u, v));
      if (enc.two_parameter()) q.p2(u, v) = softplus(enc.head_w2(u, v) * score + enc.head_b2(u, v));
    }
  return q;
}

double kl_divergence(LagFamily family, double q1, double q2, double p1, double p2) {
  switch (family) {
    case LagFamily::ExponentialRate:
      detail::require(q1 > 0.0 && p1 > 0.0, "kl_divergence: rates must be > 0");
      return std::log(q1 / p1) + p1 / q1 - 1.0;
    case LagFamily::Gaussian:
    case LagFamily::LogNormal:
      detail::require(q2 > 0.0 && p2 > 0.0, "kl_divergence: scales must be > 0");
      return std::log(p2 / q2) + (q2 * q2 + (q1 - p1) * (q1 - p1)) / (2.0 * p2 * p2) - 0.5;
  }
  throw std::invalid_argument("kl_divergence: unknown family");
}

double kl_divergence(const LagPosterior& q, const LagPosterior& p, int u, int v) {
  detail::require(q.family == p.family, "kl_divergence: family mismatch");
  return kl_divergence(q.family, q.p1(u, v), q.p2(u, v), p.p1(u, v), p.p2(u, v));
}

double reparam_sample(LagFamily family, double p1, double p2, double noise) {
  switch (family) {
    case LagFamily::ExponentialRate:
      detail::require(p1 > 0.0, "reparam_sample: rate must be > 0");
      return noise / p1;
    case LagFamily::Gaussian:
      return std::max(p1 + p2 * noise, 0.0);
    case LagFamily::LogNormal:
      if (p1 == 0.0 && p2 == 0.0) return 0.0;  // masked point mass
      return std::exp(p1 + p2 * noise);
  }
  throw std::invalid_argument("reparam_sample: unknown family");
}

double reparam_sample(const LagPosterior& q, int u, int v, double noise) {
  if (q.p1(u, v) == 0.0 && q.p2(u, v) == 0.0 && q.family != LagFamily::LogNormal) return 0.0;
  return reparam_sample(q.family, q.p1(u, v), q.p2(u, v), noise);
}

// ---------------------------------------------------------------------------
// ELBO entry points

namespace {

void check_prior(const LagPosterior& prior, const std::vector<std::pair<int, int>>& pairs,
                 LagFamily family) {
  detail::require(prior.family == family, "elbo: prior family mismatch");
  for (const auto& [u, v] : pairs) {
    if (family == LagFamily::ExponentialRate)
      detail::require(prior.p1(u, v) > 0.0, "elbo: prior rate must be > 0");
    else
      detail::require(prior.p2(u, v) > 0.0, "elbo: prior scale must be > 0 on unmasked pairs");
  }
}

ElboResult reduce_elbo(std::vector<SeqElboOut>& parts, int U) {
  for (std::size_t n = parts.size(); n > 1;) {
    const std::size_t half = (n + 1) / 2;
    for (std::size_t i = 0; i + half < n; ++i) {
      parts[i].value += parts[i + half].value;
      parts[i].dec += parts[i + half].dec;
      for (std::size_t j = 0; j < parts[i].input_grads.size(); ++j)
        parts[i].input_grads[j] += parts[i + half].input_grads[j];
      parts[i].clipped += parts[i + half].clipped;
      parts[i].draws += parts[i + half].draws;
    }
    n = half;
  }
  ElboResult out;
  out.value = parts[0].value;
  out.decoder_grad = GradientRecord::zero(U);
  out.decoder_grad.mu = parts[0].dec.mu;
  out.decoder_grad.A = parts[0].dec.A;
  out.decoder_grad.B = parts[0].dec.B;
  out.clip_fraction = parts[0].draws > 0.0 ? parts[0].clipped / parts[0].draws : 0.0;
  return out;
}

}  // namespace

ElboResult elbo(const std::vector<EventSequence>& seqs, const ModelParams& params,
                const LagPosterior& posterior, const LagPosterior& prior,
                const CausalGraph& graph, const TrainConfig& cfg) {
  cfg.validate();
  graph.validate();
  params.validate(&graph);
  posterior.validate(graph);
  prior.validate(graph);
  detail::require(!seqs.empty(), "elbo: no sequences");
  const int U = params.num_dims();
  const auto pairs = unmasked_pairs(graph);
  check_prior(prior, pairs, posterior.family);
  for (const auto& [u, v] : pairs) {
    if (posterior.family != LagFamily::ExponentialRate)
      detail::require(posterior.p2(u, v) > 0.0, "elbo: degenerate posterior on unmasked pair");
  }

  std::vector<SeqElboOut> parts(seqs.size());
  parallel_for(seqs.size(), [&](std::size_t i) {
    try {
      Tape tape;
      std::map<std::string, double> values;
      std::vector<Var> input_vars;
      std::vector<std::pair<Var, Var>> pair_vars;  // aligned with `pairs`
      for (const auto& [u, v] : pairs) {
        Var q1 = tape.input("q1:" + std::to_string(u) + ":" + std::to_string(v));
        values["q1:" + std::to_string(u) + ":" + std::to_string(v)] = posterior.p1(u, v);
        Var q2 = tape.input("q2:" + std::to_string(u) + ":" + std::to_string(v));
        values["q2:" + std::to_string(u) + ":" + std::to_string(v)] = posterior.p2(u, v);
        input_vars.push_back(q1);
        input_vars.push_back(q2);
        pair_vars.emplace_back(q1, q2);
      }
      std::size_t next = 0;
      parts[i] = elbo_one(
          seqs[i], params, graph, prior, posterior.family, pairs, cfg.mc_samples, cfg.kl_weight,
          CounterRng::split(cfg.seed, i).next_u64(), values, tape,
          [&](Tape&, int, int) { return pair_vars[next++]; }, input_vars);
    } catch (const std::exception& e) {
      throw NumericError("elbo: sequence " + std::to_string(i) + ": " + e.what());
    }
  });

  ElboResult out = reduce_elbo(parts, U);
  out.q_grad_p1 = Mat::Zero(U, U);
  out.q_grad_p2 = Mat::Zero(U, U);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    out.q_grad_p1(pairs[k].first, pairs[k].second) = parts[0].input_grads[2 * k];
    out.q_grad_p2(pairs[k].first, pairs[k].second) = parts[0].input_grads[2 * k + 1];
  }
  return out;
}

ElboResult elbo(const std::vector<EventSequence>& seqs, const ModelParams& params,
                const EncoderParams& enc, const CausalGraph& graph, const LagPosterior& prior,
                const TrainConfig& cfg) {
  cfg.validate();
  graph.validate();
  params.validate(&graph);
  enc.validate();
  prior.validate(graph);
  detail::require(!seqs.empty(), "elbo: no sequences");
  const int U = params.num_dims();
  const int d = enc.d_model;
  const auto pairs = unmasked_pairs(graph);
  check_prior(prior, pairs, enc.family);

  // Input layout: embedding entries column-major, then w1, b1, w2, b2 in
  // pair order. Kept identical across sequences so gradients reduce slotwise.
  const std::size_t n_emb = static_cast<std::size_t>(d) * static_cast<std::size_t>(U);
  const std::size_t n_inputs = n_emb + 4 * pairs.size();

  std::vector<SeqElboOut> parts(seqs.size());
  parallel_for(seqs.size(), [&](std::size_t i) {
    try {
      Tape tape;
      std::map<std::string, double> values;
      std::vector<Var> input_vars;
      input_vars.reserve(n_inputs);
      std::vector<std::vector<Var>> emb_vars(static_cast<std::size_t>(d),
                                             std::vector<Var>(static_cast<std::size_t>(U)));
      for (int uu = 0; uu < U; ++uu)
        for (int ii = 0; ii < d; ++ii) {
          const std::string name = "e:" + std::to_string(ii) + ":" + std::to_string(uu);
          Var var = tape.input(name);
          values[name] = enc.type_embedding(ii, uu);
          emb_vars[static_cast<std::size_t>(ii)][static_cast<std::size_t>(uu)] = var;
          input_vars.push_back(var);
        }
      std::vector<std::array<Var, 4>> head_vars(pairs.size());
      for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto [u, v] = pairs[k];
        const std::string suffix = std::to_string(u) + ":" + std::to_string(v);
        const char* names[4] = {"w1:", "b1:", "w2:", "b2:"};
        const double vals[4] = {enc.head_w1(u, v), enc.head_b1(u, v), enc.head_w2(u, v),
                                enc.head_b2(u, v)};
        for (int j = 0; j < 4; ++j) {
          Var var = tape.input(names[j] + suffix);
          values[names[j] + suffix] = vals[j];
          head_vars[k][static_cast<std::size_t>(j)] = var;
          input_vars.push_back(var);
        }
      }

      const auto st = embedding_stats(seqs[i], d);
      std::size_t next = 0;
      auto make_pair = [&](Tape& tp, int u, int v) -> std::pair<Var, Var> {
        const auto& hv = head_vars[next++];
        Var score = tp.constant(0.0);
        const bool both = st.nonempty[static_cast<std::size_t>(u)] &&
                          st.nonempty[static_cast<std::size_t>(v)];
        if (both && enc.use_time_embedding) {
          score = tp.constant(st.mean_time[static_cast<std::size_t>(u)].dot(
              st.mean_time[static_cast<std::size_t>(v)]));
        }
        if (both && enc.use_type_embedding) {
          for (int ii = 0; ii < d; ++ii)
            score = tp.add(score, tp.mul(emb_vars[static_cast<std::size_t>(ii)][static_cast<std::size_t>(u)],
                                         emb_vars[static_cast<std::size_t>(ii)][static_cast<std::size_t>(v)]));
        }
        Var p1 = tp.softplus(tp.add(tp.mul(hv[0], score), hv[1]));
        Var p2 = enc.two_parameter() ? tp.softplus(tp.add(tp.mul(hv[2], score), hv[3]))
                                     : tp.constant(0.0);
        return {p1, p2};
      };

      parts[i] = elbo_one(seqs[i], params, graph, prior, enc.family, pairs, cfg.mc_samples,
                          cfg.kl_weight, CounterRng::split(cfg.seed, i).next_u64(), values, tape,
                          make_pair, input_vars);
    } catch (const std::exception& e) {
      throw NumericError("elbo: sequence " + std::to_string(i) + ": " + e.what());
    }
  });

  ElboResult out = reduce_elbo(parts, U);
  out.enc_grad = EncoderGrad::zero(d, U);
  const auto& g = parts[0].input_grads;
  std::size_t idx = 0;
  for (int uu = 0; uu < U; ++uu)
    for (int ii = 0; ii < d; ++ii) out.enc_grad.type_embedding(ii, uu) = g[idx++];
  for (const auto& [u, v] : pairs) {
    out.enc_grad.head_w1(u, v) = g[idx++];
    out.enc_grad.head_b1(u, v) = g[idx++];
    out.enc_grad.head_w2(u, v) = g[idx++];
    out.enc_grad.head_b2(u, v) = g[idx++];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fit backends

namespace {

/// Unconstrained coordinates for the decoder block (mu, A, B) shared by
/// every backend; MLE appends a delay block.
struct DecoderCoords {
  int U;
  std::vector<std::pair<int, int>> pairs;
  bool with_delays;

  int size() const {
    return U + static_cast<int>(pairs.size()) * (with_delays ? 3 : 2);
  }

  Vec pack(const ModelParams& p) const {
    Vec x(size());
    int k = 0;
    for (int u = 0; u < U; ++u) x[k++] = softplus_inv(std::max(p.mu[u] - kMuFloor, 1e-10));
    for (const auto& [u, v] : pairs) x[k++] = softplus_inv(std::max(p.A(u, v), 1e-10));
    for (const auto& [u, v] : pairs) x[k++] = softplus_inv(p.B(u, v));
    if (with_delays)
      for (const auto& [u, v] : pairs) x[k++] = softplus_inv(std::max(p.D(u, v), 1e-10));
    return x;
  }

  ModelParams unpack(const Vec& x) const {
    ModelParams p;
    p.mu = Vec(U);
    p.A = Mat::Zero(U, U);
    p.B = Mat::Constant(U, U, 1.0);
    p.D = Mat::Zero(U, U);
    int k = 0;
    for (int u = 0; u < U; ++u) p.mu[u] = kMuFloor + softplus(x[k++]);
    for (const auto& [u, v] : pairs) p.A(u, v) = softplus(x[k++]);
    for (const auto& [u, v] : pairs) p.B(u, v) = softplus(x[k++]);
    if (with_delays)
      for (const auto& [u, v] : pairs) p.D(u, v) = softplus(x[k++]);
    return p;
  }

  /// Chain rule through the softplus reparameterization.
  Vec chain(const Vec& x, const GradientRecord& g) const {
    Vec out(size());
    int k = 0;
    for (int u = 0; u < U; ++u, ++k) out[k] = g.mu[u] * sigmoid(x[k]);
    for (const auto& [u, v] : pairs) { out[k] = g.A(u, v) * sigmoid(x[k]); ++k; }
    for (const auto& [u, v] : pairs) { out[k] = g.B(u, v) * sigmoid(x[k]); ++k; }
    if (with_delays)
      for (const auto& [u, v] : pairs) { out[k] = g.D(u, v) * sigmoid(x[k]); ++k; }
    return out;
  }
};

}  // namespace

ModelParams default_init(const std::vector<EventSequence>& seqs, const CausalGraph& graph,
                         const LagPosterior& prior) {
  detail::require(!seqs.empty(), "default_init: no sequences");
  const int U = seqs.front().num_dims();
  ModelParams p;
  p.mu = Vec::Zero(U);
  p.A = Mat::Zero(U, U);
  p.B = Mat::Constant(U, U, 1.0);
  p.D = Mat::Zero(U, U);
  double total_t = 0.0;
  for (const auto& s : seqs) total_t += s.horizon();
  Vec counts = Vec::Zero(U);
  for (const auto& s : seqs)
    for (const Event& e : s.events()) counts[e.u] += 1.0;
  for (int u = 0; u < U; ++u) p.mu[u] = std::max(kMuFloor, counts[u] / total_t);
  for (int u = 0; u < U; ++u)
    for (int v = 0; v < U; ++v)
      if (graph.allowed(u, v)) {
        p.A(u, v) = 0.1;
        p.D(u, v) = prior.mean(u, v);
      }
  return p;
}

FitResult fit_mle(const std::vector<EventSequence>& seqs, const CausalGraph& graph,
                  const ModelParams& init, const TrainConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  cfg.validate();
  graph.validate();
  init.validate(&graph);
  detail::require(!seqs.empty(), "fit_mle: no sequences");

  DecoderCoords coords{init.num_dims(), unmasked_pairs(graph), true};
  Vec x = coords.pack(init);
  Adam adam(coords.size());
  Batcher batcher(seqs.size(), static_cast<std::size_t>(std::max(cfg.minibatch, 0)), cfg.seed);
  ConvergenceProbe probe(cfg.ma_window, cfg.tolerance);

  FitResult result;
  std::vector<double> trace;
  trace.reserve(static_cast<std::size_t>(cfg.iterations));

  try {
    for (int it = 0; it < cfg.iterations; ++it) {
      const auto idx = batcher.next();
      const auto batch = gather(seqs, idx);
      const ModelParams params = coords.unpack(x);
      const double obj = log_likelihood(params, batch, EvalMode::Recursive).total /
                         static_cast<double>(batch.size());
      GradientRecord g = grad_log_likelihood(params, batch);
      g.mu /= static_cast<double>(batch.size());
      g.A /= static_cast<double>(batch.size());
      g.B /= static_cast<double>(batch.size());
      g.D /= static_cast<double>(batch.size());
      adam.ascend(x, coords.chain(x, g), cfg.step_size);
      trace.push_back(obj);
      if (probe.push(obj)) break;  // moving-average improvement under tolerance
    }

    // Full-batch polish: drive the per-sequence-mean gradient norm down to
    // the convergence contract.
    constexpr double kGradTol = 1e-4;
    constexpr int kPolishBudget = 4000;
    double gnorm = 0.0;
    Adam polish(coords.size());
    for (int it = 0; it <= kPolishBudget; ++it) {
      const ModelParams params = coords.unpack(x);
      GradientRecord g = grad_log_likelihood(params, seqs);
      g.mu /= static_cast<double>(seqs.size());
      g.A /= static_cast<double>(seqs.size());
      g.B /= static_cast<double>(seqs.size());
      g.D /= static_cast<double>(seqs.size());
      gnorm = std::sqrt(g.squared_norm());
      if (gnorm <= 0.9 * kGradTol || it == kPolishBudget) break;
      polish.ascend(x, coords.chain(x, g), cfg.step_size / 5.0);
    }

    result.params = coords.unpack(x);
    result.posterior = LagPosterior::point_mass(result.params.D, graph);
    result.final_grad_norm = gnorm;
    result.converged = gnorm <= kGradTol;
  } catch (const std::runtime_error& e) {
    result.params = coords.unpack(x);
    result.posterior = LagPosterior::point_mass(result.params.D, graph);
    result.converged = false;
    result.diagnostics = e.what();
  }
  result.objective_trace = std::move(trace);
  result.wall_clock_sec = elapsed_seconds(start);
  return result;
}

namespace {

/// Shared ELBO ascent loop for the VI and VAE backends. `Eval` maps
/// (coordinate vector, batch, iteration seed) to an ElboResult plus the
/// coordinate gradient; `Finalize` builds the backend-specific pieces.
template <typename Eval>
std::pair<bool, std::vector<double>> ascend_elbo(const TrainConfig& cfg, std::size_t n_seqs,
                                                 Vec& x, Eval&& eval) {
  Adam adam(static_cast<int>(x.size()));
  Batcher batcher(n_seqs, static_cast<std::size_t>(std::max(cfg.minibatch, 0)), cfg.seed);
  ConvergenceProbe probe(cfg.ma_window, cfg.tolerance);
  std::vector<double> trace;
  trace.reserve(static_cast<std::size_t>(cfg.iterations));
  bool converged = false;
  for (int it = 0; it < cfg.iterations; ++it) {
    const auto idx = batcher.next();
    auto [obj, grad] = eval(x, idx, it);
    adam.ascend(x, grad, cfg.step_size);
    trace.push_back(obj);
    if (probe.push(obj)) {
      converged = true;
      break;
    }
  }
  return {converged, std::move(trace)};
}

}  // namespace

FitResult fit_vi(const std::vector<EventSequence>& seqs, const CausalGraph& graph,
                 const ModelParams& init, const LagPosterior& prior, const TrainConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  cfg.validate();
  graph.validate();
  init.validate(&graph);
  prior.validate(graph);
  detail::require(!seqs.empty(), "fit_vi: no sequences");
  const int U = init.num_dims();
  const auto pairs = unmasked_pairs(graph);
  const LagFamily family = prior.family;
  const bool two_param = family != LagFamily::ExponentialRate;

  DecoderCoords dec{U, pairs, false};
  const int n_dec = dec.size();
  const int n_q = static_cast<int>(pairs.size()) * (two_param ? 2 : 1);

  // Coordinate block: decoder softplus coords, then q coordinates.
  // Location parameters (Gaussian/LogNormal mean) ride unconstrained;
  // scales and rates go through softplus.
  Vec x(n_dec + n_q);
  x.head(n_dec) = dec.pack(init);
  {
    int k = n_dec;
    for (const auto& [u, v] : pairs) {
      if (family == LagFamily::ExponentialRate) {
        x[k++] = softplus_inv(prior.p1(u, v));
      } else {
        x[k++] = prior.p1(u, v);
        x[k++] = softplus_inv(prior.p2(u, v));
      }
    }
  }

  const auto unpack_q = [&](const Vec& coords) {
    LagPosterior q;
    q.family = family;
    q.p1 = Mat::Zero(U, U);
    q.p2 = Mat::Zero(U, U);
    int k = n_dec;
    for (const auto& [u, v] : pairs) {
      if (family == LagFamily::ExponentialRate) {
        q.p1(u, v) = softplus(coords[k++]);
      } else {
        q.p1(u, v) = coords[k++];
        q.p2(u, v) = softplus(coords[k++]);
      }
    }
    return q;
  };

  FitResult result;
  try {
    auto eval = [&](const Vec& coords, const std::vector<std::size_t>& idx, int it) {
      const ModelParams params = dec.unpack(coords.head(n_dec));
      const LagPosterior q = unpack_q(coords);
      TrainConfig step_cfg = cfg;
      step_cfg.seed = CounterRng::split(cfg.seed, 0xE1B0 + static_cast<std::uint64_t>(it)).next_u64();
      const auto batch = gather(seqs, idx);
      const ElboResult res = elbo(batch, params, q, prior, graph, step_cfg);
      const double inv_n = 1.0 / static_cast<double>(batch.size());
      GradientRecord g = res.decoder_grad;
      g.mu *= inv_n;
      g.A *= inv_n;
      g.B *= inv_n;
      Vec grad(coords.size());
      grad.head(n_dec) = dec.chain(coords.head(n_dec), g);
      int k = n_dec;
      for (const auto& [u, v] : pairs) {
        if (family == LagFamily::ExponentialRate) {
          grad[k] = res.q_grad_p1(u, v) * inv_n * sigmoid(coords[k]);
          ++k;
        } else {
          grad[k] = res.q_grad_p1(u, v) * inv_n;
          ++k;
          grad[k] = res.q_grad_p2(u, v) * inv_n * sigmoid(coords[k]);
          ++k;
        }
      }
      return std::make_pair(res.value * inv_n, grad);
    };
    auto [converged, trace] = ascend_elbo(cfg, seqs.size(), x, eval);
    result.converged = converged;
    result.objective_trace = std::move(trace);
  } catch (const std::runtime_error& e) {
    result.converged = false;
    result.diagnostics = e.what();
  }

  result.params = dec.unpack(x.head(n_dec));
  result.posterior = unpack_q(x);
  // Report the posterior mean as the delay estimate; a Gaussian mean that
  // wandered negative decodes as zero (the clip convention).
  result.params.D = result.posterior.mean_matrix().cwiseMax(0.0);
  if (result.diagnostics.empty()) {
    TrainConfig final_cfg = cfg;
    final_cfg.mc_samples = cfg.final_mc_samples;
    final_cfg.seed = CounterRng::split(cfg.seed, 0xF1A1).next_u64();
    ModelParams decoder = result.params;
    decoder.D = Mat::Zero(U, U);
    const ElboResult final_res = elbo(seqs, decoder, result.posterior, prior, graph, final_cfg);
    result.final_elbo = final_res.value / static_cast<double>(seqs.size());
    result.clip_fraction = final_res.clip_fraction;
  }
  result.wall_clock_sec = elapsed_seconds(start);
  return result;
}

FitResult fit_vae(const std::vector<EventSequence>& seqs, const CausalGraph& graph,
                  const ModelParams& init, const EncoderParams& enc_init,
                  const LagPosterior& prior, const TrainConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  cfg.validate();
  graph.validate();
  init.validate(&graph);
  enc_init.validate();
  prior.validate(graph);
  detail::require(!seqs.empty(), "fit_vae: no sequences");
  detail::require(enc_init.num_dims() == init.num_dims(), "fit_vae: encoder dimension mismatch");
  const int U = init.num_dims();
  const int d = enc_init.d_model;
  const auto pairs = unmasked_pairs(graph);

  DecoderCoords dec{U, pairs, false};
  const int n_dec = dec.size();
  const int n_emb = d * U;
  const int n_heads = 4 * static_cast<int>(pairs.size());

  Vec x(n_dec + n_emb + n_heads);
  x.head(n_dec) = dec.pack(init);
  {
    int k = n_dec;
    for (int u = 0; u < U; ++u)
      for (int i = 0; i < d; ++i) x[k++] = enc_init.type_embedding(i, u);
    for (const auto& [u, v] : pairs) {
      x[k++] = enc_init.head_w1(u, v);
      x[k++] = enc_init.head_b1(u, v);
      x[k++] = enc_init.head_w2(u, v);
      x[k++] = enc_init.head_b2(u, v);
    }
  }

  const auto unpack_enc = [&](const Vec& coords) {
    EncoderParams enc = enc_init;
    int k = n_dec;
    for (int u = 0; u < U; ++u)
      for (int i = 0; i < d; ++i) enc.type_embedding(i, u) = coords[k++];
    for (const auto& [u, v] : pairs) {
      enc.head_w1(u, v) = coords[k++];
      enc.head_b1(u, v) = coords[k++];
      enc.head_w2(u, v) = coords[k++];
      enc.head_b2(u, v) = coords[k++];
    }
    return enc;
  };

  FitResult result;
  try {
    auto eval = [&](const Vec& coords, const std::vector<std::size_t>& idx, int it) {
      const ModelParams params = dec.unpack(coords.head(n_dec));
      const EncoderParams enc = unpack_enc(coords);
      TrainConfig step_cfg = cfg;
      step_cfg.seed = CounterRng::split(cfg.seed, 0xAE0 + static_cast<std::uint64_t>(it)).next_u64();
      const auto batch = gather(seqs, idx);
      const ElboResult res = elbo(batch, params, enc, graph, prior, step_cfg);
      const double inv_n = 1.0 / static_cast<double>(batch.size());
      GradientRecord g = res.decoder_grad;
      g.mu *= inv_n;
      g.A *= inv_n;
      g.B *= inv_n;
      Vec grad(coords.size());
      grad.head(n_dec) = dec.chain(coords.head(n_dec), g);
      int k = n_dec;
      for (int u = 0; u < U; ++u)
        for (int i = 0; i < d; ++i) grad[k++] = res.enc_grad.type_embedding(i, u) * inv_n;
      for (const auto& [u, v] : pairs) {
        grad[k++] = res.enc_grad.head_w1(u, v) * inv_n;
        grad[k++] = res.enc_grad.head_b1(u, v) * inv_n;
        grad[k++] = res.enc_grad.head_w2(u, v) * inv_n;
        grad[k++] = res.enc_grad.head_b2(u, v) * inv_n;
      }
      return std::make_pair(res.value * inv_n, grad);
    };
    auto [converged, trace] = ascend_elbo(cfg, seqs.size(), x, eval);
    result.converged = converged;
    result.objective_trace = std::move(trace);
  } catch (const std::runtime_error& e) {
    result.converged = false;
    result.diagnostics = e.what();
  }

  result.params = dec.unpack(x.head(n_dec));
  result.encoder = unpack_enc(x);
  result.has_encoder = true;

  // Per-sequence posteriors plus their parameter average as the pooled
  // population posterior.
  result.per_sequence.reserve(seqs.size());
  LagPosterior pooled;
  pooled.family = enc_init.family;
  pooled.p1 = Mat::Zero(U, U);
  pooled.p2 = Mat::Zero(U, U);
  for (const auto& seq : seqs) {
    result.per_sequence.push_back(encode_posterior(seq, result.encoder, graph));
    pooled.p1 += result.per_sequence.back().p1;
    pooled.p2 += result.per_sequence.back().p2;
  }
  pooled.p1 /= static_cast<double>(seqs.size());
  pooled.p2 /= static_cast<double>(seqs.size());
  result.posterior = pooled;
  result.params.D = pooled.mean_matrix().cwiseMax(0.0);

  if (result.diagnostics.empty()) {
    TrainConfig final_cfg = cfg;
    final_cfg.mc_samples = cfg.final_mc_samples;
    final_cfg.seed = CounterRng::split(cfg.seed, 0xF1A2).next_u64();
    ModelParams decoder = result.params;
    decoder.D = Mat::Zero(U, U);
    const ElboResult final_res = elbo(seqs, decoder, result.encoder, graph, prior, final_cfg);
    result.final_elbo = final_res.value / static_cast<double>(seqs.size());
    result.clip_fraction = final_res.clip_fraction;
  }
  result.wall_clock_sec = elapsed_seconds(start);
  return result;
}

}  // namespace laghawkes
