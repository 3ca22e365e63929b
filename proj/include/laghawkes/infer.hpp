#pragma once

#include "laghawkes/likelihood.hpp"
#include "laghawkes/types.hpp"

#include <cstdint>

namespace laghawkes {

/// Amortized encoder: a type-embedding matrix plus one affine-softplus head
/// per dimension pair mapping the pooled pairwise score to the posterior
/// parameter(s). Two-parameter families use a second head.
struct EncoderParams {
  LagFamily family = LagFamily::ExponentialRate;
  int d_model = 8;  // even; sin/cos pairs
  Mat type_embedding;  // d_model x U
  Mat head_w1, head_b1;  // U x U, first posterior parameter
  Mat head_w2, head_b2;  // U x U, second parameter (unused for exponential)
  bool use_time_embedding = true;  // ablation (a) clears the type flag,
  bool use_type_embedding = true;  // ablation (b) clears both

  static EncoderParams init(LagFamily family, int d_model, int num_dims, std::uint64_t seed);

  int num_dims() const { return static_cast<int>(type_embedding.cols()); }
  bool two_parameter() const { return family != LagFamily::ExponentialRate; }
  void validate() const;
};

struct EncoderGrad {
  Mat type_embedding;
  Mat head_w1, head_b1, head_w2, head_b2;

  static EncoderGrad zero(int d_model, int num_dims);
  EncoderGrad& operator+=(const EncoderGrad& other);
};

struct TrainConfig {
  double step_size = 1e-2;
  int iterations = 5000;
  int minibatch = 64;       // 0 or >= n means full batch
  int mc_samples = 1;       // per ELBO term during training
  double kl_weight = 1.0;   // beta coefficient on the KL term
  std::uint64_t seed = 0;
  double tolerance = 1e-6;  // moving-average improvement threshold
  int ma_window = 25;
  int final_mc_samples = 64;  // for the reported final ELBO
  int log_every = 50;

  void validate() const;
};

struct FitResult {
  ModelParams params;       // D = fitted delays (MLE) or posterior means (VI/VAE)
  LagPosterior posterior;   // shared (VI), pooled (VAE), point mass at D (MLE)
  std::vector<LagPosterior> per_sequence;  // VAE only
  EncoderParams encoder;
  bool has_encoder = false;
  std::vector<double> objective_trace;  // per-iteration, per-sequence mean
  double wall_clock_sec = 0.0;
  bool converged = false;
  double final_grad_norm = 0.0;  // per-sequence-mean gradient at exit (MLE)
  double final_elbo = 0.0;       // VI/VAE, evaluated with final_mc_samples
  double clip_fraction = 0.0;    // Gaussian lag draws clipped at zero
  std::string diagnostics;
};

/// Transformer-style positional encoding of a time stamp:
/// z[2i] = sin(t / 10000^{2i/d_model}), z[2i+1] = cos(same).
Vec time_embedding(double t, int d_model);

/// Columns are per-event embeddings of dimension u: time embedding stacked
/// on the type-embedding column. Shape 2*d_model x N_u; empty if u has no
/// events.
Mat sequence_embedding(const EventSequence& seq, const EncoderParams& enc, int u);

/// Per-pair posterior parameters from the pooled pairwise embedding score,
/// squashed through softplus(affine(score)). Masked pairs are point masses
/// at zero. The score of a pair with an event-free side is zero.
LagPosterior encode_posterior(const EventSequence& seq, const EncoderParams& enc,
                              const CausalGraph& graph);

/// Analytic KL(q || p) for one pair; families must match.
double kl_divergence(LagFamily family, double q1, double q2, double p1, double p2);
double kl_divergence(const LagPosterior& q, const LagPosterior& p, int u, int v);

/// Deterministic differentiable transform of external noise into a
/// nonnegative delay draw. Noise convention: Exp(1) for the exponential
/// family, standard normal otherwise. Gaussian draws are clipped at zero
/// (zero gradient below zero).
double reparam_sample(LagFamily family, double p1, double p2, double noise);
double reparam_sample(const LagPosterior& q, int u, int v, double noise);

struct ElboResult {
  double value = 0.0;
  GradientRecord decoder_grad;  // wrt mu, A, B; the D block stays zero
  Mat q_grad_p1, q_grad_p2;     // VI mode: wrt the posterior parameters
  EncoderGrad enc_grad;         // VAE mode
  double clip_fraction = 0.0;
};

/// beta-weighted ELBO and its gradients, posterior fixed (VI mode):
/// -kl_weight * sum KL + mean over mc_samples of the log-likelihood at
/// sampled delays. Deterministic given cfg.seed.
ElboResult elbo(const std::vector<EventSequence>& seqs, const ModelParams& params,
                const LagPosterior& posterior, const LagPosterior& prior,
                const CausalGraph& graph, const TrainConfig& cfg);

/// Amortized mode: the posterior of each sequence comes from the encoder;
/// gradients flow back to the encoder weights through the tape.
ElboResult elbo(const std::vector<EventSequence>& seqs, const ModelParams& params,
                const EncoderParams& enc, const CausalGraph& graph, const LagPosterior& prior,
                const TrainConfig& cfg);

/// Full maximum likelihood over (mu, A, B, D) on softplus-unconstrained
/// coordinates with adaptive-moment ascent, then a full-batch polish.
/// converged means the per-sequence-mean gradient norm reached 1e-4.
FitResult fit_mle(const std::vector<EventSequence>& seqs, const CausalGraph& graph,
                  const ModelParams& init, const TrainConfig& cfg);

/// Factorized variational inference: one shared lag posterior, initialized
/// at the prior, learned jointly with (mu, A, B) by ELBO ascent.
FitResult fit_vi(const std::vector<EventSequence>& seqs, const CausalGraph& graph,
                 const ModelParams& init, const LagPosterior& prior, const TrainConfig& cfg);

/// Amortized variational inference with the pairwise-score encoder; returns
/// per-sequence posteriors and their parameter-averaged pooled posterior.
FitResult fit_vae(const std::vector<EventSequence>& seqs, const CausalGraph& graph,
                  const ModelParams& init, const EncoderParams& enc_init,
                  const LagPosterior& prior, const TrainConfig& cfg);

/// Decoder initialization the fits default to: mu from per-dimension event
/// rates (exact for the Poisson part), a = 0.1, beta = 1, delta = prior
/// mean on unmasked pairs.
ModelParams default_init(const std::vector<EventSequence>& seqs, const CausalGraph& graph,
                         const LagPosterior& prior);

}  // namespace laghawkes
