#include "laghawkes/autodiff.hpp"
#include "laghawkes/core.hpp"
#include "laghawkes/identify.hpp"
#include "laghawkes/infer.hpp"
#include "laghawkes/io.hpp"
#include "laghawkes/likelihood.hpp"
#include "laghawkes/parallel.hpp"
#include "laghawkes/simulate.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace laghawkes;

namespace {

EventSequence make_sequence(const std::vector<std::pair<double, int>>& events, double horizon,
                            int num_dims) {
  std::vector<Event> evs;
  evs.reserve(events.size());
  for (const auto& [t, u] : events) evs.push_back(Event{t, u});
  return EventSequence(std::move(evs), horizon, num_dims);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multivariate Hawkes processes with per-pair time lags";

  py::register_exception<NumericError>(m, "NumericError", PyExc_RuntimeError);

  py::class_<Event>(m, "Event")
      .def(py::init<double, int>(), py::arg("t"), py::arg("u"))
      .def_readwrite("t", &Event::t)
      .def_readwrite("u", &Event::u)
      .def("__repr__", [](const Event& e) {
        return "Event(t=" + std::to_string(e.t) + ", u=" + std::to_string(e.u) + ")";
      });

  py::class_<EventSequence>(m, "EventSequence")
      .def(py::init(&make_sequence), py::arg("events"), py::arg("horizon"), py::arg("num_dims"))
      .def_property_readonly("horizon", &EventSequence::horizon)
      .def_property_readonly("num_dims", &EventSequence::num_dims)
      .def("__len__", &EventSequence::size)
      .def("times_of", &EventSequence::times_of, py::arg("u"))
      .def("counts", &EventSequence::counts)
      .def_property_readonly("events", [](const EventSequence& s) {
        std::vector<std::pair<double, int>> out;
        out.reserve(s.size());
        for (const Event& e : s.events()) out.emplace_back(e.t, e.u);
        return out;
      });

  py::class_<CausalGraph>(m, "CausalGraph")
      .def(py::init([](const MaskMat& adjacency) {
             CausalGraph g{adjacency};
             g.validate();
             return g;
           }),
           py::arg("adjacency"))
      .def_static("full", &CausalGraph::full, py::arg("num_dims"))
      .def_static("none", &CausalGraph::none, py::arg("num_dims"))
      .def_readwrite("adjacency", &CausalGraph::adjacency)
      .def_property_readonly("num_dims", &CausalGraph::num_dims)
      .def("allowed", &CausalGraph::allowed, py::arg("u"), py::arg("v"));

  py::class_<ModelParams>(m, "ModelParams")
      .def(py::init([](const Vec& mu, const Mat& A, const Mat& B, const Mat& D) {
             ModelParams p{mu, A, B, D};
             p.validate();
             return p;
           }),
           py::arg("mu"), py::arg("A"), py::arg("beta"), py::arg("delta"))
      .def_readwrite("mu", &ModelParams::mu)
      .def_readwrite("A", &ModelParams::A)
      .def_readwrite("B", &ModelParams::B)
      .def_readwrite("D", &ModelParams::D)
      .def_property_readonly("num_dims", &ModelParams::num_dims)
      .def("validate", [](const ModelParams& p) { p.validate(); });

  py::enum_<LagFamily>(m, "LagFamily")
      .value("ExponentialRate", LagFamily::ExponentialRate)
      .value("Gaussian", LagFamily::Gaussian)
      .value("LogNormal", LagFamily::LogNormal);

  py::class_<LagPosterior>(m, "LagPosterior")
      .def(py::init([](LagFamily family, const Mat& p1, const Mat& p2) {
             LagPosterior q{family, p1, p2};
             return q;
           }),
           py::arg("family"), py::arg("p1"), py::arg("p2"))
      .def_static("constant", &LagPosterior::constant, py::arg("family"), py::arg("num_dims"),
                  py::arg("p1"), py::arg("p2"), py::arg("graph"))
      .def_static("point_mass", &LagPosterior::point_mass, py::arg("delays"), py::arg("graph"))
      .def_readwrite("family", &LagPosterior::family)
      .def_readwrite("p1", &LagPosterior::p1)
      .def_readwrite("p2", &LagPosterior::p2)
      .def("mean", py::overload_cast<int, int>(&LagPosterior::mean, py::const_), py::arg("u"),
           py::arg("v"))
      .def("mean_matrix", &LagPosterior::mean_matrix);

  py::class_<SimConfig>(m, "SimConfig")
      .def(py::init([](double horizon, std::uint64_t seed, std::size_t max_events) {
             return SimConfig{horizon, seed, max_events};
           }),
           py::arg("horizon"), py::arg("seed") = 0, py::arg("max_events") = 1'000'000)
      .def_readwrite("horizon", &SimConfig::horizon)
      .def_readwrite("seed", &SimConfig::seed)
      .def_readwrite("max_events", &SimConfig::max_events);

  py::class_<LikelihoodBreakdown>(m, "LikelihoodBreakdown")
      .def_readonly("per_dim", &LikelihoodBreakdown::per_dim)
      .def_readonly("event_term", &LikelihoodBreakdown::event_term)
      .def_readonly("compensator", &LikelihoodBreakdown::compensator)
      .def_readonly("total", &LikelihoodBreakdown::total);

  py::class_<GradientRecord>(m, "GradientRecord")
      .def_readonly("mu", &GradientRecord::mu)
      .def_readonly("A", &GradientRecord::A)
      .def_readonly("B", &GradientRecord::B)
      .def_readonly("D", &GradientRecord::D);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("step_size", &TrainConfig::step_size)
      .def_readwrite("iterations", &TrainConfig::iterations)
      .def_readwrite("minibatch", &TrainConfig::minibatch)
      .def_readwrite("mc_samples", &TrainConfig::mc_samples)
      .def_readwrite("kl_weight", &TrainConfig::kl_weight)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("tolerance", &TrainConfig::tolerance)
      .def_readwrite("ma_window", &TrainConfig::ma_window)
      .def_readwrite("final_mc_samples", &TrainConfig::final_mc_samples)
      .def_readwrite("log_every", &TrainConfig::log_every);

  py::class_<EncoderParams>(m, "EncoderParams")
      .def_static("init", &EncoderParams::init, py::arg("family"), py::arg("d_model"),
                  py::arg("num_dims"), py::arg("seed"))
      .def_readwrite("family", &EncoderParams::family)
      .def_readwrite("d_model", &EncoderParams::d_model)
      .def_readwrite("type_embedding", &EncoderParams::type_embedding)
      .def_readwrite("head_w1", &EncoderParams::head_w1)
      .def_readwrite("head_b1", &EncoderParams::head_b1)
      .def_readwrite("head_w2", &EncoderParams::head_w2)
      .def_readwrite("head_b2", &EncoderParams::head_b2)
      .def_readwrite("use_time_embedding", &EncoderParams::use_time_embedding)
      .def_readwrite("use_type_embedding", &EncoderParams::use_type_embedding);

  py::class_<FitResult>(m, "FitResult")
      .def_readonly("params", &FitResult::params)
      .def_readonly("posterior", &FitResult::posterior)
      .def_readonly("per_sequence", &FitResult::per_sequence)
      .def_readonly("encoder", &FitResult::encoder)
      .def_readonly("has_encoder", &FitResult::has_encoder)
      .def_readonly("objective_trace", &FitResult::objective_trace)
      .def_readonly("wall_clock_sec", &FitResult::wall_clock_sec)
      .def_readonly("converged", &FitResult::converged)
      .def_readonly("final_grad_norm", &FitResult::final_grad_norm)
      .def_readonly("final_elbo", &FitResult::final_elbo)
      .def_readonly("clip_fraction", &FitResult::clip_fraction)
      .def_readonly("diagnostics", &FitResult::diagnostics);

  py::class_<ElboResult>(m, "ElboResult")
      .def_readonly("value", &ElboResult::value)
      .def_readonly("decoder_grad", &ElboResult::decoder_grad)
      .def_readonly("q_grad_p1", &ElboResult::q_grad_p1)
      .def_readonly("q_grad_p2", &ElboResult::q_grad_p2)
      .def_readonly("clip_fraction", &ElboResult::clip_fraction);

  py::class_<SpectralRadiusResult>(m, "SpectralRadiusResult")
      .def_readonly("value", &SpectralRadiusResult::value)
      .def_readonly("stationary", &SpectralRadiusResult::stationary);

  py::class_<JumpTrace>(m, "JumpTrace")
      .def(py::init([](std::vector<std::vector<double>> times,
                       std::vector<std::vector<double>> magnitudes) {
             JumpTrace t{std::move(times), std::move(magnitudes)};
             t.validate();
             return t;
           }),
           py::arg("times"), py::arg("magnitudes"))
      .def_readonly("times", &JumpTrace::times)
      .def_readonly("magnitudes", &JumpTrace::magnitudes);

  py::class_<SimulationTrace>(m, "SimulationTrace")
      .def_readonly("seq", &SimulationTrace::seq)
      .def_readonly("jumps", &SimulationTrace::jumps);

  // core
  m.def("kernel_value", &kernel_value, py::arg("a"), py::arg("beta"), py::arg("delta"),
        py::arg("elapsed"));
  m.def("kernel_l1_norm", &kernel_l1_norm, py::arg("a"), py::arg("beta"));
  m.def("apply_mask", &apply_mask, py::arg("params"), py::arg("graph"));

  // simulate
  m.def("simulate", &simulate, py::arg("params"), py::arg("graph"), py::arg("cfg"));
  m.def("simulate_with_trace", &simulate_with_trace, py::arg("params"), py::arg("graph"),
        py::arg("cfg"));
  m.def("intensity_upper_bound", &intensity_upper_bound, py::arg("params"), py::arg("history"),
        py::arg("t_now"), py::arg("window_end"));
  m.def("predict_rollout", &predict_rollout, py::arg("params"), py::arg("lag_sample"),
        py::arg("graph"), py::arg("history"), py::arg("horizon_extension"), py::arg("seed"),
        py::arg("max_events") = 1'000'000);
  m.def("predict_next_event_time", &predict_next_event_time, py::arg("params"),
        py::arg("posterior"), py::arg("graph"), py::arg("history"), py::arg("u"),
        py::arg("n_samples"), py::arg("seed"), py::arg("extension"));
  m.def("sample_lags", &sample_lags, py::arg("posterior"), py::arg("graph"), py::arg("seed"),
        py::arg("stream") = 0);

  // likelihood
  m.def("intensity_at", &intensity_at, py::arg("params"), py::arg("seq"), py::arg("u"),
        py::arg("t"));
  m.def("compensator", &compensator, py::arg("params"), py::arg("seq"), py::arg("u"),
        py::arg("t_end"));
  m.def(
      "log_likelihood",
      [](const ModelParams& p, const std::vector<EventSequence>& seqs, bool recursive) {
        return log_likelihood(p, seqs, recursive ? EvalMode::Recursive : EvalMode::Direct);
      },
      py::arg("params"), py::arg("seqs"), py::arg("recursive") = false);
  m.def("grad_log_likelihood", &grad_log_likelihood, py::arg("params"), py::arg("seqs"));

  // infer
  m.def("time_embedding", &time_embedding, py::arg("t"), py::arg("d_model"));
  m.def("sequence_embedding", &sequence_embedding, py::arg("seq"), py::arg("enc"), py::arg("u"));
  m.def("encode_posterior", &encode_posterior, py::arg("seq"), py::arg("enc"), py::arg("graph"));
  m.def("kl_divergence",
        py::overload_cast<LagFamily, double, double, double, double>(&kl_divergence),
        py::arg("family"), py::arg("q1"), py::arg("q2"), py::arg("p1"), py::arg("p2"));
  m.def("reparam_sample", py::overload_cast<LagFamily, double, double, double>(&reparam_sample),
        py::arg("family"), py::arg("p1"), py::arg("p2"), py::arg("noise"));
  m.def("elbo",
        py::overload_cast<const std::vector<EventSequence>&, const ModelParams&,
                          const LagPosterior&, const LagPosterior&, const CausalGraph&,
                          const TrainConfig&>(&elbo),
        py::arg("seqs"), py::arg("params"), py::arg("posterior"), py::arg("prior"),
        py::arg("graph"), py::arg("cfg"));
  m.def("elbo_amortized",
        py::overload_cast<const std::vector<EventSequence>&, const ModelParams&,
                          const EncoderParams&, const CausalGraph&, const LagPosterior&,
                          const TrainConfig&>(&elbo),
        py::arg("seqs"), py::arg("params"), py::arg("enc"), py::arg("graph"), py::arg("prior"),
        py::arg("cfg"));
  m.def("fit_mle", &fit_mle, py::arg("seqs"), py::arg("graph"), py::arg("init"), py::arg("cfg"),
        py::call_guard<py::gil_scoped_release>());
  m.def("fit_vi", &fit_vi, py::arg("seqs"), py::arg("graph"), py::arg("init"), py::arg("prior"),
        py::arg("cfg"), py::call_guard<py::gil_scoped_release>());
  m.def("fit_vae", &fit_vae, py::arg("seqs"), py::arg("graph"), py::arg("init"),
        py::arg("enc_init"), py::arg("prior"), py::arg("cfg"),
        py::call_guard<py::gil_scoped_release>());
  m.def("default_init", &default_init, py::arg("seqs"), py::arg("graph"), py::arg("prior"));

  // identify
  m.def("spectral_radius", &spectral_radius, py::arg("params"));
  m.def("recover_mu", &recover_mu, py::arg("jumps"), py::arg("first_arrival_times"),
        py::arg("pre_first_intensity"));
  m.def("delay_shift_candidates", &delay_shift_candidates, py::arg("jump_times"),
        py::arg("source_events"), py::arg("tol") = 1e-9);
  m.def("recover_delays_from_jumps", &recover_delays_from_jumps, py::arg("source_events"),
        py::arg("jumps"), py::arg("graph"), py::arg("tol") = 1e-9);
  m.def("absolute_error_rate",
        py::overload_cast<const Mat&, const Mat&, const MaskMat&>(&absolute_error_rate),
        py::arg("learned"), py::arg("truth"), py::arg("mask"));
  m.def("rmse", &rmse, py::arg("predicted"), py::arg("actual"));

  // io
  m.def("save_params", &save_params, py::arg("path"), py::arg("params"), py::arg("graph"));
  m.def("load_params", &load_params, py::arg("path"));
  m.def("save_sequences", &save_sequences, py::arg("path"), py::arg("seqs"));
  m.def("load_sequences", &load_sequences, py::arg("path"));
  m.def("holdout_start", &holdout_start, py::arg("n"), py::arg("fraction"));

  m.def("set_thread_count", &set_thread_count, py::arg("n"));
  m.def("thread_count", &thread_count);
}
