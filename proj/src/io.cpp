#include "laghawkes/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace laghawkes {

namespace {

json mat_to_json(const Mat& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Mat mat_from_json(const json& j, int rows, int cols, const std::string& name) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows)
    throw IoError(name + ": expected " + std::to_string(rows) + " rows");
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<int>(row.size()) != cols)
      throw IoError(name + ": expected " + std::to_string(cols) + " columns");
    for (int c = 0; c < cols; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  return in;
}

}  // namespace

json params_to_json(const ModelParams& params, const CausalGraph& graph) {
  params.validate(&graph);
  const int U = params.num_dims();
  json j;
  j["U"] = U;
  j["mu"] = std::vector<double>(params.mu.data(), params.mu.data() + U);
  j["A"] = mat_to_json(params.A);
  j["beta"] = mat_to_json(params.B);
  j["delta"] = mat_to_json(params.D);
  json mask = json::array();
  for (int u = 0; u < U; ++u) {
    json row = json::array();
    for (int v = 0; v < U; ++v) row.push_back(static_cast<bool>(graph.adjacency(u, v)));
    mask.push_back(std::move(row));
  }
  j["mask"] = std::move(mask);
  return j;
}

std::pair<ModelParams, CausalGraph> params_from_json(const json& j) {
  if (!j.contains("U")) throw IoError("params document: missing U");
  const int U = j.at("U").get<int>();
  if (U <= 0) throw IoError("params document: U must be positive");
  ModelParams p;
  const auto mu = j.at("mu").get<std::vector<double>>();
  if (static_cast<int>(mu.size()) != U) throw IoError("params document: mu length mismatch");
  p.mu = Eigen::Map<const Vec>(mu.data(), U);
  p.A = mat_from_json(j.at("A"), U, U, "A");
  p.B = mat_from_json(j.at("beta"), U, U, "beta");
  p.D = mat_from_json(j.at("delta"), U, U, "delta");
  CausalGraph g = CausalGraph::full(U);
  if (j.contains("mask")) {
    const auto& mask = j.at("mask");
    if (!mask.is_array() || static_cast<int>(mask.size()) != U)
      throw IoError("params document: mask shape mismatch");
    for (int u = 0; u < U; ++u)
      for (int v = 0; v < U; ++v)
        g.adjacency(u, v) = mask[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)].get<bool>();
  }
  p.validate(&g);
  return {std::move(p), std::move(g)};
}

void save_params(const std::string& path, const ModelParams& params, const CausalGraph& graph) {
  auto out = open_out(path);
  out << params_to_json(params, graph).dump(2) << "\n";
}

std::pair<ModelParams, CausalGraph> load_params(const std::string& path) {
  auto in = open_in(path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
  return params_from_json(j);
}

json sequence_to_json(const std::string& seq_id, const EventSequence& seq) {
  json events = json::array();
  for (const Event& e : seq.events()) events.push_back(json{{"t", e.t}, {"u", e.u}});
  return json{{"seq_id", seq_id}, {"T", seq.horizon()}, {"U", seq.num_dims()},
              {"events", std::move(events)}};
}

std::pair<std::string, EventSequence> sequence_from_json(const json& j) {
  const auto id = j.at("seq_id").get<std::string>();
  const double horizon = j.at("T").get<double>();
  const int U = j.at("U").get<int>();
  std::vector<Event> events;
  for (const auto& e : j.at("events"))
    events.push_back(Event{e.at("t").get<double>(), e.at("u").get<int>()});
  return {id, EventSequence(std::move(events), horizon, U)};
}

void save_sequences(const std::string& path,
                    const std::vector<std::pair<std::string, EventSequence>>& seqs) {
  auto out = open_out(path);
  for (const auto& [id, seq] : seqs) out << sequence_to_json(id, seq).dump() << "\n";
}

std::vector<std::pair<std::string, EventSequence>> load_sequences(const std::string& path) {
  auto in = open_in(path);
  std::vector<std::pair<std::string, EventSequence>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(sequence_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw IoError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

json posterior_to_json(const LagPosterior& q) {
  const int U = q.num_dims();
  const bool two = q.family != LagFamily::ExponentialRate;
  json params = json::array();
  for (int u = 0; u < U; ++u) {
    json row = json::array();
    for (int v = 0; v < U; ++v) {
      json record = json::array({q.p1(u, v)});
      if (two) record.push_back(q.p2(u, v));
      row.push_back(std::move(record));
    }
    params.push_back(std::move(row));
  }
  return json{{"family", lag_family_name(q.family)}, {"params", std::move(params)}};
}

LagPosterior posterior_from_json(const json& j) {
  LagPosterior q;
  q.family = lag_family_from_name(j.at("family").get<std::string>());
  const auto& params = j.at("params");
  const int U = static_cast<int>(params.size());
  if (U == 0) throw IoError("posterior: empty params");
  q.p1 = Mat::Zero(U, U);
  q.p2 = Mat::Zero(U, U);
  for (int u = 0; u < U; ++u) {
    const auto& row = params[static_cast<std::size_t>(u)];
    if (static_cast<int>(row.size()) != U) throw IoError("posterior: params must be U x U");
    for (int v = 0; v < U; ++v) {
      const auto& rec = row[static_cast<std::size_t>(v)];
      if (!rec.is_array() || rec.empty()) throw IoError("posterior: parameter record must be an array");
      q.p1(u, v) = rec[0].get<double>();
      if (rec.size() > 1) q.p2(u, v) = rec[1].get<double>();
    }
  }
  return q;
}

json encoder_to_json(const EncoderParams& enc) {
  return json{{"family", lag_family_name(enc.family)},
              {"d_model", enc.d_model},
              {"type_embedding", mat_to_json(enc.type_embedding)},
              {"w1", mat_to_json(enc.head_w1)},
              {"b1", mat_to_json(enc.head_b1)},
              {"w2", mat_to_json(enc.head_w2)},
              {"b2", mat_to_json(enc.head_b2)},
              {"use_time_embedding", enc.use_time_embedding},
              {"use_type_embedding", enc.use_type_embedding}};
}

EncoderParams encoder_from_json(const json& j) {
  EncoderParams enc;
  enc.family = lag_family_from_name(j.at("family").get<std::string>());
  enc.d_model = j.at("d_model").get<int>();
  const int U = static_cast<int>(j.at("w1").size());
  enc.type_embedding = mat_from_json(j.at("type_embedding"), enc.d_model, U, "type_embedding");
  enc.head_w1 = mat_from_json(j.at("w1"), U, U, "w1");
  enc.head_b1 = mat_from_json(j.at("b1"), U, U, "b1");
  enc.head_w2 = mat_from_json(j.at("w2"), U, U, "w2");
  enc.head_b2 = mat_from_json(j.at("b2"), U, U, "b2");
  enc.use_time_embedding = j.value("use_time_embedding", true);
  enc.use_type_embedding = j.value("use_type_embedding", true);
  enc.validate();
  return enc;
}

json fit_result_to_json(const FitResult& fit, const CausalGraph& graph) {
  json j = params_to_json(fit.params, graph);
  j["posterior"] = posterior_to_json(fit.posterior);
  j["objective_trace"] = fit.objective_trace;
  j["converged"] = fit.converged;
  j["final_grad_norm"] = fit.final_grad_norm;
  j["final_elbo"] = fit.final_elbo;
  j["clip_fraction"] = fit.clip_fraction;
  if (!fit.diagnostics.empty()) j["diagnostics"] = fit.diagnostics;
  if (fit.has_encoder) j["encoder"] = encoder_to_json(fit.encoder);
  if (!fit.per_sequence.empty()) {
    json per = json::array();
    for (const auto& q : fit.per_sequence) per.push_back(posterior_to_json(q));
    j["per_sequence_posteriors"] = std::move(per);
  }
  return j;
}

FitResult fit_result_from_json(const json& j, CausalGraph& graph_out) {
  FitResult fit;
  auto [params, graph] = params_from_json(j);
  fit.params = std::move(params);
  graph_out = std::move(graph);
  fit.posterior = posterior_from_json(j.at("posterior"));
  fit.objective_trace = j.value("objective_trace", std::vector<double>{});
  fit.converged = j.value("converged", false);
  fit.final_grad_norm = j.value("final_grad_norm", 0.0);
  fit.final_elbo = j.value("final_elbo", 0.0);
  fit.clip_fraction = j.value("clip_fraction", 0.0);
  fit.diagnostics = j.value("diagnostics", std::string{});
  if (j.contains("encoder")) {
    fit.encoder = encoder_from_json(j.at("encoder"));
    fit.has_encoder = true;
  }
  if (j.contains("per_sequence_posteriors"))
    for (const auto& q : j.at("per_sequence_posteriors"))
      fit.per_sequence.push_back(posterior_from_json(q));
  return fit;
}

json metric_json(const std::string& metric, double value, const json& detail) {
  return json{{"metric", metric}, {"value", value}, {"detail", detail}};
}

json train_config_to_json(const TrainConfig& cfg) {
  return json{{"step_size", cfg.step_size},
              {"iterations", cfg.iterations},
              {"minibatch", cfg.minibatch},
              {"mc_samples", cfg.mc_samples},
              {"kl_weight", cfg.kl_weight},
              {"seed", cfg.seed},
              {"tolerance", cfg.tolerance},
              {"ma_window", cfg.ma_window},
              {"final_mc_samples", cfg.final_mc_samples},
              {"log_every", cfg.log_every}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig cfg;
  cfg.step_size = j.value("step_size", cfg.step_size);
  cfg.iterations = j.value("iterations", cfg.iterations);
  cfg.minibatch = j.value("minibatch", cfg.minibatch);
  cfg.mc_samples = j.value("mc_samples", cfg.mc_samples);
  cfg.kl_weight = j.value("kl_weight", cfg.kl_weight);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.tolerance = j.value("tolerance", cfg.tolerance);
  cfg.ma_window = j.value("ma_window", cfg.ma_window);
  cfg.final_mc_samples = j.value("final_mc_samples", cfg.final_mc_samples);
  cfg.log_every = j.value("log_every", cfg.log_every);
  cfg.validate();
  return cfg;
}

std::size_t holdout_start(std::size_t n, double fraction) {
  detail::require(fraction >= 0.0 && fraction < 1.0, "holdout fraction must be in [0, 1)");
  const auto held = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
  return n - held;
}

}  // namespace laghawkes
