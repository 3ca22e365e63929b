#pragma once

#include "laghawkes/infer.hpp"
#include "laghawkes/types.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <utility>
#include <vector>

namespace laghawkes {

using json = nlohmann::json;

/// ModelParams document: {"U", "mu", "A", "beta", "delta", "mask"} with
/// row index = target dimension, column = source.
json params_to_json(const ModelParams& params, const CausalGraph& graph);
std::pair<ModelParams, CausalGraph> params_from_json(const json& j);
void save_params(const std::string& path, const ModelParams& params, const CausalGraph& graph);
std::pair<ModelParams, CausalGraph> load_params(const std::string& path);

/// One JSON Lines record per sequence:
/// {"seq_id", "T", "U", "events": [{"t", "u"}, ...]} with events time-sorted.
json sequence_to_json(const std::string& seq_id, const EventSequence& seq);
std::pair<std::string, EventSequence> sequence_from_json(const json& j);
void save_sequences(const std::string& path,
                    const std::vector<std::pair<std::string, EventSequence>>& seqs);
/// Throws IoError naming the path and 1-based line of the first bad record.
std::vector<std::pair<std::string, EventSequence>> load_sequences(const std::string& path);

json posterior_to_json(const LagPosterior& q);
LagPosterior posterior_from_json(const json& j);

json encoder_to_json(const EncoderParams& enc);
EncoderParams encoder_from_json(const json& j);

/// FitResult document: the params document plus posterior, objective trace
/// and converged flag (wall-clock intentionally excluded so outputs are
/// byte-stable under a fixed seed).
json fit_result_to_json(const FitResult& fit, const CausalGraph& graph);
FitResult fit_result_from_json(const json& j, CausalGraph& graph_out);

json metric_json(const std::string& metric, double value, const json& detail = json::object());

json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const json& j);

/// Index of the first held-out sequence for a trailing-fraction split.
std::size_t holdout_start(std::size_t n, double fraction);

}  // namespace laghawkes
