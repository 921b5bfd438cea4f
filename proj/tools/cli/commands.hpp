#pragma once

#include "run_config.hpp"

#include <bmsvm/dataset.hpp>
#include <bmsvm/prediction.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace bmsvm::cli {

inline constexpr const char* model_format = "bmsvm-model/1";

/// Contents of model.json.
struct ModelFile {
    Method method = Method::bmsvm;
    ThetaMode theta_mode = ThetaMode::fixed;
    std::string label_name;
    std::vector<std::string> label_vocabulary;
    std::vector<std::string> feature_names;
    StandardizationStats stats;
    /// Standardized training inputs and the retained samples.
    FittedModel model;
};

std::string model_to_json(const ModelFile& m);
/// Throws ParseError on malformed documents.
ModelFile model_from_json(const std::string& text);

/// Fits on the whole dataset: out/model.json, out/manifest.json and, with
/// trace = true, out/trace.csv.
void cmd_train(const RunConfig& cfg, std::ostream& log);

/// Writes the prediction CSV for `data_path` to `out`.
void cmd_predict(const std::string& model_path, const std::string& data_path, char delimiter,
                 std::ostream& out);

/// out/eval.json, out/summary.csv and out/manifest.json. A failed run still
/// writes eval.json with "status": "failed" before rethrowing.
EvalResult cmd_eval(const RunConfig& cfg, std::ostream& log);

/// 0 success, 1 usage/config, 2 data, 3 numerical.
int exit_code_for(const std::exception& e);

std::string manifest_json(const RunConfig& cfg, const std::string& command);

} // namespace bmsvm::cli
