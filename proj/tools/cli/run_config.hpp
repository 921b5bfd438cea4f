#pragma once

#include <bmsvm/learners.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace bmsvm::cli {

enum class Method { map, bmsvm };
enum class ThetaMode { fixed, grid, mh };

/// Everything a train or eval run depends on. Built from a flat TOML file and
/// then overridden by command-line flags.
struct RunConfig {
    std::string data;
    /// Header name, or a 0-based index written as a number.
    std::string label = "-1";
    char delimiter = ',';
    bool header = true;

    Method method = Method::bmsvm;
    ThetaMode theta_mode = ThetaMode::fixed;
    double theta = 1.0;
    std::vector<double> theta_grid;
    int cv_folds = 5;

    Hyperparams hyper;
    SamplerSchedule schedule;
    MapConfig map;
    bool warm_start = false;

    Protocol protocol = Protocol::loo;
    long n_train = 0;
    int n_repeats = 1;

    std::uint64_t seed = 1;
    int jobs = 1;
    std::string out = "bmsvm-out";
    bool trace = false;

    /// Throws ParameterError on the first inconsistency.
    void validate() const;
};

/// Reads a TOML file. Unknown keys, wrong types, and more than one of
/// theta / theta_grid / theta_mh are config errors.
RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const std::string& toml_text, const std::string& source = "<string>");

/// "3.5" (fixed), "2,3.5,5" (grid) or "mh".
void apply_theta_flag(RunConfig& cfg, const std::string& value);
/// "M1,M2,M".
SamplerSchedule parse_schedule(const std::string& value);
ShapeMode parse_shape_mode(const std::string& value);
Method parse_method(const std::string& value);

std::string method_name(Method m);
std::string theta_mode_name(ThetaMode m);
std::string shape_mode_name(ShapeMode m);
/// "M1/M2/M".
std::string schedule_string(const SamplerSchedule& s);

/// Canonical, key-sorted JSON of the resolved config. Hashing this text gives
/// the manifest's config hash.
std::string canonical_config(const RunConfig& cfg);
std::uint64_t fnv1a64(const std::string& text);

/// `path` as given if it exists, else $BMSVM_DATA_DIR/path when that exists.
std::string resolve_data_path(const std::string& path);

/// Label selector from the config string: integers are column indices.
ColumnRef label_ref(const std::string& label);

BmsvmConfig sampler_config(const RunConfig& cfg);

} // namespace bmsvm::cli
