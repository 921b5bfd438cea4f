#include "run_config.hpp"

#include <bmsvm/error.hpp>

#include <nlohmann/json.hpp>
#include <toml.hpp>

#include <charconv>
#include <fstream>
#include <limits>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>

namespace bmsvm::cli {

namespace {

[[noreturn]] void config_error(const std::string& msg) {
    throw ParameterError("config: " + msg);
}

double to_double(const std::string& text, const std::string& what) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = first + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) {
        config_error(what + ": '" + text + "' is not a number");
    }
    return v;
}

int to_int(const std::string& text, const std::string& what) {
    int v = 0;
    const char* first = text.data();
    const char* last = first + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) {
        config_error(what + ": '" + text + "' is not an integer");
    }
    return v;
}

std::vector<std::string> split_commas(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(item);
    }
    return out;
}

template <class T>
T get(const toml::node& node, const std::string& key) {
    if constexpr (std::is_same_v<T, double>) {
        if (auto v = node.value<double>()) {
            return *v;
        }
    } else if constexpr (std::is_same_v<T, std::int64_t>) {
        if (auto v = node.value_exact<std::int64_t>()) {
            return *v;
        }
    } else {
        if (auto v = node.value_exact<T>()) {
            return *v;
        }
    }
    config_error("key '" + key + "' has the wrong type");
}

int get_int(const toml::node& node, const std::string& key) {
    const auto v = get<std::int64_t>(node, key);
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
        config_error("key '" + key + "' is out of range");
    }
    return static_cast<int>(v);
}

} // namespace

void RunConfig::validate() const {
    if (data.empty()) {
        config_error("no dataset given (key 'data')");
    }
    hyper.validate();
    schedule.validate();
    map.validate();
    if (theta_mode == ThetaMode::fixed && !(theta > 0.0)) {
        config_error("theta must be positive");
    }
    if (theta_mode == ThetaMode::grid) {
        if (theta_grid.empty()) {
            config_error("theta_grid is empty");
        }
        for (double t : theta_grid) {
            if (!(t > 0.0)) {
                config_error("theta_grid entries must be positive");
            }
        }
        if (cv_folds < 2) {
            config_error("cv_folds must be at least 2");
        }
    }
    if (theta_mode == ThetaMode::mh && method == Method::map) {
        config_error("theta_mh needs method = \"bmsvm\"");
    }
    if (protocol == Protocol::split && (n_train < 1 || n_repeats < 1)) {
        config_error("split protocol needs n_train >= 1 and n_repeats >= 1");
    }
    if (jobs < 1) {
        config_error("jobs must be at least 1");
    }
}

RunConfig parse_run_config(const std::string& toml_text, const std::string& source) {
    toml::table tbl;
    try {
        tbl = toml::parse(toml_text, source);
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << source << ":" << e.source().begin.line << ": " << e.description();
        config_error(os.str());
    }

    RunConfig cfg;
    int theta_modes = 0;
    using Handler = std::function<void(const toml::node&, const std::string&)>;
    const std::map<std::string, Handler> handlers = {
        {"data", [&](const auto& n, const auto& k) { cfg.data = get<std::string>(n, k); }},
        {"label",
         [&](const auto& n, const auto& k) {
             if (auto i = n.template value_exact<std::int64_t>()) {
                 cfg.label = std::to_string(*i);
             } else {
                 cfg.label = get<std::string>(n, k);
             }
         }},
        {"delimiter",
         [&](const auto& n, const auto& k) {
             const auto d = get<std::string>(n, k);
             if (d.size() != 1) {
                 config_error("delimiter must be a single character");
             }
             cfg.delimiter = d[0];
         }},
        {"header", [&](const auto& n, const auto& k) { cfg.header = get<bool>(n, k); }},
        {"method", [&](const auto& n, const auto& k) { cfg.method = parse_method(get<std::string>(n, k)); }},
        {"theta",
         [&](const auto& n, const auto& k) {
             cfg.theta_mode = ThetaMode::fixed;
             cfg.theta = get<double>(n, k);
             ++theta_modes;
         }},
        {"theta_grid",
         [&](const auto& n, const auto& k) {
             const auto* arr = n.as_array();
             if (!arr) {
                 config_error("theta_grid must be an array");
             }
             cfg.theta_grid.clear();
             for (const auto& e : *arr) {
                 cfg.theta_grid.push_back(get<double>(e, k));
             }
             cfg.theta_mode = ThetaMode::grid;
             ++theta_modes;
         }},
        {"theta_mh",
         [&](const auto& n, const auto& k) {
             if (get<bool>(n, k)) {
                 cfg.theta_mode = ThetaMode::mh;
                 ++theta_modes;
             }
         }},
        {"theta_lo", [&](const auto& n, const auto& k) { cfg.hyper.theta_lo = get<double>(n, k); }},
        {"theta_hi", [&](const auto& n, const auto& k) { cfg.hyper.theta_hi = get<double>(n, k); }},
        {"cv_folds", [&](const auto& n, const auto& k) { cfg.cv_folds = get_int(n, k); }},
        {"eta", [&](const auto& n, const auto& k) { cfg.hyper.eta = get<double>(n, k); }},
        {"a_sigma", [&](const auto& n, const auto& k) { cfg.hyper.a_sigma = get<double>(n, k); }},
        {"b_sigma", [&](const auto& n, const auto& k) { cfg.hyper.b_sigma = get<double>(n, k); }},
        {"a_tau", [&](const auto& n, const auto& k) { cfg.hyper.a_tau = get<double>(n, k); }},
        {"b_tau", [&](const auto& n, const auto& k) { cfg.hyper.b_tau = get<double>(n, k); }},
        {"z_proposal_sd", [&](const auto& n, const auto& k) { cfg.hyper.z_proposal_sd = get<double>(n, k); }},
        {"theta_proposal_sd",
         [&](const auto& n, const auto& k) { cfg.hyper.theta_proposal_sd = get<double>(n, k); }},
        {"shape_mode",
         [&](const auto& n, const auto& k) { cfg.hyper.shape_mode = parse_shape_mode(get<std::string>(n, k)); }},
        {"m1", [&](const auto& n, const auto& k) { cfg.schedule.m1 = get_int(n, k); }},
        {"m2", [&](const auto& n, const auto& k) { cfg.schedule.m2 = get_int(n, k); }},
        {"thin", [&](const auto& n, const auto& k) { cfg.schedule.thin = get_int(n, k); }},
        {"lambda", [&](const auto& n, const auto& k) { cfg.map.lambda = get<double>(n, k); }},
        {"map_max_iters", [&](const auto& n, const auto& k) { cfg.map.max_iters = get_int(n, k); }},
        {"warm_start", [&](const auto& n, const auto& k) { cfg.warm_start = get<bool>(n, k); }},
        {"protocol",
         [&](const auto& n, const auto& k) {
             const auto p = get<std::string>(n, k);
             if (p == "loo") {
                 cfg.protocol = Protocol::loo;
             } else if (p == "split") {
                 cfg.protocol = Protocol::split;
             } else {
                 config_error("protocol must be \"loo\" or \"split\", got \"" + p + "\"");
             }
         }},
        {"n_train", [&](const auto& n, const auto& k) { cfg.n_train = get<std::int64_t>(n, k); }},
        {"n_repeats", [&](const auto& n, const auto& k) { cfg.n_repeats = get_int(n, k); }},
        {"seed",
         [&](const auto& n, const auto& k) {
             const auto s = get<std::int64_t>(n, k);
             if (s < 0) {
                 config_error("seed must be nonnegative");
             }
             cfg.seed = static_cast<std::uint64_t>(s);
         }},
        {"jobs", [&](const auto& n, const auto& k) { cfg.jobs = get_int(n, k); }},
        {"out", [&](const auto& n, const auto& k) { cfg.out = get<std::string>(n, k); }},
        {"trace", [&](const auto& n, const auto& k) { cfg.trace = get<bool>(n, k); }},
    };

    for (auto&& [key, node] : tbl) {
        const std::string k(key.str());
        const auto it = handlers.find(k);
        if (it == handlers.end()) {
            config_error("unknown key '" + k + "'");
        }
        it->second(node, k);
    }
    if (theta_modes > 1) {
        config_error("give exactly one of theta, theta_grid, theta_mh");
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        config_error("cannot open '" + path + "'");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str(), path);
}

void apply_theta_flag(RunConfig& cfg, const std::string& value) {
    if (value == "mh") {
        cfg.theta_mode = ThetaMode::mh;
        return;
    }
    const auto parts = split_commas(value);
    if (parts.size() == 1) {
        cfg.theta_mode = ThetaMode::fixed;
        cfg.theta = to_double(parts[0], "--theta");
        return;
    }
    cfg.theta_mode = ThetaMode::grid;
    cfg.theta_grid.clear();
    for (const auto& p : parts) {
        cfg.theta_grid.push_back(to_double(p, "--theta"));
    }
}

SamplerSchedule parse_schedule(const std::string& value) {
    const auto parts = split_commas(value);
    if (parts.size() != 3) {
        config_error("schedule must be M1,M2,M, got '" + value + "'");
    }
    SamplerSchedule s;
    s.m1 = to_int(parts[0], "schedule");
    s.m2 = to_int(parts[1], "schedule");
    s.thin = to_int(parts[2], "schedule");
    s.validate();
    return s;
}

ShapeMode parse_shape_mode(const std::string& value) {
    if (value == "paper") {
        return ShapeMode::paper;
    }
    if (value == "exact") {
        return ShapeMode::exact;
    }
    config_error("shape mode must be \"paper\" or \"exact\", got \"" + value + "\"");
}

Method parse_method(const std::string& value) {
    if (value == "map") {
        return Method::map;
    }
    if (value == "bmsvm") {
        return Method::bmsvm;
    }
    config_error("method must be \"map\" or \"bmsvm\", got \"" + value + "\"");
}

std::string method_name(Method m) {
    return m == Method::map ? "map" : "bmsvm";
}

std::string theta_mode_name(ThetaMode m) {
    switch (m) {
    case ThetaMode::fixed:
        return "fixed";
    case ThetaMode::grid:
        return "grid";
    case ThetaMode::mh:
        return "mh";
    }
    return "?";
}

std::string shape_mode_name(ShapeMode m) {
    return m == ShapeMode::paper ? "paper" : "exact";
}

std::string schedule_string(const SamplerSchedule& s) {
    std::ostringstream os;
    os << s.m1 << '/' << s.m2 << '/' << s.thin;
    return os.str();
}

std::string canonical_config(const RunConfig& cfg) {
    // nlohmann::json (not ordered_json) sorts keys.
    nlohmann::json j;
    j["data"] = cfg.data;
    j["label"] = cfg.label;
    j["delimiter"] = std::string(1, cfg.delimiter);
    j["header"] = cfg.header;
    j["method"] = method_name(cfg.method);
    j["theta_mode"] = theta_mode_name(cfg.theta_mode);
    if (cfg.theta_mode == ThetaMode::fixed) {
        j["theta"] = cfg.theta;
    }
    if (cfg.theta_mode == ThetaMode::grid) {
        j["theta_grid"] = cfg.theta_grid;
        j["cv_folds"] = cfg.cv_folds;
    }
    j["theta_lo"] = cfg.hyper.theta_lo;
    j["theta_hi"] = cfg.hyper.theta_hi;
    j["eta"] = cfg.hyper.eta;
    j["a_sigma"] = cfg.hyper.a_sigma;
    j["b_sigma"] = cfg.hyper.b_sigma;
    j["a_tau"] = cfg.hyper.a_tau;
    j["b_tau"] = cfg.hyper.b_tau;
    j["z_proposal_sd"] = cfg.hyper.z_proposal_sd;
    j["theta_proposal_sd"] = cfg.hyper.theta_proposal_sd;
    j["shape_mode"] = shape_mode_name(cfg.hyper.shape_mode);
    j["m1"] = cfg.schedule.m1;
    j["m2"] = cfg.schedule.m2;
    j["thin"] = cfg.schedule.thin;
    j["lambda"] = cfg.map.lambda;
    j["map_max_iters"] = cfg.map.max_iters;
    j["warm_start"] = cfg.warm_start;
    j["protocol"] = protocol_name(cfg.protocol);
    if (cfg.protocol == Protocol::split) {
        j["n_train"] = cfg.n_train;
        j["n_repeats"] = cfg.n_repeats;
    }
    j["seed"] = cfg.seed;
    return j.dump();
}

std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string resolve_data_path(const std::string& path) {
    namespace fs = std::filesystem;
    if (fs::exists(path)) {
        return path;
    }
    if (const char* root = std::getenv("BMSVM_DATA_DIR"); root && *root && fs::path(path).is_relative()) {
        const fs::path candidate = fs::path(root) / path;
        if (fs::exists(candidate)) {
            return candidate.string();
        }
    }
    return path;
}

ColumnRef label_ref(const std::string& label) {
    int idx = 0;
    const char* first = label.data();
    const char* last = first + label.size();
    const auto [ptr, ec] = std::from_chars(first, last, idx);
    if (!label.empty() && ec == std::errc() && ptr == last) {
        return idx;
    }
    return label;
}

BmsvmConfig sampler_config(const RunConfig& cfg) {
    BmsvmConfig b;
    b.hyper = cfg.hyper;
    b.options.schedule = cfg.schedule;
    b.options.sample_theta = cfg.theta_mode == ThetaMode::mh;
    if (cfg.theta_mode == ThetaMode::fixed) {
        b.theta = cfg.theta;
    }
    b.warm_start = cfg.warm_start;
    b.warm_start_map = cfg.map;
    return b;
}

} // namespace bmsvm::cli
