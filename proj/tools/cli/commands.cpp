#include "commands.hpp"

#include <bmsvm/error.hpp>
#include <bmsvm/learners.hpp>
#include <bmsvm/version.hpp>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>

namespace bmsvm::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

ojson vec_json(const Vector& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

ojson mat_json(const Matrix& m) {
    ojson rows = ojson::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        rows.push_back(vec_json(m.row(i).transpose()));
    }
    return rows;
}

Vector json_vec(const ojson& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Matrix json_mat(const ojson& j, Eigen::Index cols) {
    Matrix m(static_cast<Eigen::Index>(j.size()), cols);
    for (std::size_t i = 0; i < j.size(); ++i) {
        const Vector row = json_vec(j[i]);
        if (row.size() != cols) {
            throw ParseError("model file: ragged matrix", i + 1, 0);
        }
        m.row(static_cast<Eigen::Index>(i)) = row.transpose();
    }
    return m;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) {
        throw ParseError("cannot write '" + path.string() + "'", 0, 0);
    }
}

CsvOptions csv_options(const RunConfig& cfg) {
    CsvOptions o;
    o.delimiter = cfg.delimiter;
    o.header = cfg.header;
    return o;
}

RawDataset load_dataset(const RunConfig& cfg) {
    return load_csv(resolve_data_path(cfg.data), label_ref(cfg.label), csv_options(cfg));
}

/// Fit at one theta value, by MAP or by the sampler.
ThetaTrainer theta_trainer(const RunConfig& cfg) {
    return [cfg](const TrainingSet& ts, double theta, std::uint64_t seed) {
        if (cfg.method == Method::map) {
            return fit_map(ts, theta, cfg.map);
        }
        BmsvmConfig b = sampler_config(cfg);
        b.theta = theta;
        b.options.sample_theta = false;
        return fit_bmsvm(ts, b, seed);
    };
}

/// Stream for the inner theta cross-validation, so it never shares draws with the final fit.
constexpr std::uint64_t grid_stream = 0x47524944;

/// Trainer honoring the configured theta mode.
Trainer make_trainer(const RunConfig& cfg) {
    switch (cfg.theta_mode) {
    case ThetaMode::fixed:
        return [cfg, fit = theta_trainer(cfg)](const TrainingSet& ts, std::uint64_t seed) {
            return fit(ts, cfg.theta, seed);
        };
    case ThetaMode::grid:
        return [cfg, fit = theta_trainer(cfg)](const TrainingSet& ts, std::uint64_t seed) {
            const ThetaSelection sel =
                select_theta_by_cv(ts, cfg.theta_grid, fit, derive_seed(seed, grid_stream), cfg.cv_folds);
            return fit(ts, sel.theta, seed);
        };
    case ThetaMode::mh:
        return [cfg](const TrainingSet& ts, std::uint64_t seed) {
            return fit_bmsvm(ts, sampler_config(cfg), seed);
        };
    }
    throw ParameterError("unknown theta mode");
}

std::string error_kind(const std::exception& e) {
    if (const auto* be = dynamic_cast<const Error*>(&e)) {
        switch (be->category()) {
        case ErrorCategory::config:
            return "config";
        case ErrorCategory::data:
            return "data";
        case ErrorCategory::numerical:
            return "numerical";
        case ErrorCategory::internal:
            return "internal";
        }
    }
    return "internal";
}

} // namespace

std::string model_to_json(const ModelFile& m) {
    ojson j;
    j["format"] = model_format;
    j["version"] = version_string;
    j["method"] = method_name(m.method);
    j["theta_mode"] = theta_mode_name(m.theta_mode);
    j["label_name"] = m.label_name;
    j["label_vocabulary"] = m.label_vocabulary;
    j["feature_names"] = m.feature_names;
    j["standardization"] = {{"convention", "population"},
                            {"means", vec_json(m.stats.means)},
                            {"sds", vec_json(m.stats.sds)}};
    j["num_classes"] = m.model.num_classes;
    j["train_inputs"] = mat_json(m.model.train_inputs);
    const auto& s = m.model.samples;
    j["z_proposed"] = s.z_proposed;
    j["z_accepted"] = s.z_accepted;
    j["theta_proposed"] = s.theta_proposed;
    j["theta_accepted"] = s.theta_accepted;
    ojson records = ojson::array();
    for (const auto& r : s.records) {
        records.push_back({{"sweep", r.sweep},
                           {"sigma2", r.sigma2},
                           {"tau", r.tau},
                           {"theta", r.theta},
                           {"log_likelihood", r.log_likelihood},
                           {"w0", vec_json(r.w0)},
                           {"w", mat_json(r.w)}});
    }
    j["samples"] = std::move(records);
    return j.dump(1) + "\n";
}

ModelFile model_from_json(const std::string& text) {
    ojson j;
    try {
        j = ojson::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("model file: ") + e.what(), 0, e.byte);
    }
    try {
        if (j.at("format").get<std::string>() != model_format) {
            throw ParseError("model file: unsupported format '" + j.at("format").get<std::string>() + "'", 0, 0);
        }
        ModelFile m;
        m.method = parse_method(j.at("method").get<std::string>());
        const auto mode = j.at("theta_mode").get<std::string>();
        m.theta_mode = mode == "mh" ? ThetaMode::mh : mode == "grid" ? ThetaMode::grid : ThetaMode::fixed;
        m.label_name = j.at("label_name").get<std::string>();
        m.label_vocabulary = j.at("label_vocabulary").get<std::vector<std::string>>();
        m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        m.stats.means = json_vec(j.at("standardization").at("means"));
        m.stats.sds = json_vec(j.at("standardization").at("sds"));
        const Eigen::Index p = m.stats.means.size();
        m.model.num_classes = j.at("num_classes").get<int>();
        m.model.train_inputs = json_mat(j.at("train_inputs"), p);
        auto& s = m.model.samples;
        s.z_proposed = j.at("z_proposed").get<long>();
        s.z_accepted = j.at("z_accepted").get<long>();
        s.theta_proposed = j.at("theta_proposed").get<long>();
        s.theta_accepted = j.at("theta_accepted").get<long>();
        for (const auto& r : j.at("samples")) {
            SampleRecord rec;
            rec.sweep = r.at("sweep").get<long>();
            rec.sigma2 = r.at("sigma2").get<double>();
            rec.tau = r.at("tau").get<double>();
            rec.theta = r.at("theta").get<double>();
            rec.log_likelihood = r.at("log_likelihood").get<double>();
            rec.w0 = json_vec(r.at("w0"));
            rec.w = json_mat(r.at("w"), m.model.num_classes);
            if (rec.w0.size() != m.model.num_classes || rec.w.rows() != m.model.train_inputs.rows()) {
                throw ParseError("model file: sample shapes disagree with the training inputs", 0, 0);
            }
            s.records.push_back(std::move(rec));
        }
        if (s.records.empty()) {
            throw ParseError("model file: no samples", 0, 0);
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model file: ") + e.what(), 0, 0);
    }
}

std::string manifest_json(const RunConfig& cfg, const std::string& command) {
    const std::string canon = canonical_config(cfg);
    std::ostringstream hash;
    hash << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(canon);
    ojson j;
    j["command"] = command;
    j["config_hash"] = "fnv1a64:" + hash.str();
    j["seed"] = cfg.seed;
    j["version"] = version_string;
    j["jobs"] = cfg.jobs;
    j["config"] = ojson::parse(canon);
    return j.dump(2) + "\n";
}

void cmd_train(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    const RawDataset ds = load_dataset(cfg);
    const StandardizationStats stats = StandardizationStats::fit(ds.features);
    const TrainingSet ts(stats.apply(ds.features), ds.labels, ds.num_classes());

    ModelFile m;
    m.method = cfg.method;
    m.theta_mode = cfg.theta_mode;
    m.label_name = ds.label_name;
    m.label_vocabulary = ds.label_vocabulary;
    m.feature_names = ds.feature_names;
    m.stats = stats;
    m.model = make_trainer(cfg)(ts, cfg.seed);

    const fs::path out(cfg.out);
    fs::create_directories(out);
    write_file(out / "model.json", model_to_json(m));
    write_file(out / "manifest.json", manifest_json(cfg, "train"));
    if (cfg.trace && cfg.method == Method::bmsvm) {
        std::ostringstream trace;
        write_trace_csv(trace, m.model.samples);
        write_file(out / "trace.csv", trace.str());
    }
    log << "trained " << method_name(cfg.method) << " on " << ds.n() << " rows, "
        << m.model.samples.records.size() << " retained sample(s) -> " << (out / "model.json").string()
        << '\n';
}

void cmd_predict(const std::string& model_path, const std::string& data_path, char delimiter,
                 std::ostream& out) {
    std::ifstream in(model_path);
    if (!in) {
        throw ParseError("cannot open model file '" + model_path + "'", 0, 0);
    }
    std::stringstream text;
    text << in.rdbuf();
    const ModelFile m = model_from_json(text.str());

    CsvOptions opts;
    opts.delimiter = delimiter;
    const Matrix x = load_features_csv(resolve_data_path(data_path), opts, m.label_name);
    std::vector<Prediction> preds;
    if (x.rows() > 0) {
        if (x.cols() != m.stats.means.size()) {
            std::ostringstream os;
            os << data_path << ": model expects " << m.stats.means.size() << " features, found " << x.cols();
            throw ShapeError(os.str());
        }
        preds = predict_batch(m.stats.apply(x), m.model);
    }
    write_predictions_csv(out, preds, m.model.num_classes, m.label_vocabulary);
}

EvalResult cmd_eval(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    const fs::path out(cfg.out);
    fs::create_directories(out);
    write_file(out / "manifest.json", manifest_json(cfg, "eval"));

    std::map<std::string, std::string> meta = {
        {"dataset", cfg.data},
        {"method", method_name(cfg.method)},
        {"theta_mode", theta_mode_name(cfg.theta_mode)},
        {"schedule", schedule_string(cfg.schedule)},
        {"shape_mode", shape_mode_name(cfg.hyper.shape_mode)},
        {"version", version_string},
    };
    if (cfg.theta_mode == ThetaMode::fixed) {
        std::ostringstream os;
        os << cfg.theta;
        meta["theta"] = os.str();
    }

    std::mutex log_mutex;
    int last_reported = -1;
    const ProgressFn progress = [&](int done, int total) {
        const int decile = done * 10 / std::max(total, 1);
        std::lock_guard lock(log_mutex);
        if (decile != last_reported) {
            last_reported = decile;
            log << "  " << done << "/" << total << " folds\n" << std::flush;
        }
    };

    try {
        const RawDataset ds = load_dataset(cfg);
        const Trainer trainer = make_trainer(cfg);
        const EvalResult r =
            cfg.protocol == Protocol::loo
                ? leave_one_out(ds, trainer, predict_labels, cfg.seed, cfg.jobs, progress)
                : random_splits(ds, cfg.n_train, cfg.n_repeats, trainer, predict_labels, cfg.seed, cfg.jobs,
                                progress);
        meta["status"] = "complete";
        write_file(out / "eval.json", eval_result_json(r, meta));
        std::ostringstream csv;
        write_summary_csv(csv, fs::path(cfg.data).stem().string(), method_name(cfg.method), r,
                          schedule_string(cfg.schedule));
        write_file(out / "summary.csv", csv.str());
        log << protocol_name(r.protocol) << " error rate " << r.error_rate << " (" << r.n_errors << "/"
            << r.n_test << ")\n";
        return r;
    } catch (const std::exception& e) {
        ojson failed;
        failed["status"] = "failed";
        failed["error_kind"] = error_kind(e);
        failed["error"] = e.what();
        failed["protocol"] = protocol_name(cfg.protocol);
        failed["seed"] = cfg.seed;
        failed["metadata"] = meta;
        write_file(out / "eval.json", failed.dump(2) + "\n");
        throw;
    }
}

int exit_code_for(const std::exception& e) {
    if (const auto* be = dynamic_cast<const Error*>(&e)) {
        switch (be->category()) {
        case ErrorCategory::config:
            return 1;
        case ErrorCategory::data:
            return 2;
        case ErrorCategory::numerical:
        case ErrorCategory::internal:
            return 3;
        }
    }
    if (dynamic_cast<const fs::filesystem_error*>(&e)) {
        return 2;
    }
    return 3;
}

} // namespace bmsvm::cli
