#include "commands.hpp"

#include <bmsvm/error.hpp>
#include <bmsvm/version.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

namespace {

using namespace bmsvm::cli;

struct RunFlags {
    std::string config;
    std::optional<std::string> data;
    std::optional<std::string> label;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    std::optional<std::string> out;
    std::optional<std::string> method;
    std::optional<std::string> theta;
    std::optional<std::string> schedule;
    std::optional<std::string> shape_mode;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
    cmd->add_option("--config", f.config, "TOML run configuration");
    cmd->add_option("--data", f.data, "dataset CSV (overrides 'data')");
    cmd->add_option("--label", f.label, "label column name or 0-based index");
    cmd->add_option("--seed", f.seed, "master seed");
    cmd->add_option("--jobs", f.jobs, "worker threads for folds and splits")->check(CLI::PositiveNumber);
    cmd->add_option("--out", f.out, "output directory");
    cmd->add_option("--method", f.method, "map or bmsvm");
    cmd->add_option("--theta", f.theta, "kernel width: a value, a comma-separated grid, or 'mh'");
    cmd->add_option("--schedule", f.schedule, "M1,M2,M");
    cmd->add_option("--shape-mode", f.shape_mode, "paper or exact");
}

RunConfig resolve(const RunFlags& f) {
    RunConfig cfg = f.config.empty() ? RunConfig{} : load_run_config(f.config);
    if (f.data) cfg.data = *f.data;
    if (f.label) cfg.label = *f.label;
    if (f.seed) cfg.seed = *f.seed;
    if (f.jobs) cfg.jobs = *f.jobs;
    if (f.out) cfg.out = *f.out;
    if (f.method) cfg.method = parse_method(*f.method);
    if (f.theta) apply_theta_flag(cfg, *f.theta);
    if (f.schedule) cfg.schedule = parse_schedule(*f.schedule);
    if (f.shape_mode) cfg.hyper.shape_mode = parse_shape_mode(*f.shape_mode);
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian multicategory support vector machine"};
    app.set_version_flag("--version", std::string(bmsvm::version_string));
    app.require_subcommand(1);

    RunFlags train_flags;
    RunFlags eval_flags;
    auto* train = app.add_subcommand("train", "fit a model on a whole dataset");
    add_run_flags(train, train_flags);
    auto* eval = app.add_subcommand("eval", "leave-one-out or random-split evaluation");
    add_run_flags(eval, eval_flags);

    std::string model_path;
    std::string predict_data;
    std::string predict_out;
    char delimiter = ',';
    auto* predict = app.add_subcommand("predict", "label a CSV with a trained model");
    predict->add_option("--model", model_path, "model.json written by train")->required();
    predict->add_option("--data", predict_data, "CSV of inputs")->required();
    predict->add_option("--out", predict_out, "prediction CSV (default stdout)");
    predict->add_option("--delimiter", delimiter, "field separator");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (*train) {
            cmd_train(resolve(train_flags), std::cerr);
        } else if (*eval) {
            const auto r = cmd_eval(resolve(eval_flags), std::cerr);
            std::cout << r.error_rate << '\n';
        } else if (*predict) {
            if (predict_out.empty()) {
                cmd_predict(model_path, predict_data, delimiter, std::cout);
            } else {
                std::ofstream out(predict_out);
                if (!out) {
                    throw bmsvm::ParseError("cannot write '" + predict_out + "'", 0, 0);
                }
                cmd_predict(model_path, predict_data, delimiter, out);
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "bmsvm: " << e.what() << '\n';
        return exit_code_for(e);
    }
    return 0;
}
