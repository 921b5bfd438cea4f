#include "bmsvm/learners.hpp"

#include "bmsvm/error.hpp"
#include "bmsvm/random.hpp"

#include <algorithm>
#include <numeric>

namespace bmsvm {

FittedModel fit_bmsvm(const TrainingSet& ts, const BmsvmConfig& cfg, std::uint64_t seed) {
    cfg.hyper.validate();
    cfg.options.schedule.validate();
    if (!cfg.theta && !cfg.options.sample_theta) {
        throw ParameterError("fit_bmsvm: a fixed theta is required unless theta is sampled");
    }
    Rng rng = make_rng(seed);
    const double* fixed = cfg.theta ? &*cfg.theta : nullptr;
    const double theta0 = initial_theta(cfg.hyper, fixed);
    ChainState state = init_state(ts, cfg.hyper, theta0, cfg.options.route, rng,
                                  cfg.warm_start ? &cfg.warm_start_map : nullptr);
    FittedModel model;
    model.train_inputs = ts.inputs();
    model.num_classes = ts.num_classes();
    model.samples = run_chain(ts, cfg.hyper, cfg.options, std::move(state), rng);
    return model;
}

FittedModel fit_map(const TrainingSet& ts, double theta, const MapConfig& cfg) {
    const KernelMatrix k = build_kernel_matrix(ts.inputs(), theta);
    const MapFit fit = map_fit(ts, k, cfg);
    SampleRecord rec;
    rec.sweep = fit.iterations;
    rec.w0 = fit.coef.w0();
    rec.w = fit.coef.w();
    rec.sigma2 = 1.0;
    rec.tau = cfg.lambda;
    rec.theta = theta;
    rec.log_likelihood = -neg_log_likelihood(decision_matrix(fit.coef, k.entries()), ts);
    FittedModel model;
    model.train_inputs = ts.inputs();
    model.num_classes = ts.num_classes();
    model.samples.records.push_back(std::move(rec));
    return model;
}

ThetaSelection select_theta_by_cv(const TrainingSet& ts, const std::vector<double>& grid,
                                  const ThetaTrainer& trainer, std::uint64_t seed, int folds) {
    if (grid.empty()) {
        throw ParameterError("theta grid is empty");
    }
    const int n = static_cast<int>(ts.n());
    if (folds < 2 || folds > n) {
        throw ParameterError("cross-validation needs between 2 and n folds");
    }
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng = make_rng(derive_seed(seed, 0x4356ULL));
    std::shuffle(perm.begin(), perm.end(), rng);

    const int c = ts.num_classes();
    ThetaSelection sel;
    sel.errors.assign(grid.size(), 0.0);
    for (std::size_t g = 0; g < grid.size(); ++g) {
        long wrong = 0;
        for (int f = 0; f < folds; ++f) {
            std::vector<int> train_rows;
            std::vector<int> test_rows;
            for (int i = 0; i < n; ++i) {
                (i % folds == f ? test_rows : train_rows).push_back(perm[static_cast<std::size_t>(i)]);
            }
            std::sort(train_rows.begin(), train_rows.end());
            std::sort(test_rows.begin(), test_rows.end());
            std::vector<int> train_labels;
            for (int r : train_rows) {
                train_labels.push_back(ts.label(r));
            }
            const TrainingSet inner(ts.inputs()(train_rows, Eigen::all), train_labels, c);
            const FittedModel model = trainer(inner, grid[g], derive_seed(seed, static_cast<std::uint64_t>(f)));
            const std::vector<int> pred = predict_labels(model, ts.inputs()(test_rows, Eigen::all));
            for (std::size_t t = 0; t < test_rows.size(); ++t) {
                wrong += pred[t] != ts.label(test_rows[t]) ? 1 : 0;
            }
        }
        sel.errors[g] = static_cast<double>(wrong) / static_cast<double>(n);
    }
    std::size_t best = 0;
    for (std::size_t g = 1; g < grid.size(); ++g) {
        if (sel.errors[g] < sel.errors[best] ||
            (sel.errors[g] == sel.errors[best] && grid[g] < grid[best])) {
            best = g;
        }
    }
    sel.theta = grid[best];
    return sel;
}

} // namespace bmsvm
