#include "bmsvm/error.hpp"
#include "bmsvm/learners.hpp"
#include "bmsvm/sampler.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace bmsvm;
using namespace bmsvm::testing;

namespace {

ChainState fresh_state(const TrainingSet& ts, double theta, LinalgRoute route, std::uint64_t seed) {
    Hyperparams hyper;
    Rng rng = make_rng(seed);
    return init_state(ts, hyper, theta, route, rng);
}

LatentState random_latent(const TrainingSet& ts, Rng& rng) {
    LatentState latent;
    for (int j = 0; j < ts.num_classes(); ++j) {
        latent.s.push_back(random_matrix(rng, ts.complement_size(j), 1).col(0));
    }
    return latent;
}

} // namespace

TEST(Schedule, RetainedCount) {
    SamplerSchedule s{100, 50, 10};
    EXPECT_EQ(s.retained(), 5);
    EXPECT_NO_THROW(s.validate());
    EXPECT_THROW((SamplerSchedule{100, 100, 10}.validate()), ParameterError);
    EXPECT_THROW((SamplerSchedule{100, 45, 10}.validate()), ParameterError);
    EXPECT_THROW((SamplerSchedule{100, 50, 0}.validate()), ParameterError);
}

TEST(Schedule, ChainKeepsExactlyTRecords) {
    const TrainingSet ts = random_training_set(3, 12, 2, 3);
    BmsvmConfig cfg;
    cfg.theta = 1.0;
    cfg.options.schedule = {100, 50, 10};
    const FittedModel m = fit_bmsvm(ts, cfg, 11);
    ASSERT_EQ(m.samples.records.size(), 5u);
    EXPECT_EQ(m.samples.records.front().sweep, 60);
    EXPECT_EQ(m.samples.records.back().sweep, 100);
}

TEST(ZStep, AcceptRatioByHand) {
    // c = 3: offset 0.5.
    const double r = z_log_accept_ratio(0.1, -0.4, 0.0, 0.5, 3);
    const double expected = (0.6 - 0.1) + (0.01 - 0.16) / 1.0;
    EXPECT_NEAR(r, expected, 1e-14);
    EXPECT_NEAR(z_log_accept_ratio(-2.0, -1.0, -1.5, 1.0, 3), 0.0, 1e-14);
}

TEST(ZStep, StationaryMeanMatchesQuadrature) {
    const TrainingSet ts = random_training_set(5, 4, 2, 2);
    Hyperparams hyper;
    ChainState st = fresh_state(ts, 1.0, LinalgRoute::spectral, 1);
    st.sigma2 = 0.3;
    Rng brng = make_rng(2);
    st.coef = random_coefficients(brng, ts.n(), 2, 0.4);
    const Matrix means = (st.kernel->kernel().entries() * st.coef.b()).rowwise() + st.coef.b0().transpose();

    Rng rng = make_rng(9);
    const int sweeps = 200000;
    std::vector<std::vector<double>> trace(2);
    for (int t = 0; t < sweeps; ++t) {
        mh_update_z(st, ts, hyper, rng);
        trace[0].push_back(st.latent.s[0](0));
        trace[1].push_back(st.latent.s[1](0));
    }
    for (int j = 0; j < 2; ++j) {
        const int row = ts.complement(j)[0];
        const double expected = latent_conditional_mean(means(row, j), st.sigma2, 2);
        const double observed = iid_moments(trace[static_cast<std::size_t>(j)]).mean;
        EXPECT_LT(std::abs(observed - expected), 4.0 * batch_means_se(trace[static_cast<std::size_t>(j)]))
            << "class " << j << " expected " << expected << " observed " << observed;
    }
}

TEST(Routes, QuadraticFormAgrees) {
    const TrainingSet ts = random_training_set(8, 15, 3, 4);
    const KernelWorkspace a(ts, 1.3, LinalgRoute::spectral);
    const KernelWorkspace b(ts, 1.3, LinalgRoute::dense);
    Rng rng = make_rng(4);
    const LatentState latent = random_latent(ts, rng);
    for (double tau : {0.05, 1.0, 30.0}) {
        const double qa = latent_quadratic_form(latent, a, tau, 1000.0);
        const double qb = latent_quadratic_form(latent, b, tau, 1000.0);
        EXPECT_NEAR(qa, qb, 1e-8 * std::max(1.0, std::abs(qb))) << "tau " << tau;
    }
}

TEST(Routes, QuadraticFormMatchesExplicitInverse) {
    const TrainingSet ts = random_training_set(21, 7, 2, 3);
    const double tau = 0.8;
    const double eta = 3.0;
    const KernelWorkspace ws(ts, 1.1, LinalgRoute::spectral);
    Rng rng = make_rng(5);
    const LatentState latent = random_latent(ts, rng);
    const Matrix& k = ws.kernel().entries();
    const Eigen::Index n = ts.n();
    Matrix sigma_inv = Matrix::Zero(n + 1, n + 1);
    sigma_inv(0, 0) = 1.0 / eta;
    sigma_inv.bottomRightCorner(n, n) = k.inverse() / tau;
    Matrix kt(n, n + 1);
    kt << Vector::Ones(n), k;
    double expected = 0.0;
    for (int j = 0; j < 3; ++j) {
        const Matrix kj = kt(ts.complement(j), Eigen::all);
        const Matrix q = Matrix::Identity(kj.rows(), kj.rows()) + kj * sigma_inv * kj.transpose();
        expected += latent.s[static_cast<std::size_t>(j)].dot(q.inverse() * latent.s[static_cast<std::size_t>(j)]);
    }
    EXPECT_NEAR(latent_quadratic_form(latent, ws, tau, eta), expected, 1e-8);
}

TEST(Conjugacy, SpectralRouteMoments) {
    for (const Comparison& c : conjugacy_comparisons(20000, 77, LinalgRoute::spectral)) {
        EXPECT_LT(std::abs(c.z()), 3.0) << c.name << ": observed " << c.observed << " expected " << c.expected;
    }
}

TEST(Conjugacy, DenseRouteMoments) {
    for (const Comparison& c : conjugacy_comparisons(20000, 78, LinalgRoute::dense)) {
        EXPECT_LT(std::abs(c.z()), 3.0) << c.name << ": observed " << c.observed << " expected " << c.expected;
    }
}

TEST(Conjugacy, ShapeModes) {
    const TrainingSet ts = random_training_set(2, 9, 2, 3);
    const KernelWorkspace ws(ts, 1.0, LinalgRoute::spectral);
    Rng rng = make_rng(1);
    const LatentState latent = random_latent(ts, rng);
    Hyperparams hyper;
    EXPECT_DOUBLE_EQ(sigma_precision_posterior(latent, ws, hyper, 1.0, ts).shape, (3.0 + 27.0) / 2.0);
    hyper.shape_mode = ShapeMode::exact;
    EXPECT_DOUBLE_EQ(sigma_precision_posterior(latent, ws, hyper, 1.0, ts).shape, (3.0 + 18.0) / 2.0);
}

TEST(Geweke, ShortRunAgrees) {
    for (const Comparison& c : geweke_comparisons(20000, 5, LinalgRoute::spectral)) {
        EXPECT_LT(std::abs(c.z()), 4.0) << c.name << ": chain " << c.observed << " forward " << c.expected;
    }
}

TEST(Theta, ReflectStaysInside) {
    EXPECT_DOUBLE_EQ(reflect_into(0.5, 0.0, 1.0), 0.5);
    EXPECT_NEAR(reflect_into(1.2, 0.0, 1.0), 0.8, 1e-12);
    EXPECT_NEAR(reflect_into(-0.3, 0.0, 1.0), 0.3, 1e-12);
    EXPECT_NEAR(reflect_into(2.3, 0.0, 1.0), 0.3, 1e-12);
    EXPECT_THROW(reflect_into(0.0, 1.0, 1.0), ParameterError);
}

TEST(Theta, RatioIsZeroAtSameTheta) {
    const TrainingSet ts = random_training_set(4, 8, 2, 3);
    const KernelMatrix k = build_kernel_matrix(ts.inputs(), 1.5);
    Rng rng = make_rng(3);
    const LatentState latent = random_latent(ts, rng);
    const Coefficients coef = random_coefficients(rng, ts.n(), 3);
    EXPECT_NEAR(theta_log_ratio(coef, latent, ts, k, k, Hyperparams{}, 2.0), 0.0, 1e-12);
}

TEST(Theta, RatioIsAntisymmetric) {
    const TrainingSet ts = random_training_set(4, 8, 2, 3);
    const KernelMatrix k1 = build_kernel_matrix(ts.inputs(), 1.5);
    const KernelMatrix k2 = build_kernel_matrix(ts.inputs(), 2.5);
    Rng rng = make_rng(3);
    const LatentState latent = random_latent(ts, rng);
    const Coefficients coef = random_coefficients(rng, ts.n(), 3);
    const Hyperparams hyper;
    EXPECT_NEAR(theta_log_ratio(coef, latent, ts, k1, k2, hyper, 2.0),
                -theta_log_ratio(coef, latent, ts, k2, k1, hyper, 2.0), 1e-10);
}

TEST(Theta, ChainMovesAndStaysInBounds) {
    const TrainingSet ts = random_training_set(6, 20, 2, 3);
    BmsvmConfig cfg;
    cfg.options.sample_theta = true;
    cfg.options.schedule = {200, 100, 5};
    cfg.hyper.theta_lo = 0.5;
    cfg.hyper.theta_hi = 5.0;
    const FittedModel m = fit_bmsvm(ts, cfg, 8);
    EXPECT_GT(m.samples.theta_acceptance_rate(), 0.0);
    EXPECT_LT(m.samples.theta_acceptance_rate(), 1.0);
    for (const auto& r : m.samples.records) {
        EXPECT_GE(r.theta, 0.5);
        EXPECT_LE(r.theta, 5.0);
    }
}

TEST(SamplerProperty, RecordsSatisfySumToZero) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const TrainingSet ts = random_training_set(seed, 10, 2, 3 + static_cast<int>(seed % 2));
        BmsvmConfig cfg;
        cfg.theta = 1.0;
        cfg.options.schedule = {60, 30, 3};
        const FittedModel m = fit_bmsvm(ts, cfg, seed);
        for (const auto& r : m.samples.records) {
            EXPECT_LT(r.w0.sum(), 1e-12);
            EXPECT_LT(r.w.rowwise().sum().cwiseAbs().maxCoeff(), 1e-10);
        }
    }
}

TEST(SamplerProperty, SameSeedSameChain) {
    const TrainingSet ts = random_training_set(12, 14, 3, 3);
    BmsvmConfig cfg;
    cfg.theta = 1.4;
    cfg.options.schedule = {80, 40, 4};
    const FittedModel a = fit_bmsvm(ts, cfg, 99);
    const FittedModel b = fit_bmsvm(ts, cfg, 99);
    const FittedModel c = fit_bmsvm(ts, cfg, 100);
    ASSERT_EQ(a.samples.records.size(), b.samples.records.size());
    for (std::size_t t = 0; t < a.samples.records.size(); ++t) {
        EXPECT_EQ(a.samples.records[t].w, b.samples.records[t].w);
        EXPECT_EQ(a.samples.records[t].sigma2, b.samples.records[t].sigma2);
    }
    EXPECT_NE(a.samples.records.back().sigma2, c.samples.records.back().sigma2);
}

TEST(SamplerProperty, PositiveScalesThroughout) {
    const TrainingSet ts = random_training_set(13, 16, 2, 4);
    BmsvmConfig cfg;
    cfg.theta = 0.9;
    cfg.options.schedule = {100, 0, 1};
    const FittedModel m = fit_bmsvm(ts, cfg, 5);
    for (const auto& r : m.samples.records) {
        EXPECT_GT(r.sigma2, 0.0);
        EXPECT_GT(r.tau, 0.0);
        EXPECT_TRUE(std::isfinite(r.log_likelihood));
    }
}

TEST(Init, LatentsStartAtEncoding) {
    const TrainingSet ts = random_training_set(1, 9, 2, 3);
    const ChainState st = fresh_state(ts, 1.0, LinalgRoute::spectral, 4);
    for (int j = 0; j < 3; ++j) {
        EXPECT_TRUE((st.latent.s[static_cast<std::size_t>(j)].array() == -0.5).all());
    }
    const Matrix z = complete_z(st.latent, ts);
    for (Eigen::Index i = 0; i < ts.n(); ++i) {
        EXPECT_DOUBLE_EQ(z(i, ts.label(i)), 1.0);
    }
    EXPECT_DOUBLE_EQ(initial_theta(Hyperparams{}, nullptr), 100.05);
}

TEST(Init, WarmStartUsesMap) {
    const TrainingSet ts = random_training_set(1, 12, 2, 3);
    Hyperparams hyper;
    Rng rng = make_rng(4);
    MapConfig mc;
    const ChainState st = init_state(ts, hyper, 1.0, LinalgRoute::spectral, rng, &mc);
    EXPECT_GT(st.coef.b().norm(), 0.0);
}

TEST(Trace, CsvHasOneRowPerRecord) {
    const TrainingSet ts = random_training_set(2, 8, 2, 3);
    BmsvmConfig cfg;
    cfg.theta = 1.0;
    cfg.options.schedule = {30, 10, 5};
    const FittedModel m = fit_bmsvm(ts, cfg, 1);
    std::ostringstream os;
    write_trace_csv(os, m.samples);
    const std::string text = os.str();
    EXPECT_EQ(text.rfind("sweep,sigma2,tau,theta,log_likelihood\n", 0), 0u);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 5);
}
