#include "bmsvm/error.hpp"
#include "bmsvm/map_estimator.hpp"
#include "bmsvm/model.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace bmsvm;
using namespace bmsvm::testing;

TEST(TrainingSet, IndexSets) {
    Matrix x = Matrix::Zero(5, 1);
    const TrainingSet ts(x, {0, 2, 1, 0, 2}, 3);
    EXPECT_EQ(ts.class_index(0), (std::vector<int>{0, 3}));
    EXPECT_EQ(ts.complement(0), (std::vector<int>{1, 2, 4}));
    EXPECT_EQ(ts.complement_size(1), 4);
}

TEST(TrainingSet, Rejections) {
    Matrix x = Matrix::Zero(3, 1);
    EXPECT_THROW(TrainingSet(x, {0, 1}, 2), ShapeError);
    EXPECT_THROW(TrainingSet(x, {0, 1, 3}, 3), ShapeError);
    try {
        TrainingSet(x, {0, 0, 2}, 3);
        FAIL();
    } catch (const FoldDegeneracyError& e) {
        EXPECT_EQ(e.missing_class(), 2);
    }
}

TEST(Labels, RoundTrip) {
    for (int u = 1; u <= 5; ++u) {
        EXPECT_EQ(to_user_label(to_internal_label(u)), u);
    }
}

TEST(Coefficients, Reparameterization) {
    Vector b0(3);
    b0 << 1.0, 2.0, 6.0;
    Matrix b(2, 3);
    b << 1, 2, 3, 0, 0, 3;
    const Coefficients coef(b0, b);
    EXPECT_NEAR(coef.w0().sum(), 0.0, 1e-15);
    EXPECT_NEAR(coef.w0()(0), -2.0, 1e-15);
    EXPECT_NEAR(coef.w()(1, 2), 2.0, 1e-15);
    const Vector beta = coef.beta(1);
    EXPECT_EQ(beta.size(), 3);
    EXPECT_EQ(beta(0), 2.0);
    Matrix betas(3, 3);
    for (int j = 0; j < 3; ++j) {
        betas.col(j) = coef.beta(j);
    }
    const Coefficients back = Coefficients::from_betas(betas);
    EXPECT_EQ(back.b0(), b0);
    EXPECT_EQ(back.b(), b);
}

TEST(Likelihood, HandCountedHinge) {
    Matrix x = Matrix::Zero(3, 1);
    const TrainingSet ts(x, {0, 1, 2}, 3);
    Matrix f(3, 3);
    f << 1.0, -0.2, -0.8, 0.3, 0.5, -0.8, -0.5, -0.6, 1.1;
    // Row 0: (-0.2 + .5)+ + (-0.8 + .5)+ = 0.3. Row 1: (0.3 + .5) + 0 = 0.8.
    // Row 2: 0 + 0.
    EXPECT_NEAR(neg_log_likelihood(f, ts), 1.1, 1e-14);
}

TEST(Likelihood, BinaryReduction) {
    for (double f1 : {-2.0, -0.5, 0.0, 0.3, 1.0, 3.0}) {
        const auto [p1, pm1] = binary_reduction(f1);
        EXPECT_NEAR(p1, std::exp(-std::max(0.0, 1.0 - f1)), 1e-15);
        EXPECT_NEAR(pm1, std::exp(-std::max(0.0, 1.0 + f1)), 1e-15);
    }
}

TEST(Likelihood, AltProbabilities) {
    Vector f(3);
    f << 0.2, -0.1, -0.1;
    const Vector p = alt_class_probabilities(f);
    EXPECT_NEAR(p.sum(), 1.0, 1e-15);
    EXPECT_GT(p(0), p(1));
    EXPECT_NEAR(p(1), p(2), 1e-15);
    Vector big(3);
    big << 900.0, -450.0, -450.0;
    EXPECT_TRUE(alt_class_probabilities(big).allFinite());
}

TEST(ModelProperty, GroupingsAgree) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        Rng rng = make_rng(seed);
        const int c = 2 + static_cast<int>(seed % 4);
        const Eigen::Index n = c + static_cast<Eigen::Index>(seed % 9);
        const TrainingSet ts(random_matrix(rng, n, 2), covering_labels(rng, n, c), c);
        const Matrix f = random_matrix(rng, n, c);
        EXPECT_NEAR(neg_log_likelihood(f, ts), neg_log_likelihood_by_class(f, ts), 1e-12);
    }
}

TEST(ModelProperty, ConstraintPreservedByReparameterization) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        Rng rng = make_rng(seed);
        const int c = 2 + static_cast<int>(seed % 4);
        const Coefficients coef(random_matrix(rng, c, 1).col(0) * 10.0, random_matrix(rng, 7, c) * 10.0);
        EXPECT_LT(std::abs(coef.w0().sum()), 1e-12);
        EXPECT_LT(coef.w().rowwise().sum().cwiseAbs().maxCoeff(), 1e-12);
        const Matrix k = random_spd(rng, 7);
        const Matrix f = decision_matrix(coef, k);
        EXPECT_LT(f.rowwise().sum().cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(ModelProperty, CompleteZRowsSumToZero) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng = make_rng(seed);
        const int c = 2 + static_cast<int>(seed % 4);
        const Eigen::Index n = c + 5;
        const TrainingSet ts(random_matrix(rng, n, 1), covering_labels(rng, n, c), c);
        LatentState latent;
        for (int j = 0; j < c; ++j) {
            latent.s.push_back(random_matrix(rng, ts.complement_size(j), 1).col(0));
        }
        const Matrix z = complete_z(latent, ts);
        EXPECT_LT(z.rowwise().sum().cwiseAbs().maxCoeff(), 1e-12);
        for (int j = 0; j < c; ++j) {
            const auto& rows = ts.complement(j);
            for (std::size_t k = 0; k < rows.size(); ++k) {
                EXPECT_EQ(z(rows[k], j), latent.s[static_cast<std::size_t>(j)](static_cast<Eigen::Index>(k)));
            }
        }
    }
}

TEST(PriorW, MatchesKroneckerDensity) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng = make_rng(seed);
        const Eigen::Index n = 1 + static_cast<Eigen::Index>(seed % 8);
        const int c = 2 + static_cast<int>(seed % 3);
        const Matrix k = random_spd(rng, n);
        const double lambda = 0.05 + 5.0 * draw_uniform(rng);
        const Matrix w = random_coefficients(rng, n, c).w();
        const double lhs = log_prior_w(w, KernelMatrix(k), lambda);
        const double rank = static_cast<double>(n * (c - 1));
        const double oracle = kron_singular_normal_logpdf(w, k, lambda) + 0.5 * rank * std::log(2.0 * std::numbers::pi);
        EXPECT_NEAR(lhs, oracle, 1e-8) << "seed " << seed;
    }
}

TEST(PriorW, RejectsUncenteredW) {
    Rng rng = make_rng(1);
    const Matrix k = random_spd(rng, 3);
    const Matrix w = random_matrix(rng, 3, 3);
    EXPECT_THROW(log_prior_w(w, KernelMatrix(k), 1.0), ConstraintError);
    EXPECT_THROW(log_prior_w(Matrix::Zero(3, 3), KernelMatrix(k), 0.0), ParameterError);
}

TEST(PriorBeta, MatchesDenseGaussian) {
    Rng rng = make_rng(5);
    const Eigen::Index n = 4;
    const Matrix k = random_spd(rng, n);
    const double sigma2 = 0.7, tau = 1.3, eta = 2.0;
    Vector beta = random_matrix(rng, n + 1, 1).col(0);
    Matrix prec = Matrix::Zero(n + 1, n + 1);
    prec(0, 0) = eta;
    prec.bottomRightCorner(n, n) = tau * k;
    prec /= sigma2;
    const double oracle = 0.5 * std::log(prec.determinant()) -
                          0.5 * static_cast<double>(n + 1) * std::log(2.0 * std::numbers::pi) -
                          0.5 * beta.dot(prec * beta);
    EXPECT_NEAR(log_prior_beta(beta, sigma2, tau, eta, KernelMatrix(k)), oracle, 1e-10);
}

TEST(NegLogJoint, DiffersFromPrimalByConstant) {
    const TrainingSet ts = random_training_set(3, 9, 2, 3);
    const KernelMatrix k = build_kernel_matrix(ts.inputs(), 1.2);
    Rng rng = make_rng(2);
    const double lambda = 0.6;
    const Coefficients a = random_coefficients(rng, 9, 3, 0.3);
    const Coefficients b = random_coefficients(rng, 9, 3, 0.3);
    EXPECT_NEAR(neg_log_joint(a, k, ts, lambda) - neg_log_joint(b, k, ts, lambda),
                primal_objective(a, k, ts, lambda) - primal_objective(b, k, ts, lambda), 1e-10);
}
