#pragma once

#include "bmsvm/kernel.hpp"

#include <utility>
#include <vector>

namespace bmsvm {

/// Converts a user-facing label (1..c) to the internal index (0..c-1).
inline int to_internal_label(int user_label) noexcept { return user_label - 1; }
/// Inverse of to_internal_label.
inline int to_user_label(int internal_label) noexcept { return internal_label + 1; }

/// Standardized inputs with 0-based labels and the per-class index sets.
///
/// class_index(j) lists the rows with label j (I_j); complement(j) lists the
/// others (the rows whose latent z_ij is free). Both are sorted ascending.
class TrainingSet {
public:
    /// Throws ShapeError on size mismatch or out-of-range labels and
    /// FoldDegeneracyError when some class has no member.
    TrainingSet(Matrix inputs, std::vector<int> labels, int num_classes);

    const Matrix& inputs() const noexcept { return inputs_; }
    const std::vector<int>& labels() const noexcept { return labels_; }
    int label(Eigen::Index i) const { return labels_[static_cast<std::size_t>(i)]; }
    Eigen::Index n() const noexcept { return inputs_.rows(); }
    Eigen::Index p() const noexcept { return inputs_.cols(); }
    int num_classes() const noexcept { return c_; }

    const std::vector<int>& class_index(int j) const { return class_index_[static_cast<std::size_t>(j)]; }
    const std::vector<int>& complement(int j) const { return complement_[static_cast<std::size_t>(j)]; }
    /// n_j = |complement(j)|.
    Eigen::Index complement_size(int j) const {
        return static_cast<Eigen::Index>(complement_[static_cast<std::size_t>(j)].size());
    }

private:
    Matrix inputs_;
    std::vector<int> labels_;
    int c_;
    std::vector<std::vector<int>> class_index_;
    std::vector<std::vector<int>> complement_;
};

enum class ShapeMode {
    paper, ///< sigma^-2 shape (a_sigma + n c)/2, tau shape (a_tau + n c)/2
    exact  ///< shapes counted from the free latents (c-1)n and the kernel rank
};

struct Hyperparams {
    double a_sigma = 3.0;
    double b_sigma = 10.0;
    double a_tau = 4.0;
    double b_tau = 0.1;
    double eta = 1000.0;
    double theta_lo = 0.1;
    double theta_hi = 200.0;
    double z_proposal_sd = 0.5;
    /// Random-walk sd on log(theta).
    double theta_proposal_sd = 0.1;
    ShapeMode shape_mode = ShapeMode::paper;

    /// Throws ParameterError naming the first offending field.
    void validate() const;
};

/// Unconstrained (b0, B); the constrained (w0, W) = (H b0, B H) are derived.
class Coefficients {
public:
    Coefficients() = default;
    Coefficients(Vector b0, Matrix b);
    /// All-zero coefficients for n training points and c classes.
    static Coefficients zeros(Eigen::Index n, int num_classes);
    /// From the (n+1) x c matrix whose columns are beta_j = (b0_j, b_.j).
    static Coefficients from_betas(const Matrix& betas);

    const Vector& b0() const noexcept { return b0_; }
    const Matrix& b() const noexcept { return b_; }
    Vector& b0() noexcept { return b0_; }
    Matrix& b() noexcept { return b_; }

    Vector w0() const;
    Matrix w() const;
    /// beta_j = (b0_j, b_.j) of length n+1.
    Vector beta(int j) const;

    Eigen::Index n() const noexcept { return b_.rows(); }
    int num_classes() const noexcept { return static_cast<int>(b0_.size()); }

private:
    Vector b0_;
    Matrix b_;
};

/// Free latents: s[j] holds z_ij for i in complement(j), in the same order.
struct LatentState {
    std::vector<Vector> s;
};

inline double hinge(double u) noexcept { return u > 0.0 ? u : 0.0; }

/// Margin offset 1/(c-1) of the multicategory encoding.
inline double margin_offset(int num_classes) noexcept { return 1.0 / (num_classes - 1); }

/// Training decision values 1 w0' + K W (n x c).
Matrix decision_matrix(const Coefficients& coef, const Matrix& kernel);

/// sum_i sum_{j != y_i} (f_ij + 1/(c-1))_+ , iterating over points first.
double neg_log_likelihood(const Matrix& f, const TrainingSet& ts);
/// The same sum grouped by class: sum_j sum_{i in complement(j)} (...)_+.
double neg_log_likelihood_by_class(const Matrix& f, const TrainingSet& ts);

/// Log density of the singular matrix-variate normal prior on W = B H, additive
/// constant dropped: (n(c-1)/2) log lambda + ((c-1)/2) log pdet K - (lambda/2) tr(K W W').
/// Throws ConstraintError unless W 1_c = 0 within 1e-10.
double log_prior_w(const Matrix& w, const KernelMatrix& k, double lambda);

/// log N(beta | 0, sigma2 Sigma^{-1}) with Sigma = blockdiag(eta, tau K); the
/// normalizer uses the pseudo-determinant of K.
double log_prior_beta(const Vector& beta, double sigma2, double tau, double eta,
                      const KernelMatrix& k);

/// -log p(y, B) up to a B-free constant: hinge loss minus log_prior_w(B H).
double neg_log_joint(const Coefficients& coef, const KernelMatrix& k, const TrainingSet& ts,
                     double lambda);

/// Softmax-of-hinge class probabilities p_j ∝ exp{(f_j + 1/(c-1))_+}.
Vector alt_class_probabilities(const Vector& f);

/// Two-class check with f2 = -f1: unnormalized (p(y=1), p(y=-1)) =
/// (exp{-(1 - f1)_+}, exp{-(1 + f1)_+}), computed through the c = 2 hinge model.
std::pair<double, double> binary_reduction(double f1);

/// Full n x c latent matrix, with z_{i,y_i} = -sum of the row's free entries.
Matrix complete_z(const LatentState& latent, const TrainingSet& ts);

} // namespace bmsvm
