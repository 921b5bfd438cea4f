#include "bmsvm/model.hpp"

#include "bmsvm/error.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace bmsvm {

TrainingSet::TrainingSet(Matrix inputs, std::vector<int> labels, int num_classes)
    : inputs_(std::move(inputs)), labels_(std::move(labels)), c_(num_classes) {
    if (c_ < 2) {
        throw ShapeError("TrainingSet: need at least two classes");
    }
    if (static_cast<Eigen::Index>(labels_.size()) != inputs_.rows()) {
        std::ostringstream os;
        os << "TrainingSet: " << inputs_.rows() << " input rows but " << labels_.size() << " labels";
        throw ShapeError(os.str());
    }
    class_index_.assign(static_cast<std::size_t>(c_), {});
    complement_.assign(static_cast<std::size_t>(c_), {});
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        const int y = labels_[i];
        if (y < 0 || y >= c_) {
            std::ostringstream os;
            os << "TrainingSet: label " << to_user_label(y) << " at row " << i + 1
               << " outside 1.." << c_;
            throw ShapeError(os.str());
        }
        for (int j = 0; j < c_; ++j) {
            (j == y ? class_index_ : complement_)[static_cast<std::size_t>(j)].push_back(
                static_cast<int>(i));
        }
    }
    for (int j = 0; j < c_; ++j) {
        if (class_index_[static_cast<std::size_t>(j)].empty()) {
            std::ostringstream os;
            os << "class " << to_user_label(j) << " has no training points";
            throw FoldDegeneracyError(os.str(), to_user_label(j));
        }
    }
}

void Hyperparams::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw ParameterError(std::string("hyperparameter ") + name + " must be positive");
        }
    };
    positive(a_sigma, "a_sigma");
    positive(b_sigma, "b_sigma");
    positive(a_tau, "a_tau");
    positive(b_tau, "b_tau");
    positive(eta, "eta");
    positive(theta_lo, "theta_lo");
    positive(theta_hi, "theta_hi");
    positive(z_proposal_sd, "z_proposal_sd");
    positive(theta_proposal_sd, "theta_proposal_sd");
    if (!(theta_lo < theta_hi)) {
        throw ParameterError("hyperparameter theta bounds must satisfy theta_lo < theta_hi");
    }
}

Coefficients::Coefficients(Vector b0, Matrix b) : b0_(std::move(b0)), b_(std::move(b)) {
    if (b_.cols() != b0_.size()) {
        throw ShapeError("Coefficients: b0 length differs from the column count of B");
    }
}

Coefficients Coefficients::zeros(Eigen::Index n, int num_classes) {
    return {Vector::Zero(num_classes), Matrix::Zero(n, num_classes)};
}

Coefficients Coefficients::from_betas(const Matrix& betas) {
    return {betas.row(0).transpose(), betas.bottomRows(betas.rows() - 1)};
}

Vector Coefficients::w0() const {
    return b0_.array() - b0_.mean();
}

Matrix Coefficients::w() const {
    return b_.colwise() - b_.rowwise().mean();
}

Vector Coefficients::beta(int j) const {
    Vector out(b_.rows() + 1);
    out(0) = b0_(j);
    out.tail(b_.rows()) = b_.col(j);
    return out;
}

Matrix decision_matrix(const Coefficients& coef, const Matrix& kernel) {
    if (kernel.cols() != coef.n()) {
        throw ShapeError("decision_matrix: kernel size differs from coefficient rows");
    }
    Matrix f = kernel * coef.w();
    f.rowwise() += coef.w0().transpose();
    return f;
}

namespace {

void check_f_shape(const Matrix& f, const TrainingSet& ts) {
    if (f.rows() != ts.n() || f.cols() != ts.num_classes()) {
        std::ostringstream os;
        os << "decision values are " << f.rows() << "x" << f.cols() << ", expected " << ts.n()
           << "x" << ts.num_classes();
        throw ShapeError(os.str());
    }
}

} // namespace

double neg_log_likelihood(const Matrix& f, const TrainingSet& ts) {
    check_f_shape(f, ts);
    const double off = margin_offset(ts.num_classes());
    double total = 0.0;
    for (Eigen::Index i = 0; i < f.rows(); ++i) {
        for (int j = 0; j < ts.num_classes(); ++j) {
            if (j != ts.label(i)) {
                total += hinge(f(i, j) + off);
            }
        }
    }
    return total;
}

double neg_log_likelihood_by_class(const Matrix& f, const TrainingSet& ts) {
    check_f_shape(f, ts);
    const double off = margin_offset(ts.num_classes());
    double total = 0.0;
    for (int j = 0; j < ts.num_classes(); ++j) {
        for (int i : ts.complement(j)) {
            total += hinge(f(i, j) + off);
        }
    }
    return total;
}

double log_prior_w(const Matrix& w, const KernelMatrix& k, double lambda) {
    if (!(lambda > 0.0)) {
        throw ParameterError("log_prior_w: lambda must be positive");
    }
    if (w.rows() != k.size()) {
        throw ShapeError("log_prior_w: W rows differ from kernel size");
    }
    const double violation = w.rowwise().sum().cwiseAbs().maxCoeff();
    if (violation > 1e-10) {
        std::ostringstream os;
        os << "log_prior_w: W 1_c deviates from zero by " << violation;
        throw ConstraintError(os.str());
    }
    const double n = static_cast<double>(w.rows());
    const double cm1 = static_cast<double>(w.cols() - 1);
    const double quad = (w.transpose() * k.entries() * w).trace();
    return 0.5 * n * cm1 * std::log(lambda) + 0.5 * cm1 * log_pseudo_det(k) - 0.5 * lambda * quad;
}

double log_prior_beta(const Vector& beta, double sigma2, double tau, double eta,
                      const KernelMatrix& k) {
    if (!(sigma2 > 0.0) || !(tau > 0.0) || !(eta > 0.0)) {
        throw ParameterError("log_prior_beta: sigma2, tau and eta must be positive");
    }
    const Eigen::Index n = k.size();
    if (beta.size() != n + 1) {
        throw ShapeError("log_prior_beta: beta must have length n+1");
    }
    const auto b = beta.tail(n);
    const double quad = eta * beta(0) * beta(0) + tau * b.dot(k.entries() * b);
    const double log_det_sigma = std::log(eta) + static_cast<double>(n) * std::log(tau) + log_pseudo_det(k);
    const double dim = static_cast<double>(n + 1);
    return 0.5 * log_det_sigma - 0.5 * dim * std::log(2.0 * std::numbers::pi * sigma2) -
           quad / (2.0 * sigma2);
}

double neg_log_joint(const Coefficients& coef, const KernelMatrix& k, const TrainingSet& ts,
                     double lambda) {
    const Matrix f = decision_matrix(coef, k.entries());
    return neg_log_likelihood(f, ts) - log_prior_w(coef.w(), k, lambda);
}

Vector alt_class_probabilities(const Vector& f) {
    const int c = static_cast<int>(f.size());
    const double off = margin_offset(c);
    Vector a(c);
    for (int j = 0; j < c; ++j) {
        a(j) = hinge(f(j) + off);
    }
    const Vector e = (a.array() - a.maxCoeff()).exp();
    return e / e.sum();
}

std::pair<double, double> binary_reduction(double f1) {
    // p(y = 1) = p(y != 2) ∝ exp{-(f2 + 1)_+} with f2 = -f1, and symmetrically.
    const double f2 = -f1;
    return {std::exp(-hinge(f2 + margin_offset(2))), std::exp(-hinge(f1 + margin_offset(2)))};
}

Matrix complete_z(const LatentState& latent, const TrainingSet& ts) {
    const int c = ts.num_classes();
    if (static_cast<int>(latent.s.size()) != c) {
        throw ShapeError("complete_z: latent state has the wrong number of classes");
    }
    Matrix z = Matrix::Zero(ts.n(), c);
    for (int j = 0; j < c; ++j) {
        const auto& rows = ts.complement(j);
        if (latent.s[static_cast<std::size_t>(j)].size() != static_cast<Eigen::Index>(rows.size())) {
            throw ShapeError("complete_z: latent vector length differs from n_j");
        }
        for (std::size_t k = 0; k < rows.size(); ++k) {
            z(rows[k], j) = latent.s[static_cast<std::size_t>(j)](static_cast<Eigen::Index>(k));
        }
    }
    for (Eigen::Index i = 0; i < ts.n(); ++i) {
        const int y = ts.label(i);
        double others = 0.0;
        for (int j = 0; j < c; ++j) {
            if (j != y) {
                others += z(i, j);
            }
        }
        z(i, y) = -others;
    }
    return z;
}

} // namespace bmsvm
