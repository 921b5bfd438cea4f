#include "bmsvm/prediction.hpp"

#include "bmsvm/error.hpp"
#include "bmsvm/model.hpp"

#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>

namespace bmsvm {

namespace {

void check_samples(const PosteriorSamples& samples, const Matrix& train_inputs) {
    if (samples.records.empty()) {
        throw ShapeError("prediction needs at least one posterior sample");
    }
    for (const auto& r : samples.records) {
        if (r.w.rows() != train_inputs.rows() || r.w0.size() != r.w.cols()) {
            throw ShapeError("sample coefficients do not match the training inputs");
        }
    }
}

double not_class_score(double f, double off) { return std::exp(-hinge(f + off)); }

} // namespace

Vector decision_values(const Vector& x, const Vector& w0, const Matrix& w, const Matrix& train_inputs,
                       double theta) {
    if (x.size() != train_inputs.cols()) {
        throw ShapeError("decision_values: feature dimension differs from training inputs");
    }
    if (w.rows() != train_inputs.rows() || w.cols() != w0.size()) {
        throw ShapeError("decision_values: coefficient shape differs from training inputs");
    }
    const Matrix kx = cross_kernel(x.transpose(), train_inputs, theta);
    return w0 + (kx * w).transpose();
}

Vector posterior_not_class_scores(const Vector& x, const PosteriorSamples& samples,
                                  const Matrix& train_inputs) {
    check_samples(samples, train_inputs);
    const int c = static_cast<int>(samples.records.front().w0.size());
    const double off = margin_offset(c);
    Vector acc = Vector::Zero(c);
    for (const auto& r : samples.records) {
        const Vector f = decision_values(x, r.w0, r.w, train_inputs, r.theta);
        for (int j = 0; j < c; ++j) {
            acc(j) += not_class_score(f(j), off);
        }
    }
    return acc / static_cast<double>(samples.records.size());
}

int argmin_first(const Vector& v) {
    int best = 0;
    for (int j = 1; j < v.size(); ++j) {
        if (v(j) < v(best)) {
            best = j;
        }
    }
    return best;
}

Prediction classify(const Vector& x, const PosteriorSamples& samples, const Matrix& train_inputs,
                    bool keep_decision_values) {
    Prediction p;
    p.not_class_scores = posterior_not_class_scores(x, samples, train_inputs);
    p.label = argmin_first(p.not_class_scores);
    if (keep_decision_values) {
        const auto t = static_cast<Eigen::Index>(samples.records.size());
        p.per_sample_f.resize(t, p.not_class_scores.size());
        for (Eigen::Index k = 0; k < t; ++k) {
            const auto& r = samples.records[static_cast<std::size_t>(k)];
            p.per_sample_f.row(k) = decision_values(x, r.w0, r.w, train_inputs, r.theta).transpose();
        }
    }
    return p;
}

namespace {

/// Visits (sample index, m x c decision matrix) for every retained sample.
template <typename Fn>
void for_each_decision_matrix(const Matrix& test_inputs, const FittedModel& model, Fn&& fn) {
    check_samples(model.samples, model.train_inputs);
    if (test_inputs.cols() != model.train_inputs.cols()) {
        throw ShapeError("test inputs have a different feature dimension than the model");
    }
    std::map<double, Matrix> cross;
    const auto& recs = model.samples.records;
    for (std::size_t t = 0; t < recs.size(); ++t) {
        const auto& r = recs[t];
        auto it = cross.find(r.theta);
        if (it == cross.end()) {
            if (cross.size() > 8) {
                cross.clear();
            }
            it = cross.emplace(r.theta, cross_kernel(test_inputs, model.train_inputs, r.theta)).first;
        }
        Matrix f = it->second * r.w;
        f.rowwise() += r.w0.transpose();
        fn(t, f);
    }
}

} // namespace

std::vector<Prediction> predict_batch(const Matrix& test_inputs, const FittedModel& model,
                                      bool keep_decision_values) {
    const Eigen::Index m = test_inputs.rows();
    const int c = model.num_classes;
    const auto t_count = static_cast<Eigen::Index>(model.samples.records.size());
    std::vector<Prediction> out(static_cast<std::size_t>(m));
    if (m == 0) {
        return out;
    }
    const double off = margin_offset(c);
    Matrix acc = Matrix::Zero(m, c);
    for (auto& p : out) {
        if (keep_decision_values) {
            p.per_sample_f.resize(t_count, c);
        }
    }
    for_each_decision_matrix(test_inputs, model, [&](std::size_t t, const Matrix& f) {
        acc += f.unaryExpr([off](double v) { return not_class_score(v, off); });
        if (keep_decision_values) {
            for (Eigen::Index i = 0; i < m; ++i) {
                out[static_cast<std::size_t>(i)].per_sample_f.row(static_cast<Eigen::Index>(t)) = f.row(i);
            }
        }
    });
    acc /= static_cast<double>(t_count);
    for (Eigen::Index i = 0; i < m; ++i) {
        auto& p = out[static_cast<std::size_t>(i)];
        p.not_class_scores = acc.row(i).transpose();
        p.label = argmin_first(p.not_class_scores);
    }
    return out;
}

Matrix predict_alt_probabilities(const Matrix& test_inputs, const FittedModel& model) {
    Matrix acc = Matrix::Zero(test_inputs.rows(), model.num_classes);
    if (test_inputs.rows() == 0) {
        return acc;
    }
    for_each_decision_matrix(test_inputs, model, [&](std::size_t, const Matrix& f) {
        for (Eigen::Index i = 0; i < f.rows(); ++i) {
            acc.row(i) += alt_class_probabilities(f.row(i).transpose()).transpose();
        }
    });
    return acc / static_cast<double>(model.samples.records.size());
}

void write_predictions_csv(std::ostream& out, const std::vector<Prediction>& predictions,
                           int num_classes, const std::vector<std::string>& label_names) {
    out << "id,predicted_label";
    for (int j = 0; j < num_classes; ++j) {
        out << ",score_" << to_user_label(j);
    }
    out << '\n' << std::setprecision(17);
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const auto& p = predictions[i];
        const auto label = static_cast<std::size_t>(p.label);
        out << i + 1 << ',' << (label < label_names.size() ? label_names[label] : std::to_string(to_user_label(p.label)));
        for (int j = 0; j < num_classes; ++j) {
            out << ',' << p.not_class_scores(j);
        }
        out << '\n';
    }
}

} // namespace bmsvm
