#pragma once

#include "bmsvm/kernel.hpp"
#include "bmsvm/sampler.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace bmsvm {

/// What a trained classifier needs at prediction time. MAP fits are stored as
/// a single record.
struct FittedModel {
    Matrix train_inputs;
    int num_classes = 0;
    PosteriorSamples samples;
};

struct Prediction {
    /// 0-based internal class index.
    int label = 0;
    /// Averaged exp{-(f_j + 1/(c-1))_+}, the "not class j" scores, each in (0, 1].
    Vector not_class_scores;
    /// T x c decision values, only filled on request.
    Matrix per_sample_f;
};

/// f_j(x) = w0_j + sum_i w_ij K(x, x_i).
Vector decision_values(const Vector& x, const Vector& w0, const Matrix& w, const Matrix& train_inputs,
                       double theta);

/// (1/T) sum_t exp{-(f_j^(t)(x) + 1/(c-1))_+} for every class j.
Vector posterior_not_class_scores(const Vector& x, const PosteriorSamples& samples,
                                  const Matrix& train_inputs);

/// Index of the smallest entry; ties go to the lowest index.
int argmin_first(const Vector& v);

Prediction classify(const Vector& x, const PosteriorSamples& samples, const Matrix& train_inputs,
                    bool keep_decision_values = false);

/// Row-wise classify over a test matrix, reusing the cross-kernel for every
/// sample that shares a theta value.
std::vector<Prediction> predict_batch(const Matrix& test_inputs, const FittedModel& model,
                                      bool keep_decision_values = false);

/// Sample-averaged softmax-of-hinge class probabilities, one row per test point.
Matrix predict_alt_probabilities(const Matrix& test_inputs, const FittedModel& model);

/// CSV with header id,predicted_label,score_1..score_c. Labels are written
/// through `label_names` (index = internal label); ids are 1-based row numbers.
void write_predictions_csv(std::ostream& out, const std::vector<Prediction>& predictions,
                           int num_classes, const std::vector<std::string>& label_names);

} // namespace bmsvm
