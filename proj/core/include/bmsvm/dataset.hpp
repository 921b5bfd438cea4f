#pragma once

#include "bmsvm/kernel.hpp"
#include "bmsvm/prediction.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace bmsvm {

/// Features plus labels encoded 0..c-1 in first-appearance order of the tokens.
struct RawDataset {
    Matrix features;
    std::vector<int> labels;
    std::vector<std::string> label_vocabulary;
    std::vector<std::string> feature_names;
    /// Header of the label column (empty without a header row).
    std::string label_name;

    Eigen::Index n() const noexcept { return features.rows(); }
    Eigen::Index p() const noexcept { return features.cols(); }
    int num_classes() const noexcept { return static_cast<int>(label_vocabulary.size()); }

    /// Rows in the given order; the vocabulary is kept whole.
    RawDataset subset(const std::vector<int>& rows) const;
};

struct CsvOptions {
    char delimiter = ',';
    bool header = true;
};

/// Column selector: a header name, or a 0-based index where negative values
/// count from the end (-1 = last column).
using ColumnRef = std::variant<std::string, int>;

/// Throws ParseError (with 1-based row/column) for unreadable files, blank or
/// non-numeric feature cells, ragged rows and unknown label columns.
RawDataset load_csv(const std::string& path, const ColumnRef& label_column, CsvOptions options = {});

/// Features only, for prediction. `drop_column` (if it names a header column)
/// is removed. Returns the matrix and writes the remaining names.
Matrix load_features_csv(const std::string& path, CsvOptions options, const std::string& drop_column,
                         std::vector<std::string>* feature_names = nullptr);

/// Column means and population standard deviations; zero-variance columns get sd 1.
struct StandardizationStats {
    Vector means;
    Vector sds;

    static StandardizationStats fit(const Matrix& x);
    Matrix apply(const Matrix& x) const;
};

struct Standardized {
    Matrix train;
    Matrix applied;
    StandardizationStats stats;
};

/// Statistics from `train` only; both matrices transformed with them.
Standardized standardize(const Matrix& train, const Matrix& apply_to);

enum class Protocol { loo, split };

struct EvalResult {
    Protocol protocol = Protocol::loo;
    double error_rate = 0.0;
    /// LOO: one 0/1 loss per held-out point. Split: one error rate per repeat.
    std::vector<double> per_split_errors;
    long n_test = 0;
    long n_errors = 0;
    std::uint64_t seed = 0;
    std::string standardization = "population";
};

using Trainer = std::function<FittedModel(const TrainingSet& ts, std::uint64_t seed)>;
/// Returns 0-based labels for the rows of `test_inputs`.
using Predictor = std::function<std::vector<int>(const FittedModel& model, const Matrix& test_inputs)>;
using ProgressFn = std::function<void(int done, int total)>;

/// Posterior-averaged arg-min labels; the default Predictor.
std::vector<int> predict_labels(const FittedModel& model, const Matrix& test_inputs);

/// Fold i trains on every row but i (standardized on those rows) with seed
/// derive_seed(seed, i) and predicts row i. Folds run on up to `jobs` threads;
/// the result does not depend on `jobs`.
EvalResult leave_one_out(const RawDataset& ds, const Trainer& trainer, const Predictor& predictor,
                         std::uint64_t seed, int jobs = 1, const ProgressFn& progress = {});

/// Train/test row indices of one uniform (unstratified) split.
struct SplitIndices {
    std::vector<int> train;
    std::vector<int> test;
};

SplitIndices random_split_indices(Eigen::Index n, Eigen::Index n_train, std::uint64_t seed, int repeat);

/// n_repeats uniform splits; error_rate is the mean of the per-repeat rates.
EvalResult random_splits(const RawDataset& ds, Eigen::Index n_train, int n_repeats,
                         const Trainer& trainer, const Predictor& predictor, std::uint64_t seed,
                         int jobs = 1, const ProgressFn& progress = {});

std::string protocol_name(Protocol p);

/// Pretty-printed JSON document; `metadata` entries are added as strings.
std::string eval_result_json(const EvalResult& result,
                             const std::map<std::string, std::string>& metadata = {});

/// dataset,method,protocol,error_rate,seed,schedule
void write_summary_csv(std::ostream& out, const std::string& dataset, const std::string& method,
                       const EvalResult& result, const std::string& schedule, bool with_header = true);

} // namespace bmsvm
