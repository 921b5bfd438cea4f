#include "bmsvm/dataset.hpp"

#include "bmsvm/error.hpp"
#include "bmsvm/random.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>
#include <unordered_map>

namespace bmsvm {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    std::string out(s.substr(first, last - first + 1));
    if (out.size() >= 2 && out.front() == '"' && out.back() == '"') {
        out = out.substr(1, out.size() - 2);
    }
    return out;
}

std::vector<std::string> split_line(const std::string& line, char delim) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(delim, start);
        cells.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
        if (pos == std::string::npos) {
            break;
        }
        start = pos + 1;
    }
    return cells;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;
};

CsvTable read_table(const std::string& path, const CsvOptions& options) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open " + path, 0, 0);
    }
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        auto cells = split_line(line, options.delimiter);
        if (options.header && table.header.empty() && table.rows.empty()) {
            table.header = std::move(cells);
            width = table.header.size();
            continue;
        }
        if (width == 0) {
            width = cells.size();
        }
        if (cells.size() != width) {
            std::ostringstream os;
            os << path << ": row " << line_no << " has " << cells.size() << " fields, expected " << width;
            throw ParseError(os.str(), line_no, 0);
        }
        table.rows.push_back(std::move(cells));
        table.line_numbers.push_back(line_no);
    }
    if (table.header.empty() && !table.rows.empty()) {
        for (std::size_t k = 0; k < width; ++k) {
            table.header.push_back("x" + std::to_string(k + 1));
        }
    }
    return table;
}

std::size_t resolve_column(const CsvTable& table, const ColumnRef& ref, const std::string& path) {
    const std::size_t width = table.header.size();
    if (const auto* name = std::get_if<std::string>(&ref)) {
        const auto it = std::find(table.header.begin(), table.header.end(), *name);
        if (it == table.header.end()) {
            throw ParseError(path + ": no column named '" + *name + "'", 0, 0);
        }
        return static_cast<std::size_t>(it - table.header.begin());
    }
    const int idx = std::get<int>(ref);
    const long resolved = idx < 0 ? static_cast<long>(width) + idx : idx;
    if (resolved < 0 || resolved >= static_cast<long>(width)) {
        std::ostringstream os;
        os << path << ": label column index " << idx << " out of range for " << width << " columns";
        throw ParseError(os.str(), 0, 0);
    }
    return static_cast<std::size_t>(resolved);
}

double parse_cell(const std::string& cell, const std::string& path, std::size_t row, std::size_t col) {
    if (cell.empty() || cell == "?" || cell == "NA") {
        std::ostringstream os;
        os << path << ": missing value at row " << row << ", column " << col;
        throw ParseError(os.str(), row, col);
    }
    double v = 0.0;
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    if (*begin == '+') {
        ++begin;
    }
    const auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
        std::ostringstream os;
        os << path << ": non-numeric value '" << cell << "' at row " << row << ", column " << col;
        throw ParseError(os.str(), row, col);
    }
    return v;
}

Matrix numeric_block(const CsvTable& table, const std::vector<std::size_t>& columns, const std::string& path) {
    Matrix x(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        for (std::size_t k = 0; k < columns.size(); ++k) {
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
                parse_cell(table.rows[i][columns[k]], path, table.line_numbers[i], columns[k] + 1);
        }
    }
    return x;
}

} // namespace

RawDataset RawDataset::subset(const std::vector<int>& rows) const {
    RawDataset out;
    out.features = features(rows, Eigen::all);
    out.labels.reserve(rows.size());
    for (int r : rows) {
        out.labels.push_back(labels[static_cast<std::size_t>(r)]);
    }
    out.label_vocabulary = label_vocabulary;
    out.feature_names = feature_names;
    out.label_name = label_name;
    return out;
}

RawDataset load_csv(const std::string& path, const ColumnRef& label_column, CsvOptions options) {
    const CsvTable table = read_table(path, options);
    if (table.header.empty()) {
        throw ParseError(path + ": empty file", 0, 0);
    }
    const std::size_t label_col = resolve_column(table, label_column, path);
    std::vector<std::size_t> feature_cols;
    RawDataset ds;
    if (options.header) {
        ds.label_name = table.header[label_col];
    }
    for (std::size_t k = 0; k < table.header.size(); ++k) {
        if (k != label_col) {
            feature_cols.push_back(k);
            ds.feature_names.push_back(table.header[k]);
        }
    }
    ds.features = numeric_block(table, feature_cols, path);

    std::unordered_map<std::string, int> codes;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const std::string& token = table.rows[i][label_col];
        if (token.empty()) {
            throw ParseError(path + ": missing label at row " + std::to_string(table.line_numbers[i]),
                             table.line_numbers[i], label_col + 1);
        }
        auto [it, inserted] = codes.emplace(token, static_cast<int>(ds.label_vocabulary.size()));
        if (inserted) {
            ds.label_vocabulary.push_back(token);
        }
        ds.labels.push_back(it->second);
    }
    return ds;
}

Matrix load_features_csv(const std::string& path, CsvOptions options, const std::string& drop_column,
                         std::vector<std::string>* feature_names) {
    const CsvTable table = read_table(path, options);
    std::vector<std::size_t> cols;
    std::vector<std::string> names;
    for (std::size_t k = 0; k < table.header.size(); ++k) {
        if (!options.header || table.header[k] != drop_column) {
            cols.push_back(k);
            names.push_back(table.header[k]);
        }
    }
    if (feature_names) {
        *feature_names = names;
    }
    return numeric_block(table, cols, path);
}

StandardizationStats StandardizationStats::fit(const Matrix& x) {
    if (x.rows() == 0) {
        throw ShapeError("standardize: empty training portion");
    }
    StandardizationStats st;
    st.means = x.colwise().mean().transpose();
    st.sds.resize(x.cols());
    for (Eigen::Index k = 0; k < x.cols(); ++k) {
        const double var = (x.col(k).array() - st.means(k)).square().mean();
        const double sd = std::sqrt(var);
        st.sds(k) = sd > 1e-12 * std::max(1.0, std::abs(st.means(k))) ? sd : 1.0;
    }
    return st;
}

Matrix StandardizationStats::apply(const Matrix& x) const {
    if (x.cols() != means.size()) {
        std::ostringstream os;
        os << "standardization expects " << means.size() << " features, found " << x.cols();
        throw ShapeError(os.str());
    }
    Matrix out = x.rowwise() - means.transpose();
    return out.array().rowwise() / sds.transpose().array();
}

Standardized standardize(const Matrix& train, const Matrix& apply_to) {
    Standardized out;
    out.stats = StandardizationStats::fit(train);
    out.train = out.stats.apply(train);
    out.applied = out.stats.apply(apply_to);
    return out;
}

std::vector<int> predict_labels(const FittedModel& model, const Matrix& test_inputs) {
    std::vector<int> labels;
    for (const auto& p : predict_batch(test_inputs, model)) {
        labels.push_back(p.label);
    }
    return labels;
}

namespace {

/// Runs task(i) for i in [0, count) on up to `jobs` threads. Rethrows the
/// exception of the lowest failing index.
template <typename Task>
void run_parallel(int count, int jobs, const Task& task, const ProgressFn& progress) {
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
    std::atomic<int> next{0};
    std::atomic<int> done{0};
    std::mutex progress_mutex;
    auto worker = [&] {
        for (int i = next++; i < count; i = next++) {
            try {
                task(i);
            } catch (...) {
                errors[static_cast<std::size_t>(i)] = std::current_exception();
            }
            const int d = ++done;
            if (progress) {
                std::lock_guard lock(progress_mutex);
                progress(d, count);
            }
        }
    };
    const int threads = std::max(1, std::min(jobs, count));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back(worker);
        }
        for (auto& th : pool) {
            th.join();
        }
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

void require_all_classes(const std::vector<int>& labels, int c, const std::string& where) {
    std::vector<int> counts(static_cast<std::size_t>(c), 0);
    for (int y : labels) {
        ++counts[static_cast<std::size_t>(y)];
    }
    for (int j = 0; j < c; ++j) {
        if (counts[static_cast<std::size_t>(j)] == 0) {
            std::ostringstream os;
            os << where << ": class " << to_user_label(j) << " vanished from the training data";
            throw FoldDegeneracyError(os.str(), to_user_label(j));
        }
    }
}

} // namespace

EvalResult leave_one_out(const RawDataset& ds, const Trainer& trainer, const Predictor& predictor,
                         std::uint64_t seed, int jobs, const ProgressFn& progress) {
    const int n = static_cast<int>(ds.n());
    if (n < 2) {
        throw ShapeError("leave_one_out: need at least two rows");
    }
    const int c = ds.num_classes();
    std::vector<double> losses(static_cast<std::size_t>(n), 0.0);

    run_parallel(n, jobs, [&](int held_out) {
        std::vector<int> train_rows;
        train_rows.reserve(static_cast<std::size_t>(n - 1));
        for (int i = 0; i < n; ++i) {
            if (i != held_out) {
                train_rows.push_back(i);
            }
        }
        const RawDataset train = ds.subset(train_rows);
        require_all_classes(train.labels, c, "leave-one-out fold " + std::to_string(held_out + 1));
        const Standardized z = standardize(train.features, ds.features.row(held_out));
        const TrainingSet ts(z.train, train.labels, c);
        const FittedModel model = trainer(ts, derive_seed(seed, static_cast<std::uint64_t>(held_out)));
        const std::vector<int> pred = predictor(model, z.applied);
        losses[static_cast<std::size_t>(held_out)] = pred.at(0) == ds.labels[static_cast<std::size_t>(held_out)] ? 0.0 : 1.0;
    }, progress);

    EvalResult res;
    res.protocol = Protocol::loo;
    res.per_split_errors = losses;
    res.n_test = n;
    res.n_errors = static_cast<long>(std::count(losses.begin(), losses.end(), 1.0));
    res.error_rate = static_cast<double>(res.n_errors) / static_cast<double>(n);
    res.seed = seed;
    return res;
}

SplitIndices random_split_indices(Eigen::Index n, Eigen::Index n_train, std::uint64_t seed, int repeat) {
    if (n_train <= 0 || n_train >= n) {
        std::ostringstream os;
        os << "random split: n_train must lie in [1, " << n - 1 << "], got " << n_train;
        throw ParameterError(os.str());
    }
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng = make_rng(derive_seed(seed, 0x53504c4954ULL), static_cast<std::uint64_t>(repeat));
    std::shuffle(perm.begin(), perm.end(), rng);
    SplitIndices out;
    out.train.assign(perm.begin(), perm.begin() + n_train);
    out.test.assign(perm.begin() + n_train, perm.end());
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

EvalResult random_splits(const RawDataset& ds, Eigen::Index n_train, int n_repeats,
                         const Trainer& trainer, const Predictor& predictor, std::uint64_t seed,
                         int jobs, const ProgressFn& progress) {
    if (n_repeats < 1) {
        throw ParameterError("random_splits: n_repeats must be positive");
    }
    const int c = ds.num_classes();
    std::vector<double> rates(static_cast<std::size_t>(n_repeats), 0.0);
    std::vector<long> errors(static_cast<std::size_t>(n_repeats), 0);
    const Eigen::Index n_test = ds.n() - n_train;

    run_parallel(n_repeats, jobs, [&](int rep) {
        const SplitIndices idx = random_split_indices(ds.n(), n_train, seed, rep);
        const RawDataset train = ds.subset(idx.train);
        const RawDataset test = ds.subset(idx.test);
        require_all_classes(train.labels, c, "split repeat " + std::to_string(rep + 1));
        const Standardized z = standardize(train.features, test.features);
        const TrainingSet ts(z.train, train.labels, c);
        const FittedModel model = trainer(ts, derive_seed(seed, static_cast<std::uint64_t>(rep)));
        const std::vector<int> pred = predictor(model, z.applied);
        long wrong = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            wrong += pred[i] != test.labels[i] ? 1 : 0;
        }
        errors[static_cast<std::size_t>(rep)] = wrong;
        rates[static_cast<std::size_t>(rep)] = static_cast<double>(wrong) / static_cast<double>(n_test);
    }, progress);

    EvalResult res;
    res.protocol = Protocol::split;
    res.per_split_errors = rates;
    res.n_test = n_test * n_repeats;
    res.n_errors = std::accumulate(errors.begin(), errors.end(), 0L);
    res.error_rate = std::accumulate(rates.begin(), rates.end(), 0.0) / static_cast<double>(n_repeats);
    res.seed = seed;
    return res;
}

std::string protocol_name(Protocol p) {
    return p == Protocol::loo ? "loo" : "split";
}

std::string eval_result_json(const EvalResult& result, const std::map<std::string, std::string>& metadata) {
    nlohmann::ordered_json j;
    j["protocol"] = protocol_name(result.protocol);
    j["error_rate"] = result.error_rate;
    j["n_errors"] = result.n_errors;
    j["n_test"] = result.n_test;
    j["seed"] = result.seed;
    j["standardization"] = result.standardization;
    j["per_split_errors"] = result.per_split_errors;
    for (const auto& [k, v] : metadata) {
        j["metadata"][k] = v;
    }
    return j.dump(2);
}

void write_summary_csv(std::ostream& out, const std::string& dataset, const std::string& method,
                       const EvalResult& result, const std::string& schedule, bool with_header) {
    if (with_header) {
        out << "dataset,method,protocol,error_rate,seed,schedule\n";
    }
    out << dataset << ',' << method << ',' << protocol_name(result.protocol) << ','
        << std::setprecision(10) << result.error_rate << ',' << result.seed << ',' << schedule << '\n';
}

} // namespace bmsvm
