#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bmsvm {

/// Broad failure class, used by the CLI to pick an exit code.
enum class ErrorCategory { config, data, numerical, internal };

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

/// A scalar argument outside its domain (nonpositive width, bad hyperparameter, ...).
class ParameterError : public Error {
public:
    explicit ParameterError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

/// Sum-to-zero constraint on (w0, W) violated.
class ConstraintError : public Error {
public:
    explicit ConstraintError(const std::string& what) : Error(ErrorCategory::internal, what) {}
};

/// Cholesky failed even after jitter; carries the smallest eigenvalue of the input.
class ConditioningError : public Error {
public:
    ConditioningError(const std::string& what, double smallest_eigenvalue)
        : Error(ErrorCategory::numerical, what), smallest_eigenvalue_(smallest_eigenvalue) {}

    double smallest_eigenvalue() const noexcept { return smallest_eigenvalue_; }

private:
    double smallest_eigenvalue_;
};

/// Matrix with no eigenvalue above the rank tolerance.
class DegenerateMatrixError : public Error {
public:
    explicit DegenerateMatrixError(const std::string& what) : Error(ErrorCategory::numerical, what) {}
};

class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, long iteration)
        : Error(ErrorCategory::numerical, what), iteration_(iteration) {}

    long iteration() const noexcept { return iteration_; }

private:
    long iteration_;
};

/// Malformed input file. Row and column are 1-based; 0 means "not applicable".
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t row, std::size_t column)
        : Error(ErrorCategory::data, what), row_(row), column_(column) {}

    std::size_t row() const noexcept { return row_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::size_t column_;
};

/// A training fold or split lost every member of some class.
class FoldDegeneracyError : public Error {
public:
    FoldDegeneracyError(const std::string& what, int missing_class)
        : Error(ErrorCategory::data, what), missing_class_(missing_class) {}

    /// 1-based label of the vanished class.
    int missing_class() const noexcept { return missing_class_; }

private:
    int missing_class_;
};

} // namespace bmsvm
