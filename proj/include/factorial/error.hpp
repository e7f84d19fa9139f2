#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace factorial {

// Base for every error raised by the library. The CLI maps these to exit code 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input violates a documented precondition or invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class InsufficientDataError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class InfeasibleDesignError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class RankDeficientError : public Error {
public:
    RankDeficientError(const std::string& what, std::vector<std::string> columns)
        : Error(what), columns_(std::move(columns)) {}

    const std::vector<std::string>& columns() const noexcept { return columns_; }

private:
    std::vector<std::string> columns_;
};

class SingularMatrixError : public Error {
public:
    using Error::Error;
};

// CSV ingestion errors carry the offending location.
class CsvError : public ValidationError {
public:
    CsvError(const std::string& what, std::size_t row, std::string column)
        : ValidationError(what), row_(row), column_(std::move(column)) {}

    std::size_t row() const noexcept { return row_; }
    const std::string& column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::string column_;
};

class UnknownLevelError : public CsvError {
public:
    using CsvError::CsvError;
};

class DuplicateUnitError : public CsvError {
public:
    using CsvError::CsvError;
};

class MissingColumnError : public CsvError {
public:
    using CsvError::CsvError;
};

class MissingValueError : public CsvError {
public:
    using CsvError::CsvError;
};

}  // namespace factorial
