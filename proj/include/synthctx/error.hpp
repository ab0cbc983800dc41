#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace synthctx {

// Base of every error raised by the library. The CLI maps the concrete
// subclasses onto process exit codes (see exit_code_for).
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
  public:
    using Error::Error;
};

class ValidationError : public Error {
  public:
    using Error::Error;
};

class BudgetError : public Error {
  public:
    BudgetError(const std::string& what, std::size_t overflow)
        : Error(what), overflow_(overflow) {}
    std::size_t overflow() const noexcept { return overflow_; }

  private:
    std::size_t overflow_;
};

class GenerationError : public Error {
  public:
    using Error::Error;
};

class ParseError : public Error {
  public:
    using Error::Error;
};

class MissingFieldsError : public ParseError {
  public:
    explicit MissingFieldsError(std::vector<std::string> fields)
        : ParseError(describe(fields)), fields_(std::move(fields)) {}
    const std::vector<std::string>& fields() const noexcept { return fields_; }

  private:
    static std::string describe(const std::vector<std::string>& fields) {
        std::string s = "missing fields:";
        for (const auto& f : fields) s += " " + f;
        return s;
    }
    std::vector<std::string> fields_;
};

class TraversalError : public Error {
  public:
    using Error::Error;
};

class ConsistencyError : public Error {
  public:
    using Error::Error;
};

class TemplateError : public Error {
  public:
    using Error::Error;
};

class MissingEntityError : public ValidationError {
  public:
    using ValidationError::ValidationError;
};

class UndefinedMetricError : public Error {
  public:
    using Error::Error;
};

class TraceFormatError : public Error {
  public:
    TraceFormatError(std::size_t record, std::string field, const std::string& detail)
        : Error("trace record " + std::to_string(record) + ", field '" + field + "': " + detail),
          record_(record), field_(std::move(field)) {}
    std::size_t record() const noexcept { return record_; }
    const std::string& field() const noexcept { return field_; }

  private:
    std::size_t record_;
    std::string field_;
};

class IoError : public Error {
  public:
    using Error::Error;
};

class BackendError : public Error {
  public:
    BackendError(const std::string& what, int retries)
        : Error(what + " (after " + std::to_string(retries) + " retries)"), retries_(retries) {}
    int retries() const noexcept { return retries_; }

  private:
    int retries_;
};

class CacheMissError : public Error {
  public:
    using Error::Error;
};

// 0 success, 1 validation, 2 io, 3 backend.
int exit_code_for(const std::exception& e) noexcept;

}  // namespace synthctx
