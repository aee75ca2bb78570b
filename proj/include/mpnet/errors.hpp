#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mpnet {

/// Broad failure classes; the CLI maps each onto an exit code.
enum class ErrorClass { config, data, stage_order };

class Error : public std::runtime_error {
public:
  Error(std::string kind, ErrorClass cls, const std::string &what)
      : std::runtime_error(what), kind_(std::move(kind)), class_(cls) {}

  const std::string &kind() const noexcept { return kind_; }
  ErrorClass error_class() const noexcept { return class_; }

private:
  std::string kind_;
  ErrorClass class_;
};

class SchemaError : public Error {
public:
  SchemaError(const std::string &what, std::vector<std::string> columns = {})
      : Error("SchemaError", ErrorClass::data, what),
        columns_(std::move(columns)) {}
  const std::vector<std::string> &columns() const noexcept { return columns_; }

private:
  std::vector<std::string> columns_;
};

class ParseError : public Error {
public:
  ParseError(const std::string &what, std::size_t row, std::size_t column)
      : Error("ParseError", ErrorClass::data, what), row_(row),
        column_(column) {}
  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

private:
  std::size_t row_;
  std::size_t column_;
};

class EmptyJoinError : public Error {
public:
  explicit EmptyJoinError(const std::string &what)
      : Error("EmptyJoinError", ErrorClass::data, what) {}
};

class ImputationError : public Error {
public:
  explicit ImputationError(const std::string &column)
      : Error("ImputationError", ErrorClass::data,
              "column '" + column + "' has no observed values"),
        column_(column) {}
  const std::string &column() const noexcept { return column_; }

private:
  std::string column_;
};

class DomainError : public Error {
public:
  explicit DomainError(const std::string &what)
      : Error("DomainError", ErrorClass::data, what) {}
};

class ConfigError : public Error {
public:
  explicit ConfigError(const std::string &what)
      : Error("ConfigError", ErrorClass::config, what) {}
};

class StageOrderError : public Error {
public:
  explicit StageOrderError(const std::string &what)
      : Error("StageOrderError", ErrorClass::stage_order, what) {}
};

class InsufficientDataError : public Error {
public:
  InsufficientDataError(const std::string &what, bool zero_variance = false)
      : Error("InsufficientDataError", ErrorClass::data, what),
        zero_variance_(zero_variance) {}
  bool zero_variance() const noexcept { return zero_variance_; }

private:
  bool zero_variance_;
};

/// Process exit code for an error class: 2 config, 3 data, 4 stage order.
int exit_code(ErrorClass cls) noexcept;

} // namespace mpnet
