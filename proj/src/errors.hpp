#pragma once

#include <stdexcept>
#include <string>

namespace moar {

enum class ErrorKind {
  Parse,              // malformed YAML/JSON input
  Validation,         // pipeline or schema violations
  UnknownModel,
  IndexOutOfRange,
  PointNotFound,
  InvalidParams,      // instantiation parameters violate a directive schema
  RewriteInvalid,     // applied rewrite fails pipeline validation
  NoApplicableDirective,
  InstantiationFailed,  // retry limit exhausted
  Endpoint,             // agent transport failure
  EvaluatorTransport,   // simulated "API outage" during evaluation
  BudgetExhausted,
  SearchSpaceExhausted,
  Internal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) {
  throw Error(kind, msg);
}

}  // namespace moar
