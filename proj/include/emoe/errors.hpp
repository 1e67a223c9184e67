#pragma once

#include <stdexcept>
#include <string>

namespace emoe {

/// Broad failure categories. The CLI maps `validation` to exit code 1 and
/// `runtime` to exit code 2.
enum class ErrorCategory { validation, runtime };

class Error : public std::runtime_error {
public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

private:
  ErrorCategory category_;
};

#define EMOE_DEFINE_ERROR(Name, Category)                                      \
  class Name : public Error {                                                  \
  public:                                                                      \
    explicit Name(const std::string& what)                                     \
        : Error(ErrorCategory::Category, what) {}                              \
  };

EMOE_DEFINE_ERROR(DimensionError, validation)
EMOE_DEFINE_ERROR(ValidationError, validation)
EMOE_DEFINE_ERROR(ConfigError, validation)
EMOE_DEFINE_ERROR(RegistryError, validation)
EMOE_DEFINE_ERROR(ParseError, validation)
EMOE_DEFINE_ERROR(CoverageError, validation)
EMOE_DEFINE_ERROR(FormatError, validation)
EMOE_DEFINE_ERROR(UnsupportedError, validation)
EMOE_DEFINE_ERROR(IoError, validation)
EMOE_DEFINE_ERROR(DegenerateError, runtime)
EMOE_DEFINE_ERROR(EmptyGraphError, runtime)
EMOE_DEFINE_ERROR(DivergenceError, runtime)
EMOE_DEFINE_ERROR(InternalError, runtime)

#undef EMOE_DEFINE_ERROR

} // namespace emoe
