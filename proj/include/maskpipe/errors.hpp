#pragma once

#include <stdexcept>
#include <string>

namespace maskpipe {

/// Broad failure class, used by the CLI to pick an exit code.
enum class ErrorCategory {
  Validation,  // bad values, violated invariants, configuration mistakes
  Io,          // missing files, malformed containers and documents
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

#define MASKPIPE_DEFINE_ERROR(Name, Category)                      \
  class Name : public Error {                                      \
   public:                                                         \
    explicit Name(const std::string& what)                         \
        : Error(ErrorCategory::Category, what) {}                  \
  };

MASKPIPE_DEFINE_ERROR(InvalidGeometryError, Validation)
MASKPIPE_DEFINE_ERROR(DecodeError, Validation)
MASKPIPE_DEFINE_ERROR(ConfigError, Validation)
MASKPIPE_DEFINE_ERROR(InvalidAnnotationError, Validation)
MASKPIPE_DEFINE_ERROR(MissingSupportError, Validation)
MASKPIPE_DEFINE_ERROR(SingularCovarianceError, Validation)
MASKPIPE_DEFINE_ERROR(DimensionError, Validation)
MASKPIPE_DEFINE_ERROR(ModelError, Validation)
MASKPIPE_DEFINE_ERROR(ParseError, Io)
MASKPIPE_DEFINE_ERROR(FormatError, Io)
MASKPIPE_DEFINE_ERROR(IoError, Io)

#undef MASKPIPE_DEFINE_ERROR

}  // namespace maskpipe
