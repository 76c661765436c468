#pragma once

#include <stdexcept>
#include <string>

namespace vle {

/// Base of every domain error raised by the library. `kind()` carries the
/// qualified error name (e.g. "IngestError::MissingTable") that the CLI
/// prints before exiting with status 1.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(kind + ": " + message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define VLE_DEFINE_ERROR(Name)                                        \
  class Name : public Error {                                         \
   public:                                                            \
    Name(const std::string& variant, const std::string& message)      \
        : Error(variant.empty() ? std::string(#Name)                  \
                                : std::string(#Name) + "::" + variant, \
                message) {}                                           \
    explicit Name(const std::string& message) : Name("", message) {}  \
  };

VLE_DEFINE_ERROR(IngestError)
VLE_DEFINE_ERROR(RegistrationError)
VLE_DEFINE_ERROR(EncodeError)
VLE_DEFINE_ERROR(FilterError)
VLE_DEFINE_ERROR(SplitError)
VLE_DEFINE_ERROR(ConfigError)
VLE_DEFINE_ERROR(ShapeError)
VLE_DEFINE_ERROR(StateError)
VLE_DEFINE_ERROR(LabelError)
VLE_DEFINE_ERROR(TrainError)
VLE_DEFINE_ERROR(CheckpointError)
VLE_DEFINE_ERROR(EvalError)
VLE_DEFINE_ERROR(CorrelationError)
VLE_DEFINE_ERROR(IoError)

#undef VLE_DEFINE_ERROR

}  // namespace vle
