#pragma once

#include <stdexcept>
#include <string>

namespace oscl {

/// Base of every error the library raises. `kind()` is a stable
/// machine-readable tag used by the CLI error record.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* kind() const noexcept = 0;
};

#define OSCL_DEFINE_ERROR(Name, tag)                              \
  class Name : public Error {                                     \
   public:                                                        \
    using Error::Error;                                           \
    const char* kind() const noexcept override { return tag; }    \
  };

OSCL_DEFINE_ERROR(SchemaError, "schema")
OSCL_DEFINE_ERROR(DataError, "data")
OSCL_DEFINE_ERROR(RangeError, "range")
OSCL_DEFINE_ERROR(ValidationError, "validation")
OSCL_DEFINE_ERROR(IoError, "io")
OSCL_DEFINE_ERROR(DesignError, "design")
OSCL_DEFINE_ERROR(LengthError, "length")
OSCL_DEFINE_ERROR(TypeError, "type")
OSCL_DEFINE_ERROR(NumericError, "numeric")
OSCL_DEFINE_ERROR(NoDominantModeError, "no_dominant_mode")
OSCL_DEFINE_ERROR(ConditioningError, "conditioning")
OSCL_DEFINE_ERROR(ScenarioError, "scenario")
OSCL_DEFINE_ERROR(UsageError, "usage")

#undef OSCL_DEFINE_ERROR

}  // namespace oscl
