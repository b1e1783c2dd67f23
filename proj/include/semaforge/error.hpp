#pragma once

#include <stdexcept>
#include <string>

namespace semaforge {

/// Base class for every domain error raised by the library. The CLI maps
/// these to exit status 1 and the service to HTTP 400.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* code() const noexcept { return "error"; }
};

#define SEMAFORGE_ERROR(Name, Code)                          \
  class Name : public Error {                                \
   public:                                                   \
    using Error::Error;                                      \
    const char* code() const noexcept override { return Code; } \
  }

SEMAFORGE_ERROR(ShapeError, "shape_error");
SEMAFORGE_ERROR(DomainError, "domain_error");
SEMAFORGE_ERROR(InvalidArgument, "invalid_argument");
SEMAFORGE_ERROR(EmptyDatasetError, "empty_dataset");
SEMAFORGE_ERROR(InsufficientSamplesError, "insufficient_samples");
SEMAFORGE_ERROR(ValidationError, "validation_error");
SEMAFORGE_ERROR(DecodeError, "decode_error");
SEMAFORGE_ERROR(IoError, "io_error");
SEMAFORGE_ERROR(NotFoundError, "not_found");

#undef SEMAFORGE_ERROR

}  // namespace semaforge
