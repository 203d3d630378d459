#pragma once

#include <stdexcept>
#include <string>

namespace flowsynth {

/// Base class of every error raised by the library. `kind()` groups errors
/// into the coarse categories the command line tool maps to exit codes.
class Error : public std::runtime_error {
 public:
  enum class Kind { kData, kIo };

  Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

#define FLOWSYNTH_DEFINE_ERROR(Name, KindValue)                                 \
  class Name : public Error {                                                   \
   public:                                                                      \
    explicit Name(const std::string& what) : Error(Kind::KindValue, what) {}    \
  };

FLOWSYNTH_DEFINE_ERROR(InvalidDimension, kData)
FLOWSYNTH_DEFINE_ERROR(InvalidParameter, kData)
FLOWSYNTH_DEFINE_ERROR(DegenerateGeometry, kData)
FLOWSYNTH_DEFINE_ERROR(DegenerateLayer, kData)
FLOWSYNTH_DEFINE_ERROR(EmptyCorpus, kData)
FLOWSYNTH_DEFINE_ERROR(EmptyEvaluation, kData)
FLOWSYNTH_DEFINE_ERROR(FormatError, kData)
FLOWSYNTH_DEFINE_ERROR(EncodeError, kData)
FLOWSYNTH_DEFINE_ERROR(IoError, kIo)

#undef FLOWSYNTH_DEFINE_ERROR

}  // namespace flowsynth
