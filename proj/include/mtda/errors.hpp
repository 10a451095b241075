#pragma once

#include <stdexcept>
#include <string>

namespace mtda {

// Root of every error raised by the library. Sub-types map onto the error
// kinds callers are expected to distinguish (bad file, bad config, ...).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define MTDA_DEFINE_ERROR(Name)      \
  class Name : public Error {        \
   public:                           \
    using Error::Error;              \
  }

MTDA_DEFINE_ERROR(FormatError);        // malformed file contents
MTDA_DEFINE_ERROR(ConsistencyError);   // mutually inconsistent inputs
MTDA_DEFINE_ERROR(ConfigError);        // invalid configuration value / key
MTDA_DEFINE_ERROR(ArgumentError);      // precondition violated by caller
MTDA_DEFINE_ERROR(NumericError);       // non-finite input
MTDA_DEFINE_ERROR(ShapeError);         // tensor shape mismatch
MTDA_DEFINE_ERROR(ScheduleError);      // invalid beta / schedule value
MTDA_DEFINE_ERROR(CheckpointError);    // version mismatch or truncated file
MTDA_DEFINE_ERROR(DivergenceError);    // non-finite or exploding loss
MTDA_DEFINE_ERROR(LabelAccessError);   // label read on an unlabeled dataset
MTDA_DEFINE_ERROR(UndefinedValueError);
MTDA_DEFINE_ERROR(IoError);

#undef MTDA_DEFINE_ERROR

}  // namespace mtda
