#pragma once

#include <stdexcept>
#include <string>

namespace ecount {

/// Raised for violated preconditions and invalid inputs anywhere in the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A counter's error profile has no samples for the branch a window needs.
class UnprofiledRegime : public Error {
 public:
  explicit UnprofiledRegime(const std::string& counter_id)
      : Error("unprofiled regime for counter '" + counter_id + "'") {}
};

}  // namespace ecount
