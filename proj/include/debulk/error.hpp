#pragma once

#include <stdexcept>
#include <string>

namespace debulk {

/// Raised for precondition violations and unrecoverable stage failures.
/// Callers that need to degrade gracefully (the pipeline) catch this per pocket.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace debulk
