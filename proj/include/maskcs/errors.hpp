#ifndef MASKCS_ERRORS_HPP
#define MASKCS_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace maskcs {

// Argument and domain violations use std::invalid_argument / std::domain_error
// directly. The types below cover the remaining failure categories.

/// A requested dense object or exhaustive enumeration exceeds its size cap.
class resource_limit_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iterative method broke down or did not reach its tolerance.
class convergence_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File could not be read, written or parsed.
class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace detail
}  // namespace maskcs

#endif  // MASKCS_ERRORS_HPP
