#ifndef PGNN_ERRORS_HPP
#define PGNN_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pgnn {

// Numerically singular or ill-conditioned linear system; carries the
// condition estimate that triggered the rejection.
class singular_matrix_error : public std::runtime_error {
 public:
  singular_matrix_error(const std::string& what, double condition_estimate)
      : std::runtime_error(what + " (condition estimate " + std::to_string(condition_estimate) + ")"),
        condition(condition_estimate) {}
  double condition;
};

// Malformed file content; carries the byte offset where parsing failed.
class format_error : public std::runtime_error {
 public:
  format_error(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        byte_offset(offset) {}
  std::size_t byte_offset;
};

// Structurally valid input on which the operation is undefined
// (zero matrix into a normalizer, zero oracle rate, ...).
class degenerate_input_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite value produced during evaluation or training; carries the
// index of the offending sample when known.
class numeric_error : public std::runtime_error {
 public:
  numeric_error(const std::string& what, std::ptrdiff_t sample = -1)
      : std::runtime_error(sample >= 0 ? what + " (sample " + std::to_string(sample) + ")" : what),
        sample_index(sample) {}
  std::ptrdiff_t sample_index;
};

// A guaranteed internal property was violated; signals an implementation bug.
class internal_consistency_error : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace pgnn

#endif
