#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kcache {

// Dimension mismatch between tensors or against a model config.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Operation called in a state that does not admit it (double offload,
// decode before prefill, cache grown past max_seq).
class StateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed weight file. offset() is the byte position of the problem.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// Fast-tier byte budget exceeded.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace kcache
