#pragma once

#include <stdexcept>
#include <string>

namespace dforge {

// Constraint failure inside a caption/question derivation. Callers move on to
// the next template; it never escapes generate_dialogs.
class GenerationAbort : public std::runtime_error {
 public:
  explicit GenerationAbort(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed program: bad arity, unknown parameter, type mismatch between steps.
class ProgramError : public std::runtime_error {
 public:
  explicit ProgramError(const std::string& what) : std::runtime_error(what) {}
};

class GenerationError : public std::runtime_error {
 public:
  explicit GenerationError(const std::string& what) : std::runtime_error(what) {}
};

// The questioner state received a fact contradicting what it already knows.
// The answerer is ground truth, so this always indicates a generator bug.
class ConsistencyError : public std::logic_error {
 public:
  explicit ConsistencyError(const std::string& what) : std::logic_error(what) {}
};

class AlignmentError : public std::runtime_error {
 public:
  explicit AlignmentError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dforge
