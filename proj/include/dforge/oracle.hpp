#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dforge/grammar.hpp"
#include "dforge/program.hpp"
#include "dforge/scene.hpp"

namespace dforge {

/// One-word answer. `object` is set when answering reveals which object a
/// relation led to (seek-attr-rel-*), so the questioner can track it.
struct Answer {
  std::string token;
  std::optional<int> object;
  bool operator==(const Answer&) const = default;
};

/// yes/no, 0..10, shapes, colors, sizes, materials, none: 29 tokens in a fixed order.
const std::vector<std::string>& answer_vocabulary();
bool in_vocabulary(std::string_view token);

/// Maps a program's terminal value to its answer token.
std::string answer_token(const Value& terminal);

/// Rewrites entity handles "e<k>" into full-scene object ids.
Program ground_program(const Program& program, std::span<const std::pair<int, int>> grounding);

/// Runs the grounded program against the full scene.
Answer answer(const QuestionCandidate& question, const Scene& scene);

/// Answers an already grounded program (used when re-checking dataset files).
std::string answer_program(const Program& grounded, const Scene& scene);

}  // namespace dforge
