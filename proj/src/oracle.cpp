#include "dforge/oracle.hpp"

#include <algorithm>
#include <charconv>

#include "dforge/errors.hpp"

namespace dforge {
namespace {

std::optional<int> handle_entity(std::string_view h) {
  if (h.size() < 2 || h.front() != 'e') return std::nullopt;
  int value = 0;
  auto [ptr, ec] = std::from_chars(h.data() + 1, h.data() + h.size(), value);
  if (ec != std::errc{} || ptr != h.data() + h.size()) return std::nullopt;
  return value;
}

std::string ground_arg(const std::string& arg, std::span<const std::pair<int, int>> grounding) {
  std::string out;
  std::size_t start = 0;
  while (start <= arg.size()) {
    std::size_t comma = arg.find(',', start);
    std::string_view part = std::string_view(arg).substr(start, comma == std::string::npos ? std::string::npos
                                                                                            : comma - start);
    if (!out.empty() || start > 0) out += ',';
    if (auto e = handle_entity(part)) {
      auto it = std::find_if(grounding.begin(), grounding.end(), [&](const auto& g) { return g.first == *e; });
      if (it == grounding.end()) throw ProgramError("entity handle \"" + std::string(part) + "\" is not grounded");
      out += std::to_string(it->second);
    } else {
      out += part;
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

const std::vector<std::string>& answer_vocabulary() {
  static const std::vector<std::string> vocab = [] {
    std::vector<std::string> v = {"yes", "no"};
    for (int i = 0; i <= 10; ++i) v.push_back(std::to_string(i));
    for (Attribute a : {Attribute::shape, Attribute::color, Attribute::size, Attribute::material}) {
      for (auto name : value_names(a)) v.emplace_back(name);
    }
    v.emplace_back("none");
    return v;
  }();
  return vocab;
}

bool in_vocabulary(std::string_view token) {
  const auto& v = answer_vocabulary();
  return std::find(v.begin(), v.end(), token) != v.end();
}

std::string answer_token(const Value& terminal) {
  if (const auto* c = std::get_if<Count>(&terminal)) {
    if (c->value < 0 || c->value > 10) throw ProgramError("count " + std::to_string(c->value) + " outside 0..10");
    return std::to_string(c->value);
  }
  if (const auto* t = std::get_if<Truth>(&terminal)) return t->value ? "yes" : "no";
  if (const auto* v = std::get_if<AttributeValue>(&terminal)) return std::string(value_name(v->attribute, v->value));
  if (std::holds_alternative<NoValue>(terminal)) return "none";
  throw ProgramError("program output " + describe(terminal) + " is not an answer");
}

Program ground_program(const Program& program, std::span<const std::pair<int, int>> grounding) {
  Program out = program;
  for (auto& step : out.steps) {
    bool holds_handles = (step.kind == PrimitiveKind::sample && step.param == "object") ||
                         (step.kind == PrimitiveKind::filter && step.param == "exclude");
    if (holds_handles && !step.arg.empty()) step.arg = ground_arg(step.arg, grounding);
  }
  return out;
}

Answer answer(const QuestionCandidate& question, const Scene& scene) {
  Program grounded = ground_program(question.program, question.grounding);
  FullWorld world(scene);
  ProgramRun run = run_program(grounded, EvalContext{world, nullptr, EvalMode::answer});
  Answer out{answer_token(run.terminal()), std::nullopt};
  if (question.family == Family::seek_attr_rel_imm || question.family == Family::seek_attr_rel_early) {
    for (std::size_t i = 0; i < grounded.steps.size(); ++i) {
      if (grounded.steps[i].kind != PrimitiveKind::relate) continue;
      const auto& found = std::get<ObjectSet>(run.outputs[i]);
      if (!found.empty()) out.object = found.front();
    }
  }
  return out;
}

std::string answer_program(const Program& grounded, const Scene& scene) {
  FullWorld world(scene);
  return answer_token(run_program(grounded, EvalContext{world, nullptr, EvalMode::answer}).terminal());
}

}  // namespace dforge
