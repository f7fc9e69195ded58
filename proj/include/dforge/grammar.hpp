#pragma once

// Caption and question templates: each is a primitive program plus surface
// forms with placeholders (Z=size, C=color, M=material, S=shape, A=attribute,
// X=count, R=relation). A run of Z/C/M/S placeholders is one noun phrase;
// braces mark referring phrases.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dforge/program.hpp"
#include "dforge/questioner.hpp"
#include "dforge/rng.hpp"
#include "dforge/scene.hpp"

namespace dforge {

enum class HistoryNeed : std::uint8_t { none, coref, all };

struct SurfaceForm {
  std::string pattern;
  bool plural = false;                 // noun phrases realize in plural
  std::optional<Attribute> only_for;   // form reads naturally only for this [A]

  struct Segment {
    enum class Kind : std::uint8_t { literal, noun_phrase, placeholder, open_span, close_span };
    Kind kind = Kind::literal;
    std::string text;  // literal text, placeholder letter, or noun-phrase suffix ("" or "1")
  };
  std::vector<Segment> segments;  // parsed from pattern

  std::vector<std::string> placeholders() const;
};

SurfaceForm make_form(std::string pattern, bool plural = false, std::optional<Attribute> only_for = std::nullopt);

struct Template {
  std::string label;
  Category category = Category::caption;
  Family family = Family::count_all;
  std::vector<SurfaceForm> forms;
  Program program;  // skeleton; "$X"-style args are filled at instantiation
  bool independent = false;
  HistoryNeed history_need = HistoryNeed::none;
};

class Registry {
 public:
  explicit Registry(std::vector<Template> templates);

  const std::vector<Template>& templates() const { return templates_; }
  const Template& at(std::size_t index) const { return templates_[index]; }
  std::size_t size() const { return templates_.size(); }
  std::optional<std::size_t> find(std::string_view label) const;
  std::vector<std::size_t> captions() const;
  std::vector<std::size_t> questions() const;

 private:
  std::vector<Template> templates_;
};

Registry build_registry();
nlohmann::json registry_to_json(const Registry& registry);

using Bindings = std::map<std::string, std::string>;

/// Token range [begin, end) of a referring phrase. For captions `entity`
/// indexes RevealedFacts::objects; for questions it is an entity handle.
struct ReferringSpan {
  int begin = 0;
  int end = 0;
  int entity = 0;
  bool operator==(const ReferringSpan&) const = default;
};

struct Utterance {
  std::string text;
  std::string template_label;
  Bindings bindings;
  RevealedFacts revealed;
  std::vector<ReferringSpan> referring_spans;
  Program program;
};

struct QuestionCandidate {
  std::size_t template_index = 0;
  Family family = Family::count_all;
  Category category = Category::count;
  Utterance utterance;
  Program program;  // objects referenced through entity handles "e<k>"

  std::optional<int> subject;     // entity the question is about
  std::optional<int> antecedent;  // entity the question refers back to
  std::optional<Attribute> attribute;
  std::optional<Relation> relation;
  std::optional<SetDescriptor> set;
  std::vector<int> referred;                    // entity handles mentioned
  std::vector<std::pair<int, int>> grounding;   // entity handle -> object id
  std::uint64_t realization_seed = 0;
  bool realized = false;
};

/// Tokens of an utterance: lowercase words, punctuation split off.
std::vector<std::string> tokenize(std::string_view text);

/// Chooses a surface form and fills it. Throws ProgramError on a missing binding.
std::string realize_text(const Template& tmpl, const Bindings& bindings, Rng& rng);

Utterance instantiate_caption(const Registry& registry, std::size_t template_index, const Scene& scene, Rng& rng);

/// Picks bindings against the partial scene only; text is left unrealized.
/// Throws GenerationAbort when the template has no plausible, non-redundant use.
QuestionCandidate plan_question(const Registry& registry, std::size_t template_index, const PartialScene& state,
                                Rng& rng);
void realize_question(const Registry& registry, QuestionCandidate& question);
QuestionCandidate instantiate_question(const Registry& registry, std::size_t template_index,
                                       const PartialScene& state, Rng& rng);

struct ParsedUtterance {
  std::string template_label;
  Bindings bindings;
};

/// Every (template, bindings) whose surface-form regex matches the text.
std::vector<ParsedUtterance> parse_utterance(const Registry& registry, const std::string& text);
/// Same, restricted to one template; empty if the text is not one of its forms.
std::vector<ParsedUtterance> parse_utterance(const Registry& registry, const std::string& text,
                                             std::string_view template_label);

}  // namespace dforge
