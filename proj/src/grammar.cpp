#include "dforge/grammar.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <mutex>
#include <regex>
#include <unordered_map>

#include "dforge/errors.hpp"

namespace dforge {
namespace {

using Seg = SurfaceForm::Segment;

// Surface words per canonical value. The first entry is the canonical word.
const std::map<std::string, std::vector<std::string>>& synonyms() {
  static const std::map<std::string, std::vector<std::string>> table = {
      {"large", {"large", "big"}},
      {"small", {"small", "tiny"}},
      {"metal", {"metal", "metallic", "shiny"}},
      {"rubber", {"rubber", "matte"}},
      {"cube", {"cube", "block", "box"}},
      {"sphere", {"sphere", "ball"}},
      {"cylinder", {"cylinder"}},
  };
  return table;
}

const std::vector<std::string>& surface_words(const std::string& canonical) {
  static const std::vector<std::string> none;
  auto it = synonyms().find(canonical);
  return it == synonyms().end() ? none : it->second;
}

const std::vector<std::string> kGenericNouns = {"object", "thing"};

const std::vector<std::string> kNumberWords = {"zero", "one", "two", "three", "four", "five",
                                               "six",  "seven", "eight", "nine", "ten"};

std::string pluralize(const std::string& noun) { return noun == "box" ? "boxes" : noun + "s"; }

std::string relation_word(Relation r) {
  switch (r) {
    case Relation::right: return "right";
    case Relation::left: return "left";
    case Relation::front: return "front";
    case Relation::behind: return "back";
  }
  return "";
}

std::string relation_phrase(Relation r) {
  switch (r) {
    case Relation::right: return "to the right of";
    case Relation::left: return "to the left of";
    case Relation::front: return "in front of";
    case Relation::behind: return "behind";
  }
  return "";
}

const char* np_keys = "ZCMS";

std::string np_key(std::size_t k, const std::string& suffix) { return std::string(1, np_keys[k]) + suffix; }

bool is_punct(char c) { return c == '.' || c == ',' || c == '?' || c == '!' || c == ';' || c == ':'; }

struct TokenPos {
  std::string text;
  std::size_t begin;
  std::size_t end;
};

std::vector<TokenPos> tokenize_positions(std::string_view text) {
  std::vector<TokenPos> out;
  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (is_punct(c)) {
      out.push_back({std::string(1, c), i, i + 1});
      ++i;
    } else {
      std::size_t j = i;
      std::string word;
      while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j])) && !is_punct(text[j])) {
        word += static_cast<char>(std::tolower(static_cast<unsigned char>(text[j])));
        ++j;
      }
      out.push_back({word, i, j});
      i = j;
    }
  }
  return out;
}

// "a object" -> "an object" when a noun phrase follows the article.
void fix_article(std::string& text, const std::string& next) {
  const std::size_t n = text.size();
  if (n < 2 || text[n - 1] != ' ' || (text[n - 2] != 'a' && text[n - 2] != 'A')) return;
  if (n > 2 && text[n - 3] != ' ') return;
  if (next.empty() || std::string_view("aeiou").find(next.front()) == std::string_view::npos) return;
  text.insert(n - 1, "n");
}

struct Rendered {
  std::string text;
  struct Span {
    std::size_t begin;
    std::size_t end;
    int role;
  };
  std::vector<Span> spans;
};

std::string render_noun_phrase(const SurfaceForm& form, const std::string& suffix, const Bindings& b, Rng& rng) {
  std::vector<std::string> words;
  for (std::size_t k = 0; k < 3; ++k) {
    auto it = b.find(np_key(k, suffix));
    if (it == b.end()) continue;
    const auto& syn = surface_words(it->second);
    words.push_back(syn.empty() ? it->second : syn[rng.index(syn.size())]);
  }
  std::string noun;
  if (auto it = b.find(np_key(3, suffix)); it != b.end()) {
    const auto& syn = surface_words(it->second);
    noun = syn.empty() ? it->second : syn[rng.index(syn.size())];
  } else {
    noun = kGenericNouns[rng.index(kGenericNouns.size())];
  }
  words.push_back(form.plural ? pluralize(noun) : noun);
  std::string out;
  for (const auto& w : words) out += (out.empty() ? "" : " ") + w;
  return out;
}

std::string render_placeholder(const std::string& key, const Bindings& b, const std::string& before) {
  auto it = b.find(key);
  if (it == b.end()) throw ProgramError("surface form needs a binding for [" + key + "]");
  const std::string& v = it->second;
  if (key == "X") {
    int n = std::stoi(v);
    if (n < 0 || n >= static_cast<int>(kNumberWords.size())) return v;
    return kNumberWords[static_cast<std::size_t>(n)];
  }
  if (key == "R") {
    if (parse_extreme(v)) return v;
    auto r = parse_relation(v);
    if (!r) throw ProgramError("unknown relation binding \"" + v + "\"");
    bool possessive = before.size() >= 4 && before.compare(before.size() - 4, 4, "its ") == 0;
    return possessive ? relation_word(*r) : relation_phrase(*r);
  }
  return v;
}

Rendered render_form(const SurfaceForm& form, const Bindings& b, Rng& rng) {
  Rendered out;
  std::vector<std::size_t> open;
  int role = 0;
  for (const auto& seg : form.segments) {
    switch (seg.kind) {
      case Seg::Kind::literal: out.text += seg.text; break;
      case Seg::Kind::noun_phrase: {
        std::string np = render_noun_phrase(form, seg.text, b, rng);
        fix_article(out.text, np);
        out.text += np;
        if (!open.empty()) role = seg.text.empty() ? 0 : 1;
        break;
      }
      case Seg::Kind::placeholder: out.text += render_placeholder(seg.text, b, out.text); break;
      case Seg::Kind::open_span:
        open.push_back(out.text.size());
        role = 0;
        break;
      case Seg::Kind::close_span:
        out.spans.push_back({open.back(), out.text.size(), role});
        open.pop_back();
        break;
    }
  }
  if (!out.text.empty()) out.text[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out.text[0])));
  return out;
}

std::vector<const SurfaceForm*> usable_forms(const Template& tmpl, const Bindings& b) {
  std::optional<Attribute> a;
  if (auto it = b.find("A"); it != b.end()) a = parse_attribute(it->second);
  std::vector<const SurfaceForm*> out;
  for (const auto& f : tmpl.forms) {
    if (!f.only_for || f.only_for == a) out.push_back(&f);
  }
  return out;
}

std::vector<ReferringSpan> token_spans(const Rendered& r, const std::vector<int>& entities) {
  auto toks = tokenize_positions(r.text);
  std::vector<ReferringSpan> out;
  for (const auto& s : r.spans) {
    int b = -1;
    int e = -1;
    for (std::size_t t = 0; t < toks.size(); ++t) {
      if (toks[t].begin >= s.begin && toks[t].end <= s.end) {
        if (b < 0) b = static_cast<int>(t);
        e = static_cast<int>(t) + 1;
      }
    }
    if (b < 0) continue;
    out.push_back({b, e, entities.at(static_cast<std::size_t>(s.role))});
  }
  return out;
}

// ---- program building ------------------------------------------------------

int reference_step(Program& p, const std::string& handle) {
  return add_step(p, PrimitiveKind::sample, "object", handle);
}

std::vector<int> inputs_of(int cur) { return cur < 0 ? std::vector<int>{} : std::vector<int>{cur}; }

// Steps selecting the set; returns the last step, or -1 for the whole world.
int set_steps(Program& p, const SetDescriptor& set) {
  int cur = -1;
  if (!set.excluded.empty()) {
    std::string handles;
    for (int e : set.excluded) handles += (handles.empty() ? "" : ",") + entity_handle(e);
    cur = add_step(p, PrimitiveKind::filter, "exclude", handles);
  }
  for (Attribute a : kAttributes) {
    if (auto v = known(set.values, a)) {
      cur = add_step(p, PrimitiveKind::filter, std::string(attribute_name(a)), std::string(value_name(a, *v)),
                     inputs_of(cur));
    }
  }
  if (set.same_as) {
    if (cur < 0) cur = add_step(p, PrimitiveKind::filter, "exclude");
    int ref = reference_step(p, entity_handle(*set.same_as));
    cur = add_step(p, PrimitiveKind::filter, std::string(attribute_name(set.same_attribute)), {}, {cur, ref});
  }
  return cur;
}

void add_terminal(Program& p, Category c, int cur) {
  if (c == Category::count) {
    add_step(p, PrimitiveKind::count, {}, {}, inputs_of(cur));
  } else {
    if (cur < 0) cur = add_step(p, PrimitiveKind::filter, "exclude");
    add_step(p, PrimitiveKind::exist, {}, {}, {cur});
  }
}

void bind_values(Bindings& b, const KnownValues& values, const std::string& suffix = {}) {
  for (std::size_t k = 0; k < kNumAttributes; ++k) {
    Attribute a = kAttributes[k];
    if (auto v = known(values, a)) b[np_key(k, suffix)] = value_name(a, *v);
  }
}

KnownValues values_on(const Object& obj, const std::vector<Attribute>& attrs) {
  KnownValues v{};
  for (Attribute a : attrs) v[static_cast<std::size_t>(a)] = obj.value(a);
  return v;
}

// ---- registry ----------------------------------------------------------------

Program skeleton(std::initializer_list<PrimitiveCall> steps) { return Program{std::vector<PrimitiveCall>(steps)}; }

PrimitiveCall call(PrimitiveKind kind, std::string param = {}, std::string arg = {}, std::vector<int> inputs = {}) {
  return {kind, std::move(param), std::move(arg), std::move(inputs)};
}

using PK = PrimitiveKind;

Template caption(std::string label, Family family, std::vector<SurfaceForm> forms, Program program) {
  Template t;
  t.label = std::move(label);
  t.category = Category::caption;
  t.family = family;
  t.forms = std::move(forms);
  t.program = std::move(program);
  return t;
}

Template question(std::string label, Category category, Family family, std::vector<SurfaceForm> forms,
                  Program program, HistoryNeed need) {
  Template t;
  t.label = std::move(label);
  t.category = category;
  t.family = family;
  t.forms = std::move(forms);
  t.program = std::move(program);
  t.independent = need == HistoryNeed::none;
  t.history_need = need;
  return t;
}

std::vector<Template> all_templates() {
  const auto P = [](std::string s, std::optional<Attribute> only = std::nullopt) {
    return make_form(std::move(s), true, only);
  };
  const auto F = [](std::string s, std::optional<Attribute> only = std::nullopt) {
    return make_form(std::move(s), false, only);
  };
  const Program seek_prog = skeleton({call(PK::sample, "object", "$e"), call(PK::sample, "attribute", "$A", {0})});
  const Program rel_seek_prog = skeleton({call(PK::sample, "object", "$e"), call(PK::relate, "$R", {}, {0}),
                                          call(PK::sample, "attribute", "$A", {1})});
  const auto rel_prog = [](PK terminal) {
    return skeleton({call(PK::sample, "object", "$e"), call(PK::relate, "$R", {}, {0}), call(terminal, {}, {}, {1})});
  };
  const auto excl_prog = [](PK terminal) {
    return skeleton({call(PK::filter, "exclude", "$mentioned"), call(PK::filter, "$A", "$V", {0}),
                     call(terminal, {}, {}, {1})});
  };
  const auto attr_prog = [](PK terminal) {
    return skeleton({call(PK::filter, "$A", "$V"), call(terminal, {}, {}, {0})});
  };
  const auto group_prog = [](PK terminal) {
    return skeleton({call(PK::filter, "$A", "$V"), call(PK::group, "$A1", "$V1", {0}), call(terminal, {}, {}, {1})});
  };
  const auto same_prog = [](PK terminal) {
    return skeleton({call(PK::filter, "exclude", "$e"), call(PK::sample, "object", "$e"),
                     call(PK::filter, "$A", {}, {0, 1}), call(terminal, {}, {}, {2})});
  };
  const HistoryNeed none = HistoryNeed::none;
  const HistoryNeed coref = HistoryNeed::coref;
  const HistoryNeed all = HistoryNeed::all;

  std::vector<Template> t;
  t.push_back(caption("obj-unique", Family::obj_unique,
                      {F("{A [Z] [C] [M] [S]} is present in the image."), F("There is {a [Z] [C] [M] [S]} in the image."),
                       F("The image contains {a [Z] [C] [M] [S]}.")},
                      skeleton({call(PK::sample, "attributes"), call(PK::unique, {}, {}, {0}),
                                call(PK::sample, "object", {}, {1})})));
  t.push_back(caption("obj-count", Family::obj_count,
                      {P("The image has [X] [Z] [C] [M] [S]."), P("There are [X] [Z] [C] [M] [S] in the image."),
                       P("The picture contains [X] [Z] [C] [M] [S].")},
                      skeleton({call(PK::sample, "attributes"), call(PK::group, {}, {}, {0}),
                                call(PK::sample, "class", {}, {1}), call(PK::count, {}, {}, {2})})));
  t.push_back(caption("obj-extreme", Family::obj_extreme,
                      {F("The [R] thing in the view is {a [Z] [C] [M] [S]}."),
                       F("{A [Z] [C] [M] [S]} is the [R] thing in the view."),
                       F("The [R] object in the picture is {a [Z] [C] [M] [S]}.")},
                      skeleton({call(PK::sample, "attributes"), call(PK::relate, "$R")})));
  t.push_back(caption("obj-relation", Family::obj_relation,
                      {F("{A [Z] [C] [M] [S]} stands [R] {a [Z1] [C1] [M1] [S1]}."),
                       F("{A [Z] [C] [M] [S]} is [R] {a [Z1] [C1] [M1] [S1]}."),
                       F("There is {a [Z] [C] [M] [S]} [R] {a [Z1] [C1] [M1] [S1]}.")},
                      skeleton({call(PK::sample, "attributes"), call(PK::sample, "attributes"),
                                call(PK::unique, {}, {}, {1}), call(PK::sample, "object", {}, {2}),
                                call(PK::unique, {}, {}, {0}), call(PK::relate, "$R", {}, {3})})));

  t.push_back(question("count-all", Category::count, Family::count_all,
                       {F("How many objects in the image?"), F("How many objects are there in the image?"),
                        F("How many things does the picture have in total?"),
                        F("What is the total number of objects in the image?")},
                       skeleton({call(PK::count)}), none));
  t.push_back(question("count-excl", Category::count, Family::excl,
                       {P("How many other [Z] [C] [M] [S] in the picture?"),
                        P("How many other [Z] [C] [M] [S] are there in the picture?"),
                        P("How many other [Z] [C] [M] [S] does the image have?")},
                       excl_prog(PK::count), all));
  t.push_back(question("exist-excl", Category::exist, Family::excl,
                       {P("Are there other [Z] [C] [M] [S] in the picture?"),
                        P("Are there any other [Z] [C] [M] [S] in the image?"),
                        P("Does the picture have any other [Z] [C] [M] [S]?")},
                       excl_prog(PK::exist), all));
  t.push_back(question("count-attr", Category::count, Family::attr,
                       {P("If present, how many [Z] [C] [M] [S]?"), P("How many [Z] [C] [M] [S] does the scene have?"),
                        P("How many [Z] [C] [M] [S] are there in the image?")},
                       attr_prog(PK::count), none));
  t.push_back(question("exist-attr", Category::exist, Family::attr,
                       {P("Are there [Z] [C] [M] [S]?"), P("Are there any [Z] [C] [M] [S] in the image?"),
                        P("Does the scene have any [Z] [C] [M] [S]?")},
                       attr_prog(PK::exist), none));
  t.push_back(question("count-attr-group", Category::count, Family::attr_group,
                       {P("How many [Z] [C] [M] [S] among them?"), P("How many [Z] [C] [M] [S] are there among them?"),
                        P("Among them, how many are [Z] [C] [M] [S]?")},
                       group_prog(PK::count), coref));
  t.push_back(question("exist-attr-group", Category::exist, Family::attr_group,
                       {P("Are there [Z] [C] [M] [S] among them?"), P("Are there any [Z] [C] [M] [S] among them?"),
                        P("Among them, are there any [Z] [C] [M] [S]?")},
                       group_prog(PK::exist), coref));
  t.push_back(question("count-obj-rel-imm", Category::count, Family::obj_rel_imm,
                       {F("How many things to {its} [R]?"), F("How many things are there to {its} [R]?"),
                        F("How many objects are to {its} [R]?")},
                       rel_prog(PK::count), coref));
  t.push_back(question("exist-obj-rel-imm", Category::exist, Family::obj_rel_imm,
                       {F("Are there things to {its} [R]?"), F("Are there any things to {its} [R]?"),
                        F("Is there anything to {its} [R]?")},
                       rel_prog(PK::exist), coref));
  t.push_back(question("count-obj-rel-imm2", Category::count, Family::obj_rel_imm2,
                       {F("How about to {its} [R]?"), F("What about to {its} [R]?")}, rel_prog(PK::count), coref));
  t.push_back(question("exist-obj-rel-imm2", Category::exist, Family::obj_rel_imm2,
                       {F("How about to {its} [R]?"), F("What about to {its} [R]?")}, rel_prog(PK::exist), coref));
  t.push_back(question("count-obj-rel-early", Category::count, Family::obj_rel_early,
                       {F("How many things [R] {that [Z] [C] [M] [S]}?"),
                        F("How many things are [R] {that [Z] [C] [M] [S]}?"),
                        F("How many objects are there [R] {the earlier [Z] [C] [M] [S]}?")},
                       rel_prog(PK::count), coref));
  t.push_back(question("exist-obj-rel-early", Category::exist, Family::obj_rel_early,
                       {F("Are there things [R] {that [Z] [C] [M] [S]}?"),
                        F("Are there any things [R] {that [Z] [C] [M] [S]}?"),
                        F("Is there anything [R] {the earlier [Z] [C] [M] [S]}?")},
                       rel_prog(PK::exist), coref));
  t.push_back(question("count-obj-excl-imm", Category::count, Family::obj_excl_imm,
                       {F("How many things that share {its} [A]?"), F("How many things share {its} [A]?"),
                        F("How many other things have the same [A] as {it}?")},
                       same_prog(PK::count), coref));
  t.push_back(question("exist-obj-excl-imm", Category::exist, Family::obj_excl_imm,
                       {F("Are there things that share {its} [A]?"), F("Is there anything else that shares {its} [A]?"),
                        F("Are there other things with the same [A] as {it}?")},
                       same_prog(PK::exist), coref));
  t.push_back(question("count-obj-excl-early", Category::count, Family::obj_excl_early,
                       {F("How many things that are the same [A] as {that [Z] [C] [M] [S]}?"),
                        F("How many things are the same [A] as {that [Z] [C] [M] [S]}?"),
                        F("How many other things have the same [A] as {the earlier [Z] [C] [M] [S]}?")},
                       same_prog(PK::count), coref));
  t.push_back(question("exist-obj-excl-early", Category::exist, Family::obj_excl_early,
                       {F("Are there things that are the same [A] as {that [Z] [C] [M] [S]}?"),
                        F("Is there anything else with the same [A] as {that [Z] [C] [M] [S]}?"),
                        F("Are there other things that have the same [A] as {the earlier [Z] [C] [M] [S]}?")},
                       same_prog(PK::exist), coref));
  t.push_back(question("seek-attr-imm", Category::seek, Family::seek_attr_imm,
                       {F("What is {its} [A]?"), F("What [A] is {it}?"), F("Can you tell me {its} [A]?")}, seek_prog,
                       coref));
  t.push_back(question("seek-attr-imm2", Category::seek, Family::seek_attr_imm2,
                       {F("How about [A]?"), F("What about {its} [A]?"), F("And what is {its} [A]?")}, seek_prog,
                       coref));
  t.push_back(question("seek-attr-early", Category::seek, Family::seek_attr_early,
                       {F("What is the [A] of {that [Z] [C] [M] [S]}?"), F("What [A] is {that [Z] [C] [M] [S]}?"),
                        F("What is the [A] of {the earlier [Z] [C] [M] [S]}?")},
                       seek_prog, coref));
  t.push_back(question("seek-attr-sim-early", Category::seek, Family::seek_attr_sim_early,
                       {F("What about {the earlier [Z] [C] [M] [S]}?"), F("How about {the earlier [Z] [C] [M] [S]}?"),
                        F("What about {that [Z] [C] [M] [S]}?")},
                       seek_prog, coref));
  t.push_back(question("seek-attr-rel-imm", Category::seek, Family::seek_attr_rel_imm,
                       {F("If there is a thing to {its} [R], what [A] is it?"),
                        F("If there is an object to {its} [R], what is its [A]?"),
                        F("What [A] is the thing to {its} [R], if there is one?")},
                       rel_seek_prog, coref));
  t.push_back(question("seek-attr-rel-early", Category::seek, Family::seek_attr_rel_early,
                       {F("If there is a thing [R] {that [Z] [C] [M] [S]}, what [A] is it made of?", Attribute::material),
                        F("If there is a thing [R] {that [Z] [C] [M] [S]}, what [A] is it?"),
                        F("What [A] is the thing [R] {the earlier [Z] [C] [M] [S]}, if there is one?")},
                       rel_seek_prog, coref));
  return t;
}

// ---- planning helpers ----------------------------------------------------------

[[noreturn]] void give_up(const std::string& why) { throw GenerationAbort(why); }

// A minimal set of known attributes singling the entity out among all
// entities, chosen uniformly among the minimal ones.
std::optional<KnownValues> describe_entity(const PartialScene& state, int e, Rng& rng) {
  PartialWorld world(state);
  const ObjectSet everyone = all_objects(world);
  std::vector<Attribute> knowns;
  for (Attribute a : kAttributes) {
    if (state.entity(e).value(a)) knowns.push_back(a);
  }
  const std::size_t n = knowns.size();
  for (std::size_t k = 1; k <= n; ++k) {
    std::vector<std::vector<Attribute>> fits;
    for (unsigned mask = 1; mask < (1u << n); ++mask) {
      if (static_cast<std::size_t>(std::popcount(mask)) != k) continue;
      std::vector<Attribute> subset;
      for (std::size_t i = 0; i < n; ++i) {
        if (mask & (1u << i)) subset.push_back(knowns[i]);
      }
      auto u = eval_unique(world, everyone, subset, EvalMode::answer);
      if (std::binary_search(u.begin(), u.end(), e)) fits.push_back(std::move(subset));
    }
    if (!fits.empty()) {
      const auto& chosen = fits[rng.index(fits.size())];
      KnownValues out{};
      for (Attribute a : chosen) out[static_cast<std::size_t>(a)] = state.entity(e).value(a);
      return out;
    }
  }
  return std::nullopt;
}

struct EarlyRef {
  int entity;
  KnownValues description;
};

std::vector<EarlyRef> early_references(const PartialScene& state, Rng& rng) {
  std::vector<EarlyRef> out;
  for (int e : state.mentioned_before(state.round + 1, 2)) {
    if (auto d = describe_entity(state, e, rng)) out.push_back({e, *d});
  }
  return out;
}

std::vector<Attribute> unknown_attributes(const PartialScene& state, int e) {
  std::vector<Attribute> out;
  for (Attribute a : kAttributes) {
    if (!state.entity(e).value(a)) out.push_back(a);
  }
  return out;
}

std::vector<Relation> open_relations(const PartialScene& state, int e) {
  std::vector<Relation> out;
  for (Relation r : kRelations) {
    if (!state.find_relation(e, r)) out.push_back(r);
  }
  return out;
}

// Attributes a seek-rel question about (e, r) can still learn something from.
std::vector<Attribute> rel_seek_attributes(const PartialScene& state, int e, Relation r) {
  const RelationFact* f = state.find_relation(e, r);
  if (!f) return {kAttributes.begin(), kAttributes.end()};
  if (!f->present) return {};
  if (!f->neighbor) return {kAttributes.begin(), kAttributes.end()};
  return unknown_attributes(state, *f->neighbor);
}

template <typename T>
const T& choose(const std::vector<T>& items, Rng& rng, const char* what) {
  if (items.empty()) give_up(what);
  return items[rng.index(items.size())];
}

class Planner {
 public:
  Planner(const Registry& registry, std::size_t index, const PartialScene& state, Rng& rng)
      : tmpl_(registry.at(index)), state_(state), rng_(rng) {
    q_.template_index = index;
    q_.family = tmpl_.family;
    q_.category = tmpl_.category;
    q_.utterance.template_label = tmpl_.label;
  }

  QuestionCandidate plan() {
    switch (tmpl_.family) {
      case Family::count_all: plan_set(SetDescriptor{}); break;
      case Family::excl: plan_excl(); break;
      case Family::attr: plan_attr(); break;
      case Family::attr_group: plan_group(); break;
      case Family::obj_rel_imm: plan_rel(focus(), false); break;
      case Family::obj_rel_imm2: plan_rel_again(); break;
      case Family::obj_rel_early: plan_rel_early(); break;
      case Family::obj_excl_imm: plan_same(focus(), std::nullopt); break;
      case Family::obj_excl_early: plan_same_early(); break;
      case Family::seek_attr_imm: plan_seek(focus(), std::nullopt); break;
      case Family::seek_attr_imm2: plan_seek_again(); break;
      case Family::seek_attr_early: plan_seek_early(); break;
      case Family::seek_attr_sim_early: plan_seek_similar(); break;
      case Family::seek_attr_rel_imm: plan_rel_seek(focus(), std::nullopt); break;
      case Family::seek_attr_rel_early: plan_rel_seek_early(); break;
      default: throw std::invalid_argument("plan_question: " + tmpl_.label + " is not a question template");
    }
    for (int e = 0; e < state_.size(); ++e) q_.grounding.emplace_back(e, state_.entity(e).object);
    q_.realization_seed = rng_();
    return std::move(q_);
  }

 private:
  int focus() const {
    if (!state_.focus) give_up("no object in focus");
    return *state_.focus;
  }

  const RoundSummary& last() const {
    if (!state_.last) give_up("no previous round");
    return *state_.last;
  }

  void refer_to(int e) {
    q_.subject = e;
    q_.antecedent = e;
    q_.referred = {e};
  }

  void finish_set(const SetDescriptor& set) {
    q_.set = set;
    if (is_redundant(q_, state_)) give_up("already known");
    add_terminal(q_.program, q_.category, set_steps(q_.program, set));
  }

  void plan_set(const SetDescriptor& set) { finish_set(set); }

  void plan_excl() {
    std::vector<std::pair<int, Attribute>> options;
    for (int e = 0; e < state_.size(); ++e) {
      for (Attribute a : kAttributes) {
        if (state_.entity(e).value(a)) options.emplace_back(e, a);
      }
    }
    rng_.shuffle(options);
    for (auto [e, a] : options) {
      SetDescriptor set;
      set.values[static_cast<std::size_t>(a)] = state_.entity(e).value(a);
      set.excluded = state_.all_handles();
      q_.set = set;
      if (is_redundant(q_, state_)) continue;
      bind_values(q_.utterance.bindings, set.values);
      finish_set(set);
      return;
    }
    give_up("nothing new to ask about other objects");
  }

  void plan_attr() {
    for (int attempt = 0; attempt < 8; ++attempt) {
      std::vector<Attribute> attrs{kAttributes.begin(), kAttributes.end()};
      rng_.shuffle(attrs);
      attrs.resize(rng_.index(2) + 1);
      SetDescriptor set;
      for (Attribute a : attrs) {
        set.values[static_cast<std::size_t>(a)] = static_cast<std::uint8_t>(rng_.index(value_count(a)));
      }
      q_.set = set;
      if (is_redundant(q_, state_)) continue;
      bind_values(q_.utterance.bindings, set.values);
      finish_set(set);
      return;
    }
    give_up("no fresh attribute question");
  }

  void plan_group() {
    const RoundSummary& prev = last();
    if (!prev.set || !prev.count || *prev.count < 2) give_up("no group to refer to");
    std::vector<Attribute> free;
    for (Attribute a : kAttributes) {
      if (!known(prev.set->values, a) && !(prev.set->same_as && prev.set->same_attribute == a)) free.push_back(a);
    }
    Attribute a = choose(free, rng_, "group fully constrained");
    auto v = static_cast<std::uint8_t>(rng_.index(value_count(a)));
    SetDescriptor set = *prev.set;
    set.values[static_cast<std::size_t>(a)] = v;
    q_.set = set;
    q_.attribute = a;
    if (is_redundant(q_, state_)) give_up("already known");
    int cur = set_steps(q_.program, *prev.set);
    cur = add_step(q_.program, PrimitiveKind::group, std::string(attribute_name(a)), std::string(value_name(a, v)),
                   inputs_of(cur));
    add_terminal(q_.program, q_.category, cur);
    KnownValues only{};
    only[static_cast<std::size_t>(a)] = v;
    bind_values(q_.utterance.bindings, only);
  }

  void rel_program(int e, Relation r) {
    q_.relation = r;
    q_.utterance.bindings["R"] = relation_name(r);
    int ref = reference_step(q_.program, entity_handle(e));
    int rel = add_step(q_.program, PrimitiveKind::relate, std::string(relation_name(r)), {}, {ref});
    add_terminal(q_.program, q_.category, rel);
  }

  void plan_rel(int e, bool avoid_last) {
    auto open = open_relations(state_, e);
    if (avoid_last && state_.last && state_.last->relation) std::erase(open, *state_.last->relation);
    Relation r = choose(open, rng_, "all directions known");
    refer_to(e);
    rel_program(e, r);
  }

  void plan_rel_again() {
    const RoundSummary& prev = last();
    bool rel_round = prev.family == Family::obj_rel_imm || prev.family == Family::obj_rel_imm2 ||
                     prev.family == Family::obj_rel_early;
    if (!rel_round || prev.category != q_.category || !prev.subject || prev.subject != state_.focus) {
      give_up("previous round was not a matching relation question");
    }
    plan_rel(*prev.subject, true);
  }

  void plan_rel_early() {
    std::vector<EarlyRef> refs;
    for (auto& ref : early_references(state_, rng_)) {
      if (!open_relations(state_, ref.entity).empty()) refs.push_back(ref);
    }
    const EarlyRef& ref = choose(refs, rng_, "no earlier object to relate to");
    bind_values(q_.utterance.bindings, ref.description);
    plan_rel(ref.entity, false);
  }

  void plan_same(int e, std::optional<KnownValues> description) {
    std::vector<Attribute> attrs{kAttributes.begin(), kAttributes.end()};
    rng_.shuffle(attrs);
    for (Attribute a : attrs) {
      SetDescriptor set;
      set.same_as = e;
      set.same_attribute = a;
      set.excluded = {e};
      q_.set = set;
      if (is_redundant(q_, state_)) continue;
      refer_to(e);
      q_.attribute = a;
      q_.utterance.bindings["A"] = attribute_name(a);
      if (description) bind_values(q_.utterance.bindings, *description);
      finish_set(set);
      return;
    }
    give_up("nothing new about similar objects");
  }

  void plan_same_early() {
    auto refs = early_references(state_, rng_);
    const EarlyRef& ref = choose(refs, rng_, "no earlier object");
    plan_same(ref.entity, ref.description);
  }

  void seek_program(int e, Attribute a) {
    q_.attribute = a;
    q_.utterance.bindings["A"] = attribute_name(a);
    int ref = reference_step(q_.program, entity_handle(e));
    add_step(q_.program, PrimitiveKind::sample, "attribute", std::string(attribute_name(a)), {ref});
  }

  void plan_seek(int e, std::optional<KnownValues> description) {
    Attribute a = choose(unknown_attributes(state_, e), rng_, "everything about it is known");
    refer_to(e);
    if (description) bind_values(q_.utterance.bindings, *description);
    seek_program(e, a);
  }

  void plan_seek_again() {
    const RoundSummary& prev = last();
    if (prev.category != Category::seek || !prev.subject || prev.subject != state_.focus) {
      give_up("previous round did not ask about this object");
    }
    plan_seek(*prev.subject, std::nullopt);
  }

  void plan_seek_early() {
    std::vector<EarlyRef> refs;
    for (auto& ref : early_references(state_, rng_)) {
      if (!unknown_attributes(state_, ref.entity).empty()) refs.push_back(ref);
    }
    const EarlyRef& ref = choose(refs, rng_, "no earlier object with unknowns");
    plan_seek(ref.entity, ref.description);
  }

  void plan_seek_similar() {
    const RoundSummary& prev = last();
    if (prev.category != Category::seek || !prev.attribute || !prev.subject) give_up("previous round was not a seek");
    Attribute a = *prev.attribute;
    std::vector<EarlyRef> refs;
    for (auto& ref : early_references(state_, rng_)) {
      if (ref.entity != *prev.subject && !state_.entity(ref.entity).value(a)) refs.push_back(ref);
    }
    const EarlyRef& ref = choose(refs, rng_, "no earlier object to compare");
    refer_to(ref.entity);
    bind_values(q_.utterance.bindings, ref.description);
    seek_program(ref.entity, a);
  }

  void plan_rel_seek(int e, std::optional<KnownValues> description) {
    std::vector<std::pair<Relation, Attribute>> options;
    for (Relation r : kRelations) {
      for (Attribute a : rel_seek_attributes(state_, e, r)) options.emplace_back(r, a);
    }
    auto [r, a] = choose(options, rng_, "nothing left to learn around it");
    refer_to(e);
    if (description) bind_values(q_.utterance.bindings, *description);
    q_.relation = r;
    q_.attribute = a;
    q_.utterance.bindings["R"] = relation_name(r);
    q_.utterance.bindings["A"] = attribute_name(a);
    int ref = reference_step(q_.program, entity_handle(e));
    int rel = add_step(q_.program, PrimitiveKind::relate, std::string(relation_name(r)), {}, {ref});
    add_step(q_.program, PrimitiveKind::sample, "attribute", std::string(attribute_name(a)), {rel});
  }

  void plan_rel_seek_early() {
    std::vector<EarlyRef> refs;
    for (auto& ref : early_references(state_, rng_)) {
      for (Relation r : kRelations) {
        if (!rel_seek_attributes(state_, ref.entity, r).empty()) {
          refs.push_back(ref);
          break;
        }
      }
    }
    const EarlyRef& ref = choose(refs, rng_, "no earlier object to look around");
    plan_rel_seek(ref.entity, ref.description);
  }

  const Template& tmpl_;
  const PartialScene& state_;
  Rng& rng_;
  QuestionCandidate q_;
};

// ---- captions ------------------------------------------------------------------------

Utterance caption_attempt(const Template& tmpl, const Scene& scene, Rng& rng) {
  FullWorld world(scene);
  EvalContext ctx{world, &rng, EvalMode::generate};
  Program program;
  Utterance u;
  u.template_label = tmpl.label;
  switch (tmpl.family) {
    case Family::obj_unique: {
      int attrs = add_step(program, PrimitiveKind::sample, "attributes");
      int uniq = add_step(program, PrimitiveKind::unique, {}, {}, {attrs});
      add_step(program, PrimitiveKind::sample, "object", {}, {uniq});
      auto run = run_program(program, ctx);
      int obj = std::get<ObjectSet>(run.terminal()).front();
      auto values = values_on(scene.objects[static_cast<std::size_t>(obj)],
                              std::get<AttributeList>(run.outputs[0]).attributes);
      u.revealed.objects.push_back({obj, values});
      bind_values(u.bindings, values);
      u.program = std::move(run.resolved);
      break;
    }
    case Family::obj_count: {
      int attrs = add_step(program, PrimitiveKind::sample, "attributes");
      int part = add_step(program, PrimitiveKind::group, {}, {}, {attrs});
      int cls = add_step(program, PrimitiveKind::sample, "class", {}, {part});
      add_step(program, PrimitiveKind::count, {}, {}, {cls});
      auto run = run_program(program, ctx);
      int n = std::get<Count>(run.terminal()).value;
      if (n < 2) give_up("class too small to count");
      int first = std::get<ObjectSet>(run.outputs[2]).front();
      SetDescriptor set;
      set.values = values_on(scene.objects[static_cast<std::size_t>(first)],
                             std::get<AttributeList>(run.outputs[0]).attributes);
      u.revealed.group = std::make_pair(set, n);
      bind_values(u.bindings, set.values);
      u.bindings["X"] = std::to_string(n);
      u.program = std::move(run.resolved);
      break;
    }
    case Family::obj_extreme: {
      Extreme e = kExtremes[rng.index(kExtremes.size())];
      int attrs = add_step(program, PrimitiveKind::sample, "attributes");
      add_step(program, PrimitiveKind::relate, std::string(extreme_name(e)));
      auto run = run_program(program, ctx);
      (void)attrs;
      int obj = std::get<ObjectSet>(run.terminal()).front();
      auto values = values_on(scene.objects[static_cast<std::size_t>(obj)],
                              std::get<AttributeList>(run.outputs[0]).attributes);
      u.revealed.objects.push_back({obj, values});
      bind_values(u.bindings, values);
      u.bindings["R"] = extreme_name(e);
      u.program = std::move(run.resolved);
      break;
    }
    case Family::obj_relation: {
      Relation r = kRelations[rng.index(kRelations.size())];
      int subj_attrs = add_step(program, PrimitiveKind::sample, "attributes");
      int anchor_attrs = add_step(program, PrimitiveKind::sample, "attributes");
      int anchor_set = add_step(program, PrimitiveKind::unique, {}, {}, {anchor_attrs});
      int anchor = add_step(program, PrimitiveKind::sample, "object", {}, {anchor_set});
      int subj_set = add_step(program, PrimitiveKind::unique, {}, {}, {subj_attrs});
      add_step(program, PrimitiveKind::relate, std::string(relation_name(r)), {}, {anchor});
      auto run = run_program(program, ctx);
      int subj = std::get<ObjectSet>(run.terminal()).front();
      const auto& uniques = std::get<ObjectSet>(run.outputs[static_cast<std::size_t>(subj_set)]);
      if (!std::binary_search(uniques.begin(), uniques.end(), subj)) give_up("subject description is ambiguous");
      int anchor_obj = std::get<ObjectSet>(run.outputs[static_cast<std::size_t>(anchor)]).front();
      auto subj_values = values_on(scene.objects[static_cast<std::size_t>(subj)],
                                   std::get<AttributeList>(run.outputs[0]).attributes);
      auto anchor_values = values_on(scene.objects[static_cast<std::size_t>(anchor_obj)],
                                     std::get<AttributeList>(run.outputs[1]).attributes);
      u.revealed.objects.push_back({subj, subj_values});
      u.revealed.objects.push_back({anchor_obj, anchor_values});
      u.revealed.relation = RevealedFacts::RelationEdge{1, r, 0};
      bind_values(u.bindings, subj_values);
      bind_values(u.bindings, anchor_values, "1");
      u.bindings["R"] = relation_name(r);
      u.program = std::move(run.resolved);
      break;
    }
    default: throw std::invalid_argument("instantiate_caption: " + tmpl.label + " is not a caption template");
  }
  return u;
}

std::string regex_escape(const std::string& s) {
  static const std::string special = R"(\^$.|?*+()[]{})";
  std::string out;
  for (char c : s) {
    if (special.find(c) != std::string::npos) out += '\\';
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

std::string alternation(const std::vector<std::string>& words) {
  std::vector<std::string> sorted = words;
  // Longest first so "metallic" wins over "metal".
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return a.size() != b.size() ? a.size() > b.size() : a < b;
  });
  std::string out;
  for (const auto& w : sorted) out += (out.empty() ? "" : "|") + regex_escape(w);
  return out;
}

struct FormMatcher {
  std::regex re;
  // Per capture group: binding key ("Z", "S1", "A", ...).
  std::vector<std::string> keys;
};

std::vector<std::string> words_for(Attribute a) {
  std::vector<std::string> out;
  for (auto v : value_names(a)) {
    const auto& syn = surface_words(std::string(v));
    if (syn.empty()) {
      out.emplace_back(v);
    } else {
      out.insert(out.end(), syn.begin(), syn.end());
    }
  }
  return out;
}

FormMatcher build_matcher(const SurfaceForm& form) {
  FormMatcher m;
  std::string re;
  for (const auto& seg : form.segments) {
    switch (seg.kind) {
      case Seg::Kind::literal: {
        static const std::regex an_re(R"((^|[ ])[aA]n ([aeiou]))");
        re += regex_escape(std::regex_replace(seg.text, an_re, "$1a $2"));
        break;
      }
      case Seg::Kind::open_span:
      case Seg::Kind::close_span: break;
      case Seg::Kind::noun_phrase: {
        for (std::size_t k = 0; k < 3; ++k) {
          re += "(?:(" + alternation(words_for(kAttributes[k])) + ") )?";
          m.keys.push_back(np_key(k, seg.text));
        }
        std::vector<std::string> nouns = words_for(Attribute::shape);
        nouns.insert(nouns.end(), kGenericNouns.begin(), kGenericNouns.end());
        if (form.plural) {
          for (auto& n : nouns) n = pluralize(n);
        }
        re += "(" + alternation(nouns) + ")";
        m.keys.push_back(np_key(3, seg.text));
        break;
      }
      case Seg::Kind::placeholder: {
        std::vector<std::string> words;
        if (seg.text == "A") {
          for (Attribute a : kAttributes) words.emplace_back(attribute_name(a));
        } else if (seg.text == "X") {
          words = kNumberWords;
        } else {
          for (Relation r : kRelations) {
            words.push_back(relation_word(r));
            words.push_back(relation_phrase(r));
          }
          for (Extreme e : kExtremes) words.emplace_back(extreme_name(e));
        }
        re += "(" + alternation(words) + ")";
        m.keys.push_back(seg.text);
        break;
      }
    }
  }
  m.re = std::regex(re, std::regex::ECMAScript | std::regex::optimize);
  return m;
}

std::string singular(const std::string& word) {
  if (word == "boxes") return "box";
  if (word.size() > 1 && word.back() == 's') return word.substr(0, word.size() - 1);
  return word;
}

std::optional<std::string> canonical_value(Attribute a, const std::string& word) {
  for (auto v : value_names(a)) {
    const auto& syn = surface_words(std::string(v));
    if (word == v || std::find(syn.begin(), syn.end(), word) != syn.end()) return std::string(v);
  }
  return std::nullopt;
}

std::string canonical_placeholder(const std::string& key, const std::string& word) {
  if (key == "X") {
    auto it = std::find(kNumberWords.begin(), kNumberWords.end(), word);
    return std::to_string(it - kNumberWords.begin());
  }
  if (key == "R") {
    for (Relation r : kRelations) {
      if (word == relation_word(r) || word == relation_phrase(r)) return std::string(relation_name(r));
    }
  }
  return word;
}

const FormMatcher& matcher_for(const SurfaceForm& form) {
  static std::mutex mutex;
  static std::unordered_map<std::string, FormMatcher> cache;
  std::lock_guard lock(mutex);
  std::string key = form.pattern + (form.plural ? "#p" : "#s");
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, build_matcher(form)).first;
  return it->second;
}

}  // namespace

std::vector<std::string> SurfaceForm::placeholders() const {
  std::vector<std::string> out;
  for (const auto& seg : segments) {
    if (seg.kind == Segment::Kind::noun_phrase) {
      for (std::size_t k = 0; k < 4; ++k) out.push_back(np_key(k, seg.text));
    } else if (seg.kind == Segment::Kind::placeholder) {
      out.push_back(seg.text);
    }
  }
  return out;
}

SurfaceForm make_form(std::string pattern, bool plural, std::optional<Attribute> only_for) {
  SurfaceForm form;
  form.pattern = std::move(pattern);
  form.plural = plural;
  form.only_for = only_for;
  const std::string& p = form.pattern;
  std::string literal;
  auto flush = [&] {
    if (!literal.empty()) form.segments.push_back({Seg::Kind::literal, literal});
    literal.clear();
  };
  std::size_t i = 0;
  while (i < p.size()) {
    bool matched_np = false;
    for (std::string suffix : {std::string("1"), std::string()}) {
      std::string np = "[Z" + suffix + "] [C" + suffix + "] [M" + suffix + "] [S" + suffix + "]";
      if (p.compare(i, np.size(), np) == 0) {
        flush();
        form.segments.push_back({Seg::Kind::noun_phrase, suffix});
        i += np.size();
        matched_np = true;
        break;
      }
    }
    if (matched_np) continue;
    char c = p[i];
    if (c == '[') {
      auto close = p.find(']', i);
      if (close == std::string::npos) throw ProgramError("unclosed placeholder in \"" + p + "\"");
      std::string key = p.substr(i + 1, close - i - 1);
      if (key != "A" && key != "X" && key != "R") throw ProgramError("unknown placeholder [" + key + "]");
      flush();
      form.segments.push_back({Seg::Kind::placeholder, key});
      i = close + 1;
    } else if (c == '{') {
      flush();
      form.segments.push_back({Seg::Kind::open_span, {}});
      ++i;
    } else if (c == '}') {
      flush();
      form.segments.push_back({Seg::Kind::close_span, {}});
      ++i;
    } else {
      literal += c;
      ++i;
    }
  }
  flush();
  return form;
}

Registry::Registry(std::vector<Template> templates) : templates_(std::move(templates)) {}

std::optional<std::size_t> Registry::find(std::string_view label) const {
  for (std::size_t i = 0; i < templates_.size(); ++i) {
    if (templates_[i].label == label) return i;
  }
  return std::nullopt;
}

std::vector<std::size_t> Registry::captions() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < templates_.size(); ++i) {
    if (templates_[i].category == Category::caption) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> Registry::questions() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < templates_.size(); ++i) {
    if (templates_[i].category != Category::caption) out.push_back(i);
  }
  return out;
}

Registry build_registry() { return Registry(all_templates()); }

nlohmann::json registry_to_json(const Registry& registry) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& t : registry.templates()) {
    nlohmann::json forms = nlohmann::json::array();
    for (const auto& f : t.forms) {
      nlohmann::json jf{{"pattern", f.pattern}, {"plural", f.plural}};
      if (f.only_for) jf["only_for"] = attribute_name(*f.only_for);
      forms.push_back(std::move(jf));
    }
    static constexpr std::array<std::string_view, 3> needs = {"none", "coref", "all"};
    out.push_back({{"label", t.label},
                   {"category", category_name(t.category)},
                   {"forms", std::move(forms)},
                   {"program", program_to_json(t.program)},
                   {"independent", t.independent},
                   {"history", needs[static_cast<std::size_t>(t.history_need)]}});
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  for (auto& t : tokenize_positions(text)) out.push_back(std::move(t.text));
  return out;
}

std::string realize_text(const Template& tmpl, const Bindings& bindings, Rng& rng) {
  auto forms = usable_forms(tmpl, bindings);
  if (forms.empty()) throw ProgramError(tmpl.label + ": no surface form fits the bindings");
  return render_form(*forms[rng.index(forms.size())], bindings, rng).text;
}

Utterance instantiate_caption(const Registry& registry, std::size_t template_index, const Scene& scene, Rng& rng) {
  const Template& tmpl = registry.at(template_index);
  if (tmpl.category != Category::caption) {
    throw std::invalid_argument("instantiate_caption: " + tmpl.label + " is not a caption template");
  }
  constexpr int kAttempts = 12;
  for (int attempt = 0;; ++attempt) {
    try {
      Utterance u = caption_attempt(tmpl, scene, rng);
      auto forms = usable_forms(tmpl, u.bindings);
      Rendered r = render_form(*forms[rng.index(forms.size())], u.bindings, rng);
      u.text = r.text;
      std::vector<int> roles;
      for (std::size_t k = 0; k < std::max<std::size_t>(u.revealed.objects.size(), 1); ++k) {
        roles.push_back(static_cast<int>(k));
      }
      u.referring_spans = token_spans(r, roles);
      return u;
    } catch (const GenerationAbort&) {
      if (attempt + 1 >= kAttempts) throw;
    }
  }
}

QuestionCandidate plan_question(const Registry& registry, std::size_t template_index, const PartialScene& state,
                                Rng& rng) {
  return Planner(registry, template_index, state, rng).plan();
}

void realize_question(const Registry& registry, QuestionCandidate& q) {
  if (q.realized) return;
  const Template& tmpl = registry.at(q.template_index);
  Rng rng(q.realization_seed);
  auto forms = usable_forms(tmpl, q.utterance.bindings);
  if (forms.empty()) throw ProgramError(tmpl.label + ": no surface form fits the bindings");
  Rendered r = render_form(*forms[rng.index(forms.size())], q.utterance.bindings, rng);
  q.utterance.text = r.text;
  q.utterance.program = q.program;
  q.utterance.referring_spans = q.antecedent ? token_spans(r, {*q.antecedent}) : std::vector<ReferringSpan>{};
  q.realized = true;
}

QuestionCandidate instantiate_question(const Registry& registry, std::size_t template_index,
                                       const PartialScene& state, Rng& rng) {
  QuestionCandidate q = plan_question(registry, template_index, state, rng);
  realize_question(registry, q);
  return q;
}

std::vector<ParsedUtterance> parse_utterance(const Registry& registry, const std::string& text) {
  return parse_utterance(registry, text, {});
}

std::vector<ParsedUtterance> parse_utterance(const Registry& registry, const std::string& text,
                                             std::string_view template_label) {
  std::string lowered;
  for (char c : text) lowered += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  // Undo the article fix-up so patterns can spell "a" throughout.
  static const std::regex an_re(R"((^|[ {])an ([aeiou]))");
  lowered = std::regex_replace(lowered, an_re, "$1a $2");

  std::vector<ParsedUtterance> out;
  for (const auto& tmpl : registry.templates()) {
    if (!template_label.empty() && tmpl.label != template_label) continue;
    for (const auto& form : tmpl.forms) {
      const FormMatcher& m = matcher_for(form);
      std::smatch match;
      if (!std::regex_match(lowered, match, m.re)) continue;
      ParsedUtterance parsed;
      parsed.template_label = tmpl.label;
      for (std::size_t g = 0; g < m.keys.size(); ++g) {
        if (!match[g + 1].matched) continue;
        const std::string& key = m.keys[g];
        std::string word = match[g + 1].str();
        auto pos = std::string_view(np_keys).find(key[0]);
        if (pos != std::string_view::npos) {
          Attribute a = kAttributes[pos];
          if (a == Attribute::shape) word = form.plural ? singular(word) : word;
          auto v = canonical_value(a, word);
          if (v) parsed.bindings[key] = *v;  // generic nouns bind nothing
        } else {
          parsed.bindings[key] = canonical_placeholder(key, word);
        }
      }
      bool duplicate = std::any_of(out.begin(), out.end(), [&](const ParsedUtterance& p) {
        return p.template_label == parsed.template_label && p.bindings == parsed.bindings;
      });
      if (!duplicate) out.push_back(std::move(parsed));
    }
  }
  return out;
}

}  // namespace dforge
