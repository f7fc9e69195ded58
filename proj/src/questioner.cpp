#include "dforge/questioner.hpp"

#include <algorithm>
#include <charconv>

#include "dforge/errors.hpp"
#include "dforge/grammar.hpp"
#include "dforge/oracle.hpp"

namespace dforge {
namespace {

std::string entity_text(int entity) { return "entity " + std::to_string(entity); }

std::string set_text(const SetDescriptor& set) {
  std::string out = "{";
  for (Attribute a : kAttributes) {
    if (auto v = known(set.values, a)) out += std::string(attribute_name(a)) + "=" + std::string(value_name(a, *v)) + " ";
  }
  if (set.same_as) out += "same " + std::string(attribute_name(set.same_attribute)) + " as e" + std::to_string(*set.same_as) + " ";
  if (!set.excluded.empty()) {
    out += "minus";
    for (int e : set.excluded) out += " e" + std::to_string(e);
  }
  return out + "}";
}

int parse_count(const std::string& token) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size()) {
    throw ConsistencyError("expected a count answer, got \"" + token + "\"");
  }
  return value;
}

bool parse_yes_no(const std::string& token) {
  if (token == "yes") return true;
  if (token == "no") return false;
  throw ConsistencyError("expected yes/no, got \"" + token + "\"");
}

}  // namespace

std::string_view category_name(Category c) {
  switch (c) {
    case Category::caption: return "caption";
    case Category::count: return "count";
    case Category::exist: return "exist";
    case Category::seek: return "seek";
  }
  return "";
}

std::string_view dependency_name(HistoryDependency::Kind kind) {
  switch (kind) {
    case HistoryDependency::Kind::none: return "none";
    case HistoryDependency::Kind::coref: return "coref";
    case HistoryDependency::Kind::all: return "all";
  }
  return "";
}

int Entity::known_count() const {
  return static_cast<int>(std::count_if(known.begin(), known.end(), [](const auto& v) { return v.has_value(); }));
}

const SetFact* PartialScene::find_set(const SetDescriptor& set) const {
  for (const auto& f : set_facts) {
    if (f.set == set) return &f;
  }
  return nullptr;
}

const RelationFact* PartialScene::find_relation(int e, Relation r) const {
  for (const auto& f : relation_facts) {
    if (f.entity == e && f.relation == r) return &f;
  }
  return nullptr;
}

std::optional<int> PartialScene::entity_for_object(int object) const {
  for (std::size_t i = 0; i < entities.size(); ++i) {
    if (entities[i].object == object) return static_cast<int>(i);
  }
  return std::nullopt;
}

bool PartialScene::certainly_in(int e, const SetDescriptor& set) const {
  if (std::binary_search(set.excluded.begin(), set.excluded.end(), e)) return false;
  const Entity& ent = entity(e);
  for (Attribute a : kAttributes) {
    auto want = known(set.values, a);
    if (want && ent.value(a) != want) return false;
  }
  if (set.same_as) {
    auto mine = ent.value(set.same_attribute);
    auto theirs = entity(*set.same_as).value(set.same_attribute);
    if (!mine || !theirs || *mine != *theirs) return false;
  }
  return true;
}

std::vector<int> PartialScene::mentioned_before(int at_round, int min_distance) const {
  std::vector<int> out;
  for (int e = 0; e < size(); ++e) {
    if (at_round - entity(e).last_mention >= min_distance) out.push_back(e);
  }
  return out;
}

std::vector<int> PartialScene::all_handles() const {
  std::vector<int> out(entities.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<int>(i);
  return out;
}

int PartialScene::introduce(int object, const KnownValues& values, int at_round) {
  if (auto existing = entity_for_object(object)) {
    for (Attribute a : kAttributes) {
      if (auto v = known(values, a)) learn_attribute(*existing, a, *v);
    }
    mention(*existing, at_round);
    return *existing;
  }
  Entity ent;
  ent.known = values;
  ent.object = object;
  ent.first_mention = at_round;
  ent.last_mention = at_round;
  entities.push_back(ent);
  return size() - 1;
}

void PartialScene::learn_attribute(int e, Attribute a, std::uint8_t value) {
  auto& slot = entities[static_cast<std::size_t>(e)].known[static_cast<std::size_t>(a)];
  if (slot && *slot != value) {
    throw ConsistencyError(entity_text(e) + ": " + std::string(attribute_name(a)) + " already known as " +
                           std::string(value_name(a, *slot)) + ", told " + std::string(value_name(a, value)));
  }
  slot = value;
}

void PartialScene::learn_count(const SetDescriptor& set, int count) {
  for (auto& f : set_facts) {
    if (f.set != set) continue;
    if ((f.count && *f.count != count) || (f.nonempty && count == 0)) {
      throw ConsistencyError("count of " + set_text(set) + " contradicts earlier fact");
    }
    f.count = count;
    f.nonempty = count > 0;
    return;
  }
  set_facts.push_back({set, count, count > 0});
}

void PartialScene::learn_nonempty(const SetDescriptor& set) {
  for (auto& f : set_facts) {
    if (f.set != set) continue;
    if (f.count && *f.count == 0) throw ConsistencyError(set_text(set) + " was known to be empty");
    f.nonempty = true;
    return;
  }
  set_facts.push_back({set, std::nullopt, true});
}

void PartialScene::learn_relation(int e, Relation r, bool present, std::optional<int> neighbor) {
  for (auto& f : relation_facts) {
    if (f.entity != e || f.relation != r) continue;
    if (f.present != present || (f.neighbor && neighbor && *f.neighbor != *neighbor)) {
      throw ConsistencyError(entity_text(e) + ": " + std::string(relation_name(r)) + " neighbor contradicts earlier fact");
    }
    if (neighbor) f.neighbor = neighbor;
    return;
  }
  relation_facts.push_back({e, r, present, neighbor});
}

void PartialScene::mention(int e, int at_round) {
  auto& ent = entities[static_cast<std::size_t>(e)];
  ent.last_mention = std::max(ent.last_mention, at_round);
}

std::optional<std::uint8_t> PartialWorld::attribute(int item, Attribute a) const {
  return state_.entity(item).value(a);
}

std::optional<int> PartialWorld::neighbor(int item, Relation r) const {
  const RelationFact* f = state_.find_relation(item, r);
  if (!f || (f->present && !f->neighbor)) throw GenerationAbort("relation not known to the questioner");
  if (!f->present) return std::nullopt;
  return f->neighbor;
}

int PartialWorld::extreme(Extreme) const { throw GenerationAbort("extremes are not known to the questioner"); }

std::string PartialWorld::handle(int item) const { return entity_handle(item); }

std::optional<int> PartialWorld::resolve(std::string_view handle) const {
  if (handle.size() < 2 || handle.front() != 'e') return std::nullopt;
  int value = 0;
  auto [ptr, ec] = std::from_chars(handle.data() + 1, handle.data() + handle.size(), value);
  if (ec != std::errc{} || ptr != handle.data() + handle.size() || value < 0 || value >= state_.size()) {
    return std::nullopt;
  }
  return value;
}

std::string entity_handle(int entity) { return "e" + std::to_string(entity); }

PartialScene apply_caption(const Utterance& caption) {
  PartialScene state;
  const auto& facts = caption.revealed;
  std::vector<int> handles;
  for (const auto& m : facts.objects) handles.push_back(state.introduce(m.object, m.known, 0));
  if (facts.relation) {
    const auto& edge = *facts.relation;
    state.learn_relation(handles.at(edge.anchor), edge.relation, true, handles.at(edge.subject));
  }
  RoundSummary summary;
  summary.category = Category::caption;
  if (facts.group) {
    state.learn_count(facts.group->first, facts.group->second);
    summary.family = Family::obj_count;
    summary.set = facts.group->first;
    summary.count = facts.group->second;
  } else if (!handles.empty()) {
    state.focus = handles.front();
    summary.family = facts.relation ? Family::obj_relation : Family::obj_unique;
    summary.subject = handles.front();
  }
  state.last = summary;
  return state;
}

PartialScene apply_qa(PartialScene state, const QuestionCandidate& q, const Answer& answer, int round) {
  state.round = round;
  for (int e : q.referred) state.mention(e, round);

  RoundSummary summary;
  summary.family = q.family;
  summary.category = q.category;
  summary.attribute = q.attribute;
  summary.relation = q.relation;
  summary.set = q.set;

  switch (q.family) {
    case Family::count_all:
    case Family::excl:
    case Family::attr:
    case Family::attr_group:
    case Family::obj_excl_imm:
    case Family::obj_excl_early: {
      const SetDescriptor& set = q.set.value();
      if (q.category == Category::count) {
        int n = parse_count(answer.token);
        state.learn_count(set, n);
        summary.count = n;
      } else if (parse_yes_no(answer.token)) {
        state.learn_nonempty(set);
      } else {
        state.learn_count(set, 0);
      }
      bool about_entity = q.family == Family::obj_excl_imm || q.family == Family::obj_excl_early;
      state.focus = about_entity ? q.subject : std::nullopt;
      summary.subject = state.focus;
      break;
    }
    case Family::obj_rel_imm:
    case Family::obj_rel_imm2:
    case Family::obj_rel_early: {
      bool present = q.category == Category::count ? parse_count(answer.token) > 0 : parse_yes_no(answer.token);
      state.learn_relation(q.subject.value(), q.relation.value(), present);
      state.focus = q.subject;
      summary.subject = q.subject;
      break;
    }
    case Family::seek_attr_imm:
    case Family::seek_attr_imm2:
    case Family::seek_attr_early:
    case Family::seek_attr_sim_early: {
      Attribute a = q.attribute.value();
      auto v = parse_value(a, answer.token);
      if (!v) throw ConsistencyError("expected a " + std::string(attribute_name(a)) + ", got \"" + answer.token + "\"");
      state.learn_attribute(q.subject.value(), a, *v);
      state.focus = q.subject;
      summary.subject = q.subject;
      break;
    }
    case Family::seek_attr_rel_imm:
    case Family::seek_attr_rel_early: {
      int anchor = q.subject.value();
      Relation r = q.relation.value();
      if (answer.token == "none") {
        state.learn_relation(anchor, r, false);
        state.focus = anchor;
        break;
      }
      Attribute a = q.attribute.value();
      auto v = parse_value(a, answer.token);
      if (!v) throw ConsistencyError("expected a " + std::string(attribute_name(a)) + ", got \"" + answer.token + "\"");
      if (!answer.object) throw ConsistencyError("relation answer without its object");
      // The answer grounds the referent; an already known object is the same entity.
      int found = state.introduce(*answer.object, KnownValues{}, round);
      state.learn_attribute(found, a, *v);
      state.learn_relation(anchor, r, true, found);
      state.focus = found;
      summary.subject = found;
      break;
    }
    case Family::obj_unique:
    case Family::obj_count:
    case Family::obj_extreme:
    case Family::obj_relation:
      throw std::invalid_argument("apply_qa: caption template given as a question");
  }
  state.last = summary;
  return state;
}

HistoryDependency label_dependency(const QuestionCandidate& q, const PartialScene& state) {
  switch (q.family) {
    case Family::count_all:
    case Family::attr: return {HistoryDependency::Kind::none, 0};
    case Family::excl: return {HistoryDependency::Kind::all, 0};
    default: break;
  }
  const int round = state.round + 1;
  if (q.antecedent) {
    return {HistoryDependency::Kind::coref, round - state.entity(*q.antecedent).last_mention};
  }
  // "among them" and "how about ...?" lean on the previous round.
  return {HistoryDependency::Kind::coref, 1};
}

bool is_redundant(const QuestionCandidate& q, const PartialScene& state) {
  switch (q.family) {
    case Family::seek_attr_imm:
    case Family::seek_attr_imm2:
    case Family::seek_attr_early:
    case Family::seek_attr_sim_early:
      return state.entity(q.subject.value()).value(q.attribute.value()).has_value();
    case Family::seek_attr_rel_imm:
    case Family::seek_attr_rel_early: {
      const RelationFact* f = state.find_relation(q.subject.value(), q.relation.value());
      if (!f) return false;
      if (!f->present) return true;
      return f->neighbor && state.entity(*f->neighbor).value(q.attribute.value()).has_value();
    }
    case Family::obj_rel_imm:
    case Family::obj_rel_imm2:
    case Family::obj_rel_early:
      return state.find_relation(q.subject.value(), q.relation.value()) != nullptr;
    default: break;
  }
  if (!q.set) return false;
  const SetFact* f = state.find_set(*q.set);
  if (f && f->count) return true;
  if (q.category == Category::exist) {
    if (f && f->nonempty) return true;
    for (int e = 0; e < state.size(); ++e) {
      if (state.certainly_in(e, *q.set)) return true;
    }
  }
  return false;
}

ObjectSet resolve_set(const SetDescriptor& set, const PartialScene& state, const Scene& scene) {
  std::vector<int> excluded;
  for (int e : set.excluded) excluded.push_back(state.entity(e).object);
  std::optional<std::uint8_t> same;
  if (set.same_as) {
    same = scene.objects.at(static_cast<std::size_t>(state.entity(*set.same_as).object)).value(set.same_attribute);
  }
  ObjectSet out;
  for (const auto& o : scene.objects) {
    if (std::find(excluded.begin(), excluded.end(), o.id) != excluded.end()) continue;
    bool ok = true;
    for (Attribute a : kAttributes) {
      if (auto want = known(set.values, a); want && o.value(a) != *want) ok = false;
    }
    if (same && o.value(set.same_attribute) != *same) ok = false;
    if (ok) out.push_back(o.id);
  }
  return out;
}

std::vector<std::string> soundness_violations(const PartialScene& state, const Scene& scene) {
  std::vector<std::string> out;
  for (int e = 0; e < state.size(); ++e) {
    const Entity& ent = state.entity(e);
    if (ent.object < 0 || ent.object >= scene.size()) {
      out.push_back(entity_text(e) + ": not pinned to a scene object");
      continue;
    }
    const Object& obj = scene.objects[static_cast<std::size_t>(ent.object)];
    for (Attribute a : kAttributes) {
      if (auto v = ent.value(a); v && *v != obj.value(a)) {
        out.push_back(entity_text(e) + ": " + std::string(attribute_name(a)) + " known as " +
                      std::string(value_name(a, *v)) + " but is " + std::string(value_name(a, obj.value(a))));
      }
    }
  }
  for (const auto& f : state.set_facts) {
    auto n = static_cast<int>(resolve_set(f.set, state, scene).size());
    if (f.count && *f.count != n) {
      out.push_back("count of " + set_text(f.set) + " known as " + std::to_string(*f.count) + " but is " +
                    std::to_string(n));
    }
    if (f.nonempty && n == 0) out.push_back(set_text(f.set) + " known nonempty but is empty");
  }
  for (const auto& f : state.relation_facts) {
    auto truth = immediate_neighbor(scene, state.entity(f.entity).object, f.relation);
    if (f.present != truth.has_value()) {
      out.push_back(entity_text(f.entity) + ": " + std::string(relation_name(f.relation)) + " neighbor presence wrong");
    } else if (f.neighbor && state.entity(*f.neighbor).object != *truth) {
      out.push_back(entity_text(f.entity) + ": " + std::string(relation_name(f.relation)) + " neighbor is a different object");
    }
  }
  if (state.focus && (*state.focus < 0 || *state.focus >= state.size())) out.push_back("focus is not a live entity");
  return out;
}

nlohmann::json state_to_json(const PartialScene& state) {
  auto values_json = [](const KnownValues& values) {
    nlohmann::json j = nlohmann::json::object();
    for (Attribute a : kAttributes) {
      if (auto v = known(values, a)) j[std::string(attribute_name(a))] = value_name(a, *v);
    }
    return j;
  };
  nlohmann::json out;
  out["round"] = state.round;
  out["focus"] = state.focus ? nlohmann::json(*state.focus) : nlohmann::json(nullptr);
  nlohmann::json ents = nlohmann::json::array();
  for (const auto& e : state.entities) {
    ents.push_back({{"object", e.object},
                    {"known", values_json(e.known)},
                    {"first_mention", e.first_mention},
                    {"last_mention", e.last_mention}});
  }
  out["entities"] = std::move(ents);
  nlohmann::json sets = nlohmann::json::array();
  for (const auto& f : state.set_facts) {
    nlohmann::json j{{"values", values_json(f.set.values)}, {"excluded", f.set.excluded}, {"nonempty", f.nonempty}};
    if (f.set.same_as) {
      j["same_as"] = *f.set.same_as;
      j["same_attribute"] = attribute_name(f.set.same_attribute);
    }
    if (f.count) j["count"] = *f.count;
    sets.push_back(std::move(j));
  }
  out["set_facts"] = std::move(sets);
  nlohmann::json rels = nlohmann::json::array();
  for (const auto& f : state.relation_facts) {
    nlohmann::json j{{"entity", f.entity}, {"relation", relation_name(f.relation)}, {"present", f.present}};
    if (f.neighbor) j["neighbor"] = *f.neighbor;
    rels.push_back(std::move(j));
  }
  out["relation_facts"] = std::move(rels);
  return out;
}

}  // namespace dforge
