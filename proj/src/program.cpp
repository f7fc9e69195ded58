#include "dforge/program.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <map>

namespace dforge {
namespace {

constexpr std::array<std::string_view, 7> kPrimitiveNames = {"sample", "unique", "count", "group",
                                                             "filter", "exist",  "relate"};

std::string step_label(std::size_t index, const PrimitiveCall& call) {
  std::string s = "step " + std::to_string(index) + " (" + std::string(primitive_name(call.kind));
  if (!call.param.empty()) s += "[" + call.param + "]";
  if (!call.arg.empty()) s += "(" + call.arg + ")";
  return s + ")";
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  if (text.empty()) return parts;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = text.find(sep, start);
    parts.push_back(text.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::optional<int> parse_int(std::string_view text) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

// Attribute tuple of an item; nullopt if any component is unknown.
std::optional<std::vector<std::uint8_t>> tuple_of(const World& world, int item,
                                                  const std::vector<Attribute>& attributes) {
  std::vector<std::uint8_t> tuple;
  tuple.reserve(attributes.size());
  for (Attribute a : attributes) {
    auto v = world.attribute(item, a);
    if (!v) return std::nullopt;
    tuple.push_back(*v);
  }
  return tuple;
}

// All nonempty subsets of at most two attributes, grouped by size.
const std::array<std::vector<AttributeList>, 2>& small_attribute_subsets() {
  static const auto subsets = [] {
    std::array<std::vector<AttributeList>, 2> out;
    for (std::size_t i = 0; i < kNumAttributes; ++i) {
      out[0].push_back({{kAttributes[i]}});
      for (std::size_t j = i + 1; j < kNumAttributes; ++j) out[1].push_back({{kAttributes[i], kAttributes[j]}});
    }
    return out;
  }();
  return subsets;
}

class Interpreter {
 public:
  Interpreter(const Program& program, const EvalContext& ctx) : program_(program), ctx_(ctx) {}

  ProgramRun run() {
    check_well_formed(program_);
    ProgramRun result;
    result.resolved = program_;
    result.outputs.reserve(program_.steps.size());
    outputs_ = &result.outputs;
    for (std::size_t i = 0; i < program_.steps.size(); ++i) {
      index_ = i;
      result.outputs.push_back(step(result.resolved.steps[i]));
    }
    return result;
  }

 private:
  [[noreturn]] void type_error(const std::string& what) const {
    throw ProgramError(step_label(index_, program_.steps[index_]) + ": " + what);
  }
  [[noreturn]] void abort(const std::string& what) const {
    throw GenerationAbort(step_label(index_, program_.steps[index_]) + ": " + what);
  }
  bool generating() const { return ctx_.mode == EvalMode::generate; }
  bool is_output() const { return index_ + 1 == program_.steps.size(); }

  const Value& input(const PrimitiveCall& call, std::size_t i) const {
    return (*outputs_)[static_cast<std::size_t>(call.inputs[i])];
  }

  // First object-set input, or the whole world if the step has none.
  ObjectSet set_input(const PrimitiveCall& call) const {
    for (std::size_t i = 0; i < call.inputs.size(); ++i) {
      if (const auto* s = std::get_if<ObjectSet>(&input(call, i))) return *s;
    }
    return all_objects(ctx_.world);
  }

  const ObjectSet& set_at(const PrimitiveCall& call, std::size_t i) const {
    if (i >= call.inputs.size()) type_error("missing input " + std::to_string(i));
    const auto* s = std::get_if<ObjectSet>(&input(call, i));
    if (!s) type_error("input " + std::to_string(i) + " is not an object set");
    return *s;
  }

  std::vector<Attribute> attribute_param(const PrimitiveCall& call) const {
    if (!call.param.empty()) {
      auto attrs = split_attributes(call.param);
      if (attrs.empty()) type_error("bad attribute list");
      return attrs;
    }
    for (std::size_t i = 0; i < call.inputs.size(); ++i) {
      if (const auto* l = std::get_if<AttributeList>(&input(call, i))) return l->attributes;
    }
    type_error("no attributes given");
  }

  int resolve(std::string_view handle) const {
    auto item = ctx_.world.resolve(handle);
    if (!item) abort("unresolvable handle \"" + std::string(handle) + "\"");
    return *item;
  }

  Rng& rng() const {
    if (!ctx_.rng) type_error("unpinned sample needs a random source");
    return *ctx_.rng;
  }

  Value step(PrimitiveCall& call) {
    switch (call.kind) {
      case PrimitiveKind::sample: return sample(call);
      case PrimitiveKind::unique: {
        auto out = eval_unique(ctx_.world, set_input(call), attribute_param(call), EvalMode::answer);
        if (out.empty() && generating()) abort("no unique objects");
        return out;
      }
      case PrimitiveKind::count: return eval_count(set_input(call));
      case PrimitiveKind::exist: return eval_exist(set_at(call, 0));
      case PrimitiveKind::group: return group(call);
      case PrimitiveKind::filter: return filter(call);
      case PrimitiveKind::relate: return relate(call);
    }
    type_error("unknown primitive");
  }

  Value sample(PrimitiveCall& call) {
    if (call.param == "object") {
      ObjectSet pool = set_input(call);
      if (pool.empty()) abort("nothing to sample from");
      int item;
      if (!call.arg.empty()) {
        item = resolve(call.arg);
        if (!std::binary_search(pool.begin(), pool.end(), item)) abort("pinned object not in input set");
      } else {
        item = eval_sample(pool, rng());
        call.arg = ctx_.world.handle(item);
      }
      return ObjectSet{item};
    }
    if (call.param == "attribute") {
      const ObjectSet& objs = set_at(call, 0);
      if (objs.size() > 1) abort("attribute of an ambiguous reference");
      Attribute a;
      if (!call.arg.empty()) {
        auto parsed = parse_attribute(call.arg);
        if (!parsed) type_error("unknown attribute");
        a = *parsed;
      } else {
        a = kAttributes[rng().index(kNumAttributes)];
        call.arg = attribute_name(a);
      }
      if (objs.empty()) {
        if (generating()) abort("attribute of nothing");
        return NoValue{};
      }
      auto v = ctx_.world.attribute(objs.front(), a);
      if (!v) abort("attribute unknown");
      return AttributeValue{a, *v};
    }
    if (call.param == "attributes") {
      if (!call.arg.empty()) {
        auto attrs = split_attributes(call.arg);
        if (attrs.empty()) type_error("bad attribute list");
        return AttributeList{std::move(attrs)};
      }
      const auto& subsets = small_attribute_subsets();
      const auto& bucket = subsets[rng().index(subsets.size())];
      AttributeList drawn = eval_sample(bucket, rng());
      call.arg = join_attributes(drawn.attributes);
      return drawn;
    }
    if (call.param == "class") {
      if (call.inputs.empty()) type_error("missing partition input");
      const auto* part = std::get_if<Partition>(&input(call, 0));
      if (!part) type_error("input is not a partition");
      if (part->classes.empty()) abort("empty partition");
      std::size_t k;
      if (!call.arg.empty()) {
        auto parsed = parse_int(call.arg);
        if (!parsed || *parsed < 0 || static_cast<std::size_t>(*parsed) >= part->classes.size()) {
          abort("pinned class out of range");
        }
        k = static_cast<std::size_t>(*parsed);
      } else {
        k = rng().index(part->classes.size());
        call.arg = std::to_string(k);
      }
      return part->classes[k];
    }
    type_error("unknown sample parameter");
  }

  Value group(const PrimitiveCall& call) {
    auto attrs = attribute_param(call);
    Partition part = eval_group(ctx_.world, set_input(call), attrs);
    if (call.arg.empty()) return part;
    auto names = split(call.arg, ',');
    if (names.size() != attrs.size()) type_error("group selector arity");
    std::vector<std::uint8_t> wanted;
    for (std::size_t i = 0; i < attrs.size(); ++i) {
      auto v = parse_value(attrs[i], names[i]);
      if (!v) type_error("unknown value \"" + std::string(names[i]) + "\"");
      wanted.push_back(*v);
    }
    for (const auto& cls : part.classes) {
      if (tuple_of(ctx_.world, cls.front(), attrs) == wanted) return cls;
    }
    if (generating()) abort("no such group");
    return ObjectSet{};
  }

  Value filter(const PrimitiveCall& call) {
    if (call.param == "exclude") {
      ObjectSet base = call.inputs.empty() ? all_objects(ctx_.world) : set_at(call, 0);
      ObjectSet drop;
      if (!call.arg.empty()) {
        for (auto h : split(call.arg, ',')) drop.push_back(resolve(h));
      }
      if (call.inputs.size() > 1) {
        const auto& extra = set_at(call, 1);
        drop.insert(drop.end(), extra.begin(), extra.end());
      }
      std::erase_if(base, [&](int i) { return std::find(drop.begin(), drop.end(), i) != drop.end(); });
      if (base.empty() && generating()) abort("nothing left after exclusion");
      return base;
    }
    auto attr = parse_attribute(call.param);
    if (!attr) type_error("unknown attribute");
    std::uint8_t value;
    if (!call.arg.empty()) {
      auto v = parse_value(*attr, call.arg);
      if (!v) type_error("unknown value \"" + call.arg + "\"");
      value = *v;
      return eval_filter(ctx_.world, set_input(call), *attr, value, ctx_.mode);
    }
    const ObjectSet& ref = set_at(call, 1);
    if (ref.size() != 1) abort("reference must be a single object");
    auto v = ctx_.world.attribute(ref.front(), *attr);
    if (!v) abort("reference attribute unknown");
    return eval_filter(ctx_.world, set_at(call, 0), *attr, *v, ctx_.mode);
  }

  Value relate(const PrimitiveCall& call) {
    if (auto e = parse_extreme(call.param)) {
      if (ctx_.world.size() == 0) abort("extreme of an empty world");
      return ObjectSet{ctx_.world.extreme(*e)};
    }
    auto r = parse_relation(call.param);
    if (!r) type_error("unknown relation");
    ObjectSet out = eval_relate(ctx_.world, set_at(call, 0), *r);
    if (out.empty() && generating()) abort("nothing " + std::string(relation_name(*r)));
    return out;
  }

  const Program& program_;
  const EvalContext& ctx_;
  std::vector<Value>* outputs_ = nullptr;
  std::size_t index_ = 0;
};

}  // namespace

std::string_view primitive_name(PrimitiveKind kind) { return kPrimitiveNames[static_cast<std::size_t>(kind)]; }

std::optional<PrimitiveKind> parse_primitive(std::string_view name) {
  auto it = std::find(kPrimitiveNames.begin(), kPrimitiveNames.end(), name);
  if (it == kPrimitiveNames.end()) return std::nullopt;
  return static_cast<PrimitiveKind>(it - kPrimitiveNames.begin());
}

int add_step(Program& program, PrimitiveKind kind, std::string param, std::string arg, std::vector<int> inputs) {
  program.steps.push_back({kind, std::move(param), std::move(arg), std::move(inputs)});
  return static_cast<int>(program.steps.size()) - 1;
}

void check_well_formed(const Program& program) {
  if (program.steps.empty()) throw ProgramError("empty program");
  for (std::size_t i = 0; i < program.steps.size(); ++i) {
    const auto& call = program.steps[i];
    for (int in : call.inputs) {
      if (in < 0 || static_cast<std::size_t>(in) >= i) {
        throw ProgramError(step_label(i, call) + ": input " + std::to_string(in) + " does not precede it");
      }
    }
    const bool has_param = !call.param.empty();
    switch (call.kind) {
      case PrimitiveKind::count:
      case PrimitiveKind::exist:
        if (has_param || !call.arg.empty()) throw ProgramError(step_label(i, call) + ": takes no parameter");
        if (call.kind == PrimitiveKind::exist && call.inputs.size() != 1) {
          throw ProgramError(step_label(i, call) + ": needs one input");
        }
        break;
      case PrimitiveKind::filter:
        if (!has_param) throw ProgramError(step_label(i, call) + ": needs a parameter");
        if (call.param != "exclude" && call.arg.empty() && call.inputs.size() != 2) {
          throw ProgramError(step_label(i, call) + ": needs a value or a reference input");
        }
        break;
      case PrimitiveKind::relate:
      case PrimitiveKind::sample:
        if (!has_param) throw ProgramError(step_label(i, call) + ": needs a parameter");
        break;
      case PrimitiveKind::unique:
      case PrimitiveKind::group:
        if (!has_param && call.inputs.empty()) throw ProgramError(step_label(i, call) + ": needs attributes");
        break;
    }
  }
}

std::string describe(const Value& value) {
  struct Visitor {
    std::string operator()(const ObjectSet& s) const {
      std::string out = "{";
      for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
      return out + "}";
    }
    std::string operator()(const Partition& p) const {
      std::string out = "[";
      for (std::size_t i = 0; i < p.classes.size(); ++i) out += (i ? "," : "") + (*this)(p.classes[i]);
      return out + "]";
    }
    std::string operator()(const AttributeList& l) const { return "<" + join_attributes(l.attributes) + ">"; }
    std::string operator()(const AttributeValue& v) const { return std::string(value_name(v.attribute, v.value)); }
    std::string operator()(const Count& c) const { return std::to_string(c.value); }
    std::string operator()(const Truth& t) const { return t.value ? "yes" : "no"; }
    std::string operator()(const NoValue&) const { return "none"; }
  };
  return std::visit(Visitor{}, value);
}

std::optional<std::uint8_t> FullWorld::attribute(int item, Attribute a) const {
  return scene_.objects[static_cast<std::size_t>(item)].value(a);
}

std::optional<int> FullWorld::neighbor(int item, Relation r) const { return immediate_neighbor(scene_, item, r); }

int FullWorld::extreme(Extreme e) const { return extreme_object(scene_, e); }

std::string FullWorld::handle(int item) const { return std::to_string(item); }

std::optional<int> FullWorld::resolve(std::string_view handle) const {
  auto v = parse_int(handle);
  if (!v || *v < 0 || *v >= scene_.size()) return std::nullopt;
  return v;
}

ProgramRun run_program(const Program& program, const EvalContext& ctx) { return Interpreter(program, ctx).run(); }

ObjectSet all_objects(const World& world) {
  ObjectSet all(static_cast<std::size_t>(world.size()));
  for (int i = 0; i < world.size(); ++i) all[static_cast<std::size_t>(i)] = i;
  return all;
}

ObjectSet eval_filter(const World& world, const ObjectSet& input, Attribute attribute, std::uint8_t value,
                      EvalMode mode) {
  ObjectSet out;
  for (int item : input) {
    if (world.attribute(item, attribute) == value) out.push_back(item);
  }
  if (out.empty() && mode == EvalMode::generate) {
    throw GenerationAbort("filter[" + std::string(attribute_name(attribute)) + "](" +
                          std::string(value_name(attribute, value)) + "): no match");
  }
  return out;
}

ObjectSet eval_unique(const World& world, const ObjectSet& input, const std::vector<Attribute>& attributes,
                      EvalMode mode) {
  if (attributes.empty()) throw ProgramError("unique: no attributes");
  // An unknown component in a partial world may match anything, so it blocks
  // uniqueness of others and cannot itself be unique.
  ObjectSet out;
  for (int item : input) {
    auto mine = tuple_of(world, item, attributes);
    if (!mine) continue;
    bool unique = true;
    for (int other : input) {
      if (other == item) continue;
      bool differs = false;
      for (std::size_t k = 0; k < attributes.size() && !differs; ++k) {
        auto v = world.attribute(other, attributes[k]);
        differs = v && *v != (*mine)[k];
      }
      if (!differs) {
        unique = false;
        break;
      }
    }
    if (unique) out.push_back(item);
  }
  if (out.empty() && mode == EvalMode::generate) throw GenerationAbort("unique: no unique objects");
  return out;
}

Count eval_count(const ObjectSet& input) { return {static_cast<int>(input.size())}; }

Truth eval_exist(const ObjectSet& input) { return {!input.empty()}; }

ObjectSet eval_relate(const World& world, const ObjectSet& input, Relation relation) {
  if (input.size() != 1) {
    throw GenerationAbort("relate[" + std::string(relation_name(relation)) + "]: needs exactly one object, got " +
                          std::to_string(input.size()));
  }
  auto n = world.neighbor(input.front(), relation);
  if (!n) return {};
  return {*n};
}

Partition eval_group(const World& world, const ObjectSet& input, const std::vector<Attribute>& attributes) {
  if (attributes.empty()) throw ProgramError("group: no attributes");
  std::map<std::vector<std::uint8_t>, ObjectSet> classes;
  for (int item : input) {
    if (auto t = tuple_of(world, item, attributes)) classes[*t].push_back(item);
  }
  Partition part;
  for (auto& [key, members] : classes) part.classes.push_back(std::move(members));
  return part;
}

std::string join_attributes(const std::vector<Attribute>& attributes) {
  std::string out;
  for (std::size_t i = 0; i < attributes.size(); ++i) {
    if (i) out += ',';
    out += attribute_name(attributes[i]);
  }
  return out;
}

std::vector<Attribute> split_attributes(std::string_view text) {
  std::vector<Attribute> out;
  for (auto part : split(text, ',')) {
    auto a = parse_attribute(part);
    if (!a) return {};
    out.push_back(*a);
  }
  return out;
}

nlohmann::json program_to_json(const Program& program) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& call : program.steps) {
    nlohmann::json j;
    j["kind"] = primitive_name(call.kind);
    if (!call.param.empty()) j["param"] = call.param;
    if (!call.arg.empty()) j["arg"] = call.arg;
    j["inputs"] = call.inputs;
    steps.push_back(std::move(j));
  }
  return steps;
}

Program program_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ProgramError("program must be a JSON list");
  Program program;
  for (const auto& s : j) {
    if (!s.is_object() || !s.contains("kind") || !s["kind"].is_string()) throw ProgramError("step without kind");
    auto kind = parse_primitive(s["kind"].get<std::string>());
    if (!kind) throw ProgramError("unknown primitive \"" + s["kind"].get<std::string>() + "\"");
    PrimitiveCall call;
    call.kind = *kind;
    if (s.contains("param")) call.param = s["param"].get<std::string>();
    if (s.contains("arg")) call.arg = s["arg"].get<std::string>();
    if (s.contains("inputs")) call.inputs = s["inputs"].get<std::vector<int>>();
    program.steps.push_back(std::move(call));
  }
  check_well_formed(program);
  return program;
}

}  // namespace dforge
