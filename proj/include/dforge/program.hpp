#pragma once

// A tiny dataflow language of seven primitives over object sets drawn from a
// world: either the full scene or the questioner's partial scene.

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

#include "dforge/errors.hpp"
#include "dforge/rng.hpp"
#include "dforge/scene.hpp"

namespace dforge {

enum class PrimitiveKind : std::uint8_t { sample, unique, count, group, filter, exist, relate };

std::string_view primitive_name(PrimitiveKind kind);
std::optional<PrimitiveKind> parse_primitive(std::string_view name);

/// One step. `param` and `arg` are empty when absent.
///
///   sample[object]      (set)          -> singleton set; arg pins the drawn handle
///   sample[attribute]   (set of <=1)   -> attribute value of the object, or none; arg pins the attribute
///   sample[attributes]  ()             -> attribute list; arg pins e.g. "shape,color"
///   sample[class]       (partition)    -> one class; arg pins the class index
///   unique[a,b]         (set? list?)   -> objects whose (a,b)-tuple occurs once
///   count               (set?)         -> cardinality
///   exist               (set)          -> yes/no
///   group[a,b]          (set? list?)   -> partition, or with arg "v1,v2" the matching class
///   filter[a](v)        (set?)         -> objects with a == v
///   filter[a]           (set, ref)     -> objects sharing ref's value of a
///   filter[exclude](h)  (set?, ref?)   -> set minus the listed handles / ref set
///   relate[r]           (singleton)    -> immediate neighbor set (0 or 1 objects)
///   relate[rightmost]   ()             -> positional extreme of the world
///
/// A set input that is omitted means the whole world.
struct PrimitiveCall {
  PrimitiveKind kind = PrimitiveKind::count;
  std::string param;
  std::string arg;
  std::vector<int> inputs;

  bool operator==(const PrimitiveCall&) const = default;
};

/// Steps in dataflow order; the last step is the output slot.
struct Program {
  std::vector<PrimitiveCall> steps;
  bool operator==(const Program&) const = default;
};

/// Appends a step and returns its index.
int add_step(Program& program, PrimitiveKind kind, std::string param = {}, std::string arg = {},
             std::vector<int> inputs = {});

/// Structural checks: inputs point backwards, arity matches kind. Throws ProgramError.
void check_well_formed(const Program& program);

using ObjectSet = std::vector<int>;  // sorted ascending
struct Partition {
  std::vector<ObjectSet> classes;
  bool operator==(const Partition&) const = default;
};
struct AttributeList {
  std::vector<Attribute> attributes;
  bool operator==(const AttributeList&) const = default;
};
struct AttributeValue {
  Attribute attribute;
  std::uint8_t value;
  bool operator==(const AttributeValue&) const = default;
};
struct Count {
  int value;
  bool operator==(const Count&) const = default;
};
struct Truth {
  bool value;
  bool operator==(const Truth&) const = default;
};
struct NoValue {
  bool operator==(const NoValue&) const = default;
};

using Value = std::variant<ObjectSet, Partition, AttributeList, AttributeValue, Count, Truth, NoValue>;

std::string describe(const Value& value);

/// What the interpreter sees. Attributes may be unknown in partial worlds, and
/// relations may be unknown (neighbor() then throws GenerationAbort).
class World {
 public:
  virtual ~World() = default;
  virtual int size() const = 0;
  virtual std::optional<std::uint8_t> attribute(int item, Attribute a) const = 0;
  virtual std::optional<int> neighbor(int item, Relation r) const = 0;
  virtual int extreme(Extreme e) const = 0;
  virtual std::string handle(int item) const = 0;
  virtual std::optional<int> resolve(std::string_view handle) const = 0;
};

class FullWorld final : public World {
 public:
  explicit FullWorld(const Scene& scene) : scene_(scene) {}
  int size() const override { return scene_.size(); }
  std::optional<std::uint8_t> attribute(int item, Attribute a) const override;
  std::optional<int> neighbor(int item, Relation r) const override;
  int extreme(Extreme e) const override;
  std::string handle(int item) const override;
  std::optional<int> resolve(std::string_view handle) const override;

 private:
  const Scene& scene_;
};

enum class EvalMode : std::uint8_t {
  generate,  // empty Filter/Unique/Relate results abort the derivation
  answer,    // empty sets flow through; counts of 0 and "none" are answers
};

struct EvalContext {
  const World& world;
  Rng* rng = nullptr;  // only Sample without a pinned arg draws from it
  EvalMode mode = EvalMode::answer;
};

struct ProgramRun {
  std::vector<Value> outputs;  // one per step
  Program resolved;            // every Sample step pinned to what it drew
  const Value& terminal() const { return outputs.back(); }
};

/// Evaluates steps in order. Throws GenerationAbort on constraint failure and
/// ProgramError on malformed programs; nothing is returned on failure.
ProgramRun run_program(const Program& program, const EvalContext& ctx);

// Single-primitive entry points, mirroring the program semantics.
ObjectSet eval_filter(const World& world, const ObjectSet& input, Attribute attribute, std::uint8_t value,
                      EvalMode mode = EvalMode::generate);
ObjectSet eval_unique(const World& world, const ObjectSet& input, const std::vector<Attribute>& attributes,
                      EvalMode mode = EvalMode::generate);
Count eval_count(const ObjectSet& input);
Truth eval_exist(const ObjectSet& input);
ObjectSet eval_relate(const World& world, const ObjectSet& input, Relation relation);
Partition eval_group(const World& world, const ObjectSet& input, const std::vector<Attribute>& attributes);

template <typename T>
const T& eval_sample(const std::vector<T>& items, Rng& rng);

ObjectSet all_objects(const World& world);

std::string join_attributes(const std::vector<Attribute>& attributes);
std::vector<Attribute> split_attributes(std::string_view text);

nlohmann::json program_to_json(const Program& program);
Program program_from_json(const nlohmann::json& j);

template <typename T>
const T& eval_sample(const std::vector<T>& items, Rng& rng) {
  if (items.empty()) throw GenerationAbort("sample: empty input");
  return items[rng.index(items.size())];
}

}  // namespace dforge
