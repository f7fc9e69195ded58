#pragma once

// The questioner's partial scene graph: what has been established by the
// caption and the answered rounds so far, and nothing else.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dforge/program.hpp"
#include "dforge/scene.hpp"

namespace dforge {

struct QuestionCandidate;
struct Answer;
struct Utterance;

enum class Category : std::uint8_t { caption, count, exist, seek };
std::string_view category_name(Category c);

enum class Family : std::uint8_t {
  obj_unique,
  obj_count,
  obj_extreme,
  obj_relation,
  count_all,
  excl,
  attr,
  attr_group,
  obj_rel_imm,
  obj_rel_imm2,
  obj_rel_early,
  obj_excl_imm,
  obj_excl_early,
  seek_attr_imm,
  seek_attr_imm2,
  seek_attr_early,
  seek_attr_sim_early,
  seek_attr_rel_imm,
  seek_attr_rel_early,
};

using KnownValues = std::array<std::optional<std::uint8_t>, kNumAttributes>;

inline std::optional<std::uint8_t> known(const KnownValues& v, Attribute a) { return v[static_cast<std::size_t>(a)]; }

struct Entity {
  KnownValues known{};
  int object = -1;  // full-scene identity, pinned when the entity is introduced
  int first_mention = 0;
  int last_mention = 0;

  std::optional<std::uint8_t> value(Attribute a) const { return known[static_cast<std::size_t>(a)]; }
  int known_count() const;
};

/// An object set as the dialog talks about it: literal attribute constraints,
/// optionally "same <attribute> as entity", minus a list of mentioned entities.
struct SetDescriptor {
  KnownValues values{};
  std::optional<int> same_as;
  Attribute same_attribute = Attribute::color;
  std::vector<int> excluded;  // entity handles, sorted

  bool operator==(const SetDescriptor&) const = default;
};

struct SetFact {
  SetDescriptor set;
  std::optional<int> count;  // exact cardinality, when known
  bool nonempty = false;
};

/// Knowledge about an entity's immediate neighbor in one direction.
struct RelationFact {
  int entity = 0;
  Relation relation = Relation::right;
  bool present = false;
  std::optional<int> neighbor;  // entity handle, once identified
};

/// What the previous round was about; drives the "imm2", "among them" and
/// "what about the earlier ..." follow-ups.
struct RoundSummary {
  Family family = Family::count_all;
  Category category = Category::caption;
  std::optional<int> subject;
  std::optional<Attribute> attribute;
  std::optional<Relation> relation;
  std::optional<SetDescriptor> set;
  std::optional<int> count;
};

/// Facts a caption reveals. Object ids pin identities; the questioner never
/// sees the rest of the scene.
struct RevealedFacts {
  struct Mention {
    int object = -1;
    KnownValues known{};
  };
  struct RelationEdge {
    std::size_t anchor = 0;   // index into objects
    Relation relation = Relation::right;
    std::size_t subject = 0;  // the anchor's immediate neighbor in that direction
  };
  std::vector<Mention> objects;  // primary mention first
  std::optional<RelationEdge> relation;
  std::optional<std::pair<SetDescriptor, int>> group;
};

struct HistoryDependency {
  enum class Kind : std::uint8_t { none, coref, all };
  Kind kind = Kind::none;
  int distance = 0;  // rounds, coref only

  bool operator==(const HistoryDependency&) const = default;
};

std::string_view dependency_name(HistoryDependency::Kind kind);

struct PartialScene {
  std::vector<Entity> entities;
  std::vector<SetFact> set_facts;
  std::vector<RelationFact> relation_facts;
  std::optional<int> focus;
  std::optional<RoundSummary> last;
  int round = 0;

  int size() const { return static_cast<int>(entities.size()); }
  const Entity& entity(int handle) const { return entities[static_cast<std::size_t>(handle)]; }

  const SetFact* find_set(const SetDescriptor& set) const;
  const RelationFact* find_relation(int entity, Relation r) const;
  std::optional<int> entity_for_object(int object) const;

  /// True when the entity is certainly a member of the set.
  bool certainly_in(int entity, const SetDescriptor& set) const;
  /// Entities last mentioned at least `min_distance` rounds before `round`.
  std::vector<int> mentioned_before(int round, int min_distance) const;
  std::vector<int> all_handles() const;

  // Mutators: each throws ConsistencyError if the new fact contradicts a known one.
  int introduce(int object, const KnownValues& known, int round);
  void learn_attribute(int entity, Attribute a, std::uint8_t value);
  void learn_count(const SetDescriptor& set, int count);
  void learn_nonempty(const SetDescriptor& set);
  void learn_relation(int entity, Relation r, bool present, std::optional<int> neighbor = std::nullopt);
  void mention(int entity, int round);
};

/// Interpreter view of a partial scene: items are entity handles ("e<k>"),
/// unknown attributes stay unknown, and relations resolve only when known.
class PartialWorld final : public World {
 public:
  explicit PartialWorld(const PartialScene& state) : state_(state) {}
  int size() const override { return state_.size(); }
  std::optional<std::uint8_t> attribute(int item, Attribute a) const override;
  std::optional<int> neighbor(int item, Relation r) const override;
  int extreme(Extreme e) const override;
  std::string handle(int item) const override;
  std::optional<int> resolve(std::string_view handle) const override;

 private:
  const PartialScene& state_;
};

std::string entity_handle(int entity);

PartialScene apply_caption(const Utterance& caption);
PartialScene apply_qa(PartialScene state, const QuestionCandidate& question, const Answer& answer, int round);
HistoryDependency label_dependency(const QuestionCandidate& question, const PartialScene& state);
bool is_redundant(const QuestionCandidate& question, const PartialScene& state);

/// Objects of the full scene belonging to a described set.
ObjectSet resolve_set(const SetDescriptor& set, const PartialScene& state, const Scene& scene);

/// Every fact in the state checked against the ground truth. Empty means sound.
std::vector<std::string> soundness_violations(const PartialScene& state, const Scene& scene);

nlohmann::json state_to_json(const PartialScene& state);

}  // namespace dforge
