#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "dforge/rng.hpp"

namespace dforge {

// Attribute order doubles as the surface order of adjectives: [Z] [C] [M] [S].
enum class Attribute : std::uint8_t { size, color, material, shape };
inline constexpr std::array<Attribute, 4> kAttributes = {Attribute::size, Attribute::color,
                                                         Attribute::material, Attribute::shape};
inline constexpr std::size_t kNumAttributes = kAttributes.size();

enum class Relation : std::uint8_t { right, left, front, behind };
inline constexpr std::array<Relation, 4> kRelations = {Relation::right, Relation::left, Relation::front,
                                                       Relation::behind};

enum class Extreme : std::uint8_t { right, left, fore, rear, center };
inline constexpr std::array<Extreme, 5> kExtremes = {Extreme::right, Extreme::left, Extreme::fore, Extreme::rear,
                                                     Extreme::center};

std::string_view attribute_name(Attribute a);
std::optional<Attribute> parse_attribute(std::string_view name);

std::span<const std::string_view> value_names(Attribute a);
std::string_view value_name(Attribute a, std::uint8_t value);
std::optional<std::uint8_t> parse_value(Attribute a, std::string_view name);
inline std::uint8_t value_count(Attribute a) { return static_cast<std::uint8_t>(value_names(a).size()); }

std::string_view relation_name(Relation r);
std::optional<Relation> parse_relation(std::string_view name);
Relation opposite(Relation r);

std::string_view extreme_name(Extreme e);  // rightmost, leftmost, frontmost, rearmost, central
std::optional<Extreme> parse_extreme(std::string_view name);

/// A full ground-truth attribute assignment, indexed by Attribute.
using AttributeValues = std::array<std::uint8_t, kNumAttributes>;

struct Object {
  int id = 0;
  AttributeValues attributes{};
  std::array<double, 3> position{};             // x: left→right, y: rear→front, z: height
  std::optional<std::array<double, 2>> pixel;  // 480x320 image coordinates

  std::uint8_t value(Attribute a) const { return attributes[static_cast<std::size_t>(a)]; }
};

/// Per relation, per object: the other objects lying in that direction, nearest first.
using RelationIndex = std::array<std::vector<std::vector<int>>, kRelations.size()>;

struct Scene {
  std::string scene_id;
  std::vector<Object> objects;
  RelationIndex relations;

  int size() const { return static_cast<int>(objects.size()); }
  const std::vector<int>& related(int obj, Relation r) const {
    return relations[static_cast<std::size_t>(r)][static_cast<std::size_t>(obj)];
  }
};

/// Relation lists derived from positions alone. Objects sharing the relation's
/// axis coordinate are on neither side.
RelationIndex compute_relations(std::span<const Object> objects);

/// Builds a scene, assigning contiguous ids and the relation index.
Scene make_scene(std::string scene_id, std::vector<Object> objects);

std::optional<int> immediate_neighbor(const Scene& scene, int obj, Relation relation);
int extreme_object(const Scene& scene, Extreme extreme);

struct SynthesisLimits {
  double half_extent = 3.0;     // positions in [-half_extent, half_extent] on the ground plane
  double min_separation = 0.1;  // per ground axis
  int placement_retries = 50;
};

Scene synthesize_scene(Rng& rng, int min_objects, int max_objects, const SynthesisLimits& limits = {});

/// Linear ground-plane projection into the 480x320 image used when a scene
/// carries no pixel coordinates.
std::array<double, 2> project_to_image(const std::array<double, 3>& position);
inline constexpr double kImageWidth = 480.0;
inline constexpr double kImageHeight = 320.0;

/// Scene ids of indexed images: zero-padded to six digits.
std::string padded_index(long long index);

std::vector<Scene> load_scenes(const std::filesystem::path& path);
std::vector<Scene> parse_scenes(const nlohmann::json& document);

nlohmann::json scene_to_json(const Scene& scene);
Scene scene_from_json(const nlohmann::json& record, std::size_t record_index);
nlohmann::json scenes_to_json(std::span<const Scene> scenes);

}  // namespace dforge
