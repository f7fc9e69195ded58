#include "dforge/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "dforge/errors.hpp"

namespace dforge {
namespace {

constexpr std::array<std::string_view, 4> kAttributeNames = {"size", "color", "material", "shape"};
constexpr std::array<std::string_view, 2> kSizes = {"large", "small"};
constexpr std::array<std::string_view, 8> kColors = {"blue", "brown", "cyan", "gray",
                                                     "green", "purple", "red", "yellow"};
constexpr std::array<std::string_view, 2> kMaterials = {"metal", "rubber"};
constexpr std::array<std::string_view, 3> kShapes = {"cylinder", "cube", "sphere"};
constexpr std::array<std::string_view, 4> kRelationNames = {"right", "left", "front", "behind"};
constexpr std::array<std::string_view, 5> kExtremeNames = {"rightmost", "leftmost", "frontmost", "rearmost",
                                                           "central"};

template <std::size_t N>
std::optional<std::size_t> find_name(const std::array<std::string_view, N>& names, std::string_view name) {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names.begin());
}

// Signed offset of `other` from `self` along the relation's axis, positive in
// the relation's direction.
double directed_offset(const Object& self, const Object& other, Relation r) {
  switch (r) {
    case Relation::right: return other.position[0] - self.position[0];
    case Relation::left: return self.position[0] - other.position[0];
    case Relation::front: return other.position[1] - self.position[1];
    case Relation::behind: return self.position[1] - other.position[1];
  }
  return 0.0;
}

}  // namespace

std::string padded_index(long long index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06lld", index);
  return buf;
}

std::string_view attribute_name(Attribute a) { return kAttributeNames[static_cast<std::size_t>(a)]; }

std::optional<Attribute> parse_attribute(std::string_view name) {
  if (auto i = find_name(kAttributeNames, name)) return static_cast<Attribute>(*i);
  return std::nullopt;
}

std::span<const std::string_view> value_names(Attribute a) {
  switch (a) {
    case Attribute::size: return kSizes;
    case Attribute::color: return kColors;
    case Attribute::material: return kMaterials;
    case Attribute::shape: return kShapes;
  }
  return {};
}

std::string_view value_name(Attribute a, std::uint8_t value) { return value_names(a)[value]; }

std::optional<std::uint8_t> parse_value(Attribute a, std::string_view name) {
  auto names = value_names(a);
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) return std::nullopt;
  return static_cast<std::uint8_t>(it - names.begin());
}

std::string_view relation_name(Relation r) { return kRelationNames[static_cast<std::size_t>(r)]; }

std::optional<Relation> parse_relation(std::string_view name) {
  if (auto i = find_name(kRelationNames, name)) return static_cast<Relation>(*i);
  return std::nullopt;
}

Relation opposite(Relation r) {
  switch (r) {
    case Relation::right: return Relation::left;
    case Relation::left: return Relation::right;
    case Relation::front: return Relation::behind;
    case Relation::behind: return Relation::front;
  }
  return r;
}

std::string_view extreme_name(Extreme e) { return kExtremeNames[static_cast<std::size_t>(e)]; }

std::optional<Extreme> parse_extreme(std::string_view name) {
  if (auto i = find_name(kExtremeNames, name)) return static_cast<Extreme>(*i);
  return std::nullopt;
}

RelationIndex compute_relations(std::span<const Object> objects) {
  RelationIndex index;
  const std::size_t n = objects.size();
  for (Relation r : kRelations) {
    auto& lists = index[static_cast<std::size_t>(r)];
    lists.assign(n, {});
    for (std::size_t i = 0; i < n; ++i) {
      auto& list = lists[i];
      for (std::size_t j = 0; j < n; ++j) {
        if (i != j && directed_offset(objects[i], objects[j], r) > 0.0) list.push_back(static_cast<int>(j));
      }
      std::sort(list.begin(), list.end(), [&](int a, int b) {
        double da = directed_offset(objects[i], objects[static_cast<std::size_t>(a)], r);
        double db = directed_offset(objects[i], objects[static_cast<std::size_t>(b)], r);
        return da != db ? da < db : a < b;
      });
    }
  }
  return index;
}

Scene make_scene(std::string scene_id, std::vector<Object> objects) {
  for (std::size_t i = 0; i < objects.size(); ++i) objects[i].id = static_cast<int>(i);
  Scene scene{std::move(scene_id), std::move(objects), {}};
  scene.relations = compute_relations(scene.objects);
  return scene;
}

std::optional<int> immediate_neighbor(const Scene& scene, int obj, Relation relation) {
  const auto& list = scene.related(obj, relation);
  if (list.empty()) return std::nullopt;
  return list.front();
}

int extreme_object(const Scene& scene, Extreme extreme) {
  if (scene.objects.empty()) throw std::invalid_argument("extreme_object: empty scene");
  std::array<double, 2> centroid{0.0, 0.0};
  for (const auto& o : scene.objects) {
    centroid[0] += o.position[0];
    centroid[1] += o.position[1];
  }
  centroid[0] /= scene.size();
  centroid[1] /= scene.size();

  auto key = [&](const Object& o) {
    switch (extreme) {
      case Extreme::right: return -o.position[0];
      case Extreme::left: return o.position[0];
      case Extreme::fore: return -o.position[1];
      case Extreme::rear: return o.position[1];
      case Extreme::center: return std::hypot(o.position[0] - centroid[0], o.position[1] - centroid[1]);
    }
    return 0.0;
  };
  int best = 0;
  for (const auto& o : scene.objects) {
    if (key(o) < key(scene.objects[static_cast<std::size_t>(best)])) best = o.id;
  }
  return best;
}

std::array<double, 2> project_to_image(const std::array<double, 3>& position) {
  constexpr double extent = 3.0;
  double px = (position[0] + extent) / (2 * extent) * kImageWidth;
  double py = (position[1] + extent) / (2 * extent) * kImageHeight;
  return {std::clamp(px, 0.0, kImageWidth), std::clamp(py, 0.0, kImageHeight)};
}

Scene synthesize_scene(Rng& rng, int min_objects, int max_objects, const SynthesisLimits& limits) {
  if (min_objects < 1 || min_objects > max_objects) {
    throw std::invalid_argument("synthesize_scene: need 1 <= min_objects <= max_objects");
  }
  const int count = rng.between(min_objects, max_objects);
  std::vector<Object> objects;
  objects.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Object obj;
    for (Attribute a : kAttributes) {
      obj.attributes[static_cast<std::size_t>(a)] = static_cast<std::uint8_t>(rng.index(value_count(a)));
    }
    bool placed = false;
    for (int attempt = 0; attempt < limits.placement_retries && !placed; ++attempt) {
      double x = rng.uniform(-limits.half_extent, limits.half_extent);
      double y = rng.uniform(-limits.half_extent, limits.half_extent);
      placed = std::all_of(objects.begin(), objects.end(), [&](const Object& other) {
        return std::abs(other.position[0] - x) >= limits.min_separation &&
               std::abs(other.position[1] - y) >= limits.min_separation;
      });
      if (placed) {
        double z = obj.value(Attribute::size) == 0 ? 0.7 : 0.35;
        obj.position = {x, y, z};
      }
    }
    if (!placed) {
      throw GenerationError("synthesize_scene: could not place object " + std::to_string(i) + " after " +
                            std::to_string(limits.placement_retries) + " retries");
    }
    obj.pixel = project_to_image(obj.position);
    objects.push_back(obj);
  }
  return make_scene({}, std::move(objects));
}

nlohmann::json scene_to_json(const Scene& scene) {
  nlohmann::json objects = nlohmann::json::array();
  for (const auto& o : scene.objects) {
    nlohmann::json j;
    j["shape"] = value_name(Attribute::shape, o.value(Attribute::shape));
    j["color"] = value_name(Attribute::color, o.value(Attribute::color));
    j["size"] = value_name(Attribute::size, o.value(Attribute::size));
    j["material"] = value_name(Attribute::material, o.value(Attribute::material));
    j["3d_coords"] = o.position;
    if (o.pixel) j["pixel_coords"] = *o.pixel;
    objects.push_back(std::move(j));
  }
  nlohmann::json out;
  out["scene_id"] = scene.scene_id;
  bool numeric = !scene.scene_id.empty() &&
                 std::all_of(scene.scene_id.begin(), scene.scene_id.end(), [](char c) { return c >= '0' && c <= '9'; });
  if (numeric) out["image_index"] = std::stoll(scene.scene_id);
  out["objects"] = std::move(objects);
  return out;
}

nlohmann::json scenes_to_json(std::span<const Scene> scenes) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& s : scenes) list.push_back(scene_to_json(s));
  return nlohmann::json{{"scenes", std::move(list)}};
}

Scene scene_from_json(const nlohmann::json& record, std::size_t record_index) {
  const std::string where = "scene record " + std::to_string(record_index);
  if (!record.is_object() || !record.contains("objects") || !record["objects"].is_array()) {
    throw IoError(where + ": expected an object with an \"objects\" array");
  }
  std::string scene_id;
  if (record.contains("scene_id") && record["scene_id"].is_string()) {
    scene_id = record["scene_id"].get<std::string>();
  } else if (record.contains("image_index") && record["image_index"].is_number_integer()) {
    scene_id = padded_index(record["image_index"].get<long long>());
  } else {
    throw IoError(where + ": missing integer \"image_index\"");
  }

  std::vector<Object> objects;
  std::size_t k = 0;
  for (const auto& o : record["objects"]) {
    const std::string at = where + ", object " + std::to_string(k++);
    Object obj;
    for (Attribute a : kAttributes) {
      const char* key = attribute_name(a).data();
      if (!o.contains(key) || !o[key].is_string()) throw IoError(at + ": missing string \"" + std::string(key) + "\"");
      auto name = o[key].get<std::string>();
      auto v = parse_value(a, name);
      if (!v) throw ValidationError(at + ": " + std::string(key) + " \"" + name + "\" is not a known value");
      obj.attributes[static_cast<std::size_t>(a)] = *v;
    }
    if (!o.contains("3d_coords") || !o["3d_coords"].is_array() || o["3d_coords"].size() != 3) {
      throw IoError(at + ": \"3d_coords\" must hold three numbers");
    }
    try {
      for (std::size_t i = 0; i < 3; ++i) obj.position[i] = o["3d_coords"][i].get<double>();
      if (o.contains("pixel_coords")) {
        const auto& p = o["pixel_coords"];
        if (!p.is_array() || p.size() < 2) throw IoError(at + ": \"pixel_coords\" needs two numbers");
        obj.pixel = std::array<double, 2>{p[0].get<double>(), p[1].get<double>()};
      }
    } catch (const nlohmann::json::exception& e) {
      throw IoError(at + ": " + e.what());
    }
    objects.push_back(obj);
  }
  return make_scene(std::move(scene_id), std::move(objects));
}

std::vector<Scene> parse_scenes(const nlohmann::json& document) {
  if (!document.is_object() || !document.contains("scenes") || !document["scenes"].is_array()) {
    throw IoError("scene file: expected top-level {\"scenes\": [...]}");
  }
  std::vector<Scene> scenes;
  std::size_t i = 0;
  for (const auto& record : document["scenes"]) scenes.push_back(scene_from_json(record, i++));
  return scenes;
}

std::vector<Scene> load_scenes(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scene file " + path.string());
  nlohmann::json document;
  try {
    document = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return parse_scenes(document);
}

}  // namespace dforge
