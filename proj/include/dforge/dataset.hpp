#pragma once

// Dataset file format and its validator.

#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "dforge/dialog.hpp"

namespace dforge {

inline constexpr std::string_view kDatasetVersion = "dialog-forge/1";

struct SceneRecord {
  Scene scene;
  std::vector<Dialog> dialogs;
};

/// Where the scenes came from, echoed so a file can be regenerated.
struct SceneSource {
  std::string scenes_path;  // empty when synthesized
  int synthesized = 0;
  int min_objects = 3;
  int max_objects = 10;
};

nlohmann::json config_to_json(const GenerationConfig& config, const SceneSource& source);
GenerationConfig config_from_json(const nlohmann::json& j);

nlohmann::json dialog_to_json(const Dialog& dialog);

/// Records must already be in scene_id order.
nlohmann::json dataset_to_json(const GenerationConfig& config, const SceneSource& source,
                               std::span<const SceneRecord> records);

nlohmann::json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

struct Violation {
  std::string kind;   // schema, oracle, vocabulary, constraint, annotation
  std::string where;  // "scene 000012 dialog 3 round 7"
  std::string message;
};

/// Re-answers every question against its embedded scene and re-checks the
/// per-dialog constraints and annotations.
std::vector<Violation> validate_dataset(const nlohmann::json& dataset, const Registry& registry);

}  // namespace dforge
