#pragma once

#include <map>
#include <string>

#include "json.hpp"

namespace dforge {

struct StatsReport {
  long num_images = 0;
  long num_dialogs = 0;
  long num_questions = 0;
  long num_unique_questions = 0;
  long num_unique_answers = 0;
  long vocab_size = 0;  // distinct tokens over captions and questions
  double mean_question_length = 0.0;
  double mean_caption_length = 0.0;
  double mean_coref_distance = 0.0;  // over coref-labeled questions only

  std::map<std::string, long> caption_family;
  std::map<std::string, long> question_category;
  std::map<std::string, long> question_type;
  std::map<std::string, long> answer;
  std::map<int, long> coref_distance;
  std::map<std::string, long> dependency_kind;

  bool operator==(const StatsReport&) const = default;
};

/// Folds over a dataset document. Throws std::invalid_argument on an empty one.
StatsReport compute_stats(const nlohmann::json& dataset);

nlohmann::json report_to_json(const StatsReport& report);
StatsReport report_from_json(const nlohmann::json& j);
std::string render_text(const StatsReport& report);

}  // namespace dforge
