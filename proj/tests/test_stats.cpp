#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "dforge/dataset.hpp"
#include "dforge/stats.hpp"
#include "fixtures.hpp"

using namespace dforge;

namespace {

const Registry& registry() {
  static const Registry r = build_registry();
  return r;
}

nlohmann::json dataset_of(std::vector<SceneRecord> records) {
  return dataset_to_json(GenerationConfig{}, SceneSource{}, records);
}

const nlohmann::json& small_dataset() {
  static const nlohmann::json doc = [] {
    std::vector<SceneRecord> records;
    Rng rng(12);
    for (int i = 0; i < 5; ++i) {
      Scene s = synthesize_scene(rng, 3, 10);
      s.scene_id = padded_index(i);
      records.push_back({s, generate_dialogs(registry(), s, GenerationConfig{})});
    }
    return dataset_of(records);
  }();
  return doc;
}

template <typename M>
long mass(const M& m) {
  long n = 0;
  for (const auto& [k, v] : m) n += v;
  return n;
}

}  // namespace

TEST_CASE("one dialog of ten rounds") {
  Scene s = fixtures::six_objects();
  auto dialogs = generate_dialogs(registry(), s, GenerationConfig{});
  dialogs.resize(1);
  StatsReport r = compute_stats(dataset_of({{s, dialogs}}));
  CHECK(r.num_images == 1);
  CHECK(r.num_dialogs == 1);
  CHECK(r.num_questions == 10);
}

TEST_CASE("histograms and means") {
  StatsReport r = compute_stats(small_dataset());
  CHECK(r.num_questions == 250);
  CHECK(mass(r.question_type) == r.num_questions);
  CHECK(mass(r.question_category) == r.num_questions);
  CHECK(mass(r.answer) == r.num_questions);
  CHECK(mass(r.dependency_kind) == r.num_questions);
  CHECK(mass(r.caption_family) == r.num_dialogs);
  CHECK(mass(r.coref_distance) == r.dependency_kind["coref"]);
  for (const auto& [d, n] : r.coref_distance) {
    CHECK(d >= 1);
    CHECK(d <= 10);
  }

  // Independent recount straight from the document.
  long coref = 0, total = 0, seek = 0;
  for (const auto& rec : small_dataset()["records"]) {
    for (const auto& d : rec["dialogs"]) {
      for (const auto& q : d["rounds"]) {
        if (q["dependency"]["kind"] == "coref") {
          total += q["dependency"]["distance"].get<int>();
          ++coref;
        }
        seek += q["template"].get<std::string>().rfind("seek-", 0) == 0;
      }
    }
  }
  CHECK(r.mean_coref_distance == doctest::Approx(static_cast<double>(total) / static_cast<double>(coref)));
  CHECK(r.question_category["seek"] == seek);
}

TEST_CASE("json round trip") {
  StatsReport r = compute_stats(small_dataset());
  CHECK(report_from_json(report_to_json(r)) == r);
}

TEST_CASE("text report") {
  StatsReport r = compute_stats(small_dataset());
  std::string text = render_text(r);
  for (const auto& [label, n] : r.question_type) CHECK(text.find("  " + label + " ") != std::string::npos);

  // Shares of the question-type block add up to 100% within rounding.
  std::istringstream in(text);
  std::string line;
  bool in_block = false;
  double sum = 0.0;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line == "question type") {
      in_block = true;
      continue;
    }
    if (in_block && line.empty()) break;
    if (in_block) {
      sum += std::stod(line.substr(line.rfind(' ') + 1));
      ++rows;
    }
  }
  CHECK(rows == static_cast<int>(r.question_type.size()));
  CHECK(std::abs(sum - 100.0) <= 0.005 * rows + 1e-9);
}

TEST_CASE("empty dataset") {
  CHECK_THROWS_AS(compute_stats(dataset_of({})), std::invalid_argument);
}
