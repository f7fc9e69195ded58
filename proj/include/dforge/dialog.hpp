#pragma once

// Beam search over caption + question sequences for one image.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dforge/grammar.hpp"
#include "dforge/oracle.hpp"
#include "dforge/questioner.hpp"
#include "dforge/scene.hpp"

namespace dforge {

/// Per-dialog ranges for the share of each question category.
struct CategoryShares {
  double count_min = 0.1, count_max = 0.3;
  double exist_min = 0.1, exist_max = 0.3;
  double seek_min = 0.3, seek_max = 0.6;
  double independent_below = 0.2;  // strict
};

/// The shares resolved to question counts for a dialog length.
struct CategoryBounds {
  int count_min = 0, count_max = 0;
  int exist_min = 0, exist_max = 0;
  int seek_min = 0, seek_max = 0;
  int independent_max = 0;
};

CategoryBounds bounds_for(const CategoryShares& shares, int rounds);

struct ScoreWeights {
  double seek = 1.0;
  double count = 0.55;
  double exist = 0.45;
  double new_template = 0.25;
  double distance = 0.5;  // per round of coreference distance beyond the first
  double favored = 0.3;   // seek-attr-sim-early, count-obj-excl-imm
  double jitter = 0.6;  // spread derived from the label sequence only
};

struct GenerationConfig {
  int dialogs_per_image = 5;
  int rounds = 10;
  int beams = 100;
  std::uint64_t seed = 0;
  int captions_per_template = 3;
  int children_per_beam = 6;
  CategoryShares shares;
  ScoreWeights weights;
};

struct Round {
  QuestionCandidate question;
  Answer answer;
  HistoryDependency dependency;
};

struct Dialog {
  std::string scene_id;
  Utterance caption;
  std::vector<Round> rounds;
  double score = 0.0;
};

/// Category tallies of a partial dialog, used for feasibility pruning.
struct Tally {
  int count = 0, exist = 0, seek = 0, independent = 0;
  void add(Category c, bool independent_question);
};

/// True if `tally` after `done` of `total` rounds can still end inside the bounds.
bool feasible(const Tally& tally, int done, int total, const CategoryBounds& bounds);

/// What the beam objective looks at in one appended round.
struct StepFeatures {
  Category category = Category::seek;
  bool new_template = false;
  bool favored = false;  // seek-attr-sim-early, count-obj-excl-imm
  HistoryDependency dependency;
  double jitter_unit = 0.0;  // in [0, 1), a function of the label sequence
};

double step_gain(const StepFeatures& step, const ScoreWeights& weights);
bool favored_family(Family family);

/// Indices kept from a best-first candidate list: the first `width` of them,
/// taking at most `per_parent` children of any one parent beam.
std::vector<std::size_t> select_beams(std::span<const std::size_t> parents, int width, int per_parent);

/// Generates `dialogs_per_image` distinct dialogs. Throws GenerationError when
/// the search cannot produce enough of them.
std::vector<Dialog> generate_dialogs(const Registry& registry, const Scene& scene, const GenerationConfig& config);

/// Replays a dialog from its caption, checking every intermediate questioner
/// state against the scene and every answer against the oracle. Returns the
/// problems found; empty means the dialog is sound.
std::vector<std::string> replay(const Registry& registry, const Dialog& dialog, const Scene& scene);

}  // namespace dforge
