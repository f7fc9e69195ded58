#pragma once

// Attention grounding evaluation: NDCG of ranked cells/tokens against the
// dataset's referents and referring spans.

#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "dforge/rng.hpp"
#include "dforge/scene.hpp"

namespace dforge {

inline constexpr int kGridSide = 14;
inline constexpr int kGridCells = kGridSide * kGridSide;

/// Binary gains listed in predicted rank order; discount 1/log2(rank+1).
/// Throws std::domain_error when nothing is relevant.
double ndcg(std::span<const int> relevance_by_rank);

/// Item indices by descending weight; ties keep index order.
std::vector<int> rank_by_weight(std::span<const double> weights);

/// NDCG of ranking `weights` when the items in `relevant` are the hits.
double ndcg_of_weights(std::span<const double> weights, std::span<const int> relevant);

int grid_cell(const std::array<double, 2>& pixel);
/// The referent's cell and its 3x3 neighborhood, clipped to the grid, sorted.
std::vector<int> visual_ground_truth(const Object& object);

struct AttentionRecord {
  std::string scene_id;
  int dialog = 0;
  int round = 0;  // 1-based
  std::vector<double> visual;
  std::vector<double> textual;
};

struct GroundTruthRound {
  std::string scene_id;
  int dialog = 0;
  int round = 0;
  std::string template_label;
  std::vector<int> cells;   // empty when the round has no referent
  std::vector<int> tokens;  // empty when the round has no referring span
  int num_tokens = 0;
};

/// Coref-labeled rounds of a dataset, in file order.
std::vector<GroundTruthRound> grounding_targets(const nlohmann::json& dataset);

std::vector<AttentionRecord> parse_attention_dump(std::string_view jsonl);
std::string attention_dump_to_jsonl(std::span<const AttentionRecord> records);

/// Attention equal to the ground-truth indicator, or uniform random weights.
std::vector<AttentionRecord> ideal_attention(std::span<const GroundTruthRound> targets);
std::vector<AttentionRecord> random_attention(std::span<const GroundTruthRound> targets, Rng& rng);

struct GroundingScore {
  double visual_sum = 0.0;
  long visual_n = 0;
  double textual_sum = 0.0;
  long textual_n = 0;
  double visual_mean() const { return visual_n ? visual_sum / static_cast<double>(visual_n) : 0.0; }
  double textual_mean() const { return textual_n ? textual_sum / static_cast<double>(textual_n) : 0.0; }
};

/// Per template label. Throws AlignmentError naming the first record that does
/// not line up with the dataset's coref rounds.
std::map<std::string, GroundingScore> evaluate_grounding(std::span<const AttentionRecord> dumps,
                                                         std::span<const GroundTruthRound> targets);

nlohmann::json grounding_report_to_json(const std::map<std::string, GroundingScore>& report);

}  // namespace dforge
