#include "dforge/grounding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "dforge/errors.hpp"
#include "dforge/grammar.hpp"

namespace dforge {

double ndcg(std::span<const int> relevance_by_rank) {
  double dcg = 0.0;
  long relevant = 0;
  for (std::size_t i = 0; i < relevance_by_rank.size(); ++i) {
    if (relevance_by_rank[i]) {
      dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
      ++relevant;
    }
  }
  if (relevant == 0) throw std::domain_error("ndcg: no relevant items");
  double ideal = 0.0;
  for (long i = 0; i < relevant; ++i) ideal += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  return dcg / ideal;
}

std::vector<int> rank_by_weight(std::span<const double> weights) {
  std::vector<int> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return weights[static_cast<std::size_t>(a)] > weights[static_cast<std::size_t>(b)];
  });
  return order;
}

double ndcg_of_weights(std::span<const double> weights, std::span<const int> relevant) {
  std::vector<int> hits(weights.size(), 0);
  for (int r : relevant) {
    if (r < 0 || static_cast<std::size_t>(r) >= weights.size()) throw std::out_of_range("relevant item outside the map");
    hits[static_cast<std::size_t>(r)] = 1;
  }
  std::vector<int> by_rank;
  by_rank.reserve(weights.size());
  for (int i : rank_by_weight(weights)) by_rank.push_back(hits[static_cast<std::size_t>(i)]);
  return ndcg(by_rank);
}

int grid_cell(const std::array<double, 2>& pixel) {
  auto index = [](double v, double extent) {
    int k = static_cast<int>(std::floor(v / extent * kGridSide));
    return std::clamp(k, 0, kGridSide - 1);
  };
  return index(pixel[1], kImageHeight) * kGridSide + index(pixel[0], kImageWidth);
}

std::vector<int> visual_ground_truth(const Object& object) {
  int cell = grid_cell(object.pixel ? *object.pixel : project_to_image(object.position));
  int row = cell / kGridSide;
  int col = cell % kGridSide;
  std::vector<int> out;
  for (int r = row - 1; r <= row + 1; ++r) {
    for (int c = col - 1; c <= col + 1; ++c) {
      if (r >= 0 && r < kGridSide && c >= 0 && c < kGridSide) out.push_back(r * kGridSide + c);
    }
  }
  return out;
}

std::vector<GroundTruthRound> grounding_targets(const nlohmann::json& dataset) {
  std::vector<GroundTruthRound> out;
  for (const auto& record : dataset.at("records")) {
    Scene scene = scene_from_json(record.at("scene"), out.size());
    int k = 0;
    for (const auto& dialog : record.at("dialogs")) {
      int t = 0;
      for (const auto& round : dialog.at("rounds")) {
        ++t;
        if (round.at("dependency").at("kind") != "coref") continue;
        GroundTruthRound g;
        g.scene_id = record.at("scene_id").get<std::string>();
        g.dialog = k;
        g.round = t;
        g.template_label = round.at("template").get<std::string>();
        g.num_tokens = static_cast<int>(tokenize(round.at("question").get<std::string>()).size());
        const auto& refs = round.at("referents");
        if (!refs.empty()) g.cells = visual_ground_truth(scene.objects.at(refs[0].get<std::size_t>()));
        for (const auto& span : round.at("referring_spans")) {
          for (int i = span.at("begin").get<int>(); i < span.at("end").get<int>(); ++i) g.tokens.push_back(i);
        }
        out.push_back(std::move(g));
      }
      ++k;
    }
  }
  return out;
}

std::vector<AttentionRecord> parse_attention_dump(std::string_view jsonl) {
  std::vector<AttentionRecord> out;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      AttentionRecord r;
      r.scene_id = j.at("scene_id").get<std::string>();
      r.dialog = j.at("dialog").get<int>();
      r.round = j.at("round").get<int>();
      r.visual = j.at("visual").get<std::vector<double>>();
      r.textual = j.at("textual").get<std::vector<double>>();
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw IoError("attention dump line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

std::string attention_dump_to_jsonl(std::span<const AttentionRecord> records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::json j{{"scene_id", r.scene_id},
                     {"dialog", r.dialog},
                     {"round", r.round},
                     {"visual", r.visual},
                     {"textual", r.textual}};
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<AttentionRecord> ideal_attention(std::span<const GroundTruthRound> targets) {
  std::vector<AttentionRecord> out;
  for (const auto& t : targets) {
    AttentionRecord r{t.scene_id, t.dialog, t.round, std::vector<double>(kGridCells, 0.0),
                      std::vector<double>(static_cast<std::size_t>(t.num_tokens), 0.0)};
    for (int c : t.cells) r.visual[static_cast<std::size_t>(c)] = 1.0;
    for (int i : t.tokens) r.textual[static_cast<std::size_t>(i)] = 1.0;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<AttentionRecord> random_attention(std::span<const GroundTruthRound> targets, Rng& rng) {
  std::vector<AttentionRecord> out;
  for (const auto& t : targets) {
    AttentionRecord r{t.scene_id, t.dialog, t.round, std::vector<double>(kGridCells),
                      std::vector<double>(static_cast<std::size_t>(t.num_tokens))};
    for (auto& v : r.visual) v = rng.unit();
    for (auto& v : r.textual) v = rng.unit();
    out.push_back(std::move(r));
  }
  return out;
}

std::map<std::string, GroundingScore> evaluate_grounding(std::span<const AttentionRecord> dumps,
                                                         std::span<const GroundTruthRound> targets) {
  for (std::size_t i = 0; i < std::max(dumps.size(), targets.size()); ++i) {
    if (i >= dumps.size() || i >= targets.size()) {
      throw AlignmentError("attention record " + std::to_string(i) + ": dump has " + std::to_string(dumps.size()) +
                           " records, dataset has " + std::to_string(targets.size()) + " coref rounds");
    }
    const auto& d = dumps[i];
    const auto& t = targets[i];
    if (d.scene_id != t.scene_id || d.dialog != t.dialog || d.round != t.round) {
      throw AlignmentError("attention record " + std::to_string(i) + " is for scene " + d.scene_id + " dialog " +
                           std::to_string(d.dialog) + " round " + std::to_string(d.round) + ", expected scene " +
                           t.scene_id + " dialog " + std::to_string(t.dialog) + " round " + std::to_string(t.round));
    }
    if (d.visual.size() != static_cast<std::size_t>(kGridCells) ||
        d.textual.size() != static_cast<std::size_t>(t.num_tokens)) {
      throw AlignmentError("attention record " + std::to_string(i) + ": map sizes do not match the question");
    }
    for (double v : d.visual) {
      if (!std::isfinite(v)) throw AlignmentError("attention record " + std::to_string(i) + ": non-finite weight");
    }
    for (double v : d.textual) {
      if (!std::isfinite(v)) throw AlignmentError("attention record " + std::to_string(i) + ": non-finite weight");
    }
  }
  std::map<std::string, GroundingScore> report;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    auto& score = report[targets[i].template_label];
    if (!targets[i].cells.empty()) {
      score.visual_sum += ndcg_of_weights(dumps[i].visual, targets[i].cells);
      ++score.visual_n;
    }
    if (!targets[i].tokens.empty()) {
      score.textual_sum += ndcg_of_weights(dumps[i].textual, targets[i].tokens);
      ++score.textual_n;
    }
  }
  return report;
}

nlohmann::json grounding_report_to_json(const std::map<std::string, GroundingScore>& report) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [label, s] : report) {
    nlohmann::json j{{"visual_questions", s.visual_n}, {"textual_questions", s.textual_n}};
    j["visual_ndcg"] = s.visual_n ? nlohmann::json(s.visual_mean()) : nlohmann::json(nullptr);
    j["textual_ndcg"] = s.textual_n ? nlohmann::json(s.textual_mean()) : nlohmann::json(nullptr);
    out[label] = std::move(j);
  }
  return out;
}

}  // namespace dforge
