#include "dforge/dialog.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "dforge/errors.hpp"

namespace dforge {
namespace {

struct History {
  Round round;
  std::shared_ptr<const History> parent;
};

struct Beam {
  std::size_t root = 0;
  PartialScene state;
  std::shared_ptr<const History> history;
  Tally tally;
  std::uint64_t used = 0;  // bit per template index
  std::vector<std::uint8_t> labels;  // alphabetical rank of each round's template label
  std::uint64_t label_hash = 0;
  double score = 0.0;
  std::uint64_t seed = 0;
};

struct Candidate {
  std::size_t parent = 0;
  QuestionCandidate question;
  HistoryDependency dependency;
  Tally tally;
  std::uint8_t label = 0;
  double score = 0.0;
  std::uint64_t seed = 0;
};

double category_weight(Category c, const ScoreWeights& w) {
  switch (c) {
    case Category::count: return w.count;
    case Category::exist: return w.exist;
    case Category::seek: return w.seek;
    case Category::caption: break;
  }
  return 0.0;
}

std::vector<Round> unwind(const std::shared_ptr<const History>& tail) {
  std::vector<Round> rounds;
  for (const History* h = tail.get(); h; h = h->parent.get()) rounds.push_back(h->round);
  std::reverse(rounds.begin(), rounds.end());
  return rounds;
}

std::string dialog_text(const Dialog& d) {
  std::string s = d.caption.text;
  for (const auto& r : d.rounds) s += "\n" + r.question.utterance.text + "\t" + r.answer.token;
  return s;
}

}  // namespace

bool favored_family(Family f) { return f == Family::seek_attr_sim_early || f == Family::obj_excl_imm; }

double step_gain(const StepFeatures& s, const ScoreWeights& w) {
  double gain = category_weight(s.category, w);
  if (s.new_template) gain += w.new_template;
  if (s.dependency.kind == HistoryDependency::Kind::coref) gain += w.distance * (s.dependency.distance - 1);
  if (s.favored) gain += w.favored;
  return gain + w.jitter * s.jitter_unit;
}

std::vector<std::size_t> select_beams(std::span<const std::size_t> parents, int width, int per_parent) {
  std::vector<std::size_t> kept;
  std::vector<int> children;
  for (std::size_t i = 0; i < parents.size() && static_cast<int>(kept.size()) < width; ++i) {
    if (parents[i] >= children.size()) children.resize(parents[i] + 1, 0);
    if (children[parents[i]] >= per_parent) continue;
    ++children[parents[i]];
    kept.push_back(i);
  }
  return kept;
}

void Tally::add(Category c, bool independent_question) {
  switch (c) {
    case Category::count: ++count; break;
    case Category::exist: ++exist; break;
    case Category::seek: ++seek; break;
    case Category::caption: break;
  }
  if (independent_question) ++independent;
}

CategoryBounds bounds_for(const CategoryShares& s, int rounds) {
  const double n = rounds;
  auto lo = [&](double share) { return static_cast<int>(std::ceil(share * n - 1e-9)); };
  auto hi = [&](double share) { return static_cast<int>(std::floor(share * n + 1e-9)); };
  CategoryBounds b;
  b.count_min = lo(s.count_min);
  b.count_max = hi(s.count_max);
  b.exist_min = lo(s.exist_min);
  b.exist_max = hi(s.exist_max);
  b.seek_min = lo(s.seek_min);
  b.seek_max = hi(s.seek_max);
  b.independent_max = lo(s.independent_below) - 1;
  return b;
}

bool feasible(const Tally& t, int done, int total, const CategoryBounds& b) {
  if (t.count > b.count_max || t.exist > b.exist_max || t.seek > b.seek_max) return false;
  if (t.independent > b.independent_max) return false;
  int missing = std::max(0, b.count_min - t.count) + std::max(0, b.exist_min - t.exist) +
                std::max(0, b.seek_min - t.seek);
  int room = (b.count_max - t.count) + (b.exist_max - t.exist) + (b.seek_max - t.seek);
  int left = total - done;
  return missing <= left && left <= room;
}

std::vector<Dialog> generate_dialogs(const Registry& registry, const Scene& scene, const GenerationConfig& config) {
  const std::uint64_t scene_seed = combine_seed(config.seed, scene.scene_id);
  const auto& w = config.weights;
  const CategoryBounds bounds = bounds_for(config.shares, config.rounds);

  std::vector<Utterance> captions;
  std::vector<Beam> beams;
  std::set<std::string> caption_texts;
  for (std::size_t idx : registry.captions()) {
    for (int k = 0; k < config.captions_per_template; ++k) {
      std::uint64_t seed = combine_seed(scene_seed, registry.at(idx).label + "#" + std::to_string(k));
      Rng rng(seed);
      Utterance caption;
      try {
        caption = instantiate_caption(registry, idx, scene, rng);
      } catch (const GenerationAbort&) {
        continue;
      }
      if (!caption_texts.insert(caption.text).second) continue;
      Beam b;
      b.root = captions.size();
      b.state = apply_caption(caption);
      b.seed = seed;
      captions.push_back(std::move(caption));
      beams.push_back(std::move(b));
    }
  }

  const auto questions = registry.questions();
  std::vector<std::uint8_t> rank(registry.size());
  {
    std::vector<std::size_t> order(registry.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return registry.at(a).label < registry.at(b).label; });
    for (std::size_t i = 0; i < order.size(); ++i) rank[order[i]] = static_cast<std::uint8_t>(i);
  }
  for (int t = 1; t <= config.rounds; ++t) {
    std::vector<Candidate> candidates;
    for (std::size_t p = 0; p < beams.size(); ++p) {
      const Beam& beam = beams[p];
      for (std::size_t idx : questions) {
        Candidate c;
        c.parent = p;
        c.seed = combine_seed(beam.seed, static_cast<std::uint64_t>(t) << 8 | idx);
        Rng rng(c.seed);
        try {
          c.question = plan_question(registry, idx, beam.state, rng);
        } catch (const GenerationAbort&) {
          continue;
        }
        const Template& tmpl = registry.at(idx);
        c.tally = beam.tally;
        c.tally.add(tmpl.category, tmpl.independent);
        if (!feasible(c.tally, t, config.rounds, bounds)) continue;
        c.dependency = label_dependency(c.question, beam.state);
        c.label = rank[idx];
        StepFeatures f;
        f.category = tmpl.category;
        f.new_template = !(beam.used >> idx & 1);
        f.favored = favored_family(tmpl.family);
        f.dependency = c.dependency;
        // Pseudo-random spread that depends only on the label sequence.
        f.jitter_unit = Rng(combine_seed(beam.label_hash, c.label)).unit();
        c.score = beam.score + step_gain(f, w);
        candidates.push_back(std::move(c));
      }
    }
    // Ties: lexicographic on the label sequence, then parent order.
    std::stable_sort(candidates.begin(), candidates.end(), [&](const Candidate& a, const Candidate& b) {
      if (a.score != b.score) return a.score > b.score;
      const auto& la = beams[a.parent].labels;
      const auto& lb = beams[b.parent].labels;
      if (la != lb) return la < lb;
      return a.label < b.label;
    });

    std::vector<std::size_t> parents;
    parents.reserve(candidates.size());
    for (const auto& c : candidates) parents.push_back(c.parent);
    std::vector<Beam> next;
    for (std::size_t k : select_beams(parents, config.beams, config.children_per_beam)) {
      Candidate& c = candidates[k];
      const Beam& parent = beams[c.parent];
      realize_question(registry, c.question);
      Round round;
      round.answer = answer(c.question, scene);
      round.dependency = c.dependency;
      Beam b;
      b.root = parent.root;
      b.state = apply_qa(parent.state, c.question, round.answer, t);
      round.question = std::move(c.question);
      b.history = std::make_shared<const History>(History{std::move(round), parent.history});
      b.tally = c.tally;
      b.used = parent.used | (std::uint64_t{1} << b.history->round.question.template_index);
      b.labels = parent.labels;
      b.labels.push_back(c.label);
      b.label_hash = combine_seed(parent.label_hash, c.label);
      b.score = c.score;
      b.seed = c.seed;
      next.push_back(std::move(b));
    }
    beams = std::move(next);
    if (beams.empty()) break;
  }

  std::vector<Dialog> out;
  std::set<std::string> seen;
  for (const auto& b : beams) {
    if (static_cast<int>(out.size()) >= config.dialogs_per_image) break;
    Dialog d;
    d.scene_id = scene.scene_id;
    d.caption = captions[b.root];
    d.rounds = unwind(b.history);
    d.score = b.score;
    if (static_cast<int>(d.rounds.size()) != config.rounds) continue;
    if (!seen.insert(dialog_text(d)).second) continue;
    out.push_back(std::move(d));
  }
  if (static_cast<int>(out.size()) < config.dialogs_per_image) {
    throw GenerationError("scene " + scene.scene_id + ": only " + std::to_string(out.size()) + " of " +
                          std::to_string(config.dialogs_per_image) + " dialogs could be generated");
  }
  return out;
}

std::vector<std::string> replay(const Registry& registry, const Dialog& dialog, const Scene& scene) {
  std::vector<std::string> problems;
  auto note = [&](int round, const std::string& what) {
    problems.push_back("round " + std::to_string(round) + ": " + what);
  };
  try {
    PartialScene state = apply_caption(dialog.caption);
    for (const auto& v : soundness_violations(state, scene)) note(0, v);
    int t = 0;
    for (const auto& r : dialog.rounds) {
      ++t;
      if (registry.at(r.question.template_index).label != r.question.utterance.template_label) {
        note(t, "template label does not match the template");
      }
      if (is_redundant(r.question, state)) note(t, "question was already answered by the history");
      Answer truth = answer(r.question, scene);
      if (truth != r.answer) note(t, "answer " + r.answer.token + " should be " + truth.token);
      if (label_dependency(r.question, state) != r.dependency) note(t, "history dependency mislabeled");
      state = apply_qa(state, r.question, r.answer, t);
      for (const auto& v : soundness_violations(state, scene)) note(t, v);
    }
  } catch (const ConsistencyError& e) {
    problems.push_back(std::string("inconsistent history: ") + e.what());
  }
  return problems;
}

}  // namespace dforge
