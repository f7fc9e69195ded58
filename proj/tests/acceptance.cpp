// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance <path to dialog-forge> <work dir>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

#include "dforge/dataset.hpp"
#include "dforge/errors.hpp"
#include "dforge/grounding.hpp"
#include "naive_eval.hpp"

namespace fs = std::filesystem;
using namespace dforge;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::printf("[%s] %2d %-28s %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Runs a command, returning its exit status and captured stdout.
std::pair<int, std::string> run(const std::string& cmd) {
  std::string out;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return {-1, out};
  std::array<char, 4096> buf;
  while (std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) out.append(buf.data(), n);
  int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

// Lowercase words; every punctuation mark is its own token.
std::vector<std::string> words(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    unsigned char c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
      continue;
    }
    if (!cur.empty()) out.push_back(cur), cur.clear();
    if (!std::isspace(c)) out.emplace_back(1, ch);
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

const std::set<std::string> kVocabulary = {
    "yes",  "no",     "0",    "1",     "2",      "3",      "4",       "5",    "6",     "7",
    "8",    "9",      "10",   "cube",  "sphere", "cylinder", "blue",  "brown", "cyan", "gray",
    "green", "purple", "red", "yellow", "large", "small",  "metal",   "rubber", "none"};

std::string category_of(const std::string& label) { return label.substr(0, label.find('-')); }

}  // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::cerr << "usage: acceptance <dialog-forge> <work dir>\n";
    return 2;
  }
  const std::string cli = argv[1];
  const fs::path work = argv[2];
  fs::create_directories(work);
  const fs::path first = work / "run1.json";
  const fs::path second = work / "run2.json";
  const Registry registry = build_registry();

  // 1. Scale and byte-identical rerun.
  const std::string gen = cli + " generate --synthesize 500 --seed 1 -o ";
  auto t0 = std::chrono::steady_clock::now();
  int rc1 = run(gen + first.string()).first;
  double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  int rc2 = run(gen + second.string()).first;
  const std::string bytes = slurp(first);
  const bool identical = rc1 == 0 && rc2 == 0 && bytes == slurp(second);
  nlohmann::json doc = nlohmann::json::parse(bytes);
  long dialogs = 0, rounds = 0;
  bool ten_each = true;
  for (const auto& rec : doc["records"]) {
    for (const auto& d : rec["dialogs"]) {
      ++dialogs;
      rounds += static_cast<long>(d["rounds"].size());
      ten_each = ten_each && d["rounds"].size() == 10;
    }
  }
  report(1, "scale and determinism", identical && dialogs == 2500 && rounds == 25000 && ten_each && seconds < 300,
         std::to_string(dialogs) + " dialogs, " + std::to_string(rounds) + " QA, " + fmt("%.1f s", seconds) +
             (identical ? ", rerun identical" : ", rerun DIFFERS"));

  // Per-round facts gathered once.
  std::map<std::string, long> category;
  std::map<int, long> coref_hist;
  std::map<std::string, long> answers;
  std::set<std::string> vocab;
  long coref_sum = 0, coref_n = 0, q_tokens = 0, out_of_vocab = 0, bad_dialogs = 0;
  for (const auto& rec : doc["records"]) {
    for (const auto& d : rec["dialogs"]) {
      for (const auto& w : words(d["caption"]["text"].get<std::string>())) vocab.insert(w);
      std::map<std::string, int> tally;
      int independent = 0;
      for (const auto& r : d["rounds"]) {
        const std::string label = r["template"].get<std::string>();
        ++tally[category_of(label)];
        ++category[category_of(label)];
        independent += registry.at(registry.find(label).value()).independent;
        if (r["dependency"]["kind"] == "coref") {
          int dist = r["dependency"]["distance"].get<int>();
          ++coref_hist[dist];
          coref_sum += dist;
          ++coref_n;
        }
        const std::string a = r["answer"].get<std::string>();
        ++answers[a];
        out_of_vocab += kVocabulary.count(a) == 0;
        auto toks = words(r["question"].get<std::string>());
        q_tokens += static_cast<long>(toks.size());
        vocab.insert(toks.begin(), toks.end());
      }
      const double n = static_cast<double>(d["rounds"].size());
      auto within = [&](const char* c, double lo, double hi) {
        double share = tally[c] / n;
        return share >= lo - 1e-12 && share <= hi + 1e-12;
      };
      bool ok = within("count", 0.1, 0.3) && within("exist", 0.1, 0.3) && within("seek", 0.3, 0.6) &&
                independent / n < 0.2;
      bad_dialogs += !ok;
    }
  }

  // 2. Per-dialog category ranges.
  report(2, "constraint satisfaction", dialogs > 0 && bad_dialogs == 0,
         std::to_string(dialogs - bad_dialogs) + "/" + std::to_string(dialogs) + " dialogs within ranges");

  // 3. Category mix.
  {
    const double total = static_cast<double>(rounds);
    double seek = category["seek"] / total, count = category["count"] / total, exist = category["exist"] / total;
    bool ok = std::abs(seek - 0.60) <= 0.10 && std::abs(count - 0.23) <= 0.10 && std::abs(exist - 0.17) <= 0.10;
    report(3, "category mix", ok,
           "seek " + fmt("%.3f", seek) + ", count " + fmt("%.3f", count) + ", exist " + fmt("%.3f", exist) +
               " (targets .60/.23/.17 +-.10)");
  }

  // 4. Coreference distances.
  {
    bool support = true;
    for (int d = 1; d <= 5; ++d) support = support && coref_hist[d] > 0;
    double mean = coref_n ? static_cast<double>(coref_sum) / static_cast<double>(coref_n) : 0.0;
    std::string hist;
    for (const auto& [d, n] : coref_hist) hist += (hist.empty() ? "" : " ") + std::to_string(d) + ":" + std::to_string(n);
    report(4, "coreference distances", support && mean >= 2.2 && mean <= 4.2,
           "mean " + fmt("%.3f", mean) + " in [2.2, 4.2]; support " + hist);
  }

  // 5. Answer vocabulary.
  report(5, "answer vocabulary", out_of_vocab == 0 && answers.size() >= 25,
         std::to_string(answers.size()) + " distinct answers, " + std::to_string(out_of_vocab) + " outside the 29");

  // 6. Question length.
  {
    double mean = static_cast<double>(q_tokens) / static_cast<double>(rounds);
    report(6, "question length", mean >= 9.0 && mean <= 12.5, "mean " + fmt("%.3f", mean) + " tokens in [9.0, 12.5]");
  }

  // 7. Vocabulary size.
  report(7, "vocabulary size", vocab.size() <= 160, std::to_string(vocab.size()) + " distinct tokens (<= 160)");

  // 8. Naive evaluator against every emitted answer.
  {
    long agree = 0, total = 0;
    std::size_t idx = 0;
    for (const auto& rec : doc["records"]) {
      Scene scene = scene_from_json(rec["scene"], idx++);
      for (const auto& d : rec["dialogs"]) {
        for (const auto& r : d["rounds"]) {
          ++total;
          agree += naive::answer(program_from_json(r["program"]), scene) == r["answer"].get<std::string>();
        }
      }
    }
    report(8, "oracle equivalence", total == 25000 && agree == total,
           std::to_string(agree) + "/" + std::to_string(total) + " answers agree");
  }

  // 9. Questioner soundness, replaying regenerated dialogs against the scenes.
  {
    GenerationConfig config = config_from_json(doc["config"]);
    long checked = 0, unsound = 0;
    std::string first_problem;
    std::vector<SceneRecord> regenerated;
    std::size_t idx = 0;
    for (const auto& rec : doc["records"]) {
      Scene scene = scene_from_json(rec["scene"], idx++);
      auto ds = generate_dialogs(registry, scene, config);
      for (const auto& d : ds) {
        auto problems = replay(registry, d, scene);
        ++checked;
        if (!problems.empty()) {
          ++unsound;
          if (first_problem.empty()) first_problem = scene.scene_id + " " + problems.front();
        }
      }
      regenerated.push_back({scene, std::move(ds)});
    }
    SceneSource source;
    source.synthesized = doc["config"]["source"]["synthesize"].get<int>();
    source.min_objects = doc["config"]["source"]["min_objects"].get<int>();
    source.max_objects = doc["config"]["source"]["max_objects"].get<int>();
    bool same = dataset_to_json(config, source, regenerated).dump() + "\n" == bytes;
    report(9, "questioner soundness", unsound == 0 && checked == 2500 && same,
           std::to_string(checked) + " dialogs replayed, " + std::to_string(unsound) + " unsound" +
               (same ? ", in-process regeneration matches the file" : ", in-process regeneration DIFFERS") +
               (first_problem.empty() ? "" : "; " + first_problem));
  }

  // 10. Mutation sensitivity through the validate command.
  {
    auto [clean_rc, clean_out] = run(cli + " validate " + first.string());
    bool ok = clean_rc == 0 && clean_out.find("0 violations") != std::string::npos;
    Rng rng(10);
    const std::vector<std::string> tokens(kVocabulary.begin(), kVocabulary.end());
    const int trials = 12;
    int exact = 0;
    for (int t = 0; t < trials; ++t) {
      nlohmann::json mutated = doc;
      auto& rec = mutated["records"][rng.index(mutated["records"].size())];
      auto& round = rec["dialogs"][rng.index(5)]["rounds"][rng.index(10)];
      const std::string old = round["answer"].get<std::string>();
      std::string flipped = old;
      while (flipped == old) flipped = tokens[rng.index(tokens.size())];
      round["answer"] = flipped;
      const fs::path path = work / "mutated.json";
      std::ofstream(path, std::ios::binary) << mutated.dump() << "\n";
      auto [rc, out] = run(cli + " validate " + path.string());
      int lines = 0, oracle = 0;
      std::istringstream in(out);
      for (std::string line; std::getline(in, line);) {
        if (line.find('\t') == std::string::npos) continue;
        ++lines;
        oracle += line.rfind("oracle\t", 0) == 0;
      }
      exact += rc != 0 && lines == 1 && oracle == 1 && out.find("1 violation\n") != std::string::npos;
    }
    report(10, "mutation sensitivity", ok && exact == trials,
           std::string(ok ? "clean file passes; " : "clean file FAILS; ") + std::to_string(exact) + "/" +
               std::to_string(trials) + " single flips give exactly one oracle violation");
  }

  // 11. NDCG properties.
  {
    auto targets = grounding_targets(doc);
    auto report_ideal = evaluate_grounding(ideal_attention(targets), targets);
    bool ideal = !report_ideal.empty();
    for (const auto& [label, s] : report_ideal) {
      ideal = ideal && (!s.visual_n || s.visual_mean() == 1.0) && (!s.textual_n || s.textual_mean() == 1.0);
    }
    std::vector<int> top(kGridCells, 0);
    std::fill(top.begin(), top.begin() + 9, 1);
    ideal = ideal && ndcg(top) == 1.0;

    Rng rng(11);
    std::vector<int> cells(kGridCells);
    std::iota(cells.begin(), cells.end(), 0);
    double sum = 0.0;
    const int trials = 10000;
    for (int t = 0; t < trials; ++t) {
      rng.shuffle(cells);
      std::vector<int> by_rank(kGridCells);
      for (int r = 0; r < kGridCells; ++r) by_rank[static_cast<std::size_t>(r)] = cells[static_cast<std::size_t>(r)] < 9;
      sum += ndcg(by_rank);
    }
    double mean = sum / trials;
    report(11, "ndcg properties", ideal && std::abs(mean - 0.30) <= 0.05,
           std::string(ideal ? "ideal = 1.0" : "ideal != 1.0") + "; random 9/196 over 10000 trials = " +
               fmt("%.4f", mean) + " (target 0.30 +-0.05)");
  }

  // 12. Interpreter against the naive evaluator on random programs.
  {
    Rng rng(12);
    int agree = 0;
    const int total = 1000;
    for (int i = 0; i < total; ++i) {
      Scene scene = synthesize_scene(rng, 1, 10);
      Program p = naive::random_program(rng, scene);
      FullWorld world(scene);
      bool ok = true;
      for (EvalMode mode : {EvalMode::answer, EvalMode::generate}) {
        naive::Outcome expected = naive::evaluate(p, scene, mode == EvalMode::generate);
        std::vector<std::string> got;
        bool aborted = false;
        try {
          for (const auto& v : run_program(p, {world, nullptr, mode}).outputs) got.push_back(naive::render(v));
        } catch (const GenerationAbort&) {
          aborted = true;
        }
        ok = ok && aborted == expected.aborted && (aborted || got == expected.steps);
      }
      agree += ok;
    }
    report(12, "interpreter equivalence", agree == total,
           std::to_string(agree) + "/" + std::to_string(total) + " random programs agree");
  }

  std::printf("%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
