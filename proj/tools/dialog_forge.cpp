// dialog-forge: scene synthesis, dialog generation, validation, statistics
// and grounding evaluation from the command line.

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <thread>

#include "CLI11.hpp"

#include "dforge/dataset.hpp"
#include "dforge/errors.hpp"
#include "dforge/grounding.hpp"
#include "dforge/stats.hpp"

namespace {

using namespace dforge;

std::uint64_t default_seed() {
  if (const char* env = std::getenv("DIALOG_FORGE_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw CLI::ValidationError("DIALOG_FORGE_SEED", "not an unsigned integer");
    }
  }
  return 0;
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_text_file(path, text);
  }
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<Scene> synthesize_many(int count, std::uint64_t seed, int min_objects, int max_objects) {
  std::vector<Scene> scenes;
  scenes.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Rng rng(combine_seed(seed, "scene#" + std::to_string(i)));
    Scene s = synthesize_scene(rng, min_objects, max_objects);
    s.scene_id = padded_index(i);
    scenes.push_back(std::move(s));
  }
  return scenes;
}

struct GenerateOptions {
  std::string scenes_path;
  int synthesize = 0;
  int min_objects = 3;
  int max_objects = 10;
  GenerationConfig config;
  std::optional<std::uint64_t> seed;
  int workers = 1;
  std::string shard;
  std::string output;
};

int run_generate(const GenerateOptions& opt) {
  GenerationConfig config = opt.config;
  config.seed = opt.seed ? *opt.seed : default_seed();
  SceneSource source{opt.scenes_path, opt.synthesize, opt.min_objects, opt.max_objects};

  std::vector<Scene> scenes = opt.scenes_path.empty()
                                  ? synthesize_many(opt.synthesize, config.seed, opt.min_objects, opt.max_objects)
                                  : load_scenes(opt.scenes_path);
  std::stable_sort(scenes.begin(), scenes.end(), [](const Scene& a, const Scene& b) { return a.scene_id < b.scene_id; });
  if (!opt.shard.empty()) {
    auto slash = opt.shard.find('/');
    int k = std::stoi(opt.shard.substr(0, slash));
    int n = std::stoi(opt.shard.substr(slash + 1));
    std::size_t total = scenes.size();
    std::size_t lo = total * static_cast<std::size_t>(k) / static_cast<std::size_t>(n);
    std::size_t hi = total * static_cast<std::size_t>(k + 1) / static_cast<std::size_t>(n);
    scenes = std::vector<Scene>(scenes.begin() + static_cast<long>(lo), scenes.begin() + static_cast<long>(hi));
  }

  const Registry registry = build_registry();
  std::vector<std::optional<SceneRecord>> results(scenes.size());
  std::vector<std::string> errors(scenes.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < scenes.size(); i = next++) {
      try {
        results[i] = SceneRecord{scenes[i], generate_dialogs(registry, scenes[i], config)};
      } catch (const GenerationError& e) {
        errors[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < std::max(1, opt.workers); ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  std::vector<SceneRecord> records;
  int failed = 0;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    if (results[i]) {
      records.push_back(std::move(*results[i]));
    } else {
      ++failed;
      std::cerr << "under-generation: " << errors[i] << "\n";
    }
  }
  emit(opt.output, dataset_to_json(config, source, records).dump() + "\n");
  if (failed) {
    std::cerr << failed << " of " << scenes.size() << " scenes failed\n";
    return 2;
  }
  return 0;
}

int run_validate(const std::string& path) {
  auto violations = validate_dataset(read_json_file(path), build_registry());
  for (const auto& v : violations) std::cout << v.kind << "\t" << v.where << "\t" << v.message << "\n";
  std::cout << violations.size() << " violation" << (violations.size() == 1 ? "" : "s") << "\n";
  return violations.empty() ? 0 : 1;
}

int run_stats(const std::string& path, const std::string& format, const std::string& output) {
  nlohmann::json dataset = read_json_file(path);
  if (!dataset.is_object() || !dataset.contains("records") || dataset["records"].empty()) {
    std::cerr << "stats: " << path << " holds no records\n";
    return 2;
  }
  StatsReport report = compute_stats(dataset);
  emit(output, format == "text" ? render_text(report) : report_to_json(report).dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate and check annotated visual dialogs over scene graphs."};
  app.require_subcommand(1);

  // synthesize
  int syn_count = 10;
  int syn_min = 3;
  int syn_max = 10;
  std::optional<std::uint64_t> syn_seed;
  std::string syn_out;
  auto* syn = app.add_subcommand("synthesize", "Write randomly synthesized scenes as a scene file.");
  syn->add_option("--count", syn_count, "Number of scenes")->check(CLI::PositiveNumber);
  syn->add_option("--min-objects", syn_min, "Fewest objects per scene")->check(CLI::Range(1, 10));
  syn->add_option("--max-objects", syn_max, "Most objects per scene")->check(CLI::Range(1, 10));
  syn->add_option("--seed", syn_seed, "Random seed (default: $DIALOG_FORGE_SEED or 0)");
  syn->add_option("--output,-o", syn_out, "Output path (default stdout)");

  // generate
  GenerateOptions gen;
  auto* g = app.add_subcommand("generate", "Generate dialogs for every scene.");
  auto* g_scenes = g->add_option("--scenes", gen.scenes_path, "Scene file (CLEVR layout)")->check(CLI::ExistingFile);
  auto* g_syn = g->add_option("--synthesize", gen.synthesize, "Synthesize this many scenes")->check(CLI::PositiveNumber);
  g_scenes->excludes(g_syn);
  g->add_option("--min-objects", gen.min_objects, "Fewest objects per synthesized scene")->check(CLI::Range(1, 10));
  g->add_option("--max-objects", gen.max_objects, "Most objects per synthesized scene")->check(CLI::Range(1, 10));
  g->add_option("--dialogs-per-image", gen.config.dialogs_per_image, "Dialogs per scene")->check(CLI::PositiveNumber);
  g->add_option("--rounds", gen.config.rounds, "Question rounds per dialog")->check(CLI::PositiveNumber);
  g->add_option("--beams", gen.config.beams, "Beam width")->check(CLI::PositiveNumber);
  g->add_option("--seed", gen.seed, "Random seed (default: $DIALOG_FORGE_SEED or 0)");
  g->add_option("--workers", gen.workers, "Worker threads")->check(CLI::PositiveNumber);
  g->add_option("--shard", gen.shard, "Only the K-th of N scene ranges, as K/N")
      ->check([](const std::string& s) -> std::string {
        auto slash = s.find('/');
        if (slash == std::string::npos) return "expected K/N";
        try {
          int k = std::stoi(s.substr(0, slash));
          int n = std::stoi(s.substr(slash + 1));
          if (n < 1 || k < 0 || k >= n) return "need 0 <= K < N";
        } catch (const std::exception&) {
          return "expected K/N";
        }
        return {};
      });
  g->add_option("--output,-o", gen.output, "Output path (default stdout)");

  // validate
  std::string val_path;
  auto* val = app.add_subcommand("validate", "Re-answer and re-check a dataset file.");
  val->add_option("dataset", val_path, "Dataset file")->required()->check(CLI::ExistingFile);

  // stats
  std::string st_path;
  std::string st_format = "json";
  std::string st_out;
  auto* st = app.add_subcommand("stats", "Dataset statistics.");
  st->add_option("dataset", st_path, "Dataset file")->required()->check(CLI::ExistingFile);
  st->add_option("--format", st_format, "json or text")->check(CLI::IsMember({"json", "text"}));
  st->add_option("--output,-o", st_out, "Output path (default stdout)");

  // registry
  auto* reg = app.add_subcommand("registry", "Print the caption and question templates as JSON.");

  // grounding
  auto* gr = app.add_subcommand("grounding", "Attention grounding evaluation.");
  gr->require_subcommand(1);
  std::string gr_dataset;
  std::string gr_dumps;
  std::string gr_out;
  std::optional<std::uint64_t> gr_seed;
  auto* gr_ideal = gr->add_subcommand("ideal", "Write attention equal to the ground truth.");
  auto* gr_random = gr->add_subcommand("random", "Write uniformly random attention.");
  auto* gr_eval = gr->add_subcommand("eval", "Score an attention dump against a dataset.");
  for (auto* sub : {gr_ideal, gr_random, gr_eval}) {
    sub->add_option("--dataset", gr_dataset, "Dataset file")->required()->check(CLI::ExistingFile);
    sub->add_option("--output,-o", gr_out, "Output path (default stdout)");
  }
  gr_random->add_option("--seed", gr_seed, "Random seed (default: $DIALOG_FORGE_SEED or 0)");
  gr_eval->add_option("--dumps", gr_dumps, "Attention dump (JSON lines)")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*syn) {
      if (syn_min > syn_max) throw CLI::ValidationError("--min-objects", "exceeds --max-objects");
      auto scenes = synthesize_many(syn_count, syn_seed ? *syn_seed : default_seed(), syn_min, syn_max);
      emit(syn_out, scenes_to_json(scenes).dump() + "\n");
      return 0;
    }
    if (*g) {
      if (gen.scenes_path.empty() && gen.synthesize == 0) {
        throw CLI::ValidationError("generate", "give --scenes or --synthesize");
      }
      if (gen.min_objects > gen.max_objects) throw CLI::ValidationError("--min-objects", "exceeds --max-objects");
      return run_generate(gen);
    }
    if (*val) return run_validate(val_path);
    if (*st) return run_stats(st_path, st_format, st_out);
    if (*reg) {
      std::cout << registry_to_json(build_registry()).dump(2) << "\n";
      return 0;
    }
    if (*gr) {
      auto targets = grounding_targets(read_json_file(gr_dataset));
      if (*gr_ideal) {
        emit(gr_out, attention_dump_to_jsonl(ideal_attention(targets)));
      } else if (*gr_random) {
        Rng rng(gr_seed ? *gr_seed : default_seed());
        emit(gr_out, attention_dump_to_jsonl(random_attention(targets, rng)));
      } else {
        auto dumps = parse_attention_dump(read_text(gr_dumps));
        emit(gr_out, grounding_report_to_json(evaluate_grounding(dumps, targets)).dump(2) + "\n");
      }
      return 0;
    }
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const AlignmentError& e) {
    std::cerr << "alignment error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
