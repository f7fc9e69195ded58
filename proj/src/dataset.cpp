#include "dforge/dataset.hpp"

#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "dforge/errors.hpp"

namespace dforge {
namespace {

std::optional<int> object_of(const QuestionCandidate& q, int entity) {
  for (auto [e, obj] : q.grounding) {
    if (e == entity) return obj;
  }
  return std::nullopt;
}

nlohmann::json spans_json(const std::vector<ReferringSpan>& spans, const std::function<int(int)>& object) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& s : spans) out.push_back({{"begin", s.begin}, {"end", s.end}, {"object", object(s.entity)}});
  return out;
}

nlohmann::json dependency_json(const HistoryDependency& d) {
  nlohmann::json j{{"kind", dependency_name(d.kind)}};
  if (d.kind == HistoryDependency::Kind::coref) j["distance"] = d.distance;
  return j;
}

class Validator {
 public:
  Validator(const nlohmann::json& doc, const Registry& registry) : doc_(doc), registry_(registry) {}

  std::vector<Violation> run() {
    if (!doc_.is_object()) {
      add("schema", "file", "top level must be an object");
      return out_;
    }
    if (!doc_.contains("version") || doc_["version"] != kDatasetVersion) {
      add("schema", "file", "missing or unknown version tag");
    }
    if (!doc_.contains("config") || !doc_["config"].is_object()) {
      add("schema", "file", "missing config echo");
      return out_;
    }
    try {
      config_ = config_from_json(doc_["config"]);
    } catch (const std::exception& e) {
      add("schema", "config", e.what());
      return out_;
    }
    if (!doc_.contains("records") || !doc_["records"].is_array()) {
      add("schema", "file", "missing records list");
      return out_;
    }
    std::string previous;
    std::size_t i = 0;
    for (const auto& record : doc_["records"]) {
      check_record(record, i++, previous);
    }
    return out_;
  }

 private:
  void add(std::string kind, std::string where, std::string message) {
    out_.push_back({std::move(kind), std::move(where), std::move(message)});
  }

  static bool has(const nlohmann::json& j, const char* key, nlohmann::json::value_t type) {
    if (!j.is_object() || !j.contains(key)) return false;
    const auto& v = j[key];
    if (type == nlohmann::json::value_t::number_integer) return v.is_number_integer();
    return v.type() == type;
  }

  void check_record(const nlohmann::json& record, std::size_t index, std::string& previous) {
    std::string where = "record " + std::to_string(index);
    if (!has(record, "scene_id", nlohmann::json::value_t::string) || !record.contains("scene") ||
        !has(record, "dialogs", nlohmann::json::value_t::array)) {
      add("schema", where, "record needs scene_id, scene and dialogs");
      return;
    }
    const std::string id = record["scene_id"].get<std::string>();
    where = "scene " + id;
    if (!previous.empty() && id <= previous) add("schema", where, "records are not sorted by scene_id");
    previous = id;
    Scene scene;
    try {
      scene = scene_from_json(record["scene"], index);
    } catch (const std::exception& e) {
      add("schema", where, e.what());
      return;
    }
    const auto& dialogs = record["dialogs"];
    if (static_cast<int>(dialogs.size()) != config_.dialogs_per_image) {
      add("schema", where,
          "expected " + std::to_string(config_.dialogs_per_image) + " dialogs, found " + std::to_string(dialogs.size()));
    }
    std::set<std::string> texts;
    for (std::size_t k = 0; k < dialogs.size(); ++k) {
      check_dialog(dialogs[k], scene, where + " dialog " + std::to_string(k), texts);
    }
  }

  void check_referents(const nlohmann::json& j, const Scene& scene, const std::string& where, std::size_t tokens) {
    if (!has(j, "referents", nlohmann::json::value_t::array) ||
        !has(j, "referring_spans", nlohmann::json::value_t::array)) {
      add("schema", where, "missing referents or referring_spans");
      return;
    }
    for (const auto& r : j["referents"]) {
      if (!r.is_number_integer() || r.get<int>() < 0 || r.get<int>() >= scene.size()) {
        add("annotation", where, "referent is not an object of the scene");
      }
    }
    for (const auto& s : j["referring_spans"]) {
      if (!has(s, "begin", nlohmann::json::value_t::number_integer) ||
          !has(s, "end", nlohmann::json::value_t::number_integer) ||
          !has(s, "object", nlohmann::json::value_t::number_integer)) {
        add("schema", where, "malformed referring span");
        continue;
      }
      int b = s["begin"].get<int>();
      int e = s["end"].get<int>();
      int obj = s["object"].get<int>();
      if (b < 0 || b >= e || static_cast<std::size_t>(e) > tokens) add("annotation", where, "span outside the text");
      if (obj < 0 || obj >= scene.size()) add("annotation", where, "span points at no object");
    }
  }

  void check_caption(const nlohmann::json& c, const Scene& scene, const std::string& where) {
    if (!has(c, "text", nlohmann::json::value_t::string) || !has(c, "template", nlohmann::json::value_t::string) ||
        !c.contains("program")) {
      add("schema", where, "caption needs text, template and program");
      return;
    }
    const std::string label = c["template"].get<std::string>();
    auto idx = registry_.find(label);
    if (!idx || registry_.at(*idx).category != Category::caption) {
      add("schema", where, "unknown caption template \"" + label + "\"");
      return;
    }
    const std::string text = c["text"].get<std::string>();
    if (parse_utterance(registry_, text, label).empty()) add("annotation", where, "text is not a form of " + label);
    try {
      Program p = program_from_json(c["program"]);
      FullWorld world(scene);
      run_program(p, EvalContext{world, nullptr, EvalMode::generate});
    } catch (const std::exception& e) {
      add("oracle", where, std::string("caption program does not hold: ") + e.what());
    }
    check_referents(c, scene, where, tokenize(text).size());
  }

  void check_dialog(const nlohmann::json& d, const Scene& scene, const std::string& where,
                    std::set<std::string>& texts) {
    if (!d.is_object() || !d.contains("caption") || !has(d, "rounds", nlohmann::json::value_t::array)) {
      add("schema", where, "dialog needs caption and rounds");
      return;
    }
    check_caption(d["caption"], scene, where + " caption");
    const auto& rounds = d["rounds"];
    if (static_cast<int>(rounds.size()) != config_.rounds) {
      add("schema", where,
          "expected " + std::to_string(config_.rounds) + " rounds, found " + std::to_string(rounds.size()));
    }
    Tally tally;
    bool complete = static_cast<int>(rounds.size()) == config_.rounds;
    std::string signature = d["caption"].value("text", "");
    for (std::size_t t = 0; t < rounds.size(); ++t) {
      const std::string at = where + " round " + std::to_string(t + 1);
      const auto& r = rounds[t];
      if (!has(r, "question", nlohmann::json::value_t::string) ||
          !has(r, "template", nlohmann::json::value_t::string) || !r.contains("program") ||
          !has(r, "answer", nlohmann::json::value_t::string) || !has(r, "dependency", nlohmann::json::value_t::object)) {
        add("schema", at, "round needs question, template, program, answer and dependency");
        complete = false;
        continue;
      }
      const std::string label = r["template"].get<std::string>();
      auto idx = registry_.find(label);
      if (!idx || registry_.at(*idx).category == Category::caption) {
        add("schema", at, "unknown question template \"" + label + "\"");
        complete = false;
        continue;
      }
      const Template& tmpl = registry_.at(*idx);
      tally.add(tmpl.category, tmpl.independent);
      const std::string question = r["question"].get<std::string>();
      const std::string given = r["answer"].get<std::string>();
      signature += "\n" + question + "\t" + r["program"].dump();
      if (!in_vocabulary(given)) add("vocabulary", at, "answer \"" + given + "\" is not in the answer vocabulary");
      try {
        Program p = program_from_json(r["program"]);
        std::string truth = answer_program(p, scene);
        if (truth != given) add("oracle", at, "answer \"" + given + "\" but the scene says \"" + truth + "\"");
      } catch (const std::exception& e) {
        add("oracle", at, std::string("program cannot be answered: ") + e.what());
      }
      check_dependency(r["dependency"], tmpl, static_cast<int>(t) + 1, at);
      if (parse_utterance(registry_, question, label).empty()) add("annotation", at, "text is not a form of " + label);
      check_referents(r, scene, at, tokenize(question).size());
    }
    if (!texts.insert(signature).second) add("constraint", where, "duplicate of another dialog of this scene");
    if (complete) check_tally(tally, where);
  }

  void check_dependency(const nlohmann::json& dep, const Template& tmpl, int round, const std::string& at) {
    std::string kind = dep.value("kind", "");
    std::string expected(dependency_name(static_cast<HistoryDependency::Kind>(tmpl.history_need)));
    if (kind != expected) {
      add("annotation", at, "dependency \"" + kind + "\" but " + tmpl.label + " is \"" + expected + "\"");
      return;
    }
    if (kind == "coref") {
      int d = dep.value("distance", 0);
      if (d < 1 || d > round) add("annotation", at, "coreference distance " + std::to_string(d) + " out of range");
    }
  }

  void check_tally(const Tally& t, const std::string& where) {
    const auto b = bounds_for(config_.shares, config_.rounds);
    auto range = [&](const char* what, int n, int lo, int hi) {
      if (n < lo || n > hi) {
        add("constraint", where,
            std::string(what) + " questions: " + std::to_string(n) + " not in [" + std::to_string(lo) + ", " +
                std::to_string(hi) + "]");
      }
    };
    range("count", t.count, b.count_min, b.count_max);
    range("exist", t.exist, b.exist_min, b.exist_max);
    range("seek", t.seek, b.seek_min, b.seek_max);
    range("independent", t.independent, 0, b.independent_max);
  }

  const nlohmann::json& doc_;
  const Registry& registry_;
  GenerationConfig config_;
  std::vector<Violation> out_;
};

}  // namespace

nlohmann::json config_to_json(const GenerationConfig& c, const SceneSource& source) {
  nlohmann::json src;
  if (source.scenes_path.empty()) {
    src = {{"synthesize", source.synthesized}, {"min_objects", source.min_objects}, {"max_objects", source.max_objects}};
  } else {
    src = {{"scenes", source.scenes_path}};
  }
  const auto& b = c.shares;
  const auto& w = c.weights;
  return {{"dialogs_per_image", c.dialogs_per_image},
          {"rounds", c.rounds},
          {"beams", c.beams},
          {"seed", c.seed},
          {"captions_per_template", c.captions_per_template},
          {"children_per_beam", c.children_per_beam},
          {"shares",
           {{"count", {b.count_min, b.count_max}},
            {"exist", {b.exist_min, b.exist_max}},
            {"seek", {b.seek_min, b.seek_max}},
            {"independent_below", b.independent_below}}},
          {"weights",
           {{"seek", w.seek},
            {"count", w.count},
            {"exist", w.exist},
            {"new_template", w.new_template},
            {"distance", w.distance},
            {"favored", w.favored},
            {"jitter", w.jitter}}},
          {"source", std::move(src)}};
}

GenerationConfig config_from_json(const nlohmann::json& j) {
  GenerationConfig c;
  c.dialogs_per_image = j.at("dialogs_per_image").get<int>();
  c.rounds = j.at("rounds").get<int>();
  c.beams = j.at("beams").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.captions_per_template = j.value("captions_per_template", c.captions_per_template);
  c.children_per_beam = j.value("children_per_beam", c.children_per_beam);
  if (j.contains("shares")) {
    const auto& s = j["shares"];
    c.shares.count_min = s.at("count")[0].get<double>();
    c.shares.count_max = s.at("count")[1].get<double>();
    c.shares.exist_min = s.at("exist")[0].get<double>();
    c.shares.exist_max = s.at("exist")[1].get<double>();
    c.shares.seek_min = s.at("seek")[0].get<double>();
    c.shares.seek_max = s.at("seek")[1].get<double>();
    c.shares.independent_below = s.at("independent_below").get<double>();
  }
  if (j.contains("weights")) {
    const auto& w = j["weights"];
    c.weights.seek = w.value("seek", c.weights.seek);
    c.weights.count = w.value("count", c.weights.count);
    c.weights.exist = w.value("exist", c.weights.exist);
    c.weights.new_template = w.value("new_template", c.weights.new_template);
    c.weights.distance = w.value("distance", c.weights.distance);
    c.weights.favored = w.value("favored", c.weights.favored);
    c.weights.jitter = w.value("jitter", c.weights.jitter);
  }
  return c;
}

nlohmann::json dialog_to_json(const Dialog& dialog) {
  const auto& cap = dialog.caption;
  std::vector<int> cap_objects;
  for (const auto& m : cap.revealed.objects) cap_objects.push_back(m.object);
  nlohmann::json caption{
      {"text", cap.text},
      {"template", cap.template_label},
      {"program", program_to_json(cap.program)},
      {"referring_spans", spans_json(cap.referring_spans, [&](int k) { return cap_objects.at(static_cast<std::size_t>(k)); })},
      {"referents", cap_objects}};

  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& r : dialog.rounds) {
    const auto& q = r.question;
    auto object = [&](int e) {
      auto o = object_of(q, e);
      if (!o) throw ConsistencyError("entity e" + std::to_string(e) + " is not grounded");
      return *o;
    };
    std::vector<int> referents;
    if (q.antecedent) referents.push_back(object(*q.antecedent));
    rounds.push_back({{"question", q.utterance.text},
                      {"template", q.utterance.template_label},
                      {"program", program_to_json(ground_program(q.program, q.grounding))},
                      {"answer", r.answer.token},
                      {"dependency", dependency_json(r.dependency)},
                      {"referring_spans", spans_json(q.utterance.referring_spans, object)},
                      {"referents", referents}});
  }
  return {{"caption", std::move(caption)}, {"rounds", std::move(rounds)}};
}

nlohmann::json dataset_to_json(const GenerationConfig& config, const SceneSource& source,
                               std::span<const SceneRecord> records) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& rec : records) {
    nlohmann::json dialogs = nlohmann::json::array();
    for (const auto& d : rec.dialogs) dialogs.push_back(dialog_to_json(d));
    list.push_back({{"scene_id", rec.scene.scene_id}, {"scene", scene_to_json(rec.scene)}, {"dialogs", std::move(dialogs)}});
  }
  return {{"version", kDatasetVersion}, {"config", config_to_json(config, source)}, {"records", std::move(list)}};
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(path + ": " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("write failed for " + path);
}

std::vector<Violation> validate_dataset(const nlohmann::json& dataset, const Registry& registry) {
  return Validator(dataset, registry).run();
}

}  // namespace dforge
