#include "dforge/stats.hpp"

#include <cstdio>
#include <set>
#include <stdexcept>

#include "dforge/grammar.hpp"

namespace dforge {
namespace {

std::string share(long part, long total) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%6.2f%%", total ? 100.0 * static_cast<double>(part) / static_cast<double>(total) : 0.0);
  return buf;
}

template <typename K>
nlohmann::json histogram_json(const std::map<K, long>& h) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : h) {
    if constexpr (std::is_same_v<K, int>) {
      j[std::to_string(k)] = v;
    } else {
      j[k] = v;
    }
  }
  return j;
}

}  // namespace

StatsReport compute_stats(const nlohmann::json& dataset) {
  if (!dataset.is_object() || !dataset.contains("records") || dataset["records"].empty()) {
    throw std::invalid_argument("stats need a dataset with at least one record");
  }
  StatsReport r;
  std::set<std::string> vocab;
  std::set<std::string> questions;
  long question_tokens = 0;
  long caption_tokens = 0;
  long coref_total = 0;
  long coref_count = 0;
  for (const auto& record : dataset["records"]) {
    ++r.num_images;
    for (const auto& dialog : record["dialogs"]) {
      ++r.num_dialogs;
      const auto& caption = dialog["caption"];
      ++r.caption_family[caption["template"].get<std::string>()];
      auto ctoks = tokenize(caption["text"].get<std::string>());
      caption_tokens += static_cast<long>(ctoks.size());
      vocab.insert(ctoks.begin(), ctoks.end());
      for (const auto& round : dialog["rounds"]) {
        ++r.num_questions;
        const std::string text = round["question"].get<std::string>();
        questions.insert(text);
        auto toks = tokenize(text);
        question_tokens += static_cast<long>(toks.size());
        vocab.insert(toks.begin(), toks.end());
        const std::string label = round["template"].get<std::string>();
        ++r.question_type[label];
        ++r.question_category[label.substr(0, label.find('-'))];
        ++r.answer[round["answer"].get<std::string>()];
        const auto& dep = round["dependency"];
        const std::string kind = dep["kind"].get<std::string>();
        ++r.dependency_kind[kind];
        if (kind == "coref") {
          int d = dep["distance"].get<int>();
          ++r.coref_distance[d];
          coref_total += d;
          ++coref_count;
        }
      }
    }
  }
  r.num_unique_questions = static_cast<long>(questions.size());
  r.num_unique_answers = static_cast<long>(r.answer.size());
  r.vocab_size = static_cast<long>(vocab.size());
  if (r.num_questions) r.mean_question_length = static_cast<double>(question_tokens) / static_cast<double>(r.num_questions);
  if (r.num_dialogs) r.mean_caption_length = static_cast<double>(caption_tokens) / static_cast<double>(r.num_dialogs);
  if (coref_count) r.mean_coref_distance = static_cast<double>(coref_total) / static_cast<double>(coref_count);
  return r;
}

nlohmann::json report_to_json(const StatsReport& r) {
  return {{"num_images", r.num_images},
          {"num_dialogs", r.num_dialogs},
          {"num_questions", r.num_questions},
          {"num_unique_questions", r.num_unique_questions},
          {"num_unique_answers", r.num_unique_answers},
          {"vocab_size", r.vocab_size},
          {"mean_question_length", r.mean_question_length},
          {"mean_caption_length", r.mean_caption_length},
          {"mean_coref_distance", r.mean_coref_distance},
          {"caption_family", histogram_json(r.caption_family)},
          {"question_category", histogram_json(r.question_category)},
          {"question_type", histogram_json(r.question_type)},
          {"answer", histogram_json(r.answer)},
          {"coref_distance", histogram_json(r.coref_distance)},
          {"dependency_kind", histogram_json(r.dependency_kind)}};
}

StatsReport report_from_json(const nlohmann::json& j) {
  StatsReport r;
  r.num_images = j.at("num_images").get<long>();
  r.num_dialogs = j.at("num_dialogs").get<long>();
  r.num_questions = j.at("num_questions").get<long>();
  r.num_unique_questions = j.at("num_unique_questions").get<long>();
  r.num_unique_answers = j.at("num_unique_answers").get<long>();
  r.vocab_size = j.at("vocab_size").get<long>();
  r.mean_question_length = j.at("mean_question_length").get<double>();
  r.mean_caption_length = j.at("mean_caption_length").get<double>();
  r.mean_coref_distance = j.at("mean_coref_distance").get<double>();
  auto strings = [&](const char* key, std::map<std::string, long>& out) {
    for (const auto& [k, v] : j.at(key).items()) out[k] = v.get<long>();
  };
  strings("caption_family", r.caption_family);
  strings("question_category", r.question_category);
  strings("question_type", r.question_type);
  strings("answer", r.answer);
  strings("dependency_kind", r.dependency_kind);
  for (const auto& [k, v] : j.at("coref_distance").items()) r.coref_distance[std::stoi(k)] = v.get<long>();
  return r;
}

std::string render_text(const StatsReport& r) {
  std::string out;
  char buf[160];
  auto line = [&](const char* fmt, auto... args) {
    std::snprintf(buf, sizeof buf, fmt, args...);
    out += buf;
  };
  line("images              %ld\n", r.num_images);
  line("dialogs             %ld\n", r.num_dialogs);
  line("questions           %ld\n", r.num_questions);
  line("unique questions    %ld\n", r.num_unique_questions);
  line("unique answers      %ld\n", r.num_unique_answers);
  line("vocabulary          %ld\n", r.vocab_size);
  line("mean question len   %.2f\n", r.mean_question_length);
  line("mean caption len    %.2f\n", r.mean_caption_length);
  line("mean coref distance %.2f\n", r.mean_coref_distance);

  out += "\nquestion category\n";
  for (const auto& [k, v] : r.question_category) line("  %-24s %8ld %s\n", k.c_str(), v, share(v, r.num_questions).c_str());
  out += "\nquestion type\n";
  for (const auto& [k, v] : r.question_type) line("  %-24s %8ld %s\n", k.c_str(), v, share(v, r.num_questions).c_str());
  out += "\ncaption template\n";
  for (const auto& [k, v] : r.caption_family) line("  %-24s %8ld %s\n", k.c_str(), v, share(v, r.num_dialogs).c_str());
  out += "\nhistory dependency\n";
  for (const auto& [k, v] : r.dependency_kind) line("  %-24s %8ld %s\n", k.c_str(), v, share(v, r.num_questions).c_str());
  long coref = 0;
  for (const auto& [k, v] : r.coref_distance) coref += v;
  out += "\ncoreference distance\n";
  for (const auto& [k, v] : r.coref_distance) line("  %-24d %8ld %s\n", k, v, share(v, coref).c_str());
  out += "\nanswer\n";
  for (const auto& [k, v] : r.answer) line("  %-24s %8ld %s\n", k.c_str(), v, share(v, r.num_questions).c_str());
  return out;
}

}  // namespace dforge
