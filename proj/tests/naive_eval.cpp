#include "naive_eval.hpp"

#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace naive {
namespace {

using dforge::Attribute;
using dforge::PrimitiveKind;
using dforge::Scene;

struct Abort {};

enum class Kind { set, partition, attrs, value, count, truth, none };

struct Datum {
  Kind kind = Kind::set;
  std::vector<bool> mask;
  std::vector<std::vector<bool>> classes;
  std::vector<Attribute> attrs;
  Attribute attribute = Attribute::size;
  int number = 0;
  bool truth = false;
};

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string part;
  while (std::getline(in, part, ',')) out.push_back(part);
  return out;
}

int size_of(const std::vector<bool>& mask) {
  int n = 0;
  for (bool b : mask) n += b;
  return n;
}

int first_of(const std::vector<bool>& mask) {
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) return static_cast<int>(i);
  }
  return -1;
}

std::string mask_text(const std::vector<bool>& mask) {
  std::string out;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    if (!out.empty()) out += ",";
    out += std::to_string(i);
  }
  return out;
}

std::string attrs_text(const std::vector<Attribute>& attrs) {
  std::string out;
  for (auto a : attrs) out += (out.empty() ? "" : ",") + std::string(dforge::attribute_name(a));
  return out;
}

std::string render_datum(const Datum& d) {
  switch (d.kind) {
    case Kind::set: return "set:" + mask_text(d.mask);
    case Kind::partition: {
      std::string out = "part:";
      for (std::size_t i = 0; i < d.classes.size(); ++i) out += (i ? "|" : "") + mask_text(d.classes[i]);
      return out;
    }
    case Kind::attrs: return "attrs:" + attrs_text(d.attrs);
    case Kind::value:
      return "val:" + std::string(dforge::attribute_name(d.attribute)) + "=" +
             std::string(dforge::value_name(d.attribute, static_cast<std::uint8_t>(d.number)));
    case Kind::count: return "count:" + std::to_string(d.number);
    case Kind::truth: return std::string("truth:") + (d.truth ? "yes" : "no");
    case Kind::none: return "none";
  }
  return "?";
}

int attr_of(const Scene& scene, int obj, Attribute a) {
  return scene.objects[static_cast<std::size_t>(obj)].attributes[static_cast<std::size_t>(a)];
}

std::optional<int> resolve_id(const Scene& scene, const std::string& text) {
  if (text.empty()) return std::nullopt;
  for (char c : text) {
    if (c < '0' || c > '9') return std::nullopt;
  }
  int v = std::stoi(text);
  if (v >= static_cast<int>(scene.objects.size())) return std::nullopt;
  return v;
}

// Nearest object strictly on the relation's side, lowest id among equals.
std::optional<int> scan_neighbor(const Scene& scene, int self, dforge::Relation r) {
  const auto& me = scene.objects[static_cast<std::size_t>(self)].position;
  std::optional<int> best;
  double best_offset = 0.0;
  for (const auto& o : scene.objects) {
    if (o.id == self) continue;
    double off = 0.0;
    switch (r) {
      case dforge::Relation::right: off = o.position[0] - me[0]; break;
      case dforge::Relation::left: off = me[0] - o.position[0]; break;
      case dforge::Relation::front: off = o.position[1] - me[1]; break;
      case dforge::Relation::behind: off = me[1] - o.position[1]; break;
    }
    if (off <= 0.0) continue;
    if (!best || off < best_offset) {
      best = o.id;
      best_offset = off;
    }
  }
  return best;
}

int scan_extreme(const Scene& scene, dforge::Extreme e) {
  double cx = 0.0, cy = 0.0;
  for (const auto& o : scene.objects) {
    cx += o.position[0];
    cy += o.position[1];
  }
  cx /= static_cast<double>(scene.objects.size());
  cy /= static_cast<double>(scene.objects.size());
  int best = -1;
  double best_score = 0.0;
  for (const auto& o : scene.objects) {
    double score = 0.0;
    switch (e) {
      case dforge::Extreme::right: score = o.position[0]; break;
      case dforge::Extreme::left: score = -o.position[0]; break;
      case dforge::Extreme::fore: score = o.position[1]; break;
      case dforge::Extreme::rear: score = -o.position[1]; break;
      case dforge::Extreme::center: score = -std::hypot(o.position[0] - cx, o.position[1] - cy); break;
    }
    if (best < 0 || score > best_score) {
      best = o.id;
      best_score = score;
    }
  }
  return best;
}

class Evaluator {
 public:
  Evaluator(const Scene& scene, bool generate) : scene_(scene), generate_(generate) {}

  std::vector<Datum> run(const dforge::Program& program) {
    std::vector<Datum> out;
    for (const auto& call : program.steps) {
      std::vector<const Datum*> in;
      for (int i : call.inputs) in.push_back(&out.at(static_cast<std::size_t>(i)));
      out.push_back(step(call, in));
    }
    return out;
  }

 private:
  std::vector<bool> world() const { return std::vector<bool>(scene_.objects.size(), true); }

  std::vector<bool> first_set(const std::vector<const Datum*>& in) const {
    for (const auto* d : in) {
      if (d->kind == Kind::set) return d->mask;
    }
    return world();
  }

  const Datum& need(const std::vector<const Datum*>& in, std::size_t i, Kind k) const {
    if (i >= in.size() || in[i]->kind != k) throw std::logic_error("naive: ill-typed program");
    return *in[i];
  }

  Datum set(std::vector<bool> mask) const {
    Datum d;
    d.kind = Kind::set;
    d.mask = std::move(mask);
    return d;
  }

  Datum empty_or_abort(std::vector<bool> mask) const {
    if (generate_ && size_of(mask) == 0) throw Abort{};
    return set(std::move(mask));
  }

  std::vector<Attribute> attributes(const dforge::PrimitiveCall& call, const std::vector<const Datum*>& in) const {
    if (!call.param.empty()) {
      std::vector<Attribute> out;
      for (const auto& name : split(call.param)) out.push_back(*dforge::parse_attribute(name));
      return out;
    }
    for (const auto* d : in) {
      if (d->kind == Kind::attrs) return d->attrs;
    }
    throw std::logic_error("naive: no attributes");
  }

  std::vector<std::vector<bool>> partition(const std::vector<bool>& mask, const std::vector<Attribute>& attrs) const {
    // Odometer over every value tuple, first attribute most significant.
    std::vector<std::vector<bool>> out;
    std::vector<int> tuple(attrs.size(), 0);
    while (true) {
      std::vector<bool> cls(mask.size(), false);
      bool any = false;
      for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        bool match = true;
        for (std::size_t k = 0; k < attrs.size(); ++k) match = match && attr_of(scene_, static_cast<int>(i), attrs[k]) == tuple[k];
        if (match) cls[i] = any = true;
      }
      if (any) out.push_back(std::move(cls));
      int k = static_cast<int>(attrs.size()) - 1;
      while (k >= 0 && ++tuple[static_cast<std::size_t>(k)] == dforge::value_count(attrs[static_cast<std::size_t>(k)])) {
        tuple[static_cast<std::size_t>(k)] = 0;
        --k;
      }
      if (k < 0) break;
    }
    return out;
  }

  Datum step(const dforge::PrimitiveCall& call, const std::vector<const Datum*>& in) {
    switch (call.kind) {
      case PrimitiveKind::count: {
        Datum d;
        d.kind = Kind::count;
        d.number = size_of(first_set(in));
        return d;
      }
      case PrimitiveKind::exist: {
        Datum d;
        d.kind = Kind::truth;
        d.truth = size_of(need(in, 0, Kind::set).mask) > 0;
        return d;
      }
      case PrimitiveKind::unique: {
        auto mask = first_set(in);
        auto attrs = attributes(call, in);
        std::map<std::vector<int>, int> multiplicity;
        auto key = [&](std::size_t i) {
          std::vector<int> t;
          for (auto a : attrs) t.push_back(attr_of(scene_, static_cast<int>(i), a));
          return t;
        };
        for (std::size_t i = 0; i < mask.size(); ++i) {
          if (mask[i]) ++multiplicity[key(i)];
        }
        std::vector<bool> out(mask.size(), false);
        for (std::size_t i = 0; i < mask.size(); ++i) out[i] = mask[i] && multiplicity[key(i)] == 1;
        return empty_or_abort(std::move(out));
      }
      case PrimitiveKind::group: {
        auto attrs = attributes(call, in);
        auto classes = partition(first_set(in), attrs);
        if (call.arg.empty()) {
          Datum d;
          d.kind = Kind::partition;
          d.classes = std::move(classes);
          return d;
        }
        auto names = split(call.arg);
        for (auto& cls : classes) {
          int rep = first_of(cls);
          bool match = true;
          for (std::size_t k = 0; k < attrs.size(); ++k) {
            match = match && dforge::value_name(attrs[k], static_cast<std::uint8_t>(attr_of(scene_, rep, attrs[k]))) == names[k];
          }
          if (match) return set(cls);
        }
        return empty_or_abort(std::vector<bool>(scene_.objects.size(), false));
      }
      case PrimitiveKind::filter: {
        if (call.param == "exclude") {
          auto mask = call.inputs.empty() ? world() : need(in, 0, Kind::set).mask;
          if (!call.arg.empty()) {
            for (const auto& h : split(call.arg)) {
              auto id = resolve_id(scene_, h);
              if (!id) throw Abort{};
              mask[static_cast<std::size_t>(*id)] = false;
            }
          }
          if (in.size() > 1) {
            const auto& drop = need(in, 1, Kind::set).mask;
            for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = mask[i] && !drop[i];
          }
          return empty_or_abort(std::move(mask));
        }
        Attribute a = *dforge::parse_attribute(call.param);
        std::vector<bool> mask;
        int wanted;
        if (!call.arg.empty()) {
          mask = first_set(in);
          wanted = *dforge::parse_value(a, call.arg);
        } else {
          mask = need(in, 0, Kind::set).mask;
          const auto& ref = need(in, 1, Kind::set).mask;
          if (size_of(ref) != 1) throw Abort{};
          wanted = attr_of(scene_, first_of(ref), a);
        }
        for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = mask[i] && attr_of(scene_, static_cast<int>(i), a) == wanted;
        return empty_or_abort(std::move(mask));
      }
      case PrimitiveKind::relate: {
        std::vector<bool> out(scene_.objects.size(), false);
        if (auto e = dforge::parse_extreme(call.param)) {
          if (scene_.objects.empty()) throw Abort{};
          out[static_cast<std::size_t>(scan_extreme(scene_, *e))] = true;
          return set(std::move(out));
        }
        const auto& from = need(in, 0, Kind::set).mask;
        if (size_of(from) != 1) throw Abort{};
        if (auto n = scan_neighbor(scene_, first_of(from), *dforge::parse_relation(call.param))) {
          out[static_cast<std::size_t>(*n)] = true;
        }
        return empty_or_abort(std::move(out));
      }
      case PrimitiveKind::sample: {
        if (call.param == "object") {
          auto pool = first_set(in);
          if (size_of(pool) == 0) throw Abort{};
          auto id = resolve_id(scene_, call.arg);
          if (!id || !pool[static_cast<std::size_t>(*id)]) throw Abort{};
          std::vector<bool> out(pool.size(), false);
          out[static_cast<std::size_t>(*id)] = true;
          return set(std::move(out));
        }
        if (call.param == "attribute") {
          const auto& objs = need(in, 0, Kind::set).mask;
          int n = size_of(objs);
          if (n > 1) throw Abort{};
          Datum d;
          if (n == 0) {
            if (generate_) throw Abort{};
            d.kind = Kind::none;
            return d;
          }
          d.kind = Kind::value;
          d.attribute = *dforge::parse_attribute(call.arg);
          d.number = attr_of(scene_, first_of(objs), d.attribute);
          return d;
        }
        if (call.param == "attributes") {
          Datum d;
          d.kind = Kind::attrs;
          for (const auto& name : split(call.arg)) d.attrs.push_back(*dforge::parse_attribute(name));
          return d;
        }
        const auto& part = need(in, 0, Kind::partition);
        std::size_t k = static_cast<std::size_t>(std::stoi(call.arg));
        if (part.classes.empty() || k >= part.classes.size()) throw Abort{};
        return set(part.classes[k]);
      }
    }
    throw std::logic_error("naive: unknown primitive");
  }

  const Scene& scene_;
  bool generate_;
};

}  // namespace

Outcome evaluate(const dforge::Program& program, const dforge::Scene& scene, bool generate) {
  Outcome out;
  try {
    for (const auto& d : Evaluator(scene, generate).run(program)) out.steps.push_back(render_datum(d));
  } catch (const Abort&) {
    out.aborted = true;
    out.steps.clear();
  }
  return out;
}

std::string answer(const dforge::Program& program, const dforge::Scene& scene) {
  Outcome o = evaluate(program, scene, false);
  if (o.aborted) return "";
  const std::string& t = o.terminal();
  if (t == "none") return t;
  if (t.rfind("count:", 0) == 0) {
    int n = std::stoi(t.substr(6));
    return n <= 10 ? std::to_string(n) : "";
  }
  if (t.rfind("truth:", 0) == 0) return t.substr(6);
  if (t.rfind("val:", 0) == 0) return t.substr(t.find('=') + 1);
  return "";
}

std::string render(const dforge::Value& value) {
  struct Visitor {
    std::string operator()(const dforge::ObjectSet& s) const {
      std::string out = "set:";
      for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
      return out;
    }
    std::string operator()(const dforge::Partition& p) const {
      std::string out = "part:";
      for (std::size_t c = 0; c < p.classes.size(); ++c) {
        if (c) out += "|";
        for (std::size_t i = 0; i < p.classes[c].size(); ++i) out += (i ? "," : "") + std::to_string(p.classes[c][i]);
      }
      return out;
    }
    std::string operator()(const dforge::AttributeList& l) const { return "attrs:" + attrs_text(l.attributes); }
    std::string operator()(const dforge::AttributeValue& v) const {
      return "val:" + std::string(dforge::attribute_name(v.attribute)) + "=" +
             std::string(dforge::value_name(v.attribute, v.value));
    }
    std::string operator()(const dforge::Count& c) const { return "count:" + std::to_string(c.value); }
    std::string operator()(const dforge::Truth& t) const { return std::string("truth:") + (t.value ? "yes" : "no"); }
    std::string operator()(const dforge::NoValue&) const { return "none"; }
  };
  return std::visit(Visitor{}, value);
}

dforge::Program random_program(dforge::Rng& rng, const dforge::Scene& scene) {
  enum class T { set, partition, attrs, other };
  dforge::Program p;
  std::vector<T> types;
  const int n = static_cast<int>(scene.objects.size());

  auto pick = [&](T t) -> std::optional<int> {
    std::vector<int> idx;
    for (std::size_t i = 0; i < types.size(); ++i) {
      if (types[i] == t) idx.push_back(static_cast<int>(i));
    }
    if (idx.empty()) return std::nullopt;
    return idx[rng.index(idx.size())];
  };
  auto optional_set = [&]() -> std::vector<int> {
    auto s = pick(T::set);
    if (s && rng.unit() < 0.75) return {*s};
    return {};
  };
  auto random_attrs = [&] {
    std::vector<Attribute> all(dforge::kAttributes.begin(), dforge::kAttributes.end());
    rng.shuffle(all);
    all.resize(1 + rng.index(2));
    return dforge::join_attributes(all);
  };
  auto random_value = [&](Attribute a) {
    return std::string(dforge::value_name(a, static_cast<std::uint8_t>(rng.index(dforge::value_count(a)))));
  };
  auto emit = [&](T t, PrimitiveKind k, std::string param, std::string arg, std::vector<int> inputs) {
    dforge::add_step(p, k, std::move(param), std::move(arg), std::move(inputs));
    types.push_back(t);
  };

  const int length = rng.between(1, 7);
  for (int i = 0; i < length; ++i) {
    bool last = i + 1 == length;
    switch (rng.index(last ? 14 : 11)) {
      case 0: {
        Attribute a = dforge::kAttributes[rng.index(4)];
        emit(T::set, PrimitiveKind::filter, std::string(dforge::attribute_name(a)), random_value(a), optional_set());
        break;
      }
      case 1: {
        auto base = pick(T::set);
        auto ref = pick(T::set);
        if (!base || !ref) {
          emit(T::set, PrimitiveKind::relate, std::string(dforge::extreme_name(dforge::kExtremes[rng.index(5)])), {}, {});
          break;
        }
        emit(T::set, PrimitiveKind::filter, std::string(dforge::attribute_name(dforge::kAttributes[rng.index(4)])), {},
             {*base, *ref});
        break;
      }
      case 2: {
        std::string handles;
        for (int k = 0, m = static_cast<int>(rng.index(3)); k < m; ++k) {
          handles += (handles.empty() ? "" : ",") + std::to_string(rng.index(static_cast<std::size_t>(n)));
        }
        std::vector<int> inputs = optional_set();
        if (!inputs.empty() && rng.unit() < 0.3) inputs.push_back(*pick(T::set));
        emit(T::set, PrimitiveKind::filter, "exclude", handles, inputs);
        break;
      }
      case 3: {
        auto attrs = pick(T::attrs);
        std::vector<int> inputs = optional_set();
        if (attrs && rng.unit() < 0.5) {
          inputs.push_back(*attrs);
          emit(T::set, PrimitiveKind::unique, {}, {}, inputs);
        } else {
          emit(T::set, PrimitiveKind::unique, random_attrs(), {}, inputs);
        }
        break;
      }
      case 4: {
        std::string attrs = random_attrs();
        if (rng.unit() < 0.4) {
          std::string sel;
          for (auto a : dforge::split_attributes(attrs)) sel += (sel.empty() ? "" : ",") + random_value(a);
          emit(T::set, PrimitiveKind::group, attrs, sel, optional_set());
        } else {
          emit(T::partition, PrimitiveKind::group, attrs, {}, optional_set());
        }
        break;
      }
      case 5: {
        auto part = pick(T::partition);
        if (!part) {
          emit(T::set, PrimitiveKind::sample, "object", std::to_string(rng.index(static_cast<std::size_t>(n))),
               optional_set());
          break;
        }
        emit(T::set, PrimitiveKind::sample, "class", std::to_string(rng.index(4)), {*part});
        break;
      }
      case 6:
        emit(T::set, PrimitiveKind::sample, "object", std::to_string(rng.index(static_cast<std::size_t>(n))),
             optional_set());
        break;
      case 7:
        emit(T::attrs, PrimitiveKind::sample, "attributes", random_attrs(), {});
        break;
      case 8: {
        auto s = pick(T::set);
        if (!s) {
          emit(T::set, PrimitiveKind::relate, std::string(dforge::extreme_name(dforge::kExtremes[rng.index(5)])), {}, {});
          break;
        }
        emit(T::set, PrimitiveKind::relate, std::string(dforge::relation_name(dforge::kRelations[rng.index(4)])), {},
             {*s});
        break;
      }
      case 9:
        emit(T::set, PrimitiveKind::relate, std::string(dforge::extreme_name(dforge::kExtremes[rng.index(5)])), {}, {});
        break;
      case 10:
        emit(T::set, PrimitiveKind::filter, "exclude", std::to_string(rng.index(static_cast<std::size_t>(n))),
             optional_set());
        break;
      case 11:
        emit(T::other, PrimitiveKind::count, {}, {}, optional_set());
        break;
      case 12: {
        auto s = pick(T::set);
        if (!s) {
          emit(T::other, PrimitiveKind::count, {}, {}, {});
          break;
        }
        emit(T::other, PrimitiveKind::exist, {}, {}, {*s});
        break;
      }
      default: {
        auto s = pick(T::set);
        if (!s) {
          emit(T::other, PrimitiveKind::count, {}, {}, {});
          break;
        }
        emit(T::other, PrimitiveKind::sample, "attribute",
             std::string(dforge::attribute_name(dforge::kAttributes[rng.index(4)])), {*s});
        break;
      }
    }
  }
  return p;
}

}  // namespace naive
