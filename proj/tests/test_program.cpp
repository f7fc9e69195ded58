#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <map>

#include "dforge/program.hpp"
#include "fixtures.hpp"
#include "naive_eval.hpp"

using namespace dforge;
using fixtures::object;

namespace {

Scene blue_red_scene() {
  return make_scene("s", {object("large", "blue", "rubber", "cube", 0, 0), object("small", "red", "metal", "sphere", 1, 1),
                          object("small", "blue", "metal", "sphere", 2, 2)});
}

}  // namespace

TEST_CASE("filter") {
  Scene s = blue_red_scene();
  FullWorld w(s);
  CHECK(eval_filter(w, {0, 1, 2}, Attribute::color, *parse_value(Attribute::color, "blue")) == ObjectSet{0, 2});
  CHECK_THROWS_AS(eval_filter(w, {0}, Attribute::shape, *parse_value(Attribute::shape, "sphere")), GenerationAbort);
  CHECK_THROWS_AS(eval_filter(w, {}, Attribute::shape, 0), GenerationAbort);
  CHECK(eval_filter(w, {}, Attribute::shape, 0, EvalMode::answer).empty());
}

TEST_CASE("unique") {
  Scene a = make_scene("a", {object("large", "gray", "rubber", "cylinder", 0, 0), object("large", "gray", "rubber", "cube", 1, 1),
                             object("large", "red", "rubber", "cube", 2, 2)});
  FullWorld wa(a);
  CHECK(eval_unique(wa, {0, 1, 2}, {Attribute::shape, Attribute::color}) == ObjectSet{0, 1, 2});

  Scene b = make_scene("b", {object("large", "gray", "rubber", "cube", 0, 0), object("small", "gray", "metal", "cube", 1, 1),
                             object("large", "red", "rubber", "cube", 2, 2)});
  FullWorld wb(b);
  CHECK(eval_unique(wb, {0, 1, 2}, {Attribute::shape, Attribute::color}) == ObjectSet{2});

  Scene c = make_scene("c", {object("large", "blue", "rubber", "cube", 0, 0), object("large", "blue", "rubber", "sphere", 1, 1)});
  FullWorld wc(c);
  CHECK_THROWS_AS(eval_unique(wc, {0, 1}, {Attribute::color}), GenerationAbort);
}

TEST_CASE("count and exist") {
  CHECK(eval_count({}).value == 0);
  CHECK(eval_count({0, 1, 2, 3}).value == 4);
  CHECK_FALSE(eval_exist({}).value);
  CHECK(eval_exist({3}).value);

  Program p;
  add_step(p, PrimitiveKind::count);
  Scene six = fixtures::six_objects();
  FullWorld w(six);
  CHECK(std::get<Count>(run_program(p, {w}).terminal()).value == 6);
}

TEST_CASE("count after filter equals a tally over the scene") {
  Rng rng(21);
  for (int i = 0; i < 100; ++i) {
    Scene s = synthesize_scene(rng, 3, 10);
    FullWorld w(s);
    for (std::uint8_t c = 0; c < value_count(Attribute::color); ++c) {
      int tally = 0;
      for (const auto& o : s.objects) tally += o.value(Attribute::color) == c;
      CHECK(eval_count(eval_filter(w, all_objects(w), Attribute::color, c, EvalMode::answer)).value == tally);
    }
  }
}

TEST_CASE("exist agrees with count on random programs") {
  Rng rng(99);
  int checked = 0;
  while (checked < 1000) {
    Scene s = synthesize_scene(rng, 3, 10);
    Program p = naive::random_program(rng, s);
    FullWorld w(s);
    ProgramRun run;
    try {
      run = run_program(p, {w, nullptr, EvalMode::answer});
    } catch (const GenerationAbort&) {
      continue;
    }
    for (std::size_t k = 0; k < run.outputs.size(); ++k) {
      const auto* set = std::get_if<ObjectSet>(&run.outputs[k]);
      if (!set) continue;
      CHECK(eval_exist(*set).value == (eval_count(*set).value > 0));
    }
    ++checked;
  }
}

TEST_CASE("relate") {
  Scene s = fixtures::cylinder_pair_scene();
  FullWorld w(s);
  CHECK(eval_relate(w, {0}, Relation::front) == ObjectSet{1});
  int rightmost = extreme_object(s, Extreme::right);
  CHECK(eval_relate(w, {rightmost}, Relation::right).empty());
  CHECK_THROWS_AS(eval_relate(w, {0, 1}, Relation::left), GenerationAbort);
}

TEST_CASE("group") {
  Scene s = make_scene("g", {object("large", "gray", "rubber", "cube", 0, 0), object("small", "red", "metal", "cube", 1, 1),
                             object("large", "red", "rubber", "sphere", 2, 2)});
  FullWorld w(s);
  Partition p = eval_group(w, {0, 1, 2}, {Attribute::shape});
  CHECK(p.classes == std::vector<ObjectSet>{{0, 1}, {2}});
  CHECK(eval_group(w, {2}, {Attribute::color}).classes.size() == 1);

  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    Scene r = synthesize_scene(rng, 1, 10);
    FullWorld rw(r);
    std::size_t total = 0;
    for (const auto& cls : eval_group(rw, all_objects(rw), {Attribute::color, Attribute::size}).classes) total += cls.size();
    CHECK(total == r.objects.size());
  }
}

TEST_CASE("sample") {
  std::vector<int> one{7};
  Rng rng(1);
  CHECK(eval_sample(one, rng) == 7);

  std::vector<int> four{0, 1, 2, 3};
  Rng a(42), b(42);
  CHECK(eval_sample(four, a) == eval_sample(four, b));

  std::array<int, 4> hits{};
  Rng r(5);
  for (int i = 0; i < 10000; ++i) ++hits[static_cast<std::size_t>(eval_sample(four, r))];
  for (int h : hits) CHECK(std::abs(h / 10000.0 - 0.25) <= 0.02);
}

TEST_CASE("caption program binds the green cylinder in front of the gray cylinder") {
  Scene s = fixtures::cylinder_pair_scene();
  FullWorld w(s);
  Program p;
  int anchor_attrs = add_step(p, PrimitiveKind::sample, "attributes", "color,shape");
  int anchors = add_step(p, PrimitiveKind::unique, {}, {}, {anchor_attrs});
  int anchor = add_step(p, PrimitiveKind::sample, "object", "0", {anchors});
  int subject = add_step(p, PrimitiveKind::relate, "front", {}, {anchor});
  add_step(p, PrimitiveKind::sample, "attribute", "color", {subject});
  auto run = run_program(p, {w, nullptr, EvalMode::generate});
  CHECK(std::get<ObjectSet>(run.outputs[static_cast<std::size_t>(subject)]) == ObjectSet{1});
  auto color = std::get<AttributeValue>(run.terminal());
  CHECK(value_name(color.attribute, color.value) == "green");
  CHECK(value_name(Attribute::shape, s.objects[1].value(Attribute::shape)) == "cylinder");
}

TEST_CASE("unpinned samples are recorded in the resolved program") {
  Scene s = fixtures::six_objects();
  FullWorld w(s);
  Program p;
  add_step(p, PrimitiveKind::sample, "object");
  Rng rng(3);
  auto run = run_program(p, {w, &rng, EvalMode::generate});
  REQUIRE_FALSE(run.resolved.steps[0].arg.empty());
  auto again = run_program(run.resolved, {w, nullptr, EvalMode::generate});
  CHECK(again.terminal() == run.terminal());
}

TEST_CASE("malformed programs") {
  Program forward;
  add_step(forward, PrimitiveKind::exist, {}, {}, {1});
  add_step(forward, PrimitiveKind::count);
  CHECK_THROWS_AS(check_well_formed(forward), ProgramError);
  CHECK_THROWS_AS(check_well_formed(Program{}), ProgramError);
}

TEST_CASE("program json round trip") {
  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    Scene s = synthesize_scene(rng, 3, 10);
    Program p = naive::random_program(rng, s);
    CHECK(program_from_json(program_to_json(p)) == p);
  }
}

TEST_CASE("interpreter matches the naive evaluator on random programs") {
  Rng rng(2024);
  std::map<bool, int> aborted;
  for (int i = 0; i < 1000; ++i) {
    Scene s = synthesize_scene(rng, 1, 10);
    Program p = naive::random_program(rng, s);
    FullWorld w(s);
    for (EvalMode mode : {EvalMode::answer, EvalMode::generate}) {
      naive::Outcome expected = naive::evaluate(p, s, mode == EvalMode::generate);
      bool threw = false;
      std::vector<std::string> got;
      try {
        for (const auto& v : run_program(p, {w, nullptr, mode}).outputs) got.push_back(naive::render(v));
      } catch (const GenerationAbort&) {
        threw = true;
      }
      INFO(program_to_json(p).dump());
      REQUIRE(threw == expected.aborted);
      if (!threw) CHECK(got == expected.steps);
      ++aborted[threw];
    }
  }
  // Both outcomes must actually be exercised.
  CHECK(aborted[false] > 300);
  CHECK(aborted[true] > 100);
}
