#include <gtest/gtest.h>

#include <cmath>

#include "refocus/layout_io.hpp"
#include "refocus/scoring.hpp"
#include "refocus/seeding.hpp"
#include "refocus/sim.hpp"

namespace refocus {
namespace {

GenerateRequest request(const Layout& layout, std::uint64_t seed, int w = 128, int h = 128) {
  return {"prompt", layout, seed, 50, 7.5, w, h};
}

Layout giraffes() {
  auto studio = sim::Studio::create();
  return parse_layout_response(studio->backends().layout->propose("a photo of four giraffes"));
}

TEST(SimGenerator, SameInputsGiveIdenticalBytes) {
  const auto layout = giraffes();
  auto a = sim::Studio::create();
  auto b = sim::Studio::create();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto first = a->backends().generator->generate(request(layout, seed));
    EXPECT_EQ(first, a->backends().generator->generate(request(layout, seed)));
    EXPECT_EQ(first, b->backends().generator->generate(request(layout, seed)));
  }
}

TEST(SimGenerator, NoiselessRenderingMatchesIntendedBoxes) {
  auto studio = sim::Studio::create({0.0, 0.0});
  const auto layout = giraffes();
  const auto image = studio->backends().generator->generate(request(layout, 42, 200, 150));
  const auto scene = studio->scene_of(image);
  ASSERT_TRUE(scene.has_value());
  for (const auto& obj : scene->objects) {
    ASSERT_TRUE(obj.rendered.has_value());
    EXPECT_EQ(*obj.rendered, box_to_pixels(obj.intended, 200, 150));
  }
}

TEST(SimGenerator, FaultInjectionFailsTheChosenSeed) {
  sim::SimFaults faults;
  faults.generate_failures = {3};
  auto studio = sim::Studio::create({}, faults);
  const auto layout = giraffes();
  EXPECT_NO_THROW(studio->backends().generator->generate(request(layout, 2)));
  try {
    studio->backends().generator->generate(request(layout, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::GenerationFailed);
  }
  EXPECT_EQ(studio->counters().generate.load(), 2);
}

TEST(SimRefiner, HalfStrengthHalvesSigma) {
  auto studio = sim::Studio::create({0.1, 0.0});
  const auto parent = studio->draft_scene(request(giraffes(), 5));
  EXPECT_DOUBLE_EQ(parent.sigma_place, 0.1);
  EXPECT_DOUBLE_EQ(studio->refined_scene(parent, 77, 0.5).sigma_place, 0.05);
}

TEST(SimRefiner, StrengthNearOneConvergesToIntendedBoxes) {
  auto studio = sim::Studio::create({0.2, 0.3});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto parent = studio->draft_scene(request(giraffes(), seed));
    const auto child = studio->refined_scene(parent, seed + 1000, 1.0 - 1e-9);
    for (const auto& obj : child.objects) {
      if (obj.dropped) continue;
      EXPECT_EQ(*obj.rendered, box_to_pixels(obj.intended, 128, 128));
    }
  }
}

TEST(SimRefiner, RejectsForeignImagesAndBadStrength) {
  auto studio = sim::Studio::create();
  auto refiner = studio->backends().refiner;
  auto expect_refiner_failed = [&](const RefineRequest& r) {
    try {
      refiner->refine(r);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::RefinerFailed);
    }
  };
  expect_refiner_failed({Raster(64, 64, Rgb{1, 2, 3}), "p", 1, 0.5, 0.0});
  const auto image = studio->backends().generator->generate(request(giraffes(), 1));
  expect_refiner_failed({image, "p", 1, 0.0, 0.0});
  expect_refiner_failed({image, "p", 1, 1.0, 0.0});
  EXPECT_NO_THROW(refiner->refine({image, "p", 1, 0.5, 0.0}));
}

TEST(SimRefiner, ChildObjectScoreNeverBelowParent) {
  auto studio = sim::Studio::create({0.08, 0.15});
  auto b = studio->backends();
  const auto layouts = {giraffes(), sim::synthesize_layout("a dog, a cat, a car, a bird, a cup and a vase")};
  int trials = 0;
  int improved = 0;
  for (const auto& layout : layouts) {
    for (std::uint64_t seed = 0; seed < 100; ++seed, ++trials) {
      const auto parent = b.generator->generate(request(layout, seed));
      const auto child = b.refiner->refine({parent, "p", refine_seed(seed, 1, 0), 0.5, 0.0});
      const double ps = *object_score(parent, layout, *b.embedder);
      const double cs = *object_score(child, layout, *b.embedder);
      EXPECT_GE(cs, ps) << "seed " << seed;
      improved += cs > ps;
    }
  }
  EXPECT_EQ(trials, 200);
  EXPECT_GT(improved, 0);
}

TEST(SimEmbedder, OracleExamples) {
  auto studio = sim::Studio::create();
  auto e = studio->backends().embedder;
  const Raster giraffe_crop(10, 10, sim::color_for_label("giraffe"));
  EXPECT_DOUBLE_EQ(similarity(e->embed_image(giraffe_crop), e->embed_text("giraffe")), 1.0);
  const Raster empty_crop(10, 10, sim::kBackground);
  EXPECT_LE(similarity(e->embed_image(empty_crop), e->embed_text("giraffe")), 0.1);
  EXPECT_DOUBLE_EQ(similarity(e->embed_text("giraffe"), e->embed_text("zebra")), 0.0);
  EXPECT_EQ(e->embed_text("giraffe").dim(), sim::kEmbeddingDim);
}

TEST(SimEmbedder, SimilarityStrictlyIncreasesWithCoverage) {
  auto studio = sim::Studio::create();
  auto e = studio->backends().embedder;
  const auto label = e->embed_text("a zebra");
  double previous = -2.0;
  for (int covered = 0; covered <= 100; ++covered) {
    Raster crop(10, 10, sim::kBackground);
    for (int i = 0; i < covered; ++i) crop.set(i % 10, i / 10, sim::color_for_label("zebra"));
    const double s = similarity(e->embed_image(crop), label);
    EXPECT_GT(s, previous);
    previous = s;
  }
}

TEST(SimLayoutProvider, FourGiraffesAreFourValidBoxes) {
  const auto l = giraffes();
  ASSERT_EQ(l.size(), 4u);
  EXPECT_TRUE(validate_layout(l).empty());
  for (const auto& o : l.objects) EXPECT_EQ(o.label, "giraffe");
}

TEST(SimLayoutProvider, EmptyPromptIsRejected) {
  auto studio = sim::Studio::create();
  EXPECT_THROW(studio->backends().layout->propose(""), Error);
}

TEST(SimLayoutProvider, ResponseIsWrappedInProse) {
  auto studio = sim::Studio::create();
  const auto raw = studio->backends().layout->propose("Four traffic signs");
  EXPECT_EQ(raw.rfind("Here is", 0), 0u);
  EXPECT_EQ(parse_layout_response(raw).size(), 4u);
}

TEST(SynthesizeLayout, CountsAdjectivesAndRelations) {
  const auto l = sim::synthesize_layout("three red apples and a blue cup");
  ASSERT_EQ(l.size(), 4u);
  EXPECT_EQ(l.objects[0].description, "a red apple");
  EXPECT_EQ(l.objects[3].description, "a blue cup");
  EXPECT_TRUE(validate_layout(l).empty());

  const auto right = sim::synthesize_layout("a dog right of a cat");
  EXPECT_GT(right.objects[0].box.x_min, right.objects[1].box.x_max);
  const auto above = sim::synthesize_layout("a cup above a book");
  EXPECT_LT(above.objects[0].box.y_max, above.objects[1].box.y_min);
  const auto below = sim::synthesize_layout("a bowl below a vase");
  EXPECT_GT(below.objects[0].box.y_min, below.objects[1].box.y_max);
  EXPECT_TRUE(sim::synthesize_layout("a sunny day").empty());
}

}  // namespace
}  // namespace refocus
