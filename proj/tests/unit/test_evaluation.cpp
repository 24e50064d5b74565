#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "../support/synthetic_fixture.hpp"
#include "surfscatter/evaluation/metrics.hpp"
#include "surfscatter/evaluation/protocol.hpp"
#include "surfscatter/evaluation/scatter_map.hpp"
#include "surfscatter/report.hpp"
#include "test_util.hpp"

using namespace surfscatter;
using namespace surfscatter::evaluation;

namespace {

std::vector<SurfaceInfo> reference_catalog() {
  const std::vector<std::pair<std::string, SurfaceClass>> rows = {
      {"metal_copper", SurfaceClass::SemiSpecular}, {"metal_tin", SurfaceClass::SemiSpecular},
      {"whiteboard", SurfaceClass::SemiSpecular},   {"projector_screen", SurfaceClass::LowSpecular},
      {"tv", SurfaceClass::SemiSpecular},           {"linoleum", SurfaceClass::SemiSpecular},
      {"smooth_wood", SurfaceClass::LowSpecular},   {"rough_wood", SurfaceClass::LowSpecular},
      {"drywall", SurfaceClass::LowSpecular},       {"cardboard", SurfaceClass::LowSpecular},
      {"corkboard", SurfaceClass::LowSpecular},     {"styrofoam", SurfaceClass::LowSpecular},
      {"concrete_wall", SurfaceClass::LowSpecular}, {"fabric_pinboard", SurfaceClass::LowSpecular},
      {"carpet", SurfaceClass::LowSpecular}};
  std::vector<SurfaceInfo> out;
  for (const auto& [m, c] : rows) out.push_back({m, c});
  return out;
}

const std::vector<FeaturizedSurface>& small_surfaces() {
  static const auto surfaces = surfscatter::testing::reference_like_surfaces(42);
  return surfaces;
}

learners::ModelConfig small_forest() {
  auto c = learners::model_config_for("forest");
  std::get<learners::ForestConfig>(c.params).n_estimators = 15;
  return c;
}

}  // namespace

// ---------------------------------------------------------------------------
// Metrics

TEST(Metrics, ReferenceConfusionMatrix) {
  ConfusionMatrix m;
  m.counts = {{{150, 0}, {49, 130}}};
  const auto s = precision_recall_f1(m);
  EXPECT_DOUBLE_EQ(s[1].precision, 1.0);
  EXPECT_NEAR(s[1].recall, 0.726, 5e-4);
  EXPECT_NEAR(s[0].precision, 0.754, 5e-4);
  EXPECT_DOUBLE_EQ(s[0].recall, 1.0);
  EXPECT_NEAR(s[0].f1, 0.86, 5e-3);
  EXPECT_NEAR(s[1].f1, 0.84, 5e-3);
  EXPECT_NEAR(m.accuracy(), 280.0 / 329.0, 1e-15);
  EXPECT_EQ(s[0].support, 150u);
  EXPECT_EQ(s[1].support, 179u);
}

TEST(Metrics, DiagonalIsPerfect) {
  ConfusionMatrix m;
  m.counts = {{{7, 0}, {0, 3}}};
  for (const auto& c : precision_recall_f1(m)) {
    EXPECT_DOUBLE_EQ(c.precision, 1.0);
    EXPECT_DOUBLE_EQ(c.recall, 1.0);
    EXPECT_DOUBLE_EQ(c.f1, 1.0);
  }
}

TEST(Metrics, ZeroRowFlagsRecall) {
  ConfusionMatrix m;
  m.counts = {{{5, 2}, {0, 0}}};
  const auto s = precision_recall_f1(m);
  EXPECT_TRUE(s[1].recall_undefined);
  EXPECT_DOUBLE_EQ(s[1].recall, 0.0);
  EXPECT_FALSE(s[1].precision_undefined);
  EXPECT_DOUBLE_EQ(s[1].precision, 0.0);
  EXPECT_TRUE(s[1].f1_undefined);
  EXPECT_FALSE(s[0].recall_undefined);
}

TEST(Metrics, IdentitiesOnRandomMatrices) {
  Rng rng(3);
  std::uniform_int_distribution<std::size_t> count(0, 40);
  for (int trial = 0; trial < 500; ++trial) {
    ConfusionMatrix m;
    for (auto& row : m.counts)
      for (auto& v : row) v = count(rng);
    if (m.total() == 0) continue;
    EXPECT_DOUBLE_EQ(m.accuracy(), static_cast<double>(m.counts[0][0] + m.counts[1][1]) / static_cast<double>(m.total()));
    for (const auto& c : precision_recall_f1(m)) {
      if (c.precision + c.recall > 0.0) EXPECT_NEAR(c.f1, 2 * c.precision * c.recall / (c.precision + c.recall), 1e-15);
    }
  }
}

TEST(Metrics, ConfusionFromLabels) {
  const std::vector<SurfaceClass> t = {SurfaceClass::LowSpecular, SurfaceClass::SemiSpecular, SurfaceClass::SemiSpecular};
  const std::vector<SurfaceClass> p = {SurfaceClass::SemiSpecular, SurfaceClass::SemiSpecular, SurfaceClass::LowSpecular};
  const auto m = confusion_matrix(t, p);
  EXPECT_EQ(m.counts[0][1], 1u);
  EXPECT_EQ(m.counts[1][1], 1u);
  EXPECT_EQ(m.counts[1][0], 1u);
  EXPECT_EQ(m.row_sum(1), 2u);
}

// ---------------------------------------------------------------------------
// PR curves

TEST(PrCurve, PerfectRankingReachesPrecisionOne) {
  const std::vector<SurfaceClass> t = {SurfaceClass::LowSpecular, SurfaceClass::LowSpecular, SurfaceClass::SemiSpecular,
                                       SurfaceClass::SemiSpecular, SurfaceClass::SemiSpecular};
  const std::vector<double> s = {0.1, 0.2, 0.6, 0.7, 0.9};
  const auto curve = pr_curve(t, s);
  ASSERT_EQ(curve.points.size(), 5u);
  std::map<double, double> best;
  for (const auto& p : curve.points) best[p.recall] = std::max(best[p.recall], p.precision);
  for (const auto& [recall, precision] : best) EXPECT_DOUBLE_EQ(precision, 1.0) << recall;
  EXPECT_DOUBLE_EQ(average_precision(curve), 1.0);
  EXPECT_DOUBLE_EQ(curve.points.front().recall, 1.0);
  EXPECT_DOUBLE_EQ(curve.points.front().precision, 0.6);
}

TEST(PrCurve, IdenticalScoresGiveOnePoint) {
  const std::vector<SurfaceClass> t = {SurfaceClass::LowSpecular, SurfaceClass::SemiSpecular, SurfaceClass::LowSpecular,
                                       SurfaceClass::LowSpecular};
  const std::vector<double> s(4, 0.3);
  const auto curve = pr_curve(t, s);
  ASSERT_EQ(curve.points.size(), 1u);
  EXPECT_DOUBLE_EQ(curve.points[0].recall, 1.0);
  EXPECT_DOUBLE_EQ(curve.points[0].precision, 0.25);
}

TEST(PrCurve, RandomScoresGivePositiveRate) {
  Rng rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<SurfaceClass> t;
  std::vector<double> s;
  for (int i = 0; i < 2000; ++i) {
    t.push_back(i % 2 ? SurfaceClass::SemiSpecular : SurfaceClass::LowSpecular);
    s.push_back(u(rng));
  }
  const auto curve = pr_curve(t, s);
  EXPECT_NEAR(average_precision(curve), 0.5, 0.1);
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    EXPECT_LT(curve.points[i - 1].threshold, curve.points[i].threshold);
    EXPECT_GE(curve.points[i - 1].recall, curve.points[i].recall);
  }
}

TEST(PrCurve, Errors) {
  const std::vector<SurfaceClass> one = {SurfaceClass::SemiSpecular, SurfaceClass::SemiSpecular};
  EXPECT_SURF_ERROR(pr_curve(one, std::vector<double>{0.1, 0.2}), SingleClassLabels);
  const std::vector<SurfaceClass> two = {SurfaceClass::SemiSpecular, SurfaceClass::LowSpecular};
  EXPECT_SURF_ERROR(pr_curve(two, std::vector<double>{0.1, 1.2}), InvalidArgument);
  EXPECT_SURF_ERROR(pr_curve(two, std::vector<double>{0.1}), DimensionMismatch);
}

// ---------------------------------------------------------------------------
// Splits

TEST(Split, KElevenTakesEverySurface) {
  const auto catalog = reference_catalog();
  std::set<std::vector<std::string>> seen;
  for (std::uint64_t seed = 0; seed < 5; ++seed) seen.insert(select_surfaces(catalog, {kDefaultTestSurfaces, 11, seed, {}}).train);
  ASSERT_EQ(seen.size(), 1u);
  EXPECT_EQ(seen.begin()->size(), 11u);
}

TEST(Split, Errors) {
  const auto catalog = reference_catalog();
  EXPECT_SURF_ERROR(select_surfaces(catalog, {kDefaultTestSurfaces, 12, 0, {}}), KTooLarge);
  EXPECT_SURF_ERROR(select_surfaces(catalog, {{"metal_tin", "tv", "styrofoam", "velvet"}, 3, 0, {}}), UnknownTestSurface);
  EXPECT_SURF_ERROR(select_surfaces(catalog, {{"metal_tin", "tv", "whiteboard", "carpet"}, 3, 0, {}}), InvalidSplit);
  EXPECT_SURF_ERROR(select_surfaces(catalog, {kDefaultTestSurfaces, 0, 0, {}}), InvalidSplit);
  EXPECT_SURF_ERROR(select_surfaces(catalog, {kDefaultTestSurfaces, 3, 0, std::vector<std::string>{"tv"}}), InvalidSplit);
}

TEST(Split, FixedTrainingSurfaces) {
  const auto split = select_surfaces(reference_catalog(), {kDefaultTestSurfaces, 0, 0, kFixedTrainSurfaces});
  EXPECT_EQ(split.train.size(), 10u);
  EXPECT_EQ(split.test.size(), 4u);
  EXPECT_EQ(std::count(split.train.begin(), split.train.end(), "whiteboard"), 0);
}

TEST(Split, DisjointAndUniform) {
  const auto catalog = reference_catalog();
  std::map<std::string, int> hits;
  const int trials = 3000;
  for (int i = 0; i < trials; ++i) {
    const auto split = select_surfaces(catalog, {kDefaultTestSurfaces, 4, static_cast<std::uint64_t>(i), {}});
    ASSERT_EQ(split.train.size(), 4u);
    for (const auto& m : split.train) {
      EXPECT_EQ(std::count(split.test.begin(), split.test.end(), m), 0);
      ++hits[m];
    }
    EXPECT_TRUE(std::is_sorted(split.train.begin(), split.train.end(), [&](const auto& a, const auto& b) {
      auto pos = [&](const std::string& n) {
        return std::find_if(catalog.begin(), catalog.end(), [&](const auto& s) { return s.material == n; }) - catalog.begin();
      };
      return pos(a) < pos(b);
    }));
  }
  ASSERT_EQ(hits.size(), 11u);
  // Each pool surface is drawn with probability 4/11.
  for (const auto& [m, n] : hits) EXPECT_NEAR(n / static_cast<double>(trials), 4.0 / 11.0, 0.04) << m;
}

TEST(Split, PatchTablesFollowSurfaces) {
  const auto& surfaces = small_surfaces();
  const auto split = leave_surface_out_split(surfaces, {kDefaultTestSurfaces, 5, 9, {}});
  std::size_t expected_test = 0, expected_train = 0;
  for (const auto& s : surfaces) {
    if (std::count(split.surfaces.test.begin(), split.surfaces.test.end(), s.material)) expected_test += s.features.size();
    if (std::count(split.surfaces.train.begin(), split.surfaces.train.end(), s.material)) expected_train += s.features.size();
  }
  EXPECT_EQ(split.test.size(), expected_test);
  EXPECT_EQ(split.train.size(), expected_train);
  for (const auto& ref : split.test.provenance) {
    EXPECT_EQ(std::count(split.surfaces.train.begin(), split.surfaces.train.end(), ref.material), 0);
  }
}

// ---------------------------------------------------------------------------
// Evaluation

TEST(Evaluate, OracleAndConstantBaselines) {
  const auto& surfaces = small_surfaces();
  const SplitSpec spec{kDefaultTestSurfaces, 11, 0, {}};
  const auto results =
      evaluate_once(surfaces, spec, {learners::model_config_for("oracle"), learners::model_config_for("constant")});
  ASSERT_EQ(results.size(), 2u);
  EXPECT_DOUBLE_EQ(results[0].accuracy, 1.0);
  EXPECT_EQ(results[0].confusion.counts[0][1] + results[0].confusion.counts[1][0], 0u);

  const auto& c = results[1].confusion;
  const double low = static_cast<double>(c.row_sum(0));
  EXPECT_DOUBLE_EQ(results[1].accuracy, low / static_cast<double>(c.total()));
  EXPECT_EQ(c.column_sum(1), 0u);
  EXPECT_EQ(results[1].p_semi.size(), c.total());
}

TEST(Evaluate, ForestSeparatesSyntheticPanels) {
  const auto results = evaluate_once(small_surfaces(), {kDefaultTestSurfaces, 11, 1, {}}, {small_forest()});
  EXPECT_GE(results[0].accuracy, 0.95);
  EXPECT_EQ(results[0].confusion.row_sum(0) + results[0].confusion.row_sum(1), results[0].truth.size());
}

TEST(Evaluate, SingleClassTrainingPropagates) {
  // k = 1 draws a single training surface, hence a single class.
  EXPECT_SURF_ERROR(evaluate_once(small_surfaces(), {kDefaultTestSurfaces, 1, 0, {}}, {small_forest()}),
                    SingleClassTrainingSet);
}

TEST(Sweep, OracleSingleRepetitionHasZeroSpread) {
  SweepOptions o;
  // The pool holds eight low-specular panels, so k >= 9 always mixes classes.
  o.k_values = {9, 11};
  o.repeats = 1;
  const auto r = sweep(small_surfaces(), o, {learners::model_config_for("oracle")});
  ASSERT_EQ(r.cells.size(), 2u);
  for (const auto& c : r.cells) {
    EXPECT_DOUBLE_EQ(c.mean, c.max);
    EXPECT_DOUBLE_EQ(c.std_dev, 0.0);
    EXPECT_EQ(c.repetitions, 1u);
  }
}

TEST(Sweep, DeterministicAndSchedulingInvariant) {
  SweepOptions o;
  o.k_values = {9, 11};
  o.repeats = 3;
  o.master_seed = 5;
  const std::vector<learners::ModelConfig> models = {small_forest(), learners::model_config_for("constant")};
  const auto a = sweep(small_surfaces(), o, models);
  o.threads = 3;
  const auto b = sweep(small_surfaces(), o, models);
  EXPECT_EQ(report::to_json(a, {}).dump(), report::to_json(b, {}).dump());
  for (const auto& c : a.cells) {
    EXPECT_LE(c.min, c.mean);
    EXPECT_LE(c.mean, c.max);
    EXPECT_GE(c.std_dev, 0.0);
  }
  for (const auto& run : a.runs) {
    for (const auto& res : run.results) {
      EXPECT_EQ(res.confusion.total(), res.confusion.row_sum(0) + res.confusion.row_sum(1));
      EXPECT_TRUE(res.p_semi.empty());
    }
  }
}

TEST(Sweep, BadKFailsUpFront) {
  SweepOptions o;
  o.k_values = {3, 12};
  o.repeats = 1;
  EXPECT_SURF_ERROR(sweep(small_surfaces(), o, {learners::model_config_for("oracle")}), KTooLarge);
}

TEST(Sweep, RunIdentityInErrors) {
  SweepOptions o;
  o.k_values = {1};
  o.repeats = 1;
  o.single_class = SingleClassPolicy::Error;
  try {
    sweep(small_surfaces(), o, {small_forest()});
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingleClassTrainingSet);
    EXPECT_NE(std::string(e.what()).find("k=1 repetition=0"), std::string::npos) << e.what();
  }
}

TEST(Sweep, SingleClassDrawsPredictThePresentClass) {
  SweepOptions o;
  o.k_values = {1};
  o.repeats = 12;
  const auto report = sweep(small_surfaces(), o, {small_forest()});
  std::size_t degenerate = 0;
  for (const auto& run : report.runs) {
    const auto& r = run.results[0];
    degenerate += r.single_class_training;
    // One training surface is always a single class: all test patches get its label.
    EXPECT_TRUE(r.single_class_training);
    const std::size_t predicted_semi = r.confusion.column_sum(1);
    EXPECT_TRUE(predicted_semi == 0 || predicted_semi == r.confusion.total());
  }
  EXPECT_EQ(degenerate, 12u);
}

// ---------------------------------------------------------------------------
// Scatter maps

TEST(ScatterMap, OracleEchoesLabels) {
  const auto& surfaces = small_surfaces();
  const auto split = leave_surface_out_split(surfaces, {kDefaultTestSurfaces, 11, 0, {}});
  const auto oracle = learners::train_model(learners::model_config_for("oracle"), split.train.rows, split.train.label_indices(), 0);
  const auto map = build_scatter_map(surfaces, oracle);
  std::size_t patches = 0;
  for (const auto& s : surfaces) patches += s.grid.patches.size();
  ASSERT_EQ(map.records.size(), patches);
  for (const auto& r : map.records) {
    const auto it = std::find_if(surfaces.begin(), surfaces.end(), [&](const auto& s) { return s.material == r.material; });
    EXPECT_EQ(r.predicted, it->label);
  }
}

TEST(ScatterMap, EmptyGridGivesEmptyMap) {
  auto surfaces = surfscatter::testing::synthetic_surfaces({"tiny"}, {true}, 1, 0.05, 0.05);
  FeaturizeOptions opts;
  opts.min_points = 1000;
  Dataset d;
  d.scans.push_back(generate_scan(surfscatter::testing::panel_spec("tiny", true, 1, 0.05, 0.05)));
  const auto empty = featurize_dataset(d, opts);
  ASSERT_TRUE(empty[0].features.empty());
  learners::Model oracle{"oracle", learners::BaselineModel{{true, SurfaceClass::LowSpecular}, 3}};
  EXPECT_TRUE(build_scatter_map(empty, oracle).records.empty());
  learners::Model narrow{"c", learners::BaselineModel{{false, SurfaceClass::LowSpecular}, 2}};
  EXPECT_SURF_ERROR(build_scatter_map(surfaces, narrow), DimensionMismatch);
}

// ---------------------------------------------------------------------------
// Report files

TEST(Reports, CsvHeadersAndConfigLine) {
  const nlohmann::json config = {{"master_seed", 3}};
  std::ostringstream pr;
  report::write_csv(pr, pr_curve(std::vector<SurfaceClass>{SurfaceClass::LowSpecular, SurfaceClass::SemiSpecular},
                                 std::vector<double>{0.25, 0.75}),
                    config);
  EXPECT_EQ(pr.str(), "# config: {\"master_seed\":3}\nthreshold,precision,recall\n0.25,0.5,1\n0.75,1,1\n");

  SweepReport r;
  r.cells.push_back({2, "forest", 0.9, 0.8, 0.7, 0.05, 50});
  std::ostringstream sw;
  report::write_csv(sw, r, config);
  EXPECT_NE(sw.str().find("k,model,max,mean,std,min,repetitions\n2,forest,0.9,0.8,0.05,0.7,50\n"), std::string::npos);

  ScatterMap map;
  map.records.push_back({"tv", 1, 2, Vec3(1.0, 0.5, -0.25), SurfaceClass::SemiSpecular, 0.875});
  std::ostringstream sm;
  report::write_csv(sm, map, config);
  EXPECT_NE(sm.str().find("material,grid_u,grid_v,x,y,z,class,p_semi\ntv,1,2,1,0.5,-0.25,semi,0.875\n"), std::string::npos);
}
