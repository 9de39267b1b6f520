#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "rvcalign/dataset.hpp"
#include "rvcalign/geometry.hpp"
#include "rvcalign/io.hpp"
#include "rvcalign/pipeline.hpp"

using namespace rvcalign;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

TrialRecord record(std::string scene, std::string strategy, double r, double t, bool ok) {
  TrialRecord rec;
  rec.scene_id = std::move(scene);
  rec.seed = 3;
  rec.strategy = std::move(strategy);
  rec.viewpoint_strategy = rec.strategy == "base" ? "none" : "viola";
  rec.coverage = 0.4;
  rec.coverage_completed = 0.5;
  rec.rot_err = r;
  rec.trans_err = t;
  rec.success = ok;
  rec.decision_gap = 1.25;
  rec.wall_time = 0.5;
  return rec;
}

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.dataset.num_scenes = 3;
  cfg.dataset.seed = 42;
  cfg.k = 30;
  return cfg;
}

}  // namespace

// ---------------------------------------------------------------------------

TEST(Config, TomlRoundTrip) {
  ExperimentConfig cfg;
  cfg.k = 17;
  cfg.c = 7.5;
  cfg.strategy = "viola_gt";
  cfg.dataset.coverage_mode = "partial";
  cfg.dataset.symmetric = true;
  cfg.dataset.seed = 99;
  const std::string text = to_toml(cfg);
  ExperimentConfig back;
  apply_config(back, parse_toml(text));
  EXPECT_EQ(to_toml(back), text);
  EXPECT_EQ(back.k, 17);
  EXPECT_EQ(back.c, 7.5);
  EXPECT_EQ(back.dataset.coverage_mode, "partial");
  EXPECT_TRUE(back.dataset.symmetric);
}

TEST(Config, EveryKeyIsSerialised) {
  const std::string text = to_toml(ExperimentConfig{});
  const auto parsed = parse_toml(text);
  for (const auto& key : config_keys()) EXPECT_TRUE(parsed.count(key)) << key;
  EXPECT_EQ(parsed.size(), config_keys().size());
}

TEST(Config, ParsesCommentsAndSections) {
  const auto v = parse_toml("# top\n[registration]\nk = 12 # inline\n\n[general]\nstrategy = \"base\"\n");
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(std::get<std::int64_t>(v.at("registration.k")), 12);
  EXPECT_EQ(std::get<std::string>(v.at("general.strategy")), "base");
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  ExperimentConfig cfg;
  auto expect_invalid = [&](const std::string& text) {
    try {
      ExperimentConfig c;
      apply_config(c, parse_toml(text));
      c.validate();
      ADD_FAILURE() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::InvalidConfig) << text;
    }
  };
  expect_invalid("[registration]\nnope = 1\n");
  expect_invalid("[registration]\nk = \"many\"\n");
  expect_invalid("[registration]\nk = 0\n");
  expect_invalid("[general]\nstrategy = \"magic\"\n");
  expect_invalid("[decision]\nc = -1\n");
  expect_invalid("[registration\nk = 3\n");
}

TEST(Config, Overrides) {
  ExperimentConfig cfg;
  apply_override(cfg, "registration.k", "5");
  apply_override(cfg, "decision.theta_T", "0.25");
  apply_override(cfg, "dataset.symmetric", "true");
  apply_override(cfg, "general.viewpoint_strategy", "rvc_height");
  EXPECT_EQ(cfg.k, 5);
  EXPECT_EQ(cfg.theta_T, 0.25);
  EXPECT_TRUE(cfg.dataset.symmetric);
  EXPECT_EQ(cfg.viewpoint_strategy, "rvc_height");
  EXPECT_THROW(apply_override(cfg, "registration.k", "x"), Error);
  EXPECT_THROW(apply_override(cfg, "missing.key", "1"), Error);
}

TEST(Config, LoadFromFile) {
  const auto dir = temp_dir("rvcalign_cfg");
  {
    std::ofstream f(dir / "c.toml");
    f << "[lidar]\nnoise_sigma = 0.01\n";
  }
  EXPECT_EQ(load_config(dir / "c.toml").noise_sigma, 0.01);
  try {
    load_config(dir / "absent.toml");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IoError);
  }
  std::filesystem::remove_all(dir);
}

// ---------------------------------------------------------------------------

TEST(Io, RoundTrips) {
  const ExperimentConfig cfg = small_config();
  const Scene scene = generate_scene(cfg.dataset, 5);
  EXPECT_EQ(io::to_json(io::scene_from_json(io::to_json(scene))), io::to_json(scene));

  PointCloud3 pc;
  pc.points = {Vec3(0.1, 0.2, 0.3), Vec3(1.0 / 3.0, -2, 5)};
  pc.labels = std::vector<int>{1, 4};
  const PointCloud3 back = io::cloud3_from_json(io::to_json(pc));
  EXPECT_EQ(back.points, pc.points);
  EXPECT_EQ(back.labels, pc.labels);

  const Pose2d p(0.7, 1.0 / 3.0, -2.0);
  const Pose2d q = io::pose2_from_json(io::to_json(p));
  EXPECT_EQ(q.theta(), p.theta());
  EXPECT_EQ(q.translation(), p.translation());

  const Pose3d c(camera_rotation(0.3, -0.4, 0.1), Vec3(1, 2, 3));
  const Pose3d d = io::pose3_from_json(io::to_json(c));
  EXPECT_TRUE(d.rotation().isApprox(c.rotation(), 1e-15));
  EXPECT_EQ(d.translation(), c.translation());
}

TEST(Io, BadInputs) {
  const auto dir = temp_dir("rvcalign_io");
  {
    std::ofstream f(dir / "broken.json");
    f << "{ not json";
  }
  try {
    io::read_json(dir / "broken.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IoError);
  }
  io::json bad = io::to_json(generate_scene(small_config().dataset, 1));
  bad["floor_polygon"] = io::json::array({io::json::array({0, 0}), io::json::array({1, 0})});
  try {
    io::scene_from_json(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidSpec);
  }
  std::filesystem::remove_all(dir);
}

TEST(Dataset, Deterministic) {
  const ExperimentConfig cfg = small_config();
  const TrialBundle a = generate_trial(cfg, 1), b = generate_trial(cfg, 1), c = generate_trial(cfg, 2);
  EXPECT_EQ(a.recon.points, b.recon.points);
  EXPECT_EQ(a.map.points, b.map.points);
  EXPECT_EQ(a.gt.theta(), b.gt.theta());
  EXPECT_NE(a.seed, c.seed);
}

TEST(Dataset, GroundTruthMatchesFirstCamera) {
  const TrialBundle b = generate_trial(small_config(), 0);
  // The first camera sits at the reconstruction origin.
  EXPECT_NEAR(b.cameras.front().translation().norm(), 0.0, 1e-12);
  EXPECT_TRUE(b.cameras.front().rotation().isApprox(Eigen::Matrix3d::Identity(), 1e-12));
  b.scene.validate();
  EXPECT_FALSE(b.observations.empty());
}

TEST(Dataset, BundleSaveLoad) {
  const TrialBundle b = generate_trial(small_config(), 0);
  const auto dir = temp_dir("rvcalign_bundle");
  save_bundle(dir, b);
  const TrialBundle l = load_bundle(dir);
  EXPECT_EQ(l.scene_id, b.scene_id);
  EXPECT_EQ(l.seed, b.seed);
  EXPECT_EQ(l.recon.points, b.recon.points);
  EXPECT_EQ(l.map.points, b.map.points);
  EXPECT_EQ(l.observations.size(), b.observations.size());
  EXPECT_EQ(l.gt.theta(), b.gt.theta());
  std::filesystem::remove_all(dir);
}

TEST(Dataset, InconsistentSpecThrows) {
  ExperimentConfig cfg = small_config();
  cfg.dataset.furniture_min = 5;
  cfg.dataset.furniture_max = 2;
  try {
    generate_dataset(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_TRUE(e.code() == ErrorCode::InvalidSpec || e.code() == ErrorCode::InvalidConfig);
  }
}

namespace {

std::vector<double> coverages(const ExperimentConfig& cfg, std::size_t n) {
  std::vector<double> out;
  for (std::size_t i = 0; i < n; ++i) {
    const TrialBundle b = generate_trial(cfg, i);
    try {
      const PreparedTrial prep = prepare_trial(b, cfg);
      out.push_back(coverage_metric(prep.hits, b.map, b.gt, cfg.coverage_radius));
    } catch (const Error&) {
      out.push_back(0.0);
    }
  }
  return out;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
}

}  // namespace

TEST(Dataset, LowCoverageKnob) {
  ExperimentConfig cfg = small_config();
  const std::size_t n = 15;
  const auto full = coverages(cfg, n);
  const auto high = std::count_if(full.begin(), full.end(), [](double c) { return c >= 0.5; });
  EXPECT_GE(static_cast<double>(high), 0.9 * n);
  cfg.dataset.low_coverage_fraction = 0.8;
  EXPECT_LT(median(coverages(cfg, n)), median(full));
}

// ---------------------------------------------------------------------------

TEST(Trial, BaseSucceedsOnFullCoverage) {
  ExperimentConfig cfg = small_config();
  cfg.strategy = "base";
  const TrialBundle b = generate_trial(cfg, 0);
  const TrialRecord r = run_trial(b, cfg);
  EXPECT_EQ(r.viewpoint_strategy, "none");
  EXPECT_TRUE(r.error.empty()) << r.error;
  EXPECT_TRUE(r.success);
  EXPECT_LT(r.rot_err, 1.0);
  EXPECT_LT(r.trans_err, 0.05);
  EXPECT_FALSE(r.completion_activated);
  EXPECT_EQ(r.coverage, r.coverage_completed);
}

TEST(Trial, GatesAgreeWithTheirRules) {
  ExperimentConfig cfg = small_config();
  cfg.dataset.coverage_mode = "partial";
  cfg.dataset.partial_extent = 2.0;
  cfg.dataset.low_coverage_fraction = 0.9;
  const TrialBundle b = generate_trial(cfg, 1);
  const std::vector<std::string> strategies{"base", "viola", "viola_all", "viola_gt"};
  const TrialAnalysis a = analyse_trial(b, cfg, strategies, {"viola"});
  DecisionParams p;
  p.c = cfg.c;
  p.theta_R_deg = cfg.theta_R_deg;
  p.theta_T = cfg.theta_T;
  p.loss_unit = cfg.loss_unit;

  const TrialRecord base = strategy_record(a, "base", "none", p, cfg);
  const TrialRecord viola = strategy_record(a, "viola", "viola", p, cfg);
  const TrialRecord all = strategy_record(a, "viola_all", "viola", p, cfg);
  const TrialRecord gt = strategy_record(a, "viola_gt", "viola", p, cfg);

  EXPECT_FALSE(base.completion_activated);
  if (base.error.empty()) {
    EXPECT_EQ(all.completion_activated, true);
    EXPECT_EQ(gt.completion_activated, !base.success);
    EXPECT_EQ(viola.completion_activated, a.decision.complete);
  }
  // A strategy whose gate stays off reports the base outcome.
  for (const TrialRecord* r : {&viola, &gt})
    if (!r->completion_activated) {
      EXPECT_EQ(r->rot_err, base.rot_err);
      EXPECT_EQ(r->trans_err, base.trans_err);
      EXPECT_EQ(r->success, base.success);
    }
  // viola_gt never does worse than base.
  EXPECT_GE(static_cast<int>(gt.success), static_cast<int>(base.success));

  // Running strategies together gives the same records as running them alone.
  const auto together = run_trial(b, cfg, strategies, {"viola"});
  ASSERT_EQ(together.size(), 4u);
  for (const auto& r : together) {
    ExperimentConfig single = cfg;
    single.strategy = r.strategy;
    EXPECT_TRUE(run_trial(b, single).same_outcome(r)) << r.strategy;
  }
}

TEST(Trial, ErrorsAreFailures) {
  ExperimentConfig cfg = small_config();
  TrialBundle b = generate_trial(cfg, 0);
  for (auto& p : b.recon.points) p.z() += 50.0;  // nothing in the slab, floor far away
  b.observations.clear();
  cfg.strategy = "base";
  const TrialRecord r = run_trial(b, cfg);
  EXPECT_FALSE(r.error.empty());
  EXPECT_FALSE(r.success);
  EXPECT_TRUE(std::isnan(r.rot_err));
  EXPECT_TRUE(std::isnan(r.trans_err));
}

// ---------------------------------------------------------------------------

TEST(Report, AggregatesMatchRows) {
  const std::vector<TrialRecord> rows{record("a", "base", 1.0, 0.1, true), record("b", "base", 3.0, 0.3, false),
                                      record("c", "base", 20.0, 2.0, false),
                                      record("d", "base", std::nan(""), std::nan(""), false)};
  const Aggregate g = aggregate(rows);
  EXPECT_EQ(g.trials, 4u);
  EXPECT_DOUBLE_EQ(g.SR, 0.25);
  EXPECT_DOUBLE_EQ(g.R_mean, 8.0);
  EXPECT_DOUBLE_EQ(g.R_median, 3.0);
  EXPECT_NEAR(g.T_mean, 0.8, 1e-15);
  EXPECT_DOUBLE_EQ(g.T_median, 0.3);
}

TEST(Report, CsvRoundTripAndQuoting) {
  std::vector<TrialRecord> rows{record("plain", "base", 1.0 / 3.0, 0.1, true),
                                record("with,comma \"q\"", "viola", 2.0, 0.2, false)};
  rows[1].error = "BoundaryNotVisible";
  rows[1].completion_activated = true;
  rows.push_back(record("nan", "viola_all", std::nan(""), std::nan(""), false));
  const std::string csv = to_csv(rows);
  EXPECT_NE(csv.find("\r\n"), std::string::npos);
  EXPECT_NE(csv.find("\"with,comma \"\"q\"\"\""), std::string::npos);
  const auto back = parse_csv(csv);
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].scene_id, rows[i].scene_id);
    EXPECT_EQ(back[i].error, rows[i].error);
    EXPECT_EQ(back[i].completion_activated, rows[i].completion_activated);
    EXPECT_EQ(back[i].wall_time, rows[i].wall_time);
    if (std::isnan(rows[i].rot_err))
      EXPECT_TRUE(std::isnan(back[i].rot_err));
    else
      EXPECT_TRUE(back[i].same_outcome(rows[i]));
  }
}

TEST(Report, OrderIndependent) {
  std::vector<TrialRecord> rows;
  for (int i = 0; i < 30; ++i)
    for (const char* s : {"base", "viola"})
      rows.push_back(record("scene_" + std::to_string(i), s, i * 0.7, i * 0.02, i % 3 == 0));
  const Report a = Report::from_records(rows);
  std::mt19937 rng(4);
  std::shuffle(rows.begin(), rows.end(), rng);
  const Report b = Report::from_records(rows);
  EXPECT_EQ(to_csv(a.records), to_csv(b.records));
  ASSERT_EQ(a.aggregates.size(), 2u);
  for (const auto& [k, g] : a.aggregates) {
    EXPECT_EQ(g.SR, b.aggregates.at(k).SR);
    EXPECT_EQ(g.R_mean, b.aggregates.at(k).R_mean);
  }
}

TEST(Report, EmitFiles) {
  const auto dir = temp_dir("rvcalign_report");
  const Report r = Report::from_records({record("a", "base", 1.0, 0.1, true), record("a", "viola", 2.0, 0.2, true)});
  emit_report(r, dir);
  ASSERT_TRUE(std::filesystem::exists(dir / "trials.csv"));
  ASSERT_TRUE(std::filesystem::exists(dir / "summary.json"));
  ASSERT_TRUE(std::filesystem::exists(dir / "scatter.svg"));

  // The CSV recomputes to the summary.
  const auto rows = parse_csv(slurp(dir / "trials.csv"));
  const auto summary = io::read_json(dir / "summary.json");
  const Report again = Report::from_records(rows);
  for (const auto& [k, g] : again.aggregates) EXPECT_DOUBLE_EQ(summary.at(k).at("SR").get<double>(), g.SR) << k;

  const std::string svg = slurp(dir / "scatter.svg");
  std::size_t lines = 0;
  for (std::size_t pos = svg.find("<line"); pos != std::string::npos; pos = svg.find("<line", pos + 1)) ++lines;
  EXPECT_EQ(lines, 2u);
  try {
    emit_report(Report{}, dir);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IoError);
  }
  std::filesystem::remove_all(dir);
}
