#pragma once

#include <filesystem>
#include <memory>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rvcalign/completion.hpp"
#include "rvcalign/config.hpp"
#include "rvcalign/dataset.hpp"
#include "rvcalign/lidar_sim.hpp"
#include "rvcalign/registration.hpp"

namespace rvcalign {

struct TrialRecord {
  std::string scene_id;
  std::uint64_t seed = 0;
  std::string strategy;
  std::string viewpoint_strategy;
  double coverage = 0.0;            // before any completion
  double coverage_completed = 0.0;  // equals coverage when nothing was added
  double rot_err = 0.0;             // degrees; NaN when the trial errored
  double trans_err = 0.0;           // metres; NaN when the trial errored
  bool success = false;
  bool completion_activated = false;
  double decision_gap = 0.0;
  double wall_time = 0.0;
  std::string error;                // error tag, empty when none

  /// Field-wise equality ignoring wall_time.
  bool same_outcome(const TrialRecord& o) const;
};

/// Registration of hits against the map with the configured NCC and optimiser settings.
RegistrationResult register_scan(const PointCloud2& hits, const PointCloud2& map, const ExperimentConfig& cfg);

/// Reconstruction moved into its own fitted floor frame, with everything the
/// later stages reuse.
struct PreparedTrial {
  PointCloud3 cloud;             // floor frame, fused labels
  Plane floor;                   // in reconstruction coordinates
  Pose3d recon_to_floor;
  std::vector<Pose3d> cameras;   // camera-to-floor
  std::vector<Pose2d> sensors;   // valid downprojected cameras
  RayFan fan;
  PointCloud2 hits;              // empty when the slab is empty
  OccupancyGrid2 occupancy;
};

PreparedTrial prepare_trial(const TrialBundle& bundle, const ExperimentConfig& cfg);

/// Plans the virtual views for one viewpoint strategy.
VirtualTrajectory plan_completion_views(const PreparedTrial& prep, const SceneSets& sets, const CameraModel& camera,
                                        const std::string& viewpoint_strategy, const ExperimentConfig& cfg);

std::unique_ptr<Completer> make_completer(const TrialBundle& bundle, const PreparedTrial& prep,
                                          const ExperimentConfig& cfg);

/// Everything a trial produces, shared across strategies: the base result and
/// one completed result per viewpoint strategy that was needed.
struct TrialAnalysis {
  TrialRecord base;
  std::optional<RegistrationResult> base_result;
  Decision decision;
  std::map<std::string, TrialRecord> completed;  // by viewpoint strategy
};

/// Runs the base registration and, when one of the requested strategies gates
/// completion on for this trial, completion followed by re-registration for
/// each viewpoint strategy.
TrialAnalysis analyse_trial(const TrialBundle& bundle, const ExperimentConfig& cfg,
                            const std::vector<std::string>& strategies,
                            const std::vector<std::string>& viewpoint_strategies);

/// Record for a strategy given an analysis; the gate decides between the base
/// and the completed outcome.
TrialRecord strategy_record(const TrialAnalysis& a, const std::string& strategy, const std::string& viewpoint_strategy,
                            const DecisionParams& params, const ExperimentConfig& cfg);

/// One record per (strategy, viewpoint strategy) pair; the base strategy gets a
/// single record with viewpoint strategy "none".
std::vector<TrialRecord> run_trial(const TrialBundle& bundle, const ExperimentConfig& cfg,
                                   const std::vector<std::string>& strategies,
                                   const std::vector<std::string>& viewpoint_strategies);

/// The configured strategy only.
TrialRecord run_trial(const TrialBundle& bundle, const ExperimentConfig& cfg);

struct Aggregate {
  std::size_t trials = 0;
  double R_mean = 0.0, R_median = 0.0, T_mean = 0.0, T_median = 0.0, SR = 0.0;
};

/// Means and medians use rows with finite errors; SR counts every row.
Aggregate aggregate(const std::vector<TrialRecord>& rows);

struct Report {
  std::vector<TrialRecord> records;  // sorted by (scene_id, seed, strategy, viewpoint)
  std::map<std::string, Aggregate> aggregates;  // key "strategy/viewpoint"

  static std::string key(const TrialRecord& r) { return r.strategy + "/" + r.viewpoint_strategy; }
  static Report from_records(std::vector<TrialRecord> records);
};

Report run_benchmark(const std::vector<TrialBundle>& dataset, const ExperimentConfig& cfg,
                     const std::vector<std::string>& strategies,
                     const std::vector<std::string>& viewpoint_strategies);

/// Writes trials.csv, summary.json and scatter.svg into `dir`. An empty report
/// is an error.
void emit_report(const Report& report, const std::filesystem::path& dir, double rot_bound_deg = 10.0,
                 double trans_bound = 0.3);

std::string to_csv(const std::vector<TrialRecord>& rows);
std::vector<TrialRecord> parse_csv(const std::string& text);
std::string to_svg(const std::vector<TrialRecord>& rows, double rot_bound_deg, double trans_bound);

struct GridPoint {
  DecisionParams params;
  double SR = 0.0;
  double activation_rate = 0.0;
};

/// Scores every combination of decision parameters for strategy=viola on a set
/// of analysed trials.
std::vector<GridPoint> grid_search(const std::vector<TrialAnalysis>& trials, const ExperimentConfig& cfg,
                                   const std::vector<double>& c_values, const std::vector<double>& theta_R_values,
                                   const std::vector<double>& theta_T_values);

}  // namespace rvcalign
