#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace rvcalign {

/// Synthetic dataset settings.
struct DatasetConfig {
  int num_scenes = 20;
  std::uint64_t seed = 1;
  double room_min = 5.0;        // outer extent range, metres
  double room_max = 8.0;
  int notches_max = 2;          // rectangular corner cut-outs
  int partitions_max = 2;       // interior walls with a door gap
  int furniture_min = 3;
  int furniture_max = 7;
  std::string coverage_mode = "full";  // full | partial
  double partial_extent = 3.5;  // side of the walked window in partial mode
  double low_coverage_fraction = 0.0;
  double low_content_height = 0.5;
  bool symmetric = false;       // empty square room
  double camera_height = 1.3;
  double camera_pitch_deg = -25.0;
  double camera_spacing = 1.0;
  int camera_yaws = 4;
  int image_width = 64;
  int image_height = 48;
  double sample_spacing = 0.025;
  double floor_spacing = 0.05;
  double max_sample_height = 1.2;
  double label_alpha = 0.2;
  double label_flip_prob = 0.1;
  int max_observations_per_point = 4;
};

struct ExperimentConfig {
  // [general]
  std::uint64_t seed = 0;
  int threads = 0;
  std::string strategy = "viola";            // base | viola | viola_all | viola_gt
  std::string viewpoint_strategy = "viola";  // viola | step_back_0.5 | rvc_height
  std::string completer = "oracle";          // oracle | null | file
  std::string completer_dir;

  // [geometry]
  double rvc_height = 0.10;
  double floor_inlier_threshold = 0.02;
  int floor_iterations = 500;
  std::uint64_t floor_seed = 7;

  // [lidar]
  double noise_sigma = 0.0;
  double drop_prob = 0.0;
  std::uint64_t noise_seed = 11;
  double sensor_spacing = 0.5;
  int sensor_rays = 720;
  double sensor_range = 8.0;
  double map_voxel = 0.025;

  // [raycast]
  double grid_resolution = 0.025;
  double slab = 0.10;
  int camera_rays = 240;
  double hit_voxel = 0.05;
  double coverage_radius = 0.1;

  // [camera]
  double hfov_deg = 60.0;
  double vfov_deg = 45.0;
  double max_range = 6.0;

  // [registration]
  int k = 100;
  double angle_step_deg = 3.0;
  double resolution = 0.05;
  double blur_sigma = 1.5;
  double search_margin = 0.5;
  int max_iters = 200;
  double tol = 1e-6;
  double initial_step = 0.1;
  double shrink = 0.5;
  double armijo = 1e-4;

  // [decision]
  double theta_R_deg = 20.0;
  double theta_T = 0.3;
  double c = 20.0;
  double loss_unit = 0.001;

  // [completion]
  double vicinity = 0.15;
  double cluster_distance = 0.15;
  double frontier_length = 2.0;
  double frontier_spacing = 0.1;
  double back_step = 0.2;
  double rotation_step_deg = 10.0;
  double max_rotation_deg = 30.0;
  int max_back_steps = 10;
  double los_clearance = 0.05;
  double step_back_distance = 0.5;
  int baseline_views = 4;
  int render_width = 160;
  int render_height = 120;
  double splat_radius = 0.02;

  // [oracle]
  double oracle_pixel_noise = 0.01;
  double oracle_scale_sigma = 0.02;
  double oracle_ungrounded_sigma = 0.25;
  double oracle_min_context = 0.3;
  int oracle_stride = 2;

  // [metrics]
  double success_rot_deg = 10.0;
  double success_trans = 0.3;

  // [dataset]
  DatasetConfig dataset;

  /// Throws InvalidConfig when a value is out of range or an enum is unknown.
  void validate() const;
};

using ConfigValue = std::variant<double, std::int64_t, bool, std::string>;

/// Parsed TOML subset: [section] headers, `key = value` with numbers, booleans
/// and basic strings, `#` comments. Keys come back as "section.key".
std::map<std::string, ConfigValue> parse_toml(const std::string& text);

/// Applies "section.key" values; unknown keys and type mismatches throw InvalidConfig.
void apply_config(ExperimentConfig& cfg, const std::map<std::string, ConfigValue>& values);

/// Parses a command-line override value (string form) for the given key.
void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value);

ExperimentConfig load_config(const std::filesystem::path& path);

/// Every field with its current value, grouped by section.
std::string to_toml(const ExperimentConfig& cfg);

/// All "section.key" names, in serialisation order.
std::vector<std::string> config_keys();

}  // namespace rvcalign
