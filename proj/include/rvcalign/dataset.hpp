#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rvcalign/config.hpp"
#include "rvcalign/scene.hpp"
#include "rvcalign/semantics.hpp"
#include "rvcalign/types.hpp"

namespace rvcalign {

/// Everything one trial needs. The reconstruction and cameras are expressed in
/// the frame of the first camera; `gt` maps the true floor frame of that
/// reconstruction into the scene (map) frame.
struct TrialBundle {
  std::string scene_id;
  std::uint64_t seed = 0;
  Scene scene;
  PointCloud2 map;
  PointCloud3 recon;                 // unlabelled; labels come from `observations`
  std::vector<Pose3d> cameras;       // camera-to-reconstruction
  CameraModel camera;
  Pose2d gt;
  std::vector<SemanticObservation> observations;
  double removed_fraction = 0.0;     // share of low content dropped by the low-coverage knob
};

/// Deterministic scene layout for one seed: rectilinear floor with corner
/// notches, partition walls with door gaps, and furniture.
Scene generate_scene(const DatasetConfig& spec, std::uint64_t seed);

/// One complete trial. Trial `index` of a dataset draws from seed (spec.seed, index).
TrialBundle generate_trial(const ExperimentConfig& cfg, std::size_t index);

/// Throws InvalidSpec if the generator settings are inconsistent.
std::vector<TrialBundle> generate_dataset(const ExperimentConfig& cfg);

/// The true floor-to-scene pose for a reconstruction expressed in the frame of
/// `first_camera` (camera-to-scene).
Pose2d floor_to_scene(const Pose3d& first_camera);

void save_bundle(const std::filesystem::path& dir, const TrialBundle& bundle);
TrialBundle load_bundle(const std::filesystem::path& dir);

}  // namespace rvcalign
