#pragma once

#include <filesystem>
#include <vector>

#include <json.hpp>

#include "rvcalign/scene.hpp"
#include "rvcalign/semantics.hpp"
#include "rvcalign/types.hpp"

namespace rvcalign::io {

using nlohmann::json;

// JSON conversions. Parse failures throw IoError; scene invariants throw InvalidSpec.
json to_json(const Scene& scene);
Scene scene_from_json(const json& j);

json to_json(const PointCloud2& pc);
PointCloud2 cloud2_from_json(const json& j);

json to_json(const PointCloud3& pc);
PointCloud3 cloud3_from_json(const json& j);

json to_json(const Pose2d& p);
Pose2d pose2_from_json(const json& j);

json to_json(const Pose3d& p);
Pose3d pose3_from_json(const json& j);

json to_json(const SemanticObservation& o);
SemanticObservation observation_from_json(const json& j);

json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const json& j, int indent = -1);

Scene load_scene(const std::filesystem::path& path);
void save_scene(const std::filesystem::path& path, const Scene& scene);

PointCloud2 load_scan(const std::filesystem::path& path);
void save_scan(const std::filesystem::path& path, const PointCloud2& pc);

PointCloud3 load_cloud(const std::filesystem::path& path);
void save_cloud(const std::filesystem::path& path, const PointCloud3& pc);

/// One JSON record per line.
std::vector<SemanticObservation> load_observations(const std::filesystem::path& path);
void save_observations(const std::filesystem::path& path, const std::vector<SemanticObservation>& obs);

}  // namespace rvcalign::io
