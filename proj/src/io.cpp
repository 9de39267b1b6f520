#include "rvcalign/io.hpp"

#include <fstream>

namespace rvcalign::io {

namespace {

[[noreturn]] void fail(const std::string& what) { throw Error(ErrorCode::IoError, what); }

template <typename Fn>
auto guarded(const char* what, Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    fail(std::string(what) + ": " + e.what());
  }
}

json vec_json(const Vec2& v) { return json::array({v.x(), v.y()}); }
json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec2 vec2_of(const json& j) {
  if (!j.is_array() || j.size() != 2) fail("expected [x, y]");
  return Vec2(j[0].get<double>(), j[1].get<double>());
}

Vec3 vec3_of(const json& j) {
  if (!j.is_array() || j.size() != 3) fail("expected [x, y, z]");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

Polygon2 polygon_of(const json& j) {
  Polygon2 poly;
  for (const auto& p : j) poly.push_back(vec2_of(p));
  return poly;
}

json polygon_json(const Polygon2& poly) {
  json a = json::array();
  for (const auto& p : poly) a.push_back(vec_json(p));
  return a;
}

}  // namespace

json to_json(const Scene& scene) {
  json j;
  j["floor_polygon"] = polygon_json(scene.floor_polygon);
  j["wall_height"] = scene.wall_height;
  json table = json::object();
  for (const auto& [id, name] : scene.class_table) table[std::to_string(id)] = name;
  j["class_table"] = table;
  json obs = json::array();
  for (const auto& o : scene.obstacles) {
    const auto it = scene.class_table.find(o.class_id);
    obs.push_back({{"footprint", polygon_json(o.footprint)},
                   {"z_min", o.z_min},
                   {"z_max", o.z_max},
                   {"class", it != scene.class_table.end() ? json(it->second) : json(o.class_id)}});
  }
  j["obstacles"] = obs;
  return j;
}

Scene scene_from_json(const json& j) {
  Scene s = guarded("scene", [&] {
    Scene s;
    s.floor_polygon = polygon_of(j.at("floor_polygon"));
    if (j.contains("wall_height")) s.wall_height = j.at("wall_height").get<double>();
    if (j.contains("class_table")) {
      const json& t = j.at("class_table");
      if (t.is_object()) {
        for (const auto& [key, name] : t.items()) s.class_table[std::stoi(key)] = name.get<std::string>();
      } else {
        for (std::size_t i = 0; i < t.size(); ++i) s.class_table[static_cast<int>(i)] = t[i].get<std::string>();
      }
    } else {
      s.class_table = default_class_table();
    }
    for (const auto& o : j.value("obstacles", json::array())) {
      Obstacle ob;
      ob.footprint = polygon_of(o.at("footprint"));
      ob.z_min = o.at("z_min").get<double>();
      ob.z_max = o.at("z_max").get<double>();
      const json& c = o.at("class");
      ob.class_id = c.is_string() ? s.class_id(c.get<std::string>()) : c.get<int>();
      s.obstacles.push_back(std::move(ob));
    }
    return s;
  });
  s.validate();
  return s;
}

json to_json(const PointCloud2& pc) {
  json pts = json::array();
  for (const auto& p : pc.points) pts.push_back(vec_json(p));
  return {{"points", pts}};
}

PointCloud2 cloud2_from_json(const json& j) {
  return guarded("scan", [&] {
    PointCloud2 pc;
    for (const auto& p : j.at("points")) pc.points.push_back(vec2_of(p));
    if (!pc.all_finite()) fail("scan contains non-finite coordinates");
    return pc;
  });
}

json to_json(const PointCloud3& pc) {
  json pts = json::array();
  for (const auto& p : pc.points) pts.push_back(vec_json(p));
  json j{{"points", pts}};
  if (pc.labels) j["labels"] = *pc.labels;
  if (pc.colors) {
    json cols = json::array();
    for (const auto& c : *pc.colors) cols.push_back({c[0], c[1], c[2]});
    j["colors"] = cols;
  }
  return j;
}

PointCloud3 cloud3_from_json(const json& j) {
  return guarded("cloud", [&] {
    PointCloud3 pc;
    for (const auto& p : j.at("points")) pc.points.push_back(vec3_of(p));
    if (j.contains("labels")) pc.labels = j.at("labels").get<std::vector<int>>();
    if (j.contains("colors")) {
      pc.colors.emplace();
      for (const auto& c : j.at("colors")) {
        if (c.size() != 3) fail("colors must be [r, g, b]");
        pc.colors->push_back(Rgb(c[0].get<std::uint8_t>(), c[1].get<std::uint8_t>(), c[2].get<std::uint8_t>()));
      }
    }
    if (pc.labels && pc.labels->size() != pc.size()) fail("label count differs from point count");
    if (pc.colors && pc.colors->size() != pc.size()) fail("color count differs from point count");
    return pc;
  });
}

json to_json(const Pose2d& p) { return {{"theta", p.theta()}, {"t", vec_json(p.translation())}}; }

Pose2d pose2_from_json(const json& j) {
  return guarded("pose2", [&] { return Pose2d(j.at("theta").get<double>(), vec2_of(j.at("t"))); });
}

json to_json(const Pose3d& p) {
  json R = json::array();
  for (int r = 0; r < 3; ++r) R.push_back({p.rotation()(r, 0), p.rotation()(r, 1), p.rotation()(r, 2)});
  return {{"R", R}, {"t", vec_json(p.translation())}};
}

Pose3d pose3_from_json(const json& j) {
  return guarded("pose3", [&] {
    Matrix3<double> R;
    const json& rows = j.at("R");
    if (rows.size() != 3) fail("R must have 3 rows");
    for (int r = 0; r < 3; ++r) R.row(r) = vec3_of(rows[r]).transpose();
    return Pose3d(R, vec3_of(j.at("t")));
  });
}

json to_json(const SemanticObservation& o) {
  return {{"point", o.point_index}, {"frame", o.frame_index}, {"probs", o.dist.probs}, {"confidence", o.confidence}};
}

SemanticObservation observation_from_json(const json& j) {
  return guarded("observation", [&] {
    SemanticObservation o;
    o.point_index = j.at("point").get<std::size_t>();
    o.frame_index = j.at("frame").get<std::size_t>();
    o.dist.probs = j.at("probs").get<std::vector<double>>();
    o.confidence = j.at("confidence").get<double>();
    o.dist.validate();
    if (!(o.confidence >= 0.0 && o.confidence <= 1.0)) fail("confidence outside [0, 1]");
    return o;
  });
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& j, int indent) {
  std::ofstream out(path);
  if (!out) fail("cannot write " + path.string());
  out << j.dump(indent) << '\n';
  if (!out) fail("write failed for " + path.string());
}

Scene load_scene(const std::filesystem::path& path) { return scene_from_json(read_json(path)); }
void save_scene(const std::filesystem::path& path, const Scene& scene) { write_json(path, to_json(scene), 2); }

PointCloud2 load_scan(const std::filesystem::path& path) { return cloud2_from_json(read_json(path)); }
void save_scan(const std::filesystem::path& path, const PointCloud2& pc) { write_json(path, to_json(pc)); }

PointCloud3 load_cloud(const std::filesystem::path& path) { return cloud3_from_json(read_json(path)); }
void save_cloud(const std::filesystem::path& path, const PointCloud3& pc) { write_json(path, to_json(pc)); }

std::vector<SemanticObservation> load_observations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open " + path.string());
  std::vector<SemanticObservation> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(observation_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      fail(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      fail(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void save_observations(const std::filesystem::path& path, const std::vector<SemanticObservation>& obs) {
  std::ofstream out(path);
  if (!out) fail("cannot write " + path.string());
  for (const auto& o : obs) out << to_json(o).dump() << '\n';
  if (!out) fail("write failed for " + path.string());
}

}  // namespace rvcalign::io
