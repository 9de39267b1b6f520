#include "rvcalign/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "rvcalign/error.hpp"

namespace rvcalign {

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); }

using FieldRef = std::variant<double*, int*, std::uint64_t*, bool*, std::string*>;

struct Field {
  std::string key;
  FieldRef ref;
};

std::vector<Field> fields(ExperimentConfig& c) {
  DatasetConfig& d = c.dataset;
  return {
      {"general.seed", &c.seed},
      {"general.threads", &c.threads},
      {"general.strategy", &c.strategy},
      {"general.viewpoint_strategy", &c.viewpoint_strategy},
      {"general.completer", &c.completer},
      {"general.completer_dir", &c.completer_dir},
      {"geometry.rvc_height", &c.rvc_height},
      {"geometry.floor_inlier_threshold", &c.floor_inlier_threshold},
      {"geometry.floor_iterations", &c.floor_iterations},
      {"geometry.floor_seed", &c.floor_seed},
      {"lidar.noise_sigma", &c.noise_sigma},
      {"lidar.drop_prob", &c.drop_prob},
      {"lidar.noise_seed", &c.noise_seed},
      {"lidar.sensor_spacing", &c.sensor_spacing},
      {"lidar.sensor_rays", &c.sensor_rays},
      {"lidar.sensor_range", &c.sensor_range},
      {"lidar.map_voxel", &c.map_voxel},
      {"raycast.grid_resolution", &c.grid_resolution},
      {"raycast.slab", &c.slab},
      {"raycast.camera_rays", &c.camera_rays},
      {"raycast.hit_voxel", &c.hit_voxel},
      {"raycast.coverage_radius", &c.coverage_radius},
      {"camera.hfov_deg", &c.hfov_deg},
      {"camera.vfov_deg", &c.vfov_deg},
      {"camera.max_range", &c.max_range},
      {"registration.k", &c.k},
      {"registration.angle_step_deg", &c.angle_step_deg},
      {"registration.resolution", &c.resolution},
      {"registration.blur_sigma", &c.blur_sigma},
      {"registration.search_margin", &c.search_margin},
      {"registration.max_iters", &c.max_iters},
      {"registration.tol", &c.tol},
      {"registration.initial_step", &c.initial_step},
      {"registration.shrink", &c.shrink},
      {"registration.armijo", &c.armijo},
      {"decision.theta_R_deg", &c.theta_R_deg},
      {"decision.theta_T", &c.theta_T},
      {"decision.c", &c.c},
      {"decision.loss_unit", &c.loss_unit},
      {"completion.vicinity", &c.vicinity},
      {"completion.cluster_distance", &c.cluster_distance},
      {"completion.frontier_length", &c.frontier_length},
      {"completion.frontier_spacing", &c.frontier_spacing},
      {"completion.back_step", &c.back_step},
      {"completion.rotation_step_deg", &c.rotation_step_deg},
      {"completion.max_rotation_deg", &c.max_rotation_deg},
      {"completion.max_back_steps", &c.max_back_steps},
      {"completion.los_clearance", &c.los_clearance},
      {"completion.step_back_distance", &c.step_back_distance},
      {"completion.baseline_views", &c.baseline_views},
      {"completion.render_width", &c.render_width},
      {"completion.render_height", &c.render_height},
      {"completion.splat_radius", &c.splat_radius},
      {"oracle.pixel_noise", &c.oracle_pixel_noise},
      {"oracle.scale_sigma", &c.oracle_scale_sigma},
      {"oracle.ungrounded_sigma", &c.oracle_ungrounded_sigma},
      {"oracle.min_context", &c.oracle_min_context},
      {"oracle.stride", &c.oracle_stride},
      {"metrics.success_rot_deg", &c.success_rot_deg},
      {"metrics.success_trans", &c.success_trans},
      {"dataset.num_scenes", &d.num_scenes},
      {"dataset.seed", &d.seed},
      {"dataset.room_min", &d.room_min},
      {"dataset.room_max", &d.room_max},
      {"dataset.notches_max", &d.notches_max},
      {"dataset.partitions_max", &d.partitions_max},
      {"dataset.furniture_min", &d.furniture_min},
      {"dataset.furniture_max", &d.furniture_max},
      {"dataset.coverage_mode", &d.coverage_mode},
      {"dataset.partial_extent", &d.partial_extent},
      {"dataset.low_coverage_fraction", &d.low_coverage_fraction},
      {"dataset.low_content_height", &d.low_content_height},
      {"dataset.symmetric", &d.symmetric},
      {"dataset.camera_height", &d.camera_height},
      {"dataset.camera_pitch_deg", &d.camera_pitch_deg},
      {"dataset.camera_spacing", &d.camera_spacing},
      {"dataset.camera_yaws", &d.camera_yaws},
      {"dataset.image_width", &d.image_width},
      {"dataset.image_height", &d.image_height},
      {"dataset.sample_spacing", &d.sample_spacing},
      {"dataset.floor_spacing", &d.floor_spacing},
      {"dataset.max_sample_height", &d.max_sample_height},
      {"dataset.label_alpha", &d.label_alpha},
      {"dataset.label_flip_prob", &d.label_flip_prob},
      {"dataset.max_observations_per_point", &d.max_observations_per_point},
  };
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// Strips a trailing comment that is not inside a string.
std::string strip_comment(const std::string& s) {
  bool in_str = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) in_str = !in_str;
    if (s[i] == '#' && !in_str) return s.substr(0, i);
  }
  return s;
}

std::string unescape(const std::string& body, const std::string& where) {
  std::string out;
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (body[i] != '\\') {
      out += body[i];
      continue;
    }
    if (++i >= body.size()) bad(where + ": dangling escape");
    switch (body[i]) {
      case 'n': out += '\n'; break;
      case 't': out += '\t'; break;
      case '"': out += '"'; break;
      case '\\': out += '\\'; break;
      default: bad(where + ": unsupported escape");
    }
  }
  return out;
}

ConfigValue parse_value(const std::string& raw, const std::string& where) {
  const std::string v = trim(raw);
  if (v.empty()) bad(where + ": missing value");
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"') bad(where + ": unterminated string");
    return unescape(v.substr(1, v.size() - 2), where);
  }
  if (v == "true") return true;
  if (v == "false") return false;
  std::string num;
  for (char ch : v)
    if (ch != '_') num += ch;
  const bool is_float = num.find_first_of(".eE") != std::string::npos || num == "inf" || num == "nan";
  if (!is_float) {
    std::int64_t i = 0;
    const char* first = num.data() + (num.front() == '+' ? 1 : 0);
    const auto [ptr, ec] = std::from_chars(first, num.data() + num.size(), i);
    if (ec == std::errc() && ptr == num.data() + num.size()) return i;
    bad(where + ": cannot parse value '" + v + "'");
  }
  try {
    std::size_t used = 0;
    const double d = std::stod(num, &used);
    if (used != num.size()) bad(where + ": cannot parse value '" + v + "'");
    return d;
  } catch (const std::logic_error&) {
    bad(where + ": cannot parse value '" + v + "'");
  }
}

void assign(const Field& f, const ConfigValue& value) {
  const std::string& key = f.key;
  std::visit(
      [&](auto* target) {
        using T = std::remove_pointer_t<decltype(target)>;
        if constexpr (std::is_same_v<T, double>) {
          if (const auto* d = std::get_if<double>(&value)) *target = *d;
          else if (const auto* i = std::get_if<std::int64_t>(&value)) *target = static_cast<double>(*i);
          else bad(key + " expects a number");
        } else if constexpr (std::is_same_v<T, int>) {
          const auto* i = std::get_if<std::int64_t>(&value);
          if (!i) bad(key + " expects an integer");
          if (*i < std::numeric_limits<int>::min() || *i > std::numeric_limits<int>::max()) bad(key + " out of range");
          *target = static_cast<int>(*i);
        } else if constexpr (std::is_same_v<T, std::uint64_t>) {
          const auto* i = std::get_if<std::int64_t>(&value);
          if (!i || *i < 0) bad(key + " expects a non-negative integer");
          *target = static_cast<std::uint64_t>(*i);
        } else if constexpr (std::is_same_v<T, bool>) {
          const auto* b = std::get_if<bool>(&value);
          if (!b) bad(key + " expects true or false");
          *target = *b;
        } else {
          const auto* s = std::get_if<std::string>(&value);
          if (!s) bad(key + " expects a string");
          *target = *s;
        }
      },
      f.ref);
}

// Shortest text that parses back to the same double.
std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    if (ch == '\n') {
      out += "\\n";
      continue;
    }
    out += ch;
  }
  return out + "\"";
}

}  // namespace

void ExperimentConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) bad(std::string(name) + " must be positive");
  };
  if (strategy != "base" && strategy != "viola" && strategy != "viola_all" && strategy != "viola_gt")
    bad("unknown strategy '" + strategy + "'");
  if (viewpoint_strategy != "viola" && viewpoint_strategy != "step_back_0.5" && viewpoint_strategy != "rvc_height")
    bad("unknown viewpoint_strategy '" + viewpoint_strategy + "'");
  if (completer != "oracle" && completer != "null" && completer != "file") bad("unknown completer '" + completer + "'");
  if (completer == "file" && completer_dir.empty()) bad("completer = \"file\" needs completer_dir");
  positive(rvc_height, "rvc_height");
  positive(floor_inlier_threshold, "floor_inlier_threshold");
  if (floor_iterations < 1) bad("floor_iterations must be at least 1");
  if (!(noise_sigma >= 0.0)) bad("noise_sigma must be non-negative");
  if (!(drop_prob >= 0.0 && drop_prob < 1.0)) bad("drop_prob must be in [0, 1)");
  positive(sensor_spacing, "sensor_spacing");
  if (sensor_rays < 1 || camera_rays < 1) bad("ray counts must be at least 1");
  positive(sensor_range, "sensor_range");
  positive(map_voxel, "map_voxel");
  positive(grid_resolution, "grid_resolution");
  positive(slab, "slab");
  positive(hit_voxel, "hit_voxel");
  positive(coverage_radius, "coverage_radius");
  if (!(hfov_deg > 0 && hfov_deg < 180 && vfov_deg > 0 && vfov_deg < 180)) bad("fields of view must be in (0, 180)");
  positive(max_range, "max_range");
  if (k < 1) bad("k must be at least 1");
  positive(angle_step_deg, "angle_step_deg");
  positive(resolution, "resolution");
  if (!(blur_sigma >= 0.0)) bad("blur_sigma must be non-negative");
  if (!(search_margin >= 0.0)) bad("search_margin must be non-negative");
  if (max_iters < 0) bad("max_iters must be non-negative");
  positive(tol, "tol");
  positive(initial_step, "initial_step");
  if (!(shrink > 0.0 && shrink < 1.0)) bad("shrink must be in (0, 1)");
  if (!(armijo > 0.0 && armijo < 1.0)) bad("armijo must be in (0, 1)");
  positive(theta_R_deg, "theta_R_deg");
  positive(theta_T, "theta_T");
  positive(c, "c");
  positive(loss_unit, "loss_unit");
  positive(vicinity, "vicinity");
  positive(cluster_distance, "cluster_distance");
  positive(frontier_length, "frontier_length");
  positive(frontier_spacing, "frontier_spacing");
  positive(back_step, "back_step");
  positive(rotation_step_deg, "rotation_step_deg");
  if (!(max_rotation_deg >= 0.0)) bad("max_rotation_deg must be non-negative");
  if (max_back_steps < 0) bad("max_back_steps must be non-negative");
  if (!(los_clearance >= 0.0)) bad("los_clearance must be non-negative");
  positive(step_back_distance, "step_back_distance");
  if (baseline_views < 1) bad("baseline_views must be at least 1");
  if (render_width < 1 || render_height < 1) bad("render size must be positive");
  if (!(splat_radius >= 0.0)) bad("splat_radius must be non-negative");
  if (!(oracle_pixel_noise >= 0.0 && oracle_scale_sigma >= 0.0 && oracle_ungrounded_sigma >= 0.0))
    bad("oracle noise levels must be non-negative");
  if (!(oracle_min_context >= 0.0 && oracle_min_context <= 1.0)) bad("oracle.min_context must be in [0, 1]");
  if (oracle_stride < 1) bad("oracle.stride must be at least 1");
  positive(success_rot_deg, "success_rot_deg");
  positive(success_trans, "success_trans");

  const DatasetConfig& d = dataset;
  if (d.num_scenes < 1) bad("dataset.num_scenes must be at least 1");
  if (!(d.room_min >= 3.0 && d.room_max >= d.room_min)) bad("dataset room range must satisfy 3 <= min <= max");
  if (d.notches_max < 0 || d.partitions_max < 0) bad("dataset counts must be non-negative");
  if (d.furniture_min < 0 || d.furniture_max < d.furniture_min) bad("dataset furniture range is invalid");
  if (d.coverage_mode != "full" && d.coverage_mode != "partial")
    bad("unknown dataset.coverage_mode '" + d.coverage_mode + "'");
  positive(d.partial_extent, "dataset.partial_extent");
  if (!(d.low_coverage_fraction >= 0.0 && d.low_coverage_fraction <= 1.0))
    bad("dataset.low_coverage_fraction must be in [0, 1]");
  positive(d.low_content_height, "dataset.low_content_height");
  positive(d.camera_height, "dataset.camera_height");
  if (!(d.camera_pitch_deg > -80.0 && d.camera_pitch_deg < 80.0)) bad("dataset.camera_pitch_deg out of range");
  positive(d.camera_spacing, "dataset.camera_spacing");
  if (d.camera_yaws < 1) bad("dataset.camera_yaws must be at least 1");
  if (d.image_width < 4 || d.image_height < 4) bad("dataset image size too small");
  positive(d.sample_spacing, "dataset.sample_spacing");
  positive(d.floor_spacing, "dataset.floor_spacing");
  positive(d.max_sample_height, "dataset.max_sample_height");
  if (!(d.label_alpha >= 0.0 && d.label_alpha < 1.0)) bad("dataset.label_alpha must be in [0, 1)");
  if (!(d.label_flip_prob >= 0.0 && d.label_flip_prob <= 1.0)) bad("dataset.label_flip_prob must be in [0, 1]");
  if (d.max_observations_per_point < 1) bad("dataset.max_observations_per_point must be at least 1");
}

std::map<std::string, ConfigValue> parse_toml(const std::string& text) {
  std::map<std::string, ConfigValue> out;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = "line " + std::to_string(lineno);
    const std::string s = trim(strip_comment(line));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']' || s.size() < 3) bad(where + ": malformed section header");
      section = trim(s.substr(1, s.size() - 2));
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) bad(where + ": expected key = value");
    const std::string key = trim(s.substr(0, eq));
    if (key.empty()) bad(where + ": empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    if (out.count(full)) bad(where + ": duplicate key " + full);
    out[full] = parse_value(s.substr(eq + 1), where);
  }
  return out;
}

void apply_config(ExperimentConfig& cfg, const std::map<std::string, ConfigValue>& values) {
  auto fs = fields(cfg);
  for (const auto& [key, value] : values) {
    auto it = std::find_if(fs.begin(), fs.end(), [&](const Field& f) { return f.key == key; });
    if (it == fs.end()) bad("unknown config key " + key);
    assign(*it, value);
  }
}

void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  auto fs = fields(cfg);
  auto it = std::find_if(fs.begin(), fs.end(), [&](const Field& f) { return f.key == key; });
  if (it == fs.end()) bad("unknown config key " + key);
  // Strings may be given bare on the command line.
  if (std::holds_alternative<std::string*>(it->ref) && (value.empty() || value.front() != '"')) {
    *std::get<std::string*>(it->ref) = value;
    return;
  }
  assign(*it, parse_value(value, key));
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  ExperimentConfig cfg;
  apply_config(cfg, parse_toml(ss.str()));
  cfg.validate();
  return cfg;
}

std::string to_toml(const ExperimentConfig& cfg) {
  ExperimentConfig copy = cfg;
  std::ostringstream os;
  std::string section;
  for (const auto& f : fields(copy)) {
    const auto dot = f.key.find('.');
    const std::string sec = f.key.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) os << '\n';
      os << '[' << sec << "]\n";
      section = sec;
    }
    os << f.key.substr(dot + 1) << " = ";
    std::visit(
        [&](auto* v) {
          using T = std::remove_pointer_t<decltype(v)>;
          if constexpr (std::is_same_v<T, double>) os << format_double(*v);
          else if constexpr (std::is_same_v<T, bool>) os << (*v ? "true" : "false");
          else if constexpr (std::is_same_v<T, std::string>) os << quote(*v);
          else os << *v;
        },
        f.ref);
    os << '\n';
  }
  return os.str();
}

std::vector<std::string> config_keys() {
  ExperimentConfig c;
  std::vector<std::string> out;
  for (const auto& f : fields(c)) out.push_back(f.key);
  return out;
}

}  // namespace rvcalign
