#include "rvcalign/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rvcalign/geometry.hpp"
#include "rvcalign/parallel.hpp"
#include "rvcalign/semantics.hpp"

namespace rvcalign {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool same_double(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

DecisionParams decision_params(const ExperimentConfig& cfg) {
  DecisionParams p;
  p.theta_R_deg = cfg.theta_R_deg;
  p.theta_T = cfg.theta_T;
  p.c = cfg.c;
  p.loss_unit = cfg.loss_unit;
  return p;
}

ViewPlanOptions view_options(const ExperimentConfig& cfg) {
  ViewPlanOptions o;
  o.back_step = cfg.back_step;
  o.rotation_step_deg = cfg.rotation_step_deg;
  o.max_rotation_deg = cfg.max_rotation_deg;
  o.max_back_steps = cfg.max_back_steps;
  o.rvc_height = cfg.rvc_height;
  o.los_clearance = cfg.los_clearance;
  return o;
}

void mark_failed(TrialRecord& r, const std::string& tag) {
  r.rot_err = std::numeric_limits<double>::quiet_NaN();
  r.trans_err = std::numeric_limits<double>::quiet_NaN();
  r.success = false;
  r.error = tag;
}

void score(TrialRecord& r, const Pose2d& pose, const Pose2d& gt, const ExperimentConfig& cfg) {
  const PoseError e = pose_error(pose, gt);
  r.rot_err = e.rot_deg;
  r.trans_err = e.trans_m;
  r.success = e.rot_deg < cfg.success_rot_deg && e.trans_m < cfg.success_trans;
  r.error.clear();
}

PointCloud2 emulate_hits(const PointCloud3& cloud, const PreparedTrial& prep, const ExperimentConfig& cfg,
                         OccupancyGrid2* grid) {
  RaycastOptions opts;
  opts.grid_resolution = cfg.grid_resolution;
  opts.slab = cfg.slab;
  try {
    return raycast_hits(cloud, cfg.rvc_height, prep.sensors, prep.fan, opts, grid);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::EmptySlab) throw;
    if (grid) *grid = OccupancyGrid2();
    return {};
  }
}

/// Completion with one viewpoint strategy, then re-registration. Planning
/// failures leave the base outcome in place, tagged.
TrialRecord complete_and_register(const TrialBundle& bundle, const PreparedTrial& prep, const TrialRecord& base,
                                  const std::string& viewpoint_strategy, const ExperimentConfig& cfg) {
  const auto t0 = Clock::now();
  TrialRecord rec = base;
  rec.viewpoint_strategy = viewpoint_strategy;
  try {
    SceneSetOptions so;
    so.vicinity = cfg.vicinity;
    so.cluster_distance = cfg.cluster_distance;
    so.frontier_length = cfg.frontier_length;
    so.frontier_spacing = cfg.frontier_spacing;
    const SceneSets sets = compute_scene_sets(prep.cloud, prep.hits, cfg.rvc_height, so);
    const VirtualTrajectory traj = plan_completion_views(prep, sets, bundle.camera, viewpoint_strategy, cfg);
    auto completer = make_completer(bundle, prep, cfg);
    CompletionOptions co;
    co.width = cfg.render_width;
    co.height = cfg.render_height;
    co.splat_radius = cfg.splat_radius;
    const PointCloud3 completed = complete_scene(prep.cloud, traj, *completer, bundle.camera, co);
    const PointCloud2 hits = emulate_hits(completed, prep, cfg, nullptr);
    rec.coverage_completed = hits.empty() ? 0.0 : coverage_metric(hits, bundle.map, bundle.gt, cfg.coverage_radius);
    const RegistrationResult res = register_scan(hits, bundle.map, cfg);
    score(rec, res.best.pose, bundle.gt, cfg);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NoMissingRegion || e.code() == ErrorCode::BoundaryNotVisible) {
      rec.error = to_string(e.code());
    } else {
      mark_failed(rec, to_string(e.code()));
    }
  }
  rec.wall_time = base.wall_time + seconds_since(t0);
  return rec;
}

bool gate(const std::string& strategy, const TrialAnalysis& a, const DecisionParams& params) {
  if (strategy == "base") return false;
  if (strategy == "viola_all") return true;
  if (strategy == "viola_gt") return !a.base.success;
  if (strategy == "viola") return a.base_result ? should_complete(*a.base_result, params).complete : true;
  throw Error(ErrorCode::InvalidConfig, "unknown strategy " + strategy);
}

}  // namespace

bool TrialRecord::same_outcome(const TrialRecord& o) const {
  return scene_id == o.scene_id && seed == o.seed && same_double(coverage, o.coverage) &&
         same_double(coverage_completed, o.coverage_completed) && same_double(rot_err, o.rot_err) &&
         same_double(trans_err, o.trans_err) && success == o.success &&
         completion_activated == o.completion_activated && same_double(decision_gap, o.decision_gap) &&
         error == o.error;
}

RegistrationResult register_scan(const PointCloud2& hits, const PointCloud2& map, const ExperimentConfig& cfg) {
  const PointCloud2 H = voxel_downsample(hits, cfg.hit_voxel);
  if (H.empty()) throw Error(ErrorCode::EmptySlab, "no emulated hits to register");
  NccOptions ncc;
  ncc.k = cfg.k;
  ncc.angle_step_deg = cfg.angle_step_deg;
  ncc.resolution = cfg.resolution;
  ncc.blur_sigma = cfg.blur_sigma;
  ncc.nms_rot_deg = 0.5 * cfg.theta_R_deg;
  ncc.nms_trans = 0.5 * cfg.theta_T;
  ncc.search_margin = cfg.search_margin;
  const ChamferIndex index(map);
  const auto inits = ncc_init(H, map, ncc);
  OptimizerOptions opt;
  opt.max_iters = cfg.max_iters;
  opt.tol = cfg.tol;
  opt.initial_step = cfg.initial_step;
  opt.shrink = cfg.shrink;
  opt.armijo = cfg.armijo;
  opt.threads = cfg.threads;
  return optimize_poses(H, index, inits, opt);
}

PreparedTrial prepare_trial(const TrialBundle& bundle, const ExperimentConfig& cfg) {
  PreparedTrial prep;
  const LabeledCloud fused = fuse_into_cloud(bundle.recon, bundle.observations, classes::kUnknown);
  FloorFitOptions fo;
  fo.inlier_threshold = cfg.floor_inlier_threshold;
  fo.iterations = cfg.floor_iterations;
  fo.seed = cfg.floor_seed;
  prep.floor = fit_floor_plane(fused.cloud, classes::kFloor, fo);
  prep.recon_to_floor = floor_frame(prep.floor);
  prep.cloud = transform(prep.recon_to_floor, fused.cloud);
  for (const auto& c : bundle.cameras) prep.cameras.push_back(prep.recon_to_floor * c);
  for (const auto& d : downproject_cameras(bundle.cameras, prep.floor, cfg.rvc_height))
    if (d.valid) prep.sensors.push_back(d.pose);
  prep.fan = RayFan{bundle.camera.hfov, cfg.camera_rays, bundle.camera.max_range};
  prep.hits = emulate_hits(prep.cloud, prep, cfg, &prep.occupancy);
  return prep;
}

VirtualTrajectory plan_completion_views(const PreparedTrial& prep, const SceneSets& sets, const CameraModel& camera,
                                        const std::string& viewpoint_strategy, const ExperimentConfig& cfg) {
  const ViewPlanOptions vo = view_options(cfg);
  const auto views = static_cast<std::size_t>(cfg.baseline_views);
  if (viewpoint_strategy == "viola") return plan_viewpoints(sets, prep.cameras, camera, prep.occupancy, vo);
  if (viewpoint_strategy == "step_back_0.5")
    return plan_step_back(sets, prep.cameras, camera, prep.occupancy, cfg.step_back_distance, views, vo);
  if (viewpoint_strategy == "rvc_height") return plan_rvc_height(sets, prep.cameras, camera, prep.occupancy, views, vo);
  throw Error(ErrorCode::InvalidConfig, "unknown viewpoint strategy " + viewpoint_strategy);
}

std::unique_ptr<Completer> make_completer(const TrialBundle& bundle, const PreparedTrial& prep,
                                          const ExperimentConfig& cfg) {
  if (cfg.completer == "null") return std::make_unique<NullCompleter>();
  if (cfg.completer == "file")
    return std::make_unique<FileCompleter>(std::filesystem::path(cfg.completer_dir) / bundle.scene_id,
                                           prep.recon_to_floor);
  OracleOptions o;
  o.pixel_noise = cfg.oracle_pixel_noise;
  o.scale_sigma = cfg.oracle_scale_sigma;
  o.ungrounded_sigma = cfg.oracle_ungrounded_sigma;
  o.min_context = cfg.oracle_min_context;
  o.pixel_stride = cfg.oracle_stride;
  o.seed = bundle.seed * 0x9e3779b97f4a7c15ULL + cfg.seed;
  return std::make_unique<OracleCompleter>(bundle.scene, bundle.gt, o);
}

TrialAnalysis analyse_trial(const TrialBundle& bundle, const ExperimentConfig& cfg,
                            const std::vector<std::string>& strategies,
                            const std::vector<std::string>& viewpoint_strategies) {
  const auto t0 = Clock::now();
  TrialAnalysis a;
  a.base.scene_id = bundle.scene_id;
  a.base.seed = bundle.seed;
  a.base.strategy = "base";
  a.base.viewpoint_strategy = "none";

  std::optional<PreparedTrial> prep;
  try {
    prep = prepare_trial(bundle, cfg);
    a.base.coverage = prep->hits.empty() ? 0.0 : coverage_metric(prep->hits, bundle.map, bundle.gt, cfg.coverage_radius);
    a.base.coverage_completed = a.base.coverage;
    a.base_result = register_scan(prep->hits, bundle.map, cfg);
    score(a.base, a.base_result->best.pose, bundle.gt, cfg);
  } catch (const Error& e) {
    mark_failed(a.base, to_string(e.code()));
  }
  const DecisionParams params = decision_params(cfg);
  if (a.base_result) {
    a.decision = should_complete(*a.base_result, params);
  } else {
    a.decision.complete = true;  // nothing to register: completion is the only way forward
  }
  a.base.decision_gap = a.decision.gap;
  a.base.wall_time = seconds_since(t0);
  if (!prep) return a;

  bool needed = false;
  for (const auto& s : strategies) needed = needed || gate(s, a, params);
  if (!needed) return a;
  for (const auto& vs : viewpoint_strategies)
    if (!a.completed.count(vs)) a.completed[vs] = complete_and_register(bundle, *prep, a.base, vs, cfg);
  return a;
}

TrialRecord strategy_record(const TrialAnalysis& a, const std::string& strategy, const std::string& viewpoint_strategy,
                            const DecisionParams& params, const ExperimentConfig& cfg) {
  (void)cfg;
  TrialRecord r;
  const bool on = gate(strategy, a, params);
  if (on) {
    const auto it = a.completed.find(viewpoint_strategy);
    // Without a prepared reconstruction there is nothing to complete.
    r = it != a.completed.end() ? it->second : a.base;
  } else {
    r = a.base;
  }
  r.completion_activated = on;
  r.decision_gap = a.base_result ? should_complete(*a.base_result, params).gap : 0.0;
  r.strategy = strategy;
  r.viewpoint_strategy = strategy == "base" ? "none" : viewpoint_strategy;
  return r;
}

std::vector<TrialRecord> run_trial(const TrialBundle& bundle, const ExperimentConfig& cfg,
                                   const std::vector<std::string>& strategies,
                                   const std::vector<std::string>& viewpoint_strategies) {
  const TrialAnalysis a = analyse_trial(bundle, cfg, strategies, viewpoint_strategies);
  const DecisionParams params = decision_params(cfg);
  std::vector<TrialRecord> out;
  for (const auto& s : strategies) {
    if (s == "base") {
      out.push_back(strategy_record(a, s, "none", params, cfg));
      continue;
    }
    for (const auto& vs : viewpoint_strategies) out.push_back(strategy_record(a, s, vs, params, cfg));
  }
  return out;
}

TrialRecord run_trial(const TrialBundle& bundle, const ExperimentConfig& cfg) {
  return run_trial(bundle, cfg, {cfg.strategy}, {cfg.viewpoint_strategy}).front();
}

Aggregate aggregate(const std::vector<TrialRecord>& rows) {
  Aggregate a;
  a.trials = rows.size();
  if (rows.empty()) return a;
  std::vector<double> R, T;
  std::size_t ok = 0;
  for (const auto& r : rows) {
    if (r.success) ++ok;
    if (std::isfinite(r.rot_err) && std::isfinite(r.trans_err)) {
      R.push_back(r.rot_err);
      T.push_back(r.trans_err);
    }
  }
  a.SR = static_cast<double>(ok) / static_cast<double>(rows.size());
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? std::numeric_limits<double>::quiet_NaN() : s / static_cast<double>(v.size());
  };
  auto median = [](std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  a.R_mean = mean(R);
  a.R_median = median(R);
  a.T_mean = mean(T);
  a.T_median = median(T);
  return a;
}

Report Report::from_records(std::vector<TrialRecord> records) {
  Report rep;
  std::stable_sort(records.begin(), records.end(), [](const TrialRecord& a, const TrialRecord& b) {
    return std::tie(a.scene_id, a.seed, a.strategy, a.viewpoint_strategy) <
           std::tie(b.scene_id, b.seed, b.strategy, b.viewpoint_strategy);
  });
  rep.records = std::move(records);
  std::map<std::string, std::vector<TrialRecord>> groups;
  for (const auto& r : rep.records) groups[key(r)].push_back(r);
  for (const auto& [k, rows] : groups) rep.aggregates[k] = aggregate(rows);
  return rep;
}

Report run_benchmark(const std::vector<TrialBundle>& dataset, const ExperimentConfig& cfg,
                     const std::vector<std::string>& strategies,
                     const std::vector<std::string>& viewpoint_strategies) {
  if (dataset.empty()) throw Error(ErrorCode::InvalidArgument, "empty dataset");
  std::vector<std::vector<TrialRecord>> slots(dataset.size());
  const int threads = cfg.threads > 0 ? cfg.threads : default_threads();
  ExperimentConfig inner = cfg;
  if (threads > 1) inner.threads = 1;  // parallel across trials, serial within
  parallel_for(dataset.size(), threads,
               [&](std::size_t i) { slots[i] = run_trial(dataset[i], inner, strategies, viewpoint_strategies); });
  std::vector<TrialRecord> all;
  for (auto& s : slots) all.insert(all.end(), s.begin(), s.end());
  return Report::from_records(std::move(all));
}

// ---------------------------------------------------------------------------
// Report files

namespace {

const char* kCsvHeader =
    "scene_id,seed,strategy,viewpoint_strategy,coverage,coverage_completed,rot_err,trans_err,success,"
    "completion_activated,decision_gap,wall_time,error";

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_num(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw Error(ErrorCode::IoError, "bad number '" + s + "' in CSV");
  return v;
}

std::vector<std::vector<std::string>> split_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(field);
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        row.push_back(field);
        rows.push_back(row);
      }
      row.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw Error(ErrorCode::IoError, "unterminated quoted CSV field");
  if (any || !field.empty()) {
    row.push_back(field);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

std::string to_csv(const std::vector<TrialRecord>& rows) {
  std::ostringstream os;
  os << kCsvHeader << "\r\n";
  for (const auto& r : rows) {
    os << csv_field(r.scene_id) << ',' << r.seed << ',' << csv_field(r.strategy) << ','
       << csv_field(r.viewpoint_strategy) << ',' << num(r.coverage) << ',' << num(r.coverage_completed) << ','
       << num(r.rot_err) << ',' << num(r.trans_err) << ',' << (r.success ? "true" : "false") << ','
       << (r.completion_activated ? "true" : "false") << ',' << num(r.decision_gap) << ',' << num(r.wall_time) << ','
       << csv_field(r.error) << "\r\n";
  }
  return os.str();
}

std::vector<TrialRecord> parse_csv(const std::string& text) {
  const auto rows = split_csv(text);
  if (rows.empty()) throw Error(ErrorCode::IoError, "empty CSV");
  std::string header;
  for (std::size_t i = 0; i < rows[0].size(); ++i) header += (i ? "," : "") + rows[0][i];
  if (header != kCsvHeader) throw Error(ErrorCode::IoError, "unexpected CSV header");
  std::vector<TrialRecord> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i];
    if (f.size() != 13) throw Error(ErrorCode::IoError, "CSV row " + std::to_string(i) + " has wrong field count");
    TrialRecord r;
    try {
      r.scene_id = f[0];
      r.seed = std::stoull(f[1]);
      r.strategy = f[2];
      r.viewpoint_strategy = f[3];
      r.coverage = parse_num(f[4]);
      r.coverage_completed = parse_num(f[5]);
      r.rot_err = parse_num(f[6]);
      r.trans_err = parse_num(f[7]);
      r.success = f[8] == "true";
      r.completion_activated = f[9] == "true";
      r.decision_gap = parse_num(f[10]);
      r.wall_time = parse_num(f[11]);
      r.error = f[12];
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::IoError, "CSV row " + std::to_string(i) + " is malformed");
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::string to_svg(const std::vector<TrialRecord>& rows, double rot_bound_deg, double trans_bound) {
  const double W = 960, H = 420, pad = 50, panel = (W - 3 * pad) / 2, ph = H - 2 * pad;
  const double rot_max = 4.0 * rot_bound_deg, trans_max = 4.0 * trans_bound;
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};
  std::map<std::string, std::string> colour;
  for (const auto& r : rows) {
    const std::string k = Report::key(r);
    if (!colour.count(k)) colour[k] = palette[colour.size() % std::size(palette)];
  }

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  auto draw_panel = [&](int idx, const char* title, double ymax, double bound, auto value) {
    const double x0 = pad + idx * (panel + pad), y0 = pad;
    os << "<rect x=\"" << x0 << "\" y=\"" << y0 << "\" width=\"" << panel << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    os << "<text x=\"" << x0 + panel / 2 << "\" y=\"" << y0 - 10 << "\" text-anchor=\"middle\">" << title
       << "</text>\n";
    os << "<text x=\"" << x0 + panel / 2 << "\" y=\"" << y0 + ph + 35 << "\" text-anchor=\"middle\">coverage</text>\n";
    for (const auto& r : rows) {
      double v = value(r);
      if (!std::isfinite(v)) v = ymax;
      v = std::clamp(v, 0.0, ymax);
      const double cx = x0 + std::clamp(r.coverage, 0.0, 1.0) * panel;
      const double cy = y0 + ph - v / ymax * ph;
      os << "<circle cx=\"" << cx << "\" cy=\"" << cy << "\" r=\"2.5\" fill=\"" << colour[Report::key(r)]
         << "\" fill-opacity=\"0.6\"/>\n";
    }
    const double by = y0 + ph - bound / ymax * ph;
    os << "<line x1=\"" << x0 << "\" y1=\"" << by << "\" x2=\"" << x0 + panel << "\" y2=\"" << by
       << "\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>\n";
  };
  draw_panel(0, "rotation error (deg)", rot_max, rot_bound_deg, [](const TrialRecord& r) { return r.rot_err; });
  draw_panel(1, "translation error (m)", trans_max, trans_bound, [](const TrialRecord& r) { return r.trans_err; });
  double ly = H - 12;
  double lx = pad;
  for (const auto& [k, c] : colour) {
    os << "<text x=\"" << lx << "\" y=\"" << ly << "\" fill=\"" << c << "\" font-size=\"11\">" << k << "</text>\n";
    lx += 140;
  }
  os << "</svg>\n";
  return os.str();
}

void emit_report(const Report& report, const std::filesystem::path& dir, double rot_bound_deg, double trans_bound) {
  if (report.records.empty() || report.aggregates.empty())
    throw Error(ErrorCode::IoError, "refusing to write an empty report");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string());
  auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + (dir / name).string());
    out << body;
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + (dir / name).string());
  };
  write("trials.csv", to_csv(report.records));

  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, a] : report.aggregates) {
    auto f = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    j[k] = {{"trials", a.trials}, {"R_mean", f(a.R_mean)}, {"R_median", f(a.R_median)},
            {"T_mean", f(a.T_mean)}, {"T_median", f(a.T_median)}, {"SR", a.SR}};
  }
  write("summary.json", j.dump(2) + "\n");
  write("scatter.svg", to_svg(report.records, rot_bound_deg, trans_bound));
}

std::vector<GridPoint> grid_search(const std::vector<TrialAnalysis>& trials, const ExperimentConfig& cfg,
                                   const std::vector<double>& c_values, const std::vector<double>& theta_R_values,
                                   const std::vector<double>& theta_T_values) {
  std::vector<GridPoint> out;
  if (trials.empty()) return out;
  for (double c : c_values)
    for (double tr : theta_R_values)
      for (double tt : theta_T_values) {
        GridPoint g;
        g.params = decision_params(cfg);
        g.params.c = c;
        g.params.theta_R_deg = tr;
        g.params.theta_T = tt;
        std::size_t ok = 0, on = 0;
        for (const auto& a : trials) {
          const TrialRecord r = strategy_record(a, "viola", cfg.viewpoint_strategy, g.params, cfg);
          ok += r.success;
          on += r.completion_activated;
        }
        g.SR = static_cast<double>(ok) / static_cast<double>(trials.size());
        g.activation_rate = static_cast<double>(on) / static_cast<double>(trials.size());
        out.push_back(g);
      }
  return out;
}

}  // namespace rvcalign
