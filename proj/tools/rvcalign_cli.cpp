#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "rvcalign/completion.hpp"
#include "rvcalign/config.hpp"
#include "rvcalign/dataset.hpp"
#include "rvcalign/geometry.hpp"
#include "rvcalign/io.hpp"
#include "rvcalign/pipeline.hpp"

using namespace rvcalign;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kBadConfig = 2;
constexpr int kDatasetError = 3;
constexpr int kInternalError = 4;

const std::vector<std::string> kStrategies = {"base", "viola", "viola_all", "viola_gt"};
const std::vector<std::string> kViewpoints = {"viola", "step_back_0.5", "rvc_height"};

/// Leftover "--section.key value" or "--section.key=value" arguments.
void apply_extras(ExperimentConfig& cfg, const std::vector<std::string>& extras) {
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& a = extras[i];
    if (a.rfind("--", 0) != 0) throw Error(ErrorCode::InvalidConfig, "unexpected argument " + a);
    std::string key = a.substr(2), value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key = key.substr(0, eq);
    } else {
      if (i + 1 >= extras.size()) throw Error(ErrorCode::InvalidConfig, "missing value for " + a);
      value = extras[++i];
    }
    apply_override(cfg, key, value);
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<double> split_numbers(const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::InvalidConfig, "not a number: " + item);
    }
  }
  return out;
}

int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidConfig: return kBadConfig;
    case ErrorCode::InvalidSpec:
    case ErrorCode::IoError:
    case ErrorCode::InsufficientFloorPoints:
    case ErrorCode::SensorOutsideScene:
    case ErrorCode::EmptyCloud:
    case ErrorCode::EmptySlab: return kDatasetError;
    default: return kInternalError;
  }
}

std::vector<TrialBundle> load_or_generate(const ExperimentConfig& cfg, const std::string& bundles) {
  if (bundles.empty()) return generate_dataset(cfg);
  std::vector<std::filesystem::path> dirs;
  for (const auto& e : std::filesystem::directory_iterator(bundles))
    if (e.is_directory()) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw Error(ErrorCode::IoError, "no trial bundles under " + bundles);
  std::vector<TrialBundle> out;
  for (const auto& d : dirs) out.push_back(load_bundle(d));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Registers reconstructions to 2D LiDAR floor maps at robot-vacuum height"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("-c,--config", config_path, "experiment config (TOML)")->check(CLI::ExistingFile);

  auto* print_config = app.add_subcommand("config", "print the effective configuration");

  auto* generate = app.add_subcommand("generate", "write synthetic trial bundles");
  std::string gen_out;
  generate->add_option("--out", gen_out, "output directory")->required();

  auto* simulate = app.add_subcommand("simulate", "simulate a LiDAR map from a scene file");
  std::string sim_scene, sim_out;
  simulate->add_option("--scene", sim_scene, "scene JSON")->required()->check(CLI::ExistingFile);
  simulate->add_option("--out", sim_out, "scan JSON to write")->required();

  auto* reg = app.add_subcommand("register", "register emulated hits to a LiDAR map");
  std::string reg_hits, reg_map, reg_out;
  reg->add_option("--hits", reg_hits, "hit points JSON")->required()->check(CLI::ExistingFile);
  reg->add_option("--map", reg_map, "LiDAR map JSON")->required()->check(CLI::ExistingFile);
  reg->add_option("--out", reg_out, "result JSON (stdout when omitted)");

  auto* complete = app.add_subcommand("complete", "complete a trial reconstruction at sensor height");
  std::string comp_bundle, comp_out;
  complete->add_option("--bundle", comp_bundle, "trial bundle directory")->required()->check(CLI::ExistingDirectory);
  complete->add_option("--out", comp_out, "completed cloud JSON (floor frame)")->required();

  auto* trial = app.add_subcommand("trial", "run one trial and print its records as CSV");
  std::string trial_bundle, trial_strategies, trial_viewpoints;
  int trial_index = -1;
  trial->add_option("--bundle", trial_bundle, "trial bundle directory")->check(CLI::ExistingDirectory);
  trial->add_option("--index", trial_index, "generate trial N from the dataset settings instead");
  trial->add_option("--strategies", trial_strategies, "comma-separated strategies (default: the configured one)");
  trial->add_option("--viewpoints", trial_viewpoints, "comma-separated viewpoint strategies");

  auto* bench = app.add_subcommand("benchmark", "run every trial of a dataset and write a report");
  std::string bench_out, bench_bundles, bench_strategies = "base,viola,viola_all,viola_gt", bench_viewpoints = "viola";
  bench->add_option("--out", bench_out, "report directory")->required();
  bench->add_option("--bundles", bench_bundles, "directory of trial bundles (generated when omitted)");
  bench->add_option("--strategies", bench_strategies, "comma-separated strategies");
  bench->add_option("--viewpoints", bench_viewpoints, "comma-separated viewpoint strategies");

  auto* report = app.add_subcommand("report", "rebuild summary and plot from a trial CSV");
  std::string rep_csv, rep_out;
  report->add_option("--csv", rep_csv, "trials.csv")->required()->check(CLI::ExistingFile);
  report->add_option("--out", rep_out, "report directory")->required();

  auto* grid = app.add_subcommand("grid-search", "score decision parameters on a dataset");
  std::string grid_c = "5,10,20,40", grid_r = "10,20,30", grid_t = "0.2,0.3,0.5", grid_out, grid_bundles;
  grid->add_option("--c", grid_c, "loss-gap thresholds");
  grid->add_option("--theta-r", grid_r, "rotation closeness thresholds, degrees");
  grid->add_option("--theta-t", grid_t, "translation closeness thresholds, metres");
  grid->add_option("--bundles", grid_bundles, "directory of trial bundles (generated when omitted)");
  grid->add_option("--out", grid_out, "CSV to write (stdout when omitted)");

  for (auto* sub : app.get_subcommands([](CLI::App*) { return true; })) sub->allow_extras();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kBadConfig;
  }

  try {
    ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    CLI::App* active = app.get_subcommands().front();
    apply_extras(cfg, active->remaining());
    cfg.validate();

    if (active == print_config) {
      std::cout << to_toml(cfg);
    } else if (active == generate) {
      const auto data = generate_dataset(cfg);
      for (const auto& b : data) save_bundle(std::filesystem::path(gen_out) / b.scene_id, b);
      std::cout << "wrote " << data.size() << " bundles to " << gen_out << "\n";
    } else if (active == simulate) {
      const Scene scene = io::load_scene(sim_scene);
      const RayFan fan{2.0 * std::numbers::pi, cfg.sensor_rays, cfg.sensor_range};
      const NoiseModel noise{cfg.noise_sigma, cfg.drop_prob, cfg.noise_seed};
      const PointCloud2 scan =
          simulate_lidar(scene, grid_sensors(scene, cfg.rvc_height, cfg.sensor_spacing, fan), cfg.rvc_height, noise);
      io::save_scan(sim_out, scan);
      std::cout << "wrote " << scan.size() << " points to " << sim_out << "\n";
    } else if (active == reg) {
      const RegistrationResult res = register_scan(io::load_scan(reg_hits), io::load_scan(reg_map), cfg);
      json cands = json::array();
      for (const auto& c : res.candidates)
        cands.push_back({{"pose", io::to_json(c.pose)}, {"loss", c.loss}, {"ncc", c.ncc_score}});
      const Decision d = should_complete(res, {cfg.theta_R_deg, cfg.theta_T, cfg.c, cfg.loss_unit});
      const json out{{"best", {{"pose", io::to_json(res.best.pose)}, {"loss", res.best.loss}}},
                     {"should_complete", d.complete},
                     {"loss_gap", d.gap},
                     {"iterations", res.iterations},
                     {"wall_time", res.wall_time},
                     {"candidates", cands}};
      if (reg_out.empty()) std::cout << out.dump(2) << "\n";
      else io::write_json(reg_out, out, 2);
    } else if (active == complete) {
      const TrialBundle b = load_bundle(comp_bundle);
      const PreparedTrial prep = prepare_trial(b, cfg);
      SceneSetOptions so;
      so.vicinity = cfg.vicinity;
      so.cluster_distance = cfg.cluster_distance;
      so.frontier_length = cfg.frontier_length;
      so.frontier_spacing = cfg.frontier_spacing;
      const SceneSets sets = compute_scene_sets(prep.cloud, prep.hits, cfg.rvc_height, so);
      const VirtualTrajectory traj = plan_completion_views(prep, sets, b.camera, cfg.viewpoint_strategy, cfg);
      auto completer = make_completer(b, prep, cfg);
      CompletionOptions co{cfg.render_width, cfg.render_height, cfg.splat_radius};
      const PointCloud3 done = complete_scene(prep.cloud, traj, *completer, b.camera, co);
      io::save_cloud(comp_out, done);
      std::cout << "views " << traj.views.size() << ", added " << done.size() - prep.cloud.size() << " points\n";
    } else if (active == trial) {
      if (trial_bundle.empty() == (trial_index < 0))
        throw Error(ErrorCode::InvalidConfig, "trial needs exactly one of --bundle or --index");
      const TrialBundle b =
          trial_bundle.empty() ? generate_trial(cfg, static_cast<std::size_t>(trial_index)) : load_bundle(trial_bundle);
      const auto strategies = trial_strategies.empty() ? std::vector<std::string>{cfg.strategy} : split_list(trial_strategies);
      const auto viewpoints =
          trial_viewpoints.empty() ? std::vector<std::string>{cfg.viewpoint_strategy} : split_list(trial_viewpoints);
      std::cout << to_csv(run_trial(b, cfg, strategies, viewpoints));
    } else if (active == bench) {
      const auto data = load_or_generate(cfg, bench_bundles);
      const Report rep = run_benchmark(data, cfg, split_list(bench_strategies), split_list(bench_viewpoints));
      emit_report(rep, bench_out, cfg.success_rot_deg, cfg.success_trans);
      for (const auto& [k, a] : rep.aggregates)
        std::printf("%-28s n=%zu SR=%.3f R_med=%.3f T_med=%.3f\n", k.c_str(), a.trials, a.SR, a.R_median, a.T_median);
    } else if (active == report) {
      std::ifstream in(rep_csv, std::ios::binary);
      std::stringstream ss;
      ss << in.rdbuf();
      const Report rep = Report::from_records(parse_csv(ss.str()));
      emit_report(rep, rep_out, cfg.success_rot_deg, cfg.success_trans);
    } else if (active == grid) {
      const auto data = load_or_generate(cfg, grid_bundles);
      std::vector<TrialAnalysis> analyses;
      for (const auto& b : data) analyses.push_back(analyse_trial(b, cfg, {"viola_all"}, {cfg.viewpoint_strategy}));
      std::ostringstream os;
      os << "c,theta_R_deg,theta_T,SR,activation_rate\n";
      for (const auto& g : grid_search(analyses, cfg, split_numbers(grid_c), split_numbers(grid_r), split_numbers(grid_t)))
        os << g.params.c << ',' << g.params.theta_R_deg << ',' << g.params.theta_T << ',' << g.SR << ','
           << g.activation_rate << "\n";
      if (grid_out.empty()) {
        std::cout << os.str();
      } else {
        std::ofstream out(grid_out);
        if (!(out << os.str())) throw Error(ErrorCode::IoError, "cannot write " + grid_out);
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDatasetError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternalError;
  }
  return kOk;
}
