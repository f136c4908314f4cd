// Command-line front end: seeded exploration runs, multi-seed batches, and
// offline rendering of run artifacts.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "semex/config.hpp"
#include "semex/explorer.hpp"
#include "semex/harness.hpp"
#include "semex/io.hpp"
#include "semex/metrics.hpp"
#include "semex/sim_world.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 1;
constexpr int kExitRunFailure = 2;

std::string flag_name(const std::string& key) {
  std::string flag = "--" + key;
  std::replace(flag.begin(), flag.end(), '_', '-');
  return flag;
}

/// Registers one CLI flag per config key on the subcommand; values are
/// applied onto `cfg` after a possible config file, so flags win.
void add_config_flags(CLI::App* app, std::vector<std::pair<std::string, std::string>>* overrides) {
  for (const auto& [key, field] : semex::detail::config_fields()) {
    const std::string name = key;
    app->add_option_function<std::string>(
        flag_name(key),
        [overrides, name](const std::string& value) { overrides->emplace_back(name, value); },
        "config key " + key);
  }
}

semex::RunConfig build_config(const std::string& config_file,
                              const std::vector<std::pair<std::string, std::string>>& overrides) {
  semex::RunConfig cfg;
  if (!config_file.empty()) semex::load_config_file(cfg, config_file);
  for (const auto& [key, value] : overrides) semex::set_config_value(cfg, key, value);
  return cfg;
}

int do_run(const semex::RunConfig& cfg) {
  if (cfg.world.empty()) {
    std::cerr << "run: no world file given (--world)\n";
    return kExitConfigError;
  }
  const semex::GroundTruthWorld world = semex::load_world(cfg.world);
  const auto wall_start = std::chrono::steady_clock::now();
  const semex::RunResult result = semex::run_exploration(world, cfg);
  const double wall_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();

  semex::write_run_artifacts(cfg.out, result, world, cfg);
  // wall time goes to a sidecar so the CSV artifacts stay bit-identical per seed
  semex::write_text(cfg.out + "/timing.txt", "wall_time_s " + semex::fmt_double(wall_s) + "\n");

  const semex::RunSummary s = semex::summarize_run(result, world, cfg);
  std::cout << "status=" << s.status << " steps=" << s.steps << " replans=" << s.replans
            << " loops=" << s.loop_closures << " ate=" << semex::fmt_double(s.ate_rmse)
            << " map_error=" << semex::fmt_optional(s.map_err)
            << " mean_iou=" << semex::fmt_optional(s.mean_iou_value)
            << " coverage=" << semex::fmt_double(s.coverage_ratio) << "\n";
  if (result.status == semex::RunStatus::collision) {
    std::cerr << "run failed: " << result.diagnostic << "\n";
    return kExitRunFailure;
  }
  return kExitOk;
}

int do_batch(const semex::RunConfig& cfg, const std::vector<std::uint64_t>& seeds,
             std::vector<std::string> methods) {
  if (cfg.world.empty()) {
    std::cerr << "batch: no world file given (--world)\n";
    return kExitConfigError;
  }
  if (seeds.empty()) {
    std::cerr << "batch: empty seed list\n";
    return kExitConfigError;
  }
  if (methods.empty()) methods.push_back(cfg.method);
  for (const auto& m : methods) semex::parse_method(m);  // validate early

  const semex::GroundTruthWorld world = semex::load_world(cfg.world);
  const semex::BatchResult batch = semex::run_batch(world, cfg, seeds, methods);

  std::filesystem::create_directories(cfg.out);
  semex::write_text(cfg.out + "/runs.csv", semex::batch_runs_csv(batch));
  semex::write_text(cfg.out + "/aggregate.csv", semex::batch_aggregate_csv(batch));
  std::cout << semex::batch_aggregate_csv(batch);
  return kExitOk;
}

int do_render(const std::string& run_dir) {
  namespace fs = std::filesystem;
  const auto require = [&](const std::string& name) {
    const std::string path = run_dir + "/" + name;
    if (!fs::exists(path))
      throw std::runtime_error("render: missing artifact " + path +
                               " (is this a completed run directory?)");
    return path;
  };

  semex::RunConfig cfg;
  semex::load_config_file(cfg, require("config.txt"));
  const semex::GroundTruthWorld world = semex::load_world(cfg.world);

  std::ifstream steps_in(require("steps.csv"));
  const semex::RunLog log = semex::parse_steps_csv(steps_in);
  std::ifstream graph_in(require("posegraph.txt"));
  const semex::PoseGraph graph = semex::parse_pose_graph(graph_in);
  std::ifstream map_in(require("map.txt"));
  const semex::SemanticGrid grid = semex::parse_grid_text(
      map_in, world.width(), world.height(), world.resolution(), world.num_classes());

  const semex::LabelGrid labels =
      semex::classify_cells(grid, {cfg.free_threshold, cfg.occ_threshold});
  semex::write_ppm(semex::grid_snapshot(grid, world.palette()), run_dir + "/map.ppm");
  semex::write_ppm(semex::render_trajectory(labels, log), run_dir + "/trajectory.ppm");
  semex::write_ppm(semex::render_pose_graph(labels, graph), run_dir + "/posegraph.ppm");
  semex::write_ppm(semex::render_coverage(semex::coverage_curve(log, world.resolution())),
                   run_dir + "/coverage.ppm");
  std::cout << "rendered 4 images into " << run_dir << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"active metric-semantic exploration simulator"};
  app.require_subcommand(0, 1);

  std::string config_file;
  bool dump = false;
  app.add_option("--config", config_file, "config file (key = value lines)");
  app.add_flag("--dump-config", dump, "print the effective config and exit");

  std::vector<std::pair<std::string, std::string>> overrides;

  CLI::App* run_cmd = app.add_subcommand("run", "run one seeded exploration");
  run_cmd->add_option("--config", config_file, "config file (key = value lines)");
  add_config_flags(run_cmd, &overrides);

  CLI::App* batch_cmd = app.add_subcommand("batch", "run a seed batch and aggregate");
  batch_cmd->add_option("--config", config_file, "config file (key = value lines)");
  add_config_flags(batch_cmd, &overrides);
  std::string seeds_arg;
  std::string methods_arg;
  batch_cmd->add_option("--seeds", seeds_arg, "comma-separated seed list, e.g. 1,2,3");
  batch_cmd->add_option("--methods", methods_arg,
                        "comma-separated methods (default: the configured one)");

  CLI::App* render_cmd = app.add_subcommand("render", "render images from run artifacts");
  std::string run_dir;
  render_cmd->add_option("--run", run_dir, "run output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    semex::RunConfig cfg = build_config(config_file, overrides);
    if (dump) {
      std::cout << semex::dump_config(cfg);
      return kExitOk;
    }
    if (run_cmd->parsed()) return do_run(cfg);
    if (batch_cmd->parsed()) {
      std::vector<std::uint64_t> seeds;
      std::stringstream ss(seeds_arg);
      std::string tok;
      while (std::getline(ss, tok, ','))
        if (!tok.empty()) seeds.push_back(std::stoull(tok));
      std::vector<std::string> methods;
      std::stringstream ms(methods_arg);
      while (std::getline(ms, tok, ','))
        if (!tok.empty()) methods.push_back(tok);
      return do_batch(cfg, seeds, methods);
    }
    if (render_cmd->parsed()) return do_render(run_dir);
    std::cout << app.help();
    return kExitOk;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRunFailure;
  }
}
