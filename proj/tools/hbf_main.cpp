#include "hbf/config.hpp"
#include "hbf/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>

namespace {

struct CommonFlags {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  int threads = 0;
  bool desk_scale = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "experiment config (INI)")->required();
  cmd->add_option("--seed", f.seed, "override [experiment] seed");
  cmd->add_option("--out", f.out, "override the output directory");
  cmd->add_option("--threads", f.threads, "worker threads for trials")->check(CLI::PositiveNumber);
  cmd->add_flag("--desk-scale", f.desk_scale, "desk-scale defaults for dimensions, data and networks");
}

int dispatch(const std::string& command, const CommonFlags& f, CLI::App* cmd) {
  hbf::ExperimentConfig cfg;
  try {
    hbf::IniDocument doc = hbf::IniDocument::load(f.config);
    // Overrides go through the document so they reach the config hash.
    if (cmd->count("--seed") > 0) doc.set("experiment", "seed", std::to_string(f.seed));
    if (cmd->count("--out") > 0) doc.set("experiment", "output", f.out);
    if (cmd->count("--threads") > 0) doc.set("experiment", "threads", std::to_string(f.threads));
    cfg = hbf::parse_experiment(doc, f.desk_scale);
  } catch (const hbf::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return hbf::kExitBadConfig;
  }
  if (command == "train") return hbf::command_train(cfg, std::cerr);
  if (command == "bench") {
    cfg.kind = hbf::ExperimentKind::kTiming;
    return hbf::command_bench(cfg, std::cerr);
  }
  if (command == "online") {
    cfg.kind = hbf::ExperimentKind::kOnlineTrace;
    return hbf::command_online(cfg, std::cerr);
  }
  return hbf::command_run(cfg, std::cerr);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Statistical hybrid beamforming experiments"};
  app.set_version_flag("--version", "hbf " + hbf::tool_version());
  app.require_subcommand(1);

  CommonFlags train_f, run_f, bench_f, online_f;
  CLI::App* train = app.add_subcommand("train", "generate datasets and train the three networks");
  CLI::App* run = app.add_subcommand("run", "run the configured experiment and write its CSV");
  CLI::App* bench = app.add_subcommand("bench", "time each method on identical inputs");
  CLI::App* online = app.add_subcommand("online", "online adaptation trace under angular drift");
  add_common(train, train_f);
  add_common(run, run_f);
  add_common(bench, bench_f);
  add_common(online, online_f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : hbf::kExitBadConfig;
  }

  if (*train) return dispatch("train", train_f, train);
  if (*bench) return dispatch("bench", bench_f, bench);
  if (*online) return dispatch("online", online_f, online);
  return dispatch("run", run_f, run);
}
