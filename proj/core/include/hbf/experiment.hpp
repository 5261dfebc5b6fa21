#pragma once

#include "hbf/config.hpp"
#include "hbf/network.hpp"
#include "hbf/training.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace hbf {

/// Process exit codes of the hbf tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitRuntime = 1,
  kExitBadConfig = 2,
  kExitMissingModel = 3,
  kExitDisk = 4,
};

class MissingModelError : public Error {
 public:
  explicit MissingModelError(const std::string& what) : Error(what) {}
};

std::string tool_version();

/// `# config_hash=<16 hex> tool=hbf <version> trials=<n>`
std::string csv_comment(std::uint64_t config_hash, int trials);

/// Calls fn(i) for i in [0, count) on `threads` workers. Results must be
/// written to per-index slots; the first failure by index is rethrown.
void parallel_for(int count, int threads, const std::function<void(int)>& fn);

struct TrainedModels {
  NetworkParams covnet;
  NetworkParams channelnet;
  NetworkParams bfnet;
};

inline constexpr const char* kCovNetFile = "covnet.bfn";
inline constexpr const char* kChannelNetFile = "channelnet.bfn";
inline constexpr const char* kBfNetFile = "bfnet.bfn";

/// Loads the three checkpoints from `dir` and checks them against the
/// configured dimensions. Throws MissingModelError.
TrainedModels load_models(const std::filesystem::path& dir, const SystemDims& dims);

struct TrainReport {
  TrainedModels models;
  std::vector<EpochLog> covnet_log;
  std::vector<EpochLog> channelnet_log;
  std::vector<EpochLog> bfnet_log;
  Eigen::Index samples = 0;
  int skipped_scenarios = 0;
  std::vector<std::string> resumed;  // networks whose checkpoint was reused
};

/// Generates the datasets, trains the networks and writes checkpoints to
/// `model_dir` and loss CSVs to `output`. A network with a compatible
/// checkpoint already on disk is loaded instead of retrained.
TrainReport train_models(const ExperimentConfig& cfg, std::ostream* log = nullptr);

struct Summary {
  double mean = 0.0;
  double stderr_ = 0.0;
  int count = 0;  // finite samples
};
Summary summarize(const std::vector<double>& samples);

struct SweepTable {
  std::string variable;
  std::vector<double> values;
  std::vector<std::string> series;
  std::vector<std::vector<Summary>> cells;  // [value][series]
  int trials = 0;
  int failures = 0;  // method evaluations that raised a numerical error
};

/// Runs one of the sweep experiments (SE or NMSE kinds).
SweepTable run_sweep(const ExperimentConfig& cfg, const TrainedModels* models);
std::string sweep_csv(const SweepTable& table, std::uint64_t config_hash);

struct TimingRow {
  std::string method;
  double median_s = 0.0;
  int runs = 0;
  double ratio_mo = 0.0;  // MO median over this method's median; NaN without MO
};
std::vector<TimingRow> run_timing(const ExperimentConfig& cfg, const TrainedModels* models);
std::string timing_csv(const std::vector<TimingRow>& rows, std::uint64_t config_hash);

struct OnlineTraceRow {
  int t = 0;
  double drift_deg = 0.0;
  double eta = 0.0;
  double updated = 0.0;  // fraction of seeds that updated at t
  double nmse_dl = 0.0;
  double nmse_ref = 0.0;
  double nmse_frozen = 0.0;
};
struct OnlineTrace {
  std::vector<OnlineTraceRow> rows;
  int total_updates = 0;
  int reference_failures = 0;
};
OnlineTrace run_online_trace(const ExperimentConfig& cfg, const NetworkParams& channelnet);
std::string online_csv(const OnlineTrace& trace, std::uint64_t config_hash, int seeds);

std::string loss_csv(const std::vector<EpochLog>& log, std::uint64_t config_hash);

/// Entry points used by the CLI. Each writes its CSV under cfg.output and
/// returns an ExitCode; errors are reported on `err`.
int command_train(const ExperimentConfig& cfg, std::ostream& err);
int command_run(const ExperimentConfig& cfg, std::ostream& err);
int command_bench(const ExperimentConfig& cfg, std::ostream& err);
int command_online(const ExperimentConfig& cfg, std::ostream& err);

}  // namespace hbf
