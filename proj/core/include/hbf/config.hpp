#pragma once

#include "hbf/network.hpp"
#include "hbf/pipeline.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hbf {

/// Bad configuration. `line` is 0 when the problem is not tied to one line.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& source, int line, const std::string& message);
  int line() const { return line_; }

 private:
  int line_;
};

/// Flat `[section]` / `key = value` text. `#` and `;` start comments.
class IniDocument {
 public:
  struct Entry {
    std::string value;
    int line = 0;
  };

  static IniDocument parse(std::string_view text, std::string source = "<config>");
  static IniDocument load(const std::string& path);

  const std::string& source() const { return source_; }
  const Entry* find(const std::string& section, const std::string& key) const;
  void set(const std::string& section, const std::string& key, std::string value);
  std::vector<std::string> sections() const;
  std::vector<std::string> keys(const std::string& section) const;

  /// Sorted `section.key=value` lines; the input of the config hash.
  std::string canonical() const;

 private:
  std::string source_;
  std::map<std::string, std::map<std::string, Entry>> entries_;
};

std::uint64_t fnv1a64(std::string_view bytes);

enum class ExperimentKind {
  kSeVsSnr,
  kSeVsPilotSnr,
  kNmseVsPilotSnr,
  kAngleMismatch,
  kClusterSweep,
  kTiming,
  kOnlineTrace,
  kTrain
};

enum class Method { kMo, kSdhb, kShb, kPeHb, kFullyDigital, kFullyDigitalStat };

std::string to_string(ExperimentKind kind);
std::string to_string(Method method);
std::optional<ExperimentKind> experiment_kind_from_string(const std::string& name);
std::optional<Method> method_from_string(const std::string& name);

struct OnlineExperiment {
  OnlineConfig online;
  int steps = 40;
  double drift_start_deg = 2.0;
  double drift_end_deg = 20.0;
  int seeds = 20;
  double pilot_snr_db = 10.0;
  OmpOptions omp;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kSeVsSnr;
  int trials = 50;
  std::uint64_t seed = 1;
  std::string output = "results";
  int threads = 1;
  bool desk_scale = false;

  SystemDims dims;
  ScenarioConfig scenario;

  std::vector<double> grid;         // values of the swept variable
  double snr_db = 0.0;              // link SNR when it is not swept
  double pilot_snr_db = 10.0;       // test preamble SNR when it is not swept
  double covariance_snr_db = 20.0;  // corruption of the CCM fed to CovNet
  double channel_snr_db = 15.0;     // corruption of the channel fed to BFNet
  std::vector<Method> methods;

  std::string model_dir;  // checkpoints; defaults to `output`
  DatasetSpec dataset;
  TrainConfig train;
  ArchitectureOptions covnet_arch;
  ArchitectureOptions channelnet_arch;
  ArchitectureOptions bfnet_arch;
  bool save_datasets = false;

  OnlineExperiment online;

  std::uint64_t hash = 0;  // of the canonical document, after overrides
};

/// Builds a config from a parsed document. Paper-scale defaults apply unless
/// desk scale is requested by `desk_scale_override` or `[experiment] desk_scale`.
/// Unknown sections or keys and malformed values raise ConfigError with the line.
ExperimentConfig parse_experiment(const IniDocument& doc, bool desk_scale_override = false);

std::vector<double> parse_number_list(const std::string& text);

}  // namespace hbf
