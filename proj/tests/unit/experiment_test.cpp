#include "hbf/checkpoint.hpp"
#include "hbf/experiment.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace hbf {
namespace {

namespace fs = std::filesystem;

ExperimentConfig small_sweep(const fs::path& out, const std::string& methods) {
  const std::string text =
      "[experiment]\nkind = se_vs_snr\ndesk_scale = true\ntrials = 2\nseed = 5\noutput = " +
      out.string() +
      "\n[dims]\nn_t = 8\nn_r = 2\nn_rf = 2\nn_s = 1\n"
      "[scenario]\nclusters = 2\nrays_per_cluster = 3\ncovariance_realizations = 40\n"
      "[dataset]\nscenarios = 2\n"
      "[solver]\nmax_outer = 4\n"
      "[methods]\nlist = " +
      methods + "\n";
  return parse_experiment(IniDocument::parse(text, "sweep.ini"));
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

TEST(Summarize, MeanAndStandardError) {
  const Summary s = summarize({1.0, 2.0, 3.0, std::numeric_limits<double>::quiet_NaN()});
  EXPECT_EQ(s.count, 3);
  EXPECT_DOUBLE_EQ(s.mean, 2.0);
  EXPECT_NEAR(s.stderr_, 1.0 / std::sqrt(3.0), 1e-15);
  EXPECT_TRUE(std::isnan(summarize({}).mean));
  EXPECT_EQ(summarize({4.0}).stderr_, 0.0);
}

TEST(ParallelFor, CoversEveryIndexOnce) {
  for (int threads : {1, 3}) {
    std::vector<std::atomic<int>> hits(50);
    parallel_for(50, threads, [&](int i) { hits[static_cast<std::size_t>(i)]++; });
    for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  }
  EXPECT_THROW(parallel_for(5, 2, [](int i) {
                 if (i == 3) throw std::runtime_error("boom");
               }),
               std::runtime_error);
}

TEST(CsvComment, Format) {
  EXPECT_EQ(csv_comment(0xabcull, 7),
            "# config_hash=0000000000000abc tool=hbf " + tool_version() + " trials=7\n");
}

TEST(Sweep, CsvShapeForTwoMethods) {
  const ExperimentConfig cfg = small_sweep(fs::temp_directory_path() / "hbf_sweep_shape", "MO, SHB");
  const SweepTable table = run_sweep(cfg, nullptr);
  EXPECT_EQ(table.series, (std::vector<std::string>{"MO", "SHB"}));
  const auto lines = lines_of(sweep_csv(table, cfg.hash));
  ASSERT_EQ(lines.size(), 9u);  // comment, header, 7 SNR rows
  EXPECT_EQ(lines[0].rfind("# config_hash=", 0), 0u);
  EXPECT_EQ(lines[1], "snr_db,MO_mean,SHB_mean,MO_stderr,SHB_stderr");
  const double snrs[] = {-20, -15, -10, -5, 0, 5, 10};
  for (std::size_t i = 0; i < 7; ++i) {
    const std::string& row = lines[i + 2];
    EXPECT_EQ(std::count(row.begin(), row.end(), ','), 4) << row;
    EXPECT_DOUBLE_EQ(std::stod(row.substr(0, row.find(','))), snrs[i]);
    EXPECT_GT(table.cells[i][0].mean, 0.0);
    EXPECT_EQ(table.cells[i][0].count, 2);
  }
  // SE grows with SNR.
  EXPECT_GT(table.cells[6][0].mean, table.cells[0][0].mean);
}

TEST(Sweep, DeterministicForFixedSeed) {
  const ExperimentConfig cfg = small_sweep(fs::temp_directory_path() / "hbf_sweep_det", "MO, PE-HB");
  EXPECT_EQ(sweep_csv(run_sweep(cfg, nullptr), cfg.hash), sweep_csv(run_sweep(cfg, nullptr), cfg.hash));
}

TEST(Commands, MissingModelsExitCode) {
  const fs::path out = fs::temp_directory_path() / "hbf_missing_models";
  fs::remove_all(out);
  const ExperimentConfig cfg = small_sweep(out, "SDHB");
  std::ostringstream err;
  EXPECT_EQ(command_run(cfg, err), kExitMissingModel);
  EXPECT_NE(err.str().find("hbf train"), std::string::npos) << err.str();
  EXPECT_THROW(run_sweep(cfg, nullptr), MissingModelError);
}

TEST(Commands, UnwritableOutputExitCode) {
  const fs::path blocker = fs::temp_directory_path() / "hbf_blocker_file";
  std::ofstream(blocker) << "x";
  const ExperimentConfig cfg = small_sweep(blocker / "sub", "MO");
  std::ostringstream err;
  EXPECT_EQ(command_run(cfg, err), kExitDisk) << err.str();
  fs::remove(blocker);
}

TEST(Commands, RunWritesCsv) {
  const fs::path out = fs::temp_directory_path() / "hbf_run_writes";
  fs::remove_all(out);
  const ExperimentConfig cfg = small_sweep(out, "MO");
  std::ostringstream err;
  ASSERT_EQ(command_run(cfg, err), kExitOk) << err.str();
  EXPECT_TRUE(fs::exists(out / "se_vs_snr.csv"));
  fs::remove_all(out);
}

TEST(LoadModels, RejectsWrongDimensions) {
  const fs::path dir = fs::temp_directory_path() / "hbf_wrong_dims";
  fs::remove_all(dir);
  fs::create_directories(dir);
  ArchitectureOptions arch;
  arch.conv_filters = 2;
  arch.fc_units = {4};
  // Models for N_T = 8 loaded against N_T = 16.
  save_network(make_network(NetRole::kCovNet, {8, 8, 3}, 2 * (8 + 2), arch, 1), dir / kCovNetFile);
  save_network(make_network(NetRole::kChannelNet, {2, 8, 3}, 32, arch, 2), dir / kChannelNetFile);
  save_network(make_network(NetRole::kBfNet, {2, 8, 3}, 2 * (2 + 2), arch, 3), dir / kBfNetFile);
  EXPECT_NO_THROW(load_models(dir, SystemDims{8, 2, 2, 1}));
  EXPECT_THROW(load_models(dir, SystemDims{16, 2, 2, 1}), MissingModelError);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace hbf
