#include "hbf/channel.hpp"
#include "hbf/combiner.hpp"
#include "hbf/encoding.hpp"
#include "hbf/network.hpp"
#include "hbf/pilot.hpp"
#include "hbf/precoder.hpp"
#include "hbf/rng.hpp"

#include <benchmark/benchmark.h>

namespace {

struct Scene {
  hbf::ChannelRealization channel;
  hbf::CMatrix covariance;
};

Scene make_scene(int n_t, int n_r) {
  hbf::Stream rng(7);
  const hbf::ScenarioParams sp = hbf::random_scenario(5, 10, hbf::deg_to_rad(5.0), rng);
  const hbf::ArrayGeometry tx{n_t, 0.5}, rx{n_r, 0.5};
  return {hbf::generate_channel(sp, tx, rx, 11), hbf::covariance_monte_carlo(sp, tx, n_r, 2000, 13).r};
}

void BM_MoPrecoder(benchmark::State& state) {
  const int n_t = static_cast<int>(state.range(0));
  const Scene s = make_scene(n_t, 4);
  hbf::AlternatingOptions opts;
  opts.seed = 5;
  for (auto _ : state) {
    benchmark::DoNotOptimize(hbf::alternating_hybrid_precoder(s.covariance, 2, 2, 1.0, opts));
  }
}
BENCHMARK(BM_MoPrecoder)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_MoCombiner(benchmark::State& state) {
  const Scene s = make_scene(16, 4);
  hbf::AlternatingOptions po;
  po.seed = 5;
  const auto f = hbf::alternating_hybrid_precoder(s.covariance, 2, 2, 1.0, po).beamformer;
  hbf::CombinerOptions co;
  co.seed = 6;
  for (auto _ : state) {
    benchmark::DoNotOptimize(hbf::alternating_hybrid_combiner(s.channel.h, f.rf, f.bb, 1.0, 1.0, 2, co));
  }
}
BENCHMARK(BM_MoCombiner)->Unit(benchmark::kMillisecond);

void BM_CnnInference(benchmark::State& state) {
  const auto role = static_cast<hbf::NetRole>(state.range(0));
  const int n_t = 16, n_r = 4;
  const hbf::InputShape shape = role == hbf::NetRole::kCovNet ? hbf::InputShape{n_t, n_t, 3}
                                                               : hbf::InputShape{n_r, n_t, 3};
  const int outputs = role == hbf::NetRole::kCovNet ? hbf::beamformer_label_size(n_t, 2, 2)
                      : role == hbf::NetRole::kBfNet ? hbf::beamformer_label_size(n_r, 2, 2)
                                                     : hbf::channel_label_size(n_r, n_t);
  const hbf::Network net(
      hbf::make_network(role, shape, outputs, hbf::default_architecture(role, true), 3));
  hbf::Tensor3 x(shape.rows, shape.cols, shape.channels);
  hbf::Stream rng(1);
  for (Eigen::Index i = 0; i < x.data().size(); ++i) x.data()(i) = rng.normal();
  for (auto _ : state) {
    benchmark::DoNotOptimize(net.infer(x));
  }
  state.SetLabel(hbf::to_string(role));
}
BENCHMARK(BM_CnnInference)->Arg(0)->Arg(1)->Arg(2)->Unit(benchmark::kMicrosecond);

void BM_Omp(benchmark::State& state) {
  const Scene s = make_scene(16, 4);
  const hbf::PilotConfig pilot = hbf::make_dft_pilot(16, 4, 16, 4);
  const hbf::CMatrix ybar = hbf::simulate_preamble(s.channel.h, pilot, 10.0, 3);
  hbf::OmpOptions opts;
  opts.sparsity = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(hbf::reference_estimator_omp(ybar, pilot, opts));
  }
}
BENCHMARK(BM_Omp)->Arg(5)->Arg(10)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
