#include "hbf/encoding.hpp"
#include "hbf/precoder.hpp"

#include "test_support.hpp"

#include <cmath>

namespace hbf {
namespace {

constexpr Complex kJ{0.0, 1.0};

TEST(BuildInput, PhaseAndMagnitudeChannels) {
  CMatrix m(1, 1);
  m(0, 0) = 2.0 * std::exp(kJ * (kPi / 3));
  const Tensor3 p = build_input(m, ThirdChannel::kPhase);
  EXPECT_NEAR(p.at(0, 0, 0), 1.0, 1e-15);
  EXPECT_NEAR(p.at(0, 0, 1), std::sqrt(3.0), 1e-15);
  EXPECT_NEAR(p.at(0, 0, 2), kPi / 3, 1e-15);
  const Tensor3 a = build_input(m, ThirdChannel::kMagnitude);
  EXPECT_NEAR(a.at(0, 0, 2), 2.0, 1e-15);
}

TEST(BuildInput, ZeroPhaseConvention) {
  const Tensor3 t = build_input(CMatrix::Zero(3, 2), ThirdChannel::kPhase);
  EXPECT_EQ(t.rows(), 3);
  EXPECT_EQ(t.cols(), 2);
  EXPECT_EQ(t.channels(), 3);
  EXPECT_EQ(t.data().cwiseAbs().maxCoeff(), 0.0);
}

TEST(BuildInput, RowMajorLayout) {
  CMatrix m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  const Tensor3 t = build_input(m, ThirdChannel::kMagnitude);
  EXPECT_EQ(t.at(1, 2, 0), 6.0);
  EXPECT_EQ(t.data()(1), 2.0);  // row 0, col 1 of the real channel
}

TEST(BeamformerLabel, Definition) {
  CMatrix rf(2, 1), bb(1, 1);
  rf << 1.0, kJ;
  bb << Complex(0.5, 0.5);
  const RVector z = build_label_beamformer(rf, bb);
  ASSERT_EQ(z.size(), 4);
  EXPECT_NEAR(z(0), 0.0, 1e-15);
  EXPECT_NEAR(z(1), kPi / 2, 1e-15);
  EXPECT_EQ(z(2), 0.5);
  EXPECT_EQ(z(3), 0.5);
}

TEST(BeamformerLabel, LengthAndRoundTrip) {
  for (int n : {4, 16}) {
    for (int n_rf : {2, 4}) {
      const int n_s = 2;
      const CMatrix rf = unvec(random_circle_point(static_cast<Eigen::Index>(n) * n_rf, 3), n, n_rf);
      CMatrix bb = test::random_complex(n_rf, n_s, 4);
      bb *= std::sqrt(2.0) / (rf * bb).norm();
      const RVector z = build_label_beamformer(rf, bb);
      EXPECT_EQ(z.size(), beamformer_label_size(n, n_rf, n_s));
      const HybridBeamformer back = reconstruct_beamformer_pair(z, n, n_rf, n_s, BeamformerRole::kPrecoder);
      EXPECT_LT((back.rf - rf).norm(), 1e-12);
      EXPECT_LT((back.bb - bb).norm(), 1e-12);
      EXPECT_TRUE(satisfies_constraints(back));
    }
  }
}

TEST(BeamformerLabel, ReconstructionNormalizesAnyPrecoder) {
  Stream rng(1);
  for (int i = 0; i < 50; ++i) {
    RVector z(2 * (8 + 4));
    for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = rng.uniform(-4, 4);
    const HybridBeamformer f = reconstruct_beamformer_pair(z, 8, 2, 2, BeamformerRole::kPrecoder);
    EXPECT_TRUE(satisfies_constraints(f));
    const HybridBeamformer w = reconstruct_beamformer_pair(z, 8, 2, 2, BeamformerRole::kCombiner);
    EXPECT_LT(unit_modulus_error(w.rf), 1e-12);
    EXPECT_EQ(w.role, BeamformerRole::kCombiner);
  }
}

TEST(BeamformerLabel, RejectsZeroProductAndBadLength) {
  RVector z = RVector::Zero(4);
  EXPECT_THROW(reconstruct_beamformer_pair(z, 2, 1, 1, BeamformerRole::kPrecoder),
               std::invalid_argument);
  EXPECT_THROW(reconstruct_beamformer_pair(RVector::Zero(5), 2, 1, 1, BeamformerRole::kPrecoder),
               std::invalid_argument);
}

TEST(ChannelLabel, DefinitionAndRoundTrip) {
  CMatrix h(1, 1);
  h << Complex(3.0, -4.0);
  const RVector z = build_label_channel(h);
  ASSERT_EQ(z.size(), 2);
  EXPECT_EQ(z(0), 3.0);
  EXPECT_EQ(z(1), -4.0);
  const CMatrix big = test::random_complex(4, 16, 2);
  EXPECT_EQ(build_label_channel(big).size(), channel_label_size(4, 16));
  EXPECT_TRUE(reconstruct_channel(build_label_channel(big), 4, 16) == big);
  EXPECT_EQ(reconstruct_channel(RVector::Zero(8), 2, 2).norm(), 0.0);
  EXPECT_THROW(reconstruct_channel(RVector::Zero(7), 2, 2), std::invalid_argument);
}

}  // namespace
}  // namespace hbf
