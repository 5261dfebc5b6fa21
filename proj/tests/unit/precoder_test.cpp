#include "hbf/linalg.hpp"
#include "hbf/manifold.hpp"
#include "hbf/precoder.hpp"

#include "test_support.hpp"

#include <Eigen/QR>

#include <cmath>

namespace hbf {
namespace {

constexpr Complex kJ{0.0, 1.0};

CMatrix random_unit_modulus(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  return unvec(random_circle_point(rows * cols, seed), rows, cols);
}

CMatrix random_orthonormal(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  const Eigen::HouseholderQR<CMatrix> qr(test::random_complex(rows, cols, seed));
  return qr.householderQ() * CMatrix::Identity(rows, cols);
}

double frf_cost(const CVector& x, const CMatrix& f_bb, const CMatrix& f_opt) {
  return (f_opt - unvec(x, f_opt.rows(), f_bb.rows()) * f_bb).squaredNorm();
}

TEST(OptimalBeamformer, DiagonalCovariance) {
  RVector d(4);
  d << 4, 3, 2, 1;
  const CMatrix f = statistical_optimal_beamformer(d.cast<Complex>().asDiagonal(), 2);
  EXPECT_LT((f - CMatrix::Identity(4, 2)).norm(), 1e-12);
}

TEST(OptimalBeamformer, UnitColumnsAndPhaseConvention) {
  const CMatrix r = test::random_covariance(8, 1);
  const CMatrix f = statistical_optimal_beamformer(r, 3);
  EXPECT_NEAR(f.squaredNorm(), 3.0, 1e-12);
  for (int c = 0; c < 3; ++c) {
    Eigen::Index k = 0;
    f.col(c).cwiseAbs().maxCoeff(&k);
    EXPECT_NEAR(f(k, c).imag(), 0.0, 1e-12);
    EXPECT_GT(f(k, c).real(), 0.0);
  }
}

TEST(OptimalBeamformer, BeatsRandomOrthonormalPrecoders) {
  const CMatrix r = test::random_covariance(8, 2);
  const CMatrix f = statistical_optimal_beamformer(r, 2);
  const double best = (f.adjoint() * r * f).squaredNorm();
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const CMatrix g = random_orthonormal(8, 2, 100 + s);
    EXPECT_LE((g.adjoint() * r * g).squaredNorm(), best * (1 + 1e-12));
  }
}

TEST(OptimalBeamformer, RejectsTooManyStreams) {
  EXPECT_THROW(statistical_optimal_beamformer(CMatrix::Identity(4, 4), 5), std::invalid_argument);
}

TEST(PhaseExtraction, IdempotentOnManifold) {
  const CMatrix f = random_unit_modulus(8, 2, 3);
  EXPECT_LT((phase_extraction_precoder(f) - f).norm(), 1e-14);
}

TEST(PhaseExtraction, IgnoresMagnitude) {
  CMatrix f(1, 1);
  f(0, 0) = 3.7 * std::exp(kJ * (kPi / 4));
  EXPECT_NEAR(std::abs(phase_extraction_precoder(f)(0, 0) - std::exp(kJ * (kPi / 4))), 0.0, 1e-15);
  EXPECT_EQ(phase_extraction_precoder(CMatrix::Zero(1, 1))(0, 0), Complex(1.0, 0.0));
}

TEST(PhaseExtraction, ManifoldSolverFitsCloser) {
  int wins = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const CMatrix r = test::random_covariance(16, s);
    const CMatrix f_opt = statistical_optimal_beamformer(r, 2);
    const CMatrix pe = phase_extraction_precoder(f_opt);
    AlternatingOptions opts;
    opts.seed = s;
    const PrecoderSolution mo = alternating_hybrid_precoder(r, 2, 2, 1.0, opts);
    // Matched scaling: the best scalar multiple of each candidate.
    const auto fit = [&](const CMatrix& g) {
      const Complex a = g.cwiseProduct(f_opt.conjugate()).sum() / g.squaredNorm();
      return (f_opt - std::conj(a) * g).norm();
    };
    const CMatrix mo_ls = mo.beamformer.rf * least_squares_baseband(mo.beamformer.rf, f_opt);
    if (fit(pe) >= (f_opt - mo_ls).norm() - 1e-12) ++wins;
  }
  EXPECT_GE(wins, 90);
}

TEST(FrfGradient, ZeroBasebandGivesZero) {
  const CVector x = random_circle_point(8, 1);
  EXPECT_EQ(euclidean_gradient_frf(x, CMatrix::Zero(2, 2), test::random_complex(4, 2, 2)).norm(), 0.0);
}

TEST(FrfGradient, VanishesAtExactFit) {
  const CMatrix f_rf = random_unit_modulus(4, 2, 3);
  const CMatrix f_bb = test::random_complex(2, 2, 4);
  EXPECT_LT(euclidean_gradient_frf(vec(f_rf), f_bb, f_rf * f_bb).norm(), 1e-12);
}

// g = 2 df/d(conj x): df = Re(conj(g_m) dx_m), so real and imaginary
// perturbations recover Re g_m and Im g_m.
TEST(FrfGradient, MatchesFiniteDifferences) {
  const CMatrix f_opt = test::random_complex(4, 2, 5);
  const CMatrix f_bb = test::random_complex(2, 2, 6);
  const CVector x = random_circle_point(8, 7);
  const CVector g = euclidean_gradient_frf(x, f_bb, f_opt);
  CVector fd(8);
  const double h = 1e-6;
  for (int m = 0; m < 8; ++m) {
    CVector xp = x, xm = x;
    xp(m) += h;
    xm(m) -= h;
    const double re = (frf_cost(xp, f_bb, f_opt) - frf_cost(xm, f_bb, f_opt)) / (2 * h);
    xp = x;
    xm = x;
    xp(m) += kJ * h;
    xm(m) -= kJ * h;
    const double im = (frf_cost(xp, f_bb, f_opt) - frf_cost(xm, f_bb, f_opt)) / (2 * h);
    fd(m) = Complex(re, im);
  }
  EXPECT_LT((g - fd).norm() / g.norm(), 1e-6);
}

TEST(FrfGradient, AgreesWithWeightedCost) {
  const CMatrix f_opt = test::random_complex(6, 2, 8);
  const CMatrix f_bb = test::random_complex(3, 2, 9);
  const CVector x = random_circle_point(18, 10);
  const WeightedFrobeniusCost cost(f_opt, f_bb);
  EXPECT_NEAR(cost.value(x), frf_cost(x, f_bb, f_opt), 1e-10);
  EXPECT_LT((cost.euclidean_gradient(x) - euclidean_gradient_frf(x, f_bb, f_opt)).norm(), 1e-10);
}

TEST(WeightedCost, GradientMatchesFiniteDifferences) {
  const CMatrix t = test::random_complex(4, 2, 11);
  const CMatrix b = test::random_complex(2, 2, 12);
  const CMatrix w = test::random_covariance(4, 13);
  const WeightedFrobeniusCost cost(t, b, w);
  const CVector x = random_circle_point(8, 14);
  const CVector g = cost.euclidean_gradient(x);
  CVector fd(8);
  const double h = 1e-6;
  for (int m = 0; m < 8; ++m) {
    CVector xp = x, xm = x;
    xp(m) += h;
    xm(m) -= h;
    const double re = (cost.value(xp) - cost.value(xm)) / (2 * h);
    xp = x;
    xm = x;
    xp(m) += kJ * h;
    xm(m) -= kJ * h;
    fd(m) = Complex(re, (cost.value(xp) - cost.value(xm)) / (2 * h));
  }
  EXPECT_LT((g - fd).norm() / g.norm(), 1e-6);
}

TEST(RiemannianProject, TangentToCircle) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const CVector x = random_circle_point(12, s);
    const CVector g = riemannian_project(x, test::random_complex(12, 1, 100 + s));
    EXPECT_LT(g.cwiseProduct(x.conjugate()).real().cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(RiemannianProject, LeavesTangentVectorsAlone) {
  const CVector x = random_circle_point(6, 1);
  const RVector t = test::random_complex(6, 1, 2).real();
  const CVector tangent = (kJ * t.cast<Complex>()).cwiseProduct(x);
  EXPECT_LT((riemannian_project(x, tangent) - tangent).norm(), 1e-14);
}

// Per element the tangent line at x_m is spanned by j x_m in the plane; project onto it.
TEST(RiemannianProject, MatchesPlanarGeometry) {
  const CVector x = random_circle_point(10, 3);
  const CVector e = test::random_complex(10, 1, 4);
  const CVector g = riemannian_project(x, e);
  for (int m = 0; m < 10; ++m) {
    const Eigen::Vector2d dir((kJ * x(m)).real(), (kJ * x(m)).imag());
    const Eigen::Vector2d v(e(m).real(), e(m).imag());
    const Eigen::Vector2d p = dir.dot(v) * dir;
    EXPECT_NEAR(g(m).real(), p(0), 1e-12);
    EXPECT_NEAR(g(m).imag(), p(1), 1e-12);
  }
  const CVector ones = CVector::Ones(4);
  const CVector real_grad = test::random_complex(4, 1, 5).real().cast<Complex>();
  EXPECT_LT(riemannian_project(ones, real_grad).norm(), 1e-15);
}

TEST(ManifoldCg, RecoversUnitModulusTarget) {
  const CMatrix f_opt = random_unit_modulus(8, 1, 1);
  const ManifoldResult res =
      solve_frf_manifold_cg(f_opt, CMatrix::Ones(1, 1), random_circle_point(8, 2), {});
  EXPECT_LT(res.cost_history.back(), 1e-8);
  EXPECT_TRUE(res.converged);
}

TEST(ManifoldCg, IteratesStayOnManifoldAndDescend) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const CMatrix f_opt = test::random_complex(16, 2, s);
    const CMatrix f_bb = test::random_complex(4, 2, 100 + s);
    double worst = 0.0;
    const ManifoldResult res = solve_frf_manifold_cg(
        f_opt, f_bb, random_circle_point(64, 200 + s), {}, [&](const ManifoldSolverState& st) {
          worst = std::max(worst, (st.x->cwiseAbs().array() - 1.0).abs().maxCoeff());
        });
    EXPECT_LT(worst, 1e-12);
    EXPECT_LT(res.max_modulus_deviation, 1e-12);
    for (std::size_t i = 1; i < res.cost_history.size(); ++i) {
      EXPECT_LE(res.cost_history[i], res.cost_history[i - 1]);
    }
  }
}

TEST(ManifoldCg, ImprovesOnPhaseExtractionStart) {
  int wins = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const CMatrix f_opt = test::random_complex(8, 2, s);
    // N_RF = 4: phase extraction of [F_opt, F_opt] with the least-squares baseband.
    CMatrix pe(8, 4);
    pe << phase_extraction_precoder(f_opt), phase_extraction_precoder(f_opt);
    const CMatrix f_bb = least_squares_baseband(pe, f_opt);
    const double start = (f_opt - pe * f_bb).squaredNorm();
    const ManifoldResult res = solve_frf_manifold_cg(f_opt, f_bb, random_circle_point(32, s), {});
    if (res.cost_history.back() <= start) ++wins;
  }
  EXPECT_GE(wins, 95);
}

TEST(ManifoldCg, FlagsArmijoExhaustion) {
  ManifoldOptions opts;
  opts.armijo_max_backtracks = 0;
  opts.armijo_initial_step = 1e6;
  const ManifoldResult res = solve_frf_manifold_cg(test::random_complex(8, 2, 1),
                                                   test::random_complex(2, 2, 2),
                                                   random_circle_point(16, 3), opts);
  EXPECT_TRUE(res.armijo_failed);
  EXPECT_FALSE(res.converged);
}

TEST(StartingPoint, ChecksWarmStart) {
  const CMatrix rf = random_unit_modulus(4, 2, 1);
  EXPECT_TRUE(unvec(starting_point(rf, 4, 2, 9), 4, 2) == rf);
  EXPECT_THROW(starting_point(CMatrix(rf * 2.0), 4, 2, 9), std::invalid_argument);
  EXPECT_THROW(starting_point(rf, 2, 4, 9), std::invalid_argument);
  EXPECT_TRUE(starting_point(std::nullopt, 4, 2, 9) == random_circle_point(8, 9));
}

TEST(WaterFilling, HandExample) {
  RVector lambda(2);
  lambda << std::sqrt(2.0), 1.0;
  // Gains enter squared: lambda^2 = (2, 1).
  const WaterFillingResult wf = water_filling_allocation(lambda.cwiseAbs2(), 1.0, 2);
  EXPECT_NEAR(wf.mu, 2.5, 1e-12);
  EXPECT_NEAR(wf.allocations(0), 1.5, 1e-12);
  EXPECT_NEAR(wf.allocations(1), 0.5, 1e-12);
}

TEST(WaterFilling, SingleStreamTakesAllPower) {
  RVector g(1);
  g << 0.37;
  EXPECT_NEAR(water_filling_allocation(g, 0.1, 1).allocations(0), 1.0, 1e-12);
}

TEST(WaterFilling, EqualGainsSplitEvenly) {
  const WaterFillingResult wf = water_filling_allocation(RVector::Constant(3, 2.0), 1e6, 3);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(wf.allocations(i), 1.0, 1e-12);
}

TEST(WaterFilling, BudgetAndOrderingOnRandomGains) {
  Stream rng(1);
  for (int i = 0; i < 1000; ++i) {
    const int n_s = 1 + static_cast<int>(rng.uniform(0, 4));
    RVector g(n_s);
    for (int k = 0; k < n_s; ++k) g(k) = std::exp(rng.uniform(-5, 3));
    std::sort(g.data(), g.data() + n_s, std::greater<>());
    const WaterFillingResult wf = water_filling_allocation(g, std::exp(rng.uniform(-3, 3)), n_s);
    EXPECT_NEAR(wf.allocations.sum(), n_s, 1e-9);
    EXPECT_GE(wf.allocations.minCoeff(), 0.0);
    for (int k = 1; k < n_s; ++k) EXPECT_LE(wf.allocations(k), wf.allocations(k - 1) + 1e-12);
  }
}

TEST(WaterFilling, BasebandMeetsPowerExactly) {
  for (std::uint64_t s = 0; s < 200; ++s) {
    const CMatrix r = test::random_covariance(16, s, 3);
    const CMatrix f_rf = random_unit_modulus(16, 4, 500 + s);
    const WaterFilledBaseband out = waterfilling_fbb(f_rf, r, 0.5 + static_cast<double>(s % 7), 2);
    EXPECT_NEAR((f_rf * out.bb).squaredNorm(), 2.0, 1e-9);
    EXPECT_NEAR(out.wf.allocations.sum(), 2.0, 1e-9);
  }
}

TEST(WaterFilling, NotWorseThanEqualPower) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const CMatrix r = test::random_covariance(8, s, 3);
    const CMatrix f_rf = random_unit_modulus(8, 2, 300 + s);
    const CMatrix bb = waterfilling_fbb(f_rf, r, 1.0, 2).bb;
    // Equal power on the same eigenvectors of the projected covariance.
    const CMatrix u_inv = linalg::inv_sqrt_hpd(f_rf.adjoint() * f_rf);
    const CMatrix m = u_inv * f_rf.adjoint() * r * f_rf * u_inv;
    const CMatrix eq = u_inv * linalg::eig_hermitian_desc(m).vectors.leftCols(2);
    EXPECT_GE(mutual_information(r, f_rf, bb, 1.0), mutual_information(r, f_rf, eq, 1.0) - 1e-9);
  }
}

TEST(WaterFilling, RejectsRankDeficientRf) {
  CMatrix rf = CMatrix::Ones(4, 2);
  EXPECT_THROW(waterfilling_fbb(rf, test::random_covariance(4, 1), 1.0, 2), Error);
  EXPECT_THROW(waterfilling_fbb(random_unit_modulus(4, 2, 1), CMatrix::Zero(4, 4), 1.0, 2), Error);
}

TEST(AlternatingPrecoder, SatisfiesConstraints) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    AlternatingOptions opts;
    opts.seed = s;
    const PrecoderSolution sol = alternating_hybrid_precoder(test::random_covariance(16, s), 4, 2, 1.0, opts);
    EXPECT_TRUE(satisfies_constraints(sol.beamformer));
    for (std::size_t i = 1; i < sol.residual_history.size(); ++i) {
      EXPECT_LE(sol.residual_history[i], sol.residual_history[i - 1] + 1e-12);
    }
  }
}

TEST(AlternatingPrecoder, SquareRfDescends) {
  const PrecoderSolution sol = alternating_hybrid_precoder(test::random_covariance(6, 2), 6, 2, 1.0);
  EXPECT_LE(sol.residual_history.back(), sol.residual_history.front());
}

TEST(AlternatingPrecoder, BeatsPhaseExtractionOnAverage) {
  double mo = 0.0, pe = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const CMatrix r = test::random_covariance(16, s);
    AlternatingOptions opts;
    opts.seed = s;
    const PrecoderSolution sol = alternating_hybrid_precoder(r, 4, 2, 1.0, opts);
    mo += sol.relative_residual();
    const CMatrix rf = phase_extraction_rf(r, 4);
    pe += (sol.f_opt - rf * least_squares_baseband(rf, sol.f_opt)).norm() / sol.f_opt.norm();
  }
  EXPECT_LT(mo, pe);
}

TEST(AlternatingPrecoder, RejectsBadChainCount) {
  EXPECT_THROW(alternating_hybrid_precoder(CMatrix::Identity(4, 4), 1, 2, 1.0), std::invalid_argument);
  EXPECT_THROW(alternating_hybrid_precoder(CMatrix::Identity(4, 4), 5, 2, 1.0), std::invalid_argument);
}

TEST(MutualInformation, Examples) {
  const CMatrix f = random_orthonormal(4, 2, 1);
  const CMatrix eye = CMatrix::Identity(2, 2);
  EXPECT_EQ(mutual_information(CMatrix::Identity(4, 4), f, eye, 0.0), 0.0);
  // Orthonormal columns carry power N_S.
  EXPECT_NEAR(mutual_information(CMatrix::Identity(4, 4), f, eye, 3.0), 2.0 * std::log2(1.0 + 1.5), 1e-12);
  CMatrix bad = CMatrix::Identity(4, 4);
  bad(0, 0) = -1.0;
  EXPECT_THROW(mutual_information(bad, f, eye, 1.0), std::invalid_argument);
}

}  // namespace
}  // namespace hbf
