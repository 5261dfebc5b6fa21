#include "hbf/encoding.hpp"

#include <cmath>

namespace hbf {

Tensor3 build_input(const CMatrix& m, ThirdChannel third) {
  if (m.size() == 0) {
    throw std::invalid_argument("build_input: empty matrix");
  }
  Tensor3 t(static_cast<int>(m.rows()), static_cast<int>(m.cols()), 3);
  for (int r = 0; r < t.rows(); ++r) {
    for (int c = 0; c < t.cols(); ++c) {
      const Complex v = m(r, c);
      t.at(r, c, 0) = v.real();
      t.at(r, c, 1) = v.imag();
      if (third == ThirdChannel::kMagnitude) {
        t.at(r, c, 2) = std::abs(v);
      } else {
        t.at(r, c, 2) = v == Complex(0.0, 0.0) ? 0.0 : std::arg(v);
      }
    }
  }
  return t;
}

RVector build_label_beamformer(const CMatrix& rf, const CMatrix& bb) {
  if (rf.cols() != bb.rows()) {
    throw std::invalid_argument("build_label_beamformer: rf columns must match bb rows");
  }
  const Eigen::Index n_rf_entries = rf.size();
  const Eigen::Index n_bb = bb.size();
  RVector z(n_rf_entries + 2 * n_bb);
  for (Eigen::Index k = 0; k < n_rf_entries; ++k) {
    const Complex v = rf.data()[k];
    z(k) = v == Complex(0.0, 0.0) ? 0.0 : std::arg(v);
  }
  for (Eigen::Index k = 0; k < n_bb; ++k) {
    z(n_rf_entries + k) = bb.data()[k].real();
    z(n_rf_entries + n_bb + k) = bb.data()[k].imag();
  }
  return z;
}

RVector build_label_channel(const CMatrix& h) {
  RVector z(2 * h.size());
  for (Eigen::Index k = 0; k < h.size(); ++k) {
    z(k) = h.data()[k].real();
    z(h.size() + k) = h.data()[k].imag();
  }
  return z;
}

HybridBeamformer reconstruct_beamformer_pair(const RVector& z, int n, int n_rf, int n_s,
                                             BeamformerRole role) {
  if (n < 1 || n_rf < 1 || n_s < 1 || z.size() != beamformer_label_size(n, n_rf, n_s)) {
    throw std::invalid_argument("reconstruct_beamformer_pair: label length must be N_RF (N + 2 N_S)");
  }
  HybridBeamformer bf;
  bf.role = role;
  bf.rf.resize(n, n_rf);
  bf.bb.resize(n_rf, n_s);
  const Eigen::Index n_rf_entries = bf.rf.size();
  const Eigen::Index n_bb = bf.bb.size();
  for (Eigen::Index k = 0; k < n_rf_entries; ++k) {
    bf.rf.data()[k] = std::polar(1.0, z(k));
  }
  for (Eigen::Index k = 0; k < n_bb; ++k) {
    bf.bb.data()[k] = Complex(z(n_rf_entries + k), z(n_rf_entries + n_bb + k));
  }
  if (role == BeamformerRole::kPrecoder) {
    const double power = (bf.rf * bf.bb).norm();
    if (!(power > 0.0)) {
      throw std::invalid_argument("reconstruct_beamformer_pair: rf*bb is zero and cannot be normalized");
    }
    bf.bb *= std::sqrt(static_cast<double>(n_s)) / power;
  }
  return bf;
}

CMatrix reconstruct_channel(const RVector& z, int n_r, int n_t) {
  if (n_r < 1 || n_t < 1 || z.size() != channel_label_size(n_r, n_t)) {
    throw std::invalid_argument("reconstruct_channel: label length must be 2 N_R N_T");
  }
  CMatrix h(n_r, n_t);
  for (Eigen::Index k = 0; k < h.size(); ++k) {
    h.data()[k] = Complex(z(k), z(h.size() + k));
  }
  return h;
}

}  // namespace hbf
