#pragma once

#include "hbf/precoder.hpp"
#include "hbf/tensor.hpp"
#include "hbf/types.hpp"

namespace hbf {

enum class ThirdChannel { kPhase, kMagnitude };

/// 3-channel tensor (Re, Im, arg or |.|) of a complex matrix, before
/// standardization. arg(0) is 0.
Tensor3 build_input(const CMatrix& m, ThirdChannel third);

/// [vec(arg rf); vec(Re bb); vec(Im bb)], column-major; length N_RF (N + 2 N_S).
RVector build_label_beamformer(const CMatrix& rf, const CMatrix& bb);

/// [vec(Re H); vec(Im H)]
RVector build_label_channel(const CMatrix& h);

inline int beamformer_label_size(int n, int n_rf, int n_s) { return n_rf * (n + 2 * n_s); }
inline int channel_label_size(int n_r, int n_t) { return 2 * n_r * n_t; }

/// Inverse of build_label_beamformer. Precoders are rescaled so that
/// ||rf bb||_F^2 = N_S; a zero product cannot be normalized and throws.
HybridBeamformer reconstruct_beamformer_pair(const RVector& z, int n, int n_rf, int n_s,
                                             BeamformerRole role);

/// Inverse of build_label_channel.
CMatrix reconstruct_channel(const RVector& z, int n_r, int n_t);

}  // namespace hbf
