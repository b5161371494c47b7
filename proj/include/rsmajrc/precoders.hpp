#pragma once

#include <cmath>

#include "rsmajrc/config.hpp"
#include "rsmajrc/scenario.hpp"
#include "rsmajrc/types.hpp"

namespace rsmajrc {

/// Scales each row of P so that every antenna radiates exactly `per_antenna`.
/// Rows that are identically zero are replaced by equal power on all streams.
inline PrecoderMatrix project_to_antenna_budget(PrecoderMatrix p, double per_antenna, bool common_pinned = false) {
  CMat& m = p.matrix();
  const double target = std::sqrt(per_antenna);
  for (Eigen::Index a = 0; a < m.rows(); ++a) {
    const double nrm = m.row(a).norm();
    if (nrm > 0) {
      m.row(a) *= target / nrm;
    } else {
      const Eigen::Index first = common_pinned ? 1 : 0;
      const auto cnt = static_cast<double>(m.cols() - first);
      m.row(a).setZero();
      m.row(a).tail(m.cols() - first).setConstant(cd(target / std::sqrt(cnt), 0.0));
    }
  }
  return p;
}

/// Matched-filter precoders: p_k along h_k, p_c along the sum of the
/// normalized channels. `common_share` of the power goes to p_c (zero in SDMA).
inline PrecoderMatrix matched_filter_precoders(const ChannelSet& ch, double total_power, AccessMode mode,
                                               double common_share = 0.1) {
  const int k_users = ch.users();
  PrecoderMatrix p(ch.antennas(), k_users);
  const double share = mode == AccessMode::kSdma ? 0.0 : common_share;
  const double private_power = total_power * (1.0 - share) / k_users;
  CVec sum = CVec::Zero(ch.antennas());
  for (int k = 0; k < k_users; ++k) {
    const CVec h = ch.row(k).adjoint();
    const double nrm = h.norm();
    if (nrm > 0) {
      p.priv(k) = h * (std::sqrt(private_power) / nrm);
      sum += h / nrm;
    }
  }
  if (share > 0 && sum.norm() > 0) p.common() = sum * (std::sqrt(total_power * share) / sum.norm());
  return p;
}

}  // namespace rsmajrc
