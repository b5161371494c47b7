#pragma once

#include <stdexcept>
#include <vector>

#include "rsmajrc/types.hpp"

namespace rsmajrc {

/// The stacked decision variable [alpha, c^T, vec(P)^T]^T shared by both
/// ADMM blocks.
struct Stacked {
  double alpha = 1.0;
  RVec c;
  PrecoderMatrix p;

  int users() const { return p.users(); }
  int antennas() const { return p.antennas(); }

  static Stacked zeros(int users, int antennas) { return {1.0, RVec::Zero(users), PrecoderMatrix(antennas, users)}; }

  /// Length N_t (K+1) + K + 1.
  CVec to_complex() const {
    const int k = users();
    const CVec x = p.vec();
    CVec v(1 + k + x.size());
    v(0) = alpha;
    for (int i = 0; i < k; ++i) v(1 + i) = c(i);
    v.tail(x.size()) = x;
    return v;
  }

  /// [Re(v); Im(v)]
  RVec to_real() const {
    const CVec v = to_complex();
    RVec r(2 * v.size());
    r.head(v.size()) = v.real();
    r.tail(v.size()) = v.imag();
    return r;
  }

  static Stacked from_complex(const CVec& v, int users, int antennas) {
    const Eigen::Index n = static_cast<Eigen::Index>(antennas) * (users + 1);
    if (v.size() != 1 + users + n) throw std::invalid_argument("Stacked::from_complex: wrong length");
    Stacked s;
    s.alpha = v(0).real();
    s.c = v.segment(1, users).real();
    s.p = PrecoderMatrix::from_vec(v.tail(n), antennas);
    return s;
  }

  static Stacked from_real(const RVec& r, int users, int antennas) {
    const Eigen::Index len = r.size() / 2;
    CVec v(len);
    for (Eigen::Index i = 0; i < len; ++i) v(i) = cd(r(i), r(len + i));
    return from_complex(v, users, antennas);
  }
};

/// Selector matrices acting on the stacked variable.
///   D_p  = [0_{(K+1)N_t x (K+1)}, I_{(K+1)N_t}]
///   D_c  = [0_{N_t x (K+1)}, I_{N_t}, 0_{N_t x K N_t}]
///   D_k  = [0_{N_t x (K+1+k N_t)}, I_{N_t}, 0_{N_t x (K-k) N_t}]
///   D_pr = Diag(D_p, D_p) on the real stacking.
struct SplitOperators {
  int users = 0;
  int antennas = 0;
  RMat d_p;
  RMat d_c;
  std::vector<RMat> d_k;  // d_k[k-1] for user k
  RMat d_pr;

  int stacked_length() const { return antennas * (users + 1) + users + 1; }
  int precoder_length() const { return antennas * (users + 1); }

  /// k-th standard basis vector (1-based, as in e_{k+1}^T v = C_k).
  RVec basis(int k) const {
    RVec e = RVec::Zero(stacked_length());
    e(k - 1) = 1.0;
    return e;
  }

  /// D_pr w computed by slicing; matches d_pr * w.
  RVec apply_pr(const RVec& w) const {
    const int len = stacked_length();
    const int np = precoder_length();
    RVec out(2 * np);
    out.head(np) = w.segment(len - np, np);
    out.tail(np) = w.segment(2 * len - np, np);
    return out;
  }
};

inline SplitOperators build_split_operators(int users, int antennas) {
  if (users < 1 || antennas < 1) throw std::invalid_argument("build_split_operators: bad dimensions");
  SplitOperators ops;
  ops.users = users;
  ops.antennas = antennas;
  const int len = ops.stacked_length();
  const int np = ops.precoder_length();
  const int off = users + 1;
  ops.d_p = RMat::Zero(np, len);
  ops.d_p.rightCols(np).setIdentity();
  ops.d_c = RMat::Zero(antennas, len);
  ops.d_c.block(0, off, antennas, antennas).setIdentity();
  for (int k = 1; k <= users; ++k) {
    RMat d = RMat::Zero(antennas, len);
    d.block(0, off + k * antennas, antennas, antennas).setIdentity();
    ops.d_k.push_back(std::move(d));
  }
  ops.d_pr = RMat::Zero(2 * np, 2 * len);
  ops.d_pr.topLeftCorner(np, len) = ops.d_p;
  ops.d_pr.bottomRightCorner(np, len) = ops.d_p;
  return ops;
}

}  // namespace rsmajrc
