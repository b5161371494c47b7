#pragma once

#include <complex>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>

namespace rsmajrc {

using cd = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;

inline constexpr double kPi = std::numbers::pi;

/// Precoders [p_c, p_1, ..., p_K] as an N_t x (K+1) matrix. Column 0 is the
/// common stream; column k is the private stream of user k.
class PrecoderMatrix {
 public:
  PrecoderMatrix() = default;
  PrecoderMatrix(int antennas, int users) : m_(CMat::Zero(antennas, users + 1)) {}
  explicit PrecoderMatrix(CMat m) : m_(std::move(m)) {
    if (m_.cols() < 2) throw std::invalid_argument("precoder matrix needs at least one private column");
  }

  int antennas() const { return static_cast<int>(m_.rows()); }
  int users() const { return static_cast<int>(m_.cols()) - 1; }
  int streams() const { return static_cast<int>(m_.cols()); }

  auto common() { return m_.col(0); }
  auto common() const { return m_.col(0); }
  auto priv(int k) { return m_.col(k + 1); }  // k is 0-based
  auto priv(int k) const { return m_.col(k + 1); }

  const CMat& matrix() const { return m_; }
  CMat& matrix() { return m_; }

  /// Column-major vec(P); stream j occupies entries [j N_t, (j+1) N_t).
  CVec vec() const { return Eigen::Map<const CVec>(m_.data(), m_.size()); }
  static PrecoderMatrix from_vec(const CVec& x, int antennas) {
    return PrecoderMatrix(Eigen::Map<const CMat>(x.data(), antennas, x.size() / antennas));
  }

  bool all_finite() const { return m_.allFinite(); }
  double total_power() const { return m_.squaredNorm(); }
  /// diag(P P^H)
  RVec antenna_powers() const { return m_.rowwise().squaredNorm(); }

 private:
  CMat m_;
};

}  // namespace rsmajrc
