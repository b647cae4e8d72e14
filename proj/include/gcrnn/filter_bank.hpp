#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "gcrnn/autodiff.hpp"
#include "gcrnn/errors.hpp"
#include "gcrnn/graph.hpp"
#include "gcrnn/tensor.hpp"

namespace gcrnn {

/// Bank of linear shift-invariant graph filters mapping F_in features to G_out.
///
/// `taps` has shape (K, G_out, F_in); entry (k, g, f) multiplies S^k x^f in
/// output feature g.
struct FilterBank {
  Tensor taps;

  FilterBank() = default;
  explicit FilterBank(Tensor t) : taps(std::move(t)) {
    detail::require(taps.rank() == 3, "FilterBank: taps must have shape (K, G_out, F_in), got " +
                                          shape_string(taps.shape()));
  }

  static FilterBank zeros(std::size_t k, std::size_t out_features, std::size_t in_features) {
    return FilterBank(Tensor(Shape{k, out_features, in_features}));
  }

  std::size_t n_taps() const { return taps.shape()[0]; }
  std::size_t out_features() const { return taps.shape()[1]; }
  std::size_t in_features() const { return taps.shape()[2]; }
  std::size_t parameter_count() const { return taps.numel(); }
};

namespace detail {

inline void check_bank_input(const FilterBank& bank, const Matrix& s, Eigen::Index rows, Eigen::Index cols) {
  require(s.rows() == rows, "apply_filterbank: signal has " + std::to_string(rows) + " nodes, GSO has " +
                                std::to_string(s.rows()));
  require(static_cast<std::size_t>(cols) == bank.in_features(),
          "apply_filterbank: signal has " + std::to_string(cols) + " features, bank expects " +
              std::to_string(bank.in_features()));
}

/// Stacks the taps as a (K*F) x G matrix so that [Z_0 ... Z_{K-1}] * result
/// evaluates the whole bank in one product.
inline Matrix stacked_taps(const Tensor& taps) {
  const auto k = static_cast<Eigen::Index>(taps.shape()[0]);
  const auto g = static_cast<Eigen::Index>(taps.shape()[1]);
  const auto f = static_cast<Eigen::Index>(taps.shape()[2]);
  Matrix out(k * f, g);
  for (Eigen::Index i = 0; i < k; ++i) out.middleRows(i * f, f) = taps.slice(static_cast<std::size_t>(i)).transpose();
  return out;
}

/// [X, SX, S^2 X, ...] built by repeated shifts.
inline Matrix shifted_stack(const Matrix& s, const Matrix& x, std::size_t k) {
  const Eigen::Index f = x.cols();
  Matrix z(x.rows(), f * static_cast<Eigen::Index>(k));
  z.leftCols(f) = x;
  for (std::size_t i = 1; i < k; ++i) {
    auto col = static_cast<Eigen::Index>(i) * f;
    z.middleCols(col, f).noalias() = s * z.middleCols(col - f, f);
  }
  return z;
}

}  // namespace detail

/// Output column g = sum_f sum_k a_k^{gf} S^k x^f, evaluated by iterated shifts.
inline Matrix apply_filterbank(const FilterBank& bank, const Gso& gso, const Matrix& x) {
  detail::check_bank_input(bank, gso.matrix, x.rows(), x.cols());
  return detail::shifted_stack(gso.matrix, x, bank.n_taps()) * detail::stacked_taps(bank.taps);
}

/// Recorded variant. `taps` must be a (K, G, F) tensor on the tape; `gso`
/// must outlive the tape's backward pass.
inline ad::Var apply_filterbank(ad::Var taps, const Gso& gso, ad::Var x) {
  const Tensor& t = taps.value();
  detail::require(t.rank() == 3, "apply_filterbank: taps must have shape (K, G_out, F_in)");
  const std::size_t k = t.shape()[0];
  const std::size_t f = t.shape()[2];
  detail::require(x.value().rank() == 2, "apply_filterbank: signal must be an N x F matrix");
  detail::require(static_cast<std::size_t>(x.matrix().cols()) == f,
                  "apply_filterbank: signal has " + std::to_string(x.matrix().cols()) + " features, bank expects " +
                      std::to_string(f));
  detail::require(x.matrix().rows() == gso.matrix.rows(),
                  "apply_filterbank: signal has " + std::to_string(x.matrix().rows()) + " nodes, GSO has " +
                      std::to_string(gso.matrix.rows()));

  const Matrix* s = &gso.matrix;
  Matrix z = detail::shifted_stack(*s, x.matrix(), k);
  Matrix y = z * detail::stacked_taps(t);
  ad::Tape& tape = *taps.tape;
  if (!tape.recording()) return tape.record(Tensor::from_matrix(y), {taps, x}, nullptr, "filter_bank");

  return tape.record(Tensor::from_matrix(y), {taps, x}, [taps, x, s, z = std::move(z)](ad::Tape& tp, const Matrix& g) {
    const Tensor& a = taps.value();
    const std::size_t kk = a.shape()[0];
    const auto ff = static_cast<Eigen::Index>(a.shape()[2]);
    if (tp.needs_grad(taps)) {
      Matrix dstack = z.transpose() * g;  // (K*F) x G
      Matrix dtaps(static_cast<Eigen::Index>(kk * a.shape()[1]), ff);
      for (std::size_t i = 0; i < kk; ++i)
        dtaps.middleRows(static_cast<Eigen::Index>(i * a.shape()[1]), static_cast<Eigen::Index>(a.shape()[1])) =
            dstack.middleRows(static_cast<Eigen::Index>(i) * ff, ff).transpose();
      tp.accumulate(taps, dtaps);
    }
    if (tp.needs_grad(x)) {
      // Horner in S^T: dX = sum_k (S^T)^k dY A_k.
      Matrix w = g * a.slice(kk - 1);
      for (std::size_t i = kk - 1; i-- > 0;) {
        Matrix next = s->transpose() * w;
        next.noalias() += g * a.slice(i);
        w = std::move(next);
      }
      tp.accumulate(x, w);
    }
  }, "filter_bank");
}

}  // namespace gcrnn
