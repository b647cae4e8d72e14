#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "gcrnn/gcrnn.hpp"

namespace gcrnn::testing {

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

inline Tensor random_tensor(std::mt19937_64& rng, const Shape& shape, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(shape);
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = u(rng);
  return t;
}

inline FilterBank random_bank(std::mt19937_64& rng, std::size_t k, std::size_t g, std::size_t f) {
  return FilterBank(random_tensor(rng, {k, g, f}, -0.5, 0.5));
}

/// Connected-ish random undirected graph: a ring plus random chords.
inline Graph random_graph(std::mt19937_64& rng, std::size_t n, double p = 0.3) {
  Graph g(n);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (u(rng) < p || j == i + 1) g.add_undirected_edge(i, j);
  return g;
}

inline std::vector<std::size_t> random_permutation(std::mt19937_64& rng, std::size_t n) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

/// P with P(perm[i], i) = 1, so (P x)[perm[i]] = x[i].
inline Matrix permutation_matrix(const std::vector<std::size_t>& perm) {
  const auto n = static_cast<Eigen::Index>(perm.size());
  Matrix p = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) p(static_cast<Eigen::Index>(perm[static_cast<std::size_t>(i)]), i) = 1.0;
  return p;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

/// Worst mixed relative error between analytic and central-difference
/// gradients of `loss_of` with respect to every entry of `params`. Entries
/// with |analytic| + |numeric| < 1e-8 are compared absolutely.
template <class LossFn>
double finite_difference_error(const std::vector<Tensor*>& params, const std::vector<Tensor>& analytic,
                               LossFn loss_of, double eps = 1e-6) {
  double worst = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p]->numel(); ++i) {
      const double saved = (*params[p])[i];
      (*params[p])[i] = saved + eps;
      const long double up = loss_of();
      (*params[p])[i] = saved - eps;
      const long double down = loss_of();
      (*params[p])[i] = saved;
      const double numeric = static_cast<double>((up - down) / (2.0L * eps));
      const double a = analytic[p][i];
      const double scale = std::abs(a) + std::abs(numeric);
      const double err = scale < 1e-8 ? std::abs(a - numeric) : std::abs(a - numeric) / scale;
      worst = std::max(worst, err);
    }
  }
  return worst;
}

/// Mean training loss over `samples`, with the final reductions carried in
/// long double. At eps = 1e-6 a double-rounded loss limits central differences
/// to about 1e-10 absolute, which is coarse for gradient entries near 1e-6.
inline long double reference_loss(const Network& net, const Gso& gso, const std::vector<Sample>& samples,
                                  LossKind loss) {
  long double total = 0.0L;
  for (const Sample& s : samples) {
    ad::Tape tape(false);
    std::vector<Matrix> out;
    for (const auto& v : forward(tape, net, gso, s.inputs)) out.push_back(v.matrix());
    if (loss == LossKind::cross_entropy) {
      const Matrix& z = out.back();
      const long double m = z.maxCoeff();
      long double sum = 0.0L;
      for (Eigen::Index k = 0; k < z.size(); ++k) sum += std::exp(static_cast<long double>(z.data()[k]) - m);
      total += m + std::log(sum) - static_cast<long double>(z.data()[*s.label]);
      continue;
    }
    std::vector<Matrix> targets = net.recurrent() ? s.targets : std::vector<Matrix>{stack_sequence(s.targets)};
    long double steps = 0.0L;
    for (std::size_t t = 0; t < out.size(); ++t) {
      long double acc = 0.0L;
      for (Eigen::Index k = 0; k < out[t].size(); ++k)
        acc += std::fabs(static_cast<long double>(out[t].data()[k]) - static_cast<long double>(targets[t].data()[k]));
      steps += acc / static_cast<long double>(out[t].size());
    }
    total += steps / static_cast<long double>(out.size());
  }
  return total / static_cast<long double>(samples.size());
}

}  // namespace gcrnn::testing
