#pragma once

#include <cmath>
#include <random>

#include "lpshift/ergopt.hpp"
#include "lpshift/transfer.hpp"

namespace lpshift::testing {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

// Strictly positive validated potential: softplus of uniform samples,
// fiber-normalized before construction.
inline Potential random_potential(int n, int depth, std::mt19937_64& rng) {
  const std::int64_t count = state_count(n, depth);
  Eigen::VectorXd raw(count);
  for (std::int64_t j = 0; j < count; ++j)
    raw[j] = std::log1p(std::exp(uniform(rng, -3.0, 3.0)));
  const std::int64_t fibers = count / n;
  for (std::int64_t w = 0; w < fibers; ++w) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += raw[i * fibers + w];
    for (int i = 0; i < n; ++i) raw[i * fibers + w] /= sum;
  }
  return Potential(CylinderFunction::from_real(n, depth, raw));
}

// Complex symbol with moduli bounded away from zero (unless allow_zero,
// in which case roughly a quarter of the entries vanish).
inline CylinderFunction random_symbol(int n, int depth, std::mt19937_64& rng,
                                      bool allow_zero = false) {
  const std::int64_t count = state_count(n, depth);
  Eigen::VectorXcd v(count);
  for (std::int64_t j = 0; j < count; ++j) {
    const double modulus = uniform(rng, 0.3, 2.5);
    const double angle = uniform(rng, 0.0, 2.0 * M_PI);
    v[j] = modulus * cplx(std::cos(angle), std::sin(angle));
    if (allow_zero && uniform(rng, 0.0, 1.0) < 0.25) v[j] = 0.0;
  }
  return CylinderFunction(n, depth, std::move(v));
}

inline Eigen::VectorXcd random_vector(std::int64_t size, std::mt19937_64& rng) {
  Eigen::VectorXcd v(size);
  for (std::int64_t j = 0; j < size; ++j)
    v[j] = cplx(uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0));
  return v;
}

// Random feasible order-k Markov measure (softmax rows over the
// shift-compatible successors).
inline MarkovMeasure random_markov(int n, int order, std::mt19937_64& rng) {
  const std::int64_t N = state_count(n, order);
  const std::int64_t prefix = N / n;
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(N, N);
  for (std::int64_t u = 0; u < N; ++u) {
    double denom = 0.0;
    Eigen::VectorXd row(n);
    for (int j = 0; j < n; ++j) {
      row[j] = std::exp(uniform(rng, -2.0, 2.0));
      denom += row[j];
    }
    for (int j = 0; j < n; ++j) P(u, (u % prefix) * n + j) = row[j] / denom;
  }
  return MarkovMeasure::from_transition(n, order, P);
}

}  // namespace lpshift::testing
