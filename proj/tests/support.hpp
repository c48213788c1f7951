#pragma once

#include <random>

#include "parcalm/corpus.hpp"
#include "parcalm/problem.hpp"

namespace testing {

inline parcalm::Vec v(std::initializer_list<double> xs) {
  parcalm::Vec out(static_cast<int>(xs.size()));
  int i = 0;
  for (double x : xs) out[i++] = x;
  return out;
}

// Uniform point of the problem's search box.
inline void random_point(const parcalm::BilevelProblem& P, std::mt19937_64& rng, double& x, parcalm::Vec& y) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  x = P.box.x_lo + (P.box.x_hi - P.box.x_lo) * u(rng);
  y.resize(P.m);
  for (int i = 0; i < P.m; ++i) y[i] = P.box.y_lo[i] + (P.box.y_hi[i] - P.box.y_lo[i]) * u(rng);
}

}  // namespace testing
