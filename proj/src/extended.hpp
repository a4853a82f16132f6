#pragma once

#include <vector>

#include "ctrlkit/numcore.hpp"

namespace ctrl {

struct GramInverse {
  Matrix C;
  double condition = 0.0;
};

// Inverse of the Gram matrix of t -> exp(-mu_i t) on (0, T), formed and inverted in 113-bit precision.
GramInverse exponential_gram_inverse(const std::vector<double>& mu, double T);

}  // namespace ctrl
