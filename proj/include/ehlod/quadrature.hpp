#pragma once

#include <vector>

namespace ehlod {

// Gauss-Legendre rule with n points on [-1,1]; exact for degree 2n-1.
struct GaussRule {
  std::vector<double> points;
  std::vector<double> weights;
};

const GaussRule& gauss_legendre(int n);

}  // namespace ehlod
