#pragma once

#include <random>

#include "mftraj/ad/tensor.hpp"

namespace mftraj::testing {

using T = ad::Tensor<double>;

inline T random_tensor(std::mt19937_64& rng, ad::Shape shape, bool requires_grad = true, double lo = -1.0,
                       double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  ad::Vector<double> v(ad::shape_size(shape));
  for (auto& x : v) x = u(rng);
  return requires_grad ? T::variable(std::move(shape), std::move(v)) : T::constant(std::move(shape), std::move(v));
}

}  // namespace mftraj::testing
