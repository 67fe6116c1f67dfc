#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mftraj/ad/tensor.hpp"

namespace mftraj::ad {

struct GradInput {
  std::string name;
  Tensor<double> tensor;
};

struct GradCheckRow {
  std::string name;
  Index size = 0;
  double max_abs_error = 0.0;
  double max_rel_error = 0.0;
  Index worst_index = 0;
};

struct GradCheckReport {
  std::vector<GradCheckRow> rows;
  double tolerance = 1e-3;

  double max_rel_error() const;
  bool passed() const { return max_rel_error() < tolerance; }
  /// Fixed-width text table, one line per checked input.
  std::string table() const;
};

/// Compares reverse-mode gradients of the scalar `f` with central
/// differences (f(x + eps) - f(x - eps)) / 2 eps, component by component.
/// The relative error of a component is |a - n| / max(1, |a|, |n|).
/// Inputs that do not require gradients are skipped. Throws
/// DeterminismError when two evaluations of `f` disagree.
GradCheckReport gradient_check(const std::function<Tensor<double>()>& f, std::span<const GradInput> inputs,
                               double eps = 1e-5, double tol = 1e-3);

}  // namespace mftraj::ad
