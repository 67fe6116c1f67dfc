#include "mftraj/ad/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

namespace mftraj::ad {

double GradCheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& r : rows) worst = std::max(worst, r.max_rel_error);
  return worst;
}

std::string GradCheckReport::table() const {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-24s %10s %14s %14s %8s\n", "input", "size", "max_abs_err", "max_rel_err",
                "status");
  out += line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-24s %10lld %14.3e %14.3e %8s\n", r.name.c_str(),
                  static_cast<long long>(r.size), r.max_abs_error, r.max_rel_error,
                  r.max_rel_error < tolerance ? "ok" : "FAIL");
    out += line;
  }
  return out;
}

namespace {

double evaluate(const std::function<Tensor<double>()>& f) {
  Tape<double>::Pause no_record;
  return f().item();
}

}  // namespace

GradCheckReport gradient_check(const std::function<Tensor<double>()>& f, std::span<const GradInput> inputs, double eps,
                               double tol) {
  const double first = evaluate(f);
  const double second = evaluate(f);
  if (std::memcmp(&first, &second, sizeof first) != 0)
    throw DeterminismError("gradient_check: function returned " + std::to_string(first) + " then " +
                           std::to_string(second));

  for (const auto& in : inputs) in.tensor.zero_grad();
  std::vector<Vector<double>> analytic;
  {
    Tape<double> tape;
    const Tensor<double> loss = f();
    if (loss.on_tape()) tape.backward(loss);
    for (const auto& in : inputs) analytic.push_back(in.tensor.grad());
  }

  GradCheckReport report;
  report.tolerance = tol;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Tensor<double>& t = inputs[k].tensor;
    if (!t.requires_grad()) continue;
    GradCheckRow row{inputs[k].name, t.size()};
    Vector<double>& values = t.mutable_values();
    for (Index i = 0; i < t.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double up = evaluate(f);
      values[i] = saved - eps;
      const double down = evaluate(f);
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[k][i];
      const double abs_err = std::abs(a - numeric);
      const double rel_err = abs_err / std::max({1.0, std::abs(a), std::abs(numeric)});
      row.max_abs_error = std::max(row.max_abs_error, abs_err);
      if (rel_err > row.max_rel_error || !std::isfinite(rel_err)) {
        row.max_rel_error = std::isfinite(rel_err) ? rel_err : INFINITY;
        row.worst_index = i;
      }
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace mftraj::ad
