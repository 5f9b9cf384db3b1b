#pragma once

#include <functional>
#include <map>
#include <string>

#include "mltsf/param_store.hpp"

namespace mltsf {

struct ParamGradError {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t nudged = 0;  // coordinates moved off a kink before comparing
};

struct GradReport {
  std::map<std::string, ParamGradError> per_param;
  double global_max = 0.0;
  std::string worst_param;
  double threshold = 1e-4;
  bool passed = false;
  std::size_t nudged = 0;
  std::size_t unresolved = 0;  // kink-adjacent coordinates no nudge could clear
};

// |a - n| / max(|a|, |n|, 1e-8)
double relative_error(double analytic, double numeric);

/// Compares reverse-mode gradients of `fn` against central differences
/// (f(x+eps) - f(x-eps)) / (2 eps) for every coordinate of every parameter.
///
/// fn must be deterministic. Every evaluation runs under an
/// ops::PiecewiseTrace; when x - eps, x and x + eps do not all lie on the same
/// linear piece of the relu/max-pool ops, the coordinate is nudged by
/// +-m*eps (m = 2, 3, 5, 8, ...) to the nearest point whose whole stencil is
/// on one piece, and both gradients are compared there instead. Top-k
/// selection is not traced: it must not depend on the parameters.
/// Parameter gradients and values are restored except for grad buffers,
/// which are overwritten.
GradReport finite_diff_check(const std::function<Tensor(ParamStore&)>& fn, ParamStore& params, double eps,
                             double threshold = 1e-4);

}  // namespace mltsf
