#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mltsf/tensor.hpp"

// Differentiable operations over Tensor. Every function checks its shapes,
// throws GeometryError on mismatch and NumericError if it would produce a
// non-finite value.
namespace mltsf::ops {

/// While alive, records which linear piece every piecewise op took (relu
/// signs, pooling argmaxes) as a running hash. Two evaluations with equal
/// hashes are on the same piece. Scopes nest; only the innermost records.
class PiecewiseTrace {
 public:
  PiecewiseTrace();
  ~PiecewiseTrace();
  PiecewiseTrace(const PiecewiseTrace&) = delete;
  PiecewiseTrace& operator=(const PiecewiseTrace&) = delete;

  std::uint64_t hash() const { return hash_; }
  void record(std::uint64_t v) { hash_ = (hash_ ^ v) * 0x100000001B3ull; }
  static PiecewiseTrace* active();

 private:
  std::uint64_t hash_ = 0xCBF29CE484222325ull;
  PiecewiseTrace* previous_;
};

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor neg(const Tensor& a);

// Scalar reductions.
Tensor sum(const Tensor& a);
Tensor sum_squares(const Tensor& a);
Tensor mean(std::span<const Tensor> scalars);

// x: ...xC, bias: C.
Tensor add_bias(const Tensor& x, const Tensor& bias);

// x: ...xK, weight: KxM, optional bias M.
Tensor linear(const Tensor& x, const Tensor& weight, const std::optional<Tensor>& bias = std::nullopt);

/// Temporal cross-correlation with symmetric zero padding.
/// input is LxC_in or NxLxC_in (N independent sequences), filters FxC_inxC_out.
/// Output length is floor((L + 2*padding - F) / stride) + 1.
Tensor conv1d(const Tensor& input, const Tensor& filters, std::size_t stride, std::size_t padding);
Tensor conv1d(const Tensor& input, const Tensor& filters, const Tensor& bias, std::size_t stride,
              std::size_t padding);

Tensor relu(const Tensor& x);
// Exact erf form: x * Phi(x).
Tensor gelu(const Tensor& x);

// Normalizes over the last axis with population variance.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

// -inf inputs map to exactly 0. A slice of only -inf throws NumericError.
Tensor softmax_lastdim(const Tensor& x);
Tensor log_softmax_lastdim(const Tensor& x);

// Max pooling along the time axis of LxC or NxLxC. Ties route to the first index.
Tensor max_pool_time(const Tensor& x, std::size_t size, std::size_t stride);

enum class PoolMode { kMax, kMean };
// NxKxC -> NxC, reducing the middle axis completely.
Tensor pool_axis1(const Tensor& x, PoolMode mode);

// Picks rows of a RxC table. indices.size() must equal numel(prefix); result is prefix x C.
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices, const Shape& prefix);

// Stacks S tensors of shape NxC into NxSxC.
Tensor stack_axis1(std::span<const Tensor> parts);

// weights NxS, x NxSxC -> NxC with out[n] = sum_s weights[n,s] * x[n,s].
Tensor weighted_sum_axis1(const Tensor& weights, const Tensor& x);

// RxC -> R x cols.size(), columns may repeat.
Tensor select_columns(const Tensor& x, std::span<const std::size_t> cols);

// Log-sum-exp of the listed entries of x, as a scalar.
Tensor logsumexp_at(const Tensor& x, std::span<const std::size_t> indices);

/// One step of the CTC forward recursion in log space.
/// prev holds log-alpha for the reachable prefix of extended-label states at
/// time t-1. The result holds the reachable prefix at time t:
///   out[s] = logsumexp(prev[s], prev[s-1], prev[s-2] if skip_allowed[s]) + emissions[t, s]
/// where terms outside prev are absent. emissions is T x S.
Tensor ctc_advance(const Tensor& prev, const Tensor& emissions, std::size_t t,
                   std::span<const bool> skip_allowed);

// Row t of emissions restricted to its first `count` columns.
Tensor row_prefix(const Tensor& x, std::size_t row, std::size_t count);

}  // namespace mltsf::ops
