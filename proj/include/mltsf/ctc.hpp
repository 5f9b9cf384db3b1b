#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mltsf/synth.hpp"
#include "mltsf/tensor.hpp"

namespace mltsf {

using AlignmentPath = std::vector<GlossId>;

// Merges adjacent duplicates, then drops blanks: [-, A, A, -, B] -> [A, B].
GlossSequence collapse(std::span<const GlossId> path);

// Shortest alignment for `labels`: L plus one blank per adjacent repeated pair.
std::size_t ctc_min_frames(const GlossSequence& labels);

// [blank, y1, blank, y2, ..., blank]
std::vector<GlossId> extended_label(const GlossSequence& labels);

/// Negative log-likelihood of `labels` under T' x V logits, summed over all
/// alignments that collapse to the labels. The log-space forward recursion is
/// recorded in the autodiff graph, so backward() yields logit gradients.
///
/// Throws InfeasibleError when T' < ctc_min_frames(labels) and ConfigError for
/// empty labels, blank labels or ids >= V.
Tensor ctc_nll(const Tensor& logits, const GlossSequence& labels);

// Per-frame argmax (ties -> smaller id), then collapse.
AlignmentPath best_path(const Tensor& logits);
GlossSequence greedy_decode(const Tensor& logits);

}  // namespace mltsf
