#include "mltsf/ctc.hpp"

#include <array>
#include <memory>

#include "mltsf/error.hpp"
#include "mltsf/ops.hpp"

namespace mltsf {

GlossSequence collapse(std::span<const GlossId> path) {
  GlossSequence out;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i > 0 && path[i] == path[i - 1]) continue;
    if (path[i] != kBlank) out.push_back(path[i]);
  }
  return out;
}

std::size_t ctc_min_frames(const GlossSequence& labels) {
  std::size_t n = labels.size();
  for (std::size_t i = 1; i < labels.size(); ++i) {
    if (labels[i] == labels[i - 1]) ++n;
  }
  return n;
}

std::vector<GlossId> extended_label(const GlossSequence& labels) {
  std::vector<GlossId> ext;
  ext.reserve(2 * labels.size() + 1);
  ext.push_back(kBlank);
  for (GlossId g : labels) {
    ext.push_back(g);
    ext.push_back(kBlank);
  }
  return ext;
}

Tensor ctc_nll(const Tensor& logits, const GlossSequence& labels) {
  if (logits.rank() != 2) throw GeometryError("ctc_nll: logits must be T' x V");
  const std::size_t frames = logits.dim(0);
  const std::size_t vocab = logits.dim(1);
  if (vocab < 2) throw ConfigError("ctc_nll: vocabulary must include blank plus one gloss");
  if (labels.empty()) throw ConfigError("ctc_nll: empty label sequence");
  for (GlossId g : labels) {
    if (g == kBlank || g >= vocab) {
      throw ConfigError("ctc_nll: label id " + std::to_string(g) + " invalid for V=" + std::to_string(vocab));
    }
  }
  const std::size_t needed = ctc_min_frames(labels);
  if (frames < needed) {
    throw InfeasibleError("ctc_nll: label needs at least " + std::to_string(needed) + " frames, logits have " +
                          std::to_string(frames));
  }

  const std::vector<GlossId> ext = extended_label(labels);
  const std::size_t states = ext.size();
  std::vector<std::size_t> columns(ext.begin(), ext.end());
  // std::vector<bool> has no contiguous storage for span.
  std::unique_ptr<bool[]> skip(new bool[states]);
  for (std::size_t s = 0; s < states; ++s) skip[s] = s >= 2 && ext[s] != kBlank && ext[s] != ext[s - 2];

  Tensor emissions = ops::select_columns(ops::log_softmax_lastdim(logits), columns);
  Tensor alpha = ops::row_prefix(emissions, 0, 2);
  for (std::size_t t = 1; t < frames; ++t) {
    alpha = ops::ctc_advance(alpha, emissions, t, std::span<const bool>(skip.get(), states));
  }
  // At the minimum length the trailing blank is not reachable yet.
  if (alpha.size() < states) {
    const std::array<std::size_t, 1> last{states - 2};
    return ops::neg(ops::logsumexp_at(alpha, last));
  }
  const std::array<std::size_t, 2> finals{states - 2, states - 1};
  return ops::neg(ops::logsumexp_at(alpha, finals));
}

AlignmentPath best_path(const Tensor& logits) {
  if (logits.rank() != 2) throw GeometryError("best_path: logits must be T' x V");
  const std::size_t frames = logits.dim(0);
  const std::size_t vocab = logits.dim(1);
  const auto v = logits.values();
  AlignmentPath path(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < vocab; ++j) {
      if (v[t * vocab + j] > v[t * vocab + best]) best = j;
    }
    path[t] = static_cast<GlossId>(best);
  }
  return path;
}

GlossSequence greedy_decode(const Tensor& logits) { return collapse(best_path(logits)); }

}  // namespace mltsf
