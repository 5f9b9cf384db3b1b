#pragma once

// Brute-force reference implementations shared by the unit tests and the
// acceptance binary. Deliberately naive: no shared code with the library.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <span>
#include <vector>

#include "mltsf/ctc.hpp"
#include "mltsf/mltsf.hpp"

namespace mltsf::testing {

// Sort the candidate set by (centre first, score desc, |p - t|, p), keep k, report ascending.
inline std::vector<std::size_t> brute_select(std::span<const double> row, std::size_t t, std::size_t k,
                                             SelectorMode mode) {
  const long long tt = static_cast<long long>(t);
  auto dist = [&](std::size_t p) { return std::llabs(static_cast<long long>(p) - tt); };
  std::vector<std::size_t> cand;
  for (std::size_t p = 0; p < row.size(); ++p) {
    if (mode != SelectorMode::kGlobal && dist(p) > static_cast<long long>(k)) continue;
    cand.push_back(p);
  }
  std::sort(cand.begin(), cand.end(), [&](std::size_t a, std::size_t b) {
    if ((a == t) != (b == t)) return a == t;
    if (mode != SelectorMode::kCenter && row[a] != row[b]) return row[a] > row[b];
    if (dist(a) != dist(b)) return dist(a) < dist(b);
    return a < b;
  });
  cand.resize(k);
  std::sort(cand.begin(), cand.end());
  return cand;
}

// -log of the summed probability of all V^T' paths that collapse to labels.
inline double enumerate_ctc_nll(const Tensor& logits, const GlossSequence& labels) {
  const std::size_t t_len = logits.dim(0), v = logits.dim(1);
  std::vector<double> logp(t_len * v);
  for (std::size_t t = 0; t < t_len; ++t) {
    double mx = -INFINITY, z = 0;
    for (std::size_t j = 0; j < v; ++j) mx = std::max(mx, logits.values()[t * v + j]);
    for (std::size_t j = 0; j < v; ++j) z += std::exp(logits.values()[t * v + j] - mx);
    for (std::size_t j = 0; j < v; ++j) logp[t * v + j] = logits.values()[t * v + j] - mx - std::log(z);
  }
  std::vector<double> hits;
  AlignmentPath path(t_len, 0);
  std::size_t total = 1;
  for (std::size_t t = 0; t < t_len; ++t) total *= v;
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    double lp = 0;
    for (std::size_t t = 0; t < t_len; ++t) {
      path[t] = static_cast<GlossId>(c % v);
      c /= v;
      lp += logp[t * v + path[t]];
    }
    if (collapse(path) == labels) hits.push_back(lp);
  }
  if (hits.empty()) return INFINITY;
  const double mx = *std::max_element(hits.begin(), hits.end());
  double s = 0;
  for (double h : hits) s += std::exp(h - mx);
  return -(mx + std::log(s));
}

// Every alignment pairs an ordered subset of ref with an equally sized ordered subset of hyp;
// unpaired items are deletions/insertions, unequal pairs substitutions. Lengths <= 16.
inline std::size_t exhaustive_edit_cost(const GlossSequence& ref, const GlossSequence& hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::vector<unsigned>> hyp_masks(m + 1);
  for (unsigned mask = 0; mask < (1u << m); ++mask) hyp_masks[std::popcount(mask)].push_back(mask);
  std::size_t best = n + m;
  for (unsigned rm = 0; rm < (1u << n); ++rm) {
    const auto pairs = static_cast<std::size_t>(std::popcount(rm));
    if (pairs > m) continue;
    for (unsigned hm : hyp_masks[pairs]) {
      std::size_t subs = 0;
      unsigned a = rm, b = hm;
      while (a) {
        subs += ref[std::countr_zero(a)] != hyp[std::countr_zero(b)];
        a &= a - 1;
        b &= b - 1;
      }
      best = std::min(best, n + m - 2 * pairs + subs);
    }
  }
  return best;
}

}  // namespace mltsf::testing
