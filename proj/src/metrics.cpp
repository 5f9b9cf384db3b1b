#include "mltsf/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <vector>

#include "mltsf/error.hpp"

namespace mltsf {

EditStats& EditStats::operator+=(const EditStats& other) {
  substitutions += other.substitutions;
  deletions += other.deletions;
  insertions += other.insertions;
  ref_len += other.ref_len;
  return *this;
}

EditStats edit_stats(std::span<const GlossId> reference, std::span<const GlossId> hypothesis) {
  const std::size_t n = reference.size();
  const std::size_t m = hypothesis.size();
  std::vector<std::size_t> cost((n + 1) * (m + 1));
  auto at = [m](std::size_t i, std::size_t j) { return i * (m + 1) + j; };
  for (std::size_t i = 0; i <= n; ++i) cost[at(i, 0)] = i;
  for (std::size_t j = 0; j <= m; ++j) cost[at(0, j)] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t diag = cost[at(i - 1, j - 1)] + (reference[i - 1] == hypothesis[j - 1] ? 0 : 1);
      cost[at(i, j)] = std::min({diag, cost[at(i - 1, j)] + 1, cost[at(i, j - 1)] + 1});
    }
  }

  EditStats stats;
  stats.ref_len = n;
  std::size_t i = n;
  std::size_t j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool match = reference[i - 1] == hypothesis[j - 1];
      if (cost[at(i, j)] == cost[at(i - 1, j - 1)] + (match ? 0 : 1)) {
        if (!match) ++stats.substitutions;
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && cost[at(i, j)] == cost[at(i - 1, j)] + 1) {
      ++stats.deletions;
      --i;
    } else {
      ++stats.insertions;
      --j;
    }
  }
  return stats;
}

double wer(const EditStats& stats) {
  if (stats.ref_len == 0) throw MetricError("WER undefined for an empty reference");
  return static_cast<double>(stats.total()) / static_cast<double>(stats.ref_len);
}

WerReport make_report(const EditStats& stats, std::size_t sentences) {
  WerReport r;
  r.stats = stats;
  r.sentences = sentences;
  r.wer = wer(stats);
  const auto len = static_cast<double>(stats.ref_len);
  r.del_rate = static_cast<double>(stats.deletions) / len;
  r.ins_rate = static_cast<double>(stats.insertions) / len;
  r.sub_rate = static_cast<double>(stats.substitutions) / len;
  return r;
}

std::string format_report_text(const WerReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "del/ins %.1f/%.1f | WER %.1f%%  (sub %.1f%%; %zu sentences, %zu reference glosses)\n",
                100.0 * r.del_rate, 100.0 * r.ins_rate, 100.0 * r.wer, 100.0 * r.sub_rate, r.sentences,
                r.stats.ref_len);
  return buf;
}

std::string format_report_kv(const WerReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "wer=" << r.wer << '\n'
     << "del_rate=" << r.del_rate << '\n'
     << "ins_rate=" << r.ins_rate << '\n'
     << "sub_rate=" << r.sub_rate << '\n'
     << "substitutions=" << r.stats.substitutions << '\n'
     << "deletions=" << r.stats.deletions << '\n'
     << "insertions=" << r.stats.insertions << '\n'
     << "ref_len=" << r.stats.ref_len << '\n'
     << "sentences=" << r.sentences << '\n';
  return os.str();
}

}  // namespace mltsf
