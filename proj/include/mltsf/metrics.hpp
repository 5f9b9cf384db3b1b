#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "mltsf/synth.hpp"

namespace mltsf {

struct EditStats {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t ref_len = 0;

  std::size_t total() const { return substitutions + deletions + insertions; }
  EditStats& operator+=(const EditStats& other);
  bool operator==(const EditStats&) const = default;
};

/// Minimum-cost alignment of hypothesis against reference with unit costs.
/// On equal-cost backtrace choices, substitution/match wins over deletion,
/// which wins over insertion, so the breakdown is deterministic.
EditStats edit_stats(std::span<const GlossId> reference, std::span<const GlossId> hypothesis);

// (sub + del + ins) / ref_len over counts already summed across the corpus.
double wer(const EditStats& stats);

struct WerReport {
  EditStats stats;
  std::size_t sentences = 0;
  double wer = 0.0;
  double del_rate = 0.0;
  double ins_rate = 0.0;
  double sub_rate = 0.0;
};

WerReport make_report(const EditStats& stats, std::size_t sentences);
// "del/ins | WER" line in percent, plus counts.
std::string format_report_text(const WerReport& report);
// key=value lines: wer, del_rate, ins_rate, sub_rate (fractions) and raw counts.
std::string format_report_kv(const WerReport& report);

}  // namespace mltsf
