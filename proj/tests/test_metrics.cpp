#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "mltsf/error.hpp"
#include "mltsf/metrics.hpp"
#include "oracles.hpp"

using namespace mltsf;

namespace {

GlossSequence random_seq(std::mt19937_64& rng, std::size_t max_len, std::size_t v) {
  GlossSequence s(rng() % (max_len + 1));
  for (auto& g : s) g = static_cast<GlossId>(1 + rng() % v);
  return s;
}

std::size_t levenshtein(const GlossSequence& a, const GlossSequence& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] != b[j - 1])});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

TEST(EditStats, Examples) {
  const GlossVocabulary v({"<blank>", "MONTAG", "REGEN", "SONNE"});
  const GlossSequence ref{v.id("MONTAG"), v.id("REGEN")};
  const GlossSequence hyp{v.id("MONTAG"), v.id("SONNE")};
  const EditStats s = edit_stats(ref, hyp);
  EXPECT_EQ(s, (EditStats{1, 0, 0, 2}));
  EXPECT_DOUBLE_EQ(wer(s), 0.5);
  EXPECT_EQ(edit_stats(GlossSequence{1, 2, 3}, GlossSequence{1, 2, 3}), (EditStats{0, 0, 0, 3}));
  EXPECT_EQ(edit_stats(GlossSequence{1, 2, 3}, GlossSequence{}), (EditStats{0, 3, 0, 3}));
  EXPECT_EQ(edit_stats(GlossSequence{}, GlossSequence{1, 2}), (EditStats{0, 0, 2, 0}));
}

TEST(EditStats, TieOrderPrefersSubstitution) {
  // Two substitutions and one deletion + one insertion both cost 2.
  EXPECT_EQ(edit_stats(GlossSequence{1, 2}, GlossSequence{2, 3}), (EditStats{2, 0, 0, 2}));
  EXPECT_EQ(edit_stats(GlossSequence{1, 2}, GlossSequence{3}), (EditStats{1, 1, 0, 2}));
}

TEST(EditStats, ExhaustiveOracleAndLevenshtein) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 10000; ++i) {
    const std::size_t v = 1 + rng() % 5;
    const GlossSequence ref = random_seq(rng, 8, v), hyp = random_seq(rng, 8, v);
    const EditStats s = edit_stats(ref, hyp);
    ASSERT_EQ(s.total(), mltsf::testing::exhaustive_edit_cost(ref, hyp)) << i;
    ASSERT_EQ(s.total(), levenshtein(ref, hyp));
    ASSERT_EQ(s.ref_len, ref.size());
    // Counts must describe a real alignment.
    ASSERT_EQ(s.deletions + hyp.size(), s.insertions + ref.size());
    ASSERT_LE(s.substitutions + s.deletions, ref.size());
  }
}

TEST(EditStats, SymmetryAndTriangle) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 3000; ++i) {
    const GlossSequence a = random_seq(rng, 8, 4), b = random_seq(rng, 8, 4), c = random_seq(rng, 8, 4);
    const EditStats ab = edit_stats(a, b), ba = edit_stats(b, a);
    ASSERT_EQ(ab.total(), ba.total());
    // Roles of deletion and insertion swap.
    ASSERT_EQ(ab.deletions + ba.deletions, ab.insertions + ba.insertions);
    ASSERT_LE(edit_stats(a, c).total(), ab.total() + edit_stats(b, c).total());
    ASSERT_EQ(edit_stats(a, a).total(), 0u);
  }
}

TEST(Wer, FormulaExamples) {
  EXPECT_DOUBLE_EQ(wer(EditStats{0, 0, 0, 10}), 0.0);
  EXPECT_DOUBLE_EQ(wer(EditStats{1, 1, 1, 10}), 0.3);
  EXPECT_DOUBLE_EQ(wer(EditStats{0, 0, 3, 2}), 1.5);
  EXPECT_THROW(wer(EditStats{1, 0, 0, 0}), MetricError);
}

TEST(Wer, CorpusAggregatesCountsNotRatios) {
  EditStats total;
  total += edit_stats(GlossSequence{1}, GlossSequence{2});           // 1/1
  total += edit_stats(GlossSequence{1, 2, 3}, GlossSequence{1, 2, 3});  // 0/3
  EXPECT_EQ(total, (EditStats{1, 0, 0, 4}));
  EXPECT_DOUBLE_EQ(wer(total), 0.25);
}

TEST(Report, RatesSumToWer) {
  std::mt19937_64 rng(3);
  EditStats total;
  for (int i = 0; i < 50; ++i) {
    GlossSequence ref = random_seq(rng, 8, 5);
    if (ref.empty()) ref.push_back(1);
    total += edit_stats(ref, random_seq(rng, 8, 5));
  }
  const WerReport r = make_report(total, 50);
  EXPECT_NEAR(r.wer, r.del_rate + r.ins_rate + r.sub_rate, 1e-15);
  EXPECT_DOUBLE_EQ(r.wer, wer(total));
  const std::string kv = format_report_kv(r);
  for (const char* key : {"wer=", "del_rate=", "ins_rate=", "sub_rate="})
    EXPECT_NE(kv.find(key), std::string::npos) << key;
  EXPECT_NE(format_report_text(r).find("del/ins"), std::string::npos);
}
