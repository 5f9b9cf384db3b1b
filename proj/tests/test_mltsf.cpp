#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mltsf/error.hpp"
#include "mltsf/gradcheck.hpp"
#include "mltsf/mltsf.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace mltsf;
using mltsf::testing::brute_select;
using mltsf::testing::gaussian;
using mltsf::testing::to_vec;

namespace {

using Mat = std::vector<std::vector<double>>;

FeatureSequence random_features(std::size_t t, std::size_t c, std::mt19937_64& rng) {
  return FeatureSequence(t, c, gaussian(t * c, rng));
}

// Each store entry gets N(0, 0.5) so biases, RPE and LN terms all matter.
ParamStore random_params(std::size_t c, const ScaleSet& scales, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParamStore store;
  init_mltsf_params(store, c, scales, rng);
  for (auto& [name, t] : store) {
    auto v = t.mutable_values();
    const auto g = gaussian(v.size(), rng, 0.5);
    std::copy(g.begin(), g.end(), v.begin());
    if (name.find("gamma") != std::string::npos)
      for (double& x : v) x += 1.0;
  }
  return store;
}

Mat conv3(const Mat& x, std::span<const double> w, std::span<const double> b) {
  const std::size_t len = x.size(), c = x[0].size(), o = b.size();
  Mat y(len, std::vector<double>(o));
  for (std::size_t i = 0; i < len; ++i)
    for (std::size_t oc = 0; oc < o; ++oc) {
      double acc = b[oc];
      for (std::size_t f = 0; f < 3; ++f) {
        const long long src = static_cast<long long>(i) + static_cast<long long>(f) - 1;
        if (src < 0 || src >= static_cast<long long>(len)) continue;
        for (std::size_t ic = 0; ic < c; ++ic) acc += x[src][ic] * w[(f * c + ic) * o + oc];
      }
      y[i][oc] = acc;
    }
  return y;
}

void ln_relu(Mat& x, std::span<const double> g, std::span<const double> b) {
  for (auto& row : x) {
    const double n = static_cast<double>(row.size());
    double mu = 0, var = 0;
    for (double v : row) mu += v;
    mu /= n;
    for (double v : row) var += (v - mu) * (v - mu);
    var /= n;
    for (std::size_t j = 0; j < row.size(); ++j)
      row[j] = std::max(0.0, (row[j] - mu) / std::sqrt(var + 1e-5) * g[j] + b[j]);
  }
}

std::vector<double> dense(const std::vector<double>& x, std::span<const double> w, std::span<const double> b) {
  std::vector<double> y(b.begin(), b.end());
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j) y[j] += x[i] * w[i * y.size() + j];
  return y;
}

// Step by step: gather, add rpe, (conv, LN, relu) x2, max over the neighbourhood, fc, gelu, fc.
std::vector<double> ptc_oracle(const FeatureSequence& s, const Neighborhood& n, const ParamStore& p,
                               const std::string& pre, std::size_t radius) {
  const std::size_t c = s.channels;
  const auto rpe = p.get(pre + "rpe").values();
  Mat x;
  for (std::size_t idx : n.indices) {
    const long long off = std::clamp(static_cast<long long>(idx) - static_cast<long long>(n.center),
                                     -static_cast<long long>(radius), static_cast<long long>(radius));
    std::vector<double> row(c);
    for (std::size_t j = 0; j < c; ++j) row[j] = s.frame(idx)[j] + rpe[(off + radius) * c + j];
    x.push_back(row);
  }
  x = conv3(x, p.get(pre + "conv1.weight").values(), p.get(pre + "conv1.bias").values());
  ln_relu(x, p.get(pre + "ln1.gamma").values(), p.get(pre + "ln1.beta").values());
  x = conv3(x, p.get(pre + "conv2.weight").values(), p.get(pre + "conv2.bias").values());
  ln_relu(x, p.get(pre + "ln2.gamma").values(), p.get(pre + "ln2.beta").values());
  std::vector<double> pooled(c, -INFINITY);
  for (const auto& row : x)
    for (std::size_t j = 0; j < c; ++j) pooled[j] = std::max(pooled[j], row[j]);
  auto h = dense(pooled, p.get(pre + "fc1.weight").values(), p.get(pre + "fc1.bias").values());
  for (double& v : h) v = v * 0.5 * (1.0 + std::erf(v / std::sqrt(2.0)));
  return dense(h, p.get(pre + "fc2.weight").values(), p.get(pre + "fc2.bias").values());
}

Mat similarity_oracle(const FeatureSequence& s) {
  const std::size_t t = s.frames, c = s.channels;
  Mat d(t, std::vector<double>(t));
  for (std::size_t i = 0; i < t; ++i) {
    double mx = -INFINITY;
    for (std::size_t j = 0; j < t; ++j) {
      double dot = 0;
      for (std::size_t ch = 0; ch < c; ++ch) dot += s.frame(i)[ch] * s.frame(j)[ch];
      d[i][j] = dot / static_cast<double>(c);
      mx = std::max(mx, d[i][j]);
    }
    double z = 0;
    for (double& v : d[i]) z += (v = std::exp(v - mx));
    for (double& v : d[i]) v /= z;
  }
  return d;
}

}  // namespace

TEST(Similarity, SingletonAndTies) {
  const SimilarityMatrix one = similarity_matrix(FeatureSequence(1, 3, {1, 2, 3}));
  EXPECT_EQ(one.values, std::vector<double>{1.0});
  const SimilarityMatrix tied = similarity_matrix(FeatureSequence(3, 2, {1, 1, 1, 1, 1, 1}));
  for (double v : tied.values) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(Similarity, MatchesTwoLoopOracle) {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    const FeatureSequence s = random_features(4 + rep % 5, 1 + rep % 7, rng);
    const SimilarityMatrix d = similarity_matrix(s);
    const Mat want = similarity_oracle(s);
    for (std::size_t i = 0; i < s.frames; ++i) {
      double sum = 0;
      for (std::size_t j = 0; j < s.frames; ++j) {
        EXPECT_NEAR(d.row(i)[j], want[i][j], 1e-12);
        sum += d.row(i)[j];
      }
      EXPECT_NEAR(sum, 1.0, 1e-9);
    }
  }
}

TEST(Similarity, RejectsNonFinite) {
  EXPECT_THROW(similarity_matrix(FeatureSequence(2, 1, {1.0, NAN})), NumericError);
}

TEST(Select, TieRuleExamples) {
  const std::vector<double> flat(5, 0.2);
  EXPECT_EQ(select_neighbors(flat, 2, 2, SelectorMode::kLocalTopK).indices, (std::vector<std::size_t>{1, 2}));
  const std::vector<double> row{0.5, 0.2, 0.3, 0.0, 0.0};
  EXPECT_EQ(select_neighbors(row, 0, 2, SelectorMode::kLocalTopK).indices, (std::vector<std::size_t>{0, 2}));
  // Centre mode ignores scores and prefers the left neighbour on a tie.
  EXPECT_EQ(select_neighbors(row, 2, 2, SelectorMode::kCenter).indices, (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(select_neighbors(row, 4, 3, SelectorMode::kGlobal).indices, (std::vector<std::size_t>{0, 2, 4}));
  EXPECT_EQ(select_neighbors(row, 1, 3, SelectorMode::kGlobal).indices, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Select, CentreKeptWhenALargerNeighbourOutscoresIt) {
  // s_1 . s_2 = 2 > s_1 . s_1 = 1.
  const FeatureSequence s(3, 1, {0.0, 1.0, 2.0});
  const SimilarityMatrix d = similarity_matrix(s);
  EXPECT_GT(d.row(1)[2], d.row(1)[1]);
  EXPECT_EQ(select_neighbors(d, 1, 1, SelectorMode::kLocalTopK).indices, (std::vector<std::size_t>{1}));
  EXPECT_EQ(select_neighbors(d, 1, 2, SelectorMode::kLocalTopK).indices, (std::vector<std::size_t>{1, 2}));
}

TEST(Select, InfeasibleWindowThrows) {
  const std::vector<double> row{0.5, 0.5};
  EXPECT_THROW(select_neighbors(row, 0, 3, SelectorMode::kLocalTopK), InfeasibleError);
  EXPECT_THROW(select_neighbors(row, 0, 3, SelectorMode::kGlobal), InfeasibleError);
}

TEST(Select, BruteForceOracleAllModes) {
  std::mt19937_64 rng(31);
  const SelectorMode modes[] = {SelectorMode::kLocalTopK, SelectorMode::kCenter, SelectorMode::kGlobal};
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t k = 1 + rng() % 8;
    const std::size_t t_len = k + 1 + rng() % (40 - k);
    std::vector<double> row(t_len);
    switch (rep % 4) {
      case 0:  // all tied
        std::fill(row.begin(), row.end(), 1.0 / static_cast<double>(t_len));
        break;
      case 1:  // few distinct levels, many ties
        for (double& v : row) v = static_cast<double>(rng() % 3);
        break;
      default:
        for (double& v : row) v = std::uniform_real_distribution<double>(0, 1)(rng);
    }
    // Boundaries get extra weight.
    const std::size_t t = rep % 5 == 0 ? 0 : rep % 5 == 1 ? t_len - 1 : rng() % t_len;
    for (SelectorMode mode : modes) {
      const Neighborhood n = select_neighbors(row, t, k, mode);
      ASSERT_EQ(n.indices, brute_select(row, t, k, mode)) << "rep " << rep << " mode " << static_cast<int>(mode);
      ASSERT_EQ(n.center, t);
    }
  }
}

TEST(Select, LocalityAndSelfAcrossRandomInputs) {
  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t k = 1 + rng() % 8;
    const FeatureSequence s = random_features(k + 1 + rng() % 30, 1 + rng() % 6, rng);
    const SimilarityMatrix d = similarity_matrix(s);
    for (SelectorMode mode : {SelectorMode::kLocalTopK, SelectorMode::kCenter}) {
      for (const Neighborhood& n : select_all(d, k, mode)) {
        ASSERT_EQ(n.indices.size(), k);
        ASSERT_TRUE(std::is_sorted(n.indices.begin(), n.indices.end()));
        ASSERT_EQ(std::adjacent_find(n.indices.begin(), n.indices.end()), n.indices.end());
        ASSERT_TRUE(std::binary_search(n.indices.begin(), n.indices.end(), n.center));
        for (long long off : n.offsets()) ASSERT_LE(std::llabs(off), static_cast<long long>(k));
      }
    }
  }
}

TEST(Select, RawScoresGiveSameArgsetAsSoftmax) {
  std::mt19937_64 rng(12);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t k = 1 + rng() % 6;
    const FeatureSequence s = random_features(k + 1 + rng() % 20, 4, rng);
    const SimilarityMatrix d = similarity_matrix(s);
    const std::vector<double> raw = similarity_scores(s);
    for (std::size_t t = 0; t < s.frames; ++t) {
      const auto raw_row = std::span<const double>(raw).subspan(t * s.frames, s.frames);
      ASSERT_EQ(select_neighbors(d, t, k, SelectorMode::kLocalTopK).indices,
                select_neighbors(raw_row, t, k, SelectorMode::kLocalTopK).indices);
    }
  }
}

TEST(Ptc, ScriptedOracleOneTimestep) {
  std::mt19937_64 rng(3);
  const ScaleSet scales{{3}};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ParamStore p = random_params(2, scales, seed);
    const FeatureSequence s = random_features(7, 2, rng);
    // Same index set at every centre, so offsets differ per t and the rpe rows get exercised.
    std::vector<Neighborhood> hoods(7);
    for (std::size_t t = 0; t < 7; ++t) hoods[t] = {t, {0, 2, 3}};
    const Tensor out = ptc_forward(s.to_tensor(), hoods, ConvolverParams::bind(p, scale_prefix(0)), MltsfVariant{});
    for (std::size_t t = 0; t < 7; ++t) {
      const auto want = ptc_oracle(s, hoods[t], p, scale_prefix(0), 3);
      for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(out.values()[t * 2 + j], want[j], 1e-10);
    }
  }
}

TEST(Ptc, ZeroParamsGiveZeroOutput) {
  std::mt19937_64 rng(5);
  const ScaleSet scales{{4}};
  ParamStore p;
  init_mltsf_params(p, 3, scales, rng);
  for (auto& [name, t] : p)
    for (double& v : t.mutable_values()) v = 0.0;
  const FeatureSequence s = random_features(9, 3, rng);
  const auto hoods = select_all(similarity_matrix(s), 4, SelectorMode::kLocalTopK);
  const Tensor out = ptc_forward(s.to_tensor(), hoods, ConvolverParams::bind(p, scale_prefix(0)), MltsfVariant{});
  for (double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(Ptc, ZeroRpeIsBitIdenticalToRpeOff) {
  std::mt19937_64 rng(6);
  const ScaleSet scales{{5}};
  ParamStore p = random_params(4, scales, 77);
  for (double& v : p.get(scale_prefix(0) + "rpe").mutable_values()) v = 0.0;
  for (SelectorMode mode : {SelectorMode::kLocalTopK, SelectorMode::kGlobal, SelectorMode::kCenter}) {
    const FeatureSequence s = random_features(15, 4, rng);
    const auto hoods = select_all(similarity_matrix(s), 5, mode);
    MltsfVariant on, off;
    off.use_rpe = false;
    const auto bound = ConvolverParams::bind(p, scale_prefix(0));
    EXPECT_EQ(to_vec(ptc_forward(s.to_tensor(), hoods, bound, on)),
              to_vec(ptc_forward(s.to_tensor(), hoods, bound, off)));
  }
}

TEST(Ptc, MismatchedNeighbourhoodSizesRejected) {
  const ParamStore p = random_params(2, ScaleSet{{2}}, 1);
  const FeatureSequence s(3, 2, std::vector<double>(6, 1.0));
  const std::vector<Neighborhood> hoods{{0, {0, 1}}, {1, {0, 1, 2}}, {2, {1, 2}}};
  EXPECT_THROW(ptc_forward(s.to_tensor(), hoods, ConvolverParams::bind(p, scale_prefix(0)), MltsfVariant{}),
               ConfigError);
}

TEST(Cma, ZeroWeightsEqualAverage) {
  std::mt19937_64 rng(10);
  const std::size_t t = 6, c = 4, n = 3;
  const Tensor s = mltsf::testing::random_tensor({t, c}, rng);
  const Tensor per = mltsf::testing::random_tensor({t, n, c}, rng);
  const AggregatorParams zero{Tensor::zeros({c, n}), Tensor::zeros({n})};
  const auto dyn = to_vec(cma_forward(s, per, zero, AggregatorMode::kDynamic));
  const auto avg = to_vec(cma_forward(s, per, zero, AggregatorMode::kAverage));
  for (std::size_t i = 0; i < dyn.size(); ++i) EXPECT_NEAR(dyn[i], avg[i], 1e-12);
}

TEST(Cma, SaturatedBiasPicksScaleZero) {
  std::mt19937_64 rng(11);
  const Tensor s = mltsf::testing::random_tensor({5, 3}, rng);
  const Tensor per = mltsf::testing::random_tensor({5, 3, 3}, rng);
  const AggregatorParams p{Tensor::zeros({3, 3}), Tensor::from({3}, {10, -10, -10})};
  const auto out = to_vec(cma_forward(s, per, p, AggregatorMode::kDynamic));
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t j = 0; j < 3; ++j) {
      // 2 e^-20 of the other scales leaks through.
      EXPECT_NEAR(out[t * 3 + j], per.values()[(t * 3 + 0) * 3 + j], 1e-8);
    }
}

TEST(Cma, MatchesDirectWeightedSum) {
  std::mt19937_64 rng(12);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t t = 1 + rep % 7, c = 1 + rep % 5, n = 1 + rep % 4;
    const Tensor s = mltsf::testing::random_tensor({t, c}, rng);
    const Tensor per = mltsf::testing::random_tensor({t, n, c}, rng);
    const AggregatorParams p{mltsf::testing::random_tensor({c, n}, rng), mltsf::testing::random_tensor({n}, rng)};
    const auto out = to_vec(cma_forward(s, per, p, AggregatorMode::kDynamic));
    const auto w = to_vec(cma_weights(s, p, AggregatorMode::kDynamic));
    for (std::size_t i = 0; i < t; ++i) {
      std::vector<double> logit(n);
      for (std::size_t j = 0; j < n; ++j) {
        logit[j] = p.bias.values()[j];
        for (std::size_t ch = 0; ch < c; ++ch) logit[j] += s.values()[i * c + ch] * p.weight.values()[ch * n + j];
      }
      const double mx = *std::max_element(logit.begin(), logit.end());
      double z = 0;
      for (double& l : logit) z += (l = std::exp(l - mx));
      double wsum = 0;
      for (std::size_t j = 0; j < n; ++j) {
        EXPECT_NEAR(w[i * n + j], logit[j] / z, 1e-12);
        wsum += w[i * n + j];
      }
      EXPECT_NEAR(wsum, 1.0, 1e-12);
      for (std::size_t ch = 0; ch < c; ++ch) {
        double want = 0;
        for (std::size_t j = 0; j < n; ++j) want += logit[j] / z * per.values()[(i * n + j) * c + ch];
        EXPECT_NEAR(out[i * c + ch], want, 1e-12);
      }
    }
  }
}

TEST(Module, SingleScaleEqualsItsPtc) {
  std::mt19937_64 rng(13);
  const ScaleSet scales{{4}};
  const ParamStore p = random_params(3, scales, 5);
  const FeatureSequence s = random_features(12, 3, rng);
  const auto hoods = select_all(similarity_matrix(s), 4, SelectorMode::kLocalTopK);
  const auto ptc = to_vec(ptc_forward(s.to_tensor(), hoods, ConvolverParams::bind(p, scale_prefix(0)), MltsfVariant{}));
  const auto full = to_vec(mltsf_forward(s, p, scales, MltsfVariant{}));
  for (std::size_t i = 0; i < ptc.size(); ++i) EXPECT_NEAR(full[i], ptc[i], 1e-14);
}

TEST(Module, ShapeContract) {
  std::mt19937_64 rng(14);
  const ScaleSet scales{{16, 12, 8}};
  const ParamStore p = random_params(4, scales, 2);
  for (std::size_t t = 17; t <= 64; ++t) {
    const Tensor out = mltsf_forward(random_features(t, 4, rng), p, scales, MltsfVariant{});
    ASSERT_EQ(out.shape(), (Shape{t, 4}));
  }
  EXPECT_THROW(mltsf_forward(random_features(16, 4, rng), p, scales, MltsfVariant{}), InfeasibleError);
}

TEST(Module, ComposedOracle) {
  std::mt19937_64 rng(15);
  const ScaleSet scales{{8, 6, 4}};
  const std::size_t c = 5;
  const ParamStore p = random_params(c, scales, 9);
  const FeatureSequence s = random_features(20, c, rng);
  MltsfTrace trace;
  const auto out = to_vec(mltsf_forward(s, p, scales, MltsfVariant{}, &trace));

  const Mat d = similarity_oracle(s);
  const auto cw = p.get("mltsf.cma.weight").values();
  const auto cb = p.get("mltsf.cma.bias").values();
  double worst = 0.0;
  for (std::size_t t = 0; t < 20; ++t) {
    std::vector<double> logit(cb.begin(), cb.end());
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t ch = 0; ch < c; ++ch) logit[j] += s.frame(t)[ch] * cw[ch * 3 + j];
    const double mx = *std::max_element(logit.begin(), logit.end());
    double z = 0;
    for (double& l : logit) z += (l = std::exp(l - mx));
    std::vector<double> fused(c, 0.0);
    for (std::size_t j = 0; j < 3; ++j) {
      const std::size_t k = scales.radii[j];
      const Neighborhood n{t, brute_select(d[t], t, k, SelectorMode::kLocalTopK)};
      ASSERT_EQ(n.indices, trace.neighborhoods[j][t].indices);
      const auto y = ptc_oracle(s, n, p, scale_prefix(j), k);
      for (std::size_t ch = 0; ch < c; ++ch) fused[ch] += logit[j] / z * y[ch];
    }
    for (std::size_t ch = 0; ch < c; ++ch) worst = std::max(worst, std::abs(fused[ch] - out[t * c + ch]));
  }
  EXPECT_LE(worst, 1e-9);
}

TEST(Module, AverageAggregatorAndVariantsRun) {
  std::mt19937_64 rng(16);
  const ScaleSet scales{{4, 2}};
  const ParamStore p = random_params(3, scales, 4);
  const FeatureSequence s = random_features(10, 3, rng);
  MltsfVariant v;
  v.aggregator = AggregatorMode::kAverage;
  v.pool = ops::PoolMode::kMean;
  v.use_tcn = false;
  EXPECT_EQ(mltsf_forward(s, p, scales, v).shape(), (Shape{10, 3}));
  v.fusion = FusionMode::kSparseAttention;
  const auto out = to_vec(mltsf_forward(s, p, scales, v));
  // Convex combinations of input frames stay inside the per-channel input range.
  for (std::size_t ch = 0; ch < 3; ++ch) {
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t t = 0; t < 10; ++t) {
      lo = std::min(lo, s.frame(t)[ch]);
      hi = std::max(hi, s.frame(t)[ch]);
    }
    for (std::size_t t = 0; t < 10; ++t) {
      EXPECT_GE(out[t * 3 + ch], lo - 1e-12);
      EXPECT_LE(out[t * 3 + ch], hi + 1e-12);
    }
  }
}

TEST(Module, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(17);
  const ScaleSet scales{{4, 3}};
  ParamStore p = random_params(3, scales, 6);
  const FeatureSequence s = random_features(9, 3, rng);
  auto fn = [&](ParamStore& params) { return ops::sum_squares(mltsf_forward(s, params, scales, MltsfVariant{})); };
  const GradReport r = finite_diff_check(fn, p, 1e-5, 1e-4);
  EXPECT_TRUE(r.passed) << r.worst_param << " " << r.global_max;
  EXPECT_EQ(r.unresolved, 0u);
  EXPECT_EQ(r.per_param.size(), p.size());
}

TEST(Module, ChannelPermutationEquivariance) {
  std::mt19937_64 rng(18);
  const ScaleSet scales{{4, 2}};
  const std::size_t c = 4;
  const std::vector<std::size_t> perm{2, 0, 3, 1};  // new channel i holds old perm[i]
  const ParamStore p = random_params(c, scales, 8);
  const FeatureSequence s = random_features(11, c, rng);

  FeatureSequence ps = s;
  for (std::size_t t = 0; t < s.frames; ++t)
    for (std::size_t i = 0; i < c; ++i) ps.values[t * c + i] = s.frame(t)[perm[i]];

  ParamStore pp = p.clone();
  for (auto& [name, t] : pp) {
    const auto src = p.get(name).values();
    auto dst = t.mutable_values();
    const Shape& sh = t.shape();
    if (name.ends_with("cma.weight")) {  // C' x n
      const std::size_t n = sh[1];
      for (std::size_t i = 0; i < c; ++i)
        for (std::size_t j = 0; j < n; ++j) dst[i * n + j] = src[perm[i] * n + j];
    } else if (name.ends_with("cma.bias")) {
      continue;
    } else if (sh.size() == 1) {
      for (std::size_t i = 0; i < c; ++i) dst[i] = src[perm[i]];
    } else if (name.ends_with("rpe")) {
      for (std::size_t r = 0; r < sh[0]; ++r)
        for (std::size_t i = 0; i < c; ++i) dst[r * c + i] = src[r * c + perm[i]];
    } else if (sh.size() == 2) {
      for (std::size_t i = 0; i < c; ++i)
        for (std::size_t j = 0; j < c; ++j) dst[i * c + j] = src[perm[i] * c + perm[j]];
    } else {
      for (std::size_t f = 0; f < 3; ++f)
        for (std::size_t i = 0; i < c; ++i)
          for (std::size_t j = 0; j < c; ++j) dst[(f * c + i) * c + j] = src[(f * c + perm[i]) * c + perm[j]];
    }
  }
  const auto a = to_vec(mltsf_forward(s, p, scales, MltsfVariant{}));
  const auto b = to_vec(mltsf_forward(ps, pp, scales, MltsfVariant{}));
  for (std::size_t t = 0; t < s.frames; ++t)
    for (std::size_t i = 0; i < c; ++i) EXPECT_NEAR(b[t * c + i], a[t * c + perm[i]], 1e-12);
}
