#include <gtest/gtest.h>

#include <cmath>

#include "stan/error.hpp"
#include "stan/temporal.hpp"
#include "test_util.hpp"

namespace stan {
namespace {

using testing::random_tensor;

struct TemporalFixture {
  ParameterSet ps;
  EncoderParams enc;
  DecoderParams dec;

  TemporalFixture(std::size_t dm, std::size_t d, bool attention, std::uint64_t seed) {
    Rng rng(RngSeed{seed});
    enc.u = &ps.add("enc.u", random_tensor(dm, d, rng, -0.6, 0.6));
    enc.w = &ps.add("enc.w", random_tensor(d, d, rng, -0.6, 0.6));
    dec.u = &ps.add("dec.u", random_tensor(1, d, rng, -0.6, 0.6));
    dec.w = &ps.add("dec.w", random_tensor(d, d, rng, -0.6, 0.6));
    if (attention) {
      dec.score = &ps.add("dec.score", random_tensor(d, d, rng));
      dec.combine = &ps.add("dec.combine", random_tensor(2 * d, d, rng, -0.6, 0.6));
    }
    dec.out = &ps.add("dec.out", random_tensor(d, 1, rng));
  }
};

TEST(EncoderStep, ZeroInputZeroState) {
  Parameter u("u", Tensor(2, 3, 0.4)), w("w", Tensor(3, 3, -0.2));
  const Tensor h = encoder_step(Tensor(1, 2), Tensor(1, 3), {&u, &w});
  for (double v : h.data()) {
    EXPECT_EQ(v, 0.0);
  }
}

TEST(EncoderStep, ScalarTanh) {
  Parameter u("u", Tensor(1, 1, 1.0)), w("w", Tensor(1, 1, 1.0));
  const Tensor h = encoder_step(Tensor(1, 1, 0.5), Tensor(1, 1), {&u, &w});
  EXPECT_NEAR(h[0], 0.46211715726, 1e-10);
  EXPECT_THROW(encoder_step(Tensor(1, 2), Tensor(1, 1), {&u, &w}), ShapeError);
}

TEST(EncodeSequence, StartsFromZeroStateAndIsBounded) {
  TemporalFixture f(4, 6, true, 61);
  Rng rng(RngSeed{62});
  std::vector<Tensor> inputs;
  for (int t = 0; t < 12; ++t) inputs.push_back(random_tensor(3, 4, rng, -5, 5));
  const auto states = encode_sequence(inputs, f.enc);
  ASSERT_EQ(states.size(), 12u);
  EXPECT_EQ(states[0], encoder_step(inputs[0], Tensor(3, 6), f.enc));
  for (const Tensor& h : states) {
    for (double v : h.data()) {
      EXPECT_GT(v, -1.0);
      EXPECT_LT(v, 1.0);
    }
  }
}

TEST(GlobalAttention, HandComputedScores) {
  const Parameter score("w", Tensor::identity(2));
  const std::vector<Tensor> states{Tensor::from_rows({{0, 1}}), Tensor::from_rows({{2, 0}})};
  const GlobalAttention a = global_attention(Tensor::from_rows({{1, 0}}), states, score);
  EXPECT_NEAR(a.weights[0], 0.1192, 1e-3);
  EXPECT_NEAR(a.weights[1], 0.8808, 1e-3);
  EXPECT_NEAR(a.context[0], 2.0 * a.weights[1], 1e-15);
  EXPECT_NEAR(a.context[1], a.weights[0], 1e-15);
}

TEST(GlobalAttention, SingleStateGetsAllWeight) {
  Rng rng(RngSeed{63});
  const Parameter score("w", random_tensor(3, 3, rng));
  const std::vector<Tensor> states{random_tensor(1, 3, rng)};
  const GlobalAttention a = global_attention(random_tensor(1, 3, rng), states, score);
  EXPECT_EQ(a.weights[0], 1.0);
  EXPECT_EQ(a.context, states[0]);
}

TEST(GlobalAttention, ZeroScoreIsUniform) {
  Rng rng(RngSeed{64});
  const Parameter score("w", Tensor(3, 3));
  std::vector<Tensor> states;
  for (int t = 0; t < 4; ++t) states.push_back(random_tensor(2, 3, rng));
  const GlobalAttention a = global_attention(random_tensor(2, 3, rng), states, score);
  for (double w : a.weights.data()) EXPECT_DOUBLE_EQ(w, 0.25);
  for (std::size_t b = 0; b < 2; ++b) {
    for (std::size_t c = 0; c < 3; ++c) {
      double mean = 0.0;
      for (const Tensor& h : states) mean += h(b, c) / 4.0;
      EXPECT_NEAR(a.context(b, c), mean, 1e-15);
    }
  }
}

TEST(GlobalAttention, WeightsAreDistributionsAndContextInHull) {
  Rng rng(RngSeed{65});
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t T = 1 + trial % 12, B = 1 + trial % 3, d = 4;
    const Parameter score("w", random_tensor(d, d, rng, -3, 3));
    std::vector<Tensor> states;
    for (std::size_t t = 0; t < T; ++t) states.push_back(random_tensor(B, d, rng));
    const GlobalAttention a = global_attention(random_tensor(B, d, rng), states, score);
    ASSERT_EQ(a.weights.cols(), T);
    for (std::size_t b = 0; b < B; ++b) {
      double sum = 0.0;
      for (double w : a.weights.row(b)) {
        EXPECT_GE(w, 0.0);
        sum += w;
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
      for (std::size_t c = 0; c < d; ++c) {
        double lo = states[0](b, c), hi = lo;
        for (const Tensor& h : states) {
          lo = std::min(lo, h(b, c));
          hi = std::max(hi, h(b, c));
        }
        EXPECT_GE(a.context(b, c), lo - 1e-12);
        EXPECT_LE(a.context(b, c), hi + 1e-12);
      }
    }
  }
}

TEST(DecoderStep, ZeroWeightsCascadeToZero) {
  TemporalFixture f(4, 3, true, 66);
  for (auto& [name, p] : f.ps) p.value.fill(0.0);
  Rng rng(RngSeed{67});
  const std::vector<Tensor> states{random_tensor(1, 3, rng), random_tensor(1, 3, rng)};
  DecoderStepCache cache;
  const DecoderStep step =
      decoder_step(Tensor(1, 1, 0.8), random_tensor(1, 3, rng), states, f.dec, &cache);
  EXPECT_EQ(step.y[0], 0.0);
  for (double v : step.state.data()) EXPECT_EQ(v, 0.0);
  for (double v : cache.attentional.data()) EXPECT_EQ(v, 0.0);
  for (double w : cache.attention.weights.data()) EXPECT_DOUBLE_EQ(w, 0.5);
}

TEST(DecoderStep, ZeroOutputProjectionGivesZero) {
  TemporalFixture f(4, 3, true, 68);
  f.dec.out->value.fill(0.0);
  Rng rng(RngSeed{69});
  const std::vector<Tensor> states{random_tensor(2, 3, rng)};
  const DecoderStep step =
      decoder_step(random_tensor(2, 1, rng), random_tensor(2, 3, rng), states, f.dec);
  for (double v : step.y.data()) EXPECT_EQ(v, 0.0);
}

TEST(DecoderStep, WithoutAttentionOutputReadsTheState) {
  TemporalFixture f(4, 3, false, 70);
  Rng rng(RngSeed{71});
  const std::vector<Tensor> states{random_tensor(1, 3, rng)};
  const DecoderStep step =
      decoder_step(Tensor(1, 1, 0.3), random_tensor(1, 3, rng), states, f.dec);
  EXPECT_EQ(step.y, matmul(step.state, f.dec.out->value));
}

TEST(DecodeHorizon, OneStepIsOneDecoderStep) {
  TemporalFixture f(4, 3, true, 72);
  Rng rng(RngSeed{73});
  const std::vector<Tensor> states{random_tensor(2, 3, rng), random_tensor(2, 3, rng)};
  const Tensor x_last = random_tensor(2, 1, rng);
  const auto ys = decode_horizon(states, x_last, 1, f.dec);
  ASSERT_EQ(ys.size(), 1u);
  EXPECT_EQ(ys[0], decoder_step(x_last, states.back(), states, f.dec).y);
}

TEST(DecodeHorizon, FreeRunningUnrollIsDeterministic) {
  TemporalFixture f(4, 3, true, 74);
  Rng rng(RngSeed{75});
  const std::vector<Tensor> states{random_tensor(1, 3, rng), random_tensor(1, 3, rng)};
  const Tensor x_last(1, 1, 0.4);
  const auto a = decode_horizon(states, x_last, 3, f.dec);
  const auto b = decode_horizon(states, x_last, 3, f.dec);
  ASSERT_EQ(a.size(), 3u);
  for (int k = 0; k < 3; ++k) EXPECT_EQ(a[k], b[k]);
  // Step 2 is fed step 1's own forecast.
  const DecoderStep s1 = decoder_step(x_last, states.back(), states, f.dec);
  const DecoderStep s2 = decoder_step(s1.y, s1.state, states, f.dec);
  EXPECT_EQ(a[1], s2.y);
}

TEST(DecodeHorizon, ZeroWeightsGiveZeros) {
  TemporalFixture f(4, 3, true, 76);
  for (auto& [name, p] : f.ps) p.value.fill(0.0);
  const std::vector<Tensor> states{Tensor(1, 3, 0.5)};
  for (const Tensor& y : decode_horizon(states, Tensor(1, 1, 1.0), 3, f.dec)) {
    EXPECT_EQ(y[0], 0.0);
  }
}

double temporal_objective(TemporalFixture& f, Parameter& x, const Tensor& x_last,
                          const std::vector<Tensor>& probes, bool grads) {
  const std::size_t T = 4, B = x.value.rows() / T;
  std::vector<Tensor> inputs;
  for (std::size_t t = 0; t < T; ++t) {
    Tensor in(B, x.value.cols());
    std::copy_n(x.value.row(t * B).begin(), B * x.value.cols(), in.raw());
    inputs.push_back(in);
  }
  EncoderCache ec;
  DecodeCache dc;
  const auto states = encode_sequence(inputs, f.enc, &ec);
  const auto ys = decode_horizon(states, x_last, probes.size(), f.dec, &dc);
  double total = 0.0;
  for (std::size_t k = 0; k < ys.size(); ++k) total += testing::project(ys[k], probes[k]);
  if (grads) {
    const auto gs = decode_horizon_backward(probes, states, f.dec, dc);
    const auto gin = encode_sequence_backward(gs, f.enc, ec);
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t i = 0; i < gin[t].size(); ++i) x.grad[t * gin[t].size() + i] += gin[t][i];
    }
  }
  return total;
}

TEST(Temporal, GradientCheckThroughTimeAndAttention) {
  for (bool attention : {true, false}) {
    TemporalFixture f(8, 8, attention, attention ? 77 : 78);
    Rng rng(RngSeed{79});
    Parameter& x = f.ps.add("x", random_tensor(4 * 2, 8, rng));
    const Tensor x_last = random_tensor(2, 1, rng);
    const std::vector<Tensor> probes{random_tensor(2, 1, rng), random_tensor(2, 1, rng)};
    const GradCheckResult r = grad_check(
        [&](bool g) { return temporal_objective(f, x, x_last, probes, g); }, f.ps);
    EXPECT_LT(r.max_relative_error, 1e-5) << "attention=" << attention << " "
                                          << r.worst_parameter;
  }
}

}  // namespace
}  // namespace stan
