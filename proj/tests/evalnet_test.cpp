// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "test_util.hpp"
#include "vtcas/error.hpp"
#include "vtcas/evalnet.hpp"

namespace vtcas {
namespace {

using testing::expect_tensor_near;

// --- closed-form parameter counts --------------------------------------------

std::size_t linear_params(std::size_t in, std::size_t out, bool bias = true) { return in * out + (bias ? out : 0); }

std::size_t op_params(OpKind k, const OpSettings& s) {
  const std::size_t c = s.channels;
  const std::size_t conv_unit = 9 * c + c * c + 2 * c;
  switch (k) {
    case OpKind::kNone:
    case OpKind::kSkip:
      return 0;
    case OpKind::kSepConv3x3:
      return 2 * conv_unit;
    case OpKind::kDilConv3x3:
      return conv_unit;
    case OpKind::kEca3x3:
      return 9 * c + 2 * c + s.eca_kernel;
    case OpKind::kWMsa:
    case OpKind::kSwMsa: {
      const std::size_t side = 2 * s.window - 1;
      return 2 * c + 3 * linear_params(c, c) + linear_params(c, c) + side * side * s.heads + 2 * c +
             linear_params(c, s.mlp_ratio * c) + linear_params(s.mlp_ratio * c, c);
    }
  }
  return 0;
}

std::size_t closed_form(const Genotype& g, const EvalConfig& cfg) {
  std::size_t n = linear_params(cfg.in_channels * cfg.patch * cfg.patch, cfg.dims[0]) + 2 * cfg.dims[0];
  const auto shapes = stage_trajectory(cfg);
  for (std::size_t s = 0; s < 4; ++s) {
    if (s > 0) n += 2 * 4 * cfg.dims[s - 1] + linear_params(4 * cfg.dims[s - 1], cfg.dims[s], false);
    OpSettings os;
    os.channels = cfg.dims[s];
    os.heads = cfg.heads[s];
    os.window = shapes[s].window;
    os.mlp_ratio = cfg.mlp_ratio;
    std::size_t cell = 0;
    for (OpKind k : g.ops) cell += op_params(k, os);
    n += cfg.depths[s] * cell;
  }
  return n + 2 * cfg.dims[3] + linear_params(cfg.dims[3], cfg.classes);
}

TEST(CountParams, LinearLayer) {
  Rng rng(1);
  Linear l(7, 5, rng);
  ParamList ps;
  l.collect(ps);
  EXPECT_EQ(count_params(ps), 7u * 5u + 5u);
}

TEST(CountParams, ToyNetMatchesPerLayerAudit) {
  const EvalConfig cfg = toy_eval_config();
  for (const Genotype& g : {reference_genotype(), uniform_genotype(OpKind::kWMsa), uniform_genotype(OpKind::kDilConv3x3),
                            uniform_genotype(OpKind::kSkip)}) {
    Rng rng(2);
    auto net = build_eval_net(g, cfg, rng);
    EXPECT_EQ(count_params(*net), closed_form(g, cfg)) << genotype_encode(g);
  }
}

TEST(CountParams, AllSkipCheaperThanReference) {
  const EvalConfig cfg = toy_eval_config();
  Rng r1(3), r2(3);
  auto skip = build_eval_net(uniform_genotype(OpKind::kSkip), cfg, r1);
  auto ref = build_eval_net(reference_genotype(), cfg, r2);
  EXPECT_LT(count_params(*skip), count_params(*ref));
}

TEST(CountParams, FullScaleClosedFormNearReported) {
  // Built net checked against the audit at toy scale; here only the formula.
  const double n = static_cast<double>(closed_form(reference_genotype(), full_scale_config()));
  EXPECT_NEAR(n / 31.2e6, 1.0, 0.2) << n;
}

// --- configuration and trajectory ------------------------------------------

TEST(Trajectory, FullScale) {
  const auto st = stage_trajectory(full_scale_config());
  const std::size_t tokens[] = {3136, 784, 196, 49}, dims[] = {96, 192, 384, 768}, heads[] = {3, 6, 12, 24};
  const std::size_t depths[] = {2, 2, 6, 2};
  ASSERT_EQ(st.size(), 4u);
  for (std::size_t s = 0; s < 4; ++s) {
    EXPECT_EQ(st[s].tokens, tokens[s]);
    EXPECT_EQ(st[s].dim, dims[s]);
    EXPECT_EQ(st[s].heads, heads[s]);
    EXPECT_EQ(st[s].depth, depths[s]);
    EXPECT_EQ(st[s].dim / st[s].heads, 32u);
  }
  EXPECT_EQ(st[3].window, 7u);
  EXPECT_NO_THROW(validate(full_scale_config()));
}

TEST(Trajectory, ToyAndScaling) {
  const auto st = stage_trajectory(toy_eval_config());
  const std::size_t tokens[] = {256, 64, 16, 4};
  for (std::size_t s = 0; s < 4; ++s) EXPECT_EQ(st[s].tokens, tokens[s]);
  for (std::size_t side : {32u, 64u, 128u, 224u, 256u}) {
    EvalConfig c = full_scale_config();
    c.image_side = side;
    c.window = 1;
    const auto t = stage_trajectory(c);
    for (std::size_t s = 0; s < 4; ++s) {
      const std::size_t g = side / (4u << s);
      EXPECT_EQ(t[s].tokens, g * g);
    }
  }
}

TEST(Trajectory, InvalidConfigs) {
  EvalConfig c = toy_eval_config();
  c.dims[2] = 48;
  EXPECT_THROW(validate(c), ConfigError);
  c = toy_eval_config();
  c.heads[1] = 3;
  EXPECT_THROW(validate(c), ConfigError);
  c = toy_eval_config();
  c.image_side = 66;
  EXPECT_THROW(validate(c), ConfigError);
  c = toy_eval_config();
  c.image_side = 48;  // stage grids 12, 6, 3: the last merge sees an odd grid
  EXPECT_THROW(validate(c), ConfigError);
  c = toy_eval_config();
  c.window = 3;
  EXPECT_THROW(validate(c), ConfigError);
  Rng rng(1);
  EXPECT_THROW(EvalNet(reference_genotype(), c, rng), ConfigError);
}

// --- patch embedding / merging ---------------------------------------------

TEST(PatchEmbed, LoopOracle) {
  Rng rng(4);
  const std::size_t b = 2, cin = 3, side = 8, p = 4, d = 5;
  PatchEmbed pe(cin, p, d, rng, false);
  pe.proj.bias->value = Tensor::randn(Shape{d}, rng);
  const Tensor img = Tensor::randn(Shape{b, cin, side, side}, rng);
  Graph g;
  Ctx ctx{g, true};
  TokenMap t = pe.forward(ctx, g.input(img));
  ASSERT_EQ(t.tokens().shape(), (Shape{b, 4, d}));
  EXPECT_EQ(t.height(), 2u);
  std::vector<double> expect;
  const Tensor& w = pe.proj.weight.value;
  for (std::size_t n = 0; n < b; ++n)
    for (std::size_t ty = 0; ty < 2; ++ty)
      for (std::size_t tx = 0; tx < 2; ++tx)
        for (std::size_t o = 0; o < d; ++o) {
          double acc = pe.proj.bias->value[o];
          for (std::size_t c = 0; c < cin; ++c)
            for (std::size_t dy = 0; dy < p; ++dy)
              for (std::size_t dx = 0; dx < p; ++dx)
                acc += w[((o * cin + c) * p + dy) * p + dx] *
                       img[((n * cin + c) * side + ty * p + dy) * side + tx * p + dx];
          expect.push_back(acc);
        }
  expect_tensor_near(t.tokens().value(), expect, 1e-12);
}

TEST(PatchEmbed, ZeroWeightsGiveZeroTokens) {
  Rng rng(5);
  PatchEmbed pe(3, 4, 6, rng);
  pe.proj.weight.value = Tensor(pe.proj.weight.value.shape());
  pe.proj.bias->value = Tensor(pe.proj.bias->value.shape());
  Graph g;
  Ctx ctx{g, true};
  TokenMap t = pe.forward(ctx, g.input(Tensor::randn(Shape{1, 3, 8, 8}, rng)));
  for (double v : t.tokens().value().data()) EXPECT_EQ(v, 0.0);
}

TEST(PatchEmbed, FullScaleTokenCount) {
  Rng rng(6);
  PatchEmbed pe(3, 4, 96, rng);
  Graph g;
  Ctx ctx{g, false};
  TokenMap t = pe.forward(ctx, g.input(Tensor::randn(Shape{1, 3, 224, 224}, rng)));
  EXPECT_EQ(t.tokens().shape(), (Shape{1, 3136, 96}));
  EXPECT_THROW(pe.forward(ctx, g.input(Tensor::randn(Shape{1, 3, 10, 10}, rng))), ShapeError);
}

// Reference 2x2 merge: gather (0,0),(1,0),(0,1),(1,1), normalize, project.
std::vector<double> merge_oracle(const Tensor& x, std::size_t h, std::size_t w, PatchMerge& m) {
  const std::size_t b = x.shape()[0], c = x.shape()[2], c4 = 4 * c, c2 = 2 * c;
  const std::size_t offs[4][2] = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
  std::vector<double> out;
  for (std::size_t n = 0; n < b; ++n)
    for (std::size_t y = 0; y < h / 2; ++y)
      for (std::size_t xx = 0; xx < w / 2; ++xx) {
        std::vector<double> v;
        for (const auto& o : offs) {
          const std::size_t tok = (2 * y + o[0]) * w + 2 * xx + o[1];
          for (std::size_t k = 0; k < c; ++k) v.push_back(x[(n * h * w + tok) * c + k]);
        }
        double mean = 0.0, var = 0.0;
        for (double e : v) mean += e;
        mean /= static_cast<double>(c4);
        for (double e : v) var += (e - mean) * (e - mean);
        var /= static_cast<double>(c4);
        for (std::size_t k = 0; k < c4; ++k)
          v[k] = (v[k] - mean) / std::sqrt(var + m.norm.eps) * m.norm.gamma.value[k] + m.norm.beta.value[k];
        for (std::size_t o = 0; o < c2; ++o) {
          double acc = 0.0;
          for (std::size_t k = 0; k < c4; ++k) acc += v[k] * m.reduction.weight.value[k * c2 + o];
          out.push_back(acc);
        }
      }
  return out;
}

TEST(PatchMerge, SmallestEvenCase) {
  Rng rng(7);
  PatchMerge m(2, rng);
  m.norm.gamma.value = Tensor::randn(Shape{8}, rng);
  m.norm.beta.value = Tensor::randn(Shape{8}, rng);
  const Tensor x = Tensor::randn(Shape{2, 16, 2}, rng);
  Graph g;
  Ctx ctx{g, true};
  TokenMap y = m.forward(ctx, TokenMap(g.input(x), 4, 4));
  EXPECT_EQ(y.tokens().shape(), (Shape{2, 4, 4}));
  EXPECT_EQ(y.height(), 2u);
  EXPECT_EQ(y.width(), 2u);
  expect_tensor_near(y.tokens().value(), merge_oracle(x, 4, 4, m), 1e-12);
}

TEST(PatchMerge, TokenCountQuartersSweep) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t h = 2 * (1 + rng.below(6)), w = 2 * (1 + rng.below(6)), c = 1 + rng.below(4);
    PatchMerge m(c, rng);
    const Tensor x = Tensor::randn(Shape{1, h * w, c}, rng);
    Graph g;
    Ctx ctx{g, true};
    TokenMap y = m.forward(ctx, TokenMap(g.input(x), h, w));
    ASSERT_EQ(y.tokens().shape(), (Shape{1, h * w / 4, 2 * c}));
    expect_tensor_near(y.tokens().value(), merge_oracle(x, h, w, m), 1e-12);
  }
}

TEST(PatchMerge, FullScaleStageOneToTwo) {
  Rng rng(9);
  PatchMerge m(96, rng);
  Graph g;
  Ctx ctx{g, false};
  TokenMap y = m.forward(ctx, TokenMap(g.input(Tensor::randn(Shape{1, 3136, 96}, rng)), 56, 56));
  EXPECT_EQ(y.tokens().shape(), (Shape{1, 784, 192}));
  EXPECT_EQ(y.height(), 28u);
}

TEST(PatchMerge, OddGridRejected) {
  Rng rng(10);
  PatchMerge m(2, rng);
  Graph g;
  Ctx ctx{g, true};
  EXPECT_THROW(m.forward(ctx, TokenMap(g.input(Tensor::randn(Shape{1, 12, 2}, rng)), 3, 4)), ShapeError);
}

TEST(PatchMerge, Gradients) {
  Rng rng(11);
  PatchMerge m(3, rng);
  ParamList ps;
  m.collect(ps);
  const Tensor x = testing::rand_away_from_zero(Shape{1, 16, 3}, rng);
  const Tensor probe = Tensor::randn(Shape{1, 4, 6}, rng);
  auto f = [&](Graph& g, Var in) { return sum(mul(m.forward(Ctx{g, true}, TokenMap(in, 4, 4)).tokens(), g.constant(probe))); };
  testing::expect_grad_ok(grad_check(f, x));
  for (Parameter* q : ps)
    testing::expect_grad_ok(grad_check_param([&](Graph& g) { return f(g, g.constant(x)); }, *q));
}

// --- the network --------------------------------------------------------------

TEST(EvalNet, ToyForwardShapes) {
  Rng rng(12);
  auto net = build_eval_net(reference_genotype(), toy_eval_config(), rng);
  Graph g;
  Ctx ctx{g, false};
  std::vector<TokenMap> trace;
  Var logits = net->forward(ctx, g.input(Tensor::randn(Shape{2, 3, 64, 64}, rng)), &trace);
  EXPECT_EQ(logits.shape(), (Shape{2, 3}));
  ASSERT_EQ(trace.size(), 4u);
  const std::size_t tokens[] = {256, 64, 16, 4}, dims[] = {16, 32, 64, 128};
  for (std::size_t s = 0; s < 4; ++s) EXPECT_EQ(trace[s].tokens().shape(), (Shape{2, tokens[s], dims[s]}));
}

TEST(EvalNet, CellMatchesHandComposition) {
  Rng rng(13);
  OpSettings os;
  os.channels = 8;
  os.heads = 2;
  os.window = 2;
  GenotypeCell cell(reference_genotype(), os, rng);
  const Tensor x = Tensor::randn(Shape{2, 16, 8}, rng);
  Graph g;
  Ctx ctx{g, false};
  TokenMap x0(g.input(x), 4, 4);
  const Tensor out = cell.forward(ctx, x0).tokens().value();
  auto& sep = dynamic_cast<SepConv3x3&>(cell.op(0));
  auto& eca = dynamic_cast<Eca3x3&>(cell.op(1));
  auto& sw = dynamic_cast<WindowTransformerOp&>(cell.op(2));
  TokenMap x1 = sep.forward(ctx, x0);
  Var e1 = eca.forward(ctx, x0).tokens();
  Var e2 = sw.forward(ctx, x1).tokens();
  EXPECT_TRUE(bitwise_equal(out, add(x1.tokens(), add(e1, e2)).value()));
}

TEST(EvalNet, EvalModeDeterministic) {
  Rng rng(14);
  auto net = build_eval_net(reference_genotype(), toy_eval_config(), rng);
  const Tensor img = Tensor::randn(Shape{2, 3, 64, 64}, rng);
  {
    Graph g;
    net->forward(Ctx{g, true}, g.input(img));  // moves the running statistics
  }
  Tensor a, b;
  {
    Graph g;
    a = net->forward(Ctx{g, false}, g.input(img)).value();
  }
  {
    Graph g;
    b = net->forward(Ctx{g, false}, g.input(img)).value();
  }
  EXPECT_TRUE(bitwise_equal(a, b));
}

ImageSet tiny_set(std::size_t count, std::size_t side) {
  DatasetSpec spec;
  spec.count = count;
  spec.side = side;
  spec.train_fraction = 1.0;
  spec.val_fraction = 0.0;
  return synth_dataset(spec).train;
}

TEST(TrainEval, SmokeOneEpoch) {
  Rng rng(15);
  auto net = build_eval_net(reference_genotype(), toy_eval_config(), rng);
  const ImageSet set = tiny_set(8, 64);
  TrainOptions opt;
  opt.epochs = 1;
  opt.batch_size = 4;
  std::size_t calls = 0;
  auto hist = train_eval(*net, set, set, opt, [&](const EvalEpoch&) { ++calls; });
  ASSERT_EQ(hist.size(), 1u);
  EXPECT_EQ(calls, 1u);
  EXPECT_TRUE(std::isfinite(hist[0].train_loss));
  EXPECT_TRUE(std::isfinite(hist[0].val_loss));
  EXPECT_GE(hist[0].val_acc, 0.0);
  EXPECT_LE(hist[0].val_acc, 1.0);
}

TEST(TrainEval, ZeroLearningRateLeavesWeights) {
  Rng rng(16);
  auto net = build_eval_net(uniform_genotype(OpKind::kWMsa), toy_eval_config(), rng);
  std::vector<Tensor> before;
  for (const Parameter* p : net->weights()) before.push_back(p->value);
  TrainOptions opt;
  opt.epochs = 2;
  opt.batch_size = 4;
  opt.lr = 0.0;
  train_eval(*net, tiny_set(8, 64), {}, opt);
  const ParamList after = net->weights();
  for (std::size_t i = 0; i < after.size(); ++i) EXPECT_TRUE(bitwise_equal(after[i]->value, before[i])) << i;
}

TEST(TrainEval, WarmupDefaultAndErrors) {
  Rng rng(17);
  auto net = build_eval_net(uniform_genotype(OpKind::kSkip), toy_eval_config(), rng);
  TrainOptions opt;
  opt.epochs = 10;
  opt.batch_size = 8;
  auto hist = train_eval(*net, tiny_set(8, 64), {}, opt);
  EXPECT_EQ(hist[0].lr, 0.0);  // warmup of one epoch
  EXPECT_DOUBLE_EQ(hist[1].lr, opt.lr);
  opt.epochs = 0;
  EXPECT_THROW(train_eval(*net, tiny_set(8, 64), {}, opt), ConfigError);
}

}  // namespace
}  // namespace vtcas
