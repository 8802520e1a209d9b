// SPDX-License-Identifier: Apache-2.0
// Acceptance run: one PASS/FAIL line per criterion. Arguments select
// criteria by number; no arguments runs all ten.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "vtcas/candidate_ops.hpp"
#include "vtcas/config.hpp"
#include "vtcas/grad_suite.hpp"
#include "vtcas/rng.hpp"
#include "vtcas/search.hpp"
#include "vtcas/transform_check.hpp"
#include "vtcas_cli/cli.hpp"

namespace {

using namespace vtcas;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;
  std::vector<std::string> failures;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (failures.size() < 8) failures.push_back(what);
    }
  }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// 1 -------------------------------------------------------------------------
Outcome gradient_suite() {
  Outcome o;
  const auto t0 = Clock::now();
  const std::uint64_t seeds[] = {1, 2, 3};
  const auto entries = run_gradient_suite(seeds, 1e-6, 1e-5);
  const double secs = seconds_since(t0);
  double worst = 0.0;
  std::set<std::string> names;
  for (const GradSuiteEntry& e : entries) {
    worst = std::max(worst, e.report.max_rel_error);
    names.insert(e.name);
    o.require(e.report.passed && e.report.max_rel_error <= 1e-5,
              e.name + " wrt " + e.wrt + " seed " + std::to_string(e.seed) + ": " + fmt("%.3g", e.report.max_rel_error));
  }
  for (OpKind k : kAllOps) o.require(names.contains(std::string(op_name(k))), "missing op " + std::string(op_name(k)));
  for (const char* p : {"matmul", "conv2d", "softmax", "layer_norm", "batch_norm", "gelu", "cross_entropy", "gather"})
    o.require(names.contains(p), std::string("missing primitive ") + p);
  o.require(secs < 120.0, "runtime " + fmt("%.1f s", secs));
  o.detail = std::to_string(entries.size()) + " checks on 3 seeds, max rel err " + fmt("%.2e", worst) + ", " +
             fmt("%.1f s", secs);
  return o;
}

// 2 -------------------------------------------------------------------------
// Independent loop formulas for a 3x3 zero-padded convolution on a 3x3 grid,
// compared with the token -> spatial -> conv -> token pipeline of the library.
Outcome transform_example() {
  Outcome o;
  double dev_f = 0.0, dev_x = 0.0, dev_w = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng = Rng(seed).fork("acceptance");
    const Tensor x = Tensor::randn(Shape{1, 9, 1}, rng);
    const Tensor k = Tensor::randn(Shape{1, 1, 3, 3}, rng);
    const double b = rng.normal();
    const Tensor delta = Tensor::randn(Shape{1, 9, 1}, rng);
    const auto X = [&](long i, long j) { return (i < 0 || j < 0 || i > 2 || j > 2) ? 0.0 : x[i * 3 + j]; };
    const auto K = [&](long a, long c) { return (a < 0 || c < 0 || a > 2 || c > 2) ? 0.0 : k[a * 3 + c]; };
    double y[9], dx[9], dw[9];
    for (long i = 0; i < 3; ++i)
      for (long j = 0; j < 3; ++j) {
        y[i * 3 + j] = b;
        dx[i * 3 + j] = 0.0;
        dw[i * 3 + j] = 0.0;
        for (long a = 0; a < 3; ++a)
          for (long c = 0; c < 3; ++c) y[i * 3 + j] += K(a, c) * X(i + a - 1, j + c - 1);
      }
    for (long p = 0; p < 3; ++p)
      for (long q = 0; q < 3; ++q)
        for (long i = 0; i < 3; ++i)
          for (long j = 0; j < 3; ++j) {
            dx[p * 3 + q] += delta[i * 3 + j] * K(p - i + 1, q - j + 1);
            dw[p * 3 + q] += delta[i * 3 + j] * X(i + p - 1, j + q - 1);
          }
    Graph g;
    Var xv = g.input(x);
    Var kv = g.input(k);
    Var spatial = tokens_to_spatial(TokenMap(xv, 3, 3)).map();
    Var conv = conv2d(spatial, kv, g.constant(Tensor::full(Shape{1}, b)), Conv2dOptions{.pad_h = 1, .pad_w = 1});
    Var out = spatial_to_tokens(SpatialMap(conv)).tokens();
    auto grads = g.backward(sum(mul(out, g.constant(delta))));
    const Tensor gx = grads[xv], gw = grads[kv];
    for (std::size_t i = 0; i < 9; ++i) {
      dev_f = std::max(dev_f, std::abs(out.value()[i] - y[i]));
      dev_x = std::max(dev_x, std::abs(gx[i] - dx[i]));
      dev_w = std::max(dev_w, std::abs(gw[i] - dw[i]));
    }
    const TransformCheckReport r = verify_conv_transform_example(rng);
    o.require(r.passed, "built-in verifier seed " + std::to_string(seed) + ": " + r.detail);
  }
  o.require(dev_f <= 1e-12, "forward deviation " + fmt("%.3g", dev_f));
  o.require(dev_x <= 1e-12, "input gradient deviation " + fmt("%.3g", dev_x));
  o.require(dev_w <= 1e-12, "weight gradient deviation " + fmt("%.3g", dev_w));
  o.detail = "50 pairs, max dev forward " + fmt("%.1e", dev_f) + " input grad " + fmt("%.1e", dev_x) +
             " weight grad " + fmt("%.1e", dev_w);
  return o;
}

// 3 -------------------------------------------------------------------------
Outcome layout_transforms() {
  Outcome o;
  Rng rng(2024);
  for (int t = 0; t < 100; ++t) {
    const std::size_t b = 1 + rng.below(3), h = 1 + rng.below(7), w = 1 + rng.below(7), c = 1 + rng.below(6);
    const Tensor x = Tensor::randn(Shape{b, h * w, c}, rng);
    Graph g;
    const SpatialMap s = tokens_to_spatial(TokenMap(g.input(x), h, w));
    o.require(s.map().shape() == (Shape{b, c, h, w}), "spatial shape " + s.map().shape().str());
    const Tensor back = spatial_to_tokens(s).tokens().value();
    o.require(bitwise_equal(back, x), "round trip " + x.shape().str());
    const Tensor sp = s.map().value();
    for (std::size_t n = 0; n < b; ++n)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t xx = 0; xx < w; ++xx)
          for (std::size_t ch = 0; ch < c; ++ch)
            if (sp[((n * c + ch) * h + y) * w + xx] != x[(n * h * w + y * w + xx) * c + ch]) {
              o.require(false, "element mismatch in " + x.shape().str());
            }
  }
  Tensor nine(Shape{1, 9, 1});
  for (std::size_t i = 0; i < 9; ++i) nine[i] = static_cast<double>(i + 1);
  Graph g;
  const Tensor s = tokens_to_spatial(TokenMap(g.input(nine), 3, 3)).map().value();
  o.require(s.shape() == (Shape{1, 1, 3, 3}), "9-token case shape " + s.shape().str());
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      o.require(s[i * 3 + j] == static_cast<double>(3 * i + j + 1), "9-token element (" + std::to_string(i) + "," +
                                                                         std::to_string(j) + ")");
  o.detail = "100 random shapes bitwise, (1,9,1) -> (1,1,3,3) element-wise";
  return o;
}

// 4 -------------------------------------------------------------------------
Outcome shifted_window() {
  Outcome o;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    OpSettings os{.channels = 8, .window = 4, .heads = 2};
    os.shift = 0;
    Rng ra(seed), rb(seed), rx(seed + 100);
    auto sw = make_op(OpKind::kSwMsa, os, ra);
    auto w = make_op(OpKind::kWMsa, os, rb);
    const Tensor x = Tensor::randn(Shape{2, 64, 8}, rx);
    Graph g;
    Ctx ctx{g};
    const Tensor a = sw->forward(ctx, TokenMap(g.input(x), 8, 8)).tokens().value();
    const Tensor b = w->forward(ctx, TokenMap(g.input(x), 8, 8)).tokens().value();
    o.require(bitwise_equal(a, b), "zero-shift output differs, seed " + std::to_string(seed));
  }
  double worst_blocked = 0.0;
  std::size_t blocked = 0;
  for (std::size_t window : {2u, 4u}) {
    Rng rng(40 + window);
    const std::size_t side = 8, shift = window / 2, n = window * window, nw = side / window, heads = 2;
    WindowTransformerOp op(OpSettings{.channels = 8, .window = window, .heads = heads}, true, rng);
    Graph g;
    Ctx ctx{g};
    Tensor probs;
    op.attention_stage(ctx, TokenMap(g.input(Tensor::randn(Shape{1, side * side, 8}, rng)), side, side), &probs);
    // Rolled position r came from across the border iff r + shift >= side.
    for (std::size_t win = 0; win < nw * nw; ++win)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const std::size_t yi = (win / nw) * window + i / window, xi = (win % nw) * window + i % window;
          const std::size_t yj = (win / nw) * window + j / window, xj = (win % nw) * window + j % window;
          const bool same =
              (yi + shift >= side) == (yj + shift >= side) && (xi + shift >= side) == (xj + shift >= side);
          if (same) continue;
          for (std::size_t h = 0; h < heads; ++h) {
            const double p = probs[((win * heads + h) * n + i) * n + j];
            worst_blocked = std::max(worst_blocked, p);
            ++blocked;
          }
        }
  }
  o.require(blocked > 0, "no cross-boundary pairs examined");
  o.require(worst_blocked < 1e-12, "cross-boundary weight " + fmt("%.3g", worst_blocked));
  o.detail = "zero shift bitwise equal on 3 seeds; " + std::to_string(blocked) + " cross-boundary weights, max " +
             fmt("%.1e", worst_blocked);
  return o;
}

// 5 -------------------------------------------------------------------------
Outcome schedule_fidelity() {
  Outcome o;
  DatasetSpec spec;
  spec.count = 6;
  spec.side = 16;
  spec.train_fraction = 0.5;
  spec.val_fraction = 0.5;
  const DatasetSplits d = synth_dataset(spec);
  SearchSchedule s = reference_schedule();
  s.proxy.image_side = 16;
  std::vector<std::size_t> counts, channels, depths;
  std::size_t epochs_seen = 0, frozen_checked = 0, moved = 0;
  SearchOptions opt;
  opt.observer.stage_begin = [&](std::size_t stage, const StageConfig&, ProxyNet& net) {
    for (std::size_t e = 1; e < kNumEdges; ++e)
      o.require(net.live()[e].size() == net.live()[0].size(), "uneven op counts in stage " + std::to_string(stage + 1));
    counts.push_back(net.live()[0].size());
    channels.push_back(net.config().channels);
    depths.push_back(net.depth());
  };
  opt.observer.epoch_end = [&](const EpochSummary& e, const auto& before, const auto& after) {
    ++epochs_seen;
    bool same = true;
    for (std::size_t k = 0; k < kNumEdges; ++k) same = same && bitwise_equal(before[k], after[k]);
    if (e.epoch < 20) {
      ++frozen_checked;
      o.require(same && !e.arch_updated, "alpha moved at stage " + std::to_string(e.stage + 1) + " epoch " +
                                             std::to_string(e.epoch));
    } else {
      o.require(e.arch_updated, "no alpha phase at epoch " + std::to_string(e.epoch));
      moved += !same;
    }
  };
  opt.observer.pruned = [&](std::size_t stage, const auto&, const auto& after) {
    if (stage == 2) counts.push_back(after[0].size());
  };
  const auto t0 = Clock::now();
  const SearchResult r = run_search(s, d.train, d.val, opt);
  o.require(counts == std::vector<std::size_t>{7, 5, 3, 1}, "op counts trajectory");
  o.require(channels == std::vector<std::size_t>{24, 72, 96}, "channels");
  o.require(depths == std::vector<std::size_t>{2, 3, 4}, "depths");
  o.require(epochs_seen == 150, "epochs observed " + std::to_string(epochs_seen));
  o.require(moved == 90, "alpha changed in " + std::to_string(moved) + " of 90 update epochs");
  o.require(genotype_decode(genotype_encode(r.genotype)) == r.genotype, "genotype round trip");
  o.detail = "ops 7/5/3/1, channels 24/72/96, depths 2/3/4, alpha frozen in " + std::to_string(frozen_checked) +
             " epochs before index 20, " + fmt("%.0f s", seconds_since(t0));
  return o;
}

// 6 -------------------------------------------------------------------------
Outcome desk_search() {
  Outcome o;
  DatasetSpec spec;  // 600 / 150, side 32, 3 classes
  const DatasetSplits d = synth_dataset(spec);
  o.require(d.train.size() == 600 && d.val.size() == 150, "split sizes");
  const SearchSchedule s = toy_schedule();
  std::vector<double> stage1;
  SearchOptions opt;
  opt.observer.epoch_end = [&](const EpochSummary& e, const auto&, const auto&) {
    if (e.stage == 0) stage1.push_back(e.train_loss);
  };
  const auto t0 = Clock::now();
  const SearchResult r = run_search(s, d.train, d.val, opt);
  const double secs = seconds_since(t0);
  o.require(secs < 900.0, "runtime " + fmt("%.0f s", secs));
  o.require(stage1.size() == 5, "stage 1 epochs");
  o.require(!stage1.empty() && stage1.back() < stage1.front(), "stage 1 loss did not fall");
  for (OpKind k : r.genotype.ops) o.require(k != OpKind::kNone, "none in genotype");
  o.require(genotype_decode(genotype_encode(r.genotype)) == r.genotype, "genotype round trip");
  std::string ops;
  for (OpKind k : r.genotype.ops) ops += (ops.empty() ? "" : ",") + std::string(op_name(k));
  o.detail = "stage 1 loss " + fmt("%.3f", stage1.empty() ? NAN : stage1.front()) + " -> " +
             fmt("%.3f", stage1.empty() ? NAN : stage1.back()) + ", genotype {" + ops + "}, " + fmt("%.0f s", secs);
  return o;
}

// 7 -------------------------------------------------------------------------
Outcome toy_training() {
  Outcome o;
  DatasetSpec spec;
  spec.count = 150;
  spec.side = 64;
  spec.noise = 4.0;
  const DatasetSplits d = synth_dataset(spec);
  TrainOptions opt;
  opt.epochs = 30;
  opt.batch_size = 16;
  const auto train = [&](const Genotype& g) {
    Rng rng = Rng(1).fork("eval").fork("init");
    auto net = build_eval_net(g, toy_eval_config(3), rng);
    double best = 0.0;
    train_eval(*net, d.train, {}, opt, [&](const EvalEpoch& e) { best = std::max(best, e.train_acc); });
    return std::pair{best, evaluate(*net, d.train).acc};
  };
  const auto t0 = Clock::now();
  const auto [ref_best, ref_final] = train(reference_genotype());
  const auto [none_best, none_final] = train(uniform_genotype(OpKind::kNone));
  o.require(ref_best >= 0.9, "reference best train accuracy " + fmt("%.3f", ref_best));
  o.require(ref_final > none_final, "reference " + fmt("%.3f", ref_final) + " vs none " + fmt("%.3f", none_final));
  o.detail = std::to_string(d.train.size()) + " images side 64: reference best " + fmt("%.3f", ref_best) +
             " final " + fmt("%.3f", ref_final) + ", all-none final " + fmt("%.3f", none_final) + ", " +
             fmt("%.0f s", seconds_since(t0));
  return o;
}

// 8 -------------------------------------------------------------------------
Outcome trajectory_audit() {
  Outcome o;
  const auto full = stage_trajectory(full_scale_config());
  const std::size_t tokens[] = {3136, 784, 196, 49}, dims[] = {96, 192, 384, 768}, heads[] = {3, 6, 12, 24};
  const std::size_t toy_tokens[] = {256, 64, 16, 4};
  for (std::size_t s = 0; s < 4; ++s) {
    o.require(full[s].tokens == tokens[s], "224 tokens stage " + std::to_string(s + 1));
    o.require(full[s].dim == dims[s], "dim stage " + std::to_string(s + 1));
    o.require(full[s].heads == heads[s], "heads stage " + std::to_string(s + 1));
  }
  const auto toy = stage_trajectory(toy_eval_config());
  for (std::size_t s = 0; s < 4; ++s) o.require(toy[s].tokens == toy_tokens[s], "64 tokens stage " + std::to_string(s + 1));
  // The built toy net must produce the same trajectory.
  Rng rng(8);
  auto net = build_eval_net(reference_genotype(), toy_eval_config(), rng);
  Graph g;
  std::vector<TokenMap> trace;
  net->forward(Ctx{g, false}, g.input(Tensor::randn(Shape{1, 3, 64, 64}, rng)), &trace);
  for (std::size_t s = 0; s < 4; ++s)
    o.require(trace[s].tokens().shape()[1] == toy_tokens[s], "forward trace stage " + std::to_string(s + 1));
  o.detail = "224: 3136/784/196/49, dims 96/192/384/768, heads 3/6/12/24; 64: 256/64/16/4";
  return o;
}

// 9 -------------------------------------------------------------------------
Outcome param_count() {
  Outcome o;
  Rng rng(9);
  auto net = build_eval_net(reference_genotype(), full_scale_config(), rng);
  const double n = static_cast<double>(count_params(*net));
  const double rel = n / 31.2e6 - 1.0;
  o.require(std::abs(rel) <= 0.2, "deviation " + fmt("%+.1f%%", 100.0 * rel));
  o.detail = fmt("%.0f", n) + " parameters, " + fmt("%+.1f%%", 100.0 * rel) + " vs 31.2M";
  return o;
}

// 10 ------------------------------------------------------------------------
Outcome search_determinism() {
  Outcome o;
  const fs::path dir = fs::temp_directory_path() / "vtcas-acceptance";
  fs::remove_all(dir);
  const std::string cfg = (fs::path(VTCAS_CONFIG_DIR) / "tiny.json").string();
  std::string files[2];
  for (int i = 0; i < 2; ++i) {
    std::ostringstream out, err;
    const fs::path run = dir / ("run" + std::to_string(i));
    const int code = cli::run({"search", "--config", cfg, "--seed", "11", "--out", run.string()}, out, err);
    o.require(code == 0, "search exit " + std::to_string(code) + ": " + err.str());
    std::ifstream f(run / "genotype.json", std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    files[i] = ss.str();
  }
  o.require(!files[0].empty(), "empty genotype file");
  o.require(files[0] == files[1], "genotype files differ");
  o.detail = "two CLI searches, " + std::to_string(files[0].size()) + "-byte genotype files identical";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient suite", gradient_suite},          {"conv transform example", transform_example},
      {"layout transforms", layout_transforms},    {"shifted-window degeneracy and mask", shifted_window},
      {"schedule fidelity", schedule_fidelity},    {"desk-scale search", desk_search},
      {"toy eval training", toy_training},         {"stage trajectory audit", trajectory_audit},
      {"parameter count", param_count},            {"search determinism", search_determinism},
  };
  std::set<int> pick;
  for (int i = 1; i < argc; ++i) pick.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!pick.empty() && !pick.contains(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << "  " << criteria[i].first << ": " << o.detail << '\n';
    for (const std::string& f : o.failures) std::cout << "        " << f << '\n';
    std::cout << std::flush;
  }
  return failed == 0 ? 0 : 1;
}
