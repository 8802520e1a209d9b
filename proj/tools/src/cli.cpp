// SPDX-License-Identifier: Apache-2.0
#include "vtcas_cli/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "vtcas/config.hpp"
#include "vtcas/error.hpp"
#include "vtcas/grad_suite.hpp"
#include "vtcas/metrics.hpp"
#include "vtcas/rng.hpp"
#include "vtcas/transform_check.hpp"

namespace vtcas::cli {
namespace {

namespace fs = std::filesystem;

// Failed verification; distinct from bad input.
struct VerificationFailed {};

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON run configuration")->check(CLI::ExistingFile);
  c.seed_opt = cmd->add_option("--seed", c.seed, "Seed (overrides config and VTCAS_SEED)");
  cmd->add_option("--out", c.out, "Output directory");
}

std::uint64_t parse_seed(const std::string& text) {
  std::uint64_t v = 0;
  const char* end = text.data() + text.size();
  auto [p, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || p != end) throw ConfigError("VTCAS_SEED: not an unsigned integer: '" + text + "'");
  return v;
}

// Precedence: flag > config file > VTCAS_SEED > built-in default.
RunConfig resolve(const Common& c, const Environment& env, const std::string& mode) {
  RunConfig base = default_run_config();
  base.mode = mode;
  if (env.seed) base.seed = parse_seed(*env.seed);
  RunConfig cfg = c.config.empty() ? base : load_run_config(c.config, base);
  cfg.mode = mode;
  if (c.seed_opt->count() > 0) cfg.seed = c.seed;
  if (!c.out.empty()) cfg.out = c.out;
  return cfg;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f || !(f << text) || !f.flush()) throw Error("cannot write " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void prepare_out(const RunConfig& cfg, const std::string& command) {
  std::error_code ec;
  fs::create_directories(cfg.out, ec);
  if (ec) throw Error("cannot create " + cfg.out.string() + ": " + ec.message());
  nlohmann::ordered_json run;
  run["command"] = command;
  run["config_hash"] = config_hash(cfg);
  run["config"] = nlohmann::ordered_json::parse(dump_run_config(cfg));
  write_file(cfg.out / "run.json", run.dump(2) + "\n");
}

std::string ops_line(const Genotype& g) {
  std::string s;
  for (std::size_t e = 0; e < kNumEdges; ++e) {
    if (e) s += "  ";
    s += "(" + std::to_string(kCellEdges[e].from) + "," + std::to_string(kCellEdges[e].to) + ") " +
         std::string(op_name(g.ops[e]));
  }
  return s;
}

int cmd_search(const Common& c, const Environment& env, std::ostream& out) {
  RunConfig cfg = resolve(c, env, "search");
  const DatasetSplits data = load_data(cfg.data, cfg.seed);
  prepare_out(cfg, "search");
  MetricsLogger log(cfg.out / "metrics.csv");
  SearchOptions opt;
  opt.seed = cfg.seed;
  opt.schedule_hash = config_hash(cfg);
  opt.observer.epoch_end = [&](const EpochSummary& s, const auto&, const auto&) {
    const StageConfig& st = cfg.search.stages[s.stage];
    log.log({s.stage + 1, s.epoch, "train", s.train_loss, s.train_acc, s.weight_lr, s.seconds});
    if (s.arch_updated) log.log({s.stage + 1, s.epoch, "arch", s.val_loss, s.val_acc, st.arch_lr, s.seconds});
    out << "stage " << s.stage + 1 << " epoch " << s.epoch << "  loss " << std::setprecision(4) << s.train_loss
        << "  acc " << s.train_acc;
    if (s.arch_updated) out << "  val " << s.val_loss;
    out << '\n' << std::flush;
  };
  opt.observer.pruned = [&](std::size_t stage, const auto&, const auto& after) {
    out << "stage " << stage + 1 << " kept " << after[0].size() << " ops per edge\n";
  };
  SearchResult r = run_search(cfg.search, data.train, data.val, opt);
  write_file(cfg.out / "genotype.json", genotype_encode(r.genotype));
  out << "genotype " << ops_line(r.genotype) << "\nwrote " << (cfg.out / "genotype.json").string() << '\n';
  return kOk;
}

Genotype genotype_arg(const std::string& arg) {
  if (arg.empty() || arg == "reference") return reference_genotype();
  constexpr std::string_view uniform = "uniform:";
  if (arg.starts_with(uniform)) {
    const std::string name = arg.substr(uniform.size());
    if (auto k = parse_op(name)) return uniform_genotype(*k);
    throw ConfigError("unknown op '" + name + "'");
  }
  return genotype_decode(read_file(arg));
}

int cmd_train(const Common& c, const std::string& genotype_flag, const Environment& env, std::ostream& out) {
  RunConfig cfg = resolve(c, env, "train");
  const Genotype g = genotype_arg(genotype_flag.empty() ? cfg.genotype.string() : genotype_flag);
  const DatasetSplits data = load_data(cfg.data, cfg.seed);
  prepare_out(cfg, "train");
  Rng init = Rng(cfg.seed).fork("eval").fork("init");
  auto net = build_eval_net(g, cfg.eval, init);
  out << "genotype " << ops_line(g) << "\nparameters " << count_params(*net) << '\n';
  MetricsLogger log(cfg.out / "metrics.csv");
  TrainOptions topt = cfg.train;
  topt.seed = Rng(cfg.seed).fork("eval").below(~0ULL);
  const auto hist = train_eval(*net, data.train, data.val, topt, [&](const EvalEpoch& e) {
    log.log({0, e.epoch, "train", e.train_loss, e.train_acc, e.lr, e.seconds});
    if (data.val.size() > 0) log.log({0, e.epoch, "val", e.val_loss, e.val_acc, e.lr, e.seconds});
    out << "epoch " << e.epoch << "  loss " << std::setprecision(4) << e.train_loss << "  acc " << e.train_acc
        << "  val acc " << e.val_acc << '\n'
        << std::flush;
  });
  nlohmann::ordered_json res;
  res["config_hash"] = config_hash(cfg);
  res["genotype"] = nlohmann::ordered_json::parse(genotype_encode(g));
  res["parameters"] = count_params(*net);
  res["train_loss"] = hist.back().train_loss;
  res["train_acc"] = hist.back().train_acc;
  res["val_loss"] = hist.back().val_loss;
  res["val_acc"] = hist.back().val_acc;
  write_file(cfg.out / "result.json", res.dump(2) + "\n");
  return kOk;
}

int cmd_synth(const Common& c, const Environment& env, std::ostream& out) {
  RunConfig cfg = resolve(c, env, "synth");
  if (cfg.data.kind != DataSource::Kind::kSynthetic) throw ConfigError("synth: data.source must be synthetic");
  const DatasetSplits d = load_data(cfg.data, cfg.seed);
  prepare_out(cfg, "synth");
  const std::pair<const char*, const ImageSet*> parts[] = {{"train", &d.train}, {"val", &d.val}, {"test", &d.test}};
  for (const auto& [name, set] : parts) {
    if (set->size() == 0) continue;
    save_timg(cfg.out / (std::string(name) + ".timg"), cfg.out / (std::string(name) + ".tlbl"), *set);
    out << name << ": " << set->size() << " images " << set->height << "x" << set->width << "x" << set->channels
        << '\n';
  }
  return kOk;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t seeds, double tol, std::ostream& out) {
  std::vector<std::uint64_t> s;
  for (std::size_t i = 0; i < seeds; ++i) s.push_back(seed + i);
  const auto entries = run_gradient_suite(s, 1e-6, tol);
  // One row per (name, wrt), worst over seeds.
  struct Row {
    std::string name, wrt;
    double worst = 0.0;
    bool ok = true;
  };
  std::vector<Row> rows;
  for (const GradSuiteEntry& e : entries) {
    auto it = std::find_if(rows.begin(), rows.end(), [&](const Row& r) { return r.name == e.name && r.wrt == e.wrt; });
    if (it == rows.end()) it = rows.insert(rows.end(), Row{e.name, e.wrt});
    it->worst = std::max(it->worst, e.report.max_rel_error);
    it->ok = it->ok && e.report.passed;
  }
  out << std::left << std::setw(18) << "op" << std::setw(18) << "wrt" << std::setw(14) << "max_rel_err"
      << "status\n";
  for (const Row& r : rows) {
    out << std::setw(18) << r.name << std::setw(18) << r.wrt << std::setw(14) << std::setprecision(3)
        << std::scientific << r.worst << std::defaultfloat << (r.ok ? "ok" : "FAIL") << '\n';
  }
  const bool ok = all_passed(entries);
  out << entries.size() << " checks over " << seeds << " seeds, tolerance " << tol << ": "
      << (ok ? "passed" : "FAILED") << '\n';
  if (!ok) throw VerificationFailed{};
  return kOk;
}

int cmd_verify_transform(std::uint64_t seed, std::size_t trials, double tol, std::ostream& out) {
  double fwd = 0.0, gin = 0.0, gw = 0.0;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < trials; ++i) {
    Rng rng = Rng(seed).fork("transform").fork(std::to_string(i));
    const TransformCheckReport r = verify_conv_transform_example(rng, tol);
    fwd = std::max(fwd, r.forward_deviation);
    gin = std::max(gin, r.input_grad_deviation);
    gw = std::max(gw, r.weight_grad_deviation);
    if (!r.passed) {
      ++failed;
      out << "trial " << i << " failed: " << r.detail << '\n';
    }
  }
  out << std::setprecision(3) << std::scientific << "forward       max deviation " << fwd << '\n'
      << "input grad    max deviation " << gin << '\n'
      << "weight grad   max deviation " << gw << '\n'
      << std::defaultfloat << trials << " trials, tolerance " << tol << ": " << (failed ? "FAILED" : "passed") << '\n';
  if (failed) throw VerificationFailed{};
  return kOk;
}

int cmd_shapes(const std::string& config, std::size_t side, const std::string& preset, bool params, std::ostream& out) {
  EvalConfig cfg = preset == "toy" ? toy_eval_config() : full_scale_config();
  if (!config.empty()) cfg = load_run_config(config).eval;
  if (side > 0) cfg.image_side = side;
  const auto st = stage_trajectory(cfg);
  out << "input " << cfg.image_side << "  patch " << cfg.patch << '\n'
      << std::left << std::setw(7) << "stage" << std::setw(10) << "grid" << std::setw(9) << "tokens" << std::setw(6)
      << "dim" << std::setw(7) << "heads" << std::setw(7) << "depth" << "window\n";
  for (std::size_t s = 0; s < st.size(); ++s) {
    out << std::setw(7) << s + 1 << std::setw(10) << (std::to_string(st[s].side) + "x" + std::to_string(st[s].side))
        << std::setw(9) << st[s].tokens << std::setw(6) << st[s].dim << std::setw(7) << st[s].heads << std::setw(7)
        << st[s].depth << st[s].window << '\n';
  }
  if (params) {
    Rng rng(1);
    auto net = build_eval_net(reference_genotype(), cfg, rng);
    out << "parameters (reference genotype) " << count_params(*net) << '\n';
  }
  return kOk;
}

}  // namespace

Environment process_environment() {
  Environment env;
  if (const char* s = std::getenv("VTCAS_SEED")) env.seed = s;
  return env;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const Environment& env) {
  CLI::App app{"Cell search and evaluation on tiny image sets", "vtcas"};
  app.require_subcommand(1);
  app.fallthrough(false);

  Common search_opts, train_opts, synth_opts;
  auto* search = app.add_subcommand("search", "Run the three-stage cell search; writes genotype.json, metrics.csv");
  add_common(search, search_opts);

  auto* train = app.add_subcommand("train", "Train the evaluation network for a genotype; writes metrics.csv");
  add_common(train, train_opts);
  std::string genotype;
  train->add_option("--genotype", genotype, "Genotype file, 'reference' or 'uniform:<op>'");

  auto* synth = app.add_subcommand("synth", "Write the synthetic dataset as TIMG/TLBL files");
  add_common(synth, synth_opts);

  std::uint64_t check_seed = 1;
  std::size_t check_seeds = 3;
  double check_tol = 1e-5;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of every primitive and candidate op");
  grad->add_option("--seed", check_seed, "First seed");
  grad->add_option("--seeds", check_seeds, "Number of seeds")->check(CLI::PositiveNumber);
  grad->add_option("--tol", check_tol, "Maximum relative error")->check(CLI::NonNegativeNumber);

  std::uint64_t vt_seed = 1;
  std::size_t vt_trials = 50;
  double vt_tol = 1e-12;
  auto* vt = app.add_subcommand("verify-transform", "Check the token/spatial conv example against loop formulas");
  vt->add_option("--seed", vt_seed, "Seed");
  vt->add_option("--trials", vt_trials, "Random (kernel, delta) pairs")->check(CLI::PositiveNumber);
  vt->add_option("--tol", vt_tol, "Maximum absolute deviation")->check(CLI::NonNegativeNumber);

  std::string shapes_config, shapes_preset = "full";
  std::size_t shapes_side = 0;
  bool shapes_params = false;
  auto* shapes = app.add_subcommand("shapes", "Print the stage trajectory of the evaluation network");
  shapes->add_option("--config", shapes_config, "Take the network from a run configuration")->check(CLI::ExistingFile);
  shapes->add_option("--side", shapes_side, "Input side");
  shapes->add_option("--preset", shapes_preset, "full or toy")->check(CLI::IsMember({"full", "toy"}));
  shapes->add_flag("--params", shapes_params, "Build the reference net and count its parameters");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*search) return cmd_search(search_opts, env, out);
    if (*train) return cmd_train(train_opts, genotype, env, out);
    if (*synth) return cmd_synth(synth_opts, env, out);
    if (*grad) return cmd_gradcheck(check_seed, check_seeds, check_tol, out);
    if (*vt) return cmd_verify_transform(vt_seed, vt_trials, vt_tol, out);
    if (*shapes) return cmd_shapes(shapes_config, shapes_side, shapes_preset, shapes_params, out);
  } catch (const VerificationFailed&) {
    return kFailed;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailed;
  }
  return kUsage;
}

}  // namespace vtcas::cli
