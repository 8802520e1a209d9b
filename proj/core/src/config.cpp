// SPDX-License-Identifier: Apache-2.0
#include "vtcas/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "vtcas/error.hpp"
#include "vtcas/rng.hpp"

namespace vtcas {
namespace {

using json = nlohmann::ordered_json;

// Reads known keys of one JSON object and rejects the rest on finish().
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(where() + "expected an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  const json* child(const char* key) {
    used_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string sub(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void size(const char* key, std::size_t& dst) {
    if (const json* v = child(key)) {
      if (!v->is_number_unsigned()) throw ConfigError(sub(key) + ": expected a non-negative integer");
      dst = v->get<std::size_t>();
    }
  }
  void u64(const char* key, std::uint64_t& dst) {
    if (const json* v = child(key)) {
      if (!v->is_number_unsigned()) throw ConfigError(sub(key) + ": expected a non-negative integer");
      dst = v->get<std::uint64_t>();
    }
  }
  void real(const char* key, double& dst) {
    if (const json* v = child(key)) {
      if (!v->is_number()) throw ConfigError(sub(key) + ": expected a number");
      dst = v->get<double>();
    }
  }
  void flag(const char* key, bool& dst) {
    if (const json* v = child(key)) {
      if (!v->is_boolean()) throw ConfigError(sub(key) + ": expected true or false");
      dst = v->get<bool>();
    }
  }
  void text(const char* key, std::string& dst) {
    if (const json* v = child(key)) {
      if (!v->is_string()) throw ConfigError(sub(key) + ": expected a string");
      dst = v->get<std::string>();
    }
  }
  void path(const char* key, std::filesystem::path& dst, const std::filesystem::path& base) {
    std::string s;
    if (!has(key)) {
      child(key);
      return;
    }
    text(key, s);
    std::filesystem::path p(s);
    dst = p.is_relative() && !base.empty() ? base / p : p;
  }
  void sizes4(const char* key, std::array<std::size_t, 4>& dst) {
    if (const json* v = child(key)) {
      if (!v->is_array() || v->size() != 4) throw ConfigError(sub(key) + ": expected an array of 4 integers");
      for (std::size_t i = 0; i < 4; ++i) {
        if (!(*v)[i].is_number_unsigned()) throw ConfigError(sub(key) + ": expected an array of 4 integers");
        dst[i] = (*v)[i].get<std::size_t>();
      }
    }
  }

  void finish() const {
    for (const auto& [k, _] : j_.items())
      if (!used_.contains(k)) throw ConfigError("unknown config key '" + sub(k.c_str()) + "'");
  }

 private:
  std::string where() const { return path_.empty() ? "config: " : path_ + ": "; }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

void read_stage(Section s, StageConfig& c) {
  s.size("channels", c.channels);
  s.size("depth", c.depth);
  s.size("ops", c.ops);
  s.size("epochs", c.epochs);
  s.size("arch_start", c.arch_start);
  s.size("batch_size", c.batch_size);
  s.real("weight_lr", c.weight_lr);
  s.real("weight_momentum", c.weight_momentum);
  s.real("weight_decay", c.weight_decay);
  s.real("arch_lr", c.arch_lr);
  s.real("arch_weight_decay", c.arch_weight_decay);
  s.real("arch_beta1", c.arch_beta1);
  s.real("arch_beta2", c.arch_beta2);
  s.real("grad_clip", c.grad_clip);
  s.finish();
}

void read_proxy(Section s, ProxyConfig& p) {
  s.size("image_side", p.image_side);
  s.size("in_channels", p.in_channels);
  s.size("patch", p.patch);
  s.size("classes", p.classes);
  s.size("window", p.window);
  s.size("head_dim", p.head_dim);
  s.flag("residual_from_normed", p.residual_from_normed);
  s.finish();
}

void read_search(Section s, SearchSchedule& sched) {
  if (s.has("preset")) {
    std::string preset;
    s.text("preset", preset);
    if (preset == "toy") sched = toy_schedule();
    else if (preset == "reference") sched = reference_schedule();
    else throw ConfigError(s.sub("preset") + ": unknown preset '" + preset + "' (toy, reference)");
  }
  s.size("prune", sched.prune);
  if (const json* p = s.child("proxy")) read_proxy(Section(*p, s.sub("proxy")), sched.proxy);
  if (const json* st = s.child("stages")) {
    if (!st->is_array() || st->size() != 3) throw ConfigError(s.sub("stages") + ": expected an array of 3 objects");
    for (std::size_t i = 0; i < 3; ++i)
      read_stage(Section((*st)[i], s.sub("stages") + "[" + std::to_string(i) + "]"), sched.stages[i]);
  }
  s.finish();
}

void read_eval(Section s, EvalConfig& e) {
  if (s.has("preset")) {
    std::string preset;
    s.text("preset", preset);
    if (preset == "toy") e = toy_eval_config(e.classes);
    else if (preset == "full") e = full_scale_config();
    else throw ConfigError(s.sub("preset") + ": unknown preset '" + preset + "' (toy, full)");
  }
  s.size("image_side", e.image_side);
  s.size("in_channels", e.in_channels);
  s.size("patch", e.patch);
  s.sizes4("dims", e.dims);
  s.sizes4("depths", e.depths);
  s.sizes4("heads", e.heads);
  s.size("window", e.window);
  s.size("classes", e.classes);
  s.size("mlp_ratio", e.mlp_ratio);
  s.flag("residual_from_normed", e.residual_from_normed);
  s.finish();
}

void read_train(Section s, TrainOptions& t) {
  s.size("epochs", t.epochs);
  s.size("batch_size", t.batch_size);
  s.real("lr", t.lr);
  s.real("weight_decay", t.weight_decay);
  if (s.has("warmup")) {
    std::size_t w = 0;
    s.size("warmup", w);
    t.warmup = w;
  } else {
    s.child("warmup");
  }
  s.real("grad_clip", t.grad_clip);
  s.finish();
}

void read_data(Section s, DataSource& d, const std::filesystem::path& base) {
  if (s.has("source")) {
    std::string src;
    s.text("source", src);
    if (src == "synthetic") d.kind = DataSource::Kind::kSynthetic;
    else if (src == "files") d.kind = DataSource::Kind::kFiles;
    else throw ConfigError(s.sub("source") + ": unknown source '" + src + "' (synthetic, files)");
  }
  DatasetSpec& sp = d.synthetic;
  s.size("count", sp.count);
  s.size("side", sp.side);
  s.size("channels", sp.channels);
  s.size("classes", sp.classes);
  s.real("train_fraction", sp.train_fraction);
  s.real("val_fraction", sp.val_fraction);
  s.real("test_fraction", sp.test_fraction);
  s.real("noise", sp.noise);
  s.path("train_images", d.train_images, base);
  s.path("train_labels", d.train_labels, base);
  s.path("val_images", d.val_images, base);
  s.path("val_labels", d.val_labels, base);
  s.finish();
  if (d.kind == DataSource::Kind::kFiles && (d.train_images.empty() || d.train_labels.empty())) {
    throw ConfigError(s.sub("train_images") + ": file sources need train_images and train_labels");
  }
}

json stage_json(const StageConfig& c) {
  return {{"channels", c.channels},       {"depth", c.depth},
          {"ops", c.ops},                 {"epochs", c.epochs},
          {"arch_start", c.arch_start},   {"batch_size", c.batch_size},
          {"weight_lr", c.weight_lr},     {"weight_momentum", c.weight_momentum},
          {"weight_decay", c.weight_decay}, {"arch_lr", c.arch_lr},
          {"arch_weight_decay", c.arch_weight_decay}, {"arch_beta1", c.arch_beta1},
          {"arch_beta2", c.arch_beta2},   {"grad_clip", c.grad_clip}};
}

json to_json(const RunConfig& c, bool with_out) {
  json j;
  j["version"] = kConfigVersion;
  j["mode"] = c.mode;
  j["seed"] = c.seed;
  if (with_out) j["out"] = c.out.string();
  const DatasetSpec& sp = c.data.synthetic;
  json d = {{"source", c.data.kind == DataSource::Kind::kFiles ? "files" : "synthetic"},
            {"count", sp.count},
            {"side", sp.side},
            {"channels", sp.channels},
            {"classes", sp.classes},
            {"train_fraction", sp.train_fraction},
            {"val_fraction", sp.val_fraction},
            {"test_fraction", sp.test_fraction},
            {"noise", sp.noise}};
  if (c.data.kind == DataSource::Kind::kFiles) {
    d["train_images"] = c.data.train_images.string();
    d["train_labels"] = c.data.train_labels.string();
    d["val_images"] = c.data.val_images.string();
    d["val_labels"] = c.data.val_labels.string();
  }
  j["data"] = d;
  const ProxyConfig& p = c.search.proxy;
  json stages = json::array();
  for (const StageConfig& s : c.search.stages) stages.push_back(stage_json(s));
  j["search"] = {{"prune", c.search.prune},
                 {"proxy",
                  {{"image_side", p.image_side},
                   {"in_channels", p.in_channels},
                   {"patch", p.patch},
                   {"classes", p.classes},
                   {"window", p.window},
                   {"head_dim", p.head_dim},
                   {"residual_from_normed", p.residual_from_normed}}},
                 {"stages", stages}};
  const EvalConfig& e = c.eval;
  j["eval"] = {{"image_side", e.image_side}, {"in_channels", e.in_channels}, {"patch", e.patch},
               {"dims", e.dims},             {"depths", e.depths},           {"heads", e.heads},
               {"window", e.window},         {"classes", e.classes},         {"mlp_ratio", e.mlp_ratio},
               {"residual_from_normed", e.residual_from_normed}};
  json t = {{"epochs", c.train.epochs},
            {"batch_size", c.train.batch_size},
            {"lr", c.train.lr},
            {"weight_decay", c.train.weight_decay},
            {"grad_clip", c.train.grad_clip}};
  if (c.train.warmup) t["warmup"] = *c.train.warmup;
  j["train"] = t;
  j["genotype"] = c.genotype.string();
  return j;
}

}  // namespace

RunConfig default_run_config() { return RunConfig{}; }

RunConfig parse_run_config(const std::string& text, RunConfig base, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  Section s(doc, "");
  if (!s.has("version")) throw ConfigError("config: missing 'version'");
  std::uint64_t version = 0;
  s.u64("version", version);
  if (version != kConfigVersion) {
    throw ConfigError("config: unsupported version " + std::to_string(version) + " (expected " +
                      std::to_string(kConfigVersion) + ")");
  }
  RunConfig c = std::move(base);
  s.text("mode", c.mode);
  if (c.mode != "search" && c.mode != "train" && c.mode != "synth") {
    throw ConfigError("mode: unknown mode '" + c.mode + "' (search, train, synth)");
  }
  s.u64("seed", c.seed);
  s.path("out", c.out, base_dir);
  if (const json* d = s.child("data")) read_data(Section(*d, "data"), c.data, base_dir);
  if (const json* v = s.child("search")) read_search(Section(*v, "search"), c.search);
  if (const json* v = s.child("eval")) read_eval(Section(*v, "eval"), c.eval);
  if (const json* v = s.child("train")) read_train(Section(*v, "train"), c.train);
  s.path("genotype", c.genotype, base_dir);
  s.finish();
  validate(c.data.synthetic);
  validate(c.search);
  validate(c.eval);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), std::move(base), path.parent_path());
}

std::string dump_run_config(const RunConfig& cfg) { return to_json(cfg, true).dump(2) + "\n"; }

std::string config_hash(const RunConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(to_json(cfg, false).dump())));
  return buf;
}

DatasetSplits load_data(const DataSource& src, std::uint64_t seed) {
  if (src.kind == DataSource::Kind::kSynthetic) {
    DatasetSpec spec = src.synthetic;
    spec.seed = seed;
    return synth_dataset(spec);
  }
  DatasetSplits out;
  out.train = load_timg(src.train_images, src.train_labels);
  if (!src.val_images.empty()) out.val = load_timg(src.val_images, src.val_labels);
  return out;
}

}  // namespace vtcas
