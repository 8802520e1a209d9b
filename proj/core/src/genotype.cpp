// SPDX-License-Identifier: Apache-2.0
#include "vtcas/genotype.hpp"

#include <json.hpp>

#include "vtcas/error.hpp"

namespace vtcas {
namespace {

using nlohmann::json;

std::size_t edge_index(int from, int to) {
  for (std::size_t e = 0; e < kNumEdges; ++e) {
    if (kCellEdges[e].from == from && kCellEdges[e].to == to) return e;
  }
  throw FormatError("genotype: (" + std::to_string(from) + "," + std::to_string(to) + ") is not a cell edge");
}

OpKind decode_op(const json& j) {
  if (!j.is_string()) throw FormatError("genotype: op must be a string");
  const std::string name = j.get<std::string>();
  auto k = parse_op(name);
  if (!k) throw FormatError("genotype: unknown op '" + name + "'");
  return *k;
}

template <class T>
T field(const json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) throw FormatError(std::string("genotype: missing field '") + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("genotype: bad field '") + key + "': " + e.what());
  }
}

}  // namespace

Genotype discretize(const std::array<Tensor, kNumEdges>& alpha, const std::array<std::vector<OpKind>, kNumEdges>& live) {
  Genotype g;
  for (std::size_t e = 0; e < kNumEdges; ++e) {
    const auto& ops = live[e];
    if (ops.empty() || alpha[e].size() != ops.size()) throw ShapeError("discretize: alpha/live mismatch");
    std::size_t best = ops.size();
    for (std::size_t i = 0; i < ops.size(); ++i) {
      if (ops[i] == OpKind::kNone && ops.size() > 1) continue;
      if (best == ops.size() || alpha[e][i] > alpha[e][best] ||
          (alpha[e][i] == alpha[e][best] && op_order(ops[i]) < op_order(ops[best]))) {
        best = i;
      }
    }
    g.ops[e] = ops[best];
    g.meta.alpha[e].ops = ops;
    g.meta.alpha[e].values.assign(alpha[e].data().begin(), alpha[e].data().end());
  }
  return g;
}

Genotype reference_genotype() {
  Genotype g;
  g.ops = {OpKind::kSepConv3x3, OpKind::kEca3x3, OpKind::kSwMsa};
  return g;
}

Genotype uniform_genotype(OpKind op) {
  Genotype g;
  g.ops = {op, op, op};
  return g;
}

std::string genotype_encode(const Genotype& g) {
  json edges = json::array();
  json alpha = json::array();
  for (std::size_t e = 0; e < kNumEdges; ++e) {
    edges.push_back({{"from", kCellEdges[e].from}, {"to", kCellEdges[e].to}, {"op", std::string(op_name(g.ops[e]))}});
    json names = json::array();
    for (OpKind k : g.meta.alpha[e].ops) names.push_back(std::string(op_name(k)));
    alpha.push_back({{"from", kCellEdges[e].from},
                     {"to", kCellEdges[e].to},
                     {"ops", names},
                     {"values", g.meta.alpha[e].values}});
  }
  json doc = {{"version", kGenotypeVersion},
              {"edges", edges},
              {"meta", {{"seed", g.meta.seed}, {"schedule_hash", g.meta.schedule_hash}, {"alpha", alpha}}}};
  return doc.dump(2) + "\n";
}

Genotype genotype_decode(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("genotype: invalid JSON: ") + e.what());
  }
  if (const int v = field<int>(doc, "version"); v != kGenotypeVersion) {
    throw FormatError("genotype: unsupported version " + std::to_string(v));
  }
  const json& edges = doc.contains("edges") ? doc["edges"] : json();
  if (!edges.is_array()) throw FormatError("genotype: 'edges' must be an array");
  Genotype g;
  std::array<bool, kNumEdges> seen{};
  for (const json& e : edges) {
    const std::size_t idx = edge_index(field<int>(e, "from"), field<int>(e, "to"));
    if (seen[idx]) {
      throw FormatError("genotype: duplicate edge (" + std::to_string(kCellEdges[idx].from) + "," +
                        std::to_string(kCellEdges[idx].to) + ")");
    }
    seen[idx] = true;
    if (!e.contains("op")) throw FormatError("genotype: edge without 'op'");
    g.ops[idx] = decode_op(e["op"]);
  }
  for (std::size_t i = 0; i < kNumEdges; ++i) {
    if (!seen[i]) {
      throw FormatError("genotype: missing edge (" + std::to_string(kCellEdges[i].from) + "," +
                        std::to_string(kCellEdges[i].to) + ")");
    }
  }
  if (doc.contains("meta")) {
    const json& meta = doc["meta"];
    if (!meta.is_object()) throw FormatError("genotype: 'meta' must be an object");
    if (meta.contains("seed")) g.meta.seed = field<std::uint64_t>(meta, "seed");
    if (meta.contains("schedule_hash")) g.meta.schedule_hash = field<std::string>(meta, "schedule_hash");
    if (meta.contains("alpha")) {
      if (!meta["alpha"].is_array()) throw FormatError("genotype: 'meta.alpha' must be an array");
      for (const json& a : meta["alpha"]) {
        const std::size_t idx = edge_index(field<int>(a, "from"), field<int>(a, "to"));
        Genotype::EdgeAlpha ea;
        if (!a.contains("ops") || !a["ops"].is_array()) throw FormatError("genotype: alpha entry without 'ops'");
        for (const json& n : a["ops"]) ea.ops.push_back(decode_op(n));
        ea.values = field<std::vector<double>>(a, "values");
        if (ea.values.size() != ea.ops.size()) throw FormatError("genotype: alpha ops/values length mismatch");
        g.meta.alpha[idx] = std::move(ea);
      }
    }
  }
  return g;
}

}  // namespace vtcas
