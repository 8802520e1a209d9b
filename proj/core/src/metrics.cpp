// SPDX-License-Identifier: Apache-2.0
#include "vtcas/metrics.hpp"

#include <charconv>
#include <iomanip>
#include <sstream>

#include "vtcas/error.hpp"

namespace vtcas {

MetricsLogger::MetricsLogger(const std::filesystem::path& path) : path_(path), out_(path, std::ios::trunc) {
  if (!out_) throw Error("metrics: cannot open " + path.string() + " for writing");
  out_ << kMetricsHeader << '\n' << std::flush;
}

void MetricsLogger::log(const MetricsRow& row) {
  if (rows_ > 0 && (row.stage < last_stage_ || (row.stage == last_stage_ && row.epoch < last_epoch_))) {
    throw Error("metrics: row (" + std::to_string(row.stage) + "," + std::to_string(row.epoch) + ") after (" +
                std::to_string(last_stage_) + "," + std::to_string(last_epoch_) + ")");
  }
  if (row.phase.find_first_of(",\n\"") != std::string::npos) throw Error("metrics: bad phase name '" + row.phase + "'");
  out_ << row.stage << ',' << row.epoch << ',' << row.phase << ',' << std::setprecision(10) << row.loss << ','
       << row.acc << ',' << row.lr << ',' << row.seconds << '\n'
       << std::flush;
  if (!out_) throw Error("metrics: write to " + path_.string() + " failed");
  last_stage_ = row.stage;
  last_epoch_ = row.epoch;
  ++rows_;
}

namespace {

template <typename T>
T parse_field(const std::string& text, std::size_t line, const char* what) {
  T v{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw FormatError("metrics line " + std::to_string(line) + ": bad " + what + " '" + text + "'");
  }
  return v;
}

}  // namespace

std::vector<MetricsRow> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("metrics: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) throw FormatError("metrics: missing header in " + path.string());
  std::vector<MetricsRow> rows;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 7) throw FormatError("metrics line " + std::to_string(n) + ": expected 7 fields");
    MetricsRow r;
    r.stage = parse_field<std::size_t>(f[0], n, "stage");
    r.epoch = parse_field<std::size_t>(f[1], n, "epoch");
    r.phase = f[2];
    r.loss = parse_field<double>(f[3], n, "loss");
    r.acc = parse_field<double>(f[4], n, "acc");
    r.lr = parse_field<double>(f[5], n, "lr");
    r.seconds = parse_field<double>(f[6], n, "seconds");
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace vtcas
