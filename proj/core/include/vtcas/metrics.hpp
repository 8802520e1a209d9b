// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace vtcas {

struct MetricsRow {
  std::size_t stage = 0;
  std::size_t epoch = 0;
  std::string phase;  // train | val | arch
  double loss = 0.0;
  double acc = 0.0;
  double lr = 0.0;
  double seconds = 0.0;

  bool operator==(const MetricsRow&) const = default;
};

inline constexpr const char* kMetricsHeader = "stage,epoch,phase,loss,acc,lr,seconds";

/// Appends CSV rows to a fresh file, flushing after each. Throws Error if the
/// file cannot be opened or (stage, epoch) would decrease.
class MetricsLogger {
 public:
  explicit MetricsLogger(const std::filesystem::path& path);

  void log(const MetricsRow& row);
  std::size_t rows() const { return rows_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t rows_ = 0;
  std::size_t last_stage_ = 0;
  std::size_t last_epoch_ = 0;
};

/// Parses a file written by MetricsLogger; throws FormatError otherwise.
std::vector<MetricsRow> read_metrics(const std::filesystem::path& path);

}  // namespace vtcas
