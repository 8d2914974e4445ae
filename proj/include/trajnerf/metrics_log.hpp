#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace trajnerf {

struct MetricRow {
  std::int64_t step = 0;
  double loss = 0.0;
  double psnr_db = 0.0;
};

// Appends one row to a `step,loss,psnr_db` CSV, creating the file (with
// header) on first use. Steps must strictly increase within a file.
void append_metric_row(const std::string& path, std::int64_t step, double loss,
                       double psnr_db);

std::vector<MetricRow> parse_metrics_csv(const std::string& path);

// Keeps the file handle open across appends; what the training loop uses so
// 20k rows do not pay 20k open/close cycles. Same format and monotonicity
// rule as append_metric_row.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path);
  void append(std::int64_t step, double loss, double psnr_db);
  void flush();

 private:
  std::ofstream out_;
  std::string path_;
  std::int64_t last_step_ = -1;
  bool any_ = false;
};

}  // namespace trajnerf
