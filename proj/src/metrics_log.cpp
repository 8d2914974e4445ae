#include "trajnerf/metrics_log.hpp"

#include <cstdio>
#include <filesystem>
#include <sstream>

#include "trajnerf/errors.hpp"

namespace trajnerf {
namespace {

constexpr const char* kHeader = "step,loss,psnr_db";

std::string format_row(std::int64_t step, double loss, double psnr_db) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%lld,%.10g,%.10g",
                static_cast<long long>(step), loss, psnr_db);
  return buf;
}

// Last step recorded in an existing file, or -1 for absent/empty files.
std::int64_t tail_step(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return -1;
  in.seekg(0, std::ios::end);
  const std::streamoff size = in.tellg();
  if (size <= 0) return -1;
  const std::streamoff window = std::min<std::streamoff>(size, 256);
  in.seekg(size - window);
  std::string tail(static_cast<std::size_t>(window), '\0');
  in.read(tail.data(), window);
  while (!tail.empty() && (tail.back() == '\n' || tail.back() == '\r')) tail.pop_back();
  const std::size_t nl = tail.find_last_of('\n');
  std::string last = nl == std::string::npos ? tail : tail.substr(nl + 1);
  if (last == kHeader) return -1;
  std::istringstream ss(last);
  std::int64_t step = 0;
  char comma = 0;
  if (!(ss >> step >> comma) || comma != ',') {
    throw ParseError(path, 0, "metrics CSV: unreadable last row");
  }
  return step;
}

}  // namespace

void append_metric_row(const std::string& path, std::int64_t step, double loss,
                       double psnr_db) {
  const bool fresh = !std::filesystem::exists(path) ||
                     std::filesystem::file_size(path) == 0;
  if (!fresh) {
    const std::int64_t last = tail_step(path);
    if (step <= last) {
      throw InvalidInputError("metrics CSV: step " + std::to_string(step) +
                              " not greater than last step " + std::to_string(last));
    }
  }
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot open for appending: " + path);
  if (fresh) out << kHeader << "\n";
  out << format_row(step, loss, psnr_db) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

std::vector<MetricRow> parse_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line)) throw ParseError(path, 0, "empty metrics CSV");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeader) throw ParseError(path, 1, "metrics CSV: bad header");

  std::vector<MetricRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    MetricRow row;
    char c1 = 0, c2 = 0;
    std::istringstream ss(line);
    if (!(ss >> row.step >> c1 >> row.loss >> c2 >> row.psnr_db) || c1 != ',' || c2 != ',') {
      throw ParseError(path, line_no, "metrics CSV: malformed row");
    }
    if (!rows.empty() && row.step <= rows.back().step) {
      throw ParseError(path, line_no, "metrics CSV: non-monotone step");
    }
    rows.push_back(row);
  }
  return rows;
}

MetricsWriter::MetricsWriter(const std::string& path) : path_(path) {
  last_step_ = tail_step(path);
  const bool fresh = last_step_ < 0 &&
                     (!std::filesystem::exists(path) || std::filesystem::file_size(path) == 0);
  out_.open(path, std::ios::app);
  if (!out_) throw IoError("cannot open for appending: " + path);
  if (fresh) out_ << kHeader << "\n";
  any_ = !fresh;
}

void MetricsWriter::append(std::int64_t step, double loss, double psnr_db) {
  if ((any_ || last_step_ >= 0) && step <= last_step_) {
    throw InvalidInputError("metrics CSV: step " + std::to_string(step) +
                            " not greater than last step " + std::to_string(last_step_));
  }
  out_ << format_row(step, loss, psnr_db) << "\n";
  if (!out_) throw IoError("write failed: " + path_);
  last_step_ = step;
  any_ = true;
}

void MetricsWriter::flush() { out_.flush(); }

}  // namespace trajnerf
