#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tpsmooth/tensor.hpp"

namespace tpsmooth {

using tensor::index_t;

struct CsvTable {
  std::vector<std::string> columns;
  Eigen::MatrixXd values;
  std::vector<index_t> dropped_rows;  // 0-based data rows with empty cells
};

// Reads a numeric CSV with a header line. Rows containing empty cells are
// dropped and reported through dropped_rows; any other non-numeric cell is an
// error.
CsvTable read_csv(const std::filesystem::path& path);

struct RescaleRecord {
  double min = 0.0;
  double max = 1.0;
};

inline double to_unit(const RescaleRecord& r, double v) {
  return (v - r.min) / (r.max - r.min);
}
inline double from_unit(const RescaleRecord& r, double u) {
  return r.min + u * (r.max - r.min);
}

struct Dataset {
  Eigen::MatrixXd x;  // n x p, affinely mapped into [0,1] per coordinate
  Eigen::VectorXd y;
  std::vector<std::string> coord_names;
  std::string response_name;
  std::vector<RescaleRecord> rescale;
  std::vector<index_t> dropped_rows;
};

Dataset ingest_csv(const std::filesystem::path& path,
                   const std::vector<std::string>& coords,
                   const std::string& response);

// Raw little-endian doubles, row-major; shapes live in the manifest.
void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix(const std::filesystem::path& path, index_t rows,
                            index_t cols);

void write_text_file(const std::filesystem::path& path,
                     const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

// Key-value configuration: one `key = value` per line, '#' comments.
std::map<std::string, std::string> read_config_file(
    const std::filesystem::path& path);

// FNV-1a over the canonical "key=value\n" serialization; stored in manifests
// so stale or hand-edited artifacts are detected on reload.
std::uint64_t config_hash(const std::map<std::string, std::string>& config);

}  // namespace tpsmooth
