#include "tpsmooth/io.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "tpsmooth/errors.hpp"

namespace tpsmooth {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_line(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, sep)) out.push_back(trim(cell));
  if (!line.empty() && line.back() == sep) out.push_back("");
  return out;
}

}  // namespace

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw io_error("empty file " + path.string());
  CsvTable table;
  table.columns = split_line(line, ',');
  const std::size_t ncol = table.columns.size();

  std::vector<std::vector<double>> rows;
  index_t data_row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) {
      ++data_row;
      continue;
    }
    const auto cells = split_line(line, ',');
    if (cells.size() != ncol)
      throw io_error(path.string() + ": row " + std::to_string(data_row) +
                     " has " + std::to_string(cells.size()) + " cells, expected " +
                     std::to_string(ncol));
    bool missing = false;
    std::vector<double> parsed(ncol);
    for (std::size_t c = 0; c < ncol; ++c) {
      if (cells[c].empty()) {
        missing = true;
        break;
      }
      char* end = nullptr;
      errno = 0;
      parsed[c] = std::strtod(cells[c].c_str(), &end);
      if (end == cells[c].c_str() || *end != '\0' || errno == ERANGE)
        throw io_error(path.string() + ": non-numeric cell '" + cells[c] +
                       "' in row " + std::to_string(data_row) + ", column " +
                       table.columns[c]);
    }
    if (missing)
      table.dropped_rows.push_back(data_row);
    else
      rows.push_back(std::move(parsed));
    ++data_row;
  }

  table.values.resize(static_cast<index_t>(rows.size()), ncol);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < ncol; ++c)
      table.values(static_cast<index_t>(r), static_cast<index_t>(c)) = rows[r][c];
  return table;
}

Dataset ingest_csv(const std::filesystem::path& path,
                   const std::vector<std::string>& coords,
                   const std::string& response) {
  if (coords.empty()) throw validation_error("ingest: no coordinate columns given");
  const CsvTable table = read_csv(path);

  auto column_index = [&](const std::string& name) {
    const auto it = std::find(table.columns.begin(), table.columns.end(), name);
    if (it == table.columns.end())
      throw validation_error("ingest: column '" + name + "' not found in " +
                             path.string());
    return static_cast<index_t>(it - table.columns.begin());
  };

  const int p = static_cast<int>(coords.size());
  std::vector<index_t> coord_idx(p);
  for (int j = 0; j < p; ++j) coord_idx[j] = column_index(coords[j]);
  const index_t resp_idx = column_index(response);

  const index_t n = table.values.rows();
  if (n == 0) throw validation_error("ingest: no usable data rows in " + path.string());

  Dataset ds;
  ds.coord_names = coords;
  ds.response_name = response;
  ds.dropped_rows = table.dropped_rows;
  ds.x.resize(n, p);
  ds.y = table.values.col(resp_idx);
  ds.rescale.resize(p);
  for (int j = 0; j < p; ++j) {
    const Eigen::VectorXd col = table.values.col(coord_idx[j]);
    const double lo = col.minCoeff();
    const double hi = col.maxCoeff();
    if (!(hi > lo))
      throw validation_error("ingest: coordinate '" + coords[j] +
                             "' has fewer than 2 distinct values");
    ds.rescale[j] = RescaleRecord{lo, hi};
    ds.x.col(j) = (col.array() - lo) / (hi - lo);
  }
  return ds;
}

void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write " + path.string());
  for (index_t r = 0; r < m.rows(); ++r) {
    const Eigen::VectorXd row = m.row(r);
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(sizeof(double)) * row.size());
  }
  if (!out) throw io_error("short write to " + path.string());
}

Eigen::MatrixXd read_matrix(const std::filesystem::path& path, index_t rows,
                            index_t cols) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  Eigen::MatrixXd m(rows, cols);
  Eigen::VectorXd row(cols);
  for (index_t r = 0; r < rows; ++r) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(sizeof(double)) * cols);
    if (!in)
      throw io_error(path.string() + " is shorter than the manifest claims");
    m.row(r) = row;
  }
  return m;
}

void write_text_file(const std::filesystem::path& path,
                     const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write " + path.string());
  out << content;
  if (!out) throw io_error("short write to " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::map<std::string, std::string> read_config_file(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  index_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw io_error(path.string() + ":" + std::to_string(lineno) +
                     ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw io_error(path.string() + ":" + std::to_string(lineno) + ": empty key");
    out[key] = value;
  }
  return out;
}

std::uint64_t config_hash(const std::map<std::string, std::string>& config) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
  };
  for (const auto& [k, v] : config) {
    mix(k);
    mix("=");
    mix(v);
    mix("\n");
  }
  return h;
}

}  // namespace tpsmooth
