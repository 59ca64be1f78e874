#pragma once

// Report persistence: plain CSV tables with numbers at 17 significant digits
// (so reruns with the same config and build are byte-identical) and a
// schema-versioned report.json carrying the resolved config, seed, summary
// values, and wall-clock time. Timing lives only in report.json; tables stay
// deterministic.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace cdlab::cli {

struct report_io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
      : os_(path, std::ios::trunc) {
    if (!os_) throw report_io_error("cannot open table for writing: " + path.string());
    for (size_t i = 0; i < header.size(); ++i) os_ << (i ? "," : "") << header[i];
    os_ << "\n";
  }

  void row(const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << cells[i];
    os_ << "\n";
  }

  ~CsvWriter() { os_.flush(); }

 private:
  std::ofstream os_;
};

// Sample table: one row per generated point, columns x0..x{d-1} plus a class
// label (-1 for unconditional samples).
inline void write_samples_csv(const std::filesystem::path& path, const Eigen::MatrixXd& x,
                              const Eigen::VectorXi* labels) {
  std::vector<std::string> header;
  for (Eigen::Index j = 0; j < x.cols(); ++j) header.push_back("x" + std::to_string(j));
  header.push_back("label");
  CsvWriter w(path, header);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    std::vector<std::string> cells;
    for (Eigen::Index j = 0; j < x.cols(); ++j) cells.push_back(g17(x(i, j)));
    cells.push_back(std::to_string(labels ? (*labels)[i] : -1));
    w.row(cells);
  }
}

struct SampleTable {
  Eigen::MatrixXd x;
  Eigen::VectorXi labels;  // -1 where unlabeled
  bool has_labels() const { return labels.size() > 0 && (labels.array() >= 0).any(); }
};

inline SampleTable read_samples_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw report_io_error("cannot open samples table: " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw report_io_error("empty samples table: " + path.string());
  Eigen::Index cols = 1;
  for (char c : line)
    if (c == ',') ++cols;
  if (cols < 2) throw report_io_error("samples table needs at least one coordinate and a label");
  const Eigen::Index d = cols - 1;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> vals;
    size_t pos = 0;
    while (true) {
      const size_t next = line.find(',', pos);
      const std::string tok = line.substr(pos, next == std::string::npos ? next : next - pos);
      try {
        vals.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw report_io_error("malformed numeric cell in " + path.string() + ": '" + tok + "'");
      }
      if (next == std::string::npos) break;
      pos = next + 1;
    }
    if (static_cast<Eigen::Index>(vals.size()) != cols)
      throw report_io_error("ragged row in samples table: " + path.string());
    labels.push_back(static_cast<int>(vals.back()));
    vals.pop_back();
    rows.push_back(std::move(vals));
  }
  SampleTable t;
  t.x.resize(static_cast<Eigen::Index>(rows.size()), d);
  t.labels.resize(static_cast<Eigen::Index>(rows.size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    for (Eigen::Index j = 0; j < d; ++j) t.x(static_cast<Eigen::Index>(i), j) = rows[i][j];
    t.labels[static_cast<Eigen::Index>(i)] = labels[i];
  }
  return t;
}

inline void write_report_json(const std::filesystem::path& path, const nlohmann::json& body) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw report_io_error("cannot open report for writing: " + path.string());
  os << body.dump(2) << "\n";
}

}  // namespace cdlab::cli
