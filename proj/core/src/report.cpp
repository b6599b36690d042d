#include "shapeinst/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "shapeinst/errors.hpp"
#include "shapeinst/ply.hpp"

namespace shapeinst {

double mean_euclidean_error(const std::vector<FoldRecord>& records) {
  if (records.empty()) return 0.0;
  double acc = 0.0;
  for (const FoldRecord& r : records) acc += r.pc_to_pc_euclidean_mm;
  return acc / static_cast<double>(records.size());
}

namespace {

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void export_report(const ExperimentReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  const auto csv_path = dir / "report.csv";
  std::ofstream csv(csv_path, std::ios::trunc);
  if (!csv) throw DataError("cannot open for writing: " + csv_path.string());
  csv << "frame,pc_to_pc_mm,pc_to_pc_mm2,chamfer,train_seconds,infer_seconds\n";
  for (const FoldRecord& r : report.records) {
    csv << r.test_frame << ',' << format_value(r.pc_to_pc_euclidean_mm) << ','
        << format_value(r.pc_to_pc_squared_mm2) << ',' << format_value(r.chamfer_final) << ','
        << format_value(r.train_seconds) << ',' << format_value(r.infer_seconds) << '\n';
  }
  csv << "mean," << format_value(report.subject_mean_mm) << ",,,,\n";
  if (!csv) throw DataError("write failed: " + csv_path.string());

  for (const FoldRecord& r : report.records) {
    if (r.predicted.empty()) continue;
    char stem[48];
    std::snprintf(stem, sizeof(stem), "pred_frame_%03d.ply", r.test_frame);
    // Per-vertex quality: distance to the nearest ground-truth vertex.
    NearestNeighborIndex index(r.truth);
    std::vector<double> quality(r.predicted.size());
    for (std::size_t i = 0; i < r.predicted.size(); ++i)
      quality[i] = std::sqrt(index.query(r.predicted.points[i]).squared_distance);
    write_ply(dir / stem, r.predicted, quality);

    std::snprintf(stem, sizeof(stem), "truth_frame_%03d.ply", r.test_frame);
    write_ply(dir / stem, r.truth);
  }
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open CSV: " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> row;
    std::istringstream fields(line);
    std::string cell;
    while (std::getline(fields, cell, ',')) row.push_back(cell);
    if (!line.empty() && line.back() == ',') row.push_back("");
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace shapeinst
