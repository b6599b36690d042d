#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "shapeinst/geometry.hpp"

namespace shapeinst {

/// Result of one leave-one-out fold.
struct FoldRecord {
  int test_frame = 0;
  double pc_to_pc_euclidean_mm = 0.0;
  double pc_to_pc_squared_mm2 = 0.0;
  double chamfer_final = 0.0;
  double train_seconds = 0.0;
  double infer_seconds = 0.0;

  double initial_epoch_loss = 0.0;           // mean training loss before any update
  std::vector<double> epoch_mean_loss;       // mean training loss per epoch
  PointCloud predicted;                      // test-frame prediction (centered frame)
  PointCloud truth;                          // centered ground truth
  std::map<int, long> training_image_reads;  // audit: frame -> reads during training
  long test_frame_training_reads = 0;        // audit: must stay zero
};

/// One subject's full leave-one-out sweep.
struct ExperimentReport {
  std::string subject_id;
  std::string method = "pointoutnet";
  std::vector<FoldRecord> records;
  double subject_mean_mm = 0.0;  // mean of per-fold euclidean errors
};

double mean_euclidean_error(const std::vector<FoldRecord>& records);

/// Writes report.csv (one row per fold: frame, euclidean mm, squared mm^2,
/// final Chamfer value, train seconds, infer seconds) plus per-fold
/// predicted clouds as PLY with a per-vertex "quality" property holding the
/// distance to the nearest ground-truth vertex, and the ground-truth clouds
/// themselves. Values carry 17 significant digits so they round-trip.
void export_report(const ExperimentReport& report, const std::filesystem::path& dir);

/// Parses a report.csv written by export_report.
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path);

}  // namespace shapeinst
