#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "shapeinst/geometry.hpp"
#include "shapeinst/pgm.hpp"
#include "shapeinst/tensor.hpp"

namespace shapeinst {

/// Floating-point grayscale image (raw or normalized intensities).
struct GrayImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;
};

GrayImage to_gray(const ImageU16& image);

/// Divides every pixel by the image's own maximum, so the maximum becomes
/// exactly 1. Rejects all-zero images.
GrayImage normalize_image(const GrayImage& image);

/// [1,H,W,1] tensor view of an image, for network input.
Tensor image_to_tensor(const GrayImage& image);

/// Subtracts the centroid; returns the centered cloud and the centroid that
/// restores the original.
std::pair<PointCloud, Vec3> center_cloud(const PointCloud& cloud);

/// One synchronized (image, point cloud) pair at a time frame.
struct Sample {
  ImageU16 image;
  PointCloud cloud;
  int frame_index = 0;  // 1..M
};

/// All time frames of one subject. Every sample shares the vertex count and
/// image extents; vertex i corresponds across frames.
struct SubjectDataset {
  std::string subject_id;
  int frame_count = 0;        // M
  std::size_t num_vertices = 0;  // numY
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<Sample> samples;  // ascending frame_index 1..M

  /// Optional per-frame 2-D contour landmark vectors (flattened x,z pairs)
  /// for the two-stage regression baselines. Empty when absent.
  std::vector<std::vector<double>> landmarks;

  const Sample& frame(int index) const;
  bool has_landmarks() const { return !landmarks.empty(); }
};

struct Fold {
  std::vector<int> train_frames;
  int test_frame = 0;
};

struct FoldPlan {
  std::vector<Fold> folds;  // one per frame, in frame order
};

/// Leave-one-out folds over frames 1..frame_count.
FoldPlan loocv_folds(int frame_count);

/// Writes manifest.json plus per-frame PGM/PLY files (and landmarks.csv
/// when present) into `dir`.
void save_subject(const SubjectDataset& subject, const std::filesystem::path& dir);

/// Loads a subject from its manifest. Frames may appear in any order in the
/// manifest; samples are returned sorted by frame index. Missing files and
/// extent or vertex-count mismatches are rejected with the frame named.
SubjectDataset load_subject(const std::filesystem::path& manifest_path);

}  // namespace shapeinst
