#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "shapeinst/tensor.hpp"

namespace shapeinst {

using Vec3 = std::array<double, 3>;

/// Unordered 3-D point set, coordinates in millimeters.
struct PointCloud {
  std::vector<Vec3> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

Vec3 cloud_centroid(const PointCloud& cloud);

/// Mean distance of the points from their centroid.
double mean_cloud_radius(const PointCloud& cloud);

/// All coordinates finite?
bool cloud_is_finite(const PointCloud& cloud);

/// Interprets a [n,3] tensor as a point cloud.
PointCloud cloud_from_tensor(const Tensor& tensor);

inline double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

/// Exact nearest-neighbor index over one cloud (axis-aligned splitting
/// tree). query() returns the true minimizer of squared Euclidean
/// distance; ties are broken toward the lowest point index, so results are
/// identical to a linear scan.
class NearestNeighborIndex {
 public:
  explicit NearestNeighborIndex(const PointCloud& cloud);

  struct Result {
    std::size_t index;
    double squared_distance;
  };

  Result query(const Vec3& point) const;
  std::size_t size() const { return points_.size(); }

 private:
  struct Node {
    int axis = -1;          // -1 marks a leaf
    double split = 0.0;     // splitting coordinate (max of left subtree)
    std::size_t left = 0;   // children for internal nodes,
    std::size_t right = 0;  // [begin,end) index range for leaves
  };

  std::size_t build(std::size_t begin, std::size_t end);
  void search(std::size_t node, const Vec3& point, Result& best) const;

  std::vector<Vec3> points_;
  std::vector<std::size_t> order_;  // permutation of point indices
  std::vector<Node> nodes_;
  std::size_t root_ = 0;
};

// --- metrics ---------------------------------------------------------------

/// Symmetric Chamfer distance: sum over each cloud of the squared distance
/// to the nearest point in the other cloud. Sums, not means.
double chamfer_distance(const PointCloud& a, const PointCloud& b);

/// Chamfer distance as a differentiable loss. `predicted` is a [n,3]
/// tensor; gradients flow through both sum terms via the nearest-neighbor
/// matches (the lowest-index minimizer when ties occur).
Tensor chamfer_loss(const Tensor& predicted, const PointCloud& truth);

enum class DistanceMode { kSquared, kEuclidean };

/// One-directional mean nearest-neighbor distance from `predicted` to
/// `truth`: squared mode in mm^2, euclidean mode in mm. Euclidean is the
/// mode used for millimeter-scale reporting.
double pc_to_pc_error(const PointCloud& predicted, const PointCloud& truth, DistanceMode mode);

enum class CorrespondenceNorm { kL1, kL2 };

/// Mean per-vertex L1 or L2 distance over index-matched vertices. Requires
/// equal point counts.
double correspondence_distance(const PointCloud& predicted, const PointCloud& truth,
                               CorrespondenceNorm norm);

/// Differentiable variant of correspondence_distance for the loss ablation.
Tensor correspondence_loss(const Tensor& predicted, const PointCloud& truth,
                           CorrespondenceNorm norm);

}  // namespace shapeinst
