#include "shapeinst/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace shapeinst {

namespace {

constexpr std::size_t kLeafSize = 8;

void require_nonempty(const PointCloud& cloud, const char* who) {
  if (cloud.empty()) throw std::invalid_argument(std::string(who) + ": empty point cloud");
}

}  // namespace

Vec3 cloud_centroid(const PointCloud& cloud) {
  require_nonempty(cloud, "cloud_centroid");
  Vec3 c{0.0, 0.0, 0.0};
  for (const Vec3& p : cloud.points) {
    c[0] += p[0];
    c[1] += p[1];
    c[2] += p[2];
  }
  const double n = static_cast<double>(cloud.size());
  return {c[0] / n, c[1] / n, c[2] / n};
}

double mean_cloud_radius(const PointCloud& cloud) {
  const Vec3 c = cloud_centroid(cloud);
  double acc = 0.0;
  for (const Vec3& p : cloud.points) acc += std::sqrt(squared_distance(p, c));
  return acc / static_cast<double>(cloud.size());
}

bool cloud_is_finite(const PointCloud& cloud) {
  for (const Vec3& p : cloud.points)
    for (double x : p)
      if (!std::isfinite(x)) return false;
  return true;
}

PointCloud cloud_from_tensor(const Tensor& tensor) {
  if (tensor.rank() != 2 || tensor.shape()[1] != 3)
    throw std::invalid_argument("cloud_from_tensor: expected [n,3], got " +
                                shape_to_string(tensor.shape()));
  PointCloud cloud;
  cloud.points.resize(tensor.shape()[0]);
  std::span<const double> d = tensor.data();
  for (std::size_t i = 0; i < cloud.points.size(); ++i)
    cloud.points[i] = {d[i * 3], d[i * 3 + 1], d[i * 3 + 2]};
  return cloud;
}

// --- NearestNeighborIndex ----------------------------------------------

NearestNeighborIndex::NearestNeighborIndex(const PointCloud& cloud)
    : points_(cloud.points) {
  if (points_.empty())
    throw std::invalid_argument("NearestNeighborIndex: empty point cloud");
  order_.resize(points_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  nodes_.reserve(2 * points_.size() / kLeafSize + 2);
  root_ = build(0, points_.size());
}

std::size_t NearestNeighborIndex::build(std::size_t begin, std::size_t end) {
  const std::size_t id = nodes_.size();
  nodes_.emplace_back();
  if (end - begin <= kLeafSize) {
    nodes_[id].axis = -1;
    nodes_[id].left = begin;
    nodes_[id].right = end;
    return id;
  }
  Vec3 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity()};
  Vec3 hi{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
          -std::numeric_limits<double>::infinity()};
  for (std::size_t i = begin; i < end; ++i) {
    const Vec3& p = points_[order_[i]];
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  }
  int axis = 0;
  for (int a = 1; a < 3; ++a)
    if (hi[a] - lo[a] > hi[axis] - lo[axis]) axis = a;

  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                   order_.begin() + static_cast<std::ptrdiff_t>(mid),
                   order_.begin() + static_cast<std::ptrdiff_t>(end),
                   [&](std::size_t a, std::size_t b) {
                     const double ca = points_[a][axis], cb = points_[b][axis];
                     return ca < cb || (ca == cb && a < b);
                   });
  const double split = points_[order_[mid]][axis];

  // Children are appended after this node, so record indices afterwards.
  const std::size_t left = build(begin, mid);
  const std::size_t right = build(mid, end);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void NearestNeighborIndex::search(std::size_t node_id, const Vec3& point, Result& best) const {
  const Node& node = nodes_[node_id];
  if (node.axis < 0) {
    for (std::size_t i = node.left; i < node.right; ++i) {
      const std::size_t idx = order_[i];
      const double d = squared_distance(point, points_[idx]);
      if (d < best.squared_distance ||
          (d == best.squared_distance && idx < best.index)) {
        best.squared_distance = d;
        best.index = idx;
      }
    }
    return;
  }
  const double diff = point[node.axis] - node.split;
  const std::size_t near = diff < 0.0 ? node.left : node.right;
  const std::size_t far = diff < 0.0 ? node.right : node.left;
  search(near, point, best);
  // The far side may still hold an equally distant lower-index point, so
  // prune only on a strict bound violation.
  if (diff * diff <= best.squared_distance) search(far, point, best);
}

NearestNeighborIndex::Result NearestNeighborIndex::query(const Vec3& point) const {
  Result best{points_.size(), std::numeric_limits<double>::infinity()};
  search(root_, point, best);
  return best;
}

// --- metrics ---------------------------------------------------------------

double chamfer_distance(const PointCloud& a, const PointCloud& b) {
  require_nonempty(a, "chamfer_distance");
  require_nonempty(b, "chamfer_distance");
  NearestNeighborIndex index_b(b);
  NearestNeighborIndex index_a(a);
  double sum_ab = 0.0;
  for (const Vec3& p : a.points) sum_ab += index_b.query(p).squared_distance;
  double sum_ba = 0.0;
  for (const Vec3& p : b.points) sum_ba += index_a.query(p).squared_distance;
  return sum_ab + sum_ba;
}

Tensor chamfer_loss(const Tensor& predicted, const PointCloud& truth) {
  PointCloud pred = cloud_from_tensor(predicted);
  require_nonempty(pred, "chamfer_loss");
  require_nonempty(truth, "chamfer_loss");

  NearestNeighborIndex index_truth(truth);
  NearestNeighborIndex index_pred(pred);

  std::vector<std::size_t> match_pred(pred.size());   // pred i -> nearest truth
  std::vector<std::size_t> match_truth(truth.size()); // truth j -> nearest pred
  double sum_pt = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto r = index_truth.query(pred.points[i]);
    match_pred[i] = r.index;
    sum_pt += r.squared_distance;
  }
  double sum_tp = 0.0;
  for (std::size_t j = 0; j < truth.size(); ++j) {
    const auto r = index_pred.query(truth.points[j]);
    match_truth[j] = r.index;
    sum_tp += r.squared_distance;
  }

  auto pred_node = predicted.node();
  PointCloud truth_copy = truth;
  return make_op(
      Shape{1}, {sum_pt + sum_tp}, {predicted},
      [pred_node, truth_copy = std::move(truth_copy), pred = std::move(pred),
       match_pred = std::move(match_pred), match_truth = std::move(match_truth)](
          const double* g, detail::BackwardPass& pass) {
        double* gp = pass.grad_for(pred_node);
        if (!gp) return;
        const double f = 2.0 * g[0];
        for (std::size_t i = 0; i < pred.size(); ++i) {
          const Vec3& y = truth_copy.points[match_pred[i]];
          for (int c = 0; c < 3; ++c) gp[i * 3 + c] += f * (pred.points[i][c] - y[c]);
        }
        for (std::size_t j = 0; j < truth_copy.size(); ++j) {
          const std::size_t i = match_truth[j];
          const Vec3& y = truth_copy.points[j];
          for (int c = 0; c < 3; ++c) gp[i * 3 + c] += f * (pred.points[i][c] - y[c]);
        }
      });
}

double pc_to_pc_error(const PointCloud& predicted, const PointCloud& truth, DistanceMode mode) {
  require_nonempty(predicted, "pc_to_pc_error");
  require_nonempty(truth, "pc_to_pc_error");
  NearestNeighborIndex index(truth);
  double acc = 0.0;
  for (const Vec3& p : predicted.points) {
    const double d = index.query(p).squared_distance;
    acc += mode == DistanceMode::kSquared ? d : std::sqrt(d);
  }
  return acc / static_cast<double>(predicted.size());
}

double correspondence_distance(const PointCloud& predicted, const PointCloud& truth,
                               CorrespondenceNorm norm) {
  require_nonempty(predicted, "correspondence_distance");
  if (predicted.size() != truth.size())
    throw std::invalid_argument("correspondence_distance: clouds have " +
                                std::to_string(predicted.size()) + " vs " +
                                std::to_string(truth.size()) + " points");
  double acc = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const Vec3& p = predicted.points[i];
    const Vec3& y = truth.points[i];
    if (norm == CorrespondenceNorm::kL2) {
      acc += std::sqrt(squared_distance(p, y));
    } else {
      acc += std::abs(p[0] - y[0]) + std::abs(p[1] - y[1]) + std::abs(p[2] - y[2]);
    }
  }
  return acc / static_cast<double>(predicted.size());
}

Tensor correspondence_loss(const Tensor& predicted, const PointCloud& truth,
                           CorrespondenceNorm norm) {
  PointCloud pred = cloud_from_tensor(predicted);
  const double value = correspondence_distance(pred, truth, norm);

  auto pred_node = predicted.node();
  PointCloud truth_copy = truth;
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  return make_op(
      Shape{1}, {value}, {predicted},
      [pred_node, truth_copy = std::move(truth_copy), pred = std::move(pred), norm, inv_n](
          const double* g, detail::BackwardPass& pass) {
        double* gp = pass.grad_for(pred_node);
        if (!gp) return;
        const double f = g[0] * inv_n;
        for (std::size_t i = 0; i < pred.size(); ++i) {
          const Vec3& p = pred.points[i];
          const Vec3& y = truth_copy.points[i];
          if (norm == CorrespondenceNorm::kL2) {
            const double dist = std::sqrt(squared_distance(p, y));
            if (dist == 0.0) continue;  // subgradient 0 at coincidence
            for (int c = 0; c < 3; ++c) gp[i * 3 + c] += f * (p[c] - y[c]) / dist;
          } else {
            for (int c = 0; c < 3; ++c) {
              const double d = p[c] - y[c];
              if (d > 0.0)
                gp[i * 3 + c] += f;
              else if (d < 0.0)
                gp[i * 3 + c] -= f;
            }
          }
        }
      });
}

}  // namespace shapeinst
