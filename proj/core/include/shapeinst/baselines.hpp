#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "shapeinst/dataset.hpp"
#include "shapeinst/report.hpp"

namespace shapeinst {

/// Row-per-frame design matrix: each row is a flattened 2-D contour
/// landmark vector; the companion response rows are flattened numY*3
/// vertex coordinates.
struct LandmarkMatrix {
  std::vector<std::vector<double>> rows;

  std::size_t row_count() const { return rows.size(); }
  std::size_t column_count() const { return rows.empty() ? 0 : rows.front().size(); }
};

/// Partial least squares regression fitted with the iterative
/// single-component-deflation (NIPALS-family) procedure.
struct PlsrModel {
  std::size_t components = 0;  // achieved count (may stop early on rank deficiency)
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::vector<double> x_mean;
  std::vector<double> y_mean;
  std::vector<double> coefficients;  // in_dim x out_dim, row major
};

PlsrModel plsr_fit(const LandmarkMatrix& X, const LandmarkMatrix& Y, std::size_t components);

std::vector<double> plsr_predict_vector(const PlsrModel& model, std::span<const double> x);

/// Prediction reshaped to a numY x 3 cloud (vertex order preserved).
PointCloud plsr_predict(const PlsrModel& model, std::span<const double> x);

/// Kernel PLSR: PLSR in the feature space induced by a Gaussian kernel on
/// landmark vectors, with a centered kernel matrix; predictions go through
/// dual coefficients.
struct KplsrModel {
  std::size_t components = 0;
  std::size_t out_dim = 0;
  double sigma = 0.0;
  std::vector<std::vector<double>> train_rows;
  std::vector<double> y_mean;
  std::vector<double> dual;  // n x out_dim, row major
  std::vector<double> kernel_column_mean;
  double kernel_grand_mean = 0.0;
};

KplsrModel kplsr_fit(const LandmarkMatrix& X, const LandmarkMatrix& Y, std::size_t components,
                     double sigma);

std::vector<double> kplsr_predict_vector(const KplsrModel& model, std::span<const double> x);
PointCloud kplsr_predict(const KplsrModel& model, std::span<const double> x);

/// Median of all pairwise Euclidean distances between rows (the kernel
/// width grid is expressed in multiples of this).
double median_pairwise_distance(const LandmarkMatrix& X);

enum class BaselineMethod { kPlsr, kKplsr };

struct BaselineOptions {
  std::size_t max_components = 8;  // capped at rows-2 per fold
  std::vector<double> sigma_grid = {0.5, 1.0, 2.0, 4.0};  // x median pairwise distance
};

/// Leave-one-out sweep of a two-stage baseline over one subject. Requires
/// subject landmarks. The kernel width is selected per fold by a small grid
/// over the training frames' own leave-one-out error.
ExperimentReport run_subject_baseline(const SubjectDataset& subject, BaselineMethod method,
                                      const BaselineOptions& options = {});

}  // namespace shapeinst
