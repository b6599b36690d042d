#include "shapeinst/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

#include "shapeinst/errors.hpp"

namespace shapeinst {

namespace {

using Clock = std::chrono::steady_clock;
constexpr double kTol = 1e-12;
constexpr int kMaxIterations = 500;

double seconds_from(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Eigen::MatrixXd to_matrix(const LandmarkMatrix& m, const char* who) {
  if (m.rows.empty()) throw std::invalid_argument(std::string(who) + ": empty matrix");
  const std::size_t cols = m.rows.front().size();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(m.rows.size()),
                      static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    if (m.rows[i].size() != cols)
      throw std::invalid_argument(std::string(who) + ": row " + std::to_string(i) + " has " +
                                  std::to_string(m.rows[i].size()) + " columns, expected " +
                                  std::to_string(cols));
    for (std::size_t j = 0; j < cols; ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m.rows[i][j];
  }
  return out;
}

/// Picks the response column with the largest squared norm as the starting
/// score; deterministic and robust for multi-response fits.
Eigen::Index dominant_column(const Eigen::MatrixXd& F) {
  Eigen::Index best = 0;
  double best_norm = -1.0;
  for (Eigen::Index j = 0; j < F.cols(); ++j) {
    const double n = F.col(j).squaredNorm();
    if (n > best_norm) {
      best_norm = n;
      best = j;
    }
  }
  return best;
}

PointCloud cloud_from_flat(std::span<const double> values) {
  if (values.size() % 3 != 0)
    throw std::invalid_argument("cloud_from_flat: length not divisible by 3");
  PointCloud cloud;
  cloud.points.resize(values.size() / 3);
  for (std::size_t i = 0; i < cloud.points.size(); ++i)
    cloud.points[i] = {values[3 * i], values[3 * i + 1], values[3 * i + 2]};
  return cloud;
}

}  // namespace

PlsrModel plsr_fit(const LandmarkMatrix& X, const LandmarkMatrix& Y, std::size_t components) {
  Eigen::MatrixXd Xm = to_matrix(X, "plsr_fit X");
  Eigen::MatrixXd Ym = to_matrix(Y, "plsr_fit Y");
  const Eigen::Index n = Xm.rows(), p = Xm.cols(), q = Ym.cols();
  if (Ym.rows() != n)
    throw std::invalid_argument("plsr_fit: X has " + std::to_string(n) + " rows but Y has " +
                                std::to_string(Ym.rows()));
  const std::size_t bound = std::min<std::size_t>(static_cast<std::size_t>(n - 1),
                                                  static_cast<std::size_t>(p));
  if (components < 1 || components > bound)
    throw std::invalid_argument("plsr_fit: component count " + std::to_string(components) +
                                " outside 1.." + std::to_string(bound) + " for " +
                                std::to_string(n) + " rows and " + std::to_string(p) +
                                " columns");

  PlsrModel model;
  model.in_dim = static_cast<std::size_t>(p);
  model.out_dim = static_cast<std::size_t>(q);

  const Eigen::RowVectorXd x_mean = Xm.colwise().mean();
  const Eigen::RowVectorXd y_mean = Ym.colwise().mean();
  Eigen::MatrixXd E = Xm.rowwise() - x_mean;
  Eigen::MatrixXd F = Ym.rowwise() - y_mean;
  const double x_scale = E.norm();
  const double y_scale = F.norm();

  Eigen::MatrixXd W(p, static_cast<Eigen::Index>(components));
  Eigen::MatrixXd P(p, static_cast<Eigen::Index>(components));
  Eigen::MatrixXd C(q, static_cast<Eigen::Index>(components));

  std::size_t achieved = 0;
  for (std::size_t a = 0; a < components; ++a) {
    if (F.norm() <= kTol * std::max(1.0, y_scale)) break;  // response fully explained
    Eigen::VectorXd u = F.col(dominant_column(F));
    Eigen::VectorXd w(p), t(n), c(q);
    Eigen::VectorXd t_prev = Eigen::VectorXd::Zero(n);
    bool vanished = false;
    for (int it = 0; it < kMaxIterations; ++it) {
      w = E.transpose() * u;
      const double wn = w.norm();
      if (wn <= kTol * std::max(1.0, x_scale)) {
        vanished = true;  // rank deficiency: the component carries nothing
        break;
      }
      w /= wn;
      t = E * w;
      const double tt = t.squaredNorm();
      if (tt <= kTol) {
        vanished = true;
        break;
      }
      c = F.transpose() * t / tt;
      const double cn = c.squaredNorm();
      if (cn <= kTol) {
        vanished = true;
        break;
      }
      u = F * c / cn;
      if ((t - t_prev).norm() <= 1e-12 * t.norm()) break;
      t_prev = t;
    }
    if (vanished) break;

    const double tt = t.squaredNorm();
    const Eigen::VectorXd pa = E.transpose() * t / tt;
    E.noalias() -= t * pa.transpose();
    F.noalias() -= t * c.transpose();
    W.col(static_cast<Eigen::Index>(a)) = w;
    P.col(static_cast<Eigen::Index>(a)) = pa;
    C.col(static_cast<Eigen::Index>(a)) = c;
    ++achieved;
  }
  model.components = achieved;

  model.x_mean.assign(x_mean.data(), x_mean.data() + p);
  model.y_mean.assign(y_mean.data(), y_mean.data() + q);
  model.coefficients.assign(static_cast<std::size_t>(p) * static_cast<std::size_t>(q), 0.0);
  if (achieved > 0) {
    const auto Wa = W.leftCols(static_cast<Eigen::Index>(achieved));
    const auto Pa = P.leftCols(static_cast<Eigen::Index>(achieved));
    const auto Ca = C.leftCols(static_cast<Eigen::Index>(achieved));
    const Eigen::MatrixXd PtW = Pa.transpose() * Wa;
    const Eigen::MatrixXd B =
        Wa * PtW.completeOrthogonalDecomposition().solve(Ca.transpose());
    for (Eigen::Index i = 0; i < p; ++i)
      for (Eigen::Index j = 0; j < q; ++j)
        model.coefficients[static_cast<std::size_t>(i) * model.out_dim +
                           static_cast<std::size_t>(j)] = B(i, j);
  }
  return model;
}

std::vector<double> plsr_predict_vector(const PlsrModel& model, std::span<const double> x) {
  if (x.size() != model.in_dim)
    throw std::invalid_argument("plsr_predict: input has " + std::to_string(x.size()) +
                                " values, model expects " + std::to_string(model.in_dim));
  std::vector<double> y(model.y_mean);
  for (std::size_t i = 0; i < model.in_dim; ++i) {
    const double xc = x[i] - model.x_mean[i];
    if (xc == 0.0) continue;
    const double* row = model.coefficients.data() + i * model.out_dim;
    for (std::size_t j = 0; j < model.out_dim; ++j) y[j] += xc * row[j];
  }
  return y;
}

PointCloud plsr_predict(const PlsrModel& model, std::span<const double> x) {
  return cloud_from_flat(plsr_predict_vector(model, x));
}

double median_pairwise_distance(const LandmarkMatrix& X) {
  const Eigen::MatrixXd Xm = to_matrix(X, "median_pairwise_distance");
  std::vector<double> distances;
  for (Eigen::Index i = 0; i < Xm.rows(); ++i)
    for (Eigen::Index j = i + 1; j < Xm.rows(); ++j)
      distances.push_back((Xm.row(i) - Xm.row(j)).norm());
  if (distances.empty()) return 0.0;
  std::sort(distances.begin(), distances.end());
  return distances[distances.size() / 2];
}

namespace {

double gaussian_kernel(std::span<const double> a, std::span<const double> b, double sigma) {
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    d2 += d * d;
  }
  return std::exp(-d2 / (2.0 * sigma * sigma));
}

}  // namespace

KplsrModel kplsr_fit(const LandmarkMatrix& X, const LandmarkMatrix& Y, std::size_t components,
                     double sigma) {
  if (sigma <= 0.0)
    throw std::invalid_argument("kplsr_fit: kernel width must be positive, got " +
                                std::to_string(sigma));
  const Eigen::MatrixXd Xm = to_matrix(X, "kplsr_fit X");
  const Eigen::MatrixXd Ym = to_matrix(Y, "kplsr_fit Y");
  const Eigen::Index n = Xm.rows(), q = Ym.cols();
  if (Ym.rows() != n)
    throw std::invalid_argument("kplsr_fit: X has " + std::to_string(n) + " rows but Y has " +
                                std::to_string(Ym.rows()));
  if (components < 1 || components > static_cast<std::size_t>(n - 1))
    throw std::invalid_argument("kplsr_fit: component count " + std::to_string(components) +
                                " outside 1.." + std::to_string(n - 1));

  KplsrModel model;
  model.sigma = sigma;
  model.out_dim = static_cast<std::size_t>(q);
  model.train_rows = X.rows;

  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      K(i, j) = gaussian_kernel(X.rows[static_cast<std::size_t>(i)],
                                X.rows[static_cast<std::size_t>(j)], sigma);
  const Eigen::VectorXd col_mean = K.colwise().mean();
  const double grand_mean = K.mean();
  model.kernel_column_mean.assign(col_mean.data(), col_mean.data() + n);
  model.kernel_grand_mean = grand_mean;

  const Eigen::MatrixXd centering =
      Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / n);
  const Eigen::MatrixXd Kc = centering * K * centering;

  const Eigen::RowVectorXd y_mean = Ym.colwise().mean();
  model.y_mean.assign(y_mean.data(), y_mean.data() + q);
  Eigen::MatrixXd F = Ym.rowwise() - y_mean;
  const double y_scale = F.norm();

  Eigen::MatrixXd Kd = Kc;
  Eigen::MatrixXd T(n, static_cast<Eigen::Index>(components));
  Eigen::MatrixXd U(n, static_cast<Eigen::Index>(components));

  std::size_t achieved = 0;
  for (std::size_t a = 0; a < components; ++a) {
    if (F.norm() <= kTol * std::max(1.0, y_scale)) break;
    Eigen::VectorXd u = F.col(dominant_column(F));
    const double un = u.norm();
    if (un <= kTol) break;
    u /= un;
    Eigen::VectorXd t(n), c(q);
    Eigen::VectorXd t_prev = Eigen::VectorXd::Zero(n);
    bool vanished = false;
    for (int it = 0; it < kMaxIterations; ++it) {
      t = Kd * u;
      const double tn = t.norm();
      if (tn <= kTol) {
        vanished = true;
        break;
      }
      t /= tn;
      c = F.transpose() * t;
      Eigen::VectorXd u_new = F * c;
      const double unn = u_new.norm();
      if (unn <= kTol) {
        vanished = true;
        break;
      }
      u = u_new / unn;
      if ((t - t_prev).norm() <= 1e-12) break;
      t_prev = t;
    }
    if (vanished) break;

    T.col(static_cast<Eigen::Index>(a)) = t;
    U.col(static_cast<Eigen::Index>(a)) = u;
    const Eigen::MatrixXd deflate = Eigen::MatrixXd::Identity(n, n) - t * t.transpose();
    Kd = deflate * Kd * deflate;
    F.noalias() -= t * (t.transpose() * F);
    ++achieved;
  }
  model.components = achieved;

  model.dual.assign(static_cast<std::size_t>(n) * model.out_dim, 0.0);
  if (achieved > 0) {
    const auto Ta = T.leftCols(static_cast<Eigen::Index>(achieved));
    const auto Ua = U.leftCols(static_cast<Eigen::Index>(achieved));
    const Eigen::MatrixXd M = Ta.transpose() * Kc * Ua;
    const Eigen::MatrixXd F0 = Ym.rowwise() - y_mean;
    const Eigen::MatrixXd B =
        Ua * M.completeOrthogonalDecomposition().solve(Ta.transpose() * F0);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < q; ++j)
        model.dual[static_cast<std::size_t>(i) * model.out_dim + static_cast<std::size_t>(j)] =
            B(i, j);
  }
  return model;
}

std::vector<double> kplsr_predict_vector(const KplsrModel& model, std::span<const double> x) {
  const std::size_t n = model.train_rows.size();
  if (model.train_rows.empty() || x.size() != model.train_rows.front().size())
    throw std::invalid_argument("kplsr_predict: input has " + std::to_string(x.size()) +
                                " values, model expects " +
                                std::to_string(model.train_rows.empty()
                                                   ? 0
                                                   : model.train_rows.front().size()));
  std::vector<double> k(n);
  double k_mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    k[i] = gaussian_kernel(x, model.train_rows[i], model.sigma);
    k_mean += k[i];
  }
  k_mean /= static_cast<double>(n);

  std::vector<double> y(model.y_mean);
  for (std::size_t i = 0; i < n; ++i) {
    const double centered =
        k[i] - k_mean - model.kernel_column_mean[i] + model.kernel_grand_mean;
    if (centered == 0.0) continue;
    const double* row = model.dual.data() + i * model.out_dim;
    for (std::size_t j = 0; j < model.out_dim; ++j) y[j] += centered * row[j];
  }
  return y;
}

PointCloud kplsr_predict(const KplsrModel& model, std::span<const double> x) {
  return cloud_from_flat(kplsr_predict_vector(model, x));
}

// --- leave-one-out runner ---------------------------------------------

namespace {

std::vector<double> flatten_centered_cloud(const PointCloud& cloud) {
  auto [centered, centroid] = center_cloud(cloud);
  (void)centroid;
  std::vector<double> flat;
  flat.reserve(centered.size() * 3);
  for (const Vec3& p : centered.points) {
    flat.push_back(p[0]);
    flat.push_back(p[1]);
    flat.push_back(p[2]);
  }
  return flat;
}

std::size_t fold_components(std::size_t rows, std::size_t columns, std::size_t max_components) {
  const std::size_t bound = std::min(rows - 1, columns);
  return std::min(max_components, bound);
}

double inner_loocv_error(const LandmarkMatrix& X, const LandmarkMatrix& Y,
                         std::size_t max_components, double sigma) {
  const std::size_t n = X.row_count();
  double acc = 0.0;
  for (std::size_t held = 0; held < n; ++held) {
    LandmarkMatrix Xi, Yi;
    for (std::size_t r = 0; r < n; ++r) {
      if (r == held) continue;
      Xi.rows.push_back(X.rows[r]);
      Yi.rows.push_back(Y.rows[r]);
    }
    const std::size_t comps = fold_components(Xi.row_count(), Xi.column_count(), max_components);
    if (comps == 0) return std::numeric_limits<double>::infinity();
    const KplsrModel model = kplsr_fit(Xi, Yi, comps, sigma);
    const PointCloud predicted = kplsr_predict(model, X.rows[held]);
    const PointCloud truth = cloud_from_flat(Y.rows[held]);
    acc += pc_to_pc_error(predicted, truth, DistanceMode::kEuclidean);
  }
  return acc / static_cast<double>(n);
}

}  // namespace

ExperimentReport run_subject_baseline(const SubjectDataset& subject, BaselineMethod method,
                                      const BaselineOptions& options) {
  if (!subject.has_landmarks())
    throw DataError("subject " + subject.subject_id +
                    " has no landmarks; the two-stage baselines need them");
  ExperimentReport report;
  report.subject_id = subject.subject_id;
  report.method = method == BaselineMethod::kPlsr ? "plsr" : "kplsr";

  const FoldPlan plan = loocv_folds(subject.frame_count);
  for (const Fold& fold : plan.folds) {
    const auto train_start = Clock::now();
    LandmarkMatrix X, Y;
    for (int f : fold.train_frames) {
      X.rows.push_back(subject.landmarks[static_cast<std::size_t>(f - 1)]);
      Y.rows.push_back(flatten_centered_cloud(subject.frame(f).cloud));
    }
    const std::size_t comps =
        fold_components(X.row_count(), X.column_count(), options.max_components);
    if (comps == 0)
      throw DataError("subject " + subject.subject_id + ": too few frames for the baselines");

    FoldRecord record;
    record.test_frame = fold.test_frame;
    const std::vector<double>& test_x =
        subject.landmarks[static_cast<std::size_t>(fold.test_frame - 1)];
    const PointCloud truth = cloud_from_flat(
        flatten_centered_cloud(subject.frame(fold.test_frame).cloud));

    if (method == BaselineMethod::kPlsr) {
      const PlsrModel model = plsr_fit(X, Y, comps);
      record.train_seconds = seconds_from(train_start);
      const auto infer_start = Clock::now();
      record.predicted = plsr_predict(model, test_x);
      record.infer_seconds = seconds_from(infer_start);
    } else {
      const double scale = median_pairwise_distance(X);
      double best_sigma = 0.0;
      double best_error = std::numeric_limits<double>::infinity();
      for (double mult : options.sigma_grid) {
        const double sigma = mult * (scale > 0.0 ? scale : 1.0);
        const double err = inner_loocv_error(X, Y, options.max_components, sigma);
        if (err < best_error) {
          best_error = err;
          best_sigma = sigma;
        }
      }
      const KplsrModel model = kplsr_fit(X, Y, comps, best_sigma);
      record.train_seconds = seconds_from(train_start);
      const auto infer_start = Clock::now();
      record.predicted = kplsr_predict(model, test_x);
      record.infer_seconds = seconds_from(infer_start);
    }

    record.truth = truth;
    record.pc_to_pc_euclidean_mm =
        pc_to_pc_error(record.predicted, truth, DistanceMode::kEuclidean);
    record.pc_to_pc_squared_mm2 =
        pc_to_pc_error(record.predicted, truth, DistanceMode::kSquared);
    record.chamfer_final = chamfer_distance(record.predicted, truth);
    report.records.push_back(std::move(record));
  }
  report.subject_mean_mm = mean_euclidean_error(report.records);
  return report;
}

}  // namespace shapeinst
