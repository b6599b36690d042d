#include "shapeinst/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "shapeinst/rng.hpp"

namespace shapeinst {

namespace {

constexpr double kTau = 2.0 * std::numbers::pi;

Vec3 normalized(const Vec3& v) {
  const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  return {v[0] / n, v[1] / n, v[2] / n};
}

void validate(const SyntheticOptions& options) {
  if (options.frame_count < 3)
    throw std::invalid_argument("generate_synthetic_subject: need at least 3 frames, got " +
                                std::to_string(options.frame_count));
  if (options.num_vertices < 100)
    throw std::invalid_argument("generate_synthetic_subject: need at least 100 vertices, got " +
                                std::to_string(options.num_vertices));
  if (options.height < 32 || options.width < 32)
    throw std::invalid_argument("generate_synthetic_subject: image extents too small");
  if (options.landmark_count < 8)
    throw std::invalid_argument("generate_synthetic_subject: need at least 8 landmarks");
}

/// Quasi-uniform unit directions (Fibonacci sphere); index i corresponds
/// across frames, which is what gives the clouds their vertex
/// correspondence.
std::vector<Vec3> fibonacci_directions(std::size_t count) {
  std::vector<Vec3> dirs(count);
  const double golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (std::size_t i = 0; i < count; ++i) {
    const double z = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(count);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double a = golden_angle * static_cast<double>(i);
    dirs[i] = {r * std::cos(a), r * std::sin(a), z};
  }
  return dirs;
}

double in_plane_radius(const SyntheticSubjectParams& params, double bulge, double angle) {
  const Vec3 u{std::cos(angle), 0.0, std::sin(angle)};
  return 1.0 + bulge * bulge_bump(params, u);
}

}  // namespace

SyntheticSubjectParams synthetic_subject_params(std::uint64_t seed,
                                                const SyntheticOptions& options) {
  std::mt19937_64 rng(derive_seed(seed, "subject-params"));
  SyntheticSubjectParams p;
  p.base_axes = {uniform_in(rng, 34.0, 58.0), uniform_in(rng, 30.0, 50.0),
                 uniform_in(rng, 38.0, 60.0)};
  p.contraction = {uniform_in(rng, 0.06, 0.14), uniform_in(rng, 0.06, 0.14),
                   uniform_in(rng, 0.06, 0.14)};
  p.bulge_amplitude = uniform_in(rng, 0.04, 0.08);
  // Keep the bump centered off the image plane's blind axis so the
  // silhouette carries most of the deformation signal.
  p.bulge_direction = normalized({uniform_in(rng, 0.4, 1.0), uniform_in(rng, -0.35, 0.35),
                                  uniform_in(rng, 0.4, 1.0)});
  p.bulge_width = uniform_in(rng, 0.55, 0.9);
  p.noise_level = uniform_in(rng, 0.01, 0.03);

  const double extent = std::max(p.base_axes[0], p.base_axes[2]) * (1.0 + p.bulge_amplitude);
  p.pixel_size_mm = 2.6 * extent / static_cast<double>(std::min(options.height, options.width));
  return p;
}

double cycle_phase(int frame, int frame_count) {
  return kTau * static_cast<double>(frame) / static_cast<double>(frame_count + 1);
}

Vec3 frame_semi_axes(const SyntheticSubjectParams& params, int frame, int frame_count) {
  const double c = std::cos(cycle_phase(frame, frame_count));
  Vec3 axes;
  for (int a = 0; a < 3; ++a)
    axes[a] = params.base_axes[a] * (1.0 - params.contraction[a] * (1.0 - c) / 2.0);
  return axes;
}

double frame_bulge(const SyntheticSubjectParams& params, int frame, int frame_count) {
  return params.bulge_amplitude * std::sin(cycle_phase(frame, frame_count));
}

double bulge_bump(const SyntheticSubjectParams& params, const Vec3& unit_direction) {
  const Vec3& b = params.bulge_direction;
  double dot = unit_direction[0] * b[0] + unit_direction[1] * b[1] + unit_direction[2] * b[2];
  dot = std::clamp(dot, -1.0, 1.0);
  const double theta = std::acos(dot);
  return std::exp(-theta * theta / (2.0 * params.bulge_width * params.bulge_width));
}

namespace {

PointCloud make_cloud(const SyntheticSubjectParams& params, const std::vector<Vec3>& dirs,
                      int frame, int frame_count) {
  const Vec3 axes = frame_semi_axes(params, frame, frame_count);
  const double bulge = frame_bulge(params, frame, frame_count);
  PointCloud cloud;
  cloud.points.reserve(dirs.size());
  for (const Vec3& d : dirs) {
    const double radius = 1.0 + bulge * bulge_bump(params, d);
    cloud.points.push_back({axes[0] * radius * d[0], axes[1] * radius * d[1],
                            axes[2] * radius * d[2]});
  }
  return cloud;
}

ImageU16 render_silhouette(const SyntheticSubjectParams& params, std::uint64_t seed, int frame,
                           int frame_count, std::size_t height, std::size_t width) {
  const Vec3 axes = frame_semi_axes(params, frame, frame_count);
  const double bulge = frame_bulge(params, frame, frame_count);
  const double px = params.pixel_size_mm;
  // Edge softness of about 1.5 pixels, expressed in normalized radius units.
  const double soft = 1.5 * px / std::min(axes[0], axes[2]);

  std::mt19937_64 noise(derive_seed(seed, "image-noise", static_cast<std::uint64_t>(frame)));
  ImageU16 image{height, width, std::vector<std::uint16_t>(height * width)};
  for (std::size_t row = 0; row < height; ++row) {
    const double z = (static_cast<double>(height - 1) / 2.0 - static_cast<double>(row)) * px;
    for (std::size_t col = 0; col < width; ++col) {
      const double x = (static_cast<double>(col) - static_cast<double>(width - 1) / 2.0) * px;
      const double ux = x / axes[0];
      const double uz = z / axes[2];
      const double rho = std::sqrt(ux * ux + uz * uz);
      double boundary;
      if (rho == 0.0) {
        boundary = 1.0;
      } else {
        boundary = in_plane_radius(params, bulge, std::atan2(uz, ux));
      }
      const double mask = std::clamp(0.5 + (boundary - rho) / soft, 0.0, 1.0);
      double value = 0.08 + 0.77 * mask;
      value *= 1.0 + params.noise_level * (2.0 * uniform01(noise) - 1.0);
      const double clamped = std::clamp(value, 0.0, 1.0);
      image.pixels[row * width + col] = static_cast<std::uint16_t>(std::lround(clamped * 60000.0));
    }
  }
  return image;
}

std::vector<double> contour_landmarks(const SyntheticSubjectParams& params, int frame,
                                      int frame_count, int landmark_count) {
  const Vec3 axes = frame_semi_axes(params, frame, frame_count);
  const double bulge = frame_bulge(params, frame, frame_count);

  constexpr int kFine = 2048;
  std::vector<double> xs(kFine + 1), zs(kFine + 1), arc(kFine + 1, 0.0);
  for (int k = 0; k <= kFine; ++k) {
    const double angle = kTau * static_cast<double>(k) / kFine;
    const double radius = in_plane_radius(params, bulge, angle);
    xs[k] = axes[0] * radius * std::cos(angle);
    zs[k] = axes[2] * radius * std::sin(angle);
    if (k > 0) arc[k] = arc[k - 1] + std::hypot(xs[k] - xs[k - 1], zs[k] - zs[k - 1]);
  }
  const double total = arc[kFine];

  std::vector<double> landmarks;
  landmarks.reserve(2 * static_cast<std::size_t>(landmark_count));
  int segment = 0;
  for (int j = 0; j < landmark_count; ++j) {
    const double target = total * static_cast<double>(j) / landmark_count;
    while (segment < kFine && arc[segment + 1] < target) ++segment;
    const double span = arc[segment + 1] - arc[segment];
    const double w = span > 0.0 ? (target - arc[segment]) / span : 0.0;
    landmarks.push_back(xs[segment] + w * (xs[segment + 1] - xs[segment]));
    landmarks.push_back(zs[segment] + w * (zs[segment + 1] - zs[segment]));
  }
  return landmarks;
}

}  // namespace

SubjectDataset generate_synthetic_subject(std::uint64_t seed, const SyntheticOptions& options) {
  validate(options);
  const SyntheticSubjectParams params = synthetic_subject_params(seed, options);
  const std::vector<Vec3> dirs = fibonacci_directions(options.num_vertices);

  SubjectDataset subject;
  subject.subject_id = options.subject_id;
  subject.frame_count = options.frame_count;
  subject.num_vertices = options.num_vertices;
  subject.height = options.height;
  subject.width = options.width;
  subject.samples.reserve(static_cast<std::size_t>(options.frame_count));
  subject.landmarks.reserve(static_cast<std::size_t>(options.frame_count));

  for (int t = 1; t <= options.frame_count; ++t) {
    Sample sample;
    sample.frame_index = t;
    sample.cloud = make_cloud(params, dirs, t, options.frame_count);
    sample.image = render_silhouette(params, seed, t, options.frame_count, options.height,
                                     options.width);
    subject.samples.push_back(std::move(sample));
    subject.landmarks.push_back(
        contour_landmarks(params, t, options.frame_count, options.landmark_count));
  }
  return subject;
}

}  // namespace shapeinst
