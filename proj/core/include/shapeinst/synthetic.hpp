#pragma once

#include <cstdint>
#include <string>

#include "shapeinst/dataset.hpp"

namespace shapeinst {

/// Subject-level geometry of the synthetic deforming surface: an ellipsoid
/// (axes in mm) whose per-axis contraction and a localized radial bulge
/// follow one periodic cycle over the frames — contracted near mid-cycle,
/// relaxed at the ends.
struct SyntheticSubjectParams {
  Vec3 base_axes;        // relaxed semi-axes, mm
  Vec3 contraction;      // per-axis fractional contraction at mid-cycle
  double bulge_amplitude = 0.0;  // peak fractional radius change
  Vec3 bulge_direction;  // unit vector, bump center
  double bulge_width = 0.0;      // bump angular width, radians
  double noise_level = 0.0;      // image multiplicative noise
  double pixel_size_mm = 0.0;    // rendering scale, fixed per subject
};

struct SyntheticOptions {
  std::string subject_id = "synthetic";
  int frame_count = 20;          // M
  std::size_t num_vertices = 800;  // numY
  std::size_t height = 192;
  std::size_t width = 256;
  int landmark_count = 64;
};

/// Deterministic subject-level parameters for a seed.
SyntheticSubjectParams synthetic_subject_params(std::uint64_t seed,
                                                const SyntheticOptions& options);

/// Cycle phase of frame t in 1..M: 2*pi*t/(M+1). Frame t and frame M-t+1
/// have opposite phases, so any even function of the phase is
/// mirror-symmetric in time.
double cycle_phase(int frame, int frame_count);

/// Semi-axes at a frame: base * (1 - contraction * (1 - cos(phase)) / 2).
Vec3 frame_semi_axes(const SyntheticSubjectParams& params, int frame, int frame_count);

/// Signed bulge amplitude at a frame: bulge_amplitude * sin(phase).
double frame_bulge(const SyntheticSubjectParams& params, int frame, int frame_count);

/// Radial bump profile exp(-theta^2 / (2 width^2)) for a unit direction,
/// where theta is the angle to the bulge direction.
double bulge_bump(const SyntheticSubjectParams& params, const Vec3& unit_direction);

/// Generates one subject: numY correspondence-consistent surface points per
/// frame, an orthographic silhouette of the y=0 cross-section rendered at
/// height x width with soft edges and seeded noise, and arc-length
/// resampled cross-section contour landmarks. Deterministic per seed.
SubjectDataset generate_synthetic_subject(std::uint64_t seed, const SyntheticOptions& options);

}  // namespace shapeinst
