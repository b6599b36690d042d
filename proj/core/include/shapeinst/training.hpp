#pragma once

#include <cstdint>
#include <functional>

#include "shapeinst/dataset.hpp"
#include "shapeinst/pointoutnet.hpp"
#include "shapeinst/report.hpp"

namespace shapeinst {

struct TrainConfig {
  int epochs = 1500;
  double learning_rate = 0.003;
  int batch_size = 1;  // the protocol is single-sample steps
  std::uint64_t shuffle_seed = 0;
  double l2_weight = 1e-5;
  bool chamfer_normalization = false;  // divide the loss by the point count sum
  int checkpoint_every = 100;
  bool regularize_biases = false;
};

void validate_train_config(const TrainConfig& config);

/// Image tensor plus centered cloud, ready for the network.
struct PreparedSample {
  int frame_index = 0;
  Tensor image;          // [1,H,W,1], normalized to [0,1]
  PointCloud cloud;      // centered at the origin
  Vec3 centroid{};       // restores the original cloud
};

PreparedSample prepare_sample(const Sample& sample);

/// Called after every checkpoint_every epochs and after the last one.
using CheckpointSink = std::function<void(int epoch, const ModelParams& params)>;

/// Trains one leave-one-out fold: epochs passes over the training frames in
/// a fresh seeded order per epoch, each step minimizing Chamfer loss plus
/// the L2 penalty with Adam. The test frame is fetched through an audited
/// path that rejects reads during training. Aborts with NumericError (epoch
/// and frame named) if the loss turns non-finite.
FoldRecord train_fold(const SubjectDataset& subject, const Fold& fold,
                      const NetworkConfig& net_config, const TrainConfig& train_config,
                      const CheckpointSink& sink = nullptr, ModelParams* trained = nullptr);

struct EvalResult {
  double pc_to_pc_euclidean_mm = 0.0;
  double pc_to_pc_squared_mm2 = 0.0;
  double chamfer = 0.0;
  double infer_seconds = 0.0;
  PointCloud predicted;
};

/// Runs the network on one prepared sample and measures the metrics and the
/// wall-clock inference time.
EvalResult evaluate(const ModelParams& params, const PreparedSample& sample);

/// Full leave-one-out sweep over a subject. Folds are independent (one
/// model per fold) and may run on up to `jobs` threads; per-fold seeds are
/// derived from the fold identity, so the result does not depend on jobs.
ExperimentReport run_subject(const SubjectDataset& subject, const NetworkConfig& net_config,
                             const TrainConfig& train_config, std::size_t jobs = 1);

}  // namespace shapeinst
