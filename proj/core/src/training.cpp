#include "shapeinst/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "shapeinst/adam.hpp"
#include "shapeinst/errors.hpp"
#include "shapeinst/parallel.hpp"
#include "shapeinst/rng.hpp"

namespace shapeinst {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

/// The only door to subject data during training; fetching the held-out
/// frame through it is an error, and every fetch is counted.
class AuditedAccess {
 public:
  AuditedAccess(const SubjectDataset& subject, int test_frame)
      : subject_(subject), test_frame_(test_frame) {}

  const Sample& training_sample(int frame) {
    count(frame);
    return subject_.frame(frame);
  }

  void count(int frame) {
    if (frame == test_frame_)
      throw DataError("training attempted to read held-out frame " + std::to_string(frame));
    ++reads_[frame];
  }

  const std::map<int, long>& reads() const { return reads_; }

 private:
  const SubjectDataset& subject_;
  int test_frame_;
  std::map<int, long> reads_;
};

void validate_fold(const SubjectDataset& subject, const Fold& fold) {
  if (fold.test_frame < 1 || fold.test_frame > subject.frame_count)
    throw std::invalid_argument("fold: test frame " + std::to_string(fold.test_frame) +
                                " outside 1.." + std::to_string(subject.frame_count));
  if (fold.train_frames.empty())
    throw std::invalid_argument("fold: no training frames");
  for (int f : fold.train_frames) {
    if (f < 1 || f > subject.frame_count)
      throw std::invalid_argument("fold: training frame " + std::to_string(f) + " outside 1.." +
                                  std::to_string(subject.frame_count));
    if (f == fold.test_frame)
      throw std::invalid_argument("fold: test frame " + std::to_string(f) +
                                  " also listed for training");
  }
}

void validate_net_for_subject(const SubjectDataset& subject, const NetworkConfig& config) {
  if (config.num_vertices != subject.num_vertices)
    throw std::invalid_argument("network predicts " + std::to_string(config.num_vertices) +
                                " vertices but subject has " +
                                std::to_string(subject.num_vertices));
  if (config.input_height != subject.height || config.input_width != subject.width)
    throw std::invalid_argument("network input " + std::to_string(config.input_width) + "x" +
                                std::to_string(config.input_height) +
                                " does not match subject images " +
                                std::to_string(subject.width) + "x" +
                                std::to_string(subject.height));
}

// Deterministic Fisher-Yates; std::shuffle is implementation-defined.
void shuffle_frames(std::vector<int>& frames, std::mt19937_64& rng) {
  for (std::size_t i = frames.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(frames[i - 1], frames[j]);
  }
}

Tensor step_loss(const ModelParams& params, const Tensor& prediction, const PointCloud& truth,
                 const TrainConfig& config) {
  Tensor loss = chamfer_loss(prediction, truth);
  if (config.chamfer_normalization) {
    const double n = static_cast<double>(cloud_from_tensor(prediction).size() + truth.size());
    loss = scale(loss, 1.0 / n);
  }
  const std::vector<Tensor> regs =
      config.regularize_biases ? params.tensors : params.weight_tensors();
  return loss + l2_penalty(regs, config.l2_weight);
}

}  // namespace

void validate_train_config(const TrainConfig& config) {
  if (config.epochs < 1)
    throw std::invalid_argument("TrainConfig: epochs must be >= 1, got " +
                                std::to_string(config.epochs));
  if (config.learning_rate <= 0.0)
    throw std::invalid_argument("TrainConfig: learning rate must be positive, got " +
                                std::to_string(config.learning_rate));
  if (config.batch_size != 1)
    throw std::invalid_argument("TrainConfig: batch size is fixed at 1, got " +
                                std::to_string(config.batch_size));
  if (config.l2_weight < 0.0)
    throw std::invalid_argument("TrainConfig: l2 weight must be nonnegative");
}

PreparedSample prepare_sample(const Sample& sample) {
  PreparedSample prepared;
  prepared.frame_index = sample.frame_index;
  prepared.image = image_to_tensor(normalize_image(to_gray(sample.image)));
  auto [cloud, centroid] = center_cloud(sample.cloud);
  prepared.cloud = std::move(cloud);
  prepared.centroid = centroid;
  return prepared;
}

FoldRecord train_fold(const SubjectDataset& subject, const Fold& fold,
                      const NetworkConfig& net_config, const TrainConfig& train_config,
                      const CheckpointSink& sink, ModelParams* trained) {
  validate_train_config(train_config);
  validate_fold(subject, fold);
  validate_net_for_subject(subject, net_config);

  const auto train_start = Clock::now();
  AuditedAccess access(subject, fold.test_frame);

  std::vector<PreparedSample> train_samples;
  train_samples.reserve(fold.train_frames.size());
  for (int frame : fold.train_frames)
    train_samples.push_back(prepare_sample(access.training_sample(frame)));

  ModelParams params = build(
      net_config, derive_seed(train_config.shuffle_seed, "net-init",
                              static_cast<std::uint64_t>(fold.test_frame)));
  AdamState adam(params.tensors);
  std::mt19937_64 order_rng(derive_seed(train_config.shuffle_seed, "epoch-order",
                                        static_cast<std::uint64_t>(fold.test_frame)));

  FoldRecord record;
  record.test_frame = fold.test_frame;

  // Reference loss with the untrained parameters.
  {
    double acc = 0.0;
    for (const PreparedSample& s : train_samples)
      acc += step_loss(params, forward_tensor(params, s.image), s.cloud, train_config).value();
    record.initial_epoch_loss = acc / static_cast<double>(train_samples.size());
  }

  std::vector<int> order(fold.train_frames.begin(), fold.train_frames.end());
  std::vector<std::size_t> position(static_cast<std::size_t>(subject.frame_count) + 1);
  for (std::size_t i = 0; i < train_samples.size(); ++i)
    position[static_cast<std::size_t>(train_samples[i].frame_index)] = i;

  record.epoch_mean_loss.reserve(static_cast<std::size_t>(train_config.epochs));
  for (int epoch = 1; epoch <= train_config.epochs; ++epoch) {
    shuffle_frames(order, order_rng);
    double epoch_loss = 0.0;
    for (int frame : order) {
      access.count(frame);
      const PreparedSample& s = train_samples[position[static_cast<std::size_t>(frame)]];
      Tensor loss = step_loss(params, forward_tensor(params, s.image), s.cloud, train_config);
      const double value = loss.value();
      if (!std::isfinite(value))
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", frame " +
                           std::to_string(frame));
      loss.backward();
      adam_step(params.tensors, adam, train_config.learning_rate);
      params.zero_grads();
      epoch_loss += value;
    }
    record.epoch_mean_loss.push_back(epoch_loss / static_cast<double>(order.size()));
    if (sink && train_config.checkpoint_every > 0 &&
        (epoch % train_config.checkpoint_every == 0 || epoch == train_config.epochs))
      sink(epoch, params);
  }
  record.train_seconds = seconds_since(train_start);
  record.training_image_reads = access.reads();
  record.test_frame_training_reads =
      access.reads().count(fold.test_frame) ? access.reads().at(fold.test_frame) : 0;

  PreparedSample test_sample = prepare_sample(subject.frame(fold.test_frame));
  const EvalResult eval = evaluate(params, test_sample);
  record.pc_to_pc_euclidean_mm = eval.pc_to_pc_euclidean_mm;
  record.pc_to_pc_squared_mm2 = eval.pc_to_pc_squared_mm2;
  record.chamfer_final = eval.chamfer;
  record.infer_seconds = eval.infer_seconds;
  record.predicted = eval.predicted;
  record.truth = std::move(test_sample.cloud);

  if (trained) *trained = std::move(params);
  return record;
}

EvalResult evaluate(const ModelParams& params, const PreparedSample& sample) {
  EvalResult result;
  const auto start = Clock::now();
  result.predicted = forward(params, sample.image);
  result.infer_seconds = seconds_since(start);
  result.pc_to_pc_euclidean_mm =
      pc_to_pc_error(result.predicted, sample.cloud, DistanceMode::kEuclidean);
  result.pc_to_pc_squared_mm2 =
      pc_to_pc_error(result.predicted, sample.cloud, DistanceMode::kSquared);
  result.chamfer = chamfer_distance(result.predicted, sample.cloud);
  return result;
}

ExperimentReport run_subject(const SubjectDataset& subject, const NetworkConfig& net_config,
                             const TrainConfig& train_config, std::size_t jobs) {
  if (subject.frame_count < 2)
    throw std::invalid_argument("run_subject: need at least 2 frames for leave-one-out");
  ExperimentReport report;
  report.subject_id = subject.subject_id;
  report.method = "pointoutnet";
  const FoldPlan plan = loocv_folds(subject.frame_count);
  report.records.resize(plan.folds.size());
  parallel_for(jobs, plan.folds.size(), [&](std::size_t i) {
    const Fold& fold = plan.folds[i];
    try {
      report.records[i] = train_fold(subject, fold, net_config, train_config);
    } catch (const NumericError& e) {
      throw NumericError("subject " + subject.subject_id + ", fold with test frame " +
                         std::to_string(fold.test_frame) + ": " + e.what());
    }
  });
  report.subject_mean_mm = mean_euclidean_error(report.records);
  return report;
}

}  // namespace shapeinst
