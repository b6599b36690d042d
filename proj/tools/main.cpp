#include <chrono>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "shapeinst/baselines.hpp"
#include "shapeinst/dataset.hpp"
#include "shapeinst/errors.hpp"
#include "shapeinst/parallel.hpp"
#include "shapeinst/pgm.hpp"
#include "shapeinst/ply.hpp"
#include "shapeinst/pointoutnet.hpp"
#include "shapeinst/rng.hpp"
#include "shapeinst/synthetic.hpp"
#include "shapeinst/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace shapeinst;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// One manifest per run: command, settings, paths, version, wall-clock span.
struct RunManifest {
  json body;
  fs::path file;
  explicit RunManifest(const std::string& command, const fs::path& file) : file(file) {
    body["command"] = command;
    body["toolVersion"] = SHAPEINST_VERSION;
    body["startedAt"] = iso_timestamp();
  }
  void finish() {
    body["endedAt"] = iso_timestamp();
    fs::create_directories(file.parent_path().empty() ? "." : file.parent_path());
    std::ofstream out(file, std::ios::trunc);
    if (!out) throw DataError("cannot write run manifest: " + file.string());
    out << body.dump(2) << '\n';
  }
};

void require_fresh_directory(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_directory(dir))
    throw DataError(dir.string() + " exists and is not a directory");
  if (fs::exists(dir) && !fs::is_empty(dir) && !force)
    throw DataError("output directory " + dir.string() +
                    " is not empty (pass --force to reuse it)");
  fs::create_directories(dir);
}

std::vector<std::string> discover_subjects(const fs::path& data_dir) {
  if (!fs::is_directory(data_dir))
    throw DataError("dataset directory not found: " + data_dir.string());
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(data_dir))
    if (entry.is_directory() && fs::exists(entry.path() / "manifest.json"))
      names.push_back(entry.path().filename().string());
  std::sort(names.begin(), names.end());
  return names;
}

SubjectDataset load_named_subject(const fs::path& data_dir, const std::string& subject_id) {
  const fs::path manifest = data_dir / subject_id / "manifest.json";
  if (!fs::exists(manifest)) {
    std::string available;
    for (const std::string& name : discover_subjects(data_dir)) {
      if (!available.empty()) available += ", ";
      available += name;
    }
    throw DataError("subject '" + subject_id + "' not found in " + data_dir.string() +
                    (available.empty() ? " (no subjects present)"
                                       : "; available subjects: " + available));
  }
  return load_subject(manifest);
}

// --- synth ---------------------------------------------------------------

struct SynthFlags {
  std::string out;
  std::uint64_t seed = 1;
  int subjects = 12;
  int frames = 20;
  std::size_t numy = 800;
  std::size_t height = 192;
  std::size_t width = 256;
  int landmarks = 64;
  bool quick = false;
  bool force = false;
};

int cmd_synth(const SynthFlags& flags, bool frames_set, bool numy_set) {
  SynthFlags f = flags;
  if (f.quick) {  // CI-speed profile; explicit flags still win
    if (!frames_set) f.frames = 5;
    if (!numy_set) f.numy = 100;
  }
  if (f.subjects < 1) throw std::invalid_argument("--subjects must be positive");

  require_fresh_directory(f.out, f.force);
  RunManifest manifest("synth", fs::path(f.out) / "run_manifest.json");
  manifest.body["seed"] = f.seed;
  manifest.body["flags"] = {{"subjects", f.subjects}, {"frames", f.frames},
                            {"numY", f.numy},         {"height", f.height},
                            {"width", f.width},       {"landmarks", f.landmarks},
                            {"quick", f.quick}};
  manifest.body["outputs"] = json::array();

  for (int s = 0; s < f.subjects; ++s) {
    char name[32];
    std::snprintf(name, sizeof(name), "subject_%02d", s);
    SyntheticOptions options;
    options.subject_id = name;
    options.frame_count = f.frames;
    options.num_vertices = f.numy;
    options.height = f.height;
    options.width = f.width;
    options.landmark_count = f.landmarks;
    const SubjectDataset subject =
        generate_synthetic_subject(derive_seed(f.seed, "cohort-subject",
                                               static_cast<std::uint64_t>(s)),
                                   options);
    save_subject(subject, fs::path(f.out) / name);
    manifest.body["outputs"].push_back(name);
  }
  manifest.finish();
  std::cout << "wrote " << f.subjects << " subjects to " << f.out << '\n';
  return kOk;
}

// --- train ---------------------------------------------------------------

struct TrainFlags {
  std::string data;
  std::string subject;
  std::string out;
  int epochs = 1500;
  double lr = 0.003;
  std::uint64_t seed = 0;
  double l2 = 1e-5;
  int checkpoint_every = 100;
  bool chamfer_normalization = false;
  std::size_t base_channels = 16;
  int downsamples = 6;
  std::size_t fc1 = 2048;
  std::size_t fc2 = 1024;
  std::size_t kernel = 3;
  std::size_t jobs = 1;
  bool quick = false;
  bool force = false;
};

void apply_quick_train_profile(TrainFlags& f, const CLI::App* cmd) {
  if (!f.quick) return;
  if (!cmd->count("--epochs")) f.epochs = 20;
  if (!cmd->count("--lr")) f.lr = 0.05;
  if (!cmd->count("--base-channels")) f.base_channels = 2;
  if (!cmd->count("--fc1")) f.fc1 = 64;
  if (!cmd->count("--fc2")) f.fc2 = 32;
}

NetworkConfig network_config_for(const TrainFlags& f, const SubjectDataset& subject) {
  NetworkConfig config;
  config.input_height = subject.height;
  config.input_width = subject.width;
  config.base_channels = f.base_channels;
  config.num_downsamples = f.downsamples;
  config.kernel_size = f.kernel;
  config.num_vertices = subject.num_vertices;
  config.l2_weight = f.l2;
  config.fc_widths = {f.fc1, f.fc2};
  validate_config(config);
  return config;
}

TrainConfig train_config_for(const TrainFlags& f) {
  TrainConfig config;
  config.epochs = f.epochs;
  config.learning_rate = f.lr;
  config.shuffle_seed = f.seed;
  config.l2_weight = f.l2;
  config.chamfer_normalization = f.chamfer_normalization;
  config.checkpoint_every = f.checkpoint_every;
  validate_train_config(config);
  return config;
}

json train_flags_json(const TrainFlags& f) {
  return {{"epochs", f.epochs},
          {"lr", f.lr},
          {"l2", f.l2},
          {"checkpointEvery", f.checkpoint_every},
          {"chamferNormalization", f.chamfer_normalization},
          {"baseChannels", f.base_channels},
          {"downsamples", f.downsamples},
          {"fcWidths", {f.fc1, f.fc2}},
          {"kernel", f.kernel},
          {"jobs", f.jobs},
          {"quick", f.quick}};
}

/// Leave-one-out sweep with per-fold checkpoints; returns the report.
ExperimentReport train_subject_with_checkpoints(const SubjectDataset& subject,
                                                const NetworkConfig& net_config,
                                                const TrainConfig& train_config,
                                                std::size_t jobs, const fs::path& subject_dir) {
  const FoldPlan plan = loocv_folds(subject.frame_count);
  ExperimentReport report;
  report.subject_id = subject.subject_id;
  report.method = "pointoutnet";
  report.records.resize(plan.folds.size());

  parallel_for(jobs, plan.folds.size(), [&](std::size_t i) {
    const Fold& fold = plan.folds[i];
    char fold_name[32];
    std::snprintf(fold_name, sizeof(fold_name), "fold_%03d", fold.test_frame);
    const fs::path fold_dir = subject_dir / fold_name;
    fs::create_directories(fold_dir);
    CheckpointSink sink = [&fold_dir](int epoch, const ModelParams& params) {
      (void)epoch;
      save_checkpoint(params, fold_dir / "checkpoint_latest");
    };
    ModelParams trained;
    report.records[i] = train_fold(subject, fold, net_config, train_config, sink, &trained);
    save_checkpoint(trained, fold_dir / "final");
  });
  report.subject_mean_mm = mean_euclidean_error(report.records);
  return report;
}

int cmd_train(const TrainFlags& flags) {
  const TrainConfig train_config = train_config_for(flags);

  const SubjectDataset subject = load_named_subject(flags.data, flags.subject);
  const NetworkConfig net_config = network_config_for(flags, subject);

  require_fresh_directory(flags.out, flags.force);
  RunManifest manifest("train", fs::path(flags.out) / "run_manifest.json");
  manifest.body["seed"] = flags.seed;
  manifest.body["flags"] = train_flags_json(flags);
  manifest.body["inputs"] = {{"data", flags.data}, {"subject", flags.subject}};

  const fs::path subject_dir = fs::path(flags.out) / flags.subject;
  const ExperimentReport report = train_subject_with_checkpoints(
      subject, net_config, train_config, flags.jobs, subject_dir);
  export_report(report, subject_dir);

  manifest.body["outputs"] = {{"report", (subject_dir / "report.csv").string()}};
  manifest.body["subjectMeanMm"] = report.subject_mean_mm;
  manifest.finish();
  std::cout << "subject " << subject.subject_id << ": mean PC-to-PC error "
            << report.subject_mean_mm << " mm over " << report.records.size() << " folds\n";
  return kOk;
}

// --- compare ---------------------------------------------------------------

struct CompareFlags {
  std::string data;
  std::string out;
  std::vector<std::string> methods = {"pointoutnet", "plsr", "kplsr"};
  TrainFlags train;  // settings for the pointoutnet method
  bool force = false;
};

int cmd_compare(const CompareFlags& flags) {
  for (const std::string& m : flags.methods)
    if (m != "pointoutnet" && m != "plsr" && m != "kplsr")
      throw std::invalid_argument("unknown method '" + m +
                                  "' (expected pointoutnet, plsr, kplsr)");
  const TrainConfig train_config = train_config_for(flags.train);

  const std::vector<std::string> subjects = discover_subjects(flags.data);
  if (subjects.empty()) throw DataError("no subjects found in " + flags.data);

  require_fresh_directory(flags.out, flags.force);
  RunManifest manifest("compare", fs::path(flags.out) / "run_manifest.json");
  manifest.body["seed"] = flags.train.seed;
  manifest.body["flags"] = train_flags_json(flags.train);
  manifest.body["flags"]["methods"] = flags.methods;
  manifest.body["inputs"] = {{"data", flags.data}};

  // subject x method grid of mean errors
  std::vector<std::vector<double>> grid(subjects.size(),
                                        std::vector<double>(flags.methods.size(), 0.0));

  for (std::size_t si = 0; si < subjects.size(); ++si) {
    const SubjectDataset subject = load_named_subject(flags.data, subjects[si]);
    for (std::size_t mi = 0; mi < flags.methods.size(); ++mi) {
      const std::string& method = flags.methods[mi];
      ExperimentReport report;
      if (method == "pointoutnet") {
        const NetworkConfig net_config = network_config_for(flags.train, subject);
        report = run_subject(subject, net_config, train_config, flags.train.jobs);
      } else {
        report = run_subject_baseline(
            subject, method == "plsr" ? BaselineMethod::kPlsr : BaselineMethod::kKplsr);
      }
      export_report(report, fs::path(flags.out) / subjects[si] / method);
      grid[si][mi] = report.subject_mean_mm;
    }
  }

  const fs::path table_path = fs::path(flags.out) / "compare.csv";
  std::ofstream table(table_path, std::ios::trunc);
  if (!table) throw DataError("cannot write " + table_path.string());
  table << "subject";
  for (const std::string& m : flags.methods) table << ',' << m;
  table << '\n';
  for (std::size_t si = 0; si < subjects.size(); ++si) {
    table << subjects[si];
    char buf[32];
    for (std::size_t mi = 0; mi < flags.methods.size(); ++mi) {
      std::snprintf(buf, sizeof(buf), ",%.17g", grid[si][mi]);
      table << buf;
    }
    table << '\n';
  }
  table.close();

  manifest.body["outputs"] = {{"table", table_path.string()}};
  manifest.finish();
  std::cout << "wrote " << table_path.string() << " for " << subjects.size() << " subjects x "
            << flags.methods.size() << " methods\n";
  return kOk;
}

// --- infer ---------------------------------------------------------------

struct InferFlags {
  std::string checkpoint;
  std::string image;
  std::string out;
};

int cmd_infer(const InferFlags& flags) {
  std::string stem = flags.checkpoint;
  for (const char* suffix : {".params", ".json"}) {
    if (stem.size() > std::strlen(suffix) &&
        stem.compare(stem.size() - std::strlen(suffix), std::string::npos, suffix) == 0)
      stem.resize(stem.size() - std::strlen(suffix));
  }
  const ModelParams params = load_checkpoint(stem);
  const ImageU16 raw = read_pgm(flags.image);
  if (raw.height != params.config.input_height || raw.width != params.config.input_width)
    throw DataError("image " + flags.image + " is " + std::to_string(raw.height) + "x" +
                    std::to_string(raw.width) + " but the checkpoint expects " +
                    std::to_string(params.config.input_height) + "x" +
                    std::to_string(params.config.input_width) + " (height x width)");

  RunManifest manifest("infer", flags.out + ".manifest.json");
  manifest.body["inputs"] = {{"checkpoint", stem}, {"image", flags.image}};

  const Tensor input = image_to_tensor(normalize_image(to_gray(raw)));
  const auto start = std::chrono::steady_clock::now();
  const PointCloud predicted = forward(params, input);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_ply(flags.out, predicted);

  manifest.body["outputs"] = {{"cloud", flags.out}};
  manifest.body["inferSeconds"] = seconds;
  manifest.finish();
  std::printf("predicted %zu vertices in %.4f s -> %s\n", predicted.size(), seconds,
              flags.out.c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"image-to-point-cloud shape instantiation pipeline"};
  app.require_subcommand(1);

  SynthFlags synth;
  CLI::App* synth_cmd = app.add_subcommand(
      "synth", "generate a synthetic dynamic-shape dataset (PGM images + PLY clouds)");
  synth_cmd->add_option("--out", synth.out, "output dataset directory")->required();
  synth_cmd->add_option("--seed", synth.seed, "master seed");
  synth_cmd->add_option("--subjects", synth.subjects, "number of subjects");
  synth_cmd->add_option("--frames", synth.frames, "time frames per subject (M)");
  synth_cmd->add_option("--numy", synth.numy, "vertices per cloud (numY)");
  synth_cmd->add_option("--height", synth.height, "image height in pixels");
  synth_cmd->add_option("--width", synth.width, "image width in pixels");
  synth_cmd->add_option("--landmarks", synth.landmarks, "contour landmarks per frame");
  synth_cmd->add_flag("--quick", synth.quick, "CI-speed profile (M=5, numY=100)");
  synth_cmd->add_flag("--force", synth.force, "allow a non-empty output directory");

  TrainFlags train;
  CLI::App* train_cmd = app.add_subcommand(
      "train", "leave-one-out training of the point-cloud prediction network for one subject");
  train_cmd->add_option("--data", train.data, "dataset directory")->required();
  train_cmd->add_option("--subject", train.subject, "subject id")->required();
  train_cmd->add_option("--out", train.out, "output directory")->required();
  train_cmd->add_option("--epochs", train.epochs, "training epochs per fold");
  train_cmd->add_option("--lr", train.lr, "Adam learning rate");
  train_cmd->add_option("--seed", train.seed, "shuffle/init seed");
  train_cmd->add_option("--l2", train.l2, "L2 regularization weight");
  train_cmd->add_option("--checkpoint-every", train.checkpoint_every,
                        "checkpoint period in epochs");
  train_cmd->add_flag("--chamfer-normalization", train.chamfer_normalization,
                      "divide the loss by the total point count");
  train_cmd->add_option("--base-channels", train.base_channels, "stem channel count");
  train_cmd->add_option("--downsamples", train.downsamples, "stride-2 stage count");
  train_cmd->add_option("--fc1", train.fc1, "first fully-connected width");
  train_cmd->add_option("--fc2", train.fc2, "second fully-connected width");
  train_cmd->add_option("--kernel", train.kernel, "convolution kernel size");
  train_cmd->add_option("--jobs", train.jobs, "parallel folds");
  train_cmd->add_flag("--quick", train.quick, "CI-speed profile (20 epochs, thin network)");
  train_cmd->add_flag("--force", train.force, "allow a non-empty output directory");

  CompareFlags compare;
  CLI::App* compare_cmd = app.add_subcommand(
      "compare", "run the network and the PLSR/KPLSR baselines over every subject");
  compare_cmd->add_option("--data", compare.data, "dataset directory")->required();
  compare_cmd->add_option("--out", compare.out, "output directory")->required();
  compare_cmd->add_option("--methods", compare.methods,
                          "methods to run (pointoutnet, plsr, kplsr)")
      ->delimiter(',');
  compare_cmd->add_option("--epochs", compare.train.epochs, "training epochs per fold");
  compare_cmd->add_option("--lr", compare.train.lr, "Adam learning rate");
  compare_cmd->add_option("--seed", compare.train.seed, "shuffle/init seed");
  compare_cmd->add_option("--l2", compare.train.l2, "L2 regularization weight");
  compare_cmd->add_option("--base-channels", compare.train.base_channels, "stem channel count");
  compare_cmd->add_option("--downsamples", compare.train.downsamples, "stride-2 stage count");
  compare_cmd->add_option("--fc1", compare.train.fc1, "first fully-connected width");
  compare_cmd->add_option("--fc2", compare.train.fc2, "second fully-connected width");
  compare_cmd->add_option("--kernel", compare.train.kernel, "convolution kernel size");
  compare_cmd->add_option("--jobs", compare.train.jobs, "parallel folds");
  compare_cmd->add_flag("--quick", compare.train.quick,
                        "CI-speed profile (20 epochs, thin network)");
  compare_cmd->add_flag("--force", compare.force, "allow a non-empty output directory");

  InferFlags infer;
  CLI::App* infer_cmd =
      app.add_subcommand("infer", "predict a point cloud from a single image");
  infer_cmd->add_option("--checkpoint", infer.checkpoint, "checkpoint stem or .params file")
      ->required();
  infer_cmd->add_option("--image", infer.image, "input PGM image")->required();
  infer_cmd->add_option("--out", infer.out, "output PLY path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (synth_cmd->parsed())
      return cmd_synth(synth, synth_cmd->count("--frames") > 0, synth_cmd->count("--numy") > 0);
    if (train_cmd->parsed()) {
      apply_quick_train_profile(train, train_cmd);
      return cmd_train(train);
    }
    if (compare_cmd->parsed()) {
      apply_quick_train_profile(compare.train, compare_cmd);
      return cmd_compare(compare);
    }
    if (infer_cmd->parsed()) return cmd_infer(infer);
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid arguments: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}
