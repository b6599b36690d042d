#include "shapeinst/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "shapeinst/errors.hpp"
#include "shapeinst/ply.hpp"

namespace shapeinst {

using nlohmann::json;

GrayImage to_gray(const ImageU16& image) {
  GrayImage gray{image.height, image.width, {}};
  gray.pixels.reserve(image.pixels.size());
  for (std::uint16_t p : image.pixels) gray.pixels.push_back(static_cast<double>(p));
  return gray;
}

GrayImage normalize_image(const GrayImage& image) {
  double max = 0.0;
  for (double p : image.pixels) max = std::max(max, p);
  if (max == 0.0) throw DataError("normalize_image: all-zero image");
  GrayImage out{image.height, image.width, {}};
  out.pixels.reserve(image.pixels.size());
  for (double p : image.pixels) out.pixels.push_back(p / max);
  return out;
}

Tensor image_to_tensor(const GrayImage& image) {
  return Tensor::from_data(Shape{1, image.height, image.width, 1}, image.pixels);
}

std::pair<PointCloud, Vec3> center_cloud(const PointCloud& cloud) {
  const Vec3 c = cloud_centroid(cloud);
  PointCloud centered;
  centered.points.reserve(cloud.size());
  for (const Vec3& p : cloud.points)
    centered.points.push_back({p[0] - c[0], p[1] - c[1], p[2] - c[2]});
  return {std::move(centered), c};
}

const Sample& SubjectDataset::frame(int index) const {
  if (index < 1 || index > frame_count)
    throw std::invalid_argument("SubjectDataset::frame: index " + std::to_string(index) +
                                " outside 1.." + std::to_string(frame_count));
  return samples[static_cast<std::size_t>(index - 1)];
}

FoldPlan loocv_folds(int frame_count) {
  if (frame_count < 2)
    throw std::invalid_argument("loocv_folds: need at least 2 frames, got " +
                                std::to_string(frame_count));
  FoldPlan plan;
  plan.folds.reserve(static_cast<std::size_t>(frame_count));
  for (int test = 1; test <= frame_count; ++test) {
    Fold fold;
    fold.test_frame = test;
    for (int f = 1; f <= frame_count; ++f)
      if (f != test) fold.train_frames.push_back(f);
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

namespace {

std::string frame_stem(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%03d", index);
  return buf;
}

void write_landmarks_csv(const std::filesystem::path& path,
                         const std::vector<std::vector<double>>& landmarks) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  for (std::size_t i = 0; i < landmarks.size(); ++i) {
    out << (i + 1);
    char buf[32];
    for (double v : landmarks[i]) {
      std::snprintf(buf, sizeof(buf), ",%.17g", v);
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path.string());
}

std::vector<std::vector<double>> read_landmarks_csv(const std::filesystem::path& path,
                                                    int frame_count) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open landmarks file: " + path.string());
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(frame_count));
  std::string line;
  int seen = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string cell;
    if (!std::getline(fields, cell, ',')) continue;
    const int index = std::stoi(cell);
    if (index < 1 || index > frame_count)
      throw DataError("landmark row for frame " + std::to_string(index) +
                      " outside 1.." + std::to_string(frame_count) + ": " + path.string());
    std::vector<double> values;
    while (std::getline(fields, cell, ',')) values.push_back(std::stod(cell));
    rows[static_cast<std::size_t>(index - 1)] = std::move(values);
    ++seen;
  }
  if (seen != frame_count)
    throw DataError("landmarks file has " + std::to_string(seen) + " rows, expected " +
                    std::to_string(frame_count) + ": " + path.string());
  return rows;
}

}  // namespace

void save_subject(const SubjectDataset& subject, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json frames = json::array();
  for (const Sample& sample : subject.samples) {
    const std::string stem = frame_stem(sample.frame_index);
    write_pgm(dir / (stem + ".pgm"), sample.image);
    write_ply(dir / (stem + ".ply"), sample.cloud);
    frames.push_back({{"index", sample.frame_index},
                      {"image", stem + ".pgm"},
                      {"cloud", stem + ".ply"}});
  }
  json manifest = {{"subjectId", subject.subject_id},
                   {"M", subject.frame_count},
                   {"numY", subject.num_vertices},
                   {"height", subject.height},
                   {"width", subject.width},
                   {"frames", frames}};
  if (subject.has_landmarks()) {
    write_landmarks_csv(dir / "landmarks.csv", subject.landmarks);
    manifest["landmarks"] = "landmarks.csv";
  }
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
  if (!out) throw DataError("write failed: " + (dir / "manifest.json").string());
}

SubjectDataset load_subject(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError("cannot open manifest: " + manifest_path.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::parse_error& e) {
    throw DataError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }

  SubjectDataset subject;
  try {
    subject.subject_id = manifest.at("subjectId").get<std::string>();
    subject.frame_count = manifest.at("M").get<int>();
    subject.num_vertices = manifest.at("numY").get<std::size_t>();
    subject.height = manifest.at("height").get<std::size_t>();
    subject.width = manifest.at("width").get<std::size_t>();
  } catch (const json::exception& e) {
    throw DataError("manifest missing required fields (" + std::string(e.what()) + "): " +
                    manifest_path.string());
  }
  if (subject.frame_count < 1)
    throw DataError("manifest declares no frames: " + manifest_path.string());

  const std::filesystem::path dir = manifest_path.parent_path();
  subject.samples.resize(static_cast<std::size_t>(subject.frame_count));
  std::vector<bool> seen(static_cast<std::size_t>(subject.frame_count), false);

  for (const json& entry : manifest.at("frames")) {
    const int index = entry.at("index").get<int>();
    if (index < 1 || index > subject.frame_count)
      throw DataError("frame index " + std::to_string(index) + " outside 1.." +
                      std::to_string(subject.frame_count) + ": " + manifest_path.string());
    if (seen[static_cast<std::size_t>(index - 1)])
      throw DataError("duplicate frame " + std::to_string(index) + ": " +
                      manifest_path.string());
    seen[static_cast<std::size_t>(index - 1)] = true;

    Sample sample;
    sample.frame_index = index;
    const auto image_path = dir / entry.at("image").get<std::string>();
    const auto cloud_path = dir / entry.at("cloud").get<std::string>();
    if (!std::filesystem::exists(image_path))
      throw DataError("frame " + std::to_string(index) + ": missing image file " +
                      image_path.string());
    if (!std::filesystem::exists(cloud_path))
      throw DataError("frame " + std::to_string(index) + ": missing cloud file " +
                      cloud_path.string());
    sample.image = read_pgm(image_path);
    sample.cloud = read_ply(cloud_path);
    if (sample.image.height != subject.height || sample.image.width != subject.width)
      throw DataError("frame " + std::to_string(index) + ": image is " +
                      std::to_string(sample.image.width) + "x" +
                      std::to_string(sample.image.height) + " but manifest declares " +
                      std::to_string(subject.width) + "x" + std::to_string(subject.height));
    if (sample.cloud.size() != subject.num_vertices)
      throw DataError("frame " + std::to_string(index) + ": cloud has " +
                      std::to_string(sample.cloud.size()) + " vertices but manifest declares " +
                      std::to_string(subject.num_vertices));
    subject.samples[static_cast<std::size_t>(index - 1)] = std::move(sample);
  }
  for (int f = 1; f <= subject.frame_count; ++f)
    if (!seen[static_cast<std::size_t>(f - 1)])
      throw DataError("frame " + std::to_string(f) + " missing from manifest: " +
                      manifest_path.string());

  if (manifest.contains("landmarks"))
    subject.landmarks = read_landmarks_csv(dir / manifest.at("landmarks").get<std::string>(),
                                           subject.frame_count);
  return subject;
}

}  // namespace shapeinst
