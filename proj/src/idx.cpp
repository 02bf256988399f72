#include "rllc/tasks.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace rllc {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_u32_be(const std::vector<unsigned char>& buf, std::size_t offset,
                          const std::string& path) {
  if (offset + 4 > buf.size()) {
    throw IdxError(path + ": truncated at offset " + std::to_string(offset));
  }
  return (std::uint32_t(buf[offset]) << 24) | (std::uint32_t(buf[offset + 1]) << 16) |
         (std::uint32_t(buf[offset + 2]) << 8) | std::uint32_t(buf[offset + 3]);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 std::optional<int> limit, double mean, double stddev) {
  if (stddev <= 0.0) throw std::invalid_argument("load_idx: stddev must be positive");

  const auto images = read_file(images_path);
  const auto labels = read_file(labels_path);

  const std::uint32_t image_magic = read_u32_be(images, 0, images_path);
  if (image_magic != kImagesMagic) {
    throw IdxError(images_path + ": bad magic at offset 0 (expected 0x00000803)");
  }
  const std::uint32_t label_magic = read_u32_be(labels, 0, labels_path);
  if (label_magic != kLabelsMagic) {
    throw IdxError(labels_path + ": bad magic at offset 0 (expected 0x00000801)");
  }

  const std::uint32_t image_count = read_u32_be(images, 4, images_path);
  const std::uint32_t rows = read_u32_be(images, 8, images_path);
  const std::uint32_t cols = read_u32_be(images, 12, images_path);
  const std::uint32_t label_count = read_u32_be(labels, 4, labels_path);
  if (image_count != label_count) {
    throw IdxError("image count " + std::to_string(image_count) + " does not match label count " +
                   std::to_string(label_count));
  }
  const std::size_t pixels = std::size_t(rows) * cols;
  if (images.size() < 16 + std::size_t(image_count) * pixels) {
    throw IdxError(images_path + ": truncated image data");
  }
  if (labels.size() < 8 + label_count) {
    throw IdxError(labels_path + ": truncated label data");
  }

  int take = static_cast<int>(image_count);
  if (limit && *limit >= 0) take = std::min(take, *limit);

  Dataset data;
  data.features.resize(take, pixels);
  data.labels.resize(take);
  for (int i = 0; i < take; ++i) {
    const unsigned char* px = images.data() + 16 + std::size_t(i) * pixels;
    for (std::size_t j = 0; j < pixels; ++j) {
      data.features(i, j) = (px[j] / 255.0 - mean) / stddev;
    }
    data.labels[i] = labels[8 + i];
  }
  data.train_count = take;
  data.feature_mean = mean;
  data.feature_std = stddev;
  return data;
}

namespace {

constexpr char kDatasetMagic[4] = {'R', 'L', 'D', 'S'};

template <typename T>
void write_pod(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw IdxError(path + ": truncated dataset file");
  return value;
}

}  // namespace

void Dataset::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IdxError("cannot write " + path);
  out.write(kDatasetMagic, 4);
  write_pod(out, std::int64_t(sample_count()));
  write_pod(out, std::int64_t(feature_dim()));
  write_pod(out, std::int64_t(train_count));
  write_pod(out, std::int64_t(val_count));
  write_pod(out, std::int64_t(test_count));
  write_pod(out, feature_mean);
  write_pod(out, feature_std);
  for (int label : labels) write_pod(out, std::int32_t(label));
  out.write(reinterpret_cast<const char*>(features.data()),
            static_cast<std::streamsize>(sizeof(double) * features.size()));
  if (!out) throw IdxError("short write to " + path);
}

Dataset Dataset::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxError("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kDatasetMagic, 4) != 0) {
    throw IdxError(path + ": bad magic at offset 0 (expected RLDS)");
  }
  Dataset data;
  const auto samples = read_pod<std::int64_t>(in, path);
  const auto dims = read_pod<std::int64_t>(in, path);
  data.train_count = static_cast<int>(read_pod<std::int64_t>(in, path));
  data.val_count = static_cast<int>(read_pod<std::int64_t>(in, path));
  data.test_count = static_cast<int>(read_pod<std::int64_t>(in, path));
  data.feature_mean = read_pod<double>(in, path);
  data.feature_std = read_pod<double>(in, path);
  if (samples < 0 || dims < 0 ||
      data.train_count + data.val_count + data.test_count != samples) {
    throw IdxError(path + ": inconsistent split counts");
  }
  data.labels.resize(samples);
  for (auto& label : data.labels) label = read_pod<std::int32_t>(in, path);
  data.features.resize(samples, dims);
  in.read(reinterpret_cast<char*>(data.features.data()),
          static_cast<std::streamsize>(sizeof(double) * samples * dims));
  if (!in) throw IdxError(path + ": truncated feature data");
  return data;
}

}  // namespace rllc
