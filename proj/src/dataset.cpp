#include "catgeo/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

namespace catgeo {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;
constexpr std::size_t kCifarRecord = 3073;

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path, 0);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path, 0);
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t at, const std::string& path) {
  if (b.size() < at + 4) throw FormatError(path + ": truncated header", b.size());
  return (std::uint32_t(b[at]) << 24) | (std::uint32_t(b[at + 1]) << 16) | (std::uint32_t(b[at + 2]) << 8) |
         std::uint32_t(b[at + 3]);
}

void put_be32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back(std::uint8_t(v >> s));
}

std::uint8_t quantize(double v) {
  if (!(v >= 0.0 && v <= 1.0)) throw FormatError("pixel value outside [0, 1]", 0);
  return std::uint8_t(std::lround(v * 255.0));
}

}  // namespace

std::string to_string(Split s) { return s == Split::Train ? "train" : "test"; }

LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path, Split split) {
  const auto img = read_file(images_path);
  const auto lab = read_file(labels_path);
  if (be32(img, 0, images_path) != kImagesMagic) throw FormatError(images_path + ": bad images magic", 0);
  if (be32(lab, 0, labels_path) != kLabelsMagic) throw FormatError(labels_path + ": bad labels magic", 0);
  const std::uint32_t n = be32(img, 4, images_path);
  const std::uint32_t rows = be32(img, 8, images_path);
  const std::uint32_t cols = be32(img, 12, images_path);
  const std::uint32_t nl = be32(lab, 4, labels_path);
  if (nl != n)
    throw FormatError(labels_path + ": " + std::to_string(nl) + " labels for " + std::to_string(n) + " images", 4);
  const std::size_t pixels = std::size_t(rows) * cols;
  if (img.size() < 16 + pixels * n) throw FormatError(images_path + ": truncated pixel data", img.size());
  if (lab.size() < 8 + std::size_t(n)) throw FormatError(labels_path + ": truncated label data", lab.size());

  LabeledDataset ds;
  ds.split = split;
  ds.shape = Shape::image(int(rows), int(cols), 1);
  ds.inputs.resize(Index(pixels), Index(n));
  const std::uint8_t* p = img.data() + 16;
  for (Index j = 0; j < Index(n); ++j)
    for (Index i = 0; i < Index(pixels); ++i) ds.inputs(i, j) = double(*p++) / 255.0;
  ds.labels.resize(n);
  int max_label = -1;
  for (std::size_t j = 0; j < n; ++j) {
    ds.labels[j] = lab[8 + j];
    max_label = std::max(max_label, ds.labels[j]);
  }
  ds.class_count = max_label + 1;
  return ds;
}

void write_idx(const std::string& images_path, const std::string& labels_path, const LabeledDataset& ds) {
  if (ds.shape.c != 1 || ds.shape.size() != ds.inputs.rows())
    throw FormatError("IDX export needs single-channel images", 0);
  std::vector<std::uint8_t> img, lab;
  put_be32(img, kImagesMagic);
  put_be32(img, std::uint32_t(ds.size()));
  put_be32(img, std::uint32_t(ds.shape.h));
  put_be32(img, std::uint32_t(ds.shape.w));
  img.reserve(img.size() + std::size_t(ds.inputs.size()));
  for (Index j = 0; j < ds.size(); ++j)
    for (Index i = 0; i < ds.inputs.rows(); ++i) img.push_back(quantize(ds.inputs(i, j)));
  put_be32(lab, kLabelsMagic);
  put_be32(lab, std::uint32_t(ds.size()));
  for (int l : ds.labels) lab.push_back(std::uint8_t(l));
  write_file(images_path, img);
  write_file(labels_path, lab);
}

LabeledDataset load_cifar10(const std::vector<std::string>& paths, Split split) {
  std::vector<std::vector<std::uint8_t>> files;
  std::size_t records = 0;
  for (const auto& path : paths) {
    files.push_back(read_file(path));
    const std::size_t size = files.back().size();
    if (size % kCifarRecord != 0)
      throw FormatError(path + ": size " + std::to_string(size) + " is not a multiple of 3073",
                        size - size % kCifarRecord);
    records += size / kCifarRecord;
  }
  LabeledDataset ds;
  ds.split = split;
  ds.shape = Shape::image(32, 32, 3);
  ds.class_count = 10;
  ds.inputs.resize(3072, Index(records));
  ds.labels.resize(records);
  Index j = 0;
  for (std::size_t f = 0; f < files.size(); ++f) {
    const auto& b = files[f];
    for (std::size_t r = 0; r < b.size() / kCifarRecord; ++r, ++j) {
      const std::uint8_t* rec = b.data() + r * kCifarRecord;
      if (rec[0] > 9) throw FormatError(paths[f] + ": label byte out of range", r * kCifarRecord);
      ds.labels[std::size_t(j)] = rec[0];
      for (int ch = 0; ch < 3; ++ch)
        for (int px = 0; px < 1024; ++px) ds.inputs(px * 3 + ch, j) = double(rec[1 + ch * 1024 + px]) / 255.0;
    }
  }
  return ds;
}

void write_cifar10(const std::string& path, const LabeledDataset& ds) {
  if (ds.inputs.rows() != 3072) throw FormatError("CIFAR-10 export needs 32x32x3 images", 0);
  std::vector<std::uint8_t> out;
  out.reserve(std::size_t(ds.size()) * kCifarRecord);
  for (Index j = 0; j < ds.size(); ++j) {
    out.push_back(std::uint8_t(ds.labels[std::size_t(j)]));
    for (int ch = 0; ch < 3; ++ch)
      for (int px = 0; px < 1024; ++px) out.push_back(quantize(ds.inputs(px * 3 + ch, j)));
  }
  write_file(path, out);
}

LabeledDataset stratified_subset(const LabeledDataset& ds, int per_class) {
  std::vector<int> taken(std::size_t(std::max(ds.class_count, 1)), 0);
  std::vector<Index> keep;
  for (std::size_t j = 0; j < ds.labels.size(); ++j) {
    int& t = taken[std::size_t(ds.labels[j])];
    if (t < per_class) {
      ++t;
      keep.push_back(Index(j));
    }
  }
  LabeledDataset out;
  out.class_count = ds.class_count;
  out.split = ds.split;
  out.shape = ds.shape;
  out.inputs = gather_columns(ds.inputs, keep);
  for (Index j : keep) out.labels.push_back(ds.labels[std::size_t(j)]);
  return out;
}

std::vector<Index> indices_of_class(const LabeledDataset& ds, int label) {
  std::vector<Index> out;
  for (std::size_t j = 0; j < ds.labels.size(); ++j)
    if (ds.labels[j] == label) out.push_back(Index(j));
  return out;
}

Matrix gather_columns(const Matrix& m, const std::vector<Index>& cols) {
  Matrix out(m.rows(), Index(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(Index(k)) = m.col(cols[k]);
  return out;
}

}  // namespace catgeo
