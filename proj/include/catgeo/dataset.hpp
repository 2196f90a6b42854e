#pragma once

#include "catgeo/network.hpp"

#include <string>
#include <vector>

namespace catgeo {

enum class Split { Train, Test };
std::string to_string(Split s);

/// Inputs in [0, 1], one item per column, with integer labels.
struct LabeledDataset {
  Matrix inputs;
  std::vector<int> labels;
  int class_count = 0;
  Split split = Split::Train;
  Shape shape;

  Index size() const { return inputs.cols(); }
};

/// Big-endian IDX pair: images (magic 0x00000803, n x rows x cols) and labels
/// (magic 0x00000801). Pixels are scaled by 1/255. Throws FormatError.
LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path,
                        Split split = Split::Train);
/// Writes a 1-channel dataset as an IDX pair (values quantized to round(255 v)).
void write_idx(const std::string& images_path, const std::string& labels_path, const LabeledDataset& ds);

/// CIFAR-10 binary batches: records of 1 label byte + 3072 channel-major bytes.
LabeledDataset load_cifar10(const std::vector<std::string>& paths, Split split = Split::Train);
void write_cifar10(const std::string& path, const LabeledDataset& ds);

/// First `per_class` items of every class, in dataset order.
LabeledDataset stratified_subset(const LabeledDataset& ds, int per_class);

std::vector<Index> indices_of_class(const LabeledDataset& ds, int label);

/// Inputs of the given columns.
Matrix gather_columns(const Matrix& m, const std::vector<Index>& cols);

}  // namespace catgeo
