#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace erd::data {

/// Row-major block of feature vectors.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> values;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0f) {}
  FeatureMatrix(std::size_t r, std::size_t c, std::vector<float> v);

  std::span<const float> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
  std::span<float> row(std::size_t r) { return {values.data() + r * cols, cols}; }

  bool operator==(const FeatureMatrix&) const = default;
};

/// One labelled class with its disjoint train and test rows.
struct ClassData {
  int id = 0;
  FeatureMatrix train;
  FeatureMatrix test;

  std::size_t dim() const { return train.cols; }
  bool operator==(const ClassData&) const = default;
};

using Dataset = std::vector<ClassData>;

enum class Split { train, test };

/// Checks that every class has at least one row per split and a common width.
/// Returns that width.
std::size_t validate_dataset(std::span<const ClassData> classes);

// Tensor container ("EMLT"): 4 magic bytes, u32 version = 1, u32 count,
// u32 dim, then count*dim little-endian f32 values, row-major.
void write_tensor_file(const std::filesystem::path& path, const FeatureMatrix& matrix);
FeatureMatrix read_tensor_file(const std::filesystem::path& path);

/// Writes manifest.json plus one tensor file per class and split.
void save_dataset(const std::filesystem::path& dir, std::span<const ClassData> classes);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace erd::data
