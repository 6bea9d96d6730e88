#pragma once

#include <filesystem>

#include "erd/learners/networks.hpp"

namespace erd::learners {

/// Writes model.json and one EMLT tensor file per parameter into `dir`.
/// Weights are stored as [in, out] blocks, biases as a single row.
void save_model(const std::filesystem::path& dir, const Model<float>& model);

/// Inverse of save_model; loaded parameters are trainable.
Model<float> load_model(const std::filesystem::path& dir);

}  // namespace erd::learners
