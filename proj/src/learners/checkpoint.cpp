#include "erd/learners/checkpoint.hpp"

#include <fstream>
#include "json.hpp"

#include "erd/data/dataset.hpp"
#include "erd/errors.hpp"

namespace erd::learners {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

void save_mlp(const fs::path& dir, const Mlp<float>& mlp, const std::string& prefix,
              json& tensors) {
  for (std::size_t l = 0; l < mlp.n_layers(); ++l) {
    const auto& w = mlp.weight(l);
    const auto& b = mlp.bias(l);
    const std::string w_file = prefix + ".W" + std::to_string(l) + ".emlt";
    const std::string b_file = prefix + ".b" + std::to_string(l) + ".emlt";
    data::write_tensor_file(dir / w_file, data::FeatureMatrix(w.dim(0), w.dim(1),
                                                              {w.data().begin(), w.data().end()}));
    data::write_tensor_file(dir / b_file, data::FeatureMatrix(1, b.dim(0),
                                                              {b.data().begin(), b.data().end()}));
    tensors.push_back({{"name", prefix + ".W" + std::to_string(l)}, {"file", w_file}});
    tensors.push_back({{"name", prefix + ".b" + std::to_string(l)}, {"file", b_file}});
  }
}

Mlp<float> load_mlp(const fs::path& dir, const std::vector<std::size_t>& widths,
                    const std::string& prefix, const json& tensors) {
  auto find_file = [&](const std::string& name) {
    for (const auto& t : tensors) {
      if (t.at("name").get<std::string>() == name) return t.at("file").get<std::string>();
    }
    throw FormatError("model.json has no tensor named " + name);
  };
  std::vector<ad::Tensor> weights;
  std::vector<ad::Tensor> biases;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    auto w = data::read_tensor_file(dir / find_file(prefix + ".W" + std::to_string(l)));
    auto b = data::read_tensor_file(dir / find_file(prefix + ".b" + std::to_string(l)));
    if (b.rows != 1) throw FormatError("bias tensor must be stored as a single row");
    weights.emplace_back(ad::Shape{w.rows, w.cols}, std::move(w.values), true);
    biases.emplace_back(ad::Shape{b.cols}, std::move(b.values), true);
  }
  return Mlp<float>(widths, std::move(weights), std::move(biases));
}

}  // namespace

void save_model(const fs::path& dir, const Model<float>& model) {
  fs::create_directories(dir);
  json manifest;
  manifest["version"] = 1;
  manifest["learner_type"] = std::string(to_string(model.type));
  manifest["layer_widths"] = model.embed.widths();
  manifest["tensors"] = json::array();
  save_mlp(dir, model.embed, "embed", manifest["tensors"]);
  if (model.relation) {
    manifest["relation_widths"] = model.relation->mlp().widths();
    save_mlp(dir, model.relation->mlp(), "relation", manifest["tensors"]);
  }
  std::ofstream out(dir / "model.json", std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / "model.json").string());
  out << manifest.dump(2) << '\n';
}

Model<float> load_model(const fs::path& dir) {
  std::ifstream in(dir / "model.json");
  if (!in) throw IoError("missing model.json in " + dir.string());
  try {
    const json manifest = json::parse(in);
    if (manifest.at("version").get<int>() != 1) throw FormatError("unsupported model version");
    Model<float> model;
    model.type = parse_learner_type(manifest.at("learner_type").get<std::string>());
    const auto& tensors = manifest.at("tensors");
    model.embed = load_mlp(dir, manifest.at("layer_widths").get<std::vector<std::size_t>>(),
                           "embed", tensors);
    if (model.type == LearnerType::relation) {
      model.relation = RelationModule<float>(load_mlp(
          dir, manifest.at("relation_widths").get<std::vector<std::size_t>>(), "relation",
          tensors));
    }
    return model;
  } catch (const json::exception& e) {
    throw FormatError("malformed model.json: " + std::string(e.what()));
  }
}

}  // namespace erd::learners
