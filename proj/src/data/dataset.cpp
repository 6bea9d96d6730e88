#include "erd/data/dataset.hpp"

#include <array>
#include <bit>
#include <fstream>
#include "json.hpp"
#include <string>

#include "erd/errors.hpp"

namespace erd::data {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr std::array<char, 4> kMagic = {'E', 'M', 'L', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::string file_name(int id, Split split) {
  return "class_" + std::to_string(id) + (split == Split::train ? "_train" : "_test") + ".emlt";
}

}  // namespace

FeatureMatrix::FeatureMatrix(std::size_t r, std::size_t c, std::vector<float> v)
    : rows(r), cols(c), values(std::move(v)) {
  if (values.size() != rows * cols) {
    throw DimensionError("feature matrix: " + std::to_string(values.size()) +
                         " values for " + std::to_string(rows) + "x" + std::to_string(cols));
  }
}

std::size_t validate_dataset(std::span<const ClassData> classes) {
  if (classes.empty()) throw ValidationError("dataset has no classes");
  const std::size_t dim = classes.front().train.cols;
  for (const auto& c : classes) {
    if (c.train.rows == 0 || c.test.rows == 0) {
      throw ValidationError("class " + std::to_string(c.id) + " has an empty split");
    }
    if (c.train.cols != dim || c.test.cols != dim) {
      throw ValidationError("class " + std::to_string(c.id) + " has dim " +
                            std::to_string(c.train.cols) + ", expected " + std::to_string(dim));
    }
  }
  return dim;
}

void write_tensor_file(const fs::path& path, const FeatureMatrix& matrix) {
  std::string bytes;
  bytes.reserve(16 + matrix.values.size() * 4);
  bytes.append(kMagic.data(), kMagic.size());
  put_u32(bytes, kVersion);
  put_u32(bytes, static_cast<std::uint32_t>(matrix.rows));
  put_u32(bytes, static_cast<std::uint32_t>(matrix.cols));
  for (float v : matrix.values) put_u32(bytes, std::bit_cast<std::uint32_t>(v));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

FeatureMatrix read_tensor_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16) throw IoError("truncated tensor header in " + path.string());
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw FormatError("bad magic in " + path.string());
  }
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint32_t version = get_u32(raw + 4);
  if (version != kVersion) {
    throw FormatError("unsupported tensor version " + std::to_string(version) + " in " +
                      path.string());
  }
  const std::size_t count = get_u32(raw + 8);
  const std::size_t dim = get_u32(raw + 12);
  const std::size_t expected = 16 + count * dim * 4;
  if (bytes.size() < expected) throw IoError("truncated tensor data in " + path.string());
  if (bytes.size() > expected) throw FormatError("trailing bytes in " + path.string());
  FeatureMatrix matrix(count, dim);
  for (std::size_t i = 0; i < count * dim; ++i) {
    matrix.values[i] = std::bit_cast<float>(get_u32(raw + 16 + 4 * i));
  }
  return matrix;
}

void save_dataset(const fs::path& dir, std::span<const ClassData> classes) {
  const std::size_t dim = validate_dataset(classes);
  fs::create_directories(dir);
  json manifest;
  manifest["version"] = kVersion;
  manifest["dim"] = dim;
  manifest["classes"] = json::array();
  for (const auto& c : classes) {
    write_tensor_file(dir / file_name(c.id, Split::train), c.train);
    write_tensor_file(dir / file_name(c.id, Split::test), c.test);
    manifest["classes"].push_back(
        {{"id", c.id}, {"train", file_name(c.id, Split::train)}, {"test", file_name(c.id, Split::test)}});
  }
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw IoError("cannot write manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
}

Dataset load_dataset(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("missing manifest.json in " + dir.string());
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("malformed manifest.json: " + std::string(e.what()));
  }
  Dataset classes;
  std::size_t dim = 0;
  try {
    if (manifest.at("version").get<int>() != 1) throw FormatError("unsupported manifest version");
    dim = manifest.at("dim").get<std::size_t>();
    for (const auto& entry : manifest.at("classes")) {
      ClassData c;
      c.id = entry.at("id").get<int>();
      c.train = read_tensor_file(dir / entry.at("train").get<std::string>());
      c.test = read_tensor_file(dir / entry.at("test").get<std::string>());
      classes.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw FormatError("malformed manifest.json: " + std::string(e.what()));
  }
  if (validate_dataset(classes) != dim) {
    throw ValidationError("manifest dim " + std::to_string(dim) + " does not match tensor files");
  }
  return classes;
}

}  // namespace erd::data
