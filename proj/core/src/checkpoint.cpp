#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "hamnet/errors.hpp"
#include "hamnet/pipeline.hpp"

namespace hamnet {

namespace {

constexpr const char* kFormat = "hamnet-checkpoint";
constexpr int kVersion = 1;

std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t out = 0;
    for (int i = 0; i < 8; ++i) out |= ((v >> (8 * i)) & 0xffULL) << (8 * (7 - i));
    return out;
  }
}

void write_blob(const std::filesystem::path& path, std::span<const double> values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (double v : values) {
    const std::uint64_t bits = to_little_endian(std::bit_cast<std::uint64_t>(v));
    out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
}

void read_blob(const std::filesystem::path& path, std::span<double> values) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  for (double& v : values) {
    std::uint64_t bits = 0;
    if (!in.read(reinterpret_cast<char*>(&bits), sizeof bits)) throw DataError(path.string() + ": truncated tensor");
    v = std::bit_cast<double>(to_little_endian(bits));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw DataError(path.string() + ": trailing bytes");
}

std::string blob_name(std::size_t index, const std::string& name) {
  char prefix[16];
  std::snprintf(prefix, sizeof prefix, "%04zu_", index);
  return std::string(prefix) + name + ".bin";
}

}  // namespace

void save_checkpoint(const Model& model, const TrainingMetadata& training, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "tensors");
  nlohmann::json manifest;
  manifest["format"] = kFormat;
  manifest["version"] = kVersion;
  manifest["config"] = model.config().to_map();
  const auto& meta = model.meta();
  manifest["meta"] = {{"d", meta.d}, {"d_v", meta.d_v}, {"concept_vocab", meta.concept_vocab},
                      {"label_set", meta.label_set}};
  manifest["training"] = {{"best_epoch", training.best_epoch},
                          {"epochs_run", training.epochs_run},
                          {"best_val_f1", training.best_val_f1},
                          {"seed", training.seed}};
  manifest["tensors"] = nlohmann::json::array();
  const auto params = model.named_params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    const std::string file = "tensors/" + blob_name(i, p.name);
    write_blob(dir / file, p.tensor.values());
    manifest["tensors"].push_back({{"name", p.name}, {"shape", p.tensor.shape()}, {"file", file}});
  }
  std::ofstream out(dir / "manifest.json");
  if (!out) throw Error("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw DataError("no checkpoint manifest in " + dir.string());
  nlohmann::json manifest;
  try {
    in >> manifest;
    if (manifest.at("format").get<std::string>() != kFormat || manifest.at("version").get<int>() != kVersion) {
      throw DataError(dir.string() + ": unsupported checkpoint format");
    }
    PipelineConfig cfg;
    for (const auto& [k, v] : manifest.at("config").items()) cfg.set(k, v.get<std::string>());
    DatasetMeta meta;
    const auto& mj = manifest.at("meta");
    meta.d = mj.at("d").get<std::size_t>();
    meta.d_v = mj.at("d_v").get<std::size_t>();
    meta.concept_vocab = mj.at("concept_vocab").get<std::size_t>();
    meta.label_set = mj.at("label_set").get<std::vector<std::string>>();

    TrainingMetadata training;
    const auto& tj = manifest.at("training");
    training.best_epoch = tj.at("best_epoch").get<std::size_t>();
    training.epochs_run = tj.at("epochs_run").get<std::size_t>();
    training.best_val_f1 = tj.at("best_val_f1").get<double>();
    training.seed = tj.at("seed").get<std::uint64_t>();

    Model model(cfg, meta);
    auto params = model.named_params();
    const auto& tensors = manifest.at("tensors");
    if (tensors.size() != params.size()) {
      throw DataError(dir.string() + ": checkpoint has " + std::to_string(tensors.size()) + " tensors, model expects " +
                      std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& tj_i = tensors[i];
      if (tj_i.at("name").get<std::string>() != params[i].name ||
          tj_i.at("shape").get<Shape>() != params[i].tensor.shape()) {
        throw DataError(dir.string() + ": tensor " + std::to_string(i) + " does not match " + params[i].name);
      }
      read_blob(dir / tj_i.at("file").get<std::string>(), params[i].tensor.mutable_values());
    }
    return LoadedCheckpoint{std::move(model), training};
  } catch (const nlohmann::json::exception& e) {
    throw DataError(dir.string() + ": malformed manifest: " + e.what());
  }
}

}  // namespace hamnet
