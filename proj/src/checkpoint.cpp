#include "smdm/checkpoint.hpp"

#include <bit>
#include <filesystem>
#include <fstream>

#include "json.hpp"

static_assert(std::endian::native == std::endian::little,
              "blob format is little-endian f64");

namespace smdm {

using nlohmann::json;

void save_checkpoint(const Checkpoint& ck, const std::string& base_path) {
  std::filesystem::path base(base_path);
  if (base.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(base.parent_path(), ec);
  }

  auto& params = const_cast<DenoiserParams&>(ck.params);
  auto refs = collect_params(params);

  json manifest;
  manifest["format"] = "smdm-checkpoint-v1";
  manifest["config"] = config_to_json(ck.config);
  manifest["data_dim"] = ck.params.data_dim;
  manifest["layout"] = {{"joints", ck.layout.joints},
                        {"arity", ck.layout.arity},
                        {"end_effectors", ck.layout.end_effectors}};
  manifest["fps"] = ck.fps;
  manifest["classes"] = ck.classes;
  manifest["stats"] = {{"mean", ck.stats.mean}, {"std", ck.stats.stdev}};
  manifest["blob"] = std::filesystem::path(base_path).filename().string() + ".bin";

  json tensors = json::array();
  uint64_t offset = 0;
  for (const auto& ref : refs) {
    const Shape& s = ref.tensor->shape();
    std::vector<int> dims(s.d.begin(), s.d.begin() + s.rank);
    tensors.push_back({{"name", ref.name}, {"shape", dims}, {"offset", offset}});
    offset += static_cast<uint64_t>(ref.tensor->numel()) * sizeof(double);
  }
  manifest["tensors"] = std::move(tensors);

  std::ofstream jout(base_path + ".json", std::ios::binary);
  if (!jout) throw io_error("cannot write " + base_path + ".json");
  jout << manifest.dump(2) << "\n";

  std::ofstream bout(base_path + ".bin", std::ios::binary);
  if (!bout) throw io_error("cannot write " + base_path + ".bin");
  for (const auto& ref : refs) {
    const auto& v = ref.tensor->data();
    bout.write(reinterpret_cast<const char*>(v.data()),
               static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
}

Checkpoint load_checkpoint(const std::string& base_path) {
  std::ifstream jin(base_path + ".json", std::ios::binary);
  if (!jin) throw io_error("cannot open checkpoint manifest: " + base_path + ".json");
  json manifest;
  try {
    manifest = json::parse(jin);
  } catch (const json::parse_error& e) {
    throw io_error("checkpoint manifest parse error at byte " + std::to_string(e.byte) +
                   ": " + e.what());
  }
  if (manifest.value("format", "") != "smdm-checkpoint-v1")
    throw io_error("not a checkpoint manifest: " + base_path + ".json");

  Checkpoint ck;
  ck.config = config_from_json(manifest.at("config"));
  const json& layout = manifest.at("layout");
  ck.layout.joints = layout.at("joints").get<int>();
  ck.layout.arity = layout.at("arity").get<int>();
  ck.layout.end_effectors = layout.at("end_effectors").get<std::vector<int>>();
  ck.fps = manifest.at("fps").get<double>();
  ck.classes = manifest.at("classes").get<std::vector<std::string>>();
  ck.stats.mean = manifest.at("stats").at("mean").get<std::vector<double>>();
  ck.stats.stdev = manifest.at("stats").at("std").get<std::vector<double>>();

  // Rebuild the parameter skeleton from the stored config, then overwrite
  // every tensor from the blob; any drift between the two is an error.
  int data_dim = manifest.at("data_dim").get<int>();
  Rng dummy(0);
  ck.params = init_denoiser(ck.config.model, data_dim, dummy);
  auto refs = collect_params(ck.params);
  const json& tensors = manifest.at("tensors");
  if (tensors.size() != refs.size())
    throw io_error("checkpoint tensor count " + std::to_string(tensors.size()) +
                   " does not match config-derived count " + std::to_string(refs.size()));

  std::filesystem::path bin_path =
      std::filesystem::path(base_path).parent_path() / manifest.at("blob").get<std::string>();
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw io_error("cannot open checkpoint blob: " + bin_path.string());

  for (size_t i = 0; i < refs.size(); ++i) {
    const json& entry = tensors[i];
    if (entry.at("name").get<std::string>() != refs[i].name)
      throw io_error("checkpoint tensor order mismatch at '" + refs[i].name + "'");
    std::vector<int> dims = entry.at("shape").get<std::vector<int>>();
    Shape want = refs[i].tensor->shape();
    std::vector<int> want_dims(want.d.begin(), want.d.begin() + want.rank);
    if (dims != want_dims)
      throw io_error("checkpoint tensor '" + refs[i].name + "' shape mismatch");
    std::vector<double> v(refs[i].tensor->numel());
    bin.seekg(static_cast<std::streamoff>(entry.at("offset").get<uint64_t>()));
    bin.read(reinterpret_cast<char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!bin) throw io_error("checkpoint blob truncated at tensor '" + refs[i].name + "'");
    *refs[i].tensor = Tensor::from(want, std::move(v));
  }
  return ck;
}

void require_compatible(const DenoiserConfig& requested, const Checkpoint& ck) {
  const DenoiserConfig& have = ck.config.model;
  std::string bad;
  auto check = [&](const std::string& field, auto a, auto b) {
    if (a != b) bad += (bad.empty() ? "" : ", ") + field;
  };
  check("model.d_model", requested.d_model, have.d_model);
  check("model.n_layers", requested.n_layers, have.n_layers);
  check("model.n_heads", requested.n_heads, have.n_heads);
  check("model.fsq_levels", requested.fsq_levels, have.fsq_levels);
  check("model.n_classes", requested.n_classes, have.n_classes);
  check("model.bound_source", requested.bound_source, have.bound_source);
  if (!bad.empty())
    throw config_error("checkpoint/config mismatch in fields: " + bad);
}

}  // namespace smdm
