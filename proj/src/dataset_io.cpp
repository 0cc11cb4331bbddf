#include "smdm/dataset_io.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "json.hpp"

static_assert(std::endian::native == std::endian::little,
              "blob format is little-endian f64");

namespace smdm {

using nlohmann::json;

namespace {

std::string blob_name(const std::string& base_path) {
  return std::filesystem::path(base_path).filename().string() + ".bin";
}

void write_doubles(std::ofstream& out, const std::vector<double>& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& base_path) {
  std::filesystem::path base(base_path);
  if (base.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(base.parent_path(), ec);
  }

  json manifest;
  manifest["format"] = "smdm-dataset-v1";
  manifest["layout"] = {{"joints", ds.layout.joints},
                        {"arity", ds.layout.arity},
                        {"end_effectors", ds.layout.end_effectors}};
  manifest["fps"] = ds.fps;
  manifest["classes"] = ds.classes;
  manifest["stats"] = {{"mean", ds.stats.mean}, {"std", ds.stats.stdev}};
  manifest["train_idx"] = ds.train_idx;
  manifest["val_idx"] = ds.val_idx;
  manifest["blob"] = blob_name(base_path);

  json seqs = json::array();
  uint64_t offset = 0;
  for (const auto& s : ds.sequences) {
    seqs.push_back({{"name", s.name},
                    {"class", s.class_id},
                    {"frames", s.frames},
                    {"dims", s.dims},
                    {"offset", offset}});
    offset += s.data.size() * sizeof(double);
  }
  manifest["sequences"] = std::move(seqs);

  std::string json_path = base_path + ".json";
  std::ofstream jout(json_path, std::ios::binary);
  if (!jout) throw io_error("cannot write " + json_path);
  jout << manifest.dump(2) << "\n";

  std::string bin_path = base_path + ".bin";
  std::ofstream bout(bin_path, std::ios::binary);
  if (!bout) throw io_error("cannot write " + bin_path);
  for (const auto& s : ds.sequences) write_doubles(bout, s.data);
}

Dataset load_dataset(const std::string& base_path) {
  std::string json_path = base_path + ".json";
  std::ifstream jin(json_path, std::ios::binary);
  if (!jin) throw io_error("cannot open dataset manifest: " + json_path);
  json manifest;
  try {
    manifest = json::parse(jin);
  } catch (const json::parse_error& e) {
    throw io_error("dataset manifest parse error in " + json_path + " at byte " +
                   std::to_string(e.byte) + ": " + e.what());
  }
  if (manifest.value("format", "") != "smdm-dataset-v1")
    throw io_error("not a dataset manifest: " + json_path);

  Dataset ds;
  const json& layout = manifest.at("layout");
  ds.layout.joints = layout.at("joints").get<int>();
  ds.layout.arity = layout.at("arity").get<int>();
  ds.layout.end_effectors = layout.at("end_effectors").get<std::vector<int>>();
  ds.fps = manifest.at("fps").get<double>();
  ds.classes = manifest.at("classes").get<std::vector<std::string>>();
  ds.stats.mean = manifest.at("stats").at("mean").get<std::vector<double>>();
  ds.stats.stdev = manifest.at("stats").at("std").get<std::vector<double>>();
  ds.train_idx = manifest.at("train_idx").get<std::vector<int>>();
  ds.val_idx = manifest.at("val_idx").get<std::vector<int>>();

  std::filesystem::path bin_path =
      std::filesystem::path(base_path).parent_path() / manifest.at("blob").get<std::string>();
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw io_error("cannot open dataset blob: " + bin_path.string());

  for (const json& entry : manifest.at("sequences")) {
    MotionSequence s;
    s.name = entry.at("name").get<std::string>();
    s.class_id = entry.at("class").get<int>();
    s.frames = entry.at("frames").get<int>();
    s.dims = entry.at("dims").get<int>();
    s.fps = ds.fps;
    s.data.resize(static_cast<size_t>(s.frames) * s.dims);
    bin.seekg(static_cast<std::streamoff>(entry.at("offset").get<uint64_t>()));
    bin.read(reinterpret_cast<char*>(s.data.data()),
             static_cast<std::streamsize>(s.data.size() * sizeof(double)));
    if (!bin)
      throw io_error("dataset blob truncated while reading sequence '" + s.name + "'");
    ds.sequences.push_back(std::move(s));
  }
  return ds;
}

}  // namespace smdm
