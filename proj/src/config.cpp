#include "smdm/config.hpp"

#include <fstream>

#include "smdm/rng.hpp"

namespace smdm {

using nlohmann::json;

void RunConfig::validate() const {
  model.validate();
  if (schedule.kind != "cosine" && schedule.kind != "linear")
    throw config_error("schedule.kind must be 'cosine' or 'linear'");
  if (schedule.steps < 1) throw config_error("schedule.steps must be >= 1");
  if (train.lr <= 0) throw config_error("train.lr must be positive");
  if (train.batch < 1) throw config_error("train.batch must be >= 1");
  if (train.steps < 1) throw config_error("train.steps must be >= 1");
  if (train.mask_noise < 0 || train.mask_noise > 0.2)
    throw config_error("train.mask_noise must be in [0, 0.2]");
  if (train.checkpoint_every < 1) throw config_error("train.checkpoint_every must be >= 1");
  if (sample.gamma < 0 || sample.gamma > 1) throw config_error("sample.gamma must be in [0, 1]");
  if (sample.clamp_limit <= 0) throw config_error("sample.clamp_limit must be positive");
  if (data.n_per_class < 1) throw config_error("data.n_per_class must be >= 1");
  if (data.frames < 2) throw config_error("data.frames must be >= 2");
  if (data.noise_sigma < 0) throw config_error("data.noise_sigma must be >= 0");
}

json config_to_json(const RunConfig& c) {
  return json{
      {"seed", c.seed},
      {"dataset", c.dataset},
      {"out_dir", c.out_dir},
      {"model",
       {{"d_model", c.model.d_model},
        {"n_layers", c.model.n_layers},
        {"n_heads", c.model.n_heads},
        {"dropout", c.model.dropout},
        {"reduction_rate", c.model.reduction_rate},
        {"omega0", c.model.omega0},
        {"lambda", c.model.lambda},
        {"fsq_levels", c.model.fsq_levels},
        {"n_classes", c.model.n_classes},
        {"cfg_dropout", c.model.cfg_dropout},
        {"guidance_scale", c.model.guidance_scale},
        {"bound_source", c.model.bound_source}}},
      {"schedule", {{"kind", c.schedule.kind}, {"steps", c.schedule.steps}}},
      {"train",
       {{"lr", c.train.lr},
        {"batch", c.train.batch},
        {"steps", c.train.steps},
        {"mask_noise", c.train.mask_noise},
        {"checkpoint_every", c.train.checkpoint_every}}},
      {"sample",
       {{"gamma", c.sample.gamma},
        {"clamp_x0", c.sample.clamp_x0},
        {"clamp_limit", c.sample.clamp_limit}}},
      {"data",
       {{"n_per_class", c.data.n_per_class},
        {"frames", c.data.frames},
        {"noise_sigma", c.data.noise_sigma}}}};
}

namespace {

template <class T>
void read_field(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void check_known_keys(const json& j, std::initializer_list<const char*> known,
                      const std::string& scope) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known)
      if (it.key() == k) ok = true;
    if (!ok)
      throw config_error("unknown config key '" + scope + it.key() + "'");
  }
}

}  // namespace

RunConfig config_from_json(const json& j) {
  if (!j.is_object()) throw config_error("config root must be a JSON object");
  check_known_keys(j, {"seed", "dataset", "out_dir", "model", "schedule", "train",
                       "sample", "data"},
                   "");
  RunConfig c;
  read_field(j, "seed", c.seed);
  read_field(j, "dataset", c.dataset);
  read_field(j, "out_dir", c.out_dir);
  if (j.contains("model")) {
    const json& m = j.at("model");
    check_known_keys(m,
                     {"d_model", "n_layers", "n_heads", "dropout", "reduction_rate",
                      "omega0", "lambda", "fsq_levels", "n_classes", "cfg_dropout",
                      "guidance_scale", "bound_source"},
                     "model.");
    read_field(m, "d_model", c.model.d_model);
    read_field(m, "n_layers", c.model.n_layers);
    read_field(m, "n_heads", c.model.n_heads);
    read_field(m, "dropout", c.model.dropout);
    read_field(m, "reduction_rate", c.model.reduction_rate);
    read_field(m, "omega0", c.model.omega0);
    read_field(m, "lambda", c.model.lambda);
    read_field(m, "fsq_levels", c.model.fsq_levels);
    read_field(m, "n_classes", c.model.n_classes);
    read_field(m, "cfg_dropout", c.model.cfg_dropout);
    read_field(m, "guidance_scale", c.model.guidance_scale);
    read_field(m, "bound_source", c.model.bound_source);
  }
  if (j.contains("schedule")) {
    const json& s = j.at("schedule");
    check_known_keys(s, {"kind", "steps"}, "schedule.");
    read_field(s, "kind", c.schedule.kind);
    read_field(s, "steps", c.schedule.steps);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    check_known_keys(t, {"lr", "batch", "steps", "mask_noise", "checkpoint_every"},
                     "train.");
    read_field(t, "lr", c.train.lr);
    read_field(t, "batch", c.train.batch);
    read_field(t, "steps", c.train.steps);
    read_field(t, "mask_noise", c.train.mask_noise);
    read_field(t, "checkpoint_every", c.train.checkpoint_every);
  }
  if (j.contains("sample")) {
    const json& s = j.at("sample");
    check_known_keys(s, {"gamma", "clamp_x0", "clamp_limit"}, "sample.");
    read_field(s, "gamma", c.sample.gamma);
    read_field(s, "clamp_x0", c.sample.clamp_x0);
    read_field(s, "clamp_limit", c.sample.clamp_limit);
  }
  if (j.contains("data")) {
    const json& d = j.at("data");
    check_known_keys(d, {"n_per_class", "frames", "noise_sigma"}, "data.");
    read_field(d, "n_per_class", c.data.n_per_class);
    read_field(d, "frames", c.data.frames);
    read_field(d, "noise_sigma", c.data.noise_sigma);
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw io_error("config parse error in " + path + ": " + e.what());
  }
  return config_from_json(j);
}

void save_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write config file: " + path);
  out << config_to_json(cfg).dump(2) << "\n";
}

void apply_override(json& j, const std::string& key_eq_value) {
  auto eq = key_eq_value.find('=');
  if (eq == std::string::npos || eq == 0)
    throw config_error("override must look like key.path=value, got '" + key_eq_value + "'");
  std::string path = key_eq_value.substr(0, eq);
  std::string value = key_eq_value.substr(eq + 1);

  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::parse_error&) {
    parsed = value;  // bare strings stay strings
  }

  json* node = &j;
  size_t pos = 0;
  while (true) {
    size_t dot = path.find('.', pos);
    std::string key = path.substr(pos, dot == std::string::npos ? dot : dot - pos);
    if (key.empty()) throw config_error("bad override path '" + path + "'");
    if (dot == std::string::npos) {
      (*node)[key] = parsed;
      break;
    }
    node = &(*node)[key];
    pos = dot + 1;
  }
}

std::string config_hash(const RunConfig& cfg) {
  std::string dump = config_to_json(cfg).dump();
  uint64_t h = detail::fnv1a64(dump);
  static const char* hex = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = hex[h & 0xF];
    h >>= 4;
  }
  return out;
}

bool operator==(const RunConfig& a, const RunConfig& b) {
  return config_to_json(a) == config_to_json(b);
}

}  // namespace smdm
