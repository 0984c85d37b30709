#include "analogy/checkpoint.hpp"

#include <fstream>

namespace analogy {

using nlohmann::json;

json encoder_config_to_json(const model::EncoderConfig& cfg) {
  return {{"input_mode", model::to_string(cfg.input_mode)},
          {"panel_config", rpm::to_string(cfg.panel_config)},
          {"raster_hw", {cfg.raster_height, cfg.raster_width}},
          {"panel_dim", cfg.panel_dim},
          {"embed_dim", cfg.embed_dim},
          {"attribute_slots", cfg.attribute_slots},
          {"rule_slots", cfg.rule_slots},
          {"task_dim", cfg.task_dim},
          {"latent_dim", cfg.latent_dim}};
}

model::EncoderConfig encoder_config_from_json(const json& j) {
  model::EncoderConfig cfg;
  cfg.input_mode = model::parse_input_mode(j.at("input_mode").get<std::string>());
  cfg.panel_config = rpm::parse_config(j.at("panel_config").get<std::string>());
  cfg.raster_height = j.at("raster_hw").at(0).get<int>();
  cfg.raster_width = j.at("raster_hw").at(1).get<int>();
  cfg.panel_dim = j.at("panel_dim").get<std::size_t>();
  cfg.embed_dim = j.at("embed_dim").get<std::size_t>();
  cfg.attribute_slots = j.at("attribute_slots").get<std::size_t>();
  cfg.rule_slots = j.at("rule_slots").get<std::size_t>();
  cfg.task_dim = j.at("task_dim").get<std::size_t>();
  cfg.latent_dim = j.at("latent_dim").get<std::size_t>();
  return cfg;
}

json params_to_json(const ParamStore& params) {
  json out = json::object();
  for (const auto& e : params.entries()) {
    out[e.name] = json::array({e.value.shape(), std::vector<double>(e.value.data().begin(),
                                                                    e.value.data().end())});
  }
  return out;
}

json moments_to_json(const ParamStore& params) {
  json out = json::object();
  for (const auto& e : params.entries()) {
    out[e.name] = {{"m", e.first_moment}, {"v", e.second_moment}};
  }
  return out;
}

namespace {

void copy_values(const json& values, std::span<double> dst, const std::string& what) {
  if (!values.is_array() || values.size() != dst.size()) {
    throw DimensionError(what + ": expected " + std::to_string(dst.size()) + " values");
  }
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = values[i].get<double>();
}

}  // namespace

void params_from_json(const json& j, ParamStore& params) {
  if (j.size() != params.size()) {
    throw DimensionError("checkpoint has " + std::to_string(j.size()) + " parameters, model has " +
                         std::to_string(params.size()));
  }
  for (auto& e : params.entries()) {
    if (!j.contains(e.name)) throw DimensionError("checkpoint lacks parameter " + e.name);
    const json& entry = j.at(e.name);
    const Shape shape = entry.at(0).get<Shape>();
    if (shape != e.value.shape()) {
      throw DimensionError("parameter " + e.name + " has shape " + shape_str(shape) +
                           " in checkpoint, " + shape_str(e.value.shape()) + " in model");
    }
    copy_values(entry.at(1), e.value.mutable_data(), e.name);
  }
}

void moments_from_json(const json& j, ParamStore& params) {
  for (auto& e : params.entries()) {
    if (!j.contains(e.name)) throw DimensionError("checkpoint lacks moments for " + e.name);
    copy_values(j.at(e.name).at("m"), e.first_moment, e.name + " first moment");
    copy_values(j.at(e.name).at("v"), e.second_moment, e.name + " second moment");
  }
}

json checkpoint_to_json(const Checkpoint& ckpt) {
  return {{"v", kCheckpointVersion},
          {"config", encoder_config_to_json(ckpt.config)},
          {"params", params_to_json(ckpt.params)},
          {"adam", moments_to_json(ckpt.params)},
          {"step", ckpt.params.step()},
          {"epoch", ckpt.epoch},
          {"training", ckpt.training}};
}

Checkpoint checkpoint_from_json(const json& j) {
  if (!j.is_object() || !j.contains("v")) throw CheckpointError("not a checkpoint");
  if (j.at("v").get<int>() != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + j.at("v").dump());
  }
  Checkpoint ckpt;
  ckpt.config = encoder_config_from_json(j.at("config"));
  ckpt.params = model::init_params(ckpt.config, 0);
  params_from_json(j.at("params"), ckpt.params);
  moments_from_json(j.at("adam"), ckpt.params);
  ckpt.params.set_step(j.at("step").get<std::int64_t>());
  ckpt.epoch = j.value("epoch", std::int64_t{0});
  ckpt.training = j.value("training", json::object());
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out << checkpoint_to_json(ckpt).dump() << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw CheckpointError("malformed checkpoint " + path.string() + ": " + e.what());
  }
  try {
    return checkpoint_from_json(j);
  } catch (const json::exception& e) {
    throw CheckpointError("malformed checkpoint " + path.string() + ": " + e.what());
  }
}

Checkpoint load_checkpoint_for(const std::filesystem::path& path,
                               const model::EncoderConfig& expected) {
  Checkpoint ckpt = load_checkpoint(path);
  if (!(ckpt.config == expected)) {
    throw DimensionError("checkpoint " + path.string() + " was written for a different model (" +
                         encoder_config_to_json(ckpt.config).dump() + ")");
  }
  return ckpt;
}

}  // namespace analogy
