#pragma once

// `ckpt-json v1`:
//   {"v":1,"config":{...},"params":{name:[[dims],[values]]},
//    "adam":{name:{"m":[...],"v":[...]}},"step":int,"epoch":int,
//    "training":{...}}
// Doubles are written in shortest round-trip form, so reloading is bit-exact.

#include <filesystem>
#include <stdexcept>

#include <json.hpp>

#include "analogy/model.hpp"
#include "analogy/param_store.hpp"

namespace analogy {

inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json encoder_config_to_json(const model::EncoderConfig& cfg);
model::EncoderConfig encoder_config_from_json(const nlohmann::json& j);

nlohmann::json params_to_json(const ParamStore& params);
nlohmann::json moments_to_json(const ParamStore& params);
// Overwrites values of an existing store; throws DimensionError on a missing
// name or a shape mismatch.
void params_from_json(const nlohmann::json& j, ParamStore& params);
void moments_from_json(const nlohmann::json& j, ParamStore& params);

struct Checkpoint {
  model::EncoderConfig config;
  ParamStore params;
  std::int64_t epoch = 0;
  nlohmann::json training = nlohmann::json::object();
};

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
// Rebuilds the parameter layout from the stored config and fills it.
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Loads into `params`, which must have the layout of `expected`; throws
// DimensionError when the stored config differs.
Checkpoint load_checkpoint_for(const std::filesystem::path& path,
                               const model::EncoderConfig& expected);

}  // namespace analogy
