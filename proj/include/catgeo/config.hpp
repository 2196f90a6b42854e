#pragma once

#include "catgeo/inversion.hpp"
#include "catgeo/network.hpp"
#include "catgeo/train.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace catgeo {

using Json = nlohmann::json;

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"toy1d",         "toy2d",         "mnist-continuum",
                                              "mnist-depth",   "categoricality", "dropout-sweep",
                                              "categoricality-ablation"};
  return names;
}

/// Parses JSON text; duplicate object keys are a ConfigError naming the path.
Json parse_json_strict(const std::string& text, const std::string& source = "<config>");
Json load_json_file(const std::string& path);

/// Documented defaults of an experiment (every accepted key appears here).
Json default_config(const std::string& experiment);

/// Merges `user` over the defaults of user["experiment"]. Unknown keys and
/// type mismatches are ConfigErrors with a JSON path.
Json resolve_config(const Json& user);
Json load_config(const std::string& path);

/// Layer list: [{"kind", "units", "kernel", "stride", "padding", "pool",
/// "activation", "noise": {"kind", "rate"}}, ...].
std::vector<LayerSpec> parse_layers(const Json& j, const std::string& path = "/network/layers");
Json layers_to_json(const std::vector<LayerSpec>& specs);

TrainConfig parse_train(const Json& train, std::uint64_t seed);
InversionOptions parse_inversion(const Json& j);

/// j[key] converted to T, with a path-qualified ConfigError on failure.
template <typename T>
T get(const Json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError(path + "/" + key + ": missing");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(path + "/" + key + ": wrong type");
  }
}

}  // namespace catgeo
