#include "catgeo/config.hpp"

#include "catgeo/categories.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace catgeo {

namespace {

struct Frame {
  bool object = true;
  std::set<std::string> keys;
  std::string key;
  long index = -1;
};

std::string frames_path(const std::vector<Frame>& stack, std::size_t upto) {
  std::string p;
  for (std::size_t i = 0; i < upto; ++i)
    p += "/" + (stack[i].object ? stack[i].key : std::to_string(stack[i].index));
  return p;
}

const char* kind_name(const Json& j) {
  switch (j.type()) {
    case Json::value_t::null: return "null";
    case Json::value_t::object: return "object";
    case Json::value_t::array: return "array";
    case Json::value_t::string: return "string";
    case Json::value_t::boolean: return "boolean";
    case Json::value_t::number_integer:
    case Json::value_t::number_unsigned: return "integer";
    case Json::value_t::number_float: return "number";
    default: return "value";
  }
}

bool compatible(const Json& def, const Json& user) {
  if (def.is_null()) return true;
  if (def.is_number_float()) return user.is_number();
  if (def.is_number_integer() || def.is_number_unsigned()) return user.is_number_integer() || user.is_number_unsigned();
  return def.type() == user.type();
}

void merge_into(Json& base, const Json& user, const std::string& path) {
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string p = path + "/" + it.key();
    if (!base.contains(it.key())) throw ConfigError(p + ": unknown key");
    Json& def = base[it.key()];
    if (!compatible(def, *it))
      throw ConfigError(p + ": expected " + std::string(kind_name(def)) + ", got " + kind_name(*it));
    if (def.is_object() && !def.empty())
      merge_into(def, *it, p);
    else
      def = *it;
  }
}

Json layer(const std::string& kind, int units, const std::string& act, const std::string& noise = "none",
           double rate = 0.0) {
  Json j{{"kind", kind}, {"activation", act}};
  if (units > 0) j["units"] = units;
  if (noise != "none") j["noise"] = {{"kind", noise}, {"rate", rate}};
  return j;
}

Json train_defaults(int epochs, double lr, int trials) {
  return {{"epochs", epochs},
          {"batch_size", 32},
          {"learning_rate", lr},
          {"loss", "cross_entropy"},
          {"adam", {{"beta1", 0.9}, {"beta2", 0.999}, {"epsilon", 1e-8}}},
          {"trials", trials}};
}

Json inversion_defaults(int realizations) {
  return {{"realizations", realizations},
          {"method", "levenberg_marquardt"},
          {"max_iterations", 200},
          {"tolerance", 1e-10},
          {"adam_learning_rate", 1e-2},
          {"adam_max_iterations", 500}};
}

Json mnist_dataset() {
  return {{"format", "idx"},
          {"train_images", "data/mnist/train-images-idx3-ubyte"},
          {"train_labels", "data/mnist/train-labels-idx1-ubyte"},
          {"test_images", "data/mnist/t10k-images-idx3-ubyte"},
          {"test_labels", "data/mnist/t10k-labels-idx1-ubyte"},
          {"cifar_train", Json::array()},
          {"cifar_test", Json::array()},
          {"train_subset", 0},
          {"test_subset", 0}};
}

Json autoencoder_defaults() {
  return {{"filters", {16, 8, 8}},
          {"kernel", 3},
          {"epochs", 12},
          {"batch_size", 32},
          {"learning_rate", 1e-3},
          {"train_subset", 4000},
          {"checkpoint", ""}};
}

Json mlp(const std::vector<int>& hidden, const std::vector<double>& gaussian_rates = {}) {
  Json layers = Json::array();
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    if (i < gaussian_rates.size() && gaussian_rates[i] > 0.0)
      layers.push_back(layer("dense", hidden[i], "relu", "gaussian", gaussian_rates[i]));
    else
      layers.push_back(layer("dense", hidden[i], "relu"));
  }
  layers.push_back(layer("dense", 10, "softmax"));
  return layers;
}

Json cnn_layers() {
  Json conv = {{"kind", "conv2d"}, {"units", 32}, {"kernel", 3}, {"activation", "relu"}};
  Json pool = {{"kind", "maxpool2d"}, {"pool", 2}, {"noise", {{"kind", "bernoulli"}, {"rate", 0.2}}}};
  return Json::array({conv, conv, pool, conv, conv, pool, {{"kind", "flatten"}},
                      layer("dense", 128, "relu", "bernoulli", 0.5), layer("dense", 10, "softmax")});
}

}  // namespace

Json parse_json_strict(const std::string& text, const std::string& source) {
  std::vector<Frame> stack;
  auto bump = [&] {
    if (!stack.empty() && !stack.back().object) ++stack.back().index;
  };
  Json::parser_callback_t cb = [&](int, Json::parse_event_t ev, Json& parsed) {
    switch (ev) {
      case Json::parse_event_t::object_start:
        bump();
        stack.push_back({true, {}, {}, -1});
        break;
      case Json::parse_event_t::array_start:
        bump();
        stack.push_back({false, {}, {}, -1});
        break;
      case Json::parse_event_t::key: {
        const std::string k = parsed.get<std::string>();
        Frame& f = stack.back();
        if (!f.keys.insert(k).second)
          throw ConfigError(source + ": " + frames_path(stack, stack.size() - 1) + "/" + k + ": duplicate key");
        f.key = k;
        break;
      }
      case Json::parse_event_t::value:
        bump();
        break;
      case Json::parse_event_t::object_end:
      case Json::parse_event_t::array_end:
        stack.pop_back();
        break;
    }
    return true;
  };
  try {
    return Json::parse(text, cb);
  } catch (const Json::parse_error& e) {
    throw ConfigError(source + ": " + e.what());
  }
}

Json load_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_json_strict(ss.str(), path);
}

Json default_config(const std::string& experiment) {
  Json c{{"experiment", experiment}, {"seed", 1}, {"output_dir", "runs"}};
  if (experiment == "toy1d") {
    c["network"] = {{"layers", {layer("dense", 128, "sigmoid", "gaussian", 0.5), layer("dense", 2, "softmax")}}};
    c["train"] = train_defaults(20, 1e-3, 5);
    c["dataset"] = {{"model", GaussianCategoryModel::toy1d().to_json()}, {"n_train", 10000}, {"n_test", 10000}};
    c["metrics"] = {{"layer", 0},
                    {"grid", {{"min", -1.0}, {"max", 1.0}, {"points", 41}}},
                    {"posterior_points", 101},
                    {"fisher_points", 21},
                    {"within_posterior", 0.8},
                    {"skl_points", 20},
                    {"skl_delta", 1e-3},
                    {"coding_cost_samples", 2000},
                    {"inversion", inversion_defaults(10000)}};
  } else if (experiment == "toy2d") {
    c["network"] = {{"layers", {layer("dense", 128, "relu", "bernoulli", 0.2), layer("dense", 2, "softmax")}}};
    c["train"] = train_defaults(20, 1e-3, 5);
    c["train"]["snapshots"] = {1, 4, 20};
    c["dataset"] = {{"model", GaussianCategoryModel::toy2d().to_json()}, {"n_train", 10000}, {"n_test", 10000}};
    c["metrics"] = {{"layer", 0},
                    {"grid", {{"min", -1.0}, {"max", 1.0}, {"points", 5}}},
                    {"ambiguous_posterior", 0.7},
                    {"ellipse_sigmas", 2.0},
                    {"inversion", inversion_defaults(100)}};
  } else if (experiment == "mnist-continuum" || experiment == "mnist-depth") {
    const bool depth = experiment == "mnist-depth";
    c["network"] = {{"layers", mlp(depth ? std::vector<int>{256, 256, 256} : std::vector<int>{256, 256})},
                    {"autoencoder", autoencoder_defaults()}};
    c["train"] = train_defaults(15, 1e-3, 1);
    c["dataset"] = mnist_dataset();
    if (depth)
      c["metrics"] = {{"per_class", 25},   {"continuum_length", 50}, {"threshold", 0.95},
                      {"margin", 5},       {"min_count", 30},        {"bootstrap", 1000},
                      {"level", 0.95},     {"shuffle_control", true}};
    else
      c["metrics"] = {{"source_class", 4}, {"target_class", 9}, {"pair_index", 0}, {"continuum_length", 16}};
  } else if (experiment == "categoricality" || experiment == "categoricality-ablation") {
    c["network"] = {{"layers", mlp({1024, 1024, 1024}, {0.1, 0.2, 0.4})},
                    {"cnn_layers", cnn_layers()},
                    {"include_cnn", false}};
    c["train"] = train_defaults(6, 1e-3, 1);
    c["dataset"] = mnist_dataset();
    c["metrics"] = {{"pairs", 1000}, {"bootstrap", 1000}};
  } else if (experiment == "dropout-sweep") {
    c["network"] = {{"hidden", {256, 256}}, {"activation", "relu"}, {"noise", "bernoulli"}};
    c["train"] = train_defaults(12, 1e-3, 2);
    c["dataset"] = mnist_dataset();
    c["metrics"] = {{"rates", {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7}},
                    {"fixed_rate", 0.2},
                    {"best_k", 10},
                    {"bootstrap", 1000}};
  } else {
    throw ConfigError("/experiment: unknown experiment '" + experiment + "'");
  }
  return c;
}

Json resolve_config(const Json& user) {
  if (!user.is_object()) throw ConfigError("/: config must be a JSON object");
  if (!user.contains("experiment")) throw ConfigError("/experiment: missing");
  if (!user["experiment"].is_string()) throw ConfigError("/experiment: expected string");
  Json resolved = default_config(user["experiment"].get<std::string>());
  merge_into(resolved, user, "");

  // validate everything that is interpreted later, so errors surface before any work
  if (resolved["network"].contains("layers")) parse_layers(resolved["network"]["layers"]);
  if (resolved["network"].contains("cnn_layers")) parse_layers(resolved["network"]["cnn_layers"], "/network/cnn_layers");
  parse_train(resolved["train"], 0);
  if (resolved["metrics"].contains("inversion")) parse_inversion(resolved["metrics"]["inversion"]);
  if (resolved["dataset"].contains("model")) {
    try {
      GaussianCategoryModel::from_json(resolved["dataset"]["model"]);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("/dataset/model: ") + e.what());
    }
  }
  if (resolved["dataset"].contains("format")) {
    const auto f = resolved["dataset"]["format"].get<std::string>();
    if (f != "idx" && f != "cifar10") throw ConfigError("/dataset/format: expected \"idx\" or \"cifar10\"");
  }
  return resolved;
}

Json load_config(const std::string& path) { return resolve_config(load_json_file(path)); }

std::vector<LayerSpec> parse_layers(const Json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ConfigError(path + ": expected a non-empty array of layers");
  static const std::set<std::string> allowed{"kind", "units", "kernel", "stride", "padding",
                                             "pool", "activation", "noise"};
  std::vector<LayerSpec> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = path + "/" + std::to_string(i);
    const Json& l = j[i];
    if (!l.is_object()) throw ConfigError(p + ": expected object");
    for (auto it = l.begin(); it != l.end(); ++it)
      if (!allowed.count(it.key())) throw ConfigError(p + "/" + it.key() + ": unknown key");
    LayerSpec s;
    try {
      s.kind = parse_layer_kind(get<std::string>(l, "kind", p));
      if (l.contains("activation")) s.activation = parse_activation(get<std::string>(l, "activation", p));
      if (l.contains("units")) s.units = get<int>(l, "units", p);
      if (l.contains("kernel")) s.kernel_h = s.kernel_w = get<int>(l, "kernel", p);
      if (l.contains("stride")) s.stride = get<int>(l, "stride", p);
      if (l.contains("pool")) s.pool = get<int>(l, "pool", p);
      if (l.contains("padding")) {
        const auto pad = get<std::string>(l, "padding", p);
        if (pad != "same" && pad != "valid") throw ConfigError("padding must be \"same\" or \"valid\"");
        s.padding = pad == "same" ? Padding::Same : Padding::Valid;
      }
      if (l.contains("noise")) {
        const Json& n = l["noise"];
        if (!n.is_object()) throw ConfigError("noise must be an object");
        for (auto it = n.begin(); it != n.end(); ++it)
          if (it.key() != "kind" && it.key() != "rate") throw ConfigError("noise/" + it.key() + ": unknown key");
        s.noise.kind = parse_noise_kind(get<std::string>(n, "kind", p + "/noise"));
        s.noise.rate = n.contains("rate") ? get<double>(n, "rate", p + "/noise") : 0.0;
        if (!(s.noise.rate >= 0.0 && s.noise.rate < 1.0)) throw ConfigError("noise rate must be in [0, 1)");
      }
    } catch (const ConfigError& e) {
      const std::string what = e.what();
      throw ConfigError(what.rfind(p, 0) == 0 ? what : p + ": " + what);
    }
    out.push_back(s);
  }
  return out;
}

Json layers_to_json(const std::vector<LayerSpec>& specs) {
  Json out = Json::array();
  for (const auto& s : specs) {
    Json l{{"kind", to_string(s.kind)}, {"activation", to_string(s.activation)}};
    switch (s.kind) {
      case LayerKind::Dense:
        l["units"] = s.units;
        break;
      case LayerKind::Conv2D:
        l["units"] = s.units;
        l["kernel"] = s.kernel_h;
        l["stride"] = s.stride;
        l["padding"] = s.padding == Padding::Same ? "same" : "valid";
        break;
      case LayerKind::MaxPool2D:
      case LayerKind::UpSample2D:
        l["pool"] = s.pool;
        break;
      default:
        break;
    }
    if (s.noise.kind != NoiseKind::None) l["noise"] = {{"kind", to_string(s.noise.kind)}, {"rate", s.noise.rate}};
    out.push_back(l);
  }
  return out;
}

TrainConfig parse_train(const Json& t, std::uint64_t seed) {
  const std::string p = "/train";
  TrainConfig c;
  c.epochs = get<int>(t, "epochs", p);
  c.batch_size = get<int>(t, "batch_size", p);
  c.learning_rate = get<double>(t, "learning_rate", p);
  try {
    c.loss = parse_loss(get<std::string>(t, "loss", p));
  } catch (const ConfigError& e) {
    throw ConfigError(p + "/loss: " + e.what());
  }
  c.adam.beta1 = get<double>(t["adam"], "beta1", p + "/adam");
  c.adam.beta2 = get<double>(t["adam"], "beta2", p + "/adam");
  c.adam.epsilon = get<double>(t["adam"], "epsilon", p + "/adam");
  c.seed = seed;
  if (c.epochs < 0) throw ConfigError(p + "/epochs: must be >= 0");
  if (c.batch_size < 1) throw ConfigError(p + "/batch_size: must be >= 1");
  if (!(c.learning_rate > 0.0)) throw ConfigError(p + "/learning_rate: must be > 0");
  if (get<int>(t, "trials", p) < 1) throw ConfigError(p + "/trials: must be >= 1");
  return c;
}

InversionOptions parse_inversion(const Json& j) {
  const std::string p = "/metrics/inversion";
  InversionOptions o;
  const auto m = get<std::string>(j, "method", p);
  if (m == "levenberg_marquardt")
    o.method = InversionMethod::LevenbergMarquardt;
  else if (m == "adam")
    o.method = InversionMethod::Adam;
  else
    throw ConfigError(p + "/method: expected \"levenberg_marquardt\" or \"adam\"");
  o.max_iterations = get<int>(j, "max_iterations", p);
  o.tolerance = get<double>(j, "tolerance", p);
  o.adam_learning_rate = get<double>(j, "adam_learning_rate", p);
  o.adam_max_iterations = get<int>(j, "adam_max_iterations", p);
  if (get<int>(j, "realizations", p) < 1) throw ConfigError(p + "/realizations: must be >= 1");
  return o;
}

}  // namespace catgeo
