#include "dsnet/config.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <set>

namespace dsnet::model {

using nlohmann::json;

std::string_view layer_kind_name(LayerKind kind) noexcept {
  switch (kind) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::separable_conv2d: return "separable_conv2d";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::relu: return "relu";
    case LayerKind::dense: return "dense";
  }
  return "unknown";
}

LayerSpec LayerSpec::conv2d(std::size_t filters, std::size_t kernel, std::size_t stride,
                            nn::Padding padding) {
  return {LayerKind::conv2d, filters, kernel, stride, padding};
}
LayerSpec LayerSpec::separable(std::size_t filters, std::size_t kernel, std::size_t stride,
                               nn::Padding padding) {
  return {LayerKind::separable_conv2d, filters, kernel, stride, padding};
}
LayerSpec LayerSpec::batchnorm() { return {LayerKind::batchnorm, 0, 0, 1, nn::Padding::same}; }
LayerSpec LayerSpec::maxpool(std::size_t window, std::size_t stride) {
  return {LayerKind::maxpool, 0, window, stride, nn::Padding::valid};
}
LayerSpec LayerSpec::relu() { return {LayerKind::relu, 0, 0, 1, nn::Padding::same}; }
LayerSpec LayerSpec::dense(std::size_t units) {
  return {LayerKind::dense, units, 0, 1, nn::Padding::same};
}

ModelConfig ModelConfig::reference() {
  using L = LayerSpec;
  ModelConfig c;
  c.blocks.push_back({L::conv2d(16), L::relu(), L::conv2d(16), L::relu(), L::maxpool()});
  for (std::size_t width : {32u, 64u, 128u, 256u}) {
    c.blocks.push_back(
        {L::separable(width), L::relu(), L::separable(width), L::relu(), L::batchnorm(), L::maxpool()});
  }
  c.head = {L::dense(512), L::relu(), L::dense(128), L::relu(), L::dense(64), L::relu(), L::dense(4)};
  return c;
}

namespace {

std::string layer_label(const std::string& where, std::size_t index, const LayerSpec& spec) {
  return where + " layer " + std::to_string(index + 1) + " (" +
         std::string(layer_kind_name(spec.kind)) + ")";
}

void check_spec(const LayerSpec& spec, const std::string& label) {
  const bool has_units = spec.kind == LayerKind::conv2d ||
                         spec.kind == LayerKind::separable_conv2d || spec.kind == LayerKind::dense;
  if (has_units && spec.units == 0) throw ConfigError(label + ": width must be >= 1");
  const bool windowed = spec.kind == LayerKind::conv2d ||
                        spec.kind == LayerKind::separable_conv2d || spec.kind == LayerKind::maxpool;
  if (windowed && spec.kernel == 0) throw ConfigError(label + ": kernel must be >= 1");
  if (windowed && spec.stride == 0) throw ConfigError(label + ": stride must be >= 1");
}

}  // namespace

std::vector<LayerInfo> describe(const ModelConfig& config) {
  std::vector<LayerInfo> out;
  if (config.input_channels == 0 || config.input_height == 0 || config.input_width == 0) {
    throw ConfigError("input extents must be >= 1");
  }
  Shape shape{config.input_channels, config.input_height, config.input_width};

  auto add = [&](const std::string& name, const LayerSpec& spec, const std::string& label) {
    check_spec(spec, label);
    LayerInfo info{name, spec, shape, {}, 0, 0};
    const bool spatial = shape.size() == 3;
    try {
      switch (spec.kind) {
        case LayerKind::conv2d:
        case LayerKind::separable_conv2d: {
          if (!spatial) throw ConfigError(label + ": needs a spatial input");
          const auto p = nn::plan_spatial(shape[1], shape[2], spec.kernel, spec.kernel,
                                          spec.stride, spec.padding);
          const std::size_t cin = shape[0], k2 = spec.kernel * spec.kernel;
          info.trainable = spec.kind == LayerKind::conv2d ? (k2 * cin + 1) * spec.units
                                                          : k2 * cin + (cin + 1) * spec.units;
          shape = {spec.units, p.out_h, p.out_w};
          break;
        }
        case LayerKind::batchnorm:
          info.trainable = 2 * shape[0];
          info.non_trainable = 2 * shape[0];
          break;
        case LayerKind::maxpool:
          if (!spatial) throw ConfigError(label + ": needs a spatial input");
          if (spec.kernel > shape[1] || spec.kernel > shape[2]) {
            throw ConfigError(label + ": window " + std::to_string(spec.kernel) +
                              " larger than input " + to_string(shape));
          }
          shape = {shape[0], (shape[1] - spec.kernel) / spec.stride + 1,
                   (shape[2] - spec.kernel) / spec.stride + 1};
          break;
        case LayerKind::relu:
          break;
        case LayerKind::dense:
          if (spatial) throw ConfigError(label + ": dense layers belong in the head");
          info.trainable = (shape[0] + 1) * spec.units;
          shape = {spec.units};
          break;
      }
    } catch (const ShapeError& e) {
      throw ConfigError(label + ": " + e.what());
    }
    info.output_shape = shape;
    out.push_back(std::move(info));
  };

  for (std::size_t b = 0; b < config.blocks.size(); ++b) {
    std::vector<std::size_t> seen(6, 0);
    const std::string where = "block " + std::to_string(b + 1);
    for (std::size_t i = 0; i < config.blocks[b].size(); ++i) {
      const auto& spec = config.blocks[b][i];
      if (spec.kind == LayerKind::dense) {
        throw ConfigError(layer_label(where, i, spec) + ": dense layers belong in the head");
      }
      const auto k = static_cast<std::size_t>(spec.kind);
      add("block" + std::to_string(b + 1) + "." + std::string(layer_kind_name(spec.kind)) + "_" +
              std::to_string(++seen[k]),
          spec, layer_label(where, i, spec));
    }
  }
  shape = {checked_element_count(shape)};
  std::vector<std::size_t> seen(6, 0);
  for (std::size_t i = 0; i < config.head.size(); ++i) {
    const auto& spec = config.head[i];
    if (spec.kind != LayerKind::dense && spec.kind != LayerKind::relu &&
        spec.kind != LayerKind::batchnorm) {
      throw ConfigError(layer_label("head", i, spec) +
                        ": only dense, relu and batchnorm are allowed after flatten");
    }
    const auto k = static_cast<std::size_t>(spec.kind);
    add("head." + std::string(layer_kind_name(spec.kind)) + "_" + std::to_string(++seen[k]), spec,
        layer_label("head", i, spec));
  }
  return out;
}

void validate(const ModelConfig& config, const ArchitectureRules& rules) {
  if (config.num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (rules.num_classes && config.num_classes != *rules.num_classes) {
    throw ConfigError("model must predict exactly " + std::to_string(*rules.num_classes) +
                      " classes, config has " + std::to_string(config.num_classes));
  }
  if (config.blocks.empty()) throw ConfigError("model needs at least one convolutional block");
  if (rules.blocks && config.blocks.size() != *rules.blocks) {
    throw ConfigError("model must have exactly " + std::to_string(*rules.blocks) +
                      " convolutional blocks, config has " + std::to_string(config.blocks.size()));
  }
  for (std::size_t b = 0; b < config.blocks.size(); ++b) {
    const auto pools = std::count_if(config.blocks[b].begin(), config.blocks[b].end(),
                                     [](const LayerSpec& s) { return s.kind == LayerKind::maxpool; });
    if (pools != 1) {
      throw ConfigError("block " + std::to_string(b + 1) + " must contain exactly one maxpool, has " +
                        std::to_string(pools));
    }
  }
  const auto dense = static_cast<std::size_t>(std::count_if(
      config.head.begin(), config.head.end(),
      [](const LayerSpec& s) { return s.kind == LayerKind::dense; }));
  if (dense == 0) throw ConfigError("head needs at least one dense layer");
  if (rules.dense_layers && dense != *rules.dense_layers) {
    throw ConfigError("head must have exactly " + std::to_string(*rules.dense_layers) +
                      " dense layers, config has " + std::to_string(dense));
  }
  if (config.head.back().kind != LayerKind::dense ||
      config.head.back().units != config.num_classes) {
    throw ConfigError("head must end with a dense layer of width num_classes (" +
                      std::to_string(config.num_classes) + ")");
  }
  describe(config);
}

ParameterCount count_parameters(const ModelConfig& config) {
  ParameterCount c;
  for (const auto& info : describe(config)) {
    c.trainable += info.trainable;
    c.non_trainable += info.non_trainable;
  }
  c.total = c.trainable + c.non_trainable;
  return c;
}

// ------------------------------------------------------------------ JSON --

namespace {

void reject_unknown(const json& obj, std::initializer_list<std::string_view> allowed,
                    const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + ": key '" + key + "' has the wrong type");
  }
}

std::size_t get_size(const json& obj, const char* key, std::size_t fallback,
                     const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    throw ConfigError(where + ": key '" + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

LayerSpec parse_layer(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
    throw ConfigError(where + ": layer needs a string 'type'");
  }
  const auto type = j["type"].get<std::string>();
  auto padding = [&](nn::Padding fallback) {
    const auto p = get_or<std::string>(j, "padding", fallback == nn::Padding::same ? "same" : "valid", where);
    if (p == "same") return nn::Padding::same;
    if (p == "valid") return nn::Padding::valid;
    throw ConfigError(where + ": padding must be 'same' or 'valid', got '" + p + "'");
  };
  if (type == "conv2d" || type == "separable_conv2d") {
    reject_unknown(j, {"type", "filters", "kernel", "stride", "padding"}, where);
    if (!j.contains("filters")) throw ConfigError(where + ": " + type + " needs 'filters'");
    LayerSpec s = type == "conv2d" ? LayerSpec::conv2d(0) : LayerSpec::separable(0);
    s.units = get_size(j, "filters", 0, where);
    s.kernel = get_size(j, "kernel", 3, where);
    s.stride = get_size(j, "stride", 1, where);
    s.padding = padding(nn::Padding::same);
    return s;
  }
  if (type == "batchnorm") {
    reject_unknown(j, {"type"}, where);
    return LayerSpec::batchnorm();
  }
  if (type == "relu") {
    reject_unknown(j, {"type"}, where);
    return LayerSpec::relu();
  }
  if (type == "maxpool") {
    reject_unknown(j, {"type", "window", "stride"}, where);
    return LayerSpec::maxpool(get_size(j, "window", 2, where), get_size(j, "stride", 2, where));
  }
  if (type == "dense") {
    reject_unknown(j, {"type", "units"}, where);
    if (!j.contains("units")) throw ConfigError(where + ": dense needs 'units'");
    return LayerSpec::dense(get_size(j, "units", 0, where));
  }
  throw ConfigError(where + ": unknown layer type '" + type + "'");
}

json layer_to_json(const LayerSpec& s) {
  json j;
  j["type"] = std::string(layer_kind_name(s.kind));
  switch (s.kind) {
    case LayerKind::conv2d:
    case LayerKind::separable_conv2d:
      j["filters"] = s.units;
      j["kernel"] = s.kernel;
      j["stride"] = s.stride;
      j["padding"] = s.padding == nn::Padding::same ? "same" : "valid";
      break;
    case LayerKind::maxpool:
      j["window"] = s.kernel;
      j["stride"] = s.stride;
      break;
    case LayerKind::dense:
      j["units"] = s.units;
      break;
    default:
      break;
  }
  return j;
}

}  // namespace

RunConfig parse_run_config(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(root,
                 {"input", "blocks", "head", "num_classes", "seed", "learning_rate", "batch_size",
                  "epochs", "adam", "batchnorm", "augment", "split_first"},
                 "config");
  RunConfig rc;
  auto& m = rc.model;
  if (root.contains("input")) {
    const auto& in = root["input"];
    reject_unknown(in, {"channels", "height", "width"}, "config.input");
    m.input_channels = get_size(in, "channels", m.input_channels, "config.input");
    m.input_height = get_size(in, "height", m.input_height, "config.input");
    m.input_width = get_size(in, "width", m.input_width, "config.input");
  }
  if (root.contains("blocks")) {
    if (!root["blocks"].is_array()) throw ConfigError("config.blocks must be an array of layer lists");
    m.blocks.clear();
    for (std::size_t b = 0; b < root["blocks"].size(); ++b) {
      const auto& jb = root["blocks"][b];
      const std::string where = "config.blocks[" + std::to_string(b) + "]";
      if (!jb.is_array()) throw ConfigError(where + " must be an array of layers");
      Block block;
      for (std::size_t i = 0; i < jb.size(); ++i) {
        block.push_back(parse_layer(jb[i], where + "[" + std::to_string(i) + "]"));
      }
      m.blocks.push_back(std::move(block));
    }
  }
  if (root.contains("head")) {
    if (!root["head"].is_array()) throw ConfigError("config.head must be an array of layers");
    m.head.clear();
    for (std::size_t i = 0; i < root["head"].size(); ++i) {
      m.head.push_back(parse_layer(root["head"][i], "config.head[" + std::to_string(i) + "]"));
    }
  }
  m.num_classes = get_size(root, "num_classes", m.num_classes, "config");

  auto& t = rc.training;
  t.seed = get_or<std::uint64_t>(root, "seed", t.seed, "config");
  t.batch_size = get_size(root, "batch_size", t.batch_size, "config");
  t.epochs = get_size(root, "epochs", t.epochs, "config");
  t.adam.learning_rate = get_or<double>(root, "learning_rate", t.adam.learning_rate, "config");
  if (root.contains("adam")) {
    const auto& a = root["adam"];
    reject_unknown(a, {"beta1", "beta2", "epsilon"}, "config.adam");
    t.adam.beta1 = get_or<double>(a, "beta1", t.adam.beta1, "config.adam");
    t.adam.beta2 = get_or<double>(a, "beta2", t.adam.beta2, "config.adam");
    t.adam.epsilon = get_or<double>(a, "epsilon", t.adam.epsilon, "config.adam");
  }
  if (root.contains("batchnorm")) {
    const auto& bn = root["batchnorm"];
    reject_unknown(bn, {"momentum", "epsilon"}, "config.batchnorm");
    t.batchnorm.momentum = get_or<double>(bn, "momentum", t.batchnorm.momentum, "config.batchnorm");
    t.batchnorm.epsilon = get_or<double>(bn, "epsilon", t.batchnorm.epsilon, "config.batchnorm");
  }
  if (t.batch_size == 0) throw ConfigError("config: batch_size must be >= 1");
  if (!(t.adam.learning_rate > 0.0)) throw ConfigError("config: learning_rate must be > 0");
  if (!(t.batchnorm.epsilon > 0.0)) throw ConfigError("config: batchnorm.epsilon must be > 0");
  if (!(t.batchnorm.momentum >= 0.0 && t.batchnorm.momentum <= 1.0)) {
    throw ConfigError("config: batchnorm.momentum must be in [0, 1]");
  }

  if (root.contains("augment")) {
    if (!root["augment"].is_array()) throw ConfigError("config.augment must be an array of names");
    std::set<Transform> seen;
    for (const auto& name : root["augment"]) {
      const auto tr = name.is_string() ? parse_transform(name.get<std::string>()) : std::nullopt;
      if (!tr) throw ConfigError("config.augment: unknown transform " + name.dump());
      if (!seen.insert(*tr).second) throw ConfigError("config.augment: duplicate " + name.dump());
      rc.data.augment.push_back(*tr);
    }
  }
  rc.data.split_first = get_or<bool>(root, "split_first", false, "config");
  return rc;
}

std::string run_config_to_json(const RunConfig& rc, int indent) {
  const auto& m = rc.model;
  const auto& t = rc.training;
  json j;
  j["input"] = {{"channels", m.input_channels}, {"height", m.input_height}, {"width", m.input_width}};
  j["blocks"] = json::array();
  for (const auto& b : m.blocks) {
    json jb = json::array();
    for (const auto& s : b) jb.push_back(layer_to_json(s));
    j["blocks"].push_back(jb);
  }
  j["head"] = json::array();
  for (const auto& s : m.head) j["head"].push_back(layer_to_json(s));
  j["num_classes"] = m.num_classes;
  j["seed"] = t.seed;
  j["batch_size"] = t.batch_size;
  j["epochs"] = t.epochs;
  j["learning_rate"] = t.adam.learning_rate;
  j["adam"] = {{"beta1", t.adam.beta1}, {"beta2", t.adam.beta2}, {"epsilon", t.adam.epsilon}};
  j["batchnorm"] = {{"momentum", t.batchnorm.momentum}, {"epsilon", t.batchnorm.epsilon}};
  j["augment"] = json::array();
  for (Transform tr : rc.data.augment) j["augment"].push_back(std::string(transform_name(tr)));
  j["split_first"] = rc.data.split_first;
  return j.dump(indent);
}

}  // namespace dsnet::model
