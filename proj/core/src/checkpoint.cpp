#include "dsnet/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstring>

#include "dsnet/image_io.hpp"

namespace dsnet::model {

using nlohmann::json;

namespace {

constexpr std::uint8_t kMagic[4] = {'D', 'S', 'C', 'K'};
constexpr std::size_t kPrefix = 4 + 1 + 4;

struct Entry {
  std::string name;
  Tensor* tensor;
};

// Names and tensors in serialization order.
std::vector<Entry> collect(TrainState& state) {
  std::vector<Entry> out;
  auto params = state.network.parameters();
  auto buffers = state.network.buffers();
  for (const auto& p : params) out.push_back({p.name, p.value});
  for (const auto& b : buffers) out.push_back({b.name, b.tensor});
  for (std::size_t i = 0; i < params.size(); ++i) {
    out.push_back({"adam.m/" + params[i].name, &state.adam.m[i]});
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    out.push_back({"adam.v/" + params[i].name, &state.adam.v[i]});
  }
  if (state.best) {
    std::size_t i = 0;
    for (const auto& p : params) out.push_back({"best/" + p.name, &state.best->tensors[i++]});
    for (const auto& b : buffers) out.push_back({"best/" + b.name, &state.best->tensors[i++]});
  }
  return out;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const TrainState& state_in) {
  // collect() needs mutable access to enumerate slots; nothing is modified.
  auto& state = const_cast<TrainState&>(state_in);
  const auto entries = collect(state);

  json header;
  header["format"] = "dsnet-checkpoint";
  header["config"] = json::parse(run_config_to_json(state.config, -1));
  header["seed"] = state.config.training.seed;
  header["epoch"] = state.epoch;
  header["adam_step"] = state.adam.step;
  if (state.best) {
    header["best"] = {{"epoch", state.best->epoch}, {"val_accuracy", state.best->val_accuracy}};
  } else {
    header["best"] = nullptr;
  }
  json manifest = json::array();
  std::uint64_t offset = 0;
  for (const auto& e : entries) {
    manifest.push_back({{"name", e.name}, {"shape", e.tensor->shape()}, {"offset", offset}});
    offset += e.tensor->size() * 4;
  }
  header["tensors"] = std::move(manifest);
  header["data_bytes"] = offset;
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  out.push_back(kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.reserve(out.size() + offset);
  for (const auto& e : entries) {
    for (float v : e.tensor->data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

TrainState deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("not a checkpoint (bad magic)", 0);
  }
  if (bytes.size() < 5) throw FormatError("checkpoint truncated before version", bytes.size());
  if (bytes[4] != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(bytes[4]), 4);
  }
  if (bytes.size() < kPrefix) throw FormatError("checkpoint truncated in header length", bytes.size());
  const std::uint32_t header_len = get_u32(bytes.data() + 5);
  if (bytes.size() < kPrefix + header_len) {
    throw FormatError("checkpoint truncated inside JSON header", bytes.size());
  }
  json header;
  try {
    header = json::parse(bytes.begin() + kPrefix, bytes.begin() + kPrefix + header_len);
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint header is not valid JSON: ") + e.what(), kPrefix);
  }

  auto state = [&]() -> TrainState {
    try {
      if (header.value("format", "") != "dsnet-checkpoint") {
        throw FormatError("checkpoint header has the wrong format tag", kPrefix);
      }
      RunConfig rc = parse_run_config(header.at("config").dump());
      TrainState s = build_model(rc, ArchitectureRules::relaxed());
      s.epoch = header.at("epoch").get<std::size_t>();
      s.adam.step = header.at("adam_step").get<std::uint64_t>();
      if (!header.at("best").is_null()) {
        Snapshot snap;
        snap.epoch = header["best"].at("epoch").get<std::size_t>();
        snap.val_accuracy = header["best"].at("val_accuracy").get<double>();
        for (const auto& p : s.network.parameters()) snap.tensors.emplace_back(p.value->shape());
        for (const auto& b : s.network.buffers()) snap.tensors.emplace_back(b.tensor->shape());
        s.best = std::move(snap);
      }
      return s;
    } catch (const FormatError&) {
      throw;
    } catch (const std::exception& e) {
      throw FormatError(std::string("checkpoint header rejected: ") + e.what(), kPrefix);
    }
  }();

  const std::size_t data_start = kPrefix + header_len;
  const auto entries = collect(state);
  const auto& manifest = header.at("tensors");
  if (!manifest.is_array() || manifest.size() != entries.size()) {
    throw FormatError("checkpoint manifest lists " + std::to_string(manifest.size()) +
                          " tensors, model needs " + std::to_string(entries.size()),
                      kPrefix);
  }
  std::uint64_t expected_offset = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& m = manifest[i];
    try {
      if (m.at("name").get<std::string>() != entries[i].name ||
          m.at("shape").get<Shape>() != entries[i].tensor->shape() ||
          m.at("offset").get<std::uint64_t>() != expected_offset) {
        throw FormatError("checkpoint manifest entry " + std::to_string(i) + " ('" +
                              m.value("name", std::string("?")) + "') does not match the model",
                          kPrefix);
      }
    } catch (const json::exception&) {
      throw FormatError("checkpoint manifest entry " + std::to_string(i) + " is malformed", kPrefix);
    }
    expected_offset += entries[i].tensor->size() * 4;
  }
  if (header.value("data_bytes", std::uint64_t{0}) != expected_offset) {
    throw FormatError("checkpoint data_bytes does not match the manifest", kPrefix);
  }
  if (bytes.size() < data_start + expected_offset) {
    throw FormatError("checkpoint truncated: tensor data needs " +
                          std::to_string(data_start + expected_offset) + " bytes, file has " +
                          std::to_string(bytes.size()),
                      bytes.size());
  }
  if (bytes.size() > data_start + expected_offset) {
    throw FormatError("trailing bytes after checkpoint tensor data", data_start + expected_offset);
  }
  const std::uint8_t* p = bytes.data() + data_start;
  for (const auto& e : entries) {
    for (float& v : e.tensor->data()) {
      v = std::bit_cast<float>(get_u32(p));
      p += 4;
    }
  }
  return state;
}

void save_checkpoint(const TrainState& state, const std::filesystem::path& path) {
  io::write_file(path, serialize_checkpoint(state));
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(io::read_file(path));
}

}  // namespace dsnet::model
