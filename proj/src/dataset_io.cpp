#include "dider/dataset_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "dider/errors.hpp"

namespace dider {
inline namespace DIDER_ABI {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
  return v;
}

void write_floats(const fs::path& path, const std::vector<float>& values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (float f : values) {
    const std::uint32_t le = to_little(std::bit_cast<std::uint32_t>(f));
    out.write(reinterpret_cast<const char*>(&le), sizeof le);
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<float> read_floats(const fs::path& path, std::size_t expected) {
  const auto bytes = fs::file_size(path);
  if (bytes != expected * sizeof(float)) {
    throw CorruptDataError("corrupt dataset: " + path.filename().string() + " has " + std::to_string(bytes) +
                           " bytes but the manifest shape needs " + std::to_string(expected * sizeof(float)));
  }
  std::vector<float> values(expected);
  std::ifstream in(path, std::ios::binary);
  for (float& f : values) {
    std::uint32_t le = 0;
    in.read(reinterpret_cast<char*>(&le), sizeof le);
    f = std::bit_cast<float>(to_little(le));
  }
  if (!in) throw CorruptDataError("corrupt dataset: short read from " + path.string());
  return values;
}

json sim_config_json(const SimConfig& c) {
  return json{{"n_agents", c.n_agents},
              {"horizon", c.horizon},
              {"n_samples", c.n_samples},
              {"dt", c.dt},
              {"interaction_radius", c.interaction_radius},
              {"repulsion_strength", c.repulsion_strength},
              {"init_speed_range", {c.init_speed_range[0], c.init_speed_range[1]}},
              {"init_box", c.init_box},
              {"min_sq_distance", c.min_sq_distance},
              {"label_mode", to_string(c.label_mode)},
              {"seed", c.seed}};
}

void write_manifest(const fs::path& path, const json& manifest) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << manifest.dump(2) << '\n';
}

json states_manifest(std::size_t s, std::size_t t, std::size_t n, const Normalization& norm) {
  json m;
  m["format"] = "dider-trajectories";
  m["version"] = kDatasetVersion;
  m["endianness"] = "little";
  m["dtype"] = {{"states", "f32"}};
  m["shape"] = {{"states", {s, t, n, 4}}};
  m["n_agents"] = n;
  m["horizon"] = t;
  m["feature_dim"] = 4;
  m["normalization"] = {{"position_offset", {norm.position_offset[0], norm.position_offset[1]}},
                        {"scale", norm.scale}};
  return m;
}

}  // namespace

void write_dataset(const TrajectoryBatch& batch, const fs::path& dir, const DatasetProvenance& provenance) {
  if (batch.feature_dim != 4) throw ContractError("write_dataset: feature_dim must be 4");
  if (batch.states.size() != batch.n_samples * batch.horizon * batch.n_agents * batch.feature_dim) {
    throw ContractError("write_dataset: states length does not match the batch shape");
  }
  fs::create_directories(dir);
  json m = states_manifest(batch.n_samples, batch.horizon, batch.n_agents, batch.normalization);
  m["edge_types"] = batch.edge_types;
  m["split"] = provenance.split;
  if (provenance.seed) m["seed"] = *provenance.seed;
  if (provenance.generator) m["generator"] = sim_config_json(*provenance.generator);
  write_floats(dir / "states.f32", batch.states);
  if (batch.edge_labels) {
    m["dtype"]["edges"] = "u8";
    m["shape"]["edges"] = {batch.n_samples, batch.horizon, batch.n_edges()};
    std::ofstream out(dir / "edges.u8", std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(batch.edge_labels->data()),
              static_cast<std::streamsize>(batch.edge_labels->size()));
    if (!out) throw std::runtime_error("write failed: edges.u8");
  } else {
    fs::remove(dir / "edges.u8");
  }
  write_manifest(dir / "manifest.json", m);
}

void write_states(const fs::path& dir, std::size_t n_samples, std::size_t horizon, std::size_t n_agents,
                  const std::vector<float>& states, const Normalization& normalization) {
  if (states.size() != n_samples * horizon * n_agents * 4) throw ContractError("write_states: shape mismatch");
  fs::create_directories(dir);
  json m = states_manifest(n_samples, horizon, n_agents, normalization);
  m["split"] = "predictions";
  write_floats(dir / "states.f32", states);
  fs::remove(dir / "edges.u8");
  write_manifest(dir / "manifest.json", m);
}

TrajectoryBatch read_dataset(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) throw std::runtime_error("no manifest.json in " + dir.string());
  json m;
  try {
    std::ifstream in(manifest_path);
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw CorruptDataError("corrupt dataset manifest: " + std::string(e.what()));
  }
  try {
    const int version = m.at("version").get<int>();
    if (version != kDatasetVersion) {
      throw VersionError("dataset version " + std::to_string(version) + " is not supported (expected " +
                         std::to_string(kDatasetVersion) + ")");
    }
    if (m.value("endianness", "little") != "little") throw CorruptDataError("dataset: unsupported endianness");
    const auto shape = m.at("shape").at("states").get<std::vector<std::size_t>>();
    if (shape.size() != 4 || shape[3] != 4) throw CorruptDataError("dataset: states shape must be [S,T,N,4]");

    TrajectoryBatch b;
    b.n_samples = shape[0];
    b.horizon = shape[1];
    b.n_agents = shape[2];
    b.feature_dim = shape[3];
    b.edge_types = m.value("edge_types", std::size_t{2});
    if (m.contains("normalization")) {
      const auto& nm = m["normalization"];
      const auto off = nm.at("position_offset").get<std::vector<double>>();
      if (off.size() != 2) throw CorruptDataError("dataset: normalization offset must have 2 entries");
      b.normalization = {{off[0], off[1]}, nm.at("scale").get<double>()};
    }
    b.states = read_floats(dir / "states.f32", b.n_samples * b.horizon * b.n_agents * b.feature_dim);
    if (m.at("shape").contains("edges")) {
      const auto es = m["shape"]["edges"].get<std::vector<std::size_t>>();
      if (es.size() != 3 || es[0] != b.n_samples || es[1] != b.horizon || es[2] != b.n_edges()) {
        throw CorruptDataError("dataset: edges shape inconsistent with states shape");
      }
      const std::size_t expected = es[0] * es[1] * es[2];
      const fs::path ep = dir / "edges.u8";
      if (!fs::exists(ep)) throw CorruptDataError("corrupt dataset: manifest lists edges but edges.u8 is missing");
      const auto bytes = fs::file_size(ep);
      if (bytes != expected) {
        throw CorruptDataError("corrupt dataset: edges.u8 has " + std::to_string(bytes) +
                               " bytes but the manifest shape needs " + std::to_string(expected));
      }
      std::vector<std::uint8_t> labels(expected);
      std::ifstream in(ep, std::ios::binary);
      in.read(reinterpret_cast<char*>(labels.data()), static_cast<std::streamsize>(expected));
      if (!in) throw CorruptDataError("corrupt dataset: short read from edges.u8");
      for (auto v : labels) {
        if (v >= b.edge_types) throw CorruptDataError("corrupt dataset: edge label out of range");
      }
      b.edge_labels = std::move(labels);
    }
    return b;
  } catch (const json::exception& e) {
    throw CorruptDataError("corrupt dataset manifest: " + std::string(e.what()));
  }
}

}  // namespace DIDER_ABI
}  // namespace dider
