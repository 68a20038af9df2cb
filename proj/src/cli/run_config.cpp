#include "specshape/run_config.hpp"

#include <cstdio>
#include <fstream>

#include "specshape/error.hpp"

#ifndef SPECSHAPE_GIT_REVISION
#define SPECSHAPE_GIT_REVISION "unknown"
#endif

namespace specshape {

namespace {

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": byte " + std::to_string(e.byte) + ": " + e.what());
  }
}

void require_object(const nlohmann::json& j, const std::string& what) {
  if (!j.is_object()) throw ConfigError(what + " must be a JSON object");
}

}  // namespace

std::string to_string(SamplingMode mode) {
  switch (mode) {
    case SamplingMode::vertices: return "vertices";
    case SamplingMode::uniform: return "uniform";
    case SamplingMode::nonuniform: return "nonuniform";
  }
  return "uniform";
}

SamplingMode sampling_mode_from_string(const std::string& s) {
  if (s == "vertices") return SamplingMode::vertices;
  if (s == "uniform") return SamplingMode::uniform;
  if (s == "nonuniform") return SamplingMode::nonuniform;
  throw ConfigError("unknown sampling mode '" + s + "' (vertices, uniform, nonuniform)");
}

nlohmann::json RunConfig::to_json() const {
  return {{"family", specshape::to_json(family)},
          {"data",
           {{"first_index", first_index},
            {"count", count},
            {"order", to_string(order)},
            {"input", to_string(input)},
            {"cloud_fraction", cloud_fraction},
            {"cloud_mode", to_string(cloud_mode)}}},
          {"train", train.to_json()},
          {"paths", {{"cache", cache}}}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  require_object(j, "run config");
  RunConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "family") {
      c.family = family_spec_from_json(value);
    } else if (key == "train") {
      c.train = TrainConfig::from_json(value);
    } else if (key == "data") {
      require_object(value, "data section");
      try {
        for (const auto& [dk, dv] : value.items()) {
          if (dk == "first_index") c.first_index = dv.get<int>();
          else if (dk == "count") c.count = dv.get<int>();
          else if (dk == "order") c.order = fem_order_from_string(dv.get<std::string>());
          else if (dk == "input") c.input = input_kind_from_string(dv.get<std::string>());
          else if (dk == "cloud_fraction") c.cloud_fraction = dv.get<double>();
          else if (dk == "cloud_mode") c.cloud_mode = sampling_mode_from_string(dv.get<std::string>());
          else throw ConfigError("unknown data key '" + dk + "'");
        }
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("data section: ") + e.what());
      }
    } else if (key == "paths") {
      require_object(value, "paths section");
      for (const auto& [pk, pv] : value.items()) {
        if (pk != "cache") throw ConfigError("unknown paths key '" + pk + "'");
        if (!pv.is_string()) throw ConfigError("paths.cache must be a string");
        c.cache = pv.get<std::string>();
      }
    } else {
      throw ConfigError("unknown config section '" + key + "'");
    }
  }
  if (c.first_index < 0) throw ConfigError("data.first_index must be nonnegative");
  if (c.count < c.train.batch) throw ConfigError("data.count must be at least the batch size");
  if (!(c.cloud_fraction > 0.0 && c.cloud_fraction <= 1.0)) throw ConfigError("data.cloud_fraction must lie in (0, 1]");
  if (c.input == InputKind::pointcloud && c.family.kind != FamilyKind::blob3d) {
    throw ConfigError("point-cloud input needs the blob3d family");
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) { return from_json(read_json(path)); }

DatasetOptions RunConfig::dataset_options() const {
  DatasetOptions o;
  o.family = family;
  o.first_index = first_index;
  o.count = count;
  o.k = train.k;
  o.order = order;
  o.input = input;
  o.cloud_fraction = cloud_fraction;
  o.cloud_mode = cloud_mode;
  return o;
}

std::string config_hash(const nlohmann::json& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : config.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string git_revision() { return SPECSHAPE_GIT_REVISION; }

nlohmann::json run_manifest(const std::string& command, const nlohmann::json& config, const nlohmann::json& seeds,
                            const nlohmann::json& outputs) {
  return {{"command", command},
          {"config", config},
          {"config_hash", config_hash(config)},
          {"git_revision", git_revision()},
          {"seeds", seeds},
          {"outputs", outputs}};
}

void write_run_manifest(const nlohmann::json& manifest, const std::filesystem::path& path) {
  std::ofstream out(path);
  out << manifest.dump(2) << '\n';
  if (!out) throw DataError("cannot write " + path.string());
}

nlohmann::json DataManifest::to_json() const {
  nlohmann::json s = nlohmann::json::array();
  for (const auto& sample : samples) s.push_back(specshape::to_json(sample));
  return {{"family", specshape::to_json(family)},
          {"first_index", first_index},
          {"count", count},
          {"samples", s},
          {"files", files}};
}

DataManifest DataManifest::from_json(const nlohmann::json& j) {
  require_object(j, "dataset manifest");
  DataManifest m;
  try {
    m.family = family_spec_from_json(j.at("family"));
    m.first_index = j.at("first_index").get<int>();
    m.count = j.at("count").get<int>();
    for (const auto& s : j.at("samples")) m.samples.push_back(family_sample_from_json(s));
    if (j.contains("files")) m.files = j.at("files").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("dataset manifest: ") + e.what());
  }
  if (m.count < 1 || m.first_index < 0 || static_cast<int>(m.samples.size()) != m.count) {
    throw DataError("dataset manifest: count does not match the listed samples");
  }
  return m;
}

DataManifest DataManifest::load(const std::filesystem::path& path) {
  const auto file = std::filesystem::is_directory(path) ? path / "manifest.json" : path;
  DataManifest m = from_json(read_json(file));
  for (int i = 0; i < m.count; ++i) {
    const FamilySample redraw = m.family.draw(static_cast<std::uint64_t>(m.first_index + i));
    const FamilySample& listed = m.samples[i];
    if (redraw.style != listed.style || redraw.pose != listed.pose || redraw.resolution != listed.resolution ||
        redraw.seed != listed.seed) {
      throw DataError(file.string() + ": sample " + std::to_string(i) + " is not reproduced by the family spec");
    }
  }
  return m;
}

}  // namespace specshape
