#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "specshape/spectral_ae.hpp"

namespace specshape {

// Everything `train` needs:
//
//   {"family": {...}, "data": {"first_index", "count", "order", "input",
//    "cloud_fraction", "cloud_mode"}, "train": {...}, "paths": {"cache"}}
//
// Every section is optional; unknown keys at any level are errors.
struct RunConfig {
  FamilySpec family = FamilySpec::defaults(FamilyKind::blob3d);
  int first_index = 0;
  int count = 600;
  FemOrder order = FemOrder::cubic;
  InputKind input = InputKind::dense_template;
  double cloud_fraction = 0.2;
  SamplingMode cloud_mode = SamplingMode::uniform;
  TrainConfig train;
  std::string cache;  // spectrum cache directory; empty disables the disk mirror

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);

  DatasetOptions dataset_options() const;
};

std::string to_string(SamplingMode mode);
SamplingMode sampling_mode_from_string(const std::string& s);

// 16 hex digits of FNV-1a over the canonical (sorted-key) JSON dump.
std::string config_hash(const nlohmann::json& config);

// Revision the binary was built from, or "unknown".
std::string git_revision();

// {"command", "config", "config_hash", "git_revision", "seeds", "outputs"}.
nlohmann::json run_manifest(const std::string& command, const nlohmann::json& config, const nlohmann::json& seeds,
                            const nlohmann::json& outputs);
void write_run_manifest(const nlohmann::json& manifest, const std::filesystem::path& path);

// Dataset manifest written by gen-data:
//   {"family": {...}, "first_index", "count", "samples": [...], "files": [...]}
struct DataManifest {
  FamilySpec family;
  int first_index = 0;
  int count = 0;
  std::vector<FamilySample> samples;
  std::vector<std::string> files;

  nlohmann::json to_json() const;
  static DataManifest from_json(const nlohmann::json& j);
  // Reads manifest.json (given the file or its directory) and checks that
  // the family still reproduces every listed draw.
  static DataManifest load(const std::filesystem::path& path);
};

}  // namespace specshape
