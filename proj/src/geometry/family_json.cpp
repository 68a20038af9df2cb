#include "specshape/error.hpp"
#include "specshape/geometry.hpp"

namespace specshape {

namespace {

template <typename F>
auto parse_field(const char* what, F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

nlohmann::json to_json(const FamilySpec& spec) {
  return {{"kind", to_string(spec.kind)},
          {"resolution", spec.resolution},
          {"seed", spec.seed},
          {"style", {{"lo", spec.style.lo}, {"hi", spec.style.hi}}},
          {"pose", {{"lo", spec.pose.lo}, {"hi", spec.pose.hi}}}};
}

FamilySpec family_spec_from_json(const nlohmann::json& j) {
  return parse_field("family spec", [&] {
    const FamilyKind kind = family_kind_from_string(j.at("kind").get<std::string>());
    FamilySpec spec = FamilySpec::defaults(kind);
    for (const auto& [key, value] : j.items()) {
      if (key == "kind") continue;
      if (key == "resolution") {
        spec.resolution = value.get<int>();
      } else if (key == "seed") {
        spec.seed = value.get<std::uint64_t>();
      } else if (key == "style" || key == "pose") {
        ParamBox& box = key == "style" ? spec.style : spec.pose;
        box.lo = value.at("lo").get<std::vector<double>>();
        box.hi = value.at("hi").get<std::vector<double>>();
        const ParamBox bounds = key == "style" ? style_bounds(kind) : pose_bounds(kind);
        if (box.lo.size() != box.hi.size() || box.lo.size() > bounds.lo.size()) {
          throw ConfigError("family " + key + " box has inconsistent lengths");
        }
        for (std::size_t i = 0; i < box.lo.size(); ++i) {
          if (box.lo[i] > box.hi[i] || box.lo[i] < bounds.lo[i] || box.hi[i] > bounds.hi[i]) {
            throw ConfigError("family " + key + " box entry " + std::to_string(i) + " is outside [" +
                              std::to_string(bounds.lo[i]) + ", " + std::to_string(bounds.hi[i]) + "]");
          }
        }
      } else {
        throw ConfigError("unknown family key '" + key + "'");
      }
    }
    return spec;
  });
}

nlohmann::json to_json(const FamilySample& sample) {
  return {{"kind", to_string(sample.kind)},
          {"resolution", sample.resolution},
          {"seed", sample.seed},
          {"style", sample.style},
          {"pose", sample.pose}};
}

FamilySample family_sample_from_json(const nlohmann::json& j) {
  return parse_field("family sample", [&] {
    FamilySample s;
    s.kind = family_kind_from_string(j.at("kind").get<std::string>());
    s.resolution = j.at("resolution").get<int>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.style = j.at("style").get<std::vector<double>>();
    s.pose = j.at("pose").get<std::vector<double>>();
    return s;
  });
}

}  // namespace specshape
