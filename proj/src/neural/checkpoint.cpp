#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "specshape/error.hpp"
#include "specshape/neural.hpp"

namespace specshape::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint blobs are written in native little-endian order");

namespace {

nlohmann::json tensor_list(const std::vector<std::string>& names, const std::vector<Matrix<float>>& tensors) {
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    out.push_back({{"name", names[i]}, {"shape", {tensors[i].rows(), tensors[i].cols()}}});
  }
  return out;
}

void read_blob(std::istream& in, Matrix<float>& m, const std::string& name, const std::string& tensor) {
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(float) * m.size()));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(float) * m.size())) {
    throw DataError(name + ": checkpoint truncated while reading " + tensor);
  }
}

void check_shapes(const nlohmann::json& listed, const std::vector<Matrix<float>>& tensors, const std::string& where) {
  if (listed.size() != tensors.size()) throw DataError(where + ": tensor count does not match the layer spec");
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto shape = listed[i].at("shape");
    if (shape[0].get<long>() != tensors[i].rows() || shape[1].get<long>() != tensors[i].cols()) {
      throw DataError(where + ": tensor " + listed[i].at("name").get<std::string>() +
                      " has a shape that does not match the layer spec");
    }
  }
}

}  // namespace

void write_checkpoint(std::ostream& out, const nlohmann::json& metadata,
                      const std::vector<std::pair<std::string, const Net<float>*>>& nets) {
  nlohmann::json manifest;
  manifest["format"] = "specshape-checkpoint";
  manifest["version"] = 1;
  manifest["metadata"] = metadata;
  manifest["nets"] = nlohmann::json::array();
  for (const auto& [name, net] : nets) {
    manifest["nets"].push_back({{"name", name},
                                {"seed", net->seed()},
                                {"layers", to_json(net->spec())},
                                {"parameters", tensor_list(net->parameter_names(), net->parameters())},
                                {"buffers", tensor_list(net->buffer_names(), net->buffers())}});
  }
  out << manifest.dump() << '\n';
  for (const auto& entry : nets) {
    const Net<float>& net = *entry.second;
    for (const auto* group : {&net.parameters(), &net.buffers()}) {
      for (const auto& m : *group) {
        out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(sizeof(float) * m.size()));
      }
    }
  }
  if (!out) throw DataError("failed writing checkpoint");
}

Checkpoint read_checkpoint(std::istream& in, const std::string& name) {
  std::string header;
  if (!std::getline(in, header)) throw DataError(name + ": empty checkpoint");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(header);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(name + ": checkpoint manifest, byte " + std::to_string(e.byte) + ": " + e.what());
  }
  if (manifest.value("format", "") != "specshape-checkpoint") throw DataError(name + ": not a specshape checkpoint");

  Checkpoint ckpt;
  ckpt.metadata = manifest.value("metadata", nlohmann::json::object());
  try {
    for (const auto& entry : manifest.at("nets")) {
      const std::string net_name = entry.at("name").get<std::string>();
      Net<float> net(netspec_from_json(entry.at("layers")), entry.at("seed").get<std::uint64_t>());
      const std::string where = name + ": net '" + net_name + "'";
      check_shapes(entry.at("parameters"), net.parameters(), where);
      check_shapes(entry.at("buffers"), net.buffers(), where);
      ckpt.nets.emplace(net_name, std::move(net));
    }
    // Blobs follow in manifest order.
    for (const auto& entry : manifest.at("nets")) {
      Net<float>& net = ckpt.nets.at(entry.at("name").get<std::string>());
      const auto pnames = net.parameter_names();
      for (std::size_t i = 0; i < net.parameters().size(); ++i) read_blob(in, net.parameters()[i], name, pnames[i]);
      const auto bnames = net.buffer_names();
      for (std::size_t i = 0; i < net.buffers().size(); ++i) read_blob(in, net.buffers()[i], name, bnames[i]);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(name + ": checkpoint manifest: " + e.what());
  }
  if (in.peek() != std::char_traits<char>::eof()) throw DataError(name + ": trailing bytes after checkpoint tensors");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& metadata,
                     const std::vector<std::pair<std::string, const Net<float>*>>& nets) {
  // Write beside the target and rename, so readers never see a partial file.
  const auto tmp = std::filesystem::path(path).concat(".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot open " + tmp.string() + " for writing");
    write_checkpoint(out, metadata, nets);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  return read_checkpoint(in, path.string());
}

}  // namespace specshape::nn
