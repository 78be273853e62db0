#include <fstream>

#include <json.hpp>

#include "gestboot/blob.hpp"
#include "gestboot/error.hpp"
#include "gestboot/net.hpp"

// A trained net is two files: "<path>" holds the weight/bias tensors as a
// GBT1 blob sequence in layer order, "<path>.json" the architecture and
// tensor shapes. nlohmann::json keeps object keys sorted, so repeated saves
// of the same net are byte-identical.

namespace gestboot {

namespace {

using nlohmann::json;

const char* kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv: return "conv";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kDropout: return "dropout";
    case LayerKind::kUpsample: return "upsample";
  }
  throw InvalidInputError("unknown layer kind");
}

LayerKind kind_from_name(const std::string& name) {
  if (name == "conv") return LayerKind::kConv;
  if (name == "relu") return LayerKind::kRelu;
  if (name == "dropout") return LayerKind::kDropout;
  if (name == "upsample") return LayerKind::kUpsample;
  throw FormatError("net manifest: unknown layer kind '" + name + "'");
}

}  // namespace

void save_net(const std::string& path, const NetSpec& spec, const NetParams& params) {
  spec.validate();

  json manifest;
  manifest["input_channels"] = spec.input_channels;
  json layers = json::array();
  for (const LayerSpec& layer : spec.layers) {
    json jl;
    jl["kind"] = kind_name(layer.kind);
    switch (layer.kind) {
      case LayerKind::kConv:
        jl["name"] = layer.name;
        jl["out_channels"] = layer.out_channels;
        jl["kernel"] = layer.kernel;
        jl["stride"] = layer.stride;
        jl["pad"] = layer.pad;
        break;
      case LayerKind::kDropout:
        jl["name"] = layer.name;
        jl["ratio"] = static_cast<double>(layer.ratio);
        break;
      case LayerKind::kUpsample:
        jl["factor"] = layer.factor;
        break;
      case LayerKind::kRelu:
        break;
    }
    layers.push_back(jl);
  }
  manifest["layers"] = layers;

  std::vector<unsigned char> bytes;
  json tensors = json::array();
  std::size_t conv_idx = 0;
  for (const LayerSpec& layer : spec.layers) {
    if (layer.kind != LayerKind::kConv) continue;
    if (conv_idx >= params.convs.size()) {
      throw InvalidInputError("save_net: params do not match spec");
    }
    const ConvParam<float>& p = params.convs[conv_idx++];
    TensorBlob w;
    w.dims = {static_cast<uint32_t>(p.out_channels), static_cast<uint32_t>(p.in_channels),
              static_cast<uint32_t>(p.kernel), static_cast<uint32_t>(p.kernel)};
    w.payload = p.w;
    append_blob_bytes(w, bytes);
    TensorBlob b;
    b.dims = {static_cast<uint32_t>(p.out_channels)};
    b.payload = p.b;
    append_blob_bytes(b, bytes);

    json jw;
    jw["name"] = layer.name + ".weight";
    jw["shape"] = w.dims;
    tensors.push_back(jw);
    json jb;
    jb["name"] = layer.name + ".bias";
    jb["shape"] = b.dims;
    tensors.push_back(jb);
  }
  if (conv_idx != params.convs.size()) {
    throw InvalidInputError("save_net: params do not match spec");
  }
  manifest["tensors"] = tensors;

  write_file_bytes(bytes, path);
  std::ofstream out(path + ".json", std::ios::binary);
  if (!out) throw IoError("cannot write " + path + ".json");
  out << manifest.dump(2) << "\n";
  if (!out) throw IoError("failed writing " + path + ".json");
}

TrainedNet load_net(const std::string& path) {
  std::ifstream in(path + ".json", std::ios::binary);
  if (!in) throw IoError("cannot read " + path + ".json");
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw FormatError("net manifest: " + std::string(e.what()));
  }

  TrainedNet net;
  try {
    net.spec.input_channels = manifest.at("input_channels").get<int>();
    for (const json& jl : manifest.at("layers")) {
      LayerSpec layer;
      layer.kind = kind_from_name(jl.at("kind").get<std::string>());
      switch (layer.kind) {
        case LayerKind::kConv:
          layer.name = jl.at("name").get<std::string>();
          layer.out_channels = jl.at("out_channels").get<int>();
          layer.kernel = jl.at("kernel").get<int>();
          layer.stride = jl.at("stride").get<int>();
          layer.pad = jl.at("pad").get<int>();
          break;
        case LayerKind::kDropout:
          layer.name = jl.at("name").get<std::string>();
          layer.ratio = static_cast<float>(jl.at("ratio").get<double>());
          break;
        case LayerKind::kUpsample:
          layer.factor = jl.at("factor").get<int>();
          break;
        case LayerKind::kRelu:
          break;
      }
      net.spec.layers.push_back(layer);
    }
  } catch (const json::exception& e) {
    throw FormatError("net manifest: " + std::string(e.what()));
  }
  net.spec.validate();

  const std::vector<unsigned char> bytes = read_file_bytes(path);
  std::size_t off = 0;
  int in_ch = net.spec.input_channels;
  for (const LayerSpec& layer : net.spec.layers) {
    if (layer.kind != LayerKind::kConv) continue;
    TensorBlob w = parse_blob_bytes(bytes, off);
    TensorBlob b = parse_blob_bytes(bytes, off);
    if (w.dims.size() != 4 || w.dims[0] != static_cast<uint32_t>(layer.out_channels) ||
        w.dims[1] != static_cast<uint32_t>(in_ch) ||
        w.dims[2] != static_cast<uint32_t>(layer.kernel) || w.dims[2] != w.dims[3]) {
      throw FormatError("net params: weight shape mismatch at '" + layer.name + "'");
    }
    if (b.dims.size() != 1 || b.dims[0] != static_cast<uint32_t>(layer.out_channels)) {
      throw FormatError("net params: bias shape mismatch at '" + layer.name + "'");
    }
    ConvParam<float> p;
    p.out_channels = layer.out_channels;
    p.in_channels = in_ch;
    p.kernel = layer.kernel;
    p.w = std::move(w.payload);
    p.b = std::move(b.payload);
    net.params.convs.push_back(std::move(p));
    in_ch = layer.out_channels;
  }
  if (off != bytes.size()) throw FormatError("net params: trailing bytes in " + path);
  return net;
}

}  // namespace gestboot
