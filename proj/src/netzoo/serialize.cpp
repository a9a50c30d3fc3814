#include "ngraph/netzoo/serialize.hpp"

#include "ngraph/util/json_fields.hpp"

namespace ngraph::zoo {

using util::FormatError;
using util::Json;

Json spec_to_json(const LayerSpec& s) {
  Json j;
  j["kind"] = std::string(to_string(s.kind));
  j["in"] = s.in_dim;
  j["out"] = s.out_dim;
  j["activation"] = std::string(to_string(s.activation));
  if (s.kernel) j["kernel"] = {s.kernel->width, s.kernel->height};
  if (s.residual_source) j["residual_source"] = *s.residual_source;
  if (s.pool) j["pool"] = true;
  if (s.kind == LayerKind::attention) {
    j["heads"] = s.heads;
    j["head_dim"] = s.head_dim;
  }
  if (s.kind == LayerKind::flatten) j["spatial"] = {s.spatial_height, s.spatial_width};
  return j;
}

LayerSpec spec_from_json(const Json& j, const std::string& path) {
  LayerSpec s;
  try {
    s.kind = parse_layer_kind(util::string_field(j, "kind", path));
    s.activation = parse_activation(util::string_field(j, "activation", path));
  } catch (const std::invalid_argument& e) {
    throw FormatError(path + ": " + e.what());
  }
  s.in_dim = util::size_field(j, "in", path);
  s.out_dim = util::size_field(j, "out", path);
  if (j.contains("kernel")) {
    const Json& k = util::array_field(j, "kernel", path);
    if (k.size() != 2) throw FormatError(path + ".kernel: expected [width, height]");
    s.kernel = KernelSize{util::as_size(k[0], path + ".kernel[0]"), util::as_size(k[1], path + ".kernel[1]")};
  }
  if (j.contains("residual_source")) s.residual_source = util::size_field(j, "residual_source", path);
  if (j.contains("pool")) s.pool = util::bool_field(j, "pool", path);
  if (j.contains("heads")) s.heads = util::size_field(j, "heads", path);
  if (j.contains("head_dim")) s.head_dim = util::size_field(j, "head_dim", path);
  if (j.contains("spatial")) {
    const Json& sp = util::array_field(j, "spatial", path);
    if (sp.size() != 2) throw FormatError(path + ".spatial: expected [height, width]");
    s.spatial_height = util::as_size(sp[0], path + ".spatial[0]");
    s.spatial_width = util::as_size(sp[1], path + ".spatial[1]");
  }
  return s;
}

std::string checkpoint_to_json(const Checkpoint& net) {
  Json doc;
  doc["version"] = 1;
  doc["spec"] = Json::array();
  doc["params"] = Json::array();
  for (const auto& s : net.spec) doc["spec"].push_back(spec_to_json(s));
  for (const auto& p : net.params) {
    Json j = Json::object();
    if (!p.weight.empty()) j["weight"] = util::encode_doubles(p.weight);
    if (!p.bias.empty()) j["bias"] = util::encode_doubles(p.bias);
    if (!p.query.empty()) j["query"] = util::encode_doubles(p.query);
    if (!p.key.empty()) j["key"] = util::encode_doubles(p.key);
    if (!p.value.empty()) j["value"] = util::encode_doubles(p.value);
    doc["params"].push_back(j);
  }
  doc["metadata"] = net.metadata;
  return doc.dump(1);
}

Checkpoint checkpoint_from_json(const std::string& text) {
  Json doc = util::parse_json(text, "checkpoint");
  if (util::size_field(doc, "version", "") != 1) throw FormatError("version: unsupported checkpoint version");
  Checkpoint net;
  const Json& spec = util::array_field(doc, "spec", "");
  for (std::size_t i = 0; i < spec.size(); ++i) net.spec.push_back(spec_from_json(spec[i], "spec[" + std::to_string(i) + "]"));
  const Json& params = util::array_field(doc, "params", "");
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::string path = "params[" + std::to_string(i) + "]";
    const Json& j = params[i];
    if (!j.is_object()) throw FormatError(path + ": expected an object");
    LayerParams p;
    auto blob = [&](const char* key, std::vector<double>& dst) {
      if (j.contains(key)) dst = util::decode_doubles(util::string_field(j, key, path), path + "." + key);
    };
    blob("weight", p.weight);
    blob("bias", p.bias);
    blob("query", p.query);
    blob("key", p.key);
    blob("value", p.value);
    net.params.push_back(std::move(p));
  }
  if (doc.contains("metadata")) {
    const Json& meta = doc["metadata"];
    if (!meta.is_object()) throw FormatError("metadata: expected an object");
    for (auto it = meta.begin(); it != meta.end(); ++it) {
      if (!it.value().is_string()) throw FormatError("metadata." + it.key() + ": expected a string");
      net.metadata[it.key()] = it.value().get<std::string>();
    }
  }
  try {
    validate(net);
  } catch (const CheckpointError& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
  return net;
}

void save_checkpoint(const Checkpoint& net, const std::string& path) { util::write_file(path, checkpoint_to_json(net)); }

Checkpoint load_checkpoint(const std::string& path) { return checkpoint_from_json(util::read_file(path)); }

}  // namespace ngraph::zoo
