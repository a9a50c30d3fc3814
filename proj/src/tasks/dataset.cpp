#include "ngraph/tasks/dataset.hpp"

#include <array>
#include <cstdio>
#include <filesystem>
#include <map>

#include "ngraph/graphbuild/io.hpp"
#include "ngraph/netzoo/serialize.hpp"
#include "ngraph/util/json_fields.hpp"

namespace ngraph::tasks {

namespace fs = std::filesystem;
using util::FormatError;
using util::Json;

namespace {

constexpr std::array<std::pair<TargetKind, std::string_view>, 3> kKinds{
    {{TargetKind::class_label, "class-label"}, {TargetKind::scalar, "scalar"}, {TargetKind::deltas, "deltas"}}};
constexpr std::array<std::pair<Split, std::string_view>, 3> kSplits{
    {{Split::train, "train"}, {Split::val, "val"}, {Split::test, "test"}}};

std::string record_stem(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05zu", i);
  return buf;
}

}  // namespace

std::string_view to_string(TargetKind k) {
  for (auto& [v, n] : kKinds)
    if (v == k) return n;
  return "?";
}

std::string_view to_string(Split s) {
  for (auto& [v, n] : kSplits)
    if (v == s) return n;
  return "?";
}

TargetKind parse_target_kind(std::string_view s) {
  for (auto& [v, n] : kKinds)
    if (n == s) return v;
  throw TaskError("unknown target kind '" + std::string(s) + "'");
}

Split parse_split(std::string_view s) {
  for (auto& [v, n] : kSplits)
    if (n == s) return v;
  throw TaskError("unknown split '" + std::string(s) + "' (expected train, val or test)");
}

std::vector<std::size_t> TaskDataset::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (records[i].split == s) out.push_back(i);
  return out;
}

void check_dataset(const TaskDataset& d) {
  std::map<std::size_t, Split> lineage_split;
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    const Record& r = d.records[i];
    std::string where = "record " + std::to_string(i);
    auto [it, fresh] = lineage_split.emplace(r.lineage, r.split);
    if (!fresh && it->second != r.split)
      throw TaskError(where + ": lineage " + std::to_string(r.lineage) + " appears in both " +
                      std::string(to_string(it->second)) + " and " + std::string(to_string(r.split)));
    switch (d.kind) {
      case TargetKind::class_label:
        if (r.label >= d.num_classes)
          throw TaskError(where + ": label " + std::to_string(r.label) + " outside " + std::to_string(d.num_classes) +
                          " classes");
        break;
      case TargetKind::scalar:
        if (!std::isfinite(r.value)) throw TaskError(where + ": non-finite target");
        break;
      case TargetKind::deltas:
        if (r.edge_delta.size() != r.graph.num_edges() || r.node_delta.size() != r.graph.num_nodes)
          throw TaskError(where + ": delta targets do not match the graph (" + std::to_string(r.edge_delta.size()) +
                          " edges, " + std::to_string(r.node_delta.size()) + " nodes)");
        break;
    }
  }
}

void save_dataset(const TaskDataset& d, const std::string& dir) {
  check_dataset(d);
  fs::create_directories(fs::path(dir) / "graphs");
  fs::create_directories(fs::path(dir) / "nets");
  Json doc;
  doc["version"] = 1;
  doc["task"] = d.task;
  doc["target_kind"] = std::string(to_string(d.kind));
  doc["num_classes"] = d.num_classes;
  doc["seed"] = std::to_string(d.seed);  // u64 does not survive a JSON double
  doc["records"] = Json::array();
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    const Record& r = d.records[i];
    std::string stem = record_stem(i);
    std::string graph_file = "graphs/" + stem + ".ngraph", net_file = "nets/" + stem + ".json";
    graph::save_graph(r.graph, (fs::path(dir) / graph_file).string());
    zoo::save_checkpoint(r.net, (fs::path(dir) / net_file).string());
    Json jr{{"graph", graph_file}, {"net", net_file}, {"split", std::string(to_string(r.split))}, {"lineage", r.lineage}};
    switch (d.kind) {
      case TargetKind::class_label: jr["label"] = r.label; break;
      case TargetKind::scalar: jr["value"] = util::encode_doubles(std::vector<double>{r.value}); break;
      case TargetKind::deltas:
        jr["edge_delta"] = util::encode_doubles(r.edge_delta);
        jr["node_delta"] = util::encode_doubles(r.node_delta);
        break;
    }
    doc["records"].push_back(std::move(jr));
  }
  util::write_file((fs::path(dir) / "manifest.json").string(), doc.dump(1));
}

TaskDataset load_dataset(const std::string& dir) {
  fs::path root(dir);
  if (!fs::exists(root / "manifest.json")) throw FormatError(dir + ": no manifest.json");
  Json doc = util::parse_json(util::read_file((root / "manifest.json").string()), "manifest.json");
  if (util::size_field(doc, "version", "") != 1) throw FormatError("version: unsupported dataset version");
  TaskDataset d;
  d.task = util::string_field(doc, "task", "");
  try {
    d.kind = parse_target_kind(util::string_field(doc, "target_kind", ""));
  } catch (const TaskError& e) {
    throw FormatError(std::string("target_kind: ") + e.what());
  }
  d.num_classes = util::size_field(doc, "num_classes", "");
  std::string seed = util::string_field(doc, "seed", "");
  try {
    std::size_t used = 0;
    d.seed = std::stoull(seed, &used);
    if (used != seed.size()) throw std::invalid_argument(seed);
  } catch (const std::exception&) {
    throw FormatError("seed: '" + seed + "' is not an unsigned integer");
  }
  const Json& recs = util::array_field(doc, "records", "");
  for (std::size_t i = 0; i < recs.size(); ++i) {
    std::string path = "records[" + std::to_string(i) + "]";
    const Json& jr = recs[i];
    Record r;
    std::string graph_file = util::string_field(jr, "graph", path);
    std::string net_file = util::string_field(jr, "net", path);
    for (const auto& f : {graph_file, net_file})
      if (fs::path(f).is_absolute() || f.find("..") != std::string::npos)
        throw FormatError(path + ": file '" + f + "' escapes the dataset directory");
    r.graph = graph::load_graph((root / graph_file).string());
    r.net = zoo::load_checkpoint((root / net_file).string());
    try {
      r.split = parse_split(util::string_field(jr, "split", path));
    } catch (const TaskError& e) {
      throw FormatError(path + ".split: " + e.what());
    }
    r.lineage = util::size_field(jr, "lineage", path);
    switch (d.kind) {
      case TargetKind::class_label: r.label = util::size_field(jr, "label", path); break;
      case TargetKind::scalar: {
        auto v = util::decode_doubles(util::string_field(jr, "value", path), path + ".value");
        if (v.size() != 1) throw FormatError(path + ".value: expected one number");
        r.value = v[0];
        break;
      }
      case TargetKind::deltas:
        r.edge_delta = util::decode_doubles(util::string_field(jr, "edge_delta", path), path + ".edge_delta");
        r.node_delta = util::decode_doubles(util::string_field(jr, "node_delta", path), path + ".node_delta");
        break;
    }
    d.records.push_back(std::move(r));
  }
  try {
    check_dataset(d);
  } catch (const TaskError& e) {
    throw FormatError(dir + ": " + e.what());
  }
  return d;
}

}  // namespace ngraph::tasks
