#include "ngraph/trainer/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "ngraph/graphbuild/features.hpp"
#include "ngraph/tasks/inr.hpp"
#include "ngraph/tasks/metrics.hpp"
#include "ngraph/trainer/adam.hpp"
#include "ngraph/util/json_fields.hpp"

namespace ngraph::train {

using ad::Tensor;
using graph::NeuralGraph;
using tasks::Split;
using tasks::TargetKind;
using tasks::TaskDataset;
using util::Json;

namespace {

constexpr int kFormatVersion = 1;

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::size_t to_size(std::string_view key, std::string_view v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw TrainError(std::string(key) + ": expected a non-negative integer, got '" + std::string(v) + "'");
  return out;
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw TrainError(std::string(key) + ": expected an unsigned integer, got '" + std::string(v) + "'");
  return out;
}

double to_double(std::string_view key, std::string_view v) {
  try {
    return util::parse_double(v, std::string(key));
  } catch (const util::FormatError& e) {
    throw TrainError(e.what());
  }
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw TrainError(std::string(key) + ": expected true or false, got '" + std::string(v) + "'");
}

Loss resolve(Loss l, TargetKind k) {
  if (l == Loss::automatic) return k == TargetKind::class_label ? Loss::cross_entropy : k == TargetKind::scalar ? Loss::bce : Loss::mse;
  bool ok = k == TargetKind::class_label ? l == Loss::cross_entropy : k == TargetKind::scalar ? l != Loss::cross_entropy : l == Loss::mse;
  if (!ok) throw TrainError("loss " + std::string(to_string(l)) + " does not fit " + std::string(tasks::to_string(k)) + " targets");
  return l;
}

Tensor run_model(const Predictor& p, const std::vector<const NeuralGraph*>& graphs, const models::RunOptions& run) {
  models::GraphBatch b = models::make_batch(graphs, models::batch_options(p.model.config));
  return models::forward(p.model, b, run);
}

/// Output rows of the batch split back into per-graph vectors.
std::vector<std::vector<double>> split_outputs(const Predictor& p, const std::vector<const NeuralGraph*>& graphs,
                                               const Tensor& out) {
  std::vector<std::vector<double>> res;
  auto data = out.data();
  if (p.kind != TargetKind::deltas) {
    std::size_t w = out.dim(1);
    for (std::size_t g = 0; g < graphs.size(); ++g) {
      std::vector<double> row(data.begin() + static_cast<std::ptrdiff_t>(g * w),
                              data.begin() + static_cast<std::ptrdiff_t>((g + 1) * w));
      if (p.loss == Loss::bce)
        for (auto& v : row) v = 1.0 / (1.0 + std::exp(-v));
      res.push_back(std::move(row));
    }
    return res;
  }
  std::size_t edges = 0;
  for (auto* g : graphs) edges += g->num_edges();
  std::size_t eo = 0, no = edges;
  for (auto* g : graphs) {
    std::vector<double> row(data.begin() + static_cast<std::ptrdiff_t>(eo),
                            data.begin() + static_cast<std::ptrdiff_t>(eo + g->num_edges()));
    row.insert(row.end(), data.begin() + static_cast<std::ptrdiff_t>(no),
               data.begin() + static_cast<std::ptrdiff_t>(no + g->num_nodes));
    eo += g->num_edges();
    no += g->num_nodes;
    res.push_back(std::move(row));
  }
  return res;
}

std::vector<std::vector<double>> predict_prepared(const Predictor& p, const std::vector<NeuralGraph>& graphs,
                                                  std::span<const std::size_t> idx, std::size_t batch) {
  std::vector<std::vector<double>> out;
  for (std::size_t s = 0; s < idx.size(); s += batch) {
    std::vector<const NeuralGraph*> gs;
    for (std::size_t i = s; i < std::min(s + batch, idx.size()); ++i) gs.push_back(&graphs[idx[i]]);
    auto part = split_outputs(p, gs, run_model(p, gs, {}));
    for (auto& r : part) out.push_back(std::move(r));
  }
  return out;
}

std::map<std::string, double> score(const TaskDataset& d, std::span<const std::size_t> idx,
                                    const std::vector<std::vector<double>>& pred) {
  std::map<std::string, double> m;
  if (d.kind == TargetKind::class_label) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto& row = pred[i];
      auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
      if (best == d.records[idx[i]].label) ++correct;
    }
    m["accuracy"] = static_cast<double>(correct) / static_cast<double>(idx.size());
  } else if (d.kind == TargetKind::scalar) {
    std::vector<double> y, t;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      y.push_back(pred[i][0]);
      t.push_back(d.records[idx[i]].value);
    }
    m["kendall_tau"] = idx.size() >= 2 ? tasks::kendall_tau_or_zero(y, t) : 0.0;
    m["mse"] = tasks::mean_squared_error(y, t);
  } else {
    double se = 0, zero = 0, fe = 0, zfe = 0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto& r = d.records[idx[i]];
      std::span<const double> row = pred[i];
      auto ed = row.subspan(0, r.edge_delta.size()), nd = row.subspan(r.edge_delta.size());
      for (std::size_t k = 0; k < ed.size(); ++k) {
        se += (ed[k] - r.edge_delta[k]) * (ed[k] - r.edge_delta[k]);
        zero += r.edge_delta[k] * r.edge_delta[k];
      }
      for (std::size_t k = 0; k < nd.size(); ++k) {
        se += (nd[k] - r.node_delta[k]) * (nd[k] - r.node_delta[k]);
        zero += r.node_delta[k] * r.node_delta[k];
      }
      count += row.size();
      fe += tasks::edit_function_error(r, ed, nd);
      zfe += tasks::edit_function_error(r, std::vector<double>(ed.size()), std::vector<double>(nd.size()));
    }
    double n = static_cast<double>(idx.size());
    m["mse"] = se / static_cast<double>(count);
    m["zero_mse"] = zero / static_cast<double>(count);
    m["function_error"] = fe / n;
    m["zero_function_error"] = zfe / n;
  }
  return m;
}

double selection_score(TargetKind k, const std::map<std::string, double>& m) {
  switch (k) {
    case TargetKind::class_label: return m.at("accuracy");
    case TargetKind::scalar: return m.at("kendall_tau");
    case TargetKind::deltas: return -m.at("mse");
  }
  return 0.0;
}

Tensor batch_loss(const Predictor& p, const TaskDataset& d, const std::vector<std::size_t>& idx, const Tensor& out) {
  if (d.kind == TargetKind::class_label) {
    ad::Index labels;
    for (auto i : idx) labels.push_back(d.records[i].label);
    return ad::cross_entropy(out, labels);
  }
  std::vector<double> t;
  if (d.kind == TargetKind::scalar) {
    for (auto i : idx) t.push_back(d.records[i].value);
  } else {
    for (auto i : idx) t.insert(t.end(), d.records[i].edge_delta.begin(), d.records[i].edge_delta.end());
    for (auto i : idx) t.insert(t.end(), d.records[i].node_delta.begin(), d.records[i].node_delta.end());
  }
  std::size_t n = t.size();
  Tensor target = Tensor::from({n, 1}, std::move(t));
  return p.loss == Loss::bce ? ad::bce_with_logits(out, target) : ad::mse_loss(out, target);
}

Json stats_json(const std::vector<graph::BandStats>& stats) {
  Json a = Json::array();
  for (const auto& s : stats)
    a.push_back({{"weight_mean", util::encode_doubles(s.weight_mean)},
                 {"weight_std", util::encode_doubles(s.weight_std)},
                 {"bias", util::encode_doubles(std::vector<double>{s.bias_mean, s.bias_std})}});
  return a;
}

std::vector<graph::BandStats> stats_from_json(const Json& a) {
  std::vector<graph::BandStats> out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    std::string path = "stats[" + std::to_string(i) + "]";
    const Json& s = util::element(a, i, "stats");
    graph::BandStats b;
    b.weight_mean = util::decode_doubles(util::string_field(s, "weight_mean", path), path + ".weight_mean");
    b.weight_std = util::decode_doubles(util::string_field(s, "weight_std", path), path + ".weight_std");
    auto bias = util::decode_doubles(util::string_field(s, "bias", path), path + ".bias");
    if (bias.size() != 2 || b.weight_mean.size() != b.weight_std.size())
      throw util::FormatError(path + ": inconsistent statistic sizes");
    b.bias_mean = bias[0];
    b.bias_std = bias[1];
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace

std::string_view to_string(Loss l) {
  switch (l) {
    case Loss::automatic: return "auto";
    case Loss::cross_entropy: return "cross-entropy";
    case Loss::mse: return "mse";
    case Loss::bce: return "bce";
  }
  return "?";
}

Loss parse_loss(std::string_view s) {
  for (Loss l : {Loss::automatic, Loss::cross_entropy, Loss::mse, Loss::bce})
    if (to_string(l) == s) return l;
  throw TrainError("unknown loss '" + std::string(s) + "' (expected auto, cross-entropy, mse or bce)");
}

void set_option(TrainConfig& cfg, std::string_view key, std::string_view value) {
  models::ModelConfig& m = cfg.model;
  std::string k(key);
  try {
    if (k == "epochs") cfg.epochs = to_size(k, value);
    else if (k == "batch") cfg.batch = to_size(k, value);
    else if (k == "lr") cfg.lr = to_double(k, value);
    else if (k == "weight_decay") cfg.weight_decay = to_double(k, value);
    else if (k == "beta1") cfg.beta1 = to_double(k, value);
    else if (k == "beta2") cfg.beta2 = to_double(k, value);
    else if (k == "eps") cfg.eps = to_double(k, value);
    else if (k == "seed") cfg.seed = to_u64(k, value);
    else if (k == "patience") cfg.patience = to_size(k, value);
    else if (k == "loss") cfg.loss = parse_loss(value);
    else if (k == "normalize") cfg.normalize = to_bool(k, value);
    else if (k == "direction") cfg.direction = to_bool(k, value);
    else if (k == "model.kind") m.kind = models::parse_model_kind(value);
    else if (k == "model.layers") m.layers = to_size(k, value);
    else if (k == "model.node_width") m.node_width = to_size(k, value);
    else if (k == "model.edge_width") m.edge_width = to_size(k, value);
    else if (k == "model.heads") m.heads = to_size(k, value);
    else if (k == "model.dropout") m.dropout = to_double(k, value);
    else if (k == "model.head_width") m.head_width = to_size(k, value);
    else if (k == "model.activation_dim") m.activation_dim = to_size(k, value);
    else if (k == "model.position_dim") m.position_dim = to_size(k, value);
    else if (k == "model.position_slots") m.position_slots = to_size(k, value);
    else if (k == "model.probes") m.probes = to_size(k, value);
    else if (k == "model.pool_nodes") m.pool_nodes = to_bool(k, value);
    else throw TrainError("unknown option '" + k + "'");
  } catch (const models::ModelError& e) {
    throw TrainError(k + ": " + e.what());
  }
}

TrainConfig parse_train_config(std::string_view text, TrainConfig base) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::string t = trim(line);
    if (t.empty()) continue;
    auto eq = t.find('=');
    if (eq == std::string::npos) throw TrainError("line " + std::to_string(lineno) + ": expected key = value");
    try {
      set_option(base, trim(std::string_view(t).substr(0, eq)), trim(std::string_view(t).substr(eq + 1)));
    } catch (const TrainError& e) {
      throw TrainError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

NeuralGraph prepare(const Predictor& p, const NeuralGraph& raw) {
  NeuralGraph g = p.normalize ? graph::apply_layerwise_normalization(raw, p.stats) : raw;
  if (p.direction) g = graph::attach_direction_features(g);
  return g;
}

std::vector<std::vector<double>> predict(const Predictor& p, const std::vector<NeuralGraph>& raw, std::size_t batch) {
  if (batch == 0) throw TrainError("batch size must be positive");
  std::vector<NeuralGraph> graphs;
  for (const auto& g : raw) graphs.push_back(prepare(p, g));
  std::vector<std::size_t> idx(graphs.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return predict_prepared(p, graphs, idx, batch);
}

std::map<std::string, double> evaluate(const Predictor& p, const TaskDataset& d, Split split) {
  if (d.kind != p.kind) throw TrainError("predictor was trained for " + std::string(tasks::to_string(p.kind)) + " targets");
  auto idx = d.indices(split);
  if (idx.empty()) throw TrainError("no " + std::string(tasks::to_string(split)) + " records to evaluate");
  std::vector<NeuralGraph> graphs;
  for (auto i : idx) graphs.push_back(d.records[i].graph);
  return score(d, idx, predict(p, graphs));
}

void write_log_csv(const std::vector<LogRow>& rows, std::ostream& out) {
  out << "epoch,split,metric,value\n";
  for (const auto& r : rows) out << r.epoch << ',' << r.split << ',' << r.metric << ',' << util::format_double(r.value) << '\n';
}

FitResult fit(const TaskDataset& d, const TrainConfig& cfg, const std::function<void(const LogRow&)>& on_row) {
  tasks::check_dataset(d);
  if (cfg.batch == 0) throw TrainError("batch size must be positive");
  auto train_idx = d.indices(Split::train), val_idx = d.indices(Split::val), test_idx = d.indices(Split::test);
  if (train_idx.empty()) throw TrainError("dataset has no training records");
  if (d.kind == TargetKind::deltas && cfg.direction)
    throw TrainError("direction features add edges, so they cannot be used with per-parameter delta targets");

  Predictor p;
  p.kind = d.kind;
  p.loss = resolve(cfg.loss, d.kind);
  p.normalize = cfg.normalize;
  p.direction = cfg.direction;
  if (cfg.normalize) {
    std::vector<NeuralGraph> train_graphs;
    for (auto i : train_idx) train_graphs.push_back(d.records[i].graph);
    p.stats = graph::layerwise_stats(train_graphs);
  }
  std::vector<NeuralGraph> graphs;
  for (const auto& r : d.records) graphs.push_back(prepare(p, r.graph));

  models::ModelConfig mc = cfg.model;
  mc.readout = d.kind == TargetKind::deltas ? models::Readout::per_parameter : models::Readout::invariant;
  mc.out_dim = d.kind == TargetKind::class_label ? d.num_classes : 1;
  if (mc.position_dim > 0)
    for (const auto& g : graphs) mc.position_slots = std::max(mc.position_slots, g.num_position_slots());
  const NeuralGraph& g0 = graphs[train_idx.front()];
  models::InputDims dims{g0.node_dim, g0.edge_dim, g0.output_nodes().size(), mc.probes > 0 ? g0.input_dim() : 0};
  ad::Rng root(cfg.seed);
  ad::Rng init_rng = root.derive(0), order_rng = root.derive(1), drop_rng = root.derive(2);
  p.model = models::init_model(mc, dims, init_rng);

  std::vector<Tensor> params = p.model.params.tensors();
  AdamState state;
  AdamConfig adam{cfg.lr, cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay};

  FitResult res;
  auto emit = [&](std::size_t epoch, const std::string& split, const std::string& metric, double v) {
    res.log.push_back({epoch, split, metric, v});
    if (on_row) on_row(res.log.back());
  };
  std::vector<std::vector<double>> best_params;
  auto snapshot = [&] {
    best_params.clear();
    for (const auto& t : params) best_params.emplace_back(t.data().begin(), t.data().end());
  };
  res.best_val = -std::numeric_limits<double>::infinity();
  std::size_t since = 0;
  models::RunOptions run{true, &drop_rng};
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<std::size_t> order = train_idx;
    order_rng.shuffle(order);
    double total = 0.0;
    for (std::size_t s = 0; s < order.size(); s += cfg.batch) {
      std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(s),
                                   order.begin() + static_cast<std::ptrdiff_t>(std::min(s + cfg.batch, order.size())));
      std::vector<const NeuralGraph*> gs;
      for (auto i : idx) gs.push_back(&graphs[i]);
      Tensor loss = batch_loss(p, d, idx, run_model(p, gs, run));
      if (!std::isfinite(loss.item())) throw TrainError("training loss became non-finite at epoch " + std::to_string(epoch));
      total += loss.item() * static_cast<double>(idx.size());
      loss.backward();
      adam_step(params, state, adam);
    }
    emit(epoch, "train", "loss", total / static_cast<double>(order.size()));
    if (val_idx.empty()) {
      res.best_epoch = epoch;
      continue;
    }
    auto m = score(d, val_idx, predict_prepared(p, graphs, val_idx, cfg.batch));
    for (const auto& [name, v] : m) emit(epoch, "val", name, v);
    double sel = selection_score(d.kind, m);
    if (sel > res.best_val) {
      res.best_val = sel;
      res.best_epoch = epoch;
      snapshot();
      since = 0;
    } else if (++since > cfg.patience) {
      break;
    }
  }
  if (!best_params.empty())
    for (std::size_t i = 0; i < params.size(); ++i) std::copy(best_params[i].begin(), best_params[i].end(), params[i].mutable_data().begin());
  if (val_idx.empty()) res.best_val = std::numeric_limits<double>::quiet_NaN();
  if (!test_idx.empty()) {
    res.test = score(d, test_idx, predict_prepared(p, graphs, test_idx, cfg.batch));
    for (const auto& [name, v] : res.test) emit(res.best_epoch, "test", name, v);
  }
  res.predictor = std::move(p);
  return res;
}

void save_predictor(const Predictor& p, const std::string& path) {
  Json doc;
  doc["version"] = kFormatVersion;
  doc["kind"] = std::string(tasks::to_string(p.kind));
  doc["loss"] = std::string(to_string(p.loss));
  doc["normalize"] = p.normalize;
  doc["direction"] = p.direction;
  doc["stats"] = stats_json(p.stats);
  doc["model"] = util::parse_json(models::model_to_json(p.model), "model");
  util::write_file(path, doc.dump());
}

Predictor load_predictor(const std::string& path) {
  Json doc = util::parse_json(util::read_file(path), path);
  if (util::size_field(doc, "version", "") != kFormatVersion) throw util::FormatError(path + ": unsupported predictor version");
  Predictor p;
  try {
    p.kind = tasks::parse_target_kind(util::string_field(doc, "kind", ""));
    p.loss = parse_loss(util::string_field(doc, "loss", ""));
  } catch (const std::invalid_argument& e) {
    throw util::FormatError(path + ": " + e.what());
  }
  p.normalize = util::bool_field(doc, "normalize", "");
  p.direction = util::bool_field(doc, "direction", "");
  p.stats = stats_from_json(util::array_field(doc, "stats", ""));
  p.model = models::model_from_json(util::field(doc, "model", "").dump());
  return p;
}

}  // namespace ngraph::train
