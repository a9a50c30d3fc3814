#include "ngraph/tasks/l2o.hpp"

#include <cmath>
#include <limits>

#include "ngraph/graphbuild/build.hpp"
#include "ngraph/netzoo/network.hpp"
#include "ngraph/tasks/baselines.hpp"
#include "ngraph/trainer/adam.hpp"

namespace ngraph::tasks {

using ad::Tensor;
using zoo::Checkpoint;

namespace {

constexpr double kLogInputScale = 0.1;  // keeps log channels near unit range inside the optimizer

void require_mlp(const std::vector<zoo::LayerSpec>& spec) {
  for (const auto& s : spec)
    if (s.kind != zoo::LayerKind::linear || s.residual_source)
      throw TaskError("learned optimizers support plain linear networks only");
}

void unflatten(Checkpoint& net, std::span<const double> flat) {
  std::size_t off = 0;
  for (auto& p : net.params) {
    for (auto& w : p.weight) w = flat[off++];
    for (auto& b : p.bias) b = flat[off++];
  }
}

Checkpoint with_values(const Optimizee& task, std::span<const double> flat) {
  Checkpoint net;
  net.spec = task.spec;
  for (const auto& s : task.spec)
    net.params.push_back({std::vector<double>(s.in_dim * s.out_dim), std::vector<double>(s.out_dim), {}, {}, {}});
  unflatten(net, flat);
  return net;
}

/// Layer tensors sliced out of a flat [1, P] parameter row.
zoo::NetworkTensors tensors_from(const std::vector<zoo::LayerSpec>& spec, const Tensor& theta) {
  zoo::NetworkTensors nt;
  std::size_t off = 0;
  for (const auto& s : spec) {
    zoo::LayerTensors lt;
    std::size_t nw = s.in_dim * s.out_dim;
    lt.weight = ad::reshape(ad::slice_cols(theta, off, off + nw), {s.out_dim, s.in_dim});
    off += nw;
    lt.bias = ad::reshape(ad::slice_cols(theta, off, off + s.out_dim), {s.out_dim});
    off += s.out_dim;
    nt.layers.push_back(lt);
  }
  return nt;
}

Tensor inner_loss(const Optimizee& task, const Tensor& theta) {
  return ad::mse_loss(zoo::forward(task.spec, tensors_from(task.spec, theta), task.x), task.y);
}

/// Loss and gradient at fixed parameter values (no link to the optimizer).
std::pair<double, std::vector<double>> loss_and_grad(const Optimizee& task, std::span<const double> values) {
  Tensor theta = Tensor::from({1, values.size()}, std::vector<double>(values.begin(), values.end()), true);
  Tensor loss = inner_loss(task, theta);
  double l = loss.item();
  loss.backward();
  return {l, std::vector<double>(theta.grad().begin(), theta.grad().end())};
}

Tensor dense(const models::ParamStore& p, const std::string& name, const Tensor& x) {
  return ad::matmul(x, p.get(name + ".w")) + p.get(name + ".b");
}

/// Computes parameter updates for one optimizee architecture.
class Stepper {
public:
  Stepper(const LearnedOptimizer& opt, const Optimizee& task) : opt_(opt) {
    if (!opt.encoder) return;
    Checkpoint net = with_values(task, std::vector<double>(num_params(task), 0.0));
    graph::NeuralGraph g = extract_l2o_features(init_l2o_state(num_params(task)), net);
    rows_ = parameter_rows(g, net);
    std::size_t p = rows_.size();
    edge_param_.assign(g.num_edges(), p);
    node_param_.assign(g.num_nodes, p);
    for (std::size_t k = 0; k < p; ++k) {
      if (rows_[k] < g.num_edges())
        edge_param_[rows_[k]] = k;
      else
        node_param_[rows_[k] - g.num_edges()] = k;
    }
    batch_ = models::make_batch(g, models::batch_options(opt.encoder->config));
  }

  static std::size_t num_params(const Optimizee& task) {
    std::size_t n = 0;
    for (const auto& s : task.spec) n += s.in_dim * s.out_dim + s.out_dim;
    return n;
  }

  /// [1, P] update for the current values and state.
  Tensor update(std::span<const double> values, const L2OState& st) {
    std::size_t p = values.size();
    std::vector<double> f = l2o_feature_rows(values, st);
    for (std::size_t i = 0; i < f.size(); i += 2) f[i] *= kLogInputScale;
    Tensor x = Tensor::from({p, kL2OChannels}, f);
    if (opt_.encoder) {
      // extra last row: the channels of a zero parameter (input nodes)
      auto zero = log_sign(0.0);
      for (std::size_t c = 0; c < kL2OChannels / 2; ++c) {
        f.push_back(zero[0] * kLogInputScale);
        f.push_back(zero[1]);
      }
      Tensor table = Tensor::from({p + 1, kL2OChannels}, std::move(f));
      batch_.node_x = ad::gather_rows(table, node_param_);
      batch_.edge_x = ad::gather_rows(table, edge_param_);
      Tensor emb = ad::gather_rows(models::forward(*opt_.encoder, batch_), rows_);
      std::vector<Tensor> parts{x, emb};
      x = ad::concat_cols(parts);
    }
    const models::ParamStore& ff = opt_.ff;
    Tensor h = ad::gelu(dense(ff, "ff.1", x));
    h = ad::gelu(dense(ff, "ff.2", h));
    Tensor out = dense(ff, "ff.3", h);
    return ad::scale(ad::reshape(out, {1, p}), opt_.config.step_scale);
  }

private:
  const LearnedOptimizer& opt_;
  models::GraphBatch batch_;
  ad::Index rows_, edge_param_, node_param_;
};

}  // namespace

L2OState init_l2o_state(std::size_t num_params) {
  L2OState s;
  s.grad.assign(num_params, 0.0);
  for (auto& m : s.momentum) m.assign(num_params, 0.0);
  return s;
}

void update_l2o_state(L2OState& s, std::span<const double> grad) {
  if (grad.size() != s.grad.size())
    throw TaskError("gradient has " + std::to_string(grad.size()) + " entries, state has " + std::to_string(s.grad.size()));
  s.grad.assign(grad.begin(), grad.end());
  for (std::size_t k = 0; k < kMomentumScales.size(); ++k) {
    double b = kMomentumScales[k];
    for (std::size_t i = 0; i < grad.size(); ++i) s.momentum[k][i] = b * s.momentum[k][i] + (1.0 - b) * grad[i];
  }
  ++s.step;
}

std::array<double, 2> log_sign(double v) {
  double a = std::abs(v);
  double sign = v > 0 ? 1.0 : v < 0 ? -1.0 : 0.0;
  return {a >= 1e-8 ? std::log(a) : kLogFloor, sign};
}

std::vector<double> l2o_feature_rows(std::span<const double> weights, const L2OState& s) {
  if (weights.size() != s.grad.size())
    throw TaskError("optimizer state covers " + std::to_string(s.grad.size()) + " parameters, network has " +
                    std::to_string(weights.size()));
  std::vector<double> out;
  out.reserve(weights.size() * kL2OChannels);
  auto push = [&](double v) {
    auto ls = log_sign(v);
    out.push_back(ls[0]);
    out.push_back(ls[1]);
  };
  for (std::size_t i = 0; i < weights.size(); ++i) {
    push(weights[i]);
    push(s.grad[i]);
    for (const auto& m : s.momentum) push(m[i]);
  }
  return out;
}

std::vector<std::size_t> parameter_rows(const graph::NeuralGraph& g, const Checkpoint& net) {
  require_mlp(net.spec);
  std::vector<std::size_t> w_off, b_off;
  std::size_t off = 0;
  for (const auto& s : net.spec) {
    w_off.push_back(off);
    off += s.in_dim * s.out_dim;
    b_off.push_back(off);
    off += s.out_dim;
  }
  std::vector<std::size_t> rows(off, std::numeric_limits<std::size_t>::max());
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    if (g.edge_kind[e] != graph::EdgeKind::weight || g.edge_backward[e]) continue;
    std::size_t l = g.bands[g.node_band[g.edge_dst[e]]].layer;
    if (l == 0 || l > net.spec.size()) throw TaskError("graph does not match the network");
    std::size_t in = net.spec[l - 1].in_dim;
    rows[w_off[l - 1] + g.node_index[g.edge_dst[e]] * in + g.node_index[g.edge_src[e]]] = e;
  }
  for (std::size_t i = 0; i < g.num_nodes; ++i) {
    std::size_t l = g.bands[g.node_band[i]].layer;
    if (l > 0) rows[b_off[l - 1] + g.node_index[i]] = g.num_edges() + i;
  }
  for (auto r : rows)
    if (r == std::numeric_limits<std::size_t>::max()) throw TaskError("graph does not cover every parameter");
  return rows;
}

graph::NeuralGraph extract_l2o_features(const L2OState& s, const Checkpoint& net) {
  require_mlp(net.spec);
  std::vector<double> flat = flatten_weights(net);
  std::vector<double> f = l2o_feature_rows(flat, s);
  graph::NeuralGraph g = graph::build_graph(net);
  std::vector<std::size_t> rows = parameter_rows(g, net);
  std::vector<double> zero;
  for (std::size_t c = 0; c < kL2OChannels / 2; ++c) {
    auto ls = log_sign(0.0);
    zero.insert(zero.end(), ls.begin(), ls.end());
  }
  g.node_dim = g.edge_dim = kL2OChannels;
  g.node_features.assign(g.num_nodes * kL2OChannels, 0.0);
  g.edge_features.assign(g.num_edges() * kL2OChannels, 0.0);
  for (std::size_t i = 0; i < g.num_nodes; ++i)
    std::copy(zero.begin(), zero.end(), g.node_features.begin() + static_cast<std::ptrdiff_t>(i * kL2OChannels));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    auto src = f.begin() + static_cast<std::ptrdiff_t>(k * kL2OChannels);
    auto& dst = rows[k] < g.num_edges() ? g.edge_features : g.node_features;
    std::size_t row = rows[k] < g.num_edges() ? rows[k] : rows[k] - g.num_edges();
    std::copy(src, src + kL2OChannels, dst.begin() + static_cast<std::ptrdiff_t>(row * kL2OChannels));
  }
  g.metadata["features"] = "l2o";
  return g;
}

Optimizee make_optimizee(const OptimizeeConfig& cfg) {
  if (cfg.widths.size() < 2 || cfg.samples == 0) throw TaskError("optimizee needs at least one layer and one sample");
  Optimizee task;
  for (std::size_t l = 1; l < cfg.widths.size(); ++l)
    task.spec.push_back(
        zoo::linear_layer(cfg.widths[l - 1], cfg.widths[l], l + 1 == cfg.widths.size() ? zoo::Activation::identity : cfg.activation));
  ad::Rng rng(cfg.data_seed);
  std::vector<double> x(cfg.samples * cfg.widths.front());
  for (auto& v : x) v = rng.uniform(-1.0, 1.0);
  task.x = Tensor::from({cfg.samples, cfg.widths.front()}, std::move(x));
  // teacher with larger weights so the target is not trivially linear
  Checkpoint teacher = zoo::init_checkpoint(task.spec, rng);
  for (auto& p : teacher.params)
    for (auto& w : p.weight) w *= 3.0;
  task.y = zoo::evaluate(teacher, task.x);
  return task;
}

Checkpoint init_optimizee(const Optimizee& task, std::uint64_t seed) {
  ad::Rng rng(seed);
  return zoo::init_checkpoint(task.spec, rng);
}

double optimizee_loss(const Optimizee& task, const Checkpoint& net) {
  return loss_and_grad(task, flatten_weights(net)).first;
}

std::string_view to_string(L2OKind k) { return k == L2OKind::ff ? "ff" : "ng-gnn"; }

L2OKind parse_l2o_kind(std::string_view s) {
  if (s == "ff") return L2OKind::ff;
  if (s == "ng-gnn") return L2OKind::ng_gnn;
  throw TaskError("unknown optimizer kind '" + std::string(s) + "' (expected ff or ng-gnn)");
}

L2OConfig default_l2o_config(L2OKind kind) {
  L2OConfig c;
  c.kind = kind;
  c.gnn.kind = models::ModelKind::gnn;
  c.gnn.layers = 2;
  c.gnn.node_width = 16;
  c.gnn.edge_width = 16;
  c.gnn.head_width = 16;
  c.gnn.activation_dim = 4;
  c.gnn.position_dim = 4;
  c.gnn.position_slots = 0;  // sized from the optimizee graph
  return c;
}

LearnedOptimizer init_learned_optimizer(const L2OConfig& cfg, const Optimizee& task) {
  require_mlp(task.spec);
  if (cfg.unroll == 0 || cfg.horizon == 0) throw TaskError("unroll and horizon must be positive");
  LearnedOptimizer opt{cfg, {}, std::nullopt};
  ad::Rng rng(cfg.seed);
  std::size_t in = kL2OChannels;
  if (cfg.kind == L2OKind::ng_gnn) {
    models::ModelConfig mc = cfg.gnn;
    mc.readout = models::Readout::per_parameter;
    mc.out_dim = cfg.embedding;
    mc.probes = 0;
    Checkpoint net = with_values(task, std::vector<double>(Stepper::num_params(task), 0.0));
    graph::NeuralGraph g = graph::build_graph(net);
    mc.position_slots = std::max(mc.position_slots, g.num_position_slots());
    opt.config.gnn = mc;
    opt.encoder = models::init_model(mc, {kL2OChannels, kL2OChannels, g.output_nodes().size(), 0}, rng);
    in += cfg.embedding;
  }
  opt.ff.add_linear("ff.1", in, cfg.hidden, rng);
  opt.ff.add_linear("ff.2", cfg.hidden, cfg.hidden, rng);
  // zero output layer: the untrained optimizer leaves parameters in place
  opt.ff.add("ff.3.w", {cfg.hidden, 1}, std::vector<double>(cfg.hidden, 0.0));
  opt.ff.add("ff.3.b", {1}, {0.0});
  return opt;
}

LearnedOptimizer l2o_train(const L2OConfig& cfg, const Optimizee& task, L2OReport* report) {
  LearnedOptimizer opt = init_learned_optimizer(cfg, task);
  std::vector<Tensor> params = opt.ff.tensors();
  if (opt.encoder)
    for (const auto& t : opt.encoder->params.tensors()) params.push_back(t);
  train::AdamState state;
  train::AdamConfig adam{.lr = cfg.lr};
  Stepper stepper(opt, task);
  ad::Rng rng = ad::Rng(cfg.seed).derive(1);
  std::size_t p = Stepper::num_params(task);

  std::size_t outer = 0;
  while (outer < cfg.outer_steps) {
    Checkpoint net = init_optimizee(task, rng.next_u64());
    Tensor theta = Tensor::from({1, p}, flatten_weights(net));
    L2OState st = init_l2o_state(p);
    for (std::size_t t = 0; t < cfg.horizon && outer < cfg.outer_steps; t += cfg.unroll) {
      Tensor total = Tensor::scalar(0.0);
      bool finite = true;
      std::size_t steps = std::min(cfg.unroll, cfg.horizon - t);
      for (std::size_t k = 0; k < steps && finite; ++k) {
        auto [l, grad] = loss_and_grad(task, theta.data());
        update_l2o_state(st, grad);
        theta = theta + stepper.update(theta.data(), st);
        Tensor lt = inner_loss(task, theta);
        finite = std::isfinite(l) && std::isfinite(lt.item());
        total = total + lt;
      }
      ++outer;
      if (!finite) {
        if (report) ++report->aborted;
        break;  // start over from a fresh optimizee
      }
      Tensor loss = ad::scale(total, 1.0 / static_cast<double>(steps));
      loss.backward();
      train::adam_step(params, state, adam);
      if (report) report->outer_loss.push_back(loss.item());
      theta = theta.detach();
    }
  }
  return opt;
}

std::vector<double> run_learned(const LearnedOptimizer& opt, const Optimizee& task, Checkpoint net,
                                std::size_t steps) {
  Stepper stepper(opt, task);
  std::vector<double> values = flatten_weights(net);
  L2OState st = init_l2o_state(values.size());
  std::vector<double> losses;
  for (std::size_t k = 0; k <= steps; ++k) {
    auto [l, grad] = loss_and_grad(task, values);
    losses.push_back(l);
    if (k == steps || !std::isfinite(l)) break;
    update_l2o_state(st, grad);
    Tensor delta = stepper.update(values, st);
    for (std::size_t i = 0; i < values.size(); ++i) values[i] += delta[i];
  }
  return losses;
}

std::vector<double> run_sgd(const Optimizee& task, Checkpoint net, double lr, std::size_t steps) {
  std::vector<double> values = flatten_weights(net);
  std::vector<double> losses;
  for (std::size_t k = 0; k <= steps; ++k) {
    auto [l, grad] = loss_and_grad(task, values);
    losses.push_back(l);
    if (k == steps || !std::isfinite(l)) break;
    for (std::size_t i = 0; i < values.size(); ++i) values[i] -= lr * grad[i];
  }
  return losses;
}

double tune_sgd_lr(const Optimizee& task, std::span<const std::uint64_t> seeds, std::size_t steps) {
  if (seeds.empty()) throw TaskError("tuning needs at least one initialization seed");
  double best_lr = 0.0, best = std::numeric_limits<double>::infinity();
  for (double lr : {1e-3, 3e-3, 1e-2, 3e-2, 0.1, 0.3, 1.0}) {
    double total = 0.0;
    for (auto s : seeds) {
      double last = run_sgd(task, init_optimizee(task, s), lr, steps).back();
      total += std::isfinite(last) ? last : std::numeric_limits<double>::infinity();
    }
    if (total < best) {
      best = total;
      best_lr = lr;
    }
  }
  if (best_lr == 0.0) throw TaskError("every SGD learning rate diverged");
  return best_lr;
}

}  // namespace ngraph::tasks
