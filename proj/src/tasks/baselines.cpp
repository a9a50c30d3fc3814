#include "ngraph/tasks/baselines.hpp"

#include <cmath>
#include <limits>

#include "ngraph/autodiff/ops.hpp"
#include "ngraph/models/params.hpp"
#include "ngraph/trainer/adam.hpp"

namespace ngraph::tasks {

using ad::Tensor;

namespace {

struct Standardizer {
  std::vector<double> mean, scale;

  Standardizer(const std::vector<std::vector<double>>& f, const std::vector<std::size_t>& rows) {
    std::size_t dim = f[rows.front()].size();
    mean.assign(dim, 0.0);
    scale.assign(dim, 0.0);
    double n = static_cast<double>(rows.size());
    for (auto r : rows)
      for (std::size_t j = 0; j < dim; ++j) mean[j] += f[r][j] / n;
    for (auto r : rows)
      for (std::size_t j = 0; j < dim; ++j) scale[j] += (f[r][j] - mean[j]) * (f[r][j] - mean[j]) / n;
    for (auto& s : scale) s = s > 1e-16 ? 1.0 / std::sqrt(s) : 1.0;
  }

  Tensor rows(const std::vector<std::vector<double>>& f, const std::vector<std::size_t>& idx) const {
    std::vector<double> out;
    out.reserve(idx.size() * mean.size());
    for (auto r : idx)
      for (std::size_t j = 0; j < mean.size(); ++j) out.push_back((f[r][j] - mean[j]) * scale[j]);
    return Tensor::from({idx.size(), mean.size()}, std::move(out));
  }
};

Tensor mlp(const models::ParamStore& p, const Tensor& x, double dropout, ad::Rng* rng) {
  auto layer = [&](const std::string& n, const Tensor& h) { return ad::matmul(h, p.get(n + ".w")) + p.get(n + ".b"); };
  Tensor h = ad::gelu(layer("l1", x));
  if (rng && dropout > 0) h = ad::dropout(h, dropout, *rng);
  h = ad::gelu(layer("l2", h));
  if (rng && dropout > 0) h = ad::dropout(h, dropout, *rng);
  return layer("l3", h);
}

double metric(const TaskDataset& d, const Tensor& out, const std::vector<std::size_t>& idx) {
  if (d.kind == TargetKind::class_label) {
    std::vector<std::size_t> labels;
    for (auto i : idx) labels.push_back(d.records[i].label);
    return accuracy(out, labels);
  }
  std::vector<double> truth;
  for (auto i : idx) truth.push_back(d.records[i].value);
  return kendall_tau_or_zero(out.to_vector(), truth);
}

}  // namespace

BaselineResult train_vector_baseline(const TaskDataset& d, const std::vector<std::vector<double>>& features,
                                     const BaselineConfig& cfg) {
  if (d.kind == TargetKind::deltas) throw TaskError("vector baselines predict labels or scalars only");
  if (features.size() != d.records.size()) throw TaskError("one feature vector per record is required");
  auto train = d.indices(Split::train), val = d.indices(Split::val), test = d.indices(Split::test);
  if (train.empty() || val.empty() || test.empty()) throw TaskError("vector baseline needs non-empty train, val and test splits");
  for (const auto& f : features)
    if (f.size() != features.front().size()) throw TaskError("feature vectors differ in length");
  if (cfg.batch == 0 || cfg.epochs == 0) throw TaskError("baseline batch size and epochs must be positive");

  Standardizer z(features, train);
  std::size_t in = features.front().size();
  std::size_t out = d.kind == TargetKind::class_label ? d.num_classes : 1;
  ad::Rng rng(cfg.seed);
  models::ParamStore p;
  p.add_linear("l1", in, cfg.hidden, rng);
  p.add_linear("l2", cfg.hidden, cfg.hidden, rng);
  p.add_linear("l3", cfg.hidden, out, rng);
  std::vector<Tensor> params = p.tensors();
  train::AdamState state;
  train::AdamConfig adam{.lr = cfg.lr, .weight_decay = cfg.weight_decay};

  Tensor xval = z.rows(features, val), xtest = z.rows(features, test);
  BaselineResult best;
  best.val_metric = -std::numeric_limits<double>::infinity();
  std::size_t since = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<std::size_t> order = train;
    rng.shuffle(order);
    for (std::size_t s = 0; s < order.size(); s += cfg.batch) {
      std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(s),
                                   order.begin() + static_cast<std::ptrdiff_t>(std::min(s + cfg.batch, order.size())));
      Tensor pred = mlp(p, z.rows(features, idx), cfg.dropout, &rng);
      Tensor loss;
      if (d.kind == TargetKind::class_label) {
        ad::Index labels;
        for (auto i : idx) labels.push_back(d.records[i].label);
        loss = ad::cross_entropy(pred, labels);
      } else {
        std::vector<double> t;
        for (auto i : idx) t.push_back(d.records[i].value);
        loss = ad::mse_loss(pred, Tensor::from({idx.size(), 1}, t));
      }
      loss.backward();
      train::adam_step(params, state, adam);
    }
    double v = metric(d, mlp(p, xval, 0.0, nullptr), val);
    if (v > best.val_metric) {
      best.val_metric = v;
      best.test_metric = metric(d, mlp(p, xtest, 0.0, nullptr), test);
      best.best_epoch = epoch;
      since = 0;
    } else if (++since > cfg.patience) {
      break;
    }
  }
  return best;
}

std::vector<double> flatten_weights(const zoo::Checkpoint& net) {
  std::vector<double> out;
  for (const auto& p : net.params) {
    out.insert(out.end(), p.query.begin(), p.query.end());
    out.insert(out.end(), p.key.begin(), p.key.end());
    out.insert(out.end(), p.value.begin(), p.value.end());
    out.insert(out.end(), p.weight.begin(), p.weight.end());
    out.insert(out.end(), p.bias.begin(), p.bias.end());
  }
  return out;
}

double nearest_neighbor_accuracy(const TaskDataset& d, const std::vector<std::vector<double>>& features) {
  if (d.kind != TargetKind::class_label) throw TaskError("nearest neighbour needs class labels");
  auto train = d.indices(Split::train), test = d.indices(Split::test);
  if (train.empty() || test.empty()) throw TaskError("nearest neighbour needs train and test records");
  std::size_t correct = 0;
  for (auto t : test) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t label = 0;
    for (auto r : train) {
      if (features[r].size() != features[t].size()) throw TaskError("feature vectors differ in length");
      double dist = 0;
      for (std::size_t j = 0; j < features[t].size(); ++j) dist += (features[r][j] - features[t][j]) * (features[r][j] - features[t][j]);
      if (dist < best) {
        best = dist;
        label = d.records[r].label;
      }
    }
    if (label == d.records[t].label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

}  // namespace ngraph::tasks
