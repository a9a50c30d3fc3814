#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

#include "CLI11.hpp"
#include "ngraph/graphbuild/build.hpp"
#include "ngraph/graphbuild/features.hpp"
#include "ngraph/graphbuild/io.hpp"
#include "ngraph/models/model.hpp"
#include "ngraph/netzoo/network.hpp"
#include "ngraph/netzoo/permutation.hpp"
#include "ngraph/netzoo/serialize.hpp"
#include "ngraph/netzoo/toy_images.hpp"
#include "ngraph/netzoo/zoo.hpp"
#include "ngraph/tasks/generalization.hpp"
#include "ngraph/tasks/inr.hpp"
#include "ngraph/tasks/l2o.hpp"
#include "ngraph/trainer/trainer.hpp"
#include "ngraph/util/json_fields.hpp"

namespace ngraph::cli {

namespace fs = std::filesystem;
using graph::NeuralGraph;
using util::Json;

namespace {

/// Raised for bad input data (exit code 2).
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::uint64_t seed = 0;
  std::string out;
  bool verbose = false;
};

struct TaskOptions {
  std::string task;
  std::size_t count = 0;  // 0: task default
  std::size_t image_size = 16;
  std::size_t inr_steps = 500;
};

const std::vector<std::string> kTasks{"inr-cls", "edit", "gen-pred", "l2o"};

void require_out(const Globals& g) {
  if (g.out.empty()) throw CLI::RequiredError("--out");
}

std::string format(double v) { return util::format_double(v); }

// ---------------------------------------------------------------- helpers

zoo::KernelSize parse_kernel(const std::string& s) {
  auto x = s.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument(s);
    std::size_t pos = 0;
    zoo::KernelSize k{std::stoul(s.substr(0, x), &pos), 0};
    if (pos != x) throw std::invalid_argument(s);
    std::string h = s.substr(x + 1);
    k.height = std::stoul(h, &pos);
    if (pos != h.size() || k.width == 0 || k.height == 0) throw std::invalid_argument(s);
    return k;
  } catch (const std::logic_error&) {
    throw CLI::ValidationError("--max-kernel", "expected WxH such as 5x5, got '" + s + "'");
  }
}

bool has_flatten(const zoo::Checkpoint& net) {
  return std::any_of(net.spec.begin(), net.spec.end(), [](const zoo::LayerSpec& s) { return s.kind == zoo::LayerKind::flatten; });
}

/// Input batch shape for a network: images for conv nets (sized to match a
/// flatten layer when present), vectors or token sequences otherwise.
ad::Shape input_shape(const zoo::Checkpoint& net, std::size_t batch) {
  const auto& first = net.spec.front();
  if (first.kind != zoo::LayerKind::conv2d) return {batch, net.input_dim()};
  std::size_t pools = 0;
  for (const auto& s : net.spec) {
    if (s.kind == zoo::LayerKind::flatten) return {batch, net.input_dim(), s.spatial_height << pools, s.spatial_width << pools};
    if (s.pool) ++pools;
  }
  // global pooling head: any size that survives every 2x2 pool
  std::size_t side = std::max<std::size_t>(8, std::size_t{2} << pools);
  return {batch, net.input_dim(), side, side};
}

/// Grayscale PGM (P2 or P5, 8-bit) scaled to [0, 1].
ad::Tensor read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image " + path);
  std::string magic;
  in >> magic;
  if (magic != "P2" && magic != "P5") throw DataError(path + ": not a PGM image (expected P2 or P5)");
  auto next_int = [&]() {
    in >> std::ws;
    while (in.peek() == '#') {
      std::string comment;
      std::getline(in, comment);
      in >> std::ws;
    }
    long v = -1;
    if (!(in >> v) || v < 0) throw DataError(path + ": malformed PGM header");
    return static_cast<std::size_t>(v);
  };
  std::size_t w = next_int(), h = next_int(), maxval = next_int();
  if (w == 0 || h == 0 || maxval == 0 || maxval > 255) throw DataError(path + ": unsupported PGM size or depth");
  std::vector<double> pixels(w * h);
  if (magic == "P5") {
    in.get();
    std::vector<char> raw(w * h);
    if (!in.read(raw.data(), static_cast<std::streamsize>(raw.size()))) throw DataError(path + ": truncated PGM data");
    for (std::size_t i = 0; i < raw.size(); ++i)
      pixels[i] = static_cast<double>(static_cast<unsigned char>(raw[i])) / static_cast<double>(maxval);
  } else {
    for (auto& p : pixels) {
      std::size_t v = next_int();
      if (v > maxval) throw DataError(path + ": pixel above maxval");
      p = static_cast<double>(v) / static_cast<double>(maxval);
    }
  }
  return ad::Tensor::from({h, w}, std::move(pixels));
}

Json optimizee_json(const tasks::OptimizeeConfig& c) {
  return {{"version", 1},
          {"widths", c.widths},
          {"activation", std::string(zoo::to_string(c.activation))},
          {"samples", c.samples},
          {"data_seed", std::to_string(c.data_seed)}};
}

tasks::OptimizeeConfig optimizee_from_json(const std::string& path) {
  Json j = util::parse_json(util::read_file(path), path);
  tasks::OptimizeeConfig c;
  c.widths.clear();
  const Json& w = util::array_field(j, "widths", path);
  for (std::size_t i = 0; i < w.size(); ++i) c.widths.push_back(util::as_size(w[i], path + ".widths"));
  try {
    c.activation = zoo::parse_activation(util::string_field(j, "activation", path));
    c.data_seed = std::stoull(util::string_field(j, "data_seed", path));
  } catch (const std::logic_error& e) {
    throw util::FormatError(path + ": " + e.what());
  }
  c.samples = util::size_field(j, "samples", path);
  return c;
}

tasks::TaskDataset build_task(const TaskOptions& o, std::uint64_t seed) {
  ad::Rng rng(seed);
  if (o.task == "inr-cls" || o.task == "edit") {
    tasks::InrTaskConfig c;
    c.image_size = o.image_size;
    c.inr.steps = o.inr_steps;
    if (o.count > 0) {
      std::size_t total = c.train + c.val + c.test;
      c.test = static_cast<std::size_t>(std::lround(static_cast<double>(o.count * c.test) / static_cast<double>(total)));
      c.val = static_cast<std::size_t>(std::lround(static_cast<double>(o.count * c.val) / static_cast<double>(total)));
      c.train = o.count - c.test - c.val;
    }
    return o.task == "inr-cls" ? tasks::build_inr_classification(rng, c) : tasks::build_editing_task(rng, c);
  }
  if (o.task == "gen-pred") {
    tasks::GeneralizationConfig c;
    c.zoo.image_size = o.image_size;
    if (o.count > 0) c.count = o.count;
    return tasks::build_generalization_task(rng, c);
  }
  throw CLI::ValidationError("--task", "task '" + o.task + "' has no graph dataset");
}

void add_task_options(CLI::App* cmd, TaskOptions& o) {
  cmd->add_option("--count", o.count, "Number of networks (0 = task default: 230 INRs or 200 CNNs)");
  cmd->add_option("--image-size", o.image_size, "Side length of the synthetic images")->check(CLI::Range(4, 64));
  cmd->add_option("--inr-steps", o.inr_steps, "Adam steps per INR fit")->check(CLI::PositiveNumber);
}

void print_metrics(std::ostream& out, const std::string& split, const std::map<std::string, double>& m) {
  for (const auto& [k, v] : m) out << split << ' ' << k << ' ' << format(v) << '\n';
}

// ---------------------------------------------------------------- verbs

int cmd_convert(const Globals& g, const std::string& in, const std::string& max_kernel, const std::string& linear_mode,
                const std::string& flatten_mode, bool direction, bool undirected, std::size_t probes, bool no_residual,
                std::ostream& out) {
  require_out(g);
  zoo::Checkpoint net = zoo::load_checkpoint(in);
  graph::GraphOptions opts;
  if (!max_kernel.empty()) opts.max_kernel = parse_kernel(max_kernel);
  opts.linear_mode = graph::parse_linear_mode(linear_mode);
  opts.flatten_mode = graph::parse_flatten_mode(flatten_mode);
  opts.residual_edges = !no_residual;
  NeuralGraph graph = graph::to_graph(net, opts);
  if (probes > 0) {
    ad::Rng rng(g.seed);
    graph = graph::attach_probe_features(graph, graph::make_probes(probes, net.input_dim(), rng, false));
  }
  if (direction || undirected) graph = graph::attach_direction_features(graph, undirected);
  graph::save_graph(graph, g.out);
  out << "wrote " << g.out << ": " << graph.num_nodes << " nodes, " << graph.num_edges() << " edges, d_V "
      << graph.node_dim << ", d_E " << graph.edge_dim << '\n';
  return kOk;
}

int cmd_check_sym(const Globals& g, const std::string& in, std::size_t trials, std::ostream& out) {
  zoo::Checkpoint net = zoo::load_checkpoint(in);
  graph::GraphOptions opts;
  if (has_flatten(net)) opts.flatten_mode = graph::FlattenMode::repeat_nodes;
  NeuralGraph graph = graph::to_graph(net, opts);
  ad::Rng rng(g.seed);
  ad::Shape shape = input_shape(net, 4);
  std::vector<double> xs(ad::shape_size(shape));
  for (auto& v : xs) v = rng.uniform(-1.0, 1.0);
  ad::Tensor x = ad::Tensor::from(shape, std::move(xs));
  ad::Tensor y = zoo::evaluate(net, x);

  struct Probe {
    std::string name;
    models::Model model;
    std::vector<double> base;
  };
  std::vector<Probe> probes;
  for (auto kind : {models::ModelKind::gnn, models::ModelKind::ngt})
    for (auto readout : {models::Readout::invariant, models::Readout::per_node}) {
      models::ModelConfig c;
      c.kind = kind;
      c.readout = readout;
      c.layers = 2;
      c.node_width = 8;
      c.edge_width = 4;
      c.heads = 2;
      c.head_width = 8;
      c.activation_dim = 4;
      c.position_dim = 4;
      c.position_slots = graph.num_position_slots();
      ad::Rng mrng = rng.derive(probes.size() + 1);
      models::Model m = models::init_model(c, {graph.node_dim, graph.edge_dim, graph.output_nodes().size(), 0}, mrng);
      auto base = models::forward(m, models::make_batch(graph, models::batch_options(c))).to_vector();
      probes.push_back({std::string(models::to_string(kind)) + (readout == models::Readout::invariant ? " invariance" : " equivariance"),
                        std::move(m), std::move(base)});
    }

  double fn_dev = 0;
  std::size_t mismatches = 0;
  std::vector<double> dev(probes.size(), 0.0);
  for (std::size_t t = 0; t < trials; ++t) {
    auto perm = zoo::random_hidden_permutation(net, rng);
    zoo::Checkpoint pnet = zoo::permute(net, perm);
    auto fy = zoo::evaluate(pnet, x);
    for (std::size_t i = 0; i < fy.size(); ++i) fn_dev = std::max(fn_dev, std::abs(fy[i] - y[i]));
    auto np = graph::node_permutation(graph, perm);
    NeuralGraph built = graph::to_graph(pnet, opts);
    if (graph::graph_to_bytes(built) != graph::graph_to_bytes(graph::permute_graph(graph, np))) ++mismatches;
    for (std::size_t k = 0; k < probes.size(); ++k) {
      const auto& p = probes[k];
      auto got = models::forward(p.model, models::make_batch(built, models::batch_options(p.model.config))).to_vector();
      std::size_t w = p.model.config.out_dim;
      bool per_node = p.model.config.readout == models::Readout::per_node;
      for (std::size_t r = 0; r < got.size() / w; ++r)
        for (std::size_t c = 0; c < w; ++c) {
          double expect = p.base[(per_node ? np[r] : r) * w + c];
          dev[k] = std::max(dev[k], std::abs(got[r * w + c] - expect));
        }
    }
  }
  out << "trials " << trials << '\n';
  out << "function deviation " << format(fn_dev) << '\n';
  out << "graph commutation mismatches " << mismatches << '\n';
  bool ok = fn_dev < 1e-9 && mismatches == 0;
  for (std::size_t k = 0; k < probes.size(); ++k) {
    out << probes[k].name << " deviation " << format(dev[k]) << '\n';
    ok = ok && dev[k] < 1e-9;
  }
  if (!ok) throw DataError("symmetry check failed (tolerance 1e-9)");
  return kOk;
}

int cmd_gen_zoo(const Globals& g, std::size_t count, std::size_t image_size, std::ostream& out) {
  require_out(g);
  ad::Rng rng(g.seed);
  zoo::WildParkConfig cfg;
  cfg.image_size = image_size;
  auto members = zoo::generate_wild_park_mini(rng, count, cfg);
  fs::create_directories(g.out);
  std::ofstream index(fs::path(g.out) / "zoo.csv");
  index << "file,accuracy,lineage\n";
  for (std::size_t i = 0; i < members.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "ckpt_%05zu.json", i);
    zoo::save_checkpoint(members[i].net, (fs::path(g.out) / name).string());
    index << name << ',' << format(members[i].accuracy) << ',' << members[i].lineage << '\n';
  }
  out << "wrote " << members.size() << " checkpoints to " << g.out << '\n';
  return kOk;
}

int cmd_fit_inr(const Globals& g, const std::string& image, const std::string& shape, std::size_t size,
                const zoo::InrConfig& cfg, std::ostream& out) {
  require_out(g);
  if (image.empty() == shape.empty()) throw CLI::ValidationError("fit-inr", "give exactly one of --image or --shape");
  ad::Rng rng(g.seed);
  ad::Tensor pixels;
  if (!image.empty()) {
    pixels = read_pgm(image);
  } else {
    static const std::map<std::string, zoo::ShapeFamily> kShapes{
        {"bar", zoo::ShapeFamily::bar}, {"disk", zoo::ShapeFamily::disk}, {"checker", zoo::ShapeFamily::checker}};
    pixels = ad::Tensor::from({size, size}, zoo::render_shape(kShapes.at(shape), size, rng));
  }
  zoo::Checkpoint net = zoo::fit_inr(pixels, rng, cfg);
  zoo::save_checkpoint(net, g.out);
  out << "wrote " << g.out << ": reconstruction mse " << net.metadata.at("mse") << '\n';
  return kOk;
}

int cmd_gen_task(const Globals& g, const TaskOptions& o, std::ostream& out) {
  require_out(g);
  if (o.task == "l2o") {
    tasks::OptimizeeConfig c;
    c.data_seed = g.seed;
    fs::create_directories(g.out);
    util::write_file((fs::path(g.out) / "optimizee.json").string(), optimizee_json(c).dump(2));
    out << "wrote " << (fs::path(g.out) / "optimizee.json").string() << '\n';
    return kOk;
  }
  tasks::TaskDataset d = build_task(o, g.seed);
  tasks::save_dataset(d, g.out);
  out << "wrote " << d.task << " dataset to " << g.out << ": " << d.indices(tasks::Split::train).size() << " train, "
      << d.indices(tasks::Split::val).size() << " val, " << d.indices(tasks::Split::test).size() << " test\n";
  return kOk;
}

int cmd_train(const Globals& g, const std::string& data, const TaskOptions& o, const std::string& config_file,
              const std::vector<std::string>& sets, std::ostream& out) {
  require_out(g);
  if (data.empty() == o.task.empty()) throw CLI::ValidationError("train", "give exactly one of --data or --task");
  if (o.task == "l2o") throw CLI::ValidationError("--task", "use the l2o verb for learned optimizers");
  train::TrainConfig cfg;
  cfg.seed = g.seed;
  if (!config_file.empty()) cfg = train::parse_train_config(util::read_file(config_file), cfg);
  for (const auto& kv : sets) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("--set", "expected key=value, got '" + kv + "'");
    train::set_option(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  tasks::TaskDataset d = data.empty() ? build_task(o, g.seed) : tasks::load_dataset(data);
  auto res = train::fit(d, cfg, [&](const train::LogRow& r) {
    if (g.verbose) out << "epoch " << r.epoch << ' ' << r.split << ' ' << r.metric << ' ' << format(r.value) << '\n';
  });
  fs::create_directories(g.out);
  train::save_predictor(res.predictor, (fs::path(g.out) / "model.json").string());
  std::ofstream csv(fs::path(g.out) / "metrics.csv");
  train::write_log_csv(res.log, csv);
  out << "best epoch " << res.best_epoch << '\n';
  print_metrics(out, "test", res.test);
  return kOk;
}

int cmd_eval(const Globals& g, const std::string& model, const std::string& data, const std::string& split,
             std::ostream& out) {
  require_out(g);
  train::Predictor p = train::load_predictor(model);
  tasks::TaskDataset d = tasks::load_dataset(data);
  tasks::Split s = tasks::parse_split(split);
  auto metrics = train::evaluate(p, d, s);
  print_metrics(out, split, metrics);

  fs::create_directories(g.out);
  std::ofstream mcsv(fs::path(g.out) / "eval.csv");
  mcsv << "metric,value\n";
  for (const auto& [k, v] : metrics) mcsv << k << ',' << format(v) << '\n';

  auto idx = d.indices(s);
  std::vector<NeuralGraph> graphs;
  for (auto i : idx) graphs.push_back(d.records[i].graph);
  auto pred = train::predict(p, graphs);
  std::ofstream pcsv(fs::path(g.out) / "predictions.csv");
  if (d.kind == tasks::TargetKind::class_label) {
    pcsv << "record,label,predicted";
    for (std::size_t c = 0; c < d.num_classes; ++c) pcsv << ",logit_" << c;
    pcsv << '\n';
    for (std::size_t k = 0; k < idx.size(); ++k) {
      auto best = std::max_element(pred[k].begin(), pred[k].end()) - pred[k].begin();
      pcsv << idx[k] << ',' << d.records[idx[k]].label << ',' << best;
      for (double v : pred[k]) pcsv << ',' << format(v);
      pcsv << '\n';
    }
  } else if (d.kind == tasks::TargetKind::scalar) {
    pcsv << "record,target,predicted\n";
    for (std::size_t k = 0; k < idx.size(); ++k)
      pcsv << idx[k] << ',' << format(d.records[idx[k]].value) << ',' << format(pred[k][0]) << '\n';
  } else {
    pcsv << "record,parameter,target,predicted\n";
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const auto& r = d.records[idx[k]];
      for (std::size_t j = 0; j < pred[k].size(); ++j) {
        double t = j < r.edge_delta.size() ? r.edge_delta[j] : r.node_delta[j - r.edge_delta.size()];
        pcsv << idx[k] << ',' << j << ',' << format(t) << ',' << format(pred[k][j]) << '\n';
      }
    }
  }
  return kOk;
}

int cmd_l2o(const Globals& g, const std::string& kind, const std::string& optimizee, tasks::L2OConfig base,
            std::size_t eval_seeds, std::ostream& out) {
  require_out(g);
  tasks::OptimizeeConfig oc;
  oc.data_seed = g.seed;
  if (!optimizee.empty()) oc = optimizee_from_json(optimizee);
  tasks::Optimizee task = tasks::make_optimizee(oc);
  tasks::L2OConfig cfg = tasks::default_l2o_config(tasks::parse_l2o_kind(kind));
  cfg.horizon = base.horizon;
  cfg.unroll = base.unroll;
  cfg.outer_steps = base.outer_steps;
  cfg.lr = base.lr;
  cfg.seed = g.seed;
  tasks::L2OReport report;
  auto opt = tasks::l2o_train(cfg, task, &report);
  if (g.verbose)
    for (std::size_t i = 0; i < report.outer_loss.size(); ++i) out << "outer " << i + 1 << " loss " << format(report.outer_loss[i]) << '\n';

  ad::Rng seeds = ad::Rng(g.seed).derive(99);
  std::vector<std::uint64_t> tune{seeds.next_u64(), seeds.next_u64(), seeds.next_u64()};
  double lr = tasks::tune_sgd_lr(task, tune, cfg.horizon);

  fs::create_directories(g.out);
  std::ofstream curves(fs::path(g.out) / "curves.csv");
  curves << "optimizer,seed,step,loss\n";
  double learned = 0, sgd = 0;
  for (std::size_t k = 0; k < eval_seeds; ++k) {
    std::uint64_t s = seeds.next_u64();
    zoo::Checkpoint init = tasks::init_optimizee(task, s);
    auto a = tasks::run_learned(opt, task, init, cfg.horizon);
    auto b = tasks::run_sgd(task, init, lr, cfg.horizon);
    for (std::size_t t = 0; t < a.size(); ++t) curves << kind << ',' << s << ',' << t << ',' << format(a[t]) << '\n';
    for (std::size_t t = 0; t < b.size(); ++t) curves << "sgd," << s << ',' << t << ',' << format(b[t]) << '\n';
    learned += a.back() / static_cast<double>(eval_seeds);
    sgd += b.back() / static_cast<double>(eval_seeds);
  }
  std::ofstream summary(fs::path(g.out) / "summary.csv");
  summary << "optimizer,mean_final_loss\n" << kind << ',' << format(learned) << "\nsgd," << format(sgd) << '\n';
  out << "aborted outer steps " << report.aborted << '\n';
  out << kind << " mean final loss " << format(learned) << '\n';
  out << "sgd (lr " << format(lr) << ") mean final loss " << format(sgd) << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Neural graph toolkit: convert networks to neural graphs, build tasks, train and evaluate models"};
  app.name("ngraph");
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--out", g.out, "Output file or directory");
  app.add_flag("--verbose", g.verbose, "Print per-epoch progress");

  std::string in, max_kernel, linear_mode = "as-1x1-conv", flatten_mode = "adaptive";
  bool direction = false, undirected = false, no_residual = false;
  std::size_t probes = 0;
  auto* convert = app.add_subcommand("convert", "Convert a checkpoint JSON into a neural graph file (--out)");
  convert->add_option("--in", in, "Checkpoint JSON")->required();
  convert->add_option("--max-kernel", max_kernel, "Kernel window WxH (default: largest kernel in the network)");
  convert->add_option("--linear-mode", linear_mode, "Linear layers after convolutions")
      ->check(CLI::IsMember({"as-1x1-conv", "as-mlp"}))->capture_default_str();
  convert->add_option("--flatten-mode", flatten_mode, "Handling of flatten layers")
      ->check(CLI::IsMember({"adaptive", "repeat-nodes", "virtual-layer"}))->capture_default_str();
  convert->add_flag("--direction", direction, "Add backward edge copies with direction channels");
  convert->add_flag("--undirected", undirected, "Like --direction, plus a shared E + E^T block");
  convert->add_option("--probes", probes, "Number of random probe inputs appended to node features");
  convert->add_flag("--no-residual", no_residual, "Omit residual edges");

  std::size_t trials = 10;
  auto* check = app.add_subcommand("check-sym", "Run the permutation symmetry checks on a checkpoint and print deviations");
  check->add_option("--in", in, "Checkpoint JSON")->required();
  check->add_option("--trials", trials, "Random hidden permutations")->check(CLI::PositiveNumber)->capture_default_str();

  std::size_t zoo_count = 20, zoo_image = 16;
  auto* gen_zoo = app.add_subcommand("gen-zoo", "Train a mini zoo of heterogeneous CNNs into --out");
  gen_zoo->add_option("--count", zoo_count, "Number of checkpoints")->check(CLI::PositiveNumber)->capture_default_str();
  gen_zoo->add_option("--image-size", zoo_image, "Side length of the training images")->check(CLI::Range(4, 64))->capture_default_str();

  std::string image, shape;
  std::size_t shape_size = 16;
  zoo::InrConfig inr;
  auto* fit_inr = app.add_subcommand("fit-inr", "Fit a sine-activated INR to a grayscale image and save it to --out");
  fit_inr->add_option("--image", image, "PGM image (P2 or P5)");
  fit_inr->add_option("--shape", shape, "Render a synthetic shape instead")->check(CLI::IsMember({"bar", "disk", "checker"}));
  fit_inr->add_option("--size", shape_size, "Synthetic image side length")->check(CLI::Range(4, 64))->capture_default_str();
  fit_inr->add_option("--steps", inr.steps, "Adam steps")->check(CLI::PositiveNumber)->capture_default_str();
  fit_inr->add_option("--hidden", inr.hidden, "Hidden width")->check(CLI::PositiveNumber)->capture_default_str();

  TaskOptions task_opts;
  auto* gen_task = app.add_subcommand("gen-task", "Build a task dataset archive in --out");
  gen_task->add_option("--task", task_opts.task, "Task")->required()->check(CLI::IsMember(kTasks));
  add_task_options(gen_task, task_opts);

  std::string data, config_file;
  std::vector<std::string> sets;
  TaskOptions train_task;
  auto* train_cmd = app.add_subcommand("train", "Train a neural graph model; writes model.json and metrics.csv to --out");
  train_cmd->add_option("--data", data, "Dataset archive directory");
  train_cmd->add_option("--task", train_task.task, "Build this task in memory instead of loading --data")
      ->check(CLI::IsMember({"inr-cls", "edit", "gen-pred"}));
  add_task_options(train_cmd, train_task);
  train_cmd->add_option("--config", config_file, "key = value training config file");
  train_cmd->add_option("--set", sets, "Override one option, e.g. --set model.layers=2 (repeatable)");

  std::string model, split = "test";
  auto* eval = app.add_subcommand("eval", "Evaluate a trained model; writes eval.csv and predictions.csv to --out");
  eval->add_option("--model", model, "model.json written by train")->required();
  eval->add_option("--data", data, "Dataset archive directory")->required();
  eval->add_option("--split", split, "Split to evaluate")->check(CLI::IsMember({"train", "val", "test"}))->capture_default_str();

  std::string kind = "ng-gnn", optimizee;
  tasks::L2OConfig l2o_cfg;
  std::size_t eval_seeds = 5;
  auto* l2o = app.add_subcommand("l2o", "Meta-train a learned optimizer and compare it with tuned SGD; writes curves.csv and summary.csv");
  l2o->add_option("--kind", kind, "Optimizer")->check(CLI::IsMember({"ff", "ng-gnn"}))->capture_default_str();
  l2o->add_option("--optimizee", optimizee, "optimizee.json from gen-task --task l2o");
  l2o->add_option("--outer-steps", l2o_cfg.outer_steps, "Meta-updates")->check(CLI::PositiveNumber)->capture_default_str();
  l2o->add_option("--horizon", l2o_cfg.horizon, "Inner steps per run")->check(CLI::PositiveNumber)->capture_default_str();
  l2o->add_option("--unroll", l2o_cfg.unroll, "Truncation length")->check(CLI::PositiveNumber)->capture_default_str();
  l2o->add_option("--meta-lr", l2o_cfg.lr, "Meta-optimizer learning rate")->capture_default_str();
  l2o->add_option("--eval-seeds", eval_seeds, "Held-out initializations")->check(CLI::PositiveNumber)->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*convert) return cmd_convert(g, in, max_kernel, linear_mode, flatten_mode, direction, undirected, probes, no_residual, out);
    if (*check) return cmd_check_sym(g, in, trials, out);
    if (*gen_zoo) return cmd_gen_zoo(g, zoo_count, zoo_image, out);
    if (*fit_inr) return cmd_fit_inr(g, image, shape, shape_size, inr, out);
    if (*gen_task) return cmd_gen_task(g, task_opts, out);
    if (*train_cmd) return cmd_train(g, data, train_task, config_file, sets, out);
    if (*eval) return cmd_eval(g, model, data, split, out);
    if (*l2o) return cmd_l2o(g, kind, optimizee, l2o_cfg, eval_seeds, out);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsage;
}

}  // namespace ngraph::cli
