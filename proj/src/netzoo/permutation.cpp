#include "ngraph/netzoo/permutation.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace ngraph::zoo {

namespace {

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

struct LayerGroups {
  std::size_t in = 0, out = 0, heads = 0;
};

std::vector<LayerGroups> layer_groups(const Checkpoint& net, const std::vector<NeuronGroup>& groups) {
  std::vector<LayerGroups> lg(net.spec.size());
  for (std::size_t i = 0; i < net.spec.size(); ++i) {
    std::size_t l = i + 1;
    lg[i].in = output_group_of_layer(groups, l - 1);
    lg[i].out = output_group_of_layer(groups, l);
    for (std::size_t k = 0; k < groups.size(); ++k)
      if (groups[k].layer == l && groups[k].attention_heads) lg[i].heads = k;
  }
  return lg;
}

struct Tie {
  std::size_t a, b, m;
};

std::vector<Tie> ties(const Checkpoint& net, const std::vector<NeuronGroup>& groups) {
  auto lg = layer_groups(net, groups);
  std::vector<Tie> t;
  for (std::size_t i = 0; i < net.spec.size(); ++i) {
    const LayerSpec& s = net.spec[i];
    if (s.kind == LayerKind::norm) t.push_back({lg[i].in, lg[i].out, s.out_dim});
    if (s.residual_source) {
      std::size_t src = output_group_of_layer(groups, *s.residual_source);
      t.push_back({src, lg[i].out, std::min(groups[src].size, groups[lg[i].out].size)});
    }
  }
  return t;
}

}  // namespace

bool is_permutation(const std::vector<std::size_t>& p) {
  std::vector<bool> seen(p.size(), false);
  for (auto v : p) {
    if (v >= p.size() || seen[v]) return false;
    seen[v] = true;
  }
  return true;
}

NeuronPermutation identity_permutation(const Checkpoint& net) {
  NeuronPermutation p;
  for (const auto& g : neuron_groups(net)) p.groups.push_back(iota(g.size));
  return p;
}

NeuronPermutation compose(const NeuronPermutation& second, const NeuronPermutation& first) {
  if (first.groups.size() != second.groups.size()) throw CheckpointError("compose: group counts differ");
  NeuronPermutation r;
  for (std::size_t g = 0; g < first.groups.size(); ++g) {
    const auto& p = first.groups[g];
    const auto& q = second.groups[g];
    if (p.size() != q.size()) throw CheckpointError("compose: group sizes differ");
    std::vector<std::size_t> c(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) c[i] = p[q[i]];
    r.groups.push_back(std::move(c));
  }
  return r;
}

NeuronPermutation inverse(const NeuronPermutation& p) {
  NeuronPermutation r;
  for (const auto& g : p.groups) {
    std::vector<std::size_t> inv(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) inv[g[i]] = i;
    r.groups.push_back(std::move(inv));
  }
  return r;
}

Checkpoint permute(const Checkpoint& net, const NeuronPermutation& p) {
  validate(net);
  auto groups = neuron_groups(net);
  if (p.groups.size() != groups.size())
    throw CheckpointError("permutation has " + std::to_string(p.groups.size()) + " groups, network has " +
                          std::to_string(groups.size()));
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (p.groups[g].size() != groups[g].size)
      throw CheckpointError("permutation group " + std::to_string(g) + " has size " + std::to_string(p.groups[g].size()) +
                            ", network group has " + std::to_string(groups[g].size));
    if (!is_permutation(p.groups[g])) throw CheckpointError("group " + std::to_string(g) + " is not a permutation");
  }
  for (const Tie& t : ties(net, groups)) {
    const auto& pa = p.groups[t.a];
    const auto& pb = p.groups[t.b];
    for (std::size_t i = 0; i < t.m; ++i)
      if (pa[i] != pb[i] || pa[i] >= t.m)
        throw CheckpointError("permutation breaks the identity coupling between neuron groups " + std::to_string(t.a) +
                              " and " + std::to_string(t.b));
  }

  auto lg = layer_groups(net, groups);
  Checkpoint out = net;
  for (std::size_t i = 0; i < net.spec.size(); ++i) {
    const LayerSpec& s = net.spec[i];
    const LayerParams& src = net.params[i];
    LayerParams& dst = out.params[i];
    const auto& po = p.groups[lg[i].out];
    const auto& pi = p.groups[lg[i].in];
    switch (s.kind) {
      case LayerKind::linear: {
        // columns come in blocks of `block` when the layer follows a flatten
        std::size_t block = s.in_dim / groups[lg[i].in].size;
        for (std::size_t r = 0; r < s.out_dim; ++r) {
          dst.bias[r] = src.bias[po[r]];
          for (std::size_t c = 0; c < s.in_dim; ++c)
            dst.weight[r * s.in_dim + c] = src.weight[po[r] * s.in_dim + pi[c / block] * block + c % block];
        }
        break;
      }
      case LayerKind::conv2d: {
        std::size_t k = s.kernel->width * s.kernel->height;
        for (std::size_t o = 0; o < s.out_dim; ++o) {
          dst.bias[o] = src.bias[po[o]];
          for (std::size_t c = 0; c < s.in_dim; ++c)
            std::copy_n(src.weight.begin() + (po[o] * s.in_dim + pi[c]) * k, k, dst.weight.begin() + (o * s.in_dim + c) * k);
        }
        break;
      }
      case LayerKind::norm:
        for (std::size_t r = 0; r < s.out_dim; ++r) {
          dst.weight[r] = src.weight[po[r]];
          dst.bias[r] = src.bias[po[r]];
        }
        break;
      case LayerKind::attention: {
        const auto& ph = p.groups[lg[i].heads];
        std::size_t hd = s.heads * s.head_dim;
        for (std::size_t r = 0; r < hd; ++r)
          for (std::size_t c = 0; c < s.in_dim; ++c) {
            std::size_t from = ph[r] * s.in_dim + pi[c];
            dst.query[r * s.in_dim + c] = src.query[from];
            dst.key[r * s.in_dim + c] = src.key[from];
            dst.value[r * s.in_dim + c] = src.value[from];
          }
        for (std::size_t o = 0; o < s.out_dim; ++o) {
          dst.bias[o] = src.bias[po[o]];
          for (std::size_t r = 0; r < hd; ++r) dst.weight[o * hd + r] = src.weight[po[o] * hd + ph[r]];
        }
        break;
      }
      case LayerKind::flatten: break;
    }
  }
  return out;
}

NeuronPermutation random_hidden_permutation(const Checkpoint& net, ad::Rng& rng) {
  validate(net);
  auto groups = neuron_groups(net);
  std::size_t n = groups.size();
  auto tie_list = ties(net, groups);
  auto fixed = [&](std::size_t g) { return g == 0 || g + 1 == n; };

  std::vector<std::size_t> parent = iota(n);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const Tie& t : tie_list) parent[find(t.a)] = find(t.b);

  std::vector<std::set<std::size_t>> cuts(n);
  std::vector<std::size_t> span(n, 0), fixed_span(n, 0), group_span(n, 0);
  for (const Tie& t : tie_list) {
    std::size_t c = find(t.a);
    cuts[c].insert(t.m);
    span[c] = std::max(span[c], t.m);
    if (fixed(t.a) || fixed(t.b)) fixed_span[c] = std::max(fixed_span[c], t.m);
    group_span[t.a] = std::max(group_span[t.a], t.m);
    group_span[t.b] = std::max(group_span[t.b], t.m);
  }

  // one shared prefix permutation per tie component, constant between cuts
  std::vector<std::vector<std::size_t>> master(n);
  for (std::size_t c = 0; c < n; ++c) {
    if (find(c) != c || span[c] == 0) continue;
    master[c] = iota(span[c]);
    std::size_t lo = 0;
    for (std::size_t hi : cuts[c]) {
      if (hi > fixed_span[c] && hi > lo) {
        std::vector<std::size_t> seg(master[c].begin() + lo, master[c].begin() + hi);
        rng.shuffle(seg);
        std::copy(seg.begin(), seg.end(), master[c].begin() + lo);
      }
      lo = hi;
    }
  }

  NeuronPermutation p;
  for (std::size_t g = 0; g < n; ++g) {
    std::vector<std::size_t> perm = iota(groups[g].size);
    if (groups[g].attention_heads) {
      const LayerSpec& s = net.spec[groups[g].layer - 1];
      auto head_order = rng.permutation(s.heads);
      for (std::size_t h = 0; h < s.heads; ++h) {
        auto within = rng.permutation(s.head_dim);
        for (std::size_t k = 0; k < s.head_dim; ++k) perm[h * s.head_dim + k] = head_order[h] * s.head_dim + within[k];
      }
    } else if (!fixed(g)) {
      std::size_t m = group_span[g];
      if (m > 0) std::copy_n(master[find(g)].begin(), m, perm.begin());
      std::vector<std::size_t> rest(perm.begin() + m, perm.end());
      rng.shuffle(rest);
      std::copy(rest.begin(), rest.end(), perm.begin() + m);
    }
    p.groups.push_back(std::move(perm));
  }
  return p;
}

}  // namespace ngraph::zoo
