#pragma once

#include <cstddef>
#include <vector>

#include "ngraph/autodiff/rng.hpp"
#include "ngraph/netzoo/checkpoint.hpp"

namespace ngraph::zoo {

/// Element of the neuron-permutation group: one permutation per neuron group
/// (see neuron_groups()). Gather convention: after permuting, position i of
/// group g holds what was at position perm[g][i].
struct NeuronPermutation {
  std::vector<std::vector<std::size_t>> groups;

  bool operator==(const NeuronPermutation&) const = default;
};

bool is_permutation(const std::vector<std::size_t>& p);
NeuronPermutation identity_permutation(const Checkpoint& net);
/// The permutation acting as `first` followed by `second`.
NeuronPermutation compose(const NeuronPermutation& second, const NeuronPermutation& first);
NeuronPermutation inverse(const NeuronPermutation& p);

/// Applies the group action to every parameter tensor. Norm layers need equal
/// input/output permutations and residual connections need permutations that
/// agree on (and preserve) the connected prefix; violations throw
/// CheckpointError because the result would not be representable.
Checkpoint permute(const Checkpoint& net, const NeuronPermutation& p);

/// Random permutation of hidden neurons that keeps the network function:
/// input and output groups stay fixed, attention heads move as blocks, and
/// norm/residual ties are respected.
NeuronPermutation random_hidden_permutation(const Checkpoint& net, ad::Rng& rng);

}  // namespace ngraph::zoo
