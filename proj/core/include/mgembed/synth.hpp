#pragma once

#include <cstdint>

#include "mgembed/multigraph.hpp"
#include "mgembed/types.hpp"

namespace mgembed {

// Two-domain stochastic block model. Node i belongs to block i * blocks / n.
// Domain 0 draws each pair with probability p_in inside a block and p_out
// across blocks. Domain 1 keeps each domain-0 edge with probability
// `overlap` and adds a fresh draw at the same rates scaled by 1 - overlap.
// Edge weights are uniform in {1, 2, 3}.
struct SbmConfig {
  Index n = 60;
  int blocks = 2;
  double p_in = 0.7;
  double p_out = 0.02;
  double overlap = 0.6;
  std::uint64_t seed = 0;

  void validate() const;
};

MultiGraph make_sbm2(const SbmConfig& cfg);

int sbm_block(NodeId node, Index n, int blocks);

// Node 0 joined to every other node, in each domain.
MultiGraph make_star(Index n, int n_domains);

// Every pair joined, in each domain.
MultiGraph make_clique(Index n, int n_domains);

// Random-walk sessions over each domain: `users` users, one walk per domain
// of up to `length` steps, moving to a neighbour with probability
// proportional to edge weight. Items carry the graph's node labels.
BehaviorSequences sequences_from_walks(const MultiGraph& g, int users, int length, std::uint64_t seed);

}  // namespace mgembed
