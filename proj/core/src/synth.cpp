#include "mgembed/synth.hpp"

#include <stdexcept>
#include <string>

#include "mgembed/rng.hpp"

namespace mgembed {

void SbmConfig::validate() const {
  if (n < 2) throw std::invalid_argument("sbm needs at least two nodes");
  if (blocks < 1 || blocks > n) throw std::invalid_argument("sbm block count must lie in [1, n]");
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(std::string(name) + " must lie in [0, 1]");
  };
  prob(p_in, "p_in");
  prob(p_out, "p_out");
  prob(overlap, "overlap");
}

int sbm_block(NodeId node, Index n, int blocks) { return static_cast<int>(node * blocks / n); }

MultiGraph make_sbm2(const SbmConfig& cfg) {
  cfg.validate();
  MultiGraph g(cfg.n, 2);
  Rng rng = make_stream(cfg.seed, "synth.sbm2");
  auto weight = [&rng] { return 1.0 + static_cast<double>(uniform_index(rng, 3)); };
  for (NodeId i = 0; i < cfg.n; ++i) {
    for (NodeId j = i + 1; j < cfg.n; ++j) {
      const bool same = sbm_block(i, cfg.n, cfg.blocks) == sbm_block(j, cfg.n, cfg.blocks);
      const double p = same ? cfg.p_in : cfg.p_out;
      const bool first = uniform01(rng) < p;
      if (first) g.add_edge(0, i, j, weight());
      const bool kept = first && uniform01(rng) < cfg.overlap;
      const bool fresh = uniform01(rng) < p * (1.0 - cfg.overlap);
      if (kept || fresh) g.add_edge(1, i, j, weight());
    }
  }
  return g;
}

MultiGraph make_star(Index n, int n_domains) {
  if (n < 2) throw std::invalid_argument("star needs at least two nodes");
  MultiGraph g(n, n_domains);
  for (int d = 0; d < n_domains; ++d) {
    for (NodeId j = 1; j < n; ++j) g.add_edge(d, 0, j, 1.0);
  }
  return g;
}

MultiGraph make_clique(Index n, int n_domains) {
  if (n < 2) throw std::invalid_argument("clique needs at least two nodes");
  MultiGraph g(n, n_domains);
  for (int d = 0; d < n_domains; ++d) {
    for (NodeId i = 0; i < n; ++i) {
      for (NodeId j = i + 1; j < n; ++j) g.add_edge(d, i, j, 1.0);
    }
  }
  return g;
}

BehaviorSequences sequences_from_walks(const MultiGraph& g, int users, int length, std::uint64_t seed) {
  if (users < 1 || length < 1) throw std::invalid_argument("walks need at least one user and one step");
  if (g.n_nodes() < 1) throw std::invalid_argument("walks need a non-empty graph");
  BehaviorSequences out;
  out.n_domains = g.n_domains();
  Rng rng = make_stream(seed, "synth.walks");
  for (int d = 0; d < g.n_domains(); ++d) {
    std::vector<std::vector<std::pair<NodeId, double>>> adj(static_cast<std::size_t>(g.n_nodes()));
    for (const auto& e : g.edges(d)) {
      adj[static_cast<std::size_t>(e.i)].emplace_back(e.j, e.weight);
      adj[static_cast<std::size_t>(e.j)].emplace_back(e.i, e.weight);
    }
    for (int u = 0; u < users; ++u) {
      SequenceRecord rec{"u" + std::to_string(u), d, {}, {}};
      auto node = static_cast<NodeId>(uniform_index(rng, static_cast<std::uint64_t>(g.n_nodes())));
      rec.items.push_back(g.label(node));
      for (int step = 1; step < length; ++step) {
        const auto& nb = adj[static_cast<std::size_t>(node)];
        if (nb.empty()) break;
        double total = 0.0;
        for (const auto& [v, w] : nb) total += w;
        double r = uniform01(rng) * total;
        node = nb.back().first;
        for (const auto& [v, w] : nb) {
          if (r < w) {
            node = v;
            break;
          }
          r -= w;
        }
        rec.items.push_back(g.label(node));
      }
      out.records.push_back(std::move(rec));
    }
  }
  return out;
}

}  // namespace mgembed
