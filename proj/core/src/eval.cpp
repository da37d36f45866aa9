#include "mgembed/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "mgembed/error.hpp"
#include "mgembed/graph_io.hpp"
#include "mgembed/rng.hpp"

namespace mgembed {

void user_embeddings(std::vector<UserProfile>& profiles, const EmbeddingSet& emb, DomainId d) {
  if (d < 0 || d >= emb.n_domains()) throw std::out_of_range("user_embeddings: domain out of range");
  const Matrix& x = emb.domain[static_cast<std::size_t>(d)];
  for (auto& p : profiles) {
    if (p.domain != d) continue;
    if (p.train_items.empty()) {
      p.excluded = true;
      p.embedding.resize(0);
      continue;
    }
    Vector sum = Vector::Zero(x.cols());
    for (NodeId item : p.train_items) {
      if (item < 0 || item >= x.rows()) throw std::out_of_range("user item outside embedding rows");
      sum += x.row(item).transpose();
    }
    p.embedding = sum / static_cast<double>(p.train_items.size());
  }
}

std::vector<NodeId> rank_items(const Vector& user, const Matrix& items, Index top_n,
                               const std::unordered_set<NodeId>& exclude) {
  if (top_n <= 0) throw std::invalid_argument("top-n must be positive");
  if (user.size() != items.cols()) throw std::invalid_argument("user and item dimensions differ");
  const double user_norm = user.norm();
  std::vector<std::pair<double, NodeId>> scored;
  scored.reserve(static_cast<std::size_t>(items.rows()));
  for (Index k = 0; k < items.rows(); ++k) {
    if (exclude.contains(k)) continue;
    const double item_norm = items.row(k).norm();
    const double cosine = (item_norm > 0.0 && user_norm > 0.0) ? items.row(k).dot(user) / (item_norm * user_norm) : 0.0;
    scored.emplace_back(cosine, k);
  }
  const auto keep = std::min<std::size_t>(static_cast<std::size_t>(top_n), scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(),
                    [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
  std::vector<NodeId> out(keep);
  for (std::size_t k = 0; k < keep; ++k) out[k] = scored[k].second;
  return out;
}

std::vector<RankedList> rank_profiles(std::vector<UserProfile>& profiles, const EmbeddingSet& emb, DomainId d,
                                      Index top_n, bool include_train) {
  const Matrix& x = emb.domain.at(static_cast<std::size_t>(d));
  std::vector<RankedList> out;
  out.reserve(profiles.size());
  for (auto& p : profiles) {
    if (p.domain != d) throw std::invalid_argument("rank_profiles: profile from another domain");
    RankedList list{p.user, d, {}};
    if (!p.excluded && p.embedding.size() > 0 && p.embedding.squaredNorm() == 0.0) p.excluded = true;
    if (!p.excluded && p.embedding.size() > 0) {
      std::unordered_set<NodeId> exclude;
      if (!include_train) exclude.insert(p.train_items.begin(), p.train_items.end());
      list.items = rank_items(p.embedding, x, top_n, exclude);
    }
    out.push_back(std::move(list));
  }
  return out;
}

namespace {

bool counts(const UserProfile& p) { return !p.excluded && !p.test_items.empty(); }

void check_aligned(const std::vector<UserProfile>& profiles, const std::vector<RankedList>& ranked, Index n) {
  if (n <= 0) throw std::invalid_argument("n must be positive");
  if (profiles.size() != ranked.size()) throw std::invalid_argument("ranked lists are not aligned with profiles");
  for (std::size_t k = 0; k < profiles.size(); ++k) {
    if (profiles[k].user != ranked[k].user || profiles[k].domain != ranked[k].domain) {
      throw std::invalid_argument("ranked list " + std::to_string(k) + " belongs to a different user or domain");
    }
  }
}

}  // namespace

double recall_at_n(const std::vector<UserProfile>& profiles, const std::vector<RankedList>& ranked, Index n) {
  check_aligned(profiles, ranked, n);
  std::size_t hits = 0;
  std::size_t truth = 0;
  for (std::size_t k = 0; k < profiles.size(); ++k) {
    if (!counts(profiles[k])) continue;
    const std::unordered_set<NodeId> t(profiles[k].test_items.begin(), profiles[k].test_items.end());
    truth += t.size();
    const auto limit = std::min<std::size_t>(static_cast<std::size_t>(n), ranked[k].items.size());
    for (std::size_t r = 0; r < limit; ++r) hits += t.contains(ranked[k].items[r]) ? 1 : 0;
  }
  if (truth == 0) throw DataError("recall is undefined without ground-truth items");
  return static_cast<double>(hits) / static_cast<double>(truth);
}

double mrr_at_n(const std::vector<UserProfile>& profiles, const std::vector<RankedList>& ranked, Index n) {
  check_aligned(profiles, ranked, n);
  double sum = 0.0;
  std::size_t users = 0;
  for (std::size_t k = 0; k < profiles.size(); ++k) {
    if (!counts(profiles[k])) continue;
    ++users;
    const std::unordered_set<NodeId> t(profiles[k].test_items.begin(), profiles[k].test_items.end());
    const auto limit = std::min<std::size_t>(static_cast<std::size_t>(n), ranked[k].items.size());
    for (std::size_t r = 0; r < limit; ++r) {
      if (t.contains(ranked[k].items[r])) {
        sum += 1.0 / static_cast<double>(r + 1);
        break;
      }
    }
  }
  if (users == 0) throw DataError("MRR is undefined for an empty user set");
  return sum / static_cast<double>(users);
}

std::vector<Index> default_topn_grid() { return {10, 20, 30, 40, 50, 60, 70, 80, 90, 100, 1000}; }

RecSplit split_sequences(const BehaviorSequences& seqs, const RecSplitConfig& cfg) {
  if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) {
    throw std::invalid_argument("train fraction must lie in (0, 1)");
  }
  if (seqs.records.empty()) throw DataError("no sequences to split");

  bool temporal = true;
  std::int64_t t_min = 0, t_max = 0;
  bool first = true;
  for (const auto& rec : seqs.records) {
    if (rec.timestamps.empty()) {
      temporal = false;
      break;
    }
    for (auto t : rec.timestamps) {
      t_min = first ? t : std::min(t_min, t);
      t_max = first ? t : std::max(t_max, t);
      first = false;
    }
  }
  if (t_max == t_min) temporal = false;

  // Per record, which events go to training.
  std::vector<std::vector<bool>> is_train(seqs.records.size());
  if (temporal) {
    const double span = cfg.train_fraction * static_cast<double>(t_max - t_min);
    for (std::size_t r = 0; r < seqs.records.size(); ++r) {
      for (auto t : seqs.records[r].timestamps) is_train[r].push_back(static_cast<double>(t - t_min) < span);
    }
  } else {
    std::map<std::pair<std::string, DomainId>, std::vector<std::pair<std::size_t, std::size_t>>> events;
    for (std::size_t r = 0; r < seqs.records.size(); ++r) {
      is_train[r].assign(seqs.records[r].items.size(), false);
      for (std::size_t k = 0; k < seqs.records[r].items.size(); ++k) {
        events[{seqs.records[r].user, seqs.records[r].domain}].emplace_back(r, k);
      }
    }
    Rng rng = make_stream(cfg.seed, "rec-split");
    for (auto& [key, ev] : events) {
      for (std::size_t k = ev.size(); k > 1; --k) std::swap(ev[k - 1], ev[uniform_index(rng, k)]);
      const auto n_train = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::floor(cfg.train_fraction * static_cast<double>(ev.size()) + 0.5)));
      for (std::size_t k = 0; k < std::min(n_train, ev.size()); ++k) is_train[ev[k].first][ev[k].second] = true;
    }
  }

  RecSplit out;
  out.temporal = temporal;
  out.train.n_domains = seqs.n_domains;
  std::map<std::pair<std::string, DomainId>, std::size_t> holdout_index;
  for (std::size_t r = 0; r < seqs.records.size(); ++r) {
    const auto& rec = seqs.records[r];
    auto [it, inserted] = holdout_index.emplace(std::make_pair(rec.user, rec.domain), out.holdouts.size());
    if (inserted) out.holdouts.push_back(RecSplit::Holdout{rec.user, rec.domain, {}, {}});
    auto& h = out.holdouts[it->second];
    SequenceRecord train_rec{rec.user, rec.domain, {}, {}};
    for (std::size_t k = 0; k < rec.items.size(); ++k) {
      if (is_train[r][k]) {
        train_rec.items.push_back(rec.items[k]);
        if (!rec.timestamps.empty()) train_rec.timestamps.push_back(rec.timestamps[k]);
        h.train_items.push_back(rec.items[k]);
      } else {
        h.test_items.push_back(rec.items[k]);
      }
    }
    if (!train_rec.items.empty()) out.train.records.push_back(std::move(train_rec));
  }
  for (auto& h : out.holdouts) {
    auto dedupe = [](std::vector<std::string>& v) {
      std::vector<std::string> unique;
      std::unordered_set<std::string> seen;
      for (auto& s : v) {
        if (seen.insert(s).second) unique.push_back(s);
      }
      v = std::move(unique);
    };
    dedupe(h.train_items);
    dedupe(h.test_items);
  }
  return out;
}

std::vector<UserProfile> build_profiles(const RecSplit& split, const MultiGraph& vocabulary, ProfileBuildStats* stats) {
  ProfileBuildStats local;
  std::vector<UserProfile> out;
  for (const auto& h : split.holdouts) {
    UserProfile p;
    p.user = h.user;
    p.domain = h.domain;
    std::unordered_set<NodeId> train;
    for (const auto& item : h.train_items) {
      if (auto id = vocabulary.find_label(item)) {
        p.train_items.push_back(*id);
        train.insert(*id);
      } else {
        ++local.dropped_unknown_items;
      }
    }
    for (const auto& item : h.test_items) {
      auto id = vocabulary.find_label(item);
      if (!id) {
        ++local.dropped_unknown_items;
        continue;
      }
      if (!train.contains(*id)) p.test_items.push_back(*id);
    }
    out.push_back(std::move(p));
  }
  if (stats) *stats = local;
  return out;
}

RecMetrics evaluate_recommendation(std::vector<UserProfile>& profiles, const EmbeddingSet& emb, DomainId d,
                                   const std::vector<Index>& grid, bool include_train) {
  if (grid.empty()) throw std::invalid_argument("empty top-n grid");
  std::vector<UserProfile> subset;
  for (const auto& p : profiles) {
    if (p.domain == d) subset.push_back(p);
  }
  user_embeddings(subset, emb, d);
  const Index max_n = *std::max_element(grid.begin(), grid.end());
  const auto ranked = rank_profiles(subset, emb, d, max_n, include_train);
  RecMetrics m;
  m.domain = d;
  m.grid = grid;
  m.users = static_cast<std::size_t>(std::count_if(subset.begin(), subset.end(), counts));
  for (Index n : grid) {
    m.recall.push_back(recall_at_n(subset, ranked, n));
    m.mrr.push_back(mrr_at_n(subset, ranked, n));
  }
  // Write back user vectors and exclusion flags.
  std::size_t k = 0;
  for (auto& p : profiles) {
    if (p.domain == d) p = std::move(subset[k++]);
  }
  return m;
}

void write_embeddings(const EmbeddingSet& emb, const MultiGraph& g, std::ostream& os) {
  if (emb.shared.rows() != g.n_nodes()) throw std::invalid_argument("embedding rows do not match graph nodes");
  os << "# mgembed-embeddings nodes=" << g.n_nodes() << " domains=" << emb.n_domains()
     << " shared_dim=" << emb.shared.cols() << " dim=" << (emb.domain.empty() ? 0 : emb.domain.front().cols()) << '\n';
  if (!emb.trained_on.empty()) {
    os << "# trained_on=";
    for (std::size_t d = 0; d < emb.trained_on.size(); ++d) {
      std::ostringstream hex;
      hex << std::hex << emb.trained_on[d];
      os << (d ? "," : "") << hex.str();
    }
    os << '\n';
  }
  auto block = [&](const Matrix& x, const std::string& tag) {
    for (Index i = 0; i < x.rows(); ++i) {
      os << g.label(i) << '\t' << tag;
      for (Index c = 0; c < x.cols(); ++c) os << '\t' << format_double(x(i, c));
      os << '\n';
    }
  };
  block(emb.shared, "shared");
  for (int d = 0; d < emb.n_domains(); ++d) block(emb.domain[static_cast<std::size_t>(d)], std::to_string(d));
}

LoadedEmbeddings read_embeddings(std::istream& is, const std::string& source) {
  LoadedEmbeddings out;
  std::unordered_map<std::string, std::size_t> label_index;
  // block key: -1 for shared, d otherwise
  std::map<int, std::vector<std::pair<std::size_t, std::vector<double>>>> blocks;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      const std::string tag = "# trained_on=";
      if (line.rfind(tag, 0) == 0) {
        std::stringstream ss(line.substr(tag.size()));
        std::string tok;
        while (std::getline(ss, tok, ',')) out.embeddings.trained_on.push_back(std::stoull(tok, nullptr, 16));
      }
      continue;
    }
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, '\t')) cols.push_back(tok);
    if (cols.size() < 3) throw ParseError(source, line_no, "expected '<label>\\t<domain>\\t<values...>'");
    int key = -1;
    if (cols[1] != "shared") {
      auto [ptr, ec] = std::from_chars(cols[1].data(), cols[1].data() + cols[1].size(), key);
      if (ec != std::errc() || ptr != cols[1].data() + cols[1].size() || key < 0) {
        throw ParseError(source, line_no, "bad domain tag '" + cols[1] + "'");
      }
    }
    std::vector<double> values;
    for (std::size_t c = 2; c < cols.size(); ++c) {
      double v = 0;
      auto [ptr, ec] = std::from_chars(cols[c].data(), cols[c].data() + cols[c].size(), v);
      if (ec != std::errc() || ptr != cols[c].data() + cols[c].size()) {
        throw ParseError(source, line_no, "bad value '" + cols[c] + "'");
      }
      values.push_back(v);
    }
    auto [it, inserted] = label_index.emplace(cols[0], out.labels.size());
    if (inserted) out.labels.push_back(cols[0]);
    blocks[key].emplace_back(it->second, std::move(values));
  }
  if (!blocks.contains(-1)) throw DataError(source + ": no shared embedding block");
  const auto n = out.labels.size();
  auto assemble = [&](int key) {
    const auto& rows = blocks.at(key);
    if (rows.size() != n) throw DataError(source + ": block " + std::to_string(key) + " does not cover every node");
    const auto width = rows.front().second.size();
    Matrix m(static_cast<Index>(n), static_cast<Index>(width));
    std::vector<bool> seen(n, false);
    for (const auto& [idx, values] : rows) {
      if (values.size() != width) throw DataError(source + ": ragged embedding rows");
      if (seen[idx]) throw DataError(source + ": duplicate row for '" + out.labels[idx] + "'");
      seen[idx] = true;
      for (std::size_t c = 0; c < width; ++c) m(static_cast<Index>(idx), static_cast<Index>(c)) = values[c];
    }
    return m;
  };
  out.embeddings.shared = assemble(-1);
  int expected = 0;
  for (const auto& [key, rows] : blocks) {
    if (key < 0) continue;
    if (key != expected++) throw DataError(source + ": domain blocks are not numbered 0..D-1");
    out.embeddings.domain.push_back(assemble(key));
  }
  return out;
}

EmbeddingSet align_embeddings(const LoadedEmbeddings& loaded, const MultiGraph& g) {
  std::unordered_map<std::string, Index> row_of;
  for (std::size_t k = 0; k < loaded.labels.size(); ++k) row_of.emplace(loaded.labels[k], static_cast<Index>(k));
  std::vector<Index> rows(static_cast<std::size_t>(g.n_nodes()));
  for (NodeId v = 0; v < g.n_nodes(); ++v) {
    auto it = row_of.find(g.label(v));
    if (it == row_of.end()) throw DataError("embeddings have no row for node '" + g.label(v) + "'");
    rows[static_cast<std::size_t>(v)] = it->second;
  }
  auto gather = [&](const Matrix& m) {
    Matrix out(g.n_nodes(), m.cols());
    for (NodeId v = 0; v < g.n_nodes(); ++v) out.row(v) = m.row(rows[static_cast<std::size_t>(v)]);
    return out;
  };
  EmbeddingSet emb;
  emb.shared = gather(loaded.embeddings.shared);
  for (const auto& x : loaded.embeddings.domain) emb.domain.push_back(gather(x));
  emb.trained_on = loaded.embeddings.trained_on;
  return emb;
}

}  // namespace mgembed
