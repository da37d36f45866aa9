#include "mgembed/graph_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "mgembed/error.hpp"

namespace mgembed {

namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::string_view strip_comment(std::string_view s) {
  auto pos = s.find('#');
  return pos == std::string_view::npos ? s : s.substr(0, pos);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t k = 0;
  while (k < s.size()) {
    while (k < s.size() && (s[k] == ' ' || s[k] == '\t' || s[k] == '\r')) ++k;
    std::size_t b = k;
    while (k < s.size() && s[k] != ' ' && s[k] != '\t' && s[k] != '\r') ++k;
    if (k > b) out.push_back(s.substr(b, k - b));
  }
  return out;
}

std::vector<std::string_view> split_on(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t b = 0;
  while (true) {
    auto e = s.find(sep, b);
    out.push_back(s.substr(b, e == std::string_view::npos ? std::string_view::npos : e - b));
    if (e == std::string_view::npos) break;
    b = e + 1;
  }
  return out;
}

std::optional<std::int64_t> parse_node_index(std::string_view tok) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || v < 0) return std::nullopt;
  return v;
}

std::optional<double> parse_double(std::string_view tok) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) return std::nullopt;
  return v;
}

struct RawEdge {
  std::string a, b;
  double w;
  std::size_t line;
};

std::vector<RawEdge> parse_edge_block(std::istream& is, const std::string& source, std::size_t& line_no,
                                      bool stop_at_percent) {
  std::vector<RawEdge> out;
  std::string line;
  while (std::getline(is, line)) {
    ++line_no;
    auto body = trim(strip_comment(line));
    if (stop_at_percent && body == "%") break;
    if (body.empty()) continue;
    auto toks = split_ws(body);
    if (toks.size() != 3) throw ParseError(source, line_no, "expected '<i> <j> <weight>'");
    auto w = parse_double(toks[2]);
    if (!w) throw ParseError(source, line_no, "bad weight '" + std::string(toks[2]) + "'");
    if (!(*w > 0.0) || !std::isfinite(*w)) throw ParseError(source, line_no, "weight must be finite and positive");
    if (toks[0] == toks[1]) throw ParseError(source, line_no, "self-loop on node '" + std::string(toks[0]) + "'");
    out.push_back(RawEdge{std::string(toks[0]), std::string(toks[1]), *w, line_no});
  }
  return out;
}

void add_or_throw(MultiGraph& g, DomainId d, NodeId a, NodeId b, double w, const std::string& source,
                  std::size_t line) {
  try {
    g.add_edge(d, a, b, w);
  } catch (const std::invalid_argument& e) {
    throw ParseError(source, line, e.what());
  }
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

MultiGraph parse_edge_lists(const std::vector<std::string>& contents, const std::vector<std::string>& names) {
  if (contents.empty()) throw DataError("no edge-list inputs given");
  std::vector<std::vector<RawEdge>> raw;
  for (std::size_t d = 0; d < contents.size(); ++d) {
    std::istringstream is(contents[d]);
    std::size_t line_no = 0;
    raw.push_back(parse_edge_block(is, names.at(d), line_no, false));
    if (raw.back().empty()) throw DataError(names[d] + ": no edges");
  }

  bool integer_mode = true;
  std::int64_t max_id = -1;
  for (const auto& block : raw) {
    for (const auto& e : block) {
      auto a = parse_node_index(e.a);
      auto b = parse_node_index(e.b);
      if (!a || !b) {
        integer_mode = false;
        break;
      }
      max_id = std::max({max_id, *a, *b});
    }
    if (!integer_mode) break;
  }

  if (integer_mode) {
    MultiGraph g(max_id + 1, static_cast<int>(raw.size()));
    for (std::size_t d = 0; d < raw.size(); ++d) {
      for (const auto& e : raw[d]) {
        add_or_throw(g, static_cast<DomainId>(d), *parse_node_index(e.a), *parse_node_index(e.b), e.w, names[d],
                     e.line);
      }
    }
    return g;
  }

  std::vector<std::string> labels;
  std::unordered_map<std::string, NodeId> index;
  auto intern = [&](const std::string& s) {
    auto [it, inserted] = index.emplace(s, static_cast<NodeId>(labels.size()));
    if (inserted) labels.push_back(s);
    return it->second;
  };
  std::vector<std::vector<std::pair<NodeId, NodeId>>> ids(raw.size());
  for (std::size_t d = 0; d < raw.size(); ++d) {
    for (const auto& e : raw[d]) {
      const NodeId a = intern(e.a);
      ids[d].emplace_back(a, intern(e.b));
    }
  }
  MultiGraph g(static_cast<Index>(labels.size()), static_cast<int>(raw.size()));
  for (std::size_t d = 0; d < raw.size(); ++d) {
    for (std::size_t k = 0; k < raw[d].size(); ++k) {
      add_or_throw(g, static_cast<DomainId>(d), ids[d][k].first, ids[d][k].second, raw[d][k].w, names[d],
                   raw[d][k].line);
    }
  }
  g.set_node_labels(std::move(labels));
  return g;
}

MultiGraph load_edge_lists(const std::vector<std::filesystem::path>& paths) {
  std::vector<std::string> contents, names;
  for (const auto& p : paths) {
    contents.push_back(read_file(p));
    names.push_back(p.string());
  }
  return parse_edge_lists(contents, names);
}

void write_edge_list(const MultiGraph& g, DomainId d, std::ostream& os) {
  for (const auto& e : g.edges(d)) os << e.i << ' ' << e.j << ' ' << format_double(e.weight) << '\n';
}

void write_graph(const MultiGraph& g, std::ostream& os) {
  os << g.n_nodes() << ' ' << g.n_domains();
  if (g.has_labels()) {
    os << " labeled\n";
    for (const auto& l : g.node_labels()) os << l << '\n';
    os << "%\n";
  } else {
    os << '\n';
  }
  for (int d = 0; d < g.n_domains(); ++d) {
    if (d > 0) os << "%\n";
    write_edge_list(g, d, os);
  }
}

MultiGraph read_graph(std::istream& is, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  std::string_view header;
  while (std::getline(is, line)) {
    ++line_no;
    header = trim(strip_comment(line));
    if (!header.empty()) break;
  }
  if (header.empty()) throw ParseError(source, line_no, "missing 'N D' header");
  auto toks = split_ws(header);
  if (toks.size() < 2 || toks.size() > 3 || (toks.size() == 3 && toks[2] != "labeled")) {
    throw ParseError(source, line_no, "header must be 'N D' or 'N D labeled'");
  }
  auto n = parse_node_index(toks[0]);
  auto dcount = parse_node_index(toks[1]);
  if (!n || !dcount || *dcount < 1) throw ParseError(source, line_no, "bad header values");
  MultiGraph g(*n, static_cast<int>(*dcount));

  if (toks.size() == 3) {
    std::vector<std::string> labels;
    labels.reserve(static_cast<std::size_t>(*n));
    while (static_cast<std::int64_t>(labels.size()) < *n) {
      if (!std::getline(is, line)) throw ParseError(source, line_no, "truncated label block");
      ++line_no;
      labels.emplace_back(trim(line));
    }
    if (!std::getline(is, line) || trim(line) != "%") {
      throw ParseError(source, line_no + 1, "expected '%' after label block");
    }
    ++line_no;
    try {
      g.set_node_labels(std::move(labels));
    } catch (const std::invalid_argument& e) {
      throw ParseError(source, line_no, e.what());
    }
  }

  for (int d = 0; d < g.n_domains(); ++d) {
    for (const auto& e : parse_edge_block(is, source, line_no, true)) {
      auto a = parse_node_index(e.a);
      auto b = parse_node_index(e.b);
      if (!a || !b) throw ParseError(source, e.line, "node ids in a graph file must be integers");
      add_or_throw(g, d, *a, *b, e.w, source, e.line);
    }
  }
  if (std::getline(is, line)) {
    ++line_no;
    throw ParseError(source, line_no, "more edge blocks than declared domains");
  }
  return g;
}

void save_graph(const MultiGraph& g, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  write_graph(g, out);
}

MultiGraph load_graph(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return read_graph(in, path.string());
}

BehaviorSequences read_sequences(std::istream& is, const std::string& source, std::optional<int> n_domains) {
  BehaviorSequences seqs;
  std::string line;
  std::size_t line_no = 0;
  int max_domain = -1;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || trim(line).front() == '#') continue;
    auto cols = split_on(line, '\t');
    if (cols.size() < 3 || cols.size() > 4) {
      throw ParseError(source, line_no, "expected '<user>\\t<domain>\\t<items>[\\t<timestamps>]'");
    }
    SequenceRecord rec;
    rec.user = std::string(trim(cols[0]));
    auto d = parse_node_index(trim(cols[1]));
    if (!d) throw ParseError(source, line_no, "bad domain id '" + std::string(cols[1]) + "'");
    rec.domain = static_cast<DomainId>(*d);
    if (n_domains && rec.domain >= *n_domains) {
      throw ParseError(source, line_no, "unknown domain id " + std::to_string(rec.domain));
    }
    for (auto item : split_on(cols[2], ',')) {
      item = trim(item);
      if (item.empty()) throw ParseError(source, line_no, "empty item id");
      rec.items.emplace_back(item);
    }
    if (cols.size() == 4) {
      for (auto ts : split_on(cols[3], ',')) {
        ts = trim(ts);
        std::int64_t v = 0;
        auto [ptr, ec] = std::from_chars(ts.data(), ts.data() + ts.size(), v);
        if (ec != std::errc() || ptr != ts.data() + ts.size()) {
          throw ParseError(source, line_no, "bad timestamp '" + std::string(ts) + "'");
        }
        rec.timestamps.push_back(v);
      }
      if (rec.timestamps.size() != rec.items.size()) {
        throw ParseError(source, line_no, "timestamp count does not match item count");
      }
    }
    max_domain = std::max(max_domain, rec.domain);
    seqs.records.push_back(std::move(rec));
  }
  if (seqs.records.empty()) throw DataError(source + ": no sequences");
  seqs.n_domains = n_domains ? *n_domains : max_domain + 1;
  return seqs;
}

BehaviorSequences load_sequences(const std::filesystem::path& path, std::optional<int> n_domains) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return read_sequences(in, path.string(), n_domains);
}

void write_sequences(const BehaviorSequences& seqs, std::ostream& os) {
  for (const auto& rec : seqs.records) {
    os << rec.user << '\t' << rec.domain << '\t';
    for (std::size_t k = 0; k < rec.items.size(); ++k) os << (k ? "," : "") << rec.items[k];
    if (!rec.timestamps.empty()) {
      os << '\t';
      for (std::size_t k = 0; k < rec.timestamps.size(); ++k) os << (k ? "," : "") << rec.timestamps[k];
    }
    os << '\n';
  }
}

}  // namespace mgembed
