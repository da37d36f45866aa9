#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mgembed/multigraph.hpp"

namespace mgembed {

// Edge-list text, one file per domain: `<i> <j> <weight>` per line, `#`
// starts a comment. If every node token is a non-negative integer the ids are
// used directly (N = max id + 1); otherwise tokens are treated as labels and
// indexed in order of first appearance across all files.
//
// Throws ParseError (with line number) on malformed lines, self-loops,
// non-positive weights and duplicate pairs within one file; DataError when a
// file holds no edges.
MultiGraph load_edge_lists(const std::vector<std::filesystem::path>& paths);

// In-memory variant; `names` are used in error messages.
MultiGraph parse_edge_lists(const std::vector<std::string>& contents, const std::vector<std::string>& names);

// Graph file: header `N D` (or `N D labeled` followed by N label lines and a
// `%` line), then D edge-list blocks separated by `%` lines. Weights are
// written in shortest round-trip form so save/load is exact.
void write_graph(const MultiGraph& g, std::ostream& os);
MultiGraph read_graph(std::istream& is, const std::string& source = "<graph>");
void save_graph(const MultiGraph& g, const std::filesystem::path& path);
MultiGraph load_graph(const std::filesystem::path& path);

// Writes domain d as a plain edge-list file.
void write_edge_list(const MultiGraph& g, DomainId d, std::ostream& os);

// Sequence file: `<user>\t<domain>\t<item,item,...>[\t<ts,ts,...>]`. When
// n_domains is not given it is inferred as max domain id + 1.
BehaviorSequences read_sequences(std::istream& is, const std::string& source = "<sequences>",
                                 std::optional<int> n_domains = std::nullopt);
BehaviorSequences load_sequences(const std::filesystem::path& path, std::optional<int> n_domains = std::nullopt);
void write_sequences(const BehaviorSequences& seqs, std::ostream& os);

// Shortest decimal text that parses back to exactly `x`.
std::string format_double(double x);

std::string read_file(const std::filesystem::path& path);

}  // namespace mgembed
