#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mgembed/error.hpp"
#include "mgembed/eval.hpp"
#include "mgembed/graph_io.hpp"
#include "mgembed/link_eval.hpp"
#include "mgembed/rng.hpp"
#include "mgembed/synth.hpp"
#include "mgembed/trainer.hpp"

namespace mgembed::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kToolVersion = "0.1.0";

// Flags shared by the commands that train.
struct TrainFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<std::string> alpha;
  std::optional<std::string> optimizer;
  std::optional<double> lr;
  std::optional<std::string> dims;
  std::optional<int> negatives;
  std::optional<std::string> dropout;
  std::optional<int> threads;
  std::optional<std::size_t> batch_size;
  bool step_on_normalized = false;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--config", f.config, "key = value training config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "root seed");
  cmd->add_option("--epochs", f.epochs);
  cmd->add_option("--alpha", f.alpha, "mgda or fixed:<a>");
  cmd->add_option("--optimizer", f.optimizer, "sgd or adam");
  cmd->add_option("--lr", f.lr, "learning rate");
  cmd->add_option("--dims", f.dims, "Es,E");
  cmd->add_option("--negatives", f.negatives, "negatives per positive");
  cmd->add_option("--dropout", f.dropout, "shared,specific");
  cmd->add_option("--threads", f.threads);
  cmd->add_option("--batch-size", f.batch_size);
  cmd->add_flag("--step-on-normalized", f.step_on_normalized, "update the shared layer with normalized gradients");
}

TrainConfig resolve_config(const TrainFlags& f) {
  TrainConfig cfg = f.config.empty() ? TrainConfig{} : load_config_file(f.config);
  if (f.seed) cfg.seed = *f.seed;
  if (f.epochs) cfg.epochs = *f.epochs;
  if (f.alpha) set_alpha_mode(cfg, *f.alpha);
  if (f.optimizer) set_config_value(cfg, "optimizer", *f.optimizer);
  if (f.lr) cfg.learning_rate = *f.lr;
  if (f.dims) set_config_value(cfg, "dims", *f.dims);
  if (f.negatives) cfg.negatives = *f.negatives;
  if (f.dropout) set_config_value(cfg, "dropout", *f.dropout);
  if (f.threads) cfg.threads = *f.threads;
  if (f.batch_size) cfg.batch_size = *f.batch_size;
  if (f.step_on_normalized) cfg.shared_step = SharedStep::kNormalized;
  cfg.validate();
  return cfg;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

json config_json(const TrainConfig& cfg) {
  json j = json::object();
  std::istringstream in(to_config_text(cfg));
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(' '));
      s.erase(s.find_last_not_of(' ') + 1);
      return s;
    };
    j[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return j;
}

class Manifest {
 public:
  Manifest(std::string command, const std::vector<std::string>& args)
      : j_{{"tool", "mgembed"}, {"version", kToolVersion}, {"command", std::move(command)}, {"args", args},
           {"inputs", json::array()}, {"outputs", json::array()}} {}

  void input(const std::string& path) {
    j_["inputs"].push_back(json{{"path", path}, {"fnv1a64", hex64(fnv1a64(read_file(path)))}});
  }
  void output(const std::string& path) { j_["outputs"].push_back(path); }
  void seed(std::uint64_t s) { j_["seed"] = s; }
  void config(const TrainConfig& cfg) { j_["config"] = config_json(cfg); }
  void set(const std::string& key, json value) { j_[key] = std::move(value); }

  void write(const fs::path& path) const { write_text(path, j_.dump(2) + "\n"); }

  static void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw DataError("failed writing '" + path.string() + "'");
  }

 private:
  json j_;
};

fs::path manifest_path_for(const fs::path& out) { return fs::path(out.string() + ".manifest.json"); }

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

void write_embeddings_file(const EmbeddingSet& emb, const MultiGraph& g, const fs::path& path) {
  std::ostringstream os;
  write_embeddings(emb, g, os);
  Manifest::write_text(path, os.str());
}

EmbeddingSet load_aligned_embeddings(const std::string& path, const MultiGraph& g) {
  std::istringstream in(read_file(path));
  const auto loaded = read_embeddings(in, path);
  if (loaded.embeddings.n_domains() != g.n_domains()) {
    throw DataError("embeddings have " + std::to_string(loaded.embeddings.n_domains()) + " domains, graph has " +
                    std::to_string(g.n_domains()));
  }
  return align_embeddings(loaded, g);
}

// ---- build-graph ----

struct BuildGraphArgs {
  std::string sequences;
  std::vector<std::string> edges;
  std::string out;
  std::int64_t min_weight = 1;
  std::optional<double> train_fraction;
  std::uint64_t seed = 0;
};

int cmd_build_graph(const BuildGraphArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  if (a.sequences.empty() == a.edges.empty()) {
    throw CLI::ValidationError("build-graph", "give exactly one of --sequences or --edges");
  }
  Manifest m("build-graph", args);
  MultiGraph g;
  if (!a.sequences.empty()) {
    m.input(a.sequences);
    auto seqs = load_sequences(a.sequences);
    if (a.train_fraction) {
      const auto split = split_sequences(seqs, RecSplitConfig{*a.train_fraction, a.seed});
      seqs = split.train;
      m.set("train_fraction", *a.train_fraction);
      m.set("temporal_split", split.temporal);
    }
    g = build_from_sequences(seqs, a.min_weight);
  } else {
    if (a.train_fraction) throw CLI::ValidationError("--train-fraction", "only applies to --sequences");
    std::vector<fs::path> paths(a.edges.begin(), a.edges.end());
    for (const auto& p : a.edges) m.input(p);
    g = load_edge_lists(paths);
  }
  m.seed(a.seed);
  ensure_parent(a.out);
  save_graph(g, a.out);
  m.output(a.out);
  json counts = json::array();
  for (int d = 0; d < g.n_domains(); ++d) counts.push_back(g.n_edges(d));
  m.set("nodes", g.n_nodes());
  m.set("edges", counts);
  m.write(manifest_path_for(a.out));
  out << "graph: " << g.n_nodes() << " nodes, " << g.n_domains() << " domains, edges " << counts.dump() << '\n';
  return kOk;
}

// ---- train ----

struct TrainArgs {
  std::string graph;
  std::string out;
  std::string resume;
  TrainFlags flags;
};

int cmd_train(const TrainArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  const MultiGraph g = load_graph(a.graph);
  Manifest m("train", args);
  m.input(a.graph);
  std::optional<Trainer> trainer;
  if (!a.resume.empty()) {
    m.input(a.resume);
    trainer.emplace(Trainer::resume(g, load_checkpoint(a.resume)));
  } else {
    trainer.emplace(g, resolve_config(a.flags));
  }
  const TrainConfig& cfg = trainer->config();
  m.config(cfg);
  m.seed(cfg.seed);

  const fs::path dir(a.out);
  fs::create_directories(dir);
  trainer->run();

  save_checkpoint(trainer->checkpoint(), dir / "checkpoint.json");
  write_embeddings_file(trainer->embeddings(), g, dir / "embeddings.tsv");
  {
    std::ostringstream csv;
    trainer->log().write_csv(csv);
    Manifest::write_text(dir / "train_log.csv", csv.str());
  }
  Manifest::write_text(dir / "summary.json", trainer->log().summary_json());
  for (const char* f : {"checkpoint.json", "embeddings.tsv", "train_log.csv", "summary.json"}) {
    m.output((dir / f).string());
  }
  m.write(dir / "manifest.json");
  out << trainer->log().summary_json();
  return kOk;
}

// ---- export ----

struct ExportArgs {
  std::string graph;
  std::string checkpoint;
  std::string out;
};

int cmd_export(const ExportArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  const MultiGraph g = load_graph(a.graph);
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const Trainer t = Trainer::resume(g, ckpt);
  Manifest m("export", args);
  m.input(a.graph);
  m.input(a.checkpoint);
  m.config(t.config());
  m.seed(t.config().seed);
  ensure_parent(a.out);
  write_embeddings_file(t.embeddings(), g, a.out);
  m.output(a.out);
  m.write(manifest_path_for(a.out));
  out << "wrote " << a.out << '\n';
  return kOk;
}

// ---- eval-rec ----

struct EvalRecArgs {
  std::string graph;
  std::string embeddings;
  std::string sequences;
  std::string out;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  std::vector<Index> grid;
  bool include_train = false;
};

json metrics_json(const RecMetrics& r) {
  json recall = json::object(), mrr = json::object();
  for (std::size_t k = 0; k < r.grid.size(); ++k) {
    recall[std::to_string(r.grid[k])] = r.recall[k];
    mrr[std::to_string(r.grid[k])] = r.mrr[k];
  }
  return json{{"domain", r.domain}, {"users", r.users}, {"recall", recall}, {"mrr", mrr}};
}

int cmd_eval_rec(const EvalRecArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  if (!(a.train_fraction > 0.0 && a.train_fraction < 1.0)) {
    throw CLI::ValidationError("--train-fraction", "must lie in (0, 1)");
  }
  const auto grid = a.grid.empty() ? default_topn_grid() : a.grid;
  if (std::any_of(grid.begin(), grid.end(), [](Index n) { return n <= 0; })) {
    throw CLI::ValidationError("--topn-grid", "entries must be positive");
  }
  const MultiGraph g = load_graph(a.graph);
  const EmbeddingSet emb = load_aligned_embeddings(a.embeddings, g);
  const auto seqs = load_sequences(a.sequences, g.n_domains());
  const auto split = split_sequences(seqs, RecSplitConfig{a.train_fraction, a.seed});
  ProfileBuildStats stats;
  auto profiles = build_profiles(split, g, &stats);

  json report{{"task", "recommendation"},
              {"temporal_split", split.temporal},
              {"train_fraction", a.train_fraction},
              {"dropped_unknown_items", stats.dropped_unknown_items},
              {"domains", json::array()}};
  for (int d = 0; d < g.n_domains(); ++d) {
    report["domains"].push_back(metrics_json(evaluate_recommendation(profiles, emb, d, grid, a.include_train)));
  }
  Manifest m("eval-rec", args);
  m.input(a.graph);
  m.input(a.embeddings);
  m.input(a.sequences);
  m.seed(a.seed);
  ensure_parent(a.out);
  Manifest::write_text(a.out, report.dump(2) + "\n");
  m.output(a.out);
  m.write(manifest_path_for(a.out));
  out << report.dump(2) << '\n';
  return kOk;
}

// ---- eval-link ----

struct EvalLinkArgs {
  std::string graph;
  std::string embeddings;
  std::string out;
  std::string retained_out;
  double fraction = 0.3;
  std::string combiner = "best";
  TrainFlags flags;
};

int cmd_eval_link(const EvalLinkArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  if (!(a.fraction > 0.0 && a.fraction < 1.0)) throw CLI::ValidationError("--fraction", "must lie in (0, 1)");
  std::optional<Combiner> combiner;
  if (a.combiner != "best") combiner = parse_combiner(a.combiner);

  const TrainConfig cfg = resolve_config(a.flags);
  const MultiGraph g = load_graph(a.graph);
  const auto splits = make_link_splits(g, a.fraction, cfg.seed);
  const MultiGraph retained = retained_graph(g, splits);

  Manifest m("eval-link", args);
  m.input(a.graph);
  m.seed(cfg.seed);
  if (!a.retained_out.empty()) {
    ensure_parent(a.retained_out);
    save_graph(retained, a.retained_out);
    m.output(a.retained_out);
  }

  EmbeddingSet emb;
  if (!a.embeddings.empty()) {
    m.input(a.embeddings);
    emb = load_aligned_embeddings(a.embeddings, retained);
  } else {
    m.config(cfg);
    emb = train(retained, cfg).embeddings;
  }

  json report{{"task", "link-prediction"}, {"fraction", a.fraction}, {"domains", json::array()}};
  for (const auto& s : splits) {
    const LinkScores best = combiner ? link_classify(s, emb, *combiner) : link_classify_best(s, emb);
    report["domains"].push_back(json{{"domain", s.domain},
                                     {"auc", best.auc},
                                     {"f1", best.f1},
                                     {"combiner", to_string(best.combiner)},
                                     {"test_positives", s.removed.size()}});
  }
  ensure_parent(a.out);
  Manifest::write_text(a.out, report.dump(2) + "\n");
  m.output(a.out);
  m.write(manifest_path_for(a.out));
  out << report.dump(2) << '\n';
  return kOk;
}

// ---- synth ----

struct SynthArgs {
  std::string kind = "sbm2";
  Index nodes = 60;
  int blocks = 2;
  double p_in = SbmConfig{}.p_in;
  double p_out = SbmConfig{}.p_out;
  double overlap = SbmConfig{}.overlap;
  int domains = 2;
  std::uint64_t seed = 0;
  std::string out;
  std::string edges_prefix;
  std::string sequences_out;
  int users = 100;
  int walk_length = 10;
};

int cmd_synth(const SynthArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  if (a.nodes < 2) throw CLI::ValidationError("--nodes", "must be at least 2");
  MultiGraph g;
  if (a.kind == "sbm2") {
    g = make_sbm2(SbmConfig{a.nodes, a.blocks, a.p_in, a.p_out, a.overlap, a.seed});
  } else if (a.kind == "star") {
    g = make_star(a.nodes, a.domains);
  } else if (a.kind == "clique") {
    g = make_clique(a.nodes, a.domains);
  } else {
    throw CLI::ValidationError("--kind", "expected sbm2, star or clique");
  }
  Manifest m("synth", args);
  m.seed(a.seed);
  ensure_parent(a.out);
  save_graph(g, a.out);
  m.output(a.out);
  if (!a.edges_prefix.empty()) {
    for (int d = 0; d < g.n_domains(); ++d) {
      const std::string path = a.edges_prefix + "." + std::to_string(d) + ".txt";
      ensure_parent(path);
      std::ostringstream os;
      write_edge_list(g, d, os);
      Manifest::write_text(path, os.str());
      m.output(path);
    }
  }
  if (!a.sequences_out.empty()) {
    std::ostringstream os;
    write_sequences(sequences_from_walks(g, a.users, a.walk_length, a.seed), os);
    ensure_parent(a.sequences_out);
    Manifest::write_text(a.sequences_out, os.str());
    m.output(a.sequences_out);
  }
  m.write(manifest_path_for(a.out));
  out << "synth " << a.kind << ": " << g.n_nodes() << " nodes\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cross-domain item embeddings on weighted multigraphs"};
  app.name("mgembed");
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  BuildGraphArgs bg;
  auto* build = app.add_subcommand("build-graph", "build a multigraph from sequences or edge lists");
  build->add_option("--sequences", bg.sequences, "sequence file");
  build->add_option("--edges", bg.edges, "edge list, one per domain (repeatable)");
  build->add_option("--out", bg.out, "graph file")->required();
  build->add_option("--min-weight", bg.min_weight, "drop pairs seen fewer times")->check(CLI::PositiveNumber);
  build->add_option("--train-fraction", bg.train_fraction, "build from the train part of the eval split");
  build->add_option("--seed", bg.seed, "split seed");

  TrainArgs tr;
  auto* trn = app.add_subcommand("train", "train embeddings");
  trn->add_option("--graph", tr.graph, "graph file")->required();
  trn->add_option("--out", tr.out, "output directory")->required();
  trn->add_option("--resume", tr.resume, "continue from a checkpoint");
  add_train_flags(trn, tr.flags);

  ExportArgs ex;
  auto* exp = app.add_subcommand("export", "write embeddings from a checkpoint");
  exp->add_option("--graph", ex.graph, "graph file")->required();
  exp->add_option("--checkpoint", ex.checkpoint, "checkpoint file")->required();
  exp->add_option("--out", ex.out, "embedding file")->required();

  EvalRecArgs er;
  auto* rec = app.add_subcommand("eval-rec", "Recall@N and MRR@N");
  rec->add_option("--graph", er.graph, "graph the embeddings were trained on")->required();
  rec->add_option("--embeddings", er.embeddings, "embedding file")->required();
  rec->add_option("--sequences", er.sequences, "full sequence file")->required();
  rec->add_option("--out", er.out, "report file")->required();
  rec->add_option("--train-fraction", er.train_fraction);
  rec->add_option("--seed", er.seed, "split seed");
  rec->add_option("--topn-grid", er.grid, "comma-separated N values")->delimiter(',');
  rec->add_flag("--include-train", er.include_train, "keep train items among candidates");

  EvalLinkArgs el;
  auto* link = app.add_subcommand("eval-link", "held-out link prediction");
  link->add_option("--graph", el.graph, "full graph file")->required();
  link->add_option("--embeddings", el.embeddings, "embeddings trained on the retained graph");
  link->add_option("--out", el.out, "report file")->required();
  link->add_option("--retained-out", el.retained_out, "write the retained graph");
  link->add_option("--fraction", el.fraction, "fraction of edges removed");
  link->add_option("--combiner", el.combiner, "add, hadamard or best");
  add_train_flags(link, el.flags);

  SynthArgs sy;
  auto* syn = app.add_subcommand("synth", "synthetic fixtures");
  syn->add_option("--kind", sy.kind, "sbm2, star or clique");
  syn->add_option("--nodes", sy.nodes);
  syn->add_option("--blocks", sy.blocks);
  syn->add_option("--p-in", sy.p_in);
  syn->add_option("--p-out", sy.p_out);
  syn->add_option("--overlap", sy.overlap);
  syn->add_option("--domains", sy.domains);
  syn->add_option("--seed", sy.seed);
  syn->add_option("--out", sy.out, "graph file")->required();
  syn->add_option("--edges-prefix", sy.edges_prefix, "also write <prefix>.<d>.txt edge lists");
  syn->add_option("--sequences-out", sy.sequences_out, "also write random-walk sequences");
  syn->add_option("--users", sy.users);
  syn->add_option("--walk-length", sy.walk_length);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    if (build->parsed()) return cmd_build_graph(bg, args, out);
    if (trn->parsed()) return cmd_train(tr, args, out);
    if (exp->parsed()) return cmd_export(ex, args, out);
    if (rec->parsed()) return cmd_eval_rec(er, args, out);
    if (link->parsed()) return cmd_eval_link(el, args, out);
    if (syn->parsed()) return cmd_synth(sy, args, out);
    return kUsage;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::invalid_argument& e) {
    err << "invalid argument: " << e.what() << '\n';
    return kUsage;
  } catch (const std::out_of_range& e) {
    err << "invalid argument: " << e.what() << '\n';
    return kUsage;
  } catch (const fs::filesystem_error& e) {
    err << "file error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace mgembed::cli
