// Command-line surface: train / eval / attend / neighbors / gradcheck.
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "treeattn/checkpoint.hpp"
#include "treeattn/errors.hpp"
#include "treeattn/gradcheck.hpp"
#include "treeattn/train.hpp"

using namespace treeattn;
using nlohmann::json;

#ifndef TREEATTN_BUILD_ID
#define TREEATTN_BUILD_ID "dev"
#endif

namespace {

struct Flags {
  std::string variant = "sat-clstm";
  std::string train_path, dev_path, test_path;
  std::string emb_path, sidecar_path;
  std::string checkpoint_path;
  std::string out_path;
  std::string manifest_path = "manifest.jsonl";
  std::string format = "json";
  std::string pair_id, premise, hypothesis, query;
  std::string mode = "phrase";
  TrainConfig cfg;
  std::size_t k = 10;
  std::size_t max_nodes = 6;
  double fd_step = 1e-5;
  bool exclude_exact = false;
  bool corrupt_tanh = false;  // gradcheck negative-control hook
};

std::uint64_t fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::uint64_t h = 1469598103934665603ull;
  char c;
  while (in.get(c)) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

json config_json(const TrainConfig& c) {
  return {{"embedding_size", c.embedding_size},
          {"hidden_size", c.hidden_size},
          {"learning_rate", c.learning_rate},
          {"l2", c.l2},
          {"clip_threshold", c.clip_threshold},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"early_stop_patience", c.early_stop_patience},
          {"share_encoders", c.share_encoders},
          {"tie_attention_weights", c.tie_attention_weights},
          {"freeze_embeddings", c.freeze_embeddings}};
}

// Appends one record per run; never truncates prior runs.
void write_manifest(const Flags& f, const std::string& command,
                    const std::vector<std::string>& inputs, double wall_secs,
                    const json& metrics) {
  json rec;
  rec["command"] = command;
  rec["config"] = config_json(f.cfg);
  rec["variant"] = f.variant;
  rec["seed"] = f.cfg.seed;
  json sums = json::object();
  for (const std::string& path : inputs) {
    if (!path.empty()) sums[path] = fnv1a_file(path);
  }
  rec["corpus_checksums"] = sums;
  rec["build_id"] = TREEATTN_BUILD_ID;
  rec["wall_clock_seconds"] = wall_secs;
  rec["metrics"] = metrics;
  std::ofstream out(f.manifest_path, std::ios::app);
  out << rec.dump() << "\n";
}

Corpus load_set(const std::string& corpus_path, const std::string& sidecar) {
  Corpus c = load_corpus(corpus_path);
  if (!sidecar.empty()) load_dep_sidecar(sidecar, c.examples);
  return c;
}

std::ostream& open_out(const std::string& path, std::ofstream& file) {
  if (path.empty()) return std::cout;
  file.open(path);
  if (!file) throw DataError("cannot open output file " + path);
  return file;
}

using Clock = std::chrono::steady_clock;
double secs_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int cmd_train(Flags& f) {
  auto t0 = Clock::now();
  ModelVariant variant = variant_from_name(f.variant);
  if (f.train_path.empty()) throw ConfigError("train: --train is required");
  if (f.checkpoint_path.empty()) throw ConfigError("train: --checkpoint is required");
  if (f.cfg.learning_rate == 0) {
    std::cerr << "warning: --lr 0 leaves parameters unchanged\n";
  }

  Corpus train = load_set(f.train_path, f.sidecar_path);
  Corpus dev;
  if (!f.dev_path.empty()) dev = load_set(f.dev_path, f.sidecar_path);
  Vocabulary vocab = build_vocab(train.examples, 1);
  EmbeddingTable table;
  if (!f.emb_path.empty()) table = load_embeddings(f.emb_path, f.cfg.embedding_size);

  TrainResult r = train_loop(variant, f.cfg, vocab, table, train.examples,
                             dev.examples);
  save_checkpoint(f.checkpoint_path, r.best_params, f.cfg, vocab);

  std::string metrics_path =
      f.out_path.empty() ? f.checkpoint_path + ".metrics.jsonl" : f.out_path;
  {
    std::ofstream m(metrics_path);
    for (const EpochRecord& rec : r.history) {
      m << json{{"epoch", rec.epoch},
                {"train_loss", rec.train_loss},
                {"dev_acc", rec.dev_acc}}
               .dump()
        << "\n";
    }
  }
  std::cout << "best_dev_acc " << r.best_dev_acc << "\n";
  write_manifest(f, "train", {f.train_path, f.dev_path, f.emb_path, f.sidecar_path},
                 secs_since(t0),
                 {{"best_dev_acc", r.best_dev_acc},
                  {"epochs_run", r.history.size()},
                  {"skipped_unlabeled", train.skipped_unlabeled},
                  {"skipped_malformed", train.skipped_malformed}});
  return 0;
}

int cmd_eval(Flags& f, const std::string& variant_flag_given) {
  auto t0 = Clock::now();
  if (f.checkpoint_path.empty()) throw ConfigError("eval: --checkpoint is required");
  if (f.test_path.empty()) throw ConfigError("eval: --test is required");
  Checkpoint ckpt = load_checkpoint(f.checkpoint_path);
  if (!variant_flag_given.empty() &&
      variant_from_name(variant_flag_given) != ckpt.params.variant) {
    throw ConfigError("eval: checkpoint holds variant '" +
                      std::string(variant_name(ckpt.params.variant)) +
                      "' but --variant says '" + variant_flag_given + "'");
  }
  f.variant = variant_name(ckpt.params.variant);
  f.cfg = ckpt.config;

  Corpus test = load_set(f.test_path, f.sidecar_path);
  if (test.examples.empty()) throw DataError("eval: empty evaluation set");
  EvalResult res = evaluate(ckpt.params, ckpt.vocab, test.examples);

  std::cout << "accuracy " << res.accuracy << " (" << res.total << " pairs)\n";
  std::cout << "confusion (rows gold, cols predicted):\n";
  for (int g = 0; g < kNumClasses; ++g) {
    std::cout << label_name(g);
    for (int p = 0; p < kNumClasses; ++p) std::cout << "\t" << res.confusion[g][p];
    std::cout << "\n";
  }
  if (!f.out_path.empty()) {
    std::ofstream out(f.out_path);
    for (std::size_t i = 0; i < test.examples.size(); ++i) {
      out << test.examples[i].pair_id << "\t"
          << label_name(test.examples[i].gold) << "\t"
          << label_name(res.predicted[i]) << "\n";
    }
  }
  write_manifest(f, "eval", {f.test_path, f.sidecar_path}, secs_since(t0),
                 {{"accuracy", res.accuracy}, {"total", res.total}});
  return 0;
}

std::string span_text(const std::vector<std::string>& tokens, std::size_t b,
                      std::size_t e) {
  std::string out;
  for (std::size_t i = b; i < e && i < tokens.size(); ++i) {
    if (!out.empty()) out += " ";
    out += tokens[i];
  }
  return out;
}

json trace_side(const std::vector<std::size_t>& ids,
                const std::vector<std::pair<std::size_t, std::size_t>>& spans,
                const std::vector<std::string>& tokens) {
  json arr = json::array();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    arr.push_back({{"id", ids[i]},
                   {"span", {spans[i].first, spans[i].second}},
                   {"text", span_text(tokens, spans[i].first, spans[i].second)}});
  }
  return arr;
}

void write_dot(std::ostream& out, const AttentionTrace& t,
               const std::vector<std::string>& ptoks,
               const std::vector<std::string>& htoks) {
  out << "digraph attention {\n  rankdir=LR;\n";
  for (std::size_t i = 0; i < t.premise_ids.size(); ++i) {
    out << "  p" << t.premise_ids[i] << " [shape=box, label=\""
        << span_text(ptoks, t.premise_spans[i].first, t.premise_spans[i].second)
        << "\"];\n";
  }
  for (std::size_t j = 0; j < t.hyp_ids.size(); ++j) {
    out << "  h" << t.hyp_ids[j] << " [label=\""
        << span_text(htoks, t.hyp_spans[j].first, t.hyp_spans[j].second)
        << "\"];\n";
  }
  char buf[32];
  for (std::size_t j = 0; j < t.rows.size(); ++j) {
    for (std::size_t i = 0; i < t.rows[j].size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.3f", double(t.rows[j][i]));
      out << "  h" << t.hyp_ids[j] << " -> p" << t.premise_ids[i]
          << " [style=dotted, label=\"" << buf << "\"];\n";
    }
  }
  out << "}\n";
}

int cmd_attend(Flags& f) {
  auto t0 = Clock::now();
  if (f.checkpoint_path.empty()) throw ConfigError("attend: --checkpoint is required");
  Checkpoint ckpt = load_checkpoint(f.checkpoint_path);
  f.variant = variant_name(ckpt.params.variant);
  f.cfg = ckpt.config;
  if (!variant_has_attention(ckpt.params.variant)) {
    throw ConfigError("attend: variant '" + f.variant + "' has no attention");
  }
  if (f.format != "json" && f.format != "dot") {
    throw ConfigError("attend: --format must be json or dot");
  }

  Example ex;
  if (!f.pair_id.empty()) {
    if (f.test_path.empty()) throw ConfigError("attend: --pair-id needs --test");
    Corpus c = load_set(f.test_path, f.sidecar_path);
    bool found = false;
    for (Example& cand : c.examples) {
      if (cand.pair_id == f.pair_id) {
        ex = std::move(cand);
        found = true;
        break;
      }
    }
    if (!found) throw DataError("attend: pair id '" + f.pair_id + "' not found");
  } else if (!f.premise.empty() && !f.hypothesis.empty()) {
    if (variant_needs_dep(ckpt.params.variant)) {
      throw ConfigError(
          "attend: inline parses are s-expressions; dependency variants need "
          "--test/--dep-sidecar with --pair-id");
    }
    ex.pair_id = "inline";
    ex.premise_const = parse_sexpr(f.premise);
    ex.hypothesis_const = parse_sexpr(f.hypothesis);
    ex.premise_tokens = ex.premise_const->tokens_in_order();
    ex.hypothesis_tokens = ex.hypothesis_const->tokens_in_order();
  } else {
    throw ConfigError("attend: give --pair-id with --test, or --premise and --hypothesis");
  }

  Graph g;
  ForwardResult fwd = build_forward(g, ckpt.params, ckpt.vocab, ex, true);
  if (!fwd.pred.trace) throw NumericError("attend: no trace produced");
  const AttentionTrace& tr = *fwd.pred.trace;

  std::ofstream file;
  std::ostream& out = open_out(f.out_path, file);
  if (f.format == "json") {
    json doc;
    doc["pair_id"] = ex.pair_id;
    doc["predicted"] = label_name(fwd.pred.label);
    doc["probs"] = fwd.pred.probs.data;
    doc["premise"] = trace_side(tr.premise_ids, tr.premise_spans, ex.premise_tokens);
    doc["hypothesis"] = trace_side(tr.hyp_ids, tr.hyp_spans, ex.hypothesis_tokens);
    doc["alpha"] = tr.rows;
    out << doc.dump(2) << "\n";
  } else {
    write_dot(out, tr, ex.premise_tokens, ex.hypothesis_tokens);
  }
  write_manifest(f, "attend", {f.test_path, f.sidecar_path}, secs_since(t0),
                 {{"pair_id", ex.pair_id}});
  return 0;
}

struct Phrase {
  std::string text;
  std::vector<Scalar> vec;
};

// Subtree-root hidden states for every node (phrase mode) or just the root
// (sentence mode) of one parsed sentence.
void collect_phrases(ModelParams& p, const Vocabulary& vocab, const Example& ex,
                     bool sentence_only, std::vector<Phrase>& out) {
  auto add_tree = [&](const ParseTree& tree, bool dep) {
    Graph g;
    EmbedFn embed = [&](const std::string& tok) {
      return g.embed(p.embeddings, vocab.lookup(tok));
    };
    EncodedTree enc = dep ? encode_dep_tree(g, *p.dtree_x, tree, embed)
                          : encode_const_tree(g, *p.ctree_x, tree, embed);
    auto subtree_text = [&](std::size_t id) {
      if (dep) {
        // A dependency subtree is not contiguous in general; list the words
        // of the subtree in sentence order.
        std::vector<std::pair<std::size_t, std::string>> words;
        std::vector<std::size_t> stack{id};
        while (!stack.empty()) {
          std::size_t n = stack.back();
          stack.pop_back();
          words.emplace_back(tree.nodes[n].span_begin, *tree.nodes[n].token);
          for (std::size_t c : tree.nodes[n].children) stack.push_back(c);
        }
        std::sort(words.begin(), words.end());
        std::string s;
        for (auto& [pos, w] : words) {
          if (!s.empty()) s += " ";
          s += w;
        }
        return s;
      }
      auto toks = tree.tokens_in_order();
      return span_text(toks, tree.nodes[id].span_begin, tree.nodes[id].span_end);
    };
    for (std::size_t i = 0; i < enc.size(); ++i) {
      std::size_t id = enc.order[i];
      if (sentence_only && id != tree.root) continue;
      out.push_back({subtree_text(id), g.value(enc.states[i].h).data});
    }
  };
  bool dep = variant_needs_dep(p.variant);
  const auto& pt = dep ? ex.premise_dep : ex.premise_const;
  const auto& ht = dep ? ex.hypothesis_dep : ex.hypothesis_const;
  if (pt) add_tree(*pt, dep);
  if (ht) add_tree(*ht, dep);
}

double cosine(const std::vector<Scalar>& a, const std::vector<Scalar>& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += double(a[i]) * b[i];
    na += double(a[i]) * a[i];
    nb += double(b[i]) * b[i];
  }
  double denom = std::sqrt(na) * std::sqrt(nb);
  return denom == 0 ? 0 : dot / denom;
}

int cmd_neighbors(Flags& f) {
  auto t0 = Clock::now();
  if (f.checkpoint_path.empty()) throw ConfigError("neighbors: --checkpoint is required");
  if (f.test_path.empty()) throw ConfigError("neighbors: --test index corpus is required");
  if (f.query.empty()) throw ConfigError("neighbors: --query is required");
  if (f.mode != "phrase" && f.mode != "sentence") {
    throw ConfigError("neighbors: --mode must be phrase or sentence");
  }
  Checkpoint ckpt = load_checkpoint(f.checkpoint_path);
  f.variant = variant_name(ckpt.params.variant);
  f.cfg = ckpt.config;
  if (!variant_needs_const(ckpt.params.variant) &&
      !variant_needs_dep(ckpt.params.variant)) {
    throw ConfigError("neighbors: variant '" + f.variant +
                      "' has no tree encoder to index subtrees with");
  }

  Corpus index = load_set(f.test_path, f.sidecar_path);
  std::vector<Phrase> phrases;
  for (const Example& ex : index.examples) {
    collect_phrases(ckpt.params, ckpt.vocab, ex, f.mode == "sentence", phrases);
  }
  if (phrases.empty()) throw DataError("neighbors: empty index");

  // Query: an s-expression, or a flat token list (implicitly bracketed for
  // the constituency encoder, chained for the dependency encoder).
  Example q;
  std::string query = f.query;
  if (variant_needs_const(ckpt.params.variant)) {
    if (query.find('(') == std::string::npos &&
        query.find(' ') != std::string::npos) {
      query = "( " + query + " )";
    }
    q.premise_const = parse_sexpr(query);
  } else {
    std::istringstream words(query);
    std::vector<ConllRow> rows;
    std::string w;
    while (words >> w) rows.push_back({rows.size() + 1, w, rows.size()});
    if (rows.empty()) throw ConfigError("neighbors: empty --query");
    q.premise_dep = parse_conll(rows);
  }
  std::vector<Phrase> qv;
  collect_phrases(ckpt.params, ckpt.vocab, q, true, qv);
  const Phrase& query_phrase = qv.front();

  std::vector<std::pair<double, std::size_t>> ranked;
  for (std::size_t i = 0; i < phrases.size(); ++i) {
    if (f.exclude_exact && phrases[i].text == query_phrase.text) continue;
    ranked.emplace_back(cosine(query_phrase.vec, phrases[i].vec), i);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::size_t n = std::min(f.k, ranked.size());

  std::ofstream file;
  std::ostream& out = open_out(f.out_path, file);
  for (std::size_t r = 0; r < n; ++r) {
    out << (r + 1) << "\t" << ranked[r].first << "\t"
        << phrases[ranked[r].second].text << "\n";
  }
  write_manifest(f, "neighbors", {f.test_path, f.sidecar_path}, secs_since(t0),
                 {{"index_size", phrases.size()}, {"returned", n}});
  return 0;
}

int cmd_gradcheck(Flags& f) {
  auto t0 = Clock::now();
  ModelVariant variant = variant_from_name(f.variant);
  Graph::corrupt_tanh_backward = f.corrupt_tanh;
  auto blocks = check_model_gradients(variant, f.cfg.seed, f.cfg.hidden_size,
                                      f.cfg.embedding_size, f.max_nodes, f.fd_step);
  Graph::corrupt_tanh_backward = false;
  bool ok = true;
  double worst = 0;
  for (const BlockError& b : blocks) {
    bool pass = b.max_rel_err < 1e-4;
    ok = ok && pass;
    worst = std::max(worst, b.max_rel_err);
    std::cout << b.name << "\t" << b.max_rel_err << (pass ? "" : "\tFAIL") << "\n";
  }
  std::cout << (ok ? "gradcheck ok" : "gradcheck FAILED") << "\n";
  write_manifest(f, "gradcheck", {}, secs_since(t0),
                 {{"worst_rel_err", worst}, {"ok", ok}});
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  Flags f;
  std::string variant_flag;  // distinguishes "given" from the default
  // gradcheck uses small sizes by default; train keeps Table-1 sizes.
  std::size_t gc_hidden = 8, gc_embed = 8;

  CLI::App app{"syntax-based attention models for natural language inference"};
  app.require_subcommand(1);

  auto add_common = [&](CLI::App* c, bool sizes_small) {
    c->add_option("--variant", variant_flag, "model variant");
    c->add_option("--seed", f.cfg.seed, "RNG seed");
    c->add_option("--manifest", f.manifest_path, "manifest file (appended)");
    c->add_option("--out", f.out_path, "output file");
    if (sizes_small) {
      c->add_option("--hidden", gc_hidden, "hidden size");
      c->add_option("--embed-dim", gc_embed, "embedding size");
    } else {
      c->add_option("--hidden", f.cfg.hidden_size, "hidden size");
      c->add_option("--embed-dim", f.cfg.embedding_size, "embedding size");
    }
  };

  CLI::App* train = app.add_subcommand("train", "train a model");
  add_common(train, false);
  train->add_option("--train", f.train_path, "training corpus (jsonl)");
  train->add_option("--dev", f.dev_path, "development corpus (jsonl)");
  train->add_option("--emb", f.emb_path, "pretrained embeddings");
  train->add_option("--dep-sidecar", f.sidecar_path, "dependency parses (tsv)");
  train->add_option("--checkpoint", f.checkpoint_path, "checkpoint output path");
  train->add_option("--lr", f.cfg.learning_rate, "learning rate");
  train->add_option("--l2", f.cfg.l2, "L2 strength");
  train->add_option("--clip", f.cfg.clip_threshold, "gradient norm threshold");
  train->add_option("--batch", f.cfg.batch_size, "minibatch size");
  train->add_option("--epochs", f.cfg.epochs, "epoch budget");
  train->add_option("--patience", f.cfg.early_stop_patience, "early-stop patience");
  train->add_flag("--share-encoders", f.cfg.share_encoders,
                  "one encoder for both sentences");
  train->add_flag("--tie-attention", f.cfg.tie_attention_weights,
                  "tie attention score/carry weights");
  train->add_flag("--freeze-embeddings", f.cfg.freeze_embeddings,
                  "do not update the embedding table");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval, false);
  eval->add_option("--checkpoint", f.checkpoint_path, "checkpoint path");
  eval->add_option("--test", f.test_path, "evaluation corpus (jsonl)");
  eval->add_option("--dep-sidecar", f.sidecar_path, "dependency parses (tsv)");

  CLI::App* attend = app.add_subcommand("attend", "export an attention trace");
  add_common(attend, false);
  attend->add_option("--checkpoint", f.checkpoint_path, "checkpoint path");
  attend->add_option("--test", f.test_path, "corpus holding --pair-id");
  attend->add_option("--dep-sidecar", f.sidecar_path, "dependency parses (tsv)");
  attend->add_option("--pair-id", f.pair_id, "pair to visualize");
  attend->add_option("--premise", f.premise, "inline premise s-expression");
  attend->add_option("--hypothesis", f.hypothesis, "inline hypothesis s-expression");
  attend->add_option("--format", f.format, "json|dot");

  CLI::App* neighbors = app.add_subcommand("neighbors", "nearest phrases by cosine");
  add_common(neighbors, false);
  neighbors->add_option("--checkpoint", f.checkpoint_path, "checkpoint path");
  neighbors->add_option("--test", f.test_path, "index corpus (jsonl)");
  neighbors->add_option("--dep-sidecar", f.sidecar_path, "dependency parses (tsv)");
  neighbors->add_option("--query", f.query, "query phrase or s-expression");
  neighbors->add_option("--mode", f.mode, "phrase|sentence");
  neighbors->add_option("--k", f.k, "neighbors to return");
  neighbors->add_flag("--exclude-exact", f.exclude_exact,
                      "skip exact string matches");

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference self-check");
  add_common(gradcheck, true);
  gradcheck->add_option("--max-nodes", f.max_nodes, "max tree nodes");
  gradcheck->add_option("--step", f.fd_step, "finite-difference step");
  gradcheck
      ->add_flag("--corrupt-tanh", f.corrupt_tanh,
                 "negative control: tilt the tanh backward rule")
      ->group("");  // hidden

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      if (!variant_flag.empty()) f.variant = variant_flag;
      return cmd_train(f);
    }
    if (eval->parsed()) return cmd_eval(f, variant_flag);
    if (attend->parsed()) return cmd_attend(f);
    if (neighbors->parsed()) return cmd_neighbors(f);
    if (gradcheck->parsed()) {
      if (!variant_flag.empty()) f.variant = variant_flag;
      f.cfg.hidden_size = gc_hidden;
      f.cfg.embedding_size = gc_embed;
      return cmd_gradcheck(f);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
