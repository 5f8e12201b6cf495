#include "treeattn/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "treeattn/errors.hpp"

namespace treeattn {

int label_index(const std::string& name) {
  if (name == "entailment") return 0;
  if (name == "contradiction") return 1;
  if (name == "neutral") return 2;
  return -1;
}

const char* label_name(int index) {
  switch (index) {
    case 0: return "entailment";
    case 1: return "contradiction";
    case 2: return "neutral";
    default: return "?";
  }
}

std::vector<std::size_t> ParseTree::post_order() const {
  std::vector<std::size_t> order;
  order.reserve(nodes.size());
  // Explicit stack; SNLI trees are shallow but synthetic ones may not be.
  std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
  while (!stack.empty()) {
    auto& [id, next] = stack.back();
    if (next < nodes[id].children.size()) {
      stack.emplace_back(nodes[id].children[next++], 0);
    } else {
      order.push_back(id);
      stack.pop_back();
    }
  }
  return order;
}

std::vector<std::string> ParseTree::tokens_in_order() const {
  std::vector<std::pair<std::size_t, std::string>> with_pos;
  for (const ParseNode& n : nodes) {
    if (n.token) with_pos.emplace_back(n.span_begin, *n.token);
  }
  std::sort(with_pos.begin(), with_pos.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::string> out;
  out.reserve(with_pos.size());
  for (auto& [pos, tok] : with_pos) out.push_back(std::move(tok));
  return out;
}

std::size_t ParseTree::max_arity() const {
  std::size_t m = 0;
  for (const ParseNode& n : nodes) m = std::max(m, n.children.size());
  return m;
}

// ---------------------------------------------------------------------------
// s-expression parsing

namespace {

struct SexprToken {
  std::string text;  // "(" , ")" or a word
  std::size_t offset;
};

std::vector<SexprToken> lex_sexpr(const std::string& text) {
  std::vector<SexprToken> toks;
  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '(' || c == ')') {
      toks.push_back({std::string(1, c), i});
      ++i;
    } else {
      std::size_t start = i;
      while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i])) &&
             text[i] != '(' && text[i] != ')') {
        ++i;
      }
      toks.push_back({text.substr(start, i - start), start});
    }
  }
  return toks;
}

// Raw n-ary tree before binarization.
struct RawNode {
  std::optional<std::string> token;
  std::vector<std::size_t> children;
};

std::size_t parse_raw(const std::vector<SexprToken>& toks, std::size_t& pos,
                      std::vector<RawNode>& arena) {
  const SexprToken& t = toks[pos];
  if (t.text == ")") {
    throw DataError("parse_sexpr: unexpected ')' at offset " +
                    std::to_string(t.offset));
  }
  if (t.text != "(") {
    arena.push_back({t.text, {}});
    ++pos;
    return arena.size() - 1;
  }
  std::size_t open_off = t.offset;
  ++pos;  // consume '('
  std::vector<std::size_t> children;
  while (pos < toks.size() && toks[pos].text != ")") {
    children.push_back(parse_raw(toks, pos, arena));
  }
  if (pos >= toks.size()) {
    throw DataError("parse_sexpr: unclosed '(' at offset " +
                    std::to_string(open_off));
  }
  ++pos;  // consume ')'
  if (children.empty()) {
    throw DataError("parse_sexpr: empty group at offset " +
                    std::to_string(open_off));
  }
  arena.push_back({std::nullopt, std::move(children)});
  return arena.size() - 1;
}

// Collapses unary chains, then right-binarizes, numbering leaves
// left-to-right for spans. Returns the new node id.
std::size_t build_binarized(const std::vector<RawNode>& arena, std::size_t raw_id,
                            ParseTree& out, std::size_t& next_leaf) {
  const RawNode* n = &arena[raw_id];
  while (!n->token && n->children.size() == 1) {
    raw_id = n->children[0];
    n = &arena[raw_id];
  }
  if (n->token) {
    out.nodes.push_back({n->token, {}, next_leaf, next_leaf + 1});
    ++next_leaf;
    return out.nodes.size() - 1;
  }
  std::vector<std::size_t> kids;
  kids.reserve(n->children.size());
  for (std::size_t c : n->children) {
    kids.push_back(build_binarized(arena, c, out, next_leaf));
  }
  // ( a b c ) -> ( a ( b c ) )
  while (kids.size() > 2) {
    std::size_t right = kids.back();
    kids.pop_back();
    std::size_t left = kids.back();
    kids.pop_back();
    out.nodes.push_back({std::nullopt,
                         {left, right},
                         out.nodes[left].span_begin,
                         out.nodes[right].span_end});
    kids.push_back(out.nodes.size() - 1);
  }
  out.nodes.push_back({std::nullopt,
                       kids,
                       out.nodes[kids.front()].span_begin,
                       out.nodes[kids.back()].span_end});
  return out.nodes.size() - 1;
}

}  // namespace

ParseTree parse_sexpr(const std::string& text) {
  std::vector<SexprToken> toks = lex_sexpr(text);
  if (toks.empty()) throw DataError("parse_sexpr: empty input");
  std::vector<RawNode> arena;
  std::size_t pos = 0;
  std::size_t raw_root = parse_raw(toks, pos, arena);
  if (pos != toks.size()) {
    throw DataError("parse_sexpr: trailing content at offset " +
                    std::to_string(toks[pos].offset));
  }
  ParseTree tree;
  std::size_t next_leaf = 0;
  tree.root = build_binarized(arena, raw_root, tree, next_leaf);
  return tree;
}

// ---------------------------------------------------------------------------
// CoNLL parsing

ParseTree parse_conll(const std::vector<ConllRow>& rows) {
  std::size_t n = rows.size();
  if (n == 0) throw DataError("parse_conll: empty block");
  std::vector<std::size_t> heads(n + 1, 0);
  std::size_t root_index = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const ConllRow& r = rows[i];
    if (r.index != i + 1) {
      throw DataError("parse_conll: row " + std::to_string(i + 1) +
                      " has index " + std::to_string(r.index));
    }
    if (r.head > n) {
      throw DataError("parse_conll: row " + std::to_string(i + 1) +
                      " head " + std::to_string(r.head) + " out of range");
    }
    if (r.head == r.index) {
      throw DataError("parse_conll: row " + std::to_string(i + 1) +
                      " is its own head");
    }
    heads[r.index] = r.head;
    if (r.head == 0) {
      if (root_index != 0) {
        throw DataError("parse_conll: multiple roots (rows " +
                        std::to_string(root_index) + " and " +
                        std::to_string(r.index) + ")");
      }
      root_index = r.index;
    }
  }
  if (root_index == 0) throw DataError("parse_conll: no root row");
  // Cycle check: walk to root from every word.
  for (std::size_t start = 1; start <= n; ++start) {
    std::size_t cur = start, steps = 0;
    while (cur != 0) {
      cur = heads[cur];
      if (++steps > n) {
        throw DataError("parse_conll: cycle involving row " +
                        std::to_string(start));
      }
    }
  }

  ParseTree tree;
  tree.nodes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    tree.nodes[i].token = rows[i].form;
    tree.nodes[i].span_begin = i;
    tree.nodes[i].span_end = i + 1;
  }
  for (std::size_t i = 1; i <= n; ++i) {  // children ordered by index
    if (heads[i] != 0) tree.nodes[heads[i] - 1].children.push_back(i - 1);
  }
  tree.root = root_index - 1;
  return tree;
}

std::vector<std::size_t> flatten_heads(const ParseTree& tree) {
  std::vector<std::size_t> heads(tree.size(), 0);
  for (std::size_t id = 0; id < tree.size(); ++id) {
    for (std::size_t c : tree.nodes[id].children) heads[c] = id + 1;
  }
  return heads;
}

// ---------------------------------------------------------------------------
// Corpus loading

namespace {

std::string lowercased(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

void lowercase_tree(ParseTree& t) {
  for (ParseNode& n : t.nodes) {
    if (n.token) n.token = lowercased(*n.token);
  }
}

}  // namespace

Corpus load_corpus(const std::string& path, bool lowercase) {
  std::ifstream in(path);
  if (!in) throw DataError("load_corpus: cannot open " + path);
  Corpus corpus;
  std::string line;
  std::size_t line_no = 0, total = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ++total;
    try {
      nlohmann::json rec = nlohmann::json::parse(line);
      std::string gold = rec.at("gold_label").get<std::string>();
      if (gold == "-") {
        ++corpus.skipped_unlabeled;
        continue;
      }
      Example ex;
      ex.pair_id = rec.value("pairID", "line" + std::to_string(line_no));
      ex.gold = label_index(gold);
      if (ex.gold < 0) throw DataError("unknown label '" + gold + "'");
      ex.premise_const = parse_sexpr(rec.at("sentence1_binary_parse").get<std::string>());
      ex.hypothesis_const = parse_sexpr(rec.at("sentence2_binary_parse").get<std::string>());
      if (lowercase) {
        lowercase_tree(*ex.premise_const);
        lowercase_tree(*ex.hypothesis_const);
      }
      ex.premise_tokens = ex.premise_const->tokens_in_order();
      ex.hypothesis_tokens = ex.hypothesis_const->tokens_in_order();
      if (ex.premise_tokens.empty() || ex.hypothesis_tokens.empty()) {
        throw DataError("empty sentence");
      }
      corpus.examples.push_back(std::move(ex));
    } catch (const std::exception& e) {
      ++corpus.skipped_malformed;
      std::cerr << "load_corpus: skipping line " << line_no << ": " << e.what()
                << "\n";
    }
  }
  if (total > 0 && corpus.skipped_malformed * 10 > total) {
    throw DataError("load_corpus: " + std::to_string(corpus.skipped_malformed) +
                    " of " + std::to_string(total) + " lines malformed in " + path);
  }
  return corpus;
}

void load_dep_sidecar(const std::string& path, std::vector<Example>& examples,
                      bool lowercase) {
  std::ifstream in(path);
  if (!in) throw DataError("load_dep_sidecar: cannot open " + path);
  std::unordered_map<std::string, Example*> by_id;
  for (Example& ex : examples) by_id[ex.pair_id] = &ex;

  std::string line, block_id;
  std::vector<ConllRow> rows;
  std::size_t line_no = 0, block_line = 0;
  auto flush = [&]() {
    if (block_id.empty()) return;
    if (rows.empty()) {
      throw DataError("load_dep_sidecar: empty block '" + block_id +
                      "' at line " + std::to_string(block_line));
    }
    bool s1 = block_id.ends_with(".s1");
    bool s2 = block_id.ends_with(".s2");
    if (!s1 && !s2) {
      throw DataError("load_dep_sidecar: block id '" + block_id +
                      "' lacks .s1/.s2 suffix (line " + std::to_string(block_line) + ")");
    }
    std::string pair = block_id.substr(0, block_id.size() - 3);
    auto it = by_id.find(pair);
    if (it != by_id.end()) {
      ParseTree t = parse_conll(rows);
      if (lowercase) lowercase_tree(t);
      if (s1) {
        it->second->premise_dep = std::move(t);
      } else {
        it->second->hypothesis_dep = std::move(t);
      }
    }
    block_id.clear();
    rows.clear();
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      flush();
      continue;
    }
    if (block_id.empty()) {
      block_id = line;
      block_line = line_no;
      continue;
    }
    std::istringstream ss(line);
    ConllRow row;
    std::string idx, head;
    if (!std::getline(ss, idx, '\t') || !std::getline(ss, row.form, '\t') ||
        !std::getline(ss, head, '\t')) {
      throw DataError("load_dep_sidecar: bad row at line " + std::to_string(line_no));
    }
    row.index = std::stoul(idx);
    row.head = std::stoul(head);
    rows.push_back(std::move(row));
  }
  flush();
}

EmbeddingTable load_embeddings(const std::string& path, std::size_t dim) {
  std::ifstream in(path);
  if (!in) throw DataError("load_embeddings: cannot open " + path);
  EmbeddingTable table;
  std::string line;
  std::size_t skipped = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string token;
    ss >> token;
    std::vector<Scalar> v;
    v.reserve(dim);
    double x;
    while (ss >> x) v.push_back(static_cast<Scalar>(x));
    if (token.empty() || v.size() != dim) {
      ++skipped;
      continue;
    }
    table.emplace(std::move(token), std::move(v));  // first occurrence wins
  }
  if (table.empty()) {
    throw DataError("load_embeddings: no usable lines in " + path + " (" +
                    std::to_string(skipped) + " skipped)");
  }
  if (skipped > 0) {
    std::cerr << "load_embeddings: skipped " << skipped << " malformed lines\n";
  }
  return table;
}

std::size_t Vocabulary::lookup(const std::string& token) const {
  auto it = index.find(token);
  return it == index.end() ? kUnk : it->second;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  for (const std::string& t : tokens) {
    for (char c : t) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ull;
    }
    h ^= 0xff;
    h *= 1099511628211ull;
  }
  return h;
}

Vocabulary build_vocab(const std::vector<Example>& examples, std::size_t min_count) {
  std::map<std::string, std::size_t> freq;
  auto count_tree = [&](const std::optional<ParseTree>& t) {
    if (!t) return;
    for (const ParseNode& n : t->nodes) {
      if (n.token) ++freq[*n.token];
    }
  };
  for (const Example& ex : examples) {
    count_tree(ex.premise_const);
    count_tree(ex.hypothesis_const);
    count_tree(ex.premise_dep);
    count_tree(ex.hypothesis_dep);
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, c] : freq) {
    if (c >= min_count) kept.emplace_back(tok, c);
  }
  // Frequency descending, ties lexicographic.
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary vocab;
  vocab.tokens.push_back("<unk>");
  for (auto& [tok, c] : kept) vocab.tokens.push_back(tok);
  for (std::size_t i = 0; i < vocab.tokens.size(); ++i) {
    vocab.index[vocab.tokens[i]] = i;
  }
  return vocab;
}

}  // namespace treeattn
