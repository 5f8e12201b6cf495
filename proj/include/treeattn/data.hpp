#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "treeattn/kernels.hpp"

namespace treeattn {

// Class indices are fixed corpus-wide.
inline constexpr int kNumClasses = 3;
int label_index(const std::string& name);  // -1 for unknown / "-"
const char* label_name(int index);

struct ParseNode {
  std::optional<std::string> token;
  std::vector<std::size_t> children;  // ordered
  std::size_t span_begin = 0;         // token range [begin, end)
  std::size_t span_end = 0;
};

/// Rooted ordered tree covering both constituency shape (tokens only at
/// leaves, arity <= 2 after binarization) and dependency shape (a token at
/// every node).
struct ParseTree {
  std::vector<ParseNode> nodes;
  std::size_t root = 0;

  std::size_t size() const { return nodes.size(); }
  std::vector<std::size_t> post_order() const;
  /// Token-carrying nodes read off in sentence order.
  std::vector<std::string> tokens_in_order() const;
  std::size_t max_arity() const;
};

/// Parses a parenthesized bracketing like `( ( the cat ) sat )`.
/// Unary chains are collapsed; nodes with more than two children are
/// right-binarized; spans are computed over the leaf sequence.
ParseTree parse_sexpr(const std::string& text);

struct ConllRow {
  std::size_t index;  // 1-based
  std::string form;
  std::size_t head;  // 0 = root
};

/// Builds the dependency tree rooted at the head-0 word; children ordered
/// by sentence index. Rejects multiple/zero roots, cycles, bad heads.
ParseTree parse_conll(const std::vector<ConllRow>& rows);

/// Inverse of parse_conll for round-trip checks: head array indexed 1..n.
std::vector<std::size_t> flatten_heads(const ParseTree& tree);

struct Example {
  std::string pair_id;
  int gold = -1;
  std::optional<ParseTree> premise_const, hypothesis_const;
  std::optional<ParseTree> premise_dep, hypothesis_dep;
  std::vector<std::string> premise_tokens, hypothesis_tokens;
};

struct Corpus {
  std::vector<Example> examples;
  std::size_t skipped_unlabeled = 0;
  std::size_t skipped_malformed = 0;
};

/// Reads a JSON-lines corpus with SNLI field names: gold_label,
/// sentence1_binary_parse, sentence2_binary_parse, pairID. Records with
/// gold "-" are skipped and counted; malformed lines are skipped with a
/// warning, aborting if they exceed 10% of the file.
Corpus load_corpus(const std::string& path, bool lowercase = true);

/// Attaches dependency parses from a TSV sidecar: blocks of
/// `pairID.s1` / `pairID.s2` followed by `index\tform\thead` rows,
/// blank-line separated.
void load_dep_sidecar(const std::string& path, std::vector<Example>& examples,
                      bool lowercase = true);

using EmbeddingTable = std::unordered_map<std::string, std::vector<Scalar>>;

/// Whitespace-separated text, one token per line; wrong-arity lines are
/// skipped (first occurrence of a duplicate token wins).
EmbeddingTable load_embeddings(const std::string& path, std::size_t dim);

struct Vocabulary {
  std::vector<std::string> tokens;  // tokens[0] == "<unk>"
  std::unordered_map<std::string, std::size_t> index;

  static constexpr std::size_t kUnk = 0;
  std::size_t size() const { return tokens.size(); }
  std::size_t lookup(const std::string& token) const;
  std::uint64_t hash() const;  // FNV-1a over the token list
};

Vocabulary build_vocab(const std::vector<Example>& examples, std::size_t min_count);

}  // namespace treeattn
