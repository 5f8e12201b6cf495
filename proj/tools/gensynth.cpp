// Generates the bundled synthetic corpora:
//  - synth_overfit_train.jsonl (+ dependency sidecar): 50 memorizable pairs
//    with class-correlated keywords, used by the overfit training oracle.
//  - synth_structure_{train,dev}.jsonl: pairs whose label is a function of
//    the two bracketing shapes alone, so bag-of-words models sit at chance
//    while tree models can read the answer off the parse.
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

namespace {

using nlohmann::json;

const std::vector<std::string> kLabels = {"entailment", "contradiction",
                                          "neutral"};
const std::vector<std::vector<std::string>> kClassWords = {
    {"yes", "agree", "indeed"},
    {"no", "deny", "never"},
    {"maybe", "unsure", "perhaps"},
};
const std::vector<std::string> kFiller = {"cat",  "dog",  "bird", "tree",
                                          "road", "house", "river", "cloud"};

std::string bracket_chain(const std::vector<std::string>& toks) {
  // Right-branching: ( t0 ( t1 ( t2 t3 ) ) )
  std::string out = toks.back();
  for (std::size_t i = toks.size() - 1; i-- > 0;) {
    out = "( " + toks[i] + " " + out + " )";
  }
  return out;
}

// The three 4-leaf shapes the structure corpus distinguishes.
std::string bracket_shape(const std::vector<std::string>& t, int shape) {
  switch (shape) {
    case 0:  // left chain
      return "( ( ( " + t[0] + " " + t[1] + " ) " + t[2] + " ) " + t[3] + " )";
    case 1:  // right chain
      return "( " + t[0] + " ( " + t[1] + " ( " + t[2] + " " + t[3] + " ) ) )";
    default:  // balanced
      return "( ( " + t[0] + " " + t[1] + " ) ( " + t[2] + " " + t[3] + " ) )";
  }
}

void write_record(std::ofstream& out, const std::string& id,
                  const std::string& label, const std::string& p,
                  const std::string& h) {
  json rec;
  rec["pairID"] = id;
  rec["gold_label"] = label;
  rec["sentence1_binary_parse"] = p;
  rec["sentence2_binary_parse"] = h;
  out << rec.dump() << "\n";
}

void write_dep_block(std::ofstream& out, const std::string& id,
                     const std::vector<std::string>& toks, bool star) {
  out << id << "\n";
  for (std::size_t i = 0; i < toks.size(); ++i) {
    // Chain: each word headed by its predecessor; star: all on word 1.
    std::size_t head = i == 0 ? 0 : (star ? 1 : i);
    out << (i + 1) << "\t" << toks[i] << "\t" << head << "\n";
  }
  out << "\n";
}

void gen_overfit(const std::string& dir, std::mt19937_64& rng) {
  std::ofstream corpus(dir + "/synth_overfit_train.jsonl");
  std::ofstream deps(dir + "/synth_overfit_deps.tsv");
  std::uniform_int_distribution<std::size_t> filler(0, kFiller.size() - 1);
  std::uniform_int_distribution<std::size_t> keyword(0, 2);
  for (int i = 0; i < 50; ++i) {
    int label = i % 3;
    std::vector<std::string> prem = {kClassWords[label][keyword(rng)],
                                     kFiller[filler(rng)], kFiller[filler(rng)]};
    std::vector<std::string> hyp = {kFiller[filler(rng)],
                                    kClassWords[label][keyword(rng)],
                                    kFiller[filler(rng)]};
    std::string id = "ov" + std::to_string(i);
    write_record(corpus, id, kLabels[label], bracket_chain(prem),
                 bracket_chain(hyp));
    write_dep_block(deps, id + ".s1", prem, i % 2 == 0);
    write_dep_block(deps, id + ".s2", hyp, i % 2 == 1);
  }
}

void gen_structure(const std::string& path, int count, int id_base,
                   std::mt19937_64& rng) {
  std::ofstream corpus(path);
  std::uniform_int_distribution<std::size_t> filler(0, kFiller.size() - 1);
  std::uniform_int_distribution<int> shape(0, 2);
  for (int i = 0; i < count; ++i) {
    std::vector<std::string> prem(4), hyp(4);
    for (auto& t : prem) t = kFiller[filler(rng)];
    for (auto& t : hyp) t = kFiller[filler(rng)];
    int sp = shape(rng), sh = shape(rng);
    // Label depends only on the two shapes; token content is noise, so a
    // bag-of-words model sees identical statistics for every class.
    int label = (sp + sh) % 3;
    write_record(corpus, "st" + std::to_string(id_base + i), kLabels[label],
                 bracket_shape(prem, sp), bracket_shape(hyp, sh));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic corpus generator"};
  std::string out_dir = "data";
  std::uint64_t seed = 1;
  app.add_option("--out-dir", out_dir, "output directory");
  app.add_option("--seed", seed, "generator seed");
  CLI11_PARSE(app, argc, argv);

  std::mt19937_64 rng(seed);
  gen_overfit(out_dir, rng);
  gen_structure(out_dir + "/synth_structure_train.jsonl", 500, 0, rng);
  gen_structure(out_dir + "/synth_structure_dev.jsonl", 200, 500, rng);
  return 0;
}
