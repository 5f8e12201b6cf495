#include "treeattn/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <unordered_map>

#include "json.hpp"
#include "treeattn/errors.hpp"

namespace treeattn {

namespace {

constexpr char kMagic[4] = {'T', 'A', 'T', 'N'};
constexpr std::uint32_t kVersion = 1;

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

void write_string(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  std::uint64_t n = read_u64(in);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  return s;
}

void write_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  write_u64(out, bits);
}

double read_f64(std::istream& in) {
  std::uint64_t bits = read_u64(in);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

nlohmann::json config_to_json(const TrainConfig& c) {
  return {
      {"embedding_size", c.embedding_size},
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
      {"freeze_embeddings", c.freeze_embeddings},
  };
}

TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.embedding_size = j.at("embedding_size").get<std::size_t>();
  c.hidden_size = j.at("hidden_size").get<std::size_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.l2 = j.at("l2").get<double>();
  c.clip_threshold = j.at("clip_threshold").get<double>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.early_stop_patience = j.at("early_stop_patience").get<std::size_t>();
  c.share_encoders = j.at("share_encoders").get<bool>();
  c.tie_attention_weights = j.at("tie_attention_weights").get<bool>();
  c.freeze_embeddings = j.at("freeze_embeddings").get<bool>();
  return c;
}

}  // namespace

void save_checkpoint(const std::string& path, ModelParams& params,
                     const TrainConfig& config, const Vocabulary& vocab) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("save_checkpoint: cannot write " + tmp);
    out.write(kMagic, 4);
    write_u64(out, kVersion);

    nlohmann::json meta = {
        {"variant", variant_name(params.variant)},
        {"config", config_to_json(config)},
        {"vocab_hash", vocab.hash()},
        {"vocab", vocab.tokens},
    };
    write_string(out, meta.dump());

    std::size_t count = 0;
    params.for_each([&](const std::string&, Tensor&, ParamKind) { ++count; });
    write_u64(out, count);
    params.for_each([&](const std::string& name, Tensor& t, ParamKind) {
      write_string(out, name);
      write_u64(out, t.shape.size());
      for (std::size_t d : t.shape) write_u64(out, d);
      for (Scalar v : t.data) write_f64(out, static_cast<double>(v));
    });
    if (!out) throw DataError("save_checkpoint: write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("load_checkpoint: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw DataError("load_checkpoint: " + path + " is not a checkpoint");
  }
  std::uint64_t version = read_u64(in);
  if (version != kVersion) {
    throw DataError("load_checkpoint: unsupported version " +
                    std::to_string(version));
  }
  nlohmann::json meta = nlohmann::json::parse(read_string(in));

  Checkpoint ckpt;
  ckpt.config = config_from_json(meta.at("config"));
  ckpt.vocab.tokens = meta.at("vocab").get<std::vector<std::string>>();
  for (std::size_t i = 0; i < ckpt.vocab.tokens.size(); ++i) {
    ckpt.vocab.index[ckpt.vocab.tokens[i]] = i;
  }
  if (ckpt.vocab.hash() != meta.at("vocab_hash").get<std::uint64_t>()) {
    throw DataError("load_checkpoint: vocabulary hash mismatch in " + path);
  }

  ModelVariant variant = variant_from_name(meta.at("variant").get<std::string>());
  ckpt.params = ModelParams::sized(variant, ckpt.vocab.size(),
                                   ckpt.config.hidden_size,
                                   ckpt.config.embedding_size,
                                   ckpt.config.share_encoders);
  if (ckpt.params.attn) ckpt.params.attn->tied = ckpt.config.tie_attention_weights;

  std::uint64_t count = read_u64(in);
  std::unordered_map<std::string, Tensor> loaded;
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = read_string(in);
    std::uint64_t rank = read_u64(in);
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = read_u64(in);
    Tensor t = Tensor::zeros(shape);
    for (Scalar& v : t.data) v = static_cast<Scalar>(read_f64(in));
    loaded.emplace(std::move(name), std::move(t));
  }
  if (!in) throw DataError("load_checkpoint: truncated file " + path);

  ckpt.params.for_each([&](const std::string& name, Tensor& t, ParamKind) {
    auto it = loaded.find(name);
    if (it == loaded.end()) {
      throw DataError("load_checkpoint: missing parameter '" + name + "'");
    }
    if (it->second.shape != t.shape) {
      throw DataError("load_checkpoint: parameter '" + name + "' has shape " +
                      it->second.shape_str() + ", expected " + t.shape_str());
    }
    t.data = std::move(it->second.data);
  });
  return ckpt;
}

}  // namespace treeattn
