#include "sage/checkpoint.hpp"

#include <cstring>
#include <vector>

#include <nlohmann/json.hpp>

#include "sage/errors.hpp"
#include "sage/util.hpp"

namespace sage {

namespace {

using json = nlohmann::json;

constexpr char kMagic[8] = {'S', 'A', 'G', 'E', 'C', 'P', 'T', '1'};

void append_f32(std::string& out, float v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.append(buf, 4);
}

float read_f32(const std::string& data, std::size_t offset) {
  float v;
  std::memcpy(&v, data.data() + offset, 4);
  return v;
}

json config_to_json(const ModelConfig& c) {
  return json{{"vocab_size", c.vocab_size}, {"embed_dim", c.embed_dim},
              {"num_layers", c.num_layers}, {"num_heads", c.num_heads},
              {"ff_dim", c.ff_dim},         {"max_len", c.max_len},
              {"seed", c.seed}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.vocab_size = j.at("vocab_size").get<int>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.num_layers = j.at("num_layers").get<int>();
  c.num_heads = j.at("num_heads").get<int>();
  c.ff_dim = j.at("ff_dim").get<int>();
  c.max_len = j.at("max_len").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

struct TensorEntry {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
};

void write_container(const std::string& path, json header,
                     const std::vector<const MatF*>& tensors,
                     const std::vector<TensorEntry>& directory) {
  std::string payload;
  std::size_t total = 0;
  for (const MatF* t : tensors) {
    total += static_cast<std::size_t>(t->size()) * 4;
  }
  payload.reserve(total);
  for (const MatF* t : tensors) {
    for (Eigen::Index r = 0; r < t->rows(); ++r) {
      for (Eigen::Index c = 0; c < t->cols(); ++c) {
        append_f32(payload, (*t)(r, c));
      }
    }
  }

  json dir = json::array();
  for (const auto& e : directory) {
    dir.push_back({{"name", e.name}, {"rows", e.rows}, {"cols", e.cols}});
  }
  header["tensors"] = dir;
  header["payload_bytes"] = payload.size();
  header["payload_hash"] = hex64(fnv1a64(payload.data(), payload.size()));

  const std::string head = header.dump();
  std::string file;
  file.reserve(8 + 4 + head.size() + payload.size());
  file.append(kMagic, 8);
  const auto len = static_cast<std::uint32_t>(head.size());
  char lenbuf[4] = {static_cast<char>(len & 0xff),
                    static_cast<char>((len >> 8) & 0xff),
                    static_cast<char>((len >> 16) & 0xff),
                    static_cast<char>((len >> 24) & 0xff)};
  file.append(lenbuf, 4);
  file += head;
  file += payload;
  write_file(path, file);
}

struct Container {
  json header;
  std::string payload;
};

Container read_container(const std::string& path, const std::string& want_kind) {
  const std::string data = read_file(path);
  if (data.size() < 12 || std::memcmp(data.data(), kMagic, 8) != 0) {
    raise(ErrorCode::CorruptCheckpoint, path + ": not a checkpoint container");
  }
  const auto* lp = reinterpret_cast<const unsigned char*>(data.data() + 8);
  const std::uint32_t head_len = static_cast<std::uint32_t>(lp[0]) |
                                 (static_cast<std::uint32_t>(lp[1]) << 8) |
                                 (static_cast<std::uint32_t>(lp[2]) << 16) |
                                 (static_cast<std::uint32_t>(lp[3]) << 24);
  if (data.size() < 12 + static_cast<std::size_t>(head_len)) {
    raise(ErrorCode::CorruptCheckpoint, path + ": truncated header");
  }

  Container c;
  try {
    c.header = json::parse(data.substr(12, head_len));
  } catch (const json::exception&) {
    raise(ErrorCode::CorruptCheckpoint, path + ": unreadable header");
  }
  c.payload = data.substr(12 + head_len);

  std::string kind;
  std::size_t payload_bytes = 0;
  std::string payload_hash;
  try {
    kind = c.header.at("kind").get<std::string>();
    payload_bytes = c.header.at("payload_bytes").get<std::size_t>();
    payload_hash = c.header.at("payload_hash").get<std::string>();
  } catch (const json::exception&) {
    raise(ErrorCode::CorruptCheckpoint, path + ": incomplete header");
  }
  if (kind != want_kind) {
    raise(ErrorCode::CorruptCheckpoint,
          path + ": container holds '" + kind + "', expected '" + want_kind +
              "'");
  }
  if (c.payload.size() != payload_bytes) {
    raise(ErrorCode::CorruptCheckpoint, path + ": truncated payload");
  }
  if (hex64(fnv1a64(c.payload.data(), c.payload.size())) != payload_hash) {
    raise(ErrorCode::CorruptCheckpoint, path + ": payload hash mismatch");
  }
  return c;
}

// Pulls the tensor directory out of a verified header and checks it against
// the shapes the caller expects, so a tampered header cannot misroute reads.
std::size_t check_directory(const json& header,
                            const std::vector<TensorEntry>& expected,
                            const std::string& path) {
  const auto& dir = header.at("tensors");
  if (!dir.is_array() || dir.size() != expected.size()) {
    raise(ErrorCode::CorruptCheckpoint, path + ": tensor directory mismatch");
  }
  std::size_t floats = 0;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& e = dir[i];
    if (e.at("name").get<std::string>() != expected[i].name ||
        e.at("rows").get<Eigen::Index>() != expected[i].rows ||
        e.at("cols").get<Eigen::Index>() != expected[i].cols) {
      raise(ErrorCode::CorruptCheckpoint,
            path + ": tensor directory mismatch at '" + expected[i].name + "'");
    }
    floats += static_cast<std::size_t>(expected[i].rows) *
              static_cast<std::size_t>(expected[i].cols);
  }
  return floats;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::vector<const MatF*> tensors;
  std::vector<TensorEntry> directory;
  ckpt.state.params.for_each_tensor([&](const std::string& name, const MatF& m) {
    tensors.push_back(&m);
    directory.push_back({name, m.rows(), m.cols()});
  });

  json header{{"kind", "model"},
              {"tag", ckpt.tag},
              {"step", ckpt.step},
              {"created_at", ckpt.created_at ? ckpt.created_at : now_unix()},
              {"config", config_to_json(ckpt.state.config)}};
  write_container(path, std::move(header), tensors, directory);
}

Checkpoint load_checkpoint(const std::string& path) {
  Container c = read_container(path, "model");

  Checkpoint ckpt;
  ModelConfig config;
  try {
    config = config_from_json(c.header.at("config"));
    ckpt.step = c.header.at("step").get<int>();
    ckpt.tag = c.header.at("tag").get<std::string>();
    ckpt.created_at = c.header.at("created_at").get<std::int64_t>();
  } catch (const json::exception&) {
    raise(ErrorCode::CorruptCheckpoint, path + ": incomplete header");
  }

  ckpt.state = allocate_model<float>(config);
  std::vector<MatF*> tensors;
  std::vector<TensorEntry> expected;
  ckpt.state.params.for_each_tensor([&](const std::string& name, MatF& m) {
    tensors.push_back(&m);
    expected.push_back({name, m.rows(), m.cols()});
  });
  const std::size_t floats = check_directory(c.header, expected, path);
  if (c.payload.size() != floats * 4) {
    raise(ErrorCode::CorruptCheckpoint, path + ": payload size mismatch");
  }

  std::size_t off = 0;
  for (MatF* t : tensors) {
    for (Eigen::Index r = 0; r < t->rows(); ++r) {
      for (Eigen::Index cc = 0; cc < t->cols(); ++cc) {
        (*t)(r, cc) = read_f32(c.payload, off);
        off += 4;
      }
    }
  }
  return ckpt;
}

void save_soft_prompt(const SoftPromptF& prompt, int step,
                      const std::string& path) {
  std::vector<const MatF*> tensors{&prompt.embeddings};
  std::vector<TensorEntry> directory{
      {"soft_prompt", prompt.embeddings.rows(), prompt.embeddings.cols()}};
  json header{{"kind", "soft_prompt"},
              {"tag", "soft_prompt"},
              {"name", prompt.name},
              {"step", step},
              {"created_at", now_unix()}};
  write_container(path, std::move(header), tensors, directory);
}

SoftPromptF load_soft_prompt(const std::string& path, int* step) {
  Container c = read_container(path, "soft_prompt");

  const auto& dir = c.header.at("tensors");
  if (!dir.is_array() || dir.size() != 1) {
    raise(ErrorCode::CorruptCheckpoint, path + ": tensor directory mismatch");
  }
  SoftPromptF prompt;
  try {
    const auto rows = dir[0].at("rows").get<Eigen::Index>();
    const auto cols = dir[0].at("cols").get<Eigen::Index>();
    if (rows < 0 || cols <= 0 ||
        c.payload.size() != static_cast<std::size_t>(rows * cols) * 4) {
      raise(ErrorCode::CorruptCheckpoint, path + ": payload size mismatch");
    }
    prompt.embeddings.resize(rows, cols);
    prompt.name = c.header.value("name", std::string{});
    if (step) *step = c.header.at("step").get<int>();
  } catch (const json::exception&) {
    raise(ErrorCode::CorruptCheckpoint, path + ": incomplete header");
  }

  std::size_t off = 0;
  for (Eigen::Index r = 0; r < prompt.embeddings.rows(); ++r) {
    for (Eigen::Index cc = 0; cc < prompt.embeddings.cols(); ++cc) {
      prompt.embeddings(r, cc) = read_f32(c.payload, off);
      off += 4;
    }
  }
  return prompt;
}

}  // namespace sage
