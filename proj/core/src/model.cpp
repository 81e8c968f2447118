#include "kcache/model.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <string>

#include "kcache/checked.hpp"
#include "kcache/errors.hpp"
#include "kcache/rng.hpp"

namespace kcache {

void ModelConfig::validate() const {
  if (n_layers == 0 || d_model == 0 || n_heads == 0 || head_dim == 0 || max_seq == 0) {
    throw ShapeError("ModelConfig: all counts must be >= 1");
  }
  if (ffn_hidden < 1) {
    throw ShapeError("ModelConfig: ffn_hidden must be >= 1");
  }
  if (vocab < 2) {
    throw ShapeError("ModelConfig: vocab must be >= 2");
  }
  if (d_model != n_heads * head_dim) {
    throw ShapeError("ModelConfig: d_model must equal n_heads * head_dim");
  }
}

std::size_t ModelConfig::default_ffn_hidden(std::size_t d_model) {
  const std::size_t raw = (8 * d_model + 2) / 3;  // ceil(8d/3)
  return ((raw + 15) / 16) * 16;
}

ModelConfig ModelConfig::toy() {
  return ModelConfig{4, 64, 4, 16, 176, 256, 4096};
}

ModelConfig ModelConfig::shape_7b() {
  return ModelConfig{32, 4096, 32, 128, default_ffn_hidden(4096), 32000, 32768};
}

std::uint64_t param_count(const ModelConfig& c) {
  const std::uint64_t d = c.d_model;
  const std::uint64_t f = c.ffn_hidden;
  const std::uint64_t per_layer = d            // attn_gain
                                  + 4 * d * d  // wq, wk, wv, wo
                                  + d          // ffn_gain
                                  + 2 * d * f  // w_gate, w_up
                                  + f * d;     // w_down
  return checked_mul({c.vocab, d})             // embedding
         + checked_mul({c.n_layers, per_layer})
         + d                                   // final_gain
         + checked_mul({d, c.vocab});          // head
}

namespace {

// Visits every tensor in the canonical file order.
template <typename W, typename Fn>
void for_each_tensor(W& w, Fn&& fn) {
  fn(w.embedding.data);
  for (auto& layer : w.layers) {
    fn(layer.attn_gain);
    fn(layer.wq.data);
    fn(layer.wk.data);
    fn(layer.wv.data);
    fn(layer.wo.data);
    fn(layer.ffn_gain);
    fn(layer.w_gate.data);
    fn(layer.w_up.data);
    fn(layer.w_down.data);
  }
  fn(w.final_gain);
  fn(w.head.data);
}

ModelWeights make_shapes(const ModelConfig& c) {
  ModelWeights w;
  w.config = c;
  w.embedding = Matrix(c.vocab, c.d_model);
  w.layers.resize(c.n_layers);
  for (auto& layer : w.layers) {
    layer.attn_gain.assign(c.d_model, 0.0f);
    layer.wq = Matrix(c.d_model, c.d_model);
    layer.wk = Matrix(c.d_model, c.d_model);
    layer.wv = Matrix(c.d_model, c.d_model);
    layer.wo = Matrix(c.d_model, c.d_model);
    layer.ffn_gain.assign(c.d_model, 0.0f);
    layer.w_gate = Matrix(c.d_model, c.ffn_hidden);
    layer.w_up = Matrix(c.d_model, c.ffn_hidden);
    layer.w_down = Matrix(c.ffn_hidden, c.d_model);
  }
  w.final_gain.assign(c.d_model, 0.0f);
  w.head = Matrix(c.d_model, c.vocab);
  return w;
}

}  // namespace

ModelWeights generate_weights(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelWeights w = make_shapes(config);
  SeededRng rng(seed);
  for_each_tensor(w, [&](std::vector<float>& t) {
    for (float& v : t) {
      v = rng.next_uniform(-kInitRange, kInitRange);
    }
  });
  return w;
}

namespace {

constexpr std::array<char, 4> kMagic = {'K', 'C', 'W', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ofstream& out, std::uint32_t v) {
  const std::array<unsigned char, 4> b = {
      static_cast<unsigned char>(v & 0xff),
      static_cast<unsigned char>((v >> 8) & 0xff),
      static_cast<unsigned char>((v >> 16) & 0xff),
      static_cast<unsigned char>((v >> 24) & 0xff),
  };
  out.write(reinterpret_cast<const char*>(b.data()), 4);
}

class Reader {
 public:
  explicit Reader(std::vector<unsigned char> buf) : buf_(std::move(buf)) {}

  std::uint32_t read_u32(const char* what) {
    if (pos_ + 4 > buf_.size()) {
      throw FormatError(std::string("weight file truncated reading ") + what, pos_);
    }
    std::uint32_t v = static_cast<std::uint32_t>(buf_[pos_]) |
                      (static_cast<std::uint32_t>(buf_[pos_ + 1]) << 8) |
                      (static_cast<std::uint32_t>(buf_[pos_ + 2]) << 16) |
                      (static_cast<std::uint32_t>(buf_[pos_ + 3]) << 24);
    pos_ += 4;
    return v;
  }

  void read_f32(std::vector<float>& dst, const char* what) {
    const std::size_t nbytes = dst.size() * 4;
    if (pos_ + nbytes > buf_.size()) {
      throw FormatError(std::string("weight file truncated reading ") + what, pos_);
    }
    for (std::size_t i = 0; i < dst.size(); ++i) {
      std::uint32_t bits = static_cast<std::uint32_t>(buf_[pos_]) |
                           (static_cast<std::uint32_t>(buf_[pos_ + 1]) << 8) |
                           (static_cast<std::uint32_t>(buf_[pos_ + 2]) << 16) |
                           (static_cast<std::uint32_t>(buf_[pos_ + 3]) << 24);
      float f;
      std::memcpy(&f, &bits, 4);
      dst[i] = f;
      pos_ += 4;
    }
  }

  std::size_t pos() const { return pos_; }
  std::size_t size() const { return buf_.size(); }

 private:
  std::vector<unsigned char> buf_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_weights(const ModelWeights& w, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("save_weights: cannot open " + path.string());
  }
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, kVersion);
  for (std::size_t v : {w.config.n_layers, w.config.d_model, w.config.n_heads, w.config.head_dim,
                        w.config.ffn_hidden, w.config.vocab, w.config.max_seq}) {
    put_u32(out, static_cast<std::uint32_t>(v));
  }
  for_each_tensor(w, [&](const std::vector<float>& t) {
    for (float f : t) {
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      put_u32(out, bits);
    }
  });
  if (!out) {
    throw std::runtime_error("save_weights: write failed for " + path.string());
  }
}

ModelWeights load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("load_weights: cannot open " + path.string());
  }
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  Reader r(std::move(buf));

  if (r.size() < 4) {
    throw FormatError("weight file truncated reading magic", 0);
  }
  // Read the 4 magic bytes through the u32 reader to keep offset tracking.
  std::array<char, 4> magic{};
  const std::uint32_t magic_word = r.read_u32("magic");
  std::memcpy(magic.data(), &magic_word, 4);
  if (magic != kMagic) {
    throw FormatError("bad magic, expected KCW1", 0);
  }
  const std::uint32_t version = r.read_u32("version");
  if (version != kVersion) {
    throw FormatError("unsupported weight file version " + std::to_string(version), 4);
  }

  ModelConfig c;
  const std::size_t header_off = r.pos();
  c.n_layers = r.read_u32("n_layers");
  c.d_model = r.read_u32("d_model");
  c.n_heads = r.read_u32("n_heads");
  c.head_dim = r.read_u32("head_dim");
  c.ffn_hidden = r.read_u32("ffn_hidden");
  c.vocab = r.read_u32("vocab");
  c.max_seq = r.read_u32("max_seq");
  try {
    c.validate();
  } catch (const ShapeError& e) {
    throw FormatError(std::string("invalid header config: ") + e.what(), header_off);
  }

  const std::uint64_t payload = checked_mul({param_count(c), 4});
  if (r.size() - r.pos() != payload) {
    throw FormatError("payload length " + std::to_string(r.size() - r.pos()) +
                          " does not match header-declared shapes (" + std::to_string(payload) +
                          " bytes expected)",
                      r.pos());
  }

  ModelWeights w = make_shapes(c);
  for_each_tensor(w, [&](std::vector<float>& t) { r.read_f32(t, "tensor payload"); });
  return w;
}

QkvRows qkv_project(const Matrix& x, const LayerWeights& layer) {
  return {matmul(x, layer.wq), matmul(x, layer.wk), matmul(x, layer.wv)};
}

Matrix ffn_swiglu(const Matrix& x, const LayerWeights& layer) {
  Matrix gate = matmul(x, layer.w_gate);
  const Matrix up = matmul(x, layer.w_up);
  for (std::size_t i = 0; i < gate.data.size(); ++i) {
    gate.data[i] = silu(gate.data[i]) * up.data[i];
  }
  return matmul(gate, layer.w_down);
}

Matrix block_forward(const Matrix& x, const LayerWeights& layer, const AttentionFn& attention) {
  const Matrix attn_in = rms_norm_rows(x, layer.attn_gain, kRmsEps);
  const Matrix h = add(x, attention(attn_in));
  const Matrix ffn_in = rms_norm_rows(h, layer.ffn_gain, kRmsEps);
  return add(h, ffn_swiglu(ffn_in, layer));
}

Matrix embed_tokens(const ModelWeights& w, std::span<const TokenId> ids) {
  Matrix out(ids.size(), w.config.d_model);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= w.config.vocab) {
      throw std::out_of_range("embed_tokens: token id " + std::to_string(ids[i]) +
                              " >= vocab " + std::to_string(w.config.vocab));
    }
    const auto src = w.embedding.row(ids[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

Matrix output_logits(const ModelWeights& w, const Matrix& x) {
  return matmul(rms_norm_rows(x, w.final_gain, kRmsEps), w.head);
}

}  // namespace kcache
