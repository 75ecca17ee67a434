#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "oim/trainer.hpp"

namespace oim {

namespace {

constexpr std::array<char, 8> kMagic = {'O', 'I', 'M', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;
// dimension fields larger than this mean a corrupt or hostile file
constexpr std::uint64_t kMaxDim = 1ull << 32;

class Writer {
 public:
  explicit Writer(const std::string& path)
      : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot write " + path);
  }

  void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }

  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  void bytes(const char* data, std::size_t n) { out_.write(data, static_cast<std::streamsize>(n)); }

  void vec(const Vec& v) {
    u64(v.size());
    for (double x : v) f64(x);
  }

  void matrix(const Matrix& m) {
    u64(m.rows());
    u64(m.cols());
    for (double x : m.data()) f64(x);
  }

  void finish() {
    out_.flush();
    if (!out_) throw std::runtime_error("write failed for " + path_);
  }

 private:
  std::string path_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::string& path)
      : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw std::runtime_error("cannot read " + path);
  }

  std::uint8_t u8() {
    int c = in_.get();
    if (c == std::char_traits<char>::eof()) fail("truncated checkpoint");
    return static_cast<std::uint8_t>(c);
  }

  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{u8()} << (8 * i);
    return v;
  }

  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{u8()} << (8 * i);
    return v;
  }

  std::uint64_t dim() {
    std::uint64_t v = u64();
    if (v > kMaxDim) fail("implausible dimension field");
    return v;
  }

  double f64() { return std::bit_cast<double>(u64()); }

  void bytes(char* data, std::size_t n) {
    in_.read(data, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      fail("truncated checkpoint");
    }
  }

  Vec vec() {
    Vec v(dim());
    for (double& x : v) x = f64();
    return v;
  }

  Matrix matrix() {
    std::uint64_t rows = dim();
    std::uint64_t cols = dim();
    Matrix m(rows, cols);
    for (double& x : m.data()) x = f64();
    return m;
  }

  void expect_eof() {
    if (in_.peek() != std::char_traits<char>::eof()) {
      fail("trailing bytes after checkpoint payload");
    }
  }

  [[noreturn]] void fail(const std::string& what) {
    throw std::runtime_error(path_ + ": " + what);
  }

 private:
  std::string path_;
  std::ifstream in_;
};

void write_config(Writer& w, const TrainConfig& cfg) {
  w.u64(cfg.scenes_per_batch);
  w.u64(cfg.total_iters);
  w.f64(cfg.lr_base);
  w.u64(cfg.lr_drop_iter);
  w.f64(cfg.lr_drop_factor);
  w.f64(cfg.momentum);
  w.u64(cfg.out_dim);
  w.u8(static_cast<std::uint8_t>(cfg.loss_kind));
  w.u64(cfg.pretrain_iters);
  w.u64(cfg.seed);
  w.f64(cfg.oim.tau);
  w.f64(cfg.oim.gamma);
  w.u64(cfg.oim.queue_capacity);
  w.u64(cfg.oim.feature_dim);
  w.u64(cfg.oim.num_labeled);
  w.u8(cfg.oim.subsample_labeled.has_value() ? 1 : 0);
  w.u64(cfg.oim.subsample_labeled.value_or(0));
  w.u8(cfg.oim.subsample_unlabeled.has_value() ? 1 : 0);
  w.u64(cfg.oim.subsample_unlabeled.value_or(0));
}

TrainConfig read_config(Reader& r) {
  TrainConfig cfg;
  cfg.scenes_per_batch = r.u64();
  cfg.total_iters = r.u64();
  cfg.lr_base = r.f64();
  cfg.lr_drop_iter = r.u64();
  cfg.lr_drop_factor = r.f64();
  cfg.momentum = r.f64();
  cfg.out_dim = r.dim();
  std::uint8_t kind = r.u8();
  if (kind > 2) r.fail("unknown loss kind");
  cfg.loss_kind = static_cast<LossKind>(kind);
  cfg.pretrain_iters = r.u64();
  cfg.seed = r.u64();
  cfg.oim.tau = r.f64();
  cfg.oim.gamma = r.f64();
  cfg.oim.queue_capacity = r.dim();
  cfg.oim.feature_dim = r.dim();
  cfg.oim.num_labeled = r.dim();
  if (r.u8()) {
    cfg.oim.subsample_labeled = r.u64();
  } else {
    r.u64();
  }
  if (r.u8()) {
    cfg.oim.subsample_unlabeled = r.u64();
  } else {
    r.u64();
  }
  return cfg;
}

}  // namespace

void checkpoint_save(const TrainState& state, const std::string& path) {
  Writer w(path);
  w.bytes(kMagic.data(), kMagic.size());
  w.u32(kVersion);
  write_config(w, state.config);
  w.u64(state.iteration);

  w.matrix(state.embedder.weight);
  w.f64(state.opt.learning_rate);
  w.f64(state.opt.momentum);
  w.matrix(state.opt.vel_embed);
  w.matrix(state.opt.vel_cls_weight);
  w.vec(state.opt.vel_cls_bias);
  w.matrix(state.classifier.weight);
  w.vec(state.classifier.bias);

  w.u8(state.lut.has_value() ? 1 : 0);
  if (state.lut) {
    w.u64(state.lut->feature_dim());
    w.u64(state.lut->num_classes());
    for (const Vec& column : state.lut->columns()) {
      for (double x : column) w.f64(x);
    }
  }
  w.u8(state.queue.has_value() ? 1 : 0);
  if (state.queue) {
    w.u64(state.queue->feature_dim());
    w.u64(state.queue->capacity());
    w.u64(state.queue->size());
    for (std::size_t i = 0; i < state.queue->size(); ++i) {
      for (double x : state.queue->entry(i)) w.f64(x);
    }
  }

  std::ostringstream rng_text;
  state.rng.save(rng_text);
  std::string rng_str = rng_text.str();
  w.u64(rng_str.size());
  w.bytes(rng_str.data(), rng_str.size());

  w.u64(state.history.size());
  for (const MetricRow& row : state.history) {
    w.u64(row.iteration);
    w.f64(row.lr);
    w.f64(row.loss);
    w.f64(row.train_accuracy);
  }
  w.finish();
}

TrainState checkpoint_load(const std::string& path) {
  Reader r(path);
  std::array<char, 8> magic{};
  r.bytes(magic.data(), magic.size());
  if (magic != kMagic) r.fail("not a checkpoint file");
  std::uint32_t version = r.u32();
  if (version != kVersion) {
    r.fail("unsupported checkpoint version " + std::to_string(version));
  }

  TrainState state;
  state.config = read_config(r);
  state.iteration = r.u64();

  state.embedder.weight = r.matrix();
  state.opt.learning_rate = r.f64();
  state.opt.momentum = r.f64();
  state.opt.vel_embed = r.matrix();
  state.opt.vel_cls_weight = r.matrix();
  state.opt.vel_cls_bias = r.vec();
  state.classifier.weight = r.matrix();
  state.classifier.bias = r.vec();

  bool is_oim = state.config.loss_kind == LossKind::Oim;
  if (r.u8()) {
    std::size_t dim = r.dim();
    std::size_t classes = r.dim();
    std::vector<Vec> columns(classes, Vec(dim));
    for (Vec& column : columns) {
      for (double& x : column) x = r.f64();
    }
    state.lut = LookupTable::from_columns(dim, std::move(columns));
  }
  if (r.u8()) {
    std::size_t dim = r.dim();
    std::size_t capacity = r.dim();
    std::size_t size = r.dim();
    if (size > capacity) r.fail("queue size exceeds capacity");
    std::vector<Vec> entries(size, Vec(dim));
    for (Vec& entry : entries) {
      for (double& x : entry) x = r.f64();
    }
    state.queue =
        CircularQueue::from_entries(dim, capacity, std::move(entries));
  }
  if (state.lut.has_value() != is_oim || state.queue.has_value() != is_oim) {
    r.fail("identity buffers inconsistent with the stored loss kind");
  }

  std::string rng_str(r.u64(), '\0');
  r.bytes(rng_str.data(), rng_str.size());
  std::istringstream rng_text(rng_str);
  state.rng.load(rng_text);

  std::size_t history_size = r.dim();
  state.history.reserve(history_size);
  for (std::size_t i = 0; i < history_size; ++i) {
    MetricRow row;
    row.iteration = r.u64();
    row.lr = r.f64();
    row.loss = r.f64();
    row.train_accuracy = r.f64();
    state.history.push_back(row);
  }
  r.expect_eof();

  // shape coherence between the config and the tensors it describes
  if (state.embedder.out_dim() != state.config.out_dim) {
    r.fail("embedder shape does not match the stored config");
  }
  if (!state.opt.vel_embed.same_shape(state.embedder.weight)) {
    r.fail("optimizer velocity shape mismatch");
  }
  if (is_oim) {
    if (state.lut->feature_dim() != state.config.out_dim ||
        state.lut->num_classes() != state.config.oim.num_labeled ||
        state.queue->feature_dim() != state.config.out_dim ||
        state.queue->capacity() != state.config.oim.queue_capacity) {
      r.fail("identity buffer shapes do not match the stored config");
    }
  } else {
    if (state.classifier.weight.cols() != state.config.out_dim ||
        state.classifier.bias.size() != state.classifier.weight.rows() ||
        !state.opt.vel_cls_weight.same_shape(state.classifier.weight) ||
        state.opt.vel_cls_bias.size() != state.classifier.bias.size()) {
      r.fail("classifier shapes do not match the stored config");
    }
  }
  return state;
}

}  // namespace oim
