// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0

#include "deap/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "deap/error.hpp"

namespace deap {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[] = "DEAPCKPT1\n";

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  void f64(double v) { bytes(&v, sizeof v); }
  void str(const std::string& s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  void floats(const std::vector<float>& v) { bytes(v.data(), v.size() * sizeof(float)); }
  const std::vector<char>& data() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  explicit Reader(std::vector<char> data) : buf_(std::move(data)) {}
  void bytes(void* p, std::size_t n) {
    require(n <= buf_.size() - pos_, ErrorCode::kPayloadMismatch, "checkpoint truncated");
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    bytes(&v, sizeof v);
    return v;
  }
  double f64() {
    double v;
    bytes(&v, sizeof v);
    return v;
  }
  std::uint8_t u8() {
    std::uint8_t v;
    bytes(&v, 1);
    return v;
  }
  std::string str() {
    const auto n = u64();
    require(n <= buf_.size() - pos_, ErrorCode::kPayloadMismatch, "checkpoint truncated");
    std::string s(buf_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  std::vector<float> floats(std::size_t n) {
    require(n <= (buf_.size() - pos_) / sizeof(float), ErrorCode::kPayloadMismatch,
            "checkpoint truncated");
    std::vector<float> v(n);
    bytes(v.data(), n * sizeof(float));
    return v;
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  std::vector<char> buf_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  Writer w;
  w.bytes(kMagic, sizeof(kMagic) - 1);
  w.str(ckpt.config);
  w.u64(ckpt.step);
  w.u64(ckpt.epoch);
  w.u64(ckpt.position);
  w.u64(ckpt.optimizer_steps);
  w.f64(ckpt.best_metric);
  w.u64(ckpt.best_epoch);
  w.f64(ckpt.epoch_loss_sum);
  w.u64(ckpt.entries.size());
  for (const auto& e : ckpt.entries) {
    const std::size_t n = shape_numel(e.shape);
    require(e.values.size() == n && e.m.size() == n && e.v.size() == n,
            ErrorCode::kShapeMismatch, "checkpoint entry " + e.name + " has inconsistent sizes");
    w.str(e.name);
    w.u64(e.shape.size());
    for (auto d : e.shape) w.u64(d);
    const std::uint8_t frozen = e.frozen ? 1 : 0;
    w.bytes(&frozen, 1);
    w.floats(e.values);
    w.floats(e.m);
    w.floats(e.v);
  }
  // Write to a sibling file first so a crash never leaves a torn checkpoint.
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorCode::kIo, "cannot open for writing: " + tmp);
    out.write(w.data().data(), static_cast<std::streamsize>(w.data().size()));
    require(out.good(), ErrorCode::kIo, "write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::kIo, "cannot open for reading: " + path.string());
  std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t magic_len = sizeof(kMagic) - 1;
  require(data.size() >= magic_len && std::memcmp(data.data(), kMagic, magic_len) == 0,
          ErrorCode::kBadMagic, "bad checkpoint magic in " + path.string());
  data.erase(data.begin(), data.begin() + magic_len);
  Reader r(std::move(data));
  Checkpoint c;
  c.config = r.str();
  c.step = r.u64();
  c.epoch = r.u64();
  c.position = r.u64();
  c.optimizer_steps = r.u64();
  c.best_metric = r.f64();
  c.best_epoch = r.u64();
  c.epoch_loss_sum = r.f64();
  const auto count = r.u64();
  for (std::uint64_t k = 0; k < count; ++k) {
    CheckpointEntry e;
    e.name = r.str();
    const auto rank = r.u64();
    require(rank <= 8, ErrorCode::kMalformedHeader, "checkpoint entry rank too large");
    for (std::uint64_t a = 0; a < rank; ++a) e.shape.push_back(r.u64());
    e.frozen = r.u8() != 0;
    const std::size_t n = shape_numel(e.shape);
    e.values = r.floats(n);
    e.m = r.floats(n);
    e.v = r.floats(n);
    c.entries.push_back(std::move(e));
  }
  require(r.done(), ErrorCode::kPayloadMismatch, "trailing bytes in checkpoint " + path.string());
  return c;
}

template <typename T>
std::vector<CheckpointEntry> capture_entries(const ParameterStore<T>& store, AdamW<T>& opt) {
  std::vector<CheckpointEntry> out;
  const auto& entries = store.entries();
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto& e = entries[k];
    CheckpointEntry c;
    c.name = e.name;
    c.shape = e.tensor.shape();
    c.frozen = e.frozen;
    c.values.assign(e.tensor.values().begin(), e.tensor.values().end());
    c.m.assign(opt.first_moments()[k].begin(), opt.first_moments()[k].end());
    c.v.assign(opt.second_moments()[k].begin(), opt.second_moments()[k].end());
    out.push_back(std::move(c));
  }
  return out;
}

template <typename T>
void restore_entries(const std::vector<CheckpointEntry>& entries, ParameterStore<T>& store,
                     AdamW<T>& opt) {
  const auto& current = store.entries();
  require(entries.size() == current.size(), ErrorCode::kShapeMismatch,
          "checkpoint has " + std::to_string(entries.size()) + " entries, model has " +
              std::to_string(current.size()));
  for (std::size_t k = 0; k < entries.size(); ++k) {
    require(entries[k].name == current[k].name && entries[k].shape == current[k].tensor.shape(),
            ErrorCode::kShapeMismatch,
            "checkpoint entry " + entries[k].name + " does not match parameter " + current[k].name);
  }
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto& e = entries[k];
    Tensor<T> t = current[k].tensor;
    auto dst = t.mutable_values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(e.values[i]);
    store.set_frozen(e.name, e.frozen);
    opt.first_moments()[k].assign(e.m.begin(), e.m.end());
    opt.second_moments()[k].assign(e.v.begin(), e.v.end());
  }
}

template std::vector<CheckpointEntry> capture_entries<float>(const ParameterStore<float>&,
                                                             AdamW<float>&);
template std::vector<CheckpointEntry> capture_entries<double>(const ParameterStore<double>&,
                                                              AdamW<double>&);
template void restore_entries<float>(const std::vector<CheckpointEntry>&, ParameterStore<float>&,
                                     AdamW<float>&);
template void restore_entries<double>(const std::vector<CheckpointEntry>&, ParameterStore<double>&,
                                      AdamW<double>&);

}  // namespace deap
