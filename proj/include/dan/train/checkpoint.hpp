#pragma once

#include "dan/data/normalize.hpp"
#include "dan/gmm.hpp"
#include "dan/network/params.hpp"
#include "dan/train/config.hpp"

#include <zlib.h>

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dan {

/// One row of the training log.
struct EpochRecord {
  std::size_t epoch = 0;
  double lambda = 0.0;
  double train_loss = 0.0;  // regularized objective, mean over batches
  double val_loss = 0.0;    // plain RMSE, mean over batches (NaN without a validation set)
  double l1 = 0.0, l2 = 0.0, l3 = 0.0, l4 = 0.0;
  double train_rmse = 0.0;
  double val_multi_loss = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

inline const char* kLogHeader = "epoch,lambda,train_loss,val_loss,L1,L2,L3,L4,train_rmse,val_multi_loss";

inline void write_training_log(const std::string& path, const std::vector<EpochRecord>& log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << kLogHeader << '\n';
  out.precision(10);
  for (const EpochRecord& r : log) {
    out << r.epoch << ',' << r.lambda << ',' << r.train_loss << ',' << r.val_loss << ',' << r.l1 << ',' << r.l2 << ','
        << r.l3 << ',' << r.l4 << ',' << r.train_rmse << ',' << r.val_multi_loss << '\n';
  }
}

struct Checkpoint {
  TrainConfig config;
  NormTransform ordinary_norm;
  NormTransform indicator_norm;
  std::optional<GmmModel> gmm;  // present in univariate mode
  ParamMap params;
  std::vector<EpochRecord> log;

  bool univariate() const { return gmm.has_value(); }
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

class ByteWriter {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::vector<unsigned char>& buffer() { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

class ByteReader {
 public:
  ByteReader(const unsigned char* data, std::size_t size) : data_(data), size_(size) {}

  void need(std::size_t n) const {
    if (size_ - pos_ < n) throw CheckpointError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return size_ - pos_; }

 private:
  const unsigned char* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

inline std::uint32_t crc32_of(const unsigned char* data, std::size_t n) {
  uLong c = ::crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    c = ::crc32(c, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(c);
}

struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<double> data;
};

inline std::vector<NamedArray> checkpoint_arrays(const Checkpoint& ck) {
  std::vector<NamedArray> arrays;
  arrays.push_back({"norm.ordinary", {2}, {ck.ordinary_norm.mean, ck.ordinary_norm.std}});
  arrays.push_back({"norm.indicator", {2}, {ck.indicator_norm.mean, ck.indicator_norm.std}});
  if (ck.gmm) {
    const std::size_t m = ck.gmm->components();
    arrays.push_back({"gmm.weights", {m}, ck.gmm->weights});
    arrays.push_back({"gmm.means", {m}, ck.gmm->means});
    arrays.push_back({"gmm.variances", {m}, ck.gmm->variances});
  }
  const std::size_t n = ck.log.size();
  NamedArray log{"log", {n, 10}, {}};
  for (const EpochRecord& r : ck.log) {
    log.data.insert(log.data.end(), {static_cast<double>(r.epoch), r.lambda, r.train_loss, r.val_loss, r.l1, r.l2,
                                     r.l3, r.l4, r.train_rmse, r.val_multi_loss});
  }
  arrays.push_back(std::move(log));
  for (const auto& [name, t] : ck.params) {
    arrays.push_back({"param." + name, t.shape(), std::vector<double>(t.data().begin(), t.data().end())});
  }
  return arrays;
}

}  // namespace detail

/// Layout: "DAN1", u32 version, u32-length metadata text (canonical config),
/// u32 array count, then per array a u32-length name, u32 rank, u64 dims and
/// little-endian f64 values; a CRC-32 of everything before it closes the file.
inline std::vector<unsigned char> serialize_checkpoint(const Checkpoint& ck) {
  detail::ByteWriter w;
  w.bytes("DAN1", 4);
  w.u32(kCheckpointVersion);
  w.str(config_to_text(ck.config));
  const auto arrays = detail::checkpoint_arrays(ck);
  w.u32(static_cast<std::uint32_t>(arrays.size()));
  for (const auto& a : arrays) {
    w.str(a.name);
    w.u32(static_cast<std::uint32_t>(a.shape.size()));
    for (std::size_t d : a.shape) w.u64(d);
    for (double v : a.data) w.f64(v);
  }
  auto& buf = w.buffer();
  w.u32(detail::crc32_of(buf.data(), buf.size()));
  return std::move(buf);
}

inline Checkpoint deserialize_checkpoint(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 12) throw CheckpointError("checkpoint truncated: " + std::to_string(bytes.size()) + " bytes");
  if (std::string(reinterpret_cast<const char*>(bytes.data()), 4) != "DAN1") {
    throw CheckpointError("not a checkpoint file (bad magic)");
  }
  detail::ByteReader header(bytes.data() + 4, 4);
  const std::uint32_t version = header.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  const std::size_t body = bytes.size() - 4;
  detail::ByteReader tail(bytes.data() + body, 4);
  const std::uint32_t stored = tail.u32();
  if (detail::crc32_of(bytes.data(), body) != stored) {
    throw CheckpointError("checkpoint checksum mismatch (file corrupt or truncated)");
  }

  detail::ByteReader r(bytes.data() + 8, body - 8);
  Checkpoint ck;
  try {
    ck.config = parse_config(r.str());
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint metadata: ") + e.what());
  }
  const std::uint32_t count = r.u32();
  std::vector<double> gw, gm, gv;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.str();
    const std::uint32_t rank = r.u32();
    Shape shape(rank);
    for (auto& d : shape) d = r.u64();
    const std::size_t n = shape_size(shape);
    r.need(n * 8);
    std::vector<double> data(n);
    for (double& v : data) v = r.f64();
    if (name == "norm.ordinary" || name == "norm.indicator") {
      if (n != 2) throw CheckpointError("checkpoint array '" + name + "' must hold 2 values");
      (name == "norm.ordinary" ? ck.ordinary_norm : ck.indicator_norm) = {data[0], data[1]};
    } else if (name == "gmm.weights") {
      gw = std::move(data);
    } else if (name == "gmm.means") {
      gm = std::move(data);
    } else if (name == "gmm.variances") {
      gv = std::move(data);
    } else if (name == "log") {
      if (rank != 2 || shape[1] != 10) throw CheckpointError("checkpoint log array has shape " + shape_str(shape));
      for (std::size_t e = 0; e < shape[0]; ++e) {
        const double* row = data.data() + e * 10;
        ck.log.push_back({static_cast<std::size_t>(row[0]), row[1], row[2], row[3], row[4], row[5], row[6], row[7],
                          row[8], row[9]});
      }
    } else if (name.starts_with("param.")) {
      ck.params.emplace(name.substr(6), Tensor(shape, std::move(data)));
    } else {
      throw CheckpointError("checkpoint has unknown array '" + name + "'");
    }
  }
  if (r.remaining() != 0) throw CheckpointError("checkpoint has trailing bytes before checksum");
  if (!gw.empty() || !gm.empty() || !gv.empty()) {
    ck.gmm = GmmModel{std::move(gw), std::move(gm), std::move(gv)};
    try {
      ck.gmm->validate();
    } catch (const std::invalid_argument& e) {
      throw CheckpointError(std::string("checkpoint mixture: ") + e.what());
    }
  }
  for (const ParamSpec& s : param_specs(ck.config.model())) {
    auto it = ck.params.find(s.name);
    if (it == ck.params.end()) throw CheckpointError("checkpoint lacks parameter '" + s.name + "'");
    if (it->second.shape() != s.shape) {
      throw CheckpointError("checkpoint parameter '" + s.name + "' has shape " + shape_str(it->second.shape()) +
                            ", expected " + shape_str(s.shape));
    }
  }
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  const auto bytes = serialize_checkpoint(ck);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing checkpoint '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return deserialize_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    throw CheckpointError("'" + path + "': " + e.what());
  }
}

}  // namespace dan
