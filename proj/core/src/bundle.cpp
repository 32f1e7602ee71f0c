// Copyright 2026 The EdgeDerm Authors
// SPDX-License-Identifier: Apache-2.0

#include "edgederm/bundle.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

#include "edgederm/error.hpp"
#include "edgederm/labels.hpp"

namespace edgederm {

std::string to_string(Precision precision) {
  return precision == Precision::kInt8 ? "int8" : "float32";
}

ModelBundle make_bundle(const ArchitectureConfig& config, std::uint64_t seed) {
  ModelBundle bundle;
  bundle.config = config;
  bundle.backbone = init_weights(config, seed);
  bundle.head = SoftmaxHead::zeros(static_cast<std::size_t>(config.embedding_dim), kNumClasses);
  bundle.labels = default_labels();
  bundle.preprocess = default_preprocess(config.resolution);
  return bundle;
}

namespace {

[[noreturn]] void inconsistent(const std::string& what) {
  throw FormatError(FormatError::Kind::kShapeInconsistency, what);
}

void check_quantized(const QuantizedTensor& t, const Shape& shape, const std::string& what) {
  if (t.shape != shape) inconsistent(what + " shape " + to_string(t.shape) + ", expected " + to_string(shape));
  if (t.values.size() != shape_size(shape)) inconsistent(what + " value count mismatch");
  if (!(t.params.scale > 0.0f)) inconsistent(what + " has non-positive scale");
  if (t.params.zero_point < -128 || t.params.zero_point > 127) inconsistent(what + " zero point out of range");
}

}  // namespace

void validate(const ModelBundle& bundle) {
  try {
    validate(bundle.config);
  } catch (const ShapeError& e) {
    inconsistent(e.what());
  }
  if (bundle.labels.size() != kNumClasses) {
    inconsistent("bundle has " + std::to_string(bundle.labels.size()) + " labels, expected 7");
  }
  if (bundle.head.classes() != bundle.labels.size() || bundle.head.bias.size() != bundle.labels.size()) {
    inconsistent("head output width does not match label count");
  }
  if (bundle.head.embedding_dim() != static_cast<std::size_t>(bundle.config.embedding_dim)) {
    inconsistent("head input width " + std::to_string(bundle.head.embedding_dim()) +
                 " does not match embedding dimension " + std::to_string(bundle.config.embedding_dim));
  }
  if (bundle.head.weights.values.size() != bundle.head.weights.rows * bundle.head.weights.cols) {
    inconsistent("head weight storage mismatch");
  }
  if (bundle.preprocess.resolution != bundle.config.resolution) {
    inconsistent("preprocessing resolution does not match the architecture");
  }
  const std::vector<ConvSlot> slots = conv_slots(bundle.config);
  if (bundle.precision == Precision::kFloat32) {
    if (!bundle.quantized.empty()) inconsistent("float32 bundle carries quantized tensors");
    try {
      check_weights(bundle.config, bundle.backbone);
    } catch (const ShapeError& e) {
      inconsistent(e.what());
    }
  } else if (bundle.precision == Precision::kInt8) {
    if (!bundle.backbone.convs.empty()) inconsistent("int8 bundle carries float backbone weights");
    if (bundle.quantized.size() != slots.size()) inconsistent("int8 bundle has the wrong number of convolutions");
    for (std::size_t i = 0; i < slots.size(); ++i) {
      const std::string name = "convolution " + std::to_string(i);
      check_quantized(bundle.quantized[i].weights, slots[i].weight_shape(), name + " weights");
      check_quantized(bundle.quantized[i].bias, {static_cast<std::size_t>(slots[i].out_channels)}, name + " bias");
    }
  } else {
    throw FormatError(FormatError::Kind::kPrecision, "unknown precision tag");
  }
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  std::size_t offset = 0;
  while (offset < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - offset, 1u << 30));
    crc = ::crc32(crc, bytes.data() + offset, chunk);
    offset += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

namespace {

constexpr std::array<std::uint8_t, 4> kMagic{'E', 'D', 'R', 'M'};
constexpr std::size_t kHeaderSize = 16;
constexpr std::size_t kTrailerSize = 4;

enum class DType : std::uint8_t { kF32 = 0, kI8 = 1 };

class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void i32(std::int32_t v) { le(static_cast<std::uint32_t>(v), 4); }
  void f32(float v) { le(std::bit_cast<std::uint32_t>(v), 4); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  void raw(std::span<const std::uint8_t> data) { bytes_.insert(bytes_.end(), data.begin(), data.end()); }
  void align4() {
    while (bytes_.size() % 4 != 0) bytes_.push_back(0);
  }
  std::size_t size() const { return bytes_.size(); }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, std::size_t offset) : bytes_(bytes), pos_(offset) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(le(8)); }
  std::span<const std::uint8_t> raw(std::size_t n) {
    need(n);
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  void align4() {
    while (pos_ % 4 != 0) {
      if (u8() != 0) inconsistent("non-zero alignment padding");
    }
  }
  std::size_t position() const { return pos_; }
  std::size_t end() const { return bytes_.size(); }

 private:
  void need(std::size_t n) {
    if (n > bytes_.size() - pos_) throw FormatError(FormatError::Kind::kTruncated, "payload ends mid-record");
  }
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_;
};

void write_tensor_header(Writer& w, DType dtype, const Shape& shape) {
  w.u8(static_cast<std::uint8_t>(dtype));
  w.u8(static_cast<std::uint8_t>(shape.size()));
  w.u16(0);
  for (std::size_t d : shape) w.u32(static_cast<std::uint32_t>(d));
}

void write_f32_tensor(Writer& w, const Shape& shape, std::span<const float> values) {
  write_tensor_header(w, DType::kF32, shape);
  for (float v : values) w.f32(v);
}

void write_i8_tensor(Writer& w, const QuantizedTensor& t) {
  write_tensor_header(w, DType::kI8, t.shape);
  w.f32(t.params.scale);
  w.i32(t.params.zero_point);
  for (std::int8_t v : t.values) w.u8(static_cast<std::uint8_t>(v));
  w.align4();
}

struct RawTensor {
  DType dtype;
  Shape shape;
  std::vector<float> f32;
  QuantizedTensor i8;
};

RawTensor read_tensor(Reader& r) {
  RawTensor t;
  const std::uint8_t dtype = r.u8();
  if (dtype > 1) inconsistent("unknown tensor dtype " + std::to_string(dtype));
  t.dtype = static_cast<DType>(dtype);
  const std::uint8_t rank = r.u8();
  if (r.u16() != 0) inconsistent("non-zero tensor reserved field");
  if (rank == 0 || rank > 4) inconsistent("tensor rank " + std::to_string(rank) + " out of range");
  std::size_t count = 1;
  for (std::uint8_t i = 0; i < rank; ++i) {
    const std::uint32_t d = r.u32();
    if (d == 0) inconsistent("zero tensor dimension");
    t.shape.push_back(d);
    count *= d;
    if (count > r.end()) throw FormatError(FormatError::Kind::kTruncated, "tensor larger than file");
  }
  if (t.dtype == DType::kF32) {
    t.f32.resize(count);
    for (float& v : t.f32) v = r.f32();
  } else {
    t.i8.shape = t.shape;
    t.i8.params.scale = r.f32();
    t.i8.params.zero_point = r.i32();
    const auto data = r.raw(count);
    t.i8.values.resize(count);
    std::memcpy(t.i8.values.data(), data.data(), count);
    r.align4();
  }
  return t;
}

}  // namespace

std::vector<std::uint8_t> serialize(const ModelBundle& bundle) {
  validate(bundle);
  Writer w;
  w.raw(kMagic);
  w.u16(bundle.version);
  w.u8(static_cast<std::uint8_t>(bundle.precision));
  w.u8(0);
  w.u32(0);  // payload length, patched below
  w.u32(0);  // reserved

  const ArchitectureConfig& cfg = bundle.config;
  w.u32(static_cast<std::uint32_t>(cfg.resolution));
  w.f64(cfg.alpha);
  w.u32(static_cast<std::uint32_t>(cfg.embedding_dim));
  w.u32(static_cast<std::uint32_t>(cfg.layers.size()));
  for (const LayerSpec& l : cfg.layers) {
    w.u8(static_cast<std::uint8_t>(l.kind));
    w.u8(static_cast<std::uint8_t>(l.kernel));
    w.u8(static_cast<std::uint8_t>(l.stride));
    w.u8(l.residual ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(l.expansion));
    w.u32(static_cast<std::uint32_t>(l.in_channels));
    w.u32(static_cast<std::uint32_t>(l.out_channels));
  }

  w.u32(static_cast<std::uint32_t>(bundle.preprocess.resolution));
  for (float m : bundle.preprocess.mean) w.f32(m);
  for (float s : bundle.preprocess.scale) w.f32(s);

  w.u32(static_cast<std::uint32_t>(bundle.labels.size()));
  for (const std::string& label : bundle.labels) {
    w.u32(static_cast<std::uint32_t>(label.size()));
    w.raw({reinterpret_cast<const std::uint8_t*>(label.data()), label.size()});
  }
  w.align4();

  if (bundle.precision == Precision::kFloat32) {
    w.u32(static_cast<std::uint32_t>(bundle.backbone.convs.size() * 2));
    for (const ConvParams& p : bundle.backbone.convs) {
      write_f32_tensor(w, p.weights.shape(), p.weights.data());
      write_f32_tensor(w, {p.bias.size()}, p.bias);
    }
  } else {
    w.u32(static_cast<std::uint32_t>(bundle.quantized.size() * 2));
    for (const QuantizedConv& q : bundle.quantized) {
      write_i8_tensor(w, q.weights);
      write_i8_tensor(w, q.bias);
    }
  }

  w.u32(static_cast<std::uint32_t>(bundle.head.weights.rows));
  w.u32(static_cast<std::uint32_t>(bundle.head.weights.cols));
  for (double v : bundle.head.weights.values) w.f64(v);
  for (double v : bundle.head.bias) w.f64(v);

  std::vector<std::uint8_t>& bytes = w.bytes();
  const std::size_t payload = bytes.size() - kHeaderSize;
  for (int i = 0; i < 4; ++i) bytes[8 + i] = static_cast<std::uint8_t>(payload >> (8 * i));
  const std::uint32_t crc = crc32(std::span<const std::uint8_t>(bytes).subspan(kHeaderSize));
  w.u32(crc);
  return std::move(w.bytes());
}

ModelBundle deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() >= kMagic.size() && !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw FormatError(FormatError::Kind::kBadMagic, "not an .edrm file (bad magic bytes)");
  }
  if (bytes.size() < kHeaderSize + kTrailerSize) {
    throw FormatError(FormatError::Kind::kTruncated, "file shorter than the .edrm header");
  }
  Reader header(bytes, kMagic.size());
  ModelBundle bundle;
  bundle.version = header.u16();
  if (bundle.version != kBundleVersion) {
    throw FormatError(FormatError::Kind::kVersionMismatch,
                      "unsupported .edrm version " + std::to_string(bundle.version) + " (expected " +
                          std::to_string(kBundleVersion) + ")");
  }
  const std::uint8_t precision = header.u8();
  if (precision > 1) throw FormatError(FormatError::Kind::kPrecision, "unknown precision tag");
  bundle.precision = static_cast<Precision>(precision);
  if (header.u8() != 0) throw FormatError(FormatError::Kind::kBadMagic, "non-zero header reserved byte");
  const std::uint32_t payload = header.u32();
  if (header.u32() != 0) throw FormatError(FormatError::Kind::kBadMagic, "non-zero header reserved word");
  if (static_cast<std::uint64_t>(payload) + kHeaderSize + kTrailerSize != bytes.size()) {
    throw FormatError(FormatError::Kind::kTruncated,
                      "declared payload of " + std::to_string(payload) + " bytes does not match file size " +
                          std::to_string(bytes.size()));
  }
  const auto body = bytes.subspan(kHeaderSize, payload);
  Reader trailer(bytes, kHeaderSize + payload);
  if (trailer.u32() != crc32(body)) throw FormatError(FormatError::Kind::kChecksum, "payload CRC-32 mismatch");

  Reader r(bytes.first(kHeaderSize + payload), kHeaderSize);
  ArchitectureConfig& cfg = bundle.config;
  cfg.resolution = static_cast<int>(r.u32());
  cfg.alpha = r.f64();
  cfg.embedding_dim = static_cast<int>(r.u32());
  const std::uint32_t layer_count = r.u32();
  if (layer_count > payload / 16) throw FormatError(FormatError::Kind::kTruncated, "layer table exceeds payload");
  for (std::uint32_t i = 0; i < layer_count; ++i) {
    LayerSpec l;
    const std::uint8_t kind = r.u8();
    if (kind > 2) inconsistent("unknown layer kind " + std::to_string(kind));
    l.kind = static_cast<LayerKind>(kind);
    l.kernel = r.u8();
    l.stride = r.u8();
    const std::uint8_t residual = r.u8();
    if (residual > 1) inconsistent("residual flag must be 0 or 1");
    l.residual = residual == 1;
    l.expansion = static_cast<int>(r.u32());
    l.in_channels = static_cast<int>(r.u32());
    l.out_channels = static_cast<int>(r.u32());
    cfg.layers.push_back(l);
  }
  try {
    validate(cfg);
  } catch (const ShapeError& e) {
    inconsistent(e.what());
  }

  bundle.preprocess.resolution = static_cast<int>(r.u32());
  for (float& m : bundle.preprocess.mean) m = r.f32();
  for (float& s : bundle.preprocess.scale) s = r.f32();

  const std::uint32_t label_count = r.u32();
  if (label_count != kNumClasses) inconsistent("bundle has " + std::to_string(label_count) + " labels, expected 7");
  for (std::uint32_t i = 0; i < label_count; ++i) {
    const std::uint32_t len = r.u32();
    const auto text = r.raw(len);
    bundle.labels.emplace_back(reinterpret_cast<const char*>(text.data()), text.size());
  }
  r.align4();

  const std::vector<ConvSlot> slots = conv_slots(cfg);
  const std::uint32_t tensor_count = r.u32();
  if (tensor_count != slots.size() * 2) {
    inconsistent("bundle has " + std::to_string(tensor_count) + " backbone tensors, architecture needs " +
                 std::to_string(slots.size() * 2));
  }
  const DType expected = bundle.precision == Precision::kInt8 ? DType::kI8 : DType::kF32;
  if (bundle.precision == Precision::kFloat32) bundle.backbone = zero_weights(cfg);
  for (std::size_t i = 0; i < slots.size(); ++i) {
    RawTensor w = read_tensor(r);
    RawTensor b = read_tensor(r);
    if (w.dtype != expected || b.dtype != expected) inconsistent("tensor dtype disagrees with precision tag");
    const Shape bias_shape{static_cast<std::size_t>(slots[i].out_channels)};
    if (w.shape != slots[i].weight_shape() || b.shape != bias_shape) {
      inconsistent("convolution " + std::to_string(i) + " tensor shape " + to_string(w.shape) +
                   " does not match architecture " + to_string(slots[i].weight_shape()));
    }
    if (bundle.precision == Precision::kFloat32) {
      bundle.backbone.convs[i].weights = Tensor(w.shape, std::move(w.f32));
      bundle.backbone.convs[i].bias = std::move(b.f32);
    } else {
      bundle.quantized.push_back({std::move(w.i8), std::move(b.i8)});
    }
  }

  const std::uint32_t rows = r.u32();
  const std::uint32_t cols = r.u32();
  if (static_cast<std::uint64_t>(rows) * cols * 8 > payload) {
    throw FormatError(FormatError::Kind::kTruncated, "head larger than payload");
  }
  bundle.head.weights = Matrix<double>(rows, cols);
  for (double& v : bundle.head.weights.values) v = r.f64();
  bundle.head.bias.resize(cols);
  for (double& v : bundle.head.bias) v = r.f64();
  if (r.position() != r.end()) inconsistent("trailing bytes after head");

  validate(bundle);
  return bundle;
}

void save(const ModelBundle& bundle, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = serialize(bundle);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(FormatError::Kind::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(FormatError::Kind::kIo, "write failed for " + path.string());
}

ModelBundle load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatError::Kind::kIo, "cannot open model " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

std::string checksum(const ModelBundle& bundle) {
  const std::vector<std::uint8_t> bytes = serialize(bundle);
  Reader trailer(bytes, bytes.size() - kTrailerSize);
  char hex[9];
  std::snprintf(hex, sizeof hex, "%08x", trailer.u32());
  return hex;
}

namespace {

template <typename T>
bool same_bits(std::span<const T> a, std::span<const T> b) {
  return a.size() == b.size() && (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0);
}

bool same_bits(const QuantizedTensor& a, const QuantizedTensor& b) {
  return a.shape == b.shape && same_bits<std::int8_t>(a.values, b.values) &&
         std::bit_cast<std::uint32_t>(a.params.scale) == std::bit_cast<std::uint32_t>(b.params.scale) &&
         a.params.zero_point == b.params.zero_point;
}

}  // namespace

bool bitwise_equal(const ModelBundle& a, const ModelBundle& b) {
  if (a.version != b.version || a.precision != b.precision || a.labels != b.labels) return false;
  if (a.config.resolution != b.config.resolution || a.config.embedding_dim != b.config.embedding_dim ||
      a.config.layers != b.config.layers ||
      std::bit_cast<std::uint64_t>(a.config.alpha) != std::bit_cast<std::uint64_t>(b.config.alpha)) {
    return false;
  }
  if (a.preprocess.resolution != b.preprocess.resolution ||
      !same_bits<float>(a.preprocess.mean, b.preprocess.mean) ||
      !same_bits<float>(a.preprocess.scale, b.preprocess.scale)) {
    return false;
  }
  if (a.backbone.convs.size() != b.backbone.convs.size() || a.quantized.size() != b.quantized.size()) return false;
  for (std::size_t i = 0; i < a.backbone.convs.size(); ++i) {
    const ConvParams& x = a.backbone.convs[i];
    const ConvParams& y = b.backbone.convs[i];
    if (x.stride != y.stride || !(x.padding == y.padding) || !x.weights.bitwise_equal(y.weights) ||
        !same_bits<float>(x.bias, y.bias)) {
      return false;
    }
  }
  for (std::size_t i = 0; i < a.quantized.size(); ++i) {
    if (!same_bits(a.quantized[i].weights, b.quantized[i].weights) ||
        !same_bits(a.quantized[i].bias, b.quantized[i].bias)) {
      return false;
    }
  }
  return a.head.weights.rows == b.head.weights.rows && a.head.weights.cols == b.head.weights.cols &&
         same_bits<double>(a.head.weights.values, b.head.weights.values) &&
         same_bits<double>(a.head.bias, b.head.bias);
}

}  // namespace edgederm
