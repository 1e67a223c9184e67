#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "emoe/content_encoder.hpp"
#include "emoe/errors.hpp"
#include "emoe/label_format.hpp"
#include "emoe/mapper.hpp"

namespace emoe {

// Model file layout. All integers and floats are little-endian.
//
//   "EMOE"  u32 version
//   repeated sections: u32 tag, u64 byte length, payload
//
//   REGF  u32 n; per format: str id, u8 problem, f64 lo, f64 hi, u32 k, k * str variable
//   EQCL  u32 n; per class: u32 m, m * (u32 format index, u32 variable index)
//   MAPR  u64 d; per format in registry order: net encoder, mat head
//   CENC  u32 n; per encoder: str name, str domain, u64 feature width, net
//   SEED  u64 seed
//
//   str = u32 byte length + UTF-8 bytes
//   mat = u32 rows, u32 cols, rows*cols f32 (row-major)
//   net = f64 dropout, u32 layers, per layer: mat weight, mat bias
//
// Sections with unknown tags are skipped.

inline constexpr std::array<char, 4> model_magic{'E', 'M', 'O', 'E'};
inline constexpr std::uint32_t model_version = 1;

/// A mapper together with the content encoders trained against it.
struct ModelBundle {
  MultiWayMapper mapper;
  std::vector<ContentEncoder> encoders;

  const ContentEncoder* find_encoder(const std::string& name) const {
    for (const auto& e : encoders)
      if (e.name == name) return &e;
    return nullptr;
  }
};

namespace detail {

constexpr std::uint32_t tag(const char (&s)[5]) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(s[0])) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(s[1])) << 8 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(s[2])) << 16 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(s[3])) << 24;
}

class ByteWriter {
public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
  }
  void raw(const std::string& s) { buf_.append(s); }
  void mat(const Matrix& m) {
    u32(static_cast<std::uint32_t>(m.rows()));
    u32(static_cast<std::uint32_t>(m.cols()));
    for (double v : m.data()) f32(static_cast<float>(v));
  }
  void net(const FeedForward& n) {
    f64(n.dropout());
    u32(static_cast<std::uint32_t>(n.layers().size()));
    for (const auto& l : n.layers()) {
      mat(l.weight.value);
      mat(l.bias.value);
    }
  }
  void section(std::uint32_t t, const ByteWriter& payload) {
    u32(t);
    u64(payload.buf_.size());
    buf_.append(payload.buf_);
  }
  const std::string& bytes() const noexcept { return buf_; }

private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string buf_;
};

class ByteReader {
public:
  ByteReader(const std::string& buf, std::size_t begin, std::size_t end, std::string source)
      : buf_(buf), pos_(begin), end_(end), source_(std::move(source)) {}

  std::size_t offset() const noexcept { return pos_; }
  bool at_end() const noexcept { return pos_ == end_; }

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  Matrix mat() {
    const std::size_t at = pos_;
    const std::uint32_t r = u32(), c = u32();
    const std::uint64_t count = static_cast<std::uint64_t>(r) * c;
    if (count * 4 > end_ - pos_) fail(at, "matrix of shape " + std::to_string(r) + "x" +
                                              std::to_string(c) + " exceeds section");
    Matrix m(r, c);
    for (double& v : m.data()) v = f32();
    if (!m.all_finite()) fail(at, "non-finite weight");
    return m;
  }
  FeedForward net() {
    const std::size_t at = pos_;
    const double dropout = f64();
    const std::uint32_t n = u32();
    if (n == 0) fail(at, "network without layers");
    std::vector<DenseLayer> layers;
    for (std::uint32_t i = 0; i < n; ++i) {
      Matrix w = mat();
      Matrix b = mat();
      if (b.rows() != 1 || b.cols() != w.rows()) fail(at, "bias shape does not match weight");
      layers.push_back({Parameter(std::move(w)), Parameter(std::move(b))});
    }
    try {
      return FeedForward(std::move(layers), dropout);
    } catch (const DimensionError& e) {
      fail(at, e.what());
    }
  }
  [[noreturn]] void fail(std::size_t at, const std::string& msg) const {
    throw FormatError(source_ + ": " + msg + " at offset " + std::to_string(at));
  }

private:
  void need(std::size_t n) const {
    if (n > end_ - pos_)
      throw FormatError(source_ + ": truncated at offset " + std::to_string(pos_) + " (needed " +
                        std::to_string(n) + " more bytes)");
  }
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  const std::string& buf_;
  std::size_t pos_;
  std::size_t end_;
  std::string source_;
};

inline std::uint8_t problem_code(Problem p) {
  switch (p) {
  case Problem::regression: return 0;
  case Problem::single_label: return 1;
  case Problem::multi_label: return 2;
  }
  return 0;
}

} // namespace detail

/// Serializes to bytes. Weights are stored as binary32, so models whose
/// weights were rounded after training reload bit for bit.
inline std::string serialize_model(const MultiWayMapper& mapper,
                                   std::span<const ContentEncoder> encoders) {
  using detail::ByteWriter;
  const auto& reg = mapper.registry();
  ByteWriter out;
  out.raw(std::string(model_magic.begin(), model_magic.end()));
  out.u32(model_version);

  ByteWriter regf;
  regf.u32(static_cast<std::uint32_t>(reg.size()));
  for (const auto& f : reg.formats()) {
    regf.str(f.id());
    regf.u8(detail::problem_code(f.problem()));
    regf.f64(f.range().lo);
    regf.f64(f.range().hi);
    regf.u32(static_cast<std::uint32_t>(f.arity()));
    for (const auto& v : f.variables()) regf.str(v);
  }
  out.section(detail::tag("REGF"), regf);

  ByteWriter eqcl;
  eqcl.u32(static_cast<std::uint32_t>(reg.classes().size()));
  for (const auto& c : reg.classes()) {
    eqcl.u32(static_cast<std::uint32_t>(c.size()));
    for (const auto& ref : c) {
      eqcl.u32(static_cast<std::uint32_t>(reg.index_of(ref.format_id)));
      eqcl.u32(static_cast<std::uint32_t>(*reg.find(ref.format_id).index_of(ref.variable)));
    }
  }
  out.section(detail::tag("EQCL"), eqcl);

  ByteWriter mapr;
  mapr.u64(mapper.dim());
  for (const auto& c : mapper.all_components()) {
    mapr.net(c.encoder);
    mapr.mat(c.head.value);
  }
  out.section(detail::tag("MAPR"), mapr);

  ByteWriter cenc;
  cenc.u32(static_cast<std::uint32_t>(encoders.size()));
  for (const auto& e : encoders) {
    if (e.network.output_width() != mapper.dim())
      throw DimensionError("content encoder " + e.name + " does not emit mapper dimension");
    cenc.str(e.name);
    cenc.str(e.domain);
    cenc.u64(e.feature_width());
    cenc.net(e.network);
  }
  out.section(detail::tag("CENC"), cenc);

  ByteWriter seed;
  seed.u64(mapper.seed());
  out.section(detail::tag("SEED"), seed);
  return out.bytes();
}

inline ModelBundle deserialize_model(const std::string& bytes,
                                     const std::string& source = "model file") {
  detail::ByteReader head(bytes, 0, bytes.size(), source);
  for (std::size_t i = 0; i < model_magic.size(); ++i)
    if (head.u8() != static_cast<std::uint8_t>(model_magic[i]))
      head.fail(0, "bad magic (not a model file)");
  const std::uint32_t version = head.u32();
  if (version == 0 || version > model_version)
    throw FormatError(source + ": unsupported model file version " + std::to_string(version) +
                      " at offset 4 (this build reads version " +
                      std::to_string(model_version) + ")");

  std::optional<FormatRegistry> reg;
  std::vector<EquivalenceClass> classes;
  std::optional<std::size_t> dim;
  std::vector<FormatComponents> comps;
  std::vector<ContentEncoder> encoders;
  std::uint64_t seed = 0;
  bool have_mapper = false;

  std::size_t pos = head.offset();
  while (pos < bytes.size()) {
    detail::ByteReader sh(bytes, pos, bytes.size(), source);
    const std::uint32_t t = sh.u32();
    const std::uint64_t len = sh.u64();
    const std::size_t begin = sh.offset();
    if (len > bytes.size() - begin)
      throw FormatError(source + ": truncated section at offset " + std::to_string(pos) +
                        " (declares " + std::to_string(len) + " bytes, " +
                        std::to_string(bytes.size() - begin) + " remain)");
    const std::size_t end = begin + static_cast<std::size_t>(len);
    detail::ByteReader r(bytes, begin, end, source);

    if (t == detail::tag("REGF")) {
      FormatRegistry fr;
      const std::uint32_t n = r.u32();
      for (std::uint32_t i = 0; i < n; ++i) {
        const std::size_t at = r.offset();
        std::string id = r.str();
        const std::uint8_t code = r.u8();
        const double lo = r.f64(), hi = r.f64();
        std::vector<std::string> vars(r.u32());
        for (auto& v : vars) v = r.str();
        if (code > 2) r.fail(at, "unknown problem code " + std::to_string(code));
        const Problem p = code == 0 ? Problem::regression
                          : code == 1 ? Problem::single_label
                                      : Problem::multi_label;
        try {
          fr.add_format(LabelFormat(std::move(id), std::move(vars),
                                    p == Problem::regression ? ValueRange::interval(lo, hi)
                                                             : ValueRange::binary_set(),
                                    p));
        } catch (const ValidationError& e) {
          r.fail(at, e.what());
        }
      }
      reg = std::move(fr);
    } else if (t == detail::tag("EQCL")) {
      if (!reg) r.fail(begin, "class section before registry section");
      const std::uint32_t n = r.u32();
      for (std::uint32_t i = 0; i < n; ++i) {
        EquivalenceClass c(r.u32());
        for (auto& ref : c) {
          const std::size_t at = r.offset();
          const std::uint32_t fi = r.u32(), vi = r.u32();
          if (fi >= reg->size() || vi >= reg->formats()[fi].arity())
            r.fail(at, "class member index out of range");
          ref = {reg->formats()[fi].id(), reg->formats()[fi].variables()[vi]};
        }
        classes.push_back(std::move(c));
      }
    } else if (t == detail::tag("MAPR")) {
      if (!reg) r.fail(begin, "mapper section before registry section");
      dim = static_cast<std::size_t>(r.u64());
      for (std::size_t i = 0; i < reg->size(); ++i) {
        FeedForward enc = r.net();
        Matrix w = r.mat();
        comps.push_back({std::move(enc), Parameter(std::move(w))});
      }
      have_mapper = true;
    } else if (t == detail::tag("CENC")) {
      const std::uint32_t n = r.u32();
      for (std::uint32_t i = 0; i < n; ++i) {
        const std::size_t at = r.offset();
        std::string name = r.str(), domain = r.str();
        const std::uint64_t width = r.u64();
        FeedForward net = r.net();
        if (net.input_width() != width) r.fail(at, "encoder feature width mismatch");
        encoders.push_back({std::move(name), std::move(domain), std::move(net)});
      }
    } else if (t == detail::tag("SEED")) {
      seed = r.u64();
    }
    if (t == detail::tag("REGF") || t == detail::tag("EQCL") || t == detail::tag("MAPR") ||
        t == detail::tag("CENC") || t == detail::tag("SEED")) {
      if (!r.at_end()) r.fail(r.offset(), "trailing bytes in section");
    }
    pos = end;
  }

  if (!reg || !have_mapper) throw FormatError(source + ": missing registry or mapper section");
  for (auto& c : classes) {
    try {
      reg->add_class(std::move(c));
    } catch (const Error& e) {
      throw FormatError(source + ": invalid equivalence class: " + e.what());
    }
  }
  try {
    ModelBundle out{MultiWayMapper(std::move(*reg), *dim, std::move(comps), seed),
                    std::move(encoders)};
    for (const auto& e : out.encoders)
      if (e.network.output_width() != out.mapper.dim())
        throw DimensionError("content encoder " + e.name + " does not emit mapper dimension");
    return out;
  } catch (const DimensionError& e) {
    throw FormatError(source + ": " + e.what());
  }
}

inline void save_model(const std::string& path, const MultiWayMapper& mapper,
                       std::span<const ContentEncoder> encoders = {}) {
  const std::string bytes = serialize_model(mapper, encoders);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write model file " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing model file " + path);
}

inline ModelBundle load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file " + path);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes, path);
}

} // namespace emoe
