#pragma once

// Binary file formats. All integers are unsigned 64-bit little-endian.
//
// Clip file (.dkvc):
//   "DKVC" | version | num_classes | frames | height | width | channels | label
//   | frames*height*width*channels float32 LE, frame-major, row-major, channel-last
//
// Checkpoint (.dktf):
//   "DKTF" | version | config_len | config text (key = value lines)
//   | record_count | records...
//   record: name_len | name | rank | dims[rank] | numel float64 LE
//
// Manifest: one line per clip, "<relative path> <src|tgt> <label>".

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dkt/model.hpp"
#include "dkt/synth.hpp"
#include "dkt/tokenizer.hpp"

namespace dkt {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint64_t kClipFormatVersion = 1;
inline constexpr std::uint64_t kCheckpointFormatVersion = 1;

namespace detail {

inline void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_f32(std::string& buf, float f) {
  auto v = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_f64(std::string& buf, double f) { put_u64(buf, std::bit_cast<std::uint64_t>(f)); }

class Reader {
 public:
  Reader(std::string bytes, std::string what) : buf_(std::move(bytes)), what_(std::move(what)) {}
  void need(std::size_t n) const {
    if (pos_ + n > buf_.size()) throw FormatError(what_ + ": truncated file");
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return std::bit_cast<float>(v);
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  std::string buf_;
  std::string what_;
  std::size_t pos_ = 0;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed for " + path.string());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// clips

inline std::string encode_clip(const VideoClip& clip, std::size_t num_classes) {
  std::string buf = "DKVC";
  for (std::uint64_t v : {kClipFormatVersion, std::uint64_t(num_classes), std::uint64_t(clip.frames),
                          std::uint64_t(clip.height), std::uint64_t(clip.width), std::uint64_t(clip.channels),
                          std::uint64_t(clip.label)})
    detail::put_u64(buf, v);
  buf.reserve(buf.size() + clip.pixels.size() * 4);
  for (float p : clip.pixels) detail::put_f32(buf, p);
  return buf;
}

struct DecodedClip {
  VideoClip clip;
  std::size_t num_classes = 0;
};

inline DecodedClip decode_clip(std::string bytes, const std::string& what = "clip") {
  detail::Reader r(std::move(bytes), what);
  if (r.bytes(4) != "DKVC") throw FormatError(what + ": bad magic, expected DKVC");
  if (auto v = r.u64(); v != kClipFormatVersion)
    throw FormatError(what + ": unsupported clip format version " + std::to_string(v));
  DecodedClip d;
  d.num_classes = r.u64();
  d.clip.frames = r.u64();
  d.clip.height = r.u64();
  d.clip.width = r.u64();
  d.clip.channels = r.u64();
  d.clip.label = r.u64();
  if (d.clip.label >= d.num_classes) throw FormatError(what + ": label out of range");
  const std::size_t n = d.clip.frames * d.clip.height * d.clip.width * d.clip.channels;
  if (n == 0) throw FormatError(what + ": empty clip");
  r.need(n * 4);
  d.clip.pixels.resize(n);
  for (auto& p : d.clip.pixels) {
    p = r.f32();
    if (!(p >= 0.0f && p <= 1.0f)) throw FormatError(what + ": pixel outside [0,1]");
  }
  if (!r.done()) throw FormatError(what + ": trailing bytes");
  return d;
}

inline void write_clip(const std::filesystem::path& path, const VideoClip& clip, std::size_t num_classes) {
  detail::write_file(path, encode_clip(clip, num_classes));
}

inline DecodedClip read_clip(const std::filesystem::path& path) {
  return decode_clip(detail::read_file(path), path.string());
}

// ---------------------------------------------------------------------------
// manifests and datasets on disk

struct ManifestEntry {
  std::string path;
  Domain domain = Domain::source;
  std::size_t label = 0;
};

inline std::string format_manifest(const std::vector<ManifestEntry>& entries) {
  std::string out;
  for (const auto& e : entries) out += e.path + " " + domain_tag(e.domain) + " " + std::to_string(e.label) + "\n";
  return out;
}

inline std::vector<ManifestEntry> parse_manifest(const std::string& text, const std::string& what = "manifest") {
  std::vector<ManifestEntry> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    ManifestEntry e;
    std::string dom;
    long long label = -1;
    if (!(ls >> e.path >> dom >> label) || label < 0 || (dom != "src" && dom != "tgt"))
      throw FormatError(what + ":" + std::to_string(lineno) + ": expected '<path> <src|tgt> <label>'");
    e.domain = dom == "src" ? Domain::source : Domain::target;
    e.label = static_cast<std::size_t>(label);
    out.push_back(std::move(e));
  }
  return out;
}

inline constexpr const char* kTrainManifest = "train.manifest";
inline constexpr const char* kTestManifest = "test.manifest";

/// Writes clips under dir/clips and the two manifests. Train pairs appear as
/// consecutive (src, tgt) lines.
inline void write_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "clips");
  std::vector<ManifestEntry> train, test;
  auto put = [&](std::vector<ManifestEntry>& m, const VideoClip& c, const std::string& stem) {
    const std::string rel = "clips/" + stem + ".dkvc";
    write_clip(dir / rel, c, ds.num_classes);
    m.push_back({rel, c.domain, c.label});
  };
  char name[64];
  for (std::size_t i = 0; i < ds.train.size(); ++i) {
    std::snprintf(name, sizeof name, "train_%05zu_src", i);
    put(train, ds.train[i].source, name);
    std::snprintf(name, sizeof name, "train_%05zu_tgt", i);
    put(train, ds.train[i].target, name);
  }
  for (std::size_t i = 0; i < ds.test_source.size(); ++i) {
    std::snprintf(name, sizeof name, "test_%05zu_src", i);
    put(test, ds.test_source[i], name);
  }
  for (std::size_t i = 0; i < ds.test_target.size(); ++i) {
    std::snprintf(name, sizeof name, "test_%05zu_tgt", i);
    put(test, ds.test_target[i], name);
  }
  detail::write_file(dir / kTrainManifest, format_manifest(train));
  detail::write_file(dir / kTestManifest, format_manifest(test));
}

inline Dataset read_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  auto load = [&](const ManifestEntry& e) {
    auto d = read_clip(dir / e.path);
    if (d.clip.label != e.label) throw FormatError(e.path + ": label disagrees with manifest");
    if (ds.num_classes == 0) ds.num_classes = d.num_classes;
    if (d.num_classes != ds.num_classes) throw FormatError(e.path + ": class count disagrees with dataset");
    d.clip.domain = e.domain;
    return d.clip;
  };
  auto train = parse_manifest(detail::read_file(dir / kTrainManifest), (dir / kTrainManifest).string());
  if (train.size() % 2) throw FormatError("train manifest must list (src, tgt) pairs");
  for (std::size_t i = 0; i < train.size(); i += 2) {
    if (train[i].domain != Domain::source || train[i + 1].domain != Domain::target)
      throw FormatError("train manifest line " + std::to_string(i + 1) + ": expected a src line followed by tgt");
    ds.train.push_back({load(train[i]), load(train[i + 1])});
  }
  for (const auto& e : parse_manifest(detail::read_file(dir / kTestManifest), (dir / kTestManifest).string()))
    (e.domain == Domain::source ? ds.test_source : ds.test_target).push_back(load(e));
  return ds;
}

// ---------------------------------------------------------------------------
// checkpoints

struct TensorRecord {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

struct Checkpoint {
  std::string config_text;
  std::vector<TensorRecord> records;
};

inline std::string encode_checkpoint(const Checkpoint& ck) {
  std::string buf = "DKTF";
  detail::put_u64(buf, kCheckpointFormatVersion);
  detail::put_u64(buf, ck.config_text.size());
  buf += ck.config_text;
  detail::put_u64(buf, ck.records.size());
  for (const auto& r : ck.records) {
    detail::put_u64(buf, r.name.size());
    buf += r.name;
    detail::put_u64(buf, r.shape.size());
    for (auto d : r.shape) detail::put_u64(buf, d);
    for (double v : r.values) detail::put_f64(buf, v);
  }
  return buf;
}

inline Checkpoint decode_checkpoint(std::string bytes, const std::string& what = "checkpoint") {
  detail::Reader r(std::move(bytes), what);
  if (r.bytes(4) != "DKTF") throw FormatError(what + ": bad magic, expected DKTF");
  if (auto v = r.u64(); v != kCheckpointFormatVersion)
    throw FormatError(what + ": unsupported checkpoint version " + std::to_string(v));
  Checkpoint ck;
  ck.config_text = r.bytes(r.u64());
  const auto count = r.u64();
  for (std::uint64_t i = 0; i < count; ++i) {
    TensorRecord rec;
    rec.name = r.bytes(r.u64());
    const auto rank = r.u64();
    if (rank == 0 || rank > 8) throw FormatError(what + ": bad rank for " + rec.name);
    for (std::uint64_t k = 0; k < rank; ++k) rec.shape.push_back(r.u64());
    const auto n = numel(rec.shape);
    r.need(n * 8);
    rec.values.resize(n);
    for (auto& v : rec.values) v = r.f64();
    ck.records.push_back(std::move(rec));
  }
  if (!r.done()) throw FormatError(what + ": trailing bytes");
  return ck;
}

template <class T>
Checkpoint make_checkpoint(const ModelParams<T>& p, std::string config_text) {
  Checkpoint ck{std::move(config_text), {}};
  for (const auto& n : p.named()) {
    TensorRecord rec{n.name, n.tensor.shape(), {}};
    for (T v : n.tensor.data()) rec.values.push_back(static_cast<double>(v));
    ck.records.push_back(std::move(rec));
  }
  return ck;
}

/// Copies checkpoint values into parameters built for the same config.
template <class T>
void load_parameters(ModelParams<T>& p, const Checkpoint& ck) {
  auto named = p.named();
  if (named.size() != ck.records.size())
    throw FormatError("checkpoint has " + std::to_string(ck.records.size()) + " tensors, model expects " +
                      std::to_string(named.size()));
  for (std::size_t i = 0; i < named.size(); ++i) {
    const auto& rec = ck.records[i];
    if (rec.name != named[i].name || rec.shape != named[i].tensor.shape())
      throw FormatError("checkpoint tensor " + rec.name + shape_str(rec.shape) + " does not match model tensor " +
                        named[i].name + shape_str(named[i].tensor.shape()));
    auto dst = named[i].tensor.mutable_data();
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = static_cast<T>(rec.values[j]);
  }
}

inline void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  detail::write_file(path, encode_checkpoint(ck));
}

inline Checkpoint read_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(detail::read_file(path), path.string());
}

}  // namespace dkt
