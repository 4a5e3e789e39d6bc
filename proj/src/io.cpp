#include "tractrl/io.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include "tractrl/error.hpp"
#include "tractrl/rng.hpp"

namespace tractrl {

namespace {

class ByteWriter {
 public:
  void raw(const void* p, size_t n) {
    const auto* b = static_cast<const uint8_t*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  void u8(uint8_t v) { raw(&v, 1); }
  void u16(uint16_t v) { raw(&v, 2); }
  void u32(uint32_t v) { raw(&v, 4); }
  void f32(float v) { raw(&v, 4); }
  void magic(const char m[4]) { raw(m, 4); }
  std::vector<uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<uint8_t> bytes_;
};

class ByteReader {
 public:
  ByteReader(const std::vector<uint8_t>& bytes, const std::string& path)
      : bytes_(bytes), path_(path) {}

  void raw(void* p, size_t n) {
    if (pos_ + n > bytes_.size())
      throw FormatError(path_ + ": truncated (need " + std::to_string(n) + " bytes at offset " +
                        std::to_string(pos_) + ")");
    std::memcpy(p, bytes_.data() + pos_, n);
    pos_ += n;
  }
  uint8_t u8() {
    uint8_t v;
    raw(&v, 1);
    return v;
  }
  uint16_t u16() {
    uint16_t v;
    raw(&v, 2);
    return v;
  }
  uint32_t u32() {
    uint32_t v;
    raw(&v, 4);
    return v;
  }
  float f32() {
    float v;
    raw(&v, 4);
    return v;
  }
  void expect_magic(const char m[4]) {
    char got[5] = {0};
    raw(got, 4);
    if (std::memcmp(got, m, 4) != 0)
      throw FormatError(path_ + ": expected magic \"" + std::string(m, 4) + "\", got \"" +
                        std::string(got, 4) + "\"");
  }
  bool at_end() const { return pos_ == bytes_.size(); }
  size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::vector<uint8_t>& bytes_;
  std::string path_;
  size_t pos_ = 0;
};

}  // namespace

void atomic_write_file(const std::string& path, const std::vector<uint8_t>& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open for writing: " + tmp);
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) throw FormatError("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

void atomic_write_text(const std::string& path, const std::string& text) {
  std::vector<uint8_t> bytes(text.begin(), text.end());
  atomic_write_file(path, bytes);
}

std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open: " + path);
  in.seekg(0, std::ios::end);
  const auto size = in.tellg();
  in.seekg(0, std::ios::beg);
  std::vector<uint8_t> bytes(static_cast<size_t>(size));
  in.read(reinterpret_cast<char*>(bytes.data()), size);
  if (!in) throw FormatError("read failed: " + path);
  return bytes;
}

uint64_t file_checksum(const std::string& path) {
  const auto bytes = read_file(path);
  return fnv1a(bytes.data(), bytes.size());
}

// --------------------------------------------------------------------------
// PHV1

void save_phantom(const PhantomVolume& v, const std::string& path) {
  ByteWriter w;
  w.magic("PHV1");
  w.u32(uint32_t(v.dims.x));
  w.u32(uint32_t(v.dims.y));
  w.u32(uint32_t(v.dims.z));
  w.f32(float(v.voxel_size));
  const int64_t n = v.dims.voxels();
  for (int64_t i = 0; i < n; ++i) w.f32(float(v.wm_mask.data[size_t(i)]));
  w.u8(uint8_t(v.max_peaks));
  const int width = 4 * v.max_peaks;
  for (int64_t i = 0; i < n * width; ++i) w.f32(float(v.peaks.data[size_t(i)]));
  for (int64_t i = 0; i < n; ++i) w.u16(v.roi_labels[size_t(i)]);
  w.u16(uint16_t(v.bundles.size()));
  for (const auto& b : v.bundles) {
    w.u16(b.label_a);
    w.u16(b.label_b);
    const size_t nbytes = size_t((n + 7) / 8);
    std::vector<uint8_t> bits(nbytes, 0);
    for (int64_t i = 0; i < n; ++i)
      if (b.mask[size_t(i)]) bits[size_t(i / 8)] |= uint8_t(1u << (i % 8));
    w.raw(bits.data(), nbytes);
  }
  atomic_write_file(path, w.take());
}

PhantomVolume load_phantom(const std::string& path) {
  const auto bytes = read_file(path);
  ByteReader r(bytes, path);
  r.expect_magic("PHV1");
  PhantomVolume v;
  v.dims.x = int(r.u32());
  v.dims.y = int(r.u32());
  v.dims.z = int(r.u32());
  if (v.dims.x <= 0 || v.dims.y <= 0 || v.dims.z <= 0)
    throw FormatError(path + ": non-positive dims");
  v.voxel_size = double(r.f32());
  const int64_t n = v.dims.voxels();
  v.wm_mask = ScalarField3D(v.dims);
  for (int64_t i = 0; i < n; ++i) v.wm_mask.data[size_t(i)] = double(r.f32());
  v.max_peaks = int(r.u8());
  const int width = 4 * v.max_peaks;
  v.peaks = VectorField3D(v.dims, width);
  for (int64_t i = 0; i < n * width; ++i) v.peaks.data[size_t(i)] = double(r.f32());
  v.roi_labels.resize(size_t(n));
  for (int64_t i = 0; i < n; ++i) v.roi_labels[size_t(i)] = r.u16();
  const int n_bundles = int(r.u16());
  v.bundles.resize(size_t(n_bundles));
  for (auto& b : v.bundles) {
    b.label_a = r.u16();
    b.label_b = r.u16();
    const size_t nbytes = size_t((n + 7) / 8);
    std::vector<uint8_t> bits(nbytes);
    r.raw(bits.data(), nbytes);
    b.mask.assign(size_t(n), 0);
    for (int64_t i = 0; i < n; ++i)
      b.mask[size_t(i)] = (bits[size_t(i / 8)] >> (i % 8)) & 1u;
  }
  if (!r.at_end())
    throw FormatError(path + ": " + std::to_string(r.remaining()) + " trailing bytes");
  return v;
}

// --------------------------------------------------------------------------
// TSF1

void save_tractogram(const Tractogram& t, const std::string& path) {
  ByteWriter w;
  w.magic("TSF1");
  w.u32(uint32_t(t.streamlines.size()));
  for (const auto& s : t.streamlines) {
    w.u32(uint32_t(s.size()));
    for (const Vec3& p : s) {
      w.f32(float(p.x));
      w.f32(float(p.y));
      w.f32(float(p.z));
    }
  }
  atomic_write_file(path, w.take());
}

Tractogram load_tractogram(const std::string& path) {
  const auto bytes = read_file(path);
  ByteReader r(bytes, path);
  r.expect_magic("TSF1");
  Tractogram t;
  const uint32_t count = r.u32();
  t.streamlines.resize(count);
  for (auto& s : t.streamlines) {
    const uint32_t np = r.u32();
    s.resize(np);
    for (auto& p : s) {
      p.x = double(r.f32());
      p.y = double(r.f32());
      p.z = double(r.f32());
    }
  }
  if (!r.at_end())
    throw FormatError(path + ": " + std::to_string(r.remaining()) + " trailing bytes");
  return t;
}

void save_scores(const std::vector<double>& scores, const std::string& path) {
  std::string text;
  char buf[32];
  for (double s : scores) {
    std::snprintf(buf, sizeof(buf), "%.6f\n", s);
    text += buf;
  }
  atomic_write_text(path, text);
}

std::vector<double> load_scores(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open: " + path);
  std::vector<double> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(std::stod(line));
    } catch (const std::exception&) {
      throw FormatError(path + ": unparseable score line \"" + line + "\"");
    }
  }
  return out;
}

// --------------------------------------------------------------------------
// TNSR

void save_tensors(const NamedTensors& tensors, const std::string& path) {
  ByteWriter w;
  w.magic("TNSR");
  w.u32(uint32_t(tensors.size()));
  for (const auto& [name, t] : tensors) {
    if (name.size() > 0xffff) throw InvalidInput("tensor name too long: " + name);
    w.u16(uint16_t(name.size()));
    w.raw(name.data(), name.size());
    w.u8(uint8_t(t.shape().size()));
    for (int64_t d : t.shape()) w.u32(uint32_t(d));
    for (int64_t i = 0; i < t.numel(); ++i) w.f32(float(t.data()[i]));
  }
  atomic_write_file(path, w.take());
}

NamedTensors load_tensors(const std::string& path) {
  const auto bytes = read_file(path);
  ByteReader r(bytes, path);
  r.expect_magic("TNSR");
  NamedTensors out;
  const uint32_t count = r.u32();
  out.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    const uint16_t name_len = r.u16();
    std::string name(name_len, '\0');
    r.raw(name.data(), name_len);
    const int rank = int(r.u8());
    Shape shape(static_cast<size_t>(rank));
    for (int d = 0; d < rank; ++d) shape[size_t(d)] = int64_t(r.u32());
    Tensor t = Tensor::zeros(shape);
    for (int64_t j = 0; j < t.numel(); ++j) t.data()[j] = double(r.f32());
    out.emplace_back(std::move(name), std::move(t));
  }
  if (!r.at_end())
    throw FormatError(path + ": " + std::to_string(r.remaining()) + " trailing bytes");
  return out;
}

// --------------------------------------------------------------------------
// tck export (one-way, for external viewers)

void export_tck(const Tractogram& t, const std::string& path) {
  std::string header;
  header += "mrtrix tracks\n";
  header += "datatype: Float32LE\n";
  header += "count: " + std::to_string(t.streamlines.size()) + "\n";
  std::string offset_line = "file: . ";
  // Header size must include its own length; iterate once to settle.
  size_t data_offset = header.size() + offset_line.size() + 8;
  for (int pass = 0; pass < 4; ++pass) {
    const std::string full = header + offset_line + std::to_string(data_offset) + "\nEND\n";
    if (full.size() <= data_offset) break;
    data_offset = full.size();
  }
  std::string full = header + offset_line + std::to_string(data_offset) + "\nEND\n";
  full.resize(data_offset, ' ');

  std::vector<uint8_t> bytes(full.begin(), full.end());
  auto push_triplet = [&bytes](float x, float y, float z) {
    float v[3] = {x, y, z};
    const auto* p = reinterpret_cast<const uint8_t*>(v);
    bytes.insert(bytes.end(), p, p + 12);
  };
  const float nan = std::numeric_limits<float>::quiet_NaN();
  const float inf = std::numeric_limits<float>::infinity();
  for (const auto& s : t.streamlines) {
    for (const Vec3& p : s) push_triplet(float(p.x), float(p.y), float(p.z));
    push_triplet(nan, nan, nan);
  }
  push_triplet(inf, inf, inf);
  atomic_write_file(path, bytes);
}

std::string to_string(DoneReason r) {
  switch (r) {
    case DoneReason::None: return "none";
    case DoneReason::OracleStop: return "oracle-stop";
    case DoneReason::WmExit: return "wm-exit";
    case DoneReason::Angle: return "angle";
    case DoneReason::MaxSteps: return "max-steps";
  }
  return "unknown";
}

}  // namespace tractrl
