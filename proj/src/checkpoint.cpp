#include "agscl/errors.hpp"
#include "agscl/runner.hpp"

#include <fmt/format.h>
#include <zlib.h>

#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace agscl {

namespace {

constexpr char kMagic[8] = {'A', 'G', 'S', 'C', 'L', 'C', 'K', 'P'};

// Little-endian encoder; all multi-byte values are written byte by byte.
class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) u8(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  void u64(std::uint64_t v) {
    for (int k = 0; k < 8; ++k) u8(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    buf_ += s;
  }
  void matrix(const Matrix& m) {
    u64(static_cast<std::uint64_t>(m.rows()));
    u64(static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index k = 0; k < m.size(); ++k) f64(m.data()[k]);
  }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= std::uint32_t{u8()} << (8 * k);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= std::uint64_t{u8()} << (8 * k);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::size_t count(std::size_t element_bytes) {
    const std::uint64_t n = u64();
    if (element_bytes != 0 && n > (bytes_.size() - pos_) / element_bytes)
      throw FormatError(fmt::format("checkpoint: count {} at byte {} exceeds remaining data", n,
                                    pos_ - 8));
    return static_cast<std::size_t>(n);
  }
  std::string str() {
    const std::size_t n = count(1);
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  Matrix matrix() {
    const std::size_t rows = count(0);
    const std::size_t cols = count(0);
    if (cols != 0 && rows > (bytes_.size() - pos_) / 8 / cols)
      throw FormatError(fmt::format("checkpoint: matrix {}x{} at byte {} exceeds remaining data",
                                    rows, cols, pos_));
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = f64();
    return m;
  }
  bool done() const { return pos_ == bytes_.size(); }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size())
      throw FormatError(fmt::format("checkpoint truncated at byte {}", pos_));
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

void write_spec(Writer& w, const LayerSpec& s) {
  w.u8(s.kind == LayerKind::dense ? 0 : 1);
  w.u64(s.fan_in);
  w.u64(s.node_count);
  for (const std::size_t v : {s.conv.in_channels, s.conv.in_height, s.conv.in_width,
                              s.conv.kernel_h, s.conv.kernel_w, s.conv.stride, s.conv.padding})
    w.u64(v);
}

LayerSpec read_spec(Reader& r) {
  LayerSpec s;
  const std::uint8_t kind = r.u8();
  if (kind > 1) throw FormatError(fmt::format("checkpoint: unknown layer kind {}", kind));
  s.kind = kind == 0 ? LayerKind::dense : LayerKind::conv2d;
  s.fan_in = r.u64();
  s.node_count = r.u64();
  s.conv.in_channels = r.u64();
  s.conv.in_height = r.u64();
  s.conv.in_width = r.u64();
  s.conv.kernel_h = r.u64();
  s.conv.kernel_w = r.u64();
  s.conv.stride = r.u64();
  s.conv.padding = r.u64();
  return s;
}

void write_optional(Writer& w, std::optional<double> v) {
  w.u8(v ? 1 : 0);
  w.f64(v.value_or(0.0));
}

std::optional<double> read_optional(Reader& r) {
  const bool has = r.u8() != 0;
  const double v = r.f64();
  return has ? std::optional<double>(v) : std::nullopt;
}

void write_gradients(Writer& w, const GradientSet& g) {
  w.u64(g.layers.size());
  for (const auto& m : g.layers) w.matrix(m);
  w.u64(g.heads.size());
  for (const auto& m : g.heads) w.matrix(m);
}

GradientSet read_gradients(Reader& r) {
  GradientSet g;
  for (std::size_t n = r.count(16); n > 0; --n) g.layers.push_back(r.matrix());
  for (std::size_t n = r.count(16); n > 0; --n) g.heads.push_back(r.matrix());
  return g;
}

std::string payload(const RunState& s) {
  Writer w;
  w.str(s.config.to_json().dump());
  w.u64(s.seed);
  w.u64(s.completed);

  // Parameters with their layer-shape manifest.
  w.u64(s.params.specs.size());
  for (const auto& spec : s.params.specs) write_spec(w, spec);
  for (const auto& m : s.params.layers) w.matrix(m);
  w.u64(s.params.heads.size());
  for (const auto& m : s.params.heads) w.matrix(m);

  w.f64(s.omega.eta());
  w.u64(s.omega.size());
  for (const auto& layer : s.omega.values())
    for (const double v : layer) w.f64(v);

  w.u64(s.mask.size());
  for (const auto& [key, task] : s.mask.entries()) {
    w.u32(key.upper.layer);
    w.u32(key.upper.index);
    w.u32(key.column);
    w.u32(task);
  }

  w.u64(s.adam.step);
  w.f64(s.adam.beta1);
  w.f64(s.adam.beta2);
  w.f64(s.adam.eps);
  write_gradients(w, s.adam.first);
  write_gradients(w, s.adam.second);

  w.u64(s.rng_states.size());
  for (const auto& [name, state] : s.rng_states) {
    w.str(name);
    w.str(state);
  }

  const std::size_t tasks = s.accuracy.tasks();
  w.u64(tasks);
  for (std::size_t i = 0; i < tasks; ++i)
    for (std::size_t j = 0; j <= i; ++j)
      w.f64(s.accuracy.has(i, j) ? s.accuracy.at(i, j) : std::numeric_limits<double>::quiet_NaN());

  w.u64(s.capacity.size());
  for (const auto& row : s.capacity) {
    w.u64(row.task);
    write_optional(w, row.sparsity);
    w.f64(row.used_capacity);
    w.u8(row.g0_size ? 1 : 0);
    w.u64(row.g0_size.value_or(0));
    w.u64(row.frozen_nodes);
    w.u64(row.reg_param_count);
    w.u64(row.redrawn_nodes);
  }

  w.u64(s.reference.size());
  for (const double v : s.reference) w.f64(v);
  w.u64(s.wall_seconds.size());
  for (const double v : s.wall_seconds) w.f64(v);
  return w.bytes();
}

RunState parse_payload(std::string_view bytes) {
  Reader r(bytes);
  RunState s;
  try {
    s.config = ExperimentConfig::from_json(nlohmann::json::parse(r.str()));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("checkpoint: embedded config unreadable: {}", e.what()));
  }
  s.seed = r.u64();
  s.completed = r.u64();

  const std::size_t layers = r.count(8);
  for (std::size_t l = 0; l < layers; ++l) s.params.specs.push_back(read_spec(r));
  validate_specs(s.params.specs);
  for (std::size_t l = 0; l < layers; ++l) {
    Matrix m = r.matrix();
    const auto& spec = s.params.specs[l];
    if (static_cast<std::size_t>(m.rows()) != spec.node_count ||
        static_cast<std::size_t>(m.cols()) != spec.fan_in + 1)
      throw FormatError(fmt::format("checkpoint: layer {} tensor does not match its manifest", l));
    s.params.layers.push_back(std::move(m));
  }
  for (std::size_t n = r.count(16); n > 0; --n) s.params.heads.push_back(r.matrix());

  const GroupLayout layout = build_layout(s.params.specs);
  s.omega = OmegaRegistry(layout, r.f64());
  const std::size_t omega_count = r.count(8);
  if (omega_count != layout.node_count())
    throw FormatError(fmt::format("checkpoint: {} omega values for {} nodes", omega_count,
                                  layout.node_count()));
  for (const NodeId node : layout.nodes()) s.omega.set(node, r.f64());

  for (std::size_t n = r.count(16); n > 0; --n) {
    MaskKey key;
    key.upper.layer = r.u32();
    key.upper.index = r.u32();
    key.column = r.u32();
    if (!layout.contains(key.upper) || key.column > layout.specs()[key.upper.layer].fan_in)
      throw FormatError("checkpoint: mask entry outside the network");
    s.mask.add(key, r.u32());
  }

  s.adam.step = r.u64();
  s.adam.beta1 = r.f64();
  s.adam.beta2 = r.f64();
  s.adam.eps = r.f64();
  s.adam.first = read_gradients(r);
  s.adam.second = read_gradients(r);

  for (std::size_t n = r.count(16); n > 0; --n) {
    std::string name = r.str();
    s.rng_states[name] = r.str();
  }

  const std::size_t tasks = r.count(0);
  s.accuracy = AccuracyMatrix(tasks);
  for (std::size_t i = 0; i < tasks; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const double v = r.f64();
      if (!std::isnan(v)) s.accuracy.record(i, j, v);
    }

  for (std::size_t n = r.count(8); n > 0; --n) {
    CapacityRow row;
    row.task = r.u64();
    row.sparsity = read_optional(r);
    row.used_capacity = r.f64();
    const bool has_g0 = r.u8() != 0;
    const std::uint64_t g0 = r.u64();
    if (has_g0) row.g0_size = g0;
    row.frozen_nodes = r.u64();
    row.reg_param_count = r.u64();
    row.redrawn_nodes = r.u64();
    s.capacity.push_back(row);
  }
  for (std::size_t n = r.count(8); n > 0; --n) s.reference.push_back(r.f64());
  for (std::size_t n = r.count(8); n > 0; --n) s.wall_seconds.push_back(r.f64());
  if (!r.done()) throw FormatError(fmt::format("checkpoint: trailing bytes at {}", r.pos()));
  return s;
}

}  // namespace

std::string encode_checkpoint(const RunState& state) {
  const std::string body = payload(state);
  Writer w;
  for (const char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u32(kCheckpointVersion);
  w.u64(body.size());
  std::string out = w.bytes() + body;
  Writer tail;
  tail.u32(static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()))));
  return out + tail.bytes();
}

RunState decode_checkpoint(const std::string& bytes) {
  Reader header(bytes);
  for (const char c : kMagic)
    if (header.u8() != static_cast<std::uint8_t>(c))
      throw CheckpointError("not a checkpoint: bad magic");
  const std::uint32_t version = header.u32();
  if (version != kCheckpointVersion)
    throw CheckpointError(fmt::format(
        "checkpoint format version {} cannot be migrated; this build reads version {}", version,
        kCheckpointVersion));
  const std::uint64_t size = header.u64();
  const std::size_t start = header.pos();
  if (size != bytes.size() - start - 4)
    throw CheckpointError(fmt::format("checkpoint length field says {} bytes, file holds {}",
                                      size, bytes.size() - start - 4));
  const std::string_view body(bytes.data() + start, size);
  Reader tail(std::string_view(bytes).substr(start + size));
  const std::uint32_t stored = tail.u32();
  const auto actual = static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size())));
  if (stored != actual)
    throw CheckpointError(
        fmt::format("checkpoint checksum mismatch (stored {:08x}, computed {:08x})", stored, actual));
  return parse_payload(body);
}

void save_checkpoint(const RunState& state, const std::filesystem::path& path) {
  const std::string bytes = encode_checkpoint(state);
  const auto tmp = std::filesystem::path(path).concat(".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(fmt::format("cannot write checkpoint {}", tmp.string()));
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(fmt::format("short write to {}", tmp.string()));
  }
  std::filesystem::rename(tmp, path);
}

RunState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open checkpoint {}", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_checkpoint(buf.str());
}

}  // namespace agscl
