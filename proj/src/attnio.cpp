#include "govprobe/attnio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

#include "govprobe/error.hpp"
#include "govprobe/kernels.hpp"
#include "govprobe/text.hpp"

namespace govprobe {

namespace {

constexpr double kWeightSlack = 1e-6;
constexpr std::uint64_t kMaxFloatsPerTensor = std::uint64_t{1} << 31;

void put_u16(std::string& buf, std::uint16_t v) {
  buf.push_back(static_cast<char>(v & 0xff));
  buf.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_floats(std::string& buf, std::span<const float> values) {
  const std::size_t start = buf.size();
  buf.resize(start + 4 * values.size());
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(buf.data() + start, values.data(), 4 * values.size());
  } else {
    for (std::size_t i = 0; i < values.size(); ++i) {
      const auto bits = std::bit_cast<std::uint32_t>(values[i]);
      for (int b = 0; b < 4; ++b) buf[start + 4 * i + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
    }
  }
}

std::uint16_t get_u16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) | (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t checked_u16(int value, const char* what, const std::string& id) {
  if (value < 0 || value > 0xffff) throw ValidationError(std::string(what) + " out of u16 range in record " + id);
  return static_cast<std::uint16_t>(value);
}

void encode_record(std::string& buf, const AttentionRecord& rec) {
  rec.validate();
  put_u32(buf, static_cast<std::uint32_t>(rec.instance_id.size()));
  buf += rec.instance_id;
  put_u16(buf, checked_u16(rec.layers, "L", rec.instance_id));
  put_u16(buf, checked_u16(rec.heads, "A", rec.instance_id));
  put_u16(buf, checked_u16(rec.gov_tokens, "Tg", rec.instance_id));
  put_u16(buf, checked_u16(rec.dep_tokens, "Td", rec.instance_id));
  put_floats(buf, rec.gov_to_dep);
  put_floats(buf, rec.dep_to_gov);
}

std::string header_bytes() {
  std::string buf(kContainerMagic);
  put_u32(buf, kContainerVersion);
  return buf;
}

}  // namespace

std::span<const float> AttentionRecord::gov_to_dep_cell(int layer, int head) const {
  const std::size_t offset = (static_cast<std::size_t>(layer) * static_cast<std::size_t>(heads) + static_cast<std::size_t>(head)) * cell_size();
  return std::span<const float>(gov_to_dep).subspan(offset, cell_size());
}

std::span<const float> AttentionRecord::dep_to_gov_cell(int layer, int head) const {
  const std::size_t offset = (static_cast<std::size_t>(layer) * static_cast<std::size_t>(heads) + static_cast<std::size_t>(head)) * cell_size();
  return std::span<const float>(dep_to_gov).subspan(offset, cell_size());
}

void AttentionRecord::validate() const {
  if (layers < 1 || heads < 1) throw ValidationError("record " + instance_id + ": layer and head counts must be positive");
  if (gov_tokens < 1 || dep_tokens < 1) throw ValidationError("record " + instance_id + ": Tg and Td must be at least 1");
  const std::size_t expected = static_cast<std::size_t>(layers) * static_cast<std::size_t>(heads) * cell_size();
  if (gov_to_dep.size() != expected || dep_to_gov.size() != expected) {
    throw ValidationError("record " + instance_id + ": tensor sizes do not match declared dimensions");
  }
  for (const auto* tensor : {&gov_to_dep, &dep_to_gov}) {
    for (float w : *tensor) {
      if (!(w >= -kWeightSlack && w <= 1.0 + kWeightSlack)) {
        throw ValidationError("record " + instance_id + ": attention weight " + std::to_string(w) + " outside [0, 1]");
      }
    }
  }
}

HeadMask::HeadMask(std::vector<HeadCell> cells, std::string description)
    : cells_(std::move(cells)), description_(std::move(description)) {
  std::sort(cells_.begin(), cells_.end());
  cells_.erase(std::unique(cells_.begin(), cells_.end()), cells_.end());
}

bool HeadMask::contains(HeadCell cell) const { return std::binary_search(cells_.begin(), cells_.end(), cell); }

void HeadMask::check_within(int layers, int heads) const {
  if (cells_.empty()) throw ValidationError("head mask is empty");
  for (const auto& c : cells_) {
    if (c.layer < 0 || c.layer >= layers || c.head < 0 || c.head >= heads) {
      throw ValidationError("head mask cell (" + std::to_string(c.layer) + ", " + std::to_string(c.head) + ") outside " +
                            std::to_string(layers) + "x" + std::to_string(heads));
    }
  }
}

HeadMask HeadMask::full(int layers, int heads) { return first_n_layers_mask(layers, heads, layers); }

HeadMask first_n_layers_mask(int layers, int heads, int n) {
  if (layers < 1 || heads < 1) throw ValidationError("model dimensions must be positive");
  if (n < 1 || n > layers) {
    throw ValidationError("first-N layer count " + std::to_string(n) + " outside 1.." + std::to_string(layers));
  }
  std::vector<HeadCell> cells;
  cells.reserve(static_cast<std::size_t>(n * heads));
  for (int l = 0; l < n; ++l) {
    for (int a = 0; a < heads; ++a) cells.push_back({l, a});
  }
  return HeadMask(std::move(cells), "first_n=" + std::to_string(n));
}

HeadMask parse_layer_spec(std::string_view spec, int layers, int heads) {
  std::vector<HeadCell> cells;
  const auto parse_layer = [&](std::string_view text) {
    const std::string s(trim(text));
    std::size_t used = 0;
    int value = 0;
    try {
      value = std::stoi(s, &used);
    } catch (const std::exception&) {
      throw ValidationError("bad layer number '" + s + "'");
    }
    if (used != s.size()) throw ValidationError("bad layer number '" + s + "'");
    if (value < 1 || value > layers) throw ValidationError("layer " + s + " outside 1.." + std::to_string(layers));
    return value;
  };
  for (auto part : split(spec, ',')) {
    const auto dots = part.find("..");
    int from = 0, to = 0;
    if (dots == std::string_view::npos) {
      from = to = parse_layer(part);
    } else {
      from = parse_layer(part.substr(0, dots));
      to = parse_layer(part.substr(dots + 2));
      if (from > to) throw ValidationError("empty layer range '" + std::string(part) + "'");
    }
    for (int l = from; l <= to; ++l) {
      for (int a = 0; a < heads; ++a) cells.push_back({l - 1, a});
    }
  }
  return HeadMask(std::move(cells), "layers=" + std::string(spec));
}

std::string_view to_string(PoolMode mode) {
  switch (mode) {
    case PoolMode::GovToDep:
      return "gov_to_dep";
    case PoolMode::DepToGov:
      return "dep_to_gov";
    case PoolMode::MaxBoth:
      return "max_both";
  }
  return "?";
}

PoolMode parse_pool_mode(std::string_view text) {
  if (text == "gov_to_dep") return PoolMode::GovToDep;
  if (text == "dep_to_gov") return PoolMode::DepToGov;
  if (text == "max_both") return PoolMode::MaxBoth;
  throw ValidationError("unknown pooling mode '" + std::string(text) + "'");
}

FeatureVector pool(const AttentionRecord& rec, PoolMode mode, const HeadMask& mask) {
  mask.check_within(rec.layers, rec.heads);
  FeatureVector out;
  out.instance_id = rec.instance_id;
  out.values.reserve(mask.size());
  out.head_index_map.assign(mask.cells().begin(), mask.cells().end());
  const auto& k = kernels::active();
  for (const auto& cell : mask.cells()) {
    double value = 0.0;
    switch (mode) {
      case PoolMode::GovToDep: {
        const auto c = rec.gov_to_dep_cell(cell.layer, cell.head);
        value = k.max_f32(c.data(), c.size());
        break;
      }
      case PoolMode::DepToGov: {
        const auto c = rec.dep_to_gov_cell(cell.layer, cell.head);
        value = k.max_f32(c.data(), c.size());
        break;
      }
      case PoolMode::MaxBoth: {
        const auto a = rec.gov_to_dep_cell(cell.layer, cell.head);
        const auto b = rec.dep_to_gov_cell(cell.layer, cell.head);
        value = std::max(k.max_f32(a.data(), a.size()), k.max_f32(b.data(), b.size()));
        break;
      }
    }
    out.values.push_back(value);
  }
  return out;
}

ContainerWriter::ContainerWriter(std::ostream& out) : out_(&out) {
  const auto header = header_bytes();
  out_->write(header.data(), static_cast<std::streamsize>(header.size()));
  if (!*out_) throw IoError("cannot write ATN1 header");
}

ContainerWriter::ContainerWriter(const std::string& path)
    : owned_(std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc)), out_(owned_.get()) {
  if (!*owned_) throw IoError("cannot create container " + path);
  const auto header = header_bytes();
  out_->write(header.data(), static_cast<std::streamsize>(header.size()));
  if (!*out_) throw IoError("cannot write ATN1 header to " + path);
}

void ContainerWriter::write(const AttentionRecord& rec) {
  std::string buf;
  encode_record(buf, rec);
  out_->write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!*out_) throw IoError("write failed for record " + rec.instance_id);
  ++written_;
}

ContainerReader::ContainerReader(std::istream& in) : in_(&in) { read_header(); }

ContainerReader::ContainerReader(const std::string& path)
    : owned_(std::make_unique<std::ifstream>(path, std::ios::binary)), in_(owned_.get()) {
  if (!*owned_) throw IoError("cannot open container " + path);
  read_header();
}

void ContainerReader::read_exact(void* dst, std::size_t n, const char* what) {
  in_->read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  const auto got = static_cast<std::uint64_t>(in_->gcount());
  if (got != n) throw TruncatedError(std::string("truncated ATN1 container while reading ") + what, offset_ + got);
  offset_ += n;
}

void ContainerReader::read_header() {
  char magic[4];
  in_->read(magic, 4);
  if (in_->gcount() != 4 || std::string_view(magic, 4) != kContainerMagic) {
    throw ValidationError("not an ATN1 container (bad magic)");
  }
  offset_ = 4;
  unsigned char v[4];
  read_exact(v, 4, "version");
  const auto version = get_u32(v);
  if (version != kContainerVersion) throw ValidationError("unsupported ATN1 version " + std::to_string(version));
}

std::optional<AttentionRecord> ContainerReader::next() {
  unsigned char len_bytes[4];
  in_->read(reinterpret_cast<char*>(len_bytes), 4);
  const auto got = in_->gcount();
  if (got == 0) return std::nullopt;
  if (got != 4) throw TruncatedError("truncated ATN1 record header", offset_ + static_cast<std::uint64_t>(got));
  offset_ += 4;
  const std::uint64_t record_start = offset_ - 4;

  AttentionRecord rec;
  const auto id_len = get_u32(len_bytes);
  rec.instance_id.resize(id_len);
  if (id_len > 0) read_exact(rec.instance_id.data(), id_len, "instance_id");

  unsigned char dims[8];
  read_exact(dims, 8, "record dimensions");
  rec.layers = get_u16(dims);
  rec.heads = get_u16(dims + 2);
  rec.gov_tokens = get_u16(dims + 4);
  rec.dep_tokens = get_u16(dims + 6);
  const std::uint64_t count = static_cast<std::uint64_t>(rec.layers) * rec.heads * rec.gov_tokens * rec.dep_tokens;
  if (count == 0) {
    throw ValidationError("record " + rec.instance_id + " at byte offset " + std::to_string(record_start) + " has a zero dimension");
  }
  if (count > kMaxFloatsPerTensor) throw ValidationError("record " + rec.instance_id + " declares an oversized tensor");

  for (auto* tensor : {&rec.gov_to_dep, &rec.dep_to_gov}) {
    tensor->resize(count);
    read_exact(tensor->data(), 4 * count, "attention weights");
    if constexpr (std::endian::native != std::endian::little) {
      for (auto& w : *tensor) {
        unsigned char b[4];
        std::memcpy(b, &w, 4);
        w = std::bit_cast<float>(get_u32(b));
      }
    }
  }
  rec.validate();
  return rec;
}

std::vector<AttentionRecord> read_container(const std::string& path) {
  ContainerReader reader(path);
  std::vector<AttentionRecord> out;
  while (auto rec = reader.next()) out.push_back(std::move(*rec));
  return out;
}

void write_container(const std::string& path, std::span<const AttentionRecord> records) {
  ContainerWriter writer(path);
  for (const auto& rec : records) writer.write(rec);
}

std::string encode_container(std::span<const AttentionRecord> records) {
  std::string buf = header_bytes();
  for (const auto& rec : records) encode_record(buf, rec);
  return buf;
}

}  // namespace govprobe
