#pragma once

#include <cstdint>
#include <fstream>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "govprobe/types.hpp"

namespace govprobe {

/// Attention weights between the subword tokens of one governor and one governee.
///
/// gov_to_dep is laid out [layer][head][g][d] and dep_to_gov [layer][head][d][g],
/// both row-major, matching the ATN1 record body.
struct AttentionRecord {
  std::string instance_id;
  int layers = 0;
  int heads = 0;
  int gov_tokens = 0;
  int dep_tokens = 0;
  std::vector<float> gov_to_dep;
  std::vector<float> dep_to_gov;

  std::size_t cell_size() const noexcept { return static_cast<std::size_t>(gov_tokens) * static_cast<std::size_t>(dep_tokens); }
  std::span<const float> gov_to_dep_cell(int layer, int head) const;
  std::span<const float> dep_to_gov_cell(int layer, int head) const;

  /// Dimensions, tensor sizes and the weight range [0, 1] (slack 1e-6). Throws ValidationError.
  void validate() const;
  friend bool operator==(const AttentionRecord&, const AttentionRecord&) = default;
};

/// Set of (layer, head) cells, kept sorted layer-major, head-minor and unique.
class HeadMask {
 public:
  HeadMask() = default;
  HeadMask(std::vector<HeadCell> cells, std::string description = {});

  std::span<const HeadCell> cells() const noexcept { return cells_; }
  std::size_t size() const noexcept { return cells_.size(); }
  bool empty() const noexcept { return cells_.empty(); }
  bool contains(HeadCell cell) const;
  const std::string& description() const noexcept { return description_; }

  /// Throws ValidationError if empty or any cell is outside [0, layers) x [0, heads).
  void check_within(int layers, int heads) const;

  static HeadMask full(int layers, int heads);

 private:
  std::vector<HeadCell> cells_;
  std::string description_;
};

/// All heads of the first n layers; throws ValidationError unless 1 <= n <= layers.
HeadMask first_n_layers_mask(int layers, int heads, int n);

/// Parses "1..5" (first five layers, 1-based inclusive), "3" (layer 3) or
/// comma-separated lists of those into a mask over layers x heads.
HeadMask parse_layer_spec(std::string_view spec, int layers, int heads);

enum class PoolMode : std::uint8_t { GovToDep, DepToGov, MaxBoth };

std::string_view to_string(PoolMode mode);
PoolMode parse_pool_mode(std::string_view text);

struct FeatureVector {
  std::string instance_id;
  std::vector<double> values;
  std::vector<HeadCell> head_index_map;
};

/// Max-pools every selected head over all (g, d) pairs of the chosen direction(s).
FeatureVector pool(const AttentionRecord& rec, PoolMode mode, const HeadMask& mask);

inline constexpr std::string_view kContainerMagic = "ATN1";
inline constexpr std::uint32_t kContainerVersion = 1;

/// Streaming writer; the header goes out on construction.
class ContainerWriter {
 public:
  explicit ContainerWriter(std::ostream& out);
  explicit ContainerWriter(const std::string& path);

  void write(const AttentionRecord& rec);
  std::size_t records_written() const noexcept { return written_; }

 private:
  std::unique_ptr<std::ofstream> owned_;
  std::ostream* out_;
  std::size_t written_ = 0;
};

/// Streaming reader. Validates each record as it is decoded.
class ContainerReader {
 public:
  explicit ContainerReader(std::istream& in);
  explicit ContainerReader(const std::string& path);

  std::optional<AttentionRecord> next();
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  void read_exact(void* dst, std::size_t n, const char* what);
  void read_header();

  std::unique_ptr<std::ifstream> owned_;
  std::istream* in_;
  std::uint64_t offset_ = 0;
};

std::vector<AttentionRecord> read_container(const std::string& path);
void write_container(const std::string& path, std::span<const AttentionRecord> records);

/// ATN1 bytes for a sequence of records; the canonical encoding.
std::string encode_container(std::span<const AttentionRecord> records);

}  // namespace govprobe
