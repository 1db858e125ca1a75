#include <algorithm>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "govprobe/attnio.hpp"
#include "govprobe/error.hpp"
#include "synth.hpp"

using namespace govprobe;

namespace {

AttentionRecord two_by_two() {
  AttentionRecord rec;
  rec.instance_id = "x";
  rec.layers = 1;
  rec.heads = 1;
  rec.gov_tokens = 2;
  rec.dep_tokens = 2;
  rec.gov_to_dep = {0.1f, 0.3f, 0.2f, 0.05f};
  rec.dep_to_gov = {0.0f, 0.4f, 0.1f, 0.2f};
  return rec;
}

std::vector<AttentionRecord> decode(const std::string& bytes) {
  std::istringstream in(bytes);
  ContainerReader reader(in);
  std::vector<AttentionRecord> out;
  while (auto rec = reader.next()) out.push_back(std::move(*rec));
  return out;
}

}  // namespace

TEST_CASE("attnio: pooling the worked example") {
  const auto rec = two_by_two();
  const auto mask = HeadMask::full(1, 1);
  CHECK(pool(rec, PoolMode::GovToDep, mask).values == std::vector<double>{static_cast<double>(0.3f)});
  CHECK(pool(rec, PoolMode::DepToGov, mask).values == std::vector<double>{static_cast<double>(0.4f)});
  CHECK(pool(rec, PoolMode::MaxBoth, mask).values == std::vector<double>{static_cast<double>(0.4f)});
  const auto fv = pool(rec, PoolMode::GovToDep, mask);
  CHECK(fv.instance_id == "x");
  CHECK(fv.head_index_map == std::vector<HeadCell>{{0, 0}});
}

TEST_CASE("attnio: mask shapes") {
  CHECK(HeadMask::full(12, 12).size() == 144);
  CHECK(first_n_layers_mask(12, 12, 1).size() == 12);
  CHECK(first_n_layers_mask(12, 12, 5).size() == 60);
  CHECK(first_n_layers_mask(12, 12, 12).size() == 144);
  CHECK_THROWS_AS(first_n_layers_mask(12, 12, 0), ValidationError);
  CHECK_THROWS_AS(first_n_layers_mask(12, 12, 13), ValidationError);

  CHECK(parse_layer_spec("1..5", 12, 12).size() == 60);
  const auto m = parse_layer_spec("3", 12, 12);
  CHECK(m.size() == 12);
  CHECK(m.contains({2, 0}));
  CHECK_FALSE(m.contains({0, 0}));
  CHECK(parse_layer_spec("1..2,2..3,12", 12, 12).size() == 48);
  CHECK_THROWS_AS(parse_layer_spec("0", 12, 12), ValidationError);
  CHECK_THROWS_AS(parse_layer_spec("5..3", 12, 12), ValidationError);
  CHECK_THROWS_AS(parse_layer_spec("x", 12, 12), ValidationError);

  const HeadMask sorted({{1, 2}, {0, 5}, {1, 2}, {0, 1}});
  CHECK(sorted.size() == 3);
  CHECK(sorted.cells()[0] == HeadCell{0, 1});
  CHECK(sorted.cells()[2] == HeadCell{1, 2});
}

TEST_CASE("attnio: pooled vectors follow the mask") {
  Rng rng(1);
  const auto rec = synth::random_record(rng, "r", 12, 12, 2, 3);
  const auto full = pool(rec, PoolMode::MaxBoth, HeadMask::full(12, 12));
  CHECK(full.values.size() == 144);
  const auto first = pool(rec, PoolMode::MaxBoth, first_n_layers_mask(12, 12, 4));
  REQUIRE(first.values.size() == 48);
  // a sub-mask selects the same values as the full mask
  for (std::size_t k = 0; k < first.values.size(); ++k) {
    const auto c = first.head_index_map[k];
    CHECK(first.values[k] == full.values[static_cast<std::size_t>(c.layer * 12 + c.head)]);
  }
  // MAX_BOTH dominates both directions
  const auto g = pool(rec, PoolMode::GovToDep, HeadMask::full(12, 12));
  const auto d = pool(rec, PoolMode::DepToGov, HeadMask::full(12, 12));
  for (std::size_t k = 0; k < 144; ++k) CHECK(full.values[k] == std::max(g.values[k], d.values[k]));

  CHECK_THROWS_AS(pool(rec, PoolMode::GovToDep, HeadMask{}), ValidationError);
  CHECK_THROWS_AS(pool(rec, PoolMode::GovToDep, HeadMask({{12, 0}})), ValidationError);
}

TEST_CASE("attnio: pool mode names") {
  for (auto m : {PoolMode::GovToDep, PoolMode::DepToGov, PoolMode::MaxBoth}) CHECK(parse_pool_mode(to_string(m)) == m);
  CHECK_THROWS_AS(parse_pool_mode("sum"), ValidationError);
}

TEST_CASE("attnio: record validation") {
  auto rec = two_by_two();
  CHECK_NOTHROW(rec.validate());
  rec.gov_to_dep[0] = 1.0000005f;
  CHECK_NOTHROW(rec.validate());
  rec.gov_to_dep[0] = 1.01f;
  try {
    rec.validate();
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("x") != std::string::npos);
  }
  rec = two_by_two();
  rec.dep_to_gov[1] = -0.1f;
  CHECK_THROWS_AS(rec.validate(), ValidationError);
  rec = two_by_two();
  rec.dep_to_gov.pop_back();
  CHECK_THROWS_AS(rec.validate(), ValidationError);
}

TEST_CASE("attnio: container round trip") {
  Rng rng(2);
  std::vector<AttentionRecord> records;
  for (int i = 0; i < 200; ++i) {
    records.push_back(synth::random_record(rng, "id" + std::to_string(i), 1 + static_cast<int>(rng.uniform_index(4)),
                                           1 + static_cast<int>(rng.uniform_index(4)), 1 + static_cast<int>(rng.uniform_index(3)),
                                           1 + static_cast<int>(rng.uniform_index(3))));
  }
  const auto bytes = encode_container(records);
  const auto back = decode(bytes);
  CHECK(back == records);
  CHECK(encode_container(back) == bytes);

  std::ostringstream out;
  ContainerWriter writer(out);
  for (const auto& r : records) writer.write(r);
  CHECK(writer.records_written() == records.size());
  CHECK(out.str() == bytes);

  const auto path = (std::filesystem::temp_directory_path() / "govprobe_unit_roundtrip.atn").string();
  write_container(path, records);
  CHECK(read_container(path) == records);
  std::remove(path.c_str());
  CHECK_THROWS_AS(read_container("/nonexistent/x.atn"), IoError);
}

TEST_CASE("attnio: empty container and header errors") {
  const auto header = encode_container({});
  CHECK(header.size() == 8);
  CHECK(header.substr(0, 4) == "ATN1");
  CHECK(decode(header).empty());
  CHECK_THROWS_AS(decode("ATN2" + header.substr(4)), ValidationError);
  CHECK_THROWS_AS(decode(""), ValidationError);
  auto bad_version = header;
  bad_version[4] = 2;
  CHECK_THROWS_AS(decode(bad_version), ValidationError);
}

TEST_CASE("attnio: truncation reports the byte offset") {
  const std::vector<AttentionRecord> one{two_by_two()};
  const auto bytes = encode_container(one);
  // header 8 + id_len 4 + id 1 + dims 8 + 2 tensors of 4 floats
  REQUIRE(bytes.size() == 8 + 4 + 1 + 8 + 32);
  for (std::size_t cut = 9; cut < bytes.size(); ++cut) {
    try {
      decode(bytes.substr(0, cut));
      FAIL("expected TruncatedError at cut " << cut);
    } catch (const TruncatedError& e) {
      CHECK(e.offset() == cut);
    }
  }
}

TEST_CASE("attnio: out-of-range weight in a container names the record") {
  auto rec = two_by_two();
  rec.instance_id = "bad-weight";
  rec.gov_to_dep[2] = 0.5f;
  auto bytes = encode_container(std::vector<AttentionRecord>{rec});
  const float big = 2.0f;
  std::memcpy(bytes.data() + 8 + 4 + rec.instance_id.size() + 8 + 8, &big, 4);
  try {
    decode(bytes);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("bad-weight") != std::string::npos);
  }
}
