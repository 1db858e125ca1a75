#pragma once

// Synthetic instances, attention records and feature sets for tests.

#include <cstdint>
#include <string>
#include <vector>

#include "govprobe/attnio.hpp"
#include "govprobe/experiments.hpp"
#include "govprobe/matcher.hpp"
#include "govprobe/rng.hpp"

namespace synth {

govprobe::Instance instance(std::string id, govprobe::Label label, int distance, std::string lemma = "verb",
                            std::string summary = "NOUN+Case:Ela");

struct PlantedSpec {
  std::size_t count = 8000;
  int layers = 12;
  int heads = 12;
  govprobe::HeadCell planted{3, 7};
  double positive_level = 0.9;
  double negative_level = 0.1;
  double jitter = 0.05;
  int lemmas = 100;
  int max_tokens = 2;  // Tg and Td drawn from 1..max_tokens
  std::uint64_t seed = 1;
};

struct PlantedSet {
  std::vector<govprobe::Instance> instances;
  std::vector<govprobe::AttentionRecord> records;
};

/// Balanced labels and NEAR/FAR (threshold 3). The planted head's max-pooled
/// weight is the label level plus uniform jitter; every other weight is uniform
/// noise in [0, 1], so no other head carries label information.
PlantedSet planted(const PlantedSpec& spec);

/// Random record with the given dimensions; weights uniform in [0, 1].
govprobe::AttentionRecord random_record(govprobe::Rng& rng, std::string id, int layers, int heads, int tg, int td);

/// Random instance pool with skewed label and range proportions.
std::vector<govprobe::Instance> random_pool(govprobe::Rng& rng, std::size_t n, int lemmas, int classes);

}  // namespace synth
