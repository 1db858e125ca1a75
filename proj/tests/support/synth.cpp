#include "synth.hpp"

#include <algorithm>

namespace synth {

using govprobe::Label;

govprobe::Instance instance(std::string id, Label label, int distance, std::string lemma, std::string summary) {
  govprobe::Instance inst;
  inst.instance_id = std::move(id);
  inst.sent_id = inst.instance_id;
  inst.language = "fi";
  inst.governor_index = 1;
  inst.governee_index = 1 + distance;
  inst.governor_lemma = std::move(lemma);
  inst.label = label;
  inst.distance = distance;
  if (label == Label::Positive) inst.pattern_id = "fi:" + inst.governor_lemma + ":I#1";
  inst.matched_spec_summary = std::move(summary);
  return inst;
}

govprobe::AttentionRecord random_record(govprobe::Rng& rng, std::string id, int layers, int heads, int tg, int td) {
  govprobe::AttentionRecord rec;
  rec.instance_id = std::move(id);
  rec.layers = layers;
  rec.heads = heads;
  rec.gov_tokens = tg;
  rec.dep_tokens = td;
  const auto n = static_cast<std::size_t>(layers * heads * tg * td);
  rec.gov_to_dep.resize(n);
  rec.dep_to_gov.resize(n);
  for (auto& w : rec.gov_to_dep) w = static_cast<float>(rng.uniform01());
  for (auto& w : rec.dep_to_gov) w = static_cast<float>(rng.uniform01());
  return rec;
}

PlantedSet planted(const PlantedSpec& spec) {
  static const char* kClasses[] = {"NOUN+Case:Ela", "NOUN+Case:Ill", "NOUN+Case:All", "ADP+Base:puolesta+Side:POST+Case:Gen",
                                   "VERB+VerbForm:Inf+InfForm:3+Case:Ill"};
  govprobe::Rng rng(spec.seed);
  PlantedSet out;
  for (std::size_t i = 0; i < spec.count; ++i) {
    const Label label = i % 2 == 0 ? Label::Positive : Label::Negative;
    const int distance = (i / 2) % 2 == 0 ? 1 + static_cast<int>(rng.uniform_index(3)) : 4 + static_cast<int>(rng.uniform_index(6));
    const auto lemma = "verb" + std::to_string(i % static_cast<std::size_t>(spec.lemmas));
    const std::string summary = label == Label::Positive ? kClasses[(i / 2) % 5] : "NOUN+Case:Ine";
    auto inst = instance("syn:" + std::to_string(i), label, distance, lemma, summary);

    const int tg = 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(spec.max_tokens)));
    const int td = 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(spec.max_tokens)));
    auto rec = random_record(rng, inst.instance_id, spec.layers, spec.heads, tg, td);

    // The planted cell: all pairs at or below the level, one pair exactly at it.
    const double level = (label == Label::Positive ? spec.positive_level : spec.negative_level) + rng.uniform(-spec.jitter, spec.jitter);
    const auto cell = static_cast<std::size_t>(spec.planted.layer * spec.heads + spec.planted.head) * rec.cell_size();
    for (std::size_t k = 0; k < rec.cell_size(); ++k) {
      rec.gov_to_dep[cell + k] = static_cast<float>(level * rng.uniform01());
      rec.dep_to_gov[cell + k] = static_cast<float>(level * rng.uniform01());
    }
    rec.gov_to_dep[cell + rng.uniform_index(rec.cell_size())] = static_cast<float>(level);

    out.instances.push_back(std::move(inst));
    out.records.push_back(std::move(rec));
  }
  return out;
}

std::vector<govprobe::Instance> random_pool(govprobe::Rng& rng, std::size_t n, int lemmas, int classes) {
  // Skew: positives and NEAR instances are over-represented by random factors.
  const double p_pos = rng.uniform(0.3, 0.8);
  const double p_near = rng.uniform(0.3, 0.8);
  std::vector<govprobe::Instance> out;
  for (std::size_t i = 0; i < n; ++i) {
    const Label label = rng.uniform01() < p_pos ? Label::Positive : Label::Negative;
    const bool near = rng.uniform01() < p_near;
    const int distance = near ? 1 + static_cast<int>(rng.uniform_index(3)) : 4 + static_cast<int>(rng.uniform_index(8));
    const auto lemma = "v" + std::to_string(rng.uniform_index(static_cast<std::uint64_t>(lemmas)));
    const auto summary = "NOUN+Case:C" + std::to_string(rng.uniform_index(static_cast<std::uint64_t>(classes)));
    out.push_back(instance("p:" + std::to_string(i), label, distance, lemma, summary));
  }
  return out;
}

}  // namespace synth
