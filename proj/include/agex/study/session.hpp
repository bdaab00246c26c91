#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "agex/core/error.hpp"
#include "agex/core/hash.hpp"
#include "agex/study/types.hpp"

namespace agex::study {

// One participant's pass through a study. Presentation order, side swaps and
// the side that takes the age estimate all derive from (study_id, seed).
struct Session {
  std::string session_id;
  std::string study_id;
  std::string participant_id;
  std::uint64_t seed = 0;
  std::vector<int> order;                // indices into StudyDefinition::pairs
  std::vector<std::uint8_t> swapped;     // 1: image_b is shown first
  std::vector<std::uint8_t> estimate_first;  // 1: age estimate asked for the first image
  std::vector<RankResponse> responses;   // accepted, in presentation order

  std::size_t cursor() const { return responses.size(); }
  bool done() const { return responses.size() >= order.size(); }
};

inline Session make_session(const StudyDefinition& def, std::string session_id, std::string participant_id,
                            std::uint64_t seed) {
  Session s;
  s.session_id = std::move(session_id);
  s.study_id = def.study_id;
  s.participant_id = std::move(participant_id);
  s.seed = seed;
  std::mt19937_64 rng(derive_seed(seed, fnv1a64(def.study_id)));
  const std::size_t n = def.pairs.size();
  s.order.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.order[i] = static_cast<int>(i);
  std::shuffle(s.order.begin(), s.order.end(), rng);
  s.swapped.resize(n);
  s.estimate_first.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t bits = rng();
    s.swapped[i] = bits & 1;
    s.estimate_first[i] = (bits >> 1) & 1;
  }
  return s;
}

// What the participant sees at position k: image ids in display order.
struct Presentation {
  const StudyPair* pair = nullptr;
  std::string first_image_id;
  std::string second_image_id;
  Side estimate_side = Side::first;
};

inline Presentation presentation(const StudyDefinition& def, const Session& s, std::size_t k) {
  if (k >= s.order.size()) throw DomainError("presentation index past the end of the session");
  Presentation p;
  p.pair = &def.pairs[static_cast<std::size_t>(s.order[k])];
  p.first_image_id = s.swapped[k] ? p.pair->image_b_id : p.pair->image_a_id;
  p.second_image_id = s.swapped[k] ? p.pair->image_a_id : p.pair->image_b_id;
  p.estimate_side = s.estimate_first[k] ? Side::first : Side::second;
  return p;
}

}  // namespace agex::study
