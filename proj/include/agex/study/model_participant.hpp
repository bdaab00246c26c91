#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "agex/core/error.hpp"
#include "agex/models/age_model.hpp"
#include "agex/models/rank_model.hpp"
#include "agex/phantom/manifest.hpp"
#include "agex/study/session.hpp"
#include "agex/study/types.hpp"
#include "agex/training/image_source.hpp"

namespace agex::study {

enum class ParticipantMode { rank_model, estimate_based };

inline std::string_view to_string(ParticipantMode m) {
  return m == ParticipantMode::rank_model ? "rank_model" : "estimate_based";
}

inline ParticipantMode parse_participant_mode(std::string_view s) {
  if (s == "rank_model") return ParticipantMode::rank_model;
  if (s == "estimate_based") return ParticipantMode::estimate_based;
  throw ConfigError("mode must be rank_model or estimate_based");
}

// Scores one presented pair: P(second image is older) plus, when available,
// an age estimate for each image.
using PairScorer = std::function<double(const ManifestRecord& first, const ManifestRecord& second)>;

namespace detail {

inline std::unordered_map<std::string, const ManifestRecord*> index_by_image(const Manifest& manifest) {
  std::unordered_map<std::string, const ManifestRecord*> m;
  for (const auto& r : manifest) m.emplace(r.image_id, &r);
  return m;
}

inline const ManifestRecord& record_for(const std::unordered_map<std::string, const ManifestRecord*>& idx,
                                        const std::string& id) {
  auto it = idx.find(id);
  if (it == idx.end()) throw NotFoundError("study image " + id + " is not in the manifest");
  return *it->second;
}

// Exact ties (p == 0.5) are broken by a seeded coin; models never answer
// not-sure.
inline Choice decide(double p_second_older, std::mt19937_64& rng) {
  if (p_second_older > 0.5) return Choice::second_older;
  if (p_second_older < 0.5) return Choice::first_older;
  return (rng() & 1) ? Choice::second_older : Choice::first_older;
}

}  // namespace detail

// Runs a model over every pair of the study as a synthetic participant, in
// the presentation order and sides of a session seeded with `seed`.
// `estimate` (may be empty) supplies the age estimate for the requested side.
inline std::vector<ResponseRow> run_participant(const StudyDefinition& def, const Manifest& manifest,
                                                const std::string& participant_id, const PairScorer& score,
                                                const std::function<double(const ManifestRecord&)>& estimate,
                                                std::uint64_t seed) {
  const auto idx = detail::index_by_image(manifest);
  const Session s = make_session(def, "model-" + participant_id, participant_id, seed);
  std::mt19937_64 rng(derive_seed(seed, 0x71e));
  std::vector<ResponseRow> rows;
  rows.reserve(def.pairs.size());
  for (std::size_t k = 0; k < s.order.size(); ++k) {
    const Presentation p = presentation(def, s, k);
    const ManifestRecord& first = detail::record_for(idx, p.first_image_id);
    const ManifestRecord& second = detail::record_for(idx, p.second_image_id);
    ResponseRow row;
    row.participant_id = participant_id;
    row.first_image_id = p.first_image_id;
    row.second_image_id = p.second_image_id;
    row.response.session_id = s.session_id;
    row.response.pair_id = p.pair->pair_id;
    row.response.choice = detail::decide(score(first, second), rng);
    if (estimate) {
      row.response.estimated_image = p.estimate_side;
      row.response.age_estimate_years =
          std::clamp(estimate(p.estimate_side == Side::first ? first : second), 0.0, 105.0);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::vector<ResponseRow> rank_model_participant(const StudyDefinition& def, const Manifest& manifest,
                                                       const ImageSource& source, const RankModel& model,
                                                       std::uint64_t seed) {
  const int res = model.resolution();
  auto score = [&](const ManifestRecord& a, const ManifestRecord& b) {
    return model.rank_pair(source.load(a, res), source.load(b, res)).p_second_older;
  };
  return run_participant(def, manifest, "model:rank_model", score, {}, seed);
}

inline std::vector<ResponseRow> estimate_participant(const StudyDefinition& def, const Manifest& manifest,
                                                     const ImageSource& source, const AgeModel& model,
                                                     std::uint64_t seed) {
  const int res = model.resolution();
  auto age = [&](const ManifestRecord& r) { return model.estimate(source.load(r, res)).age_years; };
  auto score = [&](const ManifestRecord& a, const ManifestRecord& b) {
    return ranking_from_estimates({age(a)}, {age(b)}).p_second_older;
  };
  return run_participant(def, manifest, "model:estimate_based", score, age, seed);
}

}  // namespace agex::study
