#pragma once

#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "agex/core/csv.hpp"
#include "agex/core/error.hpp"

namespace agex::study {

struct StudyPair {
  std::string pair_id;
  std::string patient_id;
  std::string image_a_id;
  std::string image_b_id;
  double true_age_a = 0;
  double true_age_b = 0;
  int separation_bucket = 0;

  double separation_years() const { return true_age_b > true_age_a ? true_age_b - true_age_a : true_age_a - true_age_b; }
};

struct StudyDefinition {
  std::string study_id;
  std::vector<StudyPair> pairs;
  std::uint64_t seed = 0;
  int pairs_per_bucket = 0;
  double bucket_width_years = 0;
  int n_buckets = 0;
};

enum class Choice { first_older, second_older, not_sure };
enum class Side { first, second };

inline std::string_view to_string(Choice c) {
  switch (c) {
    case Choice::first_older:
      return "first_older";
    case Choice::second_older:
      return "second_older";
    case Choice::not_sure:
      break;
  }
  return "not_sure";
}

inline Choice parse_choice(std::string_view s) {
  if (s == "first_older") return Choice::first_older;
  if (s == "second_older") return Choice::second_older;
  if (s == "not_sure") return Choice::not_sure;
  throw ValidationError("choice must be first_older, second_older or not_sure");
}

inline std::string_view to_string(Side s) { return s == Side::first ? "first" : "second"; }

inline Side parse_side(std::string_view s) {
  if (s == "first") return Side::first;
  if (s == "second") return Side::second;
  throw ValidationError("estimated_image must be first or second");
}

// One participant judgment on one presented pair.
struct RankResponse {
  std::string session_id;
  std::string pair_id;
  Choice choice = Choice::not_sure;
  std::optional<double> age_estimate_years;
  std::optional<Side> estimated_image;
  long long elapsed_ms = 0;

  void validate() const {
    if (pair_id.empty()) throw ValidationError("pair_id is required");
    if (age_estimate_years.has_value() != estimated_image.has_value()) {
      throw ValidationError("age_estimate_years and estimated_image must be given together");
    }
    if (age_estimate_years && !(*age_estimate_years >= 0.0 && *age_estimate_years <= 105.0)) {
      throw ValidationError("age estimate must lie in [0,105]");
    }
    if (elapsed_ms < 0) throw ValidationError("elapsed_ms must be >= 0");
  }
};

// Exported response: the judgment plus who gave it and what was on screen.
struct ResponseRow {
  RankResponse response;
  std::string participant_id;
  std::string first_image_id;
  std::string second_image_id;
};

inline constexpr std::string_view kResponsesHeader =
    "session_id,participant_id,pair_id,first_image_id,second_image_id,choice,estimated_image,age_estimate_years,"
    "elapsed_ms";
inline constexpr std::string_view kTruthsHeader =
    "pair_id,patient_id,image_a_id,image_b_id,true_age_a,true_age_b,separation_years,separation_bucket";

inline std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline std::string responses_to_csv(const std::vector<ResponseRow>& rows) {
  std::ostringstream os;
  os << kResponsesHeader << '\n';
  for (const auto& r : rows) {
    const auto& q = r.response;
    csv::write_row(os, q.session_id, r.participant_id, q.pair_id, r.first_image_id, r.second_image_id,
                   to_string(q.choice), q.estimated_image ? std::string(to_string(*q.estimated_image)) : "",
                   q.age_estimate_years ? fmt_real(*q.age_estimate_years) : "", q.elapsed_ms);
  }
  return os.str();
}

inline void check_header(const csv::Table& t, std::string_view expected) {
  std::string h;
  for (std::size_t i = 0; i < t.header.size(); ++i) h += (i ? "," : "") + t.header[i];
  if (h != expected) throw ValidationError("unexpected CSV header: " + h);
}

inline std::vector<ResponseRow> responses_from_csv(std::string_view text) {
  const csv::Table t = csv::parse(text);
  check_header(t, kResponsesHeader);
  std::vector<ResponseRow> out;
  for (const auto& row : t.rows) {
    ResponseRow r;
    r.response.session_id = row[0];
    r.participant_id = row[1];
    r.response.pair_id = row[2];
    r.first_image_id = row[3];
    r.second_image_id = row[4];
    r.response.choice = parse_choice(row[5]);
    if (!row[6].empty()) r.response.estimated_image = parse_side(row[6]);
    if (!row[7].empty()) r.response.age_estimate_years = csv::to_double(row[7]);
    r.response.elapsed_ms = csv::to_int(row[8]);
    r.response.validate();
    out.push_back(std::move(r));
  }
  return out;
}

inline std::string truths_to_csv(const StudyDefinition& def) {
  std::ostringstream os;
  os << kTruthsHeader << '\n';
  for (const auto& p : def.pairs) {
    csv::write_row(os, p.pair_id, p.patient_id, p.image_a_id, p.image_b_id, fmt_real(p.true_age_a),
                   fmt_real(p.true_age_b), fmt_real(p.separation_years()), p.separation_bucket);
  }
  return os.str();
}

inline std::vector<StudyPair> truths_from_csv(std::string_view text) {
  const csv::Table t = csv::parse(text);
  check_header(t, kTruthsHeader);
  std::vector<StudyPair> out;
  for (const auto& row : t.rows) {
    StudyPair p;
    p.pair_id = row[0];
    p.patient_id = row[1];
    p.image_a_id = row[2];
    p.image_b_id = row[3];
    p.true_age_a = csv::to_double(row[4]);
    p.true_age_b = csv::to_double(row[5]);
    p.separation_bucket = static_cast<int>(csv::to_int(row[7]));
    out.push_back(std::move(p));
  }
  return out;
}

inline nlohmann::json to_json(const StudyPair& p) {
  return {{"pair_id", p.pair_id},       {"patient_id", p.patient_id}, {"image_a_id", p.image_a_id},
          {"image_b_id", p.image_b_id}, {"true_age_a", p.true_age_a}, {"true_age_b", p.true_age_b},
          {"separation_bucket", p.separation_bucket}};
}

inline StudyPair pair_from_json(const nlohmann::json& j) {
  StudyPair p;
  p.pair_id = j.at("pair_id").get<std::string>();
  p.patient_id = j.at("patient_id").get<std::string>();
  p.image_a_id = j.at("image_a_id").get<std::string>();
  p.image_b_id = j.at("image_b_id").get<std::string>();
  p.true_age_a = j.at("true_age_a").get<double>();
  p.true_age_b = j.at("true_age_b").get<double>();
  p.separation_bucket = j.at("separation_bucket").get<int>();
  return p;
}

inline nlohmann::json to_json(const RankResponse& r) {
  nlohmann::json j = {{"session_id", r.session_id},
                      {"pair_id", r.pair_id},
                      {"choice", std::string(to_string(r.choice))},
                      {"elapsed_ms", r.elapsed_ms}};
  if (r.age_estimate_years) j["age_estimate_years"] = *r.age_estimate_years;
  if (r.estimated_image) j["estimated_image"] = std::string(to_string(*r.estimated_image));
  return j;
}

// Parses a participant-submitted response body; any malformation is a
// ValidationError.
inline RankResponse response_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("response must be a JSON object");
  RankResponse r;
  try {
    r.pair_id = j.at("pair_id").get<std::string>();
    r.choice = parse_choice(j.at("choice").get<std::string>());
    if (j.contains("age_estimate_years") && !j["age_estimate_years"].is_null()) {
      r.age_estimate_years = j["age_estimate_years"].get<double>();
    }
    if (j.contains("estimated_image") && !j["estimated_image"].is_null()) {
      r.estimated_image = parse_side(j["estimated_image"].get<std::string>());
    }
    r.elapsed_ms = j.value("elapsed_ms", 0LL);
    if (j.contains("session_id")) r.session_id = j["session_id"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed response: ") + e.what());
  }
  r.validate();
  return r;
}

}  // namespace agex::study
