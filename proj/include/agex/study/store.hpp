#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "agex/core/error.hpp"
#include "agex/core/fs.hpp"
#include "agex/core/hash.hpp"
#include "agex/study/event_log.hpp"
#include "agex/study/schedule.hpp"
#include "agex/study/session.hpp"
#include "agex/study/types.hpp"

namespace agex::study {

// Opaque per-study handle for an image, so ids (which carry the patient and
// scan index) never reach a participant.
inline std::string image_alias(const std::string& study_id, const std::string& image_id) {
  return "i" + hex64(fnv1a64(study_id + ":" + image_id), 16);
}

// Persistent state of all studies under one directory:
//   <root>/<study_id>/study.json      definition, written once
//   <root>/<study_id>/events.jsonl    session and response events
//   <root>/<study_id>/snapshot.json   compacted state up to some seq
// Every mutation is durable before the call returns. Writers are serialized
// by one lock; readers see consistent snapshots.
class StudyStore {
 public:
  explicit StudyStore(fs::path root, int compact_every = 256) : root_(std::move(root)), compact_every_(compact_every) {
    fs::create_directories(root_);
    for (const auto& entry : fs::directory_iterator(root_)) {
      if (entry.is_directory() && fs::exists(entry.path() / "study.json")) load_study(entry.path());
    }
  }

  StudyDefinition create_study(const StudyDefinition& def) {
    std::unique_lock lock(mu_);
    if (def.study_id.empty()) throw ValidationError("study_id must not be empty");
    if (studies_.count(def.study_id)) throw ConflictError("study " + def.study_id + " already exists");
    const fs::path dir = root_ / def.study_id;
    write_file_atomic(dir / "study.json", to_json(def).dump(1) + "\n");
    add_study(dir, def);
    return def;
  }

  std::vector<std::string> study_ids() const {
    std::shared_lock lock(mu_);
    std::vector<std::string> ids;
    for (const auto& [id, st] : studies_) ids.push_back(id);
    return ids;
  }

  StudyDefinition study(const std::string& study_id) const {
    std::shared_lock lock(mu_);
    return find_study(study_id).def;
  }

  Session start_session(const std::string& study_id, const std::string& participant_id,
                        std::optional<std::uint64_t> seed = std::nullopt) {
    std::unique_lock lock(mu_);
    if (participant_id.empty()) throw ValidationError("participant_id is required");
    StudyState& st = find_study(study_id);
    const std::uint64_t n = st.session_order.size();
    const std::uint64_t s = seed ? *seed : derive_seed(st.def.seed, 0x5e55 + n);
    const std::string sid = "s" + hex64(derive_seed(fnv1a64(study_id + "/" + participant_id), n ^ (s << 1)), 16);
    if (sessions_.count(sid)) throw ConflictError("session id collision; retry with another seed");
    nlohmann::json ev = {{"type", "session_started"},
                         {"session_id", sid},
                         {"participant_id", participant_id},
                         {"seed", s}};
    commit(st, ev);
    return st.sessions.at(sid);
  }

  // Blinded payload for the pair at the cursor (not advanced), or a done marker.
  nlohmann::json next_pair(const std::string& session_id) const {
    std::shared_lock lock(mu_);
    const auto& [st, s] = find_session(session_id);
    if (s.done()) {
      return {{"session_id", s.session_id}, {"done", true}, {"answered", s.cursor()}, {"total", s.order.size()}};
    }
    const Presentation p = presentation(st.def, s, s.cursor());
    auto image = [&](const std::string& id) {
      const std::string alias = image_alias(st.def.study_id, id);
      return nlohmann::json{{"image_id", alias}, {"url", "/images/" + alias}};
    };
    return {{"session_id", s.session_id},
            {"done", false},
            {"pair_id", p.pair->pair_id},
            {"index", s.cursor()},
            {"total", s.order.size()},
            {"first_image", image(p.first_image_id)},
            {"second_image", image(p.second_image_id)},
            {"estimate_side", std::string(to_string(p.estimate_side))}};
  }

  nlohmann::json submit(const std::string& session_id, RankResponse r) {
    std::unique_lock lock(mu_);
    auto [st, s] = find_session_mut(session_id);
    if (!r.session_id.empty() && r.session_id != session_id) {
      throw ValidationError("response session_id does not match the session");
    }
    r.session_id = session_id;
    r.validate();
    for (const auto& prev : s->responses) {
      if (prev.pair_id == r.pair_id) throw ConflictError("pair " + r.pair_id + " was already answered in this session");
    }
    if (s->done()) throw ConflictError("session is complete");
    const Presentation p = presentation(st->def, *s, s->cursor());
    if (r.pair_id != p.pair->pair_id) {
      throw ConflictError("pair " + r.pair_id + " is not the current pair of this session");
    }
    if (r.estimated_image && *r.estimated_image != p.estimate_side) {
      throw ValidationError("the age estimate was requested for the " + std::string(to_string(p.estimate_side)) +
                            " image");
    }
    nlohmann::json ev = {{"type", "response"}, {"response", to_json(r)}};
    commit(*st, ev);
    return {{"accepted", true}, {"session_id", session_id}, {"answered", s->cursor()}, {"total", s->order.size()}};
  }

  Session session(const std::string& session_id) const {
    std::shared_lock lock(mu_);
    return find_session(session_id).second;
  }

  // All accepted responses in session-creation order, then presentation order.
  std::vector<ResponseRow> export_responses(const std::string& study_id) const {
    std::shared_lock lock(mu_);
    const StudyState& st = find_study(study_id);
    std::vector<ResponseRow> rows;
    for (const auto& sid : st.session_order) {
      const Session& s = st.sessions.at(sid);
      for (std::size_t k = 0; k < s.responses.size(); ++k) {
        const Presentation p = presentation(st.def, s, k);
        rows.push_back({s.responses[k], s.participant_id, p.first_image_id, p.second_image_id});
      }
    }
    return rows;
  }

  std::string export_truths_csv(const std::string& study_id) const { return truths_to_csv(study(study_id)); }

  // Image id behind an alias handed out in a payload.
  std::string resolve_image(const std::string& alias) const {
    std::shared_lock lock(mu_);
    auto it = aliases_.find(alias);
    if (it == aliases_.end()) throw NotFoundError("unknown image " + alias);
    return it->second;
  }

 private:
  struct StudyState {
    StudyDefinition def;
    std::unique_ptr<EventLog> log;
    std::map<std::string, Session> sessions;
    std::vector<std::string> session_order;
    std::unordered_map<std::string, std::size_t> pair_index;
    std::uint64_t seq = 0;
    int since_snapshot = 0;
  };

  StudyState& add_study(const fs::path& dir, const StudyDefinition& def) {
    auto& st = studies_[def.study_id];
    st.def = def;
    st.log = std::make_unique<EventLog>(dir / "events.jsonl");
    for (std::size_t i = 0; i < def.pairs.size(); ++i) {
      st.pair_index[def.pairs[i].pair_id] = i;
      aliases_[image_alias(def.study_id, def.pairs[i].image_a_id)] = def.pairs[i].image_a_id;
      aliases_[image_alias(def.study_id, def.pairs[i].image_b_id)] = def.pairs[i].image_b_id;
    }
    return st;
  }

  void load_study(const fs::path& dir) {
    StudyDefinition def;
    try {
      def = study_from_json(nlohmann::json::parse(read_file(dir / "study.json")));
    } catch (const nlohmann::json::exception& e) {
      throw IoError("corrupt " + (dir / "study.json").string() + ": " + e.what());
    }
    StudyState& st = add_study(dir, def);
    const fs::path snap = dir / "snapshot.json";
    if (fs::exists(snap)) {
      const auto j = nlohmann::json::parse(read_file(snap));
      st.seq = j.at("seq").get<std::uint64_t>();
      for (const auto& ev : j.at("events")) apply(st, ev);
    }
    for (const auto& ev : EventLog::read(st.log->path())) {
      if (ev.at("seq").get<std::uint64_t>() <= st.seq) continue;
      apply(st, ev);
      st.seq = ev.at("seq").get<std::uint64_t>();
    }
  }

  void apply(StudyState& st, const nlohmann::json& ev) {
    const std::string type = ev.at("type").get<std::string>();
    if (type == "session_started") {
      const std::string sid = ev.at("session_id").get<std::string>();
      st.sessions.emplace(
          sid, make_session(st.def, sid, ev.at("participant_id").get<std::string>(), ev.at("seed").get<std::uint64_t>()));
      st.session_order.push_back(sid);
      sessions_[sid] = st.def.study_id;
    } else if (type == "response") {
      RankResponse r = response_from_json(ev.at("response"));
      st.sessions.at(r.session_id).responses.push_back(std::move(r));
    } else {
      throw IoError("unknown event type " + type);
    }
  }

  // Durable first, then applied in memory.
  void commit(StudyState& st, nlohmann::json ev) {
    ev["seq"] = st.seq + 1;
    st.log->append(ev);
    st.seq += 1;
    apply(st, ev);
    if (++st.since_snapshot >= compact_every_) compact(st);
  }

  // Folds the log into snapshot.json. The snapshot replays as plain events, so
  // a crash between writing it and truncating the log only causes skipped
  // duplicates on the next load.
  void compact(StudyState& st) {
    nlohmann::json events = nlohmann::json::array();
    for (const auto& sid : st.session_order) {
      const Session& s = st.sessions.at(sid);
      events.push_back(
          {{"type", "session_started"}, {"session_id", sid}, {"participant_id", s.participant_id}, {"seed", s.seed}});
      for (const auto& r : s.responses) events.push_back({{"type", "response"}, {"response", to_json(r)}});
    }
    const fs::path dir = st.log->path().parent_path();
    write_file_atomic(dir / "snapshot.json", nlohmann::json{{"seq", st.seq}, {"events", events}}.dump() + "\n");
    st.log->truncate();
    st.since_snapshot = 0;
  }

  const StudyState& find_study(const std::string& id) const {
    auto it = studies_.find(id);
    if (it == studies_.end()) throw NotFoundError("unknown study " + id);
    return it->second;
  }
  StudyState& find_study(const std::string& id) {
    auto it = studies_.find(id);
    if (it == studies_.end()) throw NotFoundError("unknown study " + id);
    return it->second;
  }

  std::pair<const StudyState&, const Session&> find_session(const std::string& sid) const {
    auto it = sessions_.find(sid);
    if (it == sessions_.end()) throw NotFoundError("unknown session " + sid);
    const StudyState& st = studies_.at(it->second);
    return {st, st.sessions.at(sid)};
  }

  std::pair<StudyState*, Session*> find_session_mut(const std::string& sid) {
    auto it = sessions_.find(sid);
    if (it == sessions_.end()) throw NotFoundError("unknown session " + sid);
    StudyState& st = studies_.at(it->second);
    return {&st, &st.sessions.at(sid)};
  }

  fs::path root_;
  int compact_every_;
  mutable std::shared_mutex mu_;
  std::map<std::string, StudyState> studies_;
  std::unordered_map<std::string, std::string> sessions_;  // session -> study
  std::unordered_map<std::string, std::string> aliases_;   // image alias -> image id
};

}  // namespace agex::study
