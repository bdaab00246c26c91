#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>
#include <thread>

#include "httplib.h"
#undef _res

#include "agex/stats/study_summary.hpp"
#include "agex/study/model_participant.hpp"
#include "agex/study/schedule.hpp"
#include "agex/study/server.hpp"
#include "agex/study/store.hpp"

using namespace agex;
using namespace agex::study;
using json = nlohmann::json;

namespace {

const Manifest& study_manifest() {
  static const Manifest m = [] {
    ManifestOptions o;
    o.n_patients = 3000;
    o.seed = 12;
    return build_manifest(o);
  }();
  return m;
}

StudyDefinition default_study(std::uint64_t seed = 1) {
  StudyOptions o;
  o.seed = seed;
  o.study_id = "S" + std::to_string(seed);
  return create_study(study_manifest(), o);
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("agex-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

// Answers the session's current pair truthfully.
RankResponse truthful(const StudyDefinition& def, const StudyStore& store, const std::string& sid) {
  const json next = store.next_pair(sid);
  const std::string pid = next.at("pair_id");
  const auto s = store.session(sid);
  const Presentation p = presentation(def, s, s.cursor());
  EXPECT_EQ(p.pair->pair_id, pid);
  const bool first_is_a = p.first_image_id == p.pair->image_a_id;
  const bool b_older = p.pair->true_age_b > p.pair->true_age_a;
  RankResponse r;
  r.pair_id = pid;
  r.choice = (b_older == first_is_a) ? Choice::second_older : Choice::first_older;
  r.age_estimate_years = 50;
  r.estimated_image = p.estimate_side;
  r.elapsed_ms = 1200;
  return r;
}

// Every key anywhere in the payload, recursively.
void collect_keys(const json& j, std::set<std::string>& keys) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) {
      keys.insert(k);
      collect_keys(v, keys);
    }
  } else if (j.is_array()) {
    for (const auto& v : j) collect_keys(v, keys);
  }
}

void expect_blinded(const json& payload, const StudyDefinition& def) {
  std::set<std::string> keys;
  collect_keys(payload, keys);
  for (const auto& k : keys) {
    EXPECT_EQ(k.find("true_age"), std::string::npos) << k;
    EXPECT_EQ(k.find("age_years"), std::string::npos) << k;
    EXPECT_EQ(k.find("separation"), std::string::npos) << k;
    EXPECT_NE(k, "patient_id");
  }
  const std::string text = payload.dump();
  for (const auto& p : def.pairs) {
    EXPECT_EQ(text.find(p.patient_id), std::string::npos);
    EXPECT_EQ(text.find(p.image_a_id), std::string::npos);
  }
}

}  // namespace

TEST(Schedule, DefaultsGiveTwoHundredPairsFortyPerBucket) {
  const auto def = default_study();
  ASSERT_EQ(def.pairs.size(), 200u);
  std::map<int, int> per_bucket;
  std::set<std::string> patients;
  std::set<std::string> ids;
  for (const auto& p : def.pairs) {
    ++per_bucket[p.separation_bucket];
    const double d = p.separation_years();
    EXPECT_GE(d, 2.0 * p.separation_bucket);
    EXPECT_LT(d, 2.0 * p.separation_bucket + 2.0);
    EXPECT_LE(p.true_age_a, p.true_age_b);
    EXPECT_TRUE(patients.insert(p.patient_id).second) << "patient reused";
    EXPECT_TRUE(ids.insert(p.pair_id).second);
    EXPECT_EQ(p.pair_id.find(p.patient_id), std::string::npos);
  }
  ASSERT_EQ(per_bucket.size(), 5u);
  for (const auto& [b, n] : per_bucket) EXPECT_EQ(n, 40) << b;
}

TEST(Schedule, SinglePairAndDeterminism) {
  StudyOptions o;
  o.pairs_per_bucket = 1;
  o.n_buckets = 1;
  EXPECT_EQ(create_study(study_manifest(), o).pairs.size(), 1u);
  EXPECT_EQ(to_json(default_study(4)), to_json(default_study(4)));
  EXPECT_EQ(to_json(study_from_json(to_json(default_study(4)))), to_json(default_study(4)));
}

TEST(Schedule, InsufficientPatientsIsConfigError) {
  ManifestOptions mo;
  mo.n_patients = 30;
  StudyOptions o;
  EXPECT_THROW(create_study(build_manifest(mo), o), ConfigError);
}

TEST(SessionTest, OrderAndSides) {
  const auto def = default_study();
  const auto a = make_session(def, "a", "u", 1);
  const auto b = make_session(def, "b", "u", 2);
  const auto c = make_session(def, "c", "v", 1);
  EXPECT_NE(a.order, b.order);
  EXPECT_EQ(a.order, c.order);
  EXPECT_EQ(a.swapped, c.swapped);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = make_session(def, "x", "u", seed);
    int older_left = 0;
    for (std::size_t k = 0; k < s.order.size(); ++k) {
      const auto p = presentation(def, s, k);
      const bool first_is_b = p.first_image_id == p.pair->image_b_id;
      older_left += first_is_b == (p.pair->true_age_b > p.pair->true_age_a);
    }
    EXPECT_NEAR(older_left, 100, 20) << seed;
  }
}

TEST(Types, ResponseValidationAndCsv) {
  EXPECT_THROW(response_from_json(json{{"pair_id", "q"}, {"choice", "maybe"}}), ValidationError);
  EXPECT_THROW(response_from_json(json{{"pair_id", "q"}, {"choice", "not_sure"}, {"age_estimate_years", 200},
                                       {"estimated_image", "first"}}),
               ValidationError);
  EXPECT_THROW(response_from_json(json{{"pair_id", "q"}, {"choice", "not_sure"}, {"age_estimate_years", 20}}),
               ValidationError);
  EXPECT_THROW(response_from_json(json::array()), ValidationError);
  ResponseRow row;
  row.response = response_from_json(
      json{{"pair_id", "q1"}, {"choice", "first_older"}, {"age_estimate_years", 44.5}, {"estimated_image", "second"}});
  row.participant_id = "p";
  row.first_image_id = "x";
  row.second_image_id = "y";
  const auto back = responses_from_csv(responses_to_csv({row}));
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(*back[0].response.age_estimate_years, 44.5);
  EXPECT_EQ(*back[0].response.estimated_image, Side::second);
  EXPECT_EQ(responses_to_csv({}), std::string(kResponsesHeader) + "\n");
  const auto def = default_study();
  const auto truths = truths_from_csv(truths_to_csv(def));
  ASSERT_EQ(truths.size(), 200u);
  EXPECT_EQ(truths[7].image_b_id, def.pairs[7].image_b_id);
}

TEST(StoreTest, CursorDuplicatesAndOrder) {
  TempDir dir;
  StudyStore store(dir.path());
  const auto def = store.create_study(default_study());
  EXPECT_THROW(store.create_study(def), ConflictError);
  const auto s = store.start_session(def.study_id, "reader1", 7);
  const json first = store.next_pair(s.session_id);
  EXPECT_EQ(first["index"], 0);
  EXPECT_EQ(first["pair_id"], def.pairs[s.order[0]].pair_id);
  expect_blinded(first, def);

  RankResponse r = truthful(def, store, s.session_id);
  EXPECT_EQ(store.submit(s.session_id, r)["answered"], 1);
  EXPECT_THROW(store.submit(s.session_id, r), ConflictError);
  EXPECT_EQ(store.session(s.session_id).cursor(), 1u);

  RankResponse skip = truthful(def, store, s.session_id);
  skip.pair_id = def.pairs[s.order[5]].pair_id;
  EXPECT_THROW(store.submit(s.session_id, skip), ConflictError);
  RankResponse wrong_side = truthful(def, store, s.session_id);
  wrong_side.estimated_image = *wrong_side.estimated_image == Side::first ? Side::second : Side::first;
  EXPECT_THROW(store.submit(s.session_id, wrong_side), ValidationError);
  EXPECT_EQ(store.session(s.session_id).cursor(), 1u);
  EXPECT_THROW(store.next_pair("nope"), NotFoundError);
  EXPECT_THROW(store.start_session("nope", "u"), NotFoundError);
}

TEST(StoreTest, FullSessionExportAndSummary) {
  TempDir dir;
  StudyStore store(dir.path(), 64);
  const auto def = store.create_study(default_study());
  EXPECT_EQ(responses_to_csv(store.export_responses(def.study_id)), std::string(kResponsesHeader) + "\n");
  for (int p = 0; p < 3; ++p) {
    const auto s = store.start_session(def.study_id, "reader" + std::to_string(p));
    for (int k = 0; k < 200; ++k) {
      const json next = store.next_pair(s.session_id);
      expect_blinded(next, def);
      store.submit(s.session_id, truthful(def, store, s.session_id));
    }
    const json done = store.next_pair(s.session_id);
    EXPECT_TRUE(done["done"].get<bool>());
    EXPECT_EQ(done["answered"], 200);
    RankResponse extra;
    extra.pair_id = def.pairs[0].pair_id;
    EXPECT_THROW(store.submit(s.session_id, extra), ConflictError);
  }
  const auto rows = store.export_responses(def.study_id);
  ASSERT_EQ(rows.size(), 600u);
  const auto parsed = responses_from_csv(responses_to_csv(rows));
  const auto truths = truths_from_csv(store.export_truths_csv(def.study_id));
  const auto summary = stats::study_summary(parsed, truths, {});
  EXPECT_EQ(summary.n_responses, 600);
  EXPECT_DOUBLE_EQ(summary.success_all, 1.0);
  // Reload from disk (snapshot plus log tail) and compare.
  StudyStore again(dir.path());
  EXPECT_EQ(responses_to_csv(again.export_responses(def.study_id)), responses_to_csv(rows));
}

TEST(StoreTest, RestartResumesAtNextPair) {
  TempDir dir;
  std::string sid;
  StudyDefinition def;
  std::vector<std::string> answered;
  {
    StudyStore store(dir.path());
    def = store.create_study(default_study());
    sid = store.start_session(def.study_id, "reader").session_id;
    for (int k = 0; k < 50; ++k) {
      auto r = truthful(def, store, sid);
      answered.push_back(r.pair_id);
      store.submit(sid, r);
    }
  }
  StudyStore store(dir.path());
  const auto s = store.session(sid);
  EXPECT_EQ(s.cursor(), 50u);
  EXPECT_EQ(store.next_pair(sid)["index"], 50);
  for (int k = 0; k < 50; ++k) EXPECT_EQ(s.responses[k].pair_id, answered[k]);
  RankResponse dup;
  dup.pair_id = answered[10];
  dup.choice = Choice::not_sure;
  EXPECT_THROW(store.submit(sid, dup), ConflictError);
}

TEST(StoreTest, TornLogTailIsDropped) {
  TempDir dir;
  std::string sid;
  StudyDefinition def;
  {
    StudyStore store(dir.path());
    def = store.create_study(default_study());
    sid = store.start_session(def.study_id, "reader").session_id;
    store.submit(sid, truthful(def, store, sid));
  }
  fs::path log;
  for (const auto& e : fs::recursive_directory_iterator(dir.path())) {
    if (e.path().extension() == ".jsonl") log = e.path();
  }
  ASSERT_FALSE(log.empty());
  {
    std::ofstream f(log, std::ios::app);
    f << R"({"type":"response","seq":99,"resp)";
  }
  StudyStore store(dir.path());
  EXPECT_EQ(store.session(sid).cursor(), 1u);
  store.submit(sid, truthful(def, store, sid));
  StudyStore again(dir.path());
  EXPECT_EQ(again.session(sid).cursor(), 2u);
}

TEST(ModelParticipant, OracleEstimatesAreAlwaysRight) {
  const auto def = default_study();
  std::map<std::string, double> age;
  for (const auto& r : study_manifest()) age[r.image_id] = r.age_years;
  const auto rows = run_participant(
      def, study_manifest(), "oracle",
      [&](const ManifestRecord& a, const ManifestRecord& b) {
        return ranking_from_estimates({a.age_years}, {b.age_years}).p_second_older;
      },
      [](const ManifestRecord& r) { return r.age_years; }, 3);
  ASSERT_EQ(rows.size(), def.pairs.size());
  const auto s = stats::study_summary(rows, def.pairs, {});
  EXPECT_DOUBLE_EQ(s.success_all, 1.0);
  EXPECT_DOUBLE_EQ(*s.success_attempted, 1.0);
  ASSERT_TRUE(s.age_estimates);
  EXPECT_NEAR(s.age_estimates->mae, 0.0, 1e-5);
}

class ServerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    store_ = std::make_unique<StudyStore>(dir_.path());
    server_ = std::make_unique<StudyServer>(
        *store_, study_manifest(), [](const std::string& id) { return "PNG:" + id; }, "sekret");
    port_ = server_->bind_any("127.0.0.1");
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    for (int i = 0; i < 100 && !server_->http().is_running(); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  void TearDown() override {
    server_->stop();
    thread_.join();
  }
  httplib::Headers admin() const { return {{"Authorization", "Bearer sekret"}}; }

  TempDir dir_;
  std::unique_ptr<StudyStore> store_;
  std::unique_ptr<StudyServer> server_;
  std::unique_ptr<httplib::Client> client_;
  std::thread thread_;
  int port_ = 0;
};

TEST_F(ServerTest, EndToEndApi) {
  auto res = client_->Post("/studies", R"({"seed":3,"study_id":"T1"})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 401);
  res = client_->Post("/studies", admin(), R"({"seed":3,"study_id":"T1"})", "application/json");
  ASSERT_EQ(res->status, 201) << res->body;
  EXPECT_EQ(json::parse(res->body)["n_pairs"], 200);
  res = client_->Post("/studies", admin(), R"({"seed":3,"study_id":"T1"})", "application/json");
  EXPECT_EQ(res->status, 409);

  res = client_->Post("/studies/T1/sessions", R"({"participant_id":"r1"})", "application/json");
  ASSERT_EQ(res->status, 201);
  const std::string sid = json::parse(res->body)["session_id"];
  EXPECT_EQ(client_->Post("/studies/T1/sessions", R"({})", "application/json")->status, 400);
  EXPECT_EQ(client_->Post("/studies/none/sessions", R"({"participant_id":"r"})", "application/json")->status, 404);

  const auto def = store_->study("T1");
  for (int k = 0; k < 3; ++k) {
    res = client_->Get("/sessions/" + sid + "/next");
    ASSERT_EQ(res->status, 200);
    const json next = json::parse(res->body);
    expect_blinded(next, def);
    const std::string url = next["first_image"]["url"];
    auto img = client_->Get(url);
    ASSERT_EQ(img->status, 200);
    EXPECT_EQ(img->get_header_value("Content-Type"), "image/png");
    const auto r = truthful(def, *store_, sid);
    res = client_->Post("/sessions/" + sid + "/responses", to_json(r).dump(), "application/json");
    ASSERT_EQ(res->status, 200) << res->body;
    res = client_->Post("/sessions/" + sid + "/responses", to_json(r).dump(), "application/json");
    EXPECT_EQ(res->status, 409);
  }
  EXPECT_EQ(client_->Post("/sessions/" + sid + "/responses", "{not json", "application/json")->status, 400);
  EXPECT_EQ(client_->Get("/sessions/nope/next")->status, 404);
  EXPECT_EQ(client_->Get("/images/" + def.pairs[0].image_a_id)->status, 404);

  EXPECT_EQ(client_->Get("/studies/T1/export")->status, 401);
  EXPECT_EQ(client_->Get("/studies/T1/truths", {{"Authorization", "Bearer wrong"}})->status, 401);
  res = client_->Get("/studies/T1/export", admin());
  ASSERT_EQ(res->status, 200);
  EXPECT_EQ(responses_from_csv(res->body).size(), 3u);
  res = client_->Get("/studies/T1/truths", admin());
  ASSERT_EQ(res->status, 200);
  EXPECT_EQ(truths_from_csv(res->body).size(), 200u);
}

TEST(ServerAuth, NoTokenConfiguredDisablesAdmin) {
  TempDir dir;
  StudyStore store(dir.path());
  StudyServer server(store, study_manifest(), [](const std::string&) { return std::string(); }, "");
  const int port = server.bind_any("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  httplib::Client c("127.0.0.1", port);
  auto res = c.Post("/studies", {{"Authorization", "Bearer "}}, "{}", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 403);
  server.stop();
  t.join();
}
