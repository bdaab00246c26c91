#pragma once

#include <cstdlib>
#include <functional>
#include <string>

#include "httplib.h"
// <resolv.h> defines _res as a macro, which breaks Eigen headers included later.
#undef _res
#include "json.hpp"

#include "agex/core/error.hpp"
#include "agex/phantom/manifest.hpp"
#include "agex/study/schedule.hpp"
#include "agex/study/store.hpp"

namespace agex::study {

inline constexpr const char* kAdminTokenEnv = "AGEX_ADMIN_TOKEN";

inline std::string admin_token_from_env() {
  const char* t = std::getenv(kAdminTokenEnv);
  return t ? t : "";
}

// HTTP front end of a StudyStore. Participant routes (sessions, next,
// responses, images) are open; study creation and both exports need the
// admin bearer token, and are refused outright when no token is configured.
class StudyServer {
 public:
  using ImageLoader = std::function<std::string(const std::string& image_id)>;

  StudyServer(StudyStore& store, Manifest manifest, ImageLoader images, std::string admin_token)
      : store_(store), manifest_(std::move(manifest)), images_(std::move(images)), token_(std::move(admin_token)) {
    routes();
  }

  httplib::Server& http() { return http_; }

  bool listen(const std::string& host, int port) { return http_.listen(host, port); }
  int bind_any(const std::string& host) { return http_.bind_to_any_port(host); }
  bool listen_after_bind() { return http_.listen_after_bind(); }
  void stop() { http_.stop(); }

 private:
  static void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void send_error(httplib::Response& res, int status, const std::string& msg) {
    send_json(res, status, {{"error", msg}});
  }

  // Runs a handler, mapping library errors to HTTP statuses.
  template <typename F>
  static void guarded(httplib::Response& res, F&& f) {
    try {
      f();
    } catch (const NotFoundError& e) {
      send_error(res, 404, e.what());
    } catch (const ConflictError& e) {
      send_error(res, 409, e.what());
    } catch (const ValidationError& e) {
      send_error(res, 400, e.what());
    } catch (const ConfigError& e) {
      send_error(res, 422, e.what());
    } catch (const DomainError& e) {
      send_error(res, 400, e.what());
    } catch (const nlohmann::json::exception& e) {
      send_error(res, 400, std::string("malformed JSON: ") + e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  }

  bool authorized(const httplib::Request& req, httplib::Response& res) const {
    if (token_.empty()) {
      send_error(res, 403, std::string("admin endpoints are disabled; set ") + kAdminTokenEnv);
      return false;
    }
    if (req.get_header_value("Authorization") != "Bearer " + token_) {
      res.set_header("WWW-Authenticate", "Bearer");
      send_error(res, 401, "admin bearer token required");
      return false;
    }
    return true;
  }

  static nlohmann::json body_json(const httplib::Request& req) {
    if (req.body.empty()) return nlohmann::json::object();
    auto j = nlohmann::json::parse(req.body);
    if (!j.is_object()) throw ValidationError("request body must be a JSON object");
    return j;
  }

  void routes() {
    http_.Post("/studies", [this](const httplib::Request& req, httplib::Response& res) {
      if (!authorized(req, res)) return;
      guarded(res, [&] {
        const auto j = body_json(req);
        StudyOptions o;
        o.pairs_per_bucket = j.value("pairs_per_bucket", o.pairs_per_bucket);
        o.bucket_width_years = j.value("bucket_width_years", o.bucket_width_years);
        o.n_buckets = j.value("n_buckets", o.n_buckets);
        o.seed = j.value("seed", o.seed);
        o.study_id = j.value("study_id", std::string());
        const StudyDefinition def = store_.create_study(create_study(manifest_, o));
        send_json(res, 201,
                  {{"study_id", def.study_id},
                   {"n_pairs", def.pairs.size()},
                   {"pairs_per_bucket", def.pairs_per_bucket},
                   {"n_buckets", def.n_buckets},
                   {"bucket_width_years", def.bucket_width_years}});
      });
    });

    http_.Post(R"(/studies/([^/]+)/sessions)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto j = body_json(req);
        if (!j.contains("participant_id") || !j["participant_id"].is_string()) {
          throw ValidationError("participant_id (string) is required");
        }
        std::optional<std::uint64_t> seed;
        if (j.contains("seed")) seed = j["seed"].get<std::uint64_t>();
        const Session s = store_.start_session(req.matches[1], j["participant_id"].get<std::string>(), seed);
        send_json(res, 201,
                  {{"session_id", s.session_id},
                   {"study_id", s.study_id},
                   {"participant_id", s.participant_id},
                   {"total", s.order.size()}});
      });
    });

    http_.Get(R"(/sessions/([^/]+)/next)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send_json(res, 200, store_.next_pair(req.matches[1])); });
    });

    http_.Post(R"(/sessions/([^/]+)/responses)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        nlohmann::json j;
        try {
          j = nlohmann::json::parse(req.body);
        } catch (const nlohmann::json::exception& e) {
          throw ValidationError(std::string("malformed JSON: ") + e.what());
        }
        send_json(res, 200, store_.submit(req.matches[1], response_from_json(j)));
      });
    });

    http_.Get(R"(/studies/([^/]+)/export)", [this](const httplib::Request& req, httplib::Response& res) {
      if (!authorized(req, res)) return;
      guarded(res, [&] {
        res.status = 200;
        res.set_content(responses_to_csv(store_.export_responses(req.matches[1])), "text/csv");
      });
    });

    http_.Get(R"(/studies/([^/]+)/truths)", [this](const httplib::Request& req, httplib::Response& res) {
      if (!authorized(req, res)) return;
      guarded(res, [&] {
        res.status = 200;
        res.set_content(store_.export_truths_csv(req.matches[1]), "text/csv");
      });
    });

    http_.Get(R"(/images/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const std::string id = store_.resolve_image(req.matches[1]);
        res.status = 200;
        res.set_header("Cache-Control", "private, max-age=3600");
        res.set_content(images_(id), "image/png");
      });
    });
  }

  StudyStore& store_;
  Manifest manifest_;
  ImageLoader images_;
  std::string token_;
  httplib::Server http_;
};

}  // namespace agex::study
