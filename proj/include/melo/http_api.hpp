#pragma once

// HTTP+JSON front end over a directory of CourseStores.
//
//   POST /courses                                  {"id","concepts":[...],"config":{...}}
//   POST /courses/{c}/students                     {"id"}
//   POST /courses/{c}/items                        {"id","concepts":[...],"options"?,"answer_key"?}
//   POST /courses/{c}/answers                      {"student","item","correct","idempotency_key"?}
//   GET  /courses/{c}/students/{s}/model
//   GET  /courses/{c}/students/{s}/recommendations?k=&target=
//   GET  /courses/{c}/overview
//   GET  /courses/{c}/items/{i}/stats
//
// Errors are problem documents: {"type","title","status","code","detail"} with
// code one of not_found, invalid_request, conflict, unauthorized, internal.

#include <httplib.h>

#include <cctype>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "melo/course_store.hpp"
#include "melo/text.hpp"

namespace melo::service {

class Service {
 public:
  explicit Service(std::filesystem::path data_dir, StoreOptions opts = {})
      : root_(std::move(data_dir)), opts_(std::move(opts)) {
    std::filesystem::create_directories(root_);
    for (const auto& entry : std::filesystem::directory_iterator(root_)) {
      if (!entry.is_directory() || !std::filesystem::exists(entry.path() / CourseStore::kEvents)) continue;
      auto store = CourseStore::open(entry.path(), opts_);
      courses_.emplace(store->course_id(), std::move(store));
    }
  }

  CourseStore& create_course(const std::string& id, const std::vector<std::string>& concepts, const EngineConfig& cfg) {
    if (!valid_id(id)) throw InvalidRequest("course id must be 1-128 characters of [A-Za-z0-9_.-]");
    std::lock_guard lock(mu_);
    if (courses_.count(id)) throw Conflict("course already exists: " + id);
    auto store = CourseStore::create(root_ / id, id, concepts, cfg, opts_);
    return *courses_.emplace(id, std::move(store)).first->second;
  }

  CourseStore& course(const std::string& id) {
    std::lock_guard lock(mu_);
    auto it = courses_.find(id);
    if (it == courses_.end()) throw NotFound("unknown course: " + id);
    return *it->second;
  }

  [[nodiscard]] const std::filesystem::path& root() const { return root_; }

  static bool valid_id(std::string_view id) {
    if (id.empty() || id.size() > 128 || id == "." || id == "..") return false;
    return std::all_of(id.begin(), id.end(),
                       [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.'; });
  }

 private:
  std::filesystem::path root_;
  StoreOptions opts_;
  std::mutex mu_;
  std::map<std::string, std::unique_ptr<CourseStore>> courses_;
};

namespace detail {

inline void problem(httplib::Response& res, int status, std::string_view code, std::string_view detail) {
  const char* title = status == 404 ? "Not Found"
                      : status == 409 ? "Conflict"
                      : status == 401 ? "Unauthorized"
                      : status == 400 ? "Bad Request"
                                      : "Internal Server Error";
  json body{{"type", "about:blank"}, {"title", title}, {"status", status}, {"code", code}, {"detail", detail}};
  res.status = status;
  res.set_content(body.dump(), "application/problem+json");
}

template <typename F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const NotFound& e) {
    problem(res, 404, "not_found", e.what());
  } catch (const Conflict& e) {
    problem(res, 409, "conflict", e.what());
  } catch (const InvalidRequest& e) {
    problem(res, 400, "invalid_request", e.what());
  } catch (const ConfigError& e) {
    problem(res, 400, "invalid_request", e.what());
  } catch (const nlohmann::json::exception& e) {
    problem(res, 400, "invalid_request", std::string("malformed JSON body: ") + e.what());
  } catch (const std::exception& e) {
    problem(res, 500, "internal", e.what());
  }
}

inline json body_of(const httplib::Request& req) {
  auto j = json::parse(req.body);
  if (!j.is_object()) throw InvalidRequest("request body must be a JSON object");
  return j;
}

inline std::string required_string(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_string()) throw InvalidRequest(std::string("'") + key + "' must be a string");
  return j.at(key).get<std::string>();
}

inline std::vector<std::string> string_list(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array()) throw InvalidRequest(std::string("'") + key + "' must be an array");
  std::vector<std::string> out;
  for (const auto& v : j.at(key)) {
    if (!v.is_string()) throw InvalidRequest(std::string("'") + key + "' must contain strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

inline void send(httplib::Response& res, const json& j, int status = 200) {
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

}  // namespace detail

// Registers every route on `server`. A non-empty token requires
// "Authorization: Bearer <token>" on each request.
inline void mount(httplib::Server& server, Service& svc, std::string token = {}) {
  using namespace detail;
  if (!token.empty()) {
    server.set_pre_routing_handler([token](const httplib::Request& req, httplib::Response& res) {
      if (req.get_header_value("Authorization") == "Bearer " + token) return httplib::Server::HandlerResponse::Unhandled;
      problem(res, 401, "unauthorized", "missing or invalid API token");
      return httplib::Server::HandlerResponse::Handled;
    });
  }

  server.Post("/courses", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto b = body_of(req);
      const auto cfg = b.contains("config") ? codec::config_from_json(b.at("config")) : EngineConfig{};
      auto& store = svc.create_course(required_string(b, "id"), string_list(b, "concepts"), cfg);
      send(res, {{"course", store.course_id()}, {"seq", store.watermark()}}, 201);
    });
  });

  server.Post(R"(/courses/([^/]+)/students)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto b = body_of(req);
      send(res, svc.course(req.matches[1]).add_student(required_string(b, "id")), 201);
    });
  });

  server.Post(R"(/courses/([^/]+)/items)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto b = body_of(req);
      std::optional<int> options;
      if (b.contains("options") && !b.at("options").is_null()) {
        if (!b.at("options").is_number_integer()) throw InvalidRequest("'options' must be an integer");
        options = b.at("options").get<int>();
      }
      std::optional<std::string> key;
      if (b.contains("answer_key") && !b.at("answer_key").is_null()) key = b.at("answer_key").is_string() ? b.at("answer_key").get<std::string>() : b.at("answer_key").dump();
      send(res,
           svc.course(req.matches[1]).add_item(required_string(b, "id"), string_list(b, "concepts"), options, key),
           201);
    });
  });

  server.Post(R"(/courses/([^/]+)/answers)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto b = body_of(req);
      if (!b.contains("correct") || !b.at("correct").is_boolean()) {
        if (!(b.contains("correct") && b.at("correct").is_number_integer() &&
              (b.at("correct") == 0 || b.at("correct") == 1)))
          throw InvalidRequest("'correct' must be a boolean or 0/1");
      }
      const bool correct = b.at("correct").is_boolean() ? b.at("correct").get<bool>() : b.at("correct") == 1;
      std::optional<std::string> key;
      if (b.contains("idempotency_key") && !b.at("idempotency_key").is_null())
        key = required_string(b, "idempotency_key");
      send(res, svc.course(req.matches[1])
                    .submit_answer(required_string(b, "student"), required_string(b, "item"), correct, key));
    });
  });

  server.Get(R"(/courses/([^/]+)/students/([^/]+)/model)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send(res, svc.course(req.matches[1]).learner_model(req.matches[2])); });
  });

  server.Get(R"(/courses/([^/]+)/students/([^/]+)/recommendations)",
             [&svc](const httplib::Request& req, httplib::Response& res) {
               guarded(res, [&] {
                 std::uint32_t k = 5;
                 if (req.has_param("k")) {
                   auto v = text::parse_number<std::uint32_t>(req.get_param_value("k"));
                   if (!v || *v < 1) throw InvalidRequest("k must be a positive integer");
                   k = *v;
                 }
                 std::optional<double> target;
                 if (req.has_param("target")) {
                   auto v = text::parse_number<double>(req.get_param_value("target"));
                   if (!v) throw InvalidRequest("target must be a number");
                   target = *v;
                 }
                 send(res, svc.course(req.matches[1]).recommendations(req.matches[2], k, target));
               });
             });

  server.Get(R"(/courses/([^/]+)/overview)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send(res, svc.course(req.matches[1]).class_overview()); });
  });

  server.Get(R"(/courses/([^/]+)/items/([^/]+)/stats)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send(res, svc.course(req.matches[1]).item_stats(req.matches[2])); });
  });

  server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) problem(res, res.status, res.status == 404 ? "not_found" : "invalid_request", "no such route");
  });
}

}  // namespace melo::service
