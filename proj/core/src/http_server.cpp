#include <httplib.h>

#include "align/error.hpp"
#include "align/service.hpp"

namespace align::service {

struct HttpServer::Impl {
  StudyService& service;
  httplib::Server server;

  explicit Impl(StudyService& s) : service(s) {}
};

namespace {

void send(httplib::Response& res, const Reply& reply) {
  res.status = reply.status;
  if (reply.status != 204) res.set_content(reply.body.dump(), "application/json");
}

void bad_request(httplib::Response& res, const std::string& message) {
  send(res, Reply{400, json{{"error", "BadRequest"}, {"message", message}}});
}

}  // namespace

HttpServer::HttpServer(StudyService& service, std::optional<std::filesystem::path> media_dir,
                       std::optional<std::filesystem::path> public_dir)
    : impl_(std::make_unique<Impl>(service)) {
  auto& srv = impl_->server;
  StudyService& svc = service;

  srv.Post("/api/session", [&svc](const httplib::Request& req, httplib::Response& res) {
    const json body = json::parse(req.body, nullptr, false);
    if (!body.is_object() || !body.contains("annotator_id") || !body["annotator_id"].is_string()) {
      return bad_request(res, "body must be {\"annotator_id\": string}");
    }
    send(res, svc.open_session(body["annotator_id"].get<std::string>()));
  });

  srv.Get("/api/trial/next", [&svc](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_param("annotator_id")) return bad_request(res, "annotator_id query parameter is required");
    send(res, svc.next_trial(req.get_param_value("annotator_id")));
  });

  srv.Post("/api/response", [&svc](const httplib::Request& req, httplib::Response& res) {
    const json body = json::parse(req.body, nullptr, false);
    if (!body.is_object()) return bad_request(res, "body must be a JSON object");
    SubmitRequest r;
    try {
      r.annotator_id = body.at("annotator_id").get<std::string>();
      r.trial_id = body.at("trial_id").get<std::string>();
      r.choice_index = body.at("choice_index").get<int>();
      r.idempotency_key = body.at("idempotency_key").get<std::string>();
      if (body.contains("rt_ms") && !body["rt_ms"].is_null()) r.rt_ms = body["rt_ms"].get<std::int64_t>();
    } catch (const json::exception& e) {
      return bad_request(res, e.what());
    }
    send(res, svc.submit(r));
  });

  srv.Get("/api/export", [&svc](const httplib::Request& req, httplib::Response& res) {
    if (req.has_param("format") && req.get_param_value("format") == "jsonl") {
      res.set_content(svc.export_jsonl(), "application/x-ndjson");
      return;
    }
    send(res, svc.export_report());
  });

  // Small JSON replies on keep-alive connections otherwise stall on
  // Nagle + delayed ACK (~40 ms per request).
  srv.set_tcp_nodelay(true);

  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string message = "internal error";
    std::string kind = "Internal";
    try {
      std::rethrow_exception(ep);
    } catch (const Error& e) {
      message = e.what();
      kind = std::string(to_string(e.kind()));
    } catch (const std::exception& e) {
      message = e.what();
    }
    send(res, Reply{500, json{{"error", kind}, {"message", message}}});
  });

  if (media_dir && std::filesystem::is_directory(*media_dir)) {
    srv.set_mount_point("/media", media_dir->string());
  }
  if (public_dir && std::filesystem::is_directory(*public_dir)) {
    srv.set_mount_point("/", public_dir->string());
  }
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw IoError("cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw IoError("cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace align::service
