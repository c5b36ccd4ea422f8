#include "forge/annotation.hpp"
#include "forge/error.hpp"
#include "httplib.h"
#include "json_util.hpp"

namespace forge {

struct AnnotationServer::Impl {
  std::shared_ptr<AnnotationStore> store;
  AnnotationServerOptions options;
  httplib::Server server;
};

namespace {

int status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUnknownTask: return 404;
    case ErrorKind::kDuplicateSubmission: return 409;
    case ErrorKind::kIncompleteChoices:
    case ErrorKind::kInvalidArgument:
    case ErrorKind::kProtocol: return 400;
    default: return 500;
  }
}

void reply_error(httplib::Response& res, int status, std::string_view kind, const std::string& msg) {
  Json j;
  j["error"] = std::string(kind);
  j["message"] = msg;
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

}  // namespace

AnnotationServer::AnnotationServer(std::shared_ptr<AnnotationStore> store,
                                   AnnotationServerOptions options)
    : impl_(std::make_unique<Impl>()) {
  impl_->store = std::move(store);
  impl_->options = std::move(options);
  auto& srv = impl_->server;
  Impl* impl = impl_.get();

  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Headers", "Content-Type, Authorization"},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  srv.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  srv.set_pre_routing_handler([impl](const httplib::Request& req, httplib::Response& res) {
    if (impl->options.bearer_token.empty() || req.method == "OPTIONS") {
      return httplib::Server::HandlerResponse::Unhandled;
    }
    if (req.get_header_value("Authorization") != "Bearer " + impl->options.bearer_token) {
      reply_error(res, 401, "Unauthorized", "missing or wrong bearer token");
      return httplib::Server::HandlerResponse::Handled;
    }
    return httplib::Server::HandlerResponse::Unhandled;
  });

  srv.Get("/api/tasks/next", [impl](const httplib::Request& req, httplib::Response& res) {
    const std::string annotator = req.get_param_value("annotator");
    if (annotator.empty()) {
      reply_error(res, 400, "InvalidArgument", "annotator query parameter is required");
      return;
    }
    const auto task = impl->store->next_task(annotator);
    if (!task) {
      res.status = 204;
      return;
    }
    res.set_content(task->blinded_json(), "application/json");
  });

  srv.Post(R"(/api/tasks/([^/]+)/annotations)",
           [impl](const httplib::Request& req, httplib::Response& res) {
             try {
               AnnotationRecord record = AnnotationRecord::from_json_line(req.body);
               record.task_id = req.matches[1];
               record.timestamp.clear();
               impl->store->submit(record);
               Json ack;
               ack["ok"] = true;
               ack["task_id"] = record.task_id;
               ack["annotator"] = record.annotator_id;
               res.set_content(ack.dump(), "application/json");
             } catch (const Error& e) {
               reply_error(res, status_for(e.kind()), to_string(e.kind()), e.what());
             }
           });

  srv.Get("/api/report", [impl](const httplib::Request&, httplib::Response& res) {
    res.set_content(impl->store->report().to_json(), "application/json");
  });
}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::start(const std::string& host, int port) {
  host_ = host;
  port_ = port == 0 ? impl_->server.bind_to_any_port(host)
                    : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (port_ <= 0) throw Error(ErrorKind::kIo, "annotation server cannot bind " + host);
  thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port_;
}

void AnnotationServer::listen_blocking(const std::string& host, int port) {
  host_ = host;
  port_ = port;
  if (!impl_->server.listen(host, port)) {
    throw Error(ErrorKind::kIo, "annotation server cannot listen on " + host + ":" + std::to_string(port));
  }
}

void AnnotationServer::stop() {
  if (impl_) impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

std::string AnnotationServer::url() const { return "http://" + host_ + ":" + std::to_string(port_); }

}  // namespace forge
