#include <httplib.h>

#include <fmt/format.h>

#include "seqpi/error.hpp"
#include "seqpi/service.hpp"

namespace seqpi {
namespace {

using nlohmann::json;

int http_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::not_found: return 404;
    case ErrorKind::conflict:
    case ErrorKind::not_at_risk:
    case ErrorKind::irreversibility: return 409;
    case ErrorKind::positivity: return 422;
    case ErrorKind::convergence:
    case ErrorKind::separation: return 500;
    case ErrorKind::usage:
    case ErrorKind::data:
    case ErrorKind::mode: break;
  }
  return 400;
}

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& code,
                 const std::string& message) {
  reply(res, status, {{"code", code}, {"message", message}});
}

// Runs `f` and maps library errors onto status codes and {code, message}.
template <typename F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    reply_error(res, http_status(e.kind()), error_code(e.kind()), e.what());
  } catch (const json::exception& e) {
    reply_error(res, 400, "usage", std::string("malformed JSON: ") + e.what());
  } catch (const std::exception& e) {
    reply_error(res, 500, "internal", e.what());
  }
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  return json::parse(req.body);
}

std::vector<int> parse_ids(const std::string& text) {
  std::vector<int> ids;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (item.empty()) throw UsageError("estimands: empty id in '" + text + "'");
    std::size_t used = 0;
    int id = 0;
    try {
      id = std::stoi(item, &used);
    } catch (const std::exception&) {
      throw UsageError("estimands: '" + item + "' is not an integer");
    }
    if (used != item.size()) throw UsageError("estimands: '" + item + "' is not an integer");
    ids.push_back(id);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return ids;
}

}  // namespace

struct HttpServer::Impl {
  RiskService& service;
  httplib::Server server;

  explicit Impl(RiskService& s) : service(s) {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Headers", "Content-Type"},
                                {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"}});
    server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.status = 204;
    });
    server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { reply(res, 201, service.create_session(parse_body(req))); });
    });
    server.Get(R"(/sessions/([^/]+)/state)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 guarded(res, [&] { reply(res, 200, service.state(req.matches[1])); });
               });
    server.Get(R"(/sessions/([^/]+)/risks)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 guarded(res, [&] {
                   std::vector<int> ids{5, 6, 7};
                   if (req.has_param("estimands")) ids = parse_ids(req.get_param_value("estimands"));
                   std::optional<std::int64_t> n_mc;
                   if (req.has_param("n_mc")) {
                     const auto text = req.get_param_value("n_mc");
                     try {
                       std::size_t used = 0;
                       n_mc = std::stoll(text, &used);
                       if (used != text.size()) throw std::invalid_argument(text);
                     } catch (const std::exception&) {
                       throw UsageError("n_mc: '" + text + "' is not an integer");
                     }
                   }
                   const std::string method =
                       req.has_param("method") ? req.get_param_value("method") : "auto";
                   const std::string source =
                       req.has_param("source") ? req.get_param_value("source") : "oracle";
                   reply(res, 200, service.risks(req.matches[1], ids, n_mc, method, source));
                 });
               });
    server.Post(R"(/sessions/([^/]+)/decision)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  guarded(res, [&] {
                    reply(res, 200, service.decide(req.matches[1], parse_body(req)));
                  });
                });
    server.Delete(R"(/sessions/([^/]+))",
                  [this](const httplib::Request& req, httplib::Response& res) {
                    guarded(res, [&] {
                      service.remove(req.matches[1]);
                      res.status = 204;
                    });
                  });
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty()) {
        reply_error(res, res.status, res.status == 404 ? "not_found" : "error",
                    fmt::format("HTTP {}", res.status));
      }
    });
  }
};

HttpServer::HttpServer(RiskService& service) : impl_(std::make_unique<Impl>(service)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw UsageError(fmt::format("cannot bind {}:{}", host, port));
  thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void HttpServer::listen(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) {
    throw UsageError(fmt::format("cannot listen on {}:{}", host, port));
  }
}

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace seqpi
