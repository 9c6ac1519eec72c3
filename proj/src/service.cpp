#include "qtag/service.hpp"

#include <httplib.h>
#include <json.hpp>

#include "qtag/train.hpp"

namespace qtag {

using nlohmann::json;

namespace {

std::string error_body(const std::string& message) { return json{{"error", message}}.dump(); }

}  // namespace

std::string TagResponse::to_json() const {
  json labels_json = json::array();
  for (Label l : labels) labels_json.push_back(std::string(to_string(l)));
  return json{{"query", query},
              {"tokens", tokens},
              {"labels", labels_json},
              {"brand", brand},
              {"product", product}}
      .dump();
}

TagResponse tag_query(const Model& model, const std::string& raw, const ServiceConfig& cfg) {
  TagResponse r;
  r.query = raw;
  r.tokens = normalize_query(raw, cfg.normalization);
  if (cfg.max_tokens > 0 && r.tokens.size() > cfg.max_tokens) r.tokens.resize(cfg.max_tokens);
  r.labels = predict(model, r.tokens).labels;
  for (const auto& span : bio_decode(r.labels))
    (span.type == EntityType::Brd ? r.brand : r.product).push_back(surface(r.tokens, span));
  return r;
}

TagService::TagService(Model model, ServiceConfig cfg) : model_(std::move(model)), cfg_(std::move(cfg)) {}

HttpReply TagService::handle_tag(const std::string& body) const {
  json req;
  try {
    req = json::parse(body);
  } catch (const json::parse_error&) {
    return {400, error_body("malformed JSON body")};
  }
  if (!req.is_object() || !req.contains("query")) return {400, error_body("missing field: query")};
  if (!req["query"].is_string()) return {400, error_body("query must be a string")};
  try {
    return {200, tag_query(model_, req["query"].get<std::string>(), cfg_).to_json()};
  } catch (const EmptyQueryError&) {
    return {400, error_body("empty query")};
  } catch (const std::exception& e) {
    return {500, error_body(std::string("internal error: ") + e.what())};
  }
}

HttpReply TagService::handle_health() const {
  return {200, json{{"status", "ok"},
                    {"version", kServiceVersion},
                    {"model_format_version", 1},
                    {"catalog_fingerprint", model_.catalog_fingerprint}}
                   .dump()};
}

struct TagServer::Impl {
  httplib::Server server;
};

TagServer::TagServer(const TagService& service) : impl_(std::make_unique<Impl>()) {
  auto send = [](httplib::Response& res, const HttpReply& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  impl_->server.Post("/tag", [&service, send](const httplib::Request& req, httplib::Response& res) {
    send(res, service.handle_tag(req.body));
  });
  impl_->server.Get("/health", [&service, send](const httplib::Request&, httplib::Response& res) {
    send(res, service.handle_health());
  });
  impl_->server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) res.set_content(error_body("HTTP " + std::to_string(res.status)), "application/json");
  });
}

TagServer::~TagServer() { stop(); }

int TagServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void TagServer::run() { impl_->server.listen_after_bind(); }

void TagServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace qtag
