#pragma once

#include <memory>
#include <string>
#include <vector>

#include "qtag/net.hpp"
#include "qtag/preprocess.hpp"

namespace qtag {

inline constexpr const char* kServiceVersion = "qtag/1.0";

struct TagResponse {
  std::string query;
  Tokens tokens;
  Labels labels;
  std::vector<std::string> brand;
  std::vector<std::string> product;

  std::string to_json() const;
  friend bool operator==(const TagResponse&, const TagResponse&) = default;
};

struct ServiceConfig {
  std::size_t max_tokens = 32;  // longer queries are truncated
  NormalizationConfig normalization;
};

// Normalizes, truncates to the token cap and tags. Throws EmptyQueryError.
TagResponse tag_query(const Model& model, const std::string& raw, const ServiceConfig& cfg = {});

struct HttpReply {
  int status = 200;
  std::string body;  // JSON
};

// Request handling independent of the transport. Holds the model immutably;
// safe to call from many threads.
class TagService {
 public:
  TagService(Model model, ServiceConfig cfg = {});

  HttpReply handle_tag(const std::string& body) const;
  HttpReply handle_health() const;
  const Model& model() const { return model_; }

 private:
  const Model model_;
  const ServiceConfig cfg_;
};

// HTTP front end: POST /tag, GET /health.
class TagServer {
 public:
  explicit TagServer(const TagService& service);
  ~TagServer();
  TagServer(const TagServer&) = delete;
  TagServer& operator=(const TagServer&) = delete;

  // Binds; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace qtag
