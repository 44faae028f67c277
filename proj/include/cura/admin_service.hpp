#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cura/feed.hpp"

namespace cura {

/// Optional member fields that come from an imported file, never computed.
struct MemberExtras {
  std::optional<std::int64_t> link_karma;
  std::optional<std::int64_t> comment_karma;
  std::optional<bool> is_moderator;
  std::optional<bool> is_employee;
  std::optional<bool> has_gold;
};

/// Reads `user_id,link_karma,comment_karma,is_moderator,is_employee,has_gold`;
/// empty cells stay null.
std::map<std::string, MemberExtras> read_member_extras(const std::filesystem::path& path);

struct ServiceConfig {
  std::string listen_host = "127.0.0.1";
  int port = 8080;
  std::string admin_token;
  std::filesystem::path data_dir = "cura-data";
  std::filesystem::path checkpoint;  ///< trained model used when data_dir has none
  std::filesystem::path votes;       ///< optional historical votes imported at startup
  std::filesystem::path posts;       ///< optional historical posts imported at startup
  std::filesystem::path member_extras;
  bool finetune_on_vote = true;
  /// Named curator groups per community, served by the recommendation stub.
  std::map<std::string, std::map<std::string, std::vector<std::string>>> recommended_groups;
};

/// Parses a JSON config file, then applies CURA_* environment overrides
/// (CURA_LISTEN_HOST, CURA_PORT, CURA_ADMIN_TOKEN, CURA_DATA_DIR,
/// CURA_CHECKPOINT, CURA_VOTES, CURA_POSTS, CURA_MEMBER_EXTRAS).
ServiceConfig load_service_config(const std::optional<std::filesystem::path>& path);
ServiceConfig service_config_from_json(const nlohmann::json& j);
void apply_env_overrides(ServiceConfig& config);

struct HttpRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
  std::string authorization;  ///< raw Authorization header
};

struct HttpResponse {
  int status = 200;
  nlohmann::json body;
};

/// Transport-independent handler for the `/v1` admin API. Every route except
/// `GET /v1/health` requires `Authorization: Bearer <admin token>`.
class AdminService {
 public:
  AdminService(std::shared_ptr<FeedEngine> engine, std::string admin_token,
               std::map<std::string, MemberExtras> extras = {},
               std::map<std::string, std::map<std::string, std::vector<std::string>>> recommended = {});

  HttpResponse handle(const HttpRequest& request) const;

  FeedEngine& engine() const { return *engine_; }

 private:
  HttpResponse route(const HttpRequest& request) const;
  HttpResponse list_members(const std::string& community, const HttpRequest& request) const;
  HttpResponse set_curators(const std::string& community, const nlohmann::json& body) const;
  HttpResponse set_thresholds(const std::string& community, const nlohmann::json& body) const;
  HttpResponse preview(const std::string& community, const nlohmann::json& body) const;
  HttpResponse feed(const std::string& community, const HttpRequest& request) const;
  HttpResponse submit_vote(const std::string& post_id, const nlohmann::json& body) const;
  HttpResponse submit_post(const nlohmann::json& body) const;
  HttpResponse recommended(const std::string& community) const;
  bool community_exists(const std::string& community) const;

  std::shared_ptr<FeedEngine> engine_;
  std::string token_;
  std::map<std::string, MemberExtras> extras_;
  std::map<std::string, std::map<std::string, std::vector<std::string>>> recommended_;
};

/// Builds the engine from a service config: reopens `data_dir`, falling back to
/// the configured checkpoint, then imports historical votes and posts.
std::shared_ptr<FeedEngine> open_engine(const ServiceConfig& config);

/// HTTP binding for an AdminService.
class HttpServer {
 public:
  explicit HttpServer(const AdminService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds the socket; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Accepts connections until stop() is called from another thread.
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Serves `service` over HTTP until the process is stopped. Blocks.
void serve_http(const AdminService& service, const std::string& host, int port);

}  // namespace cura
