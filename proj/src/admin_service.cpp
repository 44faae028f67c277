#include "cura/admin_service.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <random>
#include <set>

#include "cura/csv.hpp"
#include "cura/json_io.hpp"
#include "cura/log.hpp"

namespace cura {

using nlohmann::json;

namespace {

constexpr std::size_t kDefaultPage = 50;
constexpr std::size_t kMaxPage = 1000;

HttpResponse error(int status, const std::string& code, const std::string& message, json extra = json::object()) {
  json e{{"code", code}, {"message", message}};
  for (auto& [k, v] : extra.items()) e[k] = v;
  return {status, json{{"error", e}}};
}

std::optional<std::int64_t> opt_int(const std::string& s, const std::string& what) {
  if (s.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const auto v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("bad " + what + " '" + s + "'");
  }
}

std::optional<bool> opt_bool(const std::string& s, const std::string& what) {
  if (s.empty()) return std::nullopt;
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument("bad " + what + " '" + s + "'");
}

template <typename T>
json nullable(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

std::size_t query_size(const HttpRequest& r, const std::string& key, std::size_t fallback, std::size_t max) {
  auto it = r.query.find(key);
  if (it == r.query.end() || it->second.empty()) return fallback;
  const auto v = opt_int(it->second, key);
  if (!v || *v < 0) throw ValidationError(key + " must be a non-negative integer");
  if (static_cast<std::size_t>(*v) > max) throw ValidationError(key + " must be at most " + std::to_string(max));
  return static_cast<std::size_t>(*v);
}

double threshold(const json& body, const char* key, double fallback) {
  if (!body.contains(key)) return fallback;
  if (!body.at(key).is_number()) throw ValidationError(std::string(key) + " must be a number");
  const double v = body.at(key).get<double>();
  if (!(v >= 0.0 && v <= 1.0)) throw ValidationError(std::string(key) + " must lie in [0, 1]");
  return v;
}

std::vector<std::string> curator_list(const json& body) {
  if (!body.contains("curators") || !body.at("curators").is_array())
    throw ValidationError("curators must be an array of user ids");
  std::vector<std::string> out;
  for (const auto& c : body.at("curators")) {
    if (!c.is_string() || c.get<std::string>().empty()) throw ValidationError("curator ids must be non-empty strings");
    out.push_back(c.get<std::string>());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (out.empty()) throw ValidationError("curator set is empty");
  return out;
}

json ranked_statuses(std::vector<PostStatus> statuses, const FeedEngine& engine) {
  std::vector<std::pair<PostStatus, Timestamp>> rows;
  for (auto& s : statuses) {
    const auto created = engine.post(s.post_id)->created_at;
    rows.emplace_back(std::move(s), created);
  }
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (a.first.curator_upvote_rate != b.first.curator_upvote_rate)
      return a.first.curator_upvote_rate > b.first.curator_upvote_rate;
    if (a.second != b.second) return a.second > b.second;
    return a.first.post_id < b.first.post_id;
  });
  json out = json::array();
  for (const auto& [s, created] : rows)
    out.push_back({{"post_id", s.post_id},
                   {"curator_upvote_rate", s.curator_upvote_rate},
                   {"stage", to_string(s.stage)},
                   {"created_at", format_iso8601(created)},
                   {"breakdown", s.breakdown}});
  return out;
}

/// Splits "/v1/a/b" into {"v1", "a", "b"}, percent-decoding each segment.
std::vector<std::string> segments(const std::string& path) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(cur);
    cur.clear();
  };
  for (std::size_t i = 0; i < path.size(); ++i) {
    const char c = path[i];
    if (c == '/') {
      flush();
    } else if (c == '%' && i + 2 < path.size() && std::isxdigit(static_cast<unsigned char>(path[i + 1])) &&
               std::isxdigit(static_cast<unsigned char>(path[i + 2]))) {
      cur.push_back(static_cast<char>(std::stoi(path.substr(i + 1, 2), nullptr, 16)));
      i += 2;
    } else {
      cur.push_back(c);
    }
  }
  flush();
  return out;
}

}  // namespace

std::map<std::string, MemberExtras> read_member_extras(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  csv::Reader reader(in);
  std::vector<std::string> row;
  if (!reader.next(row) ||
      row != std::vector<std::string>{"user_id", "link_karma", "comment_karma", "is_moderator", "is_employee", "has_gold"})
    throw ParseError("member extras header must be user_id,link_karma,comment_karma,is_moderator,is_employee,has_gold",
                     1);
  std::map<std::string, MemberExtras> out;
  while (reader.next(row)) {
    if (row.size() != 6) throw ParseError("expected 6 columns", reader.line());
    try {
      out[row[0]] = {opt_int(row[1], "link_karma"), opt_int(row[2], "comment_karma"), opt_bool(row[3], "is_moderator"),
                     opt_bool(row[4], "is_employee"), opt_bool(row[5], "has_gold")};
    } catch (const std::invalid_argument& e) {
      throw ParseError(e.what(), reader.line());
    }
  }
  return out;
}

ServiceConfig service_config_from_json(const json& j) {
  ServiceConfig c;
  c.listen_host = j.value("listen_host", c.listen_host);
  c.port = j.value("port", c.port);
  c.admin_token = j.value("admin_token", c.admin_token);
  c.data_dir = j.value("data_dir", c.data_dir.string());
  c.checkpoint = j.value("checkpoint", std::string{});
  c.votes = j.value("votes", std::string{});
  c.posts = j.value("posts", std::string{});
  c.member_extras = j.value("member_extras", std::string{});
  c.finetune_on_vote = j.value("finetune_on_vote", true);
  if (j.contains("recommended_groups"))
    c.recommended_groups = j.at("recommended_groups").get<decltype(c.recommended_groups)>();
  return c;
}

void apply_env_overrides(ServiceConfig& c) {
  auto env = [](const char* name) -> std::optional<std::string> {
    const char* v = std::getenv(name);
    if (!v) return std::nullopt;
    return std::string(v);
  };
  if (auto v = env("CURA_LISTEN_HOST")) c.listen_host = *v;
  if (auto v = env("CURA_PORT")) c.port = std::stoi(*v);
  if (auto v = env("CURA_ADMIN_TOKEN")) c.admin_token = *v;
  if (auto v = env("CURA_DATA_DIR")) c.data_dir = *v;
  if (auto v = env("CURA_CHECKPOINT")) c.checkpoint = *v;
  if (auto v = env("CURA_VOTES")) c.votes = *v;
  if (auto v = env("CURA_POSTS")) c.posts = *v;
  if (auto v = env("CURA_MEMBER_EXTRAS")) c.member_extras = *v;
}

ServiceConfig load_service_config(const std::optional<std::filesystem::path>& path) {
  ServiceConfig c;
  if (path) {
    std::ifstream in(*path);
    if (!in) throw std::runtime_error("cannot open service config " + path->string());
    c = service_config_from_json(json::parse(in));
  }
  apply_env_overrides(c);
  return c;
}

std::shared_ptr<FeedEngine> open_engine(const ServiceConfig& config) {
  std::shared_ptr<const CurationModel> fallback;
  if (!config.checkpoint.empty()) fallback = std::make_shared<const CurationModel>(CurationModel::load(config.checkpoint));
  if (!fallback && !std::filesystem::exists(config.data_dir / "model.ckpt"))
    throw std::runtime_error("no checkpoint: set `checkpoint` or provide a data_dir with model.ckpt");
  FeedEngine::Options opt;
  opt.finetune_on_vote = config.finetune_on_vote;
  std::shared_ptr<FeedEngine> engine = FeedEngine::open(config.data_dir, fallback, opt);
  if (!config.votes.empty() || !config.posts.empty()) {
    if (config.votes.empty() || config.posts.empty()) throw std::runtime_error("votes and posts must be given together");
    const auto corpus = load_corpus(config.votes, config.posts);
    if (!corpus.orphans.empty()) log::warn(std::to_string(corpus.orphans.size()) + " imported votes have no post");
    engine->import_history(corpus.posts, corpus.votes);
  }
  return engine;
}

AdminService::AdminService(std::shared_ptr<FeedEngine> engine, std::string admin_token,
                           std::map<std::string, MemberExtras> extras,
                           std::map<std::string, std::map<std::string, std::vector<std::string>>> recommended)
    : engine_(std::move(engine)),
      token_(std::move(admin_token)),
      extras_(std::move(extras)),
      recommended_(std::move(recommended)) {
  if (!engine_) throw std::invalid_argument("admin service needs an engine");
}

HttpResponse AdminService::handle(const HttpRequest& request) const {
  try {
    return route(request);
  } catch (const json::exception& e) {
    return error(400, "invalid_json", e.what());
  } catch (const ValidationError& e) {
    return error(400, "validation_error", e.what());
  } catch (const ParseError& e) {
    return error(400, "validation_error", e.what());
  } catch (const NotFoundError& e) {
    return error(404, "not_found", e.what());
  } catch (const std::invalid_argument& e) {
    return error(400, "validation_error", e.what());
  } catch (const std::exception& e) {
    log::error(std::string("request failed: ") + e.what());
    return error(500, "internal_error", e.what());
  }
}

HttpResponse AdminService::route(const HttpRequest& r) const {
  const auto seg = segments(r.path);
  if (seg.empty() || seg[0] != "v1") return error(404, "not_found", "unknown path " + r.path);
  if (seg.size() == 2 && seg[1] == "health") {
    if (r.method != "GET") return error(405, "method_not_allowed", "use GET");
    const auto model = engine_->model();
    return {200, {{"status", "ok"}, {"model_fingerprint", model->fingerprint()}, {"model_step", model->step()}}};
  }
  if (token_.empty() || r.authorization != "Bearer " + token_)
    return error(401, "unauthorized", "missing or invalid admin token");

  auto body = [&] { return r.body.empty() ? json::object() : json::parse(r.body); };
  auto expect = [&](const char* method) { return r.method == method; };
  const auto not_allowed = error(405, "method_not_allowed", r.method + " not supported on " + r.path);

  if (seg.size() == 2 && seg[1] == "communities") {
    if (!expect("GET")) return not_allowed;
    json list = json::array();
    for (const auto& c : engine_->communities()) {
      const auto cfg = engine_->config(c);
      list.push_back({{"community", c}, {"configured", cfg.has_value()}, {"posts", engine_->posts(c).size()}});
    }
    return {200, {{"communities", list}}};
  }
  if (seg.size() == 4 && seg[1] == "communities") {
    const auto& c = seg[2];
    const auto& what = seg[3];
    if (what == "members") return expect("GET") ? list_members(c, r) : not_allowed;
    if (what == "curators") return expect("PUT") ? set_curators(c, body()) : not_allowed;
    if (what == "thresholds") return expect("PUT") ? set_thresholds(c, body()) : not_allowed;
    if (what == "preview") return expect("POST") ? preview(c, body()) : not_allowed;
    if (what == "feed") return expect("GET") ? feed(c, r) : not_allowed;
    if (what == "recommended-curators") return expect("GET") ? recommended(c) : not_allowed;
    if (what == "config") {
      if (!expect("GET")) return not_allowed;
      const auto cfg = engine_->config(c);
      if (!cfg) return error(404, "not_found", "community '" + c + "' is not configured");
      return {200, json(*cfg)};
    }
  }
  if (seg.size() == 2 && seg[1] == "posts") return expect("POST") ? submit_post(body()) : not_allowed;
  if (seg.size() == 4 && seg[1] == "posts") {
    if (seg[3] == "votes") return expect("POST") ? submit_vote(seg[2], body()) : not_allowed;
    if (seg[3] == "status") return expect("GET") ? HttpResponse{200, json(engine_->status(seg[2]))} : not_allowed;
  }
  return error(404, "not_found", "unknown path " + r.path);
}

bool AdminService::community_exists(const std::string& community) const {
  const auto all = engine_->communities();
  return std::find(all.begin(), all.end(), community) != all.end();
}

HttpResponse AdminService::list_members(const std::string& community, const HttpRequest& r) const {
  if (!community_exists(community)) return error(404, "not_found", "unknown community '" + community + "'");
  const auto min_votes = query_size(r, "min_votes", 0, std::numeric_limits<std::int32_t>::max());
  const auto offset = query_size(r, "offset", 0, std::numeric_limits<std::int32_t>::max());
  const auto limit = query_size(r, "limit", kDefaultPage, kMaxPage);
  const auto stats = engine_->stats();

  struct Row {
    std::string user;
    const UserActivity* activity;
    DirectionCounts here;
  };
  std::vector<Row> rows;
  for (const auto& [user, activity] : stats.users()) {
    auto it = activity.by_community.find(community);
    if (it == activity.by_community.end() || it->second.total() == 0) continue;
    if (it->second.total() < static_cast<std::int64_t>(min_votes)) continue;
    rows.push_back({user, &activity, it->second});
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.here.total() != b.here.total()) return a.here.total() > b.here.total();
    return a.user < b.user;
  });
  json members = json::array();
  for (std::size_t i = offset; i < rows.size() && i < offset + limit; ++i) {
    const auto& row = rows[i];
    json per = json::object();
    json joined = json::array();
    for (const auto& [c, counts] : row.activity->by_community) {
      if (counts.total() == 0) continue;
      per[c] = {{"up", counts.up}, {"down", counts.down}};
      joined.push_back(c);
    }
    MemberExtras extra;
    if (auto it = extras_.find(row.user); it != extras_.end()) extra = it->second;
    members.push_back({{"user_id", row.user},
                       {"up", row.here.up},
                       {"down", row.here.down},
                       {"total", row.here.total()},
                       {"communities", joined},
                       {"per_community", per},
                       {"link_karma", nullable(extra.link_karma)},
                       {"comment_karma", nullable(extra.comment_karma)},
                       {"is_moderator", nullable(extra.is_moderator)},
                       {"is_employee", nullable(extra.is_employee)},
                       {"has_gold", nullable(extra.has_gold)}});
  }
  return {200,
          {{"community", community}, {"total", rows.size()}, {"offset", offset}, {"limit", limit}, {"members", members}}};
}

HttpResponse AdminService::set_curators(const std::string& community, const json& body) const {
  CommunityConfig cfg;
  if (auto existing = engine_->config(community)) cfg = *existing;
  cfg.community = community;
  cfg.curators = curator_list(body);
  if (body.contains("min_curator_votes")) {
    if (!body.at("min_curator_votes").is_number_integer() || body.at("min_curator_votes").get<int>() < 0)
      throw ValidationError("min_curator_votes must be a non-negative integer");
    cfg.min_curator_votes = body.at("min_curator_votes").get<int>();
  }
  if (const auto weak = engine_->under_active_curators(cfg); !weak.empty())
    return error(400, "validation_error",
                 "curators need at least " + std::to_string(cfg.min_curator_votes) + " votes in '" + community + "'",
                 {{"users", weak}});
  return {200, json(engine_->configure(cfg))};
}

HttpResponse AdminService::set_thresholds(const std::string& community, const json& body) const {
  auto cfg = engine_->config(community);
  if (!cfg) return error(409, "not_configured", "set curators for '" + community + "' before thresholds");
  if (!body.contains("curation_threshold") && !body.contains("confidence_threshold"))
    throw ValidationError("provide curation_threshold and/or confidence_threshold");
  cfg->curation_threshold = threshold(body, "curation_threshold", cfg->curation_threshold);
  cfg->confidence_threshold = threshold(body, "confidence_threshold", cfg->confidence_threshold);
  return {200, json(engine_->configure(*cfg))};
}

HttpResponse AdminService::preview(const std::string& community, const json& body) const {
  if (!community_exists(community)) return error(404, "not_found", "unknown community '" + community + "'");
  CommunityConfig cfg;
  if (auto existing = engine_->config(community)) cfg = *existing;
  cfg.community = community;
  cfg.curators = curator_list(body);
  cfg.curation_threshold = threshold(body, "curation_threshold", cfg.curation_threshold);
  cfg.confidence_threshold = threshold(body, "confidence_threshold", cfg.confidence_threshold);
  if (body.contains("min_curator_votes")) cfg.min_curator_votes = body.at("min_curator_votes").get<int>();
  if (const auto weak = engine_->under_active_curators(cfg); !weak.empty())
    return error(400, "validation_error",
                 "curators need at least " + std::to_string(cfg.min_curator_votes) + " votes in '" + community + "'",
                 {{"users", weak}});

  std::vector<std::string> ids;
  for (const auto& p : engine_->posts(community)) ids.push_back(p.post_id);
  std::sort(ids.begin(), ids.end());
  json inventory = body.value("inventory", json{{"mode", "all"}});
  const auto mode = inventory.value("mode", std::string("all"));
  if (mode == "sample") {
    const auto n = inventory.at("n").get<std::int64_t>();
    if (n < 0) throw ValidationError("inventory.n must be non-negative");
    std::mt19937_64 rng(inventory.value("seed", std::uint64_t{0}));
    std::shuffle(ids.begin(), ids.end(), rng);
    if (ids.size() > static_cast<std::size_t>(n)) ids.resize(static_cast<std::size_t>(n));
  } else if (mode != "all") {
    throw ValidationError("inventory.mode must be 'all' or 'sample'");
  }
  const auto statuses = engine_->preview(cfg, ids);
  const auto front = std::count_if(statuses.begin(), statuses.end(),
                                   [](const PostStatus& s) { return s.stage == Stage::Frontstage; });
  json posts = ranked_statuses(statuses, *engine_);
  if (body.contains("limit")) {
    const auto limit = body.at("limit").get<std::int64_t>();
    if (limit < 0) throw ValidationError("limit must be non-negative");
    if (posts.size() > static_cast<std::size_t>(limit)) posts.erase(posts.begin() + limit, posts.end());
  }
  return {200,
          {{"community", community},
           {"curators", cfg.curators},
           {"curation_threshold", cfg.curation_threshold},
           {"confidence_threshold", cfg.confidence_threshold},
           {"inventory_size", ids.size()},
           {"frontstage_count", front},
           {"model_fingerprint", engine_->model()->fingerprint()},
           {"posts", posts}}};
}

HttpResponse AdminService::feed(const std::string& community, const HttpRequest& r) const {
  if (!engine_->config(community)) return error(404, "not_found", "community '" + community + "' is not configured");
  std::optional<Stage> stage;
  if (auto it = r.query.find("stage"); it != r.query.end() && !it->second.empty()) stage = parse_stage(it->second);
  const auto limit = query_size(r, "limit", 15, kMaxPage);
  json entries = json::array();
  for (const auto& e : engine_->generate_feed(community, stage, limit))
    entries.push_back({{"post_id", e.post_id},
                       {"curator_upvote_rate", e.score},
                       {"stage", to_string(engine_->status(e.post_id).stage)},
                       {"created_at", format_iso8601(e.created_at)}});
  return {200,
          {{"community", community},
           {"stage", stage ? json(to_string(*stage)) : json(nullptr)},
           {"limit", limit},
           {"entries", entries}}};
}

HttpResponse AdminService::submit_vote(const std::string& post_id, const json& body) const {
  const auto post = engine_->post(post_id);
  if (!post) return error(404, "not_found", "unknown post '" + post_id + "'");
  if (!engine_->config(post->community))
    return error(409, "not_configured", "community '" + post->community + "' is not configured");
  VoteRecord vote;
  vote.user_id = body.at("user_id").get<std::string>();
  if (vote.user_id.empty()) throw ValidationError("user_id is empty");
  vote.post_id = post_id;
  vote.direction = parse_direction(body.at("direction").get<std::string>());
  vote.voted_at = body.contains("voted_at") ? parse_iso8601(body.at("voted_at").get<std::string>())
                                            : std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  vote.community = post->community;
  return {200, json(engine_->on_new_vote(vote))};
}

HttpResponse AdminService::submit_post(const json& body) const {
  PostRecord p;
  p.post_id = body.at("post_id").get<std::string>();
  p.author_id = body.at("author_id").get<std::string>();
  p.community = body.at("community").get<std::string>();
  p.created_at = body.contains("created_at") ? parse_iso8601(body.at("created_at").get<std::string>())
                                             : std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  p.nsfw = body.value("nsfw", false);
  p.url_domain = body.value("url_domain", std::string{});
  p.text = body.value("text", std::string{});
  if (p.post_id.empty()) throw ValidationError("post_id is empty");
  if (!engine_->config(p.community))
    return error(409, "not_configured", "community '" + p.community + "' is not configured");
  return {201, json(engine_->on_submit(p))};
}

HttpResponse AdminService::recommended(const std::string& community) const {
  if (!community_exists(community)) return error(404, "not_found", "unknown community '" + community + "'");
  json groups = json::array();
  if (auto it = recommended_.find(community); it != recommended_.end())
    for (const auto& [name, users] : it->second) groups.push_back({{"name", name}, {"curators", users}});
  return {200, {{"community", community}, {"groups", groups}}};
}

}  // namespace cura
