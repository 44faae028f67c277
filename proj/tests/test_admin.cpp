#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include <gtest/gtest.h>

#include "cura/admin_service.hpp"
#include "cura/json_io.hpp"
#include "cura/synth.hpp"
#include "support/schema_validator.hpp"

// After Eigen: resolv.h defines a `_res` macro.
#include <httplib.h>

using namespace cura;
using nlohmann::json;

namespace {

const cura::testing::SchemaValidator& schemas() {
  static const cura::testing::SchemaValidator v = [] {
    std::ifstream in(CURA_SCHEMA_PATH);
    return cura::testing::SchemaValidator(json::parse(in));
  }();
  return v;
}

#define EXPECT_SCHEMA(body, name)                                        \
  do {                                                                   \
    const auto errs = schemas().check((body), (name));                   \
    EXPECT_TRUE(errs.empty()) << (name) << ": " << errs.front() << "\n" << (body).dump(2); \
  } while (0)

constexpr const char* kToken = "s3cret";

struct Harness {
  SynthCorpus corpus;
  std::shared_ptr<FeedEngine> engine;
  std::unique_ptr<AdminService> service;

  Harness() {
    SynthConfig sc;
    sc.users_per_group = 8;
    sc.posts = 30;
    sc.votes_per_user = 10;
    corpus = synth_generate(sc);
    std::vector<std::string> texts, users;
    for (const auto& p : corpus.posts) texts.push_back(p.text);
    for (const auto& [u, g] : corpus.labels.user_group) users.push_back(u);
    ModelConfig mc;
    mc.layers = 1;
    mc.hidden = 16;
    mc.heads = 2;
    mc.ffn = 32;
    mc.max_len = 48;
    Hyperparams hp;
    auto model = std::make_shared<const CurationModel>(
        CurationModel::initialise(mc, hp, Vocabulary(WordPiece::build(texts), users), 3));
    engine = std::make_shared<FeedEngine>(model, FeedEngine::Options{});
    engine->import_history(corpus.posts, corpus.votes);
    std::map<std::string, MemberExtras> extras;
    extras["u0"] = {120, std::nullopt, true, false, std::nullopt};
    service = std::make_unique<AdminService>(engine, kToken, extras,
                                             decltype(ServiceConfig::recommended_groups){{"c0", {{"agreeable", {"u1", "u2"}}}}});
  }

  HttpResponse call(const std::string& method, const std::string& path, const json& body = nullptr,
                    std::map<std::string, std::string> query = {}, std::string auth = std::string("Bearer ") + kToken) const {
    HttpRequest r;
    r.method = method;
    r.path = path;
    r.query = std::move(query);
    r.body = body.is_null() ? "" : body.dump();
    r.authorization = std::move(auth);
    return service->handle(r);
  }

  /// Users with at least `n` votes in c0, busiest first.
  std::vector<std::string> active(int n) const {
    const auto stats = compute_stats(corpus.votes);
    std::vector<std::string> out;
    for (const auto& [u, a] : stats.users()) {
      auto it = a.by_community.find("c0");
      if (it != a.by_community.end() && it->second.total() >= n) out.push_back(u);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  json configure(std::vector<std::string> curators) const {
    auto r = call("PUT", "/v1/communities/c0/curators", {{"curators", curators}});
    EXPECT_EQ(r.status, 200) << r.body.dump();
    return r.body;
  }
};

std::string error_code(const HttpResponse& r) { return r.body.at("error").at("code").get<std::string>(); }

}  // namespace

TEST(SchemaValidator, RejectsNonConformingDocuments) {
  EXPECT_TRUE(schemas().check({{"status", "ok"}, {"model_fingerprint", "x"}, {"model_step", 0}}, "Health").empty());
  EXPECT_FALSE(schemas().check({{"status", "ok"}}, "Health").empty());
  EXPECT_FALSE(schemas().check({{"status", "bad"}, {"model_fingerprint", "x"}, {"model_step", 0}}, "Health").empty());
  EXPECT_FALSE(schemas().check({{"status", "ok"}, {"model_fingerprint", "x"}, {"model_step", -1}}, "Health").empty());
  EXPECT_FALSE(
      schemas().check({{"status", "ok"}, {"model_fingerprint", "x"}, {"model_step", 0}, {"extra", 1}}, "Health").empty());
  json entry{{"curator", "a"}, {"source", "ACTUAL_UP"}, {"confidence", nullptr}};
  EXPECT_TRUE(schemas().check(entry, "CuratorEntry").empty());
  entry["confidence"] = 1.5;
  EXPECT_FALSE(schemas().check(entry, "CuratorEntry").empty());
}

TEST(Auth, HealthIsOpenEverythingElseNeedsTheToken) {
  Harness h;
  auto health = h.call("GET", "/v1/health", nullptr, {}, "");
  EXPECT_EQ(health.status, 200);
  EXPECT_SCHEMA(health.body, "Health");
  for (const std::string auth : {"", "Bearer wrong", "s3cret", "Basic s3cret"}) {
    auto r = h.call("GET", "/v1/communities", nullptr, {}, auth);
    EXPECT_EQ(r.status, 401) << auth;
    EXPECT_EQ(error_code(r), "unauthorized");
    EXPECT_SCHEMA(r.body, "Error");
  }
  AdminService tokenless(h.engine, "");
  HttpRequest r{"GET", "/v1/communities", {}, "", "Bearer "};
  EXPECT_EQ(tokenless.handle(r).status, 401);
}

TEST(Routing, UnknownPathsMethodsAndBodies) {
  Harness h;
  EXPECT_EQ(h.call("GET", "/v2/health").status, 404);
  EXPECT_EQ(h.call("GET", "/v1/nope").status, 404);
  EXPECT_EQ(h.call("DELETE", "/v1/communities").status, 405);
  EXPECT_EQ(h.call("GET", "/v1/communities/c0/curators").status, 405);
  HttpRequest bad{"PUT", "/v1/communities/c0/curators", {}, "{not json", std::string("Bearer ") + kToken};
  auto r = h.service->handle(bad);
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(error_code(r), "invalid_json");
  EXPECT_SCHEMA(r.body, "Error");
}

TEST(Communities, ListsEveryCommunity) {
  Harness h;
  auto r = h.call("GET", "/v1/communities");
  ASSERT_EQ(r.status, 200);
  EXPECT_SCHEMA(r.body, "Communities");
  ASSERT_EQ(r.body["communities"].size(), 1u);
  EXPECT_EQ(r.body["communities"][0]["posts"], 30);
  EXPECT_FALSE(r.body["communities"][0]["configured"]);
}

TEST(Members, OrderFilterAndPaginationMatchAnOracle) {
  Harness h;
  const auto stats = compute_stats(h.corpus.votes);
  std::vector<std::pair<std::int64_t, std::string>> oracle;
  for (const auto& [u, a] : stats.users())
    if (a.by_community.count("c0") && a.by_community.at("c0").total() >= 9) oracle.emplace_back(-a.by_community.at("c0").total(), u);
  std::sort(oracle.begin(), oracle.end());

  std::vector<std::string> got;
  json first;
  for (std::size_t offset = 0;; offset += 3) {
    auto r = h.call("GET", "/v1/communities/c0/members", nullptr,
                    {{"min_votes", "9"}, {"offset", std::to_string(offset)}, {"limit", "3"}});
    ASSERT_EQ(r.status, 200);
    EXPECT_SCHEMA(r.body, "Members");
    EXPECT_EQ(r.body["total"], oracle.size());
    if (r.body["members"].empty()) break;
    for (const auto& m : r.body["members"]) {
      got.push_back(m["user_id"]);
      if (m["user_id"] == "u0") first = m;
    }
  }
  ASSERT_EQ(got.size(), oracle.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(got[i], oracle[i].second);

  auto all = h.call("GET", "/v1/communities/c0/members", nullptr, {{"limit", "1000"}});
  for (const auto& m : all.body["members"]) {
    const auto& a = *stats.user_activity(m["user_id"]);
    EXPECT_EQ(m["up"], a.by_community.at("c0").up);
    EXPECT_EQ(m["down"], a.by_community.at("c0").down);
    if (m["user_id"] == "u0") {
      EXPECT_EQ(m["link_karma"], 120);
      EXPECT_TRUE(m["comment_karma"].is_null());
      EXPECT_EQ(m["is_moderator"], true);
      EXPECT_TRUE(m["has_gold"].is_null());
    } else {
      EXPECT_TRUE(m["link_karma"].is_null());
    }
  }
}

TEST(Members, RejectsBadQueriesAndUnknownCommunities) {
  Harness h;
  EXPECT_EQ(h.call("GET", "/v1/communities/nowhere/members").status, 404);
  EXPECT_EQ(h.call("GET", "/v1/communities/c0/members", nullptr, {{"limit", "1001"}}).status, 400);
  EXPECT_EQ(h.call("GET", "/v1/communities/c0/members", nullptr, {{"offset", "-1"}}).status, 400);
  EXPECT_EQ(h.call("GET", "/v1/communities/c0/members", nullptr, {{"min_votes", "x"}}).status, 400);
}

TEST(Curators, ConfigureValidateAndNoOp) {
  Harness h;
  const auto curators = h.active(5);
  ASSERT_GE(curators.size(), 3u);
  const std::vector<std::string> picked(curators.begin(), curators.begin() + 3);
  auto cfg = h.configure(picked);
  EXPECT_SCHEMA(cfg, "CommunityConfig");
  EXPECT_EQ(cfg["version"], 1);
  EXPECT_EQ(h.configure(picked)["version"], 1);
  auto reversed = picked;
  std::reverse(reversed.begin(), reversed.end());
  EXPECT_EQ(h.configure(reversed)["version"], 1);

  auto weak = h.call("PUT", "/v1/communities/c0/curators", {{"curators", {picked[0], "ghost"}}});
  EXPECT_EQ(weak.status, 400);
  EXPECT_SCHEMA(weak.body, "Error");
  EXPECT_EQ(weak.body["error"]["users"], json::array({"ghost"}));
  EXPECT_EQ(h.engine->config("c0")->version, 1u);

  EXPECT_EQ(h.call("PUT", "/v1/communities/c0/curators", {{"curators", json::array()}}).status, 400);
  EXPECT_EQ(h.call("PUT", "/v1/communities/c0/curators", {{"curators", {1, 2}}}).status, 400);
  EXPECT_EQ(h.call("PUT", "/v1/communities/c0/curators", json::object()).status, 400);

  auto relaxed = h.call("PUT", "/v1/communities/c0/curators", {{"curators", {picked[0], "ghost"}}, {"min_curator_votes", 0}});
  EXPECT_EQ(relaxed.status, 200);
  EXPECT_EQ(relaxed.body["version"], 2);

  auto got = h.call("GET", "/v1/communities/c0/config");
  EXPECT_EQ(got.status, 200);
  EXPECT_EQ(got.body, relaxed.body);
}

TEST(Thresholds, NeedCuratorsFirstAndStayInRange) {
  Harness h;
  auto early = h.call("PUT", "/v1/communities/c0/thresholds", {{"curation_threshold", 0.3}});
  EXPECT_EQ(early.status, 409);
  EXPECT_EQ(error_code(early), "not_configured");
  EXPECT_EQ(h.call("GET", "/v1/communities/c0/config").status, 404);

  h.configure({h.active(5)[0]});
  for (const json bad : {json{{"curation_threshold", 1.1}}, json{{"confidence_threshold", -0.1}},
                         json{{"curation_threshold", "0.5"}}, json::object()})
    EXPECT_EQ(h.call("PUT", "/v1/communities/c0/thresholds", bad).status, 400) << bad.dump();
  auto ok = h.call("PUT", "/v1/communities/c0/thresholds", {{"curation_threshold", 0.0}, {"confidence_threshold", 1.0}});
  ASSERT_EQ(ok.status, 200);
  EXPECT_EQ(ok.body["curation_threshold"], 0.0);
  EXPECT_EQ(ok.body["confidence_threshold"], 1.0);
  EXPECT_EQ(ok.body["version"], 2);
  for (const auto& s : h.engine->statuses("c0")) EXPECT_EQ(s.stage, Stage::Frontstage);
}

TEST(Preview, IsSideEffectFreeAndMatchesTheRateOracle) {
  Harness h;
  const auto curators = h.active(5);
  h.configure({curators[0]});
  const auto before = h.engine->state_hash();
  const std::vector<std::string> picked(curators.begin(), curators.begin() + 3);
  json body{{"curators", picked}, {"curation_threshold", 0.4}, {"confidence_threshold", 0.5}};
  auto r = h.call("POST", "/v1/communities/c0/preview", body);
  ASSERT_EQ(r.status, 200) << r.body.dump();
  EXPECT_SCHEMA(r.body, "Preview");
  EXPECT_EQ(h.engine->state_hash(), before);
  EXPECT_EQ(r.body["inventory_size"], 30);

  CommunityConfig cfg;
  cfg.community = "c0";
  cfg.curators = picked;
  cfg.curation_threshold = 0.4;
  int front = 0;
  double prev = 2;
  for (const auto& p : r.body["posts"]) {
    const auto post = *h.engine->post(p["post_id"]);
    const auto want = curator_upvote_rate(post, h.engine->votes_on(post.post_id), *h.engine->model(), cfg);
    EXPECT_EQ(p["curator_upvote_rate"].get<double>(), want.rate);
    EXPECT_EQ(p["stage"], want.rate >= 0.4 ? "FRONTSTAGE" : "BACKSTAGE");
    front += want.rate >= 0.4;
    EXPECT_LE(p["curator_upvote_rate"].get<double>(), prev);
    prev = p["curator_upvote_rate"];
  }
  EXPECT_EQ(r.body["frontstage_count"], front);

  json sample = body;
  sample["inventory"] = {{"mode", "sample"}, {"n", 7}, {"seed", 9}};
  sample["limit"] = 5;
  auto a = h.call("POST", "/v1/communities/c0/preview", sample);
  auto b = h.call("POST", "/v1/communities/c0/preview", sample);
  EXPECT_EQ(a.body["inventory_size"], 7);
  EXPECT_EQ(a.body["posts"].size(), 5u);
  EXPECT_EQ(a.body, b.body);

  sample["inventory"] = {{"mode", "bogus"}};
  EXPECT_EQ(h.call("POST", "/v1/communities/c0/preview", sample).status, 400);
  EXPECT_EQ(h.call("POST", "/v1/communities/c0/preview", {{"curators", {"ghost"}}}).status, 400);
  EXPECT_EQ(h.call("POST", "/v1/communities/none/preview", body).status, 404);
  EXPECT_EQ(h.engine->state_hash(), before);
}

TEST(Votes, RouteThroughTheEngine) {
  Harness h;
  const auto& post = h.corpus.posts.front().post_id;
  json vote{{"user_id", "newcomer"}, {"direction", "up"}, {"voted_at", "2030-01-01T00:00:00Z"}};
  auto early = h.call("POST", "/v1/posts/" + post + "/votes", vote);
  EXPECT_EQ(early.status, 409);

  const auto c = h.active(5)[0];
  h.configure({c});
  EXPECT_EQ(h.call("POST", "/v1/posts/missing/votes", vote).status, 404);
  vote["user_id"] = c;
  vote["direction"] = "down";
  auto r = h.call("POST", "/v1/posts/" + post + "/votes", vote);
  ASSERT_EQ(r.status, 200) << r.body.dump();
  EXPECT_SCHEMA(r.body, "PostStatus");
  EXPECT_EQ(r.body["curator_upvote_rate"], 0.0);
  EXPECT_EQ(r.body["breakdown"][0]["source"], "ACTUAL_DOWN");
  vote["direction"] = "sideways";
  EXPECT_EQ(h.call("POST", "/v1/posts/" + post + "/votes", vote).status, 400);
  EXPECT_EQ(h.call("POST", "/v1/posts/" + post + "/votes", json{{"direction", "up"}}).status, 400);

  auto status = h.call("GET", "/v1/posts/" + post + "/status");
  EXPECT_EQ(status.status, 200);
  EXPECT_SCHEMA(status.body, "PostStatus");
  EXPECT_EQ(status.body["curator_upvote_rate"], 0.0);
  EXPECT_EQ(h.call("GET", "/v1/posts/missing/status").status, 404);
}

TEST(Posts, SubmitCreatesAStatus) {
  Harness h;
  json post{{"post_id", "fresh"}, {"author_id", "u1"}, {"community", "c0"}, {"created_at", "2030-01-01T00:00:00Z"},
            {"text", "hello"}};
  EXPECT_EQ(h.call("POST", "/v1/posts", post).status, 409);
  h.configure({h.active(5)[0]});
  auto r = h.call("POST", "/v1/posts", post);
  ASSERT_EQ(r.status, 201) << r.body.dump();
  EXPECT_SCHEMA(r.body, "PostStatus");
  EXPECT_EQ(h.call("POST", "/v1/posts", post).status, 400);
  post.erase("author_id");
  post["post_id"] = "other";
  EXPECT_EQ(h.call("POST", "/v1/posts", post).status, 400);
}

TEST(Feed, RankedAndFiltered) {
  Harness h;
  EXPECT_EQ(h.call("GET", "/v1/communities/c0/feed").status, 404);
  const auto curators = h.active(5);
  h.configure({curators.begin(), curators.begin() + 3});
  auto r = h.call("GET", "/v1/communities/c0/feed", nullptr, {{"limit", "10"}});
  ASSERT_EQ(r.status, 200);
  EXPECT_SCHEMA(r.body, "Feed");
  EXPECT_EQ(r.body["entries"].size(), std::min<std::size_t>(10, h.engine->generate_feed("c0", std::nullopt, 10).size()));
  const auto expected = h.engine->generate_feed("c0", std::nullopt, 10);
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_EQ(r.body["entries"][i]["post_id"], expected[i].post_id);
  auto back = h.call("GET", "/v1/communities/c0/feed", nullptr, {{"stage", "BACKSTAGE"}});
  EXPECT_SCHEMA(back.body, "Feed");
  for (const auto& e : back.body["entries"]) EXPECT_EQ(e["stage"], "BACKSTAGE");
  EXPECT_EQ(h.call("GET", "/v1/communities/c0/feed", nullptr, {{"stage", "MIDDLE"}}).status, 400);
}

TEST(Recommended, ServesConfiguredGroups) {
  Harness h;
  auto r = h.call("GET", "/v1/communities/c0/recommended-curators");
  ASSERT_EQ(r.status, 200);
  EXPECT_SCHEMA(r.body, "RecommendedCurators");
  EXPECT_EQ(r.body["groups"][0]["name"], "agreeable");
  EXPECT_EQ(h.call("GET", "/v1/communities/zz/recommended-curators").status, 404);
}

TEST(Config, FileThenEnvironment) {
  const auto dir = std::filesystem::temp_directory_path() / "cura_admin_cfg";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "svc.json") << R"({"port": 9001, "admin_token": "file", "recommended_groups": {"c0": {"g": ["a"]}}})";
  }
  ::setenv("CURA_ADMIN_TOKEN", "env", 1);
  ::setenv("CURA_DATA_DIR", "/tmp/elsewhere", 1);
  const auto c = load_service_config(dir / "svc.json");
  ::unsetenv("CURA_ADMIN_TOKEN");
  ::unsetenv("CURA_DATA_DIR");
  EXPECT_EQ(c.port, 9001);
  EXPECT_EQ(c.admin_token, "env");
  EXPECT_EQ(c.data_dir, "/tmp/elsewhere");
  EXPECT_EQ(c.recommended_groups.at("c0").at("g"), std::vector<std::string>{"a"});
  EXPECT_THROW(load_service_config(dir / "missing.json"), std::runtime_error);
}

TEST(Config, MemberExtrasCsv) {
  const auto path = std::filesystem::temp_directory_path() / "cura_extras.csv";
  {
    std::ofstream(path) << "user_id,link_karma,comment_karma,is_moderator,is_employee,has_gold\n"
                        << "alice,10,,true,,0\n";
  }
  const auto extras = read_member_extras(path);
  EXPECT_EQ(extras.at("alice").link_karma, 10);
  EXPECT_FALSE(extras.at("alice").comment_karma);
  EXPECT_EQ(extras.at("alice").is_moderator, true);
  EXPECT_FALSE(extras.at("alice").is_employee);
  EXPECT_EQ(extras.at("alice").has_gold, false);
  {
    std::ofstream(path) << "user_id,link_karma,comment_karma,is_moderator,is_employee,has_gold\n"
                        << "bob,ten,,,,\n";
  }
  try {
    read_member_extras(path);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Http, RealSocketRoundTrip) {
  Harness h;
  HttpServer server(*h.service);
  const int port = server.bind("127.0.0.1", 0);
  std::thread loop([&] { server.run(); });
  httplib::Client client("127.0.0.1", port);
  auto health = client.Get("/v1/health");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);
  EXPECT_SCHEMA(json::parse(health->body), "Health");
  EXPECT_EQ(client.Get("/v1/communities")->status, 401);
  httplib::Headers auth{{"Authorization", std::string("Bearer ") + kToken}};
  auto members = client.Get("/v1/communities/c0/members?limit=2&min_votes=1", auth);
  ASSERT_TRUE(members);
  EXPECT_EQ(members->status, 200);
  EXPECT_EQ(json::parse(members->body)["members"].size(), 2u);
  const auto c = h.active(5)[0];
  auto put = client.Put("/v1/communities/c0/curators", auth, json{{"curators", {c}}}.dump(), "application/json");
  ASSERT_TRUE(put);
  EXPECT_EQ(put->status, 200);
  EXPECT_EQ(h.engine->config("c0")->curators, std::vector<std::string>{c});
  server.stop();
  loop.join();
}
