#include <algorithm>
#include <filesystem>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "cura/feed.hpp"
#include "cura/json_io.hpp"
#include "cura/synth.hpp"
#include "support/routing_machine.hpp"

using namespace cura;
using cura::testing::RoutingMachineOptions;

namespace {

/// Tiny random model over a small synthetic community; predictions are
/// arbitrary but deterministic, which is all routing needs.
struct Fixture {
  SynthCorpus corpus;
  std::shared_ptr<const CurationModel> model;
  std::vector<std::string> users;

  explicit Fixture(int posts = 40) {
    SynthConfig sc;
    sc.users_per_group = 10;
    sc.posts = posts;
    sc.votes_per_user = 12;
    corpus = synth_generate(sc);
    std::vector<std::string> texts;
    for (const auto& p : corpus.posts) texts.push_back(p.text);
    for (const auto& [u, g] : corpus.labels.user_group) users.push_back(u);
    ModelConfig mc;
    mc.layers = 1;
    mc.hidden = 16;
    mc.heads = 2;
    mc.ffn = 32;
    mc.max_len = 48;
    Hyperparams hp;
    hp.finetune_learning_rate = 1e-3;
    model = std::make_shared<const CurationModel>(
        CurationModel::initialise(mc, hp, Vocabulary(WordPiece::build(texts), users), 5));
  }

  std::unique_ptr<FeedEngine> engine(FeedEngine::Options opt = {}) const {
    auto e = std::make_unique<FeedEngine>(model, opt);
    e->import_history(corpus.posts, corpus.votes);
    return e;
  }

  /// Users with at least `n` votes, most active first.
  std::vector<std::string> active(int n) const {
    const auto stats = compute_stats(corpus.votes);
    std::vector<std::string> out;
    for (const auto& u : users)
      if (stats.user(u).total() >= n) out.push_back(u);
    return out;
  }

  CommunityConfig config(std::vector<std::string> curators, double tc = 0.5, double tp = 0.5) const {
    std::sort(curators.begin(), curators.end());
    CommunityConfig c;
    c.community = "c0";
    c.curators = std::move(curators);
    c.curation_threshold = tc;
    c.confidence_threshold = tp;
    return c;
  }
};

PostRecord fresh_post(const std::string& id, const std::string& author, int minute = 0) {
  return {id, author, "c0", parse_iso8601("2025-01-01T00:00:00Z") + std::chrono::minutes(minute), false, "", "fresh"};
}

VoteRecord cast(const std::string& u, const std::string& p, Direction d, int minute) {
  return {u, p, d, parse_iso8601("2025-02-01T00:00:00Z") + std::chrono::minutes(minute), "c0"};
}

}  // namespace

TEST(Rate, ThreeOfFiveCurators) {
  Fixture f;
  const auto post = f.corpus.posts.front();
  auto cfg = f.config({"u0", "u1", "u2", "u3", "u4"}, 0.5, 0.0);
  PostVotes votes;
  votes["u0"] = cast("u0", post.post_id, Direction::Up, 0);
  votes["u1"] = cast("u1", post.post_id, Direction::Up, 1);
  votes["u3"] = cast("u3", post.post_id, Direction::Down, 2);
  votes["u4"] = cast("u4", post.post_id, Direction::Down, 3);
  const auto r = curator_upvote_rate(post, votes, *f.model, cfg);
  EXPECT_DOUBLE_EQ(r.rate, 0.6);
  EXPECT_EQ(route_post(r.rate, cfg.curation_threshold), Stage::Frontstage);
  ASSERT_EQ(r.breakdown.size(), 5u);
  EXPECT_EQ(r.breakdown[2].source, BreakdownSource::PredictedUp);
  ASSERT_TRUE(r.breakdown[2].confidence);
  EXPECT_EQ(*r.breakdown[2].confidence, f.model->probability("u2", post));
  EXPECT_EQ(r.breakdown[0].source, BreakdownSource::ActualUp);
  EXPECT_FALSE(r.breakdown[0].confidence);
  EXPECT_EQ(r.breakdown[4].source, BreakdownSource::ActualDown);
}

TEST(Rate, ActualVotesOverrideTheModel) {
  Fixture f;
  const auto post = f.corpus.posts.front();
  const auto cfg = f.config({"u0", "u1", "u2"}, 0.5, 1.0);
  PostVotes votes;
  for (const auto& u : cfg.curators) votes[u] = cast(u, post.post_id, Direction::Up, 0);
  EXPECT_EQ(curator_upvote_rate(post, votes, *f.model, cfg).rate, 1.0);
  EXPECT_THROW(curator_upvote_rate(post, votes, *f.model, f.config({})), ValidationError);
}

TEST(RateProperty, MatchesEnumerationOracle) {
  Fixture f;
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::string> curators = f.users;
    std::shuffle(curators.begin(), curators.end(), rng);
    curators.resize(1 + rng() % f.users.size());
    const auto cfg = f.config(curators, 0.5, static_cast<double>(rng() % 101) / 100.0);
    const auto& post = f.corpus.posts[rng() % f.corpus.posts.size()];
    PostVotes votes;
    for (const auto& u : f.users)
      if (rng() % 3 == 0) votes[u] = cast(u, post.post_id, rng() % 2 ? Direction::Up : Direction::Down, 0);
    int ups = 0;
    for (const auto& c : cfg.curators) {
      auto it = votes.find(c);
      ups += it != votes.end() ? it->second.direction == Direction::Up
                               : f.model->probability(c, post) >= cfg.confidence_threshold;
    }
    ASSERT_DOUBLE_EQ(curator_upvote_rate(post, votes, *f.model, cfg).rate,
                     static_cast<double>(ups) / static_cast<double>(cfg.curators.size()));
  }
}

TEST(Route, Boundaries) {
  EXPECT_EQ(route_post(0.6, 0.5), Stage::Frontstage);
  EXPECT_EQ(route_post(0.5, 0.5), Stage::Frontstage);
  EXPECT_EQ(route_post(0.49, 0.5), Stage::Backstage);
  EXPECT_EQ(route_post(0.0, 0.0), Stage::Frontstage);
  EXPECT_EQ(parse_stage(to_string(Stage::Backstage)), Stage::Backstage);
  EXPECT_THROW(parse_stage("SIDESTAGE"), ValidationError);
}

TEST(Engine, SubmitterIsSoleCurator) {
  Fixture f;
  auto engine = f.engine();
  const auto author = f.active(5).front();
  engine->configure(f.config({author}, 0.5, 1.0));
  const auto s = engine->on_submit(fresh_post("new1", author));
  EXPECT_EQ(s.curator_upvote_rate, 1.0);
  EXPECT_EQ(s.stage, Stage::Frontstage);
  EXPECT_EQ(s.breakdown.at(0).source, BreakdownSource::ActualUp);
  const auto votes = engine->votes_on("new1");
  ASSERT_EQ(votes.size(), 1u);
  EXPECT_EQ(votes.begin()->second.user_id, author);
  EXPECT_EQ(votes.begin()->second.direction, Direction::Up);
  EXPECT_THROW(engine->on_submit(fresh_post("new1", author)), ValidationError);
}

TEST(Engine, SubmitterNotACurator) {
  Fixture f;
  auto engine = f.engine({.finetune_on_vote = false});
  const auto active = f.active(5);
  // theta_p = 1 turns every prediction below certainty into a non-upvote.
  engine->configure(f.config({active[0], active[1], active[2]}, 0.5, 1.0));
  const auto s = engine->on_submit(fresh_post("new2", "outsider"));
  EXPECT_EQ(s.curator_upvote_rate, 0.0);
  EXPECT_EQ(s.stage, Stage::Backstage);
  EXPECT_EQ(engine->status("new2").stage, Stage::Backstage);
  EXPECT_EQ(engine->votes_on("new2").size(), 1u);
}

TEST(Engine, CuratorVoteReplacesPrediction) {
  Fixture f;
  auto engine = f.engine();
  const auto active = f.active(5);
  const std::vector<std::string> curators{active[0], active[1], active[2], active[3]};
  const auto cfg = engine->configure(f.config(curators, 0.5, 1.0));
  const auto before = engine->on_submit(fresh_post("new3", "outsider"));
  const auto& who = cfg.curators[1];
  ASSERT_EQ(before.breakdown[1].source, BreakdownSource::PredictedDown);
  const auto after = engine->on_new_vote(cast(who, "new3", Direction::Up, 1));
  EXPECT_EQ(after.breakdown[1].source, BreakdownSource::ActualUp);
  EXPECT_FALSE(after.breakdown[1].confidence);
  EXPECT_DOUBLE_EQ(after.curator_upvote_rate, before.curator_upvote_rate + 0.25);
}

TEST(Engine, BorderlineCuratorVoteFlipsStage) {
  Fixture f;
  auto engine = f.engine();
  const auto active = f.active(5);
  const auto cfg = engine->configure(f.config({active[0], active[1]}, 0.5, 1.0));
  EXPECT_EQ(engine->on_submit(fresh_post("edge", "outsider")).stage, Stage::Backstage);
  EXPECT_EQ(engine->on_new_vote(cast(cfg.curators[0], "edge", Direction::Up, 1)).stage, Stage::Frontstage);
  // A later change of heart hides it again.
  EXPECT_EQ(engine->on_new_vote(cast(cfg.curators[0], "edge", Direction::Down, 2)).stage, Stage::Backstage);
}

TEST(Engine, ReplayAndStaleVotesAreNoOps) {
  Fixture f;
  auto engine = f.engine();
  const auto active = f.active(5);
  engine->configure(f.config({active[0], active[1], active[2]}));
  engine->on_submit(fresh_post("new4", "outsider"));
  const auto vote = cast(active[4], "new4", Direction::Down, 5);
  const auto first = engine->on_new_vote(vote);
  const auto hash = engine->state_hash();
  const auto fp = engine->model()->fingerprint();
  EXPECT_TRUE(engine->on_new_vote(vote).same_outcome(first));
  EXPECT_EQ(engine->state_hash(), hash);
  EXPECT_EQ(engine->model()->fingerprint(), fp);
  // An older vote by the same user does not override the newer one.
  engine->on_new_vote(cast(active[4], "new4", Direction::Up, 1));
  EXPECT_EQ(engine->votes_on("new4").at(active[4]).direction, Direction::Down);
  EXPECT_EQ(engine->state_hash(), hash);
  EXPECT_THROW(engine->on_new_vote(cast(active[4], "nope", Direction::Up, 9)), NotFoundError);
  EXPECT_THROW(engine->status("nope"), NotFoundError);
}

TEST(Engine, FinetuneOnEveryNewVote) {
  Fixture f;
  auto engine = f.engine();
  const auto active = f.active(5);
  engine->configure(f.config({active[0], active[1]}));
  engine->on_submit(fresh_post("new5", "outsider"));
  const auto before = engine->model();
  engine->on_new_vote(cast(active[3], "new5", Direction::Up, 1));
  const auto after = engine->model();
  EXPECT_NE(before->fingerprint(), after->fingerprint());
  EXPECT_EQ(after->step(), before->step() + 1);
  // Readers holding the old snapshot still see it intact.
  EXPECT_EQ(before->vocabulary(), after->vocabulary());
}

TEST(Engine, ConfigurationVersioningAndValidation) {
  Fixture f;
  auto engine = f.engine();
  const auto active = f.active(5);
  const auto v1 = engine->configure(f.config({active[0], active[1]}));
  EXPECT_EQ(v1.version, 1u);
  EXPECT_EQ(engine->configure(f.config({active[1], active[0]})).version, 1u);
  const auto v2 = engine->configure(f.config({active[0], active[1]}, 0.8, 0.5));
  EXPECT_EQ(v2.version, 2u);
  for (const auto& s : engine->statuses("c0")) EXPECT_EQ(s.config_version, 2u);
  EXPECT_EQ(engine->config_history("c0").size(), 2u);
  EXPECT_THROW(engine->configure(f.config({})), ValidationError);
  EXPECT_THROW(engine->configure(f.config({active[0]}, 1.01)), ValidationError);
  EXPECT_THROW(engine->configure(f.config({active[0]}, 0.5, -0.1)), ValidationError);
  try {
    engine->configure(f.config({active[0], "lurker"}));
    FAIL() << "expected rejection";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("lurker"), std::string::npos);
  }
  EXPECT_EQ(engine->config("c0")->version, 2u);
  EXPECT_FALSE(engine->config("elsewhere"));
}

TEST(Engine, UnconfiguredCommunityHasNoStatus) {
  Fixture f;
  auto engine = f.engine();
  EXPECT_THROW(engine->status(f.corpus.posts.front().post_id), NotFoundError);
  EXPECT_TRUE(engine->generate_feed("c0", std::nullopt, 15).empty());
}

TEST(Feed, OrderingLimitAndStageFilter) {
  Fixture f(120);
  auto engine = f.engine({.finetune_on_vote = false});
  const auto active = f.active(5);
  engine->configure(f.config({active.begin(), active.begin() + 6}, 0.5, 0.5));
  const auto statuses = engine->statuses("c0");
  ASSERT_EQ(statuses.size(), 120u);
  std::vector<FeedEntry> oracle;
  for (const auto& s : statuses) oracle.push_back({s.post_id, s.curator_upvote_rate, engine->post(s.post_id)->created_at});
  std::sort(oracle.begin(), oracle.end(), [](const FeedEntry& a, const FeedEntry& b) {
    return std::make_tuple(-a.score, -a.created_at.time_since_epoch().count(), a.post_id) <
           std::make_tuple(-b.score, -b.created_at.time_since_epoch().count(), b.post_id);
  });
  EXPECT_EQ(engine->generate_feed("c0", std::nullopt, 1000), oracle);
  const auto top = engine->generate_feed("c0", std::nullopt, 15);
  EXPECT_EQ(top.size(), 15u);
  EXPECT_TRUE(std::equal(top.begin(), top.end(), oracle.begin()));
  for (auto stage : {Stage::Frontstage, Stage::Backstage})
    for (const auto& e : engine->generate_feed("c0", stage, 1000)) EXPECT_EQ(engine->status(e.post_id).stage, stage);
}

TEST(Feed, TiesGoToTheNewerPost) {
  const Timestamp t0 = parse_iso8601("2024-01-01T00:00:00Z");
  const auto out = rank_feed({{"old", 0.6, t0}, {"top", 0.8, t0}, {"new", 0.6, t0 + std::chrono::hours(1)}}, 10);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].post_id, "top");
  EXPECT_EQ(out[1].post_id, "new");
  EXPECT_EQ(out[2].post_id, "old");
  EXPECT_EQ(rank_feed(out, 1).size(), 1u);
}

TEST(Feed, BroadcastByScore) {
  const PostCollection posts{fresh_post("a", "x"), fresh_post("b", "x")};
  VoteCollection votes;
  for (int i = 0; i < 5; ++i) votes.push_back(cast("u" + std::to_string(i), "a", Direction::Up, i));
  votes.push_back(cast("d", "a", Direction::Down, 9));
  for (int i = 0; i < 3; ++i) votes.push_back(cast("w" + std::to_string(i), "b", Direction::Up, i));
  const auto feed = broadcast_feed(posts, votes, 15);
  ASSERT_EQ(feed.size(), 2u);
  EXPECT_EQ(feed[0].post_id, "a");
  EXPECT_EQ(feed[0].score, 4);
  EXPECT_EQ(feed[1].score, 3);
  EXPECT_TRUE(broadcast_feed({}, votes, 15).empty());
  Fixture f;
  EXPECT_TRUE(f.engine()->broadcast_feed("empty", 15).empty());
}

TEST(RoutingProperty, RandomVoteStreamKeepsInvariants) {
  Fixture f(60);
  for (bool finetune : {false, true}) {
    auto engine = f.engine({.finetune_on_vote = finetune});
    const auto active = f.active(5);
    std::vector<CommunityConfig> configs{f.config({active[0], active[1], active[2]}, 0.5, 0.5),
                                         f.config({active.begin(), active.begin() + 7}, 0.3, 0.45),
                                         f.config({active[3], active[5]}, 1.0, 0.55)};
    RoutingMachineOptions opt;
    opt.events = 600;
    opt.reconfigure_every = 200;
    opt.seed = finetune ? 2 : 3;
    const auto report = cura::testing::run_routing_machine(*engine, configs, f.users, opt);
    EXPECT_EQ(report.violations(), 0) << cura::testing::describe(report);
    EXPECT_EQ(report.events, 600);
  }
}

TEST(Persistence, RestartRestoresState) {
  Fixture f;
  const auto dir = std::filesystem::temp_directory_path() / "cura_feed_persist";
  std::filesystem::remove_all(dir);
  const auto active = f.active(5);
  std::string hash;
  {
    FeedEngine::Options opt;
    opt.data_dir = dir;
    opt.checkpoint_every = 2;
    auto engine = FeedEngine::open(dir, f.model, opt);
    // History is replayed through the live path so that it lands in the logs.
    for (const auto& p : f.corpus.posts) engine->on_submit(p);
    for (const auto& v : f.corpus.votes) engine->on_new_vote(v);
    engine->configure(f.config({active[0], active[1], active[2]}));
    engine->on_submit(fresh_post("live \"1\", with comma", active[0]));
    engine->on_new_vote(cast(active[1], "live \"1\", with comma", Direction::Down, 3));
    engine->flush();
    hash = engine->state_hash();
  }
  EXPECT_TRUE(std::filesystem::exists(dir / "model.ckpt"));
  EXPECT_TRUE(std::filesystem::exists(dir / "status.json"));
  auto reopened = FeedEngine::open(dir, f.model);
  EXPECT_EQ(reopened->state_hash(), hash);
  EXPECT_EQ(reopened->status("live \"1\", with comma").breakdown.at(1).source, BreakdownSource::ActualDown);
  EXPECT_EQ(reopened->config("c0")->version, 1u);
  std::filesystem::remove_all(dir);
}

TEST(Persistence, StatusSnapshotIsOptional) {
  Fixture f;
  const auto dir = std::filesystem::temp_directory_path() / "cura_feed_nosnap";
  std::filesystem::remove_all(dir);
  const auto active = f.active(5);
  PostStatus expected;
  {
    FeedEngine::Options opt;
    opt.data_dir = dir;
    opt.finetune_on_vote = false;
    auto engine = FeedEngine::open(dir, f.model, opt);
    for (const auto& p : f.corpus.posts) engine->on_submit(p);
    for (const auto& v : f.corpus.votes) engine->on_new_vote(v);
    engine->configure(f.config({active[0], active[1]}));
    expected = engine->status(f.corpus.posts[3].post_id);
  }
  std::filesystem::remove(dir / "status.json");
  auto reopened = FeedEngine::open(dir, f.model);
  EXPECT_TRUE(reopened->status(f.corpus.posts[3].post_id).same_outcome(expected));
  std::filesystem::remove_all(dir);
}

TEST(Json, StatusRoundTrip) {
  PostStatus s;
  s.post_id = "p";
  s.community = "c";
  s.curator_upvote_rate = 0.5;
  s.stage = Stage::Frontstage;
  s.breakdown = {{"a", BreakdownSource::ActualUp, std::nullopt}, {"b", BreakdownSource::PredictedDown, 0.25}};
  s.last_evaluated_at = parse_iso8601("2024-05-05T05:05:05Z");
  s.config_version = 3;
  const nlohmann::json j = s;
  EXPECT_EQ(j.at("stage"), "FRONTSTAGE");
  EXPECT_TRUE(j.at("breakdown")[0].at("confidence").is_null());
  EXPECT_EQ(j.at("breakdown")[1].at("source"), "PREDICTED_DOWN");
  const auto back = j.get<PostStatus>();
  EXPECT_TRUE(back.same_outcome(s));
  EXPECT_EQ(back.last_evaluated_at, s.last_evaluated_at);
}
