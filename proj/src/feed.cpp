#include "cura/feed.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cura/csv.hpp"
#include "cura/json_io.hpp"
#include "cura/log.hpp"
#include "cura/weighting.hpp"

namespace cura {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kPostLogTag = "# cura-post-log v1";
constexpr const char* kVoteLogTag = "# cura-vote-log v1";
constexpr const char* kCheckpointFile = "model.ckpt";
constexpr const char* kStatusFile = "status.json";
constexpr const char* kConfigFile = "communities.json";

Timestamp now() { return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now()); }

std::string file_safe(const std::string& name) {
  std::string out;
  for (unsigned char c : name) {
    if (std::isalnum(c) || c == '-' || c == '_') {
      out.push_back(static_cast<char>(c));
    } else {
      char buf[4];
      std::snprintf(buf, sizeof(buf), "%%%02X", c);
      out += buf;
    }
  }
  return out.empty() ? "%" : out;
}

void write_atomically(const fs::path& path, const std::string& contents) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << contents;
  }
  fs::rename(tmp, path);
}

std::string vote_row(const VoteRecord& v) {
  std::ostringstream out;
  csv::write_row(out, {v.user_id, v.post_id, std::string(to_string(v.direction)), format_iso8601(v.voted_at),
                       v.community});
  return out.str();
}

std::string post_row(const PostRecord& p) {
  std::ostringstream out;
  csv::write_row(out, {p.post_id, p.author_id, p.community, format_iso8601(p.created_at), p.nsfw ? "true" : "false",
                       p.url_domain, p.text});
  return out.str();
}

/// Reads a tagged log: tag line, then a normal CSV file with header.
std::string read_log_body(const fs::path& path, const char* tag) {
  std::ifstream in(path);
  if (!in) return {};
  std::string first;
  std::getline(in, first);
  if (first != tag) throw std::runtime_error(path.string() + ": unsupported log format '" + first + "'");
  std::stringstream rest;
  rest << in.rdbuf();
  return rest.str();
}

PostStatus unconfigured(const PostRecord& post) {
  PostStatus s;
  s.post_id = post.post_id;
  s.community = post.community;
  return s;
}

}  // namespace

std::string_view to_string(Stage s) { return s == Stage::Frontstage ? "FRONTSTAGE" : "BACKSTAGE"; }

std::string_view to_string(BreakdownSource s) {
  switch (s) {
    case BreakdownSource::ActualUp: return "ACTUAL_UP";
    case BreakdownSource::ActualDown: return "ACTUAL_DOWN";
    case BreakdownSource::PredictedUp: return "PREDICTED_UP";
    case BreakdownSource::PredictedDown: return "PREDICTED_DOWN";
  }
  return "";
}

Stage parse_stage(std::string_view s) {
  if (s == "FRONTSTAGE" || s == "frontstage") return Stage::Frontstage;
  if (s == "BACKSTAGE" || s == "backstage") return Stage::Backstage;
  throw ValidationError("unknown stage '" + std::string(s) + "'");
}

void CommunityConfig::validate() const {
  if (community.empty()) throw ValidationError("community name is empty");
  if (curators.empty()) throw ValidationError("curator set is empty");
  if (!(curation_threshold >= 0.0 && curation_threshold <= 1.0))
    throw ValidationError("curation threshold must lie in [0, 1]");
  if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0))
    throw ValidationError("confidence threshold must lie in [0, 1]");
  if (min_curator_votes < 0) throw ValidationError("min_curator_votes must be non-negative");
  if (!std::is_sorted(curators.begin(), curators.end()) ||
      std::adjacent_find(curators.begin(), curators.end()) != curators.end())
    throw ValidationError("curators must be sorted and unique");
}

RateResult curator_upvote_rate(const PostRecord& post, const PostVotes& votes, const CurationModel& model,
                               const CommunityConfig& config) {
  if (config.curators.empty()) throw ValidationError("curator set is empty");
  RateResult out;
  out.breakdown.reserve(config.curators.size());
  std::size_t ups = 0;
  for (const auto& curator : config.curators) {
    CuratorEntry entry;
    entry.curator = curator;
    if (auto it = votes.find(curator); it != votes.end()) {
      entry.source = it->second.direction == Direction::Up ? BreakdownSource::ActualUp : BreakdownSource::ActualDown;
    } else {
      const double p = model.probability(curator, post);
      entry.confidence = p;
      entry.source = decide(p, config.confidence_threshold) == Direction::Up ? BreakdownSource::PredictedUp
                                                                              : BreakdownSource::PredictedDown;
    }
    if (entry.source == BreakdownSource::ActualUp || entry.source == BreakdownSource::PredictedUp) ++ups;
    out.breakdown.push_back(std::move(entry));
  }
  out.rate = static_cast<double>(ups) / static_cast<double>(config.curators.size());
  return out;
}

std::vector<FeedEntry> rank_feed(std::vector<FeedEntry> entries, std::size_t limit) {
  std::sort(entries.begin(), entries.end(), [](const FeedEntry& a, const FeedEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.created_at != b.created_at) return a.created_at > b.created_at;
    return a.post_id < b.post_id;
  });
  if (entries.size() > limit) entries.resize(limit);
  return entries;
}

std::vector<FeedEntry> broadcast_feed(const std::vector<PostRecord>& posts, const VoteCollection& votes,
                                      std::size_t limit) {
  std::unordered_map<std::string, double> score;
  for (const auto& p : posts) score[p.post_id] = 0;
  for (const auto& v : votes)
    if (auto it = score.find(v.post_id); it != score.end()) it->second += v.direction == Direction::Up ? 1 : -1;
  std::vector<FeedEntry> entries;
  entries.reserve(posts.size());
  for (const auto& p : posts) entries.push_back({p.post_id, score[p.post_id], p.created_at});
  return rank_feed(std::move(entries), limit);
}

// ---------------------------------------------------------------------------

FeedEngine::FeedEngine(std::shared_ptr<const CurationModel> model, Options options)
    : model_(std::move(model)), options_(std::move(options)) {
  if (!model_) throw std::invalid_argument("feed engine needs a model");
  if (options_.data_dir) fs::create_directories(*options_.data_dir / "votes");
}

FeedEngine::~FeedEngine() {
  if (!options_.data_dir) return;
  try {
    flush();
  } catch (const std::exception& e) {
    log::error(std::string("feed engine flush on shutdown failed: ") + e.what());
  }
}

std::unique_ptr<FeedEngine> FeedEngine::open(const fs::path& dir, std::shared_ptr<const CurationModel> fallback,
                                             Options options) {
  options.data_dir = dir;
  std::shared_ptr<const CurationModel> model = fallback;
  if (fs::exists(dir / kCheckpointFile))
    model = std::make_shared<const CurationModel>(CurationModel::load(dir / kCheckpointFile));
  auto engine = std::make_unique<FeedEngine>(std::move(model), options);
  std::unique_lock lock(engine->mutex_);

  if (const auto body = read_log_body(dir / "posts.log", kPostLogTag); !body.empty()) {
    std::istringstream in(body);
    for (auto& p : read_posts(in)) {
      engine->community_posts_[p.community].push_back(p.post_id);
      engine->posts_.emplace(p.post_id, std::move(p));
    }
  }
  if (fs::exists(dir / "votes")) {
    std::vector<fs::path> logs;
    for (const auto& entry : fs::directory_iterator(dir / "votes")) logs.push_back(entry.path());
    std::sort(logs.begin(), logs.end());
    for (const auto& path : logs) {
      std::istringstream in(read_log_body(path, kVoteLogTag));
      for (const auto& v : read_votes(in)) {
        auto& slot = engine->votes_[v.post_id];
        if (auto it = slot.find(v.user_id); it != slot.end()) {
          if (v.voted_at < it->second.voted_at) continue;
          engine->stats_.remove(it->second);
        }
        slot[v.user_id] = v;
        engine->stats_.add(v);
      }
    }
  }
  if (fs::exists(dir / kConfigFile)) {
    std::ifstream in(dir / kConfigFile);
    const json j = json::parse(in);
    if (j.at("format") != "cura-communities" || j.at("version") != 1)
      throw std::runtime_error("unsupported community config file");
    for (const auto& [community, history] : j.at("communities").items())
      engine->configs_[community] = history.get<std::vector<CommunityConfig>>();
  }
  if (fs::exists(dir / kStatusFile)) {
    std::ifstream in(dir / kStatusFile);
    const json j = json::parse(in);
    if (j.at("format") != "cura-status-snapshot" || j.at("version") != 1)
      throw std::runtime_error("unsupported status snapshot");
    for (const auto& s : j.at("statuses")) {
      auto status = s.get<PostStatus>();
      engine->statuses_[status.post_id] = std::move(status);
    }
  }
  // Anything the snapshot missed or computed under an older config is re-evaluated.
  for (const auto& [community, history] : engine->configs_) {
    const auto& cfg = history.back();
    for (const auto& id : engine->community_posts_[community]) {
      auto it = engine->statuses_.find(id);
      if (it == engine->statuses_.end() || it->second.config_version != cfg.version)
        engine->statuses_[id] = engine->evaluate_locked(engine->posts_.at(id), cfg);
    }
  }
  return engine;
}

void FeedEngine::import_history(const PostCollection& posts, const VoteCollection& votes) {
  std::unique_lock lock(mutex_);
  std::set<std::string> touched;
  for (const auto& p : posts) {
    if (posts_.contains(p.post_id)) throw ValidationError("duplicate post_id '" + p.post_id + "'");
    posts_.emplace(p.post_id, p);
    community_posts_[p.community].push_back(p.post_id);
    touched.insert(p.community);
  }
  for (const auto& v : collapse_latest(votes)) {
    auto& slot = votes_[v.post_id];
    if (auto it = slot.find(v.user_id); it != slot.end()) {
      if (v.voted_at < it->second.voted_at) continue;
      stats_.remove(it->second);
    }
    slot[v.user_id] = v;
    stats_.add(v);
    if (auto pit = posts_.find(v.post_id); pit != posts_.end()) touched.insert(pit->second.community);
  }
  for (const auto& community : touched) {
    auto cit = configs_.find(community);
    if (cit == configs_.end()) continue;
    for (const auto& id : community_posts_[community]) statuses_[id] = evaluate_locked(posts_.at(id), cit->second.back());
  }
}

CommunityConfig FeedEngine::configure(CommunityConfig config) {
  std::sort(config.curators.begin(), config.curators.end());
  config.curators.erase(std::unique(config.curators.begin(), config.curators.end()), config.curators.end());
  config.validate();
  std::unique_lock lock(mutex_);
  auto& history = configs_[config.community];
  if (!history.empty() && history.back().same_settings(config)) return history.back();
  if (history.empty() || history.back().curators != config.curators) {
    if (const auto weak = under_active_locked(config); !weak.empty()) {
      std::string names;
      for (const auto& u : weak) names += (names.empty() ? "" : ", ") + u;
      if (history.empty()) configs_.erase(config.community);
      throw ValidationError("curators with fewer than " + std::to_string(config.min_curator_votes) +
                            " votes in '" + config.community + "': " + names);
    }
  }
  config.version = history.empty() ? 1 : history.back().version + 1;
  history.push_back(config);
  for (const auto& id : community_posts_[config.community]) {
    statuses_[id] = evaluate_locked(posts_.at(id), config);
  }
  if (options_.data_dir) {
    json j{{"format", "cura-communities"}, {"version", 1}, {"communities", json::object()}};
    for (const auto& [c, h] : configs_) j["communities"][c] = h;
    write_atomically(*options_.data_dir / kConfigFile, j.dump(2));
    persist_status_locked();
  }
  return config;
}

std::vector<std::string> FeedEngine::under_active_curators(const CommunityConfig& config) const {
  std::shared_lock lock(mutex_);
  return under_active_locked(config);
}

std::vector<std::string> FeedEngine::under_active_locked(const CommunityConfig& config) const {
  std::vector<std::string> out;
  for (const auto& user : config.curators) {
    std::int64_t n = 0;
    if (const auto* activity = stats_.user_activity(user))
      if (auto it = activity->by_community.find(config.community); it != activity->by_community.end())
        n = it->second.total();
    if (n < config.min_curator_votes) out.push_back(user);
  }
  return out;
}

std::optional<CommunityConfig> FeedEngine::config(const std::string& community) const {
  std::shared_lock lock(mutex_);
  auto it = configs_.find(community);
  if (it == configs_.end()) return std::nullopt;
  return it->second.back();
}

std::vector<CommunityConfig> FeedEngine::config_history(const std::string& community) const {
  std::shared_lock lock(mutex_);
  auto it = configs_.find(community);
  return it == configs_.end() ? std::vector<CommunityConfig>{} : it->second;
}

PostStatus FeedEngine::evaluate_locked(const PostRecord& post, const CommunityConfig& config) const {
  static const PostVotes kNoVotes;
  auto vit = votes_.find(post.post_id);
  const auto rr = curator_upvote_rate(post, vit == votes_.end() ? kNoVotes : vit->second, *model_, config);
  PostStatus s;
  s.post_id = post.post_id;
  s.community = post.community;
  s.curator_upvote_rate = rr.rate;
  s.stage = route_post(rr.rate, config.curation_threshold);
  s.breakdown = rr.breakdown;
  s.last_evaluated_at = now();
  s.config_version = config.version;
  return s;
}

PostStatus FeedEngine::on_submit(const PostRecord& post) {
  std::unique_lock lock(mutex_);
  if (posts_.contains(post.post_id)) throw ValidationError("duplicate post_id '" + post.post_id + "'");
  if (post.community.empty() || post.author_id.empty()) throw ValidationError("post needs a community and an author");
  posts_.emplace(post.post_id, post);
  community_posts_[post.community].push_back(post.post_id);
  if (options_.data_dir) {
    const auto path = *options_.data_dir / "posts.log";
    if (!fs::exists(path)) append_log_locked("posts.log", std::string(kPostLogTag) + "\n" +
                                                              "post_id,author_id,community,created_at,nsfw,url_domain,text\n");
    append_log_locked("posts.log", post_row(post));
  }
  // The author's own upvote is the post's first vote.
  return apply_vote_locked({post.author_id, post.post_id, Direction::Up, post.created_at, post.community}, true);
}

PostStatus FeedEngine::on_new_vote(VoteRecord vote) {
  std::unique_lock lock(mutex_);
  return apply_vote_locked(std::move(vote), true);
}

PostStatus FeedEngine::apply_vote_locked(VoteRecord vote, bool log_vote) {
  auto pit = posts_.find(vote.post_id);
  if (pit == posts_.end()) throw NotFoundError("unknown post '" + vote.post_id + "'");
  const PostRecord& post = pit->second;
  vote.community = post.community;
  auto cit = configs_.find(post.community);

  auto& slot = votes_[vote.post_id];
  auto existing = slot.find(vote.user_id);
  const bool unchanged = existing != slot.end() && (existing->second.direction == vote.direction ||
                                                    vote.voted_at < existing->second.voted_at);
  if (unchanged) {
    // Replays and out-of-date votes leave everything as it was.
    if (cit == configs_.end()) return unconfigured(post);
    auto sit = statuses_.find(post.post_id);
    if (sit != statuses_.end()) return sit->second;
    return statuses_[post.post_id] = evaluate_locked(post, cit->second.back());
  }
  if (existing != slot.end()) stats_.remove(existing->second);
  slot[vote.user_id] = vote;
  stats_.add(vote);
  if (log_vote && options_.data_dir) {
    const auto name = "votes/" + file_safe(post.community) + ".log";
    if (!fs::exists(*options_.data_dir / name))
      append_log_locked(name, std::string(kVoteLogTag) + "\nuser_id,post_id,direction,voted_at,community\n");
    append_log_locked(name, vote_row(vote));
  }

  if (options_.finetune_on_vote) {
    const auto& hp = model_->hyperparams();
    const double weight = hp.finetune_weighting == FinetuneWeighting::Recomputed
                              ? compute_weight(vote, stats_, hp.downvote_weight)
                              : 1.0;
    auto next = std::make_shared<CurationModel>(*model_);
    if (next->finetune_step(next->serialize(vote.user_id, post), vote.direction, weight, hp.finetune_learning_rate) ==
        StepOutcome::Applied)
      model_ = std::move(next);
    if (options_.data_dir && options_.checkpoint_every > 0 && ++votes_since_checkpoint_ >= options_.checkpoint_every) {
      model_->save(*options_.data_dir / kCheckpointFile);
      persist_status_locked();
      votes_since_checkpoint_ = 0;
    }
  }

  if (cit == configs_.end()) return unconfigured(post);
  auto status = evaluate_locked(post, cit->second.back());
  status.last_evaluated_at = vote.voted_at;
  statuses_[post.post_id] = status;
  return status;
}

PostStatus FeedEngine::status(const std::string& post_id) const {
  std::shared_lock lock(mutex_);
  auto pit = posts_.find(post_id);
  if (pit == posts_.end()) throw NotFoundError("unknown post '" + post_id + "'");
  auto it = statuses_.find(post_id);
  if (it == statuses_.end()) throw NotFoundError("community '" + pit->second.community + "' is not configured");
  return it->second;
}

std::vector<PostStatus> FeedEngine::statuses(const std::string& community) const {
  std::shared_lock lock(mutex_);
  std::vector<PostStatus> out;
  if (auto cit = community_posts_.find(community); cit != community_posts_.end())
    for (const auto& id : cit->second)
      if (auto it = statuses_.find(id); it != statuses_.end()) out.push_back(it->second);
  return out;
}

std::vector<FeedEntry> FeedEngine::generate_feed(const std::string& community, std::optional<Stage> stage,
                                                 std::size_t limit) const {
  std::shared_lock lock(mutex_);
  std::vector<FeedEntry> entries;
  if (auto cit = community_posts_.find(community); cit != community_posts_.end()) {
    for (const auto& id : cit->second) {
      auto it = statuses_.find(id);
      if (it == statuses_.end() || (stage && it->second.stage != *stage)) continue;
      entries.push_back({id, it->second.curator_upvote_rate, posts_.at(id).created_at});
    }
  }
  return rank_feed(std::move(entries), limit);
}

std::vector<FeedEntry> FeedEngine::broadcast_feed(const std::string& community, std::size_t limit) const {
  std::shared_lock lock(mutex_);
  std::vector<PostRecord> posts;
  VoteCollection votes;
  if (auto cit = community_posts_.find(community); cit != community_posts_.end()) {
    for (const auto& id : cit->second) {
      posts.push_back(posts_.at(id));
      if (auto vit = votes_.find(id); vit != votes_.end())
        for (const auto& [user, v] : vit->second) votes.push_back(v);
    }
  }
  return cura::broadcast_feed(posts, votes, limit);
}

std::vector<PostStatus> FeedEngine::preview(const CommunityConfig& config,
                                            const std::vector<std::string>& post_ids) const {
  config.validate();
  std::shared_lock lock(mutex_);
  std::vector<PostStatus> out;
  out.reserve(post_ids.size());
  for (const auto& id : post_ids) {
    auto it = posts_.find(id);
    if (it == posts_.end()) throw NotFoundError("unknown post '" + id + "'");
    out.push_back(evaluate_locked(it->second, config));
  }
  return out;
}

void FeedEngine::refresh(const std::string& community) {
  std::unique_lock lock(mutex_);
  auto cit = configs_.find(community);
  if (cit == configs_.end()) throw NotFoundError("community '" + community + "' is not configured");
  for (const auto& id : community_posts_[community]) statuses_[id] = evaluate_locked(posts_.at(id), cit->second.back());
}

std::shared_ptr<const CurationModel> FeedEngine::model() const {
  std::shared_lock lock(mutex_);
  return model_;
}

std::optional<PostRecord> FeedEngine::post(const std::string& post_id) const {
  std::shared_lock lock(mutex_);
  auto it = posts_.find(post_id);
  if (it == posts_.end()) return std::nullopt;
  return it->second;
}

std::vector<PostRecord> FeedEngine::posts(const std::string& community) const {
  std::shared_lock lock(mutex_);
  std::vector<PostRecord> out;
  if (auto cit = community_posts_.find(community); cit != community_posts_.end())
    for (const auto& id : cit->second) out.push_back(posts_.at(id));
  return out;
}

PostVotes FeedEngine::votes_on(const std::string& post_id) const {
  std::shared_lock lock(mutex_);
  auto it = votes_.find(post_id);
  return it == votes_.end() ? PostVotes{} : it->second;
}

VoteStats FeedEngine::stats() const {
  std::shared_lock lock(mutex_);
  return stats_;
}

std::vector<std::string> FeedEngine::communities() const {
  std::shared_lock lock(mutex_);
  std::set<std::string> out;
  for (const auto& [c, ids] : community_posts_) out.insert(c);
  for (const auto& [c, h] : configs_) out.insert(c);
  return {out.begin(), out.end()};
}

std::string FeedEngine::state_hash() const {
  std::shared_lock lock(mutex_);
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= 0xff;
    h *= 1099511628211ULL;
  };
  for (const auto& [c, history] : configs_) mix(json(history).dump());
  std::vector<std::string> ids;
  for (const auto& [id, p] : posts_) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  for (const auto& id : ids) {
    mix(post_row(posts_.at(id)));
    if (auto vit = votes_.find(id); vit != votes_.end())
      for (const auto& [user, v] : vit->second) mix(vote_row(v));
    if (auto sit = statuses_.find(id); sit != statuses_.end()) mix(json(sit->second).dump());
  }
  mix(model_->fingerprint());
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

void FeedEngine::flush() {
  std::unique_lock lock(mutex_);
  if (!options_.data_dir) return;
  model_->save(*options_.data_dir / kCheckpointFile);
  persist_status_locked();
  votes_since_checkpoint_ = 0;
}

void FeedEngine::persist_status_locked() const {
  if (!options_.data_dir) return;
  std::vector<std::string> ids;
  for (const auto& [id, s] : statuses_) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  json list = json::array();
  for (const auto& id : ids) list.push_back(statuses_.at(id));
  write_atomically(*options_.data_dir / kStatusFile,
                   json{{"format", "cura-status-snapshot"}, {"version", 1}, {"statuses", list}}.dump());
}

void FeedEngine::append_log_locked(const std::string& file, const std::string& line) const {
  std::ofstream out(*options_.data_dir / file, std::ios::app);
  if (!out) throw std::runtime_error("cannot append to " + file);
  out << line;
  out.flush();
}

}  // namespace cura
