#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "cura/core.hpp"
#include "cura/dataset.hpp"
#include "cura/model.hpp"

namespace cura {

enum class Stage { Frontstage, Backstage };
enum class BreakdownSource { ActualUp, ActualDown, PredictedUp, PredictedDown };

std::string_view to_string(Stage s);
std::string_view to_string(BreakdownSource s);
Stage parse_stage(std::string_view s);

struct CommunityConfig {
  std::string community;
  std::vector<std::string> curators;  ///< sorted, unique
  double curation_threshold = 0.5;    ///< theta_c
  double confidence_threshold = 0.5;  ///< theta_p
  int min_curator_votes = 5;
  std::uint64_t version = 0;

  /// Same curators and thresholds (ignores the version number).
  bool same_settings(const CommunityConfig& o) const {
    return community == o.community && curators == o.curators && curation_threshold == o.curation_threshold &&
           confidence_threshold == o.confidence_threshold && min_curator_votes == o.min_curator_votes;
  }
  void validate() const;
};

struct CuratorEntry {
  std::string curator;
  BreakdownSource source = BreakdownSource::PredictedDown;
  std::optional<double> confidence;  ///< model p, only for predicted entries
  friend bool operator==(const CuratorEntry&, const CuratorEntry&) = default;
};
using CuratorBreakdown = std::vector<CuratorEntry>;

struct PostStatus {
  std::string post_id;
  std::string community;
  double curator_upvote_rate = 0;
  Stage stage = Stage::Backstage;
  CuratorBreakdown breakdown;
  Timestamp last_evaluated_at{};
  std::uint64_t config_version = 0;
  bool stale = false;

  /// Equality of the routing outcome, ignoring the evaluation time.
  bool same_outcome(const PostStatus& o) const {
    return post_id == o.post_id && curator_upvote_rate == o.curator_upvote_rate && stage == o.stage &&
           breakdown == o.breakdown && config_version == o.config_version;
  }
};

struct FeedEntry {
  std::string post_id;
  double score = 0;  ///< curator upvote rate, or upvotes - downvotes for broadcast feeds
  Timestamp created_at{};
  friend bool operator==(const FeedEntry&, const FeedEntry&) = default;
};

/// Actual votes on one post, keyed by user.
using PostVotes = std::map<std::string, VoteRecord>;

struct RateResult {
  double rate = 0;
  CuratorBreakdown breakdown;
};

/// Share of curators who upvoted, or (when they have not voted) are predicted
/// to upvote with p >= theta_p. Actual votes always override predictions.
RateResult curator_upvote_rate(const PostRecord& post, const PostVotes& votes, const CurationModel& model,
                               const CommunityConfig& config);

/// FRONTSTAGE iff rate >= theta_c.
inline Stage route_post(double rate, double curation_threshold) {
  return rate >= curation_threshold ? Stage::Frontstage : Stage::Backstage;
}

/// Descending by score, newer posts first on ties, then by id; truncated to `limit`.
std::vector<FeedEntry> rank_feed(std::vector<FeedEntry> entries, std::size_t limit);

/// Broadcast ranking by upvotes - downvotes over a post inventory.
std::vector<FeedEntry> broadcast_feed(const std::vector<PostRecord>& posts, const VoteCollection& votes,
                                      std::size_t limit);

struct FeedEngineOptions {
  bool finetune_on_vote = true;
  /// Persist the vote log, post log, configs and status snapshots here.
  std::optional<std::filesystem::path> data_dir;
  /// Save the finetuned checkpoint every this many applied votes (0: only on flush).
  std::size_t checkpoint_every = 200;
};

/// Stateful curation engine for a set of communities sharing one model.
///
/// Every mutation (vote, submission, configuration) takes an exclusive lock;
/// reads take a shared lock, so callers always observe a consistent snapshot.
/// The model is held through a shared pointer to an immutable checkpoint; a
/// finetune step builds a new checkpoint and swaps the pointer.
class FeedEngine {
 public:
  using Options = FeedEngineOptions;

  FeedEngine(std::shared_ptr<const CurationModel> model, Options options);
  FeedEngine(std::shared_ptr<const CurationModel> model) : FeedEngine(std::move(model), Options{}) {}
  ~FeedEngine();
  FeedEngine(const FeedEngine&) = delete;
  FeedEngine& operator=(const FeedEngine&) = delete;

  /// Reopens an engine from `data_dir`: loads the saved checkpoint when present
  /// (else `fallback`), replays the post and vote logs, and restores configs
  /// and the status snapshot.
  static std::unique_ptr<FeedEngine> open(const std::filesystem::path& data_dir,
                                          std::shared_ptr<const CurationModel> fallback, Options options = Options{});

  /// Bulk import of historical posts and votes: no finetuning, nothing logged.
  void import_history(const PostCollection& posts, const VoteCollection& votes);

  /// Installs a configuration. Identical settings are a no-op that keeps the
  /// current version; otherwise the version increments and every post in the
  /// community is re-evaluated.
  /// Throws ValidationError (naming any curator with fewer than
  /// min_curator_votes votes in the community) when the curator set changes.
  CommunityConfig configure(CommunityConfig config);
  /// Curators in `config` with fewer than min_curator_votes votes in its community.
  std::vector<std::string> under_active_curators(const CommunityConfig& config) const;
  std::optional<CommunityConfig> config(const std::string& community) const;
  std::vector<CommunityConfig> config_history(const std::string& community) const;

  PostStatus on_submit(const PostRecord& post);
  PostStatus on_new_vote(VoteRecord vote);

  PostStatus status(const std::string& post_id) const;
  std::vector<PostStatus> statuses(const std::string& community) const;
  std::vector<FeedEntry> generate_feed(const std::string& community, std::optional<Stage> stage,
                                       std::size_t limit) const;
  std::vector<FeedEntry> broadcast_feed(const std::string& community, std::size_t limit) const;

  /// Evaluates `post_ids` under a hypothetical config without storing anything
  /// or finetuning. Unknown ids throw NotFoundError.
  std::vector<PostStatus> preview(const CommunityConfig& config, const std::vector<std::string>& post_ids) const;

  /// Re-evaluates every post of a community against the current model.
  void refresh(const std::string& community);

  std::shared_ptr<const CurationModel> model() const;
  std::optional<PostRecord> post(const std::string& post_id) const;
  std::vector<PostRecord> posts(const std::string& community) const;
  PostVotes votes_on(const std::string& post_id) const;
  /// Counts over every vote the engine knows (imported and live).
  VoteStats stats() const;
  std::vector<std::string> communities() const;

  /// Digest over configs, votes, statuses and the model fingerprint.
  std::string state_hash() const;
  /// Writes the checkpoint and status snapshot to the data directory.
  void flush();

 private:
  std::vector<std::string> under_active_locked(const CommunityConfig& config) const;
  PostStatus evaluate_locked(const PostRecord& post, const CommunityConfig& config) const;
  PostStatus apply_vote_locked(VoteRecord vote, bool log);
  void persist_status_locked() const;
  void append_log_locked(const std::string& file, const std::string& line) const;

  mutable std::shared_mutex mutex_;
  std::shared_ptr<const CurationModel> model_;
  Options options_;
  std::unordered_map<std::string, PostRecord> posts_;
  std::unordered_map<std::string, std::vector<std::string>> community_posts_;
  std::unordered_map<std::string, PostVotes> votes_;
  VoteStats stats_;
  std::map<std::string, std::vector<CommunityConfig>> configs_;
  std::unordered_map<std::string, PostStatus> statuses_;
  std::size_t votes_since_checkpoint_ = 0;
};

}  // namespace cura
