#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cura/dataset.hpp"
#include "cura/feed.hpp"
#include "cura/model.hpp"

namespace cura {

/// One scored test vote.
struct ScoredVote {
  VoteRecord vote;
  double p = 0.5;  ///< predicted probability of an upvote
  bool correct(double threshold = 0.5) const { return decide(p, threshold) == vote.direction; }
};

struct CommunityAccuracy {
  std::string community;
  std::size_t count = 0;
  double accuracy = 0;
};

struct MetricsReport {
  std::size_t count = 0;
  double accuracy = 0;
  /// Mean of per-class recalls over the classes present.
  double balanced_accuracy = 0;
  /// ROC AUC with upvotes as positives; absent when only one class occurs.
  std::optional<double> auc;
  /// counts[actual][predicted], index 0 = up, 1 = down.
  std::int64_t counts[2][2] = {{0, 0}, {0, 0}};
  /// Row-normalised rates; a row with no votes stays zero.
  double rates[2][2] = {{0, 0}, {0, 0}};
  std::vector<CommunityAccuracy> per_community;

  double up_recall() const { return rates[0][0]; }
  double down_recall() const { return rates[1][1]; }
};

/// Threshold-0.5 metrics over scored votes. Throws std::invalid_argument when empty.
MetricsReport compute_metrics(const std::vector<ScoredVote>& scored, double threshold = 0.5);

/// Mann-Whitney form of ROC AUC with mid-ranks for ties. Throws when a class is missing.
double roc_auc(const std::vector<double>& scores, const std::vector<bool>& positive);

/// Scores every test vote whose post is known; orphans are skipped.
std::vector<ScoredVote> score_votes(const CurationModel& model, const VoteCollection& test, const PostIndex& posts);

/// Leave-one-out majority of the other votes on each post in `context`.
std::vector<ScoredVote> score_majority_baseline(const VoteCollection& test, const VoteCollection& context);

MetricsReport eval_accuracy(const CurationModel& model, const VoteCollection& test, const PostIndex& posts);

struct CurveBin {
  std::string label;
  double lo = 0;  ///< inclusive
  double hi = 0;  ///< exclusive, except for the last bin
  std::size_t count = 0;
  double accuracy = 0;
  /// Mean confidence in the predicted direction over accurate predictions only.
  std::optional<double> confidence;
};

struct CurveReport {
  std::vector<CurveBin> bins;
  std::size_t total = 0;
  /// Inputs that could not be placed (e.g. skipped trials).
  std::size_t skipped = 0;
};

/// Confidence in the predicted direction: p for an up decision, 1 - p otherwise.
inline double decision_confidence(double p, double threshold = 0.5) {
  return decide(p, threshold) == Direction::Up ? p : 1.0 - p;
}

/// Default bin edges over a user's training vote count: 0, 1, 2, 3, 5, 10, 20, 50, 100 and beyond.
std::vector<double> default_activity_edges();
/// Default edges over the same-direction fraction: strict minority below 0.5, then majority bins.
std::vector<double> default_agreement_edges();

/// Groups scored votes by the voter's training vote count. `edges` must be
/// strictly increasing; the last bin is closed on the right.
CurveReport accuracy_by_user_activity(const std::vector<ScoredVote>& scored, const VoteStats& train_stats,
                                      const std::vector<double>& edges = default_activity_edges());

/// Fraction of votes on the vote's post (itself included) in `context` that share its direction.
std::map<std::string, DirectionCounts> post_direction_counts(const VoteCollection& context);
double agreement_fraction(const VoteRecord& vote, const std::map<std::string, DirectionCounts>& counts);

CurveReport accuracy_by_agreement(const std::vector<ScoredVote>& scored, const VoteCollection& context,
                                  const std::vector<double>& edges = default_agreement_edges());

/// Scored votes whose same-direction fraction is strictly below one half.
std::vector<ScoredVote> strict_minority(const std::vector<ScoredVote>& scored, const VoteCollection& context);

/// Target predictions over one trial.
struct PeerTrace {
  std::vector<double> p;  ///< prediction for the target after k peer votes
};

struct PeerExperimentOptions {
  std::size_t max_peers = 10;
  std::size_t trials = 200;
  std::uint64_t seed = 1;
  /// Only posts with at least this many other votes are eligible targets.
  std::size_t min_peers = 1;
  /// Overrides the checkpoint's finetune learning rate.
  std::optional<double> learning_rate;
};

struct PeerExperimentResult {
  CurveReport curve;  ///< bin k is the state after k peer votes
  std::vector<VoteRecord> targets;
  std::vector<PeerTrace> traces;
};

/// Picks `trials` target votes (with replacement across posts, seeded) from
/// test votes whose post has at least `min_peers` other test votes.
/// `skipped` counts test votes on posts that fall short.
std::vector<VoteRecord> select_targets(const VoteCollection& test, const PostIndex& posts, std::size_t trials,
                                       std::size_t min_peers, std::uint64_t seed, std::size_t* skipped = nullptr);

/// Feeds the other test votes on each target's post to a fresh copy of the
/// model one by one, finetuning after each, and records the target
/// prediction after k = 0..max_peers peers. Finetune weights use `stats`
/// updated with each peer vote.
PeerExperimentResult peer_vote_experiment(const CurationModel& model, const VoteCollection& test,
                                          const PostIndex& posts, const VoteStats& stats,
                                          const PeerExperimentOptions& options);
/// Same, over explicit targets (for paired comparisons).
PeerExperimentResult peer_vote_experiment(const CurationModel& model, const std::vector<VoteRecord>& targets,
                                          const VoteCollection& test, const PostIndex& posts, const VoteStats& stats,
                                          const PeerExperimentOptions& options);

using VotingVector = std::map<std::string, int>;  ///< post_id -> +1 / -1

/// Latest vote per (user, post) as +1 / -1.
std::map<std::string, VotingVector> voting_vectors(const VoteCollection& votes);

/// Dot product over shared posts divided by the norms; 0 when either is
/// empty or nothing is shared. Throws std::invalid_argument when both are empty.
double cosine_similarity(const VotingVector& u, const VotingVector& v);

enum class PeerMode { Support, Adversarial };
std::string_view to_string(PeerMode m);
PeerMode parse_peer_mode(std::string_view s);

/// The `k` users most similar to `user` by cosine similarity (ties by id),
/// excluding the user and anyone with an empty vector.
std::vector<std::string> most_similar_users(const std::string& user,
                                            const std::map<std::string, VotingVector>& vectors, std::size_t k);

/// Synthetic peer votes from the most similar users, all agreeing with
/// (SUPPORT) or opposing (ADVERSARIAL) the target's actual vote.
/// Targets whose user has an empty vector are skipped.
PeerExperimentResult similar_peer_experiment(const CurationModel& model, const std::vector<VoteRecord>& targets,
                                             const PostIndex& posts, const std::map<std::string, VotingVector>& vectors,
                                             const VoteStats& stats, PeerMode mode,
                                             const PeerExperimentOptions& options);

/// Mann-Kendall trend test with the normal approximation.
struct TrendTest {
  double s = 0;
  double variance = 0;
  double z = 0;
  double p_increasing = 1;  ///< one-sided p-value for an increasing trend
  double p_decreasing = 1;  ///< one-sided p-value for a decreasing trend
};
TrendTest mann_kendall(const std::vector<double>& series);

/// Pearson correlation; absent when either side is constant.
std::optional<double> pearson(const std::vector<double>& a, const std::vector<double>& b);
/// Spearman correlation of two rankings of the same inventory (best first).
/// Throws std::invalid_argument when the inventories differ.
double feed_rank_correlation(const std::vector<std::string>& a, const std::vector<std::string>& b);

/// Predictions-only curator upvote rate: share of `curators` with p >= theta_p.
std::vector<double> predicted_rates(const CurationModel& model, const std::vector<PostRecord>& inventory,
                                    const std::vector<std::string>& curators, double confidence_threshold);

struct DivergenceReport {
  std::vector<std::string> groups;
  std::vector<std::vector<std::optional<double>>> correlation;
  std::vector<std::vector<double>> rates;  ///< per group, per inventory post
};

/// Pairwise Pearson correlation of group upvote rates. Needs at least two groups.
DivergenceReport curator_group_divergence(const CurationModel& model, const std::vector<PostRecord>& inventory,
                                          const std::map<std::string, std::vector<std::string>>& groups,
                                          double confidence_threshold);

struct SweepPoint {
  double curation_threshold = 0;
  std::vector<std::string> frontstage;  ///< sorted post ids
};

/// Frontstage sets under each curation threshold. Thresholds must be sorted
/// ascending. Actual curator votes in `votes` override predictions.
std::vector<SweepPoint> threshold_sweep(const CurationModel& model, const std::vector<PostRecord>& inventory,
                                        const std::map<std::string, PostVotes>& votes,
                                        const std::vector<std::string>& curators, double confidence_threshold,
                                        const std::vector<double>& thresholds);

/// Users who voted in `source` and, in `affinity`, cast at least `min_votes`
/// votes with an upvote share of at least `min_upvote_rate`.
std::vector<std::string> select_curator_group(const VoteCollection& votes, const std::string& source,
                                              const std::string& affinity, int min_votes = 5,
                                              double min_upvote_rate = 0.7);
/// `n` users drawn uniformly (seeded) from those who voted in `community`.
std::vector<std::string> random_curator_group(const VoteCollection& votes, const std::string& community,
                                              std::size_t n, std::uint64_t seed);

/// Target and distractor feed definitions for the fifteen-pair feed comparison study.
struct FeedSpec {
  std::vector<std::string> communities;  ///< one, or several for a pooled super-community
  std::optional<std::string> curated_by;  ///< affinity community; absent means broadcast
};
struct FeedPair {
  FeedSpec target;
  FeedSpec distractor;
};
std::vector<FeedPair> feed_study_pairs();

}  // namespace cura
