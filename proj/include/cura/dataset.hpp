#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "cura/core.hpp"

namespace cura {

/// Result of reading a votes/posts pair from disk.
struct Corpus {
  VoteCollection votes;  ///< deduplicated (latest vote per user/post wins), orphans included
  PostCollection posts;
  VoteCollection orphans;  ///< votes whose post is absent from `posts`
  std::size_t duplicates_collapsed = 0;
};

VoteCollection read_votes(std::istream& in);
PostCollection read_posts(std::istream& in);
void write_votes(std::ostream& out, const VoteCollection& votes);
void write_posts(std::ostream& out, const PostCollection& posts);

/// Loads a corpus. Malformed rows throw ParseError with the line number;
/// orphan votes are reported in `Corpus::orphans` and are not fatal.
Corpus load_corpus(const std::filesystem::path& votes_path, const std::filesystem::path& posts_path);

/// Collapses repeated (user, post) votes to the one with the latest timestamp.
/// Ties on timestamp resolve to the record that appears later in the input.
VoteCollection collapse_latest(const VoteCollection& votes, std::size_t* collapsed = nullptr);

using PostIndex = std::unordered_map<std::string, PostRecord>;
PostIndex index_posts(const PostCollection& posts);

/// Votes whose post has metadata; serialization needs the post fields.
VoteCollection trainable_votes(const VoteCollection& votes, const PostIndex& posts);

enum class SplitMode { ByVote, ByPost };

struct DatasetSplit {
  VoteCollection train;
  VoteCollection test;
  SplitMode mode = SplitMode::ByVote;
  std::uint64_t seed = 0;
};

DatasetSplit split_dataset(const VoteCollection& votes, double ratio, SplitMode mode, std::uint64_t seed);

/// Per community, keeps min(up, down) votes of each direction, sampled
/// uniformly under `seed`. In upvote-majority data only upvotes are dropped;
/// communities without downvotes drop out entirely.
VoteCollection build_balanced_test(const VoteCollection& test, std::uint64_t seed);

struct DirectionCounts {
  std::int64_t up = 0;
  std::int64_t down = 0;
  std::int64_t total() const { return up + down; }
  std::int64_t of(Direction d) const { return d == Direction::Up ? up : down; }
  std::int64_t& of(Direction d) { return d == Direction::Up ? up : down; }
  friend bool operator==(const DirectionCounts&, const DirectionCounts&) = default;
};

struct UserActivity {
  DirectionCounts overall;
  std::map<std::string, DirectionCounts> by_community;
  friend bool operator==(const UserActivity&, const UserActivity&) = default;
};

/// Vote counts per user and per post. Supports incremental updates so that the
/// loss weights can be refreshed as votes arrive.
class VoteStats {
 public:
  VoteStats() = default;
  explicit VoteStats(const VoteCollection& votes);

  void add(const VoteRecord& vote);
  /// Removes a previously added vote (used when a later vote supersedes it).
  void remove(const VoteRecord& vote);

  DirectionCounts user(const std::string& user_id) const;
  const UserActivity* user_activity(const std::string& user_id) const;
  DirectionCounts post(const std::string& post_id) const;

  const std::unordered_map<std::string, UserActivity>& users() const { return users_; }
  const std::unordered_map<std::string, DirectionCounts>& posts() const { return posts_; }
  std::int64_t total_votes() const { return total_; }

  friend bool operator==(const VoteStats&, const VoteStats&) = default;

 private:
  std::unordered_map<std::string, UserActivity> users_;
  std::unordered_map<std::string, DirectionCounts> posts_;
  std::int64_t total_ = 0;
};

inline VoteStats compute_stats(const VoteCollection& votes) { return VoteStats(votes); }

/// Share of all votes held by the most active `top_fraction` of users.
double activity_concentration(const VoteStats& stats, double top_fraction);

}  // namespace cura
