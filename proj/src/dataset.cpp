#include "cura/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <unordered_set>

#include "cura/csv.hpp"

namespace cura {

namespace {

const std::vector<std::string> kVoteHeader{"user_id", "post_id", "direction", "voted_at", "community"};
const std::vector<std::string> kPostHeader{"post_id", "author_id", "community", "created_at", "nsfw", "url_domain", "text"};

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "True" || s == "1") return true;
  if (s == "false" || s == "False" || s == "0" || s.empty()) return false;
  throw std::invalid_argument("expected true/false, got '" + s + "'");
}

void check_header(csv::Reader& reader, std::vector<std::string>& row, const std::vector<std::string>& expected,
                  const char* what) {
  if (!reader.next(row)) throw ParseError(std::string("empty ") + what + " file", 1);
  if (row != expected) {
    std::string want;
    for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
    throw ParseError(std::string("bad ") + what + " header, expected " + want, reader.line());
  }
}

}  // namespace

VoteCollection read_votes(std::istream& in) {
  csv::Reader reader(in);
  std::vector<std::string> row;
  check_header(reader, row, kVoteHeader, "votes");
  VoteCollection votes;
  while (reader.next(row)) {
    if (row.size() != kVoteHeader.size())
      throw ParseError("expected 5 fields, got " + std::to_string(row.size()), reader.line());
    try {
      if (row[0].empty() || row[1].empty()) throw std::invalid_argument("empty user_id or post_id");
      votes.push_back({row[0], row[1], parse_direction(row[2]), parse_iso8601(row[3]), row[4]});
    } catch (const std::invalid_argument& e) {
      throw ParseError(e.what(), reader.line());
    }
  }
  return votes;
}

PostCollection read_posts(std::istream& in) {
  csv::Reader reader(in);
  std::vector<std::string> row;
  check_header(reader, row, kPostHeader, "posts");
  PostCollection posts;
  std::unordered_set<std::string> seen;
  while (reader.next(row)) {
    if (row.size() != kPostHeader.size())
      throw ParseError("expected 7 fields, got " + std::to_string(row.size()), reader.line());
    try {
      if (row[0].empty()) throw std::invalid_argument("empty post_id");
      if (!seen.insert(row[0]).second) throw std::invalid_argument("duplicate post_id '" + row[0] + "'");
      posts.push_back({row[0], row[1], row[2], parse_iso8601(row[3]), parse_bool(row[4]), row[5], row[6]});
    } catch (const std::invalid_argument& e) {
      throw ParseError(e.what(), reader.line());
    }
  }
  return posts;
}

void write_votes(std::ostream& out, const VoteCollection& votes) {
  csv::write_row(out, kVoteHeader);
  for (const auto& v : votes)
    csv::write_row(out, {v.user_id, v.post_id, std::string(to_string(v.direction)), format_iso8601(v.voted_at),
                         v.community});
}

void write_posts(std::ostream& out, const PostCollection& posts) {
  csv::write_row(out, kPostHeader);
  for (const auto& p : posts)
    csv::write_row(out, {p.post_id, p.author_id, p.community, format_iso8601(p.created_at),
                         p.nsfw ? "true" : "false", p.url_domain, p.text});
}

Corpus load_corpus(const std::filesystem::path& votes_path, const std::filesystem::path& posts_path) {
  std::ifstream vin(votes_path);
  if (!vin) throw std::runtime_error("cannot open votes file " + votes_path.string());
  std::ifstream pin(posts_path);
  if (!pin) throw std::runtime_error("cannot open posts file " + posts_path.string());

  Corpus corpus;
  corpus.posts = read_posts(pin);
  corpus.votes = collapse_latest(read_votes(vin), &corpus.duplicates_collapsed);
  std::unordered_set<std::string> ids;
  for (const auto& p : corpus.posts) ids.insert(p.post_id);
  for (const auto& v : corpus.votes)
    if (!ids.contains(v.post_id)) corpus.orphans.push_back(v);
  return corpus;
}

VoteCollection collapse_latest(const VoteCollection& votes, std::size_t* collapsed) {
  std::unordered_map<std::string, std::unordered_map<std::string, std::size_t>> latest;
  for (std::size_t i = 0; i < votes.size(); ++i) {
    auto& slot = latest[votes[i].user_id];
    auto [it, inserted] = slot.try_emplace(votes[i].post_id, i);
    if (!inserted && votes[i].voted_at >= votes[it->second].voted_at) it->second = i;
  }
  std::vector<char> keep(votes.size(), 0);
  for (const auto& [user, posts] : latest)
    for (const auto& [post, idx] : posts) keep[idx] = 1;
  VoteCollection out;
  out.reserve(votes.size());
  for (std::size_t i = 0; i < votes.size(); ++i)
    if (keep[i]) out.push_back(votes[i]);
  if (collapsed) *collapsed = votes.size() - out.size();
  return out;
}

PostIndex index_posts(const PostCollection& posts) {
  PostIndex index;
  index.reserve(posts.size());
  for (const auto& p : posts) index.emplace(p.post_id, p);
  return index;
}

VoteCollection trainable_votes(const VoteCollection& votes, const PostIndex& posts) {
  VoteCollection out;
  std::copy_if(votes.begin(), votes.end(), std::back_inserter(out),
               [&](const VoteRecord& v) { return posts.contains(v.post_id); });
  return out;
}

DatasetSplit split_dataset(const VoteCollection& votes, double ratio, SplitMode mode, std::uint64_t seed) {
  if (votes.empty()) throw ValidationError("cannot split an empty vote collection");
  if (!(ratio > 0.0 && ratio < 1.0)) throw ValidationError("split ratio must lie strictly between 0 and 1");

  std::mt19937_64 rng(seed);
  DatasetSplit split;
  split.mode = mode;
  split.seed = seed;
  const auto target = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(votes.size())));

  if (mode == SplitMode::ByVote) {
    std::vector<std::size_t> order(votes.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<char> in_train(votes.size(), 0);
    for (std::size_t i = 0; i < target; ++i) in_train[order[i]] = 1;
    for (std::size_t i = 0; i < votes.size(); ++i) (in_train[i] ? split.train : split.test).push_back(votes[i]);
    return split;
  }

  std::map<std::string, std::size_t> per_post;  // ordered for seed-stable shuffling
  for (const auto& v : votes) ++per_post[v.post_id];
  std::vector<std::pair<std::string, std::size_t>> posts(per_post.begin(), per_post.end());
  std::shuffle(posts.begin(), posts.end(), rng);

  std::unordered_set<std::string> train_posts;
  std::size_t train_count = 0;
  for (const auto& [post, count] : posts) {
    const auto with = static_cast<long long>(train_count + count) - static_cast<long long>(target);
    const auto without = static_cast<long long>(train_count) - static_cast<long long>(target);
    if (std::llabs(with) <= std::llabs(without)) {
      train_posts.insert(post);
      train_count += count;
    }
  }
  for (const auto& v : votes) (train_posts.contains(v.post_id) ? split.train : split.test).push_back(v);
  return split;
}

VoteCollection build_balanced_test(const VoteCollection& test, std::uint64_t seed) {
  std::map<std::string, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> by_community;
  for (std::size_t i = 0; i < test.size(); ++i) {
    auto& [ups, downs] = by_community[test[i].community];
    (test[i].direction == Direction::Up ? ups : downs).push_back(i);
  }
  std::mt19937_64 rng(seed);
  std::vector<char> keep(test.size(), 0);
  for (auto& [community, sides] : by_community) {
    auto& [ups, downs] = sides;
    const std::size_t n = std::min(ups.size(), downs.size());
    // Upvotes are the majority in practice; whichever side is larger is sampled down.
    std::shuffle(ups.begin(), ups.end(), rng);
    std::shuffle(downs.begin(), downs.end(), rng);
    for (std::size_t i = 0; i < n; ++i) keep[ups[i]] = keep[downs[i]] = 1;
  }
  VoteCollection out;
  for (std::size_t i = 0; i < test.size(); ++i)
    if (keep[i]) out.push_back(test[i]);
  return out;
}

VoteStats::VoteStats(const VoteCollection& votes) {
  for (const auto& v : votes) add(v);
}

void VoteStats::add(const VoteRecord& vote) {
  auto& user = users_[vote.user_id];
  ++user.overall.of(vote.direction);
  ++user.by_community[vote.community].of(vote.direction);
  ++posts_[vote.post_id].of(vote.direction);
  ++total_;
}

void VoteStats::remove(const VoteRecord& vote) {
  auto uit = users_.find(vote.user_id);
  auto pit = posts_.find(vote.post_id);
  if (uit == users_.end() || pit == posts_.end() || uit->second.overall.of(vote.direction) == 0 ||
      pit->second.of(vote.direction) == 0)
    throw std::logic_error("removing a vote that was never counted");
  auto& user = uit->second;
  --user.overall.of(vote.direction);
  auto cit = user.by_community.find(vote.community);
  if (cit != user.by_community.end()) {
    --cit->second.of(vote.direction);
    if (cit->second.total() == 0) user.by_community.erase(cit);
  }
  if (user.overall.total() == 0) users_.erase(uit);
  --pit->second.of(vote.direction);
  if (pit->second.total() == 0) posts_.erase(pit);
  --total_;
}

DirectionCounts VoteStats::user(const std::string& user_id) const {
  auto it = users_.find(user_id);
  return it == users_.end() ? DirectionCounts{} : it->second.overall;
}

const UserActivity* VoteStats::user_activity(const std::string& user_id) const {
  auto it = users_.find(user_id);
  return it == users_.end() ? nullptr : &it->second;
}

DirectionCounts VoteStats::post(const std::string& post_id) const {
  auto it = posts_.find(post_id);
  return it == posts_.end() ? DirectionCounts{} : it->second;
}

double activity_concentration(const VoteStats& stats, double top_fraction) {
  if (stats.total_votes() == 0) return 0.0;
  std::vector<std::int64_t> counts;
  counts.reserve(stats.users().size());
  for (const auto& [id, activity] : stats.users()) counts.push_back(activity.overall.total());
  std::sort(counts.begin(), counts.end(), std::greater<>());
  const auto top = static_cast<std::size_t>(std::ceil(top_fraction * static_cast<double>(counts.size())));
  const auto held = std::accumulate(counts.begin(), counts.begin() + static_cast<std::ptrdiff_t>(top), std::int64_t{0});
  return static_cast<double>(held) / static_cast<double>(stats.total_votes());
}

}  // namespace cura
