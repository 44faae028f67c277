#include "cura/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include "cura/weighting.hpp"

namespace cura {

namespace {

int index_of(Direction d) { return d == Direction::Up ? 0 : 1; }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

void check_edges(const std::vector<double>& edges) {
  if (edges.size() < 2) throw std::invalid_argument("need at least two bin edges");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1])) throw std::invalid_argument("bin edges must be strictly increasing");
}

std::string edge_label(double lo, double hi, bool last) {
  auto fmt = [](double v) {
    if (std::isinf(v)) return std::string("inf");
    std::ostringstream os;
    os << v;
    return os.str();
  };
  return "[" + fmt(lo) + "," + fmt(hi) + (last ? "]" : ")");
}

/// Bins (key, scored vote) pairs; keys outside the edges are counted as skipped.
CurveReport bin_curve(const std::vector<std::pair<double, const ScoredVote*>>& keyed, const std::vector<double>& edges) {
  check_edges(edges);
  CurveReport report;
  const std::size_t n = edges.size() - 1;
  std::vector<std::size_t> correct(n, 0);
  std::vector<double> conf(n, 0);
  report.bins.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    report.bins[i].lo = edges[i];
    report.bins[i].hi = edges[i + 1];
    report.bins[i].label = edge_label(edges[i], edges[i + 1], i + 1 == n);
  }
  for (const auto& [key, sv] : keyed) {
    if (key < edges.front() || key > edges.back()) {
      ++report.skipped;
      continue;
    }
    auto it = std::upper_bound(edges.begin(), edges.end(), key);
    std::size_t b = static_cast<std::size_t>(it - edges.begin()) - 1;
    if (b >= n) b = n - 1;
    auto& bin = report.bins[b];
    ++bin.count;
    ++report.total;
    if (sv->correct()) {
      ++correct[b];
      conf[b] += decision_confidence(sv->p);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto& bin = report.bins[i];
    if (bin.count) bin.accuracy = static_cast<double>(correct[i]) / static_cast<double>(bin.count);
    if (correct[i]) bin.confidence = conf[i] / static_cast<double>(correct[i]);
  }
  return report;
}

CurveReport trace_curve(const std::vector<VoteRecord>& targets, const std::vector<PeerTrace>& traces,
                        std::size_t max_peers, std::size_t skipped) {
  CurveReport report;
  report.skipped = skipped;
  report.total = traces.size();
  for (std::size_t k = 0; k <= max_peers; ++k) {
    CurveBin bin;
    bin.label = std::to_string(k);
    bin.lo = static_cast<double>(k);
    bin.hi = static_cast<double>(k + 1);
    std::size_t correct = 0;
    double conf = 0;
    for (std::size_t t = 0; t < traces.size(); ++t) {
      if (traces[t].p.size() <= k) continue;
      ++bin.count;
      const double p = traces[t].p[k];
      if (decide(p, 0.5) == targets[t].direction) {
        ++correct;
        conf += decision_confidence(p);
      }
    }
    if (bin.count) bin.accuracy = static_cast<double>(correct) / static_cast<double>(bin.count);
    if (correct) bin.confidence = conf / static_cast<double>(correct);
    report.bins.push_back(bin);
  }
  return report;
}

/// Runs one trial: predicts the target, then finetunes on each peer in turn.
PeerTrace run_trial(const CurationModel& model, const VoteRecord& target, const PostRecord& post,
                    const std::vector<VoteRecord>& peers, VoteStats& stats, double lr) {
  CurationModel copy = model;
  const auto& hp = model.hyperparams();
  const auto target_input = copy.serialize(target.user_id, post);
  PeerTrace trace;
  trace.p.push_back(copy.probability(target_input));
  for (const auto& peer : peers) {
    stats.add(peer);
    const double weight = hp.finetune_weighting == FinetuneWeighting::Recomputed
                              ? compute_weight(peer, stats, hp.downvote_weight)
                              : 1.0;
    copy.finetune_step(copy.serialize(peer.user_id, post), peer.direction, weight, lr);
    trace.p.push_back(copy.probability(target_input));
  }
  for (const auto& peer : peers) stats.remove(peer);
  return trace;
}

double finetune_lr(const CurationModel& model, const PeerExperimentOptions& o) {
  return o.learning_rate.value_or(model.hyperparams().finetune_learning_rate);
}

std::map<std::string, std::vector<VoteRecord>> votes_by_post(const VoteCollection& votes) {
  std::map<std::string, std::vector<VoteRecord>> out;
  for (const auto& v : collapse_latest(votes)) out[v.post_id].push_back(v);
  return out;
}

}  // namespace

double roc_auc(const std::vector<double>& scores, const std::vector<bool>& positive) {
  if (scores.size() != positive.size()) throw std::invalid_argument("scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t)
      if (positive[order[t]]) {
        pos_rank_sum += mid_rank;
        ++pos;
      }
    i = j;
  }
  const std::size_t neg = scores.size() - pos;
  if (pos == 0 || neg == 0) throw std::invalid_argument("ROC AUC needs both classes");
  const double p = static_cast<double>(pos);
  return (pos_rank_sum - p * (p + 1) / 2.0) / (p * static_cast<double>(neg));
}

MetricsReport compute_metrics(const std::vector<ScoredVote>& scored, double threshold) {
  if (scored.empty()) throw std::invalid_argument("cannot evaluate an empty test set");
  MetricsReport r;
  r.count = scored.size();
  std::map<std::string, std::pair<std::size_t, std::size_t>> by_community;
  std::vector<double> scores;
  std::vector<bool> positive;
  for (const auto& sv : scored) {
    const auto predicted = decide(sv.p, threshold);
    ++r.counts[index_of(sv.vote.direction)][index_of(predicted)];
    auto& c = by_community[sv.vote.community];
    ++c.first;
    c.second += predicted == sv.vote.direction;
    scores.push_back(sv.p);
    positive.push_back(sv.vote.direction == Direction::Up);
  }
  const auto correct = r.counts[0][0] + r.counts[1][1];
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.count);
  double recall_sum = 0;
  int classes = 0;
  for (int a = 0; a < 2; ++a) {
    const auto row = r.counts[a][0] + r.counts[a][1];
    if (row == 0) continue;
    for (int p = 0; p < 2; ++p) r.rates[a][p] = static_cast<double>(r.counts[a][p]) / static_cast<double>(row);
    recall_sum += r.rates[a][a];
    ++classes;
  }
  r.balanced_accuracy = recall_sum / classes;
  if (classes == 2) r.auc = roc_auc(scores, positive);
  for (const auto& [c, n] : by_community)
    r.per_community.push_back({c, n.first, static_cast<double>(n.second) / static_cast<double>(n.first)});
  return r;
}

std::vector<ScoredVote> score_votes(const CurationModel& model, const VoteCollection& test, const PostIndex& posts) {
  std::vector<ScoredVote> out;
  out.reserve(test.size());
  for (const auto& v : test) {
    auto it = posts.find(v.post_id);
    if (it == posts.end()) continue;
    out.push_back({v, model.probability(v.user_id, it->second)});
  }
  return out;
}

std::vector<ScoredVote> score_majority_baseline(const VoteCollection& test, const VoteCollection& context) {
  const auto counts = post_direction_counts(context);
  std::vector<ScoredVote> out;
  out.reserve(test.size());
  for (const auto& v : test) {
    DirectionCounts others;
    if (auto it = counts.find(v.post_id); it != counts.end()) others = it->second;
    if (others.of(v.direction) > 0) --others.of(v.direction);
    std::vector<Direction> observed(static_cast<std::size_t>(others.up), Direction::Up);
    observed.insert(observed.end(), static_cast<std::size_t>(others.down), Direction::Down);
    out.push_back({v, majority_baseline(observed).p});
  }
  return out;
}

MetricsReport eval_accuracy(const CurationModel& model, const VoteCollection& test, const PostIndex& posts) {
  return compute_metrics(score_votes(model, test, posts));
}

std::vector<double> default_activity_edges() {
  return {0, 1, 2, 3, 5, 10, 20, 50, 100, std::numeric_limits<double>::infinity()};
}

std::vector<double> default_agreement_edges() { return {0, 0.25, 0.5, 0.75, 1.0}; }

CurveReport accuracy_by_user_activity(const std::vector<ScoredVote>& scored, const VoteStats& train_stats,
                                      const std::vector<double>& edges) {
  std::vector<std::pair<double, const ScoredVote*>> keyed;
  keyed.reserve(scored.size());
  for (const auto& sv : scored)
    keyed.emplace_back(static_cast<double>(train_stats.user(sv.vote.user_id).total()), &sv);
  return bin_curve(keyed, edges);
}

std::map<std::string, DirectionCounts> post_direction_counts(const VoteCollection& context) {
  std::map<std::string, DirectionCounts> counts;
  for (const auto& v : collapse_latest(context)) ++counts[v.post_id].of(v.direction);
  return counts;
}

double agreement_fraction(const VoteRecord& vote, const std::map<std::string, DirectionCounts>& counts) {
  auto it = counts.find(vote.post_id);
  if (it == counts.end() || it->second.of(vote.direction) == 0) return 1.0;  // the vote alone agrees with itself
  return static_cast<double>(it->second.of(vote.direction)) / static_cast<double>(it->second.total());
}

CurveReport accuracy_by_agreement(const std::vector<ScoredVote>& scored, const VoteCollection& context,
                                  const std::vector<double>& edges) {
  const auto counts = post_direction_counts(context);
  std::vector<std::pair<double, const ScoredVote*>> keyed;
  keyed.reserve(scored.size());
  for (const auto& sv : scored) keyed.emplace_back(agreement_fraction(sv.vote, counts), &sv);
  return bin_curve(keyed, edges);
}

std::vector<ScoredVote> strict_minority(const std::vector<ScoredVote>& scored, const VoteCollection& context) {
  const auto counts = post_direction_counts(context);
  std::vector<ScoredVote> out;
  for (const auto& sv : scored)
    if (agreement_fraction(sv.vote, counts) < 0.5) out.push_back(sv);
  return out;
}

std::vector<VoteRecord> select_targets(const VoteCollection& test, const PostIndex& posts, std::size_t trials,
                                       std::size_t min_peers, std::uint64_t seed, std::size_t* skipped) {
  std::vector<VoteRecord> eligible;
  std::size_t short_posts = 0;
  for (const auto& [post_id, votes] : votes_by_post(test)) {
    if (!posts.count(post_id)) continue;
    if (votes.size() < std::max<std::size_t>(min_peers + 1, 2)) {
      short_posts += votes.size();
      continue;
    }
    eligible.insert(eligible.end(), votes.begin(), votes.end());
  }
  if (skipped) *skipped = short_posts;
  if (eligible.empty() || trials == 0) return {};
  std::mt19937_64 rng(seed);
  std::shuffle(eligible.begin(), eligible.end(), rng);
  std::vector<VoteRecord> out;
  for (std::size_t i = 0; i < trials; ++i) out.push_back(eligible[i % eligible.size()]);
  return out;
}

PeerExperimentResult peer_vote_experiment(const CurationModel& model, const VoteCollection& test,
                                          const PostIndex& posts, const VoteStats& stats,
                                          const PeerExperimentOptions& options) {
  std::size_t skipped = 0;
  const auto targets = select_targets(test, posts, options.trials, options.min_peers, options.seed, &skipped);
  auto result = peer_vote_experiment(model, targets, test, posts, stats, options);
  result.curve.skipped = skipped;
  return result;
}

PeerExperimentResult peer_vote_experiment(const CurationModel& model, const std::vector<VoteRecord>& targets,
                                          const VoteCollection& test, const PostIndex& posts, const VoteStats& stats,
                                          const PeerExperimentOptions& options) {
  const auto by_post = votes_by_post(test);
  const double lr = finetune_lr(model, options);
  VoteStats scratch = stats;
  PeerExperimentResult result;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const auto& target = targets[t];
    std::vector<VoteRecord> peers;
    if (auto it = by_post.find(target.post_id); it != by_post.end())
      for (const auto& v : it->second)
        if (v.user_id != target.user_id) peers.push_back(v);
    std::sort(peers.begin(), peers.end(), [](const VoteRecord& a, const VoteRecord& b) { return a.user_id < b.user_id; });
    std::mt19937_64 rng(options.seed ^ (0x9e3779b97f4a7c15ULL * (t + 1)));
    std::shuffle(peers.begin(), peers.end(), rng);
    if (peers.size() > options.max_peers) peers.resize(options.max_peers);
    result.targets.push_back(target);
    result.traces.push_back(run_trial(model, target, posts.at(target.post_id), peers, scratch, lr));
  }
  result.curve = trace_curve(result.targets, result.traces, options.max_peers, 0);
  return result;
}

std::map<std::string, VotingVector> voting_vectors(const VoteCollection& votes) {
  std::map<std::string, VotingVector> out;
  for (const auto& v : collapse_latest(votes)) out[v.user_id][v.post_id] = v.direction == Direction::Up ? 1 : -1;
  return out;
}

double cosine_similarity(const VotingVector& u, const VotingVector& v) {
  if (u.empty() && v.empty()) throw std::invalid_argument("cosine similarity of two empty vectors");
  if (u.empty() || v.empty()) return 0.0;
  const auto& small = u.size() <= v.size() ? u : v;
  const auto& large = u.size() <= v.size() ? v : u;
  double dot = 0;
  for (const auto& [post, x] : small)
    if (auto it = large.find(post); it != large.end()) dot += x * it->second;
  return dot / std::sqrt(static_cast<double>(u.size()) * static_cast<double>(v.size()));
}

std::string_view to_string(PeerMode m) { return m == PeerMode::Support ? "SUPPORT" : "ADVERSARIAL"; }

PeerMode parse_peer_mode(std::string_view s) {
  if (s == "SUPPORT" || s == "support") return PeerMode::Support;
  if (s == "ADVERSARIAL" || s == "adversarial") return PeerMode::Adversarial;
  throw std::invalid_argument("unknown peer mode '" + std::string(s) + "'");
}

std::vector<std::string> most_similar_users(const std::string& user,
                                            const std::map<std::string, VotingVector>& vectors, std::size_t k) {
  auto self = vectors.find(user);
  if (self == vectors.end() || self->second.empty()) return {};
  std::vector<std::pair<double, std::string>> ranked;
  for (const auto& [other, vec] : vectors) {
    if (other == user || vec.empty()) continue;
    ranked.emplace_back(-cosine_similarity(self->second, vec), other);
  }
  const auto take = std::min(k, ranked.size());
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(take), ranked.end());
  std::vector<std::string> out;
  for (std::size_t i = 0; i < take; ++i) out.push_back(ranked[i].second);
  return out;
}

PeerExperimentResult similar_peer_experiment(const CurationModel& model, const std::vector<VoteRecord>& targets,
                                             const PostIndex& posts, const std::map<std::string, VotingVector>& vectors,
                                             const VoteStats& stats, PeerMode mode,
                                             const PeerExperimentOptions& options) {
  const double lr = finetune_lr(model, options);
  VoteStats scratch = stats;
  PeerExperimentResult result;
  std::size_t skipped = 0;
  for (const auto& target : targets) {
    const auto similar = most_similar_users(target.user_id, vectors, options.max_peers);
    if (similar.empty()) {
      ++skipped;
      continue;
    }
    const auto direction = mode == PeerMode::Support ? target.direction : opposite(target.direction);
    std::vector<VoteRecord> peers;
    for (const auto& u : similar) peers.push_back({u, target.post_id, direction, target.voted_at, target.community});
    result.targets.push_back(target);
    result.traces.push_back(run_trial(model, target, posts.at(target.post_id), peers, scratch, lr));
  }
  result.curve = trace_curve(result.targets, result.traces, options.max_peers, skipped);
  return result;
}

TrendTest mann_kendall(const std::vector<double>& x) {
  TrendTest t;
  const std::size_t n = x.size();
  if (n < 3) return t;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) t.s += (x[j] > x[i]) - (x[j] < x[i]);
  std::map<double, std::size_t> ties;
  for (double v : x) ++ties[v];
  const auto term = [](double m) { return m * (m - 1) * (2 * m + 5); };
  t.variance = term(static_cast<double>(n));
  for (const auto& [v, m] : ties) t.variance -= term(static_cast<double>(m));
  t.variance /= 18.0;
  if (t.variance > 0) {
    if (t.s > 0) t.z = (t.s - 1) / std::sqrt(t.variance);
    else if (t.s < 0) t.z = (t.s + 1) / std::sqrt(t.variance);
  }
  t.p_increasing = 1.0 - normal_cdf(t.z);
  t.p_decreasing = normal_cdf(t.z);
  return t;
}

std::optional<double> pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("pearson inputs differ in length");
  const double n = static_cast<double>(a.size());
  if (a.size() < 2) return std::nullopt;
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0 || sbb == 0) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double feed_rank_correlation(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("feeds rank different inventories");
  std::unordered_map<std::string, double> rank_b;
  for (std::size_t i = 0; i < b.size(); ++i)
    if (!rank_b.emplace(b[i], static_cast<double>(i)).second) throw std::invalid_argument("duplicate post " + b[i]);
  std::vector<double> ra, rb;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto it = rank_b.find(a[i]);
    if (it == rank_b.end() || !seen.insert(a[i]).second)
      throw std::invalid_argument("feeds rank different inventories");
    ra.push_back(static_cast<double>(i));
    rb.push_back(it->second);
  }
  const auto r = pearson(ra, rb);
  if (!r) throw std::invalid_argument("rank correlation needs at least two posts");
  return *r;
}

std::vector<double> predicted_rates(const CurationModel& model, const std::vector<PostRecord>& inventory,
                                    const std::vector<std::string>& curators, double confidence_threshold) {
  if (curators.empty()) throw std::invalid_argument("curator group is empty");
  std::vector<double> rates;
  rates.reserve(inventory.size());
  for (const auto& post : inventory) {
    const auto preds = model.predict_many(curators, post, confidence_threshold);
    const auto ups = std::count_if(preds.begin(), preds.end(), [&](const Prediction& p) { return p.p >= confidence_threshold; });
    rates.push_back(static_cast<double>(ups) / static_cast<double>(curators.size()));
  }
  return rates;
}

DivergenceReport curator_group_divergence(const CurationModel& model, const std::vector<PostRecord>& inventory,
                                          const std::map<std::string, std::vector<std::string>>& groups,
                                          double confidence_threshold) {
  if (groups.size() < 2) throw std::invalid_argument("divergence needs at least two curator groups");
  DivergenceReport r;
  for (const auto& [name, users] : groups) {
    r.groups.push_back(name);
    r.rates.push_back(predicted_rates(model, inventory, users, confidence_threshold));
  }
  const auto n = r.groups.size();
  r.correlation.assign(n, std::vector<std::optional<double>>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      auto c = pearson(r.rates[i], r.rates[j]);
      if (i == j && c) c = 1.0;
      r.correlation[i][j] = r.correlation[j][i] = c;
    }
  return r;
}

std::vector<SweepPoint> threshold_sweep(const CurationModel& model, const std::vector<PostRecord>& inventory,
                                        const std::map<std::string, PostVotes>& votes,
                                        const std::vector<std::string>& curators, double confidence_threshold,
                                        const std::vector<double>& thresholds) {
  if (!std::is_sorted(thresholds.begin(), thresholds.end()))
    throw std::invalid_argument("curation thresholds must be sorted ascending");
  CommunityConfig cfg;
  cfg.curators = curators;
  std::sort(cfg.curators.begin(), cfg.curators.end());
  cfg.curators.erase(std::unique(cfg.curators.begin(), cfg.curators.end()), cfg.curators.end());
  cfg.confidence_threshold = confidence_threshold;
  std::vector<std::pair<std::string, double>> rates;
  const PostVotes none;
  for (const auto& post : inventory) {
    cfg.community = post.community;
    auto it = votes.find(post.post_id);
    rates.emplace_back(post.post_id, curator_upvote_rate(post, it == votes.end() ? none : it->second, model, cfg).rate);
  }
  std::sort(rates.begin(), rates.end());
  std::vector<SweepPoint> out;
  for (double theta : thresholds) {
    SweepPoint point{theta, {}};
    for (const auto& [id, rate] : rates)
      if (route_post(rate, theta) == Stage::Frontstage) point.frontstage.push_back(id);
    out.push_back(std::move(point));
  }
  return out;
}

std::vector<std::string> select_curator_group(const VoteCollection& votes, const std::string& source,
                                              const std::string& affinity, int min_votes, double min_upvote_rate) {
  const auto stats = compute_stats(collapse_latest(votes));
  std::vector<std::string> out;
  for (const auto& [user, activity] : stats.users()) {
    auto src = activity.by_community.find(source);
    auto aff = activity.by_community.find(affinity);
    if (src == activity.by_community.end() || src->second.total() == 0) continue;
    if (aff == activity.by_community.end() || aff->second.total() < min_votes) continue;
    if (static_cast<double>(aff->second.up) < min_upvote_rate * static_cast<double>(aff->second.total())) continue;
    out.push_back(user);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> random_curator_group(const VoteCollection& votes, const std::string& community,
                                              std::size_t n, std::uint64_t seed) {
  std::set<std::string> members;
  for (const auto& v : votes)
    if (v.community == community) members.insert(v.user_id);
  std::vector<std::string> pool(members.begin(), members.end());
  std::mt19937_64 rng(seed);
  std::shuffle(pool.begin(), pool.end(), rng);
  if (pool.size() > n) pool.resize(n);
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::vector<FeedPair> feed_study_pairs() {
  const std::vector<std::string> politics{"politics", "Conservative", "Liberal", "Republican", "democrats",
                                          "PoliticalDiscussion"};
  const std::vector<std::string> science{"science", "ScienceFacts", "technology", "shittyaskscience"};
  auto one = [](std::string c, std::optional<std::string> by = std::nullopt) {
    return FeedSpec{{std::move(c)}, std::move(by)};
  };
  return {
      {one("technology", "programming"), one("technology")},
      {one("technology", "teenagers"), one("technology", "Conservative")},
      {one("PoliticalDiscussion", "Conservative"), one("PoliticalDiscussion")},
      {{politics, "democrats"}, {politics, "Republican"}},
      {one("Jokes", "LesbianActually"), one("Jokes")},
      {one("Jokes", "teenagers"), one("Jokes")},
      {one("Jokes", "Conservative"), one("Jokes")},
      {one("teenagers", "gaming"), one("teenagers")},
      {one("teenagers", "travel"), one("teenagers", "punk")},
      {one("worldnews", "Liberal"), one("worldnews")},
      {one("worldnews", "india"), one("worldnews", "france")},
      {one("gaming", "teenagers"), one("gaming")},
      {one("gaming", "LesbianActually"), one("gaming", "scifi")},
      {one("music", "Christianity"), one("music", "scifi")},
      {{science, "programming"}, {science, "Jokes"}},
  };
}

}  // namespace cura
