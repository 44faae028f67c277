// Command-line front end: data preparation, training, the evaluation battery
// and the admin service. Every verb that produces results writes them into
// its own run directory next to a manifest.json.

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cura/admin_service.hpp"
#include "cura/dataset.hpp"
#include "cura/eval.hpp"
#include "cura/json_io.hpp"
#include "cura/log.hpp"
#include "cura/model.hpp"
#include "cura/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cura;

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : "NA"; }

class RunDir {
 public:
  RunDir(fs::path dir, std::string verb) : dir_(std::move(dir)) {
    fs::create_directories(dir_);
    manifest_["verb"] = std::move(verb);
    manifest_["created_at"] = format_iso8601(std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now()));
    manifest_["files"] = json::array();
  }

  json& manifest() { return manifest_; }
  const fs::path& path() const { return dir_; }

  void tsv(const std::string& name, const std::vector<std::string>& header,
           const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(dir_ / name);
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "\t" : "") << cells[i];
      out << '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    if (!out) throw std::runtime_error("cannot write " + (dir_ / name).string());
    record(name);
  }

  void record(const std::string& name) { manifest_["files"].push_back(name); }

  ~RunDir() {
    std::ofstream(dir_ / "manifest.json") << manifest_.dump(2) << '\n';
  }

 private:
  fs::path dir_;
  json manifest_;
};

std::vector<std::vector<std::string>> curve_rows(const CurveReport& c) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& b : c.bins)
    rows.push_back({b.label, fmt(b.lo), fmt(b.hi), std::to_string(b.count), fmt(b.accuracy), fmt(b.confidence)});
  return rows;
}
const std::vector<std::string> kCurveHeader{"bin", "lo", "hi", "count", "accuracy", "confidence_accurate"};

void write_metrics(RunDir& run, const std::string& prefix, const MetricsReport& m) {
  run.tsv(prefix + "metrics.tsv", {"metric", "value"},
          {{"count", std::to_string(m.count)},
           {"accuracy", fmt(m.accuracy)},
           {"balanced_accuracy", fmt(m.balanced_accuracy)},
           {"auc", fmt(m.auc)},
           {"up_recall", fmt(m.up_recall())},
           {"down_recall", fmt(m.down_recall())}});
  run.tsv(prefix + "confusion.tsv", {"actual", "predicted_up", "predicted_down", "rate_up", "rate_down"},
          {{"up", std::to_string(m.counts[0][0]), std::to_string(m.counts[0][1]), fmt(m.rates[0][0]), fmt(m.rates[0][1])},
           {"down", std::to_string(m.counts[1][0]), std::to_string(m.counts[1][1]), fmt(m.rates[1][0]),
            fmt(m.rates[1][1])}});
  std::vector<std::vector<std::string>> rows;
  for (const auto& c : m.per_community) rows.push_back({c.community, std::to_string(c.count), fmt(c.accuracy)});
  run.tsv(prefix + "per_community.tsv", {"community", "count", "accuracy"}, rows);
}

VoteCollection read_votes_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  return read_votes(in);
}

PostCollection read_posts_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  return read_posts(in);
}

void write_votes_file(const fs::path& p, const VoteCollection& v) {
  std::ofstream out(p);
  write_votes(out, v);
}

void write_posts_file(const fs::path& p, const PostCollection& v) {
  std::ofstream out(p);
  write_posts(out, v);
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  return json::parse(in);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

/// `@file` reads one user per line; anything else is a comma-separated list.
std::vector<std::string> user_list(const std::string& spec) {
  if (spec.empty() || spec[0] != '@') return split_list(spec);
  std::ifstream in(spec.substr(1));
  if (!in) throw std::runtime_error("cannot open " + spec.substr(1));
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(line);
  return out;
}

std::vector<PostRecord> community_posts(const PostCollection& posts, const std::string& community) {
  std::vector<PostRecord> out;
  for (const auto& p : posts)
    if (community.empty() || p.community == community) out.push_back(p);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cura: community curation engine and evaluation harness"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "debug, info, warn, error or off");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate and normalise a vote/post corpus");
  fs::path in_votes, in_posts, out_dir;
  ingest->add_option("--votes", in_votes)->required();
  ingest->add_option("--posts", in_posts)->required();
  ingest->add_option("--out", out_dir)->required();

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a planted-structure corpus");
  fs::path synth_config;
  SynthConfig sc;
  synth->add_option("--config", synth_config, "key = value file; flags override it");
  synth->add_option("--users-per-group", sc.users_per_group);
  synth->add_option("--posts", sc.posts);
  synth->add_option("--votes-per-user", sc.votes_per_user);
  synth->add_option("--noise", sc.noise);
  synth->add_option("--seed", sc.seed);
  synth->add_option("--out", out_dir)->required();

  // split
  auto* split = app.add_subcommand("split", "Train/test split plus a balanced test set");
  double ratio = 0.8;
  std::string mode = "by_vote";
  std::uint64_t seed = 1;
  split->add_option("--votes", in_votes)->required();
  split->add_option("--ratio", ratio);
  split->add_option("--mode", mode, "by_vote or by_post");
  split->add_option("--seed", seed);
  split->add_option("--out", out_dir)->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a curation model");
  fs::path train_config;
  train_cmd->add_option("--config", train_config,
                        "JSON: {votes, posts, model: {...}, hyperparams: {...}, base_vocab_size}")
      ->required();
  train_cmd->add_option("--out", out_dir)->required();

  // eval
  auto* eval = app.add_subcommand("eval", "Accuracy, AUC, confusion matrix and curves");
  fs::path checkpoint, test_votes, train_votes;
  bool balanced = false;
  eval->add_option("--checkpoint", checkpoint)->required();
  eval->add_option("--test", test_votes)->required();
  eval->add_option("--train", train_votes, "training votes, for activity bins and the baseline context")->required();
  eval->add_option("--posts", in_posts)->required();
  eval->add_flag("--balanced", balanced, "evaluate on a per-community balanced subsample of the test set");
  eval->add_option("--seed", seed);
  eval->add_option("--out", out_dir)->required();

  // peer-exp / similar-exp
  PeerExperimentOptions peer;
  std::optional<double> lr;
  auto* peer_exp = app.add_subcommand("peer-exp", "Accuracy as real peer votes are finetuned in");
  auto* similar_exp = app.add_subcommand("similar-exp", "Supporting or adversarial votes from similar users");
  std::string peer_mode = "ADVERSARIAL";
  for (auto* c : {peer_exp, similar_exp}) {
    c->add_option("--checkpoint", checkpoint)->required();
    c->add_option("--test", test_votes)->required();
    c->add_option("--train", train_votes)->required();
    c->add_option("--posts", in_posts)->required();
    c->add_option("--trials", peer.trials);
    c->add_option("--seed", peer.seed);
    c->add_option("--lr", lr, "finetune learning rate override");
    c->add_option("--out", out_dir)->required();
  }
  peer_exp->add_option("--max-peers", peer.max_peers);
  peer_exp->add_option("--min-peers", peer.min_peers);
  std::size_t similar_k = 50;
  similar_exp->add_option("--k", similar_k);
  similar_exp->add_option("--mode", peer_mode, "SUPPORT or ADVERSARIAL");

  // divergence
  auto* divergence = app.add_subcommand("divergence", "Correlation of curator-group upvote rates");
  fs::path groups_file;
  std::string community;
  double theta_p = 0.5;
  divergence->add_option("--checkpoint", checkpoint)->required();
  divergence->add_option("--posts", in_posts)->required();
  divergence->add_option("--groups", groups_file, "JSON object: group name -> [user ids]")->required();
  divergence->add_option("--community", community, "restrict the inventory to one community");
  divergence->add_option("--theta-p", theta_p);
  divergence->add_option("--out", out_dir)->required();

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Frontstage sets across curation thresholds");
  std::string curators_spec;
  std::vector<double> thetas{0.2, 0.4, 0.6, 0.8};
  sweep->add_option("--checkpoint", checkpoint)->required();
  sweep->add_option("--posts", in_posts)->required();
  sweep->add_option("--votes", in_votes, "actual votes, which override predictions");
  sweep->add_option("--community", community)->required();
  sweep->add_option("--curators", curators_spec, "comma list or @file")->required();
  sweep->add_option("--thresholds", thetas)->delimiter(',');
  sweep->add_option("--theta-p", theta_p);
  sweep->add_option("--out", out_dir)->required();

  // serve
  auto* serve = app.add_subcommand("serve", "Run the admin HTTP service");
  std::optional<fs::path> service_config;
  serve->add_option("--config", service_config, "service JSON; CURA_* environment variables override it");

  // feed-pairs
  auto* pairs = app.add_subcommand("feed-pairs", "Emit the fifteen feed comparison pair definitions");
  pairs->add_option("--out", out_dir)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (log_level == "debug") log::set_level(log::Level::Debug);
    else if (log_level == "warn") log::set_level(log::Level::Warn);
    else if (log_level == "error") log::set_level(log::Level::Error);
    else if (log_level == "off") log::set_level(log::Level::Off);

    if (*ingest) {
      RunDir run(out_dir, "ingest");
      const auto corpus = load_corpus(in_votes, in_posts);
      write_votes_file(out_dir / "votes.csv", corpus.votes);
      write_posts_file(out_dir / "posts.csv", corpus.posts);
      run.record("votes.csv");
      run.record("posts.csv");
      const auto stats = compute_stats(corpus.votes);
      std::int64_t up = 0;
      for (const auto& v : corpus.votes) up += v.direction == Direction::Up;
      run.tsv("summary.tsv", {"metric", "value"},
              {{"votes", std::to_string(corpus.votes.size())},
               {"posts", std::to_string(corpus.posts.size())},
               {"users", std::to_string(stats.users().size())},
               {"upvotes", std::to_string(up)},
               {"orphans", std::to_string(corpus.orphans.size())},
               {"duplicates_collapsed", std::to_string(corpus.duplicates_collapsed)},
               {"top10pct_vote_share", fmt(activity_concentration(stats, 0.1))}});
      run.manifest()["inputs"] = {{"votes", in_votes}, {"posts", in_posts}};
    } else if (*synth) {
      SynthConfig cfg = sc;
      if (!synth_config.empty()) {
        cfg = parse_synth_config(synth_config);
        // Explicit flags win over the file.
        for (const auto* opt : synth->get_options()) {
          if (opt->count() == 0) continue;
          const auto name = opt->get_name();
          if (name == "--users-per-group") cfg.users_per_group = sc.users_per_group;
          if (name == "--posts") cfg.posts = sc.posts;
          if (name == "--votes-per-user") cfg.votes_per_user = sc.votes_per_user;
          if (name == "--noise") cfg.noise = sc.noise;
          if (name == "--seed") cfg.seed = sc.seed;
        }
      }
      cfg.validate();
      RunDir run(out_dir, "synth");
      const auto corpus = synth_generate(cfg);
      write_votes_file(out_dir / "votes.csv", corpus.votes);
      write_posts_file(out_dir / "posts.csv", corpus.posts);
      run.record("votes.csv");
      run.record("posts.csv");
      std::vector<std::vector<std::string>> rows;
      for (const auto& [u, g] : corpus.labels.user_group) rows.push_back({u, std::to_string(g)});
      run.tsv("user_groups.tsv", {"user_id", "group"}, rows);
      run.manifest()["config"] = cfg;
      run.manifest()["seed"] = cfg.seed;
    } else if (*split) {
      RunDir run(out_dir, "split");
      const auto votes = read_votes_file(in_votes);
      const auto m = mode == "by_post" ? SplitMode::ByPost : SplitMode::ByVote;
      if (mode != "by_post" && mode != "by_vote") throw std::invalid_argument("mode must be by_vote or by_post");
      const auto s = split_dataset(votes, ratio, m, seed);
      write_votes_file(out_dir / "train.csv", s.train);
      write_votes_file(out_dir / "test.csv", s.test);
      write_votes_file(out_dir / "balanced_test.csv", build_balanced_test(s.test, seed));
      for (const auto* f : {"train.csv", "test.csv", "balanced_test.csv"}) run.record(f);
      run.manifest()["ratio"] = ratio;
      run.manifest()["mode"] = mode;
      run.manifest()["seed"] = seed;
    } else if (*train_cmd) {
      const auto cfg = read_json(train_config);
      const auto corpus = load_corpus(cfg.at("votes").get<std::string>(), cfg.at("posts").get<std::string>());
      const auto mc = cfg.value("model", json::object()).get<ModelConfig>();
      const auto hp = cfg.value("hyperparams", json::object()).get<Hyperparams>();
      VoteCollection train_set = corpus.votes;
      if (cfg.contains("train_votes")) train_set = read_votes_file(cfg.at("train_votes").get<std::string>());
      RunDir run(out_dir, "train");
      TrainOptions opt;
      opt.base_vocab_size = cfg.value("base_vocab_size", opt.base_vocab_size);
      std::vector<std::vector<std::string>> loss_rows;
      opt.on_epoch = [&](int epoch, double loss) {
        log::info("epoch " + std::to_string(epoch) + " loss " + fmt(loss));
        loss_rows.push_back({std::to_string(epoch), fmt(loss)});
      };
      TrainReport report;
      const auto model = train(train_set, index_posts(corpus.posts), mc, hp, opt, &report);
      model.save(out_dir / "model.ckpt");
      run.record("model.ckpt");
      run.tsv("loss.tsv", {"epoch", "mean_loss"}, loss_rows);
      run.manifest()["config"] = cfg;
      run.manifest()["seed"] = hp.seed;
      run.manifest()["resolved"] = {{"model", mc}, {"hyperparams", hp}};
      run.manifest()["checkpoint_fingerprint"] = model.fingerprint();
      run.manifest()["initial_loss"] = report.initial_loss;
      run.manifest()["final_loss"] = report.final_loss;
      run.manifest()["skipped_orphans"] = report.skipped_orphans;
    } else if (*eval) {
      const auto model = CurationModel::load(checkpoint);
      const auto posts = index_posts(read_posts_file(in_posts));
      const auto train_set = read_votes_file(train_votes);
      auto test = read_votes_file(test_votes);
      if (balanced) test = build_balanced_test(test, seed);
      RunDir run(out_dir, "eval");
      const auto scored = score_votes(model, test, posts);
      write_metrics(run, "", compute_metrics(scored));
      VoteCollection context = train_set;
      context.insert(context.end(), test.begin(), test.end());
      const auto base = score_majority_baseline(test, context);
      write_metrics(run, "baseline_", compute_metrics(base));
      run.tsv("activity_curve.tsv", kCurveHeader,
              curve_rows(accuracy_by_user_activity(scored, compute_stats(train_set))));
      run.tsv("agreement_curve.tsv", kCurveHeader, curve_rows(accuracy_by_agreement(scored, context)));
      run.tsv("baseline_agreement_curve.tsv", kCurveHeader, curve_rows(accuracy_by_agreement(base, context)));
      run.manifest()["checkpoint_fingerprint"] = model.fingerprint();
      run.manifest()["balanced"] = balanced;
      run.manifest()["seed"] = seed;
      run.manifest()["published_reference"] = {{"accuracy", 0.8196}, {"auc", 0.8903}, {"baseline_accuracy", 0.6596}};
    } else if (*peer_exp || *similar_exp) {
      const auto model = CurationModel::load(checkpoint);
      const auto posts = index_posts(read_posts_file(in_posts));
      const auto train_set = read_votes_file(train_votes);
      const auto test = read_votes_file(test_votes);
      const auto stats = compute_stats(collapse_latest(train_set));
      peer.learning_rate = lr;
      RunDir run(out_dir, *peer_exp ? "peer-exp" : "similar-exp");
      PeerExperimentResult result;
      if (*peer_exp) {
        result = peer_vote_experiment(model, test, posts, stats, peer);
      } else {
        peer.max_peers = similar_k;
        const auto targets = select_targets(test, posts, peer.trials, 0, peer.seed);
        result = similar_peer_experiment(model, targets, posts, voting_vectors(train_set), stats,
                                         parse_peer_mode(peer_mode), peer);
        run.manifest()["mode"] = std::string(to_string(parse_peer_mode(peer_mode)));
      }
      run.tsv("curve.tsv", kCurveHeader, curve_rows(result.curve));
      std::vector<double> conf;
      for (const auto& b : result.curve.bins) conf.push_back(b.confidence.value_or(0));
      const auto trend = mann_kendall(conf);
      run.tsv("confidence_trend.tsv", {"s", "variance", "z", "p_increasing", "p_decreasing"},
              {{fmt(trend.s), fmt(trend.variance), fmt(trend.z), fmt(trend.p_increasing), fmt(trend.p_decreasing)}});
      run.manifest()["checkpoint_fingerprint"] = model.fingerprint();
      run.manifest()["seed"] = peer.seed;
      run.manifest()["trials"] = peer.trials;
      run.manifest()["skipped"] = result.curve.skipped;
      run.manifest()["learning_rate"] = peer.learning_rate.value_or(model.hyperparams().finetune_learning_rate);
    } else if (*divergence) {
      const auto model = CurationModel::load(checkpoint);
      const auto inventory = community_posts(read_posts_file(in_posts), community);
      const auto groups = read_json(groups_file).get<std::map<std::string, std::vector<std::string>>>();
      RunDir run(out_dir, "divergence");
      const auto r = curator_group_divergence(model, inventory, groups, theta_p);
      std::vector<std::string> header{"group"};
      header.insert(header.end(), r.groups.begin(), r.groups.end());
      std::vector<std::vector<std::string>> rows;
      for (std::size_t i = 0; i < r.groups.size(); ++i) {
        rows.push_back({r.groups[i]});
        for (const auto& c : r.correlation[i]) rows.back().push_back(fmt(c));
      }
      run.tsv("correlation.tsv", header, rows);
      std::vector<std::vector<std::string>> rate_rows;
      for (std::size_t p = 0; p < inventory.size(); ++p) {
        rate_rows.push_back({inventory[p].post_id});
        for (const auto& g : r.rates) rate_rows.back().push_back(fmt(g[p]));
      }
      header[0] = "post_id";
      run.tsv("rates.tsv", header, rate_rows);
      run.manifest()["checkpoint_fingerprint"] = model.fingerprint();
      run.manifest()["theta_p"] = theta_p;
    } else if (*sweep) {
      const auto model = CurationModel::load(checkpoint);
      const auto inventory = community_posts(read_posts_file(in_posts), community);
      std::map<std::string, PostVotes> actual;
      if (!in_votes.empty())
        for (const auto& v : collapse_latest(read_votes_file(in_votes))) actual[v.post_id][v.user_id] = v;
      RunDir run(out_dir, "sweep");
      const auto points = threshold_sweep(model, inventory, actual, user_list(curators_spec), theta_p, thetas);
      std::vector<std::vector<std::string>> sizes, members;
      for (const auto& pt : points) {
        sizes.push_back({fmt(pt.curation_threshold), std::to_string(pt.frontstage.size()),
                         std::to_string(inventory.size())});
        for (const auto& id : pt.frontstage) members.push_back({fmt(pt.curation_threshold), id});
      }
      run.tsv("sizes.tsv", {"curation_threshold", "frontstage", "inventory"}, sizes);
      run.tsv("frontstage.tsv", {"curation_threshold", "post_id"}, members);
      run.manifest()["checkpoint_fingerprint"] = model.fingerprint();
      run.manifest()["theta_p"] = theta_p;
    } else if (*serve) {
      const auto cfg = load_service_config(service_config);
      if (cfg.admin_token.empty()) throw std::runtime_error("admin_token (or CURA_ADMIN_TOKEN) must be set");
      auto engine = open_engine(cfg);
      std::map<std::string, MemberExtras> extras;
      if (!cfg.member_extras.empty()) extras = read_member_extras(cfg.member_extras);
      AdminService service(engine, cfg.admin_token, extras, cfg.recommended_groups);
      serve_http(service, cfg.listen_host, cfg.port);
    } else if (*pairs) {
      RunDir run(out_dir, "feed-pairs");
      json list = json::array();
      auto spec = [](const FeedSpec& f) {
        return json{{"communities", f.communities},
                    {"curated_by", f.curated_by ? json(*f.curated_by) : json(nullptr)},
                    {"ranking", f.curated_by ? "curated" : "broadcast"}};
      };
      for (const auto& p : feed_study_pairs())
        list.push_back({{"target", spec(p.target)}, {"distractor", spec(p.distractor)}});
      std::ofstream(out_dir / "pairs.json")
          << json{{"posts_per_community", 500}, {"feed_length", 15}, {"theta_c", 0.5}, {"theta_p", 0.5}, {"pairs", list}}
                 .dump(2)
          << '\n';
      run.record("pairs.json");
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
