#include "cura/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cura/json_io.hpp"
#include "cura/log.hpp"
#include "cura/optimizer.hpp"
#include "cura/weighting.hpp"

namespace cura {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'C', 'U', 'R', 'A', 'C', 'K', 'P', 'T'};

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("truncated checkpoint");
  return v;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

bool all_finite(const EncoderParams<float>& g) {
  bool ok = true;
  g.for_each([&](const std::string&, const auto& m) { ok = ok && m.allFinite(); });
  return ok;
}

}  // namespace

CurationModel::CurationModel(ModelConfig config, Hyperparams hyper, Vocabulary vocab, EncoderParams<float> params,
                             std::uint64_t step)
    : hyper_(hyper), vocab_(std::move(vocab)), encoder_(std::move(config), std::move(params)), step_(step) {
  encoder_.config().validate();
  hyper_.validate();
  if (encoder_.params().token_embedding.rows() != vocab_.size())
    throw std::invalid_argument("embedding rows do not match the vocabulary size");
}

CurationModel CurationModel::initialise(ModelConfig config, Hyperparams hyper, Vocabulary vocab, std::uint64_t seed) {
  auto params = EncoderParams<float>::random(config, vocab.size(), seed);
  return CurationModel(std::move(config), hyper, std::move(vocab), std::move(params));
}

double CurationModel::probability(const SerializedExample& example) const {
  return sigmoid(static_cast<double>(encoder_.logit(example.ids, example.user_position)));
}

double CurationModel::probability(const std::string& user, const PostRecord& post) const {
  return probability(serialize(user, post));
}

Prediction CurationModel::predict(const std::string& user, const PostRecord& post, double threshold) const {
  const auto ex = serialize(user, post);
  const double p = probability(ex);
  return {p, decide(p, threshold), ex.unknown_user};
}

std::vector<Prediction> CurationModel::predict_many(const std::vector<std::string>& users, const PostRecord& post,
                                                    double threshold) const {
  std::vector<Prediction> out;
  out.reserve(users.size());
  for (const auto& u : users) out.push_back(predict(u, post, threshold));
  return out;
}

double CurationModel::loss(const SerializedExample& example, Direction label, double weight) const {
  const double z = encoder_.logit(example.ids, example.user_position);
  return weighted_bce(z, label_of(label), weight);
}

StepOutcome CurationModel::finetune_step(const SerializedExample& example, Direction label, double weight, double lr) {
  ForwardCache<float> cache;
  const double z = encoder_.logit(example.ids, example.user_position, cache);
  const double dz = weight * (sigmoid(z) - label_of(label));
  if (!std::isfinite(dz)) {
    log::warn("finetune step skipped: non-finite loss gradient");
    return StepOutcome::SkippedNonFinite;
  }
  auto grads = EncoderParams<float>::zeros(config(), vocab_.size());
  encoder_.backward(cache, static_cast<float>(dz), grads);
  if (!all_finite(grads)) {
    log::warn("finetune step skipped: non-finite gradient");
    return StepOutcome::SkippedNonFinite;
  }
  if (lr == 0.0) return StepOutcome::Applied;

  const auto alpha = static_cast<float>(lr);
  constexpr float kEps = 1e-8f;
  std::vector<MatrixX<float>*> pm;
  std::vector<RowVectorX<float>*> pr;
  encoder_.params().for_each([&](const std::string&, auto& t) {
    if constexpr (std::is_same_v<std::decay_t<decltype(t)>, MatrixX<float>>) pm.push_back(&t);
    else pr.push_back(&t);
  });
  std::size_t mi = 0, ri = 0;
  grads.for_each([&](const std::string&, const auto& g) {
    auto apply = [&](auto& p) {
      if (hyper_.finetune_optimizer == FinetuneOptimizer::Adam)
        p.array() -= alpha * g.array() / (g.array().abs() + kEps);
      else
        p.array() -= alpha * g.array();
    };
    if constexpr (std::is_same_v<std::decay_t<decltype(g)>, MatrixX<float>>) apply(*pm[mi++]);
    else apply(*pr[ri++]);
  });
  ++step_;
  return StepOutcome::Applied;
}

void CurationModel::save(std::ostream& out) const {
  json header{{"format", "cura-checkpoint"},
              {"version", kFormatVersion},
              {"config", json(config())},
              {"hyperparams", json(hyper_)},
              {"step", step_},
              {"base_vocab", vocab_.base().tokens()},
              {"users", vocab_.users()}};
  std::ostringstream body;
  body.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(body, kFormatVersion);
  const std::string h = header.dump();
  write_pod<std::uint64_t>(body, h.size());
  body.write(h.data(), static_cast<std::streamsize>(h.size()));
  params().for_each([&](const std::string&, const auto& m) {
    write_pod<std::uint64_t>(body, static_cast<std::uint64_t>(m.rows()));
    write_pod<std::uint64_t>(body, static_cast<std::uint64_t>(m.cols()));
    body.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float)));
  });
  const std::string bytes = body.str();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  write_pod<std::uint64_t>(out, fnv1a(bytes));
}

void CurationModel::save(const std::filesystem::path& path) const {
  // Write to a sibling file then rename so readers never see a partial checkpoint.
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + tmp);
    save(out);
  }
  std::filesystem::rename(tmp, path);
}

CurationModel CurationModel::load(std::istream& in) {
  std::stringstream buf;
  buf << in.rdbuf();
  std::string bytes = buf.str();
  if (bytes.size() < sizeof(kMagic) + 4 + 8 + 8 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not a cura checkpoint");
  std::uint64_t stored = 0;
  std::memcpy(&stored, bytes.data() + bytes.size() - 8, 8);
  bytes.resize(bytes.size() - 8);
  if (stored != fnv1a(bytes)) throw std::runtime_error("checkpoint checksum mismatch");

  std::istringstream body(bytes);
  body.ignore(sizeof(kMagic));
  const auto version = read_pod<std::uint32_t>(body);
  if (version != kFormatVersion) throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  const auto hlen = read_pod<std::uint64_t>(body);
  std::string h(hlen, '\0');
  body.read(h.data(), static_cast<std::streamsize>(hlen));
  const json header = json::parse(h);
  const auto config = header.at("config").get<ModelConfig>();
  const auto hyper = header.at("hyperparams").get<Hyperparams>();
  Vocabulary vocab(WordPiece(header.at("base_vocab").get<std::vector<std::string>>()),
                   header.at("users").get<std::vector<std::string>>());
  auto params = EncoderParams<float>::zeros(config, vocab.size());
  params.for_each([&](const std::string& name, auto& m) {
    const auto rows = read_pod<std::uint64_t>(body);
    const auto cols = read_pod<std::uint64_t>(body);
    if (rows != static_cast<std::uint64_t>(m.rows()) || cols != static_cast<std::uint64_t>(m.cols()))
      throw std::runtime_error("checkpoint tensor " + name + " has unexpected shape");
    body.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float)));
    if (!body) throw std::runtime_error("truncated checkpoint tensor " + name);
  });
  return CurationModel(config, hyper, std::move(vocab), std::move(params), header.at("step").get<std::uint64_t>());
}

CurationModel CurationModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  return load(in);
}

std::string CurationModel::fingerprint() const {
  std::ostringstream out;
  save(out);
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(fnv1a(out.str())));
  return hex;
}

std::vector<std::string> vocabulary_users(const VoteCollection& votes, const PostIndex& posts) {
  std::set<std::string> users;
  for (const auto& v : votes) {
    users.insert(v.user_id);
    if (auto it = posts.find(v.post_id); it != posts.end() && !it->second.author_id.empty())
      users.insert(it->second.author_id);
  }
  return {users.begin(), users.end()};
}

WordPiece build_base_vocabulary(const PostIndex& posts, std::size_t max_size) {
  // Sorted by id so the vocabulary does not depend on hash-map iteration order.
  std::vector<const PostRecord*> ordered;
  ordered.reserve(posts.size());
  for (const auto& [id, p] : posts) ordered.push_back(&p);
  std::sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->post_id < b->post_id; });
  std::vector<std::string> texts{"true", "false", "Sun Mon Tue Wed Thu Fri Sat",
                                 "Jan Feb Mar Apr May Jun Jul Aug Sep Oct Nov Dec , 0 1 2 3 4 5 6 7 8 9"};
  for (const auto* p : ordered) {
    texts.push_back(p->community);
    texts.push_back(p->url_domain);
    texts.push_back(p->text);
    texts.push_back(format_human_date(p->created_at));
  }
  return WordPiece::build(texts, max_size);
}

namespace {

EncoderParams<float> initial_params(const ModelConfig& config, const Vocabulary& vocab, std::uint64_t seed) {
  auto params = EncoderParams<float>::random(config, vocab.size(), seed);
  if (config.init != InitMode::PretrainedSmall) return params;
  if (config.pretrained_path.empty()) throw ValidationError("pretrained_small init needs pretrained_path");
  const auto base = CurationModel::load(std::filesystem::path(config.pretrained_path));
  const auto& bc = base.config();
  if (bc.layers != config.layers || bc.hidden != config.hidden || bc.heads != config.heads || bc.ffn != config.ffn ||
      bc.head_width != config.head_width || bc.max_len < config.max_len)
    throw ValidationError("pretrained encoder shape does not match the model config");
  // Copy every encoder tensor; embeddings are matched by token surface form so
  // new user and indicator tokens keep their random initialisation.
  auto src = base.params();
  const auto& bv = base.vocabulary();
  for (int id = 0; id < vocab.size(); ++id) {
    const auto text = vocab.token_text(id);
    std::optional<int> from;
    if (id < vocab.base().size()) {
      if (auto f = bv.base().find(text)) from = *f;
    } else if (id >= vocab.unknown_user_id()) {
      if (id == vocab.unknown_user_id()) from = bv.unknown_user_id();
      else if (const auto& user = vocab.users()[static_cast<std::size_t>(id - vocab.unknown_user_id() - 1)];
               bv.knows_user(user))
        from = bv.user_token(user);
    } else {
      from = bv.indicator_id(kFeatureOrder[static_cast<std::size_t>(id - vocab.base().size())]);
    }
    if (from) params.token_embedding.row(id) = src.token_embedding.row(*from);
  }
  params.position_embedding = src.position_embedding.topRows(config.max_len);
  params.emb_ln_gamma = src.emb_ln_gamma;
  params.emb_ln_beta = src.emb_ln_beta;
  params.layers = src.layers;
  params.pooler_w = src.pooler_w;
  params.pooler_b = src.pooler_b;
  return params;
}

struct Example {
  SerializedExample input;
  Direction label;
  double weight;
};

double mean_loss(const CurationModel& model, const std::vector<Example>& examples, const std::vector<std::size_t>& idx) {
  if (idx.empty()) return 0.0;
  double total = 0;
  for (auto i : idx) total += model.loss(examples[i].input, examples[i].label, examples[i].weight);
  return total / static_cast<double>(idx.size());
}

double schedule(const Hyperparams& h, long step, long total) {
  if (h.warmup_fraction <= 0) return h.learning_rate;
  const double warm = std::max(1.0, h.warmup_fraction * static_cast<double>(total));
  const double t = static_cast<double>(step) + 1;
  if (t <= warm) return h.learning_rate * t / warm;
  return h.learning_rate * std::max(0.0, (static_cast<double>(total) - t + 1) / std::max(1.0, total - warm));
}

}  // namespace

CurationModel train(const VoteCollection& train_votes, const PostIndex& posts, const ModelConfig& config,
                    const Hyperparams& hyper, const TrainOptions& options, TrainReport* report) {
  config.validate();
  hyper.validate();
  const VoteStats stats = options.stats ? *options.stats : compute_stats(train_votes);

  Vocabulary vocab(config.init == InitMode::PretrainedSmall && !config.pretrained_path.empty()
                       ? CurationModel::load(std::filesystem::path(config.pretrained_path)).vocabulary().base()
                       : build_base_vocabulary(posts, options.base_vocab_size),
                   vocabulary_users(train_votes, posts));
  CurationModel model(config, hyper, vocab, initial_params(config, vocab, hyper.seed));

  std::vector<Example> examples;
  std::size_t orphans = 0;
  for (const auto& v : train_votes) {
    auto it = posts.find(v.post_id);
    if (it == posts.end()) {
      ++orphans;
      continue;
    }
    examples.push_back({model.serialize(v.user_id, it->second), v.direction,
                        compute_weight(v, stats, hyper.downvote_weight)});
  }
  if (examples.empty()) throw ValidationError("no trainable votes (every vote lacks post metadata)");
  // W is tiny for prolific voters; rescale gradients so the mean weight is 1,
  // which keeps them well above Adam's epsilon without changing the optimum.
  double weight_sum = 0;
  for (const auto& ex : examples) weight_sum += ex.weight;
  const double grad_scale = static_cast<double>(examples.size()) / weight_sum;

  std::mt19937_64 rng(hyper.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::size_t> monitor = order;
  std::shuffle(monitor.begin(), monitor.end(), rng);
  monitor.resize(std::min(monitor.size(), options.monitor_examples));

  TrainReport local;
  local.examples = examples.size();
  local.skipped_orphans = orphans;
  local.initial_loss = mean_loss(model, examples, monitor);

  Adam<float> adam(config, vocab.size());
  auto grads = EncoderParams<float>::zeros(config, vocab.size());
  ForwardCache<float> cache;
  const auto batch = static_cast<std::size_t>(hyper.batch_size);
  const long total_steps = static_cast<long>((examples.size() + batch - 1) / batch) * hyper.epochs;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      const auto count = static_cast<double>(end - start);
      grads.set_zero();
      double batch_loss = 0;
      for (std::size_t k = start; k < end; ++k) {
        const auto& ex = examples[order[k]];
        const double z = model.encoder().logit(ex.input.ids, ex.input.user_position, cache);
        const double y = label_of(ex.label);
        batch_loss += weighted_bce(z, y, ex.weight);
        model.encoder().backward(cache, static_cast<float>(grad_scale * ex.weight * (sigmoid(z) - y) / count), grads);
      }
      if (!std::isfinite(batch_loss)) {
        std::ostringstream msg;
        msg << "non-finite training loss in epoch " << epoch + 1 << " at batch starting " << start
            << " (learning rate " << hyper.learning_rate << ", batch size " << hyper.batch_size << ")";
        throw TrainingDiverged(msg.str());
      }
      adam.step(model.mutable_params(), grads, schedule(hyper, adam.steps(), total_steps));
      model.set_step(model.step() + 1);
      epoch_loss += batch_loss;
    }
    epoch_loss /= static_cast<double>(examples.size());
    local.epoch_loss.push_back(epoch_loss);
    if (options.on_epoch) options.on_epoch(epoch + 1, epoch_loss);
  }
  local.final_loss = mean_loss(model, examples, monitor);
  if (report) *report = std::move(local);
  return model;
}

Prediction majority_baseline(const std::vector<Direction>& observed) {
  if (observed.empty()) return {0.5, Direction::Up, false};
  const auto ups = std::count(observed.begin(), observed.end(), Direction::Up);
  const double p = static_cast<double>(ups) / static_cast<double>(observed.size());
  return {p, decide(p, 0.5), false};
}

}  // namespace cura
