#include "cura/json_io.hpp"

namespace cura {

using nlohmann::json;

namespace {

template <typename E>
E pick(const json& j, const char* key, E fallback, std::initializer_list<std::pair<const char*, E>> names) {
  if (!j.contains(key)) return fallback;
  const auto s = j.at(key).get<std::string>();
  for (const auto& [name, value] : names)
    if (s == name) return value;
  throw std::invalid_argument(std::string("unknown ") + key + " '" + s + "'");
}

}  // namespace

void to_json(json& j, const ModelConfig& c) {
  j = json{{"layers", c.layers},
           {"hidden", c.hidden},
           {"heads", c.heads},
           {"ffn", c.ffn},
           {"max_len", c.max_len},
           {"head_width", c.head_width},
           {"init", c.init == InitMode::Random ? "random" : "pretrained_small"},
           {"init_std", c.init_std},
           {"pretrained_path", c.pretrained_path}};
}

void from_json(const json& j, ModelConfig& c) {
  c = ModelConfig{};
  c.layers = j.value("layers", c.layers);
  c.hidden = j.value("hidden", c.hidden);
  c.heads = j.value("heads", c.heads);
  c.ffn = j.value("ffn", c.ffn);
  c.max_len = j.value("max_len", c.max_len);
  c.head_width = j.value("head_width", c.head_width);
  c.init = pick(j, "init", c.init, {{"random", InitMode::Random}, {"pretrained_small", InitMode::PretrainedSmall}});
  c.init_std = j.value("init_std", c.init_std);
  c.pretrained_path = j.value("pretrained_path", c.pretrained_path);
}

void to_json(json& j, const Hyperparams& h) {
  j = json{{"epochs", h.epochs},
           {"batch_size", h.batch_size},
           {"learning_rate", h.learning_rate},
           {"warmup_fraction", h.warmup_fraction},
           {"finetune_learning_rate", h.finetune_learning_rate},
           {"downvote_weight", h.downvote_weight},
           {"seed", h.seed},
           {"finetune_optimizer", h.finetune_optimizer == FinetuneOptimizer::Adam ? "adam" : "sgd"},
           {"finetune_weighting", h.finetune_weighting == FinetuneWeighting::Recomputed ? "recomputed" : "unit"}};
}

void from_json(const json& j, Hyperparams& h) {
  h = Hyperparams{};
  h.epochs = j.value("epochs", h.epochs);
  h.batch_size = j.value("batch_size", h.batch_size);
  h.learning_rate = j.value("learning_rate", h.learning_rate);
  h.warmup_fraction = j.value("warmup_fraction", h.warmup_fraction);
  h.finetune_learning_rate = j.value("finetune_learning_rate", h.finetune_learning_rate);
  h.downvote_weight = j.value("downvote_weight", h.downvote_weight);
  h.seed = j.value("seed", h.seed);
  h.finetune_optimizer =
      pick(j, "finetune_optimizer", h.finetune_optimizer, {{"adam", FinetuneOptimizer::Adam}, {"sgd", FinetuneOptimizer::Sgd}});
  h.finetune_weighting = pick(j, "finetune_weighting", h.finetune_weighting,
                              {{"recomputed", FinetuneWeighting::Recomputed}, {"unit", FinetuneWeighting::Unit}});
}

void to_json(json& j, const SynthConfig& c) {
  j = json{{"groups", c.groups},
           {"users_per_group", c.users_per_group},
           {"posts", c.posts},
           {"votes_per_user", c.votes_per_user},
           {"noise", c.noise},
           {"seed", c.seed},
           {"communities", c.communities},
           {"preference", c.preference == PreferenceMode::Opposing ? "opposing" : "independent"},
           {"up_prior", c.up_prior},
           {"text_fidelity", c.text_fidelity},
           {"words_per_post", c.words_per_post},
           {"pool_size", c.pool_size}};
}

void from_json(const json& j, SynthConfig& c) {
  c = SynthConfig{};
  c.groups = j.value("groups", c.groups);
  c.users_per_group = j.value("users_per_group", c.users_per_group);
  c.posts = j.value("posts", c.posts);
  c.votes_per_user = j.value("votes_per_user", c.votes_per_user);
  c.noise = j.value("noise", c.noise);
  c.seed = j.value("seed", c.seed);
  c.communities = j.value("communities", c.communities);
  c.preference = pick(j, "preference", c.preference,
                      {{"opposing", PreferenceMode::Opposing}, {"independent", PreferenceMode::Independent}});
  c.up_prior = j.value("up_prior", c.up_prior);
  c.text_fidelity = j.value("text_fidelity", c.text_fidelity);
  c.words_per_post = j.value("words_per_post", c.words_per_post);
  c.pool_size = j.value("pool_size", c.pool_size);
}

void to_json(json& j, const CommunityConfig& c) {
  j = json{{"community", c.community},
           {"curators", c.curators},
           {"curation_threshold", c.curation_threshold},
           {"confidence_threshold", c.confidence_threshold},
           {"min_curator_votes", c.min_curator_votes},
           {"version", c.version}};
}

void from_json(const json& j, CommunityConfig& c) {
  c.community = j.at("community").get<std::string>();
  c.curators = j.at("curators").get<std::vector<std::string>>();
  c.curation_threshold = j.at("curation_threshold").get<double>();
  c.confidence_threshold = j.at("confidence_threshold").get<double>();
  c.min_curator_votes = j.value("min_curator_votes", 5);
  c.version = j.value("version", std::uint64_t{0});
}

void to_json(json& j, const CuratorEntry& e) {
  j = json{{"curator", e.curator}, {"source", to_string(e.source)}};
  j["confidence"] = e.confidence ? json(*e.confidence) : json(nullptr);
}

void from_json(const json& j, CuratorEntry& e) {
  e.curator = j.at("curator").get<std::string>();
  const auto s = j.at("source").get<std::string>();
  if (s == "ACTUAL_UP") e.source = BreakdownSource::ActualUp;
  else if (s == "ACTUAL_DOWN") e.source = BreakdownSource::ActualDown;
  else if (s == "PREDICTED_UP") e.source = BreakdownSource::PredictedUp;
  else if (s == "PREDICTED_DOWN") e.source = BreakdownSource::PredictedDown;
  else throw std::invalid_argument("unknown breakdown source '" + s + "'");
  if (j.contains("confidence") && !j.at("confidence").is_null()) e.confidence = j.at("confidence").get<double>();
  else e.confidence.reset();
}

void to_json(json& j, const PostStatus& s) {
  j = json{{"post_id", s.post_id},
           {"community", s.community},
           {"curator_upvote_rate", s.curator_upvote_rate},
           {"stage", to_string(s.stage)},
           {"breakdown", s.breakdown},
           {"last_evaluated_at", format_iso8601(s.last_evaluated_at)},
           {"config_version", s.config_version},
           {"stale", s.stale}};
}

void from_json(const json& j, PostStatus& s) {
  s.post_id = j.at("post_id").get<std::string>();
  s.community = j.at("community").get<std::string>();
  s.curator_upvote_rate = j.at("curator_upvote_rate").get<double>();
  s.stage = parse_stage(j.at("stage").get<std::string>());
  s.breakdown = j.at("breakdown").get<CuratorBreakdown>();
  s.last_evaluated_at = parse_iso8601(j.at("last_evaluated_at").get<std::string>());
  s.config_version = j.at("config_version").get<std::uint64_t>();
  s.stale = j.value("stale", false);
}

void to_json(json& j, const FeedEntry& e) {
  j = json{{"post_id", e.post_id}, {"score", e.score}, {"created_at", format_iso8601(e.created_at)}};
}

void to_json(json& j, const PostRecord& p) {
  j = json{{"post_id", p.post_id},       {"author_id", p.author_id}, {"community", p.community},
           {"created_at", format_iso8601(p.created_at)}, {"nsfw", p.nsfw}, {"url_domain", p.url_domain},
           {"text", p.text}};
}

}  // namespace cura
