#include "cura/synth.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace cura {

void SynthConfig::validate() const {
  if (groups < 1 || users_per_group < 1 || posts < 1 || votes_per_user < 1 || communities < 1)
    throw ValidationError("synthetic config needs at least one group, user, post, vote and community");
  if (!(noise >= 0.0 && noise < 0.5)) throw ValidationError("noise must lie in [0, 0.5)");
  if (!(text_fidelity >= 0.0 && text_fidelity <= 1.0)) throw ValidationError("text_fidelity must lie in [0, 1]");
  if (!(up_prior >= 0.0 && up_prior <= 1.0)) throw ValidationError("up_prior must lie in [0, 1]");
  if (preference == PreferenceMode::Independent && groups > 8)
    throw ValidationError("independent preference mode supports at most 8 groups");
  if (words_per_post < 0 || pool_size < 1) throw ValidationError("bad text settings");
}

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", lineno);
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

SynthConfig parse_synth_config_text(const std::string& text) {
  SynthConfig c;
  for (const auto& [key, value] : parse_key_values(text)) {
    if (key == "groups") c.groups = std::stoi(value);
    else if (key == "users_per_group") c.users_per_group = std::stoi(value);
    else if (key == "posts") c.posts = std::stoi(value);
    else if (key == "votes_per_user") c.votes_per_user = std::stoi(value);
    else if (key == "noise") c.noise = std::stod(value);
    else if (key == "seed") c.seed = std::stoull(value);
    else if (key == "communities") c.communities = std::stoi(value);
    else if (key == "preference") {
      if (value == "opposing") c.preference = PreferenceMode::Opposing;
      else if (value == "independent") c.preference = PreferenceMode::Independent;
      else throw ValidationError("preference must be 'opposing' or 'independent'");
    } else if (key == "up_prior") c.up_prior = std::stod(value);
    else if (key == "text_fidelity") c.text_fidelity = std::stod(value);
    else if (key == "words_per_post") c.words_per_post = std::stoi(value);
    else if (key == "pool_size") c.pool_size = std::stoi(value);
    else throw ValidationError("unknown synthetic config key '" + key + "'");
  }
  c.validate();
  return c;
}

SynthConfig parse_synth_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_synth_config_text(ss.str());
}

std::vector<std::string> PlantedLabels::group_members(int group) const {
  std::vector<std::string> out;
  for (const auto& [user, g] : user_group)
    if (g == group) out.push_back(user);
  return out;
}

namespace {

std::string make_word(int pool, int index) {
  static constexpr const char* kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"};
  static constexpr const char* kVowels[] = {"a", "e", "i", "o", "u"};
  std::string word;
  int n = pool * 1000 + index + 1;
  while (n > 0) {
    word += kOnsets[n % 14];
    n /= 14;
    word += kVowels[n % 5];
    n /= 5;
  }
  return word;
}

std::string make_title_token(int post) {
  // Letters only so the tokenizer keeps it as one word.
  std::string s = "q";
  int n = post;
  do {
    s.push_back(static_cast<char>('a' + n % 26));
    n /= 26;
  } while (n > 0);
  return s + "x";
}

}  // namespace

SynthCorpus synth_generate(const SynthConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SynthCorpus out;

  const int users = config.groups * config.users_per_group;
  std::vector<std::string> user_ids(static_cast<std::size_t>(users));
  std::vector<int> group_of(static_cast<std::size_t>(users));
  for (int u = 0; u < users; ++u) {
    user_ids[u] = "u" + std::to_string(u);
    group_of[u] = u % config.groups;
    out.labels.user_group[user_ids[u]] = group_of[u];
  }

  const int pools = config.preference == PreferenceMode::Opposing ? 2 : (1 << config.groups);
  const Timestamp epoch = parse_iso8601("2024-01-01T00:00:00Z");

  std::vector<std::vector<Direction>> prefs(static_cast<std::size_t>(config.posts));
  for (int p = 0; p < config.posts; ++p) {
    auto& pref = prefs[p];
    pref.resize(static_cast<std::size_t>(config.groups));
    int stance = 0;
    if (config.preference == PreferenceMode::Opposing) {
      stance = unit(rng) < 0.5 ? 0 : 1;
      for (int g = 0; g < config.groups; ++g) pref[g] = (g % 2 == stance) ? Direction::Up : Direction::Down;
    } else {
      for (int g = 0; g < config.groups; ++g) {
        pref[g] = unit(rng) < config.up_prior ? Direction::Up : Direction::Down;
        if (pref[g] == Direction::Up) stance |= 1 << g;
      }
    }
    int pool = stance;
    if (unit(rng) >= config.text_fidelity && pools > 1) {
      pool = std::uniform_int_distribution<int>(0, pools - 2)(rng);
      if (pool >= stance) ++pool;
    }
    std::string text = make_title_token(p);
    std::uniform_int_distribution<int> word_pick(0, config.pool_size - 1);
    for (int w = 0; w < config.words_per_post; ++w) text += " " + make_word(pool, word_pick(rng));

    PostRecord post;
    post.post_id = "p" + std::to_string(p);
    post.author_id = user_ids[std::uniform_int_distribution<int>(0, users - 1)(rng)];
    post.community = "c" + std::to_string(p % config.communities);
    post.created_at = epoch + std::chrono::hours(p);
    post.nsfw = false;
    post.text = std::move(text);
    out.labels.post_preference[post.post_id] = pref;
    out.posts.push_back(std::move(post));
  }

  const int per_user = std::min(config.votes_per_user, config.posts);
  std::vector<int> post_order(static_cast<std::size_t>(config.posts));
  std::iota(post_order.begin(), post_order.end(), 0);
  for (int u = 0; u < users; ++u) {
    // Partial Fisher-Yates: the first `per_user` entries are a uniform sample.
    for (int i = 0; i < per_user; ++i) {
      const int j = std::uniform_int_distribution<int>(i, config.posts - 1)(rng);
      std::swap(post_order[i], post_order[j]);
    }
    for (int i = 0; i < per_user; ++i) {
      const int p = post_order[i];
      Direction d = prefs[p][group_of[u]];
      if (unit(rng) < config.noise) d = opposite(d);
      const auto delay = std::chrono::minutes(std::uniform_int_distribution<int>(1, 24 * 60)(rng));
      out.votes.push_back({user_ids[u], out.posts[p].post_id, d, out.posts[p].created_at + delay, out.posts[p].community});
    }
  }
  return out;
}

}  // namespace cura
