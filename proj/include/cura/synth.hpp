#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cura/core.hpp"

namespace cura {

enum class PreferenceMode { Opposing, Independent };

/// Generator settings. Keys in the `key = value` config file match the field names.
struct SynthConfig {
  int groups = 2;
  int users_per_group = 100;
  int posts = 500;
  int votes_per_user = 60;
  double noise = 0.1;
  std::uint64_t seed = 7;
  int communities = 1;
  PreferenceMode preference = PreferenceMode::Opposing;
  double up_prior = 0.5;        ///< P(group likes a post) in independent mode
  double text_fidelity = 0.75;  ///< P(post text is drawn from the word pool of its true stance)
  int words_per_post = 8;
  int pool_size = 40;  ///< words per stance pool

  void validate() const;
};

SynthConfig parse_synth_config(const std::filesystem::path& path);
SynthConfig parse_synth_config_text(const std::string& text);
std::map<std::string, std::string> parse_key_values(const std::string& text);

/// Ground truth the generator planted, for oracle checks.
struct PlantedLabels {
  std::map<std::string, int> user_group;
  /// post_id -> preferred direction for each group
  std::map<std::string, std::vector<Direction>> post_preference;

  Direction preferred(const std::string& user_id, const std::string& post_id) const {
    return post_preference.at(post_id).at(static_cast<std::size_t>(user_group.at(user_id)));
  }
  std::vector<std::string> group_members(int group) const;
};

struct SynthCorpus {
  VoteCollection votes;
  PostCollection posts;
  PlantedLabels labels;
};

/// Two-level Bernoulli model: each user belongs to a latent group, every post has
/// a per-group preferred direction, and a vote equals the voter's group preference
/// with probability 1 - noise.
SynthCorpus synth_generate(const SynthConfig& config);

}  // namespace cura
