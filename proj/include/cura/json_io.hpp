#pragma once

#include <nlohmann/json.hpp>

#include "cura/feed.hpp"
#include "cura/synth.hpp"

namespace cura {

/// Missing keys keep their defaults, so partial configs are accepted.
void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);
void to_json(nlohmann::json& j, const Hyperparams& h);
void from_json(const nlohmann::json& j, Hyperparams& h);
void to_json(nlohmann::json& j, const SynthConfig& c);
void from_json(const nlohmann::json& j, SynthConfig& c);

void to_json(nlohmann::json& j, const CommunityConfig& c);
void from_json(const nlohmann::json& j, CommunityConfig& c);
void to_json(nlohmann::json& j, const CuratorEntry& e);
void from_json(const nlohmann::json& j, CuratorEntry& e);
void to_json(nlohmann::json& j, const PostStatus& s);
void from_json(const nlohmann::json& j, PostStatus& s);
void to_json(nlohmann::json& j, const FeedEntry& e);
void to_json(nlohmann::json& j, const PostRecord& p);

}  // namespace cura
