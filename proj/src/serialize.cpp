#include "cura/serialize.hpp"

#include <algorithm>

namespace cura {

namespace {

std::string nsfw_text(bool nsfw) { return nsfw ? "true" : "false"; }

}  // namespace

SerializedExample serialize_input(const std::string& target_user, const PostRecord& post, const Vocabulary& vocab,
                                  int max_len) {
  SerializedExample ex;
  auto& ids = ex.ids;
  const auto& wp = vocab.base();
  auto append = [&](const std::vector<int>& v) { ids.insert(ids.end(), v.begin(), v.end()); };

  ids.push_back(vocab.indicator_id(Feature::Username));
  ids.push_back(vocab.user_token(target_user));
  ex.unknown_user = !vocab.knows_user(target_user);
  ids.push_back(vocab.indicator_id(Feature::Author));
  ids.push_back(vocab.user_token(post.author_id));
  ids.push_back(vocab.indicator_id(Feature::Community));
  append(wp.encode(post.community));
  ids.push_back(vocab.indicator_id(Feature::CreatedTime));
  append(wp.encode(format_human_date(post.created_at)));
  ids.push_back(vocab.indicator_id(Feature::Nsfw));
  append(wp.encode(nsfw_text(post.nsfw)));
  ids.push_back(vocab.indicator_id(Feature::UrlDomain));
  append(wp.encode(post.url_domain));
  ids.push_back(vocab.indicator_id(Feature::Text));

  const auto limit = static_cast<std::size_t>(std::max(max_len, 2));
  if (ids.size() >= limit) {
    // Pathological metadata; the target-user token at position 1 still survives.
    ex.truncated = ids.size() > limit || !post.text.empty();
    ids.resize(limit);
    return ex;
  }
  const auto text = wp.encode(post.text);
  const std::size_t room = limit - ids.size();
  ex.truncated = text.size() > room;
  ids.insert(ids.end(), text.begin(), text.begin() + static_cast<std::ptrdiff_t>(std::min(room, text.size())));
  return ex;
}

std::string render_input(const std::string& target_user, const PostRecord& post) {
  std::string out;
  auto field = [&](Feature f, const std::string& value) {
    if (!out.empty()) out += ' ';
    out += indicator_token(f);
    if (!value.empty()) {
      out += ' ';
      out += value;
    }
  };
  field(Feature::Username, "[" + target_user + "]");
  field(Feature::Author, "[" + post.author_id + "]");
  field(Feature::Community, post.community);
  field(Feature::CreatedTime, format_human_date(post.created_at));
  field(Feature::Nsfw, nsfw_text(post.nsfw));
  field(Feature::UrlDomain, post.url_domain);
  field(Feature::Text, post.text);
  return out;
}

}  // namespace cura
