#pragma once

#include <string>
#include <vector>

#include "cura/core.hpp"
#include "cura/vocabulary.hpp"

namespace cura {

/// Token ids for one (target user, post) pair.
struct SerializedExample {
  std::vector<int> ids;
  int user_position = 1;  ///< always right after [USERNAME]
  bool unknown_user = false;
  bool truncated = false;
};

/// Lays out `[USERNAME] [user] [AUTHOR] [author] [COMMUNITY] ... [SUBMISSION_TEXT] text`.
/// Only the text is truncated to fit `max_len`; metadata tokens are kept.
SerializedExample serialize_input(const std::string& target_user, const PostRecord& post, const Vocabulary& vocab,
                                  int max_len);

/// Human-readable form of the same layout (no subword splitting, no truncation).
std::string render_input(const std::string& target_user, const PostRecord& post);

}  // namespace cura
