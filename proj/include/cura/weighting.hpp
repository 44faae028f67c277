#pragma once

#include "cura/core.hpp"
#include "cura/dataset.hpp"

namespace cura {

/// Class-balancing factor w(x): 1 for upvotes, `downvote_weight` for downvotes.
inline double direction_weight(Direction d, double downvote_weight) {
  return d == Direction::Up ? 1.0 : downvote_weight;
}

/// Loss weight of a (user a, post s, direction x) vote:
///
///   W = 1 / |votes by a with direction x|
///     * |votes on s| / |votes on s with direction x|
///     * w(x)
///
/// Down-weights prolific voters and majority opinions on a post. `stats` must
/// already count the vote itself; a zero count throws std::logic_error.
double compute_weight(const VoteRecord& vote, const VoteStats& stats, double downvote_weight);

}  // namespace cura
