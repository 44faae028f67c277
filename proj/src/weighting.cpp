#include "cura/weighting.hpp"

#include <stdexcept>

namespace cura {

double compute_weight(const VoteRecord& vote, const VoteStats& stats, double downvote_weight) {
  const auto user_same = stats.user(vote.user_id).of(vote.direction);
  const auto post = stats.post(vote.post_id);
  const auto post_same = post.of(vote.direction);
  if (user_same == 0 || post_same == 0)
    throw std::logic_error("vote statistics do not include the vote by " + vote.user_id + " on " + vote.post_id);
  return (1.0 / static_cast<double>(user_same)) *
         (static_cast<double>(post.total()) / static_cast<double>(post_same)) *
         direction_weight(vote.direction, downvote_weight);
}

}  // namespace cura
