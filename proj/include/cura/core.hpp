#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cura {

using Timestamp = std::chrono::sys_seconds;

enum class Direction : std::uint8_t { Up, Down };

inline constexpr std::string_view to_string(Direction d) { return d == Direction::Up ? "up" : "down"; }
Direction parse_direction(std::string_view s);
inline constexpr Direction opposite(Direction d) { return d == Direction::Up ? Direction::Down : Direction::Up; }
inline constexpr double label_of(Direction d) { return d == Direction::Up ? 1.0 : 0.0; }

/// Parses `YYYY-MM-DDTHH:MM:SS[Z]` (a space is accepted in place of `T`).
Timestamp parse_iso8601(std::string_view s);
std::string format_iso8601(Timestamp t);
/// Human-readable form used in model inputs, e.g. "Mon Nov 6, 2023".
std::string format_human_date(Timestamp t);

struct VoteRecord {
  std::string user_id;
  std::string post_id;
  Direction direction = Direction::Up;
  Timestamp voted_at{};
  std::string community;

  friend bool operator==(const VoteRecord&, const VoteRecord&) = default;
};

struct PostRecord {
  std::string post_id;
  std::string author_id;
  std::string community;
  Timestamp created_at{};
  bool nsfw = false;
  std::string url_domain;
  std::string text;

  friend bool operator==(const PostRecord&, const PostRecord&) = default;
};

using VoteCollection = std::vector<VoteRecord>;
using PostCollection = std::vector<PostRecord>;

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NotFoundError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

}  // namespace cura
