#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cura {

/// Lowercasing WordPiece tokenizer over a fixed subword list.
class WordPiece {
 public:
  static constexpr std::string_view kPad = "[PAD]";
  static constexpr std::string_view kUnk = "[UNK]";

  WordPiece() = default;
  /// `tokens` must contain [PAD] and [UNK]; ids follow list order.
  explicit WordPiece(std::vector<std::string> tokens);

  /// Builds a subword list from a text corpus: specials, every character seen
  /// (as word-initial and `##` continuation pieces), then whole words that occur
  /// at least `min_count` times, most frequent first, up to `max_size` entries.
  static WordPiece build(const std::vector<std::string>& texts, std::size_t max_size = 30000,
                         std::size_t min_count = 1);
  /// Reads a BERT-style vocab.txt (one token per line).
  static WordPiece load(const std::filesystem::path& path);

  /// Whitespace/punctuation split, lowercased.
  static std::vector<std::string> basic_split(std::string_view text);
  std::vector<int> encode(std::string_view text) const;

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::optional<int> find(std::string_view token) const;
  int unk_id() const { return unk_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
  int unk_ = 1;
};

enum class Feature { Username, Author, Community, CreatedTime, Nsfw, UrlDomain, Text };
inline constexpr std::array<Feature, 7> kFeatureOrder{Feature::Username,  Feature::Author,    Feature::Community,
                                                      Feature::CreatedTime, Feature::Nsfw, Feature::UrlDomain,
                                                      Feature::Text};
std::string_view indicator_token(Feature f);
inline constexpr std::string_view kUnknownUserToken = "[UNKNOWN_USER]";

/// Subword base + feature indicators + UNKNOWN_USER + one token per user.
///
/// Ids: [0, base) subwords, then the seven indicators in feature order, then
/// UNKNOWN_USER, then users in the order given at construction.
class Vocabulary {
 public:
  Vocabulary() = default;
  Vocabulary(WordPiece base, std::vector<std::string> users);

  int size() const { return user_offset() + static_cast<int>(users_.size()); }
  int indicator_id(Feature f) const { return base_.size() + static_cast<int>(f); }
  int unknown_user_id() const { return base_.size() + static_cast<int>(kFeatureOrder.size()); }
  /// Token for a user; UNKNOWN_USER when the user is not in the vocabulary.
  int user_token(const std::string& user_id) const;
  bool knows_user(const std::string& user_id) const { return user_ids_.contains(user_id); }

  const WordPiece& base() const { return base_; }
  const std::vector<std::string>& users() const { return users_; }
  /// Surface form of any id, e.g. "[u17]" for a user token.
  std::string token_text(int id) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.base_.tokens() == b.base_.tokens() && a.users_ == b.users_;
  }

 private:
  int user_offset() const { return unknown_user_id() + 1; }

  WordPiece base_;
  std::vector<std::string> users_;
  std::unordered_map<std::string, int> user_ids_;
};

Vocabulary build_vocabulary(const std::vector<std::string>& users, WordPiece base);

}  // namespace cura
