#include "cura/vocabulary.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

namespace cura {

namespace {

constexpr std::size_t kMaxWordChars = 100;

/// Byte length of the UTF-8 sequence starting with `lead`.
std::size_t utf8_len(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

std::vector<std::size_t> char_boundaries(std::string_view word) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < word.size(); i += utf8_len(static_cast<unsigned char>(word[i]))) out.push_back(i);
  out.push_back(word.size());
  return out;
}

}  // namespace

WordPiece::WordPiece(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!ids_.emplace(tokens_[i], static_cast<int>(i)).second)
      throw std::invalid_argument("duplicate token '" + tokens_[i] + "' in subword vocabulary");
  }
  if (!ids_.contains(std::string(kPad)) || !ids_.contains(std::string(kUnk)))
    throw std::invalid_argument("subword vocabulary must contain [PAD] and [UNK]");
  unk_ = ids_.at(std::string(kUnk));
}

std::vector<std::string> WordPiece::basic_split(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) words.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80 && std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      words.emplace_back(1, ch);
    } else {
      cur.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
    }
  }
  flush();
  return words;
}

WordPiece WordPiece::build(const std::vector<std::string>& texts, std::size_t max_size, std::size_t min_count) {
  std::map<std::string, std::size_t> counts;
  std::set<std::string> chars;
  for (const auto& t : texts) {
    for (auto& w : basic_split(t)) {
      const auto bounds = char_boundaries(w);
      for (std::size_t i = 0; i + 1 < bounds.size(); ++i) chars.insert(w.substr(bounds[i], bounds[i + 1] - bounds[i]));
      ++counts[std::move(w)];
    }
  }
  std::vector<std::string> tokens{std::string(kPad), std::string(kUnk), "[CLS]", "[SEP]", "[MASK]"};
  std::set<std::string> present(tokens.begin(), tokens.end());
  auto add = [&](std::string tok) {
    if (tokens.size() < max_size && present.insert(tok).second) tokens.push_back(std::move(tok));
  };
  for (const auto& c : chars) add(c);
  for (const auto& c : chars) add("##" + c);
  std::vector<std::pair<std::string, std::size_t>> words(counts.begin(), counts.end());
  std::stable_sort(words.begin(), words.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  for (auto& [w, n] : words)
    if (n >= min_count) add(w);
  return WordPiece(std::move(tokens));
}

WordPiece WordPiece::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vocabulary " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return WordPiece(std::move(tokens));
}

std::optional<int> WordPiece::find(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::vector<int> WordPiece::encode(std::string_view text) const {
  std::vector<int> out;
  std::string piece;
  for (const auto& word : basic_split(text)) {
    const auto bounds = char_boundaries(word);
    if (bounds.size() - 1 > kMaxWordChars) {
      out.push_back(unk_);
      continue;
    }
    std::vector<int> pieces;
    std::size_t start = 0;
    bool bad = false;
    while (start + 1 < bounds.size()) {
      std::optional<int> match;
      std::size_t end = bounds.size() - 1;
      for (; end > start; --end) {
        piece = (start > 0 ? "##" : "") + word.substr(bounds[start], bounds[end] - bounds[start]);
        if ((match = find(piece))) break;
      }
      if (!match) {
        bad = true;
        break;
      }
      pieces.push_back(*match);
      start = end;
    }
    if (bad) out.push_back(unk_);
    else out.insert(out.end(), pieces.begin(), pieces.end());
  }
  return out;
}

std::string_view indicator_token(Feature f) {
  switch (f) {
    case Feature::Username: return "[USERNAME]";
    case Feature::Author: return "[AUTHOR]";
    case Feature::Community: return "[COMMUNITY]";
    case Feature::CreatedTime: return "[CREATED_TIME]";
    case Feature::Nsfw: return "[NSFW]";
    case Feature::UrlDomain: return "[SUBMISSION_URL_DOMAIN]";
    case Feature::Text: return "[SUBMISSION_TEXT]";
  }
  return "";
}

Vocabulary::Vocabulary(WordPiece base, std::vector<std::string> users) : base_(std::move(base)), users_(std::move(users)) {
  for (std::size_t i = 0; i < users_.size(); ++i) {
    if (!user_ids_.emplace(users_[i], user_offset() + static_cast<int>(i)).second)
      throw std::invalid_argument("duplicate user '" + users_[i] + "' in vocabulary");
  }
}

int Vocabulary::user_token(const std::string& user_id) const {
  auto it = user_ids_.find(user_id);
  return it == user_ids_.end() ? unknown_user_id() : it->second;
}

std::string Vocabulary::token_text(int id) const {
  if (id < 0 || id >= size()) throw std::out_of_range("token id outside the vocabulary");
  if (id < base_.size()) return base_.tokens()[static_cast<std::size_t>(id)];
  if (id < unknown_user_id()) return std::string(indicator_token(kFeatureOrder[static_cast<std::size_t>(id - base_.size())]));
  if (id == unknown_user_id()) return std::string(kUnknownUserToken);
  return "[" + users_[static_cast<std::size_t>(id - user_offset())] + "]";
}

Vocabulary build_vocabulary(const std::vector<std::string>& users, WordPiece base) {
  return Vocabulary(std::move(base), users);
}

}  // namespace cura
