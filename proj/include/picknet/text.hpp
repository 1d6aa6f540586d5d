#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "picknet/errors.hpp"

namespace picknet {

using TokenSeq = std::vector<int>;

// Reserved vocabulary slots. PAD exists for batch packing only and never
// contributes to losses or metrics.
inline constexpr int kPad = 0;
inline constexpr int kBos = 1;
inline constexpr int kEos = 2;
inline constexpr int kUnk = 3;
inline constexpr int kNumReserved = 4;

namespace detail {

// Punctuation stripped from token edges. Apostrophes survive so a bare "'s"
// token round-trips unchanged.
inline bool strip_char(unsigned char c) { return std::ispunct(c) && c != '\''; }

}  // namespace detail

// Rule set: lowercase, whitespace-split, strip edge punctuation (apostrophes
// excepted), then split a trailing "'s" into its own token. Tokens that end
// up empty are dropped. Hyphens, digits and other in-word punctuation are
// kept verbatim.
inline std::vector<std::string> tokenize(const std::string& raw) {
  std::vector<std::string> out;
  std::string word;
  auto flush = [&]() {
    if (word.empty()) return;
    std::size_t b = 0, e = word.size();
    while (b < e && detail::strip_char(static_cast<unsigned char>(word[b]))) ++b;
    while (e > b && detail::strip_char(static_cast<unsigned char>(word[e - 1]))) --e;
    std::string t = word.substr(b, e - b);
    word.clear();
    if (t.empty()) return;
    if (t.size() > 2 && t.compare(t.size() - 2, 2, "'s") == 0) {
      out.push_back(t.substr(0, t.size() - 2));
      out.push_back("'s");
    } else {
      out.push_back(t);
    }
  };
  for (char ch : raw) {
    unsigned char c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else {
      word.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return out;
}

inline std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string s;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) s.push_back(' ');
    s += tokens[i];
  }
  return s;
}

class Vocabulary {
 public:
  Vocabulary() {
    for (const char* t : {"<PAD>", "<BOS>", "<EOS>", "<UNK>"}) add_token(t);
  }

  // Tokens with corpus count >= min_freq enter the vocabulary, ordered by
  // descending count then lexicographically, starting at id 4.
  static Vocabulary build(const std::vector<std::vector<std::string>>& corpus, int min_freq = 3) {
    if (corpus.empty()) throw UsageError("Vocabulary::build: empty corpus");
    std::map<std::string, std::int64_t> counts;
    for (const auto& sent : corpus)
      for (const auto& tok : sent) ++counts[tok];
    std::vector<std::pair<std::string, std::int64_t>> kept;
    for (const auto& [tok, n] : counts)
      if (n >= min_freq) kept.emplace_back(tok, n);
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    Vocabulary v;
    v.min_freq_ = min_freq;
    for (const auto& [tok, n] : kept) v.add_token(tok);
    return v;
  }

  int size() const { return static_cast<int>(id_to_token_.size()); }

  int lookup(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnk : it->second;
  }

  const std::string& token(int id) const {
    if (id < 0 || id >= size())
      throw UsageError("Vocabulary: id " + std::to_string(id) + " out of range (size " +
                       std::to_string(size()) + ")");
    return id_to_token_[static_cast<std::size_t>(id)];
  }

  TokenSeq encode(const std::vector<std::string>& tokens) const {
    TokenSeq ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(lookup(t));
    return ids;
  }

  std::vector<std::string> decode(const TokenSeq& ids) const {
    std::vector<std::string> tokens;
    tokens.reserve(ids.size());
    for (int id : ids) tokens.push_back(token(id));
    return tokens;
  }

  std::string decode_text(const TokenSeq& ids) const { return join_tokens(decode(ids)); }

  int min_freq() const { return min_freq_; }

  // FNV-1a over the ordered non-reserved tokens; recorded in checkpoints so
  // a captioner is never run against the wrong vocabulary.
  std::string hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&](const std::string& s) {
      for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
      }
      h ^= '\n';
      h *= 0x100000001b3ull;
    };
    for (std::size_t i = kNumReserved; i < id_to_token_.size(); ++i) mix(id_to_token_[i]);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
  }

  nlohmann::json to_json() const {
    std::vector<std::string> tokens(id_to_token_.begin() + kNumReserved, id_to_token_.end());
    return nlohmann::json{{"tokens", tokens}, {"min_freq", min_freq_}};
  }

  static Vocabulary from_json(const nlohmann::json& j) {
    Vocabulary v;
    if (!j.contains("tokens") || !j["tokens"].is_array())
      throw FormatError("vocabulary json: missing \"tokens\" array");
    v.min_freq_ = j.value("min_freq", 3);
    for (const auto& t : j["tokens"]) v.add_token(t.get<std::string>());
    return v;
  }

 private:
  void add_token(const std::string& tok) {
    token_to_id_.emplace(tok, static_cast<int>(id_to_token_.size()));
    id_to_token_.push_back(tok);
  }

  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
  int min_freq_ = 3;
};

}  // namespace picknet
