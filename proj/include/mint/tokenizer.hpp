// Deterministic whitespace tokenizer shared by the bridge text branch
// and the toy frozen LM.

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mint {

enum class Special : int { PAD = 0, CLS = 1, DEC = 2, EOS = 3, UNK = 4 };
constexpr int kNumSpecials = 5;

struct Vocabulary {
  std::map<std::string, int> token_to_id;
  std::vector<std::string> id_to_token;  // index = id; first five are specials

  int size() const { return static_cast<int>(id_to_token.size()); }
  int id_of(const std::string& tok) const;  // UNK for OOV
};

struct TokenSequence {
  std::vector<int> ids;
  std::vector<bool> valid_mask;

  int length() const { return static_cast<int>(ids.size()); }
  int valid_count() const;
};

// Specials plus the (max_size - 5) most frequent lowercase tokens,
// ties broken lexicographically.
Vocabulary build_vocabulary(const std::vector<std::string>& corpus,
                            int max_size);

TokenSequence encode(const Vocabulary& v, const std::string& text,
                     std::optional<Special> prepend, bool append_eos,
                     int max_len);

std::string decode(const Vocabulary& v, const TokenSequence& seq);

void save_vocabulary(const Vocabulary& v, const std::string& path);
Vocabulary load_vocabulary(const std::string& path);

std::vector<std::string> split_lower(const std::string& text);

}  // namespace mint
