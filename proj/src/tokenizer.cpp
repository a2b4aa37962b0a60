#include "mint/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace mint {

namespace {
const std::vector<std::string> kSpecialNames = {"[PAD]", "[CLS]", "[DEC]",
                                                "[EOS]", "[UNK]"};
}

std::vector<std::string> split_lower(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) {
        out.push_back(cur);
        cur.clear();
      }
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

int Vocabulary::id_of(const std::string& tok) const {
  auto it = token_to_id.find(tok);
  return it == token_to_id.end() ? static_cast<int>(Special::UNK) : it->second;
}

int TokenSequence::valid_count() const {
  int n = 0;
  for (bool b : valid_mask) n += b ? 1 : 0;
  return n;
}

Vocabulary build_vocabulary(const std::vector<std::string>& corpus,
                            int max_size) {
  if (corpus.empty()) throw std::runtime_error("empty corpus");
  if (max_size < kNumSpecials + 1)
    throw std::runtime_error("max_size must be at least 6");

  std::map<std::string, long> counts;
  for (const std::string& line : corpus)
    for (const std::string& tok : split_lower(line)) counts[tok]++;

  std::vector<std::pair<std::string, long>> items(counts.begin(), counts.end());
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary v;
  for (const std::string& s : kSpecialNames) {
    v.token_to_id[s] = static_cast<int>(v.id_to_token.size());
    v.id_to_token.push_back(s);
  }
  for (const auto& [tok, cnt] : items) {
    if (v.size() >= max_size) break;
    v.token_to_id[tok] = v.size();
    v.id_to_token.push_back(tok);
  }
  return v;
}

TokenSequence encode(const Vocabulary& v, const std::string& text,
                     std::optional<Special> prepend, bool append_eos,
                     int max_len) {
  if (max_len < 1) throw std::runtime_error("max_len must be >= 1");
  std::vector<int> ids;
  if (prepend) ids.push_back(static_cast<int>(*prepend));
  for (const std::string& tok : split_lower(text)) ids.push_back(v.id_of(tok));
  if (append_eos) ids.push_back(static_cast<int>(Special::EOS));
  if (static_cast<int>(ids.size()) > max_len) ids.resize(max_len);

  TokenSequence seq;
  seq.ids = ids;
  seq.valid_mask.assign(ids.size(), true);
  while (static_cast<int>(seq.ids.size()) < max_len) {
    seq.ids.push_back(static_cast<int>(Special::PAD));
    seq.valid_mask.push_back(false);
  }
  return seq;
}

std::string decode(const Vocabulary& v, const TokenSequence& seq) {
  std::string out;
  for (size_t i = 0; i < seq.ids.size(); ++i) {
    int id = seq.ids[i];
    if (id < 0 || id >= v.size()) throw std::runtime_error("unknown id");
    if (id < kNumSpecials) continue;
    if (!out.empty()) out.push_back(' ');
    out += v.id_to_token[id];
  }
  return out;
}

void save_vocabulary(const Vocabulary& v, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  for (const std::string& tok : v.id_to_token) f << tok << "\n";
}

Vocabulary load_vocabulary(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  Vocabulary v;
  std::string line;
  while (std::getline(f, line)) {
    v.token_to_id[line] = v.size();
    v.id_to_token.push_back(line);
  }
  if (v.size() < kNumSpecials) throw std::runtime_error("truncated vocabulary");
  return v;
}

}  // namespace mint
