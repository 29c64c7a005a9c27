#include "capnet/vocab.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace capnet {

namespace {

bool is_ascii_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_ascii_punct(unsigned char c) {
  return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) ||
         (c >= 123 && c <= 126);
}

std::size_t parse_count(std::string_view field, std::size_t line_no) {
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw VocabError("vocabulary line " + std::to_string(line_no) + ": bad number '" +
                     std::string(field) + "'");
  }
  return value;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view caption) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < caption.size()) {
    while (i < caption.size() && is_ascii_space(caption[i])) ++i;
    std::size_t j = i;
    while (j < caption.size() && !is_ascii_space(caption[j])) ++j;
    std::size_t b = i, e = j;
    while (b < e && is_ascii_punct(caption[b])) ++b;
    while (e > b && is_ascii_punct(caption[e - 1])) --e;
    if (b < e) {
      std::string tok(caption.substr(b, e - b));
      for (auto& ch : tok) {
        if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
      }
      out.push_back(std::move(tok));
    }
    i = j;
  }
  return out;
}

void Vocabulary::insert(std::string token, std::size_t count) {
  const auto id = static_cast<TokenId>(tokens_.size());
  if (!index_.emplace(token, id).second) {
    throw VocabError("duplicate token '" + token + "'");
  }
  tokens_.push_back(std::move(token));
  counts_.push_back(count);
}

Vocabulary Vocabulary::build(std::span<const std::string> captions, std::size_t min_count) {
  if (captions.empty()) throw VocabError("cannot build a vocabulary from zero captions");
  if (min_count < 1) throw VocabError("min_count must be >= 1");

  std::map<std::string, std::size_t> freq;
  for (const auto& caption : captions) {
    for (auto& tok : tokenize(caption)) ++freq[std::move(tok)];
  }

  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : freq) {
    if (n >= min_count) kept.emplace_back(tok, n);
  }
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary v;
  v.min_count_ = min_count;
  v.insert(std::string(kStartToken), 0);
  v.insert(std::string(kStopToken), 0);
  v.insert(std::string(kUnkToken), 0);
  for (auto& [tok, n] : kept) v.insert(std::move(tok), n);
  return v;
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    out += tokens_[i];
    out += '\t';
    out += std::to_string(i);
    out += '\t';
    out += std::to_string(counts_[i]);
    out += '\n';
  }
  return out;
}

Digest Vocabulary::hash() const { return sha256(serialize()); }

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw VocabError("cannot write vocabulary to " + path.string());
  f << serialize();
  if (!f) throw VocabError("write failed for " + path.string());
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw VocabError("cannot read vocabulary " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

Vocabulary Vocabulary::parse(std::string_view text) {
  Vocabulary v;
  v.min_count_ = 0;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.empty()) continue;

    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string_view::npos || line.find('\t', t2 + 1) != std::string_view::npos) {
      throw VocabError("vocabulary line " + std::to_string(line_no) +
                       ": expected <token>\\t<id>\\t<count>");
    }
    const auto token = line.substr(0, t1);
    const auto id = parse_count(line.substr(t1 + 1, t2 - t1 - 1), line_no);
    const auto count = parse_count(line.substr(t2 + 1), line_no);
    if (token.empty()) throw VocabError("vocabulary line " + std::to_string(line_no) + ": empty token");
    if (id != v.tokens_.size()) {
      throw VocabError("vocabulary line " + std::to_string(line_no) + ": id " + std::to_string(id) +
                       " out of sequence (expected " + std::to_string(v.tokens_.size()) + ")");
    }
    v.insert(std::string(token), count);
  }
  if (v.size() < 3 || v.tokens_[kStartId] != kStartToken || v.tokens_[kStopId] != kStopToken ||
      v.tokens_[kUnkId] != kUnkToken) {
    throw VocabError("vocabulary must begin with the reserved <start>, <stop>, <unk> symbols");
  }
  return v;
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end() || it->second <= kUnkId) return kUnkId;
  return it->second;
}

bool Vocabulary::contains(std::string_view token) const { return id(token) != kUnkId; }

const std::string& Vocabulary::token(TokenId id) const {
  if (id >= tokens_.size()) {
    throw IndexError("token id " + std::to_string(id) + " outside vocabulary of size " +
                            std::to_string(tokens_.size()));
  }
  return tokens_[id];
}

std::size_t Vocabulary::count(TokenId id) const {
  token(id);
  return counts_[id];
}

std::vector<TokenId> Vocabulary::encode(std::span<const std::string> tokens) const {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size() + 2);
  ids.push_back(kStartId);
  for (const auto& t : tokens) ids.push_back(id(t));
  ids.push_back(kStopId);
  return ids;
}

std::string Vocabulary::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (auto i : ids) {
    const auto& tok = token(i);
    if (i == kStartId || i == kStopId) continue;
    if (!out.empty()) out += ' ';
    out += tok;
  }
  return out;
}

}  // namespace capnet
