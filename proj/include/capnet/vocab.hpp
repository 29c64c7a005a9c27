#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "capnet/hash.hpp"
#include "capnet/numeric.hpp"

namespace capnet {

using TokenId = std::uint32_t;

inline constexpr TokenId kStartId = 0;
inline constexpr TokenId kStopId = 1;
inline constexpr TokenId kUnkId = 2;

inline constexpr std::string_view kStartToken = "<start>";
inline constexpr std::string_view kStopToken = "<stop>";
inline constexpr std::string_view kUnkToken = "<unk>";

class VocabError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Lowercase (ASCII), split on whitespace, strip leading/trailing ASCII
/// punctuation from each piece, drop empties.
std::vector<std::string> tokenize(std::string_view caption);

/// Bijective token <-> id map. Ids 0, 1, 2 are START, STOP, UNK; corpus tokens
/// follow in descending frequency, ties broken lexicographically.
class Vocabulary {
 public:
  static Vocabulary build(std::span<const std::string> captions, std::size_t min_count);

  static Vocabulary load(const std::filesystem::path& path);
  static Vocabulary parse(std::string_view text);
  void save(const std::filesystem::path& path) const;

  /// Canonical file contents; also what `hash()` digests.
  std::string serialize() const;
  Digest hash() const;

  std::size_t size() const { return tokens_.size(); }
  std::size_t min_count() const { return min_count_; }

  /// UNK when absent.
  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const;
  std::size_t count(TokenId id) const;

  /// [START] + ids + [STOP].
  std::vector<TokenId> encode(std::span<const std::string> tokens) const;

  /// Drops START/STOP, joins with single spaces; UNK renders as "<unk>".
  std::string decode(std::span<const TokenId> ids) const;

 private:
  Vocabulary() = default;
  void insert(std::string token, std::size_t count);

  std::vector<std::string> tokens_;
  std::vector<std::size_t> counts_;
  std::unordered_map<std::string, TokenId> index_;
  std::size_t min_count_ = 1;
};

}  // namespace capnet
