#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace boter {

/// Repo-wide string canonicalization used for retrieval, features, answer
/// matching and scoring: NFKC, lowercase, punctuation to space, whitespace
/// collapsed and trimmed. Idempotent.
std::string normalize_text(std::string_view raw);

/// Splits already-normalized text on single spaces.
std::vector<std::string> split_tokens(std::string_view normalized);

/// normalize_text followed by split_tokens.
std::vector<std::string> tokenize(std::string_view raw);

inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

/// 64-bit FNV-1a. Passing a previous result as `state` continues the hash,
/// so fnv1a64(b, fnv1a64(a)) == fnv1a64(a + b).
constexpr std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state = kFnvOffset) {
  for (char c : bytes) {
    state ^= static_cast<std::uint8_t>(c);
    state *= kFnvPrime;
  }
  return state;
}

/// True when `phrase` occurs in `text` on token boundaries. Both arguments
/// must already be normalized; an empty phrase never matches.
bool contains_phrase(std::string_view normalized_text, std::string_view normalized_phrase);

}  // namespace boter
