#include "boter/text.hpp"

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf16.h>

#include <stdexcept>

namespace boter {
namespace {

const icu::Normalizer2& nfkc() {
  static const icu::Normalizer2* instance = [] {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* n = icu::Normalizer2::getNFKCInstance(status);
    if (U_FAILURE(status) || n == nullptr) {
      throw std::runtime_error("ICU NFKC normalizer unavailable");
    }
    return n;
  }();
  return *instance;
}

bool is_separator(UChar32 c) {
  return u_ispunct(c) || u_isUWhiteSpace(c) || u_iscntrl(c) || c == 0xFFFD;
}

std::string normalize_once(std::string_view raw) {
  UErrorCode status = U_ZERO_ERROR;
  icu::UnicodeString s =
      icu::UnicodeString::fromUTF8(icu::StringPiece(raw.data(), static_cast<int32_t>(raw.size())));
  s = nfkc().normalize(s, status);
  s.toLower(icu::Locale::getRoot());
  s = nfkc().normalize(s, status);
  if (U_FAILURE(status)) {
    throw std::runtime_error("ICU normalization failed");
  }

  icu::UnicodeString out;
  bool pending_space = false;
  for (int32_t i = 0; i < s.length();) {
    const UChar32 c = s.char32At(i);
    i += U16_LENGTH(c);
    if (is_separator(c)) {
      pending_space = !out.isEmpty();
      continue;
    }
    if (pending_space) {
      out.append(static_cast<UChar>(u' '));
      pending_space = false;
    }
    out.append(c);
  }
  std::string result;
  out.toUTF8String(result);
  return result;
}

}  // namespace

std::string normalize_text(std::string_view raw) {
  if (raw.empty()) {
    return {};
  }
  // A single pass is a fixpoint for everything except exotic inputs where
  // case mapping re-exposes compatibility characters; iterate to be exact.
  std::string current = normalize_once(raw);
  for (int pass = 0; pass < 4; ++pass) {
    std::string next = normalize_once(current);
    if (next == current) {
      break;
    }
    current = std::move(next);
  }
  return current;
}

std::vector<std::string> split_tokens(std::string_view normalized) {
  std::vector<std::string> tokens;
  std::size_t start = 0;
  while (start < normalized.size()) {
    std::size_t end = normalized.find(' ', start);
    if (end == std::string_view::npos) {
      end = normalized.size();
    }
    if (end > start) {
      tokens.emplace_back(normalized.substr(start, end - start));
    }
    start = end + 1;
  }
  return tokens;
}

std::vector<std::string> tokenize(std::string_view raw) { return split_tokens(normalize_text(raw)); }

bool contains_phrase(std::string_view normalized_text, std::string_view normalized_phrase) {
  if (normalized_phrase.empty() || normalized_phrase.size() > normalized_text.size()) {
    return false;
  }
  std::size_t pos = normalized_text.find(normalized_phrase);
  while (pos != std::string_view::npos) {
    const std::size_t end = pos + normalized_phrase.size();
    const bool left_ok = pos == 0 || normalized_text[pos - 1] == ' ';
    const bool right_ok = end == normalized_text.size() || normalized_text[end] == ' ';
    if (left_ok && right_ok) {
      return true;
    }
    pos = normalized_text.find(normalized_phrase, pos + 1);
  }
  return false;
}

}  // namespace boter
