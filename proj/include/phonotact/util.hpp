#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace phonotact {

// ---------------------------------------------------------------------------
// Errors. InputError and its subtypes mark problems with user-supplied data
// or configuration (CLI exit code 2); everything else is a runtime failure
// (exit code 1).
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InputError : Error {
  using Error::Error;
};

struct ParseError : InputError {
  ParseError(std::size_t line, const std::string& msg)
      : InputError("line " + std::to_string(line) + ": " + msg), line(line) {}
  std::size_t line;
};

struct TokenizeError : InputError {
  TokenizeError(const std::string& symbol, std::size_t byte_offset,
                const std::string& msg)
      : InputError(msg + " (symbol \"" + symbol + "\" at byte " +
                   std::to_string(byte_offset) + ")"),
        symbol(symbol),
        byte_offset(byte_offset) {}
  std::string symbol;
  std::size_t byte_offset;
};

struct SyllabifyError : InputError {
  using InputError::InputError;
};

struct ConfigError : InputError {
  using InputError::InputError;
};

struct TrainError : Error {
  using Error::Error;
};

struct FitError : Error {
  using Error::Error;
};

struct StatsError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Language profiles select tokenization and syllabification conventions.
// ---------------------------------------------------------------------------

enum class LanguageProfile { generic, dutch, min };

inline const char* to_string(LanguageProfile p) {
  switch (p) {
    case LanguageProfile::generic: return "generic";
    case LanguageProfile::dutch: return "dutch";
    case LanguageProfile::min: return "min";
  }
  return "generic";
}

inline LanguageProfile parse_profile(std::string_view s) {
  if (s == "generic") return LanguageProfile::generic;
  if (s == "dutch") return LanguageProfile::dutch;
  if (s == "min") return LanguageProfile::min;
  throw ConfigError("unknown language profile \"" + std::string(s) + "\"");
}

// ---------------------------------------------------------------------------
// Deterministic RNG. std distributions are implementation-defined, so all
// draws are derived from the raw mt19937_64 stream; results are identical
// for a given seed on any conforming platform.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  return splitmix64(seed ^ fnv1a64(tag));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(splitmix64(seed)) {}

  std::uint64_t next_u64() {
    // xorshift-multiplied stream seeded through splitmix; self-contained so
    // behaviour never depends on libstdc++ internals
    std::uint64_t x = state_;
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    state_ = x;
    return x * 0x2545f4914f6cdd1dull;
  }

  // uniform in [0, 1)
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // uniform integer in [0, n)
  std::size_t below(std::size_t n) {
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Box-Muller, deterministic
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = next_unit();
    double u2 = next_unit();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// UTF-8 handling for IPA transcriptions.
// ---------------------------------------------------------------------------

struct Codepoint {
  char32_t value;
  std::size_t byte_offset;
  std::size_t byte_len;
};

inline std::vector<Codepoint> decode_utf8(std::string_view s) {
  std::vector<Codepoint> out;
  std::size_t i = 0;
  while (i < s.size()) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    std::size_t len;
    char32_t cp;
    if (c < 0x80) {
      len = 1;
      cp = c;
    } else if ((c & 0xe0) == 0xc0) {
      len = 2;
      cp = c & 0x1f;
    } else if ((c & 0xf0) == 0xe0) {
      len = 3;
      cp = c & 0x0f;
    } else if ((c & 0xf8) == 0xf0) {
      len = 4;
      cp = c & 0x07;
    } else {
      throw InputError("invalid UTF-8 at byte " + std::to_string(i));
    }
    if (i + len > s.size())
      throw InputError("truncated UTF-8 at byte " + std::to_string(i));
    for (std::size_t k = 1; k < len; ++k) {
      unsigned char cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xc0) != 0x80)
        throw InputError("invalid UTF-8 continuation at byte " +
                         std::to_string(i + k));
      cp = (cp << 6) | (cc & 0x3f);
    }
    out.push_back({cp, i, len});
    i += len;
  }
  return out;
}

// Combining marks must never be severed from their base symbol during
// tokenization; these ranges cover the marks that occur in IPA material.
inline bool is_combining_mark(char32_t c) {
  return (c >= 0x0300 && c <= 0x036f) || (c >= 0x1ab0 && c <= 0x1aff) ||
         (c >= 0x1dc0 && c <= 0x1dff) || (c >= 0x20d0 && c <= 0x20ff) ||
         (c >= 0xfe20 && c <= 0xfe2f);
}

// ---------------------------------------------------------------------------
// Small string helpers.
// ---------------------------------------------------------------------------

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.emplace_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  auto is_space = [](unsigned char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' ||
           c == '\v';
  };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// fixed 6-decimal rendering used by every TSV/CSV writer so that reruns are
// byte-identical
inline std::string fmt_fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace phonotact
