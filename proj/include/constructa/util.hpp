#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace constructa {

// ---- hashing --------------------------------------------------------------

/// FNV-1a 64-bit over the bytes of `data`, starting from `basis` (default is
/// the standard offset basis).
std::uint64_t fnv1a64(std::string_view data, std::uint64_t basis = 0xcbf29ce484222325ULL) noexcept;

/// SplitMix64 finalizer; used to derive independent seeds.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

// ---- random numbers -------------------------------------------------------

/// Portable RNG: mt19937_64 seeded through SplitMix64. Every draw goes through
/// the helpers below so results never depend on a standard library's
/// distribution implementation.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    /// Stream derived from (seed, key), e.g. key = activity id.
    static Rng stream(std::uint64_t seed, std::string_view key) {
        return Rng(seed ^ fnv1a64(key));
    }

    std::uint64_t next() { return engine_(); }
    /// Uniform integer in [0, n); n must be > 0.
    std::uint64_t below(std::uint64_t n);
    /// Uniform real in [0, 1).
    double uniform01();
    /// Poisson draw (Knuth's multiplication method; fine for small means).
    unsigned poisson(double mean);
    /// Index drawn proportionally to `weights`.
    std::size_t weighted(const std::vector<double>& weights);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

// ---- text -----------------------------------------------------------------

std::string_view trim(std::string_view s) noexcept;
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Unicode NFC normalization of UTF-8 text.
std::string nfc(std::string_view utf8);

/// Tokens are maximal runs of non-whitespace code points after NFC.
std::vector<std::string> tokenize(std::string_view utf8);
std::size_t token_count(std::string_view utf8);

/// NFC, whitespace collapsed to single spaces, trimmed.
std::string normalize_whitespace(std::string_view utf8);

/// Unicode case fold (full folding) of UTF-8 text.
std::string casefold(std::string_view utf8);

// ---- dates ----------------------------------------------------------------

using Date = std::chrono::sys_days;

/// Strict ISO 8601 calendar date, YYYY-MM-DD.
std::optional<Date> parse_iso_date(std::string_view s);
/// Lenient Y-M-D with 1- or 2-digit month/day ("2024-1-5"); also accepts '/'.
std::optional<Date> parse_loose_date(std::string_view s);
std::string format_date(Date d);

}  // namespace constructa
