#include "constructa/util.hpp"

#include <openssl/evp.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <cmath>
#include <cstdio>
#include <numeric>

#include "constructa/error.hpp"

namespace constructa {

std::uint64_t fnv1a64(std::string_view data, std::uint64_t basis) noexcept {
    std::uint64_t h = basis;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw InternalError("Digest", "SHA-256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

std::uint64_t Rng::below(std::uint64_t n) {
    // Rejection sampling on the top of the range keeps draws unbiased.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % n;
}

double Rng::uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

unsigned Rng::poisson(double mean) {
    if (mean <= 0.0) return 0;
    const double threshold = std::exp(-mean);
    unsigned k = 0;
    double p = uniform01();
    while (p > threshold) {
        ++k;
        p *= uniform01();
    }
    return k;
}

std::size_t Rng::weighted(const std::vector<double>& weights) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    double r = uniform01() * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (r < weights[i]) return i;
        r -= weights[i];
    }
    return weights.size() - 1;
}

std::string_view trim(std::string_view s) noexcept {
    const auto ws = " \t\r\n\f\v";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(s.substr(start));
            return out;
        }
        out.emplace_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

namespace {

icu::UnicodeString to_unicode_nfc(std::string_view utf8) {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status)) throw InternalError("Unicode", "NFC normalizer unavailable");
    icu::UnicodeString src = icu::UnicodeString::fromUTF8(
        icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
    icu::UnicodeString out = norm->normalize(src, status);
    if (U_FAILURE(status)) throw DataError("Unicode", "NFC normalization failed");
    return out;
}

std::string to_utf8(const icu::UnicodeString& u) {
    std::string out;
    u.toUTF8String(out);
    return out;
}

}  // namespace

std::string nfc(std::string_view utf8) { return to_utf8(to_unicode_nfc(utf8)); }

std::vector<std::string> tokenize(std::string_view utf8) {
    const icu::UnicodeString u = to_unicode_nfc(utf8);
    std::vector<std::string> tokens;
    int32_t i = 0;
    int32_t start = -1;
    while (i < u.length()) {
        const UChar32 c = u.char32At(i);
        const int32_t next = u.moveIndex32(i, 1);
        if (u_isUWhiteSpace(c)) {
            if (start >= 0) {
                tokens.push_back(to_utf8(u.tempSubStringBetween(start, i)));
                start = -1;
            }
        } else if (start < 0) {
            start = i;
        }
        i = next;
    }
    if (start >= 0) tokens.push_back(to_utf8(u.tempSubStringBetween(start, u.length())));
    return tokens;
}

std::size_t token_count(std::string_view utf8) { return tokenize(utf8).size(); }

std::string normalize_whitespace(std::string_view utf8) { return join(tokenize(utf8), " "); }

std::string casefold(std::string_view utf8) {
    icu::UnicodeString u = icu::UnicodeString::fromUTF8(
        icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
    u.foldCase();
    return to_utf8(u);
}

namespace {

std::optional<Date> make_date(int y, unsigned m, unsigned d) {
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                          std::chrono::day{d}};
    if (!ymd.ok()) return std::nullopt;
    return Date{ymd};
}

bool all_digits(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s)
        if (c < '0' || c > '9') return false;
    return true;
}

}  // namespace

std::optional<Date> parse_iso_date(std::string_view s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    const auto y = s.substr(0, 4), m = s.substr(5, 2), d = s.substr(8, 2);
    if (!all_digits(y) || !all_digits(m) || !all_digits(d)) return std::nullopt;
    return make_date(std::stoi(std::string(y)), static_cast<unsigned>(std::stoi(std::string(m))),
                     static_cast<unsigned>(std::stoi(std::string(d))));
}

std::optional<Date> parse_loose_date(std::string_view s) {
    s = trim(s);
    const char sep = s.find('/') != std::string_view::npos ? '/' : '-';
    const auto parts = split(s, sep);
    if (parts.size() != 3) return std::nullopt;
    if (parts[0].size() != 4 || parts[1].size() > 2 || parts[2].size() > 2) return std::nullopt;
    for (const auto& p : parts)
        if (!all_digits(p)) return std::nullopt;
    return make_date(std::stoi(parts[0]), static_cast<unsigned>(std::stoi(parts[1])),
                     static_cast<unsigned>(std::stoi(parts[2])));
}

std::string format_date(Date d) {
    const std::chrono::year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

}  // namespace constructa
