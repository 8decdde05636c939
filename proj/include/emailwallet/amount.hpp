#pragma once

#include <gmpxx.h>

#include <string>
#include <string_view>

#include "emailwallet/errors.hpp"

namespace emw {

// Balances are integers in base units, 10^18 per whole token (wei semantics).
inline constexpr int kTokenDecimals = 18;

inline const mpz_class& token_unit() {
    static const mpz_class unit = [] {
        mpz_class u;
        mpz_ui_pow_ui(u.get_mpz_t(), 10, kTokenDecimals);
        return u;
    }();
    return unit;
}

inline bool valid_currency_code(std::string_view code) {
    if (code.size() < 2 || code.size() > 6) return false;
    for (char c : code)
        if (c < 'A' || c > 'Z') return false;
    return true;
}

/// Exact decimal-string parsing: "0.005" → 5 * 10^15. No floating point.
/// More than 18 fractional digits is an error, as is anything non-numeric.
inline mpz_class parse_token_amount(std::string_view text) {
    auto dot = text.find('.');
    std::string_view int_part = text.substr(0, dot);
    std::string_view frac_part =
        (dot == std::string_view::npos) ? std::string_view{} : text.substr(dot + 1);
    if (int_part.empty()) fail(errc::malformed_amount, "missing integer part");
    if (dot != std::string_view::npos && frac_part.empty())
        fail(errc::malformed_amount, "missing fractional digits after '.'");
    if (frac_part.size() > kTokenDecimals)
        fail(errc::malformed_amount, "more than 18 fractional digits");
    for (char c : int_part)
        if (c < '0' || c > '9') fail(errc::malformed_amount, "invalid digit");
    for (char c : frac_part)
        if (c < '0' || c > '9') fail(errc::malformed_amount, "invalid digit");

    mpz_class value;
    if (mpz_set_str(value.get_mpz_t(), std::string(int_part).c_str(), 10) != 0)
        fail(errc::malformed_amount, "invalid integer part");
    value *= token_unit();
    if (!frac_part.empty()) {
        std::string padded(frac_part);
        padded.append(kTokenDecimals - frac_part.size(), '0');
        mpz_class frac;
        mpz_set_str(frac.get_mpz_t(), padded.c_str(), 10);
        value += frac;
    }
    return value;
}

/// Fixed 18-decimal rendering: 5*10^15 → "0.005000000000000000".
inline std::string format_token_amount(const mpz_class& value) {
    mpz_class q = value / token_unit();
    mpz_class r = value % token_unit();
    std::string frac = r.get_str(10);
    frac.insert(0, kTokenDecimals - frac.size(), '0');
    return q.get_str(10) + "." + frac;
}

struct Amount {
    std::string currency;
    mpz_class value;  // base units
};

}  // namespace emw
