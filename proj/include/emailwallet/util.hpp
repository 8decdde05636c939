#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>

#include "emailwallet/errors.hpp"

namespace emw {

// Raw byte strings travel as std::string throughout.
using bytes = std::string;
using digest32 = std::array<std::uint8_t, 32>;

inline bool is_wsp(char c) { return c == ' ' || c == '\t'; }

inline char ascii_lower(char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

inline std::string to_lower_ascii(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](char c) { return ascii_lower(c); });
    return out;
}

inline bool iequals_ascii(std::string_view a, std::string_view b) {
    return a.size() == b.size() &&
           std::equal(a.begin(), a.end(), b.begin(),
                      [](char x, char y) { return ascii_lower(x) == ascii_lower(y); });
}

inline std::string_view trim_wsp(std::string_view s) {
    while (!s.empty() && is_wsp(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_wsp(s.back())) s.remove_suffix(1);
    return s;
}

/// Collapse runs of SP/HT to a single SP.
inline std::string collapse_wsp(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool in_wsp = false;
    for (char c : s) {
        if (is_wsp(c)) {
            if (!in_wsp) out.push_back(' ');
            in_wsp = true;
        } else {
            out.push_back(c);
            in_wsp = false;
        }
    }
    return out;
}

/// Replaces bytes outside printable ASCII with '?'. Error details can echo
/// attacker-controlled input; receipts and logs must stay valid UTF-8.
inline std::string ascii_sanitize(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (unsigned char c : s) out.push_back((c >= 0x20 && c <= 0x7e) ? static_cast<char>(c) : '?');
    return out;
}

inline std::string hex_encode(std::string_view data) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(data.size() * 2);
    for (unsigned char c : data) {
        out.push_back(digits[c >> 4]);
        out.push_back(digits[c & 0xf]);
    }
    return out;
}

inline std::string hex_encode(const digest32& d) {
    return hex_encode(std::string_view(reinterpret_cast<const char*>(d.data()), d.size()));
}

inline bytes hex_decode(std::string_view hex) {
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    if (hex.size() % 2 != 0) fail(errc::bad_argument, "odd hex length");
    bytes out;
    out.reserve(hex.size() / 2);
    for (std::size_t i = 0; i < hex.size(); i += 2) {
        int hi = nibble(hex[i]), lo = nibble(hex[i + 1]);
        if (hi < 0 || lo < 0) fail(errc::bad_argument, "invalid hex digit");
        out.push_back(static_cast<char>((hi << 4) | lo));
    }
    return out;
}

}  // namespace emw
