#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "emailwallet/errors.hpp"
#include "emailwallet/util.hpp"

namespace emw {

/// RFC 4648 base64 with padding.
inline std::string base64_encode(std::string_view data) {
    static constexpr char alphabet[] =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((data.size() + 2) / 3 * 4);
    std::size_t i = 0;
    while (i + 3 <= data.size()) {
        std::uint32_t v = (std::uint8_t(data[i]) << 16) | (std::uint8_t(data[i + 1]) << 8) |
                          std::uint8_t(data[i + 2]);
        out.push_back(alphabet[(v >> 18) & 63]);
        out.push_back(alphabet[(v >> 12) & 63]);
        out.push_back(alphabet[(v >> 6) & 63]);
        out.push_back(alphabet[v & 63]);
        i += 3;
    }
    std::size_t rem = data.size() - i;
    if (rem == 1) {
        std::uint32_t v = std::uint8_t(data[i]) << 16;
        out.push_back(alphabet[(v >> 18) & 63]);
        out.push_back(alphabet[(v >> 12) & 63]);
        out.push_back('=');
        out.push_back('=');
    } else if (rem == 2) {
        std::uint32_t v = (std::uint8_t(data[i]) << 16) | (std::uint8_t(data[i + 1]) << 8);
        out.push_back(alphabet[(v >> 18) & 63]);
        out.push_back(alphabet[(v >> 12) & 63]);
        out.push_back(alphabet[(v >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

/// Strict decoder: canonical padding, no whitespace, no stray bits.
inline bytes base64_decode(std::string_view text) {
    auto value_of = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    if (text.size() % 4 != 0) fail(errc::invalid_base64, "length not a multiple of 4");
    bytes out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        bool last = (i + 4 == text.size());
        int pad = 0;
        if (last) {
            if (text[i + 3] == '=') pad = (text[i + 2] == '=') ? 2 : 1;
        }
        int v[4];
        for (int j = 0; j < 4; ++j) {
            char c = text[i + j];
            if (j >= 4 - pad) {
                if (c != '=') fail(errc::invalid_base64, "misplaced padding");
                v[j] = 0;
                continue;
            }
            v[j] = value_of(c);
            if (v[j] < 0) fail(errc::invalid_base64, "invalid character");
        }
        std::uint32_t group = (v[0] << 18) | (v[1] << 12) | (v[2] << 6) | v[3];
        out.push_back(static_cast<char>((group >> 16) & 0xff));
        if (pad < 2) out.push_back(static_cast<char>((group >> 8) & 0xff));
        if (pad < 1) out.push_back(static_cast<char>(group & 0xff));
        if (pad == 2 && (v[1] & 0x0f) != 0) fail(errc::invalid_base64, "non-zero padding bits");
        if (pad == 1 && (v[2] & 0x03) != 0) fail(errc::invalid_base64, "non-zero padding bits");
    }
    return out;
}

}  // namespace emw
