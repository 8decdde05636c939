#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "emailwallet/errors.hpp"
#include "emailwallet/util.hpp"

namespace emw {

/// Little-endian length-prefixed binary encoding helpers.
class ByteWriter {
public:
    void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
    void u16(std::uint16_t v) {
        for (int i = 0; i < 2; ++i) out_.push_back(static_cast<char>(v >> (8 * i)));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>(v >> (8 * i)));
    }
    void raw(std::string_view data) { out_.append(data); }
    void blob32(std::string_view data) {
        u32(static_cast<std::uint32_t>(data.size()));
        raw(data);
    }

    bytes take() { return std::move(out_); }

private:
    bytes out_;
};

class ByteReader {
public:
    ByteReader(std::string_view data, errc on_error)
        : data_(data), on_error_(on_error) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
    std::uint16_t u16() {
        auto s = take(2);
        return static_cast<std::uint16_t>(std::uint8_t(s[0])) |
               static_cast<std::uint16_t>(std::uint8_t(s[1])) << 8;
    }
    std::uint32_t u32() {
        auto s = take(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(std::uint8_t(s[i])) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        auto s = take(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(std::uint8_t(s[i])) << (8 * i);
        return v;
    }
    std::string_view raw(std::size_t n) { return take(n); }
    std::string_view blob32() { return take(u32()); }

    bool done() const { return pos_ == data_.size(); }
    void expect_done() const {
        if (!done()) fail(on_error_, "trailing bytes");
    }

private:
    std::string_view take(std::size_t n) {
        if (data_.size() - pos_ < n) fail(on_error_, "truncated input");
        std::string_view s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    std::string_view data_;
    std::size_t pos_ = 0;
    errc on_error_;
};

}  // namespace emw
