#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "emailwallet/errors.hpp"
#include "emailwallet/util.hpp"

namespace emw {

enum class CanonMode { simple, relaxed };

struct Canonicalization {
    CanonMode header_mode = CanonMode::relaxed;
    CanonMode body_mode = CanonMode::relaxed;

    std::string to_string() const {
        auto name = [](CanonMode m) { return m == CanonMode::simple ? "simple" : "relaxed"; };
        return std::string(name(header_mode)) + "/" + name(body_mode);
    }

    /// Parses RFC 6376 c= values: "relaxed/relaxed", "simple", ...
    /// A missing body mode defaults to simple.
    static Canonicalization parse(std::string_view text) {
        auto mode = [](std::string_view s) {
            if (s == "simple") return CanonMode::simple;
            if (s == "relaxed") return CanonMode::relaxed;
            fail(errc::signature_invalid, "unknown canonicalization mode");
        };
        Canonicalization c;
        auto slash = text.find('/');
        if (slash == std::string_view::npos) {
            c.header_mode = mode(text);
            c.body_mode = CanonMode::simple;
        } else {
            c.header_mode = mode(text.substr(0, slash));
            c.body_mode = mode(text.substr(slash + 1));
        }
        return c;
    }
};

struct Header {
    std::string name;  // original spelling
    bytes value;       // raw bytes after the colon, folds preserved, no final CRLF
};

struct ParseLimits {
    std::size_t max_message_bytes = 8192;
    std::size_t max_line_bytes = 998;  // excluding CRLF
};

/// Parsed message. Headers keep original order and spelling;
/// serialize() reproduces the input byte for byte.
struct EmailMessage {
    std::vector<Header> headers;
    bytes body;

    const Header* find(std::string_view name) const {
        for (const auto& h : headers)
            if (iequals_ascii(h.name, name)) return &h;
        return nullptr;
    }

    std::size_t count(std::string_view name) const {
        std::size_t n = 0;
        for (const auto& h : headers)
            if (iequals_ascii(h.name, name)) ++n;
        return n;
    }

    bytes serialize() const {
        bytes out;
        for (const auto& h : headers) {
            out += h.name;
            out += ':';
            out += h.value;
            out += "\r\n";
        }
        out += "\r\n";
        out += body;
        return out;
    }
};

namespace detail {

inline void check_crlf_discipline(std::string_view raw) {
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] == '\n' && (i == 0 || raw[i - 1] != '\r'))
            fail(errc::malformed_email, "lone LF at offset " + std::to_string(i));
        if (raw[i] == '\r' && (i + 1 >= raw.size() || raw[i + 1] != '\n'))
            fail(errc::malformed_email, "lone CR at offset " + std::to_string(i));
    }
}

inline bool valid_header_name(std::string_view name) {
    if (name.empty()) return false;
    for (unsigned char c : name)
        if (c < 33 || c > 126 || c == ':') return false;
    return true;
}

inline void check_line_lengths(std::string_view region, std::size_t limit) {
    std::size_t start = 0;
    while (start <= region.size()) {
        auto end = region.find("\r\n", start);
        std::size_t len = (end == std::string_view::npos ? region.size() : end) - start;
        if (len > limit) fail(errc::malformed_email, "line exceeds length limit");
        if (end == std::string_view::npos) break;
        start = end + 2;
    }
}

}  // namespace detail

inline EmailMessage parse_email(std::string_view raw, const ParseLimits& limits = {}) {
    if (raw.size() > limits.max_message_bytes)
        fail(errc::malformed_email, "message exceeds size limit");
    detail::check_crlf_discipline(raw);

    auto sep = raw.find("\r\n\r\n");
    if (sep == std::string_view::npos)
        fail(errc::malformed_email, "missing header/body separator");

    std::string_view header_region = raw.substr(0, sep + 2);
    std::string_view body = raw.substr(sep + 4);
    detail::check_line_lengths(header_region, limits.max_line_bytes);
    detail::check_line_lengths(body, limits.max_line_bytes);

    EmailMessage msg;
    msg.body = bytes(body);

    std::size_t pos = 0;
    while (pos < header_region.size()) {
        auto eol = header_region.find("\r\n", pos);
        std::string_view line = header_region.substr(pos, eol - pos);
        pos = eol + 2;
        if (!line.empty() && is_wsp(line.front())) {
            // folded continuation: keep the fold in the raw value
            if (msg.headers.empty())
                fail(errc::malformed_email, "continuation line before any header");
            msg.headers.back().value += "\r\n";
            msg.headers.back().value += line;
            continue;
        }
        auto colon = line.find(':');
        if (colon == std::string_view::npos)
            fail(errc::malformed_email, "header line without colon");
        std::string_view name = line.substr(0, colon);
        if (!detail::valid_header_name(name))
            fail(errc::malformed_email, "invalid header name");
        msg.headers.push_back(Header{std::string(name), bytes(line.substr(colon + 1))});
    }

    if (const Header* ct = msg.find("Content-Type")) {
        if (to_lower_ascii(ct->value).find("multipart") != std::string::npos)
            fail(errc::malformed_email, "multipart bodies are not supported");
    }
    return msg;
}

/// Header canonicalization per RFC 6376 §3.4.1/§3.4.2.
/// simple is the identity on the original "Name:value CRLF" line.
inline bytes canonicalize_header(std::string_view name, std::string_view value, CanonMode mode) {
    if (mode == CanonMode::simple) {
        bytes out(name);
        out += ':';
        out += value;
        out += "\r\n";
        return out;
    }
    // relaxed: lowercase name, unfold, collapse WSP, trim
    std::string unfolded;
    unfolded.reserve(value.size());
    for (std::size_t i = 0; i < value.size(); ++i) {
        if (value[i] == '\r' && i + 1 < value.size() && value[i + 1] == '\n') {
            ++i;
            continue;
        }
        unfolded.push_back(value[i]);
    }
    bytes out = to_lower_ascii(name);
    out += ':';
    out += collapse_wsp(trim_wsp(unfolded));
    out += "\r\n";
    return out;
}

/// Body canonicalization per RFC 6376 §3.4.3/§3.4.4.
inline bytes canonicalize_body(std::string_view body, CanonMode mode) {
    if (mode == CanonMode::simple) {
        bytes out(body);
        while (out.size() >= 4 && out.compare(out.size() - 4, 4, "\r\n\r\n") == 0)
            out.resize(out.size() - 2);
        if (out.size() < 2 || out.compare(out.size() - 2, 2, "\r\n") != 0) out += "\r\n";
        return out;
    }
    // relaxed
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start < body.size()) {
        auto end = body.find("\r\n", start);
        if (end == std::string_view::npos) {
            lines.emplace_back(body.substr(start));
            break;
        }
        lines.emplace_back(body.substr(start, end - start));
        start = end + 2;
        if (start == body.size()) lines.emplace_back();  // trailing CRLF → empty final line
    }
    for (auto& line : lines) {
        while (!line.empty() && is_wsp(line.back())) line.pop_back();
        line = collapse_wsp(line);
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    bytes out;
    for (const auto& line : lines) {
        out += line;
        out += "\r\n";
    }
    return out;
}

namespace detail {

inline std::string unfold(std::string_view value) {
    std::string out;
    out.reserve(value.size());
    for (std::size_t i = 0; i < value.size(); ++i) {
        if (value[i] == '\r' && i + 1 < value.size() && value[i + 1] == '\n') {
            ++i;
            continue;
        }
        out.push_back(value[i]);
    }
    return out;
}

inline bool valid_addr_spec(std::string_view addr) {
    auto at = addr.find('@');
    if (at == std::string_view::npos || at == 0 || at + 1 == addr.size()) return false;
    if (addr.find('@', at + 1) != std::string_view::npos) return false;
    std::string_view local = addr.substr(0, at);
    std::string_view domain = addr.substr(at + 1);
    auto local_ok = [](unsigned char c) {
        if (std::isalnum(c)) return true;
        return std::string_view("!#$%&'*+-/=?^_`{|}~.").find(static_cast<char>(c)) !=
               std::string_view::npos;
    };
    for (unsigned char c : local)
        if (!local_ok(c)) return false;
    if (domain.front() == '.' || domain.back() == '.' || domain.front() == '-') return false;
    for (unsigned char c : domain)
        if (!std::isalnum(c) && c != '.' && c != '-') return false;
    return true;
}

}  // namespace detail

/// Extracts the addr-spec from a From-style header value ("Name <a@b>" or bare),
/// lowercased.
inline std::string parse_address(std::string_view header_value) {
    std::string v = detail::unfold(header_value);
    std::string_view sv = trim_wsp(v);
    std::string addr;
    auto lt = sv.rfind('<');
    if (lt != std::string_view::npos) {
        auto gt = sv.find('>', lt + 1);
        if (gt == std::string_view::npos) fail(errc::malformed_address, "unterminated angle-addr");
        addr = std::string(trim_wsp(sv.substr(lt + 1, gt - lt - 1)));
    } else {
        addr = std::string(sv);
    }
    if (addr.empty() || !detail::valid_addr_spec(addr))
        fail(errc::malformed_address, "invalid addr-spec: " + ascii_sanitize(addr));
    return to_lower_ascii(addr);
}

inline std::string extract_sender_address(const EmailMessage& msg) {
    const Header* from = msg.find("From");
    if (!from) fail(errc::missing_header, "no From header");
    return parse_address(from->value);
}

inline std::string address_domain(std::string_view addr) {
    auto at = addr.find('@');
    return std::string(addr.substr(at + 1));
}

/// The Subject must begin with the decimal rule ID; free text may follow
/// after whitespace.
inline std::uint64_t extract_rule_id(const EmailMessage& msg) {
    const Header* subject = msg.find("Subject");
    if (!subject) fail(errc::missing_header, "no Subject header");
    std::string v = detail::unfold(subject->value);
    std::string_view sv = trim_wsp(v);
    std::size_t i = 0;
    while (i < sv.size() && sv[i] >= '0' && sv[i] <= '9') ++i;
    if (i == 0) fail(errc::malformed_subject, "subject does not start with a rule id");
    if (i > 19) fail(errc::malformed_subject, "rule id out of range");
    if (i < sv.size() && !is_wsp(sv[i]))
        fail(errc::malformed_subject, "rule id not delimited by whitespace");
    std::uint64_t id = 0;
    for (std::size_t j = 0; j < i; ++j) id = id * 10 + std::uint64_t(sv[j] - '0');
    return id;
}

/// Strips all trailing CRLFs; rule matching treats the body as the remaining text.
inline std::string trimmed_body(const EmailMessage& msg) {
    std::string b = msg.body;
    while (b.size() >= 2 && b.compare(b.size() - 2, 2, "\r\n") == 0) b.resize(b.size() - 2);
    return b;
}

}  // namespace emw
