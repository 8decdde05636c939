#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "emailwallet/base64.hpp"
#include "emailwallet/email.hpp"
#include "emailwallet/errors.hpp"
#include "emailwallet/rsa.hpp"
#include "emailwallet/sha256.hpp"

namespace emw {

// domain → selector → key; stands in for DNS TXT plus the on-chain registry
using KeyRegistry = std::map<std::string, std::map<std::string, RsaPublicKey>>;

struct DkimSignature {
    std::string algorithm;  // "rsa-sha256"
    Canonicalization canon;
    std::string domain;
    std::string selector;
    std::vector<std::string> signed_headers;  // lowercased h= names in order
    bytes body_hash;                          // decoded bh=
    bytes signature;                          // decoded b=
    bytes raw_value;                          // original header value
};

struct VerifiedEmail {
    std::string sender;  // lowercased From addr-spec
    std::string domain;
    std::string selector;
    RsaPublicKey pubkey;
    bytes signed_bytes;  // exact input to the header hash
    bytes signature;
};

namespace detail {

inline std::string strip_all_wsp(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s)
        if (!is_wsp(c) && c != '\r' && c != '\n') out.push_back(c);
    return out;
}

/// Splits an RFC 6376 tag-list. Returns tags in order of appearance.
inline std::vector<std::pair<std::string, std::string>> parse_tag_list(std::string_view value) {
    std::vector<std::pair<std::string, std::string>> tags;
    std::string unfolded = unfold(value);
    std::size_t start = 0;
    while (start <= unfolded.size()) {
        auto semi = unfolded.find(';', start);
        std::string_view part(unfolded.data() + start,
                              (semi == std::string::npos ? unfolded.size() : semi) - start);
        part = trim_wsp(part);
        if (!part.empty()) {
            auto eq = part.find('=');
            if (eq == std::string_view::npos)
                fail(errc::signature_invalid, "tag without '='");
            std::string name(trim_wsp(part.substr(0, eq)));
            std::string val(trim_wsp(part.substr(eq + 1)));
            if (name.empty()) fail(errc::signature_invalid, "empty tag name");
            for (const auto& t : tags)
                if (t.first == name) fail(errc::signature_invalid, "duplicate tag: " + name);
            tags.emplace_back(std::move(name), std::move(val));
        }
        if (semi == std::string::npos) break;
        start = semi + 1;
    }
    return tags;
}

/// Returns the raw header value with the b= tag's value deleted (tag kept).
inline bytes erase_b_value(std::string_view raw_value) {
    std::size_t start = 0;
    while (start <= raw_value.size()) {
        auto semi = raw_value.find(';', start);
        std::size_t end = (semi == std::string_view::npos) ? raw_value.size() : semi;
        std::string_view part = raw_value.substr(start, end - start);
        auto eq = part.find('=');
        if (eq != std::string_view::npos && trim_wsp(part.substr(0, eq)) == "b") {
            // keep everything through "b=", drop the value, keep the rest verbatim
            bytes head(raw_value.substr(0, start));
            head.append(part.substr(0, eq + 1));
            if (semi != std::string_view::npos) head.append(raw_value.substr(semi));
            return head;
        }
        if (semi == std::string_view::npos) break;
        start = semi + 1;
    }
    fail(errc::signature_invalid, "signature header has no b= tag");
}

inline DkimSignature parse_dkim_value(std::string_view raw_value) {
    DkimSignature sig;
    sig.raw_value = bytes(raw_value);
    bool has_v = false, has_a = false, has_d = false, has_s = false, has_h = false,
         has_bh = false, has_b = false;
    for (auto& [name, value] : parse_tag_list(raw_value)) {
        if (name == "v") {
            if (value != "1") fail(errc::signature_invalid, "unsupported version");
            has_v = true;
        } else if (name == "a") {
            if (value != "rsa-sha256") fail(errc::signature_invalid, "unsupported algorithm");
            sig.algorithm = value;
            has_a = true;
        } else if (name == "c") {
            sig.canon = Canonicalization::parse(value);
        } else if (name == "d") {
            sig.domain = to_lower_ascii(value);
            has_d = true;
        } else if (name == "s") {
            sig.selector = value;
            has_s = true;
        } else if (name == "h") {
            std::size_t p = 0;
            std::string v(value);
            while (p <= v.size()) {
                auto colon = v.find(':', p);
                std::string one = v.substr(p, (colon == std::string::npos ? v.size() : colon) - p);
                one = to_lower_ascii(trim_wsp(one));
                if (!one.empty()) sig.signed_headers.push_back(one);
                if (colon == std::string::npos) break;
                p = colon + 1;
            }
            has_h = true;
        } else if (name == "bh") {
            sig.body_hash = base64_decode(strip_all_wsp(value));
            has_bh = true;
        } else if (name == "b") {
            sig.signature = base64_decode(strip_all_wsp(value));
            has_b = true;
        }
        // t=, x=, l= and unknown tags are ignored
    }
    if (!has_v || !has_a || !has_d || !has_s || !has_h || !has_bh || !has_b)
        fail(errc::signature_invalid, "missing required tag");
    if (sig.body_hash.size() != 32)
        fail(errc::signature_invalid, "bh= must decode to 32 bytes");
    if (sig.domain.empty() || sig.selector.empty())
        fail(errc::signature_invalid, "empty d= or s=");
    return sig;
}

/// Canonical bytes covered by the signature: the h= headers in order
/// (bottom-up per repeated name), then the DKIM-Signature header itself with
/// an empty b= value and no trailing CRLF.
inline bytes header_hash_input(const EmailMessage& msg,
                               const std::vector<std::string>& h_list,
                               std::string_view dkim_value_no_b, CanonMode mode) {
    bytes out;
    std::map<std::string, std::size_t> cursor;  // lowercased name → next index from the bottom
    for (const auto& want : h_list) {
        std::string key = to_lower_ascii(want);
        auto it = cursor.find(key);
        std::size_t limit = (it == cursor.end()) ? msg.headers.size() : it->second;
        bool found = false;
        for (std::size_t i = limit; i-- > 0;) {
            if (iequals_ascii(msg.headers[i].name, key)) {
                out += canonicalize_header(msg.headers[i].name, msg.headers[i].value, mode);
                cursor[key] = i;
                found = true;
                break;
            }
        }
        if (!found) cursor[key] = 0;  // nonexistent headers contribute nothing
    }
    bytes dkim_line = canonicalize_header("DKIM-Signature", dkim_value_no_b, mode);
    dkim_line.resize(dkim_line.size() - 2);  // no trailing CRLF on the signed copy
    out += dkim_line;
    return out;
}

}  // namespace detail

inline DkimSignature parse_dkim_header(const EmailMessage& msg) {
    std::size_t n = msg.count("DKIM-Signature");
    if (n == 0) fail(errc::no_signature, "no DKIM-Signature header");
    if (n > 1) fail(errc::multiple_signatures, "more than one DKIM-Signature header");
    return detail::parse_dkim_value(msg.find("DKIM-Signature")->value);
}

/// SDS simulator: computes bh=, signs the covered headers, and inserts the
/// completed DKIM-Signature header. Deterministic (no t=/x= tags).
inline EmailMessage dkim_sign(const EmailMessage& msg, const RsaPrivateKey& key,
                              std::string_view domain, std::string_view selector,
                              Canonicalization mode = {}) {
    if (!msg.find("From")) fail(errc::missing_header, "no From header");
    if (!msg.find("Subject")) fail(errc::missing_header, "no Subject header");
    if (msg.count("DKIM-Signature") > 0)
        fail(errc::multiple_signatures, "message is already signed");

    std::vector<std::string> h_list = {"from", "subject"};
    if (msg.find("To")) h_list.insert(h_list.begin() + 1, "to");

    bytes body_canon = canonicalize_body(msg.body, mode.body_mode);
    std::string bh = base64_encode(digest_to_bytes(sha256(body_canon)));

    std::string h_joined;
    for (std::size_t i = 0; i < h_list.size(); ++i) {
        if (i) h_joined += ':';
        h_joined += h_list[i];
    }
    std::string value_no_b = " v=1; a=rsa-sha256; c=" + mode.to_string() + "; d=" +
                             std::string(domain) + "; s=" + std::string(selector) + "; h=" +
                             h_joined + "; bh=" + bh + "; b=";

    digest32 digest =
        sha256(detail::header_hash_input(msg, h_list, value_no_b, mode.header_mode));
    bytes sig = rsa_pkcs1v15_sign(key, digest);

    EmailMessage out = msg;
    out.headers.insert(out.headers.begin(),
                       Header{"DKIM-Signature", value_no_b + base64_encode(sig)});
    return out;
}

/// Full verification against the registered key for (d=, s=).
/// Throws a distinct error for every failure mode.
inline VerifiedEmail dkim_verify(const EmailMessage& msg, const KeyRegistry& registry) {
    DkimSignature sig = parse_dkim_header(msg);

    auto dom_it = registry.find(sig.domain);
    if (dom_it == registry.end())
        fail(errc::unknown_domain_key, "no key registered for domain " + sig.domain);
    auto sel_it = dom_it->second.find(sig.selector);
    if (sel_it == dom_it->second.end())
        fail(errc::unknown_domain_key, "no key registered for selector " + sig.selector);
    const RsaPublicKey& key = sel_it->second;

    bytes body_canon = canonicalize_body(msg.body, sig.canon.body_mode);
    if (digest_to_bytes(sha256(body_canon)) != sig.body_hash)
        fail(errc::body_hash_mismatch, "body hash does not match bh=");

    bool covers_from = false;
    for (const auto& h : sig.signed_headers)
        if (h == "from") covers_from = true;
    if (!covers_from) fail(errc::signature_invalid, "h= does not cover From");

    bytes value_no_b = detail::erase_b_value(sig.raw_value);
    bytes signed_bytes = detail::header_hash_input(msg, sig.signed_headers, value_no_b,
                                                   sig.canon.header_mode);
    if (!rsa_pkcs1v15_verify(key, sha256(signed_bytes), sig.signature))
        fail(errc::signature_invalid, "RSA signature verification failed");

    std::string sender = extract_sender_address(msg);
    if (address_domain(sender) != sig.domain)
        fail(errc::domain_mismatch, "From domain does not match d=");

    return VerifiedEmail{sender, sig.domain, sig.selector, key, signed_bytes, sig.signature};
}

}  // namespace emw
