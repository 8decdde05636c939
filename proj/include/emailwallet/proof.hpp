#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "emailwallet/dkim.hpp"
#include "emailwallet/email.hpp"
#include "emailwallet/errors.hpp"
#include "emailwallet/rule.hpp"
#include "emailwallet/rsa.hpp"
#include "emailwallet/sha256.hpp"
#include "emailwallet/wire.hpp"

namespace emw {

/// The public instance bound by proof verification.
struct Claim {
    std::string sender_email;
    RsaPublicKey rsa_pubkey;
    std::uint64_t rule_id = 0;
    VariableValues variable_values;

    bool operator==(const Claim& o) const {
        return sender_email == o.sender_email && rsa_pubkey == o.rsa_pubkey &&
               rule_id == o.rule_id && variable_values == o.variable_values;
    }

    nlohmann::json to_json() const {
        nlohmann::json vars = nlohmann::json::object();
        for (const auto& [k, v] : variable_values) vars[k] = v;
        return nlohmann::json{
            {"rule_id", rule_id},
            {"rsa_pubkey", {{"e", rsa_pubkey.e.get_str(10)}, {"n", rsa_pubkey.n.get_str(10)}}},
            {"sender_email", sender_email},
            {"variable_values", vars},
        };
    }

    /// Canonical bytes (sorted keys) so claims hash deterministically.
    bytes canonical_bytes() const { return to_json().dump(); }

    static Claim from_json(const nlohmann::json& j) {
        if (!j.is_object() || !j.contains("rule_id") || !j.contains("rsa_pubkey") ||
            !j.contains("sender_email") || !j.contains("variable_values"))
            fail(errc::corrupt_proof, "claim is missing fields");
        Claim c;
        if (!j["rule_id"].is_number_unsigned()) fail(errc::corrupt_proof, "bad rule_id");
        c.rule_id = j["rule_id"].get<std::uint64_t>();
        c.sender_email = j["sender_email"].get<std::string>();
        const auto& pk = j["rsa_pubkey"];
        if (!pk.is_object() || !pk.contains("n") || !pk.contains("e"))
            fail(errc::corrupt_proof, "bad rsa_pubkey");
        if (c.rsa_pubkey.n.set_str(pk["n"].get<std::string>(), 10) != 0 ||
            c.rsa_pubkey.e.set_str(pk["e"].get<std::string>(), 10) != 0)
            fail(errc::corrupt_proof, "bad rsa_pubkey integers");
        if (!j["variable_values"].is_object())
            fail(errc::corrupt_proof, "bad variable_values");
        for (const auto& [k, v] : j["variable_values"].items()) {
            if (!v.is_string()) fail(errc::corrupt_proof, "variable value must be a string");
            c.variable_values[k] = v.get<std::string>();
        }
        return c;
    }
};

/// Transparent stand-in for the succinct proof: carries the raw signed email
/// as its witness and replays every verification constraint over it.
struct EmailProof {
    Claim claim;
    bytes witness;  // raw signed email bytes
    digest32 nullifier{};
};

/// Which constraint failed. Numbering is part of the public contract:
///   1 witness parses   2 body hash   3 RSA signature   4 registered key
///   5 sender binding   6 regex/value binding   7 length bound   8 nullifier
enum class VerifyReason : int {
    ok = 0,
    witness_parse = 1,
    body_hash = 2,
    rsa_signature = 3,
    registered_key = 4,
    sender_binding = 5,
    regex_binding = 6,
    length_bound = 7,
    nullifier_binding = 8,
};

struct VerifyResult {
    bool ok = false;
    VerifyReason reason = VerifyReason::ok;
    std::string detail;

    int reason_code() const { return static_cast<int>(reason); }
};

inline digest32 compute_nullifier_from_signature(std::string_view signature) {
    return sha256(signature);
}

/// Nullifier = sha256 of the decoded DKIM b= bytes; unique per signed content.
inline digest32 compute_nullifier(std::string_view signed_email) {
    EmailMessage msg = parse_email(signed_email);
    DkimSignature sig = parse_dkim_header(msg);
    return compute_nullifier_from_signature(sig.signature);
}

/// Replays all constraints. Never throws; the result carries the first
/// failing constraint (the length bound (7) is checked before the regex
/// binding (6) so oversized bodies report the length reason).
inline VerifyResult verify(const EmailProof& proof, const RegexRule& rule,
                           const RsaPublicKey& registered_key) {
    auto reject = [](VerifyReason r, std::string detail) {
        return VerifyResult{false, r, std::move(detail)};
    };

    // (1) witness parses and is structurally sound
    EmailMessage msg;
    DkimSignature sig;
    std::string sender;
    try {
        msg = parse_email(proof.witness);
        sig = parse_dkim_header(msg);
        sender = extract_sender_address(msg);
    } catch (const Error& e) {
        return reject(VerifyReason::witness_parse, e.what());
    }
    if (proof.claim.rule_id != rule.rule_id)
        return reject(VerifyReason::witness_parse, "claim rule_id does not match artifact");

    // (2) body canonicalization + sha256 + base64 reproduce bh=
    bytes body_canon = canonicalize_body(msg.body, sig.canon.body_mode);
    if (digest_to_bytes(sha256(body_canon)) != sig.body_hash)
        return reject(VerifyReason::body_hash, "body hash mismatch");

    // (3) RSA-verify the signed-header hash under the claim's key
    bool covers_from = false;
    for (const auto& h : sig.signed_headers) covers_from |= (h == "from");
    if (!covers_from) return reject(VerifyReason::rsa_signature, "h= does not cover From");
    bytes signed_bytes;
    try {
        signed_bytes = detail::header_hash_input(msg, sig.signed_headers,
                                                 detail::erase_b_value(sig.raw_value),
                                                 sig.canon.header_mode);
    } catch (const Error& e) {
        return reject(VerifyReason::rsa_signature, e.what());
    }
    if (!rsa_pkcs1v15_verify(proof.claim.rsa_pubkey, sha256(signed_bytes), sig.signature))
        return reject(VerifyReason::rsa_signature, "RSA verification failed");

    // (4) the claim's key is the registered one
    if (!(proof.claim.rsa_pubkey == registered_key))
        return reject(VerifyReason::registered_key, "claim key != registered key");

    // (5) sender binding: claim email == witness From, and its domain == d=
    if (proof.claim.sender_email != sender)
        return reject(VerifyReason::sender_binding, "claim sender != witness From");
    if (address_domain(sender) != sig.domain)
        return reject(VerifyReason::sender_binding, "From domain != d=");

    // (7) fixed maximum string length
    std::string body_text = trimmed_body(msg);
    if (body_text.size() > rule.max_len)
        return reject(VerifyReason::length_bound,
                      "body length " + std::to_string(body_text.size()) +
                          " exceeds max_len " + std::to_string(rule.max_len));

    // (6) fixed parts + claimed values reproduce exactly the witness body
    std::string reconstruction;
    try {
        if (!reconstruct_and_verify(rule, proof.claim.variable_values, &reconstruction))
            return reject(VerifyReason::regex_binding, "values fail the rule automata");
    } catch (const Error& e) {
        return reject(VerifyReason::regex_binding, e.what());
    }
    if (reconstruction != body_text)
        return reject(VerifyReason::regex_binding, "reconstruction != witness body");

    // (8) nullifier recomputes from the signature bytes
    if (compute_nullifier_from_signature(sig.signature) != proof.nullifier)
        return reject(VerifyReason::nullifier_binding, "nullifier mismatch");

    return VerifyResult{true, VerifyReason::ok, ""};
}

/// Aggregator-side proof construction: verifies DKIM, extracts the variable
/// values, and assembles the claim. The returned proof always verifies
/// against the key it was built with.
inline EmailProof prove(std::string_view signed_email, const RegexRule& rule,
                        const KeyRegistry& registry) {
    EmailMessage msg = parse_email(signed_email);
    VerifiedEmail ve = dkim_verify(msg, registry);
    VariableValues values = match_and_extract(rule, trimmed_body(msg));

    EmailProof proof;
    proof.claim = Claim{ve.sender, ve.pubkey, rule.rule_id, std::move(values)};
    proof.witness = bytes(signed_email);
    proof.nullifier = compute_nullifier_from_signature(ve.signature);

    VerifyResult check = verify(proof, rule, ve.pubkey);
    if (!check.ok)
        throw std::logic_error("internal claim inconsistency: " + check.detail);
    return proof;
}

// --- proof files: magic "EWPF", length-prefixed sections ---

namespace proof_detail {

inline constexpr char kProofMagic[4] = {'E', 'W', 'P', 'F'};
inline constexpr std::uint32_t kProofVersion = 1;

}  // namespace proof_detail

inline bytes encode_proof(const EmailProof& proof) {
    ByteWriter w;
    w.raw(std::string_view(proof_detail::kProofMagic, 4));
    w.u32(proof_detail::kProofVersion);
    w.blob32(proof.claim.canonical_bytes());
    w.blob32(proof.witness);
    w.blob32(hex_encode(proof.nullifier));
    return w.take();
}

inline EmailProof decode_proof(std::string_view blob) {
    ByteReader r(blob, errc::corrupt_proof);
    if (r.raw(4) != std::string_view(proof_detail::kProofMagic, 4))
        fail(errc::corrupt_proof, "bad magic");
    std::uint32_t version = r.u32();
    if (version != proof_detail::kProofVersion)
        fail(errc::version_mismatch, "unsupported proof version " + std::to_string(version));

    EmailProof proof;
    nlohmann::json claim_json = nlohmann::json::parse(r.blob32(), nullptr, false);
    if (claim_json.is_discarded()) fail(errc::corrupt_proof, "claim is not valid JSON");
    proof.claim = Claim::from_json(claim_json);
    proof.witness = bytes(r.blob32());
    bytes null_hex = bytes(r.blob32());
    if (null_hex.size() != 64) fail(errc::corrupt_proof, "nullifier must be 64 hex chars");
    bytes raw;
    try {
        raw = hex_decode(null_hex);
    } catch (const Error&) {
        fail(errc::corrupt_proof, "nullifier is not valid hex");
    }
    std::copy(raw.begin(), raw.end(), reinterpret_cast<char*>(proof.nullifier.data()));
    r.expect_done();
    return proof;
}

}  // namespace emw
