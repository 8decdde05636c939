#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace emw {

enum class errc {
    // email parsing / extraction
    malformed_email,
    missing_header,
    malformed_address,
    malformed_subject,

    // encodings and file formats
    invalid_base64,
    version_mismatch,
    corrupt_artifact,
    corrupt_proof,
    corrupt_state,

    // rsa / dkim
    bad_argument,
    bad_digest_length,
    bad_key_size,
    key_too_small,
    no_signature,
    multiple_signatures,
    unknown_domain_key,
    body_hash_mismatch,
    signature_invalid,
    domain_mismatch,

    // regex / rules
    parse_error,
    unsupported_syntax,
    state_blowup,
    input_too_long,
    no_match,
    missing_variable,
    adjacent_variables,
    bad_rule,

    // chain
    duplicate_key,
    duplicate_rule,
    unknown_handler,
    unknown_rule,
    zero_amount,
    malformed_amount,
    unknown_currency,
    insufficient_balance,
    no_pool,
    pool_exists,
    insufficient_liquidity,
    nullifier_reused,
    proof_invalid,

    io_error,
};

/// Stable token for an error code, used in receipts and CLI output.
inline const char* errc_name(errc c) {
    switch (c) {
        case errc::malformed_email:        return "MalformedEmail";
        case errc::missing_header:         return "MissingHeader";
        case errc::malformed_address:      return "MalformedAddress";
        case errc::malformed_subject:      return "MalformedSubject";
        case errc::invalid_base64:         return "InvalidBase64";
        case errc::version_mismatch:       return "VersionMismatch";
        case errc::corrupt_artifact:       return "CorruptArtifact";
        case errc::corrupt_proof:          return "CorruptProof";
        case errc::corrupt_state:          return "CorruptState";
        case errc::bad_argument:           return "BadArgument";
        case errc::bad_digest_length:      return "BadDigestLength";
        case errc::bad_key_size:           return "BadKeySize";
        case errc::key_too_small:          return "KeyTooSmall";
        case errc::no_signature:           return "NoSignature";
        case errc::multiple_signatures:    return "MultipleSignatures";
        case errc::unknown_domain_key:     return "UnknownDomainKey";
        case errc::body_hash_mismatch:     return "BodyHashMismatch";
        case errc::signature_invalid:      return "SignatureInvalid";
        case errc::domain_mismatch:        return "DomainMismatch";
        case errc::parse_error:            return "ParseError";
        case errc::unsupported_syntax:     return "UnsupportedSyntax";
        case errc::state_blowup:           return "StateBlowup";
        case errc::input_too_long:         return "InputTooLong";
        case errc::no_match:               return "NoMatch";
        case errc::missing_variable:       return "MissingVariable";
        case errc::adjacent_variables:     return "AdjacentVariables";
        case errc::bad_rule:               return "BadRule";
        case errc::duplicate_key:          return "DuplicateKey";
        case errc::duplicate_rule:         return "DuplicateRule";
        case errc::unknown_handler:        return "UnknownHandler";
        case errc::unknown_rule:           return "UnknownRule";
        case errc::zero_amount:            return "ZeroAmount";
        case errc::malformed_amount:       return "MalformedAmount";
        case errc::unknown_currency:       return "UnknownCurrency";
        case errc::insufficient_balance:   return "InsufficientBalance";
        case errc::no_pool:                return "NoPool";
        case errc::pool_exists:            return "PoolExists";
        case errc::insufficient_liquidity: return "InsufficientLiquidity";
        case errc::nullifier_reused:       return "NullifierReused";
        case errc::proof_invalid:          return "ProofInvalid";
        case errc::io_error:               return "IoError";
    }
    return "UnknownError";
}

class Error : public std::runtime_error {
public:
    Error(errc code, std::string msg)
        : std::runtime_error(std::string(errc_name(code)) + ": " + std::move(msg)), code_(code) {}

    errc code() const noexcept { return code_; }

private:
    errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& msg) { throw Error(code, msg); }

}  // namespace emw
