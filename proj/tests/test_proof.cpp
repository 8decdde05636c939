#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "emailwallet/proof.hpp"
#include "support/fixtures.hpp"

using namespace emw;
using namespace emw::testsupport;

namespace {

bytes scenario_email() {
    return signed_email("Alice <alice@example.com>", "1 transfer",
                        "Transfer 0.005 ETH to bob@example.com");
}

EmailProof scenario_proof() {
    return prove(scenario_email(), rule1(), example_registry());
}

}  // namespace

TEST_CASE("prove builds the scenario claim and the proof verifies") {
    EmailProof proof = scenario_proof();
    CHECK(proof.claim.sender_email == "alice@example.com");
    CHECK(proof.claim.rule_id == 1);
    CHECK(proof.claim.variable_values ==
          VariableValues{{"A", "0.005"}, {"T", "ETH"}, {"Y", "bob@example.com"}});
    CHECK(proof.claim.rsa_pubkey == sds_keys().first);

    VerifyResult r = verify(proof, rule1(), sds_keys().first);
    CHECK(r.ok);
    CHECK(r.reason_code() == 0);
}

TEST_CASE("prove propagates pipeline failures") {
    EmailMessage unsigned_msg = make_message("alice@example.com", "agg@relay.local",
                                             "1 x", "Transfer 1 ETH to b@example.com\r\n");
    CHECK_THROWS_MATCHES(prove(unsigned_msg.serialize(), rule1(), example_registry()), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.code() == errc::no_signature; }));

    bytes wrong_body = signed_email("alice@example.com", "1 x", "buy me a coffee");
    CHECK_THROWS_MATCHES(prove(wrong_body, rule1(), example_registry()), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.code() == errc::no_match; }));
}

TEST_CASE("verify reason codes, constraint by constraint") {
    EmailProof good = scenario_proof();
    const RsaPublicKey& key = sds_keys().first;

    SECTION("(1) corrupted witness") {
        EmailProof p = good;
        p.witness = p.witness.substr(0, p.witness.size() / 2);
        CHECK(verify(p, rule1(), key).reason == VerifyReason::witness_parse);

        EmailProof q = good;
        q.claim.rule_id = 99;  // artifact/claim misalignment
        CHECK(verify(q, rule1(), key).reason == VerifyReason::witness_parse);
    }
    SECTION("(2) body altered inside the witness") {
        EmailProof p = good;
        auto pos = p.witness.find("0.005 ETH");
        REQUIRE(pos != std::string::npos);
        p.witness[pos] = '1';
        auto r = verify(p, rule1(), key);
        CHECK(r.reason == VerifyReason::body_hash);
    }
    SECTION("(3) signature bit flipped") {
        EmailProof p = good;
        auto pos = p.witness.find("; b=");
        REQUIRE(pos != std::string::npos);
        char& c = p.witness[pos + 4];
        c = (c == 'A') ? 'B' : 'A';
        CHECK(verify(p, rule1(), key).reason == VerifyReason::rsa_signature);
    }
    SECTION("(4) claim key differs from the registered key") {
        auto other = rsa_keygen(2048, "someone-else");
        CHECK(verify(good, rule1(), other.first).reason == VerifyReason::registered_key);
    }
    SECTION("(5) claim sender rebound") {
        EmailProof p = good;
        p.claim.sender_email = "mallory@example.com";
        CHECK(verify(p, rule1(), key).reason == VerifyReason::sender_binding);
    }
    SECTION("(6) claim value changed: 0.005 -> 0.006") {
        EmailProof p = good;
        p.claim.variable_values["A"] = "0.006";
        auto r = verify(p, rule1(), key);
        CHECK_FALSE(r.ok);
        CHECK(r.reason == VerifyReason::regex_binding);

        EmailProof q = good;
        q.claim.variable_values.erase("Y");
        CHECK(verify(q, rule1(), key).reason == VerifyReason::regex_binding);

        EmailProof extra = good;
        extra.claim.variable_values["Z"] = "junk";
        CHECK(verify(extra, rule1(), key).reason == VerifyReason::regex_binding);
    }
    SECTION("(7) body exceeding max_len reports the length reason") {
        RegexRule tiny = build_rule(1, 24, rule1_specs());
        // valid signed email whose body is longer than 24 bytes
        EmailProof p = prove(scenario_email(), rule1(), example_registry());
        auto r = verify(p, tiny, key);
        CHECK_FALSE(r.ok);
        CHECK(r.reason == VerifyReason::length_bound);
    }
    SECTION("(8) nullifier mismatch") {
        EmailProof p = good;
        p.nullifier[0] ^= 1;
        CHECK(verify(p, rule1(), key).reason == VerifyReason::nullifier_binding);
    }
}

TEST_CASE("soundness surrogate: accepted proofs reproduce their claim") {
    EmailProof proof = scenario_proof();
    REQUIRE(verify(proof, rule1(), sds_keys().first).ok);

    EmailMessage msg = parse_email(proof.witness);
    VerifiedEmail ve = dkim_verify(msg, example_registry());
    VariableValues values = match_and_extract(rule1(), trimmed_body(msg));
    CHECK(ve.sender == proof.claim.sender_email);
    CHECK(ve.pubkey == proof.claim.rsa_pubkey);
    CHECK(values == proof.claim.variable_values);
    CHECK(compute_nullifier(proof.witness) == proof.nullifier);
}

TEST_CASE("witness mutations never yield a different accepted claim") {
    EmailProof good = scenario_proof();
    const RsaPublicKey& key = sds_keys().first;
    std::mt19937 rng(0x5eed0201);
    int accepted_equivalent = 0;
    for (int i = 0; i < 200; ++i) {
        EmailProof p = good;
        std::size_t pos = rng() % p.witness.size();
        char old = p.witness[pos];
        char repl;
        do {
            repl = static_cast<char>(rng() % 256);
        } while (repl == old);
        p.witness[pos] = repl;
        VerifyResult r = verify(p, rule1(), key);
        if (r.ok) {
            // only canonicalization-equivalent edits may still verify, and
            // they cannot move the claim or the nullifier
            ++accepted_equivalent;
            CHECK(compute_nullifier(p.witness) == good.nullifier);
        }
    }
    INFO("canonically-equivalent mutations: " << accepted_equivalent);
    CHECK(accepted_equivalent < 200);
}

TEST_CASE("under simple/simple every single-byte witness mutation fails verify") {
    Canonicalization simple{CanonMode::simple, CanonMode::simple};
    bytes raw = signed_email("alice@example.com", "1 t",
                             "Transfer 0.5 ETH to bob@example.com", simple);
    EmailProof good = prove(raw, rule1(), example_registry());
    REQUIRE(verify(good, rule1(), sds_keys().first).ok);

    std::mt19937 rng(0x5eed0202);
    for (int i = 0; i < 200; ++i) {
        EmailProof p = good;
        std::size_t pos = rng() % p.witness.size();
        char old = p.witness[pos];
        char repl;
        do {
            repl = static_cast<char>(rng() % 256);
        } while (repl == old);
        p.witness[pos] = repl;
        CHECK_FALSE(verify(p, rule1(), sds_keys().first).ok);
    }
}

TEST_CASE("compute_nullifier") {
    bytes email1 = scenario_email();
    CHECK(compute_nullifier(email1) == compute_nullifier(email1));

    bytes email2 = signed_email("alice@example.com", "1 transfer",
                                "Transfer 0.006 ETH to bob@example.com");
    CHECK(compute_nullifier(email1) != compute_nullifier(email2));

    EmailMessage unsigned_msg = make_message("a@example.com", "b@c.d", "1 x", "hi\r\n");
    CHECK_THROWS_MATCHES(compute_nullifier(unsigned_msg.serialize()), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.code() == errc::no_signature; }));
}

TEST_CASE("proof file format") {
    EmailProof proof = scenario_proof();
    bytes blob = encode_proof(proof);

    EmailProof decoded = decode_proof(blob);
    CHECK(decoded.claim == proof.claim);
    CHECK(decoded.witness == proof.witness);
    CHECK(decoded.nullifier == proof.nullifier);
    CHECK(encode_proof(decoded) == blob);

    auto code_of = [](auto f) {
        try {
            f();
        } catch (const Error& e) {
            return e.code();
        }
        return errc::io_error;
    };
    CHECK(code_of([&] { decode_proof(blob.substr(0, 10)); }) == errc::corrupt_proof);
    CHECK(code_of([&] { decode_proof(blob + "x"); }) == errc::corrupt_proof);
    bytes bad_magic = blob;
    bad_magic[0] = 'X';
    CHECK(code_of([&] { decode_proof(bad_magic); }) == errc::corrupt_proof);
    bytes bad_version = blob;
    bad_version[4] = 7;
    CHECK(code_of([&] { decode_proof(bad_version); }) == errc::version_mismatch);
}
