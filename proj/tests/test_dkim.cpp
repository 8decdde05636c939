#include <catch2/catch_amalgamated.hpp>

#include "emailwallet/dkim.hpp"
#include "support/fixtures.hpp"

using namespace emw;
using namespace emw::testsupport;

namespace {

template <class F>
errc error_code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return errc::io_error;
}

EmailMessage fixture_message() {
    return make_message("Alice <alice@example.com>", "aggregator@relay.local", "1 hello",
                        "Transfer 0.005 ETH to bob@example.com\r\n");
}

}  // namespace

TEST_CASE("dkim sign/verify round-trip, all canonicalization modes") {
    const auto& [pub, priv] = sds_keys();
    KeyRegistry registry = example_registry();
    const Canonicalization modes[] = {
        {CanonMode::relaxed, CanonMode::relaxed},
        {CanonMode::simple, CanonMode::simple},
        {CanonMode::relaxed, CanonMode::simple},
        {CanonMode::simple, CanonMode::relaxed},
    };
    for (const auto& mode : modes) {
        INFO(mode.to_string());
        EmailMessage signed_msg =
            dkim_sign(fixture_message(), priv, "example.com", "sel1", mode);
        VerifiedEmail ve = dkim_verify(signed_msg, registry);
        CHECK(ve.sender == "alice@example.com");
        CHECK(ve.domain == "example.com");
        CHECK(ve.selector == "sel1");
        CHECK(ve.pubkey == pub);

        // the signed message still parses and round-trips as bytes
        bytes raw = signed_msg.serialize();
        CHECK(parse_email(raw).serialize() == raw);
    }
}

TEST_CASE("dkim_sign is deterministic (no timestamps)") {
    const auto& priv = sds_keys().second;
    bytes a = dkim_sign(fixture_message(), priv, "example.com", "sel1").serialize();
    bytes b = dkim_sign(fixture_message(), priv, "example.com", "sel1").serialize();
    CHECK(a == b);
}

TEST_CASE("dkim_sign preconditions") {
    const auto& priv = sds_keys().second;
    EmailMessage no_from;
    no_from.headers.push_back({"Subject", " 1"});
    no_from.body = "x\r\n";
    CHECK(error_code_of([&] { dkim_sign(no_from, priv, "example.com", "sel1"); }) ==
          errc::missing_header);

    EmailMessage no_subject;
    no_subject.headers.push_back({"From", " a@example.com"});
    no_subject.body = "x\r\n";
    CHECK(error_code_of([&] { dkim_sign(no_subject, priv, "example.com", "sel1"); }) ==
          errc::missing_header);

    EmailMessage already = dkim_sign(fixture_message(), priv, "example.com", "sel1");
    CHECK(error_code_of([&] { dkim_sign(already, priv, "example.com", "sel1"); }) ==
          errc::multiple_signatures);
}

TEST_CASE("dkim_verify distinct failure modes") {
    const auto& [pub, priv] = sds_keys();
    KeyRegistry registry = example_registry();
    EmailMessage signed_msg = dkim_sign(fixture_message(), priv, "example.com", "sel1");

    SECTION("no signature") {
        CHECK(error_code_of([&] { dkim_verify(fixture_message(), registry); }) ==
              errc::no_signature);
    }
    SECTION("multiple signatures") {
        EmailMessage two = signed_msg;
        two.headers.insert(two.headers.begin(), two.headers.front());
        CHECK(error_code_of([&] { dkim_verify(two, registry); }) == errc::multiple_signatures);
    }
    SECTION("unknown domain / selector") {
        CHECK(error_code_of([&] { dkim_verify(signed_msg, KeyRegistry{}); }) ==
              errc::unknown_domain_key);
        KeyRegistry wrong_sel{{"example.com", {{"other", pub}}}};
        CHECK(error_code_of([&] { dkim_verify(signed_msg, wrong_sel); }) ==
              errc::unknown_domain_key);
    }
    SECTION("body altered after signing") {
        EmailMessage tampered = signed_msg;
        tampered.body[10] = 'X';
        CHECK(error_code_of([&] { dkim_verify(tampered, registry); }) ==
              errc::body_hash_mismatch);
    }
    SECTION("signed header altered after signing") {
        EmailMessage tampered = signed_msg;
        for (auto& h : tampered.headers)
            if (h.name == "Subject") h.value = " 2 hello";
        CHECK(error_code_of([&] { dkim_verify(tampered, registry); }) ==
              errc::signature_invalid);
    }
    SECTION("b= tampered") {
        EmailMessage tampered = signed_msg;
        auto& v = tampered.headers.front().value;  // DKIM-Signature is first
        auto bpos = v.find("; b=");
        REQUIRE(bpos != std::string::npos);
        char& c = v[bpos + 4];
        c = (c == 'A') ? 'B' : 'A';
        CHECK(error_code_of([&] { dkim_verify(tampered, registry); }) ==
              errc::signature_invalid);
    }
    SECTION("verifies only under the exact signing key") {
        auto other = rsa_keygen(2048, "impostor");
        KeyRegistry wrong_key{{"example.com", {{"sel1", other.first}}}};
        CHECK(error_code_of([&] { dkim_verify(signed_msg, wrong_key); }) ==
              errc::signature_invalid);
    }
    SECTION("From domain must match d=") {
        // signed under other.org's key, but From stays at example.com
        EmailMessage cross = dkim_sign(fixture_message(), priv, "other.org", "sel1");
        KeyRegistry other_reg{{"other.org", {{"sel1", pub}}}};
        CHECK(error_code_of([&] { dkim_verify(cross, other_reg); }) == errc::domain_mismatch);
    }
}

TEST_CASE("relaxed canonicalization tolerates WSP-only edits, strictly verified otherwise") {
    const auto& priv = sds_keys().second;
    KeyRegistry registry = example_registry();
    bytes raw = dkim_sign(fixture_message(), priv, "example.com", "sel1").serialize();

    // turning the Subject's separator space into a tab is canonically invisible
    auto pos = raw.find("Subject: 1");
    REQUIRE(pos != std::string::npos);
    bytes wsp = raw;
    wsp[pos + 8] = '\t';
    CHECK(dkim_verify(parse_email(wsp), registry).sender == "alice@example.com");

    // any non-WSP change to a signed header is caught
    bytes content = raw;
    content[pos + 9] = '2';
    CHECK(error_code_of([&] { dkim_verify(parse_email(content), registry); }) ==
          errc::signature_invalid);
}

TEST_CASE("dkim tag-list parsing is strict") {
    const auto& priv = sds_keys().second;
    KeyRegistry registry = example_registry();
    bytes raw = dkim_sign(fixture_message(), priv, "example.com", "sel1").serialize();

    auto mutate_tag = [&](const std::string& from, const std::string& to) {
        bytes m = raw;
        auto p = m.find(from);
        REQUIRE(p != std::string::npos);
        m.replace(p, from.size(), to);
        return parse_email(m);
    };
    // v=2 changes signed bytes AND is an unsupported version; either way it fails
    CHECK(error_code_of([&] { dkim_verify(mutate_tag("v=1", "v=2"), registry); }) ==
          errc::signature_invalid);
    CHECK(error_code_of([&] { dkim_verify(mutate_tag("a=rsa-sha256", "a=rsa-sha512"), registry); }) ==
          errc::signature_invalid);
}

TEST_CASE("Canonicalization::parse handles c= forms") {
    CHECK(Canonicalization::parse("relaxed/relaxed").to_string() == "relaxed/relaxed");
    CHECK(Canonicalization::parse("simple/relaxed").to_string() == "simple/relaxed");
    // missing body mode defaults to simple
    CHECK(Canonicalization::parse("relaxed").to_string() == "relaxed/simple");
    CHECK_THROWS_AS(Canonicalization::parse("loose/loose"), Error);
}
