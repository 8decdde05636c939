#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "emailwallet/chain.hpp"
#include "emailwallet/chain_store.hpp"
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

mpz_class eth(const char* s) { return parse_token_amount(s); }

WalletState scenario_state() {
    WalletState st;
    st.register_sds_key("example.com", "sel1", sds_keys().first);
    st.register_rule(export_artifact(rule1()), HandlerId::transfer);
    st.register_rule(export_artifact(rule2()), HandlerId::swap);
    st.init_pool("ETH", "DAI", eth("1"), eth("2000"));
    st.deposit("alice@example.com", {"ETH", eth("0.01")});
    return st;
}

EmailProof transfer_proof(const std::string& from, const std::string& body) {
    return prove(signed_email(from, "1 t", body), rule1(), example_registry());
}

mpz_class total_supply(const WalletState& st, const std::string& currency) {
    mpz_class total = 0;
    for (const auto& [email, balances] : st.accounts) {
        auto it = balances.find(currency);
        if (it != balances.end()) total += it->second;
    }
    for (const auto& [pair, pool] : st.pools) {
        if (pair.first == currency) total += pool.reserve_a;
        if (pair.second == currency) total += pool.reserve_b;
    }
    return total;
}

}  // namespace

TEST_CASE("amount parsing and formatting are exact") {
    CHECK(eth("0.005") == mpz_class("5000000000000000"));
    CHECK(eth("0.01") == mpz_class("10000000000000000"));
    CHECK(eth("2000") == mpz_class("2000000000000000000000"));
    CHECK(eth("0.000000000000000001") == 1);
    CHECK(format_token_amount(eth("0.01")) == "0.010000000000000000");
    CHECK(format_token_amount(0) == "0.000000000000000000");
    CHECK(format_token_amount(eth("2000")) == "2000.000000000000000000");

    for (const char* bad : {"", ".", ".5", "1.", "1.0000000000000000001", "1e3", "-1", "0x10",
                            "1 0", "0.00.1"}) {
        INFO(bad);
        CHECK(error_code_of([&] { parse_token_amount(bad); }) == errc::malformed_amount);
    }
}

TEST_CASE("key registry") {
    WalletState st;
    st.register_sds_key("Example.com", "s1", sds_keys().first);
    CHECK(st.lookup_sds_key("example.com", "s1") == sds_keys().first);
    CHECK(error_code_of([&] {
              st.register_sds_key("example.com", "s1", sds_keys().first);
          }) == errc::duplicate_key);  // the SDS does not rotate keys
    CHECK(error_code_of([&] { st.lookup_sds_key("other.org", "s1"); }) ==
          errc::unknown_domain_key);
    CHECK(error_code_of([&] { st.lookup_sds_key("example.com", "s2"); }) ==
          errc::unknown_domain_key);
    CHECK(error_code_of([&] { st.register_sds_key("", "s", sds_keys().first); }) ==
          errc::bad_argument);
}

TEST_CASE("rule registry") {
    WalletState st;
    st.register_rule(export_artifact(rule1()), HandlerId::transfer);
    CHECK(st.rules.count(1) == 1);
    CHECK(error_code_of([&] {
              st.register_rule(export_artifact(rule1()), HandlerId::transfer);
          }) == errc::duplicate_rule);
    CHECK(error_code_of([&] { handler_from_name("stake"); }) == errc::unknown_handler);
    CHECK(error_code_of([&] { st.register_rule("garbage", HandlerId::swap); }) ==
          errc::corrupt_artifact);
}

TEST_CASE("deposit") {
    WalletState st;
    st.deposit("alice@example.com", {"ETH", eth("0.01")});
    CHECK(st.query_balance("alice@example.com", "ETH") == mpz_class("10000000000000000"));
    st.deposit("Alice@Example.com", {"ETH", eth("1")});  // addresses are case-folded
    CHECK(st.query_balance("alice@example.com", "ETH") == eth("1.01"));
    CHECK(error_code_of([&] { st.deposit("alice@example.com", {"ETH", 0}); }) ==
          errc::zero_amount);
    CHECK(error_code_of([&] { st.deposit("alice@example.com", {"eth", 1}); }) ==
          errc::unknown_currency);
    CHECK(st.query_balance("nobody@example.com", "ETH") == 0);
    CHECK(st.query_balance("alice@example.com", "DAI") == 0);
}

TEST_CASE("get_amount_out: frozen oracle values and convexity") {
    // floor(1000*997*1e6 / (1e6*1000 + 1000*997)) = 996
    CHECK(get_amount_out(1000, 1'000'000, 1'000'000) == 996);
    // scenario value, frozen from an independent big-integer script
    CHECK(get_amount_out(eth("0.005"), eth("1"), eth("2000")) ==
          mpz_class("9920546077802156251"));

    // out < a_in when reserves are equal (fee + slippage)
    for (long a : {1L, 7L, 500L, 99'999L})
        for (long r : {1'000L, 250'000L, 5'000'000L})
            CHECK(get_amount_out(a, r, r) < a);

    // doubling the input never doubles the output: exact in the rationals,
    // and the floored values stay within the rounding slack
    for (long r_in : {1'000L, 9'999L, 123'456L})
        for (long r_out : {1'000L, 77'777L})
            for (long a : {10L, 100L, 999L}) {
                mpz_class once = get_amount_out(a, r_in, r_out);
                mpz_class twice = get_amount_out(2 * a, r_in, r_out);
                mpz_class p1 = mpz_class(997) * (2 * a) * r_out;
                mpz_class q1 = mpz_class(1000) * r_in + mpz_class(997) * (2 * a);
                mpz_class p2 = mpz_class(997) * a * r_out;
                mpz_class q2 = mpz_class(1000) * r_in + mpz_class(997) * a;
                CHECK(p1 * q2 <= 2 * p2 * q1);  // f(2a) <= 2 f(a) exactly
                CHECK(twice <= 2 * once + 1);
            }

    CHECK_THROWS_AS(get_amount_out(0, 1, 1), Error);
}

TEST_CASE("handler_transfer") {
    WalletState st = scenario_state();
    SECTION("scenario numbers") {
        WalletState::handler_transfer(st, "alice@example.com",
                                      {{"A", "0.005"}, {"T", "ETH"}, {"Y", "bob@example.com"}});
        CHECK(st.query_balance("alice@example.com", "ETH") == mpz_class("5000000000000000"));
        CHECK(st.query_balance("bob@example.com", "ETH") == mpz_class("5000000000000000"));
        CHECK(total_supply(st, "ETH") == eth("0.01") + eth("1"));
    }
    SECTION("transfer to self conserves the balance") {
        WalletState::handler_transfer(st, "alice@example.com",
                                      {{"A", "0.004"}, {"T", "ETH"}, {"Y", "alice@example.com"}});
        CHECK(st.query_balance("alice@example.com", "ETH") == eth("0.01"));
    }
    SECTION("failures") {
        CHECK(error_code_of([&] {
                  WalletState::handler_transfer(
                      st, "alice@example.com",
                      {{"A", "1"}, {"T", "ETH"}, {"Y", "bob@example.com"}});
              }) == errc::insufficient_balance);
        CHECK(error_code_of([&] {
                  WalletState::handler_transfer(
                      st, "alice@example.com",
                      {{"A", "0.1.2"}, {"T", "ETH"}, {"Y", "bob@example.com"}});
              }) == errc::malformed_amount);
        CHECK(error_code_of([&] {
                  WalletState::handler_transfer(
                      st, "alice@example.com",
                      {{"A", "1"}, {"T", "ToolongCurrency"}, {"Y", "bob@example.com"}});
              }) == errc::unknown_currency);
        CHECK(error_code_of([&] {
                  WalletState::handler_transfer(st, "alice@example.com", {{"A", "1"}});
              }) == errc::missing_variable);
    }
}

TEST_CASE("handler_swap") {
    WalletState st = scenario_state();
    st.deposit("bob@example.com", {"ETH", eth("0.005")});

    SECTION("swap output matches the pool formula, reserves update") {
        mpz_class expect = get_amount_out(eth("0.005"), eth("1"), eth("2000"));
        mpz_class product_before =
            st.pools.at({"DAI", "ETH"}).reserve_a * st.pools.at({"DAI", "ETH"}).reserve_b;
        WalletState::handler_swap(st, "bob@example.com",
                                  {{"A", "0.005"}, {"T1", "ETH"}, {"T2", "DAI"}});
        CHECK(st.query_balance("bob@example.com", "ETH") == 0);
        CHECK(st.query_balance("bob@example.com", "DAI") == expect);
        const AmmPool& pool = st.pools.at({"DAI", "ETH"});
        CHECK(pool.reserve_b == eth("1") + eth("0.005"));   // ETH side grew
        CHECK(pool.reserve_a == eth("2000") - expect);       // DAI side shrank
        CHECK(pool.reserve_a * pool.reserve_b >= product_before);
        CHECK(total_supply(st, "ETH") == eth("0.01") + eth("0.005") + eth("1"));
        CHECK(total_supply(st, "DAI") == eth("2000"));
    }
    SECTION("failures") {
        CHECK(error_code_of([&] {
                  WalletState::handler_swap(st, "bob@example.com",
                                            {{"A", "0"}, {"T1", "ETH"}, {"T2", "DAI"}});
              }) == errc::zero_amount);
        CHECK(error_code_of([&] {
                  WalletState::handler_swap(st, "bob@example.com",
                                            {{"A", "0.001"}, {"T1", "ETH"}, {"T2", "USDC"}});
              }) == errc::no_pool);
        CHECK(error_code_of([&] {
                  WalletState::handler_swap(st, "bob@example.com",
                                            {{"A", "0.001"}, {"T1", "ETH"}, {"T2", "ETH"}});
              }) == errc::no_pool);
        CHECK(error_code_of([&] {
                  WalletState::handler_swap(st, "bob@example.com",
                                            {{"A", "1"}, {"T1", "ETH"}, {"T2", "DAI"}});
              }) == errc::insufficient_balance);
    }
    SECTION("dust swap with no output is rejected") {
        WalletState tiny;
        tiny.init_pool("AA", "BB", eth("1"), 10);  // 10 base units of BB
        tiny.deposit("u@example.com", {"AA", 1});
        CHECK(error_code_of([&] {
                  WalletState::handler_swap(tiny, "u@example.com",
                                            {{"A", "0.000000000000000001"}, {"T1", "AA"},
                                             {"T2", "BB"}});
              }) == errc::insufficient_liquidity);
    }
}

TEST_CASE("pool registration guards") {
    WalletState st;
    st.init_pool("ETH", "DAI", eth("1"), eth("2000"));
    CHECK(error_code_of([&] { st.init_pool("DAI", "ETH", 1, 1); }) == errc::pool_exists);
    CHECK(error_code_of([&] { st.init_pool("ETH", "ETH", 1, 1); }) == errc::bad_argument);
    CHECK(error_code_of([&] { st.init_pool("AA", "BB", 0, 1); }) == errc::zero_amount);
    CHECK(error_code_of([&] { st.init_pool("a", "BB", 1, 1); }) == errc::unknown_currency);
}

TEST_CASE("submit: acceptance and atomic rejection") {
    WalletState st = scenario_state();
    EmailProof proof = transfer_proof("alice@example.com",
                                      "Transfer 0.005 ETH to bob@example.com");

    SECTION("valid transaction moves the balances") {
        Receipt r = st.submit(proof);
        REQUIRE(r.accepted);
        CHECK(st.query_balance("alice@example.com", "ETH") == eth("0.005"));
        CHECK(st.query_balance("bob@example.com", "ETH") == eth("0.005"));
        CHECK(st.used_nullifiers.count(hex_encode(proof.nullifier)) == 1);

        SECTION("replay is rejected and state is untouched") {
            bytes before = st.snapshot_bytes();
            Receipt again = st.submit(proof);
            CHECK_FALSE(again.accepted);
            CHECK(again.reason == "NullifierReused");
            CHECK(st.snapshot_bytes() == before);
        }
    }
    SECTION("unknown rule") {
        EmailProof p = proof;
        p.claim.rule_id = 42;
        bytes before = st.snapshot_bytes();
        Receipt r = st.submit(p);
        CHECK(r.reason == "UnknownRule");
        CHECK(st.snapshot_bytes() == before);
    }
    SECTION("unknown domain key") {
        WalletState empty;
        empty.register_rule(export_artifact(rule1()), HandlerId::transfer);
        Receipt r = empty.submit(proof);
        CHECK(r.reason == "UnknownDomainKey");
    }
    SECTION("tampered claim: ProofInvalid, state untouched") {
        EmailProof p = proof;
        p.claim.variable_values["A"] = "0.006";
        bytes before = st.snapshot_bytes();
        Receipt r = st.submit(p);
        CHECK(r.reason == "ProofInvalid");
        CHECK(r.verify_reason == 6);
        CHECK(st.snapshot_bytes() == before);
    }
    SECTION("handler failure: atomic, nullifier not burned") {
        EmailProof overdraft = transfer_proof("alice@example.com",
                                              "Transfer 7 ETH to bob@example.com");
        bytes before = st.snapshot_bytes();
        Receipt r = st.submit(overdraft);
        CHECK_FALSE(r.accepted);
        CHECK(r.stage == "handler");
        CHECK(r.reason == "InsufficientBalance");
        CHECK(st.snapshot_bytes() == before);
        CHECK(st.used_nullifiers.empty());
    }
}

TEST_CASE("receipts stay serializable when the witness carries binary tag values") {
    WalletState st = scenario_state();
    EmailProof p = transfer_proof("alice@example.com", "Transfer 0.001 ETH to bob@example.com");

    // rewrite d= to binary bytes: the key lookup fails, and the receipt
    // (which echoes the domain in its detail) must still serialize
    auto pos = p.witness.find("d=example.com");
    REQUIRE(pos != std::string::npos);
    p.witness[pos + 2] = '\xff';
    p.witness[pos + 3] = '\xfe';

    Receipt r = st.submit(p);
    CHECK_FALSE(r.accepted);
    CHECK(r.reason == "UnknownDomainKey");
    CHECK_NOTHROW(r.to_json().dump());
    CHECK(r.to_json().dump().find("\xff") == std::string::npos);
}

TEST_CASE("conservation across a mixed transaction sequence") {
    WalletState st = scenario_state();
    st.deposit("bob@example.com", {"DAI", eth("3")});
    mpz_class eth_supply = total_supply(st, "ETH");
    mpz_class dai_supply = total_supply(st, "DAI");

    const char* bodies[] = {
        "Transfer 0.001 ETH to bob@example.com",
        "Transfer 0.002 ETH to carol@example.com",
        "Transfer 9 ETH to bob@example.com",  // overdraft, rejected
    };
    int i = 0;
    for (const char* body : bodies) {
        EmailProof p = prove(signed_email("alice@example.com",
                                          "1 n" + std::to_string(i++), body),
                             rule1(), example_registry());
        st.submit(p);
        CHECK(total_supply(st, "ETH") == eth_supply);
        CHECK(total_supply(st, "DAI") == dai_supply);
    }
    EmailProof swap = prove(signed_email("bob@example.com", "2 s",
                                         "Swap 0.001 ETH to DAI via Uniswap"),
                            rule2(), example_registry());
    REQUIRE(st.submit(swap).accepted);
    CHECK(total_supply(st, "ETH") == eth_supply);
    CHECK(total_supply(st, "DAI") == dai_supply);

    // no negative balances anywhere
    for (const auto& [email, balances] : st.accounts)
        for (const auto& [cur, v] : balances) CHECK(v >= 0);
}

TEST_CASE("snapshot: canonical bytes round-trip") {
    WalletState st = scenario_state();
    st.submit(transfer_proof("alice@example.com", "Transfer 0.001 ETH to bob@example.com"));

    bytes snap = st.snapshot_bytes();
    WalletState reloaded = WalletState::from_snapshot(snap);
    CHECK(reloaded.snapshot_bytes() == snap);
    CHECK(reloaded.query_balance("bob@example.com", "ETH") == eth("0.001"));
    CHECK(reloaded.rules.size() == 2);
    CHECK(reloaded.lookup_sds_key("example.com", "sel1") == sds_keys().first);

    CHECK(error_code_of([] { WalletState::from_snapshot("{]"); }) == errc::corrupt_state);
    CHECK(error_code_of([] { WalletState::from_snapshot("{}"); }) == errc::corrupt_state);
}

TEST_CASE("chain store: log + replay reproduce the snapshot") {
    TempDir dir;
    fs::path state_path = dir / "state.json";
    write_file(dir / "rule1.vrm", export_artifact(rule1()));
    write_file(dir / "rule2.vrm", export_artifact(rule2()));

    {
        ChainStore store = ChainStore::init(state_path);
        store.register_key("example.com", "sel1", sds_keys().first);
        store.register_rule(dir / "rule1.vrm", HandlerId::transfer);
        store.register_rule(dir / "rule2.vrm", HandlerId::swap);
        store.init_pool("ETH", "DAI", eth("1"), eth("2000"));
        store.deposit("alice@example.com", {"ETH", eth("0.01")});

        EmailProof p = transfer_proof("alice@example.com",
                                      "Transfer 0.005 ETH to bob@example.com");
        write_file(dir / "p1.ewpf", encode_proof(p));
        Receipt r = store.submit_proof(p, dir / "p1.ewpf");
        REQUIRE(r.accepted);
        Receipt replayed = store.submit_proof(p, dir / "p1.ewpf");
        CHECK(replayed.reason == "NullifierReused");
    }

    ChainStore loaded = ChainStore::load(state_path);
    WalletState replayed = ChainStore::replay(state_path);
    CHECK(replayed.snapshot_bytes() == loaded.state.snapshot_bytes());
    CHECK(replayed.query_balance("bob@example.com", "ETH") == eth("0.005"));

    CHECK_THROWS_AS(ChainStore::init(state_path), Error);  // refuses to clobber
}
