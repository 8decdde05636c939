#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "emailwallet/amount.hpp"
#include "emailwallet/base64.hpp"
#include "emailwallet/dkim.hpp"
#include "emailwallet/errors.hpp"
#include "emailwallet/proof.hpp"
#include "emailwallet/rule.hpp"

namespace emw {

enum class HandlerId { transfer, swap };

inline const char* handler_name(HandlerId h) {
    return h == HandlerId::transfer ? "transfer" : "swap";
}

inline HandlerId handler_from_name(std::string_view name) {
    if (name == "transfer") return HandlerId::transfer;
    if (name == "swap") return HandlerId::swap;
    fail(errc::unknown_handler, "unknown handler: " + std::string(name));
}

/// Constant-product pool with a 0.3% fee. reserve_a belongs to the
/// lexicographically smaller currency of the pair.
struct AmmPool {
    mpz_class reserve_a;
    mpz_class reserve_b;
    static constexpr unsigned kFeeNumerator = 3;
    static constexpr unsigned kFeeDenominator = 1000;
};

/// floor(a_in*997*r_out / (r_in*1000 + a_in*997)); exact integer arithmetic.
inline mpz_class get_amount_out(const mpz_class& a_in, const mpz_class& r_in,
                                const mpz_class& r_out) {
    if (a_in <= 0 || r_in <= 0 || r_out <= 0)
        fail(errc::bad_argument, "get_amount_out needs positive inputs");
    mpz_class in_with_fee = a_in * (AmmPool::kFeeDenominator - AmmPool::kFeeNumerator);
    mpz_class numerator = in_with_fee * r_out;
    mpz_class denominator = r_in * AmmPool::kFeeDenominator + in_with_fee;
    return numerator / denominator;
}

struct RuleEntry {
    bytes artifact_blob;
    RegexRule rule;
    HandlerId handler = HandlerId::transfer;
};

struct Receipt {
    bool accepted = false;
    std::string stage;   // where processing stopped: parse|rule-lookup|match|prove|key|proof|nullifier|handler
    std::string reason;  // stable error token, empty when accepted
    int verify_reason = 0;  // constraint number when reason == "ProofInvalid"
    std::string detail;
    std::string nullifier_hex;
    std::optional<nlohmann::json> claim;

    nlohmann::json to_json() const {
        nlohmann::json j{
            {"accepted", accepted},
            {"stage", stage},
            {"reason", reason},
            {"nullifier", nullifier_hex.empty() ? nlohmann::json() : nlohmann::json(nullifier_hex)},
            {"claim", claim ? *claim : nlohmann::json()},
        };
        if (verify_reason != 0) j["verify_reason"] = verify_reason;
        if (!detail.empty()) j["detail"] = ascii_sanitize(detail);
        return j;
    }
};

/// The simulated wallet contract. Value type; submit() is atomic — a failed
/// transaction leaves the state bit-identical.
struct WalletState {
    std::map<std::string, std::map<std::string, mpz_class>> accounts;  // email → currency → balance
    KeyRegistry key_registry;
    std::map<std::uint64_t, RuleEntry> rules;
    std::set<std::string> used_nullifiers;  // hex
    std::map<std::pair<std::string, std::string>, AmmPool> pools;

    // --- registration ---

    void register_sds_key(std::string_view domain, std::string_view selector,
                          const RsaPublicKey& key) {
        if (domain.empty()) fail(errc::bad_argument, "domain must be nonempty");
        std::string d = to_lower_ascii(domain), s(selector);
        auto& sel_map = key_registry[d];
        if (sel_map.find(s) != sel_map.end())
            fail(errc::duplicate_key, "key already registered for " + d + "/" + s);
        sel_map.emplace(std::move(s), key);
    }

    const RsaPublicKey& lookup_sds_key(std::string_view domain,
                                       std::string_view selector) const {
        auto d = key_registry.find(to_lower_ascii(domain));
        if (d == key_registry.end())
            fail(errc::unknown_domain_key, "no keys for domain " + std::string(domain));
        auto s = d->second.find(std::string(selector));
        if (s == d->second.end())
            fail(errc::unknown_domain_key, "no key for selector " + std::string(selector));
        return s->second;
    }

    void register_rule(const bytes& artifact_blob, HandlerId handler) {
        RegexRule rule = import_artifact(artifact_blob);
        if (rules.find(rule.rule_id) != rules.end())
            fail(errc::duplicate_rule, "rule " + std::to_string(rule.rule_id) +
                                           " already registered");
        rules.emplace(rule.rule_id, RuleEntry{artifact_blob, std::move(rule), handler});
    }

    void init_pool(std::string_view cur_a, std::string_view cur_b, const mpz_class& reserve_a,
                   const mpz_class& reserve_b) {
        if (!valid_currency_code(cur_a) || !valid_currency_code(cur_b))
            fail(errc::unknown_currency, "invalid currency code");
        if (cur_a == cur_b) fail(errc::bad_argument, "pool needs two distinct currencies");
        if (reserve_a <= 0 || reserve_b <= 0) fail(errc::zero_amount, "reserves must be positive");
        auto key = pool_key(cur_a, cur_b);
        if (pools.find(key) != pools.end())
            fail(errc::pool_exists, "pool already exists for " + key.first + "/" + key.second);
        AmmPool pool;
        if (std::string(cur_a) == key.first) {
            pool.reserve_a = reserve_a;
            pool.reserve_b = reserve_b;
        } else {
            pool.reserve_a = reserve_b;
            pool.reserve_b = reserve_a;
        }
        pools.emplace(key, std::move(pool));
    }

    // --- balances ---

    void deposit(std::string_view email, const Amount& amount) {
        if (!valid_currency_code(amount.currency))
            fail(errc::unknown_currency, "invalid currency code: " + amount.currency);
        if (amount.value <= 0) fail(errc::zero_amount, "deposit must be positive");
        std::string addr = parse_address(email);
        accounts[addr][amount.currency] += amount.value;
    }

    mpz_class query_balance(std::string_view email, std::string_view currency) const {
        auto acc = accounts.find(to_lower_ascii(email));
        if (acc == accounts.end()) return 0;
        auto bal = acc->second.find(std::string(currency));
        if (bal == acc->second.end()) return 0;
        return bal->second;
    }

    // --- transaction submission ---

    Receipt submit(const EmailProof& proof) {
        Receipt receipt;
        receipt.nullifier_hex = hex_encode(proof.nullifier);
        receipt.claim = proof.claim.to_json();

        auto rule_it = rules.find(proof.claim.rule_id);
        if (rule_it == rules.end()) {
            receipt.stage = "rule-lookup";
            receipt.reason = errc_name(errc::unknown_rule);
            receipt.detail = "rule " + std::to_string(proof.claim.rule_id) + " not registered";
            return receipt;
        }
        const RuleEntry& entry = rule_it->second;

        // the witness's d=/s= select the registered key, mirroring a DNS lookup
        std::string domain, selector;
        try {
            EmailMessage msg = parse_email(proof.witness);
            DkimSignature sig = parse_dkim_header(msg);
            domain = sig.domain;
            selector = sig.selector;
        } catch (const Error& e) {
            receipt.stage = "proof";
            receipt.reason = errc_name(errc::proof_invalid);
            receipt.verify_reason = static_cast<int>(VerifyReason::witness_parse);
            receipt.detail = e.what();
            return receipt;
        }

        const RsaPublicKey* key = nullptr;
        try {
            key = &lookup_sds_key(domain, selector);
        } catch (const Error& e) {
            receipt.stage = "key";
            receipt.reason = errc_name(errc::unknown_domain_key);
            receipt.detail = e.what();
            return receipt;
        }

        VerifyResult vr = verify(proof, entry.rule, *key);
        if (!vr.ok) {
            receipt.stage = "proof";
            receipt.reason = errc_name(errc::proof_invalid);
            receipt.verify_reason = vr.reason_code();
            receipt.detail = vr.detail;
            return receipt;
        }

        if (used_nullifiers.find(receipt.nullifier_hex) != used_nullifiers.end()) {
            receipt.stage = "nullifier";
            receipt.reason = errc_name(errc::nullifier_reused);
            receipt.detail = "nullifier already spent";
            return receipt;
        }

        WalletState scratch = *this;  // all-or-nothing application
        try {
            switch (entry.handler) {
                case HandlerId::transfer:
                    handler_transfer(scratch, proof.claim.sender_email,
                                     proof.claim.variable_values);
                    break;
                case HandlerId::swap:
                    handler_swap(scratch, proof.claim.sender_email, proof.claim.variable_values);
                    break;
            }
        } catch (const Error& e) {
            receipt.stage = "handler";
            receipt.reason = errc_name(e.code());
            receipt.detail = e.what();
            return receipt;
        }
        scratch.used_nullifiers.insert(receipt.nullifier_hex);
        *this = std::move(scratch);
        receipt.accepted = true;
        return receipt;
    }

    // --- snapshot (canonical JSON, sorted keys) ---

    nlohmann::json snapshot_json() const {
        nlohmann::json j;
        j["version"] = 1;
        nlohmann::json accounts_j = nlohmann::json::object();
        for (const auto& [email, balances] : accounts) {
            nlohmann::json b = nlohmann::json::object();
            for (const auto& [cur, value] : balances) b[cur] = value.get_str(10);
            accounts_j[email] = std::move(b);
        }
        j["accounts"] = std::move(accounts_j);

        nlohmann::json keys_j = nlohmann::json::object();
        for (const auto& [domain, sels] : key_registry) {
            nlohmann::json d = nlohmann::json::object();
            for (const auto& [sel, key] : sels)
                d[sel] = {{"e", key.e.get_str(10)}, {"n", key.n.get_str(10)}};
            keys_j[domain] = std::move(d);
        }
        j["key_registry"] = std::move(keys_j);

        nlohmann::json rules_j = nlohmann::json::object();
        for (const auto& [id, entry] : rules)
            rules_j[std::to_string(id)] = {{"artifact", base64_encode(entry.artifact_blob)},
                                           {"handler", handler_name(entry.handler)}};
        j["rules"] = std::move(rules_j);

        nlohmann::json pools_j = nlohmann::json::object();
        for (const auto& [pair, pool] : pools)
            pools_j[pair.first + "/" + pair.second] = {
                {"currency_a", pair.first},
                {"currency_b", pair.second},
                {"fee_denominator", AmmPool::kFeeDenominator},
                {"fee_numerator", AmmPool::kFeeNumerator},
                {"reserve_a", pool.reserve_a.get_str(10)},
                {"reserve_b", pool.reserve_b.get_str(10)},
            };
        j["pools"] = std::move(pools_j);

        j["used_nullifiers"] = used_nullifiers;  // std::set → sorted array
        return j;
    }

    bytes snapshot_bytes() const { return snapshot_json().dump(2) + "\n"; }

    static WalletState from_snapshot(std::string_view text) {
        nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
        if (j.is_discarded() || !j.is_object()) fail(errc::corrupt_state, "snapshot is not JSON");
        WalletState st;
        try {
            for (const auto& [email, balances] : j.at("accounts").items())
                for (const auto& [cur, value] : balances.items()) {
                    mpz_class v;
                    if (v.set_str(value.get<std::string>(), 10) != 0 || v < 0)
                        fail(errc::corrupt_state, "bad balance");
                    st.accounts[email][cur] = v;
                }
            for (const auto& [domain, sels] : j.at("key_registry").items())
                for (const auto& [sel, key] : sels.items()) {
                    RsaPublicKey k;
                    if (k.n.set_str(key.at("n").get<std::string>(), 10) != 0 ||
                        k.e.set_str(key.at("e").get<std::string>(), 10) != 0)
                        fail(errc::corrupt_state, "bad key");
                    st.key_registry[domain][sel] = k;
                }
            for (const auto& [id_str, entry] : j.at("rules").items()) {
                bytes blob = base64_decode(entry.at("artifact").get<std::string>());
                HandlerId h = handler_from_name(entry.at("handler").get<std::string>());
                if (std::to_string(import_artifact(blob).rule_id) != id_str)
                    fail(errc::corrupt_state, "rule id mismatch");
                st.register_rule(blob, h);
            }
            for (const auto& [name, pool_j] : j.at("pools").items()) {
                AmmPool pool;
                std::string a = pool_j.at("currency_a").get<std::string>();
                std::string b = pool_j.at("currency_b").get<std::string>();
                if (pool.reserve_a.set_str(pool_j.at("reserve_a").get<std::string>(), 10) != 0 ||
                    pool.reserve_b.set_str(pool_j.at("reserve_b").get<std::string>(), 10) != 0 ||
                    pool.reserve_a <= 0 || pool.reserve_b <= 0)
                    fail(errc::corrupt_state, "bad reserves");
                if (a >= b || name != a + "/" + b)
                    fail(errc::corrupt_state, "bad pool key");
                st.pools[{a, b}] = std::move(pool);
            }
            for (const auto& n : j.at("used_nullifiers"))
                st.used_nullifiers.insert(n.get<std::string>());
        } catch (const nlohmann::json::exception& e) {
            fail(errc::corrupt_state, std::string("snapshot field error: ") + e.what());
        }
        return st;
    }

    static std::pair<std::string, std::string> pool_key(std::string_view a, std::string_view b) {
        std::string x(a), y(b);
        return x < y ? std::make_pair(x, y) : std::make_pair(y, x);
    }

    // --- manipulation handlers ---

    /// Rule-1 semantics: sender's T balance down by A, recipient's up by A.
    static void handler_transfer(WalletState& st, const std::string& sender,
                                 const VariableValues& values) {
        const std::string& a = require_value(values, "A");
        const std::string& t = require_value(values, "T");
        const std::string& y = require_value(values, "Y");
        if (!valid_currency_code(t)) fail(errc::unknown_currency, "bad currency: " + t);
        mpz_class amount = parse_token_amount(a);
        std::string recipient = parse_address(y);

        mpz_class& from_balance = st.accounts[sender][t];
        if (from_balance < amount)
            fail(errc::insufficient_balance, "balance " + from_balance.get_str(10) +
                                                 " < transfer " + amount.get_str(10));
        from_balance -= amount;
        st.accounts[recipient][t] += amount;  // recipient auto-created
    }

    /// Rule-2 semantics: swap A of T1 for T2 through the constant-product pool.
    static void handler_swap(WalletState& st, const std::string& sender,
                             const VariableValues& values) {
        const std::string& a = require_value(values, "A");
        const std::string& t1 = require_value(values, "T1");
        const std::string& t2 = require_value(values, "T2");
        if (!valid_currency_code(t1)) fail(errc::unknown_currency, "bad currency: " + t1);
        if (!valid_currency_code(t2)) fail(errc::unknown_currency, "bad currency: " + t2);
        mpz_class amount = parse_token_amount(a);
        if (amount == 0) fail(errc::zero_amount, "swap amount must be positive");

        auto key = pool_key(t1, t2);
        auto pool_it = st.pools.find(key);
        if (t1 == t2 || pool_it == st.pools.end())
            fail(errc::no_pool, "no pool for " + t1 + "/" + t2);
        AmmPool& pool = pool_it->second;
        mpz_class& r_in = (t1 == key.first) ? pool.reserve_a : pool.reserve_b;
        mpz_class& r_out = (t1 == key.first) ? pool.reserve_b : pool.reserve_a;

        mpz_class& balance = st.accounts[sender][t1];
        if (balance < amount)
            fail(errc::insufficient_balance, "balance " + balance.get_str(10) + " < swap " +
                                                 amount.get_str(10));
        mpz_class out = get_amount_out(amount, r_in, r_out);
        if (out == 0 || out >= r_out)
            fail(errc::insufficient_liquidity, "swap output " + out.get_str(10) +
                                                   " vs reserve " + r_out.get_str(10));
        balance -= amount;
        st.accounts[sender][t2] += out;
        r_in += amount;
        r_out -= out;
    }

private:
    static const std::string& require_value(const VariableValues& values,
                                            const std::string& name) {
        auto it = values.find(name);
        if (it == values.end())
            fail(errc::missing_variable, "handler needs variable " + name);
        return it->second;
    }
};

}  // namespace emw
