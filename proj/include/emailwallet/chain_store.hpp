#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "emailwallet/chain.hpp"
#include "emailwallet/errors.hpp"

namespace emw {

namespace fs = std::filesystem;

inline bytes read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(errc::io_error, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const fs::path& path, std::string_view data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(errc::io_error, "cannot write " + path.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) fail(errc::io_error, "short write to " + path.string());
}

/// State snapshot plus append-only operation log. Every mutation is logged;
/// replaying the log from genesis reproduces the snapshot byte for byte.
class ChainStore {
public:
    WalletState state;

    static fs::path log_path_for(const fs::path& state_path) {
        fs::path p = state_path;
        p += ".log";
        return p;
    }

    static ChainStore init(const fs::path& state_path) {
        if (fs::exists(state_path))
            fail(errc::io_error, "state file already exists: " + state_path.string());
        ChainStore store;
        store.state_path_ = state_path;
        write_file(log_path_for(state_path), "");
        store.save();
        return store;
    }

    static ChainStore load(const fs::path& state_path) {
        ChainStore store;
        store.state_path_ = state_path;
        store.state = WalletState::from_snapshot(read_file(state_path));
        if (!fs::exists(log_path_for(state_path)))
            fail(errc::io_error, "missing log file for " + state_path.string());
        return store;
    }

    const fs::path& state_path() const { return state_path_; }

    void save() const { write_file(state_path_, state.snapshot_bytes()); }

    // --- logged mutations ---

    void register_key(std::string_view domain, std::string_view selector,
                      const RsaPublicKey& key) {
        state.register_sds_key(domain, selector, key);
        append_log({{"op", "register_key"},
                    {"domain", to_lower_ascii(domain)},
                    {"selector", std::string(selector)},
                    {"pubkey", {{"e", key.e.get_str(10)}, {"n", key.n.get_str(10)}}}});
        save();
    }

    void register_rule(const fs::path& artifact_file, HandlerId handler) {
        bytes blob = read_file(artifact_file);
        state.register_rule(blob, handler);
        append_log({{"op", "register_rule"},
                    {"artifact_file", portable_ref(artifact_file)},
                    {"artifact_sha256", hex_encode(sha256(blob))},
                    {"handler", handler_name(handler)}});
        save();
    }

    void init_pool(std::string_view cur_a, std::string_view cur_b, const mpz_class& reserve_a,
                   const mpz_class& reserve_b) {
        state.init_pool(cur_a, cur_b, reserve_a, reserve_b);
        append_log({{"op", "init_pool"},
                    {"currency_a", std::string(cur_a)},
                    {"currency_b", std::string(cur_b)},
                    {"reserve_a", reserve_a.get_str(10)},
                    {"reserve_b", reserve_b.get_str(10)}});
        save();
    }

    void deposit(std::string_view email, const Amount& amount) {
        state.deposit(email, amount);
        append_log({{"op", "deposit"},
                    {"email", to_lower_ascii(email)},
                    {"currency", amount.currency},
                    {"amount", amount.value.get_str(10)}});
        save();
    }

    /// Submits a proof already persisted at `proof_file`. Both accepted and
    /// rejected submissions are logged (rejections replay as no-ops).
    Receipt submit_proof(const EmailProof& proof, const fs::path& proof_file) {
        Receipt receipt = state.submit(proof);
        append_log({{"op", "submit"},
                    {"proof_file", portable_ref(proof_file)},
                    {"proof_sha256", hex_encode(sha256(encode_proof(proof)))},
                    {"receipt", receipt.to_json()}});
        save();
        return receipt;
    }

    bytes log_bytes() const { return read_file(log_path_for(state_path_)); }

    /// Re-executes the log from genesis. Proof and artifact references are
    /// resolved relative to the log's directory unless absolute.
    static WalletState replay(const fs::path& state_path) {
        fs::path log_file = log_path_for(state_path);
        fs::path base = state_path.parent_path();
        std::istringstream in{read_file(log_file)};
        WalletState st;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            nlohmann::json entry = nlohmann::json::parse(line, nullptr, false);
            if (entry.is_discarded())
                fail(errc::corrupt_state, "log line " + std::to_string(line_no) + " is not JSON");
            try {
                replay_entry(st, entry, base);
            } catch (const Error&) {
                throw;
            } catch (const std::exception& e) {
                fail(errc::corrupt_state,
                     "log line " + std::to_string(line_no) + ": " + e.what());
            }
        }
        return st;
    }

private:
    static void replay_entry(WalletState& st, const nlohmann::json& entry, const fs::path& base) {
        std::string op = entry.at("op").get<std::string>();
        if (op == "register_key") {
            RsaPublicKey key;
            key.n.set_str(entry.at("pubkey").at("n").get<std::string>(), 10);
            key.e.set_str(entry.at("pubkey").at("e").get<std::string>(), 10);
            st.register_sds_key(entry.at("domain").get<std::string>(),
                                entry.at("selector").get<std::string>(), key);
        } else if (op == "register_rule") {
            fs::path file = resolve(base, entry.at("artifact_file").get<std::string>());
            bytes blob = read_file(file);
            if (hex_encode(sha256(blob)) != entry.at("artifact_sha256").get<std::string>())
                fail(errc::corrupt_state, "artifact digest mismatch: " + file.string());
            st.register_rule(blob, handler_from_name(entry.at("handler").get<std::string>()));
        } else if (op == "init_pool") {
            mpz_class ra(entry.at("reserve_a").get<std::string>());
            mpz_class rb(entry.at("reserve_b").get<std::string>());
            st.init_pool(entry.at("currency_a").get<std::string>(),
                         entry.at("currency_b").get<std::string>(), ra, rb);
        } else if (op == "deposit") {
            Amount amount;
            amount.currency = entry.at("currency").get<std::string>();
            amount.value.set_str(entry.at("amount").get<std::string>(), 10);
            st.deposit(entry.at("email").get<std::string>(), amount);
        } else if (op == "submit") {
            fs::path file = resolve(base, entry.at("proof_file").get<std::string>());
            bytes blob = read_file(file);
            if (hex_encode(sha256(blob)) != entry.at("proof_sha256").get<std::string>())
                fail(errc::corrupt_state, "proof digest mismatch: " + file.string());
            st.submit(decode_proof(blob));  // rejected submissions stay no-ops
        } else {
            fail(errc::corrupt_state, "unknown log op: " + op);
        }
    }

    static fs::path resolve(const fs::path& base, const fs::path& ref) {
        return ref.is_absolute() ? ref : base / ref;
    }

    // store paths relative to the state directory when possible, so a
    // scenario directory can be moved wholesale
    std::string portable_ref(const fs::path& file) const {
        try {
            fs::path base = fs::absolute(state_path_).parent_path();
            std::error_code ec;
            fs::path rel = fs::relative(fs::absolute(file), base, ec);
            if (ec || rel.empty()) return file.string();
            return rel.string();
        } catch (const fs::filesystem_error&) {
            return file.string();
        }
    }

    void append_log(const nlohmann::json& entry) const {
        std::ofstream out(log_path_for(state_path_), std::ios::binary | std::ios::app);
        if (!out) fail(errc::io_error, "cannot append to log");
        out << entry.dump() << "\n";
        if (!out) fail(errc::io_error, "short write to log");
    }

    fs::path state_path_;
};

}  // namespace emw
