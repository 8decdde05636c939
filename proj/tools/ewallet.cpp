// ewallet: command-line frontend for the email-wallet simulator.
//
// Exit codes: 0 success, 1 internal/IO, 2 usage or validation,
// 3 verification failure, 4 replay (nullifier reuse).

#include <fcntl.h>
#include <unistd.h>

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "emailwallet/emailwallet.hpp"

namespace {

using namespace emw;

int exit_code_for(errc c) {
    switch (c) {
        case errc::nullifier_reused:
            return 4;
        case errc::no_signature:
        case errc::multiple_signatures:
        case errc::unknown_domain_key:
        case errc::body_hash_mismatch:
        case errc::signature_invalid:
        case errc::domain_mismatch:
        case errc::no_match:
        case errc::input_too_long:
        case errc::missing_variable:
        case errc::proof_invalid:
        case errc::unknown_rule:
        case errc::insufficient_balance:
        case errc::insufficient_liquidity:
        case errc::no_pool:
            return 3;
        case errc::io_error:
            return 1;
        default:
            return 2;  // malformed input, bad flags, precondition violations
    }
}

/// Exclusive lock file guarding the single-writer contract on a state file.
class StateLock {
public:
    explicit StateLock(const fs::path& state_path) : lock_path_(state_path) {
        lock_path_ += ".lock";
        int fd = ::open(lock_path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0)
            fail(errc::io_error, "state file is locked (remove " + lock_path_.string() +
                                     " if stale)");
        ::close(fd);
        held_ = true;
    }
    ~StateLock() {
        if (held_) {
            std::error_code ec;
            fs::remove(lock_path_, ec);
        }
    }
    StateLock(const StateLock&) = delete;
    StateLock& operator=(const StateLock&) = delete;

private:
    fs::path lock_path_;
    bool held_ = false;
};

struct KeygenArgs {
    std::string domain, selector, seed, out_prefix;
    unsigned bits = 2048;
};

int cmd_keygen(const KeygenArgs& a) {
    std::string prefix = a.out_prefix.empty() ? a.selector + "." + a.domain : a.out_prefix;
    auto [pub, priv] = rsa_keygen(a.bits, a.seed);
    write_private_key(prefix + ".priv", priv);
    write_public_key(prefix + ".pub", pub);
    std::cout << "wrote " << prefix << ".priv and " << prefix << ".pub\n";
    return 0;
}

struct SignArgs {
    std::string in, key, domain, selector, canon = "relaxed/relaxed", out;
};

int cmd_sds_sign(const SignArgs& a) {
    EmailMessage msg = parse_email(read_file(a.in));
    Canonicalization mode = Canonicalization::parse(a.canon);
    EmailMessage signed_msg = dkim_sign(msg, read_private_key(a.key), a.domain, a.selector, mode);
    write_file(a.out, signed_msg.serialize());
    std::cout << "signed " << a.in << " -> " << a.out << "\n";
    return 0;
}

int cmd_rule_compile(const std::string& template_file, const std::string& out_file) {
    RegexRule rule = rule_from_template_json(read_file(template_file));
    bytes blob = export_artifact(rule);
    write_file(out_file, blob);
    std::cout << "rule " << rule.rule_id << ": " << rule.segments.size() << " segments, "
              << rule.whole.state_count() << " template states, " << blob.size() << " bytes -> "
              << out_file << "\n";
    return 0;
}

int print_receipt_and_exit_code(const Receipt& receipt) {
    std::cout << receipt.to_json().dump(2) << "\n";
    if (receipt.accepted) return 0;
    if (receipt.reason == errc_name(errc::nullifier_reused)) return 4;
    return 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"email wallet simulator"};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("--verbose", verbose, "detail on stderr");

    // keygen
    KeygenArgs kg;
    auto* keygen = app.add_subcommand("keygen", "generate a deterministic SDS keypair");
    keygen->add_option("--domain", kg.domain, "signing domain")->required();
    keygen->add_option("--selector", kg.selector, "DKIM selector")->required();
    keygen->add_option("--seed", kg.seed, "seed string (same seed, same keys)")->required();
    keygen->add_option("--out", kg.out_prefix, "output prefix (default <selector>.<domain>)");
    keygen->add_option("--bits", kg.bits, "modulus bits (1024 or 2048)");

    // sds-sign
    SignArgs sg;
    auto* sds_sign = app.add_subcommand("sds-sign", "attach a DKIM signature (SDS simulator)");
    sds_sign->add_option("--in", sg.in, "input .eml")->required()->check(CLI::ExistingFile);
    sds_sign->add_option("--key", sg.key, "private key file")->required()->check(CLI::ExistingFile);
    sds_sign->add_option("--domain", sg.domain, "d= domain")->required();
    sds_sign->add_option("--selector", sg.selector, "s= selector")->required();
    sds_sign->add_option("--canon", sg.canon, "canonicalization (default relaxed/relaxed)");
    sds_sign->add_option("--out", sg.out, "output .eml")->required();

    // rule-compile
    std::string template_file, artifact_out;
    auto* rule_compile = app.add_subcommand("rule-compile", "compile a rule template to a verifier artifact");
    rule_compile->add_option("--template", template_file, "rule template JSON")
        ->required()
        ->check(CLI::ExistingFile);
    rule_compile->add_option("--out", artifact_out, "artifact output path")->required();

    // chain group
    auto* chain = app.add_subcommand("chain", "wallet contract state");
    chain->require_subcommand(1);
    std::string state_file;

    auto* chain_init = chain->add_subcommand("init", "create a fresh state file");
    chain_init->add_option("--state", state_file, "state file path")->required();

    std::string domain, selector, pubkey_file;
    auto* reg_key = chain->add_subcommand("register-key", "register an SDS public key");
    reg_key->add_option("--state", state_file, "")->required()->check(CLI::ExistingFile);
    reg_key->add_option("--domain", domain, "")->required();
    reg_key->add_option("--selector", selector, "")->required();
    reg_key->add_option("--pubkey", pubkey_file, "public key file")->required()->check(CLI::ExistingFile);

    std::string artifact_file, handler_str;
    auto* reg_rule = chain->add_subcommand("register-rule", "register a compiled rule");
    reg_rule->add_option("--state", state_file, "")->required()->check(CLI::ExistingFile);
    reg_rule->add_option("--artifact", artifact_file, "")->required()->check(CLI::ExistingFile);
    reg_rule->add_option("--handler", handler_str, "transfer|swap")->required();

    std::string cur_a, cur_b, reserve_a, reserve_b;
    auto* init_pool = chain->add_subcommand("init-pool", "create an AMM pool");
    init_pool->add_option("--state", state_file, "")->required()->check(CLI::ExistingFile);
    init_pool->add_option("--currency-a", cur_a, "")->required();
    init_pool->add_option("--currency-b", cur_b, "")->required();
    init_pool->add_option("--reserve-a", reserve_a, "token amount, e.g. 1")->required();
    init_pool->add_option("--reserve-b", reserve_b, "token amount, e.g. 2000")->required();

    std::string email, currency, amount_str;
    auto* deposit = chain->add_subcommand("deposit", "credit a user balance");
    deposit->add_option("--state", state_file, "")->required()->check(CLI::ExistingFile);
    deposit->add_option("--email", email, "")->required();
    deposit->add_option("--currency", currency, "")->required();
    deposit->add_option("--amount", amount_str, "token amount, e.g. 0.01")->required();

    auto* balance = chain->add_subcommand("balance", "print a balance (18 decimals)");
    balance->add_option("--state", state_file, "")->required()->check(CLI::ExistingFile);
    balance->add_option("--email", email, "")->required();
    balance->add_option("--currency", currency, "")->required();

    std::string proof_file;
    auto* submit = chain->add_subcommand("submit", "submit a proof file as a transaction");
    submit->add_option("--state", state_file, "")->required()->check(CLI::ExistingFile);
    submit->add_option("--proof", proof_file, "")->required()->check(CLI::ExistingFile);

    auto* log_cmd = chain->add_subcommand("log", "print the transaction log");
    log_cmd->add_option("--state", state_file, "")->required()->check(CLI::ExistingFile);

    // aggregate
    AggregatorConfig agg;
    std::vector<std::string> rule_files;
    std::string inbox_dir;
    auto* aggregate = app.add_subcommand("aggregate", "process an inbox of signed emails");
    aggregate->add_option("--state", state_file, "")->required()->check(CLI::ExistingFile);
    aggregate->add_option("--inbox", inbox_dir, "directory of .eml files")
        ->required()
        ->check(CLI::ExistingDirectory);
    aggregate->add_option("--rule", rule_files, "rule artifact (repeatable)")
        ->required()
        ->check(CLI::ExistingFile);
    aggregate->add_option("--address", agg.address, "published aggregator address");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (keygen->parsed()) return cmd_keygen(kg);
        if (sds_sign->parsed()) return cmd_sds_sign(sg);
        if (rule_compile->parsed()) return cmd_rule_compile(template_file, artifact_out);

        if (chain_init->parsed()) {
            StateLock lock(state_file);
            ChainStore::init(state_file);
            std::cout << "initialized " << state_file << "\n";
            return 0;
        }
        if (reg_key->parsed()) {
            StateLock lock(state_file);
            auto store = ChainStore::load(state_file);
            store.register_key(domain, selector, read_public_key(pubkey_file));
            std::cout << "registered key for " << to_lower_ascii(domain) << "/" << selector << "\n";
            return 0;
        }
        if (reg_rule->parsed()) {
            StateLock lock(state_file);
            auto store = ChainStore::load(state_file);
            store.register_rule(artifact_file, handler_from_name(handler_str));
            std::cout << "registered rule from " << artifact_file << " (" << handler_str << ")\n";
            return 0;
        }
        if (init_pool->parsed()) {
            StateLock lock(state_file);
            auto store = ChainStore::load(state_file);
            store.init_pool(cur_a, cur_b, parse_token_amount(reserve_a),
                            parse_token_amount(reserve_b));
            std::cout << "pool " << cur_a << "/" << cur_b << " initialized\n";
            return 0;
        }
        if (deposit->parsed()) {
            StateLock lock(state_file);
            auto store = ChainStore::load(state_file);
            store.deposit(email, Amount{currency, parse_token_amount(amount_str)});
            std::cout << "deposited " << amount_str << " " << currency << " to " << email << "\n";
            return 0;
        }
        if (balance->parsed()) {
            auto store = ChainStore::load(state_file);
            std::cout << format_token_amount(store.state.query_balance(email, currency)) << "\n";
            return 0;
        }
        if (submit->parsed()) {
            StateLock lock(state_file);
            auto store = ChainStore::load(state_file);
            Receipt receipt = store.submit_proof(decode_proof(read_file(proof_file)), proof_file);
            return print_receipt_and_exit_code(receipt);
        }
        if (log_cmd->parsed()) {
            auto store = ChainStore::load(state_file);
            std::cout << store.log_bytes();
            return 0;
        }
        if (aggregate->parsed()) {
            StateLock lock(state_file);
            agg.state_path = state_file;
            agg.inbox_dir = inbox_dir;
            for (const auto& f : rule_files) agg.rule_artifacts.emplace_back(f);
            InboxSummary summary = run_inbox(agg);
            for (const auto& [name, receipt] : summary.receipts) {
                std::cout << name << ": "
                          << (receipt.accepted
                                  ? std::string("accepted")
                                  : "rejected(" + receipt.stage + ", " + receipt.reason + ")")
                          << "\n";
                if (verbose && !receipt.detail.empty())
                    std::cerr << "  " << name << ": " << receipt.detail << "\n";
            }
            std::cout << summary.accepted << " accepted, " << summary.rejected << " rejected\n";
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
