#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "emailwallet/chain_store.hpp"
#include "emailwallet/errors.hpp"
#include "emailwallet/proof.hpp"

namespace emw {

struct AggregatorConfig {
    fs::path inbox_dir;
    fs::path state_path;
    std::vector<fs::path> rule_artifacts;
    std::string address = "aggregator@relay.local";  // published contact address
};

using RuleSet = std::map<std::uint64_t, RegexRule>;

inline RuleSet load_rules(const std::vector<fs::path>& artifact_files) {
    RuleSet rules;
    for (const auto& file : artifact_files) {
        RegexRule rule = import_artifact(read_file(file));
        auto id = rule.rule_id;
        if (!rules.emplace(id, std::move(rule)).second)
            fail(errc::duplicate_rule, "two artifacts define rule " + std::to_string(id));
    }
    return rules;
}

/// One email through the pipeline: parse → rule id → rule lookup → regex
/// check → prove → submit. Failures never throw; they come back as a
/// rejected receipt naming the stage.
inline Receipt process_email(std::string_view raw, const RuleSet& rules, ChainStore& chain,
                             const fs::path& proof_file) {
    auto rejected = [](std::string stage, const Error& e) {
        Receipt r;
        r.stage = std::move(stage);
        r.reason = errc_name(e.code());
        r.detail = e.what();
        return r;
    };

    EmailMessage msg;
    try {
        msg = parse_email(raw);
    } catch (const Error& e) {
        return rejected("parse", e);
    }

    std::uint64_t rule_id = 0;
    try {
        rule_id = extract_rule_id(msg);
    } catch (const Error& e) {
        return rejected("rule-lookup", e);
    }
    auto rule_it = rules.find(rule_id);
    if (rule_it == rules.end())
        return rejected("rule-lookup",
                        Error(errc::unknown_rule,
                              "rule " + std::to_string(rule_id) + " not registered"));
    const RegexRule& rule = rule_it->second;

    try {
        match_and_extract(rule, trimmed_body(msg));
    } catch (const Error& e) {
        return rejected("match", e);
    }

    EmailProof proof;
    try {
        proof = prove(raw, rule, chain.state.key_registry);
    } catch (const Error& e) {
        return rejected("prove", e);
    }

    write_file(proof_file, encode_proof(proof));
    return chain.submit_proof(proof, proof_file);
}

struct InboxSummary {
    std::size_t processed = 0;
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::vector<std::pair<std::string, Receipt>> receipts;  // filename → receipt
};

/// Processes every .eml in the inbox in lexicographic filename order (the
/// canonical transaction ordering) and writes a receipt sidecar per file.
/// Safe to re-run: replays bounce off the nullifier set.
inline InboxSummary run_inbox(const AggregatorConfig& config) {
    if (!fs::is_directory(config.inbox_dir))
        fail(errc::io_error, "inbox is not a directory: " + config.inbox_dir.string());
    for (const auto& f : config.rule_artifacts)
        if (!fs::exists(f)) fail(errc::io_error, "missing rule artifact: " + f.string());

    RuleSet rules = load_rules(config.rule_artifacts);
    ChainStore chain = ChainStore::load(config.state_path);

    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(config.inbox_dir))
        if (e.is_regular_file() && e.path().extension() == ".eml") files.push_back(e.path());
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });

    InboxSummary summary;
    for (const auto& file : files) {
        ++summary.processed;
        Receipt receipt;
        try {
            bytes raw = read_file(file);
            fs::path proof_file = file;
            proof_file += ".proof";
            receipt = process_email(raw, rules, chain, proof_file);
        } catch (const Error& e) {
            receipt.stage = "io";
            receipt.reason = errc_name(e.code());
            receipt.detail = e.what();
        }
        (receipt.accepted ? summary.accepted : summary.rejected) += 1;
        fs::path receipt_file = file;
        receipt_file += ".receipt.json";
        try {
            write_file(receipt_file, receipt.to_json().dump(2) + "\n");
        } catch (const Error&) {
            // receipt write failure must not stop the run
        }
        summary.receipts.emplace_back(file.filename().string(), receipt);
    }
    return summary;
}

}  // namespace emw
