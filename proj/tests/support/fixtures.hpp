#pragma once

// Shared deterministic fixtures for the test suites.

#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "emailwallet/emailwallet.hpp"

namespace emw::testsupport {

namespace fs = std::filesystem;

// One 2048-bit SDS keypair per process; keygen is deterministic so every
// run sees the same keys.
inline const std::pair<RsaPublicKey, RsaPrivateKey>& sds_keys() {
    static const auto keys = rsa_keygen(2048, "sds-example");
    return keys;
}

inline const std::pair<RsaPublicKey, RsaPrivateKey>& sds_keys_1024() {
    static const auto keys = rsa_keygen(1024, "sds-small");
    return keys;
}

inline KeyRegistry example_registry() {
    return KeyRegistry{{"example.com", {{"sel1", sds_keys().first}}}};
}

inline EmailMessage make_message(const std::string& from, const std::string& to,
                                 const std::string& subject, const std::string& body) {
    EmailMessage m;
    m.headers.push_back({"From", " " + from});
    m.headers.push_back({"To", " " + to});
    m.headers.push_back({"Subject", " " + subject});
    m.body = body;
    return m;
}

inline bytes signed_email(const std::string& from, const std::string& subject,
                          const std::string& body_line,
                          Canonicalization mode = {}) {
    EmailMessage m = make_message(from, "aggregator@relay.local", subject, body_line + "\r\n");
    return dkim_sign(m, sds_keys().second, "example.com", "sel1", mode).serialize();
}

inline std::vector<SegmentSpec> rule1_specs() {
    return {
        SegmentSpec::fixed("Transfer "),
        SegmentSpec::variable("A", "\\d+(\\.\\d+)?"),
        SegmentSpec::fixed(" "),
        SegmentSpec::variable("T", "[A-Z]{2,6}"),
        SegmentSpec::fixed(" to "),
        SegmentSpec::variable("Y", "[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+"),
    };
}

inline std::vector<SegmentSpec> rule2_specs() {
    return {
        SegmentSpec::fixed("Swap "),
        SegmentSpec::variable("A", "\\d+(\\.\\d+)?"),
        SegmentSpec::fixed(" "),
        SegmentSpec::variable("T1", "[A-Z]{2,6}"),
        SegmentSpec::fixed(" to "),
        SegmentSpec::variable("T2", "[A-Z]{2,6}"),
        SegmentSpec::fixed(" via Uniswap"),
    };
}

inline const RegexRule& rule1() {
    static const RegexRule r = build_rule(1, 256, rule1_specs());
    return r;
}

inline const RegexRule& rule2() {
    static const RegexRule r = build_rule(2, 256, rule2_specs());
    return r;
}

/// Rebuilds the whole-template AST from segment specs, for oracle matching.
inline RegexNode whole_ast(const std::vector<SegmentSpec>& specs) {
    RegexNode whole;
    whole.kind = RegexNode::Kind::concat;
    for (const auto& s : specs) {
        if (!s.is_variable) {
            for (unsigned char c : s.fixed_text)
                whole.children.push_back(RegexNode::make_literal(c));
        } else {
            RegexAst ast = parse_regex(s.var_pattern);
            RegexNode g;
            g.kind = RegexNode::Kind::group;
            g.children.push_back(std::move(ast.root));
            whole.children.push_back(std::move(g));
        }
    }
    return whole;
}

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = fs::temp_directory_path() /
                ("ewtest-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

struct CmdResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr
};

inline CmdResult run_cmd(const std::string& cmd) {
    CmdResult r;
    std::string full = cmd + " 2>&1";
    FILE* pipe = ::popen(full.c_str(), "r");
    if (!pipe) return r;
    char buf[4096];
    std::size_t n;
    while ((n = ::fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
    int status = ::pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

}  // namespace emw::testsupport
