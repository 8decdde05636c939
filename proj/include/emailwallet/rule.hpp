#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "emailwallet/dfa.hpp"
#include "emailwallet/errors.hpp"
#include "emailwallet/regex_ast.hpp"
#include "emailwallet/wire.hpp"

namespace emw {

/// Extracted variable values, keyed by variable name (sorted, so claim
/// serialization is canonical).
using VariableValues = std::map<std::string, std::string>;

struct Segment {
    enum class Kind : std::uint8_t { fixed = 0, variable = 1 };

    Kind kind = Kind::fixed;
    std::string text;     // fixed literal
    std::string name;     // variable name
    std::string pattern;  // variable source regex
    Dfa dfa;              // variable matcher
};

/// A manipulation-rule template: ordered fixed/variable segments plus the
/// compiled automata. Immutable once built.
struct RegexRule {
    std::uint64_t rule_id = 0;
    std::uint32_t max_len = 0;
    std::vector<Segment> segments;
    Dfa whole;  // matches the full template

    std::vector<std::string> variable_names() const {
        std::vector<std::string> names;
        for (const auto& s : segments)
            if (s.kind == Segment::Kind::variable) names.push_back(s.name);
        return names;
    }
};

// Template description before compilation.
struct SegmentSpec {
    bool is_variable = false;
    std::string fixed_text;
    std::string var_name;
    std::string var_pattern;

    static SegmentSpec fixed(std::string text) {
        SegmentSpec s;
        s.fixed_text = std::move(text);
        return s;
    }
    static SegmentSpec variable(std::string name, std::string pattern) {
        SegmentSpec s;
        s.is_variable = true;
        s.var_name = std::move(name);
        s.var_pattern = std::move(pattern);
        return s;
    }
};

namespace rule_detail {

inline RegexNode literal_concat(std::string_view text) {
    RegexNode n;
    n.kind = RegexNode::Kind::concat;
    for (unsigned char c : text) n.children.push_back(RegexNode::make_literal(c));
    return n;
}

}  // namespace rule_detail

/// Compiles a template into a rule: per-variable DFAs plus the
/// whole-template DFA. Adjacent variables with overlapping alphabets are
/// rejected here so greedy extraction stays unambiguous.
inline RegexRule build_rule(std::uint64_t rule_id, std::uint32_t max_len,
                            const std::vector<SegmentSpec>& specs,
                            std::size_t state_budget = kDefaultStateBudget) {
    if (max_len == 0) fail(errc::bad_rule, "max_len must be positive");
    if (specs.empty()) fail(errc::bad_rule, "rule needs at least one segment");

    RegexRule rule;
    rule.rule_id = rule_id;
    rule.max_len = max_len;

    RegexNode whole;
    whole.kind = RegexNode::Kind::concat;

    std::vector<std::string> seen_names;
    for (const auto& spec : specs) {
        Segment seg;
        if (!spec.is_variable) {
            if (spec.fixed_text.empty()) fail(errc::bad_rule, "empty fixed segment");
            seg.kind = Segment::Kind::fixed;
            seg.text = spec.fixed_text;
            whole.children.push_back(rule_detail::literal_concat(spec.fixed_text));
        } else {
            if (spec.var_name.empty()) fail(errc::bad_rule, "variable segment without a name");
            for (const auto& n : seen_names)
                if (n == spec.var_name)
                    fail(errc::bad_rule, "duplicate variable name: " + spec.var_name);
            seen_names.push_back(spec.var_name);
            seg.kind = Segment::Kind::variable;
            seg.name = spec.var_name;
            seg.pattern = spec.var_pattern;
            RegexAst ast = parse_regex(spec.var_pattern);
            seg.dfa = compile(ast, state_budget);
            RegexNode g;
            g.kind = RegexNode::Kind::group;
            g.children.push_back(std::move(ast.root));
            whole.children.push_back(std::move(g));
        }
        rule.segments.push_back(std::move(seg));
    }

    for (std::size_t i = 0; i + 1 < rule.segments.size(); ++i) {
        const auto& a = rule.segments[i];
        const auto& b = rule.segments[i + 1];
        if (a.kind == Segment::Kind::variable && b.kind == Segment::Kind::variable) {
            ByteSet overlap = dfa_alphabet(a.dfa);
            overlap.bits &= dfa_alphabet(b.dfa).bits;
            if (!overlap.empty())
                fail(errc::adjacent_variables,
                     "adjacent variables " + a.name + " and " + b.name +
                         " have overlapping alphabets");
        }
    }

    RegexAst whole_ast;
    whole_ast.root = std::move(whole);
    rule.whole = compile(whole_ast, state_budget);
    return rule;
}

/// Greedy left-to-right extraction: fixed literals must appear verbatim,
/// each variable takes the longest prefix its DFA accepts that still lets
/// the remaining segments match; the whole text must be consumed.
inline VariableValues match_and_extract(const RegexRule& rule, std::string_view text) {
    if (text.size() > rule.max_len)
        fail(errc::input_too_long, "text length " + std::to_string(text.size()) +
                                       " exceeds rule max_len " +
                                       std::to_string(rule.max_len));

    VariableValues values;
    std::size_t worst_segment = 0;
    std::size_t worst_pos = 0;
    auto note_failure = [&](std::size_t seg, std::size_t pos) {
        if (seg > worst_segment || (seg == worst_segment && pos > worst_pos)) {
            worst_segment = seg;
            worst_pos = pos;
        }
    };

    auto match_from = [&](auto&& self, std::size_t seg, std::size_t pos) -> bool {
        if (seg == rule.segments.size()) {
            if (pos == text.size()) return true;
            note_failure(seg == 0 ? 0 : seg - 1, pos);  // leftover input
            return false;
        }
        const Segment& s = rule.segments[seg];
        if (s.kind == Segment::Kind::fixed) {
            if (text.compare(pos, s.text.size(), s.text) == 0)
                return self(self, seg + 1, pos + s.text.size());
            note_failure(seg, pos);
            return false;
        }
        // variable: one forward DFA walk records every accepting prefix end
        std::vector<std::size_t> ends;
        std::uint32_t st = s.dfa.start;
        if (s.dfa.is_accepting(st)) ends.push_back(pos);
        for (std::size_t i = pos; i < text.size(); ++i) {
            st = s.dfa.trans[st][static_cast<unsigned char>(text[i])];
            if (st == 0) break;
            if (s.dfa.is_accepting(st)) ends.push_back(i + 1);
        }
        if (ends.empty()) {
            note_failure(seg, pos);
            return false;
        }
        for (auto it = ends.rbegin(); it != ends.rend(); ++it) {
            values[s.name] = std::string(text.substr(pos, *it - pos));
            if (self(self, seg + 1, *it)) return true;
            values.erase(s.name);
        }
        return false;
    };

    if (!match_from(match_from, 0, 0))
        fail(errc::no_match, "no match; first failing segment " +
                                 std::to_string(worst_segment) + " at byte " +
                                 std::to_string(worst_pos));
    return values;
}

/// Rebuilds the text from fixed literals plus the supplied values in segment
/// order. True iff each value passes its variable DFA and the whole-template
/// DFA accepts the reconstruction (within max_len).
inline bool reconstruct_and_verify(const RegexRule& rule, const VariableValues& values,
                                   std::string* reconstruction_out = nullptr) {
    for (const auto& seg : rule.segments) {
        if (seg.kind == Segment::Kind::variable && values.find(seg.name) == values.end())
            fail(errc::missing_variable, "missing value for variable " + seg.name);
    }
    auto names = rule.variable_names();
    if (values.size() != names.size()) return false;  // extra names are not bound by any DFA

    std::string text;
    for (const auto& seg : rule.segments) {
        if (seg.kind == Segment::Kind::fixed) {
            text += seg.text;
        } else {
            const std::string& v = values.at(seg.name);
            if (v.size() > rule.max_len || !seg.dfa.accepts(v)) return false;
            text += v;
        }
    }
    if (reconstruction_out) *reconstruction_out = text;
    if (text.size() > rule.max_len) return false;
    return rule.whole.accepts(text);
}

// --- verifier artifact: magic "VRM1", little-endian, length-prefixed ---

namespace rule_detail {

inline constexpr char kArtifactMagic[4] = {'V', 'R', 'M', '1'};
inline constexpr std::uint32_t kArtifactVersion = 1;

inline void write_dfa(ByteWriter& w, const Dfa& dfa) {
    w.u32(static_cast<std::uint32_t>(dfa.state_count()));
    w.u32(dfa.start);
    std::uint32_t n_accepting = 0;
    for (auto a : dfa.accepting) n_accepting += (a != 0);
    w.u32(n_accepting);
    for (std::uint32_t s = 0; s < dfa.state_count(); ++s)
        if (dfa.accepting[s]) w.u32(s);
    for (std::uint32_t s = 0; s < dfa.state_count(); ++s)
        for (unsigned b = 0; b < 256; ++b) w.u16(dfa.trans[s][b]);
}

inline Dfa read_dfa(ByteReader& r) {
    Dfa dfa;
    std::uint32_t n = r.u32();
    if (n == 0 || n > 0xFFFF) fail(errc::corrupt_artifact, "bad state count");
    dfa.start = r.u32();
    if (dfa.start >= n) fail(errc::corrupt_artifact, "start state out of range");
    std::uint32_t n_accepting = r.u32();
    if (n_accepting > n) fail(errc::corrupt_artifact, "bad accepting count");
    dfa.accepting.assign(n, 0);
    std::uint32_t prev = 0;
    for (std::uint32_t i = 0; i < n_accepting; ++i) {
        std::uint32_t s = r.u32();
        if (s >= n || (i > 0 && s <= prev))
            fail(errc::corrupt_artifact, "accepting set not strictly ascending");
        dfa.accepting[s] = 1;
        prev = s;
    }
    dfa.trans.resize(n);
    for (std::uint32_t s = 0; s < n; ++s) {
        for (unsigned b = 0; b < 256; ++b) {
            std::uint16_t t = r.u16();
            if (t >= n) fail(errc::corrupt_artifact, "transition target out of range");
            dfa.trans[s][b] = t;
        }
    }
    // state 0 must be the dead state
    if (dfa.accepting[0]) fail(errc::corrupt_artifact, "state 0 must be non-accepting");
    for (unsigned b = 0; b < 256; ++b)
        if (dfa.trans[0][b] != 0) fail(errc::corrupt_artifact, "state 0 must be a sink");
    return dfa;
}

}  // namespace rule_detail

/// Deterministic binary serialization; bit-exact across platforms.
inline bytes export_artifact(const RegexRule& rule) {
    ByteWriter w;
    w.raw(std::string_view(rule_detail::kArtifactMagic, 4));
    w.u32(rule_detail::kArtifactVersion);
    w.u64(rule.rule_id);
    w.u32(rule.max_len);
    w.u32(static_cast<std::uint32_t>(rule.segments.size()));
    for (const auto& seg : rule.segments) {
        w.u8(static_cast<std::uint8_t>(seg.kind));
        if (seg.kind == Segment::Kind::fixed) {
            w.blob32(seg.text);
        } else {
            w.blob32(seg.name);
            w.blob32(seg.pattern);
            rule_detail::write_dfa(w, seg.dfa);
        }
    }
    rule_detail::write_dfa(w, rule.whole);
    return w.take();
}

inline RegexRule import_artifact(std::string_view blob) {
    ByteReader r(blob, errc::corrupt_artifact);
    if (r.raw(4) != std::string_view(rule_detail::kArtifactMagic, 4))
        fail(errc::corrupt_artifact, "bad magic");
    std::uint32_t version = r.u32();
    if (version != rule_detail::kArtifactVersion)
        fail(errc::version_mismatch, "unsupported artifact version " + std::to_string(version));

    RegexRule rule;
    rule.rule_id = r.u64();
    rule.max_len = r.u32();
    if (rule.max_len == 0) fail(errc::corrupt_artifact, "max_len must be positive");
    std::uint32_t n_segments = r.u32();
    if (n_segments == 0) fail(errc::corrupt_artifact, "rule needs segments");

    std::vector<std::string> seen_names;
    for (std::uint32_t i = 0; i < n_segments; ++i) {
        Segment seg;
        std::uint8_t kind = r.u8();
        if (kind == 0) {
            seg.kind = Segment::Kind::fixed;
            seg.text = std::string(r.blob32());
            if (seg.text.empty()) fail(errc::corrupt_artifact, "empty fixed segment");
        } else if (kind == 1) {
            seg.kind = Segment::Kind::variable;
            seg.name = std::string(r.blob32());
            seg.pattern = std::string(r.blob32());
            if (seg.name.empty()) fail(errc::corrupt_artifact, "unnamed variable segment");
            for (const auto& n : seen_names)
                if (n == seg.name) fail(errc::corrupt_artifact, "duplicate variable name");
            seen_names.push_back(seg.name);
            seg.dfa = rule_detail::read_dfa(r);
        } else {
            fail(errc::corrupt_artifact, "unknown segment kind");
        }
        rule.segments.push_back(std::move(seg));
    }
    rule.whole = rule_detail::read_dfa(r);
    r.expect_done();

    for (std::size_t i = 0; i + 1 < rule.segments.size(); ++i) {
        const auto& a = rule.segments[i];
        const auto& b = rule.segments[i + 1];
        if (a.kind == Segment::Kind::variable && b.kind == Segment::Kind::variable) {
            ByteSet overlap = dfa_alphabet(a.dfa);
            overlap.bits &= dfa_alphabet(b.dfa).bits;
            if (!overlap.empty())
                fail(errc::corrupt_artifact,
                     "adjacent variables with overlapping alphabets");
        }
    }
    return rule;
}

// --- rule template files (JSON) ---

/// Template format:
///   {"rule_id": 1, "max_len": 256,
///    "segments": [{"fixed": "Transfer "}, {"var": "A", "regex": "\\d+"}]}
inline RegexRule rule_from_template_json(std::string_view text,
                                         std::size_t state_budget = kDefaultStateBudget) {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        fail(errc::bad_rule, "template is not a JSON object");
    if (!j.contains("rule_id") || !j["rule_id"].is_number_unsigned())
        fail(errc::bad_rule, "template needs an unsigned rule_id");
    if (!j.contains("max_len") || !j["max_len"].is_number_unsigned())
        fail(errc::bad_rule, "template needs an unsigned max_len");
    if (!j.contains("segments") || !j["segments"].is_array())
        fail(errc::bad_rule, "template needs a segments array");

    std::vector<SegmentSpec> specs;
    for (const auto& s : j["segments"]) {
        if (!s.is_object()) fail(errc::bad_rule, "segment is not an object");
        if (s.contains("fixed")) {
            if (!s["fixed"].is_string()) fail(errc::bad_rule, "fixed segment must be a string");
            specs.push_back(SegmentSpec::fixed(s["fixed"].get<std::string>()));
        } else if (s.contains("var")) {
            if (!s["var"].is_string() || !s.contains("regex") || !s["regex"].is_string())
                fail(errc::bad_rule, "variable segment needs var and regex strings");
            specs.push_back(
                SegmentSpec::variable(s["var"].get<std::string>(), s["regex"].get<std::string>()));
        } else {
            fail(errc::bad_rule, "segment needs fixed or var");
        }
    }
    std::uint64_t max_len = j["max_len"].get<std::uint64_t>();
    if (max_len == 0 || max_len > kDefaultMaxInput)
        fail(errc::bad_rule, "max_len out of range");
    return build_rule(j["rule_id"].get<std::uint64_t>(), static_cast<std::uint32_t>(max_len),
                      specs, state_budget);
}

}  // namespace emw
