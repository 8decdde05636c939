#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <queue>
#include <string_view>
#include <vector>

#include "emailwallet/errors.hpp"
#include "emailwallet/regex_ast.hpp"

namespace emw {

inline constexpr std::size_t kDefaultStateBudget = 10'000;
inline constexpr std::size_t kDefaultMaxInput = 4096;

/// Deterministic finite automaton with a total transition function over all
/// 256 byte values. State 0 is always the dead state (non-accepting, all
/// transitions to itself); the accepting set is empty iff the language is.
struct Dfa {
    std::uint32_t start = 0;
    std::vector<std::array<std::uint16_t, 256>> trans;
    std::vector<std::uint8_t> accepting;

    std::size_t state_count() const { return trans.size(); }

    bool is_accepting(std::uint32_t s) const { return accepting[s] != 0; }

    bool accepts(std::string_view input) const {
        std::uint32_t s = start;
        for (unsigned char c : input) s = trans[s][c];
        return accepting[s] != 0;
    }
};

struct RunResult {
    bool accepted = false;
    std::uint32_t final_state = 0;
    std::vector<std::uint32_t> trace;  // states visited, including the start
};

inline RunResult dfa_run(const Dfa& dfa, std::string_view input,
                         std::size_t max_len = kDefaultMaxInput) {
    if (input.size() > max_len)
        fail(errc::input_too_long, "input length " + std::to_string(input.size()) +
                                       " exceeds limit " + std::to_string(max_len));
    RunResult r;
    r.trace.reserve(input.size() + 1);
    std::uint32_t s = dfa.start;
    r.trace.push_back(s);
    for (unsigned char c : input) {
        s = dfa.trans[s][c];
        r.trace.push_back(s);
    }
    r.final_state = s;
    r.accepted = dfa.accepting[s] != 0;
    return r;
}

/// Bytes consumed on some transition between live states.
inline ByteSet dfa_alphabet(const Dfa& dfa) {
    ByteSet s;
    for (std::size_t st = 1; st < dfa.trans.size(); ++st)
        for (unsigned b = 0; b < 256; ++b)
            if (dfa.trans[st][b] != 0) s.add(static_cast<unsigned char>(b));
    return s;
}

namespace dfa_detail {

inline constexpr std::size_t kNfaStateCap = 100'000;

struct NfaFragment {
    std::uint32_t start;
    std::uint32_t accept;
};

class NfaBuilder {
public:
    struct State {
        std::vector<std::pair<ByteSet, std::uint32_t>> edges;
        std::vector<std::uint32_t> eps;
    };

    std::vector<State> states;

    std::uint32_t add_state() {
        if (states.size() >= kNfaStateCap)
            fail(errc::state_blowup, "NFA exceeds state cap");
        states.emplace_back();
        return static_cast<std::uint32_t>(states.size() - 1);
    }

    NfaFragment empty_fragment() {
        auto s = add_state(), a = add_state();
        states[s].eps.push_back(a);
        return {s, a};
    }

    NfaFragment chain(NfaFragment a, NfaFragment b) {
        states[a.accept].eps.push_back(b.start);
        return {a.start, b.accept};
    }

    NfaFragment build(const RegexNode& node) {
        using Kind = RegexNode::Kind;
        switch (node.kind) {
            case Kind::literal: {
                auto s = add_state(), a = add_state();
                ByteSet set;
                set.add(node.literal);
                states[s].edges.emplace_back(set, a);
                return {s, a};
            }
            case Kind::char_class: {
                auto s = add_state(), a = add_state();
                if (!node.cls.empty()) states[s].edges.emplace_back(node.cls, a);
                return {s, a};
            }
            case Kind::group:
                return build(node.children.front());
            case Kind::concat: {
                if (node.children.empty()) return empty_fragment();
                NfaFragment f = build(node.children.front());
                for (std::size_t i = 1; i < node.children.size(); ++i)
                    f = chain(f, build(node.children[i]));
                return f;
            }
            case Kind::alternation: {
                auto s = add_state(), a = add_state();
                for (const auto& child : node.children) {
                    NfaFragment f = build(child);
                    states[s].eps.push_back(f.start);
                    states[f.accept].eps.push_back(a);
                }
                return {s, a};
            }
            case Kind::repeat: {
                NfaFragment f = empty_fragment();
                for (std::uint32_t i = 0; i < node.min; ++i)
                    f = chain(f, build(node.children.front()));
                if (node.unbounded) {
                    NfaFragment inner = build(node.children.front());
                    auto s = add_state(), a = add_state();
                    states[s].eps.push_back(inner.start);
                    states[s].eps.push_back(a);
                    states[inner.accept].eps.push_back(inner.start);
                    states[inner.accept].eps.push_back(a);
                    f = chain(f, {s, a});
                } else {
                    for (std::uint32_t i = node.min; i < node.max; ++i) {
                        NfaFragment inner = build(node.children.front());
                        auto s = add_state(), a = add_state();
                        states[s].eps.push_back(inner.start);
                        states[s].eps.push_back(a);
                        states[inner.accept].eps.push_back(a);
                        f = chain(f, {s, a});
                    }
                }
                return f;
            }
        }
        fail(errc::parse_error, "invalid AST node");
    }
};

inline void eps_close(const NfaBuilder& nfa, std::vector<std::uint32_t>& set,
                      std::vector<std::uint8_t>& mark) {
    std::vector<std::uint32_t> stack(set);
    for (auto s : set) mark[s] = 1;
    while (!stack.empty()) {
        auto s = stack.back();
        stack.pop_back();
        for (auto t : nfa.states[s].eps) {
            if (!mark[t]) {
                mark[t] = 1;
                set.push_back(t);
                stack.push_back(t);
            }
        }
    }
    std::sort(set.begin(), set.end());
    for (auto s : set) mark[s] = 0;
}

inline Dfa subset_construct(const NfaBuilder& nfa, std::uint32_t nfa_start,
                            std::uint32_t nfa_accept, std::size_t state_budget) {
    Dfa dfa;
    dfa.trans.push_back({});  // state 0: dead
    dfa.trans[0].fill(0);
    dfa.accepting.push_back(0);

    std::map<std::vector<std::uint32_t>, std::uint32_t> ids;
    ids[{}] = 0;
    std::vector<std::uint8_t> mark(nfa.states.size(), 0);
    std::vector<std::vector<std::uint32_t>> sets;
    sets.push_back({});

    std::vector<std::uint32_t> start_set{nfa_start};
    eps_close(nfa, start_set, mark);
    ids[start_set] = 1;
    sets.push_back(start_set);
    dfa.trans.push_back({});
    dfa.trans[1].fill(0);
    dfa.accepting.push_back(
        std::binary_search(start_set.begin(), start_set.end(), nfa_accept) ? 1 : 0);
    dfa.start = 1;

    for (std::uint32_t cur = 1; cur < sets.size(); ++cur) {
        for (unsigned b = 0; b < 256; ++b) {
            std::vector<std::uint32_t> next;
            for (auto s : sets[cur]) {
                for (const auto& [cls, t] : nfa.states[s].edges) {
                    if (cls.test(static_cast<unsigned char>(b)) && !mark[t]) {
                        mark[t] = 1;
                        next.push_back(t);
                    }
                }
            }
            for (auto s : next) mark[s] = 0;
            if (next.empty()) continue;  // row is prefilled with the dead state
            eps_close(nfa, next, mark);
            auto [it, inserted] = ids.try_emplace(next, static_cast<std::uint32_t>(sets.size()));
            if (inserted) {
                if (sets.size() > state_budget)
                    fail(errc::state_blowup, "DFA exceeds state budget of " +
                                                 std::to_string(state_budget));
                sets.push_back(next);
                dfa.trans.push_back({});
                dfa.trans.back().fill(0);
                dfa.accepting.push_back(
                    std::binary_search(next.begin(), next.end(), nfa_accept) ? 1 : 0);
            }
            dfa.trans[cur][b] = static_cast<std::uint16_t>(it->second);
        }
    }
    return dfa;
}

/// Partition refinement to the minimal DFA, then canonical renumbering by
/// breadth-first discovery order so equal languages serialize identically.
inline Dfa minimize(const Dfa& in) {
    const std::size_t n = in.trans.size();
    std::vector<std::uint32_t> cls(n);
    for (std::size_t s = 0; s < n; ++s) cls[s] = in.accepting[s] ? 1 : 0;
    std::size_t n_classes = 2;

    for (;;) {
        std::map<std::vector<std::uint32_t>, std::uint32_t> sig_ids;
        std::vector<std::uint32_t> next_cls(n);
        for (std::size_t s = 0; s < n; ++s) {
            std::vector<std::uint32_t> sig;
            sig.reserve(257);
            sig.push_back(cls[s]);
            for (unsigned b = 0; b < 256; ++b) sig.push_back(cls[in.trans[s][b]]);
            auto [it, inserted] =
                sig_ids.try_emplace(std::move(sig), static_cast<std::uint32_t>(sig_ids.size()));
            next_cls[s] = it->second;
        }
        if (sig_ids.size() == n_classes) break;
        n_classes = sig_ids.size();
        cls = std::move(next_cls);
    }

    // class transition table via representatives
    std::vector<std::uint32_t> rep(n_classes, UINT32_MAX);
    for (std::size_t s = 0; s < n; ++s)
        if (rep[cls[s]] == UINT32_MAX) rep[cls[s]] = static_cast<std::uint32_t>(s);

    const std::uint32_t dead_cls = cls[0];
    std::vector<std::uint32_t> new_id(n_classes, UINT32_MAX);
    new_id[dead_cls] = 0;

    std::vector<std::uint32_t> order;  // discovered classes, BFS from start
    std::uint32_t start_cls = cls[in.start];
    std::queue<std::uint32_t> q;
    if (start_cls != dead_cls) {
        new_id[start_cls] = 1;
        order.push_back(start_cls);
        q.push(start_cls);
    }
    while (!q.empty()) {
        auto c = q.front();
        q.pop();
        for (unsigned b = 0; b < 256; ++b) {
            std::uint32_t tc = cls[in.trans[rep[c]][b]];
            if (new_id[tc] == UINT32_MAX) {
                new_id[tc] = static_cast<std::uint32_t>(order.size() + 1);
                order.push_back(tc);
                q.push(tc);
            }
        }
    }

    Dfa out;
    out.trans.resize(order.size() + 1);
    out.accepting.assign(order.size() + 1, 0);
    out.trans[0].fill(0);
    out.start = new_id[start_cls];
    for (std::size_t i = 0; i < order.size(); ++i) {
        std::uint32_t c = order[i];
        std::uint32_t id = static_cast<std::uint32_t>(i + 1);
        out.accepting[id] = in.accepting[rep[c]];
        for (unsigned b = 0; b < 256; ++b)
            out.trans[id][b] = static_cast<std::uint16_t>(new_id[cls[in.trans[rep[c]][b]]]);
    }
    return out;
}

}  // namespace dfa_detail

/// Thompson construction, subset construction, then minimization.
/// The result accepts exactly the AST's language as full-string matches.
inline Dfa compile(const RegexAst& ast, std::size_t state_budget = kDefaultStateBudget) {
    dfa_detail::NfaBuilder nfa;
    dfa_detail::NfaFragment frag = nfa.build(ast.root);
    Dfa raw = dfa_detail::subset_construct(nfa, frag.start, frag.accept, state_budget);
    return dfa_detail::minimize(raw);
}

}  // namespace emw
