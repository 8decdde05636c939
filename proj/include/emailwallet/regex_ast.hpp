#pragma once

#include <bitset>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "emailwallet/errors.hpp"

namespace emw {

/// Set of byte values a class matches. The nominal alphabet for `.` and
/// negated classes is printable ASCII plus SP (0x20..0x7E); explicit
/// literals and escapes may add TAB/CR/LF.
struct ByteSet {
    std::bitset<256> bits;

    void add(unsigned char c) { bits.set(c); }
    void add_range(unsigned char lo, unsigned char hi) {
        for (unsigned v = lo; v <= hi; ++v) bits.set(v);
    }
    bool test(unsigned char c) const { return bits.test(c); }
    bool empty() const { return bits.none(); }

    static ByteSet printable() {
        ByteSet s;
        s.add_range(0x20, 0x7e);
        return s;
    }
    static ByteSet digits() {
        ByteSet s;
        s.add_range('0', '9');
        return s;
    }
    static ByteSet word_chars() {
        ByteSet s;
        s.add_range('a', 'z');
        s.add_range('A', 'Z');
        s.add_range('0', '9');
        s.add('_');
        return s;
    }

    ByteSet complement_within_printable() const {
        ByteSet s = printable();
        s.bits &= ~bits;
        return s;
    }
};

struct RegexNode {
    enum class Kind { literal, char_class, concat, alternation, repeat, group };

    Kind kind = Kind::concat;
    unsigned char literal = 0;          // Kind::literal
    ByteSet cls;                        // Kind::char_class
    std::vector<RegexNode> children;    // concat/alternation; group/repeat hold one child
    std::uint32_t min = 0, max = 0;     // Kind::repeat
    bool unbounded = false;             // Kind::repeat: {m,}

    static RegexNode make_literal(unsigned char c) {
        RegexNode n;
        n.kind = Kind::literal;
        n.literal = c;
        return n;
    }
    static RegexNode make_class(ByteSet s) {
        RegexNode n;
        n.kind = Kind::char_class;
        n.cls = s;
        return n;
    }
};

struct RegexAst {
    std::string pattern;  // source text
    RegexNode root;
};

namespace regex_detail {

inline constexpr std::uint32_t kMaxRepeatBound = 1024;

class Parser {
public:
    explicit Parser(std::string_view pattern) : pat_(pattern) {}

    RegexAst parse() {
        RegexAst ast;
        ast.pattern = std::string(pat_);
        ast.root = parse_alternation();
        if (pos_ != pat_.size()) error(errc::parse_error, "unexpected ')'");
        return ast;
    }

private:
    [[noreturn]] void error(errc code, const std::string& what) const {
        fail(code, what + " at offset " + std::to_string(pos_));
    }

    bool eof() const { return pos_ >= pat_.size(); }
    char peek() const { return pat_[pos_]; }

    RegexNode parse_alternation() {
        std::vector<RegexNode> branches;
        branches.push_back(parse_concat());
        while (!eof() && peek() == '|') {
            ++pos_;
            branches.push_back(parse_concat());
        }
        if (branches.size() == 1) return std::move(branches.front());
        RegexNode n;
        n.kind = RegexNode::Kind::alternation;
        n.children = std::move(branches);
        return n;
    }

    RegexNode parse_concat() {
        RegexNode n;
        n.kind = RegexNode::Kind::concat;
        while (!eof() && peek() != '|' && peek() != ')') n.children.push_back(parse_repeat());
        if (n.children.size() == 1) return std::move(n.children.front());
        return n;  // zero children matches only the empty string
    }

    RegexNode parse_repeat() {
        RegexNode atom = parse_atom();
        if (eof()) return atom;
        char c = peek();
        std::uint32_t min = 0, max = 0;
        bool unbounded = false;
        if (c == '*') {
            ++pos_;
            min = 0;
            unbounded = true;
        } else if (c == '+') {
            ++pos_;
            min = 1;
            unbounded = true;
        } else if (c == '?') {
            ++pos_;
            min = 0;
            max = 1;
        } else if (c == '{') {
            ++pos_;
            min = parse_bound();
            if (eof()) error(errc::parse_error, "unterminated repetition");
            if (peek() == '}') {
                max = min;
                ++pos_;
            } else if (peek() == ',') {
                ++pos_;
                if (eof()) error(errc::parse_error, "unterminated repetition");
                if (peek() == '}') {
                    unbounded = true;
                    ++pos_;
                } else {
                    max = parse_bound();
                    if (eof() || peek() != '}') error(errc::parse_error, "expected '}'");
                    ++pos_;
                    if (min > max) error(errc::parse_error, "repetition min exceeds max");
                }
            } else {
                error(errc::parse_error, "expected '}' or ',' in repetition");
            }
        } else {
            return atom;
        }
        if (!eof() && (peek() == '*' || peek() == '+' || peek() == '?' || peek() == '{'))
            error(errc::parse_error, "nested quantifier");
        RegexNode n;
        n.kind = RegexNode::Kind::repeat;
        n.min = min;
        n.max = max;
        n.unbounded = unbounded;
        n.children.push_back(std::move(atom));
        return n;
    }

    std::uint32_t parse_bound() {
        if (eof() || peek() < '0' || peek() > '9')
            error(errc::parse_error, "expected digit in repetition bound");
        std::uint64_t v = 0;
        while (!eof() && peek() >= '0' && peek() <= '9') {
            v = v * 10 + std::uint64_t(peek() - '0');
            if (v > kMaxRepeatBound) error(errc::parse_error, "repetition bound too large");
            ++pos_;
        }
        return static_cast<std::uint32_t>(v);
    }

    RegexNode parse_atom() {
        if (eof()) error(errc::parse_error, "expected atom");
        char c = peek();
        switch (c) {
            case '(': {
                ++pos_;
                if (!eof() && peek() == '?')
                    error(errc::unsupported_syntax, "group modifiers are not supported");
                RegexNode inner = parse_alternation();
                if (eof() || peek() != ')') error(errc::parse_error, "expected ')'");
                ++pos_;
                RegexNode g;
                g.kind = RegexNode::Kind::group;
                g.children.push_back(std::move(inner));
                return g;
            }
            case '[':
                return parse_class();
            case '.': {
                ++pos_;
                return RegexNode::make_class(ByteSet::printable());
            }
            case '\\':
                return parse_escape(/*in_class=*/false);
            case '^':
            case '$':
                error(errc::unsupported_syntax, "anchors are not supported");
            case '*':
            case '+':
            case '?':
                error(errc::parse_error, "quantifier with nothing to repeat");
            case '{':
                error(errc::parse_error, "'{' with nothing to repeat");
            case '|':
            case ')':
                error(errc::parse_error, "unexpected metacharacter");
            default: {
                if (static_cast<unsigned char>(c) < 0x20 || static_cast<unsigned char>(c) > 0x7e)
                    error(errc::parse_error, "non-printable byte in pattern");
                ++pos_;
                return RegexNode::make_literal(static_cast<unsigned char>(c));
            }
        }
    }

    // Returns either a literal node or a class node (for \d, \w).
    RegexNode parse_escape(bool in_class) {
        ++pos_;  // consume '\'
        if (eof()) error(errc::parse_error, "dangling escape");
        char c = peek();
        ++pos_;
        switch (c) {
            case 'd':
                return RegexNode::make_class(ByteSet::digits());
            case 'w':
                return RegexNode::make_class(ByteSet::word_chars());
            case 't':
                return RegexNode::make_literal('\t');
            case 'r':
                return RegexNode::make_literal('\r');
            case 'n':
                return RegexNode::make_literal('\n');
            default:
                if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z')) {
                    --pos_;
                    error(errc::unsupported_syntax, "unsupported escape");
                }
                if (c >= '0' && c <= '9') {
                    --pos_;
                    error(errc::unsupported_syntax, "backreferences are not supported");
                }
                (void)in_class;
                return RegexNode::make_literal(static_cast<unsigned char>(c));
        }
    }

    RegexNode parse_class() {
        ++pos_;  // consume '['
        bool negated = false;
        if (!eof() && peek() == '^') {
            negated = true;
            ++pos_;
        }
        ByteSet set;
        bool any = false;
        while (true) {
            if (eof()) error(errc::parse_error, "unterminated character class");
            if (peek() == ']') {
                ++pos_;
                break;
            }
            any = true;
            if (peek() == '\\') {
                RegexNode esc = parse_escape(/*in_class=*/true);
                if (esc.kind == RegexNode::Kind::char_class) {
                    set.bits |= esc.cls.bits;  // \d or \w inside a class
                    continue;
                }
                add_element(set, esc.literal);
                continue;
            }
            add_element(set, raw_class_char());
        }
        if (!any) error(errc::parse_error, "empty character class");
        if (negated) set = set.complement_within_printable();
        return RegexNode::make_class(set);
    }

    // Adds `lo` or the range `lo-hi` when a '-' follows.
    void add_element(ByteSet& set, unsigned char lo) {
        if (!eof() && peek() == '-' && pos_ + 1 < pat_.size() && pat_[pos_ + 1] != ']') {
            ++pos_;  // consume '-'
            unsigned char hi;
            if (!eof() && peek() == '\\') {
                RegexNode esc = parse_escape(/*in_class=*/true);
                if (esc.kind != RegexNode::Kind::literal)
                    error(errc::parse_error, "range endpoint must be a single character");
                hi = esc.literal;
            } else {
                hi = raw_class_char();
            }
            if (lo > hi) error(errc::parse_error, "inverted range in character class");
            set.add_range(lo, hi);
        } else {
            set.add(lo);
        }
    }

    unsigned char raw_class_char() {
        char c = peek();
        if (static_cast<unsigned char>(c) < 0x20 || static_cast<unsigned char>(c) > 0x7e)
            error(errc::parse_error, "non-printable byte in character class");
        ++pos_;
        return static_cast<unsigned char>(c);
    }

    std::string_view pat_;
    std::size_t pos_ = 0;
};

}  // namespace regex_detail

/// Parses the supported regex subset: literals, escaped metacharacters,
/// \d, \w, [...] classes with ranges and negation, ., |, (), *, +, ?, {m}, {m,n}.
inline RegexAst parse_regex(std::string_view pattern) {
    return regex_detail::Parser(pattern).parse();
}

}  // namespace emw
