#include "lexer.hpp"

#include <fmt/format.h>

#include <array>
#include <cctype>
#include <charconv>
#include <limits>

namespace daproc::detail {

namespace {

bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::toupper(static_cast<unsigned char>(a[i])) !=
            std::toupper(static_cast<unsigned char>(b[i])))
            return false;
    return true;
}

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

}  // namespace

bool Token::is_keyword(std::string_view kw) const {
    return kind == Kind::Ident && iequals(text, kw);
}

bool is_reserved_word(std::string_view ident) {
    static constexpr std::array words = {"SELECT", "FROM",  "WHERE",  "AND",    "OR",
                                         "NOT",    "UNION", "ENABLES", "AS",    "DELETE",
                                         "INSERT", "INTO",  "VALUES"};
    for (auto w : words)
        if (iequals(ident, w)) return true;
    return false;
}

std::vector<Token> tokenize(std::string_view text) {
    std::vector<Token> out;
    std::size_t i = 0;
    int line = 1, col = 1;

    auto advance = [&](std::size_t n) {
        for (std::size_t k = 0; k < n && i < text.size(); ++k, ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else if ((static_cast<unsigned char>(text[i]) & 0xC0) != 0x80) {
                ++col;  // count code points, not bytes
            }
        }
    };

    while (i < text.size()) {
        char c = text[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            advance(1);
            continue;
        }
        if (c == '-' && i + 1 < text.size() && text[i + 1] == '-') {
            while (i < text.size() && text[i] != '\n') advance(1);
            continue;
        }

        Token t;
        t.line = line;
        t.col = col;
        std::size_t start = i;

        if (ident_start(c)) {
            while (i < text.size() && ident_char(text[i])) advance(1);
            t.kind = Token::Kind::Ident;
            t.text = std::string(text.substr(start, i - start));
        } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                   (c == '-' && i + 1 < text.size() &&
                    std::isdigit(static_cast<unsigned char>(text[i + 1])))) {
            advance(1);
            while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) advance(1);
            auto digits = text.substr(start, i - start);
            std::int64_t v = 0;
            auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
            if (ec != std::errc{} || p != digits.data() + digits.size()) {
                t.kind = Token::Kind::Error;
                t.text = fmt::format("integer literal '{}' out of range", digits);
            } else {
                t.kind = Token::Kind::Int;
                t.number = v;
                t.text = std::string(digits);
            }
        } else if (c == '\'') {
            advance(1);
            std::string s;
            bool closed = false;
            while (i < text.size()) {
                if (text[i] == '\'') {
                    if (i + 1 < text.size() && text[i + 1] == '\'') {
                        s += '\'';
                        advance(2);
                        continue;
                    }
                    advance(1);
                    closed = true;
                    break;
                }
                s += text[i];
                advance(1);
            }
            if (closed) {
                t.kind = Token::Kind::String;
                t.text = std::move(s);
            } else {
                t.kind = Token::Kind::Error;
                t.text = "unterminated string literal";
            }
        } else {
            static constexpr std::array two = {"<>", "!=", "<=", ">="};
            std::string_view sym;
            for (auto s : two)
                if (text.substr(i, 2) == s) sym = s;
            if (sym.empty() && std::string_view("(),;{}.:@=<>*").find(c) != std::string_view::npos)
                sym = text.substr(i, 1);
            if (sym.empty()) {
                t.kind = Token::Kind::Error;
                t.text = fmt::format("unexpected character '{}'", c);
                advance(1);
            } else {
                t.kind = Token::Kind::Symbol;
                t.text = std::string(sym == "!=" ? "<>" : sym);
                advance(sym.size());
            }
        }
        t.end_line = line;
        t.end_col = col;
        out.push_back(std::move(t));
    }
    Token end;
    end.kind = Token::Kind::End;
    end.line = end.end_line = line;
    end.col = end.end_col = col;
    out.push_back(end);
    return out;
}

const Token& TokenCursor::peek(std::size_t ahead) const {
    std::size_t p = std::min(pos_ + ahead, tokens_.size() - 1);
    return tokens_[p];
}

const Token& TokenCursor::next() {
    const Token& t = peek();
    if (t.kind == Token::Kind::Error) fail(t, t.text);
    if (pos_ < tokens_.size() - 1) ++pos_;
    return t;
}

bool TokenCursor::accept_symbol(std::string_view s) {
    if (!peek().is_symbol(s)) return false;
    next();
    return true;
}

bool TokenCursor::accept_keyword(std::string_view kw) {
    if (!peek().is_keyword(kw)) return false;
    next();
    return true;
}

static std::string describe_token(const Token& t) {
    switch (t.kind) {
    case Token::Kind::End: return "end of input";
    case Token::Kind::String: return fmt::format("string '{}'", t.text);
    case Token::Kind::Int: return fmt::format("number {}", t.text);
    default: return fmt::format("'{}'", t.text);
    }
}

void TokenCursor::expect_symbol(std::string_view s) {
    if (peek().kind == Token::Kind::Error) fail(peek(), peek().text);
    if (!accept_symbol(s)) fail(peek(), fmt::format("expected '{}', found {}", s, describe_token(peek())));
}

void TokenCursor::expect_keyword(std::string_view kw) {
    if (peek().kind == Token::Kind::Error) fail(peek(), peek().text);
    if (!accept_keyword(kw))
        fail(peek(), fmt::format("expected {}, found {}", kw, describe_token(peek())));
}

std::string TokenCursor::expect_ident(std::string_view what) {
    const Token& t = peek();
    if (t.kind == Token::Kind::Error) fail(t, t.text);
    if (t.kind != Token::Kind::Ident || is_reserved_word(t.text))
        fail(t, fmt::format("expected {}, found {}", what, describe_token(t)));
    return next().text;
}

SourceSpan TokenCursor::span_of(const Token& t) const {
    return {file_, t.line, t.col, t.end_line, t.end_col};
}

SourceSpan TokenCursor::span_from(const Token& start) const {
    const Token& last = tokens_[pos_ == 0 ? 0 : pos_ - 1];
    return {file_, start.line, start.col, last.end_line, last.end_col};
}

void TokenCursor::fail(const Token& at, const std::string& msg) const {
    throw SyntaxError{span_of(at), msg};
}

Value parse_literal(TokenCursor& cur) {
    const Token& t = cur.peek();
    if (t.kind == Token::Kind::Int) return cur.next().number;
    if (t.kind == Token::Kind::String) return cur.next().text;
    cur.fail(t, fmt::format("expected a literal, found {}", describe_token(t)));
}

AttrType parse_type(TokenCursor& cur) {
    const Token& t = cur.peek();
    if (t.is_keyword("INT") || t.is_keyword("INTEGER")) {
        cur.next();
        return AttrType::Int;
    }
    if (t.is_keyword("STRING") || t.is_keyword("TEXT") || t.is_keyword("VARCHAR")) {
        cur.next();
        return AttrType::String;
    }
    cur.fail(t, fmt::format("expected a type (INT or STRING), found {}", describe_token(t)));
}

Operand parse_operand(TokenCursor& cur) {
    const Token& t = cur.peek();
    if (t.is_symbol(":")) {
        cur.next();
        return Param{cur.expect_ident("parameter name")};
    }
    if (t.kind == Token::Kind::Int || t.kind == Token::Kind::String) return Const{parse_literal(cur)};
    std::string first = cur.expect_ident("attribute, literal or :parameter");
    if (cur.accept_symbol(".")) return AttrRef{first, cur.expect_ident("attribute name")};
    return AttrRef{{}, first};
}

static std::optional<CmpOp> parse_cmp_op(TokenCursor& cur) {
    static const std::pair<std::string_view, CmpOp> ops[] = {
        {"=", CmpOp::Eq}, {"<>", CmpOp::Ne}, {"<=", CmpOp::Le},
        {">=", CmpOp::Ge}, {"<", CmpOp::Lt},  {">", CmpOp::Gt}};
    for (const auto& [s, op] : ops)
        if (cur.accept_symbol(s)) return op;
    return std::nullopt;
}

static Condition parse_or(TokenCursor& cur);

static Condition parse_primary(TokenCursor& cur) {
    if (cur.accept_keyword("NOT")) return Condition::negate(parse_primary(cur));
    if (cur.accept_symbol("(")) {
        Condition c = parse_or(cur);
        cur.expect_symbol(")");
        return c;
    }
    Operand lhs = parse_operand(cur);
    auto op = parse_cmp_op(cur);
    if (!op) cur.fail(cur.peek(), "expected a comparison operator");
    Operand rhs = parse_operand(cur);
    return Condition::cmp(std::move(lhs), *op, std::move(rhs));
}

static Condition parse_and(TokenCursor& cur) {
    std::vector<Condition> parts;
    parts.push_back(parse_primary(cur));
    while (cur.accept_keyword("AND")) parts.push_back(parse_primary(cur));
    if (parts.size() == 1) return std::move(parts.front());
    return Condition::all(std::move(parts));
}

static Condition parse_or(TokenCursor& cur) {
    std::vector<Condition> parts;
    parts.push_back(parse_and(cur));
    while (cur.accept_keyword("OR")) parts.push_back(parse_and(cur));
    if (parts.size() == 1) return std::move(parts.front());
    return Condition::any(std::move(parts));
}

Condition parse_condition(TokenCursor& cur) { return parse_or(cur); }

static SelectQuery parse_select_core(TokenCursor& cur) {
    SelectQuery q;
    cur.expect_keyword("SELECT");
    do {
        q.projection.push_back(parse_operand(cur));
    } while (cur.accept_symbol(","));
    cur.expect_keyword("FROM");
    do {
        TableRef t;
        t.relation = cur.expect_ident("relation name");
        if (cur.accept_keyword("AS")) {
            t.alias = cur.expect_ident("alias");
        } else if (cur.peek().kind == Token::Kind::Ident && !is_reserved_word(cur.peek().text)) {
            t.alias = cur.next().text;
        }
        q.from.push_back(std::move(t));
    } while (cur.accept_symbol(","));
    if (cur.accept_keyword("WHERE")) q.where = parse_condition(cur);
    return q;
}

SelectQuery parse_select(TokenCursor& cur) {
    SelectQuery q = parse_select_core(cur);
    while (cur.accept_keyword("UNION")) q.union_branches.push_back(parse_select_core(cur));
    return q;
}

}  // namespace daproc::detail
