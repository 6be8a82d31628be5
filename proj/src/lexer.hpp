#pragma once

#include <daproc/model.hpp>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace daproc::detail {

struct Token {
    enum class Kind { Ident, Int, String, Symbol, Error, End };
    Kind kind = Kind::End;
    std::string text;  // identifier, symbol, decoded string, or error message
    std::int64_t number = 0;
    int line = 1;
    int col = 1;
    int end_line = 1;
    int end_col = 1;

    bool is_symbol(std::string_view s) const { return kind == Kind::Symbol && text == s; }
    bool is_keyword(std::string_view kw) const;
};

std::vector<Token> tokenize(std::string_view text);

// Recursive-descent helpers shared by the spec, query and script parsers.
class TokenCursor {
public:
    TokenCursor(std::vector<Token> tokens, std::string file)
        : tokens_(std::move(tokens)), file_(std::move(file)) {}

    const Token& peek(std::size_t ahead = 0) const;
    const Token& next();
    bool at_end() const { return peek().kind == Token::Kind::End; }
    std::size_t position() const { return pos_; }
    void seek(std::size_t pos) { pos_ = pos; }

    bool accept_symbol(std::string_view s);
    bool accept_keyword(std::string_view kw);
    void expect_symbol(std::string_view s);
    void expect_keyword(std::string_view kw);
    std::string expect_ident(std::string_view what);

    SourceSpan span_from(const Token& start) const;
    SourceSpan span_of(const Token& t) const;
    [[noreturn]] void fail(const Token& at, const std::string& msg) const;

    const std::string& file() const { return file_; }

private:
    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
    std::string file_;
};

// Thrown by TokenCursor::fail; caught at declaration boundaries.
struct SyntaxError {
    SourceSpan span;
    std::string message;
};

bool is_reserved_word(std::string_view ident);

Value parse_literal(TokenCursor& cur);
AttrType parse_type(TokenCursor& cur);
Operand parse_operand(TokenCursor& cur);
Condition parse_condition(TokenCursor& cur);
SelectQuery parse_select(TokenCursor& cur);

}  // namespace daproc::detail
