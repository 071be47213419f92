#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

// Just enough C/C++ lexing for a line-oriented rewriter: comment and literal
// masking plus a flat token stream. No preprocessing, no grammar.
namespace chainforge::lex {

// Copy of `text` where comments and string/character literals (including
// their delimiters) are overwritten with spaces. Newlines survive, so byte
// offsets and line numbers of the result match the input exactly.
std::string mask_comments_and_literals(std::string_view text);

enum class TokenKind { identifier, number, punct };

struct Token {
  TokenKind kind;
  std::string_view text;
  std::size_t offset;  // byte offset into the tokenized buffer
};

// Tokenizes already-masked text. Whitespace is dropped; punctuators use
// longest match so `->` and `::` come out as single tokens.
std::vector<Token> tokenize(std::string_view masked);

// Joins token texts back into compact source form, inserting a space only
// where two word-like tokens would otherwise fuse.
std::string join_tokens(const std::vector<Token>& tokens, std::size_t first, std::size_t last);

bool is_identifier_start(char c) noexcept;
bool is_identifier_char(char c) noexcept;

}  // namespace chainforge::lex
