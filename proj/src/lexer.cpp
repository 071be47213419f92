#include "chainforge/lexer.hpp"

#include <array>
#include <cctype>

namespace chainforge::lex {

bool is_identifier_start(char c) noexcept {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

bool is_identifier_char(char c) noexcept {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

namespace {

void blank(std::string& out, std::size_t from, std::size_t to) {
  for (std::size_t i = from; i < to && i < out.size(); ++i) {
    if (out[i] != '\n') out[i] = ' ';
  }
}

// True when the quote at `quote` opens a raw string literal: R"..." with an
// optional u8/u/U/L encoding prefix that is not glued to a longer identifier.
bool opens_raw_string(std::string_view text, std::size_t quote) {
  if (quote == 0 || text[quote - 1] != 'R') return false;
  std::size_t start = quote - 1;
  if (start >= 2 && text.substr(start - 2, 2) == "u8") {
    start -= 2;
  } else if (start >= 1 && (text[start - 1] == 'u' || text[start - 1] == 'U' || text[start - 1] == 'L')) {
    start -= 1;
  }
  return start == 0 || !is_identifier_char(text[start - 1]);
}

// A quote preceded by a pp-number run is a C++14 digit separator.
bool is_digit_separator(std::string_view text, std::size_t quote) {
  std::size_t i = quote;
  while (i > 0 && (is_identifier_char(text[i - 1]) || text[i - 1] == '.' || text[i - 1] == '\'')) --i;
  return i < quote && std::isdigit(static_cast<unsigned char>(text[i]));
}

}  // namespace

std::string mask_comments_and_literals(std::string_view text) {
  std::string out(text);
  const std::size_t size = text.size();
  std::size_t i = 0;
  while (i < size) {
    const char c = text[i];
    if (c == '/' && i + 1 < size && text[i + 1] == '/') {
      std::size_t j = i + 2;
      while (j < size) {
        if (text[j] == '\n') {
          // A backslash-newline splices the comment onto the next line.
          std::size_t k = j;
          if (k > 0 && text[k - 1] == '\r') --k;
          if (k > 0 && text[k - 1] == '\\') {
            ++j;
            continue;
          }
          break;
        }
        ++j;
      }
      blank(out, i, j);
      i = j;
    } else if (c == '/' && i + 1 < size && text[i + 1] == '*') {
      const std::size_t close = text.find("*/", i + 2);
      const std::size_t j = close == std::string_view::npos ? size : close + 2;
      blank(out, i, j);
      i = j;
    } else if (c == '"' && opens_raw_string(text, i)) {
      const std::size_t paren = text.find('(', i + 1);
      if (paren == std::string_view::npos) {
        blank(out, i, size);
        break;
      }
      const std::string terminator = ")" + std::string(text.substr(i + 1, paren - i - 1)) + "\"";
      const std::size_t close = text.find(terminator, paren + 1);
      const std::size_t j = close == std::string_view::npos ? size : close + terminator.size();
      blank(out, i, j);
      i = j;
    } else if (c == '"' || (c == '\'' && !is_digit_separator(text, i))) {
      std::size_t j = i + 1;
      while (j < size && text[j] != c && text[j] != '\n') {
        if (text[j] == '\\' && j + 1 < size) ++j;
        ++j;
      }
      if (j < size && text[j] == c) ++j;
      blank(out, i, j);
      i = j;
    } else {
      ++i;
    }
  }
  return out;
}

namespace {

constexpr std::array<std::string_view, 27> kPunctuators = {
    "...", "->*", "<<=", ">>=", "<=>", "->", "::", "++", "--", "<<", ">>",
    "<=",  ">=",  "==",  "!=",  "&&",  "||", "+=", "-=", "*=", "/=", "%=",
    "&=",  "|=",  "^=",  "##",  ".*",
};

}  // namespace

std::vector<Token> tokenize(std::string_view masked) {
  std::vector<Token> tokens;
  const std::size_t size = masked.size();
  std::size_t i = 0;
  while (i < size) {
    const char c = masked[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    if (is_identifier_start(c)) {
      while (i < size && is_identifier_char(masked[i])) ++i;
      tokens.push_back({TokenKind::identifier, masked.substr(start, i - start), start});
      continue;
    }
    const bool leading_dot_number =
        c == '.' && i + 1 < size && std::isdigit(static_cast<unsigned char>(masked[i + 1]));
    if (std::isdigit(static_cast<unsigned char>(c)) || leading_dot_number) {
      ++i;
      while (i < size) {
        const char d = masked[i];
        if ((d == '+' || d == '-') && (masked[i - 1] == 'e' || masked[i - 1] == 'E' ||
                                       masked[i - 1] == 'p' || masked[i - 1] == 'P')) {
          ++i;
        } else if (is_identifier_char(d) || d == '.' || d == '\'') {
          ++i;
        } else {
          break;
        }
      }
      tokens.push_back({TokenKind::number, masked.substr(start, i - start), start});
      continue;
    }
    std::size_t length = 1;
    for (std::string_view p : kPunctuators) {
      if (masked.substr(i, p.size()) == p) {
        length = p.size();
        break;
      }
    }
    tokens.push_back({TokenKind::punct, masked.substr(start, length), start});
    i += length;
  }
  return tokens;
}

std::string join_tokens(const std::vector<Token>& tokens, std::size_t first, std::size_t last) {
  std::string out;
  for (std::size_t i = first; i < last && i < tokens.size(); ++i) {
    const bool wordy = tokens[i].kind != TokenKind::punct;
    if (i > first && wordy && tokens[i - 1].kind != TokenKind::punct) out += ' ';
    out.append(tokens[i].text);
  }
  return out;
}

}  // namespace chainforge::lex
