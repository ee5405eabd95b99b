#include "clbforge/lexer.hpp"

#include <algorithm>
#include <array>

#include "clbforge/error.hpp"

namespace clbforge {
namespace {

bool is_ident_start(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c == '$';
}
bool is_ident_char(unsigned char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }
bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }
bool is_hspace(unsigned char c) { return c == ' ' || c == '\t' || c == '\f' || c == '\v'; }

// Longest first so maximal munch falls out of a linear probe.
constexpr std::array<std::string_view, 23> kMultiPunct = {
    "...", "<<=", ">>=", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=",
    "&&",  "||",  "*=",  "/=", "%=", "+=", "-=", "&=", "^=", "|=", "##",
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    bool line_start = true;
    while (pos_ < src_.size()) {
      const unsigned char c = src_[pos_];
      if (c == '\n') {
        line_start = true;
        ++pos_;
        continue;
      }
      if (is_hspace(c) || c == '\r') {
        ++pos_;
        continue;
      }
      if (c == '\\' && splice_len(pos_) != 0) {
        pos_ += splice_len(pos_);
        continue;
      }
      const std::size_t begin = pos_;
      if (c == '#' && line_start) {
        scan_directive();
        out.push_back({TokenKind::Directive, {begin, pos_}});
        continue;
      }
      line_start = false;
      out.push_back(scan_token());
    }
    return out;
  }

 private:
  std::size_t splice_len(std::size_t at) const {
    if (at < src_.size() && src_[at] == '\\') {
      if (at + 1 < src_.size() && src_[at + 1] == '\n') return 2;
      if (at + 2 < src_.size() && src_[at + 1] == '\r' && src_[at + 2] == '\n') return 3;
    }
    return 0;
  }

  bool at(std::string_view s) const { return src_.substr(pos_, s.size()) == s; }

  void skip_block_comment() {
    const std::size_t begin = pos_;
    const auto close = src_.find("*/", pos_ + 2);
    if (close == std::string_view::npos)
      throw Error(ErrorCode::UnterminatedComment, "block comment never closed", begin);
    pos_ = close + 2;
  }

  void skip_line_comment() {
    while (pos_ < src_.size()) {
      if (src_[pos_] == '\\' && splice_len(pos_) != 0) {
        pos_ += splice_len(pos_);
        continue;
      }
      if (src_[pos_] == '\n') break;
      ++pos_;
    }
  }

  void skip_quoted(char quote) {
    const std::size_t begin = pos_;
    ++pos_;
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (c == '\\') {
        if (splice_len(pos_) != 0) {
          pos_ += splice_len(pos_);
          continue;
        }
        pos_ += 2;
        continue;
      }
      if (c == quote) {
        ++pos_;
        return;
      }
      if (c == '\n') break;
      ++pos_;
    }
    throw Error(ErrorCode::UnterminatedLiteral,
                quote == '"' ? "string literal not terminated" : "character literal not terminated",
                begin);
  }

  void scan_directive() {
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (c == '\n') return;
      if (c == '\\' && splice_len(pos_) != 0) {
        pos_ += splice_len(pos_);
      } else if (at("/*")) {
        skip_block_comment();
      } else if (at("//")) {
        skip_line_comment();
      } else if (c == '"' || c == '\'') {
        // #error and #warning may carry apostrophes that are not literals.
        const std::size_t save = pos_;
        try {
          skip_quoted(c);
        } catch (const Error&) {
          pos_ = save + 1;
        }
      } else {
        ++pos_;
      }
    }
  }

  Token scan_token() {
    const std::size_t begin = pos_;
    const unsigned char c = src_[pos_];
    if (at("/*")) {
      skip_block_comment();
      return {TokenKind::Comment, {begin, pos_}};
    }
    if (at("//")) {
      skip_line_comment();
      return {TokenKind::Comment, {begin, pos_}};
    }
    if (c == '"' || c == '\'') {
      skip_quoted(static_cast<char>(c));
      return {c == '"' ? TokenKind::StringLiteral : TokenKind::CharLiteral, {begin, pos_}};
    }
    if (is_ident_start(c)) {
      while (pos_ < src_.size() && is_ident_char(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      const auto word = src_.substr(begin, pos_ - begin);
      const bool prefix = word == "L" || word == "u" || word == "U" || word == "u8";
      if (prefix && pos_ < src_.size() && (src_[pos_] == '"' || src_[pos_] == '\'')) {
        const char q = src_[pos_];
        skip_quoted(q);
        return {q == '"' ? TokenKind::StringLiteral : TokenKind::CharLiteral, {begin, pos_}};
      }
      return {TokenKind::Identifier, {begin, pos_}};
    }
    if (is_digit(c) || (c == '.' && pos_ + 1 < src_.size() && is_digit(src_[pos_ + 1]))) {
      ++pos_;
      while (pos_ < src_.size()) {
        const unsigned char d = src_[pos_];
        if ((d == '+' || d == '-') && (src_[pos_ - 1] | 0x20) == 'e' ) {
          ++pos_;
        } else if ((d == '+' || d == '-') && (src_[pos_ - 1] | 0x20) == 'p') {
          ++pos_;
        } else if (is_ident_char(d) || d == '.' || d == '\'') {
          ++pos_;
        } else {
          break;
        }
      }
      return {TokenKind::Number, {begin, pos_}};
    }
    for (auto p : kMultiPunct) {
      if (at(p)) {
        pos_ += p.size();
        return {TokenKind::Punct, {begin, pos_}};
      }
    }
    constexpr std::string_view kSingle = "{}[]()<>;:,.?!~+-*/%&|^=#";
    ++pos_;
    if (kSingle.find(static_cast<char>(c)) != std::string_view::npos)
      return {TokenKind::Punct, {begin, pos_}};
    return {TokenKind::Other, {begin, pos_}};
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

constexpr std::array<std::string_view, 44> kKeywords = {
    "_Alignas", "_Alignof", "_Atomic",  "_Bool",    "_Complex", "_Generic", "_Imaginary",
    "_Noreturn", "_Static_assert", "_Thread_local", "auto", "break", "case", "char",
    "const",    "continue", "default",  "do",       "double",   "else",     "enum",
    "extern",   "float",    "for",      "goto",     "if",       "inline",   "int",
    "long",     "register", "restrict", "return",   "short",    "signed",   "sizeof",
    "static",   "struct",   "switch",   "typedef",  "union",    "unsigned", "void",
    "volatile", "while"};

}  // namespace

TokenStream tokenize(std::string_view source) {
  Lexer lexer(source);
  auto tokens = lexer.run();
  return TokenStream(std::string(source), std::move(tokens));
}

bool is_c_keyword(std::string_view word) noexcept {
  return std::find(kKeywords.begin(), kKeywords.end(), word) != kKeywords.end() ||
         word == "__attribute__" || word == "__asm__" || word == "asm" || word == "__typeof__" ||
         word == "typeof" || word == "__extension__" || word == "__inline__" ||
         word == "__restrict" || word == "__restrict__" || word == "__volatile__";
}

}  // namespace clbforge
