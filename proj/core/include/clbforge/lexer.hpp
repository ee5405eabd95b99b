#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace clbforge {

struct ByteRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  bool contains(std::size_t offset) const noexcept { return offset >= begin && offset < end; }
  bool contains(const ByteRange& other) const noexcept {
    return other.begin >= begin && other.end <= end;
  }
  friend bool operator==(const ByteRange&, const ByteRange&) = default;
};

enum class TokenKind {
  Identifier,
  Number,
  CharLiteral,
  StringLiteral,
  Punct,
  Comment,
  Directive,  // a whole preprocessor line, continuations included
  Other,      // any byte the C lexical grammar does not cover
};

struct Token {
  TokenKind kind;
  ByteRange span;
};

/// Token sequence over an owned copy of the source. Bytes between tokens are
/// whitespace or line splices, so spans plus gaps reproduce the input exactly.
class TokenStream {
 public:
  TokenStream() = default;
  TokenStream(std::string source, std::vector<Token> tokens)
      : source_(std::move(source)), tokens_(std::move(tokens)) {}

  const std::string& source() const noexcept { return source_; }
  const std::vector<Token>& tokens() const noexcept { return tokens_; }
  std::size_t size() const noexcept { return tokens_.size(); }
  bool empty() const noexcept { return tokens_.empty(); }
  const Token& operator[](std::size_t i) const { return tokens_[i]; }

  std::string_view text(const Token& t) const noexcept {
    return std::string_view(source_).substr(t.span.begin, t.span.size());
  }
  std::string_view text(std::size_t i) const noexcept { return text(tokens_[i]); }

  std::string release_source() && { return std::move(source_); }

 private:
  std::string source_;
  std::vector<Token> tokens_;
};

/// Throws Error{UnterminatedLiteral|UnterminatedComment} carrying the byte
/// offset where the literal or comment started.
TokenStream tokenize(std::string_view source);

bool is_c_keyword(std::string_view word) noexcept;

}  // namespace clbforge
