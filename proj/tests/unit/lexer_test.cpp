#include <gtest/gtest.h>

#include <random>

#include "clbforge/error.hpp"
#include "clbforge/lexer.hpp"

namespace clbforge {
namespace {

std::vector<std::string> texts(const TokenStream& ts) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < ts.size(); ++i) out.emplace_back(ts.text(i));
  return out;
}

/// Token spans plus the bytes between them give back the source.
std::string reassemble(const TokenStream& ts) {
  std::string out;
  std::size_t cursor = 0;
  for (const auto& t : ts.tokens()) {
    out += ts.source().substr(cursor, t.span.begin - cursor);
    out += ts.text(t);
    cursor = t.span.end;
  }
  return out + ts.source().substr(cursor);
}

TEST(Tokenize, SimpleCondition) {
  const auto ts = tokenize("if (a == 5)");
  EXPECT_EQ(texts(ts), (std::vector<std::string>{"if", "(", "a", "==", "5", ")"}));
  EXPECT_EQ(ts[3].kind, TokenKind::Punct);
  EXPECT_EQ(ts[4].kind, TokenKind::Number);
  EXPECT_EQ(ts[3].span, (ByteRange{6, 8}));
}

TEST(Tokenize, EmptyInput) { EXPECT_TRUE(tokenize("").empty()); }

TEST(Tokenize, StringLiteralIsOpaque) {
  const auto ts = tokenize("\"a == 5\"");
  ASSERT_EQ(ts.size(), 1u);
  EXPECT_EQ(ts[0].kind, TokenKind::StringLiteral);
}

TEST(Tokenize, CommentsAndCharLiterals) {
  const auto ts = tokenize("x = '\\'' /* c == 1 */ + 1; // tail == 2\n");
  EXPECT_EQ(texts(ts), (std::vector<std::string>{"x", "=", "'\\''", "/* c == 1 */", "+", "1", ";", "// tail == 2"}));
  EXPECT_EQ(ts[2].kind, TokenKind::CharLiteral);
  EXPECT_EQ(ts[3].kind, TokenKind::Comment);
}

TEST(Tokenize, DirectiveIsOneTokenWithContinuation) {
  const auto ts = tokenize("#define X \\\n  (1 + 2)\nint y;\n");
  ASSERT_GE(ts.size(), 1u);
  EXPECT_EQ(ts[0].kind, TokenKind::Directive);
  EXPECT_EQ(ts.text(0), "#define X \\\n  (1 + 2)");
  EXPECT_EQ(ts.text(1), "int");
}

TEST(Tokenize, HashInsideLineIsNotDirective) {
  const auto ts = tokenize("a # b\n");
  EXPECT_NE(ts[0].kind, TokenKind::Directive);
}

TEST(Tokenize, MaximalMunchPunctuators) {
  EXPECT_EQ(texts(tokenize("a<<=b->c...d")),
            (std::vector<std::string>{"a", "<<=", "b", "->", "c", "...", "d"}));
  EXPECT_EQ(texts(tokenize("0x1fUL 1.5e+3f")), (std::vector<std::string>{"0x1fUL", "1.5e+3f"}));
}

TEST(Tokenize, PrefixedLiterals) {
  const auto ts = tokenize("L\"wide\" u8\"x\" U'c'");
  ASSERT_EQ(ts.size(), 3u);
  EXPECT_EQ(ts[0].kind, TokenKind::StringLiteral);
  EXPECT_EQ(ts[1].kind, TokenKind::StringLiteral);
  EXPECT_EQ(ts[2].kind, TokenKind::CharLiteral);
}

TEST(Tokenize, UnterminatedString) {
  try {
    tokenize("int x;\nchar *s = \"abc\n");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnterminatedLiteral);
    EXPECT_EQ(e.offset(), 17u);
  }
}

TEST(Tokenize, UnterminatedComment) {
  try {
    tokenize("a /* open");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnterminatedComment);
    EXPECT_EQ(e.offset(), 2u);
  }
}

TEST(Tokenize, ReassemblesRandomSources) {
  const std::vector<std::string> pieces = {"int", " ", "\n", "x", "==", "0x10", "\"s\\\"q\"", "/* c */", "// d\n",
                                           "'c'", "{", "}", "(", ")", ";", "#include <a.h>\n", "\t", "->", "@", "$"};
  std::mt19937_64 rng(3);
  for (int i = 0; i < 300; ++i) {
    std::string src = "\n";
    const auto n = rng() % 40;
    for (std::size_t k = 0; k < n; ++k) {
      src += pieces[rng() % pieces.size()];
      src += ' ';
    }
    const auto ts = tokenize(src);
    ASSERT_EQ(reassemble(ts), src);
    for (std::size_t k = 1; k < ts.size(); ++k) ASSERT_LE(ts[k - 1].span.end, ts[k].span.begin);
  }
}

TEST(Keywords, Recognized) {
  EXPECT_TRUE(is_c_keyword("if"));
  EXPECT_TRUE(is_c_keyword("unsigned"));
  EXPECT_FALSE(is_c_keyword("ifx"));
}

}  // namespace
}  // namespace clbforge
