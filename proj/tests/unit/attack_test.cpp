#include <gtest/gtest.h>

#include "clbforge/attack.hpp"
#include "clbforge/error.hpp"
#include "elf_fixture.hpp"

namespace clbforge {
namespace {

std::vector<std::uint8_t> bytes_of(std::string_view s) { return {s.begin(), s.end()}; }

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::Io;
}

TEST(FindStrings, Runs) {
  using namespace std::string_literals;
  const auto b = bytes_of("\x01RIOT native interrupts/signals initialized\0ab\0abcdefgh\x7f"s);
  const auto s = find_strings(b, 8);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].offset, 1u);
  EXPECT_EQ(s[0].text, "RIOT native interrupts/signals initialized");
  EXPECT_EQ(s[1].text, "abcdefgh");
  EXPECT_EQ(find_strings(b, 2).size(), 3u);
  EXPECT_TRUE(find_strings({}, 8).empty());
  // a range boundary cuts the run
  const auto clipped = find_strings(b, 4, FileRange{10, 10});
  ASSERT_EQ(clipped.size(), 1u);
  EXPECT_EQ(clipped[0].offset, 10u);
  EXPECT_EQ(clipped[0].length(), 10u);
}

TEST(TamperStrings, ReplacementPaddingAndTruncation) {
  using namespace std::string_literals;
  const auto b = bytes_of("\0short str\0RIOT native interrupts/signals initialized\0"s);
  const auto r = tamper_strings(b, 1, 2, 8);
  ASSERT_EQ(r.report.entries.size(), 2u);
  EXPECT_EQ(std::string(r.bytes.begin() + 1, r.bytes.begin() + 10), "RIOT has ");
  EXPECT_EQ(std::string(r.bytes.begin() + 11, r.bytes.begin() + 53),
            "RIOT has been repackaged!                 ");
  EXPECT_EQ(r.bytes.size(), b.size());
  EXPECT_EQ(r.bytes[10], 0);
}

TEST(TamperStrings, Properties) {
  const auto fx = testing::build_fixture({.ext_count = 2, .seed = 6});
  const auto img = ExecutableImage::load(fx.bytes);
  const auto* rodata = img.find_section(".rodata");
  ASSERT_NE(rodata, nullptr);
  const FileRange ro{rodata->file_offset, rodata->size};

  const auto zero = tamper_strings(fx.bytes, 1, 0, 8, ro);
  EXPECT_EQ(zero.bytes, fx.bytes);
  EXPECT_TRUE(zero.report.entries.empty());

  const auto a = tamper_strings(fx.bytes, 42, 3, 8, ro);
  const auto b = tamper_strings(fx.bytes, 42, 3, 8, ro);
  EXPECT_EQ(a.bytes, b.bytes);
  EXPECT_EQ(a.report, b.report);
  EXPECT_EQ(a.bytes.size(), fx.bytes.size());
  for (std::size_t i = 1; i < a.report.entries.size(); ++i)
    EXPECT_LT(a.report.entries[i - 1].offset, a.report.entries[i].offset);
  for (const auto& e : a.report.entries) EXPECT_TRUE(e.offset >= ro.offset && e.offset < ro.end());

  auto restored = a.bytes;
  restore(restored, a.report);
  EXPECT_EQ(restored, fx.bytes);
  EXPECT_EQ(tamper_report_from_json(tamper_report_to_json(a.report)), a.report);

  EXPECT_EQ(code_of([&] { tamper_strings(fx.bytes, 1, fx.rodata_strings.size() + 1, 8, ro); }),
            ErrorCode::NotEnoughStrings);
}

TEST(TamperBytes, Properties) {
  const auto fx = testing::build_fixture({.ext_count = 3, .seed = 2});
  const auto img = ExecutableImage::load(fx.bytes);
  const auto r = tamper_bytes(img, 7, 50, ".text", fx.ext_spans);
  ASSERT_EQ(r.report.entries.size(), 50u);
  EXPECT_EQ(r.report.mode, "bytes");
  for (const auto& e : r.report.entries) {
    EXPECT_TRUE(e.offset >= fx.text.offset && e.offset < fx.text.end());
    for (const auto& s : fx.ext_spans) EXPECT_FALSE(e.offset >= s.offset && e.offset < s.end());
    ASSERT_EQ(e.original.size(), 1u);
    EXPECT_EQ(e.replacement[0], static_cast<std::uint8_t>(e.original[0] ^ 0xff));
    EXPECT_EQ(r.bytes[e.offset], e.replacement[0]);
  }
  EXPECT_EQ(tamper_bytes(img, 7, 50, ".text", fx.ext_spans).report, r.report);
  auto restored = r.bytes;
  restore(restored, r.report);
  EXPECT_EQ(restored, fx.bytes);
  EXPECT_EQ(tamper_bytes(img, 7, 0, ".text").bytes, fx.bytes);
}

TEST(TamperBytes, Errors) {
  const auto fx = testing::build_fixture({});
  const auto img = ExecutableImage::load(fx.bytes);
  EXPECT_EQ(code_of([&] { tamper_bytes(img, 1, 1, ".nope"); }), ErrorCode::UnknownSection);
  EXPECT_EQ(code_of([&] { tamper_bytes(img, 1, fx.text.size + 1, ".text"); }), ErrorCode::NotEnoughBytes);
  const std::vector<FileRange> all = {fx.text};
  EXPECT_EQ(code_of([&] { tamper_bytes(img, 1, 1, ".text", all); }), ErrorCode::NotEnoughBytes);
}

}  // namespace
}  // namespace clbforge
