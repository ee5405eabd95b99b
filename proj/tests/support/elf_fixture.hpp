#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "clbforge/elf_image.hpp"
#include "clbforge/keymap.hpp"

namespace clbforge::testing {

struct FixtureSpec {
  std::size_t ext_count = 2;
  std::uint64_t seed = 1;
  std::size_t filler_functions = 2;
  bool strip_symbols = false;
  bool duplicate_offset_magic = false;  // in the first ext_fun
  bool drop_first_ext_symbol = false;
  bool ext_at_text_start = false;  // first piece of .text is ext_fun 0
};

/// A minimal x86-64 ELF executable image with ext_funs, callers and filler
/// functions laid out in .text. The bytes are not runnable; they carry the
/// placeholder magics exactly where a compiled CLB would.
struct Fixture {
  std::vector<std::uint8_t> bytes;
  Keymap keymap;
  FileRange text;
  std::vector<FileRange> ext_spans;     // keymap order
  std::vector<FileRange> caller_spans;  // keymap order
  std::vector<std::string> rodata_strings;
};

Fixture build_fixture(const FixtureSpec& spec);

}  // namespace clbforge::testing
