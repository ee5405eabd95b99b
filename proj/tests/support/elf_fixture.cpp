#include "elf_fixture.hpp"

#include <elf.h>

#include <algorithm>
#include <cstring>
#include <random>

#include "clbforge/crypto.hpp"

namespace clbforge::testing {
namespace {

constexpr std::uint64_t kTextOffset = 0x1000;
constexpr std::uint64_t kTextVaddr = 0x401000;

// No byte of any magic falls in this range, so filler never forms one.
std::uint8_t filler_byte(std::mt19937_64& rng) { return static_cast<std::uint8_t>(0x40 + rng() % 0x40); }

std::size_t uniform(std::mt19937_64& rng, std::size_t lo, std::size_t hi) { return lo + rng() % (hi - lo + 1); }

struct Piece {
  std::string name;
  std::vector<std::uint8_t> code;
  int ext = -1;     // index of the CLB when an ext_fun
  int caller = -1;  // index of the CLB when a caller
};

std::vector<std::uint8_t> body_with_magics(std::mt19937_64& rng, std::size_t size,
                                           const std::vector<std::uint32_t>& magics) {
  std::vector<std::uint8_t> code(size);
  for (auto& b : code) b = filler_byte(rng);
  std::vector<std::size_t> slots(size / 4);
  for (std::size_t i = 0; i < slots.size(); ++i) slots[i] = i * 4;
  std::shuffle(slots.begin(), slots.end(), rng);
  for (std::size_t m = 0; m < magics.size(); ++m) store_le32(std::span(code).subspan(slots[m], 4), magics[m]);
  return code;
}

template <typename T>
void put(std::vector<std::uint8_t>& out, std::uint64_t offset, const T& v) {
  if (out.size() < offset + sizeof(T)) out.resize(offset + sizeof(T));
  std::memcpy(out.data() + offset, &v, sizeof(T));
}

std::uint32_t add_name(std::string& table, const std::string& name) {
  const auto off = static_cast<std::uint32_t>(table.size());
  table += name;
  table += '\0';
  return off;
}

}  // namespace

Fixture build_fixture(const FixtureSpec& spec) {
  std::mt19937_64 rng(spec.seed * 0x9e3779b97f4a7c15ull + spec.ext_count);
  Fixture fx;
  fx.keymap.seed = spec.seed;

  std::vector<Piece> pieces;
  for (std::size_t i = 0; i < spec.ext_count; ++i) {
    const auto id = static_cast<std::uint32_t>(i);
    ClbRecord r;
    r.clb_id = id;
    r.file = "fixture.c";
    r.offset = 100 * i;
    r.caller_symbol = "fixture_caller_" + std::to_string(i);
    r.ext_symbol = ext_symbol_name(id, r.caller_symbol);
    r.key = Key32{static_cast<std::int32_t>(rng() | 1u)};
    r.salt = derive_salt(spec.seed, id);
    r.hconst = cond_hash(r.key.value, r.salt);
    r.len_magic = len_magic_for(id);
    fx.keymap.records.push_back(r);

    std::vector<std::uint32_t> magics = {kOffsetMagic, kCountMagic, kControlMagic};
    if (i == 0 && spec.duplicate_offset_magic) magics.push_back(kOffsetMagic);
    pieces.push_back({r.ext_symbol, body_with_magics(rng, uniform(rng, 24, 200) & ~std::size_t{3}, magics),
                      static_cast<int>(i), -1});
    pieces.push_back({r.caller_symbol, body_with_magics(rng, uniform(rng, 16, 120) & ~std::size_t{3}, {r.len_magic}),
                      -1, static_cast<int>(i)});
  }
  for (std::size_t i = 0; i < spec.filler_functions; ++i)
    pieces.push_back({"fixture_helper_" + std::to_string(i), body_with_magics(rng, uniform(rng, 8, 200), {}), -1, -1});
  std::shuffle(pieces.begin(), pieces.end(), rng);
  if (spec.ext_at_text_start && spec.ext_count > 0) {
    auto it = std::find_if(pieces.begin(), pieces.end(), [](const Piece& p) { return p.ext == 0; });
    std::rotate(pieces.begin(), it, it + 1);
  }

  // .text
  std::vector<std::uint8_t> text;
  struct Placed {
    std::string name;
    std::uint64_t offset;
    std::uint64_t size;
  };
  std::vector<Placed> placed;
  fx.ext_spans.resize(spec.ext_count);
  fx.caller_spans.resize(spec.ext_count);
  auto pad = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) text.push_back(filler_byte(rng));
  };
  if (!spec.ext_at_text_start) pad(uniform(rng, 0, 64));
  for (const auto& p : pieces) {
    const std::uint64_t at = kTextOffset + text.size();
    text.insert(text.end(), p.code.begin(), p.code.end());
    placed.push_back({p.name, at, p.code.size()});
    if (p.ext >= 0) fx.ext_spans[static_cast<std::size_t>(p.ext)] = {at, p.code.size()};
    if (p.caller >= 0) fx.caller_spans[static_cast<std::size_t>(p.caller)] = {at, p.code.size()};
    pad(uniform(rng, 0, 32));
  }
  fx.text = {kTextOffset, text.size()};

  // .rodata
  std::vector<std::uint8_t> rodata;
  for (std::size_t i = 0; i < 4; ++i) {
    std::string s = "fixture message number " + std::to_string(i) + " ready";
    fx.rodata_strings.push_back(s);
    rodata.insert(rodata.end(), s.begin(), s.end());
    rodata.push_back(0);
  }

  std::vector<std::uint8_t> out(kTextOffset, 0);
  out.insert(out.end(), text.begin(), text.end());
  while (out.size() % 16 != 0) out.push_back(0);
  const std::uint64_t rodata_off = out.size();
  out.insert(out.end(), rodata.begin(), rodata.end());
  while (out.size() % 8 != 0) out.push_back(0);

  std::string shstr(1, '\0');
  std::string strtab(1, '\0');
  std::vector<Elf64_Shdr> sh(1, Elf64_Shdr{});

  Elf64_Shdr text_sh{};
  text_sh.sh_name = add_name(shstr, ".text");
  text_sh.sh_type = SHT_PROGBITS;
  text_sh.sh_flags = SHF_ALLOC | SHF_EXECINSTR;
  text_sh.sh_addr = kTextVaddr;
  text_sh.sh_offset = kTextOffset;
  text_sh.sh_size = text.size();
  text_sh.sh_addralign = 16;
  sh.push_back(text_sh);
  constexpr std::uint16_t kTextIndex = 1;

  Elf64_Shdr ro_sh{};
  ro_sh.sh_name = add_name(shstr, ".rodata");
  ro_sh.sh_type = SHT_PROGBITS;
  ro_sh.sh_flags = SHF_ALLOC;
  ro_sh.sh_addr = kTextVaddr + (rodata_off - kTextOffset);
  ro_sh.sh_offset = rodata_off;
  ro_sh.sh_size = rodata.size();
  ro_sh.sh_addralign = 1;
  sh.push_back(ro_sh);

  if (!spec.strip_symbols) {
    std::vector<Elf64_Sym> syms(1, Elf64_Sym{});
    for (const auto& p : placed) {
      if (spec.drop_first_ext_symbol && spec.ext_count > 0 && p.name == fx.keymap.records[0].ext_symbol) continue;
      Elf64_Sym s{};
      s.st_name = add_name(strtab, p.name);
      s.st_info = ELF64_ST_INFO(STB_GLOBAL, STT_FUNC);
      s.st_shndx = kTextIndex;
      s.st_value = kTextVaddr + (p.offset - kTextOffset);
      s.st_size = p.size;
      syms.push_back(s);
    }
    const std::uint64_t symtab_off = out.size();
    for (const auto& s : syms) put(out, out.size(), s);
    const std::uint64_t strtab_off = out.size();
    out.insert(out.end(), strtab.begin(), strtab.end());

    Elf64_Shdr sym_sh{};
    sym_sh.sh_name = add_name(shstr, ".symtab");
    sym_sh.sh_type = SHT_SYMTAB;
    sym_sh.sh_offset = symtab_off;
    sym_sh.sh_size = syms.size() * sizeof(Elf64_Sym);
    sym_sh.sh_link = static_cast<std::uint32_t>(sh.size() + 1);
    sym_sh.sh_info = 1;
    sym_sh.sh_entsize = sizeof(Elf64_Sym);
    sym_sh.sh_addralign = 8;
    sh.push_back(sym_sh);

    Elf64_Shdr str_sh{};
    str_sh.sh_name = add_name(shstr, ".strtab");
    str_sh.sh_type = SHT_STRTAB;
    str_sh.sh_offset = strtab_off;
    str_sh.sh_size = strtab.size();
    str_sh.sh_addralign = 1;
    sh.push_back(str_sh);
  }

  Elf64_Shdr shstr_sh{};
  shstr_sh.sh_name = add_name(shstr, ".shstrtab");
  shstr_sh.sh_type = SHT_STRTAB;
  shstr_sh.sh_offset = out.size();
  shstr_sh.sh_size = shstr.size();
  shstr_sh.sh_addralign = 1;
  out.insert(out.end(), shstr.begin(), shstr.end());
  sh.push_back(shstr_sh);
  while (out.size() % 8 != 0) out.push_back(0);

  const std::uint64_t shoff = out.size();
  for (const auto& s : sh) put(out, out.size(), s);

  Elf64_Ehdr eh{};
  std::memcpy(eh.e_ident, ELFMAG, SELFMAG);
  eh.e_ident[EI_CLASS] = ELFCLASS64;
  eh.e_ident[EI_DATA] = ELFDATA2LSB;
  eh.e_ident[EI_VERSION] = EV_CURRENT;
  eh.e_type = ET_EXEC;
  eh.e_machine = EM_X86_64;
  eh.e_version = EV_CURRENT;
  eh.e_entry = kTextVaddr;
  eh.e_shoff = shoff;
  eh.e_ehsize = sizeof(Elf64_Ehdr);
  eh.e_shentsize = sizeof(Elf64_Shdr);
  eh.e_shnum = static_cast<std::uint16_t>(sh.size());
  eh.e_shstrndx = static_cast<std::uint16_t>(sh.size() - 1);
  put(out, 0, eh);

  fx.bytes = std::move(out);
  return fx;
}

}  // namespace clbforge::testing
