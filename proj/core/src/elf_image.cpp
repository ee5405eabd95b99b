#include "clbforge/elf_image.hpp"

#include <elf.h>

#include <cstring>
#include <fstream>
#include <iterator>

#include <fmt/format.h>

#include "clbforge/error.hpp"

namespace clbforge {
namespace {

template <typename T>
T read_struct(const std::vector<std::uint8_t>& bytes, std::uint64_t offset, const char* what) {
  if (offset > bytes.size() || bytes.size() - offset < sizeof(T))
    throw Error(ErrorCode::MalformedElf, fmt::format("{} at 0x{:x} is out of bounds", what, offset));
  T out;
  std::memcpy(&out, bytes.data() + offset, sizeof(T));
  return out;
}

std::string read_cstr(const std::vector<std::uint8_t>& bytes, const SectionInfo& strtab,
                      std::uint32_t index) {
  if (index >= strtab.size) throw Error(ErrorCode::MalformedElf, "string index out of bounds");
  const auto begin = strtab.file_offset + index;
  const auto limit = strtab.file_offset + strtab.size;
  auto end = begin;
  while (end < limit && bytes[end] != 0) ++end;
  return std::string(reinterpret_cast<const char*>(bytes.data() + begin), end - begin);
}

}  // namespace

bool SectionInfo::occupies_file() const noexcept { return type != SHT_NOBITS && type != SHT_NULL; }

ExecutableImage ExecutableImage::load(std::vector<std::uint8_t> bytes) {
  if (bytes.size() < EI_NIDENT || std::memcmp(bytes.data(), ELFMAG, SELFMAG) != 0)
    throw Error(ErrorCode::NotElf, "missing ELF magic");
  if (bytes[EI_CLASS] != ELFCLASS64 || bytes[EI_DATA] != ELFDATA2LSB)
    throw Error(ErrorCode::UnsupportedClassOrEndianness, "only 64-bit little-endian ELF is supported");

  ExecutableImage img;
  img.bytes_ = std::move(bytes);
  const auto& b = img.bytes_;
  const auto eh = read_struct<Elf64_Ehdr>(b, 0, "ELF header");
  if (eh.e_shoff == 0 || eh.e_shnum == 0)
    throw Error(ErrorCode::MalformedElf, "no section header table");
  if (eh.e_shentsize != sizeof(Elf64_Shdr))
    throw Error(ErrorCode::MalformedElf, "unexpected section header size");

  std::vector<Elf64_Shdr> raw;
  for (std::uint16_t i = 0; i < eh.e_shnum; ++i)
    raw.push_back(read_struct<Elf64_Shdr>(b, eh.e_shoff + std::uint64_t{i} * sizeof(Elf64_Shdr), "section header"));
  if (eh.e_shstrndx >= raw.size()) throw Error(ErrorCode::MalformedElf, "bad e_shstrndx");

  for (const auto& sh : raw) {
    SectionInfo s;
    s.type = sh.sh_type;
    s.flags = sh.sh_flags;
    s.vaddr = sh.sh_addr;
    s.file_offset = sh.sh_offset;
    s.size = sh.sh_size;
    s.executable = (sh.sh_flags & SHF_EXECINSTR) != 0;
    if (s.occupies_file() && (s.file_offset > b.size() || b.size() - s.file_offset < s.size))
      throw Error(ErrorCode::MalformedElf, "section extends past end of file");
    img.sections_.push_back(s);
  }
  const SectionInfo shstr = img.sections_[eh.e_shstrndx];
  for (std::size_t i = 0; i < raw.size(); ++i) img.sections_[i].name = read_cstr(b, shstr, raw[i].sh_name);

  bool have_text = false;
  for (std::size_t i = 0; i < img.sections_.size(); ++i) {
    const auto& s = img.sections_[i];
    if (s.name == ".text" && s.type == SHT_PROGBITS && s.executable) {
      img.text_index_ = i;
      have_text = true;
      break;
    }
  }
  if (!have_text) throw Error(ErrorCode::MalformedElf, "no executable .text section");

  bool have_symtab = false;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i].sh_type != SHT_SYMTAB) continue;
    have_symtab = true;
    if (raw[i].sh_entsize != sizeof(Elf64_Sym) || raw[i].sh_link >= raw.size())
      throw Error(ErrorCode::MalformedElf, "bad symbol table header");
    const SectionInfo strtab = img.sections_[raw[i].sh_link];
    const auto count = raw[i].sh_size / sizeof(Elf64_Sym);
    for (std::uint64_t k = 1; k < count; ++k) {
      const auto sym = read_struct<Elf64_Sym>(b, raw[i].sh_offset + k * sizeof(Elf64_Sym), "symbol");
      SymbolInfo si;
      si.name = read_cstr(b, strtab, sym.st_name);
      si.vaddr = sym.st_value;
      si.size = sym.st_size;
      si.section_index = sym.st_shndx;
      si.type = ELF64_ST_TYPE(sym.st_info);
      si.bind = ELF64_ST_BIND(sym.st_info);
      img.symbols_.push_back(std::move(si));
    }
  }
  if (!have_symtab)
    throw Error(ErrorCode::SymbolsRequired, "executable has no symbol table (built without symbols or stripped)");
  return img;
}

ExecutableImage ExecutableImage::load_file(const std::filesystem::path& path) {
  return load(read_file_bytes(path));
}

FileRange ExecutableImage::text_range() const { return {text().file_offset, text().size}; }

const SectionInfo* ExecutableImage::find_section(std::string_view name) const {
  for (const auto& s : sections_)
    if (s.name == name) return &s;
  return nullptr;
}

std::vector<const SymbolInfo*> ExecutableImage::find_symbols(std::string_view name) const {
  std::vector<const SymbolInfo*> out;
  for (const auto& s : symbols_)
    if (s.name == name && s.section_index != SHN_UNDEF) out.push_back(&s);
  return out;
}

std::optional<std::uint64_t> ExecutableImage::vaddr_to_offset(std::uint64_t vaddr) const {
  for (const auto& s : sections_) {
    if (!s.occupies_file() || (s.flags & SHF_ALLOC) == 0) continue;
    if (vaddr >= s.vaddr && vaddr < s.vaddr + s.size) return s.file_offset + (vaddr - s.vaddr);
  }
  return std::nullopt;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes,
                       const std::filesystem::path* mode_from) {
  namespace fs = std::filesystem;
  const fs::path tmp = path.string() + ".clbforge-tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Error(ErrorCode::Io, "write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  if (mode_from != nullptr) fs::permissions(tmp, fs::status(*mode_from).permissions(), ec);
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::Io, "cannot move output into place: " + path.string());
  }
}

}  // namespace clbforge
