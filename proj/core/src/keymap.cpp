#include "clbforge/keymap.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "clbforge/error.hpp"

namespace clbforge {

using nlohmann::json;

std::string ext_symbol_name(std::uint32_t clb_id, std::string_view caller) {
  return fmt::format("__clb_ext_{}_{}", clb_id, caller);
}

std::uint32_t len_magic_for(std::uint32_t clb_id) { return kLenMagicBase | (clb_id & 0xffffu); }

std::string hex32(std::uint32_t v) { return fmt::format("0x{:08x}", v); }

std::uint32_t parse_hex32(const std::string& s) {
  std::size_t pos = 0;
  unsigned long v = 0;
  try {
    v = std::stoul(s, &pos, 16);
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidKeymap, "bad hex value '" + s + "'");
  }
  if (pos != s.size() || v > 0xfffffffful) throw Error(ErrorCode::InvalidKeymap, "bad hex value '" + s + "'");
  return static_cast<std::uint32_t>(v);
}

std::string keymap_to_json(const Keymap& km) {
  json clbs = json::array();
  for (const auto& r : km.records) {
    clbs.push_back({
        {"id", r.clb_id},
        {"file", r.file},
        {"offset", r.offset},
        {"caller", r.caller_symbol},
        {"ext_symbol", r.ext_symbol},
        {"key_hex", hex32(static_cast<std::uint32_t>(r.key.value))},
        {"salt_hex", hex32(r.salt.as_u32())},
        {"hconst_hex", hex32(r.hconst.value)},
        {"len_magic_hex", hex32(r.len_magic)},
    });
  }
  json j = {
      {"format", kKeymapFormat},
      {"version", km.version},
      {"config", {{"hash", km.hash}, {"cipher", km.cipher}, {"seed", km.seed}}},
      {"clbs", clbs},
  };
  return j.dump(2) + "\n";
}

Keymap keymap_from_json(const std::string& text) {
  Keymap km;
  try {
    const json j = json::parse(text);
    km.version = j.at("version").get<std::string>();
    const auto& cfg = j.at("config");
    km.hash = cfg.at("hash").get<std::string>();
    km.cipher = cfg.at("cipher").get<std::string>();
    km.seed = cfg.at("seed").get<std::uint64_t>();
    for (const auto& c : j.at("clbs")) {
      ClbRecord r;
      r.clb_id = c.at("id").get<std::uint32_t>();
      r.file = c.at("file").get<std::string>();
      r.offset = c.at("offset").get<std::size_t>();
      r.caller_symbol = c.at("caller").get<std::string>();
      r.ext_symbol = c.at("ext_symbol").get<std::string>();
      r.key = Key32{static_cast<std::int32_t>(parse_hex32(c.at("key_hex").get<std::string>()))};
      r.salt = Salt4::from_u32(parse_hex32(c.at("salt_hex").get<std::string>()));
      r.hconst = Digest32{parse_hex32(c.at("hconst_hex").get<std::string>())};
      r.len_magic = parse_hex32(c.at("len_magic_hex").get<std::string>());
      km.records.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidKeymap, e.what());
  }
  if (km.hash != "fnv1a32" || km.cipher != "xor32")
    throw Error(ErrorCode::InvalidKeymap, "unsupported hash/cipher " + km.hash + "/" + km.cipher);
  std::set<std::string> symbols;
  std::set<std::uint32_t> magics;
  for (std::size_t i = 0; i < km.records.size(); ++i) {
    const auto& r = km.records[i];
    if (r.clb_id != i) throw Error(ErrorCode::InvalidKeymap, "clb ids must be sequential from 0");
    if (cond_hash(r.key.value, r.salt) != r.hconst)
      throw Error(ErrorCode::InvalidKeymap, fmt::format("clb {}: hconst does not match key/salt", r.clb_id));
    if (r.len_magic != len_magic_for(r.clb_id))
      throw Error(ErrorCode::InvalidKeymap, fmt::format("clb {}: bad len_magic", r.clb_id));
    if (!symbols.insert(r.ext_symbol).second || !magics.insert(r.len_magic).second)
      throw Error(ErrorCode::InvalidKeymap, fmt::format("clb {}: duplicate symbol or magic", r.clb_id));
  }
  return km;
}

Keymap load_keymap(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read keymap " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return keymap_from_json(ss.str());
}

void save_keymap(const Keymap& km, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write keymap " + path.string());
  out << keymap_to_json(km);
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

}  // namespace clbforge
