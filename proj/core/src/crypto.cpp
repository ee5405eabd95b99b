#include "clbforge/crypto.hpp"

#include <cassert>

namespace clbforge {

std::array<std::uint8_t, 4> Key32::bytes() const noexcept {
  std::array<std::uint8_t, 4> out{};
  store_le32(out, static_cast<std::uint32_t>(value));
  return out;
}

Key32 Key32::from_bytes(std::array<std::uint8_t, 4> b) noexcept {
  return Key32{static_cast<std::int32_t>(load_le32(b))};
}

std::uint32_t Salt4::as_u32() const noexcept { return load_le32(bytes); }

Salt4 Salt4::from_u32(std::uint32_t v) noexcept {
  Salt4 s;
  store_le32(s.bytes, v);
  return s;
}

void store_le32(std::span<std::uint8_t> out, std::uint32_t v) noexcept {
  assert(out.size() >= 4);
  out[0] = static_cast<std::uint8_t>(v);
  out[1] = static_cast<std::uint8_t>(v >> 8);
  out[2] = static_cast<std::uint8_t>(v >> 16);
  out[3] = static_cast<std::uint8_t>(v >> 24);
}

std::uint32_t load_le32(std::span<const std::uint8_t> in) noexcept {
  assert(in.size() >= 4);
  return static_cast<std::uint32_t>(in[0]) | (static_cast<std::uint32_t>(in[1]) << 8) |
         (static_cast<std::uint32_t>(in[2]) << 16) | (static_cast<std::uint32_t>(in[3]) << 24);
}

std::uint32_t fnv1a32_update(std::uint32_t state, std::span<const std::uint8_t> data) noexcept {
  for (std::uint8_t b : data) {
    state ^= b;
    state *= kFnvPrime;
  }
  return state;
}

Digest32 fnv1a32(std::span<const std::uint8_t> data) noexcept {
  return Digest32{fnv1a32_update(kFnvOffsetBasis, data)};
}

Digest32 cond_hash(std::int32_t x, const Salt4& salt) noexcept {
  std::array<std::uint8_t, 8> buf{};
  for (std::size_t i = 0; i < 4; ++i) buf[i] = salt.bytes[i];
  store_le32(std::span(buf).subspan(4), static_cast<std::uint32_t>(x));
  return fnv1a32(buf);
}

void xor_cipher_inplace(std::span<std::uint8_t> data, Key32 key, std::size_t phase) noexcept {
  const auto k = key.bytes();
  for (std::size_t i = 0; i < data.size(); ++i) data[i] ^= k[(i + phase) & 3u];
}

std::vector<std::uint8_t> xor_cipher(std::span<const std::uint8_t> data, Key32 key) {
  std::vector<std::uint8_t> out(data.begin(), data.end());
  xor_cipher_inplace(out, key);
  return out;
}

Salt4 derive_salt(std::uint64_t seed, std::uint32_t clb_id) noexcept {
  std::array<std::uint8_t, 12> buf{};
  for (std::size_t i = 0; i < 8; ++i) buf[i] = static_cast<std::uint8_t>(seed >> (8 * i));
  store_le32(std::span(buf).subspan(8), clb_id);
  return Salt4::from_u32(fnv1a32(buf).value);
}

}  // namespace clbforge
