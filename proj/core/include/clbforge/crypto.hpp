#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace clbforge {

struct Digest32 {
  std::uint32_t value = 0;
  friend bool operator==(Digest32, Digest32) = default;
};

/// The QC constant used as the cipher key. Its byte form is the 4-byte
/// little-endian encoding of the two's-complement value.
struct Key32 {
  std::int32_t value = 0;

  std::array<std::uint8_t, 4> bytes() const noexcept;
  static Key32 from_bytes(std::array<std::uint8_t, 4> b) noexcept;
  friend bool operator==(Key32, Key32) = default;
};

struct Salt4 {
  std::array<std::uint8_t, 4> bytes{};

  /// Little-endian reading of the salt; this is the literal emitted into C.
  std::uint32_t as_u32() const noexcept;
  static Salt4 from_u32(std::uint32_t v) noexcept;
  friend bool operator==(const Salt4&, const Salt4&) = default;
};

inline constexpr std::uint32_t kFnvOffsetBasis = 0x811c9dc5u;
inline constexpr std::uint32_t kFnvPrime = 0x01000193u;

Digest32 fnv1a32(std::span<const std::uint8_t> data) noexcept;

/// Continues an FNV-1a state; fnv1a32(a ++ b) == fnv1a32_update(fnv1a32(a), b).
std::uint32_t fnv1a32_update(std::uint32_t state, std::span<const std::uint8_t> data) noexcept;

/// H(x, salt) = fnv1a32(salt || le32(x)).
Digest32 cond_hash(std::int32_t x, const Salt4& salt) noexcept;

std::vector<std::uint8_t> xor_cipher(std::span<const std::uint8_t> data, Key32 key);

/// In-place variant; `phase` is the index of data[0] within the key stream.
void xor_cipher_inplace(std::span<std::uint8_t> data, Key32 key, std::size_t phase = 0) noexcept;

/// salt = le32(fnv1a32(le64(seed) || le32(clb_id))).
Salt4 derive_salt(std::uint64_t seed, std::uint32_t clb_id) noexcept;

void store_le32(std::span<std::uint8_t> out, std::uint32_t v) noexcept;
std::uint32_t load_le32(std::span<const std::uint8_t> in) noexcept;

}  // namespace clbforge
