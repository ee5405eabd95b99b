#include "clbforge/attack.hpp"

#include <algorithm>
#include <random>

#include <fmt/format.h>
#include <json.hpp>

#include "clbforge/error.hpp"

namespace clbforge {
namespace {

using nlohmann::json;

bool printable(std::uint8_t c) { return c >= 0x20 && c <= 0x7e; }

/// First n entries of a seeded partial Fisher-Yates shuffle of [0, total).
std::vector<std::size_t> choose(std::size_t total, std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(total);
  for (std::size_t i = 0; i < total; ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k < n; ++k) {
    const auto j = k + static_cast<std::size_t>(rng() % (total - k));
    std::swap(idx[k], idx[j]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::string to_hex(const std::vector<std::uint8_t>& v) {
  std::string out;
  for (auto c : v) out += fmt::format("{:02x}", c);
  return out;
}

std::vector<std::uint8_t> from_hex(const std::string& s) {
  if (s.size() % 2 != 0) throw Error(ErrorCode::InvalidReport, "odd-length hex string");
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i < s.size(); i += 2) {
    const auto v = std::stoul(s.substr(i, 2), nullptr, 16);
    out.push_back(static_cast<std::uint8_t>(v));
  }
  return out;
}

}  // namespace

std::vector<StringSite> find_strings(std::span<const std::uint8_t> bytes, std::size_t min_len,
                                     std::optional<FileRange> within) {
  std::uint64_t begin = 0, end = bytes.size();
  if (within) {
    begin = std::min<std::uint64_t>(within->offset, bytes.size());
    end = std::min<std::uint64_t>(within->end(), bytes.size());
  }
  std::vector<StringSite> out;
  std::uint64_t i = begin;
  while (i < end) {
    if (!printable(bytes[i])) {
      ++i;
      continue;
    }
    auto j = i;
    while (j < end && printable(bytes[j])) ++j;
    if (j - i >= min_len && j - i > 0)
      out.push_back({i, std::string(reinterpret_cast<const char*>(bytes.data() + i), j - i)});
    i = j;
  }
  return out;
}

TamperResult tamper_strings(std::span<const std::uint8_t> bytes, std::uint64_t seed, std::size_t n,
                            std::size_t min_len, std::optional<FileRange> within,
                            std::string_view replacement) {
  const auto sites = find_strings(bytes, min_len, within);
  if (n > sites.size())
    throw Error(ErrorCode::NotEnoughStrings,
                fmt::format("{} strings requested, {} of length >= {} available", n, sites.size(), min_len));
  TamperResult r;
  r.bytes.assign(bytes.begin(), bytes.end());
  r.report.mode = "strings";
  r.report.seed = seed;
  for (auto k : choose(sites.size(), n, seed)) {
    const auto& s = sites[k];
    std::string text(replacement.substr(0, std::min(replacement.size(), s.text.size())));
    text.resize(s.text.size(), ' ');
    TamperEntry e;
    e.offset = s.offset;
    e.original.assign(s.text.begin(), s.text.end());
    e.replacement.assign(text.begin(), text.end());
    std::copy(e.replacement.begin(), e.replacement.end(), r.bytes.begin() + static_cast<std::ptrdiff_t>(s.offset));
    r.report.entries.push_back(std::move(e));
  }
  return r;
}

TamperResult tamper_bytes(const ExecutableImage& image, std::uint64_t seed, std::size_t n,
                          std::string_view section, std::span<const FileRange> exclude) {
  const auto* sec = image.find_section(section);
  if (sec == nullptr || !sec->occupies_file())
    throw Error(ErrorCode::UnknownSection, fmt::format("no section '{}' with file contents", section));
  std::vector<std::uint64_t> candidates;
  for (auto off = sec->file_offset; off < sec->file_offset + sec->size; ++off) {
    const bool excluded = std::any_of(exclude.begin(), exclude.end(),
                                      [&](FileRange r) { return off >= r.offset && off < r.end(); });
    if (!excluded) candidates.push_back(off);
  }
  if (n > candidates.size())
    throw Error(ErrorCode::NotEnoughBytes,
                fmt::format("{} byte flips requested, {} eligible bytes in {}", n, candidates.size(), section));
  TamperResult r;
  r.bytes = image.bytes();
  r.report.mode = "bytes";
  r.report.seed = seed;
  for (auto k : choose(candidates.size(), n, seed)) {
    const auto off = candidates[k];
    TamperEntry e;
    e.offset = off;
    e.original = {r.bytes[off]};
    e.replacement = {static_cast<std::uint8_t>(r.bytes[off] ^ 0xffu)};
    r.bytes[off] = e.replacement[0];
    r.report.entries.push_back(std::move(e));
  }
  return r;
}

void restore(std::span<std::uint8_t> bytes, const TamperReport& report) {
  for (const auto& e : report.entries) {
    if (e.offset + e.original.size() > bytes.size())
      throw Error(ErrorCode::InvalidReport, "tamper entry outside the file");
    std::copy(e.original.begin(), e.original.end(), bytes.begin() + static_cast<std::ptrdiff_t>(e.offset));
  }
}

std::string tamper_report_to_json(const TamperReport& report) {
  json entries = json::array();
  for (const auto& e : report.entries)
    entries.push_back({{"offset", e.offset}, {"original_hex", to_hex(e.original)}, {"new_hex", to_hex(e.replacement)}});
  json j = {{"mode", report.mode}, {"seed", report.seed}, {"entries", entries}};
  return j.dump(2) + "\n";
}

TamperReport tamper_report_from_json(const std::string& text) {
  try {
    const auto j = json::parse(text);
    TamperReport r;
    r.mode = j.at("mode").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& e : j.at("entries")) {
      TamperEntry t;
      t.offset = e.at("offset").get<std::uint64_t>();
      t.original = from_hex(e.at("original_hex").get<std::string>());
      t.replacement = from_hex(e.at("new_hex").get<std::string>());
      if (t.original.size() != t.replacement.size())
        throw Error(ErrorCode::InvalidReport, "tamper entry lengths differ");
      r.entries.push_back(std::move(t));
    }
    return r;
  } catch (const Error&) {
    throw;
  } catch (const std::exception& ex) {
    throw Error(ErrorCode::InvalidReport, std::string("malformed tamper report: ") + ex.what());
  }
}

}  // namespace clbforge
