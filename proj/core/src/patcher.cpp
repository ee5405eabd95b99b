#include "clbforge/patcher.hpp"

#include <algorithm>
#include <cstring>

#include <fmt/format.h>
#include <json.hpp>

#include "clbforge/error.hpp"

namespace clbforge {
namespace {

using nlohmann::json;

FileRange symbol_range(const ExecutableImage& image, const SymbolInfo& sym) {
  const auto& text = image.text();
  if (sym.vaddr < text.vaddr || sym.vaddr - text.vaddr > text.size || sym.size > text.size - (sym.vaddr - text.vaddr))
    throw Error(ErrorCode::SymbolOutsideText, fmt::format("symbol {} lies outside .text", sym.name));
  return {text.file_offset + (sym.vaddr - text.vaddr), sym.size};
}

bool overlaps(FileRange a, FileRange b) { return a.offset < b.end() && b.offset < a.end(); }

std::vector<std::uint64_t> find_le32(const std::vector<std::uint8_t>& bytes, FileRange range,
                                     std::uint32_t magic) {
  std::vector<std::uint64_t> hits;
  if (range.size < 4) return hits;
  std::uint8_t pat[4];
  store_le32(pat, magic);
  for (auto p = range.offset; p + 4 <= range.end(); ++p)
    if (std::memcmp(bytes.data() + p, pat, 4) == 0) hits.push_back(p);
  return hits;
}

std::uint64_t unique_site(const std::vector<std::uint64_t>& hits, std::string_view kind, std::string_view where) {
  if (hits.empty())
    throw Error(ErrorCode::MissingPlaceholder, fmt::format("{} placeholder not found in {}", kind, where));
  if (hits.size() > 1)
    throw Error(ErrorCode::AmbiguousPlaceholder,
                fmt::format("{} placeholder occurs {} times in {}", kind, hits.size(), where));
  return hits.front();
}

FileRange scope_range(const ExecutableImage& image, RegionScope scope) {
  if (scope == RegionScope::File) return {0, image.bytes().size()};
  return image.text_range();
}

Digest32 digest_of(const std::vector<std::uint8_t>& bytes, FileRange r) {
  return fnv1a32(std::span<const std::uint8_t>(bytes).subspan(r.offset, r.size));
}

}  // namespace

std::vector<FunctionSpan> locate_ext_functions(const ExecutableImage& image, const Keymap& keymap) {
  std::vector<FunctionSpan> spans;
  for (const auto& rec : keymap.records) {
    const auto syms = image.find_symbols(rec.ext_symbol);
    if (syms.empty()) throw Error(ErrorCode::MissingSymbol, "symbol not found: " + rec.ext_symbol);
    if (syms.size() > 1) throw Error(ErrorCode::DuplicateSymbol, "symbol defined more than once: " + rec.ext_symbol);
    if (syms.front()->size == 0) throw Error(ErrorCode::ZeroSizeSymbol, "symbol has size 0: " + rec.ext_symbol);
    const auto r = symbol_range(image, *syms.front());
    spans.push_back({&rec, r.offset, r.size});
  }
  std::vector<const FunctionSpan*> sorted;
  for (const auto& s : spans) sorted.push_back(&s);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->offset < b->offset; });
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (overlaps(sorted[i - 1]->range(), sorted[i]->range()))
      throw Error(ErrorCode::OverlappingSpans, fmt::format("{} overlaps {}", sorted[i - 1]->record->ext_symbol,
                                                           sorted[i]->record->ext_symbol));
  return spans;
}

PlaceholderSites locate_placeholders(const ExecutableImage& image, const FunctionSpan& span) {
  const auto& rec = *span.record;
  const auto& b = image.bytes();
  PlaceholderSites s;
  s.offset_site = unique_site(find_le32(b, span.range(), kOffsetMagic), "offset", rec.ext_symbol);
  s.count_site = unique_site(find_le32(b, span.range(), kCountMagic), "count", rec.ext_symbol);
  s.control_site = unique_site(find_le32(b, span.range(), kControlMagic), "control", rec.ext_symbol);

  // Static callers in different files can share a name; the magic is unique per CLB.
  const auto callers = image.find_symbols(rec.caller_symbol);
  if (callers.empty()) throw Error(ErrorCode::MissingSymbol, "caller symbol not found: " + rec.caller_symbol);
  std::vector<std::uint64_t> hits;
  for (const auto* c : callers) {
    if (c->size == 0) continue;
    const auto r = symbol_range(image, *c);
    if (overlaps(r, span.range()))
      throw Error(ErrorCode::OverlappingSpans, fmt::format("caller {} overlaps {}", rec.caller_symbol, rec.ext_symbol));
    const auto h = find_le32(b, r, rec.len_magic);
    hits.insert(hits.end(), h.begin(), h.end());
  }
  s.len_site = unique_site(hits, "length", rec.caller_symbol);
  return s;
}

void patch_lengths(ExecutableImage& image, std::span<const FunctionSpan> spans,
                   std::span<const PlaceholderSites> sites) {
  auto& b = image.bytes();
  for (std::size_t i = 0; i < spans.size(); ++i)
    store_le32(std::span<std::uint8_t>(b).subspan(sites[i].len_site, 4), static_cast<std::uint32_t>(spans[i].size));
}

std::string_view to_string(Direction d) noexcept { return d == Direction::Forward ? "forward" : "backward"; }

FrontierState::FrontierState(FileRange scope, std::vector<FileRange> unprocessed)
    : scope_(scope), spans_(std::move(unprocessed)) {
  std::sort(spans_.begin(), spans_.end(), [](FileRange a, FileRange b) { return a.offset < b.offset; });
}

std::uint64_t FrontierState::low() const noexcept { return spans_.empty() ? scope_.end() : spans_.front().offset; }

std::uint64_t FrontierState::high() const noexcept {
  if (spans_.empty()) return scope_.offset;
  std::uint64_t h = 0;
  for (const auto& s : spans_) h = std::max(h, s.end());
  return h;
}

FileRange FrontierState::pop_lowest() {
  const auto r = spans_.front();
  spans_.erase(spans_.begin());
  return r;
}

FileRange FrontierState::pop_highest() {
  auto it = std::max_element(spans_.begin(), spans_.end(),
                             [](FileRange a, FileRange b) { return a.end() < b.end(); });
  const auto r = *it;
  spans_.erase(it);
  return r;
}

RegionChoice select_region(const FrontierState& frontier, Direction direction, std::size_t min_region_bytes) {
  const auto scope = frontier.scope();
  const FileRange fwd{scope.offset, frontier.low() > scope.offset ? frontier.low() - scope.offset : 0};
  const FileRange bwd{frontier.high(), scope.end() > frontier.high() ? scope.end() - frontier.high() : 0};
  const FileRange preferred = direction == Direction::Forward ? fwd : bwd;
  const FileRange other = direction == Direction::Forward ? bwd : fwd;
  const Direction flipped = direction == Direction::Forward ? Direction::Backward : Direction::Forward;
  if (preferred.size >= min_region_bytes) return {preferred, direction, false, false};
  if (other.size >= min_region_bytes) return {other, flipped, true, false};
  if (other.size > preferred.size) return {other, flipped, true, true};
  return {preferred, direction, false, true};
}

std::uint64_t covered_bytes(std::span<const FileRange> regions, FileRange bound) {
  std::vector<std::pair<std::uint64_t, std::uint64_t>> iv;
  for (const auto& r : regions) {
    const auto b = std::max(r.offset, bound.offset);
    const auto e = std::min(r.end(), bound.end());
    if (b < e) iv.emplace_back(b, e);
  }
  std::sort(iv.begin(), iv.end());
  std::uint64_t total = 0, cur_b = 0, cur_e = 0;
  bool open = false;
  for (const auto& [b, e] : iv) {
    if (open && b <= cur_e) {
      cur_e = std::max(cur_e, e);
      continue;
    }
    if (open) total += cur_e - cur_b;
    cur_b = b;
    cur_e = e;
    open = true;
  }
  if (open) total += cur_e - cur_b;
  return total;
}

PatchReport run_pipeline(ExecutableImage& image, const Keymap& keymap, const Config& cfg) {
  ExecutableImage work = image;
  PatchReport report;
  report.scope = cfg.region_scope;
  report.text = work.text_range();
  report.scope_range = scope_range(work, cfg.region_scope);
  report.file_size = work.bytes().size();

  const auto spans = locate_ext_functions(work, keymap);
  std::vector<PlaceholderSites> sites;
  for (const auto& s : spans) sites.push_back(locate_placeholders(work, s));
  for (std::size_t i = 0; i < spans.size(); ++i)
    for (std::size_t j = 0; j < spans.size(); ++j)
      if (overlaps({sites[i].len_site, 4}, spans[j].range()))
        throw Error(ErrorCode::OverlappingSpans,
                    fmt::format("length site of {} lies inside {}", spans[i].record->ext_symbol,
                                spans[j].record->ext_symbol));

  patch_lengths(work, spans, sites);

  std::vector<FileRange> unprocessed;
  for (const auto& s : spans) unprocessed.push_back(s.range());
  FrontierState frontier(report.scope_range, unprocessed);
  report.entries.resize(spans.size());
  std::vector<FileRange> regions;
  auto& b = work.bytes();

  for (std::size_t step = 0; !frontier.empty(); ++step) {
    const Direction pop = step % 2 == 0 ? Direction::Forward : Direction::Backward;
    // Region first: the frontier still holds the span being processed.
    const auto choice = select_region(frontier, pop, cfg.min_region_bytes);
    const auto target = pop == Direction::Forward ? frontier.pop_lowest() : frontier.pop_highest();
    const auto idx = static_cast<std::size_t>(
        std::find_if(spans.begin(), spans.end(), [&](const FunctionSpan& s) { return s.offset == target.offset; }) -
        spans.begin());
    const auto& span = spans[idx];
    const auto& rec = *span.record;
    if (choice.undersized)
      report.warnings.push_back(fmt::format("{}: digest region of {} bytes is below min_region_bytes ({})",
                                            rec.ext_symbol, choice.region.size, cfg.min_region_bytes));

    const auto digest = digest_of(b, choice.region);
    auto bytes = std::span<std::uint8_t>(b);
    store_le32(bytes.subspan(sites[idx].offset_site, 4), static_cast<std::uint32_t>(choice.region.offset));
    store_le32(bytes.subspan(sites[idx].count_site, 4), static_cast<std::uint32_t>(choice.region.size));
    store_le32(bytes.subspan(sites[idx].control_site, 4), digest.value);
    xor_cipher_inplace(bytes.subspan(span.offset, span.size), rec.key);

    regions.push_back(choice.region);
    auto& e = report.entries[idx];
    e.clb_id = rec.clb_id;
    e.symbol = rec.ext_symbol;
    e.span = span.range();
    e.sites = sites[idx];
    e.region = choice.region;
    e.digest = digest;
    e.direction = choice.direction;
    e.step = step;
    e.coverage_after =
        report.text.size == 0 ? 0.0
                              : static_cast<double>(covered_bytes(regions, report.text)) / static_cast<double>(report.text.size);
  }
  report.coverage = report.text.size == 0 ? 0.0
                                          : static_cast<double>(covered_bytes(regions, report.text)) /
                                                static_cast<double>(report.text.size);
  image = std::move(work);
  return report;
}

bool VerifyReport::all_pass() const noexcept {
  return std::all_of(entries.begin(), entries.end(), [](const VerifyEntry& e) { return e.pass; });
}

VerifyReport verify(const ExecutableImage& image, const Keymap& keymap, const PatchReport& report) {
  VerifyReport out;
  const auto& b = image.bytes();
  for (const auto& rec : keymap.records) {
    VerifyEntry v;
    v.clb_id = rec.clb_id;
    v.symbol = rec.ext_symbol;
    auto fail = [&](std::string why) {
      v.pass = false;
      v.detail = std::move(why);
      out.entries.push_back(v);
    };
    const auto it = std::find_if(report.entries.begin(), report.entries.end(),
                                 [&](const PatchEntry& e) { return e.clb_id == rec.clb_id; });
    if (it == report.entries.end()) {
      fail("no patch report entry");
      continue;
    }
    const auto syms = image.find_symbols(rec.ext_symbol);
    if (syms.size() != 1) {
      fail("symbol missing or duplicated");
      continue;
    }
    FileRange span;
    try {
      span = symbol_range(image, *syms.front());
    } catch (const Error& e) {
      fail(e.what());
      continue;
    }
    if (span != it->span) {
      fail("symbol span differs from the patch report");
      continue;
    }
    const auto& s = it->sites;
    const auto in_span = [&](std::uint64_t site) { return site >= span.offset && site + 4 <= span.end(); };
    if (!in_span(s.offset_site) || !in_span(s.count_site) || !in_span(s.control_site) ||
        s.len_site + 4 > b.size()) {
      fail("placeholder sites out of range");
      continue;
    }
    std::vector<std::uint8_t> plain(b.begin() + static_cast<std::ptrdiff_t>(span.offset),
                                    b.begin() + static_cast<std::ptrdiff_t>(span.end()));
    xor_cipher_inplace(plain, rec.key);
    const auto rd = [&](std::uint64_t site) {
      return load_le32(std::span<const std::uint8_t>(plain).subspan(site - span.offset, 4));
    };
    const auto offset = rd(s.offset_site), count = rd(s.count_site), control = rd(s.control_site);
    v.stored = Digest32{control};
    if (offset == kOffsetMagic || count == kCountMagic || control == kControlMagic) {
      fail("placeholder still holds its magic");
      continue;
    }
    if (load_le32(std::span<const std::uint8_t>(b).subspan(s.len_site, 4)) != span.size) {
      fail("length site does not hold the function size");
      continue;
    }
    if (std::uint64_t{offset} + count > b.size()) {
      fail("region extends past end of file");
      continue;
    }
    v.recomputed = digest_of(b, {offset, count});
    if (v.recomputed != v.stored) {
      fail(fmt::format("digest mismatch over [{:#x}, {:#x})", offset, std::uint64_t{offset} + count));
      continue;
    }
    v.pass = true;
    out.entries.push_back(v);
  }
  return out;
}

std::string patch_report_to_json(const PatchReport& report) {
  json clbs = json::array();
  for (const auto& e : report.entries) {
    clbs.push_back({
        {"id", e.clb_id},
        {"symbol", e.symbol},
        {"file_offset", e.span.offset},
        {"size", e.span.size},
        {"region_offset", e.region.offset},
        {"region_count", e.region.size},
        {"digest_hex", hex32(e.digest.value)},
        {"direction", to_string(e.direction)},
        {"step", e.step},
        {"coverage_after", e.coverage_after},
        {"sites",
         {{"offset", e.sites.offset_site},
          {"count", e.sites.count_site},
          {"control", e.sites.control_site},
          {"len", e.sites.len_site}}},
    });
  }
  json j = {
      {"scope", to_string(report.scope)},
      {"text", {{"file_offset", report.text.offset}, {"size", report.text.size}}},
      {"scope_range", {{"file_offset", report.scope_range.offset}, {"size", report.scope_range.size}}},
      {"file_size", report.file_size},
      {"coverage", report.coverage},
      {"warnings", report.warnings},
      {"clbs", clbs},
  };
  return j.dump(2) + "\n";
}

PatchReport patch_report_from_json(const std::string& text) {
  try {
    const auto j = json::parse(text);
    PatchReport r;
    const auto scope = j.at("scope").get<std::string>();
    if (scope == "text") r.scope = RegionScope::Text;
    else if (scope == "file") r.scope = RegionScope::File;
    else throw Error(ErrorCode::InvalidReport, "unknown scope " + scope);
    r.text = {j.at("text").at("file_offset").get<std::uint64_t>(), j.at("text").at("size").get<std::uint64_t>()};
    r.scope_range = {j.at("scope_range").at("file_offset").get<std::uint64_t>(),
                     j.at("scope_range").at("size").get<std::uint64_t>()};
    r.file_size = j.at("file_size").get<std::uint64_t>();
    r.coverage = j.at("coverage").get<double>();
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    for (const auto& c : j.at("clbs")) {
      PatchEntry e;
      e.clb_id = c.at("id").get<std::uint32_t>();
      e.symbol = c.at("symbol").get<std::string>();
      e.span = {c.at("file_offset").get<std::uint64_t>(), c.at("size").get<std::uint64_t>()};
      e.region = {c.at("region_offset").get<std::uint64_t>(), c.at("region_count").get<std::uint64_t>()};
      e.digest = Digest32{parse_hex32(c.at("digest_hex").get<std::string>())};
      const auto dir = c.at("direction").get<std::string>();
      if (dir != "forward" && dir != "backward") throw Error(ErrorCode::InvalidReport, "bad direction " + dir);
      e.direction = dir == "forward" ? Direction::Forward : Direction::Backward;
      e.step = c.at("step").get<std::size_t>();
      e.coverage_after = c.at("coverage_after").get<double>();
      const auto& s = c.at("sites");
      e.sites = {s.at("offset").get<std::uint64_t>(), s.at("count").get<std::uint64_t>(),
                 s.at("control").get<std::uint64_t>(), s.at("len").get<std::uint64_t>()};
      r.entries.push_back(std::move(e));
    }
    return r;
  } catch (const Error&) {
    throw;
  } catch (const std::exception& ex) {
    throw Error(ErrorCode::InvalidReport, std::string("malformed patch report: ") + ex.what());
  }
}

std::string verify_report_to_json(const VerifyReport& report) {
  json clbs = json::array();
  for (const auto& e : report.entries)
    clbs.push_back({{"id", e.clb_id},
                    {"symbol", e.symbol},
                    {"pass", e.pass},
                    {"detail", e.detail},
                    {"stored_hex", hex32(e.stored.value)},
                    {"recomputed_hex", hex32(e.recomputed.value)}});
  json j = {{"all_pass", report.all_pass()}, {"clbs", clbs}};
  return j.dump(2) + "\n";
}

}  // namespace clbforge
