#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "clbforge/keymap.hpp"
#include "clbforge/source_model.hpp"

namespace clbforge {

struct SourceEdit {
  std::string file;
  ByteRange span;  // empty span = insertion
  std::string replacement;
};

/// A QC that passed check_eligibility, together with its file and its path
/// relative to the source root.
struct EligibleQc {
  const TranslationUnit* tu = nullptr;
  const QualifiedCondition* qc = nullptr;
  std::string rel_path;
};

/// Orders CLBs by (rel_path, if offset) and assigns ids, salts and hashes.
/// Throws Error{TooManyClbs}.
Keymap plan_clbs(std::span<const EligibleQc> eligible, std::uint64_t seed);

/// `<var_expr> == <const>` becomes `clb_hash(<var_expr>, <salt>u) == <hconst>u`.
SourceEdit rewrite_condition(const QualifiedCondition& qc, const ClbRecord& record);

struct ExtractedBody {
  std::string prototype;  // declaration placed before the caller
  std::string ext_fun;    // definition placed after the caller
  SourceEdit call_site;   // replaces the then-branch
};

/// Throws Error{RewriteAmbiguity} when the eligibility pass flagged
/// identifier uses it could not classify.
ExtractedBody extract_body(const TranslationUnit& tu, const QualifiedCondition& qc,
                           const ClbRecord& record);

/// Insertion of the runtime helpers after the leading directive block;
/// nullopt when the file hosts no CLB.
std::optional<SourceEdit> inject_runtime_support(const TranslationUnit& tu, std::size_t clb_count,
                                                 const std::string& file);

/// Throws Error{OverlappingEdits}. Insertions at the same offset keep their
/// relative order.
std::string apply_edits(std::string_view original, std::span<const SourceEdit> edits);

/// Throws Error{AlreadyProtected} or Error{NameCollision} when the source
/// cannot be transformed safely.
void check_transformable(const TranslationUnit& tu);

/// All edits for one file. `records` must hold exactly the records planned for `qcs`.
std::vector<SourceEdit> plan_file_edits(const TranslationUnit& tu,
                                        std::span<const QualifiedCondition* const> qcs,
                                        std::span<const ClbRecord* const> records,
                                        const std::string& file);

}  // namespace clbforge
