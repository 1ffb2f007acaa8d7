#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gda/corpus.hpp"
#include "gda/llm_gateway.hpp"

namespace gda::prompt {

enum class PromptKind { kSeedGeneration, kAbstraction, kGuidance, kNaive };

std::string_view kind_name(PromptKind kind);

using Bindings = std::map<std::string, std::string>;

// System and user texts with {{name}} placeholders. Rendering substitutes in
// one pass, so bound values are never rescanned.
class PromptTemplate {
 public:
  // Throws InvalidArgument if the texts lack a placeholder the kind binds
  // mandatorily (see required_for).
  PromptTemplate(PromptKind kind, std::string system_text,
                 std::string user_text);

  // File layout: a "[system]" section followed by a "[user]" section.
  static PromptTemplate parse(PromptKind kind, std::string_view text);

  PromptKind kind() const { return kind_; }
  const std::string& system_text() const { return system_text_; }
  const std::string& user_text() const { return user_text_; }
  // Every placeholder referenced by either text, sorted.
  const std::vector<std::string>& required_placeholders() const {
    return required_;
  }
  // SHA-256 of the serialized template.
  const std::string& hash() const { return hash_; }
  std::string serialize() const;

  // Throws InvalidArgument naming the first unbound placeholder.
  std::vector<llm::Message> render(const Bindings& bindings) const;

  static std::vector<std::string> required_for(PromptKind kind);

 private:
  PromptKind kind_;
  std::string system_text_;
  std::string user_text_;
  std::vector<std::string> required_;
  std::string hash_;
};

std::vector<std::string> find_placeholders(std::string_view text);
// Throws InvalidArgument on an unbound placeholder.
std::string render_text(std::string_view text, const Bindings& bindings);

class TemplateSet {
 public:
  // Templates bundled with the build (copied from templates/).
  static TemplateSet defaults();
  // Reads <dir>/{seed_generation,abstraction,guidance,naive}.tmpl.
  static TemplateSet load(const std::filesystem::path& dir);

  const PromptTemplate& get(PromptKind kind) const;
  // Hash over the four template hashes, recorded in run manifests.
  std::string hash() const;

 private:
  std::map<PromptKind, PromptTemplate> templates_;
};

struct AbstractionRecord {
  std::string context_summary;
  std::string structure_description;
  std::map<std::string, std::string> entity_roles;  // entity type -> role
  std::vector<std::string> source_seed_ids;
  std::vector<std::string> warnings;
};

enum class Verdict { kAccepted, kRejected };

struct Candidate {
  std::string raw_text;
  corpus::Sentence sentence;
  std::vector<std::pair<std::string, std::string>> claimed_entities;
  Verdict verdict = Verdict::kRejected;
  std::string reason;  // empty when accepted

  bool accepted() const { return verdict == Verdict::kAccepted; }
};

// Rejection reasons reported by parse_candidates.
inline constexpr std::string_view kReasonFormat = "format";
inline constexpr std::string_view kReasonNoEntities = "no-entities";
inline constexpr std::string_view kReasonUnknownType = "unknown-type";
inline constexpr std::string_view kReasonSurfaceMissing = "surface-missing";
inline constexpr std::string_view kReasonOverlap = "overlap";

// Reply-format instructions appended to every prompt of the matching kind.
extern const std::string kCandidateFormat;
extern const std::string kAbstractionFormat;

std::vector<llm::Message> build_seed_generation_prompt(
    const corpus::Sentence& seed, std::size_t variants = 3,
    const TemplateSet& templates = TemplateSet::defaults());

std::vector<llm::Message> build_abstraction_prompt(
    const corpus::Sentence& seed, const std::vector<corpus::Sentence>& variants,
    const corpus::Inventory& inventory,
    const TemplateSet& templates = TemplateSet::defaults());

std::vector<llm::Message> build_guidance_prompt(
    const AbstractionRecord& record, const corpus::Inventory& inventory,
    std::size_t m, const TemplateSet& templates = TemplateSet::defaults());

std::vector<llm::Message> build_naive_prompt(
    const corpus::Sentence& seed, std::size_t m,
    const TemplateSet& templates = TemplateSet::defaults());

// Structured-output error naming what is missing or malformed.
class ReplyFormatError : public Error {
 public:
  ReplyFormatError(std::string field, const std::string& message)
      : Error(message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Extracts the JSON payload of a reply: the first ``` fence (optionally
// tagged json) with prose allowed around it, or the whole reply when it is
// bare JSON. Returns nullopt when neither parses.
std::optional<nlohmann::json> extract_json(std::string_view reply);

// Roles for types outside the inventory are dropped and noted in warnings.
// Throws ReplyFormatError naming the missing field.
AbstractionRecord parse_abstraction(std::string_view text,
                                    const corpus::Inventory& inventory);

// One Candidate per reported sentence, in reply order. Candidate sentences
// carry provenance `method`, ids <method>:<id_stem>:<k> and parent `parent`.
std::vector<Candidate> parse_candidates(
    std::string_view text, const corpus::Inventory& inventory,
    corpus::Method method = corpus::Method::kGda, std::string_view id_stem = "",
    std::optional<std::string> parent = std::nullopt);

// Leftmost token-aligned exact match of each claimed surface, skipping
// tokens already claimed. Exposed for tests.
struct Alignment {
  std::vector<corpus::EntitySpan> spans;
  std::string reason;  // empty on success
};
Alignment align_entities(
    const std::vector<std::string>& tokens,
    const std::vector<std::pair<std::string, std::string>>& claims);

}  // namespace gda::prompt
