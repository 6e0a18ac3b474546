#pragma once

// Monotone attribute policies.
//
//   Policy  := Or
//   Or      := And ("OR" And)*
//   And     := Primary ("AND" Primary)*
//   Primary := ATTR | "(" Policy ")" | "ANY" INT "OF" "(" Policy ("," Policy)+ ")"
//   ATTR    := [A-Za-z0-9_.:-]+ other than a keyword
//
// Keywords (AND, OR, ANY, OF) are case-sensitive whole words. AND binds
// tighter than OR.

#include <cstddef>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace medledger::policy {

inline constexpr std::size_t kMaxPolicyBytes = 4096;
inline constexpr std::size_t kMaxDepth = 16;
inline constexpr std::size_t kMaxLeaves = 256;

using AttributeSet = std::set<std::string, std::less<>>;

struct PolicyNode {
  enum class Kind : std::uint8_t { Attr, And, Or, Any };

  Kind kind = Kind::Attr;
  std::string name;            // Attr only
  std::uint32_t threshold = 0;  // Any only
  std::vector<PolicyNode> children;

  static PolicyNode attr(std::string name);
  static PolicyNode all_of(std::vector<PolicyNode> children);
  static PolicyNode one_of(std::vector<PolicyNode> children);
  static PolicyNode any_of(std::uint32_t k, std::vector<PolicyNode> children);

  bool operator==(const PolicyNode&) const = default;
};

struct PolicyFormula {
  PolicyNode root;
  bool operator==(const PolicyFormula&) const = default;
};

class PolicyError : public std::runtime_error {
 public:
  enum class Kind { Syntax, TooComplex, TooLong };

  PolicyError(Kind kind, std::size_t offset, const std::string& what);
  Kind kind() const { return kind_; }
  /// Byte offset in the input where parsing failed.
  std::size_t offset() const { return offset_; }

 private:
  Kind kind_;
  std::size_t offset_;
};

PolicyFormula parse_policy(std::string_view text);

/// Canonical text form; parse(print(f)) == f.
std::string print_policy(const PolicyFormula& f);

bool eval_policy(const PolicyFormula& f, const AttributeSet& attrs);

/// Distinct attribute names in first-occurrence order.
std::vector<std::string> leaf_names(const PolicyFormula& f);
std::size_t depth(const PolicyNode& n);
std::size_t leaf_count(const PolicyNode& n);

bool valid_attribute_name(std::string_view name);

}  // namespace medledger::policy
