#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace decert {

// A fully normalized DNS-style name: 1..127 lowercase labels in textual order
// (leftmost label first), each 1..63 octets of [a-z0-9_-] with no leading or
// trailing hyphen, total textual length <= 253. Underscore is permitted so
// that DNS service labels such as _decert-revoked remain representable.
class DomainName {
  public:
    // The empty name: matched by no pattern, contained in no scope. parse()
    // never produces it; it exists so aggregates can default-construct.
    DomainName() = default;

    static DomainName parse(std::string_view text);  // throws Error{MalformedName}
    static std::optional<DomainName> try_parse(std::string_view text);

    [[nodiscard]] bool empty() const noexcept { return labels_.empty(); }
    [[nodiscard]] const std::vector<std::string> &labels() const noexcept { return labels_; }
    [[nodiscard]] std::string text() const;
    [[nodiscard]] size_t depth() const noexcept { return labels_.size(); }

    // True when this name has strictly more labels than ancestor and ends
    // with ancestor's labels ("x.a.com" is a strict descendant of "a.com").
    [[nodiscard]] bool is_strict_descendant_of(const DomainName &ancestor) const;
    [[nodiscard]] bool is_descendant_or_equal(const DomainName &ancestor) const;

    // The name with the leftmost label removed; nullopt for single-label names.
    [[nodiscard]] std::optional<DomainName> parent() const;
    // A new name with one label stacked in front of this one.
    [[nodiscard]] DomainName child(std::string_view label) const;

    auto operator<=>(const DomainName &) const = default;

  private:
    explicit DomainName(std::vector<std::string> labels) : labels_(std::move(labels)) {}

    std::vector<std::string> labels_;
};

enum class PatternKind { Exact, Subtree };

// Exact(d) denotes the singleton {d}. Subtree(d) denotes every strict
// descendant of d at any depth, not d itself; its textual form is "*." + d.
struct DomainPattern {
    PatternKind kind;
    DomainName base;

    [[nodiscard]] std::string text() const;
    auto operator<=>(const DomainPattern &) const = default;
};

DomainPattern parse_pattern(std::string_view text);  // throws Error{MalformedName}

bool matches(const DomainPattern &pattern, const DomainName &name);

// A delegated name set: union of the include patterns minus the union of the
// exclude subtrees. An exclude entry covers the entry itself and every
// descendant; excludes take precedence over includes.
struct DomainScope {
    std::vector<DomainPattern> include;  // sorted, unique
    std::vector<DomainName> exclude;     // sorted, unique

    static DomainScope make(std::vector<DomainPattern> include, std::vector<DomainName> exclude);

    [[nodiscard]] std::string text() const;
    // Drops include patterns shadowed by a broader pattern in the same scope.
    // Display only; subset checks always see the scope exactly as encoded.
    [[nodiscard]] DomainScope normalized_for_display() const;

    bool operator==(const DomainScope &) const = default;
};

bool scope_contains(const DomainScope &scope, const DomainName &name);

struct SubsetVerdict {
    bool is_subset = false;
    // Names in the child's denotation that the parent does not cover. A name
    // carrying a fresh (unused) leading label stands for the whole uncovered
    // branch beneath its parent node.
    std::vector<DomainName> witnesses;
};

// Decides denotation(child) <= denotation(parent) over the infinite universe
// of domain names. Complete: two names with the same set of entry-name
// ancestors are indistinguishable to both scopes, and every such profile is
// realized by an entry name, an ancestor of one, or a fresh-label child of
// one, so checking those candidates decides the inclusion exactly.
SubsetVerdict scope_subset_of(const DomainScope &child, const DomainScope &parent);

// True iff every child exclude entry is matched by some parent include
// pattern; failures are returned as witnesses.
SubsetVerdict excludes_within_include(const std::vector<DomainName> &child_excludes,
                                      const std::vector<DomainPattern> &parent_include);

// Every name formed by stacking 0..max_depth labels (with repetition) in
// front of suffix, ordered by depth then lexicographically by label tuple.
// Oracle support for property tests. Throws Error{UniverseTooLarge} when the
// result would exceed 10^6 names.
std::vector<DomainName> enumerate_universe(const std::set<std::string> &labels, size_t max_depth,
                                           const DomainName &suffix);

}  // namespace decert
