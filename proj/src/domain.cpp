#include "decert/domain.hpp"

#include <algorithm>
#include <cctype>

#include "decert/error.hpp"

namespace decert {

namespace {

constexpr size_t kMaxLabels = 127;
constexpr size_t kMaxLabelOctets = 63;
constexpr size_t kMaxTextOctets = 253;
constexpr size_t kMaxUniverse = 1000000;

bool label_char_ok(char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-' || c == '_';
}

std::optional<std::vector<std::string>> split_labels(std::string_view text) {
    if (text.empty() || text.size() > kMaxTextOctets) return std::nullopt;
    std::vector<std::string> labels;
    std::string current;
    for (char raw : text) {
        char c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
        if (c == '.') {
            if (current.empty()) return std::nullopt;
            labels.push_back(std::move(current));
            current.clear();
            continue;
        }
        if (!label_char_ok(c)) return std::nullopt;
        current.push_back(c);
    }
    if (current.empty()) return std::nullopt;  // trailing dot or empty label
    labels.push_back(std::move(current));
    if (labels.size() > kMaxLabels) return std::nullopt;
    for (const auto &label : labels) {
        if (label.size() > kMaxLabelOctets) return std::nullopt;
        if (label.front() == '-' || label.back() == '-') return std::nullopt;
    }
    return labels;
}

template <typename T>
void sort_unique(std::vector<T> &values) {
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
}

bool suffix_equal(const std::vector<std::string> &name, const std::vector<std::string> &suffix) {
    if (suffix.size() > name.size()) return false;
    return std::equal(suffix.rbegin(), suffix.rend(), name.rbegin());
}

}  // namespace

DomainName DomainName::parse(std::string_view text) {
    auto parsed = try_parse(text);
    if (!parsed) throw Error(ErrorCode::MalformedName, "invalid domain name '" + std::string(text) + "'");
    return *parsed;
}

std::optional<DomainName> DomainName::try_parse(std::string_view text) {
    auto labels = split_labels(text);
    if (!labels) return std::nullopt;
    return DomainName(std::move(*labels));
}

std::string DomainName::text() const {
    std::string out;
    for (const auto &label : labels_) {
        if (!out.empty()) out.push_back('.');
        out += label;
    }
    return out;
}

bool DomainName::is_strict_descendant_of(const DomainName &ancestor) const {
    return labels_.size() > ancestor.labels_.size() && suffix_equal(labels_, ancestor.labels_);
}

bool DomainName::is_descendant_or_equal(const DomainName &ancestor) const {
    return labels_.size() >= ancestor.labels_.size() && suffix_equal(labels_, ancestor.labels_);
}

std::optional<DomainName> DomainName::parent() const {
    if (labels_.size() <= 1) return std::nullopt;
    return DomainName(std::vector<std::string>(labels_.begin() + 1, labels_.end()));
}

DomainName DomainName::child(std::string_view label) const {
    std::vector<std::string> labels;
    labels.reserve(labels_.size() + 1);
    labels.emplace_back(label);
    labels.insert(labels.end(), labels_.begin(), labels_.end());
    return DomainName(std::move(labels));
}

std::string DomainPattern::text() const {
    return kind == PatternKind::Subtree ? "*." + base.text() : base.text();
}

DomainPattern parse_pattern(std::string_view text) {
    if (text.empty()) throw Error(ErrorCode::MalformedName, "empty pattern");
    PatternKind kind = PatternKind::Exact;
    std::string_view rest = text;
    if (rest.size() >= 2 && rest[0] == '*' && rest[1] == '.') {
        kind = PatternKind::Subtree;
        rest.remove_prefix(2);
    }
    if (rest.find('*') != std::string_view::npos)
        throw Error(ErrorCode::MalformedName,
                    "wildcard must be the leftmost whole label in '" + std::string(text) + "'");
    return DomainPattern{kind, DomainName::parse(rest)};
}

bool matches(const DomainPattern &pattern, const DomainName &name) {
    if (pattern.kind == PatternKind::Exact) return name == pattern.base;
    return name.is_strict_descendant_of(pattern.base);
}

DomainScope DomainScope::make(std::vector<DomainPattern> include, std::vector<DomainName> exclude) {
    sort_unique(include);
    sort_unique(exclude);
    return DomainScope{std::move(include), std::move(exclude)};
}

std::string DomainScope::text() const {
    std::string out = "include[";
    for (size_t i = 0; i < include.size(); ++i) {
        if (i) out += ",";
        out += include[i].text();
    }
    out += "]";
    if (!exclude.empty()) {
        out += " exclude[";
        for (size_t i = 0; i < exclude.size(); ++i) {
            if (i) out += ",";
            out += exclude[i].text();
        }
        out += "]";
    }
    return out;
}

DomainScope DomainScope::normalized_for_display() const {
    std::vector<DomainPattern> kept;
    for (const auto &p : include) {
        bool shadowed = false;
        for (const auto &q : include) {
            if (q == p || q.kind != PatternKind::Subtree) continue;
            bool covered = p.kind == PatternKind::Exact
                               ? matches(q, p.base)
                               : p.base.is_descendant_or_equal(q.base);
            if (covered) {
                shadowed = true;
                break;
            }
        }
        if (!shadowed) kept.push_back(p);
    }
    return DomainScope::make(std::move(kept), exclude);
}

bool scope_contains(const DomainScope &scope, const DomainName &name) {
    for (const auto &entry : scope.exclude)
        if (name.is_descendant_or_equal(entry)) return false;
    for (const auto &pattern : scope.include)
        if (matches(pattern, name)) return true;
    return false;
}

namespace {

void collect_with_ancestors(const DomainName &name, std::set<DomainName> &out) {
    out.insert(name);
    for (auto up = name.parent(); up; up = up->parent()) out.insert(*up);
}

std::set<DomainName> candidate_roots(const DomainScope &child, const DomainScope &parent) {
    std::set<DomainName> roots;
    for (const auto *scope : {&child, &parent}) {
        for (const auto &pattern : scope->include) collect_with_ancestors(pattern.base, roots);
        for (const auto &entry : scope->exclude) collect_with_ancestors(entry, roots);
    }
    return roots;
}

std::string fresh_label(const std::set<DomainName> &roots) {
    std::set<std::string> used;
    for (const auto &name : roots)
        for (const auto &label : name.labels()) used.insert(label);
    for (const char *candidate : {"x", "y", "z", "q", "w"})
        if (!used.contains(candidate)) return candidate;
    for (int i = 0;; ++i) {
        std::string candidate = "x" + std::to_string(i);
        if (!used.contains(candidate)) return candidate;
    }
}

}  // namespace

SubsetVerdict scope_subset_of(const DomainScope &child, const DomainScope &parent) {
    const auto roots = candidate_roots(child, parent);
    const auto fresh = fresh_label(roots);

    std::set<DomainName> candidates = roots;
    for (const auto &root : roots) candidates.insert(root.child(fresh));

    SubsetVerdict verdict;
    for (const auto &candidate : candidates) {
        if (scope_contains(child, candidate) && !scope_contains(parent, candidate))
            verdict.witnesses.push_back(candidate);
    }
    verdict.is_subset = verdict.witnesses.empty();
    return verdict;
}

SubsetVerdict excludes_within_include(const std::vector<DomainName> &child_excludes,
                                      const std::vector<DomainPattern> &parent_include) {
    SubsetVerdict verdict;
    for (const auto &entry : child_excludes) {
        bool covered = false;
        for (const auto &pattern : parent_include) {
            if (matches(pattern, entry)) {
                covered = true;
                break;
            }
        }
        if (!covered) verdict.witnesses.push_back(entry);
    }
    verdict.is_subset = verdict.witnesses.empty();
    return verdict;
}

std::vector<DomainName> enumerate_universe(const std::set<std::string> &labels, size_t max_depth,
                                           const DomainName &suffix) {
    if (labels.empty()) throw Error(ErrorCode::MalformedName, "empty label alphabet");

    size_t count = 1;
    size_t layer = 1;
    for (size_t d = 1; d <= max_depth; ++d) {
        if (layer > kMaxUniverse / labels.size()) throw Error(ErrorCode::UniverseTooLarge, "universe exceeds 10^6 names");
        layer *= labels.size();
        count += layer;
        if (count > kMaxUniverse) throw Error(ErrorCode::UniverseTooLarge, "universe exceeds 10^6 names");
    }

    const std::vector<std::string> alphabet(labels.begin(), labels.end());
    std::vector<DomainName> out;
    out.reserve(count);
    out.push_back(suffix);
    std::vector<DomainName> level = {suffix};
    for (size_t d = 1; d <= max_depth; ++d) {
        std::vector<DomainName> next;
        next.reserve(level.size() * alphabet.size());
        for (const auto &label : alphabet)
            for (const auto &name : level) next.push_back(name.child(label));
        out.insert(out.end(), next.begin(), next.end());
        level = std::move(next);
    }
    return out;
}

}  // namespace decert
