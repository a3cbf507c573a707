#include "decert/validation.hpp"

#include <algorithm>
#include <sstream>

#include <nlohmann/json.hpp>

#include "decert/clock.hpp"
#include "decert/error.hpp"

namespace decert {

namespace {

constexpr std::string_view kCodeNames[] = {
    "UnknownCriticalExtension", "ChainMalformed", "SignatureInvalid", "Expired",
    "NotYetValid",              "CAFlagInvalid",  "SANMissing",       "DelegationInfoMismatch",
    "IncludeNotSubset",         "ExcludeNotSubset", "PathLenExceeded", "KeyUsageNotSubset",
    "HostnameNotInScope",       "HostnameExcluded", "Revoked",         "UntrustedRoot",
};

struct Collector {
    std::vector<Violation> violations;

    void add(size_t index, ViolationCode code, std::string detail) {
        violations.push_back({index, code, std::move(detail)});
    }
};

std::string witness_text(const std::vector<DomainName> &witnesses) {
    std::string out;
    for (size_t i = 0; i < witnesses.size() && i < 4; ++i) {
        if (i) out += ",";
        out += witnesses[i].text();
    }
    if (witnesses.size() > 4) out += ",...";
    return out;
}

// Standard checks shared by both modes: structure, validity windows,
// signatures up to a trust anchor, CA flags and CA path lengths.
void check_standard_path(const ValidationInput &input,
                         const std::vector<ParsedCertificate> &chain, size_t eec_index,
                         Collector &out) {
    for (size_t i = 0; i + 1 < chain.size(); ++i) {
        if (chain[i].issuer_common_name() != chain[i + 1].subject_common_name())
            out.add(i, ViolationCode::ChainMalformed,
                    "issuer '" + chain[i].issuer_common_name() + "' does not match next subject '" +
                        chain[i + 1].subject_common_name() + "'");
    }

    for (size_t i = 0; i < chain.size(); ++i) {
        if (input.at < chain[i].not_before())
            out.add(i, ViolationCode::NotYetValid,
                    "not valid before " + format_rfc3339(chain[i].not_before()));
        if (input.at > chain[i].not_after())
            out.add(i, ViolationCode::Expired, "expired " + format_rfc3339(chain[i].not_after()));
    }

    for (size_t i = 0; i + 1 < chain.size(); ++i) {
        if (!chain[i].verify_signed_by(chain[i + 1]))
            out.add(i, ViolationCode::SignatureInvalid,
                    "signature does not verify under '" + chain[i + 1].subject_common_name() + "'");
    }

    const auto &last = chain.back();
    std::vector<const ParsedCertificate *> anchors;
    for (const auto &anchor : input.trust_anchors)
        if (anchor.subject_common_name() == last.issuer_common_name()) anchors.push_back(&anchor);
    if (anchors.empty()) {
        out.add(chain.size() - 1, ViolationCode::UntrustedRoot,
                "no trust anchor named '" + last.issuer_common_name() + "'");
    } else if (std::none_of(anchors.begin(), anchors.end(),
                            [&](const auto *anchor) { return last.verify_signed_by(*anchor); })) {
        out.add(chain.size() - 1, ViolationCode::SignatureInvalid,
                "signature does not verify under trust anchor '" + last.issuer_common_name() + "'");
    }

    // CA segment: everything above the EEC must be a CA certificate, and each
    // CA pathLenConstraint must admit the CA certificates beneath it.
    for (size_t i = eec_index + 1; i < chain.size(); ++i) {
        if (!chain[i].is_ca()) {
            out.add(i, ViolationCode::CAFlagInvalid, "intermediate without cA=TRUE");
            continue;
        }
        size_t intermediates_below = i - eec_index - 1;
        if (chain[i].basic_path_len() &&
            static_cast<size_t>(*chain[i].basic_path_len()) < intermediates_below)
            out.add(i, ViolationCode::PathLenExceeded,
                    "basicConstraints pathLen " + std::to_string(*chain[i].basic_path_len()) +
                        " admits " + std::to_string(*chain[i].basic_path_len()) +
                        " intermediates, found " + std::to_string(intermediates_below));
    }
}

void check_hostname(const DomainScope &scope, const DomainName &hostname, Collector &out) {
    for (const auto &entry : scope.exclude) {
        if (hostname.is_descendant_or_equal(entry)) {
            out.add(0, ViolationCode::HostnameExcluded,
                    hostname.text() + " falls under excluded subtree " + entry.text());
            return;
        }
    }
    for (const auto &pattern : scope.include)
        if (matches(pattern, hostname)) return;
    out.add(0, ViolationCode::HostnameNotInScope,
            hostname.text() + " is not covered by " + scope.text());
}

void check_revocation(const ValidationInput &input, const std::vector<ParsedCertificate> &chain,
                      size_t decert_count, Collector &out) {
    if (input.revocation == RevocationPolicyKind::None) return;

    for (size_t i = 0; i < decert_count; ++i) {
        const auto &cert = chain[i];
        std::string unknown_reason;

        if (input.revocation == RevocationPolicyKind::Crl) {
            const ParsedCertificate &issuer = chain[i + 1];
            const CrlDocument *usable = nullptr;
            for (const auto &crl : input.crls) {
                if (crl.issuer_common_name() != cert.issuer_common_name()) continue;
                if (!crl.verify(issuer)) {
                    unknown_reason = "CRL signature does not verify against issuer";
                    continue;
                }
                usable = &crl;
                break;
            }
            if (!usable) {
                if (unknown_reason.empty())
                    unknown_reason = "no CRL for issuer '" + cert.issuer_common_name() + "'";
            } else {
                switch (check_crl(cert, *usable, input.at)) {
                    case RevocationStatus::Revoked:
                        out.add(i, ViolationCode::Revoked,
                                "serial " + cert.serial_hex() + " listed in CRL");
                        continue;
                    case RevocationStatus::NotRevoked: continue;
                    case RevocationStatus::StaleCrl:
                        unknown_reason = "CRL is stale (nextUpdate passed)";
                        break;
                    case RevocationStatus::LookupFailed: unknown_reason = "CRL lookup failed"; break;
                }
            }
        } else {
            if (!input.resolver) {
                unknown_reason = "no resolver configured";
            } else {
                switch (check_dns(cert, *input.resolver)) {
                    case RevocationStatus::Revoked:
                        out.add(i, ViolationCode::Revoked,
                                "revocation record published for serial " + cert.serial_hex());
                        continue;
                    case RevocationStatus::NotRevoked: continue;
                    case RevocationStatus::LookupFailed:
                        unknown_reason = "DNS lookup failed";
                        break;
                    case RevocationStatus::StaleCrl: unknown_reason = "unexpected status"; break;
                }
            }
        }

        if (!input.config.fail_open)
            out.add(i, ViolationCode::Revoked,
                    "revocation status unknown (" + unknown_reason + "), failing closed");
    }
}

ValidationReport finish(Collector &&collector) {
    auto &violations = collector.violations;
    std::sort(violations.begin(), violations.end());
    violations.erase(std::unique(violations.begin(), violations.end()), violations.end());
    ValidationReport report;
    report.violations = std::move(violations);
    report.verdict = report.violations.empty() ? Verdict::Accept : Verdict::Reject;
    return report;
}

ValidationReport validate_strict(const ValidationInput &input,
                                 const std::vector<ParsedCertificate> &chain) {
    // A strict client cannot process any certificate carrying an unrecognized
    // critical extension; that failure preempts path processing entirely.
    Collector preempt;
    for (size_t i = 0; i < chain.size(); ++i) {
        if (is_decert(chain[i]))
            preempt.add(i, ViolationCode::UnknownCriticalExtension,
                        "critical extension " + std::string(delegation_info_oid()) +
                            " is not recognized");
        for (const auto &oid : chain[i].unknown_critical_oids())
            preempt.add(i, ViolationCode::UnknownCriticalExtension,
                        "critical extension " + oid + " is not recognized");
    }
    if (!preempt.violations.empty()) return finish(std::move(preempt));

    Collector out;
    check_standard_path(input, chain, 0, out);
    check_hostname(hostname_scope(chain[0]), input.hostname, out);
    return finish(std::move(out));
}

}  // namespace

std::string_view violation_code_name(ViolationCode code) {
    return kCodeNames[static_cast<size_t>(code)];
}

std::optional<ViolationCode> violation_code_from_name(std::string_view name) {
    for (size_t i = 0; i < std::size(kCodeNames); ++i)
        if (kCodeNames[i] == name) return static_cast<ViolationCode>(i);
    return std::nullopt;
}

std::set<ViolationCode> ValidationReport::codes() const {
    std::set<ViolationCode> out;
    for (const auto &violation : violations) out.insert(violation.code);
    return out;
}

std::string ValidationReport::to_text() const {
    std::string out;
    for (const auto &violation : violations) {
        out += std::to_string(violation.chain_index);
        out += '\t';
        out += violation_code_name(violation.code);
        out += '\t';
        out += violation.detail;
        out += '\n';
    }
    out += verdict == Verdict::Accept ? "verdict\tAccept\n" : "verdict\tReject\n";
    return out;
}

std::string ValidationReport::to_json() const {
    nlohmann::json doc;
    doc["verdict"] = verdict == Verdict::Accept ? "Accept" : "Reject";
    doc["violations"] = nlohmann::json::array();
    for (const auto &violation : violations)
        doc["violations"].push_back({{"index", violation.chain_index},
                                     {"code", violation_code_name(violation.code)},
                                     {"detail", violation.detail}});
    return doc.dump(2);
}

std::vector<Violation> validate_link(const ParsedCertificate &parent,
                                     const ParsedCertificate &child) {
    Collector out;
    const bool parent_is_eec = !is_decert(parent);

    DomainScope parent_scope = parent_is_eec ? eec_issuer_scope(parent) : delegation_scope(parent);
    DomainScope child_scope = delegation_scope(child);

    auto include_verdict = scope_subset_of(child_scope, parent_scope);
    if (!include_verdict.is_subset)
        out.add(0, ViolationCode::IncludeNotSubset,
                "scope is not a subset of the delegator's; uncovered: " +
                    witness_text(include_verdict.witnesses));

    auto exclude_verdict =
        excludes_within_include(child_scope.exclude, parent_scope.include);
    if (!exclude_verdict.is_subset)
        out.add(0, ViolationCode::ExcludeNotSubset,
                "exclude entries outside the delegator's include: " +
                    witness_text(exclude_verdict.witnesses));

    if (child.key_usage() && parent.key_usage() &&
        !child.key_usage()->is_subset_of(*parent.key_usage()))
        out.add(0, ViolationCode::KeyUsageNotSubset,
                "key usage {" + child.key_usage()->text() + "} is not a subset of {" +
                    parent.key_usage()->text() + "}");

    if (!parent_is_eec) {
        uint32_t budget = parent.delegation_info()->effective_path_len();
        uint32_t child_len = child.delegation_info() ? child.delegation_info()->effective_path_len() : 0;
        if (budget < 1)
            out.add(0, ViolationCode::PathLenExceeded,
                    "delegator's path length 0 permits no further delegation");
        else if (child_len > budget - 1)
            out.add(0, ViolationCode::PathLenExceeded,
                    "path length " + std::to_string(child_len) + " exceeds the delegator's budget " +
                        std::to_string(budget) + " - 1");
    }

    return std::move(out.violations);
}

DomainScope effective_scope(const CertificateChain &chain) {
    if (chain.certs.empty()) throw Error(ErrorCode::ChainMalformed, "empty chain");

    if (chain.decert_count == 0) return hostname_scope(chain.eec());

    DomainScope scope = delegation_scope(chain.certs[0]);
    std::vector<DomainName> excludes = scope.exclude;
    for (size_t i = 1; i < chain.decert_count; ++i) {
        for (const auto &entry : delegation_scope(chain.certs[i]).exclude) {
            bool intersects = false;
            for (const auto &pattern : scope.include) {
                bool comparable = entry.is_descendant_or_equal(pattern.base) ||
                                  pattern.base.is_descendant_or_equal(entry);
                if (pattern.kind == PatternKind::Exact
                        ? pattern.base.is_descendant_or_equal(entry)
                        : comparable) {
                    intersects = true;
                    break;
                }
            }
            if (intersects) excludes.push_back(entry);
        }
    }
    return DomainScope::make(scope.include, std::move(excludes));
}

ValidationReport validate_chain(const ValidationInput &input) {
    Collector out;
    if (input.chain.empty()) {
        out.add(0, ViolationCode::ChainMalformed, "empty chain");
        return finish(std::move(out));
    }

    // Servers sometimes append the trust anchor itself; drop it.
    std::vector<ParsedCertificate> chain = input.chain;
    while (chain.size() > 1 &&
           std::any_of(input.trust_anchors.begin(), input.trust_anchors.end(),
                       [&](const auto &anchor) { return anchor == chain.back(); }))
        chain.pop_back();

    if (input.mode == ValidationMode::Strict) return validate_strict(input, chain);

    // Unknown critical extensions other than DelegationInfo are rejected in
    // aware mode too.
    for (size_t i = 0; i < chain.size(); ++i)
        for (const auto &oid : chain[i].unknown_critical_oids())
            out.add(i, ViolationCode::UnknownCriticalExtension,
                    "critical extension " + oid + " is not recognized");

    size_t decert_count = 0;
    while (decert_count < chain.size() && is_decert(chain[decert_count])) ++decert_count;

    bool shape_ok = true;
    if (decert_count == chain.size()) {
        out.add(chain.size() - 1, ViolationCode::ChainMalformed,
                "chain has no end-entity certificate");
        shape_ok = false;
    } else {
        for (size_t i = decert_count + 1; i < chain.size(); ++i)
            if (is_decert(chain[i])) {
                out.add(i, ViolationCode::ChainMalformed, "DeCert above a non-DeCert");
                shape_ok = false;
            }
        if (decert_count > 0 && chain[decert_count].is_ca()) {
            out.add(decert_count, ViolationCode::ChainMalformed,
                    "DeCert segment hangs off a CA certificate");
            shape_ok = false;
        }
    }

    size_t eec_index = std::min(decert_count, chain.size() - 1);
    check_standard_path(input, chain, eec_index, out);

    for (size_t i = 0; i < decert_count; ++i) {
        const auto &cert = chain[i];
        if (cert.is_ca()) out.add(i, ViolationCode::CAFlagInvalid, "DeCert with cA=TRUE");
        if (cert.san_patterns().empty())
            out.add(i, ViolationCode::SANMissing, "DeCert without subjectAltName");
        const auto &info = *cert.delegation_info();
        if (info.include_domains && *info.include_domains != cert.san_patterns())
            out.add(i, ViolationCode::DelegationInfoMismatch,
                    "includeDomains mirror does not equal the SAN set");
    }

    if (decert_count > input.config.max_delegation_depth)
        out.add(0, ViolationCode::PathLenExceeded,
                "chain has " + std::to_string(decert_count) +
                    " DeCerts, validator admits at most " +
                    std::to_string(input.config.max_delegation_depth));

    if (shape_ok) {
        for (size_t i = 0; i < decert_count; ++i)
            for (auto violation : validate_link(chain[i + 1], chain[i])) {
                violation.chain_index = i;
                out.violations.push_back(std::move(violation));
            }

        CertificateChain split;
        split.certs = chain;
        split.decert_count = decert_count;
        Collector hostname_out;
        check_hostname(effective_scope(split), input.hostname, hostname_out);
        for (auto violation : hostname_out.violations) {
            violation.chain_index = 0;
            out.violations.push_back(std::move(violation));
        }

        check_revocation(input, chain, decert_count, out);
    }

    return finish(std::move(out));
}

}  // namespace decert
