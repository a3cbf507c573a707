#include "decert/validation.hpp"

#include <gtest/gtest.h>

#include <bit>
#include <random>
#include <set>

#include "decert/error.hpp"
#include "support/test_pki.hpp"

using namespace decert;
using namespace testpki;

namespace {

std::set<ViolationCode> codes_of(const ValidationReport &report) { return report.codes(); }

ValidationInput input_for(const Pki &pki, std::vector<ParsedCertificate> chain,
                          const std::string &hostname, int64_t at = kAt) {
    ValidationInput input;
    input.chain = std::move(chain);
    input.trust_anchors = {pki.root};
    input.hostname = DomainName::parse(hostname);
    input.at = at;
    return input;
}

struct Fig {
    Pki pki = make_pki();
    PrivateKey cdn1_key = PrivateKey::generate(KeyAlgorithm::Ed25519, pki.rng);
    PrivateKey cdn2_key = PrivateKey::generate(KeyAlgorithm::Ed25519, pki.rng);
};

TEST(ValidateChain, Fig1Accepts) {
    Fig f;
    auto decert = sign_decert(f.pki.eec, f.pki.eec_key, f.cdn1_key,
                              {.common_name = "cdn.com", .san = {"*.content.abc.com"}}, f.pki.rng);
    auto report =
        validate_chain(input_for(f.pki, {decert, f.pki.eec, f.pki.inter}, "x.content.abc.com"));
    EXPECT_EQ(report.verdict, Verdict::Accept) << report.to_text();
    EXPECT_TRUE(report.violations.empty());
}

TEST(ValidateChain, Fig2aRejectsWithExactCodes) {
    Fig f;
    auto decert1 = sign_decert(f.pki.eec, f.pki.eec_key, f.cdn1_key,
                               {.common_name = "cdn1.com",
                                .san = {"*.pics.abc.com"},
                                .excludes = {"a.pics.abc.com"},
                                .path_len = 0},
                               f.pki.rng);
    auto decert2 = sign_decert(decert1, f.cdn1_key, f.cdn2_key,
                               {.common_name = "cdn2.com", .san = {"*.vids.abc.com"}, .path_len = 0},
                               f.pki.rng);

    auto report = validate_chain(
        input_for(f.pki, {decert2, decert1, f.pki.eec, f.pki.inter}, "x.vids.abc.com"));
    EXPECT_EQ(report.verdict, Verdict::Reject);
    EXPECT_EQ(codes_of(report),
              (std::set<ViolationCode>{ViolationCode::PathLenExceeded,
                                       ViolationCode::IncludeNotSubset}))
        << report.to_text();
    // both violations sit on the second (leaf) DeCert
    for (const auto &violation : report.violations) EXPECT_EQ(violation.chain_index, 0u);
}

TEST(ValidateChain, Fig2bRejectsForThreeDistinctReasons) {
    Fig f;
    auto decert1 = sign_decert(f.pki.eec, f.pki.eec_key, f.cdn1_key,
                               {.common_name = "cdn1.com",
                                .san = {"*.pics.abc.com"},
                                .path_len = 1,
                                .key_usage = KeyUsageSet::of({1, 5, 6})},
                               f.pki.rng);
    auto decert2 = sign_decert(decert1, f.cdn1_key, f.cdn2_key,
                               {.common_name = "cdn2.com",
                                .san = {"*.pics.abc.com"},
                                .excludes = {"a.vids.abc.com"},
                                .path_len = 5,
                                .key_usage = KeyUsageSet::of({1, 3, 5, 6})},
                               f.pki.rng);

    auto report = validate_chain(
        input_for(f.pki, {decert2, decert1, f.pki.eec, f.pki.inter}, "x.pics.abc.com"));
    EXPECT_EQ(codes_of(report),
              (std::set<ViolationCode>{ViolationCode::KeyUsageNotSubset,
                                       ViolationCode::PathLenExceeded,
                                       ViolationCode::ExcludeNotSubset}))
        << report.to_text();
}

TEST(ValidateChain, PocHostnameMatrix) {
    Fig f;
    auto pki = make_pki("a.localhost");
    auto key = PrivateKey::generate(KeyAlgorithm::Ed25519, pki.rng);
    auto decert = sign_decert(pki.eec, pki.eec_key, key,
                              {.common_name = "cdn.localhost",
                               .san = {"*.a.localhost"},
                               .excludes = {"b.a.localhost"}},
                              pki.rng);
    std::vector<ParsedCertificate> chain = {decert, pki.eec, pki.inter};

    auto accept = validate_chain(input_for(pki, chain, "a.a.localhost"));
    EXPECT_EQ(accept.verdict, Verdict::Accept) << accept.to_text();

    auto excluded = validate_chain(input_for(pki, chain, "b.a.localhost"));
    EXPECT_EQ(codes_of(excluded), std::set<ViolationCode>{ViolationCode::HostnameExcluded});

    auto sub_excluded = validate_chain(input_for(pki, chain, "c.b.a.localhost"));
    EXPECT_EQ(codes_of(sub_excluded), std::set<ViolationCode>{ViolationCode::HostnameExcluded});

    auto outside = validate_chain(input_for(pki, chain, "other.localhost"));
    EXPECT_EQ(codes_of(outside), std::set<ViolationCode>{ViolationCode::HostnameNotInScope});
}

TEST(ValidateChain, StrictModeRejectsAnyDeCert) {
    Fig f;
    auto decert = sign_decert(f.pki.eec, f.pki.eec_key, f.cdn1_key,
                              {.common_name = "cdn.com", .san = {"*.content.abc.com"}}, f.pki.rng);
    auto input = input_for(f.pki, {decert, f.pki.eec, f.pki.inter}, "x.content.abc.com");
    input.mode = ValidationMode::Strict;
    auto report = validate_chain(input);
    EXPECT_EQ(codes_of(report),
              std::set<ViolationCode>{ViolationCode::UnknownCriticalExtension})
        << report.to_text();
}

TEST(ValidateChain, StrictAndAwareAgreeWithoutDeCerts) {
    Fig f;
    for (const char *hostname : {"abc.com", "x.abc.com"}) {
        for (int64_t at : {kAt, kNotAfter + 100}) {
            auto aware = input_for(f.pki, {f.pki.eec, f.pki.inter}, hostname, at);
            auto strict = aware;
            strict.mode = ValidationMode::Strict;
            EXPECT_EQ(validate_chain(aware).verdict, validate_chain(strict).verdict);
            EXPECT_EQ(validate_chain(aware).to_text(), validate_chain(strict).to_text());
        }
    }
}

TEST(ValidateChain, ExpiryAndNotYetValid) {
    Fig f;
    auto decert = sign_decert(f.pki.eec, f.pki.eec_key, f.cdn1_key,
                              {.common_name = "cdn.com",
                               .san = {"*.content.abc.com"},
                               .not_before = kAt + 1000,
                               .not_after = kAt + 2000},
                              f.pki.rng);
    std::vector<ParsedCertificate> chain = {decert, f.pki.eec, f.pki.inter};

    auto early = validate_chain(input_for(f.pki, chain, "x.content.abc.com", kAt));
    EXPECT_EQ(codes_of(early), std::set<ViolationCode>{ViolationCode::NotYetValid});

    auto late = validate_chain(input_for(f.pki, chain, "x.content.abc.com", kAt + 3000));
    EXPECT_EQ(codes_of(late), std::set<ViolationCode>{ViolationCode::Expired});

    auto inside = validate_chain(input_for(f.pki, chain, "x.content.abc.com", kAt + 1500));
    EXPECT_EQ(inside.verdict, Verdict::Accept);
}

TEST(ValidateChain, SignatureAndAnchorFailures) {
    Fig f;
    // signed with a key that does not belong to the named issuer
    auto forged = sign_decert(f.pki.eec, f.pki.inter_key, f.cdn1_key,
                              {.common_name = "cdn.com", .san = {"*.content.abc.com"}}, f.pki.rng);
    auto report = validate_chain(
        input_for(f.pki, {forged, f.pki.eec, f.pki.inter}, "x.content.abc.com"));
    EXPECT_TRUE(codes_of(report).contains(ViolationCode::SignatureInvalid)) << report.to_text();

    auto good = sign_decert(f.pki.eec, f.pki.eec_key, f.cdn1_key,
                            {.common_name = "cdn.com", .san = {"*.content.abc.com"}}, f.pki.rng);
    auto no_anchor = input_for(f.pki, {good, f.pki.eec, f.pki.inter}, "x.content.abc.com");
    no_anchor.trust_anchors.clear();
    EXPECT_EQ(codes_of(validate_chain(no_anchor)),
              std::set<ViolationCode>{ViolationCode::UntrustedRoot});
}

TEST(ValidateChain, DeCertStructuralChecks) {
    Fig f;
    // cA=TRUE on a DeCert
    auto ca_tpl = decert_template(
        {.common_name = "cdn.com", .san = {"*.content.abc.com"}}, f.cdn1_key, f.pki.rng);
    ca_tpl.is_ca = true;
    auto ca_flagged =
        parse_certificate_der(build_certificate_unchecked(ca_tpl, "abc.com", f.pki.eec_key));
    auto report1 = validate_chain(
        input_for(f.pki, {ca_flagged, f.pki.eec, f.pki.inter}, "x.content.abc.com"));
    EXPECT_TRUE(codes_of(report1).contains(ViolationCode::CAFlagInvalid));

    // missing SAN
    auto no_san_tpl = decert_template({.common_name = "cdn.com"}, f.cdn1_key, f.pki.rng);
    auto no_san =
        parse_certificate_der(build_certificate_unchecked(no_san_tpl, "abc.com", f.pki.eec_key));
    auto report2 =
        validate_chain(input_for(f.pki, {no_san, f.pki.eec, f.pki.inter}, "x.content.abc.com"));
    EXPECT_TRUE(codes_of(report2).contains(ViolationCode::SANMissing));

    // include mirror disagrees with the SAN
    auto mismatched = sign_decert(f.pki.eec, f.pki.eec_key, f.cdn1_key,
                                  {.common_name = "cdn.com",
                                   .san = {"*.content.abc.com"},
                                   .include_mirror = {{"*.other.abc.com"}}},
                                  f.pki.rng);
    auto report3 = validate_chain(
        input_for(f.pki, {mismatched, f.pki.eec, f.pki.inter}, "x.content.abc.com"));
    EXPECT_TRUE(codes_of(report3).contains(ViolationCode::DelegationInfoMismatch));

    // matching mirror is fine
    auto mirrored = sign_decert(f.pki.eec, f.pki.eec_key, f.cdn1_key,
                                {.common_name = "cdn.com",
                                 .san = {"*.content.abc.com"},
                                 .include_mirror = {{"*.content.abc.com"}}},
                                f.pki.rng);
    EXPECT_EQ(validate_chain(
                  input_for(f.pki, {mirrored, f.pki.eec, f.pki.inter}, "x.content.abc.com"))
                  .verdict,
              Verdict::Accept);
}

TEST(ValidateChain, UnknownCriticalExtensionInAwareMode) {
    Fig f;
    auto odd = with_extra_critical_extension(f.pki.eec, f.pki.inter_key, "1.3.6.1.4.1.99999.7");
    auto report = validate_chain(input_for(f.pki, {odd, f.pki.inter}, "abc.com"));
    EXPECT_TRUE(codes_of(report).contains(ViolationCode::UnknownCriticalExtension));
}

TEST(ValidateChain, ValidatorDepthLimit) {
    Fig f;
    std::vector<ParsedCertificate> chain;
    ParsedCertificate issuer = f.pki.eec;
    PrivateKey issuer_key = f.pki.eec_key;
    for (int i = 0; i < 5; ++i) {
        auto key = PrivateKey::generate(KeyAlgorithm::Ed25519, f.pki.rng);
        auto decert = sign_decert(issuer, issuer_key, key,
                                  {.common_name = "cdn" + std::to_string(i) + ".com",
                                   .san = {"*.content.abc.com"},
                                   .path_len = static_cast<uint32_t>(8 - i)},
                                  f.pki.rng);
        chain.insert(chain.begin(), decert);
        issuer = decert;
        issuer_key = std::move(key);
    }
    chain.push_back(f.pki.eec);
    chain.push_back(f.pki.inter);
    auto report = validate_chain(input_for(f.pki, chain, "x.content.abc.com"));
    EXPECT_TRUE(codes_of(report).contains(ViolationCode::PathLenExceeded)) << report.to_text();

    auto relaxed = input_for(f.pki, chain, "x.content.abc.com");
    relaxed.config.max_delegation_depth = 8;
    EXPECT_EQ(validate_chain(relaxed).verdict, Verdict::Accept);
}

TEST(EffectiveScope, AncestorExcludesAugmentTheLeaf) {
    Fig f;
    auto decert1 = sign_decert(f.pki.eec, f.pki.eec_key, f.cdn1_key,
                               {.common_name = "cdn1.com",
                                .san = {"*.pics.abc.com"},
                                .excludes = {"a.pics.abc.com"},
                                .path_len = 1},
                               f.pki.rng);
    auto decert2 = sign_decert(decert1, f.cdn1_key, f.cdn2_key,
                               {.common_name = "cdn2.com", .san = {"*.pics.abc.com"}, .path_len = 0},
                               f.pki.rng);

    auto chain = split_chain({decert2, decert1, f.pki.eec, f.pki.inter});
    auto scope = effective_scope(chain);
    EXPECT_FALSE(scope_contains(scope, DomainName::parse("a.pics.abc.com")));
    EXPECT_TRUE(scope_contains(scope, DomainName::parse("b.pics.abc.com")));

    // the link check already reports the child's widened include
    auto report = validate_chain(
        input_for(f.pki, {decert2, decert1, f.pki.eec, f.pki.inter}, "a.pics.abc.com"));
    EXPECT_EQ(codes_of(report),
              (std::set<ViolationCode>{ViolationCode::IncludeNotSubset,
                                       ViolationCode::HostnameExcluded}))
        << report.to_text();

    // fig1: effective scope of a valid chain is the leaf scope
    auto single = split_chain({decert1, f.pki.eec, f.pki.inter});
    EXPECT_EQ(effective_scope(single), delegation_scope(decert1));
}

TEST(ValidateChain, ReportSerialization) {
    Fig f;
    auto decert = sign_decert(f.pki.eec, f.pki.eec_key, f.cdn1_key,
                              {.common_name = "cdn.com", .san = {"*.content.abc.com"}}, f.pki.rng);
    auto chain = std::vector<ParsedCertificate>{decert, f.pki.eec, f.pki.inter};

    auto accept = validate_chain(input_for(f.pki, chain, "x.content.abc.com"));
    EXPECT_EQ(accept.to_text(), "verdict\tAccept\n");

    auto reject = validate_chain(input_for(f.pki, chain, "b.other.com"));
    auto text = reject.to_text();
    EXPECT_NE(text.find("0\tHostnameNotInScope\t"), std::string::npos);
    EXPECT_NE(text.find("verdict\tReject\n"), std::string::npos);
    EXPECT_NE(reject.to_json().find("\"HostnameNotInScope\""), std::string::npos);

    // determinism: same input, same report
    EXPECT_EQ(validate_chain(input_for(f.pki, chain, "b.other.com")).to_text(), text);
}

// ---------------------------------------------------------------------------
// Defect-injection and monotonicity properties
// ---------------------------------------------------------------------------

enum class Defect { PathLen, Include, Exclude, KeyUsage, Expiry };

struct DefectChain {
    Pki pki = make_pki();
    std::vector<PrivateKey> keys;
    std::vector<ParsedCertificate> chain;  // leaf-first

    explicit DefectChain(const std::set<Defect> &defects) {
        keys.reserve(3);
        std::vector<ParsedCertificate> decerts;  // issuance order, owner side first

        // three DeCerts, defects injected at the deepest link
        for (int depth = 0; depth < 3; ++depth) {
            keys.push_back(PrivateKey::generate(KeyAlgorithm::Ed25519, pki.rng));
            bool leaf = depth == 2;
            DecertSpec spec;
            spec.common_name = "cdn" + std::to_string(depth) + ".com";
            spec.san = {"*.pics.abc.com"};
            spec.path_len = 2 - depth;
            spec.key_usage = KeyUsageSet::of({0, 1, 5});
            if (leaf) {
                if (defects.contains(Defect::PathLen)) spec.path_len = 7;
                if (defects.contains(Defect::Include)) spec.san = {"*.vids.abc.com"};
                if (defects.contains(Defect::Exclude)) spec.excludes = {"a.mail.abc.com"};
                if (defects.contains(Defect::KeyUsage)) spec.key_usage = KeyUsageSet::of({0, 1, 3});
                if (defects.contains(Defect::Expiry)) spec.not_after = kAt - 100;
            }
            const ParsedCertificate &issuer = depth == 0 ? pki.eec : decerts.back();
            const PrivateKey &issuer_key = depth == 0 ? pki.eec_key : keys[depth - 1];
            decerts.push_back(sign_decert(issuer, issuer_key, keys.back(), spec, pki.rng));
        }
        chain.assign(decerts.rbegin(), decerts.rend());
        chain.push_back(pki.eec);
        chain.push_back(pki.inter);
    }
};

ViolationCode code_for(Defect defect) {
    switch (defect) {
        case Defect::PathLen: return ViolationCode::PathLenExceeded;
        case Defect::Include: return ViolationCode::IncludeNotSubset;
        case Defect::Exclude: return ViolationCode::ExcludeNotSubset;
        case Defect::KeyUsage: return ViolationCode::KeyUsageNotSubset;
        case Defect::Expiry: return ViolationCode::Expired;
    }
    return ViolationCode::ChainMalformed;
}

TEST(ValidationProperties, InjectedDefectsAreReportedExhaustively) {
    const Defect all[] = {Defect::PathLen, Defect::Include, Defect::Exclude, Defect::KeyUsage,
                          Defect::Expiry};

    DefectChain clean({});
    auto clean_report =
        validate_chain(input_for(clean.pki, clean.chain, "x.pics.abc.com"));
    ASSERT_EQ(clean_report.verdict, Verdict::Accept) << clean_report.to_text();

    // every subset of defects of size 1..3
    for (size_t mask = 1; mask < (1u << 5); ++mask) {
        if (std::popcount(mask) > 3) continue;
        std::set<Defect> defects;
        for (size_t bit = 0; bit < 5; ++bit)
            if (mask & (1u << bit)) defects.insert(all[bit]);

        DefectChain broken(defects);
        auto report = validate_chain(input_for(broken.pki, broken.chain, "x.pics.abc.com"));
        EXPECT_EQ(report.verdict, Verdict::Reject);
        for (Defect defect : defects)
            EXPECT_TRUE(report.codes().contains(code_for(defect)))
                << "defect set lost " << violation_code_name(code_for(defect)) << "\n"
                << report.to_text();
    }
}

TEST(ValidationProperties, AcceptChainsAreMonotone) {
    auto universe = enumerate_universe({"a", "b", "x"}, 4, DomainName::parse("abc.com"));
    std::mt19937_64 seeds(505);
    for (int round = 0; round < 25; ++round) {
        DefectChain sample({});
        auto report = validate_chain(input_for(sample.pki, sample.chain, "x.pics.abc.com"));
        ASSERT_EQ(report.verdict, Verdict::Accept);

        auto split = split_chain(sample.chain);
        auto leaf_scope = delegation_scope(split.certs[0]);
        for (const auto &name : universe) {
            if (!scope_contains(leaf_scope, name)) continue;
            for (size_t i = 1; i < split.decert_count; ++i)
                ASSERT_TRUE(scope_contains(delegation_scope(split.certs[i]), name))
                    << name.text();
            ASSERT_TRUE(scope_contains(eec_issuer_scope(split.eec()), name)) << name.text();
        }
    }
}

TEST(ValidationProperties, PathLengthBoundsChainDepth) {
    // an Accept chain whose first DeCert has pathLen 2 carries exactly 3 DeCerts,
    // and hanging a fourth off the zero-budget leaf is rejected
    Fig f;
    std::vector<PrivateKey> keys;
    keys.reserve(4);
    std::vector<ParsedCertificate> decerts;  // issuance order
    std::vector<uint32_t> lens = {2, 1, 0};
    for (size_t i = 0; i < lens.size(); ++i) {
        keys.push_back(PrivateKey::generate(KeyAlgorithm::Ed25519, f.pki.rng));
        const ParsedCertificate &issuer = i == 0 ? f.pki.eec : decerts.back();
        const PrivateKey &issuer_key = i == 0 ? f.pki.eec_key : keys[i - 1];
        decerts.push_back(sign_decert(issuer, issuer_key, keys.back(),
                                      {.common_name = "cdn" + std::to_string(i) + ".com",
                                       .san = {"*.pics.abc.com"},
                                       .path_len = lens[i]},
                                      f.pki.rng));
    }
    std::vector<ParsedCertificate> chain(decerts.rbegin(), decerts.rend());
    chain.push_back(f.pki.eec);
    chain.push_back(f.pki.inter);
    auto report = validate_chain(input_for(f.pki, chain, "x.pics.abc.com"));
    EXPECT_EQ(report.verdict, Verdict::Accept) << report.to_text();
    EXPECT_EQ(split_chain(chain).decert_count, 3u);

    keys.push_back(PrivateKey::generate(KeyAlgorithm::Ed25519, f.pki.rng));
    auto fourth = sign_decert(decerts.back(), keys[2], keys.back(),
                              {.common_name = "cdn3.com", .san = {"*.pics.abc.com"}, .path_len = 0},
                              f.pki.rng);
    std::vector<ParsedCertificate> deep = {fourth};
    deep.insert(deep.end(), chain.begin(), chain.end());
    auto deep_report = validate_chain(input_for(f.pki, deep, "x.pics.abc.com"));
    EXPECT_EQ(deep_report.verdict, Verdict::Reject);
    EXPECT_TRUE(deep_report.codes().contains(ViolationCode::PathLenExceeded));
}

}  // namespace
