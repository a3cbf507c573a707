#include "decert/issuance.hpp"

#include <gtest/gtest.h>

#include <random>

#include "decert/error.hpp"
#include "decert/validation.hpp"
#include "support/test_pki.hpp"

using namespace decert;
using namespace testpki;

namespace {

std::set<PolicyCode> policy_codes(const std::vector<PolicyViolation> &violations) {
    std::set<PolicyCode> out;
    for (const auto &violation : violations) out.insert(violation.code);
    return out;
}

DomainScope scope_of(std::initializer_list<std::string> include,
                     std::initializer_list<std::string> exclude = {}) {
    std::vector<DomainPattern> inc;
    for (const auto &text : include) inc.push_back(parse_pattern(text));
    std::vector<DomainName> exc;
    for (const auto &text : exclude) exc.push_back(DomainName::parse(text));
    return DomainScope::make(std::move(inc), std::move(exc));
}

TEST(DelegationRequest, CreateAndRoundTrip) {
    auto key = PrivateKey::generate(KeyAlgorithm::EcdsaP256);
    auto request = DelegationRequest::create("cdn.com", key, scope_of({"*.content.abc.com"}),
                                             std::nullopt, 0);
    EXPECT_EQ(request.subject_common_name(), "cdn.com");
    EXPECT_EQ(request.requested_scope(), scope_of({"*.content.abc.com"}));
    EXPECT_EQ(request.requested_path_len(), 0u);
    EXPECT_EQ(request.public_key(), key.spki());
    EXPECT_TRUE(request.verify_proof());

    auto reparsed = DelegationRequest::from_der(request.to_der());
    EXPECT_EQ(reparsed.subject_common_name(), "cdn.com");
    EXPECT_EQ(reparsed.requested_scope(), request.requested_scope());
    EXPECT_TRUE(reparsed.verify_proof());
}

TEST(DelegationRequest, CarriesKeyUsageAndExcludes) {
    auto key = PrivateKey::generate(KeyAlgorithm::Ed25519);
    auto request = DelegationRequest::create(
        "cdn.com", key, scope_of({"*.pics.abc.com"}, {"a.pics.abc.com"}),
        KeyUsageSet::of({0, 1}), 2);
    auto reparsed = DelegationRequest::from_der(request.to_der());
    EXPECT_EQ(reparsed.requested_key_usage(), KeyUsageSet::of({0, 1}));
    EXPECT_EQ(reparsed.requested_scope(), scope_of({"*.pics.abc.com"}, {"a.pics.abc.com"}));
    EXPECT_EQ(reparsed.requested_path_len(), 2u);
}

TEST(DelegationRequest, TamperedScopeBreaksProof) {
    auto key = PrivateKey::generate(KeyAlgorithm::Ed25519);
    auto request =
        DelegationRequest::create("cdn.com", key, scope_of({"*.content.abc.com"}), std::nullopt, 0);

    auto der = request.to_der();
    const std::string needle = "content.abc.com";
    auto at = std::search(der.begin(), der.end(), needle.begin(), needle.end());
    ASSERT_NE(at, der.end());
    *at = static_cast<uint8_t>('k');  // content -> kontent, structurally intact

    auto tampered = DelegationRequest::from_der(der);
    EXPECT_NE(tampered.requested_scope(), request.requested_scope());
    EXPECT_FALSE(tampered.verify_proof());
}

TEST(DelegationRequest, GarbageIsMalformed) {
    std::vector<uint8_t> garbage = {0x01, 0x02, 0x03};
    try {
        DelegationRequest::from_der(garbage);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::MalformedRequest);
    }
}

TEST(PolicyCheck, Fig2aRequestAgainstZeroBudget) {
    auto key = PrivateKey::generate(KeyAlgorithm::Ed25519);
    auto request =
        DelegationRequest::create("cdn2.com", key, scope_of({"*.vids.abc.com"}), std::nullopt, 0);

    // issuing context: Fig 2a first DeCert (include *.pics, exclude a.pics, pathLen 0)
    auto issuer_scope = scope_of({"*.pics.abc.com"}, {"a.pics.abc.com"});
    auto violations = policy_check(request, IssuerPolicy{}, issuer_scope, std::nullopt, 0);
    EXPECT_EQ(policy_codes(violations),
              (std::set<PolicyCode>{PolicyCode::PathLenExceeded, PolicyCode::IncludeNotSubset}));
}

TEST(PolicyCheck, MaximalButLegalRequestPasses) {
    auto key = PrivateKey::generate(KeyAlgorithm::Ed25519);
    auto issuer_scope = scope_of({"*.pics.abc.com"}, {"a.pics.abc.com"});
    auto request = DelegationRequest::create(
        "cdn2.com", key, scope_of({"*.pics.abc.com"}, {"a.pics.abc.com"}), std::nullopt, 0);
    EXPECT_TRUE(policy_check(request, IssuerPolicy{}, issuer_scope, std::nullopt, 1).empty());
}

TEST(PolicyCheck, KeyUsageMustNest) {
    auto key = PrivateKey::generate(KeyAlgorithm::Ed25519);
    auto request = DelegationRequest::create("cdn2.com", key, scope_of({"*.pics.abc.com"}),
                                             KeyUsageSet::of({1, 3, 5, 6}), 0);
    auto violations = policy_check(request, IssuerPolicy{}, scope_of({"*.pics.abc.com"}),
                                   KeyUsageSet::of({0, 1, 5, 6}), 1);
    EXPECT_EQ(policy_codes(violations), std::set<PolicyCode>{PolicyCode::KeyUsageNotSubset});
}

TEST(PolicyCheck, AlgorithmPolicy) {
    auto key = PrivateKey::generate(KeyAlgorithm::Ed25519);
    auto request =
        DelegationRequest::create("cdn.com", key, scope_of({"*.abc.com"}), std::nullopt, 0);
    IssuerPolicy policy;
    policy.allowed_key_algorithms = {KeyAlgorithm::EcdsaP256};
    auto violations = policy_check(request, policy, scope_of({"*.abc.com"}), std::nullopt, 1);
    EXPECT_EQ(policy_codes(violations), std::set<PolicyCode>{PolicyCode::UnsupportedAlgorithm});
}

TEST(IssueDeCert, Fig1Issuance) {
    auto pki = make_pki();
    auto key = PrivateKey::generate(KeyAlgorithm::Ed25519, pki.rng);
    auto request =
        DelegationRequest::create("cdn.com", key, scope_of({"*.content.abc.com"}), std::nullopt, 0);

    auto cert = issue_decert(request, pki.eec, pki.eec_key, IssuerPolicy{}, fixed_clock(kAt), {},
                             pki.rng);
    EXPECT_EQ(cert.subject_common_name(), "cdn.com");
    EXPECT_EQ(cert.issuer_common_name(), "abc.com");
    EXPECT_EQ(cert.not_before(), kAt - 60);
    EXPECT_EQ(cert.not_after() - cert.not_before(), 21600);  // 6 h default
    EXPECT_TRUE(is_decert(cert));
    EXPECT_TRUE(cert.verify_signed_by(pki.eec));

    auto second = issue_decert(request, pki.eec, pki.eec_key, IssuerPolicy{}, fixed_clock(kAt), {},
                               pki.rng);
    EXPECT_NE(cert.serial(), second.serial());
}

TEST(IssueDeCert, RejectsPolicyViolations) {
    auto pki = make_pki();
    auto key = PrivateKey::generate(KeyAlgorithm::Ed25519, pki.rng);
    auto request =
        DelegationRequest::create("cdn.com", key, scope_of({"*.other.com"}), std::nullopt, 0);
    try {
        issue_decert(request, pki.eec, pki.eec_key, IssuerPolicy{}, fixed_clock(kAt), {}, pki.rng);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::PolicyViolation);
        EXPECT_NE(std::string(e.what()).find("IncludeNotSubset"), std::string::npos);
    }
}

TEST(IssueDeCert, FreshCertificateValidatesAgainstItsIssuer) {
    auto pki = make_pki();
    auto key = PrivateKey::generate(KeyAlgorithm::Ed25519, pki.rng);
    auto request = DelegationRequest::create(
        "cdn.com", key, scope_of({"*.pics.abc.com"}, {"a.pics.abc.com"}), std::nullopt, 1);
    auto cert = issue_decert(request, pki.eec, pki.eec_key, IssuerPolicy{}, fixed_clock(kAt), {},
                             pki.rng);

    ValidationInput input;
    input.chain = {cert, pki.eec, pki.inter};
    input.trust_anchors = {pki.root};
    input.hostname = DomainName::parse("x.pics.abc.com");
    input.at = kAt;
    auto report = validate_chain(input);
    EXPECT_EQ(report.verdict, Verdict::Accept) << report.to_text();
}

TEST(RenewDeCert, KeyReuseAndRotation) {
    auto pki = make_pki();
    auto key = PrivateKey::generate(KeyAlgorithm::Ed25519, pki.rng);
    auto request =
        DelegationRequest::create("cdn.com", key, scope_of({"*.content.abc.com"}), std::nullopt, 0);
    auto original = issue_decert(request, pki.eec, pki.eec_key, IssuerPolicy{}, fixed_clock(kAt),
                                 {}, pki.rng);

    auto renewed = renew_decert(original, pki.eec, pki.eec_key, fixed_clock(kAt + 3600), true,
                                nullptr, std::nullopt, nullptr, pki.rng);
    EXPECT_EQ(renewed.public_key(), original.public_key());
    EXPECT_NE(renewed.serial(), original.serial());
    EXPECT_EQ(renewed.san_patterns(), original.san_patterns());
    EXPECT_EQ(renewed.delegation_info(), original.delegation_info());
    EXPECT_EQ(renewed.not_after() - renewed.not_before(),
              original.not_after() - original.not_before());

    auto again = renew_decert(renewed, pki.eec, pki.eec_key, fixed_clock(kAt + 7200), true,
                              nullptr, std::nullopt, nullptr, pki.rng);
    std::set<std::string> serials = {original.serial_hex(), renewed.serial_hex(),
                                     again.serial_hex()};
    EXPECT_EQ(serials.size(), 3u);

    auto rotated_key = PrivateKey::generate(KeyAlgorithm::Ed25519, pki.rng);
    auto rotated = renew_decert(original, pki.eec, pki.eec_key, fixed_clock(kAt + 3600), false,
                                &rotated_key, std::nullopt, nullptr, pki.rng);
    EXPECT_NE(rotated.public_key(), original.public_key());
    EXPECT_EQ(rotated.public_key(), rotated_key.spki());
}

TEST(RenewDeCert, GuardsSubjectIdentity) {
    auto pki = make_pki();
    auto other_pki = make_pki("other.com", 777);
    auto key = PrivateKey::generate(KeyAlgorithm::Ed25519, pki.rng);
    auto request =
        DelegationRequest::create("cdn.com", key, scope_of({"*.content.abc.com"}), std::nullopt, 0);
    auto cert = issue_decert(request, pki.eec, pki.eec_key, IssuerPolicy{}, fixed_clock(kAt), {},
                             pki.rng);

    // a different issuer never signed this certificate
    try {
        renew_decert(cert, other_pki.eec, other_pki.eec_key, fixed_clock(kAt));
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::UnknownSubject);
    }

    // revoked subjects are refused
    auto store_path = std::filesystem::temp_directory_path() / "decert-test-renew-store.txt";
    std::filesystem::remove(store_path);
    auto store = RevocationStore::open(store_path);
    store.revoke(cert.serial(), "test", fixed_clock(kAt));
    try {
        renew_decert(cert, pki.eec, pki.eec_key, fixed_clock(kAt), true, nullptr, std::nullopt,
                     &store);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::RevokedSubject);
    }
    std::filesystem::remove(store_path);
}

TEST(RenewDeCert, KeyReusePreservesGrandchildChains) {
    // cascading-invalidity mitigation: children signed under the reused key
    // keep verifying after the parent is renewed
    auto pki = make_pki();
    auto cdn1_key = PrivateKey::generate(KeyAlgorithm::Ed25519, pki.rng);
    auto cdn2_key = PrivateKey::generate(KeyAlgorithm::Ed25519, pki.rng);

    auto req1 = DelegationRequest::create("cdn1.com", cdn1_key, scope_of({"*.pics.abc.com"}),
                                          std::nullopt, 1);
    auto cdn1 = issue_decert(req1, pki.eec, pki.eec_key, IssuerPolicy{}, fixed_clock(kAt),
                             {.validity_seconds = 7200}, pki.rng);

    auto req2 = DelegationRequest::create("cdn2.com", cdn2_key, scope_of({"*.pics.abc.com"}),
                                          std::nullopt, 0);
    auto cdn2 = issue_decert(req2, cdn1, cdn1_key, IssuerPolicy{}, fixed_clock(kAt),
                             {.validity_seconds = 86400}, pki.rng);

    auto renewed_cdn1 = renew_decert(cdn1, pki.eec, pki.eec_key, fixed_clock(kAt + 7000), true,
                                     nullptr, std::nullopt, nullptr, pki.rng);

    ValidationInput input;
    input.chain = {cdn2, renewed_cdn1, pki.eec, pki.inter};
    input.trust_anchors = {pki.root};
    input.hostname = DomainName::parse("x.pics.abc.com");
    input.at = kAt + 7100;
    EXPECT_EQ(validate_chain(input).verdict, Verdict::Accept);

    auto fresh_key = PrivateKey::generate(KeyAlgorithm::Ed25519, pki.rng);
    auto rotated_cdn1 = renew_decert(cdn1, pki.eec, pki.eec_key, fixed_clock(kAt + 7000), false,
                                     &fresh_key, std::nullopt, nullptr, pki.rng);
    input.chain = {cdn2, rotated_cdn1, pki.eec, pki.inter};
    auto report = validate_chain(input);
    EXPECT_EQ(report.verdict, Verdict::Reject);
    EXPECT_TRUE(report.codes().contains(ViolationCode::SignatureInvalid)) << report.to_text();
}

TEST(IssuedStore, PersistsAcrossReopen) {
    auto dir = std::filesystem::temp_directory_path() / "decert-test-issued";
    std::filesystem::remove_all(dir);
    auto pki = make_pki();
    auto key = PrivateKey::generate(KeyAlgorithm::Ed25519, pki.rng);
    auto request =
        DelegationRequest::create("cdn.com", key, scope_of({"*.content.abc.com"}), std::nullopt, 0);
    auto cert = issue_decert(request, pki.eec, pki.eec_key, IssuerPolicy{}, fixed_clock(kAt), {},
                             pki.rng);

    {
        auto store = IssuedStore::open(dir);
        store.record(cert);
        EXPECT_EQ(store.size(), 1u);
    }
    auto reopened = IssuedStore::open(dir);
    EXPECT_EQ(reopened.size(), 1u);
    auto found = reopened.find(cert.serial());
    ASSERT_TRUE(found);
    EXPECT_EQ(*found, cert);
    EXPECT_FALSE(reopened.find({0x01, 0x02}));
    std::filesystem::remove_all(dir);
}

// policy_check and validate_link must agree: a request passes iff the
// materialized link carries no delegation violations.
TEST(IssuanceProperties, PolicyCheckMatchesLinkValidation) {
    auto pki = make_pki();
    std::mt19937_64 rng(31337);
    auto bases = enumerate_universe({"a", "b"}, 2, DomainName::parse("abc.com"));
    std::uniform_int_distribution<size_t> base_at(0, bases.size() - 1);
    std::uniform_int_distribution<int> coin(0, 1);
    std::uniform_int_distribution<uint32_t> small(0, 2);

    auto random_scope = [&] {
        std::vector<DomainPattern> include;
        include.push_back(DomainPattern{coin(rng) ? PatternKind::Subtree : PatternKind::Exact,
                                        bases[base_at(rng)]});
        if (coin(rng))
            include.push_back(DomainPattern{PatternKind::Subtree, bases[base_at(rng)]});
        std::vector<DomainName> exclude;
        if (coin(rng)) exclude.push_back(bases[base_at(rng)]);
        return DomainScope::make(std::move(include), std::move(exclude));
    };

    int passed = 0;
    for (int round = 0; round < 60; ++round) {
        auto issuer_key = PrivateKey::generate(KeyAlgorithm::Ed25519, pki.rng);
        auto issuer_ku = coin(rng) ? std::optional(KeyUsageSet::of({0, 1, 5})) : std::nullopt;
        auto issuer = sign_decert(pki.eec, pki.eec_key, issuer_key,
                                  {.common_name = "cdn-parent.com",
                                   .san = {"*.abc.com"},
                                   .path_len = small(rng),
                                   .key_usage = issuer_ku},
                                  pki.rng);
        // requested scope may or may not nest inside the issuer's
        DecertSpec child_spec;
        child_spec.common_name = "cdn-child.com";
        auto requested = random_scope();
        for (const auto &pattern : requested.include) child_spec.san.push_back(pattern.text());
        for (const auto &entry : requested.exclude) child_spec.excludes.push_back(entry.text());
        child_spec.path_len = small(rng);
        child_spec.key_usage =
            coin(rng) ? std::optional(KeyUsageSet::of({0, coin(rng) ? 1 : 3})) : std::nullopt;

        auto subject_key = PrivateKey::generate(KeyAlgorithm::Ed25519, pki.rng);
        auto request = DelegationRequest::create(child_spec.common_name, subject_key, requested,
                                                 child_spec.key_usage, *child_spec.path_len);
        auto policy_result = policy_check_against(request, IssuerPolicy{}, issuer);

        auto child = sign_decert(issuer, issuer_key, subject_key, child_spec, pki.rng);
        auto link_result = validate_link(issuer, child);

        ASSERT_EQ(policy_result.empty(), link_result.empty())
            << "issuer " << delegation_scope(issuer).text() << " child "
            << delegation_scope(child).text();
        passed += policy_result.empty();
    }
    EXPECT_GT(passed, 5);
    EXPECT_LT(passed, 55);
}

}  // namespace
