#include "decert/fixtures.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "decert/certificate.hpp"
#include "decert/clock.hpp"
#include "decert/delegation_info.hpp"
#include "decert/error.hpp"
#include "decert/keys.hpp"
#include "decert/revocation.hpp"

namespace decert {

namespace {

using namespace fixture_times;

void write_file(const std::filesystem::path &path, std::string_view content) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out || !(out << content))
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

struct Issued {
    ParsedCertificate cert;
    PrivateKey key;
};

struct Generator {
    RandomBytes rng;
    std::filesystem::path out;
    nlohmann::json meta = nlohmann::json::object();

    ParsedCertificate build(const CertTemplate &tpl, const ParsedCertificate *issuer,
                            const PrivateKey &signer) {
        auto der = issuer ? build_certificate(tpl, *issuer, signer) : build_self_signed(tpl, signer);
        return parse_certificate_der(der);
    }

    Issued make_ca(const std::string &cn, std::optional<int> path_len,
                   const ParsedCertificate *issuer, const PrivateKey *signer) {
        auto key = PrivateKey::generate(KeyAlgorithm::Ed25519, rng);
        CertTemplate tpl;
        tpl.subject_common_name = cn;
        tpl.is_ca = true;
        tpl.basic_path_len = path_len;
        tpl.serial = random_serial(rng);
        tpl.not_before = kCaNotBefore;
        tpl.not_after = kCaNotAfter;
        tpl.public_key = key.spki();
        auto cert = build(tpl, issuer, signer ? *signer : key);
        return {cert, std::move(key)};
    }

    Issued make_eec(const std::string &domain, const ParsedCertificate &issuer,
                    const PrivateKey &signer) {
        auto key = PrivateKey::generate(KeyAlgorithm::Ed25519, rng);
        CertTemplate tpl;
        tpl.subject_common_name = domain;
        tpl.san = {parse_pattern(domain)};
        tpl.serial = random_serial(rng);
        tpl.not_before = kCaNotBefore;
        tpl.not_after = kCaNotAfter;
        tpl.public_key = key.spki();
        auto cert = build(tpl, &issuer, signer);
        return {cert, std::move(key)};
    }

    struct DecertArgs {
        std::string cn;
        std::vector<std::string> san;
        std::vector<std::string> excludes;
        uint32_t path_len = 0;
        std::optional<KeyUsageSet> key_usage;
        int64_t not_before = kChainNotBefore;
        int64_t not_after = kChainNotAfter;
        std::optional<std::string> crl_url;
        std::optional<std::string> revocation_dns_suffix;
    };

    Issued make_decert(const DecertArgs &args, const ParsedCertificate &issuer,
                       const PrivateKey &signer) {
        auto key = PrivateKey::generate(KeyAlgorithm::Ed25519, rng);
        CertTemplate tpl;
        tpl.subject_common_name = args.cn;
        for (const auto &text : args.san) tpl.san.push_back(parse_pattern(text));
        tpl.key_usage = args.key_usage;
        DelegationInfo info;
        for (const auto &text : args.excludes)
            info.exclude_domains.push_back(DomainName::parse(text));
        info.delegation_path_len = args.path_len;
        tpl.delegation_info = info;
        tpl.serial = random_serial(rng);
        tpl.not_before = args.not_before;
        tpl.not_after = args.not_after;
        tpl.public_key = key.spki();
        tpl.crl_url = args.crl_url;
        tpl.revocation_dns_suffix = args.revocation_dns_suffix;
        auto cert = build(tpl, &issuer, signer);
        return {cert, std::move(key)};
    }

    void write_fixture(const std::string &name, const std::vector<ParsedCertificate> &chain,
                       const PrivateKey &server_key, const std::string &hostname,
                       int64_t issued_at) {
        write_file(out / name / "chain.pem", to_pem_chain(chain));
        write_file(out / name / "server.key", server_key.to_pem());
        meta[name] = {{"hostname", hostname},
                      {"issued_at", format_rfc3339(issued_at)},
                      {"chain_length", chain.size()}};
    }
};

}  // namespace

std::filesystem::path generate_fixtures(const std::filesystem::path &out_dir, uint64_t seed) {
    Generator gen{seeded_random(seed), out_dir};
    std::filesystem::create_directories(out_dir);

    auto root = gen.make_ca("decert fixture root ca", 1, nullptr, nullptr);
    auto inter = gen.make_ca("decert fixture intermediate ca", 0, &root.cert, &root.key);
    auto owner = gen.make_eec("abc.com", inter.cert, inter.key);
    auto poc_owner = gen.make_eec("a.localhost", inter.cert, inter.key);

    write_file(out_dir / "anchors.pem", root.cert.to_pem());
    write_file(out_dir / "ca" / "root.pem", root.cert.to_pem());
    write_file(out_dir / "ca" / "root.key", root.key.to_pem());
    write_file(out_dir / "ca" / "intermediate.pem", inter.cert.to_pem());
    write_file(out_dir / "ca" / "intermediate.key", inter.key.to_pem());
    write_file(out_dir / "ca" / "abc.com.pem", owner.cert.to_pem());
    write_file(out_dir / "ca" / "abc.com.key", owner.key.to_pem());
    write_file(out_dir / "ca" / "a.localhost.pem", poc_owner.cert.to_pem());
    write_file(out_dir / "ca" / "a.localhost.key", poc_owner.key.to_pem());

    // fig1: the worked example of a valid single delegation
    auto fig1 = gen.make_decert({.cn = "cdn.com", .san = {"*.content.abc.com"}, .path_len = 0},
                                owner.cert, owner.key);
    gen.write_fixture("fig1", {fig1.cert, owner.cert, inter.cert}, fig1.key, "x.content.abc.com",
                      kChainNotBefore);

    // fig2a: second delegation under a zero path budget, widened include
    auto fig2a_first = gen.make_decert({.cn = "cdn1.com",
                                        .san = {"*.pics.abc.com"},
                                        .excludes = {"a.pics.abc.com"},
                                        .path_len = 0},
                                       owner.cert, owner.key);
    auto fig2a_second = gen.make_decert({.cn = "cdn2.com", .san = {"*.vids.abc.com"}, .path_len = 0},
                                        fig2a_first.cert, fig2a_first.key);
    gen.write_fixture("fig2a", {fig2a_second.cert, fig2a_first.cert, owner.cert, inter.cert},
                      fig2a_second.key, "x.vids.abc.com", kChainNotBefore);

    // fig2b: key usage, path length and exclude all out of bounds
    auto fig2b_first = gen.make_decert({.cn = "cdn1.com",
                                        .san = {"*.pics.abc.com"},
                                        .path_len = 1,
                                        .key_usage = KeyUsageSet::of({1, 5, 6})},
                                       owner.cert, owner.key);
    auto fig2b_second = gen.make_decert({.cn = "cdn2.com",
                                         .san = {"*.pics.abc.com"},
                                         .excludes = {"a.vids.abc.com"},
                                         .path_len = 5,
                                         .key_usage = KeyUsageSet::of({1, 3, 5, 6})},
                                        fig2b_first.cert, fig2b_first.key);
    gen.write_fixture("fig2b", {fig2b_second.cert, fig2b_first.cert, owner.cert, inter.cert},
                      fig2b_second.key, "x.pics.abc.com", kChainNotBefore);

    // poc: the localhost matrix with an excluded subtree
    auto poc = gen.make_decert({.cn = "cdn.localhost",
                                .san = {"*.a.localhost"},
                                .excludes = {"b.a.localhost"},
                                .path_len = 0},
                               poc_owner.cert, poc_owner.key);
    gen.write_fixture("poc", {poc.cert, poc_owner.cert, inter.cert}, poc.key, "a.a.localhost",
                      kChainNotBefore);

    // expired: fig1 shape whose window closed long ago
    auto expired = gen.make_decert({.cn = "cdn.com",
                                    .san = {"*.content.abc.com"},
                                    .path_len = 0,
                                    .not_after = kExpiredNotAfter},
                                   owner.cert, owner.key);
    gen.write_fixture("expired", {expired.cert, owner.cert, inter.cert}, expired.key,
                      "x.content.abc.com", kChainNotBefore);

    // shortlived: owner-policy default six-hour window
    auto shortlived = gen.make_decert({.cn = "cdn.com",
                                       .san = {"*.content.abc.com"},
                                       .path_len = 0,
                                       .not_before = kShortlivedIssuedAt - 60,
                                       .not_after = kShortlivedIssuedAt - 60 + 21600},
                                      owner.cert, owner.key);
    gen.write_fixture("shortlived", {shortlived.cert, owner.cert, inter.cert}, shortlived.key,
                      "x.content.abc.com", kShortlivedIssuedAt);

    // revoked: fig1 shape with its serial published in both revocation forms
    auto revoked = gen.make_decert({.cn = "cdn.com",
                                    .san = {"*.content.abc.com"},
                                    .path_len = 0,
                                    .crl_url = std::string("file://revoked/crl.der"),
                                    .revocation_dns_suffix = std::string("abc.com")},
                                   owner.cert, owner.key);
    gen.write_fixture("revoked", {revoked.cert, owner.cert, inter.cert}, revoked.key,
                      "x.content.abc.com", kChainNotBefore);
    {
        auto store_path = out_dir / "revoked" / "store.txt";
        std::filesystem::remove(store_path);
        auto store = RevocationStore::open(store_path);
        store.revoke(revoked.cert.serial(), "delegation terminated", fixed_clock(kRevokedAt));
        auto crl = CrlDocument::build(store, owner.cert, owner.key, fixed_clock(kRevokedAt),
                                      10 * 365 * 24 * 3600ll);
        auto der = crl.to_der();
        write_file(out_dir / "revoked" / "crl.der",
                   std::string_view(reinterpret_cast<const char *>(der.data()), der.size()));
        write_file(out_dir / "revoked" / "crl.pem", crl.to_pem());
        write_file(out_dir / "revoked" / "revocations.zone",
                   zone_to_text(export_zone(store, DomainName::parse("abc.com"))));
    }

    std::string manifest =
        "# fixture\thostname\tmode\texpected-verdict\texpected-codes-csv\n"
        "expired\tx.content.abc.com\taware\tReject\tExpired\n"
        "fig1\tx.content.abc.com\taware\tAccept\t-\n"
        "fig1\tx.content.abc.com\tstrict\tReject\tUnknownCriticalExtension\n"
        "fig2a\tx.vids.abc.com\taware\tReject\tIncludeNotSubset,PathLenExceeded\n"
        "fig2b\tx.pics.abc.com\taware\tReject\tExcludeNotSubset,KeyUsageNotSubset,PathLenExceeded\n"
        "poc\ta.a.localhost\taware\tAccept\t-\n"
        "poc\tb.a.localhost\taware\tReject\tHostnameExcluded\n"
        "poc\tc.b.a.localhost\taware\tReject\tHostnameExcluded\n"
        "poc\ta.a.localhost\tstrict\tReject\tUnknownCriticalExtension\n"
        "poc\tb.a.localhost\tstrict\tReject\tUnknownCriticalExtension\n"
        "poc\tc.b.a.localhost\tstrict\tReject\tUnknownCriticalExtension\n";
    auto manifest_path = out_dir / "expected_outcomes.tsv";
    write_file(manifest_path, manifest);
    write_file(out_dir / "fixtures.json", gen.meta.dump(2) + "\n");
    return manifest_path;
}

}  // namespace decert
