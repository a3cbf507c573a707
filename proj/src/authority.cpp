#include "decert/authority.hpp"

#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "decert/encoding.hpp"
#include "decert/error.hpp"

namespace decert {

namespace {

std::string renewal_transcript(const std::string &serial_hex, const std::string &nonce_hex) {
    return "decert-renew-v1\n" + serial_hex + "\n" + nonce_hex + "\n";
}

std::map<std::string, std::string> parse_kv_lines(const std::string &body) {
    std::map<std::string, std::string> out;
    size_t pos = 0;
    while (pos < body.size()) {
        size_t eol = body.find('\n', pos);
        if (eol == std::string::npos) eol = body.size();
        std::string line = body.substr(pos, eol - pos);
        pos = eol + 1;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        size_t eq = line.find('=');
        if (eq != std::string::npos) out[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return out;
}

struct NonceChallenge {
    std::vector<uint8_t> nonce;
    int64_t issued_at = 0;
    std::string bound_subject_key_hash;  // hex of sha256(SPKI)
};

}  // namespace

AuthorityConfig AuthorityConfig::from_json_file(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorCode::IoError, "bad authority config: " + std::string(e.what()));
    }

    AuthorityConfig config;
    config.listen_address = doc.value("listen_address", config.listen_address);
    config.port = doc.value("port", config.port);
    config.issuer_cert_path = doc.at("issuer_cert").get<std::string>();
    config.issuer_key_path = doc.at("issuer_key").get<std::string>();
    config.issued_dir = doc.at("issued_dir").get<std::string>();
    config.revocation_store_path = doc.at("revocation_store").get<std::string>();
    config.nonce_lifetime_seconds = doc.value("nonce_lifetime_seconds", config.nonce_lifetime_seconds);
    config.renewals_per_hour = doc.value("renewals_per_hour", config.renewals_per_hour);
    config.crl_lifetime_seconds = doc.value("crl_lifetime_seconds", config.crl_lifetime_seconds);
    if (doc.contains("crl_url")) config.crl_url = doc["crl_url"].get<std::string>();
    if (doc.contains("revocation_dns_suffix"))
        config.revocation_dns_suffix = doc["revocation_dns_suffix"].get<std::string>();
    config.policy.default_validity_seconds =
        doc.value("default_validity_seconds", config.policy.default_validity_seconds);
    config.policy.max_validity_seconds =
        doc.value("max_validity_seconds", config.policy.max_validity_seconds);
    config.policy.max_path_len = doc.value("max_path_len", config.policy.max_path_len);
    return config;
}

struct AuthorityService::Impl {
    AuthorityConfig config;
    Clock clock;
    ParsedCertificate issuer_cert;
    PrivateKey issuer_key;
    IssuedStore issued;
    RevocationStore revocations;

    httplib::Server server;
    std::thread runner;
    uint16_t bound_port = 0;

    std::mutex state_mutex;
    std::map<std::string, NonceChallenge> nonces;         // nonce-hex -> challenge
    std::map<std::string, std::pair<double, int64_t>> buckets;  // key-hash -> tokens, last refill
    uint64_t published_generation = ~0ull;
    std::vector<uint8_t> cached_crl_der;
    std::string cached_zone_text;

    Impl(AuthorityConfig cfg, Clock clk)
        : config(std::move(cfg)),
          clock(std::move(clk)),
          issuer_cert(load_pem_certificates(config.issuer_cert_path).front()),
          issuer_key(PrivateKey::load(config.issuer_key_path)),
          issued(IssuedStore::open(config.issued_dir)),
          revocations(RevocationStore::open(config.revocation_store_path)) {}

    bool take_renewal_token(const std::string &key_hash) {
        std::lock_guard lock(state_mutex);
        int64_t now = clock();
        auto &bucket = buckets.try_emplace(key_hash, config.renewals_per_hour, now).first->second;
        double refill = static_cast<double>(now - bucket.second) * config.renewals_per_hour / 3600.0;
        bucket.first = std::min<double>(config.renewals_per_hour, bucket.first + refill);
        bucket.second = now;
        if (bucket.first < 1.0) return false;
        bucket.first -= 1.0;
        return true;
    }

    // Rebuilds the CRL and zone when the store has changed (including appends
    // made by other processes against the same file).
    void refresh_published() {
        std::lock_guard lock(state_mutex);
        revocations.reload();
        if (revocations.generation() == published_generation) return;
        auto crl = CrlDocument::build(revocations, issuer_cert, issuer_key, clock,
                                      config.crl_lifetime_seconds);
        cached_crl_der = crl.to_der();
        auto domain = DomainName::try_parse(config.revocation_dns_suffix
                                                ? *config.revocation_dns_suffix
                                                : issuer_cert.subject_common_name());
        cached_zone_text =
            domain ? zone_to_text(export_zone(revocations, *domain)) : std::string{};
        published_generation = revocations.generation();
    }

    void handle_issue(const httplib::Request &req, httplib::Response &res) {
        DelegationRequest request = DelegationRequest::from_der(
            {reinterpret_cast<const uint8_t *>(req.body.data()), req.body.size()});

        auto violations = policy_check_against(request, config.policy, issuer_cert);
        if (!violations.empty()) {
            std::string body;
            for (const auto &violation : violations)
                body += std::string(policy_code_name(violation.code)) + "\t" + violation.detail +
                        "\n";
            res.status = 422;
            res.set_content(body, "text/plain");
            return;
        }

        IssueOptions options;
        options.crl_url = config.crl_url;
        options.revocation_dns_suffix = config.revocation_dns_suffix;
        if (req.has_param("validity"))
            options.validity_seconds = std::stoll(req.get_param_value("validity"));

        auto cert = [&] {
            std::lock_guard lock(state_mutex);
            auto issued_cert =
                issue_decert(request, issuer_cert, issuer_key, config.policy, clock, options);
            issued.record(issued_cert);
            return issued_cert;
        }();
        res.status = 201;
        res.set_content(cert.to_pem() + issuer_cert.to_pem(), "application/x-pem-file");
    }

    void handle_nonce(const httplib::Request &req, httplib::Response &res) {
        std::string key_hash = req.get_param_value("key");
        if (key_hash.size() != 64 || !hex_decode(key_hash)) {
            res.status = 400;
            res.set_content("MalformedRequest\tkey must be the hex sha256 of the subject SPKI\n",
                            "text/plain");
            return;
        }
        std::vector<uint8_t> nonce(32);
        system_random()(nonce);
        std::lock_guard lock(state_mutex);
        nonces[hex_encode(nonce)] = {nonce, clock(), key_hash};
        res.set_content("nonce=" + hex_encode(nonce) + "\n", "text/plain");
    }

    void handle_renew(const httplib::Request &req, httplib::Response &res) {
        auto fields = parse_kv_lines(req.body);
        auto serial_hex = fields.find("serial");
        auto nonce_hex = fields.find("nonce");
        auto sig_b64 = fields.find("sig");
        if (serial_hex == fields.end() || nonce_hex == fields.end() || sig_b64 == fields.end()) {
            res.status = 400;
            res.set_content("MalformedRequest\tserial=, nonce= and sig= lines required\n",
                            "text/plain");
            return;
        }
        auto serial = hex_decode(serial_hex->second);
        auto signature = base64_decode(sig_b64->second);
        if (!serial || !signature) {
            res.status = 400;
            res.set_content("MalformedRequest\tbad serial or signature encoding\n", "text/plain");
            return;
        }

        auto existing = issued.find(*serial);
        if (!existing) {
            res.status = 404;
            res.set_content("UnknownSerial\tno certificate with this serial was issued here\n",
                            "text/plain");
            return;
        }
        std::string key_hash = hex_encode(sha256(existing->public_key()));

        {
            std::lock_guard lock(state_mutex);
            auto challenge = nonces.find(nonce_hex->second);
            bool fresh = challenge != nonces.end() &&
                         challenge->second.bound_subject_key_hash == key_hash &&
                         clock() - challenge->second.issued_at <= config.nonce_lifetime_seconds;
            if (challenge != nonces.end()) nonces.erase(challenge);  // single use either way
            if (!fresh) {
                res.status = 403;
                res.set_content("StaleNonce\tnonce missing, expired, or bound to another key\n",
                                "text/plain");
                return;
            }
        }

        std::string transcript = renewal_transcript(serial_hex->second, nonce_hex->second);
        if (!verify_with_spki(existing->public_key(),
                              {reinterpret_cast<const uint8_t *>(transcript.data()),
                               transcript.size()},
                              *signature)) {
            res.status = 403;
            res.set_content("BadSignature\trenewal transcript signature does not verify\n",
                            "text/plain");
            return;
        }

        if (!take_renewal_token(key_hash)) {
            res.status = 429;
            res.set_content("RateLimited\trenewal budget exhausted for this key\n", "text/plain");
            return;
        }

        try {
            std::lock_guard lock(state_mutex);
            revocations.reload();
            auto renewed = renew_decert(*existing, issuer_cert, issuer_key, clock, true, nullptr,
                                        std::nullopt, &revocations);
            issued.record(renewed);
            res.set_content(renewed.to_pem(), "application/x-pem-file");
        } catch (const Error &e) {
            if (e.code() == ErrorCode::RevokedSubject) {
                res.status = 403;
                res.set_content("RevokedSubject\tthis delegation has been revoked\n", "text/plain");
                return;
            }
            throw;
        }
    }

    void route() {
        server.Post("/v1/delegations", [this](const httplib::Request &req, httplib::Response &res) {
            try {
                handle_issue(req, res);
            } catch (const Error &e) {
                res.status = e.code() == ErrorCode::MalformedRequest ? 400 : 500;
                res.set_content(std::string(e.what()) + "\n", "text/plain");
            }
        });
        server.Get("/v1/nonce", [this](const httplib::Request &req, httplib::Response &res) {
            handle_nonce(req, res);
        });
        server.Post("/v1/renewals", [this](const httplib::Request &req, httplib::Response &res) {
            try {
                handle_renew(req, res);
            } catch (const Error &e) {
                res.status = 500;
                res.set_content(std::string(e.what()) + "\n", "text/plain");
            }
        });
        server.Get("/v1/crl.der", [this](const httplib::Request &, httplib::Response &res) {
            refresh_published();
            std::lock_guard lock(state_mutex);
            res.set_content(std::string(cached_crl_der.begin(), cached_crl_der.end()),
                            "application/pkix-crl");
        });
        server.Get("/v1/revocations.zone", [this](const httplib::Request &, httplib::Response &res) {
            refresh_published();
            std::lock_guard lock(state_mutex);
            res.set_content(cached_zone_text, "text/plain");
        });
        server.Get("/v1/healthz", [](const httplib::Request &, httplib::Response &res) {
            res.set_content("ok\n", "text/plain");
        });
    }
};

AuthorityService::AuthorityService(AuthorityConfig config, Clock clock)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(clock))) {
    impl_->route();
}

AuthorityService::AuthorityService(AuthorityService &&) noexcept = default;
AuthorityService::~AuthorityService() {
    if (impl_) stop();
}

void AuthorityService::start() {
    auto &impl = *impl_;
    if (impl.config.port == 0) {
        int port = impl.server.bind_to_any_port(impl.config.listen_address);
        if (port <= 0) throw Error(ErrorCode::BindFailure, "cannot bind authority listener");
        impl.bound_port = static_cast<uint16_t>(port);
    } else {
        if (!impl.server.bind_to_port(impl.config.listen_address, impl.config.port))
            throw Error(ErrorCode::BindFailure,
                        "cannot bind " + impl.config.listen_address + ":" +
                            std::to_string(impl.config.port));
        impl.bound_port = impl.config.port;
    }
    impl.runner = std::thread([&impl] { impl.server.listen_after_bind(); });
    impl.server.wait_until_ready();
}

void AuthorityService::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->runner.joinable()) impl_->runner.join();
}

uint16_t AuthorityService::port() const { return impl_->bound_port; }

}  // namespace decert
