#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "decert/certificate.hpp"
#include "decert/clock.hpp"
#include "decert/issuance.hpp"
#include "decert/keys.hpp"
#include "decert/revocation.hpp"

namespace decert {

// A domain owner's delegation authority: CSR intake, nonce-authenticated
// renewal, CRL and revocation-zone publication. Plain HTTP on loopback; the
// authority does not terminate TLS for itself.
struct AuthorityConfig {
    std::string listen_address = "127.0.0.1";
    uint16_t port = 0;  // 0 picks an ephemeral port
    std::filesystem::path issuer_cert_path;
    std::filesystem::path issuer_key_path;
    IssuerPolicy policy;
    std::filesystem::path issued_dir;
    std::filesystem::path revocation_store_path;
    int64_t nonce_lifetime_seconds = 120;
    size_t renewals_per_hour = 10;
    int64_t crl_lifetime_seconds = 3600;
    std::optional<std::string> crl_url;
    std::optional<std::string> revocation_dns_suffix;

    static AuthorityConfig from_json_file(const std::filesystem::path &path);
};

// Endpoints (all versioned, content types exact):
//   POST /v1/delegations     application/pkcs10 DER -> 201 application/x-pem-file
//   GET  /v1/nonce?key=<sha256-hex-of-SPKI>         -> 200 "nonce=<hex>"
//   POST /v1/renewals        serial=/nonce=/sig= lines -> 200 PEM
//   GET  /v1/crl.der         application/pkix-crl, rebuilt when the store changes
//   GET  /v1/revocations.zone  text/plain master-file TXT records
//   GET  /v1/healthz         200 "ok"
class AuthorityService {
  public:
    AuthorityService(AuthorityConfig config, Clock clock = system_clock());
    AuthorityService(AuthorityService &&) noexcept;
    ~AuthorityService();

    void start();  // binds and serves on a background thread; Error{BindFailure}
    void stop();
    [[nodiscard]] uint16_t port() const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace decert
