#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "decert/certificate.hpp"
#include "decert/clock.hpp"
#include "decert/domain.hpp"

struct X509_crl_st;

namespace decert {

struct RevocationRecord {
    std::vector<uint8_t> serial;
    int64_t revoked_at = 0;
    std::string reason;

    auto operator<=>(const RevocationRecord &) const = default;
};

// Owner-managed revocation state, persisted as an append-only file of
// `serial-hex<TAB>unix-time<TAB>reason` lines. Single writer, concurrent
// readers; the generation counter bumps on every successful revoke.
class RevocationStore {
  public:
    static RevocationStore open(const std::filesystem::path &path);

    // Throws Error{AlreadyRevoked} when the serial is already present.
    RevocationRecord revoke(const std::vector<uint8_t> &serial, const std::string &reason,
                            const Clock &clock);
    [[nodiscard]] bool contains(const std::vector<uint8_t> &serial) const;
    [[nodiscard]] size_t size() const;
    [[nodiscard]] std::vector<RevocationRecord> records() const;  // sorted by serial
    [[nodiscard]] uint64_t generation() const;
    [[nodiscard]] const std::filesystem::path &path() const { return path_; }
    // Re-reads the backing file; used by long-running services to pick up
    // revocations appended by other processes.
    void reload();

  private:
    RevocationStore() = default;

    std::filesystem::path path_;
    std::map<std::string, RevocationRecord> by_serial_hex_;
    uint64_t generation_ = 0;
    mutable std::mutex mutex_;

  public:
    RevocationStore(RevocationStore &&other) noexcept;
    RevocationStore &operator=(RevocationStore &&) = delete;
};

// Owner-signed CRL in standard X.509 CRL DER, entries sorted by serial.
class CrlDocument {
  public:
    static CrlDocument build(const RevocationStore &store, const ParsedCertificate &issuer,
                             const PrivateKey &issuer_key, const Clock &clock, int64_t lifetime_seconds = 3600);
    static CrlDocument from_der(std::span<const uint8_t> der);
    static std::vector<CrlDocument> from_pem(std::string_view text);
    static std::vector<CrlDocument> load(const std::filesystem::path &path);  // DER or PEM

    [[nodiscard]] const std::string &issuer_common_name() const { return issuer_cn_; }
    [[nodiscard]] int64_t this_update() const { return this_update_; }
    [[nodiscard]] int64_t next_update() const { return next_update_; }
    [[nodiscard]] const std::vector<RevocationRecord> &entries() const { return entries_; }
    [[nodiscard]] bool lists(const std::vector<uint8_t> &serial) const;

    [[nodiscard]] bool verify(const ParsedCertificate &issuer) const;
    [[nodiscard]] std::vector<uint8_t> to_der() const;
    [[nodiscard]] std::string to_pem() const;

  private:
    CrlDocument() = default;

    std::shared_ptr<X509_crl_st> crl_;
    std::string issuer_cn_;
    int64_t this_update_ = 0;
    int64_t next_update_ = 0;
    std::vector<RevocationRecord> entries_;
};

enum class RevocationStatus { NotRevoked, Revoked, StaleCrl, LookupFailed };

std::string_view revocation_status_name(RevocationStatus status);

// Pre: the CRL's signature was already verified against the certificate's
// issuer. StaleCrl wins over a listed serial once `at` passes nextUpdate.
RevocationStatus check_crl(const ParsedCertificate &cert, const CrlDocument &crl, int64_t at);

// `<lowercase-hex(serial)>._decert-revoked.<issuer_domain>`; the hex keeps the
// serial's full octet width, with no leading-zero trimming.
DomainName dns_record_name(const std::vector<uint8_t> &serial, const DomainName &issuer_domain);

struct TxtLookup {
    enum class Outcome { Found, NotFound, Error };
    Outcome outcome = Outcome::Error;
    std::vector<std::string> values;
};

class TxtResolver {
  public:
    virtual ~TxtResolver() = default;
    virtual TxtLookup txt(const DomainName &name) = 0;
};

// Exactly one TXT query per call; Revoked iff a record value begins
// "revoked=1". The issuer domain is the certificate's revocation DNS suffix
// when present, else its issuer common name.
RevocationStatus check_dns(const ParsedCertificate &cert, TxtResolver &resolver);

struct RevocationZone {
    std::map<std::string, std::string> records;  // owner-name -> TXT value

    bool operator==(const RevocationZone &) const = default;
};

RevocationZone export_zone(const RevocationStore &store, const DomainName &issuer_domain);
std::string zone_to_text(const RevocationZone &zone);
RevocationZone parse_zone_text(std::string_view text);

class ZoneResolver : public TxtResolver {
  public:
    explicit ZoneResolver(RevocationZone zone) : zone_(std::move(zone)) {}
    TxtLookup txt(const DomainName &name) override;

  private:
    RevocationZone zone_;
};

// Wraps another resolver and counts queries; property tests use it to show
// validation issues exactly one lookup per DeCert.
class CountingResolver : public TxtResolver {
  public:
    explicit CountingResolver(TxtResolver &inner) : inner_(&inner) {}
    TxtLookup txt(const DomainName &name) override {
        ++queries_;
        return inner_->txt(name);
    }
    [[nodiscard]] size_t queries() const { return queries_; }
    void reset() { queries_ = 0; }

  private:
    TxtResolver *inner_;
    size_t queries_ = 0;
};

// Always fails lookups; models an unreachable resolver.
class FailingResolver : public TxtResolver {
  public:
    TxtLookup txt(const DomainName &) override { return {TxtLookup::Outcome::Error, {}}; }
};

}  // namespace decert
