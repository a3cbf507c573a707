#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

struct evp_pkey_st;

namespace decert {

enum class KeyAlgorithm { EcdsaP256, Ed25519 };

std::string_view key_algorithm_name(KeyAlgorithm alg);
std::optional<KeyAlgorithm> key_algorithm_from_name(std::string_view name);

// Fills a span with random octets. Issuance uses the process CSPRNG; fixture
// generation substitutes a seeded generator for reproducible corpora.
using RandomBytes = std::function<void(std::span<uint8_t>)>;

RandomBytes system_random();
RandomBytes seeded_random(uint64_t seed);

class PrivateKey {
  public:
    static PrivateKey generate(KeyAlgorithm alg);
    static PrivateKey generate(KeyAlgorithm alg, const RandomBytes &random);
    static PrivateKey from_pem(std::string_view pem);
    static PrivateKey load(const std::filesystem::path &path);

    [[nodiscard]] std::string to_pem() const;
    void save(const std::filesystem::path &path) const;

    [[nodiscard]] KeyAlgorithm algorithm() const noexcept { return algorithm_; }
    // SubjectPublicKeyInfo DER for the public half.
    [[nodiscard]] std::vector<uint8_t> spki() const;
    // ECDSA-P256 signs SHA-256 of the message; Ed25519 signs the message.
    [[nodiscard]] std::vector<uint8_t> sign(std::span<const uint8_t> message) const;

    [[nodiscard]] evp_pkey_st *handle() const noexcept { return pkey_.get(); }

  private:
    PrivateKey(std::shared_ptr<evp_pkey_st> pkey, KeyAlgorithm alg)
        : pkey_(std::move(pkey)), algorithm_(alg) {}

    std::shared_ptr<evp_pkey_st> pkey_;
    KeyAlgorithm algorithm_;
};

bool verify_with_spki(std::span<const uint8_t> spki, std::span<const uint8_t> message,
                      std::span<const uint8_t> signature);
std::optional<KeyAlgorithm> spki_algorithm(std::span<const uint8_t> spki);
size_t spki_key_bits(std::span<const uint8_t> spki);

std::vector<uint8_t> sha256(std::span<const uint8_t> data);

}  // namespace decert
