#include "decert/keys.hpp"

#include <fstream>
#include <random>
#include <sstream>

#include <openssl/core_names.h>
#include <openssl/ec.h>
#include <openssl/param_build.h>
#include <openssl/pem.h>
#include <openssl/rand.h>
#include <openssl/sha.h>

#include "openssl_util.hpp"

namespace decert {

namespace {

using ossl::Ptr;

KeyAlgorithm algorithm_of_pkey(EVP_PKEY *pkey) {
    switch (EVP_PKEY_get_base_id(pkey)) {
        case EVP_PKEY_EC: return KeyAlgorithm::EcdsaP256;
        case EVP_PKEY_ED25519: return KeyAlgorithm::Ed25519;
        default:
            throw Error(ErrorCode::UnsupportedAlgorithm, "key type not supported");
    }
}

Ptr<EVP_PKEY> generate_random(KeyAlgorithm alg) {
    Ptr<EVP_PKEY_CTX> ctx(EVP_PKEY_CTX_new_from_name(
        nullptr, alg == KeyAlgorithm::EcdsaP256 ? "EC" : "ED25519", nullptr));
    if (!ctx || EVP_PKEY_keygen_init(ctx.get()) <= 0)
        ossl::fail(ErrorCode::SigningFailure, "keygen init failed");
    if (alg == KeyAlgorithm::EcdsaP256 &&
        EVP_PKEY_CTX_set_ec_paramgen_curve_nid(ctx.get(), NID_X9_62_prime256v1) <= 0)
        ossl::fail(ErrorCode::SigningFailure, "curve selection failed");
    EVP_PKEY *raw = nullptr;
    if (EVP_PKEY_keygen(ctx.get(), &raw) <= 0)
        ossl::fail(ErrorCode::SigningFailure, "key generation failed");
    return Ptr<EVP_PKEY>(raw);
}

Ptr<EVP_PKEY> ec_key_from_scalar(const BIGNUM *priv) {
    Ptr<EC_GROUP> group(EC_GROUP_new_by_curve_name(NID_X9_62_prime256v1));
    Ptr<EC_POINT> pub(EC_POINT_new(group.get()));
    if (!group || !pub || EC_POINT_mul(group.get(), pub.get(), priv, nullptr, nullptr, nullptr) != 1)
        ossl::fail(ErrorCode::SigningFailure, "public point derivation failed");

    unsigned char pub_octets[65];
    size_t pub_len = EC_POINT_point2oct(group.get(), pub.get(), POINT_CONVERSION_UNCOMPRESSED,
                                        pub_octets, sizeof(pub_octets), nullptr);
    if (pub_len == 0) ossl::fail(ErrorCode::SigningFailure, "public point serialization failed");

    Ptr<OSSL_PARAM_BLD> bld(OSSL_PARAM_BLD_new());
    if (!bld ||
        OSSL_PARAM_BLD_push_utf8_string(bld.get(), OSSL_PKEY_PARAM_GROUP_NAME, "prime256v1", 0) != 1 ||
        OSSL_PARAM_BLD_push_BN(bld.get(), OSSL_PKEY_PARAM_PRIV_KEY, priv) != 1 ||
        OSSL_PARAM_BLD_push_octet_string(bld.get(), OSSL_PKEY_PARAM_PUB_KEY, pub_octets, pub_len) != 1)
        ossl::fail(ErrorCode::SigningFailure, "param build failed");
    Ptr<OSSL_PARAM> params(OSSL_PARAM_BLD_to_param(bld.get()));

    Ptr<EVP_PKEY_CTX> ctx(EVP_PKEY_CTX_new_from_name(nullptr, "EC", nullptr));
    EVP_PKEY *raw = nullptr;
    if (!ctx || EVP_PKEY_fromdata_init(ctx.get()) <= 0 ||
        EVP_PKEY_fromdata(ctx.get(), &raw, EVP_PKEY_KEYPAIR, params.get()) <= 0)
        ossl::fail(ErrorCode::SigningFailure, "EC key assembly failed");
    return Ptr<EVP_PKEY>(raw);
}

Ptr<EVP_PKEY> generate_seeded(KeyAlgorithm alg, const RandomBytes &random) {
    if (alg == KeyAlgorithm::Ed25519) {
        uint8_t seed[32];
        random(seed);
        EVP_PKEY *raw = EVP_PKEY_new_raw_private_key(EVP_PKEY_ED25519, nullptr, seed, sizeof(seed));
        if (!raw) ossl::fail(ErrorCode::SigningFailure, "ed25519 key assembly failed");
        return Ptr<EVP_PKEY>(raw);
    }

    Ptr<EC_GROUP> group(EC_GROUP_new_by_curve_name(NID_X9_62_prime256v1));
    Ptr<BIGNUM> order(BN_new());
    if (!group || !order || EC_GROUP_get_order(group.get(), order.get(), nullptr) != 1)
        ossl::fail(ErrorCode::SigningFailure, "curve order lookup failed");
    Ptr<BIGNUM> priv(BN_new());
    do {
        uint8_t bytes[32];
        random(bytes);
        if (!BN_bin2bn(bytes, sizeof(bytes), priv.get()))
            ossl::fail(ErrorCode::SigningFailure, "scalar conversion failed");
    } while (BN_is_zero(priv.get()) || BN_cmp(priv.get(), order.get()) >= 0);
    return ec_key_from_scalar(priv.get());
}

Ptr<EVP_PKEY> parse_spki(std::span<const uint8_t> spki) {
    const unsigned char *p = spki.data();
    EVP_PKEY *raw = d2i_PUBKEY(nullptr, &p, static_cast<long>(spki.size()));
    if (!raw) ossl::fail(ErrorCode::MalformedCertificate, "SubjectPublicKeyInfo parse failed");
    return Ptr<EVP_PKEY>(raw);
}

}  // namespace

std::string_view key_algorithm_name(KeyAlgorithm alg) {
    return alg == KeyAlgorithm::EcdsaP256 ? "ecdsa-p256" : "ed25519";
}

std::optional<KeyAlgorithm> key_algorithm_from_name(std::string_view name) {
    if (name == "ecdsa-p256") return KeyAlgorithm::EcdsaP256;
    if (name == "ed25519") return KeyAlgorithm::Ed25519;
    return std::nullopt;
}

RandomBytes system_random() {
    return [](std::span<uint8_t> out) {
        if (RAND_bytes(out.data(), static_cast<int>(out.size())) != 1)
            ossl::fail(ErrorCode::SigningFailure, "RAND_bytes failed");
    };
}

RandomBytes seeded_random(uint64_t seed) {
    auto engine = std::make_shared<std::mt19937_64>(seed);
    return [engine](std::span<uint8_t> out) {
        for (auto &byte : out) byte = static_cast<uint8_t>((*engine)() & 0xFF);
    };
}

PrivateKey PrivateKey::generate(KeyAlgorithm alg) {
    auto pkey = generate_random(alg);
    return {std::shared_ptr<EVP_PKEY>(pkey.release(), ossl::Deleter{}), alg};
}

PrivateKey PrivateKey::generate(KeyAlgorithm alg, const RandomBytes &random) {
    auto pkey = generate_seeded(alg, random);
    return {std::shared_ptr<EVP_PKEY>(pkey.release(), ossl::Deleter{}), alg};
}

PrivateKey PrivateKey::from_pem(std::string_view pem) {
    Ptr<BIO> bio(BIO_new_mem_buf(pem.data(), static_cast<int>(pem.size())));
    EVP_PKEY *raw = PEM_read_bio_PrivateKey(bio.get(), nullptr, nullptr, nullptr);
    if (!raw) ossl::fail(ErrorCode::IoError, "private key PEM parse failed");
    auto pkey = std::shared_ptr<EVP_PKEY>(raw, ossl::Deleter{});
    return {pkey, algorithm_of_pkey(raw)};
}

PrivateKey PrivateKey::load(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_pem(buf.str());
}

std::string PrivateKey::to_pem() const {
    Ptr<BIO> bio(BIO_new(BIO_s_mem()));
    if (PEM_write_bio_PKCS8PrivateKey(bio.get(), pkey_.get(), nullptr, nullptr, 0, nullptr,
                                      nullptr) != 1)
        ossl::fail(ErrorCode::IoError, "private key PEM write failed");
    auto bytes = ossl::bio_bytes(bio.get());
    return {bytes.begin(), bytes.end()};
}

void PrivateKey::save(const std::filesystem::path &path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << to_pem();
}

std::vector<uint8_t> PrivateKey::spki() const {
    int size = i2d_PUBKEY(pkey_.get(), nullptr);
    if (size <= 0) ossl::fail(ErrorCode::SigningFailure, "SPKI encode failed");
    std::vector<uint8_t> out(static_cast<size_t>(size));
    unsigned char *p = out.data();
    i2d_PUBKEY(pkey_.get(), &p);
    return out;
}

std::vector<uint8_t> PrivateKey::sign(std::span<const uint8_t> message) const {
    Ptr<EVP_MD_CTX> ctx(EVP_MD_CTX_new());
    const EVP_MD *md = algorithm_ == KeyAlgorithm::EcdsaP256 ? EVP_sha256() : nullptr;
    if (!ctx || EVP_DigestSignInit(ctx.get(), nullptr, md, nullptr, pkey_.get()) != 1)
        ossl::fail(ErrorCode::SigningFailure, "sign init failed");
    size_t sig_len = 0;
    if (EVP_DigestSign(ctx.get(), nullptr, &sig_len, message.data(), message.size()) != 1)
        ossl::fail(ErrorCode::SigningFailure, "sign sizing failed");
    std::vector<uint8_t> sig(sig_len);
    if (EVP_DigestSign(ctx.get(), sig.data(), &sig_len, message.data(), message.size()) != 1)
        ossl::fail(ErrorCode::SigningFailure, "sign failed");
    sig.resize(sig_len);
    return sig;
}

bool verify_with_spki(std::span<const uint8_t> spki, std::span<const uint8_t> message,
                      std::span<const uint8_t> signature) {
    auto pkey = parse_spki(spki);
    Ptr<EVP_MD_CTX> ctx(EVP_MD_CTX_new());
    const EVP_MD *md = EVP_PKEY_get_base_id(pkey.get()) == EVP_PKEY_EC ? EVP_sha256() : nullptr;
    if (!ctx || EVP_DigestVerifyInit(ctx.get(), nullptr, md, nullptr, pkey.get()) != 1) {
        ERR_clear_error();
        return false;
    }
    int rc = EVP_DigestVerify(ctx.get(), signature.data(), signature.size(), message.data(),
                              message.size());
    ERR_clear_error();
    return rc == 1;
}

std::optional<KeyAlgorithm> spki_algorithm(std::span<const uint8_t> spki) {
    try {
        auto pkey = parse_spki(spki);
        switch (EVP_PKEY_get_base_id(pkey.get())) {
            case EVP_PKEY_EC: return KeyAlgorithm::EcdsaP256;
            case EVP_PKEY_ED25519: return KeyAlgorithm::Ed25519;
            default: return std::nullopt;
        }
    } catch (const Error &) {
        return std::nullopt;
    }
}

size_t spki_key_bits(std::span<const uint8_t> spki) {
    auto pkey = parse_spki(spki);
    return static_cast<size_t>(EVP_PKEY_get_bits(pkey.get()));
}

std::vector<uint8_t> sha256(std::span<const uint8_t> data) {
    std::vector<uint8_t> out(SHA256_DIGEST_LENGTH);
    SHA256(data.data(), data.size(), out.data());
    return out;
}

}  // namespace decert
