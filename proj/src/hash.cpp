#include <vhn/error.hpp>
#include <vhn/hash.hpp>

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>

namespace vhn {

namespace {

EVP_MD_CTX* ctx(void* p) { return static_cast<EVP_MD_CTX*>(p); }

template <class T>
std::array<std::byte, sizeof(T)> little_endian(T value)
{
    std::array<std::byte, sizeof(T)> out;
    std::memcpy(out.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(out.begin(), out.end());
    }
    return out;
}

} // namespace

Sha256::Sha256()
    : m_ctx(EVP_MD_CTX_new())
{
    if (!m_ctx || EVP_DigestInit_ex(ctx(m_ctx), EVP_sha256(), nullptr) != 1) {
        throw Error("sha256: digest initialization failed");
    }
}

Sha256::~Sha256() { EVP_MD_CTX_free(ctx(m_ctx)); }

Sha256& Sha256::update(std::span<const std::byte> bytes)
{
    if (!bytes.empty()) EVP_DigestUpdate(ctx(m_ctx), bytes.data(), bytes.size());
    return *this;
}

Sha256& Sha256::update(std::string_view text) { return update(std::as_bytes(std::span(text.data(), text.size()))); }

Sha256& Sha256::update(double value)
{
    const auto b = little_endian(value);
    return update(std::span<const std::byte>(b));
}

Sha256& Sha256::update(std::int64_t value)
{
    const auto b = little_endian(value);
    return update(std::span<const std::byte>(b));
}

Sha256& Sha256::update(std::span<const double> values)
{
    if constexpr (std::endian::native == std::endian::little) {
        return update(std::as_bytes(values));
    }
    for (double v : values) update(v);
    return *this;
}

std::string Sha256::hex_digest()
{
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx(m_ctx), md, &len);
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(digits[md[i] >> 4]);
        out.push_back(digits[md[i] & 0xf]);
    }
    return out;
}

std::string sha256_hex(std::string_view text) { return Sha256().update(text).hex_digest(); }

std::string sha256_hex(std::span<const std::byte> bytes) { return Sha256().update(bytes).hex_digest(); }

std::string content_hash(const SurfaceMesh& mesh)
{
    Sha256 h;
    h.update("vhn-mesh-v1");
    h.update(static_cast<std::int64_t>(mesh.num_vertices()));
    h.update(std::span<const double>(mesh.positions().data(), static_cast<std::size_t>(mesh.positions().size())));
    h.update(static_cast<std::int64_t>(mesh.num_faces()));
    for (const Triangle& t : mesh.faces()) {
        for (Index v : t) h.update(static_cast<std::int64_t>(v));
    }
    return h.hex_digest();
}

} // namespace vhn
