#pragma once

#include <vhn/mesh.hpp>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace vhn {

/// Incremental SHA-256. Numeric values are fed as little-endian bytes so
/// digests agree across hosts.
class Sha256
{
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    Sha256& update(std::span<const std::byte> bytes);
    Sha256& update(std::string_view text);
    Sha256& update(double value);
    Sha256& update(std::int64_t value);
    Sha256& update(std::span<const double> values);

    /// Lowercase hex digest. The hasher cannot be reused afterwards.
    std::string hex_digest();

private:
    void* m_ctx;
};

std::string sha256_hex(std::string_view text);
std::string sha256_hex(std::span<const std::byte> bytes);

/// Hash of positions and faces; two meshes hash equal iff they are bitwise identical.
std::string content_hash(const SurfaceMesh& mesh);

} // namespace vhn
