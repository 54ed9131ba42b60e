#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vhn {

///
/// Versioned binary container used for caches and checkpoints:
///
///     magic (8 bytes) | u32 version | u64 header length | header (JSON text)
///     | u64 payload length | payload | SHA-256 of all preceding bytes (32 raw bytes)
///
/// Integers and floats are little-endian; floats are IEEE-754 binary64.
///
class PayloadWriter
{
public:
    void put(double v);
    void put(std::int64_t v);
    void put(std::span<const double> values);
    void put(std::span<const std::complex<double>> values);

    const std::vector<std::byte>& bytes() const { return m_bytes; }

private:
    std::vector<std::byte> m_bytes;
};

class PayloadReader
{
public:
    explicit PayloadReader(std::span<const std::byte> bytes)
        : m_bytes(bytes)
    {}

    double get_f64();
    std::int64_t get_i64();
    void get(std::span<double> out);
    void get(std::span<std::complex<double>> out);
    bool at_end() const { return m_pos == m_bytes.size(); }

private:
    std::span<const std::byte> take(std::size_t n);

    std::span<const std::byte> m_bytes;
    std::size_t m_pos = 0;
};

struct Container
{
    std::uint32_t version = 0;
    std::string header;
    std::vector<std::byte> payload;
};

/// Atomically replaces `path` (writes a sibling temp file, then renames).
void write_container(const std::filesystem::path& path, std::string_view magic, const Container& c);

/// Throws IoError when the file cannot be read and ValidationError when the
/// magic, version, lengths or checksum do not match.
Container read_container(const std::filesystem::path& path, std::string_view magic, std::uint32_t version);

} // namespace vhn
