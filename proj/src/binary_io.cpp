#include <vhn/binary_io.hpp>
#include <vhn/error.hpp>
#include <vhn/hash.hpp>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace vhn {

namespace {

static_assert(std::endian::native == std::endian::little, "binary containers assume a little-endian host");

template <class T>
void append(std::vector<std::byte>& out, const T& v)
{
    const auto* p = reinterpret_cast<const std::byte*>(&v);
    out.insert(out.end(), p, p + sizeof(T));
}

template <class T>
T read_scalar(std::span<const std::byte> b)
{
    T v;
    std::memcpy(&v, b.data(), sizeof(T));
    return v;
}

std::vector<std::byte> digest_bytes(std::span<const std::byte> payload)
{
    const std::string hex = sha256_hex(payload);
    std::vector<std::byte> out(32);
    for (std::size_t i = 0; i < 32; ++i) {
        out[i] = static_cast<std::byte>(std::stoi(hex.substr(2 * i, 2), nullptr, 16));
    }
    return out;
}

} // namespace

void PayloadWriter::put(double v) { append(m_bytes, v); }

void PayloadWriter::put(std::int64_t v) { append(m_bytes, v); }

void PayloadWriter::put(std::span<const double> values)
{
    const auto b = std::as_bytes(values);
    m_bytes.insert(m_bytes.end(), b.begin(), b.end());
}

void PayloadWriter::put(std::span<const std::complex<double>> values)
{
    const auto b = std::as_bytes(values);
    m_bytes.insert(m_bytes.end(), b.begin(), b.end());
}

std::span<const std::byte> PayloadReader::take(std::size_t n)
{
    if (m_bytes.size() - m_pos < n) throw ValidationError("binary payload is truncated");
    auto out = m_bytes.subspan(m_pos, n);
    m_pos += n;
    return out;
}

double PayloadReader::get_f64() { return read_scalar<double>(take(8)); }

std::int64_t PayloadReader::get_i64() { return read_scalar<std::int64_t>(take(8)); }

void PayloadReader::get(std::span<double> out)
{
    const auto b = take(out.size_bytes());
    std::memcpy(out.data(), b.data(), b.size());
}

void PayloadReader::get(std::span<std::complex<double>> out)
{
    const auto b = take(out.size_bytes());
    std::memcpy(out.data(), b.data(), b.size());
}

void write_container(const std::filesystem::path& path, std::string_view magic, const Container& c)
{
    std::vector<std::byte> bytes;
    const auto m = std::as_bytes(std::span(magic.data(), magic.size()));
    bytes.insert(bytes.end(), m.begin(), m.end());
    append(bytes, c.version);
    append(bytes, static_cast<std::uint64_t>(c.header.size()));
    const auto h = std::as_bytes(std::span(c.header.data(), c.header.size()));
    bytes.insert(bytes.end(), h.begin(), h.end());
    append(bytes, static_cast<std::uint64_t>(c.payload.size()));
    bytes.insert(bytes.end(), c.payload.begin(), c.payload.end());
    const auto d = digest_bytes(bytes);
    bytes.insert(bytes.end(), d.begin(), d.end());

    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write '" + tmp.string() + "'");
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("failed writing '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move '" + tmp.string() + "' into place: " + ec.message());
}

Container read_container(const std::filesystem::path& path, std::string_view magic, std::uint32_t version)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::span<const std::byte> all = std::as_bytes(std::span(raw.data(), raw.size()));
    const std::string name = path.string();

    auto need = [&](std::size_t n) {
        if (all.size() < n) throw ValidationError("'" + name + "' is truncated");
    };
    need(magic.size() + 4 + 8);
    if (std::memcmp(all.data(), magic.data(), magic.size()) != 0) {
        throw ValidationError("'" + name + "' has the wrong file signature");
    }
    Container c;
    std::size_t pos = magic.size();
    c.version = read_scalar<std::uint32_t>(all.subspan(pos, 4));
    pos += 4;
    if (c.version != version) {
        throw ValidationError("'" + name + "' has format version " + std::to_string(c.version) + ", expected " +
                              std::to_string(version));
    }
    const auto header_len = read_scalar<std::uint64_t>(all.subspan(pos, 8));
    pos += 8;
    need(pos + header_len + 8);
    c.header.assign(reinterpret_cast<const char*>(all.data() + pos), header_len);
    pos += header_len;
    const auto payload_len = read_scalar<std::uint64_t>(all.subspan(pos, 8));
    pos += 8;
    if (all.size() != pos + payload_len + 32) throw ValidationError("'" + name + "' has inconsistent lengths");
    const auto payload = all.subspan(pos, payload_len);
    const auto digest = digest_bytes(all.first(pos + payload_len));
    if (!std::equal(digest.begin(), digest.end(), all.begin() + static_cast<std::ptrdiff_t>(pos + payload_len))) {
        throw ValidationError("'" + name + "' failed its checksum");
    }
    c.payload.assign(payload.begin(), payload.end());
    return c;
}

} // namespace vhn
