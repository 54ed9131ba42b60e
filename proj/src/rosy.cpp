#include <vhn/error.hpp>
#include <vhn/rosy.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>

namespace vhn {

namespace {

void check_order(int N)
{
    if (N < 1) throw ValidationError("rosy order N must be >= 1, got " + std::to_string(N));
}

std::ofstream open_text(const std::filesystem::path& path)
{
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out.precision(17);
    return out;
}

std::vector<std::string_view> split(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        const std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

template <class T>
T parse_number(std::string_view s, std::size_t line)
{
    T v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ParseError("malformed number '" + std::string(s) + "'", line);
    }
    return v;
}

} // namespace

std::string_view to_string(Domain d) { return d == Domain::vertices ? "vertices" : "faces"; }

VectorXc to_power_representation(const RosyField& field)
{
    check_order(field.N);
    VectorXc out(field.values.size());
    for (Eigen::Index i = 0; i < field.values.size(); ++i) {
        Complex p = 1.0;
        for (int k = 0; k < field.N; ++k) p *= field.values[i];
        out[i] = p;
    }
    return out;
}

Complex canonical_root(Complex p, int N)
{
    check_order(N);
    const double r = std::abs(p);
    if (r == 0.0) return 0.0;
    double a = std::arg(p);
    if (a < 0.0) a += 2.0 * std::numbers::pi;
    double t = a / N;
    if (t >= 2.0 * std::numbers::pi / N) t = 0.0;
    return std::polar(std::pow(r, 1.0 / N), t);
}

RosyField from_power_representation(const VectorXc& power, int N, Domain domain, std::string frame_hash)
{
    RosyField f;
    f.N = N;
    f.domain = domain;
    f.frame_hash = std::move(frame_hash);
    f.values.resize(power.size());
    for (Eigen::Index i = 0; i < power.size(); ++i) f.values[i] = canonical_root(power[i], N);
    return f;
}

RosyField rosy_to_faces(const VertexToFaceTransport& transport, const RosyField& vertex_field)
{
    if (vertex_field.domain != Domain::vertices) throw ValidationError("rosy_to_faces: expected a vertex field");
    const VectorXc power = to_power_representation(vertex_field);
    VertexToFaceTransport powered = transport;
    powered.angles *= static_cast<double>(vertex_field.N);
    const VectorXc face_power = average_to_faces(powered, power);
    return from_power_representation(face_power, vertex_field.N, Domain::faces, vertex_field.frame_hash);
}

void export_field(const RosyField& field, const SurfaceMesh& mesh, const IntrinsicFrame& frame, const std::filesystem::path& path)
{
    check_order(field.N);
    const Index expected = field.domain == Domain::vertices ? mesh.num_vertices() : mesh.num_faces();
    if (field.values.size() != expected) {
        throw ValidationError("export_field: " + std::to_string(field.values.size()) + " values for " +
                              std::to_string(expected) + " " + std::string(to_string(field.domain)));
    }
    std::optional<FaceFrames> faces;
    if (field.domain == Domain::faces) faces.emplace(mesh);

    auto out = open_text(path);
    out << "VHNFIELD 1\n";
    out << "domain " << to_string(field.domain) << '\n';
    out << "N " << field.N << '\n';
    out << "count " << field.values.size() << '\n';
    out << "frame " << (field.frame_hash.empty() ? "-" : field.frame_hash) << '\n';
    for (Index i = 0; i < expected; ++i) {
        const Complex z = field.values[i];
        const Vec3 e0 = faces ? faces->e0(i) : frame.e0(i);
        const Vec3 e1 = faces ? faces->e1(i) : frame.e1(i);
        const Vec3 v = z.real() * e0 + z.imag() * e1;
        out << i << ' ' << z.real() << ' ' << z.imag() << ' ' << e0.x() << ' ' << e0.y() << ' ' << e0.z() << ' '
            << e1.x() << ' ' << e1.y() << ' ' << e1.z() << ' ' << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    }
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

RosyField import_field(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    RosyField f;
    std::string line;
    std::size_t lineno = 0;
    auto header = [&](std::string_view key) {
        if (!std::getline(in, line)) throw ParseError("missing '" + std::string(key) + "' header", lineno + 1);
        ++lineno;
        const auto tok = split(line);
        if (tok.size() != 2 || tok[0] != key) throw ParseError("expected '" + std::string(key) + " <value>'", lineno);
        return std::string(tok[1]);
    };
    if (header("VHNFIELD") != "1") throw ParseError("unsupported field file version", lineno);
    const std::string domain = header("domain");
    if (domain == "vertices") {
        f.domain = Domain::vertices;
    } else if (domain == "faces") {
        f.domain = Domain::faces;
    } else {
        throw ParseError("unknown domain '" + domain + "'", lineno);
    }
    const std::string n_text = header("N");
    f.N = parse_number<int>(n_text, lineno);
    check_order(f.N);
    const std::string count_text = header("count");
    const long count = parse_number<long>(count_text, lineno);
    if (count < 0) throw ParseError("negative count", lineno);
    f.frame_hash = header("frame");
    if (f.frame_hash == "-") f.frame_hash.clear();

    f.values.resize(count);
    for (long i = 0; i < count; ++i) {
        if (!std::getline(in, line)) throw ParseError("expected " + std::to_string(count) + " records", lineno + 1);
        ++lineno;
        const auto tok = split(line);
        if (tok.size() != 12) throw ParseError("expected 12 columns, got " + std::to_string(tok.size()), lineno);
        if (parse_number<long>(tok[0], lineno) != i) throw ParseError("records out of order", lineno);
        f.values[i] = Complex(parse_number<double>(tok[1], lineno), parse_number<double>(tok[2], lineno));
    }
    while (std::getline(in, line)) {
        ++lineno;
        if (!split(line).empty()) throw ParseError("unexpected trailing data", lineno);
    }
    return f;
}

void export_cross_field(const RosyField& face_field, const SurfaceMesh& mesh, const std::filesystem::path& path)
{
    check_order(face_field.N);
    if (face_field.domain != Domain::faces || face_field.values.size() != mesh.num_faces()) {
        throw ValidationError("export_cross_field needs one value per face");
    }
    const FaceFrames frames(mesh);
    auto out = open_text(path);
    out << "VHNCROSS 1\n";
    out << "N " << face_field.N << '\n';
    out << "count " << mesh.num_faces() << '\n';
    for (Index f = 0; f < mesh.num_faces(); ++f) {
        out << f;
        for (int k = 0; k < face_field.N; ++k) {
            const Vec3 v = frames.embed(f, face_field.values[f] * std::polar(1.0, 2.0 * std::numbers::pi * k / face_field.N));
            out << ' ' << v.x() << ' ' << v.y() << ' ' << v.z();
        }
        out << '\n';
    }
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

AngularError angular_error(const RosyField& a, const RosyField& b)
{
    if (a.domain != b.domain || a.values.size() != b.values.size()) {
        throw ValidationError("angular_error: fields live on different domains");
    }
    if (a.N != b.N) {
        throw ValidationError("angular_error: rosy orders differ (" + std::to_string(a.N) + " vs " + std::to_string(b.N) + ")");
    }
    check_order(a.N);
    const double period = 2.0 * std::numbers::pi / a.N;
    AngularError e;
    e.per_element.resize(a.values.size());
    for (Eigen::Index i = 0; i < a.values.size(); ++i) {
        const double theta = std::arg(a.values[i] * std::conj(b.values[i]));
        e.per_element[i] = std::min(std::abs(std::remainder(theta, period)), period / 2.0);
    }
    if (e.per_element.size() > 0) {
        e.mean = e.per_element.mean();
        e.max = e.per_element.maxCoeff();
        std::vector<double> sorted(e.per_element.begin(), e.per_element.end());
        std::sort(sorted.begin(), sorted.end());
        const std::size_t mid = sorted.size() / 2;
        e.median = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
    }
    return e;
}

} // namespace vhn
