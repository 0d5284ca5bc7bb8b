#include "slc/mesh_io.hpp"

#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace slc::io {

namespace fs = std::filesystem;

namespace {

std::string lowercase_extension(const fs::path& path) {
    std::string ext = path.extension().string();
    for (char& c : ext)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return ext;
}

[[noreturn]] void parse_fail(const fs::path& path, std::size_t line, const std::string& what) {
    throw ParseError(path.string() + ":" + std::to_string(line) + ": " + what);
}

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok)
        out.push_back(tok);
    return out;
}

double parse_double(const std::string& tok, const fs::path& path, std::size_t line) {
    double value = 0.0;
    const char* begin = tok.data();
    const char* end = begin + tok.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end)
        parse_fail(path, line, "bad number '" + tok + "'");
    return value;
}

long parse_long(const std::string& tok, const fs::path& path, std::size_t line) {
    long value = 0;
    const char* begin = tok.data();
    const char* end = begin + tok.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end)
        parse_fail(path, line, "bad integer '" + tok + "'");
    return value;
}

// Appends a fan triangulation of an n-gon given as 0-based vertex indices.
void push_fan(std::vector<Face>& faces, const std::vector<int>& poly) {
    for (std::size_t i = 1; i + 1 < poly.size(); ++i)
        faces.push_back({poly[0], poly[static_cast<int>(i)], poly[i + 1]});
}

// ---------------------------------------------------------------- OBJ ----

Mesh read_obj(const fs::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path.string());
    Mesh mesh;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        auto toks = split_ws(line);
        if (toks.empty() || toks[0][0] == '#')
            continue;
        if (toks[0] == "v") {
            if (toks.size() < 4)
                parse_fail(path, lineno, "vertex record needs 3 coordinates");
            Vec3 v(parse_double(toks[1], path, lineno), parse_double(toks[2], path, lineno),
                   parse_double(toks[3], path, lineno));
            mesh.vertices.push_back(v);
        } else if (toks[0] == "f") {
            if (toks.size() < 4)
                parse_fail(path, lineno, "face record needs at least 3 indices");
            std::vector<int> poly;
            poly.reserve(toks.size() - 1);
            for (std::size_t i = 1; i < toks.size(); ++i) {
                // accept v, v/vt, v//vn, v/vt/vn; only the vertex index is kept
                std::string head = toks[i].substr(0, toks[i].find('/'));
                long idx = parse_long(head, path, lineno);
                if (idx < 0) // relative index
                    idx += static_cast<long>(mesh.vertices.size()) + 1;
                if (idx < 1)
                    throw IndexError(path.string() + ":" + std::to_string(lineno) +
                                     ": face index out of range");
                poly.push_back(static_cast<int>(idx - 1));
            }
            push_fan(mesh.faces, poly);
        }
        // vt, vn, g, o, s, usemtl, mtllib ... are intentionally ignored
    }
    return mesh;
}

void write_obj(const Mesh& mesh, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write " + path.string());
    char buf[128];
    for (const auto& v : mesh.vertices) {
        std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
        out << buf;
    }
    for (const auto& f : mesh.faces)
        out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
    if (!out)
        throw IoError("short write to " + path.string());
}

// ---------------------------------------------------------------- PLY ----

struct PlyProperty {
    std::string name;
    std::string type;
    bool is_list = false;
    std::string count_type;
};

struct PlyElement {
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> properties;
};

std::size_t ply_type_size(const std::string& type, const fs::path& path, std::size_t line) {
    if (type == "char" || type == "int8" || type == "uchar" || type == "uint8")
        return 1;
    if (type == "short" || type == "int16" || type == "ushort" || type == "uint16")
        return 2;
    if (type == "int" || type == "int32" || type == "uint" || type == "uint32" ||
        type == "float" || type == "float32")
        return 4;
    if (type == "double" || type == "float64")
        return 8;
    parse_fail(path, line, "unknown property type '" + type + "'");
}

double ply_read_scalar_binary(std::istream& in, const std::string& type, const fs::path& path) {
    unsigned char raw[8];
    const std::size_t size = ply_type_size(type, path, 0);
    if (!in.read(reinterpret_cast<char*>(raw), static_cast<std::streamsize>(size)))
        throw ParseError(path.string() + ": truncated binary payload");
    auto as = [&]<typename T>() {
        T v;
        std::memcpy(&v, raw, sizeof(T));
        return static_cast<double>(v);
    };
    if (type == "char" || type == "int8")
        return as.operator()<std::int8_t>();
    if (type == "uchar" || type == "uint8")
        return as.operator()<std::uint8_t>();
    if (type == "short" || type == "int16")
        return as.operator()<std::int16_t>();
    if (type == "ushort" || type == "uint16")
        return as.operator()<std::uint16_t>();
    if (type == "int" || type == "int32")
        return as.operator()<std::int32_t>();
    if (type == "uint" || type == "uint32")
        return as.operator()<std::uint32_t>();
    if (type == "float" || type == "float32")
        return as.operator()<float>();
    return as.operator()<double>(); // double / float64
}

Mesh read_ply(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());

    std::string line;
    std::size_t lineno = 0;
    auto next_line = [&]() -> std::string& {
        if (!std::getline(in, line))
            parse_fail(path, lineno, "unexpected end of header");
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        return line;
    };

    if (next_line() != "ply")
        throw UnsupportedFormat(path.string() + ": missing 'ply' signature");

    bool binary = false;
    bool format_seen = false;
    std::vector<PlyElement> elements;
    for (;;) {
        auto toks = split_ws(next_line());
        if (toks.empty())
            continue;
        if (toks[0] == "comment" || toks[0] == "obj_info")
            continue;
        if (toks[0] == "format") {
            if (toks.size() < 2)
                parse_fail(path, lineno, "bad format line");
            if (toks[1] == "ascii")
                binary = false;
            else if (toks[1] == "binary_little_endian")
                binary = true;
            else
                throw UnsupportedFormat(path.string() + ": unsupported PLY format '" + toks[1] +
                                        "'");
            format_seen = true;
        } else if (toks[0] == "element") {
            if (toks.size() < 3)
                parse_fail(path, lineno, "bad element line");
            PlyElement el;
            el.name = toks[1];
            long n = parse_long(toks[2], path, lineno);
            std::error_code size_ec;
            const auto fsize = fs::file_size(path, size_ec);
            // every element row costs at least one payload byte, so a count
            // beyond the file size is garbage; refuse before allocating
            if (n < 0 || (!size_ec && static_cast<std::uintmax_t>(n) > fsize))
                parse_fail(path, lineno, "implausible element count");
            el.count = static_cast<std::size_t>(n);
            elements.push_back(el);
        } else if (toks[0] == "property") {
            if (elements.empty())
                parse_fail(path, lineno, "property before any element");
            PlyProperty prop;
            if (toks.size() >= 5 && toks[1] == "list") {
                prop.is_list = true;
                prop.count_type = toks[2];
                prop.type = toks[3];
                prop.name = toks[4];
            } else if (toks.size() >= 3) {
                prop.type = toks[1];
                prop.name = toks[2];
            } else {
                parse_fail(path, lineno, "bad property line");
            }
            ply_type_size(prop.type, path, lineno); // validate early
            if (prop.is_list)
                ply_type_size(prop.count_type, path, lineno);
            elements.back().properties.push_back(prop);
        } else if (toks[0] == "end_header") {
            break;
        } else {
            parse_fail(path, lineno, "unknown header keyword '" + toks[0] + "'");
        }
    }
    if (!format_seen)
        parse_fail(path, lineno, "header has no format line");

    Mesh mesh;
    std::vector<std::string> ascii_toks;
    std::size_t ascii_pos = 0;
    auto next_ascii = [&]() -> const std::string& {
        while (ascii_pos >= ascii_toks.size()) {
            if (!std::getline(in, line))
                parse_fail(path, lineno, "truncated ascii payload");
            ++lineno;
            ascii_toks = split_ws(line);
            ascii_pos = 0;
        }
        return ascii_toks[ascii_pos++];
    };
    auto read_scalar = [&](const std::string& type) -> double {
        if (binary)
            return ply_read_scalar_binary(in, type, path);
        return parse_double(next_ascii(), path, lineno);
    };

    for (const auto& el : elements) {
        if (el.name == "vertex") {
            int ix = -1, iy = -1, iz = -1;
            for (std::size_t p = 0; p < el.properties.size(); ++p) {
                if (el.properties[p].is_list)
                    parse_fail(path, lineno, "list property on vertex element");
                if (el.properties[p].name == "x")
                    ix = static_cast<int>(p);
                if (el.properties[p].name == "y")
                    iy = static_cast<int>(p);
                if (el.properties[p].name == "z")
                    iz = static_cast<int>(p);
            }
            if (ix < 0 || iy < 0 || iz < 0)
                parse_fail(path, lineno, "vertex element lacks x/y/z");
            mesh.vertices.reserve(el.count);
            for (std::size_t i = 0; i < el.count; ++i) {
                Vec3 v = Vec3::Zero();
                for (std::size_t p = 0; p < el.properties.size(); ++p) {
                    double value = read_scalar(el.properties[p].type);
                    if (static_cast<int>(p) == ix)
                        v.x() = value;
                    else if (static_cast<int>(p) == iy)
                        v.y() = value;
                    else if (static_cast<int>(p) == iz)
                        v.z() = value;
                }
                mesh.vertices.push_back(v);
            }
        } else if (el.name == "face") {
            for (std::size_t i = 0; i < el.count; ++i) {
                for (const auto& prop : el.properties) {
                    if (prop.is_list &&
                        (prop.name == "vertex_indices" || prop.name == "vertex_index")) {
                        double dcount = read_scalar(prop.count_type);
                        if (dcount < 0 || dcount > 1e6)
                            parse_fail(path, lineno, "implausible face vertex count");
                        auto n = static_cast<std::size_t>(dcount);
                        std::vector<int> poly(n);
                        for (std::size_t j = 0; j < n; ++j)
                            poly[j] = static_cast<int>(read_scalar(prop.type));
                        if (n >= 3)
                            push_fan(mesh.faces, poly);
                    } else if (prop.is_list) {
                        double dcount = read_scalar(prop.count_type);
                        if (dcount < 0 || dcount > 1e6)
                            parse_fail(path, lineno, "implausible list count");
                        for (std::size_t j = 0; j < static_cast<std::size_t>(dcount); ++j)
                            read_scalar(prop.type);
                    } else {
                        read_scalar(prop.type);
                    }
                }
            }
        } else {
            // unknown element: consume and discard its payload
            for (std::size_t i = 0; i < el.count; ++i) {
                for (const auto& prop : el.properties) {
                    if (prop.is_list) {
                        double dcount = read_scalar(prop.count_type);
                        if (dcount < 0 || dcount > 1e6)
                            parse_fail(path, lineno, "implausible list count");
                        for (std::size_t j = 0; j < static_cast<std::size_t>(dcount); ++j)
                            read_scalar(prop.type);
                    } else {
                        read_scalar(prop.type);
                    }
                }
            }
        }
    }
    return mesh;
}

void write_ply(const Mesh& mesh, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write " + path.string());
    out << "ply\nformat ascii 1.0\n";
    out << "element vertex " << mesh.vertices.size() << "\n";
    out << "property double x\nproperty double y\nproperty double z\n";
    out << "element face " << mesh.faces.size() << "\n";
    out << "property list uchar int vertex_indices\n";
    out << "end_header\n";
    char buf[128];
    for (const auto& v : mesh.vertices) {
        std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", v.x(), v.y(), v.z());
        out << buf;
    }
    for (const auto& f : mesh.faces)
        out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
    if (!out)
        throw IoError("short write to " + path.string());
}

// ------------------------------------------------------ model container ----

constexpr char kMagic[4] = {'S', 'L', 'C', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in, const fs::path& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw DimensionMismatch(path.string() + ": truncated header");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& out, double v) {
    static_assert(sizeof(double) == 8);
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i)
        b[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& in, const fs::path& path) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8))
        throw DimensionMismatch(path.string() + ": payload shorter than declared dimensions");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
        bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

} // namespace

std::filesystem::path landmark_sidecar(const fs::path& mesh_path) {
    fs::path p = mesh_path;
    p.replace_extension(".lmk");
    return p;
}

LandmarkMap read_landmarks(const fs::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path.string());
    LandmarkMap out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        if (lineno == 1) {
            if (line != "name,index")
                parse_fail(path, lineno, "expected header 'name,index'");
            continue;
        }
        auto comma = line.find(',');
        if (comma == std::string::npos)
            parse_fail(path, lineno, "expected 'name,index' row");
        std::string name = line.substr(0, comma);
        long idx = parse_long(line.substr(comma + 1), path, lineno);
        if (idx < 0)
            throw IndexError(path.string() + ": negative landmark index");
        out[name] = static_cast<int>(idx);
    }
    return out;
}

void write_landmarks(const LandmarkMap& landmarks, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write " + path.string());
    out << "name,index\n";
    for (const auto& [name, idx] : landmarks)
        out << name << ',' << idx << '\n';
    if (!out)
        throw IoError("short write to " + path.string());
}

Mesh read_mesh(const fs::path& path) {
    if (!fs::exists(path))
        throw IoError("no such file: " + path.string());
    const std::string ext = lowercase_extension(path);
    Mesh mesh;
    if (ext == ".obj")
        mesh = read_obj(path);
    else if (ext == ".ply")
        mesh = read_ply(path);
    else
        throw UnsupportedFormat("unsupported mesh extension '" + ext + "'");

    const fs::path sidecar = landmark_sidecar(path);
    if (fs::exists(sidecar))
        mesh.landmarks = read_landmarks(sidecar);
    mesh.validate();
    return mesh;
}

void write_mesh(const Mesh& mesh, const fs::path& path) {
    mesh.validate();
    const std::string ext = lowercase_extension(path);
    if (ext == ".obj")
        write_obj(mesh, path);
    else if (ext == ".ply")
        write_ply(mesh, path);
    else
        throw UnsupportedFormat("unsupported mesh extension '" + ext + "'");
    if (!mesh.landmarks.empty())
        write_landmarks(mesh.landmarks, landmark_sidecar(path));
}

SlcModel read_model(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    char magic[4];
    if (!in.read(magic, 4))
        throw BadMagic(path.string() + ": file too short for magic");
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw BadMagic(path.string() + ": bad magic tag");

    const std::uint64_t m = get_u32(in, path);
    const std::uint64_t k = get_u32(in, path);
    const std::uint64_t n_train = get_u32(in, path);

    const std::uint64_t scalars = 3 * m + 3 * m * k + n_train * k + k;
    const std::uintmax_t expected = 4 + 12 + 8 * scalars;
    std::error_code ec;
    const std::uintmax_t actual = fs::file_size(path, ec);
    if (ec)
        throw IoError("cannot stat " + path.string());
    if (actual != expected)
        throw DimensionMismatch(path.string() + ": payload is " + std::to_string(actual) +
                                " bytes, dimensions declare " + std::to_string(expected));

    SlcModel model;
    model.k = static_cast<int>(k);
    model.mean.resize(3 * m);
    for (std::uint64_t i = 0; i < 3 * m; ++i)
        model.mean[static_cast<Eigen::Index>(i)] = get_f64(in, path);
    model.basis.resize(3 * m, k);
    for (std::uint64_t r = 0; r < 3 * m; ++r)
        for (std::uint64_t c = 0; c < k; ++c)
            model.basis(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                get_f64(in, path);
    model.directions.resize(n_train, k);
    for (std::uint64_t r = 0; r < n_train; ++r)
        for (std::uint64_t c = 0; c < k; ++c)
            model.directions(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                get_f64(in, path);
    model.weights.resize(k);
    for (std::uint64_t j = 0; j < k; ++j) {
        double w = get_f64(in, path);
        if (!(w >= 0.0)) // also rejects NaN
            throw DimensionMismatch(path.string() + ": weight " + std::to_string(j) +
                                    " is negative or NaN");
        model.weights[static_cast<Eigen::Index>(j)] = w;
    }
    return model;
}

void write_model(const SlcModel& model, const fs::path& path) {
    model.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write " + path.string());
    out.write(kMagic, 4);
    put_u32(out, static_cast<std::uint32_t>(model.mean.size() / 3));
    put_u32(out, static_cast<std::uint32_t>(model.k));
    put_u32(out, static_cast<std::uint32_t>(model.directions.rows()));
    for (Eigen::Index i = 0; i < model.mean.size(); ++i)
        put_f64(out, model.mean[i]);
    for (Eigen::Index r = 0; r < model.basis.rows(); ++r)
        for (Eigen::Index c = 0; c < model.basis.cols(); ++c)
            put_f64(out, model.basis(r, c));
    for (Eigen::Index r = 0; r < model.directions.rows(); ++r)
        for (Eigen::Index c = 0; c < model.directions.cols(); ++c)
            put_f64(out, model.directions(r, c));
    for (Eigen::Index j = 0; j < model.weights.size(); ++j)
        put_f64(out, model.weights[j]);
    if (!out)
        throw IoError("short write to " + path.string());
}

} // namespace slc::io
