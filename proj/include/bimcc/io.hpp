#ifndef BIMCC_IO_HPP
#define BIMCC_IO_HPP

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "bimcc/error.hpp"
#include "bimcc/icp.hpp"
#include "bimcc/image.hpp"
#include "bimcc/point_cloud.hpp"
#include "bimcc/synth.hpp"

namespace bimcc {

/// Serialized registration outcome: the transform plus run metadata.
struct TransformRecord {
    RigidTransform transform;
    std::string algorithm;
    int iterations = 0;
    bool converged = false;
    double final_error = 0.0;
};

namespace detail {

/// Shortest round-trip decimal representation of a double.
inline std::string format_double(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

/// Fixed 6-significant-digit formatting for benchmark tables.
inline std::string format_g6(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", value);
    return buf;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace detail

/// Writes a file atomically (temp file in the same directory, then rename).
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error(ErrorCode::IoError, "short write to " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot rename " + tmp.string() + " to " + path.string());
}

// ---------------------------------------------------------------------------
// PLY (ASCII 1.0), x/y/z properties; unknown vertex properties are ignored.
// ---------------------------------------------------------------------------

inline PointCloud read_ply(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());

    std::string line;
    int line_no = 0;
    auto next_line = [&](bool required) {
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            return true;
        }
        if (required)
            throw Error(ErrorCode::PlyParseError,
                        path.string() + ": unexpected end of header at line " +
                            std::to_string(line_no + 1));
        return false;
    };
    auto parse_fail = [&](const std::string& what) -> Error {
        return Error(ErrorCode::PlyParseError,
                     path.string() + ":" + std::to_string(line_no) + ": " + what);
    };

    next_line(true);
    if (line != "ply") throw parse_fail("expected 'ply' magic, got '" + line + "'");
    next_line(true);
    if (line != "format ascii 1.0") throw parse_fail("only 'format ascii 1.0' is supported");

    long vertex_count = -1;
    int col_x = -1, col_y = -1, col_z = -1;
    int property_count = 0;
    bool in_vertex_element = false;
    while (true) {
        next_line(true);
        std::istringstream ss(line);
        std::string word;
        ss >> word;
        if (word == "comment" || word.empty()) continue;
        if (word == "end_header") break;
        if (word == "element") {
            std::string name;
            long count = 0;
            if (!(ss >> name >> count)) throw parse_fail("malformed element line");
            in_vertex_element = name == "vertex";
            if (in_vertex_element) vertex_count = count;
            continue;
        }
        if (word == "property") {
            if (!in_vertex_element) continue;
            std::string type, name;
            if (!(ss >> type)) throw parse_fail("malformed property line");
            if (type == "list")
                throw parse_fail("list properties in the vertex element are not supported");
            if (!(ss >> name)) throw parse_fail("malformed property line");
            if (name == "x") col_x = property_count;
            if (name == "y") col_y = property_count;
            if (name == "z") col_z = property_count;
            ++property_count;
            continue;
        }
        throw parse_fail("unknown header keyword '" + word + "'");
    }
    if (vertex_count < 0) throw parse_fail("header declares no vertex element");
    if (col_x < 0 || col_y < 0 || col_z < 0)
        throw parse_fail("vertex element lacks x/y/z properties");

    PointCloud cloud;
    cloud.points.reserve(static_cast<std::size_t>(vertex_count));
    for (long i = 0; i < vertex_count; ++i) {
        if (!next_line(false))
            throw Error(ErrorCode::PlyCountMismatch,
                        path.string() + ": header declares " + std::to_string(vertex_count) +
                            " vertices but only " + std::to_string(i) + " data lines found");
        std::istringstream ss(line);
        std::vector<std::string> fields;
        std::string f;
        while (ss >> f) fields.push_back(f);
        const int needed = std::max({col_x, col_y, col_z}) + 1;
        if (static_cast<int>(fields.size()) < needed)
            throw parse_fail("vertex line has " + std::to_string(fields.size()) +
                             " fields, need at least " + std::to_string(needed));
        auto parse_num = [&](const std::string& s) {
            double v = 0.0;
            const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
            if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
                throw parse_fail("bad number '" + s + "'");
            return v;
        };
        cloud.points.push_back({parse_num(fields[col_x]), parse_num(fields[col_y]),
                                parse_num(fields[col_z])});
    }
    return cloud;
}

inline void write_ply(const PointCloud& cloud, const std::filesystem::path& path) {
    std::string out;
    out += "ply\nformat ascii 1.0\nelement vertex " + std::to_string(cloud.size()) +
           "\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
    for (const Vec3& p : cloud.points) {
        out += detail::format_double(p.x());
        out += ' ';
        out += detail::format_double(p.y());
        out += ' ';
        out += detail::format_double(p.z());
        out += '\n';
    }
    write_file_atomic(path, out);
}

// ---------------------------------------------------------------------------
// PGM (binary P5, maxval 255); byte v maps to v / 255.
// ---------------------------------------------------------------------------

inline GrayImage read_pgm(const std::filesystem::path& path) {
    const std::string data = detail::read_file(path);
    std::size_t pos = 0;
    auto skip_space = [&] {
        while (pos < data.size()) {
            if (std::isspace(static_cast<unsigned char>(data[pos]))) {
                ++pos;
            } else if (data[pos] == '#') {
                while (pos < data.size() && data[pos] != '\n') ++pos;
            } else {
                break;
            }
        }
    };
    auto read_token = [&] {
        skip_space();
        const std::size_t start = pos;
        while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
        return data.substr(start, pos - start);
    };

    const std::string magic = read_token();
    if (magic != "P5")
        throw Error(ErrorCode::UnsupportedPgm,
                    path.string() + ": magic '" + magic + "' is not binary P5");
    auto parse_int = [&](const std::string& what) {
        const std::string tok = read_token();
        long v = 0;
        const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size() || v <= 0)
            throw Error(ErrorCode::UnsupportedPgm, path.string() + ": bad " + what);
        return v;
    };
    const long width = parse_int("width");
    const long height = parse_int("height");
    const long maxval = parse_int("maxval");
    if (maxval != 255)
        throw Error(ErrorCode::UnsupportedPgm,
                    path.string() + ": maxval " + std::to_string(maxval) + ", only 255 supported");
    ++pos;  // exactly one whitespace byte separates header and payload

    const std::size_t need = static_cast<std::size_t>(width) * height;
    if (data.size() < pos + need)
        throw Error(ErrorCode::PgmTruncated,
                    path.string() + ": payload has " + std::to_string(data.size() - pos) +
                        " bytes, need " + std::to_string(need));
    GrayImage img(static_cast<int>(width), static_cast<int>(height));
    for (std::size_t i = 0; i < need; ++i)
        img.pixels[i] = static_cast<unsigned char>(data[pos + i]) / 255.0;
    return img;
}

inline void write_pgm(const GrayImage& img, const std::filesystem::path& path) {
    std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) +
                      "\n255\n";
    out.reserve(out.size() + img.pixels.size());
    for (double p : img.pixels) {
        const long v = std::lround(std::clamp(p, 0.0, 1.0) * 255.0);
        out += static_cast<char>(static_cast<unsigned char>(v));
    }
    write_file_atomic(path, out);
}

// ---------------------------------------------------------------------------
// Transform record (JSON) and CSV tables.
// ---------------------------------------------------------------------------

inline std::string transform_record_to_json(const TransformRecord& record) {
    nlohmann::ordered_json j;
    j["rotation"] = nlohmann::json::array();
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) j["rotation"].push_back(record.transform.rotation()(r, c));
    j["translation"] = {record.transform.translation().x(), record.transform.translation().y(),
                        record.transform.translation().z()};
    j["meta"] = {{"algorithm", record.algorithm},
                 {"iterations", record.iterations},
                 {"converged", record.converged},
                 {"final_error", record.final_error}};
    return j.dump(2) + "\n";
}

inline void write_transform_record(const TransformRecord& record,
                                   const std::filesystem::path& path) {
    write_file_atomic(path, transform_record_to_json(record));
}

/// Loads and re-validates a transform record; rotations violating the
/// RigidTransform invariants are rejected, never renormalized.
inline TransformRecord read_transform_record(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(detail::read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::IoError, path.string() + ": " + e.what());
    }
    try {
        const auto& rot = j.at("rotation");
        const auto& tr = j.at("translation");
        if (rot.size() != 9 || tr.size() != 3)
            throw Error(ErrorCode::IoError,
                        path.string() + ": rotation must have 9 entries, translation 3");
        Mat3 r;
        for (int i = 0; i < 9; ++i) r(i / 3, i % 3) = rot.at(i).get<double>();
        const Vec3 t{tr.at(0).get<double>(), tr.at(1).get<double>(), tr.at(2).get<double>()};
        TransformRecord record;
        record.transform = RigidTransform(r, t);  // validates invariants
        if (j.contains("meta")) {
            const auto& meta = j.at("meta");
            record.algorithm = meta.value("algorithm", std::string{});
            record.iterations = meta.value("iterations", 0);
            record.converged = meta.value("converged", false);
            record.final_error = meta.value("final_error", 0.0);
        }
        return record;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::IoError, path.string() + ": " + e.what());
    }
}

/// Per-iteration trace CSV: `iter,error,objective,sigma`. Classic ICP rows
/// leave the objective and sigma fields empty.
inline std::string trace_to_csv(std::span<const TraceEntry> trace) {
    std::string out = "iter,error,objective,sigma\n";
    for (const TraceEntry& e : trace) {
        out += std::to_string(e.iteration);
        out += ',';
        out += detail::format_double(e.error);
        out += ',';
        if (e.objective) out += detail::format_double(*e.objective);
        out += ',';
        if (e.sigma) out += detail::format_double(*e.sigma);
        out += '\n';
    }
    return out;
}

/// Benchmark table CSV. Floats carry 6 significant digits. The ms column is
/// wall-clock time and breaks byte-identical reruns, so it is written as 0
/// unless `include_timing` is set.
inline std::string bench_to_csv(std::span<const BenchRow> rows, bool include_timing = false) {
    std::string out =
        "scene,algorithm,seed,noise_mm,outlier_frac,overlap,rot_err_deg,trans_err_mm,rmse_mm,"
        "iters,ms\n";
    for (const BenchRow& row : rows) {
        out += row.scene + ',' + row.algorithm + ',' + std::to_string(row.seed) + ',';
        out += detail::format_g6(row.noise_sigma_mm) + ',';
        out += detail::format_g6(row.outlier_fraction) + ',';
        out += detail::format_g6(row.overlap_fraction) + ',';
        out += detail::format_g6(row.report.rotation_error_deg) + ',';
        out += detail::format_g6(row.report.translation_error_mm) + ',';
        out += detail::format_g6(row.report.rmse_mm) + ',';
        out += std::to_string(row.report.iterations) + ',';
        out += detail::format_g6(include_timing ? row.report.wall_time_ms : 0.0);
        out += '\n';
    }
    return out;
}

/// Disparity sidecar: raw values as text, one row per line; invalid pixels
/// (possible only when the fill stage was skipped) are written as -1.
inline std::string disparity_to_text(const DisparityMap& map) {
    std::string out;
    for (int y = 0; y < map.height; ++y) {
        for (int x = 0; x < map.width; ++x) {
            if (x > 0) out += ' ';
            out += map.is_valid(x, y) ? detail::format_double(map.disparity(x, y)) : "-1";
        }
        out += '\n';
    }
    return out;
}

/// Disparity preview PGM: value = clamp(round(d * scale), 0, 255); invalid
/// pixels are written as 0.
inline GrayImage disparity_to_image(const DisparityMap& map, double scale) {
    GrayImage img(map.width, map.height);
    for (int y = 0; y < map.height; ++y)
        for (int x = 0; x < map.width; ++x)
            img.at(x, y) = map.is_valid(x, y)
                               ? std::clamp(map.disparity(x, y) * scale, 0.0, 255.0) / 255.0
                               : 0.0;
    return img;
}

// ---------------------------------------------------------------------------
// Flat key=value configuration files ('#' comments, blank lines ignored).
// ---------------------------------------------------------------------------

inline std::map<std::string, std::string> parse_key_values(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::map<std::string, std::string> values;
    std::string line;
    auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        const auto b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
    };
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::InvalidArgument,
                        path.string() + ":" + std::to_string(line_no) + ": expected key=value");
        values[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }
    return values;
}

}  // namespace bimcc

#endif  // BIMCC_IO_HPP
