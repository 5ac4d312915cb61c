#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "bimcc/io.hpp"

using namespace bimcc;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("bimcc_io_test_" + std::to_string(Catch::rngSeed()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    static int& counter() {
        static int c = 0;
        return c;
    }
    fs::path file(const std::string& name) const { return path / name; }
};

void write_raw(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

std::string read_raw(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("PLY round trip preserves coordinates exactly") {
    TempDir dir;
    PointCloud cloud;
    cloud.points = {{0.1, -2.25, 3e-7}, {1.0 / 3.0, 2e300, -0.0}, {5, 6, 7}};
    write_ply(cloud, dir.file("a.ply"));
    const PointCloud back = read_ply(dir.file("a.ply"));
    REQUIRE(back.size() == cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i)
        for (int k = 0; k < 3; ++k) REQUIRE(back.points[i][k] == cloud.points[i][k]);
}

TEST_CASE("PLY parsing") {
    TempDir dir;

    SECTION("extra vertex properties are ignored, x/y/z picked by position") {
        write_raw(dir.file("n.ply"),
                  "ply\nformat ascii 1.0\ncomment has normals\nelement vertex 2\n"
                  "property float nx\nproperty float ny\nproperty float nz\n"
                  "property float x\nproperty float y\nproperty float z\n"
                  "end_header\n"
                  "9 9 9 1 2 3\n9 9 9 4 5 6\n");
        const PointCloud c = read_ply(dir.file("n.ply"));
        REQUIRE(c.size() == 2);
        REQUIRE((c.points[0] - Vec3{1, 2, 3}).norm() == 0.0);
        REQUIRE((c.points[1] - Vec3{4, 5, 6}).norm() == 0.0);
    }
    SECTION("declared 5 vertices but only 4 lines: count mismatch naming the shortfall") {
        write_raw(dir.file("short.ply"),
                  "ply\nformat ascii 1.0\nelement vertex 5\n"
                  "property float x\nproperty float y\nproperty float z\nend_header\n"
                  "1 1 1\n2 2 2\n3 3 3\n4 4 4\n");
        try {
            read_ply(dir.file("short.ply"));
            FAIL("expected PlyCountMismatch");
        } catch (const Error& e) {
            REQUIRE(e.code() == ErrorCode::PlyCountMismatch);
            REQUIRE(std::string(e.what()).find("5") != std::string::npos);
            REQUIRE(std::string(e.what()).find("4") != std::string::npos);
        }
    }
    SECTION("malformed header reports the line number") {
        write_raw(dir.file("bad.ply"), "ply\nformat ascii 1.0\nelement vertex\nend_header\n");
        try {
            read_ply(dir.file("bad.ply"));
            FAIL("expected PlyParseError");
        } catch (const Error& e) {
            REQUIRE(e.code() == ErrorCode::PlyParseError);
            REQUIRE(std::string(e.what()).find(":3") != std::string::npos);
        }
    }
    SECTION("binary format declarations are rejected") {
        write_raw(dir.file("bin.ply"), "ply\nformat binary_little_endian 1.0\nend_header\n");
        REQUIRE_THROWS_AS(read_ply(dir.file("bin.ply")), Error);
    }
    SECTION("missing file names the path") {
        try {
            read_ply(dir.file("missing.ply"));
            FAIL("expected IoError");
        } catch (const Error& e) {
            REQUIRE(e.code() == ErrorCode::IoError);
            REQUIRE(std::string(e.what()).find("missing.ply") != std::string::npos);
        }
    }
}

TEST_CASE("PGM read and write") {
    TempDir dir;

    SECTION("2x2 payload maps bytes to [0,1] linearly") {
        const char payload[] = {0, static_cast<char>(255), static_cast<char>(128), 64};
        write_raw(dir.file("t.pgm"), "P5\n2 2\n255\n" + std::string(payload, 4));
        const GrayImage img = read_pgm(dir.file("t.pgm"));
        REQUIRE(img.at(0, 0) == 0.0);
        REQUIRE(img.at(1, 0) == 1.0);
        REQUIRE(img.at(0, 1) == 128.0 / 255.0);
        REQUIRE(img.at(1, 1) == 64.0 / 255.0);
    }
    SECTION("write(read(f)) is byte-identical for a valid P5 fixture") {
        std::string payload;
        for (int i = 0; i < 6 * 4; ++i) payload += static_cast<char>((i * 37) % 256);
        write_raw(dir.file("src.pgm"), "P5\n6 4\n255\n" + payload);
        write_pgm(read_pgm(dir.file("src.pgm")), dir.file("copy.pgm"));
        REQUIRE(read_raw(dir.file("copy.pgm")) == read_raw(dir.file("src.pgm")));
    }
    SECTION("ASCII P2 magic is rejected") {
        write_raw(dir.file("p2.pgm"), "P2\n2 2\n255\n0 1 2 3\n");
        try {
            read_pgm(dir.file("p2.pgm"));
            FAIL("expected UnsupportedPgm");
        } catch (const Error& e) {
            REQUIRE(e.code() == ErrorCode::UnsupportedPgm);
        }
    }
    SECTION("a payload shorter than width*height is truncated") {
        write_raw(dir.file("short.pgm"), "P5\n4 4\n255\nabc");
        try {
            read_pgm(dir.file("short.pgm"));
            FAIL("expected PgmTruncated");
        } catch (const Error& e) {
            REQUIRE(e.code() == ErrorCode::PgmTruncated);
        }
    }
    SECTION("comments in the header are skipped") {
        write_raw(dir.file("c.pgm"), "P5\n# size\n2 1\n# depth\n255\nAB");
        const GrayImage img = read_pgm(dir.file("c.pgm"));
        REQUIRE(img.width == 2);
        REQUIRE(img.at(0, 0) == Catch::Approx(65.0 / 255.0));
    }
}

TEST_CASE("transform record JSON") {
    TempDir dir;
    TransformRecord rec;
    rec.transform = RigidTransform::axis_angle({1, 2, 3}, 26.0, {0.5, -1.25, 8});
    rec.algorithm = "bimcc";
    rec.iterations = 17;
    rec.converged = true;
    rec.final_error = 3.25e-7;

    SECTION("round trip preserves the transform and metadata") {
        write_transform_record(rec, dir.file("t.json"));
        const TransformRecord back = read_transform_record(dir.file("t.json"));
        REQUIRE((back.transform.rotation() - rec.transform.rotation()).norm() < 1e-15);
        REQUIRE((back.transform.translation() - rec.transform.translation()).norm() == 0.0);
        REQUIRE(back.algorithm == "bimcc");
        REQUIRE(back.iterations == 17);
        REQUIRE(back.converged);
        REQUIRE(back.final_error == rec.final_error);
    }
    SECTION("a corrupted rotation is rejected, not renormalized") {
        write_raw(dir.file("bad.json"),
                  R"({"rotation":[1.1,0,0, 0,1,0, 0,0,1],"translation":[0,0,0]})");
        try {
            read_transform_record(dir.file("bad.json"));
            FAIL("expected InvalidRotation");
        } catch (const Error& e) {
            REQUIRE(e.code() == ErrorCode::InvalidRotation);
        }
    }
    SECTION("malformed JSON is an IoError") {
        write_raw(dir.file("junk.json"), "{not json");
        REQUIRE_THROWS_AS(read_transform_record(dir.file("junk.json")), Error);
    }
}

TEST_CASE("trace CSV layout") {
    std::vector<TraceEntry> trace;
    trace.push_back(TraceEntry{1, 2.5, std::nullopt, std::nullopt, std::nullopt});
    trace.push_back(TraceEntry{2, 1.25, 0.75, 150.0, 3.5});
    const std::string csv = trace_to_csv(trace);
    REQUIRE(csv == "iter,error,objective,sigma\n1,2.5,,\n2,1.25,0.75,3.5\n");
}

TEST_CASE("bench CSV layout and timing policy") {
    BenchRow row;
    row.scene = "s";
    row.algorithm = "icp";
    row.seed = 99;
    row.noise_sigma_mm = 0.5;
    row.outlier_fraction = 0.25;
    row.overlap_fraction = 1.0;
    row.report.rotation_error_deg = 0.123456789;
    row.report.translation_error_mm = 1.0;
    row.report.rmse_mm = 2.0;
    row.report.iterations = 12;
    row.report.wall_time_ms = 123.456;
    const std::vector<BenchRow> rows = {row};

    const std::string csv = bench_to_csv(rows);
    REQUIRE(csv.starts_with(
        "scene,algorithm,seed,noise_mm,outlier_frac,overlap,rot_err_deg,trans_err_mm,rmse_mm,"
        "iters,ms\n"));
    REQUIRE(csv.find("s,icp,99,0.5,0.25,1,0.123457,1,2,12,0\n") != std::string::npos);

    const std::string timed = bench_to_csv(rows, true);
    REQUIRE(timed.find("123.456") != std::string::npos);
}

TEST_CASE("disparity serialization marks invalid pixels") {
    DisparityMap map(3, 2);
    map.d = {1.5, 2.0, 3.0, 0.0, 4.0, 5.0};
    map.valid = {1, 1, 1, 0, 1, 1};
    REQUIRE(disparity_to_text(map) == "1.5 2 3\n-1 4 5\n");
    const GrayImage img = disparity_to_image(map, 10.0);
    REQUIRE(img.at(0, 0) == Catch::Approx(15.0 / 255.0));
    REQUIRE(img.at(0, 1) == 0.0);
}

TEST_CASE("key=value config parsing") {
    TempDir dir;
    write_raw(dir.file("cfg"),
              "# benchmark grid\nbase_seed = 42\n\ncell0.shape= sphere_surface \ncell0.n =500\n");
    const auto values = parse_key_values(dir.file("cfg"));
    REQUIRE(values.at("base_seed") == "42");
    REQUIRE(values.at("cell0.shape") == "sphere_surface");
    REQUIRE(values.at("cell0.n") == "500");
    REQUIRE(values.size() == 3);

    write_raw(dir.file("bad"), "this line has no equals\n");
    REQUIRE_THROWS_AS(parse_key_values(dir.file("bad")), Error);
}

TEST_CASE("atomic writes leave no temp files behind") {
    TempDir dir;
    write_file_atomic(dir.file("out.txt"), "hello");
    REQUIRE(read_raw(dir.file("out.txt")) == "hello");
    int entries = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir.path)) ++entries;
    REQUIRE(entries == 1);
}
