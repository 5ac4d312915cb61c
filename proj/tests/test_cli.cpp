// End-to-end tests of the command-line tool (subprocess driven).

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include "bimcc/io.hpp"
#include "bimcc/synth.hpp"

using namespace bimcc;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() / ("bimcc_cli_test_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

int run_cli(const std::string& args, const fs::path& stderr_to = {}) {
    std::string cmd = std::string(BIMCC_CLI_PATH) + " " + args;
    cmd += stderr_to.empty() ? " 2>/dev/null" : " 2>" + stderr_to.string();
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("gen with identity transform and zero noise emits identical clouds") {
    TempDir dir;
    const int rc = run_cli("gen --shape sphere_surface --n 50 --scale 20 --seed 5"
                           " --out-source " + dir.file("s.ply") +
                           " --out-target " + dir.file("t.ply") +
                           " --out-truth " + dir.file("truth.json"));
    REQUIRE(rc == 0);
    REQUIRE(slurp(dir.file("s.ply")) == slurp(dir.file("t.ply")));
    const TransformRecord truth = read_transform_record(dir.file("truth.json"));
    REQUIRE((truth.transform.rotation() - Mat3::Identity()).norm() == 0.0);
}

TEST_CASE("register on identical clouds reports the identity and converges") {
    TempDir dir;
    REQUIRE(run_cli("gen --n 80 --scale 50 --seed 2 --out-source " + dir.file("s.ply") +
                    " --out-target " + dir.file("t.ply")) == 0);
    const int rc = run_cli("register --source " + dir.file("s.ply") + " --target " +
                           dir.file("s.ply") + " --algo icp --out " + dir.file("out.json") +
                           " --trace " + dir.file("trace.csv"));
    REQUIRE(rc == 0);
    const TransformRecord rec = read_transform_record(dir.file("out.json"));
    REQUIRE((rec.transform.rotation() - Mat3::Identity()).norm() <= 1e-9);
    REQUIRE(rec.transform.translation().norm() <= 1e-9);
    REQUIRE(rec.converged);
    REQUIRE(rec.algorithm == "icp");
    REQUIRE(slurp(dir.file("trace.csv")).starts_with("iter,error,objective,sigma\n"));
}

TEST_CASE("register recovers the gen fixture truth under 30% outliers") {
    TempDir dir;
    REQUIRE(run_cli("gen --shape sphere_surface --n 500 --scale 100 --seed 3"
                    " --transform 4,8,6,20,-10,15 --noise 0.5 --outliers 0.3"
                    " --out-source " + dir.file("s.ply") +
                    " --out-target " + dir.file("t.ply") +
                    " --out-truth " + dir.file("truth.json")) == 0);
    REQUIRE(run_cli("register --source " + dir.file("s.ply") + " --target " + dir.file("t.ply") +
                    " --algo bimcc --out " + dir.file("est.json")) == 0);
    const TransformRecord truth = read_transform_record(dir.file("truth.json"));
    const TransformRecord est = read_transform_record(dir.file("est.json"));
    REQUIRE(rotation_angle_deg(est.transform.rotation(), truth.transform.rotation()) < 2.0);
}

TEST_CASE("missing input file exits 2 and names the path") {
    TempDir dir;
    const fs::path err = dir.file("stderr.txt");
    const int rc = run_cli("register --source " + dir.file("nope.ply") + " --target " +
                           dir.file("nope.ply") + " --out " + dir.file("o.json"), err);
    REQUIRE(rc == 2);
    REQUIRE(slurp(err).find("nope.ply") != std::string::npos);
}

TEST_CASE("bad flag values exit 2") {
    TempDir dir;
    const int rc = run_cli("register --source a --target b --out c --max-iters -5");
    REQUIRE(rc == 2);
    REQUIRE(run_cli("stereo --left a --right b --out c") == 2);  // --dmax missing
    REQUIRE(run_cli("nonsense") == 2);
}

TEST_CASE("strict mode exits 3 when the run cannot converge") {
    TempDir dir;
    REQUIRE(run_cli("gen --n 60 --scale 40 --seed 8 --transform 30,0,0,100,0,0"
                    " --out-source " + dir.file("s.ply") +
                    " --out-target " + dir.file("t.ply")) == 0);
    const int rc = run_cli("register --source " + dir.file("s.ply") + " --target " +
                           dir.file("t.ply") + " --algo icp --max-iters 2 --epsilon 0"
                           " --strict --out " + dir.file("o.json"));
    REQUIRE(rc == 3);
}

TEST_CASE("stereo on an identical pair yields zero interior disparity") {
    TempDir dir;
    Rng rng(7);
    GrayImage img(48, 32);
    for (double& p : img.pixels) p = rng.uniform01();
    write_pgm(img, dir.file("l.pgm"));
    write_pgm(img, dir.file("r.pgm"));
    const int rc = run_cli("stereo --left " + dir.file("l.pgm") + " --right " + dir.file("r.pgm") +
                           " --dmax 5 --out " + dir.file("d.pgm") + " --raw " + dir.file("d.txt"));
    REQUIRE(rc == 0);

    std::ifstream raw(dir.file("d.txt"));
    std::string line;
    int y = 0;
    while (std::getline(raw, line)) {
        std::istringstream ss(line);
        double v;
        int x = 0;
        while (ss >> v) {
            if (x >= 10 && x < 38 && y >= 8 && y < 24) REQUIRE(v == Catch::Approx(0.0).margin(1e-9));
            ++x;
        }
        REQUIRE(x == 48);
        ++y;
    }
    REQUIRE(y == 32);
}

TEST_CASE("flags win over config file values") {
    TempDir dir;
    {
        std::ofstream cfg(dir.file("reg.cfg"));
        cfg << "algo=icp\nmax-iters=7\nepsilon=0\n";
    }
    REQUIRE(run_cli("gen --n 40 --scale 10 --seed 1 --out-source " + dir.file("s.ply") +
                    " --out-target " + dir.file("t.ply")) == 0);
    REQUIRE(run_cli("register --source " + dir.file("s.ply") + " --target " + dir.file("t.ply") +
                    " --config " + dir.file("reg.cfg") + " --algo bimcc --out " +
                    dir.file("o.json")) == 0);
    const TransformRecord rec = read_transform_record(dir.file("o.json"));
    REQUIRE(rec.algorithm == "bimcc");  // flag beat the file
    REQUIRE(rec.iterations == 7);       // file values applied where no flag was given
    REQUIRE_FALSE(rec.converged);       // epsilon=0 from the file never triggers
}

TEST_CASE("bench writes the pinned CSV header and separates the algorithms") {
    TempDir dir;
    {
        std::ofstream grid(dir.file("grid.cfg"));
        grid << "base_seed = 7\n"
             << "cell0.name = outliers\ncell0.shape = sphere_surface\ncell0.n = 200\n"
             << "cell0.scale = 100\ncell0.rot_deg = 10\ncell0.trans_frac = 0.1\n"
             << "cell0.noise = 0.5\ncell0.outliers = 0.3\ncell0.overlap = 1\ncell0.algo = both\n";
    }
    const int rc = run_cli("bench --grid " + dir.file("grid.cfg") + " --repeats 5 --out " +
                           dir.file("b.csv"));
    REQUIRE(rc == 0);
    const std::string csv = slurp(dir.file("b.csv"));
    REQUIRE(csv.starts_with("scene,algorithm,seed,noise_mm,outlier_frac,overlap,rot_err_deg,"
                            "trans_err_mm,rmse_mm,iters,ms\n"));
    int lines = 0;
    for (char c : csv)
        if (c == '\n') ++lines;
    REQUIRE(lines == 1 + 2 * 5);
    REQUIRE(csv.find(",icp,") != std::string::npos);
    REQUIRE(csv.find(",bimcc,") != std::string::npos);
}

TEST_CASE("bench default grid: bimcc median beats icp at the 30%-outlier cell") {
    TempDir dir;
    REQUIRE(run_cli("bench --repeats 20 --out " + dir.file("b.csv")) == 0);

    std::ifstream csv(dir.file("b.csv"));
    std::string line;
    std::getline(csv, line);  // header
    std::vector<double> icp_err, bimcc_err;
    while (std::getline(csv, line)) {
        std::vector<std::string> fields;
        std::istringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        REQUIRE(fields.size() == 11);
        const double rot_err = std::stod(fields[6]);
        if (fields[1] == "icp")
            icp_err.push_back(rot_err);
        else
            bimcc_err.push_back(rot_err);
    }
    REQUIRE(icp_err.size() == 20);
    REQUIRE(bimcc_err.size() == 20);
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
    };
    REQUIRE(median(bimcc_err) < median(icp_err));
    REQUIRE(median(bimcc_err) < 2.0);
}

TEST_CASE("identical CLI invocations produce byte-identical outputs") {
    TempDir dir;
    const std::string gen_a = "gen --n 120 --scale 60 --seed 11 --transform 5,3,2,4,4,4"
                              " --noise 0.2 --outliers 0.1 --out-source " + dir.file("a1.ply") +
                              " --out-target " + dir.file("a2.ply") +
                              " --out-truth " + dir.file("a3.json");
    const std::string gen_b = "gen --n 120 --scale 60 --seed 11 --transform 5,3,2,4,4,4"
                              " --noise 0.2 --outliers 0.1 --out-source " + dir.file("b1.ply") +
                              " --out-target " + dir.file("b2.ply") +
                              " --out-truth " + dir.file("b3.json");
    REQUIRE(run_cli(gen_a) == 0);
    REQUIRE(run_cli(gen_b) == 0);
    REQUIRE(slurp(dir.file("a1.ply")) == slurp(dir.file("b1.ply")));
    REQUIRE(slurp(dir.file("a2.ply")) == slurp(dir.file("b2.ply")));
    REQUIRE(slurp(dir.file("a3.json")) == slurp(dir.file("b3.json")));

    for (const char* run : {"r1", "r2"}) {
        REQUIRE(run_cli("register --source " + dir.file("a1.ply") + " --target " +
                        dir.file("a2.ply") + " --out " + dir.file(std::string(run) + ".json") +
                        " --trace " + dir.file(std::string(run) + ".csv")) == 0);
    }
    REQUIRE(slurp(dir.file("r1.json")) == slurp(dir.file("r2.json")));
    REQUIRE(slurp(dir.file("r1.csv")) == slurp(dir.file("r2.csv")));
}
