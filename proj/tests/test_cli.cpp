// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#ifndef PASSAGE_KIT_BIN
#error "PASSAGE_KIT_BIN must point at the passage-kit executable"
#endif

namespace {

struct TempDir {
    std::string path;
    TempDir() {
        char tmpl[] = "/tmp/passage_kit_test_XXXXXX";
        path = mkdtemp(tmpl);
    }
    std::string file(const std::string& name) const { return path + "/" + name; }
};

void write_file(const std::string& path, const std::string& body) {
    std::ofstream out(path);
    out << body;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

int run(const std::string& cmd) {
    const int status = std::system((cmd + " > /dev/null 2>&1").c_str());
    return WEXITSTATUS(status);
}

const std::string kBin = PASSAGE_KIT_BIN;

const char* kBmSpec = R"({"family":"levy","triplet":{"gamma":0,"sigma2":1,"jumps":{"type":"none"},"p":0}})";

}  // namespace

TEST_CASE("scale command writes the transform table") {
    TempDir dir;
    std::ostringstream config;
    config << R"({"command":"scale","spec":)" << kBmSpec
           << R"(,"q":[1.0],"x":[1.0],"l":[0.0],"output":"transforms.csv"})";
    write_file(dir.file("config.json"), config.str());
    const int rc = run(kBin + " scale --config " + dir.file("config.json") + " --output-dir " +
                       dir.path);
    REQUIRE(rc == 0);
    const std::string csv = read_file(dir.file("transforms.csv"));
    CHECK(csv.rfind("# passage-kit", 0) == 0);
    CHECK(csv.find("config=") != std::string::npos);
    CHECK(csv.find("seed=") != std::string::npos);
    CHECK(csv.find("family,q,x,l,transform,abs_error_bound") != std::string::npos);
    double value = 0.0;
    const auto pos = csv.find("levy,1,1,0,");
    REQUIRE(pos != std::string::npos);
    std::sscanf(csv.c_str() + pos, "levy,1,1,0,%lf", &value);
    CHECK(value == doctest::Approx(std::exp(-std::sqrt(2.0))).epsilon(1e-12));
}

TEST_CASE("malformed config exits 2") {
    TempDir dir;
    write_file(dir.file("bad.json"), "{not json");
    CHECK(run(kBin + " scale --config " + dir.file("bad.json")) == 2);
}

TEST_CASE("invalid spec exits 2") {
    TempDir dir;
    write_file(dir.file("config.json"),
               R"({"command":"scale","spec":{"family":"levy","triplet":{"gamma":0,"sigma2":0,)"
               R"("jumps":{"type":"atoms","components":[{"rate":1,"size":2}]},"p":0}},)"
               R"("q":[1],"x":[1],"l":[0]})");
    CHECK(run(kBin + " scale --config " + dir.file("config.json") + " --output-dir " + dir.path) ==
          2);
}

TEST_CASE("numerical range failure exits 3") {
    TempDir dir;
    std::ostringstream config;
    config << R"({"command":"scale","spec":{"family":"csbp","triplet":{"gamma":-1,"sigma2":0,)"
           << R"("jumps":{"type":"none"},"p":0},"variant":"recurrent","theta":1},)"
           << R"("q":[1.0],"x":[1e-8],"l":[1e-9]})";
    write_file(dir.file("config.json"), config.str());
    CHECK(run(kBin + " scale --config " + dir.file("config.json") + " --output-dir " + dir.path) ==
          3);
}

TEST_CASE("verify passes in band and fails under an injected bias") {
    TempDir dir;
    std::ostringstream ok;
    ok << R"({"command":"verify","spec":)" << kBmSpec
       << R"(,"q":[1.0],"x":[1.0],"l":[0.0],"n":5000,"seed":42,"output":"verify.json"})";
    write_file(dir.file("ok.json"), ok.str());
    CHECK(run(kBin + " verify --config " + dir.file("ok.json") + " --output-dir " + dir.path) ==
          0);
    const std::string report = read_file(dir.file("verify.json"));
    CHECK(report.find("\"within_band\": true") != std::string::npos);
    CHECK(report.find("wall_time") == std::string::npos);

    std::ostringstream bad;
    bad << R"({"command":"verify","spec":)" << kBmSpec
        << R"(,"q":[1.0],"x":[1.0],"l":[0.0],"n":5000,"seed":42,)"
        << R"("test_closed_form_scale":1.15,"output":"verify.json"})";
    write_file(dir.file("bad.json"), bad.str());
    CHECK(run(kBin + " verify --config " + dir.file("bad.json") + " --output-dir " + dir.path) ==
          4);
}

TEST_CASE("thread count never changes artifacts") {
    TempDir dir;
    std::ostringstream config;
    config << R"({"command":"verify","spec":)" << kBmSpec
           << R"(,"q":[0.5,1.0],"x":[1.0],"l":[0.0],"n":4000,"seed":7,)"
           << R"("multiplicativity":{"q":1.0,"x":2.0,"a":1.0,"l":0.0,"n":4000},)"
           << R"("martingale":{"grid":[0.25,0.5,1.0],"q":1.0,"x":1.0,"l":0.0,"n":4000},)"
           << R"("output":"verify.json"})";
    write_file(dir.file("config.json"), config.str());
    REQUIRE(run(kBin + " verify --config " + dir.file("config.json") + " --output-dir " +
                dir.path + " --threads 1") == 0);
    const std::string one = read_file(dir.file("verify.json"));
    REQUIRE(run(kBin + " verify --config " + dir.file("config.json") + " --output-dir " +
                dir.path + " --threads 8") == 0);
    const std::string eight = read_file(dir.file("verify.json"));
    CHECK(one == eight);
    CHECK(one.size() > 100);
}

TEST_CASE("simulate dump format") {
    TempDir dir;
    std::ostringstream config;
    config << R"({"command":"simulate","spec":)" << kBmSpec
           << R"(,"x":[1.0],"l":[0.0],"n":100,"seed":3,"output":"samples.csv"})";
    write_file(dir.file("config.json"), config.str());
    REQUIRE(run(kBin + " simulate --config " + dir.file("config.json") + " --output-dir " +
                dir.path) == 0);
    const std::string csv = read_file(dir.file("samples.csv"));
    CHECK(csv.find("stream_id,index,crossed,time") != std::string::npos);
    CHECK(csv.find("\n0,0,1,") != std::string::npos);  // BM crosses a.s.
}

TEST_CASE("seed env override is recorded") {
    TempDir dir;
    std::ostringstream config;
    config << R"({"command":"simulate","spec":)" << kBmSpec
           << R"(,"x":[1.0],"l":[0.0],"n":10,"seed":3,"output":"samples.csv"})";
    write_file(dir.file("config.json"), config.str());
    REQUIRE(run("PASSAGE_KIT_SEED=99 " + kBin + " simulate --config " + dir.file("config.json") +
                " --output-dir " + dir.path) == 0);
    const std::string csv = read_file(dir.file("samples.csv"));
    CHECK(csv.find("seed=99") != std::string::npos);
    CHECK(csv.find("PASSAGE_KIT_SEED") != std::string::npos);
}

TEST_CASE("identify round trip through csv artifacts") {
    TempDir dir;
    // forward-generate a transform grid with the scale command
    std::ostringstream gen;
    gen << R"({"command":"scale","spec":)" << kBmSpec
        << R"(,"q":[0.5,1.0,2.0,4.0],"x":[0.5,1.0,1.5,2.0],"l":[0.0],"output":"grid.csv"})";
    write_file(dir.file("gen.json"), gen.str());
    REQUIRE(run(kBin + " scale --config " + dir.file("gen.json") + " --output-dir " + dir.path) ==
            0);

    // scale CSV (family,q,x,l,value,bound) -> grid CSV (x,l,q,value)
    std::istringstream in(read_file(dir.file("grid.csv")));
    std::string line, out = "x,l,q,value\n";
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("family", 0) == 0) continue;
        double q, x, l, v, b;
        REQUIRE(std::sscanf(line.c_str(), "levy,%lf,%lf,%lf,%lf,%lf", &q, &x, &l, &v, &b) == 5);
        char buf[160];
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", x, l, q, v);
        out += buf;
    }
    write_file(dir.file("data.csv"), out);

    std::ostringstream fit;
    fit << R"({"command":"identify","task":"fit_triplet","data":")" << dir.file("data.csv")
        << R"(","hypothesis":"drift_bm","p_known":0.0,"seed":1,"output":"fit.json"})";
    write_file(dir.file("fit.json.config"), fit.str());
    REQUIRE(run(kBin + " identify --config " + dir.file("fit.json.config") + " --output-dir " +
                dir.path) == 0);
    const std::string result = read_file(dir.file("fit.json"));
    CHECK(result.find("\"converged\": true") != std::string::npos);
    const auto pos = result.find("\"sigma2\":");
    REQUIRE(pos != std::string::npos);
    double sigma2 = 0.0;
    std::sscanf(result.c_str() + pos, "\"sigma2\": %lf", &sigma2);
    CHECK(sigma2 == doctest::Approx(1.0).epsilon(1e-6));

    std::ostringstream detect;
    detect << R"({"command":"identify","task":"detect_levy","data":")" << dir.file("data.csv")
           << R"(","output":"detect.json"})";
    write_file(dir.file("detect.config"), detect.str());
    REQUIRE(run(kBin + " identify --config " + dir.file("detect.config") + " --output-dir " +
                dir.path) == 0);
    CHECK(read_file(dir.file("detect.json")).find("\"is_levy\": true") != std::string::npos);
}

TEST_CASE("identical config reruns are byte identical") {
    TempDir dir;
    std::ostringstream config;
    config << R"({"command":"scale","spec":)" << kBmSpec
           << R"(,"q":[0.5,1.0],"x":[1.0,2.0],"l":[0.0],"output":"a.csv"})";
    write_file(dir.file("config.json"), config.str());
    REQUIRE(run(kBin + " scale --config " + dir.file("config.json") + " --output-dir " +
                dir.path) == 0);
    const std::string first = read_file(dir.file("a.csv"));
    REQUIRE(run(kBin + " scale --config " + dir.file("config.json") + " --output-dir " +
                dir.path) == 0);
    CHECK(first == read_file(dir.file("a.csv")));
}
