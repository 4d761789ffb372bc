#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "paraflame/config.hpp"
#include "paraflame/dataset.hpp"
#include "paraflame/models.hpp"

using namespace paraflame;
namespace fs = std::filesystem;

namespace {

// --- config unit tests -----------------------------------------------------

TEST_CASE("run config: defaults serialize and re-parse identically") {
    config::RunConfig cfg;
    std::string text = config::serialize(cfg);
    config::RunConfig back = config::parse(text);
    CHECK(config::serialize(back) == text);
    CHECK(back.equation == "ks");
    CHECK(back.horizon == 20);
    CHECK(back.epochs == 1000);
    CHECK(back.batch == 800);
    CHECK(back.lr0 == 0.0025);
}

TEST_CASE("run config: awkward doubles round-trip exactly") {
    config::RunConfig cfg;
    cfg.lr0 = 1.0 / 3.0;
    cfg.weight_decay = 1e-17;
    cfg.gammas = {0.025, 0.15, 24.0};
    std::string text = config::serialize(cfg);
    config::RunConfig back = config::parse(text);
    CHECK(back.lr0 == cfg.lr0);
    CHECK(back.weight_decay == cfg.weight_decay);
    CHECK(back.gammas == cfg.gammas);
}

TEST_CASE("run config: unknown keys and sections are rejected") {
    CHECK_THROWS_AS(config::parse("[dataset]\nbogus = 1\n"), ConfigError);
    CHECK_THROWS_AS(config::parse("[nonsense]\n"), ConfigError);
    CHECK_THROWS_AS(config::parse("[dataset]\nframes 12\n"), ConfigError);
    CHECK_THROWS_AS(config::parse("[dataset]\nframes = twelve\n"), ConfigError);
    CHECK_THROWS_AS(config::parse("[train]\nequation = ks\n"), ConfigError);  // wrong section
}

TEST_CASE("run config: comments and whitespace are tolerated") {
    auto cfg = config::parse("# comment\n\n[dataset]\n  frames = 42  \n; another\n[train]\nn = 5\n");
    CHECK(cfg.frames == 42);
    CHECK(cfg.horizon == 5);
}

// --- CLI subprocess harness -------------------------------------------------

struct CliResult {
    int exit_code = -1;
    std::string out;
};

const char* cli_binary() {
    static const char* bin = std::getenv("PARAFLAME_BIN");
    return bin;
}

CliResult run_cli(const std::string& args) {
    static int counter = 0;
    const fs::path log = fs::temp_directory_path() /
                         ("paraflame_cli_" + std::to_string(++counter) + ".log");
    const std::string cmd = std::string(cli_binary()) + " " + args + " > " + log.string() +
                            " 2>&1";
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    r.out = ss.str();
    fs::remove(log);
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path work_dir() {
    auto dir = fs::temp_directory_path() / "paraflame_cli_test";
    fs::create_directories(dir);
    return dir;
}

void write_desk_config(const fs::path& path) {
    std::ofstream out(path);
    out << "[dataset]\n"
           "equation = ks\n"
           "gammas = 9\n"
           "sequences = 2\n"
           "frames = 30\n"
           "grid = 64\n"
           "seed = 11\n"
           "[model]\n"
           "kind = pfno\n"
           "levels = 1\n"
           "width = 4\n"
           "kmax = 8\n"
           "n_gamma = 2\n"
           "d_hidden = 8\n"
           "embed_min = 6\n"
           "embed_max = 24\n"
           "[train]\n"
           "n = 3\n"
           "epochs = 2\n"
           "batch = 16\n"
           "stride = 3\n"
           "seed = 5\n"
           "[eval]\n"
           "gamma = 9\n"
           "steps = 10\n"
           "burn_in = 5\n"
           "samples = 4\n"
           "sample_every = 2\n"
           "seed = 3\n";
}

TEST_CASE("cli: end-to-end generate/train/eval/selftest", "[cli]") {
    if (!cli_binary()) {
        SKIP("PARAFLAME_BIN not set");
    }
    const auto dir = work_dir();
    const auto cfg_path = dir / "run.cfg";
    write_desk_config(cfg_path);
    const std::string cfg = cfg_path.string();

    SECTION("generate: counts, determinism, csv export") {
        auto r1 = run_cli("generate " + cfg + " --out " + (dir / "a.pft").string() +
                          " --export-csv " + (dir / "rec.csv").string());
        INFO(r1.out);
        REQUIRE(r1.exit_code == 0);
        CHECK(r1.out.find("2 records, 60 frames") != std::string::npos);

        auto set = data::load(dir / "a.pft");
        CHECK(set.records.size() == 2);
        CHECK(set.grid_size == 64);

        std::ifstream csv(dir / "rec.csv");
        std::string header;
        std::getline(csv, header);
        CHECK(header.rfind("t,x_0", 0) == 0);

        auto r2 = run_cli("generate " + cfg + " --out " + (dir / "b.pft").string());
        REQUIRE(r2.exit_code == 0);
        CHECK(slurp(dir / "a.pft") == slurp(dir / "b.pft"));  // byte-identical

        auto r3 = run_cli("generate " + cfg + " --out " + (dir / "c.pft").string() + " --seed 99");
        REQUIRE(r3.exit_code == 0);
        CHECK(slurp(dir / "a.pft") != slurp(dir / "c.pft"));
    }

    SECTION("generate: paper-scale KS plan declares 5 gamma groups of 250") {
        auto r = run_cli("generate " + cfg + " --scale paper --plan-only");
        INFO(r.out);
        REQUIRE(r.exit_code == 0);
        for (const char* gamma : {"gamma=6", "gamma=9", "gamma=12", "gamma=18", "gamma=24"})
            CHECK(r.out.find(gamma) != std::string::npos);
        CHECK(r.out.find("records=250") != std::string::npos);
        CHECK(r.out.find("total: 1250 records") != std::string::npos);
    }

    SECTION("generate: bad config exits 64") {
        const auto bad = dir / "bad.cfg";
        std::ofstream(bad) << "[dataset]\nbogus = 1\n";
        auto r = run_cli("generate " + bad.string() + " --out " + (dir / "x.pft").string());
        CHECK(r.exit_code == 64);
    }

    SECTION("train: smoke run, history, resume, determinism") {
        REQUIRE(run_cli("generate " + cfg + " --out " + (dir / "train.pft").string()).exit_code ==
                0);
        REQUIRE(run_cli("generate " + cfg + " --validation --out " +
                        (dir / "valid.pft").string())
                    .exit_code == 0);

        const std::string train_args = "train " + cfg + " --data " +
                                       (dir / "train.pft").string() + " --valid " +
                                       (dir / "valid.pft").string();
        auto r = run_cli(train_args + " --out " + (dir / "m.pfck").string());
        INFO(r.out);
        REQUIRE(r.exit_code == 0);

        auto hist = slurp(dir / "m.pfck.history.csv");
        CHECK(hist.rfind("epoch,lr,train_loss,valid_loss", 0) == 0);
        CHECK(std::count(hist.begin(), hist.end(), '\n') == 3);  // header + 2 epochs

        auto model = models::load_checkpoint(dir / "m.pfck");
        CHECK(model->kind() == models::ModelKind::Pfno);

        // identical rerun is byte-identical
        auto r2 = run_cli(train_args + " --out " + (dir / "m2.pfck").string());
        REQUIRE(r2.exit_code == 0);
        CHECK(slurp(dir / "m.pfck") == slurp(dir / "m2.pfck"));
        CHECK(slurp(dir / "m.pfck.history.csv") ==
              std::string(slurp(dir / "m2.pfck.history.csv")));

        // resume continues the epoch numbering
        auto r3 = run_cli(train_args + " --out " + (dir / "m3.pfck").string() + " --resume " +
                          (dir / "m.pfck").string() + " --history " +
                          (dir / "m.pfck.history.csv").string());
        INFO(r3.out);
        REQUIRE(r3.exit_code == 0);
        CHECK(r3.out.find("resuming") != std::string::npos);
        CHECK(r3.out.find("at epoch 2") != std::string::npos);
    }

    SECTION("eval: oracle solver against itself, csv shapes, usage errors") {
        const auto out_dir = dir / "evalout";
        auto r = run_cli("eval solver --solver-reference --config " + cfg +
                         " --metrics err,len,corr --out " + out_dir.string());
        INFO(r.out);
        REQUIRE(r.exit_code == 0);

        // err.csv: all zeros (the model IS the reference generator)
        {
            std::ifstream in(out_dir / "err.csv");
            std::string line;
            std::getline(in, line);  // metadata
            CHECK(line.rfind("# model=solver", 0) == 0);
            std::getline(in, line);
            CHECK(line == "t,e");
            int rows = 0;
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                const auto comma = line.find(',');
                CHECK(std::stod(line.substr(comma + 1)) == 0.0);
                ++rows;
            }
            CHECK(rows == 11);  // initial frame + 10 steps
        }
        // corr.csv: first data row is r=0, R=1
        {
            std::ifstream in(out_dir / "corr.csv");
            std::string line;
            std::getline(in, line);
            std::getline(in, line);
            CHECK(line == "r,R");
            std::getline(in, line);
            CHECK(line.rfind("0,1", 0) == 0);
        }
        // len.csv starts at 1.0 for a flat initial condition
        {
            const auto flat_cfg = dir / "flat.cfg";
            std::ofstream out(flat_cfg);
            out << "[dataset]\nequation = ks\ngrid = 64\nic_low = 0\nic_high = 0\n"
                   "[eval]\ngamma = 9\nsteps = 3\n";
            out.close();
            auto rf = run_cli("eval solver --solver-reference --config " + flat_cfg.string() +
                              " --metrics len --out " + (out_dir / "flat").string());
            INFO(rf.out);
            REQUIRE(rf.exit_code == 0);
            std::ifstream in(out_dir / "flat" / "length.csv");
            std::string line;
            std::getline(in, line);
            std::getline(in, line);
            CHECK(line == "t,L");
            std::getline(in, line);
            CHECK(line == "0,1");
        }

        // missing metrics -> usage error
        auto rbad = run_cli("eval solver --solver-reference --config " + cfg + " --out " +
                            out_dir.string());
        CHECK(rbad.exit_code == 64);
        auto rbad2 = run_cli("eval solver --solver-reference --config " + cfg +
                             " --metrics bogus --out " + out_dir.string());
        CHECK(rbad2.exit_code == 64);
    }

    SECTION("eval: trained checkpoint produces the requested files") {
        REQUIRE(run_cli("generate " + cfg + " --out " + (dir / "t.pft").string()).exit_code == 0);
        REQUIRE(run_cli("generate " + cfg + " --validation --out " + (dir / "v.pft").string())
                    .exit_code == 0);
        REQUIRE(run_cli("train " + cfg + " --data " + (dir / "t.pft").string() + " --valid " +
                        (dir / "v.pft").string() + " --out " + (dir / "ck.pfck").string())
                    .exit_code == 0);
        const auto out_dir = dir / "evalck";
        auto r = run_cli("eval " + (dir / "ck.pfck").string() + " --data " +
                         (dir / "t.pft").string() + " --config " + cfg +
                         " --metrics err --out " + out_dir.string());
        INFO(r.out);
        REQUIRE(r.exit_code == 0);
        std::ifstream in(out_dir / "err.csv");
        std::string line;
        std::getline(in, line);
        CHECK(line.rfind("# model=pfno", 0) == 0);
    }

    SECTION("selftest passes on a healthy build and fails under fault injection") {
        auto ok = run_cli("selftest");
        INFO(ok.out);
        CHECK(ok.exit_code == 0);
        CHECK(ok.out.find("all 12 checks passed") != std::string::npos);

        auto bad = run_cli("selftest --inject-fft-scale 1.0001");
        CHECK(bad.exit_code == 1);
        CHECK(bad.out.find("FAIL") != std::string::npos);
    }

    fs::remove_all(dir);
}

}  // namespace
