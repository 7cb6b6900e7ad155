#include <catch2/catch_amalgamated.hpp>
#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;
};

std::string cli_path() {
    const char* p = std::getenv("AEDF_CLI_BIN");
    REQUIRE(p != nullptr);
    return p;
}

RunResult run(const std::string& args) {
    const std::string cmd = cli_path() + " " + args + " 2>&1";
    std::array<char, 4096> buf{};
    RunResult result;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe))
        result.output += buf.data();
    const int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

fs::path fresh_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string file_bytes(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("synth reruns are byte-identical; bad parents exit 3", "[cli]") {
    auto dir = fresh_dir("aedf_cli_synth");
    auto r1 = run("synth --out " + (dir / "c1").string() + " --domain A --clips 12 --seed 5");
    REQUIRE(r1.exit_code == 0);
    auto r2 = run("synth --out " + (dir / "c2").string() + " --domain A --clips 12 --seed 5");
    REQUIRE(r2.exit_code == 0);
    REQUIRE(file_bytes(dir / "c1" / "synth_A.csv") == file_bytes(dir / "c2" / "synth_A.csv"));
    REQUIRE(file_bytes(dir / "c1" / "synth_A_00.wav") == file_bytes(dir / "c2" / "synth_A_00.wav"));

    auto bad = run("synth --out /nonexistent_root_xyz/a/b --domain A --clips 2");
    REQUIRE(bad.exit_code == 3);
    fs::remove_all(dir);
}

TEST_CASE("featurize counts cache hits and reports corrupt files", "[cli]") {
    auto dir = fresh_dir("aedf_cli_feat");
    REQUIRE(run("synth --out " + (dir / "c").string() + " --domain A --clips 8 --seed 3").exit_code ==
            0);
    const std::string manifest = (dir / "c" / "synth_A.csv").string();
    const std::string cache = (dir / "cache").string();

    auto r1 = run("featurize --manifest " + manifest + " --cache " + cache);
    REQUIRE(r1.exit_code == 0);
    REQUIRE(r1.output.find("8 computed, 0 cached") != std::string::npos);

    auto r2 = run("featurize --manifest " + manifest + " --cache " + cache);
    REQUIRE(r2.exit_code == 0);
    REQUIRE(r2.output.find("0 computed, 8 cached") != std::string::npos);

    // Corrupt one WAV and drop its cache entry: the rest still succeed and
    // the failing file is named.
    {
        std::ofstream os(dir / "c" / "synth_A_2.wav", std::ios::binary | std::ios::trunc);
        os << "garbage";
    }
    fs::remove(fs::path(cache) / "synth_A_2.feat");
    auto r3 = run("featurize --manifest " + manifest + " --cache " + cache);
    REQUIRE(r3.exit_code == 1);
    REQUIRE(r3.output.find("synth_A_2") != std::string::npos);
    REQUIRE(r3.output.find("7 cached") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("train rejects unknown strategies with exit 2", "[cli]") {
    auto dir = fresh_dir("aedf_cli_train");
    auto r = run("train --manifest missing.csv --cache " + (dir / "cache").string() + " --out " +
                 (dir / "run").string() + " --strategy three-stage");
    REQUIRE(r.exit_code == 2);
    REQUIRE(r.output.find("unknown strategy") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("train/eval round trip: table, JSON agreement, determinism, exit 5", "[cli][slow]") {
    auto dir = fresh_dir("aedf_cli_pipeline");
    const std::string corpus = (dir / "corpus").string();
    const std::string cache = (dir / "cache").string();
    REQUIRE(run("synth --out " + corpus + " --domain A --clips 24 --seed 9").exit_code == 0);
    const std::string manifest = corpus + "/synth_A.csv";

    auto train = run("train --manifest " + manifest + " --cache " + cache + " --out " +
                     (dir / "run").string() + " --strategy one-stage-fw --lambda 0.1 --epochs 2 "
                     "--batch 8 --seed 4");
    REQUIRE(train.exit_code == 0);
    REQUIRE(train.output.find("epoch 0 stage 1 L_dis") != std::string::npos);

    const std::string eval_cmd = "eval --checkpoint " + (dir / "run" / "best.ckpt").string() +
                                 " --model-config " + (dir / "run" / "model.json").string() +
                                 " --test " + manifest + " --cache " + cache + " --out " +
                                 (dir / "eval.json").string();
    auto e1 = run(eval_cmd);
    REQUIRE(e1.exit_code == 0);

    // stdout table and JSON agree to printed precision.
    auto j = nlohmann::json::parse(file_bytes(dir / "eval.json"));
    REQUIRE(j.size() == 1);
    const std::string auc_str = j[0].at("auc_percent").get<std::string>();
    REQUIRE(e1.output.find(auc_str) != std::string::npos);

    auto e2 = run(eval_cmd);
    REQUIRE(e2.output == e1.output);

    // Single-class test set: metric undefined, exit 5.
    {
        std::ofstream os(dir / "single.csv");
        os << "itemid,hasbird\n";
        auto m = nlohmann::json::parse("{}");
        (void)m;
        std::ifstream is(manifest);
        std::string line;
        std::getline(is, line);
        while (std::getline(is, line))
            if (line.size() > 2 && line.substr(line.size() - 1) == "1") os << line << "\n";
    }
    auto e5 = run("eval --checkpoint " + (dir / "run" / "best.ckpt").string() + " --model-config " +
                  (dir / "run" / "model.json").string() + " --test " + (dir / "single.csv").string() +
                  " --cache " + cache + " --audio-root " + corpus);
    REQUIRE(e5.exit_code == 5);

    // dump-repr: unknown itemid exits 2; valid ids produce PGM pairs.
    auto d_bad = run("dump-repr --checkpoint " + (dir / "run" / "best.ckpt").string() +
                     " --model-config " + (dir / "run" / "model.json").string() + " --manifest " +
                     manifest + " --cache " + cache + " --out " + (dir / "repr").string() +
                     " --itemid nope");
    REQUIRE(d_bad.exit_code == 2);

    auto d_ok = run("dump-repr --checkpoint " + (dir / "run" / "best.ckpt").string() +
                    " --model-config " + (dir / "run" / "model.json").string() + " --manifest " +
                    manifest + " --cache " + cache + " --out " + (dir / "repr").string() +
                    " --itemid synth_A_00");
    REQUIRE(d_ok.exit_code == 0);
    const std::string pgm = file_bytes(dir / "repr" / "synth_A_00.a.pgm");
    REQUIRE(pgm.substr(0, 3) == "P5\n");
    // 1-second clips: 2 pooled frames as rows, 64 stacked channel-mel columns.
    REQUIRE(pgm.find("64 2\n") != std::string::npos);

    fs::remove_all(dir);
}
