#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "coordsr/dataset.hpp"
#include "coordsr/ft1.hpp"
#include "coordsr/png_io.hpp"
#include "coordsr/study_export.hpp"
#include "json.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path tmp_root = fs::temp_directory_path() / ("coordsr_cli_" + std::to_string(::getpid()));

struct Run {
  int code = -1;
  std::string output;
};

Run run(const std::string& args) {
  fs::create_directories(tmp_root);
  const fs::path log = tmp_root / "last_output.txt";
  const std::string cmd = std::string(COORDSR_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int st = std::system(cmd.c_str());
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(st) ? WEXITSTATUS(st) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const fs::path& dataset() {
  static const fs::path ds = [] {
    const fs::path p = tmp_root / "ds";
    fs::remove_all(p);
    const Run r = run("simulate --kind texture --n 48 --count 20 --seed 3 --out " + p.string());
    REQUIRE_MESSAGE(r.code == 0, r.output);
    return p;
  }();
  return ds;
}

fs::path init_checkpoint(const std::string& name, const std::string& extra = "") {
  const fs::path cfg = tmp_root / (name + ".json");
  std::ofstream(cfg) << R"({"d": 8, "blocks": 2, "mlp_layers": 3, "hidden": 16, "T": 0)" << extra << "}";
  const fs::path out = tmp_root / name;
  fs::remove_all(out);
  const Run r = run("train --config " + cfg.string() + " --dataset " + dataset().string() + " --out " + out.string());
  REQUIRE_MESSAGE(r.code == 0, r.output);
  return out / "checkpoints" / "step_000000";
}

struct Cleanup {
  ~Cleanup() { fs::remove_all(tmp_root); }
} cleanup;

}  // namespace

TEST_SUITE("exit codes") {
  TEST_CASE("help and usage errors") {
    CHECK(run("--help").code == 0);
    CHECK(run("train --help").code == 0);
    CHECK(run("").code == 2);
    CHECK(run("frobnicate").code == 2);
    CHECK(run("simulate --bogus").code == 2);
  }

  TEST_CASE("conv with a scale range is a config error") {
    const Run r = run("train --model conv --scale-range 1.5 2 --dataset " + dataset().string() + " --out " +
                      (tmp_root / "conv_bad").string());
    CHECK(r.code == 2);
    CHECK(r.output.find("scale_range") != std::string::npos);
  }

  TEST_CASE("missing checkpoint is a runtime error") {
    CHECK(run("eval --checkpoint " + (tmp_root / "nowhere").string() + " --dataset " + dataset().string()).code == 1);
    const coordsr::DatasetManifest m = coordsr::load_manifest(dataset() / "manifest.json");
    CHECK(run("infer --checkpoint " + (tmp_root / "nowhere").string() + " --input " + (dataset() / m.items[0].path).string() +
              " --output " + (tmp_root / "y.png").string() + " --scale 2")
              .code == 1);
    CHECK(run("infer --checkpoint " + (tmp_root / "nowhere").string() + " --input missing.png --output y.png").code == 2);
  }

  TEST_CASE("datasets below 10 items are rejected") {
    CHECK(run("simulate --kind texture --n 32 --count 5 --out " + (tmp_root / "small").string()).code == 2);
  }
}

TEST_SUITE("simulate") {
  TEST_CASE("20 items split 16/2/2 and the same seed gives the same bytes") {
    const coordsr::DatasetManifest m = coordsr::load_manifest(dataset() / "manifest.json");
    CHECK(m.split(coordsr::Split::train).size() == 16);
    CHECK(m.split(coordsr::Split::val).size() == 2);
    CHECK(m.split(coordsr::Split::test).size() == 2);
    const fs::path again = tmp_root / "ds_again";
    REQUIRE(run("simulate --kind texture --n 48 --count 20 --seed 3 --out " + again.string()).code == 0);
    CHECK(slurp(again / "manifest.json") == slurp(dataset() / "manifest.json"));
    for (const auto& item : m.items) CHECK(slurp(again / item.path) == slurp(dataset() / item.path));
    const fs::path other = tmp_root / "ds_other";
    REQUIRE(run("simulate --kind texture --n 48 --count 20 --seed 4 --out " + other.string()).code == 0);
    CHECK(slurp(other / m.items[0].path) != slurp(dataset() / m.items[0].path));
  }
}

TEST_SUITE("train, eval, infer") {
  TEST_CASE("tiny run end to end") {
    const fs::path cfg = tmp_root / "short.json";
    std::ofstream(cfg) << R"({"d": 8, "blocks": 2, "mlp_layers": 3, "hidden": 16, "T": 4, "eval_every": 2, "tile_hr": 24, "batch": 2, "lr": 0.001})";
    const fs::path out = tmp_root / "short";
    const Run tr = run("train --config " + cfg.string() + " --dataset " + dataset().string() + " --seed 9 --out " + out.string());
    REQUIRE_MESSAGE(tr.code == 0, tr.output);
    CHECK(fs::exists(out / "curve.csv"));
    const json resolved = json::parse(slurp(out / "resolved-config.json"));
    CHECK(resolved["seed"] == 9);
    CHECK(resolved["T"] == 4);

    const Run ev = run("eval --checkpoint " + (out / "checkpoints" / "best").string() + " --scale 3 --with-bicubic --out " +
                       (out / "report.csv").string());
    REQUIRE_MESSAGE(ev.code == 0, ev.output);
    const std::string csv = slurp(out / "report.csv");
    CHECK(csv.rfind("item,psnr_db,vif\n", 0) == 0);
    CHECK(csv.find("\nmean,") != std::string::npos);
    CHECK(csv.find("\nbicubic_mean,") != std::string::npos);

    const coordsr::DatasetManifest m = coordsr::load_manifest(dataset() / "manifest.json");
    const fs::path input = dataset() / m.items[0].path;
    const Run inf = run("infer --checkpoint " + (out / "checkpoints" / "best").string() + " --input " + input.string() +
                        " --output " + (out / "up.png").string() + " --size 70 61");
    REQUIRE_MESSAGE(inf.code == 0, inf.output);
    const coordsr::ImageGrid up = coordsr::read_image(out / "up.png");
    CHECK(up.rows() == 70);
    CHECK(up.cols() == 61);
  }

  TEST_CASE("conv checkpoints refuse other scales") {
    const fs::path ck = init_checkpoint("conv2", R"(, "model": "conv", "scale_range": [2, 2])");
    const Run bad = run("eval --checkpoint " + ck.string() + " --scale 3 --dataset " + dataset().string());
    CHECK(bad.code == 2);
    const Run ok = run("eval --checkpoint " + ck.string() + " --scale 2 --dataset " + dataset().string());
    CHECK(ok.code == 0);
    CHECK(ok.output.find("item,psnr_db,vif") != std::string::npos);
  }
}

TEST_SUITE("export-study") {
  TEST_CASE("pinned side assignment") {
    const auto sides = coordsr::study_side_assignment(8, 0);
    std::string s;
    for (bool b : sides) s += b ? 'A' : 'B';
    CHECK(s == "AABBBABB");
    CHECK(coordsr::study_side_assignment(8, 0) == sides);
    CHECK(coordsr::study_side_assignment(8, 1) != sides);
  }

  TEST_CASE("study files are blinded; the key maps pairs back") {
    const fs::path a = init_checkpoint("coord_a");
    const fs::path b = init_checkpoint("coord_b", R"(, "seed": 77)");
    const fs::path out = tmp_root / "study_out";
    fs::remove_all(out);
    const Run r = run("export-study --checkpoint-a " + a.string() + " --checkpoint-b " + b.string() + " --dataset " +
                      dataset().string() + " --split train --seed 0 --study-id s9 --label-a coordnet --label-b baseline --out " +
                      out.string());
    REQUIRE_MESSAGE(r.code == 0, r.output);
    const json study = json::parse(slurp(out / "study" / "study.json"));
    CHECK(study["study_id"] == "s9");
    CHECK(study["pairs"].size() == 16);
    for (const auto& e : fs::recursive_directory_iterator(out / "study")) {
      const std::string name = e.path().filename().string();
      CHECK(name.find("coordnet") == std::string::npos);
      CHECK(name.find("baseline") == std::string::npos);
      if (e.is_regular_file()) {
        const std::string body = slurp(e.path());
        CHECK(body.find("coordnet") == std::string::npos);
        CHECK(body.find("baseline") == std::string::npos);
      }
    }
    const json key = json::parse(slurp(out / "key.json"));
    CHECK(key["method_a"] == "coordnet");
    CHECK(key["method_b"] == "baseline");
    const auto sides = coordsr::study_side_assignment(16, 0);
    for (std::size_t i = 0; i < 16; ++i) {
      CHECK(key["pairs"][i]["pair_id"] == study["pairs"][i]["pair_id"]);
      CHECK(key["pairs"][i]["a_side"] == (sides[i] ? "left" : "right"));
      CHECK(fs::exists(out / "study" / "pairs" / study["pairs"][i]["left"].get<std::string>()));
    }
    CHECK(run("export-study --checkpoint-a " + a.string() + " --checkpoint-b " + b.string() + " --dataset " +
              dataset().string() + " --out " + out.string())
              .code != 0);
  }
}
