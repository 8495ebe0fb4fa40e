#include "doctest.h"
#include "fixtures.hpp"
#include "lfdeocc/cli.hpp"
#include "lfdeocc/io/light_field_dir.hpp"
#include "lfdeocc/io/mask_library.hpp"
#include "lfdeocc/io/png.hpp"
#include "lfdeocc/metrics.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace lfdeocc;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

// A 3x3 light field of a textured plane, plus a two-mask library.
struct Workspace {
  fixtures::TempDir dir{"cli"};
  Workspace(double disparity = 1.0, std::size_t h = 32, std::size_t w = 32) {
    const LightField lf = fixtures::plane_light_field(fixtures::Texture::random(5), {3, 3}, h, w, disparity);
    io::write_light_field_dir(dir / "lf", lf, lf.center_view());
    fs::create_directories(dir / "masks");
    io::write_mask(dir / "masks" / "fence.png", fixtures::fence_mask(16, 16, 1, 6, 2));
    io::write_mask(dir / "masks" / "bars.png", fixtures::bars_mask(12, 16, 2, 5, 2));
  }
  std::string p(const std::string& name) const { return (dir / name).string(); }
};

void write_tiny_config(const fs::path& path, const std::string& extra = "") {
  io::write_text(path, R"({"base_depth": 2, "aspp_rates": [1, 2], "aspp_groups": 1, "patch": 16, "stride": 16,
                          "batch_size": 2, "epochs": 1)" + extra + "}");
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(cli({}).code == 2);
  CHECK(cli({"bogus"}).code == 2);
  CHECK(cli({"refocus"}).code == 2);
  CHECK(cli({"refocus", "--lf-dir", "x", "--out", "y", "--method", "mean", "--disparity", "1"}).code == 2);
  const Run help = cli({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("synthesize") != std::string::npos);
}

TEST_CASE("parse_sweep") {
  CHECK(parse_sweep("0:2:5") == std::vector<double>{0.0, 0.5, 1.0, 1.5, 2.0});
  CHECK(parse_sweep("-1:1:1") == std::vector<double>{-1.0});
  CHECK(parse_sweep("2:0:3") == std::vector<double>{2.0, 1.0, 0.0});
  for (const char* bad : {"", "1:2", "1:2:3:4", "a:2:3", "1:2:0", "1:2:x", "1:2:2.5", "nan:1:2"}) {
    CHECK_THROWS_AS(parse_sweep(bad), std::invalid_argument);
  }
}

TEST_CASE("synthesize") {
  Workspace ws;
  const std::vector<std::string> base{"synthesize", "--lf-dir", ws.p("lf"), "--mask-dir", ws.p("masks"),
                                      "--count", "3", "--layers", "2"};
  auto with = [&](std::vector<std::string> extra, const std::string& out) {
    std::vector<std::string> a = base;
    a.insert(a.end(), {"--out", ws.p(out)});
    a.insert(a.end(), extra.begin(), extra.end());
    return cli(a);
  };
  REQUIRE(with({"--seed", "7", "--shuffle-channels"}, "a").code == 0);
  REQUIRE(with({"--seed", "7", "--shuffle-channels"}, "b").code == 0);
  REQUIRE(with({"--seed", "8", "--shuffle-channels"}, "c").code == 0);
  CHECK(fixtures::same_tree(ws.dir / "a", ws.dir / "b"));
  CHECK_FALSE(fixtures::same_tree(ws.dir / "a", ws.dir / "c"));
  CHECK(fs::exists(ws.dir / "a" / "sample_0002" / "layers.json"));
  CHECK(fs::exists(ws.dir / "a" / "sample_0000" / "gt.png"));
  CHECK(io::read_json(ws.dir / "a" / "synthesis.json").at("seed") == 7);
  const auto sample = io::read_light_field_dir(ws.dir / "a" / "sample_0001");
  CHECK(sample.lf.grid() == AngularGrid{3, 3});

  SUBCASE("environment seed is used when no flag is given") {
    setenv("LFDEOCC_SEED", "7", 1);
    REQUIRE(with({"--shuffle-channels"}, "env").code == 0);
    CHECK(fixtures::same_tree(ws.dir / "a", ws.dir / "env"));
    setenv("LFDEOCC_SEED", "8", 1);
    REQUIRE(with({"--seed", "7", "--shuffle-channels"}, "flag").code == 0);
    CHECK(fixtures::same_tree(ws.dir / "a", ws.dir / "flag"));
    setenv("LFDEOCC_SEED", "seven", 1);
    CHECK(with({}, "bad").code == 2);
    unsetenv("LFDEOCC_SEED");
  }
  SUBCASE("invalid requests") {
    CHECK(with({"--layers", "4"}, "x").code == 2);
    std::vector<std::string> a = base;
    a[4] = ws.p("nowhere");
    a.insert(a.end(), {"--out", ws.p("x"), "--error-json", ws.p("err.json")});
    CHECK(cli(a).code == 1);
    const nlohmann::json e = io::read_json(ws.dir / "err.json");
    CHECK(e.at("error") == "io");
    CHECK(e.at("path").get<std::string>().find("nowhere") != std::string::npos);
  }
}

TEST_CASE("refocus") {
  Workspace ws(1.0);
  const Run r = cli({"refocus", "--lf-dir", ws.p("lf"), "--sweep", "-1:2:7", "--out", ws.p("rf")});
  REQUIRE(r.code == 0);
  const nlohmann::json j = io::read_json(ws.dir / "rf" / "sharpness.json");
  CHECK(j.at("best_disparity") == 1.0);
  CHECK(j.at("sharpness").size() == 7);
  CHECK(j.at("method") == "avg");
  CHECK(j.at("holes")[0] == 0);
  CHECK(fs::exists(ws.dir / "rf" / "refocus_006.png"));
  // At the plane's disparity the refocused image is the center view.
  const Image at_plane = io::read_png(ws.dir / "rf" / "refocus_004.png");
  const Image center = io::read_light_field_dir(ws.dir / "lf").lf.center_view();
  CHECK(psnr(at_plane, center) > 45.0);

  CHECK(cli({"refocus", "--lf-dir", ws.p("lf"), "--disparity", "1", "--method", "median", "--out", ws.p("m")}).code ==
        0);
  CHECK(io::read_json(ws.dir / "m" / "sharpness.json").at("method") == "median");
  CHECK(cli({"refocus", "--lf-dir", ws.p("lf"), "--out", ws.p("x")}).code == 2);
  CHECK(cli({"refocus", "--lf-dir", ws.p("lf"), "--sweep", "1:2", "--out", ws.p("x")}).code == 2);
  CHECK(cli({"refocus", "--lf-dir", ws.p("lf"), "--sweep", "0:1:2", "--disparity", "1", "--out", ws.p("x")}).code ==
        2);
}

TEST_CASE("train, infer, evaluate, report") {
  Workspace ws(0.0, 20, 18);
  REQUIRE(cli({"synthesize", "--lf-dir", ws.p("lf"), "--mask-dir", ws.p("masks"), "--count", "3", "--out",
               ws.p("data"), "--seed", "1"})
              .code == 0);
  write_tiny_config(ws.dir / "cfg.json");
  const std::vector<std::string> train{"train", "--data", ws.p("data"), "--config", ws.p("cfg.json"), "--seed", "3"};
  auto train_to = [&](const std::string& out, std::vector<std::string> extra = {}) {
    std::vector<std::string> a = train;
    a.insert(a.end(), {"--out", ws.p(out)});
    a.insert(a.end(), extra.begin(), extra.end());
    return cli(a);
  };
  REQUIRE(train_to("t1").code == 0);
  REQUIRE(train_to("t2").code == 0);
  CHECK(fixtures::same_bytes(ws.dir / "t1" / "weights.docn", ws.dir / "t2" / "weights.docn"));
  CHECK(fixtures::same_bytes(ws.dir / "t1" / "train_log.csv", ws.dir / "t2" / "train_log.csv"));
  CHECK(fs::exists(ws.dir / "t1" / "checkpoints" / "epoch_0001.docn"));
  const nlohmann::json summary = io::read_json(ws.dir / "t1" / "train_summary.json");
  CHECK(summary.at("network").at("base_depth") == 2);
  CHECK(summary.at("network").at("angular_rows") == 3);
  CHECK(summary.at("train").at("seed") == 3);
  CHECK(summary.at("steps") == 3);

  SUBCASE("train options") {
    CHECK(train_to("t3", {"--epochs", "2", "--resume", ws.p("t1/checkpoints/epoch_0001.docn")}).code == 0);
    CHECK(io::read_json(ws.dir / "t3" / "train_summary.json").at("steps") == 6);
    CHECK(train_to("t4", {"--max-steps", "1"}).code == 0);
    CHECK(io::read_json(ws.dir / "t4" / "train_summary.json").at("steps") == 1);
    write_tiny_config(ws.dir / "bad.json", R"(, "learning_rate": 1)");
    CHECK(cli({"train", "--data", ws.p("data"), "--config", ws.p("bad.json"), "--out", ws.p("t5")}).code == 2);
    write_tiny_config(ws.dir / "bad2.json", R"(, "patch": 20)");
    CHECK(cli({"train", "--data", ws.p("data"), "--config", ws.p("bad2.json"), "--out", ws.p("t5")}).code == 2);
    write_tiny_config(ws.dir / "seeded.json", R"(, "seed": 3)");
    CHECK(cli({"train", "--data", ws.p("data"), "--config", ws.p("seeded.json"), "--out", ws.p("t6")}).code == 0);
    CHECK(fixtures::same_bytes(ws.dir / "t1" / "weights.docn", ws.dir / "t6" / "weights.docn"));
  }

  const std::string weights = ws.p("t1/weights.docn");
  REQUIRE(cli({"infer", "--weights", weights, "--lf-dir", ws.p("data/sample_0000"), "--out", ws.p("pred/a.png")}).code ==
          0);
  REQUIRE(cli({"infer", "--weights", weights, "--lf-dir", ws.p("data/sample_0000"), "--out", ws.p("pred2/a.png")})
              .code == 0);
  CHECK(fixtures::same_bytes(ws.dir / "pred" / "a.png", ws.dir / "pred2" / "a.png"));
  const Image pred = io::read_png(ws.dir / "pred" / "a.png");
  CHECK(pred.height() == 20);
  CHECK(pred.width() == 18);
  CHECK(pred.channels() == 3);

  SUBCASE("infer rejects a mismatched grid") {
    const LightField five = fixtures::plane_light_field(fixtures::Texture::random(1), {5, 5}, 16, 16, 0.0);
    io::write_light_field_dir(ws.dir / "five", five);
    const Run r = cli({"--error-json", ws.p("err.json"), "infer", "--weights", weights, "--lf-dir", ws.p("five"),
                       "--out", ws.p("x.png")});
    CHECK(r.code == 1);
    const nlohmann::json e = io::read_json(ws.dir / "err.json");
    CHECK(e.at("error") == "weights_config_mismatch");
    CHECK(e.at("field") == "in_channels");
    io::write_text(ws.dir / "junk.docn", "junk");
    CHECK(cli({"--error-json", ws.p("err2.json"), "infer", "--weights", ws.p("junk.docn"), "--lf-dir", ws.p("five"),
               "--out", ws.p("x.png")})
              .code == 1);
    CHECK(io::read_json(ws.dir / "err2.json").at("error") == "weights_format");
  }

  REQUIRE(cli({"evaluate", "--pred", ws.p("pred/a.png"), "--gt", ws.p("data/sample_0000"), "--out",
               ws.p("eval/net.json"), "--method", "net"})
              .code == 0);
  const EvalReport rep = io::read_json(ws.dir / "eval" / "net.json").get<EvalReport>();
  CHECK(rep.method == "net");
  REQUIRE(rep.rows.size() == 1);
  CHECK(rep.rows[0].psnr == doctest::Approx(psnr(pred, io::read_png(ws.dir / "data" / "sample_0000" / "gt.png"))));
  CHECK(fs::exists(ws.dir / "eval" / "net.csv"));

  // Directory mode: ground truth by sample folder name.
  fs::create_directories(ws.dir / "preds");
  fs::copy_file(ws.dir / "data" / "sample_0001" / "gt.png", ws.dir / "preds" / "sample_0001.png");
  fs::copy_file(ws.dir / "data" / "sample_0002" / "view_01_01.png", ws.dir / "preds" / "sample_0002.png");
  REQUIRE(cli({"evaluate", "--pred", ws.p("preds"), "--gt", ws.p("data"), "--out", ws.p("eval/center.json"),
               "--method", "center"})
              .code == 0);
  const EvalReport rep2 = io::read_json(ws.dir / "eval" / "center.json").get<EvalReport>();
  REQUIRE(rep2.rows.size() == 2);
  CHECK(rep2.rows[0].scene == "sample_0001");
  CHECK(rep2.rows[0].psnr == kPsnrCap);
  CHECK(rep2.rows[1].psnr < kPsnrCap);

  REQUIRE(cli({"report", "--inputs", ws.p("eval/net.json"), ws.p("eval/center.json"), "--out", ws.p("cmp.csv")})
              .code == 0);
  std::ifstream in(ws.dir / "cmp.csv");
  std::string first;
  std::getline(in, first);
  CHECK(first == "metric,method,a,sample_0001,sample_0002,Average");
  CHECK(cli({"report", "--inputs", ws.p("cfg.json"), "--out", ws.p("x.csv")}).code == 1);
}
