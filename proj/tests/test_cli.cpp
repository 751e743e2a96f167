#include "cli.hpp"
#include "plume/cube_io.hpp"
#include "plume/eval.hpp"
#include "plume/mixture.hpp"
#include "test_util.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <sstream>

using namespace plume;
namespace fs = std::filesystem;

namespace {

fs::path tmp_root() {
  const char* env = std::getenv("PLUME_TEST_TMP");
  const fs::path root = env ? fs::path(env) : fs::temp_directory_path() / "plume_cli_tests";
  fs::create_directories(root);
  return root;
}

fs::path fresh(const std::string& name) {
  const fs::path p = tmp_root() / name;
  fs::remove_all(p);
  return p;
}

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result plume_run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

nlohmann::json manifest(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  return nlohmann::json::parse(in);
}

// Small gaussian-ish cube with a planted signature, written to `base`.
void small_scene(const fs::path& dir) {
  fs::create_directories(dir);
  std::mt19937_64 rng(81);
  const std::size_t m = 20, n = 20;
  const Eigen::Index p = 8;
  Eigen::MatrixXd s = testutil::gaussian_matrix(rng, p, static_cast<Eigen::Index>(m * n), 0.1);
  s.array() += 3.0;
  Eigen::VectorXd sig = Eigen::VectorXd::Zero(p);
  sig(3) = 1.0;
  sig(4) = 0.5;
  std::vector<std::uint8_t> mask(m * n, 0);
  for (std::size_t i = 0; i < m * n; i += 9) {
    s.col(static_cast<Eigen::Index>(i)) += 0.6 * sig;
    mask[i] = 1;
  }
  write_cube(HyperCube(m, n, testutil::iota_axis(p), s), dir / "cube");
  write_mask(PlumeMask(m, n, mask), dir / "mask");
  write_signatures(SignatureSet(sig, {"gas"}, testutil::iota_axis(p)), dir / "signatures.csv");
}

}  // namespace

TEST_CASE("synth writes a reproducible scene") {
  const fs::path a = fresh("synth_a"), b = fresh("synth_b");
  REQUIRE(plume_run({"synth", "gauss", "--seed", "42", "-o", a.string()}).code == 0);
  REQUIRE(plume_run({"synth", "gauss", "--seed", "42", "-o", b.string()}).code == 0);
  const HyperCube cube = read_cube(a / "cube");
  CHECK(cube.pixels() == 15000);
  CHECK(cube.bands() == 68);
  CHECK(read_mask(a / "mask").count() == 1000);
  CHECK(testutil::slurp(a / "cube.f32") == testutil::slurp(b / "cube.f32"));
  CHECK(testutil::slurp(a / "mask.u8") == testutil::slurp(b / "mask.u8"));
  const auto man = manifest(a);
  CHECK(man.at("subcommand") == "synth");
  CHECK(man.at("seed") == 42);
  CHECK(man.at("version") == cli::kVersion);
  CHECK(man.at("timings").contains("generate"));
}

TEST_CASE("usage errors exit 2 with one line") {
  const fs::path d = fresh("usage");
  const Result bogus = plume_run({"synth", "bogus", "-o", d.string()});
  CHECK(bogus.code == 2);
  CHECK(bogus.err.rfind("plume: usage error:", 0) == 0);
  CHECK(std::count(bogus.err.begin(), bogus.err.end(), '\n') == 1);
  CHECK(plume_run({}).code == 2);
  CHECK(plume_run({"detect", "--cube", "x"}).code == 2);
  CHECK(plume_run({"--version"}).code == 0);
}

TEST_CASE("detect rejects incompatible detector and model") {
  const fs::path d = fresh("detect_usage");
  small_scene(d);
  const std::string cube = (d / "cube").string(), sig = (d / "signatures.csv").string();
  CHECK(plume_run({"detect", "--cube", cube, "--signatures", sig, "-o", (d / "o").string(), "--detector", "nss"}).code == 2);
  CHECK(plume_run({"detect", "--cube", cube, "--signatures", sig, "-o", (d / "o").string(), "--model", "subspace"}).code == 2);
  CHECK(plume_run({"detect", "--cube", cube, "--signatures", sig, "-o", (d / "o").string(), "--sign", "?"}).code == 2);
  const Result missing = plume_run({"detect", "--cube", cube, "--signatures", (d / "none.csv").string(), "-o", (d / "o").string()});
  CHECK(missing.code == 1);
  CHECK(missing.err.rfind("plume: error:", 0) == 0);
}

TEST_CASE("detect with K = 1 equals library NMF scoring") {
  const fs::path d = fresh("detect_k1");
  small_scene(d);
  const fs::path o = d / "out";
  REQUIRE(plume_run({"detect", "--cube", (d / "cube").string(), "--signatures", (d / "signatures.csv").string(), "-o",
                     o.string(), "-K", "1", "--outlier-frac", "0"})
              .code == 0);
  const ScoreMap scores = read_score_map(o / "scores_000");
  const HyperCube cube = read_cube(d / "cube");
  const SignatureSet sig = read_signatures(d / "signatures.csv");
  const CovModel cov = fit_cov(cube.spectra());
  for (std::size_t i = 0; i < cube.pixels(); i += 13)
    CHECK(scores.at(i) == doctest::Approx(nmf_score(cube.spectrum(i), cov, sig)).epsilon(1e-6));
}

TEST_CASE("enhancement chain flags are accepted and recorded") {
  const fs::path d = fresh("detect_chain");
  small_scene(d);
  const fs::path o = d / "out";
  const Result r = plume_run({"detect", "--cube", (d / "cube").string(), "--signatures", (d / "signatures.csv").string(),
                              "-o", o.string(), "--resample-rounds", "2", "--plsr-components", "5", "--tau1", "0.2",
                              "--tau2", "0.15", "--tau3", "0.15", "-K", "2"});
  REQUIRE(r.code == 0);
  const auto cfg = manifest(o).at("config");
  CHECK(cfg.at("enhance").at("resample_rounds") == 2);
  CHECK(cfg.at("enhance").at("plsr_components") == 5);
  CHECK(cfg.at("enhance").at("tau1") == 0.2);
  CHECK(cfg.at("K") == 2);
}

TEST_CASE("fit, enhance and roc subcommands") {
  const fs::path d = fresh("misc");
  small_scene(d);
  REQUIRE(plume_run({"fit", "--cube", (d / "cube").string(), "-o", (d / "fit").string(), "-K", "2"}).code == 0);
  std::ifstream in(d / "fit" / "model.json");
  const BackgroundModel model = background_from_json(nlohmann::json::parse(in));
  CHECK(std::get<GaussianMixture>(model).size() == 2);

  REQUIRE(plume_run({"detect", "--cube", (d / "cube").string(), "--signatures", (d / "signatures.csv").string(), "-o",
                     (d / "det").string()})
              .code == 0);
  REQUIRE(plume_run({"enhance", "--cube", (d / "cube").string(), "--scores", (d / "det" / "scores_000").string(), "-o",
                     (d / "enh").string(), "--plsr-components", "3"})
              .code == 0);
  CHECK(read_score_map(d / "enh" / "scores").size() == 400);
  CHECK(plume_run({"enhance", "--cube", (d / "cube").string(), "--scores", (d / "det" / "scores_000").string(), "-o",
                   (d / "enh2").string()})
            .code == 2);

  REQUIRE(plume_run({"roc", "--scores", (d / "det" / "scores_000").string(), "--mask", (d / "mask").string(), "-o",
                     (d / "roc").string()})
              .code == 0);
  std::ifstream js(d / "roc" / "roc.json");
  const auto roc_json = nlohmann::json::parse(js);
  const double auc_value = roc_json.at("auc").get<double>();
  CHECK(auc_value == roc(read_score_map(d / "det" / "scores_000"), read_mask(d / "mask")).auc);
  CHECK(roc_json.at("groups").contains("plume"));
  CHECK(fs::exists(d / "roc" / "roc.csv"));
}

TEST_CASE("roc through files reproduces the hand example") {
  const fs::path d = fresh("roc_hand");
  fs::create_directories(d);
  write_score_map(ScoreMap(1, 4, {0.1, 0.4, 0.35, 0.8}), d / "s");
  write_mask(PlumeMask(1, 4, {0, 0, 1, 1}), d / "m");
  REQUIRE(plume_run({"roc", "--scores", (d / "s").string(), "--mask", (d / "m").string(), "-o", (d / "o").string()}).code == 0);
  std::ifstream js(d / "o" / "roc.json");
  CHECK(nlohmann::json::parse(js).at("auc").get<double>() == 0.75);
  write_mask(PlumeMask(1, 4, {0, 0, 0, 0}), d / "none");
  CHECK(plume_run({"roc", "--scores", (d / "s").string(), "--mask", (d / "none").string(), "-o", (d / "o2").string()}).code != 0);
}

TEST_CASE("anomaly subcommand rules") {
  const fs::path d = fresh("anomaly");
  fs::create_directories(d);
  std::mt19937_64 rng(82);
  const Eigen::MatrixXd train = testutil::gaussian_matrix(rng, 4, 900);
  write_cube(HyperCube(30, 30, testutil::iota_axis(4), train), d / "train");
  Eigen::MatrixXd test = train;
  for (Eigen::Index j = 0; j < 900; j += 30) test.col(j).array() += 40.0;
  write_cube(HyperCube(30, 30, testutil::iota_axis(4), test), d / "test");
  write_cube(HyperCube(30, 30, testutil::iota_axis(3), train.topRows(3)), d / "narrow");

  const std::vector<std::string> base{"anomaly", "--train", (d / "train").string(), "--min-leaf", "30", "--max-dim", "4"};
  auto with = [&](std::vector<std::string> extra) {
    std::vector<std::string> a = base;
    a.insert(a.end(), extra.begin(), extra.end());
    return plume_run(a);
  };
  REQUIRE(with({"--test", (d / "train").string(), "-o", (d / "same").string(), "--loglik-cutoff", "-1e5"}).code == 0);
  CHECK(read_mask(d / "same" / "anomaly_000").count() == 0);
  REQUIRE(with({"--test", (d / "test").string(), "-o", (d / "inj").string(), "--save-model"}).code == 0);
  CHECK(read_mask(d / "inj" / "anomaly_000").count() > 0);
  CHECK(fs::exists(d / "inj" / "model.gmra.json"));
  CHECK(with({"--test", (d / "test").string(), "-o", (d / "x").string(), "--eta", "0.1", "--radius", "1"}).code == 2);
  CHECK(with({"--test", (d / "narrow").string(), "-o", (d / "x").string()}).code == 2);
}

TEST_CASE("rerun reproduces every subcommand bitwise") {
  const fs::path d = fresh("rerun");
  small_scene(d / "in");
  const std::string cube = (d / "in" / "cube").string(), sig = (d / "in" / "signatures.csv").string();
  struct Case {
    std::vector<std::string> args;
    std::vector<std::string> files;
  };
  const std::vector<Case> cases{
      {{"synth", "poisson", "-o", (d / "synth").string()}, {"cube.f32", "mask.u8", "signatures.csv"}},
      {{"fit", "--cube", cube, "-o", (d / "fit").string(), "--model", "subspace"}, {"model.json"}},
      {{"detect", "--cube", cube, "--signatures", sig, "-o", (d / "det").string(), "--resample-rounds", "1",
        "--plsr-components", "2", "--threads", "2"},
       {"scores_000.score.f32"}},
      {{"enhance", "--cube", cube, "--scores", (d / "det" / "scores_000").string(), "--signatures", sig, "-o",
        (d / "enh").string(), "--resample-rounds", "1", "-K", "2"},
       {"scores.score.f32"}},
      {{"anomaly", "--train", cube, "--test", cube, "-o", (d / "ano").string(), "--min-leaf", "30", "--radius", "0.5",
        "--mc-samples", "200"},
       {"anomaly_000.score.f32", "anomaly_000.u8"}},
      {{"roc", "--scores", (d / "det" / "scores_000").string(), "--mask", (d / "in" / "mask").string(), "-o",
        (d / "roc").string()},
       {"roc.csv", "roc.json"}},
  };
  for (const auto& c : cases) {
    INFO(c.args[0]);
    REQUIRE(plume_run(c.args).code == 0);
    const fs::path dir = c.args[0] == "roc" ? d / "roc" : fs::path(c.args[std::find(c.args.begin(), c.args.end(), "-o") - c.args.begin() + 1]);
    const fs::path again = d / (c.args[0] + "_again");
    fs::remove_all(again);
    REQUIRE(plume_run({"rerun", (dir / "manifest.json").string(), "-o", again.string()}).code == 0);
    for (const auto& f : c.files) {
      INFO(f);
      CHECK(testutil::slurp(dir / f) == testutil::slurp(again / f));
      CHECK(!testutil::slurp(dir / f).empty());
    }
  }
}

TEST_CASE("score maps do not depend on the thread count") {
  const fs::path d = fresh("threads");
  small_scene(d / "in");
  for (const char* t : {"1", "3"})
    REQUIRE(plume_run({"detect", "--cube", (d / "in" / "cube").string(), "--signatures",
                       (d / "in" / "signatures.csv").string(), "-o", (d / t).string(), "--threads", t,
                       "--resample-rounds", "1"})
                .code == 0);
  CHECK(testutil::slurp(d / "1" / "scores_000.score.f32") == testutil::slurp(d / "3" / "scores_000.score.f32"));
}

TEST_CASE("PLUME_SEED sets the default seed") {
  const fs::path d = fresh("env_seed");
  setenv("PLUME_SEED", "7", 1);
  const Result r = plume_run({"synth", "poisson", "-o", d.string()});
  unsetenv("PLUME_SEED");
  REQUIRE(r.code == 0);
  CHECK(manifest(d).at("seed") == 7);
}
