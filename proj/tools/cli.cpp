#include "cli.hpp"

#include "plume/eval.hpp"
#include "plume/gmra.hpp"
#include "plume/pipeline.hpp"
#include "plume/synthgen.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace plume::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::uint64_t default_seed() {
  if (const char* env = std::getenv("PLUME_SEED")) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw UsageError(std::string("PLUME_SEED is not an unsigned integer: '") + env + "'");
  }
  return 42;
}

class Timer {
 public:
  explicit Timer(json& sink) : sink_(sink) {}
  template <typename Fn>
  auto stage(const std::string& name, Fn&& fn) {
    const auto start = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      record(name, start);
    } else {
      auto result = fn();
      record(name, start);
      return result;
    }
  }

 private:
  void record(const std::string& name, std::chrono::steady_clock::time_point start) {
    const std::chrono::duration<double> d = std::chrono::steady_clock::now() - start;
    sink_[name] = sink_.value(name, 0.0) + d.count();
  }
  json& sink_;
};

struct Manifest {
  std::string subcommand;
  std::vector<std::string> argv;
  json config = json::object();
  std::uint64_t seed = 0;
  json inputs = json::array();
  json outputs = json::array();
  json timings = json::object();

  void write(const fs::path& dir) const {
    const json doc = {{"subcommand", subcommand}, {"argv", argv},     {"config", config},
                      {"seed", seed},             {"inputs", inputs}, {"outputs", outputs},
                      {"timings", timings},       {"version", kVersion}};
    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    out << doc.dump(2) << '\n';
    if (!out) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
  }
};

void prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create output directory " + dir.string());
}

std::string frame_name(const char* stem, std::size_t i) {
  std::ostringstream s;
  s << stem << '_' << std::setw(3) << std::setfill('0') << i;
  return s.str();
}

PlumeSign parse_sign(const std::string& s) {
  if (s == "+" || s == "+1" || s == "pos" || s == "positive") return PlumeSign::Positive;
  if (s == "-" || s == "-1" || s == "neg" || s == "negative") return PlumeSign::Negative;
  throw UsageError("--sign must be + or -");
}

template <typename Fn>
auto as_usage(Fn&& fn) {
  try {
    return fn();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

// ---------------------------------------------------------------- synth

struct SynthOptions {
  std::string experiment;
  std::string out;
  std::uint64_t seed = 0;
  double amplitude = 2.0;
  std::size_t frames = 3;
  std::size_t clean_frames = 1;
};

void cmd_synth(const SynthOptions& o, Manifest& m) {
  if (o.experiment != "movie" && !is_experiment(o.experiment))
    throw UsageError("unknown experiment '" + o.experiment + "' (gauss, subspace, poisson, twoplume, movie)");
  const fs::path dir = o.out;
  prepare_dir(dir);
  m.config = {{"experiment", o.experiment}, {"amplitude", o.amplitude}};
  Timer timer(m.timings);

  if (o.experiment == "movie") {
    MovieSpec spec;
    spec.frames = o.frames;
    spec.clean_frames = o.clean_frames;
    m.config["frames"] = o.frames;
    m.config["clean_frames"] = o.clean_frames;
    const Movie movie = timer.stage("generate", [&] { return as_usage([&] { return gen_movie(spec, o.seed); }); });
    timer.stage("write", [&] {
      for (std::size_t f = 0; f < movie.frames.size(); ++f) {
        write_cube(movie.frames[f], dir / frame_name("frame", f));
        write_mask(movie.masks[f], dir / frame_name("mask", f));
        m.outputs.push_back((dir / frame_name("frame", f)).string());
        m.outputs.push_back((dir / frame_name("mask", f)).string());
      }
      write_signatures(movie.signatures.subset(0), dir / "signatures.csv");
      m.outputs.push_back((dir / "signatures.csv").string());
    });
    return;
  }

  SceneSpec spec;
  spec.reference = reference_spectra(68, o.amplitude);
  const Scene scene = timer.stage("generate", [&] { return gen_scene(o.experiment, spec, o.seed); });
  timer.stage("write", [&] {
    const PackedScene packed = pack_scene(scene);
    write_cube(packed.cube, dir / "cube");
    write_mask(packed.mask, dir / "mask");
    const SignatureSet sigs = o.experiment == "twoplume" ? scene.signatures : scene.signatures.subset(0);
    write_signatures(sigs, dir / "signatures.csv");
    std::ofstream labels(dir / "labels.json", std::ios::trunc);
    labels << json{{"names", scene.label_names}, {"labels", packed.labels}}.dump() << '\n';
    if (!labels) throw std::runtime_error("cannot write labels.json");
    for (const char* f : {"cube", "mask", "signatures.csv", "labels.json"}) m.outputs.push_back((dir / f).string());
  });
}

// ---------------------------------------------------------------- fit / detect / enhance

struct ModelOptions {
  std::string model = "gaussian";
  std::size_t components = 3;
  std::size_t dimension = 2;
  double delta_percentile = 50.0;
  int max_iter = 100;
};

ModelSpec model_spec(const ModelOptions& o, std::uint64_t seed) {
  ModelSpec spec;
  spec.kind = as_usage([&] { return parse_model_kind(o.model); });
  spec.components = o.components;
  spec.dimension = o.dimension;
  spec.seed = seed;
  spec.max_iter = o.max_iter;
  spec.delta_percentile = o.delta_percentile;
  if (spec.components == 0) throw UsageError("-K must be at least 1");
  if (!(spec.delta_percentile >= 0.0 && spec.delta_percentile <= 100.0))
    throw UsageError("--delta-percentile must lie in [0, 100]");
  return spec;
}

json model_json(const ModelSpec& s) {
  return {{"model", std::string(to_string(s.kind))},
          {"K", s.components},
          {"d", s.dimension},
          {"max_iter", s.max_iter},
          {"delta_percentile", s.delta_percentile}};
}

DetectionSpec detection_spec(const std::string& detector, const std::string& sign, const ModelSpec& model) {
  DetectionSpec spec;
  spec.detector = as_usage([&] { return parse_detector_kind(detector); });
  spec.sign = parse_sign(sign);
  spec.model = model;
  if (spec.detector == DetectorKind::NMF && model.kind != ModelKind::Gaussian)
    throw UsageError("the nmf detector needs --model gaussian");
  if (spec.detector != DetectorKind::NMF && model.kind != ModelKind::Subspace)
    throw UsageError("the " + std::string(to_string(spec.detector)) + " detector needs --model subspace");
  return spec;
}

struct FitOptions {
  std::string cube;
  std::string out;
  std::uint64_t seed = 0;
  double outlier_fraction = 0.01;
  ModelOptions model;
};

void cmd_fit(const FitOptions& o, Manifest& m) {
  const ModelSpec spec = model_spec(o.model, o.seed);
  if (!(o.outlier_fraction >= 0.0 && o.outlier_fraction < 1.0)) throw UsageError("--outlier-frac must lie in [0, 1)");
  const fs::path dir = o.out;
  prepare_dir(dir);
  m.config = model_json(spec);
  m.config["outlier_fraction"] = o.outlier_fraction;
  m.inputs.push_back(o.cube);
  Timer timer(m.timings);
  const HyperCube cube = timer.stage("read", [&] { return read_cube(o.cube); });
  const BackgroundModel model = timer.stage("fit", [&] {
    const OutlierSplit split = remove_outliers(cube, o.outlier_fraction);
    Eigen::MatrixXd kept(static_cast<Eigen::Index>(cube.bands()), static_cast<Eigen::Index>(split.kept.size()));
    for (std::size_t k = 0; k < split.kept.size(); ++k) kept.col(static_cast<Eigen::Index>(k)) = cube.spectrum(split.kept[k]);
    return fit_background(kept, spec);
  });
  std::ofstream out(dir / "model.json", std::ios::trunc);
  out << std::setprecision(17) << to_json(model).dump(1) << '\n';
  if (!out) throw std::runtime_error("cannot write model.json");
  m.outputs.push_back((dir / "model.json").string());
}

struct EnhanceOptions {
  double tau1 = 0.2;
  double tau2 = 0.15;
  double tau3 = 0.15;
  int resample_rounds = 0;
  int plsr_components = 0;
  double outlier_fraction = 0.01;
};

EnhanceConfig enhance_config(const EnhanceOptions& o) {
  EnhanceConfig c;
  c.tau1 = o.tau1;
  c.tau2 = o.tau2;
  c.tau3 = o.tau3;
  c.resample_rounds = o.resample_rounds;
  c.plsr_components = o.plsr_components;
  c.outlier_fraction = o.outlier_fraction;
  as_usage([&] {
    c.validate();
    return 0;
  });
  return c;
}

json enhance_json(const EnhanceConfig& c) {
  return {{"tau1", c.tau1},
          {"tau2", c.tau2},
          {"tau3", c.tau3},
          {"resample_rounds", c.resample_rounds},
          {"plsr_components", c.plsr_components},
          {"outlier_fraction", c.outlier_fraction}};
}

struct DetectOptions {
  std::vector<std::string> cubes;
  std::string signatures;
  std::string out;
  std::uint64_t seed = 0;
  std::string detector = "nmf";
  std::string sign = "+";
  int scenario = 1;
  std::size_t clean_frames = 2;
  std::vector<std::size_t> train_frames;
  unsigned threads = 0;
  ModelOptions model;
  EnhanceOptions enhance;
};

void cmd_detect(const DetectOptions& o, Manifest& m) {
  PipelineConfig cfg;
  cfg.detection = detection_spec(o.detector, o.sign, model_spec(o.model, o.seed));
  cfg.enhance = enhance_config(o.enhance);
  cfg.threads = o.threads;
  if (o.scenario == 1) {
    cfg.scenario = Scenario::SingleCube;
    if (o.cubes.size() != 1) throw UsageError("scenario 1 takes exactly one --cube");
  } else if (o.scenario == 2) {
    cfg.scenario = Scenario::Movie;
    if (!o.train_frames.empty()) {
      cfg.training_frames = o.train_frames;
    } else {
      if (o.clean_frames == 0) throw UsageError("--clean-frames must be at least 1");
      cfg.training_frames.clear();
      for (std::size_t f = 0; f < o.clean_frames; ++f) cfg.training_frames.push_back(f);
    }
    if ((cfg.enhance.resample_rounds > 0 || cfg.enhance.plsr_components > 0))
      throw UsageError("resampling and PLSR apply to scenario 1 only");
  } else {
    throw UsageError("--scenario must be 1 or 2");
  }
  as_usage([&] {
    cfg.validate(o.cubes.size());
    return 0;
  });

  const fs::path dir = o.out;
  prepare_dir(dir);
  m.config = model_json(cfg.detection.model);
  m.config["detector"] = std::string(to_string(cfg.detection.detector));
  m.config["sign"] = cfg.detection.sign == PlumeSign::Positive ? "+" : "-";
  m.config["scenario"] = o.scenario;
  m.config["training_frames"] = cfg.training_frames;
  m.config["enhance"] = enhance_json(cfg.enhance);
  m.config["threads"] = o.threads;
  for (const auto& c : o.cubes) m.inputs.push_back(c);
  m.inputs.push_back(o.signatures);

  Timer timer(m.timings);
  std::vector<HyperCube> frames;
  SignatureSet sigs;
  timer.stage("read", [&] {
    for (const auto& c : o.cubes) frames.push_back(read_cube(c));
    sigs = read_signatures(o.signatures);
  });
  StageTimings stages;
  const auto maps = run_pipeline(frames, sigs, cfg, nullptr, &stages);
  for (const auto& [name, secs] : stages) m.timings[name] = secs;
  timer.stage("write", [&] {
    for (std::size_t f = 0; f < maps.size(); ++f) {
      write_score_map(maps[f], dir / frame_name("scores", f));
      m.outputs.push_back((dir / frame_name("scores", f)).string());
    }
  });
}

struct EnhanceCmdOptions {
  std::string cube;
  std::string scores;
  std::string signatures;
  std::string out;
  std::uint64_t seed = 0;
  std::string detector = "nmf";
  std::string sign = "+";
  unsigned threads = 0;
  ModelOptions model;
  EnhanceOptions enhance;
};

void cmd_enhance(const EnhanceCmdOptions& o, Manifest& m) {
  const EnhanceConfig cfg = enhance_config(o.enhance);
  if (cfg.resample_rounds == 0 && cfg.plsr_components == 0)
    throw UsageError("nothing to do: give --resample-rounds and/or --plsr-components");
  DetectionSpec spec;
  if (cfg.resample_rounds > 0) {
    if (o.signatures.empty()) throw UsageError("resampling needs --signatures");
    spec = detection_spec(o.detector, o.sign, model_spec(o.model, o.seed));
  }
  const fs::path dir = o.out;
  prepare_dir(dir);
  m.config = {{"enhance", enhance_json(cfg)}, {"threads", o.threads}};
  if (cfg.resample_rounds > 0) {
    m.config["detection"] = model_json(spec.model);
    m.config["detection"]["detector"] = std::string(to_string(spec.detector));
    m.config["detection"]["sign"] = spec.sign == PlumeSign::Positive ? "+" : "-";
  }
  m.inputs = {o.cube, o.scores};
  if (!o.signatures.empty()) m.inputs.push_back(o.signatures);

  Timer timer(m.timings);
  const HyperCube cube = timer.stage("read", [&] { return read_cube(o.cube); });
  ScoreMap scores = read_score_map(o.scores);
  for (int r = 0; r < cfg.resample_rounds; ++r) {
    const SignatureSet sigs = read_signatures(o.signatures);
    scores = timer.stage("resample", [&] { return resample_enhance(cube, scores, sigs, cfg.tau1, spec, o.threads); });
  }
  if (cfg.plsr_components > 0)
    scores = timer.stage("plsr", [&] { return plsr_enhance(cube, scores, cfg.tau2, cfg.tau3, cfg.plsr_components); });
  write_score_map(scores, dir / "scores");
  m.outputs.push_back((dir / "scores").string());
}

// ---------------------------------------------------------------- anomaly

struct AnomalyOptions {
  std::vector<std::string> train;
  std::vector<std::string> test;
  std::string out;
  std::uint64_t seed = 0;
  std::size_t min_leaf = GmraBuildConfig{}.min_leaf;
  double dim_rule = GmraBuildConfig{}.dim_rule;
  std::size_t max_dim = GmraBuildConfig{}.max_dim;
  std::optional<double> eta;
  std::optional<double> loglik_cutoff;
  std::optional<double> radius;
  std::size_t mc_samples = 1000;
  double prob_cutoff = 0.01;
  unsigned threads = 0;
  bool save_model = false;
};

void cmd_anomaly(const AnomalyOptions& o, Manifest& m) {
  const int rules = static_cast<int>(o.eta.has_value()) + static_cast<int>(o.loglik_cutoff.has_value()) +
                    static_cast<int>(o.radius.has_value());
  if (rules > 1) throw UsageError("--eta, --loglik-cutoff and --radius are mutually exclusive");
  AnomalyConfig acfg;
  acfg.seed = o.seed;
  acfg.mc_samples = o.mc_samples;
  acfg.probability_cutoff = o.prob_cutoff;
  if (o.radius) {
    acfg.rule = AnomalyConfig::Rule::BallProbability;
    acfg.radius = *o.radius;
  } else if (o.loglik_cutoff) {
    acfg.rule = AnomalyConfig::Rule::LogLikelihoodCutoff;
    acfg.loglik_cutoff = *o.loglik_cutoff;
  } else {
    acfg.rule = AnomalyConfig::Rule::TrainingQuantile;
    if (o.eta) acfg.eta = *o.eta;
  }
  GmraFitConfig fcfg;
  fcfg.build.min_leaf = o.min_leaf;
  fcfg.build.dim_rule = o.dim_rule;
  fcfg.build.max_dim = o.max_dim;
  fcfg.build.seed = o.seed;
  as_usage([&] {
    acfg.validate();
    fcfg.build.validate();
    return 0;
  });

  const fs::path dir = o.out;
  prepare_dir(dir);
  m.config = {{"min_leaf", o.min_leaf}, {"dim_rule", o.dim_rule}, {"max_dim", o.max_dim},
              {"validation_fraction", fcfg.validation_fraction}, {"threads", o.threads}};
  switch (acfg.rule) {
    case AnomalyConfig::Rule::BallProbability:
      m.config["rule"] = "ball";
      m.config["radius"] = acfg.radius;
      m.config["mc_samples"] = acfg.mc_samples;
      m.config["prob_cutoff"] = acfg.probability_cutoff;
      break;
    case AnomalyConfig::Rule::LogLikelihoodCutoff:
      m.config["rule"] = "loglik";
      m.config["loglik_cutoff"] = acfg.loglik_cutoff;
      break;
    case AnomalyConfig::Rule::TrainingQuantile:
      m.config["rule"] = "quantile";
      m.config["eta"] = acfg.eta;
      break;
  }
  for (const auto& t : o.train) m.inputs.push_back(t);
  for (const auto& t : o.test) m.inputs.push_back(t);

  Timer timer(m.timings);
  std::vector<HyperCube> train;
  std::vector<HyperCube> test;
  timer.stage("read", [&] {
    for (const auto& t : o.train) train.push_back(read_cube(t));
    for (const auto& t : o.test) test.push_back(read_cube(t));
  });
  const std::size_t p = train.front().bands();
  for (const auto& c : train)
    if (c.bands() != p) throw UsageError("training frames differ in band count");
  for (const auto& c : test)
    if (c.bands() != p) throw UsageError("train/test band count mismatch");

  const GmraDensityModel model = timer.stage("fit", [&] {
    Eigen::Index total = 0;
    for (const auto& c : train) total += c.spectra().cols();
    Eigen::MatrixXd spectra(static_cast<Eigen::Index>(p), total);
    Eigen::Index offset = 0;
    for (const auto& c : train) {
      spectra.middleCols(offset, c.spectra().cols()) = c.spectra();
      offset += c.spectra().cols();
    }
    return fit_gmra_model(spectra, fcfg);
  });
  m.config["selected_scale"] = model.selected_scale();
  if (o.save_model) {
    save_gmra(model, dir / "model");
    m.outputs.push_back((dir / "model.gmra.json").string());
    m.outputs.push_back((dir / "model.gmra.bin").string());
  }
  json cutoffs = json::array();
  for (std::size_t f = 0; f < test.size(); ++f) {
    const AnomalyResult r = timer.stage("score", [&] { return detect_anomalies(test[f], model, acfg, o.threads); });
    write_score_map(r.scores, dir / frame_name("anomaly", f));
    write_mask(r.mask, dir / frame_name("anomaly", f));
    cutoffs.push_back(r.cutoff);
    m.outputs.push_back((dir / frame_name("anomaly", f)).string());
  }
  m.config["cutoffs"] = cutoffs;
}

// ---------------------------------------------------------------- roc

struct RocOptions {
  std::string scores;
  std::string mask;
  std::string out;
  bool invert = false;
};

void cmd_roc(const RocOptions& o, Manifest& m) {
  const fs::path dir = o.out;
  prepare_dir(dir);
  m.config = {{"invert", o.invert}};
  m.inputs = {o.scores, o.mask};
  Timer timer(m.timings);
  ScoreMap scores = read_score_map(o.scores);
  const PlumeMask mask = read_mask(o.mask);
  if (o.invert) {
    std::vector<double> v = scores.values();
    for (auto& x : v) x = -x;
    scores = ScoreMap(scores.rows(), scores.cols(), std::move(v));
  }
  const RocCurve curve = timer.stage("roc", [&] { return as_usage([&] { return roc(scores, mask); }); });
  std::vector<int> labels(mask.values().begin(), mask.values().end());
  const auto groups = group_summary(scores.values(), labels);
  json summary = to_json(curve);
  summary["groups"] = {{"background", to_json(groups.at(0))}, {"plume", to_json(groups.at(1))}};
  std::ofstream csv(dir / "roc.csv", std::ios::trunc);
  write_roc_csv(curve, csv);
  std::ofstream js(dir / "roc.json", std::ios::trunc);
  js << summary.dump(2) << '\n';
  if (!csv || !js) throw std::runtime_error("cannot write ROC outputs");
  m.outputs = {(dir / "roc.csv").string(), (dir / "roc.json").string()};
}

// ---------------------------------------------------------------- dispatch

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, int depth);

int rerun(const std::string& manifest_path, const std::string& new_out, std::ostream& out, std::ostream& err,
          int depth) {
  if (depth > 0) throw UsageError("a rerun manifest cannot itself be a rerun");
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot open " + manifest_path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed manifest " + manifest_path + ": " + e.what());
  }
  auto argv = doc.at("argv").get<std::vector<std::string>>();
  if (!new_out.empty()) {
    bool replaced = false;
    for (std::size_t i = 0; i + 1 < argv.size(); ++i) {
      if (argv[i] == "-o" || argv[i] == "--out") {
        argv[i + 1] = new_out;
        replaced = true;
      }
    }
    if (!replaced) throw std::runtime_error("manifest argv has no output directory to replace");
  }
  // Pin the seed so an environment override cannot change the replay.
  if (std::find(argv.begin(), argv.end(), "--seed") == argv.end() && doc.contains("seed") &&
      doc.at("subcommand") != "roc") {
    argv.push_back("--seed");
    argv.push_back(std::to_string(doc.at("seed").get<std::uint64_t>()));
  }
  return dispatch(argv, out, err, depth + 1);
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, int depth) {
  CLI::App app{"Hyperspectral plume detection toolkit", "plume"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  const std::uint64_t seed_default = default_seed();

  SynthOptions synth;
  synth.seed = seed_default;
  auto* s = app.add_subcommand("synth", "Generate a synthetic scene or movie");
  s->add_option("experiment", synth.experiment, "gauss | subspace | poisson | twoplume | movie")->required();
  s->add_option("-o,--out", synth.out, "Output directory")->required();
  s->add_option("--seed", synth.seed, "Random seed");
  s->add_option("--amplitude", synth.amplitude, "Signature peak amplitude");
  s->add_option("--frames", synth.frames, "Movie frame count");
  s->add_option("--clean-frames", synth.clean_frames, "Leading plume-free movie frames");

  const auto add_model = [](CLI::App* cmd, ModelOptions& mo) {
    cmd->add_option("--model", mo.model, "gaussian | subspace");
    cmd->add_option("-K,--components", mo.components, "Mixture components");
    cmd->add_option("-d,--dimension", mo.dimension, "Subspace dimension");
    cmd->add_option("--delta-percentile", mo.delta_percentile, "Covariance ridge percentile");
    cmd->add_option("--max-iter", mo.max_iter, "Clustering iteration cap");
  };
  const auto add_enhance = [](CLI::App* cmd, EnhanceOptions& eo) {
    cmd->add_option("--tau1", eo.tau1, "Resampling selection fraction");
    cmd->add_option("--tau2", eo.tau2, "PLSR low-score fraction");
    cmd->add_option("--tau3", eo.tau3, "PLSR high-score fraction");
    cmd->add_option("--resample-rounds", eo.resample_rounds, "Resampling rounds");
    cmd->add_option("--plsr-components", eo.plsr_components, "PLSR components (0 disables PLSR)");
    cmd->add_option("--outlier-frac", eo.outlier_fraction, "Fraction of largest-magnitude pixels dropped");
  };

  FitOptions fit;
  fit.seed = seed_default;
  auto* f = app.add_subcommand("fit", "Fit a background mixture model");
  f->add_option("--cube", fit.cube, "Input cube")->required();
  f->add_option("-o,--out", fit.out, "Output directory")->required();
  f->add_option("--seed", fit.seed, "Random seed");
  f->add_option("--outlier-frac", fit.outlier_fraction, "Fraction of largest-magnitude pixels dropped");
  add_model(f, fit.model);

  DetectOptions det;
  det.seed = seed_default;
  auto* d = app.add_subcommand("detect", "Run the detection pipeline");
  d->add_option("--cube", det.cubes, "Input cube (repeat for movie frames)")->required();
  d->add_option("--signatures", det.signatures, "Signature CSV")->required();
  d->add_option("-o,--out", det.out, "Output directory")->required();
  d->add_option("--seed", det.seed, "Random seed");
  d->add_option("--detector", det.detector, "nmf | nss | lc");
  d->add_option("--sign", det.sign, "Plume sign for lc: + or -");
  d->add_option("--scenario", det.scenario, "1 (single cube) or 2 (movie)");
  d->add_option("--clean-frames", det.clean_frames, "Scenario 2: leading training frames");
  d->add_option("--train-frames", det.train_frames, "Scenario 2: explicit 0-based training frame indices");
  d->add_option("--threads", det.threads, "Worker cap (0 = all cores)");
  add_model(d, det.model);
  add_enhance(d, det.enhance);

  EnhanceCmdOptions enh;
  enh.seed = seed_default;
  auto* e = app.add_subcommand("enhance", "Apply resampling and/or PLSR enhancement to a score map");
  e->add_option("--cube", enh.cube, "Input cube")->required();
  e->add_option("--scores", enh.scores, "Input score map")->required();
  e->add_option("--signatures", enh.signatures, "Signature CSV (resampling only)");
  e->add_option("-o,--out", enh.out, "Output directory")->required();
  e->add_option("--seed", enh.seed, "Random seed");
  e->add_option("--detector", enh.detector, "nmf | nss | lc");
  e->add_option("--sign", enh.sign, "Plume sign for lc: + or -");
  e->add_option("--threads", enh.threads, "Worker cap (0 = all cores)");
  add_model(e, enh.model);
  add_enhance(e, enh.enhance);

  AnomalyOptions ano;
  ano.seed = seed_default;
  auto* a = app.add_subcommand("anomaly", "Multiscale density anomaly detection");
  a->add_option("--train", ano.train, "Training frame (repeatable)")->required();
  a->add_option("--test", ano.test, "Test frame (repeatable)")->required();
  a->add_option("-o,--out", ano.out, "Output directory")->required();
  a->add_option("--seed", ano.seed, "Random seed");
  a->add_option("--min-leaf", ano.min_leaf, "Minimum node size");
  a->add_option("--dim-rule", ano.dim_rule, "Variance fraction kept by node planes");
  a->add_option("--max-dim", ano.max_dim, "Node dimension cap");
  a->add_option("--eta", ano.eta, "Anomaly when log-likelihood is below this training quantile");
  a->add_option("--loglik-cutoff", ano.loglik_cutoff, "Anomaly when log-likelihood is below this value");
  a->add_option("--radius", ano.radius, "Ball rule radius");
  a->add_option("--mc-samples", ano.mc_samples, "Ball rule Monte Carlo samples");
  a->add_option("--prob-cutoff", ano.prob_cutoff, "Ball rule: anomaly when ball probability is below this");
  a->add_option("--threads", ano.threads, "Worker cap (0 = all cores)");
  a->add_flag("--save-model", ano.save_model, "Also write the fitted model");

  RocOptions rocopt;
  auto* r = app.add_subcommand("roc", "ROC curve of a score map against a mask");
  r->add_option("--scores", rocopt.scores, "Score map")->required();
  r->add_option("--mask", rocopt.mask, "Ground-truth mask")->required();
  r->add_option("-o,--out", rocopt.out, "Output directory")->required();
  r->add_flag("--invert", rocopt.invert, "Negate scores (low score = plume)");

  std::string manifest_path;
  std::string rerun_out;
  auto* rr = app.add_subcommand("rerun", "Replay a run from its manifest");
  rr->add_option("manifest", manifest_path, "manifest.json of an earlier run")->required();
  rr->add_option("-o,--out", rerun_out, "Write outputs here instead of the original directory");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& ex) {
    throw UsageError(ex.what());
  }

  if (rr->parsed()) return rerun(manifest_path, rerun_out, out, err, depth);

  Manifest m;
  m.argv = args;
  fs::path dir;
  if (s->parsed()) {
    m.subcommand = "synth";
    m.seed = synth.seed;
    cmd_synth(synth, m);
    dir = synth.out;
  } else if (f->parsed()) {
    m.subcommand = "fit";
    m.seed = fit.seed;
    cmd_fit(fit, m);
    dir = fit.out;
  } else if (d->parsed()) {
    m.subcommand = "detect";
    m.seed = det.seed;
    cmd_detect(det, m);
    dir = det.out;
  } else if (e->parsed()) {
    m.subcommand = "enhance";
    m.seed = enh.seed;
    cmd_enhance(enh, m);
    dir = enh.out;
  } else if (a->parsed()) {
    m.subcommand = "anomaly";
    m.seed = ano.seed;
    cmd_anomaly(ano, m);
    dir = ano.out;
  } else {
    m.subcommand = "roc";
    cmd_roc(rocopt, m);
    dir = rocopt.out;
  }
  m.write(dir);
  out << "plume " << m.subcommand << ": wrote " << m.outputs.size() << " output(s) to " << dir.string() << '\n';
  return 0;
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(args, out, err, 0);
  } catch (const UsageError& e) {
    err << "plume: usage error: " << one_line(e.what()) << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "plume: error: " << one_line(e.what()) << '\n';
    return 1;
  }
}

}  // namespace plume::cli
