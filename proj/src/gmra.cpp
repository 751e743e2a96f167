#include "plume/gmra.hpp"

#include "plume/mixture.hpp"
#include "plume/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <deque>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace plume {

using nlohmann::json;

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Eigen::MatrixXd gather(const Eigen::MatrixXd& data, const std::vector<std::size_t>& idx) {
  Eigen::MatrixXd out(data.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = data.col(static_cast<Eigen::Index>(idx[k]));
  return out;
}

// Fills center and basis of `node` from its members.
void fit_node_plane(GmraNode& node, const Eigen::MatrixXd& points, const GmraBuildConfig& config,
                    std::size_t parent_dim) {
  const std::size_t cap = std::min<std::size_t>(config.max_dim, static_cast<std::size_t>(points.rows()));
  const PcaDecomposition pca = principal_components(points, cap);
  node.center = pca.mean;
  std::size_t d = 0;
  if (pca.total_variance > 0.0) {
    const double target = config.dim_rule * pca.total_variance * (1.0 - 1e-12);
    double captured = 0.0;
    while (d < cap && captured < target) captured += pca.variances(static_cast<Eigen::Index>(d++));
    d = std::max(d, std::min(parent_dim, cap));
  }
  node.basis = pca.basis.leftCols(static_cast<Eigen::Index>(d));
}

std::size_t nearest_child(const GmraNode& node, const std::vector<GmraNode>& nodes,
                          const Eigen::Ref<const Eigen::VectorXd>& x) {
  std::size_t best = node.children.front();
  double best_d = std::numeric_limits<double>::infinity();
  for (auto c : node.children) {
    const double d = (x - nodes[c].center).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

double safe_log_kde(const Kde1D& kde, double t) {
  const double v = log_eval_kde(kde, t);
  return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
}

}  // namespace

void GmraBuildConfig::validate() const {
  if (!(dim_rule > 0.0 && dim_rule <= 1.0)) throw std::invalid_argument("dim rule must lie in (0, 1]");
  if (max_dim == 0) throw std::invalid_argument("max dimension must be positive");
  if (min_leaf < max_dim + 2) throw std::invalid_argument("min leaf must be at least max dimension + 2");
  if (kmeans_iter < 1) throw std::invalid_argument("k-means iterations must be positive");
}

GmraTree::GmraTree(std::vector<GmraNode> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw std::invalid_argument("GMRA tree needs a root node");
  for (const auto& n : nodes_) max_scale_ = std::max(max_scale_, n.depth);
}

std::vector<std::size_t> GmraTree::scale_nodes(std::size_t j) const {
  std::vector<std::size_t> out;
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    const auto& n = nodes_[id];
    if (n.depth == j || (n.leaf() && n.depth < j)) out.push_back(id);
  }
  return out;
}

std::size_t GmraTree::route(const Eigen::Ref<const Eigen::VectorXd>& x, std::size_t j) const {
  std::size_t id = 0;
  while (nodes_[id].depth < j && !nodes_[id].leaf()) id = nearest_child(nodes_[id], nodes_, x);
  return id;
}

GmraCoefficients GmraTree::project(const Eigen::Ref<const Eigen::VectorXd>& x, std::size_t node) const {
  const GmraNode& n = nodes_[node];
  const Eigen::VectorXd centered = x - n.center;
  GmraCoefficients out;
  out.node = node;
  out.coefficients = n.basis.transpose() * centered;
  out.residual = (centered - n.basis * out.coefficients).norm();
  return out;
}

GmraCoefficients GmraTree::transform(const Eigen::Ref<const Eigen::VectorXd>& x, std::size_t j) const {
  return project(x, route(x, j));
}

GmraTree build_gmra(const Eigen::MatrixXd& training, const GmraBuildConfig& config) {
  config.validate();
  if (training.cols() == 0) throw std::invalid_argument("GMRA needs at least one training point");
  if (!training.allFinite()) throw std::invalid_argument("GMRA training data is not finite");

  std::vector<GmraNode> nodes(1);
  nodes[0].members.resize(static_cast<std::size_t>(training.cols()));
  std::iota(nodes[0].members.begin(), nodes[0].members.end(), 0);

  std::deque<std::size_t> queue{0};
  while (!queue.empty()) {
    const std::size_t id = queue.front();
    queue.pop_front();
    const Eigen::MatrixXd points = gather(training, nodes[id].members);
    const std::size_t parent = nodes[id].parent;
    fit_node_plane(nodes[id], points, config, parent == GmraNode::none ? 0 : nodes[parent].dimension());

    if (parent != GmraNode::none) {
      const Eigen::MatrixXd& phi = nodes[id].basis;
      const Eigen::MatrixXd& phi_parent = nodes[parent].basis;
      const Eigen::VectorXd shift = nodes[id].center - nodes[parent].center;
      nodes[id].translation = shift - phi * (phi.transpose() * shift);
      nodes[id].wavelet_basis = orthonormal_basis(phi - phi_parent * (phi_parent.transpose() * phi));
    } else {
      nodes[id].translation = Eigen::VectorXd::Zero(training.rows());
      nodes[id].wavelet_basis = Eigen::MatrixXd(training.rows(), 0);
    }

    const std::size_t count = nodes[id].members.size();
    if (count < 2 * config.min_leaf) continue;
    const auto labels = kmeans_labels(points, 2, mix_seed(config.seed, id), config.kmeans_iter);
    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (std::size_t k = 0; k < count; ++k) (labels[k] == 0 ? left : right).push_back(nodes[id].members[k]);
    if (left.size() < config.min_leaf || right.size() < config.min_leaf) continue;

    for (auto* part : {&left, &right}) {
      GmraNode child;
      child.depth = nodes[id].depth + 1;
      child.parent = id;
      child.members = std::move(*part);
      nodes.push_back(std::move(child));
      nodes[id].children.push_back(nodes.size() - 1);
      queue.push_back(nodes.size() - 1);
    }
  }
  return GmraTree(std::move(nodes));
}

double reconstruction_error(const GmraTree& tree, const Eigen::MatrixXd& training, std::size_t j) {
  double total = 0.0;
  std::size_t count = 0;
  for (auto id : tree.scale_nodes(j)) {
    for (auto m : tree.node(id).members) {
      const double r = tree.project(training.col(static_cast<Eigen::Index>(m)), id).residual;
      total += r * r;
      ++count;
    }
  }
  if (count == 0) throw std::invalid_argument("scale has no training members");
  return total / static_cast<double>(count);
}

GmraDensityModel::GmraDensityModel(GmraTree tree, std::size_t scale, std::vector<NodeDensity> densities,
                                   std::vector<double> validation_loglik, std::vector<double> training_scores)
    : tree_(std::move(tree)),
      scale_(scale),
      densities_(std::move(densities)),
      validation_loglik_(std::move(validation_loglik)),
      training_scores_(std::move(training_scores)) {
  if (scale_ > tree_.max_scale()) throw std::invalid_argument("selected scale is not populated");
  if (densities_.size() != tree_.nodes().size()) throw std::invalid_argument("density table does not match tree");
  scale_nodes_ = tree_.scale_nodes(scale_);
  for (auto id : scale_nodes_) {
    const auto& d = densities_[id];
    if (d.coordinates.size() != tree_.node(id).dimension() || d.residual.samples().empty())
      throw std::invalid_argument("node density missing at the selected scale");
  }
  std::sort(training_scores_.begin(), training_scores_.end());
}

double scale_log_likelihood(const Eigen::Ref<const Eigen::VectorXd>& x, const GmraTree& tree,
                            const std::vector<NodeDensity>& densities, std::size_t j) {
  const GmraCoefficients t = tree.transform(x, j);
  const NodeDensity& d = densities[t.node];
  double ll = std::log(d.weight);
  for (std::size_t i = 0; i < d.coordinates.size(); ++i)
    ll += safe_log_kde(d.coordinates[i], t.coefficients(static_cast<Eigen::Index>(i)));
  ll += safe_log_kde(d.residual, t.residual);
  if (!(ll > kLogLikelihoodFloor)) return kLogLikelihoodFloor;
  return ll;
}

GmraDensityModel fit_density(const GmraTree& tree, const Eigen::MatrixXd& training,
                             const Eigen::MatrixXd& validation) {
  if (validation.cols() == 0) throw std::invalid_argument("density fit needs validation spectra");
  if (static_cast<std::size_t>(validation.rows()) != tree.bands() ||
      static_cast<std::size_t>(training.rows()) != tree.bands())
    throw std::invalid_argument("density fit: band count mismatch");
  const double total = static_cast<double>(tree.node(0).members.size());

  std::vector<double> scores(tree.max_scale() + 1, std::numeric_limits<double>::quiet_NaN());
  std::vector<NodeDensity> best;
  std::size_t best_scale = 0;
  double best_score = -std::numeric_limits<double>::infinity();

  for (std::size_t j = 0; j <= tree.max_scale(); ++j) {
    const auto ids = tree.scale_nodes(j);
    bool usable = true;
    for (auto id : ids) usable = usable && tree.node(id).members.size() >= 2;
    if (!usable) continue;

    std::vector<NodeDensity> densities(tree.nodes().size());
    for (auto id : ids) {
      const GmraNode& node = tree.node(id);
      const std::size_t d = node.dimension();
      std::vector<std::vector<double>> coords(d, std::vector<double>(node.members.size()));
      std::vector<double> residuals(node.members.size());
      for (std::size_t k = 0; k < node.members.size(); ++k) {
        const GmraCoefficients t = tree.project(training.col(static_cast<Eigen::Index>(node.members[k])), id);
        for (std::size_t i = 0; i < d; ++i) coords[i][k] = t.coefficients(static_cast<Eigen::Index>(i));
        residuals[k] = t.residual;
      }
      NodeDensity& nd = densities[id];
      nd.weight = static_cast<double>(node.members.size()) / total;
      for (auto& c : coords) nd.coordinates.push_back(fit_kde(c));
      nd.residual = fit_kde(residuals);
    }

    double sum = 0.0;
    for (Eigen::Index v = 0; v < validation.cols(); ++v) sum += scale_log_likelihood(validation.col(v), tree, densities, j);
    scores[j] = sum / static_cast<double>(validation.cols());
    if (scores[j] > best_score) {
      best_score = scores[j];
      best_scale = j;
      best = std::move(densities);
    }
  }
  if (best.empty()) throw std::runtime_error("no scale has at least two training points per node");

  std::vector<double> training_scores;
  training_scores.reserve(tree.node(0).members.size());
  for (auto m : tree.node(0).members)
    training_scores.push_back(scale_log_likelihood(training.col(static_cast<Eigen::Index>(m)), tree, best, best_scale));
  return GmraDensityModel(tree, best_scale, std::move(best), std::move(scores), std::move(training_scores));
}

GmraDensityModel fit_gmra_model(const Eigen::MatrixXd& spectra, const GmraFitConfig& config) {
  if (!(config.validation_fraction > 0.0 && config.validation_fraction < 1.0))
    throw std::invalid_argument("validation fraction must lie in (0, 1)");
  const auto n = static_cast<std::size_t>(spectra.cols());
  if (n < 2) throw std::invalid_argument("GMRA model fit needs at least two spectra");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(mix_seed(config.build.seed, 0xDA7A));
  std::shuffle(order.begin(), order.end(), rng);
  const auto held = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(config.validation_fraction * static_cast<double>(n) - 1e-9)), 1, n - 1);
  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(held));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(held), order.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
  const Eigen::MatrixXd training = gather(spectra, train);
  const GmraTree tree = build_gmra(training, config.build);
  return fit_density(tree, training, gather(spectra, val));
}

double log_likelihood(const Eigen::Ref<const Eigen::VectorXd>& x, const GmraDensityModel& model) {
  if (static_cast<std::size_t>(x.size()) != model.tree().bands())
    throw std::invalid_argument("spectrum length does not match the model");
  return scale_log_likelihood(x, model.tree(), model.densities(), model.selected_scale());
}

GmraSampler::GmraSampler(const GmraDensityModel& model, std::size_t samples, std::uint64_t seed) {
  if (samples == 0) throw std::invalid_argument("ball probability needs at least one Monte Carlo sample");
  const GmraTree& tree = model.tree();
  const auto p = static_cast<Eigen::Index>(tree.bands());
  const auto& ids = model.scale_nodes();
  std::vector<double> weights;
  for (auto id : ids) weights.push_back(model.density(id).weight);

  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> pick_node(weights.begin(), weights.end());
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto kernel_draw = [&](const Kde1D& kde) {
    std::uniform_int_distribution<std::size_t> pick(0, kde.samples().size() - 1);
    const double centre = kde.samples()[pick(rng)];
    return centre + kde.bandwidth() * gauss(rng);
  };

  samples_.resize(p, static_cast<Eigen::Index>(samples));
  for (std::size_t s = 0; s < samples; ++s) {
    const std::size_t id = ids[pick_node(rng)];
    const GmraNode& node = tree.node(id);
    const NodeDensity& density = model.density(id);
    Eigen::VectorXd coef(static_cast<Eigen::Index>(node.dimension()));
    for (Eigen::Index i = 0; i < coef.size(); ++i) coef(i) = kernel_draw(density.coordinates[static_cast<std::size_t>(i)]);
    const double radius = std::abs(kernel_draw(density.residual));
    Eigen::VectorXd direction(p);
    for (Eigen::Index i = 0; i < p; ++i) direction(i) = gauss(rng);
    direction -= node.basis * (node.basis.transpose() * direction);
    const double len = direction.norm();
    Eigen::VectorXd point = node.center + node.basis * coef;
    if (len > 0.0) point += (radius / len) * direction;
    samples_.col(static_cast<Eigen::Index>(s)) = point;
  }
}

double GmraSampler::ball_probability(const Eigen::Ref<const Eigen::VectorXd>& x, double radius) const {
  if (radius <= 0.0) return 0.0;
  const double r2 = radius * radius;
  const Eigen::VectorXd dist2 = (samples_.colwise() - x).colwise().squaredNorm().transpose();
  const auto inside = (dist2.array() < r2).count();
  return static_cast<double>(inside) / static_cast<double>(samples_.cols());
}

double ball_probability(const Eigen::Ref<const Eigen::VectorXd>& x, double radius, const GmraDensityModel& model,
                        std::size_t samples, std::uint64_t seed) {
  return GmraSampler(model, samples, seed).ball_probability(x, radius);
}

void AnomalyConfig::validate() const {
  switch (rule) {
    case Rule::LogLikelihoodCutoff:
      if (!std::isfinite(loglik_cutoff)) throw std::invalid_argument("log-likelihood cutoff must be finite");
      break;
    case Rule::TrainingQuantile:
      if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("eta must lie in (0, 1)");
      break;
    case Rule::BallProbability:
      if (!(radius > 0.0)) throw std::invalid_argument("ball radius must be positive");
      if (mc_samples == 0) throw std::invalid_argument("Monte Carlo sample count must be positive");
      if (!(probability_cutoff > 0.0 && probability_cutoff <= 1.0))
        throw std::invalid_argument("probability cutoff must lie in (0, 1]");
      break;
  }
}

AnomalyResult detect_anomalies(const HyperCube& frame, const GmraDensityModel& model, const AnomalyConfig& config,
                               unsigned threads) {
  config.validate();
  if (frame.bands() != model.tree().bands()) throw std::invalid_argument("frame band count does not match the model");
  std::vector<double> scores(frame.pixels());
  AnomalyResult out;
  if (config.rule == AnomalyConfig::Rule::BallProbability) {
    const GmraSampler sampler(model, config.mc_samples, config.seed);
    parallel_for(scores.size(), threads,
                 [&](std::size_t i) { scores[i] = sampler.ball_probability(frame.spectrum(i), config.radius); });
    out.cutoff = config.probability_cutoff;
  } else {
    parallel_for(scores.size(), threads, [&](std::size_t i) { scores[i] = log_likelihood(frame.spectrum(i), model); });
    out.cutoff = config.rule == AnomalyConfig::Rule::LogLikelihoodCutoff
                     ? config.loglik_cutoff
                     : quantile_sorted(model.training_scores(), config.eta);
  }
  std::vector<std::uint8_t> mask(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) mask[i] = scores[i] < out.cutoff ? 1 : 0;
  out.scores = ScoreMap(frame.rows(), frame.cols(), std::move(scores));
  out.mask = PlumeMask(frame.rows(), frame.cols(), std::move(mask));
  return out;
}

namespace {

class PayloadWriter {
 public:
  void put(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    for (int b = 0; b < 8; ++b) bytes_.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
  }
  void put(const Eigen::MatrixXd& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) put(m(i, j));
  }
  void put(const std::vector<double>& v) {
    for (double x : v) put(x);
  }
  const std::string& bytes() const { return bytes_; }

 private:
  std::string bytes_;
};

class PayloadReader {
 public:
  explicit PayloadReader(std::string bytes) : bytes_(std::move(bytes)) {}
  double get() {
    if (pos_ + 8 > bytes_.size()) throw std::runtime_error("GMRA payload is truncated");
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b)
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(b)])) << (8 * b);
    pos_ += 8;
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }
  Eigen::MatrixXd matrix(Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = get();
    return m;
  }
  std::vector<double> vector(std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = get();
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string bytes_;
  std::size_t pos_ = 0;
};

std::filesystem::path with_suffix(const std::filesystem::path& base, const char* suffix) {
  return std::filesystem::path(base.string() + suffix);
}

}  // namespace

void save_gmra(const GmraDensityModel& model, const std::filesystem::path& base) {
  const GmraTree& tree = model.tree();
  PayloadWriter payload;
  json nodes = json::array();
  for (std::size_t id = 0; id < tree.nodes().size(); ++id) {
    const GmraNode& n = tree.node(id);
    const NodeDensity& d = model.density(id);
    const bool has_density = !d.residual.samples().empty();
    json entry = {{"depth", n.depth},
                  {"parent", n.parent == GmraNode::none ? json(nullptr) : json(n.parent)},
                  {"children", n.children},
                  {"dimension", n.dimension()},
                  {"wavelet_dimension", n.wavelet_basis.cols()},
                  {"members", n.members.size()},
                  {"density", has_density}};
    payload.put(n.center);
    payload.put(n.basis);
    payload.put(n.translation);
    payload.put(n.wavelet_basis);
    if (has_density) {
      entry["weight"] = d.weight;
      json counts = json::array();
      for (const auto& k : d.coordinates) counts.push_back(k.samples().size());
      counts.push_back(d.residual.samples().size());
      entry["kde_samples"] = counts;
      for (const auto& k : d.coordinates) {
        payload.put(k.bandwidth());
        payload.put(k.samples());
      }
      payload.put(d.residual.bandwidth());
      payload.put(d.residual.samples());
    }
    nodes.push_back(std::move(entry));
  }
  payload.put(model.training_scores());
  json validation = json::array();
  for (double v : model.validation_loglik()) validation.push_back(std::isnan(v) ? json(nullptr) : json(v));

  const json manifest = {{"format", "plume-gmra"},
                         {"version", 1},
                         {"bands", tree.bands()},
                         {"selected_scale", model.selected_scale()},
                         {"validation_loglik", validation},
                         {"training_scores", model.training_scores().size()},
                         {"payload", with_suffix(base, ".gmra.bin").filename().string()},
                         {"nodes", nodes}};
  std::ofstream bin(with_suffix(base, ".gmra.bin"), std::ios::binary);
  bin.write(payload.bytes().data(), static_cast<std::streamsize>(payload.bytes().size()));
  std::ofstream hdr(with_suffix(base, ".gmra.json"));
  hdr << manifest.dump(2) << '\n';
  if (!bin || !hdr) throw std::runtime_error("failed to write GMRA model to " + base.string());
}

GmraDensityModel load_gmra(const std::filesystem::path& base) {
  std::ifstream hdr(with_suffix(base, ".gmra.json"));
  if (!hdr) throw std::runtime_error("cannot open " + with_suffix(base, ".gmra.json").string());
  json manifest;
  try {
    hdr >> manifest;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("malformed GMRA manifest: ") + e.what());
  }
  if (manifest.value("format", "") != "plume-gmra") throw std::runtime_error("not a GMRA model manifest");
  std::ifstream bin(with_suffix(base, ".gmra.bin"), std::ios::binary);
  if (!bin) throw std::runtime_error("cannot open " + with_suffix(base, ".gmra.bin").string());
  PayloadReader payload(std::string(std::istreambuf_iterator<char>(bin), {}));

  const auto p = manifest.at("bands").get<Eigen::Index>();
  std::vector<GmraNode> nodes;
  std::vector<NodeDensity> densities;
  for (const auto& entry : manifest.at("nodes")) {
    GmraNode n;
    n.depth = entry.at("depth").get<std::size_t>();
    n.parent = entry.at("parent").is_null() ? GmraNode::none : entry.at("parent").get<std::size_t>();
    n.children = entry.at("children").get<std::vector<std::size_t>>();
    const auto d = entry.at("dimension").get<Eigen::Index>();
    const auto dw = entry.at("wavelet_dimension").get<Eigen::Index>();
    n.center = payload.matrix(p, 1);
    n.basis = payload.matrix(p, d);
    n.translation = payload.matrix(p, 1);
    n.wavelet_basis = payload.matrix(p, dw);
    NodeDensity density;
    if (entry.at("density").get<bool>()) {
      density.weight = entry.at("weight").get<double>();
      const auto counts = entry.at("kde_samples").get<std::vector<std::size_t>>();
      for (std::size_t i = 0; i < counts.size(); ++i) {
        const double h = payload.get();
        Kde1D kde(payload.vector(counts[i]), h);
        if (i + 1 < counts.size()) {
          density.coordinates.push_back(std::move(kde));
        } else {
          density.residual = std::move(kde);
        }
      }
    }
    nodes.push_back(std::move(n));
    densities.push_back(std::move(density));
  }
  std::vector<double> training_scores = payload.vector(manifest.at("training_scores").get<std::size_t>());
  if (!payload.done()) throw std::runtime_error("GMRA payload has trailing bytes");
  std::vector<double> validation;
  for (const auto& v : manifest.at("validation_loglik"))
    validation.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
  return GmraDensityModel(GmraTree(std::move(nodes)), manifest.at("selected_scale").get<std::size_t>(),
                          std::move(densities), std::move(validation), std::move(training_scores));
}

}  // namespace plume
