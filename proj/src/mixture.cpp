#include "plume/mixture.hpp"

#include "plume/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace plume {

using nlohmann::json;

namespace {

Eigen::MatrixXd gather(const Eigen::MatrixXd& spectra, const std::vector<std::size_t>& labels, std::size_t label) {
  std::vector<Eigen::Index> idx;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) idx.push_back(static_cast<Eigen::Index>(i));
  Eigen::MatrixXd out(spectra.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = spectra.col(idx[k]);
  return out;
}

Eigen::MatrixXd kmeanspp_seeds(const Eigen::MatrixXd& points, std::size_t clusters, std::mt19937_64& rng) {
  const Eigen::Index n = points.cols();
  const auto k = static_cast<Eigen::Index>(clusters);
  Eigen::MatrixXd centers(points.rows(), k);
  std::vector<bool> chosen(static_cast<std::size_t>(n), false);

  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  Eigen::Index pick = first(rng);
  centers.col(0) = points.col(pick);
  chosen[static_cast<std::size_t>(pick)] = true;

  Eigen::VectorXd dist2 = (points.colwise() - centers.col(0)).colwise().squaredNorm().transpose();
  for (Eigen::Index c = 1; c < k; ++c) {
    const double total = dist2.sum();
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      const double target = u(rng);
      double acc = 0.0;
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += dist2(i);
        if (acc > target && dist2(i) > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      // All remaining mass is zero: take the first unused index.
      pick = 0;
      while (pick < n - 1 && chosen[static_cast<std::size_t>(pick)]) ++pick;
    }
    chosen[static_cast<std::size_t>(pick)] = true;
    centers.col(c) = points.col(pick);
    dist2 = dist2.cwiseMin((points.colwise() - centers.col(c)).colwise().squaredNorm().transpose());
  }
  return centers;
}

// Nearest center per point (ties to the lowest index); also returns the
// squared distance to the chosen center.
std::vector<std::size_t> nearest(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centers,
                                 Eigen::VectorXd& dist2) {
  const Eigen::Index n = points.cols();
  std::vector<std::size_t> labels(static_cast<std::size_t>(n));
  dist2.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (Eigen::Index c = 0; c < centers.cols(); ++c) {
      const double d = (points.col(i) - centers.col(c)).squaredNorm();
      if (d < best) {
        best = d;
        arg = static_cast<std::size_t>(c);
      }
    }
    labels[static_cast<std::size_t>(i)] = arg;
    dist2(i) = best;
  }
  return labels;
}

void check_fit_inputs(const Eigen::MatrixXd& spectra, std::size_t components, std::size_t dimension) {
  if (components == 0) throw std::invalid_argument("mixture needs K >= 1");
  if (static_cast<std::size_t>(spectra.cols()) < components)
    throw std::invalid_argument("mixture fit: K exceeds the number of spectra");
  if (static_cast<std::size_t>(spectra.cols()) < components * (dimension + 2))
    throw std::invalid_argument("mixture fit needs at least K*(d+2) spectra");
  if (!spectra.allFinite()) throw std::invalid_argument("mixture fit: non-finite spectra");
}

std::vector<double> fractions(const std::vector<std::size_t>& labels, std::size_t components) {
  std::vector<double> counts(components, 0.0);
  for (auto l : labels) counts[l] += 1.0;
  for (auto& c : counts) c /= static_cast<double>(labels.size());
  return counts;
}

}  // namespace

GaussianMixture::GaussianMixture(std::vector<GaussianComponent> components) : components_(std::move(components)) {
  if (components_.empty()) throw std::invalid_argument("Gaussian mixture needs at least one component");
  double total = 0.0;
  for (const auto& c : components_) {
    if (!(c.weight > 0.0 && c.weight <= 1.0)) throw std::invalid_argument("component weight outside (0, 1]");
    if (c.model.bands() != components_.front().model.bands())
      throw std::invalid_argument("mixture components disagree on band count");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("mixture weights do not sum to 1");
}

SubspaceMixture::SubspaceMixture(std::vector<SubspaceComponent> components) : components_(std::move(components)) {
  if (components_.empty()) throw std::invalid_argument("subspace mixture needs at least one component");
  double total = 0.0;
  for (const auto& c : components_) {
    if (!(c.weight > 0.0 && c.weight <= 1.0)) throw std::invalid_argument("component weight outside (0, 1]");
    if (c.model.bands() != components_.front().model.bands() ||
        c.model.dimension() != components_.front().model.dimension())
      throw std::invalid_argument("subspace components must share band count and dimension");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("mixture weights do not sum to 1");
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "gaussian") return ModelKind::Gaussian;
  if (name == "subspace") return ModelKind::Subspace;
  throw std::invalid_argument("unknown model kind '" + std::string(name) + "'");
}

std::string_view to_string(ModelKind kind) { return kind == ModelKind::Gaussian ? "gaussian" : "subspace"; }

std::vector<std::size_t> kmeans_labels(const Eigen::MatrixXd& points, std::size_t clusters, std::uint64_t seed,
                                       int max_iter) {
  if (clusters == 0 || static_cast<std::size_t>(points.cols()) < clusters)
    throw std::invalid_argument("kmeans: K must lie in [1, count]");
  std::mt19937_64 rng(seed);
  Eigen::MatrixXd centers = kmeanspp_seeds(points, clusters, rng);
  Eigen::VectorXd dist2;
  std::vector<std::size_t> labels = nearest(points, centers, dist2);

  for (int iter = 0; iter < max_iter; ++iter) {
    std::vector<std::size_t> counts(clusters, 0);
    centers.setZero();
    for (std::size_t i = 0; i < labels.size(); ++i) {
      centers.col(static_cast<Eigen::Index>(labels[i])) += points.col(static_cast<Eigen::Index>(i));
      ++counts[labels[i]];
    }
    for (std::size_t c = 0; c < clusters; ++c)
      if (counts[c] > 0) centers.col(static_cast<Eigen::Index>(c)) /= static_cast<double>(counts[c]);
    for (std::size_t c = 0; c < clusters; ++c) {
      if (counts[c] > 0) continue;
      // Re-seed at the point farthest from its assigned center.
      Eigen::Index far = -1;
      double best = -1.0;
      for (Eigen::Index i = 0; i < points.cols(); ++i) {
        if (counts[labels[static_cast<std::size_t>(i)]] < 2) continue;
        const double d = (points.col(i) - centers.col(static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)])))
                             .squaredNorm();
        if (d > best) {
          best = d;
          far = i;
        }
      }
      if (far < 0) break;
      --counts[labels[static_cast<std::size_t>(far)]];
      labels[static_cast<std::size_t>(far)] = c;
      counts[c] = 1;
      centers.col(static_cast<Eigen::Index>(c)) = points.col(far);
    }
    std::vector<std::size_t> next = nearest(points, centers, dist2);
    if (next == labels) break;
    labels = std::move(next);
  }
  return labels;
}

GaussianMixture fit_gaussian_mixture(const Eigen::MatrixXd& spectra, std::size_t components, std::uint64_t seed,
                                     int max_iter, double delta_percentile) {
  check_fit_inputs(spectra, components, 0);
  const auto labels = kmeans_labels(spectra, components, seed, max_iter);
  const auto weights = fractions(labels, components);
  std::vector<GaussianComponent> out;
  for (std::size_t j = 0; j < components; ++j) {
    const Eigen::MatrixXd members = gather(spectra, labels, j);
    if (members.cols() < 2)
      throw std::runtime_error("Gaussian mixture component " + std::to_string(j) + " has fewer than 2 members");
    out.push_back({weights[j], fit_cov(members, delta_percentile)});
  }
  return GaussianMixture(std::move(out));
}

SubspaceMixture fit_subspace_mixture(const Eigen::MatrixXd& spectra, std::size_t components, std::size_t dimension,
                                     std::uint64_t seed, int max_iter, SubspaceFitTrace* trace) {
  check_fit_inputs(spectra, components, dimension);
  if (dimension > static_cast<std::size_t>(spectra.rows()))
    throw std::invalid_argument("subspace dimension exceeds band count");
  const Eigen::Index n = spectra.cols();

  std::mt19937_64 rng(seed);
  const Eigen::MatrixXd seeds = kmeanspp_seeds(spectra, components, rng);
  Eigen::VectorXd dist2;
  std::vector<std::size_t> labels = nearest(spectra, seeds, dist2);

  std::vector<SubspaceModel> models(components);
  Eigen::VectorXd residual(n);
  SubspaceFitTrace local;
  int iter = 0;
  for (;;) {
    for (std::size_t j = 0; j < components; ++j) models[j] = fit_pca_completed(gather(spectra, labels, j), dimension);
    double objective = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      residual(i) = models[labels[static_cast<std::size_t>(i)]].residual_sq(spectra.col(i));
      objective += residual(i);
    }
    local.objective.push_back(objective);
    if (iter >= max_iter) break;
    ++iter;

    std::vector<std::size_t> next(labels.size());
    std::vector<std::size_t> counts(components, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (std::size_t j = 0; j < components; ++j) {
        const double r = models[j].residual_sq(spectra.col(i));
        if (r < best) {
          best = r;
          arg = j;
        }
      }
      next[static_cast<std::size_t>(i)] = arg;
      residual(i) = best;
      ++counts[arg];
    }
    for (std::size_t j = 0; j < components; ++j) {
      if (counts[j] > 0) continue;
      // Move the worst-fit point into the empty component, where it fits exactly.
      Eigen::Index worst = -1;
      double best = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (counts[next[static_cast<std::size_t>(i)]] < 2) continue;
        if (residual(i) > best) {
          best = residual(i);
          worst = i;
        }
      }
      if (worst < 0) break;
      --counts[next[static_cast<std::size_t>(worst)]];
      next[static_cast<std::size_t>(worst)] = j;
      residual(worst) = 0.0;
      counts[j] = 1;
    }
    if (next == labels) break;
    labels = std::move(next);
  }
  local.iterations = iter;

  const auto weights = fractions(labels, components);
  std::vector<SubspaceComponent> out;
  for (std::size_t j = 0; j < components; ++j) out.push_back({weights[j], std::move(models[j])});
  if (trace) *trace = std::move(local);
  return SubspaceMixture(std::move(out));
}

std::size_t assign(const Eigen::Ref<const Eigen::VectorXd>& x, const GaussianMixture& model) {
  double best = -std::numeric_limits<double>::infinity();
  std::size_t arg = 0;
  for (std::size_t j = 0; j < model.size(); ++j) {
    const auto& c = model[j];
    const Eigen::VectorXd centered = x - c.model.mean();
    const double ll = std::log(c.weight) - 0.5 * centered.dot(c.model.precision() * centered) - 0.5 * c.model.log_det();
    if (ll > best) {
      best = ll;
      arg = j;
    }
  }
  return arg;
}

std::size_t assign(const Eigen::Ref<const Eigen::VectorXd>& x, const SubspaceMixture& model) {
  double best = std::numeric_limits<double>::infinity();
  std::size_t arg = 0;
  for (std::size_t j = 0; j < model.size(); ++j) {
    const double r = model[j].model.residual_sq(x);
    if (r < best) {
      best = r;
      arg = j;
    }
  }
  return arg;
}

std::size_t assign(const Eigen::Ref<const Eigen::VectorXd>& x, const BackgroundModel& model) {
  return std::visit([&](const auto& m) { return assign(x, m); }, model);
}

MixtureScorer::MixtureScorer(const BackgroundModel& model, const SignatureSet& signatures, DetectorKind kind,
                             PlumeSign sign)
    : model_(model), kind_(kind), sign_(sign) {
  if (kind == DetectorKind::NMF) {
    const auto* g = std::get_if<GaussianMixture>(&model_);
    if (!g) throw std::invalid_argument("the NMF detector needs a Gaussian mixture background");
    for (const auto& c : g->components()) nmf_.emplace_back(c.model, signatures);
  } else {
    const auto* s = std::get_if<SubspaceMixture>(&model_);
    if (!s) throw std::invalid_argument("the NSS and LC detectors need a subspace mixture background");
    for (const auto& c : s->components()) projection_.emplace_back(c.model, signatures);
  }
}

std::size_t MixtureScorer::assign(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return plume::assign(x, model_);
}

double MixtureScorer::score(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const std::size_t j = assign(x);
  switch (kind_) {
    case DetectorKind::NMF: return nmf_[j](x);
    case DetectorKind::NSS: return projection_[j].nss(x);
    case DetectorKind::LC: return projection_[j].lc(x, sign_);
  }
  return 0.0;
}

double mix_score(const Eigen::Ref<const Eigen::VectorXd>& x, const BackgroundModel& model,
                 const SignatureSet& signatures, DetectorKind kind, PlumeSign sign) {
  return MixtureScorer(model, signatures, kind, sign).score(x);
}

std::size_t minimum_fit_size(const ModelSpec& spec) {
  const std::size_t d = spec.kind == ModelKind::Gaussian ? 0 : spec.dimension;
  return spec.components * (d + 2);
}

BackgroundModel fit_background(const Eigen::MatrixXd& spectra, const ModelSpec& spec) {
  if (spec.kind == ModelKind::Gaussian)
    return fit_gaussian_mixture(spectra, spec.components, spec.seed, spec.max_iter, spec.delta_percentile);
  return fit_subspace_mixture(spectra, spec.components, spec.dimension, spec.seed, spec.max_iter);
}

std::vector<double> score_spectra(const Eigen::MatrixXd& spectra, const MixtureScorer& scorer, unsigned threads) {
  std::vector<double> out(static_cast<std::size_t>(spectra.cols()));
  parallel_for(out.size(), threads,
               [&](std::size_t i) { out[i] = scorer.score(spectra.col(static_cast<Eigen::Index>(i))); });
  return out;
}

namespace {

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw std::runtime_error("model JSON: matrix has the wrong row count");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw std::runtime_error("model JSON: matrix has the wrong column count");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

Eigen::VectorXd vector_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

json to_json(const BackgroundModel& model) {
  json out;
  if (const auto* g = std::get_if<GaussianMixture>(&model)) {
    out["kind"] = "gaussian";
    out["components"] = json::array();
    for (const auto& c : g->components()) {
      out["components"].push_back({{"weight", c.weight},
                                   {"mean", to_vec(c.model.mean())},
                                   {"eigenvalues", to_vec(c.model.eigenvalues())},
                                   {"eigenvectors", matrix_json(c.model.eigenvectors())},
                                   {"ridge", c.model.ridge()}});
    }
  } else {
    const auto& s = std::get<SubspaceMixture>(model);
    out["kind"] = "subspace";
    out["dimension"] = s.dimension();
    out["components"] = json::array();
    for (const auto& c : s.components()) {
      out["components"].push_back(
          {{"weight", c.weight}, {"mean", to_vec(c.model.mean())}, {"basis", matrix_json(c.model.basis())}});
    }
  }
  return out;
}

BackgroundModel background_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "gaussian") {
    std::vector<GaussianComponent> comps;
    for (const auto& c : j.at("components")) {
      Eigen::VectorXd mean = vector_from_json(c.at("mean"));
      const Eigen::Index p = mean.size();
      comps.push_back({c.at("weight").get<double>(),
                       CovModel::from_eigensystem(std::move(mean), vector_from_json(c.at("eigenvalues")),
                                                  matrix_from_json(c.at("eigenvectors"), p, p),
                                                  c.at("ridge").get<double>())});
    }
    return GaussianMixture(std::move(comps));
  }
  if (kind == "subspace") {
    const auto d = j.at("dimension").get<Eigen::Index>();
    std::vector<SubspaceComponent> comps;
    for (const auto& c : j.at("components")) {
      Eigen::VectorXd mean = vector_from_json(c.at("mean"));
      const Eigen::Index p = mean.size();
      comps.push_back({c.at("weight").get<double>(), SubspaceModel(std::move(mean), matrix_from_json(c.at("basis"), p, d))});
    }
    return SubspaceMixture(std::move(comps));
  }
  throw std::runtime_error("model JSON: unknown kind '" + kind + "'");
}

}  // namespace plume
