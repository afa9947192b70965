#include "netexp/auxiliary.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "netexp/error.hpp"
#include "netexp/estimators.hpp"
#include "netexp/parallel.hpp"
#include "netexp/rng.hpp"
#include "netexp/stats.hpp"

namespace netexp {

AuxiliarySpec AuxiliarySpec::raw_covariates() {
  AuxiliarySpec s;
  s.kind_ = Kind::raw_covariates;
  return s;
}

AuxiliarySpec AuxiliarySpec::exposure_interacted(ExposureSpec exposure) {
  AuxiliarySpec s;
  s.kind_ = Kind::exposure_interacted;
  s.exposure_ = std::move(exposure);
  return s;
}

AuxiliarySpec AuxiliarySpec::linear_in_means_set() {
  AuxiliarySpec s;
  s.kind_ = Kind::linear_in_means_set;
  return s;
}

AuxiliarySpec AuxiliarySpec::interacted_linear_in_means_set(
    ExposureSpec exposure) {
  AuxiliarySpec s;
  s.kind_ = Kind::interacted_linear_in_means_set;
  s.exposure_ = std::move(exposure);
  return s;
}

AuxiliarySpec AuxiliarySpec::custom(CustomEval eval, Eigen::Index dim,
                                    int locality) {
  if (!eval) throw_validation("custom auxiliary: evaluator is empty");
  if (dim < 1) throw_validation("custom auxiliary: dimension must be >= 1");
  AuxiliarySpec s;
  s.kind_ = Kind::custom;
  s.custom_ = std::move(eval);
  s.custom_dim_ = dim;
  s.custom_locality_ = locality;
  return s;
}

Eigen::Index AuxiliarySpec::output_dim(Eigen::Index covariate_dim) const {
  switch (kind_) {
    case Kind::raw_covariates:
      return covariate_dim;
    case Kind::exposure_interacted:
      return covariate_dim *
             static_cast<Eigen::Index>(exposure_->value_set().size());
    case Kind::linear_in_means_set:
      return 2 + 2 * covariate_dim;
    case Kind::interacted_linear_in_means_set:
      return (2 + 2 * covariate_dim) *
             static_cast<Eigen::Index>(exposure_->value_set().size());
    case Kind::custom:
      return custom_dim_;
  }
  return 0;
}

bool AuxiliarySpec::exact_capable() const {
  if (kind_ == Kind::custom) return custom_locality_ >= 0;
  if (exposure_ && !exposure_->exact_capable()) {
    // exposure evaluation itself is still fine pointwise, and the
    // dependence set falls back to the declared K-ball
    return exposure_->locality_radius() >= 0;
  }
  return true;
}

namespace {

Eigen::RowVectorXd linear_in_means_row(std::uint32_t i,
                                       const Eigen::MatrixXd& x,
                                       std::span<const std::uint8_t> d,
                                       const Graph& g) {
  const auto nb = g.neighbors(i);
  if (nb.empty()) {
    throw_validation("auxiliary: unit " + std::to_string(i) +
                     " is isolated; neighbor fractions undefined");
  }
  const Eigen::Index p = x.cols();
  Eigen::RowVectorXd row(2 + 2 * p);
  double treated = 0.0;
  Eigen::RowVectorXd xsum = Eigen::RowVectorXd::Zero(p);
  for (std::uint32_t j : nb) {
    treated += d[j];
    xsum += x.row(j);
  }
  const double inv_deg = 1.0 / static_cast<double>(nb.size());
  row[0] = d[i];
  row[1] = treated * inv_deg;
  row.segment(2, p) = x.row(i);
  row.segment(2 + p, p) = xsum * inv_deg;
  return row;
}

Eigen::RowVectorXd interact_row(const Eigen::RowVectorXd& base, int t_i,
                                const std::vector<int>& values) {
  Eigen::RowVectorXd out =
      Eigen::RowVectorXd::Zero(base.size() * values.size());
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (values[k] == t_i) {
      out.segment(base.size() * k, base.size()) = base;
      break;
    }
  }
  return out;
}

}  // namespace

Eigen::RowVectorXd AuxiliarySpec::eval_unit(std::uint32_t i,
                                            const Eigen::MatrixXd& x,
                                            std::span<const std::uint8_t> d,
                                            const Graph& g) const {
  switch (kind_) {
    case Kind::raw_covariates:
      return x.row(i);
    case Kind::exposure_interacted: {
      const int t_i = exposure_->eval_unit(i, d, g);
      return interact_row(x.row(i), t_i, exposure_->value_set());
    }
    case Kind::linear_in_means_set:
      return linear_in_means_row(i, x, d, g);
    case Kind::interacted_linear_in_means_set: {
      const int t_i = exposure_->eval_unit(i, d, g);
      return interact_row(linear_in_means_row(i, x, d, g), t_i,
                          exposure_->value_set());
    }
    case Kind::custom:
      return custom_(i, x, d, g);
  }
  return {};
}

Eigen::MatrixXd AuxiliarySpec::eval(const Eigen::MatrixXd& x,
                                    std::span<const std::uint8_t> d,
                                    const Graph& g) const {
  const std::size_t n = g.size();
  if (d.size() != n ||
      (x.size() > 0 && static_cast<std::size_t>(x.rows()) != n)) {
    throw_validation("auxiliary eval: input lengths do not match graph");
  }
  Eigen::MatrixXd out(n, output_dim(x.cols()));
  for (std::uint32_t i = 0; i < n; ++i) {
    out.row(i) = eval_unit(i, x, d, g);
  }
  return out;
}

std::vector<std::uint32_t> AuxiliarySpec::dependence_set(
    std::uint32_t i, const Graph& g) const {
  std::vector<std::uint32_t> dep;
  auto add = [&dep](std::span<const std::uint32_t> more) {
    dep.insert(dep.end(), more.begin(), more.end());
  };
  switch (kind_) {
    case Kind::raw_covariates:
      break;
    case Kind::exposure_interacted:
      add(exposure_->dependence_set(i, g));
      break;
    case Kind::linear_in_means_set:
      dep.push_back(i);
      add(g.neighbors(i));
      break;
    case Kind::interacted_linear_in_means_set:
      dep.push_back(i);
      add(g.neighbors(i));
      add(exposure_->dependence_set(i, g));
      break;
    case Kind::custom: {
      if (custom_locality_ < 0) {
        throw_validation(
            "custom auxiliary has no declared locality; exact enumeration "
            "unavailable");
      }
      const auto dist = bfs_distances(g, i, custom_locality_);
      for (std::uint32_t j = 0; j < dist.size(); ++j) {
        if (dist[j] != kUnreachable) dep.push_back(j);
      }
      break;
    }
  }
  std::sort(dep.begin(), dep.end());
  dep.erase(std::unique(dep.begin(), dep.end()), dep.end());
  return dep;
}

Eigen::MatrixXd build_auxiliary(const AuxiliarySpec& spec,
                                const Eigen::MatrixXd& x,
                                std::span<const std::uint8_t> d,
                                const Graph& g) {
  return spec.eval(x, d, g);
}

namespace {

double ht_weight_of(int t_i, Contrast c, double pi_t, double pi_tp) {
  if (t_i == c.t) return 1.0 / pi_t;
  if (t_i == c.t_prime) return -1.0 / pi_tp;
  return 0.0;
}

}  // namespace

Phi0Normalizer phi0_fit(const AuxiliarySpec& spec, const ExposureSpec& exposure,
                        const Design& design, const Graph& g,
                        const Eigen::MatrixXd& x, Contrast contrast,
                        const PropensityTable& pi, std::size_t reps,
                        std::uint64_t seed, int threads) {
  if (reps < 2) throw_validation("phi0_fit: reps must be >= 2");
  const std::size_t n = g.size();
  const Eigen::Index q = spec.output_dim(x.cols());
  const int kt = pi.value_index(contrast.t);
  const int ktp = pi.value_index(contrast.t_prime);

  struct BlockAccum {
    Eigen::MatrixXd sum_wg, sum_wg2;   // n x q
    Eigen::VectorXd sum_w2, sum_w4;    // n
    Eigen::MatrixXd sum_wg_w2;         // n x q, cross moment
    std::size_t count = 0;
  };

  constexpr std::size_t kBlock = 4096;
  const std::size_t n_blocks = (reps + kBlock - 1) / kBlock;
  std::vector<BlockAccum> blocks(n_blocks);

  parallel_blocks(reps, kBlock, threads, [&](std::size_t b, std::size_t begin,
                                             std::size_t end) {
    BlockAccum& acc = blocks[b];
    acc.sum_wg = Eigen::MatrixXd::Zero(n, q);
    acc.sum_wg2 = Eigen::MatrixXd::Zero(n, q);
    acc.sum_wg_w2 = Eigen::MatrixXd::Zero(n, q);
    acc.sum_w2 = Eigen::VectorXd::Zero(n);
    acc.sum_w4 = Eigen::VectorXd::Zero(n);
    acc.count = end - begin;
    Rng rng(derive_seed(seed, "phi0_fit", b));
    Eigen::RowVectorXd gi(q);
    for (std::size_t r = begin; r < end; ++r) {
      const auto d = sample_assignment(design, rng);
      for (std::uint32_t i = 0; i < n; ++i) {
        const int t_i = exposure.eval_unit(i, d, g);
        const double w =
            ht_weight_of(t_i, contrast, pi.matrix()(i, kt), pi.matrix()(i, ktp));
        const double w2 = w * w;
        acc.sum_w2[i] += w2;
        acc.sum_w4[i] += w2 * w2;
        if (w != 0.0) {
          gi = spec.eval_unit(i, x, d, g);
          acc.sum_wg.row(i) += w * gi;
          acc.sum_wg2.row(i) += (w * gi).cwiseProduct(w * gi);
          acc.sum_wg_w2.row(i) += (w * gi) * w2;
        }
      }
    }
  });

  // Ordered compensated reduction over blocks.
  Eigen::MatrixXd sum_wg = Eigen::MatrixXd::Zero(n, q);
  Eigen::MatrixXd sum_wg2 = Eigen::MatrixXd::Zero(n, q);
  Eigen::MatrixXd sum_wg_w2 = Eigen::MatrixXd::Zero(n, q);
  Eigen::VectorXd sum_w2 = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sum_w4 = Eigen::VectorXd::Zero(n);
  for (const auto& acc : blocks) {
    sum_wg += acc.sum_wg;
    sum_wg2 += acc.sum_wg2;
    sum_wg_w2 += acc.sum_wg_w2;
    sum_w2 += acc.sum_w2;
    sum_w4 += acc.sum_w4;
  }

  const double r = static_cast<double>(reps);
  Phi0Normalizer norm;
  norm.reps = reps;
  norm.gamma.resize(n, q);
  norm.gamma_se.resize(n, q);
  for (std::uint32_t i = 0; i < n; ++i) {
    const double mean_w2 = sum_w2[i] / r;
    if (mean_w2 < 1e-8) {
      throw_numerical("phi0_fit: E[w^2] for unit " + std::to_string(i) +
                      " is below 1e-8; overlap failure symptom");
    }
    const double var_w2 = std::max(0.0, sum_w4[i] / r - mean_w2 * mean_w2);
    for (Eigen::Index c = 0; c < q; ++c) {
      const double mean_wg = sum_wg(i, c) / r;
      const double gamma = mean_wg / mean_w2;
      norm.gamma(i, c) = gamma;
      // Delta-method SE of the ratio estimator.
      const double var_wg =
          std::max(0.0, sum_wg2(i, c) / r - mean_wg * mean_wg);
      const double cov =
          sum_wg_w2(i, c) / r - mean_wg * mean_w2;
      const double var_num =
          var_wg - 2.0 * gamma * cov + gamma * gamma * var_w2;
      norm.gamma_se(i, c) =
          std::sqrt(std::max(0.0, var_num) / r) / mean_w2;
    }
  }
  return norm;
}

Phi0Normalizer phi0_exact(const AuxiliarySpec& spec,
                          const ExposureSpec& exposure, const Design& design,
                          const Graph& g, const Eigen::MatrixXd& x,
                          Contrast contrast, const PropensityTable& pi) {
  if (!spec.exact_capable() || !exposure.exact_capable()) {
    throw_validation(
        "phi0_exact: spec or exposure lacks a declared locality; use "
        "phi0_fit");
  }
  const std::size_t n = g.size();
  const Eigen::Index q = spec.output_dim(x.cols());
  const int kt = pi.value_index(contrast.t);
  const int ktp = pi.value_index(contrast.t_prime);

  Phi0Normalizer norm;
  norm.reps = 0;
  norm.gamma.resize(n, q);
  norm.gamma_se = Eigen::MatrixXd::Zero(n, q);

  std::vector<std::uint8_t> d(n, 0);
  for (std::uint32_t i = 0; i < n; ++i) {
    auto dep = exposure.dependence_set(i, g);
    {
      auto more = spec.dependence_set(i, g);
      dep.insert(dep.end(), more.begin(), more.end());
      std::sort(dep.begin(), dep.end());
      dep.erase(std::unique(dep.begin(), dep.end()), dep.end());
    }
    if (dep.size() > 20) {
      throw_validation("phi0_exact: dependence set of unit " +
                       std::to_string(i) + " has " +
                       std::to_string(dep.size()) +
                       " units; local enumeration capped at 20");
    }
    KahanSum den;
    std::vector<KahanSum> num(q);
    const std::size_t patterns = std::size_t{1} << dep.size();
    for (std::size_t m = 0; m < patterns; ++m) {
      double weight = 1.0;
      for (std::size_t k = 0; k < dep.size(); ++k) {
        const bool on = (m >> k) & 1;
        d[dep[k]] = on ? 1 : 0;
        weight *= on ? design.prob(dep[k]) : 1.0 - design.prob(dep[k]);
      }
      const int t_i = exposure.eval_unit(i, d, g);
      const double w =
          ht_weight_of(t_i, contrast, pi.matrix()(i, kt), pi.matrix()(i, ktp));
      den.add(weight * w * w);
      if (w != 0.0) {
        const Eigen::RowVectorXd gi = spec.eval_unit(i, x, d, g);
        for (Eigen::Index c = 0; c < q; ++c) num[c].add(weight * w * gi[c]);
      }
    }
    for (std::size_t k = 0; k < dep.size(); ++k) d[dep[k]] = 0;
    if (den.value() < 1e-12) {
      throw_numerical("phi0_exact: E[w^2] for unit " + std::to_string(i) +
                      " vanishes; overlap failure symptom");
    }
    for (Eigen::Index c = 0; c < q; ++c) {
      norm.gamma(i, c) = num[c].value() / den.value();
    }
  }
  return norm;
}

Eigen::MatrixXd phi0_apply(const Phi0Normalizer& norm,
                           const Eigen::MatrixXd& g_realized,
                           const Dataset& ds) {
  if (g_realized.rows() != norm.gamma.rows() ||
      g_realized.cols() != norm.gamma.cols() ||
      static_cast<std::size_t>(g_realized.rows()) != ds.size()) {
    throw_validation("phi0_apply: dimension mismatch");
  }
  const Eigen::VectorXd w = ht_weights(ds);
  return g_realized - w.asDiagonal() * norm.gamma;
}

}  // namespace netexp

namespace netexp {

namespace {

struct Fnv1a {
  std::uint64_t state = 0xCBF29CE484222325ULL;
  void bytes(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      state ^= p[i];
      state *= 0x100000001B3ULL;
    }
  }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  void f64(double v) { bytes(&v, sizeof v); }
};

void hash_exposure(Fnv1a& h, const ExposureSpec& exposure, const Graph& g);

}  // namespace

std::uint64_t hash_graph(const Graph& g) {
  Fnv1a h;
  h.u64(g.size());
  for (std::uint32_t i = 0; i < g.size(); ++i) {
    const auto nb = g.neighbors(i);
    h.u64(nb.size());
    h.bytes(nb.data(), nb.size_bytes());
  }
  return h.state;
}

std::uint64_t hash_design(const Design& d) {
  Fnv1a h;
  h.u64(d.size());
  h.bytes(d.probs().data(), d.probs().size() * sizeof(double));
  return h.state;
}

namespace {

void hash_exposure(Fnv1a& h, const ExposureSpec& exposure, const Graph&) {
  if (!exposure.exact_capable()) {
    throw_validation("phi0 cache: custom exposure specs are not cacheable");
  }
  h.u64(static_cast<std::uint64_t>(exposure.kind()));
  h.u64(exposure.locality_radius());
  for (int v : exposure.value_set()) h.u64(static_cast<std::uint64_t>(v));
}

}  // namespace

std::uint64_t hash_auxiliary_setup(const AuxiliarySpec& spec,
                                   const ExposureSpec& exposure,
                                   Contrast contrast) {
  if (spec.kind() == AuxiliarySpec::Kind::custom) {
    throw_validation("phi0 cache: custom auxiliary specs are not cacheable");
  }
  Fnv1a h;
  h.u64(static_cast<std::uint64_t>(spec.kind()));
  if (const ExposureSpec* own = spec.exposure()) {
    h.u64(static_cast<std::uint64_t>(own->kind()));
  }
  Graph empty;
  hash_exposure(h, exposure, empty);
  h.u64(static_cast<std::uint64_t>(contrast.t));
  h.u64(static_cast<std::uint64_t>(contrast.t_prime));
  return h.state;
}

namespace {

constexpr char kCacheMagic[8] = {'N', 'X', 'P', 'H', '0', '1', '\0', '\0'};

}  // namespace

void save_phi0_cache(const std::string& path, const Phi0CacheKey& key,
                     const Phi0Normalizer& norm) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_io("cannot write phi0 cache '" + path + "'");
  out.write(kCacheMagic, sizeof kCacheMagic);
  const std::uint64_t header[7] = {
      key.graph_hash,
      key.spec_hash,
      key.design_hash,
      key.reps,
      key.seed,
      static_cast<std::uint64_t>(norm.gamma.rows()),
      static_cast<std::uint64_t>(norm.gamma.cols())};
  out.write(reinterpret_cast<const char*>(header), sizeof header);
  out.write(reinterpret_cast<const char*>(norm.gamma.data()),
            norm.gamma.size() * sizeof(double));
  out.write(reinterpret_cast<const char*>(norm.gamma_se.data()),
            norm.gamma_se.size() * sizeof(double));
  if (!out) throw_io("phi0 cache write to '" + path + "' failed");
}

std::optional<Phi0Normalizer> load_phi0_cache(const std::string& path,
                                              const Phi0CacheKey& key) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCacheMagic, sizeof magic) != 0) {
    return std::nullopt;
  }
  std::uint64_t header[7];
  in.read(reinterpret_cast<char*>(header), sizeof header);
  if (!in || header[0] != key.graph_hash || header[1] != key.spec_hash ||
      header[2] != key.design_hash || header[3] != key.reps ||
      header[4] != key.seed) {
    return std::nullopt;
  }
  Phi0Normalizer norm;
  norm.reps = key.reps;
  norm.gamma.resize(header[5], header[6]);
  norm.gamma_se.resize(header[5], header[6]);
  in.read(reinterpret_cast<char*>(norm.gamma.data()),
          norm.gamma.size() * sizeof(double));
  in.read(reinterpret_cast<char*>(norm.gamma_se.data()),
          norm.gamma_se.size() * sizeof(double));
  if (!in) return std::nullopt;
  return norm;
}

}  // namespace netexp
