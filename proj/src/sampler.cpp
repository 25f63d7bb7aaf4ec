#include "tnma/sampler.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "tnma/error.hpp"

namespace tnma {

namespace {

using mcmc::Rng;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct ChainState {
  ParamState params;
  std::vector<std::optional<CovarianceMatrix>> kernel_cov;  // tBNMA, per time-varying treatment
};

struct Context {
  const Dataset& data;
  const ModelSpec& spec;
  const SamplerConfig& config;
  std::vector<TreatmentId> varying;
  std::vector<std::vector<double>> times;          // per treatment
  std::vector<std::vector<std::size_t>> studies;   // per treatment, studies containing it

  Context(const Dataset& d, const ModelSpec& s, const SamplerConfig& c)
      : data(d), spec(s), config(c), varying(s.time_varying_set()) {
    for (std::size_t k = 0; k < d.treatment_count(); ++k) {
      times.push_back(d.times_of(TreatmentId{k}));
      auto& list = studies.emplace_back();
      for (const auto& occ : d.occurrences(TreatmentId{k})) list.push_back(occ.study);
    }
  }

  bool latent() const { return spec.kind == ModelKind::TBNMA; }
};

double draw_inv_gamma(double shape, double scale, Rng& rng) {
  std::gamma_distribution<double> gamma(shape, 1.0 / scale);
  return 1.0 / gamma(rng);
}

double gp_logpdf(const Context& ctx, const ParamState& p, TreatmentId k, const CovarianceMatrix& cov) {
  const auto& latent = p.d_latent[k.value];
  const Eigen::Map<const Eigen::VectorXd> x(latent.data(), static_cast<Eigen::Index>(latent.size()));
  (void)ctx;
  return mvn_logpdf(x, Eigen::VectorXd::Constant(x.size(), p.d[k]), cov);
}

double studies_delta_logprior(const Context& ctx, const ParamState& p, TreatmentId k) {
  double lp = 0.0;
  for (std::size_t i : ctx.studies[k.value]) lp += delta_logprior(ctx.data, ctx.spec, p, i);
  return lp;
}

/// Joint Gaussian full conditional of every treatment-effect parameter given
/// the contrasts, sigma2 and the effect hyperparameters. Latent series are
/// drawn in whitened coordinates u with latent = d_1k + L u, L the Cholesky
/// factor of the current kernel matrix, so their prior precision is I.
class EffectConditional {
 public:
  explicit EffectConditional(const Context& ctx) : ctx_(ctx) {
    const std::size_t K = ctx.data.treatment_count();
    d_index_.assign(K, npos);
    beta_index_.assign(K, npos);
    u_offset_.assign(K, npos);
    std::size_t next = 0;
    for (std::size_t k = 0; k < K; ++k)
      if (TreatmentId{k} != ctx.spec.baseline) d_index_[k] = next++;
    for (auto k : ctx.varying) {
      if (ctx.spec.kind == ModelKind::MetaBNMA) beta_index_[k.value] = next++;
      if (ctx.spec.kind == ModelKind::TBNMA) {
        u_offset_[k.value] = next;
        next += ctx.data.occurrences(k).size();
      }
    }
    dim_ = next;
    q_.resize(static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(dim_));
    b_.resize(static_cast<Eigen::Index>(dim_));
  }

  void draw(ChainState& s, Rng& rng) {
    const ParamState& p = s.params;
    const PriorConfig& prior = ctx_.spec.prior;
    q_.setZero();
    b_.setZero();

    for (std::size_t i = 0; i < ctx_.data.study_count(); ++i) {
      const Study& study = ctx_.data.study(i);
      const std::size_t q = study.contrast_count();
      const double m = static_cast<double>(q + 1);
      const double w = 2.0 / p.sigma2;
      base_.clear();
      append_effect(s, i, study.baseline_arm, 1.0, base_);

      sum_.clear();
      double delta_sum = 0.0;
      for (std::size_t j = 0; j < q; ++j) {
        row_.clear();
        append_effect(s, i, study.contrast_arms[j], 1.0, row_);
        sum_.insert(sum_.end(), row_.begin(), row_.end());
        for (const auto& t : base_) row_.push_back({t.index, -t.coef});
        add_outer(row_, w);
        add_linear(row_, w * p.delta[i][j]);
        delta_sum += p.delta[i][j];
      }
      for (const auto& t : base_) sum_.push_back({t.index, -static_cast<double>(q) * t.coef});
      add_outer(sum_, -w / m);
      add_linear(sum_, -w / m * delta_sum);
    }

    for (std::size_t k = 0; k < d_index_.size(); ++k) {
      if (d_index_[k] == npos) continue;
      const auto idx = static_cast<Eigen::Index>(d_index_[k]);
      q_(idx, idx) += 1.0 / p.sigma2_d;
      b_(idx) += p.m_d / p.sigma2_d;
    }
    for (auto k : ctx_.varying) {
      if (beta_index_[k.value] != npos) {
        const auto idx = static_cast<Eigen::Index>(beta_index_[k.value]);
        q_(idx, idx) += 1.0 / prior.slope_var;
      }
      if (u_offset_[k.value] != npos) {
        const auto off = static_cast<Eigen::Index>(u_offset_[k.value]);
        const auto n = static_cast<Eigen::Index>(ctx_.data.occurrences(k).size());
        q_.block(off, off, n, n).diagonal().array() += 1.0;
      }
    }

    Eigen::LLT<Eigen::MatrixXd> llt(q_);
    if (llt.info() != Eigen::Success)
      throw NumericalError("effect full conditional precision is not positive definite");
    Eigen::VectorXd theta = llt.solve(b_);
    Eigen::VectorXd z(theta.size());
    for (auto& v : z) v = normal_(rng);
    theta += llt.matrixU().solve(z);

    ParamState& out = s.params;
    for (auto k : out.d.free_treatments()) out.d[k] = theta(static_cast<Eigen::Index>(d_index_[k.id().value]));
    for (auto k : ctx_.varying) {
      if (beta_index_[k.value] != npos)
        out.beta[k.value] = theta(static_cast<Eigen::Index>(beta_index_[k.value]));
      if (u_offset_[k.value] != npos) {
        const auto off = static_cast<Eigen::Index>(u_offset_[k.value]);
        const auto& lower = s.kernel_cov[k.value]->cholesky();
        const Eigen::Index n = lower.rows();
        const Eigen::VectorXd latent =
            lower.triangularView<Eigen::Lower>() * theta.segment(off, n);
        auto& dst = out.d_latent[k.value];
        for (Eigen::Index r = 0; r < n; ++r) dst[static_cast<std::size_t>(r)] = out.d[k] + latent(r);
      }
    }
  }

 private:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  struct Term {
    std::size_t index;
    double coef;
  };

  // Linear form of treatment_effect() for one arm, scaled by sign.
  void append_effect(const ChainState& s, std::size_t study, std::size_t arm, double sign,
                     std::vector<Term>& out) const {
    const TreatmentId k = ctx_.data.study(study).arms[arm].treatment;
    if (k == ctx_.spec.baseline) return;
    out.push_back({d_index_[k.value], sign});
    if (beta_index_[k.value] != npos)
      out.push_back({beta_index_[k.value],
                     sign * (ctx_.data.study(study).time - ctx_.data.mean_time())});
    if (u_offset_[k.value] != npos) {
      const auto& lower = s.kernel_cov[k.value]->cholesky();
      const auto pos = static_cast<Eigen::Index>(ctx_.data.occurrence_index(study, arm));
      for (Eigen::Index c = 0; c <= pos; ++c)
        out.push_back({u_offset_[k.value] + static_cast<std::size_t>(c), sign * lower(pos, c)});
    }
  }

  void add_outer(const std::vector<Term>& row, double w) {
    for (const auto& a : row)
      for (const auto& b : row)
        q_(static_cast<Eigen::Index>(a.index), static_cast<Eigen::Index>(b.index)) += w * a.coef * b.coef;
  }

  void add_linear(const std::vector<Term>& row, double w) {
    for (const auto& a : row) b_(static_cast<Eigen::Index>(a.index)) += w * a.coef;
  }

  const Context& ctx_;
  std::size_t dim_ = 0;
  std::vector<std::size_t> d_index_, beta_index_, u_offset_;
  Eigen::MatrixXd q_;
  Eigen::VectorXd b_;
  std::vector<Term> base_, row_, sum_;
  std::normal_distribution<double> normal_;
};

enum class KernelField { Psi, SlopeBias, Slope, Phi, Rho };

double& field(KernelParams& p, KernelField f) {
  switch (f) {
    case KernelField::Psi: return p.psi;
    case KernelField::SlopeBias: return p.s_b;
    case KernelField::Slope: return p.s_l;
    case KernelField::Phi: return p.phi;
    case KernelField::Rho: return p.rho;
  }
  return p.rho;
}

const char* field_name(KernelField f) {
  switch (f) {
    case KernelField::Psi: return "psi";
    case KernelField::SlopeBias: return "s_b";
    case KernelField::Slope: return "s_l";
    case KernelField::Phi: return "phi";
    case KernelField::Rho: return "rho";
  }
  return "?";
}

/// Log-scale random walk on one kernel hyperparameter of one treatment. The
/// cached kernel factorization is replaced on acceptance.
class KernelBlock final : public mcmc::Block<ChainState> {
 public:
  KernelBlock(const Context& ctx, TreatmentId k, KernelField f, double target)
      : Block(std::string("kernel.") + field_name(f) + "[" + ctx.data.label(k) + "]"),
        ctx_(ctx),
        k_(k),
        field_(f),
        scale_(0.5, target) {}

  void update(ChainState& s, Rng& rng) override {
    KernelParams& params = s.params.kernel[k_.value];
    double& x = field(params, field_);
    const double old = x;
    const double current = gp_logpdf(ctx_, s.params, k_, *s.kernel_cov[k_.value]) +
                           kernel_log_prior(params, ctx_.spec.prior) + std::log(old);
    x = old * std::exp(scale_.value() * normal_(rng));
    double proposed = kNegInf;
    std::optional<CovarianceMatrix> cov;
    const double prior = kernel_log_prior(params, ctx_.spec.prior);
    if (prior > kNegInf) {
      try {
        cov.emplace(build_covariance(params, ctx_.times[k_.value]));
        proposed = gp_logpdf(ctx_, s.params, k_, *cov) + prior + std::log(x);
      } catch (const NumericalError&) {
        proposed = kNegInf;
      }
    }
    const bool accepted = mcmc::metropolis_accept(proposed - current, rng);
    if (accepted)
      s.kernel_cov[k_.value] = std::move(cov);
    else
      x = old;
    scale_.record(accepted);
  }

  mcmc::AdaptiveScale* adaptive() override { return &scale_; }

 private:
  const Context& ctx_;
  TreatmentId k_;
  KernelField field_;
  mcmc::AdaptiveScale scale_;
  std::normal_distribution<double> normal_;
};

// Laplace-style scale of one arm's logit given its data.
double logit_sd(const StudyArm& arm) {
  const double p = (static_cast<double>(arm.successes) + 0.5) / (static_cast<double>(arm.size) + 1.0);
  return 1.0 / std::sqrt(static_cast<double>(arm.size) * p * (1.0 - p));
}

mcmc::BlockList<ChainState> make_blocks(const Context& ctx) {
  using mcmc::GibbsBlock;
  using mcmc::ScalarRandomWalk;
  using mcmc::VectorRandomWalk;
  const auto& data = ctx.data;
  const auto& spec = ctx.spec;
  const auto& cfg = ctx.config;
  mcmc::BlockList<ChainState> blocks;

  for (std::size_t i = 0; i < data.study_count(); ++i) {
    const Study& study = data.study(i);
    double info = 0.0;
    for (const auto& arm : study.arms) info += 1.0 / std::pow(logit_sd(arm), 2);
    blocks.push_back(std::make_unique<ScalarRandomWalk<ChainState>>(
        "mu[" + study.key + "]", [i](ChainState& s) -> double& { return s.params.mu[i]; },
        [&ctx, i](const ChainState& s) {
          const ParamState& p = s.params;
          return study_log_likelihood(ctx.data.study(i), p.mu[i], p.delta[i]) +
                 log_normal_pdf(p.mu[i], p.m_mu, p.sigma2_mu);
        },
        2.4 / std::sqrt(info), cfg.target_scalar));
  }

  for (std::size_t i = 0; i < data.study_count(); ++i) {
    const Study& study = data.study(i);
    double sd = 0.0;
    for (std::size_t j = 0; j < study.contrast_count(); ++j) sd += logit_sd(study.contrast_arm(j));
    sd /= static_cast<double>(study.contrast_count());
    const bool scalar = study.contrast_count() == 1;
    blocks.push_back(std::make_unique<VectorRandomWalk<ChainState>>(
        "delta[" + study.key + "]",
        [i](ChainState& s) { return std::span<double>(s.params.delta[i]); },
        [&ctx, i](const ChainState& s) {
          const ParamState& p = s.params;
          return study_log_likelihood(ctx.data.study(i), p.mu[i], p.delta[i]) +
                 delta_logprior(ctx.data, ctx.spec, p, i);
        },
        1.5 * sd, scalar ? cfg.target_scalar : cfg.target_vector));
  }

  if (cfg.effect_update == EffectUpdate::Gibbs) {
    auto conditional = std::make_shared<EffectConditional>(ctx);
    blocks.push_back(std::make_unique<GibbsBlock<ChainState>>(
        "effects", [conditional](ChainState& s, Rng& rng) { conditional->draw(s, rng); }));
  } else {
    for (auto k : ParamState::zeros(data, spec).d.free_treatments()) {
      const TreatmentId id = k.id();
      const bool gp = ctx.latent() && spec.varies(id);
      blocks.push_back(std::make_unique<ScalarRandomWalk<ChainState>>(
          "d[" + data.label(id) + "]",
          [k](ChainState& s) -> double& { return s.params.d[k]; },
          [&ctx, id, gp](const ChainState& s) {
            const ParamState& p = s.params;
            double lp = log_normal_pdf(p.d[id], p.m_d, p.sigma2_d);
            if (gp) return lp + gp_logpdf(ctx, p, id, *s.kernel_cov[id.value]);
            return lp + studies_delta_logprior(ctx, p, id);
          },
          0.1, cfg.target_scalar));
    }
    for (auto k : ctx.varying) {
      if (spec.kind == ModelKind::MetaBNMA) {
        blocks.push_back(std::make_unique<ScalarRandomWalk<ChainState>>(
            "beta[" + data.label(k) + "]",
            [k](ChainState& s) -> double& { return s.params.beta[k.value]; },
            [&ctx, k](const ChainState& s) {
              return log_normal_pdf(s.params.beta[k.value], 0.0, ctx.spec.prior.slope_var) +
                     studies_delta_logprior(ctx, s.params, k);
            },
            0.3, cfg.target_scalar));
      }
      if (spec.kind == ModelKind::TBNMA) {
        blocks.push_back(std::make_unique<VectorRandomWalk<ChainState>>(
            "latent[" + data.label(k) + "]",
            [k](ChainState& s) { return std::span<double>(s.params.d_latent[k.value]); },
            [&ctx, k](const ChainState& s) {
              return gp_logpdf(ctx, s.params, k, *s.kernel_cov[k.value]) +
                     studies_delta_logprior(ctx, s.params, k);
            },
            0.3, cfg.target_vector,
            [k](const ChainState& s, const Eigen::VectorXd& z) -> Eigen::VectorXd {
              return s.kernel_cov[k.value]->cholesky().triangularView<Eigen::Lower>() * z;
            }));
      }
    }
  }

  blocks.push_back(std::make_unique<GibbsBlock<ChainState>>("sigma2", [&ctx](ChainState& s, Rng& rng) {
    ParamState& p = s.params;
    double quad = 0.0;
    double count = 0.0;
    for (std::size_t i = 0; i < ctx.data.study_count(); ++i) {
      const Study& study = ctx.data.study(i);
      const std::size_t q = study.contrast_count();
      double ss = 0.0, sum = 0.0;
      for (std::size_t j = 0; j < q; ++j) {
        const double r = p.delta[i][j] - consistency_mean(ctx.data, ctx.spec, p, i, study.contrast_arm(j).treatment);
        ss += r * r;
        sum += r;
      }
      quad += 2.0 * (ss - sum * sum / static_cast<double>(q + 1));
      count += static_cast<double>(q);
    }
    p.sigma2 = draw_inv_gamma(ctx.spec.prior.ig_shape + 0.5 * count, ctx.spec.prior.ig_scale + 0.5 * quad, rng);
  }));

  blocks.push_back(std::make_unique<GibbsBlock<ChainState>>("m_mu", [&ctx](ChainState& s, Rng& rng) {
    ParamState& p = s.params;
    const double n = static_cast<double>(p.mu.size());
    const double prec = 1.0 / ctx.spec.prior.normal_var + n / p.sigma2_mu;
    const double mean = std::accumulate(p.mu.begin(), p.mu.end(), 0.0) / p.sigma2_mu / prec;
    p.m_mu = mean + std::normal_distribution<double>()(rng) / std::sqrt(prec);
  }));
  blocks.push_back(std::make_unique<GibbsBlock<ChainState>>("sigma2_mu", [&ctx](ChainState& s, Rng& rng) {
    ParamState& p = s.params;
    double ss = 0.0;
    for (double mu : p.mu) ss += (mu - p.m_mu) * (mu - p.m_mu);
    p.sigma2_mu = draw_inv_gamma(ctx.spec.prior.ig_shape + 0.5 * static_cast<double>(p.mu.size()),
                                 ctx.spec.prior.ig_scale + 0.5 * ss, rng);
  }));
  blocks.push_back(std::make_unique<GibbsBlock<ChainState>>("m_d", [&ctx](ChainState& s, Rng& rng) {
    ParamState& p = s.params;
    double sum = 0.0, n = 0.0;
    for (auto k : p.d.free_treatments()) {
      sum += p.d[k.id()];
      n += 1.0;
    }
    const double prec = 1.0 / ctx.spec.prior.normal_var + n / p.sigma2_d;
    p.m_d = sum / p.sigma2_d / prec + std::normal_distribution<double>()(rng) / std::sqrt(prec);
  }));
  blocks.push_back(std::make_unique<GibbsBlock<ChainState>>("sigma2_d", [&ctx](ChainState& s, Rng& rng) {
    ParamState& p = s.params;
    double ss = 0.0, n = 0.0;
    for (auto k : p.d.free_treatments()) {
      ss += (p.d[k.id()] - p.m_d) * (p.d[k.id()] - p.m_d);
      n += 1.0;
    }
    p.sigma2_d = draw_inv_gamma(ctx.spec.prior.ig_shape + 0.5 * n, ctx.spec.prior.ig_scale + 0.5 * ss, rng);
  }));

  if (ctx.latent()) {
    for (auto k : ctx.varying)
      for (auto f : {KernelField::Psi, KernelField::SlopeBias, KernelField::Slope, KernelField::Phi,
                     KernelField::Rho})
        blocks.push_back(std::make_unique<KernelBlock>(ctx, k, f, cfg.target_scalar));
  }
  return blocks;
}

}  // namespace

void SamplerConfig::validate() const {
  if (n_chains < 1) throw UsageError("at least one chain is required");
  chain_settings().validate();
  if (!(target_scalar > 0 && target_scalar < 1) || !(target_vector > 0 && target_vector < 1))
    throw UsageError("target acceptance rates must lie in (0, 1)");
}

mcmc::ChainSettings SamplerConfig::chain_settings() const {
  return mcmc::ChainSettings{n_iter, burn_in, thin, adapt_window};
}

ParamState initial_state(const Dataset& data, const ModelSpec& spec, mcmc::Rng& rng) {
  std::normal_distribution<double> z(0.0, 0.25);
  ParamState s = ParamState::zeros(data, spec);
  for (std::size_t i = 0; i < data.study_count(); ++i) {
    const Study& study = data.study(i);
    const auto& base = study.arms[study.baseline_arm];
    const double y = static_cast<double>(base.successes), n = static_cast<double>(base.size);
    s.mu[i] = std::log((y + 0.5) / (n - y + 0.5)) + z(rng);
  }
  for (auto k : s.d.free_treatments()) s.d[k] = z(rng);
  s.sigma2 = std::exp(z(rng));
  s.sigma2_mu = std::exp(z(rng));
  s.sigma2_d = std::exp(z(rng));
  for (auto k : spec.time_varying_set()) {
    if (spec.kind == ModelKind::MetaBNMA) s.beta[k.value] = z(rng);
    if (spec.kind == ModelKind::TBNMA) {
      auto& kp = s.kernel[k.value];
      kp.psi = 0.1 * std::exp(z(rng));
      kp.s_b = 0.1 * std::exp(z(rng));
      kp.s_l = 0.1 * std::exp(z(rng));
      kp.phi = 0.1 * std::exp(z(rng));
      kp.rho = std::exp(z(rng));
      std::fill(s.d_latent[k.value].begin(), s.d_latent[k.value].end(), s.d[k]);
    }
  }
  return s;
}

PosteriorSamples run(const Dataset& data, const ModelSpec& spec, const SamplerConfig& config) {
  config.validate();
  if (spec.time_varying.size() != data.treatment_count())
    throw UsageError("model spec does not match the dataset's treatments");
  const Context ctx(data, spec, config);

  return mcmc::run_chains<ParamState>(
      config.n_chains, config.seed, config.chain_settings(), config.max_threads,
      [&](std::size_t chain_index, Rng& rng) {
        ChainState state;
        for (int attempt = 0;; ++attempt) {
          if (attempt == 100)
            throw NumericalError("no finite log-posterior at initialization after 100 attempts");
          state.params = initial_state(data, spec, rng);
          if (std::isfinite(log_posterior(data, state.params, spec))) break;
        }
        state.kernel_cov.assign(data.treatment_count(), std::nullopt);
        for (auto k : ctx.varying)
          if (ctx.latent())
            state.kernel_cov[k.value].emplace(build_covariance(state.params.kernel[k.value], ctx.times[k.value]));

        auto blocks = make_blocks(ctx);
        return mcmc::run_chain(
            std::move(state), blocks, config.chain_settings(), rng,
            [](const ChainState& s) { return s.params; }, config.progress, chain_index);
      });
}

std::vector<MonitoredScalar> monitored_scalars(const Dataset& data, const ModelSpec& spec) {
  std::vector<MonitoredScalar> out;
  for (std::size_t k = 0; k < data.treatment_count(); ++k) {
    const TreatmentId id{k};
    if (id == spec.baseline) continue;
    out.push_back({"d[" + data.label(id) + "]", [id](const ParamState& p) { return p.d[id]; }});
  }
  out.push_back({"sigma2", [](const ParamState& p) { return p.sigma2; }});
  for (auto k : spec.time_varying_set()) {
    const std::string label = data.label(k);
    if (spec.kind == ModelKind::MetaBNMA)
      out.push_back({"beta[" + label + "]", [k](const ParamState& p) { return p.beta[k.value]; }});
    if (spec.kind == ModelKind::TBNMA) {
      for (auto f : {KernelField::Psi, KernelField::SlopeBias, KernelField::Slope, KernelField::Phi,
                     KernelField::Rho}) {
        out.push_back({std::string("log_") + field_name(f) + "[" + label + "]",
                       [k, f](const ParamState& p) {
                         KernelParams kp = p.kernel[k.value];
                         return std::log(field(kp, f));
                       }});
      }
    }
  }
  return out;
}

std::optional<double> split_rhat(const PosteriorSamples& samples, const ScalarExtractor& summary) {
  return split_rhat(samples.trace(summary));
}

std::optional<double> ess(const PosteriorSamples& samples, const ScalarExtractor& summary) {
  return effective_sample_size(samples.trace(summary));
}

std::vector<ScalarDiagnostic> diagnose(const PosteriorSamples& samples, const Dataset& data,
                                       const ModelSpec& spec) {
  std::vector<ScalarDiagnostic> out;
  for (const auto& m : monitored_scalars(data, spec)) {
    const Traces traces = samples.trace(m.extract);
    ScalarDiagnostic d;
    d.name = m.name;
    double sum = 0.0, sq = 0.0, n = 0.0;
    for (const auto& c : traces)
      for (double v : c) {
        sum += v;
        sq += v * v;
        n += 1.0;
      }
    d.mean = n > 0 ? sum / n : 0.0;
    d.sd = n > 1 ? std::sqrt(std::max(0.0, (sq - n * d.mean * d.mean) / (n - 1.0))) : 0.0;
    if (traces.size() >= 2 && samples.retained_per_chain() >= 4) {
      d.rhat = split_rhat(traces);
      d.ess = effective_sample_size(traces);
    }
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace tnma
