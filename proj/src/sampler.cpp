#include "ccx/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

#include "ccx/error.hpp"

namespace ccx {

PriorSpec PriorSpec::defaults_for(BasisKind interaction) {
  PriorSpec p;
  p.block_sd["h"] = interaction == BasisKind::linear_interaction ? 1.0 : 10.0;
  return p;
}

PriorSpec PriorSpec::isotropic(double sd) {
  PriorSpec p;
  p.block_sd.clear();
  p.fallback_sd = sd;
  return p;
}

Eigen::VectorXd PriorSpec::sd_vector(const std::vector<Block>& blocks, int dimension) const {
  Eigen::VectorXd sd = Eigen::VectorXd::Constant(dimension, fallback_sd);
  for (const auto& b : blocks) {
    const auto it = block_sd.find(b.name);
    if (it == block_sd.end()) continue;
    sd.segment(b.begin, b.size).setConstant(it->second);
  }
  return sd;
}

void PriorSpec::validate() const {
  if (!(fallback_sd > 0.0)) throw InputError("prior sd must be positive");
  for (const auto& [name, sd] : block_sd) {
    if (!(sd > 0.0) || !std::isfinite(sd)) {
      throw InputError("prior sd for block '" + name + "' must be positive");
    }
  }
}

void SamplerConfig::validate() const {
  if (chains < 2) throw InputError("sampler needs at least 2 chains");
  if (warmup < 0 || draws < 4) throw InputError("sampler warmup/draws out of range");
  if (chains * draws < min_total_draws) {
    throw InputError("sampler keeps " + std::to_string(chains * draws) + " draws; minimum is " +
                     std::to_string(min_total_draws));
  }
}

double split_rhat(std::span<const Eigen::VectorXd> chains) {
  std::vector<Eigen::VectorXd> halves;
  for (const auto& c : chains) {
    const Eigen::Index n = c.size() / 2;
    halves.emplace_back(c.head(n));
    halves.emplace_back(c.tail(n));
  }
  const Eigen::Index n = halves.front().size();
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  const auto m = static_cast<double>(halves.size());
  Eigen::VectorXd means(halves.size()), vars(halves.size());
  for (std::size_t i = 0; i < halves.size(); ++i) {
    means[i] = halves[i].mean();
    vars[i] = (halves[i].array() - means[i]).square().sum() / static_cast<double>(n - 1);
  }
  const double grand = means.mean();
  const double b = static_cast<double>(n) * (means.array() - grand).square().sum() / (m - 1.0);
  const double w = vars.mean();
  if (w == 0.0) return b == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  const double var_plus = (static_cast<double>(n) - 1.0) / static_cast<double>(n) * w +
                          b / static_cast<double>(n);
  return std::sqrt(var_plus / w);
}

double effective_sample_size(std::span<const Eigen::VectorXd> chains) {
  const std::size_t m = chains.size();
  const Eigen::Index n = chains.front().size();
  const double total = static_cast<double>(m) * static_cast<double>(n);
  if (n < 4) return total;

  std::vector<double> means(m);
  std::vector<Eigen::VectorXd> centered(m);
  for (std::size_t c = 0; c < m; ++c) {
    means[c] = chains[c].mean();
    centered[c] = chains[c].array() - means[c];
  }
  auto mean_autocov = [&](Eigen::Index lag) {
    double acc = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      acc += centered[c].head(n - lag).dot(centered[c].tail(n - lag)) / static_cast<double>(n);
    }
    return acc / static_cast<double>(m);
  };
  const double acov0 = mean_autocov(0);
  const double w = acov0 * static_cast<double>(n) / static_cast<double>(n - 1);
  double grand = 0.0;
  for (double v : means) grand += v;
  grand /= static_cast<double>(m);
  double b_over_n = 0.0;
  if (m > 1) {
    for (double v : means) b_over_n += (v - grand) * (v - grand);
    b_over_n /= static_cast<double>(m - 1);
  }
  const double var_plus = w * static_cast<double>(n - 1) / static_cast<double>(n) + b_over_n;
  if (!(var_plus > 0.0)) return total;
  auto rho = [&](Eigen::Index lag) { return 1.0 - (w - mean_autocov(lag)) / var_plus; };

  std::vector<double> r(static_cast<std::size_t>(n) + 2, 0.0);
  r[0] = 1.0;
  double even = 1.0;
  double odd = rho(1);
  r[1] = odd;
  Eigen::Index t = 1;
  while (t < n - 4 && even + odd > 0.0) {
    even = rho(t + 1);
    odd = rho(t + 2);
    if (even + odd >= 0.0) {
      r[static_cast<std::size_t>(t + 1)] = even;
      r[static_cast<std::size_t>(t + 2)] = odd;
    }
    t += 2;
  }
  const Eigen::Index max_t = t;
  if (even > 0.0) r[static_cast<std::size_t>(max_t + 1)] = even;
  for (Eigen::Index k = 1; k <= max_t - 3; k += 2) {
    const auto i = static_cast<std::size_t>(k);
    if (r[i + 1] + r[i + 2] > r[i - 1] + r[i]) {
      r[i + 1] = (r[i - 1] + r[i]) / 2.0;
      r[i + 2] = r[i + 1];
    }
  }
  double sum = 0.0;
  for (Eigen::Index k = 0; k <= max_t; ++k) sum += r[static_cast<std::size_t>(k)];
  const double tau = -1.0 + 2.0 * sum + r[static_cast<std::size_t>(max_t + 1)];
  const double ess = total / std::max(tau, 1.0 / std::log10(total));
  return std::min(ess, total * std::log10(total));
}

namespace {

struct ChainOutput {
  Eigen::MatrixXd theta;  // draws x dim, standardized scale
  long accepted = 0;
};

// Log posterior and its gradient on the standardized scale.
class Posterior {
 public:
  Posterior(const ConditionalLikelihood& lik, Eigen::VectorXd penalty)
      : lik_(lik), penalty_(std::move(penalty)) {}
  double operator()(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) const {
    const auto e = lik_.evaluate(theta, false);
    const Eigen::VectorXd pt = penalty_.cwiseProduct(theta);
    grad = e.gradient - pt;
    return e.value - 0.5 * theta.dot(pt);
  }

 private:
  const ConditionalLikelihood& lik_;
  Eigen::VectorXd penalty_;
};

Eigen::MatrixXd lower_cholesky(const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    Eigen::MatrixXd jittered = cov;
    jittered.diagonal().array() += 1e-10 * (1.0 + cov.diagonal().maxCoeff());
    llt.compute(jittered);
    if (llt.info() != Eigen::Success) throw NumericalError("metric covariance not positive");
  }
  return llt.matrixL();
}

// Step-size dual averaging toward a target acceptance probability.
struct DualAveraging {
  double mu = 0.0, h_bar = 0.0, log_eps_bar = 0.0;
  long m = 0;
  void restart(double eps) {
    mu = std::log(10.0 * eps);
    h_bar = log_eps_bar = 0.0;
    m = 0;
  }
  double update(double accept_prob) {
    constexpr double target = 0.8, gamma = 0.05, t0 = 10.0, kappa = 0.75;
    ++m;
    const double md = static_cast<double>(m);
    h_bar += ((target - accept_prob) - h_bar) / (md + t0);
    const double log_eps = mu - std::sqrt(md) / gamma * h_bar;
    const double w = std::pow(md, -kappa);
    log_eps_bar = w * log_eps + (1.0 - w) * log_eps_bar;
    return std::exp(log_eps);
  }
};

// HMC with a dense metric. In coordinates eta with theta = L eta the target is
// close to a standard normal, so short trajectories give nearly independent
// draws.
ChainOutput run_chain(const Posterior& target, const Eigen::VectorXd& mode,
                      const Eigen::MatrixXd& laplace_cov, const SamplerConfig& config, int chain) {
  constexpr double kTrajectory = 1.4;
  constexpr int kMaxSteps = 200;
  const auto d = mode.size();
  std::seed_seq seq{static_cast<std::uint32_t>(config.seed),
                    static_cast<std::uint32_t>(config.seed >> 32),
                    static_cast<std::uint32_t>(chain), 0x5eedu};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform;
  auto z = [&] {
    Eigen::VectorXd v(d);
    for (Eigen::Index i = 0; i < d; ++i) v[i] = normal(rng);
    return v;
  };

  const Eigen::MatrixXd laplace_chol = lower_cholesky(laplace_cov);
  Eigen::MatrixXd chol = laplace_chol;

  // Overdispersed start so that R-hat can see poor mixing.
  Eigen::VectorXd theta = mode + 2.0 * (laplace_chol * z());
  Eigen::VectorXd grad(d);
  double lp = target(theta, grad);

  double eps = 0.5;
  DualAveraging da;
  da.restart(eps);

  // Metric windows: covariance of draws in [0.15, 0.4) and [0.4, 0.75) of
  // warmup, shrunk toward the Laplace covariance; step size only afterwards.
  const int w0 = (15 * config.warmup) / 100;
  const int w1 = (40 * config.warmup) / 100;
  const int w2 = (75 * config.warmup) / 100;
  Eigen::VectorXd run_mean = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd run_m2 = Eigen::MatrixXd::Zero(d, d);
  long run_n = 0;

  ChainOutput out;
  out.theta.resize(config.draws, d);
  const int total = config.warmup + config.draws;
  Eigen::VectorXd next_grad(d);
  for (int it = 0; it < total; ++it) {
    const bool warm = it < config.warmup;
    const double step = eps * (0.8 + 0.4 * uniform(rng));
    const int steps = std::clamp(static_cast<int>(std::ceil(kTrajectory / step)), 1, kMaxSteps);

    Eigen::VectorXd r = z();
    const double h0 = lp - 0.5 * r.squaredNorm();
    Eigen::VectorXd next = theta;
    next_grad = grad;
    double lp_next = lp;
    bool finite = true;
    for (int l = 0; l < steps && finite; ++l) {
      r.noalias() += 0.5 * step * (chol.transpose() * next_grad);
      next.noalias() += step * (chol * r);
      lp_next = target(next, next_grad);
      finite = std::isfinite(lp_next) && next_grad.allFinite();
      if (finite) r.noalias() += 0.5 * step * (chol.transpose() * next_grad);
    }
    const double log_ratio = finite ? (lp_next - 0.5 * r.squaredNorm()) - h0 : -INFINITY;
    const double accept_prob = std::isfinite(log_ratio) ? std::min(1.0, std::exp(log_ratio)) : 0.0;
    const bool accept = finite && std::log(uniform(rng)) < log_ratio;
    if (accept) {
      theta = next;
      grad = next_grad;
      lp = lp_next;
    }

    if (warm) {
      eps = da.update(accept_prob);
      if (it >= w0 && it < w2) {
        ++run_n;
        const Eigen::VectorXd delta = theta - run_mean;
        run_mean += delta / static_cast<double>(run_n);
        run_m2 += delta * (theta - run_mean).transpose();
      }
      if ((it + 1 == w1 || it + 1 == w2) && run_n > 2 * d) {
        const double n = static_cast<double>(run_n);
        const double prior_weight = 5.0 * static_cast<double>(d);
        chol = lower_cholesky((run_m2 + prior_weight * laplace_cov) / (n - 1.0 + prior_weight));
        run_mean.setZero();
        run_m2.setZero();
        run_n = 0;
        da.restart(eps);
      }
      if (it + 1 == config.warmup) eps = std::exp(da.log_eps_bar);
    } else {
      out.theta.row(it - config.warmup) = theta.transpose();
      out.accepted += accept ? 1 : 0;
    }
  }
  return out;
}

}  // namespace

FitResult fit_bayes(const ConditionalLikelihood& lik, const PriorSpec& prior,
                    const SamplerConfig& config) {
  prior.validate();
  config.validate();
  if (lik.sets() == 0) throw EmptyAnalysisError("no matched sets to fit");
  const int p = lik.dimension();

  const Eigen::VectorXd scale = lik.column_scale();
  const auto standardized = lik.rescaled(scale);
  // beta = theta / scale, so a N(0, sd^2) prior on beta has precision
  // 1 / (scale * sd)^2 on theta.
  const Eigen::VectorXd prior_sd = prior.sd_vector(lik.blocks(), p);
  const Eigen::VectorXd penalty = (scale.cwiseProduct(prior_sd)).array().square().inverse();

  MleOptions newton;
  newton.separation_bound = std::numeric_limits<double>::infinity();
  const auto mode = detail::newton_maximize(standardized, penalty, newton);
  const Eigen::MatrixXd laplace_cov =
      mode.information.ldlt().solve(Eigen::MatrixXd::Identity(p, p));

  const Posterior target(standardized, penalty);
  std::vector<ChainOutput> outputs(static_cast<std::size_t>(config.chains));
  {
    std::vector<std::jthread> workers;
    for (int c = 0; c < config.chains; ++c) {
      workers.emplace_back([&, c] {
        outputs[static_cast<std::size_t>(c)] = run_chain(target, mode.theta, laplace_cov, config, c);
      });
    }
  }

  FitResult fit;
  fit.mode = FitMode::bayes;
  fit.labels = lik.labels();
  fit.blocks = lik.blocks();
  const int s = config.chains * config.draws;
  fit.draws.resize(s, p);
  long accepted = 0;
  for (int c = 0; c < config.chains; ++c) {
    const auto& o = outputs[static_cast<std::size_t>(c)];
    fit.draws.middleRows(static_cast<Eigen::Index>(c) * config.draws, config.draws) =
        o.theta * scale.cwiseInverse().asDiagonal();
    accepted += o.accepted;
  }
  fit.point = fit.draws.colwise().mean().transpose();
  const Eigen::MatrixXd centered = fit.draws.rowwise() - fit.point.transpose();
  fit.covariance = centered.transpose() * centered / static_cast<double>(s - 1);

  auto& diag = fit.bayes;
  diag.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(s);
  diag.rhat.resize(p);
  diag.ess.resize(p);
  diag.mcse.resize(p);
  diag.converged = true;
  for (int k = 0; k < p; ++k) {
    std::vector<Eigen::VectorXd> chains;
    for (int c = 0; c < config.chains; ++c) {
      chains.emplace_back(fit.draws.col(k).segment(static_cast<Eigen::Index>(c) * config.draws,
                                                   config.draws));
    }
    diag.rhat[k] = split_rhat(chains);
    diag.ess[k] = effective_sample_size(chains);
    diag.mcse[k] = std::sqrt(fit.covariance(k, k) / diag.ess[k]);
    if (!(diag.rhat[k] <= config.rhat_threshold)) {
      diag.converged = false;
      diag.warnings.push_back("R-hat " + std::to_string(diag.rhat[k]) + " for '" +
                              fit.labels[static_cast<std::size_t>(k)] + "' exceeds " +
                              std::to_string(config.rhat_threshold));
    }
  }
  return fit;
}

}  // namespace ccx
