#include "fkuq/mcmc.hpp"

#include "fkuq/csv.hpp"
#include "fkuq/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace fkuq {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

void McmcConfig::validate() const
{
  if (!(proposal_sigma > 0.0)) throw ValidationError("mcmc: proposal sigma must be positive");
  if (!(likelihood_sigma > 0.0)) throw ValidationError("mcmc: likelihood sigma must be positive");
  if (chain_length < 1) throw ValidationError("mcmc: chain length must be positive");
  if (burn_in < 0 || burn_in >= chain_length) throw ValidationError("mcmc: burn-in must lie in [0, chain length)");
  if (bounds.size() == 0) throw ValidationError("mcmc: prior bounds missing");
  if (!(horizon > 0.0)) throw ValidationError("mcmc: horizon must be positive");
}

void RunningMoments::push(const Eigen::VectorXd& x)
{
  if (count == 0) {
    mean = Eigen::VectorXd::Zero(x.size());
    m2 = Eigen::VectorXd::Zero(x.size());
  }
  ++count;
  const Eigen::VectorXd delta = x - mean;
  mean += delta / static_cast<double>(count);
  m2 += delta.cwiseProduct(x - mean);
}

double log_likelihood(const Eigen::VectorXd& q_model, const Eigen::VectorXd& q_data, double sigma)
{
  if (q_model.size() != q_data.size()) throw ValidationError("log_likelihood: length mismatch");
  if (!(sigma > 0.0)) throw ValidationError("log_likelihood: sigma must be positive");
  if (!q_model.allFinite() || !q_data.allFinite()) throw NumericalError("log_likelihood: non-finite input");
  return -(q_model - q_data).squaredNorm() / (2.0 * sigma * sigma);
}

double acceptance_log_ratio(const ParameterVector& p_star, const ParameterVector& p_prev,
                            const Eigen::VectorXd& q_star, const Eigen::VectorXd& q_prev,
                            const Eigen::VectorXd& q_data, const McmcConfig& cfg)
{
  const double prior_star = log_prior(p_star, cfg.bounds);
  if (prior_star == kNegInf) return kNegInf;
  const double prior_prev = log_prior(p_prev, cfg.bounds);
  if (prior_prev == kNegInf) return std::numeric_limits<double>::infinity();
  return log_likelihood(q_star, q_data, cfg.likelihood_sigma) - log_likelihood(q_prev, q_data, cfg.likelihood_sigma) +
         (prior_star - prior_prev);
}

Chain run_mcmc(const CalibrationModel& model, const Eigen::VectorXd& q_data, const McmcConfig& cfg,
               const ChainObserver& observer)
{
  cfg.validate();
  if (!q_data.allFinite()) throw ValidationError("mcmc: non-finite data QoI");
  const Eigen::Index n = cfg.bounds.size();

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  ParameterVector current = cfg.bounds.midpoint();
  Eigen::VectorXd q_current = model(current);
  if (q_current.size() != q_data.size()) throw ValidationError("mcmc: model QoI length does not match data");
  if (!q_current.allFinite()) throw NumericalError("mcmc: model is non-finite at the starting point");

  Chain chain;
  chain.burn_in = cfg.burn_in;
  const bool store = cfg.chain_length <= cfg.memory_limit_steps;
  if (store) chain.samples.resize(cfg.chain_length, n);
  chain.accepted_flags.resize(cfg.chain_length);

  ParameterVector proposal(n);
  for (int i = 0; i < cfg.chain_length; ++i) {
    for (Eigen::Index l = 0; l < n; ++l) proposal[l] = current[l] + cfg.proposal_sigma * normal(rng);
    const double u = uniform(rng);

    double log_rho = kNegInf;
    Eigen::VectorXd q_proposal;
    if (log_prior(proposal, cfg.bounds) == 0.0) {
      try {
        q_proposal = model(proposal);
        log_rho = acceptance_log_ratio(proposal, current, q_proposal, q_current, q_data, cfg);
      } catch (const NumericalError&) {
        ++chain.model_failures;
      }
    }

    const bool accept = log_rho >= 0.0 || std::log(u) < log_rho;
    if (accept) {
      current = proposal;
      q_current = std::move(q_proposal);
      ++chain.accepted;
    }
    chain.accepted_flags[i] = accept ? 1 : 0;
    if (store) chain.samples.row(i) = current.transpose();
    if (i >= cfg.burn_in) chain.post_burn_in.push(current);
    if (observer) observer(i + 1, current, accept);
  }
  return chain;
}

PosteriorSummary posterior_summary(const Chain& chain, int burn_in)
{
  if (chain.stored()) {
    const long rows = chain.samples.rows();
    if (burn_in < 0 || rows - burn_in < 2)
      throw ValidationError("posterior_summary: need at least 2 samples after burn-in");
    const Eigen::MatrixXd kept = chain.samples.bottomRows(rows - burn_in);
    PosteriorSummary post;
    post.mu = kept.colwise().mean().transpose();
    const Eigen::MatrixXd centred = kept.rowwise() - post.mu.transpose();
    post.var = centred.colwise().squaredNorm().transpose() / static_cast<double>(kept.rows() - 1);
    return post;
  }
  if (burn_in != chain.burn_in)
    throw ValidationError("posterior_summary: chain was streamed; only its configured burn-in is available");
  if (chain.post_burn_in.count < 2) throw ValidationError("posterior_summary: need at least 2 samples after burn-in");
  return {chain.post_burn_in.mean, chain.post_burn_in.m2 / static_cast<double>(chain.post_burn_in.count - 1)};
}

double effective_sample_size(const Eigen::VectorXd& x)
{
  const Eigen::Index n = x.size();
  if (n < 4) return static_cast<double>(n);
  const Eigen::VectorXd d = x.array() - x.mean();
  const double c0 = d.squaredNorm() / n;
  if (c0 == 0.0) return static_cast<double>(n);
  auto rho = [&](Eigen::Index lag) { return d.head(n - lag).dot(d.tail(n - lag)) / (n * c0); };

  // Geyer: sum consecutive pairs Gamma_k = rho_{2k} + rho_{2k+1} while positive,
  // enforcing monotone decrease.
  double sum = 0.0;
  double previous_pair = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; 2 * k + 1 < n; ++k) {
    double pair = rho(2 * k) + rho(2 * k + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, previous_pair);
    sum += pair;
    previous_pair = pair;
  }
  const double tau = std::max(1.0, 2.0 * sum - 1.0);
  return static_cast<double>(n) / tau;
}

double ks_statistic_uniform(Eigen::VectorXd x, double a, double b)
{
  if (x.size() == 0) throw ValidationError("ks_statistic_uniform: empty sample");
  if (!(a < b)) throw ValidationError("ks_statistic_uniform: a < b required");
  std::sort(x.data(), x.data() + x.size());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double f = std::clamp((x[i] - a) / (b - a), 0.0, 1.0);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

double ks_critical_value_1pct(double n)
{
  if (!(n > 0.0)) throw ValidationError("ks_critical_value_1pct: n must be positive");
  const double sn = std::sqrt(n);
  // Stephens' finite-sample correction of the asymptotic sqrt(-ln(0.005)/2).
  return std::sqrt(-std::log(0.005) / 2.0) / (sn + 0.12 + 0.11 / sn);
}

void write_chain_csv(const Chain& chain, const std::filesystem::path& path)
{
  if (!chain.stored()) throw ValidationError("write_chain_csv: chain was streamed, samples not in memory");
  csv::Writer w(path);
  std::vector<std::string> header{"step"};
  for (Eigen::Index l = 0; l < chain.samples.cols(); ++l) header.push_back("p_" + std::to_string(l + 1));
  header.push_back("accepted");
  w.header(header);
  for (Eigen::Index i = 0; i < chain.samples.rows(); ++i) {
    std::vector<double> row{static_cast<double>(i + 1)};
    for (Eigen::Index l = 0; l < chain.samples.cols(); ++l) row.push_back(chain.samples(i, l));
    row.push_back(chain.accepted_flags[i]);
    w.row(row);
  }
}

ChainTable read_chain_csv(const std::filesystem::path& path)
{
  const csv::Table t = csv::read(path);
  std::vector<std::size_t> cols;
  for (int l = 1; t.has_column("p_" + std::to_string(l)); ++l) cols.push_back(t.column("p_" + std::to_string(l)));
  if (cols.empty()) throw ValidationError("chain: " + path.string() + " has no p_1 column");
  const std::size_t acc = t.column("accepted");
  ChainTable out;
  out.samples.resize(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(cols.size()));
  out.accepted.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    for (std::size_t l = 0; l < cols.size(); ++l) out.samples(i, l) = t.rows[i][cols[l]];
    out.accepted.push_back(t.rows[i][acc] != 0.0 ? 1 : 0);
  }
  return out;
}

}  // namespace fkuq
