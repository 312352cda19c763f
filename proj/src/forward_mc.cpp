#include "fkuq/forward_mc.hpp"

#include "fkuq/csv.hpp"
#include "fkuq/errors.hpp"
#include "fkuq/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace fkuq {

ParameterVector sample_parameters(const PosteriorSummary& post, std::uint64_t sample_index, std::uint64_t base_seed)
{
  std::seed_seq seq{static_cast<std::uint32_t>(base_seed), static_cast<std::uint32_t>(base_seed >> 32),
                    static_cast<std::uint32_t>(sample_index), static_cast<std::uint32_t>(sample_index >> 32),
                    0x6d6f6e74u};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  ParameterVector p(post.size());
  for (Eigen::Index l = 0; l < p.size(); ++l) p[l] = post.mu[l] + std::sqrt(post.var[l]) * normal(rng);
  return p;
}

namespace {

void check_shape(const QoISeries& ref, const QoISeries& q, std::size_t index)
{
  if (q.times != ref.times || q.regional_avg.size() != ref.regional_avg.size() ||
      q.global_avg.size() != ref.global_avg.size())
    throw ValidationError("moments: QoI series " + std::to_string(index) + " has a different layout");
}

}  // namespace

MomentSeries moments_from_samples(const std::vector<QoISeries>& samples)
{
  if (samples.size() < 2) throw ValidationError("moments: need at least 2 samples");
  const QoISeries& first = samples.front();
  const std::size_t nt = first.times.size();
  const Eigen::Index r = nt ? first.regional_avg.front().size() : 0;
  const double q = static_cast<double>(samples.size());

  MomentSeries m;
  m.times = first.times;
  m.num_samples = static_cast<long>(samples.size());
  m.global_mean.assign(nt, 0.0);
  m.global_var.assign(nt, 0.0);
  m.region_mean.assign(nt, Eigen::VectorXd::Zero(r));
  m.region_var.assign(nt, Eigen::VectorXd::Zero(r));

  // Mean shifted by the first sample, so identical samples give their value
  // exactly and the variance exactly zero.
  for (std::size_t s = 0; s < samples.size(); ++s) {
    check_shape(first, samples[s], s);
    for (std::size_t t = 0; t < nt; ++t) {
      m.global_mean[t] += samples[s].global_avg[t] - first.global_avg[t];
      m.region_mean[t] += samples[s].regional_avg[t] - first.regional_avg[t];
    }
  }
  for (std::size_t t = 0; t < nt; ++t) {
    m.global_mean[t] = first.global_avg[t] + m.global_mean[t] / q;
    m.region_mean[t] = first.regional_avg[t] + m.region_mean[t] / q;
  }
  for (const QoISeries& s : samples)
    for (std::size_t t = 0; t < nt; ++t) {
      const double dg = s.global_avg[t] - m.global_mean[t];
      m.global_var[t] += dg * dg;
      m.region_var[t] += (s.regional_avg[t] - m.region_mean[t]).cwiseAbs2();
    }
  for (std::size_t t = 0; t < nt; ++t) {
    m.global_var[t] /= q - 1.0;
    m.region_var[t] /= q - 1.0;
  }
  return m;
}

namespace {

std::vector<QoISeries> evaluate_samples(const QoIModel& model, const PosteriorSummary& post, long count,
                                        std::uint64_t base_seed, int threads)
{
  std::vector<QoISeries> out(static_cast<std::size_t>(count));
  parallel_for(out.size(), resolve_threads(threads), [&](std::size_t i) {
    const ParameterVector p = sample_parameters(post, i, base_seed);
    try {
      out[i] = model(p);
    } catch (const NumericalError& ex) {
      throw NumericalError("mc: model failed at sample " + std::to_string(i) + ": " + ex.what());
    }
  });
  return out;
}

}  // namespace

MomentSeries mc_estimate(const QoIModel& model, const PosteriorSummary& post, long count, std::uint64_t base_seed,
                         int threads)
{
  if (count < 2) throw ValidationError("mc_estimate: at least 2 samples required");
  return moments_from_samples(evaluate_samples(model, post, count, base_seed, threads));
}

std::vector<ErrorRow> moment_errors(const MomentSeries& estimate, const MomentSeries& reference,
                                    const Eigen::VectorXd& region_weights)
{
  if (estimate.times.size() != reference.times.size())
    throw ValidationError("moment_errors: estimate and reference report different time instances");
  std::vector<ErrorRow> rows;
  for (std::size_t t = 0; t < estimate.times.size(); ++t) {
    if (std::abs(estimate.times[t] - reference.times[t]) > 1e-9 * std::max(1.0, std::abs(reference.times[t])))
      throw ValidationError("moment_errors: time mismatch at row " + std::to_string(t));
    ErrorRow row;
    row.evaluations = estimate.num_samples;
    row.time = estimate.times[t];
    row.global_mean = std::abs(estimate.global_mean[t] - reference.global_mean[t]);
    row.global_var = std::abs(estimate.global_var[t] - reference.global_var[t]);
    row.lobe_mean = std::abs(lobe_average(estimate.region_mean[t] - reference.region_mean[t], region_weights));
    row.lobe_var = std::abs(lobe_average(estimate.region_var[t] - reference.region_var[t], region_weights));
    row.region_mean = (estimate.region_mean[t] - reference.region_mean[t]).cwiseAbs();
    row.region_var = (estimate.region_var[t] - reference.region_var[t]).cwiseAbs();
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<ErrorRow> mc_convergence(const QoIModel& model, const PosteriorSummary& post, const std::vector<long>& counts,
                                     const MomentSeries& reference, const Eigen::VectorXd& region_weights,
                                     std::uint64_t base_seed, int threads)
{
  if (counts.empty()) throw ValidationError("mc_convergence: no sample counts");
  for (std::size_t k = 0; k < counts.size(); ++k)
    if (counts[k] < 2 || (k && counts[k] <= counts[k - 1]))
      throw ValidationError("mc_convergence: counts must be increasing and >= 2");
  const std::vector<QoISeries> all = evaluate_samples(model, post, counts.back(), base_seed, threads);
  std::vector<ErrorRow> rows;
  for (long count : counts) {
    const std::vector<QoISeries> prefix(all.begin(), all.begin() + count);
    auto part = moment_errors(moments_from_samples(prefix), reference, region_weights);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  return rows;
}

double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y)
{
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("fit_loglog_slope: need >= 2 matching points");
  const std::size_t n = x.size();
  double sx = 0, sy = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (!(x[k] > 0.0) || !(y[k] > 0.0)) return std::nan("");
    sx += std::log(x[k]);
    sy += std::log(y[k]);
  }
  const double mx = sx / n, my = sy / n;
  double sxy = 0, sxx = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double dx = std::log(x[k]) - mx;
    sxy += dx * (std::log(y[k]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

void write_moments_csv(const MomentSeries& m, const Eigen::VectorXd& region_weights, const std::filesystem::path& path)
{
  const Eigen::Index r = m.region_mean.empty() ? 0 : m.region_mean.front().size();
  if (region_weights.size() != r) throw ValidationError("write_moments_csv: region weight length mismatch");
  csv::Writer w(path);
  std::vector<std::string> header{"time", "mean_global", "var_global", "mean_lobes", "var_lobes", "std_lobes"};
  for (Eigen::Index j = 0; j < r; ++j) header.push_back("mean_region_" + std::to_string(j + 1));
  for (Eigen::Index j = 0; j < r; ++j) header.push_back("var_region_" + std::to_string(j + 1));
  header.push_back("samples");
  w.header(header);
  for (std::size_t t = 0; t < m.times.size(); ++t) {
    std::vector<double> row{m.times[t],
                            m.global_mean[t],
                            m.global_var[t],
                            lobe_average(m.region_mean[t], region_weights),
                            lobe_average(m.region_var[t], region_weights),
                            lobe_average(m.region_var[t].cwiseSqrt(), region_weights)};
    row.insert(row.end(), m.region_mean[t].data(), m.region_mean[t].data() + r);
    row.insert(row.end(), m.region_var[t].data(), m.region_var[t].data() + r);
    row.push_back(static_cast<double>(m.num_samples));
    w.row(row);
  }
}

MomentSeries read_moments_csv(const std::filesystem::path& path)
{
  const csv::Table t = csv::read(path);
  int r = 0;
  while (t.has_column("mean_region_" + std::to_string(r + 1))) ++r;
  if (r == 0) throw ValidationError("moments: " + path.string() + " has no regional columns");
  MomentSeries m;
  const auto tc = t.column("time"), gm = t.column("mean_global"), gv = t.column("var_global");
  for (const auto& row : t.rows) {
    m.times.push_back(row[tc]);
    m.global_mean.push_back(row[gm]);
    m.global_var.push_back(row[gv]);
    Eigen::VectorXd mean(r), var(r);
    for (int j = 0; j < r; ++j) {
      mean[j] = row[t.column("mean_region_" + std::to_string(j + 1))];
      var[j] = row[t.column("var_region_" + std::to_string(j + 1))];
    }
    m.region_mean.push_back(mean);
    m.region_var.push_back(var);
  }
  if (t.has_column("samples") && !t.rows.empty()) m.num_samples = static_cast<long>(t.rows.front()[t.column("samples")]);
  return m;
}

void write_errors_csv(const std::vector<ErrorRow>& rows, const std::filesystem::path& path)
{
  const Eigen::Index r = rows.empty() ? 0 : rows.front().region_mean.size();
  csv::Writer w(path);
  std::vector<std::string> header{"level", "evaluations", "time", "err_mean_global", "err_var_global",
                                  "err_mean_lobes", "err_var_lobes"};
  for (Eigen::Index j = 0; j < r; ++j) header.push_back("err_mean_region_" + std::to_string(j + 1));
  for (Eigen::Index j = 0; j < r; ++j) header.push_back("err_var_region_" + std::to_string(j + 1));
  w.header(header);
  for (const ErrorRow& e : rows) {
    std::vector<double> row{static_cast<double>(e.level), static_cast<double>(e.evaluations), e.time,
                            e.global_mean, e.global_var, e.lobe_mean, e.lobe_var};
    row.insert(row.end(), e.region_mean.data(), e.region_mean.data() + r);
    row.insert(row.end(), e.region_var.data(), e.region_var.data() + r);
    w.row(row);
  }
}

}  // namespace fkuq
