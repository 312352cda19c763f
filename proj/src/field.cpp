#include "fkuq/field.hpp"

#include "fkuq/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <limits>

namespace fkuq {

PriorBounds::PriorBounds(Eigen::VectorXd lower, Eigen::VectorXd upper)
    : a(std::move(lower))
    , b(std::move(upper))
{
  if (a.size() != b.size()) throw ValidationError("prior: bound lengths differ");
  for (Eigen::Index l = 0; l < a.size(); ++l)
    if (!(a[l] < b[l])) throw ValidationError("prior: a_l < b_l violated for region " + std::to_string(l + 1));
}

std::vector<RegionRecord> load_region_records(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in) throw ValidationError("regions: cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
    std::vector<RegionRecord> out;
    for (const auto& jr : doc.at("regions")) {
      RegionRecord r;
      r.name = jr.value("name", std::string());
      auto num = [&](const char* key) {
        return jr.contains(key) && !jr.at(key).is_null() ? jr.at(key).get<double>()
                                                         : std::numeric_limits<double>::quiet_NaN();
      };
      r.a = num("a");
      r.b = num("b");
      r.mu = num("mu");
      r.var = num("var");
      out.push_back(r);
    }
    if (out.empty()) throw ValidationError("regions: " + path.string() + " lists no regions");
    return out;
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError("regions: parse failure in " + path.string() + ": " + ex.what());
  }
}

void save_region_records(const std::vector<RegionRecord>& records, const std::filesystem::path& path)
{
  nlohmann::json doc;
  doc["regions"] = nlohmann::json::array();
  for (const auto& r : records) {
    nlohmann::json jr;
    jr["name"] = r.name;
    auto put = [&](const char* key, double v) { jr[key] = std::isnan(v) ? nlohmann::json() : nlohmann::json(v); };
    put("a", r.a);
    put("b", r.b);
    put("mu", r.mu);
    put("var", r.var);
    doc["regions"].push_back(jr);
  }
  std::ofstream out(path);
  if (!out) throw ValidationError("regions: cannot write " + path.string());
  out << doc.dump(1) << '\n';
}

PriorBounds prior_from_records(const std::vector<RegionRecord>& records)
{
  Eigen::VectorXd a(records.size()), b(records.size());
  for (std::size_t l = 0; l < records.size(); ++l) {
    if (std::isnan(records[l].a) || std::isnan(records[l].b))
      throw ValidationError("prior: region " + std::to_string(l + 1) + " lacks bounds a/b");
    a[l] = records[l].a;
    b[l] = records[l].b;
  }
  return PriorBounds(a, b);
}

PosteriorSummary posterior_from_records(const std::vector<RegionRecord>& records)
{
  PosteriorSummary post{Eigen::VectorXd(records.size()), Eigen::VectorXd(records.size())};
  for (std::size_t l = 0; l < records.size(); ++l) {
    if (!std::isfinite(records[l].mu)) throw ValidationError("posterior: region " + std::to_string(l + 1) + " lacks mu");
    if (!(records[l].var > 0.0) || !std::isfinite(records[l].var))
      throw ValidationError("posterior: region " + std::to_string(l + 1) + " needs var > 0");
    post.mu[l] = records[l].mu;
    post.var[l] = records[l].var;
  }
  return post;
}

std::vector<RegionRecord> make_records(const std::vector<std::string>& names, const PriorBounds* prior,
                                       const PosteriorSummary* posterior)
{
  const std::size_t n = names.size();
  if (prior && static_cast<std::size_t>(prior->size()) != n) throw ValidationError("records: prior length mismatch");
  if (posterior && static_cast<std::size_t>(posterior->size()) != n)
    throw ValidationError("records: posterior length mismatch");
  std::vector<RegionRecord> out(n);
  for (std::size_t l = 0; l < n; ++l) {
    out[l].name = names[l];
    if (prior) {
      out[l].a = prior->a[l];
      out[l].b = prior->b[l];
    }
    if (posterior) {
      out[l].mu = posterior->mu[l];
      out[l].var = posterior->var[l];
    }
  }
  return out;
}

const std::vector<std::string>& lobe_names()
{
  static const std::vector<std::string> names = {"frontal",  "temporal",  "parietal",   "insular",
                                                  "limbic",   "occipital", "subcortical"};
  return names;
}

PriorBounds lobe_prior()
{
  Eigen::VectorXd a(7), b(7);
  a << -0.07, -0.11, -0.19, -0.15, -0.12, -0.19, -0.15;
  b << 0.43, 0.39, 0.31, 0.35, 0.38, 0.31, 0.35;
  return PriorBounds(a, b);
}

PosteriorSummary lobe_posterior()
{
  PosteriorSummary post{Eigen::VectorXd(7), Eigen::VectorXd(7)};
  post.mu << 0.1801, 0.1421, 0.0627, 0.1005, 0.1351, 0.0545, 0.1147;
  post.var << 0.0077, 0.0079, 0.0060, 0.0070, 0.0075, 0.0086, 0.0093;
  return post;
}

NodeField assemble_reaction_vector(const Connectome& g, const ParameterVector& p)
{
  if (p.size() != g.region_count())
    throw ValidationError("assemble_reaction_vector: parameter length " + std::to_string(p.size()) +
                          " does not match region count " + std::to_string(g.region_count()));
  NodeField alpha(g.node_count());
  for (const Node& n : g.nodes()) alpha[n.id] = p[n.region - 1];
  return alpha;
}

double log_prior(const ParameterVector& p, const PriorBounds& bounds)
{
  if (p.size() != bounds.size()) throw ValidationError("log_prior: length mismatch");
  for (Eigen::Index l = 0; l < p.size(); ++l)
    if (!(p[l] >= bounds.a[l] && p[l] <= bounds.b[l])) return -std::numeric_limits<double>::infinity();
  return 0.0;
}

double gaussian_logpdf(double y, double mu, double sigma)
{
  if (!(sigma > 0.0)) throw ValidationError("gaussian_logpdf: sigma must be positive");
  const double z = (y - mu) / sigma;
  return -0.5 * std::log(2.0 * M_PI) - std::log(sigma) - 0.5 * z * z;
}

}  // namespace fkuq
