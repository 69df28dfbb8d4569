#include "chflow/cli_reports.hpp"

#include "chflow/flow_engine.hpp"
#include "chflow/frame_algebra.hpp"
#include "chflow/holder_interpolation.hpp"
#include "chflow/stability_analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

namespace chflow::reports {

namespace {

using json = nlohmann::ordered_json;

enum class Kind { Dimension, PositiveRational, PositiveReal, Real, UnitInterval, PositiveInt, Count, Stencil, RealList, Name };

struct Param {
  std::string key;
  std::string default_value;
  Kind kind;
  std::string help;
};

using ParamList = std::vector<Param>;

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return s;
}

double parse_real(const std::string& key, const std::string& text) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) throw ConfigError(key, "expected a real number, got '" + text + "'");
  return v;
}

long long parse_int(const std::string& key, const std::string& text) {
  long long v = 0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError(key, "expected an integer, got '" + text + "'");
  return v;
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_real(key, trim(item)));
  if (out.empty()) throw ConfigError(key, "expected a comma-separated list of reals");
  return out;
}

void check_value(const Param& p, const std::string& value) {
  switch (p.kind) {
    case Kind::Dimension:
      if (parse_int(p.key, value) < 1) throw ConfigError(p.key, "must be an integer >= 1");
      break;
    case Kind::PositiveRational: {
      Rational r;
      try {
        r = parse_rational(value);
      } catch (const std::exception&) {
        throw ConfigError(p.key, "expected a rational p/q, got '" + value + "'");
      }
      if (!(r > Rational(0))) throw ConfigError(p.key, "must be positive");
      break;
    }
    case Kind::PositiveReal:
      if (!(parse_real(p.key, value) > 0.0)) throw ConfigError(p.key, "must be positive");
      break;
    case Kind::Real:
      parse_real(p.key, value);
      break;
    case Kind::UnitInterval: {
      const double v = parse_real(p.key, value);
      if (!(v > 0.0 && v < 1.0)) throw ConfigError(p.key, "must lie in (0, 1)");
      break;
    }
    case Kind::PositiveInt:
      if (parse_int(p.key, value) < 1) throw ConfigError(p.key, "must be an integer >= 1");
      break;
    case Kind::Count:
      if (parse_int(p.key, value) < 0) throw ConfigError(p.key, "must be an integer >= 0");
      break;
    case Kind::Stencil: {
      const long long v = parse_int(p.key, value);
      if (v != 2 && v != 4) throw ConfigError(p.key, "must be 2 or 4");
      break;
    }
    case Kind::RealList:
      for (double v : parse_list(p.key, value))
        if (!(v > 0.0)) throw ConfigError(p.key, "entries must be positive");
      break;
    case Kind::Name:
      break;
  }
}

// ---------------------------------------------------------------------------
// Registry

struct Entry {
  ExperimentInfo info;
  std::function<ParamList(const std::string& mode)> params;
  std::function<Report(const ExperimentConfig&)> run;
};

const std::vector<Entry>& registry();

const Entry& find_entry(const std::string& name) {
  for (const Entry& e : registry())
    if (e.info.name == name) return e;
  throw ConfigError("experiment", "unknown experiment '" + name + "'");
}

// Typed access to resolved parameters.
class Args {
 public:
  explicit Args(const ExperimentConfig& config) : config_(config) {}
  const std::string& text(const std::string& key) const {
    const auto it = config_.parameters.find(key);
    if (it == config_.parameters.end()) throw ConfigError(key, "missing parameter");
    return it->second;
  }
  int integer(const std::string& key) const { return static_cast<int>(parse_int(key, text(key))); }
  double real(const std::string& key) const { return parse_real(key, text(key)); }
  Rational rational(const std::string& key) const { return parse_rational(text(key)); }
  std::vector<double> list(const std::string& key) const { return parse_list(key, text(key)); }
  std::uint64_t seed() const { return config_.seed; }

 private:
  const ExperimentConfig& config_;
};

std::string num(double v) { return format_number(v); }
std::string num(int v) { return std::to_string(v); }
std::string num(std::uint64_t v) { return std::to_string(v); }

json number_list(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(x);
  return a;
}

// ---------------------------------------------------------------------------
// curvature

ParamList curvature_params(const std::string&) {
  return {{"m", "2", Kind::Dimension, "complex dimension"},
          {"c", "4", Kind::PositiveRational, "holomorphic sectional curvature is -c (p/q accepted)"}};
}

Report run_curvature(const ExperimentConfig& config) {
  const Args a(config);
  const int m = a.integer("m");
  const Rational c = a.rational("c");
  const CurvatureMatrix block = block_R_gamma(m, c);
  const CurvatureMatrix brute = assemble_R_gamma_bruteforce(m, c);
  const std::vector<SpectralValue> spectrum = spectrum_R_gamma(m, c);
  const Eigen::VectorXd numeric = numeric_spectrum(block);
  const EinsteinConstants ec = einstein_constants(m, c);

  Report r;
  Table matrix{"r_gamma", {"row", "col", "value", "value_double"}, {}};
  bool exact_match = true;
  for (Eigen::Index i = 0; i < block.size(); ++i)
    for (Eigen::Index j = 0; j < block.size(); ++j) {
      const Rational& v = block.entries(i, j);
      exact_match = exact_match && brute.entries(i, j) == v;
      matrix.add({std::to_string(i + 1), std::to_string(j + 1), to_string(v), num(to_double(v))});
    }
  r.tables.push_back(std::move(matrix));

  Table spec{"spectrum", {"value", "value_double", "multiplicity"}, {}};
  std::vector<double> expanded;
  json values = json::array();
  for (const SpectralValue& s : spectrum) {
    spec.add({to_string(s.value), num(to_double(s.value)), std::to_string(s.multiplicity)});
    values.push_back({{"value", to_string(s.value)}, {"multiplicity", s.multiplicity}});
    for (int k = 0; k < s.multiplicity; ++k) expanded.push_back(to_double(s.value));
  }
  r.tables.push_back(std::move(spec));
  double deviation = 0.0;
  const double scale = numeric.cwiseAbs().maxCoeff();
  for (std::size_t k = 0; k < expanded.size() && k < static_cast<std::size_t>(numeric.size()); ++k)
    deviation = std::max(deviation, std::abs(numeric(static_cast<Eigen::Index>(k)) - expanded[k]) / scale);

  r.summary["m"] = m;
  r.summary["c"] = to_string(c);
  r.summary["dimension"] = block.size();
  r.summary["block_structure_exact"] = exact_match;
  r.summary["spectrum"] = values;
  r.summary["multiplicities_sum"] = static_cast<int>(expanded.size());
  r.summary["numeric_relative_deviation"] = deviation;
  r.summary["einstein_lambda"] = to_string(ec.lambda);
  r.summary["scalar_curvature"] = to_string(ec.scalar_curvature);
  r.summary["a_block_entry_sum"] = to_string(ec.a_block_entry_sum);
  r.summary["entry_sum_matches"] = ec.entry_sum_matches;
  r.summary["model_eigenvectors_hold"] = verify_model_eigenvectors(m).all_hold();
  return r;
}

// ---------------------------------------------------------------------------
// geometry

ParamList geometry_params(const std::string& mode) {
  if (mode == "volume")
    return {{"m", "1", Kind::Dimension, "complex dimension"},
            {"c", "1", Kind::PositiveRational, "curvature scale"},
            {"spacing", "0.05", Kind::PositiveReal, "grid spacing in normal coordinates"},
            {"radii", "0.5,1,1.5,2,2.5,3", Kind::RealList, "geodesic ball radii"}};
  return {{"m", "2", Kind::Dimension, "complex dimension"},
          {"c", "4", Kind::PositiveRational, "curvature scale"},
          {"spacings", "0.1,0.05,0.025", Kind::RealList, "difference steps, at least three"}};
}

Report run_geometry(const ExperimentConfig& config) {
  const Args a(config);
  const int m = a.integer("m");
  const double c = to_double(a.rational("c"));
  Report r;
  if (config.mode == "volume") {
    const std::vector<double> radii = a.list("radii");
    const double rmax = *std::max_element(radii.begin(), radii.end());
    auto chart = std::make_shared<GeodesicNormalChart>(m, c);
    const double h = a.real("spacing");
    const ChartGrid grid(chart, ChartGrid::Options{h, rmax + 2.0 * h, rmax + h, false});
    const VolumeGrowth v = volume_growth(grid, radii);
    Table t{"volume", {"radius", "volume", "exact_volume", "relative_error"}, {}};
    Series s{"log_volume", {}, {}};
    for (std::size_t k = 0; k < radii.size(); ++k) {
      t.add({num(radii[k]), num(v.volume[k]), num(v.exact_volume[k]),
             num(std::abs(v.volume[k] - v.exact_volume[k]) / v.exact_volume[k])});
      s.x.push_back(radii[k]);
      s.y.push_back(std::log(v.volume[k]));
    }
    r.tables.push_back(std::move(t));
    r.series.push_back(std::move(s));
    r.summary["exponent"] = v.exponent;
    r.summary["slopes"] = number_list(v.slope);
    r.summary["max_ratio"] = v.max_ratio;
    return r;
  }
  const std::vector<double> spacings = a.list("spacings");
  if (spacings.size() < 3) throw ConfigError("spacings", "needs at least three spacings");
  const CurvatureCrosscheck x = curvature_crosscheck(m, c, spacings, tabulated_components());
  Table t{"curvature", {"i", "j", "k", "l", "exact", "spacing", "numeric", "error", "order"}, {}};
  for (const CurvatureComponentRow& row : x.rows)
    for (std::size_t s = 0; s < spacings.size(); ++s)
      t.add({num(row.indices[0]), num(row.indices[1]), num(row.indices[2]), num(row.indices[3]), num(row.exact),
             num(spacings[s]), num(row.numeric[s]), num(row.error[s]),
             s == 0 ? std::string("") : num(row.order[s - 1])});
  r.tables.push_back(std::move(t));
  json errors = json::array();
  for (std::size_t s = 0; s < spacings.size(); ++s) errors.push_back(x.max_error_at(s));
  r.summary["max_error"] = errors;
  r.summary["min_order"] = x.min_order();
  r.summary["monotone"] = x.monotone;
  return r;
}

// ---------------------------------------------------------------------------
// stability

ParamList stability_params(const std::string& mode) {
  ParamList p{{"m", "2", Kind::Dimension, "complex dimension"},
              {"c", "4", Kind::PositiveRational, "curvature scale"},
              {"spacing", mode == "bochner" ? "0.05" : "0.1", Kind::PositiveReal, "grid spacing in ball coordinates"}};
  if (mode == "bochner") {
    p.push_back({"samples", "3", Kind::PositiveInt, "number of seeded fields"});
    p.push_back({"support", "0.55", Kind::PositiveReal, "bump cutoff radius in chart units"});
    p.push_back({"stencil", "4", Kind::Stencil, "difference order"});
  } else if (mode == "rayleigh") {
    p.push_back({"samples", "20", Kind::PositiveInt, "number of seeded fields"});
    p.push_back({"support", "0.35", Kind::PositiveReal, "bump cutoff radius in chart units"});
    p.push_back({"tolerance", "0.1", Kind::PositiveReal, "slack in units of c"});
  } else {
    p.push_back({"domain", "0.7", Kind::PositiveReal, "geodesic radius of the Dirichlet domain"});
    p.push_back({"support", "0.4", Kind::PositiveReal, "bump cutoff radius in chart units"});
    p.push_back({"t_end", "0.3", Kind::PositiveReal, "final time"});
    p.push_back({"sample_every", "10", Kind::PositiveInt, "steps between samples"});
  }
  return p;
}

BumpOptions stability_bumps(double support, bool wide) {
  BumpOptions o;
  o.cutoff_radius = support;
  if (wide) {
    o.center_radius = 0.15;
    o.min_width = 0.2;
    o.max_width = 0.3;
  } else {
    o.center_radius = 0.1;
    o.min_width = support >= 0.4 ? 0.15 : 0.12;
    o.max_width = support >= 0.4 ? 0.25 : 0.2;
  }
  return o;
}

Report run_stability(const ExperimentConfig& config) {
  const Args a(config);
  const int m = a.integer("m");
  const double c = to_double(a.rational("c"));
  const double h = a.real("spacing");
  Report r;
  if (config.mode == "bochner") {
    const double support = a.real("support");
    const StencilOrder order = a.integer("stencil") == 4 ? StencilOrder::Fourth : StencilOrder::Second;
    auto chart = std::make_shared<BergmanBallChart>(m, c);
    auto grid = std::make_shared<ChartGrid>(chart, ChartGrid::Options{h, support + 5.0 * h, 10.0, true});
    Table t{"identities",
            {"seed", "bochner_lhs", "bochner_rhs", "bochner_residual", "energy_lhs", "energy_rhs", "energy_residual"},
            {}};
    double worst_b = 0.0, worst_e = 0.0;
    for (int k = 0; k < a.integer("samples"); ++k) {
      const std::uint64_t seed = a.seed() + static_cast<std::uint64_t>(k);
      const SymTensorField f = sample_field(grid, random_bump_field(2 * m, stability_bumps(support, true), seed));
      const EnergyReport e = energy_terms(f, order);
      t.add({num(seed), num(e.bochner_lhs()), num(e.bochner_rhs()), num(e.bochner_residual()), num(e.energy_lhs()),
             num(e.energy_rhs()), num(e.energy_residual())});
      worst_b = std::max(worst_b, e.bochner_residual());
      worst_e = std::max(worst_e, e.energy_residual());
    }
    r.tables.push_back(std::move(t));
    r.summary["max_bochner_residual"] = worst_b;
    r.summary["max_energy_residual"] = worst_e;
    return r;
  }
  if (config.mode == "rayleigh") {
    const double support = a.real("support");
    auto chart = std::make_shared<BergmanBallChart>(m, c);
    auto grid = std::make_shared<ChartGrid>(chart, ChartGrid::Options{h, support + 5.0 * h, 10.0, true});
    const RayleighReport rep = rayleigh_bound_check(grid, a.integer("samples"), a.seed(),
                                                    stability_bumps(support, false), a.real("tolerance") * c);
    Table t{"quotients", {"seed", "quotient"}, {}};
    for (const RayleighSample& s : rep.samples) t.add({num(s.seed), num(s.quotient)});
    r.tables.push_back(std::move(t));
    r.summary["bound"] = rep.bound;
    r.summary["tolerance"] = rep.tolerance;
    r.summary["worst_quotient"] = rep.worst_quotient();
    r.summary["holds"] = rep.holds();
    return r;
  }
  auto grid = stability_grid(m, c, h, a.real("domain"));
  const SymTensorField h0 = sample_field(grid, random_bump_field(2 * m, stability_bumps(a.real("support"), false), a.seed()));
  LinearFlowOptions lo;
  lo.t_end = a.real("t_end");
  lo.sample_every = a.integer("sample_every");
  const DecayTrace tr = linearized_flow(h0, lo);
  Table t{"trace", {"t", "norm", "quotient"}, {}};
  Series s{"norm", tr.times, tr.norms};
  for (std::size_t k = 0; k < tr.times.size(); ++k) t.add({num(tr.times[k]), num(tr.norms[k]), num(tr.quotients[k])});
  r.tables.push_back(std::move(t));
  r.series.push_back(std::move(s));
  r.summary["fitted_rate"] = tr.fitted_rate;
  r.summary["quotient_rate"] = tr.quotient_rate;
  r.summary["rate_floor"] = tr.rate_floor;
  r.summary["dt"] = tr.dt;
  r.summary["dt_limit"] = tr.dt_limit;
  return r;
}

// ---------------------------------------------------------------------------
// flow

ParamList flow_params(const std::string& mode) {
  ParamList p{{"m", "2", Kind::Dimension, "complex dimension"},
              {"c", "4", Kind::PositiveRational, "curvature scale"}};
  if (mode == "fixed-point") {
    p.push_back({"spacings", "0.1,0.05", Kind::RealList, "grid spacings"});
    p.push_back({"radius", "0.4", Kind::PositiveReal, "geodesic radius of the grid"});
  } else if (mode == "linearization") {
    p.push_back({"spacing", "0.1", Kind::PositiveReal, "grid spacing"});
    p.push_back({"radius", "0.5", Kind::PositiveReal, "geodesic radius of the grid"});
    p.push_back({"support", "0.35", Kind::PositiveReal, "bump cutoff radius"});
    p.push_back({"steps", "0.01,0.005,0.0025", Kind::RealList, "decreasing difference steps"});
  } else {
    p.push_back({"spacing", "0.1", Kind::PositiveReal, "grid spacing"});
    p.push_back({"radius", "0.3", Kind::PositiveReal, "geodesic flow radius"});
    p.push_back({"support", "0.2", Kind::PositiveReal, "bump cutoff radius"});
    p.push_back({"amp", "0.01", Kind::PositiveReal, "perturbation amplitude (max norm)"});
    p.push_back({"t_end", "0.02", Kind::PositiveReal, "final time"});
    p.push_back({"tau", "1.5", Kind::PositiveReal, "weight of the sup norm, > m/2"});
    p.push_back({"epsilon", "0.1", Kind::UnitInterval, "admissibility floor"});
    p.push_back({"cfl", "0.5", Kind::UnitInterval, "fraction of the stability limit"});
    p.push_back({"sample_every", "5", Kind::PositiveInt, "steps between samples"});
  }
  return p;
}

BumpOptions flow_bumps(double support) {
  BumpOptions o;
  o.cutoff_radius = support;
  o.center_radius = 0.1;
  o.min_width = 0.15;
  o.max_width = 0.25;
  return o;
}

Report run_flow(const ExperimentConfig& config) {
  const Args a(config);
  const int m = a.integer("m");
  const double c = to_double(a.rational("c"));
  Report r;
  if (config.mode == "fixed-point") {
    Table t{"residual", {"spacing", "residual", "deturck", "order"}, {}};
    std::vector<double> res;
    const std::vector<double> spacings = a.list("spacings");
    for (double h : spacings) {
      const FlowOperator op(flow_grid(m, c, h, a.real("radius")));
      const SymTensorField q = op.q_apply(op.background());
      const SymTensorField d = op.deturck_term(op.background());
      res.push_back(q.values().cwiseAbs().maxCoeff());
      const std::string order =
          res.size() < 2 ? "" : num(std::log(res[res.size() - 2] / res.back()) / std::log(spacings[res.size() - 2] / h));
      t.add({num(h), num(res.back()), num(d.values().cwiseAbs().maxCoeff()), order});
    }
    r.tables.push_back(std::move(t));
    r.summary["residuals"] = number_list(res);
    return r;
  }
  const double h = a.real("spacing");
  if (config.mode == "linearization") {
    const FlowOperator op(flow_grid(m, c, h, a.real("radius")));
    const SymTensorField f = sample_field(op.grid_ptr(), random_bump_field(2 * m, flow_bumps(a.real("support")), a.seed()));
    const std::vector<double> steps = a.list("steps");
    const LinearizationReport rep = linearization_consistency(op, f, steps);
    Table t{"linearization", {"step", "error", "ratio"}, {}};
    const std::vector<double> ratios = rep.ratios();
    for (std::size_t k = 0; k < steps.size(); ++k)
      t.add({num(steps[k]), num(rep.errors[k]), k == 0 ? std::string("") : num(ratios[k - 1])});
    r.tables.push_back(std::move(t));
    r.series.push_back({"error", steps, rep.errors});
    r.summary["a_norm"] = rep.a_norm;
    r.summary["ratios"] = number_list(ratios);
    return r;
  }
  const double tau = a.real("tau");
  const FlowOperator op(flow_grid(m, c, h, a.real("radius")));
  SymTensorField f = sample_field(op.grid_ptr(), random_bump_field(2 * m, flow_bumps(a.real("support")), a.seed()));
  f *= a.real("amp") / f.values().cwiseAbs().maxCoeff();
  FlowConfig fc;
  fc.flow_radius = a.real("radius");
  fc.t_end = a.real("t_end");
  fc.tau = tau;
  fc.epsilon = a.real("epsilon");
  fc.cfl = a.real("cfl");
  fc.sample_every = a.integer("sample_every");
  const FlowTrace tr = evolve(op, MetricField(op.background().tensor() + f), fc);
  Table t{"trace", {"t", "l2", "weighted_sup", "floor"}, {}};
  Series s{"l2", {}, {}};
  for (const FlowSample& x : tr.samples) {
    t.add({num(x.t), num(x.l2), num(x.weighted_sup), num(x.floor)});
    s.x.push_back(x.t);
    s.y.push_back(x.l2);
  }
  r.tables.push_back(std::move(t));
  r.series.push_back(std::move(s));
  r.summary["fitted_rate"] = tr.fitted_rate;
  r.summary["fitted_sup_rate"] = tr.fitted_sup_rate;
  r.summary["rate_floor"] = tr.rate_floor;
  r.summary["steps"] = tr.steps;
  r.summary["dt"] = tr.dt;
  r.summary["min_dt_limit"] = tr.min_dt_limit;
  return r;
}

// ---------------------------------------------------------------------------
// norms

ParamList norms_params(const std::string& mode) {
  ParamList p{{"m", "1", Kind::Dimension, "complex dimension"},
              {"c", "1", Kind::PositiveRational, "curvature scale"},
              {"tau", "1", Kind::PositiveReal, "annulus weight, > m/2"}};
  if (mode == "weighted") {
    p.push_back({"k", "1", Kind::Count, "derivative order"});
    p.push_back({"alpha", "0.5", Kind::UnitInterval, "Hoelder exponent"});
    p.push_back({"spacing", "0.1", Kind::PositiveReal, "grid spacing"});
    p.push_back({"radius", "6", Kind::PositiveReal, "geodesic radius of the grid"});
    p.push_back({"support", "5", Kind::PositiveReal, "cutoff radius of the decaying field"});
    p.push_back({"pair_radius", "2", Kind::PositiveReal, "largest pair distance"});
    p.push_back({"pair_stride", "1", Kind::PositiveInt, "sublattice stride of pair offsets"});
  } else if (mode == "kfun" || mode == "interp") {
    p.push_back({"theta", "0.5", Kind::UnitInterval, "interpolation parameter"});
    p.push_back({"spacing", "0.05", Kind::PositiveReal, "grid spacing"});
    p.push_back({"radius", "3", Kind::PositiveReal, "geodesic radius of the grid"});
    p.push_back({"t_min", "0.01", Kind::PositiveReal, "smallest scale"});
    p.push_back({"t_max", "0.9", Kind::PositiveReal, "largest scale"});
    p.push_back({"count", "10", Kind::PositiveInt, "number of log-spaced scales"});
    if (mode == "kfun") {
      p.push_back({"width", "0.4", Kind::PositiveReal, "Gaussian width of the bump"});
    } else {
      p.push_back({"widths", "0.2,0.35,0.6", Kind::RealList, "Gaussian widths of the family"});
    }
  } else {
    p.push_back({"lambdas", "0.1,1,10,100", Kind::RealList, "resolvent parameters"});
    p.push_back({"direction", "0", Kind::Count, "coordinate direction"});
    p.push_back({"spacing", "0.05", Kind::PositiveReal, "grid spacing"});
    p.push_back({"radius", "6", Kind::PositiveReal, "geodesic radius of the grid"});
    p.push_back({"support", "5", Kind::PositiveReal, "cutoff radius of the decaying field"});
  }
  return p;
}

double cutoff(double r, double radius) {
  const double s = r / radius;
  return s < 1.0 ? std::pow(1.0 - s * s, 6) : 0.0;
}

// e^{-2 tau <r>} times a cutoff, shaped like the chart metric
SymTensorField decaying_field(const std::shared_ptr<const ChartGrid>& grid, double tau, double support) {
  SymTensorField h(grid);
  for (Eigen::Index k = 0; k < grid->size(); ++k) {
    if (!grid->inside(k) || grid->radius(k) >= support) continue;
    const SmallVector x = grid->point(k);
    const double r = x.norm();
    h.set(k, std::exp(-2.0 * tau * std::sqrt(1.0 + r * r)) * cutoff(r, support) * grid->chart().metric(x));
  }
  h.support_radius = support;
  return h;
}

// Gaussian of width w centred at 0.2 e_1 with seeded symmetric coefficients
SymTensorField gaussian_bump(const std::shared_ptr<const ChartGrid>& grid, double w, double support,
                             std::uint64_t seed) {
  const int n = grid->dim();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  SmallMatrix s(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) s(i, j) = s(j, i) = normal(rng);
  SmallVector centre = SmallVector::Zero(n);
  centre(0) = 0.2;
  SymTensorField h(grid);
  for (Eigen::Index k = 0; k < grid->size(); ++k) {
    if (!grid->inside(k) || grid->radius(k) >= support) continue;
    const SmallVector x = grid->point(k);
    h.set(k, std::exp(-(x - centre).squaredNorm() / (2.0 * w * w)) * cutoff(x.norm(), support) * s);
  }
  h.support_radius = support;
  return h;
}

Report run_norms(const ExperimentConfig& config) {
  const Args a(config);
  const int m = a.integer("m");
  const double c = to_double(a.rational("c"));
  const double tau = a.real("tau");
  Report r;
  if (config.mode == "weighted") {
    const HolderSpec spec{a.integer("k"), a.real("alpha")};
    if (spec.k > 2) throw ConfigError("k", "must be 0, 1 or 2");
    auto grid = holder_grid(m, c, a.real("spacing"), a.real("radius"));
    const SymTensorField f = decaying_field(grid, tau, a.real("support"));
    NormOptions opts;
    opts.pairs.radius = a.real("pair_radius");
    opts.pairs.stride = a.integer("pair_stride");
    opts.pairs.seed = a.seed();
    const WeightedNormReport rep = weighted_norm(f, spec, tau, opts);
    std::vector<std::string> cols{"annulus", "weight"};
    for (int q = 0; q <= spec.k; ++q) cols.push_back("sup_" + std::to_string(q));
    cols.push_back("holder");
    cols.push_back("weighted_total");
    Table t{"annuli", cols, {}};
    Series s{"weighted_total", {}, {}};
    for (const AnnulusSeminorms& an : rep.annuli) {
      std::vector<std::string> row{num(an.index), num(an.weight)};
      for (int q = 0; q <= spec.k; ++q) row.push_back(num(an.sup.col(q).maxCoeff()));
      row.push_back(num(an.holder.maxCoeff()));
      row.push_back(num(an.weighted_total));
      t.add(std::move(row));
      s.x.push_back(an.index);
      s.y.push_back(an.weighted_total);
    }
    r.tables.push_back(std::move(t));
    r.series.push_back(std::move(s));
    r.summary["total"] = rep.total();
    r.summary["sampled"] = rep.sampled;
    r.summary["tail_bound"] = rep.tail_bound;
    r.summary["resolved_radius"] = rep.resolved_radius;
    r.summary["truncation_index"] = rep.truncation_index;
    if (spec.k >= 1) {
      const SobolevReport sob = sobolev_embedding_check(f, spec, tau, 10.0, opts);
      r.summary["sobolev_integral"] = sob.integral;
      r.summary["sobolev_constant"] = sob.constant;
      r.summary["sobolev_holds"] = sob.holds();
    }
    return r;
  }
  if (config.mode == "kfun" || config.mode == "interp") {
    const HolderSpec x{0, 0.0}, y{1, 0.0};
    const double theta = a.real("theta");
    auto grid = holder_grid(m, c, a.real("spacing"), a.real("radius"));
    const double t_min = a.real("t_min"), t_max = a.real("t_max");
    if (!(t_max >= t_min)) throw ConfigError("t_max", "must not be below t_min");
    const std::vector<double> t = log_spaced(t_min, t_max, a.integer("count"));
    const double support = std::min(1.6, a.real("radius") - 1.4);
    if (config.mode == "kfun") {
      const SymTensorField f = gaussian_bump(grid, a.real("width"), support, a.seed());
      const KFunctionalCurve k = k_functional(f, x, y, tau, t);
      Table tab{"k_curve", {"t", "identity", "mollified", "bound", "a_norm", "b_norm", "c_t", "c_t_min", "c_t_max"}, {}};
      Series s{"k_curve", {}, {}};
      for (const KFunctionalSample& ks : k.samples) {
        tab.add({num(ks.t), num(ks.identity), num(ks.mollified), num(ks.bound()), num(ks.a_norm), num(ks.b_norm),
                 num(ks.c_t), num(ks.c_t_min), num(ks.c_t_max)});
        s.x.push_back(ks.t);
        s.y.push_back(ks.bound());
      }
      r.tables.push_back(std::move(tab));
      r.series.push_back(std::move(s));
      r.summary["t_max"] = k.t_max;
      r.summary["monotonicity_defect"] = k.monotonicity_defect();
      r.summary["concavity_defect"] = k.concavity_defect();
      r.summary["theta_norm"] = theta_norm(k, theta);
      return r;
    }
    std::vector<SymTensorField> family;
    const std::vector<double> widths = a.list("widths");
    for (double w : widths) family.push_back(gaussian_bump(grid, w, support, a.seed()));
    const EquivalenceReport eq = norm_equivalence(family, x, y, theta, tau, t);
    Table tab{"interpolation", {"width", "theta_norm", "x_norm", "y_norm", "ratio", "equivalence_ratio"}, {}};
    std::vector<double> ratios;
    for (std::size_t k = 0; k < family.size(); ++k) {
      const InterpolationReport ir = interp_inequality_check(family[k], x, y, theta, tau, t);
      ratios.push_back(ir.ratio());
      tab.add({num(widths[k]), num(ir.theta_norm), num(ir.x_norm), num(ir.y_norm), num(ir.ratio()), num(eq.ratios[k])});
    }
    r.tables.push_back(std::move(tab));
    const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
    r.summary["ratio_spread"] = *hi / *lo;
    r.summary["target_order"] = eq.target.order();
    r.summary["equivalence_constant"] = eq.constant();
    return r;
  }
  auto grid = holder_grid(m, c, a.real("spacing"), a.real("radius"));
  const int direction = a.integer("direction");
  if (direction >= 2 * m) throw ConfigError("direction", "must be below 2m");
  const SymTensorField f = decaying_field(grid, tau, a.real("support"));
  const ResolventReport rep = resolvent_bound_check(f, a.list("lambdas"), direction, tau);
  Table t{"resolvent", {"lambda", "ratio", "distance_to_h", "truncation_bound"}, {}};
  Series s{"ratio", {}, {}};
  for (const ResolventSample& x : rep.samples) {
    t.add({num(x.lambda), num(x.ratio), num(x.distance_to_h), num(x.truncation_bound)});
    s.x.push_back(x.lambda);
    s.y.push_back(x.ratio);
  }
  r.tables.push_back(std::move(t));
  r.series.push_back(std::move(s));
  r.summary["max_ratio"] = rep.max_ratio();
  return r;
}

const std::vector<Entry>& registry() {
  static const std::vector<Entry> entries{
      {{"curvature", {"spectrum"}, "curvature operator in the gamma basis, its spectrum and Einstein constants"},
       curvature_params,
       run_curvature},
      {{"geometry", {"curvature", "volume"}, "difference curvature at the origin or geodesic ball volumes"},
       geometry_params,
       run_geometry},
      {{"stability", {"bochner", "rayleigh", "linear-flow"}, "identities, Rayleigh quotients, linearized flow"},
       stability_params,
       run_stability},
      {{"flow", {"evolve", "fixed-point", "linearization"}, "nonlinear flow, background residual, linearization"},
       flow_params,
       run_flow},
      {{"norms", {"weighted", "kfun", "interp", "resolvent"}, "weighted Hoelder norms and interpolation"},
       norms_params,
       run_norms},
  };
  return entries;
}

const std::vector<std::string> kGlobalKeys{"seed", "format", "out", "config"};

}  // namespace

// ---------------------------------------------------------------------------

ConfigError::ConfigError(std::string key, const std::string& reason)
    : std::invalid_argument("invalid parameter '" + key + "': " + reason), key_(std::move(key)) {}

void ParameterSet::set(std::string key, std::string value) {
  key = lower(trim(key));
  if (key.empty()) throw ConfigError("", "empty parameter name");
  values_[key] = trim(value);
}

void ParameterSet::merge(const ParameterSet& other) {
  for (const auto& [k, v] : other.values_) values_[k] = v;
}

std::optional<std::string> ParameterSet::find(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

ParameterSet ParameterSet::from_text(std::string_view text) {
  ParameterSet p;
  std::istringstream in{std::string(text)};
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("config", "line " + std::to_string(number) + " is not key=value");
    p.set(t.substr(0, eq), t.substr(eq + 1));
  }
  return p;
}

ParameterSet ParameterSet::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

ParameterSet ParameterSet::from_tokens(const std::vector<std::string>& tokens) {
  ParameterSet p;
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    std::string t = tokens[k];
    const bool dashed = t.rfind("--", 0) == 0;
    if (dashed) t = t.substr(2);
    const auto eq = t.find('=');
    if (eq != std::string::npos) {
      p.set(t.substr(0, eq), t.substr(eq + 1));
    } else if (dashed && k + 1 < tokens.size()) {
      p.set(t, tokens[++k]);
    } else {
      throw ConfigError(t, "expected key=value");
    }
  }
  return p;
}

ParameterSet ParameterSet::from_environment(const char* const* environment, std::string_view prefix) {
  ParameterSet p;
  if (environment == nullptr) return p;
  for (const char* const* e = environment; *e != nullptr; ++e) {
    const std::string_view entry(*e);
    if (entry.substr(0, prefix.size()) != prefix) continue;
    const auto eq = entry.find('=');
    if (eq == std::string_view::npos || eq == prefix.size()) continue;
    p.set(std::string(entry.substr(prefix.size(), eq - prefix.size())), std::string(entry.substr(eq + 1)));
  }
  return p;
}

const std::vector<ExperimentInfo>& experiments() {
  static const std::vector<ExperimentInfo> infos = [] {
    std::vector<ExperimentInfo> v;
    for (const Entry& e : registry()) v.push_back(e.info);
    return v;
  }();
  return infos;
}

std::vector<ParameterInfo> parameters(const std::string& experiment, const std::string& mode) {
  std::vector<ParameterInfo> out;
  for (const Param& p : find_entry(experiment).params(mode)) out.push_back({p.key, p.default_value, p.help});
  return out;
}

ExperimentConfig resolve(const std::string& experiment, const std::string& mode, const ParameterSet& params) {
  const Entry& entry = find_entry(experiment);
  ExperimentConfig config;
  config.experiment = experiment;
  config.mode = mode.empty() ? entry.info.modes.front() : mode;
  if (std::find(entry.info.modes.begin(), entry.info.modes.end(), config.mode) == entry.info.modes.end())
    throw ConfigError("mode", "unknown mode '" + config.mode + "' for " + experiment);

  if (const auto s = params.find("seed")) {
    std::uint64_t v = 0;
    const char* end = s->data() + s->size();
    const auto [ptr, ec] = std::from_chars(s->data(), end, v);
    if (ec != std::errc() || ptr != end) throw ConfigError("seed", "expected an unsigned 64-bit integer");
    config.seed = v;
  }
  const std::string format = params.find("format").value_or("csv");
  if (format == "csv") {
    config.format = Format::Csv;
  } else if (format == "json") {
    config.format = Format::Json;
  } else {
    throw ConfigError("format", "must be csv or json");
  }
  config.out = params.find("out").value_or("chflow-out/" + experiment + "-" + config.mode);
  if (config.out.empty()) throw ConfigError("out", "empty output directory");

  const ParamList list = entry.params(config.mode);
  for (const auto& [key, value] : params.values()) {
    if (std::find(kGlobalKeys.begin(), kGlobalKeys.end(), key) != kGlobalKeys.end()) continue;
    if (std::none_of(list.begin(), list.end(), [&](const Param& p) { return p.key == key; }))
      throw ConfigError(key, "unknown parameter for " + experiment + " " + config.mode);
  }
  for (const Param& p : list) {
    const std::string value = params.find(p.key).value_or(p.default_value);
    check_value(p, value);
    config.parameters[p.key] = value;
  }
  const auto tau = config.parameters.find("tau");
  if (tau != config.parameters.end() && config.parameters.count("m") &&
      !(parse_real("tau", tau->second) > parse_int("m", config.parameters["m"]) / 2.0))
    throw ConfigError("tau", "must exceed m/2");
  return config;
}

void Table::add(std::vector<std::string> row) {
  if (row.size() != columns.size()) throw std::logic_error("row width does not match the columns of " + name);
  rows.push_back(std::move(row));
}

std::string Table::to_csv() const {
  std::string out;
  for (std::size_t k = 0; k < columns.size(); ++k) out += (k ? "," : "") + columns[k];
  out += '\n';
  for (const auto& row : rows) {
    for (std::size_t k = 0; k < row.size(); ++k) out += (k ? "," : "") + row[k];
    out += '\n';
  }
  return out;
}

nlohmann::ordered_json Table::to_json() const {
  json rows_json = json::array();
  for (const auto& row : rows) {
    json obj = json::object();
    for (std::size_t k = 0; k < row.size(); ++k) obj[columns[k]] = row[k];
    rows_json.push_back(std::move(obj));
  }
  return json{{"name", name}, {"columns", columns}, {"rows", rows_json}};
}

std::string Series::to_text() const {
  std::string out;
  for (std::size_t k = 0; k < x.size(); ++k) out += format_number(x[k]) + " " + format_number(y[k]) + "\n";
  return out;
}

Report run(const ExperimentConfig& config) { return find_entry(config.experiment).run(config); }

std::vector<std::string> write_artifacts(const ExperimentConfig& config, const Report& report) {
  std::filesystem::create_directories(config.out);
  std::vector<std::string> names;
  json files = json::array();
  auto emit = [&](const std::string& file, const std::string& kind, const std::string& content) {
    std::ofstream out(config.out / file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (config.out / file).string());
    out << content;
    names.push_back(file);
    files.push_back({{"name", file}, {"kind", kind}, {"bytes", content.size()}});
  };
  for (const Table& t : report.tables) {
    if (config.format == Format::Csv) {
      emit(t.name + ".csv", "table", t.to_csv());
    } else {
      emit(t.name + ".json", "table", t.to_json().dump(2) + "\n");
    }
  }
  for (const Series& s : report.series) emit(s.name + ".dat", "series", s.to_text());
  emit("summary.json", "summary", report.summary.dump(2) + "\n");

  json manifest{{"tool", kToolName},
                {"version", kVersion},
                {"experiment", config.experiment},
                {"mode", config.mode},
                {"seed", config.seed},
                {"format", config.format == Format::Csv ? "csv" : "json"},
                {"parameters", config.parameters},
                {"files", files}};
  std::ofstream out(config.out / "manifest.json", std::ios::binary);
  out << manifest.dump(2) << "\n";
  names.push_back("manifest.json");
  return names;
}

std::string format_number(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw std::logic_error("number formatting failed");
  return std::string(buf, ptr);
}

}  // namespace chflow::reports
