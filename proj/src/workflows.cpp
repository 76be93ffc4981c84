#include "tailkit/workflows.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

#include "tailkit/common.hpp"
#include "tailkit/condex.hpp"
#include "tailkit/dependence.hpp"
#include "tailkit/gpd_gam.hpp"
#include "tailkit/marginal.hpp"
#include "tailkit/margins.hpp"
#include "tailkit/minproj.hpp"
#include "tailkit/resampling.hpp"
#include "tailkit/scoring.hpp"
#include "tailkit/synth.hpp"
#include "tailkit/threshold_select.hpp"

namespace tailkit {

using ojson = nlohmann::ordered_json;

Series ingest_csv(const std::string& path, bool calendar, const CalendarConfig& cal) {
  Series s = Series::read_csv(path);
  if (calendar) add_calendar_columns(s, cal);
  return s;
}

ojson groups_to_json(const std::vector<std::vector<int>>& groups) {
  ojson out = ojson::array();
  for (const auto& g : groups) {
    ojson jg = ojson::array();
    for (int site : g) jg.push_back(site + 1);
    out.push_back(std::move(jg));
  }
  return out;
}

std::vector<std::string> detect_site_columns(const Series& s) {
  std::vector<std::pair<int, std::string>> found;
  for (const auto& name : s.names()) {
    if (name.size() < 2 || name[0] != 'y') continue;
    bool digits = true;
    for (std::size_t i = 1; i < name.size(); ++i)
      if (!std::isdigit(static_cast<unsigned char>(name[i]))) digits = false;
    if (digits) found.emplace_back(std::stoi(name.substr(1)), name);
  }
  std::sort(found.begin(), found.end());
  std::vector<std::string> vars;
  for (const auto& [k, name] : found) vars.push_back(name);
  return vars;
}

std::vector<std::vector<int>> groups_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw std::invalid_argument("groups: expected an array of arrays");
  std::vector<std::vector<int>> out;
  for (const auto& jg : j) {
    if (!jg.is_array()) throw std::invalid_argument("groups: expected an array of arrays");
    std::vector<int> g;
    for (const auto& site : jg) {
      if (!site.is_number_integer() || site.get<int>() < 1)
        throw std::invalid_argument("groups: site ids are 1-based integers");
      g.push_back(site.get<int>() - 1);
    }
    out.push_back(std::move(g));
  }
  return out;
}

namespace {

// Reads one config key with a default and echoes the resolved value, so the
// output config block always lists every knob the run consulted.
template <typename T>
T cfg(const nlohmann::json& c, ojson& resolved, const char* key, const T& dflt) {
  T v = dflt;
  if (c.contains(key)) {
    try {
      v = c.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw std::invalid_argument(std::string("workflow config: bad value for '") +
                                  key + "'");
    }
  }
  resolved[key] = v;
  return v;
}

std::optional<double> cfg_opt(const nlohmann::json& c, ojson& resolved,
                              const char* key) {
  std::optional<double> v;
  if (c.contains(key) && !c.at(key).is_null()) {
    if (!c.at(key).is_number())
      throw std::invalid_argument(std::string("workflow config: bad value for '") +
                                  key + "'");
    v = c.at(key).get<double>();
  }
  resolved[key] = v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  return v;
}

FormulaTerm parse_single_term(const std::string& text) {
  const Formula f = Formula::parse("x ~ " + text);
  std::vector<FormulaTerm> terms;
  for (const auto& t : f.terms)
    if (t.kind != FormulaTerm::Kind::intercept) terms.push_back(t);
  if (terms.size() != 1)
    throw std::invalid_argument("workflow config: expected one term, got '" + text +
                                "'");
  return terms[0];
}

int spline_count(const Formula& f) {
  int nb = 0;
  for (const auto& t : f.terms)
    if (t.kind == FormulaTerm::Kind::spline) ++nb;
  return nb;
}

void append_warnings(std::vector<std::string>& into, const std::string& where,
                     const std::vector<std::string>& from) {
  for (const auto& w : from) into.push_back(where + ": " + w);
}

// ---------------------------------------------------------------------------
// Shared model chain for the univariate workflows: threshold choice by
// expected quantile discrepancy, forward selection of scale terms, final fit.

struct UniChain {
  Series data;
  bool synthetic = false;
  UnivariateData synth;
  std::string response;
  std::string stratum;
  std::uint64_t seed = 0;
  bool ran_eqd = false;
  EqdResult eqd;
  bool ran_selection = false;
  SelectionReport selection;
  double chosen_tau = 0.0;
  GpdFit fit;
  std::vector<std::string> warnings;
};

UniChain build_uni_chain(const nlohmann::json& c, ojson& resolved, ojson& seeds) {
  UniChain ch;
  const std::string path = cfg<std::string>(c, resolved, "data", "");
  ch.seed = cfg<std::uint64_t>(c, resolved, "seed", 1);
  const int n = cfg<int>(c, resolved, "n", 21000);
  CalendarConfig cal;
  cal.days_per_year = cfg<int>(c, resolved, "days_per_year", 300);
  cal.days_per_month = cfg<int>(c, resolved, "days_per_month", 25);
  ch.response = cfg<std::string>(c, resolved, "response", "y");
  ch.stratum = cfg<std::string>(c, resolved, "stratum", "season");
  const auto candidates =
      cfg(c, resolved, "tau_candidates", std::vector<double>{0.80, 0.85, 0.90});
  const int eqd_boot = cfg<int>(c, resolved, "eqd_boot", 100);
  const auto pool_text =
      cfg(c, resolved, "pool",
          std::vector<std::string>{"crs(wind, B=10)", "ind(season == 2)"});
  const int cv_folds = cfg<int>(c, resolved, "cv_folds", 5);
  const double lambda = cfg<double>(c, resolved, "lambda", 1.0);
  const std::string smoothing = cfg<std::string>(c, resolved, "smoothing", "cv");
  const int min_excesses = cfg<int>(c, resolved, "min_excesses", 50);
  const auto fixed_shape = cfg_opt(c, resolved, "fixed_shape");

  if (candidates.empty())
    throw std::invalid_argument("workflow config: tau_candidates must be non-empty");
  if (smoothing != "cv" && smoothing != "fixed")
    throw std::invalid_argument("workflow config: smoothing must be cv or fixed");

  seeds["data"] = ch.seed;
  seeds["eqd"] = ch.seed + 1;
  seeds["selection_cv"] = ch.seed + 2;
  seeds["smoothing_cv"] = ch.seed + 3;

  if (!path.empty()) {
    ch.data = ingest_csv(path, true, cal);
  } else {
    UnivariateConfig ucfg;
    ucfg.n = n;
    ucfg.calendar = cal;
    ch.synth = gen_univariate(ucfg, ch.seed);
    ch.data = ch.synth.table;
    ch.synthetic = true;
  }

  GpdGamSpec base;
  base.response = ch.response;
  base.threshold.kind = ThresholdKind::stepped;
  base.threshold.stratum_var = ch.stratum;
  base.scale = Formula::parse("scale ~ 1");
  base.fixed_shape = fixed_shape;
  base.smoothing.mode = SmoothingSpec::Mode::fixed;
  base.smoothing.fixed = {lambda};
  base.min_excesses = min_excesses;

  if (candidates.size() == 1) {
    ch.chosen_tau = candidates[0];
  } else {
    ch.ran_eqd = true;
    ch.eqd = eqd_select(ch.data, base, candidates, eqd_boot, ch.seed + 1);
    append_warnings(ch.warnings, "threshold", ch.eqd.warnings);
    if (ch.eqd.chosen_index < 0)
      throw FitError("threshold selection failed: no usable candidate level");
    ch.chosen_tau = ch.eqd.chosen_level;
  }
  base.threshold.tau = ch.chosen_tau;

  Formula final_scale = base.scale;
  if (!pool_text.empty()) {
    std::vector<FormulaTerm> pool;
    for (const auto& t : pool_text) pool.push_back(parse_single_term(t));
    ch.ran_selection = true;
    ch.selection = forward_select(ch.data, base, pool, cv_folds, ch.seed + 2);
    final_scale = Formula::parse(ch.selection.chosen);
  }

  GpdGamSpec final_spec = base;
  final_spec.scale = final_scale;
  if (smoothing == "cv") {
    final_spec.smoothing.mode = SmoothingSpec::Mode::cv_grid;
    final_spec.smoothing.cv_folds = cv_folds;
    final_spec.smoothing.cv_seed = ch.seed + 3;
  } else {
    final_spec.smoothing.fixed.assign(spline_count(final_scale), lambda);
  }
  ch.fit = fit_nonstationary_gpd(ch.data, final_spec);
  append_warnings(ch.warnings, "fit", ch.fit.warnings);
  return ch;
}

ojson eqd_json(const EqdResult& e) {
  ojson out;
  out["candidates"] = e.candidates;
  out["discrepancy"] = e.discrepancy;
  out["chosen"] = e.chosen_level;
  out["n_boot"] = e.n_boot;
  return out;
}

ojson selection_json(const SelectionReport& s) {
  ojson out;
  ojson entries = ojson::array();
  for (const auto& e : s.entries) {
    ojson je;
    je["formula"] = e.formula;
    je["crps"] = e.crps;
    je["delta_crps"] = e.delta_crps;
    je["aic"] = e.aic;
    je["bic"] = e.bic;
    je["accepted"] = e.accepted;
    entries.push_back(std::move(je));
  }
  out["entries"] = std::move(entries);
  out["chosen"] = s.chosen;
  return out;
}

ojson model_json(const GpdFit& fit) {
  ojson out;
  out["tau"] = fit.spec.threshold.tau;
  out["scale"] = fit.spec.scale.str();
  out["threshold_levels"] = fit.stepped.levels;
  out["threshold_values"] = fit.stepped.values;
  out["rates"] = fit.rates;
  out["shape"] = fit.shape;
  out["shape_se"] = fit.shape_se;
  out["shape_fixed"] = fit.shape_fixed;
  out["smoothing"] = fit.smoothing;
  out["edf"] = fit.edf;
  out["aic"] = fit.aic;
  out["bic"] = fit.bic;
  out["n_retained"] = fit.n_retained;
  out["n_excess"] = fit.n_excess;
  out["dropped_fraction"] = fit.dropped_fraction;
  return out;
}

// Rows usable for reporting: complete in the response, the threshold stratum,
// and every scale covariate (plus the truth covariates on synthetic data, so
// the generator's conditional quantile is computable at each reported row).
std::vector<int> report_rows(const UniChain& ch) {
  std::vector<std::string> need{ch.response};
  if (!ch.stratum.empty()) need.push_back(ch.stratum);
  for (const auto& v : ch.fit.spec.scale.variables()) need.push_back(v);
  if (ch.synthetic) {
    need.push_back("wind");
    need.push_back("season");
  }
  return ch.data.complete_rows(need);
}

// True marginal quantile of the generator over the realized covariate rows,
// by bisection on the mean conditional CDF.
double synth_marginal_quantile(const UnivariateData& sd, double p) {
  const Series& t = sd.table;
  const auto rows = t.complete_rows({"wind", "season"});
  if (rows.empty()) throw FitError("synthetic truth: no complete covariate rows");
  const auto cdf = [&](double y) {
    double acc = 0.0;
    for (int r : rows)
      acc += sd.truth.conditional_cdf(static_cast<int>(t.at(r, "season")),
                                      t.at(r, "wind"), y);
    return acc / static_cast<double>(rows.size());
  };
  double lo = 0.0;
  double hi = 1.0;
  for (const double v : sd.truth.config.season_threshold) hi = std::max(hi, v);
  int guard = 0;
  while (cdf(hi) < p) {
    hi *= 2.0;
    if (++guard > 200) throw NumericError("synthetic truth: quantile bracket failed");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (cdf(mid) < p ? lo : hi) = mid;
    if (hi - lo <= 1e-12 * std::max(1.0, std::abs(hi))) break;
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// c1: conditional 0.9999-quantiles with 50% bootstrap intervals.

ojson run_c1(const nlohmann::json& c) {
  ojson out;
  out["workflow"] = "c1";
  out["version"] = kToolVersion;
  ojson resolved;
  ojson seeds;
  UniChain ch = build_uni_chain(c, resolved, seeds);

  const double p = cfg<double>(c, resolved, "p", 0.9999);
  const int n_predict = cfg<int>(c, resolved, "n_predict", 100);
  const int n_boot = cfg<int>(c, resolved, "boot", 200);
  const int block = cfg<int>(c, resolved, "block", 50);
  const double ci = cfg<double>(c, resolved, "ci", 0.5);
  seeds["bootstrap"] = ch.seed + 4;
  out["config"] = std::move(resolved);
  out["seeds"] = std::move(seeds);

  std::vector<int> rows = report_rows(ch);
  if (static_cast<int>(rows.size()) > n_predict) rows.resize(n_predict);
  if (static_cast<int>(rows.size()) < n_predict)
    ch.warnings.push_back("predictions: only " + std::to_string(rows.size()) +
                          " usable rows");

  const auto estimator = [&rows, p](const GpdFit& refit, const Series& bdata) {
    std::vector<double> q;
    q.reserve(rows.size());
    for (int r : rows) q.push_back(refit.conditional_quantile(bdata, r, p));
    return q;
  };
  const BootstrapVectorEstimates boot = semiparametric_response_bootstrap_multi(
      ch.fit, ch.data, estimator, block, n_boot, ch.seed + 4);
  if (boot.estimates.empty())
    ch.warnings.push_back("bootstrap: every replicate failed");

  if (ch.ran_eqd) out["threshold"] = eqd_json(ch.eqd);
  if (ch.ran_selection) out["selection"] = selection_json(ch.selection);
  out["model"] = model_json(ch.fit);
  out["bootstrap"] = {{"n_boot", boot.n_requested},
                      {"n_failed", boot.n_failed},
                      {"block", boot.mean_block}};

  ojson preds = ojson::array();
  for (std::size_t j = 0; j < rows.size(); ++j) {
    ojson e;
    e["row"] = rows[j];
    e["point"] = ch.fit.conditional_quantile(ch.data, rows[j], p);
    if (!boot.estimates.empty()) {
      const auto iv = boot.central_interval(static_cast<int>(j), ci);
      e["lo50"] = iv.first;
      e["hi50"] = iv.second;
    } else {
      e["lo50"] = nullptr;
      e["hi50"] = nullptr;
    }
    if (ch.synthetic)
      e["truth"] = ch.synth.truth.conditional_quantile(
          static_cast<int>(ch.data.at(rows[j], "season")),
          ch.data.at(rows[j], "wind"), p);
    preds.push_back(std::move(e));
  }
  out["predictions"] = std::move(preds);
  if (ch.synthetic)
    out["truth"] = ojson::parse(ch.synth.truth.metadata_json());
  out["warnings"] = ch.warnings;
  return out;
}

// ---------------------------------------------------------------------------
// c2: marginal 1 - 1/60000 quantile after a loss-targeted refit.

ojson run_c2(const nlohmann::json& c) {
  ojson out;
  out["workflow"] = "c2";
  out["version"] = kToolVersion;
  ojson resolved;
  ojson seeds;
  UniChain ch = build_uni_chain(c, resolved, seeds);

  const double p = cfg<double>(c, resolved, "p", 1.0 - 1.0 / 60000.0);
  const double weight = cfg<double>(c, resolved, "loss_weight", 1.0);
  const int n_boot = cfg<int>(c, resolved, "boot", 200);
  const int block = cfg<int>(c, resolved, "block", 50);
  const double ci = cfg<double>(c, resolved, "ci", 0.95);
  seeds["bootstrap"] = ch.seed + 4;
  out["config"] = std::move(resolved);
  out["seeds"] = std::move(seeds);

  const GpdFit adjusted = loss_augmented_refit(ch.fit, ch.data, weight);
  const double point = marginal_quantile(adjusted, ch.data, p);
  const double unadjusted = marginal_quantile(ch.fit, ch.data, p);

  const auto estimator = [p, weight](const GpdFit& refit, const Series& bdata) {
    return marginal_quantile(loss_augmented_refit(refit, bdata, weight), bdata, p);
  };
  const BootstrapEstimates boot = semiparametric_response_bootstrap(
      ch.fit, ch.data, estimator, block, n_boot, ch.seed + 4);
  if (boot.estimates.empty())
    ch.warnings.push_back("bootstrap: every replicate failed");

  if (ch.ran_eqd) out["threshold"] = eqd_json(ch.eqd);
  if (ch.ran_selection) out["selection"] = selection_json(ch.selection);
  out["model"] = model_json(ch.fit);
  out["bootstrap"] = {{"n_boot", boot.n_requested},
                      {"n_failed", boot.n_failed},
                      {"block", boot.mean_block}};

  ojson q;
  q["p"] = p;
  q["point"] = point;
  q["unadjusted"] = unadjusted;
  if (!boot.estimates.empty()) {
    const auto iv = boot.central_interval(ci);
    q["lo"] = iv.first;
    q["hi"] = iv.second;
  } else {
    q["lo"] = nullptr;
    q["hi"] = nullptr;
  }
  if (ch.synthetic) q["truth"] = synth_marginal_quantile(ch.synth, p);
  out["quantile"] = std::move(q);

  // Published competition answer for this target, kept for side-by-side
  // reading; computed on data that are not distributed.
  out["reference"] = {{"estimate", 213.1},
                      {"interval", {209.3, 242.1}},
                      {"truth", 196.6}};
  out["warnings"] = ch.warnings;
  return out;
}

// ---------------------------------------------------------------------------
// c3: trivariate joint tail probabilities via the min-projection model.

ojson run_c3(const nlohmann::json& c) {
  ojson out;
  out["workflow"] = "c3";
  out["version"] = kToolVersion;
  ojson resolved;
  std::vector<std::string> warnings;

  const std::string path = cfg<std::string>(c, resolved, "data", "");
  const std::uint64_t seed = cfg<std::uint64_t>(c, resolved, "seed", 1);
  const int n = cfg<int>(c, resolved, "n", 21000);
  CalendarConfig cal;
  cal.days_per_year = cfg<int>(c, resolved, "days_per_year", 300);
  cal.days_per_month = cfg<int>(c, resolved, "days_per_month", 25);
  const std::string copula = cfg<std::string>(c, resolved, "copula", "gaussian");
  const double rho = cfg<double>(c, resolved, "rho", 0.5);
  const double theta = cfg<double>(c, resolved, "theta", 0.5);
  const double atmos_amp = cfg<double>(c, resolved, "atmos_amp", 0.0);
  const std::string margins = cfg<std::string>(c, resolved, "margins", "exponential");
  const auto vars =
      cfg(c, resolved, "vars", std::vector<std::string>{"y1", "y2", "y3"});
  const std::string atmos_var = cfg<std::string>(c, resolved, "atmos_var", "atmos");
  const std::string season_var = cfg<std::string>(c, resolved, "season_var", "season");
  const double season_level = cfg<double>(c, resolved, "season_level", 2.0);
  const int basis_dim = cfg<int>(c, resolved, "basis_dim", 10);
  const double tau = cfg<double>(c, resolved, "tau", 0.0);
  const auto tau_grid =
      cfg(c, resolved, "tau_grid", std::vector<double>{0.75, 0.80, 0.85, 0.90});
  const auto fixed_shape = cfg_opt(c, resolved, "fixed_shape");
  const double lambda = cfg<double>(c, resolved, "lambda", 0.1);
  const int min_excesses = cfg<int>(c, resolved, "min_excesses", 50);
  const int n_band = cfg<int>(c, resolved, "n_band", 200);

  if (margins != "exponential" && margins != "gumbel")
    throw std::invalid_argument("workflow config: margins must be exponential or gumbel");
  if (vars.empty()) throw std::invalid_argument("workflow config: vars must be non-empty");

  // Default joint-tail targets: every coordinate above 6, then the first two
  // above 7 with the last below its median.
  nlohmann::json parts_in;
  if (c.contains("parts")) {
    parts_in = c.at("parts");
  } else {
    const double median =
        margins == "gumbel" ? -std::log(std::log(2.0)) : std::log(2.0);
    parts_in = nlohmann::json::array();
    parts_in.push_back({{"levels", {6.0, 6.0, 6.0}}});
    parts_in.push_back(
        {{"levels", {7.0, 7.0, median}}, {"below", {false, false, true}}});
  }
  if (!parts_in.is_array() || parts_in.empty())
    throw std::invalid_argument("workflow config: parts must be a non-empty array");

  struct Part {
    std::vector<double> levels;
    std::vector<bool> below;
  };
  std::vector<Part> parts;
  ojson parts_echo = ojson::array();
  for (const auto& jp : parts_in) {
    Part p;
    p.levels = jp.at("levels").get<std::vector<double>>();
    p.below = jp.contains("below") ? jp.at("below").get<std::vector<bool>>()
                                   : std::vector<bool>(p.levels.size(), false);
    if (p.levels.size() != vars.size() || p.below.size() != vars.size())
      throw std::invalid_argument("workflow config: each part needs one level per variable");
    parts_echo.push_back({{"levels", p.levels}, {"below", p.below}});
    parts.push_back(std::move(p));
  }
  resolved["parts"] = std::move(parts_echo);

  ojson seeds;
  seeds["data"] = seed;
  ojson qq_seeds = ojson::array();
  for (std::size_t k = 0; k < parts.size(); ++k)
    qq_seeds.push_back(seed + 7 + static_cast<std::uint64_t>(k));
  seeds["qq"] = std::move(qq_seeds);
  out["config"] = std::move(resolved);
  out["seeds"] = std::move(seeds);

  Series data;
  bool synthetic = false;
  TrivariateData tsynth;
  if (!path.empty()) {
    data = ingest_csv(path, true, cal);
  } else {
    TrivariateConfig tcfg;
    tcfg.n = n;
    tcfg.calendar = cal;
    tcfg.copula = copula_from_string(copula);
    tcfg.rho = rho;
    tcfg.theta = theta;
    tcfg.atmos_amp = atmos_amp;
    tsynth = gen_trivariate(tcfg, seed);
    data = tsynth.table;
    synthetic = true;
  }
  for (const auto& v : vars) data.col_index(v);

  ojson jparts = ojson::array();
  std::vector<double> part_probs;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Part& part = parts[k];
    // Part-specific working columns on exponential margins, below-events
    // flipped into the upper tail.
    Series work = data;
    std::vector<std::string> z_names;
    std::vector<double> exp_levels(vars.size());
    for (std::size_t j = 0; j < vars.size(); ++j) {
      const auto& raw = data.col(vars[j]);
      std::vector<double> z(raw.size());
      for (std::size_t t = 0; t < raw.size(); ++t) {
        double v = raw[t];
        if (!std::isnan(v)) {
          if (margins == "gumbel")
            v = transform_margin(v, MarginScale::gumbel, MarginScale::exponential);
          if (part.below[j]) v = negate_third_margin(v);
        }
        z[t] = v;
      }
      double lv = part.levels[j];
      if (margins == "gumbel")
        lv = transform_margin(lv, MarginScale::gumbel, MarginScale::exponential);
      if (part.below[j]) lv = negate_third_margin(lv);
      exp_levels[j] = lv;
      const std::string name = "z" + std::to_string(j + 1);
      z_names.push_back(name);
      work.add_column(name, std::move(z));
    }
    const SimplexRay ray = make_ray(exp_levels);

    MinProjOptions opts;
    opts.z_vars = z_names;
    opts.atmos_var = work.has_column(atmos_var) ? atmos_var : "";
    opts.season_var = work.has_column(season_var) ? season_var : "";
    opts.season_level = season_level;
    opts.basis_dim = basis_dim;
    opts.fixed_shape = fixed_shape;
    opts.smoothing.mode = SmoothingSpec::Mode::fixed;
    opts.smoothing.fixed = {lambda};
    opts.min_excesses = min_excesses;

    ojson jp;
    jp["levels"] = part.levels;
    jp["below"] = part.below;
    jp["levels_exponential"] = exp_levels;
    jp["omega"] = ray.omega;
    jp["r"] = ray.r;

    MinProjFit fit;
    if (tau > 0.0) {
      opts.tau = tau;
      fit = fit_minproj(work, ray, opts);
    } else {
      const TauSweepResult sweep = select_tau_minproj(work, ray, opts, tau_grid);
      ojson jsweep = ojson::array();
      for (const auto& e : sweep.entries)
        jsweep.push_back({{"tau", e.tau}, {"qq_mad", e.qq_mad}, {"shape", e.shape}});
      jp["sweep"] = std::move(jsweep);
      fit = sweep.best;
    }
    append_warnings(warnings, "part " + std::to_string(k + 1), fit.gpd.warnings);

    const QqTable qq =
        minproj_qq(fit, n_band, seed + 7 + static_cast<std::uint64_t>(k));
    double mad = 0.0;
    for (std::size_t i = 0; i < qq.theoretical.size(); ++i)
      mad += std::abs(qq.empirical[i] - qq.theoretical[i]);
    if (!qq.theoretical.empty()) mad /= static_cast<double>(qq.theoretical.size());

    jp["tau"] = fit.tau;
    jp["qq_mad"] = mad;
    jp["shape"] = fit.shape;
    jp["shape_lo"] = fit.shape_lo;
    jp["shape_hi"] = fit.shape_hi;
    jp["n_excess"] = fit.gpd.n_excess;
    const double prob = joint_survivor_probability(fit);
    jp["probability"] = prob;
    part_probs.push_back(prob);
    jparts.push_back(std::move(jp));
  }
  out["parts"] = std::move(jparts);
  if (!part_probs.empty()) out["p1"] = part_probs[0];
  if (part_probs.size() > 1) out["p2"] = part_probs[1];
  if (synthetic) {
    out["truth"] = ojson::parse(tsynth.truth.metadata_json());
  }
  // Published competition answers for the standing targets (fixtures).
  out["reference"] = {{"p1", 1.480449e-5}, {"p2", 2.460666e-5}};
  out["warnings"] = warnings;
  return out;
}

// ---------------------------------------------------------------------------
// c4: cluster fifty sites, fit per-group conditional tail models, factorize.

ojson run_c4(const nlohmann::json& c) {
  ojson out;
  out["workflow"] = "c4";
  out["version"] = kToolVersion;
  ojson resolved;
  std::vector<std::string> warnings;

  const std::string path = cfg<std::string>(c, resolved, "data", "");
  const std::uint64_t seed = cfg<std::uint64_t>(c, resolved, "seed", 1);
  const int n = cfg<int>(c, resolved, "n", 10000);
  const auto rho = cfg(c, resolved, "rho", std::vector<double>{0.7});
  auto vars = cfg(c, resolved, "vars", std::vector<std::string>{});
  const std::string margins = cfg<std::string>(c, resolved, "margins", "exponential");
  const double u_chi = cfg<double>(c, resolved, "u_chi", 0.9);
  const double link = cfg<double>(c, resolved, "link", 0.25);
  // A given partition (1-based site ids) skips the clustering step.
  nlohmann::json groups_cfg = nullptr;
  if (c.contains("groups") && !c.at("groups").is_null()) groups_cfg = c.at("groups");
  resolved["groups"] = groups_cfg;
  const double u_quantile = cfg<double>(c, resolved, "u_quantile", 0.85);
  const int cond_index = cfg<int>(c, resolved, "cond_index", 0);
  const int days_per_year = cfg<int>(c, resolved, "days_per_year", 300);
  const int days_per_month = cfg<int>(c, resolved, "days_per_month", 25);
  const int n_year_sites = cfg<int>(c, resolved, "n_year_sites", 25);
  const int n_boot = cfg<int>(c, resolved, "boot", 100);
  const int n_sim_point = cfg<int>(c, resolved, "n_sim_point", 1000000);
  const int n_sim_boot = cfg<int>(c, resolved, "n_sim_boot", 30000);
  const double ci = cfg<double>(c, resolved, "ci", 0.95);

  if (margins != "exponential" && margins != "laplace" && margins != "ranks")
    throw std::invalid_argument(
        "workflow config: margins must be exponential, laplace, or ranks");

  Series data;
  bool synthetic = false;
  Grouped50Data gsynth;
  if (!path.empty()) {
    data = Series::read_csv(path);
  } else {
    Grouped50Config gcfg;
    gcfg.rho = rho;
    gcfg.n = n;
    gsynth = gen_grouped50(gcfg, seed);
    data = gsynth.table;
    synthetic = true;
  }
  if (vars.empty()) vars = detect_site_columns(data);
  if (vars.empty())
    throw std::invalid_argument("workflow config: no site columns found");
  const int d = static_cast<int>(vars.size());

  // Laplace-margin working table.
  Series lap;
  for (const auto& v : vars) {
    const auto& raw = data.col(v);
    std::vector<double> w(raw.size());
    if (margins == "ranks") {
      std::vector<double> obs;
      std::vector<int> idx;
      for (std::size_t t = 0; t < raw.size(); ++t)
        if (!std::isnan(raw[t])) {
          obs.push_back(raw[t]);
          idx.push_back(static_cast<int>(t));
        }
      const std::vector<double> u = ranks_to_uniform(obs);
      for (auto& x : w) x = std::nan("");
      for (std::size_t i = 0; i < idx.size(); ++i)
        w[idx[i]] = transform_margin(u[i], MarginScale::uniform, MarginScale::laplace);
    } else {
      const MarginScale from =
          margins == "laplace" ? MarginScale::laplace : MarginScale::exponential;
      for (std::size_t t = 0; t < raw.size(); ++t)
        w[t] = std::isnan(raw[t]) || from == MarginScale::laplace
                   ? raw[t]
                   : transform_margin(raw[t], from, MarginScale::laplace);
    }
    lap.add_column(v, std::move(w));
  }

  const Eigen::MatrixXd chi = chi_matrix(lap, vars, u_chi);
  std::vector<std::vector<int>> groups;
  if (!groups_cfg.is_null()) {
    groups = groups_from_json(groups_cfg);
    std::vector<int> seen(d, 0);
    for (const auto& g : groups)
      for (int site : g) {
        if (site < 0 || site >= d)
          throw std::invalid_argument("workflow config: group site id out of range");
        ++seen[site];
      }
    for (int site = 0; site < d; ++site)
      if (seen[site] != 1)
        throw std::invalid_argument("workflow config: groups must partition the sites");
  } else {
    groups = cluster_by_chi(chi, link).groups;
  }

  double within_min = 1.0;
  double between_max = 0.0;
  std::vector<int> group_of(d, -1);
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (int site : groups[g]) group_of[site] = static_cast<int>(g);
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      if (group_of[i] == group_of[j])
        within_min = std::min(within_min, chi(i, j));
      else
        between_max = std::max(between_max, chi(i, j));
    }

  const auto [s_year, s_month] = challenge_levels(days_per_year, days_per_month);
  const auto site_level_p1 = [&](int site) {
    return site < n_year_sites ? s_year : s_month;
  };

  ojson seeds;
  seeds["data"] = seed;
  ojson sp1 = ojson::array(), sp2 = ojson::array(), sb1 = ojson::array(),
        sb2 = ojson::array();
  for (std::size_t g = 0; g < groups.size(); ++g) {
    sp1.push_back(seed + 101 + 10 * g);
    sp2.push_back(seed + 102 + 10 * g);
    sb1.push_back(seed + 5001 + 1000 * g);
    sb2.push_back(seed + 6001 + 1000 * g);
  }
  seeds["p1_point"] = std::move(sp1);
  seeds["p2_point"] = std::move(sp2);
  seeds["p1_boot"] = std::move(sb1);
  seeds["p2_boot"] = std::move(sb2);
  out["config"] = std::move(resolved);
  out["seeds"] = std::move(seeds);

  out["chi"] = {{"u", u_chi},
                {"link", link},
                {"within_min", within_min},
                {"between_max", between_max}};
  out["groups"] = groups_to_json(groups);
  ojson group_names = ojson::array();
  for (const auto& g : groups) {
    ojson names = ojson::array();
    for (int site : g) names.push_back(vars[site]);
    group_names.push_back(std::move(names));
  }
  out["group_sites"] = std::move(group_names);
  out["levels"] = {{"year", s_year},
                   {"month", s_month},
                   {"n_year_sites", n_year_sites}};

  ojson per_group = ojson::array();
  std::vector<double> p1_vals, p2_vals;
  std::vector<std::vector<double>> p1_reps, p2_reps;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& sites = groups[g];
    if (cond_index < 0 || cond_index >= static_cast<int>(sites.size()))
      throw std::invalid_argument("workflow config: cond_index outside group " +
                                  std::to_string(g + 1));
    std::vector<std::string> gvars;
    std::vector<double> lev1, lev2;
    for (int site : sites) {
      gvars.push_back(vars[site]);
      lev1.push_back(site_level_p1(site));
      lev2.push_back(s_year);
    }
    const CondExtFit fit = fit_condext(lap, gvars, cond_index, u_quantile);
    append_warnings(warnings, "group " + std::to_string(g + 1), fit.warnings);

    const GroupProb g1 = group_exceedance_probability(
        fit, lev1, n_sim_point, seed + 101 + 10 * g);
    const GroupProb g2 = group_exceedance_probability(
        fit, lev2, n_sim_point, seed + 102 + 10 * g);
    const BootstrapEstimates b1 = parametric_bootstrap_condex(
        fit, lev1, n_boot, n_sim_boot, seed + 5001 + 1000 * g);
    const BootstrapEstimates b2 = parametric_bootstrap_condex(
        fit, lev2, n_boot, n_sim_boot, seed + 6001 + 1000 * g);
    p1_vals.push_back(g1.value);
    p2_vals.push_back(g2.value);
    p1_reps.push_back(b1.estimates);
    p2_reps.push_back(b2.estimates);

    ojson jg;
    jg["sites"] = ojson::array();
    for (int site : sites) jg["sites"].push_back(vars[site]);
    jg["cond_site"] = gvars[cond_index];
    jg["n_exceedances"] = fit.n_exceedances();
    jg["alpha"] = fit.alpha;
    jg["beta"] = fit.beta;
    const auto prob_json = [ci](const GroupProb& gp, const BootstrapEstimates& b) {
      ojson jp;
      jp["value"] = gp.value;
      jp["tail"] = gp.tail;
      jp["fraction"] = gp.fraction;
      jp["se"] = gp.se;
      if (!b.estimates.empty()) {
        const auto iv = b.central_interval(ci);
        jp["lo"] = iv.first;
        jp["hi"] = iv.second;
      } else {
        jp["lo"] = nullptr;
        jp["hi"] = nullptr;
      }
      jp["n_failed"] = b.n_failed;
      return jp;
    };
    jg["p1"] = prob_json(g1, b1);
    jg["p2"] = prob_json(g2, b2);
    per_group.push_back(std::move(jg));
  }
  out["per_group"] = std::move(per_group);

  // Replicate products across independent groups; surviving replicates are
  // paired by position, which is valid because the groups are independent.
  const auto product_ci = [&](const std::vector<double>& points,
                              const std::vector<std::vector<double>>& reps) {
    ojson jp;
    jp["value"] = factorized_probability(points);
    std::size_t m = reps.empty() ? 0 : reps[0].size();
    for (const auto& r : reps) m = std::min(m, r.size());
    if (m > 0) {
      std::vector<double> prod(m, 1.0);
      for (const auto& r : reps)
        for (std::size_t i = 0; i < m; ++i) prod[i] *= r[i];
      std::sort(prod.begin(), prod.end());
      const double a = 0.5 * (1.0 - ci);
      jp["lo"] = interp_quantile_sorted(prod, a);
      jp["hi"] = interp_quantile_sorted(prod, 1.0 - a);
      jp["n_replicates"] = m;
    } else {
      jp["lo"] = nullptr;
      jp["hi"] = nullptr;
      jp["n_replicates"] = 0;
    }
    return jp;
  };
  out["overall"] = {{"p1", product_ci(p1_vals, p1_reps)},
                    {"p2", product_ci(p2_vals, p2_reps)}};

  if (synthetic) out["truth"] = ojson::parse(gsynth.truth.metadata_json());

  // Published competition groups and answers (fixtures; 1-based site ids).
  out["reference"] = {
      {"groups",
       {{4, 14, 19, 28, 30, 38, 43, 44},
        {3, 10, 15, 18, 22, 29, 45, 47},
        {8, 21, 25, 26, 32, 33, 34, 40, 41, 42, 48, 49, 50},
        {1, 2, 5, 7, 9, 17, 20, 31, 46},
        {6, 11, 12, 13, 16, 23, 24, 27, 35, 36, 37, 39}}},
      {"p1",
       {{"estimate", 1.093634e-26}, {"interval", {2.149591e-36, 1.359469e-24}}}},
      {"p2",
       {{"estimate", 1.075787e-31}, {"interval", {1.596381e-46, 1.850425e-29}}}}};
  out["warnings"] = warnings;
  return out;
}

}  // namespace

ojson run_workflow(const std::string& name, const nlohmann::json& config) {
  if (!config.is_object() && !config.is_null())
    throw std::invalid_argument("run_workflow: config must be a JSON object");
  const nlohmann::json c = config.is_null() ? nlohmann::json::object() : config;
  if (name == "c1") return run_c1(c);
  if (name == "c2") return run_c2(c);
  if (name == "c3") return run_c3(c);
  if (name == "c4") return run_c4(c);
  throw std::invalid_argument("run_workflow: unknown workflow '" + name +
                              "' (expected c1, c2, c3, or c4)");
}

}  // namespace tailkit
