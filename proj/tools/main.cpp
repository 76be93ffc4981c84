#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
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
#include "tailkit/workflows.hpp"

using nlohmann::json;
using ojson = nlohmann::ordered_json;
using namespace tailkit;

namespace {

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  json j;
  in >> j;
  return j;
}

void emit(const ojson& result, const std::string& out_path) {
  const std::string text = result.dump(2) + "\n";
  if (out_path.empty()) {
    std::fwrite(text.data(), 1, text.size(), stdout);
  } else {
    std::ofstream f(out_path);
    if (!f) throw std::runtime_error("cannot open output file " + out_path);
    f << text;
  }
}

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (ch != ' ') {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<double> num_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& tok : split_list(s, ',')) out.push_back(std::stod(tok));
  return out;
}

std::vector<int> int_list(const std::string& s) {
  std::vector<int> out;
  for (const auto& tok : split_list(s, ',')) out.push_back(std::stoi(tok));
  return out;
}

int spline_count(const Formula& f) {
  int nb = 0;
  for (const auto& t : f.terms)
    if (t.kind == FormulaTerm::Kind::spline) ++nb;
  return nb;
}

FormulaTerm parse_single_term(const std::string& text) {
  const Formula f = Formula::parse("x ~ " + text);
  std::vector<FormulaTerm> terms;
  for (const auto& t : f.terms)
    if (t.kind != FormulaTerm::Kind::intercept) terms.push_back(t);
  if (terms.size() != 1)
    throw std::invalid_argument("expected one formula term, got '" + text + "'");
  return terms[0];
}

// Flags shared by every command that fits the exceedance model.
struct FitFlags {
  std::string data;
  std::string response = "y";
  std::string stratum = "season";
  std::string scale = "1";
  double tau = 0.85;
  std::optional<double> shape;
  double lambda = 1.0;
  bool cv = false;
  int folds = 5;
  int min_excesses = 50;
  int days_per_year = 300;
  int days_per_month = 25;
  std::uint64_t seed = 1;
};

void add_fit_flags(CLI::App* cmd, FitFlags& f) {
  cmd->add_option("--data", f.data, "input CSV")->required();
  cmd->add_option("--response", f.response, "response column");
  cmd->add_option("--stratum", f.stratum, "threshold stratum column ('' = single)");
  cmd->add_option("--scale", f.scale, "scale formula terms, e.g. '1 + crs(wind, B=10)'");
  cmd->add_option("--tau", f.tau, "threshold quantile level");
  cmd->add_option("--shape", f.shape, "pin the shape at this value");
  cmd->add_option("--lambda", f.lambda, "fixed smoothing penalty");
  cmd->add_flag("--cv", f.cv, "choose smoothing by cross-validation instead");
  cmd->add_option("--folds", f.folds, "CV fold count");
  cmd->add_option("--min-excesses", f.min_excesses, "minimum exceedance count");
  cmd->add_option("--days-year", f.days_per_year, "calendar days per year");
  cmd->add_option("--days-month", f.days_per_month, "calendar days per month");
  cmd->add_option("--seed", f.seed, "random seed");
}

Series load_fit_data(const FitFlags& f) {
  CalendarConfig cal;
  cal.days_per_year = f.days_per_year;
  cal.days_per_month = f.days_per_month;
  return ingest_csv(f.data, true, cal);
}

GpdGamSpec make_spec(const FitFlags& f) {
  GpdGamSpec spec;
  spec.response = f.response;
  spec.threshold.kind = ThresholdKind::stepped;
  spec.threshold.stratum_var = f.stratum;
  spec.threshold.tau = f.tau;
  spec.scale = Formula::parse("scale ~ " + f.scale);
  spec.fixed_shape = f.shape;
  spec.min_excesses = f.min_excesses;
  if (f.cv) {
    spec.smoothing.mode = SmoothingSpec::Mode::cv_grid;
    spec.smoothing.cv_folds = f.folds;
    spec.smoothing.cv_seed = f.seed;
  } else {
    spec.smoothing.mode = SmoothingSpec::Mode::fixed;
    // At least one entry so selection over spline candidates has a value to
    // recycle; unused when the formula has no spline blocks.
    spec.smoothing.fixed.assign(std::max(1, spline_count(spec.scale)), f.lambda);
  }
  return spec;
}

ojson fit_flags_json(const FitFlags& f) {
  ojson o;
  o["data"] = f.data;
  o["response"] = f.response;
  o["stratum"] = f.stratum;
  o["scale"] = f.scale;
  o["tau"] = f.tau;
  o["shape"] = f.shape ? json(*f.shape) : json(nullptr);
  o["lambda"] = f.lambda;
  o["cv"] = f.cv;
  o["folds"] = f.folds;
  o["min_excesses"] = f.min_excesses;
  o["days_year"] = f.days_per_year;
  o["days_month"] = f.days_per_month;
  o["seed"] = f.seed;
  return o;
}

ojson fit_json(const GpdFit& fit) {
  ojson o;
  o["tau"] = fit.spec.threshold.tau;
  o["scale"] = fit.spec.scale.str();
  o["threshold_levels"] = fit.stepped.levels;
  o["threshold_values"] = fit.stepped.values;
  o["rates"] = fit.rates;
  o["shape"] = fit.shape;
  o["shape_se"] = fit.shape_se;
  o["shape_fixed"] = fit.shape_fixed;
  o["smoothing"] = fit.smoothing;
  o["edf"] = fit.edf;
  o["loglik"] = fit.loglik;
  o["aic"] = fit.aic;
  o["bic"] = fit.bic;
  o["n_retained"] = fit.n_retained;
  o["n_excess"] = fit.n_excess;
  o["dropped_fraction"] = fit.dropped_fraction;
  return o;
}

ojson result_head(const char* command) {
  ojson o;
  o["command"] = command;
  o["version"] = kToolVersion;
  return o;
}

// ---------------------------------------------------------------------------

int cmd_synth(const std::string& kind, const std::string& config_path,
              std::uint64_t seed, const std::string& out_path) {
  const json c = load_config(config_path);
  Series table;
  std::string meta;
  if (kind == "univariate") {
    UnivariateConfig cfg;
    cfg.n = c.value("n", cfg.n);
    cfg.calendar.days_per_year = c.value("days_per_year", cfg.calendar.days_per_year);
    cfg.calendar.days_per_month = c.value("days_per_month", cfg.calendar.days_per_month);
    if (c.contains("season_threshold"))
      cfg.season_threshold = c.at("season_threshold").get<std::vector<double>>();
    cfg.exceed_prob = c.value("exceed_prob", cfg.exceed_prob);
    cfg.shape = c.value("shape", cfg.shape);
    cfg.scale_base = c.value("scale_base", cfg.scale_base);
    cfg.wind_amp = c.value("wind_amp", cfg.wind_amp);
    if (c.contains("season_log_scale"))
      cfg.season_log_scale = c.at("season_log_scale").get<std::vector<double>>();
    cfg.wind_phi = c.value("wind_phi", cfg.wind_phi);
    cfg.atmos_sd = c.value("atmos_sd", cfg.atmos_sd);
    cfg.missing_rate = c.value("missing_rate", cfg.missing_rate);
    UnivariateData d = gen_univariate(cfg, seed);
    table = std::move(d.table);
    meta = d.truth.metadata_json();
  } else if (kind == "trivariate") {
    TrivariateConfig cfg;
    cfg.n = c.value("n", cfg.n);
    cfg.calendar.days_per_year = c.value("days_per_year", cfg.calendar.days_per_year);
    cfg.calendar.days_per_month = c.value("days_per_month", cfg.calendar.days_per_month);
    if (c.contains("copula")) cfg.copula = copula_from_string(c.at("copula"));
    cfg.rho = c.value("rho", cfg.rho);
    cfg.theta = c.value("theta", cfg.theta);
    cfg.atmos_amp = c.value("atmos_amp", cfg.atmos_amp);
    cfg.atmos_sd = c.value("atmos_sd", cfg.atmos_sd);
    TrivariateData d = gen_trivariate(cfg, seed);
    table = std::move(d.table);
    meta = d.truth.metadata_json();
  } else if (kind == "grouped50") {
    Grouped50Config cfg;
    cfg.n = c.value("n", cfg.n);
    if (c.contains("groups")) cfg.groups = groups_from_json(c.at("groups"));
    if (c.contains("rho")) {
      if (c.at("rho").is_array())
        cfg.rho = c.at("rho").get<std::vector<double>>();
      else
        cfg.rho = {c.at("rho").get<double>()};
    }
    Grouped50Data d = gen_grouped50(cfg, seed);
    table = std::move(d.table);
    meta = d.truth.metadata_json();
  } else {
    throw std::invalid_argument("unknown generator kind: " + kind);
  }
  table.write_csv(out_path, meta);
  std::printf("wrote %d rows x %d columns to %s\n", table.n_rows(), table.n_cols(),
              out_path.c_str());
  return 0;
}

int cmd_transform(const std::string& data_path, const std::string& cols,
                  const std::string& from, const std::string& to,
                  const std::string& suffix, const std::string& out_path) {
  Series s = Series::read_csv(data_path);
  const MarginScale target = margin_scale_from_string(to);
  for (const auto& name : split_list(cols, ',')) {
    const auto& raw = s.col(name);
    std::vector<double> v(raw.size(), std::nan(""));
    if (from == "ranks") {
      std::vector<double> obs;
      std::vector<int> idx;
      for (std::size_t t = 0; t < raw.size(); ++t)
        if (!std::isnan(raw[t])) {
          obs.push_back(raw[t]);
          idx.push_back(static_cast<int>(t));
        }
      const std::vector<double> u = ranks_to_uniform(obs);
      for (std::size_t i = 0; i < idx.size(); ++i)
        v[idx[i]] = transform_margin(u[i], MarginScale::uniform, target);
    } else {
      const MarginScale source = margin_scale_from_string(from);
      for (std::size_t t = 0; t < raw.size(); ++t)
        if (!std::isnan(raw[t])) v[t] = transform_margin(raw[t], source, target);
    }
    s.add_column(name + suffix, std::move(v));
  }
  s.write_csv(out_path);
  std::printf("wrote %d rows x %d columns to %s\n", s.n_rows(), s.n_cols(),
              out_path.c_str());
  return 0;
}

int cmd_select_threshold(const FitFlags& f, const std::string& candidates,
                         int n_boot, const std::string& table_path,
                         const std::string& out_path) {
  const Series data = load_fit_data(f);
  const GpdGamSpec spec = make_spec(f);
  const std::vector<double> cand = num_list(candidates);
  const EqdResult eqd = eqd_select(data, spec, cand, n_boot, f.seed);

  ojson out = result_head("select-threshold");
  ojson opts = fit_flags_json(f);
  opts["candidates"] = cand;
  opts["boot"] = n_boot;
  out["options"] = std::move(opts);
  out["seeds"] = {{"eqd", f.seed}};
  out["candidates"] = eqd.candidates;
  out["discrepancy"] = eqd.discrepancy;
  out["usable"] = eqd.usable;
  out["chosen"] = eqd.chosen_level;
  out["warnings"] = eqd.warnings;
  emit(out, out_path);

  if (!table_path.empty()) {
    Series t;
    std::vector<double> usable(eqd.usable.size());
    for (std::size_t i = 0; i < eqd.usable.size(); ++i)
      usable[i] = eqd.usable[i] ? 1.0 : 0.0;
    t.add_column("candidate", eqd.candidates);
    t.add_column("discrepancy", eqd.discrepancy);
    t.add_column("usable", usable);
    t.write_csv(table_path);
  }
  return 0;
}

int cmd_fit_gpd(const FitFlags& f, const std::string& qq_path, int qq_band,
                const std::string& out_path) {
  const Series data = load_fit_data(f);
  const GpdFit fit = fit_nonstationary_gpd(data, make_spec(f));

  ojson out = result_head("fit-gpd");
  out["options"] = fit_flags_json(f);
  out["seeds"] = {{"qq_band", f.seed}};
  out["model"] = fit_json(fit);
  out["warnings"] = fit.warnings;
  emit(out, out_path);

  if (!qq_path.empty()) {
    const QqTable qq = exponential_qq(fit, data, qq_band, f.seed);
    Series t;
    t.add_column("theoretical", qq.theoretical);
    t.add_column("empirical", qq.empirical);
    t.add_column("band_lo", qq.band_lo);
    t.add_column("band_hi", qq.band_hi);
    t.write_csv(qq_path);
  }
  return 0;
}

int cmd_forward_select(const FitFlags& f, const std::string& pool_text,
                       const std::string& out_path) {
  const Series data = load_fit_data(f);
  const GpdGamSpec spec = make_spec(f);
  std::vector<FormulaTerm> pool;
  for (const auto& t : split_list(pool_text, ';')) pool.push_back(parse_single_term(t));
  const SelectionReport rep = forward_select(data, spec, pool, f.folds, f.seed);

  ojson out = result_head("forward-select");
  ojson opts = fit_flags_json(f);
  opts["pool"] = split_list(pool_text, ';');
  out["options"] = std::move(opts);
  out["seeds"] = {{"cv", f.seed}};
  ojson entries = ojson::array();
  for (const auto& e : rep.entries) {
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
  out["chosen"] = rep.chosen;
  out["warnings"] = json::array();
  emit(out, out_path);
  return 0;
}

int cmd_quantile(const FitFlags& f, const std::string& p_text,
                 const std::string& rows_text, bool marginal, double loss_weight,
                 int n_boot, int block, double ci, const std::string& out_path) {
  const Series data = load_fit_data(f);
  const GpdFit fit = fit_nonstationary_gpd(data, make_spec(f));
  const std::vector<double> ps = num_list(p_text);
  const GpdFit* model = &fit;
  GpdFit adjusted;
  if (loss_weight > 0.0) {
    adjusted = loss_augmented_refit(fit, data, loss_weight);
    model = &adjusted;
  }

  ojson out = result_head("quantile");
  ojson opts = fit_flags_json(f);
  opts["p"] = ps;
  opts["marginal"] = marginal;
  opts["loss_weight"] = loss_weight;
  opts["boot"] = n_boot;
  opts["block"] = block;
  opts["ci"] = ci;
  out["options"] = std::move(opts);
  out["seeds"] = {{"bootstrap", f.seed + 4}};
  out["model"] = fit_json(*model);

  std::vector<int> rows;
  if (!marginal) {
    if (rows_text.empty()) {
      rows = fit.retained_rows;
      if (rows.size() > 100) rows.resize(100);
    } else {
      rows = int_list(rows_text);
    }
    out["options"]["rows"] = rows;
  }

  // One estimate per (row, p) pair, rows outermost; marginal mode has no rows.
  const auto targets = [&](const GpdFit& m, const Series& d) {
    std::vector<double> v;
    if (marginal) {
      for (double p : ps) v.push_back(marginal_quantile(m, d, p));
    } else {
      for (int r : rows)
        for (double p : ps) v.push_back(m.conditional_quantile(d, r, p));
    }
    return v;
  };
  const std::vector<double> points = targets(*model, data);

  BootstrapVectorEstimates boot;
  if (n_boot > 0) {
    const auto estimator = [&](const GpdFit& refit, const Series& bdata) {
      if (loss_weight > 0.0)
        return targets(loss_augmented_refit(refit, bdata, loss_weight), bdata);
      return targets(refit, bdata);
    };
    boot = semiparametric_response_bootstrap_multi(fit, data, estimator, block,
                                                   n_boot, f.seed + 4);
    out["bootstrap"] = {{"n_boot", boot.n_requested},
                        {"n_failed", boot.n_failed},
                        {"block", boot.mean_block}};
  }

  ojson entries = ojson::array();
  for (std::size_t i = 0; i < points.size(); ++i) {
    ojson e;
    if (!marginal) e["row"] = rows[i / ps.size()];
    e["p"] = ps[i % ps.size()];
    e["point"] = points[i];
    if (n_boot > 0 && !boot.estimates.empty()) {
      const auto iv = boot.central_interval(static_cast<int>(i), ci);
      e["lo"] = iv.first;
      e["hi"] = iv.second;
    }
    entries.push_back(std::move(e));
  }
  out["entries"] = std::move(entries);
  out["warnings"] = json::array();
  emit(out, out_path);
  return 0;
}

int cmd_dep_measures(const std::string& data_path, const std::string& vars_text,
                     const std::string& measure, const std::string& u_text,
                     const std::string& omega_text, double level,
                     const std::string& slice_var, bool deciles, int bins,
                     int n_boot, std::uint64_t seed, const std::string& table_path,
                     const std::string& out_path) {
  const Series data = Series::read_csv(data_path);
  const std::vector<std::string> vars = split_list(vars_text, ',');
  const std::vector<double> us = num_list(u_text);
  std::vector<double> omega =
      omega_text.empty()
          ? std::vector<double>(vars.size(), 1.0 / static_cast<double>(vars.size()))
          : num_list(omega_text);

  ojson out = result_head("dep-measures");
  out["options"] = {{"data", data_path}, {"vars", vars},     {"measure", measure},
                    {"u", us},           {"omega", omega},   {"level", level},
                    {"slice", slice_var}, {"deciles", deciles}, {"bins", bins},
                    {"boot", n_boot},    {"seed", seed}};
  out["seeds"] = {{"bootstrap", seed}};
  std::vector<std::string> warnings;

  const auto dep_json = [](const DepEstimate& e) {
    ojson o;
    o["value"] = e.value;
    o["n_used"] = e.n_used;
    o["n_tail"] = e.n_tail;
    o["sparse"] = e.sparse;
    return o;
  };

  if (slice_var.empty()) {
    ojson est = ojson::array();
    for (double u : us) {
      ojson e;
      e["u"] = u;
      if (measure == "chi" || measure == "all") {
        const DepEstimate c = chi_u(data, vars, u);
        e["chi"] = dep_json(c);
        for (const auto& w : c.warnings) warnings.push_back("chi: " + w);
      }
      if (measure == "eta" || measure == "all") {
        const DepEstimate c = eta_u(data, vars, u);
        e["eta"] = dep_json(c);
        for (const auto& w : c.warnings) warnings.push_back("eta: " + w);
      }
      est.push_back(std::move(e));
    }
    out["estimates"] = std::move(est);
    if (measure == "lambda" || measure == "all") {
      const DepEstimate l = hill_lambda(data, vars, omega, level);
      ojson jl = dep_json(l);
      jl["level"] = level;
      jl["lower_bounded"] = l.lower_bounded;
      out["lambda"] = std::move(jl);
      for (const auto& w : l.warnings) warnings.push_back("lambda: " + w);
    }
    out["warnings"] = warnings;
    emit(out, out_path);
    return 0;
  }

  // Sliced mode: per-slice estimates with bootstrap replicates, long-format
  // table suitable for boxplots.
  SliceSpec slice;
  slice.var = slice_var;
  slice.deciles = deciles;
  slice.n_bins = bins;
  std::vector<DepSummary> sums;
  if (measure == "chi") {
    sums = sliced_chi(data, {vars}, us.at(0), slice, n_boot, seed);
  } else if (measure == "lambda") {
    sums = sliced_lambda(data, vars, {omega}, level, slice, n_boot, seed);
  } else {
    throw std::invalid_argument("sliced mode needs --measure chi or lambda");
  }
  ojson js = ojson::array();
  for (const auto& s : sums) {
    ojson e;
    e["slice"] = s.slice;
    e["measure"] = s.measure;
    e["estimate"] = s.estimate;
    e["n_rows"] = s.n_rows;
    e["replicates"] = s.replicates;
    js.push_back(std::move(e));
    for (const auto& w : s.warnings) warnings.push_back(s.slice + ": " + w);
  }
  out["slices"] = std::move(js);
  out["warnings"] = warnings;
  emit(out, out_path);

  if (!table_path.empty()) {
    // Long format: the point estimate is replicate -1, bootstrap draws 0..B-1.
    Series t;
    std::vector<double> col_slice, col_rep, col_val;
    for (std::size_t i = 0; i < sums.size(); ++i) {
      col_slice.push_back(static_cast<double>(i));
      col_rep.push_back(-1.0);
      col_val.push_back(sums[i].estimate);
      for (std::size_t r = 0; r < sums[i].replicates.size(); ++r) {
        col_slice.push_back(static_cast<double>(i));
        col_rep.push_back(static_cast<double>(r));
        col_val.push_back(sums[i].replicates[r]);
      }
    }
    t.add_column("slice_index", col_slice);
    t.add_column("replicate", col_rep);
    t.add_column("value", col_val);
    t.write_csv(table_path);
  }
  return 0;
}

int cmd_cluster(const std::string& data_path, const std::string& vars_text,
                double u, double link, const std::string& matrix_path,
                const std::string& out_path) {
  const Series data = Series::read_csv(data_path);
  std::vector<std::string> vars = vars_text.empty() ? detect_site_columns(data)
                                                    : split_list(vars_text, ',');
  if (vars.empty()) throw std::invalid_argument("no site columns found");
  const Eigen::MatrixXd chi = chi_matrix(data, vars, u);
  const ClusterResult cl = cluster_by_chi(chi, link);

  const int d = static_cast<int>(vars.size());
  std::vector<int> group_of(d, -1);
  for (std::size_t g = 0; g < cl.groups.size(); ++g)
    for (int site : cl.groups[g]) group_of[site] = static_cast<int>(g);
  double within_min = 1.0, between_max = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j)
      (group_of[i] == group_of[j] ? within_min = std::min(within_min, chi(i, j))
                                  : between_max = std::max(between_max, chi(i, j)));

  ojson out = result_head("cluster");
  out["options"] = {{"data", data_path}, {"vars", vars}, {"u", u}, {"link", link}};
  out["chi"] = {{"u", u},
                {"link", link},
                {"within_min", within_min},
                {"between_max", between_max}};
  out["groups"] = groups_to_json(cl.groups);
  ojson names = ojson::array();
  for (const auto& g : cl.groups) {
    ojson jn = ojson::array();
    for (int site : g) jn.push_back(vars[site]);
    names.push_back(std::move(jn));
  }
  out["group_sites"] = std::move(names);
  out["warnings"] = json::array();
  emit(out, out_path);

  if (!matrix_path.empty()) {
    Series t;
    std::vector<double> site_idx(d);
    for (int i = 0; i < d; ++i) site_idx[i] = i + 1.0;
    t.add_column("site", site_idx);
    for (int j = 0; j < d; ++j) {
      std::vector<double> col(d);
      for (int i = 0; i < d; ++i) col[i] = chi(i, j);
      t.add_column(vars[j], std::move(col));
    }
    t.write_csv(matrix_path);
  }
  return 0;
}

// ---------------------------------------------------------------------------

int main_impl(int argc, char** argv) {
  CLI::App app{"tail risk toolkit: extreme quantiles and joint exceedance "
               "probabilities from non-stationary environmental data"};
  app.require_subcommand(1);

  // synth
  auto* c_synth = app.add_subcommand("synth", "generate known-truth data");
  std::string synth_kind, synth_config, synth_out;
  std::uint64_t synth_seed = 1;
  c_synth->add_option("kind", synth_kind, "univariate | trivariate | grouped50")
      ->required();
  c_synth->add_option("--config", synth_config, "generator config JSON");
  c_synth->add_option("--seed", synth_seed, "random seed");
  c_synth->add_option("-o,--out", synth_out, "output CSV")->required();

  // transform
  auto* c_tr = app.add_subcommand("transform", "margin transforms of columns");
  std::string tr_data, tr_cols, tr_from = "ranks", tr_to = "laplace",
              tr_suffix = "_t", tr_out;
  c_tr->add_option("--data", tr_data, "input CSV")->required();
  c_tr->add_option("--cols", tr_cols, "comma-separated columns")->required();
  c_tr->add_option("--from", tr_from, "ranks | uniform | exponential | gumbel | laplace");
  c_tr->add_option("--to", tr_to, "uniform | exponential | gumbel | laplace");
  c_tr->add_option("--suffix", tr_suffix, "suffix for transformed columns");
  c_tr->add_option("-o,--out", tr_out, "output CSV")->required();

  // select-threshold
  auto* c_sel = app.add_subcommand("select-threshold",
                                   "threshold choice by expected quantile discrepancy");
  FitFlags sel_flags;
  std::string sel_cand = "0.80,0.85,0.90", sel_table, sel_out;
  int sel_boot = 100;
  add_fit_flags(c_sel, sel_flags);
  c_sel->add_option("--candidates", sel_cand, "comma-separated quantile levels");
  c_sel->add_option("--boot", sel_boot, "bootstrap samples per candidate");
  c_sel->add_option("--table", sel_table, "write candidate/discrepancy CSV here");
  c_sel->add_option("-o,--out", sel_out, "output JSON (default stdout)");

  // fit-gpd
  auto* c_fit = app.add_subcommand("fit-gpd", "fit the exceedance model");
  FitFlags fit_flags;
  std::string fit_qq, fit_out;
  int fit_qq_band = 200;
  add_fit_flags(c_fit, fit_flags);
  c_fit->add_option("--qq", fit_qq, "write exponential QQ table CSV here");
  c_fit->add_option("--qq-band", fit_qq_band, "QQ band sample count");
  c_fit->add_option("-o,--out", fit_out, "output JSON (default stdout)");

  // forward-select
  auto* c_fwd = app.add_subcommand("forward-select",
                                   "greedy scale-term selection by CV score");
  FitFlags fwd_flags;
  std::string fwd_pool = "crs(wind, B=10);ind(season == 2)", fwd_out;
  add_fit_flags(c_fwd, fwd_flags);
  c_fwd->add_option("--pool", fwd_pool, "semicolon-separated candidate terms");
  c_fwd->add_option("-o,--out", fwd_out, "output JSON (default stdout)");

  // quantile
  auto* c_q = app.add_subcommand("quantile", "conditional or marginal quantiles");
  FitFlags q_flags;
  std::string q_p = "0.9999", q_rows, q_out;
  bool q_marginal = false;
  double q_loss = 0.0, q_ci = 0.95;
  int q_boot = 0, q_block = 50;
  add_fit_flags(c_q, q_flags);
  c_q->add_option("--p", q_p, "comma-separated probability levels");
  c_q->add_option("--rows", q_rows, "comma-separated row indices (default: first 100 retained)");
  c_q->add_flag("--marginal", q_marginal, "marginal quantiles over the covariate rows");
  c_q->add_option("--loss-weight", q_loss, "loss-targeted refit weight (0 = off)");
  c_q->add_option("--boot", q_boot, "bootstrap replicates (0 = no intervals)");
  c_q->add_option("--block", q_block, "mean bootstrap block length");
  c_q->add_option("--ci", q_ci, "central interval level");
  c_q->add_option("-o,--out", q_out, "output JSON (default stdout)");

  // dep-measures
  auto* c_dep = app.add_subcommand("dep-measures", "chi / eta / tail decay rate");
  std::string dep_data, dep_vars, dep_measure = "all", dep_u = "0.95", dep_omega,
              dep_slice, dep_table, dep_out;
  double dep_level = 0.95;
  bool dep_deciles = false;
  int dep_bins = 10, dep_boot = 0;
  std::uint64_t dep_seed = 1;
  c_dep->add_option("--data", dep_data, "input CSV")->required();
  c_dep->add_option("--vars", dep_vars, "comma-separated columns")->required();
  c_dep->add_option("--measure", dep_measure, "chi | eta | lambda | all");
  c_dep->add_option("--u", dep_u, "comma-separated levels for chi/eta");
  c_dep->add_option("--omega", dep_omega, "projection weights for lambda (default equal)");
  c_dep->add_option("--level", dep_level, "projection threshold quantile for lambda");
  c_dep->add_option("--slice", dep_slice, "slice column (per-slice estimates)");
  c_dep->add_flag("--deciles", dep_deciles, "slice into rank deciles");
  c_dep->add_option("--bins", dep_bins, "decile bin count");
  c_dep->add_option("--boot", dep_boot, "bootstrap replicates per slice");
  c_dep->add_option("--seed", dep_seed, "random seed");
  c_dep->add_option("--table", dep_table, "write long-format replicate CSV here");
  c_dep->add_option("-o,--out", dep_out, "output JSON (default stdout)");

  // cluster
  auto* c_cl = app.add_subcommand("cluster", "group sites by pairwise chi");
  std::string cl_data, cl_vars, cl_matrix, cl_out;
  double cl_u = 0.9, cl_link = 0.25;
  c_cl->add_option("--data", cl_data, "input CSV")->required();
  c_cl->add_option("--vars", cl_vars, "comma-separated columns (default y1, y2, ...)");
  c_cl->add_option("--u", cl_u, "chi level");
  c_cl->add_option("--link", cl_link, "edge threshold for connected components");
  c_cl->add_option("--matrix", cl_matrix, "write chi matrix CSV here");
  c_cl->add_option("-o,--out", cl_out, "output JSON (default stdout)");

  // joint-prob
  auto* c_jp = app.add_subcommand("joint-prob", "rare joint exceedance probabilities");
  c_jp->require_subcommand(1);
  auto* c_mp = c_jp->add_subcommand("minproj", "min-projection route");
  std::string mp_data, mp_vars = "y1,y2,y3", mp_levels, mp_below,
              mp_margins = "exponential", mp_atmos = "atmos", mp_season = "season",
              mp_grid = "0.75,0.80,0.85,0.90", mp_out;
  double mp_tau = 0.0, mp_season_level = 2.0, mp_lambda = 0.1;
  std::optional<double> mp_shape;
  int mp_basis = 10, mp_min_exc = 50;
  std::uint64_t mp_seed = 1;
  c_mp->add_option("--data", mp_data, "input CSV")->required();
  c_mp->add_option("--vars", mp_vars, "comma-separated coordinate columns");
  c_mp->add_option("--levels", mp_levels, "per-coordinate levels")->required();
  c_mp->add_option("--below", mp_below, "per-coordinate 0/1 below-event flags");
  c_mp->add_option("--margins", mp_margins, "exponential | gumbel");
  c_mp->add_option("--tau", mp_tau, "threshold quantile (0 = sweep the grid)");
  c_mp->add_option("--tau-grid", mp_grid, "sweep grid");
  c_mp->add_option("--atmos-var", mp_atmos, "atmosphere column ('' = none)");
  c_mp->add_option("--season-var", mp_season, "season column ('' = none)");
  c_mp->add_option("--season-level", mp_season_level, "season step level");
  c_mp->add_option("--basis", mp_basis, "spline basis size");
  c_mp->add_option("--shape", mp_shape, "pin the shape at this value");
  c_mp->add_option("--lambda", mp_lambda, "fixed smoothing penalty");
  c_mp->add_option("--min-excesses", mp_min_exc, "minimum exceedance count");
  c_mp->add_option("--seed", mp_seed, "random seed");
  c_mp->add_option("-o,--out", mp_out, "output JSON (default stdout)");

  auto* c_cx = c_jp->add_subcommand("condex", "conditional-extremes route");
  std::string cx_data, cx_vars, cx_groups, cx_levels = "mixed",
              cx_margins = "exponential", cx_out;
  double cx_uq = 0.85, cx_ci = 0.95;
  int cx_cond = 0, cx_nys = 25, cx_dy = 300, cx_dm = 25, cx_boot = 100,
      cx_nsim = 1000000, cx_nsim_boot = 30000;
  std::uint64_t cx_seed = 1;
  c_cx->add_option("--data", cx_data, "input CSV")->required();
  c_cx->add_option("--vars", cx_vars, "comma-separated site columns (default y1, y2, ...)");
  c_cx->add_option("--groups", cx_groups,
                   "group partition JSON (1-based site ids; default: cluster first)");
  c_cx->add_option("--levels", cx_levels, "year | month | mixed");
  c_cx->add_option("--n-year-sites", cx_nys, "mixed mode: leading sites at the year level");
  c_cx->add_option("--margins", cx_margins, "exponential | laplace | ranks");
  c_cx->add_option("--u-quantile", cx_uq, "conditioning threshold quantile");
  c_cx->add_option("--cond-index", cx_cond, "conditioning position within each group");
  c_cx->add_option("--days-year", cx_dy, "calendar days per year");
  c_cx->add_option("--days-month", cx_dm, "calendar days per month");
  c_cx->add_option("--boot", cx_boot, "parametric bootstrap replicates");
  c_cx->add_option("--n-sim", cx_nsim, "simulation draws for point estimates");
  c_cx->add_option("--n-sim-boot", cx_nsim_boot, "simulation draws per bootstrap replicate");
  c_cx->add_option("--ci", cx_ci, "central interval level");
  c_cx->add_option("--seed", cx_seed, "random seed");
  c_cx->add_option("-o,--out", cx_out, "output JSON (default stdout)");

  // run
  auto* c_run = app.add_subcommand("run", "standing workflows c1..c4");
  std::string run_name, run_config, run_out;
  std::optional<std::uint64_t> run_seed;
  std::optional<int> run_boot;
  std::optional<double> run_tau;
  c_run->add_option("name", run_name, "c1 | c2 | c3 | c4")->required();
  c_run->add_option("--config", run_config, "workflow config JSON file");
  c_run->add_option("--seed", run_seed, "override the config seed");
  c_run->add_option("--boot", run_boot, "override the bootstrap replicate count");
  c_run->add_option("--tau", run_tau, "override the threshold level");
  c_run->add_option("-o,--out", run_out, "output JSON (default stdout)");

  CLI11_PARSE(app, argc, argv);

  if (c_synth->parsed())
    return cmd_synth(synth_kind, synth_config, synth_seed, synth_out);
  if (c_tr->parsed())
    return cmd_transform(tr_data, tr_cols, tr_from, tr_to, tr_suffix, tr_out);
  if (c_sel->parsed())
    return cmd_select_threshold(sel_flags, sel_cand, sel_boot, sel_table, sel_out);
  if (c_fit->parsed()) return cmd_fit_gpd(fit_flags, fit_qq, fit_qq_band, fit_out);
  if (c_fwd->parsed()) return cmd_forward_select(fwd_flags, fwd_pool, fwd_out);
  if (c_q->parsed())
    return cmd_quantile(q_flags, q_p, q_rows, q_marginal, q_loss, q_boot, q_block,
                        q_ci, q_out);
  if (c_dep->parsed())
    return cmd_dep_measures(dep_data, dep_vars, dep_measure, dep_u, dep_omega,
                            dep_level, dep_slice, dep_deciles, dep_bins, dep_boot,
                            dep_seed, dep_table, dep_out);
  if (c_cl->parsed())
    return cmd_cluster(cl_data, cl_vars, cl_u, cl_link, cl_matrix, cl_out);

  if (c_mp->parsed()) {
    json cfg;
    cfg["data"] = mp_data;
    cfg["seed"] = mp_seed;
    cfg["vars"] = split_list(mp_vars, ',');
    cfg["margins"] = mp_margins;
    cfg["atmos_var"] = mp_atmos;
    cfg["season_var"] = mp_season;
    cfg["season_level"] = mp_season_level;
    cfg["basis_dim"] = mp_basis;
    cfg["tau"] = mp_tau;
    cfg["tau_grid"] = num_list(mp_grid);
    if (mp_shape) cfg["fixed_shape"] = *mp_shape;
    cfg["lambda"] = mp_lambda;
    cfg["min_excesses"] = mp_min_exc;
    json part;
    part["levels"] = num_list(mp_levels);
    if (!mp_below.empty()) {
      json below = json::array();
      for (int b : int_list(mp_below)) below.push_back(b != 0);
      part["below"] = below;
    }
    cfg["parts"] = json::array({part});
    emit(run_workflow("c3", cfg), mp_out);
    return 0;
  }
  if (c_cx->parsed()) {
    json cfg;
    cfg["data"] = cx_data;
    cfg["seed"] = cx_seed;
    if (!cx_vars.empty()) cfg["vars"] = split_list(cx_vars, ',');
    if (!cx_groups.empty()) {
      const json gj = load_config(cx_groups);
      cfg["groups"] = gj.is_object() && gj.contains("groups") ? gj.at("groups") : gj;
    }
    cfg["margins"] = cx_margins;
    cfg["u_quantile"] = cx_uq;
    cfg["cond_index"] = cx_cond;
    cfg["days_per_year"] = cx_dy;
    cfg["days_per_month"] = cx_dm;
    if (cx_levels == "year")
      cfg["n_year_sites"] = 1000000;
    else if (cx_levels == "month")
      cfg["n_year_sites"] = 0;
    else if (cx_levels == "mixed")
      cfg["n_year_sites"] = cx_nys;
    else
      throw std::invalid_argument("unknown levels mode: " + cx_levels);
    cfg["boot"] = cx_boot;
    cfg["n_sim_point"] = cx_nsim;
    cfg["n_sim_boot"] = cx_nsim_boot;
    cfg["ci"] = cx_ci;
    emit(run_workflow("c4", cfg), cx_out);
    return 0;
  }
  if (c_run->parsed()) {
    json cfg = load_config(run_config);
    if (run_seed) cfg["seed"] = *run_seed;
    if (run_boot) cfg["boot"] = *run_boot;
    if (run_tau) {
      if (run_name == "c3")
        cfg["tau"] = *run_tau;
      else if (run_name == "c4")
        cfg["u_quantile"] = *run_tau;
      else
        cfg["tau_candidates"] = json::array({*run_tau});
    }
    emit(run_workflow(run_name, cfg), run_out);
    return 0;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return main_impl(argc, argv);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
