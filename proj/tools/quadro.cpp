// quadro command-line tool: simulate two-class elliptical data, fit sparse
// quadratic projections by Rayleigh-quotient maximization, evaluate them on
// data, cross-validate the penalty pair, and expose the ground-truth oracles.
//
// Exit codes: 0 success, 2 input/configuration error, 3 estimation error,
// 4 solver error (including failure to converge).

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "quadro/classify.hpp"
#include "quadro/errors.hpp"
#include "quadro/estimate.hpp"
#include "quadro/io.hpp"
#include "quadro/moments.hpp"
#include "quadro/oracle.hpp"
#include "quadro/solve.hpp"
#include "quadro/types.hpp"

namespace {

using nlohmann::json;
using namespace quadro;

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitEstimation = 3;
constexpr int kExitSolver = 4;

int fail(const std::exception& e, int code) {
  std::cerr << "error: " << e.what() << "\n";
  return code;
}

std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double_strict(const std::string& s, const std::string& what) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = begin + s.size();
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc{} || res.ptr != end || s.empty() ||
      !std::isfinite(v)) {
    throw InvalidConfig(what + " is not a finite number: \"" + s + "\"");
  }
  return v;
}

std::vector<double> parse_double_list(const std::string& s,
                                      const std::string& what) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    std::size_t end = s.find(',', pos);
    if (end == std::string::npos) end = s.size();
    out.push_back(parse_double_strict(s.substr(pos, end - pos), what));
    pos = end + 1;
    if (end == s.size()) break;
  }
  if (out.empty()) throw InvalidConfig(what + " must list at least one value");
  return out;
}

// ---------------------------------------------------------------------------
// Presets

TwoClassModel preset_model(const std::string& name) {
  if (name == "figure1") {
    Vector mu0 = Vector::Zero(2);
    Vector mu1(2);
    mu1 << 1.28, 0.8;
    Matrix s0 = Matrix::Identity(2, 2);
    Matrix s1 = Matrix::Zero(2, 2);
    s1(0, 0) = 3.0;
    s1(1, 1) = 1.0 / 3.0;
    return make_two_class_model(0.55, make_class_model(mu0, s0, 0.0),
                                make_class_model(mu1, s1, 0.0));
  }
  if (name == "sparse-d10") {
    const int d = 10;
    Vector mu0 = Vector::Zero(d);
    Vector mu1 = Vector::Zero(d);
    mu1(0) = 0.8;  // feature 1
    mu1(2) = 0.6;  // feature 3
    Matrix s0 = Matrix::Identity(d, d);
    Matrix s1 = Matrix::Identity(d, d);
    s1(4, 4) = 3.0;  // feature 5
    return make_two_class_model(0.5, make_class_model(mu0, s0, 0.0),
                                make_class_model(mu1, s1, 0.0));
  }
  throw InvalidSpec("unknown preset \"" + name +
                    "\" (available: figure1, sparse-d10)");
}

TwoClassModel resolve_model(const std::string& preset,
                            const std::string& model_path) {
  if (preset.empty() == model_path.empty()) {
    throw InvalidSpec("provide exactly one of --preset and --model");
  }
  if (!preset.empty()) return preset_model(preset);
  return model_from_json(load_json_file(model_path));
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOpts {
  std::string preset;
  std::string model_path;
  std::string out = "sim";
  std::int64_t n = 0;
  std::uint64_t seed = 0;
};

double canonical(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

EllipticalSampler make_sampler(const ClassModel& c) {
  if (c.kappa == 0.0) return EllipticalSampler(c, SampleFamily::gaussian);
  if (c.kappa > 0.0) {
    // Student t with df = 4 + 2/kappa has exactly this kurtosis parameter.
    return EllipticalSampler(c, SampleFamily::student_t, 4.0 + 2.0 / c.kappa);
  }
  throw InvalidSpec(
      "no generator for negative kurtosis parameters; use kappa >= 0");
}

int cmd_simulate(const SimulateOpts& o) {
  TwoClassModel model;
  std::vector<EllipticalSampler> samplers;
  try {
    model = resolve_model(o.preset, o.model_path);
    if (o.n < 2) throw InvalidSpec("--n must be at least 2");
    samplers.push_back(make_sampler(model.class0));
    samplers.push_back(make_sampler(model.class1));
  } catch (const std::exception& e) {
    return fail(e, kExitInput);
  }

  const auto d = model.dim();
  Matrix x(o.n, d);
  IntVector y(o.n);
  std::mt19937_64 rng(o.seed);
  for (std::int64_t i = 0; i < o.n; ++i) {
    const int label = canonical(rng) < model.pi ? 0 : 1;
    y(i) = label;
    x.row(i) = samplers[static_cast<std::size_t>(label)].draw(rng).transpose();
  }

  try {
    write_matrix_csv(o.out + "_X.csv", x);
    write_labels_csv(o.out + "_y.csv", y);
  } catch (const std::exception& e) {
    return fail(e, kExitInput);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// shared fit/cv configuration

struct EstimatorFlags {
  std::string estimator = "sample";
  std::string kurtosis = "auto";
  int mom_blocks = 10;
  double huber_c = 2.0;
  std::uint64_t seed = 0;
};

struct SolverFlags {
  double lambda_omega = 0.0;
  double lambda_delta = 0.0;
  double rho0 = 1.0;
  double rho_growth = 2.0;
  double tol_feas = 1e-8;
  double tol_rel = 1e-10;
  int max_outer = 100;
  int max_inner = 5000;
  std::string step_rule = "backtracking";
};

EstimatorConfig build_estimator_config(const EstimatorFlags& f) {
  EstimatorConfig ec;
  if (f.estimator == "sample") {
    ec.method = EstimatorConfig::Method::sample;
  } else if (f.estimator == "robust") {
    ec.method = EstimatorConfig::Method::robust;
  } else {
    throw InvalidConfig("--estimator must be sample or robust, got \"" +
                        f.estimator + "\"");
  }
  if (f.kurtosis == "auto") {
    ec.kurtosis = EstimatorConfig::KurtosisMode::automatic;
  } else {
    ec.kurtosis = EstimatorConfig::KurtosisMode::fixed;
    ec.kappa_fixed = parse_double_strict(f.kurtosis, "--kurtosis");
  }
  ec.mom_blocks = f.mom_blocks;
  ec.huber_c = f.huber_c;
  ec.seed = f.seed;
  ec.validate();
  return ec;
}

SolverConfig build_solver_config(const SolverFlags& f) {
  SolverConfig sc;
  sc.lambda_omega = f.lambda_omega;
  sc.lambda_delta = f.lambda_delta;
  sc.rho0 = f.rho0;
  sc.rho_growth = f.rho_growth;
  sc.tol_feas = f.tol_feas;
  sc.tol_rel = f.tol_rel;
  sc.max_outer = f.max_outer;
  sc.max_inner = f.max_inner;
  if (f.step_rule == "backtracking") {
    sc.step_rule = SolverConfig::StepRule::backtracking;
  } else if (f.step_rule == "fixed") {
    sc.step_rule = SolverConfig::StepRule::fixed;
  } else {
    throw InvalidConfig("--step-rule must be backtracking or fixed, got \"" +
                        f.step_rule + "\"");
  }
  sc.validate();
  return sc;
}

// Registry of flag bindings so a --config JSON file can fill any value the
// command line left untouched (flags always win).
class ConfigBinding {
 public:
  template <class T>
  void bind(const std::string& key, CLI::Option* opt, T* target) {
    setters_[key] = [opt, target](const json& v) {
      if (opt->count() > 0) return;
      v.get_to(*target);
    };
  }

  // Accepts either a string or a bare number (stored in shortest form).
  void bind_number_or_string(const std::string& key, CLI::Option* opt,
                             std::string* target) {
    setters_[key] = [opt, target](const json& v) {
      if (opt->count() > 0) return;
      *target = v.is_string() ? v.get<std::string>() : v.dump();
    };
  }

  // Accepts either a comma string or a JSON array of numbers.
  void bind_list(const std::string& key, CLI::Option* opt,
                 std::string* target) {
    setters_[key] = [opt, target](const json& v) {
      if (opt->count() > 0) return;
      if (v.is_string()) {
        *target = v.get<std::string>();
        return;
      }
      if (!v.is_array()) {
        throw InvalidConfig("config key expects an array or a comma string");
      }
      std::string joined;
      for (const auto& e : v) {
        if (!joined.empty()) joined += ',';
        joined += e.dump();
      }
      *target = joined;
    };
  }

  void apply_file(const std::string& path) const {
    if (path.empty()) return;
    const json cfg = load_json_file(path);
    if (!cfg.is_object()) {
      throw InvalidConfig(path + ": config must be a JSON object");
    }
    for (const auto& [key, value] : cfg.items()) {
      const auto it = setters_.find(key);
      if (it == setters_.end()) {
        throw InvalidConfig(path + ": unknown config key \"" + key + "\"");
      }
      try {
        it->second(value);
      } catch (const json::exception&) {
        throw InvalidConfig(path + ": bad value for config key \"" + key +
                            "\"");
      }
    }
  }

 private:
  std::map<std::string, std::function<void(const json&)>> setters_;
};

void add_estimator_flags(CLI::App* cmd, EstimatorFlags* f, ConfigBinding* cb) {
  cb->bind("estimator",
           cmd->add_option("--estimator", f->estimator,
                           "mean/covariance estimator: sample or robust"),
           &f->estimator);
  cb->bind_number_or_string(
      "kurtosis",
      cmd->add_option("--kurtosis", f->kurtosis,
                      "kurtosis parameter: auto or a fixed number"),
      &f->kurtosis);
  cb->bind("mom_blocks",
           cmd->add_option("--mom-blocks", f->mom_blocks,
                           "median-of-means blocks for the robust mean"),
           &f->mom_blocks);
  cb->bind("huber_c",
           cmd->add_option("--huber-c", f->huber_c,
                           "truncation multiplier for the robust covariance"),
           &f->huber_c);
  cb->bind("seed",
           cmd->add_option("--seed", f->seed,
                           "seed for randomized estimation steps"),
           &f->seed);
}

void add_solver_flags(CLI::App* cmd, SolverFlags* f, ConfigBinding* cb,
                      bool with_lambdas) {
  if (with_lambdas) {
    cb->bind("lambda_omega",
             cmd->add_option("--lambda-omega", f->lambda_omega,
                             "L1 penalty on the quadratic part"),
             &f->lambda_omega);
    cb->bind("lambda_delta",
             cmd->add_option("--lambda-delta", f->lambda_delta,
                             "L1 penalty on the linear part"),
             &f->lambda_delta);
  }
  cb->bind("rho0",
           cmd->add_option("--rho0", f->rho0, "initial penalty parameter"),
           &f->rho0);
  cb->bind("rho_growth",
           cmd->add_option("--rho-growth", f->rho_growth,
                           "penalty growth factor"),
           &f->rho_growth);
  cb->bind("tol_feas",
           cmd->add_option("--tol-feas", f->tol_feas,
                           "feasibility tolerance on |gap - 1|"),
           &f->tol_feas);
  cb->bind("tol_rel",
           cmd->add_option("--tol-rel", f->tol_rel,
                           "relative objective/stationarity tolerance"),
           &f->tol_rel);
  cb->bind("max_outer",
           cmd->add_option("--max-outer", f->max_outer,
                           "maximum multiplier updates"),
           &f->max_outer);
  cb->bind("max_inner",
           cmd->add_option("--max-inner", f->max_inner,
                           "maximum proximal steps per multiplier update"),
           &f->max_inner);
  cb->bind("step_rule",
           cmd->add_option("--step-rule", f->step_rule,
                           "inner step rule: backtracking or fixed"),
           &f->step_rule);
}

json sparsity_json(const QuadraticProjection& q) {
  const SparsityReport rep = projection_sparsity(q, 0.0);
  json features = json::array();
  for (const int f : rep.active_features) features.push_back(f + 1);
  return features;
}

json fit_report_json(const SolverResult& result, const TwoClassModel& model,
                     const LabeledDataset& data) {
  const Vector scores = result.projection.scores(data.x);
  const double emp_r = empirical_rayleigh(scores, data.y);
  const double prior =
      static_cast<double>(data.count(0)) / static_cast<double>(data.n());

  double model_r = 0.0;
  try {
    model_r = rayleigh(model, result.projection).r;
  } catch (const DegenerateProjection&) {
    model_r = 0.0;
  }

  json rep;
  rep["rayleigh_R"] = emp_r;
  rep["rayleigh_Rq"] = prior * (1.0 - prior) * emp_r;
  rep["model_R"] = model_r;
  rep["objective"] = result.objective;
  rep["feas_residual"] = result.feas_residual;
  rep["kkt_residual"] = result.kkt_residual;
  rep["iterations"] = result.iterations;
  rep["converged"] = result.converged;
  rep["active_features"] = sparsity_json(result.projection);
  return rep;
}

// ---------------------------------------------------------------------------
// fit

struct FitOpts {
  std::string x_path, y_path;
  std::string out = "fit";
  std::string config_path;
  EstimatorFlags est;
  SolverFlags sol;
  bool timing = false;
};

int cmd_fit(FitOpts& o, const ConfigBinding& cb) {
  LabeledDataset data;
  EstimatorConfig ec;
  SolverConfig sc;
  try {
    cb.apply_file(o.config_path);
    ec = build_estimator_config(o.est);
    sc = build_solver_config(o.sol);
    data = make_dataset(read_matrix_csv(o.x_path), read_labels_csv(o.y_path));
  } catch (const std::exception& e) {
    return fail(e, kExitInput);
  }

  const auto t0 = std::chrono::steady_clock::now();
  TwoClassModel model;
  try {
    model = fit_model(data, ec);
  } catch (const std::exception& e) {
    return fail(e, kExitEstimation);
  }

  SolverResult result;
  try {
    result = solve_quadro(model, sc);
  } catch (const std::exception& e) {
    return fail(e, kExitSolver);
  }
  const auto t1 = std::chrono::steady_clock::now();

  try {
    json rep = fit_report_json(result, model, data);
    if (o.timing) {
      rep["wall_time_ms"] =
          std::chrono::duration<double, std::milli>(t1 - t0).count();
    }
    save_json(o.out + "_model.json", model_to_json(model));
    save_json(o.out + "_projection.json",
              projection_to_json(result.projection));
    save_json(o.out + "_report.json", rep);
  } catch (const std::exception& e) {
    return fail(e, kExitInput);
  }
  return result.did_not_converge ? kExitSolver : kExitOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOpts {
  std::string projection_path, x_path, y_path;
  std::string out = "eval";
};

json score_summary(const Vector& scores, const IntVector& labels, int label) {
  double mn = std::numeric_limits<double>::infinity();
  double mx = -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  Eigen::Index count = 0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (labels(i) != label) continue;
    mn = std::min(mn, scores(i));
    mx = std::max(mx, scores(i));
    sum += scores(i);
    ++count;
  }
  const double mean = sum / static_cast<double>(count);
  double ss = 0.0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (labels(i) != label) continue;
    ss += (scores(i) - mean) * (scores(i) - mean);
  }
  json j;
  j["n"] = static_cast<std::int64_t>(count);
  j["mean"] = mean;
  j["sd"] = std::sqrt(ss / static_cast<double>(count));
  j["min"] = mn;
  j["max"] = mx;
  return j;
}

int cmd_eval(const EvalOpts& o) {
  LabeledDataset data;
  QuadraticProjection proj;
  try {
    proj = projection_from_json(load_json_file(o.projection_path));
    data = make_dataset(read_matrix_csv(o.x_path), read_labels_csv(o.y_path));
    if (proj.dim() != static_cast<Eigen::Index>(data.dim())) {
      throw DimensionMismatch("projection dimension " +
                              std::to_string(proj.dim()) +
                              " does not match data dimension " +
                              std::to_string(data.dim()));
    }
  } catch (const std::exception& e) {
    return fail(e, kExitInput);
  }

  try {
    const Vector scores = proj.scores(data.x);
    const double emp_r = empirical_rayleigh(scores, data.y);
    const double prior =
        static_cast<double>(data.count(0)) / static_cast<double>(data.n());
    const ThresholdChoice rule = empirical_error(data, proj);

    json rep;
    rep["n"] = static_cast<std::int64_t>(data.n());
    rep["rayleigh_R"] = emp_r;
    rep["rayleigh_Rq"] = prior * (1.0 - prior) * emp_r;
    rep["error"] = rule.error;
    rep["threshold"] = rule.threshold;
    rep["predict_one_below"] = rule.predict_one_below;
    rep["scores"] = {{"class0", score_summary(scores, data.y, 0)},
                     {"class1", score_summary(scores, data.y, 1)}};
    save_json(o.out + "_report.json", rep);
  } catch (const EmptyClass& e) {
    return fail(e, kExitEstimation);
  } catch (const std::exception& e) {
    return fail(e, kExitInput);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// cv

struct CvOpts {
  std::string x_path, y_path;
  std::string out = "cv";
  std::string config_path;
  std::string lambda_omega_grid = "0";
  std::string lambda_delta_grid = "0";
  int k = 5;
  EstimatorFlags est;
  SolverFlags sol;  // lambdas come from the grid
};

LabeledDataset subset_rows(const LabeledDataset& data,
                           const std::vector<Eigen::Index>& rows) {
  Matrix x(static_cast<Eigen::Index>(rows.size()), data.x.cols());
  IntVector y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = data.x.row(rows[i]);
    y(static_cast<Eigen::Index>(i)) = data.y(rows[i]);
  }
  return make_dataset(x, y);
}

int cmd_cv(CvOpts& o, const ConfigBinding& cb) {
  LabeledDataset data;
  EstimatorConfig ec;
  SolverConfig sc;
  std::vector<std::pair<double, double>> grid;
  try {
    cb.apply_file(o.config_path);
    ec = build_estimator_config(o.est);
    sc = build_solver_config(o.sol);
    if (o.k < 2) throw InvalidConfig("--k must be at least 2");
    const auto lo = parse_double_list(o.lambda_omega_grid, "--lambda-omega-grid");
    const auto ld = parse_double_list(o.lambda_delta_grid, "--lambda-delta-grid");
    for (const double a : lo) {
      for (const double b : ld) {
        if (a < 0.0 || b < 0.0) {
          throw InvalidConfig("grid penalties must be nonnegative");
        }
        grid.emplace_back(a, b);
      }
    }
    // Warm starts want the most heavily penalized (sparsest) point first.
    std::sort(grid.begin(), grid.end(), [](const auto& p, const auto& q) {
      const double sp = p.first + p.second, sq = q.first + q.second;
      if (sp != sq) return sp > sq;
      if (p.first != q.first) return p.first > q.first;
      return p.second > q.second;
    });
    data = make_dataset(read_matrix_csv(o.x_path), read_labels_csv(o.y_path));
  } catch (const std::exception& e) {
    return fail(e, kExitInput);
  }

  const Eigen::Index n = data.n();
  const Eigen::Index n0 = data.count(0);
  const Eigen::Index n1 = data.count(1);
  const std::size_t n_grid = grid.size();
  const int k = o.k;

  // val_r[g][f], val_err[g][f]
  std::vector<std::vector<double>> val_r(n_grid, std::vector<double>(k, 0.0));
  std::vector<std::vector<double>> val_err = val_r;

  int phase = kExitEstimation;
  TwoClassModel refit_model_out;
  SolverResult refit;
  std::pair<double, double> chosen{0.0, 0.0};
  double chosen_mean = 0.0;
  std::vector<double> chosen_folds;
  try {
    if (std::min(n0, n1) < k) {
      throw FoldTooSmall("k = " + std::to_string(k) +
                         " folds but the smaller class has only " +
                         std::to_string(std::min(n0, n1)) + " rows");
    }

    // Stratified fold assignment: shuffle each class, deal round-robin.
    std::vector<int> fold_of(static_cast<std::size_t>(n), 0);
    std::mt19937_64 rng(o.est.seed);
    for (const int label : {0, 1}) {
      std::vector<Eigen::Index> idx;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (data.y(i) == label) idx.push_back(i);
      }
      std::shuffle(idx.begin(), idx.end(), rng);
      for (std::size_t j = 0; j < idx.size(); ++j) {
        fold_of[static_cast<std::size_t>(idx[j])] = static_cast<int>(j) % k;
      }
    }

    for (int f = 0; f < k; ++f) {
      std::vector<Eigen::Index> train_rows, val_rows;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (fold_of[static_cast<std::size_t>(i)] == f) {
          val_rows.push_back(i);
        } else {
          train_rows.push_back(i);
        }
      }
      const LabeledDataset train = subset_rows(data, train_rows);
      const LabeledDataset val = subset_rows(data, val_rows);

      phase = kExitEstimation;
      const TwoClassModel fold_model = fit_model(train, ec);

      phase = kExitSolver;
      const std::vector<SolverResult> path = solution_path(fold_model, grid, sc);

      phase = kExitEstimation;
      for (std::size_t g = 0; g < n_grid; ++g) {
        const Vector scores = path[g].projection.scores(val.x);
        val_r[g][static_cast<std::size_t>(f)] =
            empirical_rayleigh(scores, val.y);
        val_err[g][static_cast<std::size_t>(f)] =
            empirical_error(val, path[g].projection).error;
      }
    }

    // Mean validation R per grid point; scanning in descending-penalty order
    // with a strict comparison implements the larger-penalty tie break.
    std::size_t best_g = 0;
    double best_mean = -std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < n_grid; ++g) {
      double mean = 0.0;
      for (int f = 0; f < k; ++f) mean += val_r[g][static_cast<std::size_t>(f)];
      mean /= static_cast<double>(k);
      if (mean > best_mean) {
        best_mean = mean;
        best_g = g;
      }
    }
    chosen = grid[best_g];
    chosen_mean = best_mean;
    chosen_folds = val_r[best_g];

    phase = kExitEstimation;
    refit_model_out = fit_model(data, ec);

    phase = kExitSolver;
    SolverConfig refit_cfg = sc;
    refit_cfg.lambda_omega = chosen.first;
    refit_cfg.lambda_delta = chosen.second;
    refit = solve_quadro(refit_model_out, refit_cfg);
  } catch (const std::exception& e) {
    return fail(e, phase);
  }

  try {
    std::string table = "lambda_omega,lambda_delta,fold,val_R,val_err\n";
    for (std::size_t g = 0; g < n_grid; ++g) {
      for (int f = 0; f < k; ++f) {
        table += format_double(grid[g].first) + ',' +
                 format_double(grid[g].second) + ',' + std::to_string(f) +
                 ',' + format_double(val_r[g][static_cast<std::size_t>(f)]) +
                 ',' + format_double(val_err[g][static_cast<std::size_t>(f)]) +
                 '\n';
      }
    }
    save_text(o.out + "_cv_table.csv", table);

    json sel;
    sel["lambda_omega"] = chosen.first;
    sel["lambda_delta"] = chosen.second;
    sel["mean_val_R"] = chosen_mean;
    sel["fold_val_R"] = chosen_folds;
    sel["k"] = k;
    sel["grid_points"] = static_cast<std::int64_t>(n_grid);
    sel["refit"] = fit_report_json(refit, refit_model_out, data);
    save_json(o.out + "_selection.json", sel);
    save_json(o.out + "_model.json", model_to_json(refit_model_out));
    save_json(o.out + "_projection.json", projection_to_json(refit.projection));
  } catch (const std::exception& e) {
    return fail(e, kExitInput);
  }
  return refit.did_not_converge ? kExitSolver : kExitOk;
}

// ---------------------------------------------------------------------------
// oracle

struct OracleRqOpts {
  std::string preset, model_path, out;
  std::string features;
  int resolution = 9;
  bool linear = false;
};

struct OracleMomentsOpts {
  std::string preset, model_path, projection_path, out;
  std::string family = "gaussian";
  int cls = 0;
  std::int64_t n = 1000000;
  std::uint64_t seed = 0;
  double df = 0.0;
};

int emit_json(const json& j, const std::string& out_path) {
  std::cout << j.dump(2) << "\n";
  if (!out_path.empty()) save_json(out_path, j);
  return kExitOk;
}

int cmd_oracle_rq(const OracleRqOpts& o) {
  try {
    TwoClassModel model = resolve_model(o.preset, o.model_path);
    if (!o.features.empty()) {
      std::vector<int> keep;
      for (const double v : parse_double_list(o.features, "--features")) {
        const int f = static_cast<int>(v);
        if (static_cast<double>(f) != v || f < 1) {
          throw InvalidConfig("--features expects 1-based integer indices");
        }
        keep.push_back(f - 1);
      }
      model = restrict_features(model, keep);
    }
    const GridSearchResult res = grid_search_rq(model, o.resolution, o.linear);
    json j;
    j["r"] = res.r;
    j["projection"] = projection_to_json(res.projection);
    return emit_json(j, o.out);
  } catch (const std::exception& e) {
    return fail(e, kExitInput);
  }
}

int cmd_oracle_moments(const OracleMomentsOpts& o) {
  try {
    const TwoClassModel model = resolve_model(o.preset, o.model_path);
    const QuadraticProjection proj =
        projection_from_json(load_json_file(o.projection_path));
    if (o.cls != 0 && o.cls != 1) {
      throw InvalidConfig("--class must be 0 or 1");
    }
    SampleFamily family;
    if (o.family == "gaussian") {
      family = SampleFamily::gaussian;
    } else if (o.family == "student_t") {
      family = SampleFamily::student_t;
    } else {
      throw InvalidConfig("--family must be gaussian or student_t, got \"" +
                          o.family + "\"");
    }
    const ClassModel& cls = o.cls == 0 ? model.class0 : model.class1;
    const McMoments mm = mc_moments(cls, proj, o.n, o.seed, family, o.df);
    json j;
    j["mean"] = mm.mean;
    j["variance"] = mm.variance;
    j["se_mean"] = mm.se_mean;
    j["se_variance"] = mm.se_variance;
    j["n"] = mm.n;
    return emit_json(j, o.out);
  } catch (const std::exception& e) {
    return fail(e, kExitInput);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "quadro: sparse quadratic projections maximizing the two-class "
      "Rayleigh quotient"};
  app.require_subcommand(1);

  SimulateOpts sim_o;
  auto* sim = app.add_subcommand(
      "simulate", "draw a labeled sample from a model and write CSV files");
  sim->add_option("--preset", sim_o.preset,
                  "built-in model: figure1 or sparse-d10");
  sim->add_option("--model", sim_o.model_path, "model JSON file");
  sim->add_option("--n", sim_o.n, "number of rows to draw")->required();
  sim->add_option("--seed", sim_o.seed, "random seed");
  sim->add_option("--out", sim_o.out,
                  "output prefix (writes <out>_X.csv and <out>_y.csv)");

  FitOpts fit_o;
  ConfigBinding fit_cb;
  auto* fit = app.add_subcommand(
      "fit", "estimate a model from CSV data and solve for a projection");
  fit->add_option("--x", fit_o.x_path, "feature CSV (header x1..xd)")
      ->required();
  fit->add_option("--y", fit_o.y_path, "label CSV (header y)")->required();
  fit_cb.bind("out", fit->add_option("--out", fit_o.out, "output prefix"),
              &fit_o.out);
  add_estimator_flags(fit, &fit_o.est, &fit_cb);
  add_solver_flags(fit, &fit_o.sol, &fit_cb, /*with_lambdas=*/true);
  fit->add_option("--config", fit_o.config_path,
                  "JSON config file; explicit flags override its values");
  fit->add_flag("--timing", fit_o.timing,
                "include wall_time_ms in the report (breaks bitwise "
                "run-to-run file identity)");

  EvalOpts eval_o;
  auto* eval = app.add_subcommand(
      "eval", "score a dataset with a saved projection and report quality");
  eval->add_option("--projection", eval_o.projection_path,
                   "projection JSON file")
      ->required();
  eval->add_option("--x", eval_o.x_path, "feature CSV")->required();
  eval->add_option("--y", eval_o.y_path, "label CSV")->required();
  eval->add_option("--out", eval_o.out, "output prefix");

  CvOpts cv_o;
  ConfigBinding cv_cb;
  auto* cv = app.add_subcommand(
      "cv", "cross-validate the penalty grid and refit at the best pair");
  cv->add_option("--x", cv_o.x_path, "feature CSV")->required();
  cv->add_option("--y", cv_o.y_path, "label CSV")->required();
  cv_cb.bind("out", cv->add_option("--out", cv_o.out, "output prefix"),
             &cv_o.out);
  cv_cb.bind("k", cv->add_option("--k", cv_o.k, "number of folds"), &cv_o.k);
  cv_cb.bind_list("lambda_omega_grid",
                  cv->add_option("--lambda-omega-grid", cv_o.lambda_omega_grid,
                                 "comma-separated quadratic penalties"),
                  &cv_o.lambda_omega_grid);
  cv_cb.bind_list("lambda_delta_grid",
                  cv->add_option("--lambda-delta-grid", cv_o.lambda_delta_grid,
                                 "comma-separated linear penalties"),
                  &cv_o.lambda_delta_grid);
  add_estimator_flags(cv, &cv_o.est, &cv_cb);
  add_solver_flags(cv, &cv_o.sol, &cv_cb, /*with_lambdas=*/false);
  cv->add_option("--config", cv_o.config_path,
                 "JSON config file; explicit flags override its values");

  auto* orc = app.add_subcommand("oracle",
                                 "slow ground-truth oracles for verification");
  orc->require_subcommand(1);

  OracleRqOpts rq_o;
  auto* rq = orc->add_subcommand(
      "rq", "grid-search the best Rayleigh quotient over small projections");
  rq->add_option("--preset", rq_o.preset, "built-in model");
  rq->add_option("--model", rq_o.model_path, "model JSON file");
  rq->add_option("--resolution", rq_o.resolution, "grid points per parameter");
  rq->add_flag("--linear", rq_o.linear, "restrict the search to linear scores");
  rq->add_option("--features", rq_o.features,
                 "1-based feature subset, e.g. 1,3");
  rq->add_option("--out", rq_o.out, "also write the JSON result here");

  OracleMomentsOpts mm_o;
  auto* mm = orc->add_subcommand(
      "moments", "Monte Carlo mean/variance of a projection score");
  mm->add_option("--preset", mm_o.preset, "built-in model");
  mm->add_option("--model", mm_o.model_path, "model JSON file");
  mm->add_option("--projection", mm_o.projection_path, "projection JSON file")
      ->required();
  mm->add_option("--class", mm_o.cls, "class label, 0 or 1");
  mm->add_option("--n", mm_o.n, "number of draws");
  mm->add_option("--seed", mm_o.seed, "random seed");
  mm->add_option("--family", mm_o.family, "gaussian or student_t");
  mm->add_option("--df", mm_o.df, "degrees of freedom for student_t");
  mm->add_option("--out", mm_o.out, "also write the JSON result here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  if (sim->parsed()) return cmd_simulate(sim_o);
  if (fit->parsed()) return cmd_fit(fit_o, fit_cb);
  if (eval->parsed()) return cmd_eval(eval_o);
  if (cv->parsed()) return cmd_cv(cv_o, cv_cb);
  if (rq->parsed()) return cmd_oracle_rq(rq_o);
  if (mm->parsed()) return cmd_oracle_moments(mm_o);
  return kExitInput;
}
