#pragma once

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spemix/dataset.hpp"
#include "spemix/sweep.hpp"

namespace spemix {

using Json = nlohmann::ordered_json;

namespace report_detail {

inline Json vector_to_json(const VectorXd& v) {
  Json out = Json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

inline Json matrix_to_json(const MatrixXd& m) {
  Json out = Json::array();
  for (int i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(row);
  }
  return out;
}

inline VectorXd vector_from_json(const Json& j, const std::string& field) {
  if (!j.is_array())
    throw DataError("model json: field '" + field + "' must be an array");
  VectorXd out(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number())
      throw DataError("model json: field '" + field + "' has a non-number");
    out[static_cast<int>(i)] = j[i].get<double>();
  }
  return out;
}

inline MatrixXd matrix_from_json(const Json& j, const std::string& field) {
  if (!j.is_array() || j.empty())
    throw DataError("model json: field '" + field +
                    "' must be a nonempty array of rows");
  const std::size_t cols = j[0].size();
  MatrixXd out(j.size(), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols)
      throw DataError("model json: field '" + field + "' is ragged");
    for (std::size_t c = 0; c < cols; ++c)
      out(static_cast<int>(i), static_cast<int>(c)) = j[i][c].get<double>();
  }
  return out;
}

inline const Json& require(const Json& j, const std::string& field,
                           const std::string& what) {
  auto it = j.find(field);
  if (it == j.end())
    throw DataError(what + ": missing field '" + field + "'");
  return *it;
}

}  // namespace report_detail

inline Json model_to_json(const MixtureModel& model) {
  model.validate();
  Json j;
  j["spec"] = model_spec_name(model.spec);
  j["groups"] = model.groups();
  j["dim"] = model.dim();
  j["pi"] = report_detail::vector_to_json(model.pi);
  Json comps = Json::array();
  for (const ComponentParams& c : model.components) {
    Json cj;
    cj["mu"] = report_detail::vector_to_json(c.mu);
    cj["lambda"] = c.scale.lambda;
    cj["gamma"] = report_detail::matrix_to_json(c.scale.gamma);
    cj["delta"] = report_detail::vector_to_json(c.scale.delta);
    cj["beta"] = c.beta;
    cj["eta"] = report_detail::vector_to_json(c.eta);
    cj["psi"] = report_detail::vector_to_json(c.psi());
    cj["sigma"] = report_detail::matrix_to_json(c.sigma());
    comps.push_back(cj);
  }
  j["components"] = comps;
  return j;
}

// Inverse of model_to_json. eta is the stored canonical skew parameter; psi
// and sigma in the file are derived conveniences and are not read back.
inline MixtureModel model_from_json(const Json& j) {
  using report_detail::require;
  MixtureModel model;
  model.spec = parse_model_spec(
      require(j, "spec", "model json").get<std::string>());
  const int G = require(j, "groups", "model json").get<int>();
  model.pi = report_detail::vector_from_json(require(j, "pi", "model json"),
                                             "pi");
  const Json& comps = require(j, "components", "model json");
  if (!comps.is_array() || static_cast<int>(comps.size()) != G ||
      model.pi.size() != G)
    throw DataError("model json: component/pi counts disagree with 'groups'");
  for (const Json& cj : comps) {
    ComponentParams c;
    c.mu = report_detail::vector_from_json(require(cj, "mu", "model json"),
                                           "mu");
    c.scale.lambda = require(cj, "lambda", "model json").get<double>();
    c.scale.gamma = report_detail::matrix_from_json(
        require(cj, "gamma", "model json"), "gamma");
    c.scale.delta = report_detail::vector_from_json(
        require(cj, "delta", "model json"), "delta");
    c.beta = require(cj, "beta", "model json").get<double>();
    c.eta = report_detail::vector_from_json(require(cj, "eta", "model json"),
                                            "eta");
    model.components.push_back(c);
  }
  model.validate();
  return model;
}

inline Json fit_result_to_json(const SweepCell& cell) {
  const FitResult& r = cell.result;
  Json j;
  j["spec"] = model_spec_name(cell.spec);
  j["groups"] = cell.G;
  j["seed"] = cell.seed;
  j["converged"] = r.converged;
  j["failed"] = r.failed;
  if (r.failed) j["failure_reason"] = r.failure_reason;
  j["iterations"] = r.iterations;
  if (!r.failed) {
    j["loglik"] = r.loglik;
    j["free_params"] = r.free_params;
    j["bic"] = r.bic_value;
    j["icl"] = r.icl_value;
  }
  return j;
}

struct FitReportInputs {
  const Dataset* dataset = nullptr;
  const SweepReport* report = nullptr;
  std::uint64_t seed = 0;
  bool semi_supervised = false;
  int labeled_rows = 0;
  double split_fraction = 0.0;
  std::uint64_t split_seed = 0;
  // filled when truth labels exist
  bool has_truth = false;
  double ari_all = 0.0;
  double ari_unlabeled = 0.0;
};

inline Json sweep_report_to_json(const FitReportInputs& in) {
  const SweepReport& report = *in.report;
  const Dataset& ds = *in.dataset;
  Json j;
  j["dataset"] = ds.name;
  j["n"] = ds.rows();
  j["p"] = ds.cols();
  j["standardized"] = ds.standardized;
  j["seed"] = in.seed;
  j["semi_supervised"] = in.semi_supervised;
  if (in.semi_supervised) {
    j["labeled_rows"] = in.labeled_rows;
    j["split_fraction"] = in.split_fraction;
    j["split_seed"] = in.split_seed;
  }
  Json grid = Json::array();
  for (const SweepCell& cell : report.cells)
    grid.push_back(fit_result_to_json(cell));
  j["grid"] = grid;
  j["best_index"] = report.best_index;
  const SweepCell& best = report.best();
  Json bj = fit_result_to_json(best);
  if (in.has_truth) {
    bj["ari"] = in.ari_all;
    if (in.semi_supervised) bj["ari_unlabeled"] = in.ari_unlabeled;
  }
  j["best"] = bj;
  return j;
}

inline Json replicates_to_json(const std::string& design_name,
                               std::uint64_t seed,
                               const std::vector<ReplicateOutcome>& outcomes,
                               const ReplicateSummary& summary) {
  Json j;
  j["design"] = design_name;
  j["seed"] = seed;
  j["replicates"] = summary.n_replicates;
  Json rows = Json::array();
  for (const ReplicateOutcome& out : outcomes) {
    Json rj;
    rj["replicate"] = out.replicate;
    rj["data_seed"] = out.data_seed;
    rj["converged_cells"] = out.converged_cells;
    rj["total_cells"] = out.total_cells;
    rj["selected"] = out.has_best;
    if (out.has_best) {
      rj["spec"] = out.best_spec;
      rj["groups"] = out.best_g;
      rj["loglik"] = out.best_loglik;
      rj["bic"] = out.best_bic;
      rj["ari"] = out.ari;
    }
    rows.push_back(rj);
  }
  j["outcomes"] = rows;

  Json sj;
  sj["with_selection"] = summary.n_with_best;
  Json gf = Json::object();
  for (const auto& [g, count] : summary.g_frequency)
    gf[std::to_string(g)] = count;
  sj["g_frequency"] = gf;
  Json sf = Json::object();
  for (const auto& [spec, count] : summary.spec_frequency) sf[spec] = count;
  sj["spec_frequency"] = sf;
  if (summary.n_with_best > 0) {
    sj["ari_q1"] = summary.ari_q1;
    sj["ari_median"] = summary.ari_median;
    sj["ari_q3"] = summary.ari_q3;
  }
  j["summary"] = sj;
  return j;
}

// Mixture configuration files accept either a full "sigma" matrix or a
// "gamma"/"delta" (optionally "lambda") decomposition per component.
inline SimulationConfig simulation_config_from_json(const Json& j) {
  using report_detail::require;
  SimulationConfig config;
  if (j.contains("name")) config.name = j["name"].get<std::string>();
  config.n = require(j, "n", "simulation config").get<int>();
  for (const Json& w : require(j, "proportions", "simulation config"))
    config.proportions.push_back(w.get<double>());
  for (const Json& cj : require(j, "components", "simulation config")) {
    SpeParams params;
    params.mu = report_detail::vector_from_json(
        require(cj, "mu", "simulation config"), "mu");
    params.beta = require(cj, "beta", "simulation config").get<double>();
    params.psi = report_detail::vector_from_json(
        require(cj, "psi", "simulation config"), "psi");
    if (cj.contains("sigma")) {
      params.sigma =
          report_detail::matrix_from_json(cj["sigma"], "sigma");
    } else {
      const MatrixXd gamma = report_detail::matrix_from_json(
          require(cj, "gamma", "simulation config"), "gamma");
      const VectorXd delta = report_detail::vector_from_json(
          require(cj, "delta", "simulation config"), "delta");
      const double lambda =
          cj.contains("lambda") ? cj["lambda"].get<double>() : 1.0;
      params.sigma = lambda * gamma * delta.asDiagonal() * gamma.transpose();
    }
    config.components.push_back(params);
  }
  config.validate();
  return config;
}

inline Json simulation_config_to_json(const SimulationConfig& config) {
  config.validate();
  Json j;
  j["name"] = config.name;
  j["n"] = config.n;
  j["proportions"] = config.proportions;
  Json comps = Json::array();
  for (const SpeParams& params : config.components) {
    Json cj;
    cj["mu"] = report_detail::vector_to_json(params.mu);
    cj["sigma"] = report_detail::matrix_to_json(params.sigma);
    cj["beta"] = params.beta;
    cj["psi"] = report_detail::vector_to_json(params.psi);
    comps.push_back(cj);
  }
  j["components"] = comps;
  return j;
}

inline Json load_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  Json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& err) {
    throw DataError("'" + path + "' is not valid json: " + err.what());
  }
  return j;
}

inline void write_text_file(const std::string& path,
                            const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for write");
  out << content;
  if (!out) throw DataError("write to '" + path + "' failed");
}

inline void write_json_file(const std::string& path, const Json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

namespace report_detail {

inline std::string fixed(double value, int digits) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << value;
  return out.str();
}

}  // namespace report_detail

// Plain-text grid table plus the selected model line.
inline std::string sweep_summary_text(const FitReportInputs& in) {
  const SweepReport& report = *in.report;
  std::ostringstream out;
  out << "dataset " << in.dataset->name << "  n=" << in.dataset->rows()
      << "  p=" << in.dataset->cols() << "  seed=" << in.seed << "\n";
  if (in.semi_supervised)
    out << "semi-supervised: " << in.labeled_rows << " labeled rows ("
        << report_detail::fixed(100.0 * in.split_fraction, 1)
        << "%, split seed " << in.split_seed << ")\n";
  out << "\n";
  out << "spec    G  status        iters  loglik          bic\n";
  for (const SweepCell& cell : report.cells) {
    const FitResult& r = cell.result;
    std::string status = r.failed        ? "failed"
                         : r.converged   ? "converged"
                                         : "not-converged";
    out << model_spec_name(cell.spec) << "  " << cell.G << "  ";
    out << status;
    for (std::size_t k = status.size(); k < 14; ++k) out << ' ';
    out << r.iterations << "  ";
    if (r.failed) {
      out << "-               -";
    } else {
      out << report_detail::fixed(r.loglik, 4) << "  "
          << report_detail::fixed(r.bic_value, 4);
    }
    out << "\n";
  }
  const SweepCell& best = report.best();
  out << "\nbest by bic: " << model_spec_name(best.spec)
      << " G=" << best.G << "  bic=" << report_detail::fixed(
             best.result.bic_value, 4);
  if (in.has_truth)
    out << "  ari=" << report_detail::fixed(in.ari_all, 4);
  out << "\n";
  return out.str();
}

// Frequency tables over replicates in the shape of the simulation-study
// summaries: how often each G was selected, how often each model, and the
// quartiles of the selected-model ARI.
inline std::string replicate_summary_text(
    const std::string& design_name, std::uint64_t seed,
    const ReplicateSummary& summary) {
  std::ostringstream out;
  out << "design " << design_name << "  replicates=" << summary.n_replicates
      << "  seed=" << seed << "\n\n";
  out << "replicates with a selected model: " << summary.n_with_best << " / "
      << summary.n_replicates << "\n\n";
  out << "selected G frequency:\n";
  for (const auto& [g, count] : summary.g_frequency)
    out << "  G=" << g << "  " << count << "\n";
  out << "\nselected model frequency:\n";
  for (const auto& [spec, count] : summary.spec_frequency)
    out << "  " << spec << "  " << count << "\n";
  if (summary.n_with_best > 0) {
    out << "\nari of selected models: median "
        << report_detail::fixed(summary.ari_median, 4) << "  (q1 "
        << report_detail::fixed(summary.ari_q1, 4) << ", q3 "
        << report_detail::fixed(summary.ari_q3, 4) << ")\n";
  }
  return out.str();
}

}  // namespace spemix
