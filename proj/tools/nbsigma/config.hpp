#pragma once

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "nbsigma/core.hpp"
#include "nbsigma/lindblad.hpp"

namespace nbsigma::cli {

using json = nlohmann::ordered_json;

inline const std::vector<std::string>& task_names() {
  static const std::vector<std::string> t{"gbz",  "spectrum", "self_energy_sweep", "hopping_table", "ed_compare",
                                          "gap", "pbc_compare", "scaling"};
  return t;
}

struct ModelConfig {
  std::string preset = "hatano_nelson";  // or "nnn"
  double t = 1.0;
  double gamma = 0.5;
  double gamma0 = 1.1;
  double t2 = 0.04;
  double u = 0.02;
  int n_sites = 31;
  Boundary boundary = Boundary::open;
};

// Union of task parameters; each task accepts only its own subset.
struct TaskConfig {
  int n_samples = 512;
  int reference_size = 120;
  int aux_phi = 0;
  int n_angles = 33;
  int grid = 256;
  std::vector<std::string> methods{"bz_double", "eigenstate"};
  std::vector<double> thetas;
  std::vector<double> t2_values;
  std::vector<double> u_values;
  std::vector<int> sizes;
  int r_range = 6;
  int n_projection = 64;
  int r_max = 60;
  int n_contour = 128;
  int realspace_r_max = 12;
  bool realspace = false;
  bool self_consistent = false;
  std::string solver = "schur_complement";
};

struct RunConfig {
  std::string task;
  ModelConfig model;
  TaskConfig params;
  NumericPolicy policy;
  std::string output_dir = "nbsigma_out";
  int threads = 0;
};

namespace detail {

inline const std::set<std::string>& task_keys(const std::string& task) {
  static const std::map<std::string, std::set<std::string>> keys{
      {"gbz", {"n_samples", "reference_size", "aux_phi"}},
      {"spectrum", {"t2_values"}},
      {"self_energy_sweep",
       {"n_angles", "grid", "methods", "r_max", "n_contour", "realspace_r_max", "n_samples", "reference_size"}},
      {"hopping_table", {"thetas", "r_range", "n_projection", "grid", "n_samples", "reference_size"}},
      {"ed_compare", {"sizes", "thetas", "grid", "solver"}},
      {"gap", {"n_angles", "grid", "self_consistent", "n_samples", "reference_size"}},
      {"pbc_compare", {"n_angles", "grid", "realspace", "realspace_r_max", "n_samples", "reference_size"}},
      {"scaling", {"sizes", "u_values", "grid", "solver"}},
  };
  return keys.at(task);
}

inline void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) fail(ErrorKind::config, "config: '" + where + "' must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      fail(ErrorKind::config, "config: unknown field '" + (where.empty() ? "" : where + ".") + it.key() + "'");
}

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorKind::config, "config: field '" + where + "." + key + "' has the wrong type");
  }
}

inline void require_positive(int v, const std::string& field) {
  if (v <= 0) fail(ErrorKind::config, "config: field '" + field + "' must be positive");
}

}  // namespace detail

inline RunConfig parse_config(const json& j, const std::string& task_arg) {
  using namespace detail;
  check_keys(j, {"task", "model", "params", "policy", "output", "threads"}, "");
  RunConfig c;
  c.task = task_arg;
  if (j.contains("task")) {
    std::string t;
    read(j, "task", t, "");
    if (!task_arg.empty() && t != task_arg)
      fail(ErrorKind::config, "config: field 'task' (" + t + ") disagrees with the command line (" + task_arg + ")");
    c.task = t;
  }
  if (std::find(task_names().begin(), task_names().end(), c.task) == task_names().end())
    fail(ErrorKind::config, "config: unknown task '" + c.task + "'");

  if (j.contains("model")) {
    const json& m = j.at("model");
    check_keys(m, {"preset", "t", "gamma", "gamma0", "t2", "u", "n_sites", "boundary"}, "model");
    read(m, "preset", c.model.preset, "model");
    read(m, "t", c.model.t, "model");
    read(m, "gamma", c.model.gamma, "model");
    read(m, "gamma0", c.model.gamma0, "model");
    read(m, "t2", c.model.t2, "model");
    read(m, "u", c.model.u, "model");
    read(m, "n_sites", c.model.n_sites, "model");
    if (m.contains("boundary")) {
      std::string b;
      read(m, "boundary", b, "model");
      try {
        c.model.boundary = boundary_from_string(b);
      } catch (const Error& e) {
        fail(ErrorKind::config, std::string("config: field 'model.boundary': ") + e.what());
      }
    }
  }
  if (c.model.preset != "hatano_nelson" && c.model.preset != "nnn")
    fail(ErrorKind::config, "config: field 'model.preset' must be hatano_nelson or nnn");
  if (!(c.model.t > c.model.gamma && c.model.gamma > 0))
    fail(ErrorKind::config, "config: fields 'model.t' and 'model.gamma' need t > gamma > 0");
  if (c.model.preset == "nnn" && c.model.gamma0 < 2 * c.model.gamma)
    fail(ErrorKind::config, "config: field 'model.gamma0' must be at least 2*gamma");
  require_positive(c.model.n_sites, "model.n_sites");

  if (j.contains("params")) {
    const json& p = j.at("params");
    check_keys(p, task_keys(c.task), "params");
    auto& q = c.params;
    read(p, "n_samples", q.n_samples, "params");
    read(p, "reference_size", q.reference_size, "params");
    read(p, "aux_phi", q.aux_phi, "params");
    read(p, "n_angles", q.n_angles, "params");
    read(p, "grid", q.grid, "params");
    read(p, "methods", q.methods, "params");
    read(p, "thetas", q.thetas, "params");
    read(p, "t2_values", q.t2_values, "params");
    read(p, "u_values", q.u_values, "params");
    read(p, "sizes", q.sizes, "params");
    read(p, "r_range", q.r_range, "params");
    read(p, "n_projection", q.n_projection, "params");
    read(p, "r_max", q.r_max, "params");
    read(p, "n_contour", q.n_contour, "params");
    read(p, "realspace_r_max", q.realspace_r_max, "params");
    read(p, "realspace", q.realspace, "params");
    read(p, "self_consistent", q.self_consistent, "params");
    read(p, "solver", q.solver, "params");
  }
  for (auto& m : c.params.methods)
    if (m != "bz_double" && m != "eigenstate" && m != "gbz_triple" && m != "realspace")
      fail(ErrorKind::config, "config: field 'params.methods' has unknown method '" + m + "'");
  if (c.params.solver != "schur_complement" && c.params.solver != "dense")
    fail(ErrorKind::config, "config: field 'params.solver' must be schur_complement or dense");
  require_positive(c.params.n_angles, "params.n_angles");
  require_positive(c.params.grid, "params.grid");
  require_positive(c.params.n_samples, "params.n_samples");
  for (int n : c.params.sizes) require_positive(n, "params.sizes");

  if (j.contains("policy")) {
    const json& p = j.at("policy");
    check_keys(p,
               {"residual_tol", "hermiticity_tol", "psd_tol", "stability_tol", "pole_tol", "root_pair_tol",
                "log_singular_tol", "selfconsistent_tol", "selfconsistent_max_iter", "selfconsistent_mixing",
                "ed_tracking_tol", "ed_max_iter", "ed_tol", "dense_ed_limit"},
               "policy");
    auto& q = c.policy;
    read(p, "residual_tol", q.residual_tol, "policy");
    read(p, "hermiticity_tol", q.hermiticity_tol, "policy");
    read(p, "psd_tol", q.psd_tol, "policy");
    read(p, "stability_tol", q.stability_tol, "policy");
    read(p, "pole_tol", q.pole_tol, "policy");
    read(p, "root_pair_tol", q.root_pair_tol, "policy");
    read(p, "log_singular_tol", q.log_singular_tol, "policy");
    read(p, "selfconsistent_tol", q.selfconsistent_tol, "policy");
    read(p, "selfconsistent_max_iter", q.selfconsistent_max_iter, "policy");
    read(p, "selfconsistent_mixing", q.selfconsistent_mixing, "policy");
    read(p, "ed_tracking_tol", q.ed_tracking_tol, "policy");
    read(p, "ed_max_iter", q.ed_max_iter, "policy");
    read(p, "ed_tol", q.ed_tol, "policy");
    read(p, "dense_ed_limit", q.dense_ed_limit, "policy");
  }
  if (j.contains("output")) {
    check_keys(j.at("output"), {"dir"}, "output");
    read(j.at("output"), "dir", c.output_dir, "output");
  }
  read(j, "threads", c.threads, "");
  if (c.threads < 0) fail(ErrorKind::config, "config: field 'threads' must be non-negative");
  return c;
}

inline RunConfig load_config(const std::string& path, const std::string& task_arg) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::config, "config: cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::config, std::string("config: parse error in ") + path + ": " + e.what());
  }
  return parse_config(j, task_arg);
}

// Fully resolved configuration, echoed into the run summary.
inline json to_json(const RunConfig& c) {
  const auto& q = c.params;
  json m{{"preset", c.model.preset}, {"t", c.model.t},   {"gamma", c.model.gamma},       {"gamma0", c.model.gamma0},
         {"t2", c.model.t2},         {"u", c.model.u},   {"n_sites", c.model.n_sites},   {"boundary", to_string(c.model.boundary)}};
  json params = json::object();
  json all{{"n_samples", q.n_samples},
           {"reference_size", q.reference_size},
           {"aux_phi", q.aux_phi},
           {"n_angles", q.n_angles},
           {"grid", q.grid},
           {"methods", q.methods},
           {"thetas", q.thetas},
           {"t2_values", q.t2_values},
           {"u_values", q.u_values},
           {"sizes", q.sizes},
           {"r_range", q.r_range},
           {"n_projection", q.n_projection},
           {"r_max", q.r_max},
           {"n_contour", q.n_contour},
           {"realspace_r_max", q.realspace_r_max},
           {"realspace", q.realspace},
           {"self_consistent", q.self_consistent},
           {"solver", q.solver}};
  for (auto it = all.begin(); it != all.end(); ++it)
    if (detail::task_keys(c.task).count(it.key())) params[it.key()] = it.value();
  const auto& p = c.policy;
  json pol{{"residual_tol", p.residual_tol},
           {"hermiticity_tol", p.hermiticity_tol},
           {"psd_tol", p.psd_tol},
           {"stability_tol", p.stability_tol},
           {"pole_tol", p.pole_tol},
           {"root_pair_tol", p.root_pair_tol},
           {"log_singular_tol", p.log_singular_tol},
           {"selfconsistent_tol", p.selfconsistent_tol},
           {"selfconsistent_max_iter", p.selfconsistent_max_iter},
           {"selfconsistent_mixing", p.selfconsistent_mixing},
           {"ed_tracking_tol", p.ed_tracking_tol},
           {"ed_max_iter", p.ed_max_iter},
           {"ed_tol", p.ed_tol},
           {"dense_ed_limit", p.dense_ed_limit}};
  return json{{"task", c.task}, {"model", m}, {"params", params}, {"policy", pol}, {"output", {{"dir", c.output_dir}}},
              {"threads", c.threads}};
}

}  // namespace nbsigma::cli
