#include "mpg_lab/scenario.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace mpg {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw SchemaError("scenario: " + path + ": " + msg);
}

const json* find(const json& j, const char* key) {
  if (!j.is_object()) return nullptr;
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

const json& need(const json& j, const std::string& path, const char* key) {
  const json* f = find(j, key);
  if (!f) fail(path, std::string("missing required field '") + key + "'");
  return *f;
}

/// Numbers may arrive as JSON numbers or as decimal strings (exact
/// round-trip escape hatch).
double as_num(const json& j, const std::string& path) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    errno = 0;
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || (end && *end != '\0') || errno == ERANGE)
      fail(path, "'" + s + "' is not a decimal number");
    return v;
  }
  fail(path, "expected a number");
}

long as_int(const json& j, const std::string& path) {
  if (j.is_number_integer()) return j.get<long>();
  double v = as_num(j, path);
  if (std::floor(v) != v) fail(path, "expected an integer");
  return (long)v;
}

bool as_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) fail(path, "expected true or false");
  return j.get<bool>();
}

std::string as_str(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

Vec as_vec(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of numbers");
  Vec v((Index)j.size());
  for (size_t k = 0; k < j.size(); ++k)
    v((Index)k) = as_num(j[k], path + "[" + std::to_string(k) + "]");
  return v;
}

Mat as_mat(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of rows");
  if (j.empty()) return Mat(0, 0);
  Index cols = -1;
  Mat M;
  for (size_t r = 0; r < j.size(); ++r) {
    Vec row = as_vec(j[r], path + "[" + std::to_string(r) + "]");
    if (cols < 0) {
      cols = row.size();
      M.resize((Index)j.size(), cols);
    } else if (row.size() != cols) {
      fail(path + "[" + std::to_string(r) + "]",
           "has " + std::to_string(row.size()) + " entries, expected " + std::to_string(cols));
    }
    M.row((Index)r) = row;
  }
  return M;
}

StageCost parse_cost(const json& j, const std::string& path, Index n_x, Index m) {
  Mat Q = as_mat(need(j, path, "Q"), path + ".Q");
  Vec q = as_vec(need(j, path, "q"), path + ".q");
  Mat R = as_mat(need(j, path, "R"), path + ".R");
  if (Q.rows() != n_x || Q.cols() != n_x)
    fail(path + ".Q", "expected " + std::to_string(n_x) + "x" + std::to_string(n_x));
  if (q.size() != n_x) fail(path + ".q", "expected length " + std::to_string(n_x));
  if (R.rows() != m || R.cols() != m)
    fail(path + ".R", "expected " + std::to_string(m) + "x" + std::to_string(m));
  return StageCost::create(std::move(Q), std::move(q), std::move(R));
}

CostEntry parse_cost_entry(const json& j, const std::string& path, Index n_x, Index m) {
  if (!j.is_object()) fail(path, "expected a cost object");
  if (const json* mix = find(j, "mixture")) {
    if (!mix->is_array() || mix->empty()) fail(path + ".mixture", "expected a nonempty array");
    std::vector<StageCost> basis;
    for (size_t k = 0; k < mix->size(); ++k)
      basis.push_back(parse_cost((*mix)[k], path + ".mixture[" + std::to_string(k) + "]", n_x, m));
    return CostEntry::mixture(std::move(basis));
  }
  return CostEntry::fixed(parse_cost(j, path, n_x, m));
}

json cost_to_json(const StageCost& c) {
  json j;
  j["Q"] = json::array();
  for (Index r = 0; r < c.Q.rows(); ++r) {
    json row = json::array();
    for (Index k = 0; k < c.Q.cols(); ++k) row.push_back(c.Q(r, k));
    j["Q"].push_back(row);
  }
  j["q"] = json::array();
  for (Index r = 0; r < c.q.size(); ++r) j["q"].push_back(c.q(r));
  j["R"] = json::array();
  for (Index r = 0; r < c.R.rows(); ++r) {
    json row = json::array();
    for (Index k = 0; k < c.R.cols(); ++k) row.push_back(c.R(r, k));
    j["R"].push_back(row);
  }
  return j;
}

json mat_to_json(const Mat& M) {
  json j = json::array();
  for (Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    j.push_back(row);
  }
  return j;
}

json vec_to_json(const Vec& v) {
  json j = json::array();
  for (Index r = 0; r < v.size(); ++r) j.push_back(v(r));
  return j;
}

void set_num(const json& block, const char* key, const std::string& path, double& target) {
  if (const json* f = find(block, key)) target = as_num(*f, path + "." + key);
}

void set_long(const json& block, const char* key, const std::string& path, long& target) {
  if (const json* f = find(block, key)) target = as_int(*f, path + "." + key);
}

void set_int(const json& block, const char* key, const std::string& path, int& target) {
  if (const json* f = find(block, key)) target = (int)as_int(*f, path + "." + key);
}

void set_bool(const json& block, const char* key, const std::string& path, bool& target) {
  if (const json* f = find(block, key)) target = as_bool(*f, path + "." + key);
}

constexpr const char* kSchemaTag = "mpg-lab-scenario/1";

} // namespace

Scenario parse_scenario(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("scenario: invalid JSON: ") + e.what());
  }
  if (!root.is_object()) throw SchemaError("scenario: top level must be an object");
  std::string tag = as_str(need(root, "", "schema"), "schema");
  if (tag != kSchemaTag)
    fail("schema", "unsupported version '" + tag + "', expected '" + kSchemaTag + "'");

  Scenario s;
  if (const json* f = find(root, "name")) s.name = as_str(*f, "name");
  if (const json* f = find(root, "notes")) s.notes = as_str(*f, "notes");
  if (const json* f = find(root, "seed")) s.seed = as_int(*f, "seed");

  const json& jd = need(root, "", "dynamics");
  Mat A = as_mat(need(jd, "dynamics", "A"), "dynamics.A");
  if (A.rows() != A.cols()) fail("dynamics.A", "must be square");
  const json& jb = need(jd, "dynamics", "B");
  if (!jb.is_array() || jb.empty()) fail("dynamics.B", "expected one input matrix per agent");
  std::vector<Mat> B;
  for (size_t i = 0; i < jb.size(); ++i) {
    Mat Bi = as_mat(jb[i], "dynamics.B[" + std::to_string(i) + "]");
    if (Bi.rows() != A.rows())
      fail("dynamics.B[" + std::to_string(i) + "]",
           "row count " + std::to_string(Bi.rows()) + " disagrees with the state dimension " +
               std::to_string(A.rows()));
    if (Bi.cols() == 0) fail("dynamics.B[" + std::to_string(i) + "]", "agent has no inputs");
    B.push_back(std::move(Bi));
  }
  s.dyn = Dynamics::create(std::move(A), std::move(B));
  const int n = s.dyn.num_agents();
  const Index n_x = s.dyn.state_dim();
  const Index m = s.dyn.total_input_dim();

  s.horizon = (int)as_int(need(root, "", "horizon"), "horizon");
  if (s.horizon < 2) fail("horizon", "must be at least 2");

  if (const json* jc = find(root, "constraints")) {
    if (const json* f = find(*jc, "input_lower")) {
      Vec lo = as_vec(*f, "constraints.input_lower");
      if (lo.size() != m) fail("constraints.input_lower", "expected length " + std::to_string(m));
      s.input_lower = std::move(lo);
    }
    if (const json* f = find(*jc, "input_upper")) {
      Vec hi = as_vec(*f, "constraints.input_upper");
      if (hi.size() != m) fail("constraints.input_upper", "expected length " + std::to_string(m));
      s.input_upper = std::move(hi);
    }
    if (s.input_lower && s.input_upper)
      for (Index k = 0; k < m; ++k)
        if (!((*s.input_lower)(k) <= (*s.input_upper)(k)))
          fail("constraints", "input_lower exceeds input_upper at coordinate " +
                                  std::to_string(k));
    if (const json* f = find(*jc, "extra_rows")) {
      s.C_extra = as_mat(need(*f, "constraints.extra_rows", "C"), "constraints.extra_rows.C");
      s.d_extra = as_vec(need(*f, "constraints.extra_rows", "d"), "constraints.extra_rows.d");
      if (s.C_extra.rows() != s.d_extra.size())
        fail("constraints.extra_rows", "C and d row counts disagree");
      if (s.C_extra.rows() > 0 && s.C_extra.cols() != m)
        fail("constraints.extra_rows.C", "expected " + std::to_string(m) + " columns");
    }
    if (const json* f = find(*jc, "equalities")) {
      s.H_stage = as_mat(need(*f, "constraints.equalities", "H"), "constraints.equalities.H");
      s.h_stage = as_vec(need(*f, "constraints.equalities", "h"), "constraints.equalities.h");
      if (s.H_stage.rows() != s.h_stage.size())
        fail("constraints.equalities", "H and h row counts disagree");
      if (s.H_stage.rows() > 0 && s.H_stage.cols() != m)
        fail("constraints.equalities.H", "expected " + std::to_string(m) + " columns");
    }
  }
  if (s.C_extra.rows() == 0) s.C_extra.resize(0, m);
  if (s.H_stage.rows() == 0) s.H_stage.resize(0, m);

  const json& jt = need(root, "", "true_costs");
  if (!jt.is_array() || (int)jt.size() != n)
    fail("true_costs", "expected one stage cost per agent (" + std::to_string(n) + ")");
  for (size_t i = 0; i < jt.size(); ++i)
    s.true_costs.push_back(parse_cost(jt[i], "true_costs[" + std::to_string(i) + "]", n_x, m));

  const json& ja = need(root, "", "agents");
  if (!ja.is_array() || (int)ja.size() != n)
    fail("agents", "expected one entry per agent (" + std::to_string(n) + ")");
  for (int j = 0; j < n; ++j) {
    const std::string ap = "agents[" + std::to_string(j) + "]";
    const json& aj = ja[(size_t)j];
    const json& jcon = need(aj, ap, "conjectures");
    if (!jcon.is_array() || (int)jcon.size() != n)
      fail(ap + ".conjectures", "expected one cost entry per agent (" + std::to_string(n) + ")");
    std::vector<CostEntry> costs;
    bool any_mixed = false;
    for (int i = 0; i < n; ++i) {
      costs.push_back(parse_cost_entry(jcon[(size_t)i],
                                       ap + ".conjectures[" + std::to_string(i) + "]", n_x, m));
      any_mixed = any_mixed || costs.back().mixed;
    }
    Vec theta;
    if (const json* f = find(aj, "theta")) theta = as_vec(*f, ap + ".theta");
    if (any_mixed && theta.size() == 0)
      fail(ap, "mixture entries present but no theta vector given");
    try {
      s.conjectures.push_back(
          ConjectureSet::create(j, s.horizon, std::move(costs), std::move(theta)));
    } catch (const Error& e) {
      fail(ap, e.what());
    }
    // An agent is never wrong about its own cost: misspecification only
    // enters through conjectures of other players. Mixed own entries are
    // permitted (the theta-sweep construction mixes the owner's own game),
    // so only fixed own entries are checked.
    const CostEntry& own = s.conjectures.back().costs[(size_t)j];
    if (!own.mixed) {
      const StageCost& a = own.basis[0];
      const StageCost& t = s.true_costs[(size_t)j];
      double dev = 0.0;
      dev = std::max(dev, (a.Q - t.Q).cwiseAbs().maxCoeff());
      dev = std::max(dev, (a.q - t.q).cwiseAbs().maxCoeff());
      dev = std::max(dev, (a.R - t.R).cwiseAbs().maxCoeff());
      if (dev > 1e-12)
        fail(ap + ".conjectures[" + std::to_string(j) + "]",
             "disagrees with true_costs[" + std::to_string(j) + "] by " + std::to_string(dev) +
                 "; an agent's model of its own cost must match the ground truth");
    }
  }

  const json& jx = need(root, "", "initial_states");
  if (!jx.is_array() || jx.empty()) fail("initial_states", "expected at least one state");
  for (size_t k = 0; k < jx.size(); ++k) {
    Vec x0 = as_vec(jx[k], "initial_states[" + std::to_string(k) + "]");
    if (x0.size() != n_x)
      fail("initial_states[" + std::to_string(k) + "]",
           "expected length " + std::to_string(n_x));
    s.initial_states.push_back(std::move(x0));
  }

  if (const json* f = find(root, "sweep")) {
    s.sweep_agent = (int)as_int(need(*f, "sweep", "agent"), "sweep.agent");
    if (s.sweep_agent < 0 || s.sweep_agent >= n) fail("sweep.agent", "agent index out of range");
  }

  if (const json* f = find(root, "solver")) {
    set_num(*f, "tol", "solver", s.solver.tol);
    set_long(*f, "max_iter", "solver", s.solver.max_iter);
    set_bool(*f, "tighten_to_distance", "solver", s.solver.tighten_to_distance);
  }
  if (const json* f = find(root, "certify")) {
    set_num(*f, "delta_P", "certify", s.certify.delta_P);
    set_num(*f, "delta_lambda", "certify", s.certify.delta_lambda);
    set_num(*f, "epsilon_target", "certify", s.certify.epsilon_target);
    set_long(*f, "max_iter", "certify", s.certify.max_iter);
    set_num(*f, "infeasible_margin", "certify", s.certify.infeasible_margin);
  }
  if (const json* f = find(root, "sensitivity")) {
    set_num(*f, "kkt_tol", "sensitivity", s.sensitivity.kkt_tol);
    set_num(*f, "active_tol", "sensitivity", s.sensitivity.active_tol);
    set_num(*f, "strict_tol", "sensitivity", s.sensitivity.strict_tol);
    set_num(*f, "rank_tol", "sensitivity", s.sensitivity.rank_tol);
    set_num(*f, "max_condition", "sensitivity", s.sensitivity.max_condition);
    set_num(*f, "equilibrium_tol", "sensitivity", s.sensitivity.equilibrium_tol);
  }
  if (const json* f = find(root, "simulate")) {
    set_num(*f, "conv_tol", "simulate", s.simulate.conv_tol);
    set_num(*f, "div_threshold", "simulate", s.simulate.div_threshold);
    set_long(*f, "max_steps", "simulate", s.simulate.max_steps);
    set_int(*f, "consecutive", "simulate", s.simulate.consecutive);
    set_bool(*f, "compute_gaps", "simulate", s.simulate.compute_gaps);
    if (const json* g = find(*f, "gap_convention")) {
      std::string conv = as_str(*g, "simulate.gap_convention");
      if (conv == "predicted_tails")
        s.simulate.gap_convention = GapConvention::PredictedTails;
      else if (conv == "first_stage_only")
        s.simulate.gap_convention = GapConvention::FirstStageOnly;
      else
        fail("simulate.gap_convention", "expected 'predicted_tails' or 'first_stage_only'");
    }
  }
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("scenario: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::string serialize_scenario(const Scenario& s) {
  json root;
  root["schema"] = kSchemaTag;
  if (!s.name.empty()) root["name"] = s.name;
  if (!s.notes.empty()) root["notes"] = s.notes;
  root["seed"] = s.seed;

  json jd;
  jd["A"] = mat_to_json(s.dyn.A);
  jd["B"] = json::array();
  for (const Mat& Bi : s.dyn.B) jd["B"].push_back(mat_to_json(Bi));
  root["dynamics"] = std::move(jd);
  root["horizon"] = s.horizon;

  json jc = json::object();
  if (s.input_lower) jc["input_lower"] = vec_to_json(*s.input_lower);
  if (s.input_upper) jc["input_upper"] = vec_to_json(*s.input_upper);
  if (s.C_extra.rows() > 0)
    jc["extra_rows"] = json{{"C", mat_to_json(s.C_extra)}, {"d", vec_to_json(s.d_extra)}};
  if (s.H_stage.rows() > 0)
    jc["equalities"] = json{{"H", mat_to_json(s.H_stage)}, {"h", vec_to_json(s.h_stage)}};
  if (!jc.empty()) root["constraints"] = std::move(jc);

  root["true_costs"] = json::array();
  for (const StageCost& c : s.true_costs) root["true_costs"].push_back(cost_to_json(c));

  root["agents"] = json::array();
  for (const ConjectureSet& conj : s.conjectures) {
    json aj;
    aj["conjectures"] = json::array();
    for (const CostEntry& e : conj.costs) {
      if (e.mixed) {
        json mix = json::array();
        for (const StageCost& c : e.basis) mix.push_back(cost_to_json(c));
        aj["conjectures"].push_back(json{{"mixture", std::move(mix)}});
      } else {
        aj["conjectures"].push_back(cost_to_json(e.basis[0]));
      }
    }
    if (conj.theta.size() > 0) aj["theta"] = vec_to_json(conj.theta);
    root["agents"].push_back(std::move(aj));
  }

  root["initial_states"] = json::array();
  for (const Vec& x0 : s.initial_states) root["initial_states"].push_back(vec_to_json(x0));

  if (s.sweep_agent >= 0) root["sweep"] = json{{"agent", s.sweep_agent}};

  root["solver"] = json{{"tol", s.solver.tol},
                        {"max_iter", s.solver.max_iter},
                        {"tighten_to_distance", s.solver.tighten_to_distance}};
  root["certify"] = json{{"delta_P", s.certify.delta_P},
                         {"delta_lambda", s.certify.delta_lambda},
                         {"epsilon_target", s.certify.epsilon_target},
                         {"max_iter", s.certify.max_iter},
                         {"infeasible_margin", s.certify.infeasible_margin}};
  root["sensitivity"] = json{{"kkt_tol", s.sensitivity.kkt_tol},
                             {"active_tol", s.sensitivity.active_tol},
                             {"strict_tol", s.sensitivity.strict_tol},
                             {"rank_tol", s.sensitivity.rank_tol},
                             {"max_condition", s.sensitivity.max_condition},
                             {"equilibrium_tol", s.sensitivity.equilibrium_tol}};
  root["simulate"] =
      json{{"conv_tol", s.simulate.conv_tol},
           {"div_threshold", s.simulate.div_threshold},
           {"max_steps", s.simulate.max_steps},
           {"consecutive", s.simulate.consecutive},
           {"compute_gaps", s.simulate.compute_gaps},
           {"gap_convention", s.simulate.gap_convention == GapConvention::PredictedTails
                                  ? "predicted_tails"
                                  : "first_stage_only"}};
  return root.dump(2) + "\n";
}

std::shared_ptr<const Polytope> stacked_polytope(const Scenario& s) {
  const SignalLayout L = SignalLayout::create(s.dyn, s.horizon);
  const int n = s.dyn.num_agents();
  const int K = s.horizon;
  const Index N = L.dim();

  // One stacked row per stage copy of a per-stage row; entries land on the
  // agent-major coordinates of that stage.
  auto scatter = [&](const Mat& rows_stage, int k, Mat& out, Index out_row0) {
    for (Index r = 0; r < rows_stage.rows(); ++r)
      for (int i = 0; i < n; ++i)
        for (Index c = 0; c < L.m[(size_t)i]; ++c)
          out(out_row0 + r, L.coord(i, k, c)) = rows_stage(r, L.stage_offset[(size_t)i] + c);
  };

  Mat C_stack(K * s.C_extra.rows(), N);
  Vec d_stack(K * s.C_extra.rows());
  C_stack.setZero();
  for (int k = 0; k < K; ++k) {
    scatter(s.C_extra, k, C_stack, (Index)k * s.C_extra.rows());
    d_stack.segment((Index)k * s.C_extra.rows(), s.C_extra.rows()) = s.d_extra;
  }
  Mat H_stack(K * s.H_stage.rows(), N);
  Vec h_stack(K * s.H_stage.rows());
  H_stack.setZero();
  for (int k = 0; k < K; ++k) {
    scatter(s.H_stage, k, H_stack, (Index)k * s.H_stage.rows());
    h_stack.segment((Index)k * s.H_stage.rows(), s.H_stage.rows()) = s.h_stage;
  }

  if (s.input_lower && s.input_upper) {
    Vec lo(N), hi(N);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < K; ++k)
        for (Index c = 0; c < L.m[(size_t)i]; ++c) {
          lo(L.coord(i, k, c)) = (*s.input_lower)(L.stage_offset[(size_t)i] + c);
          hi(L.coord(i, k, c)) = (*s.input_upper)(L.stage_offset[(size_t)i] + c);
        }
    if (C_stack.rows() == 0 && H_stack.rows() == 0)
      return std::make_shared<const Polytope>(Polytope::box(std::move(lo), std::move(hi)));
    return std::make_shared<const Polytope>(Polytope::box_with_rows(
        std::move(lo), std::move(hi), std::move(C_stack), std::move(d_stack),
        std::move(H_stack), std::move(h_stack)));
  }

  // One-sided or absent bounds become plain inequality rows; the
  // compactness check decides whether the result is usable.
  std::vector<std::pair<Index, double>> bound_rows; // (+/-(coord+1), bound)
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < K; ++k)
      for (Index c = 0; c < L.m[(size_t)i]; ++c) {
        Index coord = L.coord(i, k, c);
        double v = 0.0;
        if (s.input_lower) {
          v = (*s.input_lower)(L.stage_offset[(size_t)i] + c);
          bound_rows.emplace_back(-(coord + 1), -v);
        }
        if (s.input_upper) {
          v = (*s.input_upper)(L.stage_offset[(size_t)i] + c);
          bound_rows.emplace_back(coord + 1, v);
        }
      }
  Mat C_all((Index)bound_rows.size() + C_stack.rows(), N);
  Vec d_all((Index)bound_rows.size() + C_stack.rows());
  C_all.setZero();
  for (size_t r = 0; r < bound_rows.size(); ++r) {
    Index signed_coord = bound_rows[r].first;
    Index coord = std::abs(signed_coord) - 1;
    C_all((Index)r, coord) = signed_coord < 0 ? -1.0 : 1.0;
    d_all((Index)r) = bound_rows[r].second;
  }
  if (C_stack.rows() > 0) {
    C_all.bottomRows(C_stack.rows()) = C_stack;
    d_all.tail(C_stack.rows()) = d_stack;
  }
  return std::make_shared<const Polytope>(
      Polytope::from_rows(std::move(C_all), std::move(d_all), std::move(H_stack),
                          std::move(h_stack)));
}

AssumptionReport scenario_assumptions(const Scenario& s) {
  auto poly = stacked_polytope(s);
  return validate_assumptions(s.dyn, s.conjectures, *poly);
}

ControllerBank make_bank(const Scenario& s, bool warm_start) {
  auto poly = stacked_polytope(s);
  std::vector<ConjectureAssembly> assemblies;
  for (int j = 0; j < s.dyn.num_agents(); ++j) {
    try {
      assemblies.push_back(assemble_with_theta(s.conjectures[(size_t)j], s.dyn, poly));
    } catch (const Error&) {
      rethrow_with_context(std::current_exception(), "agent " + std::to_string(j) + ": ");
    }
  }
  return ControllerBank(s.dyn, std::move(assemblies), s.solver, warm_start);
}

Scenario with_sweep_value(const Scenario& scen, double sval) {
  if (scen.sweep_agent < 0) throw SchemaError("sweep: scenario designates no sweep agent");
  Scenario out = scen;
  ConjectureSet& conj = out.conjectures[(size_t)scen.sweep_agent];
  if (conj.theta_dim() != 2)
    throw SchemaError("sweep: agent " + std::to_string(scen.sweep_agent) +
                      " needs a 2-component theta, has " + std::to_string(conj.theta_dim()));
  Vec theta(2);
  theta << sval, 1.0 - sval;
  conj = conj.with_theta(std::move(theta));
  return out;
}

SweepResult theta_sweep(const Scenario& scen, const std::vector<double>& grid,
                        const SweepOptions& opts) {
  if (scen.sweep_agent < 0) throw SchemaError("sweep: scenario designates no sweep agent");
  if (scen.conjectures[(size_t)scen.sweep_agent].theta_dim() != 2)
    throw SchemaError("sweep: agent " + std::to_string(scen.sweep_agent) +
                      " needs a 2-component theta");
  const double ptol =
      opts.polish_tol > 0 ? opts.polish_tol : 0.1 * scen.sensitivity.equilibrium_tol;

  SweepResult res;
  res.points.resize(grid.size());

  auto run_point = [&](size_t g) {
    SweepPoint& P = res.points[g];
    P.theta = grid[g];
    try {
      Scenario sc = with_sweep_value(scen, grid[g]);
      ControllerBank bank = make_bank(sc);
      SimOptions so = sc.simulate;
      so.threads = 1;
      so.compute_gaps = false;
      TrajectoryLog log = simulate_run(bank, sc.initial_states[0], so);
      if (log.status == TrajectoryLog::Status::Diverged) {
        P.note = "diverged";
        return;
      }
      if (log.status != TrajectoryLog::Status::Converged) {
        P.note = "no convergence within the step budget";
        return;
      }
      P.steps = log.equilibrium ? log.equilibrium->steps_to_converge : (long)log.steps.size();

      Vec x = log.final_x;
      const Mat& A = sc.dyn.A;
      const Mat Bj = sc.dyn.joint_B();
      const Index n_x = sc.dyn.state_dim();
      if (opts.polish) {
        for (int it = 0; it < opts.max_polish; ++it) {
          auto sols = bank.solve_all(x, 1);
          Vec r = x - (A * x + Bj * bank.realized_action(sols));
          if (r.norm() <= ptol) break;
          ActionJacobian J = realized_action_jacobian(bank, x, sols, sc.sensitivity, 1);
          Mat dr = Mat::Identity(n_x, n_x) - A - Bj * J.du_bar_dx;
          x -= Vec(dr.fullPivLu().solve(r));
          ++P.polish_iterations;
        }
      }
      P.converged = true;
      P.x_star = x;

      SensitivityReport rep = equilibrium_sensitivity(bank, x, sc.sensitivity, 1);
      const Index off = rep.actions.theta_offset[(size_t)sc.sweep_agent];
      Vec dir = Vec::Zero(rep.dx_star.cols());
      dir(off) = 1.0;
      dir(off + 1) = -1.0;
      P.dx_dtheta = rep.dx_star * dir;
      P.regular = true;
      if (P.polish_iterations > 0)
        P.note = "polished " + std::to_string(P.polish_iterations) + " Newton steps";
    } catch (const RegularityError& e) {
      P.note = e.what();
    } catch (const Error& e) {
      P.converged = false;
      P.x_star.resize(0);
      P.note = e.what();
    } catch (const std::exception& e) {
      P.converged = false;
      P.note = std::string("unexpected error: ") + e.what();
    }
  };

  if (opts.threads > 1) {
#pragma omp parallel for num_threads(opts.threads) schedule(dynamic)
    for (long g = 0; g < (long)grid.size(); ++g) run_point((size_t)g);
  } else {
    for (size_t g = 0; g < grid.size(); ++g) run_point(g);
  }
  return res;
}

std::vector<double> parse_grid(const std::string& text) {
  const auto c1 = text.find(':');
  const auto c2 = text.find(':', c1 == std::string::npos ? c1 : c1 + 1);
  if (c1 == std::string::npos || c2 == std::string::npos)
    throw SchemaError("grid: expected a:step:b, got '" + text + "'");
  auto num = [&](const std::string& part) {
    errno = 0;
    char* end = nullptr;
    double v = std::strtod(part.c_str(), &end);
    if (end == part.c_str() || (end && *end != '\0') || errno == ERANGE)
      throw SchemaError("grid: '" + part + "' is not a number");
    return v;
  };
  double a = num(text.substr(0, c1));
  double step = num(text.substr(c1 + 1, c2 - c1 - 1));
  double b = num(text.substr(c2 + 1));
  if (!(step > 0)) throw SchemaError("grid: step must be positive");
  if (b < a) throw SchemaError("grid: end before start");
  std::vector<double> grid;
  const double snap = 1e-9 * std::max(1.0, std::abs(b));
  for (long i = 0;; ++i) {
    double t = a + (double)i * step;
    if (t > b + snap) break;
    if (std::abs(t - b) <= snap) t = b;
    grid.push_back(t);
    if ((long)grid.size() > 1000000) throw SchemaError("grid: too many points");
  }
  return grid;
}

} // namespace mpg
