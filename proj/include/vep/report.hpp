#ifndef VEP_REPORT_HPP
#define VEP_REPORT_HPP

#include "vep/solver.hpp"

#include <nlohmann/json.hpp>

#include <ostream>

namespace vep {

using Json = nlohmann::ordered_json;

inline constexpr const char* kToolVersion = "0.1.0";

inline Json to_json(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline Json to_json(const std::vector<Vec>& vs) {
  Json a = Json::array();
  for (const auto& v : vs) a.push_back(to_json(v));
  return a;
}

inline Json to_json(const std::vector<std::string>& vs) {
  Json a = Json::array();
  for (const auto& s : vs) a.push_back(s);
  return a;
}

inline Json to_json(const Mat& m) {
  Json a = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(to_json(Vec(m.row(r).transpose())));
  return a;
}

inline Json to_json(const MeritEval& e) {
  Json j;
  j["nu"] = e.nu;
  j["mu"] = e.mu;
  j["merit"] = e.merit;
  j["argmax_z"] = to_json(e.argmax_z);
  j["method"] = e.method;
  j["flags"] = to_json(e.flags);
  return j;
}

inline Json to_json(const Certificate& c) {
  Json j;
  j["kind"] = c.kind;
  j["verdict"] = verdict_name(c.verdict);
  j["constant"] = c.constant;
  j["witnesses"] = to_json(c.witnesses);
  Json res = Json::object();
  for (const auto& [k, v] : c.resolution) res[k] = v;
  j["resolution"] = res;
  j["flags"] = to_json(c.flags);
  return j;
}

inline Json to_json(const StationarityReport& r) {
  Json j;
  j["point"] = to_json(stack(r.xi, r.x));
  j["gamma"] = r.gamma;
  Json lam = Json::array();
  for (double l : r.lambdas) lam.push_back(l);
  j["lambda_grid"] = lam;
  if (!r.eps.empty()) {
    Json e = Json::array();
    for (double v : r.eps) e.push_back(v);
    j["eps"] = e;
  }
  j["residual_table"] = to_json(r.residual_table);
  j["residual"] = r.residual;
  j["lambda"] = r.lambda;
  j["branch_id"] = r.branch_id;
  j["verdict"] = stationarity_name(r.verdict);
  if (r.verdict == StationarityVerdict::stationary) {
    Json w = Json::object();
    for (std::size_t i = 0; i < r.witness.size(); ++i) w[r.witness_labels[i]] = to_json(r.witness[i]);
    j["witness"] = w;
  }
  if (r.verdict == StationarityVerdict::refuted) {
    j["direction"] = to_json(r.direction);
    j["c0"] = r.c0;
    j["c1"] = r.c1;
  }
  j["flags"] = to_json(r.flags);
  return j;
}

inline Json to_json(const SolveResult& s, bool with_trace) {
  Json j;
  j["status"] = s.status;
  j["xi"] = to_json(s.xi);
  j["x"] = to_json(s.x);
  j["objective"] = s.objective;
  j["merit"] = s.merit;
  j["lambda"] = s.lambda;
  j["feasible"] = s.feasible;
  Json stages = Json::array();
  for (const auto& st : s.stages) {
    Json e;
    e["lambda"] = st.lambda;
    e["point"] = to_json(stack(st.xi, st.x));
    e["value"] = st.value;
    e["merit"] = st.merit;
    e["iterations"] = st.iterations;
    stages.push_back(e);
  }
  j["stages"] = stages;
  j["trace_length"] = s.trace.size();
  if (with_trace) {
    Json tr = Json::array();
    for (const auto& t : s.trace) tr.push_back({t.stage, t.start, t.iter, t.lambda, t.value, t.step, t.radius});
    j["trace"] = tr;
  }
  return j;
}

namespace detail {

inline std::string scalar_text(const Json& v) {
  if (v.is_number_float()) return format_number(v.get<double>());
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

inline bool is_flat_array(const Json& v) {
  if (!v.is_array()) return false;
  return std::all_of(v.begin(), v.end(), [](const Json& e) { return e.is_primitive(); });
}

inline std::string flat_array_text(const Json& v) {
  std::string s = "[";
  bool first = true;
  for (const auto& e : v) {
    if (!first) s += ", ";
    s += scalar_text(e);
    first = false;
  }
  return s + "]";
}

inline void render_text(std::ostream& os, const Json& j, int indent) {
  const std::string pad(static_cast<std::size_t>(indent), ' ');
  for (const auto& [key, val] : j.items()) {
    if (val.is_object()) {
      if (val.empty()) {
        os << pad << key << ": {}\n";
      } else {
        os << pad << key << ":\n";
        render_text(os, val, indent + 2);
      }
    } else if (val.is_array() && !is_flat_array(val)) {
      if (val.empty()) {
        os << pad << key << ": []\n";
        continue;
      }
      os << pad << key << ":\n";
      for (const auto& e : val) {
        if (e.is_object()) {
          os << pad << "  -\n";
          render_text(os, e, indent + 4);
        } else {
          os << pad << "  - " << (is_flat_array(e) ? flat_array_text(e) : e.dump()) << "\n";
        }
      }
    } else if (val.is_array()) {
      os << pad << key << ": " << flat_array_text(val) << "\n";
    } else {
      os << pad << key << ": " << scalar_text(val) << "\n";
    }
  }
}

}  // namespace detail

/// A report: header fields, parameters, results and (separately) timings.
struct Report {
  Json body = Json::object();
  Json timings = Json::object();

  void render(std::ostream& os, bool json_like, bool with_timings) const {
    if (json_like) {
      Json doc = body;
      if (with_timings) doc["timings"] = timings;
      os << doc.dump(2) << "\n";
      return;
    }
    detail::render_text(os, body, 0);
    if (with_timings && !timings.empty()) {
      os << "timings:\n";
      detail::render_text(os, timings, 2);
    }
  }
};

}  // namespace vep

#endif  // VEP_REPORT_HPP
