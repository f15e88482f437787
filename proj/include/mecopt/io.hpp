#pragma once

// JSON serialization of scenarios, channel realizations, and solve reports.
// Config documents carry a schema_version field and parsing is strict:
// unknown keys are rejected, missing keys are errors.

#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "mecopt/model.hpp"
#include "mecopt/report.hpp"

namespace mecopt::io {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

namespace detail {

inline void require_keys(const json& j, const std::set<std::string>& keys,
                         const std::string& what) {
  for (const auto& item : j.items())
    if (!keys.count(item.key()))
      throw std::invalid_argument(what + ": unknown key '" + item.key() + "'");
  for (const auto& key : keys)
    if (!j.contains(key)) throw std::invalid_argument(what + ": missing key '" + key + "'");
  if (j.at("schema_version").get<int>() != kSchemaVersion)
    throw std::invalid_argument(what + ": unsupported schema_version");
}

}  // namespace detail

inline json to_json(const Scenario& sc) {
  return json{{"schema_version", kSchemaVersion},
              {"K", sc.K},
              {"M_u", sc.M_u},
              {"M_d", sc.M_d},
              {"N_u", sc.N_u},
              {"N_d", sc.N_d},
              {"tau", sc.tau},
              {"B_s", sc.B_s},
              {"B_k", sc.B_k},
              {"D_k", sc.D_k},
              {"Gamma_k", sc.Gamma_k},
              {"c_k", sc.c_k},
              {"eps_u_k", sc.eps_u_k},
              {"eps_d_k", sc.eps_d_k},
              {"P_k_max", sc.P_k_max},
              {"w_k", sc.w_k},
              {"delta_k", sc.delta_k},
              {"P_max", sc.P_max},
              {"delta_BS", sc.delta_BS},
              {"P_cir", sc.P_cir},
              {"kappa", sc.kappa},
              {"f_max", sc.f_max}};
}

inline Scenario scenario_from_json(const json& j) {
  detail::require_keys(j,
                       {"schema_version", "K", "M_u", "M_d", "N_u", "N_d", "tau", "B_s", "B_k",
                        "D_k", "Gamma_k", "c_k", "eps_u_k", "eps_d_k", "P_k_max", "w_k", "delta_k",
                        "P_max", "delta_BS", "P_cir", "kappa", "f_max"},
                       "scenario");
  Scenario sc;
  sc.K = j.at("K").get<int>();
  sc.M_u = j.at("M_u").get<int>();
  sc.M_d = j.at("M_d").get<int>();
  sc.N_u = j.at("N_u").get<int>();
  sc.N_d = j.at("N_d").get<int>();
  sc.tau = j.at("tau").get<int>();
  sc.B_s = j.at("B_s").get<double>();
  sc.B_k = j.at("B_k").get<std::vector<double>>();
  sc.D_k = j.at("D_k").get<std::vector<int>>();
  sc.Gamma_k = j.at("Gamma_k").get<std::vector<double>>();
  sc.c_k = j.at("c_k").get<std::vector<double>>();
  sc.eps_u_k = j.at("eps_u_k").get<std::vector<double>>();
  sc.eps_d_k = j.at("eps_d_k").get<std::vector<double>>();
  sc.P_k_max = j.at("P_k_max").get<std::vector<double>>();
  sc.w_k = j.at("w_k").get<std::vector<double>>();
  sc.delta_k = j.at("delta_k").get<std::vector<double>>();
  sc.P_max = j.at("P_max").get<double>();
  sc.delta_BS = j.at("delta_BS").get<double>();
  sc.P_cir = j.at("P_cir").get<double>();
  sc.kappa = j.at("kappa").get<double>();
  sc.f_max = j.at("f_max").get<double>();
  sc.validate();
  return sc;
}

inline json to_json(const ChannelRealization& ch) {
  json gu = json::array(), gd = json::array();
  for (int k = 0; k < ch.K; ++k) {
    gu.push_back(std::vector<double>(ch.gains_u(k).begin(), ch.gains_u(k).end()));
    gd.push_back(std::vector<double>(ch.gains_d(k).begin(), ch.gains_d(k).end()));
  }
  return json{{"schema_version", kSchemaVersion},
              {"rng", ch.rng},
              {"seed", ch.seed},
              {"distances_m", ch.distances_m},
              {"g_u", gu},
              {"g_d", gd}};
}

inline ChannelRealization channel_from_json(const json& j) {
  detail::require_keys(j, {"schema_version", "rng", "seed", "distances_m", "g_u", "g_d"},
                       "channel");
  ChannelRealization ch;
  ch.rng = j.at("rng").get<std::string>();
  ch.seed = j.at("seed").get<std::uint64_t>();
  ch.distances_m = j.at("distances_m").get<std::vector<double>>();
  const auto& gu = j.at("g_u");
  const auto& gd = j.at("g_d");
  ch.K = static_cast<int>(gu.size());
  if (ch.K == 0 || gd.size() != gu.size())
    throw std::invalid_argument("channel: gain arrays must be nonempty with matching user count");
  ch.M_u = static_cast<int>(gu.at(0).size());
  ch.M_d = static_cast<int>(gd.at(0).size());
  for (int k = 0; k < ch.K; ++k) {
    auto row_u = gu.at(k).get<std::vector<double>>();
    auto row_d = gd.at(k).get<std::vector<double>>();
    if (row_u.size() != static_cast<std::size_t>(ch.M_u) ||
        row_d.size() != static_cast<std::size_t>(ch.M_d))
      throw std::invalid_argument("channel: ragged gain rows");
    ch.g_u.insert(ch.g_u.end(), row_u.begin(), row_u.end());
    ch.g_d.insert(ch.g_d.end(), row_d.begin(), row_d.end());
  }
  ch.validate();
  return ch;
}

inline json to_json(const Allocation& a) {
  auto grid_b = [](const Grid3<std::uint8_t>& g) {
    json out = json::array();
    for (int k = 0; k < g.K; ++k) {
      json user = json::array();
      for (int m = 0; m < g.M; ++m) {
        std::vector<int> row(g.N);
        for (int n = 0; n < g.N; ++n) row[n] = g.at(k, m, n);
        user.push_back(row);
      }
      out.push_back(user);
    }
    return out;
  };
  auto grid_d = [](const Grid3<double>& g) {
    json out = json::array();
    for (int k = 0; k < g.K; ++k) {
      json user = json::array();
      for (int m = 0; m < g.M; ++m) {
        std::vector<double> row(g.N);
        for (int n = 0; n < g.N; ++n) row[n] = g.at(k, m, n);
        user.push_back(row);
      }
      out.push_back(user);
    }
    return out;
  };
  return json{{"s_u", grid_b(a.s_u)}, {"s_d", grid_b(a.s_d)}, {"p_u", grid_d(a.p_u)},
              {"p_d", grid_d(a.p_d)}, {"f", a.f},             {"alpha", a.alpha}};
}

inline Allocation allocation_from_json(const json& j, const Scenario& sc) {
  Allocation a = Allocation::zeros(sc);
  for (int k = 0; k < sc.K; ++k) {
    for (int m = 0; m < sc.M_u; ++m)
      for (int n = 0; n < sc.N_u; ++n) {
        a.s_u.at(k, m, n) = j.at("s_u").at(k).at(m).at(n).get<int>();
        a.p_u.at(k, m, n) = j.at("p_u").at(k).at(m).at(n).get<double>();
      }
    for (int m = 0; m < sc.M_d; ++m)
      for (int n = 0; n < sc.N_d; ++n) {
        a.s_d.at(k, m, n) = j.at("s_d").at(k).at(m).at(n).get<int>();
        a.p_d.at(k, m, n) = j.at("p_d").at(k).at(m).at(n).get<double>();
      }
    a.f[k] = j.at("f").at(k).get<double>();
    a.alpha[k] = j.at("alpha").at(k).get<int>();
  }
  return a;
}

inline json to_json(const SolveReport& r) {
  json j{{"schema_version", kSchemaVersion},
         {"algo", r.algo},
         {"status", to_string(r.status)},
         {"objective_w", r.objective_w},
         {"objective_dbm", watts_to_dbm(r.objective_w)},
         {"lower_bound_w", r.lower_bound_w},
         {"gap", r.gap},
         {"iterations", r.iterations},
         {"proven_optimal", r.proven_optimal},
         {"alpha", r.alpha},
         {"offload_count", r.offload_count()},
         {"rounding_residual", r.rounding_residual},
         {"penalty_value_final", r.penalty_final},
         {"lower_bound_only", r.lower_bound_only},
         {"wall_ms", r.wall_ms}};
  if (r.has_allocation) j["allocation"] = to_json(r.allocation);
  return j;
}

inline json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  in >> j;
  return j;
}

inline void save_json(const std::string& path, const json& j, int indent = 2) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(indent) << "\n";
}

}  // namespace mecopt::io
