#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lbmpc/dynamics.hpp"

namespace lbmpc {

// Shortest round-trip formatting: 17 significant digits reparse bit-exactly.
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string history_csv_header(int n, int q, int p) {
  std::string h = "t,s_t";
  for (int i = 1; i <= n; ++i) h += ",x" + std::to_string(i);
  for (int i = 1; i <= q; ++i) h += ",u" + std::to_string(i);
  h += ",r";
  for (int i = 1; i <= p; ++i) h += ",theta_hat" + std::to_string(i);
  h += ",mpc_value,solve_status";
  return h;
}

// One row per decision step; a final row carries the terminal state with the
// remaining fields empty.
inline void write_history_csv(std::ostream& os, const History& hist, int n, int q, int p,
                              const std::vector<std::string>& comments = {}) {
  for (const auto& c : comments) os << "# " << c << "\n";
  os << history_csv_header(n, q, p) << "\n";
  for (int t = 0; t < hist.steps(); ++t) {
    os << t << "," << static_cast<int>(hist.explored[t]);
    for (int i = 0; i < n; ++i) os << "," << fmt_double(hist.states[t](i));
    for (int i = 0; i < q; ++i) os << "," << fmt_double(hist.inputs[t](i));
    os << "," << fmt_double(hist.rewards[t]);
    for (int i = 0; i < p; ++i) {
      os << ",";
      if (hist.theta_hat[t].size() == p) os << fmt_double(hist.theta_hat[t](i));
    }
    os << ",";
    if (std::isfinite(hist.mpc_value[t])) os << fmt_double(hist.mpc_value[t]);
    os << "," << hist.solve_status[t] << "\n";
  }
  os << hist.steps() << ",";
  for (int i = 0; i < n; ++i) os << "," << fmt_double(hist.states[hist.steps()](i));
  for (int i = 0; i < q; ++i) os << ",";
  os << ",";
  for (int i = 0; i < p; ++i) os << ",";
  os << ",\n";
}

namespace detail {
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}
}  // namespace detail

// Reads a history CSV produced by write_history_csv (or any CSV with t, an
// exploration column named s_t or explored, x*, u*, r columns).
inline History read_history_csv(std::istream& is) {
  History hist;
  std::string line;
  std::vector<std::string> header;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    header = detail::split_csv_line(line);
    break;
  }
  if (header.empty()) throw ContractError("read_history_csv: missing header");

  int col_t = -1, col_s = -1, col_r = -1, col_value = -1, col_status = -1;
  std::vector<int> col_x, col_u, col_th;
  for (size_t i = 0; i < header.size(); ++i) {
    const std::string& h = header[i];
    if (h == "t") col_t = static_cast<int>(i);
    else if (h == "s_t" || h == "explored") col_s = static_cast<int>(i);
    else if (h == "r") col_r = static_cast<int>(i);
    else if (h == "mpc_value") col_value = static_cast<int>(i);
    else if (h == "solve_status") col_status = static_cast<int>(i);
    else if (h.rfind("theta_hat", 0) == 0) col_th.push_back(static_cast<int>(i));
    else if (h[0] == 'x') col_x.push_back(static_cast<int>(i));
    else if (h[0] == 'u') col_u.push_back(static_cast<int>(i));
  }
  if (col_t < 0 || col_r < 0 || col_x.empty() || col_u.empty()) {
    throw ContractError("read_history_csv: unrecognized header");
  }

  const int n = static_cast<int>(col_x.size());
  const int q = static_cast<int>(col_u.size());
  const int p = static_cast<int>(col_th.size());
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto f = detail::split_csv_line(line);
    VectorXd x(n);
    for (int i = 0; i < n; ++i) x(i) = std::stod(f[col_x[i]]);
    const bool terminal = f[col_u[0]].empty();
    if (terminal) {
      hist.states.push_back(x);
      break;
    }
    hist.states.push_back(x);
    VectorXd u(q);
    for (int i = 0; i < q; ++i) u(i) = std::stod(f[col_u[i]]);
    hist.inputs.push_back(u);
    hist.rewards.push_back(std::stod(f[col_r]));
    hist.explored.push_back(col_s >= 0 && !f[col_s].empty() && f[col_s] != "0" ? 1 : 0);
    VectorXd th;
    if (p > 0 && !f[col_th[0]].empty()) {
      th.resize(p);
      for (int i = 0; i < p; ++i) th(i) = std::stod(f[col_th[i]]);
    }
    hist.theta_hat.push_back(th);
    hist.mpc_value.push_back(col_value >= 0 && !f[col_value].empty()
                                 ? std::stod(f[col_value])
                                 : std::numeric_limits<double>::quiet_NaN());
    hist.solve_status.push_back(col_status >= 0 ? f[col_status] : "");
    hist.x_violation.push_back(0);
  }
  // A writer always emits the terminal state row; if it was absent the last
  // recorded state doubles as terminal and the step arrays stay consistent.
  if (!hist.lengths_consistent()) {
    if (hist.states.size() == hist.inputs.size()) {
      // no terminal row: drop the final step's annotations
      hist.inputs.pop_back();
      hist.rewards.pop_back();
      hist.explored.pop_back();
      hist.theta_hat.pop_back();
      hist.mpc_value.pop_back();
      hist.solve_status.pop_back();
      hist.x_violation.pop_back();
    }
  }
  if (!hist.lengths_consistent()) throw ContractError("read_history_csv: inconsistent lengths");
  return hist;
}

}  // namespace lbmpc
