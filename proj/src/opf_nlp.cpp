#include <algorithm>
#include <map>
#include <queue>
#include <set>

#include "dip/opf.hpp"

namespace dip::opf {

OpfRegionModel::OpfRegionModel(const OpfCase& c, Layout layout)
    : layout_(std::move(layout)), base_(c.base_mva), slack_voltage_(c.slack_voltage) {
  scale_ = 1.0 / (base_ * base_);
  const int n_own = layout_.n_own();
  const int n_ext = layout_.n_ext();

  std::map<int, int> ext_index;  // case bus position -> local ext index
  for (int i = 0; i < n_ext; ++i) {
    const int pos = i < n_own ? layout_.own_buses[i] : layout_.copy_buses[i - n_own];
    if (pos < 0 || pos >= static_cast<int>(c.buses.size())) {
      throw InstanceError("region layout references bus position " + std::to_string(pos));
    }
    if (!ext_index.emplace(pos, i).second) {
      throw InstanceError("region layout lists bus position " + std::to_string(pos) + " twice");
    }
  }
  ext_of_position_ = std::move(ext_index);

  if (layout_.has_reference) {
    const int slack = c.slack_position();
    const auto it = ext_of_position_.find(slack);
    if (it == ext_of_position_.end() || it->second >= n_own) {
      throw InstanceError("reference region does not own the slack bus");
    }
    reference_own_ = it->second;
  }

  p_dem_.resize(n_own);
  q_dem_.resize(n_own);
  v2_min_.resize(n_own);
  v2_max_.resize(n_own);
  for (int r = 0; r < n_own; ++r) {
    const auto& bus = c.buses[layout_.own_buses[r]];
    p_dem_[r] = bus.p_demand;
    q_dem_[r] = bus.q_demand;
    v2_min_[r] = bus.v_min * bus.v_min;
    v2_max_[r] = bus.v_max * bus.v_max;
  }

  // Admittance rows of own buses over the extended bus set. A branch
  // contributes to an own row whenever its row-side endpoint is own; the
  // column endpoint must then be local too (own or a tie copy).
  std::vector<std::map<int, std::complex<double>>> rows(n_own);
  auto stamp = [&](int row_pos, int col_pos, std::complex<double> value) {
    const auto row_it = ext_of_position_.find(row_pos);
    if (row_it == ext_of_position_.end() || row_it->second >= n_own) return;
    const auto col_it = ext_of_position_.find(col_pos);
    if (col_it == ext_of_position_.end()) {
      throw InstanceError("own bus " + std::to_string(c.buses[row_pos].id) +
                          " is coupled to bus " + std::to_string(c.buses[col_pos].id) +
                          " outside the region layout");
    }
    rows[row_it->second][col_it->second] += value;
  };
  for (const auto& br : c.branches) {
    if (!br.in_service) continue;
    if (br.r == 0.0 && br.x == 0.0) {
      throw InstanceError("branch " + std::to_string(br.from) + "-" + std::to_string(br.to) +
                          " has zero impedance");
    }
    const int f = c.bus_position(br.from);
    const int t = c.bus_position(br.to);
    if (!ext_of_position_.count(f) && !ext_of_position_.count(t)) continue;
    const std::complex<double> y = 1.0 / std::complex<double>(br.r, br.x);
    const std::complex<double> ysh(0.0, br.b_charge / 2.0);
    const double tau = br.tap;
    stamp(f, f, (y + ysh) / (tau * tau));
    stamp(f, t, -y / tau);
    stamp(t, t, y + ysh);
    stamp(t, f, -y / tau);
  }
  for (int r = 0; r < n_own; ++r) {
    const auto& bus = c.buses[layout_.own_buses[r]];
    if (bus.g_shunt != 0.0 || bus.b_shunt != 0.0) {
      rows[r][r] += std::complex<double>(bus.g_shunt, bus.b_shunt);
    }
  }
  y_rows_.resize(n_own);
  for (int r = 0; r < n_own; ++r) {
    for (const auto& [col, y] : rows[r]) y_rows_[r].push_back({col, y.real(), y.imag()});
  }

  gens_at_bus_.resize(n_own);
  for (int gpos : layout_.gens) {
    const auto& g = c.generators.at(gpos);
    if (!g.in_service) {
      throw InstanceError("region layout lists an out-of-service generator");
    }
    const auto it = ext_of_position_.find(c.bus_position(g.bus));
    if (it == ext_of_position_.end() || it->second >= n_own) {
      throw InstanceError("generator at bus " + std::to_string(g.bus) +
                          " does not sit on an own bus of its region");
    }
    GenData gd;
    gd.own = it->second;
    gd.p_min = g.p_min;
    gd.p_max = g.p_max;
    gd.q_min = g.q_min;
    gd.q_max = g.q_max;
    gd.c2r = g.c2;
    gd.c1r = g.c1;
    gd.c0r = g.c0;
    gd.c2s = g.c2 * base_ * base_ * scale_;
    gd.c1s = g.c1 * base_ * scale_;
    gd.c0s = g.c0 * scale_;
    gens_at_bus_[gd.own].push_back(static_cast<int>(gens_.size()));
    gens_.push_back(gd);
  }
}

int OpfRegionModel::num_eq() const {
  return 2 * layout_.n_own() + (layout_.has_reference ? 2 : 0);
}

int OpfRegionModel::num_ineq() const { return 4 * layout_.n_gen() + 2 * layout_.n_own(); }

int OpfRegionModel::ext_index_of(int bus_position) const {
  const auto it = ext_of_position_.find(bus_position);
  return it == ext_of_position_.end() ? -1 : it->second;
}

void OpfRegionModel::eval(const Vector& x, SubsystemEval& out) const {
  const int n_own = layout_.n_own();
  const int n_gen = layout_.n_gen();

  out.g.resize(num_eq());
  out.h.resize(num_ineq());
  out.f = 0.0;

  for (int j = 0; j < n_gen; ++j) {
    const double p = x[layout_.p_index(j)];
    out.f += gens_[j].c2s * p * p + gens_[j].c1s * p + gens_[j].c0s;
  }

  for (int r = 0; r < n_own; ++r) {
    const double e_r = x[layout_.e_index(r)];
    const double f_r = x[layout_.f_index(r)];
    double cr = 0.0, dr = 0.0;
    for (const YEntry& yn : y_rows_[r]) {
      const double e_m = x[layout_.e_index(yn.ext)];
      const double f_m = x[layout_.f_index(yn.ext)];
      cr += yn.g * e_m - yn.b * f_m;
      dr += yn.b * e_m + yn.g * f_m;
    }
    double p_gen = 0.0, q_gen = 0.0;
    for (int j : gens_at_bus_[r]) {
      p_gen += x[layout_.p_index(j)];
      q_gen += x[layout_.q_index(j)];
    }
    out.g[r] = (e_r * cr + f_r * dr) - p_gen + p_dem_[r];
    out.g[n_own + r] = (f_r * cr - e_r * dr) - q_gen + q_dem_[r];

    const double v2 = e_r * e_r + f_r * f_r;
    out.h[4 * n_gen + 2 * r] = v2_min_[r] - v2;
    out.h[4 * n_gen + 2 * r + 1] = v2 - v2_max_[r];
  }

  if (layout_.has_reference) {
    out.g[2 * n_own] = x[layout_.e_index(reference_own_)] - slack_voltage_.real();
    out.g[2 * n_own + 1] = x[layout_.f_index(reference_own_)] - slack_voltage_.imag();
  }

  for (int j = 0; j < n_gen; ++j) {
    const double p = x[layout_.p_index(j)];
    const double q = x[layout_.q_index(j)];
    out.h[4 * j] = gens_[j].p_min - p;
    out.h[4 * j + 1] = p - gens_[j].p_max;
    out.h[4 * j + 2] = gens_[j].q_min - q;
    out.h[4 * j + 3] = q - gens_[j].q_max;
  }
}

void OpfRegionModel::eval_derivs(const Vector& x, const Vector& gamma, const Vector& mu,
                                 SubsystemDerivs& out) const {
  const int n_own = layout_.n_own();
  const int n_gen = layout_.n_gen();
  const int n = num_vars();

  out.grad_f = Vector::Zero(n);
  out.jac_g = Matrix::Zero(num_eq(), n);
  out.jac_h = Matrix::Zero(num_ineq(), n);
  out.hess_lag = Matrix::Zero(n, n);

  for (int j = 0; j < n_gen; ++j) {
    const int pj = layout_.p_index(j);
    out.grad_f[pj] = 2.0 * gens_[j].c2s * x[pj] + gens_[j].c1s;
    out.hess_lag(pj, pj) += 2.0 * gens_[j].c2s;
  }

  for (int r = 0; r < n_own; ++r) {
    const int er = layout_.e_index(r);
    const int fr = layout_.f_index(r);
    const double e_r = x[er];
    const double f_r = x[fr];
    double cr = 0.0, dr = 0.0;
    for (const YEntry& yn : y_rows_[r]) {
      cr += yn.g * x[layout_.e_index(yn.ext)] - yn.b * x[layout_.f_index(yn.ext)];
      dr += yn.b * x[layout_.e_index(yn.ext)] + yn.g * x[layout_.f_index(yn.ext)];
    }

    const int rowP = r;
    const int rowQ = n_own + r;
    const double gP = gamma.size() > 0 ? gamma[rowP] : 0.0;
    const double gQ = gamma.size() > 0 ? gamma[rowQ] : 0.0;

    for (const YEntry& yn : y_rows_[r]) {
      const int em = layout_.e_index(yn.ext);
      const int fm = layout_.f_index(yn.ext);
      // P = e_r c_r + f_r d_r, Q = f_r c_r - e_r d_r with c, d linear in (e, f).
      out.jac_g(rowP, em) += e_r * yn.g + f_r * yn.b;
      out.jac_g(rowP, fm) += -e_r * yn.b + f_r * yn.g;
      out.jac_g(rowQ, em) += f_r * yn.g - e_r * yn.b;
      out.jac_g(rowQ, fm) += -f_r * yn.b - e_r * yn.g;

      // gamma_P * hess(P): outer products of unit vectors with the c/d rows.
      out.hess_lag(er, em) += gP * yn.g;
      out.hess_lag(em, er) += gP * yn.g;
      out.hess_lag(er, fm) -= gP * yn.b;
      out.hess_lag(fm, er) -= gP * yn.b;
      out.hess_lag(fr, em) += gP * yn.b;
      out.hess_lag(em, fr) += gP * yn.b;
      out.hess_lag(fr, fm) += gP * yn.g;
      out.hess_lag(fm, fr) += gP * yn.g;

      // gamma_Q * hess(Q)
      out.hess_lag(fr, em) += gQ * yn.g;
      out.hess_lag(em, fr) += gQ * yn.g;
      out.hess_lag(fr, fm) -= gQ * yn.b;
      out.hess_lag(fm, fr) -= gQ * yn.b;
      out.hess_lag(er, em) -= gQ * yn.b;
      out.hess_lag(em, er) -= gQ * yn.b;
      out.hess_lag(er, fm) -= gQ * yn.g;
      out.hess_lag(fm, er) -= gQ * yn.g;
    }
    out.jac_g(rowP, er) += cr;
    out.jac_g(rowP, fr) += dr;
    out.jac_g(rowQ, er) -= dr;
    out.jac_g(rowQ, fr) += cr;

    for (int j : gens_at_bus_[r]) {
      out.jac_g(rowP, layout_.p_index(j)) = -1.0;
      out.jac_g(rowQ, layout_.q_index(j)) = -1.0;
    }

    const int row_lo = 4 * n_gen + 2 * r;
    const int row_hi = row_lo + 1;
    out.jac_h(row_lo, er) = -2.0 * e_r;
    out.jac_h(row_lo, fr) = -2.0 * f_r;
    out.jac_h(row_hi, er) = 2.0 * e_r;
    out.jac_h(row_hi, fr) = 2.0 * f_r;
    if (mu.size() > 0) {
      const double w = 2.0 * (mu[row_hi] - mu[row_lo]);
      out.hess_lag(er, er) += w;
      out.hess_lag(fr, fr) += w;
    }
  }

  if (layout_.has_reference) {
    out.jac_g(2 * n_own, layout_.e_index(reference_own_)) = 1.0;
    out.jac_g(2 * n_own + 1, layout_.f_index(reference_own_)) = 1.0;
  }

  for (int j = 0; j < n_gen; ++j) {
    out.jac_h(4 * j, layout_.p_index(j)) = -1.0;
    out.jac_h(4 * j + 1, layout_.p_index(j)) = 1.0;
    out.jac_h(4 * j + 2, layout_.q_index(j)) = -1.0;
    out.jac_h(4 * j + 3, layout_.q_index(j)) = 1.0;
  }
}

double OpfRegionModel::raw_objective(const Vector& x) const {
  double f = 0.0;
  for (int j = 0; j < layout_.n_gen(); ++j) {
    const double p_mw = x[layout_.p_index(j)] * base_;
    f += gens_[j].c2r * p_mw * p_mw + gens_[j].c1r * p_mw + gens_[j].c0r;
  }
  return f;
}

Vector OpfRegionModel::flat_start_x() const {
  Vector x = Vector::Zero(num_vars());
  for (int i = 0; i < layout_.n_ext(); ++i) x[layout_.e_index(i)] = 1.0;
  for (int j = 0; j < layout_.n_gen(); ++j) {
    x[layout_.p_index(j)] = 0.5 * (gens_[j].p_min + gens_[j].p_max);
    x[layout_.q_index(j)] = 0.5 * (gens_[j].q_min + gens_[j].q_max);
  }
  return x;
}

CentralizedOpf build_opf_nlp(const OpfCase& c) {
  c.validate();
  const int n = static_cast<int>(c.buses.size());

  // Every bus must reach the slack through in-service branches.
  std::vector<std::vector<int>> adjacency(n);
  for (const auto& br : c.branches) {
    if (!br.in_service) continue;
    const int f = c.bus_position(br.from);
    const int t = c.bus_position(br.to);
    adjacency[f].push_back(t);
    adjacency[t].push_back(f);
  }
  std::vector<bool> reached(n, false);
  std::queue<int> frontier;
  frontier.push(c.slack_position());
  reached[c.slack_position()] = true;
  while (!frontier.empty()) {
    const int u = frontier.front();
    frontier.pop();
    for (int w : adjacency[u]) {
      if (!reached[w]) {
        reached[w] = true;
        frontier.push(w);
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    if (!reached[i]) {
      throw InstanceError("bus " + std::to_string(c.buses[i].id) + " has no path to the slack bus");
    }
  }

  OpfRegionModel::Layout layout;
  layout.own_buses.resize(n);
  for (int i = 0; i < n; ++i) layout.own_buses[i] = i;
  for (std::size_t g = 0; g < c.generators.size(); ++g) {
    if (c.generators[g].in_service) layout.gens.push_back(static_cast<int>(g));
  }
  layout.has_reference = true;

  CentralizedOpf out{std::make_shared<OpfRegionModel>(c, layout), 0.0};
  out.objective_scale = out.model->objective_scale();
  return out;
}

}  // namespace dip::opf
