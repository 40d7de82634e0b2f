#pragma once

#include <Eigen/Sparse>

#include <complex>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "dip/problem.hpp"

namespace dip::opf {

enum class BusType { Slack, PV, PQ };

/// Power-grid case data, per-unit on base_mva.
struct OpfCase {
  struct Bus {
    int id = 0;
    BusType type = BusType::PQ;
    double p_demand = 0.0, q_demand = 0.0;  // per-unit
    double v_min = 0.9, v_max = 1.1;
    double g_shunt = 0.0, b_shunt = 0.0;  // per-unit, folded into Y
  };
  struct Branch {
    int from = 0, to = 0;  // bus ids
    double r = 0.0, x = 0.0, b_charge = 0.0;
    double tap = 1.0;
    bool in_service = true;
  };
  struct Generator {
    int bus = 0;
    double p_min = 0.0, p_max = 0.0;  // per-unit
    double q_min = 0.0, q_max = 0.0;
    double c2 = 0.0, c1 = 0.0, c0 = 0.0;  // $/MW^2h, $/MWh, $/h
    bool in_service = true;
  };

  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> generators;
  // Reference value for the slack-bus voltage (Eq. constraint v at the
  // reference bus); the case format carries no explicit phasor, so 1+0j.
  std::complex<double> slack_voltage{1.0, 0.0};

  int bus_position(int id) const;  // index into `buses`; throws on unknown id
  int slack_position() const;
  void validate() const;
};

/// Parses the documented MATPOWER subset: baseMVA plus the bus, gen, branch
/// and gencost matrices, polynomial cost model 2 up to quadratic terms, no
/// phase shifters. Demands, shunts and generator limits are converted to
/// per-unit. Parse errors carry 1-based line numbers.
OpfCase parse_matpower_case(const std::string& text);
OpfCase load_matpower_file(const std::string& path);

/// Writes a case in the same subset (used by make-interconnected).
std::string write_matpower_case(const OpfCase& c, const std::string& name);

using ComplexSparse = Eigen::SparseMatrix<std::complex<double>>;

/// Standard bus-admittance construction over in-service branches:
/// y = 1/(r + jx), charging split evenly, from-side tap ratio tau:
///   Y_ff += (y + j b/2)/tau^2,  Y_tt += y + j b/2,
///   Y_ft -= y/tau,             Y_tf -= y/tau,
/// plus bus shunts on the diagonal. Indices are bus positions.
ComplexSparse build_admittance(const OpfCase& c);

/// One tie line between two copies of the base case.
struct TieSpec {
  int copy_a = 1;  // 1-based copy index
  int bus_a = 0;   // original bus id
  int copy_b = 2;
  int bus_b = 0;
  double r = 0.0, x = 0.0, b = 0.0;
};

std::vector<TieSpec> parse_tie_specs_json(const std::string& text);
std::vector<TieSpec> load_tie_specs_file(const std::string& path);

struct InterconnectedCase {
  OpfCase combined;
  std::vector<int> region_of_bus;  // by bus position, 0-based regions
  int regions = 0;
};

/// Replicates the case k times, renumbers bus ids by copy stride, demotes the
/// slack of copies 2..k to PV, and appends the tie branches.
InterconnectedCase interconnect_copies(const OpfCase& base, int k, const std::vector<TieSpec>& ties);

/// AC OPF region model in rectangular voltage coordinates. Variables are
/// x = (e, f over own+copy buses; p, q over own generators); equalities are
/// the active/reactive power balances at own buses plus the reference rows
/// when the region owns the slack; inequalities are generator box bounds and
/// squared voltage-magnitude bounds. All constraints are polynomials of
/// degree <= 2 with exact analytic derivatives.
///
/// The internal objective is the generation cost nondimensionalized by
/// 1/base_mva^2 so all KKT rows live on comparable scales; raw_objective
/// returns dollars per hour.
class OpfRegionModel : public SubsystemModel {
 public:
  struct Layout {
    std::vector<int> own_buses;   // case bus positions, ascending
    std::vector<int> copy_buses;  // case bus positions of foreign tie endpoints
    std::vector<int> gens;        // case generator positions at own buses
    bool has_reference = false;

    int n_own() const { return static_cast<int>(own_buses.size()); }
    int n_ext() const { return n_own() + static_cast<int>(copy_buses.size()); }
    int n_gen() const { return static_cast<int>(gens.size()); }
    int e_index(int ext) const { return ext; }
    int f_index(int ext) const { return n_ext() + ext; }
    int p_index(int g) const { return 2 * n_ext() + g; }
    int q_index(int g) const { return 2 * n_ext() + n_gen() + g; }
    int num_vars() const { return 2 * n_ext() + 2 * n_gen(); }
  };

  OpfRegionModel(const OpfCase& c, Layout layout);

  int num_vars() const override { return layout_.num_vars(); }
  int num_eq() const override;
  int num_ineq() const override;
  void eval(const Vector& x, SubsystemEval& out) const override;
  void eval_derivs(const Vector& x, const Vector& gamma, const Vector& mu,
                   SubsystemDerivs& out) const override;

  const Layout& layout() const { return layout_; }
  double objective_scale() const { return scale_; }

  /// Generation cost in dollars per hour:
  ///   sum_g c2 (p_g base)^2 + c1 (p_g base) + c0.
  double raw_objective(const Vector& x) const;

  /// Flat start: e = 1, f = 0 everywhere (copies included), generator
  /// outputs at the midpoint of their bounds.
  Vector flat_start_x() const;

  /// Local ext index of a case bus position, or -1.
  int ext_index_of(int bus_position) const;

 private:
  struct YEntry {
    int ext = 0;  // column, local ext index
    double g = 0.0, b = 0.0;
  };
  struct GenData {
    int own = 0;  // local own-bus index
    double p_min, p_max, q_min, q_max;
    double c2s, c1s, c0s;   // scaled cost coefficients
    double c2r, c1r, c0r;   // raw, dollar-valued
  };

  Layout layout_;
  double base_ = 100.0;
  double scale_ = 1.0;
  std::complex<double> slack_voltage_;
  int reference_own_ = -1;                   // own index of the slack bus
  std::map<int, int> ext_of_position_;       // case bus position -> ext index
  std::vector<std::vector<YEntry>> y_rows_;  // one per own bus
  std::vector<double> p_dem_, q_dem_;        // per own bus
  std::vector<double> v2_min_, v2_max_;      // squared bounds per own bus
  std::vector<GenData> gens_;
  std::vector<std::vector<int>> gens_at_bus_;  // own bus -> local gen indices
};

/// Centralized NLP over the whole case (single region owning every bus).
struct CentralizedOpf {
  std::shared_ptr<OpfRegionModel> model;
  double objective_scale = 1.0;
};
CentralizedOpf build_opf_nlp(const OpfCase& c);

/// Consensus structure of a partitioned case.
struct RegionPartition {
  std::vector<int> region_of_bus;  // by bus position
  int regions = 0;
  std::vector<int> tie_branches;  // branch positions crossing regions

  /// One duplicated boundary bus: the owner's (e, f) equals the copy's via
  /// two coupling rows.
  struct SharedVariable {
    int bus = 0;  // case bus position
    int owner_region = 0;
    int copy_region = 0;
    int row_e = 0;
    int row_f = 0;
  };
  std::vector<SharedVariable> shared;

  int coupling_dim() const { return 2 * static_cast<int>(shared.size()); }
};

/// A partitioned OPF instance: the generic problem plus the grid-level maps.
struct OpfPartitionedInstance {
  PartitionedNlp problem;
  RegionPartition partition;
  std::vector<std::shared_ptr<OpfRegionModel>> models;
  OpfCase source;
  double objective_scale = 1.0;

  std::vector<Vector> flat_start() const;
  double raw_objective(const std::vector<SubsystemPoint>& points) const;

  /// Copies a centralized point (layout of build_opf_nlp over `source`) into
  /// the duplicated per-region variables; consensus violation is zero.
  std::vector<Vector> lift_centralized(const Vector& x_central) const;

  /// Drops duplicates: per-region points back to the centralized layout.
  Vector drop_to_centralized(const std::vector<Vector>& x_regions) const;
};

/// Splits the case along the region assignment: every tie line enters both
/// adjacent regions, both endpoint voltages are duplicated, and consensus
/// rows equate the copies (one +1, one -1 per row; b = 0).
OpfPartitionedInstance partition_opf(const OpfCase& c, const std::vector<int>& region_of_bus);

}  // namespace dip::opf
