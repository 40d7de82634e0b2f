#include <algorithm>
#include <map>
#include <queue>
#include <set>

#include "dip/opf.hpp"

namespace dip::opf {

namespace {

void check_region_connected(const OpfCase& c, const std::vector<int>& region_of_bus, int region) {
  const int n = static_cast<int>(c.buses.size());
  std::vector<int> members;
  for (int i = 0; i < n; ++i) {
    if (region_of_bus[i] == region) members.push_back(i);
  }
  if (members.empty()) {
    throw InstanceError("region " + std::to_string(region + 1) + " has no buses");
  }
  std::map<int, std::vector<int>> adjacency;
  for (const auto& br : c.branches) {
    if (!br.in_service) continue;
    const int f = c.bus_position(br.from);
    const int t = c.bus_position(br.to);
    if (region_of_bus[f] == region && region_of_bus[t] == region) {
      adjacency[f].push_back(t);
      adjacency[t].push_back(f);
    }
  }
  std::set<int> reached;
  std::queue<int> frontier;
  frontier.push(members[0]);
  reached.insert(members[0]);
  while (!frontier.empty()) {
    const int u = frontier.front();
    frontier.pop();
    for (int w : adjacency[u]) {
      if (reached.insert(w).second) frontier.push(w);
    }
  }
  if (reached.size() != members.size()) {
    throw InstanceError("region " + std::to_string(region + 1) +
                        " is not internally connected");
  }
}

}  // namespace

OpfPartitionedInstance partition_opf(const OpfCase& c, const std::vector<int>& region_of_bus) {
  c.validate();
  const int n = static_cast<int>(c.buses.size());
  if (static_cast<int>(region_of_bus.size()) != n) {
    throw InstanceError("partition: need one region per bus");
  }
  int regions = 0;
  for (int r : region_of_bus) {
    if (r < 0) throw InstanceError("partition: negative region index");
    regions = std::max(regions, r + 1);
  }
  if (regions < 2) {
    throw InstanceError(
        "partition: a single region produces no coupling; use the centralized builder instead");
  }
  if (region_of_bus[c.slack_position()] != 0) {
    throw InstanceError("partition: the first region must contain the slack bus");
  }
  for (int r = 0; r < regions; ++r) check_region_connected(c, region_of_bus, r);

  RegionPartition partition;
  partition.region_of_bus = region_of_bus;
  partition.regions = regions;

  // Tie lines and the duplicated boundary buses per region.
  std::vector<std::set<int>> copies(regions);           // region -> foreign bus positions
  std::set<std::pair<int, int>> shared_pairs;           // (bus position, copying region)
  for (std::size_t bi = 0; bi < c.branches.size(); ++bi) {
    const auto& br = c.branches[bi];
    if (!br.in_service) continue;
    const int f = c.bus_position(br.from);
    const int t = c.bus_position(br.to);
    const int rf = region_of_bus[f];
    const int rt = region_of_bus[t];
    if (rf == rt) continue;
    partition.tie_branches.push_back(static_cast<int>(bi));
    copies[rf].insert(t);
    copies[rt].insert(f);
    shared_pairs.insert({t, rf});
    shared_pairs.insert({f, rt});
  }
  for (int r = 0; r < regions; ++r) {
    if (copies[r].empty()) {
      throw InstanceError("region " + std::to_string(r + 1) +
                          " has no tie line to any other region");
    }
  }

  int row = 0;
  for (const auto& [bus, copy_region] : shared_pairs) {
    RegionPartition::SharedVariable sv;
    sv.bus = bus;
    sv.owner_region = region_of_bus[bus];
    sv.copy_region = copy_region;
    sv.row_e = row++;
    sv.row_f = row++;
    partition.shared.push_back(sv);
  }
  const int n_c = partition.coupling_dim();

  // Region models.
  std::vector<std::shared_ptr<OpfRegionModel>> models;
  for (int r = 0; r < regions; ++r) {
    OpfRegionModel::Layout layout;
    for (int i = 0; i < n; ++i) {
      if (region_of_bus[i] == r) layout.own_buses.push_back(i);
    }
    layout.copy_buses.assign(copies[r].begin(), copies[r].end());
    for (std::size_t g = 0; g < c.generators.size(); ++g) {
      if (!c.generators[g].in_service) continue;
      if (region_of_bus[c.bus_position(c.generators[g].bus)] == r) {
        layout.gens.push_back(static_cast<int>(g));
      }
    }
    layout.has_reference = (r == 0);
    models.push_back(std::make_shared<OpfRegionModel>(c, layout));
  }

  // Consensus rows: owner +1, copy -1, b = 0.
  std::vector<Subsystem> subsystems;
  for (int r = 0; r < regions; ++r) {
    SparseCoupling coupling(n_c, models[r]->num_vars());
    for (const auto& sv : partition.shared) {
      if (sv.owner_region == r) {
        const int ext = models[r]->ext_index_of(sv.bus);
        coupling.add(sv.row_e, models[r]->layout().e_index(ext), 1.0);
        coupling.add(sv.row_f, models[r]->layout().f_index(ext), 1.0);
      }
      if (sv.copy_region == r) {
        const int ext = models[r]->ext_index_of(sv.bus);
        coupling.add(sv.row_e, models[r]->layout().e_index(ext), -1.0);
        coupling.add(sv.row_f, models[r]->layout().f_index(ext), -1.0);
      }
    }
    subsystems.push_back({models[r], std::move(coupling)});
  }

  OpfPartitionedInstance instance{
      PartitionedNlp(std::move(subsystems), Vector::Zero(n_c)),
      std::move(partition),
      std::move(models),
      c,
      0.0,
  };
  instance.objective_scale = instance.models[0]->objective_scale();
  return instance;
}

std::vector<Vector> OpfPartitionedInstance::flat_start() const {
  std::vector<Vector> x0;
  x0.reserve(models.size());
  for (const auto& m : models) x0.push_back(m->flat_start_x());
  return x0;
}

double OpfPartitionedInstance::raw_objective(const std::vector<SubsystemPoint>& points) const {
  double f = 0.0;
  for (std::size_t i = 0; i < models.size(); ++i) f += models[i]->raw_objective(points[i].x);
  return f;
}

std::vector<Vector> OpfPartitionedInstance::lift_centralized(const Vector& x_central) const {
  const int n = static_cast<int>(source.buses.size());
  std::vector<int> central_gens;  // in-service generator positions, case order
  for (std::size_t g = 0; g < source.generators.size(); ++g) {
    if (source.generators[g].in_service) central_gens.push_back(static_cast<int>(g));
  }
  std::map<int, int> central_gen_index;
  for (std::size_t j = 0; j < central_gens.size(); ++j) central_gen_index[central_gens[j]] = j;
  const int ng = static_cast<int>(central_gens.size());
  if (x_central.size() != 2 * n + 2 * ng) {
    throw InstanceError("lift_centralized: point has wrong length");
  }

  std::vector<Vector> out;
  for (const auto& m : models) {
    const auto& layout = m->layout();
    Vector x = Vector::Zero(m->num_vars());
    for (int i = 0; i < layout.n_ext(); ++i) {
      const int pos = i < layout.n_own() ? layout.own_buses[i] : layout.copy_buses[i - layout.n_own()];
      x[layout.e_index(i)] = x_central[pos];
      x[layout.f_index(i)] = x_central[n + pos];
    }
    for (int j = 0; j < layout.n_gen(); ++j) {
      const int cj = central_gen_index.at(layout.gens[j]);
      x[layout.p_index(j)] = x_central[2 * n + cj];
      x[layout.q_index(j)] = x_central[2 * n + ng + cj];
    }
    out.push_back(std::move(x));
  }
  return out;
}

Vector OpfPartitionedInstance::drop_to_centralized(const std::vector<Vector>& x_regions) const {
  const int n = static_cast<int>(source.buses.size());
  std::vector<int> central_gens;
  for (std::size_t g = 0; g < source.generators.size(); ++g) {
    if (source.generators[g].in_service) central_gens.push_back(static_cast<int>(g));
  }
  std::map<int, int> central_gen_index;
  for (std::size_t j = 0; j < central_gens.size(); ++j) central_gen_index[central_gens[j]] = j;
  const int ng = static_cast<int>(central_gens.size());

  Vector x = Vector::Zero(2 * n + 2 * ng);
  for (std::size_t r = 0; r < models.size(); ++r) {
    const auto& layout = models[r]->layout();
    for (int i = 0; i < layout.n_own(); ++i) {
      const int pos = layout.own_buses[i];
      x[pos] = x_regions[r][layout.e_index(i)];
      x[n + pos] = x_regions[r][layout.f_index(i)];
    }
    for (int j = 0; j < layout.n_gen(); ++j) {
      const int cj = central_gen_index.at(layout.gens[j]);
      x[2 * n + cj] = x_regions[r][layout.p_index(j)];
      x[2 * n + ng + cj] = x_regions[r][layout.q_index(j)];
    }
  }
  return x;
}

}  // namespace dip::opf
