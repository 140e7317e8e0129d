#include "gridmesh/topology.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

namespace gridmesh {

namespace {

constexpr double kDegToRad = M_PI / 180.0;

void check_spec_against_cases(const std::vector<CaseData>& cases, const ConnectionSpec& spec) {
  const int nreg = static_cast<int>(cases.size());
  if (spec.master < 1 || spec.master > nreg)
    throw CaseError("master region index " + std::to_string(spec.master) + " out of range");
  if (spec.n_regions() > nreg)
    throw CaseError("connection spec references region " + std::to_string(spec.n_regions()) +
                    " but only " + std::to_string(nreg) + " cases were given");
  if (nreg > 1 && spec.n_regions() < nreg)
    throw CaseError("region connection graph is not connected");
  for (const auto& t : spec.connections) {
    for (auto [region, bus_id] : {std::pair{t.from_region, t.from_bus},
                                  std::pair{t.to_region, t.to_bus}}) {
      const CaseData& c = cases[region - 1];
      if (c.bus_index(bus_id) < 0)
        throw CaseError("connection endpoint bus " + std::to_string(bus_id) +
                        " does not exist in region " + std::to_string(region));
      BusType ty = c.bus(bus_id).type;
      if (ty != BusType::Slack && ty != BusType::PV)
        throw CaseError("connection endpoints must be generation buses: bus " +
                        std::to_string(bus_id) + " in region " + std::to_string(region) +
                        " is a load bus");
    }
  }
}

/// Bus-type surgery on every worker region; master untouched.
std::vector<CaseData> apply_surgery(std::vector<CaseData> cases, const ConnectionSpec& spec) {
  for (int r = 1; r <= static_cast<int>(cases.size()); ++r) {
    if (r == spec.master) continue;
    CaseData& c = cases[r - 1];
    std::set<int> to_endpoints;
    for (const auto& t : spec.connections)
      if (t.to_region == r) to_endpoints.insert(t.to_bus);
    const int slack = c.slack_id();
    for (auto& b : c.buses) {
      if (!to_endpoints.count(b.id)) continue;
      if (b.type == BusType::Slack) {
        b.type = BusType::PQ;
        b.pd = b.qd = 0.0;
      } else if (b.type == BusType::PV) {
        b.type = BusType::PQ;  // keeps its original demand
      }
      for (auto& g : c.gens)
        if (g.bus == b.id) g.status = false;
    }
    if (!to_endpoints.count(slack)) {
      for (auto& b : c.buses)
        if (b.id == slack) b.type = BusType::PV;
    }
  }
  return cases;
}

std::vector<int> bus_id_offsets(const std::vector<CaseData>& cases) {
  std::vector<int> offsets{0};
  for (size_t r = 0; r + 1 < cases.size(); ++r) {
    int max_id = 0;
    for (const auto& b : cases[r].buses) max_id = std::max(max_id, b.id);
    offsets.push_back(offsets.back() + max_id);
  }
  return offsets;
}

}  // namespace

std::string MergeResult::sidecar_json() const {
  nlohmann::json doc;
  doc["master"] = spec.master;
  doc["offsets"] = offsets;
  doc["regions"] = nlohmann::json::array();
  std::vector<nlohmann::json> region_buses(offsets.size());
  for (size_t r = 0; r < offsets.size(); ++r)
    region_buses[r] = nlohmann::json::array();
  // merged bus id -> region: region r owns ids in (offsets[r], offsets[r+1]]
  for (const auto& b : merged.buses) {
    size_t r = offsets.size() - 1;
    while (r > 0 && b.id <= offsets[r]) --r;
    region_buses[r].push_back({{"local", b.id - offsets[r]}, {"global", b.id}});
  }
  for (size_t r = 0; r < offsets.size(); ++r)
    doc["regions"].push_back({{"index", r + 1}, {"buses", region_buses[r]}});
  doc["connections"] = nlohmann::json::array();
  for (size_t c = 0; c < spec.connections.size(); ++c) {
    const auto& t = spec.connections[c];
    doc["connections"].push_back({{"index", c + 1},
                                  {"from_region", t.from_region},
                                  {"from_global", t.from_bus + offsets[t.from_region - 1]},
                                  {"to_region", t.to_region},
                                  {"to_global", t.to_bus + offsets[t.to_region - 1]}});
  }
  return doc.dump(2) + "\n";
}

MergeResult merge_cases(const std::vector<CaseData>& cases, const ConnectionSpec& spec) {
  if (cases.empty()) throw CaseError("no cases to merge");
  check_spec_against_cases(cases, spec);
  for (const auto& c : cases)
    if (c.base_mva != cases.front().base_mva)
      throw CaseError("all regions must share the same baseMVA");

  std::vector<CaseData> surgered = apply_surgery(cases, spec);
  std::vector<int> offsets = bus_id_offsets(surgered);

  MergeResult out;
  out.spec = spec;
  out.offsets = offsets;
  out.merged.base_mva = cases.front().base_mva;
  for (size_t r = 0; r < surgered.size(); ++r) {
    const int off = offsets[r];
    for (BusRecord b : surgered[r].buses) {
      b.id += off;
      out.merged.buses.push_back(b);
    }
    for (GenRecord g : surgered[r].gens) {
      g.bus += off;
      out.merged.gens.push_back(g);
    }
    for (BranchRecord br : surgered[r].branches) {
      br.from += off;
      br.to += off;
      out.merged.branches.push_back(br);
    }
  }
  for (size_t c = 0; c < spec.connections.size(); ++c) {
    BranchRecord br = spec.tie_branch(static_cast<int>(c));
    br.from += offsets[spec.connections[c].from_region - 1];
    br.to += offsets[spec.connections[c].to_region - 1];
    out.merged.branches.push_back(br);
  }
  out.merged.validate();
  return out;
}

std::vector<RegionModel> split_cases(const std::vector<CaseData>& cases,
                                     const ConnectionSpec& spec) {
  check_spec_against_cases(cases, spec);
  std::vector<CaseData> surgered = apply_surgery(cases, spec);
  std::vector<int> offsets = bus_id_offsets(surgered);

  std::vector<RegionModel> regions;
  for (int r = 1; r <= static_cast<int>(cases.size()); ++r) {
    const CaseData& c = surgered[r - 1];
    RegionModel m;
    m.index = r;
    m.n_core = static_cast<int>(c.buses.size());
    for (const auto& b : c.buses) {
      m.core_ids.push_back(b.id);
      m.core_global_ids.push_back(b.id + offsets[r - 1]);
    }

    for (size_t ci = 0; ci < spec.connections.size(); ++ci) {
      const TieLine& t = spec.connections[ci];
      if (t.from_region == r) {
        m.copies.push_back(CopyBusRef{t.to_region, t.to_bus,
                                      t.to_bus + offsets[t.to_region - 1],
                                      static_cast<int>(ci)});
      } else if (t.to_region == r) {
        m.copies.push_back(CopyBusRef{t.from_region, t.from_bus,
                                      t.from_bus + offsets[t.from_region - 1],
                                      static_cast<int>(ci)});
      }
    }
    std::sort(m.copies.begin(), m.copies.end(), [](const CopyBusRef& a, const CopyBusRef& b) {
      return std::tie(a.owner_region, a.global_id, a.conn) <
             std::tie(b.owner_region, b.global_id, b.conn);
    });
    m.n_copy = static_cast<int>(m.copies.size());

    // admittance over core + copy buses, positional ids
    std::vector<BusRecord> abuses;
    for (const auto& b : c.buses) {
      BusRecord pb = b;
      pb.id = static_cast<int>(abuses.size()) + 1;
      abuses.push_back(pb);
    }
    for (const auto& cp : m.copies) {
      BusRecord pb;  // copy buses carry no shunt in this region
      (void)cp;
      pb.id = static_cast<int>(abuses.size()) + 1;
      abuses.push_back(pb);
    }
    auto core_pos = [&](int local_id) {
      int k = c.bus_index(local_id);
      if (k < 0) throw CaseError("unknown bus id " + std::to_string(local_id));
      return k + 1;
    };
    auto copy_pos = [&](int conn_index) {
      for (int k = 0; k < m.n_copy; ++k)
        if (m.copies[k].conn == conn_index) return m.n_core + k + 1;
      throw CaseError("internal: missing copy bus for connection");
    };

    std::vector<BranchRecord> abranches;
    for (BranchRecord br : c.branches) {
      br.from = core_pos(br.from);
      br.to = core_pos(br.to);
      abranches.push_back(br);
    }
    for (size_t ci = 0; ci < spec.connections.size(); ++ci) {
      const TieLine& t = spec.connections[ci];
      if (t.from_region != r && t.to_region != r) continue;
      BranchRecord br = spec.tie_branch(static_cast<int>(ci));
      if (t.from_region == r) {
        br.from = core_pos(t.from_bus);
        br.to = copy_pos(static_cast<int>(ci));
      } else {
        br.from = copy_pos(static_cast<int>(ci));
        br.to = core_pos(t.to_bus);
      }
      abranches.push_back(br);
    }
    m.Y = build_admittance(c.base_mva, abuses, abranches);

    // bus specifications (post-surgery)
    for (const auto& b : c.buses) {
      SpecEntry sp;
      sp.type = b.type;
      switch (b.type) {
        case BusType::Slack:
        case BusType::PV: {
          double vg = b.vm;
          for (const auto& g : c.gens)
            if (g.status && g.bus == b.id) {
              vg = g.vg;
              break;
            }
          if (b.type == BusType::Slack) {
            sp.value_a = vg;
            sp.value_b = b.va * kDegToRad;
          } else {
            sp.value_a = c.net_p(b.id);
            sp.value_b = vg;
          }
          break;
        }
        case BusType::PQ:
          sp.value_a = c.net_p(b.id);
          sp.value_b = c.net_q(b.id);
          break;
      }
      m.specs.push_back(sp);
    }

    // initial state from the case-file entries
    m.start = Eigen::VectorXd::Zero(m.n_state());
    for (int j = 0; j < m.n_core; ++j) {
      const BusRecord& b = c.buses[j];
      m.start[m.th(j)] = b.va * kDegToRad;
      m.start[m.vm(j)] = b.vm;
      m.start[m.p(j)] = c.net_p(b.id);
      m.start[m.q(j)] = c.net_q(b.id);
    }
    for (int j = 0; j < m.n_copy; ++j) {
      const BusRecord& b = surgered[m.copies[j].owner_region - 1].bus(m.copies[j].owner_bus);
      m.start[m.zth(j)] = b.va * kDegToRad;
      m.start[m.zvm(j)] = b.vm;
    }

    regions.push_back(std::move(m));
  }
  return regions;
}

std::vector<ConsensusBlock> build_consensus(const std::vector<RegionModel>& regions,
                                            const ConnectionSpec& spec) {
  const int rows = 4 * static_cast<int>(spec.connections.size());
  std::vector<ConsensusBlock> blocks;
  for (const auto& m : regions)
    blocks.push_back(ConsensusBlock{m.index, Eigen::MatrixXd::Zero(rows, m.n_state())});

  auto core_col = [&](int region, int local_id, bool theta) -> int {
    const RegionModel& m = regions[region - 1];
    for (int j = 0; j < m.n_core; ++j)
      if (m.core_ids[j] == local_id) return theta ? m.th(j) : m.vm(j);
    throw CaseError("consensus: unknown core bus " + std::to_string(local_id));
  };
  auto copy_col = [&](int region, int conn, bool theta) -> int {
    const RegionModel& m = regions[region - 1];
    for (int j = 0; j < m.n_copy; ++j)
      if (m.copies[j].conn == conn) return theta ? m.zth(j) : m.zvm(j);
    throw CaseError("consensus: copy/core provenance mismatch");
  };

  for (size_t c = 0; c < spec.connections.size(); ++c) {
    const TieLine& t = spec.connections[c];
    const int r0 = 4 * static_cast<int>(c);
    // copy of the to-endpoint lives in the from-region
    blocks[t.from_region - 1].A(r0, copy_col(t.from_region, c, true)) = 1.0;
    blocks[t.to_region - 1].A(r0, core_col(t.to_region, t.to_bus, true)) = -1.0;
    blocks[t.from_region - 1].A(r0 + 1, copy_col(t.from_region, c, false)) = 1.0;
    blocks[t.to_region - 1].A(r0 + 1, core_col(t.to_region, t.to_bus, false)) = -1.0;
    // copy of the from-endpoint lives in the to-region
    blocks[t.to_region - 1].A(r0 + 2, copy_col(t.to_region, c, true)) = 1.0;
    blocks[t.from_region - 1].A(r0 + 2, core_col(t.from_region, t.from_bus, true)) = -1.0;
    blocks[t.to_region - 1].A(r0 + 3, copy_col(t.to_region, c, false)) = 1.0;
    blocks[t.from_region - 1].A(r0 + 3, core_col(t.from_region, t.from_bus, false)) = -1.0;
  }
  return blocks;
}

std::vector<Eigen::VectorXd> DistProblem::initial_states() const {
  std::vector<Eigen::VectorXd> out;
  for (const auto& m : regions) out.push_back(m.start);
  return out;
}

Eigen::VectorXd DistProblem::consensus_residual(const std::vector<Eigen::VectorXd>& states) const {
  Eigen::VectorXd res = Eigen::VectorXd::Zero(consensus_rows());
  for (size_t i = 0; i < consensus.size(); ++i) res += consensus[i].A * states[i];
  return res;
}

DistProblem build_problem(const std::vector<CaseData>& cases, const ConnectionSpec& spec,
                          Formulation formulation) {
  DistProblem p;
  p.formulation = formulation;
  p.merged = merge_cases(cases, spec);
  p.regions = split_cases(cases, spec);
  p.consensus = build_consensus(p.regions, spec);
  return p;
}

std::vector<Eigen::VectorXd> scatter_states(const DistProblem& problem,
                                            const Eigen::VectorXd& vm, const Eigen::VectorXd& va,
                                            const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  std::vector<Eigen::VectorXd> states;
  const CaseData& merged = problem.merged.merged;
  for (const auto& m : problem.regions) {
    Eigen::VectorXd chi = Eigen::VectorXd::Zero(m.n_state());
    for (int j = 0; j < m.n_core; ++j) {
      const int k = merged.bus_index(m.core_global_ids[j]);
      chi[m.th(j)] = va[k];
      chi[m.vm(j)] = vm[k];
      chi[m.p(j)] = p[k];
      chi[m.q(j)] = q[k];
    }
    for (int j = 0; j < m.n_copy; ++j) {
      const int k = merged.bus_index(m.copies[j].global_id);
      chi[m.zth(j)] = va[k];
      chi[m.zvm(j)] = vm[k];
    }
    states.push_back(std::move(chi));
  }
  return states;
}

}  // namespace gridmesh
