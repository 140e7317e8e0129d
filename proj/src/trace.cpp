#include "gridmesh/trace.hpp"

#include <cstdio>

namespace gridmesh {

namespace {

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

}  // namespace

std::string IterationTrace::to_csv(bool with_timing) const {
  std::string out;
  for (const std::string& m : meta) out += "# " + m + "\n";
  out += "iter,region,pf_inf,spec_inf,consensus_inf,step_inf,dual_inf,local_time_s\n";
  for (const TraceRow& r : rows) {
    out += std::to_string(r.iter) + "," + std::to_string(r.region) + "," + fmt(r.pf_inf) + "," +
           fmt(r.spec_inf) + "," + fmt(r.consensus_inf) + "," + fmt(r.step_inf) + "," +
           fmt(r.dual_inf) + "," + fmt(with_timing ? r.local_time_s : 0.0) + "\n";
  }
  return out;
}

std::string IterationTrace::to_plot_data() const {
  std::string out = "# iter pf_inf spec_inf consensus_inf step_inf dual_inf\n";
  for (const TraceRow& r : rows) {
    if (r.region != -1) continue;
    out += std::to_string(r.iter) + " " + fmt(r.pf_inf) + " " + fmt(r.spec_inf) + " " +
           fmt(r.consensus_inf) + " " + fmt(r.step_inf) + " " + fmt(r.dual_inf) + "\n";
  }
  return out;
}

const TraceRow* IterationTrace::global_row(int iter) const {
  for (const TraceRow& r : rows)
    if (r.region == -1 && r.iter == iter) return &r;
  return nullptr;
}

int IterationTrace::iterations() const {
  int n = 0;
  for (const TraceRow& r : rows)
    if (r.iter > n) n = r.iter;
  return n;
}

}  // namespace gridmesh
