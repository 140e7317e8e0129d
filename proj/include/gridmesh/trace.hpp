#pragma once

#include <string>
#include <vector>

namespace gridmesh {

enum class SolveStatus { Converged, IterationLimit, Diverged };

/// One trace record; region -1 marks the global (cross-region) row.
struct TraceRow {
  int iter = 0;
  int region = -1;
  double pf_inf = 0.0;
  double spec_inf = 0.0;
  double consensus_inf = 0.0;
  double step_inf = 0.0;
  double dual_inf = 0.0;
  double local_time_s = 0.0;
};

struct IterationTrace {
  std::vector<std::string> meta;  // "key=value" strings echoed as # comments
  std::vector<TraceRow> rows;

  /// CSV with a commented header. Timing is written as 0.0 unless
  /// `with_timing` is set, so identical runs produce identical bytes.
  std::string to_csv(bool with_timing = false) const;

  /// Global rows only, whitespace-separated for gnuplot:
  /// iter pf_inf spec_inf consensus_inf step_inf dual_inf.
  std::string to_plot_data() const;

  const TraceRow* global_row(int iter) const;
  int iterations() const;
};

}  // namespace gridmesh
