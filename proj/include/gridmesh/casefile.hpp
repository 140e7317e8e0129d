#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gridmesh {

enum class BusType { PQ = 1, PV = 2, Slack = 3 };

struct BusRecord {
  int id = 0;
  BusType type = BusType::PQ;
  double pd = 0.0;       // MW
  double qd = 0.0;       // MVAr
  double gs = 0.0;       // MW at v = 1 p.u.
  double bs = 0.0;       // MVAr at v = 1 p.u.
  double vm = 1.0;       // p.u.
  double va = 0.0;       // degrees
  double base_kv = 0.0;

  bool operator==(const BusRecord&) const = default;
};

struct GenRecord {
  int bus = 0;
  double pg = 0.0;  // MW
  double qg = 0.0;  // MVAr
  double vg = 1.0;  // p.u.
  bool status = true;

  bool operator==(const GenRecord&) const = default;
};

struct BranchRecord {
  int from = 0;
  int to = 0;
  double r = 0.0;
  double x = 0.0;
  double b = 0.0;      // total line charging susceptance, p.u.
  double tap = 1.0;    // off-nominal ratio; parser normalizes 0 to 1.0
  double shift = 0.0;  // degrees
  bool status = true;

  bool operator==(const BranchRecord&) const = default;
};

struct CaseData {
  double base_mva = 100.0;
  std::vector<BusRecord> buses;
  std::vector<GenRecord> gens;
  std::vector<BranchRecord> branches;

  int bus_index(int id) const;  // position in buses, -1 if absent
  const BusRecord& bus(int id) const;
  int slack_id() const;
  /// Net injection set-points (generation minus demand) in p.u.
  double net_p(int bus_id) const;
  double net_q(int bus_id) const;
  void validate() const;

  bool operator==(const CaseData&) const = default;
};

/// One directed tie line between two regions. Default electrical
/// parameters model the connection as a transformer.
struct TieLine {
  int from_region = 0;  // 1-based
  int from_bus = 0;
  int to_region = 0;
  int to_bus = 0;
  double r = 0.0;
  double x = 0.00623;
  double b = 0.0;
  double tap = 0.985;
  double shift = 0.0;
};

struct ConnectionSpec {
  int master = 1;
  std::vector<TieLine> connections;

  int n_regions() const;
  BranchRecord tie_branch(int conn_index) const;  // local bus ids
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, int line, int column = 0);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

class CaseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

CaseData parse_matpower_case(std::string_view text);
CaseData parse_case_json(const std::string& text);
std::string write_matpower_case(const CaseData& c, const std::string& name = "mpc");
std::string write_case_json(const CaseData& c);

/// Dispatches on file extension (.m vs .json).
CaseData load_case(const std::string& path);

ConnectionSpec parse_connection_spec(const std::string& text);
std::string write_connection_spec(const ConnectionSpec& spec);
ConnectionSpec load_connection_spec(const std::string& path);

}  // namespace gridmesh
