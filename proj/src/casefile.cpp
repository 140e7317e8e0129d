#include "gridmesh/casefile.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <tuple>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace gridmesh {

using nlohmann::json;

ParseError::ParseError(const std::string& msg, int line, int column)
    : std::runtime_error("line " + std::to_string(line) +
                         (column > 0 ? ":" + std::to_string(column) : "") + ": " + msg),
      line_(line),
      column_(column) {}

int CaseData::bus_index(int id) const {
  for (size_t k = 0; k < buses.size(); ++k)
    if (buses[k].id == id) return static_cast<int>(k);
  return -1;
}

const BusRecord& CaseData::bus(int id) const {
  int k = bus_index(id);
  if (k < 0) throw CaseError("unknown bus id " + std::to_string(id));
  return buses[k];
}

int CaseData::slack_id() const {
  for (const auto& b : buses)
    if (b.type == BusType::Slack) return b.id;
  throw CaseError("case has no slack bus");
}

double CaseData::net_p(int bus_id) const {
  double p = -bus(bus_id).pd;
  for (const auto& g : gens)
    if (g.status && g.bus == bus_id) p += g.pg;
  return p / base_mva;
}

double CaseData::net_q(int bus_id) const {
  double q = -bus(bus_id).qd;
  for (const auto& g : gens)
    if (g.status && g.bus == bus_id) q += g.qg;
  return q / base_mva;
}

void CaseData::validate() const {
  if (base_mva <= 0.0) throw CaseError("baseMVA must be positive");
  if (buses.empty()) throw CaseError("case has no buses");

  std::set<int> ids;
  int n_slack = 0;
  for (const auto& b : buses) {
    if (b.id <= 0) throw CaseError("bus id must be positive, got " + std::to_string(b.id));
    if (!ids.insert(b.id).second)
      throw CaseError("duplicate bus id " + std::to_string(b.id));
    if (b.vm <= 0.0)
      throw CaseError("bus " + std::to_string(b.id) + ": voltage magnitude must be positive");
    if (b.type == BusType::Slack) ++n_slack;
  }
  if (n_slack == 0) throw CaseError("case has no slack bus");
  if (n_slack > 1) throw CaseError("case has multiple slack buses");

  std::set<int> gen_buses;
  for (const auto& g : gens) {
    if (!ids.count(g.bus))
      throw CaseError("generator references unknown bus " + std::to_string(g.bus));
    if (g.status) gen_buses.insert(g.bus);
  }
  for (const auto& b : buses) {
    if ((b.type == BusType::PV || b.type == BusType::Slack) && !gen_buses.count(b.id))
      throw CaseError("bus " + std::to_string(b.id) +
                      " is a generation bus without an active generator");
  }

  for (const auto& br : branches) {
    if (!ids.count(br.from) || !ids.count(br.to))
      throw CaseError("branch references unknown bus");
    if (br.from == br.to)
      throw CaseError("branch connects bus " + std::to_string(br.from) + " to itself");
    if (br.status && br.r == 0.0 && br.x == 0.0)
      throw CaseError("active branch " + std::to_string(br.from) + "-" +
                      std::to_string(br.to) + " has zero impedance");
  }

  // connectivity over active branches
  std::map<int, std::vector<int>> adj;
  for (const auto& br : branches) {
    if (!br.status) continue;
    adj[br.from].push_back(br.to);
    adj[br.to].push_back(br.from);
  }
  std::set<int> seen{buses.front().id};
  std::vector<int> stack{buses.front().id};
  while (!stack.empty()) {
    int u = stack.back();
    stack.pop_back();
    for (int v : adj[u])
      if (seen.insert(v).second) stack.push_back(v);
  }
  if (seen.size() != buses.size())
    throw CaseError("network is not connected over active branches");
}

int ConnectionSpec::n_regions() const {
  int n = master;
  for (const auto& t : connections) n = std::max({n, t.from_region, t.to_region});
  return n;
}

BranchRecord ConnectionSpec::tie_branch(int conn_index) const {
  const TieLine& t = connections.at(conn_index);
  BranchRecord br;
  br.from = t.from_bus;
  br.to = t.to_bus;
  br.r = t.r;
  br.x = t.x;
  br.b = t.b;
  br.tap = t.tap == 0.0 ? 1.0 : t.tap;
  br.shift = t.shift;
  br.status = true;
  return br;
}

namespace {

struct MatpowerScanner {
  std::vector<std::pair<int, std::string>> lines;  // (line number, comment-stripped)

  explicit MatpowerScanner(std::string_view text) {
    int ln = 1;
    size_t pos = 0;
    while (pos <= text.size()) {
      size_t end = text.find('\n', pos);
      if (end == std::string_view::npos) end = text.size();
      std::string line(text.substr(pos, end - pos));
      size_t pct = line.find('%');
      if (pct != std::string::npos) line.erase(pct);
      lines.emplace_back(ln, line);
      ++ln;
      pos = end + 1;
      if (end == text.size()) break;
    }
  }
};

std::vector<double> parse_row(const std::string& chunk, int line_no) {
  std::vector<double> out;
  const char* p = chunk.c_str();
  while (*p) {
    while (*p && (std::isspace(static_cast<unsigned char>(*p)) || *p == ',')) ++p;
    if (!*p) break;
    char* endp = nullptr;
    double v = std::strtod(p, &endp);
    if (endp == p)
      throw ParseError("expected a number, got '" + std::string(1, *p) + "'", line_no,
                       static_cast<int>(p - chunk.c_str()) + 1);
    out.push_back(v);
    p = endp;
  }
  return out;
}

BusType bus_type_from(double v, int line_no) {
  int t = static_cast<int>(v);
  if (t < 1 || t > 3 || t != v)
    throw ParseError("invalid bus type " + std::to_string(v), line_no);
  return static_cast<BusType>(t);
}

}  // namespace

CaseData parse_matpower_case(std::string_view text) {
  MatpowerScanner sc(text);
  CaseData c;
  bool saw_base = false;
  std::map<std::string, std::vector<std::pair<int, std::vector<double>>>> mats;

  size_t i = 0;
  while (i < sc.lines.size()) {
    auto [ln, line] = sc.lines[i];
    size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
      ++i;
      continue;
    }
    std::string trimmed = line.substr(first);
    if (trimmed.rfind("function", 0) == 0) {
      ++i;
      continue;
    }
    size_t dot = trimmed.find('.');
    size_t eq = trimmed.find('=');
    if (dot == std::string::npos || eq == std::string::npos || dot > eq) {
      ++i;
      continue;
    }
    std::string field = trimmed.substr(dot + 1, eq - dot - 1);
    field.erase(std::remove_if(field.begin(), field.end(),
                               [](unsigned char ch) { return std::isspace(ch); }),
                field.end());
    std::string rhs = trimmed.substr(eq + 1);

    if (field == "baseMVA") {
      size_t semi = rhs.find(';');
      if (semi != std::string::npos) rhs.erase(semi);
      auto vals = parse_row(rhs, ln);
      if (vals.size() != 1) throw ParseError("baseMVA expects a single number", ln);
      c.base_mva = vals[0];
      saw_base = true;
      ++i;
      continue;
    }
    if (field == "bus" || field == "gen" || field == "branch") {
      size_t open = rhs.find('[');
      if (open == std::string::npos) throw ParseError("expected '[' after " + field + " =", ln);
      std::string body = rhs.substr(open + 1);
      auto& rows = mats[field];
      bool closed = false;
      int row_line = ln;
      while (true) {
        size_t close = body.find(']');
        std::string content = close == std::string::npos ? body : body.substr(0, close);
        size_t start = 0;
        while (start <= content.size()) {
          size_t semi = content.find(';', start);
          std::string chunk =
              semi == std::string::npos ? content.substr(start) : content.substr(start, semi - start);
          auto vals = parse_row(chunk, row_line);
          if (!vals.empty()) rows.emplace_back(row_line, std::move(vals));
          if (semi == std::string::npos) break;
          start = semi + 1;
        }
        if (close != std::string::npos) {
          closed = true;
          break;
        }
        ++i;
        if (i >= sc.lines.size()) break;
        row_line = sc.lines[i].first;
        body = sc.lines[i].second;
      }
      if (!closed) throw ParseError("unterminated matrix for " + field, ln);
      ++i;
      continue;
    }
    ++i;  // unknown field (version, etc.)
  }

  if (!saw_base) throw ParseError("missing baseMVA assignment", 1);
  if (!mats.count("bus")) throw ParseError("missing bus matrix", 1);
  if (!mats.count("gen")) throw ParseError("missing gen matrix", 1);
  if (!mats.count("branch")) throw ParseError("missing branch matrix", 1);

  for (auto& [ln, row] : mats["bus"]) {
    if (row.size() < 10) throw ParseError("bus row needs at least 10 columns", ln);
    BusRecord b;
    b.id = static_cast<int>(row[0]);
    b.type = bus_type_from(row[1], ln);
    b.pd = row[2];
    b.qd = row[3];
    b.gs = row[4];
    b.bs = row[5];
    b.vm = row[7];
    b.va = row[8];
    b.base_kv = row[9];
    c.buses.push_back(b);
  }
  for (auto& [ln, row] : mats["gen"]) {
    if (row.size() < 8) throw ParseError("gen row needs at least 8 columns", ln);
    GenRecord g;
    g.bus = static_cast<int>(row[0]);
    g.pg = row[1];
    g.qg = row[2];
    g.vg = row[5];
    g.status = row[7] > 0.0;
    c.gens.push_back(g);
  }
  for (auto& [ln, row] : mats["branch"]) {
    if (row.size() < 11) throw ParseError("branch row needs at least 11 columns", ln);
    BranchRecord br;
    br.from = static_cast<int>(row[0]);
    br.to = static_cast<int>(row[1]);
    br.r = row[2];
    br.x = row[3];
    br.b = row[4];
    br.tap = row[8] == 0.0 ? 1.0 : row[8];
    br.shift = row[9];
    br.status = row[10] > 0.0;
    c.branches.push_back(br);
  }

  c.validate();
  return c;
}

namespace {

std::string fmt_num(double v) {
  if (v == std::floor(v) && std::abs(v) < 1e15) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.0f", v);
    return buf;
  }
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<double> bus_row(const BusRecord& b) {
  return {static_cast<double>(b.id), static_cast<double>(b.type), b.pd, b.qd, b.gs,
          b.bs, 1, b.vm, b.va, b.base_kv, 1, 1.1, 0.9};
}

std::vector<double> gen_row(const GenRecord& g, double base_mva) {
  std::vector<double> row = {static_cast<double>(g.bus), g.pg, g.qg, 9999, -9999,
                             g.vg, base_mva, g.status ? 1.0 : 0.0, 9999, -9999};
  row.resize(21, 0.0);
  return row;
}

std::vector<double> branch_row(const BranchRecord& br) {
  return {static_cast<double>(br.from), static_cast<double>(br.to), br.r, br.x, br.b,
          0, 0, 0, br.tap, br.shift, br.status ? 1.0 : 0.0, -360, 360};
}

void emit_matrix(std::ostringstream& os, const std::string& name,
                 const std::vector<std::vector<double>>& rows) {
  os << "mpc." << name << " = [\n";
  for (const auto& row : rows) {
    os << '\t';
    for (size_t k = 0; k < row.size(); ++k) os << fmt_num(row[k]) << (k + 1 < row.size() ? "\t" : "");
    os << ";\n";
  }
  os << "];\n";
}

}  // namespace

std::string write_matpower_case(const CaseData& c, const std::string& name) {
  std::ostringstream os;
  os << "function mpc = " << name << "\n";
  os << "mpc.version = '2';\n";
  os << "mpc.baseMVA = " << fmt_num(c.base_mva) << ";\n\n";
  std::vector<std::vector<double>> rows;
  for (const auto& b : c.buses) rows.push_back(bus_row(b));
  emit_matrix(os, "bus", rows);
  rows.clear();
  os << '\n';
  for (const auto& g : c.gens) rows.push_back(gen_row(g, c.base_mva));
  emit_matrix(os, "gen", rows);
  rows.clear();
  os << '\n';
  for (const auto& br : c.branches) rows.push_back(branch_row(br));
  emit_matrix(os, "branch", rows);
  return os.str();
}

std::string write_case_json(const CaseData& c) {
  json doc;
  doc["baseMVA"] = c.base_mva;
  for (const auto& b : c.buses) doc["bus"].push_back(bus_row(b));
  for (const auto& g : c.gens) doc["gen"].push_back(gen_row(g, c.base_mva));
  for (const auto& br : c.branches) doc["branch"].push_back(branch_row(br));
  return doc.dump(2) + "\n";
}

CaseData parse_case_json(const std::string& text) {
  json doc = json::parse(text);
  CaseData c;
  c.base_mva = doc.at("baseMVA").get<double>();
  for (const auto& row : doc.at("bus")) {
    if (row.size() < 10) throw CaseError("bus row needs at least 10 columns");
    BusRecord b;
    b.id = row[0].get<int>();
    int t = row[1].get<int>();
    if (t < 1 || t > 3) throw CaseError("invalid bus type " + std::to_string(t));
    b.type = static_cast<BusType>(t);
    b.pd = row[2];
    b.qd = row[3];
    b.gs = row[4];
    b.bs = row[5];
    b.vm = row[7];
    b.va = row[8];
    b.base_kv = row[9];
    c.buses.push_back(b);
  }
  for (const auto& row : doc.at("gen")) {
    if (row.size() < 8) throw CaseError("gen row needs at least 8 columns");
    GenRecord g;
    g.bus = row[0].get<int>();
    g.pg = row[1];
    g.qg = row[2];
    g.vg = row[5];
    g.status = row[7].get<double>() > 0.0;
    c.gens.push_back(g);
  }
  for (const auto& row : doc.at("branch")) {
    if (row.size() < 11) throw CaseError("branch row needs at least 11 columns");
    BranchRecord br;
    br.from = row[0].get<int>();
    br.to = row[1].get<int>();
    br.r = row[2];
    br.x = row[3];
    br.b = row[4];
    br.tap = row[8].get<double>() == 0.0 ? 1.0 : row[8].get<double>();
    br.shift = row[9];
    br.status = row[10].get<double>() > 0.0;
    c.branches.push_back(br);
  }
  c.validate();
  return c;
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CaseError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool has_suffix(const std::string& s, const std::string& suf) {
  return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

}  // namespace

CaseData load_case(const std::string& path) {
  std::string text = read_file(path);
  if (has_suffix(path, ".json")) return parse_case_json(text);
  return parse_matpower_case(text);
}

ConnectionSpec parse_connection_spec(const std::string& text) {
  json doc = json::parse(text);
  ConnectionSpec spec;
  spec.master = doc.value("master", 1);
  for (const auto& e : doc.at("connections")) {
    TieLine t;
    t.from_region = e.at("from").at(0).get<int>();
    t.from_bus = e.at("from").at(1).get<int>();
    t.to_region = e.at("to").at(0).get<int>();
    t.to_bus = e.at("to").at(1).get<int>();
    t.r = e.value("r", 0.0);
    t.x = e.value("x", 0.00623);
    t.b = e.value("b", 0.0);
    t.tap = e.value("tap", 0.985);
    t.shift = e.value("shift", 0.0);
    spec.connections.push_back(t);
  }

  if (spec.master < 1) throw CaseError("master region index must be >= 1");
  int nreg = spec.n_regions();
  std::set<std::tuple<int, int, int, int>> pairs;
  for (const auto& t : spec.connections) {
    if (t.from_region < 1 || t.to_region < 1)
      throw CaseError("region index out of range in connection spec");
    if (t.from_region == t.to_region)
      throw CaseError("connection must join two distinct regions");
    if (!pairs.insert({t.from_region, t.from_bus, t.to_region, t.to_bus}).second)
      throw CaseError("duplicate connection between the same ordered bus pair");
  }

  // region graph connectivity
  std::vector<std::vector<int>> adj(nreg + 1);
  for (const auto& t : spec.connections) {
    adj[t.from_region].push_back(t.to_region);
    adj[t.to_region].push_back(t.from_region);
  }
  std::vector<bool> seen(nreg + 1, false);
  std::vector<int> stack{1};
  seen[1] = true;
  int count = 1;
  while (!stack.empty()) {
    int u = stack.back();
    stack.pop_back();
    for (int v : adj[u])
      if (!seen[v]) {
        seen[v] = true;
        ++count;
        stack.push_back(v);
      }
  }
  if (count != nreg) throw CaseError("region connection graph is not connected");
  return spec;
}

std::string write_connection_spec(const ConnectionSpec& spec) {
  json doc;
  doc["master"] = spec.master;
  doc["connections"] = json::array();
  for (const auto& t : spec.connections) {
    json e;
    e["from"] = {t.from_region, t.from_bus};
    e["to"] = {t.to_region, t.to_bus};
    e["r"] = t.r;
    e["x"] = t.x;
    e["b"] = t.b;
    e["tap"] = t.tap;
    e["shift"] = t.shift;
    doc["connections"].push_back(e);
  }
  return doc.dump(2) + "\n";
}

ConnectionSpec load_connection_spec(const std::string& path) {
  return parse_connection_spec(read_file(path));
}

}  // namespace gridmesh
