#include "gridlin/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "gridlin/error.hpp"

namespace gridlin::io {
namespace {

using json = nlohmann::ordered_json;

constexpr double kDegPerRad = 180.0 / std::numbers::pi;

[[noreturn]] void fail(const std::string& ctx, const std::string& msg) {
  throw Error(ErrorCode::ParseError, ctx + ": " + msg);
}

// ---- canonical JSON emission -------------------------------------------

bool is_scalar(const json& j) { return !j.is_array() && !j.is_object(); }

bool is_flat(const json& j) {
  if (is_scalar(j)) return true;
  if (j.is_array()) return std::all_of(j.begin(), j.end(), [](const json& e) { return is_scalar(e); });
  return false;
}

void emit(std::string& out, const json& j, int indent);

void emit_scalar(std::string& out, const json& j) {
  if (j.is_number_float()) {
    const double x = j.get<double>();
    if (!std::isfinite(x)) throw Error(ErrorCode::InvalidInput, "cannot serialize a non-finite number");
    out += format_double(x);
  } else {
    out += j.dump();
  }
}

void emit_inline(std::string& out, const json& j) {
  if (is_scalar(j)) return emit_scalar(out, j);
  const bool obj = j.is_object();
  out += obj ? "{" : "[";
  bool first = true;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!first) out += ", ";
    first = false;
    if (obj) out += json(it.key()).dump() + ": ";
    emit_inline(out, *it);
  }
  out += obj ? "}" : "]";
}

/// Objects whose members are all scalars or scalar arrays stay on one line.
bool prints_inline(const json& j) {
  if (is_flat(j)) return true;
  if (j.is_object()) return std::all_of(j.begin(), j.end(), [](const json& e) { return is_flat(e); });
  if (j.is_array())
    return !j.empty() && std::all_of(j.begin(), j.end(), [](const json& e) { return is_flat(e); });
  return false;
}

void emit(std::string& out, const json& j, int indent) {
  if (prints_inline(j) || j.empty()) return emit_inline(out, j);
  const bool obj = j.is_object();
  const std::string pad(static_cast<std::size_t>(indent + 2), ' ');
  out += obj ? "{\n" : "[\n";
  bool first = true;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!first) out += ",\n";
    first = false;
    out += pad;
    if (obj) out += json(it.key()).dump() + ": ";
    emit(out, *it, indent + 2);
  }
  out += "\n" + std::string(static_cast<std::size_t>(indent), ' ') + (obj ? "}" : "]");
}

std::string dump(const json& j) {
  std::string out;
  emit(out, j, 0);
  out += "\n";
  return out;
}

// ---- JSON reading helpers ---------------------------------------------

json parse_json(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t upto = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < upto; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw Error(ErrorCode::ParseError,
                "line " + std::to_string(line) + ", column " + std::to_string(col) + ": malformed JSON");
  }
}

const json& member(const json& obj, const char* key, const std::string& ctx) {
  if (!obj.is_object()) fail(ctx, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) fail(ctx, std::string("missing key \"") + key + "\"");
  return *it;
}

const json* optional_member(const json& obj, const char* key, const std::string& ctx) {
  if (!obj.is_object()) fail(ctx, "expected an object");
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double number(const json& j, const std::string& ctx) {
  if (!j.is_number()) fail(ctx, "expected a number");
  return j.get<double>();
}

int integer(const json& j, const std::string& ctx) {
  if (!j.is_number_integer()) fail(ctx, "expected an integer");
  const auto v = j.get<long long>();
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) fail(ctx, "integer out of range");
  return static_cast<int>(v);
}

std::string string(const json& j, const std::string& ctx) {
  if (!j.is_string()) fail(ctx, "expected a string");
  return j.get<std::string>();
}

const json& array(const json& j, const std::string& ctx) {
  if (!j.is_array()) fail(ctx, "expected an array");
  return j;
}

std::vector<double> numbers(const json& j, const std::string& ctx) {
  std::vector<double> out;
  for (std::size_t i = 0; i < array(j, ctx).size(); ++i)
    out.push_back(number(j[i], ctx + "[" + std::to_string(i) + "]"));
  return out;
}

PhaseSet phase_set(const json& j, const std::string& ctx) {
  auto ps = PhaseSet::parse(string(j, ctx));
  if (!ps || ps->empty()) fail(ctx, "expected a phase string such as \"abc\"");
  return *ps;
}

Phase single_phase(const std::string& text, const std::string& ctx) {
  if (text.size() != 1 || !phase_from_char(text[0])) fail(ctx, "expected one of a, b, c");
  return *phase_from_char(text[0]);
}

MatrixXd matrix(const json& j, const std::string& ctx) {
  const auto& rows = array(j, ctx);
  const auto n = static_cast<Eigen::Index>(rows.size());
  MatrixXd out(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const std::string rctx = ctx + "[" + std::to_string(r) + "]";
    const auto row = numbers(rows[static_cast<std::size_t>(r)], rctx);
    if (static_cast<Eigen::Index>(row.size()) != n) fail(rctx, "matrix must be square");
    for (Eigen::Index c = 0; c < n; ++c) out(r, c) = row[static_cast<std::size_t>(c)];
  }
  return out;
}

json matrix_json(const MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json numbers_json(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(x);
  return out;
}

std::vector<LoadDecl> parse_load_decls(const json& arr, const std::string& ctx) {
  std::vector<LoadDecl> out;
  for (std::size_t i = 0; i < array(arr, ctx).size(); ++i) {
    const std::string c = ctx + "[" + std::to_string(i) + "]";
    const json& e = arr[i];
    LoadDecl d;
    d.bus = integer(member(e, "bus", c), c + ".bus");
    const std::string type = string(member(e, "type", c), c + ".type");
    if (type == "wye") {
      d.delta = false;
    } else if (type == "delta") {
      d.delta = true;
      const json& conns = array(member(e, "connections", c), c + ".connections");
      for (std::size_t k = 0; k < conns.size(); ++k) {
        const std::string cc = c + ".connections[" + std::to_string(k) + "]";
        auto conn = connection_from_string(string(conns[k], cc));
        if (!conn) fail(cc, "expected ab, bc or ca");
        d.connections.push_back(*conn);
      }
    } else {
      fail(c + ".type", "expected \"wye\" or \"delta\"");
    }
    d.p = numbers(member(e, "p", c), c + ".p");
    d.q = numbers(member(e, "q", c), c + ".q");
    if (d.p.size() != d.q.size()) fail(c, "p and q differ in length");
    if (d.delta && d.p.size() != d.connections.size()) fail(c, "one p/q entry per connection expected");
    out.push_back(std::move(d));
  }
  return out;
}

json load_decls_json(const std::vector<LoadDecl>& decls) {
  json arr = json::array();
  for (const LoadDecl& d : decls) {
    json e;
    e["bus"] = d.bus;
    e["type"] = d.delta ? "delta" : "wye";
    if (d.delta) {
      json conns = json::array();
      for (Connection c : d.connections) conns.push_back(std::string(to_string(c)));
      e["connections"] = std::move(conns);
    }
    e["p"] = numbers_json(d.p);
    e["q"] = numbers_json(d.q);
    arr.push_back(std::move(e));
  }
  return arr;
}

BusScope parse_scope(const json& j, const std::string& ctx) {
  if (j.is_string()) {
    if (j.get<std::string>() != "all") fail(ctx, "expected \"all\" or a list of bus ids");
    return BusScope{true, {}};
  }
  BusScope s;
  for (std::size_t i = 0; i < array(j, ctx).size(); ++i)
    s.buses.push_back(integer(j[i], ctx + "[" + std::to_string(i) + "]"));
  return s;
}

json scope_json(const BusScope& s) {
  if (s.all) return "all";
  json arr = json::array();
  for (int b : s.buses) arr.push_back(b);
  return arr;
}

std::vector<Window> parse_windows(const json& j, const std::string& ctx) {
  std::vector<Window> out;
  for (std::size_t i = 0; i < array(j, ctx).size(); ++i) {
    const std::string c = ctx + "[" + std::to_string(i) + "]";
    const json& w = array(j[i], c);
    if (w.size() != 2) fail(c, "window must be [start, end]");
    out.push_back({integer(w[0], c), integer(w[1], c)});
  }
  return out;
}

json windows_json(const std::vector<Window>& ws) {
  json arr = json::array();
  for (const Window& w : ws) arr.push_back(json::array({w.start, w.end}));
  return arr;
}

// ---- CSV helpers --------------------------------------------------------

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    std::string_view field = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r'))
      field.remove_suffix(1);
    out.push_back(field);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back(line);
    start = end + 1;
  }
  return out;
}

int csv_int(std::string_view s, const std::string& ctx) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) fail(ctx, "expected an integer, got \"" + std::string(s) + "\"");
  return v;
}

double csv_double(std::string_view s, const std::string& ctx) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    fail(ctx, "expected a number, got \"" + std::string(s) + "\"");
  return v;
}

std::string node_label(const Network& net, std::size_t node) {
  const auto [bus, phase] = net.node_at(node);
  return std::to_string(bus) + std::string(1, to_char(phase));
}

void check_bus(const Network& net, int bus) {
  if (bus < 1 || static_cast<std::size_t>(bus) >= net.bus_count())
    throw Error(ErrorCode::UnknownBus, "bus " + std::to_string(bus) + " cannot carry a load");
}

}  // namespace

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::FileNotFound, "cannot write " + path);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(ErrorCode::FileNotFound, "write failed for " + path);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error(ErrorCode::FileNotFound, "cannot move output into place at " + path);
  }
}

// ---- network -------------------------------------------------------------

NetworkDocument parse_network(std::string_view text) {
  const json root = parse_json(text);
  NetworkDocument doc;
  NetworkSpec& spec = doc.spec;

  const json& buses = array(member(root, "buses", "network"), "buses");
  for (std::size_t i = 0; i < buses.size(); ++i) {
    const std::string c = "buses[" + std::to_string(i) + "]";
    spec.buses.push_back({integer(member(buses[i], "id", c), c + ".id"), phase_set(member(buses[i], "phases", c), c + ".phases")});
  }
  const json& segs = array(member(root, "segments", "network"), "segments");
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const std::string c = "segments[" + std::to_string(i) + "]";
    SegmentSpec s;
    s.from = integer(member(segs[i], "from", c), c + ".from");
    s.to = integer(member(segs[i], "to", c), c + ".to");
    s.phases = phase_set(member(segs[i], "phases", c), c + ".phases");
    s.r = matrix(member(segs[i], "r", c), c + ".r");
    s.x = matrix(member(segs[i], "x", c), c + ".x");
    spec.segments.push_back(std::move(s));
  }
  if (const json* u = optional_member(root, "units", "network")) {
    const std::string units = string(*u, "units");
    if (units == "ohm") spec.units = ImpedanceUnits::Ohm;
    else if (units == "pu") spec.units = ImpedanceUnits::PerUnit;
    else fail("units", "expected \"ohm\" or \"pu\"");
  }
  if (const json* sl = optional_member(root, "slack", "network")) {
    if (integer(member(*sl, "bus", "slack"), "slack.bus") != 0) fail("slack.bus", "the slack bus must be bus 0");
    const json& volts = array(member(*sl, "voltage", "slack"), "slack.voltage");
    VectorXcd v(static_cast<Eigen::Index>(volts.size()));
    for (std::size_t k = 0; k < volts.size(); ++k) {
      const std::string c = "slack.voltage[" + std::to_string(k) + "]";
      PolarVoltage pv{number(member(volts[k], "mag", c), c + ".mag"),
                      number(member(volts[k], "angle_deg", c), c + ".angle_deg")};
      doc.slack.push_back(pv);
      v(static_cast<Eigen::Index>(k)) = std::polar(pv.mag, pv.angle_deg / kDegPerRad);
    }
    spec.slack_voltage = v;
  }
  if (const json* b = optional_member(root, "bases", "network")) {
    spec.bases.kv = number(member(*b, "kv", "bases"), "bases.kv");
    spec.bases.kva = number(member(*b, "kva", "bases"), "bases.kva");
    if (!(spec.bases.kv > 0.0) || !(spec.bases.kva > 0.0)) fail("bases", "kv and kva must be positive");
  }
  if (const json* l = optional_member(root, "loads", "network")) doc.loads = parse_load_decls(*l, "loads");
  return doc;
}

std::string write_network(const NetworkDocument& doc) {
  const NetworkSpec& spec = doc.spec;
  json root;
  json buses = json::array();
  for (const BusSpec& b : spec.buses) buses.push_back(json{{"id", b.id}, {"phases", b.phases.to_string()}});
  root["buses"] = std::move(buses);
  json segs = json::array();
  for (const SegmentSpec& s : spec.segments) {
    json e;
    e["from"] = s.from;
    e["to"] = s.to;
    e["phases"] = s.phases.to_string();
    e["r"] = matrix_json(s.r);
    e["x"] = matrix_json(s.x);
    segs.push_back(std::move(e));
  }
  root["segments"] = std::move(segs);
  root["units"] = spec.units == ImpedanceUnits::Ohm ? "ohm" : "pu";
  std::vector<PolarVoltage> slack = doc.slack;
  if (slack.empty() && spec.slack_voltage) {
    for (const cdouble& v : *spec.slack_voltage) slack.push_back({std::abs(v), std::arg(v) * kDegPerRad});
  }
  if (!slack.empty()) {
    json volts = json::array();
    for (const PolarVoltage& pv : slack) volts.push_back(json{{"mag", pv.mag}, {"angle_deg", pv.angle_deg}});
    root["slack"] = json{{"bus", 0}, {"voltage", std::move(volts)}};
  }
  root["bases"] = json{{"kv", spec.bases.kv}, {"kva", spec.bases.kva}};
  root["loads"] = load_decls_json(doc.loads);
  return dump(root);
}

LoadSet make_load_set(const Network& net, const std::vector<LoadDecl>& decls) {
  LoadSet out = LoadSet::zeros(net);
  for (const LoadDecl& d : decls) {
    check_bus(net, d.bus);
    BusLoad& bl = out.bus[static_cast<std::size_t>(d.bus)];
    if (d.p.size() != d.q.size()) throw Error(ErrorCode::DimensionMismatch, "p and q differ in length");
    VectorXcd s(static_cast<Eigen::Index>(d.p.size()));
    for (std::size_t k = 0; k < d.p.size(); ++k) s(static_cast<Eigen::Index>(k)) = cdouble(d.p[k], d.q[k]);
    if (!d.delta) {
      if (s.size() != bl.wye.s.size())
        throw Error(ErrorCode::DimensionMismatch,
                    "wye load at bus " + std::to_string(d.bus) + " needs one entry per bus phase");
      bl.wye.s += s;
    } else {
      if (!bl.delta.connections.empty())
        throw Error(ErrorCode::InvalidInput, "bus " + std::to_string(d.bus) + " declares two delta loads");
      check_connections(net.phases(d.bus), d.connections);
      if (s.size() != static_cast<Eigen::Index>(d.connections.size()))
        throw Error(ErrorCode::DimensionMismatch, "delta load needs one entry per connection");
      bl.delta.connections = d.connections;
      bl.delta.s = s;
    }
  }
  return out;
}

std::vector<LoadDecl> load_decls(const Network& net, const LoadSet& loads) {
  loads.validate(net);
  std::vector<LoadDecl> out;
  for (std::size_t jj = 1; jj < loads.bus.size(); ++jj) {
    const BusLoad& bl = loads.bus[jj];
    if (!bl.wye.s.isZero(0.0)) {
      LoadDecl d;
      d.bus = static_cast<int>(jj);
      for (const cdouble& s : bl.wye.s) {
        d.p.push_back(s.real());
        d.q.push_back(s.imag());
      }
      out.push_back(std::move(d));
    }
    if (!bl.delta.connections.empty()) {
      LoadDecl d;
      d.bus = static_cast<int>(jj);
      d.delta = true;
      d.connections = bl.delta.connections;
      for (const cdouble& s : bl.delta.s) {
        d.p.push_back(s.real());
        d.q.push_back(s.imag());
      }
      out.push_back(std::move(d));
    }
  }
  return out;
}

// ---- operating point -----------------------------------------------------

std::string write_operating_point(const Network& net, const OperatingPoint& op) {
  const auto m = static_cast<Eigen::Index>(net.m());
  if (op.v_complex.size() != m || op.p_flow.size() != m || op.q_flow.size() != m)
    throw Error(ErrorCode::DimensionMismatch, "operating point does not match the network");
  json root;
  json volts = json::array();
  json flows = json::array();
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto [bus, phase] = net.node_at(static_cast<std::size_t>(k));
    const std::string ph(1, to_char(phase));
    volts.push_back(json{{"bus", bus}, {"phase", ph}, {"mag", std::abs(op.v_complex(k))},
                         {"angle_deg", std::arg(op.v_complex(k)) * kDegPerRad}});
    flows.push_back(json{{"bus", bus}, {"phase", ph}, {"p", op.p_flow(k)}, {"q", op.q_flow(k)}});
  }
  root["voltages"] = std::move(volts);
  root["flows"] = std::move(flows);
  root["loads"] = load_decls_json(load_decls(net, op.loads));
  return dump(root);
}

OperatingPoint parse_operating_point(const Network& net, std::string_view text) {
  const json root = parse_json(text);
  const json& volts = array(member(root, "voltages", "operating point"), "voltages");
  const auto m = static_cast<Eigen::Index>(net.m());
  VectorXcd v(m);
  std::vector<bool> seen(static_cast<std::size_t>(m), false);
  for (std::size_t i = 0; i < volts.size(); ++i) {
    const std::string c = "voltages[" + std::to_string(i) + "]";
    const int bus = integer(member(volts[i], "bus", c), c + ".bus");
    const Phase ph = single_phase(string(member(volts[i], "phase", c), c + ".phase"), c + ".phase");
    if (bus < 1 || static_cast<std::size_t>(bus) >= net.bus_count() || !net.phases(bus).contains(ph))
      fail(c, "no such phase-node in the network");
    const std::size_t idx = net.node_index(bus, ph);
    if (seen[idx]) fail(c, "phase-node listed twice");
    seen[idx] = true;
    v(static_cast<Eigen::Index>(idx)) =
        std::polar(number(member(volts[i], "mag", c), c + ".mag"),
                   number(member(volts[i], "angle_deg", c), c + ".angle_deg") / kDegPerRad);
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) fail("voltages", "every phase-node needs a voltage");
  std::vector<LoadDecl> decls;
  if (const json* l = optional_member(root, "loads", "operating point")) decls = parse_load_decls(*l, "loads");
  return operating_point_from_voltages(net, v, make_load_set(net, decls));
}

LoadSet parse_query_loads(const Network& net, std::string_view text) {
  const json root = parse_json(text);
  return make_load_set(net, parse_load_decls(member(root, "loads", "query"), "loads"));
}

std::string write_linear_solution(const Network& net, const LinearSolution& sol) {
  const auto m = static_cast<Eigen::Index>(net.m());
  if (sol.v_sq.size() != m) throw Error(ErrorCode::DimensionMismatch, "solution does not match the network");
  const VectorXd mag = sol.v_mag();
  std::string out = "bus,phase,v_mag,p_flow,q_flow\n";
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto [bus, phase] = net.node_at(static_cast<std::size_t>(k));
    out += std::to_string(bus) + "," + to_char(phase) + "," + format_double(mag(k)) + "," +
           format_double(sol.p_flow(k)) + "," + format_double(sol.q_flow(k)) + "\n";
  }
  return out;
}

// ---- profiles --------------------------------------------------------------

namespace {
constexpr std::string_view kProfileHeader = "step,bus,kind,phase_or_pair,p,q";

std::string_view kind_name(ProfileKind k) {
  switch (k) {
    case ProfileKind::Wye: return "wye";
    case ProfileKind::Delta: return "delta";
    case ProfileKind::Pv: return "pv";
  }
  return "wye";
}
}  // namespace

std::vector<ProfileRecord> parse_profile(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty() || lines[0] != kProfileHeader)
    fail("line 1", "profile header must be \"" + std::string(kProfileHeader) + "\"");
  std::vector<ProfileRecord> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const std::string ctx = "line " + std::to_string(i + 1);
    const auto f = split(lines[i], ',');
    if (f.size() != 6) fail(ctx, "expected 6 fields");
    ProfileRecord r;
    r.step = csv_int(f[0], ctx + ", column 1");
    r.bus = csv_int(f[1], ctx + ", column 2");
    if (f[2] == "wye") r.kind = ProfileKind::Wye;
    else if (f[2] == "delta") r.kind = ProfileKind::Delta;
    else if (f[2] == "pv") r.kind = ProfileKind::Pv;
    else fail(ctx + ", column 3", "kind must be wye, delta or pv");
    r.phase_or_pair = std::string(f[3]);
    r.p = csv_double(f[4], ctx + ", column 5");
    r.q = csv_double(f[5], ctx + ", column 6");
    if (r.step < 0) fail(ctx, "step must be >= 0");
    out.push_back(std::move(r));
  }
  return out;
}

std::string write_profile(const std::vector<ProfileRecord>& records) {
  std::string out(kProfileHeader);
  out += "\n";
  for (const ProfileRecord& r : records)
    out += std::to_string(r.step) + "," + std::to_string(r.bus) + "," + std::string(kind_name(r.kind)) + "," +
           r.phase_or_pair + "," + format_double(r.p) + "," + format_double(r.q) + "\n";
  return out;
}

TimeSeries build_timeseries(const Network& net, const LoadSet& base, const std::vector<ProfileRecord>& records,
                            double dt_seconds) {
  if (!(dt_seconds > 0.0)) throw Error(ErrorCode::InvalidInput, "dt must be positive");
  base.validate(net);
  int last = 0;
  bool has_pv = false;
  for (const ProfileRecord& r : records) {
    if (r.step < 0) throw Error(ErrorCode::InvalidInput, "negative step in profile");
    last = std::max(last, r.step);
    has_pv = has_pv || r.kind == ProfileKind::Pv;
  }
  TimeSeries ts;
  ts.dt_seconds = dt_seconds;
  ts.loads.assign(static_cast<std::size_t>(last) + 1, base);
  if (has_pv) ts.pv_p.assign(ts.loads.size(), VectorXd::Zero(static_cast<Eigen::Index>(net.m())));

  std::set<std::tuple<int, int, int, std::string>> seen;
  for (const ProfileRecord& r : records) {
    check_bus(net, r.bus);
    if (!seen.insert({r.step, r.bus, static_cast<int>(r.kind), r.phase_or_pair}).second)
      throw Error(ErrorCode::InvalidInput, "profile lists step " + std::to_string(r.step) + ", bus " +
                                               std::to_string(r.bus) + ", " + r.phase_or_pair + " twice");
    const PhaseSet phases = net.phases(r.bus);
    BusLoad& bl = ts.loads[static_cast<std::size_t>(r.step)].bus[static_cast<std::size_t>(r.bus)];
    if (r.kind == ProfileKind::Delta) {
      auto conn = connection_from_string(r.phase_or_pair);
      if (!conn) throw Error(ErrorCode::InvalidInput, "unknown connection \"" + r.phase_or_pair + "\"");
      const Connection one[1] = {*conn};
      check_connections(phases, one);
      auto& conns = bl.delta.connections;
      auto it = std::lower_bound(conns.begin(), conns.end(), *conn);
      const auto pos = static_cast<Eigen::Index>(it - conns.begin());
      if (it == conns.end() || *it != *conn) {
        conns.insert(it, *conn);
        VectorXcd grown(bl.delta.s.size() + 1);
        grown << bl.delta.s.head(pos), cdouble(0.0, 0.0), bl.delta.s.tail(bl.delta.s.size() - pos);
        bl.delta.s = grown;
      }
      bl.delta.s(pos) = cdouble(r.p, r.q);
      continue;
    }
    if (r.phase_or_pair.size() != 1 || !phase_from_char(r.phase_or_pair[0]))
      throw Error(ErrorCode::InvalidInput, "unknown phase \"" + r.phase_or_pair + "\"");
    const Phase ph = *phase_from_char(r.phase_or_pair[0]);
    if (!phases.contains(ph))
      throw Error(ErrorCode::MissingPhase,
                  "bus " + std::to_string(r.bus) + " has no phase " + r.phase_or_pair);
    if (r.kind == ProfileKind::Wye) {
      bl.wye.s(phases.index_of(ph)) = cdouble(r.p, r.q);
    } else {
      ts.pv_p[static_cast<std::size_t>(r.step)](static_cast<Eigen::Index>(net.node_index(r.bus, ph))) = r.p;
    }
  }
  return ts;
}

// ---- scenario -------------------------------------------------------------

Scenario parse_scenario(std::string_view text) {
  const json root = parse_json(text);
  if (!root.is_object()) fail("scenario", "expected an object");
  Scenario sc;
  if (const json* v = optional_member(root, "dt_seconds", "scenario")) sc.dt_seconds = number(*v, "dt_seconds");
  if (const json* v = optional_member(root, "update_every", "scenario")) sc.update_every = integer(*v, "update_every");
  if (const json* mm = optional_member(root, "measurement", "scenario")) {
    if (const json* v = optional_member(*mm, "noise_sigma", "measurement"))
      sc.measurement.noise_sigma = number(*v, "measurement.noise_sigma");
    if (const json* v = optional_member(*mm, "noisy_buses", "measurement"))
      sc.measurement.noisy_buses = parse_scope(*v, "measurement.noisy_buses");
    if (const json* v = optional_member(*mm, "windows", "measurement"))
      sc.measurement.windows = parse_windows(*v, "measurement.windows");
    if (const json* v = optional_member(*mm, "seed", "measurement")) {
      if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0))
        fail("measurement.seed", "expected a non-negative integer");
      sc.measurement.seed = v->get<std::uint64_t>();
    }
  }
  if (const json* fm = optional_member(root, "failure", "scenario")) {
    if (const json* v = optional_member(*fm, "failed_buses", "failure"))
      sc.failure.failed_buses = parse_scope(*v, "failure.failed_buses");
    if (const json* v = optional_member(*fm, "windows", "failure"))
      sc.failure.windows = parse_windows(*v, "failure.windows");
  }
  if (const json* fl = optional_member(root, "fleet", "scenario")) {
    for (std::size_t i = 0; i < array(*fl, "fleet").size(); ++i) {
      const std::string c = "fleet[" + std::to_string(i) + "]";
      const json& e = (*fl)[i];
      FleetEntry f;
      f.bus = integer(member(e, "bus", c), c + ".bus");
      if (const json* p = optional_member(e, "phase", c)) f.phase = single_phase(string(*p, c + ".phase"), c + ".phase");
      if (const json* v = optional_member(e, "q_min", c)) f.q_min = number(*v, c + ".q_min");
      if (const json* v = optional_member(e, "q_max", c)) f.q_max = number(*v, c + ".q_max");
      sc.fleet.push_back(f);
    }
  }
  if (const json* ctl = optional_member(root, "controller", "scenario")) {
    ControllerSpec cs;
    if (const json* v = optional_member(*ctl, "mode", "controller")) {
      const std::string mode = string(*v, "controller.mode");
      if (mode == "online") cs.mode = ControllerMode::Online;
      else if (mode == "offline") cs.mode = ControllerMode::Offline;
      else fail("controller.mode", "expected \"online\" or \"offline\"");
    }
    if (const json* v = optional_member(*ctl, "alpha", "controller")) cs.config.alpha = number(*v, "controller.alpha");
    if (const json* v = optional_member(*ctl, "iters_per_step", "controller"))
      cs.config.iters_per_step = integer(*v, "controller.iters_per_step");
    if (const json* v = optional_member(*ctl, "opf_period", "controller"))
      cs.opf_period = integer(*v, "controller.opf_period");
    sc.controller = cs;
  }
  if (sc.update_every < 1) throw Error(ErrorCode::InvalidInput, "scenario: update_every must be >= 1");
  if (!(sc.dt_seconds > 0.0)) throw Error(ErrorCode::InvalidInput, "scenario: dt_seconds must be positive");
  validate(sc.measurement);
  validate(sc.failure);
  return sc;
}

std::string write_scenario(const Scenario& sc) {
  json root;
  root["dt_seconds"] = sc.dt_seconds;
  root["update_every"] = sc.update_every;
  root["measurement"] = json{{"noise_sigma", sc.measurement.noise_sigma},
                             {"noisy_buses", scope_json(sc.measurement.noisy_buses)},
                             {"windows", windows_json(sc.measurement.windows)},
                             {"seed", sc.measurement.seed}};
  root["failure"] = json{{"failed_buses", scope_json(sc.failure.failed_buses)},
                         {"windows", windows_json(sc.failure.windows)}};
  if (!sc.fleet.empty()) {
    json fl = json::array();
    for (const FleetEntry& f : sc.fleet) {
      json e;
      e["bus"] = f.bus;
      if (f.phase) e["phase"] = std::string(1, to_char(*f.phase));
      e["q_min"] = f.q_min;
      e["q_max"] = f.q_max;
      fl.push_back(std::move(e));
    }
    root["fleet"] = std::move(fl);
  }
  if (sc.controller) {
    root["controller"] = json{{"mode", sc.controller->mode == ControllerMode::Online ? "online" : "offline"},
                              {"alpha", sc.controller->config.alpha},
                              {"iters_per_step", sc.controller->config.iters_per_step},
                              {"opf_period", sc.controller->opf_period}};
  }
  return dump(root);
}

PvFleet make_fleet(const Network& net, const std::vector<FleetEntry>& entries, const TimeSeries& ts) {
  PvFleet fleet;
  std::vector<double> lo, hi;
  for (const FleetEntry& e : entries) {
    if (e.bus < 1 || static_cast<std::size_t>(e.bus) >= net.bus_count())
      throw Error(ErrorCode::UnknownBus, "fleet references bus " + std::to_string(e.bus));
    std::vector<Phase> phases;
    if (e.phase) {
      if (!net.phases(e.bus).contains(*e.phase))
        throw Error(ErrorCode::MissingPhase, "fleet references a phase bus " + std::to_string(e.bus) + " lacks");
      phases.push_back(*e.phase);
    } else {
      phases = net.phases(e.bus).phases();
    }
    for (Phase p : phases) {
      fleet.nodes.push_back(net.node_index(e.bus, p));
      lo.push_back(e.q_min);
      hi.push_back(e.q_max);
    }
  }
  fleet.q_min = Eigen::Map<const VectorXd>(lo.data(), static_cast<Eigen::Index>(lo.size()));
  fleet.q_max = Eigen::Map<const VectorXd>(hi.data(), static_cast<Eigen::Index>(hi.size()));
  for (std::size_t t = 0; t < ts.horizon(); ++t) {
    VectorXd p = VectorXd::Zero(static_cast<Eigen::Index>(fleet.size()));
    if (!ts.pv_p.empty())
      for (std::size_t k = 0; k < fleet.size(); ++k)
        p(static_cast<Eigen::Index>(k)) = ts.pv_p[t](static_cast<Eigen::Index>(fleet.nodes[k]));
    fleet.p_g.push_back(std::move(p));
  }
  validate(fleet, net, ts.horizon());
  return fleet;
}

// ---- reports --------------------------------------------------------------

namespace {
constexpr std::string_view kReportHeader = "step,model,v_mape,p_mape,q_mape";
constexpr std::string_view kSummaryMarker = "# summary";

std::string errors_row(const ModelErrors& e) {
  return format_double(e.v_mape) + "," + format_double(e.p_mape) + "," + format_double(e.q_mape);
}
}  // namespace

std::string write_simulation_report(const SimulationReport& report) {
  std::string out(kReportHeader);
  out += "\n";
  for (const StepRecord& r : report.steps) {
    out += std::to_string(r.step) + ",online," + errors_row(r.online) + "\n";
    out += std::to_string(r.step) + ",lossless," + errors_row(r.lossless) + "\n";
  }
  out += std::string(kSummaryMarker) + "\n";
  out += "model,v_mape_mean,p_mape_mean,q_mape_mean,v_mape_max\n";
  out += "online," + errors_row(report.online_mean) + "," + format_double(report.online_v_mape_max) + "\n";
  out += "lossless," + errors_row(report.lossless_mean) + "," + format_double(report.lossless_v_mape_max) + "\n";
  return out;
}

std::vector<ReportRow> parse_simulation_report(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty() || lines[0] != kReportHeader)
    fail("line 1", "report header must be \"" + std::string(kReportHeader) + "\"");
  std::vector<ReportRow> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i] == kSummaryMarker) break;
    if (lines[i].empty()) continue;
    const std::string ctx = "line " + std::to_string(i + 1);
    const auto f = split(lines[i], ',');
    if (f.size() != 5) fail(ctx, "expected 5 fields");
    out.push_back({csv_int(f[0], ctx), std::string(f[1]), csv_double(f[2], ctx), csv_double(f[3], ctx),
                   csv_double(f[4], ctx)});
  }
  return out;
}

Comparison compare_reports(const std::vector<std::string>& labels,
                           const std::vector<std::vector<ReportRow>>& reports) {
  if (reports.empty()) throw Error(ErrorCode::EmptyInput, "no reports to compare");
  if (labels.size() != reports.size()) throw Error(ErrorCode::DimensionMismatch, "one label per report expected");
  for (std::size_t k = 0; k < reports.size(); ++k)
    if (reports[k].empty()) throw Error(ErrorCode::EmptyInput, "report " + labels[k] + " has no rows");
  const auto& ref = reports.front();
  for (std::size_t k = 1; k < reports.size(); ++k) {
    if (reports[k].size() != ref.size())
      throw Error(ErrorCode::StepMismatch, "report " + labels[k] + " has a different number of rows");
    for (std::size_t i = 0; i < ref.size(); ++i)
      if (reports[k][i].step != ref[i].step || reports[k][i].model != ref[i].model)
        throw Error(ErrorCode::StepMismatch, "report " + labels[k] + " diverges at row " + std::to_string(i + 1));
  }

  Comparison out;
  out.summary_csv = "report,model,v_mape_mean,p_mape_mean,q_mape_mean\n";
  for (std::size_t k = 0; k < reports.size(); ++k) {
    std::vector<std::string> order;
    std::map<std::string, std::pair<ModelErrors, int>> acc;
    for (const ReportRow& r : reports[k]) {
      if (!acc.count(r.model)) order.push_back(r.model);
      auto& [sum, n] = acc[r.model];
      sum.v_mape += r.v_mape;
      sum.p_mape += r.p_mape;
      sum.q_mape += r.q_mape;
      ++n;
    }
    for (const std::string& model : order) {
      const auto& [sum, n] = acc[model];
      const ModelErrors mean{sum.v_mape / n, sum.p_mape / n, sum.q_mape / n};
      out.summary_csv += labels[k] + "," + model + "," + errors_row(mean) + "\n";
    }
  }
  out.per_step_csv = "step,model,report,v_mape,p_mape,q_mape,dv_mape\n";
  for (std::size_t i = 0; i < ref.size(); ++i) {
    for (std::size_t k = 0; k < reports.size(); ++k) {
      const ReportRow& r = reports[k][i];
      out.per_step_csv += std::to_string(r.step) + "," + r.model + "," + labels[k] + "," +
                          errors_row({r.v_mape, r.p_mape, r.q_mape}) + "," +
                          format_double(r.v_mape - ref[i].v_mape) + "\n";
    }
  }
  return out;
}

std::string write_vvc_report(const Network& net, const PvFleet& fleet, const VvcReport& report,
                             const VvcReport* uncontrolled, std::string_view mode) {
  if (uncontrolled && uncontrolled->objective.size() != report.objective.size())
    throw Error(ErrorCode::StepMismatch, "baseline and controller runs differ in length");
  std::string out = "step,objective";
  if (uncontrolled) out += ",uncontrolled_objective";
  for (std::size_t node : fleet.nodes) out += ",q_" + node_label(net, node);
  out += "\n";
  for (std::size_t t = 0; t < report.objective.size(); ++t) {
    out += std::to_string(t) + "," + format_double(report.objective[t]);
    if (uncontrolled) out += "," + format_double(uncontrolled->objective[t]);
    for (Eigen::Index k = 0; k < report.q_g[t].size(); ++k) out += "," + format_double(report.q_g[t](k));
    out += "\n";
  }
  out += std::string(kSummaryMarker) + "\n";
  out += uncontrolled ? "mode,mean_objective,uncontrolled_mean_objective\n" : "mode,mean_objective\n";
  out += std::string(mode) + "," + format_double(report.mean_objective);
  if (uncontrolled) out += "," + format_double(uncontrolled->mean_objective);
  out += "\n";
  return out;
}

}  // namespace gridlin::io
