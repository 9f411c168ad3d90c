#include "eqk/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_map>

#include "eqk/error.hpp"

namespace eqk {
namespace {

std::string trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(begin, end - begin + 1));
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) fields.push_back(trim(field));
  if (!line.empty() && line.back() == sep) fields.emplace_back();
  return fields;
}

bool is_blank_or_comment(const std::string& line) {
  const auto t = trim(line);
  return t.empty() || t.front() == '#';
}

// Row-oriented CSV reader bound to a header; reports "<table> line L, column C".
class CsvTable {
 public:
  CsvTable(std::istream& in, std::string name, const std::vector<std::string>& required)
      : in_(in), name_(std::move(name)) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (is_blank_or_comment(line)) continue;
      header_ = split(line, ',');
      break;
    }
    if (header_.empty()) throw InputError(name_ + ": missing header");
    for (std::size_t i = 0; i < header_.size(); ++i) column_[header_[i]] = i;
    for (const auto& col : required) {
      if (!column_.count(col)) throw InputError(name_ + ": header lacks column '" + col + "'");
    }
  }

  bool next() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (is_blank_or_comment(line)) continue;
      row_ = split(line, ',');
      if (row_.size() != header_.size()) {
        throw InputError(where() + ": expected " + std::to_string(header_.size()) + " fields, found " +
                         std::to_string(row_.size()));
      }
      return true;
    }
    return false;
  }

  bool has(const std::string& col) const { return column_.count(col) > 0; }
  const std::string& text(const std::string& col) const { return row_[column_.at(col)]; }

  double number(const std::string& col) const {
    const auto& s = text(col);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
      throw InputError(where(col) + ": not a number: '" + s + "'");
    }
    return value;
  }

  std::string where() const { return name_ + " line " + std::to_string(line_no_); }
  std::string where(const std::string& col) const { return where() + ", column '" + col + "'"; }

 private:
  std::istream& in_;
  std::string name_;
  std::vector<std::string> header_, row_;
  std::unordered_map<std::string, std::size_t> column_;
  std::size_t line_no_ = 0;
};

class VertexIndex {
 public:
  VertexId id(const std::string& name) {
    auto [it, inserted] = ids_.emplace(name, names_.size());
    if (inserted) names_.push_back(name);
    return it->second;
  }
  std::vector<std::string> take() { return std::move(names_); }

 private:
  std::unordered_map<std::string, VertexId> ids_;
  std::vector<std::string> names_;
};

}  // namespace

std::string format_double(double value) {
  std::ostringstream out;
  out << std::setprecision(17) << value;
  return out.str();
}

Network load_network(std::istream& edge_table, std::istream& trips_table, NetworkOptions options) {
  VertexIndex vertices;
  std::vector<Edge> edges;
  CsvTable et(edge_table, "edge table", {"tail", "head", "t_free", "capacity", "rho", "mu_power", "model"});
  while (et.next()) {
    Edge e{};
    if (et.text("tail").empty()) throw InputError(et.where("tail") + ": empty vertex id");
    if (et.text("head").empty()) throw InputError(et.where("head") + ": empty vertex id");
    e.tail = vertices.id(et.text("tail"));
    e.head = vertices.id(et.text("head"));
    const auto& model = et.text("model");
    if (model == "bpr") {
      e.cost = CostParams::bpr(et.number("t_free"), et.number("capacity"), et.number("rho"), et.number("mu_power"));
    } else if (model == "sd") {
      e.cost = CostParams::stable_dynamics(et.number("t_free"), et.number("capacity"));
    } else {
      throw InputError(et.where("model") + ": unknown cost model '" + model + "'");
    }
    if (!(e.cost.t_free > 0.0)) throw InputError(et.where("t_free") + ": nonpositive free-flow time");
    if (!(e.cost.capacity > 0.0)) throw InputError(et.where("capacity") + ": nonpositive capacity");
    if (e.cost.model == CostModel::kBpr) {
      if (!(e.cost.rho >= 0.0)) throw InputError(et.where("rho") + ": negative rho");
      if (!(e.cost.mu_power > 0.0)) throw InputError(et.where("mu_power") + ": nonpositive mu_power");
    }
    edges.push_back(e);
  }

  std::vector<OdPair> ods;
  CsvTable tt(trips_table, "trips table", {"origin", "destination", "demand"});
  while (tt.next()) {
    OdPair od{};
    od.origin = vertices.id(tt.text("origin"));
    od.destination = vertices.id(tt.text("destination"));
    od.demand = tt.number("demand");
    if (!(od.demand > 0.0)) throw InputError(tt.where("demand") + ": nonpositive demand");
    ods.push_back(od);
  }
  return Network(vertices.take(), std::move(edges), std::move(ods), options);
}

Network load_network(const std::filesystem::path& edge_file, const std::filesystem::path& trips_file,
                     NetworkOptions options) {
  std::ifstream edges(edge_file);
  if (!edges) throw InputError("cannot open edge file " + edge_file.string());
  std::ifstream trips(trips_file);
  if (!trips) throw InputError("cannot open trips file " + trips_file.string());
  return load_network(edges, trips, options);
}

void write_flows(std::ostream& out, const Network& network, const std::vector<double>& flow,
                 const std::vector<double>& time) {
  out << "edge_index,tail,head,flow,time\n";
  for (EdgeId e = 0; e < network.edge_count(); ++e) {
    const auto& edge = network.edge(e);
    out << e << ',' << network.vertex_name(edge.tail) << ',' << network.vertex_name(edge.head) << ','
        << format_double(flow[e]) << ',' << format_double(time[e]) << '\n';
  }
}

std::vector<FlowRecord> read_flows(std::istream& in) {
  CsvTable table(in, "flows table", {"edge_index", "tail", "head", "flow", "time"});
  std::vector<FlowRecord> records;
  while (table.next()) {
    records.push_back({static_cast<std::size_t>(table.number("edge_index")), table.text("tail"), table.text("head"),
                       table.number("flow"), table.number("time")});
  }
  return records;
}

std::vector<double> read_times(std::istream& in, std::size_t edge_count) {
  CsvTable table(in, "time table", {"edge_index", "time"});
  std::vector<double> t(edge_count, std::numeric_limits<double>::quiet_NaN());
  while (table.next()) {
    const double index = table.number("edge_index");
    if (index < 0 || index >= static_cast<double>(edge_count) || index != std::floor(index)) {
      throw InputError(table.where("edge_index") + ": edge index out of range");
    }
    t[static_cast<std::size_t>(index)] = table.number("time");
  }
  for (std::size_t e = 0; e < edge_count; ++e) {
    if (std::isnan(t[e])) throw InputError("time table: no entry for edge " + std::to_string(e));
  }
  return t;
}

void convert_tntp_network(std::istream& in, std::ostream& out) {
  out << "tail,head,t_free,capacity,rho,mu_power,model\n";
  std::string line;
  std::size_t line_no = 0;
  bool in_metadata = true;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t.front() == '~') continue;
    if (t.front() == '<') {
      if (t.find("END OF METADATA") != std::string::npos) in_metadata = false;
      continue;
    }
    if (in_metadata) continue;
    std::istringstream fields(t);
    std::string tail, head;
    double capacity = 0, length = 0, fft = 0, b = 0, power = 0;
    if (!(fields >> tail >> head >> capacity >> length >> fft >> b >> power)) {
      throw InputError("TNTP network line " + std::to_string(line_no) + ": expected at least 7 fields");
    }
    if (!(fft > 0.0)) throw InputError("TNTP network line " + std::to_string(line_no) + ": nonpositive free-flow time");
    if (!(capacity > 0.0)) throw InputError("TNTP network line " + std::to_string(line_no) + ": nonpositive capacity");
    const bool congestible = b > 0.0 && power > 0.0;
    out << tail << ',' << head << ',' << format_double(fft) << ',' << format_double(capacity) << ','
        << format_double(congestible ? b : 0.0) << ',' << format_double(congestible ? 1.0 / power : 1.0) << ",bpr\n";
  }
}

void convert_tntp_trips(std::istream& in, std::ostream& out) {
  out << "origin,destination,demand\n";
  std::string line, origin;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto t = trim(line);
    if (t.empty() || t.front() == '<' || t.front() == '~') continue;
    if (t.rfind("Origin", 0) == 0) {
      origin = trim(t.substr(6));
      continue;
    }
    if (origin.empty()) throw InputError("TNTP trips line " + std::to_string(line_no) + ": entry before any Origin");
    for (const auto& entry : split(t, ';')) {
      if (entry.empty()) continue;
      const auto colon = entry.find(':');
      if (colon == std::string::npos) {
        throw InputError("TNTP trips line " + std::to_string(line_no) + ": malformed entry '" + entry + "'");
      }
      const auto dest = trim(entry.substr(0, colon));
      const auto amount = trim(entry.substr(colon + 1));
      double demand = 0.0;
      const auto [ptr, ec] = std::from_chars(amount.data(), amount.data() + amount.size(), demand);
      if (ec != std::errc() || ptr != amount.data() + amount.size()) {
        throw InputError("TNTP trips line " + std::to_string(line_no) + ": bad demand '" + amount + "'");
      }
      if (demand > 0.0 && dest != origin) out << origin << ',' << dest << ',' << format_double(demand) << '\n';
    }
  }
}

}  // namespace eqk
