#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "eqk/network.hpp"

namespace eqk {

// Edge table: CSV with header containing tail,head,t_free,capacity,rho,mu_power,model
// (model is "bpr" or "sd"; rho and mu_power are ignored for sd rows).
// Trips table: CSV with header containing origin,destination,demand.
// Vertex ids are arbitrary strings, indexed in order of first appearance.
// Errors carry the table name, 1-based line number and column.
Network load_network(std::istream& edge_table, std::istream& trips_table, NetworkOptions options = {});
Network load_network(const std::filesystem::path& edge_file, const std::filesystem::path& trips_file,
                     NetworkOptions options = {});

// CSV `edge_index,tail,head,flow,time`, 17 significant digits.
void write_flows(std::ostream& out, const Network& network, const std::vector<double>& flow,
                 const std::vector<double>& time);

struct FlowRecord {
  std::size_t edge_index;
  std::string tail, head;
  double flow, time;
};
std::vector<FlowRecord> read_flows(std::istream& in);

// Any CSV with `edge_index` and `time` columns (the flows file qualifies).
std::vector<double> read_times(std::istream& in, std::size_t edge_count);

// Converters from the community TNTP text formats to the CSV tables above.
// BPR "b" becomes rho and "power" becomes mu_power = 1/power.
void convert_tntp_network(std::istream& tntp_net, std::ostream& edge_csv);
void convert_tntp_trips(std::istream& tntp_trips, std::ostream& trips_csv);

// Shared 17-digit formatting used by every numeric writer.
std::string format_double(double value);

}  // namespace eqk
