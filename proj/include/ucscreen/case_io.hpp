#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ucscreen/network.hpp"

namespace ucscreen {

// Result of parsing a case file. `bus_loads` carries the Pd column of a
// MATPOWER case (dense bus order) when the source provides one; the native
// JSON schema has no load data, so it is empty there. Loads are a
// convenience default for the CLI forecast, not part of the Network.
struct ParsedCase {
  Network network;
  std::vector<double> bus_loads;
  std::vector<std::string> warnings;
};

// Parses the MATPOWER subset: mpc.baseMVA, mpc.bus, mpc.branch, mpc.gen
// (and mpc.gencost for linear costs when present). Other blocks are ignored
// with a warning. rateA = 0 maps to an infinite flow limit. Bus type 3 is
// the reference. Throws ParseError with line/column context.
ParsedCase parse_matpower(const std::string& text);

// Parses the native JSON document:
//   {"base_mva": number, "reference_bus": int,
//    "buses": [int, ...],
//    "branches": [{"from":int,"to":int,"x":number,"limit":number|null}, ...],
//    "generators": [{"bus":int,"pmin":number,"pmax":number,
//                    "cost":number,"participates":bool}, ...]}
// "limit": null encodes +inf. Errors carry a JSON-pointer path.
ParsedCase parse_native(const std::string& json_text);

// Serializes a Network back to the native schema. parse_native(emit_native(n))
// round-trips field for field.
std::string emit_native(const Network& net);

// Dispatch on file extension (".m" -> MATPOWER) or explicit format tag
// ("matpower" | "native").
ParsedCase load_case_file(const std::string& path,
                          const std::optional<std::string>& format = std::nullopt);

}  // namespace ucscreen
