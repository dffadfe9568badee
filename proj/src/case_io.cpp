#include "ucscreen/case_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace ucscreen {

namespace {

using json = nlohmann::json;

struct MatrixBlock {
  std::vector<std::vector<double>> rows;
  int line = 0;  // 1-based line of the block header, for diagnostics
};

// Scanner over the .m text with line/column tracking. Only the assignment
// subset MATPOWER cases use is understood: `mpc.name = scalar;` and
// `mpc.name = [ rows ];`.
class MatpowerScanner {
 public:
  explicit MatpowerScanner(const std::string& text) : text_(text) {}

  void scan(std::map<std::string, MatrixBlock>& matrices,
            std::map<std::string, double>& scalars,
            std::vector<std::string>& warnings) {
    while (!eof()) {
      skip_ws_and_comments();
      if (eof()) break;
      if (!match_keyword("mpc.")) {
        advance();
        continue;
      }
      const int decl_line = line_;
      std::string name = read_identifier();
      if (name.empty()) fail("expected identifier after 'mpc.'");
      skip_ws_and_comments();
      if (!match_char('=')) fail("expected '=' after mpc." + name);
      skip_ws_and_comments();
      if (peek() == '[') {
        MatrixBlock blk = read_matrix();
        blk.line = decl_line;
        matrices[name] = std::move(blk);
      } else if (peek() == '{' || peek() == '\'') {
        // cell arrays / strings (e.g. mpc.version) are skipped
        skip_value();
        warnings.push_back("ignored non-numeric block mpc." + name);
      } else {
        scalars[name] = read_number();
        skip_ws_and_comments();
        match_char(';');
      }
    }
  }

 private:
  bool eof() const { return pos_ >= text_.size(); }
  char peek() const { return eof() ? '\0' : text_[pos_]; }

  void advance() {
    if (eof()) return;
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_ws_and_comments() {
    while (!eof()) {
      const char c = peek();
      if (c == '%') {
        while (!eof() && peek() != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  bool match_keyword(const std::string& kw) {
    if (text_.compare(pos_, kw.size(), kw) != 0) return false;
    for (size_t i = 0; i < kw.size(); ++i) advance();
    return true;
  }

  bool match_char(char c) {
    if (peek() != c) return false;
    advance();
    return true;
  }

  std::string read_identifier() {
    std::string out;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_')) {
      out += peek();
      advance();
    }
    return out;
  }

  double read_number() {
    skip_ws_and_comments();
    const size_t start = pos_;
    const int l = line_, c = col_;
    if (text_.compare(pos_, 3, "Inf") == 0 || text_.compare(pos_, 3, "inf") == 0) {
      advance(); advance(); advance();
      return kInf;
    }
    while (!eof()) {
      const char ch = peek();
      if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '+' || ch == '-' ||
          ch == '.' || ch == 'e' || ch == 'E') {
        advance();
      } else {
        break;
      }
    }
    if (pos_ == start) fail_at("expected a number", l, c);
    const std::string tok = text_.substr(start, pos_ - start);
    try {
      size_t used = 0;
      const double v = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      fail_at("malformed number '" + tok + "'", l, c);
    }
    return 0.0;
  }

  MatrixBlock read_matrix() {
    MatrixBlock blk;
    match_char('[');
    std::vector<double> row;
    while (true) {
      skip_ws_and_comments();
      if (eof()) fail("unterminated matrix block");
      const char c = peek();
      if (c == ']') {
        advance();
        if (!row.empty()) blk.rows.push_back(std::move(row));
        skip_ws_and_comments();
        match_char(';');
        break;
      }
      if (c == ';' || c == '\n') {
        advance();
        if (!row.empty()) {
          blk.rows.push_back(std::move(row));
          row.clear();
        }
        continue;
      }
      if (c == ',') {
        advance();
        continue;
      }
      row.push_back(read_number());
    }
    return blk;
  }

  void skip_value() {
    int depth = 0;
    while (!eof()) {
      const char c = peek();
      if (c == '{') ++depth;
      if (c == '}') --depth;
      if (c == ';' && depth <= 0) {
        advance();
        return;
      }
      advance();
    }
  }

  [[noreturn]] void fail(const std::string& msg) const { fail_at(msg, line_, col_); }

  [[noreturn]] void fail_at(const std::string& msg, int l, int c) const {
    std::ostringstream os;
    os << "matpower parse error at line " << l << ", column " << c << ": " << msg;
    throw ParseError(os.str());
  }

  const std::string& text_;
  size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

double cell(const MatrixBlock& blk, size_t row, size_t col1based,
            const std::string& block, const std::string& what) {
  const auto& r = blk.rows[row];
  if (col1based > r.size()) {
    std::ostringstream os;
    os << "mpc." << block << " row " << row + 1 << ": missing column "
       << col1based << " (" << what << ")";
    throw ParseError(os.str());
  }
  return r[col1based - 1];
}

const char* kKnownBlocks[] = {"bus", "branch", "gen", "gencost"};

}  // namespace

ParsedCase parse_matpower(const std::string& text) {
  std::map<std::string, MatrixBlock> matrices;
  std::map<std::string, double> scalars;
  ParsedCase out;

  MatpowerScanner scanner(text);
  scanner.scan(matrices, scalars, out.warnings);

  for (const auto& [name, blk] : matrices) {
    if (std::find(std::begin(kKnownBlocks), std::end(kKnownBlocks), name) ==
        std::end(kKnownBlocks))
      out.warnings.push_back("ignored unsupported block mpc." + name);
  }
  for (const char* required : {"bus", "branch", "gen"}) {
    if (!matrices.count(required))
      throw ParseError(std::string("missing required block mpc.") + required);
  }
  Network& net = out.network;
  net.base_mva = scalars.count("baseMVA") ? scalars["baseMVA"] : 100.0;
  if (!scalars.count("baseMVA"))
    out.warnings.push_back("mpc.baseMVA missing, assuming 100");

  const MatrixBlock& bus = matrices["bus"];
  int ref = -1;
  for (size_t r = 0; r < bus.rows.size(); ++r) {
    const int id = static_cast<int>(cell(bus, r, 1, "bus", "bus id"));
    net.buses.push_back(id);
    out.bus_loads.push_back(cell(bus, r, 3, "bus", "Pd"));
    if (static_cast<int>(cell(bus, r, 2, "bus", "bus type")) == 3) {
      if (ref >= 0) out.warnings.push_back("multiple type-3 buses, keeping first");
      else ref = id;
    }
  }
  if (ref < 0) throw ParseError("mpc.bus declares no type-3 (reference) bus");
  net.reference_bus = ref;

  const MatrixBlock& branch = matrices["branch"];
  for (size_t r = 0; r < branch.rows.size(); ++r) {
    Branch br;
    br.from_bus = static_cast<int>(cell(branch, r, 1, "branch", "from bus"));
    br.to_bus = static_cast<int>(cell(branch, r, 2, "branch", "to bus"));
    br.reactance = cell(branch, r, 4, "branch", "reactance x");
    const double rate_a = cell(branch, r, 6, "branch", "rateA");
    br.limit = rate_a == 0.0 ? kInf : rate_a;  // rateA = 0 means unlimited
    net.branches.push_back(br);
  }

  const MatrixBlock& gen = matrices["gen"];
  for (size_t r = 0; r < gen.rows.size(); ++r) {
    Generator g;
    g.bus = static_cast<int>(cell(gen, r, 1, "gen", "gen bus"));
    g.pmax = cell(gen, r, 9, "gen", "Pmax");
    g.pmin = cell(gen, r, 10, "gen", "Pmin");
    g.cost = 1.0;
    g.participates = true;
    net.generators.push_back(g);
  }

  if (matrices.count("gencost")) {
    const MatrixBlock& gc = matrices["gencost"];
    const size_t n = std::min(gc.rows.size(), net.generators.size());
    for (size_t r = 0; r < n; ++r) {
      const int model = static_cast<int>(cell(gc, r, 1, "gencost", "cost model"));
      if (model != 2) {
        out.warnings.push_back("gencost row " + std::to_string(r + 1) +
                               ": non-polynomial model, cost defaults to 1.0");
        continue;
      }
      const int ncost = static_cast<int>(cell(gc, r, 4, "gencost", "ncost"));
      if (ncost < 1) continue;
      // Coefficients are listed highest degree first; the linear term sits
      // second from the end.
      if (ncost >= 2)
        net.generators[r].cost = cell(gc, r, 4 + ncost - 1, "gencost", "linear coefficient");
      else
        out.warnings.push_back("gencost row " + std::to_string(r + 1) +
                               ": constant-only cost, using 1.0");
      if (ncost >= 3) {
        const double quad = cell(gc, r, 5, "gencost", "quadratic coefficient");
        if (quad != 0.0)
          out.warnings.push_back("gencost row " + std::to_string(r + 1) +
                                 ": quadratic term ignored");
      }
    }
  } else {
    out.warnings.push_back("mpc.gencost missing, all costs default to 1.0");
  }

  ensure_generator_per_bus(net);
  net.validate();
  return out;
}

namespace {

[[noreturn]] void schema_error(const std::string& pointer, const std::string& msg) {
  throw ParseError("schema violation at " + pointer + ": " + msg);
}

double require_number(const json& j, const std::string& ptr) {
  if (!j.is_number()) schema_error(ptr, "expected a number");
  return j.get<double>();
}

int require_int(const json& j, const std::string& ptr) {
  if (!j.is_number_integer()) schema_error(ptr, "expected an integer");
  return j.get<int>();
}

}  // namespace

ParsedCase parse_native(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) schema_error("", "expected an object");
  for (const char* field : {"base_mva", "reference_bus", "buses", "branches", "generators"}) {
    if (!doc.contains(field)) schema_error("/" + std::string(field), "required field missing");
  }

  ParsedCase out;
  Network& net = out.network;
  net.base_mva = require_number(doc["base_mva"], "/base_mva");
  net.reference_bus = require_int(doc["reference_bus"], "/reference_bus");

  const json& buses = doc["buses"];
  if (!buses.is_array() || buses.empty()) schema_error("/buses", "expected a non-empty array");
  for (size_t i = 0; i < buses.size(); ++i)
    net.buses.push_back(require_int(buses[i], "/buses/" + std::to_string(i)));

  const json& branches = doc["branches"];
  if (!branches.is_array()) schema_error("/branches", "expected an array");
  for (size_t i = 0; i < branches.size(); ++i) {
    const std::string base = "/branches/" + std::to_string(i);
    const json& b = branches[i];
    if (!b.is_object()) schema_error(base, "expected an object");
    for (const char* field : {"from", "to", "x", "limit"})
      if (!b.contains(field)) schema_error(base + "/" + field, "required field missing");
    Branch br;
    br.from_bus = require_int(b["from"], base + "/from");
    br.to_bus = require_int(b["to"], base + "/to");
    br.reactance = require_number(b["x"], base + "/x");
    if (!(br.reactance > 0.0)) schema_error(base + "/x", "reactance must be > 0");
    if (b["limit"].is_null()) {
      br.limit = kInf;
    } else {
      br.limit = require_number(b["limit"], base + "/limit");
      if (!(br.limit > 0.0)) schema_error(base + "/limit", "limit must be > 0 or null");
    }
    net.branches.push_back(br);
  }

  const json& gens = doc["generators"];
  if (!gens.is_array()) schema_error("/generators", "expected an array");
  for (size_t i = 0; i < gens.size(); ++i) {
    const std::string base = "/generators/" + std::to_string(i);
    const json& g = gens[i];
    if (!g.is_object()) schema_error(base, "expected an object");
    for (const char* field : {"bus", "pmin", "pmax", "cost", "participates"})
      if (!g.contains(field)) schema_error(base + "/" + field, "required field missing");
    Generator gen;
    gen.bus = require_int(g["bus"], base + "/bus");
    gen.pmin = require_number(g["pmin"], base + "/pmin");
    gen.pmax = require_number(g["pmax"], base + "/pmax");
    gen.cost = require_number(g["cost"], base + "/cost");
    if (!g["participates"].is_boolean())
      schema_error(base + "/participates", "expected a boolean");
    gen.participates = g["participates"].get<bool>();
    if (gen.pmin > gen.pmax) schema_error(base + "/pmin", "pmin > pmax");
    net.generators.push_back(gen);
  }

  ensure_generator_per_bus(net);
  try {
    net.validate();
  } catch (const ValidationError& e) {
    throw ParseError(std::string("invalid network: ") + e.what());
  }
  return out;
}

std::string emit_native(const Network& net) {
  json doc;
  doc["base_mva"] = net.base_mva;
  doc["reference_bus"] = net.reference_bus;
  doc["buses"] = net.buses;
  doc["branches"] = json::array();
  for (const Branch& br : net.branches) {
    json b;
    b["from"] = br.from_bus;
    b["to"] = br.to_bus;
    b["x"] = br.reactance;
    if (std::isfinite(br.limit))
      b["limit"] = br.limit;
    else
      b["limit"] = nullptr;
    doc["branches"].push_back(b);
  }
  doc["generators"] = json::array();
  for (const Generator& g : net.generators) {
    json j;
    j["bus"] = g.bus;
    j["pmin"] = g.pmin;
    j["pmax"] = g.pmax;
    j["cost"] = g.cost;
    j["participates"] = g.participates;
    doc["generators"].push_back(j);
  }
  return doc.dump(2);
}

ParsedCase load_case_file(const std::string& path,
                          const std::optional<std::string>& format) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open case file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  std::string fmt;
  if (format) {
    fmt = *format;
  } else if (path.size() > 2 && path.substr(path.size() - 2) == ".m") {
    fmt = "matpower";
  } else {
    fmt = "native";
  }
  if (fmt == "matpower") return parse_matpower(buf.str());
  if (fmt == "native") return parse_native(buf.str());
  throw ParseError("unknown case format: " + fmt);
}

}  // namespace ucscreen
