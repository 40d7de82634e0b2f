#include "dip/opf.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace dip::opf {

int OpfCase::bus_position(int id) const {
  for (std::size_t i = 0; i < buses.size(); ++i) {
    if (buses[i].id == id) return static_cast<int>(i);
  }
  throw InstanceError("unknown bus id " + std::to_string(id));
}

int OpfCase::slack_position() const {
  for (std::size_t i = 0; i < buses.size(); ++i) {
    if (buses[i].type == BusType::Slack) return static_cast<int>(i);
  }
  throw InstanceError("case has no slack bus");
}

void OpfCase::validate() const {
  if (base_mva <= 0) throw InstanceError("base MVA must be positive");
  std::map<int, int> seen;
  int slacks = 0;
  for (const Bus& b : buses) {
    if (seen.count(b.id)) throw InstanceError("duplicate bus id " + std::to_string(b.id));
    seen[b.id] = 1;
    if (b.v_min > b.v_max) {
      throw InstanceError("bus " + std::to_string(b.id) + ": voltage bounds out of order");
    }
    if (b.type == BusType::Slack) ++slacks;
  }
  if (slacks != 1) {
    throw InstanceError("expected exactly one slack bus, found " + std::to_string(slacks));
  }
  for (const Branch& br : branches) {
    if (!seen.count(br.from) || !seen.count(br.to)) {
      throw InstanceError("branch " + std::to_string(br.from) + "-" + std::to_string(br.to) +
                          " references an unknown bus");
    }
    if (br.in_service && br.r == 0.0 && br.x == 0.0) {
      throw InstanceError("branch " + std::to_string(br.from) + "-" + std::to_string(br.to) +
                          " has zero impedance");
    }
  }
  for (const Generator& g : generators) {
    if (!seen.count(g.bus)) {
      throw InstanceError("generator references unknown bus " + std::to_string(g.bus));
    }
    if (g.p_min > g.p_max || g.q_min > g.q_max) {
      throw InstanceError("generator at bus " + std::to_string(g.bus) +
                          ": bounds out of order");
    }
  }
}

namespace {

struct Token {
  enum Kind { Ident, Number, Punct, String } kind = Punct;
  std::string text;
  double value = 0.0;
  int line = 1;
};

std::vector<Token> tokenize(const std::string& raw) {
  std::vector<Token> tokens;
  int line = 1;
  std::size_t i = 0;
  const std::size_t n = raw.size();
  while (i < n) {
    const char c = raw[i];
    if (c == '\n') {
      ++line;
      ++i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c)) || c == '\r' || c == ',') {
      ++i;
      continue;
    }
    if (c == '%') {  // comment to end of line
      while (i < n && raw[i] != '\n') ++i;
      continue;
    }
    if (c == '\'') {
      std::size_t j = i + 1;
      while (j < n && raw[j] != '\'' && raw[j] != '\n') ++j;
      if (j >= n || raw[j] != '\'') throw ParseError("unterminated string", line);
      tokens.push_back({Token::String, raw.substr(i + 1, j - i - 1), 0.0, line});
      i = j + 1;
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < n && (std::isalnum(static_cast<unsigned char>(raw[j])) || raw[j] == '_')) ++j;
      tokens.push_back({Token::Ident, raw.substr(i, j - i), 0.0, line});
      i = j;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '+') {
      char* end = nullptr;
      const double value = std::strtod(raw.c_str() + i, &end);
      const std::size_t len = end - (raw.c_str() + i);
      if (len == 0) throw ParseError("unexpected character '" + std::string(1, c) + "'", line);
      tokens.push_back({Token::Number, raw.substr(i, len), value, line});
      i += len;
      continue;
    }
    if (c == '[' || c == ']' || c == ';' || c == '=' || c == '.') {
      tokens.push_back({Token::Punct, std::string(1, c), 0.0, line});
      ++i;
      continue;
    }
    throw ParseError("unexpected character '" + std::string(1, c) + "'", line);
  }
  return tokens;
}

struct MatrixRows {
  std::vector<std::vector<double>> rows;
  std::vector<int> lines;  // line of each row
};

class CaseParser {
 public:
  explicit CaseParser(const std::string& text) : tokens_(tokenize(text)) {}

  void run() {
    while (!done()) {
      if (peek().kind == Token::Ident && peek().text == "function") {
        skip_function_header();
        continue;
      }
      parse_assignment();
    }
  }

  double base_mva = 0.0;
  bool have_base = false;
  std::map<std::string, MatrixRows> matrices;

 private:
  bool done() const { return pos_ >= tokens_.size(); }
  const Token& peek() const { return tokens_[pos_]; }
  Token take() { return tokens_[pos_++]; }

  void expect_punct(const std::string& p) {
    if (done() || peek().kind != Token::Punct || peek().text != p) {
      throw ParseError("expected '" + p + "'", done() ? 0 : peek().line);
    }
    ++pos_;
  }

  void skip_function_header() {
    // `function mpc = case118` -- consume through the case name.
    const int line = take().line;  // function
    while (!done() && peek().line == line) ++pos_;
  }

  void parse_assignment() {
    if (peek().kind != Token::Ident) throw ParseError("expected an assignment", peek().line);
    std::string name = take().text;
    while (!done() && peek().kind == Token::Punct && peek().text == ".") {
      ++pos_;
      if (done() || peek().kind != Token::Ident) throw ParseError("expected a field name");
      name = take().text;  // keep the last component: bus, gen, branch, ...
    }
    expect_punct("=");
    if (done()) throw ParseError("unterminated assignment");

    if (peek().kind == Token::Number) {
      const Token t = take();
      expect_punct(";");
      if (name == "baseMVA") {
        base_mva = t.value;
        have_base = true;
      }
      return;
    }
    if (peek().kind == Token::String) {
      ++pos_;  // e.g. version = '2'
      expect_punct(";");
      return;
    }
    if (peek().kind == Token::Punct && peek().text == "[") {
      ++pos_;
      MatrixRows m = parse_matrix();
      expect_punct(";");
      matrices[name] = std::move(m);
      return;
    }
    throw ParseError("unsupported right-hand side in assignment of '" + name + "'", peek().line);
  }

  MatrixRows parse_matrix() {
    MatrixRows m;
    std::vector<double> row;
    int row_line = done() ? 0 : peek().line;
    int last_line = row_line;
    auto flush = [&]() {
      if (!row.empty()) {
        m.rows.push_back(row);
        m.lines.push_back(row_line);
        row.clear();
      }
    };
    while (!done()) {
      const Token& t = peek();
      if (t.kind == Token::Punct && t.text == "]") {
        ++pos_;
        flush();
        return m;
      }
      if (t.kind == Token::Punct && t.text == ";") {
        ++pos_;
        flush();
        row_line = done() ? last_line : peek().line;
        continue;
      }
      if (t.kind == Token::Number) {
        if (!row.empty() && t.line != last_line) {
          // newline also terminates a row
          flush();
          row_line = t.line;
        }
        if (row.empty()) row_line = t.line;
        row.push_back(t.value);
        last_line = t.line;
        ++pos_;
        continue;
      }
      throw ParseError("unexpected token '" + t.text + "' inside matrix", t.line);
    }
    throw ParseError("unterminated matrix");
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

void require_columns(const MatrixRows& m, std::size_t row, std::size_t count,
                     const std::string& what) {
  if (m.rows[row].size() < count) {
    throw ParseError(what + " row has " + std::to_string(m.rows[row].size()) +
                         " columns, need at least " + std::to_string(count),
                     m.lines[row]);
  }
}

}  // namespace

OpfCase parse_matpower_case(const std::string& text) {
  CaseParser parser(text);
  parser.run();
  if (!parser.have_base) throw ParseError("case has no baseMVA assignment");
  for (const char* required : {"bus", "gen", "branch", "gencost"}) {
    if (!parser.matrices.count(required)) {
      throw ParseError(std::string("case has no ") + required + " matrix");
    }
  }

  OpfCase c;
  c.base_mva = parser.base_mva;
  const double base = c.base_mva;

  const MatrixRows& bus = parser.matrices["bus"];
  for (std::size_t r = 0; r < bus.rows.size(); ++r) {
    require_columns(bus, r, 13, "bus");
    const auto& row = bus.rows[r];
    OpfCase::Bus b;
    b.id = static_cast<int>(row[0]);
    const int type = static_cast<int>(row[1]);
    switch (type) {
      case 1:
        b.type = BusType::PQ;
        break;
      case 2:
        b.type = BusType::PV;
        break;
      case 3:
        b.type = BusType::Slack;
        break;
      default:
        throw ParseError("bus " + std::to_string(b.id) + ": unsupported bus type " +
                             std::to_string(type),
                         bus.lines[r]);
    }
    b.p_demand = row[2] / base;
    b.q_demand = row[3] / base;
    b.g_shunt = row[4] / base;
    b.b_shunt = row[5] / base;
    b.v_max = row[11];
    b.v_min = row[12];
    c.buses.push_back(b);
  }

  const MatrixRows& gen = parser.matrices["gen"];
  for (std::size_t r = 0; r < gen.rows.size(); ++r) {
    require_columns(gen, r, 10, "gen");
    const auto& row = gen.rows[r];
    OpfCase::Generator g;
    g.bus = static_cast<int>(row[0]);
    g.q_max = row[3] / base;
    g.q_min = row[4] / base;
    g.in_service = row[7] > 0;
    g.p_max = row[8] / base;
    g.p_min = row[9] / base;
    c.generators.push_back(g);
  }

  const MatrixRows& branch = parser.matrices["branch"];
  for (std::size_t r = 0; r < branch.rows.size(); ++r) {
    require_columns(branch, r, 11, "branch");
    const auto& row = branch.rows[r];
    OpfCase::Branch br;
    br.from = static_cast<int>(row[0]);
    br.to = static_cast<int>(row[1]);
    br.r = row[2];
    br.x = row[3];
    br.b_charge = row[4];
    br.tap = row[8] == 0.0 ? 1.0 : row[8];
    if (row[9] != 0.0) {
      throw ParseError("branch " + std::to_string(br.from) + "-" + std::to_string(br.to) +
                           ": phase shifters are not supported",
                       branch.lines[r]);
    }
    br.in_service = row[10] > 0;
    c.branches.push_back(br);
  }

  const MatrixRows& cost = parser.matrices["gencost"];
  if (cost.rows.size() != c.generators.size()) {
    throw ParseError("gencost has " + std::to_string(cost.rows.size()) + " rows for " +
                     std::to_string(c.generators.size()) + " generators");
  }
  for (std::size_t r = 0; r < cost.rows.size(); ++r) {
    require_columns(cost, r, 4, "gencost");
    const auto& row = cost.rows[r];
    const int model = static_cast<int>(row[0]);
    if (model != 2) {
      throw ParseError("gencost row " + std::to_string(r + 1) +
                           ": only polynomial cost model 2 is supported",
                       cost.lines[r]);
    }
    const int ncost = static_cast<int>(row[3]);
    if (ncost < 1 || ncost > 3) {
      throw ParseError("gencost row " + std::to_string(r + 1) +
                           ": polynomial costs support up to quadratic terms",
                       cost.lines[r]);
    }
    require_columns(cost, r, 4 + ncost, "gencost");
    double coeff[3] = {0.0, 0.0, 0.0};  // c2, c1, c0
    for (int j = 0; j < ncost; ++j) coeff[3 - ncost + j] = row[4 + j];
    c.generators[r].c2 = coeff[0];
    c.generators[r].c1 = coeff[1];
    c.generators[r].c0 = coeff[2];
  }

  try {
    c.validate();
  } catch (const InstanceError& e) {
    throw ParseError(e.what());
  }
  return c;
}

OpfCase load_matpower_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_matpower_case(buf.str());
}

std::string write_matpower_case(const OpfCase& c, const std::string& name) {
  std::string out;
  char buf[256];
  const double base = c.base_mva;
  out += "function mpc = " + name + "\n";
  out += "mpc.version = '2';\n";
  std::snprintf(buf, sizeof(buf), "mpc.baseMVA = %.10g;\n\n", base);
  out += buf;

  out += "%% bus_i type Pd Qd Gs Bs area Vm Va baseKV zone Vmax Vmin\n";
  out += "mpc.bus = [\n";
  for (const auto& b : c.buses) {
    const int type = b.type == BusType::Slack ? 3 : (b.type == BusType::PV ? 2 : 1);
    std::snprintf(buf, sizeof(buf), "\t%d\t%d\t%.10g\t%.10g\t%.10g\t%.10g\t1\t1\t0\t0\t1\t%.10g\t%.10g;\n",
                  b.id, type, b.p_demand * base, b.q_demand * base, b.g_shunt * base,
                  b.b_shunt * base, b.v_max, b.v_min);
    out += buf;
  }
  out += "];\n\n";

  out += "%% bus Pg Qg Qmax Qmin Vg mBase status Pmax Pmin\n";
  out += "mpc.gen = [\n";
  for (const auto& g : c.generators) {
    std::snprintf(buf, sizeof(buf), "\t%d\t0\t0\t%.10g\t%.10g\t1\t%.10g\t%d\t%.10g\t%.10g;\n",
                  g.bus, g.q_max * base, g.q_min * base, base, g.in_service ? 1 : 0,
                  g.p_max * base, g.p_min * base);
    out += buf;
  }
  out += "];\n\n";

  out += "%% fbus tbus r x b rateA rateB rateC ratio angle status\n";
  out += "mpc.branch = [\n";
  for (const auto& br : c.branches) {
    std::snprintf(buf, sizeof(buf), "\t%d\t%d\t%.10g\t%.10g\t%.10g\t0\t0\t0\t%.10g\t0\t%d;\n",
                  br.from, br.to, br.r, br.x, br.b_charge, br.tap == 1.0 ? 0.0 : br.tap,
                  br.in_service ? 1 : 0);
    out += buf;
  }
  out += "];\n\n";

  out += "%% model startup shutdown n c2 c1 c0\n";
  out += "mpc.gencost = [\n";
  for (const auto& g : c.generators) {
    std::snprintf(buf, sizeof(buf), "\t2\t0\t0\t3\t%.10g\t%.10g\t%.10g;\n", g.c2, g.c1, g.c0);
    out += buf;
  }
  out += "];\n";
  return out;
}

ComplexSparse build_admittance(const OpfCase& c) {
  const int n = static_cast<int>(c.buses.size());
  std::vector<Eigen::Triplet<std::complex<double>>> triplets;
  triplets.reserve(4 * c.branches.size() + n);
  for (const auto& br : c.branches) {
    if (!br.in_service) continue;
    if (br.r == 0.0 && br.x == 0.0) {
      throw InstanceError("branch " + std::to_string(br.from) + "-" + std::to_string(br.to) +
                          " has zero impedance");
    }
    const int f = c.bus_position(br.from);
    const int t = c.bus_position(br.to);
    const std::complex<double> y = 1.0 / std::complex<double>(br.r, br.x);
    const std::complex<double> ysh(0.0, br.b_charge / 2.0);
    const double tau = br.tap;
    triplets.emplace_back(f, f, (y + ysh) / (tau * tau));
    triplets.emplace_back(t, t, y + ysh);
    triplets.emplace_back(f, t, -y / tau);
    triplets.emplace_back(t, f, -y / tau);
  }
  for (int i = 0; i < n; ++i) {
    const auto& b = c.buses[i];
    if (b.g_shunt != 0.0 || b.b_shunt != 0.0) {
      triplets.emplace_back(i, i, std::complex<double>(b.g_shunt, b.b_shunt));
    }
  }
  ComplexSparse y(n, n);
  y.setFromTriplets(triplets.begin(), triplets.end());
  y.makeCompressed();
  return y;
}

std::vector<TieSpec> parse_tie_specs_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("tie spec: invalid JSON: ") + e.what());
  }
  const nlohmann::json& list = doc.is_array() ? doc : doc.at("ties");
  std::vector<TieSpec> ties;
  for (const auto& t : list) {
    TieSpec tie;
    tie.copy_a = t.at("copy_a").get<int>();
    tie.bus_a = t.at("bus_a").get<int>();
    tie.copy_b = t.at("copy_b").get<int>();
    tie.bus_b = t.at("bus_b").get<int>();
    tie.r = t.at("r").get<double>();
    tie.x = t.at("x").get<double>();
    tie.b = t.contains("b") ? t["b"].get<double>() : 0.0;
    ties.push_back(tie);
  }
  return ties;
}

std::vector<TieSpec> load_tie_specs_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_tie_specs_json(buf.str());
}

InterconnectedCase interconnect_copies(const OpfCase& base, int k,
                                       const std::vector<TieSpec>& ties) {
  if (k < 2) throw InstanceError("interconnect_copies: need at least two copies");
  base.validate();
  int stride = 0;
  for (const auto& b : base.buses) stride = std::max(stride, b.id);

  InterconnectedCase out;
  out.regions = k;
  out.combined.base_mva = base.base_mva;
  out.combined.slack_voltage = base.slack_voltage;

  for (int copy = 1; copy <= k; ++copy) {
    const int offset = (copy - 1) * stride;
    for (const auto& b : base.buses) {
      OpfCase::Bus nb = b;
      nb.id = b.id + offset;
      if (copy > 1 && nb.type == BusType::Slack) nb.type = BusType::PV;
      out.combined.buses.push_back(nb);
      out.region_of_bus.push_back(copy - 1);
    }
    for (const auto& br : base.branches) {
      OpfCase::Branch nb = br;
      nb.from = br.from + offset;
      nb.to = br.to + offset;
      out.combined.branches.push_back(nb);
    }
    for (const auto& g : base.generators) {
      OpfCase::Generator ng = g;
      ng.bus = g.bus + offset;
      out.combined.generators.push_back(ng);
    }
  }

  for (const auto& tie : ties) {
    if (tie.copy_a < 1 || tie.copy_a > k || tie.copy_b < 1 || tie.copy_b > k) {
      throw InstanceError("tie references copy outside 1.." + std::to_string(k));
    }
    base.bus_position(tie.bus_a);  // throws on unknown ids
    base.bus_position(tie.bus_b);
    if (tie.copy_a == tie.copy_b) {
      throw InstanceError("tie connects copy " + std::to_string(tie.copy_a) + " to itself");
    }
    OpfCase::Branch br;
    br.from = tie.bus_a + (tie.copy_a - 1) * stride;
    br.to = tie.bus_b + (tie.copy_b - 1) * stride;
    br.r = tie.r;
    br.x = tie.x;
    br.b_charge = tie.b;
    br.tap = 1.0;
    br.in_service = true;
    out.combined.branches.push_back(br);
  }

  out.combined.validate();
  return out;
}

}  // namespace dip::opf
