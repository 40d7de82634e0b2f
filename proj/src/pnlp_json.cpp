#include "dip/pnlp_json.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

#include "dip/quadratic.hpp"

namespace dip {

namespace {

using nlohmann::json;

Vector to_vector(const json& j) {
  Vector v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

Matrix to_matrix(const json& j, int expected_cols) {
  const int rows = static_cast<int>(j.size());
  Matrix m(rows, expected_cols);
  for (int r = 0; r < rows; ++r) {
    if (static_cast<int>(j[r].size()) != expected_cols) {
      throw ParseError("pnlp-v1: matrix row " + std::to_string(r) + " has " +
                       std::to_string(j[r].size()) + " entries, expected " +
                       std::to_string(expected_cols));
    }
    for (int c = 0; c < expected_cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

json from_vector(const Vector& v) {
  json j = json::array();
  for (int i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

json from_matrix(const Matrix& m) {
  json j = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    j.push_back(row);
  }
  return j;
}

}  // namespace

PnlpInstance load_pnlp_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("pnlp-v1: invalid JSON: ") + e.what());
  }
  if (!doc.contains("format") || doc["format"] != "pnlp-v1") {
    throw ParseError("pnlp-v1: missing or unexpected \"format\" field");
  }
  if (!doc.contains("n_c") || !doc.contains("b") || !doc.contains("subsystems")) {
    throw ParseError("pnlp-v1: document needs n_c, b and subsystems");
  }
  const int n_c = doc["n_c"].get<int>();
  Vector b = to_vector(doc["b"]);
  if (b.size() != n_c) throw ParseError("pnlp-v1: b length does not match n_c");

  std::vector<Subsystem> subsystems;
  std::vector<Vector> x0;
  for (const json& js : doc["subsystems"]) {
    const int n_x = js.at("n_x").get<int>();
    if (!js.contains("objective")) {
      throw ParseError(
          "pnlp-v1: subsystem without an objective; structure-only exports carry no "
          "evaluators and cannot be solved");
    }
    const json& obj = js["objective"];
    Matrix H = to_matrix(obj.at("H"), n_x);
    if (H.rows() != n_x) throw ParseError("pnlp-v1: H must be n_x x n_x");
    Vector c = to_vector(obj.at("c"));
    if (c.size() != n_x) throw ParseError("pnlp-v1: c must have length n_x");
    const double c0 = obj.contains("c0") ? obj["c0"].get<double>() : 0.0;

    auto model = std::make_shared<QuadraticModel>(std::move(H), std::move(c), c0);
    if (js.contains("eq")) {
      model->with_equalities(to_matrix(js["eq"].at("G"), n_x), to_vector(js["eq"].at("rhs")));
    }
    if (js.contains("ineq")) {
      model->with_inequalities(to_matrix(js["ineq"].at("G"), n_x), to_vector(js["ineq"].at("rhs")));
    }

    SparseCoupling coupling(n_c, n_x);
    if (js.contains("A")) {
      for (const json& t : js["A"]) {
        if (t.size() != 3) throw ParseError("pnlp-v1: coupling triplets are [row, col, value]");
        coupling.add(t[0].get<int>(), t[1].get<int>(), t[2].get<double>());
      }
    }

    x0.push_back(js.contains("x0") ? to_vector(js["x0"]) : Vector::Zero(n_x));
    if (x0.back().size() != n_x) throw ParseError("pnlp-v1: x0 must have length n_x");
    subsystems.push_back({std::move(model), std::move(coupling)});
  }

  return {PartitionedNlp(std::move(subsystems), std::move(b)), std::move(x0)};
}

PnlpInstance load_pnlp_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return load_pnlp_json(buf.str());
}

namespace {

json coupling_to_json(const SparseCoupling& coupling) {
  json a = json::array();
  for (const auto& e : coupling.entries) a.push_back({e.row, e.col, e.value});
  return a;
}

}  // namespace

std::string save_pnlp_json(const PartitionedNlp& problem, const std::vector<Vector>* x0) {
  nlohmann::ordered_json doc;
  doc["format"] = "pnlp-v1";
  doc["n_c"] = problem.coupling_dim();
  doc["b"] = from_vector(problem.coupling_rhs());
  doc["subsystems"] = json::array();
  for (int i = 0; i < problem.num_subsystems(); ++i) {
    const Subsystem& sub = problem.subsystem(i);
    const auto* quad = dynamic_cast<const QuadraticModel*>(sub.model.get());
    if (!quad) {
      throw InstanceError(
          "save_pnlp_json: subsystem " + std::to_string(i + 1) +
          " is not quadratic; use export_pnlp_structure_json for general instances");
    }
    nlohmann::ordered_json js;
    js["n_x"] = sub.num_vars();
    js["objective"] = {{"H", from_matrix(quad->hessian())},
                       {"c", from_vector(quad->linear())},
                       {"c0", quad->constant()}};
    if (quad->num_eq() > 0) {
      js["eq"] = {{"G", from_matrix(quad->eq_coeffs())}, {"rhs", from_vector(quad->eq_rhs())}};
    }
    if (quad->num_ineq() > 0) {
      js["ineq"] = {{"G", from_matrix(quad->ineq_coeffs())},
                    {"rhs", from_vector(quad->ineq_rhs())}};
    }
    js["A"] = coupling_to_json(sub.coupling);
    if (x0) js["x0"] = from_vector((*x0)[i]);
    doc["subsystems"].push_back(js);
  }
  return doc.dump(2);
}

std::string export_pnlp_structure_json(const PartitionedNlp& problem) {
  nlohmann::ordered_json doc;
  doc["format"] = "pnlp-v1";
  doc["structure_only"] = true;
  doc["n_c"] = problem.coupling_dim();
  doc["b"] = from_vector(problem.coupling_rhs());
  doc["subsystems"] = json::array();
  for (int i = 0; i < problem.num_subsystems(); ++i) {
    const Subsystem& sub = problem.subsystem(i);
    nlohmann::ordered_json js;
    js["n_x"] = sub.num_vars();
    js["n_g"] = sub.num_eq();
    js["n_h"] = sub.num_ineq();
    js["A"] = coupling_to_json(sub.coupling);
    doc["subsystems"].push_back(js);
  }
  return doc.dump(2);
}

}  // namespace dip
