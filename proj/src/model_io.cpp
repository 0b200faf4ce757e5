#include "sln/model_io.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "sln/errors.hpp"

namespace sln {
namespace {

using nlohmann::json;

Eigen::VectorXd to_vector(const json& j, int d, const char* what) {
  if (j.is_number()) return Eigen::VectorXd::Constant(d, j.get<double>());
  if (!j.is_array() || static_cast<int>(j.size()) != d)
    throw ModelFileError(std::string("model file: ") + what + " must be a scalar or length-d list");
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) {
    if (!j[static_cast<std::size_t>(i)].is_number())
      throw ModelFileError(std::string("model file: non-numeric entry in ") + what);
    v(i) = j[static_cast<std::size_t>(i)].get<double>();
  }
  return v;
}

SlnModel from_json(const json& doc) {
  if (!doc.is_object()) throw ModelFileError("model file: top level must be an object");
  if (doc.contains("equicorrelated")) {
    const json& e = doc["equicorrelated"];
    if (!e.is_object() || !e.contains("d") || !e.contains("rho") || !e.contains("s2") ||
        !e.contains("nu"))
      throw ModelFileError("model file: equicorrelated needs d, rho, s2, nu");
    const int d = e["d"].get<int>();
    if (d < 1) throw ModelFileError("model file: d must be >= 1");
    return equicorrelated(d, e["rho"].get<double>(), e["s2"].get<double>(),
                          to_vector(e["nu"], d, "nu"));
  }
  if (doc.contains("black_scholes")) {
    const json& b = doc["black_scholes"];
    for (const char* key : {"X0", "r", "sigma", "T", "d"})
      if (!b.contains(key))
        throw ModelFileError(std::string("model file: black_scholes needs ") + key);
    BlackScholesSpec p{b["X0"].get<double>(), b["r"].get<double>(), b["sigma"].get<double>(),
                       b["T"].get<double>(), b["d"].get<int>()};
    return black_scholes_model(p);
  }
  if (doc.contains("nu") && doc.contains("Sigma")) {
    const json& jn = doc["nu"];
    if (!jn.is_array() || jn.empty())
      throw ModelFileError("model file: nu must be a nonempty list");
    const int d = static_cast<int>(jn.size());
    Eigen::VectorXd nu = to_vector(jn, d, "nu");
    const json& js = doc["Sigma"];
    if (!js.is_array() || static_cast<int>(js.size()) != d)
      throw ModelFileError("model file: Sigma must be a d x d matrix");
    Eigen::MatrixXd Sigma(d, d);
    for (int i = 0; i < d; ++i) {
      const json& row = js[static_cast<std::size_t>(i)];
      if (!row.is_array() || static_cast<int>(row.size()) != d)
        throw ModelFileError("model file: Sigma must be a d x d matrix");
      for (int j = 0; j < d; ++j) {
        if (!row[static_cast<std::size_t>(j)].is_number())
          throw ModelFileError("model file: non-numeric entry in Sigma");
        Sigma(i, j) = row[static_cast<std::size_t>(j)].get<double>();
      }
    }
    return new_model(std::move(nu), std::move(Sigma));
  }
  throw ModelFileError(
      "model file: expected {nu, Sigma}, {equicorrelated: {...}}, or {black_scholes: {...}}");
}

}  // namespace

SlnModel parse_model_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ModelFileError(std::string("model file: JSON parse error: ") + e.what());
  }
  try {
    return from_json(doc);
  } catch (const ModelFileError&) {
    throw;
  } catch (const json::exception& e) {
    throw ModelFileError(std::string("model file: ") + e.what());
  } catch (const std::exception& e) {
    throw ModelFileError(std::string("model file: ") + e.what());
  }
}

SlnModel load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelFileError("cannot open model file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_model_json(ss.str());
}

}  // namespace sln
