#include "qmeas/io.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "qmeas/errors.hpp"

namespace qmeas {

json matrix_to_json(const ComplexMatrix& m) {
  json entries = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      entries.push_back(json::array({m(r, c).real(), m(r, c).imag()}));
  return json{{"n", m.rows()}, {"entries", entries}};
}

ComplexMatrix matrix_from_json(const json& j) {
  if (!j.is_object() || !j.contains("n") || !j.contains("entries"))
    throw InputError("matrix: expected {n, entries}");
  const int n = j.at("n").get<int>();
  const json& e = j.at("entries");
  if (n <= 0 || !e.is_array() || static_cast<int>(e.size()) != n * n)
    throw InputError("matrix: entries must hold n*n [re, im] pairs");
  ComplexMatrix m(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const json& p = e[r * n + c];
      if (!p.is_array() || p.size() != 2)
        throw InputError("matrix: each entry must be an [re, im] pair");
      m(r, c) = cd(p[0].get<double>(), p[1].get<double>());
    }
  return m;
}

json vector_to_json(const Eigen::VectorXcd& v) {
  json entries = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i)
    entries.push_back(json::array({v[i].real(), v[i].imag()}));
  return entries;
}

Eigen::VectorXcd vector_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw InputError("vector: expected array of [re, im]");
  Eigen::VectorXcd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& p = j[i];
    if (!p.is_array() || p.size() != 2)
      throw InputError("vector: each entry must be an [re, im] pair");
    v[static_cast<Eigen::Index>(i)] = cd(p[0].get<double>(), p[1].get<double>());
  }
  return v;
}

json schedule_to_json(const ControlSchedule& s) {
  json j;
  if (s.kind() == ControlSchedule::Kind::ClosedForm) {
    j["variant"] = "closed_form";
    j["frame"] = matrix_to_json(s.frame().matrix());
    j["centers"] = s.centers();
    j["scale"] = s.scale();
    j["alpha"] = s.alpha();
    j["x_max"] = s.x_max();
    j["block_sizes"] = s.block_sizes();
  } else {
    j["variant"] = "tabulated";
    j["grid"] = s.grid();
    json coeffs = json::array();
    for (const auto& p : s.coefficients()) {
      json row = json::array();
      for (Eigen::Index i = 0; i < p.size(); ++i) row.push_back(p[i]);
      coeffs.push_back(std::move(row));
    }
    j["coefficients"] = std::move(coeffs);
    json controls = json::array();
    for (const auto& c : s.controls()) controls.push_back(matrix_to_json(c.matrix()));
    j["controls"] = std::move(controls);
    j["alpha"] = s.alpha_values();
  }
  return j;
}

ControlSchedule schedule_from_json(const json& j, const Tolerances& tol) {
  if (!j.is_object() || !j.contains("variant"))
    throw InputError("schedule: missing variant tag");
  const std::string variant = j.at("variant").get<std::string>();
  if (variant == "closed_form") {
    UnitaryOperator frame(matrix_from_json(j.at("frame")), tol);
    std::vector<double> centers = j.at("centers").get<std::vector<double>>();
    const double x_max = j.at("x_max").get<double>();
    std::vector<int> block_sizes;
    if (j.contains("block_sizes"))
      block_sizes = j.at("block_sizes").get<std::vector<int>>();
    return ControlSchedule::closed_form(std::move(frame), std::move(centers), x_max,
                                        std::move(block_sizes));
  }
  if (variant == "tabulated") {
    std::vector<double> grid = j.at("grid").get<std::vector<double>>();
    std::vector<Eigen::VectorXd> coeffs;
    for (const json& row : j.at("coefficients")) {
      Eigen::VectorXd p(row.size());
      for (std::size_t i = 0; i < row.size(); ++i)
        p[static_cast<Eigen::Index>(i)] = row[i].get<double>();
      coeffs.push_back(std::move(p));
    }
    std::vector<HermitianOperator> controls;
    for (const json& c : j.at("controls"))
      controls.emplace_back(matrix_from_json(c), tol);
    std::vector<double> alpha;
    if (j.contains("alpha")) alpha = j.at("alpha").get<std::vector<double>>();
    return ControlSchedule::tabulated(std::move(grid), std::move(coeffs),
                                      std::move(controls), std::move(alpha));
  }
  throw InputError("schedule: unknown variant '" + variant + "'");
}

void atomic_write(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("atomic_write: cannot open " + tmp);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw InputError("atomic_write: short write to " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw InputError("atomic_write: rename failed: " + ec.message());
}

}  // namespace qmeas
