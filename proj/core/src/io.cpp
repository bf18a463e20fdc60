#include "fnmiss/io.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

namespace fnmiss::io {
namespace {

using nlohmann::json;

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view trim_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

[[noreturn]] void schema_error(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::Schema, "line " + std::to_string(line) + ": " + what);
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Schema, "cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Schema, "cannot write " + path.string());
  return out;
}

json to_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector vector_from(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_array()) {
    throw Error(ErrorCode::Schema, std::string("estimate file lacks array '") + key + "'");
  }
  const auto v = j[key].get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return {};
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view field, std::size_t line) {
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
    schema_error(line, "'" + std::string(field) + "' is not a number");
  }
  return v;
}

Dataset read_dataset_csv(std::istream& in) {
  std::string raw;
  std::size_t line_no = 1;
  if (!std::getline(in, raw)) schema_error(line_no, "empty file");
  std::string_view line = trim_cr(raw);
  constexpr std::string_view grid_prefix = "# grid:";
  if (line.substr(0, grid_prefix.size()) != grid_prefix) {
    schema_error(line_no, "first line must be '# grid: t1,...,tT'");
  }
  std::string_view grid_text = line.substr(grid_prefix.size());
  while (!grid_text.empty() && grid_text.front() == ' ') grid_text.remove_prefix(1);
  std::vector<double> pts;
  for (auto f : split(grid_text)) pts.push_back(parse_double(f, line_no));
  Grid grid;
  try {
    grid = Grid(Eigen::Map<const Vector>(pts.data(), static_cast<Eigen::Index>(pts.size())));
  } catch (const Error& e) {
    schema_error(line_no, e.what());
  }
  const auto T = grid.size();

  ++line_no;
  if (!std::getline(in, raw)) schema_error(line_no, "missing header row");
  const auto header = split(trim_cr(raw));
  if (header.size() < 2 || header[0] != "id" || header[1] != "z") {
    schema_error(line_no, "header must start with 'id,z'");
  }
  std::size_t p = 0;
  while (2 + p < header.size() && header[2 + p] == "x" + std::to_string(p + 1)) ++p;
  if (header.size() != 2 + p + static_cast<std::size_t>(T)) {
    schema_error(line_no, "expected " + std::to_string(T) + " outcome columns after x1..x" +
                              std::to_string(p));
  }
  for (Eigen::Index j = 0; j < T; ++j) {
    if (header[2 + p + static_cast<std::size_t>(j)] != "y_" + std::to_string(j + 1)) {
      schema_error(line_no, "outcome column " + std::to_string(j + 1) + " must be named y_" +
                                std::to_string(j + 1));
    }
  }
  if (p == 0) schema_error(line_no, "no covariate columns x1..xp");

  std::vector<double> xs, ys;
  std::vector<int> zs;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto row = trim_cr(raw);
    if (row.empty()) continue;
    const auto fields = split(row);
    if (fields.size() != header.size()) {
      schema_error(line_no, "expected " + std::to_string(header.size()) + " fields, found " +
                                std::to_string(fields.size()));
    }
    int z = -1;
    if (fields[1] == "0") z = 0;
    if (fields[1] == "1") z = 1;
    if (z < 0) schema_error(line_no, "z must be 0 or 1, found '" + std::string(fields[1]) + "'");
    zs.push_back(z);
    for (std::size_t k = 0; k < p; ++k) {
      const double x = parse_double(fields[2 + k], line_no);
      if (!std::isfinite(x)) schema_error(line_no, "non-finite covariate x" + std::to_string(k + 1));
      xs.push_back(x);
    }
    for (Eigen::Index j = 0; j < T; ++j) {
      const auto f = fields[2 + p + static_cast<std::size_t>(j)];
      if (f.empty()) {
        if (z == 1) schema_error(line_no, "observed unit has an empty y_" + std::to_string(j + 1));
        ys.push_back(kNotAvailable);
        continue;
      }
      const double y = parse_double(f, line_no);
      if (z == 1 && !std::isfinite(y)) {
        schema_error(line_no, "observed unit has a non-finite y_" + std::to_string(j + 1));
      }
      ys.push_back(y);
    }
  }

  const auto n = static_cast<Eigen::Index>(zs.size());
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Dataset ds;
  ds.X = Eigen::Map<const RowMajor>(xs.data(), n, static_cast<Eigen::Index>(p));
  ds.Y = Eigen::Map<const RowMajor>(ys.data(), n, T);
  ds.Z = Eigen::Map<const Eigen::VectorXi>(zs.data(), n);
  ds.grid = grid;
  return validate_dataset(std::move(ds));
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_dataset_csv(in);
}

void write_dataset_csv(std::ostream& out, const Dataset& ds) {
  out << "# grid: ";
  for (Eigen::Index j = 0; j < ds.T(); ++j) out << (j ? "," : "") << format_double(ds.grid[j]);
  out << "\nid,z";
  for (Eigen::Index k = 0; k < ds.p(); ++k) out << ",x" << k + 1;
  for (Eigen::Index j = 0; j < ds.T(); ++j) out << ",y_" << j + 1;
  out << '\n';
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    out << i + 1 << ',' << ds.Z[i];
    for (Eigen::Index k = 0; k < ds.p(); ++k) out << ',' << format_double(ds.X(i, k));
    for (Eigen::Index j = 0; j < ds.T(); ++j) {
      out << ',';
      if (ds.Z[i] == 1) out << format_double(ds.Y(i, j));
    }
    out << '\n';
  }
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& ds) {
  auto out = open_out(path);
  write_dataset_csv(out, ds);
}

void write_curve_csv(std::ostream& out, const Band& scb, const Band& pcb) {
  out << "t,mu_hat,se,scb_lower,scb_upper,pcb_lower,pcb_upper,u_scb,u_pcb\n";
  for (Eigen::Index j = 0; j < scb.center.size(); ++j) {
    out << format_double(scb.grid[j]) << ',' << format_double(scb.center[j]) << ','
        << format_double(scb.se[j]) << ',' << format_double(scb.lower[j]) << ','
        << format_double(scb.upper[j]) << ',' << format_double(pcb.lower[j]) << ','
        << format_double(pcb.upper[j]) << ',' << format_double(scb.u[j]) << ','
        << format_double(pcb.u[j]) << '\n';
  }
}

void write_curve_csv(const std::filesystem::path& path, const Band& scb, const Band& pcb) {
  auto out = open_out(path);
  write_curve_csv(out, scb, pcb);
}

void write_estimate_json(const std::filesystem::path& path, const MeanEstimate& est) {
  json j;
  j["method"] = std::string(to_string(est.method));
  j["n"] = est.n;
  j["grid"] = to_json(est.grid.points());
  j["mu_hat"] = to_json(est.mu_hat);
  json rows = json::array();
  for (Eigen::Index r = 0; r < est.C_hat.rows(); ++r) rows.push_back(to_json(est.C_hat.row(r).transpose()));
  j["covariance"] = std::move(rows);
  write_text(path, j.dump(1) + "\n");
}

MeanEstimate read_estimate_json(const std::filesystem::path& path) {
  auto in = open_in(path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Schema, path.string() + ": " + e.what());
  }
  try {
    MeanEstimate est;
    const auto method = j.at("method").get<std::string>();
    if (method == "OR") {
      est.method = Method::OR;
    } else if (method == "DR") {
      est.method = Method::DR;
    } else if (method == "CC") {
      est.method = Method::CC;
    } else {
      throw Error(ErrorCode::Schema, "unknown method '" + method + "'");
    }
    est.n = j.at("n").get<Eigen::Index>();
    est.grid = Grid(vector_from(j, "grid"));
    est.mu_hat = vector_from(j, "mu_hat");
    const auto T = est.grid.size();
    if (est.mu_hat.size() != T) throw Error(ErrorCode::Schema, "mu_hat length differs from grid");
    const auto& rows = j.at("covariance");
    if (!rows.is_array() || static_cast<Eigen::Index>(rows.size()) != T) {
      throw Error(ErrorCode::Schema, "covariance must have one row per grid point");
    }
    est.C_hat.resize(T, T);
    for (Eigen::Index r = 0; r < T; ++r) {
      const auto row = rows[static_cast<std::size_t>(r)].get<std::vector<double>>();
      if (static_cast<Eigen::Index>(row.size()) != T) {
        throw Error(ErrorCode::Schema, "covariance row " + std::to_string(r) + " has wrong length");
      }
      for (Eigen::Index c = 0; c < T; ++c) est.C_hat(r, c) = row[static_cast<std::size_t>(c)];
    }
    return est;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Schema, path.string() + ": " + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Schema) throw;
    throw Error(ErrorCode::Schema, path.string() + ": " + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
}

}  // namespace fnmiss::io
