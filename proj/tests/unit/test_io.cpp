#include <fnmiss/estimators.hpp>
#include <fnmiss/io.hpp>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "helpers.hpp"

using namespace fnmiss;
using namespace fnmiss::testing;

namespace {

std::string message_of(const std::string& csv) {
  std::istringstream in(csv);
  try {
    io::read_dataset_csv(in);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Schema);
    return e.what();
  }
  FAIL("expected a schema error");
  return {};
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("fnmiss_io_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("float text form") {
  CHECK(io::format_double(0.1) == "0.10000000000000001");
  CHECK(io::format_double(2.0) == "2");
  CHECK(io::format_double(-1.5e-300) == "-1.5000000000000001e-300");
  CHECK(io::format_double(std::nan("")).empty());
  for (double v : {0.1, 1.0 / 3.0, -2.718281828459045, 6.02e23, 5e-324}) {
    CHECK(io::parse_double(io::format_double(v), 1) == v);
  }
  CHECK(io::parse_double("+3.5", 1) == 3.5);
  CHECK(error_code_of([] { io::parse_double("1,5", 9); }) == ErrorCode::Schema);
  CHECK(error_code_of([] { io::parse_double("", 9); }) == ErrorCode::Schema);
  CHECK(error_code_of([] { io::parse_double("2x", 9); }) == ErrorCode::Schema);
}

TEST_CASE("dataset CSV round trip") {
  const Dataset ds = random_dataset(40, 3, 7, 5);
  std::ostringstream out;
  io::write_dataset_csv(out, ds);
  std::istringstream in(out.str());
  const Dataset back = io::read_dataset_csv(in);
  CHECK(back.X == ds.X);
  CHECK(back.Z == ds.Z);
  CHECK(back.grid.points() == ds.grid.points());
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    if (ds.Z[i] == 1) {
      CHECK(back.Y.row(i) == ds.Y.row(i));
    } else {
      CHECK(back.Y.row(i).array().isNaN().all());
    }
  }
  // Estimates from the re-read data agree with the in-memory path.
  const OutcomeModel om = fit_ols(ds), ob = fit_ols(back);
  CHECK(max_abs_diff(estimate_dr(ds, om, fit_logistic(ds)).mu_hat,
                     estimate_dr(back, ob, fit_logistic(back)).mu_hat) <= 1e-12);
  CHECK(out.str().find('\r') == std::string::npos);
}

TEST_CASE("dataset CSV accepts CRLF and blank lines") {
  const std::string csv =
      "# grid: 0,0.5,1\r\nid,z,x1,y_1,y_2,y_3\r\n1,1,1,1,2,3\r\n\r\n2,0,1,,,\r\n3,1,1,2,3,4\r\n";
  std::istringstream in(csv);
  const Dataset ds = io::read_dataset_csv(in);
  CHECK(ds.n() == 3);
  CHECK(ds.p() == 1);
  CHECK(ds.T() == 3);
  CHECK(ds.Y(2, 2) == 4.0);
}

TEST_CASE("dataset CSV schema errors name the line") {
  const std::string head = "# grid: 0,1\nid,z,x1,x2,y_1,y_2\n";
  CHECK(message_of(head + "1,1,1,0,1,2\n2,2,1,1,3,4\n").find("line 4") != std::string::npos);
  CHECK(message_of(head + "1,1,1,0,1,\n").find("line 3") != std::string::npos);
  CHECK(message_of(head + "1,1,1,0,1,abc\n").find("line 3") != std::string::npos);
  CHECK(message_of(head + "1,1,1,0,1\n").find("line 3") != std::string::npos);
  CHECK(message_of(head + "1,1,1,nan,1,2\n").find("line 3") != std::string::npos);
  CHECK(message_of("id,z,x1,y_1\n").find("line 1") != std::string::npos);
  CHECK(message_of("# grid: 0,1\nid,z,x1,y_1\n").find("line 2") != std::string::npos);
  CHECK(message_of("# grid: 0.5,0.2\nid,z,x1,y_1,y_2\n").find("line 1") != std::string::npos);
  CHECK(message_of("# grid: 0,1\nid,z,y_1,y_2\n").find("line 2") != std::string::npos);
  CHECK(message_of("").find("line 1") != std::string::npos);
}

TEST_CASE("validation failures after parsing keep their codes") {
  std::istringstream few("# grid: 0,1\nid,z,x1,x2,y_1,y_2\n1,1,1,0,1,2\n2,0,1,1,,\n3,0,1,2,,\n");
  CHECK(error_code_of([&] { io::read_dataset_csv(few); }) == ErrorCode::TooFewObserved);
}

TEST_CASE("estimate JSON round trip and band recomputation") {
  const Dataset ds = random_dataset(200, 3, 9, 14);
  const MeanEstimate est = estimate_dr(ds, fit_ols(ds), fit_logistic(ds));
  const auto dir = scratch_dir("json");
  io::write_estimate_json(dir / "sub" / "est.json", est);
  const MeanEstimate back = io::read_estimate_json(dir / "sub" / "est.json");
  CHECK(back.method == Method::DR);
  CHECK(back.n == est.n);
  CHECK(back.mu_hat == est.mu_hat);
  CHECK(back.C_hat == est.C_hat);
  CHECK(back.grid.points() == est.grid.points());
  CHECK(build_scb(back, 0.05).u == build_scb(est, 0.05).u);

  io::write_text(dir / "bad.json", "{\"method\": \"XX\"}");
  CHECK(error_code_of([&] { io::read_estimate_json(dir / "bad.json"); }) == ErrorCode::Schema);
  io::write_text(dir / "trunc.json", "{\"method\": ");
  CHECK(error_code_of([&] { io::read_estimate_json(dir / "trunc.json"); }) == ErrorCode::Schema);
  CHECK(error_code_of([&] { io::read_estimate_json(dir / "missing.json"); }) == ErrorCode::Schema);
  std::filesystem::remove_all(dir);
}

TEST_CASE("curve table layout") {
  const Dataset ds = random_dataset(100, 2, 4, 15);
  const MeanEstimate est = estimate_cc(ds);
  std::ostringstream out;
  io::write_curve_csv(out, build_scb(est, 0.05), build_pcb(est, 0.05));
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,mu_hat,se,scb_lower,scb_upper,pcb_lower,pcb_upper,u_scb,u_pcb");
  int count = 0;
  while (std::getline(in, line)) {
    ++count;
    CHECK(std::count(line.begin(), line.end(), ',') == 8);
  }
  CHECK(count == 4);
}

}
