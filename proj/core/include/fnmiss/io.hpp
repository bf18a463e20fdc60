#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "fnmiss/bands.hpp"

namespace fnmiss::io {

// Locale-independent text form with 17 significant digits; NaN prints as "".
std::string format_double(double v);

// Strict decimal parse of the whole field. Throws Error(Schema) on failure.
double parse_double(std::string_view field, std::size_t line);

// Wide dataset CSV:
//   # grid: t1,...,tT
//   id,z,x1,...,xp,y_1,...,y_T
//   <one row per unit; outcome fields empty when z = 0>
// Schema violations throw Error(Schema) with the offending line number.
Dataset read_dataset_csv(std::istream& in);
Dataset read_dataset_csv(const std::filesystem::path& path);
void write_dataset_csv(std::ostream& out, const Dataset& ds);
void write_dataset_csv(const std::filesystem::path& path, const Dataset& ds);

// Curve table: t,mu_hat,se,scb_lower,scb_upper,pcb_lower,pcb_upper,u_scb,u_pcb
void write_curve_csv(std::ostream& out, const Band& scb, const Band& pcb);
void write_curve_csv(const std::filesystem::path& path, const Band& scb, const Band& pcb);

// Saved estimate (method, n, grid, mu_hat, covariance) as JSON, reloadable
// for band recomputation without re-estimation.
void write_estimate_json(const std::filesystem::path& path, const MeanEstimate& est);
MeanEstimate read_estimate_json(const std::filesystem::path& path);

// Writes text with LF newlines, creating parent directories as needed.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace fnmiss::io
