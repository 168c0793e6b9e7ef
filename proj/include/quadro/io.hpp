#pragma once

// On-disk interchange: JSON for models and projections, CSV for datasets.
// CSV numbers are written in shortest round-trip form and parsed strictly;
// parse failures carry the offending path and line number.

#include <string>

#include <json.hpp>

#include "quadro/types.hpp"

namespace quadro {

// {"d": int, "pi": float, "class0": {"mu": [...], "sigma": [[...]],
//  "kappa": float}, "class1": {...}}; sigma is row-major rows-of-arrays.
nlohmann::json model_to_json(const TwoClassModel& model);
TwoClassModel model_from_json(const nlohmann::json& j);

// {"omega": [[...]], "delta": [...]}, omega row-major.
nlohmann::json projection_to_json(const QuadraticProjection& q);
QuadraticProjection projection_from_json(const nlohmann::json& j);

// File helpers. save_json pretty-prints with a trailing newline.
std::string load_text(const std::string& path);
void save_text(const std::string& path, const std::string& text);
nlohmann::json load_json_file(const std::string& path);
void save_json(const std::string& path, const nlohmann::json& j);

// Feature matrix CSV: header x1..xd, one row per observation.
void write_matrix_csv(const std::string& path, const Matrix& x);
Matrix read_matrix_csv(const std::string& path);

// Label CSV: header y, values 0 or 1.
void write_labels_csv(const std::string& path, const IntVector& y);
IntVector read_labels_csv(const std::string& path);

}  // namespace quadro
