#include "quadro/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "quadro/errors.hpp"

namespace quadro {
namespace {

using nlohmann::json;

json vector_to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Vector vector_from_json(const json& a, const char* what) {
  if (!a.is_array()) throw ParseError(std::string(what) + " must be an array");
  Vector v(static_cast<Eigen::Index>(a.size()));
  Eigen::Index i = 0;
  for (const auto& e : a) {
    if (!e.is_number()) {
      throw ParseError(std::string(what) + " entries must be numbers");
    }
    v(i++) = e.get<double>();
  }
  return v;
}

Matrix matrix_from_json(const json& a, const char* what) {
  if (!a.is_array() || a.empty()) {
    throw ParseError(std::string(what) + " must be a non-empty array of rows");
  }
  const auto rows = static_cast<Eigen::Index>(a.size());
  Eigen::Index cols = -1;
  Matrix m;
  Eigen::Index i = 0;
  for (const auto& row : a) {
    const Vector r = vector_from_json(row, what);
    if (cols < 0) {
      cols = r.size();
      m.resize(rows, cols);
    } else if (r.size() != cols) {
      throw ParseError(std::string(what) + " rows have unequal lengths");
    }
    m.row(i++) = r.transpose();
  }
  return m;
}

const json& require_field(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) {
    throw ParseError(std::string("missing field \"") + key + "\"");
  }
  return *it;
}

ClassModel class_from_json(const json& j, const char* what) {
  if (!j.is_object()) {
    throw ParseError(std::string(what) + " must be an object");
  }
  const Vector mu = vector_from_json(require_field(j, "mu"), "mu");
  const Matrix sigma = matrix_from_json(require_field(j, "sigma"), "sigma");
  const json& kap = require_field(j, "kappa");
  if (!kap.is_number()) throw ParseError("kappa must be a number");
  return make_class_model(mu, sigma, kap.get<double>());
}

std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Splits file content into lines, tolerating a trailing newline and CRLF.
std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = end + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  for (;;) {
    const std::size_t end = line.find(',', pos);
    if (end == std::string_view::npos) {
      fields.push_back(line.substr(pos));
      break;
    }
    fields.push_back(line.substr(pos, end - pos));
    pos = end + 1;
  }
  return fields;
}

[[noreturn]] void parse_fail(const std::string& path, std::size_t line,
                             const std::string& message) {
  throw ParseError(path + ":" + std::to_string(line) + ": " + message);
}

double parse_double_field(std::string_view field, const std::string& path,
                          std::size_t line) {
  double value = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  const auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc{} || res.ptr != end || field.empty()) {
    parse_fail(path, line, "cannot parse number \"" + std::string(field) + "\"");
  }
  if (!std::isfinite(value)) {
    parse_fail(path, line, "non-finite value \"" + std::string(field) + "\"");
  }
  return value;
}

int parse_label_field(std::string_view field, const std::string& path,
                      std::size_t line) {
  int value = 0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  const auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc{} || res.ptr != end || field.empty()) {
    parse_fail(path, line, "cannot parse label \"" + std::string(field) + "\"");
  }
  if (value != 0 && value != 1) {
    parse_fail(path, line, "label must be 0 or 1, got " + std::string(field));
  }
  return value;
}

}  // namespace

json model_to_json(const TwoClassModel& model) {
  json j;
  j["d"] = static_cast<int>(model.dim());
  j["pi"] = model.pi;
  for (const auto& [name, cls] :
       {std::pair<const char*, const ClassModel*>{"class0", &model.class0},
        std::pair<const char*, const ClassModel*>{"class1", &model.class1}}) {
    json c;
    c["mu"] = vector_to_json(cls->mu);
    c["sigma"] = matrix_to_json(cls->sigma);
    c["kappa"] = cls->kappa;
    j[name] = std::move(c);
  }
  return j;
}

TwoClassModel model_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("model JSON must be an object");
  const json& pi = require_field(j, "pi");
  if (!pi.is_number()) throw ParseError("pi must be a number");
  const ClassModel c0 = class_from_json(require_field(j, "class0"), "class0");
  const ClassModel c1 = class_from_json(require_field(j, "class1"), "class1");
  const json& d = require_field(j, "d");
  if (!d.is_number_integer()) throw ParseError("d must be an integer");
  if (d.get<Eigen::Index>() != c0.dim()) {
    throw ParseError("field d disagrees with the class dimensions");
  }
  return make_two_class_model(pi.get<double>(), c0, c1);
}

json projection_to_json(const QuadraticProjection& q) {
  json j;
  j["omega"] = matrix_to_json(q.omega);
  j["delta"] = vector_to_json(q.delta);
  return j;
}

QuadraticProjection projection_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("projection JSON must be an object");
  const Matrix omega = matrix_from_json(require_field(j, "omega"), "omega");
  const Vector delta = vector_from_json(require_field(j, "delta"), "delta");
  return make_projection(omega, delta);
}

std::string load_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed on " + path);
  return ss.str();
}

void save_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << text;
  out.flush();
  if (!out.good()) throw IoError("write failed on " + path);
}

json load_json_file(const std::string& path) {
  const std::string text = load_text(path);
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ParseError(path + ": invalid JSON");
  return j;
}

void save_json(const std::string& path, const json& j) {
  save_text(path, j.dump(2) + "\n");
}

void write_matrix_csv(const std::string& path, const Matrix& x) {
  std::string out;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (j) out += ',';
    out += "x" + std::to_string(j + 1);
  }
  out += '\n';
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (j) out += ',';
      out += format_double(x(i, j));
    }
    out += '\n';
  }
  save_text(path, out);
}

Matrix read_matrix_csv(const std::string& path) {
  const std::string text = load_text(path);
  const auto lines = split_lines(text);
  if (lines.empty()) throw ParseError(path + ":1: empty file, expected header");

  const auto header = split_fields(lines[0]);
  const auto d = static_cast<Eigen::Index>(header.size());
  for (Eigen::Index j = 0; j < d; ++j) {
    const std::string expect = "x" + std::to_string(j + 1);
    if (header[static_cast<std::size_t>(j)] != expect) {
      parse_fail(path, 1, "expected header column \"" + expect + "\", got \"" +
                              std::string(header[static_cast<std::size_t>(j)]) +
                              "\"");
    }
  }

  const auto nrows = static_cast<Eigen::Index>(lines.size()) - 1;
  Matrix x(nrows, d);
  for (Eigen::Index i = 0; i < nrows; ++i) {
    const std::size_t lineno = static_cast<std::size_t>(i) + 2;
    const auto fields = split_fields(lines[static_cast<std::size_t>(i) + 1]);
    if (static_cast<Eigen::Index>(fields.size()) != d) {
      parse_fail(path, lineno,
                 "expected " + std::to_string(d) + " fields, got " +
                     std::to_string(fields.size()));
    }
    for (Eigen::Index j = 0; j < d; ++j) {
      x(i, j) = parse_double_field(fields[static_cast<std::size_t>(j)], path,
                                   lineno);
    }
  }
  return x;
}

void write_labels_csv(const std::string& path, const IntVector& y) {
  std::string out = "y\n";
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    out += std::to_string(y(i));
    out += '\n';
  }
  save_text(path, out);
}

IntVector read_labels_csv(const std::string& path) {
  const std::string text = load_text(path);
  const auto lines = split_lines(text);
  if (lines.empty()) throw ParseError(path + ":1: empty file, expected header");
  if (lines[0] != "y") {
    parse_fail(path, 1, "expected header \"y\", got \"" +
                            std::string(lines[0]) + "\"");
  }
  IntVector y(static_cast<Eigen::Index>(lines.size()) - 1);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    y(static_cast<Eigen::Index>(i) - 1) =
        parse_label_field(lines[i], path, i + 1);
  }
  return y;
}

}  // namespace quadro
