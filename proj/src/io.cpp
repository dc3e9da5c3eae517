#include "qkrf/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "qkrf/error.hpp"

namespace qkrf {
namespace {

const Json& field(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key))
    throw ConfigError(where + ": missing field '" + key + "'");
  return j.at(key);
}

double number(const Json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + ": expected a number");
  return j.get<double>();
}

int integer(const Json& j, const std::string& where) {
  if (!j.is_number_integer()) throw ConfigError(where + ": expected an integer");
  return j.get<int>();
}

std::vector<double> number_array(const Json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(number(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

cdouble complex_from_json(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2) throw ConfigError(where + ": expected an [re, im] pair");
  return {number(j[0], where + "[0]"), number(j[1], where + "[1]")};
}

Json real_vector_to_json(const RVector& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(x);
  return a;
}

RVector real_vector_from_json(const Json& j, const std::string& where) {
  const std::vector<double> v = number_array(j, where);
  return Eigen::Map<const RVector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

const char* measure_name(ProjectionMeasure m) {
  return m == ProjectionMeasure::Canonical ? "canonical" : "unnormalized";
}

ProjectionMeasure measure_from_name(const std::string& s) {
  if (s == "canonical") return ProjectionMeasure::Canonical;
  if (s == "unnormalized") return ProjectionMeasure::Unnormalized;
  throw ConfigError("states.json: unknown projection measure '" + s + "'");
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ConfigError("not a number: '" + s + "'");
  }
  if (used != s.size()) throw ConfigError("not a number: '" + s + "'");
  return v;
}

Json complex_matrix_to_json(const CMatrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back({m(i, j).real(), m(i, j).imag()});
    rows.push_back(std::move(row));
  }
  return rows;
}

CMatrix complex_matrix_from_json(const Json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw ConfigError(where + ": expected a non-empty array of rows");
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  if (cols == 0) throw ConfigError(where + "[0]: expected a non-empty row");
  CMatrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string row = where + "[" + std::to_string(i) + "]";
    if (!j[i].is_array() || j[i].size() != cols) throw ConfigError(row + ": ragged row");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          complex_from_json(j[i][c], row + "[" + std::to_string(c) + "]");
  }
  return m;
}

Json to_json(const HermForm& h) {
  return Json{{"k", h.level()}, {"entries", complex_matrix_to_json(h.entries())}};
}

HermForm herm_form_from_json(const Json& j) {
  const int k = integer(field(j, "k", "form"), "form.k");
  CMatrix m = complex_matrix_from_json(field(j, "entries", "form"), "form.entries");
  if (m.rows() != m.cols()) throw DimensionError("form.entries: matrix is not square");
  return HermForm(k, std::move(m));
}

Json to_json(const NAForm& nu) {
  return Json{{"k", nu.level()},
              {"weights", nu.weights()},
              {"basis", complex_matrix_to_json(nu.basis())}};
}

NAForm na_form_from_json(const Json& j) {
  const int k = integer(field(j, "k", "na_form"), "na_form.k");
  std::vector<double> w = number_array(field(j, "weights", "na_form"), "na_form.weights");
  CMatrix b = complex_matrix_from_json(field(j, "basis", "na_form"), "na_form.basis");
  return NAForm(k, std::move(b), std::move(w));
}

ModelPtr discrete_model_from_json(const Json& j) {
  const int m = integer(field(j, "points", "model"), "model.points");
  const std::vector<double> w = number_array(field(j, "weights", "model"), "model.weights");
  const Json& levels = field(j, "levels", "model");
  if (!levels.is_object() || levels.empty())
    throw ConfigError("model.levels: expected an object keyed by level");
  std::vector<CMatrix> values(levels.size());
  for (const auto& [key, rows] : levels.items()) {
    int k = 0;
    try {
      std::size_t used = 0;
      k = std::stoi(key, &used);
      if (used != key.size()) k = 0;
    } catch (const std::exception&) {
      k = 0;
    }
    if (k < 1 || k > static_cast<int>(levels.size()))
      throw ConfigError("model.levels: keys must be the levels 1.." + std::to_string(levels.size()) +
                        ", got '" + key + "'");
    values[static_cast<std::size_t>(k - 1)] = complex_matrix_from_json(rows, "model.levels." + key);
  }
  RVector weights = Eigen::Map<const RVector>(w.data(), static_cast<Eigen::Index>(w.size()));
  return build_discrete_model(m, std::move(values), std::move(weights));
}

ModelPtr load_discrete_model(const std::filesystem::path& path) {
  return discrete_model_from_json(read_json(path));
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

void write_json(const std::filesystem::path& path, const Json& j) {
  write_text(path, j.dump(2) + "\n");
}

std::string csv_table(const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream os;
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << "\n";
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
    os << "\n";
  }
  return os.str();
}

std::string series_csv(const FlowTrace& trace) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const EnergyReport& r = trace.series[i];
    rows.push_back({format_double(trace.times[i]), std::to_string(trace.level), format_double(r.E),
                    format_double(r.L), format_double(r.S), format_double(r.E_k),
                    format_double(r.D_k), format_double(r.S_k)});
  }
  return csv_table({"t", "k", "E", "L", "S", "E_k", "D_k", "S_k"}, rows);
}

std::vector<EnergyReport> series_from_csv(const std::string& text, std::vector<double>* times) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "t,k,E,L,S,E_k,D_k,S_k")
    throw ConfigError("series.csv: unexpected header");
  std::vector<EnergyReport> out;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    if (cells.size() != 8)
      throw ConfigError("series.csv: row " + std::to_string(row) + " has " +
                        std::to_string(cells.size()) + " columns");
    if (times) times->push_back(parse_double(cells[0]));
    EnergyReport r;
    r.E = parse_double(cells[2]);
    r.L = parse_double(cells[3]);
    r.S = parse_double(cells[4]);
    r.E_k = parse_double(cells[5]);
    r.D_k = parse_double(cells[6]);
    r.S_k = parse_double(cells[7]);
    out.push_back(r);
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& dir, const FlowTrace& trace) {
  Json j{{"kind", to_string(trace.kind)},
         {"level", trace.level},
         {"dt", trace.dt},
         {"sample_every", trace.sample_every},
         {"measure", measure_name(trace.measure)},
         {"times", trace.times}};
  Json states = Json::array();
  for (const HermForm& h : trace.forms) states.push_back(to_json(h));
  j["states"] = std::move(states);
  Json profiles = Json::array();
  for (const RVector& p : trace.profiles) profiles.push_back(real_vector_to_json(p));
  j["profiles"] = std::move(profiles);
  Json norms = Json::array();
  for (const RVector& b : trace.norms) norms.push_back(real_vector_to_json(b));
  j["norms"] = std::move(norms);
  j["reference"] = trace.reference ? to_json(*trace.reference) : Json(nullptr);
  write_json(dir / "states.json", j);
  write_text(dir / "series.csv", series_csv(trace));
}

FlowTrace load_checkpoint(const std::filesystem::path& dir) {
  const Json j = read_json(dir / "states.json");
  FlowTrace tr;
  tr.kind = flow_kind_from_string(field(j, "kind", "states.json").get<std::string>());
  tr.level = integer(field(j, "level", "states.json"), "states.json.level");
  tr.dt = number(field(j, "dt", "states.json"), "states.json.dt");
  tr.sample_every = integer(field(j, "sample_every", "states.json"), "states.json.sample_every");
  tr.measure = measure_from_name(field(j, "measure", "states.json").get<std::string>());
  tr.times = number_array(field(j, "times", "states.json"), "states.json.times");
  for (const Json& s : field(j, "states", "states.json")) tr.forms.push_back(herm_form_from_json(s));
  const Json& profiles = field(j, "profiles", "states.json");
  for (std::size_t i = 0; i < profiles.size(); ++i)
    tr.profiles.push_back(real_vector_from_json(profiles[i], "states.json.profiles"));
  const Json& norms = field(j, "norms", "states.json");
  for (std::size_t i = 0; i < norms.size(); ++i)
    tr.norms.push_back(real_vector_from_json(norms[i], "states.json.norms"));
  if (!j.at("reference").is_null()) tr.reference = herm_form_from_json(j.at("reference"));

  std::ifstream in(dir / "series.csv", std::ios::binary);
  if (!in) throw ConfigError("cannot open " + (dir / "series.csv").string());
  std::stringstream buf;
  buf << in.rdbuf();
  std::vector<double> csv_times;
  tr.series = series_from_csv(buf.str(), &csv_times);

  const std::size_t n = tr.times.size();
  const std::size_t states = tr.kind == FlowKind::Classical ? tr.profiles.size() : tr.forms.size();
  if (states != n || tr.series.size() != n || csv_times.size() != n)
    throw ConfigError("checkpoint " + dir.string() + ": states, times and series disagree in length");
  if (tr.kind != FlowKind::Classical && tr.norms.size() != n)
    throw ConfigError("checkpoint " + dir.string() + ": spectra and times disagree in length");
  for (std::size_t i = 0; i < n; ++i)
    if (std::abs(csv_times[i] - tr.times[i]) > 1e-12 * std::max(1.0, std::abs(tr.times[i])))
      throw ConfigError("checkpoint " + dir.string() + ": series times differ from states times");
  return tr;
}

}  // namespace qkrf
