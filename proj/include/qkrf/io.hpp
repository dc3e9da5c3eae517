#pragma once

// JSON and CSV serialization. Complex numbers are [re, im] pairs; floats in
// CSV files are printed with 17 significant digits.

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "qkrf/flow.hpp"
#include "qkrf/herm.hpp"
#include "qkrf/model.hpp"
#include "qkrf/na_norms.hpp"

namespace qkrf {

using Json = nlohmann::json;

/// %.17g; "nan", "inf", "-inf" for non-finite values.
std::string format_double(double x);
double parse_double(const std::string& s);

Json complex_matrix_to_json(const CMatrix& m);
/// `where` names the field in error messages.
CMatrix complex_matrix_from_json(const Json& j, const std::string& where);

Json to_json(const HermForm& h);
HermForm herm_form_from_json(const Json& j);

Json to_json(const NAForm& nu);
NAForm na_form_from_json(const Json& j);

/// {"points": m, "weights": [...], "levels": {"1": [[[re, im], ...], ...], ...}}
/// with row i of level k holding e_i at the m points.
ModelPtr discrete_model_from_json(const Json& j);
ModelPtr load_discrete_model(const std::filesystem::path& path);

Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);
void write_text(const std::filesystem::path& path, const std::string& text);

/// Rows t,k,E,L,S,E_k,D_k,S_k.
std::string series_csv(const FlowTrace& trace);
std::vector<EnergyReport> series_from_csv(const std::string& text, std::vector<double>* times = nullptr);

/// Generic CSV writer: header plus rows of already formatted cells.
std::string csv_table(const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows);

/// `dir/states.json` holds the run parameters, sample times, states and
/// spectra; `dir/series.csv` the energy rows.
void save_checkpoint(const std::filesystem::path& dir, const FlowTrace& trace);
FlowTrace load_checkpoint(const std::filesystem::path& dir);

}  // namespace qkrf
