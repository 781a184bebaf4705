#pragma once

#include <exception>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "jjres/designer.hpp"
#include "jjres/fieldmodel.hpp"
#include "jjres/kerrfit.hpp"
#include "jjres/linfit.hpp"

namespace jjres::report {

using Json = nlohmann::ordered_json;

// Bump on any change to report field names or structure.
inline constexpr const char* kSchemaVersion = "1.0.0";

/// {"value", "uncertainty", "unit"}; non-finite numbers become null.
Json measured(double value, double sigma, const char* unit);
Json quantity(double value, const char* unit);
Json number(double v);
Json numbers(const std::vector<double>& v);
Json matrix(const Eigen::MatrixXd& m);

Json linear_fit(const LinearFitResult& r);
Json kerr_fit(const KerrFitResult& r, BranchRule branch);
Json field_fit(const FieldFitResult& r);
Json design(const ArrayDesignReport& r);

/// {"type", "message", "exit_code"[, "last_iterate", "iterations"]}.
Json error_object(const std::exception& e, int exit_code);
int exit_code_for(const std::exception& e);

/// Hex FNV-1a 64 of a byte string.
std::string fnv1a64(std::string_view bytes);

// Plot-data builders.
Json series(const std::string& label, const std::vector<double>& x, const std::vector<double>& y);
Json figure(const std::string& id, const std::string& x_label, const std::string& x_unit,
            const std::string& y_label, const std::string& y_unit, Json series_list);
Json map_figure(const std::string& id, const std::string& x_label, const std::string& x_unit,
                const std::vector<double>& x, const std::string& y_label, const std::string& y_unit,
                const std::vector<double>& y, const std::string& z_label, const std::string& z_unit,
                const std::vector<std::vector<double>>& z);

}  // namespace jjres::report
