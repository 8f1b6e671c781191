#include <string>

#include <json.hpp>

#include "exqr/errors.hpp"
#include "exqr/extremal_model.hpp"

namespace exqr {

namespace {

using json = nlohmann::ordered_json;

json fit_to_json(const LinearQuantileFit& fit) {
    json beta = json::array();
    for (Eigen::Index i = 0; i < fit.beta.size(); ++i) beta.push_back(fit.beta(i));
    return json{{"tau", fit.tau.value()}, {"alpha", fit.alpha}, {"beta", beta}, {"objective", fit.objective}};
}

const json& field(const json& obj, const std::string& name, const std::string& path) {
    if (!obj.is_object() || !obj.contains(name)) {
        throw ParseError("model file is missing field \"" + path + "\"", path);
    }
    return obj.at(name);
}

double real_field(const json& obj, const std::string& name, const std::string& path) {
    const json& v = field(obj, name, path);
    if (!v.is_number()) throw ParseError("model field \"" + path + "\" must be a number", path);
    return v.get<double>();
}

std::size_t count_field(const json& obj, const std::string& name, const std::string& path) {
    const json& v = field(obj, name, path);
    if (!v.is_number_unsigned()) throw ParseError("model field \"" + path + "\" must be a non-negative integer", path);
    return v.get<std::size_t>();
}

const json& array_field(const json& obj, const std::string& name, const std::string& path) {
    const json& v = field(obj, name, path);
    if (!v.is_array()) throw ParseError("model field \"" + path + "\" must be an array", path);
    return v;
}

QuantileLevel level_value(const json& v, const std::string& path) {
    if (!v.is_number()) throw ParseError("model field \"" + path + "\" must be a number", path);
    try {
        return QuantileLevel(v.get<double>());
    } catch (const InvalidInputError& e) {
        throw ParseError("model field \"" + path + "\": " + e.what(), path);
    }
}

LinearQuantileFit fit_from_json(const json& obj, const std::string& path, std::size_t p) {
    const QuantileLevel tau = level_value(field(obj, "tau", path + ".tau"), path + ".tau");
    const double alpha = real_field(obj, "alpha", path + ".alpha");
    const json& beta_json = array_field(obj, "beta", path + ".beta");
    if (beta_json.size() != p) throw ParseError("model field \"" + path + ".beta\" must have length p", path + ".beta");
    Eigen::VectorXd beta(static_cast<Eigen::Index>(p));
    for (std::size_t i = 0; i < p; ++i) {
        const std::string item = path + ".beta[" + std::to_string(i) + "]";
        if (!beta_json[i].is_number()) throw ParseError("model field \"" + item + "\" must be a number", item);
        beta(static_cast<Eigen::Index>(i)) = beta_json[i].get<double>();
    }
    // objective is informational; older writers may omit it.
    const double objective = obj.contains("objective") ? real_field(obj, "objective", path + ".objective") : 0.0;
    return LinearQuantileFit{tau, alpha, std::move(beta), objective};
}

std::vector<LinearQuantileFit> fits_from_json(const json& arr, const std::string& name, std::size_t p) {
    std::vector<LinearQuantileFit> fits;
    for (std::size_t j = 0; j < arr.size(); ++j) fits.push_back(fit_from_json(arr[j], name + "[" + std::to_string(j) + "]", p));
    return fits;
}

}  // namespace

std::string serialize_model(const ExtremalQRModel& model) {
    json grid = json::array();
    for (const auto& level : model.grid().levels) grid.push_back(level.value());
    json fits = json::array();
    for (const auto& fit : model.fits()) fits.push_back(fit_to_json(fit));
    json targets = json::array();
    for (const auto& level : model.target_levels()) targets.push_back(level.value());
    json conventional = json::array();
    for (const auto& fit : model.conventional_fits()) conventional.push_back(fit_to_json(fit));

    json doc{{"schema_version", model.schema_version()},
             {"n", model.n()},
             {"p", model.p()},
             {"nu", model.config().nu},
             {"k", model.config().k},
             {"tau_base", model.tau_base().value()},
             {"gamma_pool", model.gamma_pool()},
             {"excluded_count", model.excluded_count()},
             {"grid", grid},
             {"fits", fits},
             {"target_levels", targets},
             {"conventional_fits", conventional}};
    return doc.dump(2) + "\n";
}

ExtremalQRModel deserialize_model(std::string_view bytes) {
    json doc;
    try {
        doc = json::parse(bytes.begin(), bytes.end());
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("model file is not valid JSON: ") + e.what(), "");
    }
    if (!doc.is_object()) throw ParseError("model file must hold a JSON object", "");

    const json& version = field(doc, "schema_version", "schema_version");
    if (!version.is_number_integer()) throw ParseError("schema_version must be an integer", "schema_version");
    if (version.get<long long>() != ExtremalQRModel::kSchemaVersion) {
        throw VersionError("unsupported model schema_version " + std::to_string(version.get<long long>()) +
                           " (this build reads " + std::to_string(ExtremalQRModel::kSchemaVersion) + ")");
    }

    const std::size_t n = count_field(doc, "n", "n");
    const std::size_t p = count_field(doc, "p", "p");
    const double nu = real_field(doc, "nu", "nu");
    const std::size_t k = count_field(doc, "k", "k");
    const QuantileLevel tau_base = level_value(field(doc, "tau_base", "tau_base"), "tau_base");
    const double gamma_pool = real_field(doc, "gamma_pool", "gamma_pool");
    const std::size_t excluded = count_field(doc, "excluded_count", "excluded_count");
    const json& grid_json = array_field(doc, "grid", "grid");
    const json& fits_json = array_field(doc, "fits", "fits");
    const json& targets_json = array_field(doc, "target_levels", "target_levels");
    const json& conventional_json = array_field(doc, "conventional_fits", "conventional_fits");
    if (p == 0) throw ParseError("model field \"p\" must be positive", "p");

    TailConfig cfg{k, nu, n};
    LevelGrid grid;
    try {
        grid = intermediate_levels(n, cfg);
    } catch (const Error& e) {
        throw ParseError(std::string("model tail configuration is invalid: ") + e.what(), "k");
    }
    if (grid_json.size() != grid.size()) throw ParseError("model field \"grid\" has the wrong length", "grid");
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const std::string path = "grid[" + std::to_string(j) + "]";
        if (level_value(grid_json[j], path) != grid.levels[j]) {
            throw ParseError("model field \"" + path + "\" does not match n, k and nu", path);
        }
    }
    if (tau_base != grid.base()) throw ParseError("model field \"tau_base\" does not match the grid", "tau_base");

    std::vector<QuantileLevel> targets;
    for (std::size_t j = 0; j < targets_json.size(); ++j) {
        targets.push_back(level_value(targets_json[j], "target_levels[" + std::to_string(j) + "]"));
    }

    auto fits = fits_from_json(fits_json, "fits", p);
    auto conventional = fits_from_json(conventional_json, "conventional_fits", p);
    try {
        return ExtremalQRModel(cfg, std::move(grid), std::move(fits), gamma_pool, excluded, std::move(targets),
                               std::move(conventional));
    } catch (const InvalidInputError& e) {
        throw ParseError(std::string("model file is inconsistent: ") + e.what(), "");
    }
}

}  // namespace exqr
