#include "mpo/scenario.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace mpo::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, _] : obj.items())
        if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

const json& require(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
    return obj.at(key);
}

template <class T>
T get_as(const json& v, const std::string& where) {
    try {
        return v.get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + ": wrong value type");
    }
}

template <class T>
T get_or(const json& obj, const char* key, T fallback, const std::string& where) {
    if (!obj.contains(key)) return fallback;
    return get_as<T>(obj.at(key), where + "." + key);
}

Vector get_vector(const json& v, const std::string& where) {
    if (!v.is_array()) throw ConfigError(where + ": expected an array");
    Vector out;
    for (const auto& x : v) out.push_back(get_as<double>(x, where));
    return out;
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return json::parse(ss.str());
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": invalid JSON (byte " + std::to_string(e.byte) + ")");
    }
}

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

engine::Term parse_term(const json& obj, std::size_t index, const std::string& list,
                        std::vector<GroupSpec>* groups) {
    const std::string where = list + "[" + std::to_string(index) + "]";
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    reject_unknown(obj,
                   {"kind", "lambda", "label", "risk_aversion", "risk_free", "alpha", "te_max", "min_weight", "low",
                    "high", "single_cap", "lower", "upper", "groups"},
                   where);
    engine::Term t;
    t.kind = engine::parse_term_kind(get_as<std::string>(require(obj, "kind", where), where + ".kind"));
    t.lambda = get_or(obj, "lambda", 1.0, where);
    t.label = get_or(obj, "label", std::string(engine::to_string(t.kind)), where);
    t.risk_aversion = get_or(obj, "risk_aversion", t.risk_aversion, where);
    t.risk_free = get_or(obj, "risk_free", t.risk_free, where);
    t.alpha = get_or(obj, "alpha", t.alpha, where);
    t.te_max = get_or(obj, "te_max", t.te_max, where);
    t.min_weight = get_or(obj, "min_weight", t.min_weight, where);
    t.low = get_or(obj, "low", t.low, where);
    t.high = get_or(obj, "high", t.high, where);
    t.ucits.single_cap = get_or(obj, "single_cap", t.ucits.single_cap, where);
    t.ucits.lower = get_or(obj, "lower", t.ucits.lower, where);
    t.ucits.upper = get_or(obj, "upper", t.ucits.upper, where);

    if (t.kind == engine::TermKind::GroupMask) {
        const json& arr = require(obj, "groups", where);
        if (!arr.is_array() || arr.empty()) throw ConfigError(where + ".groups: expected a non-empty array");
        for (std::size_t j = 0; j < arr.size(); ++j) {
            const std::string gw = where + ".groups[" + std::to_string(j) + "]";
            reject_unknown(arr[j], {"name", "assets", "max_weight"}, gw);
            GroupSpec g;
            g.name = get_or(arr[j], "name", "mask" + std::to_string(j + 1), gw);
            g.assets = get_as<std::vector<std::string>>(require(arr[j], "assets", gw), gw + ".assets");
            g.max_weight = get_as<double>(require(arr[j], "max_weight", gw), gw + ".max_weight");
            if (!(g.max_weight >= 0.0 && g.max_weight <= 1.0))
                throw ConfigError(gw + ".max_weight must lie in [0, 1]");
            groups->push_back(std::move(g));
        }
    } else if (obj.contains("groups")) {
        throw ConfigError(where + ": 'groups' only applies to group-mask terms");
    }
    return t;
}

}  // namespace

data::SyntheticMarketSpec parse_market_spec(const json& doc) {
    const std::string where = "synthetic";
    if (!doc.is_object()) throw ConfigError(where + ": expected an object");
    reject_unknown(doc,
                   {"assets", "periods", "factors", "seed", "start_date", "names", "means", "loadings",
                    "idiosyncratic", "ranges"},
                   where);
    const auto periods = get_as<std::size_t>(require(doc, "periods", where), where + ".periods");
    const auto seed = get_or<std::uint64_t>(doc, "seed", 0, where);

    data::SyntheticMarketSpec spec;
    if (doc.contains("means")) {
        // Explicit factor model.
        spec.periods = periods;
        spec.seed = seed;
        spec.means = get_vector(doc.at("means"), where + ".means");
        spec.idiosyncratic = get_vector(require(doc, "idiosyncratic", where), where + ".idiosyncratic");
        const json& rows = require(doc, "loadings", where);
        if (!rows.is_array() || rows.size() != spec.means.size())
            throw ConfigError(where + ".loadings: need one row per asset");
        const std::size_t k = rows.empty() ? 0 : get_vector(rows[0], where + ".loadings").size();
        spec.loadings = Matrix(rows.size(), k);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const Vector r = get_vector(rows[i], where + ".loadings");
            if (r.size() != k) throw ConfigError(where + ".loadings: ragged rows");
            for (std::size_t f = 0; f < k; ++f) spec.loadings(i, f) = r[f];
        }
    } else {
        data::MarketRanges ranges;
        if (doc.contains("ranges")) {
            const json& r = doc.at("ranges");
            const std::string rw = where + ".ranges";
            reject_unknown(r, {"mean", "loading", "idiosyncratic"}, rw);
            auto pair = [&](const char* key, double& lo, double& hi) {
                if (!r.contains(key)) return;
                const Vector v = get_vector(r.at(key), rw + "." + key);
                if (v.size() != 2 || !(v[0] <= v[1])) throw ConfigError(rw + "." + key + ": expected [lo, hi]");
                lo = v[0];
                hi = v[1];
            };
            pair("mean", ranges.mean_lo, ranges.mean_hi);
            pair("loading", ranges.loading_lo, ranges.loading_hi);
            pair("idiosyncratic", ranges.idio_lo, ranges.idio_hi);
        }
        spec = data::random_market_spec(get_as<std::size_t>(require(doc, "assets", where), where + ".assets"),
                                        periods, get_or<std::size_t>(doc, "factors", 2, where), seed, ranges);
    }
    spec.start_date = get_or(doc, "start_date", spec.start_date, where);
    if (doc.contains("names")) spec.names = get_as<std::vector<std::string>>(doc.at("names"), where + ".names");
    try {
        spec.validate();
    } catch (const InputError& e) {
        throw ConfigError(where + ": " + e.what());
    }
    return spec;
}

Scenario parse_scenario(const json& doc, const fs::path& base_dir) {
    if (!doc.is_object()) throw ConfigError("scenario: expected a JSON object");
    reject_unknown(doc, {"schema", "name", "data", "projection", "train", "objectives", "constraints", "output_dir"},
                   "scenario");
    Scenario s;
    s.schema = get_as<int>(require(doc, "schema", "scenario"), "scenario.schema");
    if (s.schema != kScenarioSchema)
        throw ConfigError("scenario: unsupported schema " + std::to_string(s.schema) + " (expected " +
                          std::to_string(kScenarioSchema) + ")");
    s.name = get_or(doc, "name", std::string("scenario"), "scenario");

    const json& d = require(doc, "data", "scenario");
    reject_unknown(d, {"path", "mode", "benchmark", "synthetic"}, "data");
    if (d.contains("synthetic")) {
        if (d.contains("path")) throw ConfigError("data: give either 'path' or 'synthetic', not both");
        s.data.synthetic = parse_market_spec(d.at("synthetic"));
    } else {
        s.data.path = resolve(base_dir, get_as<std::string>(require(d, "path", "data"), "data.path"));
        const auto mode_name = get_or(d, "mode", std::string("prices"), "data");
        const auto mode = data::parse_mode(mode_name);
        if (!mode) throw ConfigError("data.mode: unknown mode '" + mode_name + "'");
        s.data.mode = *mode;
        if (d.contains("benchmark")) s.data.benchmark = get_as<std::string>(d.at("benchmark"), "data.benchmark");
    }

    if (doc.contains("projection")) {
        const auto name = get_as<std::string>(doc.at("projection"), "projection");
        const auto kind = projection::parse_kind(name);
        if (!kind) throw ConfigError("projection: unknown kind '" + name + "'");
        s.train.projection = *kind;
    }

    if (doc.contains("train")) {
        const json& t = doc.at("train");
        reject_unknown(t, {"optimizer", "learning_rate", "epochs", "seed", "init_scale", "beta1", "beta2", "epsilon"},
                       "train");
        if (t.contains("optimizer")) {
            const auto name = get_as<std::string>(t.at("optimizer"), "train.optimizer");
            const auto kind = engine::parse_optimizer(name);
            if (!kind) throw ConfigError("train.optimizer: unknown optimizer '" + name + "'");
            s.train.optimizer = *kind;
        }
        s.train.learning_rate = get_or(t, "learning_rate", s.train.learning_rate, "train");
        s.train.epochs = get_or(t, "epochs", s.train.epochs, "train");
        s.train.seed = get_or(t, "seed", s.train.seed, "train");
        s.train.init_scale = get_or(t, "init_scale", s.train.init_scale, "train");
        s.train.beta1 = get_or(t, "beta1", s.train.beta1, "train");
        s.train.beta2 = get_or(t, "beta2", s.train.beta2, "train");
        s.train.epsilon = get_or(t, "epsilon", s.train.epsilon, "train");
    }
    s.train.validate();

    auto read_terms = [&](const char* key, std::vector<engine::Term>& out) {
        if (!doc.contains(key)) return;
        const json& arr = doc.at(key);
        if (!arr.is_array()) throw ConfigError(std::string(key) + ": expected an array");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            std::vector<GroupSpec> groups;
            out.push_back(parse_term(arr[i], i, key, &groups));
            if (!groups.empty()) s.groups.emplace_back(out.back().name(), std::move(groups));
        }
    };
    read_terms("objectives", s.loss.objectives);
    read_terms("constraints", s.loss.constraints);

    // Group masks are bound later; validate the rest now with a placeholder.
    engine::LossSpec probe = s.loss;
    probe.validate();

    s.output_dir = resolve(base_dir, get_or(doc, "output_dir", "out/" + s.name, "scenario"));
    return s;
}

Scenario load_scenario(const fs::path& path) {
    const json doc = read_json_file(path);
    return parse_scenario(doc, path.has_parent_path() ? path.parent_path() : fs::path("."));
}

data::ReturnsPanel load_data(const Scenario& scenario) {
    if (scenario.data.synthetic) return data::synthesize(*scenario.data.synthetic);
    return data::load_panel(scenario.data.path, scenario.data.mode, scenario.data.benchmark);
}

engine::LossSpec resolve_loss(const Scenario& scenario, const data::ReturnsPanel& panel) {
    engine::LossSpec spec = scenario.loss;
    for (const auto& [label, groups] : scenario.groups) {
        engine::Term* t = spec.find(label);
        if (!t) throw ConfigError("group masks reference unknown term '" + label + "'");
        finance::GroupMaskSet set;
        set.membership = Matrix(panel.asset_count(), groups.size());
        for (std::size_t j = 0; j < groups.size(); ++j) {
            for (const auto& name : groups[j].assets) {
                const auto idx = panel.asset_index(name);
                if (!idx) throw ConfigError("group '" + groups[j].name + "': asset '" + name + "' is not in the panel");
                set.membership(*idx, j) = 1.0;
            }
            set.max_weight.push_back(groups[j].max_weight);
            set.names.push_back(groups[j].name);
        }
        t->groups = std::move(set);
    }
    for (const auto* t : spec.terms())
        if (t->kind == engine::TermKind::TrackingError && !panel.benchmark)
            throw ConfigError("term '" + t->name() + "' needs a benchmark column in the data");
    spec.validate();
    return spec;
}

engine::LambdaGrid parse_grid(const nlohmann::ordered_json& doc) {
    if (!doc.is_object() || doc.empty()) throw ConfigError("grid: expected a non-empty object of term -> values");
    engine::LambdaGrid grid;
    for (const auto& [key, values] : doc.items()) {
        if (!values.is_array() || values.empty()) throw ConfigError("grid." + key + ": expected a non-empty array");
        std::vector<double> v;
        for (const auto& x : values) {
            if (!x.is_number()) throw ConfigError("grid." + key + ": values must be numbers");
            const double d = x.get<double>();
            if (!(d >= 0.0)) throw ConfigError("grid." + key + ": multipliers must be nonnegative");
            v.push_back(d);
        }
        grid.emplace_back(key, std::move(v));
    }
    return grid;
}

engine::LambdaGrid load_grid(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_grid(nlohmann::ordered_json::parse(ss.str()));
    } catch (const nlohmann::ordered_json::parse_error& e) {
        throw ConfigError(path.string() + ": invalid JSON (byte " + std::to_string(e.byte) + ")");
    }
}

}  // namespace mpo::cli
