// SPDX-License-Identifier: Apache-2.0
#include "passage/json_io.hpp"

#include <cstdio>
#include <sstream>

namespace passage {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json triplet_to_json(const LevyTriplet& t) {
    json jumps;
    if (t.jumps.empty()) {
        jumps = {{"type", "none"}};
    } else if (!t.jumps.exp_components().empty()) {
        json comps = json::array();
        for (const auto& c : t.jumps.exp_components()) {
            comps.push_back({{"rate", c.rate}, {"scale", c.scale}});
        }
        jumps = {{"type", "exp_mixture"}, {"components", comps}};
    } else {
        json comps = json::array();
        for (const auto& c : t.jumps.atom_components()) {
            comps.push_back({{"rate", c.rate}, {"size", c.size}});
        }
        jumps = {{"type", "atoms"}, {"components", comps}};
    }
    return {{"gamma", t.gamma}, {"sigma2", t.sigma2}, {"jumps", jumps}, {"p", t.p}};
}

LevyTriplet triplet_from_json(const json& j) {
    LevyTriplet t;
    t.gamma = j.at("gamma").get<double>();
    t.sigma2 = j.at("sigma2").get<double>();
    t.p = j.value("p", 0.0);
    if (j.contains("jumps") && !j.at("jumps").is_null()) {
        const json& jm = j.at("jumps");
        const std::string type = jm.value("type", "none");
        if (type == "exp_mixture") {
            std::vector<ExpJumpComponent> comps;
            for (const auto& c : jm.at("components")) {
                comps.push_back({c.at("rate").get<double>(), c.at("scale").get<double>()});
            }
            t.jumps = JumpMeasure::exp_mixture(std::move(comps));
        } else if (type == "atoms") {
            std::vector<AtomJumpComponent> comps;
            for (const auto& c : jm.at("components")) {
                comps.push_back({c.at("rate").get<double>(), c.at("size").get<double>()});
            }
            t.jumps = JumpMeasure::atoms(std::move(comps));
        } else if (type != "none") {
            throw ValidationError("unknown jump measure type: " + type);
        }
    }
    return t;
}

namespace {

json parametric_to_json(const ParametricFn& f) {
    switch (f.kind) {
        case ParametricFn::Kind::Constant: return {{"kind", "constant"}, {"c", f.c0}};
        case ParametricFn::Kind::Affine: return {{"kind", "affine"}, {"c0", f.c0}, {"c1", f.c1}};
        case ParametricFn::Kind::Power:
            return {{"kind", "power"}, {"coef", f.c0}, {"exponent", f.c1}};
    }
    return {};
}

ParametricFn parametric_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "constant") return ParametricFn::constant(j.at("c").get<double>());
    if (kind == "affine") {
        return ParametricFn::affine(j.at("c0").get<double>(), j.at("c1").get<double>());
    }
    if (kind == "power") {
        return ParametricFn::power(j.at("coef").get<double>(), j.at("exponent").get<double>());
    }
    throw ValidationError("unknown parametric function kind: " + kind);
}

double interval_bound(const json& j, const char* name, double fallback) {
    if (!j.contains(name) || j.at(name).is_null()) return fallback;
    if (j.at(name).is_string()) {
        const std::string s = j.at(name).get<std::string>();
        if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        throw ValidationError("bad interval bound: " + s);
    }
    return j.at(name).get<double>();
}

}  // namespace

json spec_to_json(const ProcessSpec& spec) {
    return std::visit(
        [](const auto& s) -> json {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, LevySpec>) {
                return {{"family", "levy"}, {"triplet", triplet_to_json(s.triplet)}};
            } else if constexpr (std::is_same_v<T, PssmpSpec>) {
                return {{"family", "pssmp"},
                        {"triplet", triplet_to_json(s.triplet)},
                        {"alpha", s.alpha}};
            } else if constexpr (std::is_same_v<T, CsbpSpec>) {
                return {{"family", "csbp"},
                        {"triplet", triplet_to_json(s.triplet)},
                        {"variant", s.variant == CsbpVariant::Recurrent ? "recurrent" : "extinct"},
                        {"theta", s.theta}};
            } else {
                json dom;
                if (std::isfinite(s.domain.lo)) dom["lo"] = s.domain.lo;
                else dom["lo"] = "-inf";
                if (std::isfinite(s.domain.hi)) dom["hi"] = s.domain.hi;
                else dom["hi"] = "inf";
                return {{"family", "killed_drift"},
                        {"v", parametric_to_json(s.speed)},
                        {"omega", parametric_to_json(s.kill_rate)},
                        {"theta", s.theta},
                        {"domain", dom}};
            }
        },
        spec);
}

ProcessSpec spec_from_json(const json& j) {
    const std::string family = j.at("family").get<std::string>();
    if (family == "levy") {
        return LevySpec{triplet_from_json(j.at("triplet"))};
    }
    if (family == "pssmp") {
        return PssmpSpec{triplet_from_json(j.at("triplet")), j.at("alpha").get<double>()};
    }
    if (family == "csbp") {
        const std::string variant = j.at("variant").get<std::string>();
        if (variant != "recurrent" && variant != "extinct") {
            throw ValidationError("csbp variant must be 'recurrent' or 'extinct'");
        }
        CsbpSpec s{triplet_from_json(j.at("triplet")),
                   variant == "recurrent" ? CsbpVariant::Recurrent : CsbpVariant::Extinct,
                   j.value("theta", 0.0)};
        if (!j.contains("theta")) {
            s.theta = psi_inverse(s.triplet, s.triplet.p).z + 1.0;
        }
        return s;
    }
    if (family == "killed_drift") {
        KilledDriftSpec s;
        s.speed = parametric_from_json(j.at("v"));
        s.kill_rate = parametric_from_json(j.at("omega"));
        s.theta = j.at("theta").get<double>();
        if (j.contains("domain")) {
            s.domain.lo = interval_bound(j.at("domain"), "lo",
                                         -std::numeric_limits<double>::infinity());
            s.domain.hi =
                interval_bound(j.at("domain"), "hi", std::numeric_limits<double>::infinity());
        }
        return s;
    }
    throw ValidationError("unknown process family: " + family);
}

json mc_report_to_json(const MCReport& r) {
    return {{"type", "mc_report"},
            {"estimate", r.estimate},
            {"std_error", r.std_error},
            {"closed_form", r.closed_form},
            {"z_score", r.z_score},
            {"n", r.n},
            {"seed", r.seed},
            {"bias_allowance", r.bias_allowance},
            {"within_band", r.within_band}};
}

json martingale_report_to_json(const MartingaleReport& r) {
    return {{"type", "martingale_report"},
            {"grid", r.grid},
            {"means", r.means},
            {"std_errors", r.std_errors},
            {"reference", r.reference},
            {"constancy_statistic", r.constancy_statistic},
            {"n", r.n},
            {"seed", r.seed}};
}

json multiplicativity_report_to_json(const MultiplicativityReport& r) {
    return {{"type", "multiplicativity_report"},
            {"direct", r.direct},
            {"product", r.product},
            {"std_error", r.std_error},
            {"z_score", r.z_score},
            {"n", r.n},
            {"seed", r.seed}};
}

json fit_result_to_json(const FitResult& r) {
    json params = json::object();
    for (const auto& [k, v] : r.params) params[k] = v;
    json out = {{"type", "fit_result"},
                {"residual", r.residual},
                {"converged", r.converged},
                {"evaluations", r.evaluations},
                {"params", params},
                {"notes", r.notes}};
    if (r.fitted) out["fitted_spec"] = spec_to_json(*r.fitted);
    return out;
}

TransformGrid transform_grid_from_csv(const std::string& text, double q_min) {
    TransformGrid grid;
    grid.q_min = q_min;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (line.rfind("x,", 0) == 0) continue;  // header row
        TransformRow row;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &row.x, &row.l, &row.q, &row.value) !=
            4) {
            throw ValidationError("transform grid csv: bad row: " + line);
        }
        grid.rows.push_back(row);
    }
    return grid;
}

std::string transform_grid_to_csv(const TransformGrid& grid) {
    std::string out = "x,l,q,value\n";
    for (const auto& r : grid.rows) {
        out += format_double(r.x) + "," + format_double(r.l) + "," + format_double(r.q) + "," +
               format_double(r.value) + "\n";
    }
    return out;
}

}  // namespace passage
