// SPDX-License-Identifier: Apache-2.0
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "passage/json_io.hpp"
#include "passage/version.hpp"

namespace py = pybind11;
using namespace passage;

namespace {

ProcessSpec spec_from_str(const std::string& spec_json) {
    return spec_from_json(json::parse(spec_json));
}

LevyTriplet triplet_from_str(const std::string& triplet_json) {
    return triplet_from_json(json::parse(triplet_json));
}

py::dict mc_report_dict(const MCReport& r) {
    py::dict d;
    d["estimate"] = r.estimate;
    d["std_error"] = r.std_error;
    d["closed_form"] = r.closed_form;
    d["z_score"] = r.z_score;
    d["n"] = r.n;
    d["seed"] = r.seed;
    d["bias_allowance"] = r.bias_allowance;
    d["within_band"] = r.within_band;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "First-passage scale functions of spectrally positive Markov processes";
    m.attr("__version__") = kVersion;

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);

    m.def(
        "eval_psi",
        [](const std::string& triplet, double z) { return eval_psi(triplet_from_str(triplet), z); },
        py::arg("triplet"), py::arg("z"),
        "Laplace exponent psi(z) of the triplet given as a JSON string.");
    m.def(
        "eval_psi_prime",
        [](const std::string& triplet, double z) {
            return eval_psi_prime(triplet_from_str(triplet), z);
        },
        py::arg("triplet"), py::arg("z"));
    m.def(
        "psi_inverse",
        [](const std::string& triplet, double q) {
            const PsiInverseResult r = psi_inverse(triplet_from_str(triplet), q);
            py::dict d;
            d["z"] = r.z;
            d["residual"] = r.residual;
            d["iterations"] = r.iterations;
            return d;
        },
        py::arg("triplet"), py::arg("q"),
        "Largest z >= 0 with psi(z) = q (right-continuous inverse).");
    m.def(
        "validate_triplet",
        [](const std::string& triplet) {
            const TripletDiagnostics d = validate_triplet(triplet_from_str(triplet));
            py::dict out;
            out["pass"] = d.pass;
            out["reasons"] = d.reasons;
            return out;
        },
        py::arg("triplet"));

    m.def(
        "first_passage_transform",
        [](const std::string& spec, double q, double x, double l) {
            return first_passage_transform(spec_from_str(spec), q, x, l);
        },
        py::arg("spec"), py::arg("q"), py::arg("x"), py::arg("l"),
        "E_x[e^{-q T_l}; T_l < zeta] for the process spec given as JSON.");
    m.def(
        "pssmp_coefficients",
        [](const std::string& spec, int K) {
            const ProcessSpec s = spec_from_str(spec);
            const auto* p = std::get_if<PssmpSpec>(&s);
            if (!p) throw ValidationError("pssmp_coefficients: spec family must be pssmp");
            return pssmp_coefficients(*p, K).coeffs;
        },
        py::arg("spec"), py::arg("K"));

    m.def(
        "sample_first_passage",
        [](const std::string& spec, double x, double l, std::uint64_t seed,
           std::uint64_t stream_id, double delta) {
            Rng rng(RngStream{seed, stream_id});
            SimOptions opts;
            opts.delta = delta;
            const FirstPassageSample s =
                sample_first_passage(spec_from_str(spec), x, l, rng, opts);
            py::dict d;
            d["crossed"] = s.crossed;
            d["time"] = s.time;
            d["level_at_crossing"] = s.level_at_crossing;
            return d;
        },
        py::arg("spec"), py::arg("x"), py::arg("l"), py::arg("seed"), py::arg("stream_id") = 0,
        py::arg("delta") = 1e-3);
    m.def(
        "compare_mc_closed",
        [](const std::string& spec, double q, double x, double l, std::uint64_t n,
           std::uint64_t seed, double delta, int threads) {
            SimOptions opts;
            opts.delta = delta;
            return mc_report_dict(
                compare_mc_closed(spec_from_str(spec), q, x, l, n, seed, opts, threads));
        },
        py::arg("spec"), py::arg("q"), py::arg("x"), py::arg("l"), py::arg("n"), py::arg("seed"),
        py::arg("delta") = 1e-3, py::arg("threads") = 1,
        "Monte Carlo estimate of the transform against the closed form.");

    m.def(
        "fit_phi_grid",
        [](const std::vector<double>& x, const std::vector<double>& l,
           const std::vector<double>& q, const std::vector<double>& value, double q_min) {
            if (x.size() != l.size() || x.size() != q.size() || x.size() != value.size()) {
                throw ValidationError("fit_phi_grid: column lengths differ");
            }
            TransformGrid grid;
            grid.q_min = q_min;
            for (std::size_t i = 0; i < x.size(); ++i) {
                grid.rows.push_back({x[i], l[i], q[i], value[i]});
            }
            const PhiFit fit = fit_phi_grid(grid);
            py::dict d;
            std::vector<double> qs, phis;
            for (const auto& [qq, ph] : fit.grid.points) {
                qs.push_back(qq);
                phis.push_back(ph);
            }
            d["q"] = qs;
            d["phi"] = phis;
            d["r_squared"] = fit.diagnostics.r_squared;
            d["low_confidence"] = fit.diagnostics.low_confidence;
            return d;
        },
        py::arg("x"), py::arg("l"), py::arg("q"), py::arg("value"), py::arg("q_min") = -1.0);
    m.def(
        "extract_sigma2_lattice",
        [](const std::vector<std::pair<int, double>>& values, double alpha) {
            return extract_sigma2_lattice(values, alpha);
        },
        py::arg("psi_values"), py::arg("alpha"));
}
