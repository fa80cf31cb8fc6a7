#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "bundleflow/commands.hpp"
#include "bundleflow/errors.hpp"
#include "bundleflow/flow_general.hpp"
#include "bundleflow/flow_m2.hpp"
#include "bundleflow/verify.hpp"

namespace py = pybind11;
using namespace bundleflow;

namespace {

BundleParams params_from(std::pair<int, int> n, std::optional<std::pair<double, double>> lambda) {
    if (!lambda) return normalized_params2(n.first, n.second);
    return make_params2(n.first, n.second, lambda->first, lambda->second);
}

py::list complex_list(const Spectrum& s) {
    py::list out;
    for (const auto& z : s.eigenvalues) out.append(py::make_tuple(z.real(), z.imag()));
    return out;
}

py::dict fixed_point_dict(const FixedPointM2& fp) {
    py::dict d;
    d["kind"] = std::string(to_string(fp.kind));
    d["location"] = py::make_tuple(fp.location.y1, fp.location.y2);
    d["classification"] = std::string(to_string(fp.classification));
    d["unstable_dimension"] = fp.unstable_dimension;
    d["eigenvalues"] = complex_list(fp.spectrum);
    return d;
}

std::vector<std::vector<double>> matrix_rows(const SmallMatrix& m) {
    std::vector<std::vector<double>> rows(m.order(), std::vector<double>(m.order()));
    for (int i = 0; i < m.order(); ++i)
        for (int j = 0; j < m.order(); ++j) rows[i][j] = m(i, j);
    return rows;
}

EinsteinSign sign_from(const std::string& s) {
    if (s == "plus") return EinsteinSign::Plus;
    if (s == "minus") return EinsteinSign::Minus;
    throw ConfigError("sign must be 'plus' or 'minus'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Native core of bundleflow";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<IntegratorError>(m, "IntegratorError", PyExc_RuntimeError);

    m.def(
        "einstein_points",
        [](std::pair<int, int> n, std::optional<std::pair<double, double>> lambda) {
            const auto e = einstein_points(params_from(n, lambda));
            py::dict d;
            d["xi"] = fixed_point_dict(e.xi);
            d["eta"] = fixed_point_dict(e.eta);
            return d;
        },
        py::arg("n"), py::arg("lambda_") = py::none());

    m.def(
        "fixed_points",
        [](std::pair<int, int> n, std::optional<std::pair<double, double>> lambda) {
            py::list out;
            for (const auto& fp : fixed_points(params_from(n, lambda))) out.append(fixed_point_dict(fp));
            return out;
        },
        py::arg("n"), py::arg("lambda_") = py::none());

    m.def(
        "vector_field",
        [](std::pair<double, double> y, std::pair<int, int> n, std::optional<std::pair<double, double>> lambda) {
            const auto v = vector_field({y.first, y.second}, params_from(n, lambda));
            return py::make_tuple(v[0], v[1]);
        },
        py::arg("y"), py::arg("n"), py::arg("lambda_") = py::none());

    m.def(
        "jacobian",
        [](std::pair<double, double> y, std::pair<int, int> n, std::optional<std::pair<double, double>> lambda) {
            return matrix_rows(jacobian({y.first, y.second}, params_from(n, lambda)));
        },
        py::arg("y"), py::arg("n"), py::arg("lambda_") = py::none());

    m.def(
        "region",
        [](std::pair<double, double> y, std::pair<int, int> n, std::optional<std::pair<double, double>> lambda) {
            return std::string(to_string(region_of({y.first, y.second}, params_from(n, lambda))));
        },
        py::arg("y"), py::arg("n"), py::arg("lambda_") = py::none());

    m.def(
        "integrate",
        [](std::pair<double, double> y0, std::pair<int, int> n, double u_end, double psi0,
           std::optional<std::pair<double, double>> lambda) {
            const auto p = params_from(n, lambda);
            const auto t = integrate({y0.first, y0.second}, p, u_end);
            const auto path = reconstruct(t, psi0, p);
            py::dict d;
            std::vector<double> y1, y2;
            for (const auto& s : t.states) {
                y1.push_back(s.y1);
                y2.push_back(s.y2);
            }
            d["u"] = t.u_grid;
            d["y1"] = y1;
            d["y2"] = y2;
            d["terminal_event"] = describe(t.terminal_event);
            d["tau"] = path.tau;
            d["psi"] = path.psi;
            d["b1"] = path.b1;
            d["b2"] = path.b2;
            return d;
        },
        py::arg("y0"), py::arg("n"), py::arg("u_end") = 200.0, py::arg("psi0") = 1.0, py::arg("lambda_") = py::none());

    m.def(
        "beta",
        [](int mm, int d, const std::string& sign) { return beta(make_general_params(mm, d), sign_from(sign)); },
        py::arg("m"), py::arg("d"), py::arg("sign"));

    m.def(
        "einstein_state",
        [](int mm, int d, const std::string& sign) {
            const auto s = einstein_state(make_general_params(mm, d), sign_from(sign));
            return py::make_tuple(s.x, s.y);
        },
        py::arg("m"), py::arg("d"), py::arg("sign"));

    m.def(
        "spectrum_v2",
        [](int mm, int d, const std::string& sign, const std::string& form) {
            CForm f;
            if (form == "reference")
                f = CForm::Reference;
            else if (form == "linearized")
                f = CForm::Linearized;
            else
                throw ConfigError("form must be 'reference' or 'linearized'");
            return complex_list(l_spectrum_v2(make_general_params(mm, d), sign_from(sign), f));
        },
        py::arg("m"), py::arg("d"), py::arg("sign"), py::arg("form") = "reference");

    m.def(
        "verify",
        [](const std::string& family) {
            auto o = VerifyOptions::defaults();
            o.family_prefix = family;
            VerificationReport r;
            {
                py::gil_scoped_release release;
                r = run_verify(o);
            }
            py::dict summary;
            for (const auto& [k, s] : r.summary()) summary[py::str(k)] = py::make_tuple(s.passed, s.total);
            py::dict d;
            d["all_pass"] = r.all_pass();
            d["failures"] = r.failures();
            d["summary"] = summary;
            return d;
        },
        py::arg("family") = "");

    m.def(
        "run_command",
        [](const std::string& command, const std::string& config, const std::string& out_dir,
           const std::string& family) {
            std::ostringstream err;
            const int code = run_command({command, config, out_dir, family}, err);
            return py::make_tuple(code, err.str());
        },
        py::arg("command"), py::arg("config") = "", py::arg("out_dir") = ".", py::arg("family") = "");
}
