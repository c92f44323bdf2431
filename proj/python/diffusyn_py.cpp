#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "diffusyn/cli.hpp"
#include "diffusyn/error.hpp"
#include "diffusyn/manifest.hpp"
#include "diffusyn/stats.hpp"

namespace py = pybind11;
using namespace diffusyn;

namespace {

ConfusionMatrix cells(std::uint64_t tp, std::uint64_t fn, std::uint64_t fp, std::uint64_t tn) {
    return {tp, fn, fp, tn};
}

py::dict test_result(const stats::TestResult& r) {
    py::dict d;
    d["statistic"] = r.statistic;
    d["p_value"] = r.p_value;
    d["dof"] = r.dof;
    d["method"] = r.method;
    return d;
}

}  // namespace

PYBIND11_MODULE(_diffusyn, m) {
    m.doc() = "Native core of the diffusyn benchmark toolkit";

    static py::exception<Error> error(m, "DiffusynError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            PyErr_SetString(error.ptr(), (std::string(to_string(e.kind())) + ": " + e.what()).c_str());
        }
    });

    m.def("accuracy", [](std::uint64_t tp, std::uint64_t fn, std::uint64_t fp, std::uint64_t tn) {
        return stats::accuracy(cells(tp, fn, fp, tn));
    }, py::arg("tp"), py::arg("fn"), py::arg("fp"), py::arg("tn"));
    m.def("f1", [](std::uint64_t tp, std::uint64_t fn, std::uint64_t fp, std::uint64_t tn) {
        return stats::f1(cells(tp, fn, fp, tn));
    }, py::arg("tp"), py::arg("fn"), py::arg("fp"), py::arg("tn"));
    m.def("bias_index", [](std::uint64_t tp, std::uint64_t fn, std::uint64_t fp, std::uint64_t tn) {
        return stats::bias_index(cells(tp, fn, fp, tn));
    }, py::arg("tp"), py::arg("fn"), py::arg("fp"), py::arg("tn"));
    m.def("chi_square", [](std::uint64_t tp, std::uint64_t fn, std::uint64_t fp, std::uint64_t tn, bool yates) {
        return test_result(stats::chi_square_independence(cells(tp, fn, fp, tn), {yates}));
    }, py::arg("tp"), py::arg("fn"), py::arg("fp"), py::arg("tn"), py::arg("yates") = false);
    m.def("spearman", [](const std::vector<double>& x, const std::vector<double>& y) {
        return test_result(stats::spearman(x, y));
    }, py::arg("x"), py::arg("y"));

    m.def("validate_manifest", [](const std::string& path) {
        try {
            load_manifest(path);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::Io) throw;
            return std::vector<std::string>{e.what()};
        }
        return std::vector<std::string>{};
    }, py::arg("path"), "Problems found in a manifest; empty when it is valid.");
    m.def("manifest_json", [](const std::string& path) { return json(load_manifest(path).items).dump(); },
          py::arg("path"), "Items of a manifest as a JSON array string.");

    // Whole CLI in-process; returns (exit_code, stdout, stderr).
    m.def("run_cli", [](std::vector<std::string> args) {
        args.insert(args.begin(), "diffusyn");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        int code;
        {
            py::gil_scoped_release release;
            code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
    }, py::arg("args"));
}
