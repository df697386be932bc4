#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dkm/checks.hpp"
#include "dkm/harness.hpp"

namespace py = pybind11;
using namespace dkm;

namespace {

RunConfig config_from(const py::dict& cfg) {
    KeyValues kv;
    for (auto item : cfg) kv[py::str(item.first)] = py::str(item.second);
    return RunConfig::from_key_values(kv);
}

py::dict row_dict(const MetricsRow& r) {
    py::dict d;
    d["update_index"] = r.update_index;
    d["op_kind"] = r.op_kind;
    d["cost_alg"] = r.cost_alg;
    d["cost_baseline"] = r.cost_baseline;
    d["ratio"] = r.ratio;
    d["recourse_step"] = r.recourse_step;
    d["recourse_cum"] = r.recourse_cum;
    d["makerobust_cum"] = r.makerobust_cum;
    d["resets_cum"] = r.resets_cum;
    d["time_us"] = r.time_us;
    d["n_live"] = r.n_live;
    d["epoch_len"] = r.epoch_len;
    return d;
}

class PyKMeans {
public:
    PyKMeans(int k, int d, int64_t delta, const py::dict& cfg)
        : dk_(config_from(cfg).controller(d, delta, k)) {}

    int insert(uint64_t id, const Point& p, double w) { return dk_.update(UpdateOp::ins(id, p, w)).recourse; }
    int erase(uint64_t id) { return dk_.update(UpdateOp::del(id)).recourse; }
    std::vector<Point> centers() const { return {dk_.solution().begin(), dk_.solution().end()}; }
    double cost() const { return dk_.cost(); }
    size_t size() const { return dk_.points().size(); }

private:
    DynamicKMeans dk_;
};

}  // namespace

PYBIND11_MODULE(_dkm, m) {
    m.doc() = "Dynamic k-means with consistent hashing";

    py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);

    m.def("dist2", &dist2);
    m.def("cost", [](const std::vector<Point>& x, const std::vector<double>& w, const std::vector<Point>& s) {
        if (w.size() != x.size()) throw UsageError("weights and points differ in length");
        WeightedSet ws;
        for (size_t i = 0; i < x.size(); ++i) ws.insert(i, x[i], w[i]);
        return cost(ws, s);
    });

    m.def(
        "gen_workload",
        [](const std::string& mode, uint64_t n, int d, int64_t delta, int k, double ins_frac, uint64_t seed) {
            WorkloadSpec s{mode, n, d, delta, k, ins_frac, seed};
            return serialize_stream(gen_workload(s));
        },
        py::arg("mode") = "clustered", py::arg("n") = 1000, py::arg("d") = 2, py::arg("delta") = 1024,
        py::arg("k") = 5, py::arg("ins_frac") = 0.7, py::arg("seed") = 1);

    m.def(
        "run_stream",
        [](const std::string& text, const std::string& mode, int baseline_every, const py::dict& cfg) {
            RunResult r;
            {
                UpdateStream s = parse_stream_text(text);
                RunConfig c = config_from(cfg);
                py::gil_scoped_release release;
                r = run_stream(s, c, parse_mode(mode), baseline_every);
            }
            py::list rows;
            for (const auto& row : r.rows) rows.append(row_dict(row));
            return py::make_tuple(r.summary, rows);
        },
        py::arg("stream"), py::arg("mode") = "direct", py::arg("baseline_every") = 100,
        py::arg("config") = py::dict());

    m.def(
        "verify",
        [](const std::string& suite, double scale, uint64_t seed) {
            CheckOptions o;
            o.scale = scale;
            o.cfg.seed = seed;
            std::vector<CheckResult> res;
            {
                py::gil_scoped_release release;
                res = run_suite(suite, o);
            }
            py::list out;
            for (const auto& r : res) {
                py::dict d;
                d["id"] = r.id;
                d["name"] = r.name;
                d["status"] = status_name(r.status);
                d["detail"] = r.detail;
                d["seconds"] = r.seconds;
                out.append(d);
            }
            return out;
        },
        py::arg("suite") = "hashing", py::arg("scale") = 0.1, py::arg("seed") = 1);

    py::class_<PyKMeans>(m, "DynamicKMeans")
        .def(py::init<int, int, int64_t, const py::dict&>(), py::arg("k"), py::arg("d"), py::arg("delta"),
             py::arg("config") = py::dict())
        .def("insert", &PyKMeans::insert, py::arg("id"), py::arg("point"), py::arg("weight") = 1.0)
        .def("erase", &PyKMeans::erase)
        .def("centers", &PyKMeans::centers)
        .def("cost", &PyKMeans::cost)
        .def("__len__", &PyKMeans::size);
}
