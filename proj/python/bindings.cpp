#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "s5vh/bench.hpp"
#include "s5vh/centers.hpp"
#include "s5vh/data.hpp"
#include "s5vh/gradcheck.hpp"
#include "s5vh/hashing.hpp"
#include "s5vh/io.hpp"
#include "s5vh/pipeline.hpp"
#include "s5vh/retrieval.hpp"
#include "s5vh/ssm.hpp"

namespace py = pybind11;
using namespace s5vh;
namespace fs = std::filesystem;

namespace {

using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using I8Array = py::array_t<std::int8_t, py::array::c_style | py::array::forcecast>;

DType parse_dtype(const std::string& name) {
    if (name == "f32" || name == "float32") return DType::F32;
    if (name == "f64" || name == "float64") return DType::F64;
    throw Error("dtype must be 'f32' or 'f64', got '" + name + "'");
}

std::string dtype_name(DType d) { return d == DType::F32 ? "f32" : "f64"; }

Tensor to_tensor(const F64Array& a, DType dtype) {
    Shape shape(a.shape(), a.shape() + a.ndim());
    return Tensor::from(shape, std::vector<double>(a.data(), a.data() + a.size()), dtype);
}

F64Array to_array(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    F64Array out(shape);
    std::copy(t.data().begin(), t.data().end(), out.mutable_data());
    return out;
}

// (n, K) array of +-1 -> packed table.
hashing::PackedCodes pack(const I8Array& codes) {
    if (codes.ndim() != 2) throw ShapeError("codes must be a 2-d array of +-1");
    const auto n = static_cast<std::size_t>(codes.shape(0)), k = static_cast<std::size_t>(codes.shape(1));
    hashing::PackedCodes out(k);
    for (std::size_t i = 0; i < n; ++i) {
        std::span<const std::int8_t> row(codes.data() + i * k, k);
        for (auto b : row)
            if (b != 1 && b != -1) throw Error("codes must contain only +1 and -1");
        out.push_back(row);
    }
    return out;
}

I8Array unpack(const hashing::PackedCodes& codes) {
    I8Array out({static_cast<py::ssize_t>(codes.size()), static_cast<py::ssize_t>(codes.bits())});
    auto* p = out.mutable_data();
    for (std::size_t i = 0; i < codes.size(); ++i) {
        auto c = codes.unpack(i);
        std::copy(c.begin(), c.end(), p + i * codes.bits());
    }
    return out;
}

py::array_t<double> pr_array(const std::vector<retrieval::PrPoint>& pr) {
    py::array_t<double> out({static_cast<py::ssize_t>(pr.size()), py::ssize_t{3}});
    auto r = out.mutable_unchecked<2>();
    for (std::size_t i = 0; i < pr.size(); ++i) {
        auto row = static_cast<py::ssize_t>(i);
        r(row, 0) = static_cast<double>(pr[i].radius);
        r(row, 1) = pr[i].precision;
        r(row, 2) = pr[i].recall;
    }
    return out;
}

py::object json_to_py(const nlohmann::json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Self-supervised video hashing core";

    // later registrations are tried first, so subclasses map to their own type
    auto& error = py::register_exception<Error>(m, "S5vhError", PyExc_RuntimeError);
    py::register_exception<ShapeError>(m, "ShapeError", error.ptr());
    py::register_exception<io::FormatError>(m, "FormatError", error.ptr());
    py::register_exception<io::IoError>(m, "IoError", error.ptr());
    py::register_exception<training::NonFiniteLossError>(m, "NonFiniteLossError", error.ptr());

    m.def("discretize", [](double a, double b, double delta) {
        auto z = ssm::discretize(a, b, delta);
        return py::make_tuple(z.decay, z.input);
    }, py::arg("a"), py::arg("b"), py::arg("delta"), "Zero-order-hold (decay, input gain) for one state.");

    m.def("selective_scan",
          [](const F64Array& u, const F64Array& delta, const F64Array& a, const F64Array& b, const F64Array& c,
             const std::string& dtype) {
              DType d = parse_dtype(dtype);
              return to_array(ssm::selective_scan(to_tensor(u, d), to_tensor(delta, d), to_tensor(a, d),
                                                  to_tensor(b, d), to_tensor(c, d)));
          },
          py::arg("u"), py::arg("delta"), py::arg("a"), py::arg("b"), py::arg("c"), py::arg("dtype") = "f64",
          "u, delta: (B, T, E); a: (E, N); b, c: (B, T, N) -> y: (B, T, E).");

    m.def("hamming", [](const I8Array& x, const I8Array& y) {
        return retrieval::hamming_distance({x.data(), static_cast<std::size_t>(x.size())},
                                           {y.data(), static_cast<std::size_t>(y.size())});
    }, py::arg("x"), py::arg("y"));

    m.def("rank", [](const I8Array& query, const I8Array& database) {
        hashing::PackedCodes q(static_cast<std::size_t>(query.size()));
        q.push_back({query.data(), static_cast<std::size_t>(query.size())});
        return retrieval::rank(q.row(0), pack(database));
    }, py::arg("query"), py::arg("database"));

    m.def("ap_at_n", [](const std::vector<std::uint8_t>& relevance, std::size_t n) {
        return retrieval::ap_at_n(relevance, n);
    }, py::arg("relevance"), py::arg("n"));

    m.def("map_at_n",
          [](const I8Array& queries, const std::vector<int>& query_labels, const I8Array& database,
             const std::vector<int>& database_labels, const std::vector<std::size_t>& cutoffs) {
              return retrieval::map_at_cutoffs(pack(queries), query_labels, pack(database), database_labels, cutoffs);
          },
          py::arg("queries"), py::arg("query_labels"), py::arg("database"), py::arg("database_labels"),
          py::arg("cutoffs") = std::vector<std::size_t>(retrieval::kStandardCutoffs.begin(),
                                                        retrieval::kStandardCutoffs.end()));

    m.def("gmap", [](const std::vector<double>& v) { return retrieval::gmap(v); }, py::arg("map_values"));

    m.def("pr_curve",
          [](const I8Array& queries, const std::vector<int>& query_labels, const I8Array& database,
             const std::vector<int>& database_labels) {
              return pr_array(retrieval::pr_curve(pack(queries), query_labels, pack(database), database_labels));
          },
          py::arg("queries"), py::arg("query_labels"), py::arg("database"), py::arg("database_labels"),
          "Rows of (radius, precision, recall) for radius 0..K.");

    m.def("kmeans", [](const centers::Matrix& features, std::size_t clusters, std::uint64_t seed) {
        auto r = centers::kmeans(features, clusters, seed);
        py::dict out;
        out["centroids"] = r.centroids;
        out["assignments"] = r.assignments;
        out["objective_trace"] = r.objective_trace;
        out["iterations"] = r.iterations;
        return out;
    }, py::arg("features"), py::arg("clusters"), py::arg("seed") = 0);

    m.def("cosine_matrix", &centers::cosine_matrix, py::arg("centroids"));
    m.def("center_objective", &centers::center_objective, py::arg("phi"), py::arg("similarity"));

    m.def("generate_hash_centers", [](const centers::Matrix& similarity, std::size_t bits, std::uint64_t seed,
                                      std::size_t max_outer) {
        centers::AdmmOptions o;
        o.max_outer = max_outer;
        auto r = centers::generate_hash_centers(similarity, bits, seed, o);
        py::dict out = json_to_py(centers::report_json(r, seed));
        out["centers"] = r.centers;
        return out;
    }, py::arg("similarity"), py::arg("bits"), py::arg("seed") = 0, py::arg("max_outer") = 200);

    m.def("fit_scaling", [](const std::vector<double>& lengths, const std::vector<double>& times) {
        if (lengths.size() != times.size()) throw ShapeError("fit_scaling: lengths and times differ in size");
        std::vector<std::pair<double, double>> pts;
        for (std::size_t i = 0; i < lengths.size(); ++i) pts.emplace_back(lengths[i], times[i]);
        auto f = bench::fit_scaling(pts);
        py::dict out;
        out["a"] = f.a;
        out["b"] = f.b;
        out["c"] = f.c;
        out["r2"] = f.r2;
        out["linear_slope"] = f.linear_slope;
        out["linear_intercept"] = f.linear_intercept;
        out["linear_r2"] = f.linear_r2;
        out["quadratic_share_at_max"] = f.quadratic_share(*std::max_element(lengths.begin(), lengths.end()));
        return out;
    }, py::arg("lengths"), py::arg("times"));

    m.def("gradcheck", [](std::uint64_t seed) {
        std::vector<std::pair<std::string, double>> rows;
        for (const auto& c : gradient_suite(seed)) rows.emplace_back(c.name, grad_check(c.f, c.inputs));
        return rows;
    }, py::arg("seed") = 0, "Max relative finite-difference error per primitive, loss and model case.");

    m.def("write_tensor", [](const fs::path& path, const F64Array& a, const std::string& dtype) {
        io::write_tensor(path, to_tensor(a, parse_dtype(dtype)));
    }, py::arg("path"), py::arg("array"), py::arg("dtype") = "f32");
    m.def("read_tensor", [](const fs::path& path) {
        Tensor t = io::read_tensor(path);
        return py::make_tuple(to_array(t), dtype_name(t.dtype()));
    }, py::arg("path"), "Returns (array as float64, stored dtype).");

    m.def("write_codes", [](const fs::path& path, const I8Array& codes, const std::vector<std::string>& ids) {
        hashing::write_codes(path, pack(codes), ids);
    }, py::arg("path"), py::arg("codes"), py::arg("ids"));
    m.def("read_codes", [](const fs::path& path) {
        std::vector<std::string> ids;
        auto codes = hashing::read_codes(path, &ids);
        return py::make_tuple(unpack(codes), ids);
    }, py::arg("path"));

    m.def("synth", [](const fs::path& out, std::size_t classes, std::size_t videos, std::size_t frames,
                      std::size_t dim, std::uint64_t seed) {
        data::SynthOptions o;
        o.classes = classes;
        o.videos = videos;
        o.frames = frames;
        o.dim = dim;
        o.seed = seed;
        data::write_synthetic(data::generate_synthetic(o), out);
    }, py::arg("out"), py::arg("classes") = 5, py::arg("videos") = 500, py::arg("frames") = 16, py::arg("dim") = 32,
          py::arg("seed") = 7);

    m.def("cluster", [](const fs::path& manifest, std::size_t n_centers, std::uint64_t seed, const fs::path& out) {
        auto r = pipeline::run_cluster(manifest, n_centers, seed, out);
        return py::make_tuple(r.ids, r.centroids.assignments);
    }, py::arg("manifest"), py::arg("n_centers"), py::arg("seed"), py::arg("out"));

    m.def("centers", [](const fs::path& cluster_dir, std::size_t bits, std::uint64_t seed, const fs::path& out) {
        auto r = pipeline::run_centers(cluster_dir, bits, seed, out);
        py::dict d = json_to_py(centers::report_json(r, seed));
        d["centers"] = r.centers;
        return d;
    }, py::arg("cluster_dir"), py::arg("bits"), py::arg("seed"), py::arg("out"));

    m.def("train", [](const fs::path& manifest, const fs::path& centers_dir, const fs::path& config,
                      const fs::path& out) {
        auto r = pipeline::run_train(manifest, centers_dir, config, out);
        py::dict d;
        d["best_epoch"] = r.best_epoch;
        d["early_stopped"] = r.early_stopped;
        std::vector<double> totals;
        for (const auto& e : r.epochs) totals.push_back(e.mean_total);
        d["epoch_losses"] = totals;
        return d;
    }, py::arg("manifest"), py::arg("centers_dir"), py::arg("config"), py::arg("out"));

    m.def("encode", [](const fs::path& checkpoint, const fs::path& manifest, const fs::path& out) {
        return unpack(pipeline::run_encode(checkpoint, manifest, out));
    }, py::arg("checkpoint"), py::arg("manifest"), py::arg("out"));

    m.def("evaluate", [](const fs::path& queries, const fs::path& database, const fs::path& labels,
                         const fs::path& out) {
        auto r = pipeline::run_eval(queries, database, labels, out);
        py::dict d;
        d["map"] = r.map;
        d["gmap"] = r.gmap;
        d["pr"] = pr_array(r.pr);
        return d;
    }, py::arg("queries"), py::arg("database"), py::arg("labels"), py::arg("out"));

    m.attr("STANDARD_CUTOFFS") = std::vector<std::size_t>(retrieval::kStandardCutoffs.begin(),
                                                          retrieval::kStandardCutoffs.end());
}
