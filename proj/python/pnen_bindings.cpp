#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pnen/config.hpp"
#include "pnen/cost.hpp"
#include "pnen/filters.hpp"
#include "pnen/metrics.hpp"
#include "pnen/nonlocal.hpp"
#include "pnen/train.hpp"

namespace py = pybind11;
using namespace pnen;

namespace {

// Accepts (h,w), (c,h,w), or (n,c,h,w) float64 arrays.
Tensor to_tensor(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    auto buf = arr.request();
    int n = 1, c = 1, h = 0, w = 0;
    if (buf.ndim == 2) {
        h = static_cast<int>(buf.shape[0]);
        w = static_cast<int>(buf.shape[1]);
    } else if (buf.ndim == 3) {
        c = static_cast<int>(buf.shape[0]);
        h = static_cast<int>(buf.shape[1]);
        w = static_cast<int>(buf.shape[2]);
    } else if (buf.ndim == 4) {
        n = static_cast<int>(buf.shape[0]);
        c = static_cast<int>(buf.shape[1]);
        h = static_cast<int>(buf.shape[2]);
        w = static_cast<int>(buf.shape[3]);
    } else {
        throw ConfigError("expected a 2-d, 3-d, or 4-d array");
    }
    Tensor t(n, c, h, w);
    const double* src = static_cast<const double*>(buf.ptr);
    std::copy(src, src + t.numel(), t.data.begin());
    return t;
}

py::array_t<double> to_array(const Tensor& t) {
    py::array_t<double> arr({t.n, t.c, t.h, t.w});
    std::copy(t.data.begin(), t.data.end(), static_cast<double*>(arr.request().ptr));
    return arr;
}

FilterSpec make_filter(const std::string& kind, int radius, double sigma_spatial,
                       double sigma_range) {
    FilterSpec spec{parse_filter_kind(kind), radius, sigma_spatial, sigma_range};
    spec.validate();
    return spec;
}

py::dict report_to_dict(const CostReport& rep) {
    py::dict d;
    d["macs"] = rep.total_macs();
    d["flops"] = rep.total_flops();
    d["params"] = rep.total_params();
    d["attention_flops"] = rep.attention_flops();
    d["attention_elems"] = rep.total_attn_elems();
    d["attention_mem_bytes"] = rep.attention_mem_elems * rep.dtype_bytes;
    d["peak_activation_bytes"] = rep.peak_act_elems * rep.dtype_bytes;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "pyramid non-local enhanced networks: C++ core bindings";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_IOError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    m.def(
        "conv2d",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& weights,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& bias, int stride,
           int pad, int dilation) {
            Tensor wt = to_tensor(weights);
            if (weights.request().ndim != 4)
                throw ConfigError("conv2d weights must be (out, in, kh, kw)");
            ConvLayer layer(wt.c, wt.n, wt.h, stride, pad, dilation);
            layer.weights = wt;
            auto bbuf = bias.request();
            if (bbuf.ndim != 1 || bbuf.shape[0] != wt.n)
                throw ConfigError("conv2d bias must be one value per output channel");
            const double* bptr = static_cast<const double*>(bbuf.ptr);
            std::copy(bptr, bptr + wt.n, layer.bias.data.begin());
            return to_array(conv2d(to_tensor(x), layer));
        },
        py::arg("x"), py::arg("weights"), py::arg("bias"), py::arg("stride") = 1,
        py::arg("pad") = 0, py::arg("dilation") = 1,
        "Cross-correlation with stride/dilation/zero padding.");

    m.def(
        "relu", [](const py::array_t<double>& x) { return to_array(relu(to_tensor(x))); },
        py::arg("x"));

    m.def(
        "softmax_rows",
        [](const py::array_t<double>& z) {
            Tensor t = to_tensor(z);
            Tensor m2(1, 1, t.h, t.w);
            m2.data = t.data;
            return to_array(softmax_rows(m2));
        },
        py::arg("logits"), "Row softmax with max subtraction (2-d input).");

    m.def(
        "apply_filter",
        [](const py::array_t<double>& img, const std::string& kind, int radius,
           double sigma_spatial, double sigma_range) {
            return to_array(
                apply_filter(to_tensor(img), make_filter(kind, radius, sigma_spatial, sigma_range)));
        },
        py::arg("img"), py::arg("kind") = "gaussian", py::arg("radius") = 1,
        py::arg("sigma_spatial") = 1.5, py::arg("sigma_range") = 0.1,
        "gaussian, median, or weighted_median smoothing target.");

    m.def(
        "psnr",
        [](const py::array_t<double>& a, const py::array_t<double>& b, double peak) {
            return psnr(to_tensor(a), to_tensor(b), peak);
        },
        py::arg("a"), py::arg("b"), py::arg("peak") = 1.0);

    m.def(
        "ssim",
        [](const py::array_t<double>& a, const py::array_t<double>& b, double dynamic_range) {
            return ssim(to_tensor(a), to_tensor(b), dynamic_range);
        },
        py::arg("a"), py::arg("b"), py::arg("dynamic_range") = 1.0);

    m.def(
        "synth_textures",
        [](int count, int size, int channels, int regions, double texture_sigma, uint64_t seed) {
            SynthSpec spec{size, channels, regions, texture_sigma};
            py::list out;
            for (auto& img : synth_textures<double>(spec, count, seed)) out.append(to_array(img));
            return out;
        },
        py::arg("count") = 1, py::arg("size") = 128, py::arg("channels") = 1,
        py::arg("regions") = 4, py::arg("texture_sigma") = 0.02, py::arg("seed") = 1);

    m.def(
        "count_costs",
        [](int d, int m_dim, int n_dim, const std::vector<int>& scales, int blocks, int channels,
           int h, int w) {
            ModelConfig cfg{channels, d, m_dim, n_dim, scales, blocks};
            py::dict out;
            out["none"] = report_to_dict(count_costs(cfg, NlVariant::none, h, w));
            out["nlb"] = report_to_dict(count_costs(cfg, NlVariant::nlb, h, w));
            out["apnb"] = report_to_dict(count_costs(cfg, NlVariant::apnb, h, w));
            out["pnb"] = report_to_dict(count_costs(cfg, NlVariant::pnb, h, w));
            return out;
        },
        py::arg("d") = 64, py::arg("m") = 64, py::arg("n") = 32,
        py::arg("scales") = std::vector<int>{1, 2, 3}, py::arg("blocks") = 3,
        py::arg("channels") = 3, py::arg("h") = 96, py::arg("w") = 96,
        "Analytic cost totals for each non-local variant.");

    py::class_<PnbLayerT<double>>(m, "PnbBlock")
        .def(py::init([](int d, int m_dim, int n_dim, const std::vector<int>& scales,
                         uint64_t seed, bool random_psi) {
                 Rng rng(seed);
                 auto layer = PnbLayerT<double>(PnbConfig{d, m_dim, n_dim, scales}, rng);
                 if (random_psi)
                     for (double& v : layer.psi.weights.data) v = rng.uniform(-0.3, 0.3);
                 return layer;
             }),
             py::arg("d"), py::arg("m") = 8, py::arg("n") = 4,
             py::arg("scales") = std::vector<int>{1, 2, 3}, py::arg("seed") = 1,
             py::arg("random_psi") = false,
             "Seeded pyramid block; psi starts at zero (identity) unless random_psi.")
        .def("forward",
             [](PnbLayerT<double>& self, const py::array_t<double>& x) {
                 return to_array(self.forward(to_tensor(x)));
             })
        .def("dump_attention",
             [](const PnbLayerT<double>& self, const py::array_t<double>& x, int qy, int qx) {
                 py::list out;
                 for (auto& d : self.dump_attention(to_tensor(x), qy, qx)) {
                     py::dict entry;
                     entry["scale"] = d.scale;
                     entry["stride"] = d.stride;
                     entry["weights"] = to_array(d.weights);
                     out.append(entry);
                 }
                 return out;
             })
        .def_property_readonly("param_count", &PnbLayerT<double>::param_count);

    py::class_<NlbLayerT<double>>(m, "NlbBlock")
        .def(py::init([](int d, int m_dim, int n_dim, uint64_t seed, bool random_psi) {
                 Rng rng(seed);
                 auto layer = NlbLayerT<double>(NlbConfig{d, m_dim, n_dim}, rng);
                 if (random_psi)
                     for (double& v : layer.psi.weights.data) v = rng.uniform(-0.3, 0.3);
                 return layer;
             }),
             py::arg("d"), py::arg("m") = 8, py::arg("n") = 4, py::arg("seed") = 1,
             py::arg("random_psi") = false)
        .def("forward",
             [](NlbLayerT<double>& self, const py::array_t<double>& x) {
                 return to_array(self.forward(to_tensor(x)));
             })
        .def_property_readonly("param_count", &NlbLayerT<double>::param_count);

    py::class_<ApnbLayerT<double>>(m, "ApnbBlock")
        .def(py::init([](int d, int m_dim, int n_dim, const std::vector<int>& pool_sizes,
                         uint64_t seed, bool random_psi) {
                 Rng rng(seed);
                 auto layer = ApnbLayerT<double>(ApnbConfig{d, m_dim, n_dim, pool_sizes}, rng);
                 if (random_psi)
                     for (double& v : layer.psi.weights.data) v = rng.uniform(-0.3, 0.3);
                 return layer;
             }),
             py::arg("d"), py::arg("m") = 8, py::arg("n") = 4,
             py::arg("pool_sizes") = std::vector<int>{1, 3, 6, 8}, py::arg("seed") = 1,
             py::arg("random_psi") = false)
        .def("forward", [](ApnbLayerT<double>& self, const py::array_t<double>& x) {
            return to_array(self.forward(to_tensor(x)));
        });

    py::class_<PnenModelT<double>>(m, "PnenModel")
        .def_static(
            "seeded",
            [](int channels, int d, int m_dim, int n_dim, const std::vector<int>& scales,
               int blocks, uint64_t seed) {
                return PnenModelT<double>::seeded(
                    ModelConfig{channels, d, m_dim, n_dim, scales, blocks}, seed);
            },
            py::arg("channels") = 3, py::arg("d") = 64, py::arg("m") = 64, py::arg("n") = 32,
            py::arg("scales") = std::vector<int>{1, 2, 3}, py::arg("blocks") = 3,
            py::arg("seed") = 1)
        .def_static("load", &load_checkpoint<double>, py::arg("checkpoint_base"))
        .def("save",
             [](PnenModelT<double>& self, const std::string& base) { save_checkpoint(self, base); })
        .def("infer",
             [](PnenModelT<double>& self, const py::array_t<double>& x) {
                 return to_array(self.infer(to_tensor(x)));
             })
        .def("attention_dumps",
             [](PnenModelT<double>& self, const py::array_t<double>& x, int qy, int qx) {
                 py::list out;
                 for (auto& d : self.attention_dumps(to_tensor(x), qy, qx)) {
                     py::dict entry;
                     entry["scale"] = d.scale;
                     entry["stride"] = d.stride;
                     entry["weights"] = to_array(d.weights);
                     out.append(entry);
                 }
                 return out;
             })
        .def_property_readonly("conv_depth", &PnenModelT<double>::conv_depth)
        .def_property_readonly("param_count", &PnenModelT<double>::param_count);

    m.def(
        "train",
        [](const std::string& config_text, const std::string& out_dir) {
            RunConfig cfg = parse_config_text(config_text);
            cfg.validate();
            py::dict out;
            if (cfg.dtype == "f32") {
                auto result = train_model<float>(cfg.train, out_dir);
                out["step_losses"] = result.step_losses;
                out["csv_path"] = result.csv_path;
                out["checkpoint_base"] = result.checkpoint_base;
            } else {
                auto result = train_model<double>(cfg.train, out_dir);
                out["step_losses"] = result.step_losses;
                out["csv_path"] = result.csv_path;
                out["checkpoint_base"] = result.checkpoint_base;
            }
            return out;
        },
        py::arg("config_text"), py::arg("out_dir"),
        "Run the training loop from a key=value config string.");

    m.def("config_help", &config_help, "Config keys, defaults, and descriptions.");
}
