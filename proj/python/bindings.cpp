#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "kslab/coils.hpp"
#include "kslab/errors.hpp"
#include "kslab/fft.hpp"
#include "kslab/forward.hpp"
#include "kslab/io.hpp"
#include "kslab/metrics.hpp"
#include "kslab/phantom.hpp"
#include "kslab/recon.hpp"
#include "kslab/rim.hpp"
#include "kslab/sampling.hpp"

namespace py = pybind11;
using namespace kslab;

namespace {

RealImage real_from(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw std::invalid_argument("expected a 2-d float64 array");
    RealImage img(int(a.shape(0)), int(a.shape(1)));
    std::copy(a.data(), a.data() + a.size(), img.data());
    return img;
}

py::array_t<double> to_numpy(const RealImage& img) {
    py::array_t<double> out({img.height(), img.width()});
    std::copy(img.data(), img.data() + img.size(), out.mutable_data());
    return out;
}

ComplexImage complex_from(
    const py::array_t<cplx, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw std::invalid_argument("expected a 2-d complex128 array");
    ComplexImage img(int(a.shape(0)), int(a.shape(1)));
    std::copy(a.data(), a.data() + a.size(), img.data());
    return img;
}

py::array_t<cplx> to_numpy(const ComplexImage& img) {
    py::array_t<cplx> out({img.height(), img.width()});
    std::copy(img.data(), img.data() + img.size(), out.mutable_data());
    return out;
}

CoilStack stack_from(const py::array_t<cplx, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 3) throw std::invalid_argument("expected a 3-d complex128 array (C,H,W)");
    const int coils = int(a.shape(0)), h = int(a.shape(1)), w = int(a.shape(2));
    CoilStack s;
    for (int k = 0; k < coils; ++k) {
        ComplexImage img(h, w);
        std::copy(a.data() + size_t(k) * h * w, a.data() + size_t(k + 1) * h * w, img.data());
        s.push_back(std::move(img));
    }
    return s;
}

py::array_t<cplx> to_numpy(const CoilStack& s) {
    if (s.empty()) throw std::invalid_argument("empty coil stack");
    const int h = s[0].height(), w = s[0].width();
    py::array_t<cplx> out({int(s.size()), h, w});
    for (size_t k = 0; k < s.size(); ++k)
        std::copy(s[k].data(), s[k].data() + s[k].size(), out.mutable_data() + k * size_t(h) * w);
    return out;
}

py::array_t<cplx> traj_to_numpy(const std::vector<ComplexImage>& traj) {
    if (traj.empty()) throw std::invalid_argument("empty trajectory");
    const int h = traj[0].height(), w = traj[0].width();
    py::array_t<cplx> out({int(traj.size()), h, w});
    for (size_t t = 0; t < traj.size(); ++t)
        std::copy(traj[t].data(), traj[t].data() + traj[t].size(),
                  out.mutable_data() + t * size_t(h) * w);
    return out;
}

py::array mask_array(const SamplingMask& m) {
    py::array_t<uint8_t> out({m.height, m.width});
    std::copy(m.on.begin(), m.on.end(), out.mutable_data());
    return out;
}

py::array tensor_to_numpy(const TensorData& t) {
    std::vector<py::ssize_t> shape(t.dims.begin(), t.dims.end());
    switch (t.dtype) {
        case TensorData::Dtype::F64: {
            py::array_t<double> out(shape);
            std::copy(t.f64.begin(), t.f64.end(), out.mutable_data());
            return out;
        }
        case TensorData::Dtype::C128: {
            py::array_t<cplx> out(shape);
            std::copy(t.c128.begin(), t.c128.end(), out.mutable_data());
            return out;
        }
        case TensorData::Dtype::U8: {
            py::array_t<uint8_t> out(shape);
            std::copy(t.u8.begin(), t.u8.end(), out.mutable_data());
            return out;
        }
    }
    throw format_error("unknown tensor dtype");
}

TensorData tensor_from_numpy(const py::array& a) {
    TensorData t;
    t.dims.assign(a.shape(), a.shape() + a.ndim());
    const py::dtype dt = a.dtype();
    if (dt.is(py::dtype::of<double>())) {
        auto c = py::array_t<double, py::array::c_style | py::array::forcecast>::ensure(a);
        t.dtype = TensorData::Dtype::F64;
        t.f64.assign(c.data(), c.data() + c.size());
    } else if (dt.is(py::dtype::of<cplx>())) {
        auto c = py::array_t<cplx, py::array::c_style | py::array::forcecast>::ensure(a);
        t.dtype = TensorData::Dtype::C128;
        t.c128.assign(c.data(), c.data() + c.size());
    } else if (dt.is(py::dtype::of<uint8_t>())) {
        auto c = py::array_t<uint8_t, py::array::c_style | py::array::forcecast>::ensure(a);
        t.dtype = TensorData::Dtype::U8;
        t.u8.assign(c.data(), c.data() + c.size());
    } else {
        throw std::invalid_argument("supported dtypes: float64, complex128, uint8");
    }
    return t;
}

}  // namespace

PYBIND11_MODULE(_kslab, m) {
    m.doc() = "Compressed-sensing MRI reconstruction laboratory";

    py::register_exception<infeasible_acceleration>(m, "InfeasibleAcceleration",
                                                    PyExc_ValueError);
    py::register_exception<divergence_error>(m, "DivergenceError", PyExc_RuntimeError);
    py::register_exception<format_error>(m, "FormatError", PyExc_ValueError);

    py::class_<SamplingMask>(m, "Mask")
        .def_property_readonly("array", &mask_array)
        .def_property_readonly("achieved",
                               [](const SamplingMask& mm) { return achieved_acceleration(mm); })
        .def_property_readonly("target",
                               [](const SamplingMask& mm) { return mm.target_acceleration; })
        .def_property_readonly("shape",
                               [](const SamplingMask& mm) {
                                   return py::make_tuple(mm.height, mm.width);
                               })
        .def("__repr__", [](const SamplingMask& mm) {
            return "Mask(" + std::to_string(mm.height) + "x" + std::to_string(mm.width) +
                   ", achieved=" + std::to_string(achieved_acceleration(mm)) + ")";
        });

    m.def("mask_full", &make_full_mask, py::arg("height"), py::arg("width"));
    m.def("mask_rectilinear", &make_rectilinear_mask, py::arg("height"), py::arg("width"),
          py::arg("r"), py::arg("seed"));
    m.def("mask_radial", &make_radial_mask, py::arg("height"), py::arg("width"), py::arg("r"),
          py::arg("seed"));

    m.def("fft2c",
          [](const py::array_t<cplx, py::array::c_style | py::array::forcecast>& x) {
              return to_numpy(fft2c(complex_from(x)));
          },
          py::arg("x"), "Centered orthonormal 2-d Fourier transform");
    m.def("ifft2c",
          [](const py::array_t<cplx, py::array::c_style | py::array::forcecast>& x) {
              return to_numpy(ifft2c(complex_from(x)));
          },
          py::arg("x"));

    m.def("shepp_logan",
          [](int h, int w) { return to_numpy(shepp_logan_phantom(h, w)); }, py::arg("height"),
          py::arg("width"));
    m.def("perturbed_shepp_logan",
          [](int h, int w, uint64_t seed) { return to_numpy(perturbed_shepp_logan(h, w, seed)); },
          py::arg("height"), py::arg("width"), py::arg("seed"));
    m.def("simulate_sensitivities",
          [](int h, int w, int coils) { return to_numpy(simulate_sensitivities(h, w, coils)); },
          py::arg("height"), py::arg("width"), py::arg("coils"));
    m.def("rss",
          [](const py::array_t<cplx, py::array::c_style | py::array::forcecast>& s) {
              return to_numpy(rss(stack_from(s)));
          },
          py::arg("coil_images"), "Root-sum-of-squares coil combination");
    m.def("simulate_acquisition",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& src,
             const py::array_t<cplx, py::array::c_style | py::array::forcecast>& sens,
             double noise_std, uint64_t seed) {
              return to_numpy(
                  simulate_acquisition(real_from(src), stack_from(sens), noise_std, seed));
          },
          py::arg("source"), py::arg("sens"), py::arg("noise_std"), py::arg("seed"));

    m.def("forward",
          [](const py::array_t<cplx, py::array::c_style | py::array::forcecast>& x,
             const py::array_t<cplx, py::array::c_style | py::array::forcecast>& sens) {
              return to_numpy(forward_model(complex_from(x), stack_from(sens)));
          },
          py::arg("x"), py::arg("sens"));
    m.def("adjoint",
          [](const py::array_t<cplx, py::array::c_style | py::array::forcecast>& ks,
             const py::array_t<cplx, py::array::c_style | py::array::forcecast>& sens) {
              return to_numpy(adjoint_model(stack_from(ks), stack_from(sens)));
          },
          py::arg("kspace"), py::arg("sens"));
    m.def("apply_mask",
          [](const py::array_t<cplx, py::array::c_style | py::array::forcecast>& ks,
             const SamplingMask& mask) { return to_numpy(apply_mask(stack_from(ks), mask)); },
          py::arg("kspace"), py::arg("mask"));
    m.def("nll",
          [](const py::array_t<cplx, py::array::c_style | py::array::forcecast>& x,
             const py::array_t<cplx, py::array::c_style | py::array::forcecast>& sens,
             const py::array_t<cplx, py::array::c_style | py::array::forcecast>& masked,
             const SamplingMask& mask, double sigma2) {
              return nll(complex_from(x), stack_from(sens), stack_from(masked), mask, {sigma2});
          },
          py::arg("x"), py::arg("sens"), py::arg("masked_kspace"), py::arg("mask"),
          py::arg("sigma2") = 1.0);
    m.def("nll_gradient",
          [](const py::array_t<cplx, py::array::c_style | py::array::forcecast>& x,
             const py::array_t<cplx, py::array::c_style | py::array::forcecast>& sens,
             const py::array_t<cplx, py::array::c_style | py::array::forcecast>& masked,
             const SamplingMask& mask, double sigma2) {
              return to_numpy(nll_gradient(complex_from(x), stack_from(sens), stack_from(masked),
                                           mask, {sigma2}));
          },
          py::arg("x"), py::arg("sens"), py::arg("masked_kspace"), py::arg("mask"),
          py::arg("sigma2") = 1.0);

    m.def("zero_filled_rss",
          [](const py::array_t<cplx, py::array::c_style | py::array::forcecast>& masked) {
              return to_numpy(zero_filled_rss(stack_from(masked)));
          },
          py::arg("masked_kspace"));
    m.def("zero_filled_sense",
          [](const py::array_t<cplx, py::array::c_style | py::array::forcecast>& masked,
             const py::array_t<cplx, py::array::c_style | py::array::forcecast>& sens) {
              return to_numpy(zero_filled_sense(stack_from(masked), stack_from(sens)));
          },
          py::arg("masked_kspace"), py::arg("sens"));
    m.def("solve_map_cg",
          [](const py::array_t<cplx, py::array::c_style | py::array::forcecast>& masked,
             const py::array_t<cplx, py::array::c_style | py::array::forcecast>& sens,
             const SamplingMask& mask, double reg_lambda, int max_iters, double tol,
             double sigma2) {
              MapObjective obj;
              obj.data_term.sigma2 = sigma2;
              obj.reg_lambda = reg_lambda;
              obj.max_iters = max_iters;
              obj.tol = tol;
              CgReport rep;
              ComplexImage x = solve_map_cg(stack_from(masked), stack_from(sens), mask, obj, &rep);
              return py::make_tuple(to_numpy(x), rep.iterations, rep.converged);
          },
          py::arg("masked_kspace"), py::arg("sens"), py::arg("mask"),
          py::arg("reg_lambda") = 1e-3, py::arg("max_iters") = 50, py::arg("tol") = 1e-6,
          py::arg("sigma2") = 1.0,
          "Ridge-regularized reconstruction; returns (image, iterations, converged)");

    m.def("psnr",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& p,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& t) {
              return psnr(real_from(p), real_from(t));
          },
          py::arg("pred"), py::arg("target"));
    m.def("ssim",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& p,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& t,
             py::object data_range) {
              if (data_range.is_none()) return ssim(real_from(p), real_from(t));
              return ssim(real_from(p), real_from(t), data_range.cast<double>());
          },
          py::arg("pred"), py::arg("target"), py::arg("data_range") = py::none());
    m.def("vif",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& p,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& t) {
              return vif_p(real_from(p), real_from(t));
          },
          py::arg("pred"), py::arg("target"));

    py::class_<RimModel>(m, "Model")
        .def_property_readonly("time_steps",
                               [](const RimModel& mm) { return mm.config.time_steps; })
        .def_property_readonly("hidden_channels",
                               [](const RimModel& mm) { return mm.config.hidden_channels; })
        .def_property_readonly("input_scale",
                               [](const RimModel& mm) { return mm.input_scale; })
        .def("save",
             [](const RimModel& mm, const std::string& path) { save_rim_checkpoint(path, mm); },
             py::arg("path"))
        .def("zero_",
             [](RimModel& mm) {
                 for (auto& [name, p] : rim_named_parameters(mm))
                     std::fill(p->v.begin(), p->v.end(), 0.0);
             },
             "Silence every parameter; inference then passes the start image through")
        .def("__repr__", [](const RimModel& mm) {
            return "Model(time_steps=" + std::to_string(mm.config.time_steps) +
                   ", hidden_channels=" + std::to_string(mm.config.hidden_channels) + ")";
        });

    m.def("make_model",
          [](int time_steps, int hidden_channels, uint64_t seed, int kernel_in, int kernel_mid,
             int kernel_out, bool standardize_input) {
              RimConfig cfg;
              cfg.time_steps = time_steps;
              cfg.hidden_channels = hidden_channels;
              cfg.kernel_in = kernel_in;
              cfg.kernel_mid = kernel_mid;
              cfg.kernel_out = kernel_out;
              cfg.standardize_input = standardize_input;
              return make_rim_model(cfg, seed);
          },
          py::arg("time_steps") = 8, py::arg("hidden_channels") = 16, py::arg("seed") = 0,
          py::arg("kernel_in") = 5, py::arg("kernel_mid") = 3, py::arg("kernel_out") = 3,
          py::arg("standardize_input") = true);
    m.def("load_model",
          [](const std::string& path) { return load_rim_checkpoint(path); }, py::arg("path"));
    m.def("rim_infer",
          [](const RimModel& model,
             const py::array_t<cplx, py::array::c_style | py::array::forcecast>& masked,
             const py::array_t<cplx, py::array::c_style | py::array::forcecast>& sens,
             const SamplingMask& mask, double sigma2) {
              return traj_to_numpy(
                  rim_infer(model, stack_from(masked), stack_from(sens), mask, {sigma2}));
          },
          py::arg("model"), py::arg("masked_kspace"), py::arg("sens"), py::arg("mask"),
          py::arg("sigma2") = 1.0,
          "Unrolled reconstruction; returns the (T,H,W) complex iterate trajectory");

    m.def("read_tensor",
          [](const std::string& path) { return tensor_to_numpy(read_tensor_file(path)); },
          py::arg("path"));
    m.def("write_tensor",
          [](const std::string& path, const py::array& a) {
              write_tensor_file(path, tensor_from_numpy(a));
          },
          py::arg("path"), py::arg("array"));
}
