#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace pnen::oracle {

namespace {

int clampi(int v, int n) { return v < 0 ? 0 : (v >= n ? n - 1 : v); }

// value of a 1x1-conv embedding at one pixel
double embed_at(const Tensor& x, const ConvLayer& l, int oc, int y, int xx) {
    double acc = l.bias.data[static_cast<size_t>(oc)];
    for (int ic = 0; ic < x.c; ++ic) acc += l.weights.at(oc, ic, 0, 0) * x.at(0, ic, y, xx);
    return acc;
}

// kernel=stride=k block embedding at reference cell (by, bx); k must tile
double block_embed_at(const Tensor& x, const ConvLayer& l, int oc, int by, int bx) {
    double acc = l.bias.data[static_cast<size_t>(oc)];
    for (int ic = 0; ic < x.c; ++ic)
        for (int ky = 0; ky < l.kh; ++ky)
            for (int kx = 0; kx < l.kw; ++kx)
                acc += l.weights.at(oc, ic, ky, kx) * x.at(0, ic, by * l.sh + ky, bx * l.sw + kx);
    return acc;
}

void softmax_row_inplace(std::vector<double>& row) {
    double zmax = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double& v : row) {
        v = std::exp(v - zmax);
        sum += v;
    }
    for (double& v : row) v /= sum;
}

// psi (1x1, cat_c -> d) on a per-pixel feature vector, plus residual.
Tensor transform_and_add(const Tensor& x, const ConvLayer& psi,
                         const std::vector<std::vector<double>>& cat_rows) {
    Tensor out(1, x.c, x.h, x.w);
    const int hw = x.h * x.w;
    for (int oc = 0; oc < x.c; ++oc)
        for (int p = 0; p < hw; ++p) {
            double acc = psi.bias.data[static_cast<size_t>(oc)];
            for (int e = 0; e < psi.in_channels; ++e)
                acc += psi.weights.at(oc, e, 0, 0) * cat_rows[static_cast<size_t>(p)][static_cast<size_t>(e)];
            out.data[static_cast<size_t>(oc) * hw + static_cast<size_t>(p)] =
                acc + x.data[static_cast<size_t>(oc) * hw + static_cast<size_t>(p)];
        }
    return out;
}

}  // namespace

Tensor conv2d_naive(const Tensor& x, const ConvLayer& l, int ph_override, int pw_override) {
    const int ph = ph_override >= 0 ? ph_override : l.ph;
    const int pw = pw_override >= 0 ? pw_override : l.pw;
    const int oh = (x.h + 2 * ph - l.dh * (l.kh - 1) - 1) / l.sh + 1;
    const int ow = (x.w + 2 * pw - l.dw * (l.kw - 1) - 1) / l.sw + 1;
    Tensor out(x.n, l.out_channels, oh, ow);
    for (int item = 0; item < x.n; ++item)
        for (int oc = 0; oc < l.out_channels; ++oc)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = l.bias.data[static_cast<size_t>(oc)];
                    for (int ic = 0; ic < x.c; ++ic)
                        for (int ky = 0; ky < l.kh; ++ky)
                            for (int kx = 0; kx < l.kw; ++kx) {
                                int iy = oy * l.sh - ph + ky * l.dh;
                                int ix = ox * l.sw - pw + kx * l.dw;
                                if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w) continue;
                                acc += l.weights.at(oc, ic, ky, kx) * x.at(item, ic, iy, ix);
                            }
                    out.at(item, oc, oy, ox) = acc;
                }
    return out;
}

Tensor matmul_naive(const Tensor& a, const Tensor& b) {
    Tensor out = Tensor::matrix(a.h, b.w);
    for (int i = 0; i < a.h; ++i)
        for (int j = 0; j < b.w; ++j) {
            double acc = 0.0;
            for (int k = 0; k < a.w; ++k) acc += a.m_at(0, i, k) * b.m_at(0, k, j);
            out.m_at(0, i, j) = acc;
        }
    return out;
}

Tensor nlb_naive(const Tensor& x, const NlbLayerT<double>& layer) {
    const int hw = x.h * x.w;
    const int m = layer.cfg.m, nv = layer.cfg.n;
    auto pix_y = [&](int p) { return p / x.w; };
    auto pix_x = [&](int p) { return p % x.w; };

    std::vector<std::vector<double>> e_hat(static_cast<size_t>(hw),
                                           std::vector<double>(static_cast<size_t>(nv), 0.0));
    for (int p = 0; p < hw; ++p) {
        std::vector<double> logits(static_cast<size_t>(hw));
        for (int j = 0; j < hw; ++j) {
            double dot = 0.0;
            for (int e = 0; e < m; ++e)
                dot += embed_at(x, layer.theta, e, pix_y(p), pix_x(p)) *
                       embed_at(x, layer.phi, e, pix_y(j), pix_x(j));
            logits[static_cast<size_t>(j)] = dot;
        }
        softmax_row_inplace(logits);
        for (int j = 0; j < hw; ++j)
            for (int e = 0; e < nv; ++e)
                e_hat[static_cast<size_t>(p)][static_cast<size_t>(e)] +=
                    logits[static_cast<size_t>(j)] * embed_at(x, layer.g, e, pix_y(j), pix_x(j));
    }
    return transform_and_add(x, layer.psi, e_hat);
}

Tensor pnb_naive(const Tensor& x, const PnbLayerT<double>& layer) {
    const int hw = x.h * x.w;
    const int m = layer.cfg.m, nv = layer.cfg.n;
    const int S = layer.cfg.num_scales();
    auto pix_y = [&](int p) { return p / x.w; };
    auto pix_x = [&](int p) { return p % x.w; };

    std::vector<std::vector<double>> cat(static_cast<size_t>(hw),
                                         std::vector<double>(static_cast<size_t>(S) * nv, 0.0));
    for (int si = 0; si < S; ++si) {
        const int k = layer.cfg.stride_of(static_cast<size_t>(si));
        if (x.h % k != 0 || x.w % k != 0)
            throw ConfigError("pnb_naive: oracle requires stride-divisible sizes");
        const int rh = x.h / k, rw = x.w / k;
        const int refs = rh * rw;
        const ConvLayer& phi = layer.phi[static_cast<size_t>(si)];
        const ConvLayer& g = layer.g[static_cast<size_t>(si)];
        for (int p = 0; p < hw; ++p) {
            std::vector<double> logits(static_cast<size_t>(refs));
            for (int r = 0; r < refs; ++r) {
                double dot = 0.0;
                for (int e = 0; e < m; ++e)
                    dot += embed_at(x, layer.theta, e, pix_y(p), pix_x(p)) *
                           block_embed_at(x, phi, e, r / rw, r % rw);
                logits[static_cast<size_t>(r)] = dot;
            }
            softmax_row_inplace(logits);
            for (int r = 0; r < refs; ++r)
                for (int e = 0; e < nv; ++e)
                    cat[static_cast<size_t>(p)][static_cast<size_t>(si * nv + e)] +=
                        logits[static_cast<size_t>(r)] * block_embed_at(x, g, e, r / rw, r % rw);
        }
    }
    return transform_and_add(x, layer.psi, cat);
}

Tensor apnb_naive(const Tensor& x, const ApnbLayerT<double>& layer) {
    const int hw = x.h * x.w;
    const int m = layer.cfg.m, nv = layer.cfg.n;
    auto pix_y = [&](int p) { return p / x.w; };
    auto pix_x = [&](int p) { return p % x.w; };

    // pooled key/value tokens via explicit interval loops
    std::vector<std::vector<double>> keys, values;
    for (int psz : layer.cfg.pool_sizes) {
        for (int oy = 0; oy < psz; ++oy) {
            int y0 = oy * x.h / psz, y1 = (oy + 1) * x.h / psz;
            for (int ox = 0; ox < psz; ++ox) {
                int x0 = ox * x.w / psz, x1 = (ox + 1) * x.w / psz;
                std::vector<double> key(static_cast<size_t>(m), 0.0);
                std::vector<double> val(static_cast<size_t>(nv), 0.0);
                int count = (y1 - y0) * (x1 - x0);
                for (int y = y0; y < y1; ++y)
                    for (int xx = x0; xx < x1; ++xx) {
                        for (int e = 0; e < m; ++e)
                            key[static_cast<size_t>(e)] += embed_at(x, layer.phi, e, y, xx);
                        for (int e = 0; e < nv; ++e)
                            val[static_cast<size_t>(e)] += embed_at(x, layer.g, e, y, xx);
                    }
                for (double& v : key) v /= count;
                for (double& v : val) v /= count;
                keys.push_back(std::move(key));
                values.push_back(std::move(val));
            }
        }
    }

    const int tokens = static_cast<int>(keys.size());
    std::vector<std::vector<double>> e_hat(static_cast<size_t>(hw),
                                           std::vector<double>(static_cast<size_t>(nv), 0.0));
    for (int p = 0; p < hw; ++p) {
        std::vector<double> logits(static_cast<size_t>(tokens));
        for (int t = 0; t < tokens; ++t) {
            double dot = 0.0;
            for (int e = 0; e < m; ++e)
                dot += embed_at(x, layer.theta, e, pix_y(p), pix_x(p)) *
                       keys[static_cast<size_t>(t)][static_cast<size_t>(e)];
            logits[static_cast<size_t>(t)] = dot;
        }
        softmax_row_inplace(logits);
        for (int t = 0; t < tokens; ++t)
            for (int e = 0; e < nv; ++e)
                e_hat[static_cast<size_t>(p)][static_cast<size_t>(e)] +=
                    logits[static_cast<size_t>(t)] * values[static_cast<size_t>(t)][static_cast<size_t>(e)];
    }
    return transform_and_add(x, layer.psi, e_hat);
}

Tensor gaussian_blur_2d(const Tensor& img, double sigma) {
    int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    int k = 2 * radius + 1;
    std::vector<double> kernel(static_cast<size_t>(k) * k);
    double sum = 0.0;
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) {
            double v = std::exp(-0.5 * (dy * dy + dx * dx) / (sigma * sigma));
            kernel[static_cast<size_t>(dy + radius) * k + static_cast<size_t>(dx + radius)] = v;
            sum += v;
        }
    for (double& v : kernel) v /= sum;
    Tensor out(1, img.c, img.h, img.w);
    for (int ch = 0; ch < img.c; ++ch)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) {
                double acc = 0.0;
                for (int dy = -radius; dy <= radius; ++dy)
                    for (int dx = -radius; dx <= radius; ++dx)
                        acc += kernel[static_cast<size_t>(dy + radius) * k +
                                      static_cast<size_t>(dx + radius)] *
                               img.at(0, ch, clampi(y + dy, img.h), clampi(x + dx, img.w));
                out.at(0, ch, y, x) = acc;
            }
    return out;
}

Tensor median_naive(const Tensor& img, int radius) {
    Tensor out(1, img.c, img.h, img.w);
    for (int ch = 0; ch < img.c; ++ch)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) {
                std::vector<double> window;
                for (int dy = -radius; dy <= radius; ++dy)
                    for (int dx = -radius; dx <= radius; ++dx)
                        window.push_back(img.at(0, ch, clampi(y + dy, img.h), clampi(x + dx, img.w)));
                std::sort(window.begin(), window.end());
                out.at(0, ch, y, x) = window[(window.size() - 1) / 2];
            }
    return out;
}

Tensor weighted_median_naive(const Tensor& img, int radius, double sigma_spatial,
                             double sigma_range) {
    Tensor out(1, img.c, img.h, img.w);
    for (int ch = 0; ch < img.c; ++ch)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) {
                double center = img.at(0, ch, y, x);
                std::vector<std::pair<double, double>> window;
                double total = 0.0;
                for (int dy = -radius; dy <= radius; ++dy)
                    for (int dx = -radius; dx <= radius; ++dx) {
                        double v = img.at(0, ch, clampi(y + dy, img.h), clampi(x + dx, img.w));
                        double w = std::exp(-(dy * dy + dx * dx) /
                                            (2.0 * sigma_spatial * sigma_spatial)) *
                                   std::exp(-(v - center) * (v - center) /
                                            (2.0 * sigma_range * sigma_range));
                        window.push_back({v, w});
                        total += w;
                    }
                std::sort(window.begin(), window.end(),
                          [](const auto& a, const auto& b) { return a.first < b.first; });
                double cum = 0.0;
                double result = window.back().first;
                for (const auto& [v, w] : window) {
                    cum += w;
                    if (cum >= 0.5 * total) {
                        result = v;
                        break;
                    }
                }
                out.at(0, ch, y, x) = result;
            }
    return out;
}

double ssim_naive(const Tensor& a, const Tensor& b, double dynamic_range) {
    const int win = 11;
    const double sigma = 1.5;
    const double c1 = (0.01 * dynamic_range) * (0.01 * dynamic_range);
    const double c2 = (0.03 * dynamic_range) * (0.03 * dynamic_range);
    std::vector<double> w(static_cast<size_t>(win) * win);
    double wsum = 0.0;
    for (int dy = 0; dy < win; ++dy)
        for (int dx = 0; dx < win; ++dx) {
            double ry = dy - win / 2, rx = dx - win / 2;
            double v = std::exp(-0.5 * (ry * ry + rx * rx) / (sigma * sigma));
            w[static_cast<size_t>(dy) * win + static_cast<size_t>(dx)] = v;
            wsum += v;
        }
    for (double& v : w) v /= wsum;

    double total = 0.0;
    for (int ch = 0; ch < a.c; ++ch) {
        double acc = 0.0;
        int count = 0;
        for (int y = 0; y + win <= a.h; ++y)
            for (int x = 0; x + win <= a.w; ++x) {
                double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
                for (int dy = 0; dy < win; ++dy)
                    for (int dx = 0; dx < win; ++dx) {
                        double wv = w[static_cast<size_t>(dy) * win + static_cast<size_t>(dx)];
                        double va = a.at(0, ch, y + dy, x + dx);
                        double vb = b.at(0, ch, y + dy, x + dx);
                        ma += wv * va;
                        mb += wv * vb;
                        saa += wv * va * va;
                        sbb += wv * vb * vb;
                        sab += wv * va * vb;
                    }
                double var_a = saa - ma * ma;
                double var_b = sbb - mb * mb;
                double cov = sab - ma * mb;
                acc += ((2 * ma * mb + c1) * (2 * cov + c2)) /
                       ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
                ++count;
            }
        total += acc / count;
    }
    return total / a.c;
}

}  // namespace pnen::oracle
