#include "pnen/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "pnen/image_io.hpp"
#include "pnen/tensor_io.hpp"

namespace pnen {

// --- Adam ------------------------------------------------------------------------

template <class T>
AdamT<T>::AdamT(const std::vector<ParamRefT<T>>& params, AdamConfig cfg) : cfg_(cfg) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const auto& p : params) {
        m_.emplace_back(p.value->n, p.value->c, p.value->h, p.value->w);
        v_.emplace_back(p.value->n, p.value->c, p.value->h, p.value->w);
    }
}

template <class T>
void AdamT<T>::step(const std::vector<ParamRefT<T>>& params, double lr) {
    if (params.size() != m_.size()) throw ConfigError("adam: parameter list changed size");
    for (const auto& p : params)
        if (!p.grad->all_finite())
            throw NumericError("adam: non-finite gradient in " + p.name + ", aborting step");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
    for (size_t i = 0; i < params.size(); ++i) {
        TensorT<T>& m = m_[i];
        TensorT<T>& v = v_[i];
        TensorT<T>& val = *params[i].value;
        const TensorT<T>& grad = *params[i].grad;
        for (size_t j = 0; j < val.data.size(); ++j) {
            double g = double(grad.data[j]);
            double mj = cfg_.beta1 * double(m.data[j]) + (1.0 - cfg_.beta1) * g;
            double vj = cfg_.beta2 * double(v.data[j]) + (1.0 - cfg_.beta2) * g * g;
            m.data[j] = T(mj);
            v.data[j] = T(vj);
            double update = lr * (mj / bc1) / (std::sqrt(vj / bc2) + cfg_.eps);
            val.data[j] = T(double(val.data[j]) - update);
        }
    }
}

// --- schedule ---------------------------------------------------------------------

double PlateauSchedule::on_epoch_end(double epoch_loss) {
    bool improved = !has_best || epoch_loss < best * (1.0 - min_delta_rel);
    if (improved) {
        best = epoch_loss;
        has_best = true;
        stale = 0;
        return lr;
    }
    if (++stale >= patience) {
        lr = std::max(lr_floor, lr * 0.5);
        stale = 0;
    }
    return lr;
}

// --- augmentation -----------------------------------------------------------------

AugmentDraw draw_augment(Rng& rng) {
    AugmentDraw d;
    d.hflip = rng.coin();
    d.quarter_turns = static_cast<int>(rng.below(4));
    return d;
}

namespace {

template <class T>
TensorT<T> hflip(const TensorT<T>& t) {
    TensorT<T> out(t.n, t.c, t.h, t.w);
    for (int i = 0; i < t.n; ++i)
        for (int ch = 0; ch < t.c; ++ch)
            for (int y = 0; y < t.h; ++y)
                for (int x = 0; x < t.w; ++x) out.at(i, ch, y, x) = t.at(i, ch, y, t.w - 1 - x);
    return out;
}

// one counter-clockwise quarter turn: out(y, x) = in(x, w-1-y)
template <class T>
TensorT<T> rot90(const TensorT<T>& t) {
    TensorT<T> out(t.n, t.c, t.w, t.h);
    for (int i = 0; i < t.n; ++i)
        for (int ch = 0; ch < t.c; ++ch)
            for (int y = 0; y < t.w; ++y)
                for (int x = 0; x < t.h; ++x) out.at(i, ch, y, x) = t.at(i, ch, x, t.w - 1 - y);
    return out;
}

}  // namespace

template <class T>
TensorT<T> apply_augment(const TensorT<T>& t, const AugmentDraw& draw) {
    TensorT<T> out = draw.hflip ? hflip(t) : t;
    for (int i = 0; i < (draw.quarter_turns & 3); ++i) out = rot90(out);
    return out;
}

template <class T>
void augment_pair(TensorT<T>& x, TensorT<T>& g, Rng& rng) {
    if (!x.same_shape(g)) throw ConfigError("augment: pair shapes differ");
    AugmentDraw draw = draw_augment(rng);
    x = apply_augment(x, draw);
    g = apply_augment(g, draw);
}

// --- synthetic textures --------------------------------------------------------------

void SynthSpec::validate() const {
    if (size < 128) throw ConfigError("synth spec: size must be >= 128");
    if (channels != 1 && channels != 3) throw ConfigError("synth spec: channels must be 1 or 3");
    if (regions < 1) throw ConfigError("synth spec: regions must be >= 1");
    if (texture_sigma < 0.0) throw ConfigError("synth spec: texture_sigma must be >= 0");
}

namespace {

// [1 2 1]/4 binomial blur along both axes, run twice: a cheap band limit.
void band_limit(std::vector<double>& img, int h, int w) {
    std::vector<double> tmp(img.size());
    for (int pass = 0; pass < 2; ++pass) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                int xl = std::max(0, x - 1), xr = std::min(w - 1, x + 1);
                tmp[size_t(y) * w + x] = 0.25 * img[size_t(y) * w + xl] +
                                         0.5 * img[size_t(y) * w + x] +
                                         0.25 * img[size_t(y) * w + xr];
            }
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                int yu = std::max(0, y - 1), yd = std::min(h - 1, y + 1);
                img[size_t(y) * w + x] = 0.25 * tmp[size_t(yu) * w + x] +
                                         0.5 * tmp[size_t(y) * w + x] +
                                         0.25 * tmp[size_t(yd) * w + x];
            }
    }
}

}  // namespace

template <class T>
SynthSampleT<T> synth_sample(const SynthSpec& spec, uint64_t seed) {
    spec.validate();
    Rng rng(seed, /*stream=*/0x5e9);
    const int h = spec.size, w = spec.size;
    const int k = spec.regions;

    std::vector<std::pair<int, int>> sites;
    sites.reserve(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i)
        sites.push_back({static_cast<int>(rng.below(static_cast<uint64_t>(h))),
                         static_cast<int>(rng.below(static_cast<uint64_t>(w)))});

    // Distinct, evenly spaced levels in [0.1, 0.9]; one permutation per channel.
    std::vector<std::vector<double>> levels(static_cast<size_t>(spec.channels));
    for (auto& lv : levels) {
        lv.resize(static_cast<size_t>(k));
        for (int i = 0; i < k; ++i)
            lv[static_cast<size_t>(i)] = k == 1 ? 0.5 : 0.1 + 0.8 * double(i) / double(k - 1);
        for (int i = k - 1; i > 0; --i) {
            int j = static_cast<int>(rng.below(static_cast<uint64_t>(i + 1)));
            std::swap(lv[static_cast<size_t>(i)], lv[static_cast<size_t>(j)]);
        }
    }

    SynthSampleT<T> sample;
    sample.image = TensorT<T>(1, spec.channels, h, w);
    sample.labels.resize(size_t(h) * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            int best = 0;
            int64_t best_d = INT64_MAX;
            for (int i = 0; i < k; ++i) {
                int64_t dy = y - sites[static_cast<size_t>(i)].first;
                int64_t dx = x - sites[static_cast<size_t>(i)].second;
                int64_t d2 = dy * dy + dx * dx;
                if (d2 < best_d) {
                    best_d = d2;
                    best = i;
                }
            }
            sample.labels[size_t(y) * w + x] = best;
            for (int ch = 0; ch < spec.channels; ++ch)
                sample.image.at(0, ch, y, x) =
                    T(levels[static_cast<size_t>(ch)][static_cast<size_t>(best)]);
        }

    if (spec.texture_sigma > 0.0) {
        std::vector<double> noise(size_t(h) * w);
        for (int ch = 0; ch < spec.channels; ++ch) {
            for (double& v : noise) v = rng.normal();
            band_limit(noise, h, w);
            double mean = 0.0;
            for (double v : noise) mean += v;
            mean /= double(noise.size());
            double var = 0.0;
            for (double v : noise) var += (v - mean) * (v - mean);
            double std_dev = std::sqrt(var / double(noise.size()));
            double gain = std_dev > 0.0 ? spec.texture_sigma / std_dev : 0.0;
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    double v = double(sample.image.at(0, ch, y, x)) +
                               gain * (noise[size_t(y) * w + x] - mean);
                    sample.image.at(0, ch, y, x) = T(std::clamp(v, 0.0, 1.0));
                }
        }
    }
    return sample;
}

template <class T>
std::vector<TensorT<T>> synth_textures(const SynthSpec& spec, int count, uint64_t seed) {
    if (count < 1) throw ConfigError("synth_textures: count must be >= 1");
    std::vector<TensorT<T>> out;
    out.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i)
        out.push_back(synth_sample<T>(spec, Rng::mix(seed, 0xDA7A + static_cast<uint64_t>(i)))
                          .image);
    return out;
}

// --- training loop -----------------------------------------------------------------

void TrainConfig::validate() const {
    model.validate();
    filter.validate();
    int max_scale = 0;
    for (int s : model.scales) max_scale = std::max(max_scale, s);
    if (patch_size < (2 << max_scale))
        throw ConfigError("train config: patch_size must be >= 2^(max_scale+1) so the deepest "
                          "scale keeps >= 2 reference positions");
    if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
    if (lr_floor > lr_init) throw ConfigError("train config: lr_floor must be <= lr_init");
    if (epochs < 1 || steps_per_epoch < 1)
        throw ConfigError("train config: epochs and steps_per_epoch must be >= 1");
    if (plateau_patience < 1) throw ConfigError("train config: plateau_patience must be >= 1");
    if (data_dir.empty()) {
        synth.validate();
        if (synth_count < 1) throw ConfigError("train config: synth_count must be >= 1");
        if (synth.channels != model.channels)
            throw ConfigError("train config: synth channels must match model channels");
    }
}

namespace {

template <class T>
std::vector<TensorT<T>> load_dataset(const TrainConfig& cfg) {
    std::vector<TensorT<T>> images;
    if (cfg.data_dir.empty()) {
        images = synth_textures<T>(cfg.synth, cfg.synth_count, cfg.seed);
    } else {
        std::vector<std::string> paths;
        for (const auto& entry : std::filesystem::directory_iterator(cfg.data_dir)) {
            if (!entry.is_regular_file()) continue;
            std::string ext = entry.path().extension().string();
            if (ext == ".pgm" || ext == ".ppm") paths.push_back(entry.path().string());
        }
        std::sort(paths.begin(), paths.end());
        if (paths.empty()) throw DataError("no .pgm/.ppm images in " + cfg.data_dir);
        for (const auto& p : paths) images.push_back(read_image<T>(p));
    }
    for (const auto& img : images) {
        if (img.c != cfg.model.channels)
            throw DataError("training image has " + std::to_string(img.c) +
                            " channels, model expects " + std::to_string(cfg.model.channels));
        if (img.h < cfg.patch_size || img.w < cfg.patch_size)
            throw DataError("training image " + img.shape_str() + " smaller than patch size " +
                            std::to_string(cfg.patch_size));
    }
    return images;
}

template <class T>
void crop_into(const TensorT<T>& src, int y0, int x0, TensorT<T>& patch) {
    for (int ch = 0; ch < src.c; ++ch)
        for (int y = 0; y < patch.h; ++y)
            for (int x = 0; x < patch.w; ++x)
                patch.at(0, ch, y, x) = src.at(0, ch, y0 + y, x0 + x);
}

template <class T>
double global_grad_norm(const std::vector<ParamRefT<T>>& params) {
    double sq = 0.0;
    for (const auto& p : params)
        for (const T& g : p.grad->data) sq += double(g) * double(g);
    return std::sqrt(sq);
}

}  // namespace

template <class T>
TrainResultT<T> train_model(const TrainConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    std::filesystem::create_directories(out_dir);

    std::vector<TensorT<T>> images = load_dataset<T>(cfg);
    std::vector<TensorT<T>> targets;
    targets.reserve(images.size());
    for (const auto& img : images) targets.push_back(apply_filter(img, cfg.filter));

    TrainResultT<T> result;
    result.model = PnenModelT<T>::seeded(cfg.model, cfg.seed);
    result.model.set_train_mode(true);
    auto params = result.model.parameters();
    AdamT<T> adam(params);
    PlateauSchedule sched{cfg.lr_init, cfg.lr_floor, cfg.plateau_patience, cfg.plateau_min_delta};

    Rng data_rng(cfg.seed, /*stream=*/0xBA7C4);

    result.csv_path = out_dir + "/loss.csv";
    std::ofstream csv(result.csv_path, std::ios::trunc);
    if (!csv) throw DataError("cannot write loss log: " + result.csv_path);
    csv << "step,epoch,lr,loss\n";

    const int p = cfg.patch_size;
    TensorT<T> batch_x(cfg.batch_size, cfg.model.channels, p, p);
    TensorT<T> batch_g(cfg.batch_size, cfg.model.channels, p, p);
    TensorT<T> patch_x(1, cfg.model.channels, p, p);
    TensorT<T> patch_g(1, cfg.model.channels, p, p);

    char line[160];
    int global_step = 0;
    double lr = sched.lr;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        double epoch_sum = 0.0;
        for (int step = 0; step < cfg.steps_per_epoch; ++step) {
            for (int b = 0; b < cfg.batch_size; ++b) {
                size_t idx = static_cast<size_t>(data_rng.below(images.size()));
                const TensorT<T>& img = images[idx];
                int y0 = static_cast<int>(data_rng.below(static_cast<uint64_t>(img.h - p + 1)));
                int x0 = static_cast<int>(data_rng.below(static_cast<uint64_t>(img.w - p + 1)));
                crop_into(img, y0, x0, patch_x);
                crop_into(targets[idx], y0, x0, patch_g);
                augment_pair(patch_x, patch_g, data_rng);
                for (int ch = 0; ch < patch_x.c; ++ch)
                    for (int y = 0; y < p; ++y)
                        for (int x = 0; x < p; ++x) {
                            batch_x.at(b, ch, y, x) = patch_x.at(0, ch, y, x);
                            batch_g.at(b, ch, y, x) = patch_g.at(0, ch, y, x);
                        }
            }

            ++global_step;
            double loss_value;
            try {
                TapeT<T> tape;
                VarT<T> input = make_var(batch_x);
                auto [fused, ys] = result.model.forward(tape, input);
                VarT<T> loss = pnen_loss(tape, fused, ys, batch_g);
                loss_value = double(loss.v().data[0]);
                result.model.zero_grads();
                tape.backward(loss);
            } catch (const NumericError&) {
                write_pnt(batch_x, out_dir + "/bad_batch_x.pnt");
                write_pnt(batch_g, out_dir + "/bad_batch_g.pnt");
                throw NumericError("train: non-finite loss at step " +
                                   std::to_string(global_step) + "; offending batch saved to " +
                                   out_dir + "/bad_batch_{x,g}.pnt");
            }

            if (cfg.clip_gradients) {
                double norm = global_grad_norm(params);
                if (norm > cfg.clip_norm) {
                    T scale = T(cfg.clip_norm / norm);
                    for (auto& pr : params)
                        for (T& g : pr.grad->data) g *= scale;
                }
            }
            adam.step(params, lr);

            std::snprintf(line, sizeof line, "%d,%d,%.9g,%.9g\n", global_step, epoch, lr,
                          loss_value);
            csv << line;
            result.step_losses.push_back(loss_value);
            epoch_sum += loss_value;
        }
        double epoch_loss = epoch_sum / double(cfg.steps_per_epoch);
        result.epoch_losses.push_back(epoch_loss);
        lr = sched.on_epoch_end(epoch_loss);
        if (cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0)
            save_checkpoint(result.model, out_dir + "/model_epoch" + std::to_string(epoch));
    }
    csv.close();

    result.final_lr = lr;
    result.checkpoint_base = out_dir + "/model";
    save_checkpoint(result.model, result.checkpoint_base);
    return result;
}

#define PNEN_TRAIN_INST(T)                                                                       \
    template class AdamT<T>;                                                                     \
    template TensorT<T> apply_augment<T>(const TensorT<T>&, const AugmentDraw&);                 \
    template void augment_pair<T>(TensorT<T>&, TensorT<T>&, Rng&);                              \
    template struct SynthSampleT<T>;                                                             \
    template SynthSampleT<T> synth_sample<T>(const SynthSpec&, uint64_t);                        \
    template std::vector<TensorT<T>> synth_textures<T>(const SynthSpec&, int, uint64_t);         \
    template TrainResultT<T> train_model<T>(const TrainConfig&, const std::string&);

PNEN_TRAIN_INST(float)
PNEN_TRAIN_INST(double)
#undef PNEN_TRAIN_INST

}  // namespace pnen
