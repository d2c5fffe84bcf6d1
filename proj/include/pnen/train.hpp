#ifndef PNEN_TRAIN_HPP_
#define PNEN_TRAIN_HPP_

#include <string>
#include <vector>

#include "pnen/filters.hpp"
#include "pnen/model.hpp"
#include "pnen/rng.hpp"

namespace pnen {

// --- optimizer -----------------------------------------------------------------

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Standard bias-corrected Adam. Moment buffers are shaped like their
// parameters; one state instance is bound to one parameter list.
template <class T>
class AdamT {
public:
    explicit AdamT(const std::vector<ParamRefT<T>>& params, AdamConfig cfg = {});

    // Applies one update from the gradients currently in the refs. Aborts
    // with NumericError on any non-finite gradient, leaving params untouched.
    void step(const std::vector<ParamRefT<T>>& params, double lr);

    int64_t t() const { return t_; }

private:
    AdamConfig cfg_;
    std::vector<TensorT<T>> m_, v_;
    int64_t t_ = 0;
};

template <class T>
void adam_step(const std::vector<ParamRefT<T>>& params, AdamT<T>& state, double lr) {
    state.step(params, lr);
}

// --- learning-rate schedule -------------------------------------------------------

// Halves the rate when the best training loss has not improved (relatively,
// by min_delta_rel) for `patience` epochs; clamps at lr_floor; never raises.
struct PlateauSchedule {
    double lr = 5e-4;
    double lr_floor = 1e-4;
    int patience = 5;
    double min_delta_rel = 1e-6;

    double best = 0.0;
    bool has_best = false;
    int stale = 0;

    double on_epoch_end(double epoch_loss);
};

// --- augmentation -----------------------------------------------------------------

struct AugmentDraw {
    bool hflip = false;
    int quarter_turns = 0;  // counter-clockwise 90-degree turns
};

AugmentDraw draw_augment(Rng& rng);  // hflip p=1/2, turns uniform in {0..3}

template <class T>
TensorT<T> apply_augment(const TensorT<T>& t, const AugmentDraw& draw);

// Applies one shared draw to an (input, target) pair.
template <class T>
void augment_pair(TensorT<T>& x, TensorT<T>& g, Rng& rng);

// --- synthetic textures --------------------------------------------------------------

// Piecewise-constant Voronoi regions with distinct gray levels plus additive
// band-limited noise texture. Deterministic per (spec, seed).
struct SynthSpec {
    int size = 128;
    int channels = 1;
    int regions = 4;              // each region gets its own level
    double texture_sigma = 0.02;  // std of the additive texture

    void validate() const;
};

template <class T>
struct SynthSampleT {
    TensorT<T> image;
    std::vector<int> labels;  // region id per pixel, row-major h*w
};

template <class T>
SynthSampleT<T> synth_sample(const SynthSpec& spec, uint64_t seed);

template <class T>
std::vector<TensorT<T>> synth_textures(const SynthSpec& spec, int count, uint64_t seed);

// --- training loop -----------------------------------------------------------------

struct TrainConfig {
    ModelConfig model;
    FilterSpec filter;
    SynthSpec synth;
    std::string data_dir;  // directory of .pgm/.ppm images; empty = synthetic
    int synth_count = 16;
    int patch_size = 96;
    int batch_size = 8;
    double lr_init = 5e-4;
    double lr_floor = 1e-4;
    int plateau_patience = 5;
    double plateau_min_delta = 1e-6;
    uint64_t seed = 1;
    int epochs = 20;
    int steps_per_epoch = 100;
    bool clip_gradients = false;  // off for reported numbers
    double clip_norm = 1.0;
    int checkpoint_every = 0;  // epochs between checkpoints; 0 = final only

    void validate() const;
};

template <class T>
struct TrainResultT {
    std::vector<double> step_losses;
    std::vector<double> epoch_losses;
    double final_lr = 0.0;
    std::string csv_path;
    std::string checkpoint_base;
    PnenModelT<T> model;
};

// Runs the full protocol: patch sampling -> augment -> forward -> loss ->
// backward -> adam -> plateau schedule. Writes <out_dir>/loss.csv and the
// checkpoint <out_dir>/model.{manifest,pnt}. Fully seeded-deterministic.
// A non-finite loss saves the offending batch to <out_dir>/bad_batch_*.pnt
// and aborts with NumericError.
template <class T>
TrainResultT<T> train_model(const TrainConfig& cfg, const std::string& out_dir);

#define PNEN_TRAIN_EXTERN(T)                                                                       \
    extern template class AdamT<T>;                                                                \
    extern template TensorT<T> apply_augment<T>(const TensorT<T>&, const AugmentDraw&);            \
    extern template void augment_pair<T>(TensorT<T>&, TensorT<T>&, Rng&);                          \
    extern template SynthSampleT<T> synth_sample<T>(const SynthSpec&, uint64_t);                   \
    extern template std::vector<TensorT<T>> synth_textures<T>(const SynthSpec&, int, uint64_t);    \
    extern template TrainResultT<T> train_model<T>(const TrainConfig&, const std::string&);

PNEN_TRAIN_EXTERN(float)
PNEN_TRAIN_EXTERN(double)
#undef PNEN_TRAIN_EXTERN

}  // namespace pnen

#endif  // PNEN_TRAIN_HPP_
