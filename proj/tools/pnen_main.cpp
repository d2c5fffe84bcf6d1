#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pnen/config.hpp"
#include "pnen/cost.hpp"
#include "pnen/gradcheck.hpp"
#include "pnen/image_io.hpp"
#include "pnen/metrics.hpp"
#include "pnen/train.hpp"

namespace fs = std::filesystem;
using namespace pnen;

namespace {

// Exit codes: 0 ok, 2 usage/config error, 3 data error, 4 numeric error.
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct ConfigArgs {
    std::string config_path;
    std::vector<std::pair<std::string, std::string>> overrides;
};

// Every config key doubles as a --key CLI override; schema and help text
// come from the same table.
void add_config_options(CLI::App* cmd, ConfigArgs& args) {
    cmd->add_option("--config", args.config_path, "key=value config file");
    for (const auto& key : config_schema()) {
        std::string name = key.name;
        cmd->add_option_function<std::string>(
               "--" + name,
               [&args, name](const std::string& v) { args.overrides.push_back({name, v}); },
               key.description + " (default " +
                   (key.default_value.empty() ? "\"\"" : key.default_value) + ")")
            ->expected(1);
    }
}

RunConfig resolve_config(const ConfigArgs& args) {
    RunConfig cfg;
    if (!args.config_path.empty()) cfg = load_config(args.config_path);
    for (const auto& [k, v] : args.overrides) apply_config_pair(cfg, k, v);
    cfg.train.synth.channels = cfg.train.model.channels;
    return cfg;
}

std::string fmt_db(double v) {
    if (std::isinf(v)) return "inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

int cmd_train(const ConfigArgs& cargs, const std::string& out_dir) {
    RunConfig cfg = resolve_config(cargs);
    cfg.validate();
    fs::create_directories(out_dir);
    std::ofstream(out_dir + "/config.txt") << render_config(cfg);
    double final_loss = 0.0;
    std::string csv, ckpt;
    if (cfg.dtype == "f32") {
        auto result = train_model<float>(cfg.train, out_dir);
        final_loss = result.epoch_losses.back();
        csv = result.csv_path;
        ckpt = result.checkpoint_base;
    } else {
        auto result = train_model<double>(cfg.train, out_dir);
        final_loss = result.epoch_losses.back();
        csv = result.csv_path;
        ckpt = result.checkpoint_base;
    }
    std::printf("trained %d epochs x %d steps, final epoch loss %.9g\n", cfg.train.epochs,
                cfg.train.steps_per_epoch, final_loss);
    std::printf("loss log: %s\ncheckpoint: %s.{manifest,pnt}\n", csv.c_str(), ckpt.c_str());
    return 0;
}

template <class T>
int infer_with(const std::string& ckpt, const std::vector<std::string>& inputs,
               const std::string& out_dir) {
    auto model = load_checkpoint<T>(ckpt);
    fs::create_directories(out_dir);
    for (const auto& path : inputs) {
        TensorT<T> img = read_image<T>(path);
        TensorT<T> out = model.infer(img);
        std::string dst = (fs::path(out_dir) / fs::path(path).filename()).string();
        write_image(out, dst);
        std::printf("%s -> %s\n", path.c_str(), dst.c_str());
    }
    return 0;
}

int cmd_infer(const std::string& ckpt, const std::vector<std::string>& inputs,
              const std::string& out_dir) {
    if (checkpoint_dtype(ckpt) == "f32") return infer_with<float>(ckpt, inputs, out_dir);
    return infer_with<double>(ckpt, inputs, out_dir);
}

template <class T>
int eval_with(const RunConfig& cfg, const std::string& ckpt, const std::string& data_dir,
              int val_count, uint64_t val_seed, const std::string& out_csv) {
    auto model = load_checkpoint<T>(ckpt);
    std::vector<std::pair<std::string, TensorT<T>>> images;
    if (!data_dir.empty()) {
        std::vector<std::string> paths;
        for (const auto& e : fs::directory_iterator(data_dir)) {
            if (!e.is_regular_file()) continue;
            std::string ext = e.path().extension().string();
            if (ext == ".pgm" || ext == ".ppm") paths.push_back(e.path().string());
        }
        std::sort(paths.begin(), paths.end());
        if (paths.empty()) throw DataError("no .pgm/.ppm images in " + data_dir);
        for (const auto& p : paths) images.push_back({fs::path(p).filename().string(),
                                                      read_image<T>(p)});
    } else {
        SynthSpec spec = cfg.train.synth;
        spec.channels = model.cfg.channels;
        auto synth = synth_textures<T>(spec, val_count, val_seed);
        for (int i = 0; i < val_count; ++i)
            images.push_back({"synth-" + std::to_string(i), std::move(synth[static_cast<size_t>(i)])});
    }
    std::ofstream csv(out_csv, std::ios::trunc);
    if (!csv) throw DataError("cannot write eval csv: " + out_csv);
    csv << "image,psnr,ssim\n";
    double psnr_sum = 0.0, ssim_sum = 0.0;
    int finite_count = 0;
    for (auto& [name, img] : images) {
        TensorT<T> target = apply_filter(img, cfg.train.filter);
        TensorT<T> out = model.infer(img);
        double p = psnr(out, target, 1.0);
        double s = ssim(out, target, 1.0);
        csv << name << "," << fmt_db(p) << "," << fmt_db(s) << "\n";
        if (std::isfinite(p)) {
            psnr_sum += p;
            ++finite_count;
        }
        ssim_sum += s;
    }
    std::printf("evaluated %zu images against %s targets -> %s\n", images.size(),
                cfg.train.filter.describe().c_str(), out_csv.c_str());
    if (finite_count > 0)
        std::printf("mean psnr %.4f dB, mean ssim %.5f\n", psnr_sum / finite_count,
                    ssim_sum / double(images.size()));
    return 0;
}

int cmd_eval(const ConfigArgs& cargs, const std::string& ckpt, const std::string& data_dir,
             int val_count, uint64_t val_seed, const std::string& out_csv) {
    RunConfig cfg = resolve_config(cargs);
    if (checkpoint_dtype(ckpt) == "f32")
        return eval_with<float>(cfg, ckpt, data_dir, val_count, val_seed, out_csv);
    return eval_with<double>(cfg, ckpt, data_dir, val_count, val_seed, out_csv);
}

int cmd_bench(const ConfigArgs& cargs, int height, int width, int dtype_bytes,
              const std::string& out_csv, bool full_tables) {
    RunConfig cfg = resolve_config(cargs);
    ModelConfig mc = cfg.train.model;
    mc.validate();

    const NlVariant variants[] = {NlVariant::none, NlVariant::nlb, NlVariant::apnb,
                                  NlVariant::pnb};
    std::vector<CostReport> reports;
    for (NlVariant v : variants) reports.push_back(count_costs(mc, v, height, width, dtype_bytes));

    if (full_tables)
        for (const auto& r : reports) std::printf("%s\n", r.render_table().c_str());

    std::printf("# variant comparison on %dx%d (d=%d m=%d n=%d M=%d)\n", height, width, mc.d,
                mc.m, mc.n, mc.blocks);
    std::printf("%-6s %16s %16s %12s %16s %18s %16s\n", "nl", "macs", "flops", "params",
                "attn_flops", "attn_mem_bytes", "attn_elems");
    for (size_t i = 0; i < reports.size(); ++i) {
        const auto& r = reports[i];
        std::printf("%-6s %16lld %16lld %12lld %16lld %18lld %16lld\n",
                    nl_variant_name(variants[i]), (long long)r.total_macs(),
                    (long long)r.total_flops(), (long long)r.total_params(),
                    (long long)r.attention_flops(),
                    (long long)(r.attention_mem_elems * r.dtype_bytes),
                    (long long)r.total_attn_elems());
    }
    const CostReport& nlb = reports[1];
    const CostReport& apnb = reports[2];
    const CostReport& pnb = reports[3];
    std::printf("pnb/nlb attention-element ratio: %.6f\n",
                double(pnb.total_attn_elems()) / double(nlb.total_attn_elems()));
    std::printf("pnb/nlb attention-memory ratio: %.1f%%\n",
                100.0 * double(pnb.attention_mem_elems) / double(nlb.attention_mem_elems));
    bool ordered = apnb.attention_flops() < pnb.attention_flops() &&
                   pnb.attention_flops() < nlb.attention_flops();
    std::printf("attention cost ordering apnb < pnb < nlb: %s\n", ordered ? "yes" : "NO");

    if (!out_csv.empty()) {
        std::ofstream csv(out_csv, std::ios::trunc);
        if (!csv) throw DataError("cannot write bench csv: " + out_csv);
        for (const auto& r : reports) csv << "# " << r.title << "\n" << r.render_csv() << "\n";
        std::printf("per-layer tables: %s\n", out_csv.c_str());
    }
    return 0;
}

int cmd_gradcheck(uint64_t seed) {
    auto results = run_gradcheck_suite(seed);
    bool all_pass = true;
    for (const auto& r : results) {
        std::printf("[%s] %-18s max_rel_err %.3e (tol %.0e)\n", r.pass ? "PASS" : "FAIL",
                    r.name.c_str(), r.max_rel_err, r.tolerance);
        all_pass = all_pass && r.pass;
    }
    return all_pass ? 0 : kExitNumeric;
}

template <class T>
int dump_attn_with(const std::string& ckpt, const std::string& image_path, int qy, int qx,
                   const std::string& out_dir) {
    auto model = load_checkpoint<T>(ckpt);
    TensorT<T> img = read_image<T>(image_path);
    auto dumps = model.attention_dumps(img, qy, qx);
    fs::create_directories(out_dir);
    for (const auto& d : dumps) {
        std::string prefix = out_dir + "/attn_scale" + std::to_string(d.scale) + "_stride" +
                             std::to_string(d.stride);
        write_attention_dump(d, prefix);
        std::printf("scale %d (stride %d): %s.pgm %s.txt\n", d.scale, d.stride, prefix.c_str(),
                    prefix.c_str());
    }
    return 0;
}

int cmd_dump_attn(const std::string& ckpt, const std::string& image_path,
                  const std::string& pixel, const std::string& out_dir) {
    size_t comma = pixel.find(',');
    if (comma == std::string::npos)
        throw ConfigError("--pixel expects 'y,x', got '" + pixel + "'");
    int qy = 0, qx = 0;
    try {
        qy = std::stoi(pixel.substr(0, comma));
        qx = std::stoi(pixel.substr(comma + 1));
    } catch (const std::exception&) {
        throw ConfigError("--pixel expects 'y,x', got '" + pixel + "'");
    }
    if (checkpoint_dtype(ckpt) == "f32")
        return dump_attn_with<float>(ckpt, image_path, qy, qx, out_dir);
    return dump_attn_with<double>(ckpt, image_path, qy, qx, out_dir);
}

int cmd_synth_data(const ConfigArgs& cargs, int count, const std::string& out_dir) {
    RunConfig cfg = resolve_config(cargs);
    SynthSpec spec = cfg.train.synth;
    spec.channels = cfg.train.model.channels;
    spec.validate();
    if (count < 1) throw ConfigError("synth-data: --count must be >= 1");
    fs::create_directories(out_dir);
    auto images = synth_textures<double>(spec, count, cfg.train.seed);
    const char* ext = spec.channels == 1 ? ".pgm" : ".ppm";
    for (int i = 0; i < count; ++i) {
        char name[64];
        std::snprintf(name, sizeof name, "synth_%04d%s", i, ext);
        write_image(images[static_cast<size_t>(i)], (fs::path(out_dir) / name).string());
    }
    std::printf("wrote %d %dx%d images (seed %" PRIu64 ") to %s\n", count, spec.size, spec.size,
                cfg.train.seed, out_dir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pyramid non-local enhanced networks for edge-preserving image smoothing"};
    app.require_subcommand(1);

    ConfigArgs train_cfg;
    std::string train_out = "runs/train";
    auto* train = app.add_subcommand("train", "train a model to imitate an oracle filter");
    add_config_options(train, train_cfg);
    train->add_option("--out", train_out, "output directory (loss.csv, checkpoint)");

    std::string infer_ckpt, infer_out = "runs/infer";
    std::vector<std::string> infer_inputs;
    auto* infer = app.add_subcommand("infer", "run a checkpoint on images");
    infer->add_option("--checkpoint", infer_ckpt, "checkpoint base path (without extension)")
        ->required();
    infer->add_option("--out", infer_out, "output directory");
    infer->add_option("images", infer_inputs, "input .pgm/.ppm images")->required();

    ConfigArgs eval_cfg;
    std::string eval_ckpt, eval_data, eval_out = "eval.csv";
    int eval_count = 8;
    uint64_t eval_seed = 9000;
    auto* eval_cmd = app.add_subcommand("eval", "PSNR/SSIM against oracle-filtered targets");
    add_config_options(eval_cmd, eval_cfg);
    eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint base path")->required();
    eval_cmd->add_option("--data", eval_data, "image directory (default: synthetic validation)");
    eval_cmd->add_option("--val-count", eval_count, "synthetic validation image count");
    eval_cmd->add_option("--val-seed", eval_seed, "synthetic validation seed");
    eval_cmd->add_option("--out", eval_out, "output CSV path");

    ConfigArgs bench_cfg;
    int bench_h = 96, bench_w = 96, bench_bytes = 4;
    bool bench_full = false;
    std::string bench_csv;
    auto* bench = app.add_subcommand("bench", "analytic FLOPs/memory for none/nlb/apnb/pnb");
    add_config_options(bench, bench_cfg);
    bench->add_option("--height", bench_h, "input height (default 96)");
    bench->add_option("--width", bench_w, "input width (default 96)");
    bench->add_option("--dtype-bytes", bench_bytes, "bytes per activation element (default 4)");
    bench->add_flag("--full", bench_full, "print full per-layer tables");
    bench->add_option("--csv", bench_csv, "write per-layer tables to this CSV file");

    uint64_t gc_seed = 42;
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient checks");
    gradcheck->add_option("--seed", gc_seed, "rng seed (default 42)");

    std::string da_ckpt, da_image, da_pixel, da_out = "runs/attn";
    auto* dump_attn = app.add_subcommand("dump-attn", "per-scale correlation maps of one pixel");
    dump_attn->add_option("--checkpoint", da_ckpt, "checkpoint base path")->required();
    dump_attn->add_option("--image", da_image, "input image")->required();
    dump_attn->add_option("--pixel", da_pixel, "query pixel as y,x")->required();
    dump_attn->add_option("--out", da_out, "output directory");

    ConfigArgs synth_cfg;
    int synth_count = 16;
    std::string synth_out = "runs/synth";
    auto* synth = app.add_subcommand("synth-data", "generate synthetic texture images");
    add_config_options(synth, synth_cfg);
    synth->add_option("--count", synth_count, "number of images (default 16)");
    synth->add_option("--out", synth_out, "output directory");

    try {
        app.parse(argc, argv);
        if (app.got_subcommand(train)) return cmd_train(train_cfg, train_out);
        if (app.got_subcommand(infer)) return cmd_infer(infer_ckpt, infer_inputs, infer_out);
        if (app.got_subcommand(eval_cmd))
            return cmd_eval(eval_cfg, eval_ckpt, eval_data, eval_count, eval_seed, eval_out);
        if (app.got_subcommand(bench))
            return cmd_bench(bench_cfg, bench_h, bench_w, bench_bytes, bench_csv, bench_full);
        if (app.got_subcommand(gradcheck)) return cmd_gradcheck(gc_seed);
        if (app.got_subcommand(dump_attn))
            return cmd_dump_attn(da_ckpt, da_image, da_pixel, da_out);
        if (app.got_subcommand(synth)) return cmd_synth_data(synth_cfg, synth_count, synth_out);
        std::fprintf(stderr, "error: no subcommand\n");
        return kExitUsage;
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const DataError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
