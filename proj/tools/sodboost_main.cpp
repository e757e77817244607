// Command-line front end: synthetic corpus generation, training, evaluation,
// single-image prediction, gradient verification, and the ablation harness.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sodboost/sodboost.hpp"

namespace fs = std::filesystem;
using namespace sodboost;

namespace {

std::vector<std::pair<std::string, std::string>> parse_overrides(
    const std::vector<std::string>& sets) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const std::string& kv : sets) {
        const size_t eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ConfigError("--set expects key=value, got '" + kv + "'");
        }
        out.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return out;
}

void prepare_out_dir(const std::string& out, const TrainConfig& cfg) {
    fs::create_directories(out);
    write_resolved_config(cfg, (fs::path(out) / "config_resolved.txt").string());
}

int cmd_gen_data(int n, int size, uint64_t seed, const std::string& out, bool force) {
    if (fs::exists(out) && !fs::is_empty(out) && !force) {
        throw IoError(out + ": output directory is not empty (use --force to overwrite)");
    }
    generate_synthetic(out, n, size, seed);
    std::cout << "wrote " << n << " samples of size " << size << " to " << out << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& data,
              const std::string& out, const std::vector<std::string>& sets,
              const std::string& resume) {
    const TrainConfig cfg = load_train_config(config_path, parse_overrides(sets));
    prepare_out_dir(out, cfg);
    DatasetManifest manifest = load_manifest(data);
    Trainer<float> trainer(cfg, manifest);
    if (!resume.empty()) trainer.load(resume);

    std::ofstream log((fs::path(out) / "log.csv").string(),
                      resume.empty() ? std::ios::trunc : std::ios::app);
    if (!log) throw IoError(out + ": cannot open training log");
    const int64_t total = trainer.total_steps();
    const int64_t remaining = total - trainer.current_step();
    std::cout << "training " << remaining << " steps (total " << total << ", "
              << manifest.size() << " samples)\n";
    Trainer<float>::StepLog last{};
    while (trainer.current_step() < total) {
        const int64_t chunk = std::min<int64_t>(cfg.log_every > 0 ? cfg.log_every : 50,
                                                total - trainer.current_step());
        last = trainer.run(chunk, &log);
        std::cout << "step " << last.step << "  lr=" << last.lr_backbone << "  X="
                  << last.selected << "  loss=" << last.total << "\n";
    }
    trainer.save((fs::path(out) / "final.ckpt").string());
    std::cout << "checkpoint: " << (fs::path(out) / "final.ckpt").string() << "\n";
    return 0;
}

template <typename F>
void with_model_from_checkpoint(const std::string& config_path,
                                const std::vector<std::string>& sets,
                                const std::string& ckpt, F&& fn) {
    const TrainConfig cfg = load_train_config(config_path, parse_overrides(sets));
    if (!fs::exists(ckpt)) throw IoError(ckpt + ": checkpoint not found");
    BilateralModel<float> model;
    Rng rng(cfg.seed);
    model.init(rng, cfg.model_config());
    ModuleItems<float> items;
    model.collect(items);
    load_checkpoint(ckpt, items);
    fn(cfg, model);
}

int cmd_eval(const std::string& config_path, const std::vector<std::string>& sets,
             const std::string& ckpt, const std::string& data, const std::string& out,
             bool save_maps, bool branch_maps, const std::string& pred_dir, bool adaptive_f) {
    EvalOptions mopts;
    mopts.adaptive_meanf = adaptive_f;
    if (!pred_dir.empty()) {
        // Score already-saved maps against the dataset masks.
        const TrainConfig cfg = load_train_config(config_path, parse_overrides(sets));
        prepare_out_dir(out, cfg);
        EvalReport report = evaluate_dir(pred_dir, (fs::path(data) / "masks").string(), mopts,
                                         &std::cerr);
        write_report_csv((fs::path(out) / "metrics.csv").string(), data, report);
        write_pr_csv((fs::path(out) / "pr_curve.csv").string(), report);
        std::cout << "mae=" << report.mae << " f_mean=" << report.f_mean << "\n";
        return 0;
    }
    int rc = 0;
    with_model_from_checkpoint(config_path, sets, ckpt, [&](const TrainConfig& cfg,
                                                            BilateralModel<float>& model) {
        prepare_out_dir(out, cfg);
        DatasetManifest manifest = load_manifest(data);
        EvalRunOptions opts;
        opts.metrics = mopts;
        if (save_maps) opts.save_maps_dir = (fs::path(out) / "maps").string();
        if (branch_maps) opts.save_branch_dir = (fs::path(out) / "branch_maps").string();
        EvalReport report = evaluate_model(model, manifest, cfg.detail_input_size, opts);
        write_report_csv((fs::path(out) / "metrics.csv").string(), data, report);
        write_pr_csv((fs::path(out) / "pr_curve.csv").string(), report);
        std::cout << "images=" << report.images << " mae=" << report.mae
                  << " f_max=" << report.f_max << " f_mean=" << report.f_mean
                  << " e=" << report.e_measure << " s=" << report.s_measure << "\n";
    });
    return rc;
}

int cmd_predict(const std::string& config_path, const std::vector<std::string>& sets,
                const std::string& ckpt, const std::string& image_path,
                const std::string& out) {
    int rc = 0;
    with_model_from_checkpoint(config_path, sets, ckpt, [&](const TrainConfig& cfg,
                                                            BilateralModel<float>& model) {
        prepare_out_dir(out, cfg);
        const ImageU8 img = read_pnm(image_path);
        require(img.channels == 3, image_path + ": predict expects a PPM image");
        Sample s;
        s.id = fs::path(image_path).stem().string();
        s.width = img.width;
        s.height = img.height;
        const size_t plane = static_cast<size_t>(img.width) * img.height;
        s.image.resize(3 * plane);
        for (size_t i = 0; i < plane; ++i) {
            for (int c = 0; c < 3; ++c) {
                s.image[static_cast<size_t>(c) * plane + i] =
                    static_cast<float>(img.pixels[i * 3 + static_cast<size_t>(c)]) / 255.0f;
            }
        }
        s.mask.assign(plane, 0.0f);
        Sample resized = resize_sample(s, cfg.detail_input_size, cfg.detail_input_size);
        auto [batch, mask_unused] = to_batch<float>({resized});
        (void)mask_unused;
        Tensor<float> pred = model.predict(batch);
        std::vector<double> p(pred.values().begin(), pred.values().end());
        p = trainer_detail::resize_plane_double<float>(p, cfg.detail_input_size,
                                                       cfg.detail_input_size, img.height,
                                                       img.width);
        const std::string map_path = (fs::path(out) / (s.id + ".pgm")).string();
        write_saliency_map(map_path, p, img.width, img.height);
        std::cout << "wrote " << map_path << "\n";
    });
    return rc;
}

int cmd_gradcheck(uint64_t seed) {
    const std::vector<GradCheckRow> rows = run_gradcheck(seed);
    bool all_pass = true;
    std::printf("%-28s %14s %6s  %s\n", "op", "max_rel_err", "n", "status");
    for (const GradCheckRow& r : rows) {
        std::printf("%-28s %14.3e %6d  %s\n", r.name.c_str(), r.max_err, r.components,
                    r.pass() ? "ok" : "FAIL");
        all_pass = all_pass && r.pass();
    }
    std::printf("%zu ops checked, tolerance %.0e: %s\n", rows.size(),
                GradChecker::kTolerance, all_pass ? "all passed" : "FAILURES above");
    if (!all_pass) {
        for (const GradCheckRow& r : rows) {
            if (!r.pass()) std::fprintf(stderr, "gradcheck failure: %s\n", r.name.c_str());
        }
    }
    return all_pass ? 0 : 1;
}

int cmd_ablate(const std::string& mode, const std::string& config_path,
               const std::vector<std::string>& sets, const std::string& data,
               const std::string& eval_data, const std::string& out) {
    const TrainConfig base = load_train_config(config_path, parse_overrides(sets));
    DatasetManifest train_data = load_manifest(data);
    DatasetManifest held_out = load_manifest(eval_data);

    const fs::path mode_dir = fs::path(out) / mode;
    fs::create_directories(mode_dir);
    AblationResult result;
    {
        std::ofstream log((mode_dir / "log.csv").string());
        result = run_ablation<float>(mode, base, train_data, held_out, &log);
    }
    write_resolved_config(result.config, (mode_dir / "config_resolved.txt").string());

    const fs::path table = fs::path(out) / "ablation.csv";
    const bool fresh = !fs::exists(table);
    std::ofstream csv(table.string(), std::ios::app);
    if (!csv) throw IoError(table.string() + ": cannot open ablation table");
    if (fresh) csv << "mode,images,mae,f_max,f_mean,e_measure,s_measure\n";
    csv << result.mode << ',' << result.report.images << ',' << result.report.mae << ','
        << result.report.f_max << ',' << result.report.f_mean << ','
        << result.report.e_measure << ',' << result.report.s_measure << '\n';
    std::cout << mode << ": mae=" << result.report.mae << " f_mean=" << result.report.f_mean
              << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bilateral CNN+transformer salient-object-detection toolkit"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic training corpus");
    int gen_n = 16, gen_size = 64;
    uint64_t gen_seed = 1;
    std::string gen_out;
    bool gen_force = false;
    gen->add_option("--n", gen_n, "number of samples")->check(CLI::PositiveNumber);
    gen->add_option("--size", gen_size, "square image size (multiple of 32)");
    gen->add_option("--seed", gen_seed, "corpus seed");
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_flag("--force", gen_force, "allow writing into a non-empty directory");

    // train
    auto* train = app.add_subcommand("train", "Train a model");
    std::string tr_config, tr_data, tr_out, tr_resume;
    std::vector<std::string> tr_sets;
    train->add_option("--config", tr_config, "key=value config file");
    train->add_option("--data", tr_data, "training corpus root")->required();
    train->add_option("--out", tr_out, "output directory")->required();
    train->add_option("--set", tr_sets, "override a config key (key=value)");
    train->add_option("--resume", tr_resume, "checkpoint to resume from");

    // eval
    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
    std::string ev_config, ev_ckpt, ev_data, ev_out, ev_pred;
    std::vector<std::string> ev_sets;
    bool ev_maps = false, ev_branch = false, ev_adaptive = false;
    ev->add_option("--config", ev_config, "key=value config file");
    ev->add_option("--ckpt", ev_ckpt, "checkpoint path");
    ev->add_option("--data", ev_data, "dataset root")->required();
    ev->add_option("--out", ev_out, "output directory")->required();
    ev->add_option("--set", ev_sets, "override a config key (key=value)");
    ev->add_option("--pred-dir", ev_pred,
                   "score saved saliency maps instead of running a checkpoint");
    ev->add_flag("--save-maps", ev_maps, "write per-image saliency maps");
    ev->add_flag("--branch-maps", ev_branch, "write per-branch prediction maps");
    ev->add_flag("--adaptive-meanf", ev_adaptive,
                 "mean F at the adaptive threshold instead of averaging 255 levels");

    // predict
    auto* pr = app.add_subcommand("predict", "Predict a saliency map for one image");
    std::string pr_config, pr_ckpt, pr_image, pr_out;
    std::vector<std::string> pr_sets;
    pr->add_option("--config", pr_config, "key=value config file");
    pr->add_option("--ckpt", pr_ckpt, "checkpoint path")->required();
    pr->add_option("--image", pr_image, "input PPM image")->required();
    pr->add_option("--out", pr_out, "output directory")->required();
    pr->add_option("--set", pr_sets, "override a config key (key=value)");

    // gradcheck
    auto* gcv = app.add_subcommand("gradcheck",
                                   "Verify every gradient against finite differences");
    uint64_t gc_seed = 1234;
    gcv->add_option("--seed", gc_seed, "sampling seed");

    // ablate
    auto* ab = app.add_subcommand("ablate", "Train and score one ablation variant");
    std::string ab_mode, ab_config, ab_data, ab_eval, ab_out;
    std::vector<std::string> ab_sets;
    ab->add_option("--mode", ab_mode,
                   "detail-only | semantic-only | bilateral | +af | +mhbN | +bl | aspp")
        ->required();
    ab->add_option("--config", ab_config, "key=value config file");
    ab->add_option("--data", ab_data, "training corpus root")->required();
    ab->add_option("--eval-data", ab_eval, "held-out corpus root")->required();
    ab->add_option("--out", ab_out, "output directory")->required();
    ab->add_option("--set", ab_sets, "override a config key (key=value)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(gen_n, gen_size, gen_seed, gen_out, gen_force);
        if (train->parsed()) return cmd_train(tr_config, tr_data, tr_out, tr_sets, tr_resume);
        if (ev->parsed()) {
            if (ev_pred.empty() && ev_ckpt.empty()) {
                std::cerr << "eval: either --ckpt or --pred-dir is required\n";
                return 2;
            }
            return cmd_eval(ev_config, ev_sets, ev_ckpt, ev_data, ev_out, ev_maps, ev_branch,
                            ev_pred, ev_adaptive);
        }
        if (pr->parsed()) return cmd_predict(pr_config, pr_sets, pr_ckpt, pr_image, pr_out);
        if (gcv->parsed()) return cmd_gradcheck(gc_seed);
        if (ab->parsed()) return cmd_ablate(ab_mode, ab_config, ab_sets, ab_data, ab_eval,
                                            ab_out);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
