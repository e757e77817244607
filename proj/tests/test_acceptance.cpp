// Acceptance suite: one test per release criterion, each printing a
// [CRITERION] pass/fail line. Run through ctest (one entry per criterion) or
// directly: ./test_acceptance
#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "sodboost/sodboost.hpp"

using namespace sodboost;
namespace fs = std::filesystem;
using Td = Tensor<double>;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("sodboost_accept_" + name);
    fs::remove_all(p);
    return p;
}

std::vector<double> random_map(Rng& rng, int n) {
    std::vector<double> v(static_cast<size_t>(n));
    for (auto& x : v) x = rng.uniform(0.0, 1.0);
    return v;
}

std::vector<double> random_binary(Rng& rng, int n) {
    std::vector<double> v(static_cast<size_t>(n));
    for (auto& x : v) x = rng.bernoulli(0.5) ? 1.0 : 0.0;
    v.front() = 1.0;
    v.back() = 0.0;
    return v;
}

std::vector<uint8_t> file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::vector<uint8_t>(std::istreambuf_iterator<char>(in),
                                std::istreambuf_iterator<char>());
}

// Reduced architecture used where the criterion does not pin the size.
TrainConfig small_config() {
    TrainConfig cfg;
    cfg.detail_input_size = 32;
    cfg.semantic_input_size = 8;
    cfg.fusion_channels = 16;
    cfg.detail_width_base = 8;
    cfg.semantic_dim_base = 16;
    cfg.batch_size = 2;
    cfg.branches = 4;
    cfg.augment = false;
    cfg.seed = 9;
    return cfg;
}

}  // namespace

// --- criterion 1 -----------------------------------------------------------

TEST(Acceptance, Criterion1_GradientFidelity) {
    const std::vector<GradCheckRow> rows = run_gradcheck(20250810);
    ASSERT_GE(rows.size(), 12u);
    double worst = 0.0;
    for (const GradCheckRow& r : rows) {
        EXPECT_LE(r.max_err, 1e-4) << r.name;
        worst = std::max(worst, r.max_err);
    }
    std::printf("  gradient fidelity: %zu ops, worst relative error %.3e\n", rows.size(),
                worst);
    // The suite must include the composed fusion, decoder head and losses.
    std::map<std::string, bool> found;
    for (const auto& r : rows) found[r.name] = true;
    EXPECT_TRUE(found.count("af_fuse"));
    EXPECT_TRUE(found.count("decoder_mhb_head"));
    EXPECT_TRUE(found.count("bce_map"));
    EXPECT_TRUE(found.count("wbce"));
    EXPECT_TRUE(found.count("wiou"));
    EXPECT_TRUE(found.count("boost_loss"));
    EXPECT_TRUE(found.count("total_loss_fixed_weight"));
}

// --- criterion 2 -----------------------------------------------------------

TEST(Acceptance, Criterion2_LossIdentities) {
    Rng rng(2);
    const Shape s{1, 1, 8, 8};
    // wbce with unit weights equals the mean BCE map.
    {
        std::vector<double> pv(64), gv(64);
        for (auto& v : pv) v = rng.uniform(0.05, 0.95);
        for (auto& v : gv) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
        Td p = Td::from(s, pv), g = Td::from(s, gv);
        Td ones = Td::full(s, 1.0);
        EXPECT_NEAR(wbce(p, g, ones).value(), mean(bce_map(p, g)).value(), 1e-12);
    }
    // wiou(p,g,1) == 0 for p == g binary.
    {
        std::vector<double> gv(64);
        for (auto& v : gv) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
        gv[0] = 1.0;
        Td g = Td::from(s, gv);
        EXPECT_NEAR(wiou(g, g, Td::full(s, 1.0)).value(), 0.0, 1e-12);
    }
    // Half-coverage analytic value.
    {
        std::vector<double> gv(64, 0.0);
        for (int i = 0; i < 32; ++i) gv[static_cast<size_t>(i)] = 1.0;
        Td p = Td::full(s, 1.0);
        Td g = Td::from(s, gv);
        EXPECT_NEAR(wiou(p, g, Td::full(s, 1.0)).value(), 0.5, 1e-12);
    }
    // Boosting weight is 1 (up to clamp-epsilon terms) when every other
    // branch is exactly right.
    {
        std::vector<double> gv(64);
        for (auto& v : gv) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
        Td g = Td::from(s, gv);
        std::vector<Td> logits;
        for (int b = 0; b < 4; ++b) {
            std::vector<double> lv(64);
            for (int i = 0; i < 64; ++i) lv[static_cast<size_t>(i)] = gv[static_cast<size_t>(i)] > 0.5 ? 60.0 : -60.0;
            logits.push_back(Td::from(s, std::move(lv)));
        }
        Td w = boosting_weight(logits, 0, g);
        for (double v : w.values()) ASSERT_NEAR(v, 1.0, 1e-6);
    }
    // Three half-confident branches: 3 ln 2 + 1.
    {
        std::vector<double> gv(64);
        for (auto& v : gv) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
        Td g = Td::from(s, gv);
        std::vector<Td> logits(4, Td::zeros(s));
        Td w = boosting_weight(logits, 3, g);
        const double want = 3.0 * std::log(2.0) + 1.0;
        for (double v : w.values()) ASSERT_NEAR(v, want, 1e-12);
    }
    std::printf("  loss identities verified at 1e-12\n");
}

// --- criterion 3 -----------------------------------------------------------

TEST(Acceptance, Criterion3_BranchIsolation) {
    const fs::path corpus = scratch("isolation_corpus");
    generate_synthetic(corpus.string(), 4, 32, 31);
    TrainConfig cfg = small_config();
    cfg.max_steps = 100;
    cfg.seed = 31;
    Trainer<float> tr(cfg, load_manifest(corpus.string()));

    // Group the parameters exclusive to each branch.
    std::vector<std::vector<Parameter<float>*>> branch_params(4);
    std::vector<Parameter<float>*> trunk_params;
    for (auto& kv : tr.items().params) {
        bool owned = false;
        for (int b = 0; b < 4; ++b) {
            const std::string br = "mhb.br" + std::to_string(b + 1) + ".";
            const std::string hd = "mhb.hd" + std::to_string(b + 1) + ".";
            if (kv.first.rfind(br, 0) == 0 || kv.first.rfind(hd, 0) == 0) {
                branch_params[static_cast<size_t>(b)].push_back(kv.second);
                owned = true;
            }
        }
        if (!owned && kv.first.rfind("decoder.", 0) == 0) trunk_params.push_back(kv.second);
    }
    for (int b = 0; b < 4; ++b) ASSERT_FALSE(branch_params[static_cast<size_t>(b)].empty());

    std::array<std::array<int, 4>, 2> window_counts{};
    for (int step = 0; step < 100; ++step) {
        std::vector<std::vector<std::vector<float>>> before(4);
        for (int b = 0; b < 4; ++b) {
            for (auto* p : branch_params[static_cast<size_t>(b)]) {
                before[static_cast<size_t>(b)].push_back(p->value);
            }
        }
        std::vector<std::vector<float>> trunk_before;
        for (auto* p : trunk_params) trunk_before.push_back(p->value);

        const auto log = tr.step();
        const int selected = log.selected - 1;
        ASSERT_GE(selected, 0);
        ASSERT_LT(selected, 4);
        ++window_counts[static_cast<size_t>(step / 50)][static_cast<size_t>(selected)];

        for (int b = 0; b < 4; ++b) {
            if (b == selected) continue;
            size_t k = 0;
            for (auto* p : branch_params[static_cast<size_t>(b)]) {
                ASSERT_EQ(p->value, before[static_cast<size_t>(b)][k++])
                    << "step " << step << ": non-selected branch " << b + 1 << " moved ("
                    << p->name << ")";
            }
        }
        if (log.lr_backbone > 0.0) {
            bool selected_moved = false;
            size_t k = 0;
            for (auto* p : branch_params[static_cast<size_t>(selected)]) {
                selected_moved |= p->value != before[static_cast<size_t>(selected)][k++];
            }
            EXPECT_TRUE(selected_moved) << "selected branch frozen at step " << step;
            bool trunk_moved = false;
            k = 0;
            for (auto* p : trunk_params) trunk_moved |= p->value != trunk_before[k++];
            EXPECT_TRUE(trunk_moved) << "shared trunk frozen at step " << step;
        }
    }
    for (int w = 0; w < 2; ++w) {
        for (int b = 0; b < 4; ++b) {
            EXPECT_GE(window_counts[static_cast<size_t>(w)][static_cast<size_t>(b)], 1)
                << "branch " << b + 1 << " never selected in window " << w;
        }
    }
    std::printf("  isolation held for 100 steps; selections per 50-step window ok\n");
    fs::remove_all(corpus);
}

// --- criterion 4 -----------------------------------------------------------

TEST(Acceptance, Criterion4_InferenceRule) {
    Rng rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + static_cast<int>(rng.uniform_int(4));
        const int h = 2 + static_cast<int>(rng.uniform_int(6));
        const int w = 2 + static_cast<int>(rng.uniform_int(6));
        std::vector<Td> logits;
        for (int b = 0; b < n; ++b) {
            std::vector<double> v(static_cast<size_t>(h) * w);
            for (auto& x : v) x = rng.uniform(-5.0, 5.0);
            logits.push_back(Td::from({1, 1, h, w}, std::move(v)));
        }
        Td out = aggregate_inference(logits);
        // Scalar oracle per pixel.
        for (int64_t i = 0; i < out.size(); ++i) {
            double s = 0.0;
            std::vector<double> vals;
            for (const auto& l : logits) vals.push_back(l.values()[i]);
            std::sort(vals.begin(), vals.end());
            for (double v : vals) s += v;
            ASSERT_NEAR(out.values()[i], 1.0 / (1.0 + std::exp(-s)), 1e-12);
        }
        // Permutation leaves the output bit-identical.
        std::vector<Td> perm(logits.rbegin(), logits.rend());
        if (n >= 3) std::swap(perm[0], perm[1]);
        Td out2 = aggregate_inference(perm);
        for (int64_t i = 0; i < out.size(); ++i) {
            ASSERT_EQ(out.values()[i], out2.values()[i]);
        }
    }
    std::printf("  inference rule verified on 100 random cases\n");
}

// --- criterion 5 -----------------------------------------------------------

namespace reference {

// Independent S-measure: explicit region extraction and two-pass statistics,
// written separately from the library implementation.
double object_term(const std::vector<double>& pred, const std::vector<double>& mask) {
    std::vector<double> vals;
    for (size_t i = 0; i < pred.size(); ++i) {
        if (mask[i] > 0.5) vals.push_back(pred[i]);
    }
    if (vals.empty()) return 0.0;
    double m = 0;
    for (double v : vals) m += v;
    m /= static_cast<double>(vals.size());
    double var = 0;
    for (double v : vals) var += (v - m) * (v - m);
    const double sd = vals.size() > 1 ? std::sqrt(var / static_cast<double>(vals.size() - 1))
                                      : 0.0;
    return 2.0 * m / (m * m + 1.0 + sd + 2.2204460492503131e-16);
}

double ssim_region(const std::vector<double>& p, const std::vector<double>& g) {
    const auto n = static_cast<double>(p.size());
    if (p.empty()) return 0.0;
    double mp = 0, mg = 0;
    for (size_t i = 0; i < p.size(); ++i) {
        mp += p[i];
        mg += g[i];
    }
    mp /= n;
    mg /= n;
    double vp = 0, vg = 0, cov = 0;
    for (size_t i = 0; i < p.size(); ++i) {
        vp += (p[i] - mp) * (p[i] - mp);
        vg += (g[i] - mg) * (g[i] - mg);
        cov += (p[i] - mp) * (g[i] - mg);
    }
    const double div = p.size() > 1 ? n - 1.0 : 1.0;
    vp /= div;
    vg /= div;
    cov /= div;
    const double alpha = 4.0 * mp * mg * cov;
    const double beta = (mp * mp + mg * mg) * (vp + vg);
    if (alpha != 0.0) return alpha / (beta + 2.2204460492503131e-16);
    return beta == 0.0 ? 1.0 : 0.0;
}

double s_measure(const std::vector<double>& p, const std::vector<double>& g, int H, int W) {
    double gm = 0;
    for (double v : g) gm += v;
    gm /= static_cast<double>(g.size());
    double pm = 0;
    for (double v : p) pm += v;
    pm /= static_cast<double>(p.size());
    if (gm == 0.0) return 1.0 - pm;
    if (gm == 1.0) return pm;

    // object-aware part
    std::vector<double> fg(p.size()), bg(p.size()), ginv(p.size());
    for (size_t i = 0; i < p.size(); ++i) {
        fg[i] = g[i] > 0.5 ? p[i] : 0.0;
        bg[i] = g[i] > 0.5 ? 0.0 : 1.0 - p[i];
        ginv[i] = 1.0 - g[i];
    }
    const double so = gm * object_term(fg, g) + (1.0 - gm) * object_term(bg, ginv);

    // region-aware part: centroid with 1-based rounding, then 4 blocks
    double area = 0, sx = 0, sy = 0;
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const double v = g[static_cast<size_t>(y) * W + x];
            area += v;
            sx += v * (x + 1);
            sy += v * (y + 1);
        }
    }
    const int cx = static_cast<int>(std::lround(sx / area));
    const int cy = static_cast<int>(std::lround(sy / area));
    auto block = [&](const std::vector<double>& m, int y0, int y1, int x0, int x1) {
        std::vector<double> out;
        for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) out.push_back(m[static_cast<size_t>(y) * W + x]);
        }
        return out;
    };
    const double total = static_cast<double>(H) * W;
    const double w1 = cx * cy / total;
    const double w2 = (W - cx) * cy / total;
    const double w3 = cx * (H - cy) / total;
    const double w4 = 1.0 - w1 - w2 - w3;
    const double sr =
        w1 * ssim_region(block(p, 0, cy, 0, cx), block(g, 0, cy, 0, cx)) +
        w2 * ssim_region(block(p, 0, cy, cx, W), block(g, 0, cy, cx, W)) +
        w3 * ssim_region(block(p, cy, H, 0, cx), block(g, cy, H, 0, cx)) +
        w4 * ssim_region(block(p, cy, H, cx, W), block(g, cy, H, cx, W));
    return std::max(0.5 * so + 0.5 * sr, 0.0);
}

// Independent E-measure: explicit per-threshold binarization.
double e_measure(const std::vector<double>& p, const std::vector<double>& g) {
    const auto n = static_cast<double>(p.size());
    double best = 0.0;
    for (int t = 1; t <= 255; ++t) {
        std::vector<double> fm(p.size());
        for (size_t i = 0; i < p.size(); ++i) {
            int q = static_cast<int>(std::floor(255.0 * p[i]));
            q = std::clamp(q, 0, 255);
            fm[i] = q >= t ? 1.0 : 0.0;
        }
        double gm = 0, fmm = 0;
        for (size_t i = 0; i < p.size(); ++i) {
            gm += g[i];
            fmm += fm[i];
        }
        gm /= n;
        fmm /= n;
        double total = 0.0;
        double gsum = gm * n;
        if (gsum == 0.0) {
            for (size_t i = 0; i < p.size(); ++i) total += 1.0 - fm[i];
        } else if (gsum == n) {
            for (size_t i = 0; i < p.size(); ++i) total += fm[i];
        } else {
            for (size_t i = 0; i < p.size(); ++i) {
                const double dg = g[i] - gm, df = fm[i] - fmm;
                const double align =
                    2.0 * dg * df / (dg * dg + df * df + 2.2204460492503131e-16);
                total += (align + 1.0) * (align + 1.0) / 4.0;
            }
        }
        best = std::max(best, total / n);
    }
    return best;
}

}  // namespace reference

TEST(Acceptance, Criterion5_MetricsOracles) {
    Rng rng(5);
    // Exact agreement with brute-force confusion counting on 1000 instances.
    for (int trial = 0; trial < 1000; ++trial) {
        const std::vector<double> p = random_map(rng, 16 * 16);
        const std::vector<double> g = random_binary(rng, 16 * 16);

        // mae oracle
        double acc = 0;
        for (size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - g[i]);
        ASSERT_EQ(mae(p, g), acc / 256.0);

        // pr + f oracle
        const PrCurve fast = pr_curve(p, g);
        for (int t = 1; t <= 255; ++t) {
            int64_t tp = 0, fp = 0, fn = 0;
            for (size_t i = 0; i < p.size(); ++i) {
                int q = static_cast<int>(std::floor(255.0 * p[i]));
                q = std::clamp(q, 0, 255);
                const bool pred = q >= t;
                const bool truth = g[i] > 0.5;
                tp += pred && truth;
                fp += pred && !truth;
                fn += !pred && truth;
            }
            const double prec =
                (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 1.0;
            const double rec = static_cast<double>(tp) / static_cast<double>(tp + fn);
            ASSERT_EQ(fast[static_cast<size_t>(t - 1)].precision, prec);
            ASSERT_EQ(fast[static_cast<size_t>(t - 1)].recall, rec);
        }
        const auto [fmax, fmean] = f_measure(fast, 0.3);
        double omax = 0, osum = 0;
        for (const auto& pt : fast) {
            const double denom = 0.3 * pt.precision + pt.recall;
            const double f = denom == 0.0 ? 0.0 : 1.3 * pt.precision * pt.recall / denom;
            omax = std::max(omax, f);
            osum += f;
        }
        ASSERT_EQ(fmax, omax);
        ASSERT_EQ(fmean, osum / 255.0);
    }
    // Structure and alignment measures against the independent references.
    for (int trial = 0; trial < 200; ++trial) {
        const std::vector<double> p = random_map(rng, 16 * 16);
        const std::vector<double> g = random_binary(rng, 16 * 16);
        ASSERT_NEAR(s_measure(p, g, 16, 16), reference::s_measure(p, g, 16, 16), 1e-9);
        ASSERT_NEAR(e_measure(p, g), reference::e_measure(p, g), 1e-9);
    }
    // The beta^2 = 0.3 analytic spot value.
    ASSERT_DOUBLE_EQ(f_beta(1.0, 0.5, 0.3), 0.8125);
    std::printf("  metrics match oracles on 1000 PR instances and 200 S/E instances\n");
}

// --- criterion 6 -----------------------------------------------------------

TEST(Acceptance, Criterion6_ShapeContract) {
    Rng rng(6);
    {
        DetailBackbone<float> net;
        net.init(rng);
        SemanticBackbone<float> sem;
        SemanticConfig sc;
        sc.input_size = 56;
        sem.init(rng, sc);
        Ctx<float> ctx;
        std::vector<float> img(static_cast<size_t>(3) * 352 * 352, 0.3f);
        auto detail = net.forward(ctx, Tensor<float>::from({1, 3, 352, 352}, std::move(img)));
        std::vector<float> simg(static_cast<size_t>(3) * 56 * 56, 0.3f);
        auto semantic = sem.forward(ctx, Tensor<float>::from({1, 3, 56, 56}, std::move(simg)));
        const int want_detail[4] = {176, 88, 44, 22};
        const int want_semantic[4] = {28, 14, 7, 4};
        for (int i = 0; i < 4; ++i) {
            ASSERT_EQ(detail[static_cast<size_t>(i)].dim(2), want_detail[i]);
            ASSERT_EQ(detail[static_cast<size_t>(i)].dim(3), want_detail[i]);
            ASSERT_EQ(semantic[static_cast<size_t>(i)].dim(2), want_semantic[i]);
            ASSERT_EQ(semantic[static_cast<size_t>(i)].dim(3), want_semantic[i]);
        }
    }
    {
        DetailBackbone<float> net;
        net.init(rng);
        SemanticBackbone<float> sem;
        sem.init(rng);  // 16x16 toy input
        Ctx<float> ctx;
        std::vector<float> img(static_cast<size_t>(3) * 64 * 64, 0.3f);
        auto detail = net.forward(ctx, Tensor<float>::from({1, 3, 64, 64}, std::move(img)));
        std::vector<float> simg(static_cast<size_t>(3) * 16 * 16, 0.3f);
        auto semantic = sem.forward(ctx, Tensor<float>::from({1, 3, 16, 16}, std::move(simg)));
        const int want_detail[4] = {32, 16, 8, 4};
        const int want_semantic[4] = {8, 4, 2, 1};
        for (int i = 0; i < 4; ++i) {
            ASSERT_EQ(detail[static_cast<size_t>(i)].dim(2), want_detail[i]);
            ASSERT_EQ(semantic[static_cast<size_t>(i)].dim(2), want_semantic[i]);
        }
    }
    std::printf("  pyramid shapes hold at 352/56 and 64/16\n");
}

// --- criterion 7 -----------------------------------------------------------

TEST(Acceptance, Criterion7_OverfitSmoke) {
    const fs::path corpus = scratch("overfit_corpus");
    generate_synthetic(corpus.string(), 8, 64, 7007);
    TrainConfig cfg;  // toy defaults: 64/16 inputs, batch 4, 4 branches
    cfg.max_steps = 400;
    cfg.augment = false;
    cfg.seed = 7;
    Trainer<float> trainer(cfg, load_manifest(corpus.string()));
    const auto first = trainer.step();
    trainer.run(399, nullptr);
    EvalReport report =
        evaluate_model(trainer.model(), load_manifest(corpus.string()), cfg.detail_input_size);
    std::printf("  overfit: first loss %.3f, train meanF %.4f, MAE %.4f\n", first.total,
                report.f_mean, report.mae);
    EXPECT_GE(report.f_mean, 0.95);
    EXPECT_LE(report.mae, 0.05);
    fs::remove_all(corpus);
}

// --- criterion 8 -----------------------------------------------------------

TEST(Acceptance, Criterion8_AblationDirection) {
    const fs::path train_dir = scratch("ablate_train");
    const fs::path eval_dir = scratch("ablate_eval");
    generate_synthetic(train_dir.string(), 24, 64, 808);
    generate_synthetic(eval_dir.string(), 32, 64, 809);
    DatasetManifest train_data = load_manifest(train_dir.string());
    DatasetManifest eval_data = load_manifest(eval_dir.string());

    TrainConfig base;  // toy defaults
    base.max_steps = 240;
    base.augment = true;
    base.seed = 88;

    std::map<std::string, double> meanf;
    for (const std::string mode :
         {"detail-only", "semantic-only", "bilateral", "+af", "+bl"}) {
        AblationResult r = run_ablation<float>(mode, base, train_data, eval_data);
        meanf[mode] = r.report.f_mean;
        std::printf("  ablation %-13s meanF=%.4f mae=%.4f\n", mode.c_str(), r.report.f_mean,
                    r.report.mae);
    }
    EXPECT_GE(meanf["bilateral"], meanf["detail-only"]);
    EXPECT_GE(meanf["bilateral"], meanf["semantic-only"]);
    EXPECT_GE(meanf["+af"], meanf["bilateral"]);
    EXPECT_GE(meanf["+bl"], meanf["+af"]);
    fs::remove_all(train_dir);
    fs::remove_all(eval_dir);
}

// --- criterion 9 -----------------------------------------------------------

TEST(Acceptance, Criterion9_Determinism) {
    const fs::path corpus = scratch("determinism_corpus");
    generate_synthetic(corpus.string(), 4, 32, 99);
    TrainConfig cfg = small_config();
    cfg.max_steps = 24;
    cfg.augment = true;  // augmentation draws are part of the replayed stream
    cfg.seed = 12;

    const fs::path ck_a = scratch("determinism_a.ckpt");
    const fs::path ck_b = scratch("determinism_b.ckpt");
    const fs::path ck_mid = scratch("determinism_mid.ckpt");

    std::vector<double> uninterrupted;
    {
        Trainer<float> tr(cfg, load_manifest(corpus.string()));
        for (int i = 0; i < 24; ++i) {
            if (i == 12) tr.save(ck_mid.string());
            uninterrupted.push_back(tr.step().total);
        }
        tr.save(ck_a.string());
    }
    {
        Trainer<float> tr(cfg, load_manifest(corpus.string()));
        tr.run(24, nullptr);
        tr.save(ck_b.string());
    }
    EXPECT_EQ(file_bytes(ck_a.string()), file_bytes(ck_b.string()))
        << "identical runs must produce bit-identical checkpoints";

    {
        Trainer<float> tr(cfg, load_manifest(corpus.string()));
        tr.load(ck_mid.string());
        for (int i = 12; i < 24; ++i) {
            ASSERT_EQ(tr.step().total, uninterrupted[static_cast<size_t>(i)])
                << "resume diverged at step " << i;
        }
    }
    std::printf("  bit-identical checkpoints and exact resume for 12 steps\n");
    fs::remove_all(corpus);
    fs::remove(ck_a);
    fs::remove(ck_b);
    fs::remove(ck_mid);
}

namespace {

class CriterionPrinter : public ::testing::EmptyTestEventListener {
    void OnTestEnd(const ::testing::TestInfo& info) override {
        if (std::string(info.test_suite_name()) != "Acceptance") return;
        std::printf("[CRITERION] %s: %s\n", info.name(),
                    info.result()->Passed() ? "PASS" : "FAIL");
        std::fflush(stdout);
    }
};

}  // namespace

int main(int argc, char** argv) {
    ::testing::InitGoogleTest(&argc, argv);
    ::testing::UnitTest::GetInstance()->listeners().Append(new CriterionPrinter);
    return RUN_ALL_TESTS();
}
