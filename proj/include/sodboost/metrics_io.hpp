#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include "sodboost/data/netpbm.hpp"
#include "sodboost/metrics.hpp"
#include "sodboost/resample.hpp"

namespace sodboost {

// Scores saved saliency maps against ground-truth masks: for every mask
// <stem>.pgm in gt_dir there must be a prediction <stem>.pgm in pred_dir.
// Predictions at a different size are resized to the mask size (noted on the
// log stream); samples with an empty mask are excluded from PR/F with a
// warning.
inline EvalReport evaluate_dir(const std::string& pred_dir, const std::string& gt_dir,
                               const EvalOptions& opts = {}, std::ostream* log = nullptr) {
    namespace fs = std::filesystem;
    std::vector<std::string> stems;
    for (const auto& entry : fs::directory_iterator(gt_dir)) {
        if (entry.path().extension() == ".pgm") stems.push_back(entry.path().stem().string());
    }
    std::sort(stems.begin(), stems.end());
    require(!stems.empty(), gt_dir + ": no .pgm masks found");

    ReportAccumulator acc;
    for (const std::string& stem : stems) {
        const fs::path pred_path = fs::path(pred_dir) / (stem + ".pgm");
        if (!fs::exists(pred_path)) {
            throw IoError(pred_path.string() + ": missing prediction for mask '" + stem + "'");
        }
        const ImageU8 gt = read_pnm((fs::path(gt_dir) / (stem + ".pgm")).string());
        const ImageU8 pm = read_pnm(pred_path.string());
        require(gt.channels == 1 && pm.channels == 1,
                stem + ": masks and predictions must be single-channel");

        std::vector<double> g(gt.pixels.size());
        for (size_t i = 0; i < g.size(); ++i) g[i] = gt.pixels[i] >= 128 ? 1.0 : 0.0;
        std::vector<double> p(pm.pixels.size());
        for (size_t i = 0; i < p.size(); ++i) p[i] = pm.pixels[i] / 255.0;

        if (pm.width != gt.width || pm.height != gt.height) {
            if (log) {
                *log << "note: resizing prediction '" << stem << "' from " << pm.width << "x"
                     << pm.height << " to " << gt.width << "x" << gt.height << "\n";
            }
            Tensor<double> t = Tensor<double>::from(Shape{1, 1, pm.height, pm.width},
                                                    std::move(p));
            p = bilinear_resize(t, gt.height, gt.width).values();
        }
        PerImageMetrics m = evaluate_pair(p, g, gt.height, gt.width, opts);
        if (!m.pr_valid && log) {
            *log << "warning: mask '" << stem
                 << "' has no foreground; excluded from PR/F averaging\n";
        }
        acc.add(m);
    }
    return acc.report();
}

// One row per dataset with named metric columns.
inline void write_report_csv(const std::string& path, const std::string& dataset_name,
                             const EvalReport& report) {
    std::ofstream out(path);
    if (!out) throw IoError(path + ": cannot write report");
    out << "dataset,images,mae,f_max,f_mean,e_measure,s_measure\n";
    out << dataset_name << ',' << report.images << ',' << std::setprecision(10) << report.mae
        << ',' << report.f_max << ',' << report.f_mean << ',' << report.e_measure << ','
        << report.s_measure << '\n';
    if (!out) throw IoError(path + ": write failed");
}

// 255 rows of (threshold, precision, recall) for plotting.
inline void write_pr_csv(const std::string& path, const EvalReport& report) {
    std::ofstream out(path);
    if (!out) throw IoError(path + ": cannot write PR curve");
    out << "threshold,precision,recall\n";
    for (size_t i = 0; i < report.pr.size(); ++i) {
        out << (i + 1) << ',' << std::setprecision(10) << report.pr[i].precision << ','
            << report.pr[i].recall << '\n';
    }
    if (!out) throw IoError(path + ": write failed");
}

}  // namespace sodboost
