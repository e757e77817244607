#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "sodboost/data/augment.hpp"
#include "sodboost/data/dataset.hpp"
#include "sodboost/losses.hpp"
#include "sodboost/metrics.hpp"
#include "sodboost/nn/model.hpp"
#include "sodboost/sgd.hpp"
#include "sodboost/train/checkpoint.hpp"
#include "sodboost/train/config.hpp"
#include "sodboost/train/schedule.hpp"

namespace sodboost {

// One training run: deterministic batch assembly, forward through both
// branches and the fusion/decoder stack, single-branch gradient routing,
// SGD with the warmup/cosine schedule, CSV step logging, and exact-resume
// checkpoints.
template <typename T = float>
class Trainer {
public:
    struct StepLog {
        int64_t step = 0;
        double lr_backbone = 0.0;
        int selected = 0;  // 1-based branch id, 0 for synchronized mode
        double total = 0.0;
        double boosted = 0.0;
        double aux_sum = 0.0;
    };

    Trainer(const TrainConfig& cfg, DatasetManifest data) : cfg_(cfg), data_(std::move(data)) {
        cfg_.validate();
        require(data_.size() > 0, "trainer: empty dataset");
        Rng master(cfg_.seed);
        Rng init_rng = master.fork(0x1111);
        data_rng_ = master.fork(0x2222);
        branch_rng_ = master.fork(0x3333);
        model_.init(init_rng, cfg_.model_config());
        model_.collect(items_);
        for (const auto& [name, p] : items_.params) {
            const bool backbone = name.rfind("detail.", 0) == 0 ||
                                  name.rfind("semantic.", 0) == 0;
            (backbone ? backbone_params_ : head_params_).push_back(p);
        }
    }

    BilateralModel<T>& model() { return model_; }
    ModuleItems<T>& items() { return items_; }
    const TrainConfig& config() const { return cfg_; }
    int64_t current_step() const { return static_cast<int64_t>(step_); }
    Rng& branch_rng() { return branch_rng_; }

    int64_t total_steps() const {
        if (cfg_.max_steps > 0) return cfg_.max_steps;
        const int64_t per_epoch =
            (data_.size() + cfg_.batch_size - 1) / cfg_.batch_size;
        return static_cast<int64_t>(cfg_.epochs) * per_epoch;
    }

    StepLog step() {
        const int64_t total = total_steps();
        require(static_cast<int64_t>(step_) < total, "trainer: run is already complete");

        // Batch target size first (one multi-scale draw per step), then the
        // per-sample draws, all from the data stream.
        int target = cfg_.detail_input_size;
        if (cfg_.augment) {
            const auto& scales = aug_.scales;
            const double s = scales[static_cast<size_t>(
                data_rng_.uniform_int(static_cast<int64_t>(scales.size())))];
            target = jittered_size(cfg_.detail_input_size, s);
        }
        std::vector<Sample> batch;
        batch.reserve(static_cast<size_t>(cfg_.batch_size));
        for (int b = 0; b < cfg_.batch_size; ++b) {
            const int idx = static_cast<int>(data_rng_.uniform_int(data_.size()));
            Sample s = load_sample(data_, idx);
            batch.push_back(cfg_.augment ? augment(s, data_rng_, aug_, target)
                                         : resize_sample(s, target, target));
        }
        auto [images, masks] = to_batch<T>(batch);

        Tape<T> tape;
        Ctx<T> ctx{&tape, /*training=*/true};
        typename BilateralModel<T>::Outputs out = model_.forward(ctx, images);

        StepLog log;
        log.step = static_cast<int64_t>(step_);
        LossBreakdown<T> breakdown;
        if (cfg_.aspp_sync) {
            // Synchronized multi-branch training: one unweighted loss on the
            // aggregated map back-propagates through every branch.
            breakdown = synchronized_loss(out, masks);
            log.selected = 0;
        } else {
            const int selected = select_branch(branch_rng_, cfg_.branches);
            const size_t nodes_before = tape.node_count();
            Tensor<T> weight = cfg_.boost_weights
                                   ? boosting_weight(out.branch_logits, selected, masks)
                                   : Tensor<T>::full(masks.shape(), T(1));
            require(tape.node_count() == nodes_before,
                    "boosting weight computation must not touch the training tape");
            breakdown = total_loss(out.aux_logits, out.branch_logits, selected, masks, weight);
            log.selected = selected + 1;
        }
        log.total = static_cast<double>(breakdown.total.value());
        log.boosted = static_cast<double>(breakdown.boosted.value());
        log.aux_sum = static_cast<double>(breakdown.aux_sum());
        if (!std::isfinite(log.total)) {
            std::ostringstream os;
            os << "non-finite training loss at step " << step_ << ": total=" << log.total
               << " boosted=" << log.boosted << " aux_sum=" << log.aux_sum
               << " (wbce=" << breakdown.boosted_wbce << ", wiou=" << breakdown.boosted_wiou
               << ")";
            throw TrainError(os.str());
        }

        tape.backward(breakdown.total);
        const LearningRates lr = lr_at(static_cast<int64_t>(step_), total, cfg_);
        log.lr_backbone = lr.backbone;
        if (lr.backbone > 0.0) {
            sgd_step<T>(backbone_params_, static_cast<T>(lr.backbone),
                        static_cast<T>(cfg_.momentum), static_cast<T>(cfg_.weight_decay));
            sgd_step<T>(head_params_, static_cast<T>(lr.heads), static_cast<T>(cfg_.momentum),
                        static_cast<T>(cfg_.weight_decay));
        } else {
            for (auto& kv : items_.params) kv.second->zero_grad();
        }
        ++step_;
        return log;
    }

    // Runs `steps` more steps (capped at the schedule end), appending CSV
    // rows "step,lr,X,total,boosted,aux_sum" to the log stream.
    StepLog run(int64_t steps, std::ostream* csv = nullptr) {
        StepLog last;
        if (csv && step_ == 0) *csv << "step,lr,X,total,boosted,aux_sum\n";
        const int64_t total = total_steps();
        for (int64_t i = 0; i < steps && static_cast<int64_t>(step_) < total; ++i) {
            last = step();
            if (csv) {
                *csv << last.step << ',' << std::setprecision(10) << last.lr_backbone << ','
                     << last.selected << ',' << std::setprecision(12) << last.total << ','
                     << last.boosted << ',' << last.aux_sum << '\n';
            }
        }
        if (csv) csv->flush();
        return last;
    }

    void save(const std::string& path) const {
        TrainerState st;
        st.step = step_;
        st.data_rng = data_rng_.state();
        st.branch_rng = branch_rng_.state();
        save_checkpoint(path, items_, st);
    }

    void load(const std::string& path) {
        const TrainerState st = load_checkpoint(path, items_);
        step_ = st.step;
        data_rng_.set_state(st.data_rng);
        branch_rng_.set_state(st.branch_rng);
    }

private:
    LossBreakdown<T> synchronized_loss(const typename BilateralModel<T>::Outputs& out,
                                       const Tensor<T>& masks) {
        LossBreakdown<T> breakdown;
        const Tensor<T> ones = Tensor<T>::full(masks.shape(), T(1));
        Tensor<T> total;
        for (const auto& logit : out.aux_logits) {
            Tensor<T> p = clamp_prob(sigmoid(logit));
            Tensor<T> li = add(wbce(p, masks, ones), wiou(p, masks, ones));
            breakdown.aux.push_back(li);
            total = total.defined() ? add(total, li) : li;
        }
        Tensor<T> agg = clamp_prob(sigmoid(sum_branches(out.branch_logits)));
        Tensor<T> lb_bce = wbce(agg, masks, ones);
        Tensor<T> lb_iou = wiou(agg, masks, ones);
        breakdown.boosted_wbce = lb_bce.value();
        breakdown.boosted_wiou = lb_iou.value();
        breakdown.boosted = add(lb_bce, lb_iou);
        breakdown.total = add(total, breakdown.boosted);
        return breakdown;
    }

    TrainConfig cfg_;
    DatasetManifest data_;
    BilateralModel<T> model_;
    ModuleItems<T> items_;
    std::vector<Parameter<T>*> backbone_params_, head_params_;
    Rng data_rng_, branch_rng_;
    uint64_t step_ = 0;
    AugmentConfig aug_;
};

struct EvalRunOptions {
    EvalOptions metrics;
    std::string save_maps_dir;    // write <stem>.pgm saliency maps when set
    std::string save_branch_dir;  // write <stem>_h<i>.pgm per-branch maps when set
};

namespace trainer_detail {

inline std::vector<double> tensor_plane_to_double(const std::vector<float>& v) {
    return std::vector<double>(v.begin(), v.end());
}

template <typename T>
std::vector<double> resize_plane_double(const std::vector<double>& p, int h, int w, int oh,
                                        int ow) {
    if (h == oh && w == ow) return p;
    std::vector<T> tmp(p.begin(), p.end());
    Tensor<T> t = Tensor<T>::from(Shape{1, 1, h, w}, std::move(tmp));
    Tensor<T> r = bilinear_resize(t, oh, ow);
    return std::vector<double>(r.values().begin(), r.values().end());
}

}  // namespace trainer_detail

// Deterministic model evaluation: per image, forward in eval mode, aggregate
// the branch logits, resize the saliency map back to the mask size and score
// it with the full metric suite.
template <typename T>
EvalReport evaluate_model(BilateralModel<T>& model, const DatasetManifest& data,
                          int input_size, const EvalRunOptions& opts = {}) {
    require(data.size() > 0, "evaluate_model: empty dataset");
    namespace fs = std::filesystem;
    if (!opts.save_maps_dir.empty()) fs::create_directories(opts.save_maps_dir);
    if (!opts.save_branch_dir.empty()) fs::create_directories(opts.save_branch_dir);

    ReportAccumulator acc;
    for (int i = 0; i < data.size(); ++i) {
        Sample raw = load_sample(data, i);
        Sample resized = resize_sample(raw, input_size, input_size);
        auto [image, mask_unused] = to_batch<T>({resized});
        (void)mask_unused;

        Ctx<T> ctx;  // eval mode, no tape
        typename BilateralModel<T>::Outputs out = model.forward(ctx, image);
        Tensor<T> pred = aggregate_inference(out.branch_logits);

        std::vector<double> p(pred.values().begin(), pred.values().end());
        p = trainer_detail::resize_plane_double<T>(p, input_size, input_size, raw.height,
                                                   raw.width);
        std::vector<double> g(raw.mask.begin(), raw.mask.end());
        acc.add(evaluate_pair(p, g, raw.height, raw.width, opts.metrics));

        if (!opts.save_maps_dir.empty()) {
            write_saliency_map((fs::path(opts.save_maps_dir) / (raw.id + ".pgm")).string(), p,
                               raw.width, raw.height);
        }
        if (!opts.save_branch_dir.empty()) {
            for (size_t b = 0; b < out.branch_logits.size(); ++b) {
                Tensor<T> bp = sigmoid(out.branch_logits[b]);
                std::vector<double> bpd(bp.values().begin(), bp.values().end());
                bpd = trainer_detail::resize_plane_double<T>(bpd, input_size, input_size,
                                                             raw.height, raw.width);
                write_saliency_map((fs::path(opts.save_branch_dir) /
                                    (raw.id + "_h" + std::to_string(b + 1) + ".pgm"))
                                       .string(),
                                   bpd, raw.width, raw.height);
            }
        }
    }
    return acc.report();
}

}  // namespace sodboost
