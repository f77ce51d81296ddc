#pragma once

#include <memory>

#include "pairvc/model/losses.hpp"
#include "pairvc/model/vc_model.hpp"
#include "pairvc/train/dataset.hpp"

namespace pairvc::train {

struct StepRecord {
    int64_t step = 0;
    model::LossBreakdown losses;
    double wall_ms = 0.0;
    double grad_norm = 0.0;

    std::string to_json() const;
};

struct TrainOptions {
    int phase = 1;
    std::string manifest_path;
    std::string out_dir;
    std::string resume;  // phase-1 checkpoint starts phase 2; same-phase resumes
    int steps_override = -1;
    bool force = false;  // accept checkpoint config-hash mismatch
};

// Owns the model, both optimizers and the cached dataset for one phase.
// Steps are deterministic functions of (config seed, phase, step index), so a
// resumed run replays the exact StepRecord stream of an uninterrupted one.
class Trainer {
  public:
    Trainer(const cli::RunConfig& cfg, int phase);

    void load_data(const cli::Manifest& manifest);

    // Start-state control. resume_from applies a checkpoint per its phase tag
    // (same phase: params+optimizers, continue counting; previous phase:
    // params only, start at step 0).
    void resume_from(const std::string& checkpoint_path, bool force);

    StepRecord step();  // executes global step `steps_done()`
    int64_t steps_done() const { return step_; }

    void save(const std::string& path) const;
    void verify_frozen() const;  // throws on any drift since construction/load

    model::VcModel& model() { return model_; }
    const cli::RunConfig& config() const { return cfg_; }

  private:
    struct ItemView {
        const ItemCache* src;
        const ItemCache* tgt;
    };
    ItemView pick_item(size_t index) const;
    void capture_frozen_hashes();

    cli::RunConfig cfg_;
    int phase_;
    bool paired_;   // phase 1 with pair_mode == "paired"
    model::VcModel model_;
    std::unique_ptr<nn::Adam> g_opt_, d_opt_;
    Dataset data_;
    int64_t step_ = 0;
    std::vector<std::pair<std::string, uint64_t>> frozen_hashes_;
};

struct RunResult {
    std::string final_checkpoint;
    std::vector<StepRecord> records;
    std::vector<std::string> checkpoints;  // in save order, includes initial
};

// Full phase driver used by the CLI and tests: loads the manifest, restores
// or initializes state, runs to the step budget with cadence checkpoints and
// a JSONL log in out_dir, and always leaves an up-to-date `latest.bin`.
RunResult run_training(const cli::RunConfig& cfg, const TrainOptions& opt);

}  // namespace pairvc::train
