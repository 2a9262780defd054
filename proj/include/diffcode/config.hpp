#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "diffcode/common.hpp"

namespace diffcode {

struct DataConfig {
    Index n_train = 24;
    Index n_val = 4;
    Index n_test = 8;
    Index image_size = 32;
    std::string dir;
};

struct ModelConfig {
    std::vector<Index> blocks{1, 1, 2, 2};
    std::vector<Index> channels{16, 32, 64, 64};
    Index latent_downsample = 8;
    Index code_dim = 32;
};

struct CodebookConfig {
    Index size = 256;
    Index depth = 8;
    bool single = false;       // one shared book instead of a per-task bank
    Index dead_steps = 200;    // reseed codes unused this many steps
    double commitment = 0.25;  // delta
};

struct DiffusionConfig {
    Index steps = 8;
    double beta_start = 0.1;
    double beta_end = 0.99;
    Index hidden = 128;
};

struct RoutingConfig {
    bool enabled = true;
    Index experts = 4;
    Index k = 1;
    double aux_weight = 0.1;
};

struct OptConfig {
    double lr_start = 2e-4;
    double lr_end = 1e-6;
    Index batch = 8;
    Index iters_stage1 = 400;
    Index iters_stage2 = 400;
    Index iters_stage3 = 400;
};

// Flat `key = value` run configuration. Serializes canonically so configs
// can be embedded in checkpoints and round-tripped.
struct RunConfig {
    Index stage = 1;
    std::uint64_t seed = 1234;
    std::vector<int> tasks{0, 1, 2};
    DataConfig data;
    ModelConfig model;
    CodebookConfig codebook;
    DiffusionConfig diffusion;
    RoutingConfig routing;
    OptConfig opt;
    std::string out_dir = "runs";
    double eval_peak = 1.0;

    void validate() const;
    void set_key(const std::string& key, const std::string& value);
    std::string to_text() const;
    // Reads DIFFCODE_SEED, DIFFCODE_DATA_DIR, DIFFCODE_OUT_DIR.
    void apply_env_overrides();

    static RunConfig from_text(const std::string& text);
    static RunConfig load(const std::string& path);
};

}  // namespace diffcode
