// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dgs/trainer.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace dgs::cli {

inline constexpr const char* kVersion = "0.1.0";

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;     // input / format errors
inline constexpr int kExitNumerical = 3; // numerical failures
inline constexpr int kExitDegenerate = 4; // degenerate geometry (split/fit)

struct FitDepthOptions {
    std::string scene_manifest;
    std::string out_dir = "priors";
    std::string weighting = "scaled_target"; // or "residual"
    std::vector<int> views;                  // empty = every camera in the model
};

struct TrainOptions {
    std::string scene_manifest;
    std::string out_dir = "run";
    int k = 2;
    std::string init = "points"; // or "unproject"
    int unproject_stride = 4;
    std::string weighting = "scaled_target";
    int checkpoint_interval = 0; // 0 disables periodic checkpoints
    bool no_depth = false;
    bool no_smooth = false;
    bool no_early_stop = false;
    TrainConfig config;
};

struct RenderOptions {
    std::string checkpoint;
    std::string model_dir;
    std::string out_dir = "renders";
    std::vector<int> views; // empty = every camera in the model
};

struct EvalOptions {
    std::vector<std::string> inputs; // metrics.csv files from train runs
    std::string out_csv = "results.csv";
    int expected_seeds = 0;
};

// Parsed command state; `chosen` names the selected subcommand.
struct CliState {
    int threads = 0;
    FitDepthOptions fit;
    TrainOptions train;
    RenderOptions render;
    EvalOptions eval;
};

// Registers every subcommand and flag on `app`. Exposed so tests can verify
// flag/help completeness without spawning a process.
void build_app(CLI::App& app, CliState& state);

void run_fit_depth(const FitDepthOptions& opts);
void run_train(const TrainOptions& opts);
void run_render(const RenderOptions& opts);
void run_eval(const EvalOptions& opts);

// Runs `body`, mapping thrown errors to the exit codes above (with a message
// on stderr). Shared by run() and exposed for direct testing.
int run_guarded(const std::function<void()>& body);

// Full entry point: parse, dispatch, map errors to exit codes.
int run(int argc, const char* const* argv);

} // namespace dgs::cli
