// Copyright (c) 2026 The coral Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "coral/backbone.hpp"
#include "coral/lora.hpp"

namespace coral {

// A synthetic task: a fixed random linear map obs -> action chunk, plus an
// instruction. Tasks come in conflict pairs that share an observation
// distribution and carry elementwise-negated target maps, so one parameter
// set cannot satisfy both.
struct TaskSpec {
  std::string task_id;
  std::string instruction_text;
  std::vector<std::uint32_t> tokens;       // length max_instr_len, padded
  Matrix target_map;                        // (H * d_a) x obs_dim
  std::vector<float> target_bias;           // H * d_a
  std::optional<std::uint32_t> conflict_group;
};

struct Episode {
  Instruction instruction;
  Observation observation;
  ActionChunk target;
};

struct TaskDataset {
  TaskSpec spec;
  std::vector<Episode> train;
  std::vector<Episode> eval;  // disjoint from train by episode index
};

// K tasks (K even) in K/2 conflict pairs. Within a pair the instructions
// share ceil((1 - d_tok) * max_instr_len) leading tokens and differ in every
// remaining position; d_tok = 1 gives fully distinct instructions, d_tok = 0
// identical ones (irreducible ambiguity). Deterministic per (config, seed).
std::vector<TaskDataset> make_conflict_suite(const BackboneConfig& config, std::size_t num_tasks,
                                             std::size_t episodes_per_task, double d_tok,
                                             std::uint64_t seed);

// Mean MSE over the eval split; expert (optional) is merged before scoring.
double eval_loss(const BackboneWeights& weights, const LoraExpert* expert,
                 const TaskDataset& dataset);

// Minimum loss any instruction-conditioned predictor can reach on an
// ambiguous (d_tok = 0) pair whose targets are exactly negated: the best
// prediction is 0, so the floor is the mean squared target over both eval
// splits. The analytic form is the same quantity in expectation over the
// observation distribution.
double empirical_bayes_floor(const TaskDataset& a, const TaskDataset& b);
double analytic_bayes_floor(const TaskSpec& spec);

// Suite export: one container file per task, "<task_id>.task" in dir.
void save_task(const TaskDataset& dataset, const std::filesystem::path& path);
TaskDataset load_task(const BackboneConfig& config, const std::filesystem::path& path);
void save_suite(const std::vector<TaskDataset>& suite, const std::filesystem::path& dir);

}  // namespace coral
