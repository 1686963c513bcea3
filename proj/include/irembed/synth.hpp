// SPDX-License-Identifier: Apache-2.0
//
// Generator for small loop kernels in textual LLVM IR, and task bundles with
// planted structure: labels and runtimes depend on the kernel's family and
// size, so a learned head can beat chance by a known margin.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace irembed {

enum class KernelFamily { Stream, Poly, Transcend, Branchy, Reduce, Stencil };
inline constexpr int kNumKernelFamilies = 6;

std::string_view to_string(KernelFamily f);

enum class ElemType { F32, F64, I32 };

struct KernelSpec {
  std::string name;
  KernelFamily family = KernelFamily::Stream;
  ElemType elem = ElemType::F32;
  int work = 2;  // ops per element, 1..8
  std::uint64_t seed = 0;
};

/// A module with one kernel, one helper when the family calls one, and the
/// required declarations. Always parses and builds a graph.
std::string generate_kernel(const KernelSpec& spec);

/// Random kernel population: family, element type and work drawn per kernel.
std::vector<KernelSpec> sample_kernel_specs(std::size_t count, std::uint64_t seed,
                                            const std::string& prefix = "k", int max_work = 8);

/// Code-side affinity used by the planted labels; larger favours
/// throughput devices and wide configurations.
double kernel_intensity(const KernelSpec& spec);

/// Writes kernels/*.ll, manifest.jsonl (all kernels in the pretrain split)
/// and, per task, labels.csv plus runtimes.csv where the task has runtimes.
/// `task` is one of the downstream task names.
struct BundleOptions {
  std::string task = "devmap";
  std::size_t programs = 64;
  std::size_t samples_per_program = 4;
  std::uint64_t seed = 0;
  double label_noise = 0.25;
};

void write_bundle(const BundleOptions& options, const std::filesystem::path& dir);

/// Small corpus of generated kernels for pretraining smoke runs.
void write_toy_corpus(std::size_t count, std::uint64_t seed, const std::filesystem::path& dir,
                      int max_work = 8);

}  // namespace irembed
