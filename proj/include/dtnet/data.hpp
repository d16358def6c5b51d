#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dtnet/tensor.hpp"

namespace dtnet {

// One materialized batch: pixels in [0,1], main labels, and the applied
// rotation class per sample (0..3 meaning k * 90 degrees counter-clockwise).
struct ImageBatch {
  Tensor pixels;  // [N, C, H, W]
  std::vector<int> labels_main;
  std::vector<int> labels_aux;

  int size() const { return pixels.defined() ? pixels.dim(0) : 0; }
};

// Compact dataset storage: 8-bit pixels in [N, C, H, W] order plus labels.
// Batches materialize on demand as 64-bit tensors scaled by 1/255.
struct Dataset {
  int height = 0;
  int width = 0;
  int channels = 0;
  int num_classes = 0;
  std::vector<std::uint8_t> pixels;  // N * C * H * W
  std::vector<std::uint16_t> labels;

  int size() const { return static_cast<int>(labels.size()); }
  // Materializes samples [start, start+count) with aux labels all zero.
  ImageBatch batch(int start, int count) const;
};

struct CorruptionSpec {
  int severity = 1;      // 1..5
  double sigma = -1.0;   // when >= 0, overrides the severity table

  double effective_sigma() const;
};

// Additive Gaussian noise std per severity level; level 1 is 0.04.
double sigma_for_severity(int severity);

struct SynthSpec {
  int num_classes = 2;
  int num_samples = 256;
  int height = 16;
  int width = 16;
  int channels = 3;
  double margin = 1.0;  // foreground/background contrast in (0,1]
  std::uint64_t seed = 0;
};

// Seeded generator of small oriented-glyph images. Glyph shapes are
// rotation-asymmetric so the rotation class of an augmented sample is
// recoverable, while the class identity is preserved under rotation.
Dataset synth_dataset(const SynthSpec& spec);

enum class CifarVariant { Cifar10, Cifar100 };

// Canonical CIFAR binary layout: 3073-byte records (label + 3x1024 channel
// planes) for CIFAR-10, 3074-byte records (coarse + fine label + planes) for
// CIFAR-100. Concatenated batch files load as one dataset.
Dataset load_cifar_binary(const std::string& path, CifarVariant variant);
void save_cifar_binary(const std::string& path, const Dataset& data,
                       CifarVariant variant);

// Raw corrupted-set container: magic "DTC1", u32 N,H,W,C (little-endian),
// N*H*W*C pixel bytes in [N,H,W,C] order, then N u16 labels.
Dataset load_dtc1(const std::string& path);
void save_dtc1(const std::string& path, const Dataset& data);

// clip(x + noise) with i.i.d. Gaussian noise; each sample uses its own
// seed-derived substream so results are independent of batch order.
// sample_index_base is the global index of the batch's first sample.
ImageBatch corrupt(const ImageBatch& batch, const CorruptionSpec& spec,
                   std::uint64_t seed, std::int64_t sample_index_base = 0);

// Rotates each sample by its k * 90 degrees counter-clockwise (H must
// equal W) without touching labels_aux.
ImageBatch rotate90(const ImageBatch& batch, const std::vector<int>& k);

// Per-sample uniform rotation choice; sets labels_aux to the chosen k.
ImageBatch rotate_and_label(const ImageBatch& batch, std::uint64_t seed,
                            std::int64_t sample_index_base = 0);

// Seeded shuffle split into disjoint, exhaustive train/validation parts.
void split_train_val(const Dataset& data, double fraction, std::uint64_t seed,
                     Dataset& train, Dataset& val);

}  // namespace dtnet
