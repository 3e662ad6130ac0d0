#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fedscope::synthdata {

// Shape and randomness of one synthetic dataset: `groups` crop groups, each
// with its own disease list, square grayscale images in [0, 1].
struct DatasetSpec {
  int groups = 4;
  std::vector<int> diseases_per_group = {3, 3, 3, 3};
  int samples_per_class = 300;
  int side = 16;
  double margin = 0.5;   // separation between class prototypes
  double noise = 0.45;   // per-pixel Gaussian noise scale
  std::uint64_t seed = 0;

  void validate() const;
  int total_classes() const;                   // sum over diseases_per_group
  int flat_class(int group, int disease) const;
  int pixel_count() const { return side * side; }
  std::int64_t total_samples() const;
};

struct Sample {
  std::int64_t id = 0;          // stable generation index, never reassigned
  std::vector<float> pixels;    // stored at file precision so memory == disk
  int group = 0;
  int disease = 0;              // index within the group
  int flat = 0;                 // global class index
};

struct Dataset {
  DatasetSpec spec;
  std::vector<Sample> samples;
};

Dataset generate(const DatasetSpec& spec);

// Index lists into Dataset::samples, disjoint and exhaustive, stratified per
// flat class. Fractions must sum to 1; every class needs at least 3 samples.
struct Split {
  std::vector<std::int32_t> train;
  std::vector<std::int32_t> val;
  std::vector<std::int32_t> test;
};

Split split(const Dataset& dataset, std::uint64_t seed, double train_frac = 0.70,
            double val_frac = 0.15, double test_frac = 0.15);

struct ClientShard {
  int client_id = 0;
  std::vector<std::int32_t> indices;  // into Dataset::samples, within train
};

struct PartitionResult {
  std::vector<ClientShard> shards;
  std::vector<std::string> warnings;  // e.g. more clients than class samples
};

PartitionResult partition(const Dataset& dataset, const std::vector<std::int32_t>& train,
                          int n_clients, std::uint64_t seed);

// Constants behind the five evaluation-time degradations. Kept adjustable so
// tests can switch individual stochastic parts off.
struct CorruptionRecipe {
  double uc1_contrast = 1.2;     // gain about mid-gray
  double uc1_brightness = 0.1;
  int uc1_max_shear = 3;         // shear factor drawn from [-max, max]
  double uc2_brightness = -0.15;
  double uc2_contrast = 0.8;
  double uc2_sigma = 0.05;       // additive Gaussian noise
  int uc4_levels = 16;           // uniform quantization levels
  double uc4_cast = 0.05;        // global intensity cast drawn from [-cast, cast]
  double uc5_max_shift = 0.25;   // translation bound as a fraction of side
};

// use_case is 1..5:
//   1 harsh lighting and oblique view: contrast up, brightness up, row shear
//   2 dim sensor: brightness down, contrast down, Gaussian noise
//   3 mild blur: 3x3 box filter
//   4 recompression: 16-level quantization plus a global intensity cast
//   5 off-center framing: translation up to a quarter of the side length
// Deterministic given (image, use_case, seed); output clamped to [0, 1].
std::vector<double> corrupt(const std::vector<double>& image, int side, int use_case,
                            std::uint64_t seed, const CorruptionRecipe& recipe = {});

// Accepts "1".."5" or "uc1".."uc5" (case-insensitive).
int parse_use_case(const std::string& text);

// Dataset file round-trip. The binary layout is:
//   magic "FSDS", u32 version, u32 groups, groups x u32 disease counts,
//   u32 side, u32 samples_per_class, u64 total samples,
//   then per sample: side*side f32 pixels, u32 group, u32 disease, u32 flat.
// All integers and floats little-endian. A JSON manifest with the full spec
// (including margin, noise, seed, and the corruption constants) is written
// next to the binary at path + ".manifest.json".
void write_dataset(const Dataset& dataset, const std::string& path);
Dataset read_dataset(const std::string& path);

}  // namespace fedscope::synthdata
