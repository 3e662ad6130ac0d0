#include "fedscope/synthdata.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "fedscope/detail/bytes.hpp"
#include "fedscope/errors.hpp"
#include "fedscope/rng.hpp"
#include "json.hpp"

namespace fedscope::synthdata {

namespace {

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

int clamp_index(int i, int side) { return i < 0 ? 0 : (i >= side ? side - 1 : i); }

}  // namespace

void DatasetSpec::validate() const {
  if (groups < 1) throw validation_error("dataset spec: groups must be at least 1");
  if (static_cast<int>(diseases_per_group.size()) != groups)
    throw validation_error("dataset spec: diseases_per_group length must equal groups");
  for (int d : diseases_per_group)
    if (d < 1) throw validation_error("dataset spec: every group needs at least one disease");
  if (total_classes() < 2) throw validation_error("dataset spec: need at least two classes overall");
  if (samples_per_class < 1) throw validation_error("dataset spec: samples_per_class must be positive");
  if (side < 1) throw validation_error("dataset spec: side must be positive");
  if (!(margin > 0.0)) throw validation_error("dataset spec: margin must be positive");
  if (noise < 0.0) throw validation_error("dataset spec: noise must be non-negative");
}

int DatasetSpec::total_classes() const {
  return std::accumulate(diseases_per_group.begin(), diseases_per_group.end(), 0);
}

int DatasetSpec::flat_class(int group, int disease) const {
  int offset = 0;
  for (int g = 0; g < group; ++g) offset += diseases_per_group[g];
  return offset + disease;
}

std::int64_t DatasetSpec::total_samples() const {
  return static_cast<std::int64_t>(total_classes()) * samples_per_class;
}

Dataset generate(const DatasetSpec& spec) {
  spec.validate();
  const int pixels = spec.pixel_count();

  // Sign pattern shared by every class in a group; router signal.
  std::vector<std::vector<double>> group_sign(static_cast<std::size_t>(spec.groups));
  for (int g = 0; g < spec.groups; ++g) {
    rng::Stream s(rng::derive_seed(spec.seed, "proto-group", {static_cast<std::uint64_t>(g)}));
    group_sign[static_cast<std::size_t>(g)].resize(static_cast<std::size_t>(pixels));
    for (double& v : group_sign[static_cast<std::size_t>(g)]) v = s.next_unit() < 0.5 ? -1.0 : 1.0;
  }

  Dataset out;
  out.spec = spec;
  out.samples.reserve(static_cast<std::size_t>(spec.total_samples()));

  std::int64_t id = 0;
  for (int g = 0; g < spec.groups; ++g) {
    for (int d = 0; d < spec.diseases_per_group[static_cast<std::size_t>(g)]; ++d) {
      // Per-class sign pattern on top of the group pattern.
      rng::Stream cs(rng::derive_seed(spec.seed, "proto-class",
                                      {static_cast<std::uint64_t>(g), static_cast<std::uint64_t>(d)}));
      std::vector<double> proto(static_cast<std::size_t>(pixels));
      for (int p = 0; p < pixels; ++p) {
        double class_sign = cs.next_unit() < 0.5 ? -1.0 : 1.0;
        proto[static_cast<std::size_t>(p)] =
            0.5 + 0.25 * spec.margin * (group_sign[static_cast<std::size_t>(g)][static_cast<std::size_t>(p)] + class_sign);
      }

      for (int i = 0; i < spec.samples_per_class; ++i) {
        Sample sample;
        sample.id = id++;
        sample.group = g;
        sample.disease = d;
        sample.flat = spec.flat_class(g, d);
        sample.pixels.resize(static_cast<std::size_t>(pixels));
        // Each sample owns its noise stream, so generation order is free.
        rng::Stream ns(rng::derive_seed(spec.seed, "sample",
                                        {static_cast<std::uint64_t>(g), static_cast<std::uint64_t>(d),
                                         static_cast<std::uint64_t>(i)}));
        for (int p = 0; p < pixels; ++p) {
          double v = proto[static_cast<std::size_t>(p)] + spec.noise * ns.next_gaussian();
          // Stored at file precision up front so the in-memory dataset and a
          // write/read round-trip see the same bits.
          sample.pixels[static_cast<std::size_t>(p)] = static_cast<float>(clamp01(v));
        }
        out.samples.push_back(std::move(sample));
      }
    }
  }
  return out;
}

namespace {

// Positions of each class's samples, ordered by stable sample id so the
// result does not depend on how the dataset happens to be stored.
std::vector<std::vector<std::int32_t>> positions_by_class(const Dataset& dataset,
                                                          const std::vector<std::int32_t>* subset) {
  std::vector<std::vector<std::int32_t>> byclass(
      static_cast<std::size_t>(dataset.spec.total_classes()));
  auto add = [&](std::int32_t pos) {
    const Sample& s = dataset.samples[static_cast<std::size_t>(pos)];
    if (s.flat < 0 || s.flat >= dataset.spec.total_classes())
      throw validation_error("sample class label out of range");
    byclass[static_cast<std::size_t>(s.flat)].push_back(pos);
  };
  if (subset == nullptr) {
    for (std::int32_t pos = 0; pos < static_cast<std::int32_t>(dataset.samples.size()); ++pos)
      add(pos);
  } else {
    for (std::int32_t pos : *subset) add(pos);
  }
  for (auto& list : byclass)
    std::sort(list.begin(), list.end(), [&](std::int32_t a, std::int32_t b) {
      return dataset.samples[static_cast<std::size_t>(a)].id <
             dataset.samples[static_cast<std::size_t>(b)].id;
    });
  return byclass;
}

}  // namespace

Split split(const Dataset& dataset, std::uint64_t seed, double train_frac, double val_frac,
            double test_frac) {
  if (train_frac < 0.0 || val_frac < 0.0 || test_frac < 0.0 ||
      std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
    throw validation_error("split fractions must be non-negative and sum to 1");

  Split out;
  auto byclass = positions_by_class(dataset, nullptr);
  for (std::size_t c = 0; c < byclass.size(); ++c) {
    auto& list = byclass[c];
    const int n = static_cast<int>(list.size());
    if (n < 3)
      throw validation_error("class " + std::to_string(c) + " has " + std::to_string(n) +
                             " samples; need at least 3 to split");

    rng::Stream stream(rng::derive_seed(seed, "split", {static_cast<std::uint64_t>(c)}));
    rng::shuffle(list, stream);

    // Largest-remainder allocation; leftover ties go to train, then val.
    const double exact[3] = {train_frac * n, val_frac * n, test_frac * n};
    int counts[3];
    double remainder[3];
    int assigned = 0;
    for (int k = 0; k < 3; ++k) {
      counts[k] = static_cast<int>(std::floor(exact[k]));
      remainder[k] = exact[k] - counts[k];
      assigned += counts[k];
    }
    int order[3] = {0, 1, 2};
    std::stable_sort(order, order + 3, [&](int a, int b) { return remainder[a] > remainder[b]; });
    for (int extra = 0; extra < n - assigned; ++extra) ++counts[order[extra]];

    auto it = list.begin();
    out.train.insert(out.train.end(), it, it + counts[0]);
    it += counts[0];
    out.val.insert(out.val.end(), it, it + counts[1]);
    it += counts[1];
    out.test.insert(out.test.end(), it, it + counts[2]);
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

PartitionResult partition(const Dataset& dataset, const std::vector<std::int32_t>& train,
                          int n_clients, std::uint64_t seed) {
  if (n_clients < 1) throw validation_error("partition: need at least one client");

  PartitionResult out;
  out.shards.resize(static_cast<std::size_t>(n_clients));
  for (int k = 0; k < n_clients; ++k) out.shards[static_cast<std::size_t>(k)].client_id = k;

  auto byclass = positions_by_class(dataset, &train);
  for (std::size_t c = 0; c < byclass.size(); ++c) {
    auto& list = byclass[c];
    if (static_cast<int>(list.size()) < n_clients)
      out.warnings.push_back("class " + std::to_string(c) + " has only " +
                             std::to_string(list.size()) + " training samples for " +
                             std::to_string(n_clients) + " clients; some clients get none");
    rng::Stream stream(rng::derive_seed(seed, "partition", {static_cast<std::uint64_t>(c)}));
    rng::shuffle(list, stream);
    // Round-robin from client 0, so remainders land on the lowest ids.
    for (std::size_t j = 0; j < list.size(); ++j)
      out.shards[j % static_cast<std::size_t>(n_clients)].indices.push_back(list[j]);
  }
  for (auto& shard : out.shards) std::sort(shard.indices.begin(), shard.indices.end());
  return out;
}

namespace {

std::vector<double> affine(const std::vector<double>& img, double gain, double brightness) {
  // Contrast pivots about mid-gray; brightness is an additive offset.
  std::vector<double> out(img.size());
  for (std::size_t i = 0; i < img.size(); ++i)
    out[i] = 0.5 + gain * (img[i] - 0.5) + brightness;
  return out;
}

std::vector<double> shear_rows(const std::vector<double>& img, int side, int factor) {
  // Row r shifts horizontally by factor*r/side pixels (integer division),
  // replicating the edge column.
  std::vector<double> out(img.size());
  for (int r = 0; r < side; ++r) {
    int shift = factor * r / side;
    for (int c = 0; c < side; ++c) {
      int src = clamp_index(c - shift, side);
      out[static_cast<std::size_t>(r) * side + c] = img[static_cast<std::size_t>(r) * side + src];
    }
  }
  return out;
}

std::vector<double> translate(const std::vector<double>& img, int side, int dx, int dy) {
  std::vector<double> out(img.size());
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c) {
      int sr = clamp_index(r - dy, side);
      int sc = clamp_index(c - dx, side);
      out[static_cast<std::size_t>(r) * side + c] = img[static_cast<std::size_t>(sr) * side + sc];
    }
  return out;
}

std::vector<double> box_blur3(const std::vector<double>& img, int side) {
  std::vector<double> out(img.size());
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c) {
      double acc = 0.0;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc)
          acc += img[static_cast<std::size_t>(clamp_index(r + dr, side)) * side +
                     clamp_index(c + dc, side)];
      out[static_cast<std::size_t>(r) * side + c] = acc / 9.0;
    }
  return out;
}

}  // namespace

std::vector<double> corrupt(const std::vector<double>& image, int side, int use_case,
                            std::uint64_t seed, const CorruptionRecipe& recipe) {
  if (side < 1 || static_cast<std::size_t>(side) * side != image.size())
    throw dimension_error("corrupt: image size does not match side length");
  if (use_case < 1 || use_case > 5)
    throw validation_error("corrupt: use case must be 1..5, got " + std::to_string(use_case));

  rng::Stream stream(seed);
  std::vector<double> out;
  switch (use_case) {
    case 1: {
      out = affine(image, recipe.uc1_contrast, recipe.uc1_brightness);
      int span = 2 * recipe.uc1_max_shear + 1;
      int factor = static_cast<int>(stream.next_below(span)) - recipe.uc1_max_shear;
      out = shear_rows(out, side, factor);
      break;
    }
    case 2: {
      out.resize(image.size());
      for (std::size_t i = 0; i < image.size(); ++i) {
        double v = image[i] + recipe.uc2_brightness;
        v = 0.5 + recipe.uc2_contrast * (v - 0.5);
        out[i] = v + recipe.uc2_sigma * stream.next_gaussian();
      }
      break;
    }
    case 3:
      out = box_blur3(image, side);
      break;
    case 4: {
      const double steps = recipe.uc4_levels - 1;
      double cast = (2.0 * stream.next_unit() - 1.0) * recipe.uc4_cast;
      out.resize(image.size());
      for (std::size_t i = 0; i < image.size(); ++i)
        out[i] = std::round(image[i] * steps) / steps + cast;
      break;
    }
    case 5: {
      int max_px = static_cast<int>(std::floor(side * recipe.uc5_max_shift));
      int span = 2 * max_px + 1;
      int dx = static_cast<int>(stream.next_below(span)) - max_px;
      int dy = static_cast<int>(stream.next_below(span)) - max_px;
      out = translate(image, side, dx, dy);
      break;
    }
  }
  for (double& v : out) v = clamp01(v);
  return out;
}

int parse_use_case(const std::string& text) {
  std::string t;
  for (char c : text) t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (t.rfind("uc", 0) == 0) t = t.substr(2);
  if (t.size() == 1 && t[0] >= '1' && t[0] <= '5') return t[0] - '0';
  throw validation_error("unknown use case '" + text + "' (expected 1..5 or uc1..uc5)");
}

namespace {

constexpr char kMagic[4] = {'F', 'S', 'D', 'S'};
constexpr std::uint32_t kVersion = 1;

using detail::put_f32;
using detail::put_u32;
using detail::put_u64;

std::string manifest_path(const std::string& path) { return path + ".manifest.json"; }

}  // namespace

void write_dataset(const Dataset& dataset, const std::string& path) {
  dataset.spec.validate();
  const DatasetSpec& spec = dataset.spec;
  const int pixels = spec.pixel_count();

  // Serialize in id order so a round-trip preserves sample identity.
  std::vector<const Sample*> ordered;
  ordered.reserve(dataset.samples.size());
  for (const Sample& s : dataset.samples) ordered.push_back(&s);
  std::sort(ordered.begin(), ordered.end(),
            [](const Sample* a, const Sample* b) { return a->id < b->id; });

  std::string buf;
  buf.reserve(16 + dataset.samples.size() * (static_cast<std::size_t>(pixels) * 4 + 12));
  buf.append(kMagic, 4);
  put_u32(buf, kVersion);
  put_u32(buf, static_cast<std::uint32_t>(spec.groups));
  for (int d : spec.diseases_per_group) put_u32(buf, static_cast<std::uint32_t>(d));
  put_u32(buf, static_cast<std::uint32_t>(spec.side));
  put_u32(buf, static_cast<std::uint32_t>(spec.samples_per_class));
  put_u64(buf, static_cast<std::uint64_t>(dataset.samples.size()));

  for (const Sample* s : ordered) {
    if (static_cast<int>(s->pixels.size()) != pixels)
      throw validation_error("sample pixel count does not match the spec");
    for (float v : s->pixels) put_f32(buf, v);
    put_u32(buf, static_cast<std::uint32_t>(s->group));
    put_u32(buf, static_cast<std::uint32_t>(s->disease));
    put_u32(buf, static_cast<std::uint32_t>(s->flat));
  }

  detail::write_file(path, buf);

  CorruptionRecipe recipe;
  nlohmann::json manifest = {
      {"format", "FSDS"},
      {"version", kVersion},
      {"spec",
       {{"groups", spec.groups},
        {"diseases_per_group", spec.diseases_per_group},
        {"samples_per_class", spec.samples_per_class},
        {"side", spec.side},
        {"margin", spec.margin},
        {"noise", spec.noise},
        {"seed", spec.seed}}},
      {"total_samples", dataset.samples.size()},
      // The evaluation-time degradation constants are design choices, not
      // measurements; they are recorded here so every run is reproducible.
      {"corruption_recipe",
       {{"uc1_contrast", recipe.uc1_contrast},
        {"uc1_brightness", recipe.uc1_brightness},
        {"uc1_max_shear", recipe.uc1_max_shear},
        {"uc2_brightness", recipe.uc2_brightness},
        {"uc2_contrast", recipe.uc2_contrast},
        {"uc2_sigma", recipe.uc2_sigma},
        {"uc4_levels", recipe.uc4_levels},
        {"uc4_cast", recipe.uc4_cast},
        {"uc5_max_shift", recipe.uc5_max_shift}}}};

  std::ofstream mout(manifest_path(path), std::ios::trunc);
  if (!mout) throw io_error("cannot write dataset manifest: " + manifest_path(path));
  mout << manifest.dump(2) << "\n";
  if (!mout) throw io_error("failed writing dataset manifest: " + manifest_path(path));
}

Dataset read_dataset(const std::string& path) {
  detail::ByteReader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw io_error("not a dataset file: " + path);
  if (r.u32() != kVersion) throw io_error("unsupported dataset file version: " + path);

  Dataset out;
  out.spec.groups = static_cast<int>(r.u32());
  if (out.spec.groups < 1 || out.spec.groups > 1'000'000)
    throw io_error("corrupt dataset header: " + path);
  out.spec.diseases_per_group.resize(static_cast<std::size_t>(out.spec.groups));
  for (int& d : out.spec.diseases_per_group) d = static_cast<int>(r.u32());
  out.spec.side = static_cast<int>(r.u32());
  out.spec.samples_per_class = static_cast<int>(r.u32());
  std::uint64_t total = r.u64();

  std::ifstream min(manifest_path(path));
  if (!min) throw io_error("dataset manifest not found: " + manifest_path(path));
  nlohmann::json manifest;
  try {
    min >> manifest;
    out.spec.margin = manifest.at("spec").at("margin").get<double>();
    out.spec.noise = manifest.at("spec").at("noise").get<double>();
    out.spec.seed = manifest.at("spec").at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw io_error("bad dataset manifest " + manifest_path(path) + ": " + e.what());
  }
  out.spec.validate();

  const int pixels = out.spec.pixel_count();
  const int classes = out.spec.total_classes();
  out.samples.resize(total);
  for (std::uint64_t i = 0; i < total; ++i) {
    Sample& s = out.samples[i];
    s.id = static_cast<std::int64_t>(i);
    s.pixels.resize(static_cast<std::size_t>(pixels));
    for (float& v : s.pixels) v = r.f32();
    s.group = static_cast<int>(r.u32());
    s.disease = static_cast<int>(r.u32());
    s.flat = static_cast<int>(r.u32());
    if (s.group < 0 || s.group >= out.spec.groups ||
        s.disease < 0 || s.disease >= out.spec.diseases_per_group[static_cast<std::size_t>(s.group)] ||
        s.flat != out.spec.flat_class(s.group, s.disease) || s.flat >= classes)
      throw io_error("corrupt sample labels in dataset file: " + path);
  }
  return out;
}

}  // namespace fedscope::synthdata
