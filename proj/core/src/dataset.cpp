// Copyright 2026 The EdgeDerm Authors
// SPDX-License-Identifier: Apache-2.0

#include "edgederm/dataset.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <unordered_map>

#include "edgederm/error.hpp"
#include "edgederm/image_io.hpp"
#include "edgederm/labels.hpp"

namespace edgederm {

namespace fs = std::filesystem;

std::vector<std::string> default_labels() { return {kClassLabels.begin(), kClassLabels.end()}; }

std::optional<int> class_from_code(std::string_view code) {
  for (std::size_t i = 0; i < kDiagnosisCodes.size(); ++i) {
    if (kDiagnosisCodes[i] == code) return static_cast<int>(i);
  }
  return std::nullopt;
}

Image load_sample_image(const LabeledSample& sample) {
  if (const auto* image = std::get_if<Image>(&sample.image)) return *image;
  const fs::path& path = std::get<fs::path>(sample.image);
  try {
    return read_image(path);
  } catch (const DataError& e) {
    throw DataError(e.kind(), "sample '" + sample.image_id + "': " + e.what());
  }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (ch != '\r') {
      field += ch;
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::unordered_map<std::string, fs::path> index_images(const fs::path& dir) {
  std::unordered_map<std::string, fs::path> index;
  if (!fs::is_directory(dir)) return index;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) {
      index.emplace(entry.path().stem().string(), entry.path());
    }
  }
  return index;
}

}  // namespace

std::vector<LabeledSample> load_manifest(const fs::path& csv_path, const fs::path& image_dir) {
  std::ifstream in(csv_path);
  if (!in) throw DataError(DataError::Kind::kMissingFile, "cannot open manifest " + csv_path.string());

  std::vector<LabeledSample> samples;
  std::string line;
  if (!std::getline(in, line) || trim(line).empty()) return samples;

  const std::vector<std::string> header = split_csv_line(line);
  auto column = [&header](std::string_view name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (trim(header[i]) == name) return i;
    }
    return std::nullopt;
  };
  const auto id_col = column("image_id");
  const auto dx_col = column("dx");
  const auto lesion_col = column("lesion_id");
  if (!id_col || !dx_col) {
    throw DataError(DataError::Kind::kMalformed, csv_path.string() + ": header must name image_id and dx columns");
  }

  const auto images = index_images(image_dir);
  std::set<std::string> seen;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    const std::string where = csv_path.filename().string() + " row " + std::to_string(row);
    if (fields.size() <= std::max(*id_col, *dx_col)) {
      throw DataError(DataError::Kind::kMalformed, where + ": too few columns");
    }
    LabeledSample sample;
    sample.image_id = trim(fields[*id_col]);
    const std::string code = trim(fields[*dx_col]);
    if (lesion_col && *lesion_col < fields.size()) sample.lesion_id = trim(fields[*lesion_col]);

    const auto cls = class_from_code(code);
    if (!cls) throw DataError(DataError::Kind::kUnknownCode, where + ": unknown diagnosis code '" + code + "'");
    sample.class_id = *cls;
    if (!seen.insert(sample.image_id).second) {
      throw DataError(DataError::Kind::kDuplicateId, where + ": duplicate image id '" + sample.image_id + "'");
    }
    const auto found = images.find(sample.image_id);
    if (found == images.end()) {
      throw DataError(DataError::Kind::kMissingFile,
                      where + ": no image for '" + sample.image_id + "' under " + image_dir.string());
    }
    sample.image = found->second;
    samples.push_back(std::move(sample));
  }
  return samples;
}

std::vector<LabeledSample> load_dataset(const fs::path& path) {
  if (fs::is_regular_file(path)) return load_manifest(path, path.parent_path());
  if (!fs::is_directory(path)) throw DataError(DataError::Kind::kMissingFile, "no dataset at " + path.string());
  for (const char* name : {"HAM10000_metadata.csv", "HAM10000_metadata", "metadata.csv"}) {
    if (fs::is_regular_file(path / name)) return load_manifest(path / name, path);
  }
  std::vector<fs::path> csvs;
  for (const auto& entry : fs::directory_iterator(path)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") csvs.push_back(entry.path());
  }
  if (csvs.size() != 1) {
    throw DataError(DataError::Kind::kMissingFile, "cannot identify a metadata CSV in " + path.string());
  }
  return load_manifest(csvs.front(), path);
}

void validate(const SplitSpec& spec) {
  for (double f : {spec.train, spec.val, spec.test}) {
    if (!(f >= 0.0 && f <= 1.0)) throw DataError(DataError::Kind::kMalformed, "split fractions must lie in [0, 1]");
  }
  if (std::abs(spec.train + spec.val + spec.test - 1.0) > 1e-9) {
    throw DataError(DataError::Kind::kMalformed, "split fractions must sum to 1");
  }
}

namespace {

// Largest-remainder apportionment of n over the fractions; ties favour earlier splits.
std::array<std::size_t, 3> apportion(std::size_t n, const std::array<double, 3>& fractions) {
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainders{};
  std::size_t assigned = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    const double exact = fractions[s] * static_cast<double>(n);
    counts[s] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    remainders[s] = exact - static_cast<double>(counts[s]);
    assigned += counts[s];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++counts[order[i % 3]];
  return counts;
}

}  // namespace

DatasetSplits stratified_split(std::span<const LabeledSample> samples, const SplitSpec& spec) {
  validate(spec);
  std::array<std::vector<std::size_t>, kNumClasses> by_class;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const int c = samples[i].class_id;
    if (c < 0 || c >= static_cast<int>(kNumClasses)) {
      throw DataError(DataError::Kind::kMalformed, "sample '" + samples[i].image_id + "' has invalid class id");
    }
    by_class[static_cast<std::size_t>(c)].push_back(i);
  }

  std::mt19937_64 rng(spec.seed);
  DatasetSplits out;
  std::array<std::vector<LabeledSample>*, 3> targets{&out.train, &out.val, &out.test};
  const std::array<double, 3> fractions{spec.train, spec.val, spec.test};

  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto& members = by_class[c];
    if (members.empty()) {
      throw DataError(DataError::Kind::kMissingClass,
                      "class '" + std::string(kClassLabels[c]) + "' has no samples");
    }
    // Group by lesion id, keeping first-appearance order before shuffling.
    std::vector<std::vector<std::size_t>> groups;
    std::map<std::string, std::size_t> group_of;
    for (std::size_t idx : members) {
      const std::string& lesion = samples[idx].lesion_id;
      if (lesion.empty()) {
        groups.push_back({idx});
        continue;
      }
      auto [it, inserted] = group_of.emplace(lesion, groups.size());
      if (inserted) groups.emplace_back();
      groups[it->second].push_back(idx);
    }
    std::shuffle(groups.begin(), groups.end(), rng);

    const std::array<std::size_t, 3> quota = apportion(members.size(), fractions);
    std::array<std::size_t, 3> filled{};
    for (const auto& group : groups) {
      std::size_t best = 0;
      long best_gap = static_cast<long>(quota[0]) - static_cast<long>(filled[0]);
      for (std::size_t s = 1; s < 3; ++s) {
        const long gap = static_cast<long>(quota[s]) - static_cast<long>(filled[s]);
        if (gap > best_gap) {
          best = s;
          best_gap = gap;
        }
      }
      for (std::size_t idx : group) targets[best]->push_back(samples[idx]);
      filled[best] += group.size();
    }
  }
  return out;
}

namespace {

struct ClassStyle {
  std::array<int, 3> lesion;
  int period;      // stripe period in pixels
  bool vertical;   // stripe orientation
  int radius_pct;  // lesion radius as a percentage of the image size
};

constexpr std::array<ClassStyle, kNumClasses> kStyles{{
    {{196, 160, 110}, 6, false, 38},  // benign keratosis: tan, horizontal bands
    {{110, 62, 36}, 4, true, 30},     // melanocytic nevus: brown, fine vertical
    {{176, 112, 120}, 10, false, 22}, // dermatofibroma: mauve, small
    {{34, 24, 28}, 8, true, 42},      // melanoma: near-black, large
    {{196, 32, 56}, 3, false, 26},    // vascular lesion: red
    {{238, 196, 206}, 12, true, 34},  // basal cell carcinoma: pale pink
    {{140, 128, 52}, 5, false, 30},   // actinic keratosis: olive
}};

constexpr std::array<int, 3> kSkin{226, 190, 168};

}  // namespace

Image synth_image(int class_id, std::uint64_t seed, std::size_t size) {
  if (class_id < 0 || class_id >= static_cast<int>(kNumClasses)) {
    throw DataError(DataError::Kind::kMalformed, "synthetic class id out of range");
  }
  const ClassStyle& style = kStyles[static_cast<std::size_t>(class_id)];
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.08, 0.08);
  std::uniform_int_distribution<int> noise(-14, 14);
  const double gain = 1.0 + jitter(rng);
  const double cx = static_cast<double>(size) * (0.5 + jitter(rng));
  const double cy = static_cast<double>(size) * (0.5 + jitter(rng));
  const double radius = static_cast<double>(size) * style.radius_pct / 100.0 * (1.0 + jitter(rng));

  Image image(size, size, 3);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double dx = static_cast<double>(x) - cx;
      const double dy = static_cast<double>(y) - cy;
      const bool inside = dx * dx + dy * dy <= radius * radius;
      const std::size_t coord = style.vertical ? x : y;
      const bool stripe = (coord / static_cast<std::size_t>(style.period)) % 2 == 0;
      for (std::size_t c = 0; c < 3; ++c) {
        double v = inside ? style.lesion[c] * gain * (stripe ? 1.0 : 0.8) : kSkin[c];
        v += noise(rng);
        image.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
      }
    }
  }
  return image;
}

std::vector<LabeledSample> synth_dataset(int per_class, std::uint64_t seed, std::size_t image_size) {
  if (per_class < 1) throw DataError(DataError::Kind::kMalformed, "synthetic dataset needs at least 1 image per class");
  std::vector<LabeledSample> samples;
  samples.reserve(static_cast<std::size_t>(per_class) * kNumClasses);
  std::mt19937_64 seeds(seed);
  for (int c = 0; c < static_cast<int>(kNumClasses); ++c) {
    for (int i = 0; i < per_class; ++i) {
      LabeledSample s;
      s.image_id = "SYN_" + std::string(kDiagnosisCodes[static_cast<std::size_t>(c)]) + "_" + std::to_string(i);
      s.class_id = c;
      s.image = synth_image(c, seeds(), image_size);
      samples.push_back(std::move(s));
    }
  }
  return samples;
}

void write_dataset(std::span<const LabeledSample> samples, const fs::path& dir) {
  fs::create_directories(dir / "images");
  std::ofstream csv(dir / "HAM10000_metadata.csv");
  if (!csv) throw DataError(DataError::Kind::kMissingFile, "cannot write manifest in " + dir.string());
  csv << "lesion_id,image_id,dx,dx_type,age,sex,localization\n";
  for (const LabeledSample& s : samples) {
    const std::string lesion = s.lesion_id.empty() ? "L_" + s.image_id : s.lesion_id;
    csv << lesion << ',' << s.image_id << ',' << kDiagnosisCodes[static_cast<std::size_t>(s.class_id)]
        << ",synthetic,,,\n";
    write_image(dir / "images" / (s.image_id + ".png"), load_sample_image(s));
  }
}

}  // namespace edgederm
