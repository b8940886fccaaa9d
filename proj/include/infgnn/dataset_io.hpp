#pragma once

#include <filesystem>
#include <vector>

#include "infgnn/graph.hpp"

namespace infgnn {

enum class FeatureFormat { csv, binary };

// Reads `<root>/manifest.json` plus `<root>/t<k>/edges.csv` and either
// `features.csv` or `features.bin` + `features.json` per interval.
DynamicGraphSequence load_dataset(const std::filesystem::path& root);

// Writes the canonical layout. CSV values use 17 significant digits so a
// reload reproduces every double exactly.
void write_dataset(const DynamicGraphSequence& seq, const std::filesystem::path& root,
                   FeatureFormat format = FeatureFormat::csv);

// One directory per year, each holding `edges.csv` and `features.csv` in the
// canonical schema. Node sets come from the ids present in `features.csv`.
DynamicGraphSequence load_pems_years(const std::vector<std::filesystem::path>& year_dirs);

// FNV-1a over every file under `root` (run manifests excluded), visited in
// sorted path order.
std::uint64_t hash_directory(const std::filesystem::path& root);

}  // namespace infgnn
