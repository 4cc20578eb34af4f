#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "supersub/byte_io.hpp"
#include "supersub/hierarchy.hpp"
#include "supersub/tensor.hpp"

namespace supersub {

struct Dataset {
    Tensor features;                     // [rows x dim]
    std::vector<std::size_t> sub_labels; // global subclass indices
    HierarchyManifest manifest;

    std::size_t rows() const { return sub_labels.size(); }
    std::size_t dim() const { return features.rank() == 2 ? features.shape()[1] : 0; }

    std::vector<std::size_t> super_labels() const;
    // Rows whose subclass belongs to `superclass`, labels re-indexed locally (0..k-1).
    Dataset restrict_to(std::size_t superclass, std::vector<std::size_t>& local_labels) const;
    // Throws ContractError if shapes or labels break the dataset invariants.
    void validate() const;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct SyntheticSpec {
    std::size_t n_super = 0;
    std::vector<std::size_t> subs_per_super;
    std::size_t dim = 0;
    double super_sep = 0.0;
    double sub_sep = 0.0;
    double noise_sigma = 0.0;
    std::size_t n_train_per_sub = 0;
    std::size_t n_test_per_sub = 0;
    std::uint64_t seed = 0;

    void validate() const;
    HierarchyManifest manifest() const;
};

struct SyntheticData {
    Dataset train;
    Dataset test;
    Tensor super_centers; // [n_super x dim]
    Tensor sub_centers;   // [n_sub x dim]
};

// Gaussian hierarchy: superclass centers ~ N(0, super_sep^2 I), subclass centers around them
// ~ N(0, sub_sep^2 I), samples ~ N(center, noise_sigma^2 I). Rows are grouped by subclass.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

Bytes encode_dataset(const Dataset& ds);
Dataset decode_dataset(std::span<const std::uint8_t> bytes);

void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace supersub
