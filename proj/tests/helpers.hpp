#pragma once

#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

#include "supersub/dataset.hpp"
#include "supersub/delta.hpp"
#include "supersub/hierarchy.hpp"
#include "supersub/network.hpp"
#include "supersub/prng.hpp"

namespace testing_helpers {

using namespace supersub;

inline HierarchyManifest random_manifest(Prng& rng) {
    const std::size_t n_super = 2 + rng.below(4);
    std::vector<Superclass> supers;
    for (std::size_t s = 0; s < n_super; ++s) {
        Superclass sc{"S" + std::to_string(s) + "_" + std::to_string(rng.below(1000)), {}};
        const std::size_t k = 2 + rng.below(4);
        for (std::size_t j = 0; j < k; ++j) sc.subclasses.push_back(sc.name + ".c" + std::to_string(j));
        supers.push_back(sc);
    }
    return HierarchyManifest(std::move(supers));
}

inline Dataset random_dataset(Prng& rng) {
    Dataset ds;
    ds.manifest = random_manifest(rng);
    const std::size_t rows = rng.below(12), dim = 1 + rng.below(6);
    ds.features = Tensor({rows, dim});
    for (float& v : ds.features.data()) v = static_cast<float>(rng.gaussian(0, 1e3));
    for (std::size_t r = 0; r < rows; ++r) ds.sub_labels.push_back(rng.below(ds.manifest.subclass_count()));
    return ds;
}

inline NetworkConfig random_config(Prng& rng, std::size_t max_width = 5) {
    NetworkConfig c;
    const std::size_t hidden = 1 + rng.below(3);
    c.layer_dims.push_back(1 + rng.below(max_width));
    for (std::size_t h = 0; h < hidden; ++h) {
        c.layer_dims.push_back(1 + rng.below(max_width));
        c.batchnorm.push_back(rng.below(2) == 1);
    }
    c.layer_dims.push_back(2 + rng.below(max_width));
    return c;
}

// He-initialized network with every tensor perturbed so biases and BN tensors are non-trivial.
inline Network random_network(Prng& rng, const NetworkConfig& config) {
    Network net = init_network(config, rng.next_u64());
    for (std::size_t i = 0; i < net.slots().size(); ++i) {
        const bool var = net.slots()[i].role == TensorRole::BnRunningVar;
        for (float& v : net.tensor(i).data()) {
            v = var ? static_cast<float>(0.1 + rng.uniform() * 3) : v + static_cast<float>(rng.gaussian(0, 0.3));
        }
    }
    return net;
}

inline Network random_network(Prng& rng) { return random_network(rng, random_config(rng)); }

// Copy of `base` with small body perturbations and a fresh head of width `k`.
inline Network perturbed(const Network& base, Prng& rng, std::size_t k, double sigma = 0.01) {
    Network out = base;
    out.replace_head(k);
    init_dense(out.head(), rng.next_u64());
    for (std::size_t i = 0; i < out.slots().size(); ++i) {
        if (out.slots()[i].head) continue;
        const bool var = out.slots()[i].role == TensorRole::BnRunningVar;
        for (float& v : out.tensor(i).data()) {
            v = var ? v * static_cast<float>(1.0 + rng.uniform() * 0.1) : v + static_cast<float>(rng.gaussian(0, sigma));
        }
    }
    return out;
}

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("supersub_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace testing_helpers
