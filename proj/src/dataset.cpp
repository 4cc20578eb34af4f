#include "supersub/dataset.hpp"

#include "supersub/error.hpp"
#include "supersub/prng.hpp"

namespace supersub {

namespace {

constexpr std::string_view kDatasetMagic = "HSDS";
constexpr std::uint16_t kDatasetVersion = 1;

// Fills `row` with center + N(0, sigma^2 I), one draw per coordinate in order.
void draw_around(Prng& rng, std::span<const float> center, double sigma, std::span<float> row) {
    for (std::size_t d = 0; d < row.size(); ++d) {
        row[d] = static_cast<float>(rng.gaussian(static_cast<double>(center[d]), sigma));
    }
}

}  // namespace

std::vector<std::size_t> Dataset::super_labels() const {
    std::vector<std::size_t> out;
    out.reserve(sub_labels.size());
    for (auto s : sub_labels) out.push_back(manifest.super_of(s));
    return out;
}

Dataset Dataset::restrict_to(std::size_t superclass, std::vector<std::size_t>& local_labels) const {
    manifest.subclass_count(superclass);
    const std::size_t d = dim();
    std::vector<float> rows_out;
    Dataset out{Tensor(), {}, manifest};
    local_labels.clear();
    for (std::size_t r = 0; r < rows(); ++r) {
        if (manifest.super_of(sub_labels[r]) != superclass) continue;
        const auto row = features.data().subspan(r * d, d);
        rows_out.insert(rows_out.end(), row.begin(), row.end());
        out.sub_labels.push_back(sub_labels[r]);
        local_labels.push_back(manifest.local_index(sub_labels[r]));
    }
    out.features = Tensor({out.sub_labels.size(), d}, std::move(rows_out));
    return out;
}

void Dataset::validate() const {
    if (features.rank() != 2) throw ContractError("dataset features must be a matrix");
    if (features.shape()[0] != sub_labels.size()) {
        throw ContractError("dataset has " + std::to_string(features.shape()[0]) + " feature rows but " +
                            std::to_string(sub_labels.size()) + " labels");
    }
    for (auto s : sub_labels) {
        if (s >= manifest.subclass_count()) throw ContractError("dataset label " + std::to_string(s) + " invalid");
    }
}

void SyntheticSpec::validate() const {
    if (n_super < 2) throw ParameterError("synthetic spec: n_super must be >= 2");
    if (subs_per_super.size() != n_super) {
        throw ParameterError("synthetic spec: subs_per_super has " + std::to_string(subs_per_super.size()) +
                             " entries for " + std::to_string(n_super) + " superclasses");
    }
    for (auto k : subs_per_super) {
        if (k < 2) throw ParameterError("synthetic spec: every superclass needs >= 2 subclasses");
    }
    if (dim == 0) throw ParameterError("synthetic spec: dim must be >= 1");
    if (!(sub_sep > 0.0) || !(super_sep > sub_sep)) {
        throw ParameterError("synthetic spec: need super_sep > sub_sep > 0");
    }
    if (!(noise_sigma > 0.0)) throw ParameterError("synthetic spec: noise_sigma must be > 0");
}

HierarchyManifest SyntheticSpec::manifest() const {
    std::vector<Superclass> supers;
    for (std::size_t s = 0; s < n_super; ++s) {
        Superclass sc{"super" + std::to_string(s), {}};
        for (std::size_t k = 0; k < subs_per_super[s]; ++k) {
            sc.subclasses.push_back("super" + std::to_string(s) + ".sub" + std::to_string(k));
        }
        supers.push_back(std::move(sc));
    }
    return HierarchyManifest(std::move(supers));
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    const HierarchyManifest manifest = spec.manifest();
    const std::size_t n_sub = manifest.subclass_count();
    Prng rng(spec.seed);

    const std::vector<float> origin(spec.dim, 0.0f);
    Tensor super_centers({spec.n_super, spec.dim});
    for (std::size_t s = 0; s < spec.n_super; ++s) {
        draw_around(rng, origin, spec.super_sep, super_centers.data().subspan(s * spec.dim, spec.dim));
    }
    Tensor sub_centers({n_sub, spec.dim});
    for (std::size_t c = 0; c < n_sub; ++c) {
        const auto parent = super_centers.data().subspan(manifest.super_of(c) * spec.dim, spec.dim);
        draw_around(rng, parent, spec.sub_sep, sub_centers.data().subspan(c * spec.dim, spec.dim));
    }

    auto sample = [&](std::size_t per_sub) {
        Dataset ds{Tensor({n_sub * per_sub, spec.dim}), {}, manifest};
        ds.sub_labels.reserve(n_sub * per_sub);
        std::size_t r = 0;
        for (std::size_t c = 0; c < n_sub; ++c) {
            const auto center = sub_centers.data().subspan(c * spec.dim, spec.dim);
            for (std::size_t i = 0; i < per_sub; ++i, ++r) {
                draw_around(rng, center, spec.noise_sigma, ds.features.data().subspan(r * spec.dim, spec.dim));
                ds.sub_labels.push_back(c);
            }
        }
        return ds;
    };
    Dataset train = sample(spec.n_train_per_sub);
    Dataset test = sample(spec.n_test_per_sub);
    return {std::move(train), std::move(test), std::move(super_centers), std::move(sub_centers)};
}

Bytes encode_dataset(const Dataset& ds) {
    ds.validate();
    ByteWriter w;
    w.magic(kDatasetMagic);
    w.u16(kDatasetVersion);
    w.u32(static_cast<std::uint32_t>(ds.dim()));
    w.u64(ds.rows());
    w.u32(static_cast<std::uint32_t>(ds.manifest.subclass_count()));
    w.string(ds.manifest.to_json());
    w.f32_array(ds.features.data());
    for (auto label : ds.sub_labels) w.u32(static_cast<std::uint32_t>(label));
    w.seal_crc();
    return w.take();
}

Dataset decode_dataset(std::span<const std::uint8_t> bytes) {
    ByteReader r(verify_trailing_crc(bytes, "dataset"));
    r.expect_magic(kDatasetMagic);
    const std::uint16_t version = r.u16();
    if (version != kDatasetVersion) r.fail("unsupported dataset version " + std::to_string(version));
    const std::uint32_t dim = r.u32();
    const std::uint64_t n_rows = r.u64();
    const std::uint32_t n_sub = r.u32();
    const std::uint64_t manifest_at = r.offset();
    HierarchyManifest manifest;
    try {
        manifest = parse_manifest(r.string());
    } catch (const ValidationError& e) {
        throw FormatError(std::string("embedded manifest invalid: ") + e.what(), manifest_at);
    }
    if (manifest.subclass_count() != n_sub) r.fail("subclass count does not match embedded manifest");
    if (dim == 0 && n_rows != 0) r.fail("zero feature dimension");
    if (dim != 0 && n_rows > r.remaining() / (4ull * dim + 4)) r.fail("row count exceeds payload");

    Dataset ds{Tensor({static_cast<std::size_t>(n_rows), dim}, r.f32_array(n_rows * dim)), {}, std::move(manifest)};
    ds.sub_labels.reserve(n_rows);
    for (std::uint64_t i = 0; i < n_rows; ++i) {
        const std::uint32_t label = r.u32();
        if (label >= n_sub) r.fail("label " + std::to_string(label) + " out of range");
        ds.sub_labels.push_back(label);
    }
    r.expect_end();
    return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) { write_file(path, encode_dataset(ds)); }

Dataset load_dataset(const std::filesystem::path& path) { return decode_dataset(read_file(path)); }

}  // namespace supersub
