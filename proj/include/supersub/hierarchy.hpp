#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace supersub {

struct Superclass {
    std::string name;
    std::vector<std::string> subclasses;

    friend bool operator==(const Superclass&, const Superclass&) = default;
};

// Two-level label hierarchy. Global subclass index = position in the concatenation of
// every superclass's subclass list, in manifest order.
class HierarchyManifest {
public:
    HierarchyManifest() = default;
    // Throws ValidationError unless: >= 2 superclasses, each with >= 2 subclasses, and all
    // superclass names and all subclass names unique.
    explicit HierarchyManifest(std::vector<Superclass> superclasses);

    const std::vector<Superclass>& superclasses() const noexcept { return supers_; }
    std::size_t superclass_count() const noexcept { return supers_.size(); }
    std::size_t subclass_count() const noexcept { return owner_.size(); }
    std::size_t subclass_count(std::size_t superclass) const;
    std::size_t first_subclass(std::size_t superclass) const;

    std::size_t super_of(std::size_t sub_index) const;
    std::size_t local_index(std::size_t sub_index) const;
    std::size_t global_index(std::size_t superclass, std::size_t local) const;

    const std::string& superclass_name(std::size_t superclass) const;
    const std::string& subclass_name(std::size_t sub_index) const;

    // Compact JSON in the manifest file schema; stable across runs.
    std::string to_json() const;

    friend bool operator==(const HierarchyManifest& a, const HierarchyManifest& b) { return a.supers_ == b.supers_; }

private:
    std::vector<Superclass> supers_;
    std::vector<std::size_t> offsets_;
    std::vector<std::size_t> owner_;
};

// Parses {"superclasses":[{"name":..., "subclasses":[...]}, ...]}. Duplicate JSON keys are rejected.
HierarchyManifest parse_manifest(std::string_view text);

}  // namespace supersub
