#include "supersub/hierarchy.hpp"

#include <nlohmann/json.hpp>
#include <set>
#include <unordered_set>

#include "supersub/error.hpp"

namespace supersub {

using nlohmann::json;

HierarchyManifest::HierarchyManifest(std::vector<Superclass> superclasses) : supers_(std::move(superclasses)) {
    if (supers_.size() < 2) {
        throw ValidationError("manifest needs at least 2 superclasses, got " + std::to_string(supers_.size()));
    }
    std::unordered_set<std::string> super_names;
    std::unordered_set<std::string> sub_names;
    for (std::size_t s = 0; s < supers_.size(); ++s) {
        const auto& sc = supers_[s];
        if (!super_names.insert(sc.name).second) throw ValidationError("duplicate superclass name \"" + sc.name + "\"");
        if (sc.subclasses.size() < 2) {
            throw ValidationError("superclass \"" + sc.name + "\" has " + std::to_string(sc.subclasses.size()) +
                                  " subclasses; at least 2 required");
        }
        offsets_.push_back(owner_.size());
        for (const auto& sub : sc.subclasses) {
            if (!sub_names.insert(sub).second) throw ValidationError("duplicate subclass name \"" + sub + "\"");
            owner_.push_back(s);
        }
    }
}

std::size_t HierarchyManifest::subclass_count(std::size_t superclass) const {
    if (superclass >= supers_.size()) throw IndexError("superclass index " + std::to_string(superclass) + " out of range");
    return supers_[superclass].subclasses.size();
}

std::size_t HierarchyManifest::first_subclass(std::size_t superclass) const {
    if (superclass >= supers_.size()) throw IndexError("superclass index " + std::to_string(superclass) + " out of range");
    return offsets_[superclass];
}

std::size_t HierarchyManifest::super_of(std::size_t sub_index) const {
    if (sub_index >= owner_.size()) {
        throw IndexError("subclass index " + std::to_string(sub_index) + " out of range for " +
                         std::to_string(owner_.size()) + " subclasses");
    }
    return owner_[sub_index];
}

std::size_t HierarchyManifest::local_index(std::size_t sub_index) const {
    return sub_index - offsets_[super_of(sub_index)];
}

std::size_t HierarchyManifest::global_index(std::size_t superclass, std::size_t local) const {
    if (local >= subclass_count(superclass)) {
        throw IndexError("local subclass " + std::to_string(local) + " out of range for superclass " +
                         std::to_string(superclass));
    }
    return offsets_[superclass] + local;
}

const std::string& HierarchyManifest::superclass_name(std::size_t superclass) const {
    subclass_count(superclass);
    return supers_[superclass].name;
}

const std::string& HierarchyManifest::subclass_name(std::size_t sub_index) const {
    const std::size_t s = super_of(sub_index);
    return supers_[s].subclasses[sub_index - offsets_[s]];
}

std::string HierarchyManifest::to_json() const {
    json doc;
    doc["superclasses"] = json::array();
    for (const auto& sc : supers_) doc["superclasses"].push_back({{"name", sc.name}, {"subclasses", sc.subclasses}});
    return doc.dump();
}

namespace {

json parse_strict(std::string_view text) {
    // One key set per open object; a repeated key fails the parse.
    std::vector<std::set<std::string>> open_objects;
    std::string duplicate;
    json::parser_callback_t check = [&](int /*depth*/, json::parse_event_t event, json& parsed) {
        switch (event) {
            case json::parse_event_t::object_start:
                open_objects.emplace_back();
                break;
            case json::parse_event_t::object_end:
                open_objects.pop_back();
                break;
            case json::parse_event_t::key:
                if (!open_objects.back().insert(parsed.get<std::string>()).second && duplicate.empty()) {
                    duplicate = parsed.get<std::string>();
                }
                break;
            default:
                break;
        }
        return true;
    };
    json doc;
    try {
        doc = json::parse(text.begin(), text.end(), check);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("manifest is not valid JSON: ") + e.what());
    }
    if (!duplicate.empty()) throw ValidationError("manifest has duplicate key \"" + duplicate + "\"");
    return doc;
}

}  // namespace

HierarchyManifest parse_manifest(std::string_view text) {
    const json doc = parse_strict(text);
    if (!doc.is_object() || !doc.contains("superclasses") || !doc["superclasses"].is_array()) {
        throw ValidationError("manifest must be an object with a \"superclasses\" array");
    }
    std::vector<Superclass> supers;
    for (const auto& entry : doc["superclasses"]) {
        if (!entry.is_object() || !entry.contains("name") || !entry["name"].is_string() ||
            !entry.contains("subclasses") || !entry["subclasses"].is_array()) {
            throw ValidationError("each superclass needs a string \"name\" and a \"subclasses\" array");
        }
        Superclass sc{entry["name"].get<std::string>(), {}};
        for (const auto& sub : entry["subclasses"]) {
            if (!sub.is_string()) throw ValidationError("subclass names must be strings in \"" + sc.name + "\"");
            sc.subclasses.push_back(sub.get<std::string>());
        }
        supers.push_back(std::move(sc));
    }
    return HierarchyManifest(std::move(supers));
}

}  // namespace supersub
