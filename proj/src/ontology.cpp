#include "fpeval/ontology.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>

#include "fpeval/dataset.hpp"

#include "json.hpp"

namespace fpeval {

namespace {

using nlohmann::json;

constexpr int kMaxIsAChain = 4;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct ProblemList {
    std::vector<std::string> problems;

    void add(std::string msg) {
        if (problems.size() < 20) problems.push_back(std::move(msg));
        ++count;
    }
    size_t count = 0;

    void throw_if_any(const std::string& what) const {
        if (count == 0) return;
        std::ostringstream out;
        out << what << ": " << count << " problem(s)";
        for (const auto& p : problems) out << "\n  - " << p;
        throw ParseError(out.str());
    }
};

// Parses "category:<id>" / "attribute:<id>" refs.
std::optional<std::pair<std::string, int>> parse_ref(const std::string& ref) {
    const auto colon = ref.find(':');
    if (colon == std::string::npos) return std::nullopt;
    const std::string kind = ref.substr(0, colon);
    if (kind != "category" && kind != "attribute") return std::nullopt;
    try {
        return std::make_pair(kind, std::stoi(ref.substr(colon + 1)));
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

} // namespace

std::string to_string(ViolationKind kind) {
    switch (kind) {
        case ViolationKind::unknown_category: return "unknown-category";
        case ViolationKind::unknown_attribute: return "unknown-attribute";
        case ViolationKind::inapplicable_attribute: return "inapplicable-attribute";
        case ViolationKind::geometry_error: return "geometry-error";
        case ViolationKind::duplicate_id: return "duplicate-id";
    }
    throw ContractError("invalid violation kind");
}

Ontology Ontology::load(const std::string& path) {
    return from_json_text(read_file(path));
}

Ontology Ontology::from_json_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("ontology parse error: ") + e.what());
    }

    Ontology o;
    ProblemList problems;

    try {
        for (const auto& c : doc.value("categories", json::array())) {
            CategoryDef def;
            def.id = c.at("id").get<int>();
            def.name = c.at("name").get<std::string>();
            def.supercategory = c.value("supercategory", std::string{});
            def.synset = c.value("synset", std::string{});
            if (o.category_index_.count(def.id)) {
                problems.add("duplicate category id " + std::to_string(def.id));
                continue;
            }
            o.category_index_[def.id] = o.categories_.size();
            o.categories_.push_back(std::move(def));
        }
        for (const auto& a : doc.value("attributes", json::array())) {
            AttributeDef def;
            def.id = a.at("id").get<int>();
            def.name = a.at("name").get<std::string>();
            def.superclass = a.value("superclass", std::string{});
            if (o.attribute_index_.count(def.id)) {
                problems.add("duplicate attribute id " + std::to_string(def.id));
                continue;
            }
            o.attribute_index_[def.id] = o.attributes_.size();
            o.attributes_.push_back(std::move(def));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("ontology schema error: ") + e.what());
    }

    // Attribute ids must be dense in [0, A) so sets convert to multi-hot
    // vectors without an id remap.
    for (const auto& a : o.attributes_) {
        if (a.id < 0 || a.id >= static_cast<int>(o.attributes_.size())) {
            problems.add("attribute id " + std::to_string(a.id) + " not in [0, " +
                         std::to_string(o.attributes_.size()) + ")");
        }
    }

    std::set<std::string> superclasses;
    for (const auto& a : o.attributes_) superclasses.insert(a.superclass);

    if (doc.contains("applicability")) {
        for (const auto& [key, value] : doc.at("applicability").items()) {
            int category_id = 0;
            try {
                category_id = std::stoi(key);
            } catch (const std::exception&) {
                problems.add("applicability key is not a category id: " + key);
                continue;
            }
            if (!o.category_index_.count(category_id)) {
                problems.add("applicability references unknown category " + key);
                continue;
            }
            auto& target = o.applicability_[category_id];
            for (const auto& sc : value) {
                const auto name = sc.get<std::string>();
                if (!superclasses.count(name)) {
                    problems.add("applicability of category " + key +
                                 " names unknown superclass '" + name + "'");
                    continue;
                }
                target.insert(name);
            }
        }
    }

    if (doc.contains("relations")) {
        for (const auto& r : doc.at("relations")) {
            Relation rel;
            const auto type = r.at("type").get<std::string>();
            if (type == "is-a") {
                rel.type = RelationType::is_a;
            } else if (type == "part-of") {
                rel.type = RelationType::part_of;
            } else {
                problems.add("unknown relation type '" + type + "'");
                continue;
            }
            rel.from = r.at("from").get<std::string>();
            rel.to = r.at("to").get<std::string>();
            const auto from = parse_ref(rel.from);
            const auto to = parse_ref(rel.to);
            if (!from || !to) {
                problems.add("relation endpoint is not 'category:<id>' or 'attribute:<id>': " +
                             rel.from + " -> " + rel.to);
                continue;
            }
            const auto exists = [&](const std::pair<std::string, int>& ref) {
                return ref.first == "category" ? o.category_index_.count(ref.second) > 0
                                               : o.attribute_index_.count(ref.second) > 0;
            };
            if (!exists(*from) || !exists(*to)) {
                problems.add("relation references unknown node: " + rel.from + " -> " + rel.to);
                continue;
            }
            if (rel.type == RelationType::part_of &&
                (from->first != "category" || to->first != "category")) {
                problems.add("part-of must link categories: " + rel.from + " -> " + rel.to);
                continue;
            }
            if (rel.type == RelationType::is_a && from->first != to->first) {
                problems.add("is-a must stay within one kind: " + rel.from + " -> " + rel.to);
                continue;
            }
            o.relations_.push_back(std::move(rel));
        }
    }

    // is-a chains must be acyclic with at most kMaxIsAChain levels.
    {
        std::map<std::string, std::vector<std::string>> edges;
        std::set<std::string> nodes;
        for (const auto& r : o.relations_) {
            if (r.type != RelationType::is_a) continue;
            edges[r.from].push_back(r.to);
            nodes.insert(r.from);
            nodes.insert(r.to);
        }
        std::map<std::string, int> depth; // longest chain starting at node; -1 = in progress
        std::function<int(const std::string&)> longest = [&](const std::string& node) -> int {
            auto it = depth.find(node);
            if (it != depth.end()) {
                if (it->second == -1) {
                    problems.add("is-a cycle through " + node);
                    return 0;
                }
                return it->second;
            }
            depth[node] = -1;
            int best = 0;
            for (const auto& next : edges[node]) best = std::max(best, 1 + longest(next));
            depth[node] = best;
            return best;
        };
        for (const auto& node : nodes) {
            if (longest(node) > kMaxIsAChain) {
                problems.add("is-a chain from " + node + " exceeds " +
                             std::to_string(kMaxIsAChain) + " levels");
            }
        }
    }

    if (doc.contains("external_mappings")) {
        for (const auto& [taxonomy, labels] : doc.at("external_mappings").items()) {
            for (const auto& [label, mapping] : labels.items()) {
                ExternalMapping m;
                for (const auto& id : mapping.value("category_ids", json::array())) {
                    const int cid = id.get<int>();
                    if (!o.category_index_.count(cid)) {
                        problems.add("mapping " + taxonomy + "/" + label +
                                     " references unknown category " + std::to_string(cid));
                        continue;
                    }
                    m.category_ids.push_back(cid);
                }
                for (const auto& id : mapping.value("attribute_ids", json::array())) {
                    const int aid = id.get<int>();
                    if (!o.attribute_index_.count(aid)) {
                        problems.add("mapping " + taxonomy + "/" + label +
                                     " references unknown attribute " + std::to_string(aid));
                        continue;
                    }
                    m.attribute_ids.push_back(aid);
                }
                std::sort(m.category_ids.begin(), m.category_ids.end());
                std::sort(m.attribute_ids.begin(), m.attribute_ids.end());
                o.external_mappings_[taxonomy][label] = std::move(m);
            }
        }
    }

    problems.throw_if_any("ontology invariant breach");
    return o;
}

bool Ontology::has_category(int id) const { return category_index_.count(id) > 0; }
bool Ontology::has_attribute(int id) const { return attribute_index_.count(id) > 0; }

const CategoryDef& Ontology::category(int id) const {
    const auto it = category_index_.find(id);
    if (it == category_index_.end()) {
        throw ContractError("unknown category id " + std::to_string(id));
    }
    return categories_[it->second];
}

const AttributeDef& Ontology::attribute(int id) const {
    const auto it = attribute_index_.find(id);
    if (it == attribute_index_.end()) {
        throw ContractError("unknown attribute id " + std::to_string(id));
    }
    return attributes_[it->second];
}

const std::set<std::string>& Ontology::applicability(int category_id) const {
    static const std::set<std::string> kEmpty;
    if (!has_category(category_id)) {
        throw ContractError("unknown category id " + std::to_string(category_id));
    }
    const auto it = applicability_.find(category_id);
    return it == applicability_.end() ? kEmpty : it->second;
}

std::vector<int> Ontology::applicable_attributes(int category_id) const {
    const auto& superclasses = applicability(category_id);
    std::vector<int> ids;
    for (const auto& a : attributes_) {
        if (superclasses.count(a.superclass)) ids.push_back(a.id);
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

bool Ontology::category_has_attributes(int category_id) const {
    return !applicability(category_id).empty();
}

std::vector<std::string> Ontology::attribute_superclasses() const {
    std::vector<std::string> out;
    for (const auto& a : attributes_) {
        if (std::find(out.begin(), out.end(), a.superclass) == out.end()) {
            out.push_back(a.superclass);
        }
    }
    return out;
}

std::vector<int> Ontology::attributes_in_superclass(std::string_view superclass) const {
    std::vector<int> ids;
    for (const auto& a : attributes_) {
        if (a.superclass == superclass) ids.push_back(a.id);
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

std::vector<std::string> Ontology::supercategories() const {
    std::vector<std::string> out;
    for (const auto& c : categories_) {
        if (std::find(out.begin(), out.end(), c.supercategory) == out.end()) {
            out.push_back(c.supercategory);
        }
    }
    return out;
}

std::vector<int> Ontology::categories_in_supercategory(std::string_view supercategory) const {
    std::vector<int> ids;
    for (const auto& c : categories_) {
        if (c.supercategory == supercategory) ids.push_back(c.id);
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

ExternalMapping Ontology::map_external(const std::string& taxonomy,
                                       const std::string& label) const {
    if (taxonomy == "fashionpedia") {
        for (const auto& c : categories_) {
            if (c.name == label) return ExternalMapping{{c.id}, {}};
        }
        throw ContractError("unknown fashionpedia category name '" + label + "'");
    }
    const auto tax = external_mappings_.find(taxonomy);
    if (tax == external_mappings_.end()) {
        throw ContractError("unknown external taxonomy '" + taxonomy + "'");
    }
    const auto entry = tax->second.find(label);
    if (entry == tax->second.end()) {
        throw ContractError("unknown label '" + label + "' in taxonomy '" + taxonomy + "'");
    }
    return entry->second;
}

std::vector<std::string> Ontology::external_taxonomies() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : external_mappings_) out.push_back(name);
    return out;
}

std::vector<std::string> Ontology::external_labels(const std::string& taxonomy) const {
    const auto tax = external_mappings_.find(taxonomy);
    if (tax == external_mappings_.end()) {
        throw ContractError("unknown external taxonomy '" + taxonomy + "'");
    }
    std::vector<std::string> out;
    for (const auto& [label, _] : tax->second) out.push_back(label);
    return out;
}

std::vector<Violation> validate(const std::vector<GroundTruthInstance>& instances,
                                const Ontology& ontology) {
    std::vector<Violation> out;
    std::set<int64_t> seen_ids;

    for (const auto& inst : instances) {
        if (!seen_ids.insert(inst.id).second) {
            out.push_back({inst.id, ViolationKind::duplicate_id,
                           "annotation id " + std::to_string(inst.id) + " appears more than once"});
        }

        if (!ontology.has_category(inst.category_id)) {
            out.push_back({inst.id, ViolationKind::unknown_category,
                           "category " + std::to_string(inst.category_id) + " not in ontology"});
            // attribute applicability cannot be checked without the category
            for (int32_t a : inst.attributes.ids()) {
                if (!ontology.has_attribute(a)) {
                    out.push_back({inst.id, ViolationKind::unknown_attribute,
                                   "attribute " + std::to_string(a) + " not in ontology"});
                }
            }
        } else {
            const auto& allowed = ontology.applicability(inst.category_id);
            for (int32_t a : inst.attributes.ids()) {
                if (!ontology.has_attribute(a)) {
                    out.push_back({inst.id, ViolationKind::unknown_attribute,
                                   "attribute " + std::to_string(a) + " not in ontology"});
                } else if (!allowed.count(ontology.attribute(a).superclass)) {
                    out.push_back({inst.id, ViolationKind::inapplicable_attribute,
                                   "attribute " + std::to_string(a) + " (" +
                                       ontology.attribute(a).superclass +
                                       ") not applicable to category '" +
                                       ontology.category(inst.category_id).name + "'"});
                }
            }
        }

        // Geometry checks: decodable segmentation and positive area unless
        // the instance is flagged ignore.
        if (inst.segmentation.polygons) {
            for (const auto& poly : inst.segmentation.polygons->polygons) {
                if (poly.size() < 3) {
                    out.push_back({inst.id, ViolationKind::geometry_error,
                                   "polygon with fewer than 3 vertices"});
                }
            }
        }
        if (!inst.ignore && inst.area <= 0.0) {
            out.push_back({inst.id, ViolationKind::geometry_error,
                           "non-ignored instance with zero area"});
        }
    }

    std::sort(out.begin(), out.end(), [](const Violation& a, const Violation& b) {
        if (a.instance_id != b.instance_id) return a.instance_id < b.instance_id;
        if (a.kind != b.kind) return static_cast<int>(a.kind) < static_cast<int>(b.kind);
        return a.message < b.message;
    });
    return out;
}

std::vector<CoocEdge> cooccurrence_graph(const std::vector<GroundTruthInstance>& instances,
                                         const Ontology& ontology) {
    (void)ontology;
    std::map<int64_t, std::set<int>> categories_per_image;
    std::map<std::pair<CoocNode, CoocNode>, int64_t> weights;

    for (const auto& inst : instances) {
        categories_per_image[inst.image_id].insert(inst.category_id);
        const CoocNode cat{CoocNodeKind::category, inst.category_id};
        for (int32_t a : inst.attributes.ids()) {
            const CoocNode attr{CoocNodeKind::attribute, a};
            ++weights[{cat, attr}];
        }
    }
    for (const auto& [image_id, cats] : categories_per_image) {
        (void)image_id;
        for (auto it = cats.begin(); it != cats.end(); ++it) {
            for (auto jt = std::next(it); jt != cats.end(); ++jt) {
                ++weights[{CoocNode{CoocNodeKind::category, *it},
                           CoocNode{CoocNodeKind::category, *jt}}];
            }
        }
    }

    std::vector<CoocEdge> edges;
    edges.reserve(weights.size());
    for (const auto& [key, w] : weights) {
        edges.push_back({key.first, key.second, w});
    }
    return edges;
}

} // namespace fpeval
