#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "fpeval/errors.hpp"

namespace fpeval {

struct GroundTruthInstance; // dataset.hpp

struct CategoryDef {
    int id = 0;
    std::string name;
    std::string supercategory; // outerwear | parts | accessory
    std::string synset;
};

struct AttributeDef {
    int id = 0;
    std::string name;
    std::string superclass;
};

enum class RelationType { is_a, part_of };

/// Typed ontology edge. Endpoints are qualified refs: "category:<id>" or
/// "attribute:<id>". part-of links categories; is-a stays within one kind.
struct Relation {
    RelationType type = RelationType::is_a;
    std::string from;
    std::string to;
};

/// Decomposition of an external taxonomy label into this ontology.
struct ExternalMapping {
    std::vector<int> category_ids;
    std::vector<int> attribute_ids;
};

enum class ViolationKind {
    unknown_category,
    unknown_attribute,
    inapplicable_attribute,
    geometry_error,
    duplicate_id,
};

std::string to_string(ViolationKind kind);

struct Violation {
    int64_t instance_id = 0;
    ViolationKind kind = ViolationKind::unknown_category;
    std::string message;
};

/// Category/attribute vocabulary with applicability rules, typed relations
/// and external taxonomy mappings. Immutable after load; all queries are
/// read-only and thread-safe.
class Ontology {
public:
    /// Parses and validates an ontology file. On invariant breaches throws a
    /// ParseError listing the first 20 problems.
    static Ontology load(const std::string& path);
    static Ontology from_json_text(const std::string& text);

    const std::vector<CategoryDef>& categories() const { return categories_; }
    const std::vector<AttributeDef>& attributes() const { return attributes_; }
    const std::vector<Relation>& relations() const { return relations_; }

    bool has_category(int id) const;
    bool has_attribute(int id) const;
    const CategoryDef& category(int id) const;
    const AttributeDef& attribute(int id) const;

    /// Size of the attribute universe (attribute ids are dense in [0, A)).
    int attribute_universe() const { return static_cast<int>(attributes_.size()); }

    /// Attribute superclasses a category may carry; empty for categories
    /// without attributes (accessories and most parts).
    const std::set<std::string>& applicability(int category_id) const;

    /// Union of attribute ids whose superclass is applicable to the category.
    std::vector<int> applicable_attributes(int category_id) const;

    bool category_has_attributes(int category_id) const;

    /// Distinct attribute superclasses in first-seen order.
    std::vector<std::string> attribute_superclasses() const;
    std::vector<int> attributes_in_superclass(std::string_view superclass) const;

    /// Distinct category supercategories in first-seen order.
    std::vector<std::string> supercategories() const;
    std::vector<int> categories_in_supercategory(std::string_view supercategory) const;

    /// Fashionpedia decomposition of an external taxonomy label. The
    /// "fashionpedia" taxonomy is the identity on category names.
    ExternalMapping map_external(const std::string& taxonomy, const std::string& label) const;

    std::vector<std::string> external_taxonomies() const;
    std::vector<std::string> external_labels(const std::string& taxonomy) const;

private:
    std::vector<CategoryDef> categories_;
    std::vector<AttributeDef> attributes_;
    std::map<int, std::set<std::string>> applicability_;
    std::vector<Relation> relations_;
    std::map<std::string, std::map<std::string, ExternalMapping>> external_mappings_;
    std::map<int, size_t> category_index_;
    std::map<int, size_t> attribute_index_;
};

/// Schema audit of a ground-truth corpus against the ontology. Violations are
/// data, not errors: the result lists one entry per breach, sorted by
/// (instance id, kind, message).
std::vector<Violation> validate(const std::vector<GroundTruthInstance>& instances,
                                const Ontology& ontology);

enum class CoocNodeKind { category, attribute };

struct CoocNode {
    CoocNodeKind kind = CoocNodeKind::category;
    int id = 0;

    auto operator<=>(const CoocNode&) const = default;
};

struct CoocEdge {
    CoocNode a;
    CoocNode b;
    int64_t weight = 0;
};

/// Aggregated co-occurrence graph over a corpus: category-category edges
/// count images where both categories appear; category-attribute edges count
/// instances carrying both. Edges are sorted (category pairs first).
std::vector<CoocEdge> cooccurrence_graph(const std::vector<GroundTruthInstance>& instances,
                                         const Ontology& ontology);

} // namespace fpeval
