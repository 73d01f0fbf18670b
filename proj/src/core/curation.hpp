/* Copyright 2026 The ShiftBench Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef SHIFTBENCH_CORE_CURATION_HPP_
#define SHIFTBENCH_CORE_CURATION_HPP_

// OOD class selection over an is-a hierarchy. Starting from every node, the
// pipeline removes the ID classes and their hypernyms and hyponyms, prunes an
// organism subtree, and drops candidates that sit inside the generalized
// decision boundary of some ID class. What survives is a candidate list for
// human review.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace shiftbench {

using ClassSet = std::vector<std::string>;  // sorted, unique

/// Immutable DAG. Nodes are indexed in lexicographic id order, so index
/// comparisons agree with id comparisons.
class Hierarchy {
 public:
  /// edges_tsv: "child<TAB>parent" per line; a line with an empty parent (or
  /// no tab) declares an isolated node. '#' starts a comment line.
  /// names_tsv (optional): "id<TAB>name"; when present it is the node
  /// registry and any edge endpoint missing from it is a dangling reference.
  static Hierarchy parse(std::string_view edges_tsv, std::optional<std::string_view> names_tsv = {});
  static Hierarchy load(const std::filesystem::path& edges,
                        const std::optional<std::filesystem::path>& names = {});

  std::size_t size() const noexcept { return ids_.size(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  bool contains(std::string_view id) const;
  /// Throws Error(kHierarchy) for unknown ids.
  std::size_t index(std::string_view id) const;
  const std::string& id(std::size_t i) const { return ids_.at(i); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  const std::vector<std::size_t>& parents(std::size_t i) const { return parents_.at(i); }
  const std::vector<std::size_t>& children(std::size_t i) const { return children_.at(i); }
  /// Shortest distance from any root.
  std::size_t depth(std::size_t i) const { return depth_.at(i); }
  ClassSet roots() const;

  /// Transitive closures, excluding the node itself.
  ClassSet ancestors(std::string_view id) const;
  ClassSet descendants(std::string_view id) const;
  std::vector<std::size_t> ancestor_indices(std::size_t i) const;
  std::vector<std::size_t> descendant_indices(std::size_t i) const;

 private:
  std::vector<std::string> ids_;
  std::vector<std::string> names_;
  std::vector<std::vector<std::size_t>> parents_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<std::size_t> depth_;
};

enum class AuditCategory {
  kId,
  kHypernym,
  kHyponym,
  kOrganism,
  kCovariateGrounded,
  kNotSister,
  kFinal,
};

const char* audit_category_name(AuditCategory c) noexcept;

struct ClosurePartition {
  ClassSet id_classes;
  ClassSet hypernyms;
  ClassSet hyponyms;
  ClassSet candidates;
};

/// Removes ID classes, their ancestors and their descendants. A node that is
/// both a hypernym and a hyponym is reported as a hypernym.
ClosurePartition exclude_closures(const Hierarchy& h, const ClassSet& id_classes);

/// candidates minus subtree_root and its descendants.
ClassSet exclude_subtree(const Hierarchy& h, std::string_view subtree_root, const ClassSet& candidates);

enum class BoundaryPolicy {
  kDeepestPairwiseLca,  // generalize up to just below the deepest LCA with another ID class
  kIdentity,            // g(c) = c
};

const char* boundary_policy_name(BoundaryPolicy p) noexcept;
BoundaryPolicy parse_boundary_policy(std::string_view s);

struct BoundaryEntry {
  std::string g;
  std::optional<std::string> lca;  // unset when c shares no ancestor with another ID class
};

using BoundaryMap = std::map<std::string, BoundaryEntry>;

/// Requires at least two ID classes for the LCA policy.
BoundaryMap generalized_boundary(const Hierarchy& h, const ClassSet& id_classes,
                                 BoundaryPolicy policy = BoundaryPolicy::kDeepestPairwiseLca);

/// Candidates that are g(c) or a descendant of g(c) for some ID class c are
/// removed. Returns the survivors.
ClassSet exclude_covariate_grounded(const Hierarchy& h, const ClassSet& candidates,
                                    const BoundaryMap& boundary);

/// Other children of each direct parent of an ID class, minus the ID classes.
ClassSet sister_classes(const Hierarchy& h, const ClassSet& id_classes);

struct CurationOptions {
  std::optional<std::string> organism_root;
  bool restrict_to_sisters = false;
  /// Apply the sister restriction before the covariate-grounded stage.
  bool sisters_first = false;
  BoundaryPolicy policy = BoundaryPolicy::kDeepestPairwiseLca;
};

struct AuditRow {
  std::string node_id;
  std::string name;
  AuditCategory category = AuditCategory::kFinal;
  std::string via_id_class;  // ID class responsible for the removal, if any
  std::string g_class;       // generalized class, covariate-grounded rows only
};

struct CurationResult {
  std::vector<AuditRow> audit;  // one row per node, id order
  ClassSet final_classes;
  BoundaryMap boundary;
  std::vector<std::string> warnings;
  std::size_t candidates_after_closures = 0;
  std::size_t candidates_after_organism = 0;
};

CurationResult curate(const Hierarchy& h, const ClassSet& id_classes, const CurationOptions& options);

/// "node_id,name,category,via_id_class,g_class" with a header line.
std::string audit_csv(const CurationResult& result);

}  // namespace shiftbench

#endif  // SHIFTBENCH_CORE_CURATION_HPP_
