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
#include "curation.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "error.hpp"

namespace shiftbench {

namespace {

constexpr std::size_t kUnreached = std::numeric_limits<std::size_t>::max();

struct Line {
  std::size_t number;
  std::vector<std::string> fields;
};

std::vector<Line> split_tsv(std::string_view text, std::string_view what) {
  std::vector<Line> out;
  std::size_t number = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++number;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    if (line.front() == '#') continue;
    Line parsed{number, {}};
    std::size_t start = 0;
    while (true) {
      std::size_t tab = line.find('\t', start);
      parsed.fields.emplace_back(line.substr(start, tab == std::string_view::npos ? tab : tab - start));
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    if (parsed.fields.size() > 2)
      fail(ErrorCode::kFormat, std::string(what) + " line " + std::to_string(number) +
                                   " has more than two tab-separated fields");
    if (parsed.fields[0].empty())
      fail(ErrorCode::kFormat, std::string(what) + " line " + std::to_string(number) + " has an empty id");
    out.push_back(std::move(parsed));
    if (end == text.size()) break;
  }
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::size_t> closure(std::size_t start, const std::vector<std::vector<std::size_t>>& adj) {
  std::vector<char> seen(adj.size(), 0);
  std::vector<std::size_t> stack(adj[start].begin(), adj[start].end());
  std::vector<std::size_t> out;
  while (!stack.empty()) {
    std::size_t v = stack.back();
    stack.pop_back();
    if (seen[v]) continue;
    seen[v] = 1;
    out.push_back(v);
    for (std::size_t w : adj[v])
      if (!seen[w]) stack.push_back(w);
  }
  std::sort(out.begin(), out.end());
  return out;
}

ClassSet to_ids(const Hierarchy& h, const std::vector<std::size_t>& idx) {
  ClassSet out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(h.id(i));
  return out;
}

std::vector<std::size_t> resolve(const Hierarchy& h, const ClassSet& ids) {
  std::vector<std::size_t> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(h.index(id));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

struct Tagging {
  std::vector<std::optional<AuditCategory>> category;
  std::vector<std::string> via;
  std::vector<std::string> g;
};

// Tags ids, hypernyms and hyponyms in that precedence; the responsible ID
// class is the smallest one in id order.
Tagging tag_closures(const Hierarchy& h, const std::vector<std::size_t>& ids) {
  Tagging t;
  t.category.resize(h.size());
  t.via.resize(h.size());
  t.g.resize(h.size());
  for (std::size_t c : ids) t.category[c] = AuditCategory::kId;
  for (AuditCategory cat : {AuditCategory::kHypernym, AuditCategory::kHyponym}) {
    for (std::size_t c : ids) {
      auto rel = cat == AuditCategory::kHypernym ? h.ancestor_indices(c) : h.descendant_indices(c);
      for (std::size_t v : rel) {
        if (t.category[v]) continue;
        t.category[v] = cat;
        t.via[v] = h.id(c);
      }
    }
  }
  return t;
}

std::vector<std::size_t> untagged(const Tagging& t) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < t.category.size(); ++i)
    if (!t.category[i]) out.push_back(i);
  return out;
}

}  // namespace

Hierarchy Hierarchy::parse(std::string_view edges_tsv, std::optional<std::string_view> names_tsv) {
  auto edge_lines = split_tsv(edges_tsv, "hierarchy");
  std::map<std::string, std::string> registry;
  const bool have_names = names_tsv.has_value();
  if (have_names) {
    for (auto& line : split_tsv(*names_tsv, "names file")) {
      auto [it, inserted] =
          registry.emplace(line.fields[0], line.fields.size() > 1 ? line.fields[1] : std::string());
      if (!inserted)
        fail(ErrorCode::kFormat, "names file line " + std::to_string(line.number) +
                                     " repeats id '" + line.fields[0] + "'");
    }
  }
  auto require = [&](const std::string& id, std::size_t line) {
    if (registry.count(id)) return;
    if (have_names)
      fail(ErrorCode::kHierarchy, "dangling reference to '" + id + "' on hierarchy line " +
                                      std::to_string(line) + ": not in the names file");
    registry.emplace(id, std::string());
  };
  for (const auto& line : edge_lines) {
    require(line.fields[0], line.number);
    if (line.fields.size() > 1 && !line.fields[1].empty()) require(line.fields[1], line.number);
  }

  Hierarchy h;
  for (auto& [id, name] : registry) {
    h.ids_.push_back(id);
    h.names_.push_back(name);
  }
  const std::size_t n = h.ids_.size();
  h.parents_.resize(n);
  h.children_.resize(n);
  for (const auto& line : edge_lines) {
    if (line.fields.size() < 2 || line.fields[1].empty()) continue;
    std::size_t c = h.index(line.fields[0]);
    std::size_t p = h.index(line.fields[1]);
    if (c == p) fail(ErrorCode::kHierarchy, "cycle detected: " + h.ids_[c] + " -> " + h.ids_[c]);
    h.parents_[c].push_back(p);
    h.children_[p].push_back(c);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (auto* adj : {&h.parents_[i], &h.children_[i]}) {
      std::sort(adj->begin(), adj->end());
      adj->erase(std::unique(adj->begin(), adj->end()), adj->end());
    }
  }

  // Breadth-first from the roots gives shortest depths; Kahn's count of
  // unresolved parents finds the nodes stuck on or below a cycle.
  h.depth_.assign(n, kUnreached);
  std::vector<std::size_t> pending(n);
  std::deque<std::size_t> queue;
  for (std::size_t i = 0; i < n; ++i) {
    pending[i] = h.parents_[i].size();
    if (pending[i] == 0) queue.push_back(i);
  }
  std::vector<char> done(n, 0);
  std::deque<std::size_t> bfs(queue.begin(), queue.end());
  for (std::size_t r : bfs) h.depth_[r] = 0;
  while (!bfs.empty()) {
    std::size_t v = bfs.front();
    bfs.pop_front();
    for (std::size_t c : h.children_[v]) {
      if (h.depth_[c] != kUnreached) continue;
      h.depth_[c] = h.depth_[v] + 1;
      bfs.push_back(c);
    }
  }
  while (!queue.empty()) {
    std::size_t v = queue.front();
    queue.pop_front();
    done[v] = 1;
    for (std::size_t c : h.children_[v])
      if (--pending[c] == 0) queue.push_back(c);
  }
  auto stuck = std::find(done.begin(), done.end(), 0);
  if (stuck != done.end()) {
    // Every stuck node has a stuck parent, so walking parents must repeat.
    std::size_t v = static_cast<std::size_t>(stuck - done.begin());
    std::vector<std::size_t> path;
    std::vector<std::size_t> position(n, kUnreached);
    while (position[v] == kUnreached) {
      position[v] = path.size();
      path.push_back(v);
      for (std::size_t p : h.parents_[v]) {
        if (!done[p]) {
          v = p;
          break;
        }
      }
    }
    std::string witness;
    for (std::size_t i = position[v]; i < path.size(); ++i) witness += h.ids_[path[i]] + " -> ";
    witness += h.ids_[v];
    fail(ErrorCode::kHierarchy, "cycle detected: " + witness);
  }
  return h;
}

Hierarchy Hierarchy::load(const std::filesystem::path& edges,
                          const std::optional<std::filesystem::path>& names) {
  std::string edge_text = read_text(edges);
  if (!names) return parse(edge_text);
  std::string name_text = read_text(*names);
  return parse(edge_text, std::string_view(name_text));
}

bool Hierarchy::contains(std::string_view id) const {
  return std::binary_search(ids_.begin(), ids_.end(), id);
}

std::size_t Hierarchy::index(std::string_view id) const {
  auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
  if (it == ids_.end() || *it != id)
    fail(ErrorCode::kHierarchy, "unknown node '" + std::string(id) + "'");
  return static_cast<std::size_t>(it - ids_.begin());
}

ClassSet Hierarchy::roots() const {
  ClassSet out;
  for (std::size_t i = 0; i < ids_.size(); ++i)
    if (parents_[i].empty()) out.push_back(ids_[i]);
  return out;
}

std::vector<std::size_t> Hierarchy::ancestor_indices(std::size_t i) const {
  return closure(i, parents_);
}

std::vector<std::size_t> Hierarchy::descendant_indices(std::size_t i) const {
  return closure(i, children_);
}

ClassSet Hierarchy::ancestors(std::string_view id) const {
  return to_ids(*this, ancestor_indices(index(id)));
}

ClassSet Hierarchy::descendants(std::string_view id) const {
  return to_ids(*this, descendant_indices(index(id)));
}

const char* audit_category_name(AuditCategory c) noexcept {
  switch (c) {
    case AuditCategory::kId:
      return "id";
    case AuditCategory::kHypernym:
      return "excluded_hypernym";
    case AuditCategory::kHyponym:
      return "excluded_hyponym";
    case AuditCategory::kOrganism:
      return "excluded_organism";
    case AuditCategory::kCovariateGrounded:
      return "excluded_covariate_grounded";
    case AuditCategory::kNotSister:
      return "excluded_not_sister";
    case AuditCategory::kFinal:
      return "final";
  }
  return "?";
}

ClosurePartition exclude_closures(const Hierarchy& h, const ClassSet& id_classes) {
  if (id_classes.empty()) fail(ErrorCode::kInvalidArgument, "ID class set is empty");
  auto ids = resolve(h, id_classes);
  Tagging t = tag_closures(h, ids);
  ClosurePartition out;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (!t.category[i]) {
      out.candidates.push_back(h.id(i));
      continue;
    }
    switch (*t.category[i]) {
      case AuditCategory::kId:
        out.id_classes.push_back(h.id(i));
        break;
      case AuditCategory::kHypernym:
        out.hypernyms.push_back(h.id(i));
        break;
      default:
        out.hyponyms.push_back(h.id(i));
        break;
    }
  }
  return out;
}

ClassSet exclude_subtree(const Hierarchy& h, std::string_view subtree_root, const ClassSet& candidates) {
  std::size_t r = h.index(subtree_root);
  auto sub = h.descendant_indices(r);
  sub.push_back(r);
  std::sort(sub.begin(), sub.end());
  ClassSet out;
  for (const auto& c : candidates)
    if (!std::binary_search(sub.begin(), sub.end(), h.index(c))) out.push_back(c);
  return out;
}

const char* boundary_policy_name(BoundaryPolicy p) noexcept {
  switch (p) {
    case BoundaryPolicy::kDeepestPairwiseLca:
      return "deepest_lca";
    case BoundaryPolicy::kIdentity:
      return "identity";
  }
  return "?";
}

BoundaryPolicy parse_boundary_policy(std::string_view s) {
  if (s == "deepest_lca") return BoundaryPolicy::kDeepestPairwiseLca;
  if (s == "identity") return BoundaryPolicy::kIdentity;
  fail(ErrorCode::kConfig, "unknown boundary policy '" + std::string(s) + "'");
}

BoundaryMap generalized_boundary(const Hierarchy& h, const ClassSet& id_classes, BoundaryPolicy policy) {
  auto ids = resolve(h, id_classes);
  BoundaryMap out;
  if (policy == BoundaryPolicy::kIdentity) {
    for (std::size_t c : ids) out[h.id(c)] = {h.id(c), std::nullopt};
    return out;
  }
  if (ids.size() < 2)
    fail(ErrorCode::kInvalidArgument, "generalized boundary needs at least two ID classes");

  std::vector<std::vector<std::size_t>> inclusive(ids.size());
  for (std::size_t k = 0; k < ids.size(); ++k) {
    inclusive[k] = h.ancestor_indices(ids[k]);
    inclusive[k].insert(std::lower_bound(inclusive[k].begin(), inclusive[k].end(), ids[k]), ids[k]);
  }
  // Deeper wins; equal depth goes to the smaller index (= smaller id).
  auto better = [&](std::size_t a, std::size_t b) {
    if (b == kUnreached) return true;
    if (h.depth(a) != h.depth(b)) return h.depth(a) > h.depth(b);
    return a < b;
  };

  std::vector<std::size_t> common;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    std::size_t best = kUnreached;
    for (std::size_t other = 0; other < ids.size(); ++other) {
      if (other == k) continue;
      common.clear();
      std::set_intersection(inclusive[k].begin(), inclusive[k].end(), inclusive[other].begin(),
                            inclusive[other].end(), std::back_inserter(common));
      for (std::size_t v : common)
        if (better(v, best)) best = v;
    }
    const std::size_t c = ids[k];
    BoundaryEntry entry{h.id(c), std::nullopt};
    if (best != kUnreached) {
      entry.lca = h.id(best);
      if (best != c) {
        const auto& kids = h.children(best);
        if (std::binary_search(kids.begin(), kids.end(), c)) {
          entry.g = h.id(c);
        } else {
          for (std::size_t child : kids) {
            if (std::binary_search(inclusive[k].begin(), inclusive[k].end(), child)) {
              entry.g = h.id(child);
              break;
            }
          }
        }
      }
    }
    out[h.id(c)] = std::move(entry);
  }
  return out;
}

ClassSet exclude_covariate_grounded(const Hierarchy& h, const ClassSet& candidates,
                                    const BoundaryMap& boundary) {
  std::vector<char> covered(h.size(), 0);
  for (const auto& [c, entry] : boundary) {
    std::size_t g = h.index(entry.g);
    covered[g] = 1;
    for (std::size_t d : h.descendant_indices(g)) covered[d] = 1;
  }
  ClassSet out;
  for (const auto& c : candidates)
    if (!covered[h.index(c)]) out.push_back(c);
  return out;
}

ClassSet sister_classes(const Hierarchy& h, const ClassSet& id_classes) {
  auto ids = resolve(h, id_classes);
  std::set<std::size_t> out;
  for (std::size_t c : ids)
    for (std::size_t p : h.parents(c))
      for (std::size_t s : h.children(p))
        if (!std::binary_search(ids.begin(), ids.end(), s)) out.insert(s);
  return to_ids(h, std::vector<std::size_t>(out.begin(), out.end()));
}

CurationResult curate(const Hierarchy& h, const ClassSet& id_classes, const CurationOptions& options) {
  if (id_classes.empty()) fail(ErrorCode::kInvalidArgument, "ID class set is empty");
  auto ids = resolve(h, id_classes);
  CurationResult result;
  Tagging t = tag_closures(h, ids);
  result.candidates_after_closures = untagged(t).size();

  if (options.organism_root) {
    if (!h.contains(*options.organism_root)) {
      result.warnings.push_back("organism root '" + *options.organism_root +
                                "' is not in the hierarchy; organism stage skipped");
    } else {
      std::size_t r = h.index(*options.organism_root);
      auto sub = h.descendant_indices(r);
      sub.push_back(r);
      for (std::size_t v : sub)
        if (!t.category[v]) t.category[v] = AuditCategory::kOrganism;
    }
  }
  result.candidates_after_organism = untagged(t).size();

  ClassSet id_names = to_ids(h, ids);
  if (options.policy == BoundaryPolicy::kDeepestPairwiseLca && ids.size() < 2) {
    result.warnings.push_back("generalized boundary needs at least two ID classes; g(c) = c used");
    result.boundary = generalized_boundary(h, id_names, BoundaryPolicy::kIdentity);
  } else {
    result.boundary = generalized_boundary(h, id_names, options.policy);
    if (options.policy == BoundaryPolicy::kDeepestPairwiseLca) {
      for (const auto& [c, entry] : result.boundary)
        if (!entry.lca)
          result.warnings.push_back("ID class '" + c +
                                    "' shares no ancestor with another ID class; g(c) = c used");
    }
  }

  auto covariate_stage = [&] {
    for (const auto& [c, entry] : result.boundary) {
      std::size_t g = h.index(entry.g);
      auto sub = h.descendant_indices(g);
      sub.push_back(g);
      std::sort(sub.begin(), sub.end());
      for (std::size_t v : sub) {
        if (t.category[v]) continue;
        t.category[v] = AuditCategory::kCovariateGrounded;
        t.via[v] = c;
        t.g[v] = entry.g;
      }
    }
  };
  auto sister_stage = [&] {
    auto sisters = resolve(h, sister_classes(h, id_names));
    for (std::size_t v = 0; v < h.size(); ++v)
      if (!t.category[v] && !std::binary_search(sisters.begin(), sisters.end(), v))
        t.category[v] = AuditCategory::kNotSister;
  };
  if (options.restrict_to_sisters && options.sisters_first) sister_stage();
  covariate_stage();
  if (options.restrict_to_sisters && !options.sisters_first) sister_stage();

  result.audit.reserve(h.size());
  for (std::size_t v = 0; v < h.size(); ++v) {
    AuditCategory cat = t.category[v].value_or(AuditCategory::kFinal);
    if (cat == AuditCategory::kFinal) result.final_classes.push_back(h.id(v));
    result.audit.push_back({h.id(v), h.name(v), cat, t.via[v], t.g[v]});
  }
  return result;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

std::string audit_csv(const CurationResult& result) {
  std::string out = "node_id,name,category,via_id_class,g_class\n";
  for (const auto& row : result.audit) {
    out += csv_field(row.node_id) + ',' + csv_field(row.name) + ',' +
           audit_category_name(row.category) + ',' + csv_field(row.via_id_class) + ',' +
           csv_field(row.g_class) + '\n';
  }
  return out;
}

}  // namespace shiftbench
