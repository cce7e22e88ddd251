// Copyright 2026 The ProxyMoE Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Embedding sets standing in for the public pool, client-private data, proxy
// subsets and test splits, plus the synthetic multi-domain generator.

#ifndef PROXYMOE_EMBEDDING_H_
#define PROXYMOE_EMBEDDING_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "proxymoe/linalg.h"

namespace proxymoe {

enum class SetRole { kPublic, kPrivate, kProxy, kTest };

std::string_view set_role_name(SetRole role);

struct EmbeddingRecord {
  std::string id;
  Vector vec;
  std::optional<int> label;
  std::optional<int> domain;
  // Sequence-group id; the records of one sequence are stored consecutively.
  std::optional<std::string> seq;

  friend bool operator==(const EmbeddingRecord&,
                         const EmbeddingRecord&) = default;
};

class EmbeddingSet {
 public:
  explicit EmbeddingSet(SetRole role = SetRole::kPublic,
                        std::size_t dimension = 0);

  // Throws DimensionMismatch on a vector of the wrong length and
  // InvalidArgument on a duplicate id. The first record fixes the dimension
  // of an empty, dimensionless set.
  void add(EmbeddingRecord record);

  SetRole role() const noexcept { return role_; }
  void set_role(SetRole role) noexcept { role_ = role; }
  std::size_t dimension() const noexcept { return dimension_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }

  const std::vector<EmbeddingRecord>& records() const noexcept {
    return records_;
  }
  const EmbeddingRecord& operator[](std::size_t i) const { return records_[i]; }

  std::optional<std::size_t> find(std::string_view id) const;
  bool contains(std::string_view id) const { return find(id).has_value(); }

  friend bool operator==(const EmbeddingSet& a, const EmbeddingSet& b) {
    return a.role_ == b.role_ && a.dimension_ == b.dimension_ &&
           a.records_ == b.records_;
  }

 private:
  SetRole role_;
  std::size_t dimension_;
  std::vector<EmbeddingRecord> records_;
  std::unordered_map<std::string, std::size_t> index_;
};

// JSON-lines: one object per line with `id`, `vec`, and optional `label`,
// `domain`, `seq`. Blank lines are skipped.
EmbeddingSet load_embeddings(const std::filesystem::path& path,
                             SetRole role = SetRole::kPublic);
EmbeddingSet parse_embeddings(std::string_view text,
                              SetRole role = SetRole::kPublic);
void save_embeddings(const EmbeddingSet& set,
                     const std::filesystem::path& path);
std::string format_embeddings(const EmbeddingSet& set);

// One sample: a sequence of token vectors (a single token when T = 1).
struct Sample {
  std::string id;
  std::vector<Vector> tokens;
  std::optional<int> label;
  std::optional<int> domain;
};

// Groups consecutive records with the same `seq` into samples; records without
// `seq` are single-token samples named by their own id.
std::vector<Sample> group_samples(const EmbeddingSet& set);

// One record per sample, carrying the mean token vector and the sample id.
// This is the representation relevance scoring and kernel selection run on.
EmbeddingSet sample_means(const EmbeddingSet& set);

// Token records of `set` whose sample id is in `sample_ids`, in the order of
// `sample_ids`. Throws InvalidArgument for an unknown sample id.
EmbeddingSet select_samples(const EmbeddingSet& set,
                            std::span<const std::string> sample_ids,
                            SetRole role);

// Concatenation; ids must stay unique.
EmbeddingSet concat(const EmbeddingSet& a, const EmbeddingSet& b, SetRole role);

// Synthetic analog of several client domains and a broad public pool.
//
// Each domain has a center and a class direction. A token of a domain-d
// sequence is either a domain token drawn near that center (class signal along
// the domain's direction) or, with probability `collision_overlap`, a shared
// token drawn near a mode common to all domains whose class signal flips sign
// between neighbouring domains, so its surface form alone cannot identify the
// expert that knows how to read it. Public distractor sequences come from
// `distractor_modes` further modes, labelled as domains num_domains, ....
struct DomainSpec {
  int num_domains = 3;
  int tokens_per_sequence = 4;
  int sequences_per_domain = 16;
  int test_sequences_per_domain = 400;
  int dimension = 16;
  // Optional explicit centers; generated with norm `center_radius` if empty.
  std::vector<Vector> cluster_centers;
  double center_radius = 3.0;
  double intra_cluster_stddev = 0.5;
  double collision_overlap = 0.3;
  std::uint64_t seed = 0;

  int num_classes = 2;
  double class_signal = 0.6;
  double shared_class_signal = 1.5;
  // Domain sub-modes: each sequence picks one sub-mode. Each sub-mode tilts
  // the domain's class direction by `submode_direction_spread`.
  int submodes_per_domain = 3;
  double submode_radius = 1.0;
  double submode_direction_spread = 2.0;

  int public_sequences_per_domain = 150;
  int public_distractor_sequences = 600;
  int distractor_modes = 4;
  double public_spread = 1.5;
  double public_label_noise = 0.1;
  // Scale of the class signal on shared tokens inside public sequences. At 0
  // public text uses the ambiguous tokens without the clients' meaning.
  double public_shared_signal = 0.0;
  // Public domain tokens sit this fraction of the domain center closer to
  // the origin than client tokens.
  double public_shift = 0.0;
  // A `duplicate_fraction` share of public sequences reappears
  // `duplicate_copies` more times with `duplicate_jitter` noise.
  double duplicate_fraction = 0.3;
  int duplicate_copies = 5;
  double duplicate_jitter = 0.01;
};

// Throws InvalidSpec.
void validate(const DomainSpec& spec);

struct SyntheticDomains {
  EmbeddingSet public_set;
  std::vector<EmbeddingSet> clients;
  std::vector<EmbeddingSet> tests;
};

SyntheticDomains generate_synthetic_domains(const DomainSpec& spec);

struct ProjectedPoint {
  std::string id;
  double x = 0.0;
  double y = 0.0;
};

struct Projection {
  std::vector<ProjectedPoint> points;
  // Fraction of total variance carried by the two retained components.
  double retained_variance = 0.0;
};

// Projection onto the top two principal components of the mean-centered set.
// Throws DegenerateSet when every vector is identical and InvalidArgument for
// fewer than two records.
Projection pca_project_2d(const EmbeddingSet& set);

}  // namespace proxymoe

#endif  // PROXYMOE_EMBEDDING_H_
