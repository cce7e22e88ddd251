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


#include "proxymoe/embedding.h"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

#include "proxymoe/error.h"
#include "proxymoe/rng.h"

namespace proxymoe {
namespace {

using nlohmann::json;

// Stream ids for the generator. Per-domain streams are spaced so each domain
// owns its own block; shared and distractor streams sit far above them.
constexpr std::uint64_t kStreamsPerDomain = 16;
constexpr std::uint64_t kSharedStream = std::uint64_t{1} << 40;
constexpr std::uint64_t kDistractorStream = kSharedStream + 1;

enum DomainStream : std::uint64_t {
  kGeometry = 0,
  kPrivate = 1,
  kTest = 2,
  kPublic = 3,
  kDuplicates = 4,
};

Rng domain_rng(const DomainSpec& spec, int domain, DomainStream which) {
  return Rng(spec.seed,
             static_cast<std::uint64_t>(domain) * kStreamsPerDomain + which);
}

Vector random_unit(Rng& rng, std::size_t dim) {
  Vector v(dim);
  double n2 = 0.0;
  while (n2 < 1e-12) {
    for (double& x : v) x = rng.normal();
    n2 = squared_norm(v);
  }
  const double inv = 1.0 / std::sqrt(n2);
  for (double& x : v) x *= inv;
  return v;
}

void axpy(double a, std::span<const double> x, Vector& y) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

struct DomainGeometry {
  Vector center;
  std::vector<Vector> submodes;  // absolute sub-mode centers
  std::vector<Vector> class_directions;  // one per sub-mode
  double shared_sign = 1.0;
};

struct SharedGeometry {
  Vector center;
  Vector class_direction;
};

DomainGeometry make_domain_geometry(const DomainSpec& spec, int d) {
  const auto dim = static_cast<std::size_t>(spec.dimension);
  Rng rng = domain_rng(spec, d, kGeometry);
  DomainGeometry g;
  Vector dir = random_unit(rng, dim);
  if (!spec.cluster_centers.empty()) {
    g.center = spec.cluster_centers[static_cast<std::size_t>(d)];
  } else {
    g.center = Vector(dim);
    axpy(spec.center_radius, dir, g.center);
  }
  const Vector class_direction = random_unit(rng, dim);
  for (int j = 0; j < spec.submodes_per_domain; ++j) {
    Vector c = g.center;
    axpy(spec.submode_radius, random_unit(rng, dim), c);
    g.submodes.push_back(std::move(c));
    Vector u = class_direction;
    axpy(spec.submode_direction_spread, random_unit(rng, dim), u);
    const double n = norm(u);
    if (n > 1e-12) {
      for (double& v : u) v /= n;
    } else {
      u = class_direction;
    }
    g.class_directions.push_back(std::move(u));
  }
  g.shared_sign = d % 2 == 0 ? 1.0 : -1.0;
  return g;
}

SharedGeometry make_shared_geometry(const DomainSpec& spec) {
  const auto dim = static_cast<std::size_t>(spec.dimension);
  Rng rng(spec.seed, kSharedStream);
  SharedGeometry g;
  g.center = Vector(dim);
  axpy(spec.center_radius, random_unit(rng, dim), g.center);
  g.class_direction = random_unit(rng, dim);
  return g;
}

double class_coordinate(int label, int num_classes) {
  return 2.0 * label / (num_classes - 1) - 1.0;
}

// Tokens of one domain sequence. `spread` scales the noise,
// `shared_signal` the class signal carried by shared tokens, and `shift`
// moves domain tokens toward the origin by that fraction of the center.
std::vector<Vector> domain_sequence(const DomainSpec& spec,
                                    const DomainGeometry& g,
                                    const SharedGeometry& shared, int label,
                                    double spread, double shared_signal,
                                    double shift, Rng& rng) {
  const auto dim = static_cast<std::size_t>(spec.dimension);
  const double sigma = spec.intra_cluster_stddev * spread;
  const double coord = class_coordinate(label, spec.num_classes);
  const auto mode = static_cast<std::size_t>(rng.below(g.submodes.size()));
  const Vector& base = g.submodes[mode];
  std::vector<Vector> tokens;
  tokens.reserve(static_cast<std::size_t>(spec.tokens_per_sequence));
  for (int t = 0; t < spec.tokens_per_sequence; ++t) {
    Vector x;
    if (rng.uniform() < spec.collision_overlap) {
      x = shared.center;
      axpy(g.shared_sign * coord * spec.shared_class_signal * shared_signal,
           shared.class_direction, x);
    } else {
      x = base;
      axpy(-shift, g.center, x);
      axpy(coord * spec.class_signal, g.class_directions[mode], x);
    }
    for (std::size_t i = 0; i < dim; ++i) x[i] += sigma * rng.normal();
    tokens.push_back(std::move(x));
  }
  return tokens;
}

void append_sequence(EmbeddingSet& set, const std::string& seq_id,
                     std::vector<Vector> tokens, int label,
                     std::optional<int> domain) {
  const bool single = tokens.size() == 1;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    EmbeddingRecord r;
    r.id = single ? seq_id : seq_id + "-t" + std::to_string(t);
    r.vec = std::move(tokens[t]);
    r.label = label;
    r.domain = domain;
    if (!single) r.seq = seq_id;
    set.add(std::move(r));
  }
}

// Appends a public sequence and, with probability `duplicate_fraction`,
// `duplicate_copies` jittered copies of it.
void append_public(const DomainSpec& spec, EmbeddingSet& set,
                   const std::string& seq_id, std::vector<Vector> tokens,
                   int label, std::optional<int> domain, Rng& rng) {
  const bool dup = spec.duplicate_copies > 0 &&
                   rng.uniform() < spec.duplicate_fraction;
  const std::vector<Vector> original = tokens;
  append_sequence(set, seq_id, std::move(tokens), label, domain);
  if (!dup) return;
  for (int c = 0; c < spec.duplicate_copies; ++c) {
    auto copy = original;
    for (auto& t : copy) {
      for (double& v : t) v += spec.duplicate_jitter * rng.normal();
    }
    append_sequence(set, seq_id + "-dup" + std::to_string(c), std::move(copy),
                    label, domain);
  }
}

std::string sample_key(const EmbeddingRecord& r) {
  return r.seq ? *r.seq : r.id;
}

[[noreturn]] void parse_fail(std::size_t line, const std::string& reason) {
  throw Error(ErrorKind::kParseError,
              "line " + std::to_string(line) + ": " + reason);
}

}  // namespace

std::string_view set_role_name(SetRole role) {
  switch (role) {
    case SetRole::kPublic: return "public";
    case SetRole::kPrivate: return "private";
    case SetRole::kProxy: return "proxy";
    case SetRole::kTest: return "test";
  }
  return "unknown";
}

EmbeddingSet::EmbeddingSet(SetRole role, std::size_t dimension)
    : role_(role), dimension_(dimension) {}

void EmbeddingSet::add(EmbeddingRecord record) {
  if (records_.empty() && dimension_ == 0) dimension_ = record.vec.size();
  if (record.vec.size() != dimension_) {
    throw Error(ErrorKind::kDimensionMismatch,
                "record '" + record.id + "' has " +
                    std::to_string(record.vec.size()) + " dims, set has " +
                    std::to_string(dimension_));
  }
  if (index_.contains(record.id)) {
    throw Error(ErrorKind::kInvalidArgument, "duplicate id '" + record.id + "'");
  }
  index_.emplace(record.id, records_.size());
  records_.push_back(std::move(record));
}

std::optional<std::size_t> EmbeddingSet::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

EmbeddingSet parse_embeddings(std::string_view text, SetRole role) {
  EmbeddingSet set(role);
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      parse_fail(line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) parse_fail(line_no, "record is not an object");
    if (!j.contains("id") || !j["id"].is_string()) {
      parse_fail(line_no, "missing string field 'id'");
    }
    if (!j.contains("vec") || !j["vec"].is_array()) {
      parse_fail(line_no, "missing array field 'vec'");
    }
    EmbeddingRecord r;
    r.id = j["id"].get<std::string>();
    for (const auto& v : j["vec"]) {
      if (!v.is_number()) parse_fail(line_no, "non-numeric entry in 'vec'");
      r.vec.push_back(v.get<double>());
    }
    if (r.vec.empty()) parse_fail(line_no, "empty 'vec'");
    if (j.contains("label")) {
      if (!j["label"].is_number_integer()) parse_fail(line_no, "bad 'label'");
      r.label = j["label"].get<int>();
    }
    if (j.contains("domain")) {
      if (!j["domain"].is_number_integer()) parse_fail(line_no, "bad 'domain'");
      r.domain = j["domain"].get<int>();
    }
    if (j.contains("seq")) {
      if (!j["seq"].is_string()) parse_fail(line_no, "bad 'seq'");
      r.seq = j["seq"].get<std::string>();
    }
    if (!set.empty() && r.vec.size() != set.dimension()) {
      throw Error(ErrorKind::kDimensionMismatch,
                  "line " + std::to_string(line_no) + ": " +
                      std::to_string(r.vec.size()) + " dims, expected " +
                      std::to_string(set.dimension()));
    }
    try {
      set.add(std::move(r));
    } catch (const Error& e) {
      parse_fail(line_no, e.what());
    }
  }
  if (set.empty()) throw Error(ErrorKind::kParseError, "empty set");
  return set;
}

EmbeddingSet load_embeddings(const std::filesystem::path& path, SetRole role) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::kParseError, "cannot open '" + path.string() + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_embeddings(buf.str(), role);
}

std::string format_embeddings(const EmbeddingSet& set) {
  std::string out;
  for (const auto& r : set.records()) {
    json j;
    j["id"] = r.id;
    j["vec"] = r.vec;
    if (r.label) j["label"] = *r.label;
    if (r.domain) j["domain"] = *r.domain;
    if (r.seq) j["seq"] = *r.seq;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void save_embeddings(const EmbeddingSet& set,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorKind::kInvalidArgument,
                "cannot write '" + path.string() + "'");
  }
  out << format_embeddings(set);
}

std::vector<Sample> group_samples(const EmbeddingSet& set) {
  std::vector<Sample> samples;
  for (const auto& r : set.records()) {
    const std::string key = sample_key(r);
    if (samples.empty() || !r.seq || samples.back().id != key) {
      samples.push_back(Sample{key, {}, r.label, r.domain});
    }
    samples.back().tokens.push_back(r.vec);
  }
  return samples;
}

EmbeddingSet sample_means(const EmbeddingSet& set) {
  EmbeddingSet out(set.role(), set.dimension());
  for (auto& s : group_samples(set)) {
    Vector mean(set.dimension(), 0.0);
    for (const auto& t : s.tokens) axpy(1.0, t, mean);
    for (double& v : mean) v /= static_cast<double>(s.tokens.size());
    out.add(EmbeddingRecord{s.id, std::move(mean), s.label, s.domain, {}});
  }
  return out;
}

EmbeddingSet select_samples(const EmbeddingSet& set,
                            std::span<const std::string> sample_ids,
                            SetRole role) {
  std::unordered_map<std::string, std::vector<std::size_t>> by_sample;
  for (std::size_t i = 0; i < set.size(); ++i) {
    by_sample[sample_key(set[i])].push_back(i);
  }
  EmbeddingSet out(role, set.dimension());
  for (const auto& id : sample_ids) {
    auto it = by_sample.find(id);
    if (it == by_sample.end()) {
      throw Error(ErrorKind::kInvalidArgument, "unknown sample id '" + id + "'");
    }
    for (std::size_t i : it->second) out.add(set[i]);
  }
  return out;
}

EmbeddingSet concat(const EmbeddingSet& a, const EmbeddingSet& b,
                    SetRole role) {
  const std::size_t dim = a.empty() ? b.dimension() : a.dimension();
  EmbeddingSet out(role, dim);
  for (const auto& r : a.records()) out.add(r);
  for (const auto& r : b.records()) out.add(r);
  return out;
}

void validate(const DomainSpec& spec) {
  auto fail = [](const std::string& why) {
    throw Error(ErrorKind::kInvalidSpec, why);
  };
  if (spec.num_domains < 1) fail("num_domains must be >= 1");
  if (spec.tokens_per_sequence < 1) fail("tokens_per_sequence must be >= 1");
  if (spec.sequences_per_domain < 1) fail("sequences_per_domain must be >= 1");
  if (spec.test_sequences_per_domain < 1) {
    fail("test_sequences_per_domain must be >= 1");
  }
  if (spec.dimension < 1) fail("dimension must be >= 1");
  if (spec.num_classes < 2) fail("num_classes must be >= 2");
  if (spec.submodes_per_domain < 1) fail("submodes_per_domain must be >= 1");
  if (!(spec.collision_overlap >= 0.0 && spec.collision_overlap <= 1.0)) {
    fail("collision_overlap must lie in [0, 1]");
  }
  if (!(spec.intra_cluster_stddev >= 0.0)) {
    fail("intra_cluster_stddev must be >= 0");
  }
  if (!(spec.duplicate_fraction >= 0.0 && spec.duplicate_fraction <= 1.0)) {
    fail("duplicate_fraction must lie in [0, 1]");
  }
  if (!(spec.public_label_noise >= 0.0 && spec.public_label_noise <= 1.0)) {
    fail("public_label_noise must lie in [0, 1]");
  }
  if (spec.public_sequences_per_domain < 0 ||
      spec.public_distractor_sequences < 0 || spec.duplicate_copies < 0) {
    fail("public counts must be >= 0");
  }
  if (spec.public_distractor_sequences > 0 && spec.distractor_modes < 1) {
    fail("distractor_modes must be >= 1 when distractors are requested");
  }
  if (!spec.cluster_centers.empty()) {
    if (spec.cluster_centers.size() !=
        static_cast<std::size_t>(spec.num_domains)) {
      fail("cluster_centers must hold one center per domain");
    }
    for (const auto& c : spec.cluster_centers) {
      if (c.size() != static_cast<std::size_t>(spec.dimension)) {
        fail("cluster center dimension does not match");
      }
    }
  }
}

SyntheticDomains generate_synthetic_domains(const DomainSpec& spec) {
  validate(spec);
  const auto dim = static_cast<std::size_t>(spec.dimension);
  const SharedGeometry shared = make_shared_geometry(spec);

  SyntheticDomains out{EmbeddingSet(SetRole::kPublic, dim), {}, {}};
  for (int d = 0; d < spec.num_domains; ++d) {
    const DomainGeometry g = make_domain_geometry(spec, d);
    const std::string tag = "d" + std::to_string(d);

    EmbeddingSet client(SetRole::kPrivate, dim);
    Rng priv = domain_rng(spec, d, kPrivate);
    for (int i = 0; i < spec.sequences_per_domain; ++i) {
      const int label = i % spec.num_classes;
      append_sequence(client, "c" + tag + "-" + std::to_string(i),
                      domain_sequence(spec, g, shared, label, 1.0, 1.0, 0.0, priv),
                      label, d);
    }
    out.clients.push_back(std::move(client));

    EmbeddingSet test(SetRole::kTest, dim);
    Rng test_rng = domain_rng(spec, d, kTest);
    for (int i = 0; i < spec.test_sequences_per_domain; ++i) {
      const int label = i % spec.num_classes;
      append_sequence(test, "t" + tag + "-" + std::to_string(i),
                      domain_sequence(spec, g, shared, label, 1.0, 1.0, 0.0, test_rng),
                      label, d);
    }
    out.tests.push_back(std::move(test));

    Rng pub = domain_rng(spec, d, kPublic);
    Rng dup_rng = domain_rng(spec, d, kDuplicates);
    for (int i = 0; i < spec.public_sequences_per_domain; ++i) {
      const int label = i % spec.num_classes;
      auto tokens =
          domain_sequence(spec, g, shared, label, spec.public_spread,
                          spec.public_shared_signal, spec.public_shift, pub);
      int observed = label;
      if (pub.uniform() < spec.public_label_noise) {
        observed = static_cast<int>(
            (label + 1 + pub.below(spec.num_classes - 1)) % spec.num_classes);
      }
      append_public(spec, out.public_set, "p" + tag + "-" + std::to_string(i),
                    std::move(tokens), observed, d, dup_rng);
    }
  }

  if (spec.public_distractor_sequences > 0) {
    Rng rng(spec.seed, kDistractorStream);
    Rng dup_rng(spec.seed, kDistractorStream + 1);
    std::vector<Vector> centers;
    std::vector<Vector> directions;
    for (int j = 0; j < spec.distractor_modes; ++j) {
      Vector c(dim);
      axpy(spec.center_radius, random_unit(rng, dim), c);
      centers.push_back(std::move(c));
      directions.push_back(random_unit(rng, dim));
    }
    const double sigma = spec.intra_cluster_stddev * spec.public_spread;
    for (int i = 0; i < spec.public_distractor_sequences; ++i) {
      const auto mode = static_cast<std::size_t>(rng.below(centers.size()));
      const int label = i % spec.num_classes;
      const double coord = class_coordinate(label, spec.num_classes);
      std::vector<Vector> tokens;
      for (int t = 0; t < spec.tokens_per_sequence; ++t) {
        Vector x = centers[mode];
        axpy(coord * spec.class_signal, directions[mode], x);
        for (double& v : x) v += sigma * rng.normal();
        tokens.push_back(std::move(x));
      }
      append_public(spec, out.public_set, "px-" + std::to_string(i),
                    std::move(tokens), label,
                    spec.num_domains + static_cast<int>(mode), dup_rng);
    }
  }

  return out;
}

Projection pca_project_2d(const EmbeddingSet& set) {
  if (set.size() < 2) {
    throw Error(ErrorKind::kInvalidArgument, "PCA needs at least two records");
  }
  const auto n = static_cast<Eigen::Index>(set.size());
  const auto dim = static_cast<Eigen::Index>(set.dimension());
  Eigen::MatrixXd x(n, dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) {
      x(i, j) = set[static_cast<std::size_t>(i)].vec[static_cast<std::size_t>(j)];
    }
  }
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n);
  const double total = cov.trace();
  if (!(total > 1e-24)) {
    throw Error(ErrorKind::kDegenerateSet, "all vectors are identical");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  // Eigenvalues ascend; take the last two columns.
  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(dim, 2);
  double retained = 0.0;
  for (Eigen::Index c = 0; c < 2 && c < dim; ++c) {
    Eigen::VectorXd v = eig.eigenvectors().col(dim - 1 - c);
    Eigen::Index pivot = 0;
    v.cwiseAbs().maxCoeff(&pivot);
    if (v(pivot) < 0) v = -v;  // deterministic sign
    basis.col(c) = v;
    retained += std::max(0.0, eig.eigenvalues()(dim - 1 - c));
  }
  const Eigen::MatrixXd proj = x * basis;
  Projection out;
  out.retained_variance = std::min(1.0, retained / total);
  out.points.reserve(set.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    out.points.push_back(
        {set[static_cast<std::size_t>(i)].id, proj(i, 0), proj(i, 1)});
  }
  return out;
}

}  // namespace proxymoe
