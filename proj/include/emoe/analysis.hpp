#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "emoe/content_encoder.hpp"
#include "emoe/data_io.hpp"
#include "emoe/errors.hpp"
#include "emoe/mapper.hpp"
#include "emoe/serialization.hpp"
#include "emoe/tensor.hpp"

namespace emoe {

// ---------------------------------------------------------------------------
// Principal component analysis

struct EigenDecomposition {
  Vector values;  // descending
  Matrix vectors; // row i is the eigenvector of values[i]
};

/// Cyclic Jacobi rotations on a symmetric matrix until the off-diagonal
/// Frobenius norm drops below `tolerance`.
inline EigenDecomposition symmetric_eigen(Matrix a, double tolerance = 1e-12,
                                          std::size_t max_sweeps = 100) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw DimensionError("symmetric_eigen needs a square matrix");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(a(i, j) - a(j, i)) > 1e-9 * (1.0 + std::abs(a(i, j))))
        throw ValidationError("symmetric_eigen: matrix is not symmetric");
  Matrix v = Matrix::identity(n);
  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
  };
  std::size_t sweep = 0;
  for (; sweep < max_sweeps && off_norm() >= tolerance; ++sweep) {
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  if (off_norm() >= tolerance)
    throw InternalError("Jacobi eigensolver did not converge in " + std::to_string(max_sweeps) +
                        " sweeps");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
  EigenDecomposition out{Vector(n), Matrix(n, n)};
  for (std::size_t i = 0; i < n; ++i) {
    out.values[i] = a(order[i], order[i]);
    for (std::size_t k = 0; k < n; ++k) out.vectors(i, k) = v(k, order[i]);
  }
  return out;
}

struct PcaModel {
  Vector mean;
  Matrix components;          // k x d, orthonormal rows
  Vector explained_variance;  // non-increasing
};

/// Top-k principal axes of the sample covariance (divisor n - 1). Each
/// component's sign is fixed so that its largest-magnitude entry is positive.
inline PcaModel pca_fit(std::span<const Vector> vectors, std::size_t k) {
  if (vectors.empty()) throw ValidationError("pca_fit: no vectors");
  const std::size_t d = vectors.front().size();
  if (k == 0 || k > d)
    throw ValidationError("pca_fit: k must be in [1, " + std::to_string(d) + "]");
  if (vectors.size() < k + 1)
    throw ValidationError("pca_fit: need at least " + std::to_string(k + 1) + " vectors, got " +
                          std::to_string(vectors.size()));
  Vector mean(d, 0.0);
  for (const auto& v : vectors) {
    if (v.size() != d) throw DimensionError("pca_fit: vectors differ in width");
    for (std::size_t j = 0; j < d; ++j) mean[j] += v[j];
  }
  for (double& m : mean) m /= static_cast<double>(vectors.size());
  Matrix cov(d, d);
  for (const auto& v : vectors)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i; j < d; ++j) cov(i, j) += (v[i] - mean[i]) * (v[j] - mean[j]);
  const double denom = static_cast<double>(vectors.size() - 1);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) cov(j, i) = cov(i, j) = cov(i, j) / denom;

  const EigenDecomposition eig = symmetric_eigen(std::move(cov));
  PcaModel m{std::move(mean), Matrix(k, d), Vector(k)};
  for (std::size_t c = 0; c < k; ++c) {
    m.explained_variance[c] = std::max(0.0, eig.values[c]);
    std::size_t big = 0;
    for (std::size_t j = 1; j < d; ++j)
      if (std::abs(eig.vectors(c, j)) > std::abs(eig.vectors(c, big))) big = j;
    const double sign = eig.vectors(c, big) < 0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < d; ++j) m.components(c, j) = sign * eig.vectors(c, j);
  }
  return m;
}

inline Vector pca_project(const PcaModel& m, std::span<const double> v) {
  if (v.size() != m.mean.size())
    throw DimensionError("pca_project: vector width " + std::to_string(v.size()) +
                         " does not match model width " + std::to_string(m.mean.size()));
  Vector out(m.components.rows(), 0.0);
  for (std::size_t c = 0; c < out.size(); ++c)
    for (std::size_t j = 0; j < v.size(); ++j) out[c] += m.components(c, j) * (v[j] - m.mean[j]);
  return out;
}

inline Vector pca_reconstruct(const PcaModel& m, std::span<const double> coords) {
  if (coords.size() != m.components.rows())
    throw DimensionError("pca_reconstruct: wrong number of coordinates");
  Vector out = m.mean;
  for (std::size_t c = 0; c < coords.size(); ++c)
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += coords[c] * m.components(c, j);
  return out;
}

inline Vector unit_normalized(std::span<const double> v) {
  const double n = norm(v);
  if (n == 0.0) throw DegenerateError("cannot normalize a zero vector");
  Vector out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return out;
}

struct HeadRowPoint {
  std::string label; // FORMAT:Variable
  Vector coords;
};

/// Fits PCA on every head row of the mapper, projected onto the unit
/// sphere, and returns each row's coordinates.
inline std::pair<PcaModel, std::vector<HeadRowPoint>> head_row_pca(const MultiWayMapper& mapper,
                                                                   std::size_t k = 2) {
  std::vector<Vector> rows;
  std::vector<std::string> labels;
  for (const auto& f : mapper.registry().formats())
    for (const auto& [var, row] : head_rows(mapper, f.id())) {
      rows.push_back(unit_normalized(row));
      labels.push_back(f.id() + ":" + var);
    }
  PcaModel model = pca_fit(rows, k);
  std::vector<HeadRowPoint> pts;
  for (std::size_t i = 0; i < rows.size(); ++i) pts.push_back({labels[i], pca_project(model, rows[i])});
  return {std::move(model), std::move(pts)};
}

/// Comma-separated `label,pc1,pc2,...`.
inline void write_pca_csv(std::ostream& out, std::span<const HeadRowPoint> points) {
  const std::size_t k = points.empty() ? 0 : points.front().coords.size();
  out << "label";
  for (std::size_t c = 0; c < k; ++c) out << ",pc" << c + 1;
  out << '\n';
  out.precision(6);
  for (const auto& p : points) {
    out << detail::csv_field(p.label);
    for (double v : p.coords) out << ',' << v;
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Retrieval

struct IndexEntry {
  std::string id;
  std::string dataset_id;
  std::string text;
  EmotionEmbedding embedding;
  double norm = 0.0;
};

struct RetrievalHit {
  const IndexEntry* entry = nullptr;
  double similarity = 0.0;
};

class RetrievalIndex {
public:
  RetrievalIndex() = default;

  void add(IndexEntry e) {
    if (!entries_.empty() && e.embedding.size() != entries_.front().embedding.size())
      throw DimensionError("index entry " + e.id + " has a different embedding width");
    const std::string key = e.dataset_id + '\x1f' + e.id;
    if (!keys_.insert(key).second)
      throw ValidationError("duplicate index entry " + e.dataset_id + "/" + e.id);
    e.norm = norm(e.embedding);
    entries_.push_back(std::move(e));
  }

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t dim() const noexcept {
    return entries_.empty() ? 0 : entries_.front().embedding.size();
  }
  const std::vector<IndexEntry>& entries() const noexcept { return entries_; }

  const IndexEntry* find(const std::string& dataset_id, const std::string& id) const {
    for (const auto& e : entries_)
      if (e.dataset_id == dataset_id && (e.id == id || e.text == id)) return &e;
    return nullptr;
  }

private:
  std::vector<IndexEntry> entries_;
  std::set<std::string> keys_;
};

/// Caches every sample's embedding from the encoder whose name matches the
/// dataset id, falling back to the encoder of the dataset's domain.
inline RetrievalIndex build_index(const MultiWayMapper& mapper,
                                  std::span<const ContentEncoder> encoders,
                                  std::span<const ContentDataset> datasets) {
  RetrievalIndex index;
  for (const auto& ds : datasets) {
    const ContentEncoder* enc = nullptr;
    for (const auto& e : encoders)
      if (e.name == ds.id) enc = &e;
    if (enc == nullptr)
      for (const auto& e : encoders)
        if (e.domain == ds.domain) {
          enc = &e;
          break;
        }
    if (enc == nullptr)
      throw ValidationError("no content encoder for dataset " + ds.id + " (domain " + ds.domain +
                            ")");
    if (enc->network.output_width() != mapper.dim())
      throw DimensionError("encoder " + enc->name + " does not match the mapper dimension");
    const Matrix emb = encode_content_batch(*enc, ds.features);
    for (std::size_t i = 0; i < ds.size(); ++i)
      index.add({ds.ids[i], ds.id, ds.texts.empty() ? ds.ids[i] : ds.texts[i], emb.row_copy(i)});
  }
  return index;
}

/// Exhaustive cosine scan. Ties are ordered by (id, dataset id).
inline std::vector<RetrievalHit> query_top_k(const RetrievalIndex& index,
                                             std::span<const double> query, std::size_t k,
                                             const std::optional<std::string>& dataset = {}) {
  if (k == 0) throw ValidationError("query_top_k: k must be at least 1");
  if (index.size() > 0 && query.size() != index.dim())
    throw DimensionError("query width " + std::to_string(query.size()) +
                         " does not match index width " + std::to_string(index.dim()));
  const double qn = norm(query);
  if (qn == 0.0) throw DegenerateError("query_top_k: zero query vector");
  std::vector<RetrievalHit> hits;
  for (const auto& e : index.entries()) {
    if (dataset && e.dataset_id != *dataset) continue;
    double sim = 0.0;
    if (e.norm > 0.0) sim = std::clamp(dot(query, e.embedding) / (qn * e.norm), -1.0, 1.0);
    hits.push_back({&e, sim});
  }
  auto better = [](const RetrievalHit& a, const RetrievalHit& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    if (a.entry->id != b.entry->id) return a.entry->id < b.entry->id;
    return a.entry->dataset_id < b.entry->dataset_id;
  };
  const std::size_t take = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(take), hits.end(),
                    better);
  hits.resize(take);
  return hits;
}

// Index file: "EMIX", u32 version 1, u32 count, u32 dim, then per entry
// str id, str dataset, str text, dim * f64 embedding.
inline void save_index(const std::string& path, const RetrievalIndex& index) {
  detail::ByteWriter w;
  w.raw("EMIX");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(index.size()));
  w.u32(static_cast<std::uint32_t>(index.dim()));
  for (const auto& e : index.entries()) {
    w.str(e.id);
    w.str(e.dataset_id);
    w.str(e.text);
    for (double v : e.embedding) w.f64(v);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write index file " + path);
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
}

inline RetrievalIndex load_index(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open index file " + path);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  detail::ByteReader r(bytes, 0, bytes.size(), path);
  if (bytes.compare(0, 4, "EMIX") != 0) r.fail(0, "bad magic (not an index file)");
  for (int i = 0; i < 4; ++i) r.u8();
  const std::uint32_t version = r.u32();
  if (version != 1) r.fail(4, "unsupported index file version " + std::to_string(version));
  const std::uint32_t n = r.u32(), d = r.u32();
  RetrievalIndex index;
  for (std::uint32_t i = 0; i < n; ++i) {
    IndexEntry e;
    e.id = r.str();
    e.dataset_id = r.str();
    e.text = r.str();
    e.embedding.resize(d);
    for (double& v : e.embedding) v = r.f64();
    index.add(std::move(e));
  }
  return index;
}

} // namespace emoe
