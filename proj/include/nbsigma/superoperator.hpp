#pragma once

#include <Eigen/Sparse>
#include <bit>
#include <cstdint>
#include <unsupported/Eigen/KroneckerProduct>
#include <vector>

#include "nbsigma/lindblad.hpp"

namespace nbsigma {

using SpMat = Eigen::SparseMatrix<cplx>;

namespace detail {

inline SpMat sparse_identity(Eigen::Index n) {
  SpMat m(n, n);
  m.setIdentity();
  return m;
}

// Jordan-Wigner annihilator on the 2^N Fock space; bit i of the basis index
// is the occupation of site i, with the string running over sites k < i.
inline SpMat jw_annihilator(int n, int site) {
  const std::int64_t dim = std::int64_t{1} << n;
  std::vector<Eigen::Triplet<cplx>> trip;
  for (std::int64_t s = 0; s < dim; ++s) {
    if (!((s >> site) & 1)) continue;
    std::int64_t lower = s & ((std::int64_t{1} << site) - 1);
    double sign = (std::popcount(static_cast<std::uint64_t>(lower)) & 1) ? -1.0 : 1.0;
    trip.emplace_back(s & ~(std::int64_t{1} << site), s, sign);
  }
  SpMat c(dim, dim);
  c.setFromTriplets(trip.begin(), trip.end());
  return c;
}

}  // namespace detail

// Lindblad generator on vec(ρ) with row-major vectorization |m⟩⟨n| -> m·2^N + n:
// ρ̇ = -i[H, ρ] + Σ_μ (2 L ρ L^† - {L^† L, ρ}),  H = h + ½ Σ_ij U_ij n_i n_j.
inline SpMat build_full_superoperator(const LindbladModel& model, const LaurentSymbol& interactions,
                                      int max_sites = 7) {
  model.validate();
  const int n = model.n_sites;
  if (n > max_sites) fail(ErrorKind::size_guard, "build_full_superoperator: N exceeds the memory guard");
  const Eigen::Index dim = Eigen::Index{1} << n;
  std::vector<SpMat> c(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) c[static_cast<std::size_t>(i)] = detail::jw_annihilator(n, i);

  SpMat h(dim, dim);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (model.h(i, j) != cplx{})
        h += model.h(i, j) * SpMat(c[static_cast<std::size_t>(i)].adjoint() * c[static_cast<std::size_t>(j)]);
  RMat u = interaction_matrix(interactions, n, model.boundary);
  std::vector<SpMat> num;
  for (int i = 0; i < n; ++i)
    num.push_back(SpMat(c[static_cast<std::size_t>(i)].adjoint() * c[static_cast<std::size_t>(i)]));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (u(i, j) != 0.0) h += cplx(0.5 * u(i, j)) * SpMat(num[static_cast<std::size_t>(i)] * num[static_cast<std::size_t>(j)]);

  SpMat id = detail::sparse_identity(dim);
  SpMat ht = h.transpose();
  SpMat l = -I * (SpMat(Eigen::kroneckerProduct(h, id)) - SpMat(Eigen::kroneckerProduct(id, ht)));

  auto add_channel = [&](const SpMat& op) {
    SpMat ldl = op.adjoint() * op;
    SpMat ldlt = ldl.transpose();
    SpMat opc = op.conjugate();
    l += 2.0 * SpMat(Eigen::kroneckerProduct(op, opc));
    l -= SpMat(Eigen::kroneckerProduct(ldl, id));
    l -= SpMat(Eigen::kroneckerProduct(id, ldlt));
  };
  for (Eigen::Index mu = 0; mu < model.d_loss.rows(); ++mu) {
    SpMat op(dim, dim);
    for (int i = 0; i < n; ++i)
      if (model.d_loss(mu, i) != cplx{}) op += model.d_loss(mu, i) * c[static_cast<std::size_t>(i)];
    add_channel(op);
  }
  for (Eigen::Index mu = 0; mu < model.d_gain.rows(); ++mu) {
    SpMat op(dim, dim);
    for (int i = 0; i < n; ++i)
      if (model.d_gain(mu, i) != cplx{})
        op += model.d_gain(mu, i) * SpMat(c[static_cast<std::size_t>(i)].adjoint());
    add_channel(op);
  }
  l.makeCompressed();
  return l;
}

// vec(identity) in the same row-major convention.
inline Vec vectorized_identity(int n) {
  const Eigen::Index dim = Eigen::Index{1} << n;
  Vec v = Vec::Zero(dim * dim);
  for (Eigen::Index m = 0; m < dim; ++m) v(m * dim + m) = 1.0;
  return v;
}

// Indices of |m⟩⟨n| with N(m) - N(n) = k; k = 1 holds one net a-type excitation.
inline std::vector<Eigen::Index> particle_difference_sector(int n, int k) {
  const Eigen::Index dim = Eigen::Index{1} << n;
  std::vector<Eigen::Index> idx;
  for (Eigen::Index m = 0; m < dim; ++m)
    for (Eigen::Index q = 0; q < dim; ++q)
      if (std::popcount(static_cast<std::uint64_t>(m)) - std::popcount(static_cast<std::uint64_t>(q)) == k)
        idx.push_back(m * dim + q);
  return idx;
}

inline Mat restrict_dense(const SpMat& l, const std::vector<Eigen::Index>& idx) {
  const Eigen::Index d = static_cast<Eigen::Index>(idx.size());
  std::vector<Eigen::Index> pos(static_cast<std::size_t>(l.rows()), -1);
  for (Eigen::Index k = 0; k < d; ++k) pos[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])] = k;
  Mat out = Mat::Zero(d, d);
  for (Eigen::Index col = 0; col < l.outerSize(); ++col) {
    Eigen::Index pc = pos[static_cast<std::size_t>(col)];
    if (pc < 0) continue;
    for (SpMat::InnerIterator it(l, col); it; ++it) {
      Eigen::Index pr = pos[static_cast<std::size_t>(it.row())];
      if (pr >= 0) out(pr, pc) = it.value();
    }
  }
  return out;
}

}  // namespace nbsigma
