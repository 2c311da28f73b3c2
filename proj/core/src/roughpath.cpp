#include "pathdens/roughpath.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pathdens/errors.hpp"
#include "pathdens/rng.hpp"

namespace pathdens {

RoughPath::RoughPath(TimeGrid grid, Eigen::MatrixXd increments, std::vector<Eigen::MatrixXd> ito_area,
                     Convention convention)
    : grid_(std::move(grid)),
      increments_(std::move(increments)),
      ito_area_(std::move(ito_area)),
      convention_(convention) {
  if (static_cast<std::size_t>(increments_.cols()) != grid_.steps() || ito_area_.size() != grid_.steps())
    throw DomainError("rough path data does not match the grid");
}

Eigen::MatrixXd RoughPath::values() const { return values_of(increments_); }

Eigen::VectorXd RoughPath::increment(std::size_t a, std::size_t b) const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(increments_.rows());
  for (std::size_t j = a; j < b; ++j) v += increments_.col(static_cast<Eigen::Index>(j));
  return v;
}

Eigen::MatrixXd RoughPath::area(std::size_t j) const {
  if (convention_ == Convention::Ito) return ito_area_[j];
  Eigen::MatrixXd a = ito_area_[j];
  a.diagonal().array() += 0.5 * grid_.dt(j);
  return a;
}

Eigen::MatrixXd RoughPath::second_level(std::size_t a, std::size_t b) const {
  const Eigen::Index d = increments_.rows();
  Eigen::MatrixXd area2 = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
  for (std::size_t j = a; j < b; ++j) {
    const auto inc = increments_.col(static_cast<Eigen::Index>(j));
    area2 += area(j) + acc * inc.transpose();
    acc += inc;
  }
  return area2;
}

void RoughPath::set_area(std::size_t j, const Eigen::MatrixXd& a) {
  if (convention_ == Convention::Ito) {
    ito_area_[j] = a;
  } else {
    ito_area_[j] = a;
    ito_area_[j].diagonal().array() -= 0.5 * grid_.dt(j);
  }
}

RoughPath RoughPath::with_convention(Convention c) const {
  RoughPath out = *this;
  out.convention_ = c;
  return out;
}

Eigen::MatrixXd sample_increments(const TimeGrid& grid, int d, std::uint64_t seed, std::uint64_t stream) {
  if (d < 1) throw DomainError("Brownian dimension must be at least 1");
  const CounterRng rng(seed, stream);
  Eigen::MatrixXd inc(d, static_cast<Eigen::Index>(grid.steps()));
  for (std::size_t j = 0; j < grid.steps(); ++j) {
    const double sd = std::sqrt(grid.dt(j));
    for (int i = 0; i < d; ++i)
      inc(i, static_cast<Eigen::Index>(j)) = sd * rng.normal(j * static_cast<std::uint64_t>(d) + i);
  }
  return inc;
}

Eigen::MatrixXd values_of(const Eigen::MatrixXd& increments) {
  Eigen::MatrixXd v(increments.rows(), increments.cols() + 1);
  v.col(0).setZero();
  for (Eigen::Index j = 0; j < increments.cols(); ++j) v.col(j + 1) = v.col(j) + increments.col(j);
  return v;
}

Eigen::MatrixXd increments_of(const Eigen::MatrixXd& values) {
  Eigen::MatrixXd inc(values.rows(), values.cols() - 1);
  for (Eigen::Index j = 0; j + 1 < values.cols(); ++j) inc.col(j) = values.col(j + 1) - values.col(j);
  return inc;
}

Eigen::MatrixXd sample_brownian(const TimeGrid& grid, int d, std::uint64_t seed, std::uint64_t stream) {
  return values_of(sample_increments(grid, d, seed, stream));
}

BrownianTree::BrownianTree(TimeGrid base, int d, std::uint64_t seed, std::uint64_t stream)
    : base_(std::move(base)), d_(d), seed_(seed), stream_(stream) {
  if (d < 1) throw DomainError("Brownian dimension must be at least 1");
}

Eigen::MatrixXd BrownianTree::values(unsigned level) const {
  if (cache_.empty()) cache_.push_back(sample_brownian(base_, d_, seed_, stream_));
  while (cache_.size() <= level) {
    const unsigned L = static_cast<unsigned>(cache_.size());
    const TimeGrid g = refine(base_, L);
    const Eigen::MatrixXd& prev = cache_.back();
    const CounterRng rng(seed_, derive_stream(stream_, L));
    Eigen::MatrixXd next(d_, static_cast<Eigen::Index>(g.size()));
    for (Eigen::Index j = 0; j < prev.cols(); ++j) next.col(2 * j) = prev.col(j);
    for (Eigen::Index j = 0; j + 1 < prev.cols(); ++j) {
      const double l = g.time(static_cast<std::size_t>(2 * j));
      const double m = g.time(static_cast<std::size_t>(2 * j + 1));
      const double r = g.time(static_cast<std::size_t>(2 * j + 2));
      const double wl = (r - m) / (r - l);
      const double wr = (m - l) / (r - l);
      const double sd = std::sqrt((m - l) * (r - m) / (r - l));
      for (int i = 0; i < d_; ++i) {
        const double z = rng.normal(static_cast<std::uint64_t>(j) * static_cast<std::uint64_t>(d_) + i);
        next(i, 2 * j + 1) = wl * prev(i, j) + wr * prev(i, j + 1) + sd * z;
      }
    }
    cache_.push_back(std::move(next));
  }
  return cache_[level];
}

RoughPath lift(const TimeGrid& fine_grid, const Eigen::MatrixXd& fine_values, std::size_t k) {
  if (static_cast<std::size_t>(fine_values.cols()) != fine_grid.size())
    throw DomainError("path values do not match the fine grid");
  TimeGrid coarse = coarsen(fine_grid, k);
  const Eigen::Index d = fine_values.rows();
  const std::size_t m = coarse.steps();
  Eigen::MatrixXd inc(d, static_cast<Eigen::Index>(m));
  std::vector<Eigen::MatrixXd> area(m);
  for (std::size_t j = 0; j < m; ++j) {
    const Eigen::Index s = static_cast<Eigen::Index>(j * k);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t i = 0; i < k; ++i) {
      const Eigen::Index r = s + static_cast<Eigen::Index>(i);
      a += (fine_values.col(r) - fine_values.col(s)) * (fine_values.col(r + 1) - fine_values.col(r)).transpose();
    }
    inc.col(static_cast<Eigen::Index>(j)) = fine_values.col(s + static_cast<Eigen::Index>(k)) - fine_values.col(s);
    area[j] = std::move(a);
  }
  return RoughPath(std::move(coarse), std::move(inc), std::move(area), Convention::Ito);
}

RoughPath strat_from_ito(const RoughPath& rp) {
  if (rp.convention() != Convention::Ito) throw ContractError("strat_from_ito expects an Ito rough path");
  return rp.with_convention(Convention::Stratonovich);
}

RoughPath ito_from_strat(const RoughPath& rp) {
  if (rp.convention() != Convention::Stratonovich) throw ContractError("ito_from_strat expects a Stratonovich rough path");
  return rp.with_convention(Convention::Ito);
}

Eigen::MatrixXd chen_defect_indices(const RoughPath& rp, std::size_t s, std::size_t u, std::size_t t) {
  if (!(s <= u && u <= t && t < rp.grid().size())) throw DomainError("chen_defect needs grid points s <= u <= t");
  return rp.second_level(s, t) - rp.second_level(s, u) - rp.second_level(u, t) -
         rp.increment(s, u) * rp.increment(u, t).transpose();
}

Eigen::MatrixXd chen_defect(const RoughPath& rp, double s, double u, double t) {
  const auto is = rp.grid().find(s), iu = rp.grid().find(u), it = rp.grid().find(t);
  if (!is || !iu || !it) throw DomainError("chen_defect arguments must be grid points");
  return chen_defect_indices(rp, *is, *iu, *it);
}

double max_chen_defect(const RoughPath& rp) {
  const std::size_t n = rp.grid().size();
  const Eigen::Index d = rp.dim();
  if (n > 2049) throw ResourceError("max_chen_defect is limited to 2048 intervals");
  const std::size_t dd = static_cast<std::size_t>(d * d);
  // Second levels and increments for every pair a <= b, composed from a.
  std::vector<double> area2(n * n * dd, 0.0);
  std::vector<double> incs(n * n * static_cast<std::size_t>(d), 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    Eigen::MatrixXd acc2 = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
    for (std::size_t b = a + 1; b < n; ++b) {
      const auto inc = rp.increments().col(static_cast<Eigen::Index>(b - 1));
      acc2 += rp.area(b - 1) + acc * inc.transpose();
      acc += inc;
      std::copy(acc2.data(), acc2.data() + dd, area2.begin() + static_cast<std::ptrdiff_t>((a * n + b) * dd));
      std::copy(acc.data(), acc.data() + d, incs.begin() + static_cast<std::ptrdiff_t>((a * n + b) * d));
    }
  }
  double worst = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t t = s + 1; t < n; ++t) {
      const double* bst = &area2[(s * n + t) * dd];
      for (std::size_t u = s; u <= t; ++u) {
        const double* bsu = &area2[(s * n + u) * dd];
        const double* but = &area2[(u * n + t) * dd];
        const double* isu = &incs[(s * n + u) * d];
        const double* iut = &incs[(u * n + t) * d];
        double num = 0.0, scale = 1e-300;
        for (Eigen::Index j = 0; j < d; ++j) {
          for (Eigen::Index i = 0; i < d; ++i) {
            const std::size_t k = static_cast<std::size_t>(i + j * d);
            const double cross = isu[i] * iut[j];
            const double def = bst[k] - bsu[k] - but[k] - cross;
            num = std::max(num, std::abs(def));
            scale = std::max({scale, std::abs(bst[k]), std::abs(bsu[k]), std::abs(but[k]), std::abs(cross)});
          }
        }
        worst = std::max(worst, num / scale);
      }
    }
  }
  return worst;
}

double geometric_defect_rms(const RoughPath& rp) {
  double acc = 0.0;
  const std::size_t m = rp.grid().steps();
  for (std::size_t j = 0; j < m; ++j) {
    const Eigen::MatrixXd a = rp.area(j);
    const auto inc = rp.increments().col(static_cast<Eigen::Index>(j));
    const Eigen::MatrixXd def = a + a.transpose() - inc * inc.transpose();
    acc += def.squaredNorm();
  }
  return std::sqrt(acc / static_cast<double>(m));
}

Eigen::MatrixXd rough_integral(const ControlledPath& integrand, int out_dim, const RoughPath& rp, double a, double b) {
  const TimeGrid& grid = rp.grid();
  const Eigen::Index d = rp.dim();
  if (static_cast<std::size_t>(integrand.values.cols()) != grid.size() || integrand.gubinelli.size() != grid.size())
    throw DomainError("integrand and rough path live on different grids");
  if (integrand.values.rows() != out_dim * d) throw DomainError("integrand dimension does not match out_dim * d");
  const auto ia_opt = grid.find(a), ib_opt = grid.find(b);
  if (!ia_opt || !ib_opt || *ib_opt < *ia_opt) throw DomainError("integration window must be grid points a <= b");
  const std::size_t ia = *ia_opt, ib = *ib_opt;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(out_dim, static_cast<Eigen::Index>(grid.size()));
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(out_dim);
  for (std::size_t j = ia; j < ib; ++j) {
    const Eigen::Index jj = static_cast<Eigen::Index>(j);
    Eigen::Map<const Eigen::MatrixXd> u(integrand.values.col(jj).data(), out_dim, d);
    acc += u * rp.increments().col(jj);
    const Eigen::MatrixXd area = rp.area(j);
    const Eigen::MatrixXd& gub = integrand.gubinelli[j];
    for (Eigen::Index l = 0; l < d; ++l) {
      Eigen::Map<const Eigen::MatrixXd> ul(gub.col(l).data(), out_dim, d);
      acc += ul * area.row(l).transpose();
    }
    out.col(jj + 1) = acc;
  }
  for (std::size_t j = ib + 1; j < grid.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = acc;
  return out;
}

Eigen::MatrixXd young_integral(const Eigen::MatrixXd& f, const Eigen::MatrixXd& g, std::size_t ia, std::size_t ib) {
  if (f.cols() != g.cols() || f.rows() != 1) throw DomainError("young_integral expects a scalar integrand on g's grid");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(g.rows(), g.cols());
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(g.rows());
  for (std::size_t j = ia; j < ib; ++j) {
    const Eigen::Index jj = static_cast<Eigen::Index>(j);
    acc += f(0, jj) * (g.col(jj + 1) - g.col(jj));
    out.col(jj + 1) = acc;
  }
  for (Eigen::Index j = static_cast<Eigen::Index>(ib) + 1; j < g.cols(); ++j) out.col(j) = acc;
  return out;
}

Eigen::MatrixXd young_indicator_integral(const Eigen::MatrixXd& f, std::size_t ia, std::size_t it) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(f.rows(), f.cols());
  // 1_{[s_{j+1},T]} - 1_{[s_j,T]} is -1 at slot j and 0 elsewhere on the grid.
  for (std::size_t j = ia; j < it; ++j) out.col(static_cast<Eigen::Index>(j)) -= f.col(static_cast<Eigen::Index>(j));
  return out;
}

double controlled_remainder(const ControlledPath& u, const RoughPath& rp, double alpha, double a, double b) {
  const TimeGrid& grid = rp.grid();
  if (static_cast<std::size_t>(u.values.cols()) != grid.size()) throw DomainError("controlled path grid mismatch");
  const auto ia = grid.find(a), ib = grid.find(b);
  if (!ia || !ib || *ib < *ia) throw DomainError("window must be grid points a <= b");
  const Eigen::MatrixXd bv = rp.values();
  double best = 0.0;
  for (std::size_t s = *ia; s <= *ib; ++s) {
    const Eigen::Index ss = static_cast<Eigen::Index>(s);
    for (std::size_t t = s + 1; t <= *ib; ++t) {
      const Eigen::Index tt = static_cast<Eigen::Index>(t);
      const Eigen::VectorXd r = u.values.col(tt) - u.values.col(ss) - u.gubinelli[s] * (bv.col(tt) - bv.col(ss));
      const double nr = r.norm();
      if (nr == 0.0) continue;
      best = std::max(best, nr / std::pow(grid.time(t) - grid.time(s), 2.0 * alpha));
    }
  }
  return best;
}

std::vector<double> default_roughness_scales(const TimeGrid& grid) {
  const double mesh = grid.horizon() / static_cast<double>(grid.steps());
  return {4 * mesh, 8 * mesh, 16 * mesh, 32 * mesh};
}

RoughnessReport holder_roughness(const TimeGrid& grid, const Eigen::MatrixXd& values, double theta) {
  return holder_roughness(grid, values, theta, 64, default_roughness_scales(grid));
}

RoughnessReport holder_roughness(const TimeGrid& grid, const Eigen::MatrixXd& values, double theta, int probes,
                                 const std::vector<double>& scales, std::uint64_t seed) {
  if (scales.empty()) throw DomainError("holder_roughness needs at least one scale");
  if (probes < 1) throw DomainError("holder_roughness needs at least one probe direction");
  if (static_cast<std::size_t>(values.cols()) != grid.size()) throw DomainError("path does not match the grid");
  const Eigen::Index d = values.rows();
  const std::size_t n = grid.size();
  const CounterRng rng(seed, 0);
  Eigen::MatrixXd dirs(d, probes);
  for (int p = 0; p < probes; ++p) {
    for (Eigen::Index i = 0; i < d; ++i)
      dirs(i, p) = rng.normal(static_cast<std::uint64_t>(p) * static_cast<std::uint64_t>(d) + static_cast<std::uint64_t>(i));
    dirs.col(p).normalize();
  }
  const Eigen::MatrixXd proj = dirs.transpose() * values;  // probes x n

  double best = std::numeric_limits<double>::infinity();
  for (double eps : scales) {
    if (!(eps > 0)) throw DomainError("roughness scales must be positive");
    const double denom = std::pow(eps, theta);
    const double tol = 1e-12 * std::max(1.0, grid.horizon());
    std::size_t lo = 0, hi = 0;
    for (std::size_t s = 0; s < n; ++s) {
      while (grid.time(s) - grid.time(lo) > eps + tol) ++lo;
      if (hi < s) hi = s;
      while (hi + 1 < n && grid.time(hi + 1) - grid.time(s) <= eps + tol) ++hi;
      const Eigen::Index ss = static_cast<Eigen::Index>(s);
      // Largest increment in the window, used to build orthogonal candidates.
      Eigen::VectorXd big = Eigen::VectorXd::Zero(d);
      for (std::size_t t = lo; t <= hi; ++t) {
        const Eigen::VectorXd inc = values.col(static_cast<Eigen::Index>(t)) - values.col(ss);
        if (inc.squaredNorm() > big.squaredNorm()) big = inc;
      }
      const double bign = big.norm();
      Eigen::VectorXd uhat = bign > 0 ? Eigen::VectorXd(big / bign) : Eigen::VectorXd::Zero(d);
      for (int p = 0; p < probes; ++p) {
        double m = 0.0;
        for (std::size_t t = lo; t <= hi; ++t)
          m = std::max(m, std::abs(proj(p, static_cast<Eigen::Index>(t)) - proj(p, ss)));
        best = std::min(best, m / denom);
        if (d >= 2 && bign > 0) {
          const double c = dirs.col(p).dot(uhat);
          const double norm_perp = std::sqrt(std::max(0.0, 1.0 - c * c));
          if (norm_perp < 1e-8) continue;
          double mo = 0.0;
          for (std::size_t t = lo; t <= hi; ++t) {
            const Eigen::Index tt = static_cast<Eigen::Index>(t);
            const Eigen::VectorXd inc = values.col(tt) - values.col(ss);
            const double v = (proj(p, tt) - proj(p, ss) - c * uhat.dot(inc)) / norm_perp;
            mo = std::max(mo, std::abs(v));
          }
          best = std::min(best, mo / denom);
        }
      }
    }
  }
  RoughnessReport rep;
  rep.theta = theta;
  rep.L_theta = best;
  rep.epsilon_set = scales;
  rep.direction_samples = probes;
  return rep;
}

double rough_path_norm(const RoughPath& rp, double alpha, std::size_t ia, std::size_t ib) {
  const Eigen::Index d = rp.dim();
  const TimeGrid& grid = rp.grid();
  double hb = 0.0, hbb = 0.0;
  for (std::size_t s = ia; s <= ib; ++s) {
    Eigen::MatrixXd acc2 = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
    for (std::size_t t = s + 1; t <= ib; ++t) {
      const auto inc = rp.increments().col(static_cast<Eigen::Index>(t - 1));
      acc2 += rp.area(t - 1) + acc * inc.transpose();
      acc += inc;
      const double h = grid.time(t) - grid.time(s);
      hb = std::max(hb, acc.norm() / std::pow(h, alpha));
      hbb = std::max(hbb, acc2.norm() / std::pow(h, 2 * alpha));
    }
  }
  return hb + hbb;
}

}  // namespace pathdens
