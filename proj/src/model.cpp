#include "qkrf/model.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace qkrf {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kMaxSectionBytes = 2.0e9;

double log_binomial(int n, int j) {
  return std::lgamma(n + 1.0) - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0);
}

double logsumexp(const RVector& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

void append_panel(std::vector<double>& u, std::vector<double>& c, std::vector<double>& w,
                  const GaussLegendre01& rule, double lo, double hi, bool from_right) {
  // On right panels `lo`/`hi` are bounds on the complement 1 - u.
  const double len = hi - lo;
  for (Eigen::Index i = 0; i < rule.u.size(); ++i) {
    const double t = lo + len * rule.u(i);
    if (from_right) {
      c.push_back(t);
      u.push_back(1.0 - t);
    } else {
      u.push_back(t);
      c.push_back(1.0 - t);
    }
    w.push_back(len * rule.weights(i));
  }
}

RadialGrid make_gauss_grid(int n) {
  const GaussLegendre01 gl = gauss_legendre01(n);
  RadialGrid g;
  g.rule = RadialRule::GaussLegendre;
  g.u = gl.u;
  g.c = gl.c;
  g.weights = gl.weights;
  g.bary.resize(n);
  for (int j = 0; j < n; ++j) {
    const double sign = (j % 2 == 0) ? 1.0 : -1.0;
    g.bary(j) = sign * std::sqrt(g.u(j) * g.c(j) * g.weights(j));
  }
  g.diff = RMatrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    double diag = 0.0;
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double gap = (g.u(i) <= 0.5 && g.u(j) <= 0.5) ? g.u(i) - g.u(j) : g.c(j) - g.c(i);
      const double d = (g.bary(j) / g.bary(i)) / gap;
      g.diff(i, j) = d;
      diag -= d;
    }
    g.diff(i, i) = diag;
  }
  return g;
}

RadialGrid make_graded_grid(const P1Options& o) {
  if (!(o.graded_ratio > 0.0 && o.graded_ratio < 1.0) || !(o.graded_depth > 0.0) ||
      o.graded_panel_nodes < 2)
    throw ConfigError("graded radial rule: invalid ratio, depth or panel size");
  const GaussLegendre01 rule = gauss_legendre01(o.graded_panel_nodes);
  std::vector<double> breaks{0.5};
  while (breaks.back() > o.graded_depth) breaks.push_back(breaks.back() * o.graded_ratio);
  std::vector<double> u, c, w;
  // Left end, from the innermost panel [0, b_L] outward.
  append_panel(u, c, w, rule, 0.0, breaks.back(), false);
  for (std::size_t i = breaks.size() - 1; i > 0; --i)
    append_panel(u, c, w, rule, breaks[i], breaks[i - 1], false);
  // Right end mirrored in the complement, walking toward u = 1.
  std::vector<double> ur, cr, wr;
  append_panel(ur, cr, wr, rule, 0.0, breaks.back(), true);
  for (std::size_t i = breaks.size() - 1; i > 0; --i)
    append_panel(ur, cr, wr, rule, breaks[i], breaks[i - 1], true);
  for (std::size_t i = ur.size(); i-- > 0;) {
    u.push_back(ur[i]);
    c.push_back(cr[i]);
    w.push_back(wr[i]);
  }
  RadialGrid g;
  g.rule = RadialRule::Graded;
  const auto n = static_cast<Eigen::Index>(u.size());
  g.u = Eigen::Map<RVector>(u.data(), n);
  g.c = Eigen::Map<RVector>(c.data(), n);
  g.weights = Eigen::Map<RVector>(w.data(), n);
  return g;
}

}  // namespace

GaussLegendre01 gauss_legendre01(int n) {
  if (n < 1) throw ConfigError("gauss_legendre01: need at least one node");
  GaussLegendre01 out{RVector(n), RVector(n), RVector(n)};
  // Newton on P_n from the Tricomi-style initial guesses; x descending.
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int j = 2; j <= n; ++j) {
        const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    {
      // Recompute the derivative at the converged root for the weight.
      double p0 = 1.0, p1 = x;
      for (int j = 2; j <= n; ++j) {
        const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
    }
    const double wx = 2.0 / ((1.0 - x * x) * dp * dp);
    const double small = 0.5 * (1.0 - std::abs(x));
    const int lo = i, hi = n - 1 - i;
    out.u(lo) = small;
    out.c(lo) = 1.0 - small;
    out.u(hi) = 1.0 - small;
    out.c(hi) = small;
    out.weights(lo) = 0.5 * wx;
    out.weights(hi) = 0.5 * wx;
    if (lo == hi) {
      out.u(lo) = 0.5;
      out.c(lo) = 0.5;
    }
  }
  return out;
}

int PolarizedModel::dim(int k) const {
  require_level(k);
  if (radial_) return 2 * k + 1;
  return static_cast<int>(discrete_sections_[static_cast<std::size_t>(k - 1)].rows());
}

void PolarizedModel::require_level(int k) const {
  if (k < 1 || k > k_max_) {
    std::ostringstream os;
    os << "level " << k << " not supported by model (k_max = " << k_max_ << ")";
    throw DomainError(os.str());
  }
}

RMatrix PolarizedModel::radial_log_sections(int k) const {
  require_level(k);
  if (!radial_) throw UnsupportedError("radial_log_sections: model has no radial structure");
  const int n = 2 * k + 1;
  const RadialGrid& g = *radial_;
  RMatrix out(n, g.size());
  const RVector lu = g.u.array().log();
  const RVector lc = g.c.array().log();
  for (int j = 0; j < n; ++j) {
    const double scale =
        basis_ == P1Basis::Invariant ? std::log(2.0 * k + 1.0) + log_binomial(2 * k, j) : 0.0;
    out.row(j) = (scale + j * lu.array() + (2 * k - j) * lc.array()).matrix().transpose();
  }
  return out;
}

RVector PolarizedModel::radial_log_mu0_masses() const {
  if (!radial_) throw UnsupportedError("radial_log_mu0_masses: model has no radial structure");
  return (2.0 * radial_->weights.array()).log();
}

CMatrix PolarizedModel::section_columns(int k) const {
  require_level(k);
  if (!radial_) return discrete_sections_[static_cast<std::size_t>(k - 1)].conjugate();
  const int n = 2 * k + 1;
  const double bytes = 16.0 * n * static_cast<double>(node_count());
  if (bytes > kMaxSectionBytes) {
    std::ostringstream os;
    os << "section table at level " << k << " would need " << bytes << " bytes";
    throw DomainError(os.str());
  }
  const RadialGrid& g = *radial_;
  const RMatrix logmag = radial_log_sections(k);
  CMatrix out(n, node_count());
  for (Eigen::Index a = 0; a < g.size(); ++a) {
    for (int b = 0; b < g.angular; ++b) {
      const Eigen::Index x = a * g.angular + b;
      const double theta = grid_.coords(x, 1);
      for (int j = 0; j < n; ++j)
        out(j, x) = std::polar(std::exp(0.5 * logmag(j, a)), -j * theta);
    }
  }
  return out;
}

RVector PolarizedModel::node_masses(const RVector& density) const {
  if (density.size() != node_count()) throw DimensionError("node_masses: length mismatch");
  return density.cwiseProduct(grid_.weights);
}

RVector PolarizedModel::broadcast_radial(const RVector& profile) const {
  if (!radial_) throw UnsupportedError("broadcast_radial: model has no radial structure");
  if (profile.size() != radial_->size())
    throw DimensionError("broadcast_radial: profile length differs from radial node count");
  RVector out(node_count());
  for (Eigen::Index a = 0; a < radial_->size(); ++a)
    out.segment(a * radial_->angular, radial_->angular).setConstant(profile(a));
  return out;
}

void PolarizedModel::finish() {
  log_mu0_masses_ = node_masses(mu0_density_).array().log();
}

ModelPtr build_p1_model(const P1Options& o) {
  if (o.k_max < 1) throw ConfigError("build_p1_model: k_max must be >= 1");
  if (o.angular_nodes < 8) throw ConfigError("build_p1_model: angular_nodes must be >= 8");
  if (o.rule == RadialRule::GaussLegendre && o.radial_nodes < 16)
    throw ConfigError("build_p1_model: radial_nodes must be >= 16");
  std::shared_ptr<PolarizedModel> m(new PolarizedModel());
  m->complex_dim_ = 1;
  m->volume_ = 2.0;
  m->k_max_ = o.k_max;
  m->basis_ = o.basis;
  RadialGrid g = o.rule == RadialRule::GaussLegendre ? make_gauss_grid(o.radial_nodes)
                                                     : make_graded_grid(o);
  g.angular = o.angular_nodes;
  const Eigen::Index count = g.size() * g.angular;
  m->grid_.coords.resize(count, 2);
  m->grid_.weights.resize(count);
  m->grid_.domain_volume = 2.0 * kPi;
  const double dtheta = 2.0 * kPi / g.angular;
  for (Eigen::Index a = 0; a < g.size(); ++a) {
    for (int b = 0; b < g.angular; ++b) {
      const Eigen::Index x = a * g.angular + b;
      m->grid_.coords(x, 0) = g.u(a);
      m->grid_.coords(x, 1) = b * dtheta;
      m->grid_.weights(x) = g.weights(a) * dtheta;
    }
  }
  m->mu0_density_ = RVector::Constant(count, 1.0 / kPi);
  m->radial_ = std::move(g);
  m->finish();
  return m;
}

ModelPtr build_discrete_model(int points, std::vector<CMatrix> section_values,
                              RVector base_weights) {
  if (points < 1) throw ConfigError("build_discrete_model: need at least one point");
  if (base_weights.size() != points)
    throw DimensionError("build_discrete_model: weight count differs from point count");
  if ((base_weights.array() <= 0.0).any())
    throw DomainError("build_discrete_model: weights must be positive");
  if (std::abs(base_weights.sum() - 1.0) > 1e-12)
    throw DomainError("build_discrete_model: weights must sum to 1");
  if (section_values.empty()) throw ConfigError("build_discrete_model: no levels given");
  for (std::size_t i = 0; i < section_values.size(); ++i) {
    const CMatrix& s = section_values[i];
    if (s.cols() != points || s.rows() < 1) {
      std::ostringstream os;
      os << "build_discrete_model: level " << i + 1 << " has shape " << s.rows() << "x"
         << s.cols() << ", expected N_k x " << points;
      throw DimensionError(os.str());
    }
    Eigen::ColPivHouseholderQR<CMatrix> qr(s);
    qr.setThreshold(1e-12);
    if (qr.rank() < s.rows()) {
      std::ostringstream os;
      os << "build_discrete_model: level " << i + 1 << " section values have rank " << qr.rank()
         << " < " << s.rows();
      throw DomainError(os.str());
    }
  }
  std::shared_ptr<PolarizedModel> m(new PolarizedModel());
  m->complex_dim_ = 1;
  m->volume_ = 1.0;
  m->k_max_ = static_cast<int>(section_values.size());
  m->grid_.coords = RMatrix(points, 1);
  for (int i = 0; i < points; ++i) m->grid_.coords(i, 0) = i;
  m->grid_.weights = std::move(base_weights);
  m->grid_.domain_volume = 1.0;
  m->mu0_density_ = RVector::Ones(points);
  m->discrete_sections_ = std::move(section_values);
  m->finish();
  return m;
}

PotentialField PotentialField::from_nodes(ModelPtr model, RVector values) {
  if (!model) throw ConfigError("PotentialField: null model");
  if (values.size() != model->node_count())
    throw DimensionError("PotentialField: value count differs from node count");
  if (!values.allFinite()) throw DomainError("PotentialField: non-finite values");
  PotentialField f;
  f.model_ = std::move(model);
  f.values_ = std::move(values);
  return f;
}

PotentialField PotentialField::radial(ModelPtr model, RVector profile) {
  if (!model) throw ConfigError("PotentialField: null model");
  if (!profile.allFinite()) throw DomainError("PotentialField: non-finite values");
  PotentialField f;
  f.values_ = model->broadcast_radial(profile);
  f.radial_ = std::move(profile);
  f.model_ = std::move(model);
  return f;
}

const RVector& PotentialField::profile() const {
  if (!radial_) throw UnsupportedError("potential has no radial profile");
  return *radial_;
}

PotentialField PotentialField::shifted(double c) const {
  PotentialField f = *this;
  f.values_.array() += c;
  if (f.radial_) f.radial_->array() += c;
  return f;
}

double RadialFamily::operator()(double u, double c) const {
  switch (kind) {
    case Kind::Bump:
      return amplitude * u * c;
    case Kind::Sine:
      return amplitude * std::sin(kPi * std::min(u, c));
  }
  return 0.0;
}

RVector RadialFamily::sample(const RadialGrid& g) const {
  RVector out(g.size());
  for (Eigen::Index a = 0; a < g.size(); ++a) out(a) = (*this)(g.u(a), g.c(a));
  return out;
}

PotentialField RadialFamily::on(const ModelPtr& model) const {
  if (!model->radial()) throw UnsupportedError("radial family on a non-radial model");
  return PotentialField::radial(model, sample(*model->radial()));
}

double compensated_sum(const RVector& v) {
  double sum = 0.0, comp = 0.0;
  for (double x : v) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      comp += (sum - t) + x;
    else
      comp += (x - t) + sum;
    sum = t;
  }
  return sum + comp;
}

double integrate(const RVector& f, const RVector& measure) {
  if (f.size() != measure.size()) throw DimensionError("integrate: length mismatch");
  return compensated_sum(f.cwiseProduct(measure));
}

RVector canonical_measure(const PotentialField& phi) {
  const RVector logm = phi.model()->log_mu0_masses() - phi.values();
  const double lse = logsumexp(logm);
  return (logm.array() - lse).exp();
}

RVector ma_density(const PotentialField& phi) {
  const RadialGrid* g = phi.model()->radial();
  if (!g || !phi.is_radial())
    throw UnsupportedError("ma_density: requires a radial potential on the projective line");
  const RVector m = radial::ma_profile(*g, phi.profile());
  return phi.model()->broadcast_radial(m / (2.0 * kPi));
}

namespace radial {

std::pair<RVector, RVector> derivatives(const RadialGrid& g, const RVector& f) {
  if (!g.spectral())
    throw UnsupportedError("radial derivatives need the Gauss-Legendre radial rule");
  if (f.size() != g.size()) throw DimensionError("radial derivatives: length mismatch");
  RVector d1 = g.diff * f;
  RVector d2 = g.diff * d1;
  return {std::move(d1), std::move(d2)};
}

RVector ma_profile(const RadialGrid& g, const RVector& phi) {
  const auto [d1, d2] = derivatives(g, phi);
  RVector m(g.size());
  for (Eigen::Index a = 0; a < g.size(); ++a)
    m(a) = 2.0 + (g.c(a) - g.u(a)) * d1(a) + g.u(a) * g.c(a) * d2(a);
  return m;
}

std::pair<RVector, double> canonical_profile(const RadialGrid& g, const RVector& phi) {
  if (phi.size() != g.size()) throw DimensionError("canonical_profile: length mismatch");
  const RVector logw = g.weights.array().log() - phi.array();
  const double lse = logsumexp(logw);
  RVector density = (-phi.array() - lse).exp();
  return {std::move(density), lse};
}

RVector interpolate(const RadialGrid& g, const RVector& f, const RVector& points) {
  if (!g.spectral()) throw UnsupportedError("interpolate needs the Gauss-Legendre radial rule");
  RVector out(points.size());
  for (Eigen::Index p = 0; p < points.size(); ++p) {
    const double x = points(p);
    double num = 0.0, den = 0.0;
    bool hit = false;
    for (Eigen::Index j = 0; j < g.size(); ++j) {
      const double d = x - g.u(j);
      if (d == 0.0) {
        out(p) = f(j);
        hit = true;
        break;
      }
      const double t = g.bary(j) / d;
      num += t * f(j);
      den += t;
    }
    if (!hit) out(p) = num / den;
  }
  return out;
}

}  // namespace radial
}  // namespace qkrf
