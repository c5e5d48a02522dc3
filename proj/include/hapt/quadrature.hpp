#pragma once

// Vector-valued adaptive Gauss-Kronrod (7/15) quadrature on log-scaled
// integrands.
//
// Components are organised in `groups` blocks of `width` components each.
// At every abscissa the integrand reports one log-scale per group and one
// linear factor per component; the component value is
//   exp(log_scale[g] - shift[g]) * factor[g * width + j].
// Each group keeps its own shift, so groups whose magnitudes differ by
// hundreds of orders of magnitude share abscissae without underflow.
// Component 0 of every group is the reference: all errors in the group are
// controlled relative to its integral.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "hapt/error.hpp"
#include "hapt/special.hpp"

namespace hapt::quad {

namespace detail {

inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};

inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};

// Gauss weights for the odd Kronrod abscissae kXgk[1], [3], [5], [7].
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

inline constexpr int kPoints = 15;

// Abscissa offsets in [-1, 1], ordered left to right, with Kronrod weight
// and Gauss weight (0 for Kronrod-only points).
struct RulePoint {
  double x;
  double wk;
  double wg;
};

inline std::array<RulePoint, kPoints> make_rule() {
  std::array<RulePoint, kPoints> r{};
  for (int i = 0; i < 7; ++i) {
    const double wg = (i % 2 == 1) ? kWg[static_cast<std::size_t>(i / 2)] : 0.0;
    r[static_cast<std::size_t>(i)] = {-kXgk[static_cast<std::size_t>(i)], kWgk[static_cast<std::size_t>(i)], wg};
    r[static_cast<std::size_t>(14 - i)] = {kXgk[static_cast<std::size_t>(i)], kWgk[static_cast<std::size_t>(i)], wg};
  }
  r[7] = {0.0, kWgk[7], kWg[3]};
  return r;
}

inline const std::array<RulePoint, kPoints>& rule() {
  static const auto r = make_rule();
  return r;
}

}  // namespace detail

struct Options {
  double rel_tol = 1e-8;
  std::size_t max_panels = 2000;
};

struct Result {
  std::size_t groups = 0;
  std::size_t width = 0;
  std::vector<double> scaled;     // per component, in units of exp(shift[g])
  std::vector<double> shift;      // per group
  std::vector<double> rel_error;  // per group, worst component error / |reference|
  std::size_t evaluations = 0;
  std::size_t panels = 0;
  bool converged = false;

  double value(std::size_t g, std::size_t j) const { return scaled[g * width + j]; }
  double log_value(std::size_t g, std::size_t j) const {
    const double v = value(g, j);
    return v > 0.0 ? std::log(v) + shift[g] : kNegInf;
  }
  // Ratio of component j to the group reference; exact in scaled units.
  double ratio(std::size_t g, std::size_t j) const { return value(g, j) / value(g, 0); }
  double worst_rel_error() const {
    double w = 0.0;
    for (double e : rel_error) w = std::max(w, e);
    return w;
  }
};

// Reusable integrator; holds scratch buffers so repeated small integrals do
// not reallocate. Not thread-safe: use one instance per thread.
class Integrator {
 public:
  Integrator(std::size_t groups, std::size_t width) : groups_(groups), width_(width) {}

  std::size_t groups() const noexcept { return groups_; }
  std::size_t width() const noexcept { return width_; }

  // `f(x, log_scale, factor)` fills log_scale[groups] and factor[groups*width].
  // `breaks` must be sorted and contain the interval endpoints.
  template <class F>
  Result integrate(F&& f, std::span<const double> breaks, const Options& opt) {
    const std::size_t C = groups_ * width_;
    const std::size_t G = groups_;
    Result res;
    res.groups = G;
    res.width = width_;
    shift_.assign(G, kNegInf);
    panels_.clear();
    values_.clear();
    errors_.clear();
    gerr_.clear();
    std::size_t evals = 0;

    // Initial panels: evaluate raw values first so shifts reflect every
    // abscissa before any exponentiation happens.
    const std::size_t n0 = breaks.size() - 1;
    raw_ls_.assign(n0 * detail::kPoints * G, kNegInf);
    raw_fac_.assign(n0 * detail::kPoints * C, 0.0);
    for (std::size_t p = 0; p < n0; ++p) {
      eval_points(f, breaks[p], breaks[p + 1], &raw_ls_[p * detail::kPoints * G], &raw_fac_[p * detail::kPoints * C]);
      evals += detail::kPoints;
    }
    for (std::size_t i = 0; i < n0 * detail::kPoints; ++i)
      for (std::size_t g = 0; g < G; ++g) shift_[g] = std::max(shift_[g], raw_ls_[i * G + g]);
    for (std::size_t g = 0; g < G; ++g)
      if (shift_[g] == kNegInf) shift_[g] = 0.0;
    for (std::size_t p = 0; p < n0; ++p)
      push_panel(breaks[p], breaks[p + 1], &raw_ls_[p * detail::kPoints * G], &raw_fac_[p * detail::kPoints * C]);

    total_.assign(C, 0.0);
    total_err_.assign(C, 0.0);
    for (std::size_t p = 0; p < panels_.size(); ++p)
      for (std::size_t c = 0; c < C; ++c) {
        total_[c] += values_[p * C + c];
        total_err_[c] += errors_[p * C + c];
      }

    std::vector<double> ls(detail::kPoints * G);
    std::vector<double> fac(detail::kPoints * C);
    while (true) {
      // Tolerance per group, relative to its reference integral.
      tol_.assign(G, 0.0);
      bool done = true;
      for (std::size_t g = 0; g < G; ++g) {
        tol_[g] = opt.rel_tol * std::abs(total_[g * width_]);
        for (std::size_t j = 0; j < width_; ++j)
          if (total_err_[g * width_ + j] > tol_[g]) done = false;
      }
      if (done) {
        res.converged = true;
        break;
      }
      if (panels_.size() >= opt.max_panels) break;

      // Bisect the panel with the largest normalised error.
      std::size_t worst = panels_.size();
      double worst_ratio = -1.0;
      for (std::size_t p = 0; p < panels_.size(); ++p) {
        double r = 0.0;
        for (std::size_t g = 0; g < G; ++g) {
          const double e = gerr_[p * G + g];
          if (e <= 0.0) continue;
          r = std::max(r, tol_[g] > 0.0 ? e / tol_[g] : std::numeric_limits<double>::infinity());
        }
        if (r > worst_ratio) {
          worst_ratio = r;
          worst = p;
        }
      }
      const double a = panels_[worst].a;
      const double b = panels_[worst].b;
      const double mid = 0.5 * (a + b);
      if (!(mid > a && mid < b) || (b - a) <= 1e-13 * std::max({1.0, std::abs(a), std::abs(b)})) break;

      for (std::size_t c = 0; c < C; ++c) {
        total_[c] -= values_[worst * C + c];
        total_err_[c] -= errors_[worst * C + c];
      }
      erase_panel(worst);
      for (int half = 0; half < 2; ++half) {
        const double lo = half == 0 ? a : mid;
        const double hi = half == 0 ? mid : b;
        eval_points(f, lo, hi, ls.data(), fac.data());
        evals += detail::kPoints;
        for (std::size_t g = 0; g < G; ++g) {
          double m = kNegInf;
          for (int q = 0; q < detail::kPoints; ++q) m = std::max(m, ls[static_cast<std::size_t>(q) * G + g]);
          if (m > shift_[g] + 500.0) rescale(g, m);
        }
        push_panel(lo, hi, ls.data(), fac.data());
        const std::size_t p = panels_.size() - 1;
        for (std::size_t c = 0; c < C; ++c) {
          total_[c] += values_[p * C + c];
          total_err_[c] += errors_[p * C + c];
        }
      }
    }

    // Final totals summed in left-to-right panel order for reproducibility.
    std::vector<std::size_t> order(panels_.size());
    for (std::size_t p = 0; p < order.size(); ++p) order[p] = p;
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return panels_[x].a < panels_[y].a; });
    res.scaled.assign(C, 0.0);
    std::vector<double> err(C, 0.0);
    for (std::size_t p : order)
      for (std::size_t c = 0; c < C; ++c) {
        res.scaled[c] += values_[p * C + c];
        err[c] += errors_[p * C + c];
      }
    res.shift = shift_;
    res.rel_error.assign(G, 0.0);
    for (std::size_t g = 0; g < G; ++g) {
      const double ref = std::abs(res.scaled[g * width_]);
      double w = 0.0;
      for (std::size_t j = 0; j < width_; ++j) w = std::max(w, err[g * width_ + j]);
      res.rel_error[g] = ref > 0.0 ? w / ref : (w > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    }
    res.evaluations = evals;
    res.panels = panels_.size();
    return res;
  }

 private:
  struct Panel {
    double a;
    double b;
  };

  template <class F>
  void eval_points(F& f, double a, double b, double* ls, double* fac) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    const auto& r = detail::rule();
    const std::size_t C = groups_ * width_;
    for (int q = 0; q < detail::kPoints; ++q) {
      const double x = c + h * r[static_cast<std::size_t>(q)].x;
      double* lsq = ls + static_cast<std::size_t>(q) * groups_;
      double* fq = fac + static_cast<std::size_t>(q) * C;
      f(x, std::span<double>(lsq, groups_), std::span<double>(fq, C));
      for (std::size_t g = 0; g < groups_; ++g) {
        if (std::isnan(lsq[g]) || lsq[g] == std::numeric_limits<double>::infinity())
          throw NonFiniteError("non-finite integrand log-scale at x=" + std::to_string(x));
      }
      for (std::size_t k = 0; k < C; ++k)
        if (!std::isfinite(fq[k])) throw NonFiniteError("non-finite integrand factor at x=" + std::to_string(x));
    }
  }

  void push_panel(double a, double b, const double* ls, const double* fac) {
    const std::size_t C = groups_ * width_;
    const std::size_t G = groups_;
    const auto& r = detail::rule();
    const double h = 0.5 * (b - a);
    const std::size_t base = values_.size();
    values_.resize(base + C, 0.0);
    errors_.resize(base + C, 0.0);
    gerr_.resize(gerr_.size() + G, 0.0);
    const std::size_t pidx = panels_.size();
    panels_.push_back({a, b});
    std::array<double, detail::kPoints> w{};
    for (std::size_t g = 0; g < G; ++g) {
      for (int q = 0; q < detail::kPoints; ++q) {
        const double l = ls[static_cast<std::size_t>(q) * G + g];
        w[static_cast<std::size_t>(q)] = l == kNegInf ? 0.0 : std::exp(l - shift_[g]);
      }
      double gmax = 0.0;
      for (std::size_t j = 0; j < width_; ++j) {
        const std::size_t c = g * width_ + j;
        double k = 0.0, gs = 0.0, kabs = 0.0;
        std::array<double, detail::kPoints> v{};
        for (int q = 0; q < detail::kPoints; ++q) {
          const auto& rp = r[static_cast<std::size_t>(q)];
          v[static_cast<std::size_t>(q)] = w[static_cast<std::size_t>(q)] * fac[static_cast<std::size_t>(q) * C + c];
          k += rp.wk * v[static_cast<std::size_t>(q)];
          gs += rp.wg * v[static_cast<std::size_t>(q)];
          kabs += rp.wk * std::abs(v[static_cast<std::size_t>(q)]);
        }
        const double mean = 0.5 * k;
        double asc = 0.0;
        for (int q = 0; q < detail::kPoints; ++q)
          asc += r[static_cast<std::size_t>(q)].wk * std::abs(v[static_cast<std::size_t>(q)] - mean);
        double err = std::abs((k - gs) * h);
        const double resasc = asc * h;
        if (resasc != 0.0 && err != 0.0) err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
        err = std::max(err, 50.0 * std::numeric_limits<double>::epsilon() * kabs * h);
        values_[base + c] = k * h;
        errors_[base + c] = err;
        gmax = std::max(gmax, err);
      }
      gerr_[pidx * G + g] = gmax;
    }
  }

  void erase_panel(std::size_t p) {
    const std::size_t C = groups_ * width_;
    const std::size_t G = groups_;
    const std::size_t last = panels_.size() - 1;
    if (p != last) {
      panels_[p] = panels_[last];
      std::copy_n(values_.begin() + static_cast<std::ptrdiff_t>(last * C), C, values_.begin() + static_cast<std::ptrdiff_t>(p * C));
      std::copy_n(errors_.begin() + static_cast<std::ptrdiff_t>(last * C), C, errors_.begin() + static_cast<std::ptrdiff_t>(p * C));
      std::copy_n(gerr_.begin() + static_cast<std::ptrdiff_t>(last * G), G, gerr_.begin() + static_cast<std::ptrdiff_t>(p * G));
    }
    panels_.pop_back();
    values_.resize(panels_.size() * C);
    errors_.resize(panels_.size() * C);
    gerr_.resize(panels_.size() * G);
  }

  void rescale(std::size_t g, double new_shift) {
    const double f = std::exp(shift_[g] - new_shift);
    const std::size_t C = groups_ * width_;
    for (std::size_t p = 0; p < panels_.size(); ++p) {
      for (std::size_t j = 0; j < width_; ++j) {
        values_[p * C + g * width_ + j] *= f;
        errors_[p * C + g * width_ + j] *= f;
      }
      gerr_[p * groups_ + g] *= f;
    }
    for (std::size_t j = 0; j < width_; ++j) {
      total_[g * width_ + j] *= f;
      total_err_[g * width_ + j] *= f;
    }
    shift_[g] = new_shift;
  }

  std::size_t groups_;
  std::size_t width_;
  std::vector<double> shift_;
  std::vector<Panel> panels_;
  std::vector<double> values_;
  std::vector<double> errors_;
  std::vector<double> gerr_;
  std::vector<double> total_;
  std::vector<double> total_err_;
  std::vector<double> tol_;
  std::vector<double> raw_ls_;
  std::vector<double> raw_fac_;
};

// Convenience wrapper: scalar integral of exp(log_f(x)) over [a, b]; returns
// the log of the integral.
template <class LogF>
double integrate_log(LogF&& log_f, double a, double b, const Options& opt = {}) {
  Integrator integ(1, 1);
  const std::array<double, 2> br{a, b};
  auto res = integ.integrate(
      [&](double x, std::span<double> ls, std::span<double> fac) {
        ls[0] = log_f(x);
        fac[0] = 1.0;
      },
      br, opt);
  if (!res.converged)
    throw QuadratureError("scalar integral did not converge", -1, -1, res.worst_rel_error());
  return res.log_value(0, 0);
}

}  // namespace hapt::quad
