#pragma once

#include "covspde/observables.hpp"
#include "covspde/solve.hpp"

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace covspde {

/// Radial bump eta(x) = c exp(-1/(1-|x|^2)) on the unit ball with unit mass,
/// scaled as eta^eps(x) = eps^-d eta(x/eps).
class Mollifier {
 public:
  Mollifier(int d, double eps);

  int d() const { return d_; }
  double eps() const { return eps_; }
  double value(const double* x) const;
  /// ((-1/(2 pi r)) d/dr)^shift eta^eps: the bump with the same Fourier
  /// profile in dimension d + 2 shift.
  double radial(double r, int shift = 0) const;
  /// int eta^eps(y) Phi(mu|y|) dy with Phi the regular radial solution of
  /// Delta Phi = mu^2 Phi, Phi(0) = 1. This is the factor by which convolution
  /// with eta^eps scales a Yukawa kernel outside the ball.
  double multiplier(double mu) const;
  double multiplier_dmu(double mu) const;
  /// int eta^eps(y) e^{i<k,y>} dy.
  double fourier(double k) const;
  /// int eta^eps by radial quadrature.
  double mass() const;

 private:
  int d_;
  double eps_;
  double norm_;
};

/// G * eta^eps for a list of scales (0 means the bare kernel), evaluated
/// together so the shared Bessel and polynomial work is done once.
class MollifiedKernel {
 public:
  MollifiedKernel(std::shared_ptr<const GreenFunction> g, std::vector<double> eps);

  const GreenFunction& green() const { return *g_; }
  const std::vector<double>& eps() const { return eps_; }
  std::size_t levels() const { return eps_.size(); }
  int dim() const { return g_->dim(); }
  double max_eps() const { return eps_max_; }
  /// out[l * N * N + a * N + b] for level l.
  void eval(const double* x, double* out) const;

 private:
  struct Group {
    double mu;
    int power;
    double coeff;
  };
  struct Basis {
    double mu, nu0;
    std::vector<double> scale;  // per k
  };
  void radial_inside(double r, std::size_t level, double* R) const;

  std::shared_ptr<const GreenFunction> g_;
  std::vector<double> eps_;
  double eps_max_ = 0.0;
  int kmax_ = 0;
  std::vector<Group> groups_;
  std::vector<std::vector<double>> c_, dc_;  // [level][group]
  std::vector<Basis> bases_;
  std::vector<std::vector<double>> weight_;   // [level][basis]
  // Chebyshev coefficients in u = (r/eps)^2: [level][group][k].
  std::vector<std::vector<std::vector<std::vector<double>>>> table_;
};

/// Which field components carry the cocycle's form components: one entry per
/// axis for k = 1, one per rotation plane (i<j, lexicographic) for k = 2.
struct ComponentMap {
  std::vector<int> comp;
  std::vector<double> sign;
  static ComponentMap range(int count, int offset = 0);
};

/// Segment or circular arc, parametrized by s in [0, 1].
struct LoopPiece {
  enum class Kind { Segment, Arc };
  Kind kind = Kind::Segment;
  VecR a, b;              // segment ends
  VecR c, u, v;           // arc: c + R (cos t u + sin t v)
  double R = 0.0, t0 = 0.0, t1 = 0.0;

  VecR point(double s) const;
  VecR tangent(double s) const;  // dz/ds
  double length() const;
  LoopPiece sub(double s0, double s1) const;
};

/// Closed 1-cocycle made of segments and arcs.
class Loop {
 public:
  /// Closed polyline; the closing segment is implicit unless last == first.
  static Loop polyline(const std::vector<VecR>& vertices);
  /// Counterclockwise circle in the (i, j) coordinate plane.
  static Loop circle(const VecR& center, double radius, int axis_i, int axis_j);

  int d() const { return d_; }
  const std::vector<LoopPiece>& pieces() const { return pieces_; }
  bool is_polyline() const { return polyline_; }
  /// Polyline vertices without the repeated first vertex.
  const std::vector<VecR>& vertices() const { return vertices_; }

  Loop reversed() const;
  Loop translated(const VecR& s) const;
  /// Vertex doubling (midpoints inserted; arcs halved).
  Loop refined() const;
  double length() const;
  double min_feature() const;
  double distance(const double* x) const;
  void bounds(VecR& lo, VecR& hi) const;

 private:
  int d_ = 0;
  bool polyline_ = false;
  std::vector<VecR> vertices_;
  std::vector<LoopPiece> pieces_;
};

/// Oriented triangulated surface (closed for k = 2 cocycles, or spanning a
/// loop for the Stokes check).
struct Surface {
  int d = 3;
  std::vector<VecR> vertices;
  std::vector<std::array<int, 3>> triangles;

  /// Fan from the vertex mean over a polyline loop; boundary = loop.
  static Surface fan(const Loop& polygon);
  /// Icosahedron refined `level` times and projected to the sphere.
  static Surface icosphere(const VecR& center, double radius, int level);

  bool closed() const;
  /// Boundary edges (used once), as oriented vertex pairs.
  std::vector<std::array<int, 2>> boundary() const;
  Surface reversed() const;
  /// Splits each triangle into four.
  Surface refined() const;
  double distance(const double* x) const;
  double diameter() const;
};

/// Adaptive Gauss-Legendre (16 points) line integral of an m-vector integrand
/// f(z) contracted with dz: f(z, dz/ds, out) must add into out. `focus` is the
/// point whose distance drives the initial subdivision (nullptr: none).
void line_integral(const Loop& loop, int m, const std::function<void(const VecR&, const VecR&, double*)>& f,
                   double* out, const double* focus = nullptr, double smooth_radius = 0.0,
                   double rel_tol = 1e-10);

/// sum_mu sign_mu int_loop G_l(x - z)[:, comp_mu] dz^mu for every level l of
/// the kernel: out[l * N + a].
void loop_response(const MollifiedKernel& k, const Loop& loop, const ComponentMap& map, const double* x,
                   double* out);

/// A^(1)(Gamma) for a point-backend field (k = 1).
double cocycle_integral(const FieldRealization& field, const Loop& loop, const ComponentMap& map);
/// A^(2)(S) for a closed surface; quadrature with `refine` uniform splits.
double cocycle_integral(const FieldRealization& field, const Surface& surface, const ComponentMap& map,
                        int refine = 2);
/// Integral of a 2-form F(x) -> F_plane over an oriented surface, degree-5
/// rule on every triangle after `refine` uniform splits.
double surface_integral(const Surface& s, const std::function<void(const VecR&, double*)>& form, int refine);

/// rho^eps_{Gamma}: components comp_mu(x) = sign_mu int_loop eta^eps(x - z) dz^mu,
/// sampled on the lattice (N = field multiplet size).
LatticeField loop_testfunction(const Loop& loop, const Mollifier& moll, const Lattice& lat, int N,
                               const ComponentMap& map);

struct CumulantGrowth {
  bool with_i = false;     // |psi(y)| <= c |y|^{1+eta}
  bool without_i = false;  // |int (e^{<alpha,y>} - 1) dlambda| <= c |y|^{1+eta}
  double small_exponent = 0.0;
};
CumulantGrowth cumulant_growth(const LevyMeasure& levy);

struct LoopClosedResult {
  cplx value = 1.0;
  double error_estimate = 0.0;
  double tail_bound = 0.0;
  std::size_t evaluations = 0;
  bool converged = true;
  bool decay_certified = false;
  CumulantGrowth growth;
  std::string certification;  // "certified" or "hypotheses unverified"
};

struct LoopOptions {
  double cutoff = 0.0;    // 0: 12 / m_min (closed form), 6 / m_min (sampling)
  double rel_tol = 1e-3;  // outer x-integral, relative to the log
  std::size_t max_evaluations = 4000000;
  Exec exec = default_exec();
};

/// exp int dx int dlambda(alpha) (exp(i sum_l int_{Gamma_l} <alpha, G(x - .) dz>) - 1).
LoopClosedResult loop_schwinger_closed(std::shared_ptr<const GreenFunction> g, const LevyMeasure& levy,
                                       const std::vector<Loop>& loops, const ComponentMap& map,
                                       const LoopOptions& opt = {});

struct LoopMcResult {
  std::vector<double> eps;
  std::vector<SchwingerEstimate> per_eps;
  SchwingerEstimate extrapolated;
  std::vector<SchwingerEstimate> cauchy;  // E|L_eps - L_eps'|^2 for consecutive scales
  bool cauchy_monotone = true;
  std::vector<std::string> warnings;
};

/// Monte Carlo of E prod_l exp(i (A, rho^eps_{Gamma_l})) over the schedule,
/// pure Poisson noise in the loops' bounding box padded by the cutoff.
LoopMcResult loop_schwinger_mc(std::shared_ptr<const GreenFunction> g, const LevyMeasure& levy,
                               const std::vector<Loop>& loops, const ComponentMap& map,
                               const std::vector<double>& eps_schedule, SeedRange seeds,
                               const LoopOptions& opt = {});

/// Same with a full NoiseSpec: the Gaussian part pairs with the
/// band-limited lattice interpolant of rho^eps (loop_testfunction), the
/// Poisson part pairs pointwise as above. Seeds drive both parts.
LoopMcResult loop_schwinger_mc(std::shared_ptr<const GreenFunction> g, const NoiseSpec& spec, const Lattice& lat,
                               const std::vector<Loop>& loops, const ComponentMap& map,
                               const std::vector<double>& eps_schedule, SeedRange seeds,
                               const LoopOptions& opt = {});
/// Closed form of the Gaussian factor of that lattice pairing at one scale.
cplx loop_gaussian_factor(const GreenFunction& g, const NoiseSpec& spec, const Lattice& lat,
                          const std::vector<Loop>& loops, const ComponentMap& map, double eps);

/// Poisson atoms in the cube [lo, lo + side]^d (same streams as sample_noise).
struct PointConfiguration {
  int d = 0, N = 0;
  std::vector<double> pos, marks;
  std::size_t size() const { return N ? marks.size() / N : 0; }
};
PointConfiguration sample_points(const LevyMeasure& levy, int d, const VecR& lo, double side,
                                 std::uint64_t seed);

struct StokesReport {
  double loop_value = 0.0;
  double surface_value = 0.0;
  double residual = 0.0;  // |loop - surface| / max(|loop|, |surface|)
  bool pass = false;
};
StokesReport stokes_check(const FieldRealization& field, const Loop& loop, const Surface& surface,
                          const ComponentMap& map, int refine = 2);

struct TailReport {
  std::vector<double> shell_sums;  // n = 1 .. n_shells
  double last = 0.0;
  double trend = 0.0;  // slope of log shell sum beyond n = 3
  bool pass = false;
};
TailReport tail_summability_check(const GreenFunction& g, const LevyMeasure& levy, int n_shells,
                                  std::uint64_t seed, double threshold = 1e-3);

}  // namespace covspde
