//! Admissible diffusion tensors `a_{jk}` and the lower-order coefficients of
//! `B` and `C`.
//!
//! Two families satisfy the radial-trace property
//! `Σ x_j x_k a_{jk}(x) = |x|² h(|x|)`:
//!
//! * [`RadialAbcd`], built from radial profiles `a, b, d` and a non-negative
//!   field `c`, with `h = a + d`;
//! * [`PolynomialSeries`], finite sums of the monomial tensors `a^{(n)}`
//!   weighted by non-negative fields `d_n`, with zero trace.
//!
//! Anything else is accepted only through [`Family::Unchecked`] with
//! `allow_unchecked` set. Tensors are always 3×3; in two dimensions the
//! third row and column are zero and points have `x₃ = 0`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use ndarray::Array3;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::grid::{Dimension, RadialGrid, ShellGrid};

pub type Tensor = [[f64; 3]; 3];
pub type Vector = [f64; 3];
pub type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type PointFn = Arc<dyn Fn(Vector) -> f64 + Send + Sync>;
pub type TensorFn = Arc<dyn Fn(Vector) -> Tensor + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(Vector) -> Vector + Send + Sync>;

pub(crate) fn norm(x: Vector) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

pub(crate) fn quad_form(a: &Tensor, xi: Vector) -> f64 {
    let mut s = 0.0;
    for j in 0..3 {
        for k in 0..3 {
            s += a[j][k] * xi[j] * xi[k];
        }
    }
    s
}

/// Samples on a radial grid with four-point Lagrange interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    grid: RadialGrid,
    values: Vec<f64>,
}

impl Profile {
    pub fn new(grid: RadialGrid, values: Vec<f64>) -> Result<Self> {
        crate::error::check_len(grid.n_nodes(), values.len())?;
        if grid.n_nodes() < 4 {
            return Err(Error::Config("profiles need at least 4 nodes".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("profile contains non-finite samples".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: RadialGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.sample(f);
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Cubic interpolation; points slightly outside the grid use the end stencil.
    pub fn eval(&self, r: f64) -> f64 {
        let n = self.values.len();
        let h = self.grid.spacing();
        let s = (r - self.grid.r_min()) / h;
        let i = (s.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
        let x = s - i as f64;
        let f = &self.values[i..i + 4];
        // Lagrange basis on nodes 0, 1, 2, 3.
        let l0 = -(x - 1.0) * (x - 2.0) * (x - 3.0) / 6.0;
        let l1 = x * (x - 2.0) * (x - 3.0) / 2.0;
        let l2 = -x * (x - 1.0) * (x - 3.0) / 2.0;
        let l3 = x * (x - 1.0) * (x - 2.0) / 6.0;
        l0 * f[0] + l1 * f[1] + l2 * f[2] + l3 * f[3]
    }
}

/// A function of `|x|`.
#[derive(Clone)]
pub enum Radial {
    Constant(f64),
    Samples(Profile),
    Analytic(RadialFn),
}

impl Radial {
    pub fn analytic(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Radial::Analytic(Arc::new(f))
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Radial::Constant(c) => *c,
            Radial::Samples(p) => p.eval(r),
            Radial::Analytic(f) => f(r),
        }
    }
}

impl fmt::Debug for Radial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Radial::Constant(c) => write!(f, "Constant({c})"),
            Radial::Samples(p) => write!(f, "Samples({} nodes)", p.values().len()),
            Radial::Analytic(_) => write!(f, "Analytic"),
        }
    }
}

/// A function of `x`.
#[derive(Clone)]
pub enum Spatial {
    Constant(f64),
    Radial(Radial),
    Analytic(PointFn),
}

impl Spatial {
    pub fn analytic(f: impl Fn(Vector) -> f64 + Send + Sync + 'static) -> Self {
        Spatial::Analytic(Arc::new(f))
    }

    pub fn eval(&self, x: Vector) -> f64 {
        match self {
            Spatial::Constant(c) => *c,
            Spatial::Radial(r) => r.eval(norm(x)),
            Spatial::Analytic(f) => f(x),
        }
    }
}

impl fmt::Debug for Spatial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Spatial::Constant(c) => write!(f, "Constant({c})"),
            Spatial::Radial(r) => write!(f, "Radial({r:?})"),
            Spatial::Analytic(_) => write!(f, "Analytic"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RadialAbcd {
    pub a: Radial,
    pub b: Radial,
    pub c: Spatial,
    pub d: Radial,
}

impl RadialAbcd {
    /// `a_{jk} = a δ_{jk}`.
    pub fn isotropic(a: Radial) -> Self {
        Self { a, b: Radial::Constant(0.0), c: Spatial::Constant(0.0), d: Radial::Constant(0.0) }
    }

    pub fn tensor(&self, x: Vector) -> Tensor {
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        let r = r2.sqrt();
        let (a, b, d) = (self.a.eval(r), self.b.eval(r), self.d.eval(r));
        let c = self.c.eval(x);
        let mut t = [[0.0; 3]; 3];
        for j in 0..3 {
            for k in 0..3 {
                t[j][k] = if j == k {
                    a + (r2 - x[j] * x[j]) * (c - b) / r2 + x[j] * x[j] * d / r2
                } else {
                    x[j] * x[k] * (b - c + d) / r2
                };
            }
        }
        t
    }

    /// `h(r) = a(r) + d(r)`.
    pub fn trace(&self, r: f64) -> f64 {
        self.a.eval(r) + self.d.eval(r)
    }

    /// `a - b⁺ - d⁻` at `r`.
    pub fn ellipticity_margin(&self, r: f64) -> f64 {
        self.a.eval(r) - self.b.eval(r).max(0.0) - (-self.d.eval(r)).max(0.0)
    }

    /// Minimum of `a - b⁺ - d⁻` over the grid nodes.
    pub fn lower_bound(&self, grid: &RadialGrid) -> f64 {
        grid.nodes().iter().map(|&r| self.ellipticity_margin(r)).fold(f64::INFINITY, f64::min)
    }
}

/// `Σ_{n=1}^N a^{(n)} d_n`, one weight per term.
#[derive(Debug, Clone)]
pub struct PolynomialSeries {
    pub weights: Vec<Spatial>,
}

impl PolynomialSeries {
    /// The monomial tensor `a^{(n)}(x)`, `n ≥ 1`. Off-diagonal entries carry
    /// a factor 1, which is what the sum-of-squares form and the zero trace
    /// require.
    pub fn monomial(n: usize, x: Vector) -> Tensor {
        assert!(n >= 1);
        let e = 2 * n as i32;
        let p = |v: f64, k: i32| v.powi(k);
        let [x1, x2, x3] = x;
        let a11 = 2.0 * p(x1, e - 2) * p(x2, e) * p(x3, e);
        let a22 = 2.0 * p(x1, e) * p(x2, e - 2) * p(x3, e);
        let a33 = 2.0 * p(x1, e) * p(x2, e) * p(x3, e - 2);
        let a12 = -p(x1, e - 1) * p(x2, e - 1) * p(x3, e);
        let a13 = -p(x1, e - 1) * p(x2, e) * p(x3, e - 1);
        let a23 = -p(x1, e) * p(x2, e - 1) * p(x3, e - 1);
        [[a11, a12, a13], [a12, a22, a23], [a13, a23, a33]]
    }

    pub fn tensor(&self, x: Vector) -> Tensor {
        let mut t = [[0.0; 3]; 3];
        for (i, w) in self.weights.iter().enumerate() {
            let m = Self::monomial(i + 1, x);
            let dn = w.eval(x);
            for j in 0..3 {
                for k in 0..3 {
                    t[j][k] += m[j][k] * dn;
                }
            }
        }
        t
    }
}

#[derive(Clone)]
pub enum Family {
    RadialAbcd(RadialAbcd),
    PolynomialSeries(PolynomialSeries),
    Sum(RadialAbcd, PolynomialSeries),
    /// Any tensor field; only built when `allow_unchecked` is set.
    Unchecked(TensorFn),
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::RadialAbcd(_) => "radial_abcd",
            Family::PolynomialSeries(_) => "polynomial_series",
            Family::Sum(..) => "sum",
            Family::Unchecked(_) => "unchecked",
        }
    }

    pub fn abcd(&self) -> Option<&RadialAbcd> {
        match self {
            Family::RadialAbcd(b) | Family::Sum(b, _) => Some(b),
            _ => None,
        }
    }

    fn series(&self) -> Option<&PolynomialSeries> {
        match self {
            Family::PolynomialSeries(s) | Family::Sum(_, s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Debug for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::RadialAbcd(b) => f.debug_tuple("RadialAbcd").field(b).finish(),
            Family::PolynomialSeries(s) => f.debug_tuple("PolynomialSeries").field(s).finish(),
            Family::Sum(b, s) => f.debug_tuple("Sum").field(b).field(s).finish(),
            Family::Unchecked(_) => write!(f, "Unchecked"),
        }
    }
}

/// Coefficients `b_{jk}` of the second-order operator `B`.
#[derive(Clone)]
pub enum SecondOrder {
    /// `b_{jk} = s(x) δ_{jk}`.
    Scalar(Spatial),
    Tensor(TensorFn),
}

/// Coefficients `c_j` of the first-order operator `C`.
#[derive(Clone)]
pub enum FirstOrder {
    /// `c_j = s(x) x_j / |x|`, a multiple of `D_{|x|}`.
    Radial(Spatial),
    Vector(VectorFn),
}

impl fmt::Debug for SecondOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SecondOrder::Scalar(s) => write!(f, "Scalar({s:?})"),
            SecondOrder::Tensor(_) => write!(f, "Tensor"),
        }
    }
}

impl fmt::Debug for FirstOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FirstOrder::Radial(s) => write!(f, "Radial({s:?})"),
            FirstOrder::Vector(_) => write!(f, "Vector"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CoefficientSpec {
    pub dimension: Dimension,
    pub family: Family,
    pub b: SecondOrder,
    pub c: FirstOrder,
    pub allow_unchecked: bool,
    /// Added to `a₁₂` only. Breaks symmetry and the trace property on
    /// purpose so the verify suite can demonstrate a failing check.
    pub asymmetry: f64,
}

impl CoefficientSpec {
    pub fn new(dimension: Dimension, family: Family) -> Self {
        Self {
            dimension,
            family,
            b: SecondOrder::Scalar(Spatial::Constant(1.0)),
            c: FirstOrder::Radial(Spatial::Constant(1.0)),
            allow_unchecked: false,
            asymmetry: 0.0,
        }
    }

    /// `A = B = Δ`, `C = D_{|x|}`.
    pub fn laplacian(dimension: Dimension) -> Self {
        Self::new(dimension, Family::RadialAbcd(RadialAbcd::isotropic(Radial::Constant(1.0))))
    }

    pub fn with_b(mut self, b: SecondOrder) -> Self {
        self.b = b;
        self
    }

    pub fn with_c(mut self, c: FirstOrder) -> Self {
        self.c = c;
        self
    }

    fn mask(&self, mut t: Tensor) -> Tensor {
        if self.dimension == Dimension::Two {
            for j in 0..3 {
                t[2][j] = 0.0;
                t[j][2] = 0.0;
            }
        }
        t
    }

    /// `a_{jk}(x)`.
    pub fn a_tensor(&self, x: Vector) -> Tensor {
        let mut t = match &self.family {
            Family::RadialAbcd(b) => b.tensor(x),
            Family::PolynomialSeries(s) => s.tensor(x),
            Family::Sum(b, s) => {
                let mut t = b.tensor(x);
                let u = s.tensor(x);
                for j in 0..3 {
                    for k in 0..3 {
                        t[j][k] += u[j][k];
                    }
                }
                t
            }
            Family::Unchecked(f) => f(x),
        };
        t[0][1] += self.asymmetry;
        self.mask(t)
    }

    /// `b_{jk}(x)`.
    pub fn b_tensor(&self, x: Vector) -> Tensor {
        let t = match &self.b {
            SecondOrder::Scalar(s) => {
                let v = s.eval(x);
                [[v, 0.0, 0.0], [0.0, v, 0.0], [0.0, 0.0, v]]
            }
            SecondOrder::Tensor(f) => f(x),
        };
        self.mask(t)
    }

    /// `c_j(x)`.
    pub fn c_vector(&self, x: Vector) -> Vector {
        let mut v = match &self.c {
            FirstOrder::Radial(s) => {
                let (r, k) = (norm(x), s.eval(x));
                [k * x[0] / r, k * x[1] / r, k * x[2] / r]
            }
            FirstOrder::Vector(f) => f(x),
        };
        if self.dimension == Dimension::Two {
            v[2] = 0.0;
        }
        v
    }

    /// Checks the family and pointwise sign conditions on the grid.
    pub fn validate(&self, grid: &ShellGrid) -> Result<()> {
        if matches!(self.family, Family::Unchecked(_)) && !self.allow_unchecked {
            return Err(Error::UnsupportedFamily("unchecked tensors need allow_unchecked = true".into()));
        }
        if let Some(series) = self.family.series() {
            if self.dimension == Dimension::Two {
                return Err(Error::UnsupportedFamily("polynomial series vanish identically when x₃ = 0".into()));
            }
            if series.weights.is_empty() {
                return Err(Error::Config("polynomial series needs at least one term".into()));
            }
        }
        let radial = &grid.radial;
        if let Some(abcd) = self.family.abcd() {
            for (i, &r) in radial.nodes().iter().enumerate() {
                let a = abcd.a.eval(r);
                if !(a > 0.0) {
                    return Err(Error::Admissibility { node: i, r, reason: format!("a = {a} must be positive") });
                }
                let m = abcd.ellipticity_margin(r);
                if !(m > 0.0) {
                    return Err(Error::Admissibility {
                        node: i,
                        r,
                        reason: format!("a - b⁺ - d⁻ = {m} must be positive"),
                    });
                }
            }
        }
        let (nr, np, nt) = grid.shape();
        for i in 0..nr {
            for m in 0..np {
                for l in 0..nt {
                    let x = grid.point(i, m, l);
                    let r = radial.nodes()[i];
                    if let Some(abcd) = self.family.abcd() {
                        let c = abcd.c.eval(x);
                        if c < 0.0 {
                            return Err(Error::Admissibility {
                                node: i,
                                r,
                                reason: format!("c = {c} must be non-negative"),
                            });
                        }
                    }
                    if let Some(series) = self.family.series() {
                        for (n, w) in series.weights.iter().enumerate() {
                            let dn = w.eval(x);
                            if dn < 0.0 {
                                return Err(Error::Admissibility {
                                    node: i,
                                    r,
                                    reason: format!("d_{} = {dn} must be non-negative", n + 1),
                                });
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// `Σ x_j x_k a_{jk}(x) / |x|²`.
pub fn radial_trace(a: &Tensor, x: Vector) -> f64 {
    let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    quad_form(a, x) / r2
}

/// Min and max of `ξᵀ a(x) ξ / |ξ|²` over all sample pairs.
pub fn ellipticity_bounds(spec: &CoefficientSpec, points: &[Vector], directions: &[Vector]) -> Result<(f64, f64)> {
    if points.is_empty() || directions.is_empty() {
        return Err(Error::Config("ellipticity needs points and directions".into()));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &x in points {
        let a = spec.a_tensor(x);
        for &xi in directions {
            let xi = if spec.dimension == Dimension::Two { [xi[0], xi[1], 0.0] } else { xi };
            let n2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
            if n2 == 0.0 {
                continue;
            }
            let q = quad_form(&a, xi) / n2;
            lo = lo.min(q);
            hi = hi.max(q);
        }
    }
    if !(lo > 0.0) {
        return Err(Error::Admissibility {
            node: 0,
            r: f64::NAN,
            reason: format!("ellipticity lower estimate {lo:.3e} is not positive"),
        });
    }
    Ok((lo, hi))
}

/// The functions `f_j, g_j, h_j, k_j, l_j` at one point, indexed `j - 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalRep {
    pub f: [f64; 3],
    pub g: [f64; 3],
    pub h: [f64; 3],
    pub k: [f64; 3],
    pub l: [f64; 3],
}

/// Spherical representation of `ã` from the trigonometric values of `(φ, θ)`.
/// In 2D pass `cos θ = 0, sin θ = 1`.
pub fn spherical_rep(a: &Tensor, cos_phi: f64, sin_phi: f64, cos_theta: f64, sin_theta: f64) -> SphericalRep {
    let (cp, sp, ct, st) = (cos_phi, sin_phi, cos_theta, sin_theta);
    let row = |i: usize| -> [f64; 3] {
        let r = a[i];
        [
            r[0] * cp * st + r[1] * sp * st + r[2] * ct,
            r[1] * cp - r[0] * sp,
            r[0] * cp * ct + r[1] * sp * ct - r[2] * st,
        ]
    };
    let (f, g, h) = (row(0), row(1), row(2));
    let mut k = [0.0; 3];
    let mut l = [0.0; 3];
    for j in 0..3 {
        k[j] = f[j] * cp * st + g[j] * sp * st + h[j] * ct;
        l[j] = f[j] * cp + g[j] * sp;
    }
    SphericalRep { f, g, h, k, l }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shell {
    Inner,
    Outer,
}

/// Signed multiple of `x / |x|` giving the conormal `Σ_k a_{jk} n_k` on a
/// shell. Equals `(-1)^l (a + d)` at `R_l`, with `l = 1` inner and `l = 2` outer.
pub fn conormal_factor(spec: &CoefficientSpec, radii: (f64, f64), shell: Shell) -> Result<f64> {
    let abcd = match &spec.family {
        Family::RadialAbcd(b) => b,
        other => {
            return Err(Error::UnsupportedFamily(format!(
                "conormal reduction is only available for radial_abcd, not {}",
                other.name()
            )))
        }
    };
    let (r, sign) = match shell {
        Shell::Inner => (radii.0, -1.0),
        Shell::Outer => (radii.1, 1.0),
    };
    Ok(sign * abcd.trace(r))
}

/// Tensors of `A`, `B` and the vector of `C` sampled on a shell grid.
#[derive(Debug, Clone)]
pub struct CoefficientField {
    pub grid: ShellGrid,
    pub a: Array3<Tensor>,
    pub b: Array3<Tensor>,
    pub c: Array3<Vector>,
    /// `k₁(r)` read off the `(φ₀, θ₀)` node.
    pub k1: Vec<f64>,
}

impl CoefficientField {
    pub fn dimension(&self) -> Dimension {
        self.grid.dimension()
    }

    pub fn rep(&self, i: usize, m: usize, l: usize) -> SphericalRep {
        let ang = &self.grid.angular;
        spherical_rep(&self.a[[i, m, l]], ang.cos_phi()[m], ang.sin_phi()[m], ang.cos_theta()[l], ang.sin_theta()[l])
    }

    /// Largest `|k₁(r, φ, θ) - k₁(r, φ₀, θ₀)|` over the grid.
    pub fn k1_spread(&self) -> f64 {
        let (nr, np, nt) = self.grid.shape();
        let mut s: f64 = 0.0;
        for i in 0..nr {
            for m in 0..np {
                for l in 0..nt {
                    s = s.max((self.rep(i, m, l).k[0] - self.k1[i]).abs());
                }
            }
        }
        s
    }

    /// Largest `|a_{jk} - a_{kj}|` over the grid.
    pub fn asymmetry(&self) -> f64 {
        self.a.iter().fold(0.0, |acc, t| {
            let mut s: f64 = acc;
            for j in 0..3 {
                for k in 0..j {
                    s = s.max((t[j][k] - t[k][j]).abs());
                }
            }
            s
        })
    }
}

pub fn build_coefficients(spec: &CoefficientSpec, grid: &ShellGrid) -> Result<CoefficientField> {
    build_coefficients_with(spec, grid, Exec::default())
}

pub fn build_coefficients_with(spec: &CoefficientSpec, grid: &ShellGrid, exec: Exec) -> Result<CoefficientField> {
    spec.validate(grid)?;
    let shape = grid.shape();
    let (_, np, nt) = shape;
    let flat = exec.map(shape.0 * np * nt, |idx| {
        let (i, rest) = (idx / (np * nt), idx % (np * nt));
        let x = grid.point(i, rest / nt, rest % nt);
        (spec.a_tensor(x), spec.b_tensor(x), spec.c_vector(x))
    });
    let mut a = Vec::with_capacity(flat.len());
    let mut b = Vec::with_capacity(flat.len());
    let mut c = Vec::with_capacity(flat.len());
    for (ta, tb, vc) in flat {
        a.push(ta);
        b.push(tb);
        c.push(vc);
    }
    let a = Array3::from_shape_vec(shape, a).expect("shape");
    let b = Array3::from_shape_vec(shape, b).expect("shape");
    let c = Array3::from_shape_vec(shape, c).expect("shape");
    let mut field = CoefficientField { grid: grid.clone(), a, b, c, k1: Vec::new() };
    field.k1 = (0..shape.0).map(|i| field.rep(i, 0, 0).k[0]).collect();
    Ok(field)
}

/// Unit direction for polar angles, used by sampling helpers.
pub fn direction(phi: f64, theta: f64) -> Vector {
    [phi.cos() * theta.sin(), phi.sin() * theta.sin(), theta.cos()]
}

/// Random point of the shell `R₁ ≤ |x| ≤ R₂` (uniform in angle, not in volume).
pub fn sample_point(rng: &mut impl rand::Rng, dim: Dimension, r1: f64, r2: f64) -> Vector {
    let r = rng.random_range(r1..=r2);
    let phi = rng.random_range(0.0..2.0 * PI);
    let theta = match dim {
        Dimension::Two => 0.5 * PI,
        Dimension::Three => rng.random_range(0.0f64..=1.0).mul_add(-2.0, 1.0).acos(),
    };
    let d = direction(phi, theta);
    let d = if dim == Dimension::Two { [d[0], d[1], 0.0] } else { d };
    [r * d[0], r * d[1], r * d[2]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::AngularGrid;

    fn shell(dim: Dimension) -> ShellGrid {
        let r = RadialGrid::new(1.0, 2.0, 9).unwrap();
        let a = AngularGrid::new(dim, 8, 6).unwrap();
        ShellGrid::new(r, a)
    }

    #[test]
    fn profile_interpolation_is_exact_on_cubics() {
        let g = RadialGrid::new(1.0, 2.0, 11).unwrap();
        let p = Profile::from_fn(g, |r| r * r * r - 2.0 * r).unwrap();
        for r in [1.0, 1.03, 1.5, 1.77, 2.0] {
            assert!((p.eval(r) - (r * r * r - 2.0 * r)).abs() < 1e-12);
        }
    }

    #[test]
    fn isotropic_tensor() {
        let spec =
            CoefficientSpec::new(Dimension::Three, Family::RadialAbcd(RadialAbcd::isotropic(Radial::Constant(2.0))));
        let f = build_coefficients(&spec, &shell(Dimension::Three)).unwrap();
        for t in f.a.iter() {
            for j in 0..3 {
                for k in 0..3 {
                    let e = if j == k { 2.0 } else { 0.0 };
                    assert!((t[j][k] - e).abs() < 1e-14);
                }
            }
        }
        assert!(f.k1.iter().all(|v| (v - 2.0).abs() < 1e-14));
    }

    #[test]
    fn a_plus_d_projector() {
        let abcd = RadialAbcd {
            a: Radial::Constant(1.0),
            b: Radial::Constant(0.0),
            c: Spatial::Constant(0.0),
            d: Radial::Constant(1.0),
        };
        let x = [0.3, -1.1, 0.7];
        let r2 = x.iter().map(|v| v * v).sum::<f64>();
        let t = abcd.tensor(x);
        for j in 0..3 {
            for k in 0..3 {
                let e = if j == k { 1.0 } else { 0.0 } + x[j] * x[k] / r2;
                assert!((t[j][k] - e).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn monomial_values() {
        let t = PolynomialSeries::monomial(1, [1.0, 1.0, 1.0]);
        assert_eq!(t[0][0], 2.0);
        assert_eq!(t[0][1], -1.0);
        let x = [1.0, 1.0, 1.0];
        assert!(quad_form(&t, x).abs() < 1e-14);
        let xi = [1.0 / 2f64.sqrt(), -1.0 / 2f64.sqrt(), 0.0];
        assert!((quad_form(&t, xi) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn series_rejected_in_2d() {
        let spec = CoefficientSpec::new(
            Dimension::Two,
            Family::PolynomialSeries(PolynomialSeries { weights: vec![Spatial::Constant(1.0)] }),
        );
        assert!(matches!(build_coefficients(&spec, &shell(Dimension::Two)), Err(Error::UnsupportedFamily(_))));
    }

    #[test]
    fn admissibility_names_node() {
        let abcd = RadialAbcd {
            a: Radial::analytic(|r| 2.0 - r),
            b: Radial::Constant(0.0),
            c: Spatial::Constant(0.0),
            d: Radial::Constant(0.0),
        };
        let spec = CoefficientSpec::new(Dimension::Three, Family::RadialAbcd(abcd));
        match build_coefficients(&spec, &shell(Dimension::Three)) {
            Err(Error::Admissibility { node, .. }) => assert_eq!(node, 8),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unchecked_needs_flag() {
        let f: TensorFn = Arc::new(|_| [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        let mut spec = CoefficientSpec::new(Dimension::Three, Family::Unchecked(f));
        assert!(build_coefficients(&spec, &shell(Dimension::Three)).is_err());
        spec.allow_unchecked = true;
        assert!(build_coefficients(&spec, &shell(Dimension::Three)).is_ok());
    }

    #[test]
    fn spherical_rep_isotropic() {
        let a = [[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 2.0]];
        let (p, t) = (0.7f64, 1.1f64);
        let s = spherical_rep(&a, p.cos(), p.sin(), t.cos(), t.sin());
        assert!((s.f[0] - 2.0 * p.cos() * t.sin()).abs() < 1e-14);
        assert!((s.k[0] - 2.0).abs() < 1e-14);
        assert!(s.k[1].abs() < 1e-14 && s.k[2].abs() < 1e-14);

        let id = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]];
        let s = spherical_rep(&id, p.cos(), p.sin(), 0.0, 1.0);
        assert!((s.k[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn conormal_factors() {
        let mk = |a: f64, d: f64| {
            CoefficientSpec::new(
                Dimension::Three,
                Family::RadialAbcd(RadialAbcd {
                    a: Radial::Constant(a),
                    b: Radial::Constant(0.0),
                    c: Spatial::Constant(0.0),
                    d: Radial::Constant(d),
                }),
            )
        };
        assert_eq!(conormal_factor(&mk(2.0, 0.0), (1.0, 2.0), Shell::Outer).unwrap(), 2.0);
        assert_eq!(conormal_factor(&mk(1.0, 0.0), (1.0, 2.0), Shell::Inner).unwrap(), -1.0);
        // Direct oracle: a(x) n on the outer shell.
        let spec = mk(1.0, 1.0);
        let x = [0.6, 0.8, 1.2];
        let r = norm(x);
        let t = spec.a_tensor(x);
        let nu: Vec<f64> = (0..3).map(|j| (0..3).map(|k| t[j][k] * x[k] / r).sum()).collect();
        let fac = conormal_factor(&spec, (1.0, r), Shell::Outer).unwrap();
        for j in 0..3 {
            assert!((nu[j] - fac * x[j] / r).abs() < 1e-14);
        }
        let series = CoefficientSpec::new(
            Dimension::Three,
            Family::PolynomialSeries(PolynomialSeries { weights: vec![Spatial::Constant(1.0)] }),
        );
        assert!(matches!(conormal_factor(&series, (1.0, 2.0), Shell::Outer), Err(Error::UnsupportedFamily(_))));
    }

    #[test]
    fn asymmetry_hook_breaks_trace() {
        let mut spec = CoefficientSpec::laplacian(Dimension::Three);
        spec.asymmetry = 0.1;
        let f = build_coefficients(&spec, &shell(Dimension::Three)).unwrap();
        assert!(f.asymmetry() > 0.05);
        assert!(f.k1_spread() > 1e-3);
    }
}
