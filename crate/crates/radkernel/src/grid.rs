//! Grids, composite quadrature, cumulative integrals and finite differences.
//!
//! Radial and time grids are uniform and include both endpoints. The angular
//! grid uses equispaced `φ` nodes on `[0, 2π)` and Gauss–Legendre nodes in
//! `cos θ`, so `∫ sinθ dθ` is exact for polynomials in `cos θ`. In two
//! dimensions the angular grid has a single `θ = π/2` node with unit weight,
//! which lets every angular routine serve both dimensions.

use std::f64::consts::PI;

use ndarray::{Array2, Array3, ArrayView1, Axis};

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    Trapezoid,
    Simpson,
    Gauss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dimension {
    Two,
    Three,
}

impl Dimension {
    pub fn n(self) -> usize {
        match self {
            Dimension::Two => 2,
            Dimension::Three => 3,
        }
    }

    pub fn from_n(n: usize) -> Result<Self> {
        match n {
            2 => Ok(Dimension::Two),
            3 => Ok(Dimension::Three),
            _ => Err(Error::Config(format!("dimension must be 2 or 3, got {n}"))),
        }
    }

    /// Measure of the unit circle / sphere.
    pub fn solid_angle(self) -> f64 {
        match self {
            Dimension::Two => 2.0 * PI,
            Dimension::Three => 4.0 * PI,
        }
    }
}

/// Anything that carries quadrature weights for a sample vector.
pub trait Quadrature {
    fn len(&self) -> usize;
    fn weights(&self, rule: Rule) -> Result<Vec<f64>>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn integrate<Q: Quadrature + ?Sized>(samples: &[f64], grid: &Q, rule: Rule) -> Result<f64> {
    check_len(grid.len(), samples.len())?;
    let w = grid.weights(rule)?;
    Ok(dot(&w, samples))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// ---------------------------------------------------------------------------
// Uniform 1D kernels shared by the radial and time grids.

pub fn uniform_weights(n: usize, h: f64, rule: Rule) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::Config(format!("need at least 2 nodes, got {n}")));
    }
    match rule {
        Rule::Trapezoid => {
            let mut w = vec![h; n];
            w[0] = 0.5 * h;
            w[n - 1] = 0.5 * h;
            Ok(w)
        }
        Rule::Simpson => {
            if n % 2 == 0 {
                return Err(Error::Config(format!("Simpson's rule needs an odd node count, got {n}")));
            }
            let mut w = vec![0.0; n];
            for (i, wi) in w.iter_mut().enumerate() {
                *wi = if i == 0 || i == n - 1 {
                    h / 3.0
                } else if i % 2 == 1 {
                    4.0 * h / 3.0
                } else {
                    2.0 * h / 3.0
                };
            }
            Ok(w)
        }
        Rule::Gauss => Err(Error::Config("Gauss rule is only available on the angular grid".into())),
    }
}

/// Simpson for odd node counts, trapezoid otherwise.
pub fn default_rule(n: usize) -> Rule {
    if n % 2 == 1 {
        Rule::Simpson
    } else {
        Rule::Trapezoid
    }
}

pub fn cumulative_left_uniform(samples: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(samples.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in samples.windows(2) {
        acc += 0.5 * h * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

pub fn cumulative_right_uniform(samples: &[f64], h: f64) -> Vec<f64> {
    let n = samples.len();
    let mut out = vec![0.0; n];
    for i in (0..n.saturating_sub(1)).rev() {
        out[i] = out[i + 1] + 0.5 * h * (samples[i] + samples[i + 1]);
    }
    out
}

/// Trapezoid increments with the Euler–Maclaurin end correction
/// `-h²/12 (f'(x_{i+1}) - f'(x_i))` per interval; fourth order overall.
pub fn corrected_increments(samples: &[f64], h: f64) -> Vec<f64> {
    let d = derivative_uniform(samples, h);
    samples
        .windows(2)
        .zip(d.windows(2))
        .map(|(f, df)| 0.5 * h * (f[0] + f[1]) - h * h / 12.0 * (df[1] - df[0]))
        .collect()
}

/// Fourth-order cumulative integral from the left end.
pub fn cumulative_left_corrected(samples: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(samples.len());
    let mut acc = 0.0;
    out.push(0.0);
    for inc in corrected_increments(samples, h) {
        acc += inc;
        out.push(acc);
    }
    out
}

/// Fourth-order cumulative integral from the right end.
pub fn cumulative_right_corrected(samples: &[f64], h: f64) -> Vec<f64> {
    let inc = corrected_increments(samples, h);
    let n = samples.len();
    let mut out = vec![0.0; n];
    for i in (0..n.saturating_sub(1)).rev() {
        out[i] = out[i + 1] + inc[i];
    }
    out
}

/// Second-order first derivative: central inside, one-sided at the ends.
pub fn derivative_uniform(samples: &[f64], h: f64) -> Vec<f64> {
    let n = samples.len();
    assert!(n >= 3, "derivative needs at least 3 nodes");
    let f = samples;
    let mut d = vec![0.0; n];
    d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
    for i in 1..n - 1 {
        d[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
    }
    d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
    d
}

/// Second-order second derivative: central inside, four-point one-sided ends.
pub fn second_derivative_uniform(samples: &[f64], h: f64) -> Vec<f64> {
    let n = samples.len();
    assert!(n >= 4, "second derivative needs at least 4 nodes");
    let f = samples;
    let h2 = h * h;
    let mut d = vec![0.0; n];
    d[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h2;
    for i in 1..n - 1 {
        d[i] = (f[i + 1] - 2.0 * f[i] + f[i - 1]) / h2;
    }
    d[n - 1] = (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) / h2;
    d
}

fn uniform_nodes(a: f64, b: f64, n: usize) -> Vec<f64> {
    let h = (b - a) / (n - 1) as f64;
    let mut v: Vec<f64> = (0..n).map(|i| a + h * i as f64).collect();
    v[n - 1] = b;
    v
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    r_min: f64,
    r_max: f64,
    nodes: Vec<f64>,
    spacing: f64,
}

impl RadialGrid {
    pub fn new(r_min: f64, r_max: f64, n_nodes: usize) -> Result<Self> {
        if !(r_min > 0.0 && r_max > r_min && r_max.is_finite()) {
            return Err(Error::Config(format!("radial grid needs 0 < r_min < r_max, got [{r_min}, {r_max}]")));
        }
        if n_nodes < 3 {
            return Err(Error::Config(format!("radial grid needs at least 3 nodes, got {n_nodes}")));
        }
        Ok(Self {
            r_min,
            r_max,
            nodes: uniform_nodes(r_min, r_max, n_nodes),
            spacing: (r_max - r_min) / (n_nodes - 1) as f64,
        })
    }

    /// Grid with `n_cells` intervals, i.e. `n_cells + 1` nodes.
    pub fn with_cells(r_min: f64, r_max: f64, n_cells: usize) -> Result<Self> {
        Self::new(r_min, r_max, n_cells + 1)
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }
    pub fn r_max(&self) -> f64 {
        self.r_max
    }
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn spacing(&self) -> f64 {
        self.spacing
    }
    pub fn length(&self) -> f64 {
        self.r_max - self.r_min
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&r| f(r)).collect()
    }

    pub fn default_weights(&self) -> Vec<f64> {
        let n = self.n_nodes();
        uniform_weights(n, self.spacing, default_rule(n)).expect("valid grid")
    }

    /// Integral with the default rule.
    pub fn integral(&self, samples: &[f64]) -> f64 {
        debug_assert_eq!(samples.len(), self.n_nodes());
        dot(&self.default_weights(), samples)
    }
}

impl Quadrature for RadialGrid {
    fn len(&self) -> usize {
        self.nodes.len()
    }
    fn weights(&self, rule: Rule) -> Result<Vec<f64>> {
        uniform_weights(self.nodes.len(), self.spacing, rule)
    }
}

/// `F(r) = ∫_r^{r_max} samples`, reverse cumulative trapezoid.
pub fn cumulative_from_right(samples: &[f64], grid: &RadialGrid) -> Result<Vec<f64>> {
    check_len(grid.n_nodes(), samples.len())?;
    Ok(cumulative_right_uniform(samples, grid.spacing))
}

/// `F(r) = ∫_{r_min}^r samples`, cumulative trapezoid.
pub fn cumulative_from_left(samples: &[f64], grid: &RadialGrid) -> Result<Vec<f64>> {
    check_len(grid.n_nodes(), samples.len())?;
    Ok(cumulative_left_uniform(samples, grid.spacing))
}

pub fn derivative_r(samples: &[f64], grid: &RadialGrid) -> Result<Vec<f64>> {
    check_len(grid.n_nodes(), samples.len())?;
    Ok(derivative_uniform(samples, grid.spacing))
}

pub fn second_derivative_r(samples: &[f64], grid: &RadialGrid) -> Result<Vec<f64>> {
    check_len(grid.n_nodes(), samples.len())?;
    if samples.len() < 4 {
        return Err(Error::Config("second derivative needs 4 nodes".into()));
    }
    Ok(second_derivative_uniform(samples, grid.spacing))
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    t_max: f64,
    nodes: Vec<f64>,
    step: f64,
}

impl TimeGrid {
    pub fn new(t_max: f64, n_steps: usize) -> Result<Self> {
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(Error::Config(format!("T must be positive, got {t_max}")));
        }
        if n_steps < 2 {
            return Err(Error::Config(format!("time grid needs at least 2 steps, got {n_steps}")));
        }
        Ok(Self { t_max, nodes: uniform_nodes(0.0, t_max, n_steps + 1), step: t_max / n_steps as f64 })
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }
    pub fn n_steps(&self) -> usize {
        self.nodes.len() - 1
    }
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&t| f(t)).collect()
    }

    pub fn derivative(&self, samples: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n_nodes(), samples.len())?;
        Ok(derivative_uniform(samples, self.step))
    }

    pub fn second_derivative(&self, samples: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n_nodes(), samples.len())?;
        if samples.len() < 4 {
            return Err(Error::Data("second time derivative needs 4 nodes".into()));
        }
        Ok(second_derivative_uniform(samples, self.step))
    }
}

impl Quadrature for TimeGrid {
    fn len(&self) -> usize {
        self.nodes.len()
    }
    fn weights(&self, rule: Rule) -> Result<Vec<f64>> {
        uniform_weights(self.nodes.len(), self.step, rule)
    }
}

/// Trapezoid convolution `∫₀^{t_n} a(t_n - s) b(s) ds` for every node `t_n`.
pub fn convolve(a: &[f64], b: &[f64], dt: f64) -> Vec<f64> {
    let n = a.len().min(b.len());
    (0..n)
        .map(|i| {
            if i == 0 {
                return 0.0;
            }
            let mut s = 0.5 * (a[i] * b[0] + a[0] * b[i]);
            for j in 1..i {
                s += a[i - j] * b[j];
            }
            s * dt
        })
        .collect()
}

// ---------------------------------------------------------------------------

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`,
/// nodes in decreasing order.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d.is_finite() {
            dp = d;
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// `(P_n(z), P_n'(z))` by the three-term recurrence.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Weights `w_j` with `f'(x) ≈ Σ w_j f(x_j)` for the quadratic through three nodes.
/// Weights of `∫₀^π f dθ` on increasing nodes: each gap, plus `[0, θ₀]` and
/// `[θ_last, π]`, integrates the cubic through the four nearest nodes.
fn dtheta_weights(theta: &[f64]) -> Vec<f64> {
    let n = theta.len();
    let mut w = vec![0.0; n];
    if n < 4 {
        // Trapezoid with flat ends.
        let mut edges = vec![0.0];
        edges.extend(theta.windows(2).map(|p| 0.5 * (p[0] + p[1])));
        edges.push(PI);
        for l in 0..n {
            w[l] = edges[l + 1] - edges[l];
        }
        return w;
    }
    let g = 0.5 / 3f64.sqrt();
    let mut add = |a: f64, b: f64, s: usize| {
        let xs = [theta[s], theta[s + 1], theta[s + 2], theta[s + 3]];
        for x in [0.5 * (a + b) - g * (b - a), 0.5 * (a + b) + g * (b - a)] {
            for j in 0..4 {
                let mut p = 0.5 * (b - a);
                for k in 0..4 {
                    if k != j {
                        p *= (x - xs[k]) / (xs[j] - xs[k]);
                    }
                }
                w[s + j] += p;
            }
        }
    };
    add(0.0, theta[0], 0);
    for i in 0..n - 1 {
        add(theta[i], theta[i + 1], i.saturating_sub(1).min(n - 4));
    }
    add(theta[n - 1], PI, n - 4);
    w
}

fn lagrange3_derivative(xs: [f64; 3], x: f64) -> [f64; 3] {
    let mut w = [0.0; 3];
    for j in 0..3 {
        let mut s = 0.0;
        for m in 0..3 {
            if m == j {
                continue;
            }
            let mut p = 1.0 / (xs[j] - xs[m]);
            for k in 0..3 {
                if k != j && k != m {
                    p *= (x - xs[k]) / (xs[j] - xs[k]);
                }
            }
            s += p;
        }
        w[j] = s;
    }
    w
}

#[derive(Debug, Clone, PartialEq)]
pub struct AngularGrid {
    dimension: Dimension,
    phi: Vec<f64>,
    theta: Vec<f64>,
    /// Weights of `∫₀^π · sinθ dθ`.
    theta_weights: Vec<f64>,
    /// Weights of `∫₀^π · dθ` (piecewise cubic, used by the correction operators).
    dtheta_weights: Vec<f64>,
    /// Start index and weights of the three-point `D_θ` stencil at each node.
    theta_stencil: Vec<(usize, [f64; 3])>,
    /// Central stencils for scalar fields, reflecting across the poles:
    /// the point `(−θ, φ)` is `(θ, φ + π)`. Entries are `(θ index, φ shifted)`.
    scalar_stencil: Vec<([(usize, bool); 3], [f64; 3])>,
    sin_phi: Vec<f64>,
    cos_phi: Vec<f64>,
    sin_theta: Vec<f64>,
    cos_theta: Vec<f64>,
}

impl AngularGrid {
    pub fn new(dimension: Dimension, n_phi: usize, n_theta: usize) -> Result<Self> {
        match dimension {
            Dimension::Two => Self::new_2d(n_phi),
            Dimension::Three => Self::new_3d(n_phi, n_theta),
        }
    }

    pub fn new_2d(n_phi: usize) -> Result<Self> {
        Self::check_phi(n_phi)?;
        let phi = Self::phi_nodes(n_phi);
        Ok(Self {
            dimension: Dimension::Two,
            sin_phi: phi.iter().map(|p| p.sin()).collect(),
            cos_phi: phi.iter().map(|p| p.cos()).collect(),
            phi,
            theta: vec![0.5 * PI],
            theta_weights: vec![1.0],
            dtheta_weights: vec![1.0],
            theta_stencil: vec![(0, [0.0; 3])],
            scalar_stencil: vec![([(0, false); 3], [0.0; 3])],
            sin_theta: vec![1.0],
            cos_theta: vec![0.0],
        })
    }

    pub fn new_3d(n_phi: usize, n_theta: usize) -> Result<Self> {
        Self::check_phi(n_phi)?;
        if n_phi % 2 == 1 {
            return Err(Error::Config(format!("3D angular grid needs an even phi count, got {n_phi}")));
        }
        if n_theta < 3 {
            return Err(Error::Config(format!("3D angular grid needs at least 3 theta nodes, got {n_theta}")));
        }
        let phi = Self::phi_nodes(n_phi);
        let (x, w) = gauss_legendre(n_theta);
        // x is decreasing, so theta = acos(x) is increasing.
        let theta: Vec<f64> = x.iter().map(|c| c.acos()).collect();
        let sin_theta: Vec<f64> = x.iter().map(|c| (1.0 - c * c).sqrt()).collect();

        let n = n_theta;
        let dtw = dtheta_weights(&theta);

        let stencil = (0..n)
            .map(|l| {
                let s = l.saturating_sub(1).min(n - 3);
                let xs = [theta[s], theta[s + 1], theta[s + 2]];
                (s, lagrange3_derivative(xs, theta[l]))
            })
            .collect();

        let scalar_stencil = (0..n)
            .map(|l| {
                if l == 0 {
                    let xs = [-theta[0], theta[0], theta[1]];
                    ([(0, true), (0, false), (1, false)], lagrange3_derivative(xs, theta[0]))
                } else if l == n - 1 {
                    let xs = [theta[n - 2], theta[n - 1], 2.0 * PI - theta[n - 1]];
                    ([(n - 2, false), (n - 1, false), (n - 1, true)], lagrange3_derivative(xs, theta[n - 1]))
                } else {
                    let xs = [theta[l - 1], theta[l], theta[l + 1]];
                    ([(l - 1, false), (l, false), (l + 1, false)], lagrange3_derivative(xs, theta[l]))
                }
            })
            .collect();

        Ok(Self {
            dimension: Dimension::Three,
            sin_phi: phi.iter().map(|p| p.sin()).collect(),
            cos_phi: phi.iter().map(|p| p.cos()).collect(),
            phi,
            theta,
            theta_weights: w,
            dtheta_weights: dtw,
            theta_stencil: stencil,
            scalar_stencil,
            sin_theta,
            cos_theta: x,
        })
    }

    fn check_phi(n_phi: usize) -> Result<()> {
        if n_phi < 4 {
            return Err(Error::Config(format!("angular grid needs at least 4 phi nodes, got {n_phi}")));
        }
        Ok(())
    }

    fn phi_nodes(n: usize) -> Vec<f64> {
        (0..n).map(|m| 2.0 * PI * m as f64 / n as f64).collect()
    }

    pub fn dimension(&self) -> Dimension {
        self.dimension
    }
    pub fn n_phi(&self) -> usize {
        self.phi.len()
    }
    pub fn n_theta(&self) -> usize {
        self.theta.len()
    }
    pub fn len(&self) -> usize {
        self.phi.len() * self.theta.len()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn phi(&self) -> &[f64] {
        &self.phi
    }
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }
    pub fn theta_weights(&self) -> &[f64] {
        &self.theta_weights
    }
    pub fn dtheta_weights(&self) -> &[f64] {
        &self.dtheta_weights
    }
    pub fn sin_phi(&self) -> &[f64] {
        &self.sin_phi
    }
    pub fn cos_phi(&self) -> &[f64] {
        &self.cos_phi
    }
    pub fn sin_theta(&self) -> &[f64] {
        &self.sin_theta
    }
    pub fn cos_theta(&self) -> &[f64] {
        &self.cos_theta
    }
    pub fn phi_step(&self) -> f64 {
        2.0 * PI / self.phi.len() as f64
    }

    /// Quadrature weight of node `(m, l)` for the surface measure.
    pub fn surface_weight(&self, l: usize) -> f64 {
        self.phi_step() * self.theta_weights[l]
    }

    /// Quadrature weight of node `(m, l)` for `dφ dθ` (no `sin θ`).
    pub fn flat_weight(&self, l: usize) -> f64 {
        self.phi_step() * self.dtheta_weights[l]
    }

    /// Unit vector `x'` at node `(m, l)`.
    pub fn direction(&self, m: usize, l: usize) -> [f64; 3] {
        [self.cos_phi[m] * self.sin_theta[l], self.sin_phi[m] * self.sin_theta[l], self.cos_theta[l]]
    }

    /// `∫ sinθ dθ ∫ f dφ` (3D) or `∫ f dφ` (2D) of samples indexed `[phi][theta]`.
    pub fn integrate_surface(&self, samples: ndarray::ArrayView2<f64>) -> f64 {
        let mut s = 0.0;
        for (m, row) in samples.outer_iter().enumerate() {
            let _ = m;
            for (l, v) in row.iter().enumerate() {
                s += self.theta_weights[l] * v;
            }
        }
        s * self.phi_step()
    }

    /// `∫ dθ ∫ f dφ` of samples indexed `[phi][theta]`.
    pub fn integrate_flat(&self, samples: ndarray::ArrayView2<f64>) -> f64 {
        let mut s = 0.0;
        for row in samples.outer_iter() {
            for (l, v) in row.iter().enumerate() {
                s += self.dtheta_weights[l] * v;
            }
        }
        s * self.phi_step()
    }

    pub(crate) fn theta_stencil(&self, l: usize) -> (usize, [f64; 3]) {
        self.theta_stencil[l]
    }

    pub(crate) fn scalar_stencil(&self, l: usize) -> ([(usize, bool); 3], [f64; 3]) {
        self.scalar_stencil[l]
    }

    pub fn has_theta(&self) -> bool {
        self.dimension == Dimension::Three
    }
}

impl Quadrature for AngularGrid {
    /// Quadrature over `θ` only.
    fn len(&self) -> usize {
        self.theta.len()
    }
    fn weights(&self, rule: Rule) -> Result<Vec<f64>> {
        match rule {
            Rule::Gauss => Ok(self.theta_weights.clone()),
            _ => Err(Error::Config("the angular grid only supports the Gauss rule".into())),
        }
    }
}

// ---------------------------------------------------------------------------

/// Radial grid times angular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellGrid {
    pub radial: RadialGrid,
    pub angular: AngularGrid,
}

impl ShellGrid {
    pub fn new(radial: RadialGrid, angular: AngularGrid) -> Self {
        Self { radial, angular }
    }

    pub fn dimension(&self) -> Dimension {
        self.angular.dimension()
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.radial.n_nodes(), self.angular.n_phi(), self.angular.n_theta())
    }

    /// Cartesian point of node `(i, m, l)`, embedded in 3D (`x₃ = 0` in 2D).
    pub fn point(&self, i: usize, m: usize, l: usize) -> [f64; 3] {
        let r = self.radial.nodes()[i];
        let d = self.angular.direction(m, l);
        [r * d[0], r * d[1], r * d[2]]
    }

    /// Volume of the shell region.
    pub fn measure(&self) -> f64 {
        let (a, b) = (self.radial.r_min(), self.radial.r_max());
        match self.dimension() {
            Dimension::Two => PI * (b * b - a * a),
            Dimension::Three => 4.0 * PI * (b.powi(3) - a.powi(3)) / 3.0,
        }
    }
}

/// Samples `v(r_i, φ_m, θ_l)` on a [`ShellGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct AngularField {
    pub values: Array3<f64>,
}

impl AngularField {
    pub fn zeros(grid: &ShellGrid) -> Self {
        Self { values: Array3::zeros(grid.shape()) }
    }

    /// Samples `f(r, φ, θ)` at every node.
    pub fn from_spherical(grid: &ShellGrid, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let (nr, np, nt) = grid.shape();
        let r = grid.radial.nodes();
        let a = &grid.angular;
        let values = Array3::from_shape_fn((nr, np, nt), |(i, m, l)| f(r[i], a.phi[m], a.theta[l]));
        Self { values }
    }

    /// Samples `f(x)` at every node, `x` the embedded Cartesian point.
    pub fn from_cartesian(grid: &ShellGrid, f: impl Fn([f64; 3]) -> f64) -> Self {
        let values = Array3::from_shape_fn(grid.shape(), |(i, m, l)| f(grid.point(i, m, l)));
        Self { values }
    }

    /// Radial profile `p(r_i)` broadcast over the angles.
    pub fn from_radial(grid: &ShellGrid, profile: &[f64]) -> Self {
        let values = Array3::from_shape_fn(grid.shape(), |(i, _, _)| profile[i]);
        Self { values }
    }

    pub fn check_shape(&self, grid: &ShellGrid) -> Result<()> {
        let (nr, np, nt) = grid.shape();
        let s = self.values.dim();
        if s != (nr, np, nt) {
            return Err(Error::shape(nr * np * nt, s.0 * s.1 * s.2));
        }
        Ok(())
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { values: self.values.mapv(f) }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = self.values.clone();
        values.zip_mut_with(&other.values, |a, &b| *a = f(*a, b));
        Self { values }
    }

    /// Pointwise product with a radial profile.
    pub fn scale_radial(&self, profile: &[f64]) -> Self {
        let mut values = self.values.clone();
        for (i, mut slab) in values.axis_iter_mut(Axis(0)).enumerate() {
            slab.mapv_inplace(|v| v * profile[i]);
        }
        Self { values }
    }

    pub fn d_r(&self, grid: &ShellGrid) -> Self {
        let h = grid.radial.spacing();
        let mut out = Array3::zeros(self.values.dim());
        for m in 0..self.values.dim().1 {
            for l in 0..self.values.dim().2 {
                let col: Vec<f64> = self.values.slice(ndarray::s![.., m, l]).to_vec();
                let d = derivative_uniform(&col, h);
                for (i, v) in d.into_iter().enumerate() {
                    out[[i, m, l]] = v;
                }
            }
        }
        Self { values: out }
    }

    pub fn d_phi(&self, grid: &ShellGrid) -> Self {
        let (nr, np, nt) = self.values.dim();
        let inv = 1.0 / (2.0 * grid.angular.phi_step());
        let v = &self.values;
        let values = Array3::from_shape_fn((nr, np, nt), |(i, m, l)| {
            (v[[i, (m + 1) % np, l]] - v[[i, (m + np - 1) % np, l]]) * inv
        });
        Self { values }
    }

    /// `D_θ` of a scalar function of position, central at every node by
    /// reflecting across the poles. Zero in 2D.
    pub fn d_theta_scalar(&self, grid: &ShellGrid) -> Self {
        if !grid.angular.has_theta() {
            return Self { values: Array3::zeros(self.values.dim()) };
        }
        let v = &self.values;
        let np = v.dim().1;
        let values = Array3::from_shape_fn(v.dim(), |(i, m, l)| {
            let (idx, w) = grid.angular.scalar_stencil(l);
            let mut s = 0.0;
            for ((ll, shifted), wk) in idx.iter().zip(w) {
                let mm = if *shifted { (m + np / 2) % np } else { m };
                s += wk * v[[i, mm, *ll]];
            }
            s
        });
        Self { values }
    }

    /// `D_θ` of a function of the chart `(r, φ, θ)` by three-point Lagrange
    /// stencils, one-sided at the end nodes. Zero in 2D.
    pub fn d_theta(&self, grid: &ShellGrid) -> Self {
        if !grid.angular.has_theta() {
            return Self { values: Array3::zeros(self.values.dim()) };
        }
        let v = &self.values;
        let values = Array3::from_shape_fn(v.dim(), |(i, m, l)| {
            let (s, w) = grid.angular.theta_stencil(l);
            w[0] * v[[i, m, s]] + w[1] * v[[i, m, s + 1]] + w[2] * v[[i, m, s + 2]]
        });
        Self { values }
    }
}

/// Samples `v(t_k, r_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    pub radial: RadialGrid,
    pub time: TimeGrid,
    pub values: Array2<f64>,
}

impl SpaceTimeField {
    pub fn zeros(radial: &RadialGrid, time: &TimeGrid) -> Self {
        Self { values: Array2::zeros((time.n_nodes(), radial.n_nodes())), radial: radial.clone(), time: time.clone() }
    }

    pub fn from_fn(radial: &RadialGrid, time: &TimeGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let (t, r) = (time.nodes(), radial.nodes());
        Self {
            values: Array2::from_shape_fn((t.len(), r.len()), |(k, i)| f(t[k], r[i])),
            radial: radial.clone(),
            time: time.clone(),
        }
    }

    pub fn from_values(radial: &RadialGrid, time: &TimeGrid, values: Array2<f64>) -> Result<Self> {
        let expected = (time.n_nodes(), radial.n_nodes());
        if values.dim() != expected {
            return Err(Error::shape(expected.0 * expected.1, values.dim().0 * values.dim().1));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("field contains non-finite entries".into()));
        }
        Ok(Self { radial: radial.clone(), time: time.clone(), values })
    }

    pub fn row(&self, k: usize) -> ArrayView1<'_, f64> {
        self.values.row(k)
    }

    pub fn row_vec(&self, k: usize) -> Vec<f64> {
        self.values.row(k).to_vec()
    }

    pub fn column_vec(&self, i: usize) -> Vec<f64> {
        self.values.column(i).to_vec()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Maximum absolute difference to another field on the same grids.
    pub fn max_diff(&self, other: &Self) -> f64 {
        self.values.iter().zip(other.values.iter()).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// `D_r` applied to every time slice.
    pub fn d_r(&self) -> Self {
        let mut out = self.clone();
        for (k, mut row) in out.values.outer_iter_mut().enumerate() {
            let d = derivative_uniform(&self.row_vec(k), self.radial.spacing());
            row.assign(&ArrayView1::from(&d));
        }
        out
    }

    /// `D_t` applied at every radius.
    pub fn d_t(&self) -> Self {
        let mut out = self.clone();
        for i in 0..self.radial.n_nodes() {
            let d = derivative_uniform(&self.column_vec(i), self.time.step());
            out.values.column_mut(i).assign(&ArrayView1::from(&d));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn integrate_constant_and_cubic() {
        let g = RadialGrid::new(1.0, 2.0, 11).unwrap();
        let one = vec![1.0; 11];
        assert!(close(integrate(&one, &g, Rule::Trapezoid).unwrap(), 1.0, 1e-15));
        assert!(close(integrate(&one, &g, Rule::Simpson).unwrap(), 1.0, 1e-15));
        let r2 = g.sample(|r| r * r);
        assert!(close(integrate(&r2, &g, Rule::Simpson).unwrap(), 7.0 / 3.0, 1e-14));
        let r3 = g.sample(|r| r * r * r);
        assert!(close(integrate(&r3, &g, Rule::Simpson).unwrap(), 15.0 / 4.0, 1e-14));
    }

    #[test]
    fn integrate_errors() {
        let g = RadialGrid::new(1.0, 2.0, 10).unwrap();
        assert!(matches!(integrate(&vec![1.0; 10], &g, Rule::Simpson), Err(Error::Config(_))));
        assert!(matches!(integrate(&vec![1.0; 9], &g, Rule::Trapezoid), Err(Error::Shape { .. })));
    }

    #[test]
    fn gauss_in_cos_theta() {
        let a = AngularGrid::new_3d(8, 6).unwrap();
        let s: Vec<f64> = vec![1.0; 6];
        assert!(close(integrate(&s, &a, Rule::Gauss).unwrap(), 2.0, 1e-14));
        // Exact for cos^k θ sinθ, k <= 2n-1.
        for k in 0..12 {
            let f: Vec<f64> = a.cos_theta().iter().map(|c| c.powi(k)).collect();
            let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
            assert!(close(integrate(&f, &a, Rule::Gauss).unwrap(), exact, 1e-13), "k={k}");
        }
        let th = a.theta();
        assert!(th.windows(2).all(|w| w[0] < w[1]));
        assert!(th[0] > 0.0 && th[5] < PI);
    }

    #[test]
    fn flat_theta_rule_is_second_order() {
        let err = |n: usize| {
            let a = AngularGrid::new_3d(4, n).unwrap();
            let s: f64 = a.theta().iter().zip(a.dtheta_weights()).map(|(t, w)| w * (t.cos() + 2.0).exp()).sum();
            // ∫₀^π e^{2+cosθ} dθ = π e² I₀(1)
            let i0 = 1.266_065_877_752_008_4;
            (s - PI * 2f64.exp() * i0).abs()
        };
        let ratio = err(16) / err(32);
        assert!(ratio >= 3.0, "ratio {ratio}");
    }

    #[test]
    fn cumulative_examples() {
        let g = RadialGrid::new(1.0, 2.0, 11).unwrap();
        let one = vec![1.0; 11];
        let right = cumulative_from_right(&one, &g).unwrap();
        let left = cumulative_from_left(&one, &g).unwrap();
        for (i, r) in g.nodes().iter().enumerate() {
            assert!(close(right[i], 2.0 - r, 1e-14));
            assert!(close(left[i], r - 1.0, 1e-14));
        }
        assert_eq!(right[10], 0.0);
        let zero = cumulative_from_left(&vec![0.0; 11], &g).unwrap();
        assert!(zero.iter().all(|v| *v == 0.0));

        let q = g.sample(|r| 2.0 * r);
        let right = cumulative_from_right(&q, &g).unwrap();
        for (i, r) in g.nodes().iter().enumerate() {
            assert!(close(right[i], 4.0 - r * r, 1e-14));
        }
    }

    #[test]
    fn cumulative_additivity() {
        let g = RadialGrid::new(1.0, 2.0, 41).unwrap();
        let q = g.sample(|r| (3.0 * r).sin() + r);
        let l = cumulative_from_left(&q, &g).unwrap();
        let rr = cumulative_from_right(&q, &g).unwrap();
        let total = integrate(&q, &g, Rule::Trapezoid).unwrap();
        for i in 0..41 {
            assert!(close(l[i] + rr[i], total, 1e-13));
        }
    }

    #[test]
    fn cumulative_matches_fine_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let (a, b, c) = (rng.random_range(0.5..2.0), rng.random_range(1.0..4.0), rng.random_range(0.0..3.0));
            let f = move |r: f64| a * (b * r + c).sin() + r * r;
            let g = RadialGrid::new(1.0, 2.0, 21).unwrap();
            let coarse = cumulative_from_right(&g.sample(f), &g).unwrap();
            let fine_g = RadialGrid::new(1.0, 2.0, 201).unwrap();
            let fine = cumulative_from_right(&fine_g.sample(f), &fine_g).unwrap();
            let h = g.spacing();
            for i in 0..21 {
                let e = (coarse[i] - fine[i * 10]).abs();
                assert!(e <= 2.0 * (a * b * b + 2.0) * h * h, "node {i}: {e}");
            }
        }
    }

    #[test]
    fn corrected_cumulative_is_fourth_order() {
        let f = |r: f64| (2.0 * r).exp();
        let exact = |r: f64| 0.5 * ((2.0 * r).exp() - 2f64.exp());
        let err = |n: usize| {
            let g = RadialGrid::with_cells(1.0, 2.0, n).unwrap();
            let c = cumulative_left_corrected(&g.sample(f), g.spacing());
            g.nodes().iter().zip(&c).fold(0.0f64, |m, (r, v)| m.max((v - exact(*r)).abs()))
        };
        let ratio = err(32) / err(64);
        assert!(ratio > 12.0, "ratio {ratio}");
    }

    #[test]
    fn derivative_examples() {
        let g = RadialGrid::new(1.0, 2.0, 11).unwrap();
        let d = derivative_r(&g.sample(|r| r * r), &g).unwrap();
        for (i, r) in g.nodes().iter().enumerate() {
            assert!(close(d[i], 2.0 * r, 1e-12));
        }
        let d = derivative_r(&vec![3.0; 11], &g).unwrap();
        assert!(d.iter().all(|v| v.abs() < 1e-13));

        let g = RadialGrid::new(1.0, 2.0, 101).unwrap();
        let d = derivative_r(&g.sample(f64::sin), &g).unwrap();
        let err = g.nodes().iter().zip(&d).fold(0.0f64, |m, (r, v)| m.max((v - r.cos()).abs()));
        assert!(err <= 1e-4, "{err}");

        let small = RadialGrid::new(1.0, 2.0, 3).unwrap();
        assert!(derivative_r(&[1.0, 2.0], &small).is_err());
    }

    #[test]
    fn quadrature_convergence_ratios() {
        for f in [f64::sin as fn(f64) -> f64, f64::exp] {
            let exact = if f(0.0) == 0.0 { 1f64.cos() - 2f64.cos() } else { 2f64.exp() - 1f64.exp() };
            let err = |n: usize, rule| {
                let g = RadialGrid::with_cells(1.0, 2.0, n).unwrap();
                (integrate(&g.sample(f), &g, rule).unwrap() - exact).abs()
            };
            let t = err(16, Rule::Trapezoid) / err(32, Rule::Trapezoid);
            let s = err(16, Rule::Simpson) / err(32, Rule::Simpson);
            assert!((3.0..=5.0).contains(&t), "trapezoid ratio {t}");
            assert!((12.0..=20.0).contains(&s), "simpson ratio {s}");
        }
    }

    #[test]
    fn derivative_inverts_cumulative() {
        let err = |n: usize| {
            let g = RadialGrid::with_cells(1.0, 2.0, n).unwrap();
            let q = g.sample(|r| (2.0 * r).cos());
            let e = cumulative_from_right(&q, &g).unwrap();
            let d = derivative_r(&e, &g).unwrap();
            d.iter().zip(&q).fold(0.0f64, |m, (a, b)| m.max((a + b).abs()))
        };
        let ratio = err(32) / err(64);
        assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn convolution_trapezoid() {
        let t = TimeGrid::new(1.0, 40).unwrap();
        let a = t.sample(|_| 1.0);
        let b = t.sample(|s| s);
        let c = convolve(&a, &b, t.step());
        for (k, tk) in t.nodes().iter().enumerate() {
            assert!(close(c[k], 0.5 * tk * tk, 1e-14));
        }
    }

    #[test]
    fn angular_derivatives() {
        let r = RadialGrid::new(1.0, 2.0, 5).unwrap();
        let a = AngularGrid::new_3d(32, 16).unwrap();
        let g = ShellGrid::new(r, a);
        let f = AngularField::from_spherical(&g, |r, p, t| r * p.sin() * t.cos());
        let dp = f.d_phi(&g);
        let dt = f.d_theta(&g);
        let mut ep: f64 = 0.0;
        let mut et: f64 = 0.0;
        for ((i, m, l), v) in dp.values.indexed_iter() {
            let (rr, p, t) = (g.radial.nodes()[i], g.angular.phi()[m], g.angular.theta()[l]);
            ep = ep.max((v - rr * p.cos() * t.cos()).abs());
            et = et.max((dt.values[[i, m, l]] + rr * p.sin() * t.sin()).abs());
        }
        assert!(ep < 2e-2 && et < 2e-2, "{ep} {et}");
    }
}
