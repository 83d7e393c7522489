//! Wigner and s-ordered quasiprobabilities on phase-space grids, the
//! negativity volume and area, and the nonclassical depth.
//!
//! Quasiprobabilities are evaluated directly in the Fock basis,
//! `W_s(alpha) = 2 / (pi (1 - s)) tr[rho D(alpha) q^n D^dag(alpha)]` with
//! `q = (s + 1) / (s - 1)`, through a two-index recurrence for the matrix
//! elements of `D(alpha) q^n D^dag(alpha)`.

use rayon::prelude::*;
use serde_json::json;

use crate::coherent_op::CoherentOpParams;
use crate::error::{Error, Result};
use crate::fock::{check_tail, displacement_op, tail_window, FockDensity, FockState};
use crate::linalg::CMatrix;
use crate::optim::nelder_mead_2d;
use crate::scalar::{c, cr, Real, C};

/// Grid spacing used by [`PhaseGrid::default_for`].
pub const DEFAULT_SPACING: f64 = 0.05;
/// Half-width added around the state's centre by [`PhaseGrid::default_for`].
pub const DEFAULT_MARGIN: f64 = 5.0;
/// Largest grid spacing accepted for negativity integrals.
pub const MAX_NEGATIVITY_SPACING: f64 = 0.1;
/// Largest `|W|` tolerated on the grid boundary.
pub const BOUNDARY_LEAK_TOL: f64 = 1e-8;
/// Accepted change of `V_N` under one grid refinement.
pub const REFINE_TOL: f64 = 1e-4;
/// Sampled `|W|` at or below this counts as zero (`|W| <= 2/pi` always).
pub const WIGNER_NOISE_FLOOR: f64 = 1e-12;

/// `w`, or zero if it is within rounding noise of zero.
pub fn snap_noise<T: Real>(w: T) -> T {
    if w.abs() <= T::tol(WIGNER_NOISE_FLOOR) {
        T::zero()
    } else {
        w
    }
}

/// Rectangular grid over `alpha = x + iy`, nodes on both boundaries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseGrid<T> {
    pub x_min: T,
    pub x_max: T,
    pub y_min: T,
    pub y_max: T,
    pub nx: usize,
    pub ny: usize,
}

impl<T: Real> PhaseGrid<T> {
    pub fn new(x_min: T, x_max: T, y_min: T, y_max: T, nx: usize, ny: usize) -> Result<Self> {
        let finite = [x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite());
        if !finite || x_min >= x_max || y_min >= y_max {
            return Err(Error::InvalidParameter(format!(
                "grid bounds must be finite and ordered: x [{x_min}, {x_max}], y [{y_min}, {y_max}]"
            )));
        }
        if nx < 16 || ny < 16 {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 16 nodes per axis, got {nx} x {ny}"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            y_min,
            y_max,
            nx,
            ny,
        })
    }

    /// Square grid `[-L, L]^2` with `L >= |center| + margin` rounded up to a
    /// whole number of steps, so the origin is always a node.
    pub fn around(center: C<T>, margin: T, spacing: T) -> Result<Self> {
        if !(spacing > T::zero()) || !spacing.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "grid spacing must be positive, got {spacing}"
            )));
        }
        let half_steps = ((center.norm() + margin) / spacing).ceil();
        let half_steps = half_steps.to_usize().unwrap_or(0).max(8);
        let l = spacing * T::lit(half_steps as f64);
        let n = 2 * half_steps + 1;
        Self::new(-l, l, -l, l, n, n)
    }

    /// Bounds `+-(|center| + 5)`, spacing 0.05.
    pub fn default_for(center: C<T>) -> Result<Self> {
        Self::around(center, T::lit(DEFAULT_MARGIN), T::lit(DEFAULT_SPACING))
    }

    /// Same bounds, spacing halved.
    pub fn refined(&self) -> Self {
        Self {
            nx: 2 * (self.nx - 1) + 1,
            ny: 2 * (self.ny - 1) + 1,
            ..*self
        }
    }

    pub fn dx(&self) -> T {
        (self.x_max - self.x_min) / T::lit((self.nx - 1) as f64)
    }

    pub fn dy(&self) -> T {
        (self.y_max - self.y_min) / T::lit((self.ny - 1) as f64)
    }

    pub fn x(&self, ix: usize) -> T {
        self.x_min + self.dx() * T::lit(ix as f64)
    }

    pub fn y(&self, iy: usize) -> T {
        self.y_min + self.dy() * T::lit(iy as f64)
    }

    pub fn point(&self, ix: usize, iy: usize) -> C<T> {
        c(self.x(ix), self.y(iy))
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major node list (rows of constant `y`).
    pub fn points(&self) -> Vec<C<T>> {
        (0..self.ny)
            .flat_map(|iy| (0..self.nx).map(move |ix| (ix, iy)))
            .map(|(ix, iy)| self.point(ix, iy))
            .collect()
    }
}

/// Quasiprobability samples on a grid, row-major (`values[iy * nx + ix]`).
#[derive(Debug, Clone)]
pub struct WignerField<T> {
    pub grid: PhaseGrid<T>,
    pub values: Vec<T>,
}

impl<T: Real> WignerField<T> {
    pub fn at(&self, ix: usize, iy: usize) -> T {
        self.values[iy * self.grid.nx + ix]
    }

    pub fn min(&self) -> (T, C<T>) {
        let (k, v) = self
            .values
            .iter()
            .enumerate()
            .fold(
                (0, T::infinity()),
                |(bk, bv), (k, v)| if *v < bv { (k, *v) } else { (bk, bv) },
            );
        (v, self.grid.point(k % self.grid.nx, k / self.grid.nx))
    }

    /// Trapezoid-rule integral over the grid.
    pub fn integral(&self) -> T {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let mut acc = T::zero();
        for iy in 0..ny {
            let wy = if iy == 0 || iy == ny - 1 {
                T::lit(0.5)
            } else {
                T::one()
            };
            for ix in 0..nx {
                let wx = if ix == 0 || ix == nx - 1 {
                    T::lit(0.5)
                } else {
                    T::one()
                };
                acc += wx * wy * self.at(ix, iy);
            }
        }
        acc * self.grid.dx() * self.grid.dy()
    }

    /// Largest `|W|` over the boundary nodes.
    pub fn boundary_max(&self) -> T {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let mut m = T::zero();
        for ix in 0..nx {
            m = m.max(self.at(ix, 0).abs()).max(self.at(ix, ny - 1).abs());
        }
        for iy in 0..ny {
            m = m.max(self.at(0, iy).abs()).max(self.at(nx - 1, iy).abs());
        }
        m
    }

    /// CSV with header `x,y,w`, one node per row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,w\n");
        for iy in 0..self.grid.ny {
            for ix in 0..self.grid.nx {
                out.push_str(&format!(
                    "{:.11e},{:.11e},{:.11e}\n",
                    self.grid.x(ix).to_f64_lossy(),
                    self.grid.y(iy).to_f64_lossy(),
                    self.at(ix, iy).to_f64_lossy()
                ));
            }
        }
        out
    }
}

/// Negativity of a sampled quasiprobability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegativityReport<T> {
    /// `V_N = (int |W| - 1) / 2`.
    pub volume: T,
    /// Area of the region `W < 0`.
    pub area: T,
    pub min_value: T,
    pub min_location: C<T>,
    /// Centroid of the negative region, if there is one.
    pub centroid: Option<C<T>>,
}

impl<T: Real> NegativityReport<T> {
    pub fn to_json(&self) -> String {
        let centroid = self
            .centroid
            .map(|z| json!([z.re.to_f64_lossy(), z.im.to_f64_lossy()]));
        json!({
            "volume": self.volume.to_f64_lossy(),
            "area": self.area.to_f64_lossy(),
            "min_value": self.min_value.to_f64_lossy(),
            "min_location": [self.min_location.re.to_f64_lossy(), self.min_location.im.to_f64_lossy()],
            "centroid": centroid,
        })
        .to_string()
    }
}

/// How a depth value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepthMethod {
    AnalyticOrthogonality,
    AnalyticThermal,
    NumericBisection,
}

impl DepthMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            DepthMethod::AnalyticOrthogonality => "analytic-orthogonality",
            DepthMethod::AnalyticThermal => "analytic-thermal",
            DepthMethod::NumericBisection => "numeric-bisection",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthReport<T> {
    pub tau: T,
    pub method: DepthMethod,
    /// Coherent amplitude with `<beta|rho|beta> = 0`, when one was found.
    pub witness_beta: Option<C<T>>,
}

impl<T: Real> DepthReport<T> {
    pub fn to_json(&self) -> String {
        let witness = self
            .witness_beta
            .map(|z| json!([z.re.to_f64_lossy(), z.im.to_f64_lossy()]));
        json!({
            "tau": self.tau.to_f64_lossy(),
            "method": self.method.as_str(),
            "witness_beta": witness,
        })
        .to_string()
    }
}

/// Density restricted to its effective support, with the ordering
/// parameter's recurrence constants.
struct Kernel<T> {
    rho: Vec<C<T>>,
    dim: usize,
    s: T,
}

impl<T: Real> Kernel<T> {
    fn new(rho: &FockDensity<T>, s: T) -> Result<Self> {
        if !(s >= -T::one()) || s >= T::one() {
            return Err(Error::InvalidParameter(format!(
                "ordering parameter must lie in [-1, 1), got {s}"
            )));
        }
        let dim = effective_support(rho);
        let m = rho.matrix();
        let mut flat = Vec::with_capacity(dim * dim);
        // stored transposed so the contraction walks both arrays in order
        for n in 0..dim {
            for k in 0..dim {
                flat.push(m[(k, n)]);
            }
        }
        Ok(Self { rho: flat, dim, s })
    }

    /// `(full, partial)` sums, the partial one leaving out the top indices.
    fn eval_parts(&self, alpha: C<T>) -> (T, T) {
        let n = self.dim;
        let s = self.s;
        let q = (s + T::one()) / (s - T::one());
        let lam = T::one() - q;
        let u = alpha * cr(lam);
        let v = alpha.conj() * cr(lam);
        let w = tail_window(n).min(n);
        let cut = n - w;
        let mut row = vec![C::new(T::zero(), T::zero()); n];
        row[0] = cr((-lam * alpha.norm_sqr()).exp());
        for k in 1..n {
            row[k] = v * row[k - 1] / cr(T::lit(k as f64).sqrt());
        }
        let sqrt: Vec<T> = (0..=n).map(|k| T::lit(k as f64).sqrt()).collect();
        let mut full = C::new(T::zero(), T::zero());
        let mut partial = full;
        let mut next = vec![C::new(T::zero(), T::zero()); n];
        for m in 0..n {
            let rho_row = &self.rho[m * n..(m + 1) * n];
            let mut acc = C::new(T::zero(), T::zero());
            let mut acc_cut = acc;
            for k in 0..n {
                let term = row[k] * rho_row[k];
                acc += term;
                if k < cut {
                    acc_cut += term;
                }
            }
            full += acc;
            if m < cut {
                partial += acc_cut;
            }
            if m + 1 < n {
                let inv = T::one() / sqrt[m + 1];
                next[0] = u * row[0] * cr(inv);
                for k in 1..n {
                    next[k] = (u * row[k] + row[k - 1] * cr(q * sqrt[k])) * cr(inv);
                }
                std::mem::swap(&mut row, &mut next);
            }
        }
        let pre = T::lit(2.0) / (T::PI() * (T::one() - s));
        (full.re * pre, partial.re * pre)
    }

    fn eval(&self, alpha: C<T>) -> Result<T> {
        let (full, partial) = self.eval_parts(alpha);
        if !full.is_finite() {
            return Err(Error::Divergence {
                s_order: self.s.to_f64_lossy(),
            });
        }
        // for s > 0 the top of the support can dominate: the series has not converged
        if self.s > T::zero() && self.dim > 1 {
            let scale = T::lit(2.0) / (T::PI() * (T::one() - self.s));
            if (full - partial).abs() > T::lit(1e-9) * scale + T::lit(1e-6) * full.abs() {
                return Err(Error::Divergence {
                    s_order: self.s.to_f64_lossy(),
                });
            }
        }
        Ok(full)
    }
}

/// Number of leading basis states that carry population above `1e-32`
/// relative to the largest one.
fn effective_support<T: Real>(rho: &FockDensity<T>) -> usize {
    let pops = rho.populations();
    let max = pops.iter().copied().fold(T::zero(), T::max);
    let floor = max * T::lit(1e-32);
    let last = pops.iter().rposition(|p| *p > floor).unwrap_or(0);
    last + 1
}

fn require_unit_trace<T: Real>(rho: &FockDensity<T>) -> Result<()> {
    let tr = rho.trace();
    if (tr - T::one()).abs() > T::tol(1e-9) {
        return Err(Error::NotNormalized {
            norm_sq: tr.to_f64_lossy(),
        });
    }
    Ok(())
}

/// `W_s(alpha)` at a single point; `s = 0` is Wigner, `s = -1` Husimi.
pub fn quasiprob_value<T: Real>(rho: &FockDensity<T>, alpha: C<T>, s_order: T) -> Result<T> {
    Kernel::new(rho, s_order)?.eval(alpha)
}

/// `W_s` on a grid for any (possibly unnormalized) operator; linear in `rho`.
pub fn quasiprob_field_of_operator<T: Real>(
    rho: &FockDensity<T>,
    grid: &PhaseGrid<T>,
    s_order: T,
) -> Result<WignerField<T>> {
    let kernel = Kernel::new(rho, s_order)?;
    let values = grid
        .points()
        .par_iter()
        .map(|z| kernel.eval(*z))
        .collect::<Result<Vec<T>>>()?;
    Ok(WignerField {
        grid: *grid,
        values,
    })
}

/// Wigner function of a normalized density on a grid.
pub fn wigner<T: Real>(rho: &FockDensity<T>, grid: &PhaseGrid<T>) -> Result<WignerField<T>> {
    require_unit_trace(rho)?;
    quasiprob_field_of_operator(rho, grid, T::zero())
}

/// s-ordered quasiprobability of a normalized density,
/// `s_order = 1 - 2 tau` for the smoothed function `R(z, tau)`.
pub fn s_ordered_quasiprob<T: Real>(
    rho: &FockDensity<T>,
    grid: &PhaseGrid<T>,
    s_order: T,
) -> Result<WignerField<T>> {
    require_unit_trace(rho)?;
    if s_order > T::one() {
        return Err(Error::InvalidParameter(format!(
            "ordering parameter {s_order} above 1"
        )));
    }
    if s_order >= T::one() {
        return Err(Error::Divergence {
            s_order: s_order.to_f64_lossy(),
        });
    }
    quasiprob_field_of_operator(rho, grid, s_order)
}

/// Wigner function of the normalized `(t a + r a^dag)|alpha0>`:
/// `(|t alpha0 + r(2 alpha^* - alpha0^*)|^2 - |r|^2) / (|r|^2 + |t alpha0 + r alpha0^*|^2) W0(alpha)`
/// with `W0(alpha) = (2/pi) exp(-2|alpha - alpha0|^2)`.
pub fn wigner_coherent_analytic<T: Real>(alpha0: C<T>, t: C<T>, r: C<T>, alpha: C<T>) -> T {
    let two = T::lit(2.0);
    let w0 = two / T::PI() * (-two * (alpha - alpha0).norm_sqr()).exp();
    let num = (t * alpha0 + r * (alpha.conj() * cr(two) - alpha0.conj())).norm_sqr() - r.norm_sqr();
    let den = r.norm_sqr() + (t * alpha0 + r * alpha0.conj()).norm_sqr();
    num / den * w0
}

/// Wigner function of the normalized `(t a + r a^dag) rho_th (t a + r a^dag)^dag`
/// for a thermal input of mean photon number `nbar`.
pub fn wigner_thermal_analytic<T: Real>(nbar: T, t: C<T>, r: C<T>, alpha: C<T>) -> T {
    let one = T::one();
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    let n = nbar;
    let d = one + two * n;
    let w_th = two / (T::PI() * d) * (-two * alpha.norm_sqr() / d).exp();
    let r2 = r.norm_sqr();
    let bracket = n / d * t.norm_sqr()
        - (d * r2 + n * n) / (d * d) * (one - four * (one + n) / d * alpha.norm_sqr())
        + four * n * (one + n) * (one + n) / (d * d * d)
            * (t * r * alpha * alpha + t.conj() * r.conj() * alpha.conj() * alpha.conj()).re;
    d / ((one + n) * (r2 + n)) * bracket * w_th
}

/// Centre of the negativity disk `|alpha - C1| < 1/2` of a coherent input,
/// `C1 = (alpha0 - (t alpha0 / r)^*) / 2`, which is `(1 - t/r) alpha0 / 2`
/// for real parameters. `None` when `r = 0` (no negativity).
pub fn circle_center<T: Real>(alpha0: C<T>, t: C<T>, r: C<T>) -> Option<C<T>> {
    if r.norm() <= T::zero() {
        return None;
    }
    Some((alpha0 - (t * alpha0 / r).conj()) * cr(T::lit(0.5)))
}

/// Coefficients of the negativity ellipse `C2 x^2 + C3 y^2 < C4` of a
/// thermal input with real `t`, `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse<T> {
    pub c2: T,
    pub c3: T,
    pub c4: T,
}

impl<T: Real> Ellipse<T> {
    /// `pi C4 / sqrt(C2 C3)`, zero when there is no negative region.
    pub fn area(&self) -> T {
        if self.c4 <= T::zero() {
            return T::zero();
        }
        T::PI() * self.c4 / (self.c2 * self.c3).sqrt()
    }
}

fn ellipse_c4<T: Real>(n: T, r: T) -> T {
    let one = T::one();
    let two = T::lit(2.0);
    (one + two * n) / (T::lit(4.0) * (one + n)) * ((one + two * n) * r * r - n)
}

/// The coefficients in the published form,
/// `C2 = n + r^2 + 2 n t r`, `C3 = n + r^2 - 2 n t r`.
pub fn thermal_ellipse_printed<T: Real>(nbar: T, t: T, r: T) -> Ellipse<T> {
    let two = T::lit(2.0);
    Ellipse {
        c2: nbar + r * r + two * nbar * t * r,
        c3: nbar + r * r - two * nbar * t * r,
        c4: ellipse_c4(nbar, r),
    }
}

/// The coefficients that follow from the thermal Wigner function,
/// `C2 = [(1 + 2n) r^2 + n^2 + 2n(1 + n) t r] / (1 + n)` and `C3` with the
/// opposite sign on the last term. They agree with the printed ones at `r = 1`.
pub fn thermal_ellipse<T: Real>(nbar: T, t: T, r: T) -> Ellipse<T> {
    let one = T::one();
    let two = T::lit(2.0);
    let n = nbar;
    let base = (one + two * n) * r * r + n * n;
    let cross = two * n * (one + n) * t * r;
    Ellipse {
        c2: (base + cross) / (one + n),
        c3: (base - cross) / (one + n),
        c4: ellipse_c4(n, r),
    }
}

/// Threshold `sqrt(n / (1 + 2n))` above which a thermal input turns negative.
pub fn thermal_negativity_threshold<T: Real>(nbar: T) -> T {
    (nbar / (T::one() + T::lit(2.0) * nbar)).sqrt()
}

/// `(int max(f, 0), int max(-f, 0), area where f < 0)` for the linear
/// interpolant on a triangle of area `a` with vertex values `w`.
fn triangle_parts<T: Real>(w: [T; 3], a: T) -> (T, T, T) {
    let third = T::one() / T::lit(3.0);
    let total = (w[0] + w[1] + w[2]) * third * a;
    // corner sub-triangle cut off at vertex i by the zero line
    let corner = |i: usize| {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        let sub = a * (w[i] / (w[i] - w[j])) * (w[i] / (w[i] - w[k]));
        (w[i] * third * sub, sub)
    };
    let (neg_int, neg_area) = match w.iter().filter(|v| **v < T::zero()).count() {
        0 => (T::zero(), T::zero()),
        3 => (-total, a),
        1 => {
            let (int, sub) = corner(w.iter().position(|v| *v < T::zero()).unwrap());
            (-int, sub)
        }
        _ => {
            let (int, sub) = corner(w.iter().position(|v| *v >= T::zero()).unwrap());
            (int - total, a - sub)
        }
    };
    (total + neg_int, neg_int, neg_area)
}

/// Centroid of the negative sub-polygon of a triangle (points `p`, values `w`).
fn negative_polygon<T: Real>(p: [C<T>; 3], w: [T; 3]) -> Vec<C<T>> {
    let mut poly = Vec::with_capacity(4);
    for i in 0..3 {
        let j = (i + 1) % 3;
        if w[i] < T::zero() {
            poly.push(p[i]);
        }
        if (w[i] < T::zero()) != (w[j] < T::zero()) {
            let s = w[i] / (w[i] - w[j]);
            poly.push(p[i] + (p[j] - p[i]) * cr(s));
        }
    }
    poly
}

fn polygon_area_moment<T: Real>(poly: &[C<T>]) -> (T, C<T>) {
    let n = poly.len();
    if n < 3 {
        return (T::zero(), C::new(T::zero(), T::zero()));
    }
    let mut a2 = T::zero();
    let mut cx = T::zero();
    let mut cy = T::zero();
    for i in 0..n {
        let (p, q) = (poly[i], poly[(i + 1) % n]);
        let cross = p.re * q.im - q.re * p.im;
        a2 += cross;
        cx += (p.re + q.re) * cross;
        cy += (p.im + q.im) * cross;
    }
    let area = a2 * T::lit(0.5);
    (area, c(cx / T::lit(6.0), cy / T::lit(6.0)))
}

/// Negativity of a sampled field from its piecewise-linear interpolant on
/// two triangles per grid cell.
pub fn negativity<T: Real>(field: &WignerField<T>) -> Result<NegativityReport<T>> {
    let g = &field.grid;
    if g.dx() > T::lit(MAX_NEGATIVITY_SPACING) || g.dy() > T::lit(MAX_NEGATIVITY_SPACING) {
        return Err(Error::InvalidParameter(format!(
            "negativity needs spacing <= {MAX_NEGATIVITY_SPACING}, got {} x {}",
            g.dx(),
            g.dy()
        )));
    }
    let edge = field.boundary_max();
    if edge > T::lit(BOUNDARY_LEAK_TOL) {
        return Err(Error::BoundaryLeak {
            edge: edge.to_f64_lossy(),
        });
    }
    let tri_area = g.dx() * g.dy() * T::lit(0.5);
    let rows: Vec<(T, T, C<T>)> = (0..g.ny - 1)
        .into_par_iter()
        .map(|iy| {
            let mut abs_int = T::zero();
            let mut neg_area = T::zero();
            let mut moment = C::new(T::zero(), T::zero());
            for ix in 0..g.nx - 1 {
                let corners = [(ix, iy), (ix + 1, iy), (ix + 1, iy + 1), (ix, iy + 1)];
                let pts = corners.map(|(i, j)| g.point(i, j));
                let vals = corners.map(|(i, j)| snap_noise(field.at(i, j)));
                for tri in [[0, 1, 2], [0, 2, 3]] {
                    let w = tri.map(|k| vals[k]);
                    let (pos, neg, area) = triangle_parts(w, tri_area);
                    abs_int += pos + neg;
                    if area > T::zero() {
                        neg_area += area;
                        let (pa, pm) =
                            polygon_area_moment(&negative_polygon(tri.map(|k| pts[k]), w));
                        if pa.abs() > T::zero() {
                            moment += pm;
                        }
                    }
                }
            }
            (abs_int, neg_area, moment)
        })
        .collect();
    let (abs_int, area, moment) = rows.into_iter().fold(
        (T::zero(), T::zero(), C::new(T::zero(), T::zero())),
        |(a, b, m), (x, y, z)| (a + x, b + y, m + z),
    );
    let volume = ((abs_int - T::one()) * T::lit(0.5)).max(T::zero());
    let (min_value, min_location) = field.min();
    let centroid = if area > T::zero() {
        Some(moment / cr(area))
    } else {
        None
    };
    Ok(NegativityReport {
        volume,
        area,
        min_value,
        min_location,
        centroid,
    })
}

/// Wigner negativity of a normalized density on `grid` (default grid around
/// `<a>` if `None`). The interpolant's volume error is `O(h^2)`, so the
/// reported volume is the Richardson value `(4 V(h/2) - V(h)) / 3`; the
/// spacing is halved (at most twice) until that value, or the raw volume,
/// changes by less than `1e-4`. Area, minimum and centroid come from the
/// finest grid.
pub fn measure_negativity<T: Real>(
    rho: &FockDensity<T>,
    grid: Option<PhaseGrid<T>>,
) -> Result<NegativityReport<T>> {
    require_unit_trace(rho)?;
    let grid = match grid {
        Some(g) => g,
        None => PhaseGrid::default_for(mean_amplitude(rho))?,
    };
    let tol = T::lit(REFINE_TOL);
    let third = T::one() / T::lit(3.0);
    let mut prev = negativity(&wigner(rho, &grid)?)?;
    let mut prev_extrapolated: Option<T> = None;
    let mut g = grid;
    for _ in 0..2 {
        g = g.refined();
        let mut next = negativity(&wigner(rho, &g)?)?;
        let raw_delta = (next.volume - prev.volume).abs();
        let extrapolated = ((T::lit(4.0) * next.volume - prev.volume) * third).max(T::zero());
        let settled =
            raw_delta < tol || prev_extrapolated.is_some_and(|e| (extrapolated - e).abs() < tol);
        prev_extrapolated = Some(extrapolated);
        prev = next;
        if settled {
            next.volume = extrapolated;
            return Ok(next);
        }
    }
    Err(Error::Inconclusive(format!(
        "negativity volume did not settle under grid refinement (last spacing {})",
        g.dx()
    )))
}

/// `<a>` of a density.
pub fn mean_amplitude<T: Real>(rho: &FockDensity<T>) -> C<T> {
    let m = rho.matrix();
    let mut acc = C::new(T::zero(), T::zero());
    for n in 1..rho.dim() {
        acc += m[(n, n - 1)] * cr(T::lit(n as f64).sqrt());
    }
    acc / cr(rho.trace())
}

/// `e^{|z|^2} <z|rho|z> = sum rho_mn z^*m z^n / sqrt(m! n!)`: the Husimi
/// function with its Gaussian envelope removed, zero exactly where the
/// state is orthogonal to `|z>`.
pub fn deflated_husimi<T: Real>(rho: &FockDensity<T>, z: C<T>) -> T {
    let dim = effective_support(rho);
    let mut v = Vec::with_capacity(dim);
    let mut cur = C::new(T::one(), T::zero());
    for n in 0..dim {
        if n > 0 {
            cur = cur * z / cr(T::lit(n as f64).sqrt());
        }
        v.push(cur);
    }
    let m = rho.matrix();
    let mut acc = C::new(T::zero(), T::zero());
    for i in 0..dim {
        let mut row = C::new(T::zero(), T::zero());
        for j in 0..dim {
            row += m[(i, j)] * v[j];
        }
        acc += v[i].conj() * row;
    }
    acc.re
}

/// Options for [`nonclassical_depth`].
#[derive(Debug, Clone, Copy)]
pub struct DepthOptions<T> {
    /// Zero threshold for the orthogonality shortcut.
    pub ortho_tol: T,
    /// `R(z, tau) >= -positivity_tol` counts as positive.
    pub positivity_tol: T,
    pub bisection_tol: T,
    /// Search grid; defaults to `+-(|<a>| + 5)` at spacing 0.1.
    pub grid: Option<PhaseGrid<T>>,
}

impl<T: Real> Default for DepthOptions<T> {
    fn default() -> Self {
        Self {
            ortho_tol: T::lit(1e-9),
            positivity_tol: T::lit(1e-8),
            bisection_tol: T::lit(1e-3),
            grid: None,
        }
    }
}

fn grid_argmin<T: Real>(grid: &PhaseGrid<T>, f: impl Fn(C<T>) -> T + Sync) -> (C<T>, T) {
    grid.points().par_iter().map(|z| (*z, f(*z))).reduce(
        || (C::new(T::zero(), T::zero()), T::infinity()),
        |a, b| if b.1 < a.1 { b } else { a },
    )
}

/// Minimum of the deflated Husimi function over the grid interior, refined
/// by a simplex search. Returns the location and value.
fn husimi_zero<T: Real>(rho: &FockDensity<T>, grid: &PhaseGrid<T>) -> (C<T>, T) {
    let (z0, _) = grid_argmin(grid, |z| deflated_husimi(rho, z));
    let step = grid.dx();
    let ((x, y), f) = nelder_mead_2d(
        |x, y| deflated_husimi(rho, c(x, y)),
        (z0.re, z0.im),
        step,
        T::tol(1e-12),
        2000,
    );
    (c(x, y), f)
}

fn inside<T: Real>(grid: &PhaseGrid<T>, z: C<T>) -> bool {
    let (dx, dy) = (grid.dx(), grid.dy());
    z.re > grid.x_min + dx
        && z.re < grid.x_max - dx
        && z.im > grid.y_min + dy
        && z.im < grid.y_max - dy
}

/// Minimum of `W_s` over the grid nodes, refined by a simplex search from
/// the best node. Returns the location and value.
pub fn quasiprob_minimum<T: Real>(
    rho: &FockDensity<T>,
    grid: &PhaseGrid<T>,
    s_order: T,
) -> Result<(C<T>, T)> {
    let kernel = Kernel::new(rho, s_order)?;
    let points = grid.points();
    let vals = points
        .par_iter()
        .map(|z| kernel.eval(*z))
        .collect::<Result<Vec<T>>>()?;
    let (best_z, best_v) =
        points
            .iter()
            .zip(&vals)
            .fold((points[0], T::infinity()), |acc, (z, v)| {
                if *v < acc.1 {
                    (*z, *v)
                } else {
                    acc
                }
            });
    let failed = std::cell::Cell::new(None);
    let ((x, y), refined) = nelder_mead_2d(
        |x, y| match kernel.eval(c(x, y)) {
            Ok(v) => v,
            Err(e) => {
                failed.set(Some(e));
                T::infinity()
            }
        },
        (best_z.re, best_z.im),
        grid.dx() * T::lit(0.5),
        T::tol(1e-9),
        500,
    );
    if let Some(e) = failed.into_inner() {
        return Err(e);
    }
    Ok(if refined < best_v {
        (c(x, y), refined)
    } else {
        (best_z, best_v)
    })
}

/// Minimum of `R(z, tau)`; `Ok(None)` when the smoothed series diverges
/// (positivity cannot be certified at this `tau`).
fn smoothed_min<T: Real>(rho: &FockDensity<T>, grid: &PhaseGrid<T>, tau: T) -> Result<Option<T>> {
    match quasiprob_minimum(rho, grid, T::one() - T::lit(2.0) * tau) {
        Ok((_, v)) => Ok(Some(v)),
        Err(Error::Divergence { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// `D(-<a>) rho D(-<a>)^dag` and `<a>`, or `rho` itself when the shifted
/// state does not fit the cutoff. Smoothed `P` functions only translate.
fn recentered<T: Real>(rho: &FockDensity<T>) -> (FockDensity<T>, C<T>) {
    let mu = mean_amplitude(rho);
    if mu.norm() < T::tol(1e-12) {
        return (rho.clone(), C::new(T::zero(), T::zero()));
    }
    let moved = rho.transform(&displacement_op(-mu, rho.dim()));
    // rounding noise of the displacement, amplified by q^n for s > 0
    let floor = moved.matrix().max_abs() * T::epsilon() * T::lit(100.0);
    let n = moved.dim();
    let cleaned = CMatrix::from_fn(n, n, |i, j| {
        let v = moved.matrix()[(i, j)];
        if v.norm() <= floor {
            C::new(T::zero(), T::zero())
        } else {
            v
        }
    });
    let Ok(shifted) = FockDensity::from_matrix(cleaned) else {
        return (rho.clone(), C::new(T::zero(), T::zero()));
    };
    let shifted = shifted.rescaled().0;
    match check_tail(&shifted) {
        Ok(()) => (shifted, mu),
        Err(_) => (rho.clone(), C::new(T::zero(), T::zero())),
    }
}

/// Nonclassical depth: the smallest `tau` in `[0, 1]` that makes the
/// Gaussian-smoothed `P` function `R(z, tau)` (s-ordered with
/// `s = 1 - 2 tau`) nonnegative.
///
/// States orthogonal to some coherent state give `tau = 1` directly with
/// that coherent amplitude as witness; otherwise `tau` is bracketed by
/// bisection. Orders where the Fock series diverges count as not certified.
pub fn nonclassical_depth<T: Real>(
    rho: &FockDensity<T>,
    opts: &DepthOptions<T>,
) -> Result<DepthReport<T>> {
    require_unit_trace(rho)?;
    let (centered, mu) = recentered(rho);
    let rho = &centered;
    let grid = match opts.grid {
        Some(g) => PhaseGrid::new(
            g.x_min - mu.re,
            g.x_max - mu.re,
            g.y_min - mu.im,
            g.y_max - mu.im,
            g.nx,
            g.ny,
        )?,
        None => PhaseGrid::around(
            C::new(T::zero(), T::zero()),
            T::lit(DEFAULT_MARGIN),
            T::lit(0.1),
        )?,
    };
    let (z, f) = husimi_zero(rho, &grid);
    if f <= opts.ortho_tol && inside(&grid, z) {
        return Ok(DepthReport {
            tau: T::one(),
            method: DepthMethod::AnalyticOrthogonality,
            witness_beta: Some(z + mu),
        });
    }
    let certified = |tau: T| -> Result<Option<bool>> {
        Ok(smoothed_min(rho, &grid, tau)?.map(|m| m >= -opts.positivity_tol))
    };
    let tol = opts.bisection_tol;
    let first = certified(tol)?;
    if first == Some(true) {
        return Ok(DepthReport {
            tau: T::zero(),
            method: DepthMethod::NumericBisection,
            witness_beta: None,
        });
    }
    let mut lo = tol;
    let mut lo_genuine = first.is_some();
    let mut hi = T::one();
    while hi - lo > tol {
        let mid = (lo + hi) * T::lit(0.5);
        match certified(mid)? {
            Some(true) => hi = mid,
            Some(false) => {
                lo = mid;
                lo_genuine = true;
            }
            None => {
                lo = mid;
                lo_genuine = false;
            }
        }
    }
    if !lo_genuine {
        return Err(Error::Inconclusive(format!(
            "positivity boundary near tau = {} is masked by divergence of the smoothed series",
            hi
        )));
    }
    Ok(DepthReport {
        tau: hi,
        method: DepthMethod::NumericBisection,
        witness_beta: None,
    })
}

/// Depth of the normalized `(t a + r a^dag)|alpha0>`: `1` with witness
/// `beta = -((t / r) alpha0)^*` for `r != 0`, `0` for pure subtraction.
pub fn depth_of_coherent_output<T: Real>(
    alpha0: C<T>,
    params: &CoherentOpParams<T>,
) -> DepthReport<T> {
    match params.orthogonal_coherent_witness(alpha0) {
        Some(beta) => DepthReport {
            tau: T::one(),
            method: DepthMethod::AnalyticOrthogonality,
            witness_beta: Some(beta),
        },
        None => DepthReport {
            tau: T::zero(),
            method: DepthMethod::AnalyticOrthogonality,
            witness_beta: None,
        },
    }
}

/// `tau = (1 + n) r^2 / (n + r^2)` for a thermal input.
pub fn thermal_depth_analytic<T: Real>(nbar: T, r: T) -> DepthReport<T> {
    let r2 = r * r;
    let tau = if r2 + nbar <= T::zero() {
        T::zero()
    } else {
        (T::one() + nbar) * r2 / (nbar + r2)
    };
    DepthReport {
        tau: tau.min(T::one()),
        method: DepthMethod::AnalyticThermal,
        witness_beta: None,
    }
}
