//! Definite integrals, running integrals on grids and tail integrals.
//!
//! Scalar integrals use adaptive Gauss-Kronrod (7/15 points) with bisection
//! of the worst interval. Running integrals of sampled data use a composite
//! fourth-order rule: each grid interval integrates the cubic through the
//! four nearest nodes.
//!
//! Quantities of the form `a_i delta_ij - integral_0^x` must be taken from
//! [`tail_inner`], which integrates `[x, infinity)` directly. Near `x = 5` the
//! two terms of the subtraction already agree to about eleven digits.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{VectorFunction, VectorTrajectory};

/// Default half-axis truncation.
pub const DEFAULT_X_MAX: f64 = 12.0;
/// Default uniform grid step.
pub const DEFAULT_STEP: f64 = 1.0 / 256.0;
/// Distance past `max(x, reach)` covered by tail integrals. A Gaussian-decay
/// integrand has dropped by at least `e^-64` there.
pub const TAIL_EXTENT: f64 = 8.0;
/// Relative tolerance for tail integrals, taken against the integral of `|f|`.
pub const TAIL_REL_TOL: f64 = 1e-13;

const MAX_SUBDIVISIONS: usize = 2000;
/// Relative accuracy (against the integral of `|f|`) that is always accepted.
const ROUNDOFF_FLOOR: f64 = 64.0 * f64::EPSILON;

/// Strictly increasing discretization of `[x_min, x_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nodes: Vec<f64>,
    step: Option<f64>,
}

impl Grid {
    /// Uniform grid on `[0, x_max]`. `x_max / step` must be (close to) an integer.
    pub fn uniform(x_max: f64, step: f64) -> Result<Self> {
        if !(x_max.is_finite() && step.is_finite() && x_max > 0.0 && step > 0.0) {
            return Err(Error::InvalidGrid(format!("x_max = {x_max}, step = {step}")));
        }
        let intervals = (x_max / step).round();
        if intervals < 1.0 || ((intervals * step) - x_max).abs() > 1e-9 * x_max {
            return Err(Error::InvalidGrid(format!(
                "x_max = {x_max} is not a whole multiple of step = {step}"
            )));
        }
        let n = intervals as usize;
        let mut nodes: Vec<f64> = (0..=n).map(|i| i as f64 * step).collect();
        nodes[n] = x_max;
        Ok(Self { nodes, step: Some(step) })
    }

    /// Default grid: step 1/256 on `[0, 12]`.
    pub fn default_half_axis() -> Self {
        Self::uniform(DEFAULT_X_MAX, DEFAULT_STEP).expect("default grid is valid")
    }

    /// Grid from explicit nodes; at least two, strictly increasing.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidGrid("a grid needs at least two nodes".into()));
        }
        if nodes.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidGrid("non-finite node".into()));
        }
        if let Some(i) = nodes.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(format!("nodes not increasing at index {}", i + 1)));
        }
        let h = nodes[1] - nodes[0];
        let uniform = nodes
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h);
        Ok(Self { nodes, step: uniform.then_some(h) })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn x_min(&self) -> f64 {
        self.nodes[0]
    }

    pub fn x_max(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// The step when the grid is uniform.
    pub fn uniform_step(&self) -> Option<f64> {
        self.step
    }

    /// Index of the node equal to `x`, if any.
    pub fn node_index(&self, x: f64) -> Option<usize> {
        if let Some(h) = self.step {
            let i = ((x - self.x_min()) / h).round();
            if i >= 0.0 && (i as usize) < self.nodes.len() && self.nodes[i as usize] == x {
                return Some(i as usize);
            }
            return None;
        }
        self.nodes.binary_search_by(|n| n.total_cmp(&x)).ok()
    }

    /// Index `k` of the interval `[nodes[k], nodes[k+1]]` containing `x`
    /// (clamped to the first and last interval).
    pub fn interval_index(&self, x: f64) -> usize {
        let last = self.nodes.len() - 2;
        if let Some(h) = self.step {
            let k = ((x - self.x_min()) / h).floor();
            return if k <= 0.0 { 0 } else { (k as usize).min(last) };
        }
        match self.nodes.binary_search_by(|n| n.total_cmp(&x)) {
            Ok(i) => i.min(last),
            Err(0) => 0,
            Err(i) => (i - 1).min(last),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min() && x <= self.x_max()
    }

    /// Whether two grids carry identical nodes.
    pub fn same_as(&self, other: &Grid) -> bool {
        std::ptr::eq(self, other) || self.nodes == other.nodes
    }
}

/// Running integral of a fixed integrand on a grid.
#[derive(Debug, Clone)]
pub struct CumulativeIntegral {
    pub grid: Arc<Grid>,
    /// `values[k]` is the integral from `nodes[0]` to `nodes[k]`.
    pub values: Vec<f64>,
    /// The full half-axis integral: the last running value, extended by a
    /// tail integral past the grid when one was supplied.
    pub total: f64,
}

impl CumulativeIntegral {
    /// Value at an exact node.
    pub fn at_node(&self, k: usize) -> f64 {
        self.values[k]
    }
}

/// Tolerance pair: the estimate is accepted once its error is below
/// `max(abs, rel * integral of |f|)`.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub fn absolute(abs: f64) -> Self {
        Self { abs, rel: 0.0 }
    }

    pub fn relative(rel: f64) -> Self {
        Self { abs: 0.0, rel }
    }
}

// G7K15 abscissae (descending, zero last) and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for XGK[1], XGK[3], XGK[5] and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    abs_value: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_centre = f(centre);
    let mut kronrod = f_centre * WGK[7];
    let mut gauss = f_centre * WG[3];
    let mut abs_value = kronrod.abs();
    let mut fv = [(0.0, 0.0); 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(centre - dx);
        let f2 = f(centre + dx);
        fv[j] = (f1, f2);
        kronrod += WGK[j] * (f1 + f2);
        abs_value += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[7] * (f_centre - mean).abs();
    for j in 0..7 {
        asc += WGK[j] * ((fv[j].0 - mean).abs() + (fv[j].1 - mean).abs());
    }
    let value = kronrod * half;
    let abs_value = abs_value * half.abs();
    let asc = asc * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if asc != 0.0 && error != 0.0 {
        error = asc * (200.0 * error / asc).powf(1.5).min(1.0);
    }
    if abs_value > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * abs_value);
    }
    Segment { a, b, value, error, abs_value }
}

/// Single 15-point Kronrod estimate of `f` over `[a, b]`, without adaptation.
pub fn kronrod15<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    gk15(&f, a, b).value
}

/// Adaptive integral of `f` over `[a, b]` with absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    integrate_with(f, a, b, Tolerance::absolute(tol))
}

/// Adaptive integral with a combined absolute/relative tolerance.
pub fn integrate_with<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(Error::InvalidBounds { a, b });
    }
    if a == b {
        return Ok(0.0);
    }
    let mut segments = vec![gk15(&f, a, b)];
    loop {
        let value: f64 = segments.iter().map(|s| s.value).sum();
        let error: f64 = segments.iter().map(|s| s.error).sum();
        let abs_value: f64 = segments.iter().map(|s| s.abs_value).sum();
        // below the per-segment round-off floor no subdivision can help
        if !(value.is_finite() && error.is_finite()) {
            return Err(Error::NonConvergence { a, b, error, tol: tol.abs });
        }
        let target = tol.abs.max(tol.rel.max(ROUNDOFF_FLOOR) * abs_value);
        if error <= target {
            return Ok(value);
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("at least one segment");
        let seg = segments[worst];
        let mid = 0.5 * (seg.a + seg.b);
        let too_narrow = mid <= seg.a || mid >= seg.b;
        if segments.len() >= MAX_SUBDIVISIONS || too_narrow {
            return Err(Error::NonConvergence { a, b, error, tol: target });
        }
        segments[worst] = gk15(&f, seg.a, mid);
        segments.push(gk15(&f, mid, seg.b));
    }
}

/// Weights of the cubic through `stencil` integrated over `[lo, hi]`.
/// Two-point Gauss-Legendre integrates the cubic exactly.
fn interval_weights(stencil: &[f64], lo: f64, hi: f64) -> [f64; 4] {
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let offset = half / 3f64.sqrt();
    let mut w = [0.0; 4];
    for t in [mid - offset, mid + offset] {
        for (j, wj) in w.iter_mut().enumerate().take(stencil.len()) {
            let mut l = 1.0;
            for (m, &xm) in stencil.iter().enumerate() {
                if m != j {
                    l *= (t - xm) / (stencil[j] - xm);
                }
            }
            *wj += half * l;
        }
    }
    w
}

/// Six-point Lagrange interpolation of grid samples at `x`. Outside the grid
/// the end stencils extrapolate.
pub fn lagrange_interpolate(grid: &Grid, values: &[f64], x: f64) -> f64 {
    let nodes = grid.nodes();
    if let Some(k) = grid.node_index(x) {
        return values[k];
    }
    let width = nodes.len().min(6);
    let k = grid.interval_index(x);
    let start = k.saturating_sub(2).min(nodes.len() - width);
    let stencil = &nodes[start..start + width];
    let mut acc = 0.0;
    for j in 0..width {
        let mut l = 1.0;
        for m in 0..width {
            if m != j {
                l *= (x - stencil[m]) / (stencil[j] - stencil[m]);
            }
        }
        acc += l * values[start + j];
    }
    acc
}

/// Running integral of sampled values `f` on `grid`, starting at zero.
pub fn cumulative(f: &[f64], grid: &Grid) -> Result<Vec<f64>> {
    let nodes = grid.nodes();
    if f.len() != nodes.len() {
        return Err(Error::GridMismatch);
    }
    let n = nodes.len();
    let mut out = Vec::with_capacity(n);
    out.push(0.0);
    if n == 2 {
        out.push(0.5 * (nodes[1] - nodes[0]) * (f[0] + f[1]));
        return Ok(out);
    }
    let width = n.min(4);
    let uniform = grid.uniform_step().map(|h| {
        let s = [0.0, h, 2.0 * h, 3.0 * h];
        (
            interval_weights(&s[..width], 0.0, h),
            interval_weights(&s[..width], h, 2.0 * h),
            interval_weights(&s[..width], s[width - 2], s[width - 1]),
        )
    });
    let mut acc = 0.0;
    for k in 0..n - 1 {
        // stencil start: centred where possible, one-sided at the ends
        let start = if k == 0 { 0 } else { (k - 1).min(n - width) };
        let w = match uniform {
            Some((first, interior, last)) => {
                if k == 0 {
                    first
                } else if start == k - 1 && k + 2 < n {
                    interior
                } else if width == 4 && k == n - 2 {
                    last
                } else {
                    interval_weights(&nodes[start..start + width], nodes[k], nodes[k + 1])
                }
            }
            None => interval_weights(&nodes[start..start + width], nodes[k], nodes[k + 1]),
        };
        let mut piece = 0.0;
        for j in 0..width {
            piece += w[j] * f[start + j];
        }
        acc += piece;
        out.push(acc);
    }
    Ok(out)
}

/// Running integral of `u1 w1 + u2 w2`. The total is the last running value.
pub fn cumulative_inner(u: &VectorTrajectory, w: &VectorTrajectory) -> Result<CumulativeIntegral> {
    if !u.grid.same_as(&w.grid) {
        return Err(Error::GridMismatch);
    }
    let products: Vec<f64> = u
        .component1
        .iter()
        .zip(&u.component2)
        .zip(w.component1.iter().zip(&w.component2))
        .map(|((a1, a2), (b1, b2))| a1 * b1 + a2 * b2)
        .collect();
    let values = cumulative(&products, &u.grid)?;
    let total = *values.last().expect("grid has nodes");
    Ok(CumulativeIntegral { grid: Arc::clone(&u.grid), values, total })
}

/// As [`cumulative_inner`], with the total extended past the grid by a tail
/// integral of the analytic functions behind the samples.
pub fn cumulative_inner_with_tail(
    u: &VectorTrajectory,
    w: &VectorTrajectory,
    u_fn: &dyn VectorFunction,
    w_fn: &dyn VectorFunction,
) -> Result<CumulativeIntegral> {
    let mut c = cumulative_inner(u, w)?;
    c.total += tail_inner(u_fn, w_fn, u.grid.x_max())?;
    Ok(c)
}

/// `integral_x^infinity (u1 w1 + u2 w2) ds` by direct quadrature over
/// `[x, max(x, reach) + TAIL_EXTENT]`.
pub fn tail_inner(u: &dyn VectorFunction, w: &dyn VectorFunction, x: f64) -> Result<f64> {
    let reach = u.reach().max(w.reach());
    let upper = x.max(reach) + TAIL_EXTENT;
    integrate_with(
        |s| {
            let a = u.eval(s);
            let b = w.eval(s);
            a[0] * b[0] + a[1] * b[1]
        },
        x,
        upper,
        Tolerance { abs: f64::MIN_POSITIVE, rel: TAIL_REL_TOL },
    )
}

/// Tail integrals `integral_{x_k}^infinity` at every node of `grid`, summed
/// backwards from the far end one interval at a time.
pub fn tail_inner_on_grid(
    u: &dyn VectorFunction,
    w: &dyn VectorFunction,
    grid: &Grid,
) -> Result<Vec<f64>> {
    let nodes = grid.nodes();
    let n = nodes.len();
    let mut out = vec![0.0; n];
    let mut acc = tail_inner(u, w, nodes[n - 1])?;
    out[n - 1] = acc;
    let product = |s: f64| {
        let a = u.eval(s);
        let b = w.eval(s);
        a[0] * b[0] + a[1] * b[1]
    };
    for k in (0..n - 1).rev() {
        acc += kronrod15(product, nodes[k], nodes[k + 1]);
        out[k] = acc;
    }
    Ok(out)
}
