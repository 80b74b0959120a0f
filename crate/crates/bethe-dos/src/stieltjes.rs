//! Single-site Stieltjes transforms and their holomorphic continuation.
//!
//! For a compactly supported law `mu` with a density `rho` that is analytic
//! near a real window `I`, the transforms `s_k(z) = int dmu(t) / (t-z)^k`
//! extend holomorphically from the upper half-plane across `I`. The
//! continued value is computed by replacing the integral over `I_sharp` with
//! a contour integral over the lower boundary arc `eta` of the stadium
//! `Omega_{delta0}(I)`, plus the untouched part of the measure outside
//! `I_sharp`. The uniform law additionally has closed forms.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;

use crate::{Error, Result};

/// Target relative tolerance for adaptive quadrature refinement. Chosen
/// just above the f64 rounding floor of the worst-case high-index
/// integrands (k = 6 close to the contour), where summation error caps the
/// achievable accuracy near 1e-12.
pub const QUAD_TOL: f64 = 1e-11;
/// Node cap per contour piece / real segment during refinement.
pub const QUAD_MAX_NODES: usize = 1 << 14;

/// The window geometry `(I, delta0, delta)` governing continuation.
///
/// `I_sharp = (b1 - delta0, b2 + delta0)` and the evaluation domain is the
/// stadium `Omega_delta(I) = { z : dist(z, I) < delta }`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticWindow {
    i_lo: f64,
    i_hi: f64,
    delta0: f64,
    delta: f64,
}

impl AnalyticWindow {
    pub fn new(i_lo: f64, i_hi: f64, delta0: f64, delta: f64) -> Result<Self> {
        if !(i_lo < i_hi) {
            return Err(Error::Window(format!("need b1 < b2, got ({i_lo}, {i_hi})")));
        }
        if !(delta > 0.0 && delta < delta0) {
            return Err(Error::Window(format!(
                "need 0 < delta < delta0, got delta = {delta}, delta0 = {delta0}"
            )));
        }
        Ok(AnalyticWindow {
            i_lo,
            i_hi,
            delta0,
            delta,
        })
    }

    pub fn i(&self) -> (f64, f64) {
        (self.i_lo, self.i_hi)
    }

    pub fn delta0(&self) -> f64 {
        self.delta0
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `I_sharp = (b1 - delta0, b2 + delta0)`.
    pub fn i_sharp(&self) -> (f64, f64) {
        (self.i_lo - self.delta0, self.i_hi + self.delta0)
    }

    /// Distance from `z` to the closed interval `[b1, b2]`.
    pub fn dist_to_i(&self, z: Complex64) -> f64 {
        let x = z.re.clamp(self.i_lo, self.i_hi);
        (z - Complex64::new(x, 0.0)).norm()
    }

    /// Membership in the evaluation stadium `Omega_delta(I)`.
    pub fn contains(&self, z: Complex64) -> bool {
        self.dist_to_i(z) < self.delta
    }

    /// Arc length of the continuation contour `eta`.
    pub fn eta_length(&self) -> f64 {
        PI * self.delta0 + (self.i_hi - self.i_lo)
    }
}

/// A density that is analytic on a complex neighborhood of `I_sharp` and can
/// be evaluated at complex arguments.
#[derive(Debug, Clone, PartialEq)]
pub enum Density {
    /// Constant value (entire).
    Constant(f64),
    /// Chebyshev series on `[lo, hi]`, evaluated by Clenshaw recurrence;
    /// analytic on the Bernstein ellipses of that interval.
    Chebyshev { coeffs: Vec<f64>, lo: f64, hi: f64 },
}

impl Density {
    pub fn eval(&self, z: Complex64) -> Complex64 {
        match self {
            Density::Constant(c) => Complex64::new(*c, 0.0),
            Density::Chebyshev { coeffs, lo, hi } => {
                let x = (2.0 * z - Complex64::new(lo + hi, 0.0)) / (hi - lo);
                let mut b1 = Complex64::new(0.0, 0.0);
                let mut b2 = Complex64::new(0.0, 0.0);
                for &a in coeffs.iter().skip(1).rev() {
                    let b0 = 2.0 * x * b1 - b2 + a;
                    b2 = b1;
                    b1 = b0;
                }
                let a0 = coeffs.first().copied().unwrap_or(0.0);
                x * b1 - b2 + a0
            }
        }
    }

    pub fn eval_real(&self, t: f64) -> f64 {
        self.eval(Complex64::new(t, 0.0)).re
    }

    /// First derivative, again as a [`Density`].
    pub fn derivative(&self) -> Density {
        match self {
            Density::Constant(_) => Density::Constant(0.0),
            Density::Chebyshev { coeffs, lo, hi } => {
                let n = coeffs.len();
                if n <= 1 {
                    return Density::Constant(0.0);
                }
                // Standard Chebyshev derivative recurrence on [-1, 1],
                // rescaled by 2 / (hi - lo).
                let mut d = vec![0.0; n];
                d[n - 1] = 0.0;
                if n >= 2 {
                    d[n - 2] = 2.0 * (n - 1) as f64 * coeffs[n - 1];
                }
                for j in (0..n.saturating_sub(2)).rev() {
                    d[j] = d[j + 2] + 2.0 * (j + 1) as f64 * coeffs[j + 1];
                }
                d[0] /= 2.0;
                let scale = 2.0 / (hi - lo);
                let coeffs = d.into_iter().take(n - 1).map(|c| c * scale).collect();
                Density::Chebyshev {
                    coeffs,
                    lo: *lo,
                    hi: *hi,
                }
            }
        }
    }

    /// `m`-th derivative.
    pub fn derivative_n(&self, m: usize) -> Density {
        let mut d = self.clone();
        for _ in 0..m {
            d = d.derivative();
        }
        d
    }
}

/// One weighted node of the part of `mu` living outside `I_sharp`: either a
/// genuine point mass or a quadrature node of a singular-part handle. Both
/// contribute exact terms `w / (t - z)^k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutsideMass {
    pub t: f64,
    pub w: f64,
}

/// A compactly supported probability law driving all transforms.
#[derive(Debug, Clone, PartialEq)]
pub enum SingleSiteLaw {
    /// Uniform on `[-a, a]`; density `1/(2a)`, entire.
    Uniform { half_width: f64 },
    /// Generic law: analytic density on a window plus a weighted-node handle
    /// for the part of `mu` outside `I_sharp`.
    Generic {
        density: Density,
        outside: Vec<OutsideMass>,
        support: (f64, f64),
        /// User-supplied `sup |rho|` on the contour `eta`; when absent the
        /// bound is estimated by sampling and flagged non-rigorous.
        density_bound_on_eta: Option<f64>,
    },
}

impl SingleSiteLaw {
    pub fn uniform(half_width: f64) -> Result<Self> {
        if !(half_width > 0.0) {
            return Err(Error::Law(format!("half width must be positive, got {half_width}")));
        }
        Ok(SingleSiteLaw::Uniform { half_width })
    }

    pub fn support(&self) -> (f64, f64) {
        match self {
            SingleSiteLaw::Uniform { half_width } => (-half_width, *half_width),
            SingleSiteLaw::Generic { support, .. } => *support,
        }
    }

    /// The analytic density near the window, as a complex-evaluable handle.
    pub fn density(&self) -> Density {
        match self {
            SingleSiteLaw::Uniform { half_width } => Density::Constant(1.0 / (2.0 * half_width)),
            SingleSiteLaw::Generic { density, .. } => density.clone(),
        }
    }

    pub fn outside(&self) -> &[OutsideMass] {
        match self {
            SingleSiteLaw::Uniform { .. } => &[],
            SingleSiteLaw::Generic { outside, .. } => outside,
        }
    }

    /// Check normalization and window compatibility: density mass on
    /// `I_sharp` plus the outside mass must be 1 within `1e-10`, the density
    /// must be real nonnegative on `I_sharp`, and for the uniform law
    /// `I_sharp` must sit strictly inside the support.
    pub fn validate(&self, window: &AnalyticWindow) -> Result<()> {
        let (lo, hi) = window.i_sharp();
        match self {
            SingleSiteLaw::Uniform { half_width } => {
                if lo <= -half_width || hi >= *half_width {
                    return Err(Error::Law(format!(
                        "I_sharp = ({lo}, {hi}) must lie strictly inside (-{half_width}, {half_width})"
                    )));
                }
                Ok(())
            }
            SingleSiteLaw::Generic {
                density, outside, ..
            } => {
                let rule = gauss_legendre(128);
                let (nodes, weights) = (&rule.0, &rule.1);
                let mut inside_mass = 0.0;
                let half = 0.5 * (hi - lo);
                let mid = 0.5 * (hi + lo);
                for (&x, &w) in nodes.iter().zip(weights.iter()) {
                    let t = mid + half * x;
                    let v = density.eval(Complex64::new(t, 0.0));
                    if v.im.abs() > 1e-10 || v.re < -1e-12 {
                        return Err(Error::Law(format!(
                            "density must be real nonnegative on I_sharp; rho({t}) = {v}"
                        )));
                    }
                    inside_mass += w * half * v.re;
                }
                let outside_mass: f64 = outside.iter().map(|m| m.w).sum();
                let total = inside_mass + outside_mass;
                if (total - 1.0).abs() > 1e-10 {
                    return Err(Error::Law(format!(
                        "total mass {total} != 1 (inside {inside_mass}, outside {outside_mass})"
                    )));
                }
                for m in outside {
                    if m.t > lo && m.t < hi {
                        return Err(Error::Law(format!(
                            "outside mass at t = {} lies inside I_sharp = ({lo}, {hi})",
                            m.t
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    /// `sup |rho|` on the contour: exact for uniform, user bound or sampled
    /// estimate (x2 safety, non-rigorous) for generic laws.
    pub fn density_bound_on_eta(&self, window: &AnalyticWindow) -> (f64, bool) {
        match self {
            SingleSiteLaw::Uniform { half_width } => (1.0 / (2.0 * half_width), true),
            SingleSiteLaw::Generic {
                density,
                density_bound_on_eta,
                ..
            } => match density_bound_on_eta {
                Some(b) => (*b, true),
                None => {
                    let eta = ContourEta::build(window, 256).expect("window already validated");
                    let max = eta
                        .points()
                        .map(|w| density.eval(w).norm())
                        .fold(0.0f64, f64::max);
                    (2.0 * max, false)
                }
            },
        }
    }
}

/// The continuation contour `eta`: lower boundary arc of
/// `Omega_{delta0}(I)`, oriented from `b1 - delta0` to `b2 + delta0`.
/// Quarter circle around `b1`, bottom segment at `Im = -delta0`, quarter
/// circle around `b2`; Gauss-Legendre nodes and weights per piece, with the
/// complex derivative factor of each parametrization folded into the weight.
#[derive(Debug, Clone)]
pub struct ContourEta {
    nodes: Vec<(Complex64, Complex64)>,
    nodes_per_piece: usize,
}

impl ContourEta {
    pub fn build(window: &AnalyticWindow, nodes_per_piece: usize) -> Result<Self> {
        if nodes_per_piece < 4 {
            return Err(Error::Window(format!(
                "need at least 4 nodes per contour piece, got {nodes_per_piece}"
            )));
        }
        let (b1, b2) = window.i();
        let d0 = window.delta0();
        let rule = gauss_legendre(nodes_per_piece);
        let (xs, ws) = (&rule.0, &rule.1);
        let mut nodes = Vec::with_capacity(3 * nodes_per_piece);

        // Left quarter circle: w = b1 + d0 e^{i theta}, theta in [pi, 3pi/2].
        for (&x, &w) in xs.iter().zip(ws.iter()) {
            let theta = PI + 0.25 * PI * (x + 1.0);
            let e = Complex64::new(0.0, theta).exp();
            let point = Complex64::new(b1, 0.0) + d0 * e;
            let dw = Complex64::new(0.0, d0) * e * (0.25 * PI) * w;
            nodes.push((point, dw));
        }
        // Bottom segment: w = t - i d0, t in [b1, b2].
        let half = 0.5 * (b2 - b1);
        let mid = 0.5 * (b1 + b2);
        for (&x, &w) in xs.iter().zip(ws.iter()) {
            let point = Complex64::new(mid + half * x, -d0);
            nodes.push((point, Complex64::new(half * w, 0.0)));
        }
        // Right quarter circle: w = b2 + d0 e^{i theta}, theta in [3pi/2, 2pi].
        for (&x, &w) in xs.iter().zip(ws.iter()) {
            let theta = 1.5 * PI + 0.25 * PI * (x + 1.0);
            let e = Complex64::new(0.0, theta).exp();
            let point = Complex64::new(b2, 0.0) + d0 * e;
            let dw = Complex64::new(0.0, d0) * e * (0.25 * PI) * w;
            nodes.push((point, dw));
        }
        Ok(ContourEta {
            nodes,
            nodes_per_piece,
        })
    }

    pub fn nodes_per_piece(&self) -> usize {
        self.nodes_per_piece
    }

    pub fn points(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.nodes.iter().map(|(w, _)| *w)
    }

    /// `int_eta f(w) dw` with the fixed node set.
    pub fn integrate<F: Fn(Complex64) -> Complex64>(&self, f: F) -> Complex64 {
        self.nodes.iter().map(|&(w, dw)| f(w) * dw).sum()
    }

    /// Numerical arc length (sanity handle for the geometry).
    pub fn arc_length(&self) -> f64 {
        self.nodes.iter().map(|(_, dw)| dw.norm()).sum()
    }
}

/// Closed-form transform of the uniform law on `[-a, a]`, on the branch that
/// is holomorphic on the upper half-plane and continued downward across
/// `(-a, a)`.
///
/// The `k = 1` branch is fixed by analytic continuation of the logarithm
/// along a vertical segment from high in the upper half-plane down to `z`;
/// for the affine arguments `a - z` and `-a - z` that continuation is exact:
/// only `log(-a - z)` crosses its cut, and only when `Re z > -a` and
/// `Im z <= 0`.
pub fn s_uniform_closed(k: u32, z: Complex64, half_width: f64) -> Result<Complex64> {
    if k == 0 {
        return Err(Error::TransformIndex);
    }
    let a = half_width;
    if (z - Complex64::new(a, 0.0)).norm() < 1e-14 || (z + Complex64::new(a, 0.0)).norm() < 1e-14 {
        return Err(Error::Pole(format!("uniform transform pole at z = {z}")));
    }
    let w_plus = Complex64::new(a, 0.0) - z;
    let w_minus = Complex64::new(-a, 0.0) - z;
    if k == 1 {
        let l1 = w_plus.ln();
        let mut l2 = w_minus.ln();
        if z.re > -a && z.im <= 0.0 {
            l2 -= Complex64::new(0.0, 2.0 * PI);
        }
        Ok((l1 - l2) / (2.0 * a))
    } else {
        let p = -(k as i32 - 1);
        let v = w_minus.powi(p) - w_plus.powi(p);
        Ok(v / (2.0 * a * (k as f64 - 1.0)))
    }
}

/// `s_k` on the upper half-plane, straight from the defining integral.
pub fn s_upper(law: &SingleSiteLaw, k: u32, z: Complex64) -> Result<Complex64> {
    if k == 0 {
        return Err(Error::TransformIndex);
    }
    if !(z.im > 0.0) {
        return Err(Error::Domain(format!("s_upper needs Im z > 0, got z = {z}")));
    }
    match law {
        SingleSiteLaw::Uniform { half_width } => s_uniform_closed(k, z, *half_width),
        SingleSiteLaw::Generic {
            density,
            outside,
            support,
            ..
        } => {
            // The density carries its own domain when tabulated; integrate
            // over the declared support intersected with that domain.
            let (lo, hi) = match density {
                Density::Chebyshev { lo, hi, .. } => (*lo, *hi),
                Density::Constant(_) => *support,
            };
            let mut val = integrate_real_segment(
                |t| density.eval(Complex64::new(t, 0.0)) * inv_pow(Complex64::new(t, 0.0) - z, k),
                lo,
                hi,
            )?;
            for m in outside {
                val += m.w * inv_pow(Complex64::new(m.t, 0.0) - z, k);
            }
            Ok(val)
        }
    }
}

/// Value of the unique holomorphic continuation of `s_k` from the upper
/// half-plane to the stadium `Omega_delta(I)`; `Im z <= 0` is allowed.
pub fn s_continued(
    law: &SingleSiteLaw,
    k: u32,
    z: Complex64,
    window: &AnalyticWindow,
) -> Result<Complex64> {
    if k == 0 {
        return Err(Error::TransformIndex);
    }
    if !window.contains(z) {
        return Err(Error::Domain(format!(
            "z = {z} outside Omega_delta(I), dist = {:.3e} >= delta = {}",
            window.dist_to_i(z),
            window.delta()
        )));
    }
    match law {
        SingleSiteLaw::Uniform { half_width } => s_uniform_closed(k, z, *half_width),
        SingleSiteLaw::Generic {
            density, outside, ..
        } => {
            let contour = integrate_eta_refined(window, |w| {
                density.eval(w) * inv_pow(w - z, k)
            })?;
            let mut val = contour;
            for m in outside {
                val += m.w * inv_pow(Complex64::new(m.t, 0.0) - z, k);
            }
            Ok(val)
        }
    }
}

/// The uniform-in-k bound `C_delta (delta0 - delta)^{-k}` on
/// `|s_k|` over `Omega_delta(I)`. The boolean is false when `sup |rho|` on
/// `eta` had to be estimated by sampling.
pub fn sk_bound(law: &SingleSiteLaw, window: &AnalyticWindow, k: u32) -> Result<(f64, bool)> {
    if k == 0 {
        return Err(Error::TransformIndex);
    }
    let (c_delta, rigorous) = c_delta(law, window);
    let gap = window.delta0() - window.delta();
    Ok((c_delta * gap.powi(-(k as i32)), rigorous))
}

/// `C_delta = 1 + length(eta) * sup_eta |rho|`; independent of `k`.
pub fn c_delta(law: &SingleSiteLaw, window: &AnalyticWindow) -> (f64, bool) {
    let (sup, rigorous) = law.density_bound_on_eta(window);
    (1.0 + window.eta_length() * sup, rigorous)
}

/// Uniform law on `[-a, a]` represented through the generic machinery:
/// constant density on `I_sharp`, and the two leftover segments of
/// `[-a, a] \ I_sharp` as fixed Gauss-Legendre node handles.
pub fn uniform_as_generic(half_width: f64, window: &AnalyticWindow) -> Result<SingleSiteLaw> {
    let a = half_width;
    let (lo, hi) = window.i_sharp();
    if lo <= -a || hi >= a {
        return Err(Error::Law(format!(
            "I_sharp = ({lo}, {hi}) must be strictly inside (-{a}, {a})"
        )));
    }
    let rho = 1.0 / (2.0 * a);
    let mut outside = Vec::new();
    let rule = gauss_legendre(64);
    let (xs, ws) = (&rule.0, &rule.1);
    for (seg_lo, seg_hi) in [(-a, lo), (hi, a)] {
        let half = 0.5 * (seg_hi - seg_lo);
        let mid = 0.5 * (seg_hi + seg_lo);
        for (&x, &w) in xs.iter().zip(ws.iter()) {
            outside.push(OutsideMass {
                t: mid + half * x,
                w: w * half * rho,
            });
        }
    }
    Ok(SingleSiteLaw::Generic {
        density: Density::Constant(rho),
        outside,
        support: (-a, a),
        density_bound_on_eta: Some(rho),
    })
}

fn inv_pow(w: Complex64, k: u32) -> Complex64 {
    w.powi(-(k as i32))
}

/// Contour integral with node-doubling refinement: geometric convergence is
/// expected since the integrand is analytic in a neighborhood of `eta`.
fn integrate_eta_refined<F: Fn(Complex64) -> Complex64>(
    window: &AnalyticWindow,
    f: F,
) -> Result<Complex64> {
    let mut nodes = 16;
    let mut prev = ContourEta::build(window, nodes)?.integrate(&f);
    loop {
        nodes *= 2;
        if nodes > QUAD_MAX_NODES {
            return Err(Error::QuadratureNonConvergence {
                achieved: f64::NAN,
                target: QUAD_TOL,
            });
        }
        let cur = ContourEta::build(window, nodes)?.integrate(&f);
        let err = (cur - prev).norm();
        if err < QUAD_TOL * cur.norm().max(1.0) {
            return Ok(cur);
        }
        if nodes == QUAD_MAX_NODES {
            return Err(Error::QuadratureNonConvergence {
                achieved: err,
                target: QUAD_TOL,
            });
        }
        prev = cur;
    }
}

/// Real-segment integral with the same doubling policy.
fn integrate_real_segment<F: Fn(f64) -> Complex64>(f: F, lo: f64, hi: f64) -> Result<Complex64> {
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let eval = |n: usize| -> Complex64 {
        let rule = gauss_legendre(n);
        rule.0
            .iter()
            .zip(rule.1.iter())
            .map(|(&x, &w)| f(mid + half * x) * (w * half))
            .sum()
    };
    let mut nodes = 16;
    let mut prev = eval(nodes);
    loop {
        nodes *= 2;
        if nodes > QUAD_MAX_NODES {
            return Err(Error::QuadratureNonConvergence {
                achieved: f64::NAN,
                target: QUAD_TOL,
            });
        }
        let cur = eval(nodes);
        let err = (cur - prev).norm();
        if err < QUAD_TOL * cur.norm().max(1.0) {
            return Ok(cur);
        }
        if nodes == QUAD_MAX_NODES {
            return Err(Error::QuadratureNonConvergence {
                achieved: err,
                target: QUAD_TOL,
            });
        }
        prev = cur;
    }
}

/// Shared Gauss-Legendre rule: `(nodes, weights)` on `[-1, 1]`.
pub type QuadratureRule = Arc<(Vec<f64>, Vec<f64>)>;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, Newton iteration on the
/// Legendre recurrence, cached per order.
pub fn gauss_legendre(n: usize) -> QuadratureRule {
    static CACHE: OnceLock<Mutex<HashMap<usize, QuadratureRule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().unwrap().get(&n) {
        return rule.clone();
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    let rule = Arc::new((nodes, weights));
    cache.lock().unwrap().insert(n, rule.clone());
    rule
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 2..=n {
        let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}
