//! The strong-disorder expansion of the scaled averaged resolvent and of the
//! density of states.
//!
//! `m_lambda(lambda z) = sum_n lambda^{-n-1} M_n(z) + remainder`, where each
//! coefficient `M_n` is a finite sum over walk classes of products of
//! single-site transforms, and the density coefficients are
//! `a_n(xi) = Im M_n(xi) / pi`. Remainder budgets follow the explicit
//! constants `K_delta`, `Q_delta`, `lambda_0`, `C_{N,delta}`.

use num_complex::Complex64;

use crate::stieltjes::{self, AnalyticWindow, SingleSiteLaw};
use crate::treewalk::{CoefficientTable, WalkClass};
use crate::{Error, Result};

/// Parameters of one expansion run.
#[derive(Debug, Clone)]
pub struct ExpansionParams {
    /// Branching number; `q >= 2` is the Bethe lattice proper, `q = 1` the
    /// line (permitted for testing).
    pub q: u64,
    /// Disorder strength `lambda > 0`.
    pub lambda: f64,
    /// Truncation order `N`.
    pub order: usize,
    pub window: AnalyticWindow,
    pub law: SingleSiteLaw,
}

/// The explicit constants of the remainder analysis.
///
/// `K_delta = max(1, C_delta) / (delta0 - delta)`, `Q_delta = (q+1) K_delta`,
/// `lambda_0 = max(2 Q_delta, 2(q+1)/delta)`, and
/// `C_{N,delta} = 2 K_delta Q_delta^{N+1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemainderBudget {
    pub c_delta: f64,
    pub k_delta: f64,
    pub q_delta: f64,
    pub lambda0: f64,
    pub c_n_delta: f64,
    /// False when `sup |rho|` on the contour was estimated by sampling.
    pub rigorous_constants: bool,
}

/// Compute the remainder budget for truncation order `N`, using the
/// elementary adjacency bound `||A|| <= q + 1`.
pub fn remainder_budget(
    window: &AnalyticWindow,
    q: u64,
    law: &SingleSiteLaw,
    order: usize,
) -> RemainderBudget {
    remainder_budget_with_norm(window, q, law, order, false)
}

/// Remainder budget with a choice of adjacency norm. `sharp_norm` replaces
/// the elementary bound `q + 1` by the spectral norm `2 sqrt(q)` throughout;
/// the constants then shrink, but the derivation no longer covers them, so
/// the budget is marked non-rigorous.
pub fn remainder_budget_with_norm(
    window: &AnalyticWindow,
    q: u64,
    law: &SingleSiteLaw,
    order: usize,
    sharp_norm: bool,
) -> RemainderBudget {
    let (c_delta, mut rigorous_constants) = stieltjes::c_delta(law, window);
    let a_norm = if sharp_norm {
        rigorous_constants = false;
        2.0 * (q as f64).sqrt()
    } else {
        q as f64 + 1.0
    };
    let gap = window.delta0() - window.delta();
    let k_delta = c_delta.max(1.0) / gap;
    let q_delta = a_norm * k_delta;
    let lambda0 = (2.0 * q_delta).max(2.0 * a_norm / window.delta());
    let c_n_delta = 2.0 * k_delta * q_delta.powi(order as i32 + 1);
    RemainderBudget {
        c_delta,
        k_delta,
        q_delta,
        lambda0,
        c_n_delta,
        rigorous_constants,
    }
}

/// One density value with its expansion terms and rigorous truncation bound.
#[derive(Debug, Clone, PartialEq)]
pub struct DosValue {
    pub xi: f64,
    /// `a_n(xi) lambda^{-n-1}` for `n = 0..=N`; odd entries are exactly zero.
    pub terms: Vec<f64>,
    pub value: f64,
    /// `C_{N,delta} lambda^{-N-2} / pi`.
    pub remainder_bound: f64,
    /// True when `lambda >= lambda_0` and the budget constants are rigorous.
    pub rigorous: bool,
}

/// One truncated resolvent value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartialSum {
    pub value: Complex64,
    /// `C_{N,delta} lambda^{-N-2}`.
    pub remainder_bound: f64,
    pub rigorous: bool,
}

/// Transform dispatch: continued values inside the stadium, the defining
/// integral elsewhere in the upper half-plane.
pub fn transform(
    law: &SingleSiteLaw,
    window: &AnalyticWindow,
    k: u32,
    z: Complex64,
) -> Result<Complex64> {
    if window.contains(z) {
        stieltjes::s_continued(law, k, z, window)
    } else if z.im > 0.0 {
        stieltjes::s_upper(law, k, z)
    } else {
        Err(Error::Domain(format!(
            "z = {z} neither in Omega_delta(I) nor in the upper half-plane"
        )))
    }
}

/// `s_1, ..., s_kmax` at one point, evaluated once and shared across all
/// monomials of all orders.
fn transforms_at(
    law: &SingleSiteLaw,
    window: &AnalyticWindow,
    z: Complex64,
    k_max: u32,
) -> Result<Vec<Complex64>> {
    (1..=k_max).map(|k| transform(law, window, k, z)).collect()
}

fn eval_row(row: &[(Vec<(u32, u32)>, f64)], sign: f64, s: &[Complex64]) -> Complex64 {
    let mut total = Complex64::new(0.0, 0.0);
    for (profile, count) in row {
        let mut monomial = Complex64::new(*count, 0.0);
        for &(k, m) in profile {
            monomial *= s[k as usize - 1].powi(m as i32);
        }
        total += monomial;
    }
    sign * total
}

/// Coefficient function `M_n(z)` from a walk-class table row:
/// `(-1)^n sum_classes count(q) prod_k s_k(z)^{m_k}`.
pub fn m_n(
    row: &[WalkClass],
    law: &SingleSiteLaw,
    window: &AnalyticWindow,
    q: u64,
    z: Complex64,
) -> Result<Complex64> {
    if row.is_empty() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let n = (row[0].0.total_visits() - 1) as usize;
    let k_max = row
        .iter()
        .flat_map(|(p, _)| p.iter().map(|(k, _)| k))
        .max()
        .unwrap_or(1);
    let s = transforms_at(law, window, z, k_max)?;
    let prepared: PreparedRow = row
        .iter()
        .map(|(p, poly)| (p.iter().collect(), poly.eval_f64(q)))
        .collect();
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok(eval_row(&prepared, sign, &s))
}

/// One table row prepared for numeric evaluation: per class, the profile as
/// `(k, m_k)` pairs and `count(q)` as f64.
type PreparedRow = Vec<(Vec<(u32, u32)>, f64)>;

/// A prepared expansion: walk-class table and counts evaluated once, then
/// reused across every evaluation point.
#[derive(Debug, Clone)]
pub struct Expansion {
    params: ExpansionParams,
    budget: RemainderBudget,
    /// Per order `n`: class profiles and `count(q)` as f64.
    rows: Vec<PreparedRow>,
}

impl Expansion {
    pub fn new(params: ExpansionParams) -> Result<Self> {
        if !(params.lambda > 0.0) {
            return Err(Error::Domain(format!(
                "lambda must be positive, got {}",
                params.lambda
            )));
        }
        if params.q == 0 {
            return Err(Error::Domain("q must be >= 1".into()));
        }
        params.law.validate(&params.window)?;
        let table = CoefficientTable::build(params.order)?;
        let rows = (0..=params.order)
            .map(|n| {
                table
                    .row(n)
                    .iter()
                    .map(|(p, poly)| (p.iter().collect(), poly.eval_f64(params.q)))
                    .collect()
            })
            .collect();
        let budget = remainder_budget(&params.window, params.q, &params.law, params.order);
        Ok(Expansion {
            params,
            budget,
            rows,
        })
    }

    pub fn params(&self) -> &ExpansionParams {
        &self.params
    }

    pub fn budget(&self) -> &RemainderBudget {
        &self.budget
    }

    /// `M_n(z)` for `n <= N`.
    pub fn coefficient(&self, n: usize, z: Complex64) -> Result<Complex64> {
        let row = self.rows.get(n).ok_or_else(|| {
            Error::Domain(format!("order {n} beyond prepared table (N = {})", self.params.order))
        })?;
        if row.is_empty() {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let s = transforms_at(&self.params.law, &self.params.window, z, n as u32 + 1)?;
        let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
        Ok(eval_row(row, sign, &s))
    }

    /// Truncated expansion `sum_{n<=N} lambda^{-n-1} M_n(z)` with its
    /// remainder bound.
    pub fn m_partial(&self, z: Complex64) -> Result<PartialSum> {
        let lambda = self.params.lambda;
        let s = transforms_at(
            &self.params.law,
            &self.params.window,
            z,
            self.params.order as u32 + 1,
        )?;
        let mut value = Complex64::new(0.0, 0.0);
        for (n, row) in self.rows.iter().enumerate() {
            if row.is_empty() {
                continue;
            }
            let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
            value += lambda.powi(-(n as i32) - 1) * eval_row(row, sign, &s);
        }
        Ok(PartialSum {
            value,
            remainder_bound: self.budget.c_n_delta * lambda.powi(-(self.params.order as i32) - 2),
            rigorous: lambda >= self.budget.lambda0 && self.budget.rigorous_constants,
        })
    }

    fn check_xi(&self, xi: f64) -> Result<()> {
        let (lo, hi) = self.params.window.i();
        if xi <= lo || xi >= hi {
            return Err(Error::Domain(format!(
                "xi = {xi} outside the open interval I = ({lo}, {hi})"
            )));
        }
        Ok(())
    }

    /// Density coefficient `a_n(xi) = Im M_n(xi) / pi` on the boundary,
    /// through the continued transforms (no epsilon limit).
    pub fn dos_coefficient(&self, n: usize, xi: f64) -> Result<f64> {
        self.check_xi(xi)?;
        let m = self.coefficient(n, Complex64::new(xi, 0.0))?;
        Ok(m.im / std::f64::consts::PI)
    }

    /// Assembled density value `n_lambda(lambda xi)` at order `N`.
    pub fn dos_density(&self, xi: f64) -> Result<DosValue> {
        self.check_xi(xi)?;
        let lambda = self.params.lambda;
        let s = transforms_at(
            &self.params.law,
            &self.params.window,
            Complex64::new(xi, 0.0),
            self.params.order as u32 + 1,
        )?;
        let mut terms = Vec::with_capacity(self.params.order + 1);
        for (n, row) in self.rows.iter().enumerate() {
            if row.is_empty() {
                terms.push(0.0);
                continue;
            }
            let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
            let a_n = eval_row(row, sign, &s).im / std::f64::consts::PI;
            terms.push(a_n * lambda.powi(-(n as i32) - 1));
        }
        let value = terms.iter().sum();
        Ok(DosValue {
            xi,
            terms,
            value,
            remainder_bound: self.budget.c_n_delta
                * lambda.powi(-(self.params.order as i32) - 2)
                / std::f64::consts::PI,
            rigorous: lambda >= self.budget.lambda0 && self.budget.rigorous_constants,
        })
    }
}

/// Guard distance from the support endpoints for the closed two-term form.
pub const TWO_TERM_EDGE_GUARD: f64 = 1e-9;

/// The explicit two-term strong-disorder expansion for the uniform law:
/// `1/(2 a lambda) - (q+1) / (2 a (a^2 - xi^2) lambda^3)`.
pub fn uniform_two_term(half_width: f64, q: u64, lambda: f64, xi: f64) -> Result<f64> {
    let a = half_width;
    if !(a > 0.0) {
        return Err(Error::Law(format!("half width must be positive, got {a}")));
    }
    if a - xi.abs() <= TWO_TERM_EDGE_GUARD * a {
        return Err(Error::Domain(format!(
            "xi = {xi} too close to the endpoint singularities at +/-{a}"
        )));
    }
    let leading = 1.0 / (2.0 * a * lambda);
    let correction = (q as f64 + 1.0) / (2.0 * a * (a * a - xi * xi) * lambda.powi(3));
    Ok(leading - correction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stieltjes::s_uniform_closed;
    use crate::treewalk::enumerate_walk_classes;
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn window() -> AnalyticWindow {
        AnalyticWindow::new(-0.5, 0.5, 0.3, 0.15).unwrap()
    }

    #[test]
    fn sharp_norm_budget_shrinks_and_is_flagged() {
        let law = SingleSiteLaw::uniform(1.0).unwrap();
        let crude = remainder_budget(&window(), 2, &law, 3);
        let sharp = remainder_budget_with_norm(&window(), 2, &law, 3, true);
        assert!(crude.rigorous_constants);
        assert!(!sharp.rigorous_constants);
        assert!(sharp.q_delta < crude.q_delta);
        assert!(sharp.lambda0 < crude.lambda0);
        assert!(sharp.c_n_delta < crude.c_n_delta);
        // Same K_delta; only the adjacency norm changed: 2 sqrt(2) vs 3.
        assert_abs_diff_eq!(
            sharp.q_delta / crude.q_delta,
            2.0 * 2.0f64.sqrt() / 3.0,
            epsilon = 1e-14
        );
    }

    fn expansion(q: u64, lambda: f64, order: usize) -> Expansion {
        Expansion::new(ExpansionParams {
            q,
            lambda,
            order,
            window: window(),
            law: SingleSiteLaw::uniform(1.0).unwrap(),
        })
        .unwrap()
    }

    #[test]
    fn m0_is_s1() {
        let e = expansion(2, 100.0, 4);
        for &z in &[
            Complex64::new(0.0, 0.0),
            Complex64::new(0.3, 0.1),
            Complex64::new(-0.2, -0.05),
        ] {
            let m0 = e.coefficient(0, z).unwrap();
            let s1 = s_uniform_closed(1, z, 1.0).unwrap();
            assert!((m0 - s1).norm() < 1e-14);
        }
    }

    #[test]
    fn m2_at_the_origin() {
        // M_2(0) = (q+1) s_2(0) s_1(0) = 3 * (-1) * (i pi / 2).
        let e = expansion(2, 100.0, 2);
        let m2 = e.coefficient(2, Complex64::new(0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(m2.re, 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(m2.im, -1.5 * PI, epsilon = 1e-13);
    }

    #[test]
    fn m2_matches_closed_form_at_random_points() {
        let w = window();
        let law = SingleSiteLaw::uniform(1.0).unwrap();
        let row2 = enumerate_walk_classes(2).unwrap();
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..100 {
            let q = rng.random_range(1..=5u64);
            let z = Complex64::new(rng.random_range(-0.6..0.6), rng.random_range(-0.1..0.5));
            if !w.contains(z) && z.im <= 0.0 {
                continue;
            }
            let got = m_n(&row2, &law, &w, q, z).unwrap();
            let s1 = transform(&law, &w, 1, z).unwrap();
            let s2 = transform(&law, &w, 2, z).unwrap();
            let want = (q as f64 + 1.0) * s2 * s1;
            assert!((got - want).norm() <= 1e-12 * want.norm().max(1.0), "q={q}, z={z}");
        }
    }

    #[test]
    fn m4_matches_the_three_term_formula() {
        let w = window();
        let law = SingleSiteLaw::uniform(1.0).unwrap();
        let row4 = enumerate_walk_classes(4).unwrap();
        let mut rng = StdRng::seed_from_u64(13);
        for _ in 0..50 {
            let q = rng.random_range(1..=5u64) as f64;
            let z = Complex64::new(rng.random_range(-0.6..0.6), rng.random_range(0.01..0.5));
            let got = m_n(&row4, &law, &w, q as u64, z).unwrap();
            let s1 = transform(&law, &w, 1, z).unwrap();
            let s2 = transform(&law, &w, 2, z).unwrap();
            let s3 = transform(&law, &w, 3, z).unwrap();
            let want = (q + 1.0) * s3 * s2
                + (q + 1.0) * q * s3 * s1 * s1
                + (q + 1.0) * q * s2 * s2 * s1;
            assert!((got - want).norm() <= 1e-12 * want.norm().max(1.0), "q={q}, z={z}");
        }
    }

    #[test]
    fn odd_orders_vanish_in_partial_sums() {
        let e = expansion(2, 50.0, 5);
        let z = Complex64::new(0.1, 0.0);
        for n in [1usize, 3, 5] {
            assert_eq!(e.coefficient(n, z).unwrap(), Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn partial_sum_examples() {
        // N = 0 is a single term lambda^{-1} s_1.
        let e = expansion(2, 50.0, 0);
        let z = Complex64::new(0.2, 0.05);
        let got = e.m_partial(z).unwrap().value;
        let want = s_uniform_closed(1, z, 1.0).unwrap() / 50.0;
        assert!((got - want).norm() < 1e-15);

        // N = 3 at the origin: two terms only.
        let e = expansion(2, 50.0, 3);
        let got = e.m_partial(Complex64::new(0.0, 0.0)).unwrap().value;
        let want = Complex64::new(0.0, PI / 2.0) / 50.0
            + Complex64::new(0.0, -1.5 * PI) / 50.0f64.powi(3);
        assert!((got - want).norm() < 1e-15);
    }

    #[test]
    fn budget_constants_match_the_worked_example() {
        let law = SingleSiteLaw::uniform(1.0).unwrap();
        let b = remainder_budget(&window(), 2, &law, 3);
        let c_delta = 1.0 + (PI * 0.3 + 1.0) * 0.5;
        assert_abs_diff_eq!(b.c_delta, c_delta, epsilon = 1e-12);
        assert_abs_diff_eq!(b.k_delta, c_delta / 0.15, epsilon = 1e-10);
        assert_abs_diff_eq!(b.q_delta, 3.0 * c_delta / 0.15, epsilon = 1e-10);
        assert!((b.k_delta - 13.14).abs() < 0.01);
        assert!((b.q_delta - 39.42).abs() < 0.01);
        assert!((b.lambda0 - 78.85).abs() < 0.01);
        assert!(b.lambda0 >= 2.0 * 3.0 / 0.15);
        assert!(b.rigorous_constants);

        let b4 = remainder_budget(&window(), 2, &law, 4);
        assert_abs_diff_eq!(b4.c_n_delta / b.c_n_delta, b.q_delta, epsilon = 1e-9);
    }

    #[test]
    fn dos_coefficients_match_the_uniform_closed_forms() {
        let e = expansion(2, 100.0, 2);
        for &xi in &[-0.4, -0.1, 0.0, 0.25, 0.45] {
            let a0 = e.dos_coefficient(0, xi).unwrap();
            assert_abs_diff_eq!(a0, 0.5, epsilon = 1e-13);
            let a2 = e.dos_coefficient(2, xi).unwrap();
            let want = -3.0 / (2.0 * (1.0 - xi * xi));
            assert_abs_diff_eq!(a2, want, epsilon = 1e-12);
        }
        // a_2(0) = -1.5 and a_2(0.5) = -2 at q = 2, a = 1.
        assert_abs_diff_eq!(e.dos_coefficient(2, 0.0).unwrap(), -1.5, epsilon = 1e-12);
        let e3 = Expansion::new(ExpansionParams {
            q: 2,
            lambda: 100.0,
            order: 2,
            window: AnalyticWindow::new(-0.6, 0.6, 0.3, 0.15).unwrap(),
            law: SingleSiteLaw::uniform(1.0).unwrap(),
        })
        .unwrap();
        assert_abs_diff_eq!(e3.dos_coefficient(2, 0.5).unwrap(), -2.0, epsilon = 1e-12);
    }

    #[test]
    fn dos_density_example_and_edge_rejection() {
        let e = expansion(2, 100.0, 3);
        let v = e.dos_density(0.0).unwrap();
        assert_abs_diff_eq!(v.value, 0.005 - 1.5e-6, epsilon = 1e-15);
        assert_eq!(v.terms.len(), 4);
        assert_eq!(v.terms[1], 0.0);
        assert_eq!(v.terms[3], 0.0);
        let b = remainder_budget(&window(), 2, &SingleSiteLaw::uniform(1.0).unwrap(), 3);
        assert_abs_diff_eq!(
            v.remainder_bound,
            b.c_n_delta * 100.0f64.powi(-5) / PI,
            epsilon = 1e-18
        );
        assert!(v.rigorous);
        assert!(e.dos_density(0.5).is_err());
        assert!(e.dos_density(-0.5).is_err());

        // Below lambda_0: exploratory mode.
        let low = expansion(2, 10.0, 3);
        assert!(!low.dos_density(0.0).unwrap().rigorous);
    }

    #[test]
    fn odd_and_even_truncation_agree_in_value() {
        let e3 = expansion(2, 90.0, 3);
        let e2 = expansion(2, 90.0, 2);
        let v3 = e3.dos_density(0.2).unwrap();
        let v2 = e2.dos_density(0.2).unwrap();
        assert_abs_diff_eq!(v3.value, v2.value, epsilon = 1e-18);
        assert!(v3.remainder_bound != v2.remainder_bound);
    }

    #[test]
    fn two_term_formula() {
        assert_abs_diff_eq!(uniform_two_term(1.0, 2, 10.0, 0.0).unwrap(), 0.0485, epsilon = 1e-15);
        assert_abs_diff_eq!(uniform_two_term(1.0, 2, 10.0, 0.5).unwrap(), 0.048, epsilon = 1e-15);
        assert!(uniform_two_term(1.0, 2, 10.0, 1.0 - 1e-12).is_err());

        // Same algebra as dos_density at N = 3.
        let e = expansion(2, 10.0, 3);
        for &xi in &[-0.45, -0.2, 0.0, 0.3, 0.49] {
            let closed = uniform_two_term(1.0, 2, 10.0, xi).unwrap();
            let assembled = e.dos_density(xi).unwrap().value;
            assert_abs_diff_eq!(closed, assembled, epsilon = 1e-12);
        }
    }

    #[test]
    fn neumann_tail_controls_truncation_differences() {
        // For Im z > (q+1)/lambda the series converges geometrically; the
        // difference of two partial sums sits inside the tail bound.
        let law = SingleSiteLaw::uniform(1.0).unwrap();
        let lambda = 500.0;
        let b = remainder_budget(&window(), 2, &law, 5);
        let z = Complex64::new(0.1, 0.05);
        assert!(z.im > 3.0 / lambda);
        let p5 = expansion(2, lambda, 5).m_partial(z).unwrap().value;
        let p9 = expansion(2, lambda, 9).m_partial(z).unwrap().value;
        let ratio = b.q_delta / lambda;
        let tail = b.k_delta / lambda * ratio.powi(6) / (1.0 - ratio);
        assert!((p9 - p5).norm() <= tail);
    }

    #[test]
    fn positivity_at_strong_disorder() {
        let e = expansion(2, 200.0, 3);
        for &xi in &[-0.45, 0.0, 0.45] {
            let v = e.dos_density(xi).unwrap();
            if 0.5 / 200.0 > 2.0 * v.remainder_bound {
                assert!(v.value > v.remainder_bound);
            }
            assert!(v.value > 0.0);
        }
    }

    #[test]
    fn invalid_params_are_rejected() {
        let bad = Expansion::new(ExpansionParams {
            q: 2,
            lambda: -1.0,
            order: 2,
            window: window(),
            law: SingleSiteLaw::uniform(1.0).unwrap(),
        });
        assert!(bad.is_err());
        let bad_q = Expansion::new(ExpansionParams {
            q: 0,
            lambda: 10.0,
            order: 2,
            window: window(),
            law: SingleSiteLaw::uniform(1.0).unwrap(),
        });
        assert!(bad_q.is_err());
    }
}
