//! Cross-module invariant checks, runnable as a single battery. Each check
//! is named, independent, and reports pass/fail with a short detail string;
//! the CLI `verify` subcommand prints one line per check and fails if any
//! check fails.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{LawSpec, TableFile, WindowSpec};
use crate::expansion::{remainder_budget, Expansion, ExpansionParams};
use crate::oracle::{
    build_ball, dense_green_oracle, frozen_recursion_green, mc_average, MCConfig,
};
use crate::stieltjes::{
    s_continued, s_uniform_closed, s_upper, uniform_as_generic, AnalyticWindow, SingleSiteLaw,
};
use crate::treewalk::{brute_force_walks, count_closed_walks, CoefficientTable};

/// Outcome of one named invariant check.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(
    name: &'static str,
    body: impl FnOnce() -> Result<String, String>,
) -> CheckResult {
    match body() {
        Ok(detail) => CheckResult {
            name,
            passed: true,
            detail,
        },
        Err(detail) => CheckResult {
            name,
            passed: false,
            detail,
        },
    }
}

fn standard_window() -> AnalyticWindow {
    AnalyticWindow::new(-0.5, 0.5, 0.3, 0.15).expect("valid window")
}

/// Run the full battery of invariant checks.
pub fn run_all_checks() -> Vec<CheckResult> {
    let mut results = Vec::new();

    results.push(check("odd-orders-vanish", || {
        let table = CoefficientTable::build(15).map_err(|e| e.to_string())?;
        for n in (1..=15).step_by(2) {
            if !table.row(n).is_empty() {
                return Err(format!("order {n} has classes on a bipartite tree"));
            }
        }
        Ok("orders 1..=15: every odd row empty".into())
    }));

    results.push(check("counts-match-brute-force", || {
        for q in 1..=2u64 {
            for n in (0..=8usize).step_by(2) {
                let symbolic = count_closed_walks(n, q).map_err(|e| e.to_string())?;
                let brute = brute_force_walks(n, q).map_err(|e| e.to_string())?.len();
                if symbolic != brute.into() {
                    return Err(format!("n = {n}, q = {q}: {symbolic} vs {brute}"));
                }
            }
        }
        Ok("q in {1, 2}, n <= 8: symbolic counts equal explicit enumeration".into())
    }));

    results.push(check("line-counts-are-central-binomials", || {
        let mut binom = 1u128;
        for m in 0..=6u32 {
            let n = 2 * m as usize;
            let count = count_closed_walks(n, 1).map_err(|e| e.to_string())?;
            if count != binom.into() {
                return Err(format!("n = {n}: {count} vs C(2m, m) = {binom}"));
            }
            binom = binom * (2 * m as u128 + 1) * (2 * m as u128 + 2)
                / ((m as u128 + 1) * (m as u128 + 1));
        }
        Ok("q = 1 closed-walk counts are central binomial coefficients".into())
    }));

    results.push(check("count-polynomials-nonnegative-at-integers", || {
        let table = CoefficientTable::build(10).map_err(|e| e.to_string())?;
        for (n, classes) in table.rows() {
            for (profile, poly) in classes {
                for q in 1..=8u64 {
                    poly.eval_count(q).map_err(|_| {
                        format!(
                            "order {n}, profile {:?} evaluates negative at q = {q}",
                            profile.display_list()
                        )
                    })?;
                }
            }
        }
        Ok("orders <= 10, q <= 8: every class count evaluates nonnegative".into())
    }));

    results.push(check("s1-is-herglotz", || {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let z = Complex64::new(rng.random_range(-3.0..3.0), rng.random_range(0.01..3.0));
            let s = s_uniform_closed(1, z, 1.0).map_err(|e| e.to_string())?;
            if !(s.im > 0.0) {
                return Err(format!("Im s_1({z}) = {} <= 0", s.im));
            }
        }
        Ok("500 random upper-half-plane points: Im s_1 > 0".into())
    }));

    results.push(check("contour-matches-closed-forms", || {
        let window = standard_window();
        let generic = uniform_as_generic(1.0, &window).map_err(|e| e.to_string())?;
        let mut worst = 0.0f64;
        for k in 1..=4u32 {
            for &z in &[
                Complex64::new(0.2, 0.1),
                Complex64::new(-0.3, -0.08),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.45, 0.05),
            ] {
                let closed = s_continued(&SingleSiteLaw::uniform(1.0).unwrap(), k, z, &window)
                    .map_err(|e| e.to_string())?;
                let contour = s_continued(&generic, k, z, &window).map_err(|e| e.to_string())?;
                worst = worst.max((closed - contour).norm());
            }
        }
        if worst > 1e-8 {
            return Err(format!("worst contour-vs-closed gap {worst:.3e} > 1e-8"));
        }
        Ok(format!("k <= 4 over window sample: worst gap {worst:.3e}"))
    }));

    results.push(check("continuation-jump-identity", || {
        // Across the cut, s_k(continued) - s_k(reflected from above) equals
        // 2 pi i rho^(k-1)(z) / (k-1)!. For the uniform law on [-1, 1] and
        // k = 1 this is i pi.
        let window = standard_window();
        let law = SingleSiteLaw::uniform(1.0).unwrap();
        let z = Complex64::new(0.1, -0.08);
        let below = s_continued(&law, 1, z, &window).map_err(|e| e.to_string())?;
        let reflected = s_upper(&law, 1, z.conj()).map_err(|e| e.to_string())?.conj();
        let jump = below - reflected;
        let want = Complex64::new(0.0, std::f64::consts::PI);
        let gap = (jump - want).norm();
        if gap > 1e-12 {
            return Err(format!("jump {jump} differs from i*pi by {gap:.3e}"));
        }
        Ok(format!("jump across the cut equals 2 pi i rho within {gap:.3e}"))
    }));

    results.push(check("dos-leading-terms", || {
        let window = standard_window();
        let law = SingleSiteLaw::uniform(1.0).unwrap();
        let expansion = Expansion::new(ExpansionParams {
            q: 2,
            lambda: 200.0,
            order: 4,
            window,
            law,
        })
        .map_err(|e| e.to_string())?;
        let mut worst = 0.0f64;
        for &xi in &[-0.4, -0.1, 0.0, 0.25, 0.45] {
            let a0 = expansion.dos_coefficient(0, xi).map_err(|e| e.to_string())?;
            let a2 = expansion.dos_coefficient(2, xi).map_err(|e| e.to_string())?;
            worst = worst.max((a0 - 0.5).abs());
            worst = worst.max((a2 - (-3.0 / (2.0 * (1.0 - xi * xi)))).abs());
        }
        if worst > 1e-9 {
            return Err(format!("worst leading-term error {worst:.3e} > 1e-9"));
        }
        Ok(format!("a_0 = 1/(2a), a_2 = -(q+1)/(2a(a^2-xi^2)) within {worst:.3e}"))
    }));

    results.push(check("remainder-bound-valid-above-threshold", || {
        let window = standard_window();
        let law = SingleSiteLaw::uniform(1.0).unwrap();
        let budget = remainder_budget(&window, 2, &law, 1);
        let z = Complex64::new(0.1, 0.0);
        for mult in [2.0, 4.0, 8.0] {
            let lambda = mult * budget.lambda0;
            let coarse = Expansion::new(ExpansionParams {
                q: 2,
                lambda,
                order: 1,
                window,
                law: law.clone(),
            })
            .map_err(|e| e.to_string())?;
            let fine = Expansion::new(ExpansionParams {
                q: 2,
                lambda,
                order: 9,
                window,
                law: law.clone(),
            })
            .map_err(|e| e.to_string())?;
            let a = coarse.m_partial(z).map_err(|e| e.to_string())?;
            let b = fine.m_partial(z).map_err(|e| e.to_string())?;
            let actual = (a.value - b.value).norm();
            if !a.rigorous {
                return Err(format!("lambda = {lambda}: bound not rigorous above lambda0"));
            }
            if actual > a.remainder_bound {
                return Err(format!(
                    "lambda = {lambda}: observed tail {actual:.3e} exceeds bound {:.3e}",
                    a.remainder_bound
                ));
            }
        }
        Ok("lambda in {2, 4, 8} x lambda0: observed tail within the stated bound".into())
    }));

    results.push(check("mc-herglotz-and-resolvent-bound", || {
        let cfg = MCConfig {
            q: 2,
            lambda: 5.0,
            z: Complex64::new(0.3, 0.8),
            depth: 8,
            samples: 2_000,
            seed: 23,
            law: SingleSiteLaw::uniform(1.0).unwrap(),
            stderr_ceiling: None,
        };
        let est = mc_average(&cfg).map_err(|e| e.to_string())?;
        if !(est.mean.im > 0.0) {
            return Err(format!("Im mean = {} <= 0", est.mean.im));
        }
        if est.mean.norm() > 1.0 / cfg.z.im {
            return Err(format!(
                "|mean| = {} exceeds 1/Im z = {}",
                est.mean.norm(),
                1.0 / cfg.z.im
            ));
        }
        Ok(format!(
            "mean {} is Herglotz and within the resolvent bound",
            est.mean
        ))
    }));

    results.push(check("recursion-matches-dense-solve", || {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut worst = 0.0f64;
        for q in 1..=2u64 {
            for radius in 0..=3u32 {
                let n = build_ball(q, radius).vertex_count;
                let omega: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let z = Complex64::new(0.15, 0.6);
                let dense =
                    dense_green_oracle(q, radius, 1.7, z, &omega).map_err(|e| e.to_string())?;
                let rec = frozen_recursion_green(q, radius, 1.7, z, &omega)
                    .map_err(|e| e.to_string())?;
                worst = worst.max((dense - rec).norm() / dense.norm());
            }
        }
        if worst > 1e-12 {
            return Err(format!("worst relative gap {worst:.3e} > 1e-12"));
        }
        Ok(format!(
            "q <= 2, radius <= 3 frozen balls: worst relative gap {worst:.3e}"
        ))
    }));

    results.push(check("mc-seed-determinism", || {
        let cfg = MCConfig {
            q: 2,
            lambda: 20.0,
            z: Complex64::new(4.0, 8.0),
            depth: 20,
            samples: 400,
            seed: 42,
            law: SingleSiteLaw::uniform(1.0).unwrap(),
            stderr_ceiling: None,
        };
        let a = mc_average(&cfg).map_err(|e| e.to_string())?;
        let b = mc_average(&cfg).map_err(|e| e.to_string())?;
        if a.mean != b.mean || a.stderr != b.stderr {
            return Err("repeated run with identical seed differs".into());
        }
        Ok("identical seed reproduces the estimate bit-for-bit".into())
    }));

    results.push(check("config-round-trips", || {
        let law = LawSpec::Uniform { a: 1.0 };
        let law_json = serde_json::to_string(&law).map_err(|e| e.to_string())?;
        let law_back: LawSpec = serde_json::from_str(&law_json).map_err(|e| e.to_string())?;
        if law_back != law {
            return Err("law spec did not round-trip".into());
        }
        let window = WindowSpec::from_window(&standard_window());
        let window_json = serde_json::to_string(&window).map_err(|e| e.to_string())?;
        let window_back: WindowSpec =
            serde_json::from_str(&window_json).map_err(|e| e.to_string())?;
        if window_back != window {
            return Err("window spec did not round-trip".into());
        }
        let table = CoefficientTable::build(8).map_err(|e| e.to_string())?;
        let file = TableFile::from_table(&table).map_err(|e| e.to_string())?;
        let json = serde_json::to_string(&file).map_err(|e| e.to_string())?;
        let parsed: TableFile = serde_json::from_str(&json).map_err(|e| e.to_string())?;
        if parsed.to_table().row(8) != table.row(8) {
            return Err("coefficient table did not round-trip".into());
        }
        Ok("law, window, and table JSON round-trip exactly".into())
    }));

    results
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_invariant_checks_pass() {
        let results = run_all_checks();
        assert!(!results.is_empty());
        for r in &results {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }
}
