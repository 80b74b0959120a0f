//! Independent ground truth for the averaged root Green function:
//! Monte Carlo over disorder through the cavity recursion
//! `G_v = 1 / (lambda w_v - z - sum_children G_c)` on depth-truncated trees,
//! validated against a dense linear solve on small balls.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::stieltjes::SingleSiteLaw;
use crate::{Error, Result};

/// Configuration of one Monte Carlo estimate of `m_lambda(z)`.
#[derive(Debug, Clone)]
pub struct MCConfig {
    pub q: u64,
    pub lambda: f64,
    /// Spectral parameter, strictly in the upper half-plane.
    pub z: Complex64,
    /// Truncation depth `R >= 1`; leaves use `G = 1/(lambda w - z)`.
    pub depth: u32,
    pub samples: u64,
    pub seed: u64,
    pub law: SingleSiteLaw,
    /// Optional ceiling on the reported standard error; breaching it flags
    /// the estimate rather than failing it.
    pub stderr_ceiling: Option<f64>,
}

/// Monte Carlo mean with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MCEstimate {
    pub mean: Complex64,
    /// Componentwise max of the real/imaginary standard errors.
    pub stderr: f64,
    pub samples_used: u64,
    /// `|estimate(R) - estimate(R-2)|` from a shared disorder stream;
    /// truncation diagnostic.
    pub depth_pair_gap: f64,
    /// True when the stderr ceiling was breached.
    pub stderr_flagged: bool,
}

fn sample_omega<R: Rng>(law: &SingleSiteLaw, rng: &mut R) -> Result<f64> {
    match law {
        SingleSiteLaw::Uniform { half_width } => {
            Ok(half_width * (2.0 * rng.random::<f64>() - 1.0))
        }
        SingleSiteLaw::Generic { .. } => Err(Error::McConfig(
            "disorder sampling is implemented for the uniform law only".into(),
        )),
    }
}

/// Green function of a depth-truncated forward subtree (each vertex has `q`
/// forward children), with fresh i.i.d. potential draws. Depth 1 is a leaf:
/// `G = 1/(lambda w - z)`.
///
/// Evaluation is an explicit post-order stack, not call recursion; memory is
/// `O(depth)`.
pub fn subtree_green<R: Rng>(
    q: u64,
    lambda: f64,
    z: Complex64,
    depth: u32,
    law: &SingleSiteLaw,
    rng: &mut R,
) -> Result<Complex64> {
    if depth == 0 {
        return Err(Error::McConfig("subtree depth 0 has no potential draw".into()));
    }
    if !(z.im > 0.0) {
        return Err(Error::McConfig(format!("need Im z > 0, got z = {z}")));
    }
    let leaf = |rng: &mut R| -> Result<Complex64> {
        let w = sample_omega(law, rng)?;
        Ok((Complex64::new(lambda * w, 0.0) - z).finv())
    };
    if depth == 1 {
        return leaf(rng);
    }

    struct Frame {
        base: Complex64,
        sum: Complex64,
        left: u64,
    }
    let mut stack: Vec<Frame> = Vec::with_capacity(depth as usize);
    let w = sample_omega(law, rng)?;
    stack.push(Frame {
        base: Complex64::new(lambda * w, 0.0) - z,
        sum: Complex64::new(0.0, 0.0),
        left: q,
    });
    loop {
        // Depth of the frame on top of the stack.
        let top_depth = depth - (stack.len() as u32 - 1);
        let top = stack.last_mut().expect("stack nonempty");
        if top.left > 0 {
            top.left -= 1;
            if top_depth == 2 {
                let g = leaf(rng)?;
                top.sum += g;
            } else {
                let w = sample_omega(law, rng)?;
                stack.push(Frame {
                    base: Complex64::new(lambda * w, 0.0) - z,
                    sum: Complex64::new(0.0, 0.0),
                    left: q,
                });
            }
        } else {
            let value = (top.base - top.sum).finv();
            stack.pop();
            match stack.last_mut() {
                Some(parent) => parent.sum += value,
                None => return Ok(value),
            }
        }
    }
}

/// One sample of the root Green function: the root has `q+1` independent
/// forward subtrees of depth `depth - 1`.
pub fn root_green_sample<R: Rng>(
    q: u64,
    lambda: f64,
    z: Complex64,
    depth: u32,
    law: &SingleSiteLaw,
    rng: &mut R,
) -> Result<Complex64> {
    if depth == 0 {
        return Err(Error::McConfig("root depth must be >= 1".into()));
    }
    if !(z.im > 0.0) {
        return Err(Error::McConfig(format!("need Im z > 0, got z = {z}")));
    }
    let w0 = sample_omega(law, rng)?;
    let mut denom = Complex64::new(lambda * w0, 0.0) - z;
    if depth > 1 {
        for _ in 0..=q {
            denom -= subtree_green(q, lambda, z, depth - 1, law, rng)?;
        }
    }
    Ok(denom.finv())
}

/// Depth beyond which leaf replacements are provably below `1e-13` of the
/// value scale `1/Im z`, so deeper recursion cannot change the f64 result
/// meaningfully. Falls back to the requested depth when the contraction
/// `q / (Im z)^2` is not < 1.
pub fn effective_depth(q: u64, z: Complex64, requested: u32) -> u32 {
    let im = z.im;
    if !(im > 0.0) {
        return requested;
    }
    let c = q as f64 / (im * im);
    if c >= 1.0 {
        return requested;
    }
    // Propagated truncation error <= ((q+1)/q) c^d (2/Im z); solve for
    // c^d <= 1e-13 q / (2 (q+1)).
    let target = 1e-13 * q as f64 / (2.0 * (q as f64 + 1.0));
    let d = (target.ln() / c.ln()).ceil().max(1.0) as u32;
    requested.min(d)
}

fn stream_rng(seed: u64, sample_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample_index.wrapping_add(1));
    rng
}

fn mean_at_depth(config: &MCConfig, depth: u32) -> Result<(Complex64, f64)> {
    let depth = effective_depth(config.q, config.z, depth);
    let m = config.samples;
    let mut sum = Complex64::new(0.0, 0.0);
    let mut sumsq_re = 0.0;
    let mut sumsq_im = 0.0;
    for i in 0..m {
        let mut rng = stream_rng(config.seed, i);
        let g = root_green_sample(config.q, config.lambda, config.z, depth, &config.law, &mut rng)?;
        sum += g;
        sumsq_re += g.re * g.re;
        sumsq_im += g.im * g.im;
    }
    let mean = sum / m as f64;
    let stderr = if m > 1 {
        let var_re = (sumsq_re - m as f64 * mean.re * mean.re) / (m as f64 - 1.0);
        let var_im = (sumsq_im - m as f64 * mean.im * mean.im) / (m as f64 - 1.0);
        (var_re.max(0.0) / m as f64)
            .sqrt()
            .max((var_im.max(0.0) / m as f64).sqrt())
    } else {
        f64::INFINITY
    };
    Ok((mean, stderr))
}

/// Monte Carlo estimate of `m_lambda(z) = E G(0,0;z)` over `samples`
/// independent disorder draws. Sample `i` uses RNG stream `i` of the seed,
/// so the result is reproducible independent of batching.
pub fn mc_average(config: &MCConfig) -> Result<MCEstimate> {
    if config.samples == 0 {
        return Err(Error::McConfig("need at least one sample".into()));
    }
    if config.q == 0 {
        return Err(Error::McConfig("q must be >= 1".into()));
    }
    if !(config.z.im > 0.0) {
        return Err(Error::McConfig(format!(
            "need Im z > 0 strictly, got z = {}",
            config.z
        )));
    }
    if config.depth == 0 {
        return Err(Error::McConfig("depth must be >= 1".into()));
    }
    let (mean, stderr) = mean_at_depth(config, config.depth)?;
    let depth_pair_gap = if config.depth > 2 {
        let d_full = effective_depth(config.q, config.z, config.depth);
        let d_prev = effective_depth(config.q, config.z, config.depth - 2);
        if d_prev == d_full {
            0.0
        } else {
            let (mean_prev, _) = mean_at_depth(config, config.depth - 2)?;
            (mean - mean_prev).norm()
        }
    } else {
        0.0
    };
    let stderr_flagged = config
        .stderr_ceiling
        .map(|ceiling| stderr > ceiling)
        .unwrap_or(false);
    Ok(MCEstimate {
        mean,
        stderr,
        samples_used: config.samples,
        depth_pair_gap,
        stderr_flagged,
    })
}

/// Explicitly assembled ball of the tree, vertices in BFS order from the
/// root.
#[derive(Debug, Clone)]
pub struct Ball {
    /// Forward children of each vertex.
    pub children: Vec<Vec<usize>>,
    pub vertex_count: usize,
}

/// Build the radius-`radius` ball around the root (root has `q+1`
/// neighbors, every other vertex `q` forward children).
pub fn build_ball(q: u64, radius: u32) -> Ball {
    let mut children: Vec<Vec<usize>> = vec![Vec::new()];
    let mut frontier = vec![0usize];
    for level in 0..radius {
        let fanout = if level == 0 { q + 1 } else { q };
        let mut next = Vec::new();
        for &v in &frontier {
            for _ in 0..fanout {
                let idx = children.len();
                children.push(Vec::new());
                children[v].push(idx);
                next.push(idx);
            }
        }
        frontier = next;
    }
    let vertex_count = children.len();
    Ball {
        children,
        vertex_count,
    }
}

/// `(0,0)` entry of `(A + lambda diag(w) - z)^{-1}` on a finite ball, by a
/// dense complex linear solve. Validates the recursion code path at equal
/// truncation, not the infinite-tree value.
pub fn dense_green_oracle(
    q: u64,
    radius: u32,
    lambda: f64,
    z: Complex64,
    omega: &[f64],
) -> Result<Complex64> {
    if q > 2 || radius > 3 {
        return Err(Error::McConfig(format!(
            "dense oracle capped at q <= 2, radius <= 3 (got q = {q}, radius = {radius})"
        )));
    }
    if z.im == 0.0 {
        return Err(Error::McConfig("dense oracle needs Im z != 0".into()));
    }
    let ball = build_ball(q, radius);
    let n = ball.vertex_count;
    if omega.len() != n {
        return Err(Error::McConfig(format!(
            "omega assignment has {} entries, ball has {n} vertices",
            omega.len()
        )));
    }
    // Row-major (A + lambda diag(omega) - z).
    let mut mat = vec![Complex64::new(0.0, 0.0); n * n];
    for v in 0..n {
        mat[v * n + v] = Complex64::new(lambda * omega[v], 0.0) - z;
        for &c in &ball.children[v] {
            mat[v * n + c] = Complex64::new(1.0, 0.0);
            mat[c * n + v] = Complex64::new(1.0, 0.0);
        }
    }
    let mut rhs = vec![Complex64::new(0.0, 0.0); n];
    rhs[0] = Complex64::new(1.0, 0.0);

    // Gaussian elimination with partial pivoting.
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| {
                mat[a * n + col]
                    .norm()
                    .partial_cmp(&mat[b * n + col].norm())
                    .unwrap()
            })
            .unwrap();
        if mat[pivot * n + col].norm() == 0.0 {
            return Err(Error::McConfig("singular ball system".into()));
        }
        if pivot != col {
            for j in 0..n {
                mat.swap(col * n + j, pivot * n + j);
            }
            rhs.swap(col, pivot);
        }
        let diag = mat[col * n + col];
        for row in col + 1..n {
            let factor = mat[row * n + col] / diag;
            if factor.norm() == 0.0 {
                continue;
            }
            for j in col..n {
                let v = mat[col * n + j];
                mat[row * n + j] -= factor * v;
            }
            let r = rhs[col];
            rhs[row] -= factor * r;
        }
    }
    for col in (0..n).rev() {
        let mut acc = rhs[col];
        for j in col + 1..n {
            acc -= mat[col * n + j] * rhs[j];
        }
        rhs[col] = acc / mat[col * n + col];
    }
    Ok(rhs[0])
}

/// Cavity recursion on the same finite ball with the same frozen disorder:
/// must agree with [`dense_green_oracle`] to machine precision.
pub fn frozen_recursion_green(
    q: u64,
    radius: u32,
    lambda: f64,
    z: Complex64,
    omega: &[f64],
) -> Result<Complex64> {
    let ball = build_ball(q, radius);
    if omega.len() != ball.vertex_count {
        return Err(Error::McConfig(format!(
            "omega assignment has {} entries, ball has {} vertices",
            omega.len(),
            ball.vertex_count
        )));
    }
    fn subtree(ball: &Ball, v: usize, lambda: f64, z: Complex64, omega: &[f64]) -> Complex64 {
        let mut denom = Complex64::new(lambda * omega[v], 0.0) - z;
        for &c in &ball.children[v] {
            denom -= subtree(ball, c, lambda, z, omega);
        }
        denom.finv()
    }
    Ok(subtree(&ball, 0, lambda, z, omega))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn uniform() -> SingleSiteLaw {
        SingleSiteLaw::uniform(1.0).unwrap()
    }

    fn config(samples: u64, seed: u64) -> MCConfig {
        MCConfig {
            q: 2,
            lambda: 20.0,
            z: Complex64::new(4.0, 8.0),
            depth: 20,
            samples,
            seed,
            law: uniform(),
            stderr_ceiling: None,
        }
    }

    #[test]
    fn leaf_formula_at_depth_one() {
        let law = uniform();
        let mut rng = stream_rng(1, 0);
        let g = subtree_green(2, 5.0, Complex64::new(0.0, 1.0), 1, &law, &mut rng).unwrap();
        let mut rng2 = stream_rng(1, 0);
        let w = sample_omega(&law, &mut rng2).unwrap();
        let want = (Complex64::new(5.0 * w, 0.0) - Complex64::new(0.0, 1.0)).finv();
        assert_eq!(g, want);
    }

    #[test]
    fn herglotz_and_resolvent_bound_on_samples() {
        let law = uniform();
        let z = Complex64::new(0.5, 0.7);
        for i in 0..10_000u64 {
            let mut rng = stream_rng(3, i);
            let g = subtree_green(2, 3.0, z, 6, &law, &mut rng).unwrap();
            assert!(g.im > 0.0);
            assert!(g.norm() <= 1.0 / z.im + 1e-12);
            let mut rng = stream_rng(4, i);
            let g0 = root_green_sample(2, 3.0, z, 6, &law, &mut rng).unwrap();
            assert!(g0.im > 0.0);
            assert!(g0.norm() <= 1.0 / z.im + 1e-12);
        }
    }

    #[test]
    fn large_disorder_reduces_to_the_single_site_term() {
        let law = uniform();
        let z = Complex64::new(0.3, 1.0);
        let lambda = 1e6;
        for i in 0..50u64 {
            let mut rng = stream_rng(9, i);
            let g = root_green_sample(2, lambda, z, 8, &law, &mut rng).unwrap();
            let mut rng2 = stream_rng(9, i);
            let w0 = sample_omega(&law, &mut rng2).unwrap();
            let single = (Complex64::new(lambda * w0, 0.0) - z).finv();
            assert!(
                (g - single).norm() / single.norm() <= 1e-4,
                "sample {i}: {g} vs {single}"
            );
        }
    }

    #[test]
    fn ball_sizes_match_tree_geometry() {
        let ball = build_ball(2, 3);
        assert_eq!(ball.vertex_count, 22);
        let ball = build_ball(1, 4);
        assert_eq!(ball.vertex_count, 9);
    }

    #[test]
    fn dense_solve_radius_one_star() {
        // q = 2, all omega = 0, z = 2i: G = 1/(-z - 3/(-z)) = 2i/7.
        let z = Complex64::new(0.0, 2.0);
        let g = dense_green_oracle(2, 1, 1.0, z, &[0.0; 4]).unwrap();
        let want = (-z - 3.0 * (-z).finv()).finv();
        assert!((g - want).norm() < 1e-14);
        assert_abs_diff_eq!(g.re, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(g.im, 2.0 / 7.0, epsilon = 1e-14);
    }

    #[test]
    fn dense_solve_single_vertex() {
        let z = Complex64::new(0.1, 0.5);
        let g = dense_green_oracle(1, 0, 3.0, z, &[0.25]).unwrap();
        let want = (Complex64::new(0.75, 0.0) - z).finv();
        assert!((g - want).norm() < 1e-15);
    }

    #[test]
    fn recursion_matches_dense_solve_on_frozen_balls() {
        use rand::Rng;
        let mut rng = stream_rng(17, 0);
        for q in 1..=2u64 {
            for radius in 0..=3u32 {
                let n = build_ball(q, radius).vertex_count;
                let omega: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let z = Complex64::new(0.2, 0.9);
                let dense = dense_green_oracle(q, radius, 2.5, z, &omega).unwrap();
                let rec = frozen_recursion_green(q, radius, 2.5, z, &omega).unwrap();
                assert!(
                    (dense - rec).norm() / dense.norm() <= 1e-12,
                    "q = {q}, radius = {radius}"
                );
            }
        }
    }

    #[test]
    fn dense_oracle_caps() {
        let z = Complex64::new(0.0, 1.0);
        assert!(dense_green_oracle(3, 1, 1.0, z, &[0.0; 5]).is_err());
        assert!(dense_green_oracle(2, 4, 1.0, z, &[0.0; 46]).is_err());
    }

    #[test]
    fn seed_determinism_is_bit_exact() {
        let a = mc_average(&config(500, 42)).unwrap();
        let b = mc_average(&config(500, 42)).unwrap();
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.stderr, b.stderr);
        let c = mc_average(&config(500, 43)).unwrap();
        assert_ne!(a.mean, c.mean);
    }

    #[test]
    fn stderr_scales_like_inverse_sqrt_samples() {
        let base = mc_average(&config(2_000, 5)).unwrap();
        let doubled = mc_average(&config(4_000, 5)).unwrap();
        let quadrupled = mc_average(&config(8_000, 5)).unwrap();
        let ratio2 = doubled.stderr / base.stderr;
        assert!((0.6..=0.85).contains(&ratio2), "doubling ratio {ratio2}");
        let ratio4 = quadrupled.stderr / base.stderr;
        assert!((0.35..=0.65).contains(&ratio4), "4x ratio {ratio4}");
    }

    #[test]
    fn effective_depth_only_caps_contractive_regimes() {
        // Strong contraction: the cap engages well below the request.
        let d = effective_depth(2, Complex64::new(4.0, 8.0), 20);
        assert!(d < 20, "d = {d}");
        // Weak imaginary part: full requested depth.
        assert_eq!(effective_depth(2, Complex64::new(0.0, 1.0), 12), 12);
    }

    #[test]
    fn depth_gap_is_negligible_at_strong_imaginary_part() {
        let mut cfg = config(300, 7);
        cfg.depth = 20;
        let est = mc_average(&cfg).unwrap();
        assert!(est.depth_pair_gap <= est.stderr.max(1e-12));
    }

    #[test]
    fn stderr_ceiling_flags_but_does_not_fail() {
        let mut cfg = config(50, 1);
        cfg.stderr_ceiling = Some(1e-12);
        let est = mc_average(&cfg).unwrap();
        assert!(est.stderr_flagged);
        cfg.stderr_ceiling = Some(1.0);
        assert!(!mc_average(&cfg).unwrap().stderr_flagged);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = config(10, 1);
        cfg.z = Complex64::new(1.0, 0.0);
        assert!(mc_average(&cfg).is_err());
        let mut cfg = config(10, 1);
        cfg.depth = 0;
        assert!(mc_average(&cfg).is_err());
        let mut cfg = config(0, 1);
        cfg.samples = 0;
        assert!(mc_average(&cfg).is_err());
    }
}
