//! Closed-walk combinatorics on the `(q+1)`-regular rooted tree.
//!
//! Walks of length `n` starting and ending at the root are grouped by
//! occupation profile (how many vertices are visited exactly `k` times).
//! Counting is done symbolically: children are labeled in first-visit order,
//! so stepping to a fresh child contributes a linear factor `q+1-u` at the
//! root and `q-u` elsewhere, where `u` is the number of children already
//! opened at that vertex. One enumeration therefore serves every `q`, and the
//! per-class walk count is an exact integer polynomial in `q`.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{One, Signed, Zero};

use crate::{Error, Result};

/// Default cap on the enumeration order; class count grows exponentially.
pub const DEFAULT_ORDER_CAP: usize = 16;

/// Caps for explicit walk listing.
pub const BRUTE_FORCE_N_CAP: usize = 12;
pub const BRUTE_FORCE_Q_CAP: u64 = 3;

/// A vertex of the canonically labeled rooted tree, identified by the child
/// indices along the path from the root. The empty path is the root; the
/// first entry indexes a root neighbor (`1..=q+1`), later entries index
/// forward children (`1..=q`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexPath(pub Vec<u32>);

impl VertexPath {
    pub fn root() -> Self {
        VertexPath(Vec::new())
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    /// Graph distance from the root.
    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn parent(&self) -> Option<VertexPath> {
        if self.is_root() {
            None
        } else {
            Some(VertexPath(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    pub fn child(&self, index: u32) -> VertexPath {
        let mut labels = self.0.clone();
        labels.push(index);
        VertexPath(labels)
    }
}

/// Occupation profile of a closed walk: `multiplicities[k] = m_k`, the number
/// of visited vertices with occupation number exactly `k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OccupationProfile {
    multiplicities: BTreeMap<u32, u32>,
}

impl OccupationProfile {
    /// Build a profile from the list of per-vertex visit counts.
    pub fn from_visit_counts<I: IntoIterator<Item = u32>>(counts: I) -> Self {
        let mut multiplicities = BTreeMap::new();
        for c in counts {
            if c > 0 {
                *multiplicities.entry(c).or_insert(0) += 1;
            }
        }
        OccupationProfile { multiplicities }
    }

    pub fn from_multiplicities(multiplicities: BTreeMap<u32, u32>) -> Self {
        let multiplicities = multiplicities.into_iter().filter(|&(_, m)| m > 0).collect();
        OccupationProfile { multiplicities }
    }

    /// Iterate over `(k, m_k)` pairs with `m_k > 0`.
    pub fn iter(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.multiplicities.iter().map(|(&k, &m)| (k, m))
    }

    /// `sum_k k * m_k`; equals `n + 1` for a profile of a length-`n` walk.
    pub fn total_visits(&self) -> u64 {
        self.iter().map(|(k, m)| k as u64 * m as u64).sum()
    }

    /// Conventional display form: occupation numbers in nonincreasing
    /// order, e.g. `[3, 1, 1]`.
    pub fn display_list(&self) -> Vec<u32> {
        let mut out = Vec::new();
        for (k, m) in self.multiplicities.iter().rev() {
            out.extend(std::iter::repeat_n(*k, *m as usize));
        }
        out
    }
}

impl fmt::Display for OccupationProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list: Vec<String> = self.display_list().iter().map(|k| k.to_string()).collect();
        write!(f, "({})", list.join(","))
    }
}

/// Exact walk count of a class as a polynomial in `q`, coefficients ascending.
///
/// Individual monomial coefficients may be negative (products of factors
/// `q-u` expand with mixed signs); evaluation at any integer `q >= 1` is a
/// nonnegative walk count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountPolynomial {
    coeffs: Vec<BigInt>,
}

impl CountPolynomial {
    pub fn zero() -> Self {
        CountPolynomial { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        CountPolynomial {
            coeffs: vec![BigInt::one()],
        }
    }

    pub fn from_coeffs(coeffs: Vec<BigInt>) -> Self {
        let mut p = CountPolynomial { coeffs };
        p.trim();
        p
    }

    pub fn from_i64_coeffs(coeffs: &[i64]) -> Self {
        Self::from_coeffs(coeffs.iter().map(|&c| BigInt::from(c)).collect())
    }

    fn trim(&mut self) {
        while matches!(self.coeffs.last(), Some(c) if c.is_zero()) {
            self.coeffs.pop();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    /// Multiply by the linear factor `q + c`.
    pub fn mul_linear(&self, c: i64) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let c = BigInt::from(c);
        let mut out = vec![BigInt::zero(); self.coeffs.len() + 1];
        for (j, a) in self.coeffs.iter().enumerate() {
            out[j] += a * &c;
            out[j + 1] += a;
        }
        Self::from_coeffs(out)
    }

    pub fn add_assign(&mut self, other: &Self) {
        if other.coeffs.len() > self.coeffs.len() {
            self.coeffs.resize(other.coeffs.len(), BigInt::zero());
        }
        for (j, b) in other.coeffs.iter().enumerate() {
            self.coeffs[j] += b;
        }
        self.trim();
    }

    pub fn eval(&self, q: u64) -> BigInt {
        let q = BigInt::from(q);
        let mut acc = BigInt::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * &q + c;
        }
        acc
    }

    /// Evaluation as a nonnegative count; `q >= 1` always yields one.
    pub fn eval_count(&self, q: u64) -> Result<BigUint> {
        let v = self.eval(q);
        match v.sign() {
            Sign::Minus => Err(Error::Domain(format!(
                "count polynomial evaluated negative at q = {q}: {v}"
            ))),
            _ => Ok(v.magnitude().clone()),
        }
    }

    pub fn eval_f64(&self, q: u64) -> f64 {
        let v = self.eval(q);
        let mag = v
            .magnitude()
            .to_string()
            .parse::<f64>()
            .unwrap_or(f64::INFINITY);
        if v.is_negative() {
            -mag
        } else {
            mag
        }
    }
}

impl fmt::Display for CountPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut parts = Vec::new();
        for (j, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let term = match j {
                0 => format!("{c}"),
                1 if c.is_one() => "q".to_string(),
                1 => format!("{c}*q"),
                _ if c.is_one() => format!("q^{j}"),
                _ => format!("{c}*q^{j}"),
            };
            parts.push(term);
        }
        write!(f, "{}", parts.join(" + "))
    }
}

/// One equivalence class of closed walks.
pub type WalkClass = (OccupationProfile, CountPolynomial);

/// Per-order table of walk classes, `n -> [(profile, count polynomial)]`.
#[derive(Debug, Clone)]
pub struct CoefficientTable {
    rows: BTreeMap<usize, Vec<WalkClass>>,
    max_order: usize,
}

impl CoefficientTable {
    /// Enumerate all rows `n = 0..=max_order`. Odd rows are empty.
    pub fn build(max_order: usize) -> Result<Self> {
        Self::build_with_cap(max_order, DEFAULT_ORDER_CAP)
    }

    pub fn build_with_cap(max_order: usize, cap: usize) -> Result<Self> {
        let mut rows = BTreeMap::new();
        for n in 0..=max_order {
            rows.insert(n, enumerate_walk_classes_with_cap(n, cap)?);
        }
        Ok(CoefficientTable { rows, max_order })
    }

    pub fn from_rows(rows: BTreeMap<usize, Vec<WalkClass>>) -> Self {
        let max_order = rows.keys().max().copied().unwrap_or(0);
        CoefficientTable { rows, max_order }
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn row(&self, n: usize) -> &[WalkClass] {
        self.rows.get(&n).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn rows(&self) -> impl Iterator<Item = (usize, &[WalkClass])> {
        self.rows.iter().map(|(&n, v)| (n, v.as_slice()))
    }
}

/// Enumerate the walk classes of order `n` with the default cap.
///
/// Odd `n` returns the empty list (bipartite parity).
pub fn enumerate_walk_classes(n: usize) -> Result<Vec<WalkClass>> {
    enumerate_walk_classes_with_cap(n, DEFAULT_ORDER_CAP)
}

pub fn enumerate_walk_classes_with_cap(n: usize, cap: usize) -> Result<Vec<WalkClass>> {
    if n > cap {
        return Err(Error::OrderCap { n, cap });
    }
    if n % 2 == 1 {
        return Ok(Vec::new());
    }

    struct Node {
        parent: usize,
        children: Vec<usize>,
        visits: u32,
        depth: usize,
    }

    struct Dfs {
        arena: Vec<Node>,
        poly_stack: Vec<CountPolynomial>,
        classes: BTreeMap<Vec<(u32, u32)>, CountPolynomial>,
    }

    impl Dfs {
        fn step(&mut self, cur: usize, remaining: usize) {
            if remaining == 0 {
                if cur == 0 {
                    let profile = OccupationProfile::from_visit_counts(
                        self.arena.iter().map(|node| node.visits),
                    );
                    let key: Vec<(u32, u32)> = profile.iter().collect();
                    let poly = self.poly_stack.last().unwrap().clone();
                    self.classes
                        .entry(key)
                        .and_modify(|p| p.add_assign(&poly))
                        .or_insert(poly);
                }
                return;
            }
            let depth = self.arena[cur].depth;
            // Must be able to walk back to the root, with matching parity.
            if depth > remaining || (remaining - depth) % 2 == 1 {
                return;
            }

            if cur != 0 {
                let parent = self.arena[cur].parent;
                self.visit(parent, remaining);
            }
            for i in 0..self.arena[cur].children.len() {
                let child = self.arena[cur].children[i];
                self.visit(child, remaining);
            }
            // Open a fresh child: symbolic choice factor q+1-u at the root,
            // q-u elsewhere, with u children already opened here.
            let u = self.arena[cur].children.len() as i64;
            let c = if cur == 0 { 1 - u } else { -u };
            let next = self.arena.len();
            self.arena.push(Node {
                parent: cur,
                children: Vec::new(),
                visits: 0,
                depth: depth + 1,
            });
            self.arena[cur].children.push(next);
            let poly = self.poly_stack.last().unwrap().mul_linear(c);
            self.poly_stack.push(poly);
            self.visit(next, remaining);
            self.poly_stack.pop();
            self.arena[cur].children.pop();
            self.arena.pop();
        }

        fn visit(&mut self, next: usize, remaining: usize) {
            self.arena[next].visits += 1;
            self.step(next, remaining - 1);
            self.arena[next].visits -= 1;
        }
    }

    let mut dfs = Dfs {
        arena: vec![Node {
            parent: usize::MAX,
            children: Vec::new(),
            visits: 1,
            depth: 0,
        }],
        poly_stack: vec![CountPolynomial::one()],
        classes: BTreeMap::new(),
    };
    dfs.step(0, n);

    let mut out: Vec<WalkClass> = dfs
        .classes
        .into_iter()
        .map(|(key, poly)| {
            let profile = OccupationProfile::from_multiplicities(key.into_iter().collect());
            (profile, poly)
        })
        .collect();
    // Display profiles in descending lexicographic order, e.g. (3,2),
    // (3,1,1), (2,2,1) for n = 4.
    out.sort_by_key(|class| std::cmp::Reverse(class.0.display_list()));
    Ok(out)
}

/// Number of closed root walks of length `n` on the `(q+1)`-regular tree.
pub fn count_closed_walks(n: usize, q: u64) -> Result<BigUint> {
    let classes = enumerate_walk_classes(n)?;
    let mut total = BigInt::zero();
    for (_, poly) in &classes {
        total += poly.eval(q);
    }
    match total.sign() {
        Sign::Minus => Err(Error::Domain(format!(
            "negative walk count at n = {n}, q = {q}"
        ))),
        _ => Ok(total.magnitude().clone()),
    }
}

/// Explicitly list every closed root walk of length `n` as a vertex sequence.
/// Desk scale only; the test oracle behind [`enumerate_walk_classes`].
pub fn brute_force_walks(n: usize, q: u64) -> Result<Vec<Vec<VertexPath>>> {
    if n > BRUTE_FORCE_N_CAP || q > BRUTE_FORCE_Q_CAP || q == 0 {
        return Err(Error::BruteForceCap {
            n,
            q,
            n_cap: BRUTE_FORCE_N_CAP,
            q_cap: BRUTE_FORCE_Q_CAP,
        });
    }

    fn dfs(cur: &VertexPath, remaining: usize, q: u64, walk: &mut Vec<VertexPath>, out: &mut Vec<Vec<VertexPath>>) {
        if remaining == 0 {
            if cur.is_root() {
                out.push(walk.clone());
            }
            return;
        }
        if cur.depth() > remaining {
            return;
        }
        let mut neighbors = Vec::new();
        if let Some(parent) = cur.parent() {
            neighbors.push(parent);
        }
        let n_children = if cur.is_root() { q + 1 } else { q };
        for i in 1..=n_children {
            neighbors.push(cur.child(i as u32));
        }
        for next in neighbors {
            walk.push(next.clone());
            dfs(&next, remaining - 1, q, walk, out);
            walk.pop();
        }
    }

    let root = VertexPath::root();
    let mut out = Vec::new();
    let mut walk = vec![root.clone()];
    dfs(&root, n, q, &mut walk, &mut out);
    Ok(out)
}

/// Occupation profile of an explicit walk.
pub fn profile_of_walk(walk: &[VertexPath]) -> OccupationProfile {
    let mut visits: BTreeMap<&VertexPath, u32> = BTreeMap::new();
    for v in walk {
        *visits.entry(v).or_insert(0) += 1;
    }
    OccupationProfile::from_visit_counts(visits.into_values())
}

/// `|S_R| = (q+1) q^(R-1)` for `R >= 1`, and `|S_0| = 1`.
pub fn sphere_size(q: u64, radius: u32) -> u128 {
    if radius == 0 {
        return 1;
    }
    (q as u128 + 1) * (q as u128).pow(radius - 1)
}

/// Ball size `|Lambda_R|`; closed formula for `q >= 2`, direct summation on
/// the line `q = 1`.
pub fn ball_size(q: u64, radius: u32) -> u128 {
    if q == 1 {
        return (0..=radius).map(|r| sphere_size(1, r)).sum();
    }
    1 + (q as u128 + 1) * ((q as u128).pow(radius) - 1) / (q as u128 - 1)
}

/// Almost-sure spectrum window `[-2 sqrt(q), 2 sqrt(q)] + lambda * supp`.
pub fn spectrum_window(q: u64, lambda: f64, supp: (f64, f64)) -> (f64, f64) {
    let edge = 2.0 * (q as f64).sqrt();
    (-edge + lambda * supp.0, edge + lambda * supp.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn classes(n: usize) -> Vec<(Vec<u32>, Vec<i64>)> {
        enumerate_walk_classes(n)
            .unwrap()
            .into_iter()
            .map(|(p, poly)| {
                let coeffs = poly
                    .coeffs()
                    .iter()
                    .map(|c| i64::try_from(c).unwrap())
                    .collect();
                (p.display_list(), coeffs)
            })
            .collect()
    }

    #[test]
    fn order_zero_is_the_trivial_walk() {
        assert_eq!(classes(0), vec![(vec![1], vec![1])]);
    }

    #[test]
    fn order_two_matches_the_neighbor_count() {
        // q+1 walks 0 -> x -> 0, profile (2,1).
        assert_eq!(classes(2), vec![(vec![2, 1], vec![1, 1])]);
    }

    #[test]
    fn order_four_has_the_three_known_classes() {
        assert_eq!(
            classes(4),
            vec![
                (vec![3, 2], vec![1, 1]),
                (vec![3, 1, 1], vec![0, 1, 1]),
                (vec![2, 2, 1], vec![0, 1, 1]),
            ]
        );
    }

    #[test]
    fn odd_orders_are_empty() {
        for n in [1usize, 3, 5, 7, 9, 11, 13, 15] {
            assert!(enumerate_walk_classes(n).unwrap().is_empty(), "n = {n}");
        }
    }

    #[test]
    fn order_cap_is_enforced() {
        assert!(matches!(
            enumerate_walk_classes(18),
            Err(Error::OrderCap { n: 18, cap: 16 })
        ));
    }

    #[test]
    fn profile_totals_are_n_plus_one() {
        for n in (0..=12).step_by(2) {
            for (profile, _) in enumerate_walk_classes(n).unwrap() {
                assert_eq!(profile.total_visits(), n as u64 + 1);
            }
        }
    }

    #[test]
    fn walk_counts_match_known_values() {
        assert_eq!(count_closed_walks(2, 5).unwrap(), BigUint::from(6u32));
        assert_eq!(count_closed_walks(4, 2).unwrap(), BigUint::from(15u32));
        assert_eq!(count_closed_walks(6, 1).unwrap(), BigUint::from(20u32));
    }

    #[test]
    fn line_counts_are_central_binomials() {
        // q = 1 is the two-sided line: C(n, n/2) closed walks.
        let mut binom = 1u64;
        for n in (0..=12).step_by(2) {
            if n > 0 {
                // C(n, n/2) from C(n-2, n/2-1).
                binom = binom * (n as u64 - 1) * n as u64 / ((n as u64 / 2) * (n as u64 / 2));
            }
            assert_eq!(count_closed_walks(n, 1).unwrap(), BigUint::from(binom));
        }
    }

    #[test]
    fn counts_respect_the_crude_bound() {
        for n in (0..=10).step_by(2) {
            for q in 1..=4u64 {
                let count = count_closed_walks(n, q).unwrap();
                assert!(count <= BigUint::from(q + 1).pow(n as u32));
            }
        }
    }

    #[test]
    fn brute_force_base_cases() {
        assert_eq!(brute_force_walks(0, 2).unwrap(), vec![vec![VertexPath::root()]]);
        assert!(brute_force_walks(1, 2).unwrap().is_empty());
        let walks = brute_force_walks(2, 2).unwrap();
        assert_eq!(walks.len(), 3);
        for w in &walks {
            assert!(w[0].is_root() && w[2].is_root());
            assert_eq!(w[1].depth(), 1);
        }
    }

    #[test]
    fn brute_force_caps() {
        assert!(brute_force_walks(14, 2).is_err());
        assert!(brute_force_walks(4, 4).is_err());
    }

    #[test]
    fn brute_force_reproduces_classes() {
        for q in 1..=3u64 {
            for n in (0..=8).step_by(2) {
                let walks = brute_force_walks(n, q).unwrap();
                let mut grouped: BTreeMap<Vec<u32>, u64> = BTreeMap::new();
                for w in &walks {
                    *grouped.entry(profile_of_walk(w).display_list()).or_insert(0) += 1;
                }
                let classes = enumerate_walk_classes(n).unwrap();
                let expected: BTreeMap<Vec<u32>, u64> = classes
                    .iter()
                    .filter(|(_, poly)| !poly.eval(q).is_zero())
                    .map(|(p, poly)| {
                        (
                            p.display_list(),
                            u64::try_from(poly.eval_count(q).unwrap()).unwrap(),
                        )
                    })
                    .collect();
                assert_eq!(grouped, expected, "n = {n}, q = {q}");
            }
        }
    }

    #[test]
    fn negative_monomial_coefficients_still_count_correctly() {
        // The class (4,1,1,1) at n = 6 counts ordered triples of distinct
        // root neighbors: (q+1)q(q-1) = q^3 - q.
        let found = classes(6)
            .into_iter()
            .find(|(p, _)| p == &vec![4, 1, 1, 1])
            .unwrap();
        assert_eq!(found.1, vec![0, -1, 0, 1]);
    }

    #[test]
    fn sphere_and_ball_sizes() {
        assert_eq!(sphere_size(2, 3), 12);
        assert_eq!(ball_size(2, 3), 22);
        assert_eq!(sphere_size(2, 0), 1);
        assert_eq!(ball_size(1, 5), 11);
    }

    #[test]
    fn sphere_ball_ratio_converges() {
        for q in 2..=4u64 {
            let limit = (q as f64 - 1.0) / q as f64;
            let mut prev = 1.0;
            for radius in 1..=30u32 {
                let ratio = sphere_size(q, radius) as f64 / ball_size(q, radius) as f64;
                assert!(ratio <= prev, "monotone in R");
                prev = ratio;
            }
            assert!((prev - limit).abs() < 1e-6);
        }
    }

    #[test]
    fn spectrum_window_examples() {
        let (lo, hi) = spectrum_window(4, 10.0, (-1.0, 1.0));
        assert_eq!((lo, hi), (-14.0, 14.0));
        let (lo, hi) = spectrum_window(2, 1.0, (0.0, 0.0));
        let edge = 2.0 * 2.0f64.sqrt();
        assert!((lo + edge).abs() < 1e-15 && (hi - edge).abs() < 1e-15);
        let (lo, hi) = spectrum_window(2, 50.0, (-1.0, 1.0));
        assert!((lo + 50.0 + edge).abs() < 1e-12 && (hi - 50.0 - edge).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn class_totals_and_counts(n in (0usize..=10).prop_map(|m| 2 * (m / 2)), q in 1u64..=4) {
            let classes = enumerate_walk_classes(n).unwrap();
            let mut total = BigInt::zero();
            for (profile, poly) in &classes {
                prop_assert_eq!(profile.total_visits(), n as u64 + 1);
                total += poly.eval(q);
            }
            prop_assert!(!total.is_negative());
            prop_assert!(total.magnitude() <= &BigUint::from(q + 1).pow(n as u32));
        }
    }
}
