//! Numerical types of effective `Z/d` actions on smooth curves.
//!
//! A *numerical type* `(g, d, (k_1, ..., k_{d-1}))` consists of a genus `g`,
//! the order `d` of a cyclic group `G = <γ>` acting effectively on a smooth
//! curve of genus `g`, and for each nonzero residue `i` the number `k_i` of
//! branch points of the quotient map whose local monodromy is `γ^i`.
//!
//! This module decides which numerical types are *admissible* (realised by an
//! actual action), computes quotient genera both ways, normalises types under
//! the unit group `(Z/d)^*` (which absorbs the choice of generator),
//! enumerates all admissible types of a given genus, restricts an action to a
//! subgroup, and evaluates the dimension of the locus of smooth curves
//! realising a type.

use std::collections::BTreeSet;
use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{additive_order, gcd32, inv_mod, lcm, units};

/// Errors produced by the numerical-type computations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BranchingError {
    /// The count vector has the wrong length for the stated modulus.
    #[error("branching sequence for d = {d} must list {expected} counts, got {got}")]
    LengthMismatch { d: u32, expected: usize, got: usize },
    /// The modulus `d` must be at least 1.
    #[error("the group order d must be at least 1")]
    ZeroModulus,
    /// The ramification total is odd, so no integral genus matches the data.
    #[error("the ramification total is odd, so no integral genus matches the data")]
    NonIntegralGenus,
    /// The data would force a negative genus.
    #[error("the data forces a negative genus")]
    NegativeGenus,
    /// The marked quotient signature admits no hyperbolic (or flat) structure.
    #[error("quotient signature with genus {h} and {marks} marks is unstable")]
    UnstableQuotient { h: u32, marks: u32 },
    /// A claimed subgroup order does not divide the group order.
    #[error("{0} does not divide {1}")]
    NotADivisor(u32, u32),
    /// The numerical type is not admissible, but the operation requires it.
    #[error("numerical type of genus {g} for d = {d} is not admissible")]
    NotAdmissible { g: u32, d: u32 },
    /// The requested computation is larger than this implementation supports.
    #[error("input exceeds the supported search scale: {0}")]
    ScaleExceeded(String),
}

/// The branch-point counts `(k_1, ..., k_{d-1})` of a `Z/d` action, indexed
/// by the nonzero residues mod `d`.
///
/// `k_i` counts quotient branch points with local monodromy `γ^i`. The
/// sequence for `d = 1` is empty. Ordering and equality are lexicographic on
/// `(d, counts)`, so sequences for a fixed `d` compare by their counts.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BranchingSequence {
    d: u32,
    counts: Vec<u32>,
}

impl BranchingSequence {
    /// Wraps explicit counts `(k_1, ..., k_{d-1})` for the modulus `d`.
    pub fn new(d: u32, counts: Vec<u32>) -> Result<Self, BranchingError> {
        if d == 0 {
            return Err(BranchingError::ZeroModulus);
        }
        let expected = (d - 1) as usize;
        if counts.len() != expected {
            return Err(BranchingError::LengthMismatch {
                d,
                expected,
                got: counts.len(),
            });
        }
        Ok(Self { d, counts })
    }

    /// The all-zero sequence for modulus `d` (an unramified action).
    pub fn empty(d: u32) -> Self {
        assert!(d >= 1, "the group order d must be at least 1");
        Self {
            d,
            counts: vec![0; (d - 1) as usize],
        }
    }

    /// Builds a sequence from `(residue, count)` pairs, summing repeats.
    pub fn from_pairs(d: u32, pairs: &[(u32, u32)]) -> Result<Self, BranchingError> {
        let mut seq = if d == 0 {
            return Err(BranchingError::ZeroModulus);
        } else {
            Self::empty(d)
        };
        for &(i, k) in pairs {
            if i == 0 || i >= d {
                return Err(BranchingError::LengthMismatch {
                    d,
                    expected: (d - 1) as usize,
                    got: i as usize,
                });
            }
            seq.counts[(i - 1) as usize] += k;
        }
        Ok(seq)
    }

    /// The modulus `d`.
    pub fn d(&self) -> u32 {
        self.d
    }

    /// The count `k_i` for a nonzero residue `i` (panics unless `1 <= i < d`).
    pub fn count(&self, i: u32) -> u32 {
        assert!(i >= 1 && i < self.d, "residue {i} out of range for d = {}", self.d);
        self.counts[(i - 1) as usize]
    }

    /// Overwrites the count `k_i` (panics unless `1 <= i < d`).
    pub fn set_count(&mut self, i: u32, value: u32) {
        assert!(i >= 1 && i < self.d, "residue {i} out of range for d = {}", self.d);
        self.counts[(i - 1) as usize] = value;
    }

    /// The raw counts `(k_1, ..., k_{d-1})`.
    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// The total number of branch points, `k_1 + ... + k_{d-1}`.
    pub fn k_sum(&self) -> u32 {
        self.counts.iter().sum()
    }

    /// Iterates over the pairs `(i, k_i)` with `k_i > 0`.
    pub fn support(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &k)| k > 0)
            .map(|(idx, &k)| (idx as u32 + 1, k))
    }

    /// Whether every count is zero.
    pub fn is_empty(&self) -> bool {
        self.counts.iter().all(|&k| k == 0)
    }
}

impl fmt::Display for BranchingSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (idx, k) in self.counts.iter().enumerate() {
            if idx > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{k}")?;
        }
        write!(f, ")")
    }
}

/// A numerical type: a genus together with a branching sequence.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NumericalType {
    /// The genus of the curve the group acts on.
    pub g: u32,
    /// The branching data of the action.
    pub seq: BranchingSequence,
}

impl NumericalType {
    /// Wraps `(g, d, counts)` after validating the count-vector length.
    pub fn new(g: u32, d: u32, counts: Vec<u32>) -> Result<Self, BranchingError> {
        Ok(Self {
            g,
            seq: BranchingSequence::new(d, counts)?,
        })
    }

    /// The order of the acting group.
    pub fn d(&self) -> u32 {
        self.seq.d()
    }

    /// See [`is_admissible`].
    pub fn is_admissible(&self) -> bool {
        is_admissible(self.g, &self.seq)
    }

    /// See [`quotient_genus`].
    pub fn quotient_genus(&self) -> Result<u32, BranchingError> {
        quotient_genus(self.g, &self.seq)
    }

    /// The dimension of the locus of smooth genus-`g` curves admitting a
    /// `Z/d` action of this numerical type: the moduli dimension of the
    /// quotient genus with one mark per branch point.
    pub fn stratum_dimension(&self) -> Result<u64, BranchingError> {
        let h = self.quotient_genus()?;
        teich_dimension(h, self.seq.k_sum())
    }

    /// See [`canonicalize`].
    pub fn canonical_class(&self) -> NumericalTypeClass {
        canonicalize(&self.seq)
    }

    /// See [`restrict_to_subgroup`].
    pub fn restrict(&self, d_sub: u32) -> Result<NumericalType, BranchingError> {
        let seq = restrict_to_subgroup(self.g, &self.seq, d_sub)?;
        Ok(NumericalType { g: self.g, seq })
    }
}

/// The `(Z/d)^*`-orbit of a branching sequence, summarised by its
/// lexicographically least member.
///
/// Two sequences lie in the same orbit exactly when they describe the same
/// action written with respect to different generators of the group.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NumericalTypeClass {
    /// The lexicographically least sequence in the orbit.
    pub representative: BranchingSequence,
    /// The number of distinct sequences in the orbit.
    pub orbit_size: u32,
}

/// The exact quotient genus `h = 1 + (g-1)/d - (1/2) Σ k_i (1 - gcd(i,d)/d)`
/// as a rational number, without integrality checks.
pub fn quotient_genus_exact(g: u32, seq: &BranchingSequence) -> Ratio<i64> {
    let d = seq.d() as i64;
    let mut h = Ratio::from_integer(1) + Ratio::new(g as i64 - 1, d);
    for (i, k) in seq.support() {
        let e = gcd32(i, seq.d()) as i64;
        h -= Ratio::new(k as i64, 2) * (Ratio::from_integer(1) - Ratio::new(e, d));
    }
    h
}

/// The quotient genus of a `Z/d` action with the given data, i.e. the genus
/// `h` of the orbit curve, determined by the Riemann–Hurwitz relation
/// `2g - 2 = d(2h - 2) + Σ k_i (d - gcd(i, d))`.
///
/// Fails with [`BranchingError::NonIntegralGenus`] or
/// [`BranchingError::NegativeGenus`] when no genus fits.
pub fn quotient_genus(g: u32, seq: &BranchingSequence) -> Result<u32, BranchingError> {
    let h = quotient_genus_exact(g, seq);
    if !h.is_integer() {
        return Err(BranchingError::NonIntegralGenus);
    }
    let h = h.to_integer();
    if h < 0 {
        return Err(BranchingError::NegativeGenus);
    }
    Ok(h as u32)
}

/// The genus `g = 1 + d(h - 1) + (1/2) Σ k_i (d - gcd(i, d))` of the covering
/// curve determined by a quotient genus `h` and branching data.
///
/// Fails with [`BranchingError::NonIntegralGenus`] when the ramification
/// total is odd and with [`BranchingError::NegativeGenus`] when the formula
/// produces a negative value.
pub fn genus_from_quotient(h: u32, seq: &BranchingSequence) -> Result<u32, BranchingError> {
    let d = seq.d() as i64;
    let mut ram: i64 = 0;
    for (i, k) in seq.support() {
        ram += k as i64 * (d - gcd32(i, seq.d()) as i64);
    }
    if ram % 2 != 0 {
        return Err(BranchingError::NonIntegralGenus);
    }
    let g = 1 + d * (h as i64 - 1) + ram / 2;
    if g < 0 {
        return Err(BranchingError::NegativeGenus);
    }
    Ok(g as u32)
}

/// Whether a numerical type `(g, d, (k_i))` is admissible, i.e. realised by
/// an effective `Z/d` action on some smooth genus-`g` curve.
///
/// The conditions are: the total monodromy `Σ k_i · i` vanishes mod `d`; the
/// quotient genus is a non-negative integer; and when the quotient genus is
/// zero the residues carrying branch points generate `Z/d`.
pub fn is_admissible(g: u32, seq: &BranchingSequence) -> bool {
    let d = seq.d();
    let total: u64 = seq.support().map(|(i, k)| i as u64 * k as u64).sum();
    if d > 1 && !total.is_multiple_of(d as u64) {
        return false;
    }
    let h = match quotient_genus(g, seq) {
        Ok(h) => h,
        Err(_) => return false,
    };
    if h == 0 {
        let support_gcd = seq.support().fold(d, |acc, (i, _)| gcd32(acc, i));
        if d > 1 && support_gcd != 1 {
            return false;
        }
    }
    true
}

/// The dimension `max(3h - 3 + marks, 0)` of the moduli space of genus-`h`
/// curves with `marks` labelled points.
///
/// Fails with [`BranchingError::UnstableQuotient`] when `2h - 2 + marks < 0`,
/// i.e. for an unmarked or once-marked rational curve.
pub fn teich_dimension(h: u32, marks: u32) -> Result<u64, BranchingError> {
    if 2 * (h as i64) - 2 + (marks as i64) < 0 {
        return Err(BranchingError::UnstableQuotient { h, marks });
    }
    let dim = 3 * (h as i64) - 3 + marks as i64;
    Ok(dim.max(0) as u64)
}

/// The sequence obtained by letting the unit `u` act: the image has
/// `k'_{u·i mod d} = k_i`.
///
/// Rewriting an action in terms of the generator `γ^u` transforms its
/// branching sequence by the inverse unit. Panics when `gcd(u, d) != 1`.
pub fn unit_act(u: u32, seq: &BranchingSequence) -> BranchingSequence {
    let d = seq.d();
    if d == 1 {
        return seq.clone();
    }
    assert!(
        gcd32(u % d, d) == 1,
        "{u} is not a unit modulo {d}"
    );
    let mut image = BranchingSequence::empty(d);
    for (i, k) in seq.support() {
        let j = (u as u64 * i as u64 % d as u64) as u32;
        image.counts[(j - 1) as usize] += k;
    }
    image
}

/// The orbit of a sequence under the unit group `(Z/d)^*`, summarised by its
/// lexicographically least member and the orbit size.
pub fn canonicalize(seq: &BranchingSequence) -> NumericalTypeClass {
    let mut orbit = BTreeSet::new();
    for u in units(seq.d()) {
        orbit.insert(unit_act(u, seq));
    }
    let orbit_size = orbit.len() as u32;
    let representative = orbit.into_iter().next().expect("unit orbit is never empty");
    NumericalTypeClass {
        representative,
        orbit_size,
    }
}

/// The local rotation data of a branch point of type `i` under a `Z/d`
/// action: the stabiliser order `m = d / gcd(i, d)` and the exponent `ρ` with
/// which the canonical stabiliser generator `γ^{d/m}` acts on the tangent
/// line, namely `ρ = (i / gcd(i, d))^{-1} mod m` (with `ρ = 0` when `m = 1`).
pub fn rotation_exponent(d: u32, i: u32) -> (u32, u32) {
    assert!(d >= 1 && i < d, "residue {i} out of range for d = {d}");
    if i == 0 {
        return (1, 0);
    }
    let e = gcd32(i, d);
    let m = d / e;
    if m == 1 {
        return (1, 0);
    }
    let rho = inv_mod((i / e) as u64 % m as u64, m as u64)
        .expect("i/gcd(i,d) is a unit modulo d/gcd(i,d)") as u32;
    (m, rho)
}

/// All admissible branching sequences for genus `g` and group order `d`, one
/// lexicographically least representative per `(Z/d)^*`-orbit, sorted.
pub fn enumerate_admissible(g: u32, d: u32) -> Vec<BranchingSequence> {
    assert!(d >= 1, "the group order d must be at least 1");
    let mut out = BTreeSet::new();
    if d == 1 {
        out.insert(BranchingSequence::empty(1));
        return out.into_iter().collect();
    }
    let weights: Vec<i64> = (1..d).map(|i| (d - gcd32(i, d)) as i64).collect();
    let mut h = 0u32;
    loop {
        let budget = 2 * (g as i64) - 2 - d as i64 * (2 * (h as i64) - 2);
        if budget < 0 {
            break;
        }
        let mut counts = vec![0u32; (d - 1) as usize];
        fill_counts(d, g, h, &weights, budget, 0, &mut counts, &mut out);
        h += 1;
    }
    out.into_iter().collect()
}

/// Depth-first assignment of counts matching the ramification budget exactly,
/// keeping only admissible outcomes (canonicalised).
#[allow(clippy::too_many_arguments)]
fn fill_counts(
    d: u32,
    g: u32,
    h: u32,
    weights: &[i64],
    budget: i64,
    idx: usize,
    counts: &mut Vec<u32>,
    out: &mut BTreeSet<BranchingSequence>,
) {
    if idx == weights.len() {
        if budget != 0 {
            return;
        }
        let seq = BranchingSequence::new(d, counts.clone()).expect("lengths match");
        if quotient_genus(g, &seq) == Ok(h) && is_admissible(g, &seq) {
            out.insert(canonicalize(&seq).representative);
        }
        return;
    }
    let w = weights[idx];
    let max_k = budget / w;
    for k in 0..=max_k {
        counts[idx] = k as u32;
        fill_counts(d, g, h, weights, budget - k * w, idx + 1, counts, out);
    }
    counts[idx] = 0;
}

/// The branching sequence of the same curve under the subgroup of order
/// `d_sub` of `Z/d`, with types written for the canonical generator of the
/// subgroup (the `(d/d_sub)`-th power of the ambient generator).
///
/// For a branch orbit of type `i` with `e = gcd(i, d)` and `t = d / d_sub`:
/// its points keep a nontrivial stabiliser in the subgroup exactly when
/// `lcm(e, t) < d`, in which case the orbit splits into `gcd(e, t)` branch
/// orbits of the subgroup action, each of type `i / gcd(e, t) mod d_sub`.
///
/// The input type must be admissible; the output is then admissible for the
/// same genus.
pub fn restrict_to_subgroup(
    g: u32,
    seq: &BranchingSequence,
    d_sub: u32,
) -> Result<BranchingSequence, BranchingError> {
    let d = seq.d();
    if d_sub == 0 || !d.is_multiple_of(d_sub) {
        return Err(BranchingError::NotADivisor(d_sub, d));
    }
    if !is_admissible(g, seq) {
        return Err(BranchingError::NotAdmissible { g, d });
    }
    let t = d / d_sub;
    let mut restricted = BranchingSequence::empty(d_sub);
    for (i, k) in seq.support() {
        let e = gcd32(i, d);
        let l = lcm(e as u64, t as u64) as u32;
        if l == d {
            continue; // the subgroup moves these points freely
        }
        let split = gcd32(e, t);
        let new_type = (i / split) % d_sub;
        debug_assert!(new_type >= 1);
        let slot = &mut restricted.counts[(new_type - 1) as usize];
        *slot += k * split;
    }
    Ok(restricted)
}

/// Which of the two exceptional reduction shapes a sequence matches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExceptionalCase {
    /// `d = 2d'` with `d'` even: counts 1, 2, 1 at residues `1, d', d - 1`.
    DoubleOfEven,
    /// `d = 2d'` with `d'` odd: counts 1, 2, 1 at residues `2, d', d - 2`.
    DoubleOfOdd,
}

/// An exceptional reduction: a genus-zero-quotient shape for which the
/// half-order subgroup is classically recorded with the stated reduced
/// sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExceptionalReduction {
    /// Which shape matched.
    pub case: ExceptionalCase,
    /// The subgroup order `d' = d/2`.
    pub d_sub: u32,
    /// The recorded reduced sequence for the subgroup of order `d'`.
    pub reduced: BranchingSequence,
}

/// Matches a sequence against the two exceptional reduction shapes, up to the
/// unit action. Returns the recorded reduced sequence for the half-order
/// subgroup when the shape matches.
///
/// For `d = 2d'` with `d'` even the shape has counts `1, 2, 1` at residues
/// `1, d', d - 1` and the recorded reduction places counts `1, 2, 1` at
/// residues `1, d'/2, d' - 1`. For `d'` odd the shape has counts `1, 2, 1` at
/// residues `2, d', d - 2` and the recorded reduction places counts `1, 1` at
/// residues `1, d' - 1`.
pub fn exceptional_reduction(seq: &BranchingSequence) -> Option<ExceptionalReduction> {
    let d = seq.d();
    if !d.is_multiple_of(2) || d < 4 {
        return None;
    }
    let d_sub = d / 2;
    let (case, shape, reduced) = if d_sub.is_multiple_of(2) {
        let shape = BranchingSequence::from_pairs(d, &[(1, 1), (d_sub, 2), (d - 1, 1)]).ok()?;
        let reduced =
            BranchingSequence::from_pairs(d_sub, &[(1, 1), (d_sub / 2, 2), (d_sub - 1, 1)])
                .ok()?;
        (ExceptionalCase::DoubleOfEven, shape, reduced)
    } else {
        if d_sub < 3 {
            return None; // residues 2 and d - 2 must be distinct from d'
        }
        let shape = BranchingSequence::from_pairs(d, &[(2, 1), (d_sub, 2), (d - 2, 1)]).ok()?;
        let reduced = BranchingSequence::from_pairs(d_sub, &[(1, 1), (d_sub - 1, 1)]).ok()?;
        (ExceptionalCase::DoubleOfOdd, shape, reduced)
    };
    if canonicalize(seq) == canonicalize(&shape) {
        Some(ExceptionalReduction {
            case,
            d_sub,
            reduced,
        })
    } else {
        None
    }
}

/// Decides realisability of `(g, d, (k_i))` directly from the existence
/// criterion for cyclic branched covers, as an independent cross-check for
/// [`is_admissible`].
///
/// The branch monodromies are forced by the type (the point of type `i`
/// carries the residue `i`), so the check verifies, from first principles:
/// the residues multiply to the identity; some non-negative integer quotient
/// genus `h` balances the Riemann–Hurwitz count with per-point stabiliser
/// orders; and for `h = 0` the residues generate the full group by literal
/// subgroup closure (for `h >= 1` a handle generator can always be chosen to
/// complete a generating set).
///
/// Fails with [`BranchingError::ScaleExceeded`] for `d > 12` or more than 8
/// branch points.
pub fn brute_force_realizable(g: u32, seq: &BranchingSequence) -> Result<bool, BranchingError> {
    let d = seq.d();
    if d > 12 {
        return Err(BranchingError::ScaleExceeded(format!(
            "brute-force realisability supports d <= 12, got {d}"
        )));
    }
    if seq.k_sum() > 8 {
        return Err(BranchingError::ScaleExceeded(format!(
            "brute-force realisability supports at most 8 branch points, got {}",
            seq.k_sum()
        )));
    }
    let mut residues = Vec::new();
    for (i, k) in seq.support() {
        for _ in 0..k {
            residues.push(i);
        }
    }
    let total: u64 = residues.iter().map(|&i| i as u64).sum();
    if !total.is_multiple_of(d as u64) {
        return Ok(false);
    }
    let ram_total: i64 = residues
        .iter()
        .map(|&i| d as i64 - (d / additive_order(i, d)) as i64)
        .sum();
    let target = 2 * (g as i64) - 2;
    let mut quotient_genus_found = None;
    let mut h = 0i64;
    loop {
        let lhs = d as i64 * (2 * h - 2) + ram_total;
        if lhs == target {
            quotient_genus_found = Some(h);
            break;
        }
        if lhs > target {
            break;
        }
        h += 1;
    }
    let Some(h) = quotient_genus_found else {
        return Ok(false);
    };
    if h == 0 {
        // Close the subgroup generated by the branch residues.
        let mut reached = vec![false; d as usize];
        reached[0] = true;
        let mut frontier = vec![0u32];
        while let Some(x) = frontier.pop() {
            for &r in &residues {
                let y = (x + r) % d;
                if !reached[y as usize] {
                    reached[y as usize] = true;
                    frontier.push(y);
                }
            }
        }
        if reached.iter().any(|&b| !b) {
            return Ok(false);
        }
    }
    Ok(true)
}
