//! Presentations of the groups extending `Z/d` by a Klein four-group.
//!
//! When the cyclic action on a stable curve extends, the ambient symmetry
//! group `G` of the generic member is an extension
//!
//! ```text
//! 1 → Z/d → G → (Z/2)² → 1
//! ```
//!
//! in which the two quotient involutions lift to involutions.  Writing `α`
//! for the generator of the normal cyclic subgroup and `β₁, β₂` for the
//! lifts, such a group is presented by
//!
//! ```text
//! α^d = β₁² = β₂² = 1,   β₁α = α^{l₁}β₁,   β₂α = α^{l₂}β₂,
//! β₁β₂ = β₂β₁α^{e₁₂},
//! ```
//!
//! so a presentation is the arithmetic tuple `(d, l₁, l₂, e₁₂)` together
//! with an exponent `f` for which the third involution `β₃ := β₁β₂α^f`
//! exists.  [`ExtPresentation::constraint_violation`] states the exact
//! solvability conditions on the tuple; [`enumerate_presentations`] lists
//! all solutions for a given `d`; [`build_group`] materialises the
//! multiplication table on the `4d` normal forms `α^a β₁^{ε₁} β₂^{ε₂}` and
//! verifies the group axioms exhaustively, so the arithmetic conditions are
//! never trusted blindly: a tuple that fails them also fails the table
//! verification, and conversely.

use serde::Serialize;
use thiserror::Error;

use crate::arith::gcd;

/// Errors of the presentation machinery.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum GroupExtError {
    /// The rewritten multiplication table fails a group axiom or a defining
    /// relation, so the tuple does not present a group of order `4d`.
    #[error("inconsistent presentation: {0}")]
    InconsistentPresentation(String),
    /// The order is outside the supported range.
    #[error("group order 4·{0} does not fit the element index type")]
    OrderTooLarge(u32),
}

/// A presentation tuple for an extension of `(Z/2)²` by `Z/d`.
///
/// All entries are residues in `[0, d)`.  The tuple is *valid* when
/// [`constraint_violation`](Self::constraint_violation) returns `None`;
/// [`build_group`] double-checks validity against the multiplication table
/// itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct ExtPresentation {
    /// Order of the normal cyclic subgroup `⟨α⟩`.
    pub d: u32,
    /// Conjugation exponent of `β₁`: `β₁αβ₁⁻¹ = α^{l₁}`.
    pub l1: u32,
    /// Conjugation exponent of `β₂`.
    pub l2: u32,
    /// Commutation defect: `β₁β₂ = β₂β₁α^{e₁₂}`.
    pub e12: u32,
    /// Twist making `β₃ = β₁β₂α^f` an involution.
    pub f: u32,
}

impl ExtPresentation {
    /// The first violated arithmetic constraint, if any.
    ///
    /// The constraints characterise exactly the tuples whose rewritten
    /// multiplication table is a group of order `4d` in which `β₃ = β₁β₂α^f`
    /// is an involution:
    ///
    /// * `gcd(lᵢ, d) = 1` and `lᵢ² ≡ 1 (mod d)` — conjugation by an
    ///   involution is an involutive automorphism of `Z/d`;
    /// * `d | (lᵢ + 1)·e₁₂` — compatibility of the commutation defect with
    ///   `βᵢ² = 1`;
    /// * `gcd(d, l₁l₂ + 1) | e₁₂` — solvability of the involution condition
    ///   for some twist;
    /// * `d | (l₁l₂ + 1)·f + e₁₂` — the given twist solves it.
    pub fn constraint_violation(&self) -> Option<String> {
        let d = self.d as u64;
        if self.d == 0 {
            return Some("the cyclic order d must be positive".to_string());
        }
        for (name, l) in [("l1", self.l1), ("l2", self.l2)] {
            if gcd(l as u64, d) != 1 {
                return Some(format!("{name} = {l} is not a unit mod {d}"));
            }
            if (l as u64 * l as u64) % d != 1 % d {
                return Some(format!("{name}² = {} ≢ 1 mod {d}", l as u64 * l as u64));
            }
        }
        for (name, l) in [("l1", self.l1), ("l2", self.l2)] {
            if !((l as u64 + 1) * self.e12 as u64).is_multiple_of(d) {
                return Some(format!("d ∤ ({name} + 1)·e12"));
            }
        }
        let t = (self.l1 as u64 * self.l2 as u64 + 1) % d;
        if !(self.e12 as u64).is_multiple_of(gcd(d, t)) {
            return Some("gcd(d, l1·l2 + 1) ∤ e12".to_string());
        }
        if !(t * self.f as u64 + self.e12 as u64).is_multiple_of(d) {
            return Some("d ∤ (l1·l2 + 1)·f + e12".to_string());
        }
        None
    }

    /// Whether every arithmetic constraint holds.
    pub fn is_valid(&self) -> bool {
        self.constraint_violation().is_none()
    }
}

/// All valid presentation tuples for the given cyclic order, sorted
/// lexicographically by `(l1, l2, e12, f)`.
///
/// Intended for `d ≥ 2`; for `d = 1` the constraints degenerate and the
/// single extension is `(Z/2)²` itself.
pub fn enumerate_presentations(d: u32) -> Vec<ExtPresentation> {
    let mut out = Vec::new();
    if d == 0 {
        return out;
    }
    let roots: Vec<u32> = (0..d)
        .filter(|&l| gcd(l as u64, d as u64) == 1 && (l as u64 * l as u64) % d as u64 == 1 % d as u64)
        .collect();
    for &l1 in &roots {
        for &l2 in &roots {
            for e12 in 0..d {
                for f in 0..d {
                    let p = ExtPresentation { d, l1, l2, e12, f };
                    if p.is_valid() {
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}

/// Multiplication table of an extension group on the `4d` normal forms
/// `α^a β₁^{ε₁} β₂^{ε₂}`, indexed as `(ε₁ + 2ε₂)·d + a`.
///
/// Indices `0..d` are exactly the powers of `α`; the identity is `0`.
#[derive(Debug, Clone)]
pub struct GroupTable {
    d: u32,
    order: u32,
    table: Vec<u16>,
}

impl GroupTable {
    /// Order of the table, `4d`.
    pub fn order(&self) -> u32 {
        self.order
    }

    /// Order of the normal cyclic subgroup.
    pub fn d(&self) -> u32 {
        self.d
    }

    /// The index of `α^a β₁^{ε₁} β₂^{ε₂}`.
    pub fn element(&self, a: u32, eps1: u32, eps2: u32) -> u16 {
        assert!(a < self.d && eps1 < 2 && eps2 < 2);
        ((eps1 + 2 * eps2) * self.d + a) as u16
    }

    /// The exponents `(a, ε₁, ε₂)` of an element index.
    pub fn decompose(&self, x: u16) -> (u32, u32, u32) {
        let x = x as u32;
        let coset = x / self.d;
        (x % self.d, coset & 1, coset >> 1)
    }

    /// The generator `α` (the identity when `d = 1`).
    pub fn alpha(&self) -> u16 {
        self.element(1 % self.d, 0, 0)
    }

    /// The first lifted involution `β₁`.
    pub fn b1(&self) -> u16 {
        self.element(0, 1, 0)
    }

    /// The second lifted involution `β₂`.
    pub fn b2(&self) -> u16 {
        self.element(0, 0, 1)
    }

    /// Table lookup for the product `x · y`.
    pub fn mul(&self, x: u16, y: u16) -> u16 {
        self.table[x as usize * self.order as usize + y as usize]
    }

    /// The power `x^n` by repeated table lookups.
    pub fn pow(&self, x: u16, n: u32) -> u16 {
        let mut acc = 0u16;
        for _ in 0..n {
            acc = self.mul(acc, x);
        }
        acc
    }

    /// Multiplicative order of an element.
    pub fn element_order(&self, x: u16) -> u32 {
        let mut acc = x;
        let mut n = 1;
        while acc != 0 {
            acc = self.mul(acc, x);
            n += 1;
            assert!(n <= self.order, "order exceeds the group order: not a group table");
        }
        n
    }

    /// The inverse, when the row of `x` reaches the identity.
    pub fn inverse(&self, x: u16) -> Option<u16> {
        (0..self.order as u16).find(|&y| self.mul(x, y) == 0 && self.mul(y, x) == 0)
    }
}

/// Builds the rewritten multiplication table of a tuple without any
/// verification.
///
/// The product of two normal forms is computed by pushing `α`-powers to the
/// left (`βᵢα^x = α^{lᵢx}βᵢ`) and resolving one `β₂β₁` inversion
/// (`β₂β₁ = α^{-l₁l₂e₁₂}β₁β₂`); both moves strictly decrease the number of
/// out-of-order letter pairs, so the rewriting terminates for every tuple.
/// Whether the resulting table is associative — hence a group — depends on
/// the arithmetic constraints; see [`build_group`].
pub fn raw_table(d: u32, l1: u32, l2: u32, e12: u32) -> Result<GroupTable, GroupExtError> {
    assert!(d >= 1, "the cyclic order must be positive");
    if 4 * d as u64 > u16::MAX as u64 + 1 {
        return Err(GroupExtError::OrderTooLarge(d));
    }
    let order = 4 * d;
    let dd = d as u64;
    // The α-exponent of the resolved β₂β₁ pair, before any transport.
    let swap_defect = (dd - (l1 as u64 * l2 as u64 % dd) * (e12 as u64) % dd) % dd;
    let mut table = vec![0u16; (order as usize) * (order as usize)];
    for x in 0..order {
        let (a1, c1) = (x % d, x / d);
        let (e1, e2) = (c1 & 1, c1 >> 1);
        // Transport multiplier for an α-power crossing β₁^{ε₁}β₂^{ε₂}
        // leftwards.
        let mut carry = 1u64;
        if e1 == 1 {
            carry = carry * l1 as u64 % dd;
        }
        if e2 == 1 {
            carry = carry * l2 as u64 % dd;
        }
        // Transport multiplier for the swap defect crossing β₁^{ε₁} only.
        let swap_carry = if e1 == 1 {
            swap_defect * l1 as u64 % dd
        } else {
            swap_defect
        };
        for y in 0..order {
            let (a2, c2) = (y % d, y / d);
            let (f1, f2) = (c2 & 1, c2 >> 1);
            let mut a = (a1 as u64 + a2 as u64 * carry) % dd;
            if e2 == 1 && f1 == 1 {
                a = (a + swap_carry) % dd;
            }
            let coset = ((e1 ^ f1) + 2 * (e2 ^ f2)) * d;
            table[x as usize * order as usize + y as usize] = (coset + a as u32) as u16;
        }
    }
    Ok(GroupTable { d, order, table })
}

/// Exhaustively verifies that a raw table is a group of order `4d` with
/// normal `⟨α⟩`, Klein four-group quotient, the defining relations, and an
/// involutive `β₃ = β₁β₂α^f`.
///
/// Checks are ordered so that an inconsistent tuple fails on a cheap witness
/// before the full `O((4d)³)` associativity sweep: the four rewriting
/// overlaps `(β₁,β₁,α)`, `(β₂,β₂,α)`, `(β₂,β₁,β₁)`, `(β₂,β₂,β₁)` and the
/// involution test for `β₃` detect every arithmetic violation.
pub fn verify_table(t: &GroupTable, p: &ExtPresentation) -> Result<(), GroupExtError> {
    let fail = |what: String| Err(GroupExtError::InconsistentPresentation(what));
    let alpha = t.alpha();
    let b1 = t.b1();
    let b2 = t.b2();
    let assoc = |x: u16, y: u16, z: u16| t.mul(t.mul(x, y), z) == t.mul(x, t.mul(y, z));
    for (x, y, z, name) in [
        (b1, b1, alpha, "(β₁·β₁)·α"),
        (b2, b2, alpha, "(β₂·β₂)·α"),
        (b2, b1, b1, "(β₂·β₁)·β₁"),
        (b2, b2, b1, "(β₂·β₂)·β₁"),
    ] {
        if !assoc(x, y, z) {
            return fail(format!("associativity fails at {name}"));
        }
    }
    let b3 = t.mul(t.mul(b1, b2), t.pow(alpha, p.f));
    if t.mul(b3, b3) != 0 {
        return fail("β₃ = β₁β₂α^f is not an involution".to_string());
    }
    // Full group axioms.
    let n = t.order as u16;
    for x in 0..n {
        if t.mul(0, x) != x || t.mul(x, 0) != x {
            return fail(format!("identity fails at element {x}"));
        }
    }
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                if !assoc(x, y, z) {
                    return fail(format!("associativity fails at ({x}, {y}, {z})"));
                }
            }
        }
    }
    for x in 0..n {
        if t.inverse(x).is_none() {
            return fail(format!("element {x} has no inverse"));
        }
    }
    // α generates a normal subgroup of order d with Klein four-group
    // quotient.
    if t.element_order(alpha) != t.d {
        return fail("α does not have order d".to_string());
    }
    for x in 0..n {
        let xi = t.inverse(x).expect("inverses were just verified");
        for a in 0..t.d as u16 {
            if t.mul(t.mul(x, a), xi) >= t.d as u16 {
                return fail(format!("⟨α⟩ is not normalised by element {x}"));
            }
        }
        if t.mul(x, x) >= t.d as u16 {
            return fail(format!("the square of element {x} leaves ⟨α⟩"));
        }
    }
    // Defining relations.
    if t.mul(b1, alpha) != t.mul(t.pow(alpha, p.l1), b1) {
        return fail("β₁α ≠ α^{l₁}β₁".to_string());
    }
    if t.mul(b2, alpha) != t.mul(t.pow(alpha, p.l2), b2) {
        return fail("β₂α ≠ α^{l₂}β₂".to_string());
    }
    if t.mul(b1, b2) != t.mul(t.mul(b2, b1), t.pow(alpha, p.e12)) {
        return fail("β₁β₂ ≠ β₂β₁α^{e₁₂}".to_string());
    }
    Ok(())
}

/// Builds and exhaustively verifies the multiplication table of a
/// presentation tuple.
///
/// The arithmetic constraints are *not* assumed: the table itself is checked
/// for the group axioms, the normal cyclic subgroup, the Klein four-group
/// quotient, the defining relations, and the involutivity of
/// `β₃ = β₁β₂α^f`.  A tuple passes exactly when it satisfies the
/// constraints, so this function is an independent oracle for
/// [`ExtPresentation::is_valid`].
pub fn build_group(p: &ExtPresentation) -> Result<GroupTable, GroupExtError> {
    let t = raw_table(p.d, p.l1, p.l2, p.e12)?;
    verify_table(&t, p)?;
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_two_has_exactly_two_presentations() {
        let list = enumerate_presentations(2);
        assert_eq!(
            list,
            vec![
                ExtPresentation { d: 2, l1: 1, l2: 1, e12: 0, f: 0 },
                ExtPresentation { d: 2, l1: 1, l2: 1, e12: 0, f: 1 },
            ]
        );
        // The built group is elementary abelian of order 8.
        let t = build_group(&list[0]).unwrap();
        assert_eq!(t.order(), 8);
        for x in 0..8u16 {
            assert!(t.element_order(x) <= 2);
        }
    }

    #[test]
    fn trivial_conjugation_builds_a_direct_product() {
        for d in [3u32, 5, 6] {
            let p = ExtPresentation { d, l1: 1, l2: 1, e12: 0, f: 0 };
            let t = build_group(&p).unwrap();
            assert_eq!(t.order(), 4 * d);
            assert_eq!(t.element_order(t.alpha()), d);
            // Everything commutes: Z/d × Z/2 × Z/2.
            for x in 0..t.order() as u16 {
                for y in 0..t.order() as u16 {
                    assert_eq!(t.mul(x, y), t.mul(y, x));
                }
            }
        }
    }

    #[test]
    fn inverting_involutions_build_a_nonabelian_group() {
        let p = ExtPresentation { d: 4, l1: 3, l2: 3, e12: 0, f: 0 };
        let t = build_group(&p).unwrap();
        assert_eq!(t.order(), 16);
        // β₁ α β₁⁻¹ = α³.
        let conj = t.mul(t.mul(t.b1(), t.alpha()), t.inverse(t.b1()).unwrap());
        assert_eq!(conj, t.pow(t.alpha(), 3));
        assert_ne!(t.mul(t.b1(), t.alpha()), t.mul(t.alpha(), t.b1()));
    }

    #[test]
    fn order_four_enumeration_filters_the_commutation_defect() {
        let list = enumerate_presentations(4);
        let with = |l1, l2, e12| -> Vec<u32> {
            list.iter()
                .filter(|p| p.l1 == l1 && p.l2 == l2 && p.e12 == e12)
                .map(|p| p.f)
                .collect()
        };
        // For l₁ = l₂ = 3: (l+1)e ≡ 0 mod 4 always, but gcd(4, 10) = 2 must
        // divide e₁₂, and f must solve 10f + e ≡ 0, i.e. 2f ≡ -e mod 4.
        assert_eq!(with(3, 3, 0), vec![0, 2]);
        assert_eq!(with(3, 3, 2), vec![1, 3]);
        assert!(with(3, 3, 1).is_empty());
        assert!(with(3, 3, 3).is_empty());
        // For l₁ = l₂ = 1 the βᵢ centralise α; e₁₂ = 2 gives a central
        // extension with commutation defect α², odd defects are excluded.
        assert_eq!(with(1, 1, 0), vec![0, 2]);
        assert_eq!(with(1, 1, 2), vec![1, 3]);
        assert!(with(1, 1, 1).is_empty());
        assert!(with(1, 1, 3).is_empty());
        // Sorted and duplicate-free.
        let mut sorted = list.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(list, sorted);
    }

    #[test]
    fn third_involution_round_trip() {
        for d in 2..=8u32 {
            for p in enumerate_presentations(d) {
                let t = build_group(&p).expect("enumerated tuples build groups");
                let b3 = t.mul(t.mul(t.b1(), t.b2()), t.pow(t.alpha(), p.f));
                assert_eq!(t.element_order(b3), 2, "{p:?}");
                assert_eq!(t.element_order(t.b1()), 2);
                assert_eq!(t.element_order(t.b2()), 2);
                // β₁β₂β₃ lies in the cyclic subgroup.
                let prod = t.mul(t.mul(t.b1(), t.b2()), b3);
                assert!((prod as u32) < d, "{p:?}");
            }
        }
    }

    #[test]
    fn invalid_tuples_fail_the_table_verification() {
        // Non-unit conjugation exponent.
        let p = ExtPresentation { d: 4, l1: 2, l2: 1, e12: 0, f: 0 };
        assert!(!p.is_valid());
        assert!(matches!(
            build_group(&p),
            Err(GroupExtError::InconsistentPresentation(_))
        ));
        // Commutation defect incompatible with β₂² = 1.
        let p = ExtPresentation { d: 4, l1: 3, l2: 1, e12: 1, f: 0 };
        assert!(!p.is_valid());
        assert!(build_group(&p).is_err());
        // Valid (l, e) but a twist that misses the involution condition.
        let p = ExtPresentation { d: 4, l1: 3, l2: 3, e12: 0, f: 1 };
        assert!(!p.is_valid());
        assert!(matches!(
            build_group(&p),
            Err(GroupExtError::InconsistentPresentation(msg)) if msg.contains("involution")
        ));
    }

    #[test]
    fn validity_matches_verification_exhaustively_for_small_orders() {
        for d in 1..=6u32 {
            for l1 in 0..d {
                for l2 in 0..d {
                    for e12 in 0..d {
                        for f in 0..d {
                            let p = ExtPresentation { d, l1, l2, e12, f };
                            assert_eq!(
                                p.is_valid(),
                                build_group(&p).is_ok(),
                                "constraints and table verification disagree at {p:?}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn mixed_conjugation_exponents() {
        // d = 8 with l₁ = 3, l₂ = 5: (l₁+1)e ≡ 4e and (l₂+1)e ≡ 6e mod 8
        // force e ∈ {0, 4} ∩ {0, 4} minus the gcd filter gcd(8, 16) = 8 | e,
        // so e = 0, and every twist works since l₁l₂ + 1 ≡ 0 mod 8.
        let list: Vec<_> = enumerate_presentations(8)
            .into_iter()
            .filter(|p| p.l1 == 3 && p.l2 == 5)
            .collect();
        assert_eq!(list.len(), 8);
        assert!(list.iter().all(|p| p.e12 == 0));
        let t = build_group(&list[0]).unwrap();
        let conj1 = t.mul(t.mul(t.b1(), t.alpha()), t.inverse(t.b1()).unwrap());
        let conj2 = t.mul(t.mul(t.b2(), t.alpha()), t.inverse(t.b2()).unwrap());
        assert_eq!(conj1, t.pow(t.alpha(), 3));
        assert_eq!(conj2, t.pow(t.alpha(), 5));
    }
}
