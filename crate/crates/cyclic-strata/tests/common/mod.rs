//! Independent oracles shared by the integration tests.  Each test binary
//! compiles this module separately and uses only part of it.
#![allow(dead_code)]
//!
//! Everything here recomputes library results along a different route:
//! subgroup restriction by explicit orbit enumeration on the coset model of
//! `Z/d`, and equivariant node smoothing by explicit construction of the
//! smoothing-parameter tuple.

use cyclic_strata::arith::{gcd32, inv_mod};
use cyclic_strata::branching::{
    enumerate_admissible, rotation_exponent, unit_act, BranchingSequence, NumericalType,
};
use cyclic_strata::marked_graph::{Analyzed, GraphBuilder, SlotSpec};
use std::collections::BTreeSet;

/// Restriction of branching data to the subgroup of order `d_sub`, computed
/// by enumerating coset orbits point by point.
///
/// A branch point of type `i` has stabiliser of order `m = d/gcd(i, d)`, so
/// its `Z/d`-orbit is the coset space `Z/t` with `t = gcd(i, d)`.  The
/// subgroup `H = ⟨s⟩`, `s = d/d_sub`, acts on the cosets by translation;
/// each `H`-orbit is walked explicitly, its point stabiliser is read off
/// from the orbit length, and the induced local rotation decides the type
/// the points carry in the `H`-quotient.
pub fn coset_restriction_oracle(t: &NumericalType, d_sub: u32) -> NumericalType {
    let d = t.d();
    assert!(d_sub >= 1 && d.is_multiple_of(d_sub), "the subgroup order must divide d");
    let s = d / d_sub;
    let mut counts = vec![0u32; d_sub.saturating_sub(1) as usize];
    for (i, k) in t.seq.support() {
        let tt = gcd32(i, d); // number of cosets in one point orbit
        let m = d / tt; // stabiliser order
        let (_, rho) = rotation_exponent(d, i);
        // Walk the H-orbits of the coset space {0, 1, ..., tt-1} explicitly.
        let mut seen = vec![false; tt as usize];
        for start in 0..tt {
            if seen[start as usize] {
                continue;
            }
            let mut len = 0u32;
            let mut x = start;
            loop {
                seen[x as usize] = true;
                len += 1;
                x = (x + s) % tt;
                if x == start {
                    break;
                }
            }
            // The point stabiliser inside H is generated by β^len where
            // β = α^s, because len is the first power returning to the
            // start.  Its order is d_sub / len.
            let m_new = d_sub / len;
            if m_new == 1 {
                continue; // the points become unramified downstairs
            }
            // β^len = α^{s·len}; as a power of the old canonical generator
            // α^tt it rotates the tangent by ζ_m^{rho·e} with e = s·len/tt.
            let e = (s as u64 * len as u64) / tt as u64;
            assert_eq!(
                (s as u64 * len as u64) % tt as u64,
                0,
                "the stabiliser generator must fix the coset"
            );
            let a = (rho as u64 * e) % m as u64;
            // Express ζ_m^a as a primitive m_new-th root: a·m_new/m.
            assert_eq!(
                (a * m_new as u64) % m as u64,
                0,
                "the rotation must have order m_new"
            );
            let rot_new = (a * m_new as u64 / m as u64) % m_new as u64;
            // The new type j satisfies gcd(j, d_sub) = d_sub/m_new and
            // (j·m_new/d_sub)⁻¹ ≡ rot_new (mod m_new).
            let w = inv_mod(rot_new, m_new as u64).expect("rotation is a unit") as u32;
            let j = (d_sub / m_new) * w;
            counts[(j - 1) as usize] += k; // one H-orbit per original orbit
        }
    }
    NumericalType::new(t.g, d_sub, counts).expect("oracle output has the right length")
}

/// Explicit first-order smoothing oracle for one node orbit.
///
/// Rebuilds the scaling exponent of the node-stabiliser generator on the
/// smoothing parameter from the raw branch data (each branch contributes its
/// rotation, weighted into full-stabiliser units), then searches for a
/// `γ`-invariant tuple of smoothing parameters over the member nodes by
/// explicit transport: the tuple entries are roots of unity `ζ_M^a`, `γ`
/// shifts them along the orbit, and the wrap-around applies the generator's
/// scaling.  The orbit smooths equivariantly exactly when some tuple is
/// fixed componentwise.
pub fn explicit_smoothing_oracle(a: &Analyzed, edge_orbit: usize) -> bool {
    let eo = &a.edge_orbits()[edge_orbit];
    let n = eo.members.len() as u32;
    let m = eo.stab_order;
    let rep = &a.graph().edges[eo.members[0] as usize];
    // Scaling exponent of the generator on t = x·y: the product of the two
    // branch rotations.  Swap ends already carry full-stabiliser exponents;
    // effective-action ends are weighted by the trivially-acting order.
    let mut scale = 0u64;
    for end in &rep.ends {
        let weight = if eo.swap {
            1
        } else {
            a.graph().vertices[end.vertex as usize].ord_trivial as u64
        };
        scale += end.rot as u64 * weight;
    }
    let scale = (scale % m as u64) as u32;
    // Search all tuples (ζ_M^{a_0}, ..., ζ_M^{a_{N-1}}) built by transport
    // from a_0 for one that γ fixes componentwise.
    for a0 in 0..m {
        let tuple: Vec<u32> = (0..n).map(|_| a0).collect();
        let mut image = vec![0u32; n as usize];
        for (j, &t) in tuple.iter().enumerate() {
            let target = (j + 1) % n as usize;
            let extra = if target == 0 { scale } else { 0 };
            image[target] = (t + extra) % m;
        }
        if image == tuple {
            return true;
        }
    }
    false
}

/// `(genus, orbit length, branching)` of one component orbit.
pub type PoolEntry = (u32, u32, BranchingSequence);

/// Component orbits usable inside a `Z/d`-marked curve: orbit length times
/// effective order divides `d`, the branching is admissible with at most
/// three branch orbits, and every generator choice of the effective group is
/// represented (node data depends on the type labels, so unit images count
/// as distinct entries; the genus does not matter and is kept minimal).
pub fn component_pool(d: u32) -> Vec<PoolEntry> {
    let mut seen = BTreeSet::new();
    let mut pool = Vec::new();
    for n in (1..=d).filter(|n| d.is_multiple_of(*n)) {
        for d_i in (1..=(d / n)).filter(|m| (d / n).is_multiple_of(*m)) {
            for g in 1..=2u32 {
                for seq in enumerate_admissible(g, d_i) {
                    if seq.k_sum() > 3 {
                        continue;
                    }
                    for u in (1..=d_i).filter(|u| gcd32(*u, d_i) == 1) {
                        let image = unit_act(u, &seq);
                        if seen.insert((n, image.counts().to_vec())) {
                            pool.push((g, n, image));
                        }
                    }
                }
            }
        }
    }
    pool
}

/// Node slots of a component orbit as `(slot_type, fiber, point stabiliser
/// order)`: two free labels plus the branch orbits in the supported types.
pub fn slot_menu(d: u32, entry: &PoolEntry) -> Vec<(u32, u32, u32)> {
    let (_, n, seq) = entry;
    let d_i = seq.d();
    let ot = d / (n * d_i);
    let mut menu = vec![(0u32, 0u32, ot), (0u32, 1u32, ot)];
    for (l, k) in seq.support() {
        let stab = (d_i / gcd32(l, d_i)) * ot;
        menu.push((l, 0, stab));
        if k >= 2 {
            menu.push((l, 1, stab));
        }
    }
    menu
}

/// Dedup key of one gluing: mode (0 join, 1 loop, 2 swap), group order,
/// twist, and the two sides as `(orbit length, counts, slot type, fiber)`,
/// sorted so mirror-image gluings collapse.
type GluingKey = (
    u8,
    u32,
    u32,
    (u32, Vec<u32>, u32, u32),
    (u32, Vec<u32>, u32, u32),
);

/// One- and two-orbit stable curves covering every structurally distinct
/// node gluing for each group order `2..=d_max`: branch-to-branch joins,
/// free joins, mixed joins, loops (twisted and untwisted) and branch swaps.
/// Gluings that fail validation (mismatched stabilisers, disconnected
/// results, odd swap orbits) are silently skipped.
pub fn edge_configurations(d_max: u32) -> Vec<Analyzed> {
    let mut out = Vec::new();
    let mut seen: BTreeSet<GluingKey> = BTreeSet::new();
    for d in 2..=d_max {
        let pool = component_pool(d);
        for (ia, a) in pool.iter().enumerate() {
            let menu_a = slot_menu(d, a);
            // Loops and swaps on a single component orbit.
            for i in 0..menu_a.len() {
                let (la, fa, ma) = menu_a[i];
                if (d / ma) % 2 == 0 {
                    let side = (a.1, a.2.counts().to_vec(), la, fa);
                    if seen.insert((2, d, 0, side.clone(), side)) {
                        let mut builder = GraphBuilder::new(d);
                        if let Ok(h) = builder.add_orbit(a.0, a.1, a.2.clone()) {
                            let s = SlotSpec {
                                orbit: h,
                                slot_type: la,
                                fiber: fa,
                            };
                            if builder.glue_swap(s).is_ok() {
                                if let Ok(graph) = builder.build() {
                                    out.push(graph);
                                }
                            }
                        }
                    }
                }
                for &(lb, fb, mb) in &menu_a[i + 1..] {
                    if ma != mb {
                        continue;
                    }
                    for twist in 0..2u32 {
                        if twist >= d / ma {
                            continue;
                        }
                        let mut sides = [
                            (a.1, a.2.counts().to_vec(), la, fa),
                            (a.1, a.2.counts().to_vec(), lb, fb),
                        ];
                        sides.sort();
                        let [s0, s1] = sides;
                        if !seen.insert((1, d, twist, s0, s1)) {
                            continue;
                        }
                        let mut builder = GraphBuilder::new(d);
                        let Ok(h) = builder.add_orbit(a.0, a.1, a.2.clone()) else {
                            continue;
                        };
                        let sa = SlotSpec {
                            orbit: h,
                            slot_type: la,
                            fiber: fa,
                        };
                        let sb = SlotSpec {
                            orbit: h,
                            slot_type: lb,
                            fiber: fb,
                        };
                        if builder.glue(sa, sb, twist).is_err() {
                            continue;
                        }
                        if let Ok(graph) = builder.build() {
                            out.push(graph);
                        }
                    }
                }
            }
            // Joins between two component orbits.
            for b in &pool[ia..] {
                let menu_b = slot_menu(d, b);
                for &(la, fa, ma) in menu_a.iter().filter(|s| s.1 == 0) {
                    let _ = fa;
                    for &(lb, fb, mb) in menu_b.iter().filter(|s| s.1 == 0) {
                        let _ = fb;
                        if ma != mb {
                            continue;
                        }
                        let mut sides = [
                            (a.1, a.2.counts().to_vec(), la, 0),
                            (b.1, b.2.counts().to_vec(), lb, 0),
                        ];
                        sides.sort();
                        let [s0, s1] = sides;
                        if !seen.insert((0, d, 0, s0, s1)) {
                            continue;
                        }
                        let mut builder = GraphBuilder::new(d);
                        let Ok(ha) = builder.add_orbit(a.0, a.1, a.2.clone()) else {
                            continue;
                        };
                        let Ok(hb) = builder.add_orbit(b.0, b.1, b.2.clone()) else {
                            continue;
                        };
                        let sa = SlotSpec {
                            orbit: ha,
                            slot_type: la,
                            fiber: 0,
                        };
                        let sb = SlotSpec {
                            orbit: hb,
                            slot_type: lb,
                            fiber: 0,
                        };
                        if builder.glue(sa, sb, 0).is_err() {
                            continue;
                        }
                        if let Ok(graph) = builder.build() {
                            out.push(graph);
                        }
                    }
                }
            }
        }
    }
    out
}
