//! Maximality of the stratum cut out by a marked graph.
//!
//! A marked graph describes a family of nodal curves with a `Z/d`-action; the
//! stratum is maximal when the action on a *generic* member does not deform,
//! together with the curve, into a stratum of strictly larger dimension for a
//! cyclic group of the same order.  The decision runs in three layers:
//!
//! 1. [`check_assumptions`] verifies the genericity hypotheses: every
//!    component orbit must be *rigid* (the generic member component has no
//!    automorphisms beyond its recorded effective action), every node orbit
//!    must be non-smoothable, and every component orbit must contribute
//!    positive moduli.  When a hypothesis provably fails the verdict machinery
//!    is not applicable; when it cannot be confirmed the verdict is reported
//!    as unverifiable.
//! 2. [`automorphism_group`] enumerates the finite automorphism group of a
//!    generic member.  Rigidity confines every automorphism to permutations
//!    of the copies inside each component orbit combined with powers of the
//!    effective generator on each copy, subject to preserving the node set.
//! 3. Every order-`d` element `β` of that group is a candidate replacement
//!    generator.  If the marking of the same curve by `β` lies in a strictly
//!    larger stratum ([`larger_stratum_case`]) or smooths a node that the
//!    original marking keeps ([`newly_smoothable_node`]), the original
//!    stratum is not maximal; [`build_beta_graph`] materialises the `β`
//!    marking so the comparison can be checked end to end.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::arith::{additive_order, gcd32, inv_mod, lcm};
use crate::branching::{
    canonicalize, enumerate_admissible, exceptional_reduction, quotient_genus,
    restrict_to_subgroup, teich_dimension, unit_act, BranchingSequence,
};
use crate::deformation::dimension_report;
use crate::marked_graph::{
    permutations, slot_rotation, Analyzed, EdgeData, EdgeOrbit, GraphError, HalfEdge, MarkedGraph,
    SlotKey, VertexData, VertexOrbit, SCHEMA,
};

/// An automorphism of a generic member of the stratum.
///
/// Component orbits are rigid at a generic point, so an automorphism is
/// determined by, per vertex orbit `o`: a permutation `sigma[o]` of the copy
/// positions `0..n`, and for each copy position `j` a twist `twists[o][j]`
/// recording the power of the effective generator applied when copy `j` is
/// carried to copy `sigma[o][j]`.  Distinct vertex orbits are never
/// exchanged: even when their numerical data agree, their members have
/// independent generic moduli and are not isomorphic.
///
/// On the points of a special orbit with per-copy fiber size `s`, the
/// automorphism sends the point with copy `j` and label `a` to the point with
/// copy `sigma[o][j]` and label `a + twists[o][j] (mod s)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Automorphism {
    /// Per vertex orbit: images of the copy positions.
    pub sigma: Vec<Vec<u32>>,
    /// Per vertex orbit and copy position: the twist applied, mod `d_i`.
    pub twists: Vec<Vec<u32>>,
}

/// The identity automorphism of the marked curve.
pub fn identity(a: &Analyzed) -> Automorphism {
    Automorphism {
        sigma: a
            .vertex_orbits()
            .iter()
            .map(|vo| (0..vo.n).collect())
            .collect(),
        twists: a
            .vertex_orbits()
            .iter()
            .map(|vo| vec![0; vo.n as usize])
            .collect(),
    }
}

/// The automorphism by which `γ^t` acts on the marked curve.
///
/// `γ` advances every copy position by one; each full lap around an orbit of
/// `n` copies applies the effective generator once.
pub fn gamma_power(a: &Analyzed, t: u32) -> Automorphism {
    let d = a.d();
    let t = if d == 0 { 0 } else { t % d };
    let mut sigma = Vec::new();
    let mut twists = Vec::new();
    for vo in a.vertex_orbits() {
        let n = vo.n;
        sigma.push((0..n).map(|j| (j + t) % n).collect());
        twists.push((0..n).map(|j| ((j + t) / n) % vo.d_i).collect());
    }
    Automorphism { sigma, twists }
}

/// Composition `f ∘ g` (apply `g` first, then `f`).
pub fn compose(a: &Analyzed, f: &Automorphism, g: &Automorphism) -> Automorphism {
    let mut sigma = Vec::new();
    let mut twists = Vec::new();
    for (o, vo) in a.vertex_orbits().iter().enumerate() {
        let n = vo.n as usize;
        let mut s = vec![0u32; n];
        let mut c = vec![0u32; n];
        for j in 0..n {
            let mid = g.sigma[o][j] as usize;
            s[j] = f.sigma[o][mid];
            c[j] = (g.twists[o][j] + f.twists[o][mid]) % vo.d_i;
        }
        sigma.push(s);
        twists.push(c);
    }
    Automorphism { sigma, twists }
}

/// Order of an automorphism.
///
/// A `sigma`-cycle of length `L` with total twist `T` returns to the identity
/// after `L · ord(T mod d_i)` applications; the order is the least common
/// multiple over all cycles of all orbits.
pub fn element_order(a: &Analyzed, f: &Automorphism) -> u64 {
    let mut ord = 1u64;
    for (o, vo) in a.vertex_orbits().iter().enumerate() {
        for cycle in cycles_of(&f.sigma[o]) {
            let total: u64 = cycle.iter().map(|&j| f.twists[o][j as usize] as u64).sum();
            let t = (total % vo.d_i as u64) as u32;
            ord = lcm(ord, cycle.len() as u64 * additive_order(t, vo.d_i) as u64);
        }
    }
    ord
}

/// Cycles of a permutation given as an image table, each cycle listed in
/// traversal order from its least element.
fn cycles_of(sigma: &[u32]) -> Vec<Vec<u32>> {
    let n = sigma.len();
    let mut seen = vec![false; n];
    let mut cycles = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut cycle = Vec::new();
        let mut j = start;
        loop {
            seen[j] = true;
            cycle.push(j as u32);
            j = sigma[j] as usize;
            if j == start {
                break;
            }
        }
        cycles.push(cycle);
    }
    cycles
}

/// The action of a candidate automorphism on the points of one special orbit,
/// in the point coordinates `x = copy + n·label`.
struct PointMap<'a> {
    n: u32,
    /// Per-copy fiber size of the slot.
    s: u32,
    sigma: &'a [u32],
    twists: &'a [u32],
}

impl PointMap<'_> {
    fn apply(&self, x: u32) -> u32 {
        let j = (x % self.n) as usize;
        let a = x / self.n;
        self.sigma[j] + self.n * ((a + self.twists[j] % self.s) % self.s)
    }
}

/// Whether a partially chosen automorphism preserves the pairing of one node
/// orbit.  Both endpoint orbits of the node orbit must already be assigned.
fn edge_orbit_preserved(
    a: &Analyzed,
    eo: &EdgeOrbit,
    chosen: &[(Vec<u32>, Vec<u32>)],
) -> bool {
    let voa = &a.vertex_orbits()[eo.slot_a.orbit];
    let vob = &a.vertex_orbits()[eo.slot_b.orbit];
    let n_points = voa.slot_orbit_size(eo.slot_a.slot_type);
    let map_a = PointMap {
        n: voa.n,
        s: n_points / voa.n,
        sigma: &chosen[eo.slot_a.orbit].0,
        twists: &chosen[eo.slot_a.orbit].1,
    };
    let map_b = PointMap {
        n: vob.n,
        s: vob.slot_orbit_size(eo.slot_b.slot_type) / vob.n,
        sigma: &chosen[eo.slot_b.orbit].0,
        twists: &chosen[eo.slot_b.orbit].1,
    };
    let c = eo.offset;
    (0..n_points).all(|x| map_b.apply((x + c) % n_points) == (map_a.apply(x) + c) % n_points)
}

/// Enumerates the automorphism group of a generic member of the stratum,
/// sorted lexicographically.
///
/// The group always contains the cyclic group generated by
/// [`gamma_power`]`(a, 1)`.  Candidates are searched orbit by orbit: every
/// combination of a copy permutation with per-copy twists is kept exactly
/// when it preserves the point pairing of every node orbit whose endpoints
/// are already assigned.  The search is exhaustive, so the returned list is
/// the whole group; the cost grows as `Π_o n_o! · d_i^{n_o}` and is meant
/// for the small orbits that stable graphs of modest genus have.
pub fn automorphism_group(a: &Analyzed) -> Vec<Automorphism> {
    let orbit_count = a.vertex_orbits().len();
    // Node orbits indexed by the last endpoint orbit they touch, so each is
    // checked as soon as both endpoints are assigned.
    let mut edges_by_last: Vec<Vec<usize>> = vec![Vec::new(); orbit_count];
    for (i, eo) in a.edge_orbits().iter().enumerate() {
        edges_by_last[eo.slot_a.orbit.max(eo.slot_b.orbit)].push(i);
    }
    let mut out = Vec::new();
    let mut chosen: Vec<(Vec<u32>, Vec<u32>)> = Vec::with_capacity(orbit_count);
    search_orbit(a, &edges_by_last, &mut chosen, &mut out);
    out.sort();
    out
}

fn search_orbit(
    a: &Analyzed,
    edges_by_last: &[Vec<usize>],
    chosen: &mut Vec<(Vec<u32>, Vec<u32>)>,
    out: &mut Vec<Automorphism>,
) {
    let o = chosen.len();
    if o == a.vertex_orbits().len() {
        out.push(Automorphism {
            sigma: chosen.iter().map(|(s, _)| s.clone()).collect(),
            twists: chosen.iter().map(|(_, c)| c.clone()).collect(),
        });
        return;
    }
    let vo = &a.vertex_orbits()[o];
    let n = vo.n as usize;
    let positions: Vec<usize> = (0..n).collect();
    for perm in permutations(&positions) {
        let sigma: Vec<u32> = perm.iter().map(|&p| p as u32).collect();
        let mut twists = vec![0u32; n];
        'odometer: loop {
            chosen.push((sigma.clone(), twists.clone()));
            let ok = edges_by_last[o]
                .iter()
                .all(|&i| edge_orbit_preserved(a, &a.edge_orbits()[i], chosen));
            if ok {
                search_orbit(a, edges_by_last, chosen, out);
            }
            chosen.pop();
            // Advance the odometer; stop after the last combination.
            let mut pos = 0;
            loop {
                if pos == n {
                    break 'odometer;
                }
                twists[pos] += 1;
                if twists[pos] < vo.d_i {
                    break;
                }
                twists[pos] = 0;
                pos += 1;
            }
        }
    }
}

/// The elements of [`automorphism_group`] whose order is exactly `d`, in the
/// group's sorted order.
pub fn elements_of_order_d(a: &Analyzed, group: &[Automorphism]) -> Vec<Automorphism> {
    let d = a.d() as u64;
    group
        .iter()
        .filter(|f| element_order(a, f) == d)
        .cloned()
        .collect()
}

/// How a replacement generator enlarges the stratum through a component
/// orbit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExtensionCase {
    /// The new generator splits the component orbit into several orbits.
    OrbitSplit,
    /// The effective order of the new generator on the components drops to at
    /// most a third of the recorded one.
    OrderDrop,
    /// The effective order exactly halves and the branching is not one of the
    /// two shapes whose half-order stratum coincides with the full one.
    OrderHalved,
}

/// Tests whether marking the curve by `beta` strictly enlarges the moduli
/// contribution of some component orbit.
///
/// Restricting an effective action to a proper subgroup never shrinks the
/// moduli of the quotient, and enlarges them strictly except when the index
/// is two and the branching has one of the exceptional doubling shapes; a
/// split orbit contributes once per new orbit.  Scanning the orbits in order,
/// the first witness is returned as `(vertex orbit, case)`.
pub fn larger_stratum_case(a: &Analyzed, beta: &Automorphism) -> Option<(usize, ExtensionCase)> {
    for (o, vo) in a.vertex_orbits().iter().enumerate() {
        let cycles = cycles_of(&beta.sigma[o]);
        if cycles.len() > 1 {
            return Some((o, ExtensionCase::OrbitSplit));
        }
        let total: u64 = beta.twists[o].iter().map(|&c| c as u64).sum();
        let t = (total % vo.d_i as u64) as u32;
        let ord = additive_order(t, vo.d_i);
        if 3 * ord <= vo.d_i {
            return Some((o, ExtensionCase::OrderDrop));
        }
        if 2 * ord == vo.d_i {
            let coincident = vo.h == 0 && exceptional_reduction(&vo.seq).is_some();
            if !coincident {
                return Some((o, ExtensionCase::OrderHalved));
            }
        }
    }
    None
}

/// Finds a node orbit that the `beta` marking smooths although the original
/// marking does not (assuming every node orbit is non-smoothable and
/// [`larger_stratum_case`] is empty, so the `beta` marking has the same
/// stratum dimension and the same node stabiliser orders).
///
/// For a non-swap node orbit joining distinct components, the canonical
/// generator of the node stabiliser scales the new smoothing parameter by
/// the exponent `ρ₁·c₁·o₁ + ρ₂·c₂·o₂ (mod |G_P|)` built from the rotation
/// exponents, the effective exponents `cᵢ` of the first-return maps of
/// `beta` on the two incident component orbits (the twists accumulated
/// around the whole `sigma`-cycle, not the twist at one copy), and the
/// trivially-acting orders; the orbit smooths exactly when the exponent
/// vanishes.  Loops at one component and swap orbits keep a non-vanishing
/// character for every replacement generator and are skipped.
pub fn newly_smoothable_node(a: &Analyzed, beta: &Automorphism) -> Option<usize> {
    for (idx, eo) in a.edge_orbits().iter().enumerate() {
        if eo.swap {
            continue;
        }
        let rep = &a.graph().edges[eo.members[0] as usize];
        if rep.loop_ {
            continue;
        }
        let mut exponent = 0u64;
        for end in &rep.ends {
            let o = a.orbit_of_vertex(end.vertex);
            let pos = a.position_in_orbit(end.vertex) as usize;
            // Effective exponent of the first-return map of `beta` on this
            // component: accumulate the twists along the `sigma`-cycle.
            let mut c = 0u64;
            let mut j = pos;
            loop {
                c += beta.twists[o][j] as u64;
                j = beta.sigma[o][j] as usize;
                if j == pos {
                    break;
                }
            }
            let ord_trivial = a.vertex_orbits()[o].ord_trivial as u64;
            exponent += end.rot as u64 * c * ord_trivial;
        }
        if exponent.is_multiple_of(eo.stab_order as u64) {
            return Some(idx);
        }
    }
    None
}

/// Builds the marked graph of the same nodal curve with the `Z/d`-structure
/// defined by the order-`d` automorphism `beta` in place of `γ`.
///
/// The components, nodes, and geometric genera are untouched; what changes is
/// the group bookkeeping.  A `sigma`-cycle of length `L` with total twist `T`
/// becomes a component orbit of length `L` whose effective order is the
/// additive order `D` of `T` mod `d_i`; the branching is restricted to the
/// subgroup of order `D` and rewritten for the generator that the cycle
/// actually induces.  Every special point is re-classified: its new faithful
/// order is the order of the intersection of its stabiliser with the new
/// effective group, points whose new stabiliser is trivial become plain
/// labelled points when they carry a node and are forgotten otherwise, and
/// the nodes are re-partitioned into orbits of the new action.  The result is
/// fully re-validated.
///
/// # Panics
///
/// Panics when `beta` does not have order exactly `d` or its shape does not
/// match the graph.
pub fn build_beta_graph(a: &Analyzed, beta: &Automorphism) -> Result<Analyzed, GraphError> {
    let d = a.d();
    let graph = a.graph();
    let orbits = a.vertex_orbits();
    assert_eq!(
        element_order(a, beta),
        d as u64,
        "the replacement generator must have order exactly d"
    );
    assert_eq!(beta.sigma.len(), orbits.len(), "per-orbit data mismatch");

    // --- Per-cycle numerical data of the new structure. ---
    struct Cycle {
        len: u32,
        /// `gcd` of the total twist with `d_i` (the index of the new
        /// effective group inside the old one).
        ghat: u32,
        d_hat: u32,
        ord_hat: u32,
        h_hat: u32,
        seq_hat: BranchingSequence,
        /// Unit `w` with `T = ghat·w`; `0` when the new action is trivial.
        winv: u32,
    }
    let mut cycles: Vec<Cycle> = Vec::new();
    // Vertex id -> cycle index.
    let mut cycle_of_vertex = vec![usize::MAX; graph.vertices.len()];
    for (o, vo) in orbits.iter().enumerate() {
        for cycle in cycles_of(&beta.sigma[o]) {
            let len = cycle.len() as u32;
            let total: u64 = cycle.iter().map(|&j| beta.twists[o][j as usize] as u64).sum();
            let t = (total % vo.d_i as u64) as u32;
            let ghat = gcd32(t, vo.d_i);
            let d_hat = vo.d_i / ghat;
            assert_eq!(d % len, 0, "cycle lengths of an order-d element divide d");
            assert_eq!((d / len) % d_hat, 0, "effective order divides the stabiliser");
            let ord_hat = (d / len) / d_hat;
            let (seq_hat, winv) = if d_hat == 1 {
                (BranchingSequence::empty(1), 0)
            } else {
                let w = t / ghat;
                let winv = inv_mod(w as u64, d_hat as u64)
                    .expect("the reduced twist is a unit modulo the new order")
                    as u32;
                let restricted = restrict_to_subgroup(vo.g, &vo.seq, d_hat)
                    .expect("a validated orbit restricts to any divisor order");
                (unit_act(winv, &restricted), winv)
            };
            let h_hat = if d_hat == 1 {
                vo.g
            } else {
                quotient_genus(vo.g, &seq_hat).expect("restricted branching stays admissible")
            };
            for &j in &cycle {
                cycle_of_vertex[vo.members[j as usize] as usize] = cycles.len();
            }
            cycles.push(Cycle {
                len,
                ghat,
                d_hat,
                ord_hat,
                h_hat,
                seq_hat,
                winv,
            });
        }
    }

    // --- Point -> node bookkeeping in the coordinates of each slot orbit. ---
    let mut point_edge: BTreeMap<(SlotKey, u32), u32> = BTreeMap::new();
    let mut edge_points: Vec<[(SlotKey, u32); 2]> =
        vec![[(SlotKey { orbit: 0, slot_type: 0, fiber: 0 }, 0); 2]; graph.edges.len()];
    for eo in a.edge_orbits() {
        let n_points = orbits[eo.slot_a.orbit].slot_orbit_size(eo.slot_a.slot_type);
        let rep = &graph.edges[eo.members[0] as usize];
        let pos_a = a.position_in_orbit(rep.ends[0].vertex);
        for (t, &eid) in eo.members.iter().enumerate() {
            let xa = (pos_a + t as u32) % n_points;
            let xb = (xa + eo.offset) % n_points;
            point_edge.insert((eo.slot_a, xa), eid);
            point_edge.insert((eo.slot_b, xb), eid);
            edge_points[eid as usize] = [(eo.slot_a, xa), (eo.slot_b, xb)];
        }
    }

    // --- Re-classify every special point under the new structure. ---
    #[derive(Clone, Copy)]
    struct NewSlot {
        slot_type: u32,
        fiber: u32,
        m_hat: u32,
        cycle: usize,
    }
    let mut new_slot: BTreeMap<(SlotKey, u32), NewSlot> = BTreeMap::new();
    let mut k_hat: Vec<Vec<u32>> = cycles
        .iter()
        .map(|c| vec![0u32; c.d_hat as usize])
        .collect();
    let mut label_next: Vec<u32> = vec![0; cycles.len()];
    let mut free_slots_new: Vec<Vec<(u32, u32)>> = vec![Vec::new(); cycles.len()];
    for (o, vo) in orbits.iter().enumerate() {
        let mut slots: Vec<SlotKey> = Vec::new();
        for (l, k) in vo.seq.support() {
            for f in 0..k {
                slots.push(SlotKey { orbit: o, slot_type: l, fiber: f });
            }
        }
        for label in a.free_labels_at_orbit(o) {
            slots.push(SlotKey { orbit: o, slot_type: 0, fiber: label });
        }
        for slot in slots {
            let n_points = vo.slot_orbit_size(slot.slot_type);
            let s = n_points / vo.n;
            let pm = PointMap {
                n: vo.n,
                s,
                sigma: &beta.sigma[o],
                twists: &beta.twists[o],
            };
            let glued = point_edge.contains_key(&(slot, 0));
            let e_old = if slot.slot_type == 0 {
                vo.d_i
            } else {
                gcd32(slot.slot_type, vo.d_i)
            };
            let mut seen = vec![false; n_points as usize];
            for x0 in 0..n_points {
                if seen[x0 as usize] {
                    continue;
                }
                let mut points = Vec::new();
                let mut x = x0;
                loop {
                    seen[x as usize] = true;
                    points.push(x);
                    x = pm.apply(x);
                    if x == x0 {
                        break;
                    }
                }
                let cid = cycle_of_vertex[vo.members[(x0 % vo.n) as usize] as usize];
                let cyc = &cycles[cid];
                let m_hat = vo.d_i / lcm(e_old as u64, cyc.ghat as u64) as u32;
                debug_assert_eq!(
                    points.len() as u32 * m_hat * cyc.ord_hat,
                    d,
                    "a new special orbit has d / (point stabiliser) points"
                );
                if m_hat == 1 {
                    if !glued {
                        continue; // an unmarked generic orbit of the new action
                    }
                    let label = label_next[cid];
                    label_next[cid] += 1;
                    for &p in &points {
                        new_slot.insert(
                            (slot, p),
                            NewSlot { slot_type: 0, fiber: label, m_hat: 1, cycle: cid },
                        );
                    }
                } else {
                    let split = gcd32(e_old, cyc.ghat);
                    let l_hat = ((cyc.winv as u64 * (slot.slot_type / split) as u64)
                        % cyc.d_hat as u64) as u32;
                    assert!(l_hat >= 1, "a point with a nontrivial new stabiliser keeps a type");
                    let fiber = k_hat[cid][l_hat as usize];
                    k_hat[cid][l_hat as usize] += 1;
                    if !glued {
                        free_slots_new[cid].push((l_hat, fiber));
                    }
                    for &p in &points {
                        new_slot.insert(
                            (slot, p),
                            NewSlot { slot_type: l_hat, fiber, m_hat, cycle: cid },
                        );
                    }
                }
            }
        }
    }
    // The per-cycle fiber counts must reproduce the restricted branching.
    for (cid, cyc) in cycles.iter().enumerate() {
        for l in 1..cyc.d_hat {
            debug_assert_eq!(
                k_hat[cid][l as usize],
                cyc.seq_hat.count(l),
                "per-point classification matches the restricted branching"
            );
        }
    }

    // --- Assemble the new graph over the same vertex and edge ids. ---
    let mut vertices = Vec::with_capacity(graph.vertices.len());
    for v in &graph.vertices {
        let cid = cycle_of_vertex[v.id as usize];
        let cyc = &cycles[cid];
        let mut free_slots = free_slots_new[cid].clone();
        free_slots.sort_unstable();
        vertices.push(VertexData {
            id: v.id,
            g: v.g,
            n: cyc.len,
            ord_trivial: cyc.ord_hat,
            d_i: cyc.d_hat,
            h: cyc.h_hat,
            k: cyc.seq_hat.counts().to_vec(),
            free_slots,
        });
    }
    let mut edges = Vec::with_capacity(graph.edges.len());
    for e in &graph.edges {
        let [(s0, x0), (s1, x1)] = edge_points[e.id as usize];
        let i0 = new_slot[&(s0, x0)];
        let i1 = new_slot[&(s1, x1)];
        let v0 = orbits[s0.orbit].members[(x0 % orbits[s0.orbit].n) as usize];
        let v1 = orbits[s1.orbit].members[(x1 % orbits[s1.orbit].n) as usize];
        let swap = s0 == s1 && i0.slot_type == i1.slot_type && i0.fiber == i1.fiber;
        let ends = if swap {
            let cyc = &cycles[i0.cycle];
            let full = i0.m_hat * cyc.ord_hat;
            let rho = slot_rotation(cyc.d_hat, i0.slot_type).1;
            let stab = 2 * full;
            let second = ((rho as u64 * (stab / i0.m_hat) as u64) % stab as u64) as u32;
            [
                HalfEdge { vertex: v0, slot_type: i0.slot_type, fiber: i0.fiber, rot: 0, stab },
                HalfEdge { vertex: v1, slot_type: i1.slot_type, fiber: i1.fiber, rot: second, stab },
            ]
        } else {
            let mk = |v: u32, info: NewSlot| {
                let cyc = &cycles[info.cycle];
                let (m, rho) = slot_rotation(cyc.d_hat, info.slot_type);
                debug_assert_eq!(m, info.m_hat);
                HalfEdge { vertex: v, slot_type: info.slot_type, fiber: info.fiber, rot: rho, stab: m }
            };
            [mk(v0, i0), mk(v1, i1)]
        };
        edges.push(EdgeData { id: e.id, loop_: v0 == v1, swap, ends });
    }
    let mut gamma_vertex = vec![0u32; graph.vertices.len()];
    for (o, vo) in orbits.iter().enumerate() {
        for (j, &vid) in vo.members.iter().enumerate() {
            gamma_vertex[vid as usize] = vo.members[beta.sigma[o][j] as usize];
        }
    }
    let mut gamma_edge = vec![0u32; graph.edges.len()];
    for e in &graph.edges {
        let (s0, x0) = edge_points[e.id as usize][0];
        let vo = &orbits[s0.orbit];
        let pm = PointMap {
            n: vo.n,
            s: vo.slot_orbit_size(s0.slot_type) / vo.n,
            sigma: &beta.sigma[s0.orbit],
            twists: &beta.twists[s0.orbit],
        };
        gamma_edge[e.id as usize] = point_edge[&(s0, pm.apply(x0))];
    }
    MarkedGraph {
        schema: SCHEMA.to_string(),
        d,
        vertices,
        edges,
        gamma_vertex,
        gamma_edge,
    }
    .analyze()
}

/// Whether the rigidity hypothesis for one component orbit is confirmed,
/// refuted, or out of reach.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Fullness {
    /// The generic member provably has no automorphisms beyond the recorded
    /// effective action.
    Verified,
    /// The generic member provably has extra automorphisms.
    Violated,
    /// No criterion applies.
    Unverifiable,
}

/// Searches for an admissible branching of twice the effective order whose
/// restriction is the orbit's branching with the same moduli dimension: such
/// a datum extends the action of every generic member, refuting rigidity.
///
/// Only doublings can tie the dimension (restriction to a subgroup of index
/// three or more strictly enlarges the quotient moduli), so the scan is
/// complete for extensions within cyclic groups.
pub fn doubling_with_equal_moduli(vo: &VertexOrbit) -> Option<BranchingSequence> {
    let base = teich_dimension(vo.h, vo.seq.k_sum())
        .expect("a component orbit of genus at least 2 has a stable quotient");
    let class = canonicalize(&vo.seq);
    for cand in enumerate_admissible(vo.g, 2 * vo.d_i) {
        let h2 = quotient_genus(vo.g, &cand).expect("enumerated data are admissible");
        let dim2 = teich_dimension(h2, cand.k_sum()).expect("admissible data have stable quotients");
        if dim2 != base {
            continue;
        }
        let down = restrict_to_subgroup(vo.g, &cand, vo.d_i).expect("the order doubles");
        if canonicalize(&down) == class {
            return Some(cand);
        }
    }
    None
}

fn orbit_fullness(vo: &VertexOrbit) -> (Fullness, String) {
    if vo.g < 2 {
        return (
            Fullness::Violated,
            format!(
                "components of genus {} carry automorphisms beyond any finite marking",
                vo.g
            ),
        );
    }
    if let Some(cand) = doubling_with_equal_moduli(vo) {
        return (
            Fullness::Violated,
            format!(
                "the effective action extends to order {} with branching {:?} and equal moduli",
                2 * vo.d_i,
                cand.counts()
            ),
        );
    }
    if vo.d_i == 1 && vo.g >= 3 {
        return (
            Fullness::Verified,
            "a generic curve of genus at least 3 has no automorphisms".to_string(),
        );
    }
    if vo.d_i == 2 && vo.h == 0 {
        return (
            Fullness::Verified,
            "a generic hyperelliptic curve has exactly the involution".to_string(),
        );
    }
    if vo.h >= 2 && vo.seq.k_sum() >= 1 {
        return (
            Fullness::Verified,
            "a ramified action over a generic quotient of genus at least 2 is rigid".to_string(),
        );
    }
    (
        Fullness::Unverifiable,
        "no rigidity criterion applies to this component type".to_string(),
    )
}

/// Rigidity status of one component orbit.
#[derive(Debug, Clone, Serialize)]
pub struct OrbitAssumption {
    /// Index into the vertex orbits.
    pub vertex_orbit: usize,
    pub fullness: Fullness,
    /// Human-readable justification.
    pub reason: String,
}

/// The genericity hypotheses of the maximality analysis.
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    /// Rigidity per component orbit.
    pub orbits: Vec<OrbitAssumption>,
    /// Every node orbit is non-smoothable.
    pub all_nodes_nonsmoothable: bool,
    /// Every component orbit contributes positive moduli.
    pub all_dimensions_positive: bool,
}

impl AssumptionReport {
    /// Reasons for which the hypotheses provably fail.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for oa in &self.orbits {
            if oa.fullness == Fullness::Violated {
                out.push(format!("component orbit {}: {}", oa.vertex_orbit, oa.reason));
            }
        }
        if !self.all_nodes_nonsmoothable {
            out.push("some node orbit smooths equivariantly".to_string());
        }
        if !self.all_dimensions_positive {
            out.push("some component orbit contributes no moduli".to_string());
        }
        out
    }

    /// Reasons for which the hypotheses stay unconfirmed.
    pub fn unknowns(&self) -> Vec<String> {
        self.orbits
            .iter()
            .filter(|oa| oa.fullness == Fullness::Unverifiable)
            .map(|oa| format!("component orbit {}: {}", oa.vertex_orbit, oa.reason))
            .collect()
    }
}

/// Checks the genericity hypotheses of the maximality analysis.
pub fn check_assumptions(a: &Analyzed) -> AssumptionReport {
    let orbits = a
        .vertex_orbits()
        .iter()
        .enumerate()
        .map(|(i, vo)| {
            let (fullness, reason) = orbit_fullness(vo);
            OrbitAssumption { vertex_orbit: i, fullness, reason }
        })
        .collect();
    let all_nodes_nonsmoothable = a.edge_orbits().iter().all(|eo| !eo.smoothable());
    let all_dimensions_positive = dimension_report(a)
        .orbits
        .iter()
        .all(|o| o.dimension > 0);
    AssumptionReport { orbits, all_nodes_nonsmoothable, all_dimensions_positive }
}

/// Why a stratum fails to be maximal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum NotMaximalReason {
    /// Re-marking by the witness generator lands in a stratum of strictly
    /// larger dimension.
    LargerStratum {
        case: ExtensionCase,
        vertex_orbit: usize,
        beta: Automorphism,
    },
    /// Re-marking by the witness generator smooths a node orbit within a
    /// stratum of the same dimension.
    NewActionSmooths { edge_orbit: usize, beta: Automorphism },
}

/// Outcome of the maximality analysis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Verdict {
    /// No replacement generator enlarges the stratum or smooths a node.
    Maximal,
    /// A replacement generator witnesses a larger deformation space.
    NotMaximal(NotMaximalReason),
    /// The genericity hypotheses provably fail, so the analysis does not
    /// apply.
    AssumptionsViolated { reasons: Vec<String> },
    /// Some hypothesis stays unconfirmed, so a `Maximal` claim would be
    /// unsound.
    Unverifiable { reasons: Vec<String> },
}

/// Full record of one maximality decision.
#[derive(Debug, Clone, Serialize)]
pub struct MaximalityReport {
    pub assumptions: AssumptionReport,
    /// Order of the generic automorphism group, when it was computed.
    pub aut_order: Option<u64>,
    /// Number of order-`d` elements, when the group was computed.
    pub order_d_count: Option<usize>,
    pub verdict: Verdict,
}

/// Decides maximality of the stratum of a marked graph.
///
/// The hypotheses are checked first: a proven violation or an unconfirmed
/// hypothesis short-circuits into the corresponding verdict.  Otherwise every
/// order-`d` automorphism is tested, in sorted order, first against
/// [`larger_stratum_case`] and then against [`newly_smoothable_node`]; the
/// first witness decides.  Powers `γ^u` pass both tests, so their presence
/// among the candidates is harmless.
pub fn is_maximal(a: &Analyzed) -> MaximalityReport {
    let assumptions = check_assumptions(a);
    let violations = assumptions.violations();
    if !violations.is_empty() {
        return MaximalityReport {
            assumptions,
            aut_order: None,
            order_d_count: None,
            verdict: Verdict::AssumptionsViolated { reasons: violations },
        };
    }
    let unknowns = assumptions.unknowns();
    if !unknowns.is_empty() {
        return MaximalityReport {
            assumptions,
            aut_order: None,
            order_d_count: None,
            verdict: Verdict::Unverifiable { reasons: unknowns },
        };
    }
    let group = automorphism_group(a);
    let betas = elements_of_order_d(a, &group);
    let aut_order = Some(group.len() as u64);
    let order_d_count = Some(betas.len());
    for beta in &betas {
        if let Some((vertex_orbit, case)) = larger_stratum_case(a, beta) {
            return MaximalityReport {
                assumptions,
                aut_order,
                order_d_count,
                verdict: Verdict::NotMaximal(NotMaximalReason::LargerStratum {
                    case,
                    vertex_orbit,
                    beta: beta.clone(),
                }),
            };
        }
    }
    for beta in &betas {
        if let Some(edge_orbit) = newly_smoothable_node(a, beta) {
            return MaximalityReport {
                assumptions,
                aut_order,
                order_d_count,
                verdict: Verdict::NotMaximal(NotMaximalReason::NewActionSmooths {
                    edge_orbit,
                    beta: beta.clone(),
                }),
            };
        }
    }
    MaximalityReport { assumptions, aut_order, order_d_count, verdict: Verdict::Maximal }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deformation::stratum_dimension;
    use crate::marked_graph::{GraphBuilder, OrbitHandle, SlotSpec};

    fn seq(d: u32, counts: &[u32]) -> BranchingSequence {
        BranchingSequence::new(d, counts.to_vec()).unwrap()
    }

    fn slot(orbit: OrbitHandle, slot_type: u32, fiber: u32) -> SlotSpec {
        SlotSpec { orbit, slot_type, fiber }
    }

    /// Genus-5 curve with an involution: a hyperelliptic genus-2 component
    /// glued at a branch point to a pointwise-fixed genus-3 component.
    fn involution_with_fixed_part() -> Analyzed {
        let mut b = GraphBuilder::new(2);
        let v1 = b.add_orbit(2, 1, seq(2, &[6])).unwrap();
        let v2 = b.add_orbit(3, 1, seq(1, &[])).unwrap();
        b.glue(slot(v1, 1, 0), slot(v2, 0, 0), 0).unwrap();
        b.build().unwrap()
    }

    /// Two genus-8 components with `Z/4`-actions of branching `(1, 0, 1)`,
    /// joined at their type-1 branch points.
    fn order_four_bridge() -> Analyzed {
        let mut b = GraphBuilder::new(4);
        let v1 = b.add_orbit(8, 1, seq(4, &[1, 0, 1])).unwrap();
        let v2 = b.add_orbit(8, 1, seq(4, &[1, 0, 1])).unwrap();
        b.glue(slot(v1, 1, 0), slot(v2, 1, 0), 0).unwrap();
        b.build().unwrap()
    }

    /// `d = 4` tripod: a hyperelliptic component on which `γ` acts through
    /// its involution (trivially-acting order 2), joined along a generic
    /// point orbit to a two-component orbit of hyperelliptic curves that `γ`
    /// swaps.  The single node orbit has character 1, so the curve sits in
    /// the census; every order-4 automorphism is a power of `γ`.
    fn swapped_pair_tripod() -> Analyzed {
        let mut b = GraphBuilder::new(4);
        let va = b.add_orbit(2, 1, seq(2, &[6])).unwrap();
        let vb = b.add_orbit(2, 2, seq(2, &[6])).unwrap();
        b.glue(slot(va, 0, 0), slot(vb, 1, 0), 0).unwrap();
        b.build().unwrap()
    }

    #[test]
    fn involution_with_fixed_part_is_maximal() {
        let a = involution_with_fixed_part();
        let report = is_maximal(&a);
        assert_eq!(report.verdict, Verdict::Maximal);
        assert_eq!(report.aut_order, Some(2));
        assert_eq!(report.order_d_count, Some(1));
        for oa in &report.assumptions.orbits {
            assert_eq!(oa.fullness, Fullness::Verified, "{}", oa.reason);
        }
        assert!(report.assumptions.all_nodes_nonsmoothable);
        assert!(report.assumptions.all_dimensions_positive);
        // The group is exactly {identity, γ}.
        let group = automorphism_group(&a);
        assert_eq!(group, vec![identity(&a), gamma_power(&a, 1)]);
    }

    #[test]
    fn order_four_bridge_group_and_verdict() {
        let a = order_four_bridge();
        // The node joins two fixed points, so the twists on the two
        // components are independent: the group is Z/4 × Z/4.
        let group = automorphism_group(&a);
        assert_eq!(group.len(), 16);
        let betas = elements_of_order_d(&a, &group);
        assert_eq!(betas.len(), 12);
        // Closure under composition.
        let set: std::collections::BTreeSet<_> = group.iter().cloned().collect();
        for f in &group {
            for g in &group {
                assert!(set.contains(&compose(&a, f, g)));
            }
        }
        for t in 0..4 {
            assert!(set.contains(&gamma_power(&a, t)));
        }
        // The sorted order-4 elements start with the twist pair (0, 1),
        // which kills the first component's effective action.
        let first = &betas[0];
        assert_eq!(first.twists, vec![vec![0], vec![1]]);
        assert_eq!(
            larger_stratum_case(&a, first),
            Some((0, ExtensionCase::OrderDrop))
        );
        let report = is_maximal(&a);
        match &report.verdict {
            Verdict::NotMaximal(NotMaximalReason::LargerStratum { case, vertex_orbit, beta }) => {
                assert_eq!(*case, ExtensionCase::OrderDrop);
                assert_eq!(*vertex_orbit, 0);
                assert_eq!(beta, first);
            }
            other => panic!("expected a larger-stratum witness, got {other:?}"),
        }
    }

    #[test]
    fn order_drop_witness_has_strictly_larger_dimension() {
        let a = order_four_bridge();
        assert_eq!(stratum_dimension(&a), 10);
        let beta = Automorphism {
            sigma: vec![vec![0], vec![0]],
            twists: vec![vec![0], vec![1]],
        };
        let b = build_beta_graph(&a, &beta).unwrap();
        // The first component becomes pointwise fixed with its six branch
        // points unmarked except the node: moduli 3·8 − 3 + 1 = 22; the
        // second keeps its marking: 3·2 − 3 + 2 = 5.
        assert_eq!(stratum_dimension(&b), 27);
        assert_eq!(b.total_genus(), a.total_genus());
    }

    #[test]
    fn smoothing_witness_keeps_dimension_and_smooths_the_node() {
        let a = order_four_bridge();
        let beta = Automorphism {
            sigma: vec![vec![0], vec![0]],
            twists: vec![vec![1], vec![3]],
        };
        assert_eq!(element_order(&a, &beta), 4);
        assert_eq!(larger_stratum_case(&a, &beta), None);
        assert_eq!(newly_smoothable_node(&a, &beta), Some(0));
        let b = build_beta_graph(&a, &beta).unwrap();
        assert_eq!(stratum_dimension(&b), stratum_dimension(&a));
        assert!(b.edge_orbits()[0].smoothable());
        // γ itself never witnesses a smoothing.
        assert_eq!(newly_smoothable_node(&a, &gamma_power(&a, 1)), None);
    }

    #[test]
    fn swapped_components_use_the_first_return_twist() {
        let a = swapped_pair_tripod();
        assert_eq!(a.total_genus(), 6);
        assert_eq!(a.edge_orbits().len(), 1);
        assert!(!a.edge_orbits()[0].smoothable());
        // Automorphisms: an independent involution twist on each of the two
        // orbits, times the choice of swapping the paired components.
        let group = automorphism_group(&a);
        assert_eq!(group.len(), 8);
        // The only order-4 elements are γ and γ³.  Their per-copy twists on
        // the swapped orbit are (0, 1) in one order or the other, but the
        // first-return map of either on each paired component is the
        // hyperelliptic involution (total twist 1), so the node character
        // stays 1 and neither is a smoothing witness.
        let betas = elements_of_order_d(&a, &group);
        let expect: std::collections::BTreeSet<_> =
            [gamma_power(&a, 1), gamma_power(&a, 3)].into_iter().collect();
        assert_eq!(betas.iter().cloned().collect::<std::collections::BTreeSet<_>>(), expect);
        for beta in &betas {
            assert_eq!(larger_stratum_case(&a, beta), None);
            assert_eq!(newly_smoothable_node(&a, beta), None);
            let again = build_beta_graph(&a, beta).unwrap();
            assert_eq!(stratum_dimension(&again), stratum_dimension(&a));
            assert!(!again.edge_orbits()[0].smoothable());
        }
        let report = is_maximal(&a);
        assert_eq!(report.verdict, Verdict::Maximal);
    }

    #[test]
    fn remarking_by_gamma_reproduces_the_graph() {
        let graphs = [involution_with_fixed_part(), order_four_bridge(), {
            let mut b = GraphBuilder::new(2);
            let v = b.add_orbit(2, 2, seq(1, &[])).unwrap();
            b.glue_swap(slot(v, 0, 0)).unwrap();
            b.build().unwrap()
        }, {
            let mut b = GraphBuilder::new(2);
            let v = b.add_orbit(1, 1, seq(2, &[4])).unwrap();
            b.glue(slot(v, 1, 0), slot(v, 1, 1), 0).unwrap();
            b.build().unwrap()
        }];
        for a in &graphs {
            let again = build_beta_graph(a, &gamma_power(a, 1)).unwrap();
            assert_eq!(again.canonical_encoding(), a.canonical_encoding());
        }
    }

    #[test]
    fn halving_is_a_witness_unless_the_shapes_coincide() {
        // A genus-2 component with the exceptional branching (1, 2, 1) for
        // Z/4 glued to a genus-8 component: halving the first component's
        // effective order keeps its moduli, halving the second enlarges them.
        let mut b = GraphBuilder::new(4);
        let v1 = b.add_orbit(2, 1, seq(4, &[1, 2, 1])).unwrap();
        let v2 = b.add_orbit(8, 1, seq(4, &[1, 0, 1])).unwrap();
        b.glue(slot(v1, 1, 0), slot(v2, 1, 0), 0).unwrap();
        let a = b.build().unwrap();
        assert!(!a.edge_orbits()[0].smoothable());
        let halve_first = Automorphism {
            sigma: vec![vec![0], vec![0]],
            twists: vec![vec![2], vec![1]],
        };
        assert_eq!(element_order(&a, &halve_first), 4);
        // Orbit 0 has the coincident shape, so the scan moves on and finds
        // nothing; the exponent test then reports no new smoothing either.
        assert_eq!(larger_stratum_case(&a, &halve_first), None);
        assert_eq!(newly_smoothable_node(&a, &halve_first), None);
        let halve_second = Automorphism {
            sigma: vec![vec![0], vec![0]],
            twists: vec![vec![1], vec![2]],
        };
        assert_eq!(
            larger_stratum_case(&a, &halve_second),
            Some((1, ExtensionCase::OrderHalved))
        );
        // The exceptional component type has no applicable rigidity
        // criterion, so the overall verdict is unverifiable.
        let report = is_maximal(&a);
        assert!(matches!(report.verdict, Verdict::Unverifiable { .. }));
    }

    #[test]
    fn orbit_split_is_detected() {
        let a = involution_with_fixed_part();
        // Not an actual automorphism of this curve; the case test reads only
        // the combinatorics.
        let split = Automorphism {
            sigma: vec![vec![0], vec![0]],
            twists: vec![vec![1], vec![0]],
        };
        assert_eq!(larger_stratum_case(&a, &split), None);
        let mut b = GraphBuilder::new(2);
        let v = b.add_orbit(2, 2, seq(1, &[])).unwrap();
        b.glue_swap(slot(v, 0, 0)).unwrap();
        let pair = b.build().unwrap();
        let split_pair = Automorphism {
            sigma: vec![vec![0, 1]],
            twists: vec![vec![0, 0]],
        };
        assert_eq!(
            larger_stratum_case(&pair, &split_pair),
            Some((0, ExtensionCase::OrbitSplit))
        );
    }

    #[test]
    fn genus_two_components_with_trivial_action_violate_rigidity() {
        let mut b = GraphBuilder::new(2);
        let v = b.add_orbit(2, 2, seq(1, &[])).unwrap();
        b.glue_swap(slot(v, 0, 0)).unwrap();
        let a = b.build().unwrap();
        let report = is_maximal(&a);
        match &report.verdict {
            Verdict::AssumptionsViolated { reasons } => {
                assert!(!reasons.is_empty());
            }
            other => panic!("expected violated assumptions, got {other:?}"),
        }
        // The doubling scan is what refutes rigidity here: a genus-2 curve
        // always carries the hyperelliptic involution, with equal moduli.
        let vo = &a.vertex_orbits()[0];
        let cand = doubling_with_equal_moduli(vo).unwrap();
        assert_eq!(cand.d(), 2);
        assert_eq!(cand.counts(), &[6]);
    }

    #[test]
    fn composition_order_and_powers_are_consistent() {
        let a = order_four_bridge();
        let gamma = gamma_power(&a, 1);
        assert_eq!(element_order(&a, &gamma), 4);
        let mut power = identity(&a);
        for _ in 0..4 {
            power = compose(&a, &gamma, &power);
        }
        assert_eq!(power, identity(&a));
        assert_eq!(compose(&a, &gamma, &gamma), gamma_power(&a, 2));
    }
}
