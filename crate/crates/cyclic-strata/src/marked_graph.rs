//! Dual graphs of stable curves with a `Z/d` action.
//!
//! A *marked graph* records a stable curve `X` of genus at least 2 together
//! with an effective action of `G = Z/d = <γ>`: one vertex per irreducible
//! component, one edge per node, and the two permutations induced by `γ`.
//! Every vertex carries the numerical data of the action of its stabiliser on
//! the component; every half-edge records which special orbit of the
//! component the node lies in, together with the local rotation data.
//!
//! The JSON schema (`cyclic-strata/1`) is flat and explicit:
//!
//! ```json
//! {
//!   "schema": "cyclic-strata/1",
//!   "d": 2,
//!   "vertices": [{"id": 0, "g": 2, "n": 1, "ord_trivial": 1, "d_i": 2,
//!                 "h": 0, "k": [6], "free_slots": [[1,1],[1,2],[1,3],[1,4],[1,5]]}, ...],
//!   "edges": [{"id": 0, "ends": [{"vertex": 0, "slot_type": 1, "fiber": 0,
//!                                 "rot": 1, "stab": 2}, ...],
//!              "loop": false, "swap": false}, ...],
//!   "gamma_vertex": [0, 1],
//!   "gamma_edge": [0]
//! }
//! ```
//!
//! Vertex fields: `g` is the geometric genus of the component, `n` the length
//! of its `γ`-orbit, `ord_trivial` the order of the subgroup acting trivially
//! on it, `d_i` the order of the effective quotient group `H_i` acting on it
//! (so `n · d_i · ord_trivial = d`), `h` the genus of the quotient by `H_i`,
//! `k` the branching sequence of that action, and `free_slots` the branch
//! orbits of the action that do **not** carry nodes, as `(type, fiber)`
//! pairs.
//!
//! Half-edge fields: `slot_type = l >= 1` places the node end in the `fiber`-th
//! branch orbit of type `l` (then `stab` is the faithful rotation order
//! `d_i / gcd(l, d_i)` and `rot` the canonical rotation exponent), while
//! `slot_type = 0` places it in a free orbit identified by the label `fiber`
//! (then `stab = 1`, `rot = 0`). For a branch-swapping node (`swap: true`)
//! both ends lie in the same orbit, `stab` is the order of the full node
//! stabiliser (twice the point stabiliser), and the two `rot` fields hold
//! `0` and the exponent with which the canonical node-stabiliser generator
//! scales the smoothing parameter.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{gcd, gcd32, units};
use crate::branching::{
    is_admissible, quotient_genus, rotation_exponent, BranchingError, BranchingSequence,
    NumericalTypeClass,
};

/// The schema tag accepted by [`MarkedGraph::analyze`].
pub const SCHEMA: &str = "cyclic-strata/1";

/// Errors detected while validating a marked graph.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("unsupported schema {0:?} (expected {SCHEMA:?})")]
    Schema(String),
    #[error("a marked graph needs at least one vertex and one edge")]
    Empty,
    #[error("invalid permutation data: {0}")]
    Permutation(String),
    #[error("vertex {id}: {reason}")]
    Vertex { id: u32, reason: String },
    #[error("edge {id}: {reason}")]
    Edge { id: u32, reason: String },
    #[error("graph is not connected")]
    Disconnected,
    #[error("total arithmetic genus {0} is less than 2")]
    GenusTooSmall(u32),
    #[error("the action is not effective: a subgroup of order {0} acts trivially everywhere")]
    Ineffective(u32),
    #[error(transparent)]
    Branching(#[from] BranchingError),
}

/// One component of the stable curve.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexData {
    /// Position in the vertex list.
    pub id: u32,
    /// Geometric genus of the component.
    pub g: u32,
    /// Length of the `γ`-orbit of the component.
    pub n: u32,
    /// Order of the subgroup of the component stabiliser acting trivially.
    pub ord_trivial: u32,
    /// Order of the effective quotient group `H_i` acting on the component.
    pub d_i: u32,
    /// Genus of the quotient of the component by `H_i`.
    pub h: u32,
    /// Branching sequence of the `H_i` action (`d_i - 1` counts).
    pub k: Vec<u32>,
    /// Branch orbits `(type, fiber)` of the `H_i` action without nodes.
    pub free_slots: Vec<(u32, u32)>,
}

/// One end of a node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfEdge {
    /// The vertex (component) carrying this branch of the node.
    pub vertex: u32,
    /// `l >= 1`: `fiber`-th branch orbit of type `l`; `0`: free orbit.
    pub slot_type: u32,
    /// Fiber index (`slot_type >= 1`) or free-orbit label (`slot_type = 0`).
    pub fiber: u32,
    /// Rotation exponent at this branch (see module docs; swap ends differ).
    pub rot: u32,
    /// Faithful rotation order at this branch (swap ends: full node stabiliser).
    pub stab: u32,
}

/// One node of the stable curve.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeData {
    /// Position in the edge list.
    pub id: u32,
    /// The two branches of the node.
    pub ends: [HalfEdge; 2],
    /// Whether both branches lie on the same component.
    #[serde(rename = "loop")]
    pub loop_: bool,
    /// Whether the node stabiliser swaps the two branches.
    pub swap: bool,
}

/// A `Z/d`-marked stable curve, serialisable as JSON.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkedGraph {
    /// Schema tag, [`SCHEMA`].
    pub schema: String,
    /// Order of the acting cyclic group.
    pub d: u32,
    /// Components of the curve.
    pub vertices: Vec<VertexData>,
    /// Nodes of the curve.
    pub edges: Vec<EdgeData>,
    /// Permutation induced by `γ` on vertex ids.
    pub gamma_vertex: Vec<u32>,
    /// Permutation induced by `γ` on edge ids.
    pub gamma_edge: Vec<u32>,
}

/// How `γ` relates a component orbit to the whole group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ComponentClass {
    /// The whole group fixes the component pointwise (`ord_trivial = d`).
    Trivial,
    /// The component is invariant and the action on it is nontrivial.
    Fixed,
    /// The component is moved (`n > 1`).
    Mobile,
}

/// A special orbit of a component orbit: either a branch orbit of the
/// effective action (`slot_type >= 1`) or a labelled free orbit
/// (`slot_type = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SlotKey {
    /// Index into [`Analyzed::vertex_orbits`].
    pub orbit: usize,
    /// `0` for a free orbit, else the branch type.
    pub slot_type: u32,
    /// Fiber index (branch orbits) or label (free orbits).
    pub fiber: u32,
}

/// A `γ`-orbit of components with its shared numerical data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexOrbit {
    /// Member vertex ids in transport order (`members[t+1] = γ(members[t])`),
    /// starting from the least id.
    pub members: Vec<u32>,
    /// Orbit length.
    pub n: u32,
    /// Order of the effective quotient group on each member.
    pub d_i: u32,
    /// Order of the trivially-acting subgroup on each member.
    pub ord_trivial: u32,
    /// Geometric genus of each member.
    pub g: u32,
    /// Quotient genus of each member by its effective group.
    pub h: u32,
    /// Branching sequence of the effective action (modulus `d_i`).
    pub seq: BranchingSequence,
    /// Branch orbits without nodes.
    pub free_slots: Vec<(u32, u32)>,
    /// Classification of the orbit.
    pub class: ComponentClass,
}

impl VertexOrbit {
    /// Order `d/n` of the stabiliser of each member component.
    pub fn stab_order(&self, d: u32) -> u32 {
        d / self.n
    }

    /// The canonical description of the orbit's numerical data: orbit length,
    /// trivially-acting order, effective order, and the unit-group class of
    /// the branching sequence.
    pub fn canonical_type(&self) -> (u32, u32, u32, NumericalTypeClass) {
        (
            self.n,
            self.ord_trivial,
            self.d_i,
            crate::branching::canonicalize(&self.seq),
        )
    }

    /// Number of points of the special orbit at the given slot.
    pub fn slot_orbit_size(&self, slot_type: u32) -> u32 {
        if slot_type == 0 {
            self.n * self.d_i
        } else {
            self.n * (self.d_i / (self.d_i / gcd32(slot_type, self.d_i)))
        }
    }

    /// Order of the stabiliser of each point of the given slot (the *full*
    /// point stabiliser, including the trivially-acting subgroup).
    pub fn point_stab_order(&self, slot_type: u32) -> u32 {
        if slot_type == 0 {
            self.ord_trivial
        } else {
            (self.d_i / gcd32(slot_type, self.d_i)) * self.ord_trivial
        }
    }
}

/// A `γ`-orbit of nodes with its local action data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeOrbit {
    /// Member edge ids in transport order, starting from the least id.
    pub members: Vec<u32>,
    /// Whether the node stabiliser swaps the branches.
    pub swap: bool,
    /// Order of the full node stabiliser `G_P`.
    pub stab_order: u32,
    /// Exponent (mod [`Self::stab_order`]) with which the canonical generator
    /// of `G_P` scales the smoothing parameter of the node.
    pub character: u32,
    /// Slot of the first branch (in the coordinates of the pairing).
    pub slot_a: SlotKey,
    /// Slot of the second branch (equals `slot_a` for swap orbits).
    pub slot_b: SlotKey,
    /// Pairing offset: point `x` of `slot_a` is glued to point `x + offset`
    /// of `slot_b` (swap orbits: `offset` is half the orbit size).
    pub offset: u32,
}

impl EdgeOrbit {
    /// Whether the node orbit admits a `G`-equivariant smoothing.
    pub fn smoothable(&self) -> bool {
        self.character == 0
    }
}

/// Subgroup orders attached to one component orbit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OrbitSubgroups {
    /// `|G_i|`: order of the component stabiliser.
    pub stab: u32,
    /// `|G''_i|`: order of the trivially-acting subgroup.
    pub trivial: u32,
    /// `|H_i|`: order of the effective quotient.
    pub effective: u32,
    /// `|G'_i|`: order of the subgroup of `G_i` stabilising every node of
    /// the component (each node as a point pair).
    pub node_stab: u32,
    /// `|H'_i| = |G'_i| / |G''_i|`: effective part of the node stabiliser.
    pub effective_node_stab: u32,
}

/// Subgroup invariants of the whole marked graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SubgroupInvariants {
    /// Per component orbit, in orbit order.
    pub orbits: Vec<OrbitSubgroups>,
    /// Order of the intersection of all component stabilisers.
    pub common_stab: u32,
    /// Order of the intersection of all node-preserving stabilisers `G'_i`.
    pub common_node_stab: u32,
}

/// A validated marked graph with derived orbit tables.
#[derive(Debug, Clone)]
pub struct Analyzed {
    graph: MarkedGraph,
    vertex_orbits: Vec<VertexOrbit>,
    orbit_of_vertex: Vec<usize>,
    /// Position of each vertex inside its orbit's `members`.
    position_in_orbit: Vec<u32>,
    edge_orbits: Vec<EdgeOrbit>,
    orbit_of_edge: Vec<usize>,
    ends_at_vertex: Vec<u32>,
    total_genus: u32,
}

impl MarkedGraph {
    /// Parses a graph from its JSON form (no validation beyond the shape).
    pub fn from_json_str(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// Serialises the graph as pretty JSON.
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serialisation cannot fail")
    }

    /// Serialises the graph as compact JSON.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serialisation cannot fail")
    }

    /// Validates the graph completely and computes its orbit tables.
    pub fn analyze(&self) -> Result<Analyzed, GraphError> {
        analyze(self.clone())
    }
}

fn vertex_err(id: u32, reason: impl Into<String>) -> GraphError {
    GraphError::Vertex {
        id,
        reason: reason.into(),
    }
}

fn edge_err(id: u32, reason: impl Into<String>) -> GraphError {
    GraphError::Edge {
        id,
        reason: reason.into(),
    }
}

/// Checks that `p` is a permutation of `0..p.len()` and returns the orbit
/// decomposition: (orbit index per element, orbits in transport order from
/// their least element).
fn permutation_orbits(p: &[u32], what: &str) -> Result<(Vec<usize>, Vec<Vec<u32>>), GraphError> {
    let len = p.len();
    let mut seen = vec![false; len];
    for &img in p {
        if img as usize >= len || seen[img as usize] {
            return Err(GraphError::Permutation(format!(
                "{what} is not a permutation of 0..{len}"
            )));
        }
        seen[img as usize] = true;
    }
    let mut orbit_of = vec![usize::MAX; len];
    let mut orbits = Vec::new();
    for start in 0..len {
        if orbit_of[start] != usize::MAX {
            continue;
        }
        let idx = orbits.len();
        let mut members = Vec::new();
        let mut x = start;
        loop {
            orbit_of[x] = idx;
            members.push(x as u32);
            x = p[x] as usize;
            if x == start {
                break;
            }
            if orbit_of[x] != usize::MAX {
                return Err(GraphError::Permutation(format!(
                    "{what} has inconsistent cycles"
                )));
            }
        }
        orbits.push(members);
    }
    Ok((orbit_of, orbits))
}

/// Rotation data of a slot type within the effective group of order `d_i`:
/// `(faithful order m_l, canonical rotation exponent ρ_l)`.
pub(crate) fn slot_rotation(d_i: u32, slot_type: u32) -> (u32, u32) {
    if slot_type == 0 {
        (1, 0)
    } else {
        rotation_exponent(d_i, slot_type)
    }
}

fn analyze(graph: MarkedGraph) -> Result<Analyzed, GraphError> {
    if graph.schema != SCHEMA {
        return Err(GraphError::Schema(graph.schema.clone()));
    }
    let d = graph.d;
    if d == 0 {
        return Err(GraphError::Permutation("d must be at least 1".into()));
    }
    if graph.vertices.is_empty() || graph.edges.is_empty() {
        return Err(GraphError::Empty);
    }
    if graph.gamma_vertex.len() != graph.vertices.len() {
        return Err(GraphError::Permutation(
            "gamma_vertex length differs from the vertex count".into(),
        ));
    }
    if graph.gamma_edge.len() != graph.edges.len() {
        return Err(GraphError::Permutation(
            "gamma_edge length differs from the edge count".into(),
        ));
    }
    for (idx, v) in graph.vertices.iter().enumerate() {
        if v.id as usize != idx {
            return Err(vertex_err(v.id, format!("id must equal its position {idx}")));
        }
    }
    for (idx, e) in graph.edges.iter().enumerate() {
        if e.id as usize != idx {
            return Err(edge_err(e.id, format!("id must equal its position {idx}")));
        }
    }

    let (orbit_of_vertex, vertex_orbit_members) =
        permutation_orbits(&graph.gamma_vertex, "gamma_vertex")?;
    let (orbit_of_edge, edge_orbit_members) = permutation_orbits(&graph.gamma_edge, "gamma_edge")?;

    // Per-vertex numerical data.
    for v in &graph.vertices {
        let orbit_len = vertex_orbit_members[orbit_of_vertex[v.id as usize]].len() as u32;
        if v.n != orbit_len {
            return Err(vertex_err(
                v.id,
                format!("states orbit length {} but its γ-orbit has length {orbit_len}", v.n),
            ));
        }
        if v.n == 0 || v.d_i == 0 || v.ord_trivial == 0 {
            return Err(vertex_err(v.id, "n, d_i and ord_trivial must be positive"));
        }
        let product = v.n as u64 * v.d_i as u64 * v.ord_trivial as u64;
        if product != d as u64 {
            return Err(vertex_err(
                v.id,
                format!("n · d_i · ord_trivial = {product} must equal d = {d}"),
            ));
        }
        if v.k.len() != (v.d_i - 1) as usize {
            return Err(vertex_err(
                v.id,
                format!("k must list {} counts for d_i = {}", v.d_i - 1, v.d_i),
            ));
        }
        let seq = BranchingSequence::new(v.d_i, v.k.clone())?;
        if v.d_i == 1 {
            if v.h != v.g {
                return Err(vertex_err(v.id, "h must equal g when d_i = 1"));
            }
        } else {
            if !is_admissible(v.g, &seq) {
                return Err(vertex_err(
                    v.id,
                    format!("numerical type (g = {}, d_i = {}, k) is not admissible", v.g, v.d_i),
                ));
            }
            let h = quotient_genus(v.g, &seq)?;
            if v.h != h {
                return Err(vertex_err(
                    v.id,
                    format!("states quotient genus {} but the data forces {h}", v.h),
                ));
            }
        }
        // free_slots: strictly sorted, in range.
        for w in v.free_slots.windows(2) {
            if w[0] >= w[1] {
                return Err(vertex_err(v.id, "free_slots must be strictly sorted"));
            }
        }
        for &(l, f) in &v.free_slots {
            if l == 0 || l >= v.d_i || f >= v.k[(l - 1) as usize] {
                return Err(vertex_err(
                    v.id,
                    format!("free slot ({l}, {f}) is out of range for the branching data"),
                ));
            }
        }
    }

    // Vertex orbits carry identical data.
    let mut vertex_orbits = Vec::with_capacity(vertex_orbit_members.len());
    let mut position_in_orbit = vec![0u32; graph.vertices.len()];
    for members in &vertex_orbit_members {
        let first = &graph.vertices[members[0] as usize];
        for (t, &m) in members.iter().enumerate() {
            position_in_orbit[m as usize] = t as u32;
            let v = &graph.vertices[m as usize];
            if (v.g, v.n, v.ord_trivial, v.d_i, v.h, &v.k, &v.free_slots)
                != (
                    first.g,
                    first.n,
                    first.ord_trivial,
                    first.d_i,
                    first.h,
                    &first.k,
                    &first.free_slots,
                )
            {
                return Err(vertex_err(
                    v.id,
                    format!("data differs from vertex {} in the same γ-orbit", first.id),
                ));
            }
        }
        let seq = BranchingSequence::new(first.d_i, first.k.clone())?;
        let class = if first.ord_trivial == d {
            ComponentClass::Trivial
        } else if first.n == 1 {
            ComponentClass::Fixed
        } else {
            ComponentClass::Mobile
        };
        vertex_orbits.push(VertexOrbit {
            members: members.clone(),
            n: first.n,
            d_i: first.d_i,
            ord_trivial: first.ord_trivial,
            g: first.g,
            h: first.h,
            seq,
            free_slots: first.free_slots.clone(),
            class,
        });
    }

    // Per-edge local checks.
    let slot_of_end = |end: &HalfEdge| -> SlotKey {
        SlotKey {
            orbit: orbit_of_vertex[end.vertex as usize],
            slot_type: end.slot_type,
            fiber: end.fiber,
        }
    };
    for e in &graph.edges {
        for end in &e.ends {
            let Some(v) = graph.vertices.get(end.vertex as usize) else {
                return Err(edge_err(e.id, format!("references missing vertex {}", end.vertex)));
            };
            if end.slot_type >= v.d_i {
                return Err(edge_err(
                    e.id,
                    format!(
                        "slot type {} is out of range for d_i = {} at vertex {}",
                        end.slot_type, v.d_i, v.id
                    ),
                ));
            }
            if end.slot_type >= 1 && end.fiber >= v.k[(end.slot_type - 1) as usize] {
                return Err(edge_err(
                    e.id,
                    format!(
                        "fiber {} is out of range for k_{} = {} at vertex {}",
                        end.fiber,
                        end.slot_type,
                        v.k[(end.slot_type - 1) as usize],
                        v.id
                    ),
                ));
            }
        }
        let is_loop = e.ends[0].vertex == e.ends[1].vertex;
        if e.loop_ != is_loop {
            return Err(edge_err(e.id, "loop flag does not match the end vertices"));
        }
        let v0 = &graph.vertices[e.ends[0].vertex as usize];
        let v1 = &graph.vertices[e.ends[1].vertex as usize];
        let (m0, rho0) = slot_rotation(v0.d_i, e.ends[0].slot_type);
        let (m1, rho1) = slot_rotation(v1.d_i, e.ends[1].slot_type);
        let full0 = m0 * v0.ord_trivial;
        let full1 = m1 * v1.ord_trivial;
        let same_slot = slot_of_end(&e.ends[0]) == slot_of_end(&e.ends[1]);
        if e.swap {
            if !same_slot {
                return Err(edge_err(
                    e.id,
                    "a swap node must glue one special orbit to itself",
                ));
            }
            let m = 2 * full0;
            let orbit_size = d / full0;
            if !orbit_size.is_multiple_of(2) {
                return Err(edge_err(
                    e.id,
                    format!("swap gluing needs an even orbit of points, got {orbit_size}"),
                ));
            }
            for end in &e.ends {
                if end.stab != m {
                    return Err(edge_err(
                        e.id,
                        format!("swap ends must record the node stabiliser order {m}"),
                    ));
                }
            }
            let expected = (rho0 as u64 * (m / m0) as u64 % m as u64) as u32;
            if e.ends[0].rot != 0 || e.ends[1].rot != expected {
                return Err(edge_err(
                    e.id,
                    format!("swap rotation exponents must be (0, {expected})"),
                ));
            }
        } else {
            if same_slot {
                return Err(edge_err(
                    e.id,
                    "a node gluing a special orbit to itself must be a swap node",
                ));
            }
            if full0 != full1 {
                return Err(edge_err(
                    e.id,
                    format!(
                        "point stabilisers of the two branches differ ({full0} vs {full1})"
                    ),
                ));
            }
            let expect = [(m0, rho0), (m1, rho1)];
            for (end, &(m, rho)) in e.ends.iter().zip(expect.iter()) {
                if end.stab != m {
                    return Err(edge_err(
                        e.id,
                        format!("end at vertex {} must record rotation order {m}", end.vertex),
                    ));
                }
                if end.rot != rho {
                    return Err(edge_err(
                        e.id,
                        format!(
                            "end at vertex {} must record rotation exponent {rho}",
                            end.vertex
                        ),
                    ));
                }
            }
        }
    }

    // Edge orbits: lengths, transport consistency, pairing data.
    let mut edge_orbits = Vec::with_capacity(edge_orbit_members.len());
    for members in &edge_orbit_members {
        let rep = &graph.edges[members[0] as usize];
        let v_rep = &graph.vertices[rep.ends[0].vertex as usize];
        let (m0, _) = slot_rotation(v_rep.d_i, rep.ends[0].slot_type);
        let full = m0 * v_rep.ord_trivial;
        let node_stab = if rep.swap { 2 * full } else { full };
        if !d.is_multiple_of(node_stab) {
            return Err(edge_err(
                rep.id,
                format!("node stabiliser order {node_stab} does not divide d = {d}"),
            ));
        }
        let expected_len = (d / node_stab) as usize;
        if members.len() != expected_len {
            return Err(edge_err(
                rep.id,
                format!(
                    "γ-orbit of the node has length {} but the stabiliser forces {expected_len}",
                    members.len()
                ),
            ));
        }
        // Transport: ends of γ(e) must be the γ-image of the ends of e.
        for &eid in members {
            let e = &graph.edges[eid as usize];
            let next_id = graph.gamma_edge[eid as usize];
            let next = &graph.edges[next_id as usize];
            let image = |end: &HalfEdge| HalfEdge {
                vertex: graph.gamma_vertex[end.vertex as usize],
                ..end.clone()
            };
            let img0 = image(&e.ends[0]);
            let img1 = image(&e.ends[1]);
            let matches_straight = {
                let cmp = |a: &HalfEdge, b: &HalfEdge| {
                    (a.vertex, a.slot_type, a.fiber, a.stab) == (b.vertex, b.slot_type, b.fiber, b.stab)
                };
                (cmp(&img0, &next.ends[0]) && cmp(&img1, &next.ends[1]))
                    || (cmp(&img0, &next.ends[1]) && cmp(&img1, &next.ends[0]))
            };
            if !matches_straight || e.swap != next.swap {
                return Err(edge_err(
                    eid,
                    format!("γ-image (edge {next_id}) is not the transported node"),
                ));
            }
        }
        // Pairing offset in the point coordinates of the slot orbits:
        // the end at orbit position j gets coordinate j (label base 0).
        let slot_a = slot_of_end(&rep.ends[0]);
        let slot_b = slot_of_end(&rep.ends[1]);
        let n_points = d / full; // points in each glued slot orbit
        let pos_a = position_in_orbit[rep.ends[0].vertex as usize];
        let pos_b = position_in_orbit[rep.ends[1].vertex as usize];
        let offset = if rep.swap {
            let half = n_points / 2;
            let n = vertex_orbits[slot_a.orbit].n;
            if (pos_a + half) % n != pos_b && (pos_b + half) % n != pos_a {
                return Err(edge_err(
                    rep.id,
                    "swap node does not pair antipodal points of the orbit",
                ));
            }
            half
        } else {
            (pos_b + n_points - pos_a) % n_points
        };
        // Character of the node orbit on the smoothing parameter.
        let character = if rep.swap {
            (rep.ends[0].rot + rep.ends[1].rot) % node_stab
        } else {
            let o0 = graph.vertices[rep.ends[0].vertex as usize].ord_trivial as u64;
            let o1 = graph.vertices[rep.ends[1].vertex as usize].ord_trivial as u64;
            ((rep.ends[0].rot as u64 * o0 + rep.ends[1].rot as u64 * o1) % node_stab as u64) as u32
        };
        edge_orbits.push(EdgeOrbit {
            members: members.clone(),
            swap: rep.swap,
            stab_order: node_stab,
            character,
            slot_a,
            slot_b,
            offset,
        });
    }

    // Slot accounting: every special orbit is either fully noded or free.
    let mut slot_ends: BTreeMap<SlotKey, u32> = BTreeMap::new();
    for e in &graph.edges {
        for end in &e.ends {
            *slot_ends.entry(slot_of_end(end)).or_insert(0) += 1;
        }
    }
    for (orbit_idx, orbit) in vertex_orbits.iter().enumerate() {
        let free: BTreeSet<(u32, u32)> = orbit.free_slots.iter().copied().collect();
        for (l, k_l) in orbit.seq.support() {
            for f in 0..k_l {
                let key = SlotKey {
                    orbit: orbit_idx,
                    slot_type: l,
                    fiber: f,
                };
                let count = slot_ends.get(&key).copied().unwrap_or(0);
                let capacity = orbit.slot_orbit_size(l);
                let listed_free = free.contains(&(l, f));
                if count == 0 && !listed_free {
                    return Err(vertex_err(
                        orbit.members[0],
                        format!("branch orbit ({l}, {f}) carries no nodes but is not listed free"),
                    ));
                }
                if count > 0 && listed_free {
                    return Err(vertex_err(
                        orbit.members[0],
                        format!("branch orbit ({l}, {f}) is listed free but carries nodes"),
                    ));
                }
                if count > 0 && count != capacity {
                    return Err(vertex_err(
                        orbit.members[0],
                        format!(
                            "branch orbit ({l}, {f}) has {count} node branches but {capacity} points"
                        ),
                    ));
                }
            }
        }
    }
    for (key, count) in &slot_ends {
        if key.slot_type == 0 {
            let orbit = &vertex_orbits[key.orbit];
            let capacity = orbit.slot_orbit_size(0);
            if *count != capacity {
                return Err(vertex_err(
                    orbit.members[0],
                    format!(
                        "free orbit labelled {} has {count} node branches but {capacity} points",
                        key.fiber
                    ),
                ));
            }
        }
    }

    // Connectivity.
    let mut reached = vec![false; graph.vertices.len()];
    let mut stack = vec![0usize];
    reached[0] = true;
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); graph.vertices.len()];
    for e in &graph.edges {
        let a = e.ends[0].vertex as usize;
        let b = e.ends[1].vertex as usize;
        adjacency[a].push(b);
        adjacency[b].push(a);
    }
    while let Some(v) = stack.pop() {
        for &w in &adjacency[v] {
            if !reached[w] {
                reached[w] = true;
                stack.push(w);
            }
        }
    }
    if reached.iter().any(|r| !r) {
        return Err(GraphError::Disconnected);
    }

    // Stability and total genus.
    let mut ends_at_vertex = vec![0u32; graph.vertices.len()];
    for e in &graph.edges {
        for end in &e.ends {
            ends_at_vertex[end.vertex as usize] += 1;
        }
    }
    for v in &graph.vertices {
        let ends = ends_at_vertex[v.id as usize];
        if 2 * (v.g as i64) - 2 + (ends as i64) <= 0 {
            return Err(vertex_err(
                v.id,
                format!("component of genus {} with {ends} node branches is unstable", v.g),
            ));
        }
    }
    let genus_sum: u32 = graph.vertices.iter().map(|v| v.g).sum();
    let total_genus =
        genus_sum + graph.edges.len() as u32 - graph.vertices.len() as u32 + 1;
    if total_genus < 2 {
        return Err(GraphError::GenusTooSmall(total_genus));
    }

    // Effectiveness.
    let common_trivial = graph
        .vertices
        .iter()
        .fold(0u64, |acc, v| gcd(acc, v.ord_trivial as u64)) as u32;
    if common_trivial != 1 {
        return Err(GraphError::Ineffective(common_trivial));
    }

    Ok(Analyzed {
        graph,
        vertex_orbits,
        orbit_of_vertex,
        position_in_orbit,
        edge_orbits,
        orbit_of_edge,
        ends_at_vertex,
        total_genus,
    })
}

impl Analyzed {
    /// The underlying validated graph.
    pub fn graph(&self) -> &MarkedGraph {
        &self.graph
    }

    /// The order of the acting group.
    pub fn d(&self) -> u32 {
        self.graph.d
    }

    /// The arithmetic genus of the stable curve.
    pub fn total_genus(&self) -> u32 {
        self.total_genus
    }

    /// The `γ`-orbits of components.
    pub fn vertex_orbits(&self) -> &[VertexOrbit] {
        &self.vertex_orbits
    }

    /// The `γ`-orbits of nodes.
    pub fn edge_orbits(&self) -> &[EdgeOrbit] {
        &self.edge_orbits
    }

    /// Orbit index of a vertex id.
    pub fn orbit_of_vertex(&self, v: u32) -> usize {
        self.orbit_of_vertex[v as usize]
    }

    /// Orbit index of an edge id.
    pub fn orbit_of_edge(&self, e: u32) -> usize {
        self.orbit_of_edge[e as usize]
    }

    /// Position of a vertex inside its orbit's transport order.
    pub fn position_in_orbit(&self, v: u32) -> u32 {
        self.position_in_orbit[v as usize]
    }

    /// Number of node branches on a vertex.
    pub fn ends_at_vertex(&self, v: u32) -> u32 {
        self.ends_at_vertex[v as usize]
    }

    /// Distinct free-orbit labels used at each vertex orbit.
    pub fn free_labels_at_orbit(&self, orbit: usize) -> BTreeSet<u32> {
        let mut labels = BTreeSet::new();
        for eo in &self.edge_orbits {
            for slot in [&eo.slot_a, &eo.slot_b] {
                if slot.orbit == orbit && slot.slot_type == 0 {
                    labels.insert(slot.fiber);
                }
            }
        }
        labels
    }

    /// Subgroup invariants of the graph.
    pub fn subgroup_invariants(&self) -> SubgroupInvariants {
        let d = self.d();
        let mut orbits = Vec::with_capacity(self.vertex_orbits.len());
        for (idx, vo) in self.vertex_orbits.iter().enumerate() {
            let stab = d / vo.n;
            let mut node_stab = stab;
            for eo in &self.edge_orbits {
                if eo.slot_a.orbit == idx || eo.slot_b.orbit == idx {
                    node_stab = gcd32(node_stab, eo.stab_order);
                }
            }
            orbits.push(OrbitSubgroups {
                stab,
                trivial: vo.ord_trivial,
                effective: vo.d_i,
                node_stab,
                effective_node_stab: node_stab / vo.ord_trivial,
            });
        }
        let common_stab = orbits.iter().fold(0, |acc, o| gcd32(acc, o.stab));
        let common_node_stab = orbits.iter().fold(0, |acc, o| gcd32(acc, o.node_stab));
        SubgroupInvariants {
            orbits,
            common_stab,
            common_node_stab,
        }
    }

    /// The same curve described with respect to the generator `γ^u`
    /// (`u` a unit mod `d`).
    ///
    /// Branching sequences transform by the inverse unit, rotation exponents
    /// by the unit, and the two permutations are raised to the power `u`.
    pub fn change_generator(&self, u: u32) -> Analyzed {
        let d = self.d();
        let u = if d == 1 { 0 } else { u % d };
        assert!(
            d == 1 || (u > 0 && gcd32(u, d) == 1),
            "{u} is not a unit modulo {d}"
        );
        let mut graph = self.graph.clone();
        // Permutations: γ^u.
        let pow = |p: &[u32], times: u32| -> Vec<u32> {
            (0..p.len() as u32)
                .map(|start| {
                    let mut x = start;
                    for _ in 0..times {
                        x = p[x as usize];
                    }
                    x
                })
                .collect()
        };
        graph.gamma_vertex = pow(&self.graph.gamma_vertex, u);
        graph.gamma_edge = pow(&self.graph.gamma_edge, u);
        // Vertex data: new branching sequence, relabelled free slots.
        // Types transform by u^{-1} mod d_i; fibers keep their index.
        for v in graph.vertices.iter_mut() {
            if v.d_i > 1 {
                let u_i = u % v.d_i;
                let inv = crate::arith::inv_mod(u_i as u64, v.d_i as u64)
                    .expect("u is a unit mod d, hence mod d_i") as u32;
                let seq = BranchingSequence::new(v.d_i, v.k.clone()).expect("validated");
                v.k = crate::branching::unit_act(inv, &seq).counts().to_vec();
                for slot in v.free_slots.iter_mut() {
                    slot.0 = (slot.0 as u64 * inv as u64 % v.d_i as u64) as u32;
                }
                v.free_slots.sort();
            }
        }
        // Edge ends: new slot types and rotation exponents.
        for e in graph.edges.iter_mut() {
            if e.swap {
                let m = e.ends[0].stab; // node stabiliser order, unchanged
                let s = e.ends[1].rot;
                let new_s = (s as u64 * (u % m.max(1)) as u64 % m as u64) as u32;
                for end in e.ends.iter_mut() {
                    let d_i = self.graph.vertices[end.vertex as usize].d_i;
                    if end.slot_type >= 1 {
                        let u_i = u % d_i;
                        let inv = crate::arith::inv_mod(u_i as u64, d_i as u64).unwrap() as u32;
                        end.slot_type = (end.slot_type as u64 * inv as u64 % d_i as u64) as u32;
                    }
                }
                e.ends[0].rot = 0;
                e.ends[1].rot = new_s;
            } else {
                for end in e.ends.iter_mut() {
                    let d_i = self.graph.vertices[end.vertex as usize].d_i;
                    if end.slot_type >= 1 {
                        let u_i = u % d_i;
                        let inv = crate::arith::inv_mod(u_i as u64, d_i as u64).unwrap() as u32;
                        end.slot_type = (end.slot_type as u64 * inv as u64 % d_i as u64) as u32;
                        let m = end.stab;
                        end.rot = (end.rot as u64 * (u % m) as u64 % m as u64) as u32;
                    }
                }
            }
        }
        graph.analyze().expect("generator change preserves validity")
    }

    /// A canonical byte encoding of the isomorphism class of the graph, up to
    /// relabelling of vertices, edges, fibers and free labels, and up to the
    /// choice of group generator.
    pub fn canonical_encoding(&self) -> Vec<u8> {
        self.canonical_search().0
    }

    /// A canonical representative of the isomorphism class: the relabelled
    /// graph realising [`Self::canonical_encoding`].
    pub fn canonical_form(&self) -> Analyzed {
        self.canonical_search().1
    }

    pub(crate) fn canonical_search(&self) -> (Vec<u8>, Analyzed) {
        let d = self.d();
        let mut best: Option<(Vec<u8>, Analyzed)> = None;
        for u in units(d) {
            let gu = if u == 1 || d == 1 {
                self.clone()
            } else {
                self.change_generator(u)
            };
            // Group orbits by their invariant key.
            let mut keyed: Vec<(Vec<u32>, usize)> = gu
                .vertex_orbits
                .iter()
                .enumerate()
                .map(|(idx, o)| {
                    let mut key = vec![o.n, o.d_i, o.ord_trivial, o.g, o.h];
                    key.extend_from_slice(o.seq.counts());
                    (key, idx)
                })
                .collect();
            keyed.sort();
            // Tie groups of identical keys.
            let mut groups: Vec<Vec<usize>> = Vec::new();
            let mut group_keys: Vec<&Vec<u32>> = Vec::new();
            for (key, idx) in &keyed {
                if group_keys.last().map(|k| *k == key) == Some(true) {
                    groups.last_mut().unwrap().push(*idx);
                } else {
                    groups.push(vec![*idx]);
                    group_keys.push(key);
                }
            }
            // Split tie groups by iterated edge-environment colours so that
            // only orbits with identical neighbourhood structure trade
            // places.  This cuts the permutation count without affecting
            // which graphs compare equal: the refinement uses relabelling-
            // invariant data only, so isomorphic graphs refine identically.
            let groups = refine_groups(&gu, &groups);
            // Enumerate orbit orders (product of permutations of each tie
            // group, groups staying in key order) and per-orbit bases.
            for order in group_order_products(&groups) {
                let n_choices: Vec<u32> =
                    order.iter().map(|&o| gu.vertex_orbits[o].n).collect();
                let mut bases = vec![0u32; order.len()];
                'bases: loop {
                    let candidate = encode_with(&gu, &order, &bases);
                    match &mut best {
                        Some((b, bg)) => {
                            if candidate.0 < *b {
                                *b = candidate.0;
                                *bg = candidate.1;
                            }
                        }
                        None => best = Some(candidate),
                    }
                    // Odometer over bases.
                    let mut i = 0;
                    loop {
                        if i == bases.len() {
                            break 'bases;
                        }
                        bases[i] += 1;
                        if bases[i] < n_choices[i] {
                            break;
                        }
                        bases[i] = 0;
                        i += 1;
                    }
                }
            }
        }
        best.expect("canonical search always produces a candidate")
    }
}

/// One incidence of a node orbit as seen from a component orbit: swap flag,
/// node stabiliser order, character, the slot type on this side, the slot
/// type on the far side, and the far orbit's current colour.  Fiber indices
/// and pairing offsets are label-dependent and deliberately excluded.
type Incidence = (bool, u32, u32, u32, u32, usize);

/// Refines the key-identical tie groups by iterated neighbourhood colouring:
/// each round appends to every orbit's colour the sorted multiset of its
/// incident node-orbit descriptors, then re-ranks.  Groups come back as the
/// stable cells, ordered by (original group, signature) rank.
fn refine_groups(gu: &Analyzed, groups: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let nv = gu.vertex_orbits.len();
    let mut color = vec![0usize; nv];
    for (ci, group) in groups.iter().enumerate() {
        for &v in group {
            color[v] = ci;
        }
    }
    let mut ncolors = groups.len();
    loop {
        let mut sigs: Vec<(usize, Vec<Incidence>)> =
            color.iter().map(|&c| (c, Vec::new())).collect();
        for eo in &gu.edge_orbits {
            let (a, b) = (eo.slot_a, eo.slot_b);
            sigs[a.orbit].1.push((
                eo.swap,
                eo.stab_order,
                eo.character,
                a.slot_type,
                b.slot_type,
                color[b.orbit],
            ));
            sigs[b.orbit].1.push((
                eo.swap,
                eo.stab_order,
                eo.character,
                b.slot_type,
                a.slot_type,
                color[a.orbit],
            ));
        }
        for sig in &mut sigs {
            sig.1.sort_unstable();
        }
        let mut ranked: Vec<&(usize, Vec<Incidence>)> = sigs.iter().collect();
        ranked.sort();
        ranked.dedup();
        if ranked.len() == ncolors {
            break;
        }
        ncolors = ranked.len();
        for v in 0..nv {
            color[v] = ranked.binary_search(&&sigs[v]).unwrap();
        }
    }
    let mut cells: Vec<Vec<usize>> = vec![Vec::new(); ncolors];
    for v in 0..nv {
        cells[color[v]].push(v);
    }
    cells.retain(|c| !c.is_empty());
    cells
}

/// All concatenations of one permutation of each group, groups in order.
fn group_order_products(groups: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut acc = vec![Vec::new()];
    for group in groups {
        let perms = permutations(group);
        let mut next = Vec::with_capacity(acc.len() * perms.len());
        for prefix in &acc {
            for perm in &perms {
                let mut v = prefix.clone();
                v.extend_from_slice(perm);
                next.push(v);
            }
        }
        acc = next;
    }
    acc
}

pub(crate) fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for (i, &x) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, x);
            out.push(tail);
        }
    }
    out
}

fn push_u32(out: &mut Vec<u8>, x: u32) {
    out.extend_from_slice(&x.to_be_bytes());
}

/// Encodes the graph for one fixed choice of orbit order and per-orbit base
/// rotations, and materialises the relabelled graph.
fn encode_with(gu: &Analyzed, order: &[usize], bases: &[u32]) -> (Vec<u8>, Analyzed) {
    let d = gu.d();
    // New vertex ids: orbit-major, transport order from the chosen base.
    let mut new_id = vec![0u32; gu.graph.vertices.len()];
    let mut orbit_position = vec![0usize; gu.vertex_orbits.len()]; // orbit -> place in order
    let mut start_of = vec![0u32; gu.vertex_orbits.len()];
    let mut next = 0u32;
    for (place, &o) in order.iter().enumerate() {
        orbit_position[o] = place;
        start_of[o] = next;
        let vo = &gu.vertex_orbits[o];
        let n = vo.n;
        for t in 0..n {
            let member = vo.members[((bases[place] + t) % n) as usize];
            new_id[member as usize] = next + t;
        }
        next += n;
    }

    let mut bytes = Vec::new();
    push_u32(&mut bytes, d);
    push_u32(&mut bytes, order.len() as u32);
    for &o in order {
        let vo = &gu.vertex_orbits[o];
        for x in [vo.n, vo.d_i, vo.ord_trivial, vo.g, vo.h] {
            push_u32(&mut bytes, x);
        }
        push_u32(&mut bytes, vo.seq.counts().len() as u32);
        for &c in vo.seq.counts() {
            push_u32(&mut bytes, c);
        }
    }

    // Edge orbit blocks, fiber-blind first.
    struct Block {
        blind: Vec<u32>,                 // [swap, vidA, typeA, vidB, typeB]
        ends: [(u32, usize, u32, u32); 2], // (new vid, orbit place, slot_type, original fiber)
        orbit_idx: usize,
        rep_member_pos: usize,
    }
    let mut blocks = Vec::with_capacity(gu.edge_orbits.len());
    for (orbit_idx, eo) in gu.edge_orbits.iter().enumerate() {
        let mut best: Option<Block> = None;
        for (pos, &eid) in eo.members.iter().enumerate() {
            let e = &gu.graph.edges[eid as usize];
            let mut ends: Vec<(u32, usize, u32, u32)> = e
                .ends
                .iter()
                .map(|end| {
                    let vo = gu.orbit_of_vertex(end.vertex);
                    (
                        new_id[end.vertex as usize],
                        orbit_position[vo],
                        end.slot_type,
                        end.fiber,
                    )
                })
                .collect();
            ends.sort();
            let blind = vec![
                eo.swap as u32,
                ends[0].0,
                ends[0].2,
                ends[1].0,
                ends[1].2,
            ];
            let replace = match &best {
                None => true,
                Some(b) => blind < b.blind,
            };
            if replace {
                best = Some(Block {
                    blind,
                    ends: [ends[0], ends[1]],
                    orbit_idx,
                    rep_member_pos: pos,
                });
            }
        }
        blocks.push(best.expect("edge orbit is never empty"));
    }
    blocks.sort_by(|a, b| a.blind.cmp(&b.blind));

    // Renumber fibers (per orbit place and slot type) and free labels in
    // first-use order over the sorted blocks.
    let mut fiber_map: BTreeMap<(usize, u32, u32), u32> = BTreeMap::new();
    let mut fiber_next: BTreeMap<(usize, u32), u32> = BTreeMap::new();
    let mut canonical_fiber = |place: usize, slot_type: u32, fiber: u32| -> u32 {
        *fiber_map.entry((place, slot_type, fiber)).or_insert_with(|| {
            let next = fiber_next.entry((place, slot_type)).or_insert(0);
            let v = *next;
            *next += 1;
            v
        })
    };
    push_u32(&mut bytes, blocks.len() as u32);
    let mut block_canonical_ends = Vec::with_capacity(blocks.len());
    for b in &blocks {
        let mut canon_ends = Vec::with_capacity(2);
        push_u32(&mut bytes, b.blind[0]);
        for &(vid, place, slot_type, fiber) in &b.ends {
            let cf = canonical_fiber(place, slot_type, fiber);
            push_u32(&mut bytes, vid);
            push_u32(&mut bytes, slot_type);
            push_u32(&mut bytes, cf);
            canon_ends.push((vid, slot_type, cf));
        }
        block_canonical_ends.push(canon_ends);
    }

    // Materialise the relabelled graph.
    let mut vertices = Vec::with_capacity(gu.graph.vertices.len());
    for (place, &o) in order.iter().enumerate() {
        let vo = &gu.vertex_orbits[o];
        // Free slots: the fibers not consumed by nodes, in canonical numbering.
        let mut free = Vec::new();
        for (l, k_l) in vo.seq.support() {
            let used = fiber_next.get(&(place, l)).copied().unwrap_or(0);
            for f in used..k_l {
                free.push((l, f));
            }
        }
        free.sort();
        for t in 0..vo.n {
            vertices.push(VertexData {
                id: start_of[o] + t,
                g: vo.g,
                n: vo.n,
                ord_trivial: vo.ord_trivial,
                d_i: vo.d_i,
                h: vo.h,
                k: vo.seq.counts().to_vec(),
                free_slots: free.clone(),
            });
        }
    }
    let mut edges = Vec::new();
    let mut gamma_edge = Vec::new();
    for (b, canon_ends) in blocks.iter().zip(block_canonical_ends.iter()) {
        let eo = &gu.edge_orbits[b.orbit_idx];
        let len = eo.members.len();
        let base_id = edges.len() as u32;
        // The representative keeps its sorted canonical ends; transported
        // members advance the end vertices along the new gamma_vertex.
        let rep_eid = eo.members[b.rep_member_pos];
        let rep = &gu.graph.edges[rep_eid as usize];
        // Match canonical ends back to the physical ends of the rep to carry
        // rot/stab (sorted order may have flipped them).
        let phys: Vec<usize> = {
            let e0 = &rep.ends[0];
            let key0 = (
                new_id[e0.vertex as usize],
                e0.slot_type,
            );
            let sorted_key0 = (b.ends[0].0, b.ends[0].2);
            if key0 == sorted_key0 {
                vec![0, 1]
            } else {
                vec![1, 0]
            }
        };
        for t in 0..len {
            let mut ends = Vec::with_capacity(2);
            for (slot_pos, &p) in phys.iter().enumerate() {
                let end = &rep.ends[p];
                // Advance the end vertex t steps along γ in new ids:
                // new ids are orbit-major transport order.
                let vo_idx = gu.orbit_of_vertex(end.vertex);
                let n = gu.vertex_orbits[vo_idx].n;
                let pos0 = (new_id[end.vertex as usize] - start_of[vo_idx]) % n;
                let vid = start_of[vo_idx] + ((pos0 + t as u32) % n);
                let (_, slot_type, cf) = canon_ends[slot_pos];
                ends.push(HalfEdge {
                    vertex: vid,
                    slot_type,
                    fiber: cf,
                    rot: if rep.swap {
                        if slot_pos == 0 {
                            0
                        } else {
                            rep.ends[0].rot + rep.ends[1].rot
                        }
                    } else {
                        end.rot
                    },
                    stab: end.stab,
                });
            }
            let e0v = ends[0].vertex;
            let e1v = ends[1].vertex;
            edges.push(EdgeData {
                id: base_id + t as u32,
                ends: [ends.remove(0), ends.remove(0)],
                loop_: e0v == e1v,
                swap: rep.swap,
            });
            gamma_edge.push(base_id + ((t as u32 + 1) % len as u32));
        }
    }
    let mut gamma_vertex = vec![0u32; vertices.len()];
    for &o in order {
        let vo = &gu.vertex_orbits[o];
        for t in 0..vo.n {
            gamma_vertex[(start_of[o] + t) as usize] = start_of[o] + ((t + 1) % vo.n);
        }
    }
    let graph = MarkedGraph {
        schema: SCHEMA.to_string(),
        d,
        vertices,
        edges,
        gamma_vertex,
        gamma_edge,
    };
    let analyzed = graph
        .analyze()
        .expect("canonical materialisation of a valid graph stays valid");
    (bytes, analyzed)
}

/// Handle to a component orbit added to a [`GraphBuilder`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrbitHandle(usize);

/// A special orbit referenced while building: `slot_type >= 1` picks the
/// `fiber`-th branch orbit of that type; `slot_type = 0` picks the free orbit
/// with label `fiber`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotSpec {
    pub orbit: OrbitHandle,
    pub slot_type: u32,
    pub fiber: u32,
}

struct OrbitSpec {
    g: u32,
    n: u32,
    ord_trivial: u32,
    seq: BranchingSequence,
    h: u32,
}

enum GluingSpec {
    Join {
        a: SlotSpec,
        b: SlotSpec,
        twist: u32,
    },
    Swap {
        s: SlotSpec,
    },
}

/// Programmatic construction of marked graphs.
///
/// Add component orbits, glue special orbits pairwise (or to themselves with
/// a branch swap), then [`GraphBuilder::build`] materialises vertices, edges
/// and the two permutations and validates the result.
pub struct GraphBuilder {
    d: u32,
    orbits: Vec<OrbitSpec>,
    gluings: Vec<GluingSpec>,
    used: BTreeSet<(usize, u32, u32)>,
}

impl GraphBuilder {
    pub fn new(d: u32) -> Self {
        Self {
            d,
            orbits: Vec::new(),
            gluings: Vec::new(),
            used: BTreeSet::new(),
        }
    }

    /// Adds a `γ`-orbit of `n` components of genus `g`; the stabiliser of
    /// each acts through the effective group of order `seq.d()` with the
    /// given branching sequence, and `ord_trivial = d / (n · seq.d())` acts
    /// trivially.
    pub fn add_orbit(
        &mut self,
        g: u32,
        n: u32,
        seq: BranchingSequence,
    ) -> Result<OrbitHandle, GraphError> {
        let d_i = seq.d();
        if n == 0 || d_i == 0 || n * d_i == 0 || !self.d.is_multiple_of(n * d_i) {
            return Err(GraphError::Vertex {
                id: u32::MAX,
                reason: format!("orbit length {n} times effective order {d_i} must divide d"),
            });
        }
        let ord_trivial = self.d / (n * d_i);
        let h = if d_i == 1 {
            g
        } else {
            if !is_admissible(g, &seq) {
                return Err(GraphError::Branching(BranchingError::NotAdmissible {
                    g,
                    d: d_i,
                }));
            }
            quotient_genus(g, &seq)?
        };
        self.orbits.push(OrbitSpec {
            g,
            n,
            ord_trivial,
            seq,
            h,
        });
        Ok(OrbitHandle(self.orbits.len() - 1))
    }

    fn check_slot(&mut self, s: &SlotSpec) -> Result<(), GraphError> {
        let Some(orbit) = self.orbits.get(s.orbit.0) else {
            return Err(GraphError::Vertex {
                id: u32::MAX,
                reason: "gluing references an unknown orbit".into(),
            });
        };
        if s.slot_type >= orbit.seq.d() {
            return Err(GraphError::Vertex {
                id: u32::MAX,
                reason: format!("slot type {} out of range", s.slot_type),
            });
        }
        if s.slot_type >= 1 && s.fiber >= orbit.seq.count(s.slot_type) {
            return Err(GraphError::Vertex {
                id: u32::MAX,
                reason: format!("fiber {} out of range for type {}", s.fiber, s.slot_type),
            });
        }
        if !self.used.insert((s.orbit.0, s.slot_type, s.fiber)) {
            return Err(GraphError::Vertex {
                id: u32::MAX,
                reason: format!(
                    "special orbit ({}, {}) on orbit {} glued twice",
                    s.slot_type, s.fiber, s.orbit.0
                ),
            });
        }
        Ok(())
    }

    /// Point stabiliser order of a slot.
    fn slot_stab(&self, s: &SlotSpec) -> u32 {
        let orbit = &self.orbits[s.orbit.0];
        let d_i = orbit.seq.d();
        if s.slot_type == 0 {
            orbit.ord_trivial
        } else {
            (d_i / gcd32(s.slot_type, d_i)) * orbit.ord_trivial
        }
    }

    /// Glues two distinct special orbits into a `γ`-orbit of nodes. Twists
    /// congruent mod `gcd(n_a, n_b)` give isomorphic graphs.
    pub fn glue(&mut self, a: SlotSpec, b: SlotSpec, twist: u32) -> Result<(), GraphError> {
        if a.orbit == b.orbit && a.slot_type == b.slot_type && a.fiber == b.fiber {
            return Err(GraphError::Vertex {
                id: u32::MAX,
                reason: "gluing a special orbit to itself needs glue_swap".into(),
            });
        }
        self.check_slot(&a)?;
        self.check_slot(&b)?;
        let (ma, mb) = (self.slot_stab(&a), self.slot_stab(&b));
        if ma != mb {
            return Err(GraphError::Vertex {
                id: u32::MAX,
                reason: format!("point stabilisers differ ({ma} vs {mb})"),
            });
        }
        self.gluings.push(GluingSpec::Join { a, b, twist });
        Ok(())
    }

    /// Glues a special orbit to itself with a branch swap (the antipodal
    /// pairing); the orbit must have an even number of points.
    pub fn glue_swap(&mut self, s: SlotSpec) -> Result<(), GraphError> {
        self.check_slot(&s)?;
        let m = self.slot_stab(&s);
        if !(self.d / m).is_multiple_of(2) {
            return Err(GraphError::Vertex {
                id: u32::MAX,
                reason: "swap gluing needs an even orbit of points".into(),
            });
        }
        self.gluings.push(GluingSpec::Swap { s });
        Ok(())
    }

    /// Materialises and validates the graph.
    pub fn build(self) -> Result<Analyzed, GraphError> {
        let d = self.d;
        let mut start_of = Vec::with_capacity(self.orbits.len());
        let mut vertices = Vec::new();
        let mut gamma_vertex = Vec::new();
        // Free slots: everything not glued.
        for (idx, o) in self.orbits.iter().enumerate() {
            let start = vertices.len() as u32;
            start_of.push(start);
            let mut free = Vec::new();
            for (l, k_l) in o.seq.support() {
                for f in 0..k_l {
                    if !self.used.contains(&(idx, l, f)) {
                        free.push((l, f));
                    }
                }
            }
            free.sort();
            for t in 0..o.n {
                vertices.push(VertexData {
                    id: start + t,
                    g: o.g,
                    n: o.n,
                    ord_trivial: o.ord_trivial,
                    d_i: o.seq.d(),
                    h: o.h,
                    k: o.seq.counts().to_vec(),
                    free_slots: free.clone(),
                });
                gamma_vertex.push(start + ((t + 1) % o.n));
            }
        }
        let mut edges = Vec::new();
        let mut gamma_edge = Vec::new();
        let end_of = |slot: &SlotSpec, point: u32, orbits: &[OrbitSpec]| -> HalfEdge {
            let o = &orbits[slot.orbit.0];
            let copy = point % o.n;
            let d_i = o.seq.d();
            let (m_l, rho) = slot_rotation(d_i, slot.slot_type);
            HalfEdge {
                vertex: start_of[slot.orbit.0] + copy,
                slot_type: slot.slot_type,
                fiber: slot.fiber,
                rot: rho,
                stab: m_l,
            }
        };
        for gl in &self.gluings {
            match gl {
                GluingSpec::Join { a, b, twist } => {
                    let m = self.slot_stab(a);
                    let n_points = d / m;
                    let base = edges.len() as u32;
                    for x in 0..n_points {
                        let ea = end_of(a, x, &self.orbits);
                        let eb = end_of(b, (x + twist) % n_points, &self.orbits);
                        let loop_ = ea.vertex == eb.vertex;
                        edges.push(EdgeData {
                            id: base + x,
                            ends: [ea, eb],
                            loop_,
                            swap: false,
                        });
                        gamma_edge.push(base + ((x + 1) % n_points));
                    }
                }
                GluingSpec::Swap { s } => {
                    let m = self.slot_stab(s);
                    let n_points = d / m;
                    let half = n_points / 2;
                    let orbit = &self.orbits[s.orbit.0];
                    let d_i = orbit.seq.d();
                    let (m_l, rho) = slot_rotation(d_i, s.slot_type);
                    let node_stab = 2 * m;
                    let s_exp =
                        (rho as u64 * (node_stab / m_l) as u64 % node_stab as u64) as u32;
                    let base = edges.len() as u32;
                    for x in 0..half {
                        let mut ea = end_of(s, x, &self.orbits);
                        let mut eb = end_of(s, x + half, &self.orbits);
                        ea.rot = 0;
                        ea.stab = node_stab;
                        eb.rot = s_exp;
                        eb.stab = node_stab;
                        let loop_ = ea.vertex == eb.vertex;
                        edges.push(EdgeData {
                            id: base + x,
                            ends: [ea, eb],
                            loop_,
                            swap: true,
                        });
                        gamma_edge.push(base + ((x + 1) % half));
                    }
                }
            }
        }
        let graph = MarkedGraph {
            schema: SCHEMA.to_string(),
            d,
            vertices,
            edges,
            gamma_vertex,
            gamma_edge,
        };
        graph.analyze()
    }
}
