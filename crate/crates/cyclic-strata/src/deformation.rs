//! First-order equivariant deformations of a marked stable curve.
//!
//! Two questions are answered for a validated [`Analyzed`] graph:
//!
//! * which `γ`-orbits of nodes can be smoothed equivariantly — the node
//!   stabiliser scales the local smoothing parameter by a character, and the
//!   orbit smooths inside a `Z/d`-equivariant family exactly when that
//!   character is trivial;
//! * the dimension of the locus of curves with this topological type of
//!   action, computed as a sum of Teichmüller dimensions of the component
//!   quotients, one term per component orbit.
//!
//! The per-orbit dimension term is `max(3h - 3 + marks, 0)` where `h` is the
//! quotient genus of the component by its effective group and `marks` counts
//! the special orbits appearing downstairs: every branch orbit of the
//! effective action (noded or not) plus every distinct free orbit carrying
//! nodes.

use serde::Serialize;

use crate::branching::teich_dimension;
use crate::marked_graph::Analyzed;

/// Character data of one node orbit: `(stabiliser order m, exponent)`. The
/// canonical generator of the node stabiliser scales the smoothing parameter
/// by the `exponent`-th power of a primitive `m`-th root of unity.
pub fn node_character(analyzed: &Analyzed, edge_orbit: usize) -> (u32, u32) {
    let eo = &analyzed.edge_orbits()[edge_orbit];
    (eo.stab_order, eo.character)
}

/// Whether the given node orbit admits an equivariant smoothing.
pub fn node_orbit_smoothable(analyzed: &Analyzed, edge_orbit: usize) -> bool {
    analyzed.edge_orbits()[edge_orbit].smoothable()
}

/// Whether *no* node orbit can be smoothed equivariantly: the curve cannot
/// be deformed, together with its action, towards fewer nodes.
pub fn fully_nonsmoothable(analyzed: &Analyzed) -> bool {
    analyzed.edge_orbits().iter().all(|eo| !eo.smoothable())
}

/// Per-node-orbit smoothability data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NodeOrbitReport {
    /// Least edge id of the orbit.
    pub representative_edge: u32,
    /// Number of nodes in the orbit.
    pub orbit_size: u32,
    /// Order of the node stabiliser.
    pub stab_order: u32,
    /// Character exponent on the smoothing parameter.
    pub character: u32,
    /// Whether the orbit smooths equivariantly.
    pub smoothable: bool,
}

/// Smoothability of every node orbit of a graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SmoothabilityReport {
    pub nodes: Vec<NodeOrbitReport>,
    /// True when no node orbit smooths equivariantly.
    pub fully_nonsmoothable: bool,
}

/// Computes the smoothability report of a graph.
pub fn smoothability_report(analyzed: &Analyzed) -> SmoothabilityReport {
    let nodes: Vec<NodeOrbitReport> = analyzed
        .edge_orbits()
        .iter()
        .map(|eo| NodeOrbitReport {
            representative_edge: eo.members[0],
            orbit_size: eo.members.len() as u32,
            stab_order: eo.stab_order,
            character: eo.character,
            smoothable: eo.smoothable(),
        })
        .collect();
    let fully_nonsmoothable = nodes.iter().all(|n| !n.smoothable);
    SmoothabilityReport {
        nodes,
        fully_nonsmoothable,
    }
}

/// Per-component-orbit dimension term.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OrbitDimension {
    /// Least vertex id of the orbit.
    pub representative_vertex: u32,
    /// Quotient genus of the component by its effective group.
    pub quotient_genus: u32,
    /// Special points of the quotient: branch orbits plus distinct noded
    /// free orbits.
    pub marks: u32,
    /// `max(3h - 3 + marks, 0)`.
    pub dimension: u64,
}

/// Dimension of the locus of curves with this topological type of action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DimensionReport {
    pub orbits: Vec<OrbitDimension>,
    pub total: u64,
}

/// Computes the per-orbit dimension terms and their sum.
pub fn dimension_report(analyzed: &Analyzed) -> DimensionReport {
    let orbits: Vec<OrbitDimension> = analyzed
        .vertex_orbits()
        .iter()
        .enumerate()
        .map(|(idx, vo)| {
            let marks = vo.seq.k_sum() + analyzed.free_labels_at_orbit(idx).len() as u32;
            let dimension = teich_dimension(vo.h, marks)
                .expect("stability of the curve forces stable component quotients");
            OrbitDimension {
                representative_vertex: vo.members[0],
                quotient_genus: vo.h,
                marks,
                dimension,
            }
        })
        .collect();
    let total = orbits.iter().map(|o| o.dimension).sum();
    DimensionReport { orbits, total }
}

/// Dimension of the locus of curves with this topological type of action.
pub fn stratum_dimension(analyzed: &Analyzed) -> u64 {
    dimension_report(analyzed).total
}
