//! Combinatorial decision engine for effective actions of the cyclic group
//! `Z/d` on smooth and stable algebraic curves.
//!
//! The crate is organised around five pillars:
//!
//! * [`branching`] — numerical types `(g, d, (k_1, ..., k_{d-1}))` recording
//!   the branching data of a smooth curve with a `Z/d` action: validity,
//!   canonical forms under the unit group `(Z/d)^*`, enumeration, restriction
//!   to subgroups, and the dimension of the associated equisymmetric locus.
//! * [`marked_graph`] — dual graphs of stable curves equipped with a `Z/d`
//!   action: a JSON-serialisable model with explicit vertex/edge permutations,
//!   a validating analyser, generator changes, and a canonical encoding.
//! * [`deformation`] — first-order smoothing analysis at the nodes: the
//!   character with which the stabiliser acts on the smoothing parameter of a
//!   node orbit, equivariant smoothability, and stratum dimensions.
//! * [`maximality`] — whether the `Z/d` action on a stable curve extends to a
//!   strictly larger group acting on a nearby (equally symmetric or smoothed)
//!   curve: automorphisms of the marked graph, the enlargement tests, and the
//!   node-character obstruction to smoothing with extra symmetry.
//! * [`group_ext`] — presentations of extensions of `(Z/2)^2` by `Z/d` that
//!   govern the ambient symmetry groups appearing in the maximality analysis.
//!
//! [`census`] combines the pillars into an enumerator for the complete list of
//! `Z/d`-stable-curve strata of a given genus, with deterministic output
//! suitable for machine diffing.
//!
//! Throughout, the acting group is written multiplicatively with a fixed
//! generator `γ`; residues mod `d` are represented as `u32` in `0..d`, and
//! exact rational bookkeeping uses `num_rational::Ratio<i64>`.

pub mod arith;
pub mod branching;
pub mod census;
pub mod deformation;
pub mod group_ext;
pub mod marked_graph;
pub mod maximality;

pub use branching::{BranchingSequence, NumericalType, NumericalTypeClass};
pub use marked_graph::{Analyzed, GraphBuilder, MarkedGraph};
