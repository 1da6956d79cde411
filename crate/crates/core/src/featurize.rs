//! Atom and bond featurization into fixed-width padded tensors.
//!
//! Each atom becomes a 62-entry binary vector: a 44-way element one-hot
//! (43 named symbols plus an "other" bucket), a 6-way degree one-hot over
//! 0..=5, a 5-way hydrogen-count one-hot over 0..=4, a 6-way one-hot over
//! 0..=5 for implicitly added hydrogens, and an aromaticity flag. Node
//! matrices are padded with zero rows up to a fixed node budget; a 0/1 mask
//! marks the live rows.

use crate::error::FeatureError;
use crate::scalar::Scalar;
use crate::smiles::{BondKind, MolecularGraph};
use crate::tensor::Tensor;

/// Width of one atom feature row.
pub const ATOM_FEATURES: usize = 62;
/// Highest representable heavy-atom degree.
pub const MAX_DEGREE: usize = 5;
/// Number of degree buckets (0..=MAX_DEGREE), which is also the size of a
/// degree-indexed weight bank.
pub const DEGREE_BUCKETS: usize = MAX_DEGREE + 1;
/// Highest representable attached-hydrogen count.
pub const MAX_HYDROGENS: usize = 4;
/// Default padded node budget per drug.
pub const DEFAULT_MAX_NODES: usize = 65;
/// Width of one bond feature row.
pub const BOND_FEATURES: usize = 6;

/// Named element slots of the one-hot block; anything else lands in the
/// trailing "other" bucket.
const ELEMENT_SLOTS: &[&str] = &[
    "C", "N", "O", "S", "F", "Si", "P", "Cl", "Br", "Mg", "Na", "Ca", "Fe", "As", "Al", "I", "B",
    "V", "K", "Tl", "Yb", "Sb", "Sn", "Ag", "Pd", "Co", "Se", "Ti", "Zn", "H", "Li", "Ge", "Cu",
    "Au", "Ni", "Cd", "In", "Mn", "Zr", "Cr", "Pt", "Hg", "Pb",
];

const ELEMENT_BLOCK: usize = ELEMENT_SLOTS.len() + 1;
const DEGREE_OFFSET: usize = ELEMENT_BLOCK;
const HYDROGEN_OFFSET: usize = DEGREE_OFFSET + DEGREE_BUCKETS;
const IMPLICIT_OFFSET: usize = HYDROGEN_OFFSET + MAX_HYDROGENS + 1;
const AROMATIC_OFFSET: usize = IMPLICIT_OFFSET + MAX_DEGREE + 1;

// The layout must add up to the advertised width.
const _: () = assert!(AROMATIC_OFFSET + 1 == ATOM_FEATURES);

/// A molecule ready for the encoder: padded node features, neighbor lists,
/// live-row mask, per-node degrees, and per-bond features for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturizedDrug<T> {
    /// `[max_nodes, 62]`; rows at and beyond `n_atoms` are all zero.
    pub node_features: Tensor<T>,
    /// Neighbor index lists, padded with empty lists to `max_nodes`.
    pub adjacency: Vec<Vec<usize>>,
    /// 1 for live rows, 0 for padding.
    pub node_mask: Vec<u8>,
    /// Heavy-atom degree per row, 0 for padding.
    pub degrees: Vec<usize>,
    /// One `[single, double, triple, aromatic, conjugated, in_ring]` row per
    /// bond, aligned with the source graph's bond order.
    pub bond_features: Vec<[u8; BOND_FEATURES]>,
    pub n_atoms: usize,
    pub max_nodes: usize,
}

fn element_slot(element: &str) -> usize {
    ELEMENT_SLOTS
        .iter()
        .position(|&s| s == element)
        .unwrap_or(ELEMENT_SLOTS.len())
}

/// Column labels for the 62 atom features, in row order.
pub fn atom_feature_names() -> Vec<String> {
    let mut names: Vec<String> = ELEMENT_SLOTS.iter().map(|s| format!("el_{s}")).collect();
    names.push("el_other".to_string());
    names.extend((0..DEGREE_BUCKETS).map(|d| format!("deg_{d}")));
    names.extend((0..=MAX_HYDROGENS).map(|h| format!("h_{h}")));
    names.extend((0..=MAX_DEGREE).map(|v| format!("impl_{v}")));
    names.push("aromatic".to_string());
    names
}

/// True when a bond participates in a conjugated system: it is aromatic, or
/// both endpoint atoms carry some other multiple-order bond.
fn is_conjugated(graph: &MolecularGraph, bond_idx: usize) -> bool {
    let bond = &graph.bonds[bond_idx];
    if bond.kind == BondKind::Aromatic {
        return true;
    }
    let endpoint_has_other_multiple = |atom: usize| {
        graph.bonds.iter().enumerate().any(|(i, b)| {
            i != bond_idx
                && (b.a == atom || b.b == atom)
                && matches!(
                    b.kind,
                    BondKind::Double | BondKind::Triple | BondKind::Aromatic
                )
        })
    };
    endpoint_has_other_multiple(bond.a) && endpoint_has_other_multiple(bond.b)
}

/// Converts a parsed molecule into padded tensors for the encoder.
pub fn featurize<T: Scalar>(
    graph: &MolecularGraph,
    max_nodes: usize,
) -> Result<FeaturizedDrug<T>, FeatureError> {
    let n_atoms = graph.n_atoms();
    if n_atoms > max_nodes {
        return Err(FeatureError::TooManyAtoms {
            atoms: n_atoms,
            max_nodes,
        });
    }

    let mut node_features = Tensor::zeros(&[max_nodes, ATOM_FEATURES]);
    for (idx, atom) in graph.atoms.iter().enumerate() {
        let degree = graph.degree(idx);
        if degree > MAX_DEGREE {
            return Err(FeatureError::DegreeOverflow {
                index: idx,
                degree,
                max: MAX_DEGREE,
            });
        }
        let hydrogens = usize::from(atom.num_hydrogens);
        if hydrogens > MAX_HYDROGENS {
            return Err(FeatureError::HydrogenOverflow {
                index: idx,
                count: hydrogens,
                max: MAX_HYDROGENS,
            });
        }
        // Bracket atoms carry their hydrogens explicitly, so none were
        // implicitly added.
        let implicit = if atom.explicit_hydrogens.is_some() {
            0
        } else {
            hydrogens
        };
        let one = T::one();
        node_features.set2(idx, element_slot(&atom.element), one);
        node_features.set2(idx, DEGREE_OFFSET + degree, one);
        node_features.set2(idx, HYDROGEN_OFFSET + hydrogens, one);
        node_features.set2(idx, IMPLICIT_OFFSET + implicit, one);
        if atom.aromatic {
            node_features.set2(idx, AROMATIC_OFFSET, one);
        }
    }

    let mut adjacency: Vec<Vec<usize>> = Vec::with_capacity(max_nodes);
    let mut degrees = Vec::with_capacity(max_nodes);
    let mut node_mask = Vec::with_capacity(max_nodes);
    for idx in 0..max_nodes {
        if idx < n_atoms {
            adjacency.push(graph.neighbors(idx).to_vec());
            degrees.push(graph.degree(idx));
            node_mask.push(1);
        } else {
            adjacency.push(Vec::new());
            degrees.push(0);
            node_mask.push(0);
        }
    }

    let bond_features = graph
        .bonds
        .iter()
        .enumerate()
        .map(|(i, bond)| {
            let mut row = [0u8; BOND_FEATURES];
            let kind_slot = match bond.kind {
                BondKind::Single => 0,
                BondKind::Double => 1,
                BondKind::Triple => 2,
                BondKind::Aromatic => 3,
            };
            row[kind_slot] = 1;
            if is_conjugated(graph, i) {
                row[4] = 1;
            }
            if bond.in_ring {
                row[5] = 1;
            }
            row
        })
        .collect();

    Ok(FeaturizedDrug {
        node_features,
        adjacency,
        node_mask,
        degrees,
        bond_features,
        n_atoms,
        max_nodes,
    })
}
