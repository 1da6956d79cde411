//! SMILES tokenizer and molecular graph parser.
//!
//! Covers the organic subset, bracket atoms (isotope, charge, explicit
//! hydrogens, chirality marks), branches, ring closures including `%nn`
//! labels, aromatic lowercase notation, and dot-separated components.
//! Stereochemistry and isotopes are accepted and discarded. Implicit
//! hydrogen counts come from standard valence lists; an atom whose bond
//! orders exceed every allowed valence is rejected.

use std::collections::HashMap;

use crate::error::ParseError;

/// Bond multiplicity. Aromatic bonds carry order 1.5 in valence sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BondKind {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondKind {
    pub fn order(self) -> f64 {
        match self {
            BondKind::Single => 1.0,
            BondKind::Double => 2.0,
            BondKind::Triple => 3.0,
            BondKind::Aromatic => 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    /// Canonical element symbol, e.g. `"C"`, `"Cl"`, `"Na"`.
    pub element: String,
    pub aromatic: bool,
    pub formal_charge: i32,
    /// Hydrogen count written inside a bracket atom, if any. Bracket atoms
    /// never receive implicit hydrogens.
    pub explicit_hydrogens: Option<u8>,
    /// Total attached hydrogens after resolution.
    pub num_hydrogens: u8,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub kind: BondKind,
    /// True when the bond lies on a cycle (it is not a bridge).
    pub in_ring: bool,
}

/// Undirected molecular graph in input order: atoms by first appearance,
/// bonds by creation.
#[derive(Debug, Clone, PartialEq)]
pub struct MolecularGraph {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
    adjacency: Vec<Vec<usize>>,
}

impl MolecularGraph {
    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn n_bonds(&self) -> usize {
        self.bonds.len()
    }

    /// Neighbor atom indices of `i`, in bond-creation order.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }
}

/// One lexical unit of a SMILES string, tagged with its byte offset.
#[derive(Debug, Clone, PartialEq)]
pub enum Token {
    Atom(AtomToken),
    Bond(BondKind),
    Ring(u16),
    OpenParen,
    CloseParen,
    Dot,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomToken {
    pub element: String,
    pub aromatic: bool,
    pub charge: i32,
    pub explicit_hydrogens: Option<u8>,
    pub bracket: bool,
}

const ELEMENTS: &[&str] = &[
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In",
    "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb",
    "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl",
    "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk",
    "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh",
    "Fl", "Mc", "Lv", "Ts", "Og",
];

fn is_known_element(symbol: &str) -> bool {
    ELEMENTS.contains(&symbol)
}

/// Allowed valences used to resolve implicit hydrogens on organic-subset
/// atoms. Multi-valent entries (N, P, S) pick the smallest valence that
/// covers the bond order sum, so e.g. a sulfonyl sulfur resolves to 6.
fn valence_list(element: &str) -> Option<&'static [u8]> {
    Some(match element {
        "B" => &[3],
        "C" => &[4],
        "N" => &[3, 5],
        "O" => &[2],
        "P" => &[3, 5],
        "S" => &[2, 4, 6],
        "F" | "Cl" | "Br" | "I" => &[1],
        _ => return None,
    })
}

struct Lexer<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let b = self.peek();
        if b.is_some() {
            self.pos += 1;
        }
        b
    }

    fn take_digits(&mut self, max: usize) -> String {
        let start = self.pos;
        while self.pos - start < max {
            match self.peek() {
                Some(b) if b.is_ascii_digit() => {
                    self.pos += 1;
                }
                _ => break,
            }
        }
        String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned()
    }

    fn bracket_atom(&mut self, open_offset: usize) -> Result<AtomToken, ParseError> {
        // Isotope digits are accepted and discarded.
        let _ = self.take_digits(3);

        let sym_start = self.pos;
        let first = self.bump().ok_or(ParseError::UnterminatedBracket {
            offset: open_offset,
        })?;
        let mut aromatic = false;
        let mut element = String::new();
        if first.is_ascii_lowercase() {
            aromatic = true;
            // Two-letter aromatic symbols first (se, as), then single.
            if let Some(second) = self.peek() {
                let two = format!("{}{}", (first as char).to_ascii_uppercase(), second as char);
                if matches!(&two[..], "Se" | "As") {
                    self.pos += 1;
                    element = two;
                }
            }
            if element.is_empty() {
                if !matches!(first, b'b' | b'c' | b'n' | b'o' | b'p' | b's') {
                    return Err(ParseError::UnknownElement {
                        offset: sym_start,
                        symbol: (first as char).to_string(),
                    });
                }
                element = (first as char).to_ascii_uppercase().to_string();
            }
        } else if first.is_ascii_uppercase() {
            element.push(first as char);
            if let Some(second) = self.peek() {
                if second.is_ascii_lowercase() {
                    let two = format!("{}{}", first as char, second as char);
                    // Prefer the two-letter reading; if neither reading is a
                    // real element, report the symbol as written.
                    if is_known_element(&two) || !is_known_element(&element) {
                        self.pos += 1;
                        element = two;
                    }
                }
            }
        } else {
            return Err(ParseError::MalformedBracket {
                offset: open_offset,
                reason: format!("expected an element symbol, found {:?}", first as char),
            });
        }
        if !is_known_element(&element) {
            return Err(ParseError::UnknownElement {
                offset: sym_start,
                symbol: element,
            });
        }

        // Chirality marks are accepted and discarded.
        while self.peek() == Some(b'@') {
            self.pos += 1;
        }

        let mut explicit_hydrogens = None;
        if self.peek() == Some(b'H') {
            self.pos += 1;
            let digits = self.take_digits(2);
            let count: u8 = if digits.is_empty() {
                1
            } else {
                digits.parse().map_err(|_| ParseError::MalformedBracket {
                    offset: open_offset,
                    reason: "unreadable hydrogen count".to_string(),
                })?
            };
            explicit_hydrogens = Some(count);
        }

        let mut charge = 0i32;
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let unit = if sign == b'+' { 1 } else { -1 };
            let digits = self.take_digits(2);
            if digits.is_empty() {
                charge = unit;
                while self.peek() == Some(sign) {
                    self.pos += 1;
                    charge += unit;
                }
            } else {
                charge = unit
                    * digits
                        .parse::<i32>()
                        .map_err(|_| ParseError::MalformedBracket {
                            offset: open_offset,
                            reason: "unreadable charge".to_string(),
                        })?;
            }
        }

        // Atom-class labels are accepted and discarded.
        if self.peek() == Some(b':') {
            self.pos += 1;
            let digits = self.take_digits(4);
            if digits.is_empty() {
                return Err(ParseError::MalformedBracket {
                    offset: open_offset,
                    reason: "atom class marker without digits".to_string(),
                });
            }
        }

        match self.bump() {
            Some(b']') => Ok(AtomToken {
                element,
                aromatic,
                charge,
                explicit_hydrogens,
                bracket: true,
            }),
            Some(other) => Err(ParseError::MalformedBracket {
                offset: open_offset,
                reason: format!("unexpected {:?} before closing bracket", other as char),
            }),
            None => Err(ParseError::UnterminatedBracket {
                offset: open_offset,
            }),
        }
    }
}

/// Splits a SMILES string into tokens, each tagged with its byte offset.
pub fn tokenize(input: &str) -> Result<Vec<(Token, usize)>, ParseError> {
    if input.is_empty() {
        return Err(ParseError::EmptyInput);
    }
    let mut lexer = Lexer {
        bytes: input.as_bytes(),
        pos: 0,
    };
    let mut tokens = Vec::new();
    while let Some(b) = lexer.peek() {
        let offset = lexer.pos;
        match b {
            b'[' => {
                lexer.pos += 1;
                let atom = lexer.bracket_atom(offset)?;
                tokens.push((Token::Atom(atom), offset));
            }
            b'B' | b'C' | b'N' | b'O' | b'P' | b'S' | b'F' | b'I' => {
                lexer.pos += 1;
                let mut element = (b as char).to_string();
                // Two-letter organic-subset symbols: Cl, Br.
                if b == b'C' && lexer.peek() == Some(b'l') {
                    lexer.pos += 1;
                    element = "Cl".to_string();
                } else if b == b'B' && lexer.peek() == Some(b'r') {
                    lexer.pos += 1;
                    element = "Br".to_string();
                }
                tokens.push((
                    Token::Atom(AtomToken {
                        element,
                        aromatic: false,
                        charge: 0,
                        explicit_hydrogens: None,
                        bracket: false,
                    }),
                    offset,
                ));
            }
            b'b' | b'c' | b'n' | b'o' | b'p' | b's' => {
                lexer.pos += 1;
                tokens.push((
                    Token::Atom(AtomToken {
                        element: (b as char).to_ascii_uppercase().to_string(),
                        aromatic: true,
                        charge: 0,
                        explicit_hydrogens: None,
                        bracket: false,
                    }),
                    offset,
                ));
            }
            b'-' => {
                lexer.pos += 1;
                tokens.push((Token::Bond(BondKind::Single), offset));
            }
            b'=' => {
                lexer.pos += 1;
                tokens.push((Token::Bond(BondKind::Double), offset));
            }
            b'#' => {
                lexer.pos += 1;
                tokens.push((Token::Bond(BondKind::Triple), offset));
            }
            b':' => {
                lexer.pos += 1;
                tokens.push((Token::Bond(BondKind::Aromatic), offset));
            }
            // Directional single bonds; stereochemistry is discarded.
            b'/' | b'\\' => {
                lexer.pos += 1;
                tokens.push((Token::Bond(BondKind::Single), offset));
            }
            b'0'..=b'9' => {
                lexer.pos += 1;
                tokens.push((Token::Ring(u16::from(b - b'0')), offset));
            }
            b'%' => {
                lexer.pos += 1;
                let digits = lexer.take_digits(2);
                if digits.len() != 2 {
                    return Err(ParseError::UnexpectedChar { offset, found: '%' });
                }
                tokens.push((
                    Token::Ring(digits.parse().expect("two ascii digits")),
                    offset,
                ));
            }
            b'(' => {
                lexer.pos += 1;
                tokens.push((Token::OpenParen, offset));
            }
            b')' => {
                lexer.pos += 1;
                tokens.push((Token::CloseParen, offset));
            }
            b'.' => {
                lexer.pos += 1;
                tokens.push((Token::Dot, offset));
            }
            other => {
                return Err(ParseError::UnexpectedChar {
                    offset,
                    found: char::from(other),
                });
            }
        }
    }
    Ok(tokens)
}

struct Builder {
    atoms: Vec<Atom>,
    atom_aromatic: Vec<bool>,
    atom_bracket: Vec<bool>,
    bonds: Vec<(usize, usize, BondKind)>,
    adjacency: Vec<Vec<usize>>,
}

impl Builder {
    fn add_atom(&mut self, tok: &AtomToken) -> usize {
        self.atoms.push(Atom {
            element: tok.element.clone(),
            aromatic: tok.aromatic,
            formal_charge: tok.charge,
            explicit_hydrogens: tok.explicit_hydrogens,
            num_hydrogens: tok.explicit_hydrogens.unwrap_or(0),
        });
        self.atom_aromatic.push(tok.aromatic);
        self.atom_bracket.push(tok.bracket);
        self.adjacency.push(Vec::new());
        self.atoms.len() - 1
    }

    fn add_bond(&mut self, a: usize, b: usize, kind: Option<BondKind>) -> Result<(), ParseError> {
        if self.adjacency[a].contains(&b) {
            return Err(ParseError::DuplicateBond { a, b });
        }
        let kind = kind.unwrap_or({
            if self.atom_aromatic[a] && self.atom_aromatic[b] {
                BondKind::Aromatic
            } else {
                BondKind::Single
            }
        });
        self.bonds.push((a, b, kind));
        self.adjacency[a].push(b);
        self.adjacency[b].push(a);
        Ok(())
    }
}

/// Parses a SMILES string into a [`MolecularGraph`]. Dots separate
/// components that share one graph without any connecting bond.
pub fn parse_smiles(input: &str) -> Result<MolecularGraph, ParseError> {
    let tokens = tokenize(input)?;
    let mut builder = Builder {
        atoms: Vec::new(),
        atom_aromatic: Vec::new(),
        atom_bracket: Vec::new(),
        bonds: Vec::new(),
        adjacency: Vec::new(),
    };
    let mut prev_atom: Option<usize> = None;
    let mut branch_stack: Vec<Option<usize>> = Vec::new();
    let mut pending_bond: Option<(BondKind, usize)> = None;
    let mut open_rings: HashMap<u16, (usize, Option<BondKind>, usize)> = HashMap::new();

    for (token, offset) in &tokens {
        let offset = *offset;
        match token {
            Token::Atom(tok) => {
                let idx = builder.add_atom(tok);
                if let Some(prev) = prev_atom {
                    let kind = pending_bond.take().map(|(k, _)| k);
                    builder.add_bond(prev, idx, kind)?;
                } else if let Some((_, bond_offset)) = pending_bond.take() {
                    return Err(ParseError::DanglingBond {
                        offset: bond_offset,
                    });
                }
                prev_atom = Some(idx);
            }
            Token::Bond(kind) => {
                if prev_atom.is_none() || pending_bond.is_some() {
                    return Err(ParseError::DanglingBond { offset });
                }
                pending_bond = Some((*kind, offset));
            }
            Token::Ring(label) => {
                let current = match prev_atom {
                    Some(a) => a,
                    None => return Err(ParseError::DanglingBond { offset }),
                };
                let explicit = pending_bond.take().map(|(k, _)| k);
                match open_rings.remove(label) {
                    Some((other, opener_kind, _)) => {
                        if other == current {
                            return Err(ParseError::SelfRingBond {
                                label: *label,
                                offset,
                            });
                        }
                        let kind = match (opener_kind, explicit) {
                            (Some(a), Some(b)) if a != b => {
                                return Err(ParseError::RingBondConflict { label: *label })
                            }
                            (a, b) => a.or(b),
                        };
                        builder.add_bond(other, current, kind)?;
                    }
                    None => {
                        open_rings.insert(*label, (current, explicit, offset));
                    }
                }
            }
            Token::OpenParen => {
                if prev_atom.is_none() {
                    return Err(ParseError::UnbalancedParen { offset });
                }
                branch_stack.push(prev_atom);
            }
            Token::CloseParen => {
                if let Some((_, bond_offset)) = pending_bond.take() {
                    return Err(ParseError::DanglingBond {
                        offset: bond_offset,
                    });
                }
                match branch_stack.pop() {
                    Some(saved) => prev_atom = saved,
                    None => return Err(ParseError::UnbalancedParen { offset }),
                }
            }
            Token::Dot => {
                if let Some((_, bond_offset)) = pending_bond.take() {
                    return Err(ParseError::DanglingBond {
                        offset: bond_offset,
                    });
                }
                prev_atom = None;
            }
        }
    }

    if let Some((_, bond_offset)) = pending_bond {
        return Err(ParseError::DanglingBond {
            offset: bond_offset,
        });
    }
    if let Some(saved) = branch_stack.pop() {
        let _ = saved;
        return Err(ParseError::UnbalancedParen {
            offset: input.len(),
        });
    }
    if let Some((&label, _)) = open_rings.iter().next() {
        return Err(ParseError::UnclosedRing { label });
    }
    if builder.atoms.is_empty() {
        return Err(ParseError::EmptyInput);
    }

    resolve_hydrogens(&mut builder)?;
    let in_ring = find_ring_bonds(builder.atoms.len(), &builder.bonds);
    let bonds = builder
        .bonds
        .iter()
        .zip(in_ring)
        .map(|(&(a, b, kind), in_ring)| Bond {
            a,
            b,
            kind,
            in_ring,
        })
        .collect();
    Ok(MolecularGraph {
        atoms: builder.atoms,
        bonds,
        adjacency: builder.adjacency,
    })
}

/// Fills in implicit hydrogen counts for organic-subset atoms and checks
/// valences. Bracket atoms keep their written hydrogen count and skip the
/// check, since charges shift their valences arbitrarily.
fn resolve_hydrogens(builder: &mut Builder) -> Result<(), ParseError> {
    let mut order_sums = vec![0.0f64; builder.atoms.len()];
    for &(a, b, kind) in &builder.bonds {
        order_sums[a] += kind.order();
        order_sums[b] += kind.order();
    }
    for (idx, atom) in builder.atoms.iter_mut().enumerate() {
        if builder.atom_bracket[idx] {
            continue;
        }
        let list = match valence_list(&atom.element) {
            Some(list) => list,
            None => continue,
        };
        let sum = order_sums[idx];
        if atom.aromatic {
            // Aromatic atoms resolve against their lowest valence; one extra
            // unit of slack covers ring-junction atoms and substituted ring
            // heteroatoms, whose delocalized bonds overshoot it.
            let v0 = f64::from(list[0]);
            if sum > v0 + 1.0 {
                return Err(ParseError::ValenceExceeded {
                    index: idx,
                    element: atom.element.clone(),
                    order_sum: format!("{sum}"),
                });
            }
            atom.num_hydrogens = (v0 - sum).max(0.0).floor() as u8;
        } else {
            match list.iter().find(|&&v| f64::from(v) >= sum) {
                Some(&v) => {
                    atom.num_hydrogens = (f64::from(v) - sum).floor() as u8;
                }
                None => {
                    return Err(ParseError::ValenceExceeded {
                        index: idx,
                        element: atom.element.clone(),
                        order_sum: format!("{sum}"),
                    });
                }
            }
        }
    }
    Ok(())
}

/// Marks each bond as ring (on a cycle) or not via bridge detection:
/// a bond is in a ring exactly when it is not a bridge.
fn find_ring_bonds(n_atoms: usize, bonds: &[(usize, usize, BondKind)]) -> Vec<bool> {
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_atoms];
    for (eid, &(a, b, _)) in bonds.iter().enumerate() {
        adj[a].push((b, eid));
        adj[b].push((a, eid));
    }
    let mut disc = vec![usize::MAX; n_atoms];
    let mut low = vec![0usize; n_atoms];
    let mut is_bridge = vec![false; bonds.len()];
    let mut timer = 0usize;

    for root in 0..n_atoms {
        if disc[root] != usize::MAX {
            continue;
        }
        // Iterative DFS frames: (node, edge used to enter, next neighbor slot).
        let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(frame) = stack.last().copied() {
            let (u, parent_edge, slot) = frame;
            if slot < adj[u].len() {
                stack.last_mut().expect("frame exists").2 += 1;
                let (v, eid) = adj[u][slot];
                if eid == parent_edge {
                    continue;
                }
                if disc[v] == usize::MAX {
                    disc[v] = timer;
                    low[v] = timer;
                    timer += 1;
                    stack.push((v, eid, 0));
                } else {
                    low[u] = low[u].min(disc[v]);
                }
            } else {
                stack.pop();
                if let Some(&(p, _, _)) = stack.last() {
                    low[p] = low[p].min(low[u]);
                    if low[u] > disc[p] {
                        is_bridge[parent_edge] = true;
                    }
                }
            }
        }
    }
    is_bridge.iter().map(|&b| !b).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn degrees(g: &MolecularGraph) -> Vec<usize> {
        let mut d: Vec<usize> = (0..g.n_atoms()).map(|i| g.degree(i)).collect();
        d.sort_unstable();
        d
    }

    #[test]
    fn methane_is_one_carbon_with_four_hydrogens() {
        let g = parse_smiles("C").unwrap();
        assert_eq!(g.n_atoms(), 1);
        assert_eq!(g.n_bonds(), 0);
        assert_eq!(g.atoms[0].element, "C");
        assert_eq!(g.atoms[0].num_hydrogens, 4);
        assert!(!g.atoms[0].aromatic);
    }

    #[test]
    fn ethanol_chain_and_hydrogens() {
        let g = parse_smiles("CCO").unwrap();
        assert_eq!(g.n_atoms(), 3);
        assert_eq!(g.n_bonds(), 2);
        assert_eq!(degrees(&g), vec![1, 1, 2]);
        let h: Vec<u8> = g.atoms.iter().map(|a| a.num_hydrogens).collect();
        assert_eq!(h, vec![3, 2, 1]);
    }

    #[test]
    fn benzene_is_aromatic_with_six_ring_bonds() {
        let g = parse_smiles("c1ccccc1").unwrap();
        assert_eq!(g.n_atoms(), 6);
        assert_eq!(g.n_bonds(), 6);
        assert!(g.atoms.iter().all(|a| a.aromatic && a.num_hydrogens == 1));
        assert!(g
            .bonds
            .iter()
            .all(|b| b.kind == BondKind::Aromatic && b.in_ring));
    }

    #[test]
    fn aspirin_counts_match_hand_derivation() {
        let g = parse_smiles("CC(=O)OC1=CC=CC=C1C(=O)O").unwrap();
        assert_eq!(g.n_atoms(), 13);
        assert_eq!(g.n_bonds(), 13);
        assert_eq!(degrees(&g), vec![1, 1, 1, 1, 2, 2, 2, 2, 2, 3, 3, 3, 3]);
        let ring_bonds = g.bonds.iter().filter(|b| b.in_ring).count();
        assert_eq!(ring_bonds, 6);
    }

    #[test]
    fn branches_return_to_the_branch_point() {
        let g = parse_smiles("CC(C)C").unwrap();
        assert_eq!(g.n_atoms(), 4);
        assert_eq!(degrees(&g), vec![1, 1, 1, 3]);
    }

    #[test]
    fn double_and_triple_bonds_consume_valence() {
        let g = parse_smiles("C#N").unwrap();
        assert_eq!(g.bonds[0].kind, BondKind::Triple);
        assert_eq!(g.atoms[0].num_hydrogens, 1);
        assert_eq!(g.atoms[1].num_hydrogens, 0);
    }

    #[test]
    fn percent_ring_labels_close_like_digits() {
        let g = parse_smiles("C%10CC%10").unwrap();
        assert_eq!(g.n_atoms(), 3);
        assert_eq!(g.n_bonds(), 3);
        assert!(g.bonds.iter().all(|b| b.in_ring));
    }

    #[test]
    fn dot_separates_components_without_bonds() {
        let g = parse_smiles("[Na+].[Cl-]").unwrap();
        assert_eq!(g.n_atoms(), 2);
        assert_eq!(g.n_bonds(), 0);
        assert_eq!(g.atoms[0].element, "Na");
        assert_eq!(g.atoms[0].formal_charge, 1);
        assert_eq!(g.atoms[1].element, "Cl");
        assert_eq!(g.atoms[1].formal_charge, -1);
    }

    #[test]
    fn isotopes_and_stereo_marks_are_discarded() {
        let g = parse_smiles("[13CH4]").unwrap();
        assert_eq!(g.n_atoms(), 1);
        assert_eq!(g.atoms[0].num_hydrogens, 4);
        let g = parse_smiles("C/C=C/C").unwrap();
        assert_eq!(g.n_bonds(), 3);
        assert_eq!(g.bonds[1].kind, BondKind::Double);
        let g = parse_smiles("[C@@H](N)(C)O").unwrap();
        assert_eq!(g.n_atoms(), 4);
        assert_eq!(g.atoms[0].num_hydrogens, 1);
    }

    #[test]
    fn bracket_atoms_never_gain_implicit_hydrogens() {
        let g = parse_smiles("[NH4+]").unwrap();
        assert_eq!(g.atoms[0].num_hydrogens, 4);
        assert_eq!(g.atoms[0].formal_charge, 1);
        let g = parse_smiles("[Fe+3]").unwrap();
        assert_eq!(g.atoms[0].formal_charge, 3);
        assert_eq!(g.atoms[0].num_hydrogens, 0);
        let g = parse_smiles("[O-2]").unwrap();
        assert_eq!(g.atoms[0].formal_charge, -2);
    }

    #[test]
    fn aromatic_nitrogen_with_explicit_hydrogen() {
        let g = parse_smiles("c1cc[nH]c1").unwrap();
        assert_eq!(g.n_atoms(), 5);
        assert_eq!(g.n_bonds(), 5);
        let n = &g.atoms[3];
        assert_eq!(n.element, "N");
        assert!(n.aromatic);
        assert_eq!(n.num_hydrogens, 1);
    }

    #[test]
    fn substituted_aromatic_nitrogen_gets_no_hydrogen() {
        // N-methylpyrrole: the ring nitrogen carries a methyl and no H.
        let g = parse_smiles("Cn1cccc1").unwrap();
        assert_eq!(g.atoms[1].element, "N");
        assert_eq!(g.atoms[1].num_hydrogens, 0);
    }

    #[test]
    fn sulfonyl_sulfur_resolves_to_hexavalent() {
        let g = parse_smiles("CS(=O)(=O)C").unwrap();
        let s = &g.atoms[1];
        assert_eq!(s.element, "S");
        assert_eq!(s.num_hydrogens, 0);
        assert_eq!(g.degree(1), 4);
    }

    #[test]
    fn fused_rings_share_junction_atoms() {
        let g = parse_smiles("c1ccc2ccccc2c1").unwrap();
        assert_eq!(g.n_atoms(), 10);
        assert_eq!(g.n_bonds(), 11);
        assert_eq!(degrees(&g), vec![2, 2, 2, 2, 2, 2, 2, 2, 3, 3]);
        assert!(g.bonds.iter().all(|b| b.in_ring));
    }

    #[test]
    fn acyclic_bonds_are_not_ring_bonds() {
        let g = parse_smiles("CCc1ccccc1").unwrap();
        let ring: Vec<bool> = g.bonds.iter().map(|b| b.in_ring).collect();
        assert_eq!(ring[..2], [false, false]);
        assert!(ring[2..].iter().all(|&r| r));
    }

    #[test]
    fn explicit_ring_bond_order_is_honored() {
        let g = parse_smiles("C=1CCCCC=1").unwrap();
        let closure = g.bonds.iter().find(|b| b.a == 0 && b.b == 5).unwrap();
        assert_eq!(closure.kind, BondKind::Double);
    }

    #[test]
    fn conflicting_ring_bond_orders_are_rejected() {
        let err = parse_smiles("C=1CCCCC#1").unwrap_err();
        assert!(matches!(err, ParseError::RingBondConflict { label: 1 }));
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(matches!(parse_smiles(""), Err(ParseError::EmptyInput)));
    }

    #[test]
    fn unknown_characters_report_their_offset() {
        let err = parse_smiles("CC?C").unwrap_err();
        assert_eq!(
            err,
            ParseError::UnexpectedChar {
                offset: 2,
                found: '?'
            }
        );
    }

    #[test]
    fn unknown_elements_report_their_symbol() {
        let err = parse_smiles("C[Xx]C").unwrap_err();
        assert!(matches!(err, ParseError::UnknownElement { symbol, .. } if symbol == "Xx"));
    }

    #[test]
    fn unbalanced_parentheses_are_rejected() {
        assert!(matches!(
            parse_smiles("CC(C"),
            Err(ParseError::UnbalancedParen { .. })
        ));
        assert!(matches!(
            parse_smiles("CC)C"),
            Err(ParseError::UnbalancedParen { offset: 2 })
        ));
        assert!(matches!(
            parse_smiles("(CC)"),
            Err(ParseError::UnbalancedParen { offset: 0 })
        ));
    }

    #[test]
    fn unclosed_rings_are_rejected() {
        assert!(matches!(
            parse_smiles("C1CC"),
            Err(ParseError::UnclosedRing { label: 1 })
        ));
    }

    #[test]
    fn ring_closure_to_self_is_rejected() {
        assert!(matches!(
            parse_smiles("C11"),
            Err(ParseError::SelfRingBond { label: 1, .. })
        ));
    }

    #[test]
    fn duplicate_ring_bond_is_rejected() {
        let err = parse_smiles("C1C1").unwrap_err();
        assert!(matches!(err, ParseError::DuplicateBond { .. }));
    }

    #[test]
    fn leading_or_trailing_bonds_are_rejected() {
        assert!(matches!(
            parse_smiles("=CC"),
            Err(ParseError::DanglingBond { offset: 0 })
        ));
        assert!(matches!(
            parse_smiles("CC="),
            Err(ParseError::DanglingBond { offset: 2 })
        ));
        assert!(matches!(
            parse_smiles("C(=)C"),
            Err(ParseError::DanglingBond { .. })
        ));
        assert!(matches!(
            parse_smiles("C=.C"),
            Err(ParseError::DanglingBond { .. })
        ));
    }

    #[test]
    fn unterminated_bracket_is_rejected() {
        assert!(matches!(
            parse_smiles("C[NH4"),
            Err(ParseError::UnterminatedBracket { offset: 1 })
        ));
    }

    #[test]
    fn pentavalent_carbon_is_rejected() {
        let err = parse_smiles("CC(C)(C)(C)C").unwrap_err();
        assert!(matches!(
            err,
            ParseError::ValenceExceeded { element, .. } if element == "C"
        ));
    }

    #[test]
    fn adjacency_is_symmetric_and_irreflexive() {
        let g = parse_smiles("CC(=O)OC1=CC=CC=C1C(=O)O").unwrap();
        for (i, nbrs) in (0..g.n_atoms()).map(|i| (i, g.neighbors(i))) {
            for &j in nbrs {
                assert_ne!(i, j);
                assert!(g.neighbors(j).contains(&i));
            }
        }
    }

    #[test]
    fn degrees_match_bond_incidence_counts() {
        for smiles in ["CCO", "c1ccccc1", "CC(=O)OC1=CC=CC=C1C(=O)O", "C%10CC%10"] {
            let g = parse_smiles(smiles).unwrap();
            let mut counts = vec![0usize; g.n_atoms()];
            for b in &g.bonds {
                counts[b.a] += 1;
                counts[b.b] += 1;
            }
            for (i, count) in counts.iter().enumerate() {
                assert_eq!(g.degree(i), *count, "atom {i} of {smiles}");
            }
        }
    }

    #[test]
    fn parsing_is_deterministic() {
        let a = parse_smiles("CN1C=NC2=C1C(=O)N(C)C(=O)N2C").unwrap();
        let b = parse_smiles("CN1C=NC2=C1C(=O)N(C)C(=O)N2C").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn caffeine_counts_match_hand_derivation() {
        let g = parse_smiles("CN1C=NC2=C1C(=O)N(C)C(=O)N2C").unwrap();
        assert_eq!(g.n_atoms(), 14);
        assert_eq!(g.n_bonds(), 15);
        assert_eq!(degrees(&g), vec![1, 1, 1, 1, 1, 2, 2, 3, 3, 3, 3, 3, 3, 3]);
    }

    #[test]
    fn celecoxib_parses_with_reused_ring_labels() {
        let g = parse_smiles("CC1=CC=C(C=C1)C1=CC(=NN1C1=CC=C(C=C1)S(N)(=O)=O)C(F)(F)F").unwrap();
        assert_eq!(g.n_atoms(), 26);
        assert_eq!(g.n_bonds(), 28);
        // Two benzene rings plus the five-membered pyrazole: 6 + 6 + 5.
        let ring_bonds = g.bonds.iter().filter(|b| b.in_ring).count();
        assert_eq!(ring_bonds, 17);
    }
}
