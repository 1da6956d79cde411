//! Attention-based explanations: which atoms of each drug the model
//! attended to when scoring a pair.
//!
//! The layer whose attention distribution has the sharpest peak (the
//! largest single weight across both drugs, lowest layer on ties) is
//! selected, and each drug's live attention weights are normalized by
//! that drug's maximum so its hottest atom has intensity 1. Output is an
//! SVG or DOT drawing with a single-hue ramp plus a JSON sidecar carrying
//! the raw numbers.

use std::fmt::Write as _;
use std::str::FromStr;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, ExplainError, ModelError};
use crate::featurize::featurize;
use crate::model::{forward, AttentionWeights, ModelParams, Prediction};
use crate::scalar::Scalar;
use crate::smiles::{parse_smiles, BondKind, MolecularGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Svg,
    Dot,
}

impl FromStr for OutputFormat {
    type Err = ExplainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "svg" => Ok(OutputFormat::Svg),
            "dot" => Ok(OutputFormat::Dot),
            other => Err(ExplainError::UnsupportedFormat {
                found: other.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AtomHighlight {
    pub index: usize,
    pub element: String,
    pub intensity: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DrugExplanation {
    pub smiles: String,
    pub atoms: Vec<AtomHighlight>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Explanation {
    pub probability: f64,
    /// 1-based index of the encoder layer the highlights come from.
    pub selected_layer: usize,
    pub drugs: [DrugExplanation; 2],
}

/// Picks the layer holding the single largest attention weight across
/// both drugs' live atoms. Ties go to the lowest layer.
pub fn select_layer<T: Scalar>(
    attention: &[AttentionWeights<T>],
    n_atoms_a: usize,
    n_atoms_b: usize,
) -> usize {
    let mut best_layer = attention[0].layer;
    let mut best_peak = f64::NEG_INFINITY;
    for weights in attention {
        let peak_of = |sigma: &[T], live: usize| {
            sigma[..live]
                .iter()
                .map(|&v| v.to_f64())
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let peak = peak_of(&weights.sigma_a, n_atoms_a).max(peak_of(&weights.sigma_b, n_atoms_b));
        if peak > best_peak {
            best_peak = peak;
            best_layer = weights.layer;
        }
    }
    best_layer
}

/// Live attention weights scaled so the largest becomes 1.
fn normalize_intensities<T: Scalar>(sigma: &[T], live: usize) -> Vec<f64> {
    let values: Vec<f64> = sigma[..live].iter().map(|&v| v.to_f64()).collect();
    let max = values.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    // Attention over at least one live atom sums to 1, so max > 0.
    values.iter().map(|v| v / max).collect()
}

/// Builds the explanation data for a scored pair.
pub fn build_explanation<T: Scalar>(
    smiles_a: &str,
    smiles_b: &str,
    graph_a: &MolecularGraph,
    graph_b: &MolecularGraph,
    prediction: &Prediction<T>,
) -> Explanation {
    let layer = select_layer(
        &prediction.attention,
        prediction.n_atoms_a,
        prediction.n_atoms_b,
    );
    let weights = &prediction.attention[layer - 1];
    let describe = |smiles: &str, graph: &MolecularGraph, sigma: &[T], live: usize| {
        let intensities = normalize_intensities(sigma, live);
        DrugExplanation {
            smiles: smiles.to_string(),
            atoms: graph
                .atoms
                .iter()
                .enumerate()
                .map(|(i, atom)| AtomHighlight {
                    index: i,
                    element: atom.element.clone(),
                    intensity: intensities[i],
                })
                .collect(),
        }
    };
    Explanation {
        probability: prediction.probability.to_f64(),
        selected_layer: layer,
        drugs: [
            describe(smiles_a, graph_a, &weights.sigma_a, prediction.n_atoms_a),
            describe(smiles_b, graph_b, &weights.sigma_b, prediction.n_atoms_b),
        ],
    }
}

/// Single-hue ramp from near-white to deep blue. The red channel falls
/// monotonically with intensity, so hotter atoms are always darker.
pub fn heat_color(intensity: f64) -> (u8, u8, u8) {
    let t = intensity.clamp(0.0, 1.0);
    let lerp = |from: f64, to: f64| (from + (to - from) * t).round() as u8;
    (lerp(247.0, 8.0), lerp(251.0, 48.0), lerp(255.0, 107.0))
}

fn hex_color(intensity: f64) -> String {
    let (r, g, b) = heat_color(intensity);
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Deterministic force-directed layout in the unit square.
fn layout(graph: &MolecularGraph, seed: u64, stream: u64) -> Vec<(f64, f64)> {
    let n = graph.n_atoms();
    if n == 1 {
        return vec![(0.5, 0.5)];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut unit = || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    let mut pos: Vec<(f64, f64)> = (0..n).map(|_| (unit(), unit())).collect();
    let k = (1.0 / n as f64).sqrt();
    let iterations = 200;
    for iter in 0..iterations {
        let temperature = 0.1 * (1.0 - iter as f64 / iterations as f64) + 1e-3;
        let mut disp = vec![(0.0f64, 0.0f64); n];
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = pos[i].0 - pos[j].0;
                let dy = pos[i].1 - pos[j].1;
                let d = (dx * dx + dy * dy).sqrt().max(1e-9);
                let repulse = k * k / d;
                disp[i].0 += dx / d * repulse;
                disp[i].1 += dy / d * repulse;
                disp[j].0 -= dx / d * repulse;
                disp[j].1 -= dy / d * repulse;
            }
        }
        for bond in &graph.bonds {
            let (i, j) = (bond.a, bond.b);
            let dx = pos[i].0 - pos[j].0;
            let dy = pos[i].1 - pos[j].1;
            let d = (dx * dx + dy * dy).sqrt().max(1e-9);
            let attract = d * d / k;
            disp[i].0 -= dx / d * attract;
            disp[i].1 -= dy / d * attract;
            disp[j].0 += dx / d * attract;
            disp[j].1 += dy / d * attract;
        }
        for i in 0..n {
            let (dx, dy) = disp[i];
            let d = (dx * dx + dy * dy).sqrt().max(1e-9);
            let step = d.min(temperature);
            pos[i].0 += dx / d * step;
            pos[i].1 += dy / d * step;
        }
    }
    // Rescale into the unit square; degenerate spans widen to a point at
    // the center.
    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &pos {
        min_x = min_x.min(x);
        max_x = max_x.max(x);
        min_y = min_y.min(y);
        max_y = max_y.max(y);
    }
    let span_x = (max_x - min_x).max(1e-9);
    let span_y = (max_y - min_y).max(1e-9);
    pos.iter()
        .map(|&(x, y)| ((x - min_x) / span_x, (y - min_y) / span_y))
        .collect()
}

fn check_intensities(graph: &MolecularGraph, drug: &DrugExplanation) -> Result<(), ExplainError> {
    if graph.n_atoms() != drug.atoms.len() {
        return Err(ExplainError::IntensityMismatch {
            intensities: drug.atoms.len(),
            atoms: graph.n_atoms(),
        });
    }
    Ok(())
}

const PANEL: f64 = 360.0;
const MARGIN: f64 = 40.0;
const CAPTION: f64 = 46.0;

fn svg_molecule(
    out: &mut String,
    graph: &MolecularGraph,
    drug: &DrugExplanation,
    seed: u64,
    stream: u64,
) {
    let pos: Vec<(f64, f64)> = layout(graph, seed, stream)
        .iter()
        .map(|&(x, y)| {
            (
                MARGIN + x * (PANEL - 2.0 * MARGIN),
                CAPTION + MARGIN + y * (PANEL - 2.0 * MARGIN),
            )
        })
        .collect();
    for bond in &graph.bonds {
        let (x1, y1) = pos[bond.a];
        let (x2, y2) = pos[bond.b];
        let (dx, dy) = (x2 - x1, y2 - y1);
        let d = (dx * dx + dy * dy).sqrt().max(1e-9);
        // Unit normal for offsetting the parallel strokes of multiple bonds.
        let (nx, ny) = (-dy / d, dx / d);
        let offsets: &[f64] = match bond.kind {
            BondKind::Single | BondKind::Aromatic => &[0.0],
            BondKind::Double => &[-1.8, 1.8],
            BondKind::Triple => &[-2.6, 0.0, 2.6],
        };
        let dash = if bond.kind == BondKind::Aromatic {
            " stroke-dasharray=\"5 3\""
        } else {
            ""
        };
        for off in offsets {
            let _ = writeln!(
                out,
                "  <line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#555555\" stroke-width=\"1.6\"{}/>",
                x1 + nx * off,
                y1 + ny * off,
                x2 + nx * off,
                y2 + ny * off,
                dash
            );
        }
    }
    for (i, &(x, y)) in pos.iter().enumerate() {
        let intensity = drug.atoms[i].intensity;
        let fill = hex_color(intensity);
        let text_fill = if intensity > 0.55 {
            "#ffffff"
        } else {
            "#1a1a1a"
        };
        let _ = writeln!(
            out,
            "  <circle cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"11\" fill=\"{fill}\" stroke=\"#333333\" stroke-width=\"1\"/>"
        );
        let _ = writeln!(
            out,
            "  <text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\" fill=\"{text_fill}\">{}</text>",
            y + 3.5,
            drug.atoms[i].element
        );
    }
    let _ = writeln!(
        out,
        "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"11\" fill=\"#1a1a1a\">{}</text>",
        PANEL / 2.0,
        CAPTION + PANEL - 8.0,
        xml_escape(&drug.smiles)
    );
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Renders one drug of the pair with attention-colored atoms. `which`
/// picks the drug (0 or 1) and seeds its layout stream.
pub fn render_svg(
    explanation: &Explanation,
    which: usize,
    graph: &MolecularGraph,
    seed: u64,
) -> Result<String, ExplainError> {
    let drug = &explanation.drugs[which];
    check_intensities(graph, drug)?;
    let width = PANEL;
    let height = CAPTION + PANEL;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\">"
    );
    out.push_str("  <rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n");
    let _ = writeln!(
        out,
        "  <text x=\"{:.1}\" y=\"26\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" fill=\"#1a1a1a\">interaction probability {:.4} &#183; attention layer {}</text>",
        width / 2.0,
        explanation.probability,
        explanation.selected_layer
    );
    svg_molecule(&mut out, graph, drug, seed, which as u64);
    out.push_str("</svg>\n");
    Ok(out)
}

/// Renders one drug as a Graphviz document with the same coloring as the
/// SVG output.
pub fn render_dot(
    explanation: &Explanation,
    which: usize,
    graph: &MolecularGraph,
) -> Result<String, ExplainError> {
    let drug = &explanation.drugs[which];
    check_intensities(graph, drug)?;
    let tag = ["a", "b"][which];
    let mut out = format!("graph drug_{tag} {{\n");
    let _ = writeln!(
        out,
        "  label=\"{} (interaction probability {:.4}, attention layer {})\";",
        drug.smiles.replace('"', "\\\""),
        explanation.probability,
        explanation.selected_layer
    );
    out.push_str("  node [shape=circle, fontname=\"sans-serif\"];\n");
    for (i, atom) in drug.atoms.iter().enumerate() {
        let fontcolor = if atom.intensity > 0.55 {
            "white"
        } else {
            "black"
        };
        let _ = writeln!(
            out,
            "  {tag}{i} [label=\"{}\", style=filled, fillcolor=\"{}\", fontcolor={fontcolor}];",
            atom.element,
            hex_color(atom.intensity)
        );
    }
    for bond in &graph.bonds {
        let style = match bond.kind {
            BondKind::Single => "penwidth=1",
            BondKind::Double => "penwidth=2.4",
            BondKind::Triple => "penwidth=3.6",
            BondKind::Aromatic => "penwidth=1, style=dashed",
        };
        let _ = writeln!(out, "  {tag}{} -- {tag}{} [{style}];", bond.a, bond.b);
    }
    out.push_str("}\n");
    Ok(out)
}

/// A rendered explanation: one drawing per drug, the JSON sidecar, and
/// the data all three came from.
#[derive(Debug, Clone)]
pub struct ExplainArtifacts {
    pub documents: [String; 2],
    pub sidecar: String,
    pub explanation: Explanation,
}

/// Scores a pair and renders where the model looked. The layout (and
/// nothing else) depends on `seed`.
pub fn explain_pair<T: Scalar>(
    params: &ModelParams<T>,
    smiles_a: &str,
    smiles_b: &str,
    format: OutputFormat,
    seed: u64,
) -> Result<ExplainArtifacts, Error> {
    let graph_a = parse_smiles(smiles_a)?;
    let graph_b = parse_smiles(smiles_b)?;
    let drug_a = featurize::<T>(&graph_a, params.hp.max_nodes)?;
    let drug_b = featurize::<T>(&graph_b, params.hp.max_nodes)?;
    let prediction = forward(params, &drug_a, &drug_b).map_err(ModelError::from)?;
    let explanation = build_explanation(smiles_a, smiles_b, &graph_a, &graph_b, &prediction);
    let render = |which: usize, graph: &MolecularGraph| -> Result<String, ExplainError> {
        match format {
            OutputFormat::Svg => render_svg(&explanation, which, graph, seed),
            OutputFormat::Dot => render_dot(&explanation, which, graph),
        }
    };
    let documents = [render(0, &graph_a)?, render(1, &graph_b)?];
    let sidecar = serde_json::to_string_pretty(&explanation).expect("explanation serializes");
    Ok(ExplainArtifacts {
        documents,
        sidecar,
        explanation,
    })
}
