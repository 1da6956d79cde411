//! The acceptance gate: ten checks, each printing one pass line (visible
//! with `--nocapture`). A failed assertion in any of them is a failed
//! criterion.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use ddigraph::attention::{attention_weights, attentive_gather, soft_alignment, Alignment};
use ddigraph::data::{Pair, PairDataset};
use ddigraph::explain::{explain_pair, OutputFormat};
use ddigraph::featurize::featurize;
use ddigraph::gcn::run_encoder;
use ddigraph::metrics::{aupr, f1_score, roc_auc};
use ddigraph::model::{
    bind, forward, forward_on_tape, head_on_tape, load, save, Hyperparams, ModelParams,
};
use ddigraph::smiles::parse_smiles;
use ddigraph::tensor::gradcheck::grad_check;
use ddigraph::tensor::tape::Tape;
use ddigraph::tensor::Tensor;
use ddigraph::train::{encode_dataset, score_pairs, train, TrainConfig, TrainOutcome};

const CELECOXIB: &str = "CC1=CC=C(C=C1)C1=CC(=NN1C1=CC=C(C=C1)S(N)(=O)=O)C(F)(F)F";
const MEPHENYTOIN: &str = "CCC1(C2=CC=CC=C2)NC(=O)N(C)C1=O";

/// 25 positive pairs where both drugs carry a carboxylic acid group, and
/// 25 negative pairs of plain hydrocarbons and ethers.
fn toy_dataset() -> PairDataset {
    let acids = [
        "CC(=O)O",
        "CCC(=O)O",
        "CCCC(=O)O",
        "CCCCC(=O)O",
        "CC(C)C(=O)O",
        "CCC(C)C(=O)O",
        "CC(C)(C)C(=O)O",
        "CCCCCC(=O)O",
    ];
    let inerts = [
        "CC", "CCC", "CCCC", "CCCCC", "CC(C)C", "CCOC", "CCC(C)C", "CCCCCC",
    ];
    let mut pairs = Vec::new();
    'positives: for i in 0..acids.len() {
        for j in (i + 1)..acids.len() {
            pairs.push(Pair {
                smiles_a: acids[i].to_string(),
                smiles_b: acids[j].to_string(),
                label: 1,
            });
            if pairs.len() == 25 {
                break 'positives;
            }
        }
    }
    let mut negatives = 0;
    'negatives: for i in 0..inerts.len() {
        for j in (i + 1)..inerts.len() {
            pairs.push(Pair {
                smiles_a: inerts[i].to_string(),
                smiles_b: inerts[j].to_string(),
                label: 0,
            });
            negatives += 1;
            if negatives == 25 {
                break 'negatives;
            }
        }
    }
    PairDataset { pairs }
}

fn toy_config() -> TrainConfig {
    TrainConfig {
        hp: Hyperparams {
            // Full-size stack, with a padding budget wide enough for the
            // case-study molecules scored by the same weights.
            max_nodes: 30,
            ..Hyperparams::default()
        },
        lr: 0.01,
        epochs: 15,
        steps_per_epoch: 20,
        batch_size: 16,
        seed: 42,
        val_fraction: None,
    }
}

static TOY_MODEL: OnceLock<(TrainOutcome<f64>, Duration)> = OnceLock::new();

fn toy_model() -> &'static (TrainOutcome<f64>, Duration) {
    TOY_MODEL.get_or_init(|| {
        let started = Instant::now();
        let outcome = train::<f64>(&toy_dataset(), &toy_config(), |_| {}).unwrap();
        (outcome, started.elapsed())
    })
}

#[test]
fn criterion_01_scale_substitution_note() {
    // Full-scale interaction corpora (hundreds of thousands of labeled
    // pairs over thousands of approved drugs) are licensed and far beyond
    // desk scale, so headline benchmark numbers are not reproduced here.
    // The stand-in is behavioral: criteria 2 through 10 check gradients,
    // invariances, masking, metrics, parsing, determinism, and the
    // case-study workflow on generated fixtures.
    let toy = toy_dataset();
    assert_eq!(toy.len(), 50);
    assert_eq!(toy.class_counts(), (25, 25));
    println!(
        "criterion 1: PASS (licensed corpus out of scope; 50-pair generated fixture substitutes)"
    );
}

#[test]
fn criterion_02_end_to_end_gradient_check() {
    let started = Instant::now();
    let hp = Hyperparams {
        gcn_layers: 3,
        gcn_units: 10,
        fc_layers: 2,
        fc_units: 12,
        max_nodes: 8,
        shared_degree_weights: false,
        share_attention_w: false,
    };
    let template = ModelParams::<f64>::init(hp, 77);
    // Two pairs, every drug at most 6 atoms.
    let drugs: Vec<_> = ["CCO", "CC(=O)O", "C=O", "CCN"]
        .iter()
        .map(|s| featurize::<f64>(&parse_smiles(s).unwrap(), 8).unwrap())
        .collect();
    let labels = [1.0, 0.0];

    let batch_loss = |m: &ModelParams<f64>| -> Result<f64, ddigraph::TensorError> {
        let mut tape = Tape::new();
        let bound = bind(&mut tape, m)?;
        let mut total = None;
        for (pair, &label) in [(0usize, 1usize), (2, 3)].iter().zip(&labels) {
            let artifacts = forward_on_tape(&mut tape, &bound, &drugs[pair.0], &drugs[pair.1])?;
            let loss = tape.bce_loss(artifacts.probability, label)?;
            total = Some(match total {
                None => loss,
                Some(acc) => tape.add(acc, loss)?,
            });
        }
        let total = tape.scale(total.unwrap(), 0.5)?;
        Ok(tape.value(total).item())
    };

    let eval = |xs: &[Tensor<f64>]| {
        let mut m = template.clone();
        m.set_values(xs)?;
        batch_loss(&m)
    };
    let point = template.values();
    let analytic = {
        let mut tape = Tape::new();
        let bound = bind(&mut tape, &template).unwrap();
        let mut total = None;
        for (pair, &label) in [(0usize, 1usize), (2, 3)].iter().zip(&labels) {
            let artifacts =
                forward_on_tape(&mut tape, &bound, &drugs[pair.0], &drugs[pair.1]).unwrap();
            let loss = tape.bce_loss(artifacts.probability, label).unwrap();
            total = Some(match total {
                None => loss,
                Some(acc) => tape.add(acc, loss).unwrap(),
            });
        }
        let total = tape.scale(total.unwrap(), 0.5).unwrap();
        tape.backward(total).unwrap();
        bound
            .ids()
            .iter()
            .map(|&id| tape.grad_cloned_or_zeros(id))
            .collect::<Vec<_>>()
    };
    let report = grad_check(&eval, &point, &analytic, 1e-5).unwrap();
    let elapsed = started.elapsed();
    assert!(
        report.max_rel_err <= 1e-4,
        "max relative error {} at {:?}",
        report.max_rel_err,
        report.worst
    );
    assert!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    println!(
        "criterion 2: PASS (max rel err {:.2e} over {} parameters in {:.1?})",
        report.max_rel_err,
        template.n_parameters(),
        elapsed
    );
}

#[test]
fn criterion_03_overfits_the_planted_motif() {
    let (outcome, elapsed) = toy_model();
    let final_loss = outcome.history.last().unwrap().mean_loss;
    let encoded = encode_dataset::<f64>(&toy_dataset(), 30).unwrap();
    let (scores, labels) = score_pairs(&outcome.params, &encoded).unwrap();
    let auc = roc_auc(&scores, &labels).unwrap();
    let steps = toy_config().epochs * toy_config().steps_per_epoch;
    assert!(steps <= 300, "{steps} steps exceeds the budget");
    assert!(final_loss < 0.1, "train loss {final_loss}");
    assert!(auc >= 0.99, "train roc_auc {auc}");
    assert!(
        *elapsed < Duration::from_secs(120),
        "training took {elapsed:?}"
    );
    println!(
        "criterion 3: PASS (loss {final_loss:.4}, roc_auc {auc:.4} after {steps} steps in {elapsed:.1?})"
    );
}

#[test]
fn criterion_04_atom_relabeling_invariance() {
    // Each pair writes the same molecule with a different atom ordering.
    let rewrites: [(&str, &str); 12] = [
        ("CCO", "OCC"),
        ("CC(=O)O", "OC(=O)C"),
        ("CCN", "NCC"),
        ("CC(C)C", "C(C)(C)C"),
        ("CCOC", "COCC"),
        ("OCC(O)CO", "C(O)(CO)CO"),
        ("c1ccccc1C", "Cc1ccccc1"),
        ("CC(=O)OC", "COC(C)=O"),
        ("CCC", "C(C)C"),
        ("CC=O", "O=CC"),
        ("c1ccncc1", "n1ccccc1"),
        ("C#N", "N#C"),
    ];
    let partners = [
        "CC", "CCO", "c1ccccc1", "CC(=O)O", "CCN", "C", "CCC", "O", "CCCC",
    ];
    let params = ModelParams::<f64>::init(
        Hyperparams {
            max_nodes: 30,
            ..Hyperparams::default()
        },
        9,
    );
    let predict = |a: &str, b: &str| {
        let da = featurize::<f64>(&parse_smiles(a).unwrap(), 30).unwrap();
        let db = featurize::<f64>(&parse_smiles(b).unwrap(), 30).unwrap();
        forward(&params, &da, &db).unwrap().probability
    };
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    'outer: for (original, relabeled) in rewrites {
        for partner in partners {
            let diff = (predict(original, partner) - predict(relabeled, partner)).abs();
            worst = worst.max(diff);
            assert!(
                diff <= 1e-9,
                "{original} vs {relabeled} against {partner}: diff {diff}"
            );
            checked += 1;
            if checked == 100 {
                break 'outer;
            }
        }
    }
    assert_eq!(checked, 100);
    println!("criterion 4: PASS (100 relabeled pairs, worst diff {worst:.2e})");
}

#[test]
fn criterion_05_padding_budget_invariance() {
    let params = ModelParams::<f64>::init(Hyperparams::default(), 21);
    let pairs = [
        ("CCO", "CC(=O)O"),
        ("c1ccccc1", "CCN"),
        (CELECOXIB, MEPHENYTOIN),
        ("CC(=O)Oc1ccccc1C(=O)O", "CN1C=NC2=C1C(=O)N(C(=O)N2C)C"),
        ("C", "O"),
        ("c1ccc2ccccc2c1", "OCC(O)CO"),
        ("C#N", "ClCCl"),
        ("[Na+].[Cl-]", "CCO"),
        ("C/C=C/C", "CC(C)(C)C(=O)O"),
        ("c1cc[nH]c1", "N#Cc1ccccc1"),
    ];
    let mut worst: f64 = 0.0;
    for (a, b) in pairs {
        let at = |width: usize| {
            let da = featurize::<f64>(&parse_smiles(a).unwrap(), width).unwrap();
            let db = featurize::<f64>(&parse_smiles(b).unwrap(), width).unwrap();
            forward(&params, &da, &db).unwrap().probability
        };
        let diff = (at(65) - at(80)).abs();
        worst = worst.max(diff);
        assert!(diff <= 1e-12, "{a} / {b}: diff {diff}");
    }
    println!("criterion 5: PASS (10 pairs at widths 65 vs 80, worst diff {worst:.2e})");
}

#[test]
fn criterion_06_padded_alignment_entries_are_inert() {
    let hp = Hyperparams {
        gcn_layers: 4,
        gcn_units: 7,
        fc_layers: 2,
        fc_units: 9,
        max_nodes: 8,
        shared_degree_weights: false,
        share_attention_w: false,
    };
    let params = ModelParams::<f64>::init(hp, 33);
    let drug_a = featurize::<f64>(&parse_smiles("CCO").unwrap(), 8).unwrap();
    let drug_b = featurize::<f64>(&parse_smiles("CC").unwrap(), 8).unwrap();

    // Recompose the forward pass so the alignment matrix can be swapped
    // for a copy with garbage planted in its padded rows and columns.
    let run = |tamper: bool| -> (f64, Vec<Vec<f64>>) {
        let mut tape = Tape::new();
        let bound = bind(&mut tape, &params).unwrap();
        let reps_a = run_encoder(&mut tape, &drug_a, &bound.gcn).unwrap();
        let reps_b = run_encoder(&mut tape, &drug_b, &bound.gcn).unwrap();
        let mut sigmas = Vec::new();
        let mut h_a = None;
        let mut h_b = None;
        for layer in 0..reps_a.len() {
            let w = bound.attention[layer % bound.attention.len()];
            let alignment = soft_alignment(
                &mut tape,
                reps_a[layer],
                reps_b[layer],
                w,
                &drug_a.node_mask,
                &drug_b.node_mask,
            )
            .unwrap();
            let p = if tamper {
                let mut tampered = tape.value(alignment.p).clone();
                for i in 0..8 {
                    for j in 0..8 {
                        if i >= drug_a.n_atoms || j >= drug_b.n_atoms {
                            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                            tampered.set2(i, j, sign * 1e9);
                        }
                    }
                }
                tape.constant(tampered).unwrap()
            } else {
                alignment.p
            };
            let patched = Alignment {
                p,
                mask_a: alignment.mask_a.clone(),
                mask_b: alignment.mask_b.clone(),
            };
            let (sigma_a, sigma_b) = attention_weights(&mut tape, &patched).unwrap();
            let ga = attentive_gather(&mut tape, sigma_a, reps_a[layer]).unwrap();
            let gb = attentive_gather(&mut tape, sigma_b, reps_b[layer]).unwrap();
            h_a = Some(match h_a {
                None => ga,
                Some(acc) => tape.add(acc, ga).unwrap(),
            });
            h_b = Some(match h_b {
                None => gb,
                Some(acc) => tape.add(acc, gb).unwrap(),
            });
            sigmas.push(tape.value(sigma_a).data().to_vec());
            sigmas.push(tape.value(sigma_b).data().to_vec());
        }
        let prob = head_on_tape(&mut tape, &bound, h_a.unwrap(), h_b.unwrap()).unwrap();
        (tape.value(prob).item(), sigmas)
    };

    let (clean_prob, clean_sigmas) = run(false);
    let (dirty_prob, dirty_sigmas) = run(true);
    assert_eq!(
        clean_prob.to_bits(),
        dirty_prob.to_bits(),
        "probability moved: {clean_prob} vs {dirty_prob}"
    );
    assert_eq!(clean_sigmas.len(), dirty_sigmas.len());
    for (c, d) in clean_sigmas.iter().zip(&dirty_sigmas) {
        for (x, y) in c.iter().zip(d) {
            assert_eq!(x.to_bits(), y.to_bits(), "sigma moved: {x} vs {y}");
        }
    }
    // The recomposition itself must match the packaged forward pass.
    let standard = forward(&params, &drug_a, &drug_b).unwrap().probability;
    assert_eq!(clean_prob.to_bits(), standard.to_bits());
    println!("criterion 6: PASS (1e9 planted in padded alignment entries, zero change)");
}

fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut total = 0.0;
    for (i, &yi) in labels.iter().enumerate() {
        if yi != 1 {
            continue;
        }
        for (j, &yj) in labels.iter().enumerate() {
            if yj != 0 {
                continue;
            }
            total += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / total
}

fn trapezoidal_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let n_pos = labels.iter().filter(|&&y| y == 1).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] == 1 {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            j += 1;
        }
        points.push((fp / n_neg, tp / n_pos));
        i = j;
    }
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

/// Brute-force F1: recount the confusion matrix directly.
fn brute_f1(scores: &[f64], labels: &[u8], threshold: f64) -> f64 {
    let tp = scores
        .iter()
        .zip(labels)
        .filter(|&(&s, &y)| s >= threshold && y == 1)
        .count() as f64;
    let fp = scores
        .iter()
        .zip(labels)
        .filter(|&(&s, &y)| s >= threshold && y == 0)
        .count() as f64;
    let fn_ = scores
        .iter()
        .zip(labels)
        .filter(|&(&s, &y)| s < threshold && y == 1)
        .count() as f64;
    if tp == 0.0 {
        return 0.0;
    }
    let precision = tp / (tp + fp);
    let recall = tp / (tp + fn_);
    2.0 * precision * recall / (precision + recall)
}

/// Brute-force average precision: at each distinct threshold, recount the
/// step curve from scratch.
fn brute_aupr(scores: &[f64], labels: &[u8]) -> f64 {
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let mut ap = 0.0;
    let mut prev_tp = 0usize;
    for &t in &thresholds {
        let tp = scores
            .iter()
            .zip(labels)
            .filter(|&(&s, &y)| s >= t && y == 1)
            .count();
        let predicted = scores.iter().filter(|&&s| s >= t).count();
        if tp > prev_tp {
            ap += (tp - prev_tp) as f64 / n_pos as f64 * (tp as f64 / predicted as f64);
        }
        prev_tp = tp;
    }
    ap
}

struct SplitMix(u64);

impl SplitMix {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    fn unit(&mut self) -> f64 {
        (self.next() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Drawn with duplicates likely, to exercise tie handling.
    fn case(&mut self, n: usize) -> (Vec<f64>, Vec<u8>) {
        loop {
            let quantize = self.next().is_multiple_of(2);
            let scores: Vec<f64> = (0..n)
                .map(|_| {
                    let u = self.unit();
                    if quantize {
                        (u * 6.0).floor() / 6.0
                    } else {
                        u
                    }
                })
                .collect();
            let labels: Vec<u8> = (0..n).map(|_| (self.next() & 1) as u8).collect();
            let pos = labels.iter().filter(|&&y| y == 1).count();
            if pos > 0 && pos < n {
                return (scores, labels);
            }
        }
    }
}

#[test]
fn criterion_07_metric_oracles() {
    let fixture_auc = roc_auc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap();
    assert_eq!(fixture_auc, 0.75, "fixture must be exact");

    let mut rng = SplitMix(2024);
    let mut worst_gap: f64 = 0.0;
    for trial in 0..1000 {
        let n = 2 + (rng.next() % 40) as usize;
        let (scores, labels) = rng.case(n);
        let lib = roc_auc(&scores, &labels).unwrap();
        let pairwise = pairwise_auc(&scores, &labels);
        let trapezoid = trapezoidal_auc(&scores, &labels);
        for (name, other) in [("pairwise", pairwise), ("trapezoidal", trapezoid)] {
            let gap = (lib - other).abs();
            worst_gap = worst_gap.max(gap);
            assert!(gap <= 1e-12, "trial {trial} ({name}): {lib} vs {other}");
        }
        assert!(
            (pairwise - trapezoid).abs() <= 1e-12,
            "trial {trial}: oracles disagree"
        );
    }

    for trial in 0..500 {
        let n = 2 + (rng.next() % 9) as usize;
        let (scores, labels) = rng.case(n);
        let f1 = f1_score(&scores, &labels, 0.5).unwrap();
        assert_eq!(f1, brute_f1(&scores, &labels, 0.5), "f1 trial {trial}");
        let ap = aupr(&scores, &labels).unwrap();
        assert_eq!(ap, brute_aupr(&scores, &labels), "aupr trial {trial}");
    }
    println!(
        "criterion 7: PASS (fixture auc 0.75 exact; 1000 auc instances within {worst_gap:.2e}; 500 f1/aupr instances exact)"
    );
}

#[test]
fn criterion_08_parser_corpus() {
    let path = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/fixtures/parser_corpus.csv"
    );
    let text = std::fs::read_to_string(path).unwrap();
    let mut checked = 0;
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 4, "bad fixture row: {line}");
        let (smiles, atoms, bonds, degrees) = (
            fields[0],
            fields[1].parse::<usize>().unwrap(),
            fields[2].parse::<usize>().unwrap(),
            fields[3],
        );
        let graph = parse_smiles(smiles).unwrap_or_else(|e| panic!("{smiles}: {e}"));
        assert_eq!(graph.n_atoms(), atoms, "{smiles}: atom count");
        assert_eq!(graph.n_bonds(), bonds, "{smiles}: bond count");
        let mut seq: Vec<usize> = (0..graph.n_atoms()).map(|i| graph.degree(i)).collect();
        seq.sort_unstable();
        let expected: Vec<usize> = degrees
            .split(' ')
            .map(|d| d.parse::<usize>().unwrap())
            .collect();
        assert_eq!(seq, expected, "{smiles}: degree sequence");
        checked += 1;
    }
    assert_eq!(checked, 25, "corpus must hold 25 molecules");
    println!("criterion 8: PASS (25 molecules: atoms, bonds, degree sequences exact)");
}

#[test]
fn criterion_09_training_determinism_and_roundtrip() {
    let dataset = toy_dataset();
    let config = TrainConfig {
        hp: Hyperparams {
            gcn_layers: 2,
            gcn_units: 8,
            fc_layers: 2,
            fc_units: 10,
            max_nodes: 12,
            shared_degree_weights: false,
            share_attention_w: false,
        },
        lr: 0.01,
        epochs: 2,
        steps_per_epoch: 5,
        batch_size: 8,
        seed: 77,
        val_fraction: None,
    };
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for name in ["first.bin", "second.bin"] {
        let outcome = train::<f64>(&dataset, &config, |_| {}).unwrap();
        let path = dir.path().join(name);
        save(&outcome.params, &path).unwrap();
        files.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(files[0], files[1], "model files differ between runs");

    let restored = load::<f64>(&dir.path().join("first.bin")).unwrap();
    let again = train::<f64>(&dataset, &config, |_| {}).unwrap();
    assert_eq!(restored.hp, again.params.hp);
    assert_eq!(restored.values(), again.params.values());
    println!(
        "criterion 9: PASS (identical seeds give byte-identical files, {} bytes; load restores every value)",
        files[0].len()
    );
}

#[test]
fn criterion_10_case_study_explain_workflow() {
    let (outcome, _) = toy_model();
    let artifacts = explain_pair(
        &outcome.params,
        CELECOXIB,
        MEPHENYTOIN,
        OutputFormat::Svg,
        1,
    )
    .unwrap();

    let [doc_a, doc_b] = &artifacts.documents;
    assert!(doc_a.starts_with("<svg") && doc_a.trim_end().ends_with("</svg>"));
    assert!(doc_b.starts_with("<svg") && doc_b.trim_end().ends_with("</svg>"));
    assert_eq!(doc_a.matches("<circle").count(), 26);
    assert_eq!(doc_b.matches("<circle").count(), 16);

    let json: serde_json::Value = serde_json::from_str(&artifacts.sidecar).unwrap();
    let layer = json["selected_layer"].as_u64().unwrap();
    assert!((1..=4).contains(&layer), "layer {layer} outside 1..4");
    let probability = json["probability"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&probability));
    let drugs = json["drugs"].as_array().unwrap();
    assert_eq!(drugs.len(), 2);
    for (drug, n_atoms) in drugs.iter().zip([26usize, 16]) {
        let atoms = drug["atoms"].as_array().unwrap();
        assert_eq!(atoms.len(), n_atoms);
        let mut max_intensity: f64 = 0.0;
        for atom in atoms {
            let intensity = atom["intensity"].as_f64().unwrap();
            assert!(
                (0.0..=1.0).contains(&intensity),
                "intensity {intensity} out of range"
            );
            max_intensity = max_intensity.max(intensity);
        }
        assert!(
            (max_intensity - 1.0).abs() <= 1e-12,
            "hottest atom must be 1"
        );
    }

    let dot = explain_pair(
        &outcome.params,
        CELECOXIB,
        MEPHENYTOIN,
        OutputFormat::Dot,
        1,
    )
    .unwrap();
    assert!(dot.documents[0].starts_with("graph drug_a"));
    assert!(dot.documents[1].starts_with("graph drug_b"));

    println!(
        "criterion 10: PASS (probability {probability:.4}, layer {layer}, 26+16 atoms highlighted)"
    );
}
