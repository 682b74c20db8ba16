//! Throwaway calibration harness for the trained-run experiment.
use std::time::Instant;

use pgrid::geo::{PointAnnotations, Raster};
use pgrid::metrics::match_all;
use pgrid::poleloss::ProbabilityMap;
use pgrid::scorer::{self, TrainConfig};
use pgrid::synth::{self, SceneConfig};
use pgrid::unify::extract_poles;

fn scene_config(heavy: bool) -> SceneConfig {
    SceneConfig {
        extent_m: [96.0, 96.0],
        resolution_m: 0.375,
        line_visibility: 0.9,
        fences_per_km2: if heavy { 60.0 } else { 25.0 },
        trees_per_km2: if heavy { 100.0 } else { 60.0 },
        lone_poles_per_km2: if heavy { 300.0 } else { 15.0 },
        ..SceneConfig::default()
    }
}

fn make_scenes(n: usize, seed0: u64, heavy: bool) -> Vec<synth::Scene> {
    (0..n)
        .map(|i| synth::generate_scene(&scene_config(heavy), seed0 + i as u64).unwrap())
        .collect()
}

/// Mostly standard scenes plus a hard tail so negatives see lone poles.
fn make_mixed(n_std: usize, n_hard: usize, seed0: u64) -> Vec<synth::Scene> {
    let mut v = make_scenes(n_std, seed0, false);
    v.extend(make_scenes(n_hard, seed0 + 500, true));
    v
}

fn dataset(scenes: &[synth::Scene]) -> Vec<(Raster<f64>, PointAnnotations)> {
    scenes
        .iter()
        .map(|s| {
            let mut pts = s.poles.points.clone();
            let off = pts.iter().map(|p| p.id).max().map_or(0, |m| m + 1);
            for n in &s.negatives.points {
                let mut n = n.clone();
                n.id += off;
                pts.push(n);
            }
            (s.image.to_f64(), PointAnnotations::new(pts).unwrap())
        })
        .collect()
}

fn eval_prf(weights: &scorer::ScorerWeights, scenes: &[synth::Scene], min_area: usize) -> (f64, f64, f64) {
    let (mut tp, mut fp, mut fnc) = (0usize, 0usize, 0usize);
    for s in scenes {
        let feats = scorer::extract_features(&s.image.to_f64());
        let logits = scorer::score(&feats, weights).unwrap();
        let probs = ProbabilityMap::from_logits(&logits).unwrap();
        let pred = extract_poles(&probs, 0.5, min_area).unwrap();
        let m = match_all(&s.poles, &pred, 10.0);
        tp += m.true_positives;
        fp += m.false_positives;
        fnc += m.false_negatives;
    }
    let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let detected_sum: usize = scenes.iter().map(|s| s.poles.len()).sum::<usize>() - fnc;
    let r = detected_sum as f64 / scenes.iter().map(|s| s.poles.len()).sum::<usize>() as f64;
    let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f1)
}

fn main() {
    let t0 = Instant::now();
    let train_scenes = make_mixed(14, 6, 1000);
    let eval_scenes = make_scenes(5, 2000, false);
    let heavy_scenes = make_scenes(5, 3000, true);
    println!(
        "scenes built in {:.1}s; train poles tot {}, negatives tot {}",
        t0.elapsed().as_secs_f64(),
        train_scenes.iter().map(|s| s.poles.len()).sum::<usize>(),
        train_scenes.iter().map(|s| s.negatives.len()).sum::<usize>()
    );
    let data = dataset(&train_scenes);

    for seed in [1u64, 2, 3] {
        for (name, lambda) in [("hnm", 1.0), ("half", 0.5), ("none", 0.0)] {
            let config = TrainConfig {
                epochs: 150,
                seed,
                lambda_hard_neg: lambda,
                ..TrainConfig::default()
            };
            let t = Instant::now();
            let out = scorer::train_poles(&data, &config).unwrap();
            let train_t = t.elapsed().as_secs_f64();
            let t = Instant::now();
            let (pe, re, f1_eval) = eval_prf(&out.weights, &eval_scenes, 4);
            let (ph, rh, f1_heavy) = eval_prf(&out.weights, &heavy_scenes, 4);
            let (_, _, f1_eval2) = eval_prf(&out.weights, &eval_scenes, 2);
            let (_, _, f1_heavy2) = eval_prf(&out.weights, &heavy_scenes, 2);
            println!(
                "seed {seed} {name}: train {train_t:.1}s eval {:.1}s loss {:.2}->{:.3}  eval P/R/F1 {pe:.3}/{re:.3}/{f1_eval:.3} (a2 {f1_eval2:.3})  heavy {ph:.3}/{rh:.3}/{f1_heavy:.3} (a2 {f1_heavy2:.3})",
                t.elapsed().as_secs_f64(),
                out.loss_curve.first().unwrap(),
                out.loss_curve.last().unwrap(),
            );
        }
    }
    println!("total {:.1}s", t0.elapsed().as_secs_f64());
}
