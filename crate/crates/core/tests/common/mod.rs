#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relu_regions::geometry::interior_point;
use relu_regions::trainer::{backward, cross_entropy_loss};
use relu_regions::{init_network, ConvexPolygon, InitScheme, NetSpec, NetworkParams, Point2};

pub fn net(hidden: &[usize], scheme: InitScheme) -> NetworkParams {
    init_network(&NetSpec::planar(hidden, 2), scheme).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `k` points strictly inside `cell`: random convex combinations of the
/// vertices pulled halfway towards an interior point.
pub fn interior_samples(cell: &ConvexPolygon, rng: &mut ChaCha8Rng, k: usize) -> Vec<Point2> {
    let centre = interior_point(cell).unwrap();
    let v = cell.vertices();
    (0..k)
        .map(|i| {
            if i == 0 {
                return centre;
            }
            let w: Vec<f64> = v.iter().map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
            let s: f64 = w.iter().sum();
            let (x, y) = v
                .iter()
                .zip(&w)
                .fold((0.0, 0.0), |(x, y), (p, wi)| (x + p.x * wi / s, y + p.y * wi / s));
            centre.lerp(Point2::new(x, y), 0.5)
        })
        .collect()
}

/// Parameter interval `[t0, t1]` of the segment `a → b` inside `cell`.
pub fn clip_segment(cell: &ConvexPolygon, a: Point2, b: Point2) -> Option<(f64, f64)> {
    let v = cell.vertices();
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for i in 0..v.len() {
        let (p, q) = (v[i], v[(i + 1) % v.len()]);
        // Inside is left of p → q.
        let side = |x: Point2| (q.x - p.x) * (x.y - p.y) - (q.y - p.y) * (x.x - p.x);
        let (fa, fb) = (side(a), side(b));
        let d = fb - fa;
        if d.abs() < 1e-300 {
            if fa < 0.0 {
                return None;
            }
            continue;
        }
        let t = -fa / d;
        if d > 0.0 {
            t0 = t0.max(t);
        } else {
            t1 = t1.min(t);
        }
    }
    (t1 > t0).then_some((t0, t1))
}

fn mean_loss(params: &NetworkParams, batch: &[(&[f64], usize)]) -> f64 {
    batch
        .iter()
        .map(|(x, y)| cross_entropy_loss(&params.forward(x).unwrap(), *y).unwrap())
        .sum::<f64>()
        / batch.len() as f64
}

fn patterns(params: &NetworkParams, batch: &[(&[f64], usize)]) -> Vec<Vec<bool>> {
    batch
        .iter()
        .map(|(x, _)| params.activation_pattern(x).unwrap().bits().to_vec())
        .collect()
}

/// Largest relative error between `backward` and central differences with
/// step `h`, over parameters whose perturbation flips no activation.
/// Returns `(max_rel_error, checked, skipped)`.
pub fn gradient_check(params: &NetworkParams, batch: &[(&[f64], usize)], h: f64) -> (f64, usize, usize) {
    let (grads, _) = backward(params, batch).unwrap();
    let (mut worst, mut checked, mut skipped) = (0.0f64, 0, 0);
    for (li, layer) in params.layers.iter().enumerate() {
        let n_w = layer.weights.len();
        for pi in 0..n_w + layer.bias.len() {
            let nudge = |delta: f64| {
                let mut p = params.clone();
                let l = &mut p.layers[li];
                if pi < n_w {
                    l.weights[pi] += delta;
                } else {
                    l.bias[pi - n_w] += delta;
                }
                p
            };
            let (plus, minus) = (nudge(h), nudge(-h));
            if patterns(&plus, batch) != patterns(&minus, batch) {
                skipped += 1;
                continue;
            }
            let numeric = (mean_loss(&plus, batch) - mean_loss(&minus, batch)) / (2.0 * h);
            let g = &grads.layers[li];
            let analytic = if pi < n_w { g.weights[pi] } else { g.bias[pi - n_w] };
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
            checked += 1;
        }
    }
    (worst, checked, skipped)
}

pub fn random_batch(rng: &mut ChaCha8Rng, n: usize, classes: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let xs = (0..n)
        .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
        .collect();
    let ys = (0..n).map(|_| rng.random_range(0..classes)).collect();
    (xs, ys)
}
