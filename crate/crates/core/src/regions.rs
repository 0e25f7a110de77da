//! Exact linear-region enumeration over a convex 2D domain, breakpoint
//! scans along segments, and a grid-sampling oracle.
//!
//! Enumeration cuts the domain layer by layer. Inside a cell produced by
//! layers `1..m`, the pre-activation of every layer-`m+1` neuron is a single
//! affine function of the input, so its zero line splits the cell into at
//! most two convex pieces. Cells of one layer are processed in parallel;
//! the final region list is sorted by centroid so the output does not depend
//! on scheduling.

use std::collections::HashSet;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    interior_point, segment_root, split_unchecked, ConvexPolygon, GeomTolerance, Point2,
};
use crate::nn::{compose_layer, ActivationPattern, AffineFunction, NetworkParams};

/// Default cap on the number of cells alive at any point of enumeration.
pub const DEFAULT_REGION_CAP: usize = 1_000_000;

/// Breakpoints closer than this (in segment parameter) are merged.
pub const BREAKPOINT_MERGE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearRegion {
    pub cell: ConvexPolygon,
    pub pattern: ActivationPattern,
    /// One affine function per class.
    pub logit_affines: Vec<AffineFunction>,
}

impl LinearRegion {
    pub fn interior_point(&self) -> Result<Point2> {
        interior_point(&self.cell)
    }

    pub fn logits_at(&self, x: Point2) -> Vec<f64> {
        let x = x.to_array();
        self.logit_affines.iter().map(|f| f.eval(&x)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionArrangement {
    pub domain: ConvexPolygon,
    pub regions: Vec<LinearRegion>,
    /// Cell count after cutting with hidden layers `1..=m`.
    pub per_layer_counts: Vec<usize>,
}

impl RegionArrangement {
    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn total_area(&self) -> f64 {
        self.regions.iter().map(|r| r.cell.area()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnumerationConfig {
    pub tol: GeomTolerance,
    pub cap: usize,
    /// Stop after this many hidden layers; `None` cuts with all of them.
    pub up_to_layer: Option<usize>,
}

impl Default for EnumerationConfig {
    fn default() -> Self {
        EnumerationConfig {
            tol: GeomTolerance::default(),
            cap: DEFAULT_REGION_CAP,
            up_to_layer: None,
        }
    }
}

impl EnumerationConfig {
    pub fn with_tol(tol: GeomTolerance) -> Self {
        EnumerationConfig {
            tol,
            ..Self::default()
        }
    }
}

struct Cell {
    poly: ConvexPolygon,
    bits: Vec<bool>,
    /// Post-activation affine functions of the last processed layer.
    post: Vec<AffineFunction>,
}

pub fn enumerate_regions(
    params: &NetworkParams,
    domain: &ConvexPolygon,
    config: &EnumerationConfig,
) -> Result<RegionArrangement> {
    if params.spec.input_dim != 2 {
        return Err(Error::NotTwoDimensional(params.spec.input_dim));
    }
    domain.validate()?;
    config.tol.validate()?;
    let tol = config.tol;

    let hidden = params.hidden_layers();
    let depth = config.up_to_layer.map_or(hidden.len(), |m| m.min(hidden.len()));
    let mut cells = vec![Cell {
        poly: domain.clone(),
        bits: Vec::with_capacity(params.neuron_count()),
        post: AffineFunction::identity_map(2),
    }];
    let mut per_layer_counts = Vec::with_capacity(depth);

    for (m, layer) in hidden.iter().take(depth).enumerate() {
        let next: Vec<Vec<Cell>> = cells
            .into_par_iter()
            .map(|cell| cut_cell_with_layer(cell, layer, &tol))
            .collect();
        let count: usize = next.iter().map(Vec::len).sum();
        if count > config.cap {
            return Err(Error::RegionCapExceeded {
                count,
                cap: config.cap,
                layer: m + 1,
            });
        }
        cells = next.into_iter().flatten().collect();
        per_layer_counts.push(cells.len());
    }

    let total_bits = params.neuron_count();
    let mut regions: Vec<(Point2, LinearRegion)> = cells
        .into_par_iter()
        .map(|mut cell| {
            let logit_affines = if depth == hidden.len() {
                compose_layer(params.output_layer(), &cell.post)
            } else {
                Vec::new()
            };
            // Partial enumerations leave the deeper bits unset.
            cell.bits.resize(total_bits, false);
            let centroid = cell.poly.centroid();
            (
                centroid,
                LinearRegion {
                    cell: cell.poly,
                    pattern: ActivationPattern::from_bits(cell.bits),
                    logit_affines,
                },
            )
        })
        .collect();
    regions.sort_by(|(a, ra), (b, rb)| {
        a.y.total_cmp(&b.y)
            .then(a.x.total_cmp(&b.x))
            .then_with(|| ra.pattern.cmp(&rb.pattern))
    });

    Ok(RegionArrangement {
        domain: domain.clone(),
        regions: regions.into_iter().map(|(_, r)| r).collect(),
        per_layer_counts,
    })
}

fn cut_cell_with_layer(
    cell: Cell,
    layer: &crate::nn::Layer,
    tol: &GeomTolerance,
) -> Vec<Cell> {
    let pre = compose_layer(layer, &cell.post);
    let mut pieces: Vec<(ConvexPolygon, Vec<bool>)> =
        vec![(cell.poly, Vec::with_capacity(layer.rows))];
    for f in &pre {
        let mut out = Vec::with_capacity(pieces.len() + 1);
        for (poly, mut bits) in pieces {
            match split_unchecked(&poly, f, tol) {
                (Some(p), None) => {
                    bits.push(true);
                    out.push((p, bits));
                }
                (None, Some(n)) => {
                    bits.push(false);
                    out.push((n, bits));
                }
                (Some(p), Some(n)) => {
                    let mut pb = bits.clone();
                    pb.push(true);
                    bits.push(false);
                    out.push((p, pb));
                    out.push((n, bits));
                }
                // Both halves below min_area: the whole piece was a sliver.
                (None, None) => {}
            }
        }
        pieces = out;
    }
    pieces
        .into_iter()
        .map(|(poly, layer_bits)| {
            let post = pre
                .iter()
                .zip(&layer_bits)
                .map(|(f, &on)| if on { f.clone() } else { AffineFunction::zero(2) })
                .collect();
            let mut bits = cell.bits.clone();
            bits.extend_from_slice(&layer_bits);
            Cell { poly, bits, post }
        })
        .collect()
}

/// Number of distinct activation patterns over a `resolution × resolution`
/// grid spanning the rectangle `[lo, hi]`, boundary included. Grid points
/// lying exactly on some neuron's zero line are skipped.
pub fn grid_pattern_oracle(
    params: &NetworkParams,
    lo: Point2,
    hi: Point2,
    resolution: usize,
) -> Result<usize> {
    if resolution < 2 {
        return Err(Error::InvalidSpec("grid resolution must be >= 2".into()));
    }
    if params.spec.input_dim != 2 {
        return Err(Error::NotTwoDimensional(params.spec.input_dim));
    }
    let step_x = (hi.x - lo.x) / (resolution - 1) as f64;
    let step_y = (hi.y - lo.y) / (resolution - 1) as f64;
    let words = params.neuron_count().div_ceil(64).max(1);
    let per_row: Vec<HashSet<Vec<u64>>> = (0..resolution)
        .into_par_iter()
        .map(|j| {
            let y = lo.y + j as f64 * step_y;
            (0..resolution)
                .filter_map(|i| packed_pattern(params, [lo.x + i as f64 * step_x, y], words))
                .collect()
        })
        .collect();
    let mut all = HashSet::new();
    for row in per_row {
        all.extend(row);
    }
    Ok(all.len())
}

/// Packed pattern at `x`, or `None` when `x` sits on a cut: some
/// pre-activation is exactly zero while its local gradient is not.
fn packed_pattern(params: &NetworkParams, x: [f64; 2], words: usize) -> Option<Vec<u64>> {
    let mut packed = vec![0u64; words];
    let mut cur: Vec<(f64, [f64; 2])> = vec![(x[0], [1.0, 0.0]), (x[1], [0.0, 1.0])];
    let mut bit = 0;
    for layer in params.hidden_layers() {
        let next = (0..layer.rows)
            .map(|r| {
                let (z, g) = layer.row(r).iter().zip(&cur).fold(
                    (layer.bias[r], [0.0, 0.0]),
                    |(z, g), (w, (v, dv))| (z + w * v, [g[0] + w * dv[0], g[1] + w * dv[1]]),
                );
                if z == 0.0 && g != [0.0, 0.0] {
                    return None;
                }
                if z > 0.0 {
                    packed[bit / 64] |= 1 << (bit % 64);
                }
                bit += 1;
                Some(if z > 0.0 { (z, g) } else { (0.0, [0.0, 0.0]) })
            })
            .collect::<Option<Vec<_>>>()?;
        cur = next;
    }
    Some(packed)
}

/// Ordered breakpoints of the network restricted to the segment `a → b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineScan {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// Strictly increasing parameters in `(0, 1)`.
    pub breakpoints: Vec<f64>,
    /// Number of affine pieces, `breakpoints.len() + 1`.
    pub count: usize,
}

impl LineScan {
    pub fn length(&self) -> f64 {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(x, y)| (y - x).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn point_at(&self, t: f64) -> Vec<f64> {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(x, y)| x + t * (y - x))
            .collect()
    }
}

/// A neuron's pre-activation along the segment: `slope·t + intercept`.
#[derive(Debug, Clone, Copy)]
struct Affine1 {
    slope: f64,
    intercept: f64,
}

impl Affine1 {
    fn eval(self, t: f64) -> f64 {
        self.slope * t + self.intercept
    }
}

/// Works for any input dimension; layer by layer, each current piece of
/// `[0, 1]` is split at the zero crossings of the next layer's
/// pre-activations, which are affine in `t` on that piece.
pub fn count_breakpoints_on_segment(
    params: &NetworkParams,
    a: &[f64],
    b: &[f64],
    side_eps: f64,
) -> Result<LineScan> {
    let dim = params.spec.input_dim;
    for v in [a, b] {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: v.len(),
            });
        }
    }
    if a == b {
        return Err(Error::InvalidSpec("segment endpoints coincide".into()));
    }
    // x(t) = a + t (b - a)
    let input: Vec<Affine1> = a
        .iter()
        .zip(b)
        .map(|(&x0, &x1)| Affine1 {
            slope: x1 - x0,
            intercept: x0,
        })
        .collect();

    struct Piece {
        t0: f64,
        t1: f64,
        post: Vec<Affine1>,
    }
    let mut pieces = vec![Piece {
        t0: 0.0,
        t1: 1.0,
        post: input,
    }];
    for layer in params.hidden_layers() {
        let mut next = Vec::with_capacity(pieces.len());
        for piece in pieces {
            let pre: Vec<Affine1> = (0..layer.rows)
                .map(|r| {
                    let mut f = Affine1 {
                        slope: 0.0,
                        intercept: layer.bias[r],
                    };
                    for (w, g) in layer.row(r).iter().zip(&piece.post) {
                        f.slope += w * g.slope;
                        f.intercept += w * g.intercept;
                    }
                    f
                })
                .collect();
            let width = piece.t1 - piece.t0;
            let mut cuts: Vec<f64> = pre
                .iter()
                .filter_map(|f| {
                    // Reparametrize to s ∈ [0, 1] over this piece.
                    let slope = f.slope * width;
                    let intercept = f.eval(piece.t0);
                    let eps = side_eps * (1.0 + intercept.abs() + slope.abs());
                    segment_root(slope, intercept, eps).map(|s| piece.t0 + s * width)
                })
                .collect();
            cuts.sort_by(f64::total_cmp);
            cuts.dedup_by(|b, a| *b - *a < BREAKPOINT_MERGE_EPS);
            let mut bounds = Vec::with_capacity(cuts.len() + 2);
            bounds.push(piece.t0);
            bounds.extend(
                cuts.into_iter()
                    .filter(|&t| t - piece.t0 >= BREAKPOINT_MERGE_EPS && piece.t1 - t >= BREAKPOINT_MERGE_EPS),
            );
            bounds.push(piece.t1);
            for w in bounds.windows(2) {
                let mid = 0.5 * (w[0] + w[1]);
                let post = pre
                    .iter()
                    .map(|f| {
                        if f.eval(mid) > 0.0 {
                            *f
                        } else {
                            Affine1 {
                                slope: 0.0,
                                intercept: 0.0,
                            }
                        }
                    })
                    .collect();
                next.push(Piece {
                    t0: w[0],
                    t1: w[1],
                    post,
                });
            }
        }
        pieces = next;
    }
    let breakpoints: Vec<f64> = pieces.iter().skip(1).map(|p| p.t0).collect();
    Ok(LineScan {
        a: a.to_vec(),
        b: b.to_vec(),
        count: breakpoints.len() + 1,
        breakpoints,
    })
}

/// Where the ray from the origin through `p` leaves the box `[-r, r]²`.
pub fn extend_to_box(p: Point2, r: f64) -> Option<Point2> {
    let m = p.x.abs().max(p.y.abs());
    if m == 0.0 {
        return None;
    }
    Some(Point2::new(p.x * r / m, p.y * r / m))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLineSummary {
    pub counts: Vec<usize>,
    /// Length of each scanned segment (origin to domain boundary).
    pub lengths: Vec<f64>,
    pub mean_count: f64,
    /// `mean_count / neuron_count`.
    pub ratio: f64,
}

/// Scan `n_lines` segments from the origin through randomly chosen training
/// points, each extended to the boundary of `[-1, 1]²`.
pub fn scan_training_lines(
    params: &NetworkParams,
    points: &[Point2],
    n_lines: usize,
    seed: u64,
    side_eps: f64,
) -> Result<TrainingLineSummary> {
    if points.is_empty() {
        return Err(Error::InvalidDataset("no training points to scan through".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = Vec::with_capacity(n_lines);
    let mut lengths = Vec::with_capacity(n_lines);
    let mut attempts = 0;
    while counts.len() < n_lines {
        attempts += 1;
        if attempts > 100 * n_lines.max(1) {
            return Err(Error::InvalidDataset("all training points sit at the origin".into()));
        }
        let p = *points.choose(&mut rng).expect("non-empty");
        let Some(end) = extend_to_box(p, 1.0) else {
            continue;
        };
        let scan = count_breakpoints_on_segment(params, &[0.0, 0.0], &end.to_array(), side_eps)?;
        lengths.push(scan.length());
        counts.push(scan.count);
    }
    let mean_count = if counts.is_empty() {
        0.0
    } else {
        counts.iter().sum::<usize>() as f64 / counts.len() as f64
    };
    let p = params.neuron_count().max(1) as f64;
    Ok(TrainingLineSummary {
        counts,
        lengths,
        mean_count,
        ratio: mean_count / p,
    })
}

/// Class assignment inside one region.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionCell {
    /// Argmax class at the cell's interior point (lowest index on ties).
    pub winner: usize,
    /// Convex pieces of the cell where each class is the argmax.
    pub class_pieces: Vec<(usize, ConvexPolygon)>,
    /// Decision-boundary segments strictly inside the cell.
    pub boundary: Vec<(Point2, Point2)>,
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub fn decision_cells(arrangement: &RegionArrangement, tol: &GeomTolerance) -> Result<Vec<DecisionCell>> {
    arrangement
        .regions
        .par_iter()
        .map(|region| decision_cell(region, tol))
        .collect()
}

fn decision_cell(region: &LinearRegion, tol: &GeomTolerance) -> Result<DecisionCell> {
    let x = region.interior_point()?;
    let winner = argmax(&region.logits_at(x));
    let f = &region.logit_affines;
    let mut class_pieces = Vec::new();
    let mut boundary = Vec::new();
    for k in 0..f.len() {
        // k wins where f_k > f_j for j < k and f_k >= f_j for j > k.
        let mut piece = Some(region.cell.clone());
        for j in 0..f.len() {
            let Some(poly) = piece.as_ref() else { break };
            if j == k {
                continue;
            }
            piece = if j < k {
                split_unchecked(poly, &f[k].sub(&f[j]), tol).0
            } else {
                split_unchecked(poly, &f[j].sub(&f[k]), tol).1
            };
        }
        let Some(poly) = piece else { continue };
        let verts = poly.vertices();
        let n = verts.len();
        for i in 0..n {
            let (p, q) = (verts[i], verts[(i + 1) % n]);
            let mid = p.lerp(q, 0.5);
            if region.cell.min_edge_distance(mid) <= tol.merge_eps {
                continue;
            }
            // Emit each boundary once, from the lower class index.
            let on_line = (k + 1..f.len()).any(|j| {
                let d = f[k].sub(&f[j]);
                let scale = 1e-9 * (1.0 + d.gradient_norm() + d.offset.abs());
                d.eval(&p.to_array()).abs() <= scale && d.eval(&q.to_array()).abs() <= scale
            });
            if on_line {
                boundary.push((p, q));
            }
        }
        class_pieces.push((k, poly));
    }
    Ok(DecisionCell {
        winner,
        class_pieces,
        boundary,
    })
}

/// `true` iff the region count is at most `2^neurons`.
pub fn upper_bound_check(region_count: usize, neurons: usize) -> bool {
    if neurons >= usize::BITS as usize {
        return true;
    }
    region_count <= 1usize << neurons
}
