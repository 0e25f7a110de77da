//! Seeded 2D toy datasets: uniform random labels, interleaving moons and
//! Gaussian quantile shells. Moons and quantiles are rescaled so their
//! bounding box maps onto `[-0.95, 0.95]²`.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2;

/// Half-width of the box generated data is rescaled into.
pub const RESCALE_EXTENT: f64 = 0.95;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset2D {
    pub points: Vec<Point2>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl Dataset2D {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points as input vectors for the trainer.
    pub fn inputs(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|p| vec![p.x, p.y]).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.len() != self.labels.len() {
            return Err(Error::InvalidDataset("points and labels differ in length".into()));
        }
        if self.points.iter().any(|p| !(p.x.abs() <= 1.0 && p.y.abs() <= 1.0)) {
            return Err(Error::InvalidDataset("coordinate outside [-1, 1]".into()));
        }
        if let Some(y) = self.labels.iter().find(|&&y| y >= self.n_classes) {
            return Err(Error::InvalidLabel {
                label: *y,
                classes: self.n_classes,
            });
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,label\n");
        for (p, y) in self.points.iter().zip(&self.labels) {
            writeln!(out, "{},{},{}", p.x, p.y, y).unwrap();
        }
        out
    }

    /// Parse `x,y,label` rows. `n_classes` is one more than the largest label.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (i == 0 && line.starts_with('x')) {
                continue;
            }
            let err = |msg: &str| Error::Csv {
                line: i + 1,
                msg: msg.to_string(),
            };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(err("expected 3 fields"));
            }
            let x: f64 = fields[0].parse().map_err(|_| err("bad x"))?;
            let y: f64 = fields[1].parse().map_err(|_| err("bad y"))?;
            let label: usize = fields[2].parse().map_err(|_| err("bad label"))?;
            points.push(Point2::new(x, y));
            labels.push(label);
        }
        let n_classes = labels.iter().max().map_or(0, |m| m + 1);
        let ds = Dataset2D {
            points,
            labels,
            n_classes,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }
}

/// Uniform points on `[-1, 1]²` with uniform binary labels.
pub fn gen_random(n: usize, seed: u64) -> Result<Dataset2D> {
    if n == 0 {
        return Err(Error::InvalidDataset("need at least one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        points.push(Point2::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)));
        labels.push(rng.random_range(0..2));
    }
    Ok(Dataset2D {
        points,
        labels,
        n_classes: 2,
    })
}

/// Two interleaving half circles: the upper arc is class 0, the lower
/// shifted arc class 1. Arc positions are evenly spaced in angle before
/// Gaussian noise with standard deviation `noise` is added.
pub fn gen_moons(n: usize, noise: f64, seed: u64) -> Result<Dataset2D> {
    if n < 2 {
        return Err(Error::InvalidDataset("moons need at least two samples".into()));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::InvalidDataset("noise must be finite and non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_upper = n / 2;
    let n_lower = n - n_upper;
    let angles = |k: usize| -> Vec<f64> {
        if k == 1 {
            return vec![0.0];
        }
        (0..k).map(|i| std::f64::consts::PI * i as f64 / (k - 1) as f64).collect()
    };
    let mut samples: Vec<([f64; 2], usize)> = Vec::with_capacity(n);
    for a in angles(n_upper) {
        samples.push(([a.cos(), a.sin()], 0));
    }
    for a in angles(n_lower) {
        samples.push(([1.0 - a.cos(), 0.5 - a.sin()], 1));
    }
    if noise > 0.0 {
        let normal = Normal::new(0.0, noise).expect("valid std");
        for (p, _) in &mut samples {
            p[0] += normal.sample(&mut rng);
            p[1] += normal.sample(&mut rng);
        }
    }
    samples.shuffle(&mut rng);
    Ok(rescaled(samples, 2))
}

/// Isotropic standard Gaussian samples labelled by equal-count radial
/// shells, innermost shell class 0. The first `n % n_classes` classes get
/// one extra sample.
pub fn gen_gaussian_quantiles(n: usize, n_classes: usize, seed: u64) -> Result<Dataset2D> {
    if n_classes < 1 {
        return Err(Error::InvalidDataset("need at least one class".into()));
    }
    if n < n_classes {
        return Err(Error::InvalidDataset(format!(
            "{n} samples cannot fill {n_classes} classes"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts: Vec<[f64; 2]> = (0..n)
        .map(|_| [StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)])
        .collect();
    pts.sort_by(|a, b| (a[0] * a[0] + a[1] * a[1]).total_cmp(&(b[0] * b[0] + b[1] * b[1])));
    let base = n / n_classes;
    let extra = n % n_classes;
    let mut samples = Vec::with_capacity(n);
    let mut it = pts.into_iter();
    for class in 0..n_classes {
        let size = base + usize::from(class < extra);
        samples.extend(it.by_ref().take(size).map(|p| (p, class)));
    }
    samples.shuffle(&mut rng);
    Ok(rescaled(samples, n_classes))
}

/// Per-axis affine map of the bounding box onto `[-RESCALE_EXTENT, RESCALE_EXTENT]`.
fn rescaled(samples: Vec<([f64; 2], usize)>, n_classes: usize) -> Dataset2D {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for (p, _) in &samples {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let map = |v: f64, k: usize| {
        let half = 0.5 * (hi[k] - lo[k]);
        if half > 0.0 {
            (v - 0.5 * (hi[k] + lo[k])) / half * RESCALE_EXTENT
        } else {
            0.0
        }
    };
    let (points, labels) = samples
        .into_iter()
        .map(|(p, y)| (Point2::new(map(p[0], 0), map(p[1], 1)), y))
        .unzip();
    Dataset2D {
        points,
        labels,
        n_classes,
    }
}

/// Which generator a manifest asks for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    pub n: usize,
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default = "default_classes")]
    pub classes: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_noise() -> f64 {
    0.1
}

fn default_classes() -> usize {
    2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Random,
    Moons,
    GaussianQuantiles,
}

impl DatasetSpec {
    pub fn generate(&self) -> Result<Dataset2D> {
        match self.kind {
            DatasetKind::Random => {
                if self.classes != 2 {
                    return Err(Error::InvalidDataset("random labels are binary".into()));
                }
                gen_random(self.n, self.seed)
            }
            DatasetKind::Moons => {
                if self.classes != 2 {
                    return Err(Error::InvalidDataset("moons have two classes".into()));
                }
                gen_moons(self.n, self.noise, self.seed)
            }
            DatasetKind::GaussianQuantiles => gen_gaussian_quantiles(self.n, self.classes, self.seed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_dataset_basics() {
        let d = gen_random(200, 3).unwrap();
        assert_eq!(d.len(), 200);
        assert_eq!(d.n_classes, 2);
        d.validate().unwrap();
        assert_eq!(gen_random(1, 5).unwrap(), gen_random(1, 5).unwrap());
        assert!(gen_random(0, 5).is_err());
    }

    #[test]
    fn random_labels_are_balanced() {
        let d = gen_random(10_000, 11).unwrap();
        for c in d.class_counts() {
            let f = c as f64 / 10_000.0;
            assert!((0.45..=0.55).contains(&f), "{f}");
        }
    }

    #[test]
    fn moons_basics() {
        let d = gen_moons(1000, 0.1, 0).unwrap();
        d.validate().unwrap();
        assert_eq!(d.class_counts(), vec![500, 500]);
        assert_eq!(d, gen_moons(1000, 0.1, 0).unwrap());
        assert_eq!(gen_moons(7, 0.1, 0).unwrap().class_counts(), vec![3, 4]);
        let extent = d
            .points
            .iter()
            .map(|p| p.x.abs().max(p.y.abs()))
            .fold(0.0, f64::max);
        assert!((extent - RESCALE_EXTENT).abs() < 1e-12);
    }

    #[test]
    fn noiseless_moons_lie_on_arcs() {
        // Raw bounding box is x ∈ [-1, 2], y ∈ [-0.5, 1]; odd arc sizes put
        // a sample exactly at the apex of each arc.
        let d = gen_moons(102, 0.0, 4).unwrap();
        for (p, &y) in d.points.iter().zip(&d.labels) {
            let x = p.x / RESCALE_EXTENT * 1.5 + 0.5;
            let v = p.y / RESCALE_EXTENT * 0.75 + 0.25;
            let r = if y == 0 {
                x.hypot(v)
            } else {
                (x - 1.0).hypot(v - 0.5)
            };
            assert!((r - 1.0).abs() < 1e-12, "{r} {y}");
            if y == 0 {
                assert!(v >= -1e-12);
            } else {
                assert!(v <= 0.5 + 1e-12);
            }
        }
    }

    #[test]
    fn quantile_shells() {
        let d = gen_gaussian_quantiles(1000, 5, 2).unwrap();
        d.validate().unwrap();
        assert_eq!(d.class_counts(), vec![200; 5]);
        let counts = gen_gaussian_quantiles(1003, 5, 2).unwrap().class_counts();
        assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);

        // The per-axis rescale is nearly isotropic for a Gaussian cloud, so
        // radii about the box centre still order the shells.
        let mean_r = |k: usize| {
            let rs: Vec<f64> = d
                .points
                .iter()
                .zip(&d.labels)
                .filter(|(_, &y)| y == k)
                .map(|(p, _)| p.norm())
                .collect();
            rs.iter().sum::<f64>() / rs.len() as f64
        };
        assert!(mean_r(0) < mean_r(4));
        let single = gen_gaussian_quantiles(10, 1, 0).unwrap();
        assert!(single.labels.iter().all(|&y| y == 0));
        assert!(gen_gaussian_quantiles(10, 0, 0).is_err());
        assert!(gen_gaussian_quantiles(3, 5, 0).is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let d = gen_moons(20, 0.1, 8).unwrap();
        let back = Dataset2D::from_csv(&d.to_csv()).unwrap();
        assert_eq!(back, d);
        assert!(Dataset2D::from_csv("x,y,label\n0.1,0.2\n").is_err());
        assert!(Dataset2D::from_csv("x,y,label\n3.0,0.2,0\n").is_err());
    }

    #[test]
    fn spec_dispatch() {
        let s = DatasetSpec {
            kind: DatasetKind::GaussianQuantiles,
            n: 50,
            noise: 0.0,
            classes: 5,
            seed: 1,
        };
        assert_eq!(s.generate().unwrap().n_classes, 5);
        let bad = DatasetSpec {
            kind: DatasetKind::Moons,
            classes: 3,
            ..s
        };
        assert!(bad.generate().is_err());
    }
}
