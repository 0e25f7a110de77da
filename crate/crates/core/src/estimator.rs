//! Minimum-neuron estimates from a target number of linear regions along a
//! 1D curve, plus Monte-Carlo checks of the breakpoint density and
//! gradient-norm laws at He initialization.
//!
//! Along a curve of length `|s|`, a randomly initialized ReLU network with
//! `j` neurons is expected to have about `|s|·j·c` breakpoints (`c = 1` for
//! ReLU). Inverting gives the neuron count needed for `Q` regions, less
//! any `I` regions attributed to random weights and biases.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{init_network, InitScheme, NetSpec, NetworkParams};
use crate::regions::count_breakpoints_on_segment;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorInputs {
    /// Target expected number of regions along the curve.
    pub expected_regions: f64,
    pub curve_length: f64,
    /// Breakpoints contributed per neuron; 1 for ReLU.
    pub breakpoints_per_neuron: u32,
    /// Regions attributed to random weights and biases.
    pub extra_regions: f64,
    /// Bound on the mean pre-activation gradient norm. Carried as metadata;
    /// it does not enter the estimate.
    pub gradient_bound: Option<f64>,
}

impl EstimatorInputs {
    pub fn new(expected_regions: f64, curve_length: f64) -> Self {
        EstimatorInputs {
            expected_regions,
            curve_length,
            breakpoints_per_neuron: 1,
            extra_regions: 0.0,
            gradient_bound: None,
        }
    }

    pub fn with_extra(self, extra_regions: f64) -> Self {
        EstimatorInputs {
            extra_regions,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidEstimatorInputs(m.to_string()));
        if !(self.curve_length > 0.0 && self.curve_length.is_finite()) {
            return bad("curve length must be positive");
        }
        if self.breakpoints_per_neuron < 1 {
            return bad("breakpoints per neuron must be at least 1");
        }
        if !(self.extra_regions >= 0.0) {
            return bad("extra regions must be non-negative");
        }
        if !(self.expected_regions > self.extra_regions && self.expected_regions.is_finite()) {
            return bad("expected regions must exceed extra regions");
        }
        if self.gradient_bound.is_some_and(|k| !(k > 0.0)) {
            return bad("gradient bound must be positive");
        }
        Ok(())
    }

    /// `(Q - I) / (|s| c)`, the real-valued neuron requirement.
    pub fn neuron_requirement(&self) -> f64 {
        (self.expected_regions - self.extra_regions)
            / (self.curve_length * f64::from(self.breakpoints_per_neuron))
    }
}

/// Smallest integer neuron count meeting the requirement.
pub fn min_neurons(inputs: &EstimatorInputs) -> Result<u64> {
    inputs.validate()?;
    Ok((inputs.neuron_requirement().ceil() as u64).max(1))
}

/// Whether `q` neurons suffice.
pub fn neuron_set_predicate(inputs: &EstimatorInputs, q: u64) -> Result<bool> {
    inputs.validate()?;
    Ok(q as f64 >= inputs.neuron_requirement())
}

/// Informational estimate of `I`: measured regions minus `|s|·j·c`.
pub fn extra_regions_estimate(measured_regions: f64, curve_length: f64, neurons: usize, c: u32) -> f64 {
    measured_regions - curve_length * neurons as f64 * f64::from(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub neuron_count: usize,
    pub chord_length: f64,
    /// Mean over seeds of breakpoints per unit length divided by neurons.
    pub ratio_mean: f64,
    pub ratio_std: f64,
    pub density_mean: f64,
    /// Breakpoint count of every chord, grouped by seed.
    pub per_seed_counts: Vec<Vec<usize>>,
}

/// Random chord of length `length` inside `[-1, 1]²`: centre uniform on the
/// box shrunk by `length / 2`, direction uniform.
pub fn random_chord<R: Rng>(rng: &mut R, length: f64) -> ([f64; 2], [f64; 2]) {
    let half = 0.5 * length;
    let reach = (1.0 - half).max(0.0);
    let (cx, cy) = if reach > 0.0 {
        (rng.random_range(-reach..=reach), rng.random_range(-reach..=reach))
    } else {
        (0.0, 0.0)
    };
    let theta = rng.random_range(0.0..std::f64::consts::TAU);
    let (dx, dy) = (half * theta.cos(), half * theta.sin());
    ([cx - dx, cy - dy], [cx + dx, cy + dy])
}

/// Monte-Carlo breakpoint density over `n_seeds` networks from
/// `params_for_seed`, each scanned along `n_chords` random chords.
pub fn empirical_density_with<F>(
    params_for_seed: F,
    seeds: &[u64],
    n_chords: usize,
    chord_length: f64,
    side_eps: f64,
) -> Result<DensityReport>
where
    F: Fn(u64) -> Result<NetworkParams> + Sync,
{
    if !(chord_length > 0.0) || n_chords == 0 || seeds.is_empty() {
        return Err(Error::InvalidEstimatorInputs(
            "need positive chord length, chords and seeds".into(),
        ));
    }
    let per_seed: Vec<(usize, Vec<usize>)> = seeds
        .par_iter()
        .map(|&seed| {
            let params = params_for_seed(seed)?;
            // Chords come from their own stream so they do not depend on
            // how the network was drawn.
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_c0de_d15c_0001);
            let counts = (0..n_chords)
                .map(|_| {
                    let (a, b) = random_chord(&mut rng, chord_length);
                    count_breakpoints_on_segment(&params, &a, &b, side_eps).map(|s| s.breakpoints.len())
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((params.neuron_count(), counts))
        })
        .collect::<Result<_>>()?;

    let neuron_count = per_seed[0].0;
    let densities: Vec<f64> = per_seed
        .iter()
        .map(|(_, c)| c.iter().sum::<usize>() as f64 / c.len() as f64 / chord_length)
        .collect();
    let ratios: Vec<f64> = densities
        .iter()
        .map(|d| d / neuron_count.max(1) as f64)
        .collect();
    let (ratio_mean, ratio_std) = mean_std(&ratios);
    Ok(DensityReport {
        neuron_count,
        chord_length,
        ratio_mean,
        ratio_std,
        density_mean: mean_std(&densities).0,
        per_seed_counts: per_seed.into_iter().map(|(_, c)| c).collect(),
    })
}

/// [`empirical_density_with`] over fresh initializations with seeds
/// `base_seed, base_seed + 1, …`.
pub fn empirical_density(
    spec: &NetSpec,
    scheme: InitScheme,
    n_seeds: usize,
    n_chords: usize,
    chord_length: f64,
    side_eps: f64,
) -> Result<DensityReport> {
    let seeds: Vec<u64> = (0..n_seeds as u64).map(|s| scheme.seed.wrapping_add(s)).collect();
    empirical_density_with(
        |seed| init_network(spec, InitScheme { seed, ..scheme }),
        &seeds,
        n_chords,
        chord_length,
        side_eps,
    )
}

/// Mean of `‖∇o(x)‖²` over all hidden neurons of `params` and `n_samples`
/// inputs uniform on `[-1, 1]^d`.
pub fn gradient_norm_statistic(params: &NetworkParams, n_samples: usize, seed: u64) -> Result<f64> {
    let neurons = params.neuron_count();
    if neurons == 0 || n_samples == 0 {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for _ in 0..n_samples {
        let x: Vec<f64> = (0..params.spec.input_dim)
            .map(|_| rng.random_range(-1.0..=1.0))
            .collect();
        let pattern = params.activation_pattern(&x)?;
        let prop = params.propagate_affine(&pattern)?;
        total += prop
            .neurons
            .iter()
            .flatten()
            .map(|f| f.coeffs.iter().map(|a| a * a).sum::<f64>())
            .sum::<f64>();
    }
    Ok(total / (n_samples * neurons) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientReport {
    pub mean: f64,
    pub std: f64,
    pub per_seed: Vec<f64>,
}

/// [`gradient_norm_statistic`] over `n_seeds` fresh initializations.
pub fn gradient_norm_report(
    spec: &NetSpec,
    scheme: InitScheme,
    n_seeds: usize,
    n_samples: usize,
) -> Result<GradientReport> {
    let per_seed = (0..n_seeds as u64)
        .into_par_iter()
        .map(|s| {
            let seed = scheme.seed.wrapping_add(s);
            let params = init_network(spec, InitScheme { seed, ..scheme })?;
            gradient_norm_statistic(&params, n_samples, seed)
        })
        .collect::<Result<Vec<_>>>()?;
    let (mean, std) = mean_std(&per_seed);
    Ok(GradientReport { mean, std, per_seed })
}

pub(crate) fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Layer;
    use proptest::prelude::*;

    #[test]
    fn min_neuron_examples() {
        assert_eq!(min_neurons(&EstimatorInputs::new(100.0, 2.0)).unwrap(), 50);
        assert_eq!(min_neurons(&EstimatorInputs::new(100.0, 2.0).with_extra(20.0)).unwrap(), 40);
        assert_eq!(min_neurons(&EstimatorInputs::new(7.0, 2.0)).unwrap(), 4);
    }

    #[test]
    fn min_neurons_rejects_bad_inputs() {
        assert!(min_neurons(&EstimatorInputs::new(10.0, 2.0).with_extra(10.0)).is_err());
        assert!(min_neurons(&EstimatorInputs::new(10.0, 0.0)).is_err());
        let mut i = EstimatorInputs::new(10.0, 1.0);
        i.breakpoints_per_neuron = 0;
        assert!(min_neurons(&i).is_err());
    }

    #[test]
    fn predicate_examples() {
        let i = EstimatorInputs::new(100.0, 2.0);
        assert!(neuron_set_predicate(&i, 50).unwrap());
        assert!(!neuron_set_predicate(&i, 49).unwrap());
        assert!(neuron_set_predicate(&i, 1_000_000).unwrap());
    }

    #[test]
    fn extra_estimate() {
        assert_eq!(extra_regions_estimate(120.0, 2.0, 50, 1), 20.0);
    }

    #[test]
    fn linear_neuron_gradient_is_two() {
        let spec = NetSpec::planar(&[1], 2);
        let p = NetworkParams::from_layers(
            spec,
            vec![
                Layer {
                    rows: 1,
                    cols: 2,
                    weights: vec![1.0, 1.0],
                    bias: vec![0.0],
                },
                Layer::zeros(2, 1),
            ],
        )
        .unwrap();
        assert_eq!(gradient_norm_statistic(&p, 100, 0).unwrap(), 2.0);
        let zero = NetworkParams::zeros(&NetSpec::planar(&[4, 4], 2));
        assert_eq!(gradient_norm_statistic(&zero, 100, 0).unwrap(), 0.0);
    }

    #[test]
    fn zero_net_has_zero_density() {
        let spec = NetSpec::planar(&[8, 8], 2);
        let r = empirical_density_with(|_| Ok(NetworkParams::zeros(&spec)), &[0, 1, 2], 5, 1.0, 1e-10).unwrap();
        assert_eq!(r.ratio_mean, 0.0);
        assert_eq!(r.density_mean, 0.0);
        assert_eq!(r.per_seed_counts.len(), 3);
    }

    #[test]
    fn chords_stay_in_box() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let (a, b) = random_chord(&mut rng, 1.0);
            assert!(a.iter().chain(&b).all(|v| v.abs() <= 1.0 + 1e-12));
            assert!(((b[0] - a[0]).hypot(b[1] - a[1]) - 1.0).abs() < 1e-12);
        }
    }

    fn arb_inputs() -> impl Strategy<Value = EstimatorInputs> {
        (0.0f64..500.0, 0.01f64..10.0, 1u32..4, 0.0f64..1.0).prop_map(|(excess, len, c, frac)| {
            let extra = frac * 200.0;
            EstimatorInputs {
                expected_regions: extra + excess + 1e-3,
                curve_length: len,
                breakpoints_per_neuron: c,
                extra_regions: extra,
                gradient_bound: None,
            }
        })
    }

    proptest! {
        #[test]
        fn min_neurons_is_tight(i in arb_inputs()) {
            let q = min_neurons(&i).unwrap();
            prop_assert!(neuron_set_predicate(&i, q).unwrap());
            if i.neuron_requirement() > (q - 1) as f64 && q > 1 {
                prop_assert!(!neuron_set_predicate(&i, q - 1).unwrap());
            }
        }
    }
}
