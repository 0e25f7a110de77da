//! Command-line front end. Exit codes: 0 success, 1 usage error, 2 runtime
//! failure.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::{
    empirical_density, gradient_norm_report, min_neurons, DensityReport, EstimatorInputs, GradientReport,
};
use crate::geometry::{ConvexPolygon, GeomTolerance};
use crate::nn::{InitKind, InitScheme, NetSpec};
use crate::persist::{write_atomic, Checkpoint, RegionDump};
use crate::regions::{count_breakpoints_on_segment, decision_cells, enumerate_regions, upper_bound_check, EnumerationConfig};
use crate::report::{
    enumeration_config_from_env, reproduce_table, run_experiment, ExperimentManifest, Scale, TableOptions,
};
use crate::svg::{default_gap_threshold, render_decision_svg, render_regions_svg};

#[derive(Debug, Parser)]
#[command(name = "relu-regions", version, about = "Linear regions of small 2D ReLU networks")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalOpts {
    /// Base seed for commands that draw randomness.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, default_value = "runs")]
    out_dir: PathBuf,
    /// Relative on-line deadband for polygon cuts.
    #[arg(long, global = true, default_value_t = 1e-10)]
    tol_side: f64,
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol_merge: f64,
    #[arg(long, global = true, default_value_t = 1e-12)]
    tol_area: f64,
}

impl GlobalOpts {
    fn tolerance(&self) -> GeomTolerance {
        GeomTolerance {
            side_eps: self.tol_side,
            merge_eps: self.tol_merge,
            min_area: self.tol_area,
        }
    }

    fn enumeration(&self) -> Result<EnumerationConfig> {
        enumeration_config_from_env(EnumerationConfig::with_tol(self.tolerance()))
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InitArg {
    HeNormal,
    UniformFanin,
}

impl From<InitArg> for InitKind {
    fn from(a: InitArg) -> Self {
        match a {
            InitArg::HeNormal => InitKind::HeNormal,
            InitArg::UniformFanin => InitKind::UniformFanin,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScaleArg {
    Desk,
    Full,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a manifest file.
    Train { manifest: PathBuf },
    /// Enumerate a checkpoint's regions; writes a JSON dump and SVG figures.
    Regions {
        checkpoint: PathBuf,
        /// Decision band width; defaults to 2% of the peak |logit|.
        #[arg(long)]
        gap: Option<f64>,
        /// Dataset CSV (x,y,label) to overplot on the decision map.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Breakpoints of a checkpoint along a segment, as JSON.
    Scan {
        checkpoint: PathBuf,
        /// Comma-separated start point.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        from: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        to: Vec<f64>,
    },
    /// Minimum neurons for a target region count along a curve.
    Estimate {
        #[arg(long = "Q")]
        expected_regions: f64,
        #[arg(long)]
        length: f64,
        #[arg(long, default_value_t = 1)]
        c: u32,
        #[arg(long = "I", default_value_t = 0.0)]
        extra: f64,
        #[arg(long = "K")]
        gradient_bound: Option<f64>,
    },
    /// Breakpoint density and gradient-norm statistics at initialization.
    Density {
        #[arg(long, value_delimiter = ',', default_value = "32,32,32")]
        hidden: Vec<usize>,
        #[arg(long, value_enum, default_value = "he-normal")]
        init: InitArg,
        #[arg(long, default_value_t = 20)]
        seeds: usize,
        #[arg(long, default_value_t = 20)]
        chords: usize,
        #[arg(long, default_value_t = 1.0)]
        length: f64,
        /// Inputs per seed for the gradient statistic; 0 skips it.
        #[arg(long, default_value_t = 1000)]
        gradient_samples: usize,
    },
    /// Re-run one of the region-count tables.
    Reproduce {
        #[arg(long)]
        table: u8,
        #[arg(long, value_enum, default_value = "desk")]
        scale: ScaleArg,
        #[arg(long, default_value_t = 3)]
        seeds: usize,
        #[arg(long, value_enum, default_value = "uniform-fanin")]
        init: InitArg,
    },
}

#[derive(Serialize)]
struct DensityOutput {
    hidden: Vec<usize>,
    density: DensityReport,
    gradient: Option<GradientReport>,
}

#[derive(Serialize)]
struct RegionsSummary {
    regions: usize,
    per_layer_counts: Vec<usize>,
    within_upper_bound: bool,
    dump: PathBuf,
    region_svg: PathBuf,
    decision_svg: PathBuf,
}

/// Parse `argv` (program name first) and run. Normal output goes to `out`,
/// diagnostics to `err`.
pub fn cli_dispatch<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    1
                }
            };
        }
    };
    match run(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            2
        }
    }
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "checkpoint".into())
}

fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let g = &cli.global;
    let emit = |out: &mut dyn Write, text: &str| -> Result<()> {
        writeln!(out, "{text}").map_err(|e| Error::io("<stdout>", e))
    };
    match cli.command {
        Command::Train { manifest } => {
            let m = ExperimentManifest::load(&manifest)?;
            let outcome = run_experiment(&m, Some(&g.out_dir), &g.enumeration()?)?;
            emit(out, &outcome.counts_csv(&m.id))?;
            if let Some(dir) = outcome.run_dir {
                emit(out, &format!("artifacts: {}", dir.display()))?;
            }
        }
        Command::Regions { checkpoint, gap, data } => {
            let params = Checkpoint::load(&checkpoint)?.to_params()?;
            let cfg = g.enumeration()?;
            let arrangement = enumerate_regions(&params, &ConvexPolygon::unit_box(), &cfg)?;
            let cells = decision_cells(&arrangement, &cfg.tol)?;
            let dataset = data.as_deref().map(crate::datasets::Dataset2D::read_csv).transpose()?;
            let stem = file_stem(&checkpoint);
            let dump = g.out_dir.join(format!("{stem}_regions.json"));
            let region_svg = g.out_dir.join(format!("{stem}_regions.svg"));
            let decision_svg = g.out_dir.join(format!("{stem}_decision.svg"));
            RegionDump::new(&arrangement, &cells).save(&dump)?;
            write_atomic(&region_svg, render_regions_svg(&arrangement).as_bytes())?;
            let gap = gap.unwrap_or_else(|| default_gap_threshold(&arrangement));
            write_atomic(
                &decision_svg,
                render_decision_svg(&arrangement, &cells, dataset.as_ref(), gap, &cfg.tol).as_bytes(),
            )?;
            let summary = RegionsSummary {
                regions: arrangement.len(),
                per_layer_counts: arrangement.per_layer_counts.clone(),
                within_upper_bound: upper_bound_check(arrangement.len(), params.neuron_count()),
                dump,
                region_svg,
                decision_svg,
            };
            emit(out, &serde_json::to_string_pretty(&summary)?)?;
        }
        Command::Scan { checkpoint, from, to } => {
            let params = Checkpoint::load(&checkpoint)?.to_params()?;
            let scan = count_breakpoints_on_segment(&params, &from, &to, g.tol_side)?;
            emit(out, &serde_json::to_string_pretty(&scan)?)?;
        }
        Command::Estimate {
            expected_regions,
            length,
            c,
            extra,
            gradient_bound,
        } => {
            let inputs = EstimatorInputs {
                expected_regions,
                curve_length: length,
                breakpoints_per_neuron: c,
                extra_regions: extra,
                gradient_bound,
            };
            emit(out, &min_neurons(&inputs)?.to_string())?;
        }
        Command::Density {
            hidden,
            init,
            seeds,
            chords,
            length,
            gradient_samples,
        } => {
            let spec = NetSpec::planar(&hidden, 2);
            let scheme = InitScheme {
                kind: init.into(),
                seed: g.seed,
            };
            let density = empirical_density(&spec, scheme, seeds, chords, length, g.tol_side)?;
            let gradient = (gradient_samples > 0)
                .then(|| gradient_norm_report(&spec, scheme, seeds, gradient_samples))
                .transpose()?;
            let report = DensityOutput {
                hidden,
                density,
                gradient,
            };
            let text = serde_json::to_string_pretty(&report)?;
            write_atomic(&g.out_dir.join("density.json"), text.as_bytes())?;
            emit(out, &text)?;
        }
        Command::Reproduce {
            table,
            scale,
            seeds,
            init,
        } => {
            let opts = TableOptions {
                scale: match scale {
                    ScaleArg::Desk => Scale::Desk,
                    ScaleArg::Full => Scale::Full,
                },
                seeds,
                base_seed: g.seed,
                init: init.into(),
            };
            let counts = reproduce_table(table, &opts, Some(&g.out_dir), &g.enumeration()?)?;
            emit(out, &counts.to_csv())?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("relu-regions").chain(args.iter().copied());
        let code = cli_dispatch(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn estimate_prints_neuron_count() {
        let (code, out, _) = run_args(&["estimate", "--Q", "100", "--length", "2", "--c", "1"]);
        assert_eq!(code, 0);
        assert_eq!(out.trim(), "50");
        let (_, out, _) = run_args(&["estimate", "--Q", "100", "--length", "2", "--I", "20"]);
        assert_eq!(out.trim(), "40");
    }

    #[test]
    fn usage_errors_exit_one() {
        let (code, _, err) = run_args(&["frobnicate"]);
        assert_eq!(code, 1);
        assert!(err.contains("Usage"));
        assert_eq!(run_args(&[]).0, 1);
        assert_eq!(run_args(&["estimate", "--length", "2"]).0, 1);
    }

    #[test]
    fn runtime_errors_exit_two() {
        let (code, _, err) = run_args(&["estimate", "--Q", "10", "--length", "2", "--I", "10"]);
        assert_eq!(code, 2);
        assert!(err.contains("error"));
        let (code, _, _) = run_args(&["regions", "/nonexistent/checkpoint.json"]);
        assert_eq!(code, 2);
    }

    #[test]
    fn help_exits_zero() {
        let (code, out, _) = run_args(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("reproduce"));
    }
}
