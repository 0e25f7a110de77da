//! Experiment manifests, training runs with scheduled region counting,
//! and the region-count tables over epochs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datasets::{Dataset2D, DatasetKind, DatasetSpec};
use crate::error::{Error, Result};
use crate::geometry::ConvexPolygon;
use crate::nn::{init_network, InitKind, InitScheme, NetSpec, NetworkParams};
use crate::persist::{fnv1a, write_atomic, Checkpoint, RegionDump};
use crate::regions::{decision_cells, enumerate_regions, scan_training_lines, EnumerationConfig};
use crate::svg::{default_gap_threshold, render_decision_svg, render_regions_svg};
use crate::trainer::{train_run, RecordExtras, TrainConfig, TrainLog};

/// Environment variable overriding the enumeration cap.
pub const REGION_CAP_ENV: &str = "REGION_CAP";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineScanOptions {
    pub n_lines: usize,
    #[serde(default)]
    pub seed: u64,
}

/// Which artifacts a run writes at each recorded epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSelection {
    pub region_svg: bool,
    pub decision_svg: bool,
    pub counts_csv: bool,
    pub region_json: bool,
    pub checkpoint: bool,
    pub line_scan: Option<LineScanOptions>,
}

impl Default for OutputSelection {
    fn default() -> Self {
        OutputSelection {
            region_svg: false,
            decision_svg: false,
            counts_csv: true,
            region_json: false,
            checkpoint: true,
            line_scan: None,
        }
    }
}

impl OutputSelection {
    /// Only in-memory statistics; nothing written.
    pub fn none() -> Self {
        OutputSelection {
            counts_csv: false,
            checkpoint: false,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub id: String,
    pub architecture: NetSpec,
    pub init: InitScheme,
    pub dataset: DatasetSpec,
    pub train: TrainConfig,
    #[serde(default)]
    pub outputs: OutputSelection,
}

impl ExperimentManifest {
    pub fn validate(&self) -> Result<()> {
        self.architecture.validate()?;
        if self.architecture.input_dim != 2 {
            return Err(Error::InvalidManifest("experiments use 2D inputs".into()));
        }
        if self.dataset.classes != self.architecture.output_dim {
            return Err(Error::InvalidManifest(format!(
                "dataset has {} classes, network has {} outputs",
                self.dataset.classes, self.architecture.output_dim
            )));
        }
        self.train.validate()
    }

    /// 16 hex digits of FNV-1a over the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("manifest serializes");
        format!("{:016x}", fnv1a(json.as_bytes()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Self = serde_json::from_str(&text)?;
        m.validate()?;
        Ok(m)
    }
}

/// Enumeration settings with the cap taken from `REGION_CAP` when set.
pub fn enumeration_config_from_env(mut base: EnumerationConfig) -> Result<EnumerationConfig> {
    if let Ok(v) = std::env::var(REGION_CAP_ENV) {
        base.cap = v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidManifest(format!("{REGION_CAP_ENV}={v} is not an integer")))?;
    }
    Ok(base)
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub log: TrainLog,
    pub params: NetworkParams,
    pub dataset: Dataset2D,
    /// Directory the artifacts went to, if any were written.
    pub run_dir: Option<PathBuf>,
    /// Per recorded epoch, the arrangement's per-layer counts.
    pub per_layer_counts: Vec<(usize, Vec<usize>)>,
}

impl ExperimentOutcome {
    pub fn region_count(&self, epoch: usize) -> Option<usize> {
        self.log.get(epoch).and_then(|r| r.region_count)
    }

    /// `experiment,epoch,regions,accuracy,loss`
    pub fn counts_csv(&self, experiment: &str) -> String {
        let mut out = String::from("experiment,epoch,regions,accuracy,loss\n");
        for r in &self.log.records {
            let regions = r.region_count.map(|c| c.to_string()).unwrap_or_default();
            writeln!(out, "{experiment},{},{regions},{},{}", r.epoch, r.accuracy, r.loss).unwrap();
        }
        out
    }
}

/// Train per `manifest`, enumerating regions over `[-1, 1]²` at every
/// recorded epoch. With `out_root`, artifacts go to
/// `out_root/<manifest hash>/`.
pub fn run_experiment(
    manifest: &ExperimentManifest,
    out_root: Option<&Path>,
    config: &EnumerationConfig,
) -> Result<ExperimentOutcome> {
    manifest.validate()?;
    let dataset = manifest.dataset.generate()?;
    let params = init_network(&manifest.architecture, manifest.init)?;
    let run_dir = out_root.map(|r| r.join(manifest.hash()));
    let domain = ConvexPolygon::unit_box();
    let outputs = &manifest.outputs;
    let mut per_layer_counts = Vec::new();

    let recorder = |epoch: usize, params: &NetworkParams| -> Result<RecordExtras> {
        let arrangement = enumerate_regions(params, &domain, config)?;
        per_layer_counts.push((epoch, arrangement.per_layer_counts.clone()));
        let line_count = match outputs.line_scan {
            Some(opts) => Some(
                scan_training_lines(params, &dataset.points, opts.n_lines, opts.seed, config.tol.side_eps)?
                    .mean_count,
            ),
            None => None,
        };
        if let Some(dir) = &run_dir {
            let needs_cells = outputs.region_json || outputs.decision_svg;
            let cells = if needs_cells {
                decision_cells(&arrangement, &config.tol)?
            } else {
                Vec::new()
            };
            if outputs.region_json {
                RegionDump::new(&arrangement, &cells).save(&dir.join(format!("regions_epoch{epoch:05}.json")))?;
            }
            if outputs.region_svg {
                write_atomic(
                    &dir.join(format!("regions_epoch{epoch:05}.svg")),
                    render_regions_svg(&arrangement).as_bytes(),
                )?;
            }
            if outputs.decision_svg {
                let gap = default_gap_threshold(&arrangement);
                write_atomic(
                    &dir.join(format!("decision_epoch{epoch:05}.svg")),
                    render_decision_svg(&arrangement, &cells, Some(&dataset), gap, &config.tol).as_bytes(),
                )?;
            }
        }
        Ok(RecordExtras {
            region_count: Some(arrangement.len()),
            line_count,
        })
    };

    let (log, params) = train_run(params, &dataset.inputs(), &dataset.labels, &manifest.train, recorder)?;
    let outcome = ExperimentOutcome {
        log,
        params,
        dataset,
        run_dir: run_dir.clone(),
        per_layer_counts,
    };

    if let Some(dir) = &run_dir {
        write_atomic(&dir.join("manifest.json"), serde_json::to_string_pretty(manifest)?.as_bytes())?;
        write_atomic(&dir.join("trainlog.csv"), outcome.log.to_csv().as_bytes())?;
        if outputs.counts_csv {
            write_atomic(&dir.join("counts.csv"), outcome.counts_csv(&manifest.id).as_bytes())?;
        }
        if outputs.checkpoint {
            Checkpoint::from_params(&outcome.params, Some(manifest.init)).save(&dir.join("checkpoint.json"))?;
        }
    }
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountsRow {
    pub experiment: String,
    /// Mean region count per epoch column.
    pub values: Vec<f64>,
    /// Region counts per seed, same column order.
    pub per_seed: Vec<Vec<usize>>,
}

/// Region counts, rows keyed by experiment and columns by epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountsTable {
    pub epochs: Vec<usize>,
    pub rows: Vec<CountsRow>,
}

impl CountsTable {
    pub fn value(&self, experiment: &str, epoch: usize) -> Option<f64> {
        let col = self.epochs.iter().position(|&e| e == epoch)?;
        self.rows
            .iter()
            .find(|r| r.experiment == experiment)
            .map(|r| r.values[col])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("experiment");
        for e in &self.epochs {
            write!(out, ",{e}").unwrap();
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.experiment);
            for v in &row.values {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// Laptop-sized: random-data runs stop at 100 epochs.
    Desk,
    /// Every epoch column of the original tables, up to 50000 epochs.
    Full,
}

/// Knobs for [`reproduce_table`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableOptions {
    pub scale: Scale,
    pub seeds: usize,
    pub base_seed: u64,
    pub init: InitKind,
}

impl Default for TableOptions {
    fn default() -> Self {
        TableOptions {
            scale: Scale::Desk,
            seeds: 3,
            base_seed: 0,
            init: InitKind::UniformFanin,
        }
    }
}

pub const TABLE1_SAMPLES: [usize; 6] = [200, 500, 1000, 2000, 5000, 10000];
pub const TABLE1_DESK_EPOCHS: [usize; 6] = [0, 10, 30, 50, 80, 100];
pub const TABLE1_FULL_EPOCHS: [usize; 15] =
    [0, 10, 30, 50, 80, 100, 300, 500, 800, 1000, 3000, 5000, 10000, 30000, 50000];
pub const TABLE23_EPOCHS: [usize; 8] = [0, 2, 5, 8, 10, 20, 50, 100];
pub const TABLE23_WIDTHS: [usize; 3] = [16, 32, 64];

fn arch_label(hidden: &[usize]) -> String {
    let parts: Vec<String> = hidden.iter().map(|n| n.to_string()).collect();
    format!("[{}]", parts.join(" "))
}

/// Manifests of one table's experiment grid for a single seed, each paired
/// with its row label.
pub fn table_manifests(table: u8, opts: &TableOptions, seed: u64) -> Result<Vec<(String, ExperimentManifest)>> {
    let base_train = |epochs: &[usize]| TrainConfig {
        epochs: *epochs.last().unwrap(),
        record_epochs: epochs.to_vec(),
        shuffle_seed: seed,
        ..TrainConfig::default()
    };
    let init = InitScheme {
        kind: opts.init,
        seed,
    };
    let mk = |id: String, hidden: &[usize], dataset: DatasetSpec, epochs: &[usize]| {
        let manifest = ExperimentManifest {
            id: format!("{id}/seed{seed}"),
            architecture: NetSpec::planar(hidden, dataset.classes),
            init,
            dataset,
            train: base_train(epochs),
            outputs: OutputSelection::default(),
        };
        (id, manifest)
    };
    match table {
        1 => {
            let epochs: &[usize] = match opts.scale {
                Scale::Desk => &TABLE1_DESK_EPOCHS,
                Scale::Full => &TABLE1_FULL_EPOCHS,
            };
            Ok(TABLE1_SAMPLES
                .iter()
                .map(|&n| {
                    let ds = DatasetSpec {
                        kind: DatasetKind::Random,
                        n,
                        noise: 0.0,
                        classes: 2,
                        seed,
                    };
                    mk(format!("random-{n}"), &[32, 32, 32], ds, epochs)
                })
                .collect())
        }
        2 | 3 => Ok(TABLE23_WIDTHS
            .iter()
            .map(|&w| {
                let ds = if table == 2 {
                    DatasetSpec {
                        kind: DatasetKind::Moons,
                        n: 1000,
                        noise: 0.1,
                        classes: 2,
                        seed,
                    }
                } else {
                    DatasetSpec {
                        kind: DatasetKind::GaussianQuantiles,
                        n: 1000,
                        noise: 0.0,
                        classes: 5,
                        seed,
                    }
                };
                let hidden = [w, w, w];
                mk(arch_label(&hidden), &hidden, ds, &TABLE23_EPOCHS)
            })
            .collect()),
        other => Err(Error::InvalidManifest(format!("no table {other}; expected 1, 2 or 3"))),
    }
}

/// Run one table's grid over `opts.seeds` seeds and average the region
/// counts per cell. With `out_root`, every run writes its artifacts and the
/// table goes to `out_root/table<id>_<scale>.csv`.
pub fn reproduce_table(
    table: u8,
    opts: &TableOptions,
    out_root: Option<&Path>,
    config: &EnumerationConfig,
) -> Result<CountsTable> {
    if opts.seeds == 0 {
        return Err(Error::InvalidManifest("need at least one seed".into()));
    }
    let seeds: Vec<u64> = (0..opts.seeds as u64).map(|s| opts.base_seed + s).collect();
    let grids = seeds
        .iter()
        .map(|&s| table_manifests(table, opts, s))
        .collect::<Result<Vec<_>>>()?;
    let epochs = grids[0][0].1.train.record_epochs.clone();

    let mut rows = Vec::new();
    for (i, (label, _)) in grids[0].iter().enumerate() {
        let mut per_seed = Vec::with_capacity(seeds.len());
        for grid in &grids {
            let outcome = run_experiment(&grid[i].1, out_root, config)?;
            let counts = epochs
                .iter()
                .map(|&e| outcome.region_count(e).unwrap_or(0))
                .collect::<Vec<_>>();
            per_seed.push(counts);
        }
        let values = (0..epochs.len())
            .map(|c| per_seed.iter().map(|s| s[c] as f64).sum::<f64>() / per_seed.len() as f64)
            .collect();
        rows.push(CountsRow {
            experiment: label.clone(),
            values,
            per_seed,
        });
    }
    let table_out = CountsTable { epochs, rows };
    if let Some(root) = out_root {
        let scale = match opts.scale {
            Scale::Desk => "desk",
            Scale::Full => "full",
        };
        write_atomic(&root.join(format!("table{table}_{scale}.csv")), table_out.to_csv().as_bytes())?;
    }
    Ok(table_out)
}
