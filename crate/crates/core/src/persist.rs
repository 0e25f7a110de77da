//! On-disk formats: network checkpoints and region dumps (JSON), plus
//! atomic file writes.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ConvexPolygon, Point2};
use crate::nn::{AffineFunction, InitScheme, Layer, NetSpec, NetworkParams};
use crate::regions::{DecisionCell, RegionArrangement};

/// Write via a sibling temp file and rename, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    /// Row-major, one inner array per output neuron.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

/// Checkpoint document: `{"spec", "scheme", "layers": [{"weights", "bias"}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub spec: NetSpec,
    /// Initialization the parameters started from, if known.
    pub scheme: Option<InitScheme>,
    pub layers: Vec<LayerRecord>,
}

impl Checkpoint {
    pub fn from_params(params: &NetworkParams, scheme: Option<InitScheme>) -> Self {
        Checkpoint {
            spec: params.spec.clone(),
            scheme,
            layers: params
                .layers
                .iter()
                .map(|l| LayerRecord {
                    weights: l.weights.chunks(l.cols.max(1)).map(<[f64]>::to_vec).collect(),
                    bias: l.bias.clone(),
                })
                .collect(),
        }
    }

    pub fn to_params(&self) -> Result<NetworkParams> {
        let shapes = self.spec.layer_shapes();
        let layers = self
            .layers
            .iter()
            .zip(shapes.iter().chain(std::iter::repeat(&(0, 0))))
            .map(|(rec, &(_, cols))| {
                if rec.weights.iter().any(|r| r.len() != cols) {
                    return Err(Error::InvalidSpec("ragged weight rows".into()));
                }
                Ok(Layer {
                    rows: rec.weights.len(),
                    cols,
                    weights: rec.weights.concat(),
                    bias: rec.bias.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        NetworkParams::from_layers(self.spec.clone(), layers)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, serde_json::to_string_pretty(self)?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRecord {
    pub vertices: Vec<[f64; 2]>,
    /// Activation bits, layer-major, `'1'` = active.
    pub pattern: String,
    pub winner: usize,
    pub logit_affines: Vec<AffineFunction>,
}

/// Region dump document:
/// `{"domain", "per_layer_counts", "regions": [{"vertices", "pattern", "winner", "logit_affines"}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionDump {
    pub domain: Vec<[f64; 2]>,
    pub per_layer_counts: Vec<usize>,
    pub regions: Vec<RegionRecord>,
}

fn corners(poly: &ConvexPolygon) -> Vec<[f64; 2]> {
    poly.vertices().iter().map(|p| p.to_array()).collect()
}

impl RegionDump {
    pub fn new(arrangement: &RegionArrangement, cells: &[DecisionCell]) -> Self {
        RegionDump {
            domain: corners(&arrangement.domain),
            per_layer_counts: arrangement.per_layer_counts.clone(),
            regions: arrangement
                .regions
                .iter()
                .zip(cells)
                .map(|(r, c)| RegionRecord {
                    vertices: corners(&r.cell),
                    pattern: r.pattern.to_bitstring(),
                    winner: c.winner,
                    logit_affines: r.logit_affines.clone(),
                })
                .collect(),
        }
    }

    pub fn domain_polygon(&self) -> Result<ConvexPolygon> {
        ConvexPolygon::new(self.domain.iter().map(|p| Point2::new(p[0], p[1])).collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, serde_json::to_string(self)?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// 64-bit FNV-1a; stable across platforms and releases.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_network, InitScheme};

    #[test]
    fn checkpoint_roundtrip() {
        let spec = NetSpec::planar(&[3, 5], 4);
        let scheme = InitScheme::uniform_fanin(2);
        let p = init_network(&spec, scheme).unwrap();
        let ck = Checkpoint::from_params(&p, Some(scheme));
        let text = serde_json::to_string(&ck).unwrap();
        let back: Checkpoint = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_params().unwrap(), p);
        assert!(text.contains("\"kind\":\"uniform_fanin\""));
    }

    #[test]
    fn checkpoint_shape_errors() {
        let spec = NetSpec::planar(&[3], 2);
        let mut ck = Checkpoint::from_params(&NetworkParams::zeros(&spec), None);
        ck.layers[0].weights[1].push(0.0);
        assert!(ck.to_params().is_err());
        let mut ck = Checkpoint::from_params(&NetworkParams::zeros(&spec), None);
        ck.layers.pop();
        assert!(ck.to_params().is_err());
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/out.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
    }
}
