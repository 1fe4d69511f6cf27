//! Run/train configuration: a sectioned key/value text file (TOML), with the
//! seed and output directory overridable from the command line. All
//! randomness anywhere in a run derives from the single seed via named
//! substreams.

use crate::energy::EnergyParams;
use crate::optimizer::StateDivisors;
use crate::topology::TopologyKind;
use crate::workload::{gen_shared_hotspot, gen_uniform_random, load_trace, AccessTrace};
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub topology: TopologySection,
    #[serde(default)]
    pub routing: RoutingSection,
    pub trace: TraceSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub energy: EnergySection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    pub kind: String,
    pub cores: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoutingSection {
    /// "weighted" or "xy" (xy is only valid on a mesh).
    pub mode: String,
    /// "uniform" or a path to an edge-list file with learned weights.
    pub weights: String,
}

impl Default for RoutingSection {
    fn default() -> Self {
        RoutingSection {
            mode: "weighted".into(),
            weights: "uniform".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TraceSection {
    /// "uniform", "hotspot" or "file".
    pub source: String,
    pub file: Option<PathBuf>,
    pub length: u64,
    pub rate: f64,
    pub write_fraction: f64,
    pub pool_lines: u64,
    pub sharing_degree: usize,
    pub hot_fraction: f64,
}

impl Default for TraceSection {
    fn default() -> Self {
        TraceSection {
            source: "uniform".into(),
            file: None,
            length: 10_000,
            rate: 0.05,
            write_fraction: 0.3,
            pool_lines: 64,
            sharing_degree: 2,
            hot_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    /// Cycle budget for a single run.
    pub cycles: u64,
    pub seed: u64,
    pub ccta: bool,
    /// Per-cycle packet event log (verbose).
    pub events: bool,
    pub swmr_check: bool,
    /// Metadata only; all internal timing is in cycles.
    pub frequency_ghz: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            cycles: 1_000_000,
            seed: 1,
            ccta: true,
            events: false,
            swmr_check: false,
            frequency_ghz: 2.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergySection {
    pub e_link: f64,
    pub e_router: f64,
    pub p_static: f64,
}

impl Default for EnergySection {
    fn default() -> Self {
        let p = EnergyParams::default();
        EnergySection {
            e_link: p.e_link,
            e_router: p.e_router,
            p_static: p.p_static,
        }
    }
}

impl EnergySection {
    pub fn params(&self) -> EnergyParams {
        EnergyParams {
            e_link: self.e_link,
            e_router: self.e_router,
            p_static: self.p_static,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub episodes: u64,
    pub epoch_cycles: u64,
    pub max_epochs: u32,
    pub gamma: f64,
    pub q_lr: f64,
    pub w_lr: f64,
    pub sigma: f64,
    pub alphas: [f64; 4],
    /// Explicit state divisors; empty means calibrate on XY-over-Mesh.
    pub divisors: Vec<f64>,
    pub checkpoint_every: u64,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            episodes: 100,
            epoch_cycles: 10_000,
            max_epochs: 50,
            gamma: 0.9,
            q_lr: 1e-3,
            w_lr: 1e-3,
            sigma: 0.2,
            alphas: [0.25; 4],
            divisors: Vec::new(),
            checkpoint_every: 10,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<RunConfig, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::from_str(&text)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn from_str(text: &str) -> Result<RunConfig, String> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| format!("config: {e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn kind(&self) -> Result<TopologyKind, String> {
        self.topology.kind.parse()
    }

    pub fn validate(&self) -> Result<(), String> {
        let kind = self.kind()?;
        match self.routing.mode.as_str() {
            "xy" => {
                if kind != TopologyKind::Mesh {
                    return Err("xy routing is only valid with the mesh topology".into());
                }
            }
            "weighted" => {}
            other => return Err(format!("unknown routing mode {other}")),
        }
        match self.trace.source.as_str() {
            "uniform" | "hotspot" => {}
            "file" => {
                if self.trace.file.is_none() {
                    return Err("trace.source = \"file\" needs trace.file".into());
                }
            }
            other => return Err(format!("unknown trace source {other}")),
        }
        if !self.train.divisors.is_empty() && self.train.divisors.len() != 6 {
            return Err("train.divisors must list exactly 6 values".into());
        }
        Ok(())
    }

    /// Build (or load) the access trace; generators derive from the run seed.
    pub fn build_trace(&self) -> Result<AccessTrace, String> {
        let t = &self.trace;
        let cores = self.topology.cores;
        match t.source.as_str() {
            "uniform" => Ok(gen_uniform_random(
                cores,
                t.length,
                t.rate,
                t.write_fraction,
                t.pool_lines,
                self.sim.seed,
            )),
            "hotspot" => Ok(gen_shared_hotspot(
                cores,
                t.length,
                t.rate,
                t.sharing_degree,
                t.hot_fraction,
                self.sim.seed,
            )),
            "file" => {
                let path = t.file.as_ref().unwrap();
                let text = std::fs::read_to_string(path)
                    .map_err(|e| format!("cannot read trace {}: {e}", path.display()))?;
                let trace = load_trace(&text).map_err(|e| e.to_string())?;
                if trace.cores != cores {
                    return Err(format!(
                        "trace has {} cores, topology has {cores}",
                        trace.cores
                    ));
                }
                Ok(trace)
            }
            _ => unreachable!("validated"),
        }
    }

    pub fn state_divisors(&self) -> Option<(StateDivisors, [f64; 4])> {
        if self.train.divisors.len() == 6 {
            let d = &self.train.divisors;
            let state = StateDivisors([d[0], d[1], d[2], d[3], d[4], d[5]]);
            // Reward normalizes (L, H, D, C).
            Some((state, [d[0], d[4], d[1], d[3]]))
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[topology]
kind = "mesh"
cores = 16

[trace]
source = "hotspot"
rate = 0.05
sharing_degree = 4
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = RunConfig::from_str(MINIMAL).unwrap();
        assert_eq!(cfg.kind().unwrap(), TopologyKind::Mesh);
        assert_eq!(cfg.topology.cores, 16);
        assert_eq!(cfg.sim.seed, 1);
        assert_eq!(cfg.routing.mode, "weighted");
        assert_eq!(cfg.train.episodes, 100);
        let trace = cfg.build_trace().unwrap();
        assert_eq!(trace.cores, 16);
    }

    #[test]
    fn xy_on_non_mesh_is_rejected() {
        let text =
            MINIMAL.replace("kind = \"mesh\"", "kind = \"torus\"") + "\n[routing]\nmode = \"xy\"\n";
        assert!(RunConfig::from_str(&text).is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.to_string() + "\n[sim]\nvoltage_mv = 900\n";
        assert!(RunConfig::from_str(&text).is_err());
    }
}
