//! Run configuration: a flat `key = value` file with `[species.N]` sections.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{PhaseSpaceGrid, NGHOST};
use crate::initial_data::{build_initial_data, InitialData, Perturbation, ProfileKind, ProfileSpec, SpeciesProfile};
use crate::kinematics::{LightSpeed, SpeciesParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesConfig {
    pub label: String,
    pub charge: f64,
    pub mass: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub density_pert: f64,
    #[serde(default)]
    pub drift_pert: f64,
    #[serde(default = "one")]
    pub pert_width: f64,
    #[serde(default)]
    pub center: Option<[f64; 2]>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub c: LightSpeed,
    pub t_final: f64,
    /// Cell counts; each axis carries one more node than cells.
    pub nx: usize,
    pub np1: usize,
    pub np2: usize,
    pub x_max: f64,
    /// Momentum half-widths; derived from `q0` and the margin when absent.
    #[serde(default)]
    pub p1_max: Option<f64>,
    #[serde(default)]
    pub p2_max: Option<f64>,
    /// Relative margin of the momentum box over `q0`; estimated from the
    /// initial force bound when absent.
    #[serde(default)]
    pub p_margin: Option<f64>,
    pub dt_cap: f64,
    pub profile: String,
    pub r0: f64,
    pub q0: f64,
    #[serde(default)]
    pub e2_init_amp: f64,
    #[serde(default)]
    pub b_init_amp: f64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Steps between snapshots; 0 writes only the final state.
    #[serde(default)]
    pub snapshot_stride: usize,
    #[serde(default = "one_usize")]
    pub diag_stride: usize,
    #[serde(default)]
    pub history_capacity: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub species: BTreeMap<String, SpeciesConfig>,
}

fn one_usize() -> usize {
    1
}

impl RunConfig {
    /// Two oppositely charged species with masses 1 and 2 on `[-8, 8]`,
    /// 128 x cells and 64 x 64 momentum cells, up to `t = 1`.
    pub fn baseline(c: LightSpeed) -> Self {
        let mut species = BTreeMap::new();
        species.insert(
            "1".into(),
            SpeciesConfig {
                label: "electron".into(),
                charge: -1.0,
                mass: 1.0,
                amplitude: 1.0 / PI,
                density_pert: 0.2,
                drift_pert: 0.2,
                pert_width: 1.0,
                center: None,
            },
        );
        species.insert(
            "2".into(),
            SpeciesConfig {
                label: "ion".into(),
                charge: 1.0,
                mass: 2.0,
                amplitude: 1.0 / PI,
                density_pert: 0.2,
                drift_pert: -0.2,
                pert_width: 1.0,
                center: None,
            },
        );
        Self {
            c,
            t_final: 1.0,
            nx: 128,
            np1: 64,
            np2: 64,
            x_max: 8.0,
            p1_max: None,
            p2_max: None,
            p_margin: Some(0.5),
            dt_cap: 0.0125,
            profile: "neutral-two-species".into(),
            r0: 1.0,
            q0: 2.0,
            e2_init_amp: 0.0,
            b_init_amp: 0.0,
            out_dir: None,
            snapshot_stride: 0,
            diag_stride: 1,
            history_capacity: None,
            seed: 0,
            species,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check_shape()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Species in section order (`[species.1]`, `[species.2]`, ...).
    pub fn species_list(&self) -> Vec<&SpeciesConfig> {
        let mut keyed: Vec<(&String, &SpeciesConfig)> = self.species.iter().collect();
        keyed.sort_by(|a, b| match (a.0.parse::<u64>(), b.0.parse::<u64>()) {
            (Ok(x), Ok(y)) => x.cmp(&y),
            _ => a.0.cmp(b.0),
        });
        keyed.into_iter().map(|(_, s)| s).collect()
    }

    fn check_shape(&self) -> Result<()> {
        for (name, n) in [("nx", self.nx), ("np1", self.np1), ("np2", self.np2)] {
            if n < 8 {
                return Err(Error::Config(format!("{name} must be at least 8, got {n}")));
            }
        }
        if self.nx <= 2 * NGHOST + 2 {
            return Err(Error::Config(format!("nx must exceed {}", 2 * NGHOST + 2)));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::Config(format!("t_final must be positive, got {}", self.t_final)));
        }
        if !(self.dt_cap > 0.0) {
            return Err(Error::Config("dt_cap must be positive".into()));
        }
        if self.diag_stride == 0 {
            return Err(Error::Config("diag_stride must be at least 1".into()));
        }
        if self.species.is_empty() {
            return Err(Error::Config("no [species.N] sections".into()));
        }
        if let Some(m) = self.p_margin {
            if !(m >= 0.0) {
                return Err(Error::Config("p_margin must be nonnegative".into()));
            }
        }
        ProfileKind::parse(&self.profile)?;
        Ok(())
    }

    pub fn profile_spec(&self) -> Result<ProfileSpec> {
        self.check_shape()?;
        let species = self
            .species_list()
            .into_iter()
            .map(|s| {
                Ok(SpeciesProfile {
                    params: SpeciesParams::new(s.label.clone(), s.charge, s.mass)?,
                    amplitude: s.amplitude,
                    center: s.center.unwrap_or([0.0, 0.0]),
                    perturbation: Perturbation { density: s.density_pert, drift: s.drift_pert, width: s.pert_width },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ProfileSpec {
            kind: ProfileKind::parse(&self.profile)?,
            r0: self.r0,
            q0: self.q0,
            species,
            e2_amplitude: self.e2_init_amp,
            b_amplitude: self.b_init_amp,
        })
    }
}

/// Everything about a run that does not depend on the speed of light.
#[derive(Debug, Clone)]
pub struct RunPlan {
    pub spec: ProfileSpec,
    pub grid: PhaseSpaceGrid,
    pub data: InitialData,
    pub dt: f64,
    pub steps: usize,
    pub force_estimate: f64,
    pub p_margin: f64,
}

/// `max_a |e_a| (2 pi sum_b |e_b| int int |f0_b - F_b| + sup |E2| + sup |B|)`,
/// a bound on the initial force.
pub fn force_estimate(data: &InitialData) -> f64 {
    let g = &data.grid;
    let wx = g.x.trapezoid_weights();
    let wp = g.momentum_weights();
    let plane = g.plane_len();
    let mut charge_mass = 0.0;
    for ((sp, f), fb) in data.species.iter().zip(&data.f0).zip(&data.background.tables) {
        let mut m = 0.0;
        for (row, w) in f.chunks(plane).zip(&wx) {
            m += w * row.iter().zip(fb).zip(&wp).map(|((v, b), q)| q * (v - b).abs()).sum::<f64>();
        }
        charge_mass += sp.charge.abs() * m;
    }
    let emax = data.species.iter().map(|s| s.charge.abs()).fold(0.0, f64::max);
    let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    emax * (2.0 * PI * charge_mass + sup(&data.e2) + sup(&data.b))
}

impl RunPlan {
    pub fn new(config: &RunConfig) -> Result<Self> {
        let spec = config.profile_spec()?;
        let m0 = spec.species.iter().map(|s| s.params.mass).fold(f64::INFINITY, f64::min);

        let provisional = PhaseSpaceGrid::new(
            config.nx + 1,
            config.np1 + 1,
            config.np2 + 1,
            config.x_max,
            config.p1_max.unwrap_or(spec.q0),
            config.p2_max.unwrap_or(spec.q0),
        )?;
        let force = force_estimate(&build_initial_data(&spec, &provisional)?);
        let margin = config
            .p_margin
            .unwrap_or_else(|| (0.2 * force * config.t_final / spec.q0).clamp(0.1, 1.0));
        let p1 = config.p1_max.unwrap_or(spec.q0 * (1.0 + margin));
        let p2 = config.p2_max.unwrap_or(spec.q0 * (1.0 + margin));
        let grid = PhaseSpaceGrid::new(config.nx + 1, config.np1 + 1, config.np2 + 1, config.x_max, p1, p2)?;

        let pmax = p1.max(p2);
        let needed = spec.r0 + pmax / m0 * config.t_final + 2.0 * grid.dx() * NGHOST as f64;
        if config.x_max < needed {
            return Err(Error::Config(format!(
                "x half-width {} is below R0 + Pmax T / m0 + 2 dx Nghost = {needed:.4}",
                config.x_max
            )));
        }
        if p1.min(p2) < spec.q0 {
            return Err(Error::Config(format!("momentum box ({p1}, {p2}) is smaller than Q0 = {}", spec.q0)));
        }

        let data = build_initial_data(&spec, &grid)?;
        let force = force_estimate(&data);
        let dp = grid.dp1().min(grid.dp2());
        let mut dt = (0.4 * grid.dx() * m0 / grid.p1.half_width).min(config.dt_cap);
        if force > 0.0 {
            dt = dt.min(0.4 * dp / force);
        }
        let steps = (config.t_final / dt).ceil().max(1.0) as usize;
        let dt = config.t_final / steps as f64;
        Ok(Self { spec, grid, data, dt, steps, force_estimate: force, p_margin: margin })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
c = "inf"
t_final = 0.5
nx = 32
np1 = 16
np2 = 16
x_max = 6.0
dt_cap = 0.05
profile = "neutral-two-species"
r0 = 1.0
q0 = 2.0
p_margin = 0.25

[species.1]
label = "electron"
charge = -1.0
mass = 1.0
amplitude = 0.3183098861837907
density_pert = 0.2

[species.2]
label = "ion"
charge = 1.0
mass = 2.0
amplitude = 0.3183098861837907
density_pert = 0.2
pert_width = 0.5
"#;

    #[test]
    fn parses_flat_file() {
        let cfg = RunConfig::from_toml_str(SAMPLE).unwrap();
        assert!(cfg.c.is_infinite());
        assert_eq!(cfg.species_list()[1].label, "ion");
        assert_eq!(cfg.species_list()[0].pert_width, 1.0);
        let finite = RunConfig::from_toml_str(&SAMPLE.replace("c = \"inf\"", "c = 8")).unwrap();
        assert_eq!(finite.c, LightSpeed::Finite(8.0));
    }

    #[test]
    fn round_trips_through_text() {
        let cfg = RunConfig::baseline(LightSpeed::Finite(8.0));
        let back = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, back);
        let cfg = RunConfig::baseline(LightSpeed::Infinite);
        assert_eq!(RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_values() {
        for (from, to) in [("nx = 32", "nx = 4"), ("t_final = 0.5", "t_final = -1.0"), ("profile = \"neutral-two-species\"", "profile = \"plasma\"")] {
            assert!(matches!(RunConfig::from_toml_str(&SAMPLE.replace(from, to)), Err(Error::Config(_))), "{to}");
        }
        assert!(RunConfig::from_toml_str(&format!("{SAMPLE}\nbogus = 1\n")).is_err());
        let narrow = RunConfig::from_toml_str(&SAMPLE.replace("x_max = 6.0", "x_max = 2.0")).unwrap();
        assert!(matches!(RunPlan::new(&narrow), Err(Error::Config(_))));
    }

    #[test]
    fn dt_rule_divides_final_time() {
        let cfg = RunConfig::from_toml_str(SAMPLE).unwrap();
        let plan = RunPlan::new(&cfg).unwrap();
        assert!((plan.dt * plan.steps as f64 - cfg.t_final).abs() < 1e-14);
        assert!(plan.dt <= cfg.dt_cap);
        assert!(plan.dt <= 0.4 * plan.grid.dx() / plan.grid.p1.half_width + 1e-15);
        assert!((plan.grid.p1.half_width - 2.5).abs() < 1e-14);
    }
}
