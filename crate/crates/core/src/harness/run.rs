//! Stepping a configured run to its final time while recording diagnostics.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use crate::diagnostics::{default_thresholds, energy_fields, support_radius, EnergyTables, Frame, History};
use crate::error::{Error, Result};
use crate::harness::config::{RunConfig, RunPlan};
use crate::harness::io::{write_csv, write_history, Snapshot};
use crate::maxwell::{ampere_residual, sup};
use crate::vlasov::{SimState, Stepper};

pub const SERIES_COLUMNS: [&str; 16] = [
    "t",
    "total_eps",
    "total_eps_tilde",
    "Q_t",
    "e1_sup",
    "e2_runmax",
    "b_runmax",
    "kplus_max",
    "kminus_max",
    "ampere_residual",
    "charge",
    "exterior_charge",
    "mass_drift",
    "energy_drift",
    "f_min",
    "f_max",
];

/// One line of the time-series file.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesRow {
    pub t: f64,
    /// NaN in the limit, where the rest energy is not defined.
    pub total_eps: f64,
    pub total_eps_tilde: f64,
    pub q: f64,
    pub e1_sup: f64,
    pub e2_runmax: f64,
    pub b_runmax: f64,
    pub kplus_max: f64,
    pub kminus_max: f64,
    /// Centred Ampere residual scaled by `sup |4 pi j1|`; NaN at the first
    /// and last rows.
    pub ampere_residual: f64,
    /// `int rho dx` over the domain.
    pub charge: f64,
    /// Charge that has left through the ends of the domain.
    pub exterior_charge: f64,
    /// Largest relative drift of the per-species perturbed mass budget.
    pub mass_drift: f64,
    pub energy_drift: f64,
    pub f_min: f64,
    pub f_max: f64,
}

impl SeriesRow {
    pub fn values(&self) -> Vec<f64> {
        vec![
            self.t,
            self.total_eps,
            self.total_eps_tilde,
            self.q,
            self.e1_sup,
            self.e2_runmax,
            self.b_runmax,
            self.kplus_max,
            self.kminus_max,
            self.ampere_residual,
            self.charge,
            self.exterior_charge,
            self.mass_drift,
            self.energy_drift,
            self.f_min,
            self.f_max,
        ]
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub plan: RunPlan,
    pub stepper: Stepper,
    pub state: SimState,
    pub history: History,
    pub series: Vec<SeriesRow>,
    /// Largest support radius seen at any step.
    pub q_max: f64,
    pub out_dir: Option<PathBuf>,
}

/// A run in progress. Drive it with [`Run::advance`] or [`Run::run_to_end`].
#[derive(Debug)]
pub struct Run {
    config: RunConfig,
    plan: RunPlan,
    stepper: Stepper,
    state: SimState,
    energy: EnergyTables,
    thresholds: Vec<f64>,
    charges: Vec<f64>,
    q_max: f64,
    history: History,
    series: Vec<SeriesRow>,
    first: Option<Frame>,
    prev: Option<(f64, Vec<f64>)>,
    last: Option<Frame>,
    flux_integral: f64,
}

impl Run {
    pub fn new(config: &RunConfig, plan: &RunPlan) -> Result<Self> {
        let (stepper, state) = Stepper::from_initial(&plan.data, config.c)?;
        let energy = EnergyTables::new(&stepper.species, &stepper.grid, config.c);
        let thresholds = default_thresholds(&stepper.f_ceiling);
        if let Some(dir) = &config.out_dir {
            fs::create_dir_all(dir.join("snapshots")).map_err(|e| Error::io(dir, e))?;
        }
        let mut run = Self {
            config: config.clone(),
            plan: plan.clone(),
            history: History::new(config.c, stepper.grid.x, config.history_capacity),
            stepper,
            state,
            energy,
            thresholds,
            charges: plan.spec.species.iter().map(|s| s.params.charge).collect(),
            q_max: 0.0,
            series: vec![],
            first: None,
            prev: None,
            last: None,
            flux_integral: 0.0,
        };
        run.check_support()?;
        run.record();
        Ok(run)
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn stepper(&self) -> &Stepper {
        &self.stepper
    }

    pub fn plan(&self) -> &RunPlan {
        &self.plan
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn is_done(&self) -> bool {
        self.state.step >= self.plan.steps
    }

    pub fn advance(&mut self) -> Result<()> {
        self.stepper.step(&mut self.state, self.plan.dt)?;
        if self.is_done() {
            // remove the rounding accumulated in t
            self.state.t = self.config.t_final;
        }
        self.check_support()?;
        if self.state.step.is_multiple_of(self.config.diag_stride) || self.is_done() {
            self.record();
        }
        if self.config.snapshot_stride > 0 && self.state.step.is_multiple_of(self.config.snapshot_stride) && !self.is_done() {
            self.write_snapshot()?;
        }
        Ok(())
    }

    /// Step to the final time, calling `observe` after every step.
    pub fn run_to_end(mut self, mut observe: impl FnMut(&Run) -> Result<()>) -> Result<RunOutput> {
        while !self.is_done() {
            self.advance()?;
            observe(&self)?;
        }
        self.finish()
    }

    fn check_support(&mut self) -> Result<()> {
        let q = support_radius(&self.state.f, &self.stepper.grid, &self.thresholds);
        self.q_max = self.q_max.max(q);
        let pmax = self.stepper.grid.p1.half_width.min(self.stepper.grid.p2.half_width);
        if q >= 0.9 * pmax {
            return Err(Error::SupportOverflow { q, pmax, t: self.state.t });
        }
        Ok(())
    }

    fn record(&mut self) {
        let grid = &self.stepper.grid;
        let en = energy_fields(&self.energy, &self.state.f, &self.state.fields, grid);
        let frame = Frame::capture(&self.state, grid, en, self.q_max, &self.charges);
        let last = grid.x.n - 1;
        let flux = |f: &Frame| f.mom_tilde[last] - f.mom_tilde[0];
        if let Some(prev) = &self.last {
            self.flux_integral += 0.5 * (frame.t - prev.t) * (flux(prev) + flux(&frame));
        }
        let first = self.first.get_or_insert_with(|| frame.clone());
        let wx = grid.x.trapezoid_weights();
        let charge = frame.rho.iter().zip(&wx).map(|(r, w)| r * w).sum::<f64>();
        let mass_drift = (0..frame.perturbed_mass.len())
            .map(|a| {
                let m0 = first.mass_budget(a);
                (frame.mass_budget(a) - m0).abs() / m0.abs().max(f64::MIN_POSITIVE)
            })
            .fold(0.0, f64::max);
        let e0 = first.total_eps_tilde;
        let energy_drift = (frame.total_eps_tilde - e0 + self.flux_integral).abs() / e0.abs().max(f64::MIN_POSITIVE);

        // the residual for the previous row is available once this frame exists
        if let (Some((t_prev, e1_prev)), Some(mid)) = (&self.prev, &self.last) {
            let dt_a = mid.t - t_prev;
            let dt_b = frame.t - mid.t;
            if (dt_a - dt_b).abs() <= 1e-9 * dt_a {
                let levels = [e1_prev.clone(), mid.e1.clone(), frame.e1.clone()];
                let j1 = [mid.j1.clone(), mid.j1.clone(), mid.j1.clone()];
                if let Ok(raw) = ampere_residual(&levels, &j1, dt_a) {
                    let scale = 4.0 * PI * sup(&mid.j1);
                    let row = self.series.last_mut().expect("row for the middle frame");
                    row.ampere_residual = if scale > 0.0 { raw / scale } else { raw };
                }
            }
        }

        self.series.push(SeriesRow {
            t: frame.t,
            total_eps: frame.total_eps.unwrap_or(f64::NAN),
            total_eps_tilde: frame.total_eps_tilde,
            q: frame.q,
            e1_sup: sup(&frame.e1),
            e2_runmax: frame.e2_runmax,
            b_runmax: frame.b_runmax,
            kplus_max: frame.kplus.iter().copied().fold(0.0, f64::max),
            kminus_max: frame.kminus.iter().copied().fold(0.0, f64::max),
            ampere_residual: f64::NAN,
            charge,
            exterior_charge: frame.exterior_charge[0] + frame.exterior_charge[1],
            mass_drift,
            energy_drift,
            f_min: frame.f_min,
            f_max: frame.f_max,
        });
        self.prev = self.last.take().map(|f| (f.t, f.e1.clone()));
        self.last = Some(frame.clone());
        self.history.push(frame);
    }

    fn write_snapshot(&self) -> Result<()> {
        let Some(dir) = &self.config.out_dir else {
            return Ok(());
        };
        let path = dir.join("snapshots").join(format!("snap_{:06}.vml", self.state.step));
        Snapshot::from_state(&self.state, &self.stepper.grid, self.config.c).write(&path)
    }

    pub fn finish(self) -> Result<RunOutput> {
        if let Some(dir) = &self.config.out_dir {
            self.write_snapshot()?;
            write_series(&dir.join("series.csv"), &self.series)?;
            write_history(&self.history, &dir.join("history.json"))?;
            let cfg = dir.join("config.toml");
            fs::write(&cfg, self.config.to_toml_string()).map_err(|e| Error::io(&cfg, e))?;
        }
        Ok(RunOutput {
            plan: self.plan,
            stepper: self.stepper,
            state: self.state,
            history: self.history,
            series: self.series,
            q_max: self.q_max,
            out_dir: self.config.out_dir,
        })
    }
}

pub fn write_series(path: &Path, series: &[SeriesRow]) -> Result<()> {
    write_csv(path, &SERIES_COLUMNS, series.iter().map(SeriesRow::values))
}

/// Build, step to the final time and write the configured outputs.
pub fn run_simulation(config: &RunConfig) -> Result<RunOutput> {
    let plan = RunPlan::new(config)?;
    Run::new(config, &plan)?.run_to_end(|_| Ok(()))
}
