//! The speed-of-light sweep against the limit run, and power-law fits.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{error_norms, lambda_sup, ErrorNorms, History, LambdaRegion};
use crate::error::{Error, Result};
use crate::harness::config::{RunConfig, RunPlan};
use crate::harness::io::write_csv;
use crate::harness::run::{Run, RunOutput};
use crate::kinematics::LightSpeed;
use crate::maxwell::sup;
use crate::vlasov::SimState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square of the log residuals.
    pub residual: f64,
}

/// Ordinary least squares of `log gap` against `log c`.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 2 {
        return Err(Error::Fit(format!("need at least 2 points, got {}", points.len())));
    }
    for &(c, gap) in points {
        if !(gap > 0.0 && gap.is_finite()) {
            return Err(Error::Fit(format!("gap {gap} at c = {c} is not positive")));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Fit(format!("c = {c} is not a positive number")));
        }
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all c values coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    Ok(RateFit { slope, intercept, residual: (ss / n).sqrt() })
}

/// Per-run sups that should not depend on `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunBounds {
    pub f_sup: f64,
    pub e1_sup: f64,
    pub e2_runmax: f64,
    pub b_runmax: f64,
    pub q_max: f64,
}

impl RunBounds {
    pub fn from_run(out: &RunOutput) -> Self {
        let h = &out.history;
        let fold = |g: &dyn Fn(&crate::diagnostics::Frame) -> f64| h.frames.iter().map(g).fold(0.0, f64::max);
        Self {
            f_sup: fold(&|f| f.f_max),
            e1_sup: fold(&|f| sup(&f.e1)),
            e2_runmax: out.state.fields.e2_runmax,
            b_runmax: out.state.fields.b_runmax,
            q_max: out.q_max,
        }
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.f_sup, self.e1_sup, self.e2_runmax, self.b_runmax, self.q_max]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub c: f64,
    /// Sup over the compared times of the distance to the limit run.
    pub norms: ErrorNorms,
    pub total_gap: f64,
    pub bounds: RunBounds,
    /// Sup of the fields over the far-field region up to the final time.
    pub lambda_sup: f64,
    pub lambda_nodes: usize,
    /// Sup of `|E1| + |E2| + |B|` over the whole run.
    pub field_sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Sorted by `c`.
    pub rows: Vec<SweepRow>,
    pub limit_bounds: RunBounds,
    /// `None` with fewer than two rows.
    pub fit: Option<RateFit>,
    pub region: LambdaRegion,
    pub lambda_fit: Option<RateFit>,
    pub steps: usize,
    pub dt: f64,
}

impl SweepResult {
    pub fn gaps(&self) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.c, r.total_gap)).collect()
    }

    /// Single-row sweeps have no slope.
    pub fn slope_undefined(&self) -> bool {
        self.fit.is_none()
    }
}

pub const SWEEP_COLUMNS: [&str; 14] = [
    "c",
    "h_sup",
    "e1_gap",
    "e2_sup",
    "b_sup",
    "total_gap",
    "f_sup",
    "e1_sup",
    "e2_runmax",
    "b_runmax",
    "q_max",
    "lambda_sup",
    "lambda_nodes",
    "field_sup",
];

pub fn write_sweep_csv(path: &Path, result: &SweepResult) -> Result<()> {
    write_csv(
        path,
        &SWEEP_COLUMNS,
        result.rows.iter().map(|r| {
            let mut v = vec![
                r.c,
                r.norms.h_sup.iter().copied().fold(0.0, f64::max),
                r.norms.e1_gap,
                r.norms.e2_sup,
                r.norms.b_sup,
                r.total_gap,
            ];
            v.extend(r.bounds.as_array());
            v.extend([r.lambda_sup, r.lambda_nodes as f64, r.field_sup]);
            v
        }),
    )
}

/// Reference states of the limit run at the compared steps.
struct Reference {
    states: Vec<(usize, SimState)>,
    e1: Vec<Vec<f64>>,
}

/// Steps at which full distribution functions are compared: quarters of
/// the run and the final step.
fn compare_steps(steps: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (1..=4).map(|k| (k * steps) / 4).filter(|&s| s > 0).collect();
    out.dedup();
    out
}

fn field_sup(h: &History) -> f64 {
    h.frames
        .iter()
        .map(|f| (0..f.e1.len()).map(|i| f.e1[i].abs() + f.e2[i].abs() + f.b[i].abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
}

/// Run the limit once, then every finite `c` on the same grid and time
/// step, and measure the distance to the limit.
pub fn run_sweep(config: &RunConfig, c_list: &[f64], jobs: Option<usize>) -> Result<SweepResult> {
    if config.e2_init_amp != 0.0 || config.b_init_amp != 0.0 {
        return Err(Error::Config("the sweep requires zero initial E2 and B".into()));
    }
    if c_list.is_empty() {
        return Err(Error::Config("empty c list".into()));
    }
    let mut cs = c_list.to_vec();
    for &c in &cs {
        LightSpeed::finite(c)?;
    }
    cs.sort_by(f64::total_cmp);
    cs.dedup();

    let mut limit_cfg = config.clone();
    limit_cfg.c = LightSpeed::Infinite;
    limit_cfg.out_dir = config.out_dir.as_ref().map(|d| d.join("c_inf"));
    limit_cfg.history_capacity = None;
    let plan = RunPlan::new(&limit_cfg)?;
    let targets = compare_steps(plan.steps);

    let mut reference = Reference { states: vec![], e1: vec![] };
    let limit = Run::new(&limit_cfg, &plan)?;
    reference.e1.push(limit.state().fields.e1.clone());
    let limit = limit.run_to_end(|run| {
        reference.e1.push(run.state().fields.e1.clone());
        if targets.contains(&run.state().step) {
            reference.states.push((run.state().step, run.state().clone()));
        }
        Ok(())
    })?;

    let one = |c: f64| -> Result<(RunOutput, ErrorNorms)> {
        let mut cfg = config.clone();
        cfg.c = LightSpeed::Finite(c);
        cfg.out_dir = config.out_dir.as_ref().map(|d| d.join(format!("c_{c}")));
        cfg.history_capacity = None;
        let run = Run::new(&cfg, &plan)?;
        let grid = run.stepper().grid;
        let mut norms = ErrorNorms { h_sup: vec![0.0; plan.spec.species.len()], e1_gap: 0.0, e2_sup: 0.0, b_sup: 0.0 };
        let out = run.run_to_end(|run| {
            let s = run.state();
            let gap = s.fields.e1.iter().zip(&reference.e1[s.step]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            norms.e1_gap = norms.e1_gap.max(gap);
            if let Some((_, r)) = reference.states.iter().find(|(k, _)| *k == s.step) {
                norms.merge(&error_norms(s, &grid, r, &grid)?);
            }
            Ok(())
        })?;
        Ok((out, norms))
    };

    let work = || cs.par_iter().map(|&c| one(c)).collect::<Result<Vec<_>>>();
    let outputs = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };

    let q_sum = outputs.iter().map(|(o, _)| o.q_max).fold(0.0, f64::max) + limit.q_max;
    let region = LambdaRegion::from_supports(plan.spec.r0, config.t_final, q_sum, &limit.stepper.species);
    let rows: Vec<SweepRow> = cs
        .iter()
        .zip(&outputs)
        .map(|(&c, (out, norms))| {
            let ls = lambda_sup(&out.history, &region, config.t_final);
            SweepRow {
                c,
                total_gap: norms.total(),
                norms: norms.clone(),
                bounds: RunBounds::from_run(out),
                lambda_sup: ls.value,
                lambda_nodes: ls.nodes,
                field_sup: field_sup(&out.history),
            }
        })
        .collect();
    let fit = if rows.len() >= 2 {
        Some(fit_rate(&rows.iter().map(|r| (r.c, r.total_gap)).collect::<Vec<_>>())?)
    } else {
        None
    };
    let lambda_fit = if rows.len() >= 2 {
        fit_rate(&rows.iter().map(|r| (r.c, r.lambda_sup)).collect::<Vec<_>>()).ok()
    } else {
        None
    };
    let result = SweepResult {
        rows,
        limit_bounds: RunBounds::from_run(&limit),
        fit,
        region,
        lambda_fit,
        steps: plan.steps,
        dt: plan.dt,
    };
    if let Some(dir) = &config.out_dir {
        write_sweep_csv(&dir.join("sweep.csv"), &result)?;
        let path = dir.join("sweep.json");
        let text = serde_json::to_string_pretty(&result).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(result)
}
