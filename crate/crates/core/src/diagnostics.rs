//! Post-processing of states and recorded histories: energy and momentum
//! densities, the cone-energy identity, the bridge between the transverse
//! current and the weighted moments, support radii, far-field sups and the
//! distance to the limit solution.

use std::collections::VecDeque;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Axis, PhaseSpaceGrid};
use crate::interp;
use crate::kinematics::{gamma_raw, sigma_raw, LightSpeed, SpeciesParams};
use crate::maxwell::{ampere_residual, sup, FieldState};
use crate::vlasov::{DistributionField, FieldSampler, SimState};

/// Quadrature weights folded with the per-momentum densities of every
/// energy-like moment, one set per species.
#[derive(Debug, Clone)]
pub struct EnergyTables {
    c: LightSpeed,
    kinetic: Vec<Vec<f64>>,
    flux: Vec<Vec<f64>>,
    sigma_plus: Vec<Vec<f64>>,
    sigma_minus: Vec<Vec<f64>>,
    /// `c^2 gamma` and `c^2 p1`; absent in the limit.
    rest_energy: Option<Vec<Vec<f64>>>,
    rest_flux: Option<Vec<Vec<f64>>>,
}

impl EnergyTables {
    pub fn new(species: &[SpeciesParams], grid: &PhaseSpaceGrid, c: LightSpeed) -> Self {
        let w = grid.momentum_weights();
        let inv_c = c.inv();
        let c2 = match c {
            LightSpeed::Finite(c) => Some(c * c),
            LightSpeed::Infinite => None,
        };
        let mut t = Self {
            c,
            kinetic: vec![],
            flux: vec![],
            sigma_plus: vec![],
            sigma_minus: vec![],
            rest_energy: c2.map(|_| vec![]),
            rest_flux: c2.map(|_| vec![]),
        };
        for sp in species {
            let m = sp.mass;
            let n = w.len();
            let (mut kin, mut fl, mut sp_, mut sm) =
                (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
            let (mut re, mut rf) = (Vec::new(), Vec::new());
            for k1 in 0..grid.p1.n {
                for k2 in 0..grid.p2.n {
                    let wk = w[k1 * grid.p2.n + k2];
                    let p = grid.momentum(k1, k2);
                    let p2 = p[0] * p[0] + p[1] * p[1];
                    let g = gamma_raw(p2, m, inv_c);
                    kin.push(wk * p2 / (g + m));
                    fl.push(wk * p[0] * p2 / (g * (g + m)));
                    let (a, b) = sigma_raw(p, m, inv_c);
                    sp_.push(wk * a);
                    sm.push(wk * b);
                    if let Some(c2) = c2 {
                        re.push(wk * c2 * g);
                        rf.push(wk * c2 * p[0]);
                    }
                }
            }
            t.kinetic.push(kin);
            t.flux.push(fl);
            t.sigma_plus.push(sp_);
            t.sigma_minus.push(sm);
            if let Some(v) = t.rest_energy.as_mut() {
                v.push(re);
            }
            if let Some(v) = t.rest_flux.as_mut() {
                v.push(rf);
            }
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyDiagnostics {
    /// Energy density including rest mass; `None` in the limit.
    pub eps: Option<Vec<f64>>,
    pub mom: Option<Vec<f64>>,
    pub eps_tilde: Vec<f64>,
    pub mom_tilde: Vec<f64>,
    pub total_eps: Option<f64>,
    pub total_eps_tilde: f64,
    pub kplus: Vec<f64>,
    pub kminus: Vec<f64>,
}

/// Every density of the energy family at one instant.
pub fn energy_fields(tables: &EnergyTables, f: &DistributionField, fields: &FieldState, grid: &PhaseSpaceGrid) -> EnergyDiagnostics {
    let plane = grid.plane_len();
    let nx = grid.x.n;
    let with_rest = tables.rest_energy.is_some();
    let per_x: Vec<[f64; 6]> = (0..nx)
        .into_par_iter()
        .map(|ix| {
            let mut m = [0.0; 6];
            for (a, fa) in f.values.iter().enumerate() {
                let row = &fa[ix * plane..(ix + 1) * plane];
                for k in 0..plane {
                    let v = row[k];
                    if v == 0.0 {
                        continue;
                    }
                    m[0] += tables.kinetic[a][k] * v;
                    m[1] += tables.flux[a][k] * v;
                    m[2] += tables.sigma_plus[a][k] * v;
                    m[3] += tables.sigma_minus[a][k] * v;
                    if with_rest {
                        m[4] += tables.rest_energy.as_ref().unwrap()[a][k] * v;
                        m[5] += tables.rest_flux.as_ref().unwrap()[a][k] * v;
                    }
                }
            }
            m
        })
        .collect();

    let c_field = match tables.c {
        LightSpeed::Finite(c) => c,
        LightSpeed::Infinite => 0.0,
    };
    let field_energy: Vec<f64> = (0..nx)
        .map(|i| (fields.e1[i].powi(2) + fields.e2[i].powi(2) + fields.b[i].powi(2)) / (8.0 * PI))
        .collect();
    let field_flux: Vec<f64> = (0..nx).map(|i| c_field * fields.e2[i] * fields.b[i] / (4.0 * PI)).collect();
    let eps_tilde: Vec<f64> = (0..nx).map(|i| per_x[i][0] + field_energy[i]).collect();
    let mom_tilde: Vec<f64> = (0..nx).map(|i| per_x[i][1] + field_flux[i]).collect();
    let wx = grid.x.trapezoid_weights();
    let integrate = |v: &[f64]| v.iter().zip(&wx).map(|(a, b)| a * b).sum::<f64>();
    let (eps, mom) = if with_rest {
        let e: Vec<f64> = (0..nx).map(|i| per_x[i][4] + field_energy[i]).collect();
        let m: Vec<f64> = (0..nx).map(|i| per_x[i][5] + field_flux[i]).collect();
        (Some(e), Some(m))
    } else {
        (None, None)
    };
    EnergyDiagnostics {
        total_eps: eps.as_deref().map(integrate),
        total_eps_tilde: integrate(&eps_tilde),
        eps,
        mom,
        eps_tilde,
        mom_tilde,
        kplus: per_x.iter().map(|m| m[2]).collect(),
        kminus: per_x.iter().map(|m| m[3]).collect(),
    }
}

/// Largest `|p|` over nodes where some species differs from its background
/// by more than its threshold, or exceeds the threshold itself.
pub fn support_radius(f: &DistributionField, grid: &PhaseSpaceGrid, thresholds: &[f64]) -> f64 {
    let plane = grid.plane_len();
    let radius: Vec<f64> = (0..grid.p1.n)
        .flat_map(|k1| (0..grid.p2.n).map(move |k2| (k1, k2)))
        .map(|(k1, k2)| {
            let p = grid.momentum(k1, k2);
            p[0].hypot(p[1])
        })
        .collect();
    f.values
        .iter()
        .enumerate()
        .map(|(a, fa)| {
            let fb = &f.background.tables[a];
            let thr = thresholds[a];
            fa.par_chunks(plane)
                .map(|row| {
                    let mut q = 0.0f64;
                    for k in 0..plane {
                        if radius[k] > q && (row[k] > thr || (row[k] - fb[k]).abs() > thr) {
                            q = radius[k];
                        }
                    }
                    q
                })
                .reduce(|| 0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// Default support thresholds, `1e-12` times each species' maximum.
pub fn default_thresholds(ceilings: &[f64]) -> Vec<f64> {
    ceilings.iter().map(|m| 1e-12 * m.max(f64::MIN_POSITIVE)).collect()
}

/// One recorded instant of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub t: f64,
    pub step: usize,
    pub e1: Vec<f64>,
    pub e2: Vec<f64>,
    pub b: Vec<f64>,
    pub rho: Vec<f64>,
    pub j1: Vec<f64>,
    pub j2: Vec<f64>,
    pub eps_tilde: Vec<f64>,
    pub mom_tilde: Vec<f64>,
    pub kplus: Vec<f64>,
    pub kminus: Vec<f64>,
    pub total_eps: Option<f64>,
    pub total_eps_tilde: f64,
    /// Running maximum of the support radius.
    pub q: f64,
    pub e2_runmax: f64,
    pub b_runmax: f64,
    pub f_max: f64,
    pub f_min: f64,
    /// `int int (f - F) dp dx` per species.
    pub perturbed_mass: Vec<f64>,
    /// Perturbed mass per species that has left through the left and right
    /// ends, and the charge it carries.
    pub outflow: Vec<[f64; 2]>,
    pub exterior_charge: [f64; 2],
}

impl Frame {
    pub fn capture(state: &SimState, grid: &PhaseSpaceGrid, energy: EnergyDiagnostics, q: f64, charges: &[f64]) -> Self {
        let (mut f_max, mut f_min) = (f64::NEG_INFINITY, f64::INFINITY);
        for v in state.f.values.iter().flat_map(|v| v.iter()) {
            f_max = f_max.max(*v);
            f_min = f_min.min(*v);
        }
        let perturbed_mass = (0..state.f.n_species())
            .map(|a| crate::initial_data::species_perturbed_mass(&state.f.values[a], &state.f.background.tables[a], grid))
            .collect();
        Self {
            t: state.t,
            step: state.step,
            e1: state.fields.e1.clone(),
            e2: state.fields.e2.clone(),
            b: state.fields.b.clone(),
            rho: state.moments.rho.clone(),
            j1: state.moments.j1.clone(),
            j2: state.moments.j2.clone(),
            eps_tilde: energy.eps_tilde,
            mom_tilde: energy.mom_tilde,
            kplus: energy.kplus,
            kminus: energy.kminus,
            total_eps: energy.total_eps,
            total_eps_tilde: energy.total_eps_tilde,
            q,
            e2_runmax: state.fields.e2_runmax,
            b_runmax: state.fields.b_runmax,
            f_max,
            f_min,
            perturbed_mass,
            outflow: state.f.outflow.clone(),
            exterior_charge: state.f.outflow.iter().zip(charges).fold([0.0; 2], |acc, (o, e)| {
                [acc[0] + e * o[0], acc[1] + e * o[1]]
            }),
        }
    }

    /// Perturbed mass inside the domain plus what has left it.
    pub fn mass_budget(&self, alpha: usize) -> f64 {
        self.perturbed_mass[alpha] + self.outflow[alpha][0] + self.outflow[alpha][1]
    }
}

/// Frames recorded at a fixed step stride, oldest first. With a capacity
/// the oldest frames are dropped as new ones arrive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub c: LightSpeed,
    pub x: Axis,
    pub frames: VecDeque<Frame>,
    pub capacity: Option<usize>,
}

impl History {
    pub fn new(c: LightSpeed, x: Axis, capacity: Option<usize>) -> Self {
        Self { c, x, frames: VecDeque::new(), capacity }
    }

    pub fn push(&mut self, frame: Frame) {
        if let Some(cap) = self.capacity {
            while self.frames.len() >= cap.max(1) {
                self.frames.pop_front();
            }
        }
        self.frames.push_back(frame);
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.t).collect()
    }

    /// Index of the frame nearest to `t`.
    pub fn nearest(&self, t: f64) -> Option<usize> {
        self.frames
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1.t - t).abs().total_cmp(&(b.1.t - t).abs()))
            .map(|(i, _)| i)
    }

    /// Spacing of the recorded times, if uniform.
    pub fn frame_dt(&self) -> Option<f64> {
        if self.frames.len() < 2 {
            return None;
        }
        let dt = self.frames[1].t - self.frames[0].t;
        let uniform = self
            .frames
            .iter()
            .zip(self.frames.iter().skip(1))
            .all(|(a, b)| ((b.t - a.t) - dt).abs() <= 1e-9 * dt.abs().max(1e-300));
        uniform.then_some(dt)
    }

    fn sample_array(&self, data: &[f64], x: f64) -> Option<f64> {
        let u = self.x.position(x);
        if !(0.0..=(self.x.n - 1) as f64).contains(&u) {
            return None;
        }
        Some(interp::sample(data, u, 0.0))
    }

    /// Frames bracketing `t` and the linear weight of the later one.
    fn bracket(&self, t: f64) -> Option<(usize, usize, f64)> {
        let n = self.frames.len();
        if n == 0 {
            return None;
        }
        let (t0, t1) = (self.frames[0].t, self.frames[n - 1].t);
        let tol = 1e-9 * (t1 - t0).abs().max(1e-12);
        if t < t0 - tol || t > t1 + tol {
            return None;
        }
        if n == 1 {
            return Some((0, 0, 0.0));
        }
        let k = self.frames.partition_point(|f| f.t <= t).clamp(1, n - 1);
        let (a, b) = (&self.frames[k - 1], &self.frames[k]);
        let w = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
        Some((k - 1, k, w))
    }
}

impl FieldSampler for History {
    fn time_span(&self) -> (f64, f64) {
        match (self.frames.front(), self.frames.back()) {
            (Some(a), Some(b)) => (a.t, b.t),
            _ => (0.0, 0.0),
        }
    }

    fn sample(&self, t: f64, x: f64) -> Option<[f64; 3]> {
        let (i, j, w) = self.bracket(t)?;
        let (a, b) = (&self.frames[i], &self.frames[j]);
        let mut out = [0.0; 3];
        for (k, (da, db)) in [(&a.e1, &b.e1), (&a.e2, &b.e2), (&a.b, &b.b)].into_iter().enumerate() {
            let va = self.sample_array(da, x)?;
            let vb = self.sample_array(db, x)?;
            out[k] = (1.0 - w) * va + w * vb;
        }
        Some(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangleResult {
    /// Apex actually used, snapped to a recorded time.
    pub apex: (f64, f64),
    pub base: f64,
    pub right_edge: f64,
    pub left_edge: f64,
    pub residual: f64,
    /// `int k+` along the right edge and `int k-` along the left edge.
    pub k_plus_edge: f64,
    pub k_minus_edge: f64,
    /// The cone left the stored domain; the identity is then not certified.
    pub clipped: bool,
}

impl TriangleResult {
    pub fn relative_residual(&self) -> f64 {
        self.residual.abs() / self.base.max(1e-12)
    }
}

/// Energy balance over the backward light cone of `apex`: the base integral
/// `c^-1 int eps_tilde(0, y) dy` against the time integrals of
/// `eps_tilde +- m_tilde / c` along the two edges.
pub fn triangle_residual(history: &History, apex: (f64, f64), c: f64) -> Result<TriangleResult> {
    if history.frames.len() < 2 {
        return Err(Error::HistoryTooShort("triangle needs at least two frames".into()));
    }
    let idx = history.nearest(apex.0).expect("non-empty history");
    let t = history.frames[idx].t;
    let t0 = history.frames[0].t;
    let x = apex.1;
    let reach = c * (t - t0);
    let lo_x = history.x.node(crate::grid::NGHOST);
    let hi_x = history.x.node(history.x.n - 1 - crate::grid::NGHOST);
    let clipped = x - reach < lo_x || x + reach > hi_x;

    let sample = |data: &[f64], y: f64| -> f64 { history.sample_array(data, y).unwrap_or(0.0) };

    // base by composite Simpson on a grid four times finer than x
    let first = &history.frames[0];
    let cells = ((2.0 * reach / history.x.spacing()).ceil() as usize * 4).max(2);
    let m = cells + cells % 2;
    let h = 2.0 * reach / m as f64;
    let mut base = 0.0;
    for k in 0..=m {
        let wt = if k == 0 || k == m { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
        base += wt * sample(&first.eps_tilde, x - reach + k as f64 * h);
    }
    base *= h / 3.0 / c;

    let mut right = 0.0;
    let mut left = 0.0;
    let mut kp = 0.0;
    let mut km = 0.0;
    for n in 0..idx {
        let (a, b) = (&history.frames[n], &history.frames[n + 1]);
        let dt = b.t - a.t;
        let edge = |fr: &crate::diagnostics::Frame| {
            let yr = x + c * (t - fr.t);
            let yl = x - c * (t - fr.t);
            let r = sample(&fr.eps_tilde, yr) + sample(&fr.mom_tilde, yr) / c;
            let l = sample(&fr.eps_tilde, yl) - sample(&fr.mom_tilde, yl) / c;
            (r, l, sample(&fr.kplus, yr), sample(&fr.kminus, yl))
        };
        let ea = edge(a);
        let eb = edge(b);
        right += 0.5 * dt * (ea.0 + eb.0);
        left += 0.5 * dt * (ea.1 + eb.1);
        kp += 0.5 * dt * (ea.2 + eb.2);
        km += 0.5 * dt * (ea.3 + eb.3);
    }
    Ok(TriangleResult {
        apex: (t, x),
        base,
        right_edge: right,
        left_edge: left,
        residual: base - right - left,
        k_plus_edge: kp,
        k_minus_edge: km,
        clipped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeReport {
    /// Constant term from the slow zone `|p| <= 1`.
    pub a: f64,
    /// Multiplier of the weighted moments from the zones `|p| >= 1`.
    pub b: f64,
    /// `max_x (|j2| - a - b k+)` and the same with `k-`; nonpositive when
    /// the inequality holds.
    pub worst_plus: f64,
    pub worst_minus: f64,
    pub max_j2: f64,
    pub holds: bool,
}

/// Check `|j2(x)| <= a + b k+-(x)` at every node, with the constants
/// assembled from the three momentum zones:
/// `a = sum_a |e_a| fmax_a area(|p| <= 1) / m_a` and
/// `b = max_a |e_a| max(4 (m_a^2 + 1) / m_a^2, 2 (m_a^2 + 1) / (m_a c))`.
pub fn j2_k_bridge_check(
    j2: &[f64],
    energy: &EnergyDiagnostics,
    species: &[SpeciesParams],
    ceilings: &[f64],
    grid: &PhaseSpaceGrid,
    c: LightSpeed,
) -> BridgeReport {
    let w = grid.momentum_weights();
    let mut slow_area = 0.0;
    for k1 in 0..grid.p1.n {
        for k2 in 0..grid.p2.n {
            let p = grid.momentum(k1, k2);
            if p[0].hypot(p[1]) <= 1.0 {
                slow_area += w[k1 * grid.p2.n + k2];
            }
        }
    }
    let a: f64 = species
        .iter()
        .zip(ceilings)
        .map(|(sp, fm)| sp.charge.abs() * fm * slow_area / sp.mass)
        .sum();
    let b = species
        .iter()
        .map(|sp| {
            let m = sp.mass;
            let mid = 4.0 * (m * m + 1.0) / (m * m);
            let fast = match c {
                LightSpeed::Finite(c) => 2.0 * (m * m + 1.0) / (m * c),
                LightSpeed::Infinite => 0.0,
            };
            sp.charge.abs() * mid.max(fast)
        })
        .fold(0.0, f64::max);
    // slack for rounding in the quadratures
    let tol = |v: f64| 1e-12 * v.abs().max(a);
    let mut worst_plus = f64::NEG_INFINITY;
    let mut worst_minus = f64::NEG_INFINITY;
    let mut holds = true;
    for i in 0..j2.len() {
        let jp = j2[i].abs() - a - b * energy.kplus[i];
        let jm = j2[i].abs() - a - b * energy.kminus[i];
        worst_plus = worst_plus.max(jp);
        worst_minus = worst_minus.max(jm);
        if jp > tol(j2[i]) || jm > tol(j2[i]) {
            holds = false;
        }
    }
    BridgeReport { a, b, worst_plus, worst_minus, max_j2: sup(j2), holds }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaRegion {
    pub d0: f64,
    pub m0: f64,
}

impl LambdaRegion {
    /// `D0 = R0 + (1 + T) sup (Q + Q_inf)`.
    pub fn from_supports(r0: f64, t_final: f64, q_sup_sum: f64, species: &[SpeciesParams]) -> Self {
        let m0 = species.iter().map(|s| s.mass).fold(f64::INFINITY, f64::min);
        Self { d0: r0 + (1.0 + t_final) * q_sup_sum, m0 }
    }

    #[inline]
    pub fn contains(&self, t: f64, x: f64) -> bool {
        x.abs() >= self.d0 * (1.0 + t / self.m0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaSup {
    pub value: f64,
    /// Number of stored `(t, x)` nodes inside the region.
    pub nodes: usize,
    /// No stored node lies in the region; the far field is unobserved.
    pub empty: bool,
}

/// `sup |E1| + |E2| + |B|` over recorded nodes inside the region, up to
/// time `t_max`.
pub fn lambda_sup(history: &History, region: &LambdaRegion, t_max: f64) -> LambdaSup {
    let xs = history.x.nodes();
    let mut value = 0.0f64;
    let mut nodes = 0;
    for fr in history.frames.iter().filter(|f| f.t <= t_max + 1e-12) {
        for (i, &x) in xs.iter().enumerate() {
            if region.contains(fr.t, x) {
                nodes += 1;
                value = value.max(fr.e1[i].abs() + fr.e2[i].abs() + fr.b[i].abs());
            }
        }
    }
    LambdaSup { value, nodes, empty: nodes == 0 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorNorms {
    pub h_sup: Vec<f64>,
    pub e1_gap: f64,
    pub e2_sup: f64,
    pub b_sup: f64,
}

impl ErrorNorms {
    /// `max_a sup |f_a - f_a^inf| + sup |E1 - E1^inf| + sup |E2| + sup |B|`.
    pub fn total(&self) -> f64 {
        self.h_sup.iter().copied().fold(0.0, f64::max) + self.e1_gap + self.e2_sup + self.b_sup
    }

    /// Componentwise maximum, for sups over time.
    pub fn merge(&mut self, other: &ErrorNorms) {
        for (a, b) in self.h_sup.iter_mut().zip(&other.h_sup) {
            *a = a.max(*b);
        }
        self.e1_gap = self.e1_gap.max(other.e1_gap);
        self.e2_sup = self.e2_sup.max(other.e2_sup);
        self.b_sup = self.b_sup.max(other.b_sup);
    }
}

/// Sup-norm distance between two states on the same grid. The transverse
/// entries use the running maxima, so departed radiation still counts.
pub fn error_norms(a: &SimState, grid_a: &PhaseSpaceGrid, b: &SimState, grid_b: &PhaseSpaceGrid) -> Result<ErrorNorms> {
    grid_a.ensure_same(grid_b)?;
    if a.f.n_species() != b.f.n_species() {
        return Err(Error::GridMismatch(format!(
            "{} species vs {}",
            a.f.n_species(),
            b.f.n_species()
        )));
    }
    let h_sup = a
        .f
        .values
        .iter()
        .zip(&b.f.values)
        .map(|(u, v)| u.par_iter().zip(v.par_iter()).map(|(x, y)| (x - y).abs()).reduce(|| 0.0, f64::max))
        .collect();
    let e1_gap = a.fields.e1.iter().zip(&b.fields.e1).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    Ok(ErrorNorms {
        h_sup,
        e1_gap,
        e2_sup: a.fields.e2_runmax.max(b.fields.e2_runmax),
        b_sup: a.fields.b_runmax.max(b.fields.b_runmax),
    })
}

/// Ampere residual over the whole recorded history.
pub fn history_ampere_residual(history: &History) -> Result<f64> {
    let dt = history
        .frame_dt()
        .ok_or_else(|| Error::HistoryTooShort("ampere residual needs uniformly spaced frames".into()))?;
    let e1: Vec<Vec<f64>> = history.frames.iter().map(|f| f.e1.clone()).collect();
    let j1: Vec<Vec<f64>> = history.frames.iter().map(|f| f.j1.clone()).collect();
    ampere_residual(&e1, &j1, dt)
}

/// [`history_ampere_residual`] divided by `sup |4 pi j1|` over the history.
pub fn history_ampere_residual_scaled(history: &History) -> Result<f64> {
    let raw = history_ampere_residual(history)?;
    let scale = history.frames.iter().map(|f| 4.0 * PI * sup(&f.j1)).fold(0.0, f64::max);
    Ok(if scale > 0.0 { raw / scale } else { raw })
}

/// `|E(t) - E(0) + int_0^t (m_tilde(X) - m_tilde(-X)) dtau| / E(0)` at the
/// last frame, with the boundary flux integrated by the trapezoid rule.
pub fn energy_drift(history: &History) -> f64 {
    let n = history.frames.len();
    if n < 2 {
        return 0.0;
    }
    let last = history.x.n - 1;
    let flux = |f: &Frame| f.mom_tilde[last] - f.mom_tilde[0];
    let mut out = 0.0;
    for k in 0..n - 1 {
        let (a, b) = (&history.frames[k], &history.frames[k + 1]);
        out += 0.5 * (b.t - a.t) * (flux(a) + flux(b));
    }
    let e0 = history.frames[0].total_eps_tilde;
    let e1 = history.frames[n - 1].total_eps_tilde;
    (e1 - e0 + out).abs() / e0.abs().max(f64::MIN_POSITIVE)
}

/// Largest relative change of the per-species perturbed mass budget (the
/// domain plus what has left through its ends), relative to its initial
/// magnitude.
pub fn mass_drift(history: &History) -> Vec<f64> {
    drift_of(history, Frame::mass_budget)
}

/// [`mass_drift`] counting only the mass inside the domain.
pub fn mass_drift_domain(history: &History) -> Vec<f64> {
    drift_of(history, |f, a| f.perturbed_mass[a])
}

fn drift_of(history: &History, mass: impl Fn(&Frame, usize) -> f64) -> Vec<f64> {
    let Some(first) = history.frames.front() else {
        return vec![];
    };
    (0..first.perturbed_mass.len())
        .map(|a| {
            let m0 = mass(first, a);
            let scale = m0.abs().max(f64::MIN_POSITIVE);
            history.frames.iter().map(|f| (mass(f, a) - m0).abs() / scale).fold(0.0, f64::max)
        })
        .collect()
}

/// Largest `|int rho dx + exterior charge|` over the history.
pub fn charge_residual(history: &History) -> f64 {
    let w = history.x.trapezoid_weights();
    history
        .frames
        .iter()
        .map(|f| (domain_charge(f, &w) + f.exterior_charge[0] + f.exterior_charge[1]).abs())
        .fold(0.0, f64::max)
}

/// Largest `|int rho dx|` over the history.
pub fn charge_residual_domain(history: &History) -> f64 {
    let w = history.x.trapezoid_weights();
    history.frames.iter().map(|f| domain_charge(f, &w).abs()).fold(0.0, f64::max)
}

fn domain_charge(f: &Frame, w: &[f64]) -> f64 {
    f.rho.iter().zip(w).map(|(r, w)| r * w).sum()
}
