//! Semi-Lagrangian Vlasov solver: Strang splitting of free transport in x
//! and the momentum kick, each done by backward characteristics and cubic
//! interpolation.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{PhaseSpaceGrid, NGHOST};
use crate::initial_data::{gauss_e1, gauss_e1_open, BackgroundProfile, InitialData};
use crate::interp::{cubic_weights, split};
use crate::kinematics::{gamma_raw, relativistic_velocity, LightSpeed, SpeciesParams};
use crate::maxwell::{update_transverse, FieldState, MomentTables, SourceMoments};

/// Largest displacement, in cells, that a backward trace may cover in one
/// stage without its stencil leaving the ghost bands.
pub const STENCIL_LIMIT: usize = NGHOST - 1;

#[derive(Debug, Clone)]
pub struct DistributionField {
    /// One array per species, x-major with p2 fastest.
    pub values: Vec<Vec<f64>>,
    pub background: Arc<BackgroundProfile>,
    /// Perturbed mass per species carried out through the left and right
    /// ends of the x axis.
    pub outflow: Vec<[f64; 2]>,
}

impl DistributionField {
    pub fn new(values: Vec<Vec<f64>>, background: Arc<BackgroundProfile>) -> Self {
        let outflow = vec![[0.0; 2]; values.len()];
        Self { values, background, outflow }
    }

    pub fn n_species(&self) -> usize {
        self.values.len()
    }

    /// `values - F` for one species.
    pub fn perturbation(&self, alpha: usize, plane: usize) -> Vec<f64> {
        let fb = &self.background.tables[alpha];
        self.values[alpha]
            .chunks(plane)
            .flat_map(|row| row.iter().zip(fb).map(|(v, b)| v - b))
            .collect()
    }
}

/// Everything the stepper needs that does not change during a run.
#[derive(Debug, Clone)]
pub struct Stepper {
    pub grid: PhaseSpaceGrid,
    pub species: Vec<SpeciesParams>,
    pub c: LightSpeed,
    /// Clamp ceiling per species, the maximum of the initial data.
    pub f_ceiling: Vec<f64>,
    /// Clamp ceiling per species and p2 node. In the limit p2 is a passive
    /// label and each slice keeps its own maximum; otherwise every entry is
    /// the species ceiling.
    pub slice_ceiling: Vec<Vec<f64>>,
    pub moment_tables: MomentTables,
    velocity1: Vec<Vec<f64>>,
    background: Arc<BackgroundProfile>,
    x_weights: Vec<f64>,
    p_weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SimState {
    pub t: f64,
    pub step: usize,
    pub f: DistributionField,
    pub fields: FieldState,
    pub moments: SourceMoments,
}

impl Stepper {
    pub fn new(
        grid: PhaseSpaceGrid,
        species: Vec<SpeciesParams>,
        c: LightSpeed,
        background: Arc<BackgroundProfile>,
        f_ceiling: Vec<f64>,
    ) -> Self {
        let moment_tables = MomentTables::new(&species, &grid, c, Some(&background));
        let velocity1 = species
            .iter()
            .map(|sp| {
                let mut v = Vec::with_capacity(grid.plane_len());
                for k1 in 0..grid.p1.n {
                    for k2 in 0..grid.p2.n {
                        v.push(relativistic_velocity(grid.momentum(k1, k2), sp, c)[0]);
                    }
                }
                v
            })
            .collect();
        let slice_ceiling = f_ceiling.iter().map(|&m| vec![m; grid.p2.n]).collect();
        Self {
            x_weights: grid.x.trapezoid_weights(),
            p_weights: grid.momentum_weights(),
            grid,
            species,
            c,
            f_ceiling,
            slice_ceiling,
            moment_tables,
            velocity1,
            background,
        }
    }

    /// Stepper and initial state for the data at speed of light `c`.
    pub fn from_initial(data: &InitialData, c: LightSpeed) -> Result<(Self, SimState)> {
        let ceiling: Vec<f64> = data
            .f0
            .iter()
            .zip(&data.background.tables)
            .map(|(f, fb)| f.iter().chain(fb).fold(0.0f64, |m, &v| m.max(v)))
            .collect();
        let mut stepper = Self::new(data.grid, data.species.clone(), c, data.background.clone(), ceiling);
        let f = DistributionField::new(data.f0.clone(), data.background.clone());
        if c.is_infinite() {
            stepper.slice_ceiling = slice_maxima(&f, &data.grid);
        }
        let moments = stepper.moments(&f);
        let e1 = gauss_e1(&moments.rho, &data.grid.x)?;
        let (e2, b) = if c.is_infinite() {
            (vec![0.0; data.grid.x.n], vec![0.0; data.grid.x.n])
        } else {
            (data.e2.clone(), data.b.clone())
        };
        let state = SimState { t: 0.0, step: 0, f, fields: FieldState::new(e1, e2, b), moments };
        Ok((stepper, state))
    }

    pub fn background(&self) -> &Arc<BackgroundProfile> {
        &self.background
    }

    /// Charge carried out through the left and right ends of the x axis.
    pub fn exterior_charge(&self, f: &DistributionField) -> [f64; 2] {
        let mut q = [0.0; 2];
        for (sp, out) in self.species.iter().zip(&f.outflow) {
            q[0] += sp.charge * out[0];
            q[1] += sp.charge * out[1];
        }
        q
    }

    pub fn moments(&self, f: &DistributionField) -> SourceMoments {
        self.moment_tables.moments(&f.values, &self.grid, Some(&f.background))
    }

    /// Free transport `f(x, p) <- f(x - V1(p) dt, p)` for every species.
    pub fn advect_x(&self, f: &mut DistributionField, dt: f64) -> Result<()> {
        if dt == 0.0 {
            return Ok(());
        }
        let dx = self.grid.dx();
        for (alpha, (values, outflow)) in f.values.iter_mut().zip(f.outflow.iter_mut()).enumerate() {
            let v1 = &self.velocity1[alpha];
            let vmax = v1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let cells = vmax * dt.abs() / dx;
            if cells > STENCIL_LIMIT as f64 {
                return Err(Error::Stencil { axis: "x", cells, limit: STENCIL_LIMIT, speed: vmax, dt });
            }
            let fb = &f.background.tables[alpha];
            let ceilings = &self.slice_ceiling[alpha];
            let (lost, out) = advect_species(values, fb, v1, dt / dx, ceilings, &self.grid, &self.x_weights, &self.p_weights);
            self.restore_species(values, fb, lost, self.f_ceiling[alpha]);
            outflow[0] += out[0];
            outflow[1] += out[1];
        }
        Ok(())
    }

    /// Momentum kick over `dt` with the fields frozen at their supplied
    /// values.
    pub fn kick_p(&self, f: &mut DistributionField, dt: f64, fields: &FieldState) -> Result<()> {
        if !fields.is_finite() {
            return Err(Error::NonFinite { what: "kick field input", step: 0 });
        }
        if dt == 0.0 {
            return Ok(());
        }
        let background = f.background.clone();
        for (alpha, values) in f.values.iter_mut().enumerate() {
            let sp = &self.species[alpha];
            let ceiling = self.f_ceiling[alpha];
            match self.c {
                LightSpeed::Infinite => {
                    let dp = self.grid.dp1();
                    let emax = fields.e1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    let force = sp.charge.abs() * emax;
                    let cells = force * dt.abs() / dp;
                    if cells > STENCIL_LIMIT as f64 {
                        return Err(Error::Stencil { axis: "p1", cells, limit: STENCIL_LIMIT, speed: force, dt });
                    }
                    let lost = kick_electrostatic(
                        values,
                        sp.charge * dt / dp,
                        &fields.e1,
                        &self.slice_ceiling[alpha],
                        ceiling,
                        &self.grid,
                        &self.p_weights,
                    );
                    self.restore_species(values, &background.tables[alpha], lost, ceiling);
                }
                LightSpeed::Finite(c) => {
                    let fmax = (0..fields.len())
                        .map(|i| fields.e1[i].abs() + fields.e2[i].abs() + fields.b[i].abs())
                        .fold(0.0f64, f64::max);
                    let force = sp.charge.abs() * fmax;
                    let dp = self.grid.dp1().min(self.grid.dp2());
                    let cells = force * dt.abs() / dp;
                    if cells > STENCIL_LIMIT as f64 {
                        return Err(Error::Stencil { axis: "p", cells, limit: STENCIL_LIMIT, speed: force, dt });
                    }
                    let lost = kick_lorentz(values, sp, 1.0 / c, dt, fields, ceiling, &self.grid, &self.p_weights);
                    self.restore_species(values, &background.tables[alpha], lost, ceiling);
                }
            }
        }
        Ok(())
    }

    /// Species-wide fallback for mass the local fixers could not place,
    /// spread over interior nodes that differ from the background.
    fn restore_species(&self, values: &mut [f64], fb: &[f64], lost: f64, ceiling: f64) {
        if lost == 0.0 {
            return;
        }
        let plane = self.grid.plane_len();
        let mut idx = Vec::new();
        let mut quad = Vec::new();
        for ix in NGHOST..self.grid.x.n - NGHOST {
            for k in 0..plane {
                let i = ix * plane + k;
                if values[i] != fb[k] {
                    idx.push(i);
                    quad.push(self.x_weights[ix] * self.p_weights[k]);
                }
            }
        }
        let mut tmp: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
        if restore_near(&mut tmp, |j| fb[idx[j] % plane], &quad, lost, ceiling) {
            for (i, v) in idx.into_iter().zip(tmp) {
                values[i] = v;
            }
        }
    }

    /// One Strang step: half transport, field update from the mid-step
    /// sources, full kick, half transport.
    pub fn step(&self, state: &mut SimState, dt: f64) -> Result<()> {
        self.advect_x(&mut state.f, 0.5 * dt).map_err(|e| at_step(e, state.step))?;
        let stage = self.moments(&state.f);
        let e1 = gauss_e1_open(&stage.rho, &self.grid.x, self.exterior_charge(&state.f))?;
        let kick_fields = match self.c {
            LightSpeed::Finite(c) => {
                let (e2_old, b_old) = (state.fields.e2.clone(), state.fields.b.clone());
                update_transverse(&mut state.fields, &stage.j2, dt, c, self.grid.dx());
                FieldState {
                    e1: e1.clone(),
                    e2: e2_old.iter().zip(&state.fields.e2).map(|(a, b)| 0.5 * (a + b)).collect(),
                    b: b_old.iter().zip(&state.fields.b).map(|(a, b)| 0.5 * (a + b)).collect(),
                    e2_runmax: 0.0,
                    b_runmax: 0.0,
                }
            }
            LightSpeed::Infinite => {
                let n = self.grid.x.n;
                FieldState { e1: e1.clone(), e2: vec![0.0; n], b: vec![0.0; n], e2_runmax: 0.0, b_runmax: 0.0 }
            }
        };
        if !kick_fields.is_finite() {
            return Err(Error::NonFinite { what: "fields", step: state.step });
        }
        self.kick_p(&mut state.f, dt, &kick_fields).map_err(|e| at_step(e, state.step))?;
        self.advect_x(&mut state.f, 0.5 * dt).map_err(|e| at_step(e, state.step))?;

        state.moments = self.moments(&state.f);
        state.fields.e1 = gauss_e1_open(&state.moments.rho, &self.grid.x, self.exterior_charge(&state.f))?;
        state.t += dt;
        state.step += 1;
        if !state.fields.is_finite() || state.moments.rho.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "fields", step: state.step });
        }
        Ok(())
    }
}

fn at_step(e: Error, step: usize) -> Error {
    match e {
        Error::NonFinite { what, .. } => Error::NonFinite { what, step },
        other => other,
    }
}

/// One relativistic Vlasov-Maxwell step on a freshly built stepper.
pub fn step_rvm(stepper: &Stepper, state: &mut SimState, dt: f64) -> Result<()> {
    debug_assert!(!stepper.c.is_infinite());
    stepper.step(state, dt)
}

/// One Vlasov-Poisson step; the stepper must use the infinite light speed.
pub fn step_vp(stepper: &Stepper, state: &mut SimState, dt: f64) -> Result<()> {
    debug_assert!(stepper.c.is_infinite());
    stepper.step(state, dt)
}

/// Add `lost` back onto `values` with weights `v (ceiling - v)`, which keep
/// every value inside `[0, ceiling]`. `quad` holds the quadrature weights.
fn restore_mass(values: &mut [f64], quad: &[f64], lost: f64, ceiling: f64) -> bool {
    restore_with(values, quad, lost, ceiling, |v, _| v * (ceiling - v))
}

/// As [`restore_mass`], with the weights also capped by
/// `ceiling |v - anchor|` so that values equal to their anchor stay put.
fn restore_near(values: &mut [f64], anchor: impl Fn(usize) -> f64, quad: &[f64], lost: f64, ceiling: f64) -> bool {
    restore_with(values, quad, lost, ceiling, |v, i| (v * (ceiling - v)).min(ceiling * (v - anchor(i)).abs()))
}

fn restore_with(values: &mut [f64], quad: &[f64], lost: f64, ceiling: f64, shape: impl Fn(f64, usize) -> f64) -> bool {
    if lost == 0.0 || ceiling <= 0.0 {
        return false;
    }
    let weights: Vec<f64> = values.iter().enumerate().map(|(i, &v)| shape(v, i).max(0.0)).collect();
    let room: f64 = weights.iter().zip(quad).map(|(s, w)| w * s).sum();
    if !(room > 0.0) || lost.abs() * ceiling > 0.5 * room {
        return false;
    }
    let lambda = lost / room;
    for (v, s) in values.iter_mut().zip(weights) {
        *v = (*v + lambda * s).clamp(0.0, ceiling);
    }
    true
}

#[allow(clippy::too_many_arguments)]
fn advect_species(
    values: &mut [f64],
    fb: &[f64],
    v1: &[f64],
    courant: f64,
    ceilings: &[f64],
    grid: &PhaseSpaceGrid,
    wx: &[f64],
    wp: &[f64],
) -> (f64, [f64; 2]) {
    let plane = grid.plane_len();
    let n2 = grid.p2.n;
    let nx = grid.x.n as isize;
    let stencil: Vec<(isize, [f64; 4])> = v1
        .iter()
        .map(|&v| {
            let (base, a) = split(-v * courant);
            (base, cubic_weights(a))
        })
        .collect();
    let old = values.to_vec();
    let mut clipped = vec![0.0; values.len()];
    values
        .par_chunks_mut(plane)
        .zip(clipped.par_chunks_mut(plane))
        .enumerate()
        .for_each(|(ix, (out, clip))| {
            if ix < NGHOST || ix >= grid.x.n - NGHOST {
                out.copy_from_slice(fb);
                return;
            }
            for k in 0..plane {
                let (base, w) = stencil[k];
                let fk = fb[k];
                let mut acc = 0.0;
                for (m, wm) in w.iter().enumerate() {
                    let j = ix as isize + base - 1 + m as isize;
                    if j >= 0 && j < nx {
                        let h = old[j as usize * plane + k] - fk;
                        if h != 0.0 {
                            acc += wm * h;
                        }
                    }
                }
                let raw = fk + acc;
                let v = raw.clamp(0.0, ceilings[k % n2]);
                out[k] = v;
                clip[k] = raw - v;
            }
        });

    // what the interpolant carries into the ghost bands leaves the domain
    let dx = grid.dx();
    let mut outflow = [0.0; 2];
    for k in 0..plane {
        let (base, w) = stencil[k];
        let fk = fb[k];
        for (side, range) in [(0, 0..NGHOST), (1, grid.x.n - NGHOST..grid.x.n)] {
            for ix in range {
                let mut acc = 0.0;
                for (m, wm) in w.iter().enumerate() {
                    let j = ix as isize + base - 1 + m as isize;
                    if j >= 0 && j < nx {
                        let h = old[j as usize * plane + k] - fk;
                        if h != 0.0 {
                            acc += wm * h;
                        }
                    }
                }
                outflow[side] += dx * wp[k] * acc;
            }
        }
    }

    let interior = NGHOST..grid.x.n - NGHOST;
    let mut unresolved = 0.0;
    for k in 0..plane {
        let lost: f64 = interior.clone().map(|ix| wx[ix] * clipped[ix * plane + k]).sum();
        if lost == 0.0 {
            continue;
        }
        let fk = fb[k];
        let mut cells: Vec<(usize, f64)> = interior
            .clone()
            .filter(|&ix| values[ix * plane + k] != fk)
            .map(|ix| (ix * plane + k, wx[ix]))
            .collect();
        let mut tmp: Vec<f64> = cells.iter().map(|&(idx, _)| values[idx]).collect();
        let weights: Vec<f64> = cells.iter().map(|&(_, w)| w).collect();
        if restore_near(&mut tmp, |_| fk, &weights, lost, ceilings[k % n2]) {
            for ((idx, _), v) in cells.drain(..).zip(tmp) {
                values[idx] = v;
            }
        } else {
            unresolved += wp[k] * lost;
        }
    }
    (unresolved, outflow)
}

/// Returns the mass, in the phase-space measure, that could not be put back.
fn kick_electrostatic(
    values: &mut [f64],
    shift_per_field: f64,
    e1: &[f64],
    ceilings: &[f64],
    ceiling: f64,
    grid: &PhaseSpaceGrid,
    wp: &[f64],
) -> f64 {
    let plane = grid.plane_len();
    let (n1, n2) = (grid.p1.n, grid.p2.n);
    let dp1 = grid.dp1();
    let n_x = grid.x.n;
    let wx = grid.x.trapezoid_weights();
    let w2 = grid.p2.trapezoid_weights();
    let per_plane: Vec<f64> = values.par_chunks_mut(plane).enumerate().map(|(ix, row)| {
        let shift = shift_per_field * e1[ix];
        if shift == 0.0 || ix < NGHOST || ix >= n_x - NGHOST {
            return 0.0;
        }
        let mut pending = 0.0;
        let (base, a) = split(-shift);
        let w = cubic_weights(a);
        let old = row.to_vec();
        let mut line = vec![0.0; n1];
        let unit = vec![1.0; n1];
        for k2 in 0..n2 {
            let top = ceilings[k2];
            let mut lost = 0.0;
            for (k1, out) in line.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (m, wm) in w.iter().enumerate() {
                    let j = k1 as isize + base - 1 + m as isize;
                    if j >= 0 && (j as usize) < n1 {
                        acc += wm * old[j as usize * n2 + k2];
                    }
                }
                let v = acc.clamp(0.0, top);
                lost += acc - v;
                *out = v;
            }
            if lost != 0.0 && !restore_mass(&mut line, &unit, lost, top) {
                pending += lost * dp1 * w2[k2];
            }
            for (k1, v) in line.iter().enumerate() {
                row[k1 * n2 + k2] = *v;
            }
        }
        if pending != 0.0 && restore_mass(row, wp, pending, ceiling) {
            pending = 0.0;
        }
        wx[ix] * pending
    }).collect();
    per_plane.iter().sum()
}

#[allow(clippy::too_many_arguments)]
fn kick_lorentz(
    values: &mut [f64],
    sp: &SpeciesParams,
    inv_c: f64,
    dt: f64,
    fields: &FieldState,
    ceiling: f64,
    grid: &PhaseSpaceGrid,
    wp: &[f64],
) -> f64 {
    let plane = grid.plane_len();
    let (n1, n2) = (grid.p1.n, grid.p2.n);
    let (dp1, dp2) = (grid.dp1(), grid.dp2());
    let n_x = grid.x.n;
    let wx = grid.x.trapezoid_weights();
    let (h1, h2) = (grid.p1.half_width, grid.p2.half_width);
    let e = sp.charge;
    let mass = sp.mass;
    let per_plane: Vec<f64> = values.par_chunks_mut(plane).enumerate().map(|(ix, row)| {
        let (e1, e2, b) = (fields.e1[ix], fields.e2[ix], fields.b[ix]);
        if (e1 == 0.0 && e2 == 0.0 && b == 0.0) || ix < NGHOST || ix >= n_x - NGHOST {
            return 0.0;
        }
        let force = |p: [f64; 2]| {
            let g = gamma_raw(p[0] * p[0] + p[1] * p[1], mass, inv_c);
            let bv = b * inv_c / g;
            [e * (e1 + p[1] * bv), e * (e2 - p[0] * bv)]
        };
        let old = row.to_vec();
        let before: f64 = old.iter().zip(wp).map(|(v, w)| v * w).sum();
        for k1 in 0..n1 {
            for k2 in 0..n2 {
                let p = grid.momentum(k1, k2);
                let f0 = force(p);
                let mid = [p[0] - 0.5 * dt * f0[0], p[1] - 0.5 * dt * f0[1]];
                let fm = force(mid);
                let foot = [p[0] - dt * fm[0], p[1] - dt * fm[1]];
                let u1 = (foot[0] + h1) / dp1;
                let u2 = (foot[1] + h2) / dp2;
                let raw = sample_plane(&old, n1, n2, u1, u2);
                row[k1 * n2 + k2] = raw.clamp(0.0, ceiling);
            }
        }
        let after: f64 = row.iter().zip(wp).map(|(v, w)| v * w).sum();
        let lost = before - after;
        if lost == 0.0 || restore_mass(row, wp, lost, ceiling) {
            0.0
        } else {
            wx[ix] * lost
        }
    }).collect();
    per_plane.iter().sum()
}

/// Tensor-product cubic interpolation on one momentum plane, zero outside.
#[inline]
fn sample_plane(plane: &[f64], n1: usize, n2: usize, u1: f64, u2: f64) -> f64 {
    let (b1, a1) = split(u1);
    let (b2, a2) = split(u2);
    let w1 = cubic_weights(a1);
    let w2 = cubic_weights(a2);
    let mut acc = 0.0;
    for (m1, wa) in w1.iter().enumerate() {
        let j1 = b1 - 1 + m1 as isize;
        if j1 < 0 || j1 as usize >= n1 {
            continue;
        }
        let line = &plane[j1 as usize * n2..(j1 as usize + 1) * n2];
        let mut s = 0.0;
        for (m2, wb) in w2.iter().enumerate() {
            let j2 = b2 - 1 + m2 as isize;
            if j2 >= 0 && (j2 as usize) < n2 {
                s += wb * line[j2 as usize];
            }
        }
        acc += wa * s;
    }
    acc
}

/// Free transport of a standalone field, for callers without a stepper.
pub fn advect_x(
    f: &mut DistributionField,
    grid: &PhaseSpaceGrid,
    species: &[SpeciesParams],
    dt: f64,
    c: LightSpeed,
) -> Result<()> {
    let stepper = standalone(f, grid, species, c);
    stepper.advect_x(f, dt)
}

/// Momentum kick of a standalone field, for callers without a stepper.
pub fn kick_p(
    f: &mut DistributionField,
    grid: &PhaseSpaceGrid,
    species: &[SpeciesParams],
    dt: f64,
    fields: &FieldState,
    c: LightSpeed,
) -> Result<()> {
    let stepper = standalone(f, grid, species, c);
    stepper.kick_p(f, dt, fields)
}

fn standalone(f: &DistributionField, grid: &PhaseSpaceGrid, species: &[SpeciesParams], c: LightSpeed) -> Stepper {
    let ceiling = f
        .values
        .iter()
        .zip(&f.background.tables)
        .map(|(v, fb)| v.iter().chain(fb).fold(0.0f64, |m, &x| m.max(x)))
        .collect();
    let mut stepper = Stepper::new(*grid, species.to_vec(), c, f.background.clone(), ceiling);
    if c.is_infinite() {
        stepper.slice_ceiling = slice_maxima(f, grid);
    }
    stepper
}

/// Per species, the largest value of `f` or `F` on each p2 slice.
fn slice_maxima(f: &DistributionField, grid: &PhaseSpaceGrid) -> Vec<Vec<f64>> {
    let n2 = grid.p2.n;
    f.values
        .iter()
        .zip(&f.background.tables)
        .map(|(v, fb)| {
            let mut top = vec![0.0f64; n2];
            for (k, &x) in v.iter().enumerate().chain(fb.iter().enumerate()) {
                top[k % n2] = top[k % n2].max(x);
            }
            top
        })
        .collect()
}

/// Fields as functions of `(t, x)`, for characteristic tracing.
pub trait FieldSampler {
    fn time_span(&self) -> (f64, f64);
    /// `(E1, E2, B)` at `(t, x)`, or `None` outside the stored domain.
    fn sample(&self, t: f64, x: f64) -> Option<[f64; 3]>;
}

/// Spatially and temporally uniform fields.
#[derive(Debug, Clone, Copy)]
pub struct UniformFields {
    pub e1: f64,
    pub e2: f64,
    pub b: f64,
    pub span: (f64, f64),
}

impl FieldSampler for UniformFields {
    fn time_span(&self) -> (f64, f64) {
        self.span
    }

    fn sample(&self, _t: f64, _x: f64) -> Option<[f64; 3]> {
        Some([self.e1, self.e2, self.b])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TraceDirection {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TracePoint {
    pub s: f64,
    pub x: f64,
    pub p: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CharacteristicTrace {
    pub species: usize,
    pub points: Vec<TracePoint>,
    /// The path left the stored domain (in x or in time) before reaching
    /// its end time.
    pub truncated: bool,
}

impl CharacteristicTrace {
    pub fn end(&self) -> &TracePoint {
        self.points.last().expect("trace has at least its start point")
    }
}

/// RK4 trace of the characteristic through `(t, x, p)` until `t_end`, with
/// `substeps` steps of equal length. Direction follows from `t_end`.
#[allow(clippy::too_many_arguments)]
pub fn trace_characteristic(
    start: (f64, f64, [f64; 2]),
    t_end: f64,
    substeps: usize,
    species: usize,
    params: &SpeciesParams,
    c: LightSpeed,
    fields: &dyn FieldSampler,
) -> CharacteristicTrace {
    let (t0, x0, p0) = start;
    let (lo, hi) = fields.time_span();
    let mut points = vec![TracePoint { s: t0, x: x0, p: p0 }];
    let inv_c = c.inv();
    let rhs = |s: f64, y: [f64; 3]| -> Option<[f64; 3]> {
        let [e1, e2, b] = fields.sample(s, y[0])?;
        let v = relativistic_velocity([y[1], y[2]], params, c);
        let e = params.charge;
        Some([v[0], e * (e1 + inv_c * v[1] * b), e * (e2 - inv_c * v[0] * b)])
    };
    let steps = substeps.max(1);
    let h = (t_end - t0) / steps as f64;
    let eps = 1e-12 * (hi - lo).abs().max(1.0);
    if t0 < lo - eps || t0 > hi + eps || t_end < lo - eps || t_end > hi + eps {
        return CharacteristicTrace { species, points, truncated: true };
    }
    let mut y = [x0, p0[0], p0[1]];
    for n in 0..steps {
        let s = t0 + n as f64 * h;
        let add = |y: [f64; 3], k: [f64; 3], a: f64| [y[0] + a * k[0], y[1] + a * k[1], y[2] + a * k[2]];
        let stage = || -> Option<[f64; 3]> {
            let k1 = rhs(s, y)?;
            let k2 = rhs(s + 0.5 * h, add(y, k1, 0.5 * h))?;
            let k3 = rhs(s + 0.5 * h, add(y, k2, 0.5 * h))?;
            let k4 = rhs(s + h, add(y, k3, h))?;
            Some([
                y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
                y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
                y[2] + h / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
            ])
        };
        match stage() {
            Some(next) => {
                y = next;
                let s_next = if n + 1 == steps { t_end } else { s + h };
                points.push(TracePoint { s: s_next, x: y[0], p: [y[1], y[2]] });
            }
            None => return CharacteristicTrace { species, points, truncated: true },
        }
    }
    CharacteristicTrace { species, points, truncated: false }
}

/// Growth bound per step of the transverse fields from a homogeneous
/// background: `4 pi dt |sum_a e_a int F_a V2 dp|`.
pub fn background_transverse_growth(stepper: &Stepper, dt: f64) -> f64 {
    let j2 = stepper.moment_tables.background.map(|m| m[2]).unwrap_or(0.0);
    4.0 * PI * dt * j2.abs()
}
