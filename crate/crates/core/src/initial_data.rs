//! Non-decaying initial data: a spatially uniform background `F(p)` per
//! species, a compactly supported perturbation near the origin, and the
//! longitudinal field that is compatible with the resulting charge density.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Axis, PhaseSpaceGrid};
use crate::kinematics::{LightSpeed, SpeciesParams};
use crate::maxwell::{compute_moments, SourceMoments};

/// `int_{-1}^{1} (1 - s^2)^3 ds`
const BUMP_INTEGRAL: f64 = 32.0 / 35.0;

/// `(1 - s^2)^3` on `|s| < 1`, zero outside. C^2 with compact support.
#[inline]
pub fn bump(s: f64) -> f64 {
    let q = 1.0 - s * s;
    if q > 0.0 {
        q * q * q
    } else {
        0.0
    }
}

/// Closed form of a species background `F(p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BackgroundShape {
    /// `A (1 - |p - u|^2 / r^2)^3`
    RadialBump { amplitude: f64, radius: f64, center: [f64; 2] },
    /// `A (1 - p1^2/h^2)^3 (1 - p2^2/h^2)^3`, separable in p1 and p2.
    TensorBump { amplitude: f64, half_width: f64 },
    Empty,
}

impl BackgroundShape {
    #[inline]
    pub fn eval(&self, p: [f64; 2]) -> f64 {
        match *self {
            BackgroundShape::RadialBump { amplitude, radius, center } => {
                let d1 = p[0] - center[0];
                let d2 = p[1] - center[1];
                let s2 = (d1 * d1 + d2 * d2) / (radius * radius);
                if s2 < 1.0 {
                    let q = 1.0 - s2;
                    amplitude * q * q * q
                } else {
                    0.0
                }
            }
            BackgroundShape::TensorBump { amplitude, half_width } => {
                amplitude * bump(p[0] / half_width) * bump(p[1] / half_width)
            }
            BackgroundShape::Empty => 0.0,
        }
    }

    /// Smallest radius outside which the shape vanishes.
    pub fn support_radius(&self) -> f64 {
        match *self {
            BackgroundShape::RadialBump { radius, center, .. } => radius + center[0].hypot(center[1]),
            BackgroundShape::TensorBump { half_width, .. } => half_width * 2f64.sqrt(),
            BackgroundShape::Empty => 0.0,
        }
    }

    /// Exact `int F dp`.
    pub fn mass(&self) -> f64 {
        match *self {
            BackgroundShape::RadialBump { amplitude, radius, .. } => amplitude * PI * radius * radius / 4.0,
            BackgroundShape::TensorBump { amplitude, half_width } => {
                amplitude * (half_width * BUMP_INTEGRAL).powi(2)
            }
            BackgroundShape::Empty => 0.0,
        }
    }

    /// Exact `int F p dp`.
    pub fn first_moment(&self) -> [f64; 2] {
        match *self {
            BackgroundShape::RadialBump { center, .. } => {
                let m = self.mass();
                [m * center[0], m * center[1]]
            }
            _ => [0.0, 0.0],
        }
    }

    /// Normalised transverse coordinate used by the tilted perturbation; odd
    /// about the centre of the shape and bounded by 1 on its support.
    #[inline]
    fn tilt_coordinate(&self, p: [f64; 2]) -> f64 {
        match *self {
            BackgroundShape::RadialBump { radius, center, .. } => (p[1] - center[1]) / radius,
            BackgroundShape::TensorBump { half_width, .. } => p[1] / half_width,
            BackgroundShape::Empty => 0.0,
        }
    }
}

/// Spatial perturbation of one species:
/// `f0 = F(p) [1 + g(x) (density + drift * t(p))]` where
/// `g(x) = bump(x / (width R0)) / width` and `t(p)` is the odd transverse
/// coordinate of the background shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub density: f64,
    pub drift: f64,
    pub width: f64,
}

impl Default for Perturbation {
    fn default() -> Self {
        Self { density: 0.0, drift: 0.0, width: 1.0 }
    }
}

impl Perturbation {
    #[inline]
    fn envelope(&self, x: f64, r0: f64) -> f64 {
        bump(x / (self.width * r0)) / self.width
    }

}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    /// Radial cubic-bump backgrounds with bump perturbations.
    NeutralTwoSpecies,
    /// Separable backgrounds and purely density perturbations: every p2
    /// slice is a multiple of the same `(x, p1)` function.
    Factorized,
    Vacuum,
}

impl ProfileKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "neutral-two-species" => Ok(ProfileKind::NeutralTwoSpecies),
            "factorized" => Ok(ProfileKind::Factorized),
            "vacuum" => Ok(ProfileKind::Vacuum),
            other => Err(Error::Config(format!("unknown profile {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeciesProfile {
    pub params: SpeciesParams,
    pub amplitude: f64,
    /// Offset of the background centre in momentum space (radial shape only).
    pub center: [f64; 2],
    pub perturbation: Perturbation,
}

/// Named built-in profile plus its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec {
    pub kind: ProfileKind,
    pub r0: f64,
    pub q0: f64,
    pub species: Vec<SpeciesProfile>,
    /// Peak of the initial transverse electric field, `bump(x/R0)` shaped.
    pub e2_amplitude: f64,
    pub b_amplitude: f64,
}

impl ProfileSpec {
    pub fn shape(&self, alpha: usize) -> BackgroundShape {
        let sp = &self.species[alpha];
        match self.kind {
            ProfileKind::NeutralTwoSpecies => {
                let off = sp.center[0].hypot(sp.center[1]);
                BackgroundShape::RadialBump {
                    amplitude: sp.amplitude,
                    radius: self.q0 - off,
                    center: sp.center,
                }
            }
            ProfileKind::Factorized => BackgroundShape::TensorBump {
                amplitude: sp.amplitude,
                half_width: self.q0 / 2f64.sqrt(),
            },
            ProfileKind::Vacuum => BackgroundShape::Empty,
        }
    }

    pub fn species_params(&self) -> Vec<SpeciesParams> {
        self.species.iter().map(|s| s.params.clone()).collect()
    }

    /// Closed-form `f0` of species `alpha`, before the discrete neutrality
    /// projection.
    pub fn f0(&self, alpha: usize, x: f64, p: [f64; 2]) -> f64 {
        let shape = self.shape(alpha);
        let fb = shape.eval(p);
        if fb == 0.0 {
            return 0.0;
        }
        let pert = &self.species[alpha].perturbation;
        let g = pert.envelope(x, self.r0);
        fb * (1.0 + g * (pert.density + pert.drift * shape.tilt_coordinate(p)))
    }

    pub fn e2_initial(&self, x: f64) -> f64 {
        self.e2_amplitude * bump(x / self.r0)
    }

    pub fn b_initial(&self, x: f64) -> f64 {
        self.b_amplitude * bump(x / self.r0)
    }

    fn validate_parameters(&self) -> Result<()> {
        if self.species.is_empty() {
            return Err(Error::Config("species list is empty".into()));
        }
        if !(self.r0 > 0.0 && self.q0 > 0.0) {
            return Err(Error::Config("R0 and Q0 must be positive".into()));
        }
        if self.kind == ProfileKind::Factorized {
            if let Some(sp) = self.species.iter().find(|s| s.perturbation.drift != 0.0) {
                return Err(Error::Config(format!(
                    "factorized profile admits no drift perturbation (species {:?})",
                    sp.params.label
                )));
            }
        }
        for (alpha, sp) in self.species.iter().enumerate() {
            let pert = &sp.perturbation;
            if !(pert.width > 0.0 && pert.width <= 1.0) {
                return Err(Error::Config(format!(
                    "perturbation width of species {:?} must lie in (0, 1]",
                    sp.params.label
                )));
            }
            if pert.density.abs() + pert.drift.abs() > pert.width {
                return Err(Error::Assumption {
                    condition: "nonnegativity",
                    detail: format!(
                        "species {:?}: |density| + |drift| = {} exceeds width {}",
                        sp.params.label,
                        pert.density.abs() + pert.drift.abs(),
                        pert.width
                    ),
                });
            }
            if sp.amplitude < 0.0 {
                return Err(Error::Assumption {
                    condition: "nonnegativity",
                    detail: format!("species {:?} has negative amplitude", sp.params.label),
                });
            }
            if let BackgroundShape::RadialBump { radius, .. } = self.shape(alpha) {
                if radius <= 0.0 {
                    return Err(Error::Config(format!(
                        "background centre of species {:?} lies outside Q0",
                        sp.params.label
                    )));
                }
            }
        }

        // Exact moment conditions on the closed forms.
        let mut charge = 0.0;
        let mut charge_scale = 0.0;
        let mut current = [0.0; 2];
        let mut current_scale = 0.0;
        let mut pert_charge = 0.0;
        let mut pert_scale = 0.0;
        for (alpha, sp) in self.species.iter().enumerate() {
            let shape = self.shape(alpha);
            let e = sp.params.charge;
            let mass_f = shape.mass();
            charge += e * mass_f;
            charge_scale += e.abs() * mass_f;
            let mom = shape.first_moment();
            current[0] += e * mom[0] / sp.params.mass;
            current[1] += e * mom[1] / sp.params.mass;
            current_scale += e.abs() * mass_f * (self.q0 / sp.params.mass);
            let pc = e * sp.perturbation.density * mass_f * self.r0 * BUMP_INTEGRAL;
            pert_charge += pc;
            pert_scale += pc.abs();
        }
        let tol = 1e-12;
        if charge.abs() > tol * charge_scale.max(f64::MIN_POSITIVE) {
            return Err(Error::Assumption {
                condition: "background-neutrality",
                detail: format!("sum of e int F dp = {charge:.6e}"),
            });
        }
        let cur = current[0].hypot(current[1]);
        if cur > tol * current_scale.max(f64::MIN_POSITIVE) {
            return Err(Error::Assumption {
                condition: "background-current",
                detail: format!("sum of e int F p/m dp = ({:.6e}, {:.6e})", current[0], current[1]),
            });
        }
        if pert_charge.abs() > tol * pert_scale.max(f64::MIN_POSITIVE) {
            return Err(Error::Assumption {
                condition: "perturbation-neutrality",
                detail: format!("sum of e int int (f0 - F) dp dx = {pert_charge:.6e}"),
            });
        }
        Ok(())
    }
}

/// Tabulated backgrounds plus their closed forms.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundProfile {
    pub shapes: Vec<BackgroundShape>,
    /// `F^alpha` on the momentum plane, one table per species.
    pub tables: Vec<Vec<f64>>,
    pub q0: f64,
    pub r0: f64,
}

impl BackgroundProfile {
    pub fn tabulate(shapes: Vec<BackgroundShape>, grid: &PhaseSpaceGrid, q0: f64, r0: f64) -> Self {
        let tables = shapes
            .iter()
            .map(|shape| {
                let mut t = Vec::with_capacity(grid.plane_len());
                for k1 in 0..grid.p1.n {
                    for k2 in 0..grid.p2.n {
                        t.push(shape.eval(grid.momentum(k1, k2)));
                    }
                }
                t
            })
            .collect();
        Self { shapes, tables, q0, r0 }
    }
}

#[derive(Debug, Clone)]
pub struct InitialData {
    pub grid: PhaseSpaceGrid,
    pub species: Vec<SpeciesParams>,
    pub background: Arc<BackgroundProfile>,
    pub f0: Vec<Vec<f64>>,
    pub e1: Vec<f64>,
    pub e2: Vec<f64>,
    pub b: Vec<f64>,
    pub moments: SourceMoments,
}

/// Neutrality tolerance for `int rho dx`: `1e-10` per x cell, scaled by the
/// total absolute charge when that exceeds one.
pub fn neutrality_tolerance(axis: &Axis, abs_charge: f64) -> f64 {
    1e-10 * (axis.n - 1) as f64 * abs_charge.max(1.0)
}

/// Longitudinal field from the two-sided Gauss integral
/// `E1(x) = 2 pi (int_{-inf}^x rho - int_x^{inf} rho)`, evaluated with
/// cumulative trapezoid sums from both ends.
///
/// Nodes with no charge on one side get exactly zero, so the field vanishes
/// identically outside the support of `rho`.
pub fn gauss_e1(rho: &[f64], axis: &Axis) -> Result<Vec<f64>> {
    gauss_e1_open(rho, axis, [0.0, 0.0])
}

/// [`gauss_e1`] with `exterior[0]` and `exterior[1]` units of charge lying
/// beyond the left and right ends of the axis. Neutrality is required of
/// the total including the exterior charges.
pub fn gauss_e1_open(rho: &[f64], axis: &Axis, exterior: [f64; 2]) -> Result<Vec<f64>> {
    let n = rho.len();
    assert_eq!(n, axis.n, "rho length does not match the x axis");
    let h = axis.spacing();
    let mut left = vec![exterior[0]; n];
    for i in 1..n {
        left[i] = left[i - 1] + 0.5 * h * (rho[i - 1] + rho[i]);
    }
    let mut right = vec![exterior[1]; n];
    for i in (0..n - 1).rev() {
        right[i] = right[i + 1] + 0.5 * h * (rho[i] + rho[i + 1]);
    }
    let total = left[n - 1] + exterior[1];
    let abs_charge: f64 = rho.iter().map(|r| r.abs()).sum::<f64>() * h + exterior[0].abs() + exterior[1].abs();
    let tol = neutrality_tolerance(axis, abs_charge);
    if !total.is_finite() || total.abs() > tol {
        return Err(Error::Neutrality { total, tol });
    }

    let open = exterior != [0.0, 0.0];
    let first = rho.iter().position(|&r| r != 0.0);
    let last = rho.iter().rposition(|&r| r != 0.0);
    let mut e1 = vec![0.0; n];
    let band = match (first, last) {
        _ if open => 0..n,
        (Some(first), Some(last)) => first..last + 1,
        _ => 0..0,
    };
    for i in band {
        e1[i] = 2.0 * PI * (left[i] - right[i]);
    }
    Ok(e1)
}

/// Residual of the discrete Gauss law at interval midpoints,
/// `max |(E_{i+1} - E_i)/dx - 2 pi (rho_i + rho_{i+1})|`.
pub fn gauss_midpoint_residual(e1: &[f64], rho: &[f64], axis: &Axis) -> f64 {
    let h = axis.spacing();
    e1.windows(2)
        .zip(rho.windows(2))
        .map(|(e, r)| ((e[1] - e[0]) / h - 2.0 * PI * (r[0] + r[1])).abs())
        .fold(0.0, f64::max)
}

/// Residual of the Gauss law at nodes with centred differences,
/// `max |(E_{i+1} - E_{i-1})/(2 dx) - 4 pi rho_i|`; O(dx^2) for smooth rho.
pub fn gauss_nodal_residual(e1: &[f64], rho: &[f64], axis: &Axis) -> f64 {
    let h = axis.spacing();
    (1..e1.len() - 1)
        .map(|i| ((e1[i + 1] - e1[i - 1]) / (2.0 * h) - 4.0 * PI * rho[i]).abs())
        .fold(0.0, f64::max)
}

pub fn build_initial_data(spec: &ProfileSpec, grid: &PhaseSpaceGrid) -> Result<InitialData> {
    spec.validate_parameters()?;
    let shapes: Vec<BackgroundShape> = (0..spec.species.len()).map(|a| spec.shape(a)).collect();
    let q_support = shapes.iter().map(BackgroundShape::support_radius).fold(0.0, f64::max);
    if grid.x.half_width <= spec.r0 {
        return Err(Error::Config(format!(
            "x half-width {} must exceed R0 = {}",
            grid.x.half_width, spec.r0
        )));
    }
    if grid.p1.half_width < spec.q0 || grid.p2.half_width < spec.q0 || q_support > spec.q0 * (1.0 + 1e-12) {
        return Err(Error::Config(format!(
            "momentum box ({}, {}) must contain the background support Q0 = {}",
            grid.p1.half_width, grid.p2.half_width, spec.q0
        )));
    }

    let background = Arc::new(BackgroundProfile::tabulate(shapes, grid, spec.q0, spec.r0));
    let plane = grid.plane_len();
    let xs = grid.x.nodes();
    let mut f0: Vec<Vec<f64>> = Vec::with_capacity(spec.species.len());
    for alpha in 0..spec.species.len() {
        let mut f = vec![0.0; grid.len()];
        for (ix, &x) in xs.iter().enumerate() {
            let row = &mut f[ix * plane..(ix + 1) * plane];
            for k1 in 0..grid.p1.n {
                for k2 in 0..grid.p2.n {
                    row[k1 * grid.p2.n + k2] = spec.f0(alpha, x, grid.momentum(k1, k2));
                }
            }
        }
        f0.push(f);
    }

    project_perturbation_charge(spec, grid, &background, &mut f0, &xs);

    let species = spec.species_params();
    let moments = compute_moments(&f0, &species, grid, LightSpeed::Infinite, None);
    let mut moments_rel = moments.clone();
    // j depends on the speed of light; the data carries the limit current and
    // the simulation recomputes moments for its own c.
    moments_rel.j1 = moments.j1.clone();
    let e1 = gauss_e1(&moments.rho, &grid.x)?;
    let e2: Vec<f64> = xs.iter().map(|&x| spec.e2_initial(x)).collect();
    let b: Vec<f64> = xs.iter().map(|&x| spec.b_initial(x)).collect();

    let data = InitialData {
        grid: *grid,
        species,
        background,
        f0,
        e1,
        e2,
        b,
        moments: moments_rel,
    };
    let report = validate_assumptions(&data);
    if let Some(bad) = report.checks.iter().find(|c| !c.passed) {
        return Err(Error::Assumption {
            condition: bad.condition,
            detail: format!("residual {:.3e} > tolerance {:.3e}", bad.residual, bad.tolerance),
        });
    }
    Ok(data)
}

/// Remove the discretisation residue of the perturbation charge by rescaling
/// the density perturbations (shape-preserving, so the data stay smooth and
/// keep their support).
fn project_perturbation_charge(
    spec: &ProfileSpec,
    grid: &PhaseSpaceGrid,
    background: &BackgroundProfile,
    f0: &mut [Vec<f64>],
    xs: &[f64],
) {
    let wx = grid.x.trapezoid_weights();
    let wp = grid.momentum_weights();
    let plane = grid.plane_len();
    let residual: f64 = spec
        .species
        .iter()
        .enumerate()
        .map(|(a, sp)| sp.params.charge * perturbed_mass(&f0[a], &background.tables[a], &wx, &wp, plane))
        .sum();
    if residual == 0.0 {
        return;
    }
    let movable: Vec<usize> = spec
        .species
        .iter()
        .enumerate()
        .filter(|(_, sp)| sp.params.charge != 0.0 && sp.perturbation.density != 0.0)
        .map(|(a, _)| a)
        .collect();
    if movable.is_empty() {
        return;
    }
    let share = residual / movable.len() as f64;
    for &a in &movable {
        let sp = &spec.species[a];
        let table = &background.tables[a];
        // shape g(x) F(p); its discrete integral normalises the correction
        let mut norm = 0.0;
        for (ix, &x) in xs.iter().enumerate() {
            let g = sp.perturbation.envelope(x, spec.r0);
            if g == 0.0 {
                continue;
            }
            let s: f64 = table.iter().zip(&wp).map(|(f, w)| f * w).sum();
            norm += wx[ix] * g * s;
        }
        if norm == 0.0 {
            continue;
        }
        let scale = share / (sp.params.charge * norm);
        for (ix, &x) in xs.iter().enumerate() {
            let g = sp.perturbation.envelope(x, spec.r0);
            if g == 0.0 {
                continue;
            }
            let row = &mut f0[a][ix * plane..(ix + 1) * plane];
            for (v, fb) in row.iter_mut().zip(table) {
                *v -= scale * g * fb;
            }
        }
    }
}

fn perturbed_mass(f: &[f64], fb: &[f64], wx: &[f64], wp: &[f64], plane: usize) -> f64 {
    f.chunks(plane)
        .zip(wx)
        .map(|(row, w)| w * row.iter().zip(fb).zip(wp).map(|((v, b), q)| q * (v - b)).sum::<f64>())
        .sum()
}

/// `int int (f - F) dp dx` for one species.
pub fn species_perturbed_mass(f: &[f64], fb: &[f64], grid: &PhaseSpaceGrid) -> f64 {
    perturbed_mass(f, fb, &grid.x.trapezoid_weights(), &grid.momentum_weights(), grid.plane_len())
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionCheck {
    pub condition: &'static str,
    pub description: &'static str,
    pub passed: bool,
    pub residual: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<AssumptionCheck>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, condition: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.condition == condition)
    }

    pub fn failed(&self) -> Vec<&AssumptionCheck> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

/// Check every structural assumption on the data and report the measured
/// residual of each. Never fails.
pub fn validate_assumptions(data: &InitialData) -> ValidationReport {
    let grid = &data.grid;
    let plane = grid.plane_len();
    let xs = grid.x.nodes();
    let wx = grid.x.trapezoid_weights();
    let wp = grid.momentum_weights();
    let r0 = data.background.r0;
    let q0 = data.background.q0;
    let fmax = data.f0.iter().flat_map(|f| f.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    let mut checks = Vec::new();

    let mut check = |condition, description, residual: f64, tolerance: f64| {
        checks.push(AssumptionCheck {
            condition,
            description,
            passed: residual.is_finite() && residual <= tolerance,
            residual,
            tolerance,
        });
    };

    // outside |x| >= R0: f0 = F, no transverse field
    let mut far = 0.0f64;
    for (ix, &x) in xs.iter().enumerate() {
        if x.abs() < r0 {
            continue;
        }
        for (f, fb) in data.f0.iter().zip(&data.background.tables) {
            for (v, b) in f[ix * plane..(ix + 1) * plane].iter().zip(fb) {
                far = far.max((v - b).abs());
            }
        }
        far = far.max(data.e2[ix].abs()).max(data.b[ix].abs());
    }
    check("far-field-background", "f0 = F and E2 = B = 0 for |x| >= R0", far, 1e-14 * fmax.max(1.0));

    // momentum support inside |p| < Q0
    let mut outside = 0.0f64;
    for k1 in 0..grid.p1.n {
        for k2 in 0..grid.p2.n {
            let p = grid.momentum(k1, k2);
            if p[0].hypot(p[1]) < q0 {
                continue;
            }
            let k = k1 * grid.p2.n + k2;
            for (f, fb) in data.f0.iter().zip(&data.background.tables) {
                outside = outside.max(fb[k].abs());
                for ix in 0..grid.x.n {
                    outside = outside.max(f[ix * plane + k].abs());
                }
            }
        }
    }
    check("momentum-support", "f0 = F = 0 for |p| >= Q0", outside, 0.0);

    let mut neg = 0.0f64;
    for f in &data.f0 {
        for &v in f {
            neg = neg.max(-v);
        }
    }
    check("nonnegativity", "f0 >= 0", neg, 0.0);

    // background moments
    let mut charge = 0.0;
    let mut charge_scale = 0.0;
    let mut cur = [0.0; 2];
    let mut cur_scale = 0.0;
    for (sp, fb) in data.species.iter().zip(&data.background.tables) {
        let mut m0 = 0.0;
        let mut m1 = [0.0; 2];
        let mut mabs = 0.0;
        for k1 in 0..grid.p1.n {
            for k2 in 0..grid.p2.n {
                let k = k1 * grid.p2.n + k2;
                let p = grid.momentum(k1, k2);
                let w = wp[k] * fb[k];
                m0 += w;
                m1[0] += w * p[0];
                m1[1] += w * p[1];
                mabs += w * p[0].hypot(p[1]);
            }
        }
        charge += sp.charge * m0;
        charge_scale += sp.charge.abs() * m0.abs();
        cur[0] += sp.charge * m1[0] / sp.mass;
        cur[1] += sp.charge * m1[1] / sp.mass;
        cur_scale += sp.charge.abs() * mabs / sp.mass;
    }
    check(
        "background-neutrality",
        "sum_a e_a int F_a dp = 0",
        charge.abs(),
        1e-10 * charge_scale.max(f64::MIN_POSITIVE),
    );
    check(
        "background-current",
        "sum_a e_a int F_a p / m_a dp = 0",
        cur[0].hypot(cur[1]),
        1e-10 * cur_scale.max(f64::MIN_POSITIVE),
    );

    let mut pert = 0.0;
    let mut pert_abs = 0.0;
    for ((sp, f), fb) in data.species.iter().zip(&data.f0).zip(&data.background.tables) {
        let m = perturbed_mass(f, fb, &wx, &wp, plane);
        pert += sp.charge * m;
        let mut a = 0.0;
        for (row, w) in f.chunks(plane).zip(&wx) {
            a += w * row.iter().zip(fb).zip(&wp).map(|((v, b), q)| q * (v - b).abs()).sum::<f64>();
        }
        pert_abs += sp.charge.abs() * a;
    }
    check(
        "perturbation-neutrality",
        "sum_a e_a int int (f0_a - F_a) dp dx = 0",
        pert.abs(),
        neutrality_tolerance(&grid.x, pert_abs),
    );

    let rho = &data.moments.rho;
    let rho_max = rho.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let e1_max = data.e1.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    check(
        "gauss-compatibility",
        "dE1/dx = 4 pi rho0 at interval midpoints",
        gauss_midpoint_residual(&data.e1, rho, &grid.x),
        1e-10 * (4.0 * PI * rho_max + e1_max / grid.dx()).max(1.0),
    );

    ValidationReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    pub(crate) fn two_species_spec() -> ProfileSpec {
        ProfileSpec {
            kind: ProfileKind::NeutralTwoSpecies,
            r0: 1.0,
            q0: 2.0,
            species: vec![
                SpeciesProfile {
                    params: SpeciesParams::new("electron", -1.0, 1.0).unwrap(),
                    amplitude: 1.0 / PI,
                    center: [0.0, 0.0],
                    perturbation: Perturbation { density: 0.2, drift: 0.2, width: 1.0 },
                },
                SpeciesProfile {
                    params: SpeciesParams::new("ion", 1.0, 2.0).unwrap(),
                    amplitude: 1.0 / PI,
                    center: [0.0, 0.0],
                    perturbation: Perturbation { density: 0.2, drift: -0.2, width: 0.5 },
                },
            ],
            e2_amplitude: 0.0,
            b_amplitude: 0.0,
        }
    }

    fn grid(nx: usize, np: usize) -> PhaseSpaceGrid {
        PhaseSpaceGrid::new(nx, np, np, 4.0, 2.4, 2.4).unwrap()
    }

    #[test]
    fn builtin_profile_passes_validation() {
        let data = build_initial_data(&two_species_spec(), &grid(65, 32)).unwrap();
        let report = validate_assumptions(&data);
        assert!(report.all_passed(), "{:?}", report.failed());
        assert_eq!(report.checks.len(), 7);
    }

    #[test]
    fn zero_perturbation_gives_zero_field() {
        let mut spec = two_species_spec();
        for s in &mut spec.species {
            s.perturbation = Perturbation::default();
        }
        let data = build_initial_data(&spec, &grid(65, 32)).unwrap();
        assert!(data.e1.iter().all(|&e| e == 0.0));
        assert!(data.moments.rho.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn e1_vanishes_outside_r0_exactly() {
        let g = grid(129, 24);
        let data = build_initial_data(&two_species_spec(), &g).unwrap();
        assert!(data.e1.iter().any(|&e| e != 0.0));
        for (ix, x) in g.x.nodes().into_iter().enumerate() {
            if x.abs() >= 1.0 {
                assert_eq!(data.e1[ix], 0.0, "E1 at x = {x}");
            }
        }
    }

    #[test]
    fn e1_matches_refined_cumulative_oracle() {
        // Oracle: rho from the closed form on a 16x finer x grid, cumulative
        // trapezoid summed directly, sampled at the coarse nodes. The error
        // of the built field must fall at second order.
        let spec = two_species_spec();
        let base = grid(65, 48);
        let fine_n = 16 * (base.x.n - 1) + 1;
        let fine = Axis::new(fine_n, base.x.half_width).unwrap();
        let wp = base.momentum_weights();
        let rho_fine: Vec<f64> = fine
            .nodes()
            .iter()
            .map(|&x| {
                let mut r = 0.0;
                for (a, sp) in spec.species.iter().enumerate() {
                    let mut s = 0.0;
                    for k1 in 0..base.p1.n {
                        for k2 in 0..base.p2.n {
                            s += wp[k1 * base.p2.n + k2] * spec.f0(a, x, base.momentum(k1, k2));
                        }
                    }
                    r += sp.params.charge * s;
                }
                r
            })
            .collect();
        let h = fine.spacing();
        let mut cum = vec![0.0; fine_n];
        for i in 1..fine_n {
            cum[i] = cum[i - 1] + 0.5 * h * (rho_fine[i - 1] + rho_fine[i]);
        }
        let total = cum[fine_n - 1];
        let err_on = |g: &PhaseSpaceGrid, stride: usize| {
            let data = build_initial_data(&spec, g).unwrap();
            let emax = data.e1.iter().fold(0.0f64, |m, e| m.max(e.abs()));
            let err = (0..g.x.n)
                .map(|i| (data.e1[i] - 2.0 * PI * (2.0 * cum[stride * i] - total)).abs())
                .fold(0.0, f64::max);
            err / emax
        };
        let coarse = err_on(&base, 16);
        let finer = err_on(&base.refined_x(), 8);
        assert!(coarse < 5e-2, "coarse relative error {coarse:e}");
        assert!(coarse / finer > 3.0, "{coarse:e} -> {finer:e}");
    }

    #[test]
    fn gauss_residual_is_second_order() {
        let spec = two_species_spec();
        let g1 = grid(65, 24);
        let g2 = g1.refined_x();
        let r = |g: &PhaseSpaceGrid| {
            let d = build_initial_data(&spec, g).unwrap();
            (
                gauss_nodal_residual(&d.e1, &d.moments.rho, &g.x),
                gauss_midpoint_residual(&d.e1, &d.moments.rho, &g.x),
            )
        };
        let (n1, m1) = r(&g1);
        let (n2, m2) = r(&g2);
        assert!(n1 / n2 >= 3.0, "nodal residual {n1:e} -> {n2:e}");
        assert!(m1 < 1e-9 && m2 < 1e-9);
    }

    #[test]
    fn gauss_zero_and_piecewise_examples() {
        let axis = Axis::new(41, 2.0).unwrap();
        assert!(gauss_e1(&vec![0.0; 41], &axis).unwrap().iter().all(|&e| e == 0.0));

        // rho = -1 on [-1, 0), +1 on [0, 1]; jump nodes carry the mean value
        let xs = axis.nodes();
        let h = axis.spacing();
        let rho: Vec<f64> = xs
            .iter()
            .map(|&x| {
                let near = |a: f64| (x - a).abs() < 1e-9;
                if near(-1.0) {
                    -0.5
                } else if near(0.0) {
                    0.0
                } else if near(1.0) {
                    0.5
                } else if (-1.0..0.0).contains(&x) {
                    -1.0
                } else if (0.0..1.0).contains(&x) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let e1 = gauss_e1(&rho, &axis).unwrap();
        let exact = |x: f64| {
            if x <= -1.0 || x >= 1.0 {
                0.0
            } else if x <= 0.0 {
                -4.0 * PI * (x + 1.0)
            } else {
                -4.0 * PI * (1.0 - x)
            }
        };
        for (i, &x) in xs.iter().enumerate() {
            if x < -1.0 - 0.5 * h || x > 1.0 + 0.5 * h {
                assert_eq!(e1[i], 0.0);
            }
            assert!((e1[i] - exact(x)).abs() <= 2.0 * PI * h + 1e-12, "x={x} e={}", e1[i]);
        }
        let mid = xs.iter().position(|x| x.abs() < 1e-12).unwrap();
        assert!((e1[mid] + 4.0 * PI).abs() <= 2.0 * PI * h * (1.0 + 1e-12));
        assert!(gauss_midpoint_residual(&e1, &rho, &axis) < 1e-12);
    }

    #[test]
    fn gauss_matches_two_sided_direct_summation() {
        let axis = Axis::new(201, 3.0).unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(17);
        let mut rho: Vec<f64> = (0..201).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // make the trapezoid total vanish
        let h = axis.spacing();
        let w = axis.trapezoid_weights();
        let total: f64 = rho.iter().zip(&w).map(|(r, w)| r * w).sum();
        let wsum: f64 = w.iter().sum();
        for r in &mut rho {
            *r -= total / wsum;
        }
        let e1 = gauss_e1(&rho, &axis).unwrap();
        for i in 0..201 {
            let left: f64 = (0..i).map(|j| 0.5 * h * (rho[j] + rho[j + 1])).sum();
            let right: f64 = (i..200).map(|j| 0.5 * h * (rho[j] + rho[j + 1])).sum();
            let oracle = 2.0 * PI * left - 2.0 * PI * right;
            let scale = oracle.abs().max(1.0);
            assert!((e1[i] - oracle).abs() <= 1e-12 * scale, "i={i}");
        }
    }

    #[test]
    fn open_gauss_counts_exterior_charge() {
        let axis = Axis::new(121, 2.0).unwrap();
        let h = axis.spacing();
        let mut rng = rand::rngs::StdRng::seed_from_u64(29);
        let rho: Vec<f64> = (0..121).map(|_| rng.gen_range(-0.5..1.0)).collect();
        let inside: f64 = (0..120).map(|j| 0.5 * h * (rho[j] + rho[j + 1])).sum();
        let exterior = [-0.3 * inside, -0.7 * inside];
        let e1 = gauss_e1_open(&rho, &axis, exterior).unwrap();
        for i in 0..121 {
            let cells: f64 = (0..120)
                .map(|j| if j < i { 1.0 } else { -1.0 } * 0.5 * h * (rho[j] + rho[j + 1]))
                .sum();
            let oracle = 2.0 * PI * (exterior[0] - exterior[1] + cells);
            assert!((e1[i] - oracle).abs() <= 1e-12 * oracle.abs().max(1.0), "i={i}");
        }
        assert!(gauss_midpoint_residual(&e1, &rho, &axis) < 1e-12);
        let unbalanced = [exterior[0], exterior[1] + 0.1];
        assert!(matches!(gauss_e1_open(&rho, &axis, unbalanced), Err(Error::Neutrality { .. })));
    }

    #[test]
    fn gauss_rejects_net_charge() {
        let axis = Axis::new(33, 1.0).unwrap();
        let rho = vec![1.0; 33];
        assert!(matches!(gauss_e1(&rho, &axis), Err(Error::Neutrality { .. })));
    }

    #[test]
    fn gauss_is_linear() {
        let axis = Axis::new(101, 2.0).unwrap();
        let xs = axis.nodes();
        let r1: Vec<f64> = xs.iter().map(|&x| x * bump(x / 1.5)).collect();
        let r2: Vec<f64> = xs.iter().map(|&x| (3.0 * x).sin() * bump(x / 1.2)).collect();
        let (a, b) = (0.7, -2.3);
        let mix: Vec<f64> = r1.iter().zip(&r2).map(|(u, v)| a * u + b * v).collect();
        let e1 = gauss_e1(&r1, &axis).unwrap();
        let e2 = gauss_e1(&r2, &axis).unwrap();
        let em = gauss_e1(&mix, &axis).unwrap();
        let scale = em.iter().fold(1.0f64, |m, e| m.max(e.abs()));
        for i in 0..101 {
            let lin = a * e1[i] + b * e2[i];
            assert!((em[i] - lin).abs() <= 4.0 * f64::EPSILON * scale * 8.0, "i={i}");
        }
    }

    #[test]
    fn amplitude_mismatch_flags_background_neutrality() {
        let g = grid(33, 24);
        let mut data = build_initial_data(&two_species_spec(), &g).unwrap();
        let mut bg = (*data.background).clone();
        for v in &mut bg.tables[1] {
            *v *= 1.1;
        }
        let electron_charge: f64 = bg.tables[0].iter().zip(g.momentum_weights()).map(|(f, w)| f * w).sum();
        data.background = Arc::new(bg);
        let report = validate_assumptions(&data);
        let c = report.get("background-neutrality").unwrap();
        assert!(!c.passed);
        assert!((c.residual - 0.1 * electron_charge).abs() < 1e-12);

        let mut spec = two_species_spec();
        spec.species[1].amplitude *= 1.1;
        match build_initial_data(&spec, &g) {
            Err(Error::Assumption { condition, .. }) => assert_eq!(condition, "background-neutrality"),
            other => panic!("expected neutrality failure, got {other:?}"),
        }
    }

    #[test]
    fn uncompensated_perturbation_flags_charge_condition() {
        let g = grid(33, 24);
        let mut data = build_initial_data(&two_species_spec(), &g).unwrap();
        let plane = g.plane_len();
        let mid = g.x.n / 2;
        for v in &mut data.f0[0][mid * plane..(mid + 1) * plane] {
            *v *= 1.05;
        }
        let report = validate_assumptions(&data);
        assert!(!report.get("perturbation-neutrality").unwrap().passed);

        let mut spec = two_species_spec();
        spec.species[1].perturbation.density = 0.0;
        match build_initial_data(&spec, &g) {
            Err(Error::Assumption { condition, .. }) => assert_eq!(condition, "perturbation-neutrality"),
            other => panic!("expected perturbation failure, got {other:?}"),
        }
    }

    #[test]
    fn drifting_background_flags_current_condition() {
        let mut spec = two_species_spec();
        spec.species[0].center = [0.0, 0.3];
        spec.species[1].center = [0.0, 0.3];
        match build_initial_data(&spec, &grid(33, 24)) {
            Err(Error::Assumption { condition, .. }) => assert_eq!(condition, "background-current"),
            other => panic!("expected current failure, got {other:?}"),
        }
    }

    #[test]
    fn rejects_negative_data() {
        let mut spec = two_species_spec();
        spec.species[1].perturbation.density = 0.5;
        spec.species[0].perturbation.density = 0.5;
        assert!(matches!(
            build_initial_data(&spec, &grid(33, 24)),
            Err(Error::Assumption { condition: "nonnegativity", .. })
        ));
    }
}
