//! Field solver: `E1` from the Gauss integral of the charge density, and the
//! transverse pair `(E2, B)` through the light-cone variables `E2 +- B`,
//! which are transported exactly along rays of speed `+-c`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::PhaseSpaceGrid;
use crate::initial_data::{gauss_e1, BackgroundProfile};
use crate::interp;
use crate::kinematics::{relativistic_velocity, LightSpeed, SpeciesParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub e1: Vec<f64>,
    pub e2: Vec<f64>,
    pub b: Vec<f64>,
    /// Running maxima of `|E2|` and `|B|` over every step and node so far.
    pub e2_runmax: f64,
    pub b_runmax: f64,
}

impl FieldState {
    pub fn zeros(n: usize) -> Self {
        Self {
            e1: vec![0.0; n],
            e2: vec![0.0; n],
            b: vec![0.0; n],
            e2_runmax: 0.0,
            b_runmax: 0.0,
        }
    }

    pub fn new(e1: Vec<f64>, e2: Vec<f64>, b: Vec<f64>) -> Self {
        let mut s = Self { e1, e2, b, e2_runmax: 0.0, b_runmax: 0.0 };
        s.record_maxima();
        s
    }

    pub fn len(&self) -> usize {
        self.e1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e1.is_empty()
    }

    /// `E2 + B`
    pub fn g_plus(&self) -> Vec<f64> {
        self.e2.iter().zip(&self.b).map(|(e, b)| e + b).collect()
    }

    /// `E2 - B`
    pub fn g_minus(&self) -> Vec<f64> {
        self.e2.iter().zip(&self.b).map(|(e, b)| e - b).collect()
    }

    pub fn set_light_cone(&mut self, g_plus: &[f64], g_minus: &[f64]) {
        for i in 0..self.e2.len() {
            self.e2[i] = 0.5 * (g_plus[i] + g_minus[i]);
            self.b[i] = 0.5 * (g_plus[i] - g_minus[i]);
        }
        self.record_maxima();
    }

    pub fn record_maxima(&mut self) {
        self.e2_runmax = self.e2.iter().fold(self.e2_runmax, |m, v| m.max(v.abs()));
        self.b_runmax = self.b.iter().fold(self.b_runmax, |m, v| m.max(v.abs()));
    }

    pub fn e1_sup(&self) -> f64 {
        sup(&self.e1)
    }

    pub fn is_finite(&self) -> bool {
        self.e1.iter().chain(&self.e2).chain(&self.b).all(|v| v.is_finite())
    }
}

pub(crate) fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceMoments {
    pub rho: Vec<f64>,
    pub j1: Vec<f64>,
    pub j2: Vec<f64>,
}

impl SourceMoments {
    pub fn zeros(n: usize) -> Self {
        Self { rho: vec![0.0; n], j1: vec![0.0; n], j2: vec![0.0; n] }
    }
}

/// Quadrature weights times velocity components, tabulated once per run.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTables {
    /// `e w_k`, `e w_k V1(p_k)`, `e w_k V2(p_k)` per species.
    pub charge: Vec<Vec<f64>>,
    pub current1: Vec<Vec<f64>>,
    pub current2: Vec<Vec<f64>>,
    /// Moments of the backgrounds alone, constant in x.
    pub background: Option<[f64; 3]>,
}

impl MomentTables {
    pub fn new(
        species: &[SpeciesParams],
        grid: &PhaseSpaceGrid,
        c: LightSpeed,
        background: Option<&BackgroundProfile>,
    ) -> Self {
        let w = grid.momentum_weights();
        let mut charge = Vec::new();
        let mut current1 = Vec::new();
        let mut current2 = Vec::new();
        for sp in species {
            let mut q = Vec::with_capacity(w.len());
            let mut c1 = Vec::with_capacity(w.len());
            let mut c2 = Vec::with_capacity(w.len());
            for k1 in 0..grid.p1.n {
                for k2 in 0..grid.p2.n {
                    let wk = sp.charge * w[k1 * grid.p2.n + k2];
                    let v = relativistic_velocity(grid.momentum(k1, k2), sp, c);
                    q.push(wk);
                    c1.push(wk * v[0]);
                    c2.push(wk * v[1]);
                }
            }
            charge.push(q);
            current1.push(c1);
            current2.push(c2);
        }
        let background = background.map(|bg| {
            let mut m = [0.0; 3];
            for (a, table) in bg.tables.iter().enumerate() {
                m[0] += dot(&charge[a], table);
                m[1] += dot(&current1[a], table);
                m[2] += dot(&current2[a], table);
            }
            m
        });
        Self { charge, current1, current2, background }
    }

    pub fn moments(&self, f: &[Vec<f64>], grid: &PhaseSpaceGrid, background: Option<&BackgroundProfile>) -> SourceMoments {
        let plane = grid.plane_len();
        let nx = grid.x.n;
        let per_x: Vec<[f64; 3]> = (0..nx)
            .into_par_iter()
            .map(|ix| {
                let mut m = [0.0; 3];
                for (a, fa) in f.iter().enumerate() {
                    let row = &fa[ix * plane..(ix + 1) * plane];
                    match background {
                        Some(bg) => {
                            let fb = &bg.tables[a];
                            for k in 0..plane {
                                let h = row[k] - fb[k];
                                if h != 0.0 {
                                    m[0] += self.charge[a][k] * h;
                                    m[1] += self.current1[a][k] * h;
                                    m[2] += self.current2[a][k] * h;
                                }
                            }
                        }
                        None => {
                            m[0] += dot(&self.charge[a], row);
                            m[1] += dot(&self.current1[a], row);
                            m[2] += dot(&self.current2[a], row);
                        }
                    }
                }
                if let (Some(_), Some(bgm)) = (background, self.background) {
                    m[0] += bgm[0];
                    m[1] += bgm[1];
                    m[2] += bgm[2];
                }
                m
            })
            .collect();
        SourceMoments {
            rho: per_x.iter().map(|m| m[0]).collect(),
            j1: per_x.iter().map(|m| m[1]).collect(),
            j2: per_x.iter().map(|m| m[2]).collect(),
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Charge and current densities by trapezoid quadrature over the momentum
/// grid. With a background supplied, the moments are accumulated from
/// `f - F` plus the constant background moments, so nodes where `f = F`
/// contribute exactly the background value.
pub fn compute_moments(
    f: &[Vec<f64>],
    species: &[SpeciesParams],
    grid: &PhaseSpaceGrid,
    c: LightSpeed,
    background: Option<&BackgroundProfile>,
) -> SourceMoments {
    MomentTables::new(species, grid, c, background).moments(f, grid, background)
}

/// One exact ray step of the light-cone variables:
/// `G+(x) <- G+(x - c dt) - 4 pi dt j2(x - c dt/2)` and
/// `G-(x) <- G-(x + c dt) - 4 pi dt j2(x + c dt/2)`,
/// with zero inflow and zero current beyond the grid.
pub fn update_transverse(fields: &mut FieldState, j2: &[f64], dt: f64, c: f64, dx: f64) {
    let n = fields.len();
    let shift = c * dt / dx;
    let gp = fields.g_plus();
    let gm = fields.g_minus();
    let ((new_p, src_p), (new_m, src_m)) = rayon::join(
        || {
            let mut g = vec![0.0; n];
            let mut s = vec![0.0; n];
            interp::shift_into(&gp, shift, 0.0, &mut g);
            interp::shift_into(j2, 0.5 * shift, 0.0, &mut s);
            (g, s)
        },
        || {
            let mut g = vec![0.0; n];
            let mut s = vec![0.0; n];
            interp::shift_into(&gm, -shift, 0.0, &mut g);
            interp::shift_into(j2, -0.5 * shift, 0.0, &mut s);
            (g, s)
        },
    );
    let k = 4.0 * PI * dt;
    let gp: Vec<f64> = new_p.iter().zip(&src_p).map(|(g, s)| g - k * s).collect();
    let gm: Vec<f64> = new_m.iter().zip(&src_m).map(|(g, s)| g - k * s).collect();
    fields.set_light_cone(&gp, &gm);
}

/// `E1` from the current charge density; Gauss's law holds by construction.
pub fn update_e1(moments: &SourceMoments, grid: &PhaseSpaceGrid) -> Result<Vec<f64>> {
    gauss_e1(&moments.rho, &grid.x)
}

/// `max |(E1^{n+1} - E1^{n-1}) / (2 dt) + 4 pi j1^n|` over interior time
/// levels and all nodes.
pub fn ampere_residual(e1_series: &[Vec<f64>], j1_series: &[Vec<f64>], dt: f64) -> Result<f64> {
    if e1_series.len() < 3 || j1_series.len() != e1_series.len() {
        return Err(Error::HistoryTooShort(format!(
            "ampere residual needs at least 3 matching levels, got {} E1 and {} j1",
            e1_series.len(),
            j1_series.len()
        )));
    }
    let mut worst = 0.0f64;
    for n in 1..e1_series.len() - 1 {
        let (prev, next, j) = (&e1_series[n - 1], &e1_series[n + 1], &j1_series[n]);
        for i in 0..j.len() {
            let r = (next[i] - prev[i]) / (2.0 * dt) + 4.0 * PI * j[i];
            worst = worst.max(r.abs());
        }
    }
    Ok(worst)
}

/// [`ampere_residual`] divided by `max(sup |4 pi j1|, tiny)` over the series.
pub fn ampere_residual_scaled(e1_series: &[Vec<f64>], j1_series: &[Vec<f64>], dt: f64) -> Result<f64> {
    let raw = ampere_residual(e1_series, j1_series, dt)?;
    let scale = j1_series.iter().map(|j| 4.0 * PI * sup(j)).fold(0.0, f64::max);
    Ok(if scale > 0.0 { raw / scale } else { raw })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Axis;
    use crate::initial_data::bump;

    fn grid(nx: usize, np: usize) -> PhaseSpaceGrid {
        PhaseSpaceGrid::new(nx, np, np, 4.0, 4.0, 4.0).unwrap()
    }

    #[test]
    fn zero_distribution_has_zero_moments() {
        let g = grid(17, 16);
        let sp = vec![SpeciesParams::new("e", -1.0, 1.0).unwrap()];
        let f = vec![vec![0.0; g.len()]];
        for c in [LightSpeed::Infinite, LightSpeed::Finite(3.0)] {
            let m = compute_moments(&f, &sp, &g, c, None);
            assert!(m.rho.iter().chain(&m.j1).chain(&m.j2).all(|&v| v == 0.0));
        }
    }

    #[test]
    fn drifting_bump_has_bump_velocity() {
        // Oracle: a Gaussian centred at u has mean momentum u, so
        // j / rho = u / m in the limit.
        let g = grid(17, 96);
        let m = 2.0;
        let sp = vec![SpeciesParams::new("i", 1.0, m).unwrap()];
        let u = [0.4, -0.7];
        let mut f = vec![0.0; g.len()];
        for ix in 0..g.x.n {
            for k1 in 0..g.p1.n {
                for k2 in 0..g.p2.n {
                    let p = g.momentum(k1, k2);
                    let r2 = (p[0] - u[0]).powi(2) + (p[1] - u[1]).powi(2);
                    f[g.index(ix, k1, k2)] = (-r2 / 0.5).exp();
                }
            }
        }
        let mo = compute_moments(&[f], &sp, &g, LightSpeed::Infinite, None);
        for ix in 0..g.x.n {
            assert!((mo.j1[ix] / mo.rho[ix] - u[0] / m).abs() < 1e-8);
            assert!((mo.j2[ix] / mo.rho[ix] - u[1] / m).abs() < 1e-8);
        }
    }

    #[test]
    fn background_current_is_order_inverse_c_squared() {
        // For an isotropic background the limit current vanishes and the
        // finite-c current is bounded by e int F |p|^3 / (m^3 c^2) dp.
        let g = grid(9, 64);
        let sp = vec![SpeciesParams::new("e", -1.0, 1.0).unwrap()];
        let shape = crate::initial_data::BackgroundShape::RadialBump {
            amplitude: 1.0,
            radius: 2.0,
            center: [0.3, 0.0],
        };
        let bg = BackgroundProfile::tabulate(vec![shape], &g, 2.3, 1.0);
        let f = vec![bg.tables[0].repeat(g.x.n)];
        let w = g.momentum_weights();
        let limit = compute_moments(&f, &sp, &g, LightSpeed::Infinite, None).j1[0];
        let mut prev = f64::INFINITY;
        for c in [4.0, 8.0, 16.0, 32.0] {
            let j = compute_moments(&f, &sp, &g, LightSpeed::Finite(c), None).j1[0];
            let mut bound = 0.0;
            for k1 in 0..g.p1.n {
                for k2 in 0..g.p2.n {
                    let p = g.momentum(k1, k2);
                    let r = p[0].hypot(p[1]);
                    bound += w[k1 * g.p2.n + k2] * bg.tables[0][k1 * g.p2.n + k2] * r.powi(3) / c / c;
                }
            }
            let diff = (j - limit).abs();
            assert!(diff <= bound, "c={c}: {diff:e} > {bound:e}");
            assert!(diff < prev / 3.5);
            prev = diff;
        }
    }

    #[test]
    fn zero_source_is_a_pure_shift() {
        let axis = Axis::new(201, 10.0).unwrap();
        let xs = axis.nodes();
        let dx = axis.spacing();
        let profile: Vec<f64> = xs.iter().map(|&x| bump(x / 2.0)).collect();
        let mut fs = FieldState::new(vec![0.0; 201], profile.clone(), profile.clone());
        let (c, dt) = (3.0, 0.7 * dx / 3.0);
        let steps = 20;
        for _ in 0..steps {
            update_transverse(&mut fs, &vec![0.0; 201], dt, c, dx);
        }
        // E2 = B initially, so G- = 0 and G+ = 2 bump moves right at speed c
        let shift = c * dt * steps as f64;
        let mut err = 0.0f64;
        for (i, &x) in xs.iter().enumerate() {
            err = err.max((fs.e2[i] - bump((x - shift) / 2.0)).abs());
            err = err.max((fs.b[i] - bump((x - shift) / 2.0)).abs());
        }
        assert!(err < 2e-3, "err = {err:e}");
    }

    #[test]
    fn integer_shift_is_bit_exact() {
        let n = 64;
        let axis = Axis::new(n, 4.0).unwrap();
        let dx = axis.spacing();
        let gp: Vec<f64> = (0..n).map(|i| if (10..20).contains(&i) { (i as f64).sin() } else { 0.0 }).collect();
        let gm: Vec<f64> = (0..n).map(|i| if (40..50).contains(&i) { (i as f64).cos() } else { 0.0 }).collect();
        let mut fs = FieldState::zeros(n);
        fs.set_light_cone(&gp, &gm);
        let gp0 = fs.g_plus();
        let gm0 = fs.g_minus();
        let (c, dt) = (2.0, 2.0 * dx / 2.0);
        for _ in 0..5 {
            update_transverse(&mut fs, &vec![0.0; n], dt, c, dx);
        }
        let gp1 = fs.g_plus();
        let gm1 = fs.g_minus();
        for i in 0..n {
            let ep = if i >= 10 { gp0[i - 10] } else { 0.0 };
            let em = if i + 10 < n { gm0[i + 10] } else { 0.0 };
            assert_eq!(gp1[i], ep, "G+ at {i}");
            assert_eq!(gm1[i], em, "G- at {i}");
        }
    }

    #[test]
    fn uniform_current_grows_linearly() {
        let n = 101;
        let axis = Axis::new(n, 5.0).unwrap();
        let dx = axis.spacing();
        let jv = 0.3;
        let j2 = vec![jv; n];
        let mut fs = FieldState::zeros(n);
        let (c, dt) = (1.0, dx);
        let steps = 8;
        for _ in 0..steps {
            update_transverse(&mut fs, &j2, dt, c, dx);
        }
        let expect = -4.0 * PI * jv * dt * steps as f64;
        for i in (steps + 3)..(n - steps - 3) {
            assert!((fs.e2[i] - expect).abs() <= 1e-13 * expect.abs(), "i={i}");
            assert!(fs.b[i].abs() <= 1e-13 * expect.abs());
        }
    }

    #[test]
    fn bump_support_moves_at_light_speed() {
        let n = 401;
        let axis = Axis::new(n, 20.0).unwrap();
        let dx = axis.spacing();
        let xs = axis.nodes();
        let gp: Vec<f64> = xs.iter().map(|&x| bump((x + 10.0) / 1.0)).collect();
        let mut fs = FieldState::zeros(n);
        fs.set_light_cone(&gp, &vec![0.0; n]);
        let (c, dt) = (5.0, 0.37 * dx / 5.0 * 3.0);
        // one step: exact zeros beyond the two-cell halo
        update_transverse(&mut fs, &vec![0.0; n], dt, c, dx);
        let g = fs.g_plus();
        for (i, &x) in xs.iter().enumerate() {
            if x > -9.0 + c * dt + 2.0 * dx || x < -11.0 + c * dt - 2.0 * dx {
                assert_eq!(g[i], 0.0, "x={x}");
            }
        }
    }

    #[test]
    fn manufactured_source_matches_ray_integral() {
        // j2(t, x) = cos(t) w(x); G+ from zero data equals
        // -4 pi int_0^t cos(s) w(x - c(t - s)) ds, computed by fine Simpson.
        let c = 2.0;
        let t_end = 1.0;
        let w = |x: f64| bump(x / 1.5);
        let exact = |x: f64| {
            let n = 4000;
            let h = t_end / n as f64;
            let mut acc = 0.0;
            for k in 0..=n {
                let s = k as f64 * h;
                let wt = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
                acc += wt * s.cos() * w(x - c * (t_end - s));
            }
            -4.0 * PI * acc * h / 3.0
        };
        let err_at = |n: usize, steps: usize| {
            let axis = Axis::new(n, 6.0).unwrap();
            let dx = axis.spacing();
            let xs = axis.nodes();
            let dt = t_end / steps as f64;
            let mut fs = FieldState::zeros(n);
            for s in 0..steps {
                let tm = (s as f64 + 0.5) * dt;
                let j2: Vec<f64> = xs.iter().map(|&x| tm.cos() * w(x)).collect();
                update_transverse(&mut fs, &j2, dt, c, dx);
            }
            let g = fs.g_plus();
            xs.iter().zip(&g).map(|(&x, gv)| (gv - exact(x)).abs()).fold(0.0, f64::max)
        };
        let e1 = err_at(121, 20);
        let e2 = err_at(241, 40);
        assert!(e1 < 2e-2, "coarse error {e1:e}");
        assert!(e1 / e2 > 3.0, "{e1:e} -> {e2:e}");
    }

    #[test]
    fn light_cone_views_are_consistent() {
        let fs = FieldState::new(vec![0.0; 3], vec![1.0, 0.1, -2.5], vec![0.3, 7.0, 1e-9]);
        let gp = fs.g_plus();
        let gm = fs.g_minus();
        for i in 0..3 {
            assert!(((gp[i] + gm[i]) / 2.0 - fs.e2[i]).abs() <= 2.0 * f64::EPSILON * fs.e2[i].abs().max(fs.b[i].abs()));
            assert!(((gp[i] - gm[i]) / 2.0 - fs.b[i]).abs() <= 2.0 * f64::EPSILON * fs.e2[i].abs().max(fs.b[i].abs()));
        }
    }

    #[test]
    fn e1_update_is_odd_in_charge() {
        let g = grid(65, 8);
        let xs = g.x.nodes();
        let rho: Vec<f64> = xs.iter().map(|&x| x * bump(x / 2.0)).collect();
        let neg: Vec<f64> = rho.iter().map(|r| -r).collect();
        let m1 = SourceMoments { rho, j1: vec![0.0; 65], j2: vec![0.0; 65] };
        let m2 = SourceMoments { rho: neg, ..m1.clone() };
        let e = update_e1(&m1, &g).unwrap();
        let en = update_e1(&m2, &g).unwrap();
        for i in 0..65 {
            assert_eq!(e[i], -en[i]);
        }
        assert!(update_e1(&SourceMoments::zeros(65), &g).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ampere_residual_examples() {
        let z = vec![vec![0.0; 5]; 4];
        assert_eq!(ampere_residual(&z, &z, 0.1).unwrap(), 0.0);
        assert!(matches!(ampere_residual(&z[..2], &z[..2], 0.1), Err(Error::HistoryTooShort(_))));
        // E1 = -4 pi J t for uniform J
        let jv = 0.2;
        let e: Vec<Vec<f64>> = (0..5).map(|n| vec![-4.0 * PI * jv * 0.1 * n as f64; 3]).collect();
        let j = vec![vec![jv; 3]; 5];
        assert!(ampere_residual(&e, &j, 0.1).unwrap() < 1e-13);
    }
}
