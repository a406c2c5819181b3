//! Continuous integral-equation maps from driver paths `(u, v)` to state
//! paths `(x, z)`.
//!
//! The general map takes Lipschitz `h₁`, `h₂`, `g` and solves
//!
//! ```text
//! x₁(t) = y₁(t) + ∫₀ᵗ h₁(x(s)) ds
//! x₂(t) = y₂(t) + ∫₀ᵗ h₂(x(s)) ds + g(x₁(t))
//! ```
//!
//! by Picard iteration on a uniform grid. Two specializations cover the
//! queueing limits:
//!
//! * `Phi`, the critically loaded map: `h₁(x,z) = −α x₁⁺ − e′R z`,
//!   `h₂(x,z) = −(I−pe′)R z`, `g(x₁) = −p x₁⁻`;
//! * `Psi`, the overloaded map: `h₁(x,z) = −α x₁ − e′R z`, same `h₂`,
//!   `g ≡ 0` (affine, so Picard converges geometrically).
//!
//! Integrals use the trapezoid rule for piecewise-linear inputs or the
//! left-point rule for genuinely jumpy inputs (simulation reconstructions),
//! selected by [`Quadrature`]. The Picard iterates are assembled step by
//! step: on each grid cell the prefix integral is frozen and the cell value
//! is iterated to a fixed point, which keeps the per-cell contraction factor
//! at `c·dt/2` regardless of the horizon.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::grid::GridPath;
use crate::linalg::SquareMat;
use crate::phase_type::PhaseType;

#[derive(Debug, Clone, PartialEq)]
pub enum MapError {
    /// The per-cell fixed-point iteration failed to settle; the grid is too
    /// coarse for the map's Lipschitz constant or a supplied function is not
    /// Lipschitz.
    NoConvergence { point: usize, change: f64 },
    /// Input path width does not match the coefficient dimension.
    ShapeMismatch,
    /// A `phi_map`/`psi_map` call received coefficients of the other variant.
    VariantMismatch,
}

impl fmt::Display for MapError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapError::NoConvergence { point, change } => write!(
                f,
                "picard iteration did not settle at grid point {point} (last change {change:e}); \
                 refine the grid"
            ),
            MapError::ShapeMismatch => write!(f, "path width does not match map dimension"),
            MapError::VariantMismatch => write!(f, "map coefficients are of the other variant"),
        }
    }
}

impl core::error::Error for MapError {}

/// Quadrature rule for the running integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    /// Piecewise-linear paths between grid points.
    Trapezoid,
    /// Piecewise-constant (càdlàg) paths; exact for step-function inputs that
    /// jump only at grid points.
    LeftPoint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Per-cell fixed-point tolerance; the returned path moves by at most
    /// `2·tolerance` under one more sweep of the integral operator.
    pub tolerance: f64,
    /// Cap on fixed-point iterations per grid cell.
    pub max_iter: usize,
    pub quadrature: Quadrature,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tolerance: 1e-10, max_iter: 200, quadrature: Quadrature::Trapezoid }
    }
}

impl SolveOptions {
    pub fn with_quadrature(q: Quadrature) -> Self {
        SolveOptions { quadrature: q, ..Self::default() }
    }
}

/// System functions `(h₁, h₂, g)` of the general map.
pub trait SystemFunctions {
    fn zdim(&self) -> usize;
    fn h1(&self, x1: f64, z: &[f64]) -> f64;
    fn h2(&self, x1: f64, z: &[f64], out: &mut [f64]);
    fn g(&self, x1: f64, out: &mut [f64]);
    /// Lipschitz constant (max norm) shared by `h₁`, `h₂`, `g`.
    fn lipschitz(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapVariant {
    Phi,
    Psi,
}

/// Coefficients of the `Phi`/`Psi` specializations.
#[derive(Debug, Clone)]
pub struct MapCoefficients {
    variant: MapVariant,
    alpha: f64,
    p: Vec<f64>,
    /// Row vector `e′R`.
    etr: Vec<f64>,
    /// `(I − pe′) R`.
    centered_r: SquareMat,
    lipschitz: f64,
}

impl MapCoefficients {
    pub fn new(variant: MapVariant, alpha: f64, p: &[f64], r: &SquareMat) -> Self {
        let k = p.len();
        assert_eq!(r.n(), k, "p and R disagree in dimension");
        assert!(alpha >= 0.0, "abandonment hazard must be nonnegative");
        let etr: Vec<f64> = (0..k).map(|j| (0..k).map(|i| r.get(i, j)).sum()).collect();
        let mut centered_r = SquareMat::zeros(k);
        for i in 0..k {
            for j in 0..k {
                centered_r.set(i, j, r.get(i, j) - p[i] * etr[j]);
            }
        }
        let c_h1 = alpha + etr.iter().map(|v| v.abs()).sum::<f64>();
        let c_h2 = centered_r.norm_inf();
        let c_g = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let lipschitz = c_h1.max(c_h2).max(c_g);
        MapCoefficients { variant, alpha, p: p.to_vec(), etr, centered_r, lipschitz }
    }

    /// Critically loaded map for the given service law and hazard `α`.
    pub fn phi(alpha: f64, ph: &PhaseType) -> Self {
        Self::new(MapVariant::Phi, alpha, ph.initial_law(), ph.rate_matrix())
    }

    /// Overloaded map for the given service law and hazard `α`.
    pub fn psi(alpha: f64, ph: &PhaseType) -> Self {
        Self::new(MapVariant::Psi, alpha, ph.initial_law(), ph.rate_matrix())
    }

    pub fn variant(&self) -> MapVariant {
        self.variant
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// A grid step keeping the per-cell contraction at one tenth:
    /// `(c + c²)·dt ≤ 0.1`.
    pub fn suggested_dt(&self) -> f64 {
        let c = self.lipschitz;
        0.1 / (c + c * c).max(1e-12)
    }
}

impl SystemFunctions for MapCoefficients {
    fn zdim(&self) -> usize {
        self.p.len()
    }

    #[inline]
    fn h1(&self, x1: f64, z: &[f64]) -> f64 {
        let drive = match self.variant {
            MapVariant::Phi => x1.max(0.0),
            MapVariant::Psi => x1,
        };
        let mut s = -self.alpha * drive;
        for (e, zk) in self.etr.iter().zip(z) {
            s -= e * zk;
        }
        s
    }

    #[inline]
    fn h2(&self, _x1: f64, z: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for (j, zk) in z.iter().enumerate() {
                s += self.centered_r.get(i, j) * zk;
            }
            *o = -s;
        }
    }

    #[inline]
    fn g(&self, x1: f64, out: &mut [f64]) {
        match self.variant {
            MapVariant::Phi => {
                let neg = (-x1).max(0.0);
                for (o, pk) in out.iter_mut().zip(&self.p) {
                    *o = -pk * neg;
                }
            }
            MapVariant::Psi => out.fill(0.0),
        }
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

type H1Fn = dyn Fn(f64, &[f64]) -> f64 + Send + Sync;
type H2Fn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;
type GFn = dyn Fn(f64, &mut [f64]) + Send + Sync;

/// General map with user-supplied Lipschitz functions and a declared
/// Lipschitz constant.
pub struct GeneralMap {
    zdim: usize,
    lipschitz: f64,
    h1: Box<H1Fn>,
    h2: Box<H2Fn>,
    g: Box<GFn>,
}

impl GeneralMap {
    pub fn new(
        zdim: usize,
        lipschitz: f64,
        h1: Box<H1Fn>,
        h2: Box<H2Fn>,
        g: Box<GFn>,
    ) -> Self {
        GeneralMap { zdim, lipschitz, h1, h2, g }
    }
}

impl SystemFunctions for GeneralMap {
    fn zdim(&self) -> usize {
        self.zdim
    }

    fn h1(&self, x1: f64, z: &[f64]) -> f64 {
        (self.h1)(x1, z)
    }

    fn h2(&self, x1: f64, z: &[f64], out: &mut [f64]) {
        (self.h2)(x1, z, out)
    }

    fn g(&self, x1: f64, out: &mut [f64]) {
        (self.g)(x1, out)
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

/// Solves the fixed-point equations on the grid of `y`.
///
/// The output path `x` packs the scalar component first, the vector component
/// after, exactly like the input `y = (u, v)`.
pub fn picard_solve<M: SystemFunctions + ?Sized>(
    map: &M,
    y: &GridPath,
    opts: &SolveOptions,
) -> Result<GridPath, MapError> {
    let k = map.zdim();
    if y.zdim() != k {
        return Err(MapError::ShapeMismatch);
    }
    let npts = y.num_points();
    let dt = y.dt();
    let mut x = y.clone();

    let mut gbuf = vec![0.0; k];
    let mut h2_prev = vec![0.0; k];
    let mut h2_cur = vec![0.0; k];
    let mut cur_z = vec![0.0; k];
    let mut new_z = vec![0.0; k];

    // t = 0: integrals vanish, only g acts.
    {
        let x1 = y.x(0);
        map.g(x1, &mut gbuf);
        let row = x.point_mut(0);
        row[0] = x1;
        for i in 0..k {
            row[i + 1] = y.z(0)[i] + gbuf[i];
        }
    }

    let mut acc1 = 0.0f64; // running ∫ h1
    let mut acc2 = vec![0.0; k]; // running ∫ h2

    for i in 1..npts {
        let prev = x.point(i - 1);
        let (px1, pz) = (prev[0], &prev[1..]);
        let h1_prev = map.h1(px1, pz);
        map.h2(px1, pz, &mut h2_prev);

        let y1 = y.x(i);
        let yz = y.z(i);

        match opts.quadrature {
            Quadrature::LeftPoint => {
                acc1 += dt * h1_prev;
                for (a, h) in acc2.iter_mut().zip(&h2_prev) {
                    *a += dt * h;
                }
                let x1 = y1 + acc1;
                map.g(x1, &mut gbuf);
                let row = x.point_mut(i);
                row[0] = x1;
                for j in 0..k {
                    row[j + 1] = yz[j] + acc2[j] + gbuf[j];
                }
            }
            Quadrature::Trapezoid => {
                let mut cur_x1 = px1;
                cur_z.copy_from_slice(pz);
                let mut settled = false;
                for _iter in 0..opts.max_iter {
                    let h1_cur = map.h1(cur_x1, &cur_z);
                    map.h2(cur_x1, &cur_z, &mut h2_cur);
                    let x1 = y1 + acc1 + 0.5 * dt * (h1_prev + h1_cur);
                    map.g(x1, &mut gbuf);
                    let mut change = (x1 - cur_x1).abs();
                    let mut scale = x1.abs();
                    for j in 0..k {
                        new_z[j] = yz[j] + acc2[j] + 0.5 * dt * (h2_prev[j] + h2_cur[j]) + gbuf[j];
                        change = change.max((new_z[j] - cur_z[j]).abs());
                        scale = scale.max(new_z[j].abs());
                    }
                    cur_x1 = x1;
                    cur_z.copy_from_slice(&new_z);
                    if !change.is_finite() || !scale.is_finite() {
                        return Err(MapError::NoConvergence { point: i, change });
                    }
                    if change <= opts.tolerance.min(1e-13) * (1.0 + scale) {
                        settled = true;
                        break;
                    }
                }
                if !settled {
                    let h1_cur = map.h1(cur_x1, &cur_z);
                    let probe = y1 + acc1 + 0.5 * dt * (h1_prev + h1_cur);
                    return Err(MapError::NoConvergence {
                        point: i,
                        change: (probe - cur_x1).abs(),
                    });
                }
                let h1_cur = map.h1(cur_x1, &cur_z);
                map.h2(cur_x1, &cur_z, &mut h2_cur);
                acc1 += 0.5 * dt * (h1_prev + h1_cur);
                for j in 0..k {
                    acc2[j] += 0.5 * dt * (h2_prev[j] + h2_cur[j]);
                }
                let row = x.point_mut(i);
                row[0] = cur_x1;
                row[1..].copy_from_slice(&cur_z);
            }
        }
    }
    Ok(x)
}

/// One application of the integral operator to `x`; the fixed-point residual
/// diagnostic is `sweep(map, y, x, q).sup_distance(x)`.
pub fn residual_sweep<M: SystemFunctions + ?Sized>(
    map: &M,
    y: &GridPath,
    x: &GridPath,
    quadrature: Quadrature,
) -> GridPath {
    let k = map.zdim();
    let npts = y.num_points();
    let dt = y.dt();
    let mut out = y.clone();
    let mut gbuf = vec![0.0; k];
    let mut hbuf = vec![0.0; k];

    let mut acc1 = 0.0f64;
    let mut acc2 = vec![0.0; k];
    {
        let x1 = y.x(0);
        map.g(x1, &mut gbuf);
        let row = out.point_mut(0);
        row[0] = x1;
        for j in 0..k {
            row[j + 1] = y.z(0)[j] + gbuf[j];
        }
    }
    for i in 1..npts {
        let prev = x.point(i - 1);
        let h1_prev = map.h1(prev[0], &prev[1..]);
        map.h2(prev[0], &prev[1..], &mut hbuf);
        match quadrature {
            Quadrature::LeftPoint => {
                acc1 += dt * h1_prev;
                for (a, h) in acc2.iter_mut().zip(&hbuf) {
                    *a += dt * h;
                }
            }
            Quadrature::Trapezoid => {
                let cur = x.point(i);
                let h1_cur = map.h1(cur[0], &cur[1..]);
                acc1 += 0.5 * dt * (h1_prev + h1_cur);
                let mut hcur = vec![0.0; k];
                map.h2(cur[0], &cur[1..], &mut hcur);
                for j in 0..k {
                    acc2[j] += 0.5 * dt * (hbuf[j] + hcur[j]);
                }
            }
        }
        let x1 = y.x(i) + acc1;
        map.g(x1, &mut gbuf);
        let row = out.point_mut(i);
        row[0] = x1;
        for j in 0..k {
            row[j + 1] = y.z(i)[j] + acc2[j] + gbuf[j];
        }
    }
    out
}

/// Applies the critically loaded map to the packed driver path `(u, v)`.
pub fn phi_map(
    coeff: &MapCoefficients,
    uv: &GridPath,
    opts: &SolveOptions,
) -> Result<GridPath, MapError> {
    if coeff.variant != MapVariant::Phi {
        return Err(MapError::VariantMismatch);
    }
    picard_solve(coeff, uv, opts)
}

/// Applies the overloaded map to the packed driver path `(u, v)`.
pub fn psi_map(
    coeff: &MapCoefficients,
    uv: &GridPath,
    opts: &SolveOptions,
) -> Result<GridPath, MapError> {
    if coeff.variant != MapVariant::Psi {
        return Err(MapError::VariantMismatch);
    }
    picard_solve(coeff, uv, opts)
}
