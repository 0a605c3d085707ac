// SPDX-License-Identifier: Apache-2.0

//! Projected linear problem for the correction `φ`, the nonlinear fixed point
//! `Φ(r)`, and the per-configuration setup that feeds both.
//!
//! The grid only carries the signed permutations that fix the ring, so the
//! symmetric subspace used here is the invariant subspace of that subgroup.
//! Constraints are imposed per spike orbit: the radial mode of every orbit,
//! and the tangential mode of orbits whose stabilizer does not already kill it.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{
    build_multibump, error_field, evaluate_potential, star_norm_with, MultiBump, PotentialSpec, SpikeRing, WeightRho,
};
use crate::error::{Error, Result};
use crate::grid::{dot, pos_pow, FractionalOrder, GridSpec, RealField};
use crate::ground_state::RadialProfile;
use crate::krylov::{minres, MinresOptions};
use crate::spectral::Spectral;
use crate::symmetry::SymmetryGroup;

/// `Z_j = ∂W_j/∂r` for every spike, with the tangential companions used as
/// extra constraints.
#[derive(Clone, Debug)]
pub struct ProjectionBasis {
    pub spikes: SpikeRing,
    pub z: Vec<RealField>,
    pub tangential: Vec<RealField>,
    /// `∫ Z_i Z_j`.
    pub gram: DMatrix<f64>,
}

fn unit_direction(q: &[f64]) -> Vec<f64> {
    let r = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r == 0.0 {
        let mut e = vec![0.0; q.len()];
        e[0] = 1.0;
        e
    } else {
        q.iter().map(|v| v / r).collect()
    }
}

/// Samples of `−w′(|x−q|) (x−q)·d / |x−q|` with minimum-image `x − q`.
fn directional_field(profile: &RadialProfile, grid: &GridSpec, q: &[f64], d: &[f64]) -> RealField {
    let n = grid.dimension();
    let samples: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map_init(
            || (vec![0.0; n], vec![0.0; n]),
            |(x, y), i| {
                grid.point(i, x);
                let rho = grid.displacement(x, q, y);
                if rho == 0.0 {
                    0.0
                } else {
                    -profile.derivative(rho) * dot(y, d) / rho
                }
            },
        )
        .collect();
    RealField::from_vec(*grid, samples)
}

impl ProjectionBasis {
    pub fn build(profile: &RadialProfile, spikes: &SpikeRing, grid: &GridSpec) -> Self {
        let mut z = Vec::with_capacity(spikes.k());
        let mut tangential = Vec::with_capacity(spikes.k());
        for q in spikes.positions() {
            let e = unit_direction(q);
            let mut t = vec![0.0; e.len()];
            t[0] = -e[1];
            t[1] = e[0];
            z.push(directional_field(profile, grid, q, &e));
            tangential.push(directional_field(profile, grid, q, &t));
        }
        let k = z.len();
        let mut gram = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                let v = z[i].inner(&z[j]);
                gram[(i, j)] = v;
                gram[(j, i)] = v;
            }
        }
        Self {
            spikes: spikes.clone(),
            z,
            tangential,
            gram,
        }
    }

    pub fn k(&self) -> usize {
        self.z.len()
    }

    /// `Σ_{j≥2} ∫ Z₁ Z_j`.
    pub fn offdiagonal_row_sum(&self) -> f64 {
        (1..self.k()).map(|j| self.gram[(0, j)]).sum()
    }

    /// `Σ_j Z_j`.
    pub fn sum(&self) -> RealField {
        let mut out = RealField::zeros(*self.z[0].grid());
        for z in &self.z {
            out.axpy(1.0, z);
        }
        out
    }

    /// `∫ Z_j φ` for every `j`.
    pub fn defects(&self, phi: &RealField) -> Vec<f64> {
        self.z.iter().map(|z| z.inner(phi)).collect()
    }
}

/// `(1/N)∫(w′(|x|))² dx` by radial quadrature.
pub fn gram_diagonal_reference(profile: &RadialProfile) -> f64 {
    profile.radial_integral(|_, d| d * d) / profile.dimension() as f64
}

/// `∫|w′(|x|)| dx` by radial quadrature.
pub fn derivative_l1(profile: &RadialProfile) -> f64 {
    profile.radial_integral(|_, d| d.abs())
}

#[derive(Clone, Copy, Debug)]
pub struct LinearSolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Mass of the resolvent used as preconditioner.
    pub mass: f64,
}

impl Default for LinearSolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-11,
            max_iter: 4000,
            mass: 1.0,
        }
    }
}

/// Solution `(φ, c)` of the projected problem.
#[derive(Clone, Debug)]
pub struct ReducedSolution {
    pub phi: RealField,
    /// Multiplier of `Σ_j Z_j`, averaged over orbits by size.
    pub c: f64,
    /// Radial multipliers per orbit, then tangential ones.
    pub multipliers: Vec<f64>,
    pub star_norm_phi: f64,
    /// `max |Aφ − g − Σ c_O Y_O|`.
    pub residual: f64,
    /// `max_j |∫ Z_j φ|`.
    pub orth_defect: f64,
    pub iterations: usize,
    /// Largest successive-difference ratio after the first step of the
    /// nonlinear iteration; `None` for a single linear solve.
    pub contraction_rate: Option<f64>,
}

/// The saddle system `Aφ = g + Σ c_i Y_i`, `∫Y_i φ = 0` on the subspace fixed
/// by the ring's lattice stabilizer, with `A = (−Δ)ˢ + V − pW^{p−1}`.
pub struct ProjectedSolver {
    ctx: Arc<Spectral>,
    symbol: Arc<Vec<f64>>,
    inverse: Vec<f64>,
    potential: RealField,
    group: SymmetryGroup,
    orbits: Vec<Vec<usize>>,
    constraints: Vec<RealField>,
    radial: Vec<usize>,
    schur: DMatrix<f64>,
    constraint_gram: DMatrix<f64>,
    basis: ProjectionBasis,
    rho: RealField,
    w: RealField,
    p: f64,
    opts: LinearSolveOptions,
}

impl std::fmt::Debug for ProjectedSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProjectedSolver")
            .field("orbits", &self.orbits)
            .field("constraints", &self.constraints.len())
            .finish()
    }
}

impl ProjectedSolver {
    pub fn new(
        ctx: Arc<Spectral>,
        bumps: &MultiBump,
        v: &RealField,
        basis: ProjectionBasis,
        rho: RealField,
        s: FractionalOrder,
        opts: LinearSolveOptions,
    ) -> Result<Self> {
        let grid = *bumps.total.grid();
        grid.check_same(v.grid())?;
        grid.check_same(ctx.grid())?;
        grid.check_same(rho.grid())?;
        let p = bumps.p;
        let potential = v.zip_map(&bumps.total, |vv, w| vv - p * pos_pow(w, p - 1.0));
        let group = SymmetryGroup::stabilizer(grid, basis.spikes.positions());
        let orbits = group.orbits(basis.spikes.positions());
        let mut constraints = Vec::new();
        let mut radial = Vec::new();
        let mut tangential = Vec::new();
        for orbit in &orbits {
            let j0 = orbit[0];
            let scale = basis.z[j0].inner(&basis.z[j0]).sqrt();
            let mut y = RealField::zeros(grid);
            for &j in orbit {
                y.axpy(1.0, &basis.z[j]);
            }
            let y = group.project(&y);
            if y.inner(&y).sqrt() > 1e-3 * scale {
                radial.push(constraints.len());
                constraints.push(y);
            } else {
                radial.push(usize::MAX);
            }
            let mut t = group.project(&basis.tangential[j0]);
            t.scale(orbit.len() as f64);
            if t.inner(&t).sqrt() > 1e-3 * scale {
                tangential.push(t);
            }
        }
        constraints.extend(tangential);
        let symbol = ctx.abs_symbol(s);
        let inverse: Vec<f64> = symbol.iter().map(|&v| 1.0 / (v + opts.mass)).collect();
        let nc = constraints.len();
        let mut schur = DMatrix::zeros(nc, nc);
        let mut cg = DMatrix::zeros(nc, nc);
        let ty: Vec<RealField> = constraints.iter().map(|y| ctx.apply_symbol(y, &inverse)).collect();
        for i in 0..nc {
            for j in 0..nc {
                schur[(i, j)] = constraints[i].inner(&ty[j]);
                cg[(i, j)] = constraints[i].inner(&constraints[j]);
            }
        }
        let schur = schur
            .try_inverse()
            .ok_or_else(|| Error::InvalidParameter("constraint fields are linearly dependent".into()))?;
        let constraint_gram = cg
            .try_inverse()
            .ok_or_else(|| Error::InvalidParameter("constraint fields are linearly dependent".into()))?;
        Ok(Self {
            ctx,
            symbol,
            inverse,
            potential,
            group,
            orbits,
            constraints,
            radial,
            schur,
            constraint_gram,
            basis,
            rho,
            w: bumps.total.clone(),
            p,
            opts,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        self.potential.grid()
    }

    pub fn basis(&self) -> &ProjectionBasis {
        &self.basis
    }

    pub fn group(&self) -> &SymmetryGroup {
        &self.group
    }

    pub fn orbits(&self) -> &[Vec<usize>] {
        &self.orbits
    }

    pub fn constraint_count(&self) -> usize {
        self.constraints.len()
    }

    pub fn rho(&self) -> &RealField {
        &self.rho
    }

    pub fn star_norm(&self, f: &RealField) -> f64 {
        star_norm_with(f, &self.rho)
    }

    /// `Aφ`.
    pub fn apply(&self, phi: &RealField) -> RealField {
        let lf = self.ctx.apply_symbol(phi, &self.symbol);
        lf.zip_map(&phi.zip_map(&self.potential, |a, b| a * b), |a, b| a + b)
    }

    /// `N(φ) = (W + φ)₊ᵖ − Wᵖ − pW^{p−1}φ`.
    pub fn nonlinear_term(&self, phi: &RealField) -> RealField {
        let p = self.p;
        self.w
            .zip_map(phi, |w, f| pos_pow(w + f, p) - pos_pow(w, p) - p * pos_pow(w, p - 1.0) * f)
    }

    fn radial_multiplier(&self, multipliers: &[f64]) -> f64 {
        let k = self.basis.k() as f64;
        self.orbits
            .iter()
            .zip(&self.radial)
            .map(|(o, &i)| if i == usize::MAX { 0.0 } else { o.len() as f64 * multipliers[i] })
            .sum::<f64>()
            / k
    }

    /// Solves the saddle system for right-hand side `g`, optionally warm
    /// started from an earlier solution.
    pub fn solve(&self, g: &RealField, warm: Option<&ReducedSolution>) -> Result<ReducedSolution> {
        let grid = *self.grid();
        grid.check_same(g.grid())?;
        if !g.is_finite() {
            return Err(Error::NonFinite("right-hand side of the projected problem"));
        }
        let g = self.group.project(g);
        let n = grid.len();
        let nc = self.constraints.len();
        let hv = grid.cell_volume();
        if g.max_abs() == 0.0 {
            return Ok(ReducedSolution {
                phi: RealField::zeros(grid),
                c: 0.0,
                multipliers: vec![0.0; nc],
                star_norm_phi: 0.0,
                residual: 0.0,
                orth_defect: 0.0,
                iterations: 0,
                contraction_rate: None,
            });
        }
        let apply = |x: &[f64], y: &mut [f64]| {
            let phi = RealField::from_vec(grid, x[..n].to_vec());
            let a = self.group.project(&self.apply(&phi));
            let (yp, yc) = y.split_at_mut(n);
            yp.copy_from_slice(a.samples());
            for (i, c) in self.constraints.iter().enumerate() {
                let ci = x[n + i];
                for (o, v) in yp.iter_mut().zip(c.samples()) {
                    *o -= ci * v;
                }
                yc[i] = -hv * dot(c.samples(), &x[..n]);
            }
            yp.iter_mut().for_each(|v| *v *= hv);
        };
        let precond = |x: &[f64], y: &mut [f64]| {
            let r = RealField::from_vec(grid, x[..n].to_vec());
            let t = self.ctx.apply_symbol(&r, &self.inverse);
            for (o, v) in y[..n].iter_mut().zip(t.samples()) {
                *o = v / hv;
            }
            let rc = DVector::from_column_slice(&x[n..]);
            let zc = &self.schur * rc;
            y[n..].copy_from_slice(zc.as_slice());
        };
        let mut b = vec![0.0; n + nc];
        for (o, v) in b[..n].iter_mut().zip(g.samples()) {
            *o = hv * v;
        }
        let x0 = warm.map(|w| {
            let mut v = w.phi.samples().to_vec();
            v.extend_from_slice(&w.multipliers);
            v
        });
        let out = minres(
            apply,
            precond,
            &b,
            x0.as_deref(),
            MinresOptions {
                tol: self.opts.tol,
                max_iter: self.opts.max_iter,
            },
            "projected linear problem",
        )?;
        let multipliers = out.x[n..].to_vec();
        let mut phi = self.group.project(&RealField::from_vec(grid, out.x[..n].to_vec()));
        // remove what is left of the constraint directions
        let dots = DVector::from_iterator(nc, self.constraints.iter().map(|y| y.inner(&phi)));
        let alpha = &self.constraint_gram * dots;
        for (y, a) in self.constraints.iter().zip(alpha.iter()) {
            phi.axpy(-a, y);
        }
        let mut res = self.apply(&phi);
        res.axpy(-1.0, &g);
        for (y, c) in self.constraints.iter().zip(&multipliers) {
            res.axpy(-c, y);
        }
        let orth_defect = self.basis.defects(&phi).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(ReducedSolution {
            c: self.radial_multiplier(&multipliers),
            multipliers,
            star_norm_phi: self.star_norm(&phi),
            residual: res.max_abs(),
            orth_defect,
            iterations: out.iterations,
            contraction_rate: None,
            phi,
        })
    }
}

impl ProjectedSolver {
    /// Smallest eigenvalue magnitude of `A` on the invariant fields orthogonal
    /// to the constraints, by power iteration on the solve map.
    pub fn constrained_gap(&self, iterations: usize, seed: u64) -> Result<f64> {
        let grid = *self.grid();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut x = self.group.project(&RealField::from_vec(grid, noise).zip_map(&self.rho, |a, b| a * b));
        let mut mu = 0.0;
        for _ in 0..iterations.max(1) {
            let nrm = x.inner(&x).sqrt();
            if nrm == 0.0 {
                return Err(Error::InvalidParameter("constrained subspace is empty".into()));
            }
            x.scale(1.0 / nrm);
            let y = self.solve(&x, None)?.phi;
            mu = x.inner(&y);
            x = y;
        }
        Ok(1.0 / mu.abs())
    }
}

/// `|c|`, `‖φ‖_*`, `‖g‖_*` and their ratios.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MultiplierReport {
    pub c: f64,
    pub star_norm_phi: f64,
    pub star_norm_g: f64,
    /// `|c|/(‖φ‖_* + ‖g‖_*)`
    pub ratio: f64,
    /// `|c|/‖φ‖_*`
    pub ratio_phi: f64,
    /// `‖φ‖_*/‖g‖_*`
    pub solve_constant: f64,
}

pub fn multiplier_estimate(solver: &ProjectedSolver, sol: &ReducedSolution, g: &RealField) -> MultiplierReport {
    let gn = solver.star_norm(g);
    let denom = sol.star_norm_phi + gn;
    MultiplierReport {
        c: sol.c,
        star_norm_phi: sol.star_norm_phi,
        star_norm_g: gn,
        ratio: if denom > 0.0 { sol.c.abs() / denom } else { 0.0 },
        ratio_phi: if sol.star_norm_phi > 0.0 { sol.c.abs() / sol.star_norm_phi } else { 0.0 },
        solve_constant: if gn > 0.0 { sol.star_norm_phi / gn } else { 0.0 },
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FixedPointOptions {
    pub max_iter: usize,
    /// Stop once `‖φₙ₊₁ − φₙ‖_* ≤ tol·‖φₙ₊₁‖_*`.
    pub tol: f64,
    /// Abort when the difference ratio stays above one this many times in a row.
    pub patience: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            max_iter: 60,
            tol: 1e-9,
            patience: 3,
        }
    }
}

/// Iterates `φ ← T(E + N(φ))` from `φ = 0`.
pub fn nonlinear_fixed_point(solver: &ProjectedSolver, e: &RealField, opts: FixedPointOptions) -> Result<ReducedSolution> {
    let mut current = solver.solve(e, None)?;
    let mut last_diff = current.star_norm_phi;
    let mut worst_rate: Option<f64> = None;
    let mut growing = 0usize;
    let mut total = current.iterations;
    if last_diff == 0.0 {
        current.contraction_rate = Some(0.0);
        return Ok(current);
    }
    for it in 1..opts.max_iter {
        let mut g = solver.nonlinear_term(&current.phi);
        g.axpy(1.0, e);
        let next = solver.solve(&g, Some(&current))?;
        total += next.iterations;
        let diff = solver.star_norm(&(&next.phi - &current.phi));
        let rate = diff / last_diff;
        log::debug!("fixed point step {it}: difference {diff:.3e}, ratio {rate:.3}");
        if it >= 2 {
            worst_rate = Some(worst_rate.map_or(rate, |w| w.max(rate)));
        }
        if rate >= 1.0 {
            growing += 1;
            if growing >= opts.patience {
                return Err(Error::ContractionFailure { rate, iterations: it });
            }
        } else {
            growing = 0;
        }
        current = next;
        last_diff = diff;
        if diff <= opts.tol * current.star_norm_phi.max(f64::MIN_POSITIVE) {
            current.iterations = total;
            // a single step already at the floor leaves no terminal ratio
            current.contraction_rate = Some(worst_rate.unwrap_or(rate));
            return Ok(current);
        }
    }
    Err(Error::NoConvergence {
        what: "nonlinear fixed point",
        iterations: opts.max_iter,
        residual: last_diff,
    })
}

/// Central difference `(Φ(r+δ) − Φ(r−δ))/(2δ)` on a common grid.
pub fn radial_derivative_of_correction(minus: &RealField, plus: &RealField, delta: f64) -> Result<RealField> {
    minus.grid().check_same(plus.grid())?;
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("difference step must be positive, got {delta}")));
    }
    Ok(minus.zip_map(plus, |a, b| (b - a) / (2.0 * delta)))
}

/// Problem data shared by every `(k, r)` configuration.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub s: FractionalOrder,
    pub p: f64,
    pub potential: PotentialSpec,
    pub sigma: f64,
    /// Grid spacing of every construction grid.
    pub spacing: f64,
    /// Room between the ring and the box edge.
    pub margin: f64,
    pub linear: LinearSolveOptions,
    pub fixed_point: FixedPointOptions,
}

impl ProblemSpec {
    /// Smallest box of the configured spacing that holds a ring of radius `r`.
    pub fn grid_for(&self, dimension: usize, r: f64) -> Result<GridSpec> {
        GridSpec::with_spacing(dimension, self.spacing, r + self.margin)
    }
}

/// Everything sampled for one ring on one grid.
#[derive(Debug)]
pub struct RingSetup {
    pub spikes: SpikeRing,
    pub ctx: Arc<Spectral>,
    pub bumps: MultiBump,
    pub v: RealField,
    /// `E` from its closed form.
    pub e: RealField,
    /// `−[(−Δ)ˢW + VW − Wᵖ]` computed on the grid; differs from `e` by the
    /// interpolation floor of `W`.
    pub defect: RealField,
    pub rho: WeightRho,
    pub solver: ProjectedSolver,
}

impl RingSetup {
    pub fn new(profile: &RadialProfile, spec: &ProblemSpec, spikes: SpikeRing, grid: GridSpec) -> Result<Self> {
        let ctx = Arc::new(Spectral::new(grid));
        let bumps = build_multibump(profile, &spikes, &grid, spec.p)?;
        let v = evaluate_potential(&spec.potential, &grid)?;
        let e = error_field(&bumps, &v);
        let lw = ctx.frac_laplacian(&bumps.total, spec.s);
        let defect = RealField::from_vec(
            grid,
            lw.samples()
                .iter()
                .zip(bumps.total.samples())
                .zip(v.samples())
                .map(|((l, &w), vv)| -(l + vv * w - pos_pow(w, spec.p)))
                .collect(),
        );
        let rho = WeightRho::new(spikes.clone(), spec.s, spec.potential.m, spec.sigma)?;
        let rho_field = rho.field(&grid);
        let basis = ProjectionBasis::build(profile, &spikes, &grid);
        let solver = ProjectedSolver::new(ctx.clone(), &bumps, &v, basis, rho_field, spec.s, spec.linear)?;
        Ok(Self {
            spikes,
            ctx,
            bumps,
            v,
            e,
            defect,
            rho,
            solver,
        })
    }

    /// Ring of `k` spikes at radius `r` on the default grid for `r`.
    pub fn ring(profile: &RadialProfile, spec: &ProblemSpec, k: usize, r: f64, dimension: usize) -> Result<Self> {
        let grid = spec.grid_for(dimension, r)?;
        Self::new(profile, spec, SpikeRing::new(k, r, dimension)?, grid)
    }

    pub fn grid(&self) -> &GridSpec {
        self.v.grid()
    }

    /// `Φ(r)` driven by the grid defect of `W`.
    pub fn correction(&self, opts: FixedPointOptions) -> Result<ReducedSolution> {
        nonlinear_fixed_point(&self.solver, &self.defect, opts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_direction_defaults_to_first_axis() {
        assert_eq!(unit_direction(&[0.0, 0.0]), vec![1.0, 0.0]);
        let e = unit_direction(&[3.0, 4.0]);
        assert!((e[0] - 0.6).abs() < 1e-15 && (e[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn central_difference_of_linear_family() {
        let g = GridSpec::new(1, 2.0, 8).unwrap();
        let a = RealField::constant(g, 1.0);
        let b = RealField::constant(g, 2.0);
        let d = radial_derivative_of_correction(&a, &b, 0.25).unwrap();
        assert!(d.samples().iter().all(|&v| (v - 2.0).abs() < 1e-15));
        assert!(radial_derivative_of_correction(&a, &b, 0.0).is_err());
    }
}
