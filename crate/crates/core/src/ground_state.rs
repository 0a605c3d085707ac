// SPDX-License-Identifier: Apache-2.0

//! The single-bump profile `w > 0` solving `(−Δ)ˢw + w = wᵖ`.

use std::collections::HashMap;

use log::{debug, info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{dot, pos_pow, FractionalOrder, GridSpec, RealField};
use crate::krylov::{lanczos_smallest, minres, LanczosOptions, MinresOptions};
use crate::spectral::{resample, Spectral};
use crate::symmetry::{parity_sectors, reflections, SymmetryGroup};

/// Upper end of the admissible exponent range, `+∞` when `N ≤ 2s`.
pub fn critical_exponent(dimension: usize, s: FractionalOrder) -> f64 {
    let n = dimension as f64;
    let two_s = 2.0 * s.value();
    if n > two_s {
        (n + two_s) / (n - two_s)
    } else {
        f64::INFINITY
    }
}

pub fn check_exponent(dimension: usize, s: FractionalOrder, p: f64) -> Result<()> {
    let bound = critical_exponent(dimension, s);
    if !(p > 1.0) || !(p < bound) {
        return Err(Error::SupercriticalExponent { p, bound });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundStateOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub damping: f64,
    /// Relative residual at which the Petviashvili stage hands over to Newton.
    pub newton_switch: f64,
    pub max_newton: usize,
}

impl Default for GroundStateOptions {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            tol: 1e-9,
            damping: 0.9,
            newton_switch: 1e-4,
            max_newton: 25,
        }
    }
}

/// Quadratures of the profile feeding the energy coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Integrals {
    /// `∫w²`
    pub iw2: f64,
    /// `∫w^{p+1}`
    pub iwp1: f64,
    /// `∫wᵖ`
    pub iwp: f64,
    /// `∫(∂₁w)²`, which equals `(1/N)∫(w′(|x|))²` for radial `w`.
    pub idw2: f64,
}

/// Least-squares fits of the algebraic tail. The amplitude comes from
/// `A|x|^{-ℓ} + B|x|^{-ℓ-2} + C|x|^{-2ℓ}` with `ℓ = N + 2s`; the exponent from
/// a separate fit of `A'|x|^{-β} + B'|x|^{-β-2}` with `β` free.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub amplitude: f64,
    /// `ℓ = N + 2s`.
    pub law_exponent: f64,
    pub subleading: f64,
    pub third: f64,
    /// Fitted `β`.
    pub exponent: f64,
    /// `A'` from the free-exponent fit.
    pub free_amplitude: f64,
    /// Plain slope of `log w` against `log |x|` on the same samples.
    pub loglog_slope: f64,
    pub relative_residual: f64,
    pub periodic_images: bool,
    pub inner: f64,
    pub outer: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailFitOptions {
    /// Model the periodic images of the tail.
    pub periodic_images: bool,
    pub inner_fraction: f64,
    pub outer_fraction: f64,
    /// Largest accepted relative residual of the fit.
    pub threshold: f64,
    /// Exponent search window around `N + 2s`.
    pub exponent_window: f64,
}

impl Default for TailFitOptions {
    fn default() -> Self {
        Self {
            periodic_images: true,
            inner_fraction: 0.25,
            outer_fraction: 0.45,
            threshold: 1e-2,
            exponent_window: 1.0,
        }
    }
}

/// A converged ground state with its diagnostics.
#[derive(Clone, Debug)]
pub struct GroundState {
    pub profile: RealField,
    pub s: FractionalOrder,
    pub p: f64,
    pub integrals: Integrals,
    pub tail: TailFit,
    /// `‖(−Δ)ˢw + w − wᵖ‖∞ / ‖wᵖ‖∞`
    pub residual: f64,
    pub iterations: usize,
    pub newton_steps: usize,
}

impl GroundState {
    /// Diagnostics for a profile computed elsewhere, e.g. read back from disk.
    pub fn from_profile(profile: RealField, s: FractionalOrder, p: f64) -> Result<Self> {
        check_exponent(profile.grid().dimension(), s, p)?;
        let ctx = Spectral::new(*profile.grid());
        let residual = relative_residual(&ctx, &profile, s, p);
        let integrals = integrals(&ctx, &profile, p);
        let tail = tail_of(&profile, s)?;
        Ok(Self {
            profile,
            s,
            p,
            integrals,
            tail,
            residual,
            iterations: 0,
            newton_steps: 0,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        self.profile.grid()
    }

    pub fn dimension(&self) -> usize {
        self.grid().dimension()
    }

    pub fn tail_amplitude(&self) -> f64 {
        self.tail.amplitude
    }

    pub fn peak(&self) -> f64 {
        self.profile.max()
    }

    /// Order of magnitude of the error from cutting the tail at the box edge.
    pub fn truncation_estimate(&self) -> f64 {
        let l = self.grid().half_width();
        let n = self.dimension() as f64;
        self.tail.amplitude * l.powf(-(n + 2.0 * self.s.value() - 1.0))
    }

    /// Dense radial tables for off-lattice evaluation of `w(|x|)` and `w′(|x|)`.
    pub fn radial_profile(&self) -> Result<RadialProfile> {
        RadialProfile::from_ground_state(self)
    }
}

/// `(−Δ)ˢw + w − (w₊)ᵖ`.
pub fn residual_field(ctx: &Spectral, w: &RealField, s: FractionalOrder, p: f64) -> RealField {
    let lw = ctx.frac_laplacian(w, s);
    let src = w.samples();
    RealField::new(
        *w.grid(),
        lw.samples()
            .iter()
            .zip(src)
            .map(|(&a, &u)| a + u - pos_pow(u, p))
            .collect(),
    )
    .unwrap_or_else(|_| RealField::constant(*w.grid(), f64::NAN))
}

pub fn relative_residual(ctx: &Spectral, w: &RealField, s: FractionalOrder, p: f64) -> f64 {
    let r = residual_field(ctx, w, s, p);
    r.max_abs() / w.positive_pow(p).max_abs()
}

pub fn integrals(ctx: &Spectral, w: &RealField, p: f64) -> Integrals {
    let d1 = ctx.derivative(w, 0);
    Integrals {
        iw2: w.inner(w),
        iwp1: w.positive_pow(p + 1.0).integrate(),
        iwp: w.positive_pow(p).integrate(),
        idw2: d1.inner(&d1),
    }
}

/// Output of [`solve_profile`].
#[derive(Clone, Debug)]
pub struct ProfileSolve {
    pub profile: RealField,
    pub residual: f64,
    pub iterations: usize,
    pub newton_steps: usize,
}

/// The classical mode `s = 1` decays exponentially, so there is no algebraic
/// tail to fit; its fit fields are NaN and the ring machinery refuses it.
fn tail_of(w: &RealField, s: FractionalOrder) -> Result<TailFit> {
    if s.value() < 1.0 {
        return fit_tail_amplitude(w, s, TailFitOptions::default());
    }
    let l = w.grid().half_width();
    Ok(TailFit {
        amplitude: f64::NAN,
        law_exponent: w.grid().dimension() as f64 + 2.0,
        subleading: f64::NAN,
        third: f64::NAN,
        exponent: f64::NAN,
        free_amplitude: f64::NAN,
        loglog_slope: f64::NAN,
        relative_residual: f64::NAN,
        periodic_images: false,
        inner: 0.25 * l,
        outer: 0.45 * l,
    })
}

/// Petviashvili iteration and Newton polish with full diagnostics.
pub fn compute_ground_state(
    grid: GridSpec,
    s: FractionalOrder,
    p: f64,
    opts: GroundStateOptions,
) -> Result<GroundState> {
    let solved = solve_profile(grid, s, p, opts)?;
    let u = solved.profile;
    let ctx = Spectral::new(grid);
    let integrals = integrals(&ctx, &u, p);
    let tail = tail_of(&u, s)?;
    info!(
        "ground state: {} Petviashvili + {} Newton steps, residual {:.2e}, w(0) = {:.6}, A = {:.5}",
        solved.iterations,
        solved.newton_steps,
        solved.residual,
        u.max(),
        tail.amplitude
    );
    Ok(GroundState {
        profile: u,
        s,
        p,
        integrals,
        tail,
        residual: solved.residual,
        iterations: solved.iterations,
        newton_steps: solved.newton_steps,
    })
}

/// Petviashvili iteration followed by Newton polishing, both restricted to
/// fields invariant under the signed coordinate permutations.
pub fn solve_profile(grid: GridSpec, s: FractionalOrder, p: f64, opts: GroundStateOptions) -> Result<ProfileSolve> {
    let n = grid.dimension();
    check_exponent(n, s, p)?;
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::InvalidParameter(format!("damping must lie in (0, 1], got {}", opts.damping)));
    }
    let ctx = Spectral::new(grid);
    let sym = SymmetryGroup::hyperoctahedral(grid);
    let mut u = RealField::from_fn(grid, |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        (-r2).exp()
    });
    let gamma = p / (p - 1.0);
    let mut res = f64::INFINITY;
    let mut it = 0;
    let target = opts.newton_switch.max(opts.tol);
    while it < opts.max_iter {
        it += 1;
        let up = u.positive_pow(p);
        let lu = &ctx.frac_laplacian(&u, s) + &u;
        let denom = u.inner(&up);
        if !(denom > 0.0) {
            return Err(Error::NoConvergence {
                what: "Petviashvili iteration",
                iterations: it,
                residual: f64::NAN,
            });
        }
        let stab = u.inner(&lu) / denom;
        let next = &ctx.resolvent(&up, s, 1.0)? * stab.powf(gamma);
        let next = sym.project(&next);
        u = &(&u * (1.0 - opts.damping)) + &(&next * opts.damping);
        res = relative_residual(&ctx, &u, s, p);
        if !res.is_finite() {
            return Err(Error::NonFinite("Petviashvili iterate"));
        }
        if it % 50 == 0 {
            debug!("petviashvili it={it} stab={stab:.6} residual={res:.3e}");
        }
        if res <= target {
            break;
        }
    }
    if res > target {
        return Err(Error::NoConvergence {
            what: "Petviashvili iteration",
            iterations: it,
            residual: res,
        });
    }
    let mut newton = 0;
    while res > opts.tol && newton < opts.max_newton {
        newton += 1;
        let r = residual_field(&ctx, &u, s, p);
        let pot = u.map(|v| p * pos_pow(v, p - 1.0));
        let step = solve_linearized(&ctx, &sym, &pot, s, 1.0, &r, 1e-12)?;
        u.axpy(-1.0, &step);
        u = sym.project(&u);
        let prev = res;
        res = relative_residual(&ctx, &u, s, p);
        debug!("newton step {newton}: residual {res:.3e}");
        if res >= prev && res > opts.tol {
            break;
        }
    }
    if res > opts.tol {
        return Err(Error::NoConvergence {
            what: "ground-state Newton polish",
            iterations: it + newton,
            residual: res,
        });
    }
    if u.min() <= 0.0 {
        warn!("ground state has non-positive samples (min {:.3e})", u.min());
    }
    let hw = half_width_cells(&u);
    if hw < 2.0 {
        warn!("bump half-width spans only {hw:.1} cells; refine the grid");
    }
    Ok(ProfileSolve {
        profile: u,
        residual: res,
        iterations: it,
        newton_steps: newton,
    })
}

fn half_width_cells(u: &RealField) -> f64 {
    let g = u.grid();
    let m = g.points_per_axis();
    let o = g.origin_index();
    let stride = g.stride(0);
    let center = g.flatten(&vec![o; g.dimension()]);
    let peak = u.samples()[center];
    (o..m)
        .position(|i| u.samples()[center + (i - o) * stride] < 0.5 * peak)
        .unwrap_or(m / 2) as f64
}

/// Solves `((−Δ)ˢ + mass − pot) x = rhs` on the invariant subspace of `sym`
/// by MINRES preconditioned with `((−Δ)ˢ + mass)⁻¹`.
pub(crate) fn solve_linearized(
    ctx: &Spectral,
    sym: &SymmetryGroup,
    pot: &RealField,
    s: FractionalOrder,
    mass: f64,
    rhs: &RealField,
    tol: f64,
) -> Result<RealField> {
    let grid = *rhs.grid();
    let symbol = ctx.abs_symbol(s);
    let inv: Vec<f64> = symbol.iter().map(|&v| 1.0 / (v + mass)).collect();
    let fwd: Vec<f64> = symbol.iter().map(|&v| v + mass).collect();
    let apply = |x: &[f64], y: &mut [f64]| {
        let f = RealField::from_vec(grid, x.to_vec());
        let lf = ctx.apply_symbol(&f, &fwd);
        let out = sym.project(&RealField::from_vec(
            grid,
            lf.samples()
                .iter()
                .zip(pot.samples())
                .zip(x)
                .map(|((a, q), v)| a - q * v)
                .collect(),
        ));
        y.copy_from_slice(out.samples());
    };
    let precond = |x: &[f64], y: &mut [f64]| {
        let f = RealField::from_vec(grid, x.to_vec());
        y.copy_from_slice(ctx.apply_symbol(&f, &inv).samples());
    };
    let b = sym.project(rhs);
    let out = minres(
        apply,
        precond,
        b.samples(),
        None,
        MinresOptions { tol, max_iter: 3000 },
        "linearized ground-state operator",
    )?;
    Ok(sym.project(&RealField::from_vec(grid, out.x)))
}

/// Periodic lattice `2L·ℤᴺ \ {0}` for image sums of algebraic tails.
#[derive(Clone, Debug)]
struct ImageLattice {
    offsets: Vec<Vec<f64>>,
    /// Radius beyond which the lattice sum is replaced by an integral.
    cutoff: f64,
    cell: f64,
    dimension: usize,
}

/// Surface area of the unit sphere in ℝᴺ.
pub fn sphere_area(dimension: usize) -> f64 {
    // 2π^{N/2}/Γ(N/2) with Γ at integers and half-integers by recursion
    let mut g = if dimension % 2 == 0 { 1.0 } else { std::f64::consts::PI.sqrt() };
    let mut x = if dimension % 2 == 0 { 1.0 } else { 0.5 };
    while x < dimension as f64 / 2.0 {
        g *= x;
        x += 1.0;
    }
    2.0 * std::f64::consts::PI.powf(dimension as f64 / 2.0) / g
}

fn ball_volume(dimension: usize) -> f64 {
    sphere_area(dimension) / dimension as f64
}

impl ImageLattice {
    fn new(dimension: usize, half_width: f64, radius: i64) -> Self {
        let cell = 2.0 * half_width;
        let mut offsets = Vec::new();
        let side = (2 * radius + 1) as usize;
        let total = side.pow(dimension as u32);
        let mut count = 1usize;
        for flat in 0..total {
            let mut rest = flat;
            let mut n = vec![0i64; dimension];
            for v in n.iter_mut() {
                *v = (rest % side) as i64 - radius;
                rest /= side;
            }
            let n2: i64 = n.iter().map(|v| v * v).sum();
            if n2 == 0 || n2 > radius * radius {
                continue;
            }
            count += 1;
            offsets.push(n.iter().map(|&v| cell * v as f64).collect());
        }
        let r_eff = (count as f64 / ball_volume(dimension)).powf(1.0 / dimension as f64);
        Self {
            offsets,
            cutoff: cell * r_eff,
            cell,
            dimension,
        }
    }

    /// `Σ_{n≠0} |t e₁ − 2Ln|^{-e}` and its first two `t`-derivatives.
    fn sums(&self, t: f64, e: f64) -> [f64; 3] {
        let mut acc = [0.0; 3];
        for c in &self.offsets {
            let dx = t - c[0];
            let perp: f64 = c[1..].iter().map(|v| v * v).sum();
            let d2 = dx * dx + perp;
            let pw = d2.powf(-0.5 * e);
            acc[0] += pw;
            acc[1] += -e * pw / d2 * dx;
            acc[2] += e * (e + 2.0) * pw / (d2 * d2) * dx * dx - e * pw / d2;
        }
        let n = self.dimension as f64;
        acc[0] += sphere_area(self.dimension) * self.cutoff.powf(n - e) / ((e - n) * self.cell.powf(n));
        acc
    }
}

fn axis_ray(w: &RealField) -> (Vec<f64>, Vec<f64>) {
    let g = w.grid();
    let o = g.origin_index();
    let m = g.points_per_axis();
    let stride = g.stride(0);
    let center = g.flatten(&vec![o; g.dimension()]);
    (o..m)
        .map(|i| (g.coordinate(i), w.samples()[center + (i - o) * stride]))
        .unzip()
}

fn linear_lsq(cols: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, f64) {
    let k = cols.len();
    let a = nalgebra::DMatrix::from_fn(y.len(), k, |i, j| cols[j][i]);
    let b = nalgebra::DVector::from_column_slice(y);
    let svd = a.clone().svd(true, true);
    let x = svd.solve(&b, 1e-14).unwrap_or_else(|_| nalgebra::DVector::zeros(k));
    let r = (&a * &x - &b).norm();
    (x.iter().copied().collect(), r)
}

/// Fits `A|x|^{-β} + B|x|^{-β-2}` (optionally with periodic images) to the
/// profile along the positive `x₁` axis on `[inner·L, outer·L]`.
pub fn fit_tail_amplitude(w: &RealField, s: FractionalOrder, opts: TailFitOptions) -> Result<TailFit> {
    let g = *w.grid();
    let n = g.dimension() as f64;
    let l = g.half_width();
    let (ts, ws) = axis_ray(w);
    let (t, y): (Vec<f64>, Vec<f64>) = ts
        .iter()
        .zip(&ws)
        .filter(|(&t, _)| t >= opts.inner_fraction * l && t <= opts.outer_fraction * l)
        .map(|(&t, &v)| (t, v))
        .unzip();
    if t.len() < 4 {
        return Err(Error::InvalidParameter("tail annulus holds fewer than 4 samples".into()));
    }
    let lattice = opts.periodic_images.then(|| ImageLattice::new(g.dimension(), l, 24));
    let basis = |e: f64| -> Vec<f64> {
        t.iter()
            .map(|&ti| {
                let img = lattice.as_ref().map(|lt| lt.sums(ti, e)[0]).unwrap_or(0.0);
                ti.powf(-e) + img
            })
            .collect()
    };
    let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let objective = |beta: f64| -> (Vec<f64>, f64) {
        let cols = vec![basis(beta), basis(beta + 2.0)];
        let (x, r) = linear_lsq(&cols, &y);
        (x, r / ynorm)
    };
    let nominal = n + 2.0 * s.value();
    let lo = (nominal - opts.exponent_window).max(n + 0.05);
    let hi = nominal + opts.exponent_window;
    let (beta, _) = crate::optimize::golden_section(|b| -objective(b).1, lo, hi, 1e-12, 200);
    let (free, rel_free) = objective(beta);
    let (coef, rel_fixed) = linear_lsq(&[basis(nominal), basis(nominal + 2.0), basis(2.0 * nominal)], &y);
    let rel = rel_free.max(rel_fixed / ynorm);
    let lx: Vec<f64> = t.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.max(f64::MIN_POSITIVE).ln()).collect();
    let (sl, _) = linear_lsq(&[vec![1.0; lx.len()], lx], &ly);
    let fit = TailFit {
        amplitude: coef[0],
        law_exponent: nominal,
        subleading: coef[1],
        third: coef[2],
        exponent: beta,
        free_amplitude: free[0],
        loglog_slope: -sl[1],
        relative_residual: rel,
        periodic_images: opts.periodic_images,
        inner: opts.inner_fraction * l,
        outer: opts.outer_fraction * l,
    };
    if rel > opts.threshold || !(fit.amplitude > 0.0) {
        return Err(Error::UnresolvedTail {
            residual: rel,
            threshold: opts.threshold,
        });
    }
    Ok(fit)
}

/// True when the profile decreases along every lattice ray from the origin
/// in a direction `d ∈ {−1, 0, 1}ᴺ`, allowing `slack` per step.
pub fn radial_monotonicity_check(w: &RealField) -> bool {
    radial_monotonicity_with_slack(w, 1e-10)
}

pub fn radial_monotonicity_with_slack(w: &RealField, slack: f64) -> bool {
    let g = *w.grid();
    let n = g.dimension();
    let m = g.points_per_axis() as i64;
    let o = g.origin_index() as i64;
    let dirs = 3usize.pow(n as u32);
    let mut idx = vec![0usize; n];
    for code in 0..dirs {
        let d: Vec<i64> = (0..n).map(|a| (code / 3usize.pow(a as u32)) as i64 % 3 - 1).collect();
        if d.iter().all(|&v| v == 0) {
            continue;
        }
        let mut prev = f64::INFINITY;
        let mut step = 0i64;
        loop {
            let pos: Vec<i64> = d.iter().map(|&v| o + v * step).collect();
            if pos.iter().any(|&v| v < 0 || v >= m) {
                break;
            }
            for (i, &v) in idx.iter_mut().zip(&pos) {
                *i = v as usize;
            }
            let val = w.samples()[g.flatten(&idx)];
            if step > 0 && val >= prev + slack {
                return false;
            }
            prev = val;
            step += 1;
        }
    }
    true
}

/// Largest spread of `w` among lattice points at exactly equal distance from
/// the origin, over `|x| ≤ radius`, relative to `max w`.
pub fn radial_defect(w: &RealField, radius: f64) -> f64 {
    let g = *w.grid();
    let h = g.spacing();
    let o = g.origin_index() as i64;
    let lim = (radius / h).floor() as i64;
    let mut groups: HashMap<i64, (f64, f64)> = HashMap::new();
    let mut idx = vec![0usize; g.dimension()];
    for flat in 0..g.len() {
        g.unflatten(flat, &mut idx);
        let r2: i64 = idx.iter().map(|&i| (i as i64 - o) * (i as i64 - o)).sum();
        if r2 > lim * lim {
            continue;
        }
        let v = w.samples()[flat];
        let e = groups.entry(r2).or_insert((v, v));
        e.0 = e.0.min(v);
        e.1 = e.1.max(v);
    }
    let spread = groups.values().map(|(a, b)| b - a).fold(0.0, f64::max);
    spread / w.max_abs()
}

/// Spectrum of `L₊ = (−Δ)ˢ + 1 − p w^{p−1}` near zero.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NondegeneracyReport {
    pub near_zero_count: usize,
    pub near_zero_eigenvalues: Vec<f64>,
    /// Smallest eigenvalue magnitude on fields invariant under all signed
    /// coordinate permutations.
    pub symmetric_sector_gap: f64,
    /// Smallest-magnitude eigenvalues, ascending by magnitude.
    pub eigenvalues: Vec<f64>,
    /// `‖L₊ ∂₁w‖ / ‖∂₁w‖`.
    pub translation_residual: f64,
    pub threshold: f64,
}

pub fn linearized_apply(ctx: &Spectral, gs: &GroundState, x: &RealField) -> RealField {
    let p = gs.p;
    let lx = &ctx.frac_laplacian(x, gs.s) + x;
    RealField::from_vec(
        *x.grid(),
        lx.samples()
            .iter()
            .zip(gs.profile.samples())
            .zip(x.samples())
            .map(|((a, &w), &v)| a - p * pos_pow(w, p - 1.0) * v)
            .collect(),
    )
}

pub fn translation_mode_residual(gs: &GroundState) -> f64 {
    let ctx = Spectral::new(*gs.grid());
    let d1 = ctx.derivative(&gs.profile, 0);
    let r = linearized_apply(&ctx, gs, &d1);
    (r.inner(&r) / d1.inner(&d1)).sqrt()
}

/// Smallest-magnitude eigenvalues of the linearization at `gs`.
///
/// Lanczos runs separately in each reflection-parity sector, plus once on the
/// fully symmetric fields for the gap. `count` eigenvalues are reported.
pub fn check_nondegeneracy(gs: &GroundState, count: usize) -> Result<NondegeneracyReport> {
    let threshold = 1e-4;
    let grid = *gs.grid();
    let n = grid.dimension();
    let ctx = Spectral::new(grid);
    let refl = SymmetryGroup::new(grid, reflections(n));
    let full = SymmetryGroup::hyperoctahedral(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let start: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let per_sector = count.max(2);
    let opts = LanczosOptions {
        count: per_sector,
        max_steps: 600,
        tol: 1e-6,
        check_every: 5,
    };
    let run = |project: &(dyn Fn(&RealField) -> RealField + Sync), what: &'static str| -> Result<Vec<f64>> {
        let vals = lanczos_smallest(
            |x, y| {
                let f = RealField::from_vec(grid, x.to_vec());
                y.copy_from_slice(linearized_apply(&ctx, gs, &f).samples());
            },
            |v| {
                let f = project(&RealField::from_vec(grid, v.to_vec()));
                v.copy_from_slice(f.samples());
            },
            &start,
            opts,
            what,
        )?;
        debug!("{what}: {:?}", vals);
        Ok(vals.into_iter().map(|r| r.value).collect())
    };
    let sectors = parity_sectors(n);
    let per: Vec<Result<Vec<f64>>> = sectors
        .par_iter()
        .map(|sec| run(&|f: &RealField| refl.project_with_character(f, |g| sec.character(g)), "parity-sector Lanczos"))
        .collect();
    let mut all = Vec::new();
    for r in per {
        all.extend(r?);
    }
    all.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    all.truncate(count);
    let sym_vals = run(&|f: &RealField| full.project(f), "symmetric-sector Lanczos")?;
    let gap = sym_vals.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    let near: Vec<f64> = all.iter().copied().filter(|v| v.abs() < threshold).collect();
    Ok(NondegeneracyReport {
        near_zero_count: near.len(),
        near_zero_eigenvalues: near,
        symmetric_sector_gap: gap,
        eigenvalues: all,
        translation_residual: translation_mode_residual(gs),
        threshold,
    })
}

/// Cubic Hermite tables of `w(ρ)` on a fine radial mesh, blended into the
/// fitted algebraic tail so that evaluation works at any distance.
#[derive(Clone, Debug)]
pub struct RadialProfile {
    step: f64,
    w: Vec<f64>,
    dw: Vec<f64>,
    d2w: Vec<f64>,
    blend_lo: f64,
    blend_hi: f64,
    tail_a: f64,
    tail_b: f64,
    tail_c: f64,
    beta: f64,
    dimension: usize,
}

impl RadialProfile {
    pub const REFINE: usize = 16;

    fn from_ground_state(gs: &GroundState) -> Result<Self> {
        if !gs.tail.amplitude.is_finite() {
            return Err(Error::InvalidParameter("radial tables need an algebraic tail (s < 1)".into()));
        }
        let g = *gs.grid();
        let m = g.points_per_axis();
        let l = g.half_width();
        let (_, ray) = axis_ray(&gs.profile);
        // the line through the origin along x₁ in full, ordered by index
        let o = g.origin_index();
        let stride = g.stride(0);
        let center = g.flatten(&vec![o; g.dimension()]);
        let line: Vec<f64> = (0..m).map(|i| gs.profile.samples()[center - o * stride + i * stride]).collect();
        debug_assert_eq!(line[o], ray[0]);
        let g1 = GridSpec::new(1, l, m)?;
        let fine = GridSpec::new(1, l, m * Self::REFINE)?;
        let coarse_ctx = Spectral::new(g1);
        let up = resample(&coarse_ctx.forward_transform(&RealField::new(g1, line)?)?, &fine);
        let fctx = Spectral::new(fine);
        let wf = fctx.inverse_transform(&up)?;
        let dwf = fctx.derivative(&wf, 0);
        let d2wf = fctx.derivative(&dwf, 0);
        let fo = fine.origin_index();
        let blend_hi = gs.tail.outer;
        let count = ((blend_hi / fine.spacing()).ceil() as usize + 2).min(fine.points_per_axis() - fo);
        let tail = gs.tail;
        let lattice = tail.periodic_images.then(|| ImageLattice::new(g.dimension(), l, 24));
        let mut w = Vec::with_capacity(count);
        let mut dw = Vec::with_capacity(count);
        let mut d2w = Vec::with_capacity(count);
        for i in 0..count {
            let t = i as f64 * fine.spacing();
            let mut c = [0.0; 3];
            if let Some(lt) = &lattice {
                let a = lt.sums(t, tail.law_exponent);
                let b = lt.sums(t, tail.law_exponent + 2.0);
                let d = lt.sums(t, 2.0 * tail.law_exponent);
                for j in 0..3 {
                    c[j] = tail.amplitude * a[j] + tail.subleading * b[j] + tail.third * d[j];
                }
            }
            w.push(wf.samples()[fo + i] - c[0]);
            dw.push(if i == 0 { 0.0 } else { dwf.samples()[fo + i] - c[1] });
            d2w.push(d2wf.samples()[fo + i] - c[2]);
        }
        Ok(Self {
            step: fine.spacing(),
            w,
            dw,
            d2w,
            blend_lo: tail.inner,
            blend_hi,
            tail_a: tail.amplitude,
            tail_b: tail.subleading,
            tail_c: tail.third,
            beta: tail.law_exponent,
            dimension: g.dimension(),
        })
    }

    fn hermite(&self, vals: &[f64], ders: &[f64], rho: f64) -> f64 {
        let pos = rho / self.step;
        let i = (pos.floor() as usize).min(vals.len() - 2);
        let u = pos - i as f64;
        let h = self.step;
        let u2 = u * u;
        let u3 = u2 * u;
        (2.0 * u3 - 3.0 * u2 + 1.0) * vals[i]
            + (u3 - 2.0 * u2 + u) * h * ders[i]
            + (-2.0 * u3 + 3.0 * u2) * vals[i + 1]
            + (u3 - u2) * h * ders[i + 1]
    }

    fn tail(&self, rho: f64) -> (f64, f64) {
        let a = self.tail_a * rho.powf(-self.beta);
        let b = self.tail_b * rho.powf(-self.beta - 2.0);
        let c = self.tail_c * rho.powf(-2.0 * self.beta);
        (a + b + c, -(self.beta * a + (self.beta + 2.0) * b + 2.0 * self.beta * c) / rho)
    }

    /// `(w(ρ), w′(ρ))`.
    pub fn eval(&self, rho: f64) -> (f64, f64) {
        let rho = rho.abs();
        if rho <= self.blend_lo {
            return (self.hermite(&self.w, &self.dw, rho), self.hermite(&self.dw, &self.d2w, rho));
        }
        let (tv, td) = self.tail(rho);
        if rho >= self.blend_hi {
            return (tv, td);
        }
        let span = self.blend_hi - self.blend_lo;
        let z = (rho - self.blend_lo) / span;
        let sm = z * z * z * (10.0 - 15.0 * z + 6.0 * z * z);
        let dsm = 30.0 * z * z * (1.0 - z) * (1.0 - z) / span;
        let v = self.hermite(&self.w, &self.dw, rho);
        let d = self.hermite(&self.dw, &self.d2w, rho);
        ((1.0 - sm) * v + sm * tv, (1.0 - sm) * d + sm * td + dsm * (tv - v))
    }

    pub fn value(&self, rho: f64) -> f64 {
        self.eval(rho).0
    }

    pub fn derivative(&self, rho: f64) -> f64 {
        self.eval(rho).1
    }

    pub fn peak(&self) -> f64 {
        self.w[0]
    }

    /// `∫_{ℝᴺ} f(w(|x|), w′(|x|)) dx` by Simpson's rule in the radius, switching
    /// to a logarithmic variable past the blend.
    pub fn radial_integral(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        let n = self.dimension as i32;
        let g = |rho: f64| {
            let (v, d) = self.eval(rho);
            f(v, d) * rho.powi(n - 1)
        };
        let intervals = 2 * ((self.blend_hi / self.step / 2.0).ceil() as usize).max(1);
        let h = self.blend_hi / intervals as f64;
        let inner = simpson(&g, 0.0, h, intervals);
        let far = simpson(&|t: f64| {
            let rho = self.blend_hi * t.exp();
            g(rho) * rho
        }, 0.0, 12.0 / 4000.0, 4000);
        sphere_area(self.dimension) * (inner + far)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Radius where the profile first drops to half its peak.
    pub fn half_width(&self) -> f64 {
        let half = 0.5 * self.w[0];
        let i = self.w.iter().position(|&v| v < half).unwrap_or(self.w.len() - 1);
        let (a, b) = (self.w[i - 1], self.w[i]);
        self.step * ((i - 1) as f64 + (a - half) / (a - b))
    }
}

fn simpson(f: &impl Fn(f64) -> f64, a: f64, h: f64, intervals: usize) -> f64 {
    let mut acc = f(a) + f(a + h * intervals as f64);
    for i in 1..intervals {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + h * i as f64);
    }
    acc * h / 3.0
}

/// `∫ u (−Δ)ˢ u`.
pub fn quadratic_form(ctx: &Spectral, u: &RealField, s: FractionalOrder) -> f64 {
    dot(u.samples(), ctx.frac_laplacian(u, s).samples()) * u.grid().cell_volume()
}
