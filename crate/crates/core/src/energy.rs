// SPDX-License-Identifier: Apache-2.0

//! The energy functional, its expansion along the ring ansatz, and the
//! search for the radius that maximizes the reduced energy.

use std::cell::RefCell;

use serde::{Deserialize, Serialize};

pub use crate::ansatz::circle_sum;
use crate::ansatz::SpikeRing;
use crate::error::{Error, Result};
use crate::grid::{dot, pos_pow, FractionalOrder, GridSpec, RealField};
use crate::ground_state::{GroundState, RadialProfile};
use crate::optimize::golden_section_traced;
use crate::reduction::{ProblemSpec, ReducedSolution, RingSetup};
use crate::spectral::Spectral;

/// `J(u) = ½∫u(−Δ)ˢu + Vu² − 1/(p+1)∫u₊^{p+1}`.
pub fn energy(ctx: &Spectral, u: &RealField, v: &RealField, s: FractionalOrder, p: f64) -> f64 {
    let lu = ctx.frac_laplacian(u, s);
    let hv = u.grid().cell_volume();
    let quad = dot(u.samples(), lu.samples());
    let pot: f64 = u.samples().iter().zip(v.samples()).map(|(a, b)| b * a * a).sum();
    let nl: f64 = u.samples().iter().map(|&a| pos_pow(a, p + 1.0)).sum();
    hv * (0.5 * (quad + pot) - nl / (p + 1.0))
}

/// Richardson limit of `S(k, r)·(r/k)^ℓ` from three ring sizes.
pub fn circle_sum_constant_levels(ell: f64, ks: [usize; 3]) -> Result<f64> {
    if !(ell > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "the circle-sum constant needs ell > 1, got {ell}"
        )));
    }
    let e1 = 2.0f64.min(ell - 1.0);
    let e2 = 2.0f64.max(ell - 1.0);
    let coincide = (e1 - e2).abs() < 1e-9;
    let mut a = nalgebra::Matrix3::<f64>::zeros();
    let mut b = nalgebra::Vector3::<f64>::zeros();
    for (row, &k) in ks.iter().enumerate() {
        let kf = k as f64;
        b[row] = circle_sum(k, 1.0, ell) / kf.powf(ell);
        a[(row, 0)] = 1.0;
        if coincide {
            a[(row, 1)] = kf.powf(-e1) * kf.ln();
            a[(row, 2)] = kf.powf(-e1);
        } else {
            a[(row, 1)] = kf.powf(-e1);
            a[(row, 2)] = kf.powf(-e2);
        }
    }
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::InvalidParameter("degenerate extrapolation levels".into()))?;
    Ok(x[0])
}

/// `C_ℓ = lim S(k, r)(r/k)^ℓ` extrapolated from `k = 2¹⁰, 2¹², 2¹⁴`.
pub fn circle_sum_constant(ell: f64) -> Result<f64> {
    circle_sum_constant_levels(ell, [1 << 10, 1 << 12, 1 << 14])
}

/// Coefficients of the energy expansion along the ring.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionCoeffs {
    #[serde(rename = "A1")]
    pub a1: f64,
    #[serde(rename = "B1")]
    pub b1: f64,
    #[serde(rename = "Btilde2")]
    pub btilde2: f64,
    #[serde(rename = "C_ell")]
    pub c_ell: f64,
    #[serde(rename = "B2")]
    pub b2: f64,
}

impl ExpansionCoeffs {
    /// `B1 = 0`, i.e. no potential.
    pub fn is_degenerate(&self) -> bool {
        self.b1 == 0.0
    }

    /// `((N+2s)B2/(mB1))^{1/(N+2s−m)}`.
    pub fn r0_prefactor(&self, dimension: usize, s: FractionalOrder, m: f64) -> Result<f64> {
        let ell = dimension as f64 + 2.0 * s.value();
        check_m(m, ell)?;
        if !(self.b1 > 0.0) {
            return Err(Error::InvalidParameter("optimal radius needs B1 > 0".into()));
        }
        Ok((ell * self.b2 / (m * self.b1)).powf(1.0 / (ell - m)))
    }
}

fn check_m(m: f64, ell: f64) -> Result<()> {
    if m > 0.0 && m < ell {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("m = {m} must lie in (0, N+2s) = (0, {ell})")))
    }
}

/// All five coefficients from a ground state, with potential strength `a`.
pub fn expansion_coeffs(gs: &GroundState, a: f64) -> Result<ExpansionCoeffs> {
    let n = gs.dimension() as f64;
    let ell = n + 2.0 * gs.s.value();
    let ints = gs.integrals;
    let a1 = (0.5 - 1.0 / (gs.p + 1.0)) * ints.iwp1;
    let b1 = 0.5 * a * ints.iw2;
    let btilde2 = gs.tail_amplitude() * ints.iwp;
    let c_ell = circle_sum_constant(ell)?;
    let b2 = 0.5 * btilde2 * c_ell;
    let out = ExpansionCoeffs { a1, b1, btilde2, c_ell, b2 };
    if !(a1 > 0.0 && btilde2 > 0.0 && c_ell > 0.0 && b2 > 0.0) || b1 < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "nonpositive expansion coefficient {out:?}; the ground state is not usable"
        )));
    }
    Ok(out)
}

/// `r₀ = ((N+2s)B2/(mB1))^{1/(N+2s−m)} k^{(N+2s)/(N+2s−m)}`.
pub fn optimal_radius(k: usize, coeffs: &ExpansionCoeffs, dimension: usize, s: FractionalOrder, m: f64) -> Result<f64> {
    let ell = dimension as f64 + 2.0 * s.value();
    Ok(coeffs.r0_prefactor(dimension, s, m)? * (k as f64).powf(ell / (ell - m)))
}

/// Smallest `C0` for which `r₀` lies in the admissible interval.
pub fn required_c0(coeffs: &ExpansionCoeffs, dimension: usize, s: FractionalOrder, m: f64) -> Result<f64> {
    let c = coeffs.r0_prefactor(dimension, s, m)?;
    Ok(c.max(1.0 / c))
}

/// The two conditions on `C0` that push the maximum of the reduced energy
/// into the interior of the admissible interval.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EndpointInequalities {
    pub c0: f64,
    /// `B1C0ᵐ − B2C0^{N+2s}`, must be negative.
    pub lower_margin: f64,
    /// `B1/C0ᵐ`
    pub upper_lhs: f64,
    /// `B1(mB1/((N+2s)B2))^{m/(N+2s−m)}(N+2s−m)/(4(N+2s))`
    pub upper_rhs: f64,
}

impl EndpointInequalities {
    pub fn lower_holds(&self) -> bool {
        self.lower_margin < 0.0
    }

    pub fn upper_holds(&self) -> bool {
        self.upper_lhs < self.upper_rhs
    }

    pub fn hold(&self) -> bool {
        self.lower_holds() && self.upper_holds()
    }
}

pub fn endpoint_inequalities(
    coeffs: &ExpansionCoeffs,
    c0: f64,
    dimension: usize,
    s: FractionalOrder,
    m: f64,
) -> Result<EndpointInequalities> {
    let ell = dimension as f64 + 2.0 * s.value();
    check_m(m, ell)?;
    let (b1, b2) = (coeffs.b1, coeffs.b2);
    Ok(EndpointInequalities {
        c0,
        lower_margin: b1 * c0.powf(m) - b2 * c0.powf(ell),
        upper_lhs: b1 / c0.powf(m),
        upper_rhs: b1 * (m * b1 / (ell * b2)).powf(m / (ell - m)) * (ell - m) / (4.0 * ell),
    })
}

/// `J(W)` against `k[A1 + B1/rᵐ − ½B̃2 S(N+2s)]`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EnergyReport {
    pub k: usize,
    pub r: f64,
    pub j_direct: f64,
    pub j_expansion: f64,
    /// `kA1`
    pub leading: f64,
    /// `kB1/rᵐ`
    pub potential_term: f64,
    /// `−½kB̃2 S(N+2s)`
    pub interaction_term: f64,
    /// `|J_direct − J_expansion| / (kB1/rᵐ + |interaction term|)`
    pub relative_gap: f64,
}

impl EnergyReport {
    /// Leading term above both corrections, and both corrections above the
    /// discrepancy between `J` and the expansion.
    pub fn dominance_holds(&self) -> bool {
        let gap = (self.j_direct - self.j_expansion).abs();
        let inter = self.interaction_term.abs();
        self.leading > self.potential_term.max(inter) && self.potential_term.min(inter) > gap
    }
}

pub fn expansion_report(
    k: usize,
    r: f64,
    j_direct: f64,
    coeffs: &ExpansionCoeffs,
    dimension: usize,
    s: FractionalOrder,
    m: f64,
) -> EnergyReport {
    let ell = dimension as f64 + 2.0 * s.value();
    let kf = k as f64;
    let leading = kf * coeffs.a1;
    let potential_term = kf * coeffs.b1 / r.powf(m);
    let interaction_term = if k >= 2 {
        -0.5 * kf * coeffs.btilde2 * circle_sum(k, r, ell)
    } else {
        0.0
    };
    let j_expansion = leading + potential_term + interaction_term;
    let scale = potential_term + interaction_term.abs();
    EnergyReport {
        k,
        r,
        j_direct,
        j_expansion,
        leading,
        potential_term,
        interaction_term,
        relative_gap: if scale > 0.0 { (j_direct - j_expansion).abs() / scale } else { f64::NAN },
    }
}

/// `J(W)` on the setup's grid compared with the expansion.
pub fn expansion_check(setup: &RingSetup, spec: &ProblemSpec, coeffs: &ExpansionCoeffs) -> EnergyReport {
    let j = energy(&setup.ctx, &setup.bumps.total, &setup.v, spec.s, spec.p);
    expansion_report(
        setup.spikes.k(),
        setup.spikes.radius(),
        j,
        coeffs,
        setup.grid().dimension(),
        spec.s,
        spec.potential.m,
    )
}

/// One evaluation of the reduced energy.
#[derive(Clone, Debug)]
pub struct ReducedPoint {
    pub r: f64,
    /// `F(r) = J(W + Φ(r))`
    pub f: f64,
    pub c: f64,
    /// `J(W)` on the same grid.
    pub j_w: f64,
    pub solution: ReducedSolution,
}

/// `F(r)` and `c(r)` for rings of `k` spikes; `k = 1` is a single spike at
/// `(r, 0, …)`.
pub struct ReducedEnergy<'a> {
    pub profile: &'a RadialProfile,
    pub spec: &'a ProblemSpec,
    pub k: usize,
    pub dimension: usize,
    /// When set, every radius is evaluated on this grid.
    pub grid: Option<GridSpec>,
}

impl ReducedEnergy<'_> {
    pub fn setup(&self, r: f64) -> Result<RingSetup> {
        let grid = match self.grid {
            Some(g) => g,
            None => self.spec.grid_for(self.dimension, r)?,
        };
        let spikes = if self.k == 1 {
            let mut q = vec![0.0; self.dimension];
            q[0] = r;
            SpikeRing::single(q)
        } else {
            SpikeRing::new(self.k, r, self.dimension)?
        };
        RingSetup::new(self.profile, self.spec, spikes, grid)
    }

    pub fn evaluate(&self, r: f64) -> Result<ReducedPoint> {
        let setup = self.setup(r)?;
        let sol = setup.correction(self.spec.fixed_point)?;
        let u = &setup.bumps.total + &sol.phi;
        let f = energy(&setup.ctx, &u, &setup.v, self.spec.s, self.spec.p);
        let j_w = energy(&setup.ctx, &setup.bumps.total, &setup.v, self.spec.s, self.spec.p);
        Ok(ReducedPoint {
            r,
            f,
            c: sol.c,
            j_w,
            solution: sol,
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RadiusSearchOptions {
    /// Final bracket width relative to the radius.
    pub rel_tol: f64,
    pub max_evals: usize,
    /// `δ/r` for the central difference of `F`.
    pub fd_step: f64,
}

impl Default for RadiusSearchOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-3,
            max_evals: 60,
            fd_step: 1e-2,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RadiusSample {
    pub r: f64,
    pub f: f64,
    pub c: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RadiusSearchResult {
    pub r1: f64,
    pub f_at_r1: f64,
    pub c_at_r1: f64,
    /// Central difference with step `δ`.
    pub fprime_at_r1: f64,
    /// The same with step `δ/2`.
    pub fprime_half_step: f64,
    pub endpoint_values: (f64, f64),
    pub interval: (f64, f64),
    /// Closest sampled multipliers on either side of `r₁`.
    pub c_left: Option<RadiusSample>,
    pub c_right: Option<RadiusSample>,
    pub samples: Vec<RadiusSample>,
}

impl RadiusSearchResult {
    pub fn c_changes_sign(&self) -> bool {
        match (self.c_left, self.c_right) {
            (Some(a), Some(b)) => a.c * b.c < 0.0,
            _ => false,
        }
    }

    pub fn interior(&self) -> bool {
        self.r1 > self.interval.0 && self.r1 < self.interval.1
    }
}

/// Golden-section maximization of `F` in `log r` over `interval`, followed by
/// central differences of `F` at the maximizer. `evaluate` returns `(F, c)`.
pub fn maximize_reduced_energy(
    evaluate: impl FnMut(f64) -> Result<(f64, f64)>,
    interval: (f64, f64),
    opts: RadiusSearchOptions,
) -> Result<RadiusSearchResult> {
    let (lo, hi) = interval;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidParameter(format!("bad radius interval [{lo}, {hi}]")));
    }
    let evaluate = RefCell::new(evaluate);
    let samples: RefCell<Vec<RadiusSample>> = RefCell::new(Vec::new());
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let sample = |r: f64| -> f64 {
        if failure.borrow().is_some() {
            return f64::NAN;
        }
        match (evaluate.borrow_mut())(r) {
            Ok((f, c)) => {
                log::info!("F({r:.6}) = {f:.10}, c = {c:.4e}");
                samples.borrow_mut().push(RadiusSample { r, f, c });
                f
            }
            Err(e) => {
                *failure.borrow_mut() = Some(e);
                f64::NAN
            }
        }
    };
    let tol = opts.rel_tol.ln_1p();
    let (best, _) = golden_section_traced(|t| sample(t.exp()), lo.ln(), hi.ln(), tol, opts.max_evals);
    if let Some(e) = failure.borrow_mut().take() {
        return Err(e);
    }
    let r1 = best.x.exp();
    let list = samples.borrow().clone();
    let endpoint_values = (list[0].f, list[1].f);
    if (r1 - lo).abs() <= 1e-12 * lo || (r1 - hi).abs() <= 1e-12 * hi {
        return Err(Error::EndpointMaximizer { r: r1, lo, hi });
    }
    let at = list
        .iter()
        .find(|p| p.r == r1)
        .copied()
        .unwrap_or(RadiusSample { r: r1, f: best.value, c: f64::NAN });
    let left = list.iter().filter(|p| p.r < r1).max_by(|a, b| a.r.total_cmp(&b.r)).copied();
    let right = list.iter().filter(|p| p.r > r1).min_by(|a, b| a.r.total_cmp(&b.r)).copied();
    let delta = opts.fd_step * r1;
    let diff = |d: f64| -> Result<f64> {
        let (fp, _) = (evaluate.borrow_mut())(r1 + d)?;
        let (fm, _) = (evaluate.borrow_mut())(r1 - d)?;
        Ok((fp - fm) / (2.0 * d))
    };
    let fprime_at_r1 = diff(delta)?;
    let fprime_half_step = diff(0.5 * delta)?;
    Ok(RadiusSearchResult {
        r1,
        f_at_r1: at.f,
        c_at_r1: at.c,
        fprime_at_r1,
        fprime_half_step,
        endpoint_values,
        interval,
        c_left: left,
        c_right: right,
        samples: list,
    })
}

/// Secant iteration on `c(r) = 0` starting from two radii.
pub fn refine_multiplier_root(
    mut c_of: impl FnMut(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(f64, f64)> {
    let mut ca = c_of(a)?;
    let mut cb = c_of(b)?;
    for _ in 0..max_iter {
        if cb.abs() <= tol {
            return Ok((b, cb));
        }
        if cb == ca {
            break;
        }
        let next = b - cb * (b - a) / (cb - ca);
        a = b;
        ca = cb;
        b = next;
        cb = c_of(b)?;
    }
    if cb.abs() <= tol {
        Ok((b, cb))
    } else {
        Err(Error::NoConvergence {
            what: "multiplier root",
            iterations: max_iter,
            residual: cb.abs(),
        })
    }
}
