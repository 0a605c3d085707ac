// SPDX-License-Identifier: Apache-2.0

//! The commands behind the `fracbump` binary. Each writes its files into one
//! output directory and finishes with `manifest.json`.

use std::cell::RefCell;
use std::path::Path;
use std::str::FromStr;

use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{
    admissible_radius_interval, build_multibump, check_error_bound, error_field, evaluate_potential,
    ring_symmetry_defect, star_norm, ErrorBoundReport, SpikeRing, WeightRho,
};
use crate::config::{RadiusChoice, RunConfig};
use crate::energy::{
    endpoint_inequalities, expansion_coeffs, expansion_report, maximize_reduced_energy, optimal_radius,
    refine_multiplier_root, required_c0, EndpointInequalities, ExpansionCoeffs, RadiusSearchResult, ReducedEnergy,
};
use crate::error::{Error, Result};
use crate::ground_state::{check_nondegeneracy, compute_ground_state, GroundState, RadialProfile};
use crate::grid::{FractionalOrder, GridSpec, RealField};
use crate::io::{key_value_text, parse_key_value_text, read_field, RunManifest, RunOutputs};
use crate::reduction::{ProblemSpec, RingSetup};
use crate::spectral::Spectral;

pub const GROUND_STATE_FIELD: &str = "ground_state.fld";
pub const GROUND_STATE_META: &str = "ground_state.meta";

pub const REDUCE_CSV: (&str, u32) = ("reduce", 1);
pub const LINEAR_CSV: (&str, u32) = ("linear", 1);
pub const ANSATZ_CSV: (&str, u32) = ("ansatz", 1);
pub const SWEEP_CSV: (&str, u32) = ("sweep", 1);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    GroundState,
    Coeffs,
    Ansatz,
    Reduce,
    Construct,
    Sweep,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::GroundState,
        Command::Coeffs,
        Command::Ansatz,
        Command::Reduce,
        Command::Construct,
        Command::Sweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::GroundState => "ground-state",
            Command::Coeffs => "coeffs",
            Command::Ansatz => "ansatz",
            Command::Reduce => "reduce",
            Command::Construct => "construct",
            Command::Sweep => "sweep",
        }
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown task `{s}`")))
    }
}

/// Runs `cmd` and writes its outputs and manifest into `out_dir`.
pub fn run(cmd: Command, cfg: &RunConfig, out_dir: &Path) -> Result<RunManifest> {
    cfg.validate()?;
    let mut out = RunOutputs::new(out_dir)?;
    info!("{} -> {}", cmd.name(), out_dir.display());
    match cmd {
        Command::GroundState => cmd_ground_state(cfg, &mut out)?,
        Command::Coeffs => cmd_coeffs(cfg, &mut out)?,
        Command::Ansatz => cmd_ansatz(cfg, &mut out)?,
        Command::Reduce => cmd_reduce(cfg, &mut out)?,
        Command::Construct => cmd_construct(cfg, &mut out)?,
        Command::Sweep => cmd_sweep(cfg, &mut out)?,
    }
    out.finish(cmd.name(), serde_json::to_value(cfg)?)
}

/// Sidecar of `ground_state.fld`, stored as `key = value` text.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundStateMeta {
    #[serde(rename = "N")]
    pub dimension: usize,
    pub s: f64,
    pub p: f64,
    #[serde(rename = "L")]
    pub half_width: f64,
    #[serde(rename = "M")]
    pub points: usize,
    pub field: String,
    /// `‖(−Δ)ˢw + w − wᵖ‖∞ / ‖wᵖ‖∞`
    pub residual: f64,
    pub dealiased_residual: Option<f64>,
    pub iterations: usize,
    pub newton_steps: usize,
    pub peak: f64,
    /// Tail amplitude of `w ≈ A|x|^{−(N+2s)}`.
    #[serde(rename = "A")]
    pub amplitude: f64,
    pub tail_exponent: f64,
    pub loglog_slope: f64,
    pub tail_fit_residual: f64,
    pub truncation_estimate: f64,
    #[serde(rename = "Iw2")]
    pub iw2: f64,
    #[serde(rename = "Iwp1")]
    pub iwp1: f64,
    #[serde(rename = "Iwp")]
    pub iwp: f64,
    #[serde(rename = "Idw2")]
    pub idw2: f64,
}

impl GroundStateMeta {
    fn matches(&self, cfg: &RunConfig) -> bool {
        self.dimension == cfg.dimension
            && self.s == cfg.s
            && self.p == cfg.p
            && self.half_width == cfg.half_width
            && self.points == cfg.points
    }
}

/// `(−Δ)ˢu + Vu − uᵖ`, with the power dealiased when asked.
pub fn equation_residual(ctx: &Spectral, u: &RealField, v: &RealField, s: FractionalOrder, p: f64, dealias: bool) -> Result<RealField> {
    let up = ctx.dealiased_power(u, p, if dealias { 2 } else { 1 })?;
    let lu = ctx.frac_laplacian(u, s);
    let vu = v * u;
    Ok(&(&lu + &vu) - &up)
}

fn ground_state_meta(cfg: &RunConfig, gs: &GroundState) -> Result<GroundStateMeta> {
    let dealiased_residual = if cfg.dealias {
        let ctx = Spectral::new(*gs.grid());
        let one = RealField::constant(*gs.grid(), 1.0);
        let r = equation_residual(&ctx, &gs.profile, &one, gs.s, gs.p, true)?;
        Some(r.max_abs() / gs.profile.positive_pow(gs.p).max_abs())
    } else {
        None
    };
    Ok(GroundStateMeta {
        dimension: cfg.dimension,
        s: cfg.s,
        p: cfg.p,
        half_width: cfg.half_width,
        points: cfg.points,
        field: GROUND_STATE_FIELD.into(),
        residual: gs.residual,
        dealiased_residual,
        iterations: gs.iterations,
        newton_steps: gs.newton_steps,
        peak: gs.peak(),
        amplitude: gs.tail_amplitude(),
        tail_exponent: gs.tail.exponent,
        loglog_slope: gs.tail.loglog_slope,
        tail_fit_residual: gs.tail.relative_residual,
        truncation_estimate: gs.truncation_estimate(),
        iw2: gs.integrals.iw2,
        iwp1: gs.integrals.iwp1,
        iwp: gs.integrals.iwp,
        idw2: gs.integrals.idw2,
    })
}

fn build_ground_state(cfg: &RunConfig, out: &mut RunOutputs) -> Result<GroundState> {
    let gs = out.stage("ground_state", |_| {
        compute_ground_state(cfg.ground_state_grid()?, cfg.order()?, cfg.p, cfg.ground_state_options())
    })?;
    out.write_field(GROUND_STATE_FIELD, &gs.profile, cfg.s)?;
    let meta = ground_state_meta(cfg, &gs)?;
    out.write(GROUND_STATE_META, &key_value_text(&meta)?)?;
    Ok(gs)
}

/// The ground state stored in the output directory, if it was computed for
/// the same `(N, s, p, L, M)`.
pub fn load_ground_state(cfg: &RunConfig, dir: &Path) -> Result<GroundState> {
    let meta_path = dir.join(GROUND_STATE_META);
    let field_path = dir.join(GROUND_STATE_FIELD);
    let meta: GroundStateMeta = parse_key_value_text(&std::fs::read(&meta_path)?)
        .map_err(|e| Error::Format(format!("{}: {e}", meta_path.display())))?;
    if !meta.matches(cfg) {
        return Err(Error::Config(format!(
            "{} was computed for N = {}, s = {}, p = {}, L = {}, M = {}",
            field_path.display(),
            meta.dimension,
            meta.s,
            meta.p,
            meta.half_width,
            meta.points
        )));
    }
    let (field, s) = read_field(&field_path)?;
    if field.grid().dimension() != meta.dimension || field.grid().points_per_axis() != meta.points || s != meta.s {
        return Err(Error::Format(format!("{} disagrees with its sidecar", field_path.display())));
    }
    GroundState::from_profile(field, cfg.order()?, cfg.p)
}

fn ground_state_or_build(cfg: &RunConfig, out: &mut RunOutputs) -> Result<GroundState> {
    match load_ground_state(cfg, out.dir()) {
        Ok(gs) => {
            info!("reusing {}", out.path(GROUND_STATE_FIELD).display());
            Ok(gs)
        }
        Err(e) => {
            info!("building ground state ({e})");
            build_ground_state(cfg, out)
        }
    }
}

fn cmd_ground_state(cfg: &RunConfig, out: &mut RunOutputs) -> Result<()> {
    let gs = build_ground_state(cfg, out)?;
    if cfg.nondegeneracy {
        let report = out.stage("nondegeneracy", |_| {
            let grid = cfg.nondegeneracy_grid()?;
            let local = if grid == *gs.grid() {
                gs.clone()
            } else {
                compute_ground_state(grid, cfg.order()?, cfg.p, cfg.ground_state_options())?
            };
            check_nondegeneracy(&local, cfg.dimension + 2)
        })?;
        out.write_json("nondegeneracy.json", &report)?;
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RadiusRow {
    pub k: usize,
    pub r0: f64,
    pub interval: (f64, f64),
    pub inside: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoefficientsReport {
    #[serde(flatten)]
    pub coeffs: ExpansionCoeffs,
    /// `None` when `B1 = 0`.
    pub r0_prefactor: Option<f64>,
    pub degenerate: bool,
    #[serde(rename = "A")]
    pub amplitude: f64,
    pub ell: f64,
    pub m: f64,
    pub required_c0: Option<f64>,
    pub endpoint: Option<EndpointInequalities>,
    pub r0_table: Vec<RadiusRow>,
}

pub fn coefficients_report(cfg: &RunConfig, gs: &GroundState) -> Result<CoefficientsReport> {
    let s = cfg.order()?;
    let n = cfg.dimension;
    let coeffs = expansion_coeffs(gs, cfg.a)?;
    let degenerate = coeffs.is_degenerate();
    if degenerate {
        warn!("B1 = 0: no potential, so no optimal radius");
    }
    let mut r0_table = Vec::new();
    if !degenerate {
        for &k in &cfg.k {
            if k < 2 {
                continue;
            }
            let r0 = optimal_radius(k, &coeffs, n, s, cfg.m)?;
            let interval = admissible_radius_interval(k, cfg.c0, n, s, cfg.m)?;
            r0_table.push(RadiusRow {
                k,
                r0,
                interval,
                inside: r0 > interval.0 && r0 < interval.1,
            });
        }
    }
    Ok(CoefficientsReport {
        coeffs,
        r0_prefactor: if degenerate { None } else { Some(coeffs.r0_prefactor(n, s, cfg.m)?) },
        degenerate,
        amplitude: gs.tail_amplitude(),
        ell: n as f64 + 2.0 * cfg.s,
        m: cfg.m,
        required_c0: if degenerate { None } else { Some(required_c0(&coeffs, n, s, cfg.m)?) },
        endpoint: if degenerate { None } else { Some(endpoint_inequalities(&coeffs, cfg.c0, n, s, cfg.m)?) },
        r0_table,
    })
}

fn cmd_coeffs(cfg: &RunConfig, out: &mut RunOutputs) -> Result<()> {
    let gs = load_ground_state(cfg, out.dir())?;
    let report = out.stage("coefficients", |_| coefficients_report(cfg, &gs))?;
    out.write_json("coefficients.json", &report)?;
    Ok(())
}

/// `r` from the config, or `r₀(k)`.
pub fn radius_for(cfg: &RunConfig, coeffs: &ExpansionCoeffs, k: usize) -> Result<f64> {
    match cfg.r {
        RadiusChoice::Fixed(r) => Ok(r),
        RadiusChoice::Named(_) => {
            if coeffs.is_degenerate() {
                return Err(Error::Config("r = opt needs a > 0".into()));
            }
            if k < 2 {
                return Err(Error::Config("r = opt needs k >= 2".into()));
            }
            optimal_radius(k, coeffs, cfg.dimension, cfg.order()?, cfg.m)
        }
    }
}

fn ring(k: usize, r: f64, n: usize) -> Result<SpikeRing> {
    if k == 1 {
        let mut q = vec![0.0; n];
        q[0] = r;
        Ok(SpikeRing::single(q))
    } else {
        SpikeRing::new(k, r, n)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnsatzRow {
    pub k: usize,
    pub r: f64,
    pub star_norm_e: f64,
    /// `‖E‖_*·r^{m/2}`
    pub scaled_e: f64,
    pub interaction_term: f64,
    pub far_field_term: f64,
    pub potential_term: f64,
    /// `‖E_h‖_*` of the defect computed on the grid.
    pub star_norm_defect: f64,
    pub symmetry_defect: f64,
}

fn ansatz_row(profile: &RadialProfile, spec: &ProblemSpec, k: usize, r: f64, n: usize) -> Result<(AnsatzRow, RealField)> {
    let spikes = ring(k, r, n)?;
    let grid = spec.grid_for(n, r)?;
    let ctx = Spectral::new(grid);
    let bumps = build_multibump(profile, &spikes, &grid, spec.p)?;
    let v = evaluate_potential(&spec.potential, &grid)?;
    let e = error_field(&bumps, &v);
    let rho = WeightRho::new(spikes.clone(), spec.s, spec.potential.m, spec.sigma)?;
    let rep: ErrorBoundReport = check_error_bound(&e, &rho, spec.s, spec.p, spec.potential.m);
    let defect = equation_residual(&ctx, &bumps.total, &v, spec.s, spec.p, false)?;
    Ok((
        AnsatzRow {
            k,
            r,
            star_norm_e: rep.star_norm,
            scaled_e: rep.ratio,
            interaction_term: rep.interaction_term,
            far_field_term: rep.far_field_term,
            potential_term: rep.potential_term,
            star_norm_defect: star_norm(&defect, &rho),
            symmetry_defect: if k >= 2 { ring_symmetry_defect(profile, &spikes, &grid) } else { 0.0 },
        },
        bumps.total,
    ))
}

fn cmd_ansatz(cfg: &RunConfig, out: &mut RunOutputs) -> Result<()> {
    let gs = ground_state_or_build(cfg, out)?;
    let profile = gs.radial_profile()?;
    let coeffs = expansion_coeffs(&gs, cfg.a)?;
    let spec = cfg.problem()?;
    let mut rows = Vec::new();
    for &k in &cfg.k {
        let r = radius_for(cfg, &coeffs, k)?;
        let (row, w) = out.stage(&format!("ansatz_k{k}"), |_| ansatz_row(&profile, &spec, k, r, cfg.dimension))?;
        out.write_field(&format!("ansatz_k{k}.fld"), &w, cfg.s)?;
        rows.push(row);
    }
    out.write_csv("ansatz.csv", ANSATZ_CSV.0, ANSATZ_CSV.1, &rows)?;
    Ok(())
}

/// Frozen columns of `reduce.csv`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReduceRow {
    pub k: usize,
    pub r: f64,
    pub c: f64,
    pub star_norm_phi: f64,
    pub residual: f64,
    pub orth_defect: f64,
    pub iterations: usize,
    pub contraction_rate: Option<f64>,
}

/// Linear solve diagnostics: `C = ‖φ‖_*/‖g‖_*` for `g = E_h`, and the
/// superposition error against a seeded random right-hand side.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinearRow {
    pub k: usize,
    pub r: f64,
    pub star_norm_g: f64,
    pub star_norm_phi: f64,
    pub c_solve: f64,
    pub orth_defect: f64,
    pub residual: f64,
    pub linearity_error: f64,
    /// Smallest `|λ|` of the operator on the constrained symmetric subspace.
    pub constrained_gap: f64,
}

pub fn linear_diagnostics(setup: &RingSetup, seed: u64) -> Result<LinearRow> {
    let solver = &setup.solver;
    let g1 = &setup.defect;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<f64> = (0..g1.samples().len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let g2 = solver.rho().zip_map(&RealField::new(*g1.grid(), noise)?, |w, z| w * z);
    let (alpha, beta) = (0.75, -1.25);
    let combo = g1.zip_map(&g2, |a, b| alpha * a + beta * b);
    let s1 = solver.solve(g1, None)?;
    let s2 = solver.solve(&g2, None)?;
    let s3 = solver.solve(&combo, None)?;
    let predicted = s1.phi.zip_map(&s2.phi, |a, b| alpha * a + beta * b);
    let diff = solver.star_norm(&(&s3.phi - &predicted));
    let g_norm = solver.star_norm(g1);
    Ok(LinearRow {
        k: setup.spikes.k(),
        r: setup.spikes.radius(),
        star_norm_g: g_norm,
        star_norm_phi: s1.star_norm_phi,
        c_solve: s1.star_norm_phi / g_norm,
        orth_defect: s1.orth_defect.max(s2.orth_defect).max(s3.orth_defect),
        residual: s1.residual.max(s2.residual).max(s3.residual),
        linearity_error: diff / solver.star_norm(&s3.phi).max(f64::MIN_POSITIVE),
        constrained_gap: solver.constrained_gap(12, seed.wrapping_add(1))?,
    })
}

fn cmd_reduce(cfg: &RunConfig, out: &mut RunOutputs) -> Result<()> {
    let gs = ground_state_or_build(cfg, out)?;
    let profile = gs.radial_profile()?;
    let coeffs = expansion_coeffs(&gs, cfg.a)?;
    let spec = cfg.problem()?;
    let mut rows = Vec::new();
    let mut linear = Vec::new();
    for &k in &cfg.k {
        let r = radius_for(cfg, &coeffs, k)?;
        let (row, lin, phi) = out.stage(&format!("reduce_k{k}"), |_| {
            let setup = RingSetup::new(&profile, &spec, ring(k, r, cfg.dimension)?, spec.grid_for(cfg.dimension, r)?)?;
            let lin = linear_diagnostics(&setup, cfg.seed ^ k as u64)?;
            let sol = setup.correction(spec.fixed_point)?;
            let row = ReduceRow {
                k,
                r,
                c: sol.c,
                star_norm_phi: sol.star_norm_phi,
                residual: sol.residual,
                orth_defect: sol.orth_defect,
                iterations: sol.iterations,
                contraction_rate: sol.contraction_rate,
            };
            Ok((row, lin, sol.phi))
        })?;
        out.write_field(&format!("phi_k{k}.fld"), &phi, cfg.s)?;
        rows.push(row);
        linear.push(lin);
    }
    out.write_csv("reduce.csv", REDUCE_CSV.0, REDUCE_CSV.1, &rows)?;
    out.write_csv("linear.csv", LINEAR_CSV.0, LINEAR_CSV.1, &linear)?;
    Ok(())
}

/// Frozen columns of `sweep.csv` and of the `construct` diagnostics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub r: f64,
    #[serde(rename = "J_direct")]
    pub j_direct: f64,
    #[serde(rename = "J_expansion")]
    pub j_expansion: f64,
    pub relative_gap: f64,
    #[serde(rename = "F")]
    pub f: f64,
    pub c: f64,
    #[serde(rename = "Fprime")]
    pub fprime: f64,
}

#[derive(Clone, Copy, Debug)]
struct Sample {
    r: f64,
    f: f64,
    c: f64,
    j_w: f64,
}

/// Rows sorted by `r` with `F′` from three-point differences on the
/// (possibly uneven) sample spacing, one-sided at the ends.
fn sweep_rows(cfg: &RunConfig, coeffs: &ExpansionCoeffs, k: usize, mut samples: Vec<Sample>) -> Result<Vec<SweepRow>> {
    samples.sort_by(|a, b| a.r.total_cmp(&b.r));
    samples.dedup_by(|a, b| a.r == b.r);
    let s = cfg.order()?;
    let n = samples.len();
    let fprime = |i: usize| -> f64 {
        if n < 2 {
            return f64::NAN;
        }
        let (a, b) = if i == 0 {
            (0, 1)
        } else if i == n - 1 {
            (n - 2, n - 1)
        } else {
            let (x0, x1, x2) = (samples[i - 1].r, samples[i].r, samples[i + 1].r);
            let (f0, f1, f2) = (samples[i - 1].f, samples[i].f, samples[i + 1].f);
            let (h0, h1) = (x1 - x0, x2 - x1);
            return (-h1 / (h0 * (h0 + h1))) * f0 + ((h1 - h0) / (h0 * h1)) * f1 + (h0 / (h1 * (h0 + h1))) * f2;
        };
        (samples[b].f - samples[a].f) / (samples[b].r - samples[a].r)
    };
    Ok((0..n)
        .map(|i| {
            let p = samples[i];
            let rep = expansion_report(k, p.r, p.j_w, coeffs, cfg.dimension, s, cfg.m);
            SweepRow {
                k,
                r: p.r,
                j_direct: p.j_w,
                j_expansion: rep.j_expansion,
                relative_gap: rep.relative_gap,
                f: p.f,
                c: p.c,
                fprime: fprime(i),
            }
        })
        .collect())
}

fn window(cfg: &RunConfig, center: f64) -> (f64, f64) {
    (cfg.search_lo * center, cfg.search_hi * center)
}

fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![(lo * hi).sqrt()];
    }
    (0..n)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

fn cmd_sweep(cfg: &RunConfig, out: &mut RunOutputs) -> Result<()> {
    let gs = ground_state_or_build(cfg, out)?;
    let profile = gs.radial_profile()?;
    let coeffs = expansion_coeffs(&gs, cfg.a)?;
    let spec = cfg.problem()?;
    let mut rows = Vec::new();
    for &k in &cfg.k {
        let center = radius_for(cfg, &coeffs, k)?;
        let (lo, hi) = window(cfg, center);
        let reduced = ReducedEnergy {
            profile: &profile,
            spec: &spec,
            k,
            dimension: cfg.dimension,
            grid: if cfg.fixed_grid { Some(spec.grid_for(cfg.dimension, hi)?) } else { None },
        };
        let samples = out.stage(&format!("sweep_k{k}"), |_| {
            log_spaced(lo, hi, cfg.sweep_points)
                .into_par_iter()
                .map(|r| {
                    let p = reduced.evaluate(r)?;
                    Ok(Sample {
                        r,
                        f: p.f,
                        c: p.c,
                        j_w: p.j_w,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })?;
        rows.extend(sweep_rows(cfg, &coeffs, k, samples)?);
    }
    out.write_csv("sweep.csv", SWEEP_CSV.0, SWEEP_CSV.1, &rows)?;
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RefinedRoot {
    pub r: f64,
    pub c: f64,
}

/// Everything `construct` reports about the radius search and the final `u`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConstructReport {
    pub k: usize,
    /// `r₀(k)`, or the configured radius when there is no potential.
    pub center: f64,
    pub r0: Option<f64>,
    pub window: (f64, f64),
    pub grid_half_width: Option<f64>,
    pub grid_points: Option<usize>,
    pub search: Option<RadiusSearchResult>,
    pub r1_over_r0: Option<f64>,
    /// Secant root of `c(r)` between the samples bracketing `r₁`.
    pub refined: Option<RefinedRoot>,
    pub endpoint: Option<EndpointInequalities>,
    /// `max F − min F` over the samples.
    pub f_spread: f64,
    pub r_final: f64,
    pub f_final: f64,
    pub c_final: f64,
    pub star_norm_phi: f64,
    pub scaled_phi: f64,
    pub contraction_rate: Option<f64>,
    pub orth_defect: f64,
    /// `max|(−Δ)ˢu + Vu − uᵖ|` for `u = W + Φ`.
    pub residual: f64,
    pub relative_residual: f64,
    /// `max|E_h − E|`: the grid defect of `W` against its closed form.
    pub interpolation_floor: f64,
}

fn cmd_construct(cfg: &RunConfig, out: &mut RunOutputs) -> Result<()> {
    let k = cfg.k[0];
    let gs = ground_state_or_build(cfg, out)?;
    let profile = gs.radial_profile()?;
    let coeffs = expansion_coeffs(&gs, cfg.a)?;
    let spec = cfg.problem()?;
    let s = cfg.order()?;
    let center = radius_for(cfg, &coeffs, k)?;
    let r0 = if coeffs.is_degenerate() || k < 2 {
        None
    } else {
        Some(optimal_radius(k, &coeffs, cfg.dimension, s, cfg.m)?)
    };
    let (lo, hi) = window(cfg, center);
    let grid = if cfg.fixed_grid { Some(spec.grid_for(cfg.dimension, hi)?) } else { None };
    let reduced = ReducedEnergy {
        profile: &profile,
        spec: &spec,
        k,
        dimension: cfg.dimension,
        grid,
    };
    let samples: RefCell<Vec<Sample>> = RefCell::new(Vec::new());
    let eval = |r: f64| -> Result<(f64, f64)> {
        let p = reduced.evaluate(r)?;
        samples.borrow_mut().push(Sample {
            r,
            f: p.f,
            c: p.c,
            j_w: p.j_w,
        });
        Ok((p.f, p.c))
    };
    let (search, refined, r_final) = if r0.is_some() {
        let found = out.stage("radius_search", |_| maximize_reduced_energy(eval, (lo, hi), cfg.search_options()));
        let found = match found {
            Ok(f) => f,
            Err(e) => {
                let rows = sweep_rows(cfg, &coeffs, k, samples.take())?;
                out.write_csv(&format!("construct_k{k}.csv"), SWEEP_CSV.0, SWEEP_CSV.1, &rows)?;
                return Err(e);
            }
        };
        let refined = match (found.c_left, found.c_right) {
            (Some(a), Some(b)) if found.c_changes_sign() => {
                let tol = 1e-6 * a.c.abs().max(b.c.abs());
                let root = out.stage("multiplier_root", |_| {
                    refine_multiplier_root(|r| eval(r).map(|(_, c)| c), a.r, b.r, tol, 12)
                });
                match root {
                    Ok((r, c)) => Some(RefinedRoot { r, c }),
                    Err(e) => {
                        warn!("multiplier root not refined: {e}");
                        None
                    }
                }
            }
            _ => None,
        };
        let r_final = refined.as_ref().map_or(found.r1, |x| x.r);
        (Some(found), refined, r_final)
    } else {
        out.stage("flat_scan", |_| {
            for r in log_spaced(lo, hi, cfg.sweep_points) {
                eval(r)?;
            }
            Ok(())
        })?;
        (None, None, center)
    };

    let (report, u) = out.stage("final_solution", |_| {
        let setup = reduced.setup(r_final)?;
        let sol = setup.correction(spec.fixed_point)?;
        let u = &setup.bumps.total + &sol.phi;
        let f_final = crate::energy::energy(&setup.ctx, &u, &setup.v, s, cfg.p);
        let res = equation_residual(&setup.ctx, &u, &setup.v, s, cfg.p, cfg.dealias)?;
        let upow = u.positive_pow(cfg.p).max_abs();
        let spread = {
            let list = samples.borrow();
            let hi = list.iter().map(|p| p.f).fold(f64::NEG_INFINITY, f64::max);
            let lo = list.iter().map(|p| p.f).fold(f64::INFINITY, f64::min);
            hi - lo
        };
        let report = ConstructReport {
            k,
            center,
            r0,
            window: (lo, hi),
            grid_half_width: grid.map(|g| g.half_width()),
            grid_points: grid.map(|g| g.points_per_axis()),
            r1_over_r0: match (&search, r0) {
                (Some(sr), Some(r0)) => Some(sr.r1 / r0),
                _ => None,
            },
            search: search.clone(),
            refined: refined.clone(),
            endpoint: if r0.is_some() {
                Some(endpoint_inequalities(&coeffs, cfg.c0, cfg.dimension, s, cfg.m)?)
            } else {
                None
            },
            f_spread: spread,
            r_final,
            f_final,
            c_final: sol.c,
            star_norm_phi: sol.star_norm_phi,
            scaled_phi: sol.star_norm_phi * r_final.powf(cfg.m / 2.0),
            contraction_rate: sol.contraction_rate,
            orth_defect: sol.orth_defect,
            residual: res.max_abs(),
            relative_residual: res.max_abs() / upow,
            interpolation_floor: (&setup.defect - &setup.e).max_abs(),
        };
        Ok((report, u))
    })?;
    info!(
        "construct k = {k}: r = {:.6}, c = {:.3e}, residual {:.3e}",
        report.r_final, report.c_final, report.residual
    );
    let rows = sweep_rows(cfg, &coeffs, k, samples.take())?;
    out.write_csv(&format!("construct_k{k}.csv"), SWEEP_CSV.0, SWEEP_CSV.1, &rows)?;
    out.write_field(&format!("u_k{k}.fld"), &u, cfg.s)?;
    out.write_json(&format!("construct_k{k}.json"), &report)?;
    Ok(())
}

/// The construction grid a config uses for `k`, for callers that want to
/// reproduce a run's setups.
pub fn construction_grid(cfg: &RunConfig, coeffs: &ExpansionCoeffs, k: usize) -> Result<GridSpec> {
    let center = radius_for(cfg, coeffs, k)?;
    let spec = cfg.problem()?;
    if cfg.fixed_grid {
        spec.grid_for(cfg.dimension, cfg.search_hi * center)
    } else {
        spec.grid_for(cfg.dimension, center)
    }
}
