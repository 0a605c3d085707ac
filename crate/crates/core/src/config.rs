// SPDX-License-Identifier: Apache-2.0

//! Run configuration: flat `key = value` text with `#` comments, or JSON.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::ansatz::{weight_exponent, PotentialSpec};
use crate::energy::RadiusSearchOptions;
use crate::error::{Error, Result};
use crate::ground_state::{check_exponent, GroundStateOptions};
use crate::grid::{FractionalOrder, GridSpec};
use crate::reduction::{FixedPointOptions, LinearSolveOptions, ProblemSpec};

/// Radius of the ring: a number, or `opt` for `r₀(k)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RadiusChoice {
    Fixed(f64),
    Named(NamedRadius),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedRadius {
    Opt,
}

impl Default for RadiusChoice {
    fn default() -> Self {
        RadiusChoice::Named(NamedRadius::Opt)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    #[serde(rename = "N")]
    pub dimension: usize,
    pub s: f64,
    pub p: f64,
    pub a: f64,
    pub m: f64,
    pub sigma: f64,
    #[serde(rename = "C0")]
    pub c0: f64,
    /// Potential cap radius: `V = 1 + a/vcap^m` inside `|x| < vcap`.
    pub vcap: f64,

    /// Ground-state box half-width and points per axis.
    #[serde(rename = "L")]
    pub half_width: f64,
    #[serde(rename = "M")]
    pub points: usize,
    pub gs_tol: f64,
    pub gs_max_iter: usize,
    pub damping: f64,
    /// Dealiased evaluation of `wᵖ` in the reported residuals.
    pub dealias: bool,
    /// Run the eigenvalue check in `ground-state`.
    pub nondegeneracy: bool,
    pub nondeg_l: f64,
    pub nondeg_m: usize,

    /// Spacing and edge margin of the ring grids.
    pub spacing: f64,
    pub margin: f64,
    pub linear_tol: f64,
    pub linear_max_iter: usize,
    pub fp_tol: f64,
    pub fp_max_iter: usize,
    pub fp_patience: usize,

    pub k: Vec<usize>,
    pub r: RadiusChoice,
    /// Radius search window as fractions of `r₀`.
    pub search_lo: f64,
    pub search_hi: f64,
    pub search_rel_tol: f64,
    pub search_max_evals: usize,
    pub fd_step: f64,
    /// Radii per `k` in `sweep`, spread evenly in `log r` over the window.
    pub sweep_points: usize,
    /// Evaluate every radius of a search on the grid sized for the window's
    /// upper end.
    pub fixed_grid: bool,

    pub task: Option<String>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dimension: 2,
            s: 0.5,
            p: 2.0,
            a: 1.0,
            m: 1.0,
            sigma: 0.05,
            c0: 4.0,
            vcap: 1.0,
            half_width: 20.0,
            points: 512,
            gs_tol: 1e-10,
            gs_max_iter: 400,
            damping: 1.0,
            dealias: false,
            nondegeneracy: true,
            nondeg_l: 16.0,
            nondeg_m: 384,
            spacing: 1.0 / 12.0,
            margin: 12.0,
            linear_tol: 1e-11,
            linear_max_iter: 4000,
            fp_tol: 1e-9,
            fp_max_iter: 60,
            fp_patience: 3,
            k: vec![8],
            r: RadiusChoice::default(),
            search_lo: 0.6,
            search_hi: 1.4,
            search_rel_tol: 1e-3,
            search_max_evals: 40,
            fd_step: 1e-2,
            sweep_points: 5,
            fixed_grid: true,
            task: None,
            out: None,
            seed: 0,
            threads: None,
        }
    }
}

/// `key = value` lines. Values that parse as JSON keep their type; bare
/// comma lists become arrays; anything else is a string.
pub fn parse_key_values(text: &str) -> Result<Map<String, Value>> {
    let mut map = Map::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got `{line}`", no + 1)))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", no + 1)));
        }
        if map.insert(key.to_string(), scalar_or_list(value.trim())).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key `{key}`", no + 1)));
        }
    }
    Ok(map)
}

fn scalar_or_list(v: &str) -> Value {
    if v.contains(',') && !v.starts_with('[') {
        return Value::Array(v.split(',').map(|x| scalar(x.trim())).collect());
    }
    scalar(v)
}

fn scalar(v: &str) -> Value {
    serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()))
}

impl RunConfig {
    /// Parses either format; JSON is recognized by a leading `{`.
    pub fn parse(text: &str) -> Result<Self> {
        let map = if text.trim_start().starts_with('{') {
            match serde_json::from_str::<Value>(text) {
                Ok(Value::Object(m)) => m,
                Ok(_) => return Err(Error::Config("JSON config must be an object".into())),
                Err(e) => return Err(Error::Config(format!("JSON config: {e}"))),
            }
        } else {
            parse_key_values(text)?
        };
        let mut map = map;
        // A single `k = 8` is accepted for a one-element list.
        if let Some(v @ Value::Number(_)) = map.get("k").cloned() {
            map.insert("k".into(), Value::Array(vec![v]));
        }
        let cfg: RunConfig = serde_json::from_value(Value::Object(map)).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn order(&self) -> Result<FractionalOrder> {
        FractionalOrder::new(self.s)
    }

    pub fn potential(&self) -> PotentialSpec {
        PotentialSpec::new(self.a, self.m).with_cap(self.vcap)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dimension;
        if n == 0 {
            return Err(Error::Config("N must be at least 1".into()));
        }
        let s = self.order()?;
        check_exponent(n, s, self.p)?;
        if !(self.half_width > 0.0) {
            return Err(Error::Config(format!("L = {} must be positive", self.half_width)));
        }
        if self.points < 2 || self.points % 2 != 0 {
            return Err(Error::Config(format!("M = {} must be even and at least 2", self.points)));
        }
        if self.nondegeneracy && (!(self.nondeg_l > 0.0) || self.nondeg_m < 2 || self.nondeg_m % 2 != 0) {
            return Err(Error::Config(format!(
                "nondegeneracy grid needs nondeg_l > 0 and even nondeg_m, got {} and {}",
                self.nondeg_l, self.nondeg_m
            )));
        }
        let positive = [
            ("spacing", self.spacing),
            ("margin", self.margin),
            ("gs_tol", self.gs_tol),
            ("linear_tol", self.linear_tol),
            ("fp_tol", self.fp_tol),
            ("search_rel_tol", self.search_rel_tol),
            ("fd_step", self.fd_step),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} = {v} must be positive")));
            }
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Config(format!("damping = {} must lie in (0, 1]", self.damping)));
        }
        if !(self.c0 > 1.0) {
            return Err(Error::Config(format!("C0 = {} must exceed 1", self.c0)));
        }
        if !(self.search_lo > 0.0 && self.search_hi > self.search_lo) {
            return Err(Error::Config(format!(
                "search window [{}, {}] must satisfy 0 < search_lo < search_hi",
                self.search_lo, self.search_hi
            )));
        }
        if let RadiusChoice::Fixed(r) = self.r {
            if !(r > 0.0) {
                return Err(Error::Config(format!("r = {r} must be positive")));
            }
        }
        if self.k.is_empty() {
            return Err(Error::Config("k list is empty".into()));
        }
        if let Some(t) = self.threads {
            if t == 0 {
                return Err(Error::Config("threads must be at least 1".into()));
            }
        }
        self.potential().check_admissible(n, s, self.p)?;
        let ell = n as f64 + 2.0 * self.s;
        let mu = weight_exponent(n, s, self.m, self.sigma);
        if !(self.sigma > 0.0) || !(mu > n as f64 / 2.0 && mu < ell) {
            return Err(Error::Inadmissible(format!(
                "N/2 < μ = N/2 − m/(N+2s) + 1 + σ < N+2s violated: μ = {mu} with σ = {}",
                self.sigma
            )));
        }
        Ok(())
    }

    pub fn ground_state_grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.dimension, self.half_width, self.points)
    }

    pub fn nondegeneracy_grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.dimension, self.nondeg_l, self.nondeg_m)
    }

    pub fn ground_state_options(&self) -> GroundStateOptions {
        GroundStateOptions {
            max_iter: self.gs_max_iter,
            tol: self.gs_tol,
            damping: self.damping,
            ..GroundStateOptions::default()
        }
    }

    pub fn problem(&self) -> Result<ProblemSpec> {
        Ok(ProblemSpec {
            s: self.order()?,
            p: self.p,
            potential: self.potential(),
            sigma: self.sigma,
            spacing: self.spacing,
            margin: self.margin,
            linear: LinearSolveOptions {
                tol: self.linear_tol,
                max_iter: self.linear_max_iter,
                ..LinearSolveOptions::default()
            },
            fixed_point: FixedPointOptions {
                max_iter: self.fp_max_iter,
                tol: self.fp_tol,
                patience: self.fp_patience,
            },
        })
    }

    pub fn search_options(&self) -> RadiusSearchOptions {
        RadiusSearchOptions {
            rel_tol: self.search_rel_tol,
            max_evals: self.search_max_evals,
            fd_step: self.fd_step,
        }
    }
}
