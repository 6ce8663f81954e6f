//! Experiment runner: named experiments with JSON parameters, CSV tables,
//! pass/fail verdicts, log-log SVG plots and a reproducibility manifest.
//!
//! | name | content |
//! |------|---------|
//! | `e1_sawtooth` | decay exponent of `TV(S_t u)` for the sawtooth |
//! | `e2_counterexample` | multiscale blow-up series and the single-scale certificate |
//! | `e3_theorem61` | `sup_t t^(1-alpha) TV(S_t u)` against the interpolation norm |
//! | `e4_decomposition` | level decomposition round trip |
//! | `e5_sobolev` | mollifier bounds and the Sobolev / interpolation decay bounds |
//!
//! Constants with no closed form are compared against [`Baselines::frozen`],
//! written once by [`Baselines::calibrate`].

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::constructions::{default_schedule, hat_u, make_packet, packet_materialize, packet_tv, prop33_datum, sawtooth, sawtooth_decay_exponent};
use crate::decomposition::{converse_factor, decompose, norm_from_decomposition, verify_theorem_dec};
use crate::error::{Error, Result};
use crate::lax_oleinik::{dyadic_times, loglog_slope, solve_burgers, tv_decay_curve};
use crate::palpha::{dalpha_membership, dalpha_tilde_membership, dlambda_upper, palpha_norm_upper};
use crate::pwl::PLFunction;
use crate::random::{random_palpha, random_pl};
use crate::sobolev::{mollifier_check, palpha_decay_bound, sobolev_decay_bound, w_alpha1_seminorm, Mollifier};

/// Largest sawtooth the harness will build.
pub const MAX_TEETH: usize = 1_000_000;
/// Largest number of multiscale levels.
pub const MAX_MULTISCALE_LEVELS: usize = 8;
/// Finest scale exponent for random interpolation data.
pub const MAX_RANDOM_LEVELS: u32 = 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", try_from = "String")]
pub enum ExperimentName {
    E1Sawtooth,
    E2Counterexample,
    E3Theorem61,
    E4Decomposition,
    E5Sobolev,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 5] = [
        ExperimentName::E1Sawtooth,
        ExperimentName::E2Counterexample,
        ExperimentName::E3Theorem61,
        ExperimentName::E4Decomposition,
        ExperimentName::E5Sobolev,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentName::E1Sawtooth => "e1_sawtooth",
            ExperimentName::E2Counterexample => "e2_counterexample",
            ExperimentName::E3Theorem61 => "e3_theorem61",
            ExperimentName::E4Decomposition => "e4_decomposition",
            ExperimentName::E5Sobolev => "e5_sobolev",
        }
    }

    /// Accepts the full name or its `eN` prefix.
    pub fn parse(s: &str) -> Result<Self> {
        ExperimentName::ALL
            .into_iter()
            .find(|n| n.as_str() == s || n.as_str().split('_').next() == Some(s))
            .ok_or_else(|| Error::Invalid(format!("unknown experiment {s:?} (expected one of e1..e5)")))
    }
}

impl TryFrom<String> for ExperimentName {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        ExperimentName::parse(&s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: ExperimentName,
    #[serde(default)]
    pub parameters: Value,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(name: ExperimentName, parameters: Value, seed: u64) -> Self {
        ExperimentSpec { name, parameters, seed, output_dir: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `|measured - expected| <= tolerance`
    Within,
    /// `measured <= expected`
    AtMost,
    /// `measured >= expected`
    AtLeast,
    /// `expected / tolerance <= measured <= expected * tolerance`
    Factor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub id: String,
    pub passed: bool,
    pub measured: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub relation: Relation,
}

impl Verdict {
    fn new(id: impl Into<String>, measured: f64, expected: f64, tolerance: f64, relation: Relation) -> Self {
        let passed = match relation {
            Relation::Within => (measured - expected).abs() <= tolerance,
            Relation::AtMost => measured <= expected,
            Relation::AtLeast => measured >= expected,
            Relation::Factor => measured >= expected / tolerance && measured <= expected * tolerance,
        };
        Verdict { id: id.into(), passed, measured, expected, tolerance, relation }
    }

    pub fn within(id: impl Into<String>, measured: f64, expected: f64, tolerance: f64) -> Self {
        Verdict::new(id, measured, expected, tolerance, Relation::Within)
    }

    pub fn at_most(id: impl Into<String>, measured: f64, bound: f64) -> Self {
        Verdict::new(id, measured, bound, 0.0, Relation::AtMost)
    }

    pub fn at_least(id: impl Into<String>, measured: f64, bound: f64) -> Self {
        Verdict::new(id, measured, bound, 0.0, Relation::AtLeast)
    }

    pub fn factor(id: impl Into<String>, measured: f64, baseline: f64, factor: f64) -> Self {
        Verdict::new(id, measured, baseline, factor, Relation::Factor)
    }

    pub fn line(&self) -> String {
        let rel = match self.relation {
            Relation::Within => format!("within {:e} of", self.tolerance),
            Relation::AtMost => "<=".into(),
            Relation::AtLeast => ">=".into(),
            Relation::Factor => format!("within {}x of", self.tolerance),
        };
        let status = if self.passed { "PASS" } else { "FAIL" };
        format!("{status} {}: measured {} {rel} {}", self.id, self.measured, self.expected)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Table { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub seed: u64,
    pub elapsed_ms: u128,
    pub threads: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: ExperimentName,
    /// Parameters after defaults were filled in.
    pub inputs: Value,
    pub tables: Vec<Table>,
    pub verdicts: Vec<Verdict>,
    pub manifest: Manifest,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn verdict(&self, id: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.id == id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Constants frozen by a calibration run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Baselines {
    /// Largest `1 / (t TV(S_t hat_u))` over `t = 2^-4 .. 2^-8`.
    pub single_scale_c: f64,
    /// Largest `(2 alpha - 1) sup_t t^(1-alpha) TV(S_t u) / ||u||` over the random data of `e3`.
    pub decay_c0: f64,
    /// Largest `TV(u_h) h^(1-alpha) / |u|_alpha` for the unit box.
    pub kernel_constant: f64,
    /// Interpolation norm bound of the three-level multiscale datum at `alpha = 1/2`.
    pub multiscale_norm: f64,
}

const FROZEN: &str = include_str!("../baselines.json");

/// Allowed drift from a frozen constant.
pub const BASELINE_FACTOR: f64 = 2.0;

impl Baselines {
    pub fn frozen() -> Self {
        serde_json::from_str(FROZEN).expect("baselines.json is valid")
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Measures every constant with the default experiment parameters.
    pub fn calibrate() -> Result<Self> {
        let e2 = E2Params::default();
        let e3 = E3Params::default();
        let e5 = E5Params::default();
        let single_scale_c = single_scale_rows(&e2.hat_q)?.iter().map(|r| r.2).fold(0.0, f64::max);
        let decay_c0 = decay_rows(&e3, 0)?.iter().map(|r| r.c0).fold(0.0, f64::max);
        let kernel_constant = kernel_rows(&e5)?.iter().map(|r| r.kernel_constant).fold(0.0, f64::max);
        let multiscale_norm = multiscale_norm(e2.levels, e2.norm_q)?;
        Ok(Baselines { single_scale_c, decay_c0, kernel_constant, multiscale_norm })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("baselines serialize")
    }
}

fn params<P: DeserializeOwned + Serialize + Default>(name: ExperimentName, v: &Value) -> Result<(P, Value)> {
    let p: P = if v.is_null() {
        P::default()
    } else if !v.is_object() {
        return Err(Error::Invalid(format!("parameters for {} must be a JSON object", name.as_str())));
    } else {
        serde_json::from_value(v.clone()).map_err(|e| Error::Invalid(format!("parameters for {}: {e}", name.as_str())))?
    };
    let echo = serde_json::to_value(&p)?;
    Ok((p, echo))
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Runs one experiment with the frozen baselines.
pub fn run(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    run_with(spec, &Baselines::frozen())
}

pub fn run_with(spec: &ExperimentSpec, base: &Baselines) -> Result<ExperimentReport> {
    let start = Instant::now();
    let (inputs, tables, verdicts) = match spec.name {
        ExperimentName::E1Sawtooth => {
            let (p, echo) = params::<E1Params>(spec.name, &spec.parameters)?;
            let (t, v) = e1(&p)?;
            (echo, t, v)
        }
        ExperimentName::E2Counterexample => {
            let (p, echo) = params::<E2Params>(spec.name, &spec.parameters)?;
            let (t, v) = e2(&p, base)?;
            (echo, t, v)
        }
        ExperimentName::E3Theorem61 => {
            let (p, echo) = params::<E3Params>(spec.name, &spec.parameters)?;
            let (t, v) = e3(&p, spec.seed, base)?;
            (echo, t, v)
        }
        ExperimentName::E4Decomposition => {
            let (p, echo) = params::<E4Params>(spec.name, &spec.parameters)?;
            let (t, v) = e4(&p, spec.seed)?;
            (echo, t, v)
        }
        ExperimentName::E5Sobolev => {
            let (p, echo) = params::<E5Params>(spec.name, &spec.parameters)?;
            let (t, v) = e5(&p, spec.seed, base)?;
            (echo, t, v)
        }
    };
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: spec.seed,
        elapsed_ms: start.elapsed().as_millis(),
        threads: rayon::current_num_threads(),
    };
    Ok(ExperimentReport { name: spec.name, inputs, tables, verdicts, manifest })
}

type Outcome = (Vec<Table>, Vec<Verdict>);

// ---------------------------------------------------------------- e1

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct E1Params {
    pub betas: Vec<f64>,
    pub n_max: usize,
    pub q_min: u32,
    pub q_max: u32,
    pub tolerance: f64,
}

impl Default for E1Params {
    fn default() -> Self {
        E1Params { betas: vec![0.5, 1.0, 2.0], n_max: 4000, q_min: 4, q_max: 14, tolerance: 0.1 }
    }
}

fn e1(p: &E1Params) -> Result<Outcome> {
    if p.n_max > MAX_TEETH {
        return Err(Error::Resource(format!("n_max = {} exceeds {MAX_TEETH}", p.n_max)));
    }
    if p.q_min > p.q_max {
        return Err(Error::Invalid(format!("q_min = {} exceeds q_max = {}", p.q_min, p.q_max)));
    }
    let times = dyadic_times(p.q_min, p.q_max);
    let curves = p
        .betas
        .par_iter()
        .map(|&beta| {
            let u = sawtooth(beta, p.n_max)?;
            tv_decay_curve(&u, &times, crate::constructions::sawtooth_alpha(beta))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut tables = Vec::new();
    let mut verdicts = Vec::new();
    for (&beta, c) in p.betas.iter().zip(&curves) {
        let mut t = Table::new(format!("sawtooth_beta_{beta}"), &["t", "tv", "scaled"]);
        for s in &c.samples {
            t.push(vec![s.0, s.1, s.2]);
        }
        tables.push(t);
        verdicts.push(Verdict::within(
            format!("slope_beta_{beta}"),
            c.fitted_exponent,
            sawtooth_decay_exponent(beta),
            p.tolerance,
        ));
    }
    Ok((tables, verdicts))
}

// ---------------------------------------------------------------- e2

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct E2Params {
    pub levels: usize,
    pub betas: Vec<f64>,
    pub growth: f64,
    pub norm_q: u32,
    /// `t = 2^-q` for the single-scale certificate.
    pub hat_q: Vec<u32>,
    pub materialize_k_max: u32,
}

impl Default for E2Params {
    fn default() -> Self {
        E2Params {
            levels: 3,
            betas: vec![0.25, 0.5, 0.75],
            growth: 2.0,
            norm_q: 40,
            hat_q: (4..=8).collect(),
            materialize_k_max: 5,
        }
    }
}

/// `(t, TV(S_t hat_u), 1 / (t TV), support length)` for `t = 2^-q`.
pub fn single_scale_rows(qs: &[u32]) -> Result<Vec<(f64, f64, f64, f64)>> {
    qs.iter()
        .map(|&q| {
            let t = 0.5f64.powi(q as i32);
            let h = hat_u(t)?;
            let tv = h.tv_at(t)?;
            Ok((t, tv, 1.0 / (t * tv), h.support_length()))
        })
        .collect()
}

pub fn multiscale_norm(levels: usize, q: u32) -> Result<f64> {
    Ok(prop33_datum(levels, &default_schedule(levels))?.norm_upper(0.5, q))
}

/// `(k, symbolic TV, solver TV)` at the design time `2^-k` of a packet.
pub fn packet_agreement(k_max: u32) -> Result<Vec<(u32, f64, f64)>> {
    (1..=k_max)
        .into_par_iter()
        .map(|k| {
            let t = 0.5f64.powi(k as i32);
            let pk = make_packet(k, t)?;
            let u = packet_materialize(&pk)?;
            let sym = packet_tv(&pk, t)?;
            let exact = solve_burgers(&u, t)?.solution.total_variation();
            Ok((k, sym, exact))
        })
        .collect()
}

fn e2(p: &E2Params, base: &Baselines) -> Result<Outcome> {
    if p.levels == 0 || p.levels > MAX_MULTISCALE_LEVELS {
        return Err(Error::Resource(format!("levels must lie in 1..={MAX_MULTISCALE_LEVELS}, got {}", p.levels)));
    }
    let d = prop33_datum(p.levels, &default_schedule(p.levels))?;
    let mut cols = vec!["j".to_string(), "t".into(), "tv".into()];
    cols.extend(p.betas.iter().map(|b| format!("scaled_{b}")));
    let mut series = Table { name: "blowup".into(), columns: cols, rows: Vec::new() };
    let scaled: Vec<Vec<f64>> = p.betas.iter().map(|&b| d.blowup_series(b)).collect::<Result<_>>()?;
    for j in 0..p.levels {
        let mut row = vec![j as f64, d.levels[j].t, d.tv_lower(j)?];
        row.extend(scaled.iter().map(|s| s[j]));
        series.push(row);
    }
    let mut verdicts = Vec::new();
    for (b, s) in p.betas.iter().zip(&scaled) {
        let ratio = s.windows(2).map(|w| w[1] / w[0]).fold(f64::INFINITY, f64::min);
        verdicts.push(Verdict::at_least(format!("growth_beta_{b}"), ratio, p.growth));
    }
    let norm = d.norm_upper(0.5, p.norm_q);
    verdicts.push(Verdict::at_most("multiscale_norm", norm, BASELINE_FACTOR * base.multiscale_norm));

    let rows = single_scale_rows(&p.hat_q)?;
    let mut hat = Table::new("single_scale", &["t", "tv", "c", "support"]);
    for r in &rows {
        hat.push(vec![r.0, r.1, r.2, r.3]);
    }
    let cs: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let (cmin, cmax) = cs.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &c| (a.min(c), b.max(c)));
    verdicts.push(Verdict::at_most("single_scale_support", rows.iter().map(|r| r.3).fold(0.0, f64::max), 1.0));
    verdicts.push(Verdict::at_most("single_scale_c_spread", cmax / cmin, BASELINE_FACTOR));
    verdicts.push(Verdict::factor("single_scale_c_baseline", cmax, base.single_scale_c, BASELINE_FACTOR));

    let agree = packet_agreement(p.materialize_k_max)?;
    let mut pk = Table::new("packets", &["k", "symbolic", "solver"]);
    for a in &agree {
        pk.push(vec![a.0 as f64, a.1, a.2]);
    }
    let worst = agree.iter().map(|a| (a.1 - a.2).abs() / a.1).fold(0.0, f64::max);
    verdicts.push(Verdict::at_most("packet_agreement", worst, 1e-9));
    Ok((vec![series, hat, pk], verdicts))
}

// ---------------------------------------------------------------- e3

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct E3Params {
    pub alpha: f64,
    pub data: usize,
    pub levels: u32,
    pub q_min: u32,
    pub q_max: u32,
    pub norm_q: u32,
    pub contrast_levels: usize,
}

impl Default for E3Params {
    fn default() -> Self {
        E3Params { alpha: 0.75, data: 10, levels: 8, q_min: 1, q_max: 12, norm_q: 24, contrast_levels: 3 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayRow {
    pub seed: u64,
    pub norm_upper: f64,
    pub sup: f64,
    pub c0: f64,
}

/// One row per datum `random_palpha(seed + i)`.
pub fn decay_rows(p: &E3Params, seed: u64) -> Result<Vec<DecayRow>> {
    if !(p.alpha > 0.5 && p.alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (1/2, 1), got {}", p.alpha)));
    }
    if p.levels > MAX_RANDOM_LEVELS {
        return Err(Error::Resource(format!("levels = {} exceeds {MAX_RANDOM_LEVELS}", p.levels)));
    }
    let times = dyadic_times(p.q_min, p.q_max);
    (0..p.data as u64)
        .into_par_iter()
        .map(|i| {
            let s = seed + i;
            let u = random_palpha(&mut rng(s), p.alpha, p.levels);
            let norm_upper = palpha_norm_upper(&u, p.alpha, p.norm_q)?.norm_upper;
            let sup = dalpha_tilde_membership(&u, p.alpha, &times)?.sup;
            let c0 = sup * (2.0 * p.alpha - 1.0) / norm_upper;
            Ok(DecayRow { seed: s, norm_upper, sup, c0 })
        })
        .collect()
}

fn e3(p: &E3Params, seed: u64, base: &Baselines) -> Result<Outcome> {
    let rows = decay_rows(p, seed)?;
    let mut t = Table::new("decay", &["seed", "norm_upper", "sup", "c0"]);
    for r in &rows {
        t.push(vec![r.seed as f64, r.norm_upper, r.sup, r.c0]);
    }
    let c0 = rows.iter().map(|r| r.c0).fold(0.0, f64::max);
    let finite = rows.iter().all(|r| r.sup.is_finite());
    let mut verdicts = vec![
        Verdict::at_most("sup_finite", if finite { 0.0 } else { 1.0 }, 0.0),
        Verdict::at_most("c0_baseline", c0, BASELINE_FACTOR * base.decay_c0),
    ];
    // contrast: the multiscale datum at alpha = 1/2 keeps growing
    let d = prop33_datum(p.contrast_levels, &default_schedule(p.contrast_levels))?;
    let s = d.blowup_series(0.5)?;
    let mut c = Table::new("contrast", &["j", "t", "scaled"]);
    for (j, v) in s.iter().enumerate() {
        c.push(vec![j as f64, d.levels[j].t, *v]);
    }
    let ratio = s.windows(2).map(|w| w[1] / w[0]).fold(f64::INFINITY, f64::min);
    verdicts.push(Verdict::at_least("contrast_growth", ratio, 1.0));
    Ok((vec![t, c], verdicts))
}

// ---------------------------------------------------------------- e4

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct E4Params {
    pub hat_t: f64,
    pub random_alpha: f64,
    pub random_levels: u32,
    pub k_max: u32,
    pub i_max: u32,
    pub ratio_limit: f64,
    pub residual_limit: f64,
}

impl Default for E4Params {
    fn default() -> Self {
        E4Params {
            hat_t: 0.125,
            random_alpha: 0.75,
            random_levels: 8,
            k_max: 12,
            i_max: 24,
            ratio_limit: 10.0,
            residual_limit: 1e-6,
        }
    }
}

/// Measurements of one decomposition round trip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundTrip {
    pub alpha: f64,
    pub norm_upper: f64,
    pub smallest_c: f64,
    pub passed: bool,
    pub converse: f64,
    pub residual: f64,
    pub levels: Vec<(u32, f64, f64, f64)>,
}

pub fn round_trip(u: &PLFunction, alpha: f64, k_max: u32, i_max: u32) -> Result<RoundTrip> {
    let (d, est) = decompose(u, alpha, k_max, i_max)?;
    let rep = verify_theorem_dec(u, &d);
    let converse = norm_from_decomposition(&d, k_max + i_max).max(palpha_norm_upper(&d.sum(), alpha, k_max + i_max)?.norm_upper);
    Ok(RoundTrip {
        alpha,
        norm_upper: est.norm_upper,
        smallest_c: rep.smallest_c,
        passed: rep.passed(),
        converse,
        residual: rep.residual_measured,
        levels: rep.levels.iter().map(|l| (l.k, l.tv, l.support, l.c_needed)).collect(),
    })
}

fn e4(p: &E4Params, seed: u64) -> Result<Outcome> {
    if p.random_levels > MAX_RANDOM_LEVELS {
        return Err(Error::Resource(format!("random_levels = {} exceeds {MAX_RANDOM_LEVELS}", p.random_levels)));
    }
    let hat = hat_u(p.hat_t)?.materialize()?;
    let random = random_palpha(&mut rng(seed), p.random_alpha, p.random_levels);
    let cases = [("hat", hat, 0.5), ("random", random, p.random_alpha)];
    let results = cases
        .par_iter()
        .map(|(_, u, a)| round_trip(u, *a, p.k_max, p.i_max))
        .collect::<Result<Vec<_>>>()?;
    let mut tables = Vec::new();
    let mut verdicts = Vec::new();
    let mut summary = Table::new("summary", &["alpha", "norm_upper", "smallest_c", "converse", "residual"]);
    for ((name, _, _), r) in cases.iter().zip(&results) {
        let mut t = Table::new(format!("levels_{name}"), &["k", "tv", "support", "c_needed"]);
        for l in &r.levels {
            t.push(vec![l.0 as f64, l.1, l.2, l.3]);
        }
        tables.push(t);
        summary.push(vec![r.alpha, r.norm_upper, r.smallest_c, r.converse, r.residual]);
        verdicts.push(Verdict::at_least(format!("{name}_verified"), if r.passed { 1.0 } else { 0.0 }, 1.0));
        verdicts.push(Verdict::at_most(format!("{name}_ratio"), r.smallest_c / r.norm_upper, p.ratio_limit));
        verdicts.push(Verdict::at_most(format!("{name}_converse"), r.converse / r.smallest_c, converse_factor(r.alpha)));
        verdicts.push(Verdict::at_most(format!("{name}_residual"), r.residual, p.residual_limit));
    }
    tables.insert(0, summary);
    Ok((tables, verdicts))
}

// ---------------------------------------------------------------- e5

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct E5Params {
    pub alphas: Vec<f64>,
    pub m_max: i32,
    pub data: usize,
    pub nodes: usize,
    pub tolerance: f64,
    pub q_max: u32,
}

impl Default for E5Params {
    fn default() -> Self {
        E5Params { alphas: vec![0.25, 0.5, 0.75], m_max: 10, data: 20, nodes: 8, tolerance: 1e-5, q_max: 10 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelRow {
    pub alpha: f64,
    pub h: f64,
    pub approx_ratio: f64,
    pub derivative_l1: f64,
    pub seminorm: f64,
    pub kernel_constant: f64,
}

/// Mollifier measurements on the unit box for `h = 2^-m`, `m = 1..=m_max`.
pub fn kernel_rows(p: &E5Params) -> Result<Vec<KernelRow>> {
    let u = PLFunction::boxcar(0.0, 1.0, 1.0);
    let mut out = Vec::new();
    for &alpha in &p.alphas {
        let s = w_alpha1_seminorm(&u, alpha, 1e-9)?;
        let rows = (1..=p.m_max)
            .into_par_iter()
            .map(|m| {
                let h = 0.5f64.powi(m);
                let c = mollifier_check(&u, alpha, h, s)?;
                Ok(KernelRow {
                    alpha,
                    h,
                    approx_ratio: c.approx_error / (s * h.powf(alpha)),
                    derivative_l1: c.derivative_l1,
                    seminorm: s,
                    kernel_constant: c.kernel_constant,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.extend(rows);
    }
    Ok(out)
}

fn e5(p: &E5Params, seed: u64, base: &Baselines) -> Result<Outcome> {
    let unit = PLFunction::boxcar(0.0, 1.0, 1.0);
    let mut verdicts = Vec::new();
    let mut ind = Table::new("indicator", &["alpha", "seminorm", "exact"]);
    for &alpha in &p.alphas {
        let v = w_alpha1_seminorm(&unit, alpha, 1e-9)?;
        let exact = 4.0 / (alpha * (1.0 - alpha));
        ind.push(vec![alpha, v, exact]);
        verdicts.push(Verdict::at_most(format!("indicator_alpha_{alpha}"), (v - exact).abs() / exact, p.tolerance));
    }

    let rows = kernel_rows(p)?;
    let mut lem = Table::new("mollifier", &["alpha", "h", "approx_ratio", "derivative_l1", "seminorm", "kernel_constant"]);
    for r in &rows {
        lem.push(vec![r.alpha, r.h, r.approx_ratio, r.derivative_l1, r.seminorm, r.kernel_constant]);
    }
    let approx = rows.iter().map(|r| r.approx_ratio).fold(0.0, f64::max);
    let kc = rows.iter().map(|r| r.kernel_constant).fold(0.0, f64::max);
    let derived = rows
        .iter()
        .map(|r| r.kernel_constant / Mollifier::derivative_constant(r.alpha))
        .fold(0.0, f64::max);
    verdicts.push(Verdict::at_most("mollifier_approx", approx, 1.0));
    verdicts.push(Verdict::at_most("mollifier_derived_constant", derived, 1.0));
    verdicts.push(Verdict::factor("kernel_constant_baseline", kc, base.kernel_constant, BASELINE_FACTOR));

    let times: Vec<f64> = (0..=p.q_max).map(|q| 0.5f64.powi(q as i32)).collect();
    let pipe = (0..p.data as u64)
        .into_par_iter()
        .map(|i| {
            let u = random_pl(&mut rng(seed + i), p.nodes, 1.0);
            let mut worst = (0.0f64, 0.0f64);
            for &alpha in &p.alphas {
                let s = w_alpha1_seminorm(&u, alpha, 1e-7)?;
                let sup = dalpha_membership(&u, alpha, &times)?.sup;
                let bound = sobolev_decay_bound(&u, s, Mollifier::derivative_constant(alpha));
                worst.0 = worst.0.max(sup / bound);
                for &t in &times {
                    let w = dlambda_upper(&u, t, alpha);
                    let d = solve_burgers(&u, t)?.solution.sub(&u).l1_norm();
                    worst.1 = worst.1.max(d / palpha_decay_bound(&u, w.cost, t, alpha));
                }
            }
            Ok(((seed + i) as f64, worst.0, worst.1))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut pt = Table::new("pipelines", &["seed", "sobolev_ratio", "palpha_ratio"]);
    for r in &pipe {
        pt.push(vec![r.0, r.1, r.2]);
    }
    verdicts.push(Verdict::at_most("sobolev_pipeline", pipe.iter().map(|r| r.1).fold(0.0, f64::max), 1.0));
    verdicts.push(Verdict::at_most("palpha_pipeline", pipe.iter().map(|r| r.2).fold(0.0, f64::max), 1.0));
    Ok((vec![ind, lem, pt], verdicts))
}

// ---------------------------------------------------------------- output

/// Log-log plots of every table with `t` and `tv` columns, plus warnings for
/// tables that had nothing to draw.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Plots {
    pub files: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

pub fn plot(report: &ExperimentReport) -> Plots {
    let mut out = Plots::default();
    for t in &report.tables {
        let (Some(ts), Some(tvs)) = (t.column("t"), t.column("tv")) else { continue };
        if ts.is_empty() {
            out.warnings.push(format!("table {} is empty, no plot", t.name));
            continue;
        }
        let pts: Vec<(f64, f64)> = ts.into_iter().zip(tvs).collect();
        out.files.push((format!("{}.svg", t.name), loglog_svg(&t.name, &pts)));
    }
    out
}

/// Log-log polyline of `pts` with the fitted slope in the corner.
pub fn loglog_svg(title: &str, pts: &[(f64, f64)]) -> String {
    const W: f64 = 480.0;
    const H: f64 = 360.0;
    const PAD: f64 = 48.0;
    let slope = loglog_slope(pts);
    let lx: Vec<f64> = pts.iter().map(|p| p.0.max(f64::MIN_POSITIVE).log10()).collect();
    let positive: Vec<f64> = pts.iter().filter(|p| p.1 > 0.0).map(|p| p.1.log10()).collect();
    let (ylo, yhi) = if positive.is_empty() {
        (0.0, 1.0)
    } else {
        positive.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)))
    };
    let ly: Vec<f64> = pts.iter().map(|p| if p.1 > 0.0 { p.1.log10() } else { ylo }).collect();
    let (xlo, xhi) = lx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let span = |lo: f64, hi: f64| if hi > lo { hi - lo } else { 1.0 };
    let sx = |x: f64| PAD + (x - xlo) / span(xlo, xhi) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - ylo) / span(ylo, yhi) * (H - 2.0 * PAD);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#, W - 2.0 * PAD, H - 2.0 * PAD);
    let _ = writeln!(s, r#"<text x="{PAD}" y="{}" font-size="14">{}</text>"#, PAD - 16.0, escape(title));
    let poly: Vec<String> = lx.iter().zip(&ly).map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
    let _ = writeln!(s, r#"<polyline fill="none" stroke="steelblue" stroke-width="2" points="{}"/>"#, poly.join(" "));
    let label = if slope.is_finite() { format!("slope {slope:.3}") } else { "slope undefined".to_string() };
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12" text-anchor="end">{label}</text>"#, W - PAD - 4.0, PAD + 16.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">log10 t [{xlo:.2}, {xhi:.2}]</text>"#, W / 2.0, H - 12.0);
    let _ = writeln!(s, r#"<text x="12" y="{}" font-size="12" transform="rotate(-90 12 {})" text-anchor="middle">log10 TV</text>"#, H / 2.0, H / 2.0);
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes `report.json`, one CSV per table and the plots into `dir`.
pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, body: &str| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };
    put("report.json", &report.to_json())?;
    put("manifest.json", &serde_json::to_string_pretty(&report.manifest)?)?;
    for t in &report.tables {
        put(&format!("{}.csv", t.name), &t.to_csv())?;
    }
    let plots = plot(report);
    for (name, svg) in &plots.files {
        put(name, svg)?;
    }
    for w in &plots.warnings {
        eprintln!("warning: {w}");
    }
    Ok(written)
}
