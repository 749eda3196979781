//! Scenario configuration.
//!
//! A config file only needs the keys it wants to change: it is merged over
//! the defaults of the chosen scale and then decoded strictly, so unknown
//! keys and mistyped values are reported with their full path.

use std::fmt;
use std::path::Path;

use isac_core::elmmse::{CodebookKind, SgdConfig};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Desk,
    Paper,
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Desk => "desk",
            Scale::Paper => "paper",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub output_dir: String,
    pub scale: Scale,
    pub re_region: ReRegionConfig,
    pub cd_boundary: CdBoundaryConfig,
    pub crb_rate: CrbRateConfig,
    pub elmmse: ElmmseConfig,
    pub zzb: ZzbConfig,
}

/// Point-target rate-exponent regions. SNRs follow the `P ||H||_F^2 / s^2`
/// convention, so the channel gains are derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReRegionConfig {
    pub elements: usize,
    pub power: f64,
    pub noise_c: f64,
    pub noise_s: f64,
    pub snr_c_db: f64,
    pub snr_s_db: f64,
    /// `[theta_c, theta_s]` in degrees from broadside.
    pub angle_pairs_deg: Vec<[f64; 2]>,
    pub lambda_points: usize,
    pub beam_lambdas: Vec<f64>,
    pub beam_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CdBoundaryConfig {
    pub budget_db: f64,
    pub input_points: usize,
    pub input_span: f64,
    pub state_nodes: usize,
    pub output_step: f64,
    pub output_tail: f64,
    /// Sensing multipliers (per nat).
    pub mu: Vec<f64>,
    pub tol: f64,
    pub max_iters: usize,
    pub max_over_relaxation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrbRateConfig {
    pub instances: usize,
    /// Instance `i` uses `block_lengths[i % len]`.
    pub block_lengths: Vec<usize>,
    pub n_mc: usize,
    pub large_block_length: usize,
    pub large_block_instances: usize,
    pub large_block_n_mc: usize,
    pub max_params: usize,
    pub max_antennas: usize,
    pub max_blocks: usize,
    pub prior_scale: f64,
    pub power: f64,
    pub noise_c: f64,
    pub noise_s: f64,
    pub restarts: usize,
    pub pg_max_iters: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Codebook {
    Gaussian,
    Semiunitary,
}

impl From<Codebook> for CodebookKind {
    fn from(c: Codebook) -> Self {
        match c {
            Codebook::Gaussian => CodebookKind::Gaussian,
            Codebook::Semiunitary => CodebookKind::Semiunitary,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdSection {
    pub batch: usize,
    pub iterations: usize,
    pub step_grid: Vec<f64>,
    pub pilot_iterations: usize,
    pub validation_draws: usize,
    pub checkpoint_every: usize,
}

impl From<&SgdSection> for SgdConfig {
    fn from(s: &SgdSection) -> Self {
        SgdConfig {
            batch: s.batch,
            iterations: s.iterations,
            step_grid: s.step_grid.clone(),
            pilot_iterations: s.pilot_iterations,
            validation_draws: s.validation_draws,
            checkpoint_every: s.checkpoint_every,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElmmseConfig {
    pub tx_antennas: usize,
    pub rx_antennas: usize,
    pub block_length: usize,
    pub power: f64,
    pub correlation: f64,
    pub codebook: Codebook,
    pub snr_db: Vec<f64>,
    pub n_mc: usize,
    pub schemes: Vec<String>,
    /// Check every data-dependent precoder against a projected-gradient run.
    pub certify: bool,
    pub sgd: SgdSection,
    pub jensen_block_lengths: Vec<usize>,
    pub jensen_snr_db: f64,
    pub jensen_n_mc: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZzbConfig {
    pub f_high_hz: f64,
    pub n_bins: usize,
    pub lag_points: usize,
    /// Largest range error in meters; `10 c / f_high` when absent.
    pub eps_max_m: Option<f64>,
    pub snr_db: Vec<f64>,
    pub restarts: usize,
    pub max_iters: usize,
    pub tol: f64,
}

impl Config {
    pub fn defaults(scale: Scale) -> Self {
        let sgd = SgdConfig::default();
        let paper = scale == Scale::Paper;
        Config {
            seed: 7,
            output_dir: "out".into(),
            scale,
            re_region: ReRegionConfig {
                elements: 10,
                power: 1.0,
                noise_c: 1.0,
                noise_s: 1.0,
                snr_c_db: 10.0,
                snr_s_db: 0.0,
                angle_pairs_deg: vec![[60.0, 90.0], [60.0, -30.0]],
                lambda_points: 101,
                beam_lambdas: vec![0.0, 0.5, 1.0],
                beam_points: 721,
            },
            cd_boundary: CdBoundaryConfig {
                budget_db: 10.0,
                input_points: 161,
                input_span: 4.0,
                state_nodes: 128,
                output_step: 0.2,
                output_tail: 9.0,
                mu: isac_core::cap_distortion::default_mu_schedule(),
                tol: 1e-9,
                max_iters: 10_000,
                max_over_relaxation: 16.0,
            },
            crb_rate: CrbRateConfig {
                instances: 100,
                block_lengths: vec![8, 32],
                n_mc: if paper { 10_000 } else { 1000 },
                large_block_length: 4096,
                large_block_instances: if paper { 20 } else { 5 },
                large_block_n_mc: 200,
                max_params: 4,
                max_antennas: 6,
                max_blocks: 2,
                prior_scale: 0.1,
                power: 10.0,
                noise_c: 1.0,
                noise_s: 1.0,
                restarts: 5,
                pg_max_iters: 5000,
            },
            elmmse: ElmmseConfig {
                tx_antennas: if paper { 64 } else { 16 },
                rx_antennas: if paper { 32 } else { 8 },
                block_length: if paper { 32 } else { 16 },
                power: 1.0,
                correlation: 0.9,
                codebook: Codebook::Gaussian,
                snr_db: vec![-5.0, 0.0, 5.0, 10.0],
                n_mc: if paper { 1000 } else { 200 },
                schemes: vec!["wf".into(), "dd".into(), "di".into()],
                certify: true,
                sgd: SgdSection {
                    batch: sgd.batch,
                    iterations: sgd.iterations,
                    step_grid: sgd.step_grid,
                    pilot_iterations: sgd.pilot_iterations,
                    validation_draws: sgd.validation_draws,
                    checkpoint_every: sgd.checkpoint_every,
                },
                jensen_block_lengths: vec![16, 64, 256, 1024],
                jensen_snr_db: 10.0,
                jensen_n_mc: 200,
            },
            zzb: ZzbConfig {
                f_high_hz: 1e9,
                n_bins: 64,
                lag_points: 2048,
                eps_max_m: None,
                snr_db: vec![-10.0, 0.0, 10.0, 20.0],
                restarts: 20,
                max_iters: 2000,
                tol: 1e-10,
            },
        }
    }

    /// SHA-256 of the canonical JSON form, leaving out `output_dir` so that
    /// the destination does not change the outputs.
    pub fn sha256(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serialises");
        if let Value::Object(m) = &mut v {
            m.remove("output_dir");
        }
        hex_digest(serde_json::to_string(&v).expect("value serialises").as_bytes())
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// One problem with a named config field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<String>,
    pub scale: Option<Scale>,
    pub theta_c_deg: Option<f64>,
    pub theta_s_deg: Option<f64>,
}

fn parse_document(path: &Path) -> Result<Value, FieldError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| FieldError::new("config", format!("cannot read {}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let value: Value = if is_json {
        serde_json::from_str(&text).map_err(|e| FieldError::new("config", format!("invalid JSON: {e}")))?
    } else {
        toml::from_str(&text).map_err(|e| FieldError::new("config", format!("invalid TOML: {e}")))?
    };
    match value {
        Value::Object(_) => Ok(value),
        _ => Err(FieldError::new("config", "top level must be a table")),
    }
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Read, merge over the scale defaults, apply overrides and validate.
pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Config, Vec<FieldError>> {
    let user = match path {
        Some(p) => parse_document(p).map_err(|e| vec![e])?,
        None => Value::Object(Map::new()),
    };
    let file_scale = match user.get("scale") {
        None => None,
        Some(v) => Some(Scale::deserialize(v).map_err(|_| vec![FieldError::new("scale", "expected \"desk\" or \"paper\"")])?),
    };
    let scale = overrides.scale.or(file_scale).unwrap_or(Scale::Desk);
    let mut merged = serde_json::to_value(Config::defaults(scale)).expect("defaults serialise");
    merge(&mut merged, user);

    let mut cfg: Config = serde_path_to_error::deserialize(merged).map_err(|e| {
        let field = e.path().to_string();
        let field = if field == "." { "config".to_string() } else { field };
        vec![FieldError::new(field, e.into_inner().to_string())]
    })?;
    cfg.scale = scale;
    if let Some(seed) = overrides.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &overrides.output_dir {
        cfg.output_dir = out.clone();
    }
    match (overrides.theta_c_deg, overrides.theta_s_deg) {
        (None, None) => {}
        (c, s) => {
            let first = cfg.re_region.angle_pairs_deg.first().copied().unwrap_or([0.0, 0.0]);
            cfg.re_region.angle_pairs_deg = vec![[c.unwrap_or(first[0]), s.unwrap_or(first[1])]];
        }
    }
    let errors = validate(&cfg);
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(errors)
    }
}

struct Checker(Vec<FieldError>);

impl Checker {
    fn positive(&mut self, field: &str, v: f64) {
        if !(v > 0.0 && v.is_finite()) {
            self.0.push(FieldError::new(field, format!("must be positive and finite, got {v}")));
        }
    }

    fn finite(&mut self, field: &str, v: f64) {
        if !v.is_finite() {
            self.0.push(FieldError::new(field, format!("must be finite, got {v}")));
        }
    }

    fn at_least(&mut self, field: &str, v: usize, min: usize) {
        if v < min {
            self.0.push(FieldError::new(field, format!("must be at least {min}, got {v}")));
        }
    }

    fn nonempty<T>(&mut self, field: &str, v: &[T]) {
        if v.is_empty() {
            self.0.push(FieldError::new(field, "must not be empty"));
        }
    }

    fn require(&mut self, ok: bool, field: &str, message: impl Into<String>) {
        if !ok {
            self.0.push(FieldError::new(field, message));
        }
    }
}

/// Module preconditions, checked without running any solver.
pub fn validate(cfg: &Config) -> Vec<FieldError> {
    let mut c = Checker(Vec::new());

    let r = &cfg.re_region;
    c.at_least("re_region.elements", r.elements, 1);
    c.positive("re_region.power", r.power);
    c.positive("re_region.noise_c", r.noise_c);
    c.positive("re_region.noise_s", r.noise_s);
    c.finite("re_region.snr_c_db", r.snr_c_db);
    c.finite("re_region.snr_s_db", r.snr_s_db);
    c.nonempty("re_region.angle_pairs_deg", &r.angle_pairs_deg);
    for (i, pair) in r.angle_pairs_deg.iter().enumerate() {
        for (j, a) in pair.iter().enumerate() {
            c.finite(&format!("re_region.angle_pairs_deg[{i}][{j}]"), *a);
        }
    }
    c.at_least("re_region.lambda_points", r.lambda_points, 2);
    for (i, l) in r.beam_lambdas.iter().enumerate() {
        c.require((0.0..=1.0).contains(l), &format!("re_region.beam_lambdas[{i}]"), format!("must lie in [0, 1], got {l}"));
    }
    c.at_least("re_region.beam_points", r.beam_points, 2);

    let d = &cfg.cd_boundary;
    c.finite("cd_boundary.budget_db", d.budget_db);
    c.require(
        d.input_points >= 3 && d.input_points % 2 == 1,
        "cd_boundary.input_points",
        format!("must be odd and at least 3, got {}", d.input_points),
    );
    c.positive("cd_boundary.input_span", d.input_span);
    c.at_least("cd_boundary.state_nodes", d.state_nodes, 1);
    c.positive("cd_boundary.output_step", d.output_step);
    c.positive("cd_boundary.output_tail", d.output_tail);
    c.nonempty("cd_boundary.mu", &d.mu);
    for (i, mu) in d.mu.iter().enumerate() {
        c.require(mu.is_finite() && *mu >= 0.0, &format!("cd_boundary.mu[{i}]"), format!("must be nonnegative, got {mu}"));
    }
    c.positive("cd_boundary.tol", d.tol);
    c.at_least("cd_boundary.max_iters", d.max_iters, 1);
    c.require(
        d.max_over_relaxation >= 1.0,
        "cd_boundary.max_over_relaxation",
        format!("must be at least 1, got {}", d.max_over_relaxation),
    );

    let k = &cfg.crb_rate;
    c.at_least("crb_rate.instances", k.instances, 1);
    c.nonempty("crb_rate.block_lengths", &k.block_lengths);
    for (i, t) in k.block_lengths.iter().enumerate() {
        // The DoF-loss bound needs T > min(K, rank).
        c.require(
            *t > k.max_params.min(k.max_antennas),
            &format!("crb_rate.block_lengths[{i}]"),
            format!("must exceed min(max_params, max_antennas) = {}, got {t}", k.max_params.min(k.max_antennas)),
        );
    }
    c.at_least("crb_rate.n_mc", k.n_mc, 2);
    c.require(
        k.large_block_instances == 0 || k.large_block_length > k.max_params.min(k.max_antennas),
        "crb_rate.large_block_length",
        "must exceed min(max_params, max_antennas)",
    );
    if k.large_block_instances > 0 {
        c.at_least("crb_rate.large_block_n_mc", k.large_block_n_mc, 2);
    }
    c.at_least("crb_rate.max_params", k.max_params, 1);
    c.at_least("crb_rate.max_antennas", k.max_antennas, 1);
    c.at_least("crb_rate.max_blocks", k.max_blocks, 1);
    c.positive("crb_rate.prior_scale", k.prior_scale);
    c.positive("crb_rate.power", k.power);
    c.positive("crb_rate.noise_c", k.noise_c);
    c.positive("crb_rate.noise_s", k.noise_s);
    c.at_least("crb_rate.restarts", k.restarts, 1);
    c.at_least("crb_rate.pg_max_iters", k.pg_max_iters, 1);

    let e = &cfg.elmmse;
    c.at_least("elmmse.tx_antennas", e.tx_antennas, 1);
    c.at_least("elmmse.rx_antennas", e.rx_antennas, 1);
    c.at_least("elmmse.block_length", e.block_length, 1);
    if e.codebook == Codebook::Semiunitary {
        c.require(
            e.block_length >= e.tx_antennas,
            "elmmse.block_length",
            format!(
                "semiunitary codebook needs block_length >= tx_antennas ({} < {})",
                e.block_length, e.tx_antennas
            ),
        );
    }
    c.positive("elmmse.power", e.power);
    c.require(
        e.correlation.is_finite() && e.correlation.abs() < 1.0,
        "elmmse.correlation",
        format!("must lie in (-1, 1), got {}", e.correlation),
    );
    c.nonempty("elmmse.snr_db", &e.snr_db);
    for (i, s) in e.snr_db.iter().enumerate() {
        c.finite(&format!("elmmse.snr_db[{i}]"), *s);
    }
    c.at_least("elmmse.n_mc", e.n_mc, 2);
    c.nonempty("elmmse.schemes", &e.schemes);
    for (i, s) in e.schemes.iter().enumerate() {
        c.require(
            isac_core::elmmse::SCHEME_NAMES.contains(&s.as_str()),
            &format!("elmmse.schemes[{i}]"),
            format!("unknown scheme {s:?}, expected one of {:?}", isac_core::elmmse::SCHEME_NAMES),
        );
    }
    c.at_least("elmmse.sgd.batch", e.sgd.batch, 1);
    c.at_least("elmmse.sgd.iterations", e.sgd.iterations, 1);
    c.nonempty("elmmse.sgd.step_grid", &e.sgd.step_grid);
    for (i, s) in e.sgd.step_grid.iter().enumerate() {
        c.positive(&format!("elmmse.sgd.step_grid[{i}]"), *s);
    }
    c.at_least("elmmse.sgd.validation_draws", e.sgd.validation_draws, 1);
    c.at_least("elmmse.sgd.checkpoint_every", e.sgd.checkpoint_every, 1);
    for (i, t) in e.jensen_block_lengths.iter().enumerate() {
        c.at_least(&format!("elmmse.jensen_block_lengths[{i}]"), *t, 1);
    }
    c.finite("elmmse.jensen_snr_db", e.jensen_snr_db);
    if !e.jensen_block_lengths.is_empty() {
        c.at_least("elmmse.jensen_n_mc", e.jensen_n_mc, 2);
    }

    let z = &cfg.zzb;
    c.positive("zzb.f_high_hz", z.f_high_hz);
    c.at_least("zzb.n_bins", z.n_bins, 2);
    c.at_least("zzb.lag_points", z.lag_points, 2);
    if let Some(eps) = z.eps_max_m {
        c.positive("zzb.eps_max_m", eps);
    }
    c.nonempty("zzb.snr_db", &z.snr_db);
    for (i, s) in z.snr_db.iter().enumerate() {
        c.finite(&format!("zzb.snr_db[{i}]"), *s);
    }
    c.at_least("zzb.restarts", z.restarts, 1);
    c.at_least("zzb.max_iters", z.max_iters, 1);
    c.positive("zzb.tol", z.tol);

    c.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
