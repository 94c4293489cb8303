//! Experiment configuration: a sectioned key/value text format, strict
//! validation, defaults, and a resolved echo written back for
//! reproducibility.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::evolve::EvolutionConfig;
use crate::model::{HartreeKernel, Nonlinearity, Potential, PotentialFamily};
use crate::soliton::SolitonParams;

#[derive(Debug, Clone, PartialEq)]
pub struct BumpSpec {
    pub eps0: f64,
    pub offset: f64,
    pub width: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    EpsV,
    Eps0,
    Dt,
}

impl SweepParameter {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepParameter::EpsV => "eps_v",
            SweepParameter::Eps0 => "eps_0",
            SweepParameter::Dt => "dt",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub t_star: f64,
    pub observables: Vec<String>,
}

/// Fully resolved experiment description. Invariants are validated at load
/// time; the echo reproduces the resolved state including filled defaults.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub n: usize,
    pub half_extent: f64,
    pub target_spacing: f64,
    pub spec: Nonlinearity,
    pub potential: Potential,
    pub sigma0: SolitonParams,
    pub a0_fraction: Option<f64>,
    pub perturbation: Option<BumpSpec>,
    pub evolution: EvolutionConfig,
    pub horizon_c: Option<f64>,
    pub mu_interval: (f64, f64),
    pub trust: f64,
    pub max_newton: usize,
    pub tracking: bool,
    pub snapshots: bool,
    pub snapshot_stride: usize,
    pub seed: u64,
    pub k_max: usize,
    pub coercivity: bool,
    pub sweep: Option<SweepSpec>,
}

impl ExperimentConfig {
    pub fn eps0(&self) -> f64 {
        self.perturbation.as_ref().map_or(0.0, |b| b.eps0)
    }

    pub fn grid(&self) -> Result<Arc<crate::grid::SpatialGrid>> {
        crate::grid::SpatialGrid::new_cube(self.dim, self.half_extent, self.n)
    }

    /// Echo of the resolved configuration in the input format.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        s.push_str("# resolved solitonlab configuration\n[domain]\n");
        s.push_str(&format!("dim = {}\n", self.dim));
        s.push_str(&format!(
            "mu_interval = {} {}\n\n[grid]\n",
            self.mu_interval.0, self.mu_interval.1
        ));
        s.push_str(&format!("n = {}\n", self.n));
        s.push_str(&format!("half_extent = {:.17e}\n", self.half_extent));
        s.push_str(&format!(
            "target_spacing = {:.17e}\n\n",
            self.target_spacing
        ));
        s.push_str("[nonlinearity]\n");
        match &self.spec.kind {
            crate::model::NonlinearityKind::Power { s: p, lambda } => {
                s.push_str(&format!("type = power\ns = {p}\nlambda = {lambda}\n"));
            }
            crate::model::NonlinearityKind::Hartree { kernel } => {
                s.push_str(&format!("type = hartree\n# kernel: {}\n", kernel.name));
            }
            crate::model::NonlinearityKind::LocalGeneral { name, .. } => {
                s.push_str(&format!("type = local_general\n# h: {name}\n"));
            }
        }
        s.push_str("\n[potential]\n");
        match &self.potential.family {
            PotentialFamily::Zero => s.push_str("family = zero\n"),
            PotentialFamily::Cosine { amplitude, kappa } => {
                s.push_str("family = cosine\n");
                s.push_str(&format!("amplitude = {amplitude:.17e}\n"));
                s.push_str(&format!(
                    "kappa = {}\n",
                    kappa
                        .iter()
                        .map(|k| format!("{k:.17e}"))
                        .collect::<Vec<_>>()
                        .join(" ")
                ));
                s.push_str(&format!("# eps_v = {:.17e}\n", self.potential.eps_v));
            }
            PotentialFamily::GaussianWell { depth, rate } => {
                s.push_str("family = gaussian_well\n");
                s.push_str(&format!("depth = {depth:.17e}\nrate = {rate:.17e}\n"));
            }
        }
        s.push_str("\n[initial]\n");
        s.push_str(&format!(
            "a0 = {}\n",
            self.sigma0
                .a
                .iter()
                .map(|a| format!("{a:.17e}"))
                .collect::<Vec<_>>()
                .join(" ")
        ));
        s.push_str(&format!(
            "v0 = {}\n",
            self.sigma0
                .v
                .iter()
                .map(|v| format!("{v:.17e}"))
                .collect::<Vec<_>>()
                .join(" ")
        ));
        s.push_str(&format!("gamma0 = {:.17e}\n", self.sigma0.gamma));
        s.push_str(&format!("mu0 = {:.17e}\n", self.sigma0.mu));
        match &self.perturbation {
            None => s.push_str("perturbation = none\n"),
            Some(b) => {
                s.push_str("perturbation = bump\n");
                s.push_str(&format!(
                    "eps0 = {:.17e}\nbump_offset = {:.17e}\nbump_width = {:.17e}\nbump_phase = {:.17e}\n",
                    b.eps0, b.offset, b.width, b.phase
                ));
            }
        }
        s.push_str("\n[evolution]\n");
        s.push_str(&format!("dt = {:.17e}\n", self.evolution.dt));
        s.push_str(&format!("t_end = {:.17e}\n", self.evolution.t_end));
        if let Some(c) = self.horizon_c {
            s.push_str(&format!("# horizon_c = {c} resolved into t_end\n"));
        }
        s.push_str(&format!("stride = {}\n", self.evolution.stride));
        s.push_str(&format!("dealias = {}\n", self.evolution.dealias));
        s.push_str(&format!(
            "n_drift_tol = {:.3e}\n",
            self.evolution.n_drift_tol
        ));
        s.push_str(&format!(
            "n_projection_stride = {}\n",
            self.evolution.n_projection_stride
        ));
        s.push_str("\n[tracking]\n");
        s.push_str(&format!("enabled = {}\n", self.tracking));
        s.push_str(&format!(
            "trust = {}\nmax_newton = {}\n",
            self.trust, self.max_newton
        ));
        s.push_str("\n[output]\n");
        s.push_str(&format!(
            "snapshots = {}\nsnapshot_stride = {}\n",
            self.snapshots, self.snapshot_stride
        ));
        s.push_str("\n[run]\n");
        s.push_str(&format!("seed = {}\n", self.seed));
        s.push_str(&format!("spectrum_k_max = {}\n", self.k_max));
        s.push_str(&format!("coercivity = {}\n", self.coercivity));
        if let Some(sw) = &self.sweep {
            s.push_str("\n[sweep]\n");
            s.push_str(&format!("parameter = {}\n", sw.parameter.as_str()));
            s.push_str(&format!(
                "values = {}\n",
                sw.values
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(" ")
            ));
            s.push_str(&format!("t_star = {}\n", sw.t_star));
            s.push_str(&format!("observables = {}\n", sw.observables.join(" ")));
        }
        s
    }
}

struct RawConfig {
    entries: BTreeMap<(String, String), String>,
    consumed: std::cell::RefCell<std::collections::BTreeSet<(String, String)>>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (lineno, raw_line) in text.lines().enumerate() {
            let line = match raw_line.find('#') {
                Some(i) => &raw_line[..i],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                if !line.ends_with(']') {
                    return Err(Error::Config(format!(
                        "line {}: malformed section header `{raw_line}`",
                        lineno + 1
                    )));
                }
                section = line[1..line.len() - 1].trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            if section.is_empty() {
                return Err(Error::Config(format!(
                    "line {}: key `{}` outside any [section]",
                    lineno + 1,
                    key.trim()
                )));
            }
            let prev = entries.insert(
                (section.clone(), key.trim().to_string()),
                value.trim().to_string(),
            );
            if prev.is_some() {
                return Err(Error::Config(format!(
                    "line {}: duplicate key `{}` in [{}]",
                    lineno + 1,
                    key.trim(),
                    section
                )));
            }
        }
        Ok(RawConfig {
            entries,
            consumed: Default::default(),
        })
    }

    fn get(&self, section: &str, key: &str) -> Option<&str> {
        let k = (section.to_string(), key.to_string());
        let v = self.entries.get(&k).map(|s| s.as_str());
        if v.is_some() {
            self.consumed.borrow_mut().insert(k);
        }
        v
    }

    fn f64(&self, section: &str, key: &str, errs: &mut Vec<String>) -> Option<f64> {
        self.get(section, key).and_then(|s| match s.parse::<f64>() {
            Ok(v) => Some(v),
            Err(_) => {
                errs.push(format!("[{section}] {key}: not a number: `{s}`"));
                None
            }
        })
    }

    fn f64_list(&self, section: &str, key: &str, errs: &mut Vec<String>) -> Option<Vec<f64>> {
        self.get(section, key).map(|s| {
            s.split_whitespace()
                .filter_map(|tok| match tok.parse::<f64>() {
                    Ok(v) => Some(v),
                    Err(_) => {
                        errs.push(format!("[{section}] {key}: not a number: `{tok}`"));
                        None
                    }
                })
                .collect()
        })
    }

    fn usize(&self, section: &str, key: &str, errs: &mut Vec<String>) -> Option<usize> {
        self.get(section, key)
            .and_then(|s| match s.parse::<usize>() {
                Ok(v) => Some(v),
                Err(_) => {
                    errs.push(format!("[{section}] {key}: not an integer: `{s}`"));
                    None
                }
            })
    }

    fn bool(&self, section: &str, key: &str, errs: &mut Vec<String>) -> Option<bool> {
        self.get(section, key).and_then(|s| match s {
            "true" | "yes" | "1" => Some(true),
            "false" | "no" | "0" => Some(false),
            other => {
                errs.push(format!("[{section}] {key}: not a boolean: `{other}`"));
                None
            }
        })
    }

    fn unknown_keys(&self) -> Vec<String> {
        let consumed = self.consumed.borrow();
        self.entries
            .keys()
            .filter(|k| !consumed.contains(*k))
            .map(|(s, k)| format!("[{s}] {k}"))
            .collect()
    }
}

fn next_pow2(x: f64) -> usize {
    let mut n = 16usize;
    while (n as f64) < x && n < (1 << 22) {
        n *= 2;
    }
    n
}

/// Loads and validates a configuration. In strict mode unknown keys are an
/// error; otherwise they are returned as warnings.
pub fn load_config_str(text: &str, strict: bool) -> Result<(ExperimentConfig, Vec<String>)> {
    let raw = RawConfig::parse(text)?;
    let mut errs: Vec<String> = Vec::new();

    let dim = raw.usize("domain", "dim", &mut errs).unwrap_or(1);
    if dim == 0 || dim > 2 {
        errs.push(format!("[domain] dim: must be 1 or 2, got {dim}"));
    }
    let mu_interval = match raw.f64_list("domain", "mu_interval", &mut errs) {
        Some(v) if v.len() == 2 && v[0] > 0.0 && v[1] > v[0] => (v[0], v[1]),
        Some(v) => {
            errs.push(format!("[domain] mu_interval: need 0 < lo < hi, got {v:?}"));
            (0.5, 2.0)
        }
        None => (0.5, 2.0),
    };

    let mu0 = raw.f64("initial", "mu0", &mut errs).unwrap_or(1.0);
    if mu0 < mu_interval.0 || mu0 > mu_interval.1 {
        errs.push(format!(
            "[initial] mu0 = {mu0} outside I₀ = [{}, {}]",
            mu_interval.0, mu_interval.1
        ));
    }

    // nonlinearity
    let spec = match raw.get("nonlinearity", "type").unwrap_or("power") {
        "power" => {
            let s = raw.f64("nonlinearity", "s", &mut errs).unwrap_or(1.0);
            let lambda = raw.f64("nonlinearity", "lambda", &mut errs).unwrap_or(1.0);
            match Nonlinearity::power(s, lambda) {
                Ok(sp) => sp,
                Err(e) => {
                    errs.push(format!("[nonlinearity]: {e}"));
                    Nonlinearity::cubic()
                }
            }
        }
        "hartree" => {
            let width = raw.f64("nonlinearity", "width", &mut errs).unwrap_or(1.0);
            let strength = raw
                .f64("nonlinearity", "strength", &mut errs)
                .unwrap_or(1.0);
            let kernel_name = raw.get("nonlinearity", "kernel").unwrap_or("gaussian");
            if kernel_name != "gaussian" {
                errs.push(format!(
                    "[nonlinearity] kernel: only `gaussian` is configurable, got `{kernel_name}`"
                ));
            }
            if width <= 0.0 {
                errs.push("[nonlinearity] width must be positive".into());
            }
            let w2 = width * width;
            Nonlinearity::hartree(HartreeKernel {
                name: format!("gaussian(width={width}, strength={strength})"),
                w: Arc::new(move |r: f64| strength * (-0.5 * r * r / w2).exp()),
            })
        }
        other => {
            errs.push(format!("[nonlinearity] type: unknown `{other}`"));
            Nonlinearity::cubic()
        }
    };

    // potential (+ box resolution)
    let mut half_extent = raw.f64("grid", "half_extent", &mut errs);
    let mut n = raw.usize("grid", "n", &mut errs);
    // default spacing puts one ε_V = 0.05 cosine period on 2048 points
    let target_spacing = raw
        .f64("grid", "target_spacing", &mut errs)
        .unwrap_or(std::f64::consts::PI / 51.2);
    let family_name = raw.get("potential", "family").unwrap_or("zero").to_string();
    let potential = match family_name.as_str() {
        "zero" => Potential::zero(),
        "cosine" => {
            let eps_v = raw.f64("potential", "eps_v", &mut errs);
            let amplitude = raw.f64("potential", "amplitude", &mut errs);
            let kappa = raw.f64_list("potential", "kappa", &mut errs);
            match (eps_v, amplitude, kappa) {
                (Some(e), None, None) => {
                    if e <= 0.0 {
                        errs.push("[potential] eps_v must be positive".into());
                    }
                    // slow-variation family V = -cos(κx), κ = ε_V·√μ₀: one
                    // period spans the box, the well sits at the origin
                    let kap = e * mu0.sqrt();
                    let l = std::f64::consts::PI / kap;
                    if half_extent.is_none() {
                        half_extent = Some(l);
                    } else if ((half_extent.unwrap() * kap / std::f64::consts::PI)
                        - (half_extent.unwrap() * kap / std::f64::consts::PI).round())
                    .abs()
                        > 1e-9
                    {
                        errs.push(format!(
                            "[grid] half_extent {} not commensurate with cosine κ = {kap}",
                            half_extent.unwrap()
                        ));
                    }
                    Potential::new(
                        PotentialFamily::Cosine {
                            amplitude: -1.0,
                            kappa: vec![kap; dim],
                        },
                        mu0,
                    )
                    .unwrap_or_else(|e| {
                        errs.push(format!("[potential]: {e}"));
                        Potential::zero()
                    })
                }
                (None, Some(a), Some(k)) => {
                    if k.len() != dim {
                        errs.push(format!(
                            "[potential] kappa: expected {dim} rates, got {}",
                            k.len()
                        ));
                    }
                    let pot = Potential::new(
                        PotentialFamily::Cosine {
                            amplitude: a,
                            kappa: k.clone(),
                        },
                        mu0,
                    );
                    match pot {
                        Ok(p) => {
                            if let Some(l) = half_extent {
                                for kj in &k {
                                    let periods = kj * l / std::f64::consts::PI;
                                    if (periods - periods.round()).abs() > 1e-9 {
                                        errs.push(format!(
                                            "[potential] kappa = {kj} not commensurate with the box (κL/π = {periods})"
                                        ));
                                    }
                                }
                            }
                            p
                        }
                        Err(e) => {
                            errs.push(format!("[potential]: {e}"));
                            Potential::zero()
                        }
                    }
                }
                _ => {
                    errs.push(
                        "[potential] cosine: give either eps_v alone or amplitude + kappa".into(),
                    );
                    Potential::zero()
                }
            }
        }
        "gaussian_well" => {
            let depth = raw.f64("potential", "depth", &mut errs).unwrap_or(0.5);
            let rate = raw.f64("potential", "rate", &mut errs).unwrap_or(0.05);
            Potential::new(PotentialFamily::GaussianWell { depth, rate }, mu0).unwrap_or_else(|e| {
                errs.push(format!("[potential]: {e}"));
                Potential::zero()
            })
        }
        other => {
            errs.push(format!("[potential] family: unknown `{other}`"));
            Potential::zero()
        }
    };
    if let Some(declared) = raw.f64("potential", "declared_eps_v", &mut errs) {
        if let Err(e) = potential.validate_declared(declared) {
            errs.push(format!("[potential] declared_eps_v: {e}"));
        }
    }

    let half_extent = half_extent.unwrap_or(60.0);
    let n = n
        .take()
        .unwrap_or_else(|| next_pow2(2.0 * half_extent / target_spacing));
    if !n.is_power_of_two() || n < 16 {
        errs.push(format!("[grid] n = {n}: need a power of two ≥ 16"));
    }

    // initial data
    let a0_fraction = raw.f64("initial", "a0_fraction", &mut errs);
    let a0 = match (raw.f64_list("initial", "a0", &mut errs), a0_fraction) {
        (Some(a), None) => {
            if a.len() != dim {
                errs.push(format!("[initial] a0: expected {dim} components"));
            }
            a
        }
        (None, Some(frac)) => vec![frac * half_extent; dim],
        (Some(_), Some(_)) => {
            errs.push("[initial]: give a0 or a0_fraction, not both".into());
            vec![0.0; dim]
        }
        (None, None) => vec![0.0; dim],
    };
    let v0 = raw
        .f64_list("initial", "v0", &mut errs)
        .unwrap_or_else(|| vec![0.0; dim]);
    if v0.len() != dim {
        errs.push(format!("[initial] v0: expected {dim} components"));
    }
    let gamma0 = raw.f64("initial", "gamma0", &mut errs).unwrap_or(0.0);
    let sigma0 = SolitonParams::new(a0.clone(), v0, gamma0, mu0);

    let perturbation = match raw.get("initial", "perturbation").unwrap_or("none") {
        "none" => {
            if let Some(e) = raw.f64("initial", "eps0", &mut errs) {
                if e != 0.0 {
                    errs.push("[initial] eps0 given but perturbation = none".into());
                }
            }
            None
        }
        "bump" => {
            let eps0 = raw.f64("initial", "eps0", &mut errs).unwrap_or(0.01);
            if eps0 < 0.0 {
                errs.push(format!("[initial] eps0 = {eps0} must be ≥ 0"));
            }
            Some(BumpSpec {
                eps0,
                offset: raw.f64("initial", "bump_offset", &mut errs).unwrap_or(1.5),
                width: raw.f64("initial", "bump_width", &mut errs).unwrap_or(1.0),
                phase: raw.f64("initial", "bump_phase", &mut errs).unwrap_or(0.3),
            })
        }
        other => {
            errs.push(format!("[initial] perturbation: unknown `{other}`"));
            None
        }
    };

    // guard margin pre-validation
    if !a0.is_empty() && a0.len() == dim && mu0 > 0.0 {
        let margin = 10.0 / mu0.sqrt();
        for (axis, a) in a0.iter().enumerate() {
            if a.abs() + margin > half_extent {
                errs.push(format!(
                    "[initial] a0[{axis}] = {a}: guard margin {margin:.2} exceeds the box {half_extent:.2}"
                ));
            }
        }
    }

    // evolution
    let dt = raw.f64("evolution", "dt", &mut errs).unwrap_or(0.005);
    let horizon_c = raw.f64("evolution", "horizon_c", &mut errs);
    let eps0_val = perturbation.as_ref().map_or(0.0, |b| b.eps0);
    let t_end = match (raw.f64("evolution", "t_end", &mut errs), horizon_c) {
        (Some(t), None) => t,
        (None, Some(c)) => {
            let denom = potential.eps_v + eps0_val * eps0_val;
            if denom <= 0.0 {
                errs.push("[evolution] horizon_c needs ε_V + ε₀² > 0".into());
                0.0
            } else {
                c / denom
            }
        }
        (Some(_), Some(_)) => {
            errs.push("[evolution]: give t_end or horizon_c, not both".into());
            0.0
        }
        (None, None) => 40.0,
    };
    let evolution = EvolutionConfig {
        dt,
        t_end,
        stride: raw.usize("evolution", "stride", &mut errs).unwrap_or(10),
        dealias: raw.bool("evolution", "dealias", &mut errs).unwrap_or(false),
        n_drift_tol: raw
            .f64("evolution", "n_drift_tol", &mut errs)
            .unwrap_or(1e-10),
        n_projection_stride: raw
            .usize("evolution", "n_projection_stride", &mut errs)
            .unwrap_or(50),
    };
    if let Err(e) = evolution.validate() {
        errs.push(format!("[evolution]: {e}"));
    }

    let tracking = raw.bool("tracking", "enabled", &mut errs).unwrap_or(true);
    let trust = raw.f64("tracking", "trust", &mut errs).unwrap_or(0.3);
    let max_newton = raw.usize("tracking", "max_newton", &mut errs).unwrap_or(50);

    let snapshots = raw.bool("output", "snapshots", &mut errs).unwrap_or(false);
    let snapshot_stride = raw
        .usize("output", "snapshot_stride", &mut errs)
        .unwrap_or(100);

    let seed = raw
        .get("run", "seed")
        .map(|s| {
            s.parse::<u64>().unwrap_or_else(|_| {
                errs.push(format!("[run] seed: not an integer: `{s}`"));
                42
            })
        })
        .unwrap_or(42);
    let k_max = raw
        .usize("run", "spectrum_k_max", &mut errs)
        .unwrap_or(if dim == 1 { 1 } else { 2 });
    let coercivity = raw.bool("run", "coercivity", &mut errs).unwrap_or(true);

    let sweep = if raw.get("sweep", "parameter").is_some() {
        let parameter = match raw.get("sweep", "parameter").unwrap() {
            "eps_v" => SweepParameter::EpsV,
            "eps_0" => SweepParameter::Eps0,
            "dt" => SweepParameter::Dt,
            other => {
                errs.push(format!("[sweep] parameter: unknown `{other}`"));
                SweepParameter::EpsV
            }
        };
        let values = raw
            .f64_list("sweep", "values", &mut errs)
            .unwrap_or_default();
        if values.len() < 3 {
            errs.push("[sweep] values: need at least 3 values".into());
        } else {
            // geometric spacing check
            let r0 = values[1] / values[0];
            for w in values.windows(2) {
                let r = w[1] / w[0];
                if !(r.is_finite()) || (r / r0 - 1.0).abs() > 1e-6 {
                    errs.push(format!(
                        "[sweep] values: not geometrically spaced: {values:?}"
                    ));
                    break;
                }
            }
        }
        let t_star = raw.f64("sweep", "t_star", &mut errs).unwrap_or(20.0);
        let observables = raw
            .get("sweep", "observables")
            .map(|s| s.split_whitespace().map(str::to_string).collect())
            .unwrap_or_else(|| vec!["sup_a_dev_tstar".to_string(), "sup_alpha_tstar".to_string()]);
        Some(SweepSpec {
            parameter,
            values,
            t_star,
            observables,
        })
    } else {
        None
    };

    let unknown = raw.unknown_keys();
    let mut warnings = Vec::new();
    if !unknown.is_empty() {
        if strict {
            errs.push(format!("unknown keys: {}", unknown.join(", ")));
        } else {
            warnings.push(format!("ignoring unknown keys: {}", unknown.join(", ")));
        }
    }

    if !errs.is_empty() {
        return Err(Error::Config(format!(
            "{} problem(s):\n  - {}",
            errs.len(),
            errs.join("\n  - ")
        )));
    }

    Ok((
        ExperimentConfig {
            dim,
            n,
            half_extent,
            target_spacing,
            spec,
            potential,
            sigma0,
            a0_fraction,
            perturbation,
            evolution,
            horizon_c,
            mu_interval,
            trust,
            max_newton,
            tracking,
            snapshots,
            snapshot_stride,
            seed,
            k_max,
            coercivity,
            sweep,
        },
        warnings,
    ))
}

pub fn load_config(
    path: &std::path::Path,
    strict: bool,
) -> Result<(ExperimentConfig, Vec<String>)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    load_config_str(&text, strict)
}
