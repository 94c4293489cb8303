//! Experiment orchestration: the certification → profile → evolution →
//! tracking → effective-comparison pipeline, persistent JSON-lines/CSV/text
//! outputs (flushed per sample), and order-of-convergence sweeps.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;

use crate::config::{BumpSpec, ExperimentConfig, SweepParameter};
use crate::error::{Error, Result};
use crate::evolve::{ehrenfest_residuals, evolve_run, ConservationRecord};
use crate::field::ComplexField;
use crate::grid::SpatialGrid;
use crate::linops::{spectral_report, SpectralReport};
use crate::model::{verify_conditions, PotentialFamily, Verdict};
use crate::modulation::{
    alpha_records, delta_x_eval, lyapunov_gap, project_skew_orthogonal, Decomposer,
    ModulationState, Tracker,
};
use crate::profile::{solve_profile, ProfileCache};
use crate::soliton::{from_moving_frame, synthesize, tangent_frame, SolitonParams};

/// 17-significant-digit float formatting used in every machine-readable file.
pub fn g17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

fn json_array(values: &[f64]) -> String {
    let items: Vec<String> = values.iter().map(|v| g17(*v)).collect();
    format!("[{}]", items.join(","))
}

/// Per-run summary, written exactly once; the schema version tags the layout.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub schema_version: u32,
    pub conditions_passed: bool,
    pub condition_f: String,
    pub l1_negative: usize,
    pub l2_negative: usize,
    pub rho: Option<f64>,
    pub m_prime: f64,
    pub eps_v: f64,
    pub eps0: f64,
    pub dt: f64,
    pub t_end: f64,
    pub t_star: f64,
    pub sup_w_h1: f64,
    pub sup_w_h1_tstar: f64,
    pub sup_alpha: f64,
    pub sup_alpha_tstar: f64,
    pub sup_a_dev: f64,
    pub sup_a_dev_tstar: f64,
    pub sup_v_dev: f64,
    pub sup_gamma_dev: f64,
    pub mu_drift: f64,
    pub mu_drift_tstar: f64,
    pub delta_e0: f64,
    pub lyapunov_ok_all: Option<bool>,
    pub n_drift_rel: f64,
    pub hv_drift_rel: f64,
    pub ehrenfest_int_rel: f64,
    pub horizon_reached: f64,
    pub wall_seconds: f64,
}

impl RunSummary {
    /// Named observables for sweep fits.
    pub fn observable(&self, key: &str) -> Option<f64> {
        let v = match key {
            "sup_a_dev_tstar" => self.sup_a_dev_tstar,
            "sup_a_dev_horizon" => self.sup_a_dev,
            "sup_alpha_tstar" => self.sup_alpha_tstar,
            "sup_alpha_horizon" => self.sup_alpha,
            "sup_w_h1_tstar" => self.sup_w_h1_tstar,
            "sup_w_h1_horizon" => self.sup_w_h1,
            "mu_drift_tstar" => self.mu_drift_tstar,
            "mu_drift_horizon" => self.mu_drift,
            "sup_v_dev" => self.sup_v_dev,
            "sup_gamma_dev" => self.sup_gamma_dev,
            "delta_e0" => self.delta_e0.abs(),
            "hv_drift_rel" => self.hv_drift_rel,
            "n_drift_rel" => self.n_drift_rel,
            "ehrenfest_int_rel" => self.ehrenfest_int_rel,
            _ => return None,
        };
        if v.is_finite() {
            Some(v)
        } else {
            None
        }
    }

    pub fn to_json(&self) -> String {
        let rho = self.rho.map_or("null".to_string(), g17);
        let lya = match self.lyapunov_ok_all {
            None => "null".to_string(),
            Some(b) => b.to_string(),
        };
        format!(
            concat!(
                "{{\"schema_version\":{},\"conditions_passed\":{},\"condition_f\":\"{}\",",
                "\"l1_negative\":{},\"l2_negative\":{},\"rho\":{},\"m_prime\":{},",
                "\"eps_v\":{},\"eps0\":{},\"dt\":{},\"t_end\":{},\"t_star\":{},",
                "\"sup_w_h1\":{},\"sup_w_h1_tstar\":{},\"sup_alpha\":{},\"sup_alpha_tstar\":{},",
                "\"sup_a_dev\":{},\"sup_a_dev_tstar\":{},\"sup_v_dev\":{},\"sup_gamma_dev\":{},",
                "\"mu_drift\":{},\"mu_drift_tstar\":{},\"delta_e0\":{},\"lyapunov_ok_all\":{},",
                "\"n_drift_rel\":{},\"hv_drift_rel\":{},\"ehrenfest_int_rel\":{},",
                "\"horizon_reached\":{},\"wall_seconds\":{}}}"
            ),
            self.schema_version,
            self.conditions_passed,
            self.condition_f,
            self.l1_negative,
            self.l2_negative,
            rho,
            g17(self.m_prime),
            g17(self.eps_v),
            g17(self.eps0),
            g17(self.dt),
            g17(self.t_end),
            g17(self.t_star),
            g17(self.sup_w_h1),
            g17(self.sup_w_h1_tstar),
            g17(self.sup_alpha),
            g17(self.sup_alpha_tstar),
            g17(self.sup_a_dev),
            g17(self.sup_a_dev_tstar),
            g17(self.sup_v_dev),
            g17(self.sup_gamma_dev),
            g17(self.mu_drift),
            g17(self.mu_drift_tstar),
            g17(self.delta_e0),
            lya,
            g17(self.n_drift_rel),
            g17(self.hv_drift_rel),
            g17(self.ehrenfest_int_rel),
            g17(self.horizon_reached),
            g17(self.wall_seconds),
        )
    }
}

fn writer(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

/// Builds the initial datum `ψ₀ = S_{σ₀}(η_μ + w₀)`: a Gaussian bump in the
/// moving frame, projected onto the skew-orthogonal complement of the frame
/// and rescaled to `||w₀||_H¹ = ε₀`.
pub fn build_initial_data(
    cache: &ProfileCache,
    sigma0: &SolitonParams,
    bump: Option<&BumpSpec>,
    grid: &Arc<SpatialGrid>,
) -> Result<(ComplexField, Option<ComplexField>)> {
    let view = cache.at(sigma0.mu)?;
    match bump {
        None => Ok((synthesize(&view, sigma0, grid)?, None)),
        Some(b) if b.eps0 == 0.0 => Ok((synthesize(&view, sigma0, grid)?, None)),
        Some(b) => {
            let base = SolitonParams::base(grid.dim(), sigma0.mu);
            let frame = tangent_frame(&view, &base, grid)?;
            let d = grid.dim();
            let raw = ComplexField::from_fn(grid.clone(), |x| {
                let mut q = 0.0;
                for (j, xj) in x[..d].iter().enumerate() {
                    let c = if j == 0 { b.offset } else { 0.0 };
                    q += (xj - c) * (xj - c);
                }
                Complex64::from_polar((-0.5 * q / (b.width * b.width)).exp(), b.phase)
            });
            let projected = project_skew_orthogonal(&raw, &frame)?;
            let h1 = projected.norms().h1;
            if h1 < 1e-12 {
                return Err(Error::numerical(
                    "initial data",
                    "perturbation annihilated by the skew-orthogonal projection",
                ));
            }
            let w0 = projected.scale(Complex64::new(b.eps0 / h1, 0.0));
            let eta = synthesize(&view, &base, grid)?;
            let u0 = eta.add(&w0)?;
            Ok((from_moving_frame(&u0, sigma0)?, Some(w0)))
        }
    }
}

/// Streaming JSON-lines writer for the modulation time series. Records are
/// emitted with a one-sample lag so the centered-difference α and δX of a
/// sample are available when its line is written; every line is flushed.
struct TimeSeriesWriter {
    out: BufWriter<fs::File>,
}

impl TimeSeriesWriter {
    fn write_record(
        &mut self,
        state: &ModulationState,
        alpha: Option<&[f64]>,
        delta_x: Option<&[f64]>,
        r_v_norm: Option<f64>,
        delta_e: Option<f64>,
        lyapunov_ok: Option<bool>,
    ) -> Result<()> {
        let alpha_s = alpha.map_or("null".to_string(), json_array);
        let dx_s = delta_x.map_or("null".to_string(), json_array);
        let rv_s = r_v_norm.map_or("null".to_string(), g17);
        let de_s = delta_e.map_or("null".to_string(), g17);
        let ly_s = match lyapunov_ok {
            None => "null".to_string(),
            Some(b) => b.to_string(),
        };
        writeln!(
            self.out,
            "{{\"t\":{},\"a\":{},\"v\":{},\"gamma\":{},\"gamma_mod_2pi\":{},\"mu\":{},\"w_l2\":{},\"w_h1\":{},\"constraint_resid\":{},\"newton_iters\":{},\"alpha\":{},\"delta_x\":{},\"r_v_norm\":{},\"delta_e\":{},\"lyapunov_ok\":{}}}",
            g17(state.t),
            json_array(&state.sigma.a),
            json_array(&state.sigma.v),
            g17(state.sigma.gamma),
            g17(state.sigma.gamma_mod_2pi()),
            g17(state.sigma.mu),
            g17(state.w_l2),
            g17(state.w_h1),
            g17(state.constraint_resid),
            state.newton_iters,
            alpha_s,
            dx_s,
            rv_s,
            de_s,
            ly_s,
        )?;
        self.out.flush()?;
        Ok(())
    }
}

fn write_conservation(path: &Path, records: &[ConservationRecord]) -> Result<()> {
    let mut out = writer(path)?;
    for r in records {
        writeln!(
            out,
            "{{\"t\":{},\"n\":{},\"h_v\":{},\"momentum\":{},\"force\":{}}}",
            g17(r.t),
            g17(r.n),
            g17(r.h_v),
            json_array(&r.momentum),
            json_array(&r.force),
        )?;
    }
    out.flush()?;
    Ok(())
}

fn write_snapshot(out: &mut BufWriter<fs::File>, t: f64, psi: &ComplexField) -> Result<()> {
    // little-endian f64 header (n, d, box, t), then n^d (re, im) pairs
    let grid = psi.grid();
    for v in [
        grid.points_per_axis() as f64,
        grid.dim() as f64,
        grid.half_extent(0),
        t,
    ] {
        out.write_all(&v.to_le_bytes())?;
    }
    for v in psi.values() {
        out.write_all(&v.re.to_le_bytes())?;
        out.write_all(&v.im.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

struct SpectralDigest {
    rho: Option<f64>,
    l1_negative: usize,
    l2_negative: usize,
    condition_f: Verdict,
}

fn certification_stage(
    config: &ExperimentConfig,
    cache: &ProfileCache,
    grid: &Arc<SpatialGrid>,
    outdir: &Path,
    summary_rows: &mut Vec<String>,
) -> Result<(SpectralDigest, f64)> {
    // analytic conditions
    let mut conditions = verify_conditions(&config.spec, config.dim);
    let mu0 = config.sigma0.mu;

    // profile at μ₀ (exported) and the numeric stability verdict
    let profile = solve_profile(&config.spec, mu0, config.dim, cache.radial_n)?;
    let mut pf = writer(&outdir.join("profile.txt"))?;
    profile.export_table(&mut pf)?;
    pf.flush()?;
    let m_prime = profile.mass_slope();
    conditions.merge_stability(m_prime);

    fs::write(outdir.join("conditions.txt"), conditions.render())?;
    summary_rows.push(format!(
        "{{\"record\":\"conditions\",\"passed\":{},\"m_prime\":{}}}",
        conditions.passed(),
        g17(m_prime)
    ));
    if !conditions.passed() {
        let failed: Vec<String> = conditions
            .checks
            .iter()
            .filter(|c| c.verdict == Verdict::Fail)
            .map(|c| c.name.clone())
            .collect();
        return Err(Error::certification(
            &failed.join(", "),
            format!("see {}", outdir.join("conditions.txt").display()),
        ));
    }

    // spectral certification on the run grid
    let view = cache.at(mu0)?;
    let report: SpectralReport = spectral_report(
        &config.spec,
        &profile,
        &view,
        config.k_max,
        grid,
        config.coercivity,
    )?;
    fs::write(outdir.join("spectral_report.txt"), report.render())?;
    summary_rows.push(format!(
        "{{\"record\":\"spectral\",\"l1_negative\":{},\"l2_negative\":{},\"rho\":{},\"condition_f\":\"{}\",\"zero_mode_resids\":{}}}",
        report.l1_negative,
        report.l2_negative,
        report.rho.map_or("null".to_string(), g17),
        report.condition_f,
        json_array(&report.zero_mode_resids),
    ));
    if report.condition_f != Verdict::Pass {
        return Err(Error::certification(
            "null space",
            format!("see {}", outdir.join("spectral_report.txt").display()),
        ));
    }
    Ok((
        SpectralDigest {
            rho: report.rho,
            l1_negative: report.l1_negative,
            l2_negative: report.l2_negative,
            condition_f: report.condition_f,
        },
        m_prime,
    ))
}

/// Runs the full pipeline into `outdir`. With `t_end = 0` the run is
/// certification-only (no evolution, tracking or comparison).
pub fn run_experiment(config: &ExperimentConfig, outdir: &Path) -> Result<RunSummary> {
    let wall = std::time::Instant::now();
    fs::create_dir_all(outdir)?;
    fs::write(outdir.join("config_echo.cfg"), config.echo())?;
    let grid = config.grid()?;
    let cache = ProfileCache::new(config.spec.clone(), config.dim);
    let mut summary_rows: Vec<String> = Vec::new();

    let result = run_pipeline(config, &cache, &grid, outdir, &mut summary_rows, wall);
    // the summary stream is written even when a stage failed
    let mut sw = writer(&outdir.join("summary.jsonl"))?;
    for row in &summary_rows {
        writeln!(sw, "{row}")?;
    }
    if let Ok(summary) = &result {
        writeln!(
            sw,
            "{{\"record\":\"run_summary\",\"data\":{}}}",
            summary.to_json()
        )?;
        fs::write(outdir.join("run_summary.json"), summary.to_json())?;
    }
    sw.flush()?;
    result
}

fn run_pipeline(
    config: &ExperimentConfig,
    cache: &ProfileCache,
    grid: &Arc<SpatialGrid>,
    outdir: &Path,
    summary_rows: &mut Vec<String>,
    wall: std::time::Instant,
) -> Result<RunSummary> {
    let (digest, m_prime) = certification_stage(config, cache, grid, outdir, summary_rows)?;
    let t_star = config.sweep.as_ref().map_or(20.0, |s| s.t_star);
    let mut summary = RunSummary {
        schema_version: 1,
        conditions_passed: true,
        condition_f: digest.condition_f.to_string(),
        l1_negative: digest.l1_negative,
        l2_negative: digest.l2_negative,
        rho: digest.rho,
        m_prime,
        eps_v: config.potential.eps_v,
        eps0: config.eps0(),
        dt: config.evolution.dt,
        t_end: config.evolution.t_end,
        t_star,
        sup_w_h1: f64::NAN,
        sup_w_h1_tstar: f64::NAN,
        sup_alpha: f64::NAN,
        sup_alpha_tstar: f64::NAN,
        sup_a_dev: f64::NAN,
        sup_a_dev_tstar: f64::NAN,
        sup_v_dev: f64::NAN,
        sup_gamma_dev: f64::NAN,
        mu_drift: f64::NAN,
        mu_drift_tstar: f64::NAN,
        delta_e0: f64::NAN,
        lyapunov_ok_all: None,
        n_drift_rel: f64::NAN,
        hv_drift_rel: f64::NAN,
        ehrenfest_int_rel: f64::NAN,
        horizon_reached: 0.0,
        wall_seconds: 0.0,
    };

    summary_rows.push(format!(
        "{{\"record\":\"integrator\",\"phase_rotation_per_step\":{},\"dt\":{}}}",
        g17(config.evolution.phase_rotation(grid)),
        g17(config.evolution.dt)
    ));

    if config.evolution.t_end <= 0.0 {
        summary.wall_seconds = wall.elapsed().as_secs_f64();
        return Ok(summary);
    }

    // initial data (+ ΔE(0) when perturbed)
    let (psi0, w0) = build_initial_data(cache, &config.sigma0, config.perturbation.as_ref(), grid)?;
    let rho = digest.rho.unwrap_or(f64::NAN);
    if let Some(w0) = &w0 {
        let norms = w0.norms();
        let state0 = ModulationState {
            t: 0.0,
            sigma: config.sigma0.clone(),
            w: w0.clone(),
            w_l2: norms.l2,
            w_h1: norms.h1,
            newton_iters: 0,
            constraint_resid: 0.0,
        };
        summary.delta_e0 = lyapunov_gap(&state0, &config.spec, cache, rho)?.delta_e;
    } else {
        summary.delta_e0 = 0.0;
    }

    // evolution with tracking and streaming output
    let mut ts_writer = TimeSeriesWriter {
        out: writer(&outdir.join("timeseries.jsonl"))?,
    };
    let mut snapshot_out = if config.snapshots {
        Some(writer(&outdir.join("snapshots.bin"))?)
    } else {
        None
    };
    let snapshot_stride = config.snapshot_stride.max(1);

    let mut decomposer = Decomposer::new(cache, config.mu_interval);
    decomposer.trust = config.trust;
    decomposer.max_iter = config.max_newton;
    let mut tracker = Tracker::new(decomposer, config.sigma0.clone());
    let tracking = config.tracking;
    // one-sample lag buffer: records are written once their α is computable
    let mut written = 0usize;
    let outcome = {
        let tracker_ref = &mut tracker;
        let writer_ref = &mut ts_writer;
        let snap = &mut snapshot_out;
        evolve_run(
            &psi0,
            &config.evolution,
            &config.potential,
            &config.spec,
            |idx, t, psi| {
                if let Some(out) = snap.as_mut() {
                    if idx % snapshot_stride == 0 {
                        write_snapshot(out, t, psi)?;
                    }
                }
                if !tracking {
                    return Ok(());
                }
                tracker_ref.observe(idx, t, psi)?;
                // emit the record that just became centered
                let states = &tracker_ref.states;
                if states.len() >= 3 {
                    let k = states.len() - 2;
                    let alphas = alpha_records(&states[k - 1..=k + 1], &config.potential);
                    let rec = &alphas[0];
                    let (dx, rv) = delta_x_eval(
                        &states[k],
                        &rec.alpha,
                        &config.potential,
                        &config.spec,
                        cache,
                    )?;
                    let ly = lyapunov_gap(&states[k], &config.spec, cache, rho)?;
                    writer_ref.write_record(
                        &states[k],
                        Some(&rec.alpha),
                        Some(&dx),
                        Some(rv),
                        Some(ly.delta_e),
                        ly.lower_bound_ok,
                    )?;
                    written = k + 1;
                } else if states.len() == 2 {
                    // first sample has no centered difference
                    let ly = lyapunov_gap(&states[0], &config.spec, cache, rho)?;
                    writer_ref.write_record(
                        &states[0],
                        None,
                        None,
                        None,
                        Some(ly.delta_e),
                        ly.lower_bound_ok,
                    )?;
                    written = 1;
                }
                Ok(())
            },
        )?
    };
    let states = tracker.into_states();
    if tracking && !states.is_empty() {
        // trailing record(s) without a centered difference
        for state in &states[written..] {
            let ly = lyapunov_gap(state, &config.spec, cache, rho)?;
            ts_writer.write_record(state, None, None, None, Some(ly.delta_e), ly.lower_bound_ok)?;
        }
    }

    write_conservation(&outdir.join("conservation.jsonl"), &outcome.records)?;
    let n0 = outcome.records[0].n;
    let h0 = outcome.records[0].h_v;
    summary.n_drift_rel = outcome
        .records
        .iter()
        .map(|r| ((r.n - n0) / n0).abs())
        .fold(0.0, f64::max);
    summary.hv_drift_rel = outcome
        .records
        .iter()
        .map(|r| ((r.h_v - h0) / h0.abs().max(1e-300)).abs())
        .fold(0.0, f64::max);
    if outcome.records.len() >= 3 {
        let ehr = ehrenfest_residuals(&outcome.records)?;
        summary.ehrenfest_int_rel = ehr.time_integrated_relative;
        summary_rows.push(format!(
            "{{\"record\":\"ehrenfest\",\"time_integrated_relative\":{},\"sup_absolute\":{}}}",
            g17(ehr.time_integrated_relative),
            g17(ehr.sup_absolute)
        ));
    }
    summary.horizon_reached = outcome.records.last().map_or(0.0, |r| r.t);

    if tracking && states.len() >= 3 {
        // effective flow on the tracked sample times
        let out_dt = config.evolution.dt * config.evolution.stride as f64;
        let ode_dt = if config.potential.eps_v > 0.0 {
            (0.01 / config.potential.eps_v).min(out_dt)
        } else {
            out_dt
        };
        let flow = crate::effective::newton_flow(
            &config.sigma0,
            &config.potential,
            states.last().unwrap().t,
            ode_dt,
            out_dt,
        )?;
        let mut ef = writer(&outdir.join("effective.csv"))?;
        flow.write_csv(&mut ef)?;
        ef.flush()?;

        let report = crate::effective::compare_trajectories(&states, &flow)?;
        fs::write(outdir.join("deviations.txt"), report.render())?;
        summary_rows.push(format!(
            "{{\"record\":\"deviations\",\"sup_a\":{},\"sup_v\":{},\"sup_gamma\":{},\"sup_mu_drift\":{}}}",
            g17(report.sup_a),
            g17(report.sup_v),
            g17(report.sup_gamma),
            g17(report.sup_mu_drift)
        ));
        summary.sup_a_dev = report.sup_a;
        summary.sup_a_dev_tstar = report.sup_a_until(t_star);
        summary.sup_v_dev = report.sup_v;
        summary.sup_gamma_dev = report.sup_gamma;
        summary.mu_drift = report.sup_mu_drift;
        summary.mu_drift_tstar = states
            .iter()
            .filter(|s| s.t <= t_star + 1e-9)
            .map(|s| (s.sigma.mu - config.sigma0.mu).abs())
            .fold(0.0, f64::max);

        summary.sup_w_h1 = states.iter().map(|s| s.w_h1).fold(0.0, f64::max);
        summary.sup_w_h1_tstar = states
            .iter()
            .filter(|s| s.t <= t_star + 1e-9)
            .map(|s| s.w_h1)
            .fold(0.0, f64::max);
        let alphas = alpha_records(&states, &config.potential);
        summary.sup_alpha = alphas
            .iter()
            .flat_map(|r| r.alpha.iter())
            .fold(0.0f64, |m, a| m.max(a.abs()));
        summary.sup_alpha_tstar = alphas
            .iter()
            .filter(|r| r.t <= t_star + 1e-9)
            .flat_map(|r| r.alpha.iter())
            .fold(0.0f64, |m, a| m.max(a.abs()));
        // Lyapunov lower bound along the run (inside the small-w region)
        let mut all_ok: Option<bool> = None;
        if digest.rho.is_some() {
            for s in &states {
                if s.w_h1 > 0.0 && s.w_h1 <= 0.05 {
                    let ly = lyapunov_gap(s, &config.spec, cache, rho)?;
                    if let Some(ok) = ly.lower_bound_ok {
                        all_ok = Some(all_ok.unwrap_or(true) && ok);
                    }
                }
            }
        }
        summary.lyapunov_ok_all = all_ok;
    }

    summary.wall_seconds = wall.elapsed().as_secs_f64();
    Ok(summary)
}

/// Member generation for sweeps: applies the swept parameter to a copy of
/// the base configuration, keeping the cosine family self-similar
/// (κ ∝ ε_V, fixed physical spacing, positions scaled with the box).
pub fn sweep_member(
    base: &ExperimentConfig,
    parameter: SweepParameter,
    value: f64,
    index: usize,
) -> Result<ExperimentConfig> {
    let mut cfg = base.clone();
    cfg.seed = base.seed.wrapping_add(index as u64);
    cfg.sweep = None;
    match parameter {
        SweepParameter::EpsV => {
            let mu0 = cfg.sigma0.mu;
            let kap = value * mu0.sqrt();
            cfg.potential = crate::model::Potential::new(
                PotentialFamily::Cosine {
                    amplitude: -1.0,
                    kappa: vec![kap; cfg.dim],
                },
                mu0,
            )?;
            cfg.half_extent = std::f64::consts::PI / kap;
            let mut n = 16usize;
            while (n as f64) < 2.0 * cfg.half_extent / cfg.target_spacing {
                n *= 2;
            }
            cfg.n = n;
            if let Some(frac) = cfg.a0_fraction {
                cfg.sigma0.a = vec![frac * cfg.half_extent; cfg.dim];
            }
            if let Some(c) = cfg.horizon_c {
                let e0 = cfg.eps0();
                cfg.evolution.t_end = c / (value + e0 * e0);
            }
        }
        SweepParameter::Eps0 => {
            match cfg.perturbation.as_mut() {
                Some(b) => b.eps0 = value,
                None => {
                    cfg.perturbation = Some(BumpSpec {
                        eps0: value,
                        offset: 1.5,
                        width: 1.0,
                        phase: 0.3,
                    })
                }
            }
            if let Some(c) = cfg.horizon_c {
                cfg.evolution.t_end = c / (cfg.potential.eps_v + value * value);
            }
        }
        SweepParameter::Dt => {
            let sample_dt = base.evolution.dt * base.evolution.stride as f64;
            cfg.evolution.dt = value;
            cfg.evolution.stride = ((sample_dt / value).round() as usize).max(1);
        }
    }
    Ok(cfg)
}

#[derive(Debug, Clone)]
pub struct OrderFit {
    pub observable: String,
    pub slope: f64,
    pub r2: f64,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug)]
pub struct OrderReport {
    pub parameter: String,
    pub fits: Vec<OrderFit>,
    pub member_errors: Vec<(usize, String)>,
    pub summaries: Vec<Option<RunSummary>>,
}

impl OrderReport {
    pub fn render(&self) -> String {
        let mut s = format!("order study in {}\n", self.parameter);
        for f in &self.fits {
            s.push_str(&format!(
                "  {:<22} slope = {:+.4}  R² = {:.6}\n",
                f.observable, f.slope, f.r2
            ));
            for (x, y) in &f.points {
                s.push_str(&format!("      {x:.6e} -> {y:.6e}\n"));
            }
        }
        for (i, e) in &self.member_errors {
            s.push_str(&format!("  member {i} FAILED: {e}\n"));
        }
        s
    }

    pub fn fit(&self, observable: &str) -> Option<&OrderFit> {
        self.fits.iter().find(|f| f.observable == observable)
    }
}

/// Least-squares slope of log(obs) against log(param) with R².
pub fn log_log_fit(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    if points.len() < 2 || points.iter().any(|(x, y)| *x <= 0.0 || *y <= 0.0) {
        return None;
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|(x, _)| x.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|(_, y)| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy) / (sxx * syy)
    };
    Some((slope, r2))
}

/// Runs every sweep member concurrently and fits log-log slopes for the
/// requested observables. A failed member yields a partial report (written
/// to disk) and a numerical error naming it.
pub fn sweep_orders(
    config: &ExperimentConfig,
    outdir: &Path,
    workers: usize,
) -> Result<OrderReport> {
    let sweep = config
        .sweep
        .clone()
        .ok_or_else(|| Error::Config("no [sweep] section in the configuration".into()))?;
    fs::create_dir_all(outdir)?;
    let members: Vec<(usize, ExperimentConfig, PathBuf)> = sweep
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            sweep_member(config, sweep.parameter, *v, i)
                .map(|m| (i, m, outdir.join(format!("member_{i:02}"))))
        })
        .collect::<Result<_>>()?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::numerical("sweep", format!("thread pool: {e}")))?;
    let results: Vec<std::result::Result<RunSummary, String>> = pool.install(|| {
        use rayon::prelude::*;
        members
            .par_iter()
            .map(|(_, cfg, dir)| run_experiment(cfg, dir).map_err(|e| e.to_string()))
            .collect()
    });

    let mut member_errors = Vec::new();
    let mut summaries: Vec<Option<RunSummary>> = Vec::new();
    for (i, r) in results.iter().enumerate() {
        match r {
            Ok(s) => summaries.push(Some(s.clone())),
            Err(e) => {
                member_errors.push((i, e.clone()));
                summaries.push(None);
            }
        }
    }

    let mut fits = Vec::new();
    for obs in &sweep.observables {
        let points: Vec<(f64, f64)> = sweep
            .values
            .iter()
            .zip(&summaries)
            .filter_map(|(v, s)| s.as_ref().and_then(|s| s.observable(obs).map(|y| (*v, y))))
            .collect();
        if points.len() >= 3 {
            if let Some((slope, r2)) = log_log_fit(&points) {
                fits.push(OrderFit {
                    observable: obs.clone(),
                    slope,
                    r2,
                    points,
                });
            }
        }
    }

    let report = OrderReport {
        parameter: sweep.parameter.as_str().to_string(),
        fits,
        member_errors,
        summaries,
    };
    fs::write(outdir.join("order_report.txt"), report.render())?;
    let mut csv = writer(&outdir.join("orders.csv"))?;
    writeln!(csv, "observable,slope,r2")?;
    for f in &report.fits {
        writeln!(csv, "{},{},{}", f.observable, g17(f.slope), g17(f.r2))?;
    }
    csv.flush()?;

    if !report.member_errors.is_empty() {
        let list: Vec<String> = report
            .member_errors
            .iter()
            .map(|(i, e)| format!("member {i}: {e}"))
            .collect();
        return Err(Error::numerical(
            "sweep",
            format!(
                "partial report at {}; {}",
                outdir.join("order_report.txt").display(),
                list.join("; ")
            ),
        ));
    }
    Ok(report)
}
