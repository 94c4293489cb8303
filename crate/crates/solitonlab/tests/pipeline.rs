//! Integration tests of the harness surfaces: error-path exit codes,
//! output determinism, the snapshot format, sweep partial failures, the
//! interpolated-profile residual on the evolution grid, the §7-style
//! Lyapunov drift scaling, and a 2D end-to-end smoke run.

use num_complex::Complex64;
use once_cell::sync::Lazy;

use solitonlab::config::load_config_str;
use solitonlab::error::Error;
use solitonlab::evolve::{evolve_run, EvolutionConfig};
use solitonlab::experiment::{run_experiment, sweep_orders};
use solitonlab::field::ComplexField;
use solitonlab::grid::SpatialGrid;
use solitonlab::linops::grid_profile_residual;
use solitonlab::model::{Nonlinearity, Potential, PotentialFamily};
use solitonlab::modulation::{alpha_records, lyapunov_gap, Decomposer, Tracker};
use solitonlab::profile::ProfileCache;
use solitonlab::soliton::{synthesize, SolitonParams};

static CACHE: Lazy<ProfileCache> = Lazy::new(|| ProfileCache::new(Nonlinearity::cubic(), 1));

#[test]
fn exit_codes_reflect_failure_class() {
    // config error → 2
    let bad = load_config_str("[initial]\nmu0 = 99.0\n", true).unwrap_err();
    assert_eq!(bad.exit_code(), 2);
    // certification failure (s=1 at d=2 is critical) → 3
    let text = "
[domain]
dim = 2
[grid]
n = 64
half_extent = 20.0
[potential]
family = zero
[initial]
mu0 = 1.0
[evolution]
t_end = 0.0
";
    let (cfg, _) = load_config_str(text, true).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let err = run_experiment(&cfg, dir.path()).unwrap_err();
    assert!(matches!(err, Error::Certification { .. }), "{err}");
    assert_eq!(err.exit_code(), 3);
    // the partial artifacts are on disk
    assert!(dir.path().join("conditions.txt").exists());
    assert!(dir.path().join("summary.jsonl").exists());
    // numerical failure (guard violation) → 4
    let guard = "
[grid]
n = 256
half_extent = 20.0
[potential]
family = zero
[initial]
a0 = 15.0
[evolution]
t_end = 1.0
";
    let err2 = load_config_str(guard, true).unwrap_err();
    assert_eq!(err2.exit_code(), 2); // caught at validation: guard pre-checked
    assert!(err2.to_string().contains("guard"), "{err2}");
}

#[test]
fn outputs_are_bit_deterministic() {
    let text = "
[grid]
n = 512
half_extent = 60.0
[potential]
family = zero
[initial]
v0 = 0.3
[evolution]
dt = 0.01
t_end = 1.0
stride = 20
[run]
seed = 7
";
    let (cfg, _) = load_config_str(text, true).unwrap();
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    run_experiment(&cfg, d1.path()).unwrap();
    run_experiment(&cfg, d2.path()).unwrap();
    for file in ["timeseries.jsonl", "conservation.jsonl", "effective.csv"] {
        let a = std::fs::read(d1.path().join(file)).unwrap();
        let b = std::fs::read(d2.path().join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
}

#[test]
fn snapshot_format_is_readable() {
    let text = "
[grid]
n = 256
half_extent = 60.0
[potential]
family = zero
[initial]
v0 = 0.0
[evolution]
dt = 0.01
t_end = 0.2
stride = 10
[output]
snapshots = true
snapshot_stride = 1
";
    let (cfg, _) = load_config_str(text, true).unwrap();
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&cfg, dir.path()).unwrap();
    let bytes = std::fs::read(dir.path().join("snapshots.bin")).unwrap();
    let record = 8 * (4 + 2 * 256);
    assert_eq!(bytes.len() % record, 0, "snapshot records misaligned");
    let n = f64::from_le_bytes(bytes[0..8].try_into().unwrap());
    let d = f64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let half = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let t0 = f64::from_le_bytes(bytes[24..32].try_into().unwrap());
    assert_eq!(n, 256.0);
    assert_eq!(d, 1.0);
    assert_eq!(half, 60.0);
    assert_eq!(t0, 0.0);
}

#[test]
fn sweep_flags_failing_members() {
    // the middle member violates the guard margin (absolute a0 with a
    // shrinking box) and must be reported as a partial failure
    let text = "
[potential]
family = cosine
eps_v = 0.1
[initial]
a0 = 18.0
mu0 = 1.0
[evolution]
dt = 0.01
t_end = 0.5
stride = 10
[sweep]
parameter = eps_v
values = 0.08 0.16 0.32
observables = sup_w_h1_horizon
";
    let (cfg, _) = load_config_str(text, true).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let err = sweep_orders(&cfg, dir.path(), 2).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("partial report"), "{msg}");
    assert!(dir.path().join("order_report.txt").exists());
    let report = std::fs::read_to_string(dir.path().join("order_report.txt")).unwrap();
    assert!(report.contains("FAILED"), "{report}");
}

#[test]
fn interpolated_profile_residual_on_evolution_grid() {
    let grid = SpatialGrid::new_cube(1, 60.0, 2048).unwrap();
    let view = CACHE.at(1.0).unwrap();
    let resid = grid_profile_residual(&Nonlinearity::cubic(), &view, &grid).unwrap();
    assert!(resid < 1e-6 * view.eta0(), "grid residual {resid:.3e}");
}

#[test]
fn lyapunov_drift_constant_stable_across_eps() {
    // cumulative |ΔE(t) - ΔE(0)| ≤ C·t·(ε²||w|| + ε||w||² + |α|·||w||²):
    // the fitted C must be stable (±50%) across ε_V
    let spec = Nonlinearity::cubic();
    let mut cs = Vec::new();
    for eps in [0.1f64, 0.05] {
        let kap = eps;
        let half = std::f64::consts::PI / kap;
        let n = if eps > 0.07 { 1024 } else { 2048 };
        let grid = SpatialGrid::new_cube(1, half, n).unwrap();
        let pot = Potential::new(
            PotentialFamily::Cosine {
                amplitude: -1.0,
                kappa: vec![kap],
            },
            1.0,
        )
        .unwrap();
        let sigma0 = SolitonParams::new(vec![0.15 * half], vec![0.0], 0.0, 1.0);
        let view = CACHE.at(1.0).unwrap();
        let psi0 = synthesize(&view, &sigma0, &grid).unwrap();
        let config = EvolutionConfig {
            dt: 0.005,
            t_end: 20.0,
            stride: 10,
            ..Default::default()
        };
        let dec = Decomposer::new(&CACHE, (0.5, 2.0));
        let mut tracker = Tracker::new(dec, sigma0.clone());
        evolve_run(&psi0, &config, &pot, &spec, |i, t, psi| {
            tracker.observe(i, t, psi)
        })
        .unwrap();
        let states = tracker.into_states();
        let alphas = alpha_records(&states, &pot);
        let sup_w = states.iter().map(|s| s.w_h1).fold(0.0, f64::max);
        let sup_alpha = alphas
            .iter()
            .flat_map(|r| r.alpha.iter())
            .fold(0.0f64, |m, a| m.max(a.abs()));
        let de0 = lyapunov_gap(&states[0], &spec, &CACHE, 0.3249)
            .unwrap()
            .delta_e;
        let mut c_run = 0.0f64;
        for s in states.iter().skip(1) {
            let de = lyapunov_gap(s, &spec, &CACHE, 0.3249).unwrap().delta_e;
            let bound_rate = eps * eps * sup_w + eps * sup_w * sup_w + sup_alpha * sup_w * sup_w;
            c_run = c_run.max((de - de0).abs() / (s.t * bound_rate));
        }
        cs.push(c_run);
    }
    let ratio = cs[0] / cs[1];
    assert!(
        (0.5..=1.5).contains(&ratio),
        "drift constants {cs:?} vary beyond ±50% (ratio {ratio:.3})"
    );
}

#[test]
fn perturbed_run_fluctuation_stays_bounded() {
    // ||w(t)||_H1 ≤ 3(ε_V + ε₀) over t ≤ 1/ε_V for perturbed initial data
    let text = "
[potential]
family = cosine
eps_v = 0.05
[initial]
a0_fraction = 0.15
mu0 = 1.0
perturbation = bump
eps0 = 0.05
bump_offset = 1.5
bump_width = 1.0
bump_phase = 0.3
[evolution]
dt = 0.005
t_end = 20.0
stride = 10
";
    let (cfg, _) = load_config_str(text, true).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let summary = run_experiment(&cfg, dir.path()).unwrap();
    let bound = 3.0 * (0.05 + 0.05);
    assert!(
        summary.sup_w_h1 <= bound,
        "||w|| = {:.4} exceeds 3(ε_V+ε₀) = {bound}",
        summary.sup_w_h1
    );
    // the initial-datum energy gap is quadratically small
    assert!(
        summary.delta_e0.abs() < 0.05 * 0.05,
        "ΔE(0) = {:.3e}",
        summary.delta_e0
    );
    // moving-frame resynthesis: ψ₀ round-trips through (σ, w) to 1e-10
    let grid = cfg.grid().unwrap();
    let (psi0, w0) = solitonlab::experiment::build_initial_data(
        &CACHE,
        &cfg.sigma0,
        cfg.perturbation.as_ref(),
        &grid,
    )
    .unwrap();
    let w0 = w0.unwrap();
    let eta = synthesize(&CACHE.at(1.0).unwrap(), &SolitonParams::base(1, 1.0), &grid).unwrap();
    let back = solitonlab::soliton::from_moving_frame(&eta.add(&w0).unwrap(), &cfg.sigma0).unwrap();
    let rt = back.sub(&psi0).unwrap().norms().h1;
    assert!(rt < 1e-10, "round trip {rt:.3e}");
}

#[test]
fn two_dimensional_smoke_run() {
    // subcritical power in d=2 (s < 1), tiny grid, short tracked evolution
    let spec = Nonlinearity::power(0.8, 1.0).unwrap();
    let cache = ProfileCache::new(spec.clone(), 2);
    let grid = SpatialGrid::new_cube(2, 16.0, 128).unwrap();
    let view = cache.at(1.0).unwrap();
    let sigma0 = SolitonParams::new(vec![0.0, 0.0], vec![0.2, -0.1], 0.0, 1.0);
    let psi0 = synthesize(&view, &sigma0, &grid).unwrap();
    let config = EvolutionConfig {
        dt: 0.005,
        t_end: 1.0,
        stride: 20,
        dealias: true,
        // the 2/3-rule mask sheds the marginally resolved tail each step
        n_drift_tol: 1e-6,
        ..Default::default()
    };
    let dec = Decomposer::new(&cache, (0.5, 2.0));
    let mut tracker = Tracker::new(dec, sigma0.clone());
    let pot = Potential::zero();
    let out = evolve_run(&psi0, &config, &pot, &spec, |i, t, psi| {
        tracker.observe(i, t, psi)
    })
    .unwrap();
    let states = tracker.into_states();
    let last = states.last().unwrap();
    assert!(
        (last.sigma.a[0] - 0.2).abs() < 1e-2,
        "a_x(1) = {}",
        last.sigma.a[0]
    );
    assert!(
        (last.sigma.a[1] + 0.1).abs() < 1e-2,
        "a_y(1) = {}",
        last.sigma.a[1]
    );
    assert!(last.w_h1 < 0.05, "2D fluctuation {:.3e}", last.w_h1);
    assert_eq!(states[0].sigma.dim(), 2);
    // frame completeness in 2D: 2d+2 = 6 fields
    let frame = solitonlab::soliton::tangent_frame(&view, &sigma0, &grid).unwrap();
    assert_eq!(frame.count(), 6);
    let (omega, _) = solitonlab::linops::omega_matrix(&frame).unwrap();
    assert_eq!(omega.nrows(), 6);
    // dealiased stepping sheds only the unresolved tail
    let n0 = out.records[0].n;
    let nf = out.records.last().unwrap().n;
    assert!(((nf - n0) / n0).abs() < 1e-7);
}

#[test]
fn hartree_pipeline_certifies() {
    let text = "
[grid]
n = 512
half_extent = 40.0
[nonlinearity]
type = hartree
kernel = gaussian
width = 1.0
strength = 1.0
[potential]
family = zero
[initial]
mu0 = 1.0
[evolution]
t_end = 0.0
[run]
coercivity = true
";
    let (cfg, _) = load_config_str(text, true).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let summary = run_experiment(&cfg, dir.path()).unwrap();
    assert_eq!(summary.l1_negative, 1);
    assert_eq!(summary.l2_negative, 0);
    assert!(summary.rho.unwrap() > 0.0);
}

#[test]
fn plane_wave_norm_check_guard() {
    // non-finite data must be rejected up front
    let grid = SpatialGrid::new_cube(1, 10.0, 16).unwrap();
    let res = ComplexField::new(grid, vec![Complex64::new(f64::NAN, 0.0); 16]);
    assert!(res.is_err());
}

#[test]
fn fuzz_corpus_seeds_parse() {
    // the checked-in fuzzer corpus must stay within the parser's contract:
    // every seed either loads or yields a structured config error
    let dir =
        std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus/fuzz_config");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        match load_config_str(&text, false) {
            Ok((cfg, _)) => {
                // echo must reparse
                load_config_str(&cfg.echo(), false).unwrap();
            }
            Err(Error::Config(_)) => {}
            Err(other) => panic!("{}: unexpected error class {other}", path.display()),
        }
        seen += 1;
    }
    assert!(seen >= 5, "corpus shrank to {seen} seeds");
}
