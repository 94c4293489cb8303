//! The effective point-particle system: `ȧ = v`, `v̇/2 = -∇V(a)`, `μ̇ = 0`,
//! `γ̇ = μ + v²/4 - V(a)` (a particle of mass ½ in the external potential),
//! and the comparison of its flow with the tracked PDE parameters.

use crate::error::{Error, Result};
use crate::model::Potential;
use crate::modulation::ModulationState;
use crate::soliton::SolitonParams;

#[derive(Debug, Clone)]
pub struct EffectiveTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<SolitonParams>,
    pub dt: f64,
    /// max drift of the point-particle energy v²/4 + V(a) over the run
    pub energy_drift: f64,
}

impl EffectiveTrajectory {
    pub fn write_csv(&self, mut out: impl std::io::Write) -> std::io::Result<()> {
        let d = self.states.first().map_or(1, |s| s.dim());
        write!(out, "t")?;
        for j in 0..d {
            write!(out, ",a{j}")?;
        }
        for j in 0..d {
            write!(out, ",v{j}")?;
        }
        writeln!(out, ",gamma,mu")?;
        for (t, s) in self.times.iter().zip(&self.states) {
            write!(out, "{t:.17e}")?;
            for a in &s.a {
                write!(out, ",{a:.17e}")?;
            }
            for v in &s.v {
                write!(out, ",{v:.17e}")?;
            }
            writeln!(out, ",{:.17e},{:.17e}", s.gamma, s.mu)?;
        }
        Ok(())
    }
}

fn rhs(potential: &Potential, s: &SolitonParams) -> (Vec<f64>, Vec<f64>, f64) {
    let grad = potential.grad_v(&s.a);
    let a_dot = s.v.clone();
    let v_dot: Vec<f64> = grad.iter().map(|g| -2.0 * g).collect();
    let v2: f64 = s.v.iter().map(|v| v * v).sum();
    let gamma_dot = s.mu + 0.25 * v2 - potential.v(&s.a);
    (a_dot, v_dot, gamma_dot)
}

fn rk4_step(potential: &Potential, s: &SolitonParams, dt: f64) -> SolitonParams {
    let d = s.dim();
    let add = |s: &SolitonParams, k: &(Vec<f64>, Vec<f64>, f64), h: f64| -> SolitonParams {
        SolitonParams {
            a: (0..d).map(|j| s.a[j] + h * k.0[j]).collect(),
            v: (0..d).map(|j| s.v[j] + h * k.1[j]).collect(),
            gamma: s.gamma + h * k.2,
            mu: s.mu,
        }
    };
    let k1 = rhs(potential, s);
    let k2 = rhs(potential, &add(s, &k1, 0.5 * dt));
    let k3 = rhs(potential, &add(s, &k2, 0.5 * dt));
    let k4 = rhs(potential, &add(s, &k3, dt));
    SolitonParams {
        a: (0..d)
            .map(|j| s.a[j] + dt / 6.0 * (k1.0[j] + 2.0 * k2.0[j] + 2.0 * k3.0[j] + k4.0[j]))
            .collect(),
        v: (0..d)
            .map(|j| s.v[j] + dt / 6.0 * (k1.1[j] + 2.0 * k2.1[j] + 2.0 * k3.1[j] + k4.1[j]))
            .collect(),
        gamma: s.gamma + dt / 6.0 * (k1.2 + 2.0 * k2.2 + 2.0 * k3.2 + k4.2),
        mu: s.mu,
    }
}

/// Integrates the effective equations with classic fourth-order steps,
/// sampling at multiples of `out_dt` (each sample interval is subdivided so
/// steps stay at or below `dt`). μ is constant along the flow by
/// construction; the point-particle energy drift is recorded.
pub fn newton_flow(
    sigma0: &SolitonParams,
    potential: &Potential,
    t_end: f64,
    dt: f64,
    out_dt: f64,
) -> Result<EffectiveTrajectory> {
    if !(dt > 0.0) || !(out_dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::InvalidInput(
            "newton_flow needs positive steps".into(),
        ));
    }
    if potential.eps_v > 0.0 && dt > 0.01 / potential.eps_v {
        return Err(Error::InvalidInput(format!(
            "dt = {dt} too coarse for ε_V = {}",
            potential.eps_v
        )));
    }
    let n_out = (t_end / out_dt).round() as usize;
    let sub = (out_dt / dt).ceil().max(1.0) as usize;
    let h = out_dt / sub as f64;
    let energy = |s: &SolitonParams| -> f64 {
        0.25 * s.v.iter().map(|v| v * v).sum::<f64>() + potential.v(&s.a)
    };
    let e0 = energy(sigma0);
    let mut s = sigma0.clone();
    let mut times = vec![0.0];
    let mut states = vec![s.clone()];
    let mut drift = 0.0f64;
    for k in 1..=n_out {
        for _ in 0..sub {
            s = rk4_step(potential, &s, h);
        }
        drift = drift.max((energy(&s) - e0).abs());
        times.push(k as f64 * out_dt);
        states.push(s.clone());
    }
    Ok(EffectiveTrajectory {
        times,
        states,
        dt: h,
        energy_drift: drift,
    })
}

/// Deviations between a tracked modulation stream and the effective flow on
/// their common time window (the effective flow is integrated on the tracked
/// sample times, so no interpolation enters).
#[derive(Debug, Clone)]
pub struct DeviationReport {
    pub window: (f64, f64),
    pub sup_a: f64,
    pub sup_v: f64,
    pub sup_gamma: f64,
    pub sup_gamma_mod_2pi: f64,
    pub sup_mu_drift: f64,
    /// per-sample position deviation, for order studies at interior times
    pub times: Vec<f64>,
    pub a_dev: Vec<f64>,
}

impl DeviationReport {
    /// sup of |a - a_N| over samples with t ≤ t_star.
    pub fn sup_a_until(&self, t_star: f64) -> f64 {
        self.times
            .iter()
            .zip(&self.a_dev)
            .filter(|(t, _)| **t <= t_star + 1e-9)
            .map(|(_, d)| *d)
            .fold(0.0, f64::max)
    }

    pub fn render(&self) -> String {
        format!(
            "deviation report on t ∈ [{:.3}, {:.3}]\n  sup|a - a_N|      = {:.6e}\n  sup|v - v_N|      = {:.6e}\n  sup|γ - γ_N|      = {:.6e} (raw), {:.6e} (mod 2π)\n  sup|μ - μ₀|       = {:.6e}\n",
            self.window.0, self.window.1, self.sup_a, self.sup_v, self.sup_gamma, self.sup_gamma_mod_2pi, self.sup_mu_drift
        )
    }
}

pub fn compare_trajectories(
    tracked: &[ModulationState],
    effective: &EffectiveTrajectory,
) -> Result<DeviationReport> {
    if tracked.is_empty() || effective.states.is_empty() {
        return Err(Error::InvalidInput("empty trajectories".into()));
    }
    let n = tracked.len().min(effective.states.len());
    let t0 = tracked[0].t;
    let t1 = tracked[n - 1].t;
    for k in 0..n {
        if (tracked[k].t - effective.times[k]).abs() > 1e-9 * (1.0 + tracked[k].t.abs()) {
            return Err(Error::InvalidInput(format!(
                "sampling window mismatch at index {k}: {} vs {}",
                tracked[k].t, effective.times[k]
            )));
        }
    }
    let d = tracked[0].sigma.dim();
    let mu0 = effective.states[0].mu;
    let mut sup_a = 0.0f64;
    let mut sup_v = 0.0f64;
    let mut sup_g = 0.0f64;
    let mut sup_g_mod = 0.0f64;
    let mut sup_mu = 0.0f64;
    let mut times = Vec::with_capacity(n);
    let mut a_dev = Vec::with_capacity(n);
    let two_pi = 2.0 * std::f64::consts::PI;
    for k in 0..n {
        let (ts, es) = (&tracked[k].sigma, &effective.states[k]);
        let da = (0..d)
            .map(|j| (ts.a[j] - es.a[j]).abs())
            .fold(0.0, f64::max);
        let dv = (0..d)
            .map(|j| (ts.v[j] - es.v[j]).abs())
            .fold(0.0, f64::max);
        let dg = (ts.gamma - es.gamma).abs();
        let dg_wrapped = {
            let r = (ts.gamma - es.gamma).rem_euclid(two_pi);
            r.min(two_pi - r)
        };
        sup_a = sup_a.max(da);
        sup_v = sup_v.max(dv);
        sup_g = sup_g.max(dg);
        sup_g_mod = sup_g_mod.max(dg_wrapped);
        sup_mu = sup_mu.max((ts.mu - mu0).abs());
        times.push(tracked[k].t);
        a_dev.push(da);
    }
    Ok(DeviationReport {
        window: (t0, t1),
        sup_a,
        sup_v,
        sup_gamma: sup_g,
        sup_gamma_mod_2pi: sup_g_mod,
        sup_mu_drift: sup_mu,
        times,
        a_dev,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PotentialFamily;
    use std::f64::consts::PI;

    #[test]
    fn free_flight_closed_form() {
        let s0 = SolitonParams::new(vec![1.0], vec![0.5], 0.2, 1.3);
        let flow = newton_flow(&s0, &Potential::zero(), 10.0, 0.01, 0.1).unwrap();
        let last = flow.states.last().unwrap();
        assert!((last.a[0] - (1.0 + 0.5 * 10.0)).abs() < 1e-12);
        assert!((last.v[0] - 0.5).abs() < 1e-14);
        // γ = γ₀ + (μ + v²/4)t
        let expect = 0.2 + (1.3 + 0.0625) * 10.0;
        assert!((last.gamma - expect).abs() < 1e-10);
        assert_eq!(last.mu, 1.3);
        assert!(flow.energy_drift < 1e-14);
    }

    #[test]
    fn small_oscillations_about_the_well() {
        // V = -A cos(κx): linearization about the minimum at 0 gives
        // ä = -2Aκ²a, period 2π/(κ√(2A))
        let (amp, kappa) = (1.0, 0.05);
        let pot = Potential::new(
            PotentialFamily::Cosine {
                amplitude: -amp,
                kappa: vec![kappa],
            },
            1.0,
        )
        .unwrap();
        let a0 = 0.01 / kappa; // small amplitude in the scaled variable
        let s0 = SolitonParams::new(vec![a0], vec![0.0], 0.0, 1.0);
        let period = 2.0 * PI / (kappa * (2.0 * amp).sqrt());
        let flow = newton_flow(&s0, &pot, period, 0.05, period / 1024.0).unwrap();
        // after one linear period the particle is back within the anharmonic
        // correction O((κa₀)²·a₀)
        let last = flow.states.last().unwrap();
        assert!(
            (last.a[0] - a0).abs() < 1e-3 * a0,
            "period mismatch: a({period:.2}) = {} vs {a0}",
            last.a[0]
        );
        assert!(flow.energy_drift < 1e-10);
    }

    #[test]
    fn time_reversal() {
        let pot = Potential::new(
            PotentialFamily::Cosine {
                amplitude: -1.0,
                kappa: vec![0.1],
            },
            1.0,
        )
        .unwrap();
        let s0 = SolitonParams::new(vec![3.0], vec![0.2], 0.0, 1.0);
        let fwd = newton_flow(&s0, &pot, 20.0, 0.01, 0.1).unwrap();
        let end = fwd.states.last().unwrap().clone();
        let back = SolitonParams {
            v: end.v.iter().map(|v| -v).collect(),
            ..end
        };
        let ret = newton_flow(&back, &pot, 20.0, 0.01, 0.1).unwrap();
        let fin = ret.states.last().unwrap();
        assert!((fin.a[0] - 3.0).abs() < 1e-9, "reversal: {}", fin.a[0]);
        assert!((fin.v[0] + 0.2).abs() < 1e-9);
    }

    #[test]
    fn adiabatic_rescaling_invariance() {
        // with V(x) = U(εx), a(t) = A(εt)/ε where A solves the ε=1 problem
        let eps = 0.05;
        let pot_eps = Potential::new(
            PotentialFamily::Cosine {
                amplitude: -1.0,
                kappa: vec![eps],
            },
            1.0,
        )
        .unwrap();
        let pot_one = Potential::new(
            PotentialFamily::Cosine {
                amplitude: -1.0,
                kappa: vec![1.0],
            },
            1.0,
        )
        .unwrap();
        let y0 = 0.8;
        let s_eps = SolitonParams::new(vec![y0 / eps], vec![0.0], 0.0, 1.0);
        let s_one = SolitonParams::new(vec![y0], vec![0.0], 0.0, 1.0);
        let t_end = 10.0 / eps;
        let flow_eps = newton_flow(&s_eps, &pot_eps, t_end, 0.1, t_end / 100.0).unwrap();
        let flow_one = newton_flow(&s_one, &pot_one, 10.0, 0.1 * eps, 0.1).unwrap();
        let mut sup = 0.0f64;
        for k in 0..flow_eps.states.len() {
            let a_scaled = flow_one.states[k].a[0] / eps;
            sup = sup.max((flow_eps.states[k].a[0] - a_scaled).abs() * eps);
        }
        assert!(sup < 1e-8, "rescaling deviation {sup:.3e}");
    }

    #[test]
    fn window_mismatch_rejected() {
        let s0 = SolitonParams::new(vec![0.0], vec![0.1], 0.0, 1.0);
        let flow = newton_flow(&s0, &Potential::zero(), 1.0, 0.01, 0.1).unwrap();
        let fake_state = crate::modulation::ModulationState {
            t: 0.05, // misaligned
            sigma: s0.clone(),
            w: crate::field::ComplexField::zeros(
                crate::grid::SpatialGrid::new_cube(1, 10.0, 16).unwrap(),
            ),
            w_l2: 0.0,
            w_h1: 0.0,
            newton_iters: 0,
            constraint_resid: 0.0,
        };
        assert!(compare_trajectories(&[fake_state], &flow).is_err());
    }
}
