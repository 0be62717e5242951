//! Alternating maximization over (γ, p, filters), the baselines it is
//! compared against, and ex-post evaluation of allocations.

mod oracle;

pub use oracle::{brute_force_oracle, GridSpec, OracleResult};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::ChannelSet;
use crate::fracprog::{DinkelbachStats, SequentialOptions, SolverOptions};
use crate::model::{
    mmse_filters, objective_to_bits, objective_value, random_unit_modulus, secrecy_rate, total_power, Allocation, EveModel,
    Objective, SystemConfig,
};
use crate::power_opt::{build_power_data, optimize_power};
use crate::ris_opt::optimize_ris;
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerOptions {
    pub solver: SolverOptions,
    /// Stopping rule of the γ loop, relative to ‖γ‖.
    pub ris: SequentialOptions,
    /// Stopping rule of the power loop, in watts.
    pub power: SequentialOptions,
    /// Relative change of the objective that ends the alternation.
    pub outer_tol: f64,
    pub max_outer: usize,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            ris: SequentialOptions::relative(1e-4, 50).with_extrapolation(),
            power: SequentialOptions::absolute(1e-6, 50),
            outer_tol: 1e-4,
            max_outer: 30,
        }
    }
}

/// Reported figures of merit: SEE in bit/J and secrecy rate in bit/s,
/// both with the positive part applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// Against the approximate Eve SINR of the channels the optimizer saw.
    pub see_approx: f64,
    /// Against the actual Eve channel.
    pub see_true: f64,
    pub ssr_approx: f64,
    pub ssr_true: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RunDiagnostics {
    /// Objective trace of every γ loop, internal units.
    pub ris_traces: Vec<Vec<f64>>,
    /// Objective trace of every power loop, internal units.
    pub power_traces: Vec<Vec<f64>>,
    /// Objective before and after each filter update, internal units.
    pub filter_updates: Vec<(f64, f64)>,
    pub dinkelbach: DinkelbachStats,
    pub rejected_steps: usize,
    /// Largest relative objective loss among the rejected steps.
    pub worst_rejected_loss: f64,
    /// Secrecy-rate inner ascents that stopped on a cap.
    pub ascent_unconverged: usize,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub allocation: Allocation,
    pub objective: Objective,
    /// Objective in bit/J (or bit/s) at the start and after every outer
    /// iteration, without the positive part.
    pub trace: Vec<f64>,
    pub metrics: Metrics,
    pub converged: bool,
    pub outer_iterations: usize,
    pub ris_iterations: usize,
    pub power_iterations: usize,
    pub diagnostics: RunDiagnostics,
}

/// Secrecy rate and SEE of `alloc` against the actual Eve channel.
pub fn evaluate_true_csi(alloc: &Allocation, channels: &ChannelSet, cfg: &SystemConfig) -> Result<(f64, f64)> {
    let rate = secrecy_rate(&alloc.p, &alloc.gamma, &alloc.filters, channels, cfg, EveModel::True)?;
    Ok((rate, rate / total_power(&alloc.p, &alloc.gamma, channels, cfg)))
}

/// Metrics of `alloc`. The approximate figures use the CSI view selected
/// by `cfg.csi_mode`; the true ones use the actual Eve channel.
pub fn evaluate(alloc: &Allocation, channels: &ChannelSet, cfg: &SystemConfig) -> Result<Metrics> {
    let view = channels.for_csi(cfg.csi_mode);
    let ssr_approx = secrecy_rate(&alloc.p, &alloc.gamma, &alloc.filters, &view, cfg, EveModel::Approx)?;
    let power = total_power(&alloc.p, &alloc.gamma, channels, cfg);
    let (ssr_true, see_true) = evaluate_true_csi(alloc, channels, cfg)?;
    Ok(Metrics {
        see_approx: ssr_approx / power,
        see_true,
        ssr_approx,
        ssr_true,
    })
}

/// Alternating SEE maximization started from full power and random
/// unit-modulus phases drawn from `seed`.
pub fn maximize_see(channels: &ChannelSet, cfg: &SystemConfig, opts: &OptimizerOptions, seed: u64) -> Result<RunResult> {
    alternate(channels, cfg, opts, seed, Objective::Efficiency)
}

/// Same pipeline as [`maximize_see`] with the secrecy rate as objective.
pub fn maximize_ssr(channels: &ChannelSet, cfg: &SystemConfig, opts: &OptimizerOptions, seed: u64) -> Result<RunResult> {
    alternate(channels, cfg, opts, seed, Objective::SecrecyRate)
}

fn alternate(channels: &ChannelSet, cfg: &SystemConfig, opts: &OptimizerOptions, seed: u64, objective: Objective) -> Result<RunResult> {
    cfg.validate()?;
    let view = channels.for_csi(cfg.csi_mode);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = DVector::from_column_slice(&cfg.p_max);
    let gamma = random_unit_modulus(&mut rng, cfg.ris_elements);
    let filters = mmse_filters(&p, &gamma, &view, cfg)?;
    let mut alloc = Allocation { p, gamma, filters };
    let mut value = objective_value(&alloc, &view, cfg, objective)?;
    let mut trace = vec![value];
    let mut diagnostics = RunDiagnostics::default();
    let (mut ris_iterations, mut power_iterations, mut outer_iterations) = (0, 0, 0);
    let mut converged = false;

    for _ in 0..opts.max_outer {
        outer_iterations += 1;
        let start = value;

        let ris = optimize_ris(&alloc.p, &alloc.filters, &alloc.gamma, &view, cfg, objective, &opts.ris, &opts.solver)?;
        ris_iterations += ris.iterations;
        diagnostics.dinkelbach.merge(&ris.dinkelbach);
        diagnostics.rejected_steps += ris.rejected_steps;
        diagnostics.worst_rejected_loss = diagnostics.worst_rejected_loss.max(ris.worst_rejected_loss);
        diagnostics.ascent_unconverged += ris.ascent_unconverged;
        diagnostics.ris_traces.push(ris.trace);
        alloc.gamma = ris.gamma;

        let data = build_power_data(&alloc.gamma, &alloc.filters, &view, cfg)?;
        let power = optimize_power(&alloc.p, &data, objective, &opts.power, &opts.solver)?;
        power_iterations += power.iterations;
        diagnostics.dinkelbach.merge(&power.dinkelbach);
        diagnostics.rejected_steps += power.rejected_steps;
        diagnostics.worst_rejected_loss = diagnostics.worst_rejected_loss.max(power.worst_rejected_loss);
        diagnostics.ascent_unconverged += power.ascent_unconverged;
        diagnostics.power_traces.push(power.trace);
        alloc.p = power.p;

        let before = objective_value(&alloc, &view, cfg, objective)?;
        alloc.filters = mmse_filters(&alloc.p, &alloc.gamma, &view, cfg)?;
        value = objective_value(&alloc, &view, cfg, objective)?;
        diagnostics.filter_updates.push((before, value));
        trace.push(value);

        if (value - start).abs() < opts.outer_tol * start.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }

    Ok(RunResult {
        metrics: evaluate(&alloc, channels, cfg)?,
        allocation: alloc,
        objective,
        trace: trace.into_iter().map(|v| objective_to_bits(v, cfg)).collect(),
        converged,
        outer_iterations,
        ris_iterations,
        power_iterations,
        diagnostics,
    })
}

/// Unit-modulus random phases, powers uniform in the box and MMSE
/// filters, with no optimization. Iteration counts are zero.
pub fn random_allocation(channels: &ChannelSet, cfg: &SystemConfig, seed: u64) -> Result<RunResult> {
    cfg.validate()?;
    let view = channels.for_csi(cfg.csi_mode);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gamma = random_unit_modulus(&mut rng, cfg.ris_elements);
    let p = DVector::from_fn(cfg.users, |k, _| cfg.p_max[k] * rng.random::<f64>());
    let filters = mmse_filters(&p, &gamma, &view, cfg)?;
    let allocation = Allocation { p, gamma, filters };
    let value = objective_value(&allocation, &view, cfg, Objective::Efficiency)?;
    Ok(RunResult {
        metrics: evaluate(&allocation, channels, cfg)?,
        allocation,
        objective: Objective::Efficiency,
        trace: vec![objective_to_bits(value, cfg)],
        converged: true,
        outer_iterations: 0,
        ris_iterations: 0,
        power_iterations: 0,
        diagnostics: RunDiagnostics::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::draw_drop;
    use crate::model::CsiMode;

    fn drop(seed: u64, cfg: &SystemConfig) -> ChannelSet {
        draw_drop(seed, 0, cfg).unwrap().1
    }

    #[test]
    fn trace_is_monotone_and_allocation_feasible() {
        let cfg = SystemConfig::desk();
        for seed in 0..3 {
            let ch = drop(seed, &cfg);
            let run = maximize_see(&ch, &cfg, &OptimizerOptions::default(), seed).unwrap();
            for w in run.trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-8 * w[0].abs(), "{:?}", run.trace);
            }
            for (before, after) in &run.diagnostics.filter_updates {
                assert!(after >= &(before - 1e-10 * before.abs()));
            }
            assert!(run.allocation.violations(&ch, &cfg, 1e-10).is_empty());
            assert!(run.outer_iterations >= 1 && run.ris_iterations >= 1 && run.power_iterations >= 1);
        }
    }

    #[test]
    fn huge_tolerance_stops_after_one_round() {
        let cfg = SystemConfig::desk();
        let ch = drop(5, &cfg);
        let opts = OptimizerOptions { outer_tol: 1e9, ..Default::default() };
        let run = maximize_see(&ch, &cfg, &opts, 5).unwrap();
        assert_eq!(run.outer_iterations, 1);
        assert!(run.converged);
    }

    #[test]
    fn perfect_csi_metrics_agree() {
        let mut cfg = SystemConfig::desk();
        cfg.csi_mode = CsiMode::Perfect;
        let ch = drop(6, &cfg);
        let run = random_allocation(&ch, &cfg, 6).unwrap();
        let m = run.metrics;
        assert!((m.see_true - m.see_approx).abs() <= 1e-10 * m.see_true.max(1e-300));
        assert!((m.ssr_true - m.ssr_approx).abs() <= 1e-10 * m.ssr_true.max(1e-300));
    }

    #[test]
    fn random_allocation_is_feasible_and_deterministic() {
        let cfg = SystemConfig::desk();
        let ch = drop(7, &cfg);
        for seed in 0..2000 {
            let run = random_allocation(&ch, &cfg, seed).unwrap();
            assert!(run.allocation.violations(&ch, &cfg, 1e-10).is_empty());
        }
        let a = random_allocation(&ch, &cfg, 42).unwrap();
        let b = random_allocation(&ch, &cfg, 42).unwrap();
        assert_eq!(a.allocation, b.allocation);
        assert_eq!(a.metrics, b.metrics);
    }

    #[test]
    fn true_csi_evaluation_matches_scalar_formula() {
        let cfg = SystemConfig::with_dimensions(1, 1, 1);
        let ch = drop(8, &cfg);
        let run = random_allocation(&ch, &cfg, 8).unwrap();
        let a = &run.allocation;
        let (p, g, c) = (a.p[0], a.gamma[0], a.filters[(0, 0)]);
        let (h, gb, ge) = (ch.h[0][0], ch.g_bob[(0, 0)], ch.g_eve_true[0]);
        let bob = p * (c.conj() * gb * h * g).norm_sqr()
            / (c.norm_sqr() * (cfg.sigma_bob_sq + cfg.sigma_ris_sq * (gb * g).norm_sqr()));
        let eve = p * (ge.conj() * h * g).norm_sqr() / (cfg.sigma_eve_sq + cfg.sigma_ris_sq * (ge * g).norm_sqr());
        let rate = cfg.bandwidth * ((1.0 + bob).log2() - (1.0 + eve).log2()).max(0.0);
        let power = p * cfg.mu[0] + (p * h.norm_sqr() + cfg.sigma_ris_sq) * (g.norm_sqr() - 1.0) + cfg.circuit_power();
        let (ssr, see) = evaluate_true_csi(a, &ch, &cfg).unwrap();
        assert!((ssr - rate).abs() <= 1e-10 * rate.max(1e-300));
        assert!((see - rate / power).abs() <= 1e-10 * (rate / power).max(1e-300));
    }

    #[test]
    fn negative_secrecy_is_clamped() {
        let cfg = SystemConfig::desk();
        let ch = drop(9, &cfg);
        let mut run = random_allocation(&ch, &cfg, 9).unwrap();
        // Bob almost deaf, Eve unchanged
        let mut eavesdropped = ch.clone();
        eavesdropped.g_bob *= nalgebra::Complex::new(1e-6, 0.0);
        run.allocation.p.fill(cfg.p_max[0]);
        let (ssr, see) = evaluate_true_csi(&run.allocation, &eavesdropped, &cfg).unwrap();
        assert_eq!((ssr, see), (0.0, 0.0));
    }

    #[test]
    fn ssr_objective_trace_is_monotone() {
        let cfg = SystemConfig::desk();
        let ch = drop(10, &cfg);
        let run = maximize_ssr(&ch, &cfg, &OptimizerOptions::default(), 10).unwrap();
        for w in run.trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-8 * w[0].abs());
        }
        assert!(run.allocation.violations(&ch, &cfg, 1e-10).is_empty());
    }
}
