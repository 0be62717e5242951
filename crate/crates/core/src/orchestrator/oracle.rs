//! Exhaustive grid search over (γ, p) for tiny instances.

use std::f64::consts::{LN_2, PI};

use nalgebra::{Cholesky, DVector};

use crate::channel::ChannelSet;
use crate::model::{
    cascade, mmse_filters, noise_cov_bob, ris_load, secrecy_rate, total_power, Allocation, EveCovariance, EveModel, RisMode,
    SystemConfig,
};
use crate::{Error, Result, C64};

const MAX_CANDIDATES: u128 = 100_000_000;

/// Grid resolution. Phases are `2πj/phases`; amplitudes are geometric from
/// `amp_min` up to the largest amplitude the RIS power budget allows at
/// full transmit power; powers are uniform on `[0, P_max]` (a single power
/// point means `P_max`, a single amplitude point means `amp_min`).
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub phases: usize,
    pub amplitudes: usize,
    pub powers: usize,
    pub amp_min: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            phases: 32,
            amplitudes: 8,
            powers: 64,
            amp_min: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    /// Best approximate-Eve SEE in bit/J, positive part applied.
    pub best_see: f64,
    pub best_alloc: Option<Allocation>,
    pub evaluated: u64,
    /// Candidates dropped for violating the RIS power constraint.
    pub skipped: u64,
}

fn amplitude_grid(grid: &GridSpec, channels: &ChannelSet, cfg: &SystemConfig) -> Vec<f64> {
    if grid.amplitudes == 1 {
        return vec![grid.amp_min];
    }
    let load = ris_load(&DVector::from_column_slice(&cfg.p_max), channels, cfg);
    let budget = match cfg.ris_mode {
        RisMode::Active => cfg.ris_rf_max + load.sum(),
        RisMode::NearlyPassive => load.sum(),
    };
    let amp_max = load.iter().map(|r| (budget / r).sqrt()).fold(grid.amp_min, f64::max);
    let ratio = (amp_max / grid.amp_min).powf(1.0 / (grid.amplitudes - 1) as f64);
    (0..grid.amplitudes).map(|i| grid.amp_min * ratio.powi(i as i32)).collect()
}

fn power_grid(grid: &GridSpec, p_max: f64) -> Vec<f64> {
    if grid.powers == 1 {
        return vec![p_max];
    }
    (0..grid.powers).map(|i| p_max * i as f64 / (grid.powers - 1) as f64).collect()
}

fn rf_feasible(rf: f64, scale: f64, cfg: &SystemConfig) -> bool {
    let slack = 1e-12 * scale;
    match cfg.ris_mode {
        RisMode::Active => rf >= -slack && rf <= cfg.ris_rf_max + slack,
        RisMode::NearlyPassive => rf <= slack,
    }
}

/// Best SEE over the grid, using the CSI view selected by `cfg.csi_mode`.
///
/// Enumeration order is fixed (element 0's coefficient varies fastest,
/// powers innermost), so the result is reproducible bit for bit.
pub fn brute_force_oracle(channels: &ChannelSet, cfg: &SystemConfig, grid: &GridSpec) -> Result<OracleResult> {
    cfg.validate()?;
    if cfg.users > 2 || cfg.ris_elements > 3 {
        return Err(Error::Domain("the grid oracle handles at most 2 users and 3 RIS elements".into()));
    }
    if grid.phases == 0 || grid.amplitudes == 0 || grid.powers == 0 || !(grid.amp_min > 0.0) {
        return Err(Error::Config("grid sizes must be positive".into()));
    }
    let per_element = (grid.phases * grid.amplitudes) as u128;
    let candidates = per_element.pow(cfg.ris_elements as u32) * (grid.powers as u128).pow(cfg.users as u32);
    if candidates > MAX_CANDIDATES {
        return Err(Error::GridTooLarge(candidates));
    }
    let view = channels.for_csi(cfg.csi_mode);
    let amps = amplitude_grid(grid, &view, cfg);
    let coefficients: Vec<C64> = amps
        .iter()
        .flat_map(|&a| (0..grid.phases).map(move |j| C64::from_polar(a, 2.0 * PI * j as f64 / grid.phases as f64)))
        .collect();
    let powers: Vec<Vec<f64>> = cfg.p_max.iter().map(|&m| power_grid(grid, m)).collect();

    let mut out = OracleResult {
        best_see: 0.0,
        best_alloc: None,
        evaluated: 0,
        skipped: 0,
    };
    let mut best: Option<(DVector<C64>, DVector<f64>)> = None;
    let n = cfg.ris_elements;
    let mut index = vec![0usize; n];
    loop {
        let gamma = DVector::from_fn(n, |i, _| coefficients[index[i]]);
        if cfg.users == 1 {
            single_user(&gamma, &powers[0], &view, cfg, &mut out, &mut best)?;
        } else {
            two_users(&gamma, &powers, &view, cfg, &mut out, &mut best)?;
        }
        // odometer over the per-element coefficient lists
        let mut pos = 0;
        while pos < n {
            index[pos] += 1;
            if index[pos] < coefficients.len() {
                break;
            }
            index[pos] = 0;
            pos += 1;
        }
        if pos == n {
            break;
        }
    }
    if let Some((gamma, p)) = best {
        let filters = mmse_filters(&p, &gamma, &view, cfg)?;
        out.best_alloc = Some(Allocation { p, gamma, filters });
    }
    Ok(out)
}

fn consider(see: f64, gamma: &DVector<C64>, p: DVector<f64>, out: &mut OracleResult, best: &mut Option<(DVector<C64>, DVector<f64>)>) {
    if see > out.best_see || best.is_none() {
        out.best_see = see.max(out.best_see);
        *best = Some((gamma.clone(), p));
    }
}

/// With one user the MMSE SINR is `p vᴴ W⁻¹ v`, so every power on the grid
/// costs O(1) once γ is fixed.
fn single_user(
    gamma: &DVector<C64>,
    powers: &[f64],
    channels: &ChannelSet,
    cfg: &SystemConfig,
    out: &mut OracleResult,
    best: &mut Option<(DVector<C64>, DVector<f64>)>,
) -> Result<()> {
    let v = cascade(0, gamma, channels);
    let w = noise_cov_bob(gamma, &channels.g_bob, cfg);
    let chol = Cholesky::new(w).ok_or_else(|| Error::Numeric("Bob noise covariance is singular".into()))?;
    let gain_bob = v.dotc(&chol.solve(&v)).re;
    let eve = EveCovariance::from_channels(channels);
    let reflected = channels.h[0].component_mul(gamma);
    let gain_eve = eve.quad(&reflected) / (cfg.sigma_ris_sq * eve.ris_noise_gain(gamma) + cfg.sigma_eve_sq);
    let rf_slope = reflected.norm_squared() - channels.h[0].norm_squared();
    let rf_offset = cfg.sigma_ris_sq * (gamma.norm_squared() - gamma.len() as f64);
    let scale = cfg.ris_rf_max + cfg.p_max[0] * channels.h[0].norm_squared() + cfg.sigma_ris_sq * gamma.len() as f64;
    for &p in powers {
        let rf = p * rf_slope + rf_offset;
        if !rf_feasible(rf, scale, cfg) {
            out.skipped += 1;
            continue;
        }
        out.evaluated += 1;
        let nats = (p * gain_bob).ln_1p() - (p * gain_eve).ln_1p();
        let rate = cfg.bandwidth * nats.max(0.0) / LN_2;
        let rf_cost = match cfg.ris_mode {
            RisMode::Active => rf,
            RisMode::NearlyPassive => 0.0,
        };
        let see = rate / (cfg.mu[0] * p + rf_cost + cfg.circuit_power());
        consider(see, gamma, DVector::from_element(1, p), out, best);
    }
    Ok(())
}

fn two_users(
    gamma: &DVector<C64>,
    powers: &[Vec<f64>],
    channels: &ChannelSet,
    cfg: &SystemConfig,
    out: &mut OracleResult,
    best: &mut Option<(DVector<C64>, DVector<f64>)>,
) -> Result<()> {
    let scale = cfg.ris_rf_max
        + channels.h.iter().zip(&cfg.p_max).map(|(h, m)| m * h.norm_squared()).sum::<f64>()
        + cfg.sigma_ris_sq * gamma.len() as f64;
    for &p0 in &powers[0] {
        for &p1 in &powers[1] {
            let p = DVector::from_vec(vec![p0, p1]);
            let rf = crate::model::ris_rf_power(&p, gamma, channels, cfg);
            if !rf_feasible(rf, scale, cfg) {
                out.skipped += 1;
                continue;
            }
            out.evaluated += 1;
            let filters = mmse_filters(&p, gamma, channels, cfg)?;
            let rate = secrecy_rate(&p, gamma, &filters, channels, cfg, EveModel::Approx)?;
            let see = rate / total_power(&p, gamma, channels, cfg);
            consider(see, gamma, p, out, best);
        }
    }
    Ok(())
}
