//! Sequential optimization of the transmit powers for fixed γ and filters.
//!
//! The secrecy rate is a difference of two concave functions of p,
//! `g1 − g2`. Linearizing `g2` at the current point gives a concave
//! minorant, and the resulting ratio is maximized with Dinkelbach over the
//! power box intersected with the RIS power slab.

use nalgebra::{DMatrix, DVector};

use crate::channel::ChannelSet;
use crate::fracprog::{
    dinkelbach_maximize, pg_ascent, DinkelbachStats, FeasibleSet, RatioProblem, SequentialOptions, SolverOptions,
};
use crate::model::{EveCovariance, Objective, RisMode, SystemConfig};
use crate::{Error, Result, C64};

/// Power-domain coefficients for a fixed (γ, filters) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerProblemData {
    /// `bob_gain[(k, m)] = |c_kᴴ A_m γ|²`
    pub bob_gain: DMatrix<f64>,
    /// `c_kᴴ W_B c_k`
    pub bob_noise: DVector<f64>,
    /// `‖R_E^{1/2} H_m γ‖²`
    pub eve_gain: DVector<f64>,
    /// `σ²_RIS Σ_n (|ĝ_n|² + σ_g²)|γ_n|² + σ²_E`
    pub eve_noise: f64,
    /// Effective per-user power cost in the denominator.
    pub mu_eq: DVector<f64>,
    /// Effective static power in the denominator.
    pub static_eq: f64,
    /// RIS amplifier power as an affine function `rf_slopeᵀ p + rf_offset`.
    pub rf_slope: DVector<f64>,
    pub rf_offset: f64,
    pub ris_mode: RisMode,
    pub rf_max: f64,
    pub p_max: DVector<f64>,
}

/// Fails with a configuration error when the efficiency denominator is not
/// positive on the whole power box.
pub fn build_power_data(
    gamma: &DVector<C64>,
    filters: &DMatrix<C64>,
    channels: &ChannelSet,
    cfg: &SystemConfig,
) -> Result<PowerProblemData> {
    let users = channels.users();
    let eve = EveCovariance::from_channels(channels);
    let reflected: Vec<DVector<C64>> = channels.h.iter().map(|h| h.component_mul(gamma)).collect();
    let cascades: Vec<DVector<C64>> = reflected.iter().map(|r| &channels.g_bob * r).collect();

    let bob_gain = DMatrix::from_fn(users, users, |k, m| filters.column(k).dotc(&cascades[m]).norm_sqr());
    let bob_noise = DVector::from_fn(users, |k, _| {
        crate::model::noise_quad_bob(&filters.column(k).into_owned(), gamma, &channels.g_bob, cfg)
    });
    let eve_gain = DVector::from_fn(users, |m, _| eve.quad(&reflected[m]));
    let eve_noise = cfg.sigma_ris_sq * eve.ris_noise_gain(gamma) + cfg.sigma_eve_sq;

    let rf_slope = DVector::from_fn(users, |k, _| reflected[k].norm_squared() - channels.h[k].norm_squared());
    let rf_offset = cfg.sigma_ris_sq * (gamma.norm_squared() - gamma.len() as f64);
    let mu = DVector::from_column_slice(&cfg.mu);
    let (mu_eq, static_eq) = match cfg.ris_mode {
        RisMode::Active => (&mu + &rf_slope, cfg.circuit_power() + rf_offset),
        RisMode::NearlyPassive => (mu, cfg.circuit_power()),
    };
    let p_max = DVector::from_column_slice(&cfg.p_max);

    if bob_noise.iter().any(|d| !(*d > 0.0)) || !(eve_noise > 0.0) {
        return Err(Error::Numeric("noise terms of the power problem must be positive".into()));
    }
    let worst = static_eq + mu_eq.iter().zip(p_max.iter()).map(|(m, p)| m.min(0.0) * p).sum::<f64>();
    if !(worst > 0.0) {
        return Err(Error::Config(format!("total power can reach {worst} W inside the power box")));
    }
    Ok(PowerProblemData {
        bob_gain,
        bob_noise,
        eve_gain,
        eve_noise,
        mu_eq,
        static_eq,
        rf_slope,
        rf_offset,
        ris_mode: cfg.ris_mode,
        rf_max: cfg.ris_rf_max,
        p_max,
    })
}

impl PowerProblemData {
    pub fn users(&self) -> usize {
        self.p_max.len()
    }

    /// Total consumed power at `p`.
    pub fn total_power(&self, p: &DVector<f64>) -> f64 {
        self.mu_eq.dot(p) + self.static_eq
    }

    /// RIS amplifier output minus input at `p`.
    pub fn rf_power(&self, p: &DVector<f64>) -> f64 {
        self.rf_slope.dot(p) + self.rf_offset
    }

    fn denominator(&self, p: &DVector<f64>, objective: Objective) -> f64 {
        match objective {
            Objective::Efficiency => self.total_power(p),
            Objective::SecrecyRate => 1.0,
        }
    }

    /// Power box intersected with the RIS power constraint, widened just
    /// enough to contain `anchor`.
    pub fn feasible_set(&self, anchor: &DVector<f64>) -> FeasibleSet {
        let (lower, upper) = match self.ris_mode {
            RisMode::Active => (-self.rf_offset, self.rf_max - self.rf_offset),
            RisMode::NearlyPassive => (f64::NEG_INFINITY, -self.rf_offset),
        };
        let at = self.rf_slope.dot(anchor);
        FeasibleSet::BoxSlab {
            lo: DVector::zeros(self.users()),
            hi: self.p_max.clone(),
            normal: self.rf_slope.clone(),
            lower: lower.min(at),
            upper: upper.max(at),
        }
    }
}

/// Σ_k ln(d_Bk + Σ_m p_m a_Bkm) + ln(d_E + Σ_{m≠k} p_m a_Em)
pub fn g1(p: &DVector<f64>, data: &PowerProblemData) -> f64 {
    let eve_all = data.eve_gain.dot(p);
    (0..data.users())
        .map(|k| {
            let bob = data.bob_noise[k] + data.bob_gain.row(k).transpose().dot(p);
            let eve = data.eve_noise + eve_all - p[k] * data.eve_gain[k];
            bob.ln() + eve.ln()
        })
        .sum()
}

/// Σ_k ln(d_Bk + Σ_{m≠k} p_m a_Bkm) + ln(d_E + Σ_m p_m a_Em)
pub fn g2(p: &DVector<f64>, data: &PowerProblemData) -> f64 {
    let eve_all = data.eve_noise + data.eve_gain.dot(p);
    (0..data.users())
        .map(|k| {
            let bob = data.bob_noise[k] + data.bob_gain.row(k).transpose().dot(p) - p[k] * data.bob_gain[(k, k)];
            bob.ln() + eve_all.ln()
        })
        .sum()
}

pub fn grad_g1(p: &DVector<f64>, data: &PowerProblemData) -> DVector<f64> {
    let users = data.users();
    let eve_all = data.eve_gain.dot(p);
    let mut grad = DVector::zeros(users);
    for k in 0..users {
        let bob = data.bob_noise[k] + data.bob_gain.row(k).transpose().dot(p);
        let eve = data.eve_noise + eve_all - p[k] * data.eve_gain[k];
        for m in 0..users {
            grad[m] += data.bob_gain[(k, m)] / bob;
            if m != k {
                grad[m] += data.eve_gain[m] / eve;
            }
        }
    }
    grad
}

pub fn grad_g2(p: &DVector<f64>, data: &PowerProblemData) -> DVector<f64> {
    let users = data.users();
    let eve_all = data.eve_noise + data.eve_gain.dot(p);
    let mut grad = &data.eve_gain * (users as f64 / eve_all);
    for k in 0..users {
        let bob = data.bob_noise[k] + data.bob_gain.row(k).transpose().dot(p) - p[k] * data.bob_gain[(k, k)];
        for m in (0..users).filter(|&m| m != k) {
            grad[m] += data.bob_gain[(k, m)] / bob;
        }
    }
    grad
}

/// Secrecy rate (nats/Hz) as `g1 − g2`.
pub fn secrecy(p: &DVector<f64>, data: &PowerProblemData) -> f64 {
    g1(p, data) - g2(p, data)
}

/// Concave minorant `g1(p) − g2(p̄) − ∇g2(p̄)ᵀ(p − p̄)`.
#[derive(Debug, Clone)]
pub struct PowerSurrogate<'a> {
    pub data: &'a PowerProblemData,
    pub anchor: DVector<f64>,
    g2_anchor: f64,
    g2_slope: DVector<f64>,
}

impl<'a> PowerSurrogate<'a> {
    pub fn new(data: &'a PowerProblemData, anchor: &DVector<f64>) -> Self {
        Self {
            data,
            anchor: anchor.clone(),
            g2_anchor: g2(anchor, data),
            g2_slope: grad_g2(anchor, data),
        }
    }

    pub fn value(&self, p: &DVector<f64>) -> f64 {
        g1(p, self.data) - self.g2_anchor - self.g2_slope.dot(&(p - &self.anchor))
    }

    pub fn gradient(&self, p: &DVector<f64>) -> DVector<f64> {
        grad_g1(p, self.data) - &self.g2_slope
    }
}

struct PowerRatio<'a> {
    surrogate: PowerSurrogate<'a>,
    objective: Objective,
    set: FeasibleSet,
}

impl RatioProblem for PowerRatio<'_> {
    fn numerator(&self, x: &DVector<f64>) -> f64 {
        self.surrogate.value(x)
    }
    fn numerator_grad(&self, x: &DVector<f64>) -> DVector<f64> {
        self.surrogate.gradient(x)
    }
    fn denominator(&self, x: &DVector<f64>) -> f64 {
        self.surrogate.data.denominator(x, self.objective)
    }
    fn denominator_grad(&self, _: &DVector<f64>) -> DVector<f64> {
        match self.objective {
            Objective::Efficiency => self.surrogate.data.mu_eq.clone(),
            Objective::SecrecyRate => DVector::zeros(self.surrogate.data.users()),
        }
    }
    fn feasible_set(&self) -> &FeasibleSet {
        &self.set
    }
}

#[derive(Debug, Clone)]
pub struct PowerStep {
    pub p: DVector<f64>,
    /// Surrogate ratio at the returned point.
    pub value: f64,
    pub dinkelbach: Option<crate::fracprog::DinkelbachOutcome>,
    pub ascent: Option<crate::fracprog::PgOutcome>,
}

/// Maximizes the surrogate ratio around `p_bar`.
pub fn solve_power_surrogate(p_bar: &DVector<f64>, data: &PowerProblemData, objective: Objective, opts: &SolverOptions) -> Result<PowerStep> {
    let problem = PowerRatio {
        surrogate: PowerSurrogate::new(data, p_bar),
        objective,
        set: data.feasible_set(p_bar),
    };
    match objective {
        Objective::Efficiency => {
            let out = dinkelbach_maximize(&problem, p_bar.clone(), opts)?;
            Ok(PowerStep {
                p: out.x.clone(),
                value: out.value,
                dinkelbach: Some(out),
                ascent: None,
            })
        }
        Objective::SecrecyRate => {
            let set = &problem.set;
            let out = pg_ascent(
                |p| problem.surrogate.value(p),
                |p| problem.surrogate.gradient(p),
                |p| set.project(p),
                p_bar.clone(),
                opts,
            )?;
            Ok(PowerStep {
                p: out.x.clone(),
                value: out.value,
                dinkelbach: None,
                ascent: Some(out),
            })
        }
    }
}

#[derive(Debug, Clone)]
pub struct PowerOutcome {
    pub p: DVector<f64>,
    /// Objective (internal units) at p₀ and after every accepted step.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub rejected_steps: usize,
    /// Relative loss of the discarded step, if any.
    pub worst_rejected_loss: f64,
    pub dinkelbach: DinkelbachStats,
    pub ascent_unconverged: usize,
}

/// Ratio `(g1 − g2) / denominator` at `p`.
pub fn power_objective(p: &DVector<f64>, data: &PowerProblemData, objective: Objective) -> f64 {
    secrecy(p, data) / data.denominator(p, objective)
}

/// Sequential power optimization for fixed γ and filters.
pub fn optimize_power(
    p0: &DVector<f64>,
    data: &PowerProblemData,
    objective: Objective,
    seq: &SequentialOptions,
    opts: &SolverOptions,
) -> Result<PowerOutcome> {
    if p0.len() != data.users() {
        return Err(Error::Domain(format!("p has {} entries, expected {}", p0.len(), data.users())));
    }
    let mut p = p0.clone();
    let mut current = power_objective(&p, data, objective);
    let mut out = PowerOutcome {
        p: p.clone(),
        trace: vec![current],
        iterations: 0,
        converged: false,
        rejected_steps: 0,
        worst_rejected_loss: 0.0,
        dinkelbach: DinkelbachStats::default(),
        ascent_unconverged: 0,
    };
    for iteration in 1..=seq.max_iters {
        out.iterations = iteration;
        let step = solve_power_surrogate(&p, data, objective, opts)?;
        if let Some(d) = &step.dinkelbach {
            out.dinkelbach.record(d);
        }
        if step.ascent.as_ref().is_some_and(|a| !a.converged) {
            out.ascent_unconverged += 1;
        }
        let value = power_objective(&step.p, data, objective);
        if value < current {
            out.rejected_steps += 1;
            out.worst_rejected_loss = (current - value) / current.abs();
            out.converged = true;
            break;
        }
        let moved = (&step.p - &p).norm();
        current = value;
        out.trace.push(value);
        p = step.p;
        if seq.is_step_small(moved, p.norm()) {
            out.converged = true;
            break;
        }
    }
    out.p = p;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::draw_drop;
    use crate::fracprog::projected_gradient_residual;
    use crate::model::{mmse_filters, random_unit_modulus, secrecy_nats, total_power, EveModel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(seed: u64, cfg: &SystemConfig, amplify: f64) -> (ChannelSet, DVector<C64>, DMatrix<C64>) {
        let (_, ch) = draw_drop(seed, 0, cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
        let gamma = random_unit_modulus(&mut rng, cfg.ris_elements) * C64::new(amplify, 0.0);
        let p = DVector::from_column_slice(&cfg.p_max);
        let filters = mmse_filters(&p, &gamma, &ch, cfg).unwrap();
        (ch, gamma, filters)
    }

    fn random_p(rng: &mut ChaCha8Rng, data: &PowerProblemData) -> DVector<f64> {
        DVector::from_fn(data.users(), |k, _| rng.random::<f64>() * data.p_max[k])
    }

    #[test]
    fn reconstructs_model_efficiency() {
        let cfg = SystemConfig::desk();
        let (ch, gamma, filters) = setup(1, &cfg, 3.0);
        let data = build_power_data(&gamma, &filters, &ch, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let p = random_p(&mut rng, &data);
            let rate = secrecy_nats(&p, &gamma, &filters, &ch, &cfg, EveModel::Approx).unwrap();
            let power = total_power(&p, &gamma, &ch, &cfg);
            assert!((secrecy(&p, &data) - rate).abs() <= 1e-10 * rate.abs().max(1.0));
            assert!((data.total_power(&p) - power).abs() <= 1e-12 * power);
            let expected = rate / power;
            let got = power_objective(&p, &data, Objective::Efficiency);
            assert!((got - expected).abs() <= 1e-10 * expected.abs().max(1e-300));
        }
    }

    #[test]
    fn unit_modulus_leaves_costs_unchanged() {
        let cfg = SystemConfig::desk();
        let (ch, gamma, filters) = setup(3, &cfg, 1.0);
        let data = build_power_data(&gamma, &filters, &ch, &cfg).unwrap();
        for (m, mu) in data.mu_eq.iter().zip(&cfg.mu) {
            assert!((m - mu).abs() <= 1e-12);
        }
        assert!((data.static_eq - cfg.circuit_power()).abs() <= 1e-12 * cfg.circuit_power());
    }

    #[test]
    fn zero_gamma_without_ris_noise_gives_zero_gains() {
        let cfg = SystemConfig::desk().nearly_passive();
        let (ch, _, filters) = setup(4, &cfg, 1.0);
        let data = build_power_data(&DVector::zeros(cfg.ris_elements), &filters, &ch, &cfg).unwrap();
        assert!(data.bob_gain.iter().all(|a| *a == 0.0));
        assert!(data.eve_gain.iter().all(|a| *a == 0.0));
        let zero = DVector::zeros(cfg.users);
        assert_eq!(secrecy(&zero, &data), 0.0);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let cfg = SystemConfig::desk();
        let (ch, gamma, filters) = setup(5, &cfg, 2.0);
        let data = build_power_data(&gamma, &filters, &ch, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let p = random_p(&mut rng, &data).add_scalar(1e-3);
            for (f, g) in [(g1 as fn(&_, &_) -> f64, grad_g1(&p, &data)), (g2, grad_g2(&p, &data))] {
                for i in 0..p.len() {
                    let h = 1e-6 * p[i];
                    let mut pp = p.clone();
                    let mut pm = p.clone();
                    pp[i] += h;
                    pm[i] -= h;
                    let fd = (f(&pp, &data) - f(&pm, &data)) / (2.0 * h);
                    assert!((fd - g[i]).abs() <= 1e-6 * g[i].abs().max(1e-12), "{fd} vs {}", g[i]);
                }
            }
        }
    }

    #[test]
    fn surrogate_is_tight_and_below() {
        let cfg = SystemConfig::desk();
        let (ch, gamma, filters) = setup(7, &cfg, 2.0);
        let data = build_power_data(&gamma, &filters, &ch, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let anchor = random_p(&mut rng, &data);
            let s = PowerSurrogate::new(&data, &anchor);
            let exact = secrecy(&anchor, &data);
            assert!((s.value(&anchor) - exact).abs() <= 1e-9 * exact.abs().max(1.0));
            for _ in 0..50 {
                let p = random_p(&mut rng, &data);
                assert!(s.value(&p) <= secrecy(&p, &data) + 1e-9);
            }
        }
    }

    #[test]
    fn single_user_matches_line_search() {
        let cfg = SystemConfig::with_dimensions(1, 4, 8);
        let (ch, gamma, filters) = setup(9, &cfg, 1.5);
        let data = build_power_data(&gamma, &filters, &ch, &cfg).unwrap();
        let anchor = DVector::from_element(1, 0.3 * cfg.p_max[0]);
        let step = solve_power_surrogate(&anchor, &data, Objective::Efficiency, &SolverOptions::default()).unwrap();
        let s = PowerSurrogate::new(&data, &anchor);
        let set = data.feasible_set(&anchor);
        let ratio = |p: &DVector<f64>| s.value(p) / data.total_power(p);
        let best = (0..=10_000)
            .map(|i| DVector::from_element(1, cfg.p_max[0] * i as f64 / 10_000.0))
            .filter(|p| set.contains(p, 0.0))
            .map(|p| ratio(&p))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(ratio(&step.p) >= best * (1.0 - 1e-3), "{} vs {best}", ratio(&step.p));
    }

    #[test]
    fn leak_free_two_users_match_grid() {
        let cfg = SystemConfig::desk();
        let (ch, gamma, filters) = setup(10, &cfg, 1.5);
        let mut data = build_power_data(&gamma, &filters, &ch, &cfg).unwrap();
        data.eve_gain.fill(0.0);
        let anchor = DVector::from_column_slice(&cfg.p_max) * 0.5;
        let step = solve_power_surrogate(&anchor, &data, Objective::Efficiency, &SolverOptions::default()).unwrap();
        let s = PowerSurrogate::new(&data, &anchor);
        let set = data.feasible_set(&anchor);
        let ratio = |p: &DVector<f64>| s.value(p) / data.total_power(p);
        let mut best = f64::NEG_INFINITY;
        for i in 0..=200 {
            for j in 0..=200 {
                let p = DVector::from_vec(vec![cfg.p_max[0] * i as f64 / 200.0, cfg.p_max[1] * j as f64 / 200.0]);
                if set.contains(&p, 0.0) {
                    best = best.max(ratio(&p));
                }
            }
        }
        assert!(ratio(&step.p) >= best * (1.0 - 1e-2));
    }

    #[test]
    fn sequence_is_monotone_and_feasible() {
        let cfg = SystemConfig::desk();
        for seed in 11..15 {
            let (ch, gamma, filters) = setup(seed, &cfg, 2.0);
            let data = build_power_data(&gamma, &filters, &ch, &cfg).unwrap();
            let p0 = DVector::from_column_slice(&cfg.p_max);
            for objective in [Objective::Efficiency, Objective::SecrecyRate] {
                let out = optimize_power(&p0, &data, objective, &SequentialOptions::absolute(1e-6, 50), &SolverOptions::default()).unwrap();
                for w in out.trace.windows(2) {
                    assert!(w[1] >= w[0] - 1e-8 * w[0].abs());
                }
                assert!(out.p.iter().zip(data.p_max.iter()).all(|(p, m)| *p >= 0.0 && p <= m));
                let rf = data.rf_power(&out.p);
                assert!(rf >= -1e-10 * data.rf_max && rf <= data.rf_max * (1.0 + 1e-10));
            }
        }
    }

    #[test]
    fn huge_eps_gives_single_step() {
        let cfg = SystemConfig::desk();
        let (ch, gamma, filters) = setup(16, &cfg, 1.0);
        let data = build_power_data(&gamma, &filters, &ch, &cfg).unwrap();
        let p0 = DVector::from_column_slice(&cfg.p_max);
        let out = optimize_power(&p0, &data, Objective::Efficiency, &SequentialOptions::absolute(1e3, 50), &SolverOptions::default()).unwrap();
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn fixed_point_is_stationary() {
        let cfg = SystemConfig::desk();
        let (ch, gamma, filters) = setup(17, &cfg, 1.0);
        let data = build_power_data(&gamma, &filters, &ch, &cfg).unwrap();
        let p0 = DVector::from_column_slice(&cfg.p_max);
        let opts = SolverOptions::default();
        let out = optimize_power(&p0, &data, Objective::Efficiency, &SequentialOptions::absolute(1e-9, 200), &opts).unwrap();
        let lambda = power_objective(&out.p, &data, Objective::Efficiency);
        let s = PowerSurrogate::new(&data, &out.p);
        let grad = s.gradient(&out.p) - &data.mu_eq * lambda;
        let set = data.feasible_set(&out.p);
        let res = projected_gradient_residual(&out.p, &grad, 1.0, |x| set.project(x)).unwrap();
        assert!(res <= 10.0 * opts.inner_tol, "residual {res}");
    }
}
