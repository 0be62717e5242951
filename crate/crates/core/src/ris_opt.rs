//! Sequential optimization of the RIS coefficients γ for fixed powers and
//! receive filters.
//!
//! Each step replaces the secrecy rate by a concave quadratic minorant that
//! touches it at the current point γ̄, linearizes the lower RIS power
//! constraint around γ̄ and maximizes the resulting ratio with Dinkelbach.

use nalgebra::{DMatrix, DVector};

use crate::fracprog::{
    dinkelbach_maximize, maximize_concave_quadratic, pg_ascent, DinkelbachOutcome, DinkelbachStats, FeasibleSet, Halfspace, PgOutcome, RatioProblem,
    SequentialOptions, SolverOptions,
};
use crate::model::{ris_load, Allocation, EveCovariance, Objective, RisMode, SystemConfig, objective_value};
use crate::quadform::{to_complex, to_real, QuadForm};
use crate::channel::ChannelSet;
use crate::{Error, Result, C64};

/// Signal and interference-plus-noise terms of user `k` at Bob and Eve.
///
/// SINR at Bob is `x_bob / y_bob`; Eve's approximate SINR is
/// `x_eve / (y_eve + σ²_E)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkTerms {
    pub x_bob: f64,
    pub y_bob: f64,
    pub x_eve: f64,
    pub y_eve: f64,
}

pub fn eval_xy(
    k: usize,
    gamma: &DVector<C64>,
    p: &DVector<f64>,
    filters: &DMatrix<C64>,
    channels: &ChannelSet,
    cfg: &SystemConfig,
) -> LinkTerms {
    let c = filters.column(k).into_owned();
    let u = channels.g_bob.ad_mul(&c);
    let eve = EveCovariance::from_channels(channels);
    let ris_noise: f64 = u.iter().zip(gamma.iter()).map(|(u, g)| u.norm_sqr() * g.norm_sqr()).sum();
    let mut terms = LinkTerms {
        x_bob: 0.0,
        y_bob: cfg.sigma_bob_sq * c.norm_squared() + cfg.sigma_ris_sq * ris_noise,
        x_eve: 0.0,
        y_eve: cfg.sigma_ris_sq * eve.ris_noise_gain(gamma),
    };
    for m in 0..channels.users() {
        let reflected = channels.h[m].component_mul(gamma);
        let bob = p[m] * u.dotc(&reflected).norm_sqr();
        let leak = p[m] * eve.quad(&reflected);
        if m == k {
            terms.x_bob = bob;
            terms.x_eve = leak;
        } else {
            terms.y_bob += bob;
            terms.y_eve += leak;
        }
    }
    terms
}

/// Concave minorant of the secrecy rate (nats/Hz) around γ̄, stored as
/// `constant + Re(linearᴴγ) − γᴴ curvature γ`.
#[derive(Debug, Clone)]
pub struct SurrogateState {
    pub gamma_bar: DVector<C64>,
    /// Link terms of every user at γ̄.
    pub expansion: Vec<LinkTerms>,
    constant: f64,
    linear: DVector<C64>,
    curvature: QuadForm,
}

impl SurrogateState {
    pub fn build(
        gamma_bar: &DVector<C64>,
        p: &DVector<f64>,
        filters: &DMatrix<C64>,
        channels: &ChannelSet,
        cfg: &SystemConfig,
    ) -> Result<Self> {
        let n = channels.ris_elements();
        let users = channels.users();
        let sigma_e = cfg.sigma_eve_sq;
        if !(sigma_e > 0.0) {
            return Err(Error::Domain("Eve noise power must be positive".into()));
        }
        let eve = EveCovariance::from_channels(channels);
        let h_sq: Vec<DVector<f64>> = channels.h.iter().map(|h| h.map(|z| z.norm_sqr())).collect();

        // ĝᴴ H_m γ = leak_mᴴ γ
        let leak: Vec<DVector<C64>> = channels.h.iter().map(|h| h.conjugate().component_mul(&eve.mean)).collect();
        let leak_form = |m: usize| {
            let mut q = QuadForm::zeros(n);
            q.add_rank_one(1.0, leak[m].clone());
            q.add_diag(eve.error_var, &h_sq[m]);
            q
        };
        let mut eve_total = QuadForm::zeros(n);
        for m in 0..users {
            eve_total.add_form(p[m], &leak_form(m));
        }
        let ris_noise = eve.ris_noise_diag();
        eve_total.add_diag(cfg.sigma_ris_sq, &ris_noise);

        let mut constant = 0.0;
        let mut linear = DVector::<C64>::zeros(n);
        let mut curvature = QuadForm::zeros(n);
        let mut eve_total_weight = 0.0;
        let mut expansion = Vec::with_capacity(users);

        for k in 0..users {
            let t = eval_xy(k, gamma_bar, p, filters, channels, cfg);
            if !(t.y_bob > 0.0) {
                return Err(Error::Numeric(format!("interference-plus-noise at Bob is {} for user {k}", t.y_bob)));
            }
            let c = filters.column(k).into_owned();
            let u = channels.g_bob.ad_mul(&c);

            if t.x_bob > 0.0 {
                // cᴴ A_m γ = bob_mᴴ γ
                let bob: Vec<DVector<C64>> = channels.h.iter().map(|h| h.conjugate().component_mul(&u)).collect();
                let z0 = bob[k].dotc(gamma_bar);
                let r = t.x_bob / t.y_bob;
                let w = r / (t.x_bob + t.y_bob);
                constant += r.ln_1p() - r - w * cfg.sigma_bob_sq * c.norm_squared();
                linear.axpy(C64::new(2.0 * r / z0.norm_sqr(), 0.0) * z0, &bob[k], C64::new(1.0, 0.0));
                curvature.add_diag(w * cfg.sigma_ris_sq, &u.map(|z| z.norm_sqr()));
                for (m, b) in bob.into_iter().enumerate() {
                    curvature.add_rank_one(w * p[m], b);
                }
            }

            if t.y_eve > 0.0 {
                let s = t.y_eve / sigma_e;
                let mut others = QuadForm::zeros(n);
                for m in (0..users).filter(|&m| m != k) {
                    others.add_form(p[m], &leak_form(m));
                }
                others.add_diag(cfg.sigma_ris_sq, &ris_noise);
                constant += s.ln_1p() - s - s * sigma_e / (t.y_eve + sigma_e);
                linear.axpy(C64::new(2.0 * s / t.y_eve, 0.0), &others.apply(gamma_bar), C64::new(1.0, 0.0));
                curvature.add_form(s / (t.y_eve + sigma_e), &others);
            }

            let total = sigma_e + t.x_eve + t.y_eve;
            constant += (sigma_e / total).ln() + (t.x_eve + t.y_eve) / total;
            eve_total_weight += 1.0 / total;
            expansion.push(t);
        }
        curvature.add_form(eve_total_weight, &eve_total);

        Ok(Self {
            gamma_bar: gamma_bar.clone(),
            expansion,
            constant,
            linear,
            curvature,
        })
    }

    pub fn value(&self, gamma: &DVector<C64>) -> f64 {
        self.constant + self.linear.dotc(gamma).re - self.curvature.eval(gamma)
    }

    /// Value at a stacked `[Re; Im]` point.
    pub fn value_real(&self, x: &DVector<f64>) -> f64 {
        self.value(&to_complex(x))
    }

    /// Gradient with respect to the stacked `[Re; Im]` coordinates.
    pub fn gradient_real(&self, x: &DVector<f64>) -> DVector<f64> {
        let gamma = to_complex(x);
        let g = &self.linear - self.curvature.apply(&gamma) * C64::new(2.0, 0.0);
        to_real(&g)
    }
}

/// Surrogate secrecy rate in nats/Hz.
pub fn surrogate_rate(gamma: &DVector<C64>, state: &SurrogateState) -> f64 {
    state.value(gamma)
}

/// The γ-subproblem: surrogate rate over an affine function of γᴴRγ, on
/// the RIS power set with the lower constraint linearized at γ̄.
pub struct GammaProblem<'a> {
    state: &'a SurrogateState,
    /// Weight of γᴴRγ in the denominator (0 or 1).
    load_weight: f64,
    load_real: DVector<f64>,
    denominator_offset: f64,
    set: FeasibleSet,
    linear_real: DVector<f64>,
    curvature_real: DMatrix<f64>,
}

impl<'a> GammaProblem<'a> {
    pub fn new(state: &'a SurrogateState, p: &DVector<f64>, channels: &ChannelSet, cfg: &SystemConfig, objective: Objective) -> Result<Self> {
        let load = ris_load(p, channels, cfg);
        if load.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::Domain("RIS load has a zero entry; γ is unconstrained there".into()));
        }
        let load_real = DVector::from_fn(2 * load.len(), |i, _| load[i % load.len()]);
        let trace = load.sum();
        let x_bar = to_real(&state.gamma_bar);
        let quad_bar: f64 = x_bar.iter().zip(load_real.iter()).map(|(x, r)| r * x * x).sum();
        let transmit: f64 = p.iter().zip(&cfg.mu).map(|(p, mu)| p * mu).sum();

        let (radius_sq, halfspace) = match cfg.ris_mode {
            RisMode::Active => {
                let normal = load_real.component_mul(&x_bar) * 2.0;
                let offset = (trace + quad_bar).min(normal.dot(&x_bar));
                ((cfg.ris_rf_max + trace).max(quad_bar), Some(Halfspace { normal, offset }))
            }
            RisMode::NearlyPassive => (trace.max(quad_bar), None),
        };
        let (load_weight, denominator_offset) = match (objective, cfg.ris_mode) {
            (Objective::SecrecyRate, _) => (0.0, 1.0),
            (Objective::Efficiency, RisMode::Active) => (1.0, transmit + cfg.circuit_power() - trace),
            (Objective::Efficiency, RisMode::NearlyPassive) => (0.0, transmit + cfg.circuit_power()),
        };
        Ok(Self {
            state,
            linear_real: to_real(&state.linear),
            curvature_real: state.curvature.to_real_dense(),
            load_weight,
            load_real: load_real.clone(),
            denominator_offset,
            set: FeasibleSet::EllipsoidHalfspace {
                diag: load_real,
                radius_sq,
                halfspace,
            },
        })
    }
}

impl RatioProblem for GammaProblem<'_> {
    fn numerator(&self, x: &DVector<f64>) -> f64 {
        self.state.value_real(x)
    }
    fn numerator_grad(&self, x: &DVector<f64>) -> DVector<f64> {
        self.state.gradient_real(x)
    }
    fn denominator(&self, x: &DVector<f64>) -> f64 {
        if self.load_weight == 0.0 {
            return self.denominator_offset;
        }
        let quad: f64 = x.iter().zip(self.load_real.iter()).map(|(x, r)| r * x * x).sum();
        self.load_weight * quad + self.denominator_offset
    }
    fn denominator_grad(&self, x: &DVector<f64>) -> DVector<f64> {
        self.load_real.component_mul(x) * (2.0 * self.load_weight)
    }
    fn feasible_set(&self) -> &FeasibleSet {
        &self.set
    }
    fn parametric_quadratic(&self, lambda: f64) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let mut curvature = self.curvature_real.clone();
        let w = lambda * self.load_weight;
        if w != 0.0 {
            for (i, r) in self.load_real.iter().enumerate() {
                curvature[(i, i)] += w * r;
            }
        }
        Some((self.linear_real.clone(), curvature))
    }
}

#[derive(Debug, Clone)]
pub struct GammaStep {
    pub gamma: DVector<C64>,
    /// Set for the efficiency objective.
    pub dinkelbach: Option<DinkelbachOutcome>,
    /// Set for the secrecy-rate objective, which needs no Dinkelbach layer.
    pub ascent: Option<PgOutcome>,
}

/// Maximizes the surrogate ratio starting from γ̄.
pub fn solve_gamma_surrogate(
    state: &SurrogateState,
    p: &DVector<f64>,
    channels: &ChannelSet,
    cfg: &SystemConfig,
    objective: Objective,
    opts: &SolverOptions,
) -> Result<GammaStep> {
    let problem = GammaProblem::new(state, p, channels, cfg, objective)?;
    let x0 = to_real(&state.gamma_bar);
    match objective {
        Objective::Efficiency => {
            let outcome = dinkelbach_maximize(&problem, x0, opts)?;
            Ok(GammaStep {
                gamma: to_complex(&outcome.x),
                dinkelbach: Some(outcome),
                ascent: None,
            })
        }
        Objective::SecrecyRate => {
            let set = problem.feasible_set();
            let start = match maximize_concave_quadratic(&problem.linear_real, &problem.curvature_real, set)? {
                Some(c) => {
                    let c = set.project(&c)?;
                    if state.value_real(&c) >= state.value_real(&x0) { c } else { x0 }
                }
                None => x0,
            };
            let outcome = pg_ascent(|x| state.value_real(x), |x| state.gradient_real(x), |x| set.project(x), start, opts)?;
            Ok(GammaStep {
                gamma: to_complex(&outcome.x),
                dinkelbach: None,
                ascent: Some(outcome),
            })
        }
    }
}

#[derive(Debug, Clone)]
pub struct RisOutcome {
    pub gamma: DVector<C64>,
    /// Objective (internal units, approximate Eve) at γ₀ and after every
    /// accepted step.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Steps discarded because the true objective went down.
    pub rejected_steps: usize,
    /// Relative loss of the discarded step, if any.
    pub worst_rejected_loss: f64,
    /// Doublings accepted by the extrapolation search.
    pub extrapolations: usize,
    pub dinkelbach: DinkelbachStats,
    /// Inner ascents that hit a cap, secrecy-rate objective only.
    pub ascent_unconverged: usize,
}

const MAX_EXTRAPOLATION_DOUBLINGS: usize = 40;

/// Both RIS power constraints, checked without slack.
fn within_ris_budget(gamma: &DVector<C64>, load: &DVector<f64>, cfg: &SystemConfig) -> bool {
    let trace = load.sum();
    let quad: f64 = load.iter().zip(gamma.iter()).map(|(r, g)| r * g.norm_sqr()).sum();
    match cfg.ris_mode {
        RisMode::Active => quad >= trace && quad - trace <= cfg.ris_rf_max,
        RisMode::NearlyPassive => quad <= trace,
    }
}

/// Tries `point(2)`, `point(4)`, ... and keeps each one that is feasible and
/// improves on the current value. Returns the number of accepted points.
fn doubling_search(
    candidate: &mut Allocation,
    value: &mut f64,
    point: impl Fn(f64) -> DVector<C64>,
    load: &DVector<f64>,
    channels: &ChannelSet,
    cfg: &SystemConfig,
    objective: Objective,
) -> Result<usize> {
    let mut accepted = 0;
    let mut reach = 1.0;
    for _ in 0..MAX_EXTRAPOLATION_DOUBLINGS {
        reach *= 2.0;
        let gamma = point(reach);
        if gamma == candidate.gamma || !within_ris_budget(&gamma, load, cfg) {
            break;
        }
        let trial = Allocation { gamma, ..candidate.clone() };
        let trial_value = objective_value(&trial, channels, cfg, objective)?;
        if !(trial_value > *value) {
            break;
        }
        *candidate = trial;
        *value = trial_value;
        accepted += 1;
    }
    Ok(accepted)
}

/// Sequential RIS optimization for fixed powers and filters.
///
/// With `seq.extrapolate`, each surrogate step is followed by two doubling
/// searches, one along the step direction and one scaling γ up to the RIS
/// power budget. Both keep only feasible points with a higher true
/// objective.
///
/// If the RIS load has a zero entry (all powers zero on a nearly-passive
/// RIS) γ₀ is returned unchanged.
#[allow(clippy::too_many_arguments)]
pub fn optimize_ris(
    p: &DVector<f64>,
    filters: &DMatrix<C64>,
    gamma0: &DVector<C64>,
    channels: &ChannelSet,
    cfg: &SystemConfig,
    objective: Objective,
    seq: &SequentialOptions,
    opts: &SolverOptions,
) -> Result<RisOutcome> {
    let mut alloc = Allocation {
        p: p.clone(),
        gamma: gamma0.clone(),
        filters: filters.clone(),
    };
    let mut current = objective_value(&alloc, channels, cfg, objective)?;
    let mut out = RisOutcome {
        gamma: gamma0.clone(),
        trace: vec![current],
        iterations: 0,
        converged: true,
        rejected_steps: 0,
        worst_rejected_loss: 0.0,
        extrapolations: 0,
        dinkelbach: DinkelbachStats::default(),
        ascent_unconverged: 0,
    };
    let load = ris_load(p, channels, cfg);
    if load.iter().any(|r| !(*r > 0.0)) {
        return Ok(out);
    }
    out.converged = false;
    for iteration in 1..=seq.max_iters {
        out.iterations = iteration;
        let state = SurrogateState::build(&alloc.gamma, p, filters, channels, cfg)?;
        let step = solve_gamma_surrogate(&state, p, channels, cfg, objective, opts)?;
        if let Some(d) = &step.dinkelbach {
            out.dinkelbach.record(d);
        }
        if step.ascent.as_ref().is_some_and(|a| !a.converged) {
            out.ascent_unconverged += 1;
        }
        let mut candidate = Allocation {
            gamma: step.gamma,
            ..alloc.clone()
        };
        let mut value = objective_value(&candidate, channels, cfg, objective)?;
        if value < current {
            out.rejected_steps += 1;
            out.worst_rejected_loss = (current - value) / current.abs();
            out.converged = true;
            break;
        }
        if seq.extrapolate {
            let origin = alloc.gamma.clone();
            let direction = &candidate.gamma - &origin;
            let along = |reach: f64| &origin + &direction * C64::new(reach, 0.0);
            out.extrapolations += doubling_search(&mut candidate, &mut value, along, &load, channels, cfg, objective)?;
            let base = candidate.gamma.clone();
            let quad: f64 = load.iter().zip(base.iter()).map(|(r, g)| r * g.norm_sqr()).sum();
            let ceiling = match cfg.ris_mode {
                RisMode::Active => ((cfg.ris_rf_max + load.sum()) / quad).sqrt(),
                RisMode::NearlyPassive => (load.sum() / quad).sqrt(),
            };
            // largest scaling still inside the budget, pulled in by rounding
            let ceiling = ceiling * (1.0 - 1e-12);
            let scaled = |reach: f64| &base * C64::new(reach.min(ceiling), 0.0);
            out.extrapolations += doubling_search(&mut candidate, &mut value, scaled, &load, channels, cfg, objective)?;
        }
        let moved = (&candidate.gamma - &alloc.gamma).norm();
        current = value;
        out.trace.push(value);
        let scale = candidate.gamma.norm();
        alloc = candidate;
        if seq.is_step_small(moved, scale) {
            out.converged = true;
            break;
        }
    }
    out.gamma = alloc.gamma;
    Ok(out)
}
