//! System model: SINRs at Bob and Eve, the RIS power model, secrecy rate,
//! SEE and the MMSE receive filters.
//!
//! Rates are handled in nats per Hz internally; the public `secrecy_rate`
//! and `see` functions report bit/s and bit/J by scaling with `B / ln 2`.

use std::f64::consts::LN_2;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::channel::{noise_power, ChannelSet, Propagation};
use crate::channel::dbm_to_watt;
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RisMode {
    Active,
    NearlyPassive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CsiMode {
    Statistical,
    Perfect,
}

impl RisMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RisMode::Active => "active",
            RisMode::NearlyPassive => "nearly_passive",
        }
    }
}

impl CsiMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CsiMode::Statistical => "statistical",
            CsiMode::Perfect => "perfect",
        }
    }
}

/// Which Eve SINR enters the secrecy rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EveModel {
    /// Actual channel `g_E`.
    True,
    /// Expectation taken inside the logarithm, using only `ĝ_E` and `σ_g²`.
    Approx,
}

/// What the optimizers maximize.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Secrecy rate over total power.
    Efficiency,
    /// Secrecy rate alone.
    SecrecyRate,
}

/// All scalar system parameters. Powers are in watts.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// K
    pub users: usize,
    /// N_B
    pub bob_antennas: usize,
    /// N
    pub ris_elements: usize,
    /// B in Hz.
    pub bandwidth: f64,
    pub sigma_bob_sq: f64,
    pub sigma_eve_sq: f64,
    pub sigma_ris_sq: f64,
    /// Inverse amplifier efficiency of each user.
    pub mu: Vec<f64>,
    /// Static power per RIS element.
    pub element_power: f64,
    /// Remaining static power of the RIS.
    pub ris_static_power: f64,
    /// All other static power of the legitimate system.
    pub static_power: f64,
    /// Maximum RF power the RIS amplifier can deliver.
    pub ris_rf_max: f64,
    pub p_max: Vec<f64>,
    pub ris_mode: RisMode,
    pub csi_mode: CsiMode,
    pub propagation: Propagation,
}

impl SystemConfig {
    /// Full-size scenario: K = 4, N_B = 4, N = 100.
    pub fn paper_scale() -> Self {
        Self::with_dimensions(4, 4, 100)
    }

    /// Reduced scenario used for quick sweeps: K = 2, N = 16.
    pub fn desk() -> Self {
        Self::with_dimensions(2, 4, 16)
    }

    pub fn with_dimensions(users: usize, bob_antennas: usize, ris_elements: usize) -> Self {
        let bandwidth = 20e6;
        let noise = noise_power(-174.0, 5.0, bandwidth);
        Self {
            users,
            bob_antennas,
            ris_elements,
            bandwidth,
            sigma_bob_sq: noise,
            sigma_eve_sq: noise,
            sigma_ris_sq: noise,
            mu: vec![1.0; users],
            element_power: dbm_to_watt(0.0),
            ris_static_power: dbm_to_watt(20.0),
            static_power: dbm_to_watt(30.0),
            ris_rf_max: dbm_to_watt(10.0),
            p_max: vec![dbm_to_watt(30.0); users],
            ris_mode: RisMode::Active,
            csi_mode: CsiMode::Statistical,
            propagation: Propagation::default(),
        }
    }

    /// Switches to a nearly-passive RIS, which has no amplifier noise and no
    /// RF power budget.
    pub fn nearly_passive(mut self) -> Self {
        self.ris_mode = RisMode::NearlyPassive;
        self.sigma_ris_sq = 0.0;
        self.ris_rf_max = 0.0;
        self
    }

    /// Sets every user's power budget.
    pub fn with_p_max(mut self, watt: f64) -> Self {
        self.p_max = vec![watt; self.users];
        self
    }

    /// P_c = N P_c,n + P₀^RIS + P₀
    pub fn circuit_power(&self) -> f64 {
        self.ris_elements as f64 * self.element_power + self.ris_static_power + self.static_power
    }

    /// Every violated invariant, as a human-readable line.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.users == 0 {
            out.push("K must be at least 1".to_string());
        }
        if self.bob_antennas == 0 {
            out.push("N_B must be at least 1".to_string());
        }
        if self.ris_elements == 0 {
            out.push("N must be at least 1".to_string());
        }
        if self.mu.len() != self.users {
            out.push(format!("mu has {} entries, expected K = {}", self.mu.len(), self.users));
        }
        if self.p_max.len() != self.users {
            out.push(format!("P_max has {} entries, expected K = {}", self.p_max.len(), self.users));
        }
        if self.mu.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            out.push("every mu must be positive".to_string());
        }
        if self.p_max.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            out.push("every P_max must be positive".to_string());
        }
        if !(self.bandwidth.is_finite() && self.bandwidth > 0.0) {
            out.push("bandwidth must be positive".to_string());
        }
        if !(self.sigma_bob_sq.is_finite() && self.sigma_bob_sq > 0.0) {
            out.push("Bob noise power must be positive".to_string());
        }
        if !(self.sigma_eve_sq.is_finite() && self.sigma_eve_sq > 0.0) {
            out.push("Eve noise power must be positive".to_string());
        }
        for (name, v) in [
            ("RIS noise power", self.sigma_ris_sq),
            ("P_c,n", self.element_power),
            ("P0_RIS", self.ris_static_power),
            ("P0", self.static_power),
            ("P_R,max", self.ris_rf_max),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                out.push(format!("{name} must be nonnegative"));
            }
        }
        if self.ris_mode == RisMode::NearlyPassive {
            if self.sigma_ris_sq != 0.0 {
                out.push("nearly-passive RIS requires zero RIS noise power".to_string());
            }
            if self.ris_rf_max != 0.0 {
                out.push("nearly-passive RIS requires P_R,max = 0".to_string());
            }
        }
        let prop = &self.propagation;
        if !(prop.ref_gain > 0.0 && prop.ref_gain.is_finite()) {
            out.push("reference gain must be positive".to_string());
        }
        if !(prop.user_exponent > 0.0 && prop.ris_exponent > 0.0) {
            out.push("pathloss exponents must be positive".to_string());
        }
        if !(prop.bob_k_factor >= 0.0 && prop.k_factor >= 0.0) {
            out.push("Rician factors must be nonnegative".to_string());
        }
        if !(prop.csi_error_ratio >= 0.0 && prop.csi_error_ratio.is_finite()) {
            out.push("CSI error ratio must be nonnegative".to_string());
        }
        if !(prop.min_user_distance >= 1.0 && prop.min_user_distance < prop.cell_radius) {
            out.push("need 1 m <= minimum user distance < cell radius".to_string());
        }
        if !(prop.max_user_height >= 0.0 && prop.ris_height - prop.max_user_height < prop.cell_radius) {
            out.push("user heights incompatible with the cell radius".to_string());
        }
        if !(prop.bob_distance >= 1.0 && prop.eve_radius >= 0.0) {
            out.push("Bob distance must be at least 1 m and Eve radius nonnegative".to_string());
        }
        if (prop.ris_height - prop.eve_height).abs() < 1.0 && prop.eve_radius + 1.0 > prop.bob_distance {
            out.push("Eve may come closer than 1 m to the RIS".to_string());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v.join("; ")))
        }
    }
}

/// Decision variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub p: DVector<f64>,
    pub gamma: DVector<C64>,
    /// N_B × K, column k is c_{k,B}.
    pub filters: DMatrix<C64>,
}

impl Allocation {
    /// Violations of the power box, the RIS power constraint and the filter
    /// invariant. `rel_slack` is relative to the magnitude of each bound.
    pub fn violations(&self, channels: &ChannelSet, cfg: &SystemConfig, rel_slack: f64) -> Vec<String> {
        let mut out = Vec::new();
        for (k, (&p, &pmax)) in self.p.iter().zip(&cfg.p_max).enumerate() {
            if !(p >= 0.0 && p <= pmax) {
                out.push(format!("p[{k}] = {p} outside [0, {pmax}]"));
            }
        }
        let load = ris_load(&self.p, channels, cfg);
        let trace: f64 = load.sum();
        let quad: f64 = load.iter().zip(self.gamma.iter()).map(|(r, g)| r * g.norm_sqr()).sum();
        let scale = trace + cfg.ris_rf_max;
        let tol = rel_slack * scale.max(f64::MIN_POSITIVE);
        match cfg.ris_mode {
            RisMode::Active => {
                if quad < trace - tol {
                    out.push(format!("RIS output power {quad} below incident {trace}"));
                }
                if quad > cfg.ris_rf_max + trace + tol {
                    out.push(format!("RIS amplifier power {} above P_R,max {}", quad - trace, cfg.ris_rf_max));
                }
            }
            RisMode::NearlyPassive => {
                if quad > trace + tol {
                    out.push(format!("nearly-passive RIS output {quad} above incident {trace}"));
                }
            }
        }
        for k in 0..self.filters.ncols() {
            if self.filters.column(k).iter().all(|z| *z == C64::new(0.0, 0.0)) {
                out.push(format!("filter {k} is zero"));
            }
        }
        out
    }
}

/// Dense versions of the model matrices, mainly for inspection and
/// cross-checks. The optimizers use structured forms instead.
#[derive(Debug, Clone)]
pub struct DerivedMatrices {
    /// H_k = diag(h_k)
    pub h_diag: Vec<DMatrix<C64>>,
    /// A_{k,B} = G_B H_k
    pub cascades: Vec<DMatrix<C64>>,
    /// Diagonal of R = Σ p_k H_kᴴ H_k + σ²_RIS I.
    pub load: DVector<f64>,
    /// R_E = ĝ_E ĝ_Eᴴ + σ_g² I
    pub eve_cov: DMatrix<C64>,
    pub noise_cov: DMatrix<C64>,
}

impl DerivedMatrices {
    pub fn new(p: &DVector<f64>, gamma: &DVector<C64>, channels: &ChannelSet, cfg: &SystemConfig) -> Self {
        let h_diag: Vec<_> = channels.h.iter().map(DMatrix::from_diagonal).collect();
        let cascades = h_diag.iter().map(|h| &channels.g_bob * h).collect();
        let ghat = &channels.g_eve_hat;
        let n = ghat.len();
        let eve_cov = ghat * ghat.adjoint()
            + DMatrix::<C64>::identity(n, n) * C64::new(channels.sigma_g_sq, 0.0);
        Self {
            h_diag,
            cascades,
            load: ris_load(p, channels, cfg),
            eve_cov,
            noise_cov: noise_cov_bob(gamma, &channels.g_bob, cfg),
        }
    }
}

/// A_{k,B} γ = G_B (h_k ∘ γ)
pub fn cascade(k: usize, gamma: &DVector<C64>, channels: &ChannelSet) -> DVector<C64> {
    &channels.g_bob * channels.h[k].component_mul(gamma)
}

/// W_B = σ²_B I + σ²_RIS G_B Γ Γᴴ G_Bᴴ
pub fn noise_cov_bob(gamma: &DVector<C64>, g_bob: &DMatrix<C64>, cfg: &SystemConfig) -> DMatrix<C64> {
    let nb = g_bob.nrows();
    let mut scaled = g_bob.clone();
    for (mut col, g) in scaled.column_iter_mut().zip(gamma.iter()) {
        col *= *g;
    }
    DMatrix::<C64>::identity(nb, nb) * C64::new(cfg.sigma_bob_sq, 0.0)
        + &scaled * scaled.adjoint() * C64::new(cfg.sigma_ris_sq, 0.0)
}

/// cᴴ W_B c written through γ: σ²_B‖c‖² + σ²_RIS Σ_n |u_n|² |γ_n|² with
/// u = G_Bᴴ c.
pub fn noise_quad_bob(c: &DVector<C64>, gamma: &DVector<C64>, g_bob: &DMatrix<C64>, cfg: &SystemConfig) -> f64 {
    let u = g_bob.ad_mul(c);
    let ris: f64 = u.iter().zip(gamma.iter()).map(|(u, g)| u.norm_sqr() * g.norm_sqr()).sum();
    cfg.sigma_bob_sq * c.norm_squared() + cfg.sigma_ris_sq * ris
}

pub fn sinr_bob(k: usize, alloc: &Allocation, channels: &ChannelSet, cfg: &SystemConfig) -> Result<f64> {
    let c = alloc.filters.column(k).into_owned();
    let gamma = &alloc.gamma;
    let mut signal = 0.0;
    let mut interference = 0.0;
    for m in 0..channels.users() {
        let power = alloc.p[m] * c.dotc(&cascade(m, gamma, channels)).norm_sqr();
        if m == k {
            signal = power;
        } else {
            interference += power;
        }
    }
    let denom = noise_quad_bob(&c, gamma, &channels.g_bob, cfg) + interference;
    if !(denom > 0.0) {
        return Err(Error::Numeric(format!("SINR denominator {denom} for user {k}")));
    }
    Ok(signal / denom)
}

/// Eve's SINR for user `k` over the actual channel `g_E`.
pub fn sinr_eve_true(k: usize, p: &DVector<f64>, gamma: &DVector<C64>, channels: &ChannelSet, cfg: &SystemConfig) -> f64 {
    let g = &channels.g_eve_true;
    let mut signal = 0.0;
    let mut interference = 0.0;
    for m in 0..channels.users() {
        let power = p[m] * g.dotc(&channels.h[m].component_mul(gamma)).norm_sqr();
        if m == k {
            signal = power;
        } else {
            interference += power;
        }
    }
    let ris_noise: f64 = g.iter().zip(gamma.iter()).map(|(g, x)| g.norm_sqr() * x.norm_sqr()).sum();
    signal / (cfg.sigma_eve_sq + cfg.sigma_ris_sq * ris_noise + interference)
}

/// R_E = ĝ ĝᴴ + σ_g² I, kept in rank-one-plus-identity form.
#[derive(Debug, Clone)]
pub struct EveCovariance {
    pub mean: DVector<C64>,
    pub error_var: f64,
}

impl EveCovariance {
    pub fn from_channels(channels: &ChannelSet) -> Self {
        Self {
            mean: channels.g_eve_hat.clone(),
            error_var: channels.sigma_g_sq,
        }
    }

    /// ‖R_E^{1/2} x‖² = xᴴ R_E x
    pub fn quad(&self, x: &DVector<C64>) -> f64 {
        self.mean.dotc(x).norm_sqr() + self.error_var * x.norm_squared()
    }

    /// E_δ[g_Eᴴ Γ Γᴴ g_E] = Σ_n (|ĝ_n|² + σ_g²) |γ_n|², the Eve-side RIS
    /// noise gain. The amplifier noise is independent per element, so
    /// this is a diagonal form.
    pub fn ris_noise_gain(&self, gamma: &DVector<C64>) -> f64 {
        self.mean
            .iter()
            .zip(gamma.iter())
            .map(|(g, x)| (g.norm_sqr() + self.error_var) * x.norm_sqr())
            .sum()
    }

    /// Diagonal of the form in [`EveCovariance::ris_noise_gain`].
    pub fn ris_noise_diag(&self) -> DVector<f64> {
        self.mean.map(|g| g.norm_sqr() + self.error_var)
    }

    pub fn dense(&self) -> DMatrix<C64> {
        let n = self.mean.len();
        &self.mean * self.mean.adjoint() + DMatrix::<C64>::identity(n, n) * C64::new(self.error_var, 0.0)
    }
}

/// Eve's SINR with the expectation over the CSI error moved inside the log.
pub fn sinr_eve_approx(
    k: usize,
    p: &DVector<f64>,
    gamma: &DVector<C64>,
    eve: &EveCovariance,
    channels: &ChannelSet,
    cfg: &SystemConfig,
) -> f64 {
    let mut signal = 0.0;
    let mut interference = 0.0;
    for m in 0..channels.users() {
        let power = p[m] * eve.quad(&channels.h[m].component_mul(gamma));
        if m == k {
            signal = power;
        } else {
            interference += power;
        }
    }
    signal / (interference + cfg.sigma_ris_sq * eve.ris_noise_gain(gamma) + cfg.sigma_eve_sq)
}

/// Diagonal of R = Σ_k p_k H_kᴴ H_k + σ²_RIS I.
pub fn ris_load(p: &DVector<f64>, channels: &ChannelSet, cfg: &SystemConfig) -> DVector<f64> {
    let n = channels.ris_elements();
    let mut load = DVector::from_element(n, cfg.sigma_ris_sq);
    for (h, &pk) in channels.h.iter().zip(p.iter()) {
        for (r, z) in load.iter_mut().zip(h.iter()) {
            *r += pk * z.norm_sqr();
        }
    }
    load
}

/// P_out − P_in = tr((γγᴴ − I) R) = γᴴ R γ − tr(R).
pub fn ris_rf_power(p: &DVector<f64>, gamma: &DVector<C64>, channels: &ChannelSet, cfg: &SystemConfig) -> f64 {
    ris_load(p, channels, cfg)
        .iter()
        .zip(gamma.iter())
        .map(|(r, g)| r * (g.norm_sqr() - 1.0))
        .sum()
}

/// P_out − P_in summed term by term: Σ_k p_k‖Γh_k‖² + σ²_RIS‖γ‖² −
/// Σ_k p_k‖h_k‖² − σ²_RIS N.
pub fn ris_rf_power_expanded(p: &DVector<f64>, gamma: &DVector<C64>, channels: &ChannelSet, cfg: &SystemConfig) -> f64 {
    let out: f64 = channels
        .h
        .iter()
        .zip(p.iter())
        .map(|(h, pk)| pk * h.component_mul(gamma).norm_squared())
        .sum::<f64>()
        + cfg.sigma_ris_sq * gamma.norm_squared();
    let incident: f64 = channels
        .h
        .iter()
        .zip(p.iter())
        .map(|(h, pk)| pk * h.norm_squared())
        .sum::<f64>()
        + cfg.sigma_ris_sq * gamma.len() as f64;
    out - incident
}

/// P_tot. A nearly-passive RIS draws no RF power.
pub fn total_power(p: &DVector<f64>, gamma: &DVector<C64>, channels: &ChannelSet, cfg: &SystemConfig) -> f64 {
    let rf = match cfg.ris_mode {
        RisMode::Active => ris_rf_power(p, gamma, channels, cfg),
        RisMode::NearlyPassive => 0.0,
    };
    let tx: f64 = p.iter().zip(&cfg.mu).map(|(p, mu)| p * mu).sum();
    rf + tx + cfg.circuit_power()
}

/// Σ_k ln(1 + SINR_B) − ln(1 + SINR_E), no positive part, nats per Hz.
pub fn secrecy_nats(
    p: &DVector<f64>,
    gamma: &DVector<C64>,
    filters: &DMatrix<C64>,
    channels: &ChannelSet,
    cfg: &SystemConfig,
    eve: EveModel,
) -> Result<f64> {
    let alloc = Allocation {
        p: p.clone(),
        gamma: gamma.clone(),
        filters: filters.clone(),
    };
    let eve_cov = EveCovariance::from_channels(channels);
    let mut total = 0.0;
    for k in 0..channels.users() {
        let bob = sinr_bob(k, &alloc, channels, cfg)?;
        let leak = match eve {
            EveModel::True => sinr_eve_true(k, p, gamma, channels, cfg),
            EveModel::Approx => sinr_eve_approx(k, p, gamma, &eve_cov, channels, cfg),
        };
        total += bob.ln_1p() - leak.ln_1p();
    }
    Ok(total)
}

fn nats_to_bits_per_second(nats: f64, cfg: &SystemConfig) -> f64 {
    cfg.bandwidth * nats / LN_2
}

/// Secrecy rate in bit/s without the outer positive part.
pub fn secrecy_rate_unclamped(
    p: &DVector<f64>,
    gamma: &DVector<C64>,
    filters: &DMatrix<C64>,
    channels: &ChannelSet,
    cfg: &SystemConfig,
    eve: EveModel,
) -> Result<f64> {
    Ok(nats_to_bits_per_second(secrecy_nats(p, gamma, filters, channels, cfg, eve)?, cfg))
}

/// R_s = B max(0, Σ_k log2(1 + SINR_B) − log2(1 + SINR_E)) in bit/s.
pub fn secrecy_rate(
    p: &DVector<f64>,
    gamma: &DVector<C64>,
    filters: &DMatrix<C64>,
    channels: &ChannelSet,
    cfg: &SystemConfig,
    eve: EveModel,
) -> Result<f64> {
    Ok(secrecy_rate_unclamped(p, gamma, filters, channels, cfg, eve)?.max(0.0))
}

/// Secrecy energy efficiency in bit/J.
pub fn see(
    p: &DVector<f64>,
    gamma: &DVector<C64>,
    filters: &DMatrix<C64>,
    channels: &ChannelSet,
    cfg: &SystemConfig,
    eve: EveModel,
) -> Result<f64> {
    Ok(secrecy_rate(p, gamma, filters, channels, cfg, eve)? / total_power(p, gamma, channels, cfg))
}

/// The quantity the optimizers push up, in internal units: nats per joule
/// per Hz for [`Objective::Efficiency`], nats per Hz for
/// [`Objective::SecrecyRate`]. Eve enters through the approximate SINR.
pub fn objective_value(alloc: &Allocation, channels: &ChannelSet, cfg: &SystemConfig, objective: Objective) -> Result<f64> {
    let rate = secrecy_nats(&alloc.p, &alloc.gamma, &alloc.filters, channels, cfg, EveModel::Approx)?;
    Ok(match objective {
        Objective::Efficiency => rate / total_power(&alloc.p, &alloc.gamma, channels, cfg),
        Objective::SecrecyRate => rate,
    })
}

/// Converts an internal objective value to bit/J or bit/s.
pub fn objective_to_bits(value: f64, cfg: &SystemConfig) -> f64 {
    nats_to_bits_per_second(value, cfg)
}

fn interference_plus_noise(k: usize, p: &DVector<f64>, gamma: &DVector<C64>, channels: &ChannelSet, cfg: &SystemConfig) -> DMatrix<C64> {
    let mut m = noise_cov_bob(gamma, &channels.g_bob, cfg);
    for j in (0..channels.users()).filter(|&j| j != k) {
        let v = cascade(j, gamma, channels);
        m += &v * v.adjoint() * C64::new(p[j], 0.0);
    }
    m
}

/// Linear MMSE receivers c_k = √p_k M_k⁻¹ A_k γ.
///
/// Users with zero power get the unscaled direction M_k⁻¹ A_k γ; a zero
/// direction (γ = 0) is replaced by the first unit vector. Neither choice
/// changes any SINR.
pub fn mmse_filters(p: &DVector<f64>, gamma: &DVector<C64>, channels: &ChannelSet, cfg: &SystemConfig) -> Result<DMatrix<C64>> {
    let k_users = channels.users();
    let nb = channels.g_bob.nrows();
    let mut filters = DMatrix::zeros(nb, k_users);
    for k in 0..k_users {
        let m = interference_plus_noise(k, p, gamma, channels, cfg);
        let chol = Cholesky::new(m)
            .ok_or_else(|| Error::Numeric(format!("interference-plus-noise matrix of user {k} is not positive definite")))?;
        let mut c = chol.solve(&cascade(k, gamma, channels));
        if p[k] > 0.0 {
            c *= C64::new(p[k].sqrt(), 0.0);
        }
        if c.iter().all(|z| z.norm_sqr() == 0.0) {
            c = DVector::zeros(nb);
            c[0] = C64::new(1.0, 0.0);
        }
        filters.set_column(k, &c);
    }
    Ok(filters)
}

/// SINR reached by the MMSE filter: p_k (A_k γ)ᴴ M_k⁻¹ (A_k γ).
pub fn mmse_sinr(k: usize, p: &DVector<f64>, gamma: &DVector<C64>, channels: &ChannelSet, cfg: &SystemConfig) -> Result<f64> {
    let m = interference_plus_noise(k, p, gamma, channels, cfg);
    let v = cascade(k, gamma, channels);
    let chol = Cholesky::new(m).ok_or_else(|| Error::Numeric("M_k not positive definite".into()))?;
    Ok(p[k] * v.dotc(&chol.solve(&v)).re)
}

/// Unit-modulus γ with uniform random phases.
pub fn random_unit_modulus<R: rand::Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<C64> {
    DVector::from_fn(n, |_, _| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * rng.random::<f64>()))
}
