//! Network geometry and Rician-faded channel realizations.
//!
//! The RIS sits at the origin (at `ris_height`), Bob on the x-axis at a
//! fixed horizontal distance, users in an annulus around the RIS and Eve
//! anywhere inside a disc centred on Bob. Every channel is Rician with a
//! distance-based power law for its mean power.

use std::collections::hash_map::DefaultHasher;
use std::f64::consts::PI;
use std::hash::{Hash, Hasher};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::model::{CsiMode, SystemConfig};
use crate::{Error, Result, C64};

pub type Point = [f64; 3];

/// Converts a power in dBm to watts.
pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watt_to_dbm(watt: f64) -> f64 {
    10.0 * watt.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Thermal noise power in watts for a noise spectral density (dBm/Hz), a
/// receiver noise figure (dB) and a bandwidth (Hz).
pub fn noise_power(psd_dbm_hz: f64, noise_figure_db: f64, bandwidth: f64) -> f64 {
    dbm_to_watt(psd_dbm_hz + noise_figure_db) * bandwidth
}

/// Distance power law `ref_gain * d^-exponent`, with `ref_gain` the gain at
/// the 1 m reference distance.
pub fn pathloss(distance: f64, exponent: f64, ref_gain: f64) -> Result<f64> {
    if !(distance >= 1.0) {
        return Err(Error::Domain(format!(
            "pathloss distance {distance} m is below the 1 m reference"
        )));
    }
    Ok(ref_gain * distance.powf(-exponent))
}

/// Large-scale propagation and placement parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagation {
    /// Gain at 1 m (linear).
    pub ref_gain: f64,
    /// Power decay exponent of the user→RIS links.
    pub user_exponent: f64,
    /// Power decay exponent of the RIS→Bob and RIS→Eve links.
    pub ris_exponent: f64,
    /// Rician factor of the RIS→Bob link.
    pub bob_k_factor: f64,
    /// Rician factor of the user→RIS and RIS→Eve links.
    pub k_factor: f64,
    /// Eve CSI error variance as a fraction of the mean per-entry power of
    /// the known RIS→Eve channel.
    pub csi_error_ratio: f64,
    pub cell_radius: f64,
    pub min_user_distance: f64,
    pub bob_distance: f64,
    pub eve_radius: f64,
    pub ris_height: f64,
    pub bob_height: f64,
    pub eve_height: f64,
    pub max_user_height: f64,
}

impl Default for Propagation {
    fn default() -> Self {
        Self {
            ref_gain: db_to_linear(-30.0),
            user_exponent: 4.0,
            ris_exponent: 2.0,
            bob_k_factor: 4.0,
            k_factor: 2.0,
            csi_error_ratio: 0.5,
            cell_radius: 30.0,
            min_user_distance: 20.0,
            bob_distance: 20.0,
            eve_radius: 30.0,
            ris_height: 10.0,
            bob_height: 10.0,
            eve_height: 1.5,
            max_user_height: 2.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub user_positions: Vec<Point>,
    pub ris_position: Point,
    pub bob_position: Point,
    pub eve_position: Point,
}

pub fn distance(a: &Point, b: &Point) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

pub fn horizontal_distance(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn uniform_in_disc<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> (f64, f64) {
    let r = radius * rng.random::<f64>().sqrt();
    let phi = 2.0 * PI * rng.random::<f64>();
    (r * phi.cos(), r * phi.sin())
}

/// Draws a geometry by rejection sampling.
///
/// Users are uniform in the disc of radius `cell_radius` around the RIS with
/// heights uniform in `[0, max_user_height]`, and are kept only when their
/// 3-D distance to the RIS lies in `[min_user_distance, cell_radius]`.
pub fn generate_geometry<R: Rng + ?Sized>(rng: &mut R, cfg: &SystemConfig) -> Geometry {
    let prop = &cfg.propagation;
    let ris_position = [0.0, 0.0, prop.ris_height];
    let bob_position = [prop.bob_distance, 0.0, prop.bob_height];

    let mut user_positions = Vec::with_capacity(cfg.users);
    while user_positions.len() < cfg.users {
        let (x, y) = uniform_in_disc(rng, prop.cell_radius);
        let z = prop.max_user_height * rng.random::<f64>();
        let candidate = [x, y, z];
        let d = distance(&candidate, &ris_position);
        if d >= prop.min_user_distance && d <= prop.cell_radius {
            user_positions.push(candidate);
        }
    }

    let (ex, ey) = uniform_in_disc(rng, prop.eve_radius);
    let eve_position = [bob_position[0] + ex, bob_position[1] + ey, prop.eve_height];

    Geometry {
        user_positions,
        ris_position,
        bob_position,
        eve_position,
    }
}

pub(crate) fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Rician fading matrix with mean entry power `gain`.
///
/// The LOS part has unit-modulus entries with uniform random phases drawn
/// once per call; the scattered part is i.i.d. CN(0, 1).
pub fn rician<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    k_factor: f64,
    gain: f64,
) -> DMatrix<C64> {
    let los_weight = (k_factor / (k_factor + 1.0)).sqrt();
    let nlos_weight = (1.0 / (k_factor + 1.0)).sqrt();
    let amplitude = gain.sqrt();
    let los: Vec<C64> = (0..rows * cols)
        .map(|_| C64::from_polar(1.0, 2.0 * PI * rng.random::<f64>()))
        .collect();
    let mut out = DMatrix::zeros(rows, cols);
    // column-major fill
    for (idx, entry) in out.iter_mut().enumerate() {
        let scattered = complex_gaussian(rng);
        *entry = (los[idx] * los_weight + scattered * nlos_weight) * amplitude;
    }
    out
}

/// One channel realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// User→RIS vectors, one per user, each of length N.
    pub h: Vec<DVector<C64>>,
    /// RIS→Bob, N_B × N.
    pub g_bob: DMatrix<C64>,
    /// Actual RIS→Eve channel.
    pub g_eve_true: DVector<C64>,
    /// RIS→Eve channel mean known to the legitimate system.
    pub g_eve_hat: DVector<C64>,
    /// Per-entry variance of the Eve CSI error.
    pub sigma_g_sq: f64,
}

impl ChannelSet {
    pub fn users(&self) -> usize {
        self.h.len()
    }

    pub fn ris_elements(&self) -> usize {
        self.g_bob.ncols()
    }

    /// Same drop as seen by a system that knows Eve's channel exactly.
    pub fn perfect_view(&self) -> ChannelSet {
        ChannelSet {
            g_eve_hat: self.g_eve_true.clone(),
            sigma_g_sq: 0.0,
            ..self.clone()
        }
    }

    /// The view of this drop used when optimizing under `mode`.
    pub fn for_csi(&self, mode: CsiMode) -> ChannelSet {
        match mode {
            CsiMode::Statistical => self.clone(),
            CsiMode::Perfect => self.perfect_view(),
        }
    }

    /// Hash of the bit patterns of every entry, for common-random-number
    /// bookkeeping.
    pub fn fingerprint(&self) -> u64 {
        let mut hasher = DefaultHasher::new();
        let mut feed = |z: &C64| {
            z.re.to_bits().hash(&mut hasher);
            z.im.to_bits().hash(&mut hasher);
        };
        self.h.iter().flat_map(|v| v.iter()).for_each(&mut feed);
        self.g_bob.iter().for_each(&mut feed);
        self.g_eve_true.iter().for_each(&mut feed);
        self.g_eve_hat.iter().for_each(&mut feed);
        self.sigma_g_sq.to_bits().hash(&mut hasher);
        hasher.finish()
    }

    pub fn is_finite(&self) -> bool {
        let ok = |z: &C64| z.re.is_finite() && z.im.is_finite();
        self.h.iter().all(|v| v.iter().all(ok))
            && self.g_bob.iter().all(ok)
            && self.g_eve_true.iter().all(ok)
            && self.g_eve_hat.iter().all(ok)
            && self.sigma_g_sq.is_finite()
    }
}

/// Draws all channels of one drop for the given geometry.
pub fn generate_channels<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &SystemConfig,
    geo: &Geometry,
) -> Result<ChannelSet> {
    let prop = &cfg.propagation;
    let n = cfg.ris_elements;

    let mut h = Vec::with_capacity(cfg.users);
    for user in &geo.user_positions {
        let gain = pathloss(
            distance(user, &geo.ris_position),
            prop.user_exponent,
            prop.ref_gain,
        )?;
        h.push(rician(rng, n, 1, prop.k_factor, gain).column(0).into_owned());
    }

    let bob_gain = pathloss(
        distance(&geo.ris_position, &geo.bob_position),
        prop.ris_exponent,
        prop.ref_gain,
    )?;
    let g_bob = rician(rng, cfg.bob_antennas, n, prop.bob_k_factor, bob_gain);

    let eve_gain = pathloss(
        distance(&geo.ris_position, &geo.eve_position),
        prop.ris_exponent,
        prop.ref_gain,
    )?;
    let g_eve_hat = rician(rng, n, 1, prop.k_factor, eve_gain)
        .column(0)
        .into_owned();

    let sigma_g_sq = match cfg.csi_mode {
        CsiMode::Perfect => 0.0,
        CsiMode::Statistical => prop.csi_error_ratio * eve_gain,
    };
    // drawn in both modes so the stream stays aligned
    let sigma_g = sigma_g_sq.sqrt();
    let g_eve_true = DVector::from_iterator(
        n,
        g_eve_hat
            .iter()
            .map(|g| *g + complex_gaussian(rng) * sigma_g)
            .collect::<Vec<_>>(),
    );

    Ok(ChannelSet {
        h,
        g_bob,
        g_eve_true,
        g_eve_hat,
        sigma_g_sq,
    })
}

/// Generator for drop `index` of a run seeded with `master_seed`.
///
/// Each drop gets its own ChaCha stream, so drops can be drawn in any order
/// or in parallel and still be reproducible.
pub fn drop_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Geometry and channels of drop `index`.
pub fn draw_drop(master_seed: u64, index: u64, cfg: &SystemConfig) -> Result<(Geometry, ChannelSet)> {
    let mut rng = drop_rng(master_seed, index);
    let geo = generate_geometry(&mut rng, cfg);
    let channels = generate_channels(&mut rng, cfg, &geo)?;
    Ok((geo, channels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn desk() -> SystemConfig {
        SystemConfig::desk()
    }

    #[test]
    fn dbm_conversions() {
        assert_relative_eq!(dbm_to_watt(30.0), 1.0);
        assert_relative_eq!(dbm_to_watt(0.0), 1e-3);
        assert_relative_eq!(watt_to_dbm(1e-3), 0.0, epsilon = 1e-12);
        // -174 dBm/Hz + 5 dB over 20 MHz: 10^-16.9 mW/Hz * 2e7 Hz
        assert_relative_eq!(noise_power(-174.0, 5.0, 20e6), 2.5178508235883427e-13, max_relative = 1e-12);
    }

    #[test]
    fn pathloss_power_law() {
        assert_relative_eq!(pathloss(1.0, 3.3, 1e-3).unwrap(), 1e-3);
        assert_relative_eq!(pathloss(10.0, 2.0, 1e-3).unwrap(), 1e-5, max_relative = 1e-14);
        assert_relative_eq!(pathloss(20.0, 4.0, 1e-3).unwrap(), 6.25e-9, max_relative = 1e-14);
        assert!(matches!(pathloss(0.5, 2.0, 1e-3), Err(Error::Domain(_))));
    }

    #[test]
    fn geometry_is_deterministic() {
        let cfg = desk();
        let a = generate_geometry(&mut drop_rng(7, 3), &cfg);
        let b = generate_geometry(&mut drop_rng(7, 3), &cfg);
        assert_eq!(a, b);
        let c = generate_geometry(&mut drop_rng(7, 4), &cfg);
        assert_ne!(a, c);
    }

    #[test]
    fn geometry_invariants_hold_on_many_draws() {
        let cfg = desk();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let geo = generate_geometry(&mut rng, &cfg);
            assert_eq!(geo.user_positions.len(), cfg.users);
            for u in &geo.user_positions {
                let d = distance(u, &geo.ris_position);
                assert!((20.0..=30.0 + 0.1).contains(&d), "user distance {d}");
                assert!(horizontal_distance(u, &geo.ris_position) <= 30.0);
                assert!((0.0..=2.5).contains(&u[2]));
            }
            assert_eq!(horizontal_distance(&geo.bob_position, &geo.ris_position), 20.0);
            assert!(horizontal_distance(&geo.eve_position, &geo.bob_position) <= 30.0);
            assert_eq!(geo.ris_position[2], 10.0);
            assert_eq!(geo.bob_position[2], 10.0);
        }
    }

    #[test]
    fn rayleigh_second_moment() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let gain = 3.7e-6;
        let m = rician(&mut rng, 100_000, 1, 0.0, gain);
        let mean_power = m.iter().map(|z| z.norm_sqr()).sum::<f64>() / m.len() as f64;
        assert!((mean_power / gain - 1.0).abs() < 0.02, "{mean_power}");
    }

    #[test]
    fn pure_los_limit_has_constant_modulus() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let gain = 2.0;
        let m = rician(&mut rng, 50, 4, 1e9, gain);
        for z in m.iter() {
            assert!((z.norm() / gain.sqrt() - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn empirical_k_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        // recover the LOS phases by re-running the same stream
        let mut replay = ChaCha8Rng::seed_from_u64(9);
        let n = 100_000;
        let los: Vec<C64> = (0..n)
            .map(|_| C64::from_polar(1.0, 2.0 * PI * replay.random::<f64>()))
            .collect();
        let m = rician(&mut rng, n, 1, 4.0, 1.0);
        let derotated: Vec<C64> = m.iter().zip(&los).map(|(z, l)| z * l.conj()).collect();
        let mean = derotated.iter().sum::<C64>() / n as f64;
        let scattered = derotated.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / n as f64;
        let k_hat = mean.norm_sqr() / scattered;
        assert!((3.8..=4.2).contains(&k_hat), "K estimate {k_hat}");
    }

    #[test]
    fn channel_shapes_and_perfect_mode() {
        let mut cfg = desk();
        cfg.csi_mode = CsiMode::Perfect;
        let (_, ch) = draw_drop(1, 0, &cfg).unwrap();
        assert_eq!(ch.h.len(), cfg.users);
        assert!(ch.h.iter().all(|h| h.len() == cfg.ris_elements));
        assert_eq!(ch.g_bob.shape(), (cfg.bob_antennas, cfg.ris_elements));
        assert_eq!(ch.sigma_g_sq, 0.0);
        assert_eq!(ch.g_eve_true, ch.g_eve_hat);
        assert!(ch.is_finite());
    }

    #[test]
    fn drops_are_bit_identical_for_equal_seeds() {
        let cfg = desk();
        let (_, a) = draw_drop(42, 5, &cfg).unwrap();
        let (_, b) = draw_drop(42, 5, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.fingerprint(), b.fingerprint());
        let pv = a.perfect_view();
        assert_eq!(pv.g_eve_hat, a.g_eve_true);
        assert_eq!(pv.sigma_g_sq, 0.0);
    }

    #[test]
    fn csi_error_energy_matches_variance() {
        let cfg = desk();
        let n = cfg.ris_elements as f64;
        let draws = 10_000;
        let mut samples = Vec::with_capacity(draws);
        let mut sigma_sum = 0.0;
        for i in 0..draws {
            let (_, ch) = draw_drop(3, i as u64, &cfg).unwrap();
            let err = (&ch.g_eve_true - &ch.g_eve_hat).norm_squared();
            // normalise per drop since the variance depends on Eve's distance
            samples.push(err / (n * ch.sigma_g_sq));
            sigma_sum += ch.sigma_g_sq;
        }
        assert!(sigma_sum > 0.0);
        let mean = samples.iter().sum::<f64>() / draws as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        let se = (var / draws as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn channel_power_follows_pathloss() {
        let cfg = desk();
        let prop = &cfg.propagation;
        let draws = 2000;
        let mut ratio_sum = 0.0;
        let mut count = 0usize;
        for i in 0..draws {
            let (geo, ch) = draw_drop(17, i, &cfg).unwrap();
            for (h, u) in ch.h.iter().zip(&geo.user_positions) {
                let pl = pathloss(distance(u, &geo.ris_position), prop.user_exponent, prop.ref_gain).unwrap();
                ratio_sum += h.iter().map(|z| z.norm_sqr()).sum::<f64>() / (pl * h.len() as f64);
                count += 1;
            }
        }
        let mean = ratio_sum / count as f64;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
    }
}
