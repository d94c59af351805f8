//! Backscatter link budget for a monostatic reader.
//!
//! The received power is
//! `y = α·ρ_L·P_TX·|G_T·G_R·L(d)·Γ|²·|h|⁴` with free-space factor
//! `L(d) = λ/(4πd)`. With `round_trip_path_loss` set, `L(d)` is squared
//! inside the modulus, accounting for both traversals of the path.
//!
//! Reads whose power falls below the tag sensitivity (−84 dBm by default)
//! are missing reads and are represented as `None`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Tag sensitivity: weaker backscatter produces no RSSI report.
pub const MISSING_READ_THRESHOLD_DBM: f64 = -84.0;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) / 1000.0
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * (w * 1000.0).log10()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RfParams {
    /// Tag power-transfer efficiency, in [0, 1].
    pub alpha: f64,
    /// Polarization loss factor, in [0, 1].
    pub rho_l: f64,
    pub p_tx_dbm: f64,
    pub g_t_dbi: f64,
    pub g_r_dbi: f64,
    /// Differential reflection coefficient magnitude, in [0, 1].
    pub gamma: f64,
    pub freq_hz: f64,
    pub round_trip_path_loss: bool,
}

impl Default for RfParams {
    /// 31.5 dBm at 902 MHz through a 7.5 dBi reader antenna.
    fn default() -> Self {
        Self {
            alpha: 0.3,
            rho_l: 0.5,
            p_tx_dbm: 31.5,
            g_t_dbi: 2.0,
            g_r_dbi: 7.5,
            gamma: 0.5,
            freq_hz: 902e6,
            round_trip_path_loss: true,
        }
    }
}

impl RfParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("rho_l", self.rho_l), ("gamma", self.gamma)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::arg(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if !(self.freq_hz > 0.0 && self.freq_hz.is_finite()) {
            return Err(Error::arg(format!("frequency must be positive, got {}", self.freq_hz)));
        }
        for (name, v) in [
            ("p_tx_dbm", self.p_tx_dbm),
            ("g_t_dbi", self.g_t_dbi),
            ("g_r_dbi", self.g_r_dbi),
        ] {
            if !v.is_finite() {
                return Err(Error::arg(format!("{name} must be finite")));
            }
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.freq_hz
    }
}

/// Free-space amplitude factor `λ/(4πd)`.
pub fn path_loss(freq_hz: f64, d_m: f64) -> Result<f64> {
    if !(d_m > 0.0) || !d_m.is_finite() {
        return Err(Error::Domain(format!("distance must be positive, got {d_m}")));
    }
    if !(freq_hz > 0.0) || !freq_hz.is_finite() {
        return Err(Error::Domain(format!("frequency must be positive, got {freq_hz}")));
    }
    let lambda = SPEED_OF_LIGHT / freq_hz;
    Ok(lambda / (4.0 * std::f64::consts::PI * d_m))
}

/// Received backscatter power in watts.
pub fn backscatter_rx_power_w(rf: &RfParams, fading_h: f64, d_m: f64) -> Result<f64> {
    rf.validate()?;
    if !(fading_h >= 0.0) || !fading_h.is_finite() {
        return Err(Error::arg(format!("fading magnitude must be >= 0, got {fading_h}")));
    }
    let mut loss = path_loss(rf.freq_hz, d_m)?;
    if rf.round_trip_path_loss {
        loss *= loss;
    }
    let g_t = db_to_linear(rf.g_t_dbi);
    let g_r = db_to_linear(rf.g_r_dbi);
    let amp = g_t * g_r * loss * rf.gamma;
    let h2 = fading_h * fading_h;
    Ok(rf.alpha * rf.rho_l * dbm_to_watts(rf.p_tx_dbm) * amp * amp * h2 * h2)
}

/// Received backscatter power in dBm. A zero fading envelope yields `-inf`,
/// which downstream code treats as a missing read.
pub fn backscatter_rx_power(rf: &RfParams, fading_h: f64, d_m: f64) -> Result<f64> {
    let w = backscatter_rx_power_w(rf, fading_h, d_m)?;
    Ok(if w > 0.0 { watts_to_dbm(w) } else { f64::NEG_INFINITY })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Material {
    #[default]
    None,
    Wood,
    Plastic,
    Glass,
    Wall,
}

impl Material {
    pub const ALL: [Material; 5] = [
        Material::None,
        Material::Wood,
        Material::Plastic,
        Material::Glass,
        Material::Wall,
    ];

    /// Calibrated attenuation when a tag is mounted on this substrate.
    pub fn default_offset_db(self) -> f64 {
        match self {
            Material::None => 0.0,
            Material::Wood => -2.0,
            Material::Plastic => -1.0,
            Material::Glass => -1.0,
            Material::Wall => -12.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Material::None => "none",
            Material::Wood => "wood",
            Material::Plastic => "plastic",
            Material::Glass => "glass",
            Material::Wall => "wall",
        }
    }
}

impl fmt::Display for Material {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Material {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Material::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::arg(format!("unknown material {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialProfile {
    pub material: Material,
    pub offset_db: f64,
}

impl MaterialProfile {
    pub fn new(material: Material, offset_db: f64) -> Result<Self> {
        if !offset_db.is_finite() {
            return Err(Error::arg("material offset must be finite"));
        }
        if material != Material::None && offset_db > 0.0 {
            return Err(Error::arg(format!(
                "material {material} offset must be <= 0 dB, got {offset_db}"
            )));
        }
        Ok(Self {
            material,
            offset_db,
        })
    }
}

impl From<Material> for MaterialProfile {
    fn from(material: Material) -> Self {
        Self {
            material,
            offset_db: material.default_offset_db(),
        }
    }
}

/// Adds the substrate offset; anything below −84 dBm becomes a missing read.
pub fn apply_material(rss_dbm: f64, profile: &MaterialProfile) -> Option<f64> {
    apply_material_at(rss_dbm, profile, MISSING_READ_THRESHOLD_DBM)
}

pub fn apply_material_at(rss_dbm: f64, profile: &MaterialProfile, threshold_dbm: f64) -> Option<f64> {
    censor(rss_dbm + profile.offset_db, threshold_dbm)
}

/// `None` for non-finite values and values below the sensitivity threshold.
pub fn censor(rss_dbm: f64, threshold_dbm: f64) -> Option<f64> {
    (rss_dbm.is_finite() && rss_dbm >= threshold_dbm).then_some(rss_dbm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FadingKind {
    DeterministicLos,
    RayleighNlos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FadingModel {
    pub kind: FadingKind,
    pub h_fixed: f64,
    pub seed: u64,
}

impl FadingModel {
    pub fn los(h_fixed: f64) -> Self {
        Self {
            kind: FadingKind::DeterministicLos,
            h_fixed,
            seed: 0,
        }
    }

    pub fn rayleigh(seed: u64) -> Self {
        Self {
            kind: FadingKind::RayleighNlos,
            h_fixed: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h_fixed >= 0.0) || !self.h_fixed.is_finite() {
            return Err(Error::arg(format!("h_fixed must be >= 0, got {}", self.h_fixed)));
        }
        Ok(())
    }

    /// Fresh RNG stream for this model's seed.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

impl Default for FadingModel {
    fn default() -> Self {
        Self::los(1.0)
    }
}

/// Draws one fading envelope. Rayleigh draws have `E[h²] = 1`.
pub fn sample_fading<R: Rng + ?Sized>(model: &FadingModel, rng: &mut R) -> f64 {
    match model.kind {
        FadingKind::DeterministicLos => model.h_fixed,
        FadingKind::RayleighNlos => {
            // |h|² of a unit-power circular Gaussian is Exp(1).
            let power: f64 = Exp1.sample(rng);
            power.sqrt()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    High,
    Low,
}

/// Reader-to-tag pulse-interval schedule: `0` is a `T` pulse then a `2T`
/// space, `1` is a `2T` pulse then a `T` space.
pub fn pie_encode(bits: &[bool], t_unit: f64) -> Result<Vec<(Level, f64)>> {
    if !(t_unit > 0.0) || !t_unit.is_finite() {
        return Err(Error::arg(format!("PIE time unit must be positive, got {t_unit}")));
    }
    Ok(bits
        .iter()
        .flat_map(|&b| {
            let (hi, lo) = if b { (2.0, 1.0) } else { (1.0, 2.0) };
            [(Level::High, hi * t_unit), (Level::Low, lo * t_unit)]
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn unity() -> RfParams {
        RfParams {
            alpha: 1.0,
            rho_l: 1.0,
            p_tx_dbm: 30.0,
            g_t_dbi: 0.0,
            g_r_dbi: 0.0,
            gamma: 1.0,
            freq_hz: 902e6,
            round_trip_path_loss: false,
        }
    }

    #[test]
    fn path_loss_is_unity_at_lambda_over_four_pi() {
        let f = 902e6;
        let d = SPEED_OF_LIGHT / f / (4.0 * std::f64::consts::PI);
        assert_relative_eq!(path_loss(f, d).unwrap(), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn path_loss_rejects_nonpositive_distance() {
        assert!(matches!(path_loss(902e6, 0.0), Err(Error::Domain(_))));
        assert!(matches!(path_loss(902e6, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn unity_factors_reduce_to_tx_times_loss_squared() {
        let rf = unity();
        for d in [0.5, 2.0, 7.3] {
            let want = rf.p_tx_dbm + 20.0 * path_loss(rf.freq_hz, d).unwrap().log10();
            assert_relative_eq!(backscatter_rx_power(&rf, 1.0, d).unwrap(), want, max_relative = 1e-12);
        }
    }

    #[test]
    fn zero_fading_is_missing() {
        let p = backscatter_rx_power(&unity(), 0.0, 2.0).unwrap();
        assert_eq!(p, f64::NEG_INFINITY);
        assert_eq!(apply_material(p, &Material::None.into()), None);
    }

    #[test]
    fn invalid_params_rejected() {
        let mut rf = unity();
        rf.alpha = 1.5;
        assert!(backscatter_rx_power(&rf, 1.0, 2.0).is_err());
        let mut rf = unity();
        rf.freq_hz = 0.0;
        assert!(rf.validate().is_err());
        assert!(backscatter_rx_power(&unity(), -1.0, 2.0).is_err());
    }

    #[test]
    fn material_offsets() {
        assert_eq!(apply_material(-60.0, &Material::None.into()), Some(-60.0));
        let wall = MaterialProfile::new(Material::Wall, -10.0).unwrap();
        assert_eq!(apply_material(-80.0, &wall), None);
        let wood = MaterialProfile::new(Material::Wood, -2.0).unwrap();
        assert_eq!(apply_material(-60.0, &wood), Some(-62.0));
        assert!(MaterialProfile::new(Material::Glass, 1.0).is_err());
        // exactly at the threshold is still a read
        assert_eq!(apply_material(-84.0, &Material::None.into()), Some(-84.0));
    }

    #[test]
    fn default_material_ordering() {
        let off = |m: Material| m.default_offset_db();
        for m in [Material::Wood, Material::Plastic, Material::Glass] {
            assert!(off(Material::Wall) < off(m));
        }
        assert!((off(Material::Glass) - off(Material::Plastic)).abs() <= 1.0);
        assert_eq!("Wall".parse::<Material>().unwrap(), Material::Wall);
        assert!("metal".parse::<Material>().is_err());
    }

    #[test]
    fn deterministic_fading() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_fading(&FadingModel::los(1.0), &mut rng), 1.0);
        assert_eq!(sample_fading(&FadingModel::los(0.0), &mut rng), 0.0);
    }

    #[test]
    fn rayleigh_is_reproducible_with_unit_mean_square() {
        let model = FadingModel::rayleigh(42);
        let draw = |n: usize| {
            let mut rng = model.rng();
            (0..n).map(|_| sample_fading(&model, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(16), draw(16));
        let xs = draw(100_000);
        let ms = xs.iter().map(|h| h * h).sum::<f64>() / xs.len() as f64;
        assert_abs_diff_eq!(ms, 1.0, epsilon = 0.02);
        assert!(xs.iter().all(|&h| h >= 0.0));
    }

    #[test]
    fn pie_examples() {
        let t = 12.5e-6;
        assert_eq!(pie_encode(&[false], t).unwrap(), vec![(Level::High, t), (Level::Low, 2.0 * t)]);
        assert_eq!(pie_encode(&[true], t).unwrap(), vec![(Level::High, 2.0 * t), (Level::Low, t)]);
        assert!(pie_encode(&[], t).unwrap().is_empty());
        assert!(pie_encode(&[true], 0.0).is_err());
    }

    proptest! {
        #[test]
        fn path_loss_monotone(f in 1e8..6e9f64, d in 0.01..100.0f64, k in 1.001..10.0f64) {
            let base = path_loss(f, d).unwrap();
            prop_assert!(path_loss(f, d * k).unwrap() < base);
            // longer wavelength = lower frequency
            prop_assert!(path_loss(f / k, d).unwrap() > base);
            prop_assert!((path_loss(f, 2.0 * d).unwrap() - base / 2.0).abs() <= 1e-15 * base);
        }

        #[test]
        fn power_scales_as_h_to_the_fourth(d in 0.1..20.0f64, h in 0.01..3.0f64, rt: bool) {
            let rf = RfParams { round_trip_path_loss: rt, ..RfParams::default() };
            let p1 = backscatter_rx_power_w(&rf, h, d).unwrap();
            let p2 = backscatter_rx_power_w(&rf, 2.0 * h, d).unwrap();
            prop_assert!((p2 / p1 - 16.0).abs() < 1e-12);
        }

        #[test]
        fn power_nonincreasing_in_distance(d in 0.1..20.0f64, dd in 0.0..5.0f64, rt: bool) {
            let rf = RfParams { round_trip_path_loss: rt, ..RfParams::default() };
            prop_assert!(
                backscatter_rx_power(&rf, 1.0, d + dd).unwrap() <= backscatter_rx_power(&rf, 1.0, d).unwrap()
            );
        }

        #[test]
        fn pie_duration(bits in proptest::collection::vec(any::<bool>(), 0..64), t in 1e-6..1e-3f64) {
            let sched = pie_encode(&bits, t).unwrap();
            let total: f64 = sched.iter().map(|(_, d)| d).sum();
            prop_assert!((total - 3.0 * t * bits.len() as f64).abs() <= 1e-12 * (1.0 + total));
            prop_assert_eq!(sched.len(), 2 * bits.len());
        }

        #[test]
        fn material_never_yields_sub_threshold(rss in -150.0..10.0f64, m in 0usize..5) {
            if let Some(v) = apply_material(rss, &Material::ALL[m].into()) {
                prop_assert!(v >= MISSING_READ_THRESHOLD_DBM);
            }
        }
    }
}
