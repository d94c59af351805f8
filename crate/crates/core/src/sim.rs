//! Synthetic per-link RSS time series.
//!
//! Each link's static level comes from the link budget (one quasi-static
//! fading draw per link, taken from the fading model's own seed) plus the
//! tag's substrate offset. A walking target subtracts `W·x_true(t)` from
//! those levels, where `x_true` is a Gaussian attenuation blob centered on
//! the target. Measurement noise is i.i.d. Gaussian in dB and comes from a
//! separate stream keyed by the simulation seed, so a baseline and a walk
//! run with the same seed see identical noise.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::{make_links, Grid, Point3, Scene};
use crate::link_budget::{
    backscatter_rx_power, censor, sample_fading, FadingModel, RfParams, MISSING_READ_THRESHOLD_DBM,
};
use crate::weight::WeightMatrix;

/// One synchronous snapshot of every link. `None` marks a missing read.
#[derive(Debug, Clone, PartialEq)]
pub struct RssFrame {
    pub timestamp: f64,
    pub rss_dbm: Vec<Option<f64>>,
}

impl RssFrame {
    pub fn is_missing(&self, link: usize) -> bool {
        self.rss_dbm[link].is_none()
    }

    pub fn len(&self) -> usize {
        self.rss_dbm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rss_dbm.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetPath {
    waypoints: Vec<(f64, Point3)>,
}

impl TargetPath {
    pub fn new(waypoints: Vec<(f64, Point3)>) -> Result<Self> {
        if waypoints.is_empty() {
            return Err(Error::arg("target path needs at least one waypoint"));
        }
        if waypoints.iter().any(|(t, p)| !t.is_finite() || !p.is_finite()) {
            return Err(Error::arg("waypoints must be finite"));
        }
        if waypoints.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::arg("waypoint times must be strictly increasing"));
        }
        Ok(Self { waypoints })
    }

    /// Straight walk from `from` to `to` starting at `t0` with constant speed.
    pub fn straight(from: Point3, to: Point3, t0: f64, speed_mps: f64) -> Result<Self> {
        if !(speed_mps > 0.0) {
            return Err(Error::arg(format!("walking speed must be positive, got {speed_mps}")));
        }
        let len = from.distance(to);
        if len == 0.0 {
            return Self::new(vec![(t0, from)]);
        }
        Self::new(vec![(t0, from), (t0 + len / speed_mps, to)])
    }

    pub fn waypoints(&self) -> &[(f64, Point3)] {
        &self.waypoints
    }

    pub fn start_time(&self) -> f64 {
        self.waypoints[0].0
    }

    pub fn end_time(&self) -> f64 {
        self.waypoints[self.waypoints.len() - 1].0
    }

    /// Linear interpolation; the target holds the first waypoint before the
    /// path starts and the last one after it ends.
    pub fn position_at(&self, t: f64) -> Point3 {
        let wp = &self.waypoints;
        if t <= wp[0].0 {
            return wp[0].1;
        }
        for w in wp.windows(2) {
            let ((t0, p0), (t1, p1)) = (w[0], w[1]);
            if t <= t1 {
                return p0.lerp(p1, (t - t0) / (t1 - t0));
            }
        }
        wp[wp.len() - 1].1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShadowModel {
    pub blob_sigma_m: f64,
    /// Attenuation at the blob center, dB. Zero disables the target.
    pub peak_atten_db: f64,
}

impl ShadowModel {
    pub fn new(blob_sigma_m: f64, peak_atten_db: f64) -> Result<Self> {
        if !(blob_sigma_m > 0.0) || !blob_sigma_m.is_finite() {
            return Err(Error::arg(format!("blob sigma must be positive, got {blob_sigma_m}")));
        }
        if !(peak_atten_db >= 0.0) || !peak_atten_db.is_finite() {
            return Err(Error::arg(format!("peak attenuation must be >= 0, got {peak_atten_db}")));
        }
        Ok(Self {
            blob_sigma_m,
            peak_atten_db,
        })
    }
}

impl Default for ShadowModel {
    fn default() -> Self {
        Self {
            blob_sigma_m: 0.15,
            peak_atten_db: 1.5,
        }
    }
}

pub fn true_attenuation_field(grid: &Grid, target: Point3, shadow: &ShadowModel) -> Vec<f64> {
    let two_s2 = 2.0 * shadow.blob_sigma_m * shadow.blob_sigma_m;
    grid.centers()
        .into_iter()
        .map(|c| {
            let r = c - target;
            shadow.peak_atten_db * (-r.dot(r) / two_s2).exp()
        })
        .collect()
}

/// Capture settings shared by both scenario generators.
#[derive(Debug, Clone, PartialEq)]
pub struct Capture {
    pub duration_s: f64,
    pub frame_rate_hz: f64,
    pub noise_db_std: f64,
    pub seed: u64,
    pub threshold_dbm: f64,
}

impl Capture {
    pub fn new(duration_s: f64, frame_rate_hz: f64, noise_db_std: f64, seed: u64) -> Self {
        Self {
            duration_s,
            frame_rate_hz,
            noise_db_std,
            seed,
            threshold_dbm: MISSING_READ_THRESHOLD_DBM,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0) || !self.duration_s.is_finite() {
            return Err(Error::arg(format!("duration must be positive, got {}", self.duration_s)));
        }
        if !(self.frame_rate_hz > 0.0) || !self.frame_rate_hz.is_finite() {
            return Err(Error::arg(format!("frame rate must be positive, got {}", self.frame_rate_hz)));
        }
        if !(self.noise_db_std >= 0.0) || !self.noise_db_std.is_finite() {
            return Err(Error::arg(format!("noise std must be >= 0, got {}", self.noise_db_std)));
        }
        Ok(())
    }

    /// Frame period; frame `k` is stamped `k · period`.
    pub fn period(&self) -> f64 {
        1.0 / self.frame_rate_hz
    }

    /// `ceil(duration · rate)`, ignoring round-off just above an integer.
    pub fn frame_count(&self) -> usize {
        let x = self.duration_s * self.frame_rate_hz;
        let r = x.round();
        if (x - r).abs() < 1e-9 {
            r as usize
        } else {
            x.ceil() as usize
        }
    }

    pub fn frame_times(&self) -> impl Iterator<Item = f64> {
        let period = self.period();
        (0..self.frame_count()).map(move |k| k as f64 * period)
    }
}

/// Noise-free per-link RSS (dBm) including substrate offsets. Not censored;
/// a zero fading draw gives `-inf`.
pub fn static_rss(scene: &Scene, rf: &RfParams, fading: &FadingModel) -> Result<Vec<f64>> {
    fading.validate()?;
    let mut rng = fading.rng();
    make_links(scene)?
        .iter()
        .zip(scene.tags())
        .map(|(link, tag)| {
            let h = sample_fading(fading, &mut rng);
            Ok(backscatter_rx_power(rf, h, link.length_m)? + tag.material.offset_db)
        })
        .collect()
}

fn run(
    capture: &Capture,
    levels: &[f64],
    mut shadowing: impl FnMut(f64) -> Result<Vec<f64>>,
) -> Result<Vec<RssFrame>> {
    let noise = Normal::new(0.0, capture.noise_db_std).map_err(|e| Error::arg(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(capture.seed);
    capture
        .frame_times()
        .map(|t| {
            let atten = shadowing(t)?;
            let rss_dbm = levels
                .iter()
                .zip(&atten)
                .map(|(level, a)| {
                    let n: f64 = noise.sample(&mut rng);
                    censor(level - a + n, capture.threshold_dbm)
                })
                .collect();
            Ok(RssFrame { timestamp: t, rss_dbm })
        })
        .collect()
}

/// Quiet-room capture: every frame is the static level plus noise.
pub fn simulate_baseline(
    scene: &Scene,
    rf: &RfParams,
    fading: &FadingModel,
    capture: &Capture,
) -> Result<Vec<RssFrame>> {
    capture.validate()?;
    let levels = static_rss(scene, rf, fading)?;
    let zeros = vec![0.0; levels.len()];
    run(capture, &levels, |_| Ok(zeros.clone()))
}

/// Capture with one person walking along `path`. `w` is the forward weight
/// matrix; it must have one row per scene tag and one column per grid cell.
#[allow(clippy::too_many_arguments)]
pub fn simulate_walk(
    scene: &Scene,
    rf: &RfParams,
    fading: &FadingModel,
    w: &WeightMatrix,
    path: &TargetPath,
    shadow: &ShadowModel,
    capture: &Capture,
) -> Result<Vec<RssFrame>> {
    capture.validate()?;
    if w.q() != scene.tags().len() || w.n() != scene.grid().len() {
        return Err(Error::arg(format!(
            "weight matrix is {}x{}, scene needs {}x{}",
            w.q(),
            w.n(),
            scene.tags().len(),
            scene.grid().len()
        )));
    }
    if path.end_time() < 0.0 || path.start_time() > capture.duration_s {
        return Err(Error::arg(format!(
            "target path [{}, {}] s lies outside the capture [0, {}] s",
            path.start_time(),
            path.end_time(),
            capture.duration_s
        )));
    }
    let levels = static_rss(scene, rf, fading)?;
    run(capture, &levels, |t| {
        let x_true = true_attenuation_field(scene.grid(), path.position_at(t), shadow);
        w.apply(&x_true)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, Tag};
    use crate::link_budget::Material;
    use crate::weight::{build_weight_matrix, WeightParams};

    fn scene() -> Scene {
        let grid = build_grid(
            Point3::new(-1.0, 1.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
            20,
            16,
            0.1,
        )
        .unwrap();
        let tags = vec![
            Tag::new("a", Point3::new(-0.2, 2.0, 1.0)),
            Tag::new("b", Point3::new(0.2, 2.0, 1.0)).with_material(Material::Wood),
            Tag::new("c", Point3::new(0.2, 2.0, 0.4)),
        ];
        Scene::new(Point3::new(0.0, 0.0, 1.2), tags, grid).unwrap()
    }

    fn weights(s: &Scene) -> WeightMatrix {
        build_weight_matrix(s.grid(), &make_links(s).unwrap(), &WeightParams::default()).unwrap()
    }

    #[test]
    fn frame_counts() {
        assert_eq!(Capture::new(60.0, 5.0, 0.0, 0).frame_count(), 300);
        assert_eq!(Capture::new(10.0, 5.0, 0.0, 0).frame_count(), 50);
        assert_eq!(Capture::new(0.5, 3.0, 0.0, 0).frame_count(), 2);
        assert_eq!(Capture::new(0.1, 10.0, 0.0, 0).frame_count(), 1);
    }

    #[test]
    fn noiseless_baseline_frames_are_identical() {
        let s = scene();
        let frames = simulate_baseline(&s, &RfParams::default(), &FadingModel::los(1.0), &Capture::new(2.0, 5.0, 0.0, 3)).unwrap();
        assert_eq!(frames.len(), 10);
        assert!(frames.windows(2).all(|w| w[0].rss_dbm == w[1].rss_dbm));
        // wood tag sits 2 dB below its mirror-image neighbour
        let (a, b) = (frames[0].rss_dbm[0].unwrap(), frames[0].rss_dbm[1].unwrap());
        assert!((a - b - 2.0).abs() < 1e-9);
    }

    #[test]
    fn baseline_noise_level() {
        let s = scene();
        let frames = simulate_baseline(&s, &RfParams::default(), &FadingModel::los(1.0), &Capture::new(60.0, 5.0, 1.0, 11)).unwrap();
        assert_eq!(frames.len(), 300);
        for link in 0..3 {
            let xs: Vec<f64> = frames.iter().map(|f| f.rss_dbm[link].unwrap()).collect();
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
            assert!((0.8..=1.2).contains(&var.sqrt()), "std {}", var.sqrt());
        }
    }

    #[test]
    fn zero_shadow_walk_equals_baseline() {
        let s = scene();
        let w = weights(&s);
        let cap = Capture::new(4.0, 5.0, 0.5, 9);
        let path = TargetPath::straight(Point3::new(1.0, 1.0, 0.8), Point3::new(-1.0, 1.0, 0.8), 0.0, 1.0).unwrap();
        let base = simulate_baseline(&s, &RfParams::default(), &FadingModel::rayleigh(4), &cap).unwrap();
        let walk = simulate_walk(&s, &RfParams::default(), &FadingModel::rayleigh(4), &w, &path, &ShadowModel::new(0.2, 0.0).unwrap(), &cap).unwrap();
        assert_eq!(base, walk);
    }

    #[test]
    fn crossing_midpoint_maximizes_dip() {
        let s = scene();
        let w = weights(&s);
        let links = make_links(&s).unwrap();
        // walk along x through the plane y = 1 at the height where link 0 pierces it
        let pierce = links[0].midpoint();
        let path = TargetPath::straight(
            Point3::new(1.0, 1.0, pierce.z),
            Point3::new(-1.0, 1.0, pierce.z),
            0.0,
            1.0,
        )
        .unwrap();
        let cap = Capture::new(2.0, 50.0, 0.0, 0);
        let shadow = ShadowModel::new(0.1, 1.0).unwrap();
        let frames = simulate_walk(&s, &RfParams::default(), &FadingModel::los(1.0), &w, &path, &shadow, &cap).unwrap();
        let dip = |f: &RssFrame| f.rss_dbm[0].unwrap();
        let lowest = frames
            .iter()
            .min_by(|a, b| dip(a).total_cmp(&dip(b)))
            .unwrap();
        // oracle: the frame whose target is closest to the piercing point
        let closest = frames
            .iter()
            .min_by(|a, b| {
                path.position_at(a.timestamp)
                    .distance(pierce)
                    .total_cmp(&path.position_at(b.timestamp).distance(pierce))
            })
            .unwrap();
        assert!((lowest.timestamp - closest.timestamp).abs() <= 0.1, "{} vs {}", lowest.timestamp, closest.timestamp);
    }

    #[test]
    fn walk_rejects_disjoint_path() {
        let s = scene();
        let w = weights(&s);
        let cap = Capture::new(4.0, 5.0, 0.5, 9);
        let late = TargetPath::straight(Point3::ORIGIN, Point3::new(1.0, 0.0, 0.0), 10.0, 1.0).unwrap();
        let r = simulate_walk(&s, &RfParams::default(), &FadingModel::los(1.0), &w, &late, &ShadowModel::default(), &cap);
        assert!(r.is_err());
    }

    #[test]
    fn attenuation_field_shape() {
        let s = scene();
        let g = s.grid();
        let shadow = ShadowModel::new(0.2, 3.0).unwrap();
        let c = g.cell_center(45).unwrap();
        let x = true_attenuation_field(g, c, &shadow);
        assert_eq!(x[45], 3.0);
        // neighbours left/right are equidistant
        assert!((x[44] - x[46]).abs() < 1e-12 * x[44]);
        let far = true_attenuation_field(g, Point3::new(50.0, 1.0, 0.0), &shadow);
        assert!(far.iter().all(|&v| v < 1e-6 * 3.0));
    }

    #[test]
    fn path_interpolation() {
        let p = TargetPath::new(vec![
            (1.0, Point3::new(0.0, 0.0, 0.0)),
            (3.0, Point3::new(2.0, 0.0, 0.0)),
            (4.0, Point3::new(2.0, 1.0, 0.0)),
        ])
        .unwrap();
        assert_eq!(p.position_at(0.0), Point3::ORIGIN);
        assert_eq!(p.position_at(2.0), Point3::new(1.0, 0.0, 0.0));
        assert_eq!(p.position_at(3.5), Point3::new(2.0, 0.5, 0.0));
        assert_eq!(p.position_at(9.0), Point3::new(2.0, 1.0, 0.0));
        assert!(TargetPath::new(vec![(1.0, Point3::ORIGIN), (1.0, Point3::ORIGIN)]).is_err());
        assert!(TargetPath::new(vec![]).is_err());
    }

    #[test]
    fn deep_shadow_marks_missing() {
        let s = scene();
        let w = weights(&s);
        let links = make_links(&s).unwrap();
        let target = links[0].midpoint();
        let path = TargetPath::new(vec![(0.0, target)]).unwrap();
        let shadow = ShadowModel::new(0.2, 50.0).unwrap();
        let cap = Capture::new(1.0, 5.0, 0.5, 1);
        let frames = simulate_walk(&s, &RfParams::default(), &FadingModel::los(1.0), &w, &path, &shadow, &cap).unwrap();
        assert!(frames.iter().all(|f| f.is_missing(0)));
        for f in &frames {
            for v in f.rss_dbm.iter().flatten() {
                assert!(*v >= MISSING_READ_THRESHOLD_DBM);
            }
        }
    }
}
