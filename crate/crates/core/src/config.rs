//! Key-value configuration for scenes, RF and reconstruction parameters.
//!
//! One `key = value` per line, `#` starts a comment. Every length carries
//! its unit in the key (`_cm` or `_m`) and every frequency likewise
//! (`_hz`, `_mhz`, `_ghz`); values are converted to meters and hertz on load.
//!
//! ```text
//! reader_pos_cm  = 0 0 120
//! tag_cm         = E200-0001 -60 200 102        # id x y z [material]
//! tag_cm         = E200-0002 -20 200 102 wood
//! grid_origin_cm = -160 100 0
//! grid_axis_u    = 1 0 0
//! grid_axis_v    = 0 0 1
//! grid_cells     = 32 16
//! grid_cell_cm   = 10
//! freq_mhz       = 902
//! beta_cm        = 10
//! ```
//!
//! The first `tag_*` line of a file replaces the whole tag list. Files are
//! applied in order on top of [`Config::default`], which is the reference
//! eight-tag layout. See `configs/reference_scene.conf` for every key.

use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{build_grid, Grid, Point3, Scene, Tag};
use crate::ingest::{FramePolicy, Imputation};
use crate::link_budget::{FadingKind, FadingModel, Material, MaterialProfile, RfParams, MISSING_READ_THRESHOLD_DBM};
use crate::sim::{Capture, ShadowModel, TargetPath};
use crate::solver::RtiParams;
use crate::weight::WeightParams;

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub origin: Point3,
    pub axis_u: Point3,
    pub axis_v: Point3,
    pub n_u: usize,
    pub n_v: usize,
    pub cell_size: f64,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        build_grid(self.origin, self.axis_u, self.axis_v, self.n_u, self.n_v, self.cell_size)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkSpec {
    pub start: Point3,
    pub end: Point3,
    pub start_time_s: f64,
    pub speed_mps: f64,
}

impl WalkSpec {
    pub fn path(&self) -> Result<TargetPath> {
        TargetPath::straight(self.start, self.end, self.start_time_s, self.speed_mps)
    }
}

/// Everything a run needs. Defaults reproduce the reference experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub reader_pos: Point3,
    pub tags: Vec<(String, Point3, Material)>,
    pub material_offsets_db: [f64; 5],
    pub grid: GridSpec,
    pub rf: RfParams,
    pub threshold_dbm: f64,
    pub fading: FadingModel,
    pub weight: WeightParams,
    pub rti: RtiParams,
    pub forward_beta_scale: f64,
    pub frame_rate_hz: f64,
    pub noise_db_std: f64,
    pub seed: u64,
    pub baseline_duration_s: f64,
    pub walk_duration_s: f64,
    pub walk: WalkSpec,
    pub shadow: ShadowModel,
    pub window_s: f64,
    pub policy: FramePolicy,
    pub imputation: Imputation,
    /// Leading quiet period used as baseline when no separate log is given.
    pub baseline_period_s: f64,
    pub smooth_trajectory: bool,
    pub sweep_tag_pos: Point3,
    pub sweep_seeds: u64,
    /// One-way body loss applied to the fading envelope in the NLOS sweep scenario.
    pub nlos_blockage_db: f64,
}

/// Reference layout: antenna 1.20 m high, tag wall 2.00 m away, tags 0.40 m
/// apart in two rows (1.02 m and 0.36 m high), reader centered on the array.
/// Tags 1-4 form the upper row from -x to +x; tags 5-8 sit below them.
fn reference_tags() -> Vec<(String, Point3, Material)> {
    let xs = [-0.6, -0.2, 0.2, 0.6];
    let mut tags = Vec::new();
    for (row, z) in [1.02, 0.36].into_iter().enumerate() {
        for (k, x) in xs.iter().enumerate() {
            let n = row * 4 + k + 1;
            tags.push((format!("E200-{n:04}"), Point3::new(*x, 2.0, z), Material::None));
        }
    }
    tags
}

impl Default for Config {
    fn default() -> Self {
        Self {
            reader_pos: Point3::new(0.0, 0.0, 1.2),
            tags: reference_tags(),
            material_offsets_db: Material::ALL.map(Material::default_offset_db),
            // vertical plane along the walking line, 0.4 m in front of the tag wall
            grid: GridSpec {
                origin: Point3::new(-1.6, 1.6, 0.0),
                axis_u: Point3::new(1.0, 0.0, 0.0),
                axis_v: Point3::new(0.0, 0.0, 1.0),
                n_u: 32,
                n_v: 16,
                cell_size: 0.1,
            },
            rf: RfParams::default(),
            threshold_dbm: MISSING_READ_THRESHOLD_DBM,
            fading: FadingModel::los(1.0),
            weight: WeightParams::default(),
            rti: RtiParams::default(),
            forward_beta_scale: 1.0,
            frame_rate_hz: 5.0,
            noise_db_std: 0.5,
            seed: 1,
            baseline_duration_s: 60.0,
            walk_duration_s: 10.0,
            walk: WalkSpec {
                start: Point3::new(1.6, 1.6, 1.1),
                end: Point3::new(-1.6, 1.6, 1.1),
                start_time_s: 3.4,
                speed_mps: 1.0,
            },
            shadow: ShadowModel::default(),
            window_s: 0.2,
            policy: FramePolicy::LastValueHold,
            imputation: Imputation::Floor,
            baseline_period_s: 2.0,
            smooth_trajectory: true,
            sweep_tag_pos: Point3::new(0.0, 2.0, 1.02),
            sweep_seeds: 100,
            nlos_blockage_db: 18.0,
        }
    }
}

fn material_slot(m: Material) -> usize {
    Material::ALL.iter().position(|&x| x == m).expect("material is listed")
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Config::default();
        cfg.apply_file(path)?;
        Ok(cfg)
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_str(&text)
    }

    pub fn material_profile(&self, m: Material) -> MaterialProfile {
        MaterialProfile {
            material: m,
            offset_db: self.material_offsets_db[material_slot(m)],
        }
    }

    pub fn scene(&self) -> Result<Scene> {
        let tags = self
            .tags
            .iter()
            .map(|(id, p, m)| Tag::new(id.clone(), *p).with_material(self.material_profile(*m)))
            .collect();
        Scene::new(self.reader_pos, tags, self.grid.build()?)
    }

    pub fn capture(&self, duration_s: f64, seed: u64) -> Capture {
        Capture {
            threshold_dbm: self.threshold_dbm,
            ..Capture::new(duration_s, self.frame_rate_hz, self.noise_db_std, seed)
        }
    }

    /// Weight parameters for simulating data; differs from the
    /// reconstruction parameters when `forward_beta_scale != 1`.
    pub fn forward_weight(&self) -> Result<WeightParams> {
        WeightParams::new(self.weight.beta_m * self.forward_beta_scale)
    }

    pub fn validate(&self) -> Result<()> {
        self.scene()?;
        self.rf.validate()?;
        self.fading.validate()?;
        WeightParams::new(self.weight.beta_m)?;
        self.rti.validate()?;
        self.forward_weight()?;
        ShadowModel::new(self.shadow.blob_sigma_m, self.shadow.peak_atten_db)?;
        self.walk.path()?;
        for (name, v) in [
            ("frame_rate_hz", self.frame_rate_hz),
            ("window_s", self.window_s),
            ("baseline_duration_s", self.baseline_duration_s),
            ("walk_duration_s", self.walk_duration_s),
            ("baseline_period_s", self.baseline_period_s),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::arg(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.noise_db_std >= 0.0) {
            return Err(Error::arg("noise_db_std must be >= 0"));
        }
        for m in Material::ALL {
            MaterialProfile::new(m, self.material_offsets_db[material_slot(m)])?;
        }
        Ok(())
    }

    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        let mut tags_replaced = false;
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Config { line: line_no, msg };
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err(format!("expected `key = value`, found {line:?}")))?;
            self.apply_kv(key, value, &mut tags_replaced).map_err(|e| match e {
                Error::Config { .. } => e,
                other => err(format!("{key}: {other}")),
            })?;
        }
        Ok(())
    }

    fn apply_kv(&mut self, key: &str, value: &str, tags_replaced: &mut bool) -> Result<()> {
        if let Some((base, scale)) = length_key(key) {
            return self.apply_length(base, scale, value, tags_replaced);
        }
        if let Some((base, scale)) = freq_key(key) {
            if base == "freq" {
                self.rf.freq_hz = num(value)? * scale;
                return Ok(());
            }
        }
        match key {
            "grid_axis_u" => self.grid.axis_u = point(value, 1.0)?,
            "grid_axis_v" => self.grid.axis_v = point(value, 1.0)?,
            "grid_cells" => {
                let v = words(value, 2)?;
                self.grid.n_u = int(v[0])?;
                self.grid.n_v = int(v[1])?;
            }
            "p_tx_dbm" => self.rf.p_tx_dbm = num(value)?,
            "reader_gain_dbi" => self.rf.g_r_dbi = num(value)?,
            "tag_gain_dbi" => self.rf.g_t_dbi = num(value)?,
            "alpha" => self.rf.alpha = num(value)?,
            "rho_l" => self.rf.rho_l = num(value)?,
            "gamma" => self.rf.gamma = num(value)?,
            "round_trip_path_loss" => self.rf.round_trip_path_loss = boolean(value)?,
            "threshold_dbm" => self.threshold_dbm = num(value)?,
            "material_offset_db" => {
                let v = words(value, 2)?;
                let m: Material = v[0].parse()?;
                self.material_offsets_db[material_slot(m)] = num(v[1])?;
            }
            "fading" => {
                self.fading.kind = match value {
                    "deterministic_los" => FadingKind::DeterministicLos,
                    "rayleigh_nlos" => FadingKind::RayleighNlos,
                    other => return Err(Error::arg(format!("unknown fading kind {other:?}"))),
                }
            }
            "fading_h" => self.fading.h_fixed = num(value)?,
            "fading_seed" => self.fading.seed = int(value)? as u64,
            "eta" => self.rti.eta = num(value)?,
            "sigma" => self.rti.sigma = num(value)?,
            "forward_beta_scale" => self.forward_beta_scale = num(value)?,
            "frame_rate_hz" => self.frame_rate_hz = num(value)?,
            "noise_db_std" => self.noise_db_std = num(value)?,
            "seed" => self.seed = int(value)? as u64,
            "baseline_duration_s" => self.baseline_duration_s = num(value)?,
            "walk_duration_s" => self.walk_duration_s = num(value)?,
            "walk_start_s" => self.walk.start_time_s = num(value)?,
            "walk_speed_mps" => self.walk.speed_mps = num(value)?,
            "peak_atten_db" => self.shadow.peak_atten_db = num(value)?,
            "window_s" => self.window_s = num(value)?,
            "policy" => self.policy = value.parse()?,
            "imputation" => self.imputation = value.parse()?,
            "baseline_period_s" => self.baseline_period_s = num(value)?,
            "smooth_trajectory" => self.smooth_trajectory = boolean(value)?,
            "sweep_seeds" => self.sweep_seeds = int(value)? as u64,
            "nlos_blockage_db" => self.nlos_blockage_db = num(value)?,
            _ => return Err(Error::arg(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    fn apply_length(&mut self, base: &str, scale: f64, value: &str, tags_replaced: &mut bool) -> Result<()> {
        match base {
            "reader_pos" => self.reader_pos = point(value, scale)?,
            "tag" => {
                let v: Vec<&str> = value.split_whitespace().collect();
                if !(4..=5).contains(&v.len()) {
                    return Err(Error::arg("expected `id x y z [material]`"));
                }
                let p = point(&v[1..4].join(" "), scale)?;
                let m = match v.get(4) {
                    Some(s) => s.parse()?,
                    None => Material::None,
                };
                if !*tags_replaced {
                    self.tags.clear();
                    *tags_replaced = true;
                }
                self.tags.push((v[0].to_string(), p, m));
            }
            "grid_origin" => self.grid.origin = point(value, scale)?,
            "grid_cell" => self.grid.cell_size = num(value)? * scale,
            "beta" => self.weight.beta_m = num(value)? * scale,
            "delta_corr" => self.rti.delta_corr_m = num(value)? * scale,
            "walk_from" => self.walk.start = point(value, scale)?,
            "walk_to" => self.walk.end = point(value, scale)?,
            "blob_sigma" => self.shadow.blob_sigma_m = num(value)? * scale,
            "sweep_tag_pos" => self.sweep_tag_pos = point(value, scale)?,
            _ => return Err(Error::arg(format!("unknown length key {base:?}"))),
        }
        Ok(())
    }

    /// Renders the config back into the file format; `apply_str` of the
    /// result reproduces `self`.
    pub fn to_config_string(&self) -> String {
        let p = |p: Point3| format!("{} {} {}", p.x, p.y, p.z);
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("reader_pos_m", p(self.reader_pos));
        for (id, pos, m) in &self.tags {
            kv("tag_m", format!("{id} {} {m}", p(*pos)));
        }
        for m in Material::ALL {
            kv("material_offset_db", format!("{m} {}", self.material_offsets_db[material_slot(m)]));
        }
        kv("grid_origin_m", p(self.grid.origin));
        kv("grid_axis_u", p(self.grid.axis_u));
        kv("grid_axis_v", p(self.grid.axis_v));
        kv("grid_cells", format!("{} {}", self.grid.n_u, self.grid.n_v));
        kv("grid_cell_m", self.grid.cell_size.to_string());
        kv("freq_hz", self.rf.freq_hz.to_string());
        kv("p_tx_dbm", self.rf.p_tx_dbm.to_string());
        kv("reader_gain_dbi", self.rf.g_r_dbi.to_string());
        kv("tag_gain_dbi", self.rf.g_t_dbi.to_string());
        kv("alpha", self.rf.alpha.to_string());
        kv("rho_l", self.rf.rho_l.to_string());
        kv("gamma", self.rf.gamma.to_string());
        kv("round_trip_path_loss", self.rf.round_trip_path_loss.to_string());
        kv("threshold_dbm", self.threshold_dbm.to_string());
        kv(
            "fading",
            match self.fading.kind {
                FadingKind::DeterministicLos => "deterministic_los",
                FadingKind::RayleighNlos => "rayleigh_nlos",
            }
            .into(),
        );
        kv("fading_h", self.fading.h_fixed.to_string());
        kv("fading_seed", self.fading.seed.to_string());
        kv("beta_m", self.weight.beta_m.to_string());
        kv("eta", self.rti.eta.to_string());
        kv("sigma", self.rti.sigma.to_string());
        kv("delta_corr_m", self.rti.delta_corr_m.to_string());
        kv("forward_beta_scale", self.forward_beta_scale.to_string());
        kv("frame_rate_hz", self.frame_rate_hz.to_string());
        kv("noise_db_std", self.noise_db_std.to_string());
        kv("seed", self.seed.to_string());
        kv("baseline_duration_s", self.baseline_duration_s.to_string());
        kv("walk_duration_s", self.walk_duration_s.to_string());
        kv("walk_from_m", p(self.walk.start));
        kv("walk_to_m", p(self.walk.end));
        kv("walk_start_s", self.walk.start_time_s.to_string());
        kv("walk_speed_mps", self.walk.speed_mps.to_string());
        kv("blob_sigma_m", self.shadow.blob_sigma_m.to_string());
        kv("peak_atten_db", self.shadow.peak_atten_db.to_string());
        kv("window_s", self.window_s.to_string());
        kv(
            "policy",
            match self.policy {
                FramePolicy::LastValueHold => "last_value_hold",
                FramePolicy::MeanInWindow => "mean_in_window",
            }
            .into(),
        );
        kv(
            "imputation",
            match self.imputation {
                Imputation::Floor => "floor",
                Imputation::Zero => "zero",
                Imputation::Drop => "drop",
            }
            .into(),
        );
        kv("baseline_period_s", self.baseline_period_s.to_string());
        kv("smooth_trajectory", self.smooth_trajectory.to_string());
        kv("sweep_tag_pos_m", p(self.sweep_tag_pos));
        kv("sweep_seeds", self.sweep_seeds.to_string());
        kv("nlos_blockage_db", self.nlos_blockage_db.to_string());
        s
    }
}

fn length_key(key: &str) -> Option<(&str, f64)> {
    if let Some(b) = key.strip_suffix("_cm") {
        Some((b, 0.01))
    } else if let Some(b) = key.strip_suffix("_mm") {
        Some((b, 0.001))
    } else {
        key.strip_suffix("_m").map(|b| (b, 1.0))
    }
}

fn freq_key(key: &str) -> Option<(&str, f64)> {
    if let Some(b) = key.strip_suffix("_ghz") {
        Some((b, 1e9))
    } else if let Some(b) = key.strip_suffix("_mhz") {
        Some((b, 1e6))
    } else {
        key.strip_suffix("_hz").map(|b| (b, 1.0))
    }
}

fn num(s: &str) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|_| Error::arg(format!("not a number: {s:?}")))?;
    if !v.is_finite() {
        return Err(Error::arg(format!("not finite: {s:?}")));
    }
    Ok(v)
}

fn int(s: &str) -> Result<usize> {
    s.trim().parse().map_err(|_| Error::arg(format!("not a non-negative integer: {s:?}")))
}

fn boolean(s: &str) -> Result<bool> {
    match s.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(Error::arg(format!("not a boolean: {other:?}"))),
    }
}

fn words(s: &str, n: usize) -> Result<Vec<&str>> {
    let v: Vec<&str> = s.split_whitespace().collect();
    if v.len() != n {
        return Err(Error::arg(format!("expected {n} values, found {}", v.len())));
    }
    Ok(v)
}

fn point(s: &str, scale: f64) -> Result<Point3> {
    let v = words(s, 3)?;
    Ok(Point3::new(num(v[0])? * scale, num(v[1])? * scale, num(v[2])? * scale))
}
