//! End-to-end commands: simulate logs, reconstruct images and detections
//! from logs, and sweep substrate materials across channel scenarios.
//!
//! Every command writes into an output directory, re-parses each file it
//! wrote, and finishes with `manifest.txt` listing each artifact's SHA-256
//! (`<hex>  <name>`, the `sha256sum` layout).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufReader, Cursor};
use std::path::{Path, PathBuf};

use log::info;
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::detect::{self, calibrate_threshold, extract_trajectory, Detection};
use crate::error::{Error, Result};
use crate::geometry::{make_links, Link, Point3, Scene, Tag};
use crate::ingest::{self, assemble_frames, compute_baseline, delta_rss_at, parse_rssi_log, Baseline};
use crate::link_budget::{backscatter_rx_power, censor, sample_fading, FadingModel, Material};
use crate::render::{membership_graymap, to_graymap, GrayScale, Graymap};
use crate::sim::{simulate_baseline, simulate_walk, RssFrame};
use crate::solver::{covariance_matrix, precompute_projection, reconstruct, AttenuationImage, CovarianceMatrix, ProjectionOperator};
use crate::weight::{build_weight_matrix, link_membership_field, WeightMatrix};

/// Scene, links, weights and the reconstruction operator for one config.
/// Operators for reduced link sets (dropped missing reads) are built on
/// demand and cached.
pub struct Model {
    pub scene: Scene,
    pub links: Vec<Link>,
    pub weights: WeightMatrix,
    covariance: CovarianceMatrix,
    eta: f64,
    projections: HashMap<Vec<usize>, ProjectionOperator>,
}

impl Model {
    pub fn new(cfg: &Config) -> Result<Self> {
        cfg.validate()?;
        let scene = cfg.scene()?;
        let links = make_links(&scene)?;
        let weights = build_weight_matrix(scene.grid(), &links, &cfg.weight)?;
        let covariance = covariance_matrix(scene.grid(), &cfg.rti)?;
        let full = precompute_projection(&weights, &covariance, cfg.rti.eta)?;
        let all: Vec<usize> = (0..links.len()).collect();
        Ok(Self {
            scene,
            links,
            weights,
            covariance,
            eta: cfg.rti.eta,
            projections: HashMap::from([(all, full)]),
        })
    }

    pub fn projection(&mut self, rows: &[usize]) -> Result<&ProjectionOperator> {
        if !self.projections.contains_key(rows) {
            let w = self.weights.select_rows(rows)?;
            let p = precompute_projection(&w, &self.covariance, self.eta)?;
            self.projections.insert(rows.to_vec(), p);
        }
        Ok(&self.projections[rows])
    }

    pub fn full_projection(&self) -> &ProjectionOperator {
        let all: Vec<usize> = (0..self.links.len()).collect();
        &self.projections[&all]
    }

    /// Image for one frame against a baseline.
    pub fn image(&mut self, frame: &RssFrame, baseline: &Baseline, cfg: &Config) -> Result<AttenuationImage> {
        let dy = delta_rss_at(frame, baseline, cfg.imputation, cfg.threshold_dbm)?;
        let y = dy.solver_input();
        if dy.links.is_empty() {
            return AttenuationImage::new(self.scene.grid().clone(), vec![0.0; self.scene.grid().len()], frame.timestamp);
        }
        let p = self.projection(&dy.links)?;
        reconstruct(p, &y, frame.timestamp)
    }
}

#[derive(Debug, Clone)]
pub struct DetectionRun {
    pub baseline: Baseline,
    pub threshold: f64,
    pub baseline_detections: Vec<Detection>,
    pub images: Vec<AttenuationImage>,
    pub detections: Vec<Detection>,
    pub trajectory: Vec<(f64, Point3)>,
}

impl DetectionRun {
    pub fn present_count(&self) -> usize {
        self.detections.iter().filter(|d| d.present).count()
    }
}

/// Baseline statistics and presence threshold from `quiet`, then images,
/// detections and the trajectory for `frames`.
pub fn run_detection(model: &mut Model, cfg: &Config, quiet: &[RssFrame], frames: &[RssFrame]) -> Result<DetectionRun> {
    let baseline = compute_baseline(quiet)?;
    let quiet_images = quiet
        .iter()
        .map(|f| model.image(f, &baseline, cfg))
        .collect::<Result<Vec<_>>>()?;
    let threshold = calibrate_threshold(&quiet_images)?;
    let baseline_detections = quiet_images.iter().map(|im| detect::detect(im, threshold)).collect();
    let images = frames
        .iter()
        .map(|f| model.image(f, &baseline, cfg))
        .collect::<Result<Vec<_>>>()?;
    let detections: Vec<Detection> = images.iter().map(|im| detect::detect(im, threshold)).collect();
    let trajectory = extract_trajectory(&detections, cfg.smooth_trajectory);
    Ok(DetectionRun {
        baseline,
        threshold,
        baseline_detections,
        images,
        detections,
        trajectory,
    })
}

/// Noise seed for the walk capture, distinct from the baseline's.
pub fn walk_seed(seed: u64) -> u64 {
    seed.wrapping_add(0x9e37_79b9_7f4a_7c15)
}

pub struct SimulatedLogs {
    pub baseline: Vec<RssFrame>,
    pub walk: Vec<RssFrame>,
}

/// Baseline and walk captures for the configured scene. The walk is
/// forward-simulated with `forward_beta_scale · β`.
pub fn simulate_scenarios(cfg: &Config) -> Result<SimulatedLogs> {
    cfg.validate()?;
    let scene = cfg.scene()?;
    let links = make_links(&scene)?;
    let forward = build_weight_matrix(scene.grid(), &links, &cfg.forward_weight()?)?;
    let baseline = simulate_baseline(&scene, &cfg.rf, &cfg.fading, &cfg.capture(cfg.baseline_duration_s, cfg.seed))?;
    let walk = simulate_walk(
        &scene,
        &cfg.rf,
        &cfg.fading,
        &forward,
        &cfg.walk.path()?,
        &cfg.shadow,
        &cfg.capture(cfg.walk_duration_s, walk_seed(cfg.seed)),
    )?;
    Ok(SimulatedLogs { baseline, walk })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Baseline,
    Walk,
    Both,
}

impl std::str::FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Self::Baseline),
            "walk" => Ok(Self::Walk),
            "both" => Ok(Self::Both),
            other => Err(Error::arg(format!("unknown scenario {other:?}"))),
        }
    }
}

struct OutputDir {
    root: PathBuf,
    written: Vec<(String, String)>,
}

impl OutputDir {
    fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.written.push((name.to_string(), hex(&Sha256::digest(bytes))));
        Ok(path)
    }

    fn finish(self, extra: &str) -> Result<PathBuf> {
        let mut text = String::new();
        for (name, hash) in &self.written {
            let _ = writeln!(text, "{hash}  {name}");
        }
        text.push_str(extra);
        let path = self.root.join("manifest.txt");
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Parses a `manifest.txt` and checks every listed file's hash.
pub fn verify_manifest(dir: &Path) -> Result<Vec<String>> {
    let path = dir.join("manifest.txt");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut names = Vec::new();
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.is_empty()) {
        let (hash, name) = line
            .split_once("  ")
            .ok_or_else(|| Error::Format(format!("bad manifest line {line:?}")))?;
        let file = dir.join(name);
        let bytes = fs::read(&file).map_err(|e| Error::io(&file, e))?;
        if hex(&Sha256::digest(&bytes)) != hash {
            return Err(Error::Format(format!("hash mismatch for {name}")));
        }
        names.push(name.to_string());
    }
    Ok(names)
}

fn log_bytes(frames: &[RssFrame], scene: &Scene) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    ingest::write_rssi_log(frames, &scene.tag_ids(), &mut buf)?;
    Ok(buf)
}

/// Re-parses a log and checks it reassembles into `frames`.
fn check_log(bytes: &[u8], frames: &[RssFrame], scene: &Scene, window_s: f64) -> Result<()> {
    let parsed = parse_rssi_log(Cursor::new(bytes))?;
    if parsed.error_count() > 0 {
        return Err(Error::Format(format!("{} unparseable lines in generated log", parsed.error_count())));
    }
    let back = assemble_frames(&parsed.records, &scene.tag_ids(), window_s, ingest::FramePolicy::MeanInWindow)?;
    let n = back.frames.len();
    let matches = frames.iter().rev().take(n).rev().eq(back.frames.iter());
    if n == 0 && frames.iter().any(|f| f.rss_dbm.iter().any(Option::is_some)) || n > 0 && !matches {
        return Err(Error::Format("generated log does not reassemble into the simulated frames".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateSummary {
    pub baseline_frames: Option<usize>,
    pub walk_frames: Option<usize>,
    pub seed: u64,
    pub manifest: PathBuf,
}

pub fn cmd_simulate(cfg: &Config, scenario: Scenario, out: &Path) -> Result<SimulateSummary> {
    let logs = simulate_scenarios(cfg)?;
    let scene = cfg.scene()?;
    let mut dir = OutputDir::create(out)?;
    let period = 1.0 / cfg.frame_rate_hz;
    let mut summary = SimulateSummary {
        baseline_frames: None,
        walk_frames: None,
        seed: cfg.seed,
        manifest: PathBuf::new(),
    };
    if scenario != Scenario::Walk {
        let bytes = log_bytes(&logs.baseline, &scene)?;
        check_log(&bytes, &logs.baseline, &scene, period)?;
        dir.write("baseline.csv", &bytes)?;
        summary.baseline_frames = Some(logs.baseline.len());
    }
    if scenario != Scenario::Baseline {
        let bytes = log_bytes(&logs.walk, &scene)?;
        check_log(&bytes, &logs.walk, &scene, period)?;
        dir.write("walk.csv", &bytes)?;
        summary.walk_frames = Some(logs.walk.len());
    }
    dir.write("config.conf", cfg.to_config_string().as_bytes())?;
    summary.manifest = dir.finish(&format!("# seed {}\n", cfg.seed))?;
    info!("simulate: {summary:?}");
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructOptions {
    pub baseline_log: Option<PathBuf>,
    pub render_weights: bool,
    pub gray_scale: GrayScale,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        Self {
            baseline_log: None,
            render_weights: false,
            gray_scale: GrayScale::PerFrame,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructSummary {
    pub frames: usize,
    pub present: usize,
    pub threshold: f64,
    pub track_start: Option<Point3>,
    pub track_end: Option<Point3>,
    pub manifest: PathBuf,
}

impl std::fmt::Display for ReconstructSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "frames={} present={} threshold={:.4}", self.frames, self.present, self.threshold)?;
        match (self.track_start, self.track_end) {
            (Some(a), Some(b)) => write!(f, " track {a} -> {b}"),
            _ => write!(f, " track none"),
        }
    }
}

fn read_frames(path: &Path, scene: &Scene, cfg: &Config) -> Result<Vec<RssFrame>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let parsed = parse_rssi_log(BufReader::new(file))?;
    for d in &parsed.diagnostics {
        log::warn!("{}:{}: {}", path.display(), d.line, d.message);
    }
    let assembled = assemble_frames(&parsed.records, &scene.tag_ids(), cfg.window_s, cfg.policy)?;
    for d in &assembled.diagnostics {
        log::warn!("{}: record {}: {}", path.display(), d.line, d.message);
    }
    Ok(assembled.frames)
}

pub fn cmd_reconstruct(cfg: &Config, log_path: &Path, opts: &ReconstructOptions, out: &Path) -> Result<ReconstructSummary> {
    let mut model = Model::new(cfg)?;
    let scene = model.scene.clone();
    let grid = scene.grid().clone();
    let frames = read_frames(log_path, &scene, cfg)?;
    if frames.is_empty() {
        return Err(Error::Format(format!("{} holds no reads for this scene", log_path.display())));
    }
    let (quiet, frames) = match &opts.baseline_log {
        Some(p) => (read_frames(p, &scene, cfg)?, frames),
        None => {
            let t0 = frames[0].timestamp;
            let quiet: Vec<RssFrame> = frames
                .iter()
                .filter(|f| f.timestamp < t0 + cfg.baseline_period_s)
                .cloned()
                .collect();
            let span = frames[frames.len() - 1].timestamp - t0;
            if quiet.len() < 2 || span < cfg.baseline_period_s {
                return Err(Error::arg(format!(
                    "baseline period absent: the log spans {span:.2} s, shorter than the {:.2} s quiet period; \
                     pass a quiet-room capture with --baseline <log>",
                    cfg.baseline_period_s
                )));
            }
            (quiet, frames)
        }
    };
    if quiet.is_empty() {
        return Err(Error::arg("baseline log holds no reads for this scene; pass a valid --baseline log"));
    }
    let run = run_detection(&mut model, cfg, &quiet, &frames)?;

    let mut dir = OutputDir::create(out)?;
    for (k, im) in run.images.iter().enumerate() {
        let mut csv = Vec::new();
        im.write_csv(&mut csv).map_err(|e| Error::io(out, e))?;
        check_image_csv(&csv, grid.n_u(), grid.n_v())?;
        dir.write(&format!("frames/frame_{k:04}.csv"), &csv)?;
        let pgm = to_graymap(im.values(), grid.n_u(), grid.n_v(), opts.gray_scale)?.to_bytes();
        Graymap::parse(&pgm)?;
        dir.write(&format!("frames/frame_{k:04}.pgm"), &pgm)?;
    }
    let mut det = Vec::new();
    detect::write_detections_csv(&run.detections, &grid, &mut det).map_err(|e| Error::io(out, e))?;
    let rows = detect::parse_detections_csv(std::str::from_utf8(&det).expect("ascii"))?;
    if rows.len() != run.detections.len() {
        return Err(Error::Format("detections CSV row count mismatch".into()));
    }
    dir.write("detections.csv", &det)?;

    let mut traj = String::from("timestamp,x,y,z\n");
    for (t, p) in &run.trajectory {
        let _ = writeln!(traj, "{t},{},{},{}", p.x, p.y, p.z);
    }
    dir.write("trajectory.csv", traj.as_bytes())?;

    if opts.render_weights {
        let mut csv = Vec::new();
        model.weights.write_csv(&mut csv).map_err(|e| Error::io(out, e))?;
        dir.write("weights/weights.csv", &csv)?;
        for (i, link) in model.links.iter().enumerate() {
            let field = link_membership_field(link, &grid, &cfg.weight);
            let pgm = membership_graymap(&field, grid.n_u(), grid.n_v())?.to_bytes();
            Graymap::parse(&pgm)?;
            dir.write(&format!("weights/link_{i:02}_{}.pgm", scene.tags()[i].id), &pgm)?;
        }
    }

    let summary = ReconstructSummary {
        frames: frames.len(),
        present: run.present_count(),
        threshold: run.threshold,
        track_start: run.trajectory.first().map(|p| p.1),
        track_end: run.trajectory.last().map(|p| p.1),
        manifest: PathBuf::new(),
    };
    let manifest = dir.finish(&format!("# {summary}\n"))?;
    Ok(ReconstructSummary { manifest, ..summary })
}

fn check_image_csv(bytes: &[u8], n_u: usize, n_v: usize) -> Result<()> {
    let text = std::str::from_utf8(bytes).map_err(|_| Error::Format("image CSV is not UTF-8".into()))?;
    let rows: Vec<&str> = text.lines().collect();
    let ok = rows.len() == n_v
        && rows.iter().all(|r| {
            let vals: Vec<&str> = r.split(',').collect();
            vals.len() == n_u && vals.iter().all(|v| v.parse::<f64>().is_ok_and(f64::is_finite))
        });
    if !ok {
        return Err(Error::Format("image CSV does not match the grid shape".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelScenario {
    PoorMultipathLos,
    RichMultipathLos,
    PoorMultipathNlos,
}

impl ChannelScenario {
    pub const ALL: [ChannelScenario; 3] = [
        ChannelScenario::PoorMultipathLos,
        ChannelScenario::RichMultipathLos,
        ChannelScenario::PoorMultipathNlos,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ChannelScenario::PoorMultipathLos => "los",
            ChannelScenario::RichMultipathLos => "rich_multipath",
            ChannelScenario::PoorMultipathNlos => "nlos",
        }
    }

    /// Fading model for one seed and the one-way envelope loss.
    fn channel(self, seed: u64, nlos_blockage_db: f64) -> (FadingModel, f64) {
        match self {
            ChannelScenario::PoorMultipathLos => (FadingModel::los(1.0), 0.0),
            ChannelScenario::RichMultipathLos => (FadingModel::rayleigh(seed), 0.0),
            ChannelScenario::PoorMultipathNlos => (FadingModel::rayleigh(seed), nlos_blockage_db),
        }
    }
}

pub const SWEEP_MATERIALS: [Material; 4] = [Material::Wood, Material::Plastic, Material::Glass, Material::Wall];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub material: Material,
    pub scenario: ChannelScenario,
    pub mean_rss_dbm: f64,
    pub miss_rate: f64,
    pub missing: bool,
}

/// Mean received power of a single tag for every material and channel
/// scenario, over `cfg.sweep_seeds` fading realizations.
pub fn material_sweep(cfg: &Config) -> Result<Vec<SweepCell>> {
    cfg.validate()?;
    if cfg.sweep_seeds == 0 {
        return Err(Error::arg("sweep needs at least one seed"));
    }
    let d = Link::new(0, cfg.reader_pos, cfg.sweep_tag_pos)?.length_m;
    let mut cells = Vec::new();
    for material in SWEEP_MATERIALS {
        let profile = cfg.material_profile(material);
        for scenario in ChannelScenario::ALL {
            let mut sum = 0.0;
            let mut missed = 0usize;
            for seed in 0..cfg.sweep_seeds {
                let (fading, blockage_db) = scenario.channel(seed, cfg.nlos_blockage_db);
                let h = sample_fading(&fading, &mut fading.rng()) * 10f64.powf(-blockage_db / 20.0);
                let raw = backscatter_rx_power(&cfg.rf, h, d)? + profile.offset_db;
                sum += raw;
                if censor(raw, cfg.threshold_dbm).is_none() {
                    missed += 1;
                }
            }
            let n = cfg.sweep_seeds as f64;
            let mean = sum / n;
            cells.push(SweepCell {
                material,
                scenario,
                mean_rss_dbm: mean,
                miss_rate: missed as f64 / n,
                missing: !(mean >= cfg.threshold_dbm),
            });
        }
    }
    Ok(cells)
}

pub const SWEEP_HEADER: &str = "material,scenario,mean_rss_dbm,miss_rate,missing";

pub fn write_sweep_csv(cells: &[SweepCell]) -> String {
    let mut s = format!("{SWEEP_HEADER}\n");
    for c in cells {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            c.material,
            c.scenario.name(),
            c.mean_rss_dbm,
            c.miss_rate,
            c.missing
        );
    }
    s
}

pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepCell>> {
    let mut lines = text.lines();
    if lines.next() != Some(SWEEP_HEADER) {
        return Err(Error::Format("sweep CSV header mismatch".into()));
    }
    lines
        .map(|l| {
            let bad = || Error::Format(format!("bad sweep line {l:?}"));
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 5 {
                return Err(bad());
            }
            let scenario = ChannelScenario::ALL
                .into_iter()
                .find(|s| s.name() == f[1])
                .ok_or_else(bad)?;
            Ok(SweepCell {
                material: f[0].parse()?,
                scenario,
                mean_rss_dbm: f[2].parse().map_err(|_| bad())?,
                miss_rate: f[3].parse().map_err(|_| bad())?,
                missing: f[4].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

pub fn cmd_material_sweep(cfg: &Config, out: &Path) -> Result<Vec<SweepCell>> {
    let cells = material_sweep(cfg)?;
    let text = write_sweep_csv(&cells);
    if parse_sweep_csv(&text)? != cells {
        return Err(Error::Format("sweep CSV does not re-parse to the computed table".into()));
    }
    let mut dir = OutputDir::create(out)?;
    dir.write("material_sweep.csv", text.as_bytes())?;
    dir.finish(&format!("# seeds 0..{}\n", cfg.sweep_seeds))?;
    Ok(cells)
}

/// Scene with one tag, used by examples that look at a single link.
pub fn single_tag_scene(cfg: &Config, material: Material) -> Result<Scene> {
    let tag = Tag::new("sweep", cfg.sweep_tag_pos).with_material(cfg.material_profile(material));
    Scene::new(cfg.reader_pos, vec![tag], cfg.grid.build()?)
}
