//! Full pipeline on the simulated walk: baseline statistics, presence
//! threshold, per-frame peaks and the extracted trajectory, with an ASCII
//! rendering of the strongest frame.

use backscatter_rti::config::Config;
use backscatter_rti::pipeline::{run_detection, simulate_scenarios, Model};

fn main() -> backscatter_rti::Result<()> {
    let cfg = Config::default();
    let logs = simulate_scenarios(&cfg)?;
    let mut model = Model::new(&cfg)?;
    let run = run_detection(&mut model, &cfg, &logs.baseline, &logs.walk)?;
    let grid = model.scene.grid().clone();
    let path = cfg.walk.path()?;

    let false_alarms = run.baseline_detections.iter().filter(|d| d.present).count();
    println!(
        "threshold {:.4} (false alarms on baseline: {false_alarms}/{})",
        run.threshold,
        run.baseline_detections.len()
    );
    println!("   t     target x   peak x   peak z   value");
    for d in run.detections.iter().filter(|d| d.present) {
        let target = path.position_at(d.timestamp);
        println!(
            "{:5.1}   {:8.2}  {:7.2}  {:7.2}  {:.3}",
            d.timestamp, target.x, d.peak_point.x, d.peak_point.z, d.peak_value
        );
    }
    let xs: Vec<String> = run.trajectory.iter().map(|(_, p)| format!("{:.2}", p.x)).collect();
    println!("trajectory x: {}", xs.join(" "));

    let tags = model.scene.tags();
    let nearest = |x: f64| {
        tags[..4]
            .iter()
            .min_by(|a, b| (a.pos.x - x).abs().total_cmp(&(b.pos.x - x).abs()))
            .map(|t| t.id.clone())
            .unwrap_or_default()
    };
    if let (Some(first), Some(last)) = (run.trajectory.first(), run.trajectory.last()) {
        println!("enters near {}, leaves near {}", nearest(first.1.x), nearest(last.1.x));
    }

    let Some(best) = run.images.iter().max_by(|a, b| a.min_max().1.total_cmp(&b.min_max().1)) else {
        return Ok(());
    };
    let (lo, hi) = best.min_max();
    let shades = [' ', '.', ':', '+', '*', '#'];
    println!("\nframe at t = {:.1} s (top row = highest cell row)", best.timestamp);
    for row in (0..grid.n_v()).rev() {
        let line: String = best.values()[row * grid.n_u()..(row + 1) * grid.n_u()]
            .iter()
            .map(|v| shades[(((v - lo) / (hi - lo)) * 5.0).round() as usize])
            .collect();
        println!("|{line}|");
    }
    Ok(())
}
