//! Baseline and walk captures of the reference scene: per-link static RSS
//! and the largest dip each link sees while the person crosses.

use backscatter_rti::config::Config;
use backscatter_rti::link_budget::RfParams;
use backscatter_rti::pipeline::simulate_scenarios;
use backscatter_rti::sim::static_rss;

fn main() -> backscatter_rti::Result<()> {
    let cfg = Config::default();
    let scene = cfg.scene()?;
    let logs = simulate_scenarios(&cfg)?;
    let levels = static_rss(&scene, &cfg.rf, &cfg.fading)?;
    let one_way = static_rss(
        &scene,
        &RfParams {
            round_trip_path_loss: false,
            ..cfg.rf
        },
        &cfg.fading,
    )?;
    println!(
        "baseline {} frames, walk {} frames at {} Hz, noise {} dB",
        logs.baseline.len(),
        logs.walk.len(),
        cfg.frame_rate_hz,
        cfg.noise_db_std
    );
    println!("tag          static    one-way L   deepest walk dip   at t");
    for (i, tag) in scene.tags().iter().enumerate() {
        let (t, dip) = logs
            .walk
            .iter()
            .filter_map(|f| f.rss_dbm[i].map(|v| (f.timestamp, v - levels[i])))
            .fold((0.0, 0.0), |best, cur| if cur.1 < best.1 { cur } else { best });
        println!(
            "{}  {:8.2}  {:10.2}  {:12.2} dB  {:5.1} s",
            tag.id, levels[i], one_way[i], dip, t
        );
    }
    Ok(())
}
