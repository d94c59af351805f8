//! Write a simulated capture as a reader log, parse it back, and assemble
//! frames. Also shows how malformed lines are reported.

use std::io::Cursor;

use backscatter_rti::config::Config;
use backscatter_rti::ingest::{assemble_frames, parse_rssi_log, write_rssi_log, FramePolicy};
use backscatter_rti::pipeline::simulate_scenarios;

fn main() -> backscatter_rti::Result<()> {
    let mut cfg = Config::default();
    // push the lower row towards the threshold so some reads go missing
    cfg.apply_str("threshold_dbm = -50\nnoise_db_std = 2")?;
    let scene = cfg.scene()?;
    let frames = simulate_scenarios(&cfg)?.walk;

    let mut log = Vec::new();
    write_rssi_log(&frames, &scene.tag_ids(), &mut log)?;
    let text = String::from_utf8(log.clone()).expect("ascii log");
    println!("{} bytes, first lines:", log.len());
    for l in text.lines().take(4) {
        println!("  {l}");
    }

    let parsed = parse_rssi_log(Cursor::new(&log))?;
    let back = assemble_frames(&parsed.records, &scene.tag_ids(), 1.0 / cfg.frame_rate_hz, FramePolicy::MeanInWindow)?;
    let missing: usize = frames.iter().map(|f| f.rss_dbm.iter().filter(|v| v.is_none()).count()).sum();
    println!(
        "{} records -> {} frames, {missing} missing reads, identical: {}",
        parsed.records.len(),
        back.frames.len(),
        back.frames == frames
    );

    let messy = "timestamp,epc,rssi_dbm\n0.0,E200-0001,-40.1\n0.1,E200-0002,abc\n0.2,E200-0003,-40.5,extra\n\n0.3,E200-9999,-41\n";
    let parsed = parse_rssi_log(Cursor::new(messy))?;
    println!("messy log: {} records", parsed.records.len());
    for d in &parsed.diagnostics {
        println!("  line {}: {}", d.line, d.message);
    }
    let assembled = assemble_frames(&parsed.records, &scene.tag_ids(), 0.2, FramePolicy::LastValueHold)?;
    for d in &assembled.diagnostics {
        println!("  record {}: {}", d.line, d.message);
    }
    Ok(())
}
