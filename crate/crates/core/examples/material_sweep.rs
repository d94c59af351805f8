//! Mean received power of a single tag on each substrate material under the
//! three channel conditions, averaged over fading realizations.

use backscatter_rti::config::Config;
use backscatter_rti::pipeline::{material_sweep, ChannelScenario, SWEEP_MATERIALS};

fn main() -> backscatter_rti::Result<()> {
    let cfg = Config::default();
    let cells = material_sweep(&cfg)?;
    print!("{:10}", "");
    for s in ChannelScenario::ALL {
        print!("{:>18}", s.name());
    }
    println!();
    for m in SWEEP_MATERIALS {
        print!("{:10}", m.to_string());
        for c in cells.iter().filter(|c| c.material == m) {
            let mark = if c.missing { "*" } else { " " };
            print!("{:>10.2} dBm{mark}{:3.0}%", c.mean_rss_dbm, c.miss_rate * 100.0);
        }
        println!();
    }
    println!("(* mean below {} dBm; percentages are per-draw miss rates)", cfg.threshold_dbm);
    Ok(())
}
