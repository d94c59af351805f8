//! Received backscatter power versus distance for the reference radio, the
//! effect of each substrate material, and a PIE-encoded reader command.

use backscatter_rti::link_budget::{
    backscatter_rx_power, censor, path_loss, pie_encode, Level, Material, MaterialProfile, RfParams,
    MISSING_READ_THRESHOLD_DBM,
};

fn main() -> backscatter_rti::Result<()> {
    let rf = RfParams::default();
    let one_way = RfParams {
        round_trip_path_loss: false,
        ..rf
    };

    println!("  d [m]   L(d)        rx [dBm]   one-way L [dBm]");
    for d in [0.5, 1.0, 2.0, 2.1, 4.0, 8.0] {
        println!(
            "{d:6.2}   {:.4e}   {:8.2}   {:8.2}",
            path_loss(rf.freq_hz, d)?,
            backscatter_rx_power(&rf, 1.0, d)?,
            backscatter_rx_power(&one_way, 1.0, d)?,
        );
    }

    // deep fade on the wall-mounted tag at 2 m
    println!("\nmaterial  offset  h=1.0      h=0.1");
    for m in Material::ALL {
        let p = MaterialProfile::from(m);
        let show = |h: f64| -> backscatter_rti::Result<String> {
            let rss = backscatter_rx_power(&rf, h, 2.0)? + p.offset_db;
            Ok(match censor(rss, MISSING_READ_THRESHOLD_DBM) {
                Some(v) => format!("{v:8.2}"),
                None => "  missing".to_string(),
            })
        };
        println!("{:8} {:6.1}  {}  {}", m.to_string(), p.offset_db, show(1.0)?, show(0.1)?);
    }

    let t_unit = 12.5e-6;
    let bits = [true, false, true, true, false];
    let symbols = pie_encode(&bits, t_unit)?;
    let wave: String = symbols
        .iter()
        .map(|&(level, dur)| {
            let n = (dur / t_unit * 2.0).round() as usize;
            let c = if level == Level::High { '‾' } else { '_' };
            std::iter::repeat_n(c, n).collect::<String>()
        })
        .collect();
    let total: f64 = symbols.iter().map(|s| s.1).sum();
    println!("\nPIE {bits:?}: {wave}  ({:.1} µs)", total * 1e6);
    Ok(())
}
