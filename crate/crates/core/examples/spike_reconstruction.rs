//! Forward-project a single attenuating cell through W, reconstruct it
//! with decreasing regularization, and report where the image peaks.

use backscatter_rti::config::Config;
use backscatter_rti::detect::locate_peak;
use backscatter_rti::geometry::make_links;
use backscatter_rti::solver::{covariance_matrix, precompute_projection, reconstruct, RtiParams};
use backscatter_rti::weight::build_weight_matrix;

fn main() -> backscatter_rti::Result<()> {
    let cfg = Config::default();
    let scene = cfg.scene()?;
    let grid = scene.grid();
    let links = make_links(&scene)?;
    let w = build_weight_matrix(grid, &links, &cfg.weight)?;

    // a cell every link sees
    let spike = (0..grid.len())
        .max_by_key(|&j| (0..w.q()).filter(|&i| w.get(i, j) > 0.0).count())
        .unwrap();
    let mut x = vec![0.0; grid.len()];
    x[spike] = 1.0;
    let y = w.apply(&x)?;
    let c = covariance_matrix(grid, &cfg.rti)?;
    println!("spike at cell {spike} {:?}", grid.col_row(spike)?);

    for eta in [cfg.rti.eta, 1e-1, 1e-3, 1e-6] {
        let params = RtiParams { eta, ..cfg.rti };
        let p = precompute_projection(&w, &c, params.eta)?;
        let im = reconstruct(&p, &y, 0.0)?;
        let (j, v) = locate_peak(&im);
        let (col, row) = grid.col_row(j)?;
        let (sc, sr) = grid.col_row(spike)?;
        let dist = col.abs_diff(sc).max(row.abs_diff(sr));
        println!("eta {eta:8.1e}: peak cell {j:3} ({col:2},{row:2}) value {v:.4}, {dist} cell(s) from spike");
    }
    Ok(())
}
