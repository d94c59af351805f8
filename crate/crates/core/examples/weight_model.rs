//! Ellipsoid membership of every reader-to-tag link on the imaging plane,
//! written as one graymap per link (members black) plus the sparse matrix.
//!
//! `cargo run --example weight_model -- [out_dir]`

use std::fs;
use std::path::PathBuf;

use backscatter_rti::config::Config;
use backscatter_rti::geometry::make_links;
use backscatter_rti::render::membership_graymap;
use backscatter_rti::weight::{build_weight_matrix, link_membership_field};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "weight_model_out".into()).into();
    fs::create_dir_all(&out)?;

    let cfg = Config::default();
    let scene = cfg.scene()?;
    let grid = scene.grid();
    let links = make_links(&scene)?;
    let w = build_weight_matrix(grid, &links, &cfg.weight)?;
    println!("{} links x {} cells, {} nonzeros", w.q(), w.n(), w.nnz());

    for (i, link) in links.iter().enumerate() {
        let field = link_membership_field(link, grid, &cfg.weight);
        let name = format!("link_{i:02}_{}.pgm", scene.tags()[i].id);
        fs::write(out.join(&name), membership_graymap(&field, grid.n_u(), grid.n_v())?.to_bytes())?;
        println!(
            "{name}: d = {:.3} m, {:3} cells, weight {:.4}",
            link.length_m,
            w.row_members(i).len(),
            w.row_value(i)
        );
    }

    // coarse view of the first upper-row link, top row first
    let field = link_membership_field(&links[0], grid, &cfg.weight);
    for row in (0..grid.n_v()).rev() {
        let line: String = (0..grid.n_u())
            .map(|col| if field[row * grid.n_u() + col] { '#' } else { '.' })
            .collect();
        println!("{line}");
    }

    let mut csv = Vec::new();
    w.write_csv(&mut csv)?;
    fs::write(out.join("weights.csv"), csv)?;
    println!("wrote {}", out.display());
    Ok(())
}
