//! Presence decisions, peak locations and trajectories from image sequences.

use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::{Grid, Point3};
use crate::solver::AttenuationImage;

/// Lower bound for a calibrated threshold, so a noise-free baseline does not
/// yield a zero threshold that every zero image would meet.
pub const MIN_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub timestamp: f64,
    pub present: bool,
    pub peak_cell: usize,
    pub peak_value: f64,
    pub peak_point: Point3,
}

/// Argmax over cells, lowest index on ties.
pub fn locate_peak(image: &AttenuationImage) -> (usize, f64) {
    let mut best = (0, image.values()[0]);
    for (j, &v) in image.values().iter().enumerate().skip(1) {
        if v > best.1 {
            best = (j, v);
        }
    }
    best
}

pub fn presence(image: &AttenuationImage, threshold: f64) -> bool {
    locate_peak(image).1 >= threshold
}

/// `mean + 3·std` of the peak values of quiet-period images.
pub fn calibrate_threshold(baseline_images: &[AttenuationImage]) -> Result<f64> {
    if baseline_images.is_empty() {
        return Err(Error::arg("threshold calibration needs at least one baseline image"));
    }
    let peaks: Vec<f64> = baseline_images.iter().map(|im| locate_peak(im).1).collect();
    let n = peaks.len() as f64;
    let mean = peaks.iter().sum::<f64>() / n;
    let std = if peaks.len() > 1 {
        (peaks.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok((mean + 3.0 * std).max(MIN_THRESHOLD))
}

pub fn detect(image: &AttenuationImage, threshold: f64) -> Detection {
    let (peak_cell, peak_value) = locate_peak(image);
    Detection {
        timestamp: image.timestamp,
        present: peak_value >= threshold,
        peak_cell,
        peak_value,
        peak_point: image
            .grid()
            .cell_center(peak_cell)
            .expect("peak index comes from the image itself"),
    }
}

/// Peak points of the present detections, in input order, optionally with a
/// 3-point coordinate-wise running median (end points kept as is).
pub fn extract_trajectory(detections: &[Detection], smooth: bool) -> Vec<(f64, Point3)> {
    let raw: Vec<(f64, Point3)> = detections
        .iter()
        .filter(|d| d.present)
        .map(|d| (d.timestamp, d.peak_point))
        .collect();
    if !smooth || raw.len() < 3 {
        return raw;
    }
    let med = |a: f64, b: f64, c: f64| a.max(b).min(a.min(b).max(c));
    let mut out = raw.clone();
    for k in 1..raw.len() - 1 {
        let (p, q, r) = (raw[k - 1].1, raw[k].1, raw[k + 1].1);
        out[k].1 = Point3::new(med(p.x, q.x, r.x), med(p.y, q.y, r.y), med(p.z, q.z, r.z));
    }
    out
}

/// `timestamp,present,peak_u,peak_v,peak_value`, with `peak_u`/`peak_v`
/// the in-plane coordinates (meters) of the peak cell center.
pub fn write_detections_csv<W: Write>(detections: &[Detection], grid: &Grid, mut out: W) -> std::io::Result<()> {
    writeln!(out, "timestamp,present,peak_u,peak_v,peak_value")?;
    for d in detections {
        let (u, v) = grid.project(d.peak_point);
        writeln!(out, "{},{},{u},{v},{}", d.timestamp, d.present, d.peak_value)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRow {
    pub timestamp: f64,
    pub present: bool,
    pub peak_u: f64,
    pub peak_v: f64,
    pub peak_value: f64,
}

pub fn parse_detections_csv(text: &str) -> Result<Vec<DetectionRow>> {
    let mut lines = text.lines();
    if lines.next() != Some("timestamp,present,peak_u,peak_v,peak_value") {
        return Err(Error::Format("detections CSV header mismatch".into()));
    }
    lines
        .enumerate()
        .map(|(i, l)| {
            let bad = || Error::Format(format!("detections line {}: {l:?}", i + 2));
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 5 {
                return Err(bad());
            }
            Ok(DetectionRow {
                timestamp: f[0].parse().map_err(|_| bad())?,
                present: f[1].parse().map_err(|_| bad())?,
                peak_u: f[2].parse().map_err(|_| bad())?,
                peak_v: f[3].parse().map_err(|_| bad())?,
                peak_value: f[4].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_grid;
    use proptest::prelude::*;

    fn grid() -> Grid {
        build_grid(Point3::ORIGIN, Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 0.0, 1.0), 4, 3, 0.1).unwrap()
    }

    fn image(values: Vec<f64>) -> AttenuationImage {
        AttenuationImage::new(grid(), values, 0.0).unwrap()
    }

    #[test]
    fn single_max() {
        let mut v = vec![0.0; 12];
        v[5] = 2.5;
        assert_eq!(locate_peak(&image(v)), (5, 2.5));
    }

    #[test]
    fn ties_go_to_lowest_index() {
        assert_eq!(locate_peak(&image(vec![0.0; 12])), (0, 0.0));
        let mut v = vec![-1.0; 12];
        v[3] = 4.0;
        v[9] = 4.0;
        assert_eq!(locate_peak(&image(v)), (3, 4.0));
    }

    #[test]
    fn presence_examples() {
        assert!(!presence(&image(vec![0.0; 12]), 0.1));
        let mut v = vec![0.0; 12];
        v[7] = 2.0;
        assert!(presence(&image(v), 1.0));
    }

    #[test]
    fn threshold_calibration() {
        let imgs: Vec<_> = [1.0, 2.0, 3.0]
            .iter()
            .map(|&p| {
                let mut v = vec![0.0; 12];
                v[0] = p;
                image(v)
            })
            .collect();
        assert!((calibrate_threshold(&imgs).unwrap() - 5.0).abs() < 1e-12);
        let zeros = vec![image(vec![0.0; 12]); 4];
        assert_eq!(calibrate_threshold(&zeros).unwrap(), MIN_THRESHOLD);
        assert!(calibrate_threshold(&[]).is_err());
    }

    fn det(t: f64, present: bool, p: Point3) -> Detection {
        Detection {
            timestamp: t,
            present,
            peak_cell: 0,
            peak_value: 1.0,
            peak_point: p,
        }
    }

    #[test]
    fn trajectories() {
        assert!(extract_trajectory(&[det(0.0, false, Point3::ORIGIN)], true).is_empty());
        let one = extract_trajectory(&[det(0.0, true, Point3::new(1.0, 0.0, 0.0))], true);
        assert_eq!(one, vec![(0.0, Point3::new(1.0, 0.0, 0.0))]);
        // a one-frame flicker is removed by the median
        let ds: Vec<_> = [0.0, 0.1, 0.9, 0.3, 0.4]
            .iter()
            .enumerate()
            .map(|(k, &x)| det(k as f64, true, Point3::new(x, 0.0, 0.5)))
            .collect();
        let xs: Vec<f64> = extract_trajectory(&ds, true).iter().map(|(_, p)| p.x).collect();
        assert_eq!(xs, vec![0.0, 0.1, 0.3, 0.4, 0.4]);
    }

    #[test]
    fn detections_csv_round_trip() {
        let g = grid();
        let d = detect(&image((0..12).map(f64::from).collect()), 5.0);
        assert!(d.present);
        assert_eq!(d.peak_cell, 11);
        let mut buf = Vec::new();
        write_detections_csv(std::slice::from_ref(&d), &g, &mut buf).unwrap();
        let rows = parse_detections_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].present);
        assert!((rows[0].peak_u - 0.35).abs() < 1e-12);
        assert!((rows[0].peak_v - 0.25).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn argmax_scale_invariant(v in proptest::collection::vec(-5.0..5.0f64, 12), s in 0.01..100.0f64) {
            let scaled: Vec<f64> = v.iter().map(|x| x * s).collect();
            prop_assert_eq!(locate_peak(&image(v)).0, locate_peak(&image(scaled)).0);
        }

        #[test]
        fn presence_monotone_in_threshold(v in proptest::collection::vec(-5.0..5.0f64, 12), t1 in 0.01..5.0f64, dt in 0.0..5.0f64) {
            let im = image(v);
            prop_assert!(!presence(&im, t1 + dt) || presence(&im, t1));
        }

        #[test]
        fn smoothed_points_stay_in_bounds(cells in proptest::collection::vec(0usize..12, 0..20)) {
            let g = grid();
            let ds: Vec<_> = cells
                .iter()
                .enumerate()
                .map(|(k, &j)| det(k as f64, true, g.cell_center(j).unwrap()))
                .collect();
            for (_, p) in extract_trajectory(&ds, false) {
                prop_assert!(g.centers().contains(&p));
            }
            for (_, p) in extract_trajectory(&ds, true) {
                let (u, v) = g.project(p);
                prop_assert!((0.0..=0.4).contains(&u) && (0.0..=0.3).contains(&v));
            }
        }
    }
}
