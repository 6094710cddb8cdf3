//! Plot-ready exports: ternary coordinates with an optional SVG scatter, and
//! per-statistic image maps as 16-bit PGM plus CSV.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::tables::format_float;
use super::{write_atomic, write_json};
use crate::error::{Error, Result};
use crate::geometry::SimplexVector;
use crate::uq::HdrResult;

const SQRT3_2: f64 = 0.866_025_403_784_438_6;

/// Corner positions: a segment for P = 2, the unit-edge triangle
/// `(0,0) (1,0) (½, √3/2)` for P = 3, a regular tetrahedron for P = 4.
fn corners(p: usize) -> Result<Vec<Vec<f64>>> {
    match p {
        2 => Ok(vec![vec![0.0, 0.0], vec![1.0, 0.0]]),
        3 => Ok(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, SQRT3_2]]),
        4 => Ok(vec![
            vec![0.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.5, SQRT3_2, 0.0],
            vec![0.5, SQRT3_2 / 3.0, (2.0f64 / 3.0).sqrt()],
        ]),
        _ => Err(Error::InvalidDimension(format!(
            "ternary export supports 2 to 4 materials, got {p}"
        ))),
    }
}

/// Cartesian position of a barycentric point.
pub fn ternary_coordinates(a: &[f64]) -> Result<Vec<f64>> {
    let c = corners(a.len())?;
    let dim = c[0].len();
    Ok((0..dim)
        .map(|d| a.iter().zip(&c).map(|(w, v)| w * v[d]).sum())
        .collect())
}

/// Inverse of [`ternary_coordinates`].
pub fn barycentric_from_cartesian(xy: &[f64], p: usize) -> Result<Vec<f64>> {
    let c = corners(p)?;
    if p == 2 {
        return Ok(vec![1.0 - xy[0], xy[0]]);
    }
    let dim = c[0].len();
    if xy.len() != dim {
        return Err(Error::DimensionMismatch {
            what: "cartesian coordinates",
            expected: dim,
            found: xy.len(),
        });
    }
    let m = DMatrix::from_fn(p, p, |r, k| if r < dim { c[k][r] } else { 1.0 });
    let rhs = DVector::from_fn(p, |r, _| if r < dim { xy[r] } else { 1.0 });
    let sol = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("corner matrix".into()))?;
    Ok(sol.as_slice().to_vec())
}

/// Text artifacts of one ternary plot.
#[derive(Debug, Clone, PartialEq)]
pub struct TernaryExport {
    pub samples_csv: String,
    pub means_csv: String,
    pub hdr_csv: Option<String>,
    pub svg: Option<String>,
}

impl TernaryExport {
    /// Writes `{stem}_samples.csv`, `{stem}_means.csv`, and when present
    /// `{stem}_hdr.csv` and `{stem}.svg`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        let mut files = vec![
            (dir.join(format!("{stem}_samples.csv")), &self.samples_csv),
            (dir.join(format!("{stem}_means.csv")), &self.means_csv),
        ];
        if let Some(h) = &self.hdr_csv {
            files.push((dir.join(format!("{stem}_hdr.csv")), h));
        }
        if let Some(s) = &self.svg {
            files.push((dir.join(format!("{stem}.svg")), s));
        }
        for (path, text) in &files {
            write_atomic(path, text.as_bytes())?;
        }
        Ok(files.into_iter().map(|(p, _)| p).collect())
    }
}

fn axis_names(dim: usize) -> &'static [&'static str] {
    &["x", "y", "z"][..dim]
}

fn push_row(out: &mut String, cells: &[String]) {
    out.push_str(&cells.join(","));
    out.push('\n');
}

/// Ternary (P = 3) or tetrahedral (P = 4) coordinates of a sample cloud, its
/// two means and, optionally, the HDR cells. The SVG is produced for P ≤ 3.
pub fn export_ternary(
    samples: &[SimplexVector],
    geodesic_mean: &SimplexVector,
    euclidean_mean: &SimplexVector,
    hdr: Option<&HdrResult>,
    svg: bool,
) -> Result<TernaryExport> {
    let p = geodesic_mean.dim();
    let dim = corners(p)?[0].len();
    let axes = axis_names(dim)
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>();

    let mut samples_csv = String::new();
    push_row(&mut samples_csv, &axes);
    let mut points = Vec::with_capacity(samples.len());
    for a in samples {
        if a.dim() != p {
            return Err(Error::DimensionMismatch {
                what: "sample components",
                expected: p,
                found: a.dim(),
            });
        }
        let xy = ternary_coordinates(a.as_slice())?;
        push_row(
            &mut samples_csv,
            &xy.iter().map(|v| format_float(*v)).collect::<Vec<_>>(),
        );
        points.push(xy);
    }

    let gm = ternary_coordinates(geodesic_mean.as_slice())?;
    let em = ternary_coordinates(euclidean_mean.as_slice())?;
    let mut means_csv = String::new();
    push_row(
        &mut means_csv,
        &[vec!["kind".to_string()], axes.clone()].concat(),
    );
    for (kind, xy) in [("geodesic", &gm), ("euclidean", &em)] {
        push_row(
            &mut means_csv,
            &[
                vec![kind.to_string()],
                xy.iter().map(|v| format_float(*v)).collect(),
            ]
            .concat(),
        );
    }

    let mut polygons = Vec::new();
    let hdr_csv = match hdr {
        Some(h) => {
            let mut csv = String::new();
            push_row(
                &mut csv,
                &[vec!["cell".to_string(), "vertex".to_string()], axes.clone()].concat(),
            );
            for (ci, cell) in h.region.iter().enumerate() {
                let mut poly = Vec::new();
                for (vi, bary) in cell.vertices().iter().enumerate() {
                    if bary.len() != p {
                        return Err(Error::DimensionMismatch {
                            what: "HDR cell components",
                            expected: p,
                            found: bary.len(),
                        });
                    }
                    let xy = ternary_coordinates(bary)?;
                    push_row(
                        &mut csv,
                        &[
                            vec![ci.to_string(), vi.to_string()],
                            xy.iter().map(|v| format_float(*v)).collect(),
                        ]
                        .concat(),
                    );
                    poly.push(xy);
                }
                polygons.push(poly);
            }
            Some(csv)
        }
        None => None,
    };

    let svg = (svg && dim == 2).then(|| render_svg(&points, &polygons, &gm, &em));
    Ok(TernaryExport {
        samples_csv,
        means_csv,
        hdr_csv,
        svg,
    })
}

fn render_svg(points: &[Vec<f64>], polygons: &[Vec<Vec<f64>>], gm: &[f64], em: &[f64]) -> String {
    const SIZE: f64 = 600.0;
    const PAD: f64 = 30.0;
    let scale = SIZE - 2.0 * PAD;
    let px = |v: &[f64]| (PAD + v[0] * scale, SIZE - PAD - v[1] * scale);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for poly in polygons {
        if poly.len() < 3 {
            let (x, y) = px(&poly[0]);
            let _ = writeln!(
                s,
                r##"<circle cx="{x:.3}" cy="{y:.3}" r="3" fill="#9ecae1" fill-opacity="0.5"/>"##
            );
            continue;
        }
        let pts = poly
            .iter()
            .map(|v| {
                let (x, y) = px(v);
                format!("{x:.3},{y:.3}")
            })
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(
            s,
            r##"<polygon points="{pts}" fill="#9ecae1" stroke="none"/>"##
        );
    }
    let tri = corners(3).expect("three corners");
    let outline = tri
        .iter()
        .map(|v| {
            let (x, y) = px(v);
            format!("{x:.3},{y:.3}")
        })
        .collect::<Vec<_>>()
        .join(" ");
    let _ = writeln!(
        s,
        r#"<polygon points="{outline}" fill="none" stroke="black" stroke-width="1"/>"#
    );
    for p in points {
        let (x, y) = px(p);
        let _ = writeln!(
            s,
            r#"<circle cx="{x:.3}" cy="{y:.3}" r="1" fill="black" fill-opacity="0.3"/>"#
        );
    }
    for (v, color) in [(em, "red"), (gm, "gold")] {
        let (x, y) = px(v);
        let _ = writeln!(
            s,
            r#"<circle cx="{x:.3}" cy="{y:.3}" r="5" fill="{color}" stroke="black"/>"#
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Linear map from data values to 16-bit gray levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MapScale {
    pub min: f64,
    pub max: f64,
    /// Set when `max == min`; every pixel is then written as 0.
    pub degenerate: bool,
}

/// Binary 16-bit PGM (big-endian samples), min-max scaled.
pub fn map_to_pgm(map: &[f64], width: usize, height: usize) -> Result<(Vec<u8>, MapScale)> {
    if map.len() != width * height {
        return Err(Error::DimensionMismatch {
            what: "map pixels",
            expected: width * height,
            found: map.len(),
        });
    }
    let finite = map.iter().copied().filter(|v| v.is_finite());
    let min = finite.clone().fold(f64::INFINITY, f64::min);
    let max = finite.fold(f64::NEG_INFINITY, f64::max);
    let degenerate = !(max > min);
    let (min, max) = if min.is_finite() {
        (min, max)
    } else {
        (0.0, 0.0)
    };
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    for &v in map {
        let level = if degenerate || !v.is_finite() {
            0u16
        } else {
            (((v - min) / (max - min)) * 65535.0)
                .round()
                .clamp(0.0, 65535.0) as u16
        };
        out.extend_from_slice(&level.to_be_bytes());
    }
    Ok((
        out,
        MapScale {
            min,
            max,
            degenerate,
        },
    ))
}

fn map_to_csv(map: &[f64], width: usize) -> String {
    let mut s = String::new();
    for row in map.chunks(width) {
        push_row(
            &mut s,
            &row.iter().map(|v| format_float(*v)).collect::<Vec<_>>(),
        );
    }
    s
}

/// Writes `{name}.pgm` and `{name}.csv` per map plus `maps.json` holding
/// every scale.
pub fn export_maps(
    dir: &Path,
    maps: &[(String, Vec<f64>)],
    width: usize,
    height: usize,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut scales = BTreeMap::new();
    for (name, map) in maps {
        let (pgm, scale) = map_to_pgm(map, width, height)?;
        let pgm_path = dir.join(format!("{name}.pgm"));
        let csv_path = dir.join(format!("{name}.csv"));
        write_atomic(&pgm_path, &pgm)?;
        write_atomic(&csv_path, map_to_csv(map, width).as_bytes())?;
        scales.insert(name.clone(), scale);
        written.push(pgm_path);
        written.push(csv_path);
    }
    #[derive(Serialize)]
    struct Sidecar<'a> {
        width: usize,
        height: usize,
        scales: &'a BTreeMap<String, MapScale>,
    }
    let sidecar = dir.join("maps.json");
    write_json(
        &sidecar,
        &Sidecar {
            width,
            height,
            scales: &scales,
        },
    )?;
    written.push(sidecar);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corners_and_centroid() {
        assert_eq!(
            ternary_coordinates(&[1.0, 0.0, 0.0]).unwrap(),
            vec![0.0, 0.0]
        );
        assert_eq!(
            ternary_coordinates(&[0.0, 0.0, 1.0]).unwrap(),
            vec![0.5, SQRT3_2]
        );
        let c = ternary_coordinates(&[1.0 / 3.0; 3]).unwrap();
        assert!((c[0] - 0.5).abs() < 1e-15 && (c[1] - SQRT3_2 / 3.0).abs() < 1e-15);
        assert!(ternary_coordinates(&[0.2; 5]).is_err());
    }

    #[test]
    fn tetrahedron_is_regular() {
        let c = corners(4).unwrap();
        for i in 0..4 {
            for j in i + 1..4 {
                let d: f64 = (0..3).map(|k| (c[i][k] - c[j][k]).powi(2)).sum();
                assert!((d - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn constant_map_is_degenerate() {
        let (pgm, scale) = map_to_pgm(&[0.3; 6], 3, 2).unwrap();
        assert!(scale.degenerate);
        assert!(pgm.ends_with(&[0u8; 12]));
        assert!(pgm.starts_with(b"P5\n3 2\n65535\n"));
    }

    #[test]
    fn extremes_hit_full_range() {
        let (pgm, scale) = map_to_pgm(&[1.0, 2.0], 2, 1).unwrap();
        assert_eq!(&pgm[pgm.len() - 4..], &[0, 0, 255, 255]);
        assert_eq!((scale.min, scale.max), (1.0, 2.0));
    }

    #[test]
    fn svg_only_in_two_dimensions() {
        let a = SimplexVector::uniform(4).unwrap();
        let t = export_ternary(&[a.clone()], &a, &a, None, true).unwrap();
        assert!(t.svg.is_none());
        assert!(t.samples_csv.starts_with("x,y,z\n"));
        let b = SimplexVector::uniform(3).unwrap();
        let t = export_ternary(&[b.clone()], &b, &b, None, true).unwrap();
        assert!(t.svg.unwrap().contains("<svg"));
    }
}
