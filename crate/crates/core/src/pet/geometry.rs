use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::DenseMatrix;

/// Square pixel grid inside a ring of detectors.
///
/// Pixels have unit side and the grid is centred on the origin, so it spans
/// `[-n/2, n/2]²`. Detectors sit on the circumscribing circle (radius
/// `n/√2`) at angles `2π(k + ½)/N`; the half-step offset keeps detectors off
/// the grid corners. Every unordered detector pair is one line of flight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PetGeometry {
    pub grid_side: usize,
    pub n_detectors: usize,
}

impl PetGeometry {
    pub fn new(grid_side: usize, n_detectors: usize) -> Result<Self> {
        if grid_side == 0 {
            return Err(Error::invalid("grid side must be at least 1"));
        }
        if n_detectors < 2 {
            return Err(Error::invalid("at least two detectors are needed"));
        }
        Ok(PetGeometry {
            grid_side,
            n_detectors,
        })
    }

    pub fn n_pixels(&self) -> usize {
        self.grid_side * self.grid_side
    }

    /// `C(N, 2)`.
    pub fn n_rays(&self) -> usize {
        self.n_detectors * (self.n_detectors - 1) / 2
    }

    pub fn radius(&self) -> f64 {
        self.grid_side as f64 / std::f64::consts::SQRT_2
    }

    pub fn detector_position(&self, k: usize) -> (f64, f64) {
        let angle = 2.0 * PI * (k as f64 + 0.5) / self.n_detectors as f64;
        let r = self.radius();
        (r * angle.cos(), r * angle.sin())
    }

    /// Detector pairs `(a, b)`, `a < b`, in row order of the system matrix.
    pub fn rays(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n_detectors;
        (0..n).flat_map(move |a| (a + 1..n).map(move |b| (a, b)))
    }

    /// Row-major pixel index of the pixel containing `(x, y)`; row 0 is the
    /// top of the image.
    pub fn pixel_at(&self, x: f64, y: f64) -> usize {
        let n = self.grid_side;
        let h = n as f64 / 2.0;
        let col = ((x + h).floor().max(0.0) as usize).min(n - 1);
        let row = ((h - y).floor().max(0.0) as usize).min(n - 1);
        row * n + col
    }

    /// Centre of pixel `j`.
    pub fn pixel_center(&self, j: usize) -> (f64, f64) {
        let n = self.grid_side;
        let h = n as f64 / 2.0;
        let (row, col) = (j / n, j % n);
        (col as f64 + 0.5 - h, h - row as f64 - 0.5)
    }

    /// Chord length of the segment `p0 → p1` inside every pixel it crosses,
    /// by walking the sorted grid-line crossings.
    pub fn trace_segment(&self, p0: (f64, f64), p1: (f64, f64)) -> Vec<(usize, f64)> {
        let n = self.grid_side;
        let h = n as f64 / 2.0;
        let (dx, dy) = (p1.0 - p0.0, p1.1 - p0.1);
        let length = dx.hypot(dy);
        if length == 0.0 {
            return Vec::new();
        }

        let span = |origin: f64, delta: f64| -> Option<(f64, f64)> {
            if delta != 0.0 {
                let a = (-h - origin) / delta;
                let b = (h - origin) / delta;
                Some((a.min(b), a.max(b)))
            } else if origin > -h && origin < h {
                Some((f64::NEG_INFINITY, f64::INFINITY))
            } else {
                None
            }
        };
        let (Some((tx0, tx1)), Some((ty0, ty1))) = (span(p0.0, dx), span(p0.1, dy)) else {
            return Vec::new();
        };
        let t_in = tx0.max(ty0).max(0.0);
        let t_out = tx1.min(ty1).min(1.0);
        if t_out <= t_in {
            return Vec::new();
        }

        let mut ts = Vec::with_capacity(2 * n + 4);
        ts.push(t_in);
        ts.push(t_out);
        for m in 0..=n {
            let plane = m as f64 - h;
            if dx != 0.0 {
                let t = (plane - p0.0) / dx;
                if t > t_in && t < t_out {
                    ts.push(t);
                }
            }
            if dy != 0.0 {
                let t = (plane - p0.1) / dy;
                if t > t_in && t < t_out {
                    ts.push(t);
                }
            }
        }
        ts.sort_by(f64::total_cmp);

        let mut out: Vec<(usize, f64)> = Vec::with_capacity(ts.len());
        for w in ts.windows(2) {
            let dt = w[1] - w[0];
            if dt <= 0.0 {
                continue;
            }
            let tm = 0.5 * (w[0] + w[1]);
            let j = self.pixel_at(p0.0 + tm * dx, p0.1 + tm * dy);
            let seg = dt * length;
            match out.last_mut() {
                Some((last, l)) if *last == j => *l += seg,
                _ => out.push((j, seg)),
            }
        }
        out
    }
}

/// Dense `d × p` system matrix: chord lengths of each ray through each pixel,
/// then every column scaled to unit sum.
pub fn build_system_matrix(geometry: &PetGeometry) -> Result<DenseMatrix> {
    let p = geometry.n_pixels();
    let mut e = DenseMatrix::zeros(geometry.n_rays(), p);
    for (i, (a, b)) in geometry.rays().enumerate() {
        let p0 = geometry.detector_position(a);
        let p1 = geometry.detector_position(b);
        let row = e.row_mut(i);
        for (j, len) in geometry.trace_segment(p0, p1) {
            row[j] += len;
        }
    }
    normalize_columns(&mut e)?;
    Ok(e)
}

/// Scales each column of `e` to unit sum; an all-zero column is an error.
pub fn normalize_columns(e: &mut DenseMatrix) -> Result<()> {
    let (d, p) = e.shape();
    let mut sums = vec![0.0; p];
    for i in 0..d {
        for (s, v) in sums.iter_mut().zip(e.row(i)) {
            *s += v;
        }
    }
    if let Some(pixel) = sums.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::UnidentifiablePixel { pixel });
    }
    for i in 0..d {
        for (v, s) in e.row_mut(i).iter_mut().zip(&sums) {
            *v /= s;
        }
    }
    Ok(())
}

/// 4-neighbourhood (up, left, right, down) of every pixel, sorted.
pub fn build_neighborhoods(grid_side: usize) -> Vec<Vec<usize>> {
    let n = grid_side;
    (0..n * n)
        .map(|j| {
            let (row, col) = (j / n, j % n);
            let mut nb = Vec::with_capacity(4);
            if row > 0 {
                nb.push(j - n);
            }
            if col > 0 {
                nb.push(j - 1);
            }
            if col + 1 < n {
                nb.push(j + 1);
            }
            if row + 1 < n {
                nb.push(j + n);
            }
            nb
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ray_count_for_sixty_four_detectors() {
        let g = PetGeometry::new(64, 64).unwrap();
        assert_eq!(g.n_rays(), 2016);
        assert_eq!(g.rays().count(), 2016);
    }

    #[test]
    fn single_pixel_two_detectors() {
        let g = PetGeometry::new(1, 2).unwrap();
        let e = build_system_matrix(&g).unwrap();
        assert_eq!(e.shape(), (1, 1));
        assert_eq!(e[(0, 0)], 1.0);
        // the raw chord is the full unit pixel
        let chord = g.trace_segment(g.detector_position(0), g.detector_position(1));
        assert_eq!(chord.len(), 1);
        assert!((chord[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chord_through_centre_is_grid_width() {
        let g = PetGeometry::new(8, 4).unwrap();
        let seg = g.trace_segment((-10.0, 0.3), (10.0, 0.3));
        let total: f64 = seg.iter().map(|s| s.1).sum();
        assert!((total - 8.0).abs() < 1e-12);
        assert_eq!(seg.len(), 8);
        assert!(seg.iter().all(|s| (s.1 - 1.0).abs() < 1e-12));
    }

    #[test]
    fn diagonal_chord_length() {
        let g = PetGeometry::new(4, 4).unwrap();
        let seg = g.trace_segment((-3.0, -3.1), (3.0, 2.9));
        let total: f64 = seg.iter().map(|s| s.1).sum();
        // line y = x − 0.1 crosses [−2,2]² from x = −1.9 to x = 2
        assert!((total - 3.9 * 2f64.sqrt()).abs() < 1e-12, "{total}");
    }

    #[test]
    fn missing_ray_gives_nothing() {
        let g = PetGeometry::new(4, 4).unwrap();
        assert!(g.trace_segment((-5.0, 3.0), (5.0, 3.0)).is_empty());
    }

    #[test]
    fn columns_sum_to_one() {
        let g = PetGeometry::new(8, 16).unwrap();
        let e = build_system_matrix(&g).unwrap();
        for j in 0..e.cols() {
            let s: f64 = (0..e.rows()).map(|i| e[(i, j)]).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert!(e.first_negative().is_none());
    }

    #[test]
    fn unreached_pixel_is_an_error() {
        // three detectors cannot cover every pixel of a 6x6 grid
        let g = PetGeometry::new(6, 3).unwrap();
        assert!(matches!(
            build_system_matrix(&g),
            Err(Error::UnidentifiablePixel { .. })
        ));
    }

    #[test]
    fn neighbourhood_sizes() {
        let nb = build_neighborhoods(3);
        assert_eq!(nb[0].len(), 2);
        assert_eq!(nb[1].len(), 3);
        assert_eq!(nb[4].len(), 4);
        assert_eq!(nb.iter().map(Vec::len).sum::<usize>(), 24);
        for (j, list) in nb.iter().enumerate() {
            for &k in list {
                assert!(nb[k].contains(&j));
            }
        }
    }

    #[test]
    fn pixel_lookup_round_trips_centres() {
        let g = PetGeometry::new(5, 4).unwrap();
        for j in 0..25 {
            let (x, y) = g.pixel_center(j);
            assert_eq!(g.pixel_at(x, y), j);
        }
    }
}
