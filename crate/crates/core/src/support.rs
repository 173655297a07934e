//! Support mask algebra: the autocorrelation support of a real-space support
//! and tapered penalty weights around a mask.

use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::grid::{center, RealGrid, SupportMask};

/// Support of the self-correlation of `support`: every difference vector
/// `a - b` with `a, b` in the support, placed relative to the grid center.
///
/// Computed as the Minkowski sum of the support with its point reflection,
/// so the result is exact (no thresholding).
pub fn autocorr_support(support: &SupportMask) -> Result<SupportMask> {
    let n = support.n();
    let pts: Vec<(isize, isize)> = support
        .indices()
        .map(|(i, j)| (i as isize, j as isize))
        .collect();
    if pts.is_empty() {
        return invalid("support is empty");
    }
    // Bounding box of the difference set.
    let (mut rmin, mut rmax, mut cmin, mut cmax) = (isize::MAX, isize::MIN, isize::MAX, isize::MIN);
    for &(r, c) in &pts {
        rmin = rmin.min(r);
        rmax = rmax.max(r);
        cmin = cmin.min(c);
        cmax = cmax.max(c);
    }
    let span_r = rmax - rmin;
    let span_c = cmax - cmin;
    let c0 = center(n) as isize;
    let n_i = n as isize;
    if c0 - span_r < 0 || c0 + span_r >= n_i || c0 - span_c < 0 || c0 + span_c >= n_i {
        return invalid(format!(
            "autocorrelation support ({}x{}) does not fit a {n}x{n} grid",
            2 * span_r + 1,
            2 * span_c + 1
        ));
    }

    // Minkowski sum row by row on bitsets: the difference row for a pair of
    // support rows (ra, rb) is row ra OR-shifted by every column of row rb.
    let words = n.div_ceil(64);
    let mut rows: Vec<Vec<u64>> = vec![vec![0; words]; n];
    for &(r, c) in &pts {
        rows[r as usize][c as usize / 64] |= 1 << (c as usize % 64);
    }
    let occupied: Vec<usize> = (0..n).filter(|&r| rows[r].iter().any(|&w| w != 0)).collect();

    let mut out_rows: Vec<Vec<u64>> = vec![vec![0; words]; n];
    for &rb in &occupied {
        let cols_b: Vec<isize> = bit_positions(&rows[rb]).collect();
        for &ra in &occupied {
            let out_row = (c0 + ra as isize - rb as isize) as usize;
            for &cb in &cols_b {
                or_shifted(&mut out_rows[out_row], &rows[ra], c0 - cb);
            }
        }
    }
    let out = SupportMask::from_fn(n, |i, j| out_rows[i][j / 64] >> (j % 64) & 1 == 1);
    Ok(out)
}

fn bit_positions(bits: &[u64]) -> impl Iterator<Item = isize> + '_ {
    bits.iter().enumerate().flat_map(|(w, &word)| {
        let mut word = word;
        std::iter::from_fn(move || {
            if word == 0 {
                return None;
            }
            let b = word.trailing_zeros() as isize;
            word &= word - 1;
            Some(w as isize * 64 + b)
        })
    })
}

/// `dst |= src << shift` over little-endian bit vectors of equal length.
/// Bits shifted past either end are dropped.
fn or_shifted(dst: &mut [u64], src: &[u64], shift: isize) {
    let len = src.len() as isize;
    let word_shift = shift.div_euclid(64);
    let bit_shift = shift.rem_euclid(64) as u32;
    for (w, &word) in src.iter().enumerate() {
        if word == 0 {
            continue;
        }
        let lo = w as isize + word_shift;
        if (0..len).contains(&lo) {
            dst[lo as usize] |= word << bit_shift;
        }
        if bit_shift != 0 && (0..len).contains(&(lo + 1)) {
            dst[(lo + 1) as usize] |= word >> (64 - bit_shift);
        }
    }
}

/// Chebyshev distance (in pixels) from every pixel to the nearest mask
/// pixel, capped at `cap`. Mask pixels get distance 0.
pub fn chebyshev_distance(mask: &SupportMask, cap: usize) -> Vec<usize> {
    let n = mask.n();
    let mut dist: Vec<usize> = mask
        .as_slice()
        .iter()
        .map(|&m| if m { 0 } else { cap })
        .collect();
    let mut frontier: Vec<usize> = (0..n * n).filter(|&k| dist[k] == 0).collect();
    let mut d = 0;
    while d + 1 < cap && !frontier.is_empty() {
        d += 1;
        let mut next = Vec::new();
        for &k in &frontier {
            let (i, j) = ((k / n) as isize, (k % n) as isize);
            for di in -1..=1isize {
                for dj in -1..=1isize {
                    let (a, b) = (i + di, j + dj);
                    if a < 0 || b < 0 || a >= n as isize || b >= n as isize {
                        continue;
                    }
                    let idx = a as usize * n + b as usize;
                    if dist[idx] > d {
                        dist[idx] = d;
                        next.push(idx);
                    }
                }
            }
        }
        frontier = next;
    }
    dist
}

/// Raised-cosine ramp from 0 at the mask edge to 1 at distance `width`.
#[inline]
pub fn taper_profile(distance: usize, width: usize) -> f64 {
    if distance >= width {
        1.0
    } else {
        0.5 * (1.0 - (PI * distance as f64 / width as f64).cos())
    }
}

/// Penalty weights that vanish inside `mask` and rise to `peak` over
/// `width` pixels of Chebyshev distance outside it.
pub fn taper_weights(mask: &SupportMask, width: usize, peak: f64) -> Result<RealGrid> {
    if !(peak >= 0.0) || !peak.is_finite() {
        return invalid(format!("taper peak must be a non-negative number, got {peak}"));
    }
    let n = mask.n();
    if mask.count() == 0 {
        return Ok(RealGrid::filled(n, peak));
    }
    let dist = chebyshev_distance(mask, width.max(1));
    let data = dist
        .iter()
        .zip(mask.as_slice())
        .map(|(&d, &inside)| {
            if inside {
                0.0
            } else {
                peak * taper_profile(d, width)
            }
        })
        .collect();
    RealGrid::from_vec(n, data)
}
