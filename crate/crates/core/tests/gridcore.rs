use std::collections::HashSet;
use std::f64::consts::PI;

use coacs_core::grid::{fftshift, ifftshift};
use coacs_core::window::WINDOW_FLOOR;
use coacs_core::{autocorr_support, center, dft2, hann_window, taper_weights, ComplexGrid, Direction, RealGrid, SupportMask};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_complex(n: usize, rng: &mut ChaCha8Rng) -> ComplexGrid {
    ComplexGrid::from_fn(n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

#[test]
fn round_trip_and_parseval_up_to_256() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in [1usize, 2, 3, 8, 17, 64, 100, 256] {
        let x = random_complex(n, &mut rng);
        let f = dft2(&x, Direction::Forward).unwrap();
        let back = dft2(&f, Direction::Inverse).unwrap();
        let max = x.as_slice().iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (a, b) in back.as_slice().iter().zip(x.as_slice()) {
            assert!((a - b).norm() <= 1e-12 * max, "n={n}");
        }
        let ex: f64 = x.as_slice().iter().map(|v| v.norm_sqr()).sum();
        let ef: f64 = f.as_slice().iter().map(|v| v.norm_sqr()).sum();
        assert!((ef - (n * n) as f64 * ex).abs() <= 1e-12 * ef, "n={n}");
    }
}

#[test]
fn small_transform_examples() {
    let mut delta = ComplexGrid::zeros(4);
    delta.as_mut_slice()[0] = Complex64::new(1.0, 0.0);
    let f = dft2(&delta, Direction::Forward).unwrap();
    assert!(f.as_slice().iter().all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-15));
    let ones = ComplexGrid::filled(4, Complex64::new(1.0, 0.0));
    let f = dft2(&ones, Direction::Forward).unwrap();
    assert!((f.as_slice()[0] - Complex64::new(16.0, 0.0)).norm() < 1e-12);
    assert!(f.as_slice()[1..].iter().all(|v| v.norm() < 1e-12));
    assert!(dft2(&ComplexGrid::zeros(0), Direction::Forward).is_err());
}

#[test]
fn hann_matches_formula_at_256() {
    let n = 256;
    let w = hann_window(n, WINDOW_FLOOR).unwrap();
    let h = |m: usize| 0.5 * (1.0 - (2.0 * PI * m as f64 / (n - 1) as f64).cos());
    for i in 0..n {
        for j in 0..n {
            let expect = h(i) * h(j) + 1e-3;
            assert!((w.amp[(i, j)] - expect).abs() <= 1e-15, "({i},{j})");
            assert_eq!(w.intensity[(i, j)].to_bits(), (w.amp[(i, j)] * w.amp[(i, j)]).to_bits());
        }
    }
}

#[test]
fn hann_examples() {
    let w = hann_window(3, 0.0).unwrap();
    assert_eq!(
        (0..3).map(|j| w.amp[(1, j)]).collect::<Vec<_>>(),
        vec![0.0, 1.0, 0.0]
    );
    assert_eq!(hann_window(5, 1e-3).unwrap().amp[(0, 0)], 1e-3);
    assert!(hann_window(1, 0.0).is_err());
    assert!(hann_window(4, -1.0).is_err());
}

fn difference_set(mask: &SupportMask) -> SupportMask {
    let n = mask.n();
    let c = center(n) as i64;
    let pts: Vec<(i64, i64)> = mask.indices().map(|(i, j)| (i as i64, j as i64)).collect();
    let mut diffs = HashSet::new();
    for a in &pts {
        for b in &pts {
            diffs.insert((a.0 - b.0, a.1 - b.1));
        }
    }
    let mut out = SupportMask::empty(n);
    for (di, dj) in diffs {
        let (i, j) = (c + di, c + dj);
        assert!(i >= 0 && j >= 0 && i < n as i64 && j < n as i64);
        out.as_mut_slice()[(i as usize) * n + j as usize] = true;
    }
    out
}

#[test]
fn autocorr_support_equals_difference_set() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..50 {
        let n = rng.random_range(4..=32usize);
        // keep the mask inside a box of side < n/2 so that differences fit
        let side = rng.random_range(1..=(n / 2).max(1));
        let c = center(n);
        let lo = c - side / 2;
        let density = rng.random_range(0.05..0.9);
        let mut mask = SupportMask::empty(n);
        for i in lo..lo + side {
            for j in lo..lo + side {
                if rng.random_bool(density) {
                    mask.as_mut_slice()[i * n + j] = true;
                }
            }
        }
        if mask.count() == 0 {
            mask.as_mut_slice()[lo * n + lo] = true;
        }
        let fast = autocorr_support(&mask).unwrap();
        assert_eq!(fast, difference_set(&mask), "trial {trial}, n={n}");
        // point symmetric about the center
        for (i, j) in fast.indices() {
            assert!(fast[(2 * c - i, 2 * c - j)], "trial {trial}");
        }
    }
}

#[test]
fn autocorr_support_examples() {
    let s = SupportMask::centered_square(256, 31).unwrap();
    assert_eq!(autocorr_support(&s).unwrap(), SupportMask::centered_square(256, 61).unwrap());
    let mut one = SupportMask::empty(32);
    one.as_mut_slice()[3 * 32 + 30] = true;
    let a = autocorr_support(&one).unwrap();
    assert_eq!(a.indices().collect::<Vec<_>>(), vec![(16, 16)]);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut seven = SupportMask::empty(32);
    while seven.count() < 7 {
        let (i, j) = (rng.random_range(10..22), rng.random_range(10..22));
        seven.as_mut_slice()[i * 32 + j] = true;
    }
    assert_eq!(autocorr_support(&seven).unwrap(), difference_set(&seven));
    assert!(autocorr_support(&SupportMask::centered_square(16, 10).unwrap()).is_err());
}

#[test]
fn taper_matches_per_pixel_evaluation() {
    let n = 64;
    let mask = SupportMask::centered_square(n, 21).unwrap();
    let (width, peak) = (5usize, 3.5);
    let t = taper_weights(&mask, width, peak).unwrap();
    let inside: Vec<(usize, usize)> = mask.indices().collect();
    for i in 0..n {
        for j in 0..n {
            // Chebyshev distance to the nearest mask pixel, by brute force
            let d = inside
                .iter()
                .map(|&(a, b)| (a as i64 - i as i64).abs().max((b as i64 - j as i64).abs()))
                .min()
                .unwrap() as f64;
            let expect = if d == 0.0 {
                0.0
            } else if d >= width as f64 {
                peak
            } else {
                peak * 0.5 * (1.0 - (PI * d / width as f64).cos())
            };
            assert!((t[(i, j)] - expect).abs() <= 1e-12 * peak, "({i},{j}) d={d}");
        }
    }
}

#[test]
fn taper_examples() {
    let mask = SupportMask::centered_square(16, 4).unwrap();
    let t = taper_weights(&mask, 0, 2.0).unwrap();
    for k in 0..256 {
        assert_eq!(t.as_slice()[k], if mask.as_slice()[k] { 0.0 } else { 2.0 });
    }
    let t = taper_weights(&mask, 4, 2.0).unwrap();
    // distance 2 from the mask edge: the row just above the square, two rows up
    let top = center(16) - 2;
    assert!((t[(top - 2, center(16))] - 1.0).abs() < 1e-15);
}

#[test]
fn shifts_are_inverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in [1usize, 4, 7, 16] {
        let x: Vec<f64> = (0..n * n).map(|_| rng.random()).collect();
        assert_eq!(ifftshift(n, &fftshift(n, &x)), x);
        let g = RealGrid::from_vec(n, x.clone()).unwrap();
        assert_eq!(g.fftshift().ifftshift(), g);
    }
}
