//! Square grid containers.
//!
//! Every grid in this crate is `n x n`, stored row-major. The "center" of a
//! grid is the pixel `(n / 2, n / 2)` (integer division), which is also where
//! [`fftshift`] moves the zero-frequency sample.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{invalid, Result};

/// Zero-based index of the center pixel along one axis.
#[inline]
pub fn center(n: usize) -> usize {
    n / 2
}

macro_rules! square_grid {
    ($name:ident, $elem:ty) => {
        #[derive(Clone, Debug, PartialEq)]
        pub struct $name {
            n: usize,
            data: Vec<$elem>,
        }

        impl $name {
            pub fn filled(n: usize, value: $elem) -> Self {
                Self {
                    n,
                    data: vec![value; n * n],
                }
            }

            pub fn from_vec(n: usize, data: Vec<$elem>) -> Result<Self> {
                if n == 0 {
                    return invalid("grid side must be positive");
                }
                if data.len() != n * n {
                    return invalid(format!(
                        "grid data has {} values, expected {}",
                        data.len(),
                        n * n
                    ));
                }
                Ok(Self { n, data })
            }

            pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> $elem) -> Self {
                let mut data = Vec::with_capacity(n * n);
                for i in 0..n {
                    for j in 0..n {
                        data.push(f(i, j));
                    }
                }
                Self { n, data }
            }

            #[inline]
            pub fn n(&self) -> usize {
                self.n
            }

            #[inline]
            pub fn len(&self) -> usize {
                self.data.len()
            }

            #[inline]
            pub fn is_empty(&self) -> bool {
                self.data.is_empty()
            }

            #[inline]
            pub fn as_slice(&self) -> &[$elem] {
                &self.data
            }

            #[inline]
            pub fn as_mut_slice(&mut self) -> &mut [$elem] {
                &mut self.data
            }

            pub fn into_vec(self) -> Vec<$elem> {
                self.data
            }

            pub fn map(&self, f: impl Fn($elem) -> $elem) -> Self {
                Self {
                    n: self.n,
                    data: self.data.iter().map(|&v| f(v)).collect(),
                }
            }

            pub fn ensure_same_size(&self, n: usize, what: &str) -> Result<()> {
                if self.n != n {
                    return invalid(format!("{what} has side {}, expected {n}", self.n));
                }
                Ok(())
            }
        }

        impl Index<(usize, usize)> for $name {
            type Output = $elem;
            #[inline]
            fn index(&self, (i, j): (usize, usize)) -> &$elem {
                &self.data[i * self.n + j]
            }
        }

        impl IndexMut<(usize, usize)> for $name {
            #[inline]
            fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut $elem {
                &mut self.data[i * self.n + j]
            }
        }
    };
}

square_grid!(RealGrid, f64);
square_grid!(ComplexGrid, Complex64);
square_grid!(SupportMask, bool);

impl RealGrid {
    pub fn zeros(n: usize) -> Self {
        Self::filled(n, 0.0)
    }

    pub fn sum(&self) -> f64 {
        crate::kahan::sum(self.data.iter().copied())
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn to_complex(&self) -> ComplexGrid {
        ComplexGrid {
            n: self.n,
            data: self.data.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    pub fn zip_map(&self, other: &RealGrid, f: impl Fn(f64, f64) -> f64) -> RealGrid {
        debug_assert_eq!(self.n, other.n);
        RealGrid {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Elementwise square root after clamping negatives to zero.
    pub fn amplitudes(&self) -> RealGrid {
        self.map(|v| v.max(0.0).sqrt())
    }
}

impl ComplexGrid {
    pub fn zeros(n: usize) -> Self {
        Self::filled(n, Complex64::new(0.0, 0.0))
    }

    pub fn re(&self) -> RealGrid {
        RealGrid {
            n: self.n,
            data: self.data.iter().map(|c| c.re).collect(),
        }
    }

    pub fn abs(&self) -> RealGrid {
        RealGrid {
            n: self.n,
            data: self.data.iter().map(|c| c.norm()).collect(),
        }
    }

    pub fn norm_sqr(&self) -> RealGrid {
        RealGrid {
            n: self.n,
            data: self.data.iter().map(|c| c.norm_sqr()).collect(),
        }
    }
}

impl SupportMask {
    pub fn empty(n: usize) -> Self {
        Self::filled(n, false)
    }

    /// Centered axis-aligned square of side `side`. For even `side` the
    /// extra pixel falls on the low-index side of the center.
    pub fn centered_square(n: usize, side: usize) -> Result<Self> {
        if side == 0 || side > n {
            return invalid(format!("square side {side} does not fit a {n}x{n} grid"));
        }
        let start = center(n) as isize - (side / 2) as isize;
        if start < 0 || start as usize + side > n {
            return invalid(format!("centered square side {side} exceeds {n}x{n} grid"));
        }
        let lo = start as usize;
        let hi = lo + side;
        Ok(Self::from_fn(n, |i, j| (lo..hi).contains(&i) && (lo..hi).contains(&j)))
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn complement(&self) -> Self {
        self.map(|b| !b)
    }

    pub fn indices(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(k, _)| (k / n, k % n))
    }
}

fn shift_by<T: Copy>(n: usize, data: &[T], offset: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let si = (i + n - offset) % n;
        for j in 0..n {
            let sj = (j + n - offset) % n;
            out.push(data[si * n + sj]);
        }
    }
    out
}

/// Moves index `(0, 0)` to the grid center.
pub fn fftshift<T: Copy>(n: usize, data: &[T]) -> Vec<T> {
    shift_by(n, data, center(n))
}

/// Inverse of [`fftshift`]: moves the grid center to index `(0, 0)`.
pub fn ifftshift<T: Copy>(n: usize, data: &[T]) -> Vec<T> {
    shift_by(n, data, n - center(n))
}

macro_rules! shift_impl {
    ($name:ident) => {
        impl $name {
            pub fn fftshift(&self) -> Self {
                Self {
                    n: self.n,
                    data: fftshift(self.n, &self.data),
                }
            }

            pub fn ifftshift(&self) -> Self {
                Self {
                    n: self.n,
                    data: ifftshift(self.n, &self.data),
                }
            }
        }
    };
}

shift_impl!(RealGrid);
shift_impl!(ComplexGrid);
shift_impl!(SupportMask);
