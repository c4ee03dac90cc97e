use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// An `N x N` truncated Fourier lattice on the periodic box `[0, L)^2`.
///
/// Coefficient arrays are `N*N` long and indexed `i1 * N + i2`. Each index
/// `i` in `0..N` carries the integer mode `m = i` for `i < N/2` and
/// `m = i - N` otherwise (FFT order), so the integer modes cover
/// `[-N/2, N/2)`. The wavevector of index `(i1, i2)` is `2 pi (m1, m2) / L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    n: usize,
    length: f64,
}

impl Lattice {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n % 2 != 0 {
            return Err(SimError::InvalidLattice(format!("N = {n} must be even")));
        }
        if n < 8 {
            return Err(SimError::InvalidLattice(format!("N = {n} must be at least 8")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(SimError::InvalidLattice(format!(
                "box length L = {length} must be positive and finite"
            )));
        }
        Ok(Self { n, length })
    }

    /// Points per direction.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn box_length(&self) -> f64 {
        self.length
    }

    /// Number of wavevectors (`N^2`).
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Area of the box, `L^2`.
    pub fn volume(&self) -> f64 {
        self.length * self.length
    }

    /// Lattice spacing in wavenumber space, `2 pi / L`.
    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.length
    }

    /// Integer mode of a one-dimensional index.
    #[inline]
    pub fn mode_of(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    /// One-dimensional index of an integer mode in `[-N/2, N/2)`.
    #[inline]
    pub fn index_of_mode(&self, m: i64) -> Option<usize> {
        let n = self.n as i64;
        if m < -n / 2 || m >= n / 2 {
            None
        } else {
            Some(m.rem_euclid(n) as usize)
        }
    }

    /// Integer mode pair of a flat index.
    #[inline]
    pub fn modes(&self, idx: usize) -> [i64; 2] {
        [self.mode_of(idx / self.n), self.mode_of(idx % self.n)]
    }

    /// Flat index of an integer mode pair.
    pub fn index(&self, m: [i64; 2]) -> Option<usize> {
        Some(self.index_of_mode(m[0])? * self.n + self.index_of_mode(m[1])?)
    }

    #[inline]
    pub fn wavevector(&self, idx: usize) -> [f64; 2] {
        let [m1, m2] = self.modes(idx);
        let h = self.spacing();
        [h * m1 as f64, h * m2 as f64]
    }

    /// `|k|^2` of a flat index.
    #[inline]
    pub fn k_squared(&self, idx: usize) -> f64 {
        let [m1, m2] = self.modes(idx);
        let h = self.spacing();
        h * h * (m1 * m1 + m2 * m2) as f64
    }

    /// Flat index of `-k` (modulo `N`, so a Nyquist mode maps to itself).
    #[inline]
    pub fn conjugate_index(&self, idx: usize) -> usize {
        let n = self.n;
        let (i1, i2) = (idx / n, idx % n);
        ((n - i1) % n) * n + (n - i2) % n
    }

    /// Smallest nonzero `|k|`.
    pub fn min_wavenumber(&self) -> f64 {
        self.spacing()
    }

    pub(crate) fn ensure_same(&self, other: &Lattice) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(SimError::LatticeMismatch {
                left_n: self.n,
                left_l: self.length,
                right_n: other.n,
                right_l: other.length,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;

    #[test]
    fn two_pi_box_has_integer_wavevectors() {
        let lat = Lattice::new(8, 2.0 * PI).unwrap();
        let mut seen = HashSet::new();
        for idx in 0..lat.len() {
            let m = lat.modes(idx);
            let k = lat.wavevector(idx);
            assert!((k[0] - m[0] as f64).abs() < 1e-14);
            assert!((k[1] - m[1] as f64).abs() < 1e-14);
            assert!((-4..4).contains(&m[0]) && (-4..4).contains(&m[1]));
            assert_eq!(lat.index(m), Some(idx));
            seen.insert(m);
        }
        assert_eq!(seen.len(), 64);
        assert!(seen.contains(&[0, 0]));
    }

    #[test]
    fn unit_box_spacing() {
        let lat = Lattice::new(16, 1.0).unwrap();
        let smallest = (0..lat.len())
            .map(|i| lat.k_squared(i).sqrt())
            .filter(|&k| k > 0.0)
            .fold(f64::INFINITY, f64::min);
        assert!((smallest - 2.0 * PI).abs() < 1e-14);
        assert_eq!(lat.min_wavenumber(), smallest);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Lattice::new(7, 1.0).is_err());
        assert!(Lattice::new(6, 1.0).is_err());
        assert!(Lattice::new(8, 0.0).is_err());
        assert!(Lattice::new(8, -1.0).is_err());
        assert!(Lattice::new(8, f64::NAN).is_err());
    }

    #[test]
    fn conjugate_index_negates_modes() {
        let lat = Lattice::new(16, 3.0).unwrap();
        for idx in 0..lat.len() {
            let [m1, m2] = lat.modes(idx);
            let c = lat.conjugate_index(idx);
            let [c1, c2] = lat.modes(c);
            assert_eq!((c1 + m1).rem_euclid(16), 0);
            assert_eq!((c2 + m2).rem_euclid(16), 0);
            assert_eq!(lat.conjugate_index(c), idx);
        }
    }
}
