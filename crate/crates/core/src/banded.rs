//! Banded LU factorization with partial pivoting.
//!
//! Storage follows the LAPACK `gbtrf` layout transposed to rows: row `r`
//! keeps columns `r - kl ..= r + ku + kl`, the extra `kl` slots absorbing
//! fill-in from row interchanges.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BandedError {
    #[error("matrix is singular to working precision at pivot {0}")]
    Singular(usize),
    #[error("right-hand side has length {got}, expected {expected}")]
    Dimension { got: usize, expected: usize },
}

#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lower(&self) -> usize {
        self.kl
    }

    pub fn upper(&self) -> usize {
        self.ku
    }

    #[inline]
    fn slot(&self, r: usize, c: usize) -> usize {
        debug_assert!(c + self.kl >= r && c <= r + self.ku + self.kl);
        r * self.width + (c + self.kl - r)
    }

    pub fn in_band(&self, r: usize, c: usize) -> bool {
        r < self.n && c < self.n && c + self.kl >= r && c <= r + self.ku
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        if self.in_band(r, c) {
            self.data[self.slot(r, c)]
        } else {
            0.0
        }
    }

    /// Adds `v` to entry `(r, c)`. Panics if the entry lies outside the band.
    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        assert!(self.in_band(r, c), "entry ({r}, {c}) outside band");
        let s = self.slot(r, c);
        self.data[s] += v;
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        assert!(self.in_band(r, c), "entry ({r}, {c}) outside band");
        let s = self.slot(r, c);
        self.data[s] = v;
    }

    /// Mutable view of row `r` restricted to columns `r-kl ..= r+ku`, with the
    /// first column index of the slice.
    pub fn row_mut(&mut self, r: usize) -> (usize, &mut [f64]) {
        let first = r.saturating_sub(self.kl);
        let last = (r + self.ku).min(self.n - 1);
        let start = self.slot(r, first);
        let len = last - first + 1;
        (first, &mut self.data[start..start + len])
    }

    /// Row-block view used for parallel assembly: rows `[r0, r0 + rows)`.
    pub fn rows_mut(&mut self, r0: usize, rows: usize) -> BandRows<'_> {
        let w = self.width;
        BandRows {
            r0,
            kl: self.kl,
            ku: self.ku,
            n: self.n,
            width: w,
            data: &mut self.data[r0 * w..(r0 + rows) * w],
        }
    }

    /// Splits the matrix into disjoint blocks of `rows_per_block` rows.
    pub fn row_blocks_mut(&mut self, rows_per_block: usize) -> Vec<BandRows<'_>> {
        let w = self.width;
        let (kl, ku, n) = (self.kl, self.ku, self.n);
        self.data
            .chunks_mut(rows_per_block * w)
            .enumerate()
            .map(|(b, data)| BandRows {
                r0: b * rows_per_block,
                kl,
                ku,
                n,
                width: w,
                data,
            })
            .collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (r, yr) in y.iter_mut().enumerate() {
            let c0 = r.saturating_sub(self.kl);
            let c1 = (r + self.ku).min(self.n - 1);
            let mut acc = 0.0;
            for c in c0..=c1 {
                acc += self.data[self.slot(r, c)] * x[c];
            }
            *yr = acc;
        }
        y
    }

    /// Factorizes in place. Pivots with magnitude below `tiny` times the
    /// largest entry are reported as singular.
    pub fn factorize(mut self) -> Result<BandLu, BandedError> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tiny = scale * f64::EPSILON * 1e-4;
        let mut piv = vec![0usize; n];
        for i in 0..n {
            let rmax = (i + kl).min(n - 1);
            let mut p = i;
            let mut best = self.data[self.slot(i, i)].abs();
            for r in i + 1..=rmax {
                let v = self.data[self.slot(r, i)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            piv[i] = p;
            if !(best > tiny) {
                return Err(BandedError::Singular(i));
            }
            let cmax = (i + kl + ku).min(n - 1);
            if p != i {
                for c in i..=cmax {
                    let a = self.slot(i, c);
                    let b = self.slot(p, c);
                    self.data.swap(a, b);
                }
            }
            let d = self.data[self.slot(i, i)];
            let pivot_start = self.slot(i, i);
            for r in i + 1..=rmax {
                let s = self.slot(r, i);
                let l = self.data[s] / d;
                self.data[s] = l;
                if l == 0.0 {
                    continue;
                }
                let row_start = self.slot(r, i);
                let len = cmax - i;
                // rows i and r are distinct, so the ranges never overlap
                let (lo, hi) = self.data.split_at_mut(row_start);
                let piv_row = &lo[pivot_start + 1..pivot_start + 1 + len];
                let tgt = &mut hi[1..1 + len];
                for (t, u) in tgt.iter_mut().zip(piv_row) {
                    *t -= l * u;
                }
            }
        }
        Ok(BandLu { m: self, piv })
    }
}

/// Disjoint mutable block of rows of a [`BandMatrix`].
pub struct BandRows<'a> {
    r0: usize,
    kl: usize,
    ku: usize,
    n: usize,
    width: usize,
    data: &'a mut [f64],
}

impl BandRows<'_> {
    pub fn first_row(&self) -> usize {
        self.r0
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.width
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        assert!(
            r >= self.r0 && c < self.n && c + self.kl >= r && c <= r + self.ku,
            "entry ({r}, {c}) outside band"
        );
        let s = (r - self.r0) * self.width + (c + self.kl - r);
        self.data[s] += v;
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
    piv: Vec<usize>,
}

impl BandLu {
    pub fn n(&self) -> usize {
        self.m.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<(), BandedError> {
        let n = self.m.n;
        if b.len() != n {
            return Err(BandedError::Dimension {
                got: b.len(),
                expected: n,
            });
        }
        let (kl, ku) = (self.m.kl, self.m.ku);
        for i in 0..n {
            let p = self.piv[i];
            if p != i {
                b.swap(i, p);
            }
            let bi = b[i];
            if bi != 0.0 {
                for r in i + 1..=(i + kl).min(n - 1) {
                    b[r] -= self.m.data[self.m.slot(r, i)] * bi;
                }
            }
        }
        for i in (0..n).rev() {
            let cmax = (i + kl + ku).min(n - 1);
            let mut acc = b[i];
            for c in i + 1..=cmax {
                acc -= self.m.data[self.m.slot(i, c)] * b[c];
            }
            b[i] = acc / self.m.data[self.m.slot(i, i)];
        }
        Ok(())
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, BandedError> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }
}
