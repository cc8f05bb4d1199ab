//! Dense and banded LU factorizations with partial pivoting.
//!
//! The conic solver assembles KKT systems whose variables are ordered stage by
//! stage along the trajectory, which keeps every nonzero within a narrow band
//! except for a handful of "border" variables that couple all stages. The
//! [`BorderedBand`] type handles exactly that layout.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::abs;

/// Row-major dense square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), n, "matrix must be square");
            m.data[i * n..(i + 1) * n].copy_from_slice(r);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                self.data[i * self.n..(i + 1) * self.n]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// LU factorization with partial pivoting. Returns `None` for a singular matrix.
    pub fn lu(mut self) -> Option<DenseLu> {
        let n = self.n;
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut best = abs(self.get(k, k));
            for i in k + 1..n {
                let v = abs(self.get(i, k));
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return None;
            }
            if p != k {
                for j in 0..n {
                    self.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = self.get(k, k);
            for i in k + 1..n {
                let l = self.get(i, k) / pivot;
                if l == 0.0 {
                    continue;
                }
                self.set(i, k, l);
                for j in k + 1..n {
                    let v = self.get(k, j);
                    self.add(i, j, -l * v);
                }
            }
        }
        Some(DenseLu { lu: self, perm })
    }
}

/// Factored dense matrix.
#[derive(Clone, Debug)]
pub struct DenseLu {
    lu: DenseMatrix,
    perm: Vec<usize>,
}

impl DenseLu {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu.get(i, j) * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu.get(i, j) * x[j];
            }
            x[i] = s / self.lu.get(i, i);
        }
        x
    }
}

/// Solves a dense square system, `None` when singular.
pub fn solve_dense(a: DenseMatrix, b: &[f64]) -> Option<Vec<f64>> {
    a.lu().map(|lu| lu.solve(b))
}

/// Square band matrix with `kl` sub- and `ku` super-diagonals.
///
/// Each row keeps a window of `2*kl + ku + 1` entries starting at column
/// `i - kl`, which leaves room for the fill produced by row interchanges.
#[derive(Clone, Debug)]
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
        BandMatrix {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn clear(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        // column index relative to the row window start (i - kl)
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * self.width + (j + self.kl - i)
    }

    #[inline]
    pub fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.kl + self.ku {
            return 0.0;
        }
        self.data[self.offset(i, j)]
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band");
        let o = self.offset(i, j);
        self.data[o] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (i, yi) in y.iter_mut().enumerate() {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            let mut s = 0.0;
            for j in lo..=hi {
                s += self.get(i, j) * x[j];
            }
            *yi = s;
        }
        y
    }

    /// Banded LU with partial pivoting (row interchanges within `kl` rows).
    pub fn lu(mut self) -> Option<BandLu> {
        let n = self.n;
        let kl = self.kl;
        let ku = self.ku;
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = abs(self.get(k, k));
            for i in k + 1..=last_row {
                let v = abs(self.get(i, k));
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return None;
            }
            piv[k] = p;
            let last_col = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let a = self.offset(k, j);
                    let b = self.offset(p, j);
                    self.data.swap(a, b);
                }
            }
            let pivot = self.get(k, k);
            for i in k + 1..=last_row {
                let oi = self.offset(i, k);
                let l = self.data[oi] / pivot;
                self.data[oi] = l;
                if l == 0.0 {
                    continue;
                }
                for j in k + 1..=last_col {
                    let vk = self.data[self.offset(k, j)];
                    if vk != 0.0 {
                        let o = self.offset(i, j);
                        self.data[o] -= l * vk;
                    }
                }
            }
        }
        Some(BandLu { m: self, piv })
    }
}

/// Factored band matrix.
#[derive(Clone, Debug)]
pub struct BandLu {
    m: BandMatrix,
    piv: Vec<usize>,
}

impl BandLu {
    pub fn dim(&self) -> usize {
        self.m.n
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.m.n;
        let kl = self.m.kl;
        let ku = self.m.ku;
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk != 0.0 {
                for i in k + 1..=(k + kl).min(n - 1) {
                    x[i] -= self.m.data[self.m.offset(i, k)] * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in k + 1..=(k + kl + ku).min(n - 1) {
                s -= self.m.data[self.m.offset(k, j)] * x[j];
            }
            x[k] = s / self.m.data[self.m.offset(k, k)];
        }
    }
}

/// Square matrix `[[B, E], [F, D]]` where `B` is banded and the border
/// (`E`, `F`, `D`) has a small fixed number of rows/columns.
#[derive(Clone, Debug)]
pub struct BorderedBand {
    pub band: BandMatrix,
    nb: usize,
    /// columns of `E`, each of band dimension
    e: Vec<Vec<f64>>,
    /// rows of `F`, each of band dimension
    f: Vec<Vec<f64>>,
    d: DenseMatrix,
}

impl BorderedBand {
    pub fn zeros(n_band: usize, kl: usize, ku: usize, n_border: usize) -> Self {
        BorderedBand {
            band: BandMatrix::zeros(n_band, kl, ku),
            nb: n_band,
            e: vec![vec![0.0; n_band]; n_border],
            f: vec![vec![0.0; n_band]; n_border],
            d: DenseMatrix::zeros(n_border),
        }
    }

    pub fn dim(&self) -> usize {
        self.nb + self.d.dim()
    }

    pub fn clear(&mut self) {
        self.band.clear();
        for c in self.e.iter_mut().chain(self.f.iter_mut()) {
            c.iter_mut().for_each(|v| *v = 0.0);
        }
        let m = self.d.dim();
        self.d = DenseMatrix::zeros(m);
    }

    /// Adds `v` at global position `(i, j)`; indices `>= n_band` address the border.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let nb = self.nb;
        match (i < nb, j < nb) {
            (true, true) => self.band.add(i, j, v),
            (true, false) => self.e[j - nb][i] += v,
            (false, true) => self.f[i - nb][j] += v,
            (false, false) => self.d.add(i - nb, j - nb, v),
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let nb = self.nb;
        let (xb, xd) = x.split_at(nb);
        let mut y = self.band.mul_vec(xb);
        for (c, col) in self.e.iter().enumerate() {
            crate::math::axpy(xd[c], col, &mut y);
        }
        let mut yd = self.d.mul_vec(xd);
        for (r, row) in self.f.iter().enumerate() {
            yd[r] += crate::math::dot(row, xb);
        }
        y.extend(yd);
        y
    }

    pub fn factor(&self) -> Option<BorderedLu> {
        let lu = self.band.clone().lu()?;
        let z: Vec<Vec<f64>> = self
            .e
            .iter()
            .map(|col| {
                let mut c = col.clone();
                lu.solve_in_place(&mut c);
                c
            })
            .collect();
        let m = self.d.dim();
        let mut schur = self.d.clone();
        for r in 0..m {
            for c in 0..m {
                schur.add(r, c, -crate::math::dot(&self.f[r], &z[c]));
            }
        }
        let schur = if m > 0 { Some(schur.lu()?) } else { None };
        Some(BorderedLu {
            band: lu,
            z,
            f: self.f.clone(),
            schur,
        })
    }
}

/// Factored [`BorderedBand`] (Schur complement on the border).
#[derive(Clone, Debug)]
pub struct BorderedLu {
    band: BandLu,
    z: Vec<Vec<f64>>,
    f: Vec<Vec<f64>>,
    schur: Option<DenseLu>,
}

impl BorderedLu {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let nb = self.band.dim();
        let mut y1 = rhs[..nb].to_vec();
        self.band.solve_in_place(&mut y1);
        let Some(schur) = &self.schur else {
            return y1;
        };
        let r2: Vec<f64> = rhs[nb..]
            .iter()
            .zip(&self.f)
            .map(|(r, row)| r - crate::math::dot(row, &y1))
            .collect();
        let x2 = schur.solve(&r2);
        for (c, zc) in self.z.iter().enumerate() {
            crate::math::axpy(-x2[c], zc, &mut y1);
        }
        y1.extend(x2);
        y1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pseudo_random(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    }

    #[test]
    fn dense_lu_solves_permuted_system() {
        let a = DenseMatrix::from_rows(&[&[0.0, 2.0, 1.0], &[1.0, 1.0, 0.0], &[3.0, 0.0, 1.0]]);
        let x_true = [1.0, -2.0, 0.5];
        let b = a.mul_vec(&x_true);
        let x = solve_dense(a, &b).unwrap();
        for (xi, ti) in x.iter().zip(x_true) {
            assert!(abs(xi - ti) < 1e-14);
        }
    }

    #[test]
    fn singular_dense_matrix_is_rejected() {
        let a = DenseMatrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(a.lu().is_none());
    }

    #[test]
    fn band_lu_matches_dense_lu() {
        let n = 40;
        let (kl, ku) = (3, 2);
        let mut seed = 7u64;
        let mut band = BandMatrix::zeros(n, kl, ku);
        let mut dense = DenseMatrix::zeros(n);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                // zero diagonal forces pivoting
                let v = if i == j && i % 3 == 0 { 0.0 } else { pseudo_random(&mut seed) };
                band.add(i, j, v);
                dense.add(i, j, v);
            }
        }
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let xd = solve_dense(dense, &b).unwrap();
        let lu = band.lu().unwrap();
        let mut xb = b.clone();
        lu.solve_in_place(&mut xb);
        for (a, c) in xd.iter().zip(&xb) {
            assert!(abs(a - c) < 1e-9 * (1.0 + abs(*a)), "{a} vs {c}");
        }
    }

    #[test]
    fn bordered_solve_matches_dense() {
        let nb = 25;
        let m = 2;
        let mut seed = 99u64;
        let mut bb = BorderedBand::zeros(nb, 2, 2, m);
        let n = nb + m;
        let mut dense = DenseMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let inside = i < nb && j < nb;
                if inside && !bb.band.in_band(i, j) {
                    continue;
                }
                let mut v = pseudo_random(&mut seed);
                if i == j {
                    v += 4.0;
                }
                bb.add(i, j, v);
                dense.add(i, j, v);
            }
        }
        let x_true: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 * 0.1).collect();
        let b = dense.mul_vec(&x_true);
        let b2 = bb.mul_vec(&x_true);
        for (p, q) in b.iter().zip(&b2) {
            assert!(abs(p - q) < 1e-12);
        }
        let x = bb.factor().unwrap().solve(&b);
        for (a, c) in x.iter().zip(&x_true) {
            assert!(abs(a - c) < 1e-10);
        }
    }
}
