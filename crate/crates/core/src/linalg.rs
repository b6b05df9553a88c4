//! Small dense symmetric linear algebra on row-major `Vec<f64>` storage.

/// Dense symmetric matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix { n, data: vec![0.0; n * n] }
    }

    /// Wraps row-major data; the caller guarantees symmetry.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n, "expected {n}x{n} entries");
        SymMatrix { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `vᵀ M v`.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        (0..self.n)
            .map(|i| v[i] * (0..self.n).map(|j| self.get(i, j) * v[j]).sum::<f64>())
            .sum()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.data[i * self.n..(i + 1) * self.n].iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Index sets of the connected components of the coupling graph, with
    /// entries below `drop_tol` treated as zero.
    pub fn blocks(&self, drop_tol: f64) -> Vec<Vec<usize>> {
        let n = self.n;
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut comp = vec![start];
            let mut head = 0;
            while head < comp.len() {
                let i = comp[head];
                head += 1;
                for j in 0..n {
                    if !seen[j] && (self.get(i, j).abs() > drop_tol || self.get(j, i).abs() > drop_tol) {
                        seen[j] = true;
                        comp.push(j);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn submatrix(&self, idx: &[usize]) -> SymMatrix {
        let m = idx.len();
        let mut data = Vec::with_capacity(m * m);
        for &i in idx {
            for &j in idx {
                data.push(self.get(i, j));
            }
        }
        SymMatrix { n: m, data }
    }

    /// All eigenvalues in ascending order by cyclic Jacobi rotations.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut vals = jacobi_eigenvalues(self.clone());
        vals.sort_by(f64::total_cmp);
        vals
    }

    /// Eigenvalues of each decoupled block, merged and sorted.
    pub fn eigenvalues_blockwise(&self, drop_tol: f64) -> Vec<f64> {
        let mut vals: Vec<f64> = self
            .blocks(drop_tol)
            .iter()
            .flat_map(|idx| jacobi_eigenvalues(self.submatrix(idx)))
            .collect();
        vals.sort_by(f64::total_cmp);
        vals
    }

    /// Cholesky factor `L` (row-major lower triangle) or `None` if the
    /// matrix is not numerically positive definite.
    pub fn cholesky(&self) -> Option<Vec<f64>> {
        let n = self.n;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if !(s > 0.0) {
                        return None;
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Some(l)
    }
}

/// Solves `L Lᵀ x = b` given the Cholesky factor.
pub fn cholesky_solve(l: &[f64], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut y = b.to_vec();
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i * n + k] * y[k]).sum();
        y[i] = (y[i] - s) / l[i * n + i];
    }
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k * n + i] * y[k]).sum();
        y[i] = (y[i] - s) / l[i * n + i];
    }
    y
}

fn jacobi_eigenvalues(mut a: SymMatrix) -> Vec<f64> {
    let n = a.n;
    if n == 1 {
        return vec![a.get(0, 0)];
    }
    let scale = a.max_abs();
    if scale == 0.0 {
        return vec![0.0; n];
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .map(|(i, j)| a.get(i, j).powi(2))
            .sum();
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let (app, aqq) = (a.get(p, p), a.get(q, q));
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);
                a.set(p, p, app - t * apq);
                a.set(q, q, aqq + t * apq);
                a.set(p, q, 0.0);
                a.set(q, p, 0.0);
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let (arp, arq) = (a.get(r, p), a.get(r, q));
                    let new_rp = arp - s * (arq + tau * arp);
                    let new_rq = arq + s * (arp - tau * arq);
                    a.set(r, p, new_rp);
                    a.set(p, r, new_rp);
                    a.set(r, q, new_rq);
                    a.set(q, r, new_rq);
                }
            }
        }
    }
    (0..n).map(|i| a.get(i, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_and_diagonal() {
        let m = SymMatrix::from_row_major(2, vec![2.0, 1.0, 1.0, 2.0]);
        let e = m.eigenvalues();
        assert!((e[0] - 1.0).abs() < 1e-15 && (e[1] - 3.0).abs() < 1e-15);
        let d = SymMatrix::from_row_major(3, vec![3.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 2.0]);
        assert_eq!(d.eigenvalues(), vec![-1.0, 2.0, 3.0]);
        assert_eq!(d.blocks(0.0).len(), 3);
    }

    #[test]
    fn cholesky_solves_spd_system() {
        let m = SymMatrix::from_row_major(3, vec![4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let l = m.cholesky().unwrap();
        let b = [1.0, -2.0, 0.5];
        let x = cholesky_solve(&l, &b);
        let back = m.mul_vec(&x);
        assert!(back.iter().zip(&b).all(|(u, v)| (u - v).abs() < 1e-14));
        let indefinite = SymMatrix::from_row_major(2, vec![1.0, 2.0, 2.0, 1.0]);
        assert!(indefinite.cholesky().is_none());
    }
}
