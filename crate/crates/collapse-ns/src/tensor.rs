//! Deformation and viscous stress tensors for N = 2 or 3, and the
//! contraction identity `S(G) : G = 2 mu |D - (div/N) Id|^2 + eta div^2`.

/// Dense N x N matrix with N <= 3, stored in a fixed buffer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat {
    pub n: usize,
    e: [[f64; 3]; 3],
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        assert!(n == 2 || n == 3);
        Mat { n, e: [[0.0; 3]; 3] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n);
        for i in 0..n {
            m.e[i][i] = 1.0;
        }
        m
    }

    pub fn from_rows2(rows: [[f64; 2]; 2]) -> Self {
        let mut m = Mat::zeros(2);
        for i in 0..2 {
            for j in 0..2 {
                m.e[i][j] = rows[i][j];
            }
        }
        m
    }

    pub fn from_rows3(rows: [[f64; 3]; 3]) -> Self {
        let mut m = Mat::zeros(3);
        m.e = rows;
        m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.e[i][j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.e[i][j] = v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.e[i][i]).sum()
    }

    pub fn transpose(&self) -> Mat {
        let mut m = Mat::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                m.e[i][j] = self.e[j][i];
            }
        }
        m
    }

    pub fn scale(&self, c: f64) -> Mat {
        let mut m = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                m.e[i][j] *= c;
            }
        }
        m
    }

    pub fn add(&self, other: &Mat) -> Mat {
        debug_assert_eq!(self.n, other.n);
        let mut m = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                m.e[i][j] += other.e[i][j];
            }
        }
        m
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        self.add(&other.scale(-1.0))
    }

    /// Double contraction `A : B = sum_ij A_ij B_ji`.
    pub fn contract(&self, other: &Mat) -> f64 {
        debug_assert_eq!(self.n, other.n);
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += self.e[i][j] * other.e[j][i];
            }
        }
        s
    }

    /// Squared Frobenius norm.
    pub fn norm_sq(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += self.e[i][j] * self.e[i][j];
            }
        }
        s
    }
}

/// Symmetric part `(G + G^T)/2` of a velocity gradient.
pub fn deformation(g: &Mat) -> Mat {
    g.add(&g.transpose()).scale(0.5)
}

/// Viscous stress `S(G) = mu (2 D - (2/N) div Id) + eta div Id`.
pub fn stress(g: &Mat, mu: f64, eta: f64) -> Mat {
    let n = g.n as f64;
    let div = g.trace();
    let d = deformation(g);
    d.scale(2.0 * mu)
        .add(&Mat::identity(g.n).scale((eta - 2.0 * mu / n) * div))
}

/// Both sides of the stress contraction identity: returns
/// `(S(G) : G, 2 mu |D - (div/N) Id|^2 + eta div^2)`.
pub fn contraction_identity(g: &Mat, mu: f64, eta: f64) -> (f64, f64) {
    let n = g.n as f64;
    let div = g.trace();
    let lhs = stress(g, mu, eta).contract(g);
    let traceless = deformation(g).sub(&Mat::identity(g.n).scale(div / n));
    let rhs = 2.0 * mu * traceless.norm_sq() + eta * div * div;
    (lhs, rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn deformation_examples() {
        let id = Mat::identity(2);
        assert_eq!(deformation(&id), id);
        let g = Mat::from_rows2([[0.0, 1.0], [0.0, 0.0]]);
        let d = deformation(&g);
        assert_eq!(d.get(0, 1), 0.5);
        assert_eq!(d.get(1, 0), 0.5);
        assert_eq!(d.get(0, 0), 0.0);
        // rigid rotation has zero deformation
        let rot = Mat::from_rows2([[0.0, -1.0], [1.0, 0.0]]);
        assert_eq!(deformation(&rot).norm_sq(), 0.0);
    }

    #[test]
    fn stress_examples() {
        let mu = 0.3;
        let eta = 0.7;
        // G = Id in 2D: div = 2, D = Id, S = mu(2Id - 2Id) + 2 eta Id = 2 eta Id
        let s = stress(&Mat::identity(2), mu, eta);
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 2.0 * eta } else { 0.0 };
                assert!((s.get(i, j) - expect).abs() < 1e-14);
            }
        }
        // pure shear
        let g = Mat::from_rows2([[0.0, 1.0], [0.0, 0.0]]);
        let s = stress(&g, mu, eta);
        assert!((s.get(0, 1) - mu).abs() < 1e-14);
        assert!((s.get(1, 0) - mu).abs() < 1e-14);
        assert_eq!(s.get(0, 0), 0.0);
        // zero gradient
        assert_eq!(stress(&Mat::zeros(3), mu, eta).norm_sq(), 0.0);
    }

    #[test]
    fn contraction_identity_examples() {
        let mu = 0.3;
        let eta = 0.7;
        let (l, r) = contraction_identity(&Mat::identity(2), mu, eta);
        assert!((l - 4.0 * eta).abs() < 1e-14);
        assert!((r - 4.0 * eta).abs() < 1e-14);
        let g = Mat::from_rows2([[0.0, 1.0], [0.0, 0.0]]);
        let (l, r) = contraction_identity(&g, mu, eta);
        assert!((l - mu).abs() < 1e-14);
        assert!((r - mu).abs() < 1e-14);
    }

    fn arb_mat(n: usize) -> impl Strategy<Value = Mat> {
        prop::collection::vec(-10.0f64..10.0, n * n).prop_map(move |v| {
            let mut m = Mat::zeros(n);
            for i in 0..n {
                for j in 0..n {
                    m.set(i, j, v[i * n + j]);
                }
            }
            m
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2500))]

        #[test]
        fn identity_holds_2d(g in arb_mat(2), mu in 0.01f64..2.0, eta in 0.01f64..2.0) {
            let (l, r) = contraction_identity(&g, mu, eta);
            prop_assert!((l - r).abs() <= 1e-12 * (1.0 + l.abs()));
            prop_assert!(r >= -1e-13);
        }

        #[test]
        fn identity_holds_3d(g in arb_mat(3), mu in 0.01f64..2.0, eta in 0.01f64..2.0) {
            let (l, r) = contraction_identity(&g, mu, eta);
            prop_assert!((l - r).abs() <= 1e-12 * (1.0 + l.abs()));
            prop_assert!(r >= -1e-13);
        }

        #[test]
        fn stress_symmetric_and_trace(g in arb_mat(3), mu in 0.01f64..2.0, eta in 0.01f64..2.0) {
            let s = stress(&g, mu, eta);
            for i in 0..3 {
                for j in 0..3 {
                    prop_assert!((s.get(i, j) - s.get(j, i)).abs() <= 1e-14 * (1.0 + s.get(i, j).abs()));
                }
            }
            // mu-part is traceless: tr S = N eta div
            let expect = 3.0 * eta * g.trace();
            prop_assert!((s.trace() - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
        }
    }
}
