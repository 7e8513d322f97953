use nalgebra::{Matrix4, Matrix6, Matrix6x4, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::models::ModelParams;

/// Normalized spin components `(X, Y, Z)` of sites A and B.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BlochPair {
    pub xa: f64,
    pub ya: f64,
    pub za: f64,
    pub xb: f64,
    pub yb: f64,
    pub zb: f64,
}

impl BlochPair {
    pub const NORMAL: BlochPair = BlochPair { xa: 0.0, ya: 0.0, za: -1.0, xb: 0.0, yb: 0.0, zb: 1.0 };

    pub fn from_array(a: [f64; 6]) -> Self {
        BlochPair { xa: a[0], ya: a[1], za: a[2], xb: a[3], yb: a[4], zb: a[5] }
    }

    pub fn from_slice(a: &[f64]) -> Self {
        BlochPair { xa: a[0], ya: a[1], za: a[2], xb: a[3], yb: a[4], zb: a[5] }
    }

    pub fn to_array(self) -> [f64; 6] {
        [self.xa, self.ya, self.za, self.xb, self.yb, self.zb]
    }

    pub fn to_vector(self) -> Vector6<f64> {
        Vector6::from(self.to_array())
    }

    pub fn norm_a(&self) -> f64 {
        (self.xa * self.xa + self.ya * self.ya + self.za * self.za).sqrt()
    }

    pub fn norm_b(&self) -> f64 {
        (self.xb * self.xb + self.yb * self.yb + self.zb * self.zb).sqrt()
    }

    /// Largest deviation of either Bloch vector from unit length.
    pub fn shell_error(&self) -> f64 {
        (self.norm_a() - 1.0).abs().max((self.norm_b() - 1.0).abs())
    }

    /// Rescales both Bloch vectors to unit length.
    pub fn normalized(&self) -> BlochPair {
        let (na, nb) = (self.norm_a(), self.norm_b());
        BlochPair {
            xa: self.xa / na,
            ya: self.ya / na,
            za: self.za / na,
            xb: self.xb / nb,
            yb: self.yb / nb,
            zb: self.zb / nb,
        }
    }

    /// The Z2 image: rotation by pi about z on both sites.
    pub fn z2_image(&self) -> BlochPair {
        BlochPair { xa: -self.xa, ya: -self.ya, xb: -self.xb, yb: -self.yb, ..*self }
    }

    pub fn max_distance(&self, other: &BlochPair) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Time derivatives of the six mean-field components. Independent of `S`.
pub fn mf_rhs(s: &BlochPair, p: &ModelParams) -> BlochPair {
    let (g, j, l, gm) = (p.g, p.j, p.lambda, p.gamma);
    let exchange = s.xa * s.yb - s.ya * s.xb;
    BlochPair {
        xa: g * s.ya + l * s.za * s.yb + gm * s.xa * s.za,
        ya: -g * s.xa + 2.0 * j * s.za * s.xa - l * s.za * s.xb + gm * s.ya * s.za,
        za: -2.0 * j * s.ya * s.xa - l * exchange - gm * (1.0 - s.za * s.za),
        xb: g * s.yb + l * s.zb * s.ya - gm * s.xb * s.zb,
        yb: -g * s.xb + 2.0 * j * s.zb * s.xb - l * s.zb * s.xa - gm * s.yb * s.zb,
        zb: -2.0 * j * s.yb * s.xb + l * exchange + gm * (1.0 - s.zb * s.zb),
    }
}

/// Rate at which the integrated flow pulls states back onto the unit spheres.
const SHELL_RELAXATION: f64 = 1.0;

/// The vector field used for integration: [`mf_rhs`] plus a radial term that
/// vanishes on the unit spheres. The spheres are invariant under `mf_rhs`
/// but transversally unstable while `Z_A > 0` or `Z_B < 0` (radial rates
/// `2 gamma Z_A` and `-2 gamma Z_B`), which lets round-off grow on long
/// runs; the extra term replaces those rates by `-2 SHELL_RELAXATION`.
/// On-shell trajectories and their tangent dynamics are unchanged.
pub(crate) fn rhs_slice(p: &ModelParams, y: &[f64], dy: &mut [f64]) {
    let d = mf_rhs(&BlochPair::from_slice(y), p).to_array();
    dy[..6].copy_from_slice(&d);
    for (site, sign) in [(0usize, 1.0), (1, -1.0)] {
        let r = &y[3 * site..3 * site + 3];
        let rr: f64 = r.iter().map(|v| v * v).sum();
        if rr == 0.0 {
            continue;
        }
        let alpha = -(sign * p.gamma * r[2] + SHELL_RELAXATION) * (rr - 1.0) / rr;
        for k in 0..3 {
            dy[3 * site + k] += alpha * r[k];
        }
    }
}

/// Orthonormal basis of the tangent space of the product of spheres at `s`
/// (both Bloch vectors assumed non-zero), as the columns of a 6×4 matrix.
fn tangent_basis(s: &BlochPair) -> Matrix6x4<f64> {
    let mut t = Matrix6x4::zeros();
    for (site, r) in [(0usize, Vector3::new(s.xa, s.ya, s.za)), (1, Vector3::new(s.xb, s.yb, s.zb))] {
        let n = r.normalize();
        let helper = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let e1 = n.cross(&helper).normalize();
        let e2 = n.cross(&e1);
        for k in 0..3 {
            t[(3 * site + k, 2 * site)] = e1[k];
            t[(3 * site + k, 2 * site + 1)] = e2[k];
        }
    }
    t
}

/// Largest real part of the Jacobian restricted to the tangent space of the
/// unit spheres at an on-shell fixed point. The two radial eigenvalues
/// `2 gamma Z_A` and `-2 gamma Z_B` of the full Jacobian describe
/// unphysical off-shell perturbations and are excluded.
pub fn tangent_abscissa(s: &BlochPair, p: &ModelParams) -> f64 {
    let t = tangent_basis(s);
    let reduced: Matrix4<f64> = t.transpose() * mf_jacobian(s, p) * t;
    reduced.complex_eigenvalues().iter().fold(f64::NEG_INFINITY, |acc, z| acc.max(z.re))
}

/// Analytic Jacobian of [`mf_rhs`], rows and columns ordered `XA YA ZA XB YB ZB`.
pub fn mf_jacobian(s: &BlochPair, p: &ModelParams) -> Matrix6<f64> {
    let (g, j, l, gm) = (p.g, p.j, p.lambda, p.gamma);
    let BlochPair { xa, ya, za, xb, yb, zb } = *s;
    #[rustfmt::skip]
    let m = Matrix6::new(
        gm * za,                 g,                       l * yb + gm * xa,                0.0,                     l * za,                  0.0,
        -g + 2.0 * j * za,       gm * za,                 2.0 * j * xa - l * xb + gm * ya, -l * za,                 0.0,                     0.0,
        -2.0 * j * ya - l * yb,  -2.0 * j * xa + l * xb,  2.0 * gm * za,                   l * ya,                  -l * xa,                 0.0,
        0.0,                     l * zb,                  0.0,                             -gm * zb,                g,                       l * ya - gm * xb,
        -l * zb,                 0.0,                     0.0,                             -g + 2.0 * j * zb,       -gm * zb,                2.0 * j * xb - l * xa - gm * yb,
        l * yb,                  -l * xb,                 0.0,                             -2.0 * j * yb - l * ya,  -2.0 * j * xb + l * xa,  -2.0 * gm * zb,
    );
    m
}

/// Largest real part among the eigenvalues of `m`.
pub fn spectral_abscissa(m: &Matrix6<f64>) -> f64 {
    m.complex_eigenvalues().iter().fold(f64::NEG_INFINITY, |acc, z| acc.max(z.re))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin_ops::SpinLength;
    use proptest::prelude::*;

    fn params(g: f64, j: f64, l: f64, gm: f64) -> ModelParams {
        ModelParams::new(g, j, l, gm, SpinLength::from_twice(1).unwrap()).unwrap()
    }

    fn on_shell(a: (f64, f64), b: (f64, f64)) -> BlochPair {
        let v = |(th, ph): (f64, f64)| (th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos());
        let (xa, ya, za) = v(a);
        let (xb, yb, zb) = v(b);
        BlochPair { xa, ya, za, xb, yb, zb }
    }

    #[test]
    fn normal_and_inverted_states_are_roots() {
        let p = params(1.0, 0.7, 0.3, 0.5);
        assert_eq!(mf_rhs(&BlochPair::NORMAL, &p).to_array(), [0.0; 6]);
        let inverted = BlochPair { za: 1.0, zb: -1.0, ..BlochPair::NORMAL };
        assert_eq!(mf_rhs(&inverted, &p).to_array(), [0.0; 6]);
    }

    #[test]
    fn hand_evaluated_rhs() {
        let p = params(1.0, 1.0, 0.5, 0.5);
        let s = BlochPair::from_array([0.5, 0.0, -0.5, 0.0, 0.5, 0.5]);
        let d = mf_rhs(&s, &p).to_array();
        let expect = [-0.25, -1.0, -0.5, 0.5, -0.25, 0.5];
        for (a, b) in d.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15, "{d:?}");
        }
    }

    #[test]
    fn za_diagonal_entry() {
        let p = params(1.0, 0.4, 0.2, 0.5);
        let s = BlochPair::from_array([0.1, 0.2, -0.3, 0.4, -0.5, 0.6]);
        assert!((mf_jacobian(&s, &p)[(2, 2)] - 2.0 * 0.5 * -0.3).abs() < 1e-15);
    }

    #[test]
    fn uncoupled_normal_state_jacobian_blocks() {
        let p = params(1.0, 0.0, 0.0, 0.5);
        let m = mf_jacobian(&BlochPair::NORMAL, &p);
        for i in 0..3 {
            for k in 3..6 {
                assert_eq!(m[(i, k)], 0.0);
                assert_eq!(m[(k, i)], 0.0);
            }
        }
        // site A in-plane block has eigenvalues -gamma +- i g
        let ev = m.complex_eigenvalues();
        let mut inplane: Vec<_> = ev.iter().filter(|z| z.im.abs() > 1e-9).collect();
        inplane.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
        assert_eq!(inplane.len(), 4);
        for z in inplane {
            assert!((z.re + 0.5).abs() < 1e-12 && (z.im.abs() - 1.0).abs() < 1e-12);
        }
        assert!((spectral_abscissa(&m) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let p = params(1.0, -0.8, 0.6, 0.5);
        for k in 0..20 {
            let kf = k as f64;
            let s = on_shell((0.3 + 0.13 * kf, 0.7 * kf), (2.8 - 0.11 * kf, 1.3 + 0.5 * kf));
            let jac = mf_jacobian(&s, &p);
            let h = 1e-6;
            for c in 0..6 {
                let mut up = s.to_array();
                let mut dn = s.to_array();
                up[c] += h;
                dn[c] -= h;
                let fu = mf_rhs(&BlochPair::from_array(up), &p).to_array();
                let fd = mf_rhs(&BlochPair::from_array(dn), &p).to_array();
                for r in 0..6 {
                    let fdiff = (fu[r] - fd[r]) / (2.0 * h);
                    assert!((fdiff - jac[(r, c)]).abs() < 1e-6, "entry ({r},{c})");
                }
            }
        }
    }

    #[test]
    fn tangent_spectrum_drops_radial_modes() {
        let p = params(1.0, 0.3, 0.2, 0.5);
        let s = BlochPair::NORMAL;
        let full = mf_jacobian(&s, &p).complex_eigenvalues();
        let t = tangent_basis(&s);
        let reduced: Matrix4<f64> = t.transpose() * mf_jacobian(&s, &p) * t;
        // radial rates at the normal state: 2 gamma Z_A = -1, -2 gamma Z_B = -1
        let mut rest: Vec<_> = full.iter().cloned().collect();
        for z in reduced.complex_eigenvalues().iter() {
            let k = rest.iter().position(|w| (w - z).norm() < 1e-9).expect("tangent eigenvalue in full spectrum");
            rest.remove(k);
        }
        assert_eq!(rest.len(), 2);
        assert!(rest.iter().all(|w| (w.re + 1.0).abs() < 1e-9 && w.im.abs() < 1e-9));
        assert!((tangent_abscissa(&s, &p) - spectral_abscissa(&mf_jacobian(&s, &p))).abs() < 1e-12);
    }

    #[test]
    fn stabilized_flow_agrees_on_shell() {
        let p = params(1.0, -0.8, 0.6, 0.5);
        let s = on_shell((0.4, 1.0), (2.0, -0.5));
        let mut dy = [0.0; 6];
        rhs_slice(&p, &s.to_array(), &mut dy);
        let exact = mf_rhs(&s, &p).to_array();
        for k in 0..6 {
            assert!((dy[k] - exact[k]).abs() < 1e-14);
        }
    }

    proptest! {
        #[test]
        fn stabilized_flow_contracts_shell(v in prop::array::uniform6(-1.5f64..1.5), j in -2.0f64..2.0, l in 0.0f64..1.0, gm in 0.0f64..1.0) {
            let p = params(1.0, j, l, gm);
            let mut dy = [0.0; 6];
            rhs_slice(&p, &v, &mut dy);
            for site in 0..2 {
                let r = &v[3 * site..3 * site + 3];
                let rr: f64 = r.iter().map(|x| x * x).sum();
                prop_assume!(rr > 1e-6);
                let rate: f64 = 2.0 * (0..3).map(|k| r[k] * dy[3 * site + k]).sum::<f64>();
                prop_assert!((rate + 2.0 * SHELL_RELAXATION * (rr - 1.0)).abs() < 1e-10);
            }
        }


        #[test]
        fn sphere_norm_rate(v in prop::array::uniform6(-1.5f64..1.5), j in -2.0f64..2.0, l in 0.0f64..1.0, gm in 0.0f64..1.0) {
            let p = params(1.0, j, l, gm);
            let s = BlochPair::from_array(v);
            let d = mf_rhs(&s, &p);
            let ra2 = s.xa * s.xa + s.ya * s.ya + s.za * s.za;
            let rb2 = s.xb * s.xb + s.yb * s.yb + s.zb * s.zb;
            let da = 2.0 * (s.xa * d.xa + s.ya * d.ya + s.za * d.za);
            let db = 2.0 * (s.xb * d.xb + s.yb * d.yb + s.zb * d.zb);
            prop_assert!((da - 2.0 * gm * s.za * (ra2 - 1.0)).abs() < 1e-12);
            prop_assert!((db + 2.0 * gm * s.zb * (rb2 - 1.0)).abs() < 1e-12);
        }

        #[test]
        fn z2_equivariance(v in prop::array::uniform6(-1.0f64..1.0), j in -2.0f64..2.0, l in 0.0f64..1.0) {
            let p = params(1.0, j, l, 0.5);
            let s = BlochPair::from_array(v);
            prop_assert_eq!(mf_rhs(&s.z2_image(), &p), mf_rhs(&s, &p).z2_image());
        }
    }
}
