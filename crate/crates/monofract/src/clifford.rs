//! Dense Clifford algebra Cl(n) over anticommuting generators with
//! `e_i e_j + e_j e_i = -2 delta_ij`, together with the paravector embedding
//! of Euclidean points, the Cauchy-Riemann operator and its fundamental
//! solution.
//!
//! Basis blades are indexed by bitmask: bit `i-1` of the index marks the
//! generator `e_i`, so index 0 is the scalar unit and index `0b11` is
//! `e_1 e_2`. A multivector stores all `2^n` coefficients densely; n stays
//! small (at most [`MAX_N`]) so this is both simple and fast.

use crate::error::{Error, Result};
use crate::geom::Point;
use serde::{Deserialize, Serialize};

/// Largest supported number of generators.
pub const MAX_N: usize = 8;

/// Sign accumulated when multiplying basis blades `e_A * e_B` into
/// `e_(A xor B)`: one factor -1 per transposition needed to interleave the
/// generators, one per shared generator (each squares to -1).
#[inline]
fn blade_product_sign(a: u32, b: u32) -> f64 {
    let mut shifted = a >> 1;
    let mut swaps = 0u32;
    while shifted != 0 {
        swaps += (shifted & b).count_ones();
        shifted >>= 1;
    }
    let squares = (a & b).count_ones();
    if (swaps + squares).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Conjugation sign on a grade-k blade: `(-1)^(k(k+1)/2)`.
#[inline]
fn conjugation_sign(mask: u32) -> f64 {
    let k = mask.count_ones();
    if (k * (k + 1) / 2).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

fn check_n(n: usize) -> Result<()> {
    if (1..=MAX_N).contains(&n) {
        Ok(())
    } else {
        Err(Error::invalid(
            "n",
            format!("Cl(n) supports 1 ..= {MAX_N}, got {n}"),
        ))
    }
}

/// Element of Cl(n) as a dense coefficient vector over the `2^n` blades.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Multivector {
    n: u8,
    coeffs: Vec<f64>,
}

impl Multivector {
    pub fn zero(n: usize) -> Result<Self> {
        check_n(n)?;
        Ok(Multivector {
            n: n as u8,
            coeffs: vec![0.0; 1 << n],
        })
    }

    pub fn scalar(n: usize, value: f64) -> Result<Self> {
        let mut m = Multivector::zero(n)?;
        m.coeffs[0] = value;
        Ok(m)
    }

    /// Single basis blade `e_A` for the bitmask `A`.
    pub fn basis_blade(n: usize, mask: u32) -> Result<Self> {
        check_n(n)?;
        if mask as usize >= 1 << n {
            return Err(Error::invalid(
                "mask",
                format!("blade {mask:#b} outside Cl({n})"),
            ));
        }
        let mut m = Multivector::zero(n)?;
        m.coeffs[mask as usize] = 1.0;
        Ok(m)
    }

    pub fn from_coeffs(n: usize, coeffs: Vec<f64>) -> Result<Self> {
        check_n(n)?;
        if coeffs.len() != 1 << n {
            return Err(Error::invalid(
                "coeffs",
                format!("expected {} coefficients, got {}", 1 << n, coeffs.len()),
            ));
        }
        Ok(Multivector {
            n: n as u8,
            coeffs,
        })
    }

    pub fn n(&self) -> usize {
        self.n as usize
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, mask: u32) -> f64 {
        self.coeffs[mask as usize]
    }

    pub fn set_coeff(&mut self, mask: u32, value: f64) {
        self.coeffs[mask as usize] = value;
    }

    pub fn scalar_part(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn add(&self, other: &Multivector) -> Multivector {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Multivector) -> Multivector {
        self.zip(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Multivector {
        Multivector {
            n: self.n,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Multivector) {
        assert_eq!(self.n, other.n, "mixed Cl(n) operands");
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
    }

    pub fn add_scaled(&mut self, other: &Multivector, s: f64) {
        assert_eq!(self.n, other.n, "mixed Cl(n) operands");
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b * s;
        }
    }

    /// Geometric product.
    pub fn mul(&self, other: &Multivector) -> Multivector {
        assert_eq!(self.n, other.n, "mixed Cl(n) operands");
        let mut out = Multivector {
            n: self.n,
            coeffs: vec![0.0; self.coeffs.len()],
        };
        for (a_mask, &a) in self.coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (b_mask, &b) in other.coeffs.iter().enumerate() {
                if b == 0.0 {
                    continue;
                }
                let sign = blade_product_sign(a_mask as u32, b_mask as u32);
                out.coeffs[a_mask ^ b_mask] += sign * a * b;
            }
        }
        out
    }

    /// Clifford conjugation: anti-automorphism sending `e_i` to `-e_i`.
    pub fn conjugate(&self) -> Multivector {
        let mut out = self.clone();
        for (mask, c) in out.coeffs.iter_mut().enumerate() {
            *c *= conjugation_sign(mask as u32);
        }
        out
    }

    /// Euclidean norm of the coefficient vector.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    fn zip(&self, other: &Multivector, f: impl Fn(f64, f64) -> f64) -> Multivector {
        assert_eq!(self.n, other.n, "mixed Cl(n) operands");
        Multivector {
            n: self.n,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }
}

/// Paravector `x_0 + x_1 e_1 + ... + x_n e_n`: the Clifford face of a point
/// in (n+1)-dimensional space. Kept as a flat array because kernel
/// evaluations construct these in bulk.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Paravector {
    n: u8,
    c: [f64; MAX_N + 1],
}

impl Paravector {
    pub fn new(components: &[f64]) -> Result<Self> {
        let n = components.len().saturating_sub(1);
        check_n(n)?;
        let mut c = [0.0; MAX_N + 1];
        c[..components.len()].copy_from_slice(components);
        Ok(Paravector { n: n as u8, c })
    }

    /// Interpret a spatial point in R^(n+1) as a paravector, first coordinate
    /// in the scalar slot.
    pub fn from_point(p: &Point) -> Result<Self> {
        Paravector::new(p.as_slice())
    }

    pub fn to_point(&self) -> Point {
        Point::new(self.components())
    }

    pub fn n(&self) -> usize {
        self.n as usize
    }

    pub fn components(&self) -> &[f64] {
        &self.c[..=self.n as usize]
    }

    pub fn scalar_part(&self) -> f64 {
        self.c[0]
    }

    pub fn conjugate(&self) -> Paravector {
        let mut out = *self;
        for v in &mut out.c[1..=self.n as usize] {
            *v = -*v;
        }
        out
    }

    pub fn norm_sq(&self) -> f64 {
        self.components().iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn to_multivector(&self) -> Multivector {
        let mut m = Multivector::zero(self.n as usize).expect("validated n");
        m.coeffs[0] = self.c[0];
        for i in 1..=self.n as usize {
            m.coeffs[1 << (i - 1)] = self.c[i];
        }
        m
    }

    /// Left-multiply a general multivector by this paravector. Equivalent to
    /// `self.to_multivector().mul(m)` but only walks the n+1 live blades.
    pub fn mul_mv(&self, m: &Multivector) -> Multivector {
        let mut out = Multivector::zero(self.n as usize).expect("validated n");
        self.mul_mv_acc(m, 1.0, &mut out);
        out
    }

    /// `acc += weight * (self * m)`, allocation-free inner loop for
    /// quadrature accumulation.
    pub fn mul_mv_acc(&self, m: &Multivector, weight: f64, acc: &mut Multivector) {
        assert_eq!(self.n, m.n, "mixed Cl(n) operands");
        assert_eq!(self.n, acc.n, "mixed Cl(n) operands");
        let x0 = self.c[0] * weight;
        if x0 != 0.0 {
            for (a, b) in acc.coeffs.iter_mut().zip(&m.coeffs) {
                *a += x0 * b;
            }
        }
        for i in 1..=self.n as usize {
            let xi = self.c[i] * weight;
            if xi == 0.0 {
                continue;
            }
            let blade = 1u32 << (i - 1);
            for (b_mask, &b) in m.coeffs.iter().enumerate() {
                if b == 0.0 {
                    continue;
                }
                let sign = blade_product_sign(blade, b_mask as u32);
                acc.coeffs[(blade as usize) ^ b_mask] += sign * xi * b;
            }
        }
    }
}

/// Surface area of the unit sphere in R^(n+1):
/// `sigma_n = 2 pi^((n+1)/2) / Gamma((n+1)/2)`, evaluated in log space.
pub fn sphere_area(n: usize) -> Result<f64> {
    check_n(n)?;
    static TABLE: std::sync::OnceLock<[f64; MAX_N + 1]> = std::sync::OnceLock::new();
    let table = TABLE.get_or_init(|| {
        std::array::from_fn(|n| {
            let half = (n + 1) as f64 / 2.0;
            let ln_sigma =
                std::f64::consts::LN_2 + half * std::f64::consts::PI.ln() - ln_gamma_half(n + 1);
            ln_sigma.exp()
        })
    });
    Ok(table[n])
}

/// `ln Gamma(m/2)` for integer m >= 1, exact product formulas: the argument
/// is either an integer or a half-integer.
fn ln_gamma_half(m: usize) -> f64 {
    if m.is_multiple_of(2) {
        // Gamma(k) = (k-1)!
        let k = m / 2;
        (1..k).map(|j| (j as f64).ln()).sum()
    } else {
        // Gamma(k + 1/2) = sqrt(pi) * prod_{j=1..k} (j - 1/2)
        let k = m / 2;
        0.5 * std::f64::consts::PI.ln() + (1..=k).map(|j| (j as f64 - 0.5).ln()).sum::<f64>()
    }
}

/// Fundamental solution of the Cauchy-Riemann operator:
/// `E(x) = conj(x) / (sigma_n |x|^(n+1))` as a paravector. Errors at the
/// origin.
pub fn fundamental_solution(x: &Paravector) -> Result<Paravector> {
    let n = x.n();
    let norm_sq = x.norm_sq();
    if norm_sq == 0.0 {
        return Err(Error::Singular(
            "fundamental solution evaluated at the origin".into(),
        ));
    }
    let sigma = sphere_area(n)?;
    // |x|^(n+1) via integer powers of |x|^2, much faster than powf.
    let pw = if (n + 1).is_multiple_of(2) {
        norm_sq.powi(n.div_ceil(2) as i32)
    } else {
        norm_sq.powi((n / 2) as i32) * norm_sq.sqrt()
    };
    let scale = 1.0 / (sigma * pw);
    let mut out = x.conjugate();
    for v in &mut out.c[..=n] {
        *v *= scale;
    }
    Ok(out)
}

/// Default finite-difference step for [`cauchy_riemann`]: `1e-4` of the
/// supplied length scale.
pub fn default_cr_step(length_scale: f64) -> f64 {
    1e-4 * length_scale
}

/// Cauchy-Riemann operator `D f = sum_i e_i d_i f` (with `e_0 = 1`) applied
/// by central differences with step `h`; O(h^2) for C^3 integrands.
pub fn cauchy_riemann<F>(f: F, x: &Point, h: f64) -> Result<Multivector>
where
    F: Fn(&Point) -> Result<Multivector>,
{
    let dim = x.dim();
    let n = dim - 1;
    check_n(n)?;
    if !(h > 0.0) {
        return Err(Error::invalid("h", format!("step must be positive, got {h}")));
    }
    let mut out = Multivector::zero(n)?;
    for i in 0..dim {
        let mut xp = *x;
        let mut xm = *x;
        xp.set(i, x.get(i) + h);
        xm.set(i, x.get(i) - h);
        let diff = f(&xp)?.sub(&f(&xm)?).scale(1.0 / (2.0 * h));
        if i == 0 {
            out.add_assign(&diff);
        } else {
            let e_i = Paravector::new(
                &(0..dim)
                    .map(|j| if j == i { 1.0 } else { 0.0 })
                    .collect::<Vec<_>>(),
            )?;
            out.add_assign(&e_i.mul_mv(&diff));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mv(rng: &mut ChaCha8Rng, n: usize) -> Multivector {
        let coeffs = (0..1 << n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Multivector::from_coeffs(n, coeffs).unwrap()
    }

    #[test]
    fn generator_products() {
        let n = 3;
        let e1 = Multivector::basis_blade(n, 0b001).unwrap();
        let e2 = Multivector::basis_blade(n, 0b010).unwrap();
        let e12 = Multivector::basis_blade(n, 0b011).unwrap();

        assert_eq!(e1.mul(&e2), e12);
        assert_eq!(e2.mul(&e1), e12.scale(-1.0));
        assert_eq!(e1.mul(&e1), Multivector::scalar(n, -1.0).unwrap());
    }

    #[test]
    fn product_of_conjugate_pair_is_scalar() {
        // (1 + e_1)(1 - e_1) = 1 - e_1^2 = 2
        let n = 2;
        let one = Multivector::scalar(n, 1.0).unwrap();
        let e1 = Multivector::basis_blade(n, 0b01).unwrap();
        let product = one.add(&e1).mul(&one.sub(&e1));
        assert_eq!(product, Multivector::scalar(n, 2.0).unwrap());
    }

    #[test]
    fn conjugation_signs_by_grade() {
        let n = 3;
        for (mask, sign) in [(0b000u32, 1.0), (0b001, -1.0), (0b011, -1.0), (0b111, 1.0)] {
            let b = Multivector::basis_blade(n, mask).unwrap();
            assert_eq!(b.conjugate(), b.scale(sign), "mask {mask:#b}");
        }
    }

    #[test]
    fn conjugation_is_anti_automorphism() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=4 {
            for _ in 0..50 {
                let a = random_mv(&mut rng, n);
                let b = random_mv(&mut rng, n);
                let lhs = a.mul(&b).conjugate();
                let rhs = b.conjugate().mul(&a.conjugate());
                assert!(lhs.sub(&rhs).norm() <= 1e-12 * (1.0 + a.norm() * b.norm()));
            }
        }
    }

    #[test]
    fn vectors_square_to_minus_norm_sq() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in 1..=5 {
            for _ in 0..50 {
                let mut v = Multivector::zero(n).unwrap();
                for i in 0..n {
                    v.set_coeff(1 << i, rng.gen_range(-2.0..2.0));
                }
                let sq = v.mul(&v);
                let expect = Multivector::scalar(n, -v.norm() * v.norm()).unwrap();
                assert!(sq.sub(&expect).norm() <= 1e-12 * (1.0 + v.norm() * v.norm()));
            }
        }
    }

    #[test]
    fn paravector_norm_is_multiplicative() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in 1..=4 {
            for _ in 0..100 {
                let comps: Vec<f64> = (0..=n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let x = Paravector::new(&comps).unwrap();
                let a = random_mv(&mut rng, n);
                let prod = x.mul_mv(&a);
                assert_relative_eq!(
                    prod.norm(),
                    x.norm() * a.norm(),
                    max_relative = 1e-12,
                    epsilon = 1e-300
                );
            }
        }
    }

    #[test]
    fn paravector_fast_product_matches_general_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for n in 1..=4 {
            for _ in 0..50 {
                let comps: Vec<f64> = (0..=n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let x = Paravector::new(&comps).unwrap();
                let a = random_mv(&mut rng, n);
                let fast = x.mul_mv(&a);
                let slow = x.to_multivector().mul(&a);
                assert!(fast.sub(&slow).norm() <= 1e-14);
            }
        }
    }

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(sphere_area(1).unwrap(), 2.0 * std::f64::consts::PI);
        assert_relative_eq!(sphere_area(2).unwrap(), 4.0 * std::f64::consts::PI);
        // sigma_3 = 2 pi^2
        assert_relative_eq!(
            sphere_area(3).unwrap(),
            2.0 * std::f64::consts::PI * std::f64::consts::PI
        );
        assert!(sphere_area(0).is_err());
        assert!(sphere_area(9).is_err());
    }

    #[test]
    fn fundamental_solution_reference_values() {
        let four_pi = 4.0 * std::f64::consts::PI;
        // E(e_0) = e_0 / (4 pi) in Cl(2)
        let e = fundamental_solution(&Paravector::new(&[1.0, 0.0, 0.0]).unwrap()).unwrap();
        assert_relative_eq!(e.scalar_part(), 1.0 / four_pi);
        // E(2 e_0) scales as |x|^-n = 1/4 relative to the unit point
        let e2 = fundamental_solution(&Paravector::new(&[2.0, 0.0, 0.0]).unwrap()).unwrap();
        assert_relative_eq!(e2.scalar_part(), 1.0 / (4.0 * four_pi));
        // E(e_1) = -e_1 / (4 pi)
        let e3 = fundamental_solution(&Paravector::new(&[0.0, 1.0, 0.0]).unwrap()).unwrap();
        assert_relative_eq!(e3.components()[1], -1.0 / four_pi);
        assert!(fundamental_solution(&Paravector::new(&[0.0, 0.0, 0.0]).unwrap()).is_err());
    }

    #[test]
    fn cauchy_riemann_on_identity_paravector_field() {
        // D applied to u(x) = x gives sum_i e_i e_i = 1 - n.
        for dim in [2usize, 3, 4] {
            let n = dim - 1;
            let d = cauchy_riemann(
                |p: &Point| Ok(Paravector::from_point(p)?.to_multivector()),
                &Point::new(&vec![0.3; dim]),
                1e-5,
            )
            .unwrap();
            let expect = Multivector::scalar(n, 1.0 - n as f64).unwrap();
            assert!(d.sub(&expect).norm() < 1e-8, "dim {dim}: {d:?}");
        }
    }

    #[test]
    fn cauchy_riemann_annihilates_constants() {
        let d = cauchy_riemann(
            |_: &Point| Multivector::scalar(2, 4.2),
            &Point::new(&[0.1, 0.2, 0.3]),
            1e-4,
        )
        .unwrap();
        assert!(d.norm() < 1e-9);
    }

    #[test]
    fn fundamental_solution_is_monogenic_away_from_origin() {
        // Central differences of E at a generic point: residual is O(h^2).
        let field = |p: &Point| {
            Ok(fundamental_solution(&Paravector::from_point(p)?)?.to_multivector())
        };
        let x = Point::new(&[0.4, -0.3, 0.55]);
        let r1 = cauchy_riemann(field, &x, 1e-2).unwrap().norm();
        let r2 = cauchy_riemann(field, &x, 5e-3).unwrap().norm();
        assert!(r1 < 1e-2, "coarse residual {r1}");
        // halving h should shrink the residual by about 4
        assert!(r2 < 0.5 * r1, "no O(h^2) decay: {r1} -> {r2}");
    }

    #[test]
    fn associativity_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=5 {
            for _ in 0..40 {
                let a = random_mv(&mut rng, n);
                let b = random_mv(&mut rng, n);
                let c = random_mv(&mut rng, n);
                let lhs = a.mul(&b).mul(&c);
                let rhs = a.mul(&b.mul(&c));
                let tol = 1e-10 * (1.0 + a.norm() * b.norm() * c.norm());
                assert!(lhs.sub(&rhs).norm() <= tol);
            }
        }
    }
}
