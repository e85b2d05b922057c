//! Arithmetic in the prime field `GF(2^61 − 1)` plus a small scalar trait
//! shared by the exact and floating elimination routines.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;

/// The Mersenne prime `2^61 − 1`.
pub const MODULUS: u64 = (1 << 61) - 1;

/// Element of `GF(2^61 − 1)`, always stored reduced.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Fp(u64);

impl Fp {
    pub const ZERO: Fp = Fp(0);
    pub const ONE: Fp = Fp(1);

    pub fn new(value: u64) -> Self {
        Fp(reduce64(value))
    }

    pub fn value(self) -> u64 {
        self.0
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Fp(rng.random_range(0..MODULUS))
    }

    pub fn pow(self, mut exp: u64) -> Self {
        let mut base = self;
        let mut acc = Fp::ONE;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv(self) -> Option<Self> {
        (self.0 != 0).then(|| self.pow(MODULUS - 2))
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

#[inline]
fn reduce64(x: u64) -> u64 {
    let folded = (x & MODULUS) + (x >> 61);
    if folded >= MODULUS {
        folded - MODULUS
    } else {
        folded
    }
}

impl Add for Fp {
    type Output = Fp;
    #[inline]
    fn add(self, rhs: Fp) -> Fp {
        let s = self.0 + rhs.0;
        Fp(if s >= MODULUS { s - MODULUS } else { s })
    }
}

impl Sub for Fp {
    type Output = Fp;
    #[inline]
    fn sub(self, rhs: Fp) -> Fp {
        Fp(if self.0 >= rhs.0 { self.0 - rhs.0 } else { self.0 + MODULUS - rhs.0 })
    }
}

impl Neg for Fp {
    type Output = Fp;
    fn neg(self) -> Fp {
        Fp::ZERO - self
    }
}

impl Mul for Fp {
    type Output = Fp;
    #[inline]
    fn mul(self, rhs: Fp) -> Fp {
        let prod = self.0 as u128 * rhs.0 as u128;
        let lo = (prod as u64) & MODULUS;
        let hi = (prod >> 61) as u64;
        Fp(reduce64(lo + hi))
    }
}

impl fmt::Debug for Fp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fp({})", self.0)
    }
}

/// Scalars the elimination routines can work over.
pub trait Scalar:
    Copy + PartialEq + fmt::Debug + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self>
{
    /// Exact arithmetic: no rounding, pivots are zero or nonzero.
    const EXACT: bool;
    fn zero() -> Self;
    fn one() -> Self;
    fn recip(self) -> Option<Self>;
    /// Magnitude used for pivot selection; exact scalars report 0 or 1.
    fn magnitude(self) -> f64;
    /// Whether a pivot candidate counts as zero relative to `scale`.
    fn negligible(self, scale: f64) -> bool;
}

impl Scalar for Fp {
    const EXACT: bool = true;
    fn zero() -> Self {
        Fp::ZERO
    }
    fn one() -> Self {
        Fp::ONE
    }
    fn recip(self) -> Option<Self> {
        self.inv()
    }
    fn magnitude(self) -> f64 {
        if self.is_zero() { 0.0 } else { 1.0 }
    }
    fn negligible(self, _scale: f64) -> bool {
        self.is_zero()
    }
}

/// Relative pivot threshold for floating elimination.
pub const FLOAT_PIVOT_EPS: f64 = 1e-12;

impl Scalar for f64 {
    const EXACT: bool = false;
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn recip(self) -> Option<Self> {
        (self != 0.0).then(|| 1.0 / self)
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
    fn negligible(self, scale: f64) -> bool {
        self.abs() <= FLOAT_PIVOT_EPS * scale
    }
}

/// Nonzero vector spanning the kernel of a `rows × cols` matrix with
/// one-dimensional kernel, or `None` when the kernel dimension differs from 1.
///
/// Uses elimination with partial pivoting. The result is normalized so that
/// its first nonzero entry (exact scalars) or its largest-magnitude entry
/// (floating scalars) equals one.
pub fn kernel_vector<T: Scalar>(matrix: &[Vec<T>], cols: usize) -> Option<Vec<T>> {
    let mut a: Vec<Vec<T>> = matrix.to_vec();
    let rows = a.len();
    let scale = a
        .iter()
        .flat_map(|row| row.iter().map(|x| x.magnitude()))
        .fold(0.0_f64, f64::max);
    let mut pivot_cols = Vec::with_capacity(rows);
    let mut free_cols = Vec::new();
    let mut next_row = 0;
    for col in 0..cols {
        let best = (next_row..rows).max_by(|&i, &j| {
            a[i][col].magnitude().total_cmp(&a[j][col].magnitude())
        });
        let Some(p) = best.filter(|&p| !a[p][col].negligible(scale)) else {
            free_cols.push(col);
            continue;
        };
        a.swap(next_row, p);
        let inv = a[next_row][col].recip()?;
        for x in a[next_row].iter_mut() {
            *x = *x * inv;
        }
        let pivot_row = a[next_row].clone();
        for (i, row) in a.iter_mut().enumerate() {
            if i != next_row {
                let factor = row[col];
                if factor != T::zero() {
                    for (x, &p) in row[col..cols].iter_mut().zip(&pivot_row[col..cols]) {
                        *x = *x - factor * p;
                    }
                }
            }
        }
        pivot_cols.push(col);
        next_row += 1;
        if next_row == rows {
            free_cols.extend(col + 1..cols);
            break;
        }
    }
    if free_cols.len() != 1 {
        return None;
    }
    let free = free_cols[0];
    let mut v = vec![T::zero(); cols];
    v[free] = T::one();
    for (row, &pc) in pivot_cols.iter().enumerate() {
        v[pc] = T::zero() - a[row][free];
    }
    normalize(&mut v);
    Some(v)
}

fn normalize<T: Scalar>(v: &mut [T]) {
    let anchor = if T::EXACT {
        v.iter().copied().find(|x| x.magnitude() != 0.0)
    } else {
        v.iter().copied().max_by(|a, b| a.magnitude().total_cmp(&b.magnitude()))
    };
    if let Some(inv) = anchor.and_then(Scalar::recip) {
        for x in v.iter_mut() {
            *x = *x * inv;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn field_axioms_on_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let a = Fp::random(&mut rng);
            let b = Fp::random(&mut rng);
            let c = Fp::random(&mut rng);
            assert_eq!(a * (b + c), a * b + a * c);
            assert_eq!(a - a, Fp::ZERO);
            assert_eq!(a + (-a), Fp::ZERO);
            if !a.is_zero() {
                assert_eq!(a * a.inv().unwrap(), Fp::ONE);
            }
            // Cross-check multiplication against u128 remainder.
            let expect = (a.value() as u128 * b.value() as u128 % MODULUS as u128) as u64;
            assert_eq!((a * b).value(), expect);
        }
        assert_eq!(Fp::new(MODULUS), Fp::ZERO);
        assert_eq!(Fp::new(u64::MAX).value(), (u64::MAX as u128 % MODULUS as u128) as u64);
    }

    #[test]
    fn exact_kernel_normalizes_first_entry() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m: Vec<Vec<Fp>> = (0..2).map(|_| (0..3).map(|_| Fp::random(&mut rng)).collect()).collect();
        let v = kernel_vector(&m, 3).unwrap();
        assert_eq!(v.iter().find(|x| !x.is_zero()), Some(&Fp::ONE));
        for row in &m {
            let dot = row.iter().zip(&v).fold(Fp::ZERO, |acc, (&a, &b)| acc + a * b);
            assert!(dot.is_zero());
        }
    }

    #[test]
    fn float_kernel_closed_form_2x1() {
        // Kernel of [u0 u1] is proportional to (u1, -u0).
        let (u0, u1) = (0.3, -1.7);
        let v = kernel_vector(&[vec![u0, u1]], 2).unwrap();
        let max = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        assert!((max - 1.0).abs() < 1e-15);
        assert!((v[0] * u0 + v[1] * u1).abs() < 1e-15);
        assert!((v[0] / v[1] - u1 / -u0).abs() < 1e-12);
    }

    #[test]
    fn kernel_rejects_rank_deficiency() {
        assert!(kernel_vector(&[vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0]], 3).is_none());
        assert!(kernel_vector(&[vec![Fp::ZERO, Fp::ZERO]], 2).is_none());
    }
}
