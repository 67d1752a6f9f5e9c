//! Arithmetic over the binary extension fields GF(2^p).
//!
//! These fields supply the symbol alphabet of the outer non-binary LDPC
//! code. Elements are stored as raw `u16` bit patterns (polynomial
//! coefficients over GF(2)); addition is XOR, multiplication and inversion
//! go through precomputed log/antilog tables, so every operation is O(1)
//! after construction.

use std::fmt;

/// Largest supported bit width. Tables for p = 16 take 256 KiB; anything
/// beyond that should not use a table-based field.
pub const MAX_BITS: u32 = 16;

/// Conventional primitive polynomials for each supported width, expressed
/// as bitmasks including the degree-p term (e.g. 0x11D = x^8+x^4+x^3+x^2+1).
const DEFAULT_MODULI: [u32; 16] = [
    0b11, 0b111, 0b1011, 0b10011, 0x25, 0x43, 0x89, 0x11D, 0x211, 0x409, 0x805, 0x1053, 0x201B,
    0x4143, 0x8003, 0x1100B,
];

/// The standard primitive modulus used when the caller does not pin one.
pub fn default_modulus(p: u32) -> Option<u32> {
    if (1..=MAX_BITS).contains(&p) {
        Some(DEFAULT_MODULI[(p - 1) as usize])
    } else {
        None
    }
}

/// Field construction failures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FieldError {
    /// `p` outside the supported 1..=16 range.
    UnsupportedWidth(u32),
    /// The modulus bitmask does not have degree exactly `p`.
    WrongDegree { modulus: u32, p: u32 },
    /// The generator element x does not have multiplicative order q-1:
    /// either its power sequence revisits a value early, or it fails to
    /// return to 1 after q-1 steps. Both rule out a primitive modulus.
    NotPrimitive { modulus: u32, order_found: usize, expected: usize },
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldError::UnsupportedWidth(p) => {
                write!(f, "field width p={p} outside supported range 1..={MAX_BITS}")
            }
            FieldError::WrongDegree { modulus, p } => {
                write!(f, "modulus {modulus:#x} does not have degree {p}")
            }
            FieldError::NotPrimitive { modulus, order_found, expected } => write!(
                f,
                "modulus {modulus:#x} is not primitive: generator x has multiplicative \
                 order {order_found}, expected q-1 = {expected}"
            ),
        }
    }
}

impl std::error::Error for FieldError {}

/// Precomputed arithmetic tables for GF(2^p).
///
/// Immutable after construction; share freely across threads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldTable {
    p: u32,
    q: usize,
    modulus: u32,
    /// exp[i] = x^i; period exactly q-1, so exp[q-1] wraps back to 1.
    exp: Vec<u16>,
    /// log[a] = discrete log of a base x; log[0] is unused.
    log: Vec<u16>,
}

/// Builds the GF(2^p) tables for the given primitive modulus.
///
/// Primitivity is validated by walking the powers of x: the walk must visit
/// q-1 distinct nonzero values and return to 1 exactly at step q-1.
pub fn make_field(p: u32, modulus: u32) -> Result<FieldTable, FieldError> {
    if !(1..=MAX_BITS).contains(&p) {
        return Err(FieldError::UnsupportedWidth(p));
    }
    let degree = 32 - modulus.leading_zeros();
    if degree != p + 1 {
        return Err(FieldError::WrongDegree { modulus, p });
    }

    let q = 1usize << p;
    let mut exp = vec![0u16; q];
    let mut log = vec![0u16; q];
    let mut seen = vec![false; q];
    let mut val: u32 = 1;
    for i in 0..q - 1 {
        if seen[val as usize] {
            return Err(FieldError::NotPrimitive { modulus, order_found: i, expected: q - 1 });
        }
        seen[val as usize] = true;
        exp[i] = val as u16;
        log[val as usize] = i as u16;
        // multiply by x and reduce
        val <<= 1;
        if val >> p != 0 {
            val ^= modulus;
        }
    }
    if val != 1 {
        // never returned to 1: x is not a unit or its order exceeds the walk
        return Err(FieldError::NotPrimitive { modulus, order_found: q, expected: q - 1 });
    }
    exp[q - 1] = 1; // x^(q-1) = 1, the period

    Ok(FieldTable { p, q, modulus, exp, log })
}

impl FieldTable {
    /// Field with the conventional primitive modulus for width `p`.
    pub fn with_default_modulus(p: u32) -> Result<FieldTable, FieldError> {
        let modulus = default_modulus(p).ok_or(FieldError::UnsupportedWidth(p))?;
        make_field(p, modulus)
    }

    pub fn bits(&self) -> u32 {
        self.p
    }

    /// Field order q = 2^p.
    pub fn order(&self) -> usize {
        self.q
    }

    pub fn modulus(&self) -> u32 {
        self.modulus
    }

    /// Addition (and subtraction) is bitwise XOR in characteristic 2.
    #[inline]
    pub fn add(&self, a: u16, b: u16) -> u16 {
        a ^ b
    }

    #[inline]
    pub fn mul(&self, a: u16, b: u16) -> u16 {
        if a == 0 || b == 0 {
            return 0;
        }
        let idx = self.log[a as usize] as usize + self.log[b as usize] as usize;
        self.exp[idx % (self.q - 1)]
    }

    /// Multiplicative inverse. Panics on zero, which has no inverse; callers
    /// guard the zero case at a higher level (edge weights are never zero).
    #[inline]
    pub fn inv(&self, a: u16) -> u16 {
        assert!(a != 0, "zero has no multiplicative inverse");
        let l = self.log[a as usize] as usize;
        self.exp[(self.q - 1 - l) % (self.q - 1)]
    }

    /// x^i, reduced mod the field polynomial.
    #[inline]
    pub fn exp(&self, i: usize) -> u16 {
        self.exp[i % (self.q - 1)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gf4_exp_table_cycles_with_period_three() {
        let f = make_field(2, 0b111).unwrap();
        assert_eq!(f.exp, vec![1, 2, 3, 1]);
        assert_eq!(f.order(), 4);
    }

    #[test]
    fn gf4_products_and_inverse() {
        let f = make_field(2, 0b111).unwrap();
        assert_eq!(f.mul(2, 2), 3);
        assert_eq!(f.mul(2, 3), 1);
        assert_eq!(f.inv(2), 3);
    }

    #[test]
    fn gf256_standard_polynomial() {
        let f = make_field(8, 0x11D).unwrap();
        assert_eq!(f.mul(0x02, 0x80), 0x1D);
        assert_eq!(f.order(), 256);
        // spot-check inverse against mul
        for a in 1..256u16 {
            assert_eq!(f.mul(a, f.inv(a)), 1);
        }
    }

    #[test]
    fn reducible_modulus_is_rejected() {
        // x^2 + x = x(x+1)
        let err = make_field(2, 0b110).unwrap_err();
        match err {
            FieldError::NotPrimitive { order_found, expected, .. } => {
                assert!(order_found < expected);
            }
            other => panic!("expected NotPrimitive, got {other:?}"),
        }
    }

    #[test]
    fn wrong_degree_is_rejected() {
        assert!(matches!(make_field(3, 0b111), Err(FieldError::WrongDegree { .. })));
        assert!(matches!(make_field(0, 0b11), Err(FieldError::UnsupportedWidth(0))));
        assert!(matches!(make_field(17, 0x3FFFF), Err(FieldError::UnsupportedWidth(17))));
    }

    #[test]
    fn all_default_moduli_are_primitive() {
        for p in 1..=MAX_BITS {
            FieldTable::with_default_modulus(p)
                .unwrap_or_else(|e| panic!("default modulus for p={p} failed: {e}"));
        }
    }

    // Exhaustive field axioms for the small fields; q=16 is the desk-profile
    // alphabet, q=4 the toy-test alphabet.
    fn check_axioms_exhaustive(f: &FieldTable) {
        let q = f.order() as u16;
        for a in 0..q {
            assert_eq!(f.add(a, a), 0, "characteristic 2");
            assert_eq!(f.mul(a, 1), a, "multiplicative identity");
            assert_eq!(f.mul(a, 0), 0);
            for b in 0..q {
                assert_eq!(f.add(a, b), f.add(b, a));
                assert_eq!(f.mul(a, b), f.mul(b, a));
                assert_eq!(f.mul(a, b) == 0, a == 0 || b == 0, "no zero divisors");
                for c in 0..q {
                    assert_eq!(f.mul(a, f.mul(b, c)), f.mul(f.mul(a, b), c), "associativity");
                    assert_eq!(
                        f.mul(a, f.add(b, c)),
                        f.add(f.mul(a, b), f.mul(a, c)),
                        "distributivity"
                    );
                }
            }
        }
    }

    #[test]
    fn field_axioms_gf4_and_gf16() {
        check_axioms_exhaustive(&FieldTable::with_default_modulus(2).unwrap());
        check_axioms_exhaustive(&FieldTable::with_default_modulus(4).unwrap());
    }

    #[test]
    fn gf256_pairwise_axioms_and_sampled_triples() {
        let f = FieldTable::with_default_modulus(8).unwrap();
        for a in 0..256u16 {
            for b in 0..256u16 {
                assert_eq!(f.mul(a, b), f.mul(b, a));
                assert_eq!(f.mul(a, b) == 0, a == 0 || b == 0);
            }
        }
        // deterministic stride through the triple space instead of all 2^24
        for a in (0..256u16).step_by(17) {
            for b in (0..256u16).step_by(13) {
                for c in (0..256u16).step_by(11) {
                    assert_eq!(f.mul(a, f.mul(b, c)), f.mul(f.mul(a, b), c));
                    assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
                }
            }
        }
    }

    #[test]
    fn exp_period_is_exactly_q_minus_one() {
        for p in [2u32, 4, 8] {
            let f = FieldTable::with_default_modulus(p).unwrap();
            let q = f.order();
            assert_eq!(f.exp(q - 1), 1);
            for i in 1..q - 1 {
                assert_ne!(f.exp(i), 1, "period divides {i} for p={p}");
            }
        }
    }
}
