use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};

pub type Rational = BigRational;

pub fn factorial(n: u32) -> BigInt {
    (2..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

pub fn rational_to_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// Exact binary value of a finite float.
pub fn rational_from_f64(x: f64) -> Option<Rational> {
    BigRational::from_float(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factorials() {
        assert_eq!(factorial(0), BigInt::one());
        assert_eq!(factorial(5), BigInt::from(120));
    }

    #[test]
    fn float_round_trip_is_exact() {
        let q = rational_from_f64(0.375).unwrap();
        assert_eq!(q, Rational::new(3.into(), 8.into()));
        assert_eq!(rational_to_f64(&q), 0.375);
        assert!(rational_from_f64(f64::NAN).is_none());
    }
}
