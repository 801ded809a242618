//! Shared generators for the integration tests. Perturbations here are built
//! as products of (x_i - x0_i) factors, independently of the library's own
//! generator and its polynomial translation.

#![allow(dead_code)]

use chronoreach::polyalg::{MultiIndex, Poly, PolyVectorField, Rational};
use chronoreach::system::ControlSystem;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn q(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

pub fn small_rational<R: Rng>(rng: &mut R, den: i64) -> Rational {
    q(rng.gen_range(-den..=den), den)
}

pub fn random_index<R: Rng>(rng: &mut R, dim: usize, degree: u32) -> Vec<u32> {
    let mut e = vec![0u32; dim];
    for _ in 0..degree {
        e[rng.gen_range(0..dim)] += 1;
    }
    e
}

/// Sum of `terms` monomials of degree at most `max_deg`.
pub fn random_poly<R: Rng>(rng: &mut R, dim: usize, max_deg: u32, terms: usize) -> Poly {
    let mut p = Poly::zero(dim);
    for _ in 0..terms {
        let deg = rng.gen_range(0..=max_deg);
        let m = Poly::monomial(small_rational(rng, 4), MultiIndex::new(random_index(rng, dim, deg)));
        p = &p + &m;
    }
    p
}

pub fn random_field<R: Rng>(rng: &mut R, dim: usize, max_deg: u32) -> PolyVectorField {
    let comps = (0..dim).map(|_| random_poly(rng, dim, max_deg, 3)).collect();
    PolyVectorField::new(comps).unwrap()
}

pub fn random_system<R: Rng>(rng: &mut R, dim: usize, m: usize, max_deg: u32) -> ControlSystem {
    let fields = (0..=m).map(|_| random_field(rng, dim, max_deg)).collect();
    ControlSystem::new("random", fields, None).unwrap()
}

pub fn random_point<R: Rng>(rng: &mut R, dim: usize) -> Vec<Rational> {
    (0..dim).map(|_| small_rational(rng, 2)).collect()
}

/// `c * prod_i (x_i - x0_i)^{e_i}`, expanded by repeated multiplication.
pub fn shifted_monomial(c: Rational, e: &[u32], x0: &[Rational]) -> Poly {
    let dim = x0.len();
    let mut p = Poly::constant(dim, c);
    for (i, &k) in e.iter().enumerate() {
        let factor = &Poly::var(dim, i) - &Poly::constant(dim, x0[i].clone());
        for _ in 0..k {
            p = &p * &factor;
        }
    }
    p
}

/// Field whose components only contain monomials in `x - x0` of degree in
/// `[lo, hi]`.
pub fn high_order_field<R: Rng>(rng: &mut R, x0: &[Rational], lo: u32, hi: u32) -> PolyVectorField {
    let dim = x0.len();
    let comps = (0..dim)
        .map(|_| {
            let mut p = Poly::zero(dim);
            for _ in 0..2 {
                let deg = rng.gen_range(lo..=hi);
                let c = small_rational(rng, 4);
                p = &p + &shifted_monomial(c, &random_index(rng, dim, deg), x0);
            }
            p
        })
        .collect();
    PolyVectorField::new(comps).unwrap()
}

pub fn random_controls<R: Rng>(rng: &mut R, m: usize, p: usize) -> Vec<Vec<Rational>> {
    (0..p).map(|_| (0..m).map(|_| small_rational(rng, 4)).collect()).collect()
}

pub fn corpus(name: &str) -> String {
    format!("{}/../../corpus/{name}", env!("CARGO_MANIFEST_DIR"))
}

pub fn load(name: &str) -> ControlSystem {
    chronoreach::sysparse::parse_system(&std::fs::read_to_string(corpus(name)).unwrap()).unwrap()
}
