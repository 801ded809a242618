use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;
use serde::Serialize;

use super::{MultiIndex, Poly, PolyVectorField, Rational};
use crate::error::{Error, Result};
use crate::system::ControlSystem;

/// Derivatives `D^r V^i(x0)` for `|r| <= order`.
///
/// Only entries that can be nonzero are stored; [`TaylorCoeffs::get`] returns
/// zero for everything else within the order.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorCoeffs {
    dim: usize,
    order: u32,
    entries: BTreeMap<(usize, MultiIndex), Rational>,
}

impl TaylorCoeffs {
    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `None` when `|r|` exceeds the computed order.
    pub fn get(&self, component: usize, r: &MultiIndex) -> Option<Rational> {
        if r.order() > self.order || component >= self.dim || r.len() != self.dim {
            return None;
        }
        Some(
            self.entries
                .get(&(component, r.clone()))
                .cloned()
                .unwrap_or_else(Rational::zero),
        )
    }

    /// Nonzero entries keyed by `(component, r)`.
    pub fn nonzero(&self) -> impl Iterator<Item = (&(usize, MultiIndex), &Rational)> {
        self.entries.iter()
    }
}

/// Derivatives of `p` at `x0` of every order up to `k` that are not
/// identically zero, computed by exact differentiation then evaluation.
fn poly_derivatives_at(p: &Poly, x0: &[Rational], k: u32) -> Result<BTreeMap<MultiIndex, Rational>> {
    let mut candidates = BTreeSet::new();
    for (e, _) in p.terms() {
        candidates.extend(e.sub_indices(k));
    }
    let mut out = BTreeMap::new();
    for r in candidates {
        let v = p.dpow(&r)?.eval_exact(x0)?;
        if !v.is_zero() {
            out.insert(r, v);
        }
    }
    Ok(out)
}

pub fn taylor_coeffs(v: &PolyVectorField, x0: &[Rational], k: u32) -> Result<TaylorCoeffs> {
    if x0.len() != v.dim() {
        return Err(Error::dim("taylor_coeffs basepoint", v.dim(), x0.len()));
    }
    let mut entries = BTreeMap::new();
    for (i, comp) in v.components().iter().enumerate() {
        for (r, val) in poly_derivatives_at(comp, x0, k)? {
            entries.insert((i, r), val);
        }
    }
    Ok(TaylorCoeffs {
        dim: v.dim(),
        order: k,
        entries,
    })
}

/// First derivative (lowest order) at which two systems disagree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContactWitness {
    /// Field index `i` in `X_0..X_m`.
    pub field: usize,
    /// Zero-based component of the field.
    pub component: usize,
    pub index: Vec<u32>,
    pub x_value: String,
    pub y_value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContactReport {
    pub order: u32,
    pub holds: bool,
    pub witness: Option<ContactWitness>,
}

/// Checks `D^r X_i(x0) = D^r Y_i(x0)` for all `|r| <= k` and all fields.
pub fn kth_contact(x: &ControlSystem, y: &ControlSystem, x0: &[Rational], k: u32) -> Result<ContactReport> {
    if x.dim() != y.dim() {
        return Err(Error::dim("kth_contact system dimension", x.dim(), y.dim()));
    }
    if x.m() != y.m() {
        return Err(Error::dim("kth_contact control count", x.m(), y.m()));
    }
    if x0.len() != x.dim() {
        return Err(Error::dim("kth_contact basepoint", x.dim(), x0.len()));
    }
    // Linearity: compare via the difference of the two fields.
    let mut best: Option<(u32, usize, usize, MultiIndex)> = None;
    for (i, (fx, fy)) in x.fields().iter().zip(y.fields()).enumerate() {
        let diff = fx.sub(fy)?;
        for (j, comp) in diff.components().iter().enumerate() {
            if let Some((r, _)) = poly_derivatives_at(comp, x0, k)?.into_iter().next() {
                let key = (r.order(), i, j, r);
                if best.as_ref().map_or(true, |b| key < *b) {
                    best = Some(key);
                }
            }
        }
    }
    let witness = match best {
        None => None,
        Some((_, i, j, r)) => {
            let xv = x.field(i).component(j).dpow(&r)?.eval_exact(x0)?;
            let yv = y.field(i).component(j).dpow(&r)?.eval_exact(x0)?;
            Some(ContactWitness {
                field: i,
                component: j,
                index: r.entries().to_vec(),
                x_value: xv.to_string(),
                y_value: yv.to_string(),
            })
        }
    };
    Ok(ContactReport {
        order: k,
        holds: witness.is_none(),
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64) -> Rational {
        Rational::from_integer(n.into())
    }

    #[test]
    fn taylor_of_square() {
        let x1 = Poly::var(1, 0);
        let v = PolyVectorField::new(vec![&x1 * &x1]).unwrap();
        let tc = taylor_coeffs(&v, &[q(0)], 2).unwrap();
        assert_eq!(tc.get(0, &MultiIndex::new(vec![2])), Some(q(2)));
        assert_eq!(tc.get(0, &MultiIndex::new(vec![1])), Some(q(0)));
        assert_eq!(tc.get(0, &MultiIndex::new(vec![0])), Some(q(0)));
        assert_eq!(tc.get(0, &MultiIndex::new(vec![3])), None);
    }

    #[test]
    fn taylor_of_zero_field() {
        let tc = taylor_coeffs(&PolyVectorField::zero(2), &[q(1), q(2)], 3).unwrap();
        assert_eq!(tc.nonzero().count(), 0);
        assert!(taylor_coeffs(&PolyVectorField::zero(2), &[q(1)], 3).is_err());
    }

    #[test]
    fn taylor_is_shift_invariant() {
        let x1 = Poly::var(2, 0);
        let x2 = Poly::var(2, 1);
        let v = PolyVectorField::new(vec![&(&x1 * &x1) * &x2, &x2 - &x1.pow(3)]).unwrap();
        let x0 = [Rational::new(1.into(), 2.into()), q(-3)];
        let at_x0 = taylor_coeffs(&v, &x0, 4).unwrap();
        let at_origin = taylor_coeffs(&v.translate(&x0).unwrap(), &[q(0), q(0)], 4).unwrap();
        assert_eq!(at_x0.entries, at_origin.entries);
    }
}
