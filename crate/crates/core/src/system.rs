//! Control-affine systems `X_u = X_0 + Σ u_i X_i` with controls in `[-1, 1]^m`,
//! and piecewise-constant control schedules.

use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polyalg::{Poly, PolyVectorField, Rational};

/// Raw system data as read from a document, before shape validation.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemDraft {
    pub name: String,
    pub dim: usize,
    pub m: usize,
    /// `X_0..X_m`, each a list of components.
    pub fields: Vec<Vec<Poly>>,
    pub basepoint: Option<Vec<Rational>>,
}

/// One shape problem found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// Index `i` of the offending field `X_i`, when the problem is local to one.
    pub field: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.field {
            Some(i) => write!(f, "X{i}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

/// Shape diagnostics; an empty list means the draft is well formed.
pub fn validate(draft: &SystemDraft) -> Vec<Violation> {
    let mut out = Vec::new();
    if draft.dim == 0 {
        out.push(Violation {
            field: None,
            message: "dimension must be positive".into(),
        });
    }
    if draft.fields.len() != draft.m + 1 {
        out.push(Violation {
            field: None,
            message: format!(
                "expected m+1 fields ({}), found {}",
                draft.m + 1,
                draft.fields.len()
            ),
        });
    }
    for (i, comps) in draft.fields.iter().enumerate() {
        if comps.len() != draft.dim {
            out.push(Violation {
                field: Some(i),
                message: format!("expected {} components, found {}", draft.dim, comps.len()),
            });
        }
        for (j, p) in comps.iter().enumerate() {
            if p.dim() != draft.dim {
                out.push(Violation {
                    field: Some(i),
                    message: format!(
                        "component {} has dimension {}, expected {}",
                        j + 1,
                        p.dim(),
                        draft.dim
                    ),
                });
            }
        }
    }
    if let Some(x0) = &draft.basepoint {
        if x0.len() != draft.dim {
            out.push(Violation {
                field: None,
                message: format!("basepoint has {} entries, expected {}", x0.len(), draft.dim),
            });
        }
    }
    out
}

/// `X = {X_0, ..., X_m}` on `R^n` with control set `[-1, 1]^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSystem {
    name: String,
    dim: usize,
    fields: Vec<PolyVectorField>,
    basepoint: Option<Vec<Rational>>,
}

impl ControlSystem {
    pub fn new(
        name: impl Into<String>,
        fields: Vec<PolyVectorField>,
        basepoint: Option<Vec<Rational>>,
    ) -> Result<Self> {
        let fields_raw: Vec<Vec<Poly>> = fields.iter().map(|f| f.components().to_vec()).collect();
        let dim = fields.first().map(PolyVectorField::dim).unwrap_or(0);
        let m = fields.len().saturating_sub(1);
        Self::from_draft(SystemDraft {
            name: name.into(),
            dim,
            m,
            fields: fields_raw,
            basepoint,
        })
    }

    pub fn from_draft(draft: SystemDraft) -> Result<Self> {
        let problems = validate(&draft);
        if !problems.is_empty() {
            let msg: Vec<String> = problems.iter().map(ToString::to_string).collect();
            return Err(Error::Input(msg.join("; ")));
        }
        let fields = draft
            .fields
            .into_iter()
            .map(|c| PolyVectorField::new_unchecked(draft.dim, c))
            .collect();
        Ok(ControlSystem {
            name: draft.name,
            dim: draft.dim,
            fields,
            basepoint: draft.basepoint,
        })
    }

    pub fn to_draft(&self) -> SystemDraft {
        SystemDraft {
            name: self.name.clone(),
            dim: self.dim,
            m: self.m(),
            fields: self.fields.iter().map(|f| f.components().to_vec()).collect(),
            basepoint: self.basepoint.clone(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of controls.
    pub fn m(&self) -> usize {
        self.fields.len() - 1
    }

    pub fn fields(&self) -> &[PolyVectorField] {
        &self.fields
    }

    pub fn field(&self, i: usize) -> &PolyVectorField {
        &self.fields[i]
    }

    pub fn basepoint(&self) -> Option<&[Rational]> {
        self.basepoint.as_deref()
    }

    /// Declared basepoint, or the origin.
    pub fn basepoint_or_origin(&self) -> Vec<Rational> {
        self.basepoint
            .clone()
            .unwrap_or_else(|| vec![Rational::zero(); self.dim])
    }

    /// Adds `extra[i]` to field `X_i`.
    pub fn perturbed(&self, extra: &[PolyVectorField]) -> Result<ControlSystem> {
        if extra.len() != self.fields.len() {
            return Err(Error::dim("perturbation field count", self.fields.len(), extra.len()));
        }
        let fields = self
            .fields
            .iter()
            .zip(extra)
            .map(|(a, b)| a.add(b))
            .collect::<Result<Vec<_>>>()?;
        ControlSystem::new(self.name.clone(), fields, self.basepoint.clone())
    }

    /// Always empty for a constructed system; kept for symmetry with drafts.
    pub fn validate(&self) -> Vec<Violation> {
        validate(&self.to_draft())
    }

    pub fn check_same_shape(&self, other: &ControlSystem) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::dim("system dimension", self.dim, other.dim));
        }
        if self.m() != other.m() {
            return Err(Error::dim("control count", self.m(), other.m()));
        }
        Ok(())
    }
}

fn check_control<T, F: Fn(&T) -> bool>(u: &[T], m: usize, in_range: F) -> Result<()> {
    if u.len() != m {
        return Err(Error::dim("control vector", m, u.len()));
    }
    if let Some(pos) = u.iter().position(|v| !in_range(v)) {
        return Err(Error::input(format!(
            "control component {} outside [-1, 1]",
            pos + 1
        )));
    }
    Ok(())
}

/// `X_u = X_0 + Σ u_i X_i` for a rational control.
pub fn control_vf(sys: &ControlSystem, u: &[Rational]) -> Result<PolyVectorField> {
    check_control(u, sys.m(), |v: &Rational| v.abs() <= Rational::one())?;
    let mut out = sys.field(0).clone();
    for (i, ui) in u.iter().enumerate() {
        if ui.is_zero() {
            continue;
        }
        out = out.add(&sys.field(i + 1).scale(ui))?;
    }
    Ok(out)
}

/// One constant-control piece of a schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub control: Vec<f64>,
    pub duration: f64,
}

/// Piecewise-constant control, stored in execution order: segment 0 runs
/// first.
///
/// The tuple `(t_1, ..., t_p)` attached to `X^{I,t}` is written the other way
/// round (its last entry acts first), so `tuple_order()` reverses this list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Schedule {
    segments: Vec<Segment>,
}

impl Schedule {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        for (j, s) in segments.iter().enumerate() {
            if !(s.duration.is_finite() && s.duration >= 0.0) {
                return Err(Error::input(format!(
                    "segment {} has invalid duration {}",
                    j + 1,
                    s.duration
                )));
            }
            if s.control.iter().any(|u| !(u.abs() <= 1.0)) {
                return Err(Error::input(format!(
                    "segment {} has a control outside [-1, 1]",
                    j + 1
                )));
            }
        }
        Ok(Schedule { segments })
    }

    /// Exact controls and durations, converted to floating point.
    pub fn from_exact(controls: &[Vec<Rational>], durations: &[Rational]) -> Result<Self> {
        if controls.len() != durations.len() {
            return Err(Error::dim("schedule durations", controls.len(), durations.len()));
        }
        Schedule::new(
            controls
                .iter()
                .zip(durations)
                .map(|(u, s)| Segment {
                    control: crate::polyalg::to_f64_vec(u),
                    duration: crate::polyalg::rational_to_f64(s),
                })
                .collect(),
        )
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// `|t|`.
    pub fn total(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Same controls with every duration multiplied by `factor >= 0`.
    pub fn scaled(&self, factor: f64) -> Schedule {
        Schedule {
            segments: self
                .segments
                .iter()
                .map(|g| Segment {
                    control: g.control.clone(),
                    duration: g.duration * factor,
                })
                .collect(),
        }
    }

    pub fn reversed(&self) -> Schedule {
        Schedule {
            segments: self.segments.iter().rev().cloned().collect(),
        }
    }

    pub fn tuple_order(&self) -> Vec<&Segment> {
        self.segments.iter().rev().collect()
    }

    pub fn concat(&self, other: &Schedule) -> Schedule {
        let mut segments = self.segments.clone();
        segments.extend(other.segments.iter().cloned());
        Schedule { segments }
    }

    pub fn check_controls(&self, m: usize) -> Result<()> {
        for s in &self.segments {
            check_control(&s.control, m, |v: &f64| v.abs() <= 1.0)?;
        }
        Ok(())
    }
}

impl fmt::Display for Schedule {
    /// Same literal syntax the parser accepts: `(u1,u2):s;...`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (j, s) in self.segments.iter().enumerate() {
            if j > 0 {
                write!(f, ";")?;
            }
            let u: Vec<String> = s.control.iter().map(|v| format!("{v}")).collect();
            write!(f, "({}):{}", u.join(","), s.duration)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    fn brockett() -> ControlSystem {
        let x1 = Poly::var(3, 0);
        let x2 = Poly::var(3, 1);
        let one = Poly::one(3);
        let zero = Poly::zero(3);
        ControlSystem::new(
            "brockett",
            vec![
                PolyVectorField::zero(3),
                PolyVectorField::new(vec![one.clone(), zero.clone(), -&x2]).unwrap(),
                PolyVectorField::new(vec![zero, one, x1]).unwrap(),
            ],
            None,
        )
        .unwrap()
    }

    #[test]
    fn control_combination() {
        let sys = brockett();
        assert_eq!(control_vf(&sys, &[q(0, 1), q(0, 1)]).unwrap(), *sys.field(0));
        assert_eq!(control_vf(&sys, &[q(1, 1), q(0, 1)]).unwrap(), *sys.field(1));
        assert!(control_vf(&sys, &[q(3, 2), q(0, 1)]).is_err());
        assert!(control_vf(&sys, &[q(1, 2)]).is_err());
    }

    #[test]
    fn drift_only_system() {
        let sys = ControlSystem::new("exp", vec![PolyVectorField::new(vec![Poly::var(1, 0)]).unwrap()], None).unwrap();
        assert_eq!(sys.m(), 0);
        assert_eq!(control_vf(&sys, &[]).unwrap(), *sys.field(0));
    }

    #[test]
    fn control_vf_is_affine() {
        let sys = brockett();
        let u = [q(1, 3), q(-1, 1)];
        let v = [q(-1, 2), q(2, 5)];
        let mid: Vec<Rational> = u.iter().zip(&v).map(|(a, b)| (a + b) / q(2, 1)).collect();
        let lhs = control_vf(&sys, &mid).unwrap();
        let rhs = control_vf(&sys, &u)
            .unwrap()
            .add(&control_vf(&sys, &v).unwrap())
            .unwrap()
            .scale(&q(1, 2));
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn validation_reports_shape_problems() {
        assert!(brockett().validate().is_empty());
        let mut draft = brockett().to_draft();
        draft.fields[1][2] = Poly::zero(2);
        let v = validate(&draft);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, Some(1));

        let mut draft = brockett().to_draft();
        draft.m = 3;
        let v = validate(&draft);
        assert!(v[0].message.contains("expected m+1 fields"));
        assert!(ControlSystem::from_draft(draft).is_err());
    }

    #[test]
    fn schedule_basics() {
        let s = Schedule::new(vec![
            Segment { control: vec![1.0, 0.0], duration: 0.1 },
            Segment { control: vec![0.0, 1.0], duration: 0.2 },
            Segment { control: vec![0.0, -1.0], duration: 0.0 },
        ])
        .unwrap();
        assert!((s.total() - 0.3).abs() < 1e-15);
        assert_eq!(s.reversed().reversed(), s);
        assert_eq!(s.tuple_order()[0].duration, 0.0);
        assert_eq!(s.to_string(), "(1,0):0.1;(0,1):0.2;(0,-1):0");
        assert!(Schedule::new(vec![Segment { control: vec![1.5], duration: 0.1 }]).is_err());
        assert!(Schedule::new(vec![Segment { control: vec![0.5], duration: -0.1 }]).is_err());
    }
}
