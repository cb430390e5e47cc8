//! Plant physics for a servo-hydraulic actuator driving a nonlinear specimen.
//!
//! The plant is written in controllable canonical form: the fourth time
//! derivative of the actuator displacement is a state-dependent drift plus a
//! scaled command,
//!
//! ```text
//! x⁽⁴⁾ = C1·x + C2·x⁽¹⁾ + C3·x⁽²⁾ + C4·x⁽³⁾ + C5·F + Cn + b·u
//! ```
//!
//! where `F` is the specimen force and the coefficients depend on the
//! specimen's specific restoring term `h(x, ẋ)` and its partial derivatives.
//! Two specimen laws are supported: an arctangent spring (the "actual"
//! plant) and an algebraic saturation spring (the nonlinear nominal model).

use nalgebra::Vector4;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: &'static str },
}

/// Physical constants of the specimen (mass-spring-damper with a nonlinear
/// spring term).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecimenParams {
    /// Mass (kg).
    pub m: f64,
    /// Damping (N·s/m).
    pub c: f64,
    /// Linear stiffness (N/m).
    pub k: f64,
    /// Nonlinear stiffness coefficient (N).
    pub k_n: f64,
    /// Nonlinearity sharpness (1/m).
    pub lambda: f64,
}

impl SpecimenParams {
    /// Specimen used as the true plant.
    pub const ACTUAL: SpecimenParams = SpecimenParams {
        m: 3.8,
        c: 10.0,
        k: 1500.0,
        k_n: 800.0,
        lambda: 250.0,
    };

    /// Specimen assumed by the nonlinear nominal model.
    pub const NOMINAL: SpecimenParams = SpecimenParams {
        m: 3.8,
        c: 10.0,
        k: 1500.0,
        k_n: 1100.0,
        lambda: 250.0,
    };

    pub fn validate(&self) -> Result<(), ModelError> {
        let all = [self.m, self.c, self.k, self.k_n, self.lambda];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite("specimen parameters"));
        }
        if self.m <= 0.0 {
            return Err(ModelError::InvalidParameter { name: "m", reason: "must be > 0" });
        }
        if self.c < 0.0 {
            return Err(ModelError::InvalidParameter { name: "c", reason: "must be >= 0" });
        }
        if self.k < 0.0 {
            return Err(ModelError::InvalidParameter { name: "k", reason: "must be >= 0" });
        }
        if self.lambda <= 0.0 {
            return Err(ModelError::InvalidParameter { name: "lambda", reason: "must be > 0" });
        }
        Ok(())
    }
}

/// Identified servo-valve / actuator constants plus the command gain `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferSystemParams {
    /// Servo-valve pole (1/s).
    pub beta1: f64,
    /// Combined valve/flow gain a₁β₁.
    pub a1beta1: f64,
    /// Pressure coefficient a₂.
    pub a2: f64,
    /// Actuator pole (1/s).
    pub a3: f64,
    /// Command gain (m/s⁴ per m of command).
    pub b: f64,
}

impl TransferSystemParams {
    pub const BETA1: f64 = 267.0;
    pub const A1BETA1: f64 = 2.412e9;
    pub const A2: f64 = 7.881e5;
    pub const A3: f64 = 16.118;

    /// Identified transfer system with the default command gain
    /// `b = a₁β₁ / m` for the given specimen mass.
    pub fn identified(mass: f64) -> Self {
        TransferSystemParams {
            beta1: Self::BETA1,
            a1beta1: Self::A1BETA1,
            a2: Self::A2,
            a3: Self::A3,
            b: Self::A1BETA1 / mass,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let all = [self.beta1, self.a1beta1, self.a2, self.a3, self.b];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite("transfer system parameters"));
        }
        let positive = [
            ("beta1", self.beta1),
            ("a1beta1", self.a1beta1),
            ("a3", self.a3),
            ("b", self.b),
        ];
        for (name, v) in positive {
            if v <= 0.0 {
                return Err(ModelError::InvalidParameter { name, reason: "must be > 0" });
            }
        }
        Ok(())
    }
}

impl Default for TransferSystemParams {
    fn default() -> Self {
        Self::identified(SpecimenParams::ACTUAL.m)
    }
}

/// Actuator displacement and its first three time derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantState {
    /// Displacement (m).
    pub x: f64,
    /// Velocity (m/s).
    pub x1: f64,
    /// Acceleration (m/s²).
    pub x2: f64,
    /// Jerk (m/s³).
    pub x3: f64,
}

impl PlantState {
    pub const ZERO: PlantState = PlantState { x: 0.0, x1: 0.0, x2: 0.0, x3: 0.0 };

    pub fn new(x: f64, x1: f64, x2: f64, x3: f64) -> Self {
        PlantState { x, x1, x2, x3 }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.x1.is_finite() && self.x2.is_finite() && self.x3.is_finite()
    }

    pub fn to_vector(self) -> Vector4<f64> {
        Vector4::new(self.x, self.x1, self.x2, self.x3)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        PlantState { x: v[0], x1: v[1], x2: v[2], x3: v[3] }
    }
}

impl From<Vector4<f64>> for PlantState {
    fn from(v: Vector4<f64>) -> Self {
        PlantState::from_vector(&v)
    }
}

impl From<PlantState> for Vector4<f64> {
    fn from(s: PlantState) -> Self {
        s.to_vector()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpecimenKind {
    /// `k_n·arctan(λx)` spring: the true plant.
    Arctan,
    /// `k_n·λx/√(1+(λx)²)` spring: the nonlinear nominal model.
    AlgebraicSaturation,
}

/// Partial derivatives of `h(x, v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HPartials {
    pub dx: f64,
    pub dv: f64,
    pub dxx: f64,
    pub dvv: f64,
    pub dxv: f64,
}

/// Nonlinear spring shape g(x) and its first two derivatives.
#[inline]
fn spring_shape(kind: SpecimenKind, lambda: f64, x: f64) -> (f64, f64, f64) {
    let z = lambda * x;
    let q = 1.0 + z * z;
    match kind {
        SpecimenKind::Arctan => {
            let g = z.atan();
            let g1 = lambda / q;
            let g2 = -2.0 * lambda * lambda * lambda * x / (q * q);
            (g, g1, g2)
        }
        SpecimenKind::AlgebraicSaturation => {
            let s = q.sqrt();
            let g = z / s;
            let g1 = lambda / (q * s);
            let g2 = -3.0 * lambda * lambda * lambda * x / (q * q * s);
            (g, g1, g2)
        }
    }
}

#[inline]
fn check_inputs(vals: &[f64]) -> Result<(), ModelError> {
    if vals.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(ModelError::NonFinite("input"))
    }
}

/// Specific restoring term `h(x, v)` (m/s²).
pub fn eval_h(kind: SpecimenKind, p: &SpecimenParams, x: f64, v: f64) -> Result<f64, ModelError> {
    check_inputs(&[x, v])?;
    Ok(h_unchecked(kind, p, x, v))
}

#[inline]
fn h_unchecked(kind: SpecimenKind, p: &SpecimenParams, x: f64, v: f64) -> f64 {
    let (g, _, _) = spring_shape(kind, p.lambda, x);
    -(p.c / p.m) * v - (p.k / p.m) * x - (p.k_n / p.m) * g
}

#[inline]
fn partials_unchecked(kind: SpecimenKind, p: &SpecimenParams, x: f64) -> HPartials {
    let (_, g1, g2) = spring_shape(kind, p.lambda, x);
    HPartials {
        dx: -(p.k / p.m) - (p.k_n / p.m) * g1,
        dv: -(p.c / p.m),
        dxx: -(p.k_n / p.m) * g2,
        // h is affine in v.
        dvv: 0.0,
        dxv: 0.0,
    }
}

/// Closed-form partial derivatives of `h` at `(x, v)`.
pub fn eval_h_partials(
    kind: SpecimenKind,
    p: &SpecimenParams,
    x: f64,
    v: f64,
) -> Result<HPartials, ModelError> {
    check_inputs(&[x, v])?;
    Ok(partials_unchecked(kind, p, x))
}

/// Specimen force `F = m·a − m·h(x, v)` (N).
pub fn specimen_force(
    kind: SpecimenKind,
    p: &SpecimenParams,
    x: f64,
    v: f64,
    a: f64,
) -> Result<f64, ModelError> {
    check_inputs(&[x, v, a])?;
    Ok(force_unchecked(kind, p, x, v, a))
}

#[inline]
fn force_unchecked(kind: SpecimenKind, p: &SpecimenParams, x: f64, v: f64, a: f64) -> f64 {
    p.m * a - p.m * h_unchecked(kind, p, x, v)
}

/// Drift coefficients of the canonical form, evaluated at a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanonicalCoefficients {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub cn: f64,
    /// Specimen force at the state.
    pub force: f64,
}

impl CanonicalCoefficients {
    fn check(&self) -> Result<(), ModelError> {
        let named = [
            ("C1", self.c1),
            ("C2", self.c2),
            ("C3", self.c3),
            ("C4", self.c4),
            ("C5", self.c5),
            ("Cn", self.cn),
            ("F", self.force),
        ];
        for (name, v) in named {
            if !v.is_finite() {
                return Err(ModelError::NonFinite(name));
            }
        }
        Ok(())
    }

    /// Drift `f(x, F)` (without the command term).
    pub fn drift(&self, s: &PlantState) -> f64 {
        self.c1 * s.x + self.c2 * s.x1 + self.c3 * s.x2 + self.c4 * s.x3 + self.c5 * self.force + self.cn
    }
}

/// Coefficients C1..C5, Cn and the specimen force at state `s`.
///
/// The valve gain a₁β₀ is taken as the identified a₁β₁. The `β₁·a₂/m` term
/// of C2 carries a negative sign, which is what differentiating the
/// valve/actuator equations gives and what makes the plant stable.
pub fn canonical_coefficients(
    kind: SpecimenKind,
    sp: &SpecimenParams,
    tp: &TransferSystemParams,
    s: &PlantState,
) -> Result<CanonicalCoefficients, ModelError> {
    if !s.is_finite() {
        return Err(ModelError::NonFinite("state"));
    }
    let coeffs = coefficients_unchecked(kind, sp, tp, s);
    coeffs.check()?;
    Ok(coeffs)
}

#[inline]
fn coefficients_unchecked(
    kind: SpecimenKind,
    sp: &SpecimenParams,
    tp: &TransferSystemParams,
    s: &PlantState,
) -> CanonicalCoefficients {
    let m = sp.m;
    let d = partials_unchecked(kind, sp, s.x);
    let valve_actuator = tp.beta1 + tp.a3;
    let cn = d.dxx * s.x1 * s.x1
        + d.dvv * s.x2 * s.x2
        + 2.0 * d.dxv * s.x1 * s.x2
        + d.dx * s.x2
        + d.dv * s.x3;
    CanonicalCoefficients {
        c1: -tp.a1beta1 / m,
        c2: -tp.beta1 * tp.a2 / m + valve_actuator * d.dx,
        c3: valve_actuator * d.dv - tp.a2 / m,
        c4: -valve_actuator,
        c5: -tp.beta1 * tp.a3 / m,
        cn,
        force: force_unchecked(kind, sp, s.x, s.x1, s.x2),
    }
}

/// Fourth derivative of displacement `x⁽⁴⁾` (m/s⁴) under command `u` (m).
pub fn canonical_derivative(
    kind: SpecimenKind,
    sp: &SpecimenParams,
    tp: &TransferSystemParams,
    s: &PlantState,
    u: f64,
) -> Result<f64, ModelError> {
    if !u.is_finite() {
        return Err(ModelError::NonFinite("command"));
    }
    let coeffs = canonical_coefficients(kind, sp, tp, s)?;
    let out = coeffs.drift(s) + tp.b * u;
    if out.is_finite() {
        Ok(out)
    } else {
        Err(ModelError::NonFinite("x⁽⁴⁾"))
    }
}

/// State derivative `(x⁽¹⁾, x⁽²⁾, x⁽³⁾, x⁽⁴⁾)` without finiteness checks.
///
/// Non-finite inputs propagate as NaN; callers integrate with a finiteness
/// check per stage.
#[inline]
pub fn state_derivative(
    kind: SpecimenKind,
    sp: &SpecimenParams,
    tp: &TransferSystemParams,
    s: &Vector4<f64>,
    u: f64,
) -> Vector4<f64> {
    let st = PlantState::from_vector(s);
    let coeffs = coefficients_unchecked(kind, sp, tp, &st);
    Vector4::new(st.x1, st.x2, st.x3, coeffs.drift(&st) + tp.b * u)
}
