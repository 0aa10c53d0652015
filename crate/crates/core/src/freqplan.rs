//! PLL frequency and phase bookkeeping for the retro-directive chain.
//!
//! The mixer/divider plan is modeled as pure arithmetic at its locked fixed
//! point: the loop is assumed to acquire instantly, so only the frequency
//! conversion identities and the phase-conjugation relation remain. Loop
//! filter and VCO transients are out of scope.

use std::f64::consts::PI;

use thiserror::Error;

/// Which end of the link owns the PLL chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Bs,
    Ue,
}

/// A mixer/divider plan. Reference and LO phases are taken as zero, which
/// is what reduces the lock condition to exact phase conjugation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PllPlan {
    /// Local oscillator frequency in Hz.
    pub f_lo: f64,
    /// Reference frequency in Hz.
    pub f_ref: f64,
    /// Feedback divider.
    pub d1: u32,
    /// Reference divider.
    pub d2: u32,
    pub side: Side,
}

/// Errors for plans whose arithmetic leaves the feasible region.
#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("infeasible plan: {context} yields {value} Hz (must be positive)")]
    Infeasible { context: &'static str, value: f64 },
    #[error("invalid plan: {0}")]
    Invalid(&'static str),
}

impl PllPlan {
    pub fn new(f_lo: f64, f_ref: f64, d1: u32, d2: u32, side: Side) -> Result<Self, PlanError> {
        if !(f_lo > 0.0) || !(f_ref > 0.0) {
            return Err(PlanError::Invalid("f_lo and f_ref must be positive"));
        }
        if d1 == 0 || d2 == 0 {
            return Err(PlanError::Invalid("dividers must be at least 1"));
        }
        Ok(PllPlan { f_lo, f_ref, d1, d2, side })
    }

    /// The plan used in the worked frequency example: a 28 GHz LO with a
    /// 1 GHz reference, dividers 4 and 1.
    pub fn reference_example(side: Side) -> Self {
        PllPlan { f_lo: 28e9, f_ref: 1e9, d1: 4, d2: 1, side }
    }

    /// Derive a feasible plan for a carrier pair, following the worked
    /// example's shape: the LO sits 3 GHz below the received carrier and
    /// the divided-down second IF becomes the reference.
    pub fn for_carriers(f1: f64, f2: f64, side: Side) -> Result<Self, PlanError> {
        if !(f1 > 0.0) || !(f2 > 0.0) {
            return Err(PlanError::Invalid("carriers must be positive"));
        }
        let received = match side {
            Side::Bs => f2,
            Side::Ue => f1,
        };
        let f_lo = if received > 6e9 { received - 3e9 } else { received / 2.0 };
        let if2 = f1 + f2 - 2.0 * f_lo;
        if if2 <= 0.0 {
            return Err(PlanError::Infeasible { context: "second IF", value: if2 });
        }
        let d1 = 4;
        let d2 = 1;
        PllPlan::new(f_lo, if2 / d1 as f64, d1, d2, side)
    }
}

/// First intermediate frequency after the receive mixer: `f_in - f_lo`.
pub fn if1_frequency(plan: &PllPlan, f_in: f64) -> Result<f64, PlanError> {
    let f = f_in - plan.f_lo;
    if f <= 0.0 {
        return Err(PlanError::Infeasible { context: "first IF", value: f });
    }
    Ok(f)
}

/// Second intermediate frequency after remixing with the VCO output:
/// `f1 + f2 - 2 f_lo`.
pub fn if2_frequency(plan: &PllPlan, f1: f64, f2: f64) -> Result<f64, PlanError> {
    let f = f1 + f2 - 2.0 * plan.f_lo;
    if f <= 0.0 {
        return Err(PlanError::Infeasible { context: "second IF", value: f });
    }
    Ok(f)
}

/// Downlink carrier that satisfies the lock condition for a given uplink
/// carrier: `f1 = (d1/d2) f_ref + 2 f_lo - f2`.
pub fn solve_downlink_frequency(plan: &PllPlan, f2: f64) -> Result<f64, PlanError> {
    let f1 = (plan.d1 as f64 * plan.f_ref) / plan.d2 as f64 + 2.0 * plan.f_lo - f2;
    if f1 <= 0.0 {
        return Err(PlanError::Infeasible { context: "downlink carrier", value: f1 });
    }
    Ok(f1)
}

/// Wrap a phase into the canonical interval (-pi, pi].
pub fn wrap_phase(phi: f64) -> f64 {
    let tau = 2.0 * PI;
    let mut p = phi % tau;
    if p <= -PI {
        p += tau;
    } else if p > PI {
        p -= tau;
    }
    p
}

/// Locked-loop output phase for a given input phase: `-phi`, wrapped.
pub fn conjugate_phase(phi_in: f64) -> f64 {
    wrap_phase(-phi_in)
}
