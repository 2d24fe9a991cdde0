//! The four measures of dependence between the row and column σ-fields of a
//! [`JointPmf`]:
//!
//! * `ψ = sup |P(A∩B) − P(A)P(B)| / (P(A)P(B))`
//! * `λ = sup |P(A∩B) − P(A)P(B)| / sqrt(P(A)P(B))`
//! * `τ = sup |Corr(I_A, I_B)|`
//! * `ρ = sup |Corr(f, g)|` over functions of the row and column atoms.
//!
//! Suprema over events use `0/0 := 0`.

mod events;
mod heuristic;
mod spectral;

use serde::{Deserialize, Serialize};

pub use events::{
    event_numerator, event_statistic, exact_event_measures, EventKind, EventOptimum, ExactCaps,
    Table2x2, DEFAULT_EXACT_CAP,
};
pub use heuristic::{heuristic_event_measure, HeuristicConfig};
pub use spectral::{
    correlation, rho, FunctionPair, RhoResult, RhoSpectral, DEFAULT_RHO_TOL, MAX_SWEEPS,
};

use crate::error::{Error, Result};
use crate::joint_pmf::{EventPair, JointPmf};

/// Requested evaluation mode for the event measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    Heuristic,
    #[default]
    Auto,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Mode::Exact),
            "heuristic" => Ok(Mode::Heuristic),
            "auto" => Ok(Mode::Auto),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

/// How a reported value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeUsed {
    /// The true supremum.
    Exact,
    /// A lower bound from the alternating threshold ascent.
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventMeasure {
    pub value: f64,
    pub witness: EventPair,
    pub mode_used: ModeUsed,
}

/// Evaluation settings shared by [`event_measure`] and [`full_report`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeasureOptions {
    pub mode: Mode,
    pub caps: ExactCaps,
    pub heuristic: HeuristicConfig,
}

impl MeasureOptions {
    pub fn new(mode: Mode) -> Self {
        MeasureOptions {
            mode,
            ..Default::default()
        }
    }

    pub fn exact() -> Self {
        Self::new(Mode::Exact)
    }

    fn use_exact(&self, m: &JointPmf) -> Result<bool> {
        match self.mode {
            Mode::Exact => Ok(true),
            Mode::Heuristic => Ok(false),
            Mode::Auto => {
                let marg = m.marginals();
                let k = marg.row.iter().filter(|&&v| v > 0.0).count();
                let l = marg.col.iter().filter(|&&v| v > 0.0).count();
                Ok(k <= self.caps.rows && l <= self.caps.cols)
            }
        }
    }
}

/// Supremum of one event measure.
pub fn event_measure(m: &JointPmf, kind: EventKind, opts: &MeasureOptions) -> Result<EventMeasure> {
    if opts.use_exact(m)? {
        let all = exact_event_measures(m, opts.caps)?;
        let EventOptimum { value, witness } = all[kind_index(kind)].clone();
        Ok(EventMeasure {
            value,
            witness,
            mode_used: ModeUsed::Exact,
        })
    } else {
        let EventOptimum { value, witness } = heuristic_event_measure(m, kind, &opts.heuristic);
        Ok(EventMeasure {
            value,
            witness,
            mode_used: ModeUsed::Heuristic,
        })
    }
}

fn kind_index(kind: EventKind) -> usize {
    EventKind::ALL.iter().position(|&k| k == kind).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeFlags {
    pub psi: ModeUsed,
    pub lambda: ModeUsed,
    pub tau: ModeUsed,
    pub rho: ModeUsed,
}

/// Values of ψ, λ, τ and ρ with their witnesses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceReport {
    pub psi: f64,
    pub lambda: f64,
    pub tau: f64,
    pub rho: f64,
    pub psi_witness: EventPair,
    pub lambda_witness: EventPair,
    pub tau_witness: EventPair,
    pub rho_witness: FunctionPair,
    pub rho_spectral: RhoSpectral,
    pub mode_flags: ModeFlags,
}

impl DependenceReport {
    pub fn all_exact(&self) -> bool {
        let f = self.mode_flags;
        [f.psi, f.lambda, f.tau, f.rho].iter().all(|&m| m == ModeUsed::Exact)
    }

    /// Checks the chain `λ ≤ τ ≤ ρ ≤ min(1, ψ)`, `τ ≤ 2λ`, witness fidelity
    /// and the finite bound on ψ. Returns a description of the first
    /// violation.
    pub fn verify(&self, m: &JointPmf, rho_tol: f64) -> std::result::Result<(), String> {
        const CHAIN_TOL: f64 = 1e-9;
        for (name, v) in [
            ("psi", self.psi),
            ("lambda", self.lambda),
            ("tau", self.tau),
            ("rho", self.rho),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(format!("{name} = {v} is not a finite nonnegative value"));
            }
        }
        for (name, kind, v, w) in [
            ("psi", EventKind::Psi, self.psi, &self.psi_witness),
            ("lambda", EventKind::Lambda, self.lambda, &self.lambda_witness),
            ("tau", EventKind::Tau, self.tau, &self.tau_witness),
        ] {
            let again = event_statistic(m, w, kind);
            if (again - v).abs() > 1e-12 {
                return Err(format!("{name} witness gives {again}, reported {v}"));
            }
        }
        if !self.rho_witness.is_empty() {
            let c = self.rho_witness.correlation(m);
            if (c - self.rho).abs() > 10.0 * rho_tol {
                return Err(format!("rho witness correlation {c}, reported {}", self.rho));
            }
        }
        if let Some(min) = m.min_positive_entry() {
            if self.psi > 1.0 / min + CHAIN_TOL {
                return Err(format!("psi = {} exceeds 1/min entry = {}", self.psi, 1.0 / min));
            }
        }
        if self.all_exact() {
            let checks = [
                (self.lambda, self.tau, "lambda <= tau"),
                (self.tau, self.rho, "tau <= rho"),
                (self.rho, 1.0, "rho <= 1"),
                (self.rho, self.psi, "rho <= psi"),
            ];
            for (lhs, rhs, what) in checks {
                if lhs > rhs + CHAIN_TOL {
                    return Err(format!("{what} violated: {lhs} > {rhs}"));
                }
            }
            if self.tau > 2.0 * self.lambda + 1e-12 {
                return Err(format!("tau <= 2 lambda violated: {} > {}", self.tau, 2.0 * self.lambda));
            }
        }
        Ok(())
    }
}

/// All four measures. The report's invariants are verified before return.
pub fn full_report(m: &JointPmf, opts: &MeasureOptions) -> Result<DependenceReport> {
    full_report_with_tol(m, opts, DEFAULT_RHO_TOL)
}

pub fn full_report_with_tol(m: &JointPmf, opts: &MeasureOptions, rho_tol: f64) -> Result<DependenceReport> {
    let (events, mode): ([EventOptimum; 3], ModeUsed) = if opts.use_exact(m)? {
        (exact_event_measures(m, opts.caps)?, ModeUsed::Exact)
    } else {
        (
            EventKind::ALL.map(|k| heuristic_event_measure(m, k, &opts.heuristic)),
            ModeUsed::Heuristic,
        )
    };
    let r = rho(m, rho_tol)?;
    let [psi, lambda, tau] = events;
    let report = DependenceReport {
        psi: psi.value,
        lambda: lambda.value,
        tau: tau.value,
        rho: r.value,
        psi_witness: psi.witness,
        lambda_witness: lambda.witness,
        tau_witness: tau.witness,
        rho_witness: r.witness,
        rho_spectral: r.spectral,
        mode_flags: ModeFlags {
            psi: mode,
            lambda: mode,
            tau: mode,
            rho: ModeUsed::Exact,
        },
    };
    report.verify(m, rho_tol).map_err(Error::Invariant)?;
    Ok(report)
}

/// Exact τ, the quantity most checkers need.
pub fn exact_tau(m: &JointPmf) -> Result<f64> {
    Ok(exact_event_measures(m, ExactCaps::default())?[2].value)
}

/// Exact ψ.
pub fn exact_psi(m: &JointPmf) -> Result<f64> {
    Ok(exact_event_measures(m, ExactCaps::default())?[0].value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::joint_pmf::RandomStyle;

    fn yy(t: f64) -> JointPmf {
        let d = (1.0 + t) / 4.0;
        let o = (1.0 - t) / 4.0;
        JointPmf::from_matrix(&[vec![d, o], vec![o, d]], false).unwrap()
    }

    #[test]
    fn yy_report() {
        let r = full_report(&yy(0.5), &MeasureOptions::exact()).unwrap();
        assert!((r.psi - 0.5).abs() < 1e-12);
        assert!((r.lambda - 0.25).abs() < 1e-12);
        assert!((r.tau - 0.5).abs() < 1e-12);
        assert!((r.rho - 0.5).abs() < 1e-9);
        assert!(r.all_exact());
    }

    #[test]
    fn uniform_report_is_zero() {
        let r = full_report(&JointPmf::uniform(2, 2).unwrap(), &MeasureOptions::exact()).unwrap();
        assert_eq!((r.psi, r.lambda, r.tau), (0.0, 0.0, 0.0));
        assert!(r.rho < 1e-15);
    }

    #[test]
    fn transpose_gives_same_values() {
        let m = JointPmf::random(5, 5, 17, RandomStyle::Dense).unwrap();
        let a = full_report(&m, &MeasureOptions::exact()).unwrap();
        let b = full_report(&m.transpose(), &MeasureOptions::exact()).unwrap();
        assert!((a.psi - b.psi).abs() < 1e-13);
        assert!((a.lambda - b.lambda).abs() < 1e-13);
        assert!((a.tau - b.tau).abs() < 1e-13);
        assert!((a.rho - b.rho).abs() < 1e-12);
    }

    #[test]
    fn exact_mode_respects_caps() {
        let m = JointPmf::random(15, 2, 1, RandomStyle::Dense).unwrap();
        assert!(matches!(
            event_measure(&m, EventKind::Tau, &MeasureOptions::exact()),
            Err(Error::TooLargeForExact { .. })
        ));
        let auto = event_measure(&m, EventKind::Tau, &MeasureOptions::new(Mode::Auto)).unwrap();
        assert_eq!(auto.mode_used, ModeUsed::Heuristic);
    }
}
