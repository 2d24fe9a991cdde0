//! Annealed search over `I x J` joint distributions: maximize ρ under a cap
//! on τ, or maximize a lower bound on the tensor gap `τ(M⊗M) − τ(M)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constructions::yy_pair;
use crate::error::{Error, Result};
use crate::joint_pmf::{EventPair, JointPmf};
use crate::measures::{
    event_statistic, exact_event_measures, full_report, heuristic_event_measure, rho, DependenceReport,
    EventKind, ExactCaps, HeuristicConfig, MeasureOptions, DEFAULT_RHO_TOL,
};
use crate::theorem_suite::{derive_seed, peyre_bound, two_atom_bound, EXACT_TOL};

/// Per-step temperature factor.
pub const COOLING: f64 = 0.995;
pub const INITIAL_TEMPERATURE: f64 = 0.01;
/// Consecutive rejections that halve the step scale.
pub const REJECTION_STREAK: usize = 25;
/// Concentration added to every cell so empty cells can gain mass.
const DIRICHLET_FLOOR: f64 = 0.02;
/// Largest Kronecker power, in entries, evaluated by the tensor-gap bound.
pub const POWER_ENTRY_CAP: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub shape: (usize, usize),
    pub tau_cap: f64,
    /// Two-row regime, scored against `t (1 − log t)^{1/2}`.
    pub two_atom: bool,
    pub budget: usize,
    pub restarts: usize,
    pub seed: u64,
    pub step_scale: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            shape: (4, 4),
            tau_cap: 0.1,
            two_atom: false,
            budget: 1000,
            restarts: 4,
            seed: 0,
            step_scale: 0.1,
        }
    }
}

impl SearchConfig {
    /// Default shape for the regime: 2x8 with two atoms, 4x4 otherwise.
    pub fn for_regime(two_atom: bool) -> Self {
        SearchConfig {
            shape: if two_atom { (2, 8) } else { (4, 4) },
            two_atom,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (i, j) = self.shape;
        let caps = ExactCaps::default();
        if i < 2 || j < 2 || i > caps.rows || j > caps.cols {
            return Err(Error::Config(format!(
                "shape {i}x{j} must be between 2x2 and {}x{}",
                caps.rows, caps.cols
            )));
        }
        if self.two_atom && i != 2 {
            return Err(Error::Config(format!("two-atom regime needs 2 rows, got {i}")));
        }
        if !(self.tau_cap > 0.0 && self.tau_cap <= 1.0) {
            return Err(Error::OutOfRange {
                name: "tau_cap",
                value: self.tau_cap,
                range: "(0, 1]",
            });
        }
        if self.budget == 0 {
            return Err(Error::Config("budget must be at least 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        if !(self.step_scale > 0.0 && self.step_scale.is_finite()) {
            return Err(Error::OutOfRange {
                name: "step_scale",
                value: self.step_scale,
                range: "(0, inf)",
            });
        }
        Ok(())
    }

    /// The ρ ceiling at `tau_cap` for the regime.
    pub fn rho_bound(&self) -> f64 {
        if self.two_atom {
            two_atom_bound(self.tau_cap)
        } else {
            peyre_bound(self.tau_cap)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchObjective {
    MaxRho,
    TensorGap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub objective_kind: SearchObjective,
    pub best: JointPmf,
    pub best_report: DependenceReport,
    /// ρ of `best` for [`SearchObjective::MaxRho`]; the gap lower bound for
    /// [`SearchObjective::TensorGap`].
    pub objective: f64,
    /// The regime's ρ ceiling, or `ψ(best) − τ(best)` for the tensor gap.
    pub bound: f64,
    pub ratio: f64,
    /// Best-so-far objective of the winning restart, recorded at the start,
    /// at each improvement and at the last iteration.
    pub trace: Vec<(usize, f64)>,
    pub seed: u64,
    pub restart: usize,
    pub accepted: usize,
    /// Largest exact τ over every state accepted in any restart.
    pub max_accepted_tau: f64,
    /// Lower bound on `τ(M^{⊗n})` and the power `n` attaining it (tensor gap only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_tau_lower: Option<(usize, f64)>,
}

/// `yy_pair(t)` in the top-left corner of an `I x J` zero matrix.
fn embedded_yy(t: f64, shape: (usize, usize)) -> Result<Vec<f64>> {
    let yy = yy_pair(t)?;
    let mut p = vec![0.0; shape.0 * shape.1];
    for i in 0..2 {
        for j in 0..2 {
            p[i * shape.1 + j] = yy.get(i, j);
        }
    }
    Ok(p)
}

fn to_pmf(p: &[f64], shape: (usize, usize)) -> Option<JointPmf> {
    let rows: Vec<Vec<f64>> = p.chunks(shape.1).map(<[f64]>::to_vec).collect();
    JointPmf::from_matrix(&rows, true).ok()
}

/// Dirichlet step centred at `p` with concentration `1 / scale²`.
fn propose(p: &[f64], scale: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let kappa = 1.0 / (scale * scale);
    let mut q: Vec<f64> = p
        .iter()
        .map(|&x| {
            let shape = kappa * x + DIRICHLET_FLOOR;
            Gamma::new(shape, 1.0).map_or(0.0, |g| g.sample(rng))
        })
        .collect();
    let total: f64 = q.iter().sum();
    if total > 0.0 {
        q.iter_mut().for_each(|x| *x /= total);
    }
    q
}

struct Evaluation {
    objective: f64,
    tau: f64,
    /// Per-state ceiling the objective must respect.
    ceiling: f64,
    power: Option<(usize, f64)>,
}

struct RestartOutcome {
    best: Vec<f64>,
    best_objective: f64,
    best_power: Option<(usize, f64)>,
    trace: Vec<(usize, f64)>,
    accepted: usize,
    max_tau: f64,
}

fn anneal<F>(cfg: &SearchConfig, restart: usize, start: &[f64], eval: &F) -> Result<RestartOutcome>
where
    F: Fn(&JointPmf) -> Option<Evaluation> + Sync,
{
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, restart as u64));
    let start_pmf = to_pmf(start, cfg.shape).ok_or_else(|| Error::Invariant("start state invalid".into()))?;
    let first = eval(&start_pmf).ok_or_else(|| Error::Invariant("start state infeasible".into()))?;
    let mut current = start.to_vec();
    let mut current_obj = first.objective;
    let mut out = RestartOutcome {
        best: current.clone(),
        best_objective: first.objective,
        best_power: first.power,
        trace: vec![(0, first.objective)],
        accepted: 1,
        max_tau: first.tau,
    };
    let mut temperature = INITIAL_TEMPERATURE;
    let mut scale = cfg.step_scale;
    let min_scale = cfg.step_scale * 1e-3;
    let mut streak = 0;
    for it in 1..=cfg.budget {
        let q = propose(&current, scale, &mut rng);
        let u: f64 = rng.random();
        let candidate = to_pmf(&q, cfg.shape).and_then(|m| eval(&m));
        let accept = match &candidate {
            Some(e) => e.objective >= current_obj || u < ((e.objective - current_obj) / temperature).exp(),
            None => false,
        };
        if accept {
            let e = candidate.expect("accepted states are evaluated");
            if e.objective > e.ceiling + EXACT_TOL {
                return Err(Error::Invariant(format!(
                    "objective {} exceeds its ceiling {}",
                    e.objective, e.ceiling
                )));
            }
            out.accepted += 1;
            out.max_tau = out.max_tau.max(e.tau);
            current = q;
            current_obj = e.objective;
            streak = 0;
            if e.objective > out.best_objective {
                out.best_objective = e.objective;
                out.best = current.clone();
                out.best_power = e.power;
                out.trace.push((it, e.objective));
            }
        } else {
            streak += 1;
            if streak >= REJECTION_STREAK {
                scale = (scale * 0.5).max(min_scale);
                streak = 0;
            }
        }
        temperature *= COOLING;
    }
    if out.trace.last().map(|t| t.0) != Some(cfg.budget) {
        out.trace.push((cfg.budget, out.best_objective));
    }
    Ok(out)
}

/// Runs every restart and keeps the best, ties going to the lowest index.
fn run_restarts<F>(cfg: &SearchConfig, start: &[f64], eval: F) -> Result<(usize, RestartOutcome, usize, f64)>
where
    F: Fn(&JointPmf) -> Option<Evaluation> + Sync,
{
    let outcomes: Vec<RestartOutcome> = (0..cfg.restarts)
        .into_par_iter()
        .map(|k| anneal(cfg, k, start, &eval))
        .collect::<Result<_>>()?;
    let accepted = outcomes.iter().map(|o| o.accepted).sum();
    let max_tau = outcomes.iter().map(|o| o.max_tau).fold(0.0, f64::max);
    let mut best_k = 0;
    for (k, o) in outcomes.iter().enumerate() {
        if o.best_objective > outcomes[best_k].best_objective {
            best_k = k;
        }
    }
    let best = outcomes.into_iter().nth(best_k).expect("at least one restart");
    Ok((best_k, best, accepted, max_tau))
}

/// Feasibility slack on the τ cap for the start point, whose exact τ may sit
/// a rounding error above the cap.
const FEASIBILITY_SLACK: f64 = 1e-12;

/// Maximizes ρ subject to exact `τ ≤ tau_cap`, starting from the embedded
/// `yy_pair(tau_cap)` where `ρ = τ = tau_cap`.
pub fn search_max_rho(cfg: &SearchConfig) -> Result<SearchResult> {
    cfg.validate()?;
    let caps = ExactCaps::default();
    let eval = |m: &JointPmf| -> Option<Evaluation> {
        let tau = exact_event_measures(m, caps).ok()?[2].value;
        if tau > cfg.tau_cap + FEASIBILITY_SLACK {
            return None;
        }
        let r = rho(m, DEFAULT_RHO_TOL).ok()?;
        Some(Evaluation {
            objective: r.value,
            tau,
            ceiling: cfg.rho_bound(),
            power: None,
        })
    };
    let start = embedded_yy(cfg.tau_cap, cfg.shape)?;
    let (restart, out, accepted, max_tau) = run_restarts(cfg, &start, eval)?;
    let best = to_pmf(&out.best, cfg.shape).expect("best state is a valid matrix");
    let best_report = full_report(&best, &MeasureOptions::exact())?;
    let bound = cfg.rho_bound();
    let objective = best_report.rho;
    if objective > bound + EXACT_TOL {
        return Err(Error::Invariant(format!("rho {objective} exceeds the bound {bound}")));
    }
    Ok(SearchResult {
        objective_kind: SearchObjective::MaxRho,
        best,
        best_report,
        objective,
        bound,
        ratio: objective / bound,
        trace: out.trace,
        seed: cfg.seed,
        restart,
        accepted,
        max_accepted_tau: max_tau,
        power_tau_lower: None,
    })
}

/// Lower bound on `τ(M^{⊗n})` for each `n` in `2..=n_max` whose power fits in
/// [`POWER_ENTRY_CAP`], from threshold events of the additive ρ-witness
/// scores and from the heuristic ascent. Returns the best `(n, bound)`.
pub fn power_tau_lower_bound(m: &JointPmf, n_max: usize) -> Result<Option<(usize, f64)>> {
    let r = rho(m, DEFAULT_RHO_TOL)?;
    let heuristic = HeuristicConfig {
        random_restarts: 4,
        atom_restarts: 2,
        max_rounds: 50,
        ..Default::default()
    };
    let (i, j) = m.shape();
    let mut best: Option<(usize, f64)> = None;
    let mut power = m.clone();
    for n in 2..=n_max {
        if (i * j).checked_pow(n as u32).is_none_or(|e| e > POWER_ENTRY_CAP) {
            break;
        }
        power = power.kron(m)?;
        let mut value = heuristic_event_measure(&power, EventKind::Tau, &heuristic).value;
        if !r.witness.is_empty() {
            let rows = threshold_sets(&r.witness.f, i, n);
            let cols = threshold_sets(&r.witness.g, j, n);
            for a in &rows {
                for b in &cols {
                    let e = EventPair::new(a.clone(), b.clone());
                    value = value.max(event_statistic(&power, &e, EventKind::Tau));
                }
            }
        }
        if best.is_none_or(|(_, v)| value > v) {
            best = Some((n, value));
        }
    }
    Ok(best)
}

/// Upper level sets `{Σ_k f(x_k) > c}` over the `n`-fold product atoms,
/// indexed lexicographically as in the Kronecker product.
fn threshold_sets(f: &[f64], atoms: usize, n: usize) -> Vec<Vec<usize>> {
    let total = atoms.pow(n as u32);
    let sums: Vec<f64> = (0..total)
        .map(|mut idx| {
            let mut s = 0.0;
            for _ in 0..n {
                s += f[idx % atoms];
                idx /= atoms;
            }
            s
        })
        .collect();
    let mut levels = sums.clone();
    levels.sort_by(f64::total_cmp);
    levels.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    levels
        .iter()
        .take(levels.len().saturating_sub(1))
        .map(|&c| (0..total).filter(|&k| sums[k] > c + 1e-12).collect())
        .collect()
}

/// Maximizes `LB(τ(M^{⊗n})) − τ(M)` over `M` with exact `τ(M) ≤ tau_cap`.
pub fn search_tensor_gap(cfg: &SearchConfig, n_max: usize) -> Result<SearchResult> {
    cfg.validate()?;
    if n_max < 2 {
        return Err(Error::Config("n_max must be at least 2".into()));
    }
    let caps = ExactCaps::default();
    let eval = |m: &JointPmf| -> Option<Evaluation> {
        let [psi, _, tau] = exact_event_measures(m, caps).ok()?;
        if tau.value > cfg.tau_cap + FEASIBILITY_SLACK {
            return None;
        }
        let (n, lower) = power_tau_lower_bound(m, n_max).ok()??;
        Some(Evaluation {
            objective: lower - tau.value,
            tau: tau.value,
            ceiling: psi.value.max(tau.value) - tau.value,
            power: Some((n, lower)),
        })
    };
    let start = embedded_yy(cfg.tau_cap.min(0.5), cfg.shape)?;
    let (restart, out, accepted, max_tau) = run_restarts(cfg, &start, eval)?;
    let best = to_pmf(&out.best, cfg.shape).expect("best state is a valid matrix");
    let best_report = full_report(&best, &MeasureOptions::exact())?;
    let bound = best_report.psi.max(best_report.tau) - best_report.tau;
    let objective = out.best_objective;
    if objective > bound + EXACT_TOL {
        return Err(Error::Invariant(format!("gap {objective} exceeds psi - tau = {bound}")));
    }
    Ok(SearchResult {
        objective_kind: SearchObjective::TensorGap,
        best,
        best_report,
        objective,
        bound,
        ratio: if bound > 0.0 { objective / bound } else { 0.0 },
        trace: out.trace,
        seed: cfg.seed,
        restart,
        accepted,
        max_accepted_tau: max_tau,
        power_tau_lower: out.best_power,
    })
}
