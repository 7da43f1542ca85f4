//! Synthetic MIP event-log generator.
//!
//! Population-level draws (names, cohorts, which reports each user opens)
//! come from one population stream. Everything else about a case is drawn
//! from streams keyed by its id, so cases can be generated in any order or
//! in parallel with identical results.

mod case;
mod names;
pub mod nlu;
pub mod utterances;

pub use case::simulate_case;
pub use utterances::compose_utterance;

use chrono::NaiveDateTime;
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{Activity, Cohort, Role, SimulationConfig};
use crate::error::DomainError;
use crate::log_io::EventLog;
use crate::rng::{self, POPULATION_STREAM};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UserIdentity {
    /// A synthetic full name, unique within a population.
    pub user_id: String,
    pub role: Role,
    pub cohort: Cohort,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Nomination,
    Approval,
    Done,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseContext {
    pub case_id: u32,
    pub team_leader: UserIdentity,
    pub dept_manager: UserIdentity,
    pub employees: Vec<String>,
    /// Always a non-empty subset of `employees`.
    pub nominees: Vec<String>,
    pub phase: Phase,
    /// Reports the team leader opens at least once in this case.
    pub team_leader_reports: Vec<Activity>,
    /// Reports the department manager opens at least once in this case.
    pub dept_manager_reports: Vec<Activity>,
}

/// One conversation as it was scheduled, before fallbacks and
/// disambiguation turns were added.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionPlan {
    pub session_id: String,
    pub activities: Vec<Activity>,
    pub start: NaiveDateTime,
}

/// Marks exactly `round(p * n)` of `n` slots, chosen uniformly.
fn exact_subset<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Vec<bool> {
    let k = ((p * n as f64).round() as usize).min(n);
    let mut marks = vec![false; n];
    for i in index::sample(rng, n, k) {
        marks[i] = true;
    }
    marks
}

fn team<R: Rng + ?Sized>(config: &SimulationConfig, rng: &mut R) -> (Vec<String>, Vec<String>) {
    let (lo, hi) = config.team_size_bounds;
    let size = Poisson::new(config.mean_team_size).unwrap().sample(rng).clamp(lo as f64, hi as f64) as usize;
    let employees = names::distinct_names(size, rng);
    loop {
        let nominees: Vec<String> =
            employees.iter().filter(|_| rng.random_bool(config.nomination_rate)).cloned().collect();
        if !nominees.is_empty() {
            return (employees, nominees);
        }
    }
}

/// Builds the users and case contexts for `n_cases` cases.
///
/// Department managers are sized to cover the cases at the configured
/// number of teams each. Within each role exactly the configured share of
/// users is struggling, and for each report and role exactly the published
/// share of cases includes a view of it.
pub fn build_population(config: &SimulationConfig, seed: u64, n_cases: u32) -> Vec<CaseContext> {
    let mut pop = rng::stream(seed, POPULATION_STREAM);
    let n = n_cases as usize;
    let n_dm = n.div_ceil(config.teams_per_manager as usize);
    let mut names = names::distinct_names(n + n_dm, &mut pop).into_iter();
    let mut people = |count: usize, role: Role, rng: &mut rng::StreamRng| -> Vec<UserIdentity> {
        let struggling = exact_subset(count, config.struggling_fraction, rng);
        struggling
            .into_iter()
            .map(|s| UserIdentity {
                user_id: names.next().unwrap(),
                role,
                cohort: if s { Cohort::Struggling } else { Cohort::Successful },
            })
            .collect()
    };
    let leaders = people(n, Role::TeamLeader, &mut pop);
    let managers = people(n_dm, Role::DepartmentManager, &mut pop);

    let mut tl_reports = vec![Vec::new(); n];
    let mut dm_reports = vec![Vec::new(); n];
    for report in &config.reports {
        for (role, target) in [(Role::TeamLeader, &mut tl_reports), (Role::DepartmentManager, &mut dm_reports)] {
            for (case, included) in exact_subset(n, report.p_view(role), &mut pop).into_iter().enumerate() {
                if included {
                    target[case].push(report.activity);
                }
            }
        }
    }

    (0..n)
        .map(|i| {
            let case_id = i as u32 + 1;
            let mut team_rng = rng::stream(seed, (case_id as u64) << 1 | 1);
            let (employees, nominees) = team(config, &mut team_rng);
            CaseContext {
                case_id,
                team_leader: leaders[i].clone(),
                dept_manager: managers[i / config.teams_per_manager as usize].clone(),
                employees,
                nominees,
                phase: Phase::Nomination,
                team_leader_reports: std::mem::take(&mut tl_reports[i]),
                dept_manager_reports: std::mem::take(&mut dm_reports[i]),
            }
        })
        .collect()
}

/// Simulates the full configured population.
pub fn simulate(config: &SimulationConfig, seed: u64) -> Result<EventLog, DomainError> {
    simulate_cases(config, seed, config.n_cases())
}

/// Simulates `n_cases` cases with the configured per-case behaviour.
///
/// Smaller runs keep the same ratios (teams per manager, struggling share,
/// report viewing rates), which makes them useful for quick experiments.
pub fn simulate_cases(config: &SimulationConfig, seed: u64, n_cases: u32) -> Result<EventLog, DomainError> {
    config.validate()?;
    if n_cases == 0 {
        return Err(DomainError::InvalidConfig("at least one case is required".into()));
    }
    let contexts = build_population(config, seed, n_cases);
    let rows: Vec<_> = contexts
        .par_iter()
        .map(|ctx| {
            let mut r = rng::stream(seed, (ctx.case_id as u64) << 1);
            simulate_case(ctx, config, &mut r)
        })
        .flatten()
        .collect();
    Ok(EventLog::sorted(rows))
}

/// Like [`simulate_cases`], also returning each case's scheduled sessions.
pub fn simulate_with_plans(
    config: &SimulationConfig,
    seed: u64,
    n_cases: u32,
) -> Result<(EventLog, Vec<SessionPlan>), DomainError> {
    config.validate()?;
    let contexts = build_population(config, seed, n_cases);
    let parts: Vec<_> = contexts
        .par_iter()
        .map(|ctx| {
            let mut r = rng::stream(seed, (ctx.case_id as u64) << 1);
            case::simulate_case_with_plans(ctx, config, &mut r)
        })
        .collect();
    let mut rows = Vec::new();
    let mut plans = Vec::new();
    for (r, p) in parts {
        rows.extend(r);
        plans.extend(p);
    }
    Ok((EventLog::sorted(rows), plans))
}
