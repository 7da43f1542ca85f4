//! Closed vocabularies, cohort parameters and the default simulation setup.

mod calendar;
mod catalog;

pub use calendar::{is_workday, BusinessCalendar};
pub use catalog::{activity_catalog, is_undesirable, Activity, ActivityKind, N_ACTIVITIES};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::DomainError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    TeamLeader,
    DepartmentManager,
}

impl Role {
    pub const ALL: [Role; 2] = [Role::TeamLeader, Role::DepartmentManager];

    /// Text used in the `role` column of the event log.
    pub fn as_str(self) -> &'static str {
        match self {
            Role::TeamLeader => "team leader",
            Role::DepartmentManager => "department manager",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('_', " ").as_str() {
            "team leader" => Ok(Role::TeamLeader),
            "department manager" | "dept manager" | "dep. manager" => Ok(Role::DepartmentManager),
            _ => Err(DomainError::UnknownRole(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cohort {
    Successful,
    Struggling,
}

impl Cohort {
    pub const ALL: [Cohort; 2] = [Cohort::Successful, Cohort::Struggling];
}

/// A report users can open, with at-least-once viewing probabilities per role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSpec {
    pub name: String,
    pub activity: Activity,
    pub p_view_team_leader: f64,
    pub p_view_dept_manager: f64,
}

impl ReportSpec {
    pub fn p_view(&self, role: Role) -> f64 {
        match role {
            Role::TeamLeader => self.p_view_team_leader,
            Role::DepartmentManager => self.p_view_dept_manager,
        }
    }

    /// Chatbot response stub shown when the report opens, e.g. `Lead Time Report`.
    pub fn response_stub(&self) -> String {
        let mut words: Vec<String> = self
            .name
            .split_whitespace()
            .map(|w| {
                if w.chars().all(|c| c.is_ascii_uppercase()) || w == "and" {
                    w.to_string()
                } else {
                    let mut c = w.chars();
                    c.next()
                        .map(|first| first.to_uppercase().chain(c).collect())
                        .unwrap_or_default()
                }
            })
            .collect();
        if words.last().map(|w| w.as_str()) != Some("Report") {
            words.push("Report".into());
        }
        words.join(" ")
    }
}

/// Two reports whose requests are easily confused, resolved by a button prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisambiguationScenario {
    pub pair: [Activity; 2],
    pub disambiguation_activity: Activity,
    pub example_trigger: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortProfile {
    pub role: Role,
    pub cohort: Cohort,
    pub mean_intersession_interval_wd: f64,
    pub mean_conversations_per_case: f64,
    pub p_fallback_per_utterance: f64,
    pub p_abandon_session: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionProbs {
    pub approve: f64,
    pub approve_with_correction: f64,
    pub reject: f64,
}

impl DecisionProbs {
    pub fn as_array(&self) -> [(Activity, f64); 3] {
        [
            (Activity::APPROVE_NOMINATION, self.approve),
            (Activity::APPROVE_WITH_CORRECTION, self.approve_with_correction),
            (Activity::REJECT_NOMINATION, self.reject),
        ]
    }
}

/// Sampling parameters for the conversation engine's confidence signals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NluParams {
    pub recognized_confidence: (f64, f64),
    pub fallback_confidence: (f64, f64),
    pub disambiguation_confidence: (f64, f64),
    /// score = clamp(score_scale * confidence + Normal(0, score_noise_sd), 0, 1)
    pub score_scale: f64,
    pub score_noise_sd: f64,
    pub entity_certain_prob: f64,
    pub entity_confidence_floor: f64,
}

impl Default for NluParams {
    fn default() -> Self {
        NluParams {
            recognized_confidence: (0.55, 0.99),
            fallback_confidence: (0.05, 0.35),
            disambiguation_confidence: (0.35, 0.55),
            score_scale: 0.95,
            score_noise_sd: 0.02,
            entity_certain_prob: 0.9,
            entity_confidence_floor: 0.5,
        }
    }
}

/// Gaps between consecutive turns of one conversation (log-normal).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurnGapParams {
    pub median_seconds: f64,
    pub sigma: f64,
}

/// Every statistical knob of the generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub n_dept_managers: u32,
    pub teams_per_manager: u32,
    pub mean_team_size: f64,
    pub team_size_bounds: (u32, u32),
    pub nomination_rate: f64,
    pub struggling_fraction: f64,
    /// Success probability of the geometric number of repeat views of an
    /// included report.
    pub repeat_view_success_prob: f64,
    pub max_fallbacks_per_utterance: u32,
    pub p_disambiguation: f64,
    pub decision_probs: DecisionProbs,
    pub nlu: NluParams,
    pub turn_gap: TurnGapParams,
    pub reports: Vec<ReportSpec>,
    pub scenarios: Vec<DisambiguationScenario>,
    pub cohorts: Vec<CohortProfile>,
    pub calendar: BusinessCalendar,
    pub master_seed: u64,
}

const TABLE_REPORTS: [(&str, Activity, f64, f64); 20] = {
    use Activity as A;
    [
        ("MIP criteria", A::REPORT_MIP_CRITERIA, 1.0, 0.626),
        ("Yearly assessments", A::REPORT_YEARLY_ASSESSMENTS, 1.0, 0.508),
        ("Project assessments", A::REPORT_PROJECT_ASSESSMENTS, 0.911, 0.567),
        ("Learning activities", A::REPORT_LEARNING_ACTIVITIES, 0.872, 0.470),
        ("Client feedback", A::REPORT_CLIENT_FEEDBACK, 0.865, 0.507),
        ("Internal feedback", A::REPORT_INTERNAL_FEEDBACK, 0.894, 0.518),
        ("Compensation report", A::REPORT_COMPENSATION, 0.916, 0.527),
        ("MIP history", A::REPORT_MIP_HISTORY, 0.919, 0.567),
        ("Overtime", A::REPORT_OVERTIME, 0.559, 0.301),
        ("Innovation and patents", A::REPORT_INNOVATION_AND_PATENTS, 0.709, 0.355),
        ("Product defects", A::REPORT_PRODUCT_DEFECTS, 0.363, 0.151),
        ("Sprints velocity", A::REPORT_SPRINTS_VELOCITY, 0.329, 0.170),
        ("Bugs fixed", A::REPORT_BUGS_FIXED, 0.386, 0.152),
        ("Pull requests", A::REPORT_PULL_REQUESTS, 0.152, 0.129),
        ("Features shipped", A::REPORT_FEATURES_SHIPPED, 0.303, 0.261),
        ("Defects repair time", A::REPORT_DEFECTS_REPAIR_TIME, 0.171, 0.108),
        ("Lead time", A::REPORT_LEAD_TIME, 0.273, 0.171),
        ("Project costs", A::REPORT_PROJECT_COSTS, 0.511, 0.272),
        ("Code churn", A::REPORT_CODE_CHURN, 0.310, 0.271),
        ("Absence", A::REPORT_ABSENCE, 0.341, 0.182),
    ]
};


impl SimulationConfig {
    pub fn cohort(&self, role: Role, cohort: Cohort) -> &CohortProfile {
        self.cohorts
            .iter()
            .find(|c| c.role == role && c.cohort == cohort)
            .expect("validated config has all four cohort profiles")
    }

    pub fn report(&self, name: &str) -> Option<&ReportSpec> {
        self.reports.iter().find(|r| r.name == name)
    }

    pub fn report_for(&self, activity: Activity) -> Option<&ReportSpec> {
        self.reports.iter().find(|r| r.activity == activity)
    }

    /// Scenario whose pair contains `report`, if any.
    pub fn scenario_for(&self, report: Activity) -> Option<&DisambiguationScenario> {
        self.scenarios.iter().find(|s| s.pair.contains(&report))
    }

    pub fn n_cases(&self) -> u32 {
        self.n_dept_managers * self.teams_per_manager
    }

    /// Checks every structural and probabilistic constraint.
    pub fn validate(&self) -> Result<(), DomainError> {
        let bad = |msg: String| Err(DomainError::InvalidConfig(msg));
        if self.n_dept_managers == 0 || self.teams_per_manager == 0 {
            return bad("population counts must be positive".into());
        }
        if !(self.mean_team_size > 0.0) {
            return bad("mean_team_size must be positive".into());
        }
        let (lo, hi) = self.team_size_bounds;
        if lo == 0 || lo > hi {
            return bad(format!("team_size_bounds ({lo}, {hi}) must satisfy 1 <= lo <= hi"));
        }
        let probs = [
            ("nomination_rate", self.nomination_rate),
            ("struggling_fraction", self.struggling_fraction),
            ("p_disambiguation", self.p_disambiguation),
            ("nlu.entity_certain_prob", self.nlu.entity_certain_prob),
            ("nlu.entity_confidence_floor", self.nlu.entity_confidence_floor),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        if !(self.nomination_rate > 0.0) {
            return bad("nomination_rate must be positive so every team has a nominee".into());
        }
        if !(self.repeat_view_success_prob > 0.0 && self.repeat_view_success_prob <= 1.0) {
            return bad("repeat_view_success_prob must lie in (0, 1]".into());
        }
        let d = self.decision_probs;
        for (a, p) in d.as_array() {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("decision probability for {a} = {p} is not a probability"));
            }
        }
        let sum = d.approve + d.approve_with_correction + d.reject;
        if (sum - 1.0).abs() > 1e-9 {
            return bad(format!("decision_probs sum to {sum}, expected 1"));
        }
        for (name, (a, b)) in [
            ("recognized_confidence", self.nlu.recognized_confidence),
            ("fallback_confidence", self.nlu.fallback_confidence),
            ("disambiguation_confidence", self.nlu.disambiguation_confidence),
        ] {
            if !(0.0 <= a && a < b && b <= 1.0) {
                return bad(format!("nlu.{name} range ({a}, {b}) must be increasing within [0, 1]"));
            }
        }
        if !(self.nlu.score_noise_sd >= 0.0 && self.nlu.score_scale > 0.0) {
            return bad("nlu score parameters must be non-negative".into());
        }
        if !(self.turn_gap.median_seconds > 0.0 && self.turn_gap.sigma >= 0.0) {
            return bad("turn_gap parameters must be positive".into());
        }

        if self.reports.len() != 20 {
            return bad(format!("expected 20 reports, found {}", self.reports.len()));
        }
        let mut seen = std::collections::HashSet::new();
        for r in &self.reports {
            if !r.activity.is_report() || !seen.insert(r.activity) {
                return bad(format!("report {:?} must map to a distinct report activity", r.name));
            }
            for p in [r.p_view_team_leader, r.p_view_dept_manager] {
                if !(0.0..=1.0).contains(&p) {
                    return bad(format!("report {:?} has probability {p} outside [0, 1]", r.name));
                }
            }
        }
        if self.scenarios.len() != 4 {
            return bad(format!("expected 4 disambiguation scenarios, found {}", self.scenarios.len()));
        }
        let mut paired = std::collections::HashSet::new();
        let mut disambigs = std::collections::HashSet::new();
        for s in &self.scenarios {
            if s.disambiguation_activity.kind() != ActivityKind::Disambiguation
                || !disambigs.insert(s.disambiguation_activity)
            {
                return bad(format!("scenario {:?} needs its own disambiguation activity", s.example_trigger));
            }
            for r in s.pair {
                if !r.is_report() || !paired.insert(r) {
                    return bad(format!("scenario {:?} must pair two distinct unused reports", s.example_trigger));
                }
            }
        }
        if self.cohorts.len() != 4 {
            return bad(format!("expected 4 cohort profiles, found {}", self.cohorts.len()));
        }
        for role in Role::ALL {
            for cohort in Cohort::ALL {
                let n = self.cohorts.iter().filter(|c| c.role == role && c.cohort == cohort).count();
                if n != 1 {
                    return bad(format!("need exactly one {cohort:?} {role} profile, found {n}"));
                }
            }
        }
        for c in &self.cohorts {
            if !(c.mean_intersession_interval_wd > 0.0) || !(c.mean_conversations_per_case >= 1.0) {
                return bad(format!(
                    "{:?} {} profile needs a positive interval and at least one conversation",
                    c.cohort, c.role
                ));
            }
            for p in [c.p_fallback_per_utterance, c.p_abandon_session] {
                if !(0.0..1.0).contains(&p) {
                    return bad(format!("{:?} {} profile has probability {p} outside [0, 1)", c.cohort, c.role));
                }
            }
        }
        self.calendar.validate()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable")
    }

    /// Parses and validates a JSON config. Unknown keys are rejected.
    pub fn from_json(text: &str) -> Result<SimulationConfig, DomainError> {
        let cfg: SimulationConfig =
            serde_json::from_str(text).map_err(|e| DomainError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

impl Default for SimulationConfig {
    fn default() -> Self {
        default_config()
    }
}

fn profile(role: Role, cohort: Cohort, interval: f64, conversations: f64, fallback: f64, abandon: f64) -> CohortProfile {
    CohortProfile {
        role,
        cohort,
        mean_intersession_interval_wd: interval,
        mean_conversations_per_case: conversations,
        p_fallback_per_utterance: fallback,
        p_abandon_session: abandon,
    }
}

/// The published use-case parameters plus this crate's documented defaults.
pub fn default_config() -> SimulationConfig {
    let reports = TABLE_REPORTS
        .iter()
        .map(|&(name, activity, tl, dm)| ReportSpec {
            name: name.to_string(),
            activity,
            p_view_team_leader: tl,
            p_view_dept_manager: dm,
        })
        .collect();
    let scenario = |a: Activity, b: Activity, d: Activity, trigger: &str| DisambiguationScenario {
        pair: [a, b],
        disambiguation_activity: d,
        example_trigger: trigger.to_string(),
    };
    let scenarios = vec![
        scenario(
            Activity::REPORT_CLIENT_FEEDBACK,
            Activity::REPORT_INTERNAL_FEEDBACK,
            Activity::DISAMBIG_FEEDBACK,
            "show feedback report",
        ),
        scenario(
            Activity::REPORT_PROJECT_ASSESSMENTS,
            Activity::REPORT_PROJECT_COSTS,
            Activity::DISAMBIG_PROJECT_DATA,
            "view project data",
        ),
        scenario(
            Activity::REPORT_MIP_CRITERIA,
            Activity::REPORT_MIP_HISTORY,
            Activity::DISAMBIG_MIP_DATA,
            "MIP data",
        ),
        scenario(
            Activity::REPORT_PRODUCT_DEFECTS,
            Activity::REPORT_DEFECTS_REPAIR_TIME,
            Activity::DISAMBIG_DEFECTS,
            "I need defects report",
        ),
    ];
    use Cohort::*;
    use Role::*;
    let cohorts = vec![
        profile(TeamLeader, Successful, 1.5, 2.0, 0.05, 0.05),
        profile(TeamLeader, Struggling, 4.0, 5.5, 0.3, 0.25),
        profile(DepartmentManager, Successful, 1.0, 1.5, 0.05, 0.05),
        profile(DepartmentManager, Struggling, 2.0, 3.5, 0.3, 0.25),
    ];
    SimulationConfig {
        n_dept_managers: 250,
        teams_per_manager: 4,
        mean_team_size: 10.0,
        team_size_bounds: (4, 16),
        nomination_rate: 0.2,
        struggling_fraction: 1.0 / 3.0,
        repeat_view_success_prob: 0.7,
        max_fallbacks_per_utterance: 3,
        p_disambiguation: 0.12,
        decision_probs: DecisionProbs { approve: 0.70, approve_with_correction: 0.20, reject: 0.10 },
        nlu: NluParams::default(),
        turn_gap: TurnGapParams { median_seconds: 25.0, sigma: 0.7 },
        reports,
        scenarios,
        cohorts,
        calendar: BusinessCalendar::default(),
        master_seed: 20220307,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = default_config();
        c.validate().unwrap();
        assert_eq!(c.n_dept_managers, 250);
        assert_eq!(c.teams_per_manager, 4);
        assert_eq!(c.n_cases(), 1000);
        assert_eq!(c.cohort(Role::TeamLeader, Cohort::Struggling).p_fallback_per_utterance, 0.3);
        assert_eq!(c.report("Pull requests").unwrap().p_view_team_leader, 0.152);
    }

    #[test]
    fn struggling_dominates_successful() {
        let c = default_config();
        for role in Role::ALL {
            let s = c.cohort(role, Cohort::Successful);
            let t = c.cohort(role, Cohort::Struggling);
            assert!(t.mean_intersession_interval_wd > s.mean_intersession_interval_wd);
            assert!(t.mean_conversations_per_case > s.mean_conversations_per_case);
            assert!(t.p_fallback_per_utterance > s.p_fallback_per_utterance);
            assert!(t.p_abandon_session > s.p_abandon_session);
        }
    }

    #[test]
    fn report_names_match_activities() {
        for r in default_config().reports {
            let expected = format!("report_{}", r.name.to_lowercase().replace(' ', "_"));
            let expected = expected.trim_end_matches("_report").to_string();
            assert_eq!(r.activity.label(), expected);
        }
    }

    #[test]
    fn response_stubs() {
        let c = default_config();
        assert_eq!(c.report("Lead time").unwrap().response_stub(), "Lead Time Report");
        assert_eq!(c.report("MIP criteria").unwrap().response_stub(), "MIP Criteria Report");
        assert_eq!(c.report("Compensation report").unwrap().response_stub(), "Compensation Report");
    }

    #[test]
    fn json_round_trip_and_unknown_keys() {
        let c = default_config();
        let text = c.to_json();
        assert_eq!(SimulationConfig::from_json(&text).unwrap(), c);
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["surprise"] = serde_json::json!(1);
        assert!(SimulationConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn decision_probs_must_sum_to_one() {
        let mut c = default_config();
        c.decision_probs.reject = 0.2;
        assert!(matches!(c.validate(), Err(DomainError::InvalidConfig(_))));
    }

    #[test]
    fn role_text() {
        assert_eq!("team leader".parse::<Role>().unwrap(), Role::TeamLeader);
        assert_eq!(Role::DepartmentManager.to_string(), "department manager");
    }
}
