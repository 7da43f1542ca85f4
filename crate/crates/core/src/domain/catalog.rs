//! The closed activity vocabulary.
//!
//! Activities are identified by snake_case labels and kept in lexicographic
//! order, so an [`Activity`] is just an index into [`CATALOG`].

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::Role;
use crate::error::DomainError;

/// What kind of conversational step an activity is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivityKind {
    ReportView,
    Disambiguation,
    Fallback,
    Task,
    End,
}

pub(crate) struct CatalogEntry {
    pub label: &'static str,
    pub kind: ActivityKind,
    pub owner: Option<Role>,
}

const fn entry(label: &'static str, kind: ActivityKind, owner: Option<Role>) -> CatalogEntry {
    CatalogEntry { label, kind, owner }
}

use ActivityKind::*;
const TL: Option<Role> = Some(Role::TeamLeader);
const DM: Option<Role> = Some(Role::DepartmentManager);

/// Sorted by label.
pub(crate) const CATALOG: [CatalogEntry; 36] = [
    entry("add_nomination", Task, TL),
    entry("approve_nomination", Task, DM),
    entry("approve_with_correction", Task, DM),
    entry("disambig_defects", Disambiguation, None),
    entry("disambig_feedback", Disambiguation, None),
    entry("disambig_mip_data", Disambiguation, None),
    entry("disambig_project_data", Disambiguation, None),
    entry("end", End, None),
    entry("fallback", Fallback, None),
    entry("provide_candidate_name", Task, TL),
    entry("reject_nomination", Task, DM),
    entry("report_absence", ReportView, None),
    entry("report_bugs_fixed", ReportView, None),
    entry("report_client_feedback", ReportView, None),
    entry("report_code_churn", ReportView, None),
    entry("report_compensation", ReportView, None),
    entry("report_defects_repair_time", ReportView, None),
    entry("report_features_shipped", ReportView, None),
    entry("report_innovation_and_patents", ReportView, None),
    entry("report_internal_feedback", ReportView, None),
    entry("report_lead_time", ReportView, None),
    entry("report_learning_activities", ReportView, None),
    entry("report_mip_criteria", ReportView, None),
    entry("report_mip_history", ReportView, None),
    entry("report_overtime", ReportView, None),
    entry("report_product_defects", ReportView, None),
    entry("report_project_assessments", ReportView, None),
    entry("report_project_costs", ReportView, None),
    entry("report_pull_requests", ReportView, None),
    entry("report_sprints_velocity", ReportView, None),
    entry("report_yearly_assessments", ReportView, None),
    entry("review_nominated_candidate", Task, DM),
    entry("select_candidate_name", Task, DM),
    entry("submit_final_nominations", Task, DM),
    entry("submit_nomination", Task, TL),
    entry("view_nomination", Task, TL),
];

/// Number of activities, including the synthetic `end` label.
pub const N_ACTIVITIES: usize = CATALOG.len();

/// One of the 36 activities. Ordering follows the label.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Activity(u8);

macro_rules! named {
    ($($name:ident = $label:literal),* $(,)?) => {
        impl Activity {
            $(pub const $name: Activity = Activity::const_from_label($label);)*
        }
    };
}

named! {
    ADD_NOMINATION = "add_nomination",
    APPROVE_NOMINATION = "approve_nomination",
    APPROVE_WITH_CORRECTION = "approve_with_correction",
    DISAMBIG_DEFECTS = "disambig_defects",
    DISAMBIG_FEEDBACK = "disambig_feedback",
    DISAMBIG_MIP_DATA = "disambig_mip_data",
    DISAMBIG_PROJECT_DATA = "disambig_project_data",
    END = "end",
    FALLBACK = "fallback",
    PROVIDE_CANDIDATE_NAME = "provide_candidate_name",
    REJECT_NOMINATION = "reject_nomination",
    REVIEW_NOMINATED_CANDIDATE = "review_nominated_candidate",
    SELECT_CANDIDATE_NAME = "select_candidate_name",
    SUBMIT_FINAL_NOMINATIONS = "submit_final_nominations",
    SUBMIT_NOMINATION = "submit_nomination",
    VIEW_NOMINATION = "view_nomination",
    REPORT_MIP_CRITERIA = "report_mip_criteria",
    REPORT_YEARLY_ASSESSMENTS = "report_yearly_assessments",
    REPORT_MIP_HISTORY = "report_mip_history",
    REPORT_CLIENT_FEEDBACK = "report_client_feedback",
    REPORT_INTERNAL_FEEDBACK = "report_internal_feedback",
    REPORT_PROJECT_ASSESSMENTS = "report_project_assessments",
    REPORT_PROJECT_COSTS = "report_project_costs",
    REPORT_PRODUCT_DEFECTS = "report_product_defects",
    REPORT_DEFECTS_REPAIR_TIME = "report_defects_repair_time",
    REPORT_LEAD_TIME = "report_lead_time",
    REPORT_LEARNING_ACTIVITIES = "report_learning_activities",
    REPORT_COMPENSATION = "report_compensation",
    REPORT_OVERTIME = "report_overtime",
    REPORT_INNOVATION_AND_PATENTS = "report_innovation_and_patents",
    REPORT_SPRINTS_VELOCITY = "report_sprints_velocity",
    REPORT_BUGS_FIXED = "report_bugs_fixed",
    REPORT_PULL_REQUESTS = "report_pull_requests",
    REPORT_FEATURES_SHIPPED = "report_features_shipped",
    REPORT_CODE_CHURN = "report_code_churn",
    REPORT_ABSENCE = "report_absence",
}

const fn str_eq(a: &str, b: &str) -> bool {
    let (a, b) = (a.as_bytes(), b.as_bytes());
    if a.len() != b.len() {
        return false;
    }
    let mut i = 0;
    while i < a.len() {
        if a[i] != b[i] {
            return false;
        }
        i += 1;
    }
    true
}

impl Activity {
    const fn const_from_label(label: &str) -> Activity {
        let mut i = 0;
        while i < CATALOG.len() {
            if str_eq(CATALOG[i].label, label) {
                return Activity(i as u8);
            }
            i += 1;
        }
        panic!("label not in catalog");
    }

    /// Looks up an activity by its label.
    pub fn from_label(label: &str) -> Result<Activity, DomainError> {
        CATALOG
            .binary_search_by(|e| e.label.cmp(label))
            .map(|i| Activity(i as u8))
            .map_err(|_| DomainError::UnknownActivity(label.to_string()))
    }

    /// Activity at position `index` of the catalog.
    pub fn from_index(index: usize) -> Option<Activity> {
        (index < N_ACTIVITIES).then_some(Activity(index as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn label(self) -> &'static str {
        CATALOG[self.index()].label
    }

    pub fn kind(self) -> ActivityKind {
        CATALOG[self.index()].kind
    }

    /// The role that performs this task, for role-specific task activities.
    pub fn owner(self) -> Option<Role> {
        CATALOG[self.index()].owner
    }

    /// Fallbacks, disambiguations and the session end never get recommended.
    pub fn is_undesirable(self) -> bool {
        matches!(self.kind(), Fallback | Disambiguation | End)
    }

    pub fn is_report(self) -> bool {
        self.kind() == ReportView
    }

    /// One of the three per-nominee approval decisions.
    pub fn is_decision(self) -> bool {
        matches!(
            self,
            Activity::APPROVE_NOMINATION | Activity::APPROVE_WITH_CORRECTION | Activity::REJECT_NOMINATION
        )
    }

    /// All activities, in catalog order.
    pub fn all() -> impl ExactSizeIterator<Item = Activity> + Clone {
        (0..N_ACTIVITIES as u8).map(Activity)
    }
}

impl fmt::Debug for Activity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl fmt::Display for Activity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Activity {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Activity::from_label(s)
    }
}

impl Serialize for Activity {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for Activity {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let label = String::deserialize(d)?;
        Activity::from_label(&label).map_err(serde::de::Error::custom)
    }
}

/// The full catalog in its stable lexicographic order.
pub fn activity_catalog() -> Vec<Activity> {
    Activity::all().collect()
}

/// Checked form of [`Activity::is_undesirable`] for labels coming from outside.
pub fn is_undesirable(label: &str) -> Result<bool, DomainError> {
    Activity::from_label(label).map(Activity::is_undesirable)
}
