//! Fixed utterance templates and chatbot response stubs.
//!
//! Slot-filling templates contain a `{name}` placeholder that is replaced by
//! the candidate's name.

use rand::Rng;

use crate::domain::Activity;
use crate::error::DomainError;

pub fn templates(activity: Activity) -> &'static [&'static str] {
    match activity.label() {
        "add_nomination" => &[
            "add nomination",
            "I want to nominate someone",
            "nominate an employee",
            "new MIP nomination",
            "add a candidate to MIP",
            "start a nomination",
        ],
        "approve_nomination" => &["approve", "approve this nomination", "yes, approve", "I approve the candidate", "accept nomination"],
        "approve_with_correction" => &[
            "approve with correction",
            "approve but change the amount",
            "approve with a smaller increase",
            "correct the amount and approve",
            "approve with changes",
        ],
        "disambig_defects" => &["I need defects report", "defects report", "show defects", "defects data please", "open the defects report"],
        "disambig_feedback" => &["show feedback report", "feedback report", "feedback please", "I need the feedback", "open feedback"],
        "disambig_mip_data" => &["MIP data", "show MIP data", "MIP report", "open MIP info", "I need MIP data"],
        "disambig_project_data" => &["view project data", "project data", "show project report", "project info please", "open project data"],
        "end" => &["bye", "thanks, that's all", "done for now", "goodbye", "that is everything"],
        "fallback" => &["hmm", "what about the other thing", "can you do the usual", "the numbers from before", "umm help", "next one"],
        "provide_candidate_name" => &["{name}", "nominate {name}", "the candidate is {name}", "{name} please", "it is {name}"],
        "reject_nomination" => &["reject", "reject this nomination", "no, decline it", "I reject the candidate", "decline nomination"],
        "report_absence" => &["show absence report", "absence data", "view absences", "who was absent", "open absence report"],
        "report_bugs_fixed" => &["bugs fixed", "show fixed bugs", "view bugs fixed report", "how many bugs were fixed", "open bug fixes"],
        "report_client_feedback" => &["client feedback", "show client feedback", "view customer feedback", "what do clients say", "open client feedback report"],
        "report_code_churn" => &["code churn", "show code churn", "view churn report", "how much code churn", "open code churn report"],
        "report_compensation" => &["compensation report", "show compensation", "view salaries", "current compensation", "open compensation data"],
        "report_defects_repair_time" => &["defects repair time", "show repair time", "how long to fix defects", "view defect repair times", "open repair time report"],
        "report_features_shipped" => &["features shipped", "show shipped features", "view delivered features", "what features shipped", "open features report"],
        "report_innovation_and_patents" => &["innovation and patents", "show patents", "view innovation report", "list patents", "open innovation data"],
        "report_internal_feedback" => &["internal feedback", "show internal feedback", "view peer feedback", "what do colleagues say", "open internal feedback report"],
        "report_lead_time" => &["view lead time table", "lead time", "show lead time", "lead time report", "open lead times"],
        "report_learning_activities" => &["learning activities", "show trainings", "view learning report", "courses completed", "open learning activities"],
        "report_mip_criteria" => &["MIP criteria", "show MIP criteria", "what are the MIP rules", "view eligibility criteria", "open MIP criteria report"],
        "report_mip_history" => &["MIP history", "show MIP history", "past MIP results", "view previous MIP", "open MIP history report"],
        "report_overtime" => &["overtime", "show overtime", "view overtime hours", "overtime report", "open overtime data"],
        "report_product_defects" => &["product defects", "show product defects", "view defect counts", "defects in products", "open product defects report"],
        "report_project_assessments" => &["project assessments", "show project assessments", "view project evaluations", "project ratings", "open project assessment report"],
        "report_project_costs" => &["project costs", "show project costs", "view project budget", "cost report", "open project costs"],
        "report_pull_requests" => &["pull requests", "show pull requests", "view PRs", "PR statistics", "open pull request report"],
        "report_sprints_velocity" => &["sprints velocity", "show velocity", "view sprint velocity", "team velocity", "open velocity report"],
        "report_yearly_assessments" => &["yearly assessments", "show yearly assessments", "annual reviews", "view yearly ratings", "open yearly assessment report"],
        "review_nominated_candidate" => &["review nominations", "review candidate", "show nominated candidates", "check nominees", "review the nomination"],
        "select_candidate_name" => &["{name}", "select {name}", "open {name}", "{name} please", "candidate {name}"],
        "submit_final_nominations" => &["submit final nominations", "finalize nominations", "send final decisions", "submit my decisions", "complete approval"],
        "submit_nomination" => &["submit nomination", "submit my nominations", "send nominations", "I'm done nominating", "submit to manager"],
        "view_nomination" => &["view nomination", "show my nominations", "list nominees", "what did I nominate", "check nominations"],
        other => unreachable!("activity {other} has no templates"),
    }
}

/// Picks one template for `intent` uniformly at random.
pub fn compose_utterance<R: Rng + ?Sized>(intent: &str, rng: &mut R) -> Result<String, DomainError> {
    let activity = Activity::from_label(intent)?;
    let set = templates(activity);
    Ok(set[rng.random_range(0..set.len())].to_string())
}

pub(crate) fn fill_name(template: &str, name: &str) -> String {
    template.replace("{name}", name)
}

pub const WELCOME_RESPONSE: &str = "Welcome Message";

/// Response stub for non-report activities.
pub(crate) fn response_stub(activity: Activity) -> &'static str {
    match activity.label() {
        "fallback" => "Fallback Message",
        "add_nomination" | "review_nominated_candidate" => "Candidate Name Request",
        "provide_candidate_name" => "Nomination Added",
        "view_nomination" => "Nomination List",
        "submit_nomination" => "Nominations Submitted",
        "select_candidate_name" => "Candidate Details",
        "approve_nomination" | "approve_with_correction" | "reject_nomination" => "Decision Recorded",
        "submit_final_nominations" => "Final Nominations Submitted",
        l if l.starts_with("disambig_") => "Disambiguation Options",
        _ => "Report",
    }
}
