//! Plans and plays out the conversations of one case.

use std::collections::VecDeque;

use chrono::{Duration, NaiveDateTime, Timelike};
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Exp, Geometric, LogNormal, Poisson};

use super::names::session_token;
use super::nlu::{self, draw_decision, inject_disambiguation, inject_fallbacks};
use super::utterances::{self, compose_utterance, fill_name, WELCOME_RESPONSE};
use super::{CaseContext, Phase, SessionPlan, UserIdentity};
use crate::domain::{Activity, CohortProfile, Role, SimulationConfig};
use crate::log_io::TurnRecord;

/// One planned user utterance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    View(Activity),
    AddNomination(usize),
    ProvideName(usize),
    ViewNomination,
    SubmitNomination,
    Review(usize),
    SelectName(usize),
    Decide(usize, Activity),
    SubmitFinal,
}

impl Step {
    pub fn activity(self) -> Activity {
        match self {
            Step::View(a) | Step::Decide(_, a) => a,
            Step::AddNomination(_) => Activity::ADD_NOMINATION,
            Step::ProvideName(_) => Activity::PROVIDE_CANDIDATE_NAME,
            Step::ViewNomination => Activity::VIEW_NOMINATION,
            Step::SubmitNomination => Activity::SUBMIT_NOMINATION,
            Step::Review(_) => Activity::REVIEW_NOMINATED_CANDIDATE,
            Step::SelectName(_) => Activity::SELECT_CANDIDATE_NAME,
            Step::SubmitFinal => Activity::SUBMIT_FINAL_NOMINATIONS,
        }
    }
}

/// Steps that always happen back to back within one conversation
/// (a slot-filling prompt and its answer, for instance).
type Unit = Vec<Step>;

/// Orders `items` by successive weighted draws without replacement.
fn weighted_order<R: Rng + ?Sized>(items: &[(Activity, f64)], rng: &mut R) -> Vec<Activity> {
    let mut pool = items.to_vec();
    let mut out = Vec::with_capacity(pool.len());
    while !pool.is_empty() {
        let total: f64 = pool.iter().map(|(_, w)| w).sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = pool.len() - 1;
        for (i, (_, w)) in pool.iter().enumerate() {
            if u < *w {
                pick = i;
                break;
            }
            u -= w;
        }
        out.push(pool.remove(pick).0);
    }
    out
}

/// Inserts `items` (in order) at uniformly drawn positions of `seq` at or after `from`.
fn insert_ordered<R: Rng + ?Sized>(seq: Vec<Unit>, items: Vec<Unit>, from: usize, rng: &mut R) -> Vec<Unit> {
    let len = seq.len();
    let mut positions: Vec<usize> = (0..items.len()).map(|_| rng.random_range(from..=len)).collect();
    positions.sort_unstable();
    let mut out = Vec::with_capacity(len + items.len());
    let mut items = items.into_iter().zip(positions).peekable();
    for (i, unit) in seq.into_iter().enumerate() {
        while let Some((item, _)) = items.next_if(|(_, p)| *p == i) {
            out.push(item);
        }
        out.push(unit);
    }
    out.extend(items.map(|(item, _)| item));
    out
}

/// Report views for one user: weighted first-view order, then repeat views
/// scattered after each first view.
fn plan_views<R: Rng + ?Sized>(
    reports: &[Activity],
    role: Role,
    config: &SimulationConfig,
    rng: &mut R,
) -> Vec<Activity> {
    let weighted: Vec<(Activity, f64)> = reports
        .iter()
        .map(|&a| (a, config.report_for(a).map_or(0.5, |r| r.p_view(role)).max(1e-3)))
        .collect();
    let mut seq = weighted_order(&weighted, rng);
    let repeats = Geometric::new(config.repeat_view_success_prob).unwrap();
    for &a in reports {
        for _ in 0..repeats.sample(rng) {
            let first = seq.iter().position(|&x| x == a).unwrap();
            let at = rng.random_range(first + 1..=seq.len());
            seq.insert(at, a);
        }
    }
    seq
}

pub(crate) fn plan_nomination<R: Rng + ?Sized>(ctx: &CaseContext, config: &SimulationConfig, rng: &mut R) -> Vec<Unit> {
    let views = plan_views(&ctx.team_leader_reports, Role::TeamLeader, config, rng);
    let mandatory_done = [Activity::REPORT_MIP_CRITERIA, Activity::REPORT_YEARLY_ASSESSMENTS]
        .iter()
        .filter_map(|m| views.iter().position(|v| v == m))
        .max()
        .map_or(0, |p| p + 1);
    let seq: Vec<Unit> = views.into_iter().map(|a| vec![Step::View(a)]).collect();
    let nominations: Vec<Unit> = (0..ctx.nominees.len())
        .map(|i| vec![Step::AddNomination(i), Step::ProvideName(i)])
        .collect();
    let mut seq = insert_ordered(seq, nominations, mandatory_done, rng);
    let last_add = seq.iter().rposition(|u| matches!(u[0], Step::AddNomination(_))).unwrap();
    let at = rng.random_range(last_add + 1..=seq.len());
    seq.insert(at, vec![Step::ViewNomination]);
    seq.push(vec![Step::SubmitNomination]);
    seq
}

pub(crate) fn plan_approval<R: Rng + ?Sized>(ctx: &CaseContext, config: &SimulationConfig, rng: &mut R) -> Vec<Unit> {
    let views = plan_views(&ctx.dept_manager_reports, Role::DepartmentManager, config, rng);
    let seq: Vec<Unit> = views.into_iter().map(|a| vec![Step::View(a)]).collect();
    let decisions: Vec<Unit> = (0..ctx.nominees.len())
        .map(|i| {
            vec![
                Step::Review(i),
                Step::SelectName(i),
                Step::Decide(i, draw_decision(&config.decision_probs, rng)),
            ]
        })
        .collect();
    let mut seq = insert_ordered(seq, decisions, 0, rng);
    seq.push(vec![Step::SubmitFinal]);
    seq
}

/// Planned number of conversations: one plus a Poisson draw. Abandoned
/// conversations add to this.
fn conversation_count<R: Rng + ?Sized>(profile: &CohortProfile, rng: &mut R) -> usize {
    let lambda = (profile.mean_conversations_per_case - 1.0).max(0.0);
    let extra = if lambda > 0.0 { Poisson::new(lambda).unwrap().sample(rng) as usize } else { 0 };
    1 + extra
}

/// Splits the plan into `n` non-empty consecutive chunks at random cut points.
fn split<R: Rng + ?Sized>(plan: Vec<Unit>, n: usize, rng: &mut R) -> VecDeque<Vec<Unit>> {
    let n = n.clamp(1, plan.len());
    let mut cuts: Vec<usize> = index::sample(rng, plan.len() - 1, n - 1).into_iter().map(|c| c + 1).collect();
    cuts.sort_unstable();
    let mut chunks = VecDeque::with_capacity(n);
    let mut rest = plan;
    for &c in cuts.iter().rev() {
        let tail = rest.split_off(c);
        chunks.push_front(tail);
    }
    chunks.push_front(rest);
    chunks
}

fn trunc_secs(t: NaiveDateTime) -> NaiveDateTime {
    t.with_nanosecond(0).unwrap()
}

/// Appends rows of one conversation, stamping turn numbers and times.
struct SessionWriter<'a> {
    config: &'a SimulationConfig,
    rows: Vec<TurnRecord>,
    template: TurnRecord,
    clock: NaiveDateTime,
    turn: u32,
}

impl<'a> SessionWriter<'a> {
    fn open(
        config: &'a SimulationConfig,
        case_id: u32,
        user: &UserIdentity,
        session_id: String,
        start: NaiveDateTime,
    ) -> Self {
        let welcome = TurnRecord {
            case_id,
            session_id,
            role: user.role,
            user_id: user.user_id.clone(),
            timestamp: start,
            turn: 0,
            activity: None,
            user_utterance: String::new(),
            chatbot_response: WELCOME_RESPONSE.to_string(),
            intent: None,
            intent_confidence: None,
            entity: None,
            entity_confidence: None,
            score: None,
            expecting_response: true,
        };
        SessionWriter { config, rows: vec![welcome.clone()], template: welcome, clock: start, turn: 0 }
    }

    fn gap<R: Rng + ?Sized>(&self, rng: &mut R) -> Duration {
        let g = &self.config.turn_gap;
        let secs = LogNormal::new(g.median_seconds.ln(), g.sigma).unwrap().sample(rng).ceil().max(1.0);
        let limit = self.clock.date().and_time(self.config.calendar.evening_limit);
        let room = (limit - self.clock).num_seconds().max(1);
        Duration::seconds((secs as i64).min(room))
    }

    fn push<R: Rng + ?Sized>(&mut self, mut row: TurnRecord, rng: &mut R) {
        self.turn += 1;
        self.clock += self.gap(rng);
        row.turn = self.turn;
        row.timestamp = self.clock;
        self.rows.push(row);
    }

    fn planned_row<R: Rng + ?Sized>(&self, step: Step, nominees: &[String], rng: &mut R) -> TurnRecord {
        let config = self.config;
        let activity = step.activity();
        let mut row = TurnRecord { activity: Some(activity), ..self.template.clone() };
        let template = compose_utterance(activity.label(), rng).unwrap();
        match step {
            Step::ProvideName(i) | Step::SelectName(i) => {
                row.user_utterance = fill_name(&template, &nominees[i]);
                row.entity = Some(nominees[i].clone());
                row.entity_confidence = Some(nlu::entity_confidence(&config.nlu, rng));
            }
            _ => {
                let confidence = nlu::recognized_confidence(&config.nlu, rng);
                row.user_utterance = template;
                row.intent = Some(activity);
                row.intent_confidence = Some(confidence);
                row.score = Some(nlu::score_for(confidence, &config.nlu, rng));
            }
        }
        row.chatbot_response = match config.report_for(activity) {
            Some(r) => r.response_stub(),
            None => utterances::response_stub(activity).to_string(),
        };
        row.expecting_response =
            matches!(step, Step::AddNomination(_) | Step::Review(_) | Step::SelectName(_));
        row
    }

    fn play<R: Rng + ?Sized>(&mut self, step: Step, nominees: &[String], profile: &CohortProfile, rng: &mut R) {
        let row = self.planned_row(step, nominees, rng);
        match inject_disambiguation(&row, self.config, rng) {
            Some((prompt, resolved)) => {
                for r in inject_fallbacks(prompt, profile, self.config, rng) {
                    self.push(r, rng);
                }
                self.push(resolved, rng);
            }
            None => {
                for r in inject_fallbacks(row, profile, self.config, rng) {
                    self.push(r, rng);
                }
            }
        }
    }
}

/// Plays one user's planned conversations for a case.
///
/// Returns the rows and the timestamp of the last turn.
#[allow(clippy::too_many_arguments)]
fn play_phase<R: Rng + ?Sized>(
    ctx: &CaseContext,
    user: &UserIdentity,
    plan: Vec<Unit>,
    anchor: NaiveDateTime,
    config: &SimulationConfig,
    rng: &mut R,
    sessions_out: &mut Vec<SessionPlan>,
) -> (Vec<TurnRecord>, NaiveDateTime) {
    let cal = &config.calendar;
    let profile = config.cohort(user.role, user.cohort);
    let interval = Exp::new(1.0 / profile.mean_intersession_interval_wd).unwrap();
    let n = conversation_count(profile, rng);
    let mut chunks = split(plan, n, rng);
    let mut rows = Vec::new();
    let mut prev_end = anchor;

    while let Some(mut chunk) = chunks.pop_front() {
        let mut start = trunc_secs(cal.add_working_time(prev_end, interval.sample(rng)));
        if start <= prev_end {
            start = prev_end + Duration::seconds(1);
        }
        let forced = start >= cal.hard_deadline;
        if forced {
            chunk.extend(chunks.drain(..).flatten());
            let settle = Duration::seconds(rng.random_range(5 * 60..=60 * 60));
            start = cal.hard_deadline.max(prev_end + settle);
        }
        let mut writer = SessionWriter::open(config, ctx.case_id, user, session_token(rng), start);
        let mut done = chunk.len();
        if !forced && chunk.len() >= 2 && rng.random_bool(profile.p_abandon_session) {
            done = rng.random_range(1..chunk.len());
        }
        let leftover = chunk.split_off(done);
        sessions_out.push(SessionPlan {
            session_id: writer.template.session_id.clone(),
            activities: chunk.iter().flatten().map(|s| s.activity()).collect(),
            start,
        });
        for step in chunk.into_iter().flatten() {
            writer.play(step, &ctx.nominees, profile, rng);
        }
        prev_end = writer.clock;
        rows.extend(writer.rows);
        // the user comes back later to finish what the abandoned conversation left open
        if !leftover.is_empty() {
            chunks.push_front(leftover);
        }
    }
    (rows, prev_end)
}

/// Simulates both phases of a case and returns its rows in time order.
pub fn simulate_case<R: Rng + ?Sized>(ctx: &CaseContext, config: &SimulationConfig, rng: &mut R) -> Vec<TurnRecord> {
    simulate_case_with_plans(ctx, config, rng).0
}

pub(crate) fn simulate_case_with_plans<R: Rng + ?Sized>(
    ctx: &CaseContext,
    config: &SimulationConfig,
    rng: &mut R,
) -> (Vec<TurnRecord>, Vec<SessionPlan>) {
    let mut ctx = ctx.clone();
    let mut plans = Vec::new();
    let nomination = plan_nomination(&ctx, config, rng);
    let approval = plan_approval(&ctx, config, rng);

    let (mut rows, _) = play_phase(
        &ctx,
        &ctx.team_leader,
        nomination,
        config.calendar.process_start,
        config,
        rng,
        &mut plans,
    );
    ctx.phase = Phase::Approval;
    let submitted = rows
        .iter()
        .rfind(|r| r.activity == Some(Activity::SUBMIT_NOMINATION))
        .map(|r| r.timestamp)
        .expect("nomination plan ends with a submission");
    let (dm_rows, _) = play_phase(&ctx, &ctx.dept_manager, approval, submitted, config, rng, &mut plans);
    rows.extend(dm_rows);
    ctx.phase = Phase::Done;
    (rows, plans)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn insert_ordered_keeps_both_orders() {
        let mut r = rng::stream(1, 1);
        for _ in 0..200 {
            let seq: Vec<Unit> = (0..6).map(|i| vec![Step::Review(i)]).collect();
            let items: Vec<Unit> = (0..3).map(|i| vec![Step::SelectName(i)]).collect();
            let out = insert_ordered(seq, items, 2, &mut r);
            assert_eq!(out.len(), 9);
            let reviews: Vec<_> = out.iter().filter_map(|u| match u[0] { Step::Review(i) => Some(i), _ => None }).collect();
            let selects: Vec<_> = out.iter().filter_map(|u| match u[0] { Step::SelectName(i) => Some(i), _ => None }).collect();
            assert_eq!(reviews, (0..6).collect::<Vec<_>>());
            assert_eq!(selects, (0..3).collect::<Vec<_>>());
            let first_select = out.iter().position(|u| matches!(u[0], Step::SelectName(_))).unwrap();
            assert!(first_select >= 2);
        }
    }

    #[test]
    fn split_makes_nonempty_chunks() {
        let mut r = rng::stream(2, 2);
        for n in 1..12 {
            let plan: Vec<Unit> = (0..7).map(|i| vec![Step::Review(i)]).collect();
            let chunks = split(plan, n, &mut r);
            assert_eq!(chunks.len(), n.min(7));
            assert!(chunks.iter().all(|c| !c.is_empty()));
            let flat: Vec<_> = chunks.into_iter().flatten().collect();
            assert_eq!(flat.len(), 7);
        }
    }

    #[test]
    fn weighted_order_is_a_permutation() {
        let mut r = rng::stream(3, 3);
        let items: Vec<(Activity, f64)> = Activity::all().filter(|a| a.is_report()).map(|a| (a, 0.5)).collect();
        let mut out = weighted_order(&items, &mut r);
        out.sort();
        assert_eq!(out, items.iter().map(|i| i.0).collect::<Vec<_>>());
    }
}
