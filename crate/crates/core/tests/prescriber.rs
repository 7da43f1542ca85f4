use std::collections::BTreeSet;
use std::sync::OnceLock;

use chrono::Duration;
use ipa_ppm::domain::{default_config, Activity, BusinessCalendar};
use ipa_ppm::features::{FeatureRegime, Featurizer, Task};
use ipa_ppm::learners::{train, GbdtHyper, Hyper, Learner, Model};
use ipa_ppm::log_io::EventLog;
use ipa_ppm::prescriber::*;
use ipa_ppm::simulator::simulate_cases;
use ipa_ppm::PrescribeError;
use proptest::prelude::*;

struct Fixture {
    log: EventLog,
    next: Model,
    late: Model,
}

fn hyper() -> Hyper {
    Hyper { gbdt: GbdtHyper { n_trees: 15, max_depth: 4, ..Default::default() }, ..Default::default() }
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let cal = BusinessCalendar::default();
        let train_log = simulate_cases(&default_config(), 31, 150).unwrap();
        let next = Featurizer::new(FeatureRegime::PA_CONV, Task::NextActivity).next_activity_dataset(&train_log).unwrap();
        let late = Featurizer::new(FeatureRegime::PA_USER, Task::Lateness)
            .lateness_dataset(&train_log, cal.regular_deadline, false)
            .unwrap();
        Fixture {
            log: simulate_cases(&default_config(), 32, 10).unwrap(),
            next: train(&next, Learner::Gbdt, &hyper(), 1).unwrap(),
            late: train(&late, Learner::Gbdt, &hyper(), 1).unwrap(),
        }
    })
}

fn engines(f: &Fixture) -> Engines<'_> {
    Engines { next_activity: Some(&f.next), lateness: Some(&f.late) }
}

fn user_rows(log: &EventLog) -> Vec<usize> {
    (0..log.len()).filter(|&i| !log.records()[i].is_welcome()).collect()
}

#[test]
fn recommendations_never_contain_undesirable_activities() {
    let f = fixture();
    for i in user_rows(&f.log) {
        let rec = recommend_next(&f.next, &f.log, i, FeatureRegime::PA_CONV, 3).unwrap();
        assert_eq!(rec.ranked.len(), 3);
        assert!(rec.ranked.windows(2).all(|w| w[0].probability >= w[1].probability));
        for r in &rec.ranked {
            assert!(!Activity::from_label(&r.activity).unwrap().is_undesirable(), "{}", r.activity);
        }
    }
}

#[test]
fn mismatched_models_are_rejected() {
    let f = fixture();
    let row = user_rows(&f.log)[0];
    assert!(matches!(
        recommend_next(&f.next, &f.log, row, FeatureRegime::PA_USER, 3),
        Err(PrescribeError::RegimeMismatch { .. })
    ));
    assert!(matches!(
        recommend_next(&f.late, &f.log, row, FeatureRegime::PA_USER, 3),
        Err(PrescribeError::TaskMismatch { .. })
    ));
    let cal = BusinessCalendar::default();
    assert!(matches!(
        assess_lateness(&f.next, &f.log, row, FeatureRegime::PA_CONV, 0.5, &cal),
        Err(PrescribeError::TaskMismatch { .. })
    ));
    assert!(matches!(
        assess_lateness(&f.late, &f.log, row, FeatureRegime::PA_USER, 1.5, &cal),
        Err(PrescribeError::InvalidThreshold(_))
    ));
}

#[test]
fn thresholds_at_the_extremes() {
    let f = fixture();
    let cal = BusinessCalendar::default();
    for i in user_rows(&f.log) {
        let a = assess_lateness(&f.late, &f.log, i, FeatureRegime::PA_USER, 0.0, &cal).unwrap();
        assert!(a.intervene && a.action.is_some());
        let b = assess_lateness(&f.late, &f.log, i, FeatureRegime::PA_USER, 1.0, &cal).unwrap();
        assert!(b.risk_probability < 1.0);
        assert!(!b.intervene && b.action.is_none());
    }
}

#[test]
fn turns_after_completion_cannot_be_assessed() {
    let f = fixture();
    let mut records = f.log.records().to_vec();
    let last = records.iter().rposition(|r| r.activity == Some(Activity::SUBMIT_FINAL_NOMINATIONS)).unwrap();
    let mut extra = records[last].clone();
    extra.turn += 1;
    extra.timestamp += Duration::seconds(30);
    extra.activity = Some(Activity::REPORT_LEAD_TIME);
    extra.intent = Some(Activity::REPORT_LEAD_TIME);
    records.push(extra);
    let log = EventLog::sorted(records);
    let row = (0..log.len())
        .find(|&i| {
            let r = &log.records()[i];
            r.activity == Some(Activity::REPORT_LEAD_TIME) && log.completion_time(r.case_id).unwrap() < r.timestamp
        })
        .unwrap();
    let cal = BusinessCalendar::default();
    assert!(matches!(
        assess_lateness(&f.late, &log, row, FeatureRegime::PA_USER, 0.5, &cal),
        Err(PrescribeError::CaseCompleted(r)) if r == row
    ));
    let lines = prescribe_batch(engines(f), &log, Mode::Both, &BatchOptions::default()).unwrap();
    let extra_line = lines.iter().find(|l| l.turn == log.records()[row].turn && l.session_id == log.records()[row].session_id).unwrap();
    assert!(extra_line.assessment.is_none() && extra_line.recommendations.is_some());
}

#[test]
fn batch_in_both_modes_covers_every_user_turn_in_order() {
    let f = fixture();
    let lines = prescribe_batch(engines(f), &f.log, Mode::Both, &BatchOptions::default()).unwrap();
    assert_eq!(lines.len(), user_rows(&f.log).len());
    assert!(lines.iter().all(|l| l.recommendations.is_some() && l.assessment.is_some()));
    let keys: Vec<_> = lines.iter().map(|l| (l.case_id, l.timestamp.clone(), l.turn)).collect();
    assert!(keys.windows(2).all(|w| w[0] <= w[1]));

    // batch answers equal the single-anchor ones
    let cal = BusinessCalendar::default();
    for i in user_rows(&f.log).into_iter().step_by(17) {
        let r = &f.log.records()[i];
        let same = lines.iter().find(|l| l.session_id == r.session_id && l.turn == r.turn).unwrap();
        let rec = recommend_next(&f.next, &f.log, i, FeatureRegime::PA_CONV, 3).unwrap();
        assert_eq!(same.recommendations.as_ref().unwrap(), &rec.ranked);
        let a = assess_lateness(&f.late, &f.log, i, FeatureRegime::PA_USER, 0.5, &cal).unwrap();
        assert_eq!(same.assessment.as_ref().unwrap().risk_probability, a.risk_probability);
    }
}

#[test]
fn flag_only_keeps_interventions() {
    let f = fixture();
    let options = BatchOptions { flag_only: true, threshold: 0.3, ..Default::default() };
    let flagged = prescribe_batch(engines(f), &f.log, Mode::Goal, &options).unwrap();
    assert!(flagged.iter().all(|l| l.assessment.as_ref().unwrap().intervene && l.recommendations.is_none()));
    let all = prescribe_batch(engines(f), &f.log, Mode::Goal, &BatchOptions { threshold: 0.3, ..Default::default() }).unwrap();
    assert_eq!(flagged.len(), all.iter().filter(|l| l.assessment.as_ref().unwrap().intervene).count());
    assert!(matches!(
        prescribe_batch(engines(f), &f.log, Mode::Crowd, &options),
        Err(PrescribeError::FlagWithoutGoal)
    ));
}

#[test]
fn missing_models_are_errors() {
    let f = fixture();
    let only_next = Engines { next_activity: Some(&f.next), lateness: None };
    assert!(matches!(
        prescribe_batch(only_next, &f.log, Mode::Both, &BatchOptions::default()),
        Err(PrescribeError::MissingModel("goal"))
    ));
    assert!(prescribe_batch(only_next, &f.log, Mode::Crowd, &BatchOptions::default()).is_ok());
    let swapped = Engines { next_activity: Some(&f.late), lateness: Some(&f.next) };
    assert!(matches!(
        prescribe_batch(swapped, &f.log, Mode::Crowd, &BatchOptions::default()),
        Err(PrescribeError::TaskMismatch { .. })
    ));
}

#[test]
fn reports_are_byte_identical_across_runs_and_thread_counts() {
    let f = fixture();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let lines = prescribe_batch(engines(f), &f.log, Mode::Both, &BatchOptions::default()).unwrap();
            let mut out = Vec::new();
            write_jsonl(&lines, &mut out).unwrap();
            out
        })
    };
    let one = run(1);
    assert_eq!(one, run(3));
    let text = String::from_utf8(one).unwrap();
    let first: ReportLine = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first.recommendations.unwrap().len(), 3);
}

fn distribution() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, 36).prop_map(|raw| {
        let total: f64 = raw.iter().sum::<f64>().max(1e-9);
        raw.into_iter().map(|v| v / total).collect()
    })
}

fn catalog() -> Vec<String> {
    Activity::all().map(|a| a.label().to_string()).collect()
}

proptest! {
    #[test]
    fn filtering_is_idempotent(p in distribution(), k in 1usize..40) {
        let labels = catalog();
        let once = renormalize_desirable(&labels, &p).unwrap();
        prop_assert!((once.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        let (twice, direct) = (rank_desirable(&labels, &once, k).unwrap(), rank_desirable(&labels, &p, k).unwrap());
        prop_assert_eq!(twice.len(), direct.len());
        for (x, y) in twice.iter().zip(&direct) {
            prop_assert_eq!(&x.activity, &y.activity);
            prop_assert!((x.probability - y.probability).abs() < 1e-12);
        }
    }

    #[test]
    fn ranking_ignores_a_common_scale(p in distribution(), scale in 0.01f64..100.0) {
        let labels = catalog();
        let scaled: Vec<f64> = p
            .iter()
            .zip(Activity::all())
            .map(|(&v, a)| if a.is_undesirable() { v } else { v * scale })
            .collect();
        let names = |r: Vec<RankedActivity>| r.into_iter().map(|x| x.activity).collect::<Vec<_>>();
        prop_assert_eq!(names(rank_desirable(&labels, &scaled, 5).unwrap()), names(rank_desirable(&labels, &p, 5).unwrap()));
    }

    #[test]
    fn higher_thresholds_flag_subsets(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let f = fixture();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let flagged = |t: f64| -> BTreeSet<(String, u32)> {
            let options = BatchOptions { threshold: t, flag_only: true, ..Default::default() };
            prescribe_batch(engines(f), &f.log, Mode::Goal, &options)
                .unwrap()
                .into_iter()
                .map(|l| (l.session_id, l.turn))
                .collect()
        };
        prop_assert!(flagged(hi).is_subset(&flagged(lo)));
    }
}
