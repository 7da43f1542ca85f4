//! Conversation-engine signals: confidences, fallbacks, disambiguation.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::utterances::{self, compose_utterance};
use crate::domain::{Activity, CohortProfile, DecisionProbs, NluParams, SimulationConfig};
use crate::log_io::TurnRecord;

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

fn uniform<R: Rng + ?Sized>(range: (f64, f64), rng: &mut R) -> f64 {
    round3(rng.random_range(range.0..range.1))
}

/// Orchestrator score derived from an intent confidence.
pub fn score_for<R: Rng + ?Sized>(confidence: f64, nlu: &NluParams, rng: &mut R) -> f64 {
    let noise = if nlu.score_noise_sd > 0.0 {
        Normal::new(0.0, nlu.score_noise_sd).unwrap().sample(rng)
    } else {
        0.0
    };
    round3((nlu.score_scale * confidence + noise).clamp(0.0, 1.0))
}

pub fn recognized_confidence<R: Rng + ?Sized>(nlu: &NluParams, rng: &mut R) -> f64 {
    uniform(nlu.recognized_confidence, rng)
}

pub fn entity_confidence<R: Rng + ?Sized>(nlu: &NluParams, rng: &mut R) -> f64 {
    if rng.random_bool(nlu.entity_certain_prob) {
        1.0
    } else {
        uniform((nlu.entity_confidence_floor, 1.0), rng)
    }
}

/// Number of failed recognitions before an utterance gets through:
/// geometric with success probability `1 - p_fallback`, capped at `cap`.
pub fn fallback_count<R: Rng + ?Sized>(p_fallback: f64, cap: u32, rng: &mut R) -> u32 {
    let mut k = 0;
    while k < cap && rng.random_bool(p_fallback) {
        k += 1;
    }
    k
}

/// Prepends fallback turns to a planned user turn.
///
/// Returns the fallback rows followed by `planned` itself. Turn numbers and
/// timestamps are copied from `planned`; the session writer restamps them
/// when the rows are appended.
pub fn inject_fallbacks<R: Rng + ?Sized>(
    planned: TurnRecord,
    profile: &CohortProfile,
    config: &SimulationConfig,
    rng: &mut R,
) -> Vec<TurnRecord> {
    let k = fallback_count(profile.p_fallback_per_utterance, config.max_fallbacks_per_utterance, rng);
    let mut rows = Vec::with_capacity(k as usize + 1);
    for _ in 0..k {
        let confidence = uniform(config.nlu.fallback_confidence, rng);
        rows.push(TurnRecord {
            activity: Some(Activity::FALLBACK),
            user_utterance: compose_utterance(Activity::FALLBACK.label(), rng).unwrap(),
            chatbot_response: utterances::response_stub(Activity::FALLBACK).to_string(),
            intent: None,
            intent_confidence: Some(confidence),
            entity: None,
            entity_confidence: None,
            score: Some(score_for(confidence, &config.nlu, rng)),
            expecting_response: true,
            ..planned.clone()
        });
    }
    rows.push(planned);
    rows
}

/// Replaces a paired report request by a disambiguation prompt and the
/// button choice that resolves it.
///
/// Fires with probability `p_disambiguation`; never fires for reports
/// outside the configured pairs.
pub fn inject_disambiguation<R: Rng + ?Sized>(
    planned: &TurnRecord,
    config: &SimulationConfig,
    rng: &mut R,
) -> Option<(TurnRecord, TurnRecord)> {
    let report = planned.activity?;
    let scenario = config.scenario_for(report)?;
    if !rng.random_bool(config.p_disambiguation) {
        return None;
    }
    let d = scenario.disambiguation_activity;
    let confidence = uniform(config.nlu.disambiguation_confidence, rng);
    let prompt = TurnRecord {
        activity: Some(d),
        user_utterance: compose_utterance(d.label(), rng).unwrap(),
        chatbot_response: utterances::response_stub(d).to_string(),
        intent: None,
        intent_confidence: Some(confidence),
        entity: None,
        entity_confidence: None,
        score: Some(score_for(confidence, &config.nlu, rng)),
        expecting_response: true,
        ..planned.clone()
    };
    let button = config.report_for(report).map(|r| r.name.clone()).unwrap_or_else(|| report.label().to_string());
    let resolved = TurnRecord {
        user_utterance: button,
        intent: Some(report),
        intent_confidence: Some(1.0),
        score: Some(score_for(1.0, &config.nlu, rng)),
        ..planned.clone()
    };
    Some((prompt, resolved))
}

/// One approval decision drawn from the configured probabilities.
pub fn draw_decision<R: Rng + ?Sized>(probs: &DecisionProbs, rng: &mut R) -> Activity {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (a, p) in probs.as_array() {
        acc += p;
        if u < acc {
            return a;
        }
    }
    Activity::REJECT_NOMINATION
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{default_config, Cohort, Role};
    use crate::rng;

    #[test]
    fn no_fallbacks_when_probability_is_zero() {
        let mut r = rng::stream(3, 0);
        assert!((0..10_000).all(|_| fallback_count(0.0, 3, &mut r) == 0));
    }

    #[test]
    fn fallback_rate_matches_cohort() {
        for (p, lo, hi) in [(0.05, 0.03, 0.07), (0.3, 0.28, 0.32)] {
            let mut r = rng::stream(11, (p * 100.0) as u64);
            let n = 60_000u32;
            let fallbacks: u32 = (0..n).map(|_| fallback_count(p, 3, &mut r)).sum();
            let rate = fallbacks as f64 / (fallbacks + n) as f64;
            assert!(rate > lo && rate < hi, "rate {rate} for p = {p}");
        }
    }

    #[test]
    fn decisions_follow_configured_probabilities() {
        let probs = DecisionProbs { approve: 0.7, approve_with_correction: 0.2, reject: 0.1 };
        let mut r = rng::stream(5, 9);
        let mut counts = [0usize; 3];
        for _ in 0..10_000 {
            match draw_decision(&probs, &mut r) {
                Activity::APPROVE_NOMINATION => counts[0] += 1,
                Activity::APPROVE_WITH_CORRECTION => counts[1] += 1,
                _ => counts[2] += 1,
            }
        }
        for (c, p) in counts.iter().zip([0.7, 0.2, 0.1]) {
            assert!((*c as f64 / 10_000.0 - p).abs() < 0.02);
        }
    }

    fn planned(activity: Activity) -> TurnRecord {
        TurnRecord {
            case_id: 1,
            session_id: "s".into(),
            role: Role::TeamLeader,
            user_id: "u".into(),
            timestamp: crate::domain::BusinessCalendar::default().process_start,
            turn: 1,
            activity: Some(activity),
            user_utterance: "x".into(),
            chatbot_response: "y".into(),
            intent: Some(activity),
            intent_confidence: Some(0.9),
            entity: None,
            entity_confidence: None,
            score: Some(0.85),
            expecting_response: false,
        }
    }

    #[test]
    fn fallback_rows_precede_the_planned_turn() {
        let mut cfg = default_config();
        cfg.cohorts.iter_mut().for_each(|c| c.p_fallback_per_utterance = 0.9);
        let profile = cfg.cohort(Role::TeamLeader, Cohort::Struggling).clone();
        let mut r = rng::stream(2, 2);
        let rows = inject_fallbacks(planned(Activity::REPORT_ABSENCE), &profile, &cfg, &mut r);
        let (last, fallbacks) = rows.split_last().unwrap();
        assert_eq!(last.activity, Some(Activity::REPORT_ABSENCE));
        assert!(fallbacks.len() <= 3);
        for f in fallbacks {
            assert_eq!(f.activity, Some(Activity::FALLBACK));
            assert!(f.intent.is_none());
            assert!(f.intent_confidence.unwrap() < cfg.nlu.recognized_confidence.0);
        }
    }

    #[test]
    fn disambiguation_only_for_paired_reports() {
        let mut cfg = default_config();
        cfg.p_disambiguation = 1.0;
        let mut r = rng::stream(4, 4);
        assert!(inject_disambiguation(&planned(Activity::REPORT_LEAD_TIME), &cfg, &mut r).is_none());
        let (prompt, resolved) =
            inject_disambiguation(&planned(Activity::REPORT_CLIENT_FEEDBACK), &cfg, &mut r).unwrap();
        assert_eq!(prompt.activity, Some(Activity::DISAMBIG_FEEDBACK));
        assert!(prompt.expecting_response);
        assert_eq!(resolved.activity, Some(Activity::REPORT_CLIENT_FEEDBACK));
        assert_eq!(resolved.intent, Some(Activity::REPORT_CLIENT_FEEDBACK));
        cfg.p_disambiguation = 0.0;
        assert!(inject_disambiguation(&planned(Activity::REPORT_CLIENT_FEEDBACK), &cfg, &mut r).is_none());
    }
}
