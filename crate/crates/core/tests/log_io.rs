use ipa_ppm::domain::{default_config, Activity};
use ipa_ppm::log_io::*;
use ipa_ppm::simulator::simulate_cases;
use proptest::prelude::*;

fn bytes(log: &EventLog) -> Vec<u8> {
    let mut out = Vec::new();
    write_csv_to(log, &mut out).unwrap();
    out
}

#[test]
fn header_is_the_fifteen_documented_columns() {
    let log = simulate_cases(&default_config(), 1, 3).unwrap();
    let text = String::from_utf8(bytes(&log)).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "case_id,session_id,role,user_id,timestamp,turn,activity,user utterance,chatbot response,intent,\
         intent_confidence,entity,entity_confidence,score,expecting_response"
    );
    assert_eq!(COLUMNS.len(), 15);
    assert!(!text.contains('\r'));
}

#[test]
fn simulated_logs_round_trip_byte_for_byte() {
    let log = simulate_cases(&default_config(), 2, 40).unwrap();
    let first = bytes(&log);
    let back = read_csv_from(first.as_slice()).unwrap();
    assert_eq!(back, log);
    assert_eq!(bytes(&back), first);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.csv");
    write_csv(&log, &path).unwrap();
    assert_eq!(read_csv(&path).unwrap(), log);
}

fn mutate(log: &EventLog, f: impl Fn(&mut Vec<TurnRecord>)) -> EventLog {
    let mut records = log.records().to_vec();
    f(&mut records);
    EventLog::new(records)
}

#[test]
fn validator_flags_constructed_counterexamples() {
    let log = simulate_cases(&default_config(), 3, 5).unwrap();
    assert!(validate(&log).is_empty());
    let rules = |l: &EventLog| validate(l).into_iter().map(|v| v.rule).collect::<Vec<_>>();

    let sid = log.records()[0].session_id.clone();
    let gap = mutate(&log, |rs| {
        let r = rs.iter_mut().find(|r| r.session_id == sid && r.turn == 2).unwrap();
        r.turn = 3;
        // keep the rest of the session unique
        rs.retain(|r| !(r.session_id == sid && r.turn > 3));
    });
    assert!(rules(&gap).contains(&Rule::TurnGap));

    let range = mutate(&log, |rs| rs[1].score = Some(1.5));
    assert_eq!(rules(&range), vec![Rule::ValueRange]);

    let early = mutate(&log, |rs| {
        let i = rs.iter().position(|r| r.activity == Some(Activity::ADD_NOMINATION)).unwrap();
        let case = rs[i].case_id;
        for r in rs.iter_mut().filter(|r| r.case_id == case && r.activity == Some(Activity::REPORT_MIP_CRITERIA)) {
            r.activity = Some(Activity::REPORT_LEAD_TIME);
            r.intent = Some(Activity::REPORT_LEAD_TIME);
        }
    });
    assert!(rules(&early).contains(&Rule::MandatoryReportsFirst));

    let wrong_role = mutate(&log, |rs| {
        let r = rs.iter_mut().find(|r| r.activity == Some(Activity::SUBMIT_FINAL_NOMINATIONS)).unwrap();
        r.activity = Some(Activity::SUBMIT_NOMINATION);
        r.intent = Some(Activity::SUBMIT_NOMINATION);
    });
    assert!(rules(&wrong_role).contains(&Rule::RoleActivity));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn any_seed_round_trips_and_validates(seed in any::<u64>(), n in 1u32..12) {
        let log = simulate_cases(&default_config(), seed, n).unwrap();
        prop_assert!(validate(&log).is_empty());
        let b = bytes(&log);
        prop_assert_eq!(bytes(&read_csv_from(b.as_slice()).unwrap()), b);
    }
}
