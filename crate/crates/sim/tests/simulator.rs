use hbhc_core::{FreshnessPolicy, RejectReason};
use hbhc_sim::*;

fn policy(interval_ms: u64, max_age: u64) -> FreshnessPolicy {
    FreshnessPolicy::time_epoch(interval_ms, max_age)
}

fn flat(n: u32, delivery: DeliveryModel, p: FreshnessPolicy, epochs: u64) -> SimConfig {
    SimConfig::new(HierarchySpec::new(vec![n]), delivery, p, epochs)
}

#[test]
fn lossless_run_always_accepts() {
    let cfg = flat(10, DeliveryModel::push(0.0), policy(2_000, 3), 20).with_seed(1);
    let trace = run(&cfg).unwrap();
    assert_eq!(trace.legitimate_attempts(), 10 * 20);
    assert_eq!(trace.legitimate_denied(), 0);
    assert_eq!(trace.fprr(), 0.0);
    // one heartbeat per epoch from the single parent, whatever the fan-out
    assert!(trace
        .epochs
        .iter()
        .all(|e| e.heartbeats_generated == 1 && e.live_parents == 1));
}

#[test]
fn revocation_window_two_seconds() {
    let cfg = flat(1, DeliveryModel::push(0.0), policy(2_000, 3), 12)
        .with_cadence(AuthCadence::EveryMs(200))
        .revoke("root", 4);
    let trace = run(&cfg).unwrap();
    let w = &trace.zombie_windows()[0];
    assert_eq!(w.t_r_ms, 8_000);
    assert!(w.w_z_ms > 8_000 - 400 && w.w_z_ms <= 8_000, "{}", w.w_z_ms);
    assert_eq!(w.w_z_ms, 7_800);
    assert_eq!(w.denied_at_end, 1);
}

#[test]
fn revocation_window_ten_seconds() {
    let cfg = flat(1, DeliveryModel::push(0.0), policy(10_000, 3), 12)
        .with_cadence(AuthCadence::EveryMs(200))
        .revoke("root", 3);
    let w = run(&cfg).unwrap().zombie_windows()[0].clone();
    assert!(w.w_z_ms <= 40_000 && w.w_z_ms > 39_200, "{}", w.w_z_ms);
}

#[test]
fn descendants_terminated_after_window() {
    let p = policy(2_000, 3);
    let cfg = SimConfig::new(
        HierarchySpec::new(vec![2, 2]),
        DeliveryModel::push(0.0),
        p,
        15,
    )
    .revoke("root", 3);
    let trace = run(&cfg).unwrap();
    let e = 3 + 3 + 1;
    let stats = &trace.epochs[e as usize];
    assert_eq!(stats.terminated, 6);
    assert_eq!(stats.active + stats.zombie, 0);
    // zombies exist in between
    assert!(trace.epochs[4].zombie > 0);
}

#[test]
fn cascading_revocation_four_levels() {
    let p = policy(5_000, 3);
    let cfg = SimConfig::new(
        HierarchySpec::new(vec![3, 5, 2]),
        DeliveryModel::push(0.0),
        p,
        20,
    )
    .with_cadence(AuthCadence::EveryMs(200))
    .with_verification(VerificationMode::FreshnessOnly)
    .revoke("root", 5);
    let trace = run(&cfg).unwrap();
    let w = &trace.zombie_windows()[0];
    assert_eq!(w.descendants, 48);
    assert_eq!(w.denied_at_end, 48);
    assert!(w.w_z_ms <= 20_000);
    assert_eq!(w.per_level_max_ms.len(), 3);
}

#[test]
fn exclusion_hits_only_target() {
    let mut cfg = flat(5, DeliveryModel::push(0.0), policy(2_000, 3), 20);
    cfg.exclusion_events.push(ExclusionEvent {
        parent: "root".into(),
        child: "root.2".into(),
        from_epoch: 5,
    });
    let trace = run(&cfg).unwrap();
    let target = 3; // root.2
    let last_ok = trace
        .attempts_for(target)
        .filter(|a| a.outcome.is_accept())
        .map(|a| a.epoch)
        .max()
        .unwrap();
    assert_eq!(last_ok, 5 + 3 - 1);
    for sib in [1, 2, 4, 5] {
        assert!(trace.attempts_for(sib).all(|a| a.outcome.is_accept()));
    }
    assert_eq!(trace.fprr(), 0.0, "excluded attempts are not legitimate");
}

#[test]
fn partitioned_child_ages_out_without_network() {
    let mut cfg = flat(1, DeliveryModel::push(0.0), policy(2_000, 3), 10);
    cfg.partition_events.push(PartitionEvent {
        entities: vec!["root.0".into()],
        from_epoch: 1,
        to_epoch: 10,
    });
    let trace = run(&cfg).unwrap();
    let ages: Vec<_> = trace
        .attempts
        .iter()
        .map(|a| (a.age_epochs, a.outcome))
        .collect();
    assert_eq!(ages[0], (Some(0), Outcome::Accept));
    for age in 1..=3 {
        assert_eq!(ages[age], (Some(age as i64), Outcome::Accept));
    }
    assert_eq!(
        ages[4],
        (Some(4), Outcome::Reject(RejectReason::HeartbeatExpired))
    );
    assert_eq!(trace.network.ops(VERIFIER), 0);
    assert_eq!(
        trace.network.received.get("root.0").copied().unwrap_or(0),
        1
    );
}

#[test]
fn partitioned_verifier_warm_cache_unchanged() {
    let base = flat(4, DeliveryModel::push(0.1), policy(2_000, 3), 30).with_seed(7);
    let mut cut = base.clone();
    cut.partition_events.push(PartitionEvent {
        entities: vec![VERIFIER.into()],
        from_epoch: 0,
        to_epoch: 30,
    });
    assert_eq!(run(&base).unwrap().attempts, run(&cut).unwrap().attempts);
}

#[test]
fn cold_cache_rejects_everything() {
    let mut cfg = flat(3, DeliveryModel::push(0.0), policy(2_000, 3), 5);
    cfg.verifier_cache = CacheMode::Cold;
    let trace = run(&cfg).unwrap();
    assert!(trace
        .attempts
        .iter()
        .all(|a| a.outcome == Outcome::Reject(RejectReason::UnknownParent)));
}

#[test]
fn explicit_revocation_latches_and_shuts_down() {
    let mut cfg = flat(3, DeliveryModel::push(0.0), policy(10_000, 3), 10);
    cfg.revocation_events.push(RevocationEvent {
        agent: "root".into(),
        at_epoch: 2,
        offset_ms: 5_000,
        mode: RevocationMode::Explicit,
    });
    let mut sim = Simulation::new(cfg).unwrap();
    sim.advance_to_epoch(10);
    assert!(sim
        .verifier()
        .sentinel_revoked
        .iter()
        .any(|p| p.as_str() == "root"));
    let trace = sim.finish();
    assert!(trace.attempts.iter().all(|a| a.epoch <= 2));
    assert_eq!(trace.zombie_windows()[0].w_z_ms, 0);
}

#[test]
fn events_validated() {
    let base = flat(2, DeliveryModel::push(0.0), policy(2_000, 3), 10);
    assert!(matches!(
        run(&base.clone().revoke("nobody", 1)),
        Err(SimError::UnknownAgent(_))
    ));
    assert!(matches!(
        run(&base.clone().revoke("root.0", 1)),
        Err(SimError::NotAParent(_))
    ));
    assert!(matches!(
        run(&base.clone().revoke("root", 10)),
        Err(SimError::InvalidEvent(_))
    ));
    assert!(matches!(
        run(&base.clone().revoke("root", 1).revoke("root", 2)),
        Err(SimError::AlreadyRevoked(_))
    ));
    let mut bad = base.clone();
    bad.duration_epochs = 0;
    assert!(run(&bad).is_err());
    let mut bad = base.clone();
    bad.delivery = DeliveryModel::push(1.5);
    assert!(run(&bad).is_err());
    let mut bad = base;
    bad.partition_events.push(PartitionEvent {
        entities: vec!["root.0".into()],
        from_epoch: 5,
        to_epoch: 2,
    });
    assert!(matches!(run(&bad), Err(SimError::InvalidEvent(_))));
}

#[test]
fn revoke_mid_run() {
    let cfg = flat(1, DeliveryModel::push(0.0), policy(2_000, 3), 20)
        .with_cadence(AuthCadence::EveryMs(200));
    let mut sim = Simulation::new(cfg).unwrap();
    sim.advance_to_epoch(5);
    assert!(sim
        .revoke_parent("root", 4, 0, RevocationMode::Implicit)
        .is_err());
    sim.revoke_parent("root", 6, 0, RevocationMode::Implicit)
        .unwrap();
    let trace = sim.finish();
    assert_eq!(trace.zombie_windows()[0].w_z_ms, 7_800);
}

#[test]
fn reproducible_and_mode_equivalent() {
    let mut cfg = flat(20, DeliveryModel::push(0.2), policy(2_000, 2), 40)
        .with_seed(42)
        .revoke("root", 30);
    let a = run(&cfg).unwrap();
    assert_eq!(a, run(&cfg).unwrap());
    assert_eq!(a.to_csv_string(), run(&cfg).unwrap().to_csv_string());
    cfg.verification = VerificationMode::FreshnessOnly;
    let b = run(&cfg).unwrap();
    assert_eq!(a.attempts, b.attempts);
}

#[test]
fn csv_header_and_rows() {
    let cfg = flat(2, DeliveryModel::push(0.0), policy(2_000, 3), 2);
    let csv = run(&cfg).unwrap().to_csv_string();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "epoch,agent_id,level,event_type,outcome,reject_reason,heartbeat_age_epochs"
    );
    assert!(csv.contains(",auth,accept,,0"));
    assert!(csv.contains("heartbeat_emit"));
}

#[test]
fn sequence_mode_runs() {
    let p = FreshnessPolicy::sequence(10_000, 3);
    let cfg = flat(3, DeliveryModel::push(0.0), p, 10).revoke("root", 5);
    let trace = run(&cfg).unwrap();
    let accepted: Vec<_> = trace
        .attempts_for(1)
        .map(|a| a.outcome.is_accept())
        .collect();
    assert_eq!(&accepted[..6], &[true; 6]);
    assert!(accepted[6..].iter().all(|ok| !ok));
}

#[test]
fn config_json_roundtrip() {
    let mut cfg =
        flat(3, DeliveryModel::gossip(5, 0.1), policy(10_000, 3), 10).offset(VERIFIER, -5_000);
    cfg.revocation_events.push(RevocationEvent {
        agent: "root".into(),
        at_epoch: 2,
        offset_ms: 0,
        mode: RevocationMode::Explicit,
    });
    let json = serde_json::to_string_pretty(&cfg).unwrap();
    let back: SimConfig = serde_json::from_str(&json).unwrap();
    assert_eq!(back, cfg);
    let minimal = r#"{"spec":{"levels":[2]},"delivery":{"variant":"push","drop_rate":0.0},
        "policy":{"interval_ms":2000,"max_age_epochs":3},"duration_epochs":3,"auth_cadence":"per_epoch","rng_seed":1}"#;
    let cfg: SimConfig = serde_json::from_str(minimal).unwrap();
    assert_eq!(run(&cfg).unwrap().legitimate_attempts(), 6);
}
