//! Experiments about how long a revoked hierarchy keeps authenticating.

use std::collections::BTreeMap;

use hbhc_core::heartbeat::{heartbeat_gen, sequence_heartbeat_gen, FreshnessMode, HeartbeatConfig};
use hbhc_core::keys::{create_root, issue_credential, AgentId};
use hbhc_core::verify::{create_auth_proof, verify_auth, Challenge, DEFAULT_CHALLENGE_TTL_MS};
use hbhc_core::{FreshnessPolicy, RejectReason, VerifierState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{secs, ExperimentReport};
use crate::config::*;
use crate::engine::{run, Simulation};
use crate::swarm::build_swarm;
use crate::trace::{Outcome, SimTrace};

const OAUTH_TTL_S: f64 = 3_600.0;
const FINE_CADENCE_MS: u64 = 200;

fn single_child(interval_ms: u64, max_age: u64, epochs: u64, seed: u64) -> SimConfig {
    SimConfig::new(
        HierarchySpec::new(vec![1]),
        DeliveryModel::push(0.0),
        FreshnessPolicy::time_epoch(interval_ms, max_age),
        epochs,
    )
    .with_seed(seed)
    .with_cadence(AuthCadence::EveryMs(FINE_CADENCE_MS))
}

/// Zombie window of the first revocation in the trace.
fn w_z(trace: &SimTrace) -> u64 {
    trace.zombie_windows().first().map_or(0, |w| w.w_z_ms)
}

/// Time from `t_r` until `agent` is denied for good: the first rejected
/// attempt after its last acceptance.
fn denial_ms(trace: &SimTrace, agent: usize, t_r: u64) -> Option<u64> {
    let attempts: Vec<_> = trace.attempts_for(agent).collect();
    let last_ok = attempts.iter().rposition(|a| a.outcome.is_accept());
    let first_denied = match last_ok {
        Some(i) => attempts.get(i + 1)?,
        None => attempts.first()?,
    };
    Some(first_denied.time_ms.saturating_sub(t_r))
}

/// Randomized sweep checking `W_z <= W_max + interval + lag` on the simulated clock.
pub fn zombie_bound(seed: u64) -> ExperimentReport {
    let mut r = ExperimentReport::new(
        "zombie_bound",
        seed,
        &[
            "interval_s",
            "max_age",
            "configs",
            "max_w_z_s",
            "max_bound_s",
            "max_w_z_over_bound",
            "violations",
        ],
    );
    let trials = 1_000;
    r.param("configs", trials);
    r.param("lag_range", "0..=W_max");
    r.param("cadence_ms", FINE_CADENCE_MS);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let swarm = build_swarm(&HierarchySpec::new(vec![1]), seed).expect("static spec");
    // (interval, max_age) -> (count, max w_z, max bound, max ratio, violations)
    let mut cells: BTreeMap<(u64, u64), (u64, u64, u64, f64, u64)> = BTreeMap::new();
    let mut violations = 0;
    for _ in 0..trials {
        let interval = [1_000u64, 2_000, 5_000, 10_000][rng.gen_range(0..4)];
        let max_age = rng.gen_range(1..=5u64);
        let w_max = interval * max_age;
        let lag = rng.gen_range(0..=w_max);
        let at = rng.gen_range(2..6u64);
        let offset = rng.gen_range(0..interval);
        let epochs = at + max_age + lag.div_ceil(interval) + 3;
        let mut cfg = single_child(interval, max_age, epochs, seed)
            .with_verification(VerificationMode::FreshnessOnly)
            .offset(VERIFIER, -(lag as i64));
        cfg.revocation_events.push(RevocationEvent {
            agent: "root".into(),
            at_epoch: at,
            offset_ms: offset,
            mode: RevocationMode::Implicit,
        });
        let trace = Simulation::with_swarm(cfg, swarm.clone())
            .expect("valid config")
            .finish();
        let measured = w_z(&trace);
        let bound = w_max + interval + lag;
        let cell = cells
            .entry((interval, max_age))
            .or_insert((0, 0, 0, 0.0, 0));
        cell.0 += 1;
        cell.1 = cell.1.max(measured);
        cell.2 = cell.2.max(bound);
        cell.3 = cell.3.max(measured as f64 / bound as f64);
        if measured > bound {
            cell.4 += 1;
            violations += 1;
        }
    }
    for ((interval, max_age), (n, w, b, ratio, v)) in cells {
        r.row(vec![
            secs(interval),
            max_age.to_string(),
            n.to_string(),
            secs(w),
            secs(b),
            format!("{ratio:.4}"),
            v.to_string(),
        ]);
    }
    r.check("violations", 0, violations, "exact", violations == 0);
    r
}

pub fn revocation_latency(seed: u64) -> ExperimentReport {
    let mut r = ExperimentReport::new(
        "revocation_latency",
        seed,
        &[
            "interval_s",
            "max_age",
            "w_max_s",
            "bound_s",
            "w_z_connected_s",
            "w_z_partitioned_s",
            "oauth_ratio",
        ],
    );
    r.param("cadence_ms", FINE_CADENCE_MS);
    r.param("oauth_token_lifetime_s", OAUTH_TTL_S);
    // (interval, max_age, lower edge of the accepted window)
    for (interval, max_age, floor) in [
        (2_000u64, 3u64, 7_600u64),
        (10_000, 3, 39_200),
        (1_000, 4, 4_600),
    ] {
        let at = 5;
        let cfg = single_child(interval, max_age, at + max_age + 4, seed).revoke("root", at);
        let connected = w_z(&run(&cfg).expect("valid config"));
        let mut cut = cfg.clone();
        cut.partition_events.push(PartitionEvent {
            entities: vec![VERIFIER.into()],
            from_epoch: 0,
            to_epoch: cut.duration_epochs,
        });
        let partitioned = w_z(&run(&cut).expect("valid config"));
        let bound = (max_age + 1) * interval;
        let ratio = OAUTH_TTL_S * 1_000.0 / bound as f64;
        r.row(vec![
            secs(interval),
            max_age.to_string(),
            secs(max_age * interval),
            secs(bound),
            secs(connected),
            secs(partitioned),
            format!("{ratio:.1}"),
        ]);
        let tag = format!("interval_{}s", interval / 1_000);
        r.check(
            &format!("{tag}_w_z"),
            format!("({}, {}] s", secs(floor), secs(bound)),
            format!("{} s", secs(connected)),
            "window",
            connected > floor && connected <= bound,
        );
        let tight = bound - 2 * FINE_CADENCE_MS;
        r.check(
            &format!("{tag}_w_z_tight"),
            format!(">= {} s", secs(tight)),
            format!("{} s", secs(connected)),
            "bound minus two attempt periods",
            connected >= tight,
        );
        r.check(
            &format!("{tag}_partitioned_equal"),
            secs(connected),
            secs(partitioned),
            "exact",
            connected == partitioned,
        );
        if interval == 10_000 {
            r.check(
                "oauth_ratio",
                "90x",
                format!("{ratio:.1}x"),
                "exact",
                (ratio - 90.0).abs() < 1e-9,
            );
        }
    }
    r
}

/// Epoch-resolution window: the last accepted probe rounded up to whole epochs.
fn epoch_resolution(ms: u64, interval: u64) -> u64 {
    ms.div_ceil(interval) * interval
}

pub fn clock_skew(seed: u64) -> ExperimentReport {
    let interval = 10_000;
    let max_age = 3;
    let mut r = ExperimentReport::new(
        "clock_skew",
        seed,
        &[
            "verifier_offset_s",
            "lag_s",
            "probe_age_epochs",
            "probe_outcome",
            "w_z_s",
            "w_z_fine_s",
            "bound_s",
            "within_bound",
            "vs_oauth",
        ],
    );
    r.param("interval_s", 10);
    r.param("max_age_epochs", max_age);
    r.param(
        "w_z_s",
        "last accepted end-of-epoch probe after revocation, rounded up to whole epochs",
    );
    r.param("w_z_fine_s", "last accepted attempt at 200 ms cadence");
    let policy = FreshnessPolicy::time_epoch(interval, max_age);

    // freshness probe: a heartbeat minted at an epoch boundary, verified by a
    // verifier whose clock is offset from true time
    let parent =
        create_root(AgentId::new("root").expect("static id"), &[7; 32]).expect("static seed");
    let (cred, child) = issue_credential(&parent, &AgentId::new("root.0").expect("static id"), 0)
        .expect("fresh issuer");
    let cfg = HeartbeatConfig::new(interval, FreshnessMode::TimeEpoch).expect("positive interval");
    let t_mint = 2_000 * interval;
    let hb = heartbeat_gen(&parent, t_mint, &cfg).expect("in range");

    let mut probe_ok = true;
    let mut within = true;
    let mut by_lag: BTreeMap<i64, u64> = BTreeMap::new();
    for offset_s in (-50i64..=90).step_by(5) {
        let offset_ms = offset_s * 1_000;
        let lag_ms = (-offset_ms).max(0) as u64;

        let mut state = VerifierState::new();
        state.cache_parent_key(parent.agent_id.clone(), parent.heartbeat_pk);
        let now = (t_mint as i64 + offset_ms) as u64;
        let mut ch = Challenge::from_nonce([offset_s as u8; 32], now, DEFAULT_CHALLENGE_TTL_MS);
        let proof = create_auth_proof(&child.identity_sk, &cred, &hb, &ch.nonce);
        let verdict = verify_auth(&proof, &mut state, &mut ch, now, &policy);
        let age = offset_ms.div_euclid(interval as i64);
        let expect_accept = (0..=max_age as i64).contains(&age);
        probe_ok &= verdict.is_ok() == expect_accept;
        let probe = match &verdict {
            Ok(_) => "accept".to_string(),
            Err(rej) => rej.reason.to_string(),
        };

        let at = 10;
        let epochs = at + max_age + 1 + lag_ms.div_ceil(interval) + 3;
        let base = SimConfig::new(
            HierarchySpec::new(vec![1]),
            DeliveryModel::push(0.0),
            policy,
            epochs,
        )
        .with_seed(seed)
        .with_verification(VerificationMode::FreshnessOnly)
        .offset(VERIFIER, offset_ms)
        .revoke("root", at);
        let coarse = epoch_resolution(w_z(&run(&base).expect("valid config")), interval);
        let fine = w_z(
            &run(&base.with_cadence(AuthCadence::EveryMs(FINE_CADENCE_MS))).expect("valid config"),
        );
        let bound = (max_age + 1) * interval + lag_ms;
        let ok = coarse <= bound && fine <= bound;
        within &= ok;
        by_lag.insert(-offset_s, coarse);
        let vs_oauth = if coarse == 0 {
            "inf".to_string()
        } else {
            format!("{:.0}", OAUTH_TTL_S * 1_000.0 / coarse as f64)
        };
        r.row(vec![
            offset_s.to_string(),
            (lag_ms / 1_000).to_string(),
            age.to_string(),
            probe,
            secs(coarse),
            secs(fine),
            secs(bound),
            ok.to_string(),
            vs_oauth,
        ]);
    }
    r.check(
        "freshness_probe",
        "accept iff 0 <= age <= 3 epochs; future and stale rejected",
        if probe_ok { "as expected" } else { "mismatch" },
        "exact",
        probe_ok,
    );
    r.check(
        "bound",
        "W_z <= W_max + interval + lag",
        if within { "all within" } else { "violation" },
        "exact",
        within,
    );
    for (lag, expected) in [
        (0i64, 40u64),
        (5, 40),
        (10, 50),
        (20, 60),
        (30, 70),
        (45, 80),
    ] {
        let measured = by_lag[&lag] / 1_000;
        r.check(
            &format!("lag_{lag}s"),
            format!("{expected} s"),
            format!("{measured} s"),
            "exact",
            measured == expected,
        );
    }
    let lead = by_lag[&-30] / 1_000;
    r.check("lead_30s", "0 s", format!("{lead} s"), "exact", lead == 0);
    r
}

pub fn edge_cases(seed: u64) -> ExperimentReport {
    let mut r = ExperimentReport::new(
        "edge_cases",
        seed,
        &["case", "parameter", "measured", "bound", "pass"],
    );
    r.param("cadence_ms", FINE_CADENCE_MS);

    // minimum interval
    let cfg = single_child(1_000, 4, 12, seed).revoke("root", 4);
    let w = w_z(&run(&cfg).expect("valid config"));
    let ok = w <= 5_000 && w > 5_000 - 2 * FINE_CADENCE_MS;
    r.row(vec![
        "min_interval_w_z".into(),
        "interval 1 s, max_age 4".into(),
        secs(w),
        "5.0".into(),
        ok.to_string(),
    ]);
    r.check(
        "min_interval",
        "(4.6, 5.0] s",
        format!("{} s", secs(w)),
        "bound minus two attempt periods",
        ok,
    );

    // three-level hierarchy: grandchild denial
    let cfg = SimConfig::new(
        HierarchySpec::new(vec![1, 1]),
        DeliveryModel::push(0.0),
        FreshnessPolicy::time_epoch(2_000, 3),
        14,
    )
    .with_seed(seed)
    .with_cadence(AuthCadence::EveryMs(FINE_CADENCE_MS))
    .revoke("root", 5);
    let trace = run(&cfg).expect("valid config");
    let t_r = trace.revocations[0].t_r_ms;
    let grandchild = trace
        .agents
        .iter()
        .position(|a| a.level == 2)
        .expect("three levels");
    let denied = denial_ms(&trace, grandchild, t_r).unwrap_or(u64::MAX);
    let ok = denied <= 8_000 + TICK_MS;
    r.row(vec![
        "grandchild_denial".into(),
        "[1, 1], interval 2 s".into(),
        secs(denied),
        "8.0".into(),
        ok.to_string(),
    ]);
    r.check(
        "grandchild",
        "<= 8.0 s + one tick",
        format!("{} s", secs(denied)),
        "one 100 ms tick",
        ok,
    );

    // fifty concurrent children
    let cfg = SimConfig::new(
        HierarchySpec::new(vec![50]),
        DeliveryModel::push(0.0),
        FreshnessPolicy::time_epoch(2_000, 3),
        14,
    )
    .with_seed(seed)
    .with_cadence(AuthCadence::EveryMs(FINE_CADENCE_MS))
    .with_verification(VerificationMode::FreshnessOnly)
    .revoke("root", 5);
    let trace = run(&cfg).expect("valid config");
    let t_r = trace.revocations[0].t_r_ms;
    let denials: Vec<u64> = (1..=50).filter_map(|c| denial_ms(&trace, c, t_r)).collect();
    let worst = denials.iter().copied().max().unwrap_or(u64::MAX);
    let ok = denials.len() == 50 && worst <= 9_040 && trace.zombie_windows()[0].denied_at_end == 50;
    r.row(vec![
        "fifty_children".into(),
        "[50], interval 2 s".into(),
        secs(worst),
        "9.04".into(),
        ok.to_string(),
    ]);
    r.check(
        "fifty_children",
        "50/50 denied within 9.04 s",
        format!("{}/50, worst {} s", denials.len(), secs(worst)),
        "exact",
        ok,
    );

    // freshness boundary with real proofs
    let policy = FreshnessPolicy::time_epoch(2_000, 3);
    let parent =
        create_root(AgentId::new("root").expect("static id"), &[3; 32]).expect("static seed");
    let (cred, child) = issue_credential(&parent, &AgentId::new("root.0").expect("static id"), 0)
        .expect("fresh issuer");
    let cfg = HeartbeatConfig::new(2_000, FreshnessMode::TimeEpoch).expect("positive interval");
    let base = 5_000 * 2_000;
    let hb = heartbeat_gen(&parent, base, &cfg).expect("in range");
    let mut boundary_ok = true;
    for age in [-2i64, -1, 0, 1, 2, 3, 4, 5, 10] {
        let now = (base as i64 + age * 2_000) as u64;
        let mut state = VerifierState::new();
        state.cache_parent_key(parent.agent_id.clone(), parent.heartbeat_pk);
        let mut ch = Challenge::from_nonce([age as u8; 32], now, DEFAULT_CHALLENGE_TTL_MS);
        let proof = create_auth_proof(&child.identity_sk, &cred, &hb, &ch.nonce);
        let v = verify_auth(&proof, &mut state, &mut ch, now, &policy);
        let expected = match age {
            a if a < 0 => Err(RejectReason::FutureHeartbeat),
            0..=3 => Ok(()),
            _ => Err(RejectReason::HeartbeatExpired),
        };
        let got = v.map(|_| ()).map_err(|e| e.reason);
        let ok = got == expected;
        boundary_ok &= ok;
        let shown = match got {
            Ok(()) => "accept".to_string(),
            Err(reason) => reason.to_string(),
        };
        r.row(vec![
            "freshness_boundary".into(),
            format!("age {age}"),
            shown,
            "accept 0..=3".into(),
            ok.to_string(),
        ]);
    }
    r.check(
        "freshness_boundary",
        "ages 0-3 accept, 4+ and future reject",
        if boundary_ok {
            "as expected"
        } else {
            "mismatch"
        },
        "exact",
        boundary_ok,
    );

    partition_cases(&mut r, seed);
    r
}

/// Delivery cut after the first heartbeat; verification keeps working locally.
fn partition_cases(r: &mut ExperimentReport, seed: u64) {
    let mut cfg = SimConfig::new(
        HierarchySpec::new(vec![1]),
        DeliveryModel::push(0.0),
        FreshnessPolicy::time_epoch(2_000, 3),
        8,
    )
    .with_seed(seed);
    cfg.partition_events.push(PartitionEvent {
        entities: vec!["root.0".into()],
        from_epoch: 1,
        to_epoch: 8,
    });
    let trace = run(&cfg).expect("valid config");
    let mut ok = true;
    for a in trace.attempts_for(1) {
        let age = a.age_epochs.unwrap_or(-1);
        let expect_accept = (0..=3).contains(&age);
        ok &= a.outcome.is_accept() == expect_accept;
        r.row(vec![
            "partition_tolerance".into(),
            format!("epoch {}", a.epoch),
            format!(
                "age {age} {}",
                if a.outcome.is_accept() {
                    "accept"
                } else {
                    a.outcome.reason()
                }
            ),
            "accept 0..=3".into(),
            (a.outcome.is_accept() == expect_accept).to_string(),
        ]);
    }
    let ages: Vec<i64> = trace.attempts_for(1).filter_map(|a| a.age_epochs).collect();
    ok &= ages.starts_with(&[0, 1, 2, 3, 4]);
    let verifier_ops = trace.network.ops(VERIFIER);
    r.check(
        "partition_tolerance",
        "accept ages 0-3, reject age 4",
        format!("ages {ages:?}"),
        "exact",
        ok,
    );
    r.check(
        "partition_verifier_network_ops",
        0,
        verifier_ops,
        "exact",
        verifier_ops == 0,
    );

    // verifier partitioned with warm and cold caches
    let mut connected = SimConfig::new(
        HierarchySpec::new(vec![5]),
        DeliveryModel::push(0.1),
        FreshnessPolicy::time_epoch(2_000, 3),
        30,
    )
    .with_seed(seed);
    let baseline = run(&connected).expect("valid config");
    connected.partition_events.push(PartitionEvent {
        entities: vec![VERIFIER.into()],
        from_epoch: 0,
        to_epoch: 30,
    });
    let warm = run(&connected).expect("valid config");
    r.check(
        "partition_warm_cache",
        "identical to connected run",
        warm.attempts == baseline.attempts,
        "exact",
        warm.attempts == baseline.attempts,
    );
    connected.verifier_cache = CacheMode::Cold;
    let cold = run(&connected).expect("valid config");
    // children that never received a heartbeat cannot even build a proof
    let all_unknown = cold.attempts.iter().all(|a| {
        matches!(
            a.outcome,
            Outcome::Reject(RejectReason::UnknownParent) | Outcome::NoHeartbeat
        )
    });
    r.check(
        "partition_cold_cache",
        "every attempt denied, UnknownParent",
        all_unknown,
        "exact",
        all_unknown,
    );
}

pub fn sequence_mode(seed: u64) -> ExperimentReport {
    let k = 3;
    let interval = 10_000;
    let mut r = ExperimentReport::new(
        "sequence_mode",
        seed,
        &["test", "expected", "measured", "pass"],
    );
    r.param("k", k);
    r.param("interval_s", 10);
    let policy = FreshnessPolicy::sequence(interval, k);
    let parent =
        create_root(AgentId::new("root").expect("static id"), &[9; 32]).expect("static seed");
    let (cred, child) = issue_credential(&parent, &AgentId::new("root.0").expect("static id"), 0)
        .expect("fresh issuer");
    let fresh_state = |floor: u64| {
        let mut s = VerifierState::new();
        s.cache_parent_key(parent.agent_id.clone(), parent.heartbeat_pk);
        s.set_sequence_floor(cred.child_id.clone(), floor);
        s
    };
    let attempt = |state: &mut VerifierState, seq: u64, now: u64| {
        let hb = sequence_heartbeat_gen(&parent, seq).expect("not the sentinel");
        let mut ch = Challenge::from_nonce([seq as u8; 32], now, DEFAULT_CHALLENGE_TTL_MS);
        let proof = create_auth_proof(&child.identity_sk, &cred, &hb, &ch.nonce);
        verify_auth(&proof, state, &mut ch, now, &policy)
            .map(|_| ())
            .map_err(|e| e.reason)
    };
    let now = 1_000_000;
    let mut cases: Vec<(&str, Result<(), RejectReason>, Result<(), RejectReason>)> = Vec::new();
    let mut st = fresh_state(7);
    cases.push(("gap_k_accepted", Ok(()), attempt(&mut st, 7 + k, now)));
    cases.push((
        "replay_rejected",
        Err(RejectReason::SequenceRegression),
        attempt(&mut st, 7 + k, now),
    ));
    let mut st = fresh_state(7);
    cases.push((
        "gap_k_plus_1_rejected",
        Err(RejectReason::SequenceGapExceeded),
        attempt(&mut st, 7 + k + 1, now),
    ));
    cases.push((
        "regression_rejected",
        Err(RejectReason::SequenceRegression),
        attempt(&mut st, 6, now),
    ));
    cases.push((
        "equal_rejected",
        Err(RejectReason::SequenceRegression),
        attempt(&mut st, 7, now),
    ));
    let mut st = fresh_state(7);
    cases.push((
        "offset_plus_45s_accepted",
        Ok(()),
        attempt(&mut st, 8, now + 45_000),
    ));
    let mut st = fresh_state(8);
    cases.push((
        "offset_minus_45s_accepted",
        Ok(()),
        attempt(&mut st, 9, now - 45_000),
    ));
    let show = |v: &Result<(), RejectReason>| match v {
        Ok(()) => "accept".to_string(),
        Err(e) => e.to_string(),
    };
    for (name, expected, got) in &cases {
        r.row(vec![
            name.to_string(),
            show(expected),
            show(got),
            (expected == got).to_string(),
        ]);
        r.check(name, show(expected), show(got), "exact", expected == got);
    }

    // in-order delivery on the simulator, with and without verifier offsets
    for offset_s in [0i64, 45, -45] {
        let mut cfg = SimConfig::new(
            HierarchySpec::new(vec![10]),
            DeliveryModel::push(0.0),
            policy,
            20,
        )
        .with_seed(seed)
        .with_verification(VerificationMode::FreshnessOnly)
        .offset(VERIFIER, offset_s * 1_000);
        cfg.revocation_events.push(RevocationEvent {
            agent: "root".into(),
            at_epoch: 10,
            offset_ms: 0,
            mode: RevocationMode::Implicit,
        });
        let trace = run(&cfg).expect("valid config");
        let fprr = trace.fprr();
        let wz = w_z(&trace);
        let name = format!("sim_offset_{offset_s}s");
        let ok = fprr == 0.0 && wz <= k * interval;
        r.row(vec![
            name.clone(),
            format!("FPRR 0, W_z <= {} s", secs(k * interval)),
            format!("FPRR {:.4}%, W_z {} s", fprr * 100.0, secs(wz)),
            ok.to_string(),
        ]);
        r.check(
            &name,
            format!("FPRR 0, W_z <= {} s", secs(k * interval)),
            format!("FPRR {:.4}%, W_z {} s", fprr * 100.0, secs(wz)),
            "exact",
            ok,
        );
    }

    // time-epoch mode under the same +45 s offset, for contrast
    let cfg = SimConfig::new(
        HierarchySpec::new(vec![10]),
        DeliveryModel::push(0.0),
        FreshnessPolicy::time_epoch(interval, k),
        20,
    )
    .with_seed(seed)
    .with_verification(VerificationMode::FreshnessOnly)
    .offset(VERIFIER, 45_000);
    let fprr = run(&cfg).expect("valid config").fprr();
    r.row(vec![
        "time_mode_offset_45s".into(),
        "informational".into(),
        format!("FPRR {:.4}%", fprr * 100.0),
        "true".into(),
    ]);
    r
}
