use hbhc_core::heartbeat::{
    heartbeat_gen, precompute_with_cap, revocation_heartbeat, sequence_heartbeat_gen,
    FreshnessMode, HeartbeatConfig,
};
use hbhc_core::keys::{
    create_root, derive_child, issue_credential, AgentId, AgentIdentity, Credential,
};
use hbhc_core::verify::{
    check_freshness, create_auth_proof, verify_auth, AgentLifecycleState, Challenge,
    LifecycleTracker, DEFAULT_CHALLENGE_TTL_MS,
};
use hbhc_core::{AuthProof, FreshnessPolicy, Heartbeat, RejectReason, VerifierState};
use proptest::prelude::*;
use std::sync::OnceLock;

struct Fixture {
    parent: AgentIdentity,
    other: AgentIdentity,
    child: AgentIdentity,
    cred: Credential,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let parent = create_root(AgentId::new("p").unwrap(), &[0x5a; 32]).unwrap();
        let other = create_root(AgentId::new("q").unwrap(), &[0x5b; 32]).unwrap();
        let (cred, child) = issue_credential(&parent, &AgentId::new("c").unwrap(), 0).unwrap();
        Fixture {
            parent,
            other,
            child,
            cred,
        }
    })
}

fn warm_state() -> VerifierState {
    let f = fixture();
    let mut state = VerifierState::new();
    state.cache_parent_key(f.parent.agent_id.clone(), f.parent.heartbeat_pk);
    state
}

fn proof_for(hb: &Heartbeat, nonce: [u8; 32]) -> AuthProof {
    let f = fixture();
    create_auth_proof(&f.child.identity_sk, &f.cred, hb, &nonce)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, ..ProptestConfig::default() })]

    /// Time-mode freshness accepts exactly ages 0..=max_age+grace.
    #[test]
    fn freshness_window(interval in 1u64..20_000, max_age in 0u64..8, grace in 0u64..3,
                        epoch in 0u64..1_000_000, now in 0u64..20_000_000_000) {
        let policy = FreshnessPolicy::time_epoch(interval, max_age).with_grace(grace);
        let current = now / interval;
        let ok = check_freshness(epoch, None, now, &policy).is_ok();
        prop_assert_eq!(ok, epoch <= current && current - epoch <= max_age + grace);
    }

    /// The last instant a revoked parent's final heartbeat is accepted lies
    /// within W_max + interval + lag of the revocation.
    #[test]
    fn zombie_bound(interval_s in prop::sample::select(vec![1u64, 2, 5, 10]), max_age in 1u64..=5,
                    lag_frac in 0.0f64..=1.0, t_r in 1_000_000u64..10_000_000) {
        let interval = interval_s * 1_000;
        let policy = FreshnessPolicy::time_epoch(interval, max_age);
        let lag = (lag_frac * policy.w_max_ms() as f64) as u64;
        let e_r = t_r / interval;
        let hb = heartbeat_gen(&fixture().parent, t_r, &HeartbeatConfig::new(interval, FreshnessMode::TimeEpoch).unwrap()).unwrap();
        prop_assert_eq!(hb.epoch, e_r);
        // verifier clock runs `lag` behind; last accepted true time:
        let t_last = (e_r + max_age + 1) * interval - 1 + lag;
        let run = |t: u64| {
            let mut state = warm_state();
            let mut ch = Challenge::from_nonce([1; 32], t - lag, DEFAULT_CHALLENGE_TTL_MS);
            verify_auth(&proof_for(&hb, ch.nonce), &mut state, &mut ch, t - lag, &policy)
        };
        prop_assert!(run(t_last).is_ok());
        prop_assert_eq!(run(t_last + 1).unwrap_err().reason, RejectReason::HeartbeatExpired);
        prop_assert!(t_last - t_r <= policy.w_max_ms() + interval + lag);
    }

    /// Identical inputs give identical verdicts, with all transport absent.
    #[test]
    fn verdict_is_pure(epoch_off in 0u64..8, now_off in 0u64..80_000, nonce in any::<[u8; 32]>()) {
        let policy = FreshnessPolicy::time_epoch(10_000, 3);
        let base = 10_000_000u64;
        let hb = heartbeat_gen(&fixture().parent, base + epoch_off * 10_000, &HeartbeatConfig::new(10_000, FreshnessMode::TimeEpoch).unwrap()).unwrap();
        let proof = proof_for(&hb, nonce);
        let now = base + now_off;
        let run = || {
            let mut state = warm_state();
            let mut ch = Challenge::from_nonce(nonce, base, DEFAULT_CHALLENGE_TTL_MS * 10);
            verify_auth(&proof, &mut state, &mut ch, now, &policy)
        };
        prop_assert_eq!(run(), run());
    }

    /// s_last moves only on acceptance and never backwards.
    #[test]
    fn sequence_counter_monotone(seqs in prop::collection::vec(1u64..40, 1..25), k in 1u64..5) {
        let policy = FreshnessPolicy::sequence(1_000, k);
        let mut state = warm_state();
        let child = fixture().cred.child_id.clone();
        for s in seqs {
            let before = state.last_sequence.get(&child).copied().unwrap_or(0);
            let hb = sequence_heartbeat_gen(&fixture().parent, s).unwrap();
            let mut ch = Challenge::from_nonce([s as u8; 32], 0, 1);
            let v = verify_auth(&proof_for(&hb, ch.nonce), &mut state, &mut ch, 0, &policy);
            let after = state.last_sequence.get(&child).copied().unwrap_or(0);
            let expect_ok = s > before && s - before <= k;
            prop_assert_eq!(v.is_ok(), expect_ok);
            prop_assert_eq!(after, if expect_ok { s } else { before });
        }
    }

    /// Conjunction: a fresh heartbeat with someone else's key fails, and the
    /// right key with a stale heartbeat fails.
    #[test]
    fn conjunction_required(stale_by in 4u64..100, seed in any::<[u8; 32]>()) {
        let f = fixture();
        let policy = FreshnessPolicy::time_epoch(10_000, 3);
        let cfg = HeartbeatConfig::new(10_000, FreshnessMode::TimeEpoch).unwrap();
        let now = 100_000_000u64;
        let fresh = heartbeat_gen(&f.parent, now, &cfg).unwrap();
        let stale = heartbeat_gen(&f.parent, now - stale_by * 10_000, &cfg).unwrap();
        let Ok(wrong) = create_root(AgentId::new("c").unwrap(), &seed) else { return Ok(()) };
        let mut state = warm_state();
        let mut ch = Challenge::from_nonce([3; 32], now, 1_000);
        let p = create_auth_proof(&wrong.identity_sk, &f.cred, &fresh, &ch.nonce);
        prop_assert_eq!(verify_auth(&p, &mut state, &mut ch, now, &policy).unwrap_err().reason, RejectReason::InvalidChildSig);
        let p = create_auth_proof(&f.child.identity_sk, &f.cred, &stale, &ch.nonce);
        prop_assert_eq!(verify_auth(&p, &mut state, &mut ch, now, &policy).unwrap_err().reason, RejectReason::HeartbeatExpired);
    }

    /// Epochs of a live parent never decrease as time advances.
    #[test]
    fn epoch_monotone(interval in 1u64..100_000, mut times in prop::collection::vec(0u64..u64::MAX / 2, 2..20)) {
        times.sort_unstable();
        let cfg = HeartbeatConfig::new(interval, FreshnessMode::TimeEpoch).unwrap();
        let epochs: Vec<u64> = times.iter().map(|t| cfg.epoch_at(*t)).collect();
        prop_assert!(epochs.windows(2).all(|w| w[0] <= w[1]));
    }

    /// Pre-computed heartbeats are contiguous, valid and capped.
    #[test]
    fn precompute_contiguous(start in 0u64..1_000_000, n in 1u64..=6, cap in 1u64..=6) {
        let cfg = HeartbeatConfig::new(1_000, FreshnessMode::TimeEpoch).unwrap();
        let res = precompute_with_cap(&fixture().parent, start, n, &cfg, cap);
        if n > cap {
            prop_assert!(res.is_err());
        } else {
            let buf = res.unwrap();
            prop_assert_eq!(buf.heartbeats.len() as u64, n);
            for (i, hb) in buf.heartbeats.iter().enumerate() {
                prop_assert_eq!(hb.epoch, start + i as u64);
                prop_assert!(hb.check().is_ok());
            }
        }
    }

    /// A chain of derivations produces levels 0..=d.
    #[test]
    fn derivation_depth(d in 1usize..6) {
        let mut cur = fixture().parent.clone();
        for lvl in 1..=d {
            cur = derive_child(&cur, &AgentId::new(format!("n{lvl}")).unwrap()).unwrap();
            prop_assert_eq!(cur.level as usize, lvl);
        }
    }

    /// Credential text encoding roundtrips.
    #[test]
    fn credential_text_roundtrip(epoch in any::<u64>()) {
        let mut cred = fixture().cred.clone();
        cred.issued_at_epoch = epoch;
        prop_assert_eq!(Credential::from_text(&cred.to_text()).unwrap(), cred);
    }
}

#[derive(Debug, Clone)]
enum Op {
    Advance(u64),
    FreshValid,
    OldValid(u64),
    Foreign,
    Forged,
    Sentinel,
    Future(u64),
    MarkRevoked,
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (1u64..50_000).prop_map(Op::Advance),
        Just(Op::FreshValid),
        (1u64..10).prop_map(Op::OldValid),
        Just(Op::Foreign),
        Just(Op::Forged),
        Just(Op::Sentinel),
        (1u64..10).prop_map(Op::Future),
        Just(Op::MarkRevoked),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, ..ProptestConfig::default() })]

    /// Terminated never returns to Active except through a new heartbeat
    /// signed under the parent's heartbeat key.
    #[test]
    fn terminated_is_sticky(ops in prop::collection::vec(op(), 1..40)) {
        let f = fixture();
        let interval = 10_000;
        let policy = FreshnessPolicy::time_epoch(interval, 3);
        let cfg = HeartbeatConfig::new(interval, FreshnessMode::TimeEpoch).unwrap();
        let mut tracker = LifecycleTracker::new(f.parent.heartbeat_pk, policy);
        let mut now = 1_000_000u64;
        let mut prev = tracker.state(now);
        for op in ops {
            let mut accepted_valid = false;
            match op {
                Op::Advance(d) => now += d,
                Op::FreshValid => accepted_valid = tracker.observe(&heartbeat_gen(&f.parent, now, &cfg).unwrap(), now),
                Op::OldValid(back) => {
                    let hb = heartbeat_gen(&f.parent, now.saturating_sub(back * interval), &cfg).unwrap();
                    accepted_valid = tracker.observe(&hb, now);
                }
                Op::Foreign => { tracker.observe(&heartbeat_gen(&f.other, now, &cfg).unwrap(), now); }
                Op::Forged => {
                    let mut hb = heartbeat_gen(&f.parent, now, &cfg).unwrap();
                    hb.sig.0[10] ^= 1;
                    tracker.observe(&hb, now);
                }
                Op::Sentinel => { tracker.observe(&revocation_heartbeat(&f.parent), now); }
                Op::Future(ahead) => {
                    let hb = heartbeat_gen(&f.parent, now + ahead * interval, &cfg).unwrap();
                    prop_assert!(!tracker.observe(&hb, now));
                }
                Op::MarkRevoked => tracker.mark_revoked(now),
            }
            let cur = tracker.state(now);
            if prev == AgentLifecycleState::Terminated && cur == AgentLifecycleState::Active {
                prop_assert!(accepted_valid, "Terminated -> Active without a new valid heartbeat");
            }
            prev = cur;
        }
    }
}
