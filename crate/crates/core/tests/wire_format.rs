use hbhc_core::crypto::{self, SecretScalar};
use hbhc_core::heartbeat::{self, FRAME_LEN};
use hbhc_core::keys::{create_root, AgentId};
use hbhc_core::{Heartbeat, HeartbeatError};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn random_heartbeats_roundtrip() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xbeef);
    let parents: Vec<_> = (0..16)
        .map(|i| {
            let mut seed = [0u8; 32];
            rng.fill_bytes(&mut seed);
            create_root(AgentId::new(format!("p{i}")).unwrap(), &seed).unwrap()
        })
        .collect();
    for i in 0..10_000 {
        let parent = &parents[i % parents.len()];
        let hb = match rng.gen_range(0..20) {
            0 => heartbeat::revocation_heartbeat(parent),
            _ => heartbeat::sequence_heartbeat_gen(parent, rng.gen_range(0..u64::MAX)).unwrap(),
        };
        let frame = hb.to_bytes();
        assert_eq!(frame.len(), FRAME_LEN);
        assert_eq!(FRAME_LEN, 168);
        assert_eq!(Heartbeat::from_bytes(&frame).unwrap(), hb);
        assert_eq!(Heartbeat::from_hex(&hb.to_hex()).unwrap(), hb);
    }
}

#[test]
fn every_single_bit_corruption_detected() {
    let parent = create_root(AgentId::new("root").unwrap(), &[0x42; 32]).unwrap();
    let hb = heartbeat::sequence_heartbeat_gen(&parent, 1_234_567).unwrap();
    let frame = hb.to_bytes();
    for bit in 0..FRAME_LEN * 8 {
        let mut bad = frame;
        bad[bit / 8] ^= 1 << (bit % 8);
        let err = Heartbeat::from_bytes(&bad).expect_err("corruption went unnoticed");
        assert!(
            matches!(
                err,
                HeartbeatError::CommitmentMismatch
                    | HeartbeatError::BadSignature
                    | HeartbeatError::InvalidPoint
            ),
            "bit {bit}: {err:?}"
        );
    }
}

#[test]
fn truncated_and_extended_frames_rejected() {
    let parent = create_root(AgentId::new("root").unwrap(), &[7; 32]).unwrap();
    let frame = heartbeat::sequence_heartbeat_gen(&parent, 3)
        .unwrap()
        .to_bytes();
    assert!(matches!(
        Heartbeat::from_bytes(&frame[..167]),
        Err(HeartbeatError::WrongLength(_))
    ));
    let mut long = frame.to_vec();
    long.push(0);
    assert!(matches!(
        Heartbeat::from_bytes(&long),
        Err(HeartbeatError::WrongLength(_))
    ));
}

/// Single-bit mutations of message, signature or public key never verify.
#[test]
fn signature_mutation_fuzz() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut trials = 0;
    while trials < 10_000 {
        let mut raw = [0u8; 32];
        rng.fill_bytes(&mut raw);
        let Ok(sk) = SecretScalar::from_canonical_bytes(&raw) else {
            continue;
        };
        let pk = crypto::keypair(&sk);
        let mut msg = vec![0u8; rng.gen_range(1..96)];
        rng.fill_bytes(&mut msg);
        let sig = crypto::sign(&sk, &msg);
        assert!(crypto::verify(&pk, &msg, &sig));
        for _ in 0..10 {
            let rejected = match rng.gen_range(0..3) {
                0 => {
                    let mut m = msg.clone();
                    let bit = rng.gen_range(0..m.len() * 8);
                    m[bit / 8] ^= 1 << (bit % 8);
                    !crypto::verify(&pk, &m, &sig)
                }
                1 => {
                    let mut s = sig;
                    let bit = rng.gen_range(0..512);
                    s.0[bit / 8] ^= 1 << (bit % 8);
                    !crypto::verify(&pk, &msg, &s)
                }
                _ => {
                    let mut p = *pk.as_bytes();
                    let bit = rng.gen_range(0..512);
                    p[bit / 8] ^= 1 << (bit % 8);
                    match crypto::PublicPoint::from_bytes(&p) {
                        Ok(pk2) => !crypto::verify(&pk2, &msg, &sig),
                        Err(_) => true,
                    }
                }
            };
            assert!(rejected);
            trials += 1;
        }
    }
}
