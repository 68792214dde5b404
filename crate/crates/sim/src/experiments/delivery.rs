//! Delivery-loss experiments: false denials under dropped heartbeats.

use hbhc_core::FreshnessPolicy;

use super::{mean_std, pct, ExperimentReport};
use crate::config::*;
use crate::engine::Simulation;
use crate::gossip::GossipOverlay;
use crate::rng::stream;
use crate::swarm::build_swarm;

pub const FPRR_SEEDS: u64 = 20;
pub const GOSSIP_SEEDS: u64 = 20;

const DROPS: [f64; 6] = [0.0, 0.01, 0.05, 0.10, 0.20, 0.30];
/// Reference FPRR (percent) per drop rate for the base configuration.
const BASE_REFERENCE: [(f64, f64); 5] = [
    (0.01, 0.01),
    (0.05, 0.07),
    (0.10, 0.15),
    (0.20, 0.39),
    (0.30, 1.24),
];

struct SeedRun {
    fprr: f64,
    max_missed: u64,
}

fn fprr_config(delivery: DeliveryModel, max_age: u64, seed: u64) -> SimConfig {
    SimConfig::new(
        HierarchySpec::new(vec![100]),
        delivery,
        FreshnessPolicy::time_epoch(10_000, max_age),
        100,
    )
    .with_seed(seed)
    .with_verification(VerificationMode::FreshnessOnly)
}

pub fn fprr(seed: u64) -> ExperimentReport {
    let mut r = ExperimentReport::new(
        "fprr",
        seed,
        &[
            "variant",
            "max_age",
            "drop_pct",
            "fprr_mean_pct",
            "fprr_std_pct",
            "max_consec_missed",
            "seeds",
        ],
    );
    r.param("children", 100);
    r.param("epochs", 100);
    r.param("interval_s", 10);
    r.param("seeds", FPRR_SEEDS);
    r.param("cadence", "one attempt per agent per epoch");

    let seeds: Vec<u64> = (0..FPRR_SEEDS).map(|i| seed.wrapping_add(i)).collect();
    let swarms: Vec<_> = seeds
        .iter()
        .map(|s| build_swarm(&HierarchySpec::new(vec![100]), *s).expect("static spec"))
        .collect();
    let sweep =
        |delivery: &dyn Fn(f64) -> DeliveryModel, max_age: u64, drop: f64| -> Vec<SeedRun> {
            seeds
                .iter()
                .zip(&swarms)
                .map(|(s, swarm)| {
                    let cfg = fprr_config(delivery(drop), max_age, *s);
                    let t = Simulation::with_swarm(cfg, swarm.clone())
                        .expect("valid config")
                        .finish();
                    SeedRun {
                        fprr: t.fprr(),
                        max_missed: t.max_consecutive_missed,
                    }
                })
                .collect()
        };

    let record =
        |r: &mut ExperimentReport, variant: &str, max_age: u64, drop: f64, runs: &[SeedRun]| {
            let xs: Vec<f64> = runs.iter().map(|x| x.fprr).collect();
            let (m, s) = mean_std(&xs);
            r.row(vec![
                variant.into(),
                max_age.to_string(),
                format!("{:.0}", drop * 100.0),
                pct(m),
                pct(s),
                runs.iter()
                    .map(|x| x.max_missed)
                    .max()
                    .unwrap_or(0)
                    .to_string(),
                runs.len().to_string(),
            ]);
            m
        };

    let push = |d| DeliveryModel::Push { drop_rate: d };
    let buffer = |d| DeliveryModel::Precompute {
        buffer_epochs: 3,
        drop_rate: d,
    };
    let dual = |d| DeliveryModel::DualPath {
        drop_rate_per_path: d,
    };

    let mut base_at = Vec::new();
    let mut dual_dominates = true;
    let mut buffer_10 = 0.0;
    let mut dual_10 = 0.0;
    for drop in DROPS {
        let base = sweep(&push, 3, drop);
        let mb = record(&mut r, "base", 3, drop, &base);
        base_at.push((drop, mb));
        let buf = sweep(&buffer, 3, drop);
        let mbuf = record(&mut r, "buffer_3", 3, drop, &buf);
        let dp = sweep(&dual, 3, drop);
        let md = record(&mut r, "dual_path", 3, drop, &dp);
        dual_dominates &= base.iter().zip(&dp).all(|(b, d)| d.fprr <= b.fprr);
        if drop == 0.10 {
            buffer_10 = mbuf;
            dual_10 = md;
        }
    }
    let short = sweep(&push, 1, 0.10);
    let m_short = record(&mut r, "base", 1, 0.10, &short);

    let zero = base_at[0].1;
    r.check("zero_drop", "0", pct(zero), "exact", zero == 0.0);
    for (drop, reference) in BASE_REFERENCE {
        let measured = base_at.iter().find(|(d, _)| *d == drop).expect("swept").1 * 100.0;
        let tol = (reference * 0.5).max(0.05);
        r.check(
            &format!("base_{:.0}pct", drop * 100.0),
            format!("{reference}%"),
            format!("{measured:.4}%"),
            &format!("+/-{tol:.3} pp"),
            (measured - reference).abs() <= tol,
        );
    }
    r.check(
        "buffer_10pct",
        "<= 0.05%",
        format!("{:.4}%", buffer_10 * 100.0),
        "ceiling",
        buffer_10 * 100.0 <= 0.05,
    );
    r.check(
        "dual_path_10pct",
        "<= 0.05%",
        format!("{:.4}%", dual_10 * 100.0),
        "ceiling",
        dual_10 * 100.0 <= 0.05,
    );
    r.check(
        "max_age_1_10pct",
        "1.11%",
        format!("{:.4}%", m_short * 100.0),
        "+/-0.4 pp",
        (m_short * 100.0 - 1.11).abs() <= 0.4,
    );
    r.check(
        "dual_path_dominates",
        "dual <= single per seed",
        dual_dominates,
        "exact",
        dual_dominates,
    );
    r
}

pub fn gossip(seed: u64) -> ExperimentReport {
    let n = 100usize;
    let per_hop_drop = 0.10;
    let mut r = ExperimentReport::new(
        "gossip",
        seed,
        &[
            "fanout",
            "fprr_mean_pct",
            "fprr_std_pct",
            "coverage_mean",
            "full_coverage_seeds",
            "zero_fprr_seeds",
            "max_consec_missed",
            "seeds",
        ],
    );
    r.param("children", n);
    r.param("epochs", 200);
    r.param("interval_s", 10);
    r.param("max_age", 3);
    r.param("per_hop_drop", per_hop_drop);
    r.param("seed_set_size", 5);
    r.param(
        "coverage",
        "children reachable from the seed set over the static overlay",
    );

    let seeds: Vec<u64> = (0..GOSSIP_SEEDS).map(|i| seed.wrapping_add(i)).collect();
    let swarms: Vec<_> = seeds
        .iter()
        .map(|s| build_swarm(&HierarchySpec::new(vec![n as u32]), *s).expect("static spec"))
        .collect();
    for (fanout, reference) in [(2u32, Some(19.87)), (3, Some(10.84)), (5, None), (8, None)] {
        let mut fprrs = Vec::new();
        let mut coverage = Vec::new();
        let mut max_missed = 0;
        let mut full = 0;
        let mut zero = 0;
        let mut both = 0;
        for (s, swarm) in seeds.iter().zip(&swarms) {
            let delivery = DeliveryModel::gossip(fanout, per_hop_drop);
            let cfg = SimConfig::new(
                HierarchySpec::new(vec![n as u32]),
                delivery,
                FreshnessPolicy::time_epoch(10_000, 3),
                200,
            )
            .with_seed(*s)
            .with_verification(VerificationMode::FreshnessOnly);
            let t = Simulation::with_swarm(cfg, swarm.clone())
                .expect("valid config")
                .finish();
            // same stream the engine uses for the root's overlay
            let overlay =
                GossipOverlay::build(n, fanout as usize, 5, &mut stream(*s, "overlay", 0, 0));
            let reach = overlay.reachable().len();
            let f = t.fprr();
            fprrs.push(f);
            coverage.push(reach as f64);
            max_missed = max_missed.max(t.max_consecutive_missed);
            let is_full = reach == n;
            // reported to two decimals in percent
            let is_zero = f * 100.0 < 0.005;
            full += u32::from(is_full);
            zero += u32::from(is_zero);
            both += u32::from(is_full && is_zero);
        }
        let (m, sd) = mean_std(&fprrs);
        let (cov, _) = mean_std(&coverage);
        r.row(vec![
            fanout.to_string(),
            pct(m),
            pct(sd),
            format!("{cov:.1}"),
            full.to_string(),
            zero.to_string(),
            max_missed.to_string(),
            seeds.len().to_string(),
        ]);
        match reference {
            Some(reference) => r.check(
                &format!("fanout_{fanout}"),
                format!("{reference}%"),
                format!("{:.2}%", m * 100.0),
                "+/-6 pp",
                (m * 100.0 - reference).abs() <= 6.0,
            ),
            None => r.check(
                &format!("fanout_{fanout}"),
                "FPRR 0.00% and coverage 100/100 in >= 18 of 20 seeds",
                format!("{both}/{}", seeds.len()),
                ">= 18 seeds",
                both >= 18,
            ),
        }
    }
    r
}
