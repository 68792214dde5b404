use std::collections::{BTreeMap, BTreeSet, HashMap};

use hbhc_core::heartbeat::{self, FreshnessMode, HeartbeatConfig};
use hbhc_core::verify::{self, Accepted, Rejection, Verdict, DEFAULT_CHALLENGE_TTL_MS};
use hbhc_core::{AgentLifecycleState, Challenge, Heartbeat, VerifierState};
use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;

use crate::config::*;
use crate::gossip::{default_max_rounds, GossipOverlay};
use crate::rng::stream;
use crate::swarm::{build_swarm, Swarm};
use crate::trace::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Entity {
    Agent(usize),
    Verifier,
}

#[derive(Debug, Clone)]
struct Revocation {
    /// Last local epoch the parent still emits.
    after_epoch: u64,
    /// Kill time, true ms since run start.
    t_r: u64,
    mode: RevocationMode,
    applied: bool,
}

#[derive(Debug, Clone)]
struct Partition {
    entities: Vec<Entity>,
    from_epoch: u64,
    to_epoch: u64,
}

#[derive(Debug, Clone, Default)]
struct AgentRuntime {
    /// Heartbeats received from this agent's parent, keyed by epoch.
    held: BTreeMap<u64, Heartbeat>,
    last_emitted: Option<u64>,
    seq: u64,
    fresh_since_emit: bool,
    /// Heartbeats this agent produced, for pre-computation and pulls.
    produced: BTreeMap<u64, Heartbeat>,
    latest: Option<Heartbeat>,
    revocation: Option<Revocation>,
    shutdown: bool,
    missed_run: u64,
    offset: i64,
}

/// A running simulation. Events can be scheduled before or between
/// [`Simulation::advance_to_epoch`] calls.
pub struct Simulation {
    cfg: SimConfig,
    swarm: Swarm,
    verifier: VerifierState,
    verifier_offset: i64,
    t0: u64,
    now: u64,
    started: bool,
    zero_done: bool,
    end: u64,
    hb_cfg: HeartbeatConfig,
    rt: Vec<AgentRuntime>,
    overlays: HashMap<usize, GossipOverlay>,
    exclusions: Vec<(usize, usize, u64)>,
    partitions: Vec<Partition>,
    nonce_rng: ChaCha8Rng,
    pull_rngs: Vec<Option<ChaCha8Rng>>,
    stats: EpochStats,
    trace: SimTrace,
}

pub fn run(cfg: &SimConfig) -> Result<SimTrace, SimError> {
    Ok(Simulation::new(cfg.clone())?.finish())
}

impl Simulation {
    pub fn new(cfg: SimConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let swarm = build_swarm(&cfg.spec, cfg.rng_seed)?;
        Self::with_swarm(cfg, swarm)
    }

    /// Runs over an already built swarm (its keys are reused as is).
    pub fn with_swarm(cfg: SimConfig, swarm: Swarm) -> Result<Self, SimError> {
        cfg.validate()?;
        let interval = cfg.policy.interval_ms;
        let hb_cfg = HeartbeatConfig::new(interval, cfg.policy.mode)
            .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        let mut rt = vec![AgentRuntime::default(); swarm.agents.len()];
        let mut verifier_offset = 0;
        for (entity, off) in &cfg.clock_offsets_ms {
            if entity == VERIFIER {
                verifier_offset = *off;
            } else {
                let idx = swarm
                    .index_of(entity)
                    .ok_or_else(|| SimError::UnknownAgent(entity.clone()))?;
                rt[idx].offset = *off;
            }
        }
        let verifier = match cfg.verifier_cache {
            CacheMode::Warm => swarm.verifier.clone(),
            CacheMode::Cold => VerifierState::new(),
        };
        let mut overlays = HashMap::new();
        if let DeliveryModel::Gossip {
            fanout,
            seed_set_size,
            ..
        } = cfg.delivery
        {
            for p in swarm.parents() {
                let mut rng = stream(cfg.rng_seed, "overlay", p as u64, 0);
                let n = swarm.agents[p].children.len();
                overlays.insert(
                    p,
                    GossipOverlay::build(n, fanout as usize, seed_set_size as usize, &mut rng),
                );
            }
        }
        let pull_rngs = (0..swarm.agents.len())
            .map(|i| {
                matches!(cfg.delivery, DeliveryModel::Pull { .. })
                    .then(|| stream(cfg.rng_seed, "pull", i as u64, 0))
            })
            .collect();
        let trace = SimTrace {
            interval_ms: interval,
            agents: swarm
                .agents
                .iter()
                .map(|a| AgentInfo {
                    id: a.id().to_string(),
                    level: a.level(),
                    parent: a.parent,
                })
                .collect(),
            ..SimTrace::default()
        };
        let mut sim = Self {
            t0: cfg.start_epoch * interval,
            now: 0,
            started: false,
            zero_done: false,
            end: cfg.duration_epochs * interval,
            nonce_rng: stream(cfg.rng_seed, "nonce", 0, 0),
            hb_cfg,
            verifier,
            verifier_offset,
            rt,
            overlays,
            exclusions: Vec::new(),
            partitions: Vec::new(),
            pull_rngs,
            stats: EpochStats::default(),
            trace,
            swarm,
            cfg,
        };
        for ev in sim.cfg.revocation_events.clone() {
            sim.revoke_parent(&ev.agent, ev.at_epoch, ev.offset_ms, ev.mode)?;
        }
        for ev in sim.cfg.exclusion_events.clone() {
            sim.exclude(&ev.parent, &ev.child, ev.from_epoch)?;
        }
        for ev in sim.cfg.partition_events.clone() {
            let ids: Vec<&str> = ev.entities.iter().map(String::as_str).collect();
            sim.partition(&ids, ev.from_epoch, ev.to_epoch)?;
        }
        Ok(sim)
    }

    pub fn swarm(&self) -> &Swarm {
        &self.swarm
    }

    pub fn verifier(&self) -> &VerifierState {
        &self.verifier
    }

    pub fn trace(&self) -> &SimTrace {
        &self.trace
    }

    fn interval(&self) -> u64 {
        self.cfg.policy.interval_ms
    }

    fn current_epoch(&self) -> u64 {
        self.now / self.interval()
    }

    fn index(&self, id: &str) -> Result<usize, SimError> {
        self.swarm
            .index_of(id)
            .ok_or_else(|| SimError::UnknownAgent(id.to_string()))
    }

    /// Implicit (or explicit) revocation: the parent emits `at_epoch`'s
    /// heartbeat, is killed `offset_ms` later on its own clock, and never
    /// emits again.
    pub fn revoke_parent(
        &mut self,
        id: &str,
        at_epoch: u64,
        offset_ms: u64,
        mode: RevocationMode,
    ) -> Result<(), SimError> {
        let idx = self.index(id)?;
        if !self.swarm.agents[idx].is_parent() {
            return Err(SimError::NotAParent(id.to_string()));
        }
        if self.rt[idx].revocation.is_some() {
            return Err(SimError::AlreadyRevoked(id.to_string()));
        }
        if offset_ms >= self.interval() {
            return Err(SimError::InvalidEvent(
                "revocation offset must lie within the epoch".into(),
            ));
        }
        let local_kill = (self.cfg.start_epoch + at_epoch) * self.interval() + offset_ms;
        let true_kill =
            i128::from(local_kill) - i128::from(self.rt[idx].offset) - i128::from(self.t0);
        let t_r = u64::try_from(true_kill.max(0)).unwrap_or(0);
        if at_epoch >= self.cfg.duration_epochs || (self.zero_done && t_r <= self.now) {
            return Err(SimError::InvalidEvent(format!(
                "revocation epoch {at_epoch} outside the remaining run"
            )));
        }
        self.rt[idx].revocation = Some(Revocation {
            after_epoch: self.cfg.start_epoch + at_epoch,
            t_r,
            mode,
            applied: false,
        });
        Ok(())
    }

    /// Selective revocation: `parent` stops delivering to `child`.
    pub fn exclude(&mut self, parent: &str, child: &str, from_epoch: u64) -> Result<(), SimError> {
        let p = self.index(parent)?;
        let c = self.index(child)?;
        if self.swarm.agents[c].parent != Some(p) {
            return Err(SimError::NotAChild {
                parent: parent.into(),
                child: child.into(),
            });
        }
        self.exclusions.push((p, c, from_epoch));
        Ok(())
    }

    /// No messages to or from `entities` during `[from_epoch, to_epoch)`.
    pub fn partition(
        &mut self,
        entities: &[&str],
        from_epoch: u64,
        to_epoch: u64,
    ) -> Result<(), SimError> {
        if from_epoch > to_epoch {
            return Err(SimError::InvalidEvent(format!(
                "partition range {from_epoch}..{to_epoch} is reversed"
            )));
        }
        let entities = entities
            .iter()
            .map(|e| {
                if *e == VERIFIER {
                    Ok(Entity::Verifier)
                } else {
                    self.index(e).map(Entity::Agent)
                }
            })
            .collect::<Result<_, _>>()?;
        self.partitions.push(Partition {
            entities,
            from_epoch,
            to_epoch,
        });
        Ok(())
    }

    fn blocked(&self, e: Entity) -> bool {
        let epoch = self.current_epoch();
        self.partitions
            .iter()
            .any(|p| (p.from_epoch..p.to_epoch).contains(&epoch) && p.entities.contains(&e))
    }

    fn excluded(&self, parent: usize, child: usize) -> bool {
        let epoch = self.current_epoch();
        self.exclusions
            .iter()
            .any(|(p, c, from)| *p == parent && *c == child && epoch >= *from)
    }

    fn local_ms(&self, idx: usize) -> u64 {
        (i128::from(self.t0 + self.now) + i128::from(self.rt[idx].offset)).max(0) as u64
    }

    fn verifier_ms(&self) -> u64 {
        (i128::from(self.t0 + self.now) + i128::from(self.verifier_offset)).max(0) as u64
    }

    fn entity_name(&self, e: Entity) -> String {
        match e {
            Entity::Agent(i) => self.swarm.agents[i].id().to_string(),
            Entity::Verifier => VERIFIER.to_string(),
        }
    }

    /// Agent is cut off from the root: some ancestor revoked or some edge on
    /// its path excluded.
    fn cut_off(&self, idx: usize) -> bool {
        let mut child = idx;
        while let Some(p) = self.swarm.agents[child].parent {
            if self.rt[p]
                .revocation
                .as_ref()
                .is_some_and(|r| r.t_r <= self.now)
                || self.excluded(p, child)
            {
                return true;
            }
            child = p;
        }
        false
    }

    fn record(
        &mut self,
        agent: usize,
        event: EventType,
        outcome: &str,
        reason: &str,
        age: Option<i64>,
    ) {
        if !self.cfg.trace_detail {
            return;
        }
        let a = &self.swarm.agents[agent];
        self.trace.records.push(TraceRecord {
            epoch: self.current_epoch(),
            agent_id: a.id().to_string(),
            level: a.level(),
            event_type: event,
            outcome: outcome.to_string(),
            reject_reason: reason.to_string(),
            heartbeat_age_epochs: age,
        });
    }

    fn send(&mut self, from: Entity, to: Entity) -> bool {
        if self.blocked(from) || self.blocked(to) {
            return false;
        }
        let (f, t) = (self.entity_name(from), self.entity_name(to));
        self.trace.network.record(&f, &t);
        self.stats.deliveries_attempted += 1;
        true
    }

    fn heartbeat_for(&mut self, p: usize, epoch: u64) -> Heartbeat {
        if let Some(hb) = self.rt[p].produced.get(&epoch) {
            return hb.clone();
        }
        let identity = &self.swarm.agents[p].identity;
        let hb = match self.cfg.policy.mode {
            FreshnessMode::TimeEpoch => {
                heartbeat::heartbeat_gen(identity, epoch * self.interval(), &self.hb_cfg)
            }
            FreshnessMode::Sequence => heartbeat::sequence_heartbeat_gen(identity, epoch),
        }
        .expect("simulation epochs stay far below the sentinel");
        self.stats.signatures += 1;
        let produced = &mut self.rt[p].produced;
        produced.insert(epoch, hb.clone());
        // a pre-computation window never needs more than a handful of entries
        while produced.len() > 64 {
            produced.pop_first();
        }
        hb
    }

    fn deliver(&mut self, child: usize, hbs: &[Heartbeat]) {
        self.stats.deliveries_succeeded += 1;
        let rt = &mut self.rt[child];
        rt.missed_run = 0;
        for hb in hbs {
            if hb.is_sentinel() {
                if !rt.shutdown {
                    rt.shutdown = true;
                    self.record(child, EventType::Shutdown, "sentinel", "", None);
                }
                return;
            }
            if rt.held.insert(hb.epoch, hb.clone()).is_none() {
                rt.fresh_since_emit = true;
            }
        }
    }

    fn miss(&mut self, child: usize) {
        let rt = &mut self.rt[child];
        rt.missed_run += 1;
        self.trace.max_consecutive_missed = self.trace.max_consecutive_missed.max(rt.missed_run);
    }

    fn note_delivery(&mut self, child: usize, ok: bool) {
        if self.cfg.trace_detail {
            self.record(
                child,
                EventType::Delivery,
                if ok { "delivered" } else { "dropped" },
                "",
                None,
            );
        }
    }

    /// Sends `payload` from parent `p` to its children according to the
    /// delivery model. `tag` separates random streams.
    fn distribute(&mut self, p: usize, payload: Vec<Heartbeat>, key: u64, tag: &str) {
        let children = self.swarm.agents[p].children.clone();
        let seed = self.cfg.rng_seed;
        match self.cfg.delivery {
            DeliveryModel::Push { drop_rate: d }
            | DeliveryModel::Precompute { drop_rate: d, .. } => {
                let mut rng = stream(seed, tag, p as u64, key);
                for c in children {
                    let u: f64 = rng.gen();
                    self.direct(p, c, &payload, &[u], d);
                }
            }
            DeliveryModel::DualPath {
                drop_rate_per_path: d,
            } => {
                let mut a = stream(seed, tag, p as u64, key);
                let mut b = stream(seed, &format!("{tag}-alt"), p as u64, key);
                for c in children {
                    let us = [a.gen::<f64>(), b.gen::<f64>()];
                    self.direct(p, c, &payload, &us, d);
                }
            }
            DeliveryModel::Pull { .. } => {}
            DeliveryModel::Gossip {
                per_hop_drop,
                max_rounds,
                ..
            } => {
                self.gossip(p, &children, &payload, key, tag, per_hop_drop, max_rounds);
            }
        }
    }

    /// Parent-to-child delivery over one or more independent paths.
    fn direct(&mut self, p: usize, c: usize, payload: &[Heartbeat], uniforms: &[f64], drop: f64) {
        if self.excluded(p, c) {
            return;
        }
        let mut ok = false;
        for u in uniforms {
            if self.send(Entity::Agent(p), Entity::Agent(c)) && *u >= drop {
                ok = true;
            }
        }
        self.note_delivery(c, ok);
        if ok {
            self.deliver(c, payload);
        } else {
            self.miss(c);
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn gossip(
        &mut self,
        p: usize,
        children: &[usize],
        payload: &[Heartbeat],
        key: u64,
        tag: &str,
        drop: f64,
        max_rounds: Option<u32>,
    ) {
        let overlay = self.overlays[&p].clone();
        let mut rng = stream(self.cfg.rng_seed, tag, p as u64, key);
        let mut holders = BTreeSet::new();
        for &s in &overlay.seeds {
            let u: f64 = rng.gen();
            let c = children[s];
            if !self.excluded(p, c) && self.send(Entity::Agent(p), Entity::Agent(c)) && u >= drop {
                holders.insert(s);
            }
        }
        let rounds = max_rounds.unwrap_or_else(|| default_max_rounds(children.len()));
        for _ in 0..rounds {
            let mut reached = BTreeSet::new();
            for &h in &holders {
                for &n in &overlay.out[h] {
                    if holders.contains(&n) || reached.contains(&n) {
                        continue;
                    }
                    let u: f64 = rng.gen();
                    if self.send(Entity::Agent(children[h]), Entity::Agent(children[n]))
                        && u >= drop
                    {
                        reached.insert(n);
                    }
                }
            }
            if reached.is_empty() {
                break;
            }
            holders.extend(reached);
        }
        self.stats.gossip_reached += holders.len() as u64;
        self.stats.gossip_targets += children.len() as u64;
        for (local, &c) in children.iter().enumerate() {
            let ok = holders.contains(&local);
            self.note_delivery(c, ok);
            if ok {
                self.deliver(c, payload);
            } else {
                self.miss(c);
            }
        }
    }

    fn may_emit(&self, p: usize, local_epoch: u64) -> bool {
        if let Some(r) = &self.rt[p].revocation {
            if local_epoch > r.after_epoch || self.now > r.t_r {
                return false;
            }
        }
        if self.swarm.agents[p].parent.is_none() {
            return true;
        }
        // an intermediate parent is only alive while its own parent is
        match self.cfg.policy.mode {
            FreshnessMode::TimeEpoch => self.rt[p].held.range(local_epoch..).next().is_some(),
            FreshnessMode::Sequence => self.rt[p].fresh_since_emit,
        }
    }

    fn emission_pass(&mut self) {
        for p in 0..self.swarm.agents.len() {
            if !self.swarm.agents[p].is_parent() || self.rt[p].shutdown {
                continue;
            }
            let local_epoch = self.local_ms(p) / self.interval();
            if self.rt[p].last_emitted.is_some_and(|l| l >= local_epoch)
                || !self.may_emit(p, local_epoch)
            {
                continue;
            }
            self.rt[p].last_emitted = Some(local_epoch);
            self.rt[p].fresh_since_emit = false;
            let key = match self.cfg.policy.mode {
                FreshnessMode::TimeEpoch => local_epoch,
                FreshnessMode::Sequence => {
                    self.rt[p].seq += 1;
                    self.rt[p].seq
                }
            };
            let hb = self.heartbeat_for(p, key);
            self.stats.heartbeats_generated += 1;
            self.rt[p].latest = Some(hb.clone());
            self.record(p, EventType::HeartbeatEmit, "emitted", "", None);
            let payload = match self.cfg.delivery {
                DeliveryModel::Precompute { buffer_epochs, .. } => (key..key + buffer_epochs)
                    .map(|e| self.heartbeat_for(p, e))
                    .collect(),
                _ => vec![hb],
            };
            self.distribute(p, payload, key, "deliver");
        }
    }

    fn apply_kills(&mut self) {
        for p in 0..self.rt.len() {
            let Some(r) = self.rt[p].revocation.clone() else {
                continue;
            };
            if r.applied || r.t_r > self.now {
                continue;
            }
            self.rt[p]
                .revocation
                .as_mut()
                .expect("checked above")
                .applied = true;
            self.trace.revocations.push(RevocationRecord {
                agent: p,
                at_epoch: r.after_epoch - self.cfg.start_epoch,
                t_r_ms: r.t_r,
                mode: r.mode,
            });
            self.record(p, EventType::Revoke, "revoked", "", None);
            if r.mode == RevocationMode::Explicit {
                let sentinel = heartbeat::revocation_heartbeat(&self.swarm.agents[p].identity);
                self.distribute(p, vec![sentinel.clone()], u64::MAX, "sentinel");
                let drop = match self.cfg.delivery {
                    DeliveryModel::Push { drop_rate: d }
                    | DeliveryModel::Precompute { drop_rate: d, .. }
                    | DeliveryModel::Pull { drop_rate: d } => d,
                    DeliveryModel::DualPath {
                        drop_rate_per_path: d,
                    } => d * d,
                    DeliveryModel::Gossip { per_hop_drop, .. } => per_hop_drop,
                };
                let u: f64 = stream(self.cfg.rng_seed, "sentinel-verifier", p as u64, 0).gen();
                if self.send(Entity::Agent(p), Entity::Verifier) && u >= drop {
                    let id = self.swarm.agents[p].id().clone();
                    self.verifier.observe_heartbeat(&id, &sentinel);
                }
                if matches!(self.cfg.delivery, DeliveryModel::Pull { .. }) {
                    // pull children learn of the sentinel on their next fetch
                    self.rt[p].latest = Some(sentinel);
                }
            }
        }
    }

    fn pull(&mut self, c: usize) {
        let DeliveryModel::Pull { drop_rate } = self.cfg.delivery else {
            return;
        };
        let p = self.swarm.agents[c].parent.expect("only children pull");
        let u: f64 = self.pull_rngs[c]
            .as_mut()
            .expect("pull stream exists")
            .gen();
        let dead = self.rt[p]
            .revocation
            .as_ref()
            .is_some_and(|r| self.now > r.t_r);
        let Some(latest) = self.rt[p].latest.clone() else {
            return;
        };
        // a dead parent serves nothing except a published sentinel
        if self.excluded(p, c)
            || (dead && !latest.is_sentinel())
            || !self.send(Entity::Agent(c), Entity::Agent(p))
        {
            return;
        }
        if u < drop_rate || !self.send(Entity::Agent(p), Entity::Agent(c)) {
            return;
        }
        self.deliver(c, &[latest]);
    }

    fn present(&mut self, c: usize) -> Option<Heartbeat> {
        let rt = &mut self.rt[c];
        let hb = match self.cfg.policy.mode {
            FreshnessMode::TimeEpoch => {
                let local_epoch = (i128::from(self.t0 + self.now) + i128::from(rt.offset)).max(0)
                    as u64
                    / self.cfg.policy.interval_ms;
                let (&e, hb) = rt.held.range(..=local_epoch).next_back()?;
                let hb = hb.clone();
                rt.held = rt.held.split_off(&e);
                hb
            }
            FreshnessMode::Sequence => rt.held.last_key_value()?.1.clone(),
        };
        Some(hb)
    }

    fn verify(&mut self, c: usize, hb: &Heartbeat) -> Verdict {
        let now = self.verifier_ms();
        let agent = &self.swarm.agents[c];
        let cred = agent
            .credential
            .as_ref()
            .expect("non-root agents hold credentials");
        let policy = self.cfg.policy;
        let verdict = match self.cfg.verification {
            VerificationMode::Full => {
                let mut nonce = [0u8; 32];
                self.nonce_rng.fill_bytes(&mut nonce);
                let mut challenge = Challenge::from_nonce(nonce, now, DEFAULT_CHALLENGE_TTL_MS);
                let proof =
                    verify::create_auth_proof(&agent.identity.identity_sk, cred, hb, &nonce);
                return verify::verify_auth(
                    &proof,
                    &mut self.verifier,
                    &mut challenge,
                    now,
                    &policy,
                );
            }
            VerificationMode::FreshnessOnly => verify::precheck(
                hb.epoch,
                &hb.sig,
                &cred.parent_id,
                &cred.child_id,
                &self.verifier,
                now,
                &policy,
            )
            .map(|(_, age)| Accepted {
                parent_id: cred.parent_id.clone(),
                child_id: cred.child_id.clone(),
                age_epochs: age,
                sequence: (policy.mode == FreshnessMode::Sequence).then_some(hb.epoch),
            }),
        };
        self.verifier.commit(&verdict);
        verdict
    }

    fn attempt(&mut self, c: usize) {
        if self.rt[c].shutdown {
            return;
        }
        self.pull(c);
        if self.rt[c].shutdown {
            return;
        }
        let legitimate = !self.cut_off(c);
        let (outcome, age, presented) = match self.present(c) {
            None => (Outcome::NoHeartbeat, None, None),
            Some(hb) => match self.verify(c, &hb) {
                Ok(a) => (Outcome::Accept, a.age_epochs, Some(hb.epoch)),
                Err(Rejection {
                    reason, age_epochs, ..
                }) => (Outcome::Reject(reason), age_epochs, Some(hb.epoch)),
            },
        };
        self.stats.auth_attempts += 1;
        if outcome.is_accept() {
            self.stats.auth_accepted += 1;
        }
        self.record(c, EventType::Auth, outcome.label(), outcome.reason(), age);
        self.trace.attempts.push(AttemptRecord {
            time_ms: self.now,
            epoch: self.current_epoch(),
            agent: c,
            outcome,
            age_epochs: age,
            presented_epoch: presented,
            legitimate,
        });
    }

    fn lifecycle(&mut self, c: usize) -> AgentLifecycleState {
        if self.rt[c].shutdown {
            return AgentLifecycleState::Terminated;
        }
        let revoked_at = self
            .swarm
            .ancestors(c)
            .iter()
            .filter_map(|a| {
                self.rt[*a]
                    .revocation
                    .as_ref()
                    .filter(|r| r.applied)
                    .map(|r| self.t0 + r.t_r)
            })
            .min();
        let now = self.verifier_ms();
        let newest = self.rt[c]
            .held
            .range(..=now / self.interval())
            .next_back()
            .map(|(e, _)| *e);
        verify::classify_state(newest, revoked_at, now, &self.cfg.policy)
    }

    fn end_of_epoch(&mut self) {
        if self.cfg.policy.mode == FreshnessMode::TimeEpoch {
            for c in 1..self.swarm.agents.len() {
                let state = self.lifecycle(c);
                match state {
                    AgentLifecycleState::Active => self.stats.active += 1,
                    AgentLifecycleState::Zombie => self.stats.zombie += 1,
                    AgentLifecycleState::Terminated => self.stats.terminated += 1,
                }
                self.record(c, EventType::State, &state.to_string(), "", None);
            }
        }
        self.stats.live_parents = self
            .swarm
            .parents()
            .filter(|p| {
                self.rt[*p]
                    .last_emitted
                    .is_some_and(|l| l == self.local_ms(*p) / self.interval())
            })
            .count() as u64;
        let mut stats = std::mem::take(&mut self.stats);
        stats.epoch = self.current_epoch();
        self.trace.epochs.push(stats);
    }

    fn is_attempt_tick(&self, t: u64) -> bool {
        match self.cfg.auth_cadence {
            AuthCadence::PerEpoch => t % self.interval() == self.interval() - TICK_MS,
            AuthCadence::EveryMs(ms) => t % ms == 0,
        }
    }

    fn next_tick(&self) -> u64 {
        let t = self.now;
        let iv = self.interval();
        let round_up = |x: u64| x.div_ceil(TICK_MS) * TICK_MS;
        let mut next = (t / iv + 1) * iv + iv - TICK_MS;
        if t % iv < iv - TICK_MS {
            next = (t / iv) * iv + iv - TICK_MS;
        }
        if let AuthCadence::EveryMs(ms) = self.cfg.auth_cadence {
            next = next.min((t / ms + 1) * ms);
        }
        for p in self.swarm.parents() {
            let local = self.local_ms(p);
            let boundary = (local / iv + 1) * iv;
            let true_rel = boundary as i128 - i128::from(self.rt[p].offset) - i128::from(self.t0);
            let cand = round_up(true_rel.max(0) as u64);
            if cand > t {
                next = next.min(cand);
            }
            if let Some(r) = &self.rt[p].revocation {
                if !r.applied && round_up(r.t_r) > t {
                    next = next.min(round_up(r.t_r));
                }
            }
        }
        next
    }

    fn step(&mut self) {
        self.apply_kills();
        self.emission_pass();
        if self.is_attempt_tick(self.now) {
            for c in 1..self.swarm.agents.len() {
                self.attempt(c);
            }
            // pulls can make an intermediate parent alive again within the tick
            self.emission_pass();
        }
        if self.now % self.interval() == self.interval() - TICK_MS {
            self.end_of_epoch();
        }
    }

    fn provision(&mut self) {
        if let DeliveryModel::Precompute { buffer_epochs, .. } = self.cfg.delivery {
            for p in self.swarm.parents().collect::<Vec<_>>() {
                let first = match self.cfg.policy.mode {
                    FreshnessMode::TimeEpoch => self.local_ms(p) / self.interval(),
                    FreshnessMode::Sequence => 1,
                };
                let buffer: Vec<Heartbeat> = (first..first + buffer_epochs)
                    .map(|e| self.heartbeat_for(p, e))
                    .collect();
                for c in self.swarm.agents[p].children.clone() {
                    let rt = &mut self.rt[c];
                    for hb in &buffer {
                        rt.held.insert(hb.epoch, hb.clone());
                    }
                }
            }
        }
    }

    /// Processes every tick before the start of relative epoch `epoch`.
    pub fn advance_to_epoch(&mut self, epoch: u64) {
        let limit = (epoch * self.interval()).min(self.end);
        if !self.started {
            self.started = true;
            self.provision();
        }
        if !self.zero_done && limit > 0 {
            self.zero_done = true;
            self.step();
        }
        loop {
            let next = self.next_tick();
            if next >= limit {
                break;
            }
            self.now = next;
            self.step();
        }
    }

    pub fn finish(mut self) -> SimTrace {
        self.advance_to_epoch(self.cfg.duration_epochs);
        self.trace
    }
}
