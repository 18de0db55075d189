//! Deterministic discrete-event simulation of the tracing protocol.
//!
//! A seeded scenario expands into per-client visit histories, then the
//! protocol runs as timestamped events: confirmed patients upload their
//! hashed histories, the authority broadcasts the deduplicated union, and
//! every client cross-checks locally, reporting back when alerted. Delivery
//! is reliable and ordered with a configurable fixed latency. The whole run
//! is a pure function of the scenario; identical seeds give byte-identical
//! serialized reports.
//!
//! [`brute_force_match_oracle`] computes the same alert set from the
//! plaintext ground truth with nested loops, bypassing hashing, uploads, and
//! broadcasts entirely; pipeline/oracle equality is the protocol's main
//! correctness check.

use crate::protocol::{
    authority_broadcast, hash_venue, Alert, Broadcast, ClientId, ClientLog, ExposurePolicy,
    ProtocolError, Upload, VenueId,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Simulation input; serialized as JSON with these keys (`policy` and
/// `latency_ms` default when omitted).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimScenario {
    pub clients: u32,
    pub venues: u32,
    pub horizon_ms: i64,
    pub visits_per_client: u32,
    pub dwell_ms_min: i64,
    pub dwell_ms_max: i64,
    pub patient_ids: Vec<ClientId>,
    pub confirmation_time_ms: i64,
    #[serde(default)]
    pub policy: ExposurePolicy,
    /// Fixed message delivery latency of the reliable network model.
    #[serde(default)]
    pub latency_ms: i64,
    pub seed: u64,
}

impl SimScenario {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let fail = |msg: String| Err(ProtocolError::InvalidScenario(msg));
        if self.clients == 0 {
            return fail("clients must be >= 1".into());
        }
        if self.venues == 0 {
            return fail("venues must be >= 1".into());
        }
        if self.horizon_ms <= 0 {
            return fail(format!("horizon_ms {} must be > 0", self.horizon_ms));
        }
        if self.dwell_ms_min < 1 || self.dwell_ms_max < self.dwell_ms_min {
            return fail(format!(
                "dwell range [{}, {}] is invalid",
                self.dwell_ms_min, self.dwell_ms_max
            ));
        }
        if self.patient_ids.is_empty() {
            return fail("patient_ids must be non-empty".into());
        }
        if let Some(&bad) = self.patient_ids.iter().find(|&&p| p >= self.clients) {
            return fail(format!("patient id {bad} is not a client"));
        }
        if self.confirmation_time_ms > self.horizon_ms {
            return fail(format!(
                "confirmation_time_ms {} exceeds horizon_ms {}",
                self.confirmation_time_ms, self.horizon_ms
            ));
        }
        if self.latency_ms < 0 {
            return fail(format!("latency_ms {} must be >= 0", self.latency_ms));
        }
        self.policy.validate()
    }

    /// Patient ids as a sorted, deduplicated set.
    pub fn patient_set(&self) -> Vec<ClientId> {
        let mut ids = self.patient_ids.clone();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

/// Venue id used by the simulator for venue index `i`.
pub fn sim_venue_id(index: u32) -> VenueId {
    VenueId::new(format!("venue-{index:03}")).expect("generated venue ids are valid")
}

/// The plaintext ground truth of a scenario: every client's local log plus
/// the patient set. Produced deterministically from the scenario seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SimWorld {
    pub clients: Vec<ClientLog>,
    pub patient_ids: Vec<ClientId>,
}

/// Expand a scenario into visit histories. Visits per client are laid out
/// left to right with seeded gaps and dwells, so they never self-overlap;
/// venue choice is uniform over the venue universe.
pub fn generate_world(scenario: &SimScenario) -> Result<SimWorld, ProtocolError> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let gap_spread = (scenario.horizon_ms / (i64::from(scenario.visits_per_client) + 1)).max(1);
    let mut clients = Vec::with_capacity(scenario.clients as usize);
    for id in 0..scenario.clients {
        let mut log = ClientLog::new(id);
        let mut t = 0i64;
        for _ in 0..scenario.visits_per_client {
            let gap = rng.gen_range(0..=gap_spread);
            let dwell = rng.gen_range(scenario.dwell_ms_min..=scenario.dwell_ms_max);
            let checkin = t + gap;
            let checkout = checkin + dwell;
            if checkout > scenario.horizon_ms {
                break;
            }
            let venue = sim_venue_id(rng.gen_range(0..scenario.venues));
            log.record_visit(venue, checkin, checkout)?;
            t = checkout;
        }
        clients.push(log);
    }
    Ok(SimWorld {
        clients,
        patient_ids: scenario.patient_set(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    Upload,
    Broadcast,
    Report,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum MessagePayload {
    Upload(Upload),
    Broadcast(Broadcast),
    Report { alert_count: usize },
}

/// One logged protocol message.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Message {
    pub t_ms: i64,
    pub kind: MessageKind,
    pub sender: String,
    pub receiver: String,
    pub payload: MessagePayload,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct MessageStats {
    pub uploads: usize,
    pub broadcasts: usize,
    pub reports: usize,
}

/// Simulation output: the alert set, the ordered message log, and per-kind
/// message counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub alerts: Vec<Alert>,
    pub message_log: Vec<Message>,
    pub stats: MessageStats,
}

impl SimulationReport {
    /// Newline-delimited JSON export of the message log, one message per
    /// line.
    pub fn message_log_ndjson(&self) -> serde_json::Result<String> {
        let mut out = String::new();
        for message in &self.message_log {
            out.push_str(&serde_json::to_string(message)?);
            out.push('\n');
        }
        Ok(out)
    }
}

fn client_name(id: ClientId) -> String {
    format!("client-{id}")
}

/// Run the full protocol over a seeded scenario.
pub fn run_simulation(scenario: &SimScenario) -> Result<SimulationReport, ProtocolError> {
    let mut world = generate_world(scenario)?;
    let policy = scenario.policy;
    let t_confirm = scenario.confirmation_time_ms;
    let latency = scenario.latency_ms;

    let mut message_log = Vec::new();
    let mut stats = MessageStats::default();

    // Confirmed patients upload their retained history to the authority.
    let mut uploads = Vec::with_capacity(world.patient_ids.len());
    for &patient in &world.patient_ids {
        let upload = world.clients[patient as usize].patient_upload(t_confirm, &policy);
        message_log.push(Message {
            t_ms: t_confirm,
            kind: MessageKind::Upload,
            sender: client_name(patient),
            receiver: "authority".into(),
            payload: MessagePayload::Upload(upload.clone()),
        });
        stats.uploads += 1;
        uploads.push(upload);
    }

    // The authority broadcasts the deduplicated union to everyone.
    let t_broadcast = t_confirm + latency;
    let broadcast = authority_broadcast(&uploads, t_broadcast)?;
    message_log.push(Message {
        t_ms: t_broadcast,
        kind: MessageKind::Broadcast,
        sender: "authority".into(),
        receiver: "*".into(),
        payload: MessagePayload::Broadcast(broadcast.clone()),
    });
    stats.broadcasts += 1;

    // Clients cross-check locally once the broadcast arrives; alerted
    // clients report back (count only, no venue data).
    let t_match = t_broadcast + latency;
    let mut alerts: BTreeSet<Alert> = BTreeSet::new();
    for client in &world.clients {
        let own = client.cross_check(&broadcast, &policy);
        if !own.is_empty() {
            message_log.push(Message {
                t_ms: t_match,
                kind: MessageKind::Report,
                sender: client_name(client.id()),
                receiver: "authority".into(),
                payload: MessagePayload::Report {
                    alert_count: own.len(),
                },
            });
            stats.reports += 1;
        }
        alerts.extend(own);
    }

    Ok(SimulationReport {
        alerts: alerts.into_iter().collect(),
        message_log,
        stats,
    })
}

/// Centralized plaintext oracle: enumerate (patient visit, client visit)
/// pairs over the ground-truth world and apply the retention, venue-equality
/// and overlap predicates directly, with full visibility of every log.
/// Output uses the protocol's alert schema so the two routes compare
/// exactly.
pub fn brute_force_match_oracle(
    world: &SimWorld,
    confirmation_time_ms: i64,
    policy: &ExposurePolicy,
) -> BTreeSet<Alert> {
    let cutoff = confirmation_time_ms - i64::from(policy.retention_days) * 86_400_000;
    let patients: BTreeSet<ClientId> = world.patient_ids.iter().copied().collect();

    // What the broadcast would contain, in plaintext: retained patient
    // visits, deduplicated on (venue, interval).
    let mut patient_entries: BTreeSet<(String, i64, i64)> = BTreeSet::new();
    for &p in &patients {
        for v in world.clients[p as usize].visits() {
            if v.checkout_ms >= cutoff {
                patient_entries.insert((v.venue.as_str().to_string(), v.checkin_ms, v.checkout_ms));
            }
        }
    }

    let mut alerts = BTreeSet::new();
    for client in &world.clients {
        // A patient skips entries it contributed itself.
        let own: BTreeSet<(String, i64, i64)> = if patients.contains(&client.id()) {
            client
                .visits()
                .iter()
                .filter(|v| v.checkout_ms >= cutoff)
                .map(|v| (v.venue.as_str().to_string(), v.checkin_ms, v.checkout_ms))
                .collect()
        } else {
            BTreeSet::new()
        };
        for visit in client.visits() {
            for entry in &patient_entries {
                if own.contains(entry) {
                    continue;
                }
                let (venue_name, p_in, p_out) = entry;
                if venue_name != visit.venue.as_str() {
                    continue;
                }
                if visit.checkin_ms - policy.slack_ms < *p_out
                    && *p_in < visit.checkout_ms + policy.slack_ms
                {
                    alerts.insert(Alert {
                        client: client.id(),
                        digest: hash_venue(&visit.venue),
                        patient_checkin_ms: *p_in,
                        patient_checkout_ms: *p_out,
                        client_checkin_ms: visit.checkin_ms,
                        client_checkout_ms: visit.checkout_ms,
                    });
                }
            }
        }
    }
    alerts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(seed: u64) -> SimScenario {
        SimScenario {
            clients: 12,
            venues: 4,
            horizon_ms: 10 * 86_400_000,
            visits_per_client: 8,
            dwell_ms_min: 600_000,
            dwell_ms_max: 7_200_000,
            patient_ids: vec![0, 3],
            confirmation_time_ms: 9 * 86_400_000,
            policy: ExposurePolicy::default(),
            latency_ms: 50,
            seed,
        }
    }

    #[test]
    fn zero_patients_is_invalid() {
        let mut sc = scenario(1);
        sc.patient_ids.clear();
        assert!(matches!(
            run_simulation(&sc),
            Err(ProtocolError::InvalidScenario(_))
        ));
    }

    #[test]
    fn out_of_range_patient_is_invalid() {
        let mut sc = scenario(1);
        sc.patient_ids = vec![99];
        assert!(sc.validate().is_err());
    }

    #[test]
    fn same_scenario_gives_identical_serialized_reports() {
        let sc = scenario(8);
        let a = serde_json::to_string(&run_simulation(&sc).unwrap()).unwrap();
        let b = serde_json::to_string(&run_simulation(&sc).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn handcrafted_overlap_produces_one_alert() {
        // One patient, one client, one venue, overlapping intervals.
        let mut world = SimWorld {
            clients: vec![ClientLog::new(0), ClientLog::new(1)],
            patient_ids: vec![0],
        };
        world.clients[0]
            .record_visit(sim_venue_id(0), 1_000, 5_000)
            .unwrap();
        world.clients[1]
            .record_visit(sim_venue_id(0), 2_000, 3_000)
            .unwrap();
        let policy = ExposurePolicy::default();
        let alerts = brute_force_match_oracle(&world, 10_000, &policy);
        assert_eq!(alerts.len(), 1);
        let alert = alerts.iter().next().unwrap();
        assert_eq!(alert.client, 1);
        assert_eq!(alert.digest, hash_venue(&sim_venue_id(0)));
    }

    #[test]
    fn oracle_on_empty_world_is_empty() {
        let world = SimWorld {
            clients: vec![ClientLog::new(0)],
            patient_ids: vec![0],
        };
        assert!(brute_force_match_oracle(&world, 0, &ExposurePolicy::default()).is_empty());
    }

    #[test]
    fn pipeline_equals_oracle_on_seeded_scenarios() {
        for seed in 0..8u64 {
            let sc = scenario(seed);
            let report = run_simulation(&sc).unwrap();
            let world = generate_world(&sc).unwrap();
            let oracle = brute_force_match_oracle(&world, sc.confirmation_time_ms, &sc.policy);
            let pipeline: BTreeSet<Alert> = report.alerts.iter().copied().collect();
            assert_eq!(pipeline, oracle, "seed {seed}");
        }
    }

    #[test]
    fn wire_messages_carry_no_plaintext_venue_ids() {
        let sc = scenario(5);
        let report = run_simulation(&sc).unwrap();
        let venue_names: Vec<String> = (0..sc.venues)
            .map(|i| sim_venue_id(i).to_string())
            .collect();
        for message in &report.message_log {
            if matches!(message.kind, MessageKind::Upload | MessageKind::Broadcast) {
                let wire = serde_json::to_string(message).unwrap();
                for name in &venue_names {
                    assert!(
                        !wire.contains(name.as_str()),
                        "plaintext {name} leaked in {wire}"
                    );
                }
            }
        }
    }

    #[test]
    fn alerts_satisfy_their_overlap_predicate() {
        let sc = scenario(6);
        let report = run_simulation(&sc).unwrap();
        for alert in &report.alerts {
            assert!(alert.satisfies_overlap(&sc.policy));
        }
    }

    #[test]
    fn message_log_is_time_ordered_with_expected_counts() {
        let sc = scenario(7);
        let report = run_simulation(&sc).unwrap();
        assert_eq!(report.stats.uploads, 2);
        assert_eq!(report.stats.broadcasts, 1);
        let mut last = i64::MIN;
        for m in &report.message_log {
            assert!(m.t_ms >= last);
            last = m.t_ms;
        }
        let ndjson = report.message_log_ndjson().unwrap();
        assert_eq!(ndjson.lines().count(), report.message_log.len());
    }
}
